//! Residual assemblers for the discrete Euler-Lagrange, Euler-Poincare and
//! higher-order Lagrange-Poincare equations.
//!
//! Every assembler returns the gradient of the corresponding discrete
//! action sum: the configuration rows are derivatives with respect to
//! `q_j`, and the group rows are derivatives along `g_j <- g_j tau(eps eta)`
//! (or `tau(eps eta) g_j` for the right trivialization), written in the dual
//! basis of the algebra.

use nalgebra::DVector;

use super::{
    constraint_gradients, lagrangian_gradient, reduced_gradient, DiscreteConstraintSet,
    DiscreteLagrangian, DiscretePath, ReducedLagrangian, Trivialization, WindowGradient,
};
use crate::error::{Error, Result};
use crate::lie::{AlgebraVector, Covector, GroupElement};
use crate::retraction::Retraction;
use crate::scalar::Real;

/// First-order discrete Euler-Lagrange residual
/// `D1 L_d(q_k, q_{k+1}) + D2 L_d(q_{k-1}, q_k)` for `k = 1 .. N-1`.
///
/// Partial derivatives are central differences with step
/// `eps^(1/3) max(1, |x|)`.
pub fn del_residual_first_order<T: Real>(
    ld: &dyn Fn(&DVector<T>, &DVector<T>) -> T,
    path: &[DVector<T>],
) -> Result<Vec<DVector<T>>> {
    if path.len() < 3 {
        return Err(Error::Size(format!(
            "first-order discrete Euler-Lagrange needs at least 3 nodes, got {}",
            path.len()
        )));
    }
    let partial = |a: &DVector<T>, b: &DVector<T>, slot: usize| {
        let mut out = DVector::zeros(a.len());
        let (mut a, mut b) = (a.clone(), b.clone());
        for c in 0..out.len() {
            let x = if slot == 0 { a[c] } else { b[c] };
            let step = T::fd_step(x);
            let target = |a: &mut DVector<T>, b: &mut DVector<T>, v: T| {
                if slot == 0 {
                    a[c] = v
                } else {
                    b[c] = v
                }
            };
            target(&mut a, &mut b, x + step);
            let fp = ld(&a, &b);
            target(&mut a, &mut b, x - step);
            let fm = ld(&a, &b);
            target(&mut a, &mut b, x);
            out[c] = (fp - fm) / (step + step);
        }
        out
    };
    Ok((1..path.len() - 1)
        .map(|k| partial(&path[k], &path[k + 1], 0) + partial(&path[k - 1], &path[k], 1))
        .collect())
}

/// Group row at node `j` from the summed algebra derivatives
/// `s_prev = dS/dxi_{j-1}` and `s = dS/dxi_j`.
///
/// Left: `(Ad*_{W_{j-1}} dtau^{-1*}_{h xi_{j-1}} s_prev - dtau^{-1*}_{h xi_j} s) / h`.
/// Right: `(dtau^{-1*}_{h xi_{j-1}} s_prev - Ad*_{W_j} dtau^{-1*}_{h xi_j} s) / h`.
pub(crate) fn group_row<T: Real>(
    h: T,
    retraction: &Retraction,
    triv: Trivialization,
    xi_prev: &AlgebraVector<T>,
    xi: &AlgebraVector<T>,
    s_prev: &Covector<T>,
    s: &Covector<T>,
) -> Covector<T> {
    let a_prev = xi_prev.scale(h);
    let a = xi.scale(h);
    let back = retraction.dtau_inv_star(&a_prev, s_prev).expect("same group");
    let fwd = retraction.dtau_inv_star(&a, s).expect("same group");
    let diff = match triv {
        Trivialization::Left => {
            let w_prev = retraction.tau(&a_prev);
            w_prev.coadjoint(&back).expect("same group") - fwd
        }
        Trivialization::Right => {
            let w = retraction.tau(&a);
            back - w.coadjoint(&fwd).expect("same group")
        }
    };
    diff.scale(T::one() / h)
}

/// Discrete Euler-Poincare residual for a reduced Lagrangian on `G`, one
/// covector per interior node `k = 1 .. N-1` of the increment sequence
/// `W_0 .. W_{N-1}`.
pub fn dep_residual<T: Real>(
    lhat: &dyn ReducedLagrangian<T>,
    increments: &[GroupElement<T>],
    h: T,
    retraction: &Retraction,
    triv: Trivialization,
) -> Result<Vec<Covector<T>>> {
    if increments.len() < 2 {
        return Err(Error::Size(format!(
            "discrete Euler-Poincare needs at least 2 increments, got {}",
            increments.len()
        )));
    }
    let xi = increments
        .iter()
        .enumerate()
        .map(|(k, w)| {
            retraction
                .tau_inv(w)
                .map(|x| x.scale(T::one() / h))
                .map_err(|e| Error::RetractionSingularAt {
                    index: k,
                    source: Box::new(e),
                })
        })
        .collect::<Result<Vec<_>>>()?;
    let s: Vec<_> = xi.iter().map(|x| reduced_gradient(lhat, h, x)).collect();
    Ok((1..xi.len())
        .map(|j| group_row(h, retraction, triv, &xi[j - 1], &xi[j], &s[j - 1], &s[j]))
        .collect())
}

/// Residual blocks of the constrained higher-order discrete equations.
#[derive(Debug, Clone, PartialEq)]
pub struct DlpResidual<T: Real> {
    /// Order `k`; stationarity rows are nodes `k ..= N-k`.
    pub order: usize,
    /// Configuration rows, one per stationarity node.
    pub m_part: Vec<DVector<T>>,
    /// Group rows, one per stationarity node.
    pub g_part: Vec<Covector<T>>,
    /// Constraint values, one per window `0 ..= N-k`.
    pub constraints: Vec<DVector<T>>,
}

impl<T: Real> DlpResidual<T> {
    /// Largest absolute entry over all blocks.
    pub fn max_abs(&self) -> T {
        let m = self.m_part.iter().flat_map(|v| v.iter().copied());
        let g = self.g_part.iter().flat_map(|c| c.coords().iter().copied().collect::<Vec<_>>());
        let c = self.constraints.iter().flat_map(|v| v.iter().copied());
        m.chain(g).chain(c).fold(T::zero(), |acc, x| acc.max(x.abs()))
    }
}

/// Per-window data shared by the residual and the Jacobian structure:
/// augmented gradients `grad L + sum_alpha lambda_alpha grad Phi_alpha` and
/// constraint values.
pub(crate) struct WindowTerms<T: Real> {
    pub grads: Vec<WindowGradient<T>>,
    pub phi: Vec<DVector<T>>,
}

pub(crate) fn window_terms<T: Real>(
    ld: &dyn DiscreteLagrangian<T>,
    phi: &dyn DiscreteConstraintSet<T>,
    path: &DiscretePath<T>,
    windows: std::ops::RangeInclusive<usize>,
) -> WindowTerms<T> {
    let k = ld.order();
    let m = phi.count();
    let triv = path.trivialization;
    let mut grads = Vec::new();
    let mut values = Vec::new();
    for i in windows {
        let w = path.window(i, k);
        let mut grad = lagrangian_gradient(ld, &w, triv);
        if m > 0 {
            let mut v = DVector::zeros(m);
            phi.eval(&w, v.as_mut_slice());
            let pg = constraint_gradients(phi, &w, triv);
            let lam = &path.lambda[i];
            for (alpha, g) in pg.iter().enumerate() {
                grad.add_scaled(lam[alpha], g);
            }
            values.push(v);
        } else {
            values.push(DVector::zeros(0));
        }
        grads.push(grad);
    }
    WindowTerms {
        grads,
        phi: values,
    }
}

fn check_path<T: Real>(
    ld: &dyn DiscreteLagrangian<T>,
    m: usize,
    path: &DiscretePath<T>,
) -> Result<()> {
    let k = ld.order();
    let n_steps = path.steps();
    if k == 0 {
        return Err(Error::Size("discrete Lagrangian order must be positive".into()));
    }
    if n_steps <= 2 * k {
        return Err(Error::Size(format!(
            "order-{k} equations need N > {}, got N = {n_steps}",
            2 * k
        )));
    }
    if path.q.len() != n_steps + 1 || path.g.len() != n_steps + 1 {
        return Err(Error::Size(format!(
            "path has {} configuration and {} group nodes for N = {n_steps}",
            path.q.len(),
            path.g.len()
        )));
    }
    if path.config_dim() != ld.config_dim() {
        return Err(Error::Size(format!(
            "configuration dimension {} does not match the Lagrangian's {}",
            path.config_dim(),
            ld.config_dim()
        )));
    }
    if path.kind != ld.kind() {
        return Err(Error::TagMismatch {
            expected: ld.kind(),
            found: path.kind,
        });
    }
    if m > 0 {
        let windows = n_steps - k + 1;
        if path.lambda.len() != windows || path.lambda.iter().any(|l| l.len() != m) {
            return Err(Error::Size(format!(
                "expected {windows} multiplier vectors of length {m}, got {} (lengths {:?})",
                path.lambda.len(),
                path.lambda.iter().map(|l| l.len()).collect::<Vec<_>>()
            )));
        }
    }
    Ok(())
}

/// Stationarity rows at node `j` from precomputed window terms, where
/// `terms.grads[w]` belongs to window `w`.
pub(crate) fn stationarity_rows<T: Real>(
    k: usize,
    path: &DiscretePath<T>,
    grads: &[WindowGradient<T>],
    j: usize,
) -> (DVector<T>, Covector<T>) {
    let last_window = grads.len() - 1;
    // configuration: sum over windows j, j-1, .., j-k of the matching slot
    let mut dq = grads[j].q[0].clone();
    for a in 1..=k {
        dq += &grads[j - a].q[a];
    }
    // algebra: dS/dxi_i summed over the windows containing xi_i
    let s = |i: usize| {
        let lo = i.saturating_sub(k - 1);
        let hi = i.min(last_window);
        let mut acc = grads[hi].xi[i - hi];
        for w in (lo..hi).rev() {
            acc = acc + grads[w].xi[i - w];
        }
        acc
    };
    let row = group_row(
        path.h,
        &path.retraction,
        path.trivialization,
        &path.xi[j - 1],
        &path.xi[j],
        &s(j - 1),
        &s(j),
    );
    (dq, row + grads[j].g)
}

/// Constrained higher-order discrete Lagrange-Poincare residual.
///
/// Stationarity rows cover nodes `k ..= N-k`; constraint rows cover windows
/// `0 ..= N-k`. The multipliers `path.lambda[i]` weight the constraints of
/// window `i`.
pub fn dlp_k_residual<T: Real>(
    ld: &dyn DiscreteLagrangian<T>,
    phi: &dyn DiscreteConstraintSet<T>,
    path: &DiscretePath<T>,
) -> Result<DlpResidual<T>> {
    check_path(ld, phi.count(), path)?;
    let k = ld.order();
    let n_steps = path.steps();
    let terms = window_terms(ld, phi, path, 0..=n_steps - k);
    let mut m_part = Vec::new();
    let mut g_part = Vec::new();
    for j in k..=n_steps - k {
        let (dq, dg) = stationarity_rows(k, path, &terms.grads, j);
        m_part.push(dq);
        g_part.push(dg);
    }
    let constraints = if phi.count() > 0 {
        terms.phi
    } else {
        Vec::new()
    };
    Ok(DlpResidual {
        order: k,
        m_part,
        g_part,
        constraints,
    })
}

/// Unconstrained second-order discrete Lagrange-Poincare residual for
/// nodes `k = 2 .. N-2`:
///
/// ```text
/// M:  D1 L_d(q_k, q_{k+1}, q_{k+2}) + D2 L_d(q_{k-1}, q_k, q_{k+1}) + D3 L_d(q_{k-2}, q_{k-1}, q_k)
/// G:  (Ad*_{W_{k-1}} dtau^{-1*}_{h xi_{k-1}} (D4 L_{d,k-1} + D5 L_{d,k-2})
///      - dtau^{-1*}_{h xi_k} (D4 L_{d,k} + D5 L_{d,k-1})) / h + base term
/// ```
///
/// where `D4`, `D5` are the derivatives in the first and second increment.
pub fn dlp2_residual<T: Real>(
    ld: &dyn DiscreteLagrangian<T>,
    path: &DiscretePath<T>,
) -> Result<(Vec<DVector<T>>, Vec<Covector<T>>)> {
    if ld.order() != 2 {
        return Err(Error::Size(format!(
            "second-order assembler needs an order-2 Lagrangian, got order {}",
            ld.order()
        )));
    }
    let n_steps = path.steps();
    if n_steps < 5 {
        return Err(Error::Size(format!(
            "second-order equations need N >= 5, got N = {n_steps}"
        )));
    }
    check_path(ld, 0, path)?;
    let triv = path.trivialization;
    let grad: Vec<_> = (0..=n_steps - 2)
        .map(|i| lagrangian_gradient(ld, &path.window(i, 2), triv))
        .collect();
    let mut m_part = Vec::new();
    let mut g_part = Vec::new();
    for k in 2..=n_steps - 2 {
        let d1 = &grad[k].q[0];
        let d2 = &grad[k - 1].q[1];
        let d3 = &grad[k - 2].q[2];
        m_part.push(d1.clone() + d2 + d3);

        let s_prev = grad[k - 1].xi[0] + grad[k - 2].xi[1];
        let s = grad[k].xi[0] + grad[k - 1].xi[1];
        let row = group_row(
            path.h,
            &path.retraction,
            triv,
            &path.xi[k - 1],
            &path.xi[k],
            &s_prev,
            &s,
        );
        g_part.push(row + grad[k].g);
    }
    Ok((m_part, g_part))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::discrete::{GroupOnly, NoConstraints, Window};
    use crate::lie::GroupKind;
    use approx::assert_relative_eq;
    use nalgebra::Vector3;

    fn free_particle(h: f64) -> impl Fn(&DVector<f64>, &DVector<f64>) -> f64 {
        move |a, b| 0.5 * (b - a).norm_squared() / h
    }

    #[test]
    fn free_particle_straight_line_is_stationary() {
        let h = 0.1;
        let path: Vec<_> = (0..6)
            .map(|k| DVector::from_vec(vec![1.0 + 0.5 * k as f64, -2.0 * k as f64]))
            .collect();
        let r = del_residual_first_order(&free_particle(h), &path).unwrap();
        for v in r {
            assert!(v.norm() <= 1e-8);
        }
    }

    #[test]
    fn free_particle_perturbed_node() {
        let h = 0.1;
        let delta = 1e-3;
        let mut path: Vec<_> = (0..5).map(|k| DVector::from_vec(vec![k as f64])).collect();
        path[2][0] += delta;
        let r = del_residual_first_order(&free_particle(h), &path).unwrap();
        assert_relative_eq!(r[1][0], 2.0 * delta / h, epsilon = 1e-7);
        assert_relative_eq!(r[0][0], -delta / h, epsilon = 1e-7);
    }

    #[test]
    fn first_order_residual_is_action_gradient() {
        let h = 0.2;
        let ld = |a: &DVector<f64>, b: &DVector<f64>| {
            let v = (b - a) / h;
            h * (0.5 * v.norm_squared() - (0.5 * (a + b))[0].cos() * (a[1] * b[1]).sin())
        };
        let path: Vec<_> = (0..6)
            .map(|k| DVector::from_vec(vec![(k as f64 * 0.7).sin(), 0.3 * k as f64]))
            .collect();
        let r = del_residual_first_order(&ld, &path).unwrap();
        let action = |p: &[DVector<f64>]| p.windows(2).map(|w| ld(&w[0], &w[1])).sum::<f64>();
        for k in 1..5 {
            for c in 0..2 {
                let mut p = path.clone();
                p[k][c] += 1e-5;
                let up = action(&p);
                p[k][c] -= 2e-5;
                let down = action(&p);
                assert!(((up - down) / 2e-5 - r[k - 1][c]).abs() <= 1e-6);
            }
        }
    }

    #[test]
    fn short_paths_are_rejected() {
        let path = vec![DVector::from_vec(vec![0.0]); 2];
        assert!(matches!(
            del_residual_first_order(&free_particle(0.1), &path),
            Err(Error::Size(_))
        ));
    }

    struct Quadratic;

    impl ReducedLagrangian<f64> for Quadratic {
        fn kind(&self) -> GroupKind {
            GroupKind::So3
        }
        fn eval(&self, h: f64, xi: &AlgebraVector<f64>) -> f64 {
            0.5 * h * xi.coords().norm_squared()
        }
    }

    #[test]
    fn uniform_rotation_is_relative_equilibrium() {
        let r = Retraction::cayley();
        let w = r.tau(&AlgebraVector::new(GroupKind::So3, [0.1, 0.2, -0.05]));
        let res = dep_residual(&Quadratic, &vec![w; 6], 0.1, &r, Trivialization::Left).unwrap();
        for c in res {
            assert!(c.coords().norm() <= 1e-9);
        }
    }

    #[test]
    fn m_only_lagrangian_has_zero_group_rows() {
        struct MOnly;
        impl DiscreteLagrangian<f64> for MOnly {
            fn order(&self) -> usize {
                2
            }
            fn config_dim(&self) -> usize {
                1
            }
            fn kind(&self) -> GroupKind {
                GroupKind::Se2
            }
            fn eval(&self, w: &Window<f64>) -> f64 {
                (w.q[0][0] - 2.0 * w.q[1][0] + w.q[2][0]).powi(2) + w.q[1][0].sin()
            }
        }
        let n = 7;
        let q: Vec<_> = (0..=n).map(|k| DVector::from_vec(vec![(k as f64).sqrt()])).collect();
        let xi: Vec<_> = (0..n)
            .map(|k| AlgebraVector::new(GroupKind::Se2, [0.1 * k as f64, 1.0, -0.5]))
            .collect();
        let path = DiscretePath::from_increments(
            0.1,
            q,
            xi,
            vec![],
            GroupElement::identity(GroupKind::Se2),
            Retraction::cayley(),
            Trivialization::Left,
        )
        .unwrap();
        let (_, g) = dlp2_residual(&MOnly, &path).unwrap();
        assert!(g.iter().all(|c| *c.coords() == Vector3::zeros()));
        let full = dlp_k_residual(&MOnly, &NoConstraints, &path).unwrap();
        assert!(full.g_part.iter().all(|c| *c.coords() == Vector3::zeros()));
    }

    #[test]
    fn dep_and_group_only_dlp_agree_bitwise() {
        let r = Retraction::cayley();
        let h = 0.05;
        let ws: Vec<_> = (0..8)
            .map(|k| r.tau(&AlgebraVector::new(GroupKind::So3, [0.01 * k as f64, 0.03, -0.02 * k as f64])))
            .collect();
        for triv in [Trivialization::Left, Trivialization::Right] {
            let dep = dep_residual(&Quadratic, &ws, h, &r, triv).unwrap();
            let xi: Vec<_> = ws.iter().map(|w| r.tau_inv(w).unwrap().scale(1.0 / h)).collect();
            let path = DiscretePath::from_increments(
                h,
                vec![DVector::zeros(0); 9],
                xi,
                vec![],
                GroupElement::identity(GroupKind::So3),
                r,
                triv,
            )
            .unwrap();
            let dlp = dlp_k_residual(&GroupOnly(Quadratic), &NoConstraints, &path).unwrap();
            assert_eq!(dlp.g_part, dep);
        }
    }

    #[test]
    fn size_errors() {
        let path = DiscretePath::from_increments(
            0.1,
            vec![DVector::zeros(0); 5],
            vec![AlgebraVector::zero(GroupKind::So3); 4],
            vec![],
            GroupElement::identity(GroupKind::So3),
            Retraction::cayley(),
            Trivialization::Left,
        )
        .unwrap();
        // k = 2 needs N > 4
        struct Two;
        impl DiscreteLagrangian<f64> for Two {
            fn order(&self) -> usize {
                2
            }
            fn config_dim(&self) -> usize {
                0
            }
            fn kind(&self) -> GroupKind {
                GroupKind::So3
            }
            fn eval(&self, _w: &Window<f64>) -> f64 {
                0.0
            }
        }
        assert!(matches!(dlp_k_residual(&Two, &NoConstraints, &path), Err(Error::Size(_))));
        assert!(matches!(dlp2_residual(&Two, &path), Err(Error::Size(_))));
    }
}
