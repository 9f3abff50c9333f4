use std::sync::Arc;

use nalgebra::{DMatrix, DVector};

use super::{Jet, SecondOrderModel};
use crate::error::{Error, Result};
use crate::lie::{AlgebraVector, Covector, GroupKind};
use crate::scalar::Real;

/// Reduced Lagrangian `l(t, q, q', xi)` on `TM x g`.
pub type ReducedLagrangianFn<T> =
    Arc<dyn Fn(T, &DVector<T>, &DVector<T>, &AlgebraVector<T>) -> T + Send + Sync>;
/// Function of a jet with a vector output.
pub type JetFn<T> = Arc<dyn Fn(&Jet<T>, &mut [T]) + Send + Sync>;
/// Basis sections of `g x TM` at `q`, each of length `3 + n`.
pub type BasisFn<T> = Arc<dyn Fn(&DVector<T>) -> Vec<DVector<T>> + Send + Sync>;
/// Cost `C(t, q, q', xi, u)` read off a jet.
pub type CostFn<T> = Arc<dyn Fn(&Jet<T>, &[T]) -> T + Send + Sync>;

/// The left-hand sides `E(q, q', q'', xi, xi')` of the controlled
/// equations `E = u_a B^a`, ordered as `[algebra rows (3) | configuration
/// rows (n)]`.
#[derive(Clone)]
pub enum Dynamics<T: Real> {
    /// Closed-form `E`.
    Explicit(JetFn<T>),
    /// Euler-Poincare / Euler-Lagrange rows of `l` (left trivialization):
    ///
    /// ```text
    /// algebra:        d/dt dl/dxi - ad*_xi dl/dxi
    /// configuration:  d/dt dl/dq' - dl/dq
    /// ```
    ///
    /// plus the optional extra terms, all by nested central differences.
    Lagrangian {
        ell: ReducedLagrangianFn<T>,
        extra: Option<JetFn<T>>,
    },
}

/// Controlled underactuated system in adapted-basis form: the actuated
/// sections `X_a` are dual to the control covectors, the unactuated sections
/// `X_alpha` annihilate them, so `F_a = <E, X_a>` are the controls and
/// `Phi^alpha = <E, X_alpha>` must vanish.
#[derive(Clone)]
pub struct ControlledSystem<T: Real> {
    pub config_dim: usize,
    pub kind: GroupKind,
    pub dynamics: Dynamics<T>,
    pub actuated: BasisFn<T>,
    pub unactuated: BasisFn<T>,
    pub cost: CostFn<T>,
    /// Configurations at which the basis rank is checked.
    pub samples: Vec<DVector<T>>,
}

/// `L~ = C(.., F(jet))` and `Phi = <E, X_alpha>` of a controlled system.
#[derive(Clone)]
pub struct ReducedProblem<T: Real> {
    system: ControlledSystem<T>,
    controls: usize,
    constraints: usize,
}

/// Step of the nested differences used for generic Lagrangians.
pub const NESTED_FD_STEP: f64 = 1e-2;

fn richardson<T: Real>(f: &dyn Fn(T) -> T, delta: T) -> T {
    let d = |e: T| (f(e) - f(-e)) / (e + e);
    (d(delta * T::lit(0.5)) * T::lit(4.0) - d(delta)) / T::lit(3.0)
}

/// Partial derivatives of `l` in `q'` and `xi` at a point.
fn momenta<T: Real>(
    ell: &ReducedLagrangianFn<T>,
    t: T,
    q: &DVector<T>,
    qd: &DVector<T>,
    xi: &AlgebraVector<T>,
) -> (DVector<T>, Covector<T>) {
    let delta = T::lit(NESTED_FD_STEP);
    let n = q.len();
    let p_q = DVector::from_fn(n, |c, _| {
        richardson(
            &|s: T| {
                let mut v = qd.clone();
                v[c] += s;
                ell(t, q, &v, xi)
            },
            delta,
        )
    });
    let p_xi = std::array::from_fn(|c| {
        richardson(
            &|s: T| {
                let mut v = *xi;
                v.coords_mut()[c] += s;
                ell(t, q, qd, &v)
            },
            delta,
        )
    });
    (p_q, Covector::new(xi.kind(), p_xi))
}

fn lagrangian_rows<T: Real>(ell: &ReducedLagrangianFn<T>, jet: &Jet<T>, out: &mut [T]) {
    let delta = T::lit(NESTED_FD_STEP);
    let n = jet.q.len();
    // state advanced along the jet by time s
    let moved = |s: T| {
        (
            jet.t + s,
            &jet.q + &jet.qd * s,
            &jet.qd + &jet.qdd * s,
            jet.xi + jet.xid.scale(s),
        )
    };
    let rate = |pick: &dyn Fn(&DVector<T>, &Covector<T>) -> T| {
        richardson(
            &|s: T| {
                let (t, q, qd, xi) = moved(s);
                let (pq, px) = momenta(ell, t, &q, &qd, &xi);
                pick(&pq, &px)
            },
            delta,
        )
    };
    let (_, p_xi) = momenta(ell, jet.t, &jet.q, &jet.qd, &jet.xi);
    let coad = crate::lie::ad_star(&jet.xi, &p_xi).expect("same algebra");
    for c in 0..3 {
        out[c] = rate(&|_, px| px.coords()[c]) - coad.coords()[c];
    }
    for c in 0..n {
        let dq = richardson(
            &|s: T| {
                let mut q = jet.q.clone();
                q[c] += s;
                ell(jet.t, &q, &jet.qd, &jet.xi)
            },
            delta,
        );
        out[3 + c] = rate(&|pq, _| pq[c]) - dq;
    }
}

impl<T: Real> ControlledSystem<T> {
    /// Evaluates `E` at a jet.
    pub fn equations(&self, jet: &Jet<T>) -> DVector<T> {
        let mut out = DVector::zeros(3 + self.config_dim);
        match &self.dynamics {
            Dynamics::Explicit(f) => f(jet, out.as_mut_slice()),
            Dynamics::Lagrangian { ell, extra } => {
                lagrangian_rows(ell, jet, out.as_mut_slice());
                if let Some(f) = extra {
                    let mut e = vec![T::zero(); out.len()];
                    f(jet, &mut e);
                    for (o, v) in out.iter_mut().zip(e) {
                        *o += v;
                    }
                }
            }
        }
        out
    }
}

/// Numerical rank by Gaussian elimination with complete pivoting.
fn numeric_rank<T: Real>(a: &DMatrix<T>) -> usize {
    let mut m = a.clone();
    let (rows, cols) = m.shape();
    let scale = m.iter().fold(T::zero(), |acc, v| acc.max(v.abs()));
    if scale == T::zero() {
        return 0;
    }
    let tol = scale * T::lit(1e-10);
    let mut rank = 0;
    for k in 0..rows.min(cols) {
        let mut best = (k, k, T::zero());
        for i in k..rows {
            for j in k..cols {
                if m[(i, j)].abs() > best.2 {
                    best = (i, j, m[(i, j)].abs());
                }
            }
        }
        if best.2 <= tol {
            break;
        }
        m.swap_rows(k, best.0);
        m.swap_columns(k, best.1);
        for i in k + 1..rows {
            let f = m[(i, k)] / m[(k, k)];
            for j in k..cols {
                let v = m[(k, j)];
                m[(i, j)] -= f * v;
            }
        }
        rank += 1;
    }
    rank
}

/// Builds the constrained second-order variational problem equivalent to
/// the optimal control problem of `sys`. Fails when the adapted basis is not
/// a basis at one of the sampled configurations.
pub fn reduce_to_variational<T: Real>(sys: ControlledSystem<T>) -> Result<ReducedProblem<T>> {
    let dim = 3 + sys.config_dim;
    let q0 = sys
        .samples
        .first()
        .cloned()
        .unwrap_or_else(|| DVector::zeros(sys.config_dim));
    let controls = (sys.actuated)(&q0).len();
    let constraints = (sys.unactuated)(&q0).len();
    if controls + constraints != dim {
        return Err(Error::IllPosedBasis {
            rank: controls + constraints,
            expected: dim,
        });
    }
    let samples = if sys.samples.is_empty() { vec![q0] } else { sys.samples.clone() };
    for q in &samples {
        let cols: Vec<DVector<T>> = (sys.actuated)(q).into_iter().chain((sys.unactuated)(q)).collect();
        if cols.len() != dim || cols.iter().any(|c| c.len() != dim) {
            return Err(Error::IllPosedBasis {
                rank: cols.len(),
                expected: dim,
            });
        }
        let rank = numeric_rank(&DMatrix::from_columns(&cols));
        if rank < dim {
            return Err(Error::IllPosedBasis { rank, expected: dim });
        }
    }
    Ok(ReducedProblem {
        system: sys,
        controls,
        constraints,
    })
}

impl<T: Real> ReducedProblem<T> {
    pub fn system(&self) -> &ControlledSystem<T> {
        &self.system
    }

    pub fn control_count(&self) -> usize {
        self.controls
    }

    /// Controls `F_a = <E, X_a>` needed to follow the jet.
    pub fn controls(&self, jet: &Jet<T>) -> Vec<T> {
        let e = self.system.equations(jet);
        (self.system.actuated)(&jet.q).iter().map(|x| x.dot(&e)).collect()
    }
}

impl<T: Real> SecondOrderModel<T> for ReducedProblem<T> {
    fn config_dim(&self) -> usize {
        self.system.config_dim
    }

    fn kind(&self) -> GroupKind {
        self.system.kind
    }

    fn constraint_count(&self) -> usize {
        self.constraints
    }

    fn ltilde(&self, jet: &Jet<T>) -> T {
        (self.system.cost)(jet, &self.controls(jet))
    }

    fn phi(&self, jet: &Jet<T>, out: &mut [T]) {
        let e = self.system.equations(jet);
        for (o, x) in out.iter_mut().zip((self.system.unactuated)(&jet.q)) {
            *o = x.dot(&e);
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn unit(dim: usize, i: usize) -> DVector<f64> {
        DVector::from_fn(dim, |r, _| if r == i { 1.0 } else { 0.0 })
    }

    // rigid body on SO(3) with a rotor q: fully quadratic, so the nested
    // differences are exact up to round-off
    fn quadratic_system() -> ControlledSystem<f64> {
        let ell: ReducedLagrangianFn<f64> = Arc::new(|_t, _q, qd: &DVector<f64>, xi: &AlgebraVector<f64>| {
            let w = xi.coords();
            0.5 * (w[0] * w[0] + 2.0 * w[1] * w[1] + 3.0 * w[2] * w[2]) + 0.5 * qd[0] * qd[0] + 0.3 * qd[0] * w[2]
        });
        ControlledSystem {
            config_dim: 1,
            kind: GroupKind::So3,
            dynamics: Dynamics::Lagrangian { ell, extra: None },
            actuated: Arc::new(|_| vec![unit(4, 3)]),
            unactuated: Arc::new(|_| vec![unit(4, 0), unit(4, 1), unit(4, 2)]),
            cost: Arc::new(|_, u: &[f64]| u[0] * u[0]),
            samples: vec![DVector::zeros(1)],
        }
    }

    fn jet() -> Jet<f64> {
        Jet {
            t: 0.3,
            q: DVector::from_vec(vec![0.2]),
            qd: DVector::from_vec(vec![0.7]),
            qdd: DVector::from_vec(vec![-0.4]),
            xi: AlgebraVector::new(GroupKind::So3, [0.5, -0.2, 0.9]),
            xid: AlgebraVector::new(GroupKind::So3, [0.1, 0.3, -0.6]),
        }
    }

    #[test]
    fn lagrangian_rows_match_hand_derivation() {
        let sys = quadratic_system();
        let j = jet();
        let e = sys.equations(&j);
        let w = j.xi.coords();
        let wd = j.xid.coords();
        // momentum mu = I w + (0, 0, 0.3 qd)
        let mu = nalgebra::Vector3::new(w[0], 2.0 * w[1], 3.0 * w[2] + 0.3 * j.qd[0]);
        let mu_dot = nalgebra::Vector3::new(wd[0], 2.0 * wd[1], 3.0 * wd[2] + 0.3 * j.qdd[0]);
        // ad*_w mu = -w x mu
        let expected = mu_dot + w.cross(&mu);
        for c in 0..3 {
            assert_relative_eq!(e[c], expected[c], epsilon = 1e-10);
        }
        assert_relative_eq!(e[3], j.qdd[0] + 0.3 * wd[2], epsilon = 1e-10);
    }

    #[test]
    fn cost_is_a_sum_of_squares_of_controls() {
        let p = reduce_to_variational(quadratic_system()).unwrap();
        let j = jet();
        let u = p.controls(&j);
        assert_relative_eq!(p.ltilde(&j), u[0] * u[0]);
        assert!(p.ltilde(&j) >= 0.0);
    }

    #[test]
    fn rest_is_unconstrained_and_free() {
        let p = reduce_to_variational(quadratic_system()).unwrap();
        let j = Jet::zero(GroupKind::So3, 1);
        let mut phi = [1.0; 3];
        p.phi(&j, &mut phi);
        assert_eq!(phi, [0.0; 3]);
        assert_eq!(p.ltilde(&j), 0.0);
    }

    #[test]
    fn dependent_basis_is_rejected() {
        let mut sys = quadratic_system();
        sys.unactuated = Arc::new(|_| vec![unit(4, 0), unit(4, 1), unit(4, 3)]);
        match reduce_to_variational(sys) {
            Err(Error::IllPosedBasis { rank, expected }) => {
                assert_eq!(rank, 3);
                assert_eq!(expected, 4);
            }
            other => panic!("expected an ill-posed basis, got {:?}", other.err()),
        }
    }

    #[test]
    fn wrong_number_of_sections_is_rejected() {
        let mut sys = quadratic_system();
        sys.unactuated = Arc::new(|_| vec![unit(4, 0)]);
        assert!(matches!(reduce_to_variational(sys), Err(Error::IllPosedBasis { .. })));
    }
}
