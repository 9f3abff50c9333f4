//! Discrete paths on `M x G` and the window functions evaluated along them.
//!
//! A window of order `k` starting at node `i` sees the configuration nodes
//! `q_i ..= q_{i+k}`, the base group point `g_i` and the algebra increments
//! `xi_i .. xi_{i+k}`. Discrete Lagrangians and constraints are functions of
//! one window; the residual assemblers in [`residual`] sum their
//! derivatives over all windows touching a node.

pub mod momentum;
pub mod residual;

use nalgebra::{DVector, Vector3};

use crate::error::{Error, Result};
use crate::lie::{AlgebraVector, Covector, GroupElement, GroupKind};
use crate::retraction::Retraction;
use crate::scalar::Real;

pub use momentum::{discrete_momentum, spatial_momentum, BundlePoint, MomentumSide};
pub use residual::{
    del_residual_first_order, dep_residual, dlp2_residual, dlp_k_residual, DlpResidual,
};

/// How algebra increments are read off neighbouring group nodes.
///
/// * `Left`: `g_{k+1} = g_k tau(h xi_k)`, variations `g_k <- g_k tau(eps eta)`.
/// * `Right`: `g_{k+1} = tau(h xi_k) g_k`, variations `g_k <- tau(eps eta) g_k`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default)]
pub enum Trivialization {
    #[default]
    Left,
    Right,
}

impl Trivialization {
    /// Next node from the current one and the increment `tau(h xi)`.
    pub fn step<T: Real>(self, g: &GroupElement<T>, w: &GroupElement<T>) -> Result<GroupElement<T>> {
        match self {
            Self::Left => g.compose(w),
            Self::Right => w.compose(g),
        }
    }

    /// Increment `W` with `step(g, W) = g_next`.
    pub fn increment<T: Real>(self, g: &GroupElement<T>, g_next: &GroupElement<T>) -> Result<GroupElement<T>> {
        match self {
            Self::Left => g.inverse().compose(g_next),
            Self::Right => g_next.compose(&g.inverse()),
        }
    }

    /// Node perturbed along `eta`: `g tau(eta)` or `tau(eta) g`.
    pub fn perturb<T: Real>(
        self,
        retraction: &Retraction,
        g: &GroupElement<T>,
        eta: &AlgebraVector<T>,
    ) -> Result<GroupElement<T>> {
        self.step(g, &retraction.tau(eta))
    }
}

/// Arguments of one evaluation of a discrete Lagrangian or constraint.
#[derive(Debug, Clone, PartialEq)]
pub struct Window<T: Real> {
    /// Index `i` of the first node.
    pub index: usize,
    pub h: T,
    /// `k + 1` configuration nodes.
    pub q: Vec<DVector<T>>,
    /// Base group point `g_i`.
    pub g: GroupElement<T>,
    /// `k` algebra increments.
    pub xi: Vec<AlgebraVector<T>>,
}

/// Partial derivatives of a window function.
///
/// `g` is the derivative with respect to the base point along the
/// trivialization in use (zero for group-invariant functions).
#[derive(Debug, Clone, PartialEq)]
pub struct WindowGradient<T: Real> {
    pub q: Vec<DVector<T>>,
    pub xi: Vec<Covector<T>>,
    pub g: Covector<T>,
}

impl<T: Real> WindowGradient<T> {
    pub fn zeros(kind: GroupKind, order: usize, n: usize) -> Self {
        Self {
            q: vec![DVector::zeros(n); order + 1],
            xi: vec![Covector::zero(kind); order],
            g: Covector::zero(kind),
        }
    }

    /// `self += s * other`.
    pub fn add_scaled(&mut self, s: T, other: &Self) {
        for (a, b) in self.q.iter_mut().zip(&other.q) {
            a.axpy(s, b, T::one());
        }
        for (a, b) in self.xi.iter_mut().zip(&other.xi) {
            *a = *a + b.scale(s);
        }
        self.g = self.g + other.g.scale(s);
    }
}

/// Discrete Lagrangian `L_d : (k+1)(M x G) -> R` written on windows.
pub trait DiscreteLagrangian<T: Real>: Send + Sync {
    fn order(&self) -> usize;
    fn config_dim(&self) -> usize;
    fn kind(&self) -> GroupKind;
    /// Whether the value is independent of the base group point.
    fn is_group_invariant(&self) -> bool {
        true
    }
    fn eval(&self, w: &Window<T>) -> T;
    /// Analytic partial derivatives; `None` falls back to central
    /// differences.
    fn gradient(&self, _w: &Window<T>, _triv: Trivialization) -> Option<WindowGradient<T>> {
        None
    }
}

/// Discrete constraints `Phi_d^alpha : (k+1)(M x G) -> R`, `alpha = 1..m`.
pub trait DiscreteConstraintSet<T: Real>: Send + Sync {
    fn count(&self) -> usize;
    fn is_group_invariant(&self) -> bool {
        true
    }
    fn eval(&self, w: &Window<T>, out: &mut [T]);
    /// One gradient per constraint, or `None` for central differences.
    fn gradient(&self, _w: &Window<T>, _triv: Trivialization) -> Option<Vec<WindowGradient<T>>> {
        None
    }
}

/// The empty constraint set.
#[derive(Debug, Clone, Copy, Default)]
pub struct NoConstraints;

impl<T: Real> DiscreteConstraintSet<T> for NoConstraints {
    fn count(&self) -> usize {
        0
    }

    fn eval(&self, _w: &Window<T>, _out: &mut [T]) {}

    fn gradient(&self, _w: &Window<T>, _triv: Trivialization) -> Option<Vec<WindowGradient<T>>> {
        Some(Vec::new())
    }
}

/// Reduced first-order discrete Lagrangian `L^_d(W)` written in terms of
/// `xi = tau^{-1}(W) / h`.
pub trait ReducedLagrangian<T: Real>: Send + Sync {
    fn kind(&self) -> GroupKind;
    fn eval(&self, h: T, xi: &AlgebraVector<T>) -> T;
    fn gradient(&self, _h: T, _xi: &AlgebraVector<T>) -> Option<Covector<T>> {
        None
    }
}

pub(crate) fn reduced_gradient<T: Real, L: ReducedLagrangian<T> + ?Sized>(
    l: &L,
    h: T,
    xi: &AlgebraVector<T>,
) -> Covector<T> {
    if let Some(g) = l.gradient(h, xi) {
        return g;
    }
    let mut out = Vector3::zeros();
    for j in 0..3 {
        let mut p = *xi;
        let mut m = *xi;
        let step = T::fd_step(xi.coords()[j]);
        p.coords_mut()[j] += step;
        m.coords_mut()[j] -= step;
        out[j] = (l.eval(h, &p) - l.eval(h, &m)) / (step + step);
    }
    Covector::from_vector(xi.kind(), out)
}

/// A group-only reduced Lagrangian viewed as an order-1 window function on
/// `M = R^0`.
pub struct GroupOnly<L>(pub L);

impl<T: Real, L: ReducedLagrangian<T>> DiscreteLagrangian<T> for GroupOnly<L> {
    fn order(&self) -> usize {
        1
    }

    fn config_dim(&self) -> usize {
        0
    }

    fn kind(&self) -> GroupKind {
        self.0.kind()
    }

    fn eval(&self, w: &Window<T>) -> T {
        self.0.eval(w.h, &w.xi[0])
    }

    fn gradient(&self, w: &Window<T>, _triv: Trivialization) -> Option<WindowGradient<T>> {
        Some(WindowGradient {
            q: vec![DVector::zeros(0); 2],
            xi: vec![reduced_gradient(&self.0, w.h, &w.xi[0])],
            g: Covector::zero(self.0.kind()),
        })
    }
}

/// Central-difference gradients of an `m`-output window function.
///
/// Configuration and algebra coordinates use the step
/// `eps^(1/3) max(1, |x|)`; the base point is moved along the
/// trivialization with the same step when `base_dependent` is set.
pub fn fd_window_gradients<T: Real>(
    f: &dyn Fn(&Window<T>, &mut [T]),
    m: usize,
    w: &Window<T>,
    triv: Trivialization,
    base_dependent: bool,
) -> Vec<WindowGradient<T>> {
    let k = w.xi.len();
    let n = w.q.first().map_or(0, |q| q.len());
    let kind = w.g.kind();
    let mut out = vec![WindowGradient::zeros(kind, k, n); m];
    let mut fp = vec![T::zero(); m];
    let mut fm = vec![T::zero(); m];
    let mut probe = w.clone();

    for a in 0..=k {
        for c in 0..n {
            let x = w.q[a][c];
            let step = T::fd_step(x);
            probe.q[a][c] = x + step;
            f(&probe, &mut fp);
            probe.q[a][c] = x - step;
            f(&probe, &mut fm);
            probe.q[a][c] = x;
            for o in 0..m {
                out[o].q[a][c] = (fp[o] - fm[o]) / (step + step);
            }
        }
    }
    for a in 0..k {
        for c in 0..3 {
            let x = w.xi[a].coords()[c];
            let step = T::fd_step(x);
            probe.xi[a].coords_mut()[c] = x + step;
            f(&probe, &mut fp);
            probe.xi[a].coords_mut()[c] = x - step;
            f(&probe, &mut fm);
            probe.xi[a].coords_mut()[c] = x;
            for o in 0..m {
                out[o].xi[a].coords_mut()[c] = (fp[o] - fm[o]) / (step + step);
            }
        }
    }
    if base_dependent {
        let r = Retraction::cayley();
        let step = T::fd_step(T::zero());
        for c in 0..3 {
            let e = AlgebraVector::basis(kind, c);
            probe.g = triv.perturb(&r, &w.g, &e.scale(step)).expect("same group");
            f(&probe, &mut fp);
            probe.g = triv.perturb(&r, &w.g, &e.scale(-step)).expect("same group");
            f(&probe, &mut fm);
            for o in 0..m {
                out[o].g.coords_mut()[c] = (fp[o] - fm[o]) / (step + step);
            }
        }
    }
    out
}

pub(crate) fn lagrangian_gradient<T: Real, L: DiscreteLagrangian<T> + ?Sized>(
    l: &L,
    w: &Window<T>,
    triv: Trivialization,
) -> WindowGradient<T> {
    if let Some(g) = l.gradient(w, triv) {
        return g;
    }
    let f = |w: &Window<T>, out: &mut [T]| out[0] = l.eval(w);
    fd_window_gradients(&f, 1, w, triv, !l.is_group_invariant())
        .pop()
        .expect("one output")
}

pub(crate) fn constraint_gradients<T: Real, C: DiscreteConstraintSet<T> + ?Sized>(
    c: &C,
    w: &Window<T>,
    triv: Trivialization,
) -> Vec<WindowGradient<T>> {
    if let Some(g) = c.gradient(w, triv) {
        return g;
    }
    let f = |w: &Window<T>, out: &mut [T]| c.eval(w, out);
    fd_window_gradients(&f, c.count(), w, triv, !c.is_group_invariant())
}

/// Node arrays of a discrete trajectory on `M x G`.
#[derive(Debug, Clone, PartialEq)]
pub struct DiscretePath<T: Real> {
    pub kind: GroupKind,
    pub h: T,
    /// `N + 1` configuration nodes.
    pub q: Vec<DVector<T>>,
    /// `N` algebra increments.
    pub xi: Vec<AlgebraVector<T>>,
    /// One multiplier vector per constraint window (may be empty when there
    /// are no constraints).
    pub lambda: Vec<DVector<T>>,
    /// `N + 1` reconstructed group nodes.
    pub g: Vec<GroupElement<T>>,
    pub retraction: Retraction,
    pub trivialization: Trivialization,
}

/// Defect above which reconstructed rotations are re-projected.
pub const REPROJECT_THRESHOLD: f64 = 1e-9;

impl<T: Real> DiscretePath<T> {
    /// Builds a path from increments, reconstructing the group nodes from
    /// `g0`.
    pub fn from_increments(
        h: T,
        q: Vec<DVector<T>>,
        xi: Vec<AlgebraVector<T>>,
        lambda: Vec<DVector<T>>,
        g0: GroupElement<T>,
        retraction: Retraction,
        trivialization: Trivialization,
    ) -> Result<Self> {
        if q.len() != xi.len() + 1 {
            return Err(Error::Size(format!(
                "{} configuration nodes but {} increments",
                q.len(),
                xi.len()
            )));
        }
        let g = reconstruct(&g0, &xi, h, &retraction, trivialization)?;
        Ok(Self {
            kind: g0.kind(),
            h,
            q,
            xi,
            lambda,
            g,
            retraction,
            trivialization,
        })
    }

    /// Builds a path from group nodes, computing `xi_k` through the inverse
    /// retraction.
    pub fn from_group_nodes(
        h: T,
        q: Vec<DVector<T>>,
        g: Vec<GroupElement<T>>,
        lambda: Vec<DVector<T>>,
        retraction: Retraction,
        trivialization: Trivialization,
    ) -> Result<Self> {
        if q.len() != g.len() || g.is_empty() {
            return Err(Error::Size(format!(
                "{} configuration nodes but {} group nodes",
                q.len(),
                g.len()
            )));
        }
        let xi = increments_from_nodes(&g, h, &retraction, trivialization)?;
        Ok(Self {
            kind: g[0].kind(),
            h,
            q,
            xi,
            lambda,
            g,
            retraction,
            trivialization,
        })
    }

    /// Number of steps `N`.
    pub fn steps(&self) -> usize {
        self.xi.len()
    }

    pub fn config_dim(&self) -> usize {
        self.q.first().map_or(0, |q| q.len())
    }

    /// Window of order `k` starting at node `i`.
    pub fn window(&self, i: usize, k: usize) -> Window<T> {
        Window {
            index: i,
            h: self.h,
            q: self.q[i..=i + k].to_vec(),
            g: self.g[i],
            xi: self.xi[i..i + k].to_vec(),
        }
    }

    /// Largest reconstruction defect `|g_{k+1} - step(g_k, tau(h xi_k))|`.
    pub fn reconstruction_defect(&self) -> T {
        let mut worst = T::zero();
        for (k, xi) in self.xi.iter().enumerate() {
            let w = self.retraction.tau(&xi.scale(self.h));
            let next = self.trivialization.step(&self.g[k], &w).expect("same group");
            let d = crate::lie::frobenius(&(next.matrix() - self.g[k + 1].matrix()));
            worst = worst.max(d);
        }
        worst
    }
}

/// `g_{k+1} = g_k tau(h xi_k)` (or the right-trivialized analogue), with
/// re-projection whenever the orthogonality defect exceeds
/// [`REPROJECT_THRESHOLD`].
pub fn reconstruct<T: Real>(
    g0: &GroupElement<T>,
    xi: &[AlgebraVector<T>],
    h: T,
    retraction: &Retraction,
    triv: Trivialization,
) -> Result<Vec<GroupElement<T>>> {
    let threshold = T::lit(REPROJECT_THRESHOLD);
    let mut out = Vec::with_capacity(xi.len() + 1);
    out.push(*g0);
    let mut g = *g0;
    for x in xi {
        let w = retraction.tau(&x.scale(h));
        g = triv.step(&g, &w)?.reproject_if_drifted(threshold);
        out.push(g);
    }
    Ok(out)
}

/// `xi_k = tau^{-1}(W_k) / h` for consecutive nodes.
pub fn increments_from_nodes<T: Real>(
    g: &[GroupElement<T>],
    h: T,
    retraction: &Retraction,
    triv: Trivialization,
) -> Result<Vec<AlgebraVector<T>>> {
    g.windows(2)
        .enumerate()
        .map(|(k, pair)| {
            let w = triv.increment(&pair[0], &pair[1])?;
            retraction
                .tau_inv(&w)
                .map(|x| x.scale(T::one() / h))
                .map_err(|e| Error::RetractionSingularAt {
                    index: k,
                    source: Box::new(e),
                })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use std::f64::consts::FRAC_PI_2;

    #[test]
    fn reconstruction_with_zero_increments_is_constant() {
        let g0 = GroupElement::se2(0.3, 1.0, -1.0);
        let xi = vec![AlgebraVector::zero(GroupKind::Se2); 5];
        let g = reconstruct(&g0, &xi, 0.1, &Retraction::cayley(), Trivialization::Left).unwrap();
        assert!(g.iter().all(|x| *x == g0));
    }

    #[test]
    fn reconstruction_of_quarter_turns() {
        let h = 0.25;
        let xi = vec![AlgebraVector::new(GroupKind::So3, [2.0 / h, 0.0, 0.0]); 4];
        let e = GroupElement::identity(GroupKind::So3);
        for triv in [Trivialization::Left, Trivialization::Right] {
            let g = reconstruct(&e, &xi, h, &Retraction::cayley(), triv).unwrap();
            for (k, gk) in g.iter().enumerate() {
                let expected = GroupElement::rot_x(k as f64 * FRAC_PI_2);
                assert_relative_eq!(*gk.matrix(), *expected.matrix(), epsilon = 1e-14);
            }
        }
    }

    #[test]
    fn node_and_increment_constructors_agree() {
        let xi: Vec<_> = (0..6)
            .map(|k| AlgebraVector::new(GroupKind::So3, [0.3 * k as f64, -0.5, 1.0]))
            .collect();
        let q = vec![DVector::zeros(0); 7];
        let g0 = GroupElement::rot_y(0.4);
        for triv in [Trivialization::Left, Trivialization::Right] {
            let p = DiscretePath::from_increments(0.1, q.clone(), xi.clone(), vec![], g0, Retraction::cayley(), triv)
                .unwrap();
            assert!(p.reconstruction_defect() <= 1e-14);
            let back = DiscretePath::from_group_nodes(0.1, q.clone(), p.g.clone(), vec![], Retraction::cayley(), triv)
                .unwrap();
            for (a, b) in back.xi.iter().zip(&xi) {
                assert!((a.coords() - b.coords()).norm() <= 1e-12);
            }
        }
    }

    #[test]
    fn long_reconstruction_stays_on_the_group() {
        let xi = vec![AlgebraVector::new(GroupKind::So3, [0.7, -1.1, 0.4]); 20_000];
        let g = reconstruct(
            &GroupElement::identity(GroupKind::So3),
            &xi,
            0.01,
            &Retraction::trunc_exp(3).unwrap(),
            Trivialization::Left,
        )
        .unwrap();
        assert!(g.last().unwrap().membership_defect() <= 1e-9);
    }

    #[test]
    fn fd_gradient_of_quadratic_window() {
        let w = Window {
            index: 0,
            h: 0.1,
            q: vec![DVector::from_vec(vec![1.0, 2.0]), DVector::from_vec(vec![-1.0, 0.5])],
            g: GroupElement::rot_z(0.3),
            xi: vec![AlgebraVector::new(GroupKind::So3, [0.2, 0.4, -0.6])],
        };
        let f = |w: &Window<f64>, out: &mut [f64]| {
            out[0] = w.q[0].dot(&w.q[1]) + w.xi[0].coords().norm_squared();
        };
        let g = fd_window_gradients(&f, 1, &w, Trivialization::Left, false).pop().unwrap();
        assert_relative_eq!(g.q[0], w.q[1], epsilon = 1e-9);
        assert_relative_eq!(g.q[1], w.q[0], epsilon = 1e-9);
        assert_relative_eq!(*g.xi[0].coords(), w.xi[0].coords() * 2.0, epsilon = 1e-9);
        assert_eq!(g.g, Covector::zero(GroupKind::So3));
    }
}
