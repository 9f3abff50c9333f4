//! Discrete momentum maps for a group acting on the `G` factor of `M x G`.

use nalgebra::DVector;

use super::Trivialization;
use crate::error::Result;
use crate::lie::{AlgebraVector, Covector, GroupElement};
use crate::retraction::Retraction;
use crate::scalar::Real;

/// A point of `M x G`.
#[derive(Debug, Clone, PartialEq)]
pub struct BundlePoint<T: Real> {
    pub q: DVector<T>,
    pub g: GroupElement<T>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MomentumSide {
    /// `J+ (q_k, q_{k+1})(xi) = <D2 L_d, xi_Q(q_{k+1})>`.
    Plus,
    /// `J- (q_k, q_{k+1})(xi) = -<D1 L_d, xi_Q(q_k)>`.
    Minus,
}

/// Discrete momentum `J_d^{+/-}(q_k, q_{k+1})(xi)` for the action
/// `xi_Q(q, g) = (0, hat(xi) g)` of `G` on itself by left multiplication.
///
/// The derivative along the generator is a Richardson-extrapolated central
/// difference, accurate to about `1e-12` for smooth `L_d`.
pub fn discrete_momentum<T: Real>(
    ld: &dyn Fn(&BundlePoint<T>, &BundlePoint<T>) -> T,
    pair: (&BundlePoint<T>, &BundlePoint<T>),
    xi: &AlgebraVector<T>,
    side: MomentumSide,
    retraction: &Retraction,
) -> T {
    let moved = |p: &BundlePoint<T>, s: T| BundlePoint {
        q: p.q.clone(),
        g: retraction.tau(&xi.scale(s)).compose(&p.g).expect("same group"),
    };
    let f = |s: T| match side {
        MomentumSide::Plus => ld(pair.0, &moved(pair.1, s)),
        MomentumSide::Minus => -ld(&moved(pair.0, s), pair.1),
    };
    richardson_derivative(&f, T::epsilon().powf(T::lit(0.2)))
}

/// `(4 D(eps/2) - D(eps)) / 3` with `D` the central difference at 0.
pub(crate) fn richardson_derivative<T: Real>(f: &dyn Fn(T) -> T, eps: T) -> T {
    let d = |e: T| (f(e) - f(-e)) / (e + e);
    let half = eps * T::lit(0.5);
    (d(half) * T::lit(4.0) - d(eps)) / T::lit(3.0)
}

/// Spatial momentum carried by step `k` of a group-invariant first-order
/// Lagrangian `L^_d(xi_k)`, given `dl = dL^_d/dxi_k`.
///
/// Left: `(1/h) Ad*_{g_k^{-1}} dtau^{-1*}_{h xi_k} dl`, the momentum of left
/// multiplication. Right: `(1/h) Ad*_{g_{k+1}} dtau^{-1*}_{h xi_k} dl`, the
/// momentum of right multiplication. Both are constant along solutions of
/// the discrete Euler-Poincare equations.
pub fn spatial_momentum<T: Real>(
    retraction: &Retraction,
    triv: Trivialization,
    g_k: &GroupElement<T>,
    xi_k: &AlgebraVector<T>,
    dl: &Covector<T>,
    h: T,
) -> Result<Covector<T>> {
    let a = xi_k.scale(h);
    let body = retraction.dtau_inv_star(&a, dl)?.scale(T::one() / h);
    match triv {
        Trivialization::Left => g_k.inverse().coadjoint(&body),
        Trivialization::Right => {
            let next = triv.step(g_k, &retraction.tau(&a))?;
            next.coadjoint(&body)
        }
    }
}
