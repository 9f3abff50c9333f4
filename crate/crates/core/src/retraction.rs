//! Retraction maps `tau: g -> G` and their right-trivialized tangents.
//!
//! The right-trivialized tangent `dtau_xi` is the linear map on the algebra
//! with `D tau(xi) . eta = hat(dtau_xi eta) tau(xi)`. All maps act on
//! coordinates, so `dtau_xi`, `dtau_xi^{-1}` and their duals are plain 3x3
//! matrices.

use std::fmt;
use std::str::FromStr;

use nalgebra::{Matrix2, Matrix3, Vector2, Vector3};

use crate::error::{Error, Result};
use crate::lie::{frobenius, inv3, AlgebraVector, Covector, GroupElement, GroupKind};
use crate::scalar::Real;

/// Which retraction to use.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum RetractionKind {
    /// Cayley map `(e - X/2)^{-1} (e + X/2)`.
    Cayley,
    /// Exponential series truncated after the given power, projected back
    /// onto the group.
    TruncExp(u32),
}

/// A retraction together with its tangent maps.
///
/// The concrete formulas are chosen from the group tag carried by the
/// algebra vector, so one value serves both SE(2) and SO(3).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Retraction {
    kind: RetractionKind,
}

impl Default for Retraction {
    fn default() -> Self {
        Self::cayley()
    }
}

impl fmt::Display for Retraction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.kind {
            RetractionKind::Cayley => write!(f, "cayley"),
            RetractionKind::TruncExp(n) => write!(f, "exp{n}"),
        }
    }
}

impl FromStr for Retraction {
    type Err = Error;

    /// Parses `"cayley"` or `"expN"` with `N >= 1`.
    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        if s.eq_ignore_ascii_case("cayley") {
            return Ok(Self::cayley());
        }
        if let Some(order) = s.strip_prefix("exp") {
            let order: i64 = order.parse().map_err(|_| {
                Error::Config(format!("`{s}`: expected `expN` with an integer order N"))
            })?;
            if order < 1 || order > u32::MAX as i64 {
                return Err(Error::Config(format!(
                    "`{s}`: truncation order must be at least 1"
                )));
            }
            return Self::trunc_exp(order as u32);
        }
        Err(Error::Config(format!(
            "unknown retraction `{s}` (expected `cayley` or `expN`)"
        )))
    }
}

/// Largest tolerated condition number of `I + g` in the Cayley inverse.
const CAYLEY_COND_LIMIT: f64 = 1e8;
/// Rotations closer than this to pi (radians) are rejected by the inverse.
const CAYLEY_ANGLE_MARGIN: f64 = 1e-6;

impl Retraction {
    pub fn cayley() -> Self {
        Self {
            kind: RetractionKind::Cayley,
        }
    }

    /// Truncated exponential of the given order; `order` must be at least 1.
    pub fn trunc_exp(order: u32) -> Result<Self> {
        if order < 1 {
            return Err(Error::Config(
                "truncated exponential needs order >= 1".into(),
            ));
        }
        Ok(Self {
            kind: RetractionKind::TruncExp(order),
        })
    }

    pub fn kind(&self) -> RetractionKind {
        self.kind
    }

    pub fn tau<T: Real>(&self, xi: &AlgebraVector<T>) -> GroupElement<T> {
        match self.kind {
            RetractionKind::Cayley => cayley(xi),
            RetractionKind::TruncExp(n) => trunc_exp(xi, n),
        }
    }

    /// Inverse retraction. Fails near the cut locus (rotation angle pi),
    /// where the remedy is a smaller step size.
    pub fn tau_inv<T: Real>(&self, g: &GroupElement<T>) -> Result<AlgebraVector<T>> {
        let seed = cayley_inv(g)?;
        match self.kind {
            RetractionKind::Cayley => Ok(seed),
            RetractionKind::TruncExp(_) => Ok(self.newton_inverse(g, seed)),
        }
    }

    fn newton_inverse<T: Real>(&self, g: &GroupElement<T>, mut x: AlgebraVector<T>) -> AlgebraVector<T> {
        let kind = g.kind();
        let tol = T::epsilon() * T::lit(8.0);
        for _ in 0..100 {
            let t = self.tau(&x);
            let delta = AlgebraVector::vee_projected(
                kind,
                &(g.matrix() * t.inverse().matrix() - Matrix3::identity()),
            );
            let step = self.dtau_inv_matrix(&x) * delta.coords();
            *x.coords_mut() += step;
            if step.dot(&step).sqrt() <= tol * T::one().max(x.norm()) {
                break;
            }
        }
        x
    }

    /// Matrix of `dtau_xi` on algebra coordinates.
    pub fn dtau_matrix<T: Real>(&self, xi: &AlgebraVector<T>) -> Matrix3<T> {
        match (self.kind, xi.kind()) {
            (RetractionKind::Cayley, GroupKind::So3) => {
                let w = xi.coords();
                let s = T::lit(2.0) / (T::lit(4.0) + w.dot(w));
                (Matrix3::identity() * T::lit(2.0) + xi.hat()) * s
            }
            (RetractionKind::Cayley, GroupKind::Se2) => {
                inv3(&self.dtau_inv_matrix(xi)).expect("Cayley tangent is always invertible")
            }
            (RetractionKind::TruncExp(n), _) => dexp_series(xi, n),
        }
    }

    /// Matrix of `dtau_xi^{-1}` on algebra coordinates.
    pub fn dtau_inv_matrix<T: Real>(&self, xi: &AlgebraVector<T>) -> Matrix3<T> {
        let half = T::lit(0.5);
        let quarter = T::lit(0.25);
        match (self.kind, xi.kind()) {
            (RetractionKind::Cayley, GroupKind::So3) => {
                let w = xi.coords();
                Matrix3::identity() - xi.hat() * half + w * w.transpose() * quarter
            }
            (RetractionKind::Cayley, GroupKind::Se2) => {
                let v = xi.coords();
                let mut m = Matrix3::identity() - xi.ad_matrix() * half;
                for r in 0..3 {
                    m[(r, 0)] += v[0] * v[r] * quarter;
                }
                m
            }
            (RetractionKind::TruncExp(_), _) => {
                inv3(&self.dtau_matrix(xi)).expect("truncated dexp series is invertible")
            }
        }
    }

    pub fn dtau<T: Real>(&self, xi: &AlgebraVector<T>, eta: &AlgebraVector<T>) -> Result<AlgebraVector<T>> {
        same_kind(xi.kind(), eta.kind())?;
        Ok(AlgebraVector::from_vector(
            xi.kind(),
            self.dtau_matrix(xi) * eta.coords(),
        ))
    }

    pub fn dtau_inv<T: Real>(
        &self,
        xi: &AlgebraVector<T>,
        eta: &AlgebraVector<T>,
    ) -> Result<AlgebraVector<T>> {
        same_kind(xi.kind(), eta.kind())?;
        Ok(AlgebraVector::from_vector(
            xi.kind(),
            self.dtau_inv_matrix(xi) * eta.coords(),
        ))
    }

    /// `(dtau_xi^{-1})^* mu`.
    pub fn dtau_inv_star<T: Real>(&self, xi: &AlgebraVector<T>, mu: &Covector<T>) -> Result<Covector<T>> {
        same_kind(xi.kind(), mu.kind())?;
        Ok(Covector::from_vector(
            xi.kind(),
            self.dtau_inv_matrix(xi).transpose() * mu.coords(),
        ))
    }

    /// `(dtau_xi)^* mu`.
    pub fn dtau_star<T: Real>(&self, xi: &AlgebraVector<T>, mu: &Covector<T>) -> Result<Covector<T>> {
        same_kind(xi.kind(), mu.kind())?;
        Ok(Covector::from_vector(
            xi.kind(),
            self.dtau_matrix(xi).transpose() * mu.coords(),
        ))
    }
}

fn same_kind(a: GroupKind, b: GroupKind) -> Result<()> {
    if a == b {
        Ok(())
    } else {
        Err(Error::TagMismatch {
            expected: a,
            found: b,
        })
    }
}

fn cayley<T: Real>(xi: &AlgebraVector<T>) -> GroupElement<T> {
    let v = xi.coords();
    let four = T::lit(4.0);
    match xi.kind() {
        GroupKind::Se2 => {
            let (v1, v2, v3) = (v[0], v[1], v[2]);
            let c = T::one() / (four + v1 * v1);
            let two = T::lit(2.0);
            let d = four - v1 * v1;
            let z = T::zero();
            let m = Matrix3::new(
                c * d,
                -c * four * v1,
                c * (-two * v1 * v3 + four * v2),
                c * four * v1,
                c * d,
                c * (two * v1 * v2 + four * v3),
                z,
                z,
                T::one(),
            );
            GroupElement::from_matrix_unchecked(GroupKind::Se2, m)
        }
        GroupKind::So3 => {
            let w = xi.hat();
            let s = four / (four + v.dot(v));
            let m = Matrix3::identity() + (w + w * w * T::lit(0.5)) * s;
            GroupElement::from_matrix_unchecked(GroupKind::So3, m)
        }
    }
}

fn cayley_inv<T: Real>(g: &GroupElement<T>) -> Result<AlgebraVector<T>> {
    let m = g.matrix();
    // cos(theta) of the rotation part
    let cos_theta = match g.kind() {
        GroupKind::So3 => (m.trace() - T::one()) * T::lit(0.5),
        GroupKind::Se2 => (m[(0, 0)] + m[(1, 1)]) * T::lit(0.5),
    };
    let p = m + Matrix3::identity();
    let inv = inv3(&p);
    let condition = match &inv {
        Some(inv) => (frobenius(&p) * frobenius(inv)).as_f64(),
        None => f64::INFINITY,
    };
    // (1 + cos theta) / 2 = sin^2(delta / 2) with delta = pi - |theta|
    let margin = (CAYLEY_ANGLE_MARGIN * 0.5).sin();
    let near_pi = ((T::one() + cos_theta) * T::lit(0.5)).as_f64() < margin * margin;
    if near_pi || !(condition <= CAYLEY_COND_LIMIT) {
        return Err(Error::RetractionSingular { condition });
    }
    let x = (m - Matrix3::identity()) * inv.expect("checked above") * T::lit(2.0);
    Ok(AlgebraVector::vee_projected(g.kind(), &x))
}

fn factorial<T: Real>(j: u32) -> T {
    (1..=j).fold(T::one(), |acc, i| acc * T::from_count(i as usize))
}

fn trunc_exp<T: Real>(xi: &AlgebraVector<T>, order: u32) -> GroupElement<T> {
    match xi.kind() {
        GroupKind::So3 => {
            let x = xi.hat();
            let mut term = Matrix3::identity();
            let mut sum = Matrix3::identity();
            for j in 1..=order {
                term = term * x / T::from_count(j as usize);
                sum += term;
            }
            GroupElement::from_matrix_unchecked(GroupKind::So3, sum).reproject()
        }
        GroupKind::Se2 => {
            let v = xi.coords();
            let a = Matrix2::new(T::zero(), -v[0], v[0], T::zero());
            let t = Vector2::new(v[1], v[2]);
            // rotation block series and V(A) = sum A^(j-1)/j!
            let series = |a: Matrix2<T>| {
                let mut rot = Matrix2::identity();
                let mut vel = Matrix2::zeros();
                let mut pow = Matrix2::identity();
                for j in 1..=order {
                    vel += pow / factorial::<T>(j);
                    pow *= a;
                    rot += pow / factorial::<T>(j);
                }
                (rot, vel)
            };
            let (rot, v_plus) = series(a);
            let (_, v_minus) = series(-a);
            let theta = (rot[(1, 0)] - rot[(0, 1)]).atan2(rot[(0, 0)] + rot[(1, 1)]);
            let (s, c) = theta.sin_cos();
            let r = Matrix2::new(c, -s, s, c);
            // symmetrized so that tau(-xi) is exactly the inverse of tau(xi)
            let p = (v_plus * t + r * (v_minus * t)) * T::lit(0.5);
            GroupElement::se2(theta, p[0], p[1])
        }
    }
}

/// `sum_{j < order} ad_xi^j / (j+1)!`, the right-trivialized tangent of exp
/// truncated consistently with the series of the same order.
fn dexp_series<T: Real>(xi: &AlgebraVector<T>, order: u32) -> Matrix3<T> {
    let ad = xi.ad_matrix();
    let mut pow = Matrix3::identity();
    let mut sum = Matrix3::zeros();
    for j in 0..order {
        sum += pow / factorial::<T>(j + 1);
        pow *= ad;
    }
    sum
}

/// Cayley map of an arbitrary square matrix, `(I - X/2)^{-1} (I + X/2)`.
/// Used as an independent reference for the closed forms.
pub fn cayley_general<T: Real>(x: &Matrix3<T>) -> Option<Matrix3<T>> {
    let half = T::lit(0.5);
    let i = Matrix3::identity();
    inv3(&(i - x * half)).map(|a| a * (i + x * half))
}

/// Coordinates of a 3-vector as an algebra element; shorthand for tests and
/// models.
pub fn alg<T: Real>(kind: GroupKind, v: Vector3<T>) -> AlgebraVector<T> {
    AlgebraVector::from_vector(kind, v)
}
