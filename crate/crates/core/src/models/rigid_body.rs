//! Free rigid body on `SO(3)` with reduced discrete Lagrangian
//! `L^_d(xi) = (h/2) xi^T I xi`.

use std::sync::Arc;

use nalgebra::{DVector, Matrix3, Vector3};

use crate::discrete::residual::group_row;
use crate::discrete::{spatial_momentum, GroupOnly, NoConstraints, ReducedLagrangian, Trivialization};
use crate::error::{Error, Result};
use crate::lie::{AlgebraVector, Covector, GroupElement, GroupKind};
use crate::ocp::DiscreteOcp;
use crate::retraction::Retraction;
use crate::scalar::Real;
use crate::solver::{solve, FnSystem, SolverConfig};

fn max_abs<'a, T: Real>(it: impl Iterator<Item = &'a T>) -> T {
    it.fold(T::zero(), |a, x| a.max(x.abs()))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FreeRigidBody<T: Real> {
    /// Body-frame inertia tensor, symmetric positive definite.
    pub inertia: Matrix3<T>,
}

impl<T: Real> FreeRigidBody<T> {
    pub fn new(inertia: Matrix3<T>) -> Result<Self> {
        let sym = max_abs((inertia - inertia.transpose()).iter());
        let scale = max_abs(inertia.iter());
        if !inertia.iter().all(|x| x.is_finite()) || sym > T::lit(1e-12) * scale {
            return Err(Error::InvalidParameter {
                name: "inertia",
                reason: "inertia tensor must be finite and symmetric".into(),
            });
        }
        // Sylvester's criterion on the leading minors.
        let m = &inertia;
        let d1 = m[(0, 0)];
        let d2 = m[(0, 0)] * m[(1, 1)] - m[(0, 1)] * m[(1, 0)];
        let d3 = crate::lie::det3(m);
        if !(d1 > T::zero() && d2 > T::zero() && d3 > T::zero()) {
            return Err(Error::InvalidParameter {
                name: "inertia",
                reason: "inertia tensor must be positive definite".into(),
            });
        }
        Ok(Self { inertia })
    }

    /// Principal moments `diag(i1, i2, i3)`.
    pub fn principal(i1: T, i2: T, i3: T) -> Result<Self> {
        Self::new(Matrix3::from_diagonal(&Vector3::new(i1, i2, i3)))
    }

    /// Body momentum `I xi`.
    pub fn body_momentum(&self, xi: &AlgebraVector<T>) -> Covector<T> {
        Covector::from_vector(GroupKind::So3, self.inertia * xi.coords())
    }

    /// Kinetic energy `xi^T I xi / 2`.
    pub fn energy(&self, xi: &AlgebraVector<T>) -> T {
        T::lit(0.5) * xi.coords().dot(&(self.inertia * xi.coords()))
    }
}

impl<T: Real> ReducedLagrangian<T> for FreeRigidBody<T> {
    fn kind(&self) -> GroupKind {
        GroupKind::So3
    }

    fn eval(&self, h: T, xi: &AlgebraVector<T>) -> T {
        h * self.energy(xi)
    }

    fn gradient(&self, h: T, xi: &AlgebraVector<T>) -> Option<Covector<T>> {
        Some(self.body_momentum(xi).scale(h))
    }
}

/// Discrete trajectory of the free rigid body.
#[derive(Debug, Clone, PartialEq)]
pub struct RigidBodyTrajectory<T: Real> {
    pub h: T,
    /// `g_0 .. g_N`.
    pub g: Vec<GroupElement<T>>,
    /// `xi_0 .. xi_{N-1}`.
    pub xi: Vec<AlgebraVector<T>>,
    /// Spatial momentum carried by each step.
    pub momentum: Vec<Covector<T>>,
    /// Kinetic energy of each step.
    pub energy: Vec<T>,
}

impl<T: Real> RigidBodyTrajectory<T> {
    /// Largest deviation of the spatial momentum from its initial value.
    pub fn momentum_drift(&self) -> T {
        let m0 = self.momentum[0].coords();
        self.momentum
            .iter()
            .map(|m| max_abs((m.coords() - m0).iter()))
            .fold(T::zero(), T::max)
    }

    /// Largest entry of `g_k - g_ref(k h)` over the nodes of `self`, where
    /// `reference` runs over the same horizon with a step that divides `h`.
    pub fn deviation_from(&self, reference: &RigidBodyTrajectory<T>) -> Result<T> {
        crate::study::group_node_deviation(self.h, &self.g, reference.h, &reference.g)
    }

    /// Change over the whole run of the least-squares line through the
    /// relative energy error, a measure of secular drift that ignores bounded
    /// oscillation.
    pub fn energy_trend(&self) -> T {
        let e0 = self.energy[0];
        let n = self.energy.len();
        if n < 2 {
            return T::zero();
        }
        let scale = e0.abs().max(T::min_positive_value());
        let count = T::from_count(n);
        let mt = T::from_count(n - 1) / T::lit(2.0);
        let me = self.energy.iter().fold(T::zero(), |a, e| a + (*e - e0) / scale) / count;
        let (sxy, sxx) = self.energy.iter().enumerate().fold((T::zero(), T::zero()), |(sxy, sxx), (k, e)| {
            let dt = T::from_count(k) - mt;
            (sxy + dt * ((*e - e0) / scale - me), sxx + dt * dt)
        });
        (sxy / sxx * T::from_count(n - 1)).abs()
    }

    /// Largest relative deviation of the energy from its initial value.
    pub fn energy_drift(&self) -> T {
        let e0 = self.energy[0];
        self.energy
            .iter()
            .map(|e| ((*e - e0) / e0.abs().max(T::min_positive_value())).abs())
            .fold(T::zero(), T::max)
    }
}

fn newton_config<T: Real>() -> SolverConfig<T> {
    SolverConfig {
        tol: T::epsilon() * T::lit(64.0),
        max_iters: 50,
        ..SolverConfig::default()
    }
}

fn solve3<T: Real>(
    f: impl Fn(&AlgebraVector<T>) -> Result<Covector<T>> + Sync,
    guess: &AlgebraVector<T>,
    index: usize,
) -> Result<AlgebraVector<T>> {
    let sys = FnSystem {
        dim: 3,
        f: |x: &DVector<T>| {
            let xi = AlgebraVector::new(GroupKind::So3, [x[0], x[1], x[2]]);
            f(&xi).map(|c| DVector::from_column_slice(c.coords().as_slice()))
        },
    };
    let x0 = DVector::from_column_slice(guess.coords().as_slice());
    let rep = solve(&sys, &x0, &newton_config())?;
    // Round-off can stall just above the tolerance; accept anything close.
    if !rep.converged && rep.residual_inf > T::lit(1e-9) {
        return Err(Error::InvalidParameter {
            name: "h",
            reason: format!("implicit step {index} did not converge; reduce the step size h"),
        });
    }
    Ok(AlgebraVector::new(GroupKind::So3, [rep.x[0], rep.x[1], rep.x[2]]))
}

/// Integrates the discrete Euler-Poincare equations from `g0` with initial
/// body angular velocity `omega0` over `n_steps` steps of size `h`.
///
/// The first increment satisfies `dtau^{-1*}_{h xi_0} I xi_0 = I omega0`;
/// later ones solve the group row of the discrete equations.
pub fn integrate_rigid_body<T: Real>(
    body: &FreeRigidBody<T>,
    g0: &GroupElement<T>,
    omega0: &Vector3<T>,
    h: T,
    n_steps: usize,
    retraction: &Retraction,
    triv: Trivialization,
) -> Result<RigidBodyTrajectory<T>> {
    if !(h > T::zero()) || !h.is_finite() {
        return Err(Error::InvalidParameter {
            name: "h",
            reason: format!("step size must be positive, got {h}"),
        });
    }
    if n_steps == 0 {
        return Err(Error::Size("the integrator needs at least one step".into()));
    }
    if g0.kind() != GroupKind::So3 {
        return Err(Error::TagMismatch {
            expected: GroupKind::So3,
            found: g0.kind(),
        });
    }
    let w0 = AlgebraVector::from_vector(GroupKind::So3, *omega0);
    let target = body.body_momentum(&w0);
    let s = |xi: &AlgebraVector<T>| body.body_momentum(xi).scale(h);
    let xi0 = solve3(
        |xi| Ok(retraction.dtau_inv_star(&xi.scale(h), &body.body_momentum(xi))? - target),
        &w0,
        0,
    )?;
    let mut xi = vec![xi0];
    for j in 1..n_steps {
        let prev = xi[j - 1];
        let s_prev = s(&prev);
        let next = solve3(
            |x| Ok(group_row(h, retraction, triv, &prev, x, &s_prev, &s(x))),
            &prev,
            j,
        )?;
        xi.push(next);
    }
    let mut g = vec![*g0];
    let mut momentum = Vec::with_capacity(n_steps);
    for (k, x) in xi.iter().enumerate() {
        momentum.push(spatial_momentum(retraction, triv, &g[k], x, &s(x), h)?);
        let next = triv.step(&g[k], &retraction.tau(&x.scale(h)))?;
        g.push(next.reproject_if_drifted(T::lit(crate::discrete::REPROJECT_THRESHOLD)));
    }
    let energy = xi.iter().map(|x| body.energy(x)).collect();
    Ok(RigidBodyTrajectory {
        h,
        g,
        xi,
        momentum,
        energy,
    })
}

/// Two-point boundary value problem `g(0) = g0`, `g(N h) = g_target` for the
/// free rigid body, as a first-order discrete system in `xi_0 .. xi_{N-1}`.
pub fn rigid_body_bvp<T: Real>(
    body: FreeRigidBody<T>,
    g0: GroupElement<T>,
    g_target: GroupElement<T>,
    n_steps: usize,
    h: T,
    retraction: Retraction,
    triv: Trivialization,
) -> Result<DiscreteOcp<T>> {
    if !(h > T::zero()) || !h.is_finite() {
        return Err(Error::InvalidParameter {
            name: "h",
            reason: format!("step size must be positive, got {h}"),
        });
    }
    let ocp = DiscreteOcp {
        lagrangian: Arc::new(GroupOnly(body)),
        constraints: Arc::new(NoConstraints),
        n_steps,
        h,
        fixed_q_start: vec![DVector::zeros(0)],
        fixed_q_end: vec![DVector::zeros(0)],
        fixed_xi_start: Vec::new(),
        fixed_xi_end: Vec::new(),
        g0,
        g_target,
        retraction,
        trivialization: triv,
    };
    ocp.validate()?;
    Ok(ocp)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn body() -> FreeRigidBody<f64> {
        FreeRigidBody::principal(1.0, 2.0, 3.0).unwrap()
    }

    #[test]
    fn rejects_bad_inertia() {
        assert!(FreeRigidBody::principal(1.0, -2.0, 3.0).is_err());
        let mut m = Matrix3::identity();
        m[(0, 1)] = 0.5;
        assert!(FreeRigidBody::new(m).is_err());
    }

    #[test]
    fn analytic_gradient_matches_differences() {
        let b = body();
        let xi = AlgebraVector::new(GroupKind::So3, [0.3, -0.2, 0.7]);
        let an = b.gradient(0.1, &xi).unwrap();
        for j in 0..3 {
            let e = 1e-6;
            let mut p = xi;
            let mut m = xi;
            p.coords_mut()[j] += e;
            m.coords_mut()[j] -= e;
            let fd = (b.eval(0.1, &p) - b.eval(0.1, &m)) / (2.0 * e);
            assert_relative_eq!(an.coords()[j], fd, epsilon = 1e-9);
        }
    }

    #[test]
    fn principal_axis_spin_is_steady() {
        let b = body();
        for triv in [Trivialization::Left, Trivialization::Right] {
            let tr = integrate_rigid_body(
                &b,
                &GroupElement::identity(GroupKind::So3),
                &Vector3::new(0.0, 0.0, 1.5),
                0.05,
                40,
                &Retraction::cayley(),
                triv,
            )
            .unwrap();
            for x in &tr.xi {
                assert_relative_eq!(*x.coords(), *tr.xi[0].coords(), epsilon = 1e-13);
            }
        }
    }

    #[test]
    fn momentum_is_conserved_and_energy_bounded() {
        let b = body();
        for triv in [Trivialization::Left, Trivialization::Right] {
            let tr = integrate_rigid_body(
                &b,
                &GroupElement::rot_x(0.3),
                &Vector3::new(0.4, 1.0, -0.6),
                0.05,
                400,
                &Retraction::cayley(),
                triv,
            )
            .unwrap();
            assert!(tr.momentum_drift() < 1e-12, "{triv:?}: {}", tr.momentum_drift());
            assert!(tr.energy_drift() < 1e-2, "{triv:?}: {}", tr.energy_drift());
            for g in &tr.g {
                assert!(g.orthogonality_defect() < 1e-12);
            }
        }
    }

    #[test]
    fn boundary_value_problem_recovers_integrated_motion() {
        let b = body();
        let h = 0.1;
        let n = 12;
        let r = Retraction::cayley();
        let tr = integrate_rigid_body(
            &b,
            &GroupElement::identity(GroupKind::So3),
            &Vector3::new(0.3, 0.5, -0.2),
            h,
            n,
            &r,
            Trivialization::Left,
        )
        .unwrap();
        let ocp = rigid_body_bvp(b, tr.g[0], tr.g[n], n, h, r, Trivialization::Left).unwrap();
        let x0 = ocp.initial_guess().unwrap();
        let rep = solve(&ocp, &x0, &SolverConfig::default()).unwrap();
        assert!(rep.converged);
        let path = ocp.scatter(&rep.x).unwrap();
        for (a, b) in path.xi.iter().zip(&tr.xi) {
            assert_relative_eq!(*a.coords(), *b.coords(), epsilon = 1e-9);
        }
    }

    #[test]
    fn bvp_needs_enough_steps() {
        let id = GroupElement::identity(GroupKind::So3);
        assert!(rigid_body_bvp(body(), id, id, 2, 0.1, Retraction::cayley(), Trivialization::Left).is_err());
    }
}
