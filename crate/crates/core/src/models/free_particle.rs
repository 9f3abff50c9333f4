//! Unconstrained free particle on `R^2 x SE(2)` with
//! `L~ = |q''|^2 / 2 + |xi'|^2 / 2`. Straight lines with `xi = 0` solve the
//! discrete equations exactly, which makes it a round-off reference.

use std::sync::Arc;

use nalgebra::DVector;

use crate::error::Result;
use crate::lie::{AlgebraVector, GroupElement, GroupKind};
use crate::ocp::{BoundaryData, Jet, JetGradient, SecondOrderModel, SecondOrderProblem};
use crate::scalar::Real;

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct FreeParticle;

impl<T: Real> SecondOrderModel<T> for FreeParticle {
    fn config_dim(&self) -> usize {
        2
    }

    fn kind(&self) -> GroupKind {
        GroupKind::Se2
    }

    fn constraint_count(&self) -> usize {
        0
    }

    fn ltilde(&self, j: &Jet<T>) -> T {
        T::lit(0.5) * (j.qdd.dot(&j.qdd) + j.xid.coords().dot(j.xid.coords()))
    }

    fn phi(&self, _j: &Jet<T>, _out: &mut [T]) {}

    fn ltilde_gradient(&self, j: &Jet<T>) -> Option<JetGradient<T>> {
        let mut g = JetGradient::zeros(GroupKind::Se2, 2);
        g.qdd = j.qdd.clone();
        *g.xid.coords_mut() = *j.xid.coords();
        Some(g)
    }

    fn phi_gradient(&self, _j: &Jet<T>) -> Option<Vec<JetGradient<T>>> {
        Some(Vec::new())
    }
}

/// Boundary data of uniform straight-line motion from `q0` with velocity
/// `v` over `[0, horizon]`, with the group at rest at `g0`.
pub fn straight_line_boundary<T: Real>(
    q0: DVector<T>,
    v: DVector<T>,
    g0: GroupElement<T>,
    horizon: T,
) -> BoundaryData<T> {
    BoundaryData {
        q_t: &q0 + &v * horizon,
        q0,
        qd0: v.clone(),
        qd_t: v,
        xi0: AlgebraVector::zero(GroupKind::Se2),
        g0,
        xi_t: AlgebraVector::zero(GroupKind::Se2),
        g_t: g0,
    }
}

pub fn free_particle_problem<T: Real>(
    boundary: BoundaryData<T>,
    n_steps: usize,
    h: T,
) -> Result<SecondOrderProblem<T>> {
    SecondOrderProblem::new(Arc::new(FreeParticle), boundary, n_steps, h)
}
