use std::sync::Arc;

use super::{ltilde_gradient, phi_gradients, Jet, JetGradient, SecondOrderModel};
use crate::discrete::{DiscreteConstraintSet, DiscreteLagrangian, Trivialization, Window, WindowGradient};
use crate::lie::{AlgebraVector, Covector, GroupKind};
use crate::scalar::Real;

/// Jet seen by window `(q_k, q_{k+1}, q_{k+2}, xi_k, xi_{k+1})`:
///
/// ```text
/// q   = (q_k + q_{k+1} + q_{k+2}) / 3     q'  = (q_{k+2} - q_k) / 2h
/// q'' = (q_{k+2} - 2 q_{k+1} + q_k) / h^2
/// xi  = (xi_k + xi_{k+1}) / 2             xi' = (xi_{k+1} - xi_k) / h
/// ```
///
/// at time `t0 + (k + 1) h`, the time of the middle node.
pub fn window_jet<T: Real>(w: &Window<T>, t0: T) -> Jet<T> {
    let h = w.h;
    let (a, b, c) = (&w.q[0], &w.q[1], &w.q[2]);
    let third = T::one() / T::lit(3.0);
    let two = T::lit(2.0);
    let half = T::lit(0.5);
    Jet {
        t: t0 + T::from_count(w.index + 1) * h,
        q: (a + b + c) * third,
        qd: (c - a) / (two * h),
        qdd: (c - b * two + a) / (h * h),
        xi: AlgebraVector::from_vector(
            w.xi[0].kind(),
            (w.xi[0].coords() + w.xi[1].coords()) * half,
        ),
        xid: AlgebraVector::from_vector(
            w.xi[0].kind(),
            (w.xi[1].coords() - w.xi[0].coords()) / h,
        ),
    }
}

/// Pulls a jet gradient back through the stencils, scaled by `s`.
fn chain<T: Real>(g: &JetGradient<T>, h: T, s: T, kind: GroupKind) -> WindowGradient<T> {
    let third = T::one() / T::lit(3.0);
    let two = T::lit(2.0);
    let half = T::lit(0.5);
    let dq = &g.q * third;
    let dqd = &g.qd / (two * h);
    let dqdd = &g.qdd / (h * h);
    let q0 = (&dq - &dqd + &dqdd) * s;
    let q1 = (&dq - &dqdd * two) * s;
    let q2 = (&dq + &dqd + &dqdd) * s;
    let xi_mid = g.xi.coords() * half;
    let xi_dot = g.xid.coords() / h;
    WindowGradient {
        q: vec![q0, q1, q2],
        xi: vec![
            Covector::from_vector(kind, (xi_mid - xi_dot) * s),
            Covector::from_vector(kind, (xi_mid + xi_dot) * s),
        ],
        g: Covector::zero(kind),
    }
}

/// `L~_d = h L~(window_jet)`.
#[derive(Clone)]
pub struct StencilLagrangian<T: Real> {
    model: Arc<dyn SecondOrderModel<T>>,
    t0: T,
}

/// `Phi_d = Phi(window_jet)`.
#[derive(Clone)]
pub struct StencilConstraints<T: Real> {
    model: Arc<dyn SecondOrderModel<T>>,
    t0: T,
}

impl<T: Real> StencilLagrangian<T> {
    pub fn model(&self) -> &Arc<dyn SecondOrderModel<T>> {
        &self.model
    }

    pub fn start_time(&self) -> T {
        self.t0
    }
}

impl<T: Real> DiscreteLagrangian<T> for StencilLagrangian<T> {
    fn order(&self) -> usize {
        2
    }

    fn config_dim(&self) -> usize {
        self.model.config_dim()
    }

    fn kind(&self) -> GroupKind {
        self.model.kind()
    }

    fn eval(&self, w: &Window<T>) -> T {
        w.h * self.model.ltilde(&window_jet(w, self.t0))
    }

    fn gradient(&self, w: &Window<T>, _triv: Trivialization) -> Option<WindowGradient<T>> {
        let jet = window_jet(w, self.t0);
        let g = ltilde_gradient(self.model.as_ref(), &jet);
        Some(chain(&g, w.h, w.h, self.model.kind()))
    }
}

impl<T: Real> DiscreteConstraintSet<T> for StencilConstraints<T> {
    fn count(&self) -> usize {
        self.model.constraint_count()
    }

    fn eval(&self, w: &Window<T>, out: &mut [T]) {
        self.model.phi(&window_jet(w, self.t0), out);
    }

    fn gradient(&self, w: &Window<T>, _triv: Trivialization) -> Option<Vec<WindowGradient<T>>> {
        let jet = window_jet(w, self.t0);
        let kind = self.model.kind();
        Some(
            phi_gradients(self.model.as_ref(), &jet)
                .iter()
                .map(|g| chain(g, w.h, T::one(), kind))
                .collect(),
        )
    }
}

/// Second-order discrete Lagrangian and constraints built from the
/// symmetric stencils of [`window_jet`]; node 0 sits at time `t0`.
pub fn discretize<T: Real>(
    model: Arc<dyn SecondOrderModel<T>>,
    t0: T,
) -> (StencilLagrangian<T>, StencilConstraints<T>) {
    (
        StencilLagrangian {
            model: model.clone(),
            t0,
        },
        StencilConstraints { model, t0 },
    )
}

/// Builds the window for given node data; convenient for stencil checks.
#[cfg(test)]
pub(crate) fn window_from_nodes<T: Real>(
    index: usize,
    h: T,
    q: [nalgebra::DVector<T>; 3],
    xi: [AlgebraVector<T>; 2],
) -> Window<T> {
    Window {
        index,
        h,
        q: q.to_vec(),
        g: crate::lie::GroupElement::identity(xi[0].kind()),
        xi: xi.to_vec(),
    }
}
