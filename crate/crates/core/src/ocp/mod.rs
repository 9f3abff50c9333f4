//! Optimal control of underactuated systems as constrained second-order
//! variational problems on `T^(2)M x 2g`, and their discretization into
//! square root-finding systems.

mod discretize;
mod reduction;
mod system;

use std::sync::Arc;

use nalgebra::DVector;

use crate::discrete::Trivialization;
use crate::error::{Error, Result};
use crate::lie::{AlgebraVector, Covector, GroupElement, GroupKind};
use crate::retraction::Retraction;
use crate::scalar::Real;

pub use discretize::{discretize, window_jet, StencilConstraints, StencilLagrangian};
pub use reduction::{
    reduce_to_variational, BasisFn, ControlledSystem, CostFn, Dynamics, JetFn, ReducedLagrangianFn,
    ReducedProblem, NESTED_FD_STEP,
};
pub use system::{Counts, DiscreteOcp, JacobianMode, Layout};

/// Second-order jet `(t, q, q', q'', xi, xi')` at which `L~` and `Phi` are
/// evaluated.
#[derive(Debug, Clone, PartialEq)]
pub struct Jet<T: Real> {
    pub t: T,
    pub q: DVector<T>,
    pub qd: DVector<T>,
    pub qdd: DVector<T>,
    pub xi: AlgebraVector<T>,
    pub xid: AlgebraVector<T>,
}

impl<T: Real> Jet<T> {
    pub fn zero(kind: GroupKind, n: usize) -> Self {
        Self {
            t: T::zero(),
            q: DVector::zeros(n),
            qd: DVector::zeros(n),
            qdd: DVector::zeros(n),
            xi: AlgebraVector::zero(kind),
            xid: AlgebraVector::zero(kind),
        }
    }

    /// Number of scalar slots (time excluded).
    pub fn len(&self) -> usize {
        3 * self.q.len() + 6
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    /// Slot `i` in the order `q, q', q'', xi, xi'`.
    pub fn get(&self, i: usize) -> T {
        let n = self.q.len();
        match i {
            i if i < n => self.q[i],
            i if i < 2 * n => self.qd[i - n],
            i if i < 3 * n => self.qdd[i - 2 * n],
            i if i < 3 * n + 3 => self.xi.coords()[i - 3 * n],
            i => self.xid.coords()[i - 3 * n - 3],
        }
    }

    pub fn set(&mut self, i: usize, v: T) {
        let n = self.q.len();
        match i {
            i if i < n => self.q[i] = v,
            i if i < 2 * n => self.qd[i - n] = v,
            i if i < 3 * n => self.qdd[i - 2 * n] = v,
            i if i < 3 * n + 3 => self.xi.coords_mut()[i - 3 * n] = v,
            i => self.xid.coords_mut()[i - 3 * n - 3] = v,
        }
    }
}

/// Partial derivatives of a scalar function of a [`Jet`].
#[derive(Debug, Clone, PartialEq)]
pub struct JetGradient<T: Real> {
    pub q: DVector<T>,
    pub qd: DVector<T>,
    pub qdd: DVector<T>,
    pub xi: Covector<T>,
    pub xid: Covector<T>,
}

impl<T: Real> JetGradient<T> {
    pub fn zeros(kind: GroupKind, n: usize) -> Self {
        Self {
            q: DVector::zeros(n),
            qd: DVector::zeros(n),
            qdd: DVector::zeros(n),
            xi: Covector::zero(kind),
            xid: Covector::zero(kind),
        }
    }

    pub fn set(&mut self, i: usize, v: T) {
        let n = self.q.len();
        match i {
            i if i < n => self.q[i] = v,
            i if i < 2 * n => self.qd[i - n] = v,
            i if i < 3 * n => self.qdd[i - 2 * n] = v,
            i if i < 3 * n + 3 => self.xi.coords_mut()[i - 3 * n] = v,
            i => self.xid.coords_mut()[i - 3 * n - 3] = v,
        }
    }

    pub fn get(&self, i: usize) -> T {
        let n = self.q.len();
        match i {
            i if i < n => self.q[i],
            i if i < 2 * n => self.qd[i - n],
            i if i < 3 * n => self.qdd[i - 2 * n],
            i if i < 3 * n + 3 => self.xi.coords()[i - 3 * n],
            i => self.xid.coords()[i - 3 * n - 3],
        }
    }
}

/// Cost-derived Lagrangian `L~` and constraints `Phi^alpha` of a reduced
/// optimal control problem.
pub trait SecondOrderModel<T: Real>: Send + Sync {
    /// Dimension of `M`.
    fn config_dim(&self) -> usize;
    fn kind(&self) -> GroupKind;
    /// Number `m` of constraints.
    fn constraint_count(&self) -> usize;
    fn ltilde(&self, jet: &Jet<T>) -> T;
    fn phi(&self, jet: &Jet<T>, out: &mut [T]);
    /// Analytic gradient of `L~`; `None` selects central differences.
    fn ltilde_gradient(&self, _jet: &Jet<T>) -> Option<JetGradient<T>> {
        None
    }
    /// Analytic gradients of every `Phi^alpha`.
    fn phi_gradient(&self, _jet: &Jet<T>) -> Option<Vec<JetGradient<T>>> {
        None
    }
}

/// Central-difference gradients of an `m`-output jet function.
pub fn fd_jet_gradients<T: Real>(
    f: &dyn Fn(&Jet<T>, &mut [T]),
    m: usize,
    jet: &Jet<T>,
) -> Vec<JetGradient<T>> {
    let n = jet.q.len();
    let kind = jet.xi.kind();
    let mut out = vec![JetGradient::zeros(kind, n); m];
    let mut probe = jet.clone();
    let mut fp = vec![T::zero(); m];
    let mut fm = vec![T::zero(); m];
    for i in 0..jet.len() {
        let x = jet.get(i);
        let step = T::fd_step(x);
        probe.set(i, x + step);
        f(&probe, &mut fp);
        probe.set(i, x - step);
        f(&probe, &mut fm);
        probe.set(i, x);
        for o in 0..m {
            out[o].set(i, (fp[o] - fm[o]) / (step + step));
        }
    }
    out
}

pub(crate) fn ltilde_gradient<T: Real>(model: &dyn SecondOrderModel<T>, jet: &Jet<T>) -> JetGradient<T> {
    model.ltilde_gradient(jet).unwrap_or_else(|| {
        let f = |j: &Jet<T>, out: &mut [T]| out[0] = model.ltilde(j);
        fd_jet_gradients(&f, 1, jet).pop().expect("one output")
    })
}

pub(crate) fn phi_gradients<T: Real>(model: &dyn SecondOrderModel<T>, jet: &Jet<T>) -> Vec<JetGradient<T>> {
    model.phi_gradient(jet).unwrap_or_else(|| {
        let f = |j: &Jet<T>, out: &mut [T]| model.phi(j, out);
        fd_jet_gradients(&f, model.constraint_count(), jet)
    })
}

/// Boundary data of the optimal control problem.
#[derive(Debug, Clone, PartialEq)]
pub struct BoundaryData<T: Real> {
    pub q0: DVector<T>,
    pub qd0: DVector<T>,
    pub xi0: AlgebraVector<T>,
    pub g0: GroupElement<T>,
    pub q_t: DVector<T>,
    pub qd_t: DVector<T>,
    pub xi_t: AlgebraVector<T>,
    pub g_t: GroupElement<T>,
}

impl<T: Real> BoundaryData<T> {
    fn validate(&self, n: usize, kind: GroupKind) -> Result<()> {
        for (name, v) in [("q0", &self.q0), ("qd0", &self.qd0), ("qT", &self.q_t), ("qdT", &self.qd_t)] {
            if v.len() != n {
                return Err(Error::InvalidParameter {
                    name: "boundary",
                    reason: format!("{name} has {} entries, expected {n}", v.len()),
                });
            }
            if v.iter().any(|x| !x.is_finite()) {
                return Err(Error::InvalidParameter {
                    name: "boundary",
                    reason: format!("{name} is not finite"),
                });
            }
        }
        for (name, k) in [
            ("xi0", self.xi0.kind()),
            ("xiT", self.xi_t.kind()),
            ("g0", self.g0.kind()),
            ("gT", self.g_t.kind()),
        ] {
            if k != kind {
                return Err(Error::InvalidParameter {
                    name: "boundary",
                    reason: format!("{name} belongs to {k:?}, expected {kind:?}"),
                });
            }
        }
        if self.xi0.coords().iter().chain(self.xi_t.coords().iter()).any(|x| !x.is_finite()) {
            return Err(Error::InvalidParameter {
                name: "boundary",
                reason: "algebra boundary data is not finite".into(),
            });
        }
        Ok(())
    }
}

/// How continuous boundary data become fixed discrete nodes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum BoundaryMode {
    /// Nodes at `t_k = k h`, `T = N h`: `q_1 = q(0) + h q'(0)`,
    /// `q_{N-1} = q(T) - h q'(T)`, `xi_0 = xi(0)`, `xi_{N-1} = xi(T)`,
    /// `g_0 = g(0)` and the closure targets `g(T)`.
    #[default]
    Literal,
    /// Nodes at `t_k = (k - 1/2) h`, `T = (N - 1) h`: the first and last node
    /// pairs straddle the end points, `q_{0,1} = q(0) -/+ (h/2) q'(0)`, and
    /// the group nodes are shifted by half an increment, so that every
    /// boundary value sits at the centre of its stencil.
    Staggered,
}

/// A reduced optimal control problem together with its discretization
/// parameters.
#[derive(Clone)]
pub struct SecondOrderProblem<T: Real> {
    pub model: Arc<dyn SecondOrderModel<T>>,
    pub boundary: BoundaryData<T>,
    pub n_steps: usize,
    pub h: T,
    pub retraction: Retraction,
    pub trivialization: Trivialization,
    pub boundary_mode: BoundaryMode,
}

impl<T: Real> SecondOrderProblem<T> {
    pub fn new(
        model: Arc<dyn SecondOrderModel<T>>,
        boundary: BoundaryData<T>,
        n_steps: usize,
        h: T,
    ) -> Result<Self> {
        if !(h > T::zero()) || !h.is_finite() {
            return Err(Error::InvalidParameter {
                name: "h",
                reason: format!("step size must be positive, got {h}"),
            });
        }
        boundary.validate(model.config_dim(), model.kind())?;
        Ok(Self {
            model,
            boundary,
            n_steps,
            h,
            retraction: Retraction::cayley(),
            trivialization: Trivialization::Left,
            boundary_mode: BoundaryMode::Literal,
        })
    }

    pub fn with_retraction(mut self, r: Retraction) -> Self {
        self.retraction = r;
        self
    }

    pub fn with_trivialization(mut self, t: Trivialization) -> Self {
        self.trivialization = t;
        self
    }

    pub fn with_boundary_mode(mut self, mode: BoundaryMode) -> Self {
        self.boundary_mode = mode;
        self
    }

    /// Final time implied by `N`, `h` and the boundary mode.
    pub fn horizon(&self) -> T {
        match self.boundary_mode {
            BoundaryMode::Literal => T::from_count(self.n_steps) * self.h,
            BoundaryMode::Staggered => T::from_count(self.n_steps - 1) * self.h,
        }
    }

    /// Time of node `k`.
    pub fn node_time(&self, k: usize) -> T {
        let t = T::from_count(k) * self.h;
        match self.boundary_mode {
            BoundaryMode::Literal => t,
            BoundaryMode::Staggered => t - self.h * T::lit(0.5),
        }
    }

    /// Initial guess for this problem transferred from a solution `coarse_x`
    /// of `coarse`, typically on a coarser mesh over the same horizon.
    ///
    /// Configuration nodes, increments (sampled at step midpoints) and
    /// multipliers (at window centres, rescaled by the step ratio since the
    /// discrete multipliers carry a factor `h`) are interpolated by local
    /// cubics in time.
    pub fn transfer_guess(&self, coarse: &SecondOrderProblem<T>, coarse_x: &DVector<T>) -> Result<DVector<T>> {
        let fine = self.to_discrete()?;
        let src = coarse.to_discrete()?;
        let path = src.scatter(coarse_x)?;
        let half = T::lit(0.5);
        let width = 4;
        let q_t: Vec<T> = (0..path.q.len()).map(|k| coarse.node_time(k)).collect();
        let q_v: Vec<&[T]> = path.q.iter().map(|v| v.as_slice()).collect();
        let xi_t: Vec<T> = (0..path.xi.len()).map(|k| coarse.node_time(k) + coarse.h * half).collect();
        let xi_v: Vec<&[T]> = path.xi.iter().map(|v| v.coords().as_slice()).collect();
        let l = fine.layout();
        let mut x = fine.initial_guess()?;
        for j in l.q_nodes() {
            let v = crate::interp::local_interpolate(&q_t, &q_v, self.node_time(j), width)?;
            for c in 0..l.n {
                x[l.q_index(j, c)] = v[c];
            }
        }
        for j in l.xi_nodes() {
            let v = crate::interp::local_interpolate(&xi_t, &xi_v, self.node_time(j) + self.h * half, width)?;
            for c in 0..3 {
                x[l.xi_index(j, c)] = v[c];
            }
        }
        if l.m > 0 {
            let lam_t: Vec<T> = (0..path.lambda.len()).map(|w| coarse.node_time(w + 1)).collect();
            let lam_v: Vec<&[T]> = path.lambda.iter().map(|v| v.as_slice()).collect();
            let ratio = self.h / coarse.h;
            for w in l.windows() {
                let v = crate::interp::local_interpolate(&lam_t, &lam_v, self.node_time(w + 1), width)?;
                for c in 0..l.m {
                    x[l.lambda_index(w, c)] = v[c] * ratio;
                }
            }
        }
        Ok(x)
    }

    /// Builds the square discrete system.
    pub fn to_discrete(&self) -> Result<DiscreteOcp<T>> {
        if self.n_steps < 6 {
            return Err(Error::Size(format!(
                "optimal control problems need N >= 6, got N = {}",
                self.n_steps
            )));
        }
        let b = &self.boundary;
        let h = self.h;
        let n = self.n_steps;
        let (ld, phi) = discretize(self.model.clone(), self.node_time(0));
        let triv = self.trivialization;
        let r = self.retraction;
        let (q_start, q_end, g0, g_target) = match self.boundary_mode {
            BoundaryMode::Literal => (
                vec![b.q0.clone(), &b.q0 + &b.qd0 * h],
                vec![&b.q_t - &b.qd_t * h, b.q_t.clone()],
                b.g0,
                b.g_t,
            ),
            BoundaryMode::Staggered => {
                let half = h * T::lit(0.5);
                let g0 = triv.step(&b.g0, &r.tau(&b.xi0.scale(-half)))?;
                let gt = triv.step(&b.g_t, &r.tau(&b.xi_t.scale(half)))?;
                (
                    vec![&b.q0 - &b.qd0 * half, &b.q0 + &b.qd0 * half],
                    vec![&b.q_t - &b.qd_t * half, &b.q_t + &b.qd_t * half],
                    g0,
                    gt,
                )
            }
        };
        Ok(DiscreteOcp {
            lagrangian: Arc::new(ld),
            constraints: Arc::new(phi),
            n_steps: n,
            h,
            fixed_q_start: q_start,
            fixed_q_end: q_end,
            fixed_xi_start: vec![b.xi0],
            fixed_xi_end: vec![b.xi_t],
            g0,
            g_target,
            retraction: r,
            trivialization: triv,
        })
    }
}
