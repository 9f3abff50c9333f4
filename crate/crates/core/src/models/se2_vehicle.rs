//! Underactuated planar vehicle on `SE(2) x S^1`: a rigid body with a rotor
//! of angle `gamma`, driven by a thrust `u1` applied at distance `p` from the
//! centre of mass and a rotor torque `u2`.
//!
//! Algebra coordinates follow the hat map: `xi1` is the rotation rate,
//! `(xi2, xi3)` the body translation rates. Equation vectors are ordered
//! `(xi1, xi2, xi3, gamma)`.

use std::sync::Arc;

use nalgebra::DVector;

use crate::error::{Error, Result};
use crate::lie::{AlgebraVector, Covector, GroupKind};
use crate::ocp::{
    BoundaryData, ControlledSystem, Dynamics, Jet, JetGradient, SecondOrderModel, SecondOrderProblem,
};
use crate::scalar::Real;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Se2VehicleParams<T: Real> {
    pub m: T,
    pub j1: T,
    pub j2: T,
    pub p: T,
    pub rho1: T,
    pub rho2: T,
}

impl<T: Real> Default for Se2VehicleParams<T> {
    fn default() -> Self {
        Self {
            m: T::one(),
            j1: T::one(),
            j2: T::lit(0.5),
            p: T::lit(0.1),
            rho1: T::one(),
            rho2: T::one(),
        }
    }
}

impl<T: Real> Se2VehicleParams<T> {
    pub fn validate(&self) -> Result<()> {
        let fields = [
            ("m", self.m),
            ("J1", self.j1),
            ("J2", self.j2),
            ("p", self.p),
            ("rho1", self.rho1),
            ("rho2", self.rho2),
        ];
        for (name, v) in fields {
            if !(v > T::zero()) || !v.is_finite() {
                return Err(Error::InvalidParameter {
                    name,
                    reason: format!("must be positive and finite, got {v}"),
                });
            }
        }
        Ok(())
    }
}

/// Closed-form cost Lagrangian and constraints of the vehicle.
#[derive(Debug, Clone, Copy)]
pub struct Se2Vehicle<T: Real> {
    pub params: Se2VehicleParams<T>,
}

struct State<T> {
    g: T,
    gd: T,
    gdd: T,
    x: [T; 3],
    xd: [T; 3],
}

fn state<T: Real>(j: &Jet<T>) -> State<T> {
    let x = j.xi.coords();
    let xd = j.xid.coords();
    State {
        g: j.q[0],
        gd: j.qd[0],
        gdd: j.qdd[0],
        x: [x[0], x[1], x[2]],
        xd: [xd[0], xd[1], xd[2]],
    }
}

impl<T: Real> Se2Vehicle<T> {
    pub fn new(params: Se2VehicleParams<T>) -> Result<Self> {
        params.validate()?;
        Ok(Self { params })
    }

    /// Left-hand sides of the reduced controlled equations
    /// `E = u1 (cos g, sin g, -p sin g, 0) + u2 (0, 0, 0, 1)`.
    pub fn controlled_equations(&self, j: &Jet<T>) -> [T; 4] {
        let Se2VehicleParams { m, j1, j2, .. } = self.params;
        let s = state(j);
        let a = j1 + j2;
        let [x1, x2, x3] = s.x;
        let [d1, d2, d3] = s.xd;
        [
            m * d1,
            m * d2 + a * x1 * x3 + j2 * x1 * s.gd - m * x1 * x3,
            a * d3 + j2 * s.gdd - m * x2 * (x1 + x3),
            j2 * (d3 + s.gdd),
        ]
    }

    /// Control covectors `B^1`, `B^2` at rotor angle `gamma`.
    pub fn control_covectors(&self, gamma: T) -> [[T; 4]; 2] {
        let (s, c) = gamma.sin_cos();
        let z = T::zero();
        [[c, s, -self.params.p * s, z], [z, z, z, T::one()]]
    }

    /// `F1`, `F2`: the controls that realize the jet.
    pub fn controls(&self, j: &Jet<T>) -> [T; 2] {
        let Se2VehicleParams { m, j1, j2, .. } = self.params;
        let st = state(j);
        let (s, c) = st.g.sin_cos();
        let a = j1 + j2;
        let [x1, _, x3] = st.x;
        let [d1, d2, d3] = st.xd;
        [
            m * (c * d1 + s * (d2 - x1 * x3)) + a * x1 * x3 * s + j2 * x1 * st.gd * s,
            j2 * (d3 + st.gdd),
        ]
    }

    /// Reduced Lagrangian `l = m/2 (xi1^2 + xi2^2) + (J1 + J2)/2 xi3^2
    /// + J2 xi3 gamma' + J2/2 gamma'^2` exactly as stated for the vehicle.
    pub fn reduced_lagrangian(&self, qd: &DVector<T>, xi: &AlgebraVector<T>) -> T {
        let Se2VehicleParams { m, j1, j2, .. } = self.params;
        let x = xi.coords();
        let half = T::lit(0.5);
        half * m * (x[0] * x[0] + x[1] * x[1]) + half * (j1 + j2) * x[2] * x[2] + j2 * x[2] * qd[0] + half * j2 * qd[0] * qd[0]
    }

    /// The vehicle as a controlled system with the closed-form equations
    /// and the adapted basis `X_1 = (cos, sin, 0, 0)`, `X_2 = (0, 0, 0, 1)`,
    /// `X_a1 = (-sin, cos, 0, 0)`, `X_a2 = (0, 1, 1/p, 0)`.
    pub fn controlled_system(&self) -> ControlledSystem<T> {
        let me = *self;
        let p = self.params.p;
        let (rho1, rho2) = (self.params.rho1, self.params.rho2);
        ControlledSystem {
            config_dim: 1,
            kind: GroupKind::Se2,
            dynamics: Dynamics::Explicit(Arc::new(move |j: &Jet<T>, out: &mut [T]| {
                out.copy_from_slice(&me.controlled_equations(j));
            })),
            actuated: Arc::new(|q: &DVector<T>| {
                let (s, c) = q[0].sin_cos();
                let z = T::zero();
                vec![
                    DVector::from_vec(vec![c, s, z, z]),
                    DVector::from_vec(vec![z, z, z, T::one()]),
                ]
            }),
            unactuated: Arc::new(move |q: &DVector<T>| {
                let (s, c) = q[0].sin_cos();
                let z = T::zero();
                vec![
                    DVector::from_vec(vec![-s, c, z, z]),
                    DVector::from_vec(vec![z, T::one(), T::one() / p, z]),
                ]
            }),
            cost: Arc::new(move |_j: &Jet<T>, u: &[T]| rho1 * u[0] * u[0] + rho2 * u[1] * u[1]),
            samples: [0.0, 0.7, 1.5707963267948966, 2.5, -1.2]
                .iter()
                .map(|&g| DVector::from_vec(vec![T::lit(g)]))
                .collect(),
        }
    }
}

impl<T: Real> SecondOrderModel<T> for Se2Vehicle<T> {
    fn config_dim(&self) -> usize {
        1
    }

    fn kind(&self) -> GroupKind {
        GroupKind::Se2
    }

    fn constraint_count(&self) -> usize {
        2
    }

    fn ltilde(&self, j: &Jet<T>) -> T {
        let [f1, f2] = self.controls(j);
        self.params.rho1 * f1 * f1 + self.params.rho2 * f2 * f2
    }

    fn phi(&self, j: &Jet<T>, out: &mut [T]) {
        let Se2VehicleParams { m, j1, j2, p, .. } = self.params;
        let st = state(j);
        let (s, c) = st.g.sin_cos();
        let a = j1 + j2;
        let [x1, x2, x3] = st.x;
        let [d1, d2, d3] = st.xd;
        out[0] = m * (c * (d2 - x1 * x3) - s * d1) + x1 * x3 * a * c + j2 * x1 * st.gd * c;
        out[1] = a / p * (d3 + p * x1 * x3) + j2 / p * (st.gdd + p * x1 * st.gd)
            + m * (d2 - x1 * x3 - (x2 * x1 + x3 * x2) / p);
    }

    fn ltilde_gradient(&self, j: &Jet<T>) -> Option<JetGradient<T>> {
        let Se2VehicleParams { m, j1, j2, rho1, rho2, .. } = self.params;
        let st = state(j);
        let (s, c) = st.g.sin_cos();
        let a = j1 + j2;
        let [x1, _, x3] = st.x;
        let [f1, f2] = self.controls(j);
        let mut phi = [T::zero(); 2];
        self.phi(j, &mut phi);
        let w1 = T::lit(2.0) * rho1 * f1;
        let w2 = T::lit(2.0) * rho2 * f2;
        // dF1/dgamma = Phi1
        Some(JetGradient {
            q: DVector::from_vec(vec![w1 * phi[0]]),
            qd: DVector::from_vec(vec![w1 * j2 * x1 * s]),
            qdd: DVector::from_vec(vec![w2 * j2]),
            xi: Covector::new(
                GroupKind::Se2,
                [w1 * s * ((a - m) * x3 + j2 * st.gd), T::zero(), w1 * s * (a - m) * x1],
            ),
            xid: Covector::new(GroupKind::Se2, [w1 * m * c, w1 * m * s, w2 * j2]),
        })
    }

    fn phi_gradient(&self, j: &Jet<T>) -> Option<Vec<JetGradient<T>>> {
        let Se2VehicleParams { m, j1, j2, p, .. } = self.params;
        let st = state(j);
        let (s, c) = st.g.sin_cos();
        let a = j1 + j2;
        let [x1, x2, x3] = st.x;
        let [f1, _] = self.controls(j);
        let z = T::zero();
        Some(vec![
            JetGradient {
                q: DVector::from_vec(vec![-f1]),
                qd: DVector::from_vec(vec![j2 * x1 * c]),
                qdd: DVector::from_vec(vec![z]),
                xi: Covector::new(GroupKind::Se2, [c * ((a - m) * x3 + j2 * st.gd), z, c * (a - m) * x1]),
                xid: Covector::new(GroupKind::Se2, [-m * s, m * c, z]),
            },
            JetGradient {
                q: DVector::from_vec(vec![z]),
                qd: DVector::from_vec(vec![j2 * x1]),
                qdd: DVector::from_vec(vec![j2 / p]),
                xi: Covector::new(
                    GroupKind::Se2,
                    [
                        (a - m) * x3 + j2 * st.gd - m * x2 / p,
                        -m * (x1 + x3) / p,
                        (a - m) * x1 - m * x2 / p,
                    ],
                ),
                xid: Covector::new(GroupKind::Se2, [z, m, a / p]),
            },
        ])
    }
}

/// Optimal control problem of the vehicle with the given boundary data.
pub fn se2_vehicle_problem<T: Real>(
    params: Se2VehicleParams<T>,
    boundary: BoundaryData<T>,
    n_steps: usize,
    h: T,
) -> Result<SecondOrderProblem<T>> {
    let model = Se2Vehicle::new(params)?;
    SecondOrderProblem::new(Arc::new(model), boundary, n_steps, h)
}
