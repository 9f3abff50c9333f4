//! Homogeneous ball of radius `r` rolling without slipping on a plate that
//! spins with angular velocity `Omega(t)`, with the contact point `(x, y)`
//! fully actuated. `M = R^2`, `G = SO(3)`.

use std::sync::Arc;

use nalgebra::DVector;

use crate::discrete::Trivialization;
use crate::error::{Error, Result};
use crate::lie::{Covector, GroupKind};
use crate::ocp::{
    BoundaryData, ControlledSystem, Dynamics, Jet, JetGradient, ReducedLagrangianFn, SecondOrderModel,
    SecondOrderProblem,
};
use crate::scalar::Real;

/// `t -> Omega(t)`.
pub type ScalarFn<T> = Arc<dyn Fn(T) -> T + Send + Sync>;
/// `t -> (Omega'(t), Omega''(t))`.
pub type DerivativesFn<T> = Arc<dyn Fn(T) -> (T, T) + Send + Sync>;

/// Angular velocity of the plate.
#[derive(Clone)]
pub enum Omega<T: Real> {
    Constant(T),
    TimeDependent {
        value: ScalarFn<T>,
        derivatives: Option<DerivativesFn<T>>,
    },
}

impl<T: Real> std::fmt::Debug for Omega<T> {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Self::Constant(w) => write!(f, "Constant({w})"),
            Self::TimeDependent { derivatives, .. } => {
                write!(f, "TimeDependent {{ derivatives: {} }}", derivatives.is_some())
            }
        }
    }
}

impl<T: Real> Omega<T> {
    /// `Omega(t) = base + amplitude sin(frequency t)` with exact derivatives.
    pub fn sinusoid(base: T, amplitude: T, frequency: T) -> Self {
        Self::TimeDependent {
            value: Arc::new(move |t| base + amplitude * (frequency * t).sin()),
            derivatives: Some(Arc::new(move |t| {
                let (s, c) = (frequency * t).sin_cos();
                (amplitude * frequency * c, -amplitude * frequency * frequency * s)
            })),
        }
    }

    pub fn value(&self, t: T) -> T {
        match self {
            Self::Constant(w) => *w,
            Self::TimeDependent { value, .. } => value(t),
        }
    }

    /// `(Omega', Omega'')`, when known.
    pub fn derivatives(&self, t: T) -> Option<(T, T)> {
        match self {
            Self::Constant(_) => Some((T::zero(), T::zero())),
            Self::TimeDependent { derivatives, .. } => derivatives.as_ref().map(|d| d(t)),
        }
    }
}

#[derive(Debug, Clone)]
pub struct BallPlateParams<T: Real> {
    pub r: T,
    /// Squared radius of gyration `k^2`.
    pub k2: T,
    pub omega: Omega<T>,
}

impl<T: Real> Default for BallPlateParams<T> {
    fn default() -> Self {
        Self {
            r: T::lit(0.1),
            k2: T::lit(0.004),
            omega: Omega::Constant(T::one()),
        }
    }
}

impl<T: Real> BallPlateParams<T> {
    pub fn validate(&self) -> Result<()> {
        for (name, v) in [("r", self.r), ("k2", self.k2)] {
            if !(v > T::zero()) || !v.is_finite() {
                return Err(Error::InvalidParameter {
                    name,
                    reason: format!("must be positive and finite, got {v}"),
                });
            }
        }
        if let Omega::Constant(w) = self.omega {
            if !w.is_finite() {
                return Err(Error::InvalidParameter {
                    name: "omega",
                    reason: "plate angular velocity is not finite".into(),
                });
            }
        }
        Ok(())
    }

    /// `c = k^2 / (r^2 + k^2)`.
    pub fn coupling(&self) -> T {
        self.k2 / (self.r * self.r + self.k2)
    }
}

#[derive(Debug, Clone)]
pub struct BallPlate<T: Real> {
    pub params: BallPlateParams<T>,
}

impl<T: Real> BallPlate<T> {
    pub fn new(params: BallPlateParams<T>) -> Result<Self> {
        params.validate()?;
        Ok(Self { params })
    }

    /// Controls `u1 = x'' + c Omega y'`, `u2 = y'' - c Omega x'`.
    pub fn controls(&self, j: &Jet<T>) -> [T; 2] {
        let cw = self.params.coupling() * self.params.omega.value(j.t);
        [j.qdd[0] + cw * j.qd[1], j.qdd[1] - cw * j.qd[0]]
    }

    /// The ball as a controlled system: rows `(Phi1, Phi2, omega3', u1, u2)`
    /// with the last two actuated.
    pub fn controlled_system(&self) -> ControlledSystem<T> {
        let me = self.clone();
        let unit = |i: usize| DVector::from_fn(5, |r, _| if r == i { T::one() } else { T::zero() });
        ControlledSystem {
            config_dim: 2,
            kind: GroupKind::So3,
            dynamics: Dynamics::Explicit(Arc::new(move |j: &Jet<T>, out: &mut [T]| {
                let mut phi = [T::zero(); 3];
                me.phi(j, &mut phi);
                let u = me.controls(j);
                out[..3].copy_from_slice(&phi);
                out[3] = u[0];
                out[4] = u[1];
            })),
            actuated: Arc::new(move |_| vec![unit(3), unit(4)]),
            unactuated: Arc::new(move |_| vec![unit(0), unit(1), unit(2)]),
            cost: Arc::new(|_j: &Jet<T>, u: &[T]| T::lit(0.5) * (u[0] * u[0] + u[1] * u[1])),
            samples: vec![DVector::zeros(2)],
        }
    }

    /// Same system with the actuated rows generated from the magnetic
    /// Lagrangian `(x'^2 + y'^2)/2 - (c Omega / 2)(x y' - y x')` and the
    /// rolling rows supplied as extra terms.
    pub fn lagrangian_system(&self) -> ControlledSystem<T> {
        let c = self.params.coupling();
        let omega = self.params.omega.clone();
        let ell: ReducedLagrangianFn<T> = Arc::new(move |t, q: &DVector<T>, qd: &DVector<T>, _xi| {
            let half = T::lit(0.5);
            half * (qd[0] * qd[0] + qd[1] * qd[1]) - half * c * omega.value(t) * (q[0] * qd[1] - q[1] * qd[0])
        });
        let me = self.clone();
        let mut sys = self.controlled_system();
        sys.dynamics = Dynamics::Lagrangian {
            ell,
            extra: Some(Arc::new(move |j: &Jet<T>, out: &mut [T]| {
                let mut phi = [T::zero(); 3];
                me.phi(j, &mut phi);
                out[..3].copy_from_slice(&phi);
                out[3] = T::zero();
                out[4] = T::zero();
            })),
        };
        sys
    }
}

impl<T: Real> SecondOrderModel<T> for BallPlate<T> {
    fn config_dim(&self) -> usize {
        2
    }

    fn kind(&self) -> GroupKind {
        GroupKind::So3
    }

    fn constraint_count(&self) -> usize {
        3
    }

    fn ltilde(&self, j: &Jet<T>) -> T {
        let [u1, u2] = self.controls(j);
        T::lit(0.5) * (u1 * u1 + u2 * u2)
    }

    fn phi(&self, j: &Jet<T>, out: &mut [T]) {
        let r = self.params.r;
        let w = self.params.omega.value(j.t);
        let om = j.xi.coords();
        out[0] = om[0] + j.qd[1] / r - w * j.q[0] / r;
        out[1] = om[1] - j.qd[0] / r - w * j.q[1] / r;
        out[2] = j.xid.coords()[2];
    }

    fn ltilde_gradient(&self, j: &Jet<T>) -> Option<JetGradient<T>> {
        let cw = self.params.coupling() * self.params.omega.value(j.t);
        let [u1, u2] = self.controls(j);
        let mut g = JetGradient::zeros(GroupKind::So3, 2);
        g.qdd = DVector::from_vec(vec![u1, u2]);
        g.qd = DVector::from_vec(vec![-u2 * cw, u1 * cw]);
        Some(g)
    }

    fn phi_gradient(&self, j: &Jet<T>) -> Option<Vec<JetGradient<T>>> {
        let r = self.params.r;
        let w = self.params.omega.value(j.t);
        let z = T::zero();
        let one = T::one();
        let mut g1 = JetGradient::zeros(GroupKind::So3, 2);
        g1.q = DVector::from_vec(vec![-w / r, z]);
        g1.qd = DVector::from_vec(vec![z, one / r]);
        g1.xi = Covector::new(GroupKind::So3, [one, z, z]);
        let mut g2 = JetGradient::zeros(GroupKind::So3, 2);
        g2.q = DVector::from_vec(vec![z, -w / r]);
        g2.qd = DVector::from_vec(vec![-one / r, z]);
        g2.xi = Covector::new(GroupKind::So3, [z, one, z]);
        let mut g3 = JetGradient::zeros(GroupKind::So3, 2);
        g3.xid = Covector::new(GroupKind::So3, [z, z, one]);
        Some(vec![g1, g2, g3])
    }
}

/// Continuous state for the reference equations: derivatives `0..=4` of
/// `x` and `y`, the body angular velocity and its rate.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BallState<T: Real> {
    pub t: T,
    pub x: [T; 5],
    pub y: [T; 5],
    pub omega: [T; 3],
    pub omega_dot: [T; 3],
}

/// Which block of reference equations to evaluate.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OmegaBlock {
    /// `Omega' = Omega'' = 0`.
    Constant,
    /// Includes the `Omega'`, `Omega''` terms.
    TimeDependent,
}

/// Residual of the continuous optimality system of the ball, rows
///
/// ```text
/// 0: x'''' + c W'' y' + 3 c W' y'' + 2 c W y''' - 2 c^2 W W' x' - c^2 W^2 x'' + l2'/r - l1 W/r
/// 1: y'''' - c W'' x' - 3 c W' x'' - 2 c W x''' - 2 c^2 W W' y' - c^2 W^2 y'' - l1'/r - l2 W/r
/// 2: l1' + l2 w3 - m3 w2
/// 3: l2' - l1 w3 + m3 w1
/// 4: m3' + l1 w2 - l2 w1
/// 5: w1 + y'/r - W x/r
/// 6: w2 - x'/r - W y/r
/// 7: w3'
/// ```
///
/// with `W = Omega(t)`, `c = k^2/(r^2 + k^2)`, multipliers `(l1, l2)` of the
/// rolling constraints and `m3 = -l3'` for the multiplier `l3` of `w3' = 0`.
/// The group rows are those of the right-trivialized reduction; the
/// multipliers are passed as `lambda = (l1, l2, m3)`.
pub fn ball_continuous_residual<T: Real>(
    s: &BallState<T>,
    lambda: [T; 3],
    lambda_dot: [T; 3],
    params: &BallPlateParams<T>,
    block: OmegaBlock,
) -> Result<[T; 8]> {
    let r = params.r;
    let c = params.coupling();
    let w = params.omega.value(s.t);
    let (w1d, w2d) = match block {
        OmegaBlock::Constant => (T::zero(), T::zero()),
        OmegaBlock::TimeDependent => params.omega.derivatives(s.t).ok_or_else(|| Error::InvalidParameter {
            name: "omega",
            reason: "the time-dependent block needs Omega' and Omega''".into(),
        })?,
    };
    let two = T::lit(2.0);
    let three = T::lit(3.0);
    let [x, xd, xdd, xddd, x4] = s.x;
    let [y, yd, ydd, yddd, y4] = s.y;
    let [l1, l2, m3] = lambda;
    let [l1d, l2d, m3d] = lambda_dot;
    let [o1, o2, o3] = s.omega;
    Ok([
        x4 + c * w2d * yd + three * c * w1d * ydd + two * c * w * yddd
            - two * c * c * w * w1d * xd
            - c * c * w * w * xdd
            + l2d / r
            - l1 * w / r,
        y4 - c * w2d * xd - three * c * w1d * xdd - two * c * w * xddd
            - two * c * c * w * w1d * yd
            - c * c * w * w * ydd
            - l1d / r
            - l2 * w / r,
        l1d + l2 * o3 - m3 * o2,
        l2d - l1 * o3 + m3 * o1,
        m3d + l1 * o2 - l2 * o1,
        o1 + yd / r - w * x / r,
        o2 - xd / r - w * y / r,
        s.omega_dot[2],
    ])
}

/// Optimal control problem of the ball with the given boundary data, right
/// trivialized so that the multipliers carry the signs of the reference
/// equations.
/// Largest entry of [`ball_continuous_residual`] over `samples` equally
/// spaced times in `[a T, b T]`, evaluated on the discrete solution `x` of
/// `problem`.
///
/// Derivatives of `q` come from 7-point local polynomials through the
/// midpoint averages of the configuration nodes, `omega` from the increments placed at step midpoints,
/// and the multipliers from `(lambda^w + lambda^{w+1}) / (2 h)` placed between
/// window centres, with `m3 = -l3'`.
pub fn ball_limit_residual<T: Real>(
    problem: &SecondOrderProblem<T>,
    params: &BallPlateParams<T>,
    x: &DVector<T>,
    interior: (T, T),
    samples: usize,
) -> Result<T> {
    let rows = ball_limit_rows(problem, params, x, interior, samples)?;
    Ok(rows.iter().fold(T::zero(), |m, r| m.max(*r)))
}

/// Row-wise maxima behind [`ball_limit_residual`].
pub fn ball_limit_rows<T: Real>(
    problem: &SecondOrderProblem<T>,
    params: &BallPlateParams<T>,
    x: &DVector<T>,
    interior: (T, T),
    samples: usize,
) -> Result<[T; 8]> {
    use crate::interp::local_derivatives;
    let ocp = problem.to_discrete()?;
    let path = ocp.scatter(x)?;
    let h = problem.h;
    let half = T::lit(0.5);
    let q_t: Vec<T> = (1..path.q.len()).map(|k| problem.node_time(k) - h * half).collect();
    let q_s: Vec<Vec<T>> = path.q.windows(2).map(|p| ((&p[0] + &p[1]) * half).as_slice().to_vec()).collect();
    let q_v: Vec<&[T]> = q_s.iter().map(|v| v.as_slice()).collect();
    let xi_t: Vec<T> = (0..path.xi.len()).map(|k| problem.node_time(k) + h * half).collect();
    let xi_v: Vec<&[T]> = path.xi.iter().map(|v| v.coords().as_slice()).collect();
    // Adjacent nodes and windows are averaged to remove the period-two modes
    // of the discrete solution, which have no continuous counterpart and are
    // amplified by the fourth derivative.
    let lam_t: Vec<T> = (1..path.lambda.len()).map(|w| problem.node_time(w) + h * half).collect();
    let lam_s: Vec<Vec<T>> = path
        .lambda
        .windows(2)
        .map(|p| p[0].iter().zip(p[1].iter()).map(|(&a, &b)| (a + b) * half / h).collect())
        .collect();
    let lam_v: Vec<&[T]> = lam_s.iter().map(|v| v.as_slice()).collect();
    let block = match params.omega {
        Omega::Constant(_) => OmegaBlock::Constant,
        Omega::TimeDependent { .. } => OmegaBlock::TimeDependent,
    };
    let horizon = problem.horizon();
    let mut worst = [T::zero(); 8];
    for i in 0..samples.max(1) {
        let s = if samples > 1 { T::from_count(i) / T::from_count(samples - 1) } else { half };
        let t = horizon * (interior.0 + (interior.1 - interior.0) * s);
        let q = local_derivatives(&q_t, &q_v, t, 7, 4)?;
        let w = local_derivatives(&xi_t, &xi_v, t, 5, 1)?;
        let l = local_derivatives(&lam_t, &lam_v, t, 5, 2)?;
        let state = BallState {
            t,
            x: std::array::from_fn(|d| q[d][0]),
            y: std::array::from_fn(|d| q[d][1]),
            omega: [w[0][0], w[0][1], w[0][2]],
            omega_dot: [w[1][0], w[1][1], w[1][2]],
        };
        let res = ball_continuous_residual(
            &state,
            [l[0][0], l[0][1], -l[1][2]],
            [l[1][0], l[1][1], -l[2][2]],
            params,
            block,
        )?;
        for (w, r) in worst.iter_mut().zip(res) {
            *w = w.max(r.abs());
        }
    }
    Ok(worst)
}

pub fn ball_plate_problem<T: Real>(
    params: BallPlateParams<T>,
    boundary: BoundaryData<T>,
    n_steps: usize,
    h: T,
) -> Result<SecondOrderProblem<T>> {
    let model = BallPlate::new(params)?;
    Ok(SecondOrderProblem::new(Arc::new(model), boundary, n_steps, h)?
        .with_trivialization(Trivialization::Right))
}
