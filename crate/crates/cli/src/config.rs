//! Run configuration: a TOML file with nested tables.
//!
//! ```toml
//! model = "se2_vehicle"        # se2_vehicle | ball_plate | free_rigid_body | free_particle
//! N = 40
//! h = 0.05
//! retraction = "cayley"        # or "expK", the exponential truncated at order K
//! trivialization = "left"      # optional; the ball defaults to "right"
//! boundary_mode = "literal"    # literal | staggered
//!
//! [params]                     # model parameters, see below
//! [boundary]                   # q0, qd0, xi0, g0, qT, qdT, xiT, gT
//! [solver]                     # tol, max_iters, jacobian, rank_policy, merit, sequence
//! [output]                     # dir, trajectory, diagnostics, convergence, oracle
//! [convergence]                # h_list, reference_refinement, reference_tol, interior, boundary_mode
//! ```
//!
//! Group elements are 3x3 arrays of rows.

use std::path::{Path, PathBuf};

use geomvi::discrete::Trivialization;
use geomvi::models::{
    ball_plate_problem, free_particle_problem, rigid_body_bvp, se2_vehicle_problem, BallPlateParams,
    FreeRigidBody, Omega, Se2VehicleParams,
};
use geomvi::ocp::{BoundaryData, BoundaryMode, DiscreteOcp, SecondOrderProblem};
use geomvi::solver::{JacobianMode, MeritScaling, RankPolicy, SolverConfig};
use geomvi::{AlgebraVector, GroupElement, GroupKind, Retraction};
use nalgebra::{DVector, Matrix3};
use serde::Deserialize;

/// A configuration problem, reported with the offending field.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
#[error("config error in `{field}`: {message}")]
pub struct ConfigError {
    pub field: String,
    pub message: String,
}

impl ConfigError {
    pub fn new(field: impl Into<String>, message: impl Into<String>) -> Self {
        Self {
            field: field.into(),
            message: message.into(),
        }
    }
}

type Result<T> = std::result::Result<T, ConfigError>;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModelKind {
    Se2Vehicle,
    BallPlate,
    FreeRigidBody,
    FreeParticle,
}

impl ModelKind {
    pub fn name(self) -> &'static str {
        match self {
            Self::Se2Vehicle => "se2_vehicle",
            Self::BallPlate => "ball_plate",
            Self::FreeRigidBody => "free_rigid_body",
            Self::FreeParticle => "free_particle",
        }
    }

    fn config_dim(self) -> usize {
        match self {
            Self::Se2Vehicle => 1,
            Self::BallPlate | Self::FreeParticle => 2,
            Self::FreeRigidBody => 0,
        }
    }

    fn group(self) -> GroupKind {
        match self {
            Self::Se2Vehicle | Self::FreeParticle => GroupKind::Se2,
            Self::BallPlate | Self::FreeRigidBody => GroupKind::So3,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TrivKind {
    Left,
    Right,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModeKind {
    #[default]
    Literal,
    Staggered,
}

impl From<ModeKind> for BoundaryMode {
    fn from(m: ModeKind) -> Self {
        match m {
            ModeKind::Literal => BoundaryMode::Literal,
            ModeKind::Staggered => BoundaryMode::Staggered,
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub model: ModelKind,
    #[serde(rename = "N", alias = "n")]
    pub n: usize,
    pub h: f64,
    #[serde(default = "default_retraction")]
    pub retraction: String,
    #[serde(default)]
    pub trivialization: Option<TrivKind>,
    #[serde(default)]
    pub boundary_mode: ModeKind,
    #[serde(default)]
    pub params: toml::Table,
    #[serde(default)]
    pub boundary: BoundaryTable,
    #[serde(default)]
    pub solver: SolverTable,
    #[serde(default)]
    pub output: OutputTable,
    #[serde(default)]
    pub convergence: ConvergenceTable,
}

fn default_retraction() -> String {
    "cayley".into()
}

type Mat = [[f64; 3]; 3];

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BoundaryTable {
    pub q0: Option<Vec<f64>>,
    pub qd0: Option<Vec<f64>>,
    pub xi0: Option<[f64; 3]>,
    pub g0: Option<Mat>,
    #[serde(rename = "qT")]
    pub q_t: Option<Vec<f64>>,
    #[serde(rename = "qdT")]
    pub qd_t: Option<Vec<f64>>,
    #[serde(rename = "xiT")]
    pub xi_t: Option<[f64; 3]>,
    #[serde(rename = "gT")]
    pub g_t: Option<Mat>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum JacobianKind {
    ModelSupplied,
    FiniteDifference,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RankKind {
    Fail,
    MinimumNorm,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MeritKind {
    Plain,
    RowEquilibrated,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SolverTable {
    #[serde(default = "default_tol")]
    pub tol: f64,
    #[serde(default = "default_max_iters")]
    pub max_iters: usize,
    #[serde(default)]
    pub jacobian: Option<JacobianKind>,
    /// Defaults to `minimum_norm` for the ball, whose multiplier of the spin
    /// constraint is fixed only up to a constant, and `fail` otherwise.
    #[serde(default)]
    pub rank_policy: Option<RankKind>,
    #[serde(default)]
    pub merit: Option<MeritKind>,
    /// Coarser meshes (numbers of steps over the same horizon) solved first
    /// to warm-start the requested one.
    #[serde(default)]
    pub sequence: Vec<usize>,
}

fn default_tol() -> f64 {
    1e-10
}

fn default_max_iters() -> usize {
    200
}

impl Default for SolverTable {
    fn default() -> Self {
        Self {
            tol: default_tol(),
            max_iters: default_max_iters(),
            jacobian: None,
            rank_policy: None,
            merit: None,
            sequence: Vec::new(),
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OutputTable {
    pub dir: PathBuf,
    pub trajectory: String,
    pub diagnostics: String,
    pub convergence: String,
    pub oracle: String,
}

impl Default for OutputTable {
    fn default() -> Self {
        Self {
            dir: PathBuf::from("out"),
            trajectory: "trajectory.csv".into(),
            diagnostics: "diagnostics.json".into(),
            convergence: "convergence.csv".into(),
            oracle: "oracle.json".into(),
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ConvergenceTable {
    pub h_list: Vec<f64>,
    /// The reference solution uses the finest step divided by this factor.
    pub reference_refinement: usize,
    /// Solver tolerance of the reference solve.
    pub reference_tol: f64,
    /// Fraction of the horizon over which errors are measured.
    pub interior: [f64; 2],
    /// Boundary placement for the study, defaulting to the run's.
    pub boundary_mode: Option<ModeKind>,
}

impl Default for ConvergenceTable {
    fn default() -> Self {
        Self {
            h_list: Vec::new(),
            reference_refinement: 2,
            reference_tol: 1e-8,
            interior: [0.0, 1.0],
            boundary_mode: None,
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
struct Se2Params {
    #[serde(default = "one")]
    m: f64,
    #[serde(rename = "J1", alias = "j1", default = "one")]
    j1: f64,
    #[serde(rename = "J2", alias = "j2", default = "half")]
    j2: f64,
    #[serde(default = "tenth")]
    p: f64,
    #[serde(default = "one")]
    rho1: f64,
    #[serde(default = "one")]
    rho2: f64,
}

fn one() -> f64 {
    1.0
}

fn half() -> f64 {
    0.5
}

fn tenth() -> f64 {
    0.1
}

#[derive(Debug, Clone, Deserialize)]
#[serde(untagged)]
enum OmegaSpec {
    Constant(f64),
    Sinusoid { base: f64, amplitude: f64, frequency: f64 },
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
struct BallParams {
    #[serde(default = "tenth")]
    r: f64,
    #[serde(default = "default_k2")]
    k2: f64,
    #[serde(default = "default_omega")]
    omega: OmegaSpec,
}

fn default_k2() -> f64 {
    0.004
}

fn default_omega() -> OmegaSpec {
    OmegaSpec::Constant(1.0)
}

#[derive(Debug, Clone, Deserialize)]
#[serde(untagged)]
enum InertiaSpec {
    Principal([f64; 3]),
    Full(Mat),
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
struct RigidParams {
    inertia: InertiaSpec,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
struct NoParams {}

/// A configured problem ready to discretize.
pub enum Built {
    /// A second-order optimal control problem on `M x G`.
    Ocp(SecondOrderProblem<f64>),
    /// The free rigid body as a two-point boundary value problem.
    RigidBody { body: FreeRigidBody<f64>, g0: GroupElement<f64>, g_t: GroupElement<f64> },
}

/// Flag and environment overrides applied on top of the file.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub tol: Option<f64>,
    pub max_iters: Option<usize>,
    pub retraction: Option<String>,
    pub out_dir: Option<PathBuf>,
    /// Replaces `N`.
    pub steps: Option<usize>,
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| ConfigError::new(path.display().to_string(), format!("cannot read: {e}")))?;
        Self::parse(&text)
    }

    pub fn parse(text: &str) -> Result<Self> {
        let cfg: RunConfig = toml::from_str(text).map_err(|e| {
            let message = e.message().to_string();
            ConfigError::new(field_of(&message).unwrap_or_else(|| "<root>".into()), message)
        })?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn apply(&mut self, o: &Overrides) -> Result<()> {
        if let Some(t) = o.tol {
            self.solver.tol = t;
        }
        if let Some(m) = o.max_iters {
            self.solver.max_iters = m;
        }
        if let Some(r) = &o.retraction {
            self.retraction = r.clone();
        }
        if let Some(d) = &o.out_dir {
            self.output.dir = d.clone();
        }
        if let Some(n) = o.steps {
            self.n = n;
        }
        self.validate()
    }

    fn validate(&self) -> Result<()> {
        if !(self.h > 0.0) || !self.h.is_finite() {
            return Err(ConfigError::new("h", format!("step size must be positive and finite, got {}", self.h)));
        }
        let min_n = if self.model == ModelKind::FreeRigidBody { 2 } else { 6 };
        if self.n < min_n {
            return Err(ConfigError::new(
                "N",
                format!("{} needs N >= {min_n}, got {}", self.model.name(), self.n),
            ));
        }
        self.retraction_kind()?;
        if !(self.solver.tol > 0.0) {
            return Err(ConfigError::new("solver.tol", format!("must be positive, got {}", self.solver.tol)));
        }
        if self.solver.max_iters == 0 {
            return Err(ConfigError::new("solver.max_iters", "must be at least 1"));
        }
        if self.model == ModelKind::FreeRigidBody && !self.solver.sequence.is_empty() {
            return Err(ConfigError::new("solver.sequence", "mesh sequencing applies to the second-order models only"));
        }
        let c = &self.convergence;
        if c.reference_refinement < 1 {
            return Err(ConfigError::new("convergence.reference_refinement", "must be at least 1"));
        }
        if !(c.reference_tol > 0.0) {
            return Err(ConfigError::new("convergence.reference_tol", "must be positive"));
        }
        if !(0.0 <= c.interior[0] && c.interior[0] < c.interior[1] && c.interior[1] <= 1.0) {
            return Err(ConfigError::new("convergence.interior", "expected 0 <= a < b <= 1"));
        }
        Ok(())
    }

    pub fn retraction_kind(&self) -> Result<Retraction> {
        self.retraction
            .parse()
            .map_err(|e: geomvi::Error| ConfigError::new("retraction", e.to_string()))
    }

    pub fn trivialization_kind(&self) -> Trivialization {
        match (self.trivialization, self.model) {
            (Some(TrivKind::Left), _) => Trivialization::Left,
            (Some(TrivKind::Right), _) => Trivialization::Right,
            (None, ModelKind::BallPlate) => Trivialization::Right,
            (None, _) => Trivialization::Left,
        }
    }

    pub fn solver_config(&self) -> SolverConfig<f64> {
        let s = &self.solver;
        SolverConfig {
            tol: s.tol,
            max_iters: s.max_iters,
            jacobian_mode: match s.jacobian {
                Some(JacobianKind::FiniteDifference) => JacobianMode::FiniteDifference,
                _ => JacobianMode::ModelSupplied,
            },
            rank_policy: match (s.rank_policy, self.model) {
                (Some(RankKind::MinimumNorm), _) | (None, ModelKind::BallPlate) => RankPolicy::MinimumNorm,
                _ => RankPolicy::Fail,
            },
            merit: match s.merit {
                Some(MeritKind::RowEquilibrated) => MeritScaling::RowEquilibrated,
                _ => MeritScaling::Plain,
            },
            ..SolverConfig::default()
        }
    }

    /// Trajectory, diagnostics, convergence and oracle output paths.
    pub fn output_path(&self, name: &str) -> PathBuf {
        self.output.dir.join(name)
    }

    pub fn build(&self) -> Result<Built> {
        let kind = self.model.group();
        let b = &self.boundary;
        let g0 = group_field("boundary.g0", kind, b.g0)?;
        let g_t = group_field("boundary.gT", kind, b.g_t)?;
        if self.model == ModelKind::FreeRigidBody {
            let p: RigidParams = params(&self.params)?;
            let inertia = match p.inertia {
                InertiaSpec::Principal(d) => Matrix3::from_diagonal(&d.into()),
                InertiaSpec::Full(m) => matrix(m),
            };
            let body = FreeRigidBody::new(inertia).map_err(|e| ConfigError::new("params.inertia", e.to_string()))?;
            return Ok(Built::RigidBody { body, g0, g_t });
        }
        let n = self.model.config_dim();
        let boundary = BoundaryData {
            q0: vector_field("boundary.q0", n, b.q0.as_deref(), false)?,
            qd0: vector_field("boundary.qd0", n, b.qd0.as_deref(), true)?,
            xi0: algebra_field("boundary.xi0", kind, b.xi0)?,
            g0,
            q_t: vector_field("boundary.qT", n, b.q_t.as_deref(), false)?,
            qd_t: vector_field("boundary.qdT", n, b.qd_t.as_deref(), true)?,
            xi_t: algebra_field("boundary.xiT", kind, b.xi_t)?,
            g_t,
        };
        let problem = match self.model {
            ModelKind::Se2Vehicle => {
                let p: Se2Params = params(&self.params)?;
                let params = Se2VehicleParams {
                    m: p.m,
                    j1: p.j1,
                    j2: p.j2,
                    p: p.p,
                    rho1: p.rho1,
                    rho2: p.rho2,
                };
                se2_vehicle_problem(params, boundary, self.n, self.h)
            }
            ModelKind::BallPlate => {
                let p: BallParams = params(&self.params)?;
                let omega = match p.omega {
                    OmegaSpec::Constant(w) => Omega::Constant(w),
                    OmegaSpec::Sinusoid { base, amplitude, frequency } => Omega::sinusoid(base, amplitude, frequency),
                };
                ball_plate_problem(BallPlateParams { r: p.r, k2: p.k2, omega }, boundary, self.n, self.h)
            }
            ModelKind::FreeParticle => {
                let _: NoParams = params(&self.params)?;
                free_particle_problem(boundary, self.n, self.h)
            }
            ModelKind::FreeRigidBody => unreachable!(),
        }
        .map_err(core_field)?;
        Ok(Built::Ocp(
            problem
                .with_retraction(self.retraction_kind()?)
                .with_trivialization(self.trivialization_kind())
                .with_boundary_mode(self.boundary_mode.into()),
        ))
    }

    /// The discrete system of the configured problem.
    pub fn discrete(&self) -> Result<DiscreteOcp<f64>> {
        match self.build()? {
            Built::Ocp(p) => p.to_discrete().map_err(core_field),
            Built::RigidBody { body, g0, g_t } => self.rigid_ocp(&body, g0, g_t, self.n, self.h),
        }
    }

    pub fn rigid_ocp(
        &self,
        body: &FreeRigidBody<f64>,
        g0: GroupElement<f64>,
        g_t: GroupElement<f64>,
        n: usize,
        h: f64,
    ) -> Result<DiscreteOcp<f64>> {
        rigid_body_bvp(body.clone(), g0, g_t, n, h, self.retraction_kind()?, self.trivialization_kind())
            .map_err(core_field)
    }
}

/// Maps core parameter errors onto config fields.
fn core_field(e: geomvi::Error) -> ConfigError {
    match &e {
        geomvi::Error::InvalidParameter { name, .. } => {
            let field = match *name {
                "h" => "h".to_string(),
                "r" | "k2" | "omega" | "m" | "J1" | "J2" | "p" | "rho1" | "rho2" => format!("params.{name}"),
                other => format!("boundary ({other})"),
            };
            ConfigError::new(field, e.to_string())
        }
        geomvi::Error::Size(_) => ConfigError::new("N", e.to_string()),
        _ => ConfigError::new("<problem>", e.to_string()),
    }
}

/// First backquoted name in a deserializer message, e.g. "missing field `h`".
fn field_of(message: &str) -> Option<String> {
    let start = message.find('`')? + 1;
    let len = message[start..].find('`')?;
    Some(message[start..start + len].to_string())
}

fn params<P: for<'de> Deserialize<'de>>(table: &toml::Table) -> Result<P> {
    toml::Value::Table(table.clone()).try_into().map_err(|e: toml::de::Error| {
        let message = e.message().to_string();
        let field = field_of(&message).map_or_else(|| "params".to_string(), |f| format!("params.{f}"));
        ConfigError::new(field, message)
    })
}

fn matrix(m: Mat) -> Matrix3<f64> {
    Matrix3::from_fn(|r, c| m[r][c])
}

fn group_field(field: &str, kind: GroupKind, m: Option<Mat>) -> Result<GroupElement<f64>> {
    let m = m.ok_or_else(|| ConfigError::new(field, "missing group element (3x3 array of rows)"))?;
    GroupElement::from_matrix(kind, matrix(m)).map_err(|e| ConfigError::new(field, e.to_string()))
}

fn algebra_field(field: &str, kind: GroupKind, v: Option<[f64; 3]>) -> Result<AlgebraVector<f64>> {
    let v = v.ok_or_else(|| ConfigError::new(field, "missing algebra vector (3 entries)"))?;
    if v.iter().any(|x| !x.is_finite()) {
        return Err(ConfigError::new(field, "entries must be finite"));
    }
    Ok(AlgebraVector::new(kind, v))
}

fn vector_field(field: &str, n: usize, v: Option<&[f64]>, zero_default: bool) -> Result<DVector<f64>> {
    let v = match v {
        Some(v) => v,
        None if zero_default => return Ok(DVector::zeros(n)),
        None => return Err(ConfigError::new(field, format!("missing vector of {n} entries"))),
    };
    if v.len() != n {
        return Err(ConfigError::new(field, format!("expected {n} entries, got {}", v.len())));
    }
    if v.iter().any(|x| !x.is_finite()) {
        return Err(ConfigError::new(field, "entries must be finite"));
    }
    Ok(DVector::from_column_slice(v))
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = r#"
model = "free_particle"
N = 8
h = 0.1
[boundary]
q0 = [0.0, 0.0]
qT = [1.0, 0.0]
qd0 = [1.25, 0.0]
qdT = [1.25, 0.0]
xi0 = [0.0, 0.0, 0.0]
xiT = [0.0, 0.0, 0.0]
g0 = [[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]]
gT = [[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]]
"#;

    #[test]
    fn minimal_config_builds() {
        let cfg = RunConfig::parse(MINIMAL).unwrap();
        assert!(matches!(cfg.build().unwrap(), Built::Ocp(_)));
        assert_eq!(cfg.discrete().unwrap().n_steps, 8);
    }

    #[test]
    fn missing_h_is_named() {
        let text = MINIMAL.replace("h = 0.1\n", "");
        let e = RunConfig::parse(&text).unwrap_err();
        assert_eq!(e.field, "h");
    }

    #[test]
    fn field_errors_name_the_field() {
        let e = RunConfig::parse(&MINIMAL.replace("h = 0.1", "h = -0.1")).unwrap_err();
        assert_eq!(e.field, "h");
        let e = RunConfig::parse(&MINIMAL.replace("N = 8", "N = 4")).unwrap_err();
        assert_eq!(e.field, "N");
        let e = RunConfig::parse(&format!("retraction = \"bogus\"\n{MINIMAL}")).unwrap_err();
        assert_eq!(e.field, "retraction");
        let cfg = RunConfig::parse(&MINIMAL.replace("qT = [1.0, 0.0]", "qT = [1.0]")).unwrap();
        assert_eq!(cfg.build().err().unwrap().field, "boundary.qT");
        let cfg = RunConfig::parse(&MINIMAL.replace("gT = [[1.0, 0.0, 0.0]", "gT = [[2.0, 0.0, 0.0]")).unwrap();
        assert_eq!(cfg.build().err().unwrap().field, "boundary.gT");
        let cfg = RunConfig::parse(&format!("{MINIMAL}\n[params]\nmass = 2.0\n")).unwrap();
        assert_eq!(cfg.build().err().unwrap().field, "params.mass");
    }

    #[test]
    fn overrides_apply_and_revalidate() {
        let mut cfg = RunConfig::parse(MINIMAL).unwrap();
        let o = Overrides {
            tol: Some(1e-6),
            max_iters: Some(3),
            retraction: Some("exp3".into()),
            out_dir: Some("elsewhere".into()),
            steps: Some(7),
        };
        cfg.apply(&o).unwrap();
        assert_eq!(cfg.n, 7);
        assert_eq!(cfg.solver_config().tol, 1e-6);
        assert_eq!(cfg.solver_config().max_iters, 3);
        assert_eq!(cfg.retraction_kind().unwrap(), Retraction::trunc_exp(3).unwrap());
        assert_eq!(cfg.output_path("x"), PathBuf::from("elsewhere/x"));
        let bad = Overrides {
            tol: Some(0.0),
            ..Overrides::default()
        };
        assert_eq!(cfg.apply(&bad).unwrap_err().field, "solver.tol");
        let few = Overrides {
            steps: Some(3),
            ..Overrides::default()
        };
        let mut cfg = RunConfig::parse(MINIMAL).unwrap();
        assert_eq!(cfg.apply(&few).unwrap_err().field, "N");
    }

    #[test]
    fn ball_defaults_to_right_trivialization_and_minimum_norm() {
        let text = r#"
model = "ball_plate"
N = 10
h = 0.1
[params]
omega = { base = 1.0, amplitude = 0.2, frequency = 3.0 }
[boundary]
q0 = [0.0, 0.0]
qT = [0.2, 0.1]
xi0 = [0.0, 0.0, 0.0]
xiT = [2.0, 1.0, 0.0]
g0 = [[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]]
gT = [[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]]
"#;
        let cfg = RunConfig::parse(text).unwrap();
        assert_eq!(cfg.trivialization_kind(), Trivialization::Right);
        assert_eq!(cfg.solver_config().rank_policy, RankPolicy::MinimumNorm);
        assert!(cfg.build().is_ok());
    }
}
