//! The `solve`, `convergence` and `oracle` commands.

use std::fs;
use std::path::{Path, PathBuf};

use geomvi::discrete::DiscretePath;
use geomvi::models::FreeRigidBody;
use geomvi::ocp::{DiscreteOcp, SecondOrderProblem};
use geomvi::oracle::{oracle_at_random_point, ResidualBlock, Tamper};
use geomvi::solver::{solve, SolveReport, SolverConfig};
use geomvi::study::{
    fit_slope, group_node_deviation, intervals_for, pairwise_slopes, remeshed, solve_refinement,
    trajectory_error,
};
use geomvi::GroupElement;
use nalgebra::DVector;
use serde::Serialize;

use crate::config::{Built, ConfigError, RunConfig};

/// Failure of a command, mapped onto the process exit code.
#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error("cannot write {path}: {message}")]
    Io { path: PathBuf, message: String },
    #[error("{0}")]
    Numerical(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            Self::Config(_) | Self::Io { .. } => 1,
            Self::Numerical(_) => 2,
        }
    }
}

fn numerical(e: geomvi::Error) -> CliError {
    CliError::Numerical(e.to_string())
}

fn write_file(path: &Path, bytes: &[u8]) -> Result<(), CliError> {
    let io = |e: std::io::Error| CliError::Io {
        path: path.to_path_buf(),
        message: e.to_string(),
    };
    if let Some(dir) = path.parent() {
        fs::create_dir_all(dir).map_err(io)?;
    }
    fs::write(path, bytes).map_err(io)
}

fn csv_bytes(header: &[String], rows: &[Vec<String>]) -> Vec<u8> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(header).expect("in-memory csv");
    for r in rows {
        w.write_record(r).expect("in-memory csv");
    }
    w.into_inner().expect("in-memory csv")
}

fn json_bytes<S: Serialize>(value: &S) -> Vec<u8> {
    let mut out = serde_json::to_vec_pretty(value).expect("serializable diagnostics");
    out.push(b'\n');
    out
}

#[derive(Debug, Clone, Serialize)]
pub struct CountsOut {
    pub q_unknowns: usize,
    pub xi_unknowns: usize,
    pub lambda_unknowns: usize,
    pub unknowns: usize,
    pub m_rows: usize,
    pub g_rows: usize,
    pub closure_rows: usize,
    pub constraint_rows: usize,
    pub equations: usize,
}

#[derive(Debug, Clone, Serialize)]
pub struct BlockNorms {
    pub configuration: f64,
    pub group: f64,
    pub closure: f64,
    pub constraint: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct IterationOut {
    pub iteration: usize,
    pub residual_inf: f64,
    pub residual_l2: f64,
    pub step_length: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct LevelOut {
    pub n_steps: usize,
    pub h: f64,
    pub iterations: usize,
    pub residual_inf: f64,
}

/// Contents of the diagnostics file.
#[derive(Debug, Clone, Serialize)]
pub struct Diagnostics {
    pub model: String,
    pub n_steps: usize,
    pub h: f64,
    pub retraction: String,
    pub trivialization: String,
    pub boundary_mode: String,
    pub counts: CountsOut,
    pub converged: bool,
    pub iterations: usize,
    pub residual_inf: f64,
    pub residual_l2: f64,
    pub residual_blocks: BlockNorms,
    pub constraint_max_violation: f64,
    /// Largest entry of `g_N - g(T)`.
    pub terminal_group_error: f64,
    /// Spatial momentum of every step.
    pub momentum: Vec<[f64; 3]>,
    /// Largest deviation of the momentum from its first value.
    pub momentum_drift: f64,
    pub history: Vec<IterationOut>,
    /// Coarser meshes solved first, if any.
    pub sequence: Vec<LevelOut>,
}

/// Result of `solve`.
pub struct SolveOutcome {
    pub converged: bool,
    pub diagnostics: Diagnostics,
    pub trajectory: PathBuf,
    pub diagnostics_path: PathBuf,
}

fn counts_out(ocp: &DiscreteOcp<f64>) -> Result<CountsOut, CliError> {
    let c = ocp.counts();
    if c.unknowns() != c.equations() {
        return Err(CliError::Numerical(format!(
            "assembled system is not square: {} unknowns, {} equations",
            c.unknowns(),
            c.equations()
        )));
    }
    Ok(CountsOut {
        q_unknowns: c.q_unknowns,
        xi_unknowns: c.xi_unknowns,
        lambda_unknowns: c.lambda_unknowns,
        unknowns: c.unknowns(),
        m_rows: c.m_rows,
        g_rows: c.g_rows,
        closure_rows: c.closure_rows,
        constraint_rows: c.constraint_rows,
        equations: c.equations(),
    })
}

fn inf(v: &[f64]) -> f64 {
    v.iter().fold(0.0, |a, x| a.max(x.abs()))
}

fn max_entry_diff(a: &GroupElement<f64>, b: &GroupElement<f64>) -> f64 {
    inf((a.matrix() - b.matrix()).as_slice())
}

fn block_norms(ocp: &DiscreteOcp<f64>, r: &DVector<f64>) -> BlockNorms {
    let l = ocp.layout();
    let r = r.as_slice();
    BlockNorms {
        configuration: inf(&r[..l.g_row_offset()]),
        group: inf(&r[l.g_row_offset()..l.closure_offset()]),
        closure: inf(&r[l.closure_offset()..l.constraint_offset()]),
        constraint: inf(&r[l.constraint_offset()..]),
    }
}

fn fmt(v: f64) -> String {
    format!("{v:?}")
}

/// Trajectory rows: one per node `k = 0..=N` with columns `t`, `q*`,
/// `xi*` (step `k`), `lambda*` (window `k`), `mu*` (momentum of step `k`)
/// and `g11..g33`; entries without a value on a row are left empty.
fn trajectory_csv(
    path: &DiscretePath<f64>,
    momenta: &[[f64; 3]],
    time: impl Fn(usize) -> f64,
) -> Vec<u8> {
    let n = path.q.first().map_or(0, |q| q.len());
    let m = path.lambda.first().map_or(0, |l| l.len());
    let mut header = vec!["t".to_string()];
    header.extend((1..=n).map(|i| format!("q{i}")));
    header.extend((1..=3).map(|i| format!("xi{i}")));
    header.extend((1..=m).map(|i| format!("lambda{i}")));
    header.extend((1..=3).map(|i| format!("mu{i}")));
    for r in 1..=3 {
        header.extend((1..=3).map(|c| format!("g{r}{c}")));
    }
    let blank = |count: usize| std::iter::repeat_n(String::new(), count);
    let rows: Vec<Vec<String>> = (0..path.g.len())
        .map(|k| {
            let mut row = vec![fmt(time(k))];
            match path.q.get(k) {
                Some(q) => row.extend(q.iter().map(|v| fmt(*v))),
                None => row.extend(blank(n)),
            }
            match path.xi.get(k) {
                Some(xi) => row.extend(xi.coords().iter().map(|v| fmt(*v))),
                None => row.extend(blank(3)),
            }
            match path.lambda.get(k) {
                Some(l) => row.extend(l.iter().map(|v| fmt(*v))),
                None => row.extend(blank(m)),
            }
            match momenta.get(k) {
                Some(mu) => row.extend(mu.iter().map(|v| fmt(*v))),
                None => row.extend(blank(3)),
            }
            let g = path.g[k].matrix();
            for r in 0..3 {
                row.extend((0..3).map(|c| fmt(g[(r, c)])));
            }
            row
        })
        .collect();
    csv_bytes(&header, &rows)
}

fn solve_rigid(
    cfg: &RunConfig,
    body: &FreeRigidBody<f64>,
    g0: GroupElement<f64>,
    g_t: GroupElement<f64>,
    n: usize,
    h: f64,
    solver: &SolverConfig<f64>,
) -> Result<(DiscreteOcp<f64>, SolveReport<f64>), CliError> {
    let ocp = cfg.rigid_ocp(body, g0, g_t, n, h)?;
    let x0 = ocp.initial_guess().map_err(numerical)?;
    let report = solve(&ocp, &x0, solver).map_err(numerical)?;
    Ok((ocp, report))
}

/// Solves the configured problem and writes the trajectory and diagnostics.
pub fn cmd_solve(cfg: &RunConfig) -> Result<SolveOutcome, CliError> {
    let solver = cfg.solver_config();
    let mut sequence = Vec::new();
    let (ocp, report, time): (DiscreteOcp<f64>, SolveReport<f64>, Box<dyn Fn(usize) -> f64>) = match cfg.build()? {
        Built::RigidBody { body, g0, g_t } => {
            let (ocp, report) = solve_rigid(cfg, &body, g0, g_t, cfg.n, cfg.h, &solver)?;
            let h = cfg.h;
            (ocp, report, Box::new(move |k| k as f64 * h))
        }
        Built::Ocp(problem) => {
            let ocp = problem.to_discrete().map_err(numerical)?;
            counts_out(&ocp)?;
            let report = if cfg.solver.sequence.is_empty() {
                let x0 = ocp.initial_guess().map_err(numerical)?;
                solve(&ocp, &x0, &solver).map_err(numerical)?
            } else {
                let levels = solve_refinement(&problem, &cfg.solver.sequence, &solver, &[]).map_err(numerical)?;
                let last = levels.last().expect("non-empty sequence");
                let x0 = problem.transfer_guess(&last.problem, &last.report.x).map_err(numerical)?;
                sequence = levels
                    .iter()
                    .map(|l| LevelOut {
                        n_steps: l.problem.n_steps,
                        h: l.problem.h,
                        iterations: l.report.iterations,
                        residual_inf: l.report.residual_inf,
                    })
                    .collect();
                solve(&ocp, &x0, &solver).map_err(numerical)?
            };
            (ocp, report, Box::new(move |k| problem.node_time(k)))
        }
    };
    let counts = counts_out(&ocp)?;
    let path = ocp.scatter(&report.x).map_err(numerical)?;
    let r = ocp.residual_of_path(&path).map_err(numerical)?;
    let momenta: Vec<[f64; 3]> = ocp
        .step_momenta(&path)
        .map_err(numerical)?
        .iter()
        .map(|m| [m.coords()[0], m.coords()[1], m.coords()[2]])
        .collect();
    let momentum_drift = momenta
        .iter()
        .map(|m| (0..3).fold(0.0f64, |a, i| a.max((m[i] - momenta[0][i]).abs())))
        .fold(0.0, f64::max);
    let diagnostics = Diagnostics {
        model: cfg.model.name().into(),
        n_steps: ocp.n_steps,
        h: ocp.h,
        retraction: cfg.retraction.clone(),
        trivialization: format!("{:?}", cfg.trivialization_kind()).to_lowercase(),
        boundary_mode: format!("{:?}", cfg.boundary_mode).to_lowercase(),
        counts,
        converged: report.converged,
        iterations: report.iterations,
        residual_inf: inf(r.as_slice()),
        residual_l2: r.norm(),
        residual_blocks: block_norms(&ocp, &r),
        constraint_max_violation: ocp.constraint_violation(&path),
        terminal_group_error: max_entry_diff(path.g.last().expect("nodes"), &ocp.g_target),
        momentum: momenta.clone(),
        momentum_drift,
        history: report
            .history
            .iter()
            .map(|h| IterationOut {
                iteration: h.iteration,
                residual_inf: h.residual_inf,
                residual_l2: h.residual_l2,
                step_length: h.step_length,
            })
            .collect(),
        sequence,
    };
    let trajectory = cfg.output_path(&cfg.output.trajectory);
    let diagnostics_path = cfg.output_path(&cfg.output.diagnostics);
    write_file(&trajectory, &trajectory_csv(&path, &momenta, time))?;
    write_file(&diagnostics_path, &json_bytes(&diagnostics))?;
    Ok(SolveOutcome {
        converged: report.converged,
        diagnostics,
        trajectory,
        diagnostics_path,
    })
}

/// One row of a convergence table.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ConvergenceRow {
    pub h: f64,
    pub n_steps: usize,
    pub error: f64,
}

pub struct ConvergenceOutcome {
    pub rows: Vec<ConvergenceRow>,
    pub reference_h: f64,
    pub slope: f64,
    pub table: PathBuf,
}

fn check_h_list(h_list: &[f64]) -> Result<Vec<f64>, CliError> {
    if h_list.len() < 3 {
        return Err(ConfigError::new("h_list", format!("need at least 3 step sizes, got {}", h_list.len())).into());
    }
    let mut hs = h_list.to_vec();
    if let Some(bad) = hs.iter().find(|h| !(**h > 0.0) || !h.is_finite()) {
        return Err(ConfigError::new("h_list", format!("step sizes must be positive, got {bad}")).into());
    }
    hs.sort_by(|a, b| b.total_cmp(a));
    let ratio = hs[0] / hs[1];
    if ratio <= 1.0 + 1e-12 || hs.windows(2).any(|w| ((w[0] / w[1]) / ratio - 1.0).abs() > 1e-9) {
        return Err(ConfigError::new("h_list", "step sizes must form a strictly decreasing geometric sequence").into());
    }
    Ok(hs)
}

/// Solves on every step size of `h_list` and on a refined reference, and
/// tabulates the trajectory errors with pairwise and least-squares slopes.
pub fn cmd_convergence(cfg: &RunConfig, h_list: &[f64]) -> Result<ConvergenceOutcome, CliError> {
    let list = if h_list.is_empty() { &cfg.convergence.h_list } else { h_list };
    let hs = check_h_list(list)?;
    let conv = &cfg.convergence;
    let refine = conv.reference_refinement;
    let solver = cfg.solver_config();
    let reference_h = hs[hs.len() - 1] / refine as f64;
    let mut rows = Vec::new();
    match cfg.build()? {
        Built::Ocp(problem) => {
            let mode = conv.boundary_mode.map_or(problem.boundary_mode, Into::into);
            let base: SecondOrderProblem<f64> = remeshed(&problem, intervals_for(&problem, cfg.h).map_err(as_h)?, mode);
            let mut intervals = Vec::new();
            for &h in &hs {
                intervals.push(intervals_for(&base, h).map_err(|e| at_h(h, e))?);
            }
            let finest = *intervals.last().expect("three step sizes");
            intervals.push(finest * refine);
            let mut tols = vec![solver.tol; hs.len()];
            tols.push(conv.reference_tol);
            let levels = solve_refinement(&base, &intervals, &solver, &tols).map_err(numerical)?;
            let (reference, studied) = levels.split_last().expect("reference level");
            for l in studied {
                let error = trajectory_error(
                    (&l.problem, &l.report.x),
                    (&reference.problem, &reference.report.x),
                    (conv.interior[0], conv.interior[1]),
                )
                .map_err(numerical)?;
                rows.push(ConvergenceRow {
                    h: l.problem.h,
                    n_steps: l.problem.n_steps,
                    error,
                });
            }
        }
        Built::RigidBody { body, g0, g_t } => {
            let horizon = cfg.n as f64 * cfg.h;
            let steps = |h: f64| -> Result<usize, CliError> {
                let r = horizon / h;
                if (r - r.round()).abs() > 1e-9 * r.round().max(1.0) {
                    return Err(ConfigError::new("h_list", format!("h = {h} does not divide the horizon {horizon}")).into());
                }
                Ok(r.round() as usize)
            };
            let run = |h: f64, tol: f64| -> Result<(usize, Vec<GroupElement<f64>>), CliError> {
                let n = steps(h)?;
                let s = SolverConfig { tol, ..solver };
                let (ocp, report) = solve_rigid(cfg, &body, g0, g_t, n, h, &s).map_err(|e| match e {
                    CliError::Numerical(m) => CliError::Numerical(format!("at h = {h}: {m}")),
                    other => other,
                })?;
                if !report.converged {
                    return Err(numerical(geomvi::Error::NoConvergence {
                        h,
                        residual: report.residual_inf,
                        iterations: report.iterations,
                    }));
                }
                Ok((n, ocp.scatter(&report.x).map_err(numerical)?.g))
            };
            let (_, g_ref) = run(reference_h, conv.reference_tol)?;
            for &h in &hs {
                let (n, g) = run(h, solver.tol)?;
                let error = group_node_deviation(h, &g, reference_h, &g_ref).map_err(numerical)?;
                rows.push(ConvergenceRow { h, n_steps: n, error });
            }
        }
    }
    let h: Vec<f64> = rows.iter().map(|r| r.h).collect();
    let e: Vec<f64> = rows.iter().map(|r| r.error).collect();
    let slope = if e.iter().all(|v| *v > 0.0) { fit_slope(&h, &e).map_err(numerical)? } else { f64::NAN };
    let pairs = pairwise_slopes(&h, &e);
    let header: Vec<String> = ["h", "n_steps", "error", "pairwise_slope", "fitted_slope"]
        .iter()
        .map(|s| s.to_string())
        .collect();
    let table_rows: Vec<Vec<String>> = rows
        .iter()
        .enumerate()
        .map(|(i, r)| {
            vec![
                fmt(r.h),
                r.n_steps.to_string(),
                fmt(r.error),
                if i == 0 { String::new() } else { fmt(pairs[i - 1]) },
                fmt(slope),
            ]
        })
        .collect();
    let table = cfg.output_path(&cfg.output.convergence);
    write_file(&table, &csv_bytes(&header, &table_rows))?;
    Ok(ConvergenceOutcome {
        rows,
        reference_h,
        slope,
        table,
    })
}

fn as_h(e: geomvi::Error) -> CliError {
    ConfigError::new("h", e.to_string()).into()
}

fn at_h(h: f64, e: geomvi::Error) -> CliError {
    ConfigError::new("h_list", format!("at h = {h}: {e}")).into()
}

#[derive(Debug, Clone, Serialize)]
pub struct BlockOut {
    pub block: String,
    pub node: usize,
    pub component: usize,
    pub assembled: f64,
    pub finite_difference: f64,
    pub discrepancy: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct OracleOut {
    pub model: String,
    pub n_steps: usize,
    pub seed: u64,
    pub tolerance: f64,
    pub max_discrepancy: f64,
    pub passed: bool,
    pub worst_block: Option<String>,
    pub summary: String,
    pub blocks: Vec<BlockOut>,
}

/// Parses the block name of the sign-flip test hook.
pub fn parse_block(name: &str) -> Result<ResidualBlock, ConfigError> {
    match name {
        "configuration" | "M" | "m" => Ok(ResidualBlock::Configuration),
        "group" | "G" | "g" => Ok(ResidualBlock::Group),
        "constraint" | "Phi" | "phi" => Ok(ResidualBlock::Constraint),
        other => Err(ConfigError::new(
            "flip-sign",
            format!("unknown block `{other}` (expected configuration, group or constraint)"),
        )),
    }
}

/// Gradient-of-action oracle at a seeded random point of the configured
/// discrete system.
pub fn cmd_oracle(cfg: &RunConfig, seed: u64, tamper: Tamper) -> Result<OracleOut, CliError> {
    let ocp = cfg.discrete()?;
    counts_out(&ocp)?;
    let report = oracle_at_random_point(&ocp, seed, tamper).map_err(numerical)?;
    let out = OracleOut {
        model: cfg.model.name().into(),
        n_steps: ocp.n_steps,
        seed,
        tolerance: report.tolerance,
        max_discrepancy: report.max_discrepancy(),
        passed: report.passed(),
        worst_block: report.worst().map(|w| w.block.to_string()),
        summary: report.to_string(),
        blocks: report
            .blocks
            .iter()
            .map(|b| BlockOut {
                block: b.block.to_string(),
                node: b.node,
                component: b.component,
                assembled: b.assembled,
                finite_difference: b.finite_difference,
                discrepancy: b.discrepancy,
            })
            .collect(),
    };
    write_file(&cfg.output_path(&cfg.output.oracle), &json_bytes(&out))?;
    Ok(out)
}
