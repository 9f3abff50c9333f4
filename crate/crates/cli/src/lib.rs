//! Command-line front end: TOML run configurations and the `solve`,
//! `convergence` and `oracle` commands.

pub mod commands;
pub mod config;

use std::path::PathBuf;

use clap::{Parser, Subcommand};
use geomvi::oracle::Tamper;

use commands::{cmd_convergence, cmd_oracle, cmd_solve, parse_block, CliError};
use config::{Overrides, RunConfig};

#[derive(Debug, Parser)]
#[command(name = "geomvi", version, about = "Variational integrators for Lagrange-Poincare optimal control on M x G")]
pub struct Cli {
    /// Solver tolerance on the residual infinity norm.
    #[arg(long, global = true, env = "GEOMVI_TOL")]
    pub tol: Option<f64>,
    #[arg(long, global = true, env = "GEOMVI_MAX_ITERS")]
    pub max_iters: Option<usize>,
    /// `cayley` or `expN` for the truncated exponential of order N.
    #[arg(long, global = true, env = "GEOMVI_RETRACTION")]
    pub retraction: Option<String>,
    #[arg(long, global = true, env = "GEOMVI_OUT_DIR")]
    pub out_dir: Option<PathBuf>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Solve the discrete optimal control problem of a configuration.
    Solve { config: PathBuf },
    /// Empirical convergence rate over a geometric sequence of step sizes.
    Convergence {
        config: PathBuf,
        #[arg(long, value_delimiter = ',', env = "GEOMVI_H_LIST")]
        h_list: Vec<f64>,
    },
    /// Compare the assembled residual with finite differences of the action.
    Oracle {
        config: PathBuf,
        #[arg(long, default_value_t = 42, env = "GEOMVI_SEED")]
        seed: u64,
        /// Number of steps, replacing `N` of the configuration.
        #[arg(long)]
        steps: Option<usize>,
        /// Test hook: negate one residual block before comparing.
        #[arg(long, hide = true)]
        flip_sign: Option<String>,
    },
}

fn load(path: &PathBuf, cli: &Cli, steps: Option<usize>) -> Result<RunConfig, CliError> {
    let mut cfg = RunConfig::load(path)?;
    cfg.apply(&Overrides {
        tol: cli.tol,
        max_iters: cli.max_iters,
        retraction: cli.retraction.clone(),
        out_dir: cli.out_dir.clone(),
        steps,
    })?;
    Ok(cfg)
}

fn execute(cli: &Cli) -> Result<i32, CliError> {
    match &cli.command {
        Command::Solve { config } => {
            let cfg = load(config, cli, None)?;
            let out = cmd_solve(&cfg)?;
            let d = &out.diagnostics;
            println!(
                "{}: {} after {} iterations, residual {:.3e}, constraint violation {:.3e}",
                d.model,
                if out.converged { "converged" } else { "not converged" },
                d.iterations,
                d.residual_inf,
                d.constraint_max_violation
            );
            println!("wrote {} and {}", out.trajectory.display(), out.diagnostics_path.display());
            Ok(if out.converged { 0 } else { 2 })
        }
        Command::Convergence { config, h_list } => {
            let cfg = load(config, cli, None)?;
            let out = cmd_convergence(&cfg, h_list)?;
            for r in &out.rows {
                println!("h = {:<10} N = {:<5} error = {:.6e}", r.h, r.n_steps, r.error);
            }
            println!("fitted slope {:.4} (reference h = {})", out.slope, out.reference_h);
            println!("wrote {}", out.table.display());
            Ok(0)
        }
        Command::Oracle { config, seed, steps, flip_sign } => {
            let cfg = load(config, cli, *steps)?;
            let tamper = match flip_sign {
                Some(b) => Tamper::FlipSign(parse_block(b)?),
                None => Tamper::None,
            };
            let out = cmd_oracle(&cfg, *seed, tamper)?;
            println!("{}", out.summary);
            Ok(if out.passed { 0 } else { 2 })
        }
    }
}

/// Runs a parsed command line and returns the process exit code: 0 on
/// success, 2 when the numerics fail (no convergence, oracle mismatch) and 1
/// for configuration or output errors.
pub fn run(cli: &Cli) -> i32 {
    match execute(cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}
