//! Command-line front end: configuration ingestion, dispatch, artifact
//! emission.
//!
//! Exit codes: 0 success (converged and sandwich holds / all checks pass),
//! 2 configuration error, 3 nonconvergence or failed checks (partial
//! artifacts still written), 4 numeric failure.

use clap::{Parser, Subcommand};
use hess_core::problem::ProblemConfig;
use hess_core::report;
use hess_core::solver::{continuity_solve, SolverConfig};
use hess_core::symfun::ConeSpec;
use hess_core::verify;
use serde::Deserialize;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

#[derive(Parser)]
#[command(
    name = "hess",
    version,
    about = "Numerical solver for Hessian-type Dirichlet problems on Riemannian boxes"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Solve a configured problem; writes solution.csv and report.json.
    Solve {
        /// JSON run configuration (problem + solver + outputs).
        config: PathBuf,
        /// Output directory (overrides the configuration; default ".").
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run the cone and growth certification battery; writes checks.json.
    Verify {
        /// Eigenvalue dimension.
        #[arg(long)]
        n: usize,
        /// Symmetric-function order.
        #[arg(long)]
        k: usize,
        /// Cone sample count.
        #[arg(long, default_value_t = 100_000)]
        samples: usize,
        #[arg(long, default_value_t = 42)]
        seed: u64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Solve on nested grids and report sup-norm errors; writes errors.csv.
    Convergence {
        config: PathBuf,
        /// Number of refinement levels (each halves h).
        #[arg(long, default_value_t = 3)]
        levels: usize,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

/// Top-level run configuration: the problem, solver tunables, output flags.
#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RunConfig {
    problem: ProblemConfig,
    #[serde(default)]
    solver: SolverConfig,
    #[serde(default)]
    outputs: OutputConfig,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields, default)]
struct OutputConfig {
    /// Output directory; the --out flag takes precedence.
    dir: Option<PathBuf>,
    /// Also dump per-point eigenvalues and margins to fields.csv.
    fields: bool,
}

fn main() -> ExitCode {
    // Rust ships with SIGPIPE ignored, which turns a closed reader
    // (`hess solve … | head`) into a println! panic. Restore the default
    // disposition so the process exits quietly like other pipeline tools.
    #[cfg(unix)]
    unsafe {
        libc::signal(libc::SIGPIPE, libc::SIG_DFL);
    }
    let cli = Cli::parse();
    init_threads();
    let code = match cli.command {
        Command::Solve { config, out } => cmd_solve(&config, out.as_deref()),
        Command::Verify { n, k, samples, seed, out } => {
            cmd_verify(n, k, samples, seed, out.as_deref())
        }
        Command::Convergence { config, levels, out } => {
            cmd_convergence(&config, levels, out.as_deref())
        }
    };
    ExitCode::from(code)
}

/// HESS_THREADS caps the worker pool; unset means the rayon default.
fn init_threads() {
    if let Ok(v) = std::env::var("HESS_THREADS") {
        match v.parse::<usize>() {
            Ok(nt) if nt >= 1 => {
                let _ = rayon::ThreadPoolBuilder::new().num_threads(nt).build_global();
            }
            _ => eprintln!("warning: ignoring HESS_THREADS={v:?} (want a positive integer)"),
        }
    }
}

fn load_run_config(path: &Path) -> Result<RunConfig, String> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| format!("cannot read {}: {e}", path.display()))?;
    serde_json::from_str(&text).map_err(|e| format!("{}: {e}", path.display()))
}

fn resolve_out(cli: Option<&Path>, cfg: &OutputConfig) -> PathBuf {
    cli.map(Path::to_path_buf).or_else(|| cfg.dir.clone()).unwrap_or_else(|| PathBuf::from("."))
}

fn cmd_solve(config_path: &Path, out: Option<&Path>) -> u8 {
    let run_cfg = match load_run_config(config_path) {
        Ok(c) => c,
        Err(msg) => {
            eprintln!("config error: {msg}");
            return 2;
        }
    };
    let prob = match run_cfg.problem.build() {
        Ok(p) => p,
        Err(e) => {
            eprintln!("config error: {e}");
            return 2;
        }
    };
    if let Err(e) = run_cfg.solver.validate() {
        eprintln!("config error: {e}");
        return 2;
    }

    let out_dir = resolve_out(out, &run_cfg.outputs);
    if let Err(e) = std::fs::create_dir_all(&out_dir) {
        eprintln!("cannot create {}: {e}", out_dir.display());
        return 4;
    }

    let (u, rep) = match continuity_solve(&prob, &run_cfg.solver) {
        Ok(r) => r,
        Err(e) => {
            eprintln!("solve failed: {e}");
            return 4;
        }
    };

    let artifacts = (|| -> hess_core::Result<()> {
        report::write_solution_csv(&out_dir.join("solution.csv"), &prob.grid, &u)?;
        report::write_json(&out_dir.join("report.json"), &rep)?;
        if run_cfg.outputs.fields {
            report::write_fields_csv(&out_dir.join("fields.csv"), &prob, &u)?;
        }
        Ok(())
    })();
    if let Err(e) = artifacts {
        eprintln!("cannot write artifacts to {}: {e}", out_dir.display());
        return 4;
    }

    println!(
        "converged: {} (t = {:.4}, residual = {:.3e}, newton iterations = {})",
        rep.converged, rep.t_reached, rep.residual_inf, rep.newton_iters_total
    );
    println!(
        "min cone margin: {:.3e} | sandwich: {} | subsolution slack ok: {}",
        rep.min_cone_margin, rep.sandwich_ok, rep.subsolution.ok
    );
    if !rep.subsolution.ok {
        println!(
            "warning: subsolution slack violated (min slack {:.3e} at {:?})",
            rep.subsolution.min_slack, rep.subsolution.worst_point
        );
    }
    if let Some(err) = rep.l_inf_error {
        println!("sup-norm error vs declared exact solution: {err:.3e}");
    }
    if let Some(f) = &rep.failure {
        println!("failure: {f}");
    }
    println!("wall time: {:.2} s | artifacts in {}", rep.wall_time_s, out_dir.display());

    if rep.converged && rep.sandwich_ok {
        0
    } else {
        3
    }
}

fn cmd_verify(n: usize, k: usize, samples: usize, seed: u64, out: Option<&Path>) -> u8 {
    let cone = match ConeSpec::new(n, k) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("config error: {e}");
            return 2;
        }
    };
    if samples == 0 {
        eprintln!("config error: samples must be at least 1");
        return 2;
    }
    let reports = match verify::run_all(&cone, samples, seed) {
        Ok(r) => r,
        Err(e) => {
            eprintln!("verification failed: {e}");
            return 4;
        }
    };
    let out_dir = out.map(Path::to_path_buf).unwrap_or_else(|| PathBuf::from("."));
    if let Err(e) = std::fs::create_dir_all(&out_dir) {
        eprintln!("cannot create {}: {e}", out_dir.display());
        return 4;
    }
    if let Err(e) = report::write_json(&out_dir.join("checks.json"), &reports) {
        eprintln!("cannot write checks.json: {e}");
        return 4;
    }
    for r in &reports {
        let verdict = if r.pass {
            "pass"
        } else if r.inconclusive {
            "inconclusive"
        } else {
            "FAIL"
        };
        println!(
            "{:<32} {:<12} samples = {:>7}, min = {:+.6e}, max = {:+.6e}",
            r.name, verdict, r.samples_used, r.min_observed, r.max_observed
        );
    }
    if reports.iter().all(|r| r.pass && !r.inconclusive) {
        0
    } else {
        3
    }
}

fn cmd_convergence(config_path: &Path, levels: usize, out: Option<&Path>) -> u8 {
    let run_cfg = match load_run_config(config_path) {
        Ok(c) => c,
        Err(msg) => {
            eprintln!("config error: {msg}");
            return 2;
        }
    };
    if let Err(e) = run_cfg.solver.validate() {
        eprintln!("config error: {e}");
        return 2;
    }
    let rows = match report::convergence_study(&run_cfg.problem, levels, &run_cfg.solver) {
        Ok(r) => r,
        Err(hess_core::Error::Argument(msg)) => {
            eprintln!("config error: {msg}");
            return 2;
        }
        Err(e) => {
            eprintln!("refinement study failed: {e}");
            return 4;
        }
    };
    let out_dir = resolve_out(out, &run_cfg.outputs);
    if let Err(e) = std::fs::create_dir_all(&out_dir) {
        eprintln!("cannot create {}: {e}", out_dir.display());
        return 4;
    }
    if let Err(e) = report::write_errors_csv(&out_dir.join("errors.csv"), &rows) {
        eprintln!("cannot write errors.csv: {e}");
        return 4;
    }

    println!("{:<6} {:>6} {:>12} {:>14} {:>8}", "level", "m", "h", "error_inf", "order");
    for r in &rows {
        let order = r.order.map(|o| format!("{o:.3}")).unwrap_or_else(|| "-".to_string());
        println!("{:<6} {:>6} {:>12.6e} {:>14.6e} {:>8}", r.level, r.m, r.h, r.error_inf, order);
    }

    if rows.iter().all(|r| r.report.converged && r.report.sandwich_ok) {
        0
    } else {
        3
    }
}
