use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use rayon::prelude::*;
use selfdual::config::ProblemConfig;
use selfdual::problem::{check_hypotheses, HypothesisReport};
use selfdual::report::{self, CheckOutput, ProblemSummary, SolveReport, SweepOutcome, SweepRow};
use selfdual::solver::{solve_checked, SolveStatus};

/// Worker count for `sweep`; unset means one per core.
const WORKERS_VAR: &str = "SELFDUAL_WORKERS";

const EXIT_CONFIG: u8 = 1;
const EXIT_HYPOTHESIS: u8 = 2;
const EXIT_STALL: u8 = 3;

#[derive(Parser)]
#[command(
    name = "selfdual",
    version,
    about = "Solve convex Hamiltonian systems by minimizing self-dual actions"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Check the hypotheses the solvability theorems need.
    Check { config: PathBuf },
    /// Minimize the action and write trajectory.csv, report.toml and residuals.csv.
    Solve {
        config: PathBuf,
        /// Output directory; overrides `[output] dir`.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Seed for the initial perturbation; overrides `[solver] seed`.
        #[arg(long)]
        seed: Option<u64>,
    },
    /// One solve per value of a parameter (lambda, eps, M or T), written to sweep.csv.
    Sweep {
        config: PathBuf,
        #[arg(long)]
        param: String,
        /// Comma-separated values.
        #[arg(long, allow_hyphen_values = true)]
        values: String,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

struct Failure {
    code: u8,
    message: String,
}

impl From<selfdual::Error> for Failure {
    fn from(e: selfdual::Error) -> Self {
        Failure {
            code: EXIT_CONFIG,
            message: e.to_string(),
        }
    }
}

fn config_fault(message: impl Into<String>) -> Failure {
    Failure {
        code: EXIT_CONFIG,
        message: message.into(),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            // clap would exit with 2, which is reserved for hypothesis failures
            return if e.use_stderr() {
                ExitCode::from(EXIT_CONFIG)
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    let run = match cli.command {
        Command::Check { config } => cmd_check(&config),
        Command::Solve { config, out, seed } => cmd_solve(&config, out, seed),
        Command::Sweep {
            config,
            param,
            values,
            out,
        } => cmd_sweep(&config, &param, &values, out),
    };
    match run {
        Ok(code) => ExitCode::from(code),
        Err(f) => {
            eprintln!("error: {}", f.message);
            ExitCode::from(f.code)
        }
    }
}

fn hypotheses(cfg: &ProblemConfig) -> Result<HypothesisReport, Failure> {
    let c = &cfg.conditions;
    Ok(check_hypotheses(
        &cfg.spec,
        c.samples,
        c.shell_radius,
        c.seed,
    )?)
}

fn cmd_check(path: &Path) -> Result<u8, Failure> {
    let cfg = ProblemConfig::from_file(path)?;
    let rep = hypotheses(&cfg)?;
    let out = CheckOutput {
        passed: rep.passed(),
        problem: ProblemSummary::new(&cfg.spec, cfg.params.m),
        report: rep,
    };
    print!("{}", report::to_toml(&out)?);
    for f in out.report.failures() {
        eprintln!("failed: {}: {}", f.name, f.detail);
    }
    Ok(if out.passed { 0 } else { EXIT_HYPOTHESIS })
}

fn cmd_solve(path: &Path, out: Option<PathBuf>, seed: Option<u64>) -> Result<u8, Failure> {
    let mut cfg = ProblemConfig::from_file(path)?;
    if let Some(s) = seed {
        cfg.params.seed = s;
    }
    let dir = out.unwrap_or_else(|| cfg.output.dir.clone());
    let rep = hypotheses(&cfg)?;
    for f in rep.failures() {
        eprintln!("warning: hypothesis failed: {}: {}", f.name, f.detail);
    }
    let res = solve_checked(&cfg.spec, &cfg.params, &rep)?;
    std::fs::create_dir_all(&dir).map_err(|e| config_fault(format!("{}: {e}", dir.display())))?;

    let mut traj = Vec::new();
    res.path.write_csv(&mut traj)?;
    write_atomic(&dir.join("trajectory.csv"), &traj)?;
    let text = SolveReport::new(&cfg.spec, cfg.params.seed, &res, Some(&rep)).to_toml()?;
    write_atomic(&dir.join("report.toml"), text.as_bytes())?;
    if cfg.output.residuals {
        let mut buf = Vec::new();
        report::write_residuals(&res.certificate, &mut buf)?;
        write_atomic(&dir.join("residuals.csv"), &buf)?;
    }

    let c = &res.certificate;
    println!(
        "{:?}: action {:.6e} (tol {:.3e}), max interval residual {:.6e}",
        res.status, c.action_value, res.tol_zero, c.max_interior_residual
    );
    for n in &res.notes {
        eprintln!("note: {n}");
    }
    Ok(match res.status {
        SolveStatus::Converged => 0,
        SolveStatus::HypothesisFailed => EXIT_HYPOTHESIS,
        SolveStatus::StalledAboveTol => EXIT_STALL,
    })
}

fn parse_values(list: &str) -> Result<Vec<f64>, Failure> {
    let values = list
        .split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(|s| {
            s.parse::<f64>()
                .map_err(|e| config_fault(format!("--values: {s:?}: {e}")))
        })
        .collect::<Result<Vec<_>, _>>()?;
    if values.is_empty() {
        return Err(config_fault("--values: empty value list"));
    }
    Ok(values)
}

fn pool() -> Result<rayon::ThreadPool, Failure> {
    let mut b = rayon::ThreadPoolBuilder::new();
    if let Ok(v) = std::env::var(WORKERS_VAR) {
        let n: usize = v.parse().ok().filter(|n| *n > 0).ok_or_else(|| {
            config_fault(format!("{WORKERS_VAR}={v:?} is not a positive integer"))
        })?;
        b = b.num_threads(n);
    }
    b.build().map_err(|e| config_fault(e.to_string()))
}

fn cmd_sweep(path: &Path, param: &str, values: &str, out: Option<PathBuf>) -> Result<u8, Failure> {
    let cfg = ProblemConfig::from_file(path)?;
    let values = parse_values(values)?;
    // validate every member before any solve starts
    let configs = values
        .iter()
        .map(|v| cfg.with_param(param, *v))
        .collect::<Result<Vec<_>, _>>()?;
    let dir = out.unwrap_or_else(|| cfg.output.dir.clone());
    let rows: Vec<SweepRow> = pool()?.install(|| {
        configs
            .par_iter()
            .zip(&values)
            .map(|(c, v)| SweepRow {
                value: *v,
                outcome: selfdual::solver::solve(&c.spec, &c.params)
                    .map(|r| SweepOutcome::from_result(&r))
                    .map_err(|e| e.to_string()),
            })
            .collect()
    });
    let mut buf = Vec::new();
    report::write_sweep(param, &rows, &mut buf)?;
    std::fs::create_dir_all(&dir).map_err(|e| config_fault(format!("{}: {e}", dir.display())))?;
    write_atomic(&dir.join("sweep.csv"), &buf)?;
    std::io::stdout()
        .write_all(&buf)
        .map_err(|e| config_fault(e.to_string()))?;
    Ok(0)
}

/// Whole-file write through a sibling temp file and a rename.
fn write_atomic(path: &Path, bytes: &[u8]) -> Result<(), Failure> {
    let fail = |e: std::io::Error| config_fault(format!("{}: {e}", path.display()));
    let dir = path.parent().unwrap_or(Path::new("."));
    let mut tmp = tempfile::NamedTempFile::new_in(dir).map_err(fail)?;
    tmp.write_all(bytes).map_err(fail)?;
    tmp.as_file().sync_all().map_err(fail)?;
    tmp.persist(path).map_err(|e| fail(e.error))?;
    Ok(())
}
