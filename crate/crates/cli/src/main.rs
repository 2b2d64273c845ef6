//! `sbdrift`: runs the drift-estimation experiments from a YAML config.
//!
//! Exit status: 0 on success, 1 on a usage or validation error, 2 when a
//! computation fails.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use sbdrift::experiments::{run_clt, run_edge, run_preflight, run_rate, run_stress};
use sbdrift::{Error, ExperimentConfig, RunArtifacts, RunOptions};

#[derive(Debug, Parser)]
#[command(name = "sbdrift", version, about = "Kernel drift estimation experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Truth tables, density checks and floor calibration.
    Preflight(Common),
    /// Error rates and oracle ratios of the adaptive selector.
    Rate(Common),
    /// Pointwise asymptotic normality diagnostics.
    Clt(Common),
    /// Error growth near the terminal time.
    Edge(Common),
    /// Compact against wide support.
    Stress(Common),
}

#[derive(Debug, Args)]
struct Common {
    /// YAML experiment config.
    #[arg(long, value_name = "PATH")]
    config: PathBuf,
    /// Output root; overrides `output` in the config.
    #[arg(long, value_name = "DIR")]
    out: Option<PathBuf>,
    /// Master seed; overrides `seed` in the config.
    #[arg(long, value_name = "N")]
    seed: Option<u64>,
    /// Worker threads; results do not depend on it.
    #[arg(long, value_name = "N")]
    threads: Option<usize>,
}

enum Failure {
    Usage(String),
    Runtime(String),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        if e.is_validation() {
            Failure::Usage(e.to_string())
        } else {
            Failure::Runtime(e.to_string())
        }
    }
}

fn load(common: &Common) -> Result<(ExperimentConfig, RunOptions), Failure> {
    let mut cfg = ExperimentConfig::load(&common.config).map_err(|e| match e {
        Error::Io { .. } => Failure::Usage(e.to_string()),
        other => other.into(),
    })?;
    if let Some(out) = &common.out {
        cfg.output = out.clone();
    }
    if let Some(seed) = common.seed {
        cfg.seed = seed;
    }
    cfg.validate()?;
    Ok((
        cfg,
        RunOptions {
            threads: common.threads,
        },
    ))
}

fn report(root: &Path, a: &RunArtifacts) {
    println!(
        "{}: {} raw, {} processed, {} figure files under {}",
        a.experiment,
        a.raw.len(),
        a.processed.len(),
        a.figures.len(),
        root.display()
    );
    println!("manifest: {}", a.manifest.display());
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map_or_else(|| "n/a".to_string(), |v| format!("{v:.4}"))
}

fn execute(cmd: &Command, cfg: &ExperimentConfig, opts: &RunOptions) -> Result<RunArtifacts, Error> {
    Ok(match cmd {
        Command::Preflight(_) => {
            let out = run_preflight(cfg, opts)?;
            for r in &out.reports {
                println!(
                    "{}: f(xi0) {:.6}, min f {:.6}, min D* {:.6e}, truth error {:.2e}, {}",
                    r.testbed,
                    r.f_xi0,
                    r.min_f_grid,
                    r.min_dstar,
                    r.truth_error,
                    if r.passed() { "ok" } else { "FAILED" }
                );
            }
            out.artifacts
        }
        Command::Rate(_) => {
            let out = run_rate(cfg, opts)?;
            for f in &out.fits {
                println!(
                    "{}: oracle slope {}, selected slope {}, theory {}, C_avg {:.3}, C_max {:.3}, boundary {:.3}",
                    f.testbed,
                    fmt_opt(f.slope_oracle),
                    fmt_opt(f.slope_selected),
                    fmt_opt(f.theory_secant),
                    f.c_avg,
                    f.c_max,
                    f.boundary_rate
                );
            }
            out.artifacts
        }
        Command::Clt(_) => {
            let out = run_clt(cfg, opts)?;
            for s in &out.summaries {
                println!(
                    "{} M={}: coverage {:.1}%, mean Z {:.3}, var Z {:.3}, AD {:.3}{}, {} not applicable",
                    s.testbed,
                    s.m,
                    s.coverage_pct,
                    s.mean_z,
                    s.var_z,
                    s.ad_stat,
                    if s.ad_reject { " (reject)" } else { "" },
                    s.not_applicable
                );
            }
            out.artifacts
        }
        Command::Edge(_) => {
            let out = run_edge(cfg, opts)?;
            for s in &out.summaries {
                println!(
                    "{}: rescaled flatter in {:.0}% of {} reps, raw error increasing in {:.0}%",
                    s.testbed,
                    100.0 * s.flatter_fraction,
                    s.reps,
                    100.0 * s.increase_fraction
                );
            }
            out.artifacts
        }
        Command::Stress(_) => {
            let out = run_stress(cfg, opts)?;
            for c in &out.comparisons {
                println!(
                    "{}: wide/compact error ratio {:.3}, Var W^N ratio {:.3}, Var W^D ratio {:.3}",
                    c.testbed, c.error_ratio, c.var_wn_ratio, c.var_wd_ratio
                );
            }
            out.artifacts
        }
    })
}

fn run(cmd: Command) -> Result<(), Failure> {
    let (Command::Preflight(common)
    | Command::Rate(common)
    | Command::Clt(common)
    | Command::Edge(common)
    | Command::Stress(common)) = &cmd;
    let (cfg, opts) = load(common)?;
    let artifacts = execute(&cmd, &cfg, &opts)?;
    report(&cfg.output, &artifacts);
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Usage(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(1)
        }
        Err(Failure::Runtime(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(2)
        }
    }
}
