use serde::Serialize;

use super::config::ExperimentConfig;
use super::output::{ArtifactWriter, RunArtifacts};
use super::rng::{derive_stream, StreamLabel};
use super::{mean, median, par_reps, prepare, sample_variance, with_threads, Prepared, RunOptions};
use crate::bandwidth::{evaluate_path, gl_select, integrated_error, oracle_bandwidth, oracle_ratio};
use crate::error::{Error, Result};
use crate::estimator::{estimate_drift, weighted_summands};
use crate::models::{Testbed, Variant};

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StressRow {
    pub testbed: String,
    pub variant: String,
    pub rep: usize,
    pub h_hat: f64,
    pub h_or: f64,
    pub boundary_hit: bool,
    pub var_wn: f64,
    pub var_wd: f64,
    pub dhat: f64,
    pub err_hat: f64,
    pub ise_hat: f64,
    pub gamma: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StressSummaryRow {
    pub testbed: String,
    pub variant: String,
    pub reps: usize,
    pub mean_var_wn: f64,
    pub mean_var_wd: f64,
    /// A quarter of the median compact-variant `D_hat` of the same testbed.
    pub tau_d: f64,
    pub pr_dhat_le_tau: f64,
    pub median_err: f64,
    pub median_ise: f64,
    pub mean_gamma: f64,
    pub mean_h_hat: f64,
    pub boundary_rate: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StressComparison {
    pub testbed: String,
    /// Wide over compact median sup-grid error.
    pub error_ratio: f64,
    pub var_wn_ratio: f64,
    pub var_wd_ratio: f64,
}

#[derive(Debug, Clone)]
pub struct StressOutcome {
    pub artifacts: RunArtifacts,
    pub rows: Vec<StressRow>,
    pub summaries: Vec<StressSummaryRow>,
    pub comparisons: Vec<StressComparison>,
}

fn one_rep(config: &ExperimentConfig, p: &Prepared, variant: Variant, rep: usize) -> Result<StressRow> {
    let m = config.stress.m;
    let name = p.testbed.name();
    let experiment = format!("stress/{variant}");
    let label = StreamLabel {
        experiment: &experiment,
        testbed: name,
        m,
        rep,
    };
    let sample = p.law.sample_dataset(m, &mut derive_stream(config.seed, &label))?;
    let bw = config.bandwidth.grid(m, p.testbed.dim())?;
    let path = evaluate_path(
        &sample,
        &p.interval,
        p.query.t0,
        &p.query.xi0,
        &p.cache.grid,
        &bw,
        &p.floors,
    )?;
    let oracle = oracle_bandwidth(&path, &p.cache)?;
    let sel = gl_select(&path, m, config.bandwidth.kappa_pair, config.bandwidth.kappa_final)?;
    let h = sel.selected_h;
    let query = p.query.query();
    let (wn, wd) = weighted_summands(&sample, &p.interval, &query, h)?;
    let dhat = estimate_drift(&sample, &p.interval, &query, h, h, &p.floors)?.dhat;
    let err_hat = oracle.errors[sel.index];
    Ok(StressRow {
        testbed: name.to_string(),
        variant: variant.name().to_string(),
        rep,
        h_hat: h,
        h_or: oracle.h_or,
        boundary_hit: sel.boundary_hit,
        var_wn: sample_variance(&wn),
        var_wd: sample_variance(&wd),
        dhat,
        err_hat,
        ise_hat: integrated_error(&path.estimates[sel.index], &p.cache)?,
        gamma: oracle_ratio(err_hat, oracle.errors[oracle.index]).ok(),
    })
}

fn summarize(rows: &[StressRow], tau_d: f64) -> StressSummaryRow {
    let col = |f: &dyn Fn(&StressRow) -> f64| rows.iter().map(f).collect::<Vec<f64>>();
    let n = rows.len() as f64;
    StressSummaryRow {
        testbed: rows[0].testbed.clone(),
        variant: rows[0].variant.clone(),
        reps: rows.len(),
        mean_var_wn: mean(&col(&|r| r.var_wn)),
        mean_var_wd: mean(&col(&|r| r.var_wd)),
        tau_d,
        pr_dhat_le_tau: rows.iter().filter(|r| r.dhat <= tau_d).count() as f64 / n,
        median_err: median(&col(&|r| r.err_hat)),
        median_ise: median(&col(&|r| r.ise_hat)),
        mean_gamma: mean(&rows.iter().filter_map(|r| r.gamma).collect::<Vec<_>>()),
        mean_h_hat: mean(&col(&|r| r.h_hat)),
        boundary_rate: rows.iter().filter(|r| r.boundary_hit).count() as f64 / n,
    }
}

/// Compact versus wide support at a fixed sample size.
pub fn run_stress(config: &ExperimentConfig, opts: &RunOptions) -> Result<StressOutcome> {
    config.validate()?;
    if let Some(tb) = config
        .testbeds
        .iter()
        .find(|t| !matches!(t, Testbed::GG1 | Testbed::MM1))
    {
        return Err(Error::Config(format!(
            "the stress study covers GG1 and MM1 only, got {tb}"
        )));
    }
    with_threads(opts, || {
        let mut writer = ArtifactWriter::new(&config.output, "stress")?;
        let (mut rows, mut summaries, mut comparisons) = (Vec::new(), Vec::new(), Vec::new());
        for &tb in &config.testbeds {
            let mut per_variant = Vec::new();
            for variant in [Variant::Compact, Variant::Wide] {
                let p = prepare(config, tb, variant)?;
                per_variant.push(par_reps(config.stress.reps, |r| one_rep(config, &p, variant, r))?);
            }
            let tau_d = 0.25 * median(&per_variant[0].iter().map(|r| r.dhat).collect::<Vec<_>>());
            let compact = summarize(&per_variant[0], tau_d);
            let wide = summarize(&per_variant[1], tau_d);
            comparisons.push(StressComparison {
                testbed: tb.name().into(),
                error_ratio: wide.median_err / compact.median_err,
                var_wn_ratio: wide.mean_var_wn / compact.mean_var_wn,
                var_wd_ratio: wide.mean_var_wd / compact.mean_var_wd,
            });
            summaries.push(compact);
            summaries.push(wide);
            rows.extend(per_variant.into_iter().flatten());
        }
        writer.raw_csv("stress", &rows)?;
        writer.processed_csv("stress_summary", &summaries)?;
        writer.processed_csv("stress_comparison", &comparisons)?;
        let artifacts = writer.finish(config)?;
        Ok(StressOutcome {
            artifacts,
            rows,
            summaries,
            comparisons,
        })
    })
}
