use serde::Serialize;

use super::config::ExperimentConfig;
use super::output::{ArtifactWriter, LinePlot, RunArtifacts, Series};
use super::rng::{derive_stream, StreamLabel};
use super::{mean, median, par_reps, prepare, with_threads, Prepared, RunOptions};
use crate::bandwidth::{evaluate_path, gl_select, integrated_error, oracle_bandwidth, oracle_ratio};
use crate::error::Result;
use crate::inference::{ols_slope, theory_secant_slope};

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RateRepRow {
    pub testbed: String,
    #[serde(rename = "M")]
    pub m: usize,
    pub rep: usize,
    pub h_or: f64,
    pub h_hat: f64,
    pub err_or: f64,
    pub err_hat: f64,
    /// Empty when the oracle error vanishes.
    pub gamma: Option<f64>,
    pub boundary_hit: bool,
    pub ise_or: f64,
    pub ise_hat: f64,
    /// Grid points where the estimator at `h_hat` was floored.
    pub floored_points: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
struct PerBandwidthRow {
    testbed: String,
    #[serde(rename = "M")]
    m: usize,
    rep: usize,
    h: f64,
    err_sup: f64,
    err_ise: f64,
    b_value: f64,
    penalty: f64,
    floored_points: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RateSummaryRow {
    pub testbed: String,
    #[serde(rename = "M")]
    pub m: usize,
    pub reps: usize,
    pub mean_err_or: f64,
    pub mean_err_hat: f64,
    pub median_err_or: f64,
    pub mean_ise_or: f64,
    pub mean_gamma: f64,
    pub median_gamma: f64,
    pub max_gamma: f64,
    pub boundary_rate: f64,
    pub mean_h_or: f64,
    pub mean_h_hat: f64,
    pub floored_rate: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RateFit {
    pub testbed: String,
    pub dim: usize,
    pub points: usize,
    pub slope_oracle: Option<f64>,
    pub slope_selected: Option<f64>,
    pub theory_secant: Option<f64>,
    /// Mean over `M` of the average oracle ratio.
    pub c_avg: f64,
    /// Maximum over `M` of the average oracle ratio.
    pub c_max: f64,
    pub boundary_rate: f64,
    pub note: String,
}

#[derive(Debug, Clone)]
pub struct RateOutcome {
    pub artifacts: RunArtifacts,
    pub reps: Vec<RateRepRow>,
    pub summaries: Vec<RateSummaryRow>,
    pub fits: Vec<RateFit>,
}

struct RepResult {
    rep: RateRepRow,
    per_h: Vec<PerBandwidthRow>,
}

fn one_rep(config: &ExperimentConfig, p: &Prepared, m: usize, rep: usize) -> Result<RepResult> {
    let name = p.testbed.name();
    let label = StreamLabel {
        experiment: "rate",
        testbed: name,
        m,
        rep,
    };
    let sample = p.law.sample_dataset(m, &mut derive_stream(config.seed, &label))?;
    let bw = config.bandwidth.grid(m, p.testbed.dim())?;
    let grid = &p.cache.grid;
    let path = evaluate_path(&sample, &p.interval, p.query.t0, &p.query.xi0, grid, &bw, &p.floors)?;
    let oracle = oracle_bandwidth(&path, &p.cache)?;
    let sel = gl_select(&path, m, config.bandwidth.kappa_pair, config.bandwidth.kappa_final)?;
    let ise = path
        .estimates
        .iter()
        .map(|e| integrated_error(e, &p.cache))
        .collect::<Result<Vec<_>>>()?;
    let per_h = bw
        .values()
        .iter()
        .enumerate()
        .map(|(k, &h)| PerBandwidthRow {
            testbed: name.to_string(),
            m,
            rep,
            h,
            err_sup: oracle.errors[k],
            err_ise: ise[k],
            b_value: sel.b_values[k],
            penalty: sel.penalties[k],
            floored_points: path.floor_count(k),
        })
        .collect();
    let err_or = oracle.errors[oracle.index];
    let err_hat = oracle.errors[sel.index];
    Ok(RepResult {
        rep: RateRepRow {
            testbed: name.to_string(),
            m,
            rep,
            h_or: oracle.h_or,
            h_hat: sel.selected_h,
            err_or,
            err_hat,
            gamma: oracle_ratio(err_hat, err_or).ok(),
            boundary_hit: sel.boundary_hit,
            ise_or: ise[oracle.index],
            ise_hat: ise[sel.index],
            floored_points: path.floor_count(sel.index),
        },
        per_h,
    })
}

fn summarize(testbed: &str, m: usize, rows: &[RateRepRow]) -> RateSummaryRow {
    let col = |f: &dyn Fn(&RateRepRow) -> f64| rows.iter().map(f).collect::<Vec<f64>>();
    let gammas: Vec<f64> = rows.iter().filter_map(|r| r.gamma).collect();
    let n = rows.len() as f64;
    RateSummaryRow {
        testbed: testbed.to_string(),
        m,
        reps: rows.len(),
        mean_err_or: mean(&col(&|r| r.err_or)),
        mean_err_hat: mean(&col(&|r| r.err_hat)),
        median_err_or: median(&col(&|r| r.err_or)),
        mean_ise_or: mean(&col(&|r| r.ise_or)),
        mean_gamma: mean(&gammas),
        median_gamma: median(&gammas),
        max_gamma: gammas.iter().copied().fold(f64::NAN, f64::max),
        boundary_rate: rows.iter().filter(|r| r.boundary_hit).count() as f64 / n,
        mean_h_or: mean(&col(&|r| r.h_or)),
        mean_h_hat: mean(&col(&|r| r.h_hat)),
        floored_rate: rows.iter().filter(|r| r.floored_points > 0).count() as f64 / n,
    }
}

fn fit(testbed: &str, dim: usize, summaries: &[RateSummaryRow], reps: &[RateRepRow]) -> Result<RateFit> {
    let logm: Vec<f64> = summaries.iter().map(|s| (s.m as f64).ln()).collect();
    let slope = |f: &dyn Fn(&RateSummaryRow) -> f64| -> Result<Option<f64>> {
        if summaries.len() < 2 {
            return Ok(None);
        }
        let y: Vec<f64> = summaries.iter().map(|s| f(s).ln()).collect();
        ols_slope(&logm, &y).map(Some)
    };
    let gbar: Vec<f64> = summaries.iter().map(|s| s.mean_gamma).collect();
    let (first, last) = (summaries[0].m, summaries[summaries.len() - 1].m);
    Ok(RateFit {
        testbed: testbed.to_string(),
        dim,
        points: summaries.len(),
        slope_oracle: slope(&|s| s.mean_err_or)?,
        slope_selected: slope(&|s| s.mean_err_hat)?,
        theory_secant: (summaries.len() >= 2)
            .then(|| theory_secant_slope(first, last, dim))
            .transpose()?,
        c_avg: mean(&gbar),
        c_max: gbar.iter().copied().fold(f64::NAN, f64::max),
        boundary_rate: reps.iter().filter(|r| r.boundary_hit).count() as f64 / reps.len() as f64,
        note: if summaries.len() < 2 {
            "insufficient points for a slope".into()
        } else {
            String::new()
        },
    })
}

/// Rate and adaptivity study on the configured sample-size ladder.
pub fn run_rate(config: &ExperimentConfig, opts: &RunOptions) -> Result<RateOutcome> {
    config.validate()?;
    with_threads(opts, || {
        let mut writer = ArtifactWriter::new(&config.output, "rate")?;
        let sizes = config.rate.sizes();
        let (mut all_reps, mut all_h, mut summaries, mut fits) = (Vec::new(), Vec::new(), Vec::new(), Vec::new());
        let mut plot = LinePlot::new("Sup-grid error", "M", "mean error").log_log();
        let mut gamma_plot = LinePlot::new("Average oracle ratio", "M", "mean Gamma");
        gamma_plot.log_x = true;
        for &tb in &config.testbeds {
            let p = prepare(config, tb, config.variant)?;
            let reps = config.rate.reps_for(tb);
            let mut tb_reps = Vec::new();
            let mut tb_summaries = Vec::new();
            for &m in &sizes {
                let results = par_reps(reps, |r| one_rep(config, &p, m, r))?;
                let rows: Vec<RateRepRow> = results.iter().map(|r| r.rep.clone()).collect();
                tb_summaries.push(summarize(tb.name(), m, &rows));
                all_h.extend(results.into_iter().flat_map(|r| r.per_h));
                tb_reps.extend(rows);
            }
            let f = fit(tb.name(), tb.dim(), &tb_summaries, &tb_reps)?;
            let pts = |g: &dyn Fn(&RateSummaryRow) -> f64| tb_summaries.iter().map(|s| (s.m as f64, g(s))).collect();
            plot = plot
                .with(Series::new(format!("{tb} oracle"), pts(&|s| s.mean_err_or)))
                .with(Series::new(format!("{tb} selected"), pts(&|s| s.mean_err_hat)));
            if let Some(theory) = f.theory_secant {
                let anchor = &tb_summaries[0];
                let line = tb_summaries
                    .iter()
                    .map(|s| {
                        let lm = (s.m as f64 / anchor.m as f64).ln();
                        (s.m as f64, anchor.mean_err_or * (theory * lm).exp())
                    })
                    .collect();
                plot = plot.with(Series::new(format!("{tb} theory"), line).dashed());
            }
            gamma_plot = gamma_plot.with(Series::new(tb.name(), pts(&|s| s.mean_gamma)));
            all_reps.extend(tb_reps);
            summaries.extend(tb_summaries);
            fits.push(f);
        }
        writer.raw_csv("rate_per_rep", &all_reps)?;
        writer.raw_csv("rate_per_bandwidth", &all_h)?;
        writer.processed_csv("rate_summary", &summaries)?;
        writer.processed_csv("rate_fits", &fits)?;
        writer.figure("rate_loglog", &plot)?;
        writer.figure("oracle_ratio", &gamma_plot)?;
        let artifacts = writer.finish(config)?;
        Ok(RateOutcome {
            artifacts,
            reps: all_reps,
            summaries,
            fits,
        })
    })
}
