use serde::Serialize;

use super::config::ExperimentConfig;
use super::output::{ArtifactWriter, LinePlot, RunArtifacts, Series};
use super::rng::{derive_stream, StreamLabel};
use super::{par_reps, prepare, with_threads, Prepared, RunOptions};
use crate::error::{Error, Result};
use crate::estimator::estimate_drift;
use crate::inference::{plugin_variance, qq_data, summarize_clt, CltRecord};
use crate::truth::TruthEngine;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CltRow {
    pub testbed: String,
    #[serde(rename = "M")]
    pub m: usize,
    pub rep: usize,
    pub h: f64,
    pub a_hat: f64,
    pub a_star: f64,
    pub sigma_hat: Option<f64>,
    pub z: Option<f64>,
    pub ci_lo: Option<f64>,
    pub ci_hi: Option<f64>,
    pub covered: Option<bool>,
    /// False when the floor fired or the variance estimate was not positive.
    pub applicable: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CltSummaryRow {
    pub testbed: String,
    #[serde(rename = "M")]
    pub m: usize,
    pub h: f64,
    pub valid: usize,
    pub not_applicable: usize,
    pub mean_z: f64,
    pub var_z: f64,
    pub coverage_pct: f64,
    pub ad_stat: f64,
    pub ad_reject: bool,
    pub ad_clamped: bool,
}

#[derive(Debug, Clone)]
pub struct CltOutcome {
    pub artifacts: RunArtifacts,
    pub rows: Vec<CltRow>,
    pub summaries: Vec<CltSummaryRow>,
}

#[derive(Debug, Serialize)]
struct QqRow {
    theoretical: f64,
    sample: f64,
}

fn one_rep(config: &ExperimentConfig, p: &Prepared, a_star: f64, m: usize, h: f64, rep: usize) -> Result<CltRow> {
    let name = p.testbed.name();
    let label = StreamLabel {
        experiment: "clt",
        testbed: name,
        m,
        rep,
    };
    let sample = p.law.sample_dataset(m, &mut derive_stream(config.seed, &label))?;
    let query = p.query.query();
    let est = estimate_drift(&sample, &p.interval, &query, h, h, &p.floors)?;
    let mut row = CltRow {
        testbed: name.to_string(),
        m,
        rep,
        h,
        a_hat: est.value[0],
        a_star,
        sigma_hat: None,
        z: None,
        ci_lo: None,
        ci_hi: None,
        covered: None,
        applicable: false,
    };
    let sigma = match plugin_variance(&sample, &p.interval, &query, h, &p.floors) {
        Ok(s) => s,
        Err(Error::NotApplicable(_)) => return Ok(row),
        Err(e) => return Err(e),
    };
    row.sigma_hat = Some(sigma);
    match CltRecord::build(est.value[0], a_star, sigma, m, h) {
        Ok(rec) => {
            row.z = Some(rec.z);
            row.ci_lo = Some(rec.ci_lo);
            row.ci_hi = Some(rec.ci_hi);
            row.covered = Some(rec.covered);
            row.applicable = true;
        }
        Err(Error::Undefined(_)) => {}
        Err(e) => return Err(e),
    }
    Ok(row)
}

fn summarize(rows: &[CltRow], h: f64) -> Result<CltSummaryRow> {
    let records: Vec<CltRecord> = rows
        .iter()
        .filter(|r| r.applicable)
        .map(|r| CltRecord {
            h: r.h,
            a_hat: r.a_hat,
            a_star: r.a_star,
            sigma_hat: r.sigma_hat.unwrap_or(f64::NAN),
            z: r.z.unwrap_or(f64::NAN),
            ci_lo: r.ci_lo.unwrap_or(f64::NAN),
            ci_hi: r.ci_hi.unwrap_or(f64::NAN),
            covered: r.covered.unwrap_or(false),
        })
        .collect();
    let s = summarize_clt(&records)?;
    Ok(CltSummaryRow {
        testbed: rows[0].testbed.clone(),
        m: rows[0].m,
        h,
        valid: records.len(),
        not_applicable: rows.len() - records.len(),
        mean_z: s.mean_z,
        var_z: s.var_z,
        coverage_pct: s.coverage_pct,
        ad_stat: s.ad_stat,
        ad_reject: s.ad_reject,
        ad_clamped: s.ad_clamped,
    })
}

/// Pointwise CLT study with `h_M = c M^{-alpha}` at the fixed query.
pub fn run_clt(config: &ExperimentConfig, opts: &RunOptions) -> Result<CltOutcome> {
    config.validate()?;
    for tb in &config.testbeds {
        if tb.dim() != 1 {
            return Err(Error::Config(format!(
                "the CLT study needs a one-dimensional testbed, got {tb}"
            )));
        }
        config.clt.alpha_for(*tb)?;
    }
    with_threads(opts, || {
        let mut writer = ArtifactWriter::new(&config.output, "clt")?;
        let (mut rows, mut summaries) = (Vec::new(), Vec::new());
        let mut sizes = config.clt.m_list.clone();
        sizes.sort_unstable();
        let qq_sizes: Vec<usize> = sizes.iter().rev().take(2).rev().copied().collect();
        for &tb in &config.testbeds {
            let p = prepare(config, tb, config.variant)?;
            let a_star = TruthEngine::new(&p.law, p.interval).true_drift(&p.query.query())?[0];
            let mut qq = LinePlot::new(&format!("{tb} normal QQ"), "N(0,1) quantile", "Z");
            for &m in &config.clt.m_list {
                let h = config.clt.bandwidth(tb, m)?;
                let tb_rows = par_reps(config.clt.reps, |r| one_rep(config, &p, a_star, m, h, r))?;
                summaries.push(summarize(&tb_rows, h)?);
                if qq_sizes.contains(&m) {
                    let z: Vec<f64> = tb_rows.iter().filter_map(|r| r.z).collect();
                    let pts = qq_data(&z)?;
                    let qq_rows: Vec<QqRow> = pts
                        .iter()
                        .map(|&(t, s)| QqRow {
                            theoretical: t,
                            sample: s,
                        })
                        .collect();
                    writer.processed_csv(&format!("qq_{tb}_M{m}"), &qq_rows)?;
                    qq = qq.with(Series::new(format!("M={m}"), pts));
                }
                rows.extend(tb_rows);
            }
            let lim = qq
                .series
                .iter()
                .flat_map(|s| s.points.iter().map(|p| p.0.abs()))
                .fold(0.0, f64::max);
            qq = qq.with(Series::new("identity", vec![(-lim, -lim), (lim, lim)]).dashed());
            writer.figure(&format!("qq_{tb}"), &qq)?;
        }
        writer.raw_csv("pointwise_clt", &rows)?;
        writer.processed_csv("clt_summary", &summaries)?;
        let artifacts = writer.finish(config)?;
        Ok(CltOutcome {
            artifacts,
            rows,
            summaries,
        })
    })
}
