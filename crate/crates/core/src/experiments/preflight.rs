use serde::Serialize;

use super::config::ExperimentConfig;
use super::output::{ArtifactWriter, RunArtifacts};
use super::{check_report, with_threads, RunOptions};
use crate::error::Result;
use crate::models::PairLaw;
use crate::truth::{preflight, PreflightReport};

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PreflightRow {
    pub testbed: String,
    pub f_xi0: f64,
    pub min_f_grid: f64,
    pub min_dstar: f64,
    pub truth_error: f64,
}

#[derive(Debug, Serialize)]
struct CheckRow<'a> {
    testbed: &'a str,
    variant: &'a str,
    density_positive: bool,
    denominator_positive: bool,
    truth_converged: bool,
    low_density_region: bool,
    f_min: f64,
    d_min: f64,
}

#[derive(Debug, Clone)]
pub struct PreflightOutcome {
    pub artifacts: RunArtifacts,
    pub reports: Vec<PreflightReport>,
}

/// Pre-flight diagnostics for each configured testbed; deterministic.
pub fn run_preflight(config: &ExperimentConfig, opts: &RunOptions) -> Result<PreflightOutcome> {
    config.validate()?;
    with_threads(opts, || {
        let interval = config.interval_spec()?;
        let mut writer = ArtifactWriter::new(&config.output, "preflight")?;
        let mut reports = Vec::new();
        for &tb in &config.testbeds {
            let law = PairLaw::new(tb, config.variant)?;
            let (report, cache) = preflight(&law, &interval, &config.preflight_settings(tb)?)?;
            check_report(&report)?;
            let path = config.output.join("raw").join(format!("truth_{tb}.csv"));
            cache.write_csv(&path)?;
            writer.register_raw(path);
            reports.push(report);
        }
        let rows: Vec<PreflightRow> = reports
            .iter()
            .map(|r| PreflightRow {
                testbed: r.testbed.clone(),
                f_xi0: r.f_xi0,
                min_f_grid: r.min_f_grid,
                min_dstar: r.min_dstar,
                truth_error: r.truth_error,
            })
            .collect();
        writer.raw_csv("preflight", &rows)?;
        let checks: Vec<CheckRow> = reports
            .iter()
            .map(|r| {
                let f = r.floors();
                CheckRow {
                    testbed: &r.testbed,
                    variant: config.variant.name(),
                    density_positive: r.density_positive,
                    denominator_positive: r.denominator_positive,
                    truth_converged: r.truth_converged,
                    low_density_region: r.low_density_region,
                    f_min: f.f_min,
                    d_min: f.d_min,
                }
            })
            .collect();
        writer.processed_csv("preflight_checks", &checks)?;
        let artifacts = writer.finish(config)?;
        Ok(PreflightOutcome { artifacts, reports })
    })
}
