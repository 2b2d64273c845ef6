//! Reproducible experiment drivers.
//!
//! Replicates are the unit of parallelism. Each owns a stream derived from the
//! master seed and its labels, and records are gathered in replicate order, so
//! every output is independent of the thread count.

pub mod config;
pub mod output;
pub mod rng;

mod clt;
mod edge;
mod preflight;
mod rate;
mod stress;

pub use clt::{run_clt, CltOutcome, CltRow, CltSummaryRow};
pub use config::{ExperimentConfig, FixedQuery};
pub use edge::{run_edge, EdgeOutcome, EdgeRow, EdgeSummaryRow};
pub use output::{LinePlot, RunArtifacts, Series};
pub use preflight::{run_preflight, PreflightOutcome, PreflightRow};
pub use rate::{run_rate, RateFit, RateOutcome, RateRepRow, RateSummaryRow};
pub use rng::{derive_stream, StreamLabel};
pub use stress::{run_stress, StressComparison, StressOutcome, StressRow, StressSummaryRow};

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::estimator::Floors;
use crate::models::{PairLaw, Testbed, Variant};
use crate::truth::{preflight, IntervalSpec, PreflightReport, TruthCache, TRUTH_TOLERANCE};

/// Execution options that never change results.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct RunOptions {
    /// Worker threads; `None` uses the global pool.
    pub threads: Option<usize>,
}

pub(crate) fn with_threads<T: Send>(opts: &RunOptions, f: impl FnOnce() -> Result<T> + Send) -> Result<T> {
    match opts.threads {
        None => f(),
        Some(0) => Err(Error::Config("thread count must be positive".into())),
        Some(n) => rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build()
            .map_err(|e| Error::Config(format!("thread pool: {e}")))?
            .install(f),
    }
}

/// Runs `f(0..n)` in parallel and returns the results in index order.
pub(crate) fn par_reps<T: Send>(n: usize, f: impl Fn(usize) -> Result<T> + Sync + Send) -> Result<Vec<T>> {
    (0..n).into_par_iter().map(f).collect()
}

/// A testbed with its pre-flight diagnostics, truth at `(t0, xi0)` and floors.
pub(crate) struct Prepared {
    pub testbed: Testbed,
    pub law: PairLaw,
    pub interval: IntervalSpec,
    pub query: FixedQuery,
    pub cache: TruthCache,
    pub floors: Floors,
}

pub(crate) fn prepare(config: &ExperimentConfig, testbed: Testbed, variant: Variant) -> Result<Prepared> {
    let law = PairLaw::new(testbed, variant)?;
    let interval = config.interval_spec()?;
    let settings = config.preflight_settings(testbed)?;
    let (report, cache) = preflight(&law, &interval, &settings)?;
    check_report(&report)?;
    Ok(Prepared {
        testbed,
        query: config.query(testbed),
        floors: report.floors(),
        law,
        interval,
        cache,
    })
}

pub(crate) fn check_report(report: &PreflightReport) -> Result<()> {
    if !report.truth_converged {
        return Err(Error::TruthNotConverged {
            error: report.truth_error,
            tolerance: TRUTH_TOLERANCE,
        });
    }
    if !report.density_positive {
        return Err(Error::DegenerateConditioning { density: report.f_xi0 });
    }
    if !report.denominator_positive {
        return Err(Error::Undefined(format!(
            "{}: nonpositive denominator on the grid",
            report.testbed
        )));
    }
    Ok(())
}

pub(crate) fn mean(v: &[f64]) -> f64 {
    if v.is_empty() {
        return f64::NAN;
    }
    v.iter().sum::<f64>() / v.len() as f64
}

pub(crate) fn median(v: &[f64]) -> f64 {
    if v.is_empty() {
        return f64::NAN;
    }
    let mut s = v.to_vec();
    s.sort_by(f64::total_cmp);
    let n = s.len();
    if n % 2 == 1 {
        s[n / 2]
    } else {
        0.5 * (s[n / 2 - 1] + s[n / 2])
    }
}

/// Unbiased sample variance; zero for fewer than two values.
pub(crate) fn sample_variance(v: &[f64]) -> f64 {
    if v.len() < 2 {
        return 0.0;
    }
    let m = mean(v);
    v.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / (v.len() - 1) as f64
}
