use serde::Serialize;

use super::config::ExperimentConfig;
use super::output::{ArtifactWriter, LinePlot, RunArtifacts, Series};
use super::rng::{derive_stream, StreamLabel};
use super::{mean, par_reps, prepare, with_threads, Prepared, RunOptions};
use crate::bandwidth::{evaluate_path, gl_select, integrated_error, sup_grid_error};
use crate::error::Result;
use crate::estimator::{estimate_drift_grid, Floors};
use crate::truth::{TruthCache, TruthEngine};

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EdgeRow {
    pub testbed: String,
    pub rep: usize,
    pub t: f64,
    pub delta_t: f64,
    pub h_hat: f64,
    pub err_sup: f64,
    pub err_scaled: f64,
    pub ise: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EdgeSummaryRow {
    pub testbed: String,
    pub reps: usize,
    /// Share of replicates whose rescaled curve has a smaller max/min ratio.
    pub flatter_fraction: f64,
    /// Share of replicates with a larger error at the latest time than at the earliest.
    pub increase_fraction: f64,
    pub mean_raw_ratio: f64,
    pub mean_scaled_ratio: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
struct EdgeRepRow {
    testbed: String,
    rep: usize,
    raw_ratio: f64,
    scaled_ratio: f64,
    flatter: bool,
    increase: bool,
}

#[derive(Debug, Clone)]
pub struct EdgeOutcome {
    pub artifacts: RunArtifacts,
    pub rows: Vec<EdgeRow>,
    pub summaries: Vec<EdgeSummaryRow>,
}

struct Slice {
    t: f64,
    delta_t: f64,
    cache: TruthCache,
    floors: Floors,
}

fn one_rep(config: &ExperimentConfig, p: &Prepared, slices: &[Slice], rep: usize) -> Result<Vec<EdgeRow>> {
    let m = config.edge.m;
    let name = p.testbed.name();
    let label = StreamLabel {
        experiment: "edge",
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
    let h = gl_select(&path, m, config.bandwidth.kappa_pair, config.bandwidth.kappa_final)?.selected_h;
    slices
        .iter()
        .map(|s| {
            let est = estimate_drift_grid(&sample, &p.interval, s.t, &p.query.xi0, &s.cache.grid, h, &s.floors)?;
            let err = sup_grid_error(&est, &s.cache)?;
            Ok(EdgeRow {
                testbed: name.to_string(),
                rep,
                t: s.t,
                delta_t: s.delta_t,
                h_hat: h,
                err_sup: err,
                err_scaled: s.delta_t * err,
                ise: integrated_error(&est, &s.cache)?,
            })
        })
        .collect()
}

fn spread(v: impl Iterator<Item = f64> + Clone) -> f64 {
    let hi = v.clone().fold(f64::NEG_INFINITY, f64::max);
    let lo = v.fold(f64::INFINITY, f64::min);
    hi / lo
}

/// Error growth toward the terminal time with the bandwidth held at its `t0` choice.
pub fn run_edge(config: &ExperimentConfig, opts: &RunOptions) -> Result<EdgeOutcome> {
    config.validate()?;
    with_threads(opts, || {
        let mut writer = ArtifactWriter::new(&config.output, "edge")?;
        let (mut rows, mut rep_rows, mut summaries) = (Vec::new(), Vec::new(), Vec::new());
        let mut plot = LinePlot::new("Terminal edge", "t", "mean sup-grid error");
        for &tb in &config.testbeds {
            let p = prepare(config, tb, config.variant)?;
            let engine = TruthEngine::new(&p.law, p.interval);
            let mut offsets = config.edge.offsets.clone();
            offsets.sort_by(|a, b| b.total_cmp(a));
            let slices = offsets
                .iter()
                .map(|o| {
                    let t = p.interval.u - o;
                    let cache = engine.build_truth_cache(t, &p.query.xi0, &p.cache.grid)?;
                    let floors = Floors {
                        f_min: p.floors.f_min,
                        d_min: 0.5 * cache.min_dstar(),
                    };
                    Ok(Slice {
                        t,
                        delta_t: p.interval.delta_at(t)?,
                        cache,
                        floors,
                    })
                })
                .collect::<Result<Vec<_>>>()?;
            let per_rep = par_reps(config.edge.reps, |r| one_rep(config, &p, &slices, r))?;
            for (rep, curve) in per_rep.iter().enumerate() {
                let raw_ratio = spread(curve.iter().map(|r| r.err_sup));
                let scaled_ratio = spread(curve.iter().map(|r| r.err_scaled));
                rep_rows.push(EdgeRepRow {
                    testbed: tb.name().into(),
                    rep,
                    raw_ratio,
                    scaled_ratio,
                    flatter: scaled_ratio < raw_ratio,
                    increase: curve[curve.len() - 1].err_sup > curve[0].err_sup,
                });
            }
            let mine = &rep_rows[rep_rows.len() - per_rep.len()..];
            let n = mine.len() as f64;
            summaries.push(EdgeSummaryRow {
                testbed: tb.name().into(),
                reps: mine.len(),
                flatter_fraction: mine.iter().filter(|r| r.flatter).count() as f64 / n,
                increase_fraction: mine.iter().filter(|r| r.increase).count() as f64 / n,
                mean_raw_ratio: mean(&mine.iter().map(|r| r.raw_ratio).collect::<Vec<_>>()),
                mean_scaled_ratio: mean(&mine.iter().map(|r| r.scaled_ratio).collect::<Vec<_>>()),
            });
            let curve = |f: &dyn Fn(&EdgeRow) -> f64| -> Vec<(f64, f64)> {
                (0..slices.len())
                    .map(|k| (slices[k].t, mean(&per_rep.iter().map(|c| f(&c[k])).collect::<Vec<_>>())))
                    .collect()
            };
            plot = plot
                .with(Series::new(format!("{tb} raw"), curve(&|r| r.err_sup)))
                .with(Series::new(format!("{tb} rescaled"), curve(&|r| r.err_scaled)));
            rows.extend(per_rep.into_iter().flatten());
        }
        writer.raw_csv("edge", &rows)?;
        writer.processed_csv("edge_per_rep", &rep_rows)?;
        writer.processed_csv("edge_summary", &summaries)?;
        writer.figure("edge", &plot)?;
        let artifacts = writer.finish(config)?;
        Ok(EdgeOutcome {
            artifacts,
            rows,
            summaries,
        })
    })
}
