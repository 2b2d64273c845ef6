//! Geometric bandwidth grids, the empirical oracle bandwidth and the
//! raw-max one-sided Goldenshluger–Lepski selector.

use crate::error::{Error, Result};
use crate::estimator::{estimate_drift_grid, DriftEstimate, Floors};
use crate::grid::EvalGrid;
use crate::models::SampleSet;
use crate::truth::{IntervalSpec, TruthCache};

pub const DEFAULT_H0: f64 = 1.2;
pub const DEFAULT_RATIO: f64 = std::f64::consts::FRAC_1_SQRT_2;
/// Every admissible bandwidth keeps `M h^d >= 81`.
pub const MIN_LOCAL_SAMPLE: f64 = 81.0;
pub const DEFAULT_KAPPA: f64 = 2.0;

/// `c_min` with `c_min^d = 81`: 81 in `d = 1`, 9 in `d = 2`.
pub fn floor_constant(dim: usize) -> f64 {
    match dim {
        1 => 81.0,
        2 => 9.0,
        d => MIN_LOCAL_SAMPLE.powf(1.0 / d as f64),
    }
}

/// `h_min(M, d) = c_min M^{-1/d}`.
pub fn bandwidth_floor(m: usize, dim: usize) -> f64 {
    floor_constant(dim) * (m as f64).powf(-1.0 / dim as f64)
}

/// `sqrt(log M / (M h^d))`.
pub fn stochastic_penalty(m: usize, dim: usize, h: f64) -> f64 {
    let mf = m as f64;
    (mf.ln() / (mf * h.powi(dim as i32))).sqrt()
}

/// Descending ladder `h0 q^k` truncated at the stabilizing floor.
#[derive(Debug, Clone, PartialEq)]
pub struct BandwidthGrid {
    pub h0: f64,
    pub ratio: f64,
    pub floor: f64,
    values: Vec<f64>,
}

impl BandwidthGrid {
    pub fn build(m: usize, dim: usize, h0: f64, ratio: f64) -> Result<Self> {
        if !(h0 > 0.0) || !(ratio > 0.0 && ratio < 1.0) || dim == 0 {
            return Err(Error::invalid("grid needs h0 > 0, 0 < q < 1 and d >= 1"));
        }
        let mf = m as f64;
        let floor = bandwidth_floor(m, dim);
        let mut values = Vec::new();
        for k in 0.. {
            let h = h0 * ratio.powi(k);
            if mf * h.powi(dim as i32) < MIN_LOCAL_SAMPLE {
                break;
            }
            values.push(h);
        }
        if values.is_empty() {
            return Err(Error::invalid(format!(
                "empty bandwidth grid: floor {floor} exceeds h0 = {h0} at M = {m}"
            )));
        }
        Ok(Self {
            h0,
            ratio,
            floor,
            values,
        })
    }

    /// Grid with `h0 = 1.2` and `q = 2^{-1/2}`.
    pub fn standard(m: usize, dim: usize) -> Result<Self> {
        Self::build(m, dim, DEFAULT_H0, DEFAULT_RATIO)
    }

    /// Grid with explicit values, sorted descending.
    pub fn from_values(mut values: Vec<f64>) -> Result<Self> {
        if values.is_empty() || values.iter().any(|h| !(*h > 0.0)) {
            return Err(Error::invalid("bandwidths must be positive and nonempty"));
        }
        values.sort_by(|a, b| b.total_cmp(a));
        values.dedup();
        Ok(Self {
            h0: values[0],
            ratio: f64::NAN,
            floor: *values.last().expect("nonempty"),
            values,
        })
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }
}

/// Estimates on the evaluation grid for every bandwidth of a grid.
#[derive(Debug, Clone)]
pub struct BandwidthPath {
    pub bandwidths: BandwidthGrid,
    pub estimates: Vec<Vec<DriftEstimate>>,
}

impl BandwidthPath {
    pub fn dim(&self) -> usize {
        self.estimates
            .first()
            .and_then(|e| e.first())
            .map_or(0, |e| e.value.len())
    }

    pub fn floor_count(&self, index: usize) -> usize {
        self.estimates[index].iter().filter(|e| e.floor_triggered).count()
    }
}

/// Computes `a_hat_h` on the grid once per bandwidth; the oracle and the
/// selector both read from the same pass.
pub fn evaluate_path(
    sample: &SampleSet,
    interval: &IntervalSpec,
    t: f64,
    xi: &[f64],
    grid: &EvalGrid,
    bandwidths: &BandwidthGrid,
    floors: &Floors,
) -> Result<BandwidthPath> {
    let estimates = bandwidths
        .values()
        .iter()
        .map(|&h| estimate_drift_grid(sample, interval, t, xi, grid, h, floors))
        .collect::<Result<Vec<_>>>()?;
    Ok(BandwidthPath {
        bandwidths: bandwidths.clone(),
        estimates,
    })
}

fn euclid(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(p, q)| (p - q) * (p - q)).sum::<f64>().sqrt()
}

/// `max_x |a_hat(x) - a*(x)|` over the grid, Euclidean per point.
pub fn sup_grid_error(estimates: &[DriftEstimate], truth: &TruthCache) -> Result<f64> {
    if estimates.len() != truth.len() {
        return Err(Error::invalid(format!(
            "{} estimates for {} truth points",
            estimates.len(),
            truth.len()
        )));
    }
    Ok(estimates
        .iter()
        .enumerate()
        .map(|(i, e)| euclid(&e.value, truth.astar_at(i)))
        .fold(0.0, f64::max))
}

/// `(int |a_hat - a*|^2 dx)^{1/2}` by the grid's trapezoid weights.
pub fn integrated_error(estimates: &[DriftEstimate], truth: &TruthCache) -> Result<f64> {
    if estimates.len() != truth.len() {
        return Err(Error::invalid("estimates and truth have different lengths"));
    }
    Ok(estimates
        .iter()
        .zip(truth.grid.weights())
        .enumerate()
        .map(|(i, (e, w))| w * euclid(&e.value, truth.astar_at(i)).powi(2))
        .sum::<f64>()
        .sqrt())
}

/// `|a_hat_{h'} - a_hat_h|_{inf, G}`.
pub fn sup_discrepancy(a: &[DriftEstimate], b: &[DriftEstimate]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(p, q)| euclid(&p.value, &q.value))
        .fold(0.0, f64::max)
}

#[derive(Debug, Clone, PartialEq)]
pub struct OracleChoice {
    pub h_or: f64,
    pub index: usize,
    /// Sup-grid error per bandwidth, grid order.
    pub errors: Vec<f64>,
}

/// Grid minimizer of the sup-grid error; ties go to the larger bandwidth.
pub fn oracle_bandwidth(path: &BandwidthPath, truth: &TruthCache) -> Result<OracleChoice> {
    let errors = path
        .estimates
        .iter()
        .map(|e| sup_grid_error(e, truth))
        .collect::<Result<Vec<_>>>()?;
    let index = argmin_prefer_first(&errors);
    Ok(OracleChoice {
        h_or: path.bandwidths.values()[index],
        index,
        errors,
    })
}

// Grids are descending, so the first minimizer is the largest bandwidth.
fn argmin_prefer_first(v: &[f64]) -> usize {
    let mut best = 0;
    for (i, x) in v.iter().enumerate().skip(1) {
        if *x < v[best] {
            best = i;
        }
    }
    best
}

#[derive(Debug, Clone, PartialEq)]
pub struct SelectorDiagnostics {
    pub selected_h: f64,
    pub index: usize,
    /// `B(h)` per bandwidth, grid order.
    pub b_values: Vec<f64>,
    /// `kappa_final sqrt(log M / (M h^d))` per bandwidth.
    pub penalties: Vec<f64>,
    pub boundary_hit: bool,
}

/// Raw-max one-sided GL rule:
/// `B(h) = max_{h' <= h} (|a_{h'} - a_h|_{inf,G} - kappa_pair v(h'))_+` and
/// `h_hat = argmin_h B(h) + kappa_final v(h)` with `v(h) = sqrt(log M / (M h^d))`.
/// Ties go to the larger bandwidth.
pub fn gl_select(path: &BandwidthPath, m: usize, kappa_pair: f64, kappa_final: f64) -> Result<SelectorDiagnostics> {
    let n = path.estimates.len();
    if n == 0 {
        return Err(Error::invalid("empty bandwidth path"));
    }
    let d = path.dim().max(1);
    let hs = path.bandwidths.values();
    let v: Vec<f64> = hs.iter().map(|&h| stochastic_penalty(m, d, h)).collect();
    let b_values: Vec<f64> = (0..n)
        .map(|k| {
            // Smaller bandwidths sit at larger indices.
            (k..n)
                .map(|j| sup_discrepancy(&path.estimates[j], &path.estimates[k]) - kappa_pair * v[j])
                .fold(0.0, f64::max)
        })
        .collect();
    let penalties: Vec<f64> = v.iter().map(|p| kappa_final * p).collect();
    let crit: Vec<f64> = b_values.iter().zip(&penalties).map(|(b, p)| b + p).collect();
    let index = argmin_prefer_first(&crit);
    Ok(SelectorDiagnostics {
        selected_h: hs[index],
        index,
        b_values,
        penalties,
        boundary_hit: index == 0 || index + 1 == n,
    })
}

/// `Gamma = err_hat / err_or`.
pub fn oracle_ratio(err_hat: f64, err_or: f64) -> Result<f64> {
    if !(err_or > 0.0) {
        return Err(Error::Undefined(format!("oracle error {err_or} is not positive")));
    }
    Ok(err_hat / err_or)
}
