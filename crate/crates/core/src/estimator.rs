//! Kernel plug-in drift estimator.
//!
//! With `K_h` the scaled product Epanechnikov kernel,
//!
//! ```text
//! f_j(xi) = 1/M sum_m K_{h_j}(X_s^m - xi)
//! g_1     = 1/M sum_m F(t, xi, x, X_u^m) K_{h_1}(X_s^m - xi)
//! g_2     = 1/M sum_m X_u^m F(t, xi, x, X_u^m) K_{h_2}(X_s^m - xi)
//! a_hat   = (N_hat / D_hat - x) / (u - t),  D_hat = g_1/f_1,  N_hat = g_2/f_2
//! ```
//!
//! The estimate is set to zero when `f_1`, `f_2` or `D_hat` fall below half of
//! their floors. Every sum runs over the samples in index order, so results do
//! not depend on how callers batch or parallelize evaluations.

use crate::error::{Error, Result};
use crate::grid::EvalGrid;
use crate::kernels::scaled_kernel_between;
use crate::models::SampleSet;
use crate::truth::{IntervalSpec, Query};

/// Population floors `f_min` and `D_min`; the estimator compares against half of each.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Floors {
    pub f_min: f64,
    pub d_min: f64,
}

impl Floors {
    /// No floor beyond strict positivity.
    pub const NONE: Floors = Floors { f_min: 0.0, d_min: 0.0 };
}

#[derive(Debug, Clone, PartialEq)]
pub struct DriftEstimate {
    pub value: Vec<f64>,
    pub fhat1: f64,
    pub fhat2: f64,
    pub dhat: f64,
    pub floor_triggered: bool,
}

/// Samples with nonzero kernel weight around one conditioning point.
#[derive(Debug, Clone)]
pub struct KernelWindow {
    dim: usize,
    m: usize,
    /// `K_h(X_s^m - xi)` for the retained samples, in index order.
    weights: Vec<f64>,
    /// Matching `X_u^m`, flat.
    targets: Vec<f64>,
    fhat: f64,
}

fn check_bandwidth(h: f64) -> Result<()> {
    if !(h > 0.0) || !h.is_finite() {
        return Err(Error::invalid(format!("bandwidth must be positive, got {h}")));
    }
    Ok(())
}

impl KernelWindow {
    pub fn new(sample: &SampleSet, xi: &[f64], h: f64) -> Result<Self> {
        check_bandwidth(h)?;
        if sample.is_empty() {
            return Err(Error::invalid("empty sample"));
        }
        let d = sample.dim();
        if xi.len() != d {
            return Err(Error::invalid("conditioning point has the wrong dimension"));
        }
        let inv_h = 1.0 / h;
        let norm = inv_h.powi(d as i32);
        let mut weights = Vec::new();
        let mut targets = Vec::new();
        let mut total = 0.0;
        for m in 0..sample.len() {
            let k = scaled_kernel_between(sample.source(m), xi, inv_h, norm);
            if k > 0.0 {
                weights.push(k);
                targets.extend_from_slice(sample.target(m));
                total += k;
            }
        }
        let m = sample.len();
        Ok(Self {
            dim: d,
            m,
            weights,
            targets,
            fhat: total / m as f64,
        })
    }

    /// `f_hat(xi)`.
    pub fn fhat(&self) -> f64 {
        self.fhat
    }

    /// Number of samples with positive weight.
    pub fn support_size(&self) -> usize {
        self.weights.len()
    }

    pub fn sample_size(&self) -> usize {
        self.m
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn target(&self, k: usize) -> &[f64] {
        &self.targets[k * self.dim..(k + 1) * self.dim]
    }

    /// `1/M sum_m phi(X_u^m) K_h(X_s^m - xi)`.
    pub fn kernel_average(&self, mut phi: impl FnMut(&[f64]) -> f64) -> f64 {
        let mut acc = 0.0;
        for (k, w) in self.weights.iter().enumerate() {
            acc += w * phi(self.target(k));
        }
        acc / self.m as f64
    }

    /// Kernel-weighted conditional mean `E_hat[phi(X_u) | X_s = xi]`.
    pub fn conditional_mean(&self, phi: impl FnMut(&[f64]) -> f64) -> Result<f64> {
        if !(self.fhat > 0.0) {
            return Err(Error::NotApplicable("no kernel mass at the conditioning point".into()));
        }
        Ok(self.kernel_average(phi) / self.fhat)
    }

    /// `(g_1, g_2)` at state `x`.
    fn weighted_sums(&self, xi: &[f64], x: &[f64], half_inv_dt: f64, half_inv_delta: f64) -> (f64, Vec<f64>) {
        let d = self.dim;
        let mut g1 = 0.0;
        let mut g2 = vec![0.0; d];
        for (k, w) in self.weights.iter().enumerate() {
            let y = self.target(k);
            let mut near = 0.0;
            let mut far = 0.0;
            for i in 0..d {
                near += (y[i] - x[i]) * (y[i] - x[i]);
                far += (y[i] - xi[i]) * (y[i] - xi[i]);
            }
            let wf = w * (far * half_inv_delta - near * half_inv_dt).exp();
            g1 += wf;
            for i in 0..d {
                g2[i] += wf * y[i];
            }
        }
        let inv_m = 1.0 / self.m as f64;
        g2.iter_mut().for_each(|v| *v *= inv_m);
        (g1 * inv_m, g2)
    }
}

/// `f_hat(xi) = 1/M sum_m K_h(X_s^m - xi)`.
pub fn estimate_f(sample: &SampleSet, xi: &[f64], h: f64) -> Result<f64> {
    Ok(KernelWindow::new(sample, xi, h)?.fhat())
}

/// `g_hat_1` (a one-element vector) or `g_hat_2` when `weighted_by_y`.
pub fn estimate_g(
    sample: &SampleSet,
    interval: &IntervalSpec,
    query: &Query,
    h: f64,
    weighted_by_y: bool,
) -> Result<Vec<f64>> {
    let dt = interval.delta_at(query.t)?;
    check_dims(sample, query)?;
    let window = KernelWindow::new(sample, &query.xi, h)?;
    let (g1, g2) = window.weighted_sums(&query.xi, &query.x, 0.5 / dt, 0.5 / interval.delta());
    Ok(if weighted_by_y { g2 } else { vec![g1] })
}

fn check_dims(sample: &SampleSet, query: &Query) -> Result<()> {
    if query.x.len() != sample.dim() || query.xi.len() != sample.dim() {
        return Err(Error::invalid("query dimension does not match the sample"));
    }
    Ok(())
}

fn assemble(x: &[f64], dt: f64, fhat1: f64, fhat2: f64, g1: f64, g2: &[f64], floors: &Floors) -> DriftEstimate {
    let dhat = if fhat1 > 0.0 { g1 / fhat1 } else { 0.0 };
    let ok = fhat1 > 0.0
        && fhat2 > 0.0
        && dhat > 0.0
        && fhat1 >= 0.5 * floors.f_min
        && fhat2 >= 0.5 * floors.f_min
        && dhat >= 0.5 * floors.d_min;
    // N_hat / D_hat = (g_2 / g_1) (f_1 / f_2); the last factor is exactly one for h_1 = h_2.
    let value = if ok {
        let scale = fhat1 / fhat2;
        g2.iter().zip(x).map(|(g, xi)| ((g / g1) * scale - xi) / dt).collect()
    } else {
        vec![0.0; x.len()]
    };
    DriftEstimate {
        value,
        fhat1,
        fhat2,
        dhat,
        floor_triggered: !ok,
    }
}

/// Plug-in drift at one query with bandwidths `h1` (denominator) and `h2` (numerator).
pub fn estimate_drift(
    sample: &SampleSet,
    interval: &IntervalSpec,
    query: &Query,
    h1: f64,
    h2: f64,
    floors: &Floors,
) -> Result<DriftEstimate> {
    let dt = interval.delta_at(query.t)?;
    check_dims(sample, query)?;
    let (hi_dt, hi_delta) = (0.5 / dt, 0.5 / interval.delta());
    let w1 = KernelWindow::new(sample, &query.xi, h1)?;
    let (g1, g2) = if h1 == h2 {
        w1.weighted_sums(&query.xi, &query.x, hi_dt, hi_delta)
    } else {
        let w2 = KernelWindow::new(sample, &query.xi, h2)?;
        let (g1, _) = w1.weighted_sums(&query.xi, &query.x, hi_dt, hi_delta);
        let (_, g2) = w2.weighted_sums(&query.xi, &query.x, hi_dt, hi_delta);
        return Ok(assemble(&query.x, dt, w1.fhat(), w2.fhat(), g1, &g2, floors));
    };
    Ok(assemble(&query.x, dt, w1.fhat(), w1.fhat(), g1, &g2, floors))
}

/// Diagonal-bandwidth estimates at every grid point for fixed `(t, xi)`.
///
/// The kernel window depends only on `xi` and `h` and is shared across `x`.
pub fn estimate_drift_grid(
    sample: &SampleSet,
    interval: &IntervalSpec,
    t: f64,
    xi: &[f64],
    grid: &EvalGrid,
    h: f64,
    floors: &Floors,
) -> Result<Vec<DriftEstimate>> {
    let dt = interval.delta_at(t)?;
    if grid.dim() != sample.dim() || xi.len() != sample.dim() {
        return Err(Error::invalid("grid dimension does not match the sample"));
    }
    let (hi_dt, hi_delta) = (0.5 / dt, 0.5 / interval.delta());
    let window = KernelWindow::new(sample, xi, h)?;
    let f = window.fhat();
    Ok(grid
        .iter()
        .map(|x| {
            let (g1, g2) = window.weighted_sums(xi, x, hi_dt, hi_delta);
            assemble(x, dt, f, f, g1, &g2, floors)
        })
        .collect())
}

/// Raw per-sample summands `W^N_m = X_u F K_h` and `W^D_m = F K_h` over all `M`
/// samples, zeros included. `W^N` is flat `M x d`.
pub fn weighted_summands(
    sample: &SampleSet,
    interval: &IntervalSpec,
    query: &Query,
    h: f64,
) -> Result<(Vec<f64>, Vec<f64>)> {
    let dt = interval.delta_at(query.t)?;
    check_dims(sample, query)?;
    check_bandwidth(h)?;
    let d = sample.dim();
    let inv_h = 1.0 / h;
    let norm = inv_h.powi(d as i32);
    let (hi_dt, hi_delta) = (0.5 / dt, 0.5 / interval.delta());
    let mut wn = Vec::with_capacity(sample.len() * d);
    let mut wd = Vec::with_capacity(sample.len());
    for m in 0..sample.len() {
        let k = scaled_kernel_between(sample.source(m), &query.xi, inv_h, norm);
        let y = sample.target(m);
        let w = if k > 0.0 {
            k * crate::truth::sb_log_weight(hi_dt, hi_delta, &query.xi, &query.x, y).exp()
        } else {
            0.0
        };
        wd.push(w);
        wn.extend(y.iter().map(|yi| yi * w));
    }
    Ok((wn, wd))
}

/// Empirical and population building blocks at one query.
#[derive(Debug, Clone, PartialEq)]
pub struct RatioTransferInputs {
    pub fhat1: f64,
    pub fhat2: f64,
    pub ghat1: f64,
    pub ghat2: Vec<f64>,
    pub f: f64,
    pub g1: f64,
    pub g2: Vec<f64>,
    /// `Q* = N*/D*`.
    pub q_star: Vec<f64>,
    pub f_min: f64,
    pub d_min: f64,
    /// `Delta(t) = u - t`.
    pub delta_t: f64,
}

fn norm(v: &[f64]) -> f64 {
    v.iter().map(|a| a * a).sum::<f64>().sqrt()
}

/// Deterministic bound on `|a_hat - a*|` from the errors of the four blocks.
///
/// Requires the population floors `f >= f_min`, `D* >= D_min` and the
/// empirical event `f_hat_j >= f_min/2`, `D_hat >= D_min/2` at the query;
/// otherwise returns [`Error::NotApplicable`].
pub fn ratio_transfer_bound(inp: &RatioTransferInputs) -> Result<f64> {
    if !(inp.f_min > 0.0) || !(inp.d_min > 0.0) || !(inp.delta_t > 0.0) {
        return Err(Error::invalid("floors and Delta(t) must be positive"));
    }
    if inp.ghat2.len() != inp.g2.len() || inp.g2.len() != inp.q_star.len() {
        return Err(Error::invalid("vector blocks must share a dimension"));
    }
    let dstar = inp.g1 / inp.f;
    if !(inp.f >= inp.f_min) || !(dstar >= inp.d_min) {
        return Err(Error::NotApplicable("population floors fail at the query".into()));
    }
    let dhat = inp.ghat1 / inp.fhat1;
    if !(inp.fhat1 >= 0.5 * inp.f_min) || !(inp.fhat2 >= 0.5 * inp.f_min) || !(dhat >= 0.5 * inp.d_min) {
        return Err(Error::NotApplicable("empirical floor event fails".into()));
    }
    let dg2: Vec<f64> = inp.ghat2.iter().zip(&inp.g2).map(|(a, b)| a - b).collect();
    let f_min_sq = inp.f_min * inp.f_min;
    let numerator = (inp.f * norm(&dg2) + norm(&inp.g2) * (inp.fhat2 - inp.f).abs()) / f_min_sq;
    let denominator = (inp.f * (inp.ghat1 - inp.g1).abs() + inp.g1.abs() * (inp.fhat1 - inp.f).abs()) / f_min_sq;
    Ok(4.0 / (inp.delta_t * inp.d_min) * (numerator + norm(&inp.q_star) * denominator))
}
