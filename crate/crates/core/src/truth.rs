//! Deterministic ground truth for the bridge drift.
//!
//! For a query `(t, x, xi)` the population moments
//! `D*(t,x;xi) = int_B F(t,xi,x,y) p(y|xi) dy` and
//! `N*(t,x;xi) = int_B y F(t,xi,x,y) p(y|xi) dy` are computed by quadrature,
//! never by Monte Carlo: adaptive Gauss–Legendre panels in `d = 1` and a
//! composite Gauss–Legendre tensor grid in `d = 2`. The drift is
//! `a* = (N*/D* - x) / (u - t)`.

use std::path::Path;

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::grid::EvalGrid;
use crate::models::{PairLaw, SupportBox};
use crate::quadrature::{composite_nodes, AdaptiveGaussLegendre, AdaptiveSettings, GaussLegendre};

/// Truth caches whose refinement change exceeds this are rejected.
pub const TRUTH_TOLERANCE: f64 = 1e-6;

/// Marginal densities below this make the conditional law ill-defined.
pub const MIN_CONDITIONING_DENSITY: f64 = 1e-12;

/// Single bridge interval `[s, u]` together with the query-set constants.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IntervalSpec {
    pub s: f64,
    pub u: f64,
    /// Distance kept from the terminal time: queries satisfy `t <= u - eta`.
    pub eta: f64,
    /// State radius `R`: queries satisfy `|x| <= R`.
    pub state_radius: f64,
    /// Conditioning margin `rho` inside the support box.
    pub margin: f64,
}

impl Default for IntervalSpec {
    fn default() -> Self {
        Self {
            s: 0.2,
            u: 1.0,
            eta: 0.05,
            state_radius: 2.5,
            margin: 1.0,
        }
    }
}

impl IntervalSpec {
    pub fn new(s: f64, u: f64, eta: f64, state_radius: f64, margin: f64) -> Result<Self> {
        if !(0.0 < s && s < u) {
            return Err(Error::invalid(format!("interval needs 0 < s < u, got [{s}, {u}]")));
        }
        if !(0.0 < eta && eta < u - s) {
            return Err(Error::invalid(format!("eta must lie in (0, u - s), got {eta}")));
        }
        if !(state_radius > 0.0) || !(margin >= 0.0) {
            return Err(Error::invalid("state radius must be positive and margin nonnegative"));
        }
        Ok(Self {
            s,
            u,
            eta,
            state_radius,
            margin,
        })
    }

    /// `Delta = u - s`.
    pub fn delta(&self) -> f64 {
        self.u - self.s
    }

    /// `Delta(t) = u - t`; errors at or past the terminal singularity.
    pub fn delta_at(&self, t: f64) -> Result<f64> {
        if !(t < self.u) {
            return Err(Error::invalid(format!(
                "time {t} is not before the terminal time {}",
                self.u
            )));
        }
        Ok(self.u - t)
    }

    /// `C_F = exp(diam(B)^2 / (2 Delta))`.
    pub fn weight_upper_bound(&self, support: &SupportBox) -> f64 {
        (support.diameter().powi(2) / (2.0 * self.delta())).exp()
    }

    /// `exp(-(R_B + R)^2 / (2 eta))`, valid for `t <= u - eta` and `|x| <= R`.
    pub fn weight_lower_bound(&self, support: &SupportBox) -> f64 {
        (-(support.max_norm() + self.state_radius).powi(2) / (2.0 * self.eta)).exp()
    }

    fn check_theory_time(&self, t: f64) -> Result<()> {
        if !(t <= self.u - self.eta) || t < self.s {
            return Err(Error::invalid(format!(
                "query time {t} outside [s, u - eta] = [{}, {}]",
                self.s,
                self.u - self.eta
            )));
        }
        Ok(())
    }
}

/// Evaluation point `(t, x, xi)`.
#[derive(Debug, Clone, PartialEq)]
pub struct Query {
    pub t: f64,
    pub x: Vec<f64>,
    pub xi: Vec<f64>,
}

impl Query {
    pub fn new(t: f64, x: Vec<f64>, xi: Vec<f64>) -> Self {
        Self { t, x, xi }
    }
}

fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(p, q)| (p - q) * (p - q)).sum()
}

/// Exponent of the bridge weight. Combining the two quadratic terms before
/// exponentiating keeps the product finite whenever the weight itself is.
#[inline]
pub(crate) fn sb_log_weight(half_inv_dt: f64, half_inv_delta: f64, xi: &[f64], x: &[f64], y: &[f64]) -> f64 {
    -sq_dist(y, x) * half_inv_dt + sq_dist(y, xi) * half_inv_delta
}

/// `F(t, xi, x, y) = exp(-|y - x|^2 / (2 (u - t)) + |y - xi|^2 / (2 Delta))`.
pub fn sb_weight(interval: &IntervalSpec, t: f64, xi: &[f64], x: &[f64], y: &[f64]) -> Result<f64> {
    let dt = interval.delta_at(t)?;
    if xi.len() != x.len() || x.len() != y.len() {
        return Err(Error::invalid("weight arguments must share a dimension"));
    }
    Ok(sb_log_weight(0.5 / dt, 0.5 / interval.delta(), xi, x, y).exp())
}

/// Population moments at one query.
#[derive(Debug, Clone, PartialEq)]
pub struct Moments {
    pub dstar: f64,
    pub nstar: Vec<f64>,
}

impl Moments {
    /// `Q* = N*/D*`.
    pub fn ratio(&self) -> Vec<f64> {
        self.nstar.iter().map(|n| n / self.dstar).collect()
    }

    /// `a* = (Q* - x) / Delta(t)`.
    pub fn drift(&self, x: &[f64], dt: f64) -> Vec<f64> {
        self.nstar
            .iter()
            .zip(x)
            .map(|(n, xi)| (n / self.dstar - xi) / dt)
            .collect()
    }
}

/// Quadrature resolution for both dimensions.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TruthResolution {
    pub adaptive: AdaptiveSettings,
    pub tensor_panels: usize,
    pub tensor_order: usize,
}

impl Default for TruthResolution {
    fn default() -> Self {
        Self {
            adaptive: AdaptiveSettings::default(),
            tensor_panels: 25,
            tensor_order: 16,
        }
    }
}

impl TruthResolution {
    pub fn doubled(&self) -> Self {
        Self {
            adaptive: self.adaptive.doubled(),
            tensor_panels: self.tensor_panels * 2,
            tensor_order: self.tensor_order,
        }
    }
}

/// Quadrature engine for one law on one interval.
#[derive(Debug, Clone)]
pub struct TruthEngine<'a> {
    law: &'a PairLaw,
    interval: IntervalSpec,
    resolution: TruthResolution,
}

/// Conditional density tabulated on a 2d tensor grid, times the
/// `x`-independent part of the weight.
struct TensorTable {
    y1: Vec<(f64, f64)>,
    y2: Vec<(f64, f64)>,
    /// `w_i w_j p(y_ij | xi)`, row-major in `(i, j)`.
    mass: Vec<f64>,
}

impl<'a> TruthEngine<'a> {
    pub fn new(law: &'a PairLaw, interval: IntervalSpec) -> Self {
        Self::with_resolution(law, interval, TruthResolution::default())
    }

    pub fn with_resolution(law: &'a PairLaw, interval: IntervalSpec, resolution: TruthResolution) -> Self {
        Self {
            law,
            interval,
            resolution,
        }
    }

    pub fn law(&self) -> &PairLaw {
        self.law
    }

    pub fn interval(&self) -> &IntervalSpec {
        &self.interval
    }

    pub fn resolution(&self) -> &TruthResolution {
        &self.resolution
    }

    fn check_conditioning(&self, xi: &[f64]) -> Result<()> {
        if xi.len() != self.law.dim() {
            return Err(Error::invalid("conditioning point has the wrong dimension"));
        }
        let f = self.law.marginal_density(xi);
        if !(f >= MIN_CONDITIONING_DENSITY) {
            return Err(Error::DegenerateConditioning { density: f });
        }
        Ok(())
    }

    /// `D*` and `N*` at a query with `t <= u - eta`.
    pub fn population_moments(&self, query: &Query) -> Result<Moments> {
        self.interval.check_theory_time(query.t)?;
        self.check_conditioning(&query.xi)?;
        if query.x.len() != self.law.dim() {
            return Err(Error::invalid("state has the wrong dimension"));
        }
        let grid = EvalGrid::from_points(query.x.len(), query.x.clone())?;
        let mut out = self.moments_on_grid(query.t, &query.xi, &grid, &self.resolution);
        Ok(out.remove(0))
    }

    /// `a*(t, x; xi)`.
    pub fn true_drift(&self, query: &Query) -> Result<Vec<f64>> {
        let m = self.population_moments(query)?;
        Ok(m.drift(&query.x, self.interval.delta_at(query.t)?))
    }

    fn moments_on_grid(&self, t: f64, xi: &[f64], grid: &EvalGrid, res: &TruthResolution) -> Vec<Moments> {
        let half_inv_dt = 0.5 / (self.interval.u - t);
        let half_inv_delta = 0.5 / self.interval.delta();
        match self.law.dim() {
            1 => {
                let cond = self.law.conditional_at(xi);
                let quad = AdaptiveGaussLegendre::new(res.adaptive);
                let (lo, hi) = (self.law.support().lower()[0], self.law.support().upper()[0]);
                let xs: Vec<f64> = grid.iter().map(|x| x[0]).collect();
                xs.par_iter()
                    .map(|&x| {
                        let [d, n] = quad.integrate(lo, hi, |y| {
                            let w = sb_log_weight(half_inv_dt, half_inv_delta, xi, &[x], &[y]).exp() * cond.eval(&[y]);
                            [w, y * w]
                        });
                        Moments {
                            dstar: d,
                            nstar: vec![n],
                        }
                    })
                    .collect()
            }
            _ => {
                let table = self.tensor_table(xi, res);
                let points: Vec<&[f64]> = grid.iter().collect();
                points
                    .par_iter()
                    .map(|x| {
                        let axis = |nodes: &[(f64, f64)], k: usize| -> Vec<f64> {
                            nodes
                                .iter()
                                .map(|&(y, _)| {
                                    (-(y - x[k]).powi(2) * half_inv_dt + (y - xi[k]).powi(2) * half_inv_delta).exp()
                                })
                                .collect()
                        };
                        let g1 = axis(&table.y1, 0);
                        let g2 = axis(&table.y2, 1);
                        let n2len = table.y2.len();
                        let (mut d, mut n1, mut n2) = (0.0, 0.0, 0.0);
                        for (i, &(y1, _)) in table.y1.iter().enumerate() {
                            let row = &table.mass[i * n2len..(i + 1) * n2len];
                            let mut r = 0.0;
                            let mut s = 0.0;
                            for ((&p, &g), &(y2, _)) in row.iter().zip(&g2).zip(&table.y2) {
                                let v = p * g;
                                r += v;
                                s += v * y2;
                            }
                            d += g1[i] * r;
                            n1 += g1[i] * r * y1;
                            n2 += g1[i] * s;
                        }
                        Moments {
                            dstar: d,
                            nstar: vec![n1, n2],
                        }
                    })
                    .collect()
            }
        }
    }

    fn tensor_table(&self, xi: &[f64], res: &TruthResolution) -> TensorTable {
        let rule = GaussLegendre::new(res.tensor_order);
        let b = self.law.support();
        let y1 = composite_nodes(b.lower()[0], b.upper()[0], res.tensor_panels, &rule);
        let y2 = composite_nodes(b.lower()[1], b.upper()[1], res.tensor_panels, &rule);
        let cond = self.law.conditional_at(xi);
        let mut mass = Vec::with_capacity(y1.len() * y2.len());
        for &(a, wa) in &y1 {
            for &(c, wc) in &y2 {
                mass.push(wa * wc * cond.eval(&[a, c]));
            }
        }
        TensorTable { y1, y2, mass }
    }

    fn cache_at_resolution(
        &self,
        t: f64,
        xi: &[f64],
        grid: &EvalGrid,
        res: &TruthResolution,
    ) -> Result<(Vec<f64>, Vec<f64>, Vec<f64>)> {
        let dt = self.interval.delta_at(t)?;
        let moments = self.moments_on_grid(t, xi, grid, res);
        let d = self.law.dim();
        let mut dstar = Vec::with_capacity(grid.len());
        let mut nstar = Vec::with_capacity(grid.len() * d);
        let mut astar = Vec::with_capacity(grid.len() * d);
        for (m, x) in moments.iter().zip(grid.iter()) {
            if !(m.dstar > 0.0) {
                return Err(Error::Undefined(format!(
                    "population denominator vanished at x = {x:?}"
                )));
            }
            dstar.push(m.dstar);
            nstar.extend_from_slice(&m.nstar);
            astar.extend(m.drift(x, dt));
        }
        Ok((dstar, nstar, astar))
    }

    /// Tabulates the truth on `grid` at `(t, xi)` without rejecting on the
    /// refinement check; the change is recorded on the cache.
    pub fn tabulate(&self, t: f64, xi: &[f64], grid: &EvalGrid) -> Result<TruthCache> {
        self.interval.check_theory_time(t)?;
        self.check_conditioning(xi)?;
        if grid.dim() != self.law.dim() {
            return Err(Error::invalid("grid dimension does not match the law"));
        }
        let (dstar, nstar, astar) = self.cache_at_resolution(t, xi, grid, &self.resolution)?;
        let (d2, n2, a2) = self.cache_at_resolution(t, xi, grid, &self.resolution.doubled())?;
        let refinement_error = max_abs_change(&dstar, &d2)
            .max(max_abs_change(&nstar, &n2))
            .max(max_abs_change(&astar, &a2));
        Ok(TruthCache {
            t,
            xi: xi.to_vec(),
            grid: grid.clone(),
            dstar,
            nstar,
            astar,
            refinement_error: Some(refinement_error),
        })
    }

    /// Tabulates and accepts the cache only if one refinement step changes
    /// it by at most [`TRUTH_TOLERANCE`].
    pub fn build_truth_cache(&self, t: f64, xi: &[f64], grid: &EvalGrid) -> Result<TruthCache> {
        let cache = self.tabulate(t, xi, grid)?;
        let err = cache.refinement_error.unwrap_or(f64::INFINITY);
        if !(err <= TRUTH_TOLERANCE) {
            return Err(Error::TruthNotConverged {
                error: err,
                tolerance: TRUTH_TOLERANCE,
            });
        }
        Ok(cache)
    }
}

fn max_abs_change(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(p, q)| (p - q).abs()).fold(0.0, f64::max)
}

/// Truth values `D*`, `N*`, `a*` on an evaluation grid at fixed `(t, xi)`.
#[derive(Debug, Clone, PartialEq)]
pub struct TruthCache {
    pub t: f64,
    pub xi: Vec<f64>,
    pub grid: EvalGrid,
    pub dstar: Vec<f64>,
    /// Flat `n x d`.
    pub nstar: Vec<f64>,
    /// Flat `n x d`.
    pub astar: Vec<f64>,
    /// Maximum change under one refinement step; `None` when loaded from disk.
    pub refinement_error: Option<f64>,
}

impl TruthCache {
    pub fn len(&self) -> usize {
        self.dstar.len()
    }

    pub fn is_empty(&self) -> bool {
        self.dstar.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.grid.dim()
    }

    pub fn astar_at(&self, i: usize) -> &[f64] {
        let d = self.dim();
        &self.astar[i * d..(i + 1) * d]
    }

    pub fn nstar_at(&self, i: usize) -> &[f64] {
        let d = self.dim();
        &self.nstar[i * d..(i + 1) * d]
    }

    pub fn min_dstar(&self) -> f64 {
        self.dstar.iter().copied().fold(f64::INFINITY, f64::min)
    }

    fn header(d: usize) -> Vec<String> {
        let cols = |name: &str| -> Vec<String> {
            if d == 1 {
                vec![name.to_string()]
            } else {
                (1..=d).map(|k| format!("{name}{k}")).collect()
            }
        };
        let mut h = vec!["t".to_string()];
        h.extend(cols("x"));
        h.extend(cols("xi"));
        h.push("dstar".into());
        h.extend(cols("nstar"));
        h.extend(cols("astar"));
        h
    }

    /// Writes columns `t, x.., xi.., dstar, nstar.., astar..`.
    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let d = self.dim();
        let mut w = csv::Writer::from_path(path)?;
        w.write_record(Self::header(d))?;
        for i in 0..self.len() {
            let mut row = vec![self.t.to_string()];
            row.extend(self.grid.point(i).iter().map(f64::to_string));
            row.extend(self.xi.iter().map(f64::to_string));
            row.push(self.dstar[i].to_string());
            row.extend(self.nstar_at(i).iter().map(f64::to_string));
            row.extend(self.astar_at(i).iter().map(f64::to_string));
            w.write_record(&row)?;
        }
        w.flush().map_err(|e| Error::io(path, e))?;
        Ok(())
    }

    pub fn read_csv(path: &Path) -> Result<Self> {
        let mut r = csv::Reader::from_path(path)?;
        let headers = r.headers()?.clone();
        let d = headers.iter().filter(|h| h.starts_with("astar")).count();
        if d == 0 || headers.len() != 2 + 4 * d || headers.iter().collect::<Vec<_>>() != Self::header(d) {
            return Err(Error::invalid(format!(
                "unexpected truth cache header in {}",
                path.display()
            )));
        }
        let parse = |s: &str| -> Result<f64> {
            s.parse::<f64>()
                .map_err(|_| Error::invalid(format!("bad number {s:?} in {}", path.display())))
        };
        let (mut t, mut xi) = (f64::NAN, Vec::new());
        let (mut points, mut dstar, mut nstar, mut astar) = (Vec::new(), Vec::new(), Vec::new(), Vec::new());
        for rec in r.records() {
            let rec = rec?;
            let v: Vec<f64> = rec.iter().map(parse).collect::<Result<_>>()?;
            t = v[0];
            points.extend_from_slice(&v[1..1 + d]);
            xi = v[1 + d..1 + 2 * d].to_vec();
            dstar.push(v[1 + 2 * d]);
            nstar.extend_from_slice(&v[2 + 2 * d..2 + 3 * d]);
            astar.extend_from_slice(&v[2 + 3 * d..2 + 4 * d]);
        }
        Ok(Self {
            t,
            xi,
            grid: EvalGrid::from_points(d, points)?,
            dstar,
            nstar,
            astar,
            refinement_error: None,
        })
    }
}

/// Inputs of the pre-flight check for one testbed.
#[derive(Debug, Clone)]
pub struct PreflightSettings {
    pub t0: f64,
    pub xi0: Vec<f64>,
    pub eval_grid: EvalGrid,
    /// Conditioning points on which the minimum marginal density is taken.
    pub conditioning_grid: EvalGrid,
}

impl PreflightSettings {
    /// Default grids: 200 (or 21x21) evaluation points and a 21-point-per-axis
    /// conditioning grid over the same box.
    pub fn for_dim(dim: usize, t0: f64, xi0: Vec<f64>) -> Result<Self> {
        let eval_grid = EvalGrid::default_for_dim(dim)?;
        let conditioning_grid = match dim {
            1 => EvalGrid::uniform(1, -2.0, 2.0, 21)?,
            _ => EvalGrid::uniform(2, -1.5, 1.5, 21)?,
        };
        Ok(Self {
            t0,
            xi0,
            eval_grid,
            conditioning_grid,
        })
    }
}

/// Marginal densities below this on the conditioning grid are flagged.
pub const LOW_DENSITY_FLAG: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq)]
pub struct PreflightReport {
    pub testbed: String,
    pub f_xi0: f64,
    pub min_f_grid: f64,
    pub min_dstar: f64,
    pub truth_error: f64,
    pub density_positive: bool,
    pub denominator_positive: bool,
    pub truth_converged: bool,
    pub low_density_region: bool,
}

impl PreflightReport {
    pub fn passed(&self) -> bool {
        self.density_positive && self.denominator_positive && self.truth_converged
    }

    /// Estimator floors: half the minimum density and half the minimum denominator.
    pub fn floors(&self) -> crate::estimator::Floors {
        crate::estimator::Floors {
            f_min: 0.5 * self.min_f_grid,
            d_min: 0.5 * self.min_dstar,
        }
    }
}

/// Pre-flight diagnostics and the truth cache at `(t0, xi0)`.
pub fn preflight(
    law: &PairLaw,
    interval: &IntervalSpec,
    settings: &PreflightSettings,
) -> Result<(PreflightReport, TruthCache)> {
    preflight_with(&TruthEngine::new(law, *interval), settings)
}

pub fn preflight_with(engine: &TruthEngine<'_>, settings: &PreflightSettings) -> Result<(PreflightReport, TruthCache)> {
    let law = engine.law();
    let f_xi0 = law.marginal_density(&settings.xi0);
    let min_f_grid = settings
        .conditioning_grid
        .iter()
        .map(|xi| law.marginal_density(xi))
        .fold(f64::INFINITY, f64::min);
    let cache = engine.tabulate(settings.t0, &settings.xi0, &settings.eval_grid)?;
    let min_dstar = cache.min_dstar();
    let truth_error = cache.refinement_error.unwrap_or(f64::INFINITY);
    let report = PreflightReport {
        testbed: law.testbed().to_string(),
        f_xi0,
        min_f_grid,
        min_dstar,
        truth_error,
        density_positive: f_xi0 > 0.0,
        denominator_positive: min_dstar > 0.0,
        truth_converged: truth_error <= TRUTH_TOLERANCE,
        low_density_region: min_f_grid < LOW_DENSITY_FLAG,
    };
    Ok((report, cache))
}
