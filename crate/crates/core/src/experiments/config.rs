//! YAML run configuration. Unknown keys are rejected.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::bandwidth::{BandwidthGrid, DEFAULT_H0, DEFAULT_KAPPA, DEFAULT_RATIO};
use crate::error::{Error, Result};
use crate::grid::EvalGrid;
use crate::models::{Testbed, Variant};
use crate::truth::{IntervalSpec, PreflightSettings, Query};

pub const DEFAULT_SEED: u64 = 20_240_601;
pub const STANDARD_M: [usize; 4] = [1000, 2000, 4000, 8000];
pub const DENSE_M: [usize; 7] = [1000, 1500, 2000, 3000, 4000, 6000, 8000];

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub testbeds: Vec<Testbed>,
    #[serde(default)]
    pub variant: Variant,
    #[serde(default = "default_seed")]
    pub seed: u64,
    #[serde(default = "default_output")]
    pub output: PathBuf,
    #[serde(default)]
    pub interval: IntervalConfig,
    /// Per-testbed overrides of the fixed query.
    #[serde(default)]
    pub queries: BTreeMap<Testbed, QueryConfig>,
    #[serde(default)]
    pub grid: GridConfig,
    #[serde(default)]
    pub bandwidth: BandwidthConfig,
    #[serde(default)]
    pub rate: RateConfig,
    #[serde(default)]
    pub clt: CltConfig,
    #[serde(default)]
    pub edge: EdgeConfig,
    #[serde(default)]
    pub stress: StressConfig,
}

fn default_seed() -> u64 {
    DEFAULT_SEED
}

fn default_output() -> PathBuf {
    PathBuf::from("results")
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields, default)]
pub struct IntervalConfig {
    pub s: f64,
    pub u: f64,
    pub eta: f64,
    pub state_radius: f64,
    pub margin: f64,
}

impl Default for IntervalConfig {
    fn default() -> Self {
        let d = IntervalSpec::default();
        Self {
            s: d.s,
            u: d.u,
            eta: d.eta,
            state_radius: d.state_radius,
            margin: d.margin,
        }
    }
}

impl IntervalConfig {
    pub fn spec(&self) -> Result<IntervalSpec> {
        IntervalSpec::new(self.s, self.u, self.eta, self.state_radius, self.margin)
    }
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct QueryConfig {
    pub t0: Option<f64>,
    pub x0: Option<Vec<f64>>,
    pub xi0: Option<Vec<f64>>,
}

/// Fixed query `(t0, x0, xi0)` of a testbed.
#[derive(Debug, Clone, PartialEq)]
pub struct FixedQuery {
    pub t0: f64,
    pub x0: Vec<f64>,
    pub xi0: Vec<f64>,
}

impl FixedQuery {
    pub fn defaults(testbed: Testbed) -> Self {
        let (x0, xi0) = match testbed {
            Testbed::GG1 => (vec![0.2], vec![0.0]),
            Testbed::MM1 => (vec![0.3], vec![0.8]),
            Testbed::GG2 => (vec![0.0, 0.0], vec![0.0, 0.0]),
            Testbed::MM2 => (vec![0.8, -0.8], vec![0.8, -0.8]),
        };
        Self { t0: 0.6, x0, xi0 }
    }

    pub fn query(&self) -> Query {
        Query::new(self.t0, self.x0.clone(), self.xi0.clone())
    }
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields, default)]
pub struct GridConfig {
    pub points_1d: usize,
    pub half_width_1d: f64,
    pub points_2d: usize,
    pub half_width_2d: f64,
}

impl Default for GridConfig {
    fn default() -> Self {
        Self {
            points_1d: 200,
            half_width_1d: 2.0,
            points_2d: 21,
            half_width_2d: 1.5,
        }
    }
}

impl GridConfig {
    pub fn eval_grid(&self, dim: usize) -> Result<EvalGrid> {
        match dim {
            1 => EvalGrid::uniform(1, -self.half_width_1d, self.half_width_1d, self.points_1d),
            2 => EvalGrid::uniform(2, -self.half_width_2d, self.half_width_2d, self.points_2d),
            d => Err(Error::invalid(format!("no evaluation grid for d = {d}"))),
        }
    }
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields, default)]
pub struct BandwidthConfig {
    pub h0: f64,
    pub ratio: f64,
    pub kappa_pair: f64,
    pub kappa_final: f64,
}

impl Default for BandwidthConfig {
    fn default() -> Self {
        Self {
            h0: DEFAULT_H0,
            ratio: DEFAULT_RATIO,
            kappa_pair: DEFAULT_KAPPA,
            kappa_final: DEFAULT_KAPPA,
        }
    }
}

impl BandwidthConfig {
    pub fn grid(&self, m: usize, dim: usize) -> Result<BandwidthGrid> {
        BandwidthGrid::build(m, dim, self.h0, self.ratio)
    }
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize, PartialEq, Default)]
#[serde(rename_all = "lowercase")]
pub enum MPreset {
    /// Four sample sizes from 1000 to 8000.
    #[default]
    Standard,
    /// Seven sample sizes from 1000 to 8000.
    Dense,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq, Default)]
#[serde(deny_unknown_fields, default)]
pub struct RateConfig {
    pub preset: MPreset,
    /// Overrides the preset.
    pub m_list: Option<Vec<usize>>,
    /// Defaults to 25 in one dimension and 10 in two.
    pub reps: Option<usize>,
}

impl RateConfig {
    pub fn sizes(&self) -> Vec<usize> {
        match (&self.m_list, self.preset) {
            (Some(v), _) => v.clone(),
            (None, MPreset::Standard) => STANDARD_M.to_vec(),
            (None, MPreset::Dense) => DENSE_M.to_vec(),
        }
    }

    pub fn reps_for(&self, testbed: Testbed) -> usize {
        self.reps.unwrap_or(if testbed.dim() == 1 { 25 } else { 10 })
    }
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields, default)]
pub struct CltConfig {
    pub m_list: Vec<usize>,
    pub reps: usize,
    pub c: f64,
    /// Defaults to 0.22 for GG1 and 0.28 for MM1.
    pub alpha: Option<f64>,
}

impl Default for CltConfig {
    fn default() -> Self {
        Self {
            m_list: STANDARD_M.to_vec(),
            reps: 150,
            c: 1.0,
            alpha: None,
        }
    }
}

impl CltConfig {
    pub fn alpha_for(&self, testbed: Testbed) -> Result<f64> {
        match (self.alpha, testbed) {
            (Some(a), _) => Ok(a),
            (None, Testbed::GG1) => Ok(0.22),
            (None, Testbed::MM1) => Ok(0.28),
            (None, tb) => Err(Error::Config(format!("no default CLT exponent for {tb}"))),
        }
    }

    /// `h_M = c M^{-alpha}`.
    pub fn bandwidth(&self, testbed: Testbed, m: usize) -> Result<f64> {
        Ok(self.c * (m as f64).powf(-self.alpha_for(testbed)?))
    }
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields, default)]
pub struct EdgeConfig {
    pub m: usize,
    pub reps: usize,
    /// Offsets `u - t` of the evaluation times.
    pub offsets: Vec<f64>,
}

impl Default for EdgeConfig {
    fn default() -> Self {
        Self {
            m: 4000,
            reps: 50,
            offsets: vec![0.40, 0.25, 0.15, 0.10, 0.05],
        }
    }
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields, default)]
pub struct StressConfig {
    pub m: usize,
    pub reps: usize,
}

impl Default for StressConfig {
    fn default() -> Self {
        Self { m: 4000, reps: 50 }
    }
}

impl ExperimentConfig {
    /// Minimal configuration for the given testbeds.
    pub fn for_testbeds(testbeds: &[Testbed]) -> Self {
        Self {
            testbeds: testbeds.to_vec(),
            variant: Variant::Compact,
            seed: DEFAULT_SEED,
            output: default_output(),
            interval: IntervalConfig::default(),
            queries: BTreeMap::new(),
            grid: GridConfig::default(),
            bandwidth: BandwidthConfig::default(),
            rate: RateConfig::default(),
            clt: CltConfig::default(),
            edge: EdgeConfig::default(),
            stress: StressConfig::default(),
        }
    }

    pub fn from_yaml(text: &str) -> Result<Self> {
        let cfg: Self = serde_yaml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_yaml(&text).map_err(|e| match e {
            Error::Config(msg) => Error::Config(format!("{}: {msg}", path.display())),
            other => other,
        })
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::Config(msg));
        if self.testbeds.is_empty() {
            return bad("`testbeds` must list at least one testbed".into());
        }
        self.interval.spec().map_err(|e| Error::Config(e.to_string()))?;
        for tb in &self.testbeds {
            let q = self.query(*tb);
            if q.x0.len() != tb.dim() || q.xi0.len() != tb.dim() {
                return bad(format!("query for {tb} must have {} coordinates", tb.dim()));
            }
        }
        let b = &self.bandwidth;
        if !(b.h0 > 0.0) || !(b.ratio > 0.0 && b.ratio < 1.0) || !(b.kappa_pair >= 0.0) || !(b.kappa_final >= 0.0) {
            return bad("bandwidth needs h0 > 0, 0 < ratio < 1 and nonnegative kappas".into());
        }
        let sizes = self.rate.sizes();
        if sizes.is_empty() || sizes.iter().any(|&m| m < 2) || sizes.windows(2).any(|w| w[0] >= w[1]) {
            return bad("rate sizes must be increasing and at least 2".into());
        }
        if self.rate.reps == Some(0) || self.clt.reps < 2 || self.edge.reps == 0 || self.stress.reps < 2 {
            return bad("repetition counts must be positive (CLT and stress need two)".into());
        }
        if self.clt.m_list.is_empty() || self.clt.m_list.iter().any(|&m| m < 2) || !(self.clt.c > 0.0) {
            return bad("CLT needs sample sizes >= 2 and c > 0".into());
        }
        if let Some(a) = self.clt.alpha {
            if !(a > 0.0 && a < 1.0) {
                return bad(format!("CLT exponent {a} outside (0, 1)"));
            }
        }
        if self.edge.m < 2 || self.stress.m < 2 || self.edge.offsets.len() < 2 {
            return bad("edge and stress need M >= 2 and at least two offsets".into());
        }
        if self.edge.offsets.iter().any(|o| !(*o > 0.0)) {
            return bad("edge offsets must be positive".into());
        }
        for dim in [1, 2] {
            self.grid.eval_grid(dim).map_err(|e| Error::Config(e.to_string()))?;
        }
        Ok(())
    }

    pub fn interval_spec(&self) -> Result<IntervalSpec> {
        self.interval.spec()
    }

    pub fn query(&self, testbed: Testbed) -> FixedQuery {
        let mut q = FixedQuery::defaults(testbed);
        if let Some(o) = self.queries.get(&testbed) {
            if let Some(t0) = o.t0 {
                q.t0 = t0;
            }
            if let Some(x0) = &o.x0 {
                q.x0 = x0.clone();
            }
            if let Some(xi0) = &o.xi0 {
                q.xi0 = xi0.clone();
            }
        }
        q
    }

    pub fn preflight_settings(&self, testbed: Testbed) -> Result<PreflightSettings> {
        let q = self.query(testbed);
        let mut s = PreflightSettings::for_dim(testbed.dim(), q.t0, q.xi0)?;
        s.eval_grid = self.grid.eval_grid(testbed.dim())?;
        Ok(s)
    }

    /// SHA-256 of the canonical JSON form.
    pub fn hash(&self) -> String {
        let json = serde_json::to_vec(self).expect("config serializes");
        hex(&Sha256::digest(json))
    }
}

pub(crate) fn hex(bytes: &[u8]) -> String {
    bytes.iter().map(|b| format!("{b:02x}")).collect()
}
