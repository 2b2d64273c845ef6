//! Synthetic pair laws on a bounded support box.
//!
//! Each law is a (mixture of) truncated normal source `X_s` and a truncated
//! normal conditional `X_u | X_s = xi` whose mean is affine in `xi`. Mixture
//! conditionals pick the first component with the logistic gate
//! `pi(xi) = sigma(alpha_0 + alpha^T xi)`. Truncation is to the full box: a
//! draw outside the box is rejected and redrawn.

use std::fmt;
use std::str::FromStr;

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::normal;
use crate::quadrature::{composite_nodes, GaussLegendre};

/// Rejection attempts allowed for a single truncated draw.
pub const MAX_REJECTION_ATTEMPTS: usize = 1_000_000;

/// The four configured testbeds.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Testbed {
    GG1,
    GG2,
    MM1,
    MM2,
}

impl Testbed {
    pub const ALL: [Testbed; 4] = [Testbed::GG1, Testbed::GG2, Testbed::MM1, Testbed::MM2];

    pub fn dim(self) -> usize {
        match self {
            Testbed::GG1 | Testbed::MM1 => 1,
            Testbed::GG2 | Testbed::MM2 => 2,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Testbed::GG1 => "GG1",
            Testbed::GG2 => "GG2",
            Testbed::MM1 => "MM1",
            Testbed::MM2 => "MM2",
        }
    }
}

impl fmt::Display for Testbed {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Testbed {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "GG1" => Ok(Testbed::GG1),
            "GG2" => Ok(Testbed::GG2),
            "MM1" => Ok(Testbed::MM1),
            "MM2" => Ok(Testbed::MM2),
            other => Err(Error::invalid(format!("unknown testbed {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Variant {
    #[default]
    Compact,
    Wide,
}

impl Variant {
    pub fn name(self) -> &'static str {
        match self {
            Variant::Compact => "compact",
            Variant::Wide => "wide",
        }
    }
}

impl fmt::Display for Variant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Variant {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "compact" => Ok(Variant::Compact),
            "wide" => Ok(Variant::Wide),
            other => Err(Error::invalid(format!("unknown variant {other:?}"))),
        }
    }
}

/// Axis-aligned box `[lower, upper]`.
#[derive(Debug, Clone, PartialEq)]
pub struct SupportBox {
    lower: Vec<f64>,
    upper: Vec<f64>,
}

impl SupportBox {
    pub fn new(lower: Vec<f64>, upper: Vec<f64>) -> Result<Self> {
        if lower.is_empty() || lower.len() != upper.len() {
            return Err(Error::invalid("box bounds must be nonempty and of equal length"));
        }
        if lower.iter().zip(&upper).any(|(l, u)| !(l < u)) {
            return Err(Error::invalid("box requires lower < upper on every axis"));
        }
        Ok(Self { lower, upper })
    }

    /// `[-r, r]^d`.
    pub fn cube(dim: usize, radius: f64) -> Result<Self> {
        Self::new(vec![-radius; dim], vec![radius; dim])
    }

    pub fn dim(&self) -> usize {
        self.lower.len()
    }

    pub fn lower(&self) -> &[f64] {
        &self.lower
    }

    pub fn upper(&self) -> &[f64] {
        &self.upper
    }

    pub fn contains(&self, p: &[f64]) -> bool {
        p.len() == self.dim()
            && p.iter()
                .zip(self.lower.iter().zip(&self.upper))
                .all(|(x, (l, u))| *l <= *x && *x <= *u)
    }

    pub fn strictly_contains(&self, other: &SupportBox) -> bool {
        self.dim() == other.dim()
            && (0..self.dim()).all(|i| self.lower[i] < other.lower[i] && other.upper[i] < self.upper[i])
    }

    /// `C_Y = sup_{y in B} |y|`.
    pub fn max_norm(&self) -> f64 {
        self.lower
            .iter()
            .zip(&self.upper)
            .map(|(l, u)| l.abs().max(u.abs()).powi(2))
            .sum::<f64>()
            .sqrt()
    }

    pub fn diameter(&self) -> f64 {
        self.lower
            .iter()
            .zip(&self.upper)
            .map(|(l, u)| (u - l).powi(2))
            .sum::<f64>()
            .sqrt()
    }
}

/// Symmetric positive definite covariance of dimension 1 or 2, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct Covariance {
    dim: usize,
    cov: Vec<f64>,
    chol: Vec<f64>,
    inv: Vec<f64>,
    log_det: f64,
}

impl Covariance {
    pub fn new(dim: usize, cov: Vec<f64>) -> Result<Self> {
        if !(dim == 1 || dim == 2) || cov.len() != dim * dim {
            return Err(Error::invalid("covariance must be 1x1 or 2x2"));
        }
        match dim {
            1 => {
                let v = cov[0];
                if !(v > 0.0) {
                    return Err(Error::invalid("variance must be positive"));
                }
                Ok(Self {
                    dim,
                    chol: vec![v.sqrt()],
                    inv: vec![1.0 / v],
                    log_det: v.ln(),
                    cov,
                })
            }
            _ => {
                let (a, b, c, d) = (cov[0], cov[1], cov[2], cov[3]);
                if (b - c).abs() > 1e-14 * (a.abs() + d.abs()) {
                    return Err(Error::invalid("covariance must be symmetric"));
                }
                let det = a * d - b * c;
                if !(a > 0.0) || !(det > 0.0) {
                    return Err(Error::invalid("covariance must be positive definite"));
                }
                let l11 = a.sqrt();
                let l21 = b / l11;
                let l22 = (d - l21 * l21).sqrt();
                Ok(Self {
                    dim,
                    chol: vec![l11, 0.0, l21, l22],
                    inv: vec![d / det, -b / det, -c / det, a / det],
                    log_det: det.ln(),
                    cov,
                })
            }
        }
    }

    pub fn diagonal(variances: &[f64]) -> Result<Self> {
        match variances {
            [v] => Self::new(1, vec![*v]),
            [v1, v2] => Self::new(2, vec![*v1, 0.0, 0.0, *v2]),
            _ => Err(Error::invalid("covariance must be 1x1 or 2x2")),
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn matrix(&self) -> &[f64] {
        &self.cov
    }

    fn is_diagonal(&self) -> bool {
        self.dim == 1 || self.cov[1] == 0.0
    }

    fn variance(&self, i: usize) -> f64 {
        self.cov[i * self.dim + i]
    }

    /// Untruncated normal density at `y` with mean `mean`.
    fn density(&self, y: &[f64], mean: &[f64]) -> f64 {
        let quad = match self.dim {
            1 => {
                let r = y[0] - mean[0];
                r * r * self.inv[0]
            }
            _ => {
                let r0 = y[0] - mean[0];
                let r1 = y[1] - mean[1];
                r0 * r0 * self.inv[0] + 2.0 * r0 * r1 * self.inv[1] + r1 * r1 * self.inv[3]
            }
        };
        (-0.5 * (quad + self.log_det + self.dim as f64 * normal::log_2pi())).exp()
    }

    /// `P(N(mean, cov) in box)`.
    fn box_probability(&self, mean: &[f64], bx: &SupportBox) -> f64 {
        let axis = |i: usize| {
            let sd = self.variance(i).sqrt();
            normal::interval_probability((bx.lower[i] - mean[i]) / sd, (bx.upper[i] - mean[i]) / sd)
        };
        if self.is_diagonal() {
            return (0..self.dim).map(axis).product();
        }
        // Integrate the first coordinate against the conditional law of the second.
        let (s11, s12, s22) = (self.cov[0], self.cov[1], self.cov[3]);
        let sd1 = s11.sqrt();
        let cond_sd = (s22 - s12 * s12 / s11).sqrt();
        let lo = bx.lower[0].max(mean[0] - 12.0 * sd1);
        let hi = bx.upper[0].min(mean[0] + 12.0 * sd1);
        if hi <= lo {
            return 0.0;
        }
        let rule = GaussLegendre::new(24);
        composite_nodes(lo, hi, 16, &rule)
            .into_iter()
            .map(|(y1, w)| {
                let cond_mean = mean[1] + s12 / s11 * (y1 - mean[0]);
                let p2 = normal::interval_probability(
                    (bx.lower[1] - cond_mean) / cond_sd,
                    (bx.upper[1] - cond_mean) / cond_sd,
                );
                w * normal::pdf((y1 - mean[0]) / sd1) / sd1 * p2
            })
            .sum()
    }

    /// Writes `mean + L z` into `out`, with `z` standard normal.
    fn draw_into<R: Rng + ?Sized>(&self, mean: &[f64], rng: &mut R, out: &mut [f64]) {
        match self.dim {
            1 => {
                let z: f64 = rng.sample(StandardNormal);
                out[0] = mean[0] + self.chol[0] * z;
            }
            _ => {
                let z0: f64 = rng.sample(StandardNormal);
                let z1: f64 = rng.sample(StandardNormal);
                out[0] = mean[0] + self.chol[0] * z0;
                out[1] = mean[1] + self.chol[2] * z0 + self.chol[3] * z1;
            }
        }
    }
}

/// Truncated normal source component with fixed mean.
#[derive(Debug, Clone)]
struct SourceComponent {
    weight: f64,
    mean: Vec<f64>,
    cov: Covariance,
    normalizer: f64,
}

/// Conditional component `TruncNormal(A xi + b, Sigma; B)`.
#[derive(Debug, Clone)]
pub struct AffineGaussian {
    /// Row-major `d x d`.
    pub a: Vec<f64>,
    pub b: Vec<f64>,
    pub cov: Covariance,
}

impl AffineGaussian {
    fn mean(&self, xi: &[f64]) -> Vec<f64> {
        let d = self.b.len();
        (0..d)
            .map(|i| self.b[i] + (0..d).map(|j| self.a[i * d + j] * xi[j]).sum::<f64>())
            .collect()
    }
}

/// Logistic gate `sigma(alpha_0 + alpha^T xi)`.
#[derive(Debug, Clone, PartialEq)]
pub struct Gate {
    pub intercept: f64,
    pub slope: Vec<f64>,
}

impl Gate {
    pub fn prob(&self, xi: &[f64]) -> f64 {
        let z = self.intercept + self.slope.iter().zip(xi).map(|(a, x)| a * x).sum::<f64>();
        1.0 / (1.0 + (-z).exp())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LawKind {
    GaussianToGaussian,
    MixtureToMixture,
}

/// Joint law of `(X_s, X_u)` on `B x B`.
#[derive(Debug, Clone)]
pub struct PairLaw {
    testbed: Testbed,
    variant: Variant,
    kind: LawKind,
    support: SupportBox,
    source: Vec<SourceComponent>,
    conditional: Vec<AffineGaussian>,
    gate: Option<Gate>,
}

/// `M` i.i.d. pairs stored as flat `M x d` arrays.
#[derive(Debug, Clone, PartialEq)]
pub struct SampleSet {
    dim: usize,
    xs: Vec<f64>,
    xu: Vec<f64>,
}

impl SampleSet {
    pub fn new(dim: usize, xs: Vec<f64>, xu: Vec<f64>) -> Result<Self> {
        if dim == 0 || xs.len() != xu.len() || !xs.len().is_multiple_of(dim) {
            return Err(Error::invalid("sample arrays must be M x d"));
        }
        Ok(Self { dim, xs, xu })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.xs.len() / self.dim
    }

    pub fn is_empty(&self) -> bool {
        self.xs.is_empty()
    }

    pub fn source(&self, m: usize) -> &[f64] {
        &self.xs[m * self.dim..(m + 1) * self.dim]
    }

    pub fn target(&self, m: usize) -> &[f64] {
        &self.xu[m * self.dim..(m + 1) * self.dim]
    }

    pub fn sources(&self) -> &[f64] {
        &self.xs
    }

    pub fn targets(&self) -> &[f64] {
        &self.xu
    }
}

/// A sampled pair with the conditional component that produced `X_u`.
#[derive(Debug, Clone, PartialEq)]
pub struct LabeledPair {
    pub xs: Vec<f64>,
    pub xu: Vec<f64>,
    pub component: usize,
}

/// Conditional density `p(y | xi)` with normalizers resolved for one `xi`.
#[derive(Debug, Clone)]
pub struct ConditionalDensity<'a> {
    law: &'a PairLaw,
    /// `(weight / normalizer, mean)` per component.
    parts: Vec<(f64, Vec<f64>, &'a Covariance)>,
}

impl ConditionalDensity<'_> {
    pub fn eval(&self, y: &[f64]) -> f64 {
        if !self.law.support.contains(y) {
            return 0.0;
        }
        self.parts
            .iter()
            .map(|(scale, mean, cov)| scale * cov.density(y, mean))
            .sum()
    }
}

fn sd2(sd: f64) -> f64 {
    sd * sd
}

impl PairLaw {
    /// Builds one of the configured testbeds. Wide variants exist for GG1 and MM1.
    pub fn new(testbed: Testbed, variant: Variant) -> Result<Self> {
        let wide = variant == Variant::Wide;
        if wide && !matches!(testbed, Testbed::GG1 | Testbed::MM1) {
            return Err(Error::invalid(format!("no wide variant for {testbed}")));
        }
        let radius = if wide { 5.0 } else { 3.0 };
        let support = SupportBox::cube(testbed.dim(), radius)?;
        let one = |v: f64| Covariance::diagonal(&[v]);
        let (kind, source, conditional, gate) = match testbed {
            Testbed::GG1 => (
                LawKind::GaussianToGaussian,
                vec![(1.0, vec![0.0], one(sd2(1.0))?)],
                vec![AffineGaussian {
                    a: vec![0.7],
                    b: vec![0.3],
                    cov: one(sd2(0.35))?,
                }],
                None,
            ),
            Testbed::GG2 => (
                LawKind::GaussianToGaussian,
                vec![(1.0, vec![0.0, 0.0], Covariance::diagonal(&[1.0, 0.8])?)],
                vec![AffineGaussian {
                    a: vec![0.75, 0.15, -0.10, 0.65],
                    b: vec![0.25, -0.20],
                    cov: Covariance::new(2, vec![0.14, 0.03, 0.03, 0.12])?,
                }],
                None,
            ),
            Testbed::MM1 => {
                let (s, s1, s2) = if wide {
                    (sd2(0.8), sd2(0.9), sd2(1.0))
                } else {
                    (sd2(0.45), sd2(0.25), sd2(0.30))
                };
                (
                    LawKind::MixtureToMixture,
                    vec![(0.5, vec![-1.2], one(s)?), (0.5, vec![1.2], one(s)?)],
                    vec![
                        AffineGaussian {
                            a: vec![0.8],
                            b: vec![0.4],
                            cov: one(s1)?,
                        },
                        AffineGaussian {
                            a: vec![-0.5],
                            b: vec![-0.3],
                            cov: one(s2)?,
                        },
                    ],
                    Some(Gate {
                        intercept: 0.0,
                        slope: vec![1.5],
                    }),
                )
            }
            Testbed::MM2 => {
                let s = Covariance::diagonal(&[0.16, 0.16])?;
                (
                    LawKind::MixtureToMixture,
                    vec![(0.5, vec![-0.9, 0.9], s.clone()), (0.5, vec![0.9, -0.9], s)],
                    vec![
                        AffineGaussian {
                            a: vec![0.8, 0.1, 0.0, 0.7],
                            b: vec![0.3, -0.2],
                            cov: Covariance::diagonal(&[0.0484, 0.0324])?,
                        },
                        AffineGaussian {
                            a: vec![-0.4, 0.2, 0.15, -0.6],
                            b: vec![-0.35, 0.25],
                            cov: Covariance::new(2, vec![0.08, 0.02, 0.02, 0.07])?,
                        },
                    ],
                    Some(Gate {
                        intercept: 0.0,
                        slope: vec![1.2, -1.0],
                    }),
                )
            }
        };
        let source = source
            .into_iter()
            .map(|(weight, mean, cov)| {
                let normalizer = cov.box_probability(&mean, &support);
                SourceComponent {
                    weight,
                    mean,
                    cov,
                    normalizer,
                }
            })
            .collect();
        Ok(Self {
            testbed,
            variant,
            kind,
            support,
            source,
            conditional,
            gate,
        })
    }

    /// Parses `name` and `variant` strings as they appear in config files.
    pub fn from_names(name: &str, variant: &str) -> Result<Self> {
        Self::new(name.parse()?, variant.parse()?)
    }

    pub fn testbed(&self) -> Testbed {
        self.testbed
    }

    pub fn variant(&self) -> Variant {
        self.variant
    }

    pub fn kind(&self) -> LawKind {
        self.kind
    }

    pub fn dim(&self) -> usize {
        self.support.dim()
    }

    pub fn support(&self) -> &SupportBox {
        &self.support
    }

    pub fn conditional_components(&self) -> &[AffineGaussian] {
        &self.conditional
    }

    pub fn gate(&self) -> Option<&Gate> {
        self.gate.as_ref()
    }

    /// Source covariances, in component order.
    pub fn source_covariances(&self) -> Vec<&Covariance> {
        self.source.iter().map(|c| &c.cov).collect()
    }

    /// Probability that `X_u` is drawn from the first conditional component.
    pub fn gate_prob(&self, xi: &[f64]) -> f64 {
        self.gate.as_ref().map_or(1.0, |g| g.prob(xi))
    }

    /// Marginal density `f(xi)` of `X_s`; zero outside the box.
    pub fn marginal_density(&self, xi: &[f64]) -> f64 {
        if !self.support.contains(xi) {
            return 0.0;
        }
        self.source
            .iter()
            .map(|c| c.weight / c.normalizer * c.cov.density(xi, &c.mean))
            .sum()
    }

    /// Resolves the truncation normalizers of `p(. | xi)`.
    pub fn conditional_at(&self, xi: &[f64]) -> ConditionalDensity<'_> {
        let pi = self.gate_prob(xi);
        let parts = self
            .conditional
            .iter()
            .enumerate()
            .map(|(k, comp)| {
                let weight = if k == 0 { pi } else { 1.0 - pi };
                let mean = comp.mean(xi);
                let z = comp.cov.box_probability(&mean, &self.support);
                (weight / z, mean, &comp.cov)
            })
            .collect();
        ConditionalDensity { law: self, parts }
    }

    pub fn conditional_density(&self, xi: &[f64], y: &[f64]) -> f64 {
        self.conditional_at(xi).eval(y)
    }

    /// Joint density `f(xi) p(y | xi)`; zero outside `B x B`.
    pub fn joint_density(&self, xi: &[f64], y: &[f64]) -> f64 {
        let f = self.marginal_density(xi);
        if f == 0.0 || !self.support.contains(y) {
            return 0.0;
        }
        f * self.conditional_density(xi, y)
    }

    fn truncated_draw<R: Rng + ?Sized>(&self, cov: &Covariance, mean: &[f64], rng: &mut R) -> Result<Vec<f64>> {
        let mut out = vec![0.0; mean.len()];
        for _ in 0..MAX_REJECTION_ATTEMPTS {
            cov.draw_into(mean, rng, &mut out);
            if self.support.contains(&out) {
                return Ok(out);
            }
        }
        Err(Error::Sampling(format!(
            "no accepted draw within {MAX_REJECTION_ATTEMPTS} attempts"
        )))
    }

    pub fn sample_source<R: Rng + ?Sized>(&self, rng: &mut R) -> Result<Vec<f64>> {
        let comp = if self.source.len() == 1 {
            &self.source[0]
        } else {
            let u: f64 = rng.random();
            let mut acc = 0.0;
            let mut pick = self.source.last().expect("law has a source component");
            for c in &self.source {
                acc += c.weight;
                if u < acc {
                    pick = c;
                    break;
                }
            }
            pick
        };
        self.truncated_draw(&comp.cov, &comp.mean, rng)
    }

    /// Draws `X_u | X_s = xi`, returning the component index used.
    pub fn sample_conditional<R: Rng + ?Sized>(&self, xi: &[f64], rng: &mut R) -> Result<(Vec<f64>, usize)> {
        let k = if self.conditional.len() == 1 {
            0
        } else {
            let u: f64 = rng.random();
            if u < self.gate_prob(xi) {
                0
            } else {
                1
            }
        };
        let comp = &self.conditional[k];
        let y = self.truncated_draw(&comp.cov, &comp.mean(xi), rng)?;
        Ok((y, k))
    }

    pub fn sample_labeled<R: Rng + ?Sized>(&self, rng: &mut R) -> Result<LabeledPair> {
        let xs = self.sample_source(rng)?;
        let (xu, component) = self.sample_conditional(&xs, rng)?;
        Ok(LabeledPair { xs, xu, component })
    }

    /// Draws `m` i.i.d. pairs.
    pub fn sample_dataset<R: Rng + ?Sized>(&self, m: usize, rng: &mut R) -> Result<SampleSet> {
        if m == 0 {
            return Err(Error::invalid("sample size must be positive"));
        }
        let d = self.dim();
        let mut xs = Vec::with_capacity(m * d);
        let mut xu = Vec::with_capacity(m * d);
        for _ in 0..m {
            let pair = self.sample_labeled(rng)?;
            xs.extend_from_slice(&pair.xs);
            xu.extend_from_slice(&pair.xu);
        }
        SampleSet::new(d, xs, xu)
    }
}
