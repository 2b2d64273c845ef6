//! Pointwise inference for the scalar drift: plug-in asymptotic variance,
//! standardized statistics, Wald intervals and normality diagnostics.

use crate::error::{Error, Result};
use crate::estimator::{estimate_drift, Floors, KernelWindow};
use crate::kernels::KernelSpec;
use crate::models::SampleSet;
use crate::normal;
use crate::truth::{sb_log_weight, IntervalSpec, Query};

/// Two-sided 95% normal critical value.
pub const Z_CRIT_95: f64 = 1.96;
/// 5% critical value of the modified statistic when mean and variance are
/// estimated from the sample.
pub const AD_CRIT_5PCT: f64 = 0.75;
/// 5% critical value of the statistic against a fully specified `N(0,1)`.
pub const AD_CRIT_5PCT_SPECIFIED: f64 = 2.492;
const CDF_LO: f64 = 1e-300;
const CDF_HI: f64 = 1.0 - 1e-16;

/// `Sigma_hat = R(K) / (f_hat Delta(t)^2 D_hat^2) (E_hat[psi^2] - E_hat[psi]^2)` with
/// `psi(y) = (y - x - Delta(t) a_hat) F(t, xi, x, y)` and kernel-weighted
/// conditional moments at bandwidth `h`. Scalar drift only.
pub fn plugin_variance(
    sample: &SampleSet,
    interval: &IntervalSpec,
    query: &Query,
    h: f64,
    floors: &Floors,
) -> Result<f64> {
    if sample.dim() != 1 {
        return Err(Error::NotApplicable("plug-in variance is implemented for d = 1".into()));
    }
    let dt = interval.delta_at(query.t)?;
    let est = estimate_drift(sample, interval, query, h, h, floors)?;
    if est.floor_triggered {
        return Err(Error::NotApplicable(format!(
            "estimator floored at x = {:?} (f_hat = {}, D_hat = {})",
            query.x, est.fhat1, est.dhat
        )));
    }
    let window = KernelWindow::new(sample, &query.xi, h)?;
    let (hi_dt, hi_delta) = (0.5 / dt, 0.5 / interval.delta());
    let shift = query.x[0] + dt * est.value[0];
    let psi = |y: &[f64]| (y[0] - shift) * sb_log_weight(hi_dt, hi_delta, &query.xi, &query.x, y).exp();
    let m1 = window.conditional_mean(psi)?;
    let m2 = window.conditional_mean(|y| psi(y).powi(2))?;
    let rk = KernelSpec::new(1)?.constants().l2_norm_sq;
    let var = (m2 - m1 * m1).max(0.0);
    Ok(rk / (window.fhat() * dt * dt * est.dhat * est.dhat) * var)
}

fn standard_error(sigma_hat: f64, m: usize, h: f64, dim: usize) -> Result<f64> {
    if !(sigma_hat > 0.0) || !sigma_hat.is_finite() {
        return Err(Error::Undefined(format!(
            "variance estimate {sigma_hat} is not positive"
        )));
    }
    if m == 0 || !(h > 0.0) {
        return Err(Error::invalid("need M >= 1 and h > 0"));
    }
    Ok((sigma_hat / (m as f64 * h.powi(dim as i32))).sqrt())
}

/// `Z = sqrt(M h^d) (a_hat - a*) / sqrt(Sigma_hat)`.
pub fn standardized_stat(a_hat: f64, a_star: f64, sigma_hat: f64, m: usize, h: f64, dim: usize) -> Result<f64> {
    Ok((a_hat - a_star) / standard_error(sigma_hat, m, h, dim)?)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ConfidenceInterval {
    pub center: f64,
    pub se: f64,
    pub lo: f64,
    pub hi: f64,
}

impl ConfidenceInterval {
    /// Membership through the standardized distance, so that coverage and
    /// `|Z| <= 1.96` agree exactly.
    pub fn covers(&self, value: f64) -> bool {
        ((self.center - value) / self.se).abs() <= Z_CRIT_95
    }
}

/// `a_hat +- 1.96 sqrt(Sigma_hat / (M h^d))`.
pub fn confidence_interval(a_hat: f64, sigma_hat: f64, m: usize, h: f64, dim: usize) -> Result<ConfidenceInterval> {
    let se = standard_error(sigma_hat, m, h, dim)?;
    Ok(ConfidenceInterval {
        center: a_hat,
        se,
        lo: a_hat - Z_CRIT_95 * se,
        hi: a_hat + Z_CRIT_95 * se,
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AndersonDarling {
    /// `A^2` against the fully specified `N(0,1)`.
    pub statistic: f64,
    /// `A^2 (1 + 0.75/n + 2.25/n^2)` of the sample standardized by its own mean
    /// and deviation; `None` below three values or for a constant sample.
    pub composite: Option<f64>,
    /// `composite > 0.75` when available, else `statistic > 2.492`.
    pub reject_5pct: bool,
    /// Set when some `Phi(z)` hit the clamp.
    pub clamped: bool,
}

fn ad_sum(sorted: &[f64], clamped: &mut bool) -> f64 {
    let mut clamp = |p: f64| {
        if !(CDF_LO..=CDF_HI).contains(&p) {
            *clamped = true;
        }
        p.clamp(CDF_LO, CDF_HI)
    };
    let lower: Vec<f64> = sorted.iter().map(|&v| clamp(normal::cdf(v)).ln()).collect();
    let upper: Vec<f64> = sorted.iter().map(|&v| (1.0 - clamp(normal::cdf(v))).ln()).collect();
    let n = sorted.len();
    let s: f64 = (0..n).map(|i| (2 * i + 1) as f64 * (lower[i] + upper[n - 1 - i])).sum();
    -(n as f64) - s / n as f64
}

/// `A^2 = -n - 1/n sum_i (2i-1)[ln Phi(z_(i)) + ln(1 - Phi(z_(n+1-i)))]`.
///
/// The reject flag comes from the standardized form, whose null distribution
/// has its 5% point at 0.75; against the fixed `N(0,1)` the 5% point is 2.492.
pub fn anderson_darling(z: &[f64]) -> Result<AndersonDarling> {
    if z.is_empty() {
        return Err(Error::invalid("Anderson-Darling needs at least one value"));
    }
    if z.iter().any(|v| !v.is_finite()) {
        return Err(Error::invalid("Anderson-Darling input is not finite"));
    }
    let mut sorted = z.to_vec();
    sorted.sort_by(f64::total_cmp);
    let mut clamped = false;
    let statistic = ad_sum(&sorted, &mut clamped);
    let n = sorted.len() as f64;
    let composite = match mean_var(&sorted) {
        Ok((m, v)) if sorted.len() >= 3 && v > 0.0 => {
            let sd = v.sqrt();
            let std: Vec<f64> = sorted.iter().map(|x| (x - m) / sd).collect();
            Some(ad_sum(&std, &mut clamped) * (1.0 + 0.75 / n + 2.25 / (n * n)))
        }
        _ => None,
    };
    let reject_5pct = match composite {
        Some(c) => c > AD_CRIT_5PCT,
        None => statistic > AD_CRIT_5PCT_SPECIFIED,
    };
    Ok(AndersonDarling {
        statistic,
        composite,
        reject_5pct,
        clamped,
    })
}

/// `(Phi^{-1}((i - 1/2)/n), z_(i))` pairs.
pub fn qq_data(z: &[f64]) -> Result<Vec<(f64, f64)>> {
    if z.len() < 2 {
        return Err(Error::invalid("QQ data needs at least two values"));
    }
    let mut sorted = z.to_vec();
    sorted.sort_by(f64::total_cmp);
    let n = sorted.len() as f64;
    Ok(sorted
        .into_iter()
        .enumerate()
        .map(|(i, v)| (normal::quantile((i as f64 + 0.5) / n), v))
        .collect())
}

/// Least-squares slope of `ys` on `xs`.
pub fn ols_slope(xs: &[f64], ys: &[f64]) -> Result<f64> {
    if xs.len() != ys.len() || xs.len() < 2 {
        return Err(Error::invalid("slope needs two or more paired values"));
    }
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
    if !(sxx > 0.0) {
        return Err(Error::Undefined("abscissae are all equal".into()));
    }
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    Ok(sxy / sxx)
}

/// Log-log secant slope of `(log M / M)^{2/(4+d)}` between `m1` and `m2`.
pub fn theory_secant_slope(m1: usize, m2: usize, dim: usize) -> Result<f64> {
    if m1 < 2 || m2 <= m1 || dim == 0 {
        return Err(Error::invalid("need 2 <= M1 < M2 and d >= 1"));
    }
    let p = 2.0 / (4.0 + dim as f64);
    let (a, b) = (m1 as f64, m2 as f64);
    Ok(-p + p * (b.ln() / a.ln()).ln() / (b / a).ln())
}

/// Mean and unbiased variance.
pub fn mean_var(v: &[f64]) -> Result<(f64, f64)> {
    if v.len() < 2 {
        return Err(Error::invalid("need at least two values"));
    }
    let n = v.len() as f64;
    let mean = v.iter().sum::<f64>() / n;
    let var = v.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / (n - 1.0);
    Ok((mean, var))
}

/// One replicate at the CLT query.
#[derive(Debug, Clone, PartialEq, serde::Serialize)]
pub struct CltRecord {
    pub h: f64,
    pub a_hat: f64,
    pub a_star: f64,
    pub sigma_hat: f64,
    pub z: f64,
    pub ci_lo: f64,
    pub ci_hi: f64,
    pub covered: bool,
}

impl CltRecord {
    pub fn build(a_hat: f64, a_star: f64, sigma_hat: f64, m: usize, h: f64) -> Result<Self> {
        let ci = confidence_interval(a_hat, sigma_hat, m, h, 1)?;
        let z = standardized_stat(a_hat, a_star, sigma_hat, m, h, 1)?;
        Ok(Self {
            h,
            a_hat,
            a_star,
            sigma_hat,
            z,
            ci_lo: ci.lo,
            ci_hi: ci.hi,
            covered: ci.covers(a_star),
        })
    }
}

#[derive(Debug, Clone, PartialEq, serde::Serialize)]
pub struct CltSummary {
    pub mean_z: f64,
    pub var_z: f64,
    pub coverage_pct: f64,
    /// Standardized statistic behind `ad_reject`.
    pub ad_stat: f64,
    pub ad_reject: bool,
    /// Statistic against the fixed `N(0,1)`.
    pub ad_stat_specified: f64,
    pub ad_clamped: bool,
}

pub fn summarize_clt(records: &[CltRecord]) -> Result<CltSummary> {
    let z: Vec<f64> = records.iter().map(|r| r.z).collect();
    let (mean_z, var_z) = mean_var(&z)?;
    let ad = anderson_darling(&z)?;
    let covered = records.iter().filter(|r| r.covered).count();
    Ok(CltSummary {
        mean_z,
        var_z,
        coverage_pct: 100.0 * covered as f64 / records.len() as f64,
        ad_stat: ad.composite.unwrap_or(f64::NAN),
        ad_reject: ad.reject_5pct,
        ad_stat_specified: ad.statistic,
        ad_clamped: ad.clamped,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::truth::sb_weight;
    use proptest::prelude::*;

    #[test]
    fn ad_single_zero() {
        let ad = anderson_darling(&[0.0]).unwrap();
        assert!((ad.statistic - (-1.0 + 2.0 * std::f64::consts::LN_2)).abs() < 1e-15);
        assert!((ad.statistic - 0.386_294).abs() < 1e-6);
        assert!(!ad.reject_5pct && !ad.clamped && ad.composite.is_none());
    }

    #[test]
    fn ad_clamps_extreme_values() {
        let ad = anderson_darling(&[-40.0, 0.0, 40.0]).unwrap();
        assert!(ad.clamped && ad.statistic.is_finite());
        assert!(anderson_darling(&[]).is_err());
        assert!(anderson_darling(&[f64::NAN]).is_err());
    }

    #[test]
    fn ad_is_order_invariant() {
        let z = [0.3, -1.2, 2.2, 0.1, -0.4, 0.9];
        let mut r = z;
        r.reverse();
        assert_eq!(anderson_darling(&z).unwrap(), anderson_darling(&r).unwrap());
    }

    // Null rejection rate of the 5% decision on i.i.d. normal samples.
    #[test]
    fn ad_null_rejection_rate() {
        use rand::SeedableRng;
        use rand_distr::{Distribution, StandardNormal};
        let mut rejected = 0;
        let mut specified = 0;
        for seed in 0..100 {
            let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
            let z: Vec<f64> = (0..300).map(|_| StandardNormal.sample(&mut rng)).collect();
            let ad = anderson_darling(&z).unwrap();
            rejected += ad.reject_5pct as usize;
            specified += (ad.statistic > AD_CRIT_5PCT_SPECIFIED) as usize;
        }
        assert!(rejected <= 10, "{rejected}");
        assert!(specified <= 10, "{specified}");
    }

    #[test]
    fn ad_detects_shift() {
        let q = qq_data(&(0..400).map(|i| i as f64).collect::<Vec<_>>()).unwrap();
        let z: Vec<f64> = q.iter().map(|p| p.0).collect();
        assert!(!anderson_darling(&z).unwrap().reject_5pct);
        let shifted: Vec<f64> = z.iter().map(|v| v + 0.5).collect();
        assert!(anderson_darling(&shifted).unwrap().statistic > AD_CRIT_5PCT_SPECIFIED);
        let skewed: Vec<f64> = (0..400).map(|i| -(1.0 - (i as f64 + 0.5) / 400.0).ln()).collect();
        assert!(anderson_darling(&skewed).unwrap().reject_5pct);
    }

    #[test]
    fn secant_slopes() {
        assert!((theory_secant_slope(1000, 8000, 1).unwrap() + 0.349_379).abs() < 1e-6);
        assert!((theory_secant_slope(1000, 8000, 2).unwrap() + 0.291_150).abs() < 1e-6);
        assert!(theory_secant_slope(1000, 1000, 1).is_err());
    }

    #[test]
    fn ols_recovers_line() {
        let xs = [1.0, 2.0, 4.0, 8.0];
        let ys: Vec<f64> = xs.iter().map(|x| 3.0 - 0.4 * x).collect();
        assert!((ols_slope(&xs, &ys).unwrap() + 0.4).abs() < 1e-14);
        assert!(ols_slope(&[1.0, 1.0], &[0.0, 1.0]).is_err());
    }

    #[test]
    fn ci_width_and_zero_variance() {
        let ci = confidence_interval(0.3, 0.5, 2000, 0.2, 1).unwrap();
        let w = 2.0 * 1.96 * (0.5f64 / (2000.0 * 0.2)).sqrt();
        assert!((ci.hi - ci.lo - w).abs() < 1e-14);
        assert!(confidence_interval(0.3, 0.0, 2000, 0.2, 1).is_err());
        assert!(standardized_stat(0.3, 0.1, 0.0, 2000, 0.2, 1).is_err());
    }

    proptest! {
        #[test]
        fn coverage_iff_small_z(a in -5.0f64..5.0, b in -5.0f64..5.0, s in 1e-4f64..10.0, m in 10usize..10_000, h in 0.01f64..1.0) {
            let r = CltRecord::build(a, b, s, m, h).unwrap();
            prop_assert_eq!(r.covered, r.z.abs() <= Z_CRIT_95);
        }
    }

    fn sample(xs: Vec<f64>, xu: Vec<f64>) -> SampleSet {
        SampleSet::new(1, xs, xu).unwrap()
    }

    fn pseudo_sample(n: usize, scale: f64) -> SampleSet {
        let xs: Vec<f64> = (0..n)
            .map(|i| -1.0 + 2.0 * ((i * 37 % n) as f64 + 0.5) / n as f64)
            .collect();
        let xu: Vec<f64> = (0..n)
            .map(|i| scale * (0.7 * xs[i] + 0.3 + 0.35 * ((i * 53 % 97) as f64 / 48.0 - 1.0)))
            .collect();
        sample(xs, xu)
    }

    // Direct recomputation from the defining sums.
    #[test]
    fn variance_matches_direct_sums() {
        let iv = IntervalSpec::default();
        let s = pseudo_sample(500, 1.0);
        let q = Query::new(0.6, vec![0.1], vec![0.0]);
        let h = 0.4;
        let got = plugin_variance(&s, &iv, &q, h, &Floors::NONE).unwrap();
        let k = |v: f64| if v.abs() <= 1.0 { 0.75 * (1.0 - v * v) } else { 0.0 };
        let (mut f, mut g1, mut g2) = (0.0, 0.0, 0.0);
        let n = s.len() as f64;
        for i in 0..s.len() {
            let w = k(s.source(i)[0] / h) / h;
            let fw = sb_weight(&iv, 0.6, &[0.0], &[0.1], s.target(i)).unwrap();
            f += w / n;
            g1 += w * fw / n;
            g2 += w * fw * s.target(i)[0] / n;
        }
        let dhat = g1 / f;
        let qhat = g2 / g1;
        let (mut e1, mut e2) = (0.0, 0.0);
        for i in 0..s.len() {
            let w = k(s.source(i)[0] / h) / h;
            let y = s.target(i)[0];
            let psi = (y - qhat) * sb_weight(&iv, 0.6, &[0.0], &[0.1], &[y]).unwrap();
            e1 += w * psi / n / f;
            e2 += w * psi * psi / n / f;
        }
        let want = 0.6 / (f * 0.16 * dhat * dhat) * (e2 - e1 * e1);
        assert!((got - want).abs() <= 1e-10 * want, "{got} vs {want}");
    }

    // With t = s and x = xi = 0 the weight is identically one.
    #[test]
    fn variance_scales_quadratically_with_targets() {
        let iv = IntervalSpec::default();
        let q = Query::new(iv.s, vec![0.0], vec![0.0]);
        let base = plugin_variance(&pseudo_sample(400, 1.0), &iv, &q, 0.5, &Floors::NONE).unwrap();
        let c = 2.5;
        let scaled = plugin_variance(&pseudo_sample(400, c), &iv, &q, 0.5, &Floors::NONE).unwrap();
        assert!((scaled / base - c * c).abs() < 1e-10);
    }

    #[test]
    fn variance_needs_support_and_scalar_drift() {
        let iv = IntervalSpec::default();
        let s = sample(vec![5.0], vec![0.0]);
        let q = Query::new(0.6, vec![0.0], vec![0.0]);
        assert!(matches!(
            plugin_variance(&s, &iv, &q, 0.3, &Floors::NONE),
            Err(Error::NotApplicable(_))
        ));
        let s2 = SampleSet::new(2, vec![0.0; 2], vec![0.0; 2]).unwrap();
        let q2 = Query::new(0.6, vec![0.0; 2], vec![0.0; 2]);
        assert!(plugin_variance(&s2, &iv, &q2, 0.3, &Floors::NONE).is_err());
    }
}
