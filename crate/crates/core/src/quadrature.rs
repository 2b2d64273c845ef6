//! Gauss–Legendre rules: fixed, composite and adaptive panels.

use std::f64::consts::PI;

/// Nodes and weights of an `n`-point Gauss–Legendre rule on `[-1, 1]`.
#[derive(Debug, Clone)]
pub struct GaussLegendre {
    nodes: Vec<f64>,
    weights: Vec<f64>,
}

impl GaussLegendre {
    /// Builds the rule by Newton iteration on `P_n`.
    pub fn new(n: usize) -> Self {
        assert!(n >= 1, "Gauss-Legendre order must be positive");
        let mut nodes = vec![0.0; n];
        let mut weights = vec![0.0; n];
        let m = n.div_ceil(2);
        for i in 0..m {
            let mut x = (PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
            let mut dp = 0.0;
            for _ in 0..100 {
                let (p, d) = legendre_with_derivative(n, x);
                dp = d;
                let dx = p / d;
                x -= dx;
                if dx.abs() < 1e-16 {
                    break;
                }
            }
            let (_, d) = legendre_with_derivative(n, x);
            if d != 0.0 {
                dp = d;
            }
            let w = 2.0 / ((1.0 - x * x) * dp * dp);
            nodes[i] = -x;
            nodes[n - 1 - i] = x;
            weights[i] = w;
            weights[n - 1 - i] = w;
        }
        if n % 2 == 1 {
            nodes[n / 2] = 0.0;
        }
        Self { nodes, weights }
    }

    pub fn order(&self) -> usize {
        self.nodes.len()
    }

    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    /// Nodes and weights mapped to `[a, b]`.
    pub fn mapped(&self, a: f64, b: f64) -> impl Iterator<Item = (f64, f64)> + '_ {
        let half = 0.5 * (b - a);
        let mid = 0.5 * (a + b);
        self.nodes
            .iter()
            .zip(&self.weights)
            .map(move |(&x, &w)| (mid + half * x, half * w))
    }

    pub fn integrate(&self, a: f64, b: f64, mut f: impl FnMut(f64) -> f64) -> f64 {
        self.mapped(a, b).map(|(x, w)| w * f(x)).sum()
    }

    /// Vector-valued integral over one panel.
    pub fn integrate_vec<const N: usize>(&self, a: f64, b: f64, f: &mut impl FnMut(f64) -> [f64; N]) -> [f64; N] {
        let mut acc = [0.0; N];
        for (x, w) in self.mapped(a, b) {
            let v = f(x);
            for k in 0..N {
                acc[k] += w * v[k];
            }
        }
        acc
    }
}

fn legendre_with_derivative(n: usize, x: f64) -> (f64, f64) {
    let mut p0 = 1.0;
    let mut p1 = x;
    for k in 2..=n {
        let kf = k as f64;
        let p2 = ((2.0 * kf - 1.0) * x * p1 - (kf - 1.0) * p0) / kf;
        p0 = p1;
        p1 = p2;
    }
    if n == 0 {
        return (1.0, 0.0);
    }
    let d = n as f64 * (x * p1 - p0) / (x * x - 1.0);
    (p1, d)
}

/// Composite rule: `panels` equal panels of the given order, flattened to
/// `(node, weight)` pairs on `[a, b]`.
pub fn composite_nodes(a: f64, b: f64, panels: usize, rule: &GaussLegendre) -> Vec<(f64, f64)> {
    let width = (b - a) / panels as f64;
    let mut out = Vec::with_capacity(panels * rule.order());
    for p in 0..panels {
        let lo = a + width * p as f64;
        let hi = if p + 1 == panels { b } else { lo + width };
        out.extend(rule.mapped(lo, hi));
    }
    out
}

/// Settings of the adaptive panel integrator.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AdaptiveSettings {
    pub order: usize,
    pub initial_panels: usize,
    /// Relative change between a panel and its two halves that stops splitting.
    pub rel_tol: f64,
    pub abs_tol: f64,
    pub max_depth: u32,
}

impl Default for AdaptiveSettings {
    fn default() -> Self {
        Self {
            order: 32,
            initial_panels: 12,
            rel_tol: 1e-10,
            abs_tol: 1e-15,
            max_depth: 24,
        }
    }
}

impl AdaptiveSettings {
    /// Twice the order and twice the starting panels.
    pub fn doubled(&self) -> Self {
        Self {
            order: self.order * 2,
            initial_panels: self.initial_panels * 2,
            ..*self
        }
    }
}

/// Adaptive Gauss–Legendre integration of a vector-valued integrand.
pub struct AdaptiveGaussLegendre {
    rule: GaussLegendre,
    settings: AdaptiveSettings,
}

impl AdaptiveGaussLegendre {
    pub fn new(settings: AdaptiveSettings) -> Self {
        Self {
            rule: GaussLegendre::new(settings.order),
            settings,
        }
    }

    pub fn settings(&self) -> &AdaptiveSettings {
        &self.settings
    }

    pub fn integrate<const N: usize>(&self, a: f64, b: f64, mut f: impl FnMut(f64) -> [f64; N]) -> [f64; N] {
        let panels = self.settings.initial_panels.max(1);
        let width = (b - a) / panels as f64;
        let mut total = [0.0; N];
        for p in 0..panels {
            let lo = a + width * p as f64;
            let hi = if p + 1 == panels { b } else { lo + width };
            let whole = self.rule.integrate_vec(lo, hi, &mut f);
            let v = self.refine(lo, hi, whole, 0, &mut f);
            for k in 0..N {
                total[k] += v[k];
            }
        }
        total
    }

    fn refine<const N: usize>(
        &self,
        a: f64,
        b: f64,
        whole: [f64; N],
        depth: u32,
        f: &mut impl FnMut(f64) -> [f64; N],
    ) -> [f64; N] {
        let mid = 0.5 * (a + b);
        let left = self.rule.integrate_vec(a, mid, f);
        let right = self.rule.integrate_vec(mid, b, f);
        let mut split = [0.0; N];
        let mut converged = true;
        for k in 0..N {
            split[k] = left[k] + right[k];
            let tol = self.settings.abs_tol.max(self.settings.rel_tol * split[k].abs());
            if (split[k] - whole[k]).abs() > tol {
                converged = false;
            }
        }
        if converged || depth >= self.settings.max_depth {
            return split;
        }
        let l = self.refine(a, mid, left, depth + 1, f);
        let r = self.refine(mid, b, right, depth + 1, f);
        let mut out = [0.0; N];
        for k in 0..N {
            out[k] = l[k] + r[k];
        }
        out
    }
}
