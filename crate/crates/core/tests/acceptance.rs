//! Exit criteria. Prints one PASS/FAIL line per criterion and exits nonzero
//! if any criterion fails.

use std::path::Path;
use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use sbdrift::estimator::{estimate_drift, estimate_f, estimate_g, ratio_transfer_bound, RatioTransferInputs};
use sbdrift::experiments::{run_clt, run_edge, run_preflight, run_rate, run_stress};
use sbdrift::inference::theory_secant_slope;
use sbdrift::kernels::KernelSpec;
use sbdrift::truth::sb_weight;
use sbdrift::{
    ExperimentConfig, Floors, IntervalSpec, PairLaw, Query, RunOptions, SampleSet, Testbed, TruthEngine, Variant,
};

struct Verdict {
    id: u32,
    name: &'static str,
    checks: Vec<(String, bool)>,
    elapsed: Duration,
}

impl Verdict {
    fn new(id: u32, name: &'static str) -> Self {
        Self {
            id,
            name,
            checks: Vec::new(),
            elapsed: Duration::ZERO,
        }
    }

    fn check(&mut self, what: impl Into<String>, ok: bool) {
        self.checks.push((what.into(), ok));
    }

    fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.1)
    }
}

fn config(dir: &Path, testbeds: &[Testbed]) -> ExperimentConfig {
    let mut c = ExperimentConfig::for_testbeds(testbeds);
    c.output = dir.to_path_buf();
    c
}

fn timed(v: &mut Verdict, limit: Option<Duration>, f: impl FnOnce(&mut Verdict)) {
    let start = Instant::now();
    f(v);
    v.elapsed = start.elapsed();
    if let Some(limit) = limit {
        v.check(
            format!("runtime {:.1}s <= {}s", v.elapsed.as_secs_f64(), limit.as_secs()),
            v.elapsed <= limit,
        );
    }
}

fn preflight_fidelity() -> Verdict {
    let mut v = Verdict::new(1, "pre-flight fidelity");
    timed(&mut v, Some(Duration::from_secs(60)), |v| {
        let dir = tempfile::tempdir().unwrap();
        let out = run_preflight(&config(dir.path(), &Testbed::ALL), &RunOptions::default()).unwrap();
        let get = |name: &str| out.reports.iter().find(|r| r.testbed == name).unwrap();
        let gg1 = get("GG1");
        v.check(
            format!("GG1 f(xi0) = {:.7}", gg1.f_xi0),
            (gg1.f_xi0 - 0.400_022_3).abs() <= 1e-5,
        );
        v.check(
            format!("GG1 min D* = {:.7e}", gg1.min_dstar),
            (gg1.min_dstar - 6.140_077e-3).abs() <= 2e-5,
        );
        let mm1 = get("MM1");
        v.check(
            format!("MM1 min D* = {:.7}", mm1.min_dstar),
            (mm1.min_dstar - 0.299_773_5).abs() <= 1e-4,
        );
        for r in &out.reports {
            v.check(
                format!("{} truth error {:.1e}", r.testbed, r.truth_error),
                r.truth_error <= 1e-6,
            );
        }
    });
    v
}

fn theory_slopes() -> Verdict {
    let mut v = Verdict::new(2, "theory secant slopes");
    timed(&mut v, None, |v| {
        let s1 = theory_secant_slope(1000, 8000, 1).unwrap();
        let s2 = theory_secant_slope(1000, 8000, 2).unwrap();
        v.check(format!("d=1 {s1:.6}"), (s1 + 0.349_379).abs() <= 1e-6);
        v.check(format!("d=2 {s2:.6}"), (s2 + 0.291_150).abs() <= 1e-6);
    });
    v
}

fn rate_and_adaptivity() -> (Verdict, Verdict) {
    let mut rate = Verdict::new(3, "rate reproduction");
    let mut adapt = Verdict::new(4, "adaptivity");
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = config(dir.path(), &[Testbed::GG1, Testbed::MM1]);
    cfg.rate.reps = Some(20);
    let mut outcome = None;
    timed(&mut rate, Some(Duration::from_secs(15 * 60)), |_| {
        outcome = Some(run_rate(&cfg, &RunOptions::default()).unwrap());
    });
    adapt.elapsed = rate.elapsed;
    let out = outcome.unwrap();
    for (tb, tol) in [("GG1", 0.10), ("MM1", 0.12)] {
        let f = out.fits.iter().find(|f| f.testbed == tb).unwrap();
        let s = f.slope_oracle.unwrap();
        rate.check(
            format!("{tb} oracle slope {s:.4} (target -0.349 +- {tol})"),
            (s + 0.349).abs() <= tol,
        );
        adapt.check(format!("{tb} C_avg {:.3} <= 3", f.c_avg), f.c_avg <= 3.0);
        adapt.check(format!("{tb} C_max {:.3} <= 4", f.c_max), f.c_max <= 4.0);
        adapt.check(
            format!("{tb} boundary rate {:.3} <= 0.05", f.boundary_rate),
            f.boundary_rate <= 0.05,
        );
    }
    (rate, adapt)
}

fn clt() -> Verdict {
    let mut v = Verdict::new(5, "pointwise CLT");
    timed(&mut v, Some(Duration::from_secs(10 * 60)), |v| {
        let dir = tempfile::tempdir().unwrap();
        let mut cfg = config(dir.path(), &[Testbed::GG1, Testbed::MM1]);
        cfg.clt.m_list = vec![4000];
        cfg.clt.reps = 150;
        let out = run_clt(&cfg, &RunOptions::default()).unwrap();
        for s in &out.summaries {
            let tb = &s.testbed;
            v.check(
                format!("{tb} coverage {:.2}%", s.coverage_pct),
                (90.0..=99.0).contains(&s.coverage_pct),
            );
            v.check(format!("{tb} mean Z {:.4}", s.mean_z), s.mean_z.abs() <= 0.2);
            v.check(format!("{tb} Var Z {:.4}", s.var_z), (0.65..=1.35).contains(&s.var_z));
            v.check(format!("{tb} AD {:.4} not rejected", s.ad_stat), !s.ad_reject);
            v.check(format!("{tb} all {} reps applicable", s.valid), s.not_applicable == 0);
        }
    });
    v
}

fn stress() -> Verdict {
    let mut v = Verdict::new(6, "bounded-support stress");
    timed(&mut v, Some(Duration::from_secs(10 * 60)), |v| {
        let dir = tempfile::tempdir().unwrap();
        let mut cfg = config(dir.path(), &[Testbed::GG1, Testbed::MM1]);
        cfg.stress.reps = 100;
        let out = run_stress(&cfg, &RunOptions::default()).unwrap();
        let cmp = |tb: &str| out.comparisons.iter().find(|c| c.testbed == tb).unwrap();
        let pr = |tb: &str, variant: &str| {
            out.summaries
                .iter()
                .find(|s| s.testbed == tb && s.variant == variant)
                .unwrap()
                .pr_dhat_le_tau
        };
        let mm1 = cmp("MM1").error_ratio;
        v.check(format!("MM1 wide/compact error ratio {mm1:.2} >= 3"), mm1 >= 3.0);
        v.check(
            format!("MM1 wide Pr(D <= tau) {:.2} >= 0.02", pr("MM1", "wide")),
            pr("MM1", "wide") >= 0.02,
        );
        v.check(
            format!("MM1 compact Pr(D <= tau) {:.2} = 0", pr("MM1", "compact")),
            pr("MM1", "compact") == 0.0,
        );
        let gg1 = cmp("GG1").error_ratio;
        v.check(format!("GG1 wide/compact error ratio {gg1:.2} <= 2"), gg1 <= 2.0);
    });
    v
}

fn terminal_edge() -> Verdict {
    let mut v = Verdict::new(7, "terminal edge");
    timed(&mut v, None, |v| {
        let dir = tempfile::tempdir().unwrap();
        let mut cfg = config(dir.path(), &[Testbed::GG1, Testbed::MM1]);
        cfg.edge.reps = 50;
        let out = run_edge(&cfg, &RunOptions::default()).unwrap();
        for s in &out.summaries {
            v.check(
                format!(
                    "{} rescaled flatter in {:.0}% of {} seeds",
                    s.testbed,
                    100.0 * s.flatter_fraction,
                    s.reps
                ),
                s.flatter_fraction >= 0.9,
            );
        }
    });
    v
}

// Simpson's rule is exact for the piecewise-quadratic kernel on [-1, 1].
fn simpson(f: impl Fn(f64) -> f64, n: usize) -> f64 {
    let h = 2.0 / n as f64;
    let mut s = f(-1.0) + f(1.0);
    for i in 1..n {
        s += if i % 2 == 1 { 4.0 } else { 2.0 } * f(-1.0 + i as f64 * h);
    }
    s * h / 3.0
}

fn random_query(law: &PairLaw, iv: &IntervalSpec, rng: &mut ChaCha8Rng) -> Query {
    let d = law.dim();
    let t = rng.random_range(iv.s..=iv.u - iv.eta);
    let x = (0..d)
        .map(|_| rng.random_range(-iv.state_radius..=iv.state_radius))
        .collect();
    let xi = (0..d).map(|_| rng.random_range(-1.5..=1.5)).collect();
    Query::new(t, x, xi)
}

fn properties() -> Verdict {
    let mut v = Verdict::new(8, "property suite");
    timed(&mut v, Some(Duration::from_secs(5 * 60)), |v| {
        // Kernel mass.
        let k1 = KernelSpec::new(1).unwrap();
        let k2 = KernelSpec::new(2).unwrap();
        let m1 = simpson(|u| k1.eval(&[u]).unwrap(), 2000);
        let m2 = simpson(|u| simpson(|w| k2.eval(&[u, w]).unwrap(), 400), 400);
        v.check(
            format!(
                "kernel mass d=1 err {:.1e}, d=2 err {:.1e}",
                (m1 - 1.0).abs(),
                (m2 - 1.0).abs()
            ),
            (m1 - 1.0).abs() <= 1e-10 && (m2 - 1.0).abs() <= 1e-10,
        );

        // Single-pair identity.
        let iv = IntervalSpec::default();
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let mut worst_ulps = 0.0f64;
        for _ in 0..1000 {
            let xi: f64 = rng.random_range(-2.0..2.0);
            let xu: f64 = rng.random_range(-3.0..3.0);
            let x: f64 = rng.random_range(-2.5..2.5);
            let t: f64 = rng.random_range(0.2..0.95);
            let h: f64 = rng.random_range(0.01..1.5);
            let s = SampleSet::new(1, vec![xi], vec![xu]).unwrap();
            let e = estimate_drift(&s, &iv, &Query::new(t, vec![x], vec![xi]), h, h, &Floors::NONE).unwrap();
            let want = (xu - x) / (iv.u - t);
            worst_ulps = worst_ulps.max((e.value[0] - want).abs() / (f64::EPSILON * want.abs().max(1.0)));
        }
        v.check(
            format!("single-pair identity within {worst_ulps:.1} ulp"),
            worst_ulps <= 8.0,
        );

        // Ratio transfer on random GG1 instances.
        let law = PairLaw::new(Testbed::GG1, Variant::Compact).unwrap();
        let engine = TruthEngine::new(&law, iv);
        let (mut on_event, mut held, mut attempts) = (0, 0, 0);
        while on_event < 100 && attempts < 2000 {
            attempts += 1;
            let q = random_query(&law, &iv, &mut rng);
            let m = rng.random_range(200..3000);
            let h = rng.random_range(0.15..0.8);
            let sample = law.sample_dataset(m, &mut rng).unwrap();
            let f = law.marginal_density(&q.xi);
            let mo = engine.population_moments(&q).unwrap();
            let floors = Floors {
                f_min: 0.5 * f,
                d_min: 0.5 * mo.dstar,
            };
            let fhat = estimate_f(&sample, &q.xi, h).unwrap();
            let inputs = RatioTransferInputs {
                fhat1: fhat,
                fhat2: fhat,
                ghat1: estimate_g(&sample, &iv, &q, h, false).unwrap()[0],
                ghat2: estimate_g(&sample, &iv, &q, h, true).unwrap(),
                f,
                g1: f * mo.dstar,
                g2: mo.nstar.iter().map(|n| f * n).collect(),
                q_star: mo.nstar.iter().map(|n| n / mo.dstar).collect(),
                f_min: floors.f_min,
                d_min: floors.d_min,
                delta_t: iv.u - q.t,
            };
            let Ok(bound) = ratio_transfer_bound(&inputs) else {
                continue;
            };
            on_event += 1;
            let a_hat = estimate_drift(&sample, &iv, &q, h, h, &floors).unwrap().value[0];
            let a_star = engine.true_drift(&q).unwrap()[0];
            held += ((a_hat - a_star).abs() <= bound) as usize;
        }
        v.check(
            format!("ratio transfer held on {held}/{on_event} instances on the event"),
            on_event == 100 && held == 100,
        );

        // Quadrature against Monte Carlo.
        let draws = 1_000_000;
        let mut worst = 0.0f64;
        let mut compared = 0;
        for tb in Testbed::ALL {
            let law = PairLaw::new(tb, Variant::Compact).unwrap();
            let engine = TruthEngine::new(&law, iv);
            for _ in 0..20 {
                let q = random_query(&law, &iv, &mut rng);
                let dstar = engine.population_moments(&q).unwrap().dstar;
                let (mut s1, mut s2) = (0.0, 0.0);
                for _ in 0..draws {
                    let (y, _) = law.sample_conditional(&q.xi, &mut rng).unwrap();
                    let w = sb_weight(&iv, q.t, &q.xi, &q.x, &y).unwrap();
                    s1 += w;
                    s2 += w * w;
                }
                let n = draws as f64;
                let mean = s1 / n;
                let se = ((s2 / n - mean * mean) / (n - 1.0)).sqrt();
                worst = worst.max((mean - dstar).abs() / se);
                compared += 1;
            }
        }
        v.check(
            format!("D* quadrature vs Monte Carlo on {compared} queries, worst {worst:.2} SE"),
            compared == 80 && worst <= 4.0,
        );

        // Thread-count independence.
        let identical = [1usize, 8].map(|threads| {
            let dir = tempfile::tempdir().unwrap();
            let mut cfg = config(dir.path(), &[Testbed::GG1, Testbed::MM1]);
            cfg.rate.m_list = Some(vec![1000, 2000]);
            cfg.rate.reps = Some(6);
            cfg.clt.m_list = vec![2000];
            cfg.clt.reps = 20;
            cfg.stress.reps = 4;
            cfg.stress.m = 1000;
            let opts = RunOptions { threads: Some(threads) };
            let mut files = run_rate(&cfg, &opts).unwrap().artifacts.raw;
            files.extend(run_clt(&cfg, &opts).unwrap().artifacts.raw);
            files.extend(run_stress(&cfg, &opts).unwrap().artifacts.raw);
            files.into_iter().map(|p| std::fs::read(p).unwrap()).collect::<Vec<_>>()
        });
        v.check(
            format!(
                "raw CSVs identical under 1 and 8 threads ({} files)",
                identical[0].len()
            ),
            identical[0] == identical[1],
        );
    });
    v
}

fn main() {
    let mut verdicts = vec![preflight_fidelity(), theory_slopes()];
    let (rate, adapt) = rate_and_adaptivity();
    verdicts.extend([rate, adapt, clt(), stress(), terminal_edge(), properties()]);
    verdicts.sort_by_key(|v| v.id);
    println!();
    for v in &verdicts {
        println!(
            "[{}] {}. {} ({:.1}s)",
            if v.passed() { "PASS" } else { "FAIL" },
            v.id,
            v.name,
            v.elapsed.as_secs_f64()
        );
        for (what, ok) in &v.checks {
            println!("       {} {what}", if *ok { "ok  " } else { "FAIL" });
        }
    }
    let failed: Vec<u32> = verdicts.iter().filter(|v| !v.passed()).map(|v| v.id).collect();
    println!(
        "\n{} of {} criteria passed",
        verdicts.len() - failed.len(),
        verdicts.len()
    );
    if !failed.is_empty() {
        println!("failed criteria: {failed:?}");
        std::process::exit(1);
    }
}
