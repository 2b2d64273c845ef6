use criterion::{criterion_group, criterion_main, Criterion};
use sbdrift::{EvalGrid, IntervalSpec, PairLaw, Query, Testbed, TruthEngine, Variant};

fn pointwise(c: &mut Criterion) {
    let iv = IntervalSpec::default();
    for (tb, q) in [
        (Testbed::GG1, Query::new(0.6, vec![0.2], vec![0.0])),
        (Testbed::MM2, Query::new(0.6, vec![0.8, -0.8], vec![0.8, -0.8])),
    ] {
        let law = PairLaw::new(tb, Variant::Compact).unwrap();
        let engine = TruthEngine::new(&law, iv);
        c.bench_function(&format!("population_moments/{}", tb.name()), |b| {
            b.iter(|| engine.population_moments(&q).unwrap())
        });
    }
}

fn tabulate(c: &mut Criterion) {
    let iv = IntervalSpec::default();
    let mut group = c.benchmark_group("tabulate");
    group.sample_size(10);
    for (tb, grid, xi) in [
        (Testbed::GG1, EvalGrid::uniform(1, -2.0, 2.0, 200).unwrap(), vec![0.0]),
        (
            Testbed::GG2,
            EvalGrid::uniform(2, -1.5, 1.5, 21).unwrap(),
            vec![0.0, 0.0],
        ),
    ] {
        let law = PairLaw::new(tb, Variant::Compact).unwrap();
        let engine = TruthEngine::new(&law, iv);
        group.bench_function(tb.name(), |b| b.iter(|| engine.tabulate(0.6, &xi, &grid).unwrap()));
    }
    group.finish();
}

criterion_group!(benches, pointwise, tabulate);
criterion_main!(benches);
