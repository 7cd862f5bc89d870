use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion, Throughput};
use diamond_bench::{polymer, CASES};
use diamond_core::estimators::pool_fractional_moment;

fn quenched(c: &mut Criterion) {
    let mut g = c.benchmark_group("quenched_log_z");
    for &(b, s, n) in CASES {
        let p = polymer(b, s);
        g.throughput(Throughput::Elements(p.site_visits(n) as u64));
        let mut seed = 0;
        g.bench_function(BenchmarkId::from_parameter(format!("({b},{s}) n={n}")), |bench| {
            bench.iter(|| {
                seed += 1;
                p.quenched_log_z(n, 0.7, seed).unwrap().log_z
            })
        });
    }
    g.finish();
}

fn bond(c: &mut Criterion) {
    let p = polymer(2, 2);
    c.bench_function("bond_log_z (2,2) n=9", |bench| {
        let mut seed = 0;
        bench.iter(|| {
            seed += 1;
            p.bond_quenched_log_z(9, 0.7, seed).unwrap().log_z
        })
    });
}

fn coarse(c: &mut Criterion) {
    let p = polymer(2, 2);
    c.bench_function("coarse_marginal (2,2) n=8 m=2", |bench| {
        let mut seed = 0;
        bench.iter(|| {
            seed += 1;
            p.coarse_marginal(8, 2, 1.0, seed).unwrap().mu_max
        })
    });
}

fn pool(c: &mut Criterion) {
    let p = polymer(2, 2);
    let mut g = c.benchmark_group("pool_fractional_moment");
    g.sample_size(10);
    for depth in [10u32, 25] {
        g.bench_function(BenchmarkId::from_parameter(format!("(2,2) n={depth} pool=10000")), |bench| {
            bench.iter(|| pool_fractional_moment(p.params(), p.model(), depth, 0.5, 0.5, 10_000, 1).unwrap().mean)
        });
    }
    g.finish();
}

criterion_group!(benches, quenched, bond, coarse, pool);
criterion_main!(benches);
