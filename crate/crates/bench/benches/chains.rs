use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion, Throughput};
use slicelab::{
    default_init_radius, iat, run_x_chain, BuiltinTarget, RadialFactorization, RadialTarget,
};

const STEPS: usize = 10_000;

fn x_chain(c: &mut Criterion) {
    let mut group = c.benchmark_group("run_x_chain");
    group.throughput(Throughput::Elements(STEPS as u64));
    for d in [2usize, 30] {
        let t = RadialTarget::builtin(BuiltinTarget::exponential(), d).unwrap();
        for (name, fac) in [
            ("uss", RadialFactorization::uniform()),
            ("pss", RadialFactorization::polar(d)),
        ] {
            let r0 = default_init_radius(&t, &fac).unwrap();
            group.bench_with_input(BenchmarkId::new(name, d), &d, |b, _| {
                b.iter(|| run_x_chain(&t, &fac, STEPS, r0, 7).unwrap())
            });
        }
    }
    group.finish();
}

fn iat_estimate(c: &mut Criterion) {
    let t = RadialTarget::builtin(BuiltinTarget::exponential(), 30).unwrap();
    let fac = RadialFactorization::uniform();
    let mut group = c.benchmark_group("iat");
    for n in [10_000usize, 100_000] {
        let trace = run_x_chain(&t, &fac, n, default_init_radius(&t, &fac).unwrap(), 3).unwrap();
        group.bench_with_input(BenchmarkId::from_parameter(n), &trace, |b, tr| {
            b.iter(|| iat(tr).unwrap())
        });
    }
    group.finish();
}

criterion_group!(benches, x_chain, iat_estimate);
criterion_main!(benches);
