use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use fracprec::fem::{Discretization, DualVector, Space};
use fracprec::{AdditiveMg, Execution};

const POLICIES: [(&str, Execution); 2] = [("sequential", Execution::Sequential), ("parallel", Execution::Parallel)];

fn setup(c: &mut Criterion) {
    let disc = Discretization::new(2, 4, Execution::Parallel).expect("hierarchy");
    let mut group = c.benchmark_group("mg_setup_n16");
    group.sample_size(10);
    for (name, exec) in POLICIES {
        group.bench_with_input(BenchmarkId::from_parameter(name), &exec, |b, &exec| {
            b.iter(|| AdditiveMg::setup(&disc, 0.5, exec).expect("setup"))
        });
    }
    group.finish();
}

fn apply(c: &mut Criterion) {
    let disc = Discretization::new(4, 4, Execution::Parallel).expect("hierarchy");
    let n = disc.finest().dim_v();
    let d = DualVector::new(Space::RaviartThomas, disc.finest_level(), (0..n).map(|i| (i as f64).sin()).collect());
    let mut group = c.benchmark_group("mg_apply_n32");
    for (name, exec) in POLICIES {
        let mg = AdditiveMg::setup(&disc, 0.5, exec).expect("setup");
        group.bench_function(BenchmarkId::from_parameter(name), |b| b.iter(|| mg.apply(&d).expect("apply")));
    }
    group.finish();
}

fn discretize(c: &mut Criterion) {
    let mut group = c.benchmark_group("assemble_n32");
    group.sample_size(10);
    for (name, exec) in POLICIES {
        group.bench_with_input(BenchmarkId::from_parameter(name), &exec, |b, &exec| {
            b.iter(|| Discretization::new(4, 4, exec).expect("hierarchy"))
        });
    }
    group.finish();
}

criterion_group!(benches, setup, apply, discretize);
criterion_main!(benches);
