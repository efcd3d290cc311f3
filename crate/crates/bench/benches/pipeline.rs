use std::hint::black_box;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};

use screamsim::apps::{self, App, AppConfig, Pipeline};
use screamsim::crossbar::{CostLedger, FaultModel};
use screamsim::imsng::{self, SngVariant};
use screamsim::ops::{self, Backend};
use screamsim::sng::SngConfig;
use screamsim::sweep::{self, SweepOp, SweepSource};
use screamsim::SourceSpec;

fn generation(c: &mut Criterion) {
    let mut g = c.benchmark_group("imsng");
    for n in [64, 256, 1024] {
        let cfg = SngConfig::new(8, n, SourceSpec::trng(), 1);
        for variant in [SngVariant::Opt, SngVariant::Naive] {
            g.bench_with_input(BenchmarkId::new(variant.name(), n), &cfg, |b, cfg| {
                b.iter(|| {
                    let mut ledger = CostLedger::new();
                    imsng::generate(black_box(100), cfg, variant, &mut FaultModel::none(), &mut ledger).unwrap()
                })
            });
        }
    }
    g.finish();
}

fn arithmetic(c: &mut Criterion) {
    let cfg = SngConfig::new(8, 256, SourceSpec::trng(), 2);
    let mut ledger = CostLedger::new();
    let (a, b) = imsng::generate_pair(
        90,
        170,
        &cfg,
        false,
        SngVariant::Opt,
        &mut FaultModel::none(),
        &mut ledger,
    )
    .unwrap();
    let mut g = c.benchmark_group("ops");
    for backend in [Backend::Software, Backend::Cim] {
        let name = format!("{backend:?}").to_lowercase();
        g.bench_function(format!("mul/{name}"), |bench| {
            let mut fault = FaultModel::new(0.001, 3).unwrap();
            bench.iter(|| ops::sc_mul(&a, &b, backend, &mut fault, &mut ledger).unwrap())
        });
        g.bench_function(format!("cordiv/{name}"), |bench| {
            let mut fault = FaultModel::new(0.001, 3).unwrap();
            bench.iter(|| ops::sc_div_cordiv(&a, &b, backend, &mut fault, &mut ledger).unwrap())
        });
    }
    g.finish();
}

fn applications(c: &mut Criterion) {
    let mut g = c.benchmark_group("apps");
    g.sample_size(10);
    let cfg = AppConfig::default().with_n(256).with_seed(4);
    for app in App::ALL {
        let scene = screamsim_bench::scene(app, 16);
        g.bench_function(format!("{}/cim", app.name()), |b| {
            b.iter(|| apps::run(app, &scene, &cfg, Pipeline::Stochastic(Backend::Cim)).unwrap())
        });
        g.bench_function(format!("{}/binary", app.name()), |b| {
            b.iter(|| apps::run(app, &scene, &cfg, Pipeline::Binary).unwrap())
        });
    }
    g.finish();
}

fn sweeps(c: &mut Criterion) {
    let mut g = c.benchmark_group("sweep");
    g.sample_size(10);
    for source in [SweepSource::Imsng, SweepSource::Lfsr] {
        g.bench_function(format!("sng/{}", source.name()), |b| {
            b.iter(|| sweep::sng_cell(source, 8, 128, 1000, 1).unwrap())
        });
        g.bench_function(format!("div/{}", source.name()), |b| {
            b.iter(|| sweep::op_cell(SweepOp::Div, source, 8, 128, 1000, 1).unwrap())
        });
    }
    g.finish();
}

criterion_group!(benches, generation, arithmetic, applications, sweeps);
criterion_main!(benches);
