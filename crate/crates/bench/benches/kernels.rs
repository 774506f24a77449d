use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use plurikit_bench::{chart_bump, double_well, simplex_bump};
use plurikit_core::envelope::{chart_boundary_data, sor_envelope, toric_equilibrium, EnvelopeParams, SorParams};
use plurikit_core::geometry::{eval_weight, Domain};
use plurikit_core::hilbert::{BergmanModel, HilbertSpaceSpec};
use std::hint::black_box;

fn toric_envelopes(c: &mut Criterion) {
    let mut g = c.benchmark_group("toric_envelope");
    let w = double_well();
    let p = w.polytope().unwrap().clone();
    for h in [0.02, 0.005] {
        let phi = eval_weight(&w, &Domain::v_box(1, 20.0, h).unwrap()).unwrap();
        g.bench_with_input(BenchmarkId::new("double_well", h), &phi, |b, phi| {
            b.iter(|| toric_equilibrium(black_box(phi), &p, &EnvelopeParams::default()).unwrap())
        });
    }
    let w = simplex_bump();
    let p = w.polytope().unwrap().clone();
    let phi = eval_weight(&w, &Domain::v_box(2, 5.0, 0.05).unwrap()).unwrap();
    g.sample_size(10);
    g.bench_function("simplex_bump", |b| {
        b.iter(|| toric_equilibrium(black_box(&phi), &p, &EnvelopeParams::default()).unwrap())
    });
    g.finish();
}

fn chart_sor(c: &mut Criterion) {
    let w = chart_bump();
    let d = Domain::polar(0.02, 50.0, 48, 48).unwrap();
    let phi = eval_weight(&w, &d).unwrap();
    let data = chart_boundary_data(&w, &d).unwrap();
    let mut g = c.benchmark_group("sor");
    g.sample_size(10);
    g.bench_function("chart_bump_48", |b| {
        b.iter(|| sor_envelope(black_box(&phi), &data, &SorParams::default()).unwrap())
    });
    g.finish();
}

fn bergman_models(c: &mut Criterion) {
    let mut g = c.benchmark_group("bergman_model");
    g.sample_size(10);
    for k in [64u32, 256] {
        g.bench_with_input(BenchmarkId::new("double_well", k), &k, |b, &k| {
            b.iter(|| BergmanModel::build(HilbertSpaceSpec::new(double_well(), k).unwrap()).unwrap())
        });
    }
    g.bench_function("chart_bump_k8", |b| {
        b.iter(|| BergmanModel::build(HilbertSpaceSpec::new(chart_bump(), 8).unwrap()).unwrap())
    });
    g.finish();
}

fn pointwise(c: &mut Criterion) {
    let m = BergmanModel::build(HilbertSpaceSpec::new(double_well(), 256).unwrap()).unwrap();
    c.bench_function("log_bergman_at/double_well_256", |b| {
        b.iter(|| m.log_bergman_at(black_box([0.3, 0.0])))
    });
}

criterion_group!(benches, toric_envelopes, chart_sor, bergman_models, pointwise);
criterion_main!(benches);
