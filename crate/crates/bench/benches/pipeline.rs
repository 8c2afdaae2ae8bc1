use std::f64::consts::TAU;
use std::hint::black_box;

use criterion::{criterion_group, criterion_main, BatchSize, Criterion};
use storedlight_core::phase::{fit_sinusoid, measure_shot, shot_windows, AnalysisConfig, WindowEnvelope};
use storedlight_core::synth::{run_shot, Experiment, Synthesizer};
use storedlight_core::velocimetry::{run_velocity_sweep, SweepConfig};
use storedlight_core::{Regime, StageMotion};

fn window(n: usize) -> Vec<f64> {
    let w = TAU * 80.0e6 / 2.5e9;
    (0..n).map(|i| 0.7 * (w * i as f64 + 0.3).cos() + 0.1).collect()
}

fn estimator(c: &mut Criterion) {
    let mut g = c.benchmark_group("fit_sinusoid");
    for n in [50usize, 500, 5000] {
        let x = window(n);
        g.bench_function(format!("{n} samples"), |b| {
            b.iter(|| fit_sinusoid(black_box(&x), 0.0, 2.5e9, 80.0e6, &WindowEnvelope::Flat).unwrap())
        });
    }
    g.finish();
}

fn synthesis(c: &mut Criterion) {
    let exp = Experiment::default();
    let motion = StageMotion::new(0.02).unwrap();
    c.bench_function("run_shot full 20 us trace pair", |b| {
        b.iter(|| run_shot(&exp, &motion, black_box(7)).unwrap())
    });

    let retrieval = exp.retrieval(&motion).unwrap();
    let syn = Synthesizer::new(&exp, retrieval);
    let ranges = [(2500, 50), (38750, 50)];
    c.bench_function("16-acquisition record, two windows", |b| {
        b.iter(|| syn.averaged_segments(black_box(7), 16, &ranges))
    });
}

fn analysis(c: &mut Criterion) {
    let exp = Experiment::default();
    let an = AnalysisConfig::default();
    let windows = shot_windows(&exp, &an).unwrap();
    let shot = run_shot(&exp, &StageMotion::at_rest(), 3).unwrap();
    c.bench_function("measure_shot", |b| {
        b.iter(|| measure_shot(&shot.reference, &shot.probe, &windows, Regime::Rest, 0.0).unwrap())
    });

    let sweep = SweepConfig {
        runs: 4,
        ..SweepConfig::default()
    };
    let mut g = c.benchmark_group("sweep");
    g.sample_size(10);
    g.bench_function("9 velocities x 4 runs x 16 averages", |b| {
        b.iter_batched(
            || exp.clone(),
            |e| run_velocity_sweep(&e, &an, &sweep, 8.5e-6, 1).unwrap(),
            BatchSize::SmallInput,
        )
    });
    g.finish();
}

criterion_group!(benches, estimator, synthesis, analysis);
criterion_main!(benches);
