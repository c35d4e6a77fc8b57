use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use gaussdyn::bipartite::{full_flow, BundleOptions};
use gaussdyn::models::{qbm_build, two_oscillator_system, QBMParams, TwoOscillatorParams};
use gaussdyn::par::Execution;
use gaussdyn::reduced::critical::{critical_time, CriticalTimeOptions};
use gaussdyn::reduced::master::master_coefficients;
use gaussdyn::reduced::wigner::{reduced_wigner_grid, sample_gaussian, Axis, PhaseGrid, WignerOptions};
use gaussdyn::reduced::{evolve_reduced, Picture};
use gaussdyn::states::GaussianState;
use std::hint::black_box;

const MODES: [(&str, Execution); 2] = [("sequential", Execution::Sequential), ("parallel", Execution::Parallel)];

fn bath_flow(c: &mut Criterion) {
    let k: Vec<f64> = (1..=16).map(|j| 0.05 * j as f64).collect();
    let sys = qbm_build(&QBMParams::new(1.0, 1.0, k).unwrap()).unwrap();
    let grid: Vec<f64> = (0..400).map(|i| 0.05 * i as f64).collect();
    let s0 = GaussianState::vacuum(1);
    let e0 = GaussianState::thermal_tau(16, 0.5).unwrap();
    let mut group = c.benchmark_group("bath_trajectory_n16");
    for (name, execution) in MODES {
        group.bench_function(BenchmarkId::from_parameter(name), |b| {
            b.iter(|| {
                let bundle = full_flow(&sys, &grid, &BundleOptions { tol: 1e-10, execution }).unwrap();
                black_box(evolve_reduced(&bundle, &s0, &e0, execution).unwrap())
            })
        });
    }
    group.finish();
}

fn coefficient_grid(c: &mut Criterion) {
    let sys = two_oscillator_system(&TwoOscillatorParams::new(2.0, 4.0, 0.5).unwrap()).unwrap();
    let grid: Vec<f64> = (0..1000).map(|i| 0.01 * i as f64).collect();
    let bundle = full_flow(&sys, &grid, &BundleOptions::default()).unwrap();
    let e0 = GaussianState::thermal_tau(1, 0.5).unwrap();
    let mut group = c.benchmark_group("master_coefficients_1000");
    for (name, execution) in MODES {
        group.bench_function(BenchmarkId::from_parameter(name), |b| {
            b.iter(|| black_box(master_coefficients(&bundle, &e0, Picture::Interaction, execution).unwrap()))
        });
    }
    group.finish();
}

fn wigner_grid(c: &mut Criterion) {
    let grid = PhaseGrid::new(vec![Axis::symmetric(8.0, 128), Axis::symmetric(8.0, 128)]).unwrap();
    let sys = two_oscillator_system(&TwoOscillatorParams::new(1.0, 1.0, 0.5).unwrap()).unwrap();
    let sample = gaussdyn::bipartite::FlowSample::at(&sys, 1.0, 1e-12).unwrap();
    let f0 = sample_gaussian(&grid, &GaussianState::vacuum(1)).unwrap();
    let e0 = GaussianState::thermal_tau(1, 0.5).unwrap();
    let mut group = c.benchmark_group("wigner_grid_128");
    for (name, execution) in MODES {
        let opts = WignerOptions {
            execution,
            ..WignerOptions::default()
        };
        group.bench_function(BenchmarkId::from_parameter(name), |b| {
            b.iter(|| black_box(reduced_wigner_grid(&sample, &grid, &f0, &e0, &opts).unwrap()))
        });
    }
    group.finish();
}

fn critical_time_scan(c: &mut Criterion) {
    let sys = two_oscillator_system(&TwoOscillatorParams::new(2.0, 4.0, 0.25).unwrap()).unwrap();
    let mut group = c.benchmark_group("critical_time_scan");
    group.sample_size(10);
    for (name, execution) in MODES {
        let opts = CriticalTimeOptions {
            execution,
            ..CriticalTimeOptions::default()
        };
        group.bench_function(BenchmarkId::from_parameter(name), |b| {
            b.iter(|| black_box(critical_time(&sys, 40.0, &opts).unwrap()))
        });
    }
    group.finish();
}

criterion_group!(benches, bath_flow, coefficient_grid, wigner_grid, critical_time_scan);
criterion_main!(benches);
