//! Sequential against parallel execution for the data-parallel kernels.

use std::f64::consts::{FRAC_PI_2, FRAC_PI_3};

use beamspace_drr::beamforming::das_weights;
use beamspace_drr::doa::{estimate_doa, DoaGrid};
use beamspace_drr::exec::Execution;
use beamspace_drr::geometry::{ArrayGeometry, SolidAngle};
use beamspace_drr::pipeline::{estimate, EstimatorConfig};
use beamspace_drr::psd_estimation::build_gain_matrix;
use beamspace_drr::quadrature::SphericalQuadrature;
use beamspace_drr::stft::{analyze, StftConfig};
use beamspace_drr::synth::{synthesize_scene, SceneSpec};
use beamspace_drr::vad::VadMask;
use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};

const MODES: [(&str, Execution); 2] = [("sequential", Execution::Sequential), ("parallel", Execution::Parallel)];

fn benches(c: &mut Criterion) {
    let geom = ArrayGeometry::default_triangle();
    let dir = SolidAngle::new(0.8, FRAC_PI_2).unwrap();
    let spec = SceneSpec::new(dir, 0.0, 2.0, 1);
    let scene = synthesize_scene(&spec, &geom, Execution::Parallel).unwrap();
    let stft = analyze(&scene.channels, 16_000.0, &StftConfig::default(), Execution::Parallel).unwrap();
    let bins = stft.grid();
    let mask = VadMask::all(stft.frames());
    let grid = DoaGrid::default();
    let quad = SphericalQuadrature::product(24, 48).unwrap();
    let w1 = das_weights(&geom, dir, &bins);
    let w2 = das_weights(&geom, SolidAngle::new(0.8 + FRAC_PI_3, FRAC_PI_2).unwrap(), &bins);
    let config = EstimatorConfig {
        vad: beamspace_drr::vad::VadConfig {
            enabled: false,
            ..Default::default()
        },
        ..EstimatorConfig::default()
    };

    let mut g = c.benchmark_group("gain_matrix");
    for (name, exec) in MODES {
        g.bench_function(BenchmarkId::from_parameter(name), |b| {
            b.iter(|| build_gain_matrix(&w1, &w2, &dir, &geom, &quad, exec).unwrap())
        });
    }
    g.finish();

    let mut g = c.benchmark_group("doa_search");
    for (name, exec) in MODES {
        g.bench_function(BenchmarkId::from_parameter(name), |b| {
            b.iter(|| estimate_doa(&stft, &geom, &grid, &mask, 10..=176, exec).unwrap())
        });
    }
    g.finish();

    let mut g = c.benchmark_group("synthesis");
    g.sample_size(10);
    for (name, exec) in MODES {
        g.bench_function(BenchmarkId::from_parameter(name), |b| {
            b.iter(|| synthesize_scene(&spec, &geom, exec).unwrap())
        });
    }
    g.finish();

    let mut g = c.benchmark_group("estimate");
    g.sample_size(10);
    for (name, execution) in MODES {
        let config = EstimatorConfig {
            execution,
            ..config.clone()
        };
        g.bench_function(BenchmarkId::from_parameter(name), |b| {
            b.iter(|| estimate(&scene.channels, 16_000.0, &geom, &config, None).unwrap())
        });
    }
    g.finish();
}

criterion_group!(parallel, benches);
criterion_main!(parallel);
