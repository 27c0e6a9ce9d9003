//! Hot kernels at desk scale, each timed on the sequential and the rayon
//! path (`exec::set_parallel`). Without the `parallel` feature both rows
//! run sequentially.

use std::sync::Arc;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use ehrenfest_core::exec;
use ehrenfest_core::fieldgrid::{Axis, Grid, PhysicalConstants};
use ehrenfest_core::kleingordon::{self, init_wave_packet};
use ehrenfest_core::observables::schrodinger_tensor;
use ehrenfest_core::potential::PotentialSpec;
use ehrenfest_core::schrodinger::{gaussian_tilted, SchrodingerState};

const N: usize = 256;

fn grid() -> Arc<Grid> {
    Grid::plane(Axis::dirichlet(-8.0, 8.0, N), Axis::dirichlet(-8.0, 8.0, N)).unwrap()
}

fn trap() -> Arc<PotentialSpec> {
    Arc::new(PotentialSpec::Harmonic { center: [0.0, 0.0], omega: [1.0, 1.5], mass: 1.0 })
}

fn modes() -> [(&'static str, bool); 2] {
    [("sequential", false), ("parallel", true)]
}

fn schrodinger_step(c: &mut Criterion) {
    let g = grid();
    let psi = gaussian_tilted(&g, [1.0, 0.5], [1.0, 0.6], 0.6, [0.3, 0.6]).unwrap();
    let s = SchrodingerState::new(psi, 0.0, PhysicalConstants::default(), trap()).unwrap();
    let mut group = c.benchmark_group("schrodinger_adi_step");
    for (name, par) in modes() {
        exec::set_parallel(par);
        group.bench_function(BenchmarkId::new(name, N), |b| b.iter(|| s.step_cn(5e-3).unwrap()));
    }
    group.finish();
}

fn kg_step(c: &mut Criterion) {
    let g = grid();
    let k = PhysicalConstants::default();
    let s = init_wave_packet(&g, [0.0, 0.5], 1.5, [2.0, 0.0], k)
        .unwrap()
        .with_potential(trap());
    let dt = 0.4 * kleingordon::max_stable_dt(&g, &k);
    let mut group = c.benchmark_group("kg_leapfrog_step");
    for (name, par) in modes() {
        exec::set_parallel(par);
        group.bench_function(BenchmarkId::new(name, N), |b| b.iter(|| s.step_leapfrog(dt).unwrap()));
    }
    group.finish();
}

fn tensor(c: &mut Criterion) {
    let g = grid();
    let psi = gaussian_tilted(&g, [1.0, 0.5], [1.0, 0.6], 0.6, [0.3, 0.6]).unwrap();
    let v = trap().sample(&g, 0.0);
    let k = PhysicalConstants::default();
    let mut group = c.benchmark_group("schrodinger_tensor");
    for (name, par) in modes() {
        exec::set_parallel(par);
        group.bench_function(BenchmarkId::new(name, N), |b| {
            b.iter(|| schrodinger_tensor(&psi, &v, &k, 0.0).unwrap())
        });
    }
    group.finish();
}

criterion_group!(benches, schrodinger_step, kg_step, tensor);
criterion_main!(benches);
