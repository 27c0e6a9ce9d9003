//! Randomized invariants: inner-product symmetry, global U(1) invariance of
//! every bilinear observable, unitarity of the Schrödinger step, and
//! bitwise agreement between the parallel and sequential paths.

use std::sync::Arc;

use ehrenfest_core::exec;
use ehrenfest_core::fieldgrid::{inner_product, Axis, ComplexField, Grid, PhysicalConstants, RealField};
use ehrenfest_core::kleingordon::{self, KGState};
use ehrenfest_core::observables::{
    expectation_h, expectation_lz, expectation_p, kg_charge_density, kg_tensor, prob_current,
    prob_density, schrodinger_tensor,
};
use ehrenfest_core::potential::PotentialSpec;
use ehrenfest_core::scenario::{catalog_config, simulate};
use ehrenfest_core::schrodinger::SchrodingerState;
use num_complex::Complex64;
use proptest::prelude::*;

fn line() -> Arc<Grid> {
    Grid::line(Axis::dirichlet(-5.0, 5.0, 65)).unwrap()
}

fn plane() -> Arc<Grid> {
    Grid::plane(Axis::dirichlet(-4.0, 4.0, 24), Axis::periodic(-4.0, 4.0, 20)).unwrap()
}

/// Smooth random field: a few modulated Gaussian bumps, windowed so it
/// vanishes on the (Dirichlet) x walls and is periodic in y.
fn field(grid: &Arc<Grid>, coeffs: &[(f64, f64, f64, f64)]) -> ComplexField {
    let ax = grid.axes()[0];
    let half = 0.5 * (ax.max - ax.min);
    let f = ComplexField::from_fn(grid.clone(), |p| {
        let window = (0.5 * std::f64::consts::PI * p[0] / half).cos().powi(2);
        let wave = (std::f64::consts::PI * p[1] / 4.0).cos();
        coeffs.iter().fold(Complex64::new(0.0, 0.0), |acc, &(a, b, k, x0)| {
            let r2 = (p[0] - x0).powi(2);
            let amp = window * (-r2 / 2.0).exp() * (1.5 + wave);
            acc + Complex64::new(a, b) * Complex64::from_polar(amp, k * p[0])
        })
    })
    .unwrap();
    let n = ehrenfest_core::fieldgrid::integrate(&f.norm_sqr()).sqrt();
    f.scale(1.0 / n.max(1e-300))
}

fn coeffs() -> impl Strategy<Value = Vec<(f64, f64, f64, f64)>> {
    prop::collection::vec((-1.0..1.0f64, -1.0..1.0f64, -2.0..2.0f64, -1.5..1.5f64), 1..4)
        .prop_filter("non-trivial", |v| v.iter().any(|c| c.0.abs() + c.1.abs() > 0.1))
}

fn close(a: &RealField, b: &RealField, tol: f64) -> bool {
    a.values().iter().zip(b.values()).all(|(x, y)| (x - y).abs() <= tol * (1.0 + x.abs()))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn inner_product_is_conjugate_symmetric(a in coeffs(), b in coeffs()) {
        let g = plane();
        let (f, h) = (field(&g, &a), field(&g, &b));
        let fh = inner_product(&f, &h).unwrap();
        let hf = inner_product(&h, &f).unwrap();
        prop_assert!((fh - hf.conj()).norm() < 1e-13);
        prop_assert!(inner_product(&f, &f).unwrap().im.abs() < 1e-14);
    }

    #[test]
    fn schrodinger_observables_ignore_global_phase(a in coeffs(), theta in 0.0..6.3f64) {
        let g = plane();
        let k = PhysicalConstants::default();
        let psi = field(&g, &a);
        let rot = psi.map(|z| z * Complex64::from_polar(1.0, theta));
        let v = RealField::from_fn(g.clone(), |p| 0.3 * p[0] * p[0] + 0.1 * p[1]).unwrap();
        prop_assert!(close(&prob_density(&psi), &prob_density(&rot), 1e-13));
        for (j0, j1) in prob_current(&psi, &k).unwrap().iter().zip(prob_current(&rot, &k).unwrap().iter()) {
            prop_assert!(close(j0, j1, 1e-12));
        }
        let (t0, t1) = (schrodinger_tensor(&psi, &v, &k, 0.0).unwrap(), schrodinger_tensor(&rot, &v, &k, 0.0).unwrap());
        prop_assert!(close(&t0.t00, &t1.t00, 1e-11));
        for (x, y) in t0.tij.iter().flatten().zip(t1.tij.iter().flatten()) {
            prop_assert!(close(x, y, 1e-11));
        }
        prop_assert!((expectation_h(&psi, &v, &k).unwrap() - expectation_h(&rot, &v, &k).unwrap()).abs() < 1e-11);
        let (p0, p1) = (expectation_p(&psi, &k).unwrap(), expectation_p(&rot, &k).unwrap());
        prop_assert!((p0[0] - p1[0]).abs() < 1e-12 && (p0[1] - p1[1]).abs() < 1e-12);
        prop_assert!((expectation_lz(&psi, &k).unwrap() - expectation_lz(&rot, &k).unwrap()).abs() < 1e-12);
    }

    #[test]
    fn kg_charge_and_tensor_ignore_global_phase(a in coeffs(), b in coeffs(), theta in 0.0..6.3f64) {
        let g = line();
        let k = PhysicalConstants::default();
        let (phi, dot) = (field(&g, &a), field(&g, &b));
        let r = Complex64::from_polar(1.0, theta);
        let (phi_r, dot_r) = (phi.map(|z| z * r), dot.map(|z| z * r));
        let v = RealField::from_fn(g.clone(), |p| 0.2 * p[0]).unwrap();
        let q0 = kg_charge_density(&phi, &dot, &v, &k).unwrap();
        let q1 = kg_charge_density(&phi_r, &dot_r, &v, &k).unwrap();
        prop_assert!(close(&q0, &q1, 1e-12));
        let t0 = kg_tensor(&phi, &dot, &v, &k, 0.0).unwrap();
        let t1 = kg_tensor(&phi_r, &dot_r, &v, &k, 0.0).unwrap();
        prop_assert!(close(&t0.t00, &t1.t00, 1e-11));
        prop_assert!(close(&t0.ti0[0], &t1.ti0[0], 1e-11));
    }

    #[test]
    fn schrodinger_step_is_unitary(a in coeffs(), dt in 1e-3..5e-2f64, w in 0.1..2.0f64) {
        let g = plane();
        let pot = Arc::new(PotentialSpec::Harmonic { omega: [w, 0.5 * w], center: [0.0, 0.0], mass: 1.0 });
        let s = SchrodingerState::new(field(&g, &a), 0.0, PhysicalConstants::default(), pot).unwrap();
        let n = s.step_cn(dt).unwrap().step_cn(dt).unwrap().norm();
        prop_assert!((n - 1.0).abs() < 1e-12);
    }
}

#[test]
fn kg_leapfrog_is_reversible() {
    let g = line();
    let psi = field(&g, &[(1.0, 0.2, 1.0, 0.3)]);
    let dot = field(&g, &[(0.1, -0.4, 0.5, -0.2)]);
    let pot = Arc::new(PotentialSpec::Linear { slope: [0.1, 0.0] });
    let s = KGState::new(psi, dot, 0.0, PhysicalConstants::default(), pot).unwrap();
    let dt = 0.4 * kleingordon::max_stable_dt(&g, &s.constants);
    let mut t = s.clone();
    for _ in 0..25 {
        t = t.step_leapfrog(dt).unwrap();
    }
    for _ in 0..25 {
        t = t.step_leapfrog(-dt).unwrap();
    }
    let gap = t.phi.values().iter().zip(s.phi.values()).fold(0.0f64, |m, (x, y)| m.max((x - y).norm()));
    assert!(gap < 1e-10, "{gap}");
}

#[test]
fn parallel_and_sequential_runs_agree_bitwise() {
    let cfg = catalog_config(
        "sch_harmonic_2d",
        &["grid.n=48", "time.t_final=0.1", "time.stride=5"],
    )
    .unwrap();
    let bits = |parallel: bool| {
        exec::set_parallel(parallel);
        let s = simulate(&cfg).unwrap().series;
        s.names()
            .iter()
            .map(|n| s.column(n).unwrap().iter().map(|x| x.to_bits()).collect::<Vec<_>>())
            .collect::<Vec<_>>()
    };
    let seq = bits(false);
    let par = bits(true);
    assert!(!seq.is_empty());
    assert_eq!(seq, par);
}
