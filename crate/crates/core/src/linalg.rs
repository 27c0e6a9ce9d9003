//! Tridiagonal solvers for the implicit Schrödinger sweeps.

use num_complex::Complex64;

/// Pivots smaller than this (relative to the diagonal scale) count as
/// singular.
const PIVOT_TOL: f64 = 1e-14;

/// Row index at which elimination broke down.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SingularPivot(pub usize);

/// Solves `A x = d` in place for tridiagonal `A` (Thomas algorithm).
///
/// `lower[0]` and `upper[n-1]` are ignored. `scratch` must hold `n` values.
pub fn solve_tridiagonal(
    lower: &[Complex64],
    diag: &[Complex64],
    upper: &[Complex64],
    rhs: &mut [Complex64],
    scratch: &mut [Complex64],
) -> Result<(), SingularPivot> {
    let n = rhs.len();
    debug_assert!(diag.len() == n && lower.len() == n && upper.len() == n);
    let scale = diag.iter().map(|d| d.norm()).fold(0.0, f64::max).max(1.0);
    let tol = PIVOT_TOL * scale;

    let mut pivot = diag[0];
    if pivot.norm() < tol {
        return Err(SingularPivot(0));
    }
    scratch[0] = upper[0] / pivot;
    rhs[0] /= pivot;
    for i in 1..n {
        pivot = diag[i] - lower[i] * scratch[i - 1];
        if pivot.norm() < tol {
            return Err(SingularPivot(i));
        }
        if i < n - 1 {
            scratch[i] = upper[i] / pivot;
        }
        rhs[i] = (rhs[i] - lower[i] * rhs[i - 1]) / pivot;
    }
    for i in (0..n - 1).rev() {
        rhs[i] = rhs[i] - scratch[i] * rhs[i + 1];
    }
    Ok(())
}

/// Solves a cyclic tridiagonal system where `lower[0]` couples row 0 to
/// column n-1 and `upper[n-1]` couples row n-1 to column 0
/// (Sherman-Morrison correction of two Thomas solves).
pub fn solve_cyclic(
    lower: &[Complex64],
    diag: &[Complex64],
    upper: &[Complex64],
    rhs: &mut [Complex64],
) -> Result<(), SingularPivot> {
    let n = rhs.len();
    let alpha = upper[n - 1];
    let beta = lower[0];
    let gamma = -diag[0];
    let mut d = diag.to_vec();
    d[0] = diag[0] - gamma;
    d[n - 1] = diag[n - 1] - alpha * beta / gamma;

    let mut scratch = vec![Complex64::new(0.0, 0.0); n];
    solve_tridiagonal(lower, &d, upper, rhs, &mut scratch)?;

    let mut u = vec![Complex64::new(0.0, 0.0); n];
    u[0] = gamma;
    u[n - 1] = alpha;
    solve_tridiagonal(lower, &d, upper, &mut u, &mut scratch)?;

    let num = rhs[0] + beta * rhs[n - 1] / gamma;
    let den = Complex64::new(1.0, 0.0) + u[0] + beta * u[n - 1] / gamma;
    if den.norm() < PIVOT_TOL {
        return Err(SingularPivot(n - 1));
    }
    let fact = num / den;
    for (x, ui) in rhs.iter_mut().zip(&u) {
        *x -= fact * ui;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cx(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    fn dense_apply(
        lower: &[Complex64],
        diag: &[Complex64],
        upper: &[Complex64],
        x: &[Complex64],
        cyclic: bool,
    ) -> Vec<Complex64> {
        let n = x.len();
        (0..n)
            .map(|i| {
                let mut s = diag[i] * x[i];
                if i > 0 {
                    s += lower[i] * x[i - 1];
                } else if cyclic {
                    s += lower[0] * x[n - 1];
                }
                if i < n - 1 {
                    s += upper[i] * x[i + 1];
                } else if cyclic {
                    s += upper[n - 1] * x[0];
                }
                s
            })
            .collect()
    }

    fn system(n: usize) -> (Vec<Complex64>, Vec<Complex64>, Vec<Complex64>, Vec<Complex64>) {
        let lower: Vec<_> = (0..n).map(|i| cx(-0.3, 0.1 * i as f64)).collect();
        let upper: Vec<_> = (0..n).map(|i| cx(-0.2, -0.05 * i as f64)).collect();
        let diag: Vec<_> = (0..n).map(|i| cx(2.0 + 0.01 * i as f64, 0.7)).collect();
        let x: Vec<_> = (0..n).map(|i| cx((i as f64).sin(), (i as f64 * 0.3).cos())).collect();
        (lower, diag, upper, x)
    }

    #[test]
    fn thomas_recovers_known_solution() {
        let (l, d, u, x) = system(12);
        let mut b = dense_apply(&l, &d, &u, &x, false);
        let mut s = vec![cx(0.0, 0.0); 12];
        solve_tridiagonal(&l, &d, &u, &mut b, &mut s).unwrap();
        for (a, e) in b.iter().zip(&x) {
            assert!((a - e).norm() < 1e-13);
        }
    }

    #[test]
    fn cyclic_recovers_known_solution() {
        let (l, d, u, x) = system(10);
        let mut b = dense_apply(&l, &d, &u, &x, true);
        solve_cyclic(&l, &d, &u, &mut b).unwrap();
        for (a, e) in b.iter().zip(&x) {
            assert!((a - e).norm() < 1e-12);
        }
    }

    #[test]
    fn zero_pivot_reported() {
        let n = 4;
        let l = vec![cx(1.0, 0.0); n];
        let u = vec![cx(1.0, 0.0); n];
        let mut d = vec![cx(2.0, 0.0); n];
        d[0] = cx(0.0, 0.0);
        let mut b = vec![cx(1.0, 0.0); n];
        let mut s = vec![cx(0.0, 0.0); n];
        assert_eq!(
            solve_tridiagonal(&l, &d, &u, &mut b, &mut s),
            Err(SingularPivot(0))
        );
    }
}
