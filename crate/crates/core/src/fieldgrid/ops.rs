use num_complex::Complex64;

use super::{Boundary, ComplexField, Field, Grid, RealField, Sample};
use crate::error::{Error, Result};

/// Applies a per-line kernel along `axis`, gathering strided lines into
/// contiguous buffers.
fn along_axis<T: Sample>(
    f: &Field<T>,
    axis: usize,
    kernel: impl Fn(&[T], &mut [T]),
) -> Field<T> {
    let grid = f.grid();
    let mut out = vec![T::zero(); grid.len()];
    let mut line = Vec::new();
    let mut res = Vec::new();
    for (start, stride, len) in grid.lines(axis) {
        line.clear();
        line.extend((0..len).map(|i| f.values()[start + i * stride]));
        res.clear();
        res.resize(len, T::zero());
        kernel(&line, &mut res);
        for (i, v) in res.iter().enumerate() {
            out[start + i * stride] = *v;
        }
    }
    Field::from_parts(grid.clone(), out)
}

fn first_derivative_line<T: Sample>(u: &[T], out: &mut [T], dx: f64, boundary: Boundary) {
    let n = u.len();
    let h = 0.5 / dx;
    for i in 1..n - 1 {
        out[i] = (u[i + 1] - u[i - 1]) * h;
    }
    match boundary {
        Boundary::Periodic => {
            out[0] = (u[1] - u[n - 1]) * h;
            out[n - 1] = (u[0] - u[n - 2]) * h;
        }
        Boundary::Dirichlet => {
            out[0] = (u[1] * 4.0 - u[0] * 3.0 - u[2]) * h;
            out[n - 1] = (u[n - 1] * 3.0 - u[n - 2] * 4.0 + u[n - 3]) * h;
        }
    }
}

/// Centered derivative whose boundary closure telescopes against the
/// trapezoidal weights, so that `integrate(div) == boundary_flux` exactly.
fn conservative_derivative_line(u: &[f64], out: &mut [f64], dx: f64, boundary: Boundary) {
    let n = u.len();
    first_derivative_line(u, out, dx, boundary);
    if boundary == Boundary::Dirichlet {
        out[0] = (u[1] - u[0]) / dx;
        out[n - 1] = (u[n - 1] - u[n - 2]) / dx;
    }
}

fn second_derivative_line<T: Sample>(u: &[T], out: &mut [T], dx: f64, boundary: Boundary) {
    let n = u.len();
    let h = 1.0 / (dx * dx);
    for i in 1..n - 1 {
        out[i] = (u[i + 1] + u[i - 1] - u[i] * 2.0) * h;
    }
    match boundary {
        Boundary::Periodic => {
            out[0] = (u[1] + u[n - 1] - u[0] * 2.0) * h;
            out[n - 1] = (u[0] + u[n - 2] - u[n - 1] * 2.0) * h;
        }
        Boundary::Dirichlet => {
            out[0] = (u[0] * 2.0 - u[1] * 5.0 + u[2] * 4.0 - u[3]) * h;
            out[n - 1] = (u[n - 1] * 2.0 - u[n - 2] * 5.0 + u[n - 3] * 4.0 - u[n - 4]) * h;
        }
    }
}

/// Second-order derivative along `axis`: centered in the interior,
/// one-sided at Dirichlet ends, wrapped on periodic axes.
pub fn gradient<T: Sample>(f: &Field<T>, axis: usize) -> Result<Field<T>> {
    let ax = *f.grid().axis(axis)?;
    let dx = ax.spacing();
    Ok(along_axis(f, axis, |u, out| {
        first_derivative_line(u, out, dx, ax.boundary)
    }))
}

/// Second derivative along one axis with the same boundary policy.
pub fn second_derivative<T: Sample>(f: &Field<T>, axis: usize) -> Result<Field<T>> {
    let ax = *f.grid().axis(axis)?;
    let dx = ax.spacing();
    Ok(along_axis(f, axis, |u, out| {
        second_derivative_line(u, out, dx, ax.boundary)
    }))
}

/// 3-point (1D) or 5-point (2D) Laplacian.
pub fn laplacian<T: Sample>(f: &Field<T>) -> Field<T> {
    let mut acc = second_derivative(f, 0).expect("axis 0 exists");
    for axis in 1..f.grid().dim() {
        let d = second_derivative(f, axis).expect("axis in range");
        for (a, b) in acc.values_mut().iter_mut().zip(d.values()) {
            *a = *a + *b;
        }
    }
    acc
}

/// Quadrature with the grid weights.
pub fn integrate<T: Sample>(f: &Field<T>) -> T {
    f.values()
        .iter()
        .zip(f.grid().weights())
        .fold(T::zero(), |acc, (&v, &w)| acc + v * w)
}

/// `∫ conj(f) g`, conjugate-linear in `f`.
pub fn inner_product(f: &ComplexField, g: &ComplexField) -> Result<Complex64> {
    f.check_grid(g)?;
    Ok(f.values()
        .iter()
        .zip(g.values())
        .zip(f.grid().weights())
        .fold(Complex64::new(0.0, 0.0), |acc, ((a, b), &w)| {
            acc + a.conj() * b * w
        }))
}

/// `Σ_i |∂_i f|²` built from edge differences.
///
/// Each node averages the squared forward and backward differences; a
/// Dirichlet end node takes its single inward edge. With these weights the
/// quadrature of the result equals `-∫ conj(f) ∇²f` exactly whenever `f`
/// vanishes on Dirichlet ends, which is what ties the tensor energy density
/// to the Hamiltonian expectation.
pub fn gradient_energy(f: &ComplexField) -> RealField {
    let grid = f.grid().clone();
    let mut acc = vec![0.0; grid.len()];
    for (axis, ax) in grid.axes().iter().enumerate() {
        let dx = ax.spacing();
        let inv = 1.0 / (dx * dx);
        for (start, stride, n) in grid.lines(axis) {
            let at = |i: usize| f.values()[start + i * stride];
            let edge = |i: usize, j: usize| (at(j) - at(i)).norm_sqr() * inv;
            for i in 0..n {
                let v = match ax.boundary {
                    Boundary::Periodic => {
                        let ip = (i + 1) % n;
                        let im = (i + n - 1) % n;
                        0.5 * (edge(i, ip) + edge(im, i))
                    }
                    Boundary::Dirichlet => {
                        if i == 0 {
                            edge(0, 1)
                        } else if i == n - 1 {
                            edge(n - 2, n - 1)
                        } else {
                            0.5 * (edge(i, i + 1) + edge(i - 1, i))
                        }
                    }
                };
                acc[start + i * stride] += v;
            }
        }
    }
    RealField::from_parts(grid, acc)
}

/// Divergence `Σ_i ∂_i F^i` of a flux with one real component per axis.
///
/// Interior nodes use centered differences; Dirichlet end nodes use the
/// first-order closure that makes the scheme summation-by-parts, so its
/// quadrature reduces to [`boundary_flux`].
pub fn flux_divergence(components: &[&RealField]) -> Result<RealField> {
    let first = components
        .first()
        .ok_or_else(|| Error::InvalidArgument("flux needs at least one component".into()))?;
    let grid = first.grid().clone();
    if components.len() != grid.dim() {
        return Err(Error::InvalidArgument(format!(
            "flux has {} components on a {}D grid",
            components.len(),
            grid.dim()
        )));
    }
    let mut acc = vec![0.0; grid.len()];
    for (axis, comp) in components.iter().enumerate() {
        first.check_grid(comp)?;
        let ax = grid.axes()[axis];
        let d = along_axis(comp, axis, |u, out| {
            conservative_derivative_line(u, out, ax.spacing(), ax.boundary)
        });
        for (a, b) in acc.iter_mut().zip(d.values()) {
            *a += b;
        }
    }
    Ok(RealField::from_parts(grid, acc))
}

/// Discrete surface integral of the flux through the Dirichlet ends.
/// Periodic axes contribute nothing.
pub fn boundary_flux(components: &[&RealField]) -> Result<f64> {
    let first = components
        .first()
        .ok_or_else(|| Error::InvalidArgument("flux needs at least one component".into()))?;
    let grid: &Grid = first.grid();
    let mut total = 0.0;
    for (axis, comp) in components.iter().enumerate() {
        first.check_grid(comp)?;
        let ax = grid.axes()[axis];
        if ax.boundary == Boundary::Periodic {
            continue;
        }
        let other = grid.axes().get(1 - axis.min(1)).filter(|_| grid.dim() == 2);
        let transverse: Vec<f64> = match other {
            Some(o) => {
                let dx = o.spacing();
                (0..o.n)
                    .map(|i| {
                        if o.boundary == Boundary::Dirichlet && (i == 0 || i == o.n - 1) {
                            0.5 * dx
                        } else {
                            dx
                        }
                    })
                    .collect()
            }
            None => vec![1.0],
        };
        for ((start, stride, n), w) in grid.lines(axis).into_iter().zip(transverse) {
            let v = comp.values();
            total += w * (v[start + (n - 1) * stride] - v[start]);
        }
    }
    Ok(total)
}
