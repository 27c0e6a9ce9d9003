//! Uniform Cartesian grids, sampled fields and physical constants.
//!
//! Nodes are stored with the first axis varying fastest: node `(ix, iy)`
//! lives at flat index `ix + nx * iy`. Dirichlet axes include both end
//! points; periodic axes place `n` cell-centred nodes on `[min, max)`.

mod ops;

use std::ops::{Add, Mul, Neg, Sub};
use std::sync::Arc;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use ops::{
    boundary_flux, flux_divergence, gradient, gradient_energy, inner_product, integrate,
    laplacian, second_derivative,
};

/// Minimum number of nodes per axis.
pub const MIN_POINTS: usize = 8;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Boundary {
    Dirichlet,
    Periodic,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Axis {
    pub min: f64,
    pub max: f64,
    pub n: usize,
    pub boundary: Boundary,
}

impl Axis {
    pub fn new(min: f64, max: f64, n: usize, boundary: Boundary) -> Self {
        Axis { min, max, n, boundary }
    }

    pub fn dirichlet(min: f64, max: f64, n: usize) -> Self {
        Self::new(min, max, n, Boundary::Dirichlet)
    }

    pub fn periodic(min: f64, max: f64, n: usize) -> Self {
        Self::new(min, max, n, Boundary::Periodic)
    }

    pub fn spacing(&self) -> f64 {
        match self.boundary {
            Boundary::Dirichlet => (self.max - self.min) / (self.n - 1) as f64,
            Boundary::Periodic => (self.max - self.min) / self.n as f64,
        }
    }

    /// Node coordinate. Periodic axes use cell-centred nodes.
    pub fn coord(&self, i: usize) -> f64 {
        match self.boundary {
            Boundary::Dirichlet => self.min + i as f64 * self.spacing(),
            Boundary::Periodic => self.min + (i as f64 + 0.5) * self.spacing(),
        }
    }

    pub fn length(&self) -> f64 {
        self.max - self.min
    }

    /// Trapezoidal weights on Dirichlet axes, uniform on periodic axes.
    fn weights(&self) -> Vec<f64> {
        let dx = self.spacing();
        let mut w = vec![dx; self.n];
        if self.boundary == Boundary::Dirichlet {
            w[0] = 0.5 * dx;
            w[self.n - 1] = 0.5 * dx;
        }
        w
    }

    fn validate(&self, index: usize) -> Result<()> {
        if self.n < MIN_POINTS {
            return Err(Error::InvalidGrid(format!(
                "axis {index} has {} points, need at least {MIN_POINTS}",
                self.n
            )));
        }
        if !(self.min.is_finite() && self.max.is_finite() && self.max > self.min) {
            return Err(Error::InvalidGrid(format!(
                "axis {index} extent [{}, {}] is empty or non-finite",
                self.min, self.max
            )));
        }
        Ok(())
    }
}

/// A 1D or 2D uniform lattice with its quadrature weights.
#[derive(Debug, Clone)]
pub struct Grid {
    axes: Vec<Axis>,
    weights: Vec<f64>,
}

impl PartialEq for Grid {
    fn eq(&self, other: &Self) -> bool {
        self.axes == other.axes
    }
}

impl Grid {
    pub fn new(axes: Vec<Axis>) -> Result<Arc<Grid>> {
        if axes.is_empty() || axes.len() > 2 {
            return Err(Error::InvalidGrid(format!(
                "dimension must be 1 or 2, got {}",
                axes.len()
            )));
        }
        for (i, a) in axes.iter().enumerate() {
            a.validate(i)?;
        }
        let wx = axes[0].weights();
        let weights = if axes.len() == 1 {
            wx
        } else {
            let wy = axes[1].weights();
            wy.iter()
                .flat_map(|&y| wx.iter().map(move |&x| x * y))
                .collect()
        };
        Ok(Arc::new(Grid { axes, weights }))
    }

    pub fn line(axis: Axis) -> Result<Arc<Grid>> {
        Self::new(vec![axis])
    }

    pub fn plane(x: Axis, y: Axis) -> Result<Arc<Grid>> {
        Self::new(vec![x, y])
    }

    pub fn dim(&self) -> usize {
        self.axes.len()
    }

    pub fn axes(&self) -> &[Axis] {
        &self.axes
    }

    pub fn axis(&self, i: usize) -> Result<&Axis> {
        self.axes.get(i).ok_or(Error::AxisOutOfRange {
            axis: i,
            dim: self.dim(),
        })
    }

    pub fn spacing(&self, axis: usize) -> f64 {
        self.axes[axis].spacing()
    }

    pub fn min_spacing(&self) -> f64 {
        self.axes
            .iter()
            .map(Axis::spacing)
            .fold(f64::INFINITY, f64::min)
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.axes[0].n, self.axes.get(1).map_or(1, |a| a.n))
    }

    pub fn len(&self) -> usize {
        let (nx, ny) = self.shape();
        nx * ny
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn volume(&self) -> f64 {
        self.axes.iter().map(Axis::length).product()
    }

    /// Splits a flat index into per-axis indices.
    pub fn unflatten(&self, k: usize) -> (usize, usize) {
        let nx = self.axes[0].n;
        (k % nx, k / nx)
    }

    /// Coordinates of node `k`; the second entry is 0 on 1D grids.
    pub fn point(&self, k: usize) -> [f64; 2] {
        let (ix, iy) = self.unflatten(k);
        let x = self.axes[0].coord(ix);
        let y = self.axes.get(1).map_or(0.0, |a| a.coord(iy));
        [x, y]
    }

    /// True if the node sits on the end point of a Dirichlet axis.
    pub fn is_dirichlet_boundary(&self, k: usize) -> bool {
        let (ix, iy) = self.unflatten(k);
        let idx = [ix, iy];
        self.axes.iter().enumerate().any(|(a, ax)| {
            ax.boundary == Boundary::Dirichlet && (idx[a] == 0 || idx[a] == ax.n - 1)
        })
    }

    /// True if the node is within `ring` cells of a Dirichlet end point.
    pub fn near_dirichlet_boundary(&self, k: usize, ring: usize) -> bool {
        let (ix, iy) = self.unflatten(k);
        let idx = [ix, iy];
        self.axes.iter().enumerate().any(|(a, ax)| {
            ax.boundary == Boundary::Dirichlet && (idx[a] <= ring || idx[a] + ring >= ax.n - 1)
        })
    }

    /// `(start, stride, len)` for every line of nodes along `axis`.
    pub(crate) fn lines(&self, axis: usize) -> Vec<(usize, usize, usize)> {
        let (nx, ny) = self.shape();
        if axis == 0 {
            (0..ny).map(|iy| (iy * nx, 1, nx)).collect()
        } else {
            (0..nx).map(|ix| (ix, nx, ny)).collect()
        }
    }
}

/// Scalar types a field can hold.
pub trait Sample:
    Copy
    + Send
    + Sync
    + std::fmt::Debug
    + PartialEq
    + Add<Output = Self>
    + Sub<Output = Self>
    + Neg<Output = Self>
    + Mul<f64, Output = Self>
{
    fn zero() -> Self;
    fn finite(&self) -> bool;
}

impl Sample for f64 {
    fn zero() -> Self {
        0.0
    }
    fn finite(&self) -> bool {
        self.is_finite()
    }
}

impl Sample for Complex64 {
    fn zero() -> Self {
        Complex64::new(0.0, 0.0)
    }
    fn finite(&self) -> bool {
        self.re.is_finite() && self.im.is_finite()
    }
}

/// Samples of a scalar quantity at every node of a grid.
#[derive(Debug, Clone, PartialEq)]
pub struct Field<T> {
    grid: Arc<Grid>,
    values: Vec<T>,
}

pub type ComplexField = Field<Complex64>;
pub type RealField = Field<f64>;

impl<T: Sample> Field<T> {
    pub fn new(grid: Arc<Grid>, values: Vec<T>) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(Error::SampleCount {
                expected: grid.len(),
                got: values.len(),
            });
        }
        if let Some(k) = values.iter().position(|v| !v.finite()) {
            return Err(Error::NonFinite(k));
        }
        Ok(Field { grid, values })
    }

    /// Builds a field without the finiteness scan. Callers guarantee the
    /// length; used on hot paths whose inputs were already validated.
    pub(crate) fn from_parts(grid: Arc<Grid>, values: Vec<T>) -> Self {
        debug_assert_eq!(values.len(), grid.len());
        Field { grid, values }
    }

    pub fn from_fn(grid: Arc<Grid>, f: impl Fn([f64; 2]) -> T) -> Result<Self> {
        let values = (0..grid.len()).map(|k| f(grid.point(k))).collect();
        Self::new(grid, values)
    }

    pub fn constant(grid: Arc<Grid>, value: T) -> Self {
        let n = grid.len();
        Field {
            grid,
            values: vec![value; n],
        }
    }

    pub fn zeros(grid: Arc<Grid>) -> Self {
        Self::constant(grid, T::zero())
    }

    pub fn grid(&self) -> &Arc<Grid> {
        &self.grid
    }

    pub fn values(&self) -> &[T] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [T] {
        &mut self.values
    }

    pub fn into_values(self) -> Vec<T> {
        self.values
    }

    pub fn same_grid(&self, other: &Field<impl Sample>) -> bool {
        Arc::ptr_eq(&self.grid, &other.grid) || *self.grid == *other.grid
    }

    pub(crate) fn check_grid(&self, other: &Field<impl Sample>) -> Result<()> {
        if self.same_grid(other) {
            Ok(())
        } else {
            Err(Error::GridMismatch)
        }
    }

    pub fn map<U: Sample>(&self, f: impl Fn(T) -> U) -> Field<U> {
        Field::from_parts(self.grid.clone(), self.values.iter().map(|&v| f(v)).collect())
    }

    pub fn zip_map<U: Sample, V: Sample>(
        &self,
        other: &Field<U>,
        f: impl Fn(T, U) -> V,
    ) -> Result<Field<V>> {
        self.check_grid(other)?;
        Ok(Field::from_parts(
            self.grid.clone(),
            self.values
                .iter()
                .zip(&other.values)
                .map(|(&a, &b)| f(a, b))
                .collect(),
        ))
    }

    pub fn scale(&self, s: f64) -> Self {
        self.map(|v| v * s)
    }

    pub fn max_abs(&self) -> f64
    where
        T: Into<Magnitude>,
    {
        self.values
            .iter()
            .map(|&v| v.into().0)
            .fold(0.0, f64::max)
    }
}

/// Absolute value of a sample, used for norms.
pub struct Magnitude(pub f64);

impl From<f64> for Magnitude {
    fn from(v: f64) -> Self {
        Magnitude(v.abs())
    }
}

impl From<Complex64> for Magnitude {
    fn from(v: Complex64) -> Self {
        Magnitude(v.norm())
    }
}

impl ComplexField {
    pub fn conj(&self) -> Self {
        self.map(|v| v.conj())
    }

    pub fn norm_sqr(&self) -> RealField {
        self.map(|v| v.norm_sqr())
    }

    pub fn real(&self) -> RealField {
        self.map(|v| v.re)
    }
}

impl RealField {
    pub fn to_complex(&self) -> ComplexField {
        self.map(|v| Complex64::new(v, 0.0))
    }
}

/// hbar, mass, speed of light and charge; all strictly positive.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PhysicalConstants {
    pub hbar: f64,
    pub m: f64,
    pub c: f64,
    pub q: f64,
}

impl Default for PhysicalConstants {
    fn default() -> Self {
        PhysicalConstants {
            hbar: 1.0,
            m: 1.0,
            c: 1.0,
            q: 1.0,
        }
    }
}

impl PhysicalConstants {
    pub fn new(hbar: f64, m: f64, c: f64, q: f64) -> Result<Self> {
        let k = PhysicalConstants { hbar, m, c, q };
        k.validate()?;
        Ok(k)
    }

    pub fn validate(&self) -> Result<()> {
        for (name, v) in [("hbar", self.hbar), ("m", self.m), ("c", self.c), ("q", self.q)] {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::InvalidConstants(format!("{name} = {v} must be > 0")));
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn spacing_follows_boundary_kind() {
        assert_eq!(Axis::dirichlet(0.0, 1.0, 11).spacing(), 0.1);
        assert_eq!(Axis::periodic(0.0, 1.0, 10).spacing(), 0.1);
    }

    #[test]
    fn rejects_small_axes_and_bad_dims() {
        assert!(Grid::line(Axis::dirichlet(0.0, 1.0, 7)).is_err());
        assert!(Grid::line(Axis::dirichlet(1.0, 1.0, 16)).is_err());
        assert!(Grid::new(vec![]).is_err());
        let a = Axis::periodic(0.0, 1.0, 8);
        assert!(Grid::new(vec![a, a, a]).is_err());
    }

    #[test]
    fn weights_sum_to_volume() {
        for g in [
            Grid::line(Axis::dirichlet(-2.0, 3.0, 17)).unwrap(),
            Grid::line(Axis::periodic(0.0, 1.5, 33)).unwrap(),
            Grid::plane(Axis::dirichlet(0.0, 2.0, 9), Axis::periodic(-1.0, 1.0, 12)).unwrap(),
        ] {
            let s: f64 = g.weights().iter().sum();
            assert!((s - g.volume()).abs() <= 1e-12 * g.volume());
        }
    }

    #[test]
    fn field_validates_samples() {
        let g = Grid::line(Axis::periodic(0.0, 1.0, 8)).unwrap();
        assert!(matches!(
            RealField::new(g.clone(), vec![0.0; 7]),
            Err(Error::SampleCount { .. })
        ));
        let mut v = vec![0.0; 8];
        v[3] = f64::NAN;
        assert_eq!(RealField::new(g, v), Err(Error::NonFinite(3)));
    }

    #[test]
    fn constants_must_be_positive() {
        assert!(PhysicalConstants::new(1.0, 1.0, 1.0, 1.0).is_ok());
        assert!(PhysicalConstants::new(1.0, 0.0, 1.0, 1.0).is_err());
        assert!(PhysicalConstants::new(1.0, 1.0, -1.0, 1.0).is_err());
    }

    #[test]
    fn boundary_classification() {
        let g = Grid::plane(Axis::dirichlet(0.0, 1.0, 8), Axis::periodic(0.0, 1.0, 8)).unwrap();
        assert!(g.is_dirichlet_boundary(0));
        assert!(g.is_dirichlet_boundary(7));
        assert!(!g.is_dirichlet_boundary(3));
        // periodic axis has no boundary nodes
        assert!(!g.is_dirichlet_boundary(8 * 7 + 3));
        assert!(g.near_dirichlet_boundary(1, 1));
        assert!(!g.near_dirichlet_boundary(2, 1));
    }
}
