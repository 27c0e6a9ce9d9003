//! External scalar potentials `V(x, t)` with their space and time
//! derivatives.

use std::sync::Arc;

use crate::error::{Error, Result};
use crate::fieldgrid::{Grid, RealField};

/// Time profile of the interior level of a moving-floor well.
#[derive(Debug, Clone, PartialEq)]
pub enum Floor {
    /// `v0 * sin(omega t)`
    Sinusoid { v0: f64, omega: f64 },
    /// `alpha * t`
    Ramp { alpha: f64 },
    /// `v0`
    Constant { v0: f64 },
    /// Linear interpolation between `(times[i], values[i])`, held constant
    /// outside the table.
    Tabulated { times: Vec<f64>, values: Vec<f64> },
}

/// Absolute tolerance of the adaptive quadrature used for tabulated floors.
pub const PHASE_QUADRATURE_TOL: f64 = 1e-10;

impl Floor {
    pub fn tabulated(times: Vec<f64>, values: Vec<f64>) -> Result<Self> {
        if times.len() < 2 || times.len() != values.len() {
            return Err(Error::InvalidArgument(
                "tabulated floor needs matching time/value tables of length >= 2".into(),
            ));
        }
        if times.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::InvalidArgument(
                "tabulated floor times must be strictly increasing".into(),
            ));
        }
        if values.iter().chain(&times).any(|v| !v.is_finite()) {
            return Err(Error::InvalidArgument("tabulated floor has non-finite entries".into()));
        }
        Ok(Floor::Tabulated { times, values })
    }

    /// Samples `f` at `times` into a tabulated floor.
    pub fn sample_from(times: Vec<f64>, f: impl Fn(f64) -> f64) -> Result<Self> {
        let values = times.iter().map(|&t| f(t)).collect();
        Self::tabulated(times, values)
    }

    pub fn value(&self, t: f64) -> f64 {
        match self {
            Floor::Sinusoid { v0, omega } => v0 * (omega * t).sin(),
            Floor::Ramp { alpha } => alpha * t,
            Floor::Constant { v0 } => *v0,
            Floor::Tabulated { times, values } => interpolate(times, values, t),
        }
    }

    /// `dV/dt`; exact for the closed forms, centered difference for tables.
    pub fn derivative(&self, t: f64) -> f64 {
        match self {
            Floor::Sinusoid { v0, omega } => v0 * omega * (omega * t).cos(),
            Floor::Ramp { alpha } => *alpha,
            Floor::Constant { .. } => 0.0,
            Floor::Tabulated { times, .. } => {
                let span = times.windows(2).map(|w| w[1] - w[0]).fold(f64::INFINITY, f64::min);
                let h = 1e-6 * span;
                (self.value(t + h) - self.value(t - h)) / (2.0 * h)
            }
        }
    }

    /// `∫_0^t V(t') dt'`.
    pub fn integral(&self, t: f64) -> f64 {
        match self {
            Floor::Sinusoid { v0, omega } => v0 / omega * (1.0 - (omega * t).cos()),
            Floor::Ramp { alpha } => 0.5 * alpha * t * t,
            Floor::Constant { v0 } => v0 * t,
            Floor::Tabulated { times, .. } => {
                // split at knots so every panel sees a smooth integrand
                let (lo, hi, sign) = if t >= 0.0 { (0.0, t, 1.0) } else { (t, 0.0, -1.0) };
                let mut cuts = vec![lo];
                cuts.extend(times.iter().copied().filter(|&k| k > lo && k < hi));
                cuts.push(hi);
                let f = |s: f64| self.value(s);
                sign * cuts
                    .windows(2)
                    .map(|w| adaptive_simpson(&f, w[0], w[1], PHASE_QUADRATURE_TOL, 40))
                    .sum::<f64>()
            }
        }
    }
}

fn interpolate(times: &[f64], values: &[f64], t: f64) -> f64 {
    let n = times.len();
    if t <= times[0] {
        return values[0];
    }
    if t >= times[n - 1] {
        return values[n - 1];
    }
    let i = times.partition_point(|&k| k <= t).saturating_sub(1).min(n - 2);
    let s = (t - times[i]) / (times[i + 1] - times[i]);
    values[i] + s * (values[i + 1] - values[i])
}

fn adaptive_simpson(f: &impl Fn(f64) -> f64, a: f64, b: f64, tol: f64, depth: u32) -> f64 {
    fn simpson(fa: f64, fm: f64, fb: f64, a: f64, b: f64) -> f64 {
        (b - a) / 6.0 * (fa + 4.0 * fm + fb)
    }
    #[allow(clippy::too_many_arguments)]
    fn recurse(
        f: &impl Fn(f64) -> f64,
        a: f64,
        b: f64,
        fa: f64,
        fm: f64,
        fb: f64,
        whole: f64,
        tol: f64,
        depth: u32,
    ) -> f64 {
        let m = 0.5 * (a + b);
        let (lm, rm) = (0.5 * (a + m), 0.5 * (m + b));
        let (flm, frm) = (f(lm), f(rm));
        let left = simpson(fa, flm, fm, a, m);
        let right = simpson(fm, frm, fb, m, b);
        let delta = left + right - whole;
        if depth == 0 || delta.abs() <= 15.0 * tol {
            left + right + delta / 15.0
        } else {
            recurse(f, a, m, fa, flm, fm, left, 0.5 * tol, depth - 1)
                + recurse(f, m, b, fm, frm, fb, right, 0.5 * tol, depth - 1)
        }
    }
    if b <= a {
        return 0.0;
    }
    let (fa, fb, fm) = (f(a), f(b), f(0.5 * (a + b)));
    let whole = simpson(fa, fm, fb, a, b);
    recurse(f, a, b, fa, fm, fb, whole, tol, depth)
}

/// A space-time table of node values on a grid, interpolated bilinearly in
/// space and linearly in time.
#[derive(Debug, Clone, PartialEq)]
pub struct TabulatedPotential {
    grid: Arc<Grid>,
    times: Vec<f64>,
    frames: Vec<Vec<f64>>,
}

impl TabulatedPotential {
    pub fn new(grid: Arc<Grid>, times: Vec<f64>, frames: Vec<Vec<f64>>) -> Result<Self> {
        if times.is_empty() || times.len() != frames.len() {
            return Err(Error::InvalidArgument(
                "tabulated potential needs one frame per time knot".into(),
            ));
        }
        if times.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::InvalidArgument("knot times must increase".into()));
        }
        for f in &frames {
            if f.len() != grid.len() {
                return Err(Error::SampleCount {
                    expected: grid.len(),
                    got: f.len(),
                });
            }
            if let Some(k) = f.iter().position(|v| !v.is_finite()) {
                return Err(Error::NonFinite(k));
            }
        }
        Ok(TabulatedPotential { grid, times, frames })
    }

    fn frame_at(&self, t: f64) -> (usize, usize, f64) {
        let n = self.times.len();
        if n == 1 || t <= self.times[0] {
            return (0, 0, 0.0);
        }
        if t >= self.times[n - 1] {
            return (n - 1, n - 1, 0.0);
        }
        let i = self.times.partition_point(|&k| k <= t).saturating_sub(1).min(n - 2);
        let s = (t - self.times[i]) / (self.times[i + 1] - self.times[i]);
        (i, i + 1, s)
    }

    fn node_value(&self, k: usize, t: f64) -> f64 {
        let (a, b, s) = self.frame_at(t);
        self.frames[a][k] + s * (self.frames[b][k] - self.frames[a][k])
    }

    fn value(&self, p: [f64; 2], t: f64) -> f64 {
        let axes = self.grid.axes();
        let locate = |a: usize| -> (usize, usize, f64) {
            let ax = &axes[a];
            let x0 = ax.coord(0);
            let u = ((p[a] - x0) / ax.spacing()).clamp(0.0, (ax.n - 1) as f64);
            let i = (u.floor() as usize).min(ax.n - 2);
            (i, i + 1, u - i as f64)
        };
        let (i0, i1, sx) = locate(0);
        if self.grid.dim() == 1 {
            let (a, b) = (self.node_value(i0, t), self.node_value(i1, t));
            return a + sx * (b - a);
        }
        let (j0, j1, sy) = locate(1);
        let nx = axes[0].n;
        let v = |i: usize, j: usize| self.node_value(i + nx * j, t);
        let lo = v(i0, j0) + sx * (v(i1, j0) - v(i0, j0));
        let hi = v(i0, j1) + sx * (v(i1, j1) - v(i0, j1));
        lo + sy * (hi - lo)
    }

    fn time_step(&self) -> f64 {
        self.times
            .windows(2)
            .map(|w| w[1] - w[0])
            .fold(f64::INFINITY, f64::min)
    }
}

/// The external potential acting on a field.
#[derive(Debug, Clone, PartialEq)]
pub enum PotentialSpec {
    /// `V = v0`
    Constant { v0: f64 },
    /// `V = Σ s_i x^i`; the force is `-s`.
    Linear { slope: [f64; 2] },
    /// `V = ½ m Σ ω_i² (x^i - x0^i)²`
    Harmonic {
        center: [f64; 2],
        omega: [f64; 2],
        mass: f64,
    },
    /// Infinite well on `[0, width]` whose interior level follows `floor`.
    /// The walls are realized by Dirichlet boundaries.
    MovingFloor { floor: Floor, width: f64 },
    Tabulated(TabulatedPotential),
}

impl PotentialSpec {
    pub fn zero() -> Self {
        PotentialSpec::Constant { v0: 0.0 }
    }

    pub fn kind(&self) -> &'static str {
        match self {
            PotentialSpec::Constant { .. } => "constant",
            PotentialSpec::Linear { .. } => "linear",
            PotentialSpec::Harmonic { .. } => "harmonic",
            PotentialSpec::MovingFloor { .. } => "moving_floor",
            PotentialSpec::Tabulated(_) => "tabulated",
        }
    }

    pub fn value(&self, p: [f64; 2], t: f64) -> f64 {
        match self {
            PotentialSpec::Constant { v0 } => *v0,
            PotentialSpec::Linear { slope } => slope[0] * p[0] + slope[1] * p[1],
            PotentialSpec::Harmonic {
                center,
                omega,
                mass,
            } => {
                let dx = p[0] - center[0];
                let dy = p[1] - center[1];
                0.5 * mass * (omega[0] * omega[0] * dx * dx + omega[1] * omega[1] * dy * dy)
            }
            PotentialSpec::MovingFloor { floor, .. } => floor.value(t),
            PotentialSpec::Tabulated(tab) => tab.value(p, t),
        }
    }

    /// `∇V`; closed form except for tables, which use a centered difference
    /// with the table's own spacing.
    pub fn grad(&self, p: [f64; 2], t: f64) -> [f64; 2] {
        match self {
            PotentialSpec::Constant { .. } | PotentialSpec::MovingFloor { .. } => [0.0, 0.0],
            PotentialSpec::Linear { slope } => *slope,
            PotentialSpec::Harmonic {
                center,
                omega,
                mass,
            } => [
                mass * omega[0] * omega[0] * (p[0] - center[0]),
                mass * omega[1] * omega[1] * (p[1] - center[1]),
            ],
            PotentialSpec::Tabulated(tab) => {
                let mut g = [0.0, 0.0];
                for (a, ax) in tab.grid.axes().iter().enumerate() {
                    let h = ax.spacing();
                    let mut plus = p;
                    let mut minus = p;
                    plus[a] += h;
                    minus[a] -= h;
                    g[a] = (tab.value(plus, t) - tab.value(minus, t)) / (2.0 * h);
                }
                g
            }
        }
    }

    /// `∂V/∂t`; closed form except for tables.
    pub fn time_derivative(&self, p: [f64; 2], t: f64) -> f64 {
        match self {
            PotentialSpec::Constant { .. }
            | PotentialSpec::Linear { .. }
            | PotentialSpec::Harmonic { .. } => 0.0,
            PotentialSpec::MovingFloor { floor, .. } => floor.derivative(t),
            PotentialSpec::Tabulated(tab) => {
                let h = 1e-6 * tab.time_step().min(1.0);
                (tab.value(p, t + h) - tab.value(p, t - h)) / (2.0 * h)
            }
        }
    }

    pub fn is_static(&self) -> bool {
        match self {
            PotentialSpec::Constant { .. }
            | PotentialSpec::Linear { .. }
            | PotentialSpec::Harmonic { .. } => true,
            PotentialSpec::MovingFloor { floor, .. } => matches!(floor, Floor::Constant { .. }),
            PotentialSpec::Tabulated(tab) => tab.times.len() == 1,
        }
    }

    /// Spatially uniform part of `V` at time `t`.
    pub fn uniform_part(&self, t: f64) -> f64 {
        match self {
            PotentialSpec::Constant { v0 } => *v0,
            PotentialSpec::MovingFloor { floor, .. } => floor.value(t),
            _ => 0.0,
        }
    }

    /// `∫_{t0}^{t1}` of the uniform part, exact for closed-form floors.
    pub fn uniform_phase(&self, t0: f64, t1: f64) -> f64 {
        match self {
            PotentialSpec::Constant { v0 } => v0 * (t1 - t0),
            PotentialSpec::MovingFloor { floor, .. } => floor.integral(t1) - floor.integral(t0),
            _ => 0.0,
        }
    }

    pub fn sample(&self, grid: &Arc<Grid>, t: f64) -> RealField {
        RealField::from_parts(
            grid.clone(),
            (0..grid.len()).map(|k| self.value(grid.point(k), t)).collect(),
        )
    }

    /// `V - uniform_part(t)` on the grid.
    pub fn sample_nonuniform(&self, grid: &Arc<Grid>, t: f64) -> RealField {
        let u = self.uniform_part(t);
        RealField::from_parts(
            grid.clone(),
            (0..grid.len())
                .map(|k| self.value(grid.point(k), t) - u)
                .collect(),
        )
    }

    /// One field per grid axis.
    pub fn sample_grad(&self, grid: &Arc<Grid>, t: f64) -> Vec<RealField> {
        let g: Vec<[f64; 2]> = (0..grid.len()).map(|k| self.grad(grid.point(k), t)).collect();
        (0..grid.dim())
            .map(|a| RealField::from_parts(grid.clone(), g.iter().map(|v| v[a]).collect()))
            .collect()
    }

    pub fn sample_time_derivative(&self, grid: &Arc<Grid>, t: f64) -> RealField {
        RealField::from_parts(
            grid.clone(),
            (0..grid.len())
                .map(|k| self.time_derivative(grid.point(k), t))
                .collect(),
        )
    }
}
