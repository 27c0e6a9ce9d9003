//! Local continuity residuals, global Ehrenfest series and convergence-order
//! fits.
//!
//! Every check is built so the two routes agree exactly on the grid: the
//! integral of a local residual equals `(lhs - rhs)` of the matching
//! Ehrenfest series (scaled by `-1/c` for energy) plus the flux through the
//! Dirichlet ends.

use std::sync::Arc;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::fieldgrid::{boundary_flux, flux_divergence, integrate, Grid, PhysicalConstants, RealField};
use crate::kleingordon::KGState;
use crate::observables::{
    expectation_h, expectation_lz, expectation_p, field_angular_momentum, field_energy,
    field_momentum, kg_tensor, rotation_current, schrodinger_tensor, source_term, FieldRef,
    SourceTerm, TensorComponents, Theory,
};
use crate::potential::PotentialSpec;
use crate::schrodinger::SchrodingerState;

/// Residual norms at or below this multiple of the V=0 control count as
/// "at floor".
pub const FLOOR_FACTOR: f64 = 10.0;

/// Relative rounding allowance added to every floor, so that a control
/// that happens to vanish identically does not demand exact zeros.
pub const FLOOR_ROUNDING: f64 = 1e-12;

/// Observed order must land within this distance of the target.
pub const ORDER_TOLERANCE: f64 = 0.3;

const SPACING_TOL: f64 = 1e-6;

/// Which balance law is checked: energy (`ν = 0`), momentum along an axis
/// (`ν = axis + 1`) or the 2D angular momentum about the origin.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Component {
    Energy,
    Momentum(usize),
    Angular,
}

impl Component {
    /// Tensor column index, `None` for angular momentum.
    pub fn nu(self) -> Option<usize> {
        match self {
            Component::Energy => Some(0),
            Component::Momentum(a) => Some(a + 1),
            Component::Angular => None,
        }
    }

    pub fn label(self) -> String {
        match self {
            Component::Energy => "energy".into(),
            Component::Momentum(a) => format!("momentum_{}", ["x", "y"][a.min(1)]),
            Component::Angular => "angular".into(),
        }
    }

    /// Short file tag: `nu0`, `nu1`, `nu2`, `ang`.
    pub fn tag(self) -> String {
        match self.nu() {
            Some(nu) => format!("nu{nu}"),
            None => "ang".into(),
        }
    }

    /// Factor `s` in `∫residual = s·(lhs - rhs) + flux`.
    pub fn route_factor(self, c: f64) -> f64 {
        match self {
            Component::Energy => -1.0 / c,
            _ => 1.0,
        }
    }

    fn check(self, dim: usize) -> Result<()> {
        match self {
            Component::Momentum(a) if a >= dim => Err(Error::AxisOutOfRange { axis: a, dim }),
            Component::Angular if dim != 2 => Err(Error::InvalidArgument(
                "angular balance needs a 2D grid".into(),
            )),
            _ => Ok(()),
        }
    }
}

/// A field state the checks can be run on.
pub trait Snapshot {
    fn theory(&self) -> Theory;
    fn time(&self) -> f64;
    fn grid(&self) -> &Arc<Grid>;
    fn constants(&self) -> &PhysicalConstants;
    fn potential(&self) -> &PotentialSpec;
    fn tensor(&self) -> Result<TensorComponents>;
    fn source(&self) -> Result<SourceTerm>;
    /// The conserved-or-driven quantity on the left of the Ehrenfest
    /// relation, given this snapshot's tensor.
    fn tracked(&self, component: Component, tensor: &TensorComponents) -> Result<f64>;
}

impl Snapshot for SchrodingerState {
    fn theory(&self) -> Theory {
        Theory::Schrodinger
    }
    fn time(&self) -> f64 {
        self.t
    }
    fn grid(&self) -> &Arc<Grid> {
        self.psi.grid()
    }
    fn constants(&self) -> &PhysicalConstants {
        &self.constants
    }
    fn potential(&self) -> &PotentialSpec {
        &self.potential
    }
    fn tensor(&self) -> Result<TensorComponents> {
        let v = self.potential.sample(self.psi.grid(), self.t);
        schrodinger_tensor(&self.psi, &v, &self.constants, self.t)
    }
    fn source(&self) -> Result<SourceTerm> {
        source_term(
            FieldRef::Schrodinger { psi: &self.psi },
            &self.potential,
            &self.constants,
            self.t,
        )
    }
    fn tracked(&self, component: Component, _tensor: &TensorComponents) -> Result<f64> {
        component.check(self.psi.grid().dim())?;
        match component {
            Component::Energy => {
                let v = self.potential.sample(self.psi.grid(), self.t);
                expectation_h(&self.psi, &v, &self.constants)
            }
            Component::Momentum(a) => Ok(expectation_p(&self.psi, &self.constants)?[a]),
            Component::Angular => expectation_lz(&self.psi, &self.constants),
        }
    }
}

impl Snapshot for KGState {
    fn theory(&self) -> Theory {
        Theory::KleinGordon
    }
    fn time(&self) -> f64 {
        self.t
    }
    fn grid(&self) -> &Arc<Grid> {
        self.phi.grid()
    }
    fn constants(&self) -> &PhysicalConstants {
        &self.constants
    }
    fn potential(&self) -> &PotentialSpec {
        &self.potential
    }
    fn tensor(&self) -> Result<TensorComponents> {
        let v = self.potential.sample(self.phi.grid(), self.t);
        kg_tensor(&self.phi, &self.phi_dot, &v, &self.constants, self.t)
    }
    fn source(&self) -> Result<SourceTerm> {
        source_term(
            FieldRef::KleinGordon {
                phi: &self.phi,
                phi_dot: &self.phi_dot,
            },
            &self.potential,
            &self.constants,
            self.t,
        )
    }
    fn tracked(&self, component: Component, tensor: &TensorComponents) -> Result<f64> {
        component.check(tensor.dim())?;
        match component {
            Component::Energy => Ok(field_energy(tensor)),
            Component::Momentum(a) => Ok(field_momentum(tensor, &self.constants)[a]),
            Component::Angular => field_angular_momentum(tensor, &self.constants),
        }
    }
}

fn product(a: &RealField, b: &RealField) -> RealField {
    a.zip_map(b, |x, y| x * y).expect("fields share a grid")
}

/// Right-hand side of the Ehrenfest relation from a source term:
/// `-∫ρ∂ⱼV`, `∫ρ∂ₜV` or `∫ρ(r×E)_z`.
pub fn driven(component: Component, source: &SourceTerm) -> Result<f64> {
    component.check(source.grad_v.len())?;
    Ok(match component {
        Component::Energy => integrate(&product(&source.dl_dv, &source.dv_dt)),
        Component::Momentum(a) => -integrate(&product(&source.dl_dv, &source.grad_v[a])),
        Component::Angular => integrate(&torque_weighted(source)),
    })
}

/// `ρ(-x∂ᵧV + y∂ₓV)`.
fn torque_weighted(source: &SourceTerm) -> RealField {
    let grid = source.dl_dv.grid();
    let vals = (0..grid.len())
        .map(|n| {
            let p = grid.point(n);
            let (gx, gy) = (source.grad_v[0].values()[n], source.grad_v[1].values()[n]);
            source.dl_dv.values()[n] * (-p[0] * gy + p[1] * gx)
        })
        .collect();
    RealField::new(grid.clone(), vals).expect("finite torque density")
}

/// Total probability (`∫|Ψ|²`) or charge (`∫ρ`).
pub fn total_charge(source: &SourceTerm) -> f64 {
    integrate(&source.dl_dv)
}

/// Everything the checks need from one snapshot, computed once.
#[derive(Debug, Clone)]
pub struct Observation {
    pub t: f64,
    pub tensor: TensorComponents,
    pub source: SourceTerm,
    pub tracked: Vec<(Component, f64)>,
    pub driven: Vec<(Component, f64)>,
    pub charge: f64,
}

impl Observation {
    pub fn new<S: Snapshot + ?Sized>(snap: &S, components: &[Component]) -> Result<Self> {
        let tensor = snap.tensor()?;
        let source = snap.source()?;
        let mut tracked = Vec::with_capacity(components.len());
        let mut rhs = Vec::with_capacity(components.len());
        for &c in components {
            tracked.push((c, snap.tracked(c, &tensor)?));
            rhs.push((c, driven(c, &source)?));
        }
        let charge = total_charge(&source);
        Ok(Observation {
            t: snap.time(),
            tensor,
            source,
            tracked,
            driven: rhs,
            charge,
        })
    }

    pub fn tracked_of(&self, c: Component) -> Option<f64> {
        self.tracked.iter().find(|(k, _)| *k == c).map(|p| p.1)
    }

    pub fn driven_of(&self, c: Component) -> Option<f64> {
        self.driven.iter().find(|(k, _)| *k == c).map(|p| p.1)
    }
}

/// Pointwise residual `∂_μT^μ_ν + (∂L/∂V)∂_νV` (or its rotation-current
/// analogue) at the middle of three snapshots.
#[derive(Debug, Clone)]
pub struct ResidualReport {
    pub theory: Theory,
    pub component: Component,
    pub residual: RealField,
    /// Weighted L² norm over nodes at least two cells from a Dirichlet end.
    pub l2: f64,
    pub linf: f64,
    /// Quadrature of the residual over the whole grid.
    pub integral: f64,
    /// Discrete flux of the spatial current through the Dirichlet ends.
    pub boundary_flux: f64,
    pub t: f64,
    pub dt: f64,
    pub dx: f64,
}

impl ResidualReport {
    /// `|∫residual - flux - s·(lhs - rhs)|`; zero up to rounding when both
    /// routes agree.
    pub fn route_gap(&self, lhs_minus_rhs: f64, c: f64) -> f64 {
        (self.integral - self.boundary_flux - self.component.route_factor(c) * lhs_minus_rhs).abs()
    }
}

fn interior_norms(r: &RealField) -> (f64, f64) {
    let grid = r.grid();
    let w = grid.weights();
    let (mut s2, mut inf) = (0.0, 0.0f64);
    for (k, v) in r.values().iter().enumerate() {
        if grid.near_dirichlet_boundary(k, 1) {
            continue;
        }
        s2 += w[k] * v * v;
        inf = inf.max(v.abs());
    }
    (s2.sqrt(), inf)
}

/// Residual from precomputed observations at `t-h`, `t`, `t+h`.
pub fn residual_from_observations(
    prev: &Observation,
    mid: &Observation,
    next: &Observation,
    component: Component,
    constants: &PhysicalConstants,
) -> Result<ResidualReport> {
    let grid = mid.tensor.t00.grid().clone();
    component.check(grid.dim())?;
    for o in [prev, next] {
        mid.tensor.t00.check_grid(&o.tensor.t00)?;
    }
    let (h0, h1) = (mid.t - prev.t, next.t - mid.t);
    if !(h0 > 0.0 && h1 > 0.0) || (h1 - h0).abs() > SPACING_TOL * h0.max(h1) {
        return Err(Error::UnequalSpacing);
    }
    let span = next.t - prev.t;
    let c = constants.c;
    let (density_prev, density_next, fluxes, coupling) = match component.nu() {
        Some(nu) => {
            let flux: Vec<RealField> = mid.tensor.space_column(nu).into_iter().cloned().collect();
            let dnu_v = if nu == 0 {
                mid.source.dv_dt.scale(1.0 / c)
            } else {
                mid.source.grad_v[nu - 1].clone()
            };
            (
                prev.tensor.time_row(nu).clone(),
                next.tensor.time_row(nu).clone(),
                flux,
                product(&mid.source.dl_dv, &dnu_v),
            )
        }
        None => {
            let origin = [0.0, 0.0];
            let mid_rot = rotation_current(&mid.tensor, origin)?;
            let tau = torque_weighted(&mid.source);
            (
                rotation_current(&prev.tensor, origin)?.m012,
                rotation_current(&next.tensor, origin)?.m012,
                mid_rot.flux,
                tau.scale(-1.0),
            )
        }
    };
    let refs: Vec<&RealField> = fluxes.iter().collect();
    let div = flux_divergence(&refs)?;
    let flux = boundary_flux(&refs)?;
    let vals: Vec<f64> = (0..grid.len())
        .map(|k| {
            (density_next.values()[k] - density_prev.values()[k]) / (c * span)
                + div.values()[k]
                + coupling.values()[k]
        })
        .collect();
    let residual = RealField::new(grid.clone(), vals)?;
    let (l2, linf) = interior_norms(&residual);
    Ok(ResidualReport {
        theory: mid.tensor.theory,
        component,
        integral: integrate(&residual),
        residual,
        l2,
        linf,
        boundary_flux: flux,
        t: mid.t,
        dt: 0.5 * span,
        dx: grid.min_spacing(),
    })
}

/// Local residual from three consecutive, equally spaced snapshots.
pub fn continuity_residual<S: Snapshot>(snaps: [&S; 3], component: Component) -> Result<ResidualReport> {
    let grid = snaps[1].grid();
    if snaps.iter().any(|s| !Arc::ptr_eq(s.grid(), grid) && **s.grid() != **grid) {
        return Err(Error::GridMismatch);
    }
    let obs = snaps
        .iter()
        .map(|s| Observation::new(*s, &[]))
        .collect::<Result<Vec<_>>>()?;
    residual_from_observations(&obs[0], &obs[1], &obs[2], component, snaps[1].constants())
}

/// Centered-difference time derivative of a tracked quantity against the
/// source integral, at interior sample times.
#[derive(Debug, Clone, Serialize)]
pub struct EhrenfestSeries {
    pub component: Component,
    pub times: Vec<f64>,
    pub lhs: Vec<f64>,
    pub rhs: Vec<f64>,
    pub mismatch: Vec<f64>,
    pub max_mismatch: f64,
    pub rms_mismatch: f64,
}

impl EhrenfestSeries {
    /// Builds the series from tracked values and right-hand sides sampled at
    /// `times`; the first and last samples only feed the differences.
    pub fn from_samples(
        component: Component,
        times: &[f64],
        tracked: &[f64],
        rhs: &[f64],
    ) -> Result<Self> {
        let n = times.len();
        if n < 5 {
            return Err(Error::TooFewSnapshots { needed: 5, got: n });
        }
        if tracked.len() != n || rhs.len() != n {
            return Err(Error::InvalidArgument(format!(
                "series lengths differ: {n} times, {} tracked, {} rhs",
                tracked.len(),
                rhs.len()
            )));
        }
        let mean = (times[n - 1] - times[0]) / (n - 1) as f64;
        if !(mean > 0.0)
            || times
                .windows(2)
                .any(|w| ((w[1] - w[0]) - mean).abs() > SPACING_TOL * mean)
        {
            return Err(Error::UnequalSpacing);
        }
        let mut out = EhrenfestSeries {
            component,
            times: times[1..n - 1].to_vec(),
            lhs: Vec::with_capacity(n - 2),
            rhs: rhs[1..n - 1].to_vec(),
            mismatch: Vec::with_capacity(n - 2),
            max_mismatch: 0.0,
            rms_mismatch: 0.0,
        };
        for i in 1..n - 1 {
            let d = (tracked[i + 1] - tracked[i - 1]) / (times[i + 1] - times[i - 1]);
            out.lhs.push(d);
            out.mismatch.push(d - rhs[i]);
        }
        out.max_mismatch = out.mismatch.iter().fold(0.0, |m, x| m.max(x.abs()));
        out.rms_mismatch =
            (out.mismatch.iter().map(|x| x * x).sum::<f64>() / out.mismatch.len() as f64).sqrt();
        Ok(out)
    }

    pub fn from_observations(component: Component, obs: &[Observation]) -> Result<Self> {
        let missing = || Error::InvalidArgument(format!("{} was not observed", component.label()));
        let times: Vec<f64> = obs.iter().map(|o| o.t).collect();
        let tracked = obs
            .iter()
            .map(|o| o.tracked_of(component).ok_or_else(missing))
            .collect::<Result<Vec<_>>>()?;
        let rhs = obs
            .iter()
            .map(|o| o.driven_of(component).ok_or_else(missing))
            .collect::<Result<Vec<_>>>()?;
        Self::from_samples(component, &times, &tracked, &rhs)
    }

    /// RMS of the rhs, the natural scale for relative mismatches.
    pub fn rhs_rms(&self) -> f64 {
        (self.rhs.iter().map(|x| x * x).sum::<f64>() / self.rhs.len() as f64).sqrt()
    }

    pub fn rhs_max(&self) -> f64 {
        self.rhs.iter().fold(0.0, |m, x| m.max(x.abs()))
    }
}

/// Ehrenfest series over a run of equally spaced snapshots.
pub fn ehrenfest_check<S: Snapshot>(snaps: &[S], component: Component) -> Result<EhrenfestSeries> {
    if snaps.len() < 5 {
        return Err(Error::TooFewSnapshots {
            needed: 5,
            got: snaps.len(),
        });
    }
    let obs = snaps
        .iter()
        .map(|s| Observation::new(s, &[component]))
        .collect::<Result<Vec<_>>>()?;
    EhrenfestSeries::from_observations(component, &obs)
}

/// Pass threshold for a quantity that should sit at the V=0 control floor.
pub fn floor_limit(control: f64, scale: f64) -> f64 {
    FLOOR_FACTOR * control.abs() + FLOOR_ROUNDING * scale.abs()
}

/// Error norms over a sequence of resolutions and the fitted order.
#[derive(Debug, Clone, Serialize)]
pub struct ConvergenceReport {
    pub resolutions: Vec<f64>,
    pub errors: Vec<f64>,
    pub observed_order: f64,
    pub target_order: f64,
    pub pass: bool,
    /// False when some refinement failed to reduce the error; reported,
    /// not failed.
    pub monotone: bool,
}

impl ConvergenceReport {
    /// Least-squares slope of `log error` against `log resolution`.
    pub fn fit(resolutions: Vec<f64>, errors: Vec<f64>, target_order: f64) -> Result<Self> {
        if resolutions.len() < 3 {
            return Err(Error::TooFewSnapshots {
                needed: 3,
                got: resolutions.len(),
            });
        }
        if errors.len() != resolutions.len() {
            return Err(Error::InvalidArgument("one error per resolution required".into()));
        }
        if resolutions.iter().chain(&errors).any(|v| !(v.is_finite() && *v > 0.0)) {
            return Err(Error::InvalidArgument(
                "resolutions and errors must be positive and finite".into(),
            ));
        }
        let xs: Vec<f64> = resolutions.iter().map(|h| h.ln()).collect();
        let ys: Vec<f64> = errors.iter().map(|e| e.ln()).collect();
        let n = xs.len() as f64;
        let (mx, my) = (xs.iter().sum::<f64>() / n, ys.iter().sum::<f64>() / n);
        let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
        let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
        if sxx == 0.0 {
            return Err(Error::InvalidArgument("resolutions must differ".into()));
        }
        let observed_order = sxy / sxx;
        let mut order: Vec<usize> = (0..resolutions.len()).collect();
        order.sort_by(|&a, &b| resolutions[b].total_cmp(&resolutions[a]));
        let monotone = order.windows(2).all(|w| errors[w[1]] < errors[w[0]]);
        Ok(ConvergenceReport {
            pass: (observed_order - target_order).abs() <= ORDER_TOLERANCE,
            resolutions,
            errors,
            observed_order,
            target_order,
            monotone,
        })
    }
}

#[cfg(test)]
mod tests {
    use std::f64::consts::PI;

    use num_complex::Complex64;

    use super::*;
    use crate::fieldgrid::{Axis, ComplexField};
    use crate::kleingordon;
    use crate::potential::Floor;
    use crate::schrodinger::{self, gaussian, moving_floor_field};

    fn k() -> PhysicalConstants {
        PhysicalConstants::default()
    }

    #[test]
    fn order_fit_recovers_slopes() {
        let h = vec![0.1, 0.05, 0.025];
        let e2: Vec<f64> = h.iter().map(|x| 3.0 * x * x).collect();
        let r = ConvergenceReport::fit(h.clone(), e2, 2.0).unwrap();
        assert!((r.observed_order - 2.0).abs() < 1e-12 && r.pass && r.monotone);
        let e1: Vec<f64> = h.iter().map(|x| 0.5 * x).collect();
        let r = ConvergenceReport::fit(h.clone(), e1, 2.0).unwrap();
        assert!(!r.pass);
        let r = ConvergenceReport::fit(h, vec![1.0, 0.2, 0.3], 2.0).unwrap();
        assert!(!r.monotone);
        assert!(ConvergenceReport::fit(vec![0.1, 0.05], vec![1.0, 0.25], 2.0).is_err());
    }

    #[test]
    fn series_requires_five_uniform_samples() {
        let t = [0.0, 0.1, 0.2, 0.3];
        assert!(matches!(
            EhrenfestSeries::from_samples(Component::Energy, &t, &t, &t),
            Err(Error::TooFewSnapshots { .. })
        ));
        let t = [0.0, 0.1, 0.2, 0.35, 0.4];
        assert_eq!(
            EhrenfestSeries::from_samples(Component::Energy, &t, &t, &t).unwrap_err(),
            Error::UnequalSpacing
        );
        let t = [0.0, 0.1, 0.2, 0.3, 0.4];
        let q: Vec<f64> = t.iter().map(|x| x * x).collect();
        let rhs: Vec<f64> = t.iter().map(|x| 2.0 * x).collect();
        let s = EhrenfestSeries::from_samples(Component::Energy, &t, &q, &rhs).unwrap();
        assert_eq!(s.lhs.len(), 3);
        assert!(s.max_mismatch < 1e-14);
    }

    fn box_state(modes: &[(usize, Complex64)], floor: Floor, n: usize) -> SchrodingerState {
        let g = Grid::line(Axis::dirichlet(0.0, 1.0, n)).unwrap();
        let psi = moving_floor_field(&g, modes, &floor, 1.0, 0.0, &k()).unwrap();
        SchrodingerState::new(
            psi,
            0.0,
            k(),
            Arc::new(PotentialSpec::MovingFloor { floor, width: 1.0 }),
        )
        .unwrap()
    }

    #[test]
    fn residual_rejects_bad_snapshots() {
        let s = box_state(&[(1, Complex64::new(1.0, 0.0))], Floor::Constant { v0: 0.0 }, 65);
        let a = s.step_cn(1e-3).unwrap();
        let b = a.step_cn(2e-3).unwrap();
        assert_eq!(
            continuity_residual([&s, &a, &b], Component::Energy).unwrap_err(),
            Error::UnequalSpacing
        );
        let other = box_state(&[(1, Complex64::new(1.0, 0.0))], Floor::Constant { v0: 0.0 }, 33);
        assert_eq!(
            continuity_residual([&s, &a, &other], Component::Energy).unwrap_err(),
            Error::GridMismatch
        );
    }

    fn two_mode() -> [(usize, Complex64); 2] {
        let a = 0.5f64.sqrt();
        [(1, Complex64::new(a, 0.0)), (2, Complex64::new(0.0, a))]
    }

    fn oracle_residual(n: usize, dt: f64, comp: Component) -> f64 {
        let floor = Floor::Sinusoid {
            v0: 1.0,
            omega: 2.0 * PI,
        };
        let g = Grid::line(Axis::dirichlet(0.0, 1.0, n)).unwrap();
        let pot = Arc::new(PotentialSpec::MovingFloor {
            floor: floor.clone(),
            width: 1.0,
        });
        let t = 0.3;
        let snaps: Vec<SchrodingerState> = [t - dt, t, t + dt]
            .iter()
            .map(|&tt| {
                let psi = moving_floor_field(&g, &two_mode(), &floor, 1.0, tt, &k()).unwrap();
                SchrodingerState::new(psi, tt, k(), pot.clone()).unwrap()
            })
            .collect();
        continuity_residual([&snaps[0], &snaps[1], &snaps[2]], comp)
            .unwrap()
            .l2
    }

    #[test]
    fn oracle_residual_drops_fourfold_on_refinement() {
        for comp in [Component::Energy, Component::Momentum(0)] {
            let coarse = oracle_residual(129, 2e-3, comp);
            let fine = oracle_residual(257, 1e-3, comp);
            let ratio = coarse / fine;
            assert!((ratio - 4.0).abs() < 0.6, "{comp:?}: ratio {ratio}");
        }
    }

    #[test]
    fn free_plane_wave_residuals_are_second_order_small() {
        let l = 20.0;
        let kk = 2.0 * PI / l;
        for n in [128usize, 256] {
            let g = Grid::line(Axis::periodic(0.0, l, n)).unwrap();
            let dx = l / n as f64;
            let dt = 0.25 * dx;
            let psi = ComplexField::from_fn(g.clone(), |p| Complex64::from_polar(1.0, kk * p[0]))
                .unwrap();
            let s0 = SchrodingerState::new(psi, 0.0, k(), Arc::new(PotentialSpec::zero())).unwrap();
            let s1 = s0.step_cn(dt).unwrap();
            let s2 = s1.step_cn(dt).unwrap();
            for comp in [Component::Energy, Component::Momentum(0)] {
                let r = continuity_residual([&s0, &s1, &s2], comp).unwrap();
                assert!(r.linf <= 1.0 * (dx * dx + dt * dt), "{comp:?} {}", r.linf);
            }
            let kg0 = kleingordon::init_plane_wave(&g, [kk, 0.0], k()).unwrap();
            let kg1 = kg0.step_leapfrog(dt).unwrap();
            let kg2 = kg1.step_leapfrog(dt).unwrap();
            for comp in [Component::Energy, Component::Momentum(0)] {
                let r = continuity_residual([&kg0, &kg1, &kg2], comp).unwrap();
                assert!(r.linf <= 1.0 * (dx * dx + dt * dt), "kg {comp:?} {}", r.linf);
            }
        }
    }

    #[test]
    fn stationary_state_energy_residual_at_floor() {
        let n = 257;
        let s0 = box_state(&[(2, Complex64::new(1.0, 0.0))], Floor::Constant { v0: 0.4 }, n);
        let dt = 1e-3;
        let s1 = s0.step_cn(dt).unwrap();
        let s2 = s1.step_cn(dt).unwrap();
        let r = continuity_residual([&s0, &s1, &s2], Component::Energy).unwrap();
        let free = box_state(&[(2, Complex64::new(1.0, 0.0))], Floor::Constant { v0: 0.0 }, n);
        let f1 = free.step_cn(dt).unwrap();
        let f2 = f1.step_cn(dt).unwrap();
        let control = continuity_residual([&free, &f1, &f2], Component::Energy).unwrap();
        assert!(r.l2 <= floor_limit(control.l2, 1.0), "{} vs {}", r.l2, control.l2);
    }

    #[test]
    fn routes_agree_on_a_driven_packet() {
        let g = Grid::line(Axis::dirichlet(-12.0, 12.0, 481)).unwrap();
        let psi = gaussian(&g, [-1.0, 0.0], [1.0, 1.0], [0.8, 0.0]).unwrap();
        let pot = Arc::new(PotentialSpec::Harmonic {
            center: [0.0, 0.0],
            omega: [0.7, 0.0],
            mass: 1.0,
        });
        let s = SchrodingerState::new(psi, 0.0, k(), pot).unwrap();
        let snaps = schrodinger::evolve(&s, 0.05, 0.01, 1).unwrap();
        let obs: Vec<Observation> = snaps
            .iter()
            .map(|s| Observation::new(s, &[Component::Energy, Component::Momentum(0)]).unwrap())
            .collect();
        for comp in [Component::Energy, Component::Momentum(0)] {
            let series = EhrenfestSeries::from_observations(comp, &obs).unwrap();
            for i in 1..obs.len() - 1 {
                let r = residual_from_observations(&obs[i - 1], &obs[i], &obs[i + 1], comp, &k())
                    .unwrap();
                let gap = r.route_gap(series.mismatch[i - 1], 1.0);
                assert!(gap < 1e-10, "{comp:?} gap {gap}");
            }
            assert!(series.max_mismatch < 1e-3, "{comp:?} {}", series.max_mismatch);
        }
    }

    #[test]
    fn angular_routes_agree_in_2d() {
        let g = Grid::plane(Axis::dirichlet(-8.0, 8.0, 81), Axis::dirichlet(-8.0, 8.0, 81)).unwrap();
        let psi = crate::schrodinger::gaussian_tilted(&g, [1.0, 0.5], [1.0, 0.6], 0.5, [0.3, -0.2])
            .unwrap();
        let pot = Arc::new(PotentialSpec::Harmonic {
            center: [0.0, 0.0],
            omega: [1.0, 1.4],
            mass: 1.0,
        });
        let s = SchrodingerState::new(psi, 0.0, k(), pot).unwrap();
        let snaps = schrodinger::evolve(&s, 0.04, 0.01, 1).unwrap();
        let obs: Vec<Observation> = snaps
            .iter()
            .map(|s| Observation::new(s, &[Component::Angular]).unwrap())
            .collect();
        let series = EhrenfestSeries::from_observations(Component::Angular, &obs).unwrap();
        for i in 1..obs.len() - 1 {
            let r = residual_from_observations(&obs[i - 1], &obs[i], &obs[i + 1], Component::Angular, &k())
                .unwrap();
            assert!(r.route_gap(series.mismatch[i - 1], 1.0) < 1e-10);
        }
    }
}
