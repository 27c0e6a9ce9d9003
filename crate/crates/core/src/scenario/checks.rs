//! Named pass/fail checks evaluated from recorded series only.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::observables::Theory;
use crate::verify::{floor_limit, Component, EhrenfestSeries};

use super::config::{CheckSpec, InitialSpec, ScenarioConfig};
use super::run::{components, expected_frequency, rhs_column, tracked_column, RunData, QUADRATURE_TOL};

#[derive(Debug, Clone, Serialize)]
pub struct CheckResult {
    pub name: String,
    pub pass: bool,
    pub metric: f64,
    pub tolerance: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
enum Scale {
    /// `max |mismatch|`
    Absolute,
    /// `rms(mismatch) / rms(rhs)`
    RelRms,
    /// `rms(mismatch) / max |rhs|`
    RelMax,
}

#[derive(Debug, Clone, Copy, PartialEq)]
enum Kind {
    Norm,
    Charge,
    Ehrenfest(Component, Scale),
    CrossRoute,
    RhsAtFloor,
    ResidualAtFloor,
    AngularAtFloor,
    KineticDrift,
    FloorIndependence,
    OracleError,
    Dispersion,
    StationaryT0,
    StationaryFinal,
}

fn parse(name: &str) -> Option<Kind> {
    Some(match name {
        "norm_conservation" => Kind::Norm,
        "charge_conservation" => Kind::Charge,
        "cross_route" => Kind::CrossRoute,
        "rhs_at_floor" => Kind::RhsAtFloor,
        "residual_at_floor" => Kind::ResidualAtFloor,
        "angular_at_floor" => Kind::AngularAtFloor,
        "kinetic_drift" => Kind::KineticDrift,
        "floor_independence" => Kind::FloorIndependence,
        "oracle_error" => Kind::OracleError,
        "dispersion" => Kind::Dispersion,
        "stationary_reduction_t0" => Kind::StationaryT0,
        "stationary_reduction_final" => Kind::StationaryFinal,
        other => {
            let rest = other.strip_prefix("ehrenfest_")?;
            let (base, scale) = if let Some(b) = rest.strip_suffix("_rel_rms") {
                (b, Scale::RelRms)
            } else if let Some(b) = rest.strip_suffix("_rel_max") {
                (b, Scale::RelMax)
            } else {
                (rest, Scale::Absolute)
            };
            let c = match base {
                "energy" => Component::Energy,
                "momentum_x" => Component::Momentum(0),
                "momentum_y" => Component::Momentum(1),
                "angular" => Component::Angular,
                _ => return None,
            };
            Kind::Ehrenfest(c, scale)
        }
    })
}

/// Rejects unknown names and checks that do not apply to the theory or
/// dimension.
pub(crate) fn validate_name(name: &str, theory: Theory, dim: usize) -> Result<()> {
    let kind = parse(name).ok_or_else(|| Error::config("checks", format!("unknown check `{name}`")))?;
    let bad = |why: &str| Err(Error::config("checks", format!("`{name}` {why}")));
    match kind {
        Kind::Norm | Kind::KineticDrift | Kind::FloorIndependence | Kind::OracleError
            if theory != Theory::Schrodinger =>
        {
            bad("applies to schrodinger runs only")
        }
        Kind::Charge | Kind::Dispersion | Kind::StationaryT0 | Kind::StationaryFinal
            if theory != Theory::KleinGordon =>
        {
            bad("applies to kleingordon runs only")
        }
        Kind::Ehrenfest(Component::Momentum(1), _) if dim < 2 => bad("needs a 2D grid"),
        Kind::Ehrenfest(Component::Angular, _) | Kind::AngularAtFloor if dim != 2 => {
            bad("needs a 2D grid")
        }
        _ => Ok(()),
    }
}

pub(crate) fn needs_control(name: &str) -> bool {
    matches!(
        parse(name),
        Some(
            Kind::RhsAtFloor
                | Kind::ResidualAtFloor
                | Kind::AngularAtFloor
                | Kind::KineticDrift
                | Kind::FloorIndependence
        )
    )
}

fn column(data: &RunData, name: &str) -> Result<Vec<f64>> {
    data.series
        .column(name)
        .ok_or_else(|| Error::InvalidArgument(format!("series has no `{name}` column")))
}

fn max_abs(v: impl IntoIterator<Item = f64>) -> f64 {
    v.into_iter().fold(0.0, |m, x| m.max(x.abs()))
}

fn relative_drift(v: &[f64]) -> f64 {
    let v0 = v[0];
    max_abs(v.iter().map(|x| (x - v0) / v0))
}

/// Largest magnitude among the tracked quantities, used to scale rounding
/// allowances.
fn magnitude(data: &RunData, dim: usize) -> f64 {
    components(dim)
        .into_iter()
        .filter_map(|c| data.series.column(tracked_column(c)))
        .map(max_abs)
        .fold(0.0, f64::max)
}

fn series(data: &RunData, c: Component) -> Result<EhrenfestSeries> {
    EhrenfestSeries::from_samples(
        c,
        &data.series.times,
        &column(data, tracked_column(c))?,
        &column(data, rhs_column(c))?,
    )
}

fn max_residual(data: &RunData, dim: usize) -> f64 {
    components(dim)
        .into_iter()
        .map(|c| max_abs(data.series.present(&format!("residual_L2_{}", c.tag())).1))
        .fold(0.0, f64::max)
}

fn max_rhs(data: &RunData, dim: usize) -> f64 {
    components(dim)
        .into_iter()
        .filter_map(|c| data.series.column(rhs_column(c)))
        .map(max_abs)
        .fold(0.0, f64::max)
}

fn angular_rate(data: &RunData) -> Result<f64> {
    Ok(max_abs(series(data, Component::Angular)?.lhs))
}

/// Least-squares frequency of the projection phase, `e^{-iωt}` convention.
fn fitted_frequency(data: &RunData) -> Result<f64> {
    let re = column(data, "proj_re")?;
    let im = column(data, "proj_im")?;
    let mut phase: Vec<f64> = Vec::with_capacity(re.len());
    for (a, b) in re.iter().zip(&im) {
        let raw = b.atan2(*a);
        let next = match phase.last() {
            None => raw,
            Some(&prev) => {
                let tau = std::f64::consts::TAU;
                raw + tau * ((prev - raw) / tau).round()
            }
        };
        phase.push(next);
    }
    let t = &data.series.times;
    let n = t.len() as f64;
    let (mt, mp) = (t.iter().sum::<f64>() / n, phase.iter().sum::<f64>() / n);
    let stt: f64 = t.iter().map(|x| (x - mt) * (x - mt)).sum();
    let stp: f64 = t.iter().zip(&phase).map(|(x, p)| (x - mt) * (p - mp)).sum();
    Ok(-stp / stt)
}

pub(crate) fn evaluate(
    spec: &CheckSpec,
    cfg: &ScenarioConfig,
    main: &RunData,
    control: Option<&RunData>,
) -> Result<CheckResult> {
    let kind = parse(&spec.name)
        .ok_or_else(|| Error::config("checks", format!("unknown check `{}`", spec.name)))?;
    let dim = cfg.grid.dim;
    let ctrl = || {
        control.ok_or_else(|| Error::InvalidArgument(format!("`{}` needs a control run", spec.name)))
    };
    let tol = |default: f64| spec.tolerance.unwrap_or(default);
    let (metric, tolerance) = match kind {
        Kind::Norm => (relative_drift(&column(main, "norm")?), tol(1e-8)),
        Kind::Charge => (relative_drift(&column(main, "charge")?), tol(1e-6)),
        Kind::Ehrenfest(c, scale) => {
            let s = series(main, c)?;
            let metric = match scale {
                Scale::Absolute => s.max_mismatch,
                Scale::RelRms => s.rms_mismatch / s.rhs_rms(),
                Scale::RelMax => s.rms_mismatch / s.rhs_max(),
            };
            (metric, tol(1e-3))
        }
        Kind::CrossRoute => (
            main.max_route_gap,
            tol(1e-8) + QUADRATURE_TOL * main.route_scale,
        ),
        Kind::RhsAtFloor => {
            let c = ctrl()?;
            (max_rhs(main, dim), floor_limit(max_rhs(c, dim), magnitude(main, dim)))
        }
        Kind::ResidualAtFloor => {
            let c = ctrl()?;
            (
                max_residual(main, dim),
                floor_limit(max_residual(c, dim), magnitude(main, dim)),
            )
        }
        Kind::AngularAtFloor => {
            let c = ctrl()?;
            (
                angular_rate(main)?,
                floor_limit(angular_rate(c)?, magnitude(main, dim)),
            )
        }
        Kind::KineticDrift => {
            let drift = |d: &RunData| -> Result<(f64, f64)> {
                let k = column(d, "kinetic")?;
                Ok((max_abs(k.iter().map(|x| x - k[0])), k[0]))
            };
            let (m, k0) = drift(main)?;
            let (c, _) = drift(ctrl()?)?;
            (m, floor_limit(c, k0))
        }
        Kind::FloorIndependence => {
            let c = ctrl()?;
            let gap = main
                .densities
                .iter()
                .zip(&c.densities)
                .map(|(a, b)| max_abs(a.iter().zip(b).map(|(x, y)| x - y)))
                .fold(0.0, f64::max);
            (gap, tol(1e-10))
        }
        Kind::OracleError => (max_abs(column(main, "oracle_error")?), tol(1e-3)),
        Kind::Dispersion => {
            let k = match cfg.initial {
                InitialSpec::PlaneWave { k } | InitialSpec::Stationary { k } => k,
                _ => {
                    return Err(Error::config(
                        "checks",
                        "`dispersion` needs a plane_wave or stationary start",
                    ))
                }
            };
            let w = fitted_frequency(main)?;
            let w0 = expected_frequency(cfg, k);
            ((w * w - w0 * w0).abs() / (w0 * w0), tol(1e-3))
        }
        Kind::StationaryT0 => (column(main, "stationary_mismatch")?[0], tol(1e-10)),
        Kind::StationaryFinal => (
            *column(main, "stationary_mismatch")?.last().unwrap(),
            tol(1e-6),
        ),
    };
    Ok(CheckResult {
        name: spec.name.clone(),
        pass: metric <= tolerance,
        metric,
        tolerance,
    })
}
