use std::collections::VecDeque;
use std::fmt::Write as _;
use std::path::Path;
use std::sync::Arc;
use std::time::Instant;

use num_complex::Complex64;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::exec;
use crate::fieldgrid::{gradient_energy, inner_product, integrate, ComplexField, RealField};
use crate::kleingordon::{self, free_frequency, init_stationary, init_wave_packet, KGState};
use crate::observables::{kg_charge_density, kg_stationary_charge_density};
use crate::potential::{Floor, PotentialSpec};
use crate::schrodinger::{self, gaussian_tilted, moving_floor_field, SchrodingerState};
use crate::verify::{residual_from_observations, Component, Observation, Snapshot};

use super::checks::{self, CheckResult};
use super::config::{InitialSpec, ScenarioConfig};

/// Relative quadrature allowance added to the absolute cross-route tolerance.
pub const QUADRATURE_TOL: f64 = 1e-10;

pub(crate) fn components(dim: usize) -> Vec<Component> {
    let mut out = vec![Component::Energy];
    out.extend((0..dim).map(Component::Momentum));
    if dim == 2 {
        out.push(Component::Angular);
    }
    out
}

pub(crate) fn tracked_column(c: Component) -> &'static str {
    match c {
        Component::Energy => "H",
        Component::Momentum(0) => "p_x",
        Component::Momentum(_) => "p_y",
        Component::Angular => "L_z",
    }
}

pub(crate) fn rhs_column(c: Component) -> &'static str {
    match c {
        Component::Energy => "rhs_vdot",
        Component::Momentum(0) => "rhs_force_x",
        Component::Momentum(_) => "rhs_force_y",
        Component::Angular => "rhs_torque",
    }
}

/// Time series with named columns; a missing entry is NaN and is written
/// as an empty CSV cell.
#[derive(Debug, Clone, Default)]
pub struct Series {
    pub times: Vec<f64>,
    names: Vec<String>,
    rows: Vec<Vec<f64>>,
}

impl Series {
    fn push_row(&mut self, t: f64) {
        self.times.push(t);
        self.rows.push(vec![f64::NAN; self.names.len()]);
    }

    fn set(&mut self, row: usize, name: &str, value: f64) {
        let col = match self.names.iter().position(|n| n == name) {
            Some(c) => c,
            None => {
                self.names.push(name.to_string());
                for r in &mut self.rows {
                    r.push(f64::NAN);
                }
                self.names.len() - 1
            }
        };
        self.rows[row][col] = value;
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn column(&self, name: &str) -> Option<Vec<f64>> {
        let c = self.names.iter().position(|n| n == name)?;
        Some(self.rows.iter().map(|r| r[c]).collect())
    }

    /// Column restricted to rows where it is present, with their times.
    pub fn present(&self, name: &str) -> (Vec<f64>, Vec<f64>) {
        let Some(col) = self.column(name) else {
            return (Vec::new(), Vec::new());
        };
        self.times
            .iter()
            .zip(col)
            .filter(|(_, v)| !v.is_nan())
            .map(|(t, v)| (*t, v))
            .unzip()
    }

    fn to_csv(&self, extra: Option<(&str, &Series)>) -> String {
        let mut out = String::from("t");
        for n in &self.names {
            out.push(',');
            out.push_str(n);
        }
        if let Some((prefix, other)) = extra {
            for n in &other.names {
                let _ = write!(out, ",{prefix}{n}");
            }
        }
        out.push('\n');
        for (i, t) in self.times.iter().enumerate() {
            let _ = write!(out, "{t}");
            let cells = self.rows[i].iter().chain(
                extra
                    .map(|(_, o)| o.rows.get(i).map(|r| r.as_slice()).unwrap_or(&[]))
                    .unwrap_or(&[]),
            );
            for v in cells {
                if v.is_nan() {
                    out.push(',');
                } else {
                    let _ = write!(out, ",{v}");
                }
            }
            out.push('\n');
        }
        out
    }
}

/// Everything one evolution produced.
#[derive(Debug, Clone, Default)]
pub struct RunData {
    pub series: Series,
    /// Residual fields at the sample nearest mid-run and at the last one.
    pub residual_dumps: Vec<(Component, Vec<(f64, RealField)>)>,
    pub max_route_gap: f64,
    pub route_scale: f64,
    pub densities: Vec<Vec<f64>>,
    pub steps: usize,
    pub seconds: f64,
}

trait Runnable: Snapshot + Clone + Send + Sync {
    fn evolve_observed(
        &self,
        t_final: f64,
        dt: f64,
        stride: usize,
        observer: &mut dyn FnMut(&Self) -> Result<()>,
    ) -> Result<()>;
    fn extras(&self, cfg: &ScenarioConfig, out: &mut Vec<(&'static str, f64)>) -> Result<()>;
    fn density(&self) -> Vec<f64>;
}

impl Runnable for SchrodingerState {
    fn evolve_observed(
        &self,
        t_final: f64,
        dt: f64,
        stride: usize,
        observer: &mut dyn FnMut(&Self) -> Result<()>,
    ) -> Result<()> {
        schrodinger::evolve_with(self, t_final, dt, stride, |s| observer(s)).map(|_| ())
    }

    fn extras(&self, cfg: &ScenarioConfig, out: &mut Vec<(&'static str, f64)>) -> Result<()> {
        let k = &self.constants;
        out.push((
            "kinetic",
            k.hbar * k.hbar / (2.0 * k.m) * integrate(&gradient_energy(&self.psi)),
        ));
        if let InitialSpec::Modes(modes) = &cfg.initial {
            let (floor, width) = well(cfg);
            let exact = moving_floor_field(self.psi.grid(), modes, &floor, width, self.t, k)?;
            let diff = self.psi.zip_map(&exact, |a, b| (a - b).norm_sqr())?;
            out.push(("oracle_error", integrate(&diff).sqrt()));
        }
        Ok(())
    }

    fn density(&self) -> Vec<f64> {
        self.psi.norm_sqr().into_values()
    }
}

impl Runnable for KGState {
    fn evolve_observed(
        &self,
        t_final: f64,
        dt: f64,
        stride: usize,
        observer: &mut dyn FnMut(&Self) -> Result<()>,
    ) -> Result<()> {
        kleingordon::evolve_with(self, t_final, dt, stride, |s| observer(s)).map(|_| ())
    }

    fn extras(&self, cfg: &ScenarioConfig, out: &mut Vec<(&'static str, f64)>) -> Result<()> {
        match cfg.initial {
            InitialSpec::PlaneWave { k } => {
                let mode = plane_wave(self.phi.grid(), k)?;
                let z = inner_product(&mode, &self.phi)?;
                out.push(("proj_re", z.re));
                out.push(("proj_im", z.im));
            }
            InitialSpec::Stationary { k } => {
                let v = self.potential.sample(self.phi.grid(), self.t);
                let general = kg_charge_density(&self.phi, &self.phi_dot, &v, &self.constants)?;
                let energy = discrete_energy(cfg, k)?;
                let reduced = kg_stationary_charge_density(&self.phi, energy, &v, &self.constants)?;
                let gap = general
                    .values()
                    .iter()
                    .zip(reduced.values())
                    .fold(0.0f64, |m, (a, b)| m.max((a - b).abs()));
                out.push(("stationary_mismatch", gap));
            }
            _ => {}
        }
        Ok(())
    }

    fn density(&self) -> Vec<f64> {
        self.phi.norm_sqr().into_values()
    }
}

fn well(cfg: &ScenarioConfig) -> (Floor, f64) {
    match &cfg.potential {
        PotentialSpec::MovingFloor { floor, width } => (floor.clone(), *width),
        _ => (
            Floor::Constant { v0: 0.0 },
            cfg.grid.max[0] - cfg.grid.min[0],
        ),
    }
}

fn plane_wave(grid: &Arc<crate::fieldgrid::Grid>, k: [f64; 2]) -> Result<ComplexField> {
    let dim = grid.dim();
    ComplexField::from_fn(grid.clone(), |p| {
        Complex64::from_polar(1.0, k[0] * p[0] + if dim == 2 { k[1] * p[1] } else { 0.0 })
    })
}

/// Energy of the stationary state `e^{ik·x}` in the configured constant
/// potential.
pub(crate) fn stationary_energy(cfg: &ScenarioConfig, k: [f64; 2]) -> f64 {
    let v0 = cfg.potential.uniform_part(0.0);
    cfg.constants.q * v0 + cfg.constants.hbar * free_frequency(k, &cfg.constants)
}

/// Stationary energy as the discrete scheme sees it; this is the value
/// stationary starts use so the state stays stationary under stepping.
fn discrete_energy(cfg: &ScenarioConfig, k: [f64; 2]) -> Result<f64> {
    let grid = cfg.grid.build()?;
    let v0 = cfg.potential.uniform_part(0.0);
    kleingordon::discrete_stationary_energy(&grid, k, v0, cfg.dt, &cfg.constants)
}

/// Angular frequency a plane wave of wavenumber `k` should show.
pub(crate) fn expected_frequency(cfg: &ScenarioConfig, k: [f64; 2]) -> f64 {
    stationary_energy(cfg, k) / cfg.constants.hbar
}

enum Initial {
    Schrodinger(SchrodingerState),
    KleinGordon(KGState),
}

fn build_initial(cfg: &ScenarioConfig) -> Result<Initial> {
    let grid = cfg.grid.build()?;
    let pot = Arc::new(cfg.potential.clone());
    let k = cfg.constants;
    let wrap = |e: Error| Error::config("initial", e.to_string());
    Ok(match &cfg.initial {
        InitialSpec::Gaussian {
            center,
            width,
            angle,
            k: wave,
        } => {
            let psi = gaussian_tilted(&grid, *center, *width, *angle, *wave).map_err(wrap)?;
            Initial::Schrodinger(SchrodingerState::new(psi, 0.0, k, pot).map_err(wrap)?)
        }
        InitialSpec::Modes(modes) => {
            let (floor, width) = well(cfg);
            let psi = moving_floor_field(&grid, modes, &floor, width, 0.0, &k).map_err(wrap)?;
            Initial::Schrodinger(SchrodingerState::new(psi, 0.0, k, pot).map_err(wrap)?)
        }
        InitialSpec::Packet { center, width, k: wave } => Initial::KleinGordon(
            init_wave_packet(&grid, *wave, *width, *center, k)
                .map_err(wrap)?
                .with_potential(pot),
        ),
        InitialSpec::PlaneWave { k: wave } => {
            let profile = plane_wave(&grid, *wave)?;
            let energy = stationary_energy(cfg, *wave);
            Initial::KleinGordon(init_stationary(profile, energy, k, pot).map_err(wrap)?)
        }
        InitialSpec::Stationary { k: wave } => {
            let profile = plane_wave(&grid, *wave)?;
            let energy = discrete_energy(cfg, *wave)?;
            Initial::KleinGordon(init_stationary(profile, energy, k, pot).map_err(wrap)?)
        }
    })
}

fn execute<S: Runnable>(initial: &S, cfg: &ScenarioConfig) -> Result<RunData> {
    let start = Instant::now();
    let comps = components(cfg.grid.dim);
    let keep_density = cfg.has_check("floor_independence");
    let mut data = RunData {
        steps: cfg.steps(),
        ..Default::default()
    };
    let mut window: VecDeque<Observation> = VecDeque::with_capacity(3);
    let mut dumps: Vec<(Component, Option<(f64, RealField)>, Option<(f64, RealField)>)> =
        comps.iter().map(|c| (*c, None, None)).collect();
    let mid_time = 0.5 * cfg.t_final;
    let mut extras = Vec::new();

    initial.evolve_observed(cfg.t_final, cfg.dt, cfg.stride, &mut |s: &S| {
        let obs = Observation::new(s, &comps)?;
        let row = data.series.times.len();
        data.series.push_row(obs.t);
        data.series.set(row, if s.theory() == crate::observables::Theory::Schrodinger { "norm" } else { "charge" }, obs.charge);
        for (c, v) in &obs.tracked {
            data.series.set(row, tracked_column(*c), *v);
        }
        for (c, v) in &obs.driven {
            data.series.set(row, rhs_column(*c), *v);
        }
        extras.clear();
        s.extras(cfg, &mut extras)?;
        for (name, v) in &extras {
            data.series.set(row, name, *v);
        }
        if keep_density {
            data.densities.push(s.density());
        }
        if window.len() == 3 {
            window.pop_front();
        }
        window.push_back(obs);
        if window.len() == 3 {
            let (prev, mid, next) = (&window[0], &window[1], &window[2]);
            for (c, near_mid, last) in dumps.iter_mut() {
                let r = residual_from_observations(prev, mid, next, *c, &cfg.constants)?;
                let tag = c.tag();
                let lhs = (next.tracked_of(*c).unwrap() - prev.tracked_of(*c).unwrap())
                    / (next.t - prev.t);
                let rhs = mid.driven_of(*c).unwrap();
                let gap = r.route_gap(lhs - rhs, cfg.constants.c);
                data.max_route_gap = data.max_route_gap.max(gap);
                let scale = [r.integral, r.boundary_flux, lhs, rhs]
                    .iter()
                    .fold(0.0f64, |m, v| m.max(v.abs()));
                data.route_scale = data.route_scale.max(scale);
                let mrow = row - 1;
                data.series.set(mrow, &format!("residual_L2_{tag}"), r.l2);
                data.series.set(mrow, &format!("residual_Linf_{tag}"), r.linf);
                data.series.set(mrow, &format!("residual_int_{tag}"), r.integral);
                data.series.set(mrow, &format!("flux_{tag}"), r.boundary_flux);
                data.series.set(mrow, &format!("route_gap_{tag}"), gap);
                let better = near_mid
                    .as_ref()
                    .map_or(true, |(t, _)| (r.t - mid_time).abs() < (t - mid_time).abs());
                if better {
                    *near_mid = Some((r.t, r.residual.clone()));
                }
                *last = Some((r.t, r.residual));
            }
        }
        Ok(())
    })?;

    data.residual_dumps = dumps
        .into_iter()
        .map(|(c, a, b)| {
            let mut v: Vec<(f64, RealField)> = a.into_iter().collect();
            if let Some(b) = b {
                if v.first().map_or(true, |(t, _)| *t != b.0) {
                    v.push(b);
                }
            }
            (c, v)
        })
        .collect();
    data.seconds = start.elapsed().as_secs_f64();
    Ok(data)
}

/// Evolves a scenario and records its series, without writing anything.
pub fn simulate(cfg: &ScenarioConfig) -> Result<RunData> {
    cfg.check_stability()?;
    match build_initial(cfg)? {
        Initial::Schrodinger(s) => execute(&s, cfg),
        Initial::KleinGordon(s) => execute(&s, cfg),
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct Timing {
    pub wall_seconds: f64,
    pub run_seconds: f64,
    pub control_seconds: Option<f64>,
    pub steps: usize,
    pub snapshots: usize,
}

/// Config echo, check outcomes, emitted files and timing.
#[derive(Debug, Clone, Serialize)]
pub struct RunReport {
    pub config: serde_json::Value,
    pub checks: Vec<CheckResult>,
    pub files: Vec<String>,
    pub timing: Timing,
}

impl RunReport {
    pub fn all_passed(&self) -> bool {
        self.checks.iter().all(|c| c.pass)
    }

    pub fn check(&self, name: &str) -> Option<&CheckResult> {
        self.checks.iter().find(|c| c.name == name)
    }
}

/// A finished run: report plus the data needed to write it out.
#[derive(Debug, Clone)]
pub struct RunOutcome {
    pub report: RunReport,
    pub main: RunData,
    pub control: Option<RunData>,
}

/// Runs the scenario (and its zero-potential control when a check needs
/// one) and evaluates every requested check.
pub fn run_scenario(cfg: &ScenarioConfig) -> Result<RunOutcome> {
    let start = Instant::now();
    cfg.check_stability()?;
    let wants_control = cfg.checks.iter().any(|c| checks::needs_control(&c.name));
    let separate_control = wants_control && cfg.control().potential != cfg.potential;
    let (main, control) = if separate_control {
        let ctrl_cfg = cfg.control();
        let (a, b) = exec::join(|| simulate(cfg), || simulate(&ctrl_cfg));
        (a?, Some(b?))
    } else {
        (simulate(cfg)?, None)
    };
    let reference = if wants_control {
        Some(control.as_ref().unwrap_or(&main))
    } else {
        None
    };
    let results = cfg
        .checks
        .iter()
        .map(|spec| checks::evaluate(spec, cfg, &main, reference))
        .collect::<Result<Vec<_>>>()?;
    let report = RunReport {
        config: serde_json::to_value(&cfg.flat).map_err(|e| Error::Io(e.to_string()))?,
        checks: results,
        files: Vec::new(),
        timing: Timing {
            wall_seconds: start.elapsed().as_secs_f64(),
            run_seconds: main.seconds,
            control_seconds: control.as_ref().map(|c| c.seconds),
            steps: main.steps,
            snapshots: main.series.times.len(),
        },
    };
    Ok(RunOutcome {
        report,
        main,
        control,
    })
}

fn dump_csv(dim: usize, dumps: &[(f64, RealField)]) -> String {
    let mut out = String::from(if dim == 2 { "t,x,y,residual\n" } else { "t,x,residual\n" });
    for (t, field) in dumps {
        let grid = field.grid();
        for (k, v) in field.values().iter().enumerate() {
            let p = grid.point(k);
            if dim == 2 {
                let _ = writeln!(out, "{t},{},{},{v}", p[0], p[1]);
            } else {
                let _ = writeln!(out, "{t},{},{v}", p[0]);
            }
        }
    }
    out
}

impl RunOutcome {
    /// Writes `series.csv`, `residual_nu<ν>.csv` and `report.json` into
    /// `dir`, recording the file names in the report.
    pub fn write(&mut self, dir: &Path) -> Result<()> {
        std::fs::create_dir_all(dir)?;
        let mut files = vec!["series.csv".to_string()];
        let series = self
            .main
            .series
            .to_csv(self.control.as_ref().map(|c| ("ctrl_", &c.series)));
        std::fs::write(dir.join("series.csv"), series)?;
        for (c, dumps) in &self.main.residual_dumps {
            if c.nu().is_none() || dumps.is_empty() {
                continue;
            }
            let name = format!("residual_{}.csv", c.tag());
            let dim = dumps[0].1.grid().dim();
            std::fs::write(dir.join(&name), dump_csv(dim, dumps))?;
            files.push(name);
        }
        files.push("report.json".into());
        self.report.files = files;
        let json = serde_json::to_string_pretty(&self.report).map_err(|e| Error::Io(e.to_string()))?;
        std::fs::write(dir.join("report.json"), json + "\n")?;
        Ok(())
    }
}
