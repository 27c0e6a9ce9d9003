//! Flat dotted-key configuration.
//!
//! A config file is TOML; nested tables and dotted keys are flattened to
//! `section.key` form, layered as catalog defaults < file < overrides, and
//! then validated into a typed [`ScenarioConfig`].

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use num_complex::Complex64;
use toml::Value;

use crate::error::{Error, Result};
use crate::fieldgrid::{Axis, Boundary, Grid, PhysicalConstants};
use crate::kleingordon::max_stable_dt;
use crate::observables::Theory;
use crate::potential::{Floor, PotentialSpec};

use super::catalog;

pub type FlatConfig = BTreeMap<String, Value>;

const KEYS: &[&str] = &[
    "scenario",
    "theory",
    "grid.dim",
    "grid.n",
    "grid.ny",
    "grid.x_min",
    "grid.x_max",
    "grid.y_min",
    "grid.y_max",
    "grid.boundary",
    "constants.hbar",
    "constants.m",
    "constants.c",
    "constants.q",
    "potential.kind",
    "potential.v0",
    "potential.slope_x",
    "potential.slope_y",
    "potential.omega_x",
    "potential.omega_y",
    "potential.center_x",
    "potential.center_y",
    "potential.mass",
    "potential.floor",
    "potential.floor_v0",
    "potential.floor_omega",
    "potential.floor_alpha",
    "potential.floor_knots",
    "initial.kind",
    "initial.center_x",
    "initial.center_y",
    "initial.width_x",
    "initial.width_y",
    "initial.angle",
    "initial.k_x",
    "initial.k_y",
    "initial.mode",
    "initial.modes",
    "time.dt",
    "time.t_final",
    "time.stride",
    "checks",
    "output.dir",
    "converge.quantity",
    "converge.target",
];

fn flatten_into(prefix: &str, table: &toml::Table, out: &mut FlatConfig) {
    for (k, v) in table {
        let key = if prefix.is_empty() {
            k.clone()
        } else {
            format!("{prefix}.{k}")
        };
        match v {
            Value::Table(t) => flatten_into(&key, t, out),
            other => {
                out.insert(key, other.clone());
            }
        }
    }
}

/// Parses TOML text into dotted keys.
pub fn parse_flat(text: &str) -> Result<FlatConfig> {
    let table: toml::Table = text
        .parse()
        .map_err(|e: toml::de::Error| Error::config("<file>", e.message().to_string()))?;
    let mut out = FlatConfig::new();
    flatten_into("", &table, &mut out);
    Ok(out)
}

/// Parses `key=value`; the value is read as a TOML literal, falling back to
/// a bare string.
pub fn parse_override(spec: &str) -> Result<(String, Value)> {
    let (key, raw) = spec
        .split_once('=')
        .ok_or_else(|| Error::config(spec, "override must look like key=value"))?;
    let key = key.trim().to_string();
    let raw = raw.trim();
    if key.is_empty() {
        return Err(Error::config(spec, "empty override key"));
    }
    let value = format!("v = {raw}")
        .parse::<toml::Table>()
        .ok()
        .and_then(|mut t| t.remove("v"))
        .unwrap_or_else(|| Value::String(raw.to_string()));
    Ok((key, value))
}

/// Layers catalog defaults, the file contents and overrides.
pub fn layer(file: FlatConfig, overrides: &[(String, Value)]) -> Result<FlatConfig> {
    let mut user = file;
    for (k, v) in overrides {
        user.insert(k.clone(), v.clone());
    }
    let id = match user.get("scenario") {
        Some(Value::String(s)) => s.clone(),
        Some(_) => return Err(Error::config("scenario", "must be a string")),
        None => return Err(Error::config("scenario", "missing scenario id")),
    };
    let mut merged = catalog::defaults(&id)?;
    merged.extend(user);
    for key in merged.keys() {
        if !KEYS.contains(&key.as_str()) && !key.starts_with("tolerance.") {
            return Err(Error::config(key.clone(), "unknown key"));
        }
    }
    Ok(merged)
}

/// Reads a config file and applies overrides.
pub fn load(path: &Path, overrides: &[String]) -> Result<ScenarioConfig> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| Error::config("<file>", format!("{}: {e}", path.display())))?;
    let parsed = overrides
        .iter()
        .map(|o| parse_override(o))
        .collect::<Result<Vec<_>>>()?;
    ScenarioConfig::from_flat(layer(parse_flat(&text)?, &parsed)?)
}

struct Reader<'a>(&'a FlatConfig);

impl Reader<'_> {
    fn raw(&self, key: &str) -> Result<&Value> {
        self.0
            .get(key)
            .ok_or_else(|| Error::config(key, "missing"))
    }

    fn has(&self, key: &str) -> bool {
        self.0.contains_key(key)
    }

    fn f64(&self, key: &str) -> Result<f64> {
        let v = match self.raw(key)? {
            Value::Float(f) => *f,
            Value::Integer(i) => *i as f64,
            _ => return Err(Error::config(key, "expected a number")),
        };
        if !v.is_finite() {
            return Err(Error::config(key, "must be finite"));
        }
        Ok(v)
    }

    fn f64_or(&self, key: &str, default: f64) -> Result<f64> {
        if self.has(key) {
            self.f64(key)
        } else {
            Ok(default)
        }
    }

    fn positive(&self, key: &str) -> Result<f64> {
        let v = self.f64(key)?;
        if v <= 0.0 {
            return Err(Error::config(key, format!("must be positive, got {v}")));
        }
        Ok(v)
    }

    fn usize(&self, key: &str) -> Result<usize> {
        match self.raw(key)? {
            Value::Integer(i) if *i >= 0 => Ok(*i as usize),
            _ => Err(Error::config(key, "expected a non-negative integer")),
        }
    }

    fn str(&self, key: &str) -> Result<&str> {
        match self.raw(key)? {
            Value::String(s) => Ok(s),
            _ => Err(Error::config(key, "expected a string")),
        }
    }

    fn str_or<'b>(&'b self, key: &str, default: &'b str) -> Result<&'b str> {
        if self.has(key) {
            self.str(key)
        } else {
            Ok(default)
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GridSpec {
    pub dim: usize,
    pub n: [usize; 2],
    pub min: [f64; 2],
    pub max: [f64; 2],
    pub boundary: Boundary,
}

impl GridSpec {
    pub fn build(&self) -> Result<Arc<Grid>> {
        let axis = |i: usize| Axis::new(self.min[i], self.max[i], self.n[i], self.boundary);
        if self.dim == 1 {
            Grid::line(axis(0))
        } else {
            Grid::plane(axis(0), axis(1))
        }
    }

    /// Same extents with `2^level` times finer spacing.
    pub fn refined(&self, level: u32) -> GridSpec {
        let f = 1usize << level;
        let mut out = self.clone();
        for i in 0..self.dim {
            out.n[i] = match self.boundary {
                Boundary::Dirichlet => (self.n[i] - 1) * f + 1,
                Boundary::Periodic => self.n[i] * f,
            };
        }
        out
    }
}

/// Initial data, before it is turned into a state.
#[derive(Debug, Clone, PartialEq)]
pub enum InitialSpec {
    Gaussian {
        center: [f64; 2],
        width: [f64; 2],
        angle: f64,
        k: [f64; 2],
    },
    Modes(Vec<(usize, Complex64)>),
    Packet {
        center: [f64; 2],
        width: f64,
        k: [f64; 2],
    },
    PlaneWave { k: [f64; 2] },
    Stationary { k: [f64; 2] },
}

#[derive(Debug, Clone, PartialEq)]
pub struct CheckSpec {
    pub name: String,
    pub tolerance: Option<f64>,
}

/// What `converge` measures at each level.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ConvergeQuantity {
    /// Largest interior L² residual norm of the given balance over the run.
    Residual(crate::verify::Component),
    /// Largest L² distance to the moving-floor closed form over the run.
    OracleError,
}

impl ConvergeQuantity {
    pub fn parse(s: &str) -> Result<Self> {
        use crate::verify::Component;
        Ok(match s {
            "residual_nu0" => ConvergeQuantity::Residual(Component::Energy),
            "residual_nu1" => ConvergeQuantity::Residual(Component::Momentum(0)),
            "residual_nu2" => ConvergeQuantity::Residual(Component::Momentum(1)),
            "residual_ang" => ConvergeQuantity::Residual(Component::Angular),
            "oracle_error" => ConvergeQuantity::OracleError,
            other => {
                return Err(Error::config(
                    "converge.quantity",
                    format!("unknown quantity `{other}`"),
                ))
            }
        })
    }
}

/// A validated scenario.
#[derive(Debug, Clone)]
pub struct ScenarioConfig {
    pub id: String,
    pub theory: Theory,
    pub grid: GridSpec,
    pub constants: PhysicalConstants,
    pub potential: PotentialSpec,
    pub initial: InitialSpec,
    pub dt: f64,
    pub t_final: f64,
    pub stride: usize,
    pub checks: Vec<CheckSpec>,
    pub out_dir: Option<PathBuf>,
    pub converge_quantity: ConvergeQuantity,
    pub converge_target: f64,
    /// The merged dotted-key view, echoed into reports.
    pub flat: FlatConfig,
}

impl ScenarioConfig {
    pub fn from_flat(flat: FlatConfig) -> Result<Self> {
        let r = Reader(&flat);
        let id = r.str("scenario")?.to_string();
        let theory = match r.str("theory")? {
            "schrodinger" => Theory::Schrodinger,
            "kleingordon" => Theory::KleinGordon,
            other => return Err(Error::config("theory", format!("unknown theory `{other}`"))),
        };
        let grid = read_grid(&r)?;
        let constants = PhysicalConstants::new(
            r.f64("constants.hbar")?,
            r.f64("constants.m")?,
            r.f64("constants.c")?,
            r.f64("constants.q")?,
        )
        .map_err(|e| Error::config("constants", e.to_string()))?;
        let dt = r.positive("time.dt")?;
        let t_final = r.positive("time.t_final")?;
        let stride = r.usize("time.stride")?;
        if stride == 0 {
            return Err(Error::config("time.stride", "must be at least 1"));
        }
        let steps = t_final / dt;
        if (steps - steps.round()).abs() > 1e-9 * steps.max(1.0) {
            return Err(Error::config(
                "time.t_final",
                format!("{t_final} is not a whole number of steps of {dt}"),
            ));
        }
        let steps = steps.round() as usize;
        if steps % stride != 0 {
            return Err(Error::config(
                "time.stride",
                format!("{stride} does not divide the {steps} steps"),
            ));
        }
        let potential = read_potential(&r, &grid, &constants, t_final)?;
        let initial = read_initial(&r, theory, &grid)?;
        let checks = match r.raw("checks")? {
            Value::Array(items) => items
                .iter()
                .map(|v| match v {
                    Value::String(name) => {
                        let key = format!("tolerance.{name}");
                        let tolerance = if r.has(&key) { Some(r.f64(&key)?) } else { None };
                        Ok(CheckSpec {
                            name: name.clone(),
                            tolerance,
                        })
                    }
                    _ => Err(Error::config("checks", "expected a list of check names")),
                })
                .collect::<Result<Vec<_>>>()?,
            _ => return Err(Error::config("checks", "expected a list of check names")),
        };
        for c in &checks {
            super::checks::validate_name(&c.name, theory, grid.dim)?;
        }
        let out_dir = if r.has("output.dir") {
            Some(PathBuf::from(r.str("output.dir")?))
        } else {
            None
        };
        let converge_quantity = ConvergeQuantity::parse(r.str_or("converge.quantity", "residual_nu0")?)?;
        let converge_target = r.f64_or("converge.target", 2.0)?;
        let cfg = ScenarioConfig {
            id,
            theory,
            grid,
            constants,
            potential,
            initial,
            dt,
            t_final,
            stride,
            checks,
            out_dir,
            converge_quantity,
            converge_target,
            flat,
        };
        cfg.check_stability()?;
        Ok(cfg)
    }

    /// Rejects Klein-Gordon steps above the leapfrog bound.
    pub fn check_stability(&self) -> Result<()> {
        if self.theory != Theory::KleinGordon {
            return Ok(());
        }
        let grid = self.grid.build()?;
        let bound = max_stable_dt(&grid, &self.constants);
        if self.dt > bound * (1.0 + 1e-12) {
            return Err(Error::config(
                "time.dt",
                format!(
                    "dt = {} exceeds the CFL bound 0.5*dx/c = {bound}",
                    self.dt
                ),
            ));
        }
        Ok(())
    }

    pub fn steps(&self) -> usize {
        (self.t_final / self.dt).round() as usize
    }

    pub fn has_check(&self, name: &str) -> bool {
        self.checks.iter().any(|c| c.name == name)
    }

    /// This scenario with the potential switched off (interior level zero
    /// for a moving floor).
    pub fn control(&self) -> ScenarioConfig {
        let mut out = self.clone();
        out.potential = match &self.potential {
            PotentialSpec::MovingFloor { width, .. } => PotentialSpec::MovingFloor {
                floor: Floor::Constant { v0: 0.0 },
                width: *width,
            },
            _ => PotentialSpec::zero(),
        };
        out
    }

    /// Grid and time step refined by `2^level`. The stride is kept, so the
    /// sample spacing shrinks with `dt` and centered time differences on the
    /// series converge along with everything else.
    pub fn refined(&self, level: u32) -> ScenarioConfig {
        let f = 1usize << level;
        let mut out = self.clone();
        out.grid = self.grid.refined(level);
        out.dt = self.dt / f as f64;
        out
    }
}

fn read_grid(r: &Reader<'_>) -> Result<GridSpec> {
    let dim = r.usize("grid.dim")?;
    if !(dim == 1 || dim == 2) {
        return Err(Error::config("grid.dim", "must be 1 or 2"));
    }
    let n = r.usize("grid.n")?;
    let ny = if r.has("grid.ny") { r.usize("grid.ny")? } else { n };
    let boundary = match r.str("grid.boundary")? {
        "dirichlet" => Boundary::Dirichlet,
        "periodic" => Boundary::Periodic,
        other => {
            return Err(Error::config(
                "grid.boundary",
                format!("expected dirichlet or periodic, got `{other}`"),
            ))
        }
    };
    let mut spec = GridSpec {
        dim,
        n: [n, if dim == 2 { ny } else { 1 }],
        min: [r.f64("grid.x_min")?, 0.0],
        max: [r.f64("grid.x_max")?, 0.0],
        boundary,
    };
    if dim == 2 {
        spec.min[1] = r.f64_or("grid.y_min", spec.min[0])?;
        spec.max[1] = r.f64_or("grid.y_max", spec.max[0])?;
    }
    for i in 0..dim {
        if spec.n[i] < 4 {
            return Err(Error::config("grid.n", "need at least 4 nodes per axis"));
        }
        if !(spec.max[i] > spec.min[i]) {
            return Err(Error::config(
                if i == 0 { "grid.x_max" } else { "grid.y_max" },
                "must exceed the minimum",
            ));
        }
    }
    spec.build().map_err(|e| Error::config("grid", e.to_string()))?;
    Ok(spec)
}

fn read_floor(r: &Reader<'_>, t_final: f64) -> Result<Floor> {
    Ok(match r.str("potential.floor")? {
        "constant" => Floor::Constant {
            v0: r.f64("potential.floor_v0")?,
        },
        "sinusoid" => Floor::Sinusoid {
            v0: r.f64("potential.floor_v0")?,
            omega: r.f64("potential.floor_omega")?,
        },
        "ramp" => Floor::Ramp {
            alpha: r.f64("potential.floor_alpha")?,
        },
        "tabulated" => {
            // a sinusoid sampled at knots and interpolated linearly
            let knots = r.usize("potential.floor_knots")?;
            if knots < 2 {
                return Err(Error::config("potential.floor_knots", "need at least 2 knots"));
            }
            let (v0, omega) = (r.f64("potential.floor_v0")?, r.f64("potential.floor_omega")?);
            let times = (0..knots)
                .map(|i| t_final * i as f64 / (knots - 1) as f64)
                .collect();
            Floor::sample_from(times, |t| v0 * (omega * t).sin())
                .map_err(|e| Error::config("potential.floor_knots", e.to_string()))?
        }
        other => {
            return Err(Error::config(
                "potential.floor",
                format!("unknown floor `{other}`"),
            ))
        }
    })
}

fn read_potential(
    r: &Reader<'_>,
    grid: &GridSpec,
    constants: &PhysicalConstants,
    t_final: f64,
) -> Result<PotentialSpec> {
    Ok(match r.str("potential.kind")? {
        "zero" => PotentialSpec::zero(),
        "constant" => PotentialSpec::Constant {
            v0: r.f64("potential.v0")?,
        },
        "linear" => PotentialSpec::Linear {
            slope: [r.f64("potential.slope_x")?, r.f64_or("potential.slope_y", 0.0)?],
        },
        "harmonic" => {
            let wx = r.f64("potential.omega_x")?;
            PotentialSpec::Harmonic {
                center: [
                    r.f64_or("potential.center_x", 0.0)?,
                    r.f64_or("potential.center_y", 0.0)?,
                ],
                omega: [wx, r.f64_or("potential.omega_y", wx)?],
                mass: r.f64_or("potential.mass", constants.m)?,
            }
        }
        "moving_floor" => {
            if grid.dim != 1 || grid.boundary != Boundary::Dirichlet {
                return Err(Error::config(
                    "potential.kind",
                    "moving_floor needs a 1D dirichlet grid",
                ));
            }
            if grid.min[0] != 0.0 {
                return Err(Error::config("grid.x_min", "moving_floor well starts at 0"));
            }
            PotentialSpec::MovingFloor {
                floor: read_floor(r, t_final)?,
                width: grid.max[0],
            }
        }
        other => {
            return Err(Error::config(
                "potential.kind",
                format!("unknown potential `{other}`"),
            ))
        }
    })
}

fn read_modes(r: &Reader<'_>) -> Result<Vec<(usize, Complex64)>> {
    let bad = || Error::config("initial.modes", "expected a list of [n, re, im] triples");
    let Value::Array(items) = r.raw("initial.modes")? else {
        return Err(bad());
    };
    items
        .iter()
        .map(|item| {
            let Value::Array(t) = item else { return Err(bad()) };
            if t.len() != 3 {
                return Err(bad());
            }
            let n = t[0].as_integer().filter(|n| *n >= 1).ok_or_else(bad)? as usize;
            let num = |v: &Value| v.as_float().or_else(|| v.as_integer().map(|i| i as f64));
            Ok((n, Complex64::new(num(&t[1]).ok_or_else(bad)?, num(&t[2]).ok_or_else(bad)?)))
        })
        .collect()
}

fn read_initial(r: &Reader<'_>, theory: Theory, grid: &GridSpec) -> Result<InitialSpec> {
    let center = || -> Result<[f64; 2]> {
        Ok([r.f64("initial.center_x")?, r.f64_or("initial.center_y", 0.0)?])
    };
    let wave = || -> Result<[f64; 2]> {
        if r.has("initial.mode") {
            if grid.boundary != Boundary::Periodic {
                return Err(Error::config("initial.mode", "mode numbers need a periodic grid"));
            }
            let m = r.f64("initial.mode")?;
            Ok([2.0 * std::f64::consts::PI * m / (grid.max[0] - grid.min[0]), 0.0])
        } else {
            Ok([r.f64("initial.k_x")?, r.f64_or("initial.k_y", 0.0)?])
        }
    };
    let kind = r.str("initial.kind")?;
    let spec = match kind {
        "gaussian" => {
            let wx = r.positive("initial.width_x")?;
            InitialSpec::Gaussian {
                center: center()?,
                width: [wx, if r.has("initial.width_y") { r.positive("initial.width_y")? } else { wx }],
                angle: r.f64_or("initial.angle", 0.0)?,
                k: wave()?,
            }
        }
        "modes" => InitialSpec::Modes(read_modes(r)?),
        "packet" => InitialSpec::Packet {
            center: center()?,
            width: r.positive("initial.width_x")?,
            k: wave()?,
        },
        "plane_wave" => InitialSpec::PlaneWave { k: wave()? },
        "stationary" => InitialSpec::Stationary { k: wave()? },
        other => {
            return Err(Error::config("initial.kind", format!("unknown initial state `{other}`")))
        }
    };
    let ok = match theory {
        Theory::Schrodinger => matches!(spec, InitialSpec::Gaussian { .. } | InitialSpec::Modes(_)),
        Theory::KleinGordon => !matches!(spec, InitialSpec::Gaussian { .. } | InitialSpec::Modes(_)),
    };
    if !ok {
        return Err(Error::config(
            "initial.kind",
            format!("`{kind}` is not available for {theory}"),
        ));
    }
    Ok(spec)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn flattening_and_overrides() {
        let flat = parse_flat("scenario = \"x\"\n[grid]\nn = 8\n[potential]\nslope_x = 1.5\n").unwrap();
        assert_eq!(flat["grid.n"], Value::Integer(8));
        assert_eq!(flat["potential.slope_x"], Value::Float(1.5));
        assert_eq!(parse_override("grid.n=64").unwrap().1, Value::Integer(64));
        assert_eq!(
            parse_override("potential.kind = harmonic").unwrap().1,
            Value::String("harmonic".into())
        );
        assert!(parse_override("nonsense").is_err());
    }

    #[test]
    fn unknown_keys_and_ids_are_rejected() {
        let flat = parse_flat("scenario = \"sch_free_gaussian\"\ngrid.q = 3\n").unwrap();
        assert!(matches!(layer(flat, &[]), Err(Error::Config { field, .. }) if field == "grid.q"));
        let flat = parse_flat("scenario = \"nope\"\n").unwrap();
        assert!(matches!(layer(flat, &[]), Err(Error::Config { field, .. }) if field == "scenario"));
    }

    fn config(id: &str, overrides: &[&str]) -> Result<ScenarioConfig> {
        let flat = parse_flat(&format!("scenario = \"{id}\"\n")).unwrap();
        let o: Vec<_> = overrides.iter().map(|s| parse_override(s).unwrap()).collect();
        ScenarioConfig::from_flat(layer(flat, &o)?)
    }

    #[test]
    fn every_catalog_entry_validates() {
        for id in catalog::ids() {
            config(id, &[]).unwrap_or_else(|e| panic!("{id}: {e}"));
        }
    }

    #[test]
    fn cfl_violation_names_the_bound() {
        let err = config("kg_plane_wave", &["time.dt=0.5", "time.t_final=1.0", "time.stride=1"]).unwrap_err();
        match err {
            Error::Config { field, reason } => {
                assert_eq!(field, "time.dt");
                assert!(reason.contains("CFL"), "{reason}");
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn invalid_values_name_their_field() {
        let cases = [
            (&["time.dt=-1"][..], "time.dt"),
            (&["time.stride=7"][..], "time.stride"),
            (&["grid.boundary=\"open\""][..], "grid.boundary"),
            (&["constants.m=0"][..], "constants"),
            (&["checks=[\"bogus\"]"][..], "checks"),
        ];
        for (o, field) in cases {
            match config("sch_free_gaussian", o).unwrap_err() {
                Error::Config { field: f, .. } => assert_eq!(f, field, "{o:?}"),
                other => panic!("{other:?}"),
            }
        }
    }

    #[test]
    fn refinement_halves_dx_dt_and_sample_spacing() {
        let c = config("sch_moving_floor_sin", &[]).unwrap();
        let r = c.refined(2);
        assert_eq!(r.grid.n[0], (c.grid.n[0] - 1) * 4 + 1);
        let dx = |g: &GridSpec| g.build().unwrap().spacing(0);
        assert!((dx(&c.grid) / dx(&r.grid) - 4.0).abs() < 1e-12);
        assert_eq!(r.stride, c.stride);
        assert!((c.dt / r.dt - 4.0).abs() < 1e-12);
        assert_eq!(r.steps(), 4 * c.steps());
    }
}
