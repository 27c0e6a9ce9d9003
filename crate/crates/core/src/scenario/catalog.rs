//! Built-in scenarios. Each entry is a complete config in the same dotted
//! schema a user file uses; files only need `scenario = "<id>"` plus the
//! keys they change.

use serde::Serialize;

use crate::error::{Error, Result};

use super::config::{parse_flat, FlatConfig};

const UNITS: &str = r#"
constants.hbar = 1.0
constants.m = 1.0
constants.c = 1.0
constants.q = 1.0
"#;

struct Entry {
    id: &'static str,
    summary: &'static str,
    body: &'static str,
}

const ENTRIES: &[Entry] = &[
    Entry {
        id: "sch_free_gaussian",
        summary: "free Gaussian packet in a wide box; zero-potential control",
        body: r#"
theory = "schrodinger"
grid = { dim = 1, n = 1024, x_min = -20.0, x_max = 20.0, boundary = "dirichlet" }
potential.kind = "zero"
initial = { kind = "gaussian", center_x = -4.0, width_x = 1.5, k_x = 1.0 }
time = { dt = 1e-3, t_final = 2.0, stride = 20 }
checks = ["norm_conservation", "ehrenfest_momentum_x", "ehrenfest_energy", "rhs_at_floor", "residual_at_floor", "cross_route"]
tolerance.ehrenfest_momentum_x = 1e-8
tolerance.ehrenfest_energy = 1e-8
converge.quantity = "residual_nu1"
"#,
    },
    Entry {
        id: "sch_linear_potential",
        summary: "Gaussian packet accelerated by a uniform force, V = F x",
        body: r#"
theory = "schrodinger"
grid = { dim = 1, n = 1024, x_min = -20.0, x_max = 20.0, boundary = "dirichlet" }
potential = { kind = "linear", slope_x = 1.0 }
initial = { kind = "gaussian", center_x = 0.0, width_x = 1.5, k_x = 0.5 }
time = { dt = 2.5e-4, t_final = 1.0, stride = 40 }
checks = ["ehrenfest_momentum_x", "ehrenfest_energy", "norm_conservation", "cross_route"]
tolerance.ehrenfest_momentum_x = 1e-3
tolerance.ehrenfest_energy = 1e-6
converge.quantity = "residual_nu1"
"#,
    },
    Entry {
        id: "sch_harmonic_2d",
        summary: "diagonally moving packet in an isotropic 2D oscillator; no torque",
        body: r#"
theory = "schrodinger"
grid = { dim = 2, n = 128, x_min = -8.0, x_max = 8.0, boundary = "dirichlet" }
potential = { kind = "harmonic", omega_x = 0.3 }
initial = { kind = "gaussian", center_x = 1.0, center_y = -1.0, width_x = 1.0, width_y = 1.0, angle = 0.0, k_x = 0.8, k_y = 0.8 }
time = { dt = 5e-3, t_final = 1.0, stride = 10 }
checks = ["angular_at_floor", "ehrenfest_momentum_x", "norm_conservation", "cross_route"]
tolerance.ehrenfest_momentum_x = 1e-2
converge.quantity = "residual_nu1"
"#,
    },
    Entry {
        id: "sch_moving_floor_sin",
        summary: "infinite well with sinusoidal floor, two-mode start",
        body: r#"
theory = "schrodinger"
grid = { dim = 1, n = 256, x_min = 0.0, x_max = 1.0, boundary = "dirichlet" }
potential = { kind = "moving_floor", floor = "sinusoid", floor_v0 = 1.0, floor_omega = 6.283185307179586 }
initial = { kind = "modes", modes = [[1, 0.7071067811865476, 0.0], [2, 0.0, 0.7071067811865476]] }
time = { dt = 1e-3, t_final = 1.0, stride = 1 }
checks = ["ehrenfest_energy", "kinetic_drift", "norm_conservation", "oracle_error", "cross_route"]
tolerance.ehrenfest_energy = 5e-3
tolerance.oracle_error = 5e-3
converge.quantity = "oracle_error"
"#,
    },
    Entry {
        id: "sch_moving_floor_ramp",
        summary: "infinite well with linearly rising floor",
        body: r#"
theory = "schrodinger"
grid = { dim = 1, n = 256, x_min = 0.0, x_max = 1.0, boundary = "dirichlet" }
potential = { kind = "moving_floor", floor = "ramp", floor_alpha = 1.0 }
initial = { kind = "modes", modes = [[1, 0.7071067811865476, 0.0], [2, 0.0, 0.7071067811865476]] }
time = { dt = 1e-3, t_final = 1.0, stride = 1 }
checks = ["floor_independence", "ehrenfest_energy", "kinetic_drift", "norm_conservation", "oracle_error", "cross_route"]
tolerance.ehrenfest_energy = 5e-3
tolerance.oracle_error = 5e-3
converge.quantity = "oracle_error"
"#,
    },
    Entry {
        id: "sch_anisotropic_torque_2d",
        summary: "tilted packet in an anisotropic 2D oscillator; torque drives L_z",
        body: r#"
theory = "schrodinger"
grid = { dim = 2, n = 128, x_min = -8.0, x_max = 8.0, boundary = "dirichlet" }
potential = { kind = "harmonic", omega_x = 0.2, omega_y = 0.4 }
initial = { kind = "gaussian", center_x = 0.0, center_y = 0.0, width_x = 2.0, width_y = 1.2, angle = 0.7853981633974483, k_x = 0.0, k_y = 0.0 }
time = { dt = 5e-3, t_final = 1.0, stride = 10 }
checks = ["ehrenfest_angular_rel_rms", "norm_conservation", "cross_route"]
tolerance.ehrenfest_angular_rel_rms = 1e-3
converge.quantity = "residual_ang"
"#,
    },
    Entry {
        id: "kg_plane_wave",
        summary: "free Klein-Gordon plane wave on a ring; dispersion relation",
        body: r#"
theory = "kleingordon"
grid = { dim = 1, n = 512, x_min = 0.0, x_max = 20.0, boundary = "periodic" }
potential.kind = "zero"
initial = { kind = "plane_wave", mode = 1 }
time = { dt = 1e-2, t_final = 10.0, stride = 10 }
checks = ["dispersion", "charge_conservation", "ehrenfest_energy", "ehrenfest_momentum_x", "rhs_at_floor", "residual_at_floor", "cross_route"]
tolerance.dispersion = 1e-3
tolerance.ehrenfest_energy = 1e-6
tolerance.ehrenfest_momentum_x = 1e-8
converge.quantity = "residual_nu0"
"#,
    },
    Entry {
        id: "kg_stationary_constV",
        summary: "stationary Klein-Gordon wave in a constant potential",
        body: r#"
theory = "kleingordon"
grid = { dim = 1, n = 1024, x_min = 0.0, x_max = 20.0, boundary = "periodic" }
potential = { kind = "constant", v0 = 0.5 }
initial = { kind = "stationary", mode = 1 }
time = { dt = 1e-3, t_final = 1.0, stride = 50 }
checks = ["stationary_reduction_t0", "stationary_reduction_final", "charge_conservation", "cross_route"]
converge.quantity = "residual_nu0"
"#,
    },
    Entry {
        id: "kg_uniform_field",
        summary: "charged Klein-Gordon packet in a uniform electric field",
        body: r#"
theory = "kleingordon"
grid = { dim = 1, n = 1024, x_min = -20.0, x_max = 20.0, boundary = "dirichlet" }
potential = { kind = "linear", slope_x = 0.02 }
initial = { kind = "packet", center_x = 0.0, width_x = 2.0, k_x = 0.5 }
time = { dt = 5e-3, t_final = 5.0, stride = 10 }
checks = ["ehrenfest_momentum_x_rel_max", "charge_conservation", "cross_route"]
tolerance.ehrenfest_momentum_x_rel_max = 1e-3
converge.quantity = "residual_nu1"
"#,
    },
    Entry {
        id: "kg_central_2d",
        summary: "Klein-Gordon packet orbiting in a weak central potential",
        body: r#"
theory = "kleingordon"
grid = { dim = 2, n = 128, x_min = -10.0, x_max = 10.0, boundary = "dirichlet" }
potential = { kind = "harmonic", omega_x = 0.08 }
initial = { kind = "packet", center_x = 2.0, center_y = 0.0, width_x = 1.5, k_x = 0.0, k_y = 0.5 }
time = { dt = 1e-2, t_final = 4.0, stride = 10 }
checks = ["angular_at_floor", "charge_conservation", "cross_route"]
converge.quantity = "residual_ang"
"#,
    },
];

/// One line of the catalog listing.
#[derive(Debug, Clone, Serialize)]
pub struct CatalogEntry {
    pub id: &'static str,
    pub theory: &'static str,
    pub summary: &'static str,
}

pub fn ids() -> impl Iterator<Item = &'static str> {
    ENTRIES.iter().map(|e| e.id)
}

/// Catalog entries whose id contains `filter`; an empty filter lists all.
pub fn list_scenarios(filter: &str) -> Vec<CatalogEntry> {
    ENTRIES
        .iter()
        .filter(|e| e.id.contains(filter))
        .map(|e| CatalogEntry {
            id: e.id,
            theory: if e.id.starts_with("kg_") { "kleingordon" } else { "schrodinger" },
            summary: e.summary,
        })
        .collect()
}

/// Default dotted-key config for a catalog id.
pub fn defaults(id: &str) -> Result<FlatConfig> {
    let entry = ENTRIES
        .iter()
        .find(|e| e.id == id)
        .ok_or_else(|| Error::config("scenario", format!("unknown scenario id `{id}`")))?;
    let mut flat = parse_flat(&format!("scenario = \"{id}\"\n{UNITS}{}", entry.body))?;
    flat.insert("scenario".into(), toml::Value::String(id.into()));
    Ok(flat)
}
