//! Densities, currents, energy-momentum tensor components, expectation
//! values and field integrals for both theories.
//!
//! Sign conventions follow the mostly-plus metric: `T⁰₀` is minus the
//! energy density, so user-facing energies are `H = -∫T⁰₀`. Spatial indices
//! are raised with `+1`, so `T⁰ᵏ = T⁰_k` and `Tⁱᵏ = Tⁱ_k`.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::exec;
use crate::fieldgrid::{
    gradient, gradient_energy, integrate, laplacian, ComplexField, PhysicalConstants, RealField,
};
use crate::potential::PotentialSpec;

const I: Complex64 = Complex64::new(0.0, 1.0);

/// Relative imaginary residue tolerated when a complex intermediate is
/// reduced to a real component.
pub const REALNESS_TOL: f64 = 1e-12;

/// Relative imaginary residue tolerated on integrated expectation values.
pub const EXPECTATION_REAL_TOL: f64 = 1e-10;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Theory {
    Schrodinger,
    KleinGordon,
}

impl std::fmt::Display for Theory {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Theory::Schrodinger => "schrodinger",
            Theory::KleinGordon => "kleingordon",
        })
    }
}

/// All `T^μ_ν` components of one theory at one instant, plus the on-shell
/// Lagrangian density used in the spatial block.
#[derive(Debug, Clone)]
pub struct TensorComponents {
    pub theory: Theory,
    pub t00: RealField,
    /// `Tⁱ₀`, one field per axis.
    pub ti0: Vec<RealField>,
    /// `T⁰ᵢ`, one field per axis.
    pub t0i: Vec<RealField>,
    /// `Tⁱⱼ`, indexed `[i][j]`.
    pub tij: Vec<Vec<RealField>>,
    pub lagrangian: RealField,
    pub t: f64,
}

impl TensorComponents {
    pub fn dim(&self) -> usize {
        self.ti0.len()
    }

    /// Density `T⁰_ν` for `ν = 0..=dim`.
    pub fn time_row(&self, nu: usize) -> &RealField {
        if nu == 0 {
            &self.t00
        } else {
            &self.t0i[nu - 1]
        }
    }

    /// Flux `Tⁱ_ν` for each spatial `i`.
    pub fn space_column(&self, nu: usize) -> Vec<&RealField> {
        if nu == 0 {
            self.ti0.iter().collect()
        } else {
            self.tij.iter().map(|row| &row[nu - 1]).collect()
        }
    }
}

/// `∂L/∂V` together with the potential derivatives it multiplies.
#[derive(Debug, Clone)]
pub struct SourceTerm {
    pub dl_dv: RealField,
    pub grad_v: Vec<RealField>,
    pub dv_dt: RealField,
    pub t: f64,
}

/// Field content needed to evaluate a source term.
#[derive(Debug, Clone, Copy)]
pub enum FieldRef<'a> {
    Schrodinger {
        psi: &'a ComplexField,
    },
    KleinGordon {
        phi: &'a ComplexField,
        phi_dot: &'a ComplexField,
    },
}

fn realize(values: Vec<Complex64>, what: &'static str) -> Result<Vec<f64>> {
    let scale = values.iter().map(|z| z.norm()).fold(0.0, f64::max);
    let residue = values.iter().map(|z| z.im.abs()).fold(0.0, f64::max);
    if residue > REALNESS_TOL * scale {
        return Err(Error::NotReal {
            what,
            residue: residue / scale,
        });
    }
    Ok(values.into_iter().map(|z| z.re).collect())
}

fn real_scalar(z: Complex64, scale: f64, what: &'static str) -> Result<f64> {
    if z.im.abs() > EXPECTATION_REAL_TOL * scale.max(z.re.abs()).max(f64::MIN_POSITIVE) {
        return Err(Error::NotReal {
            what,
            residue: z.im.abs(),
        });
    }
    Ok(z.re)
}

fn pointwise(
    f: &ComplexField,
    what: &'static str,
    op: impl Fn(usize) -> Complex64 + Sync + Send,
) -> Result<RealField> {
    let vals = exec::map_indexed(f.grid().len(), op);
    Ok(RealField::from_parts(f.grid().clone(), realize(vals, what)?))
}

fn gradients(f: &ComplexField) -> Vec<ComplexField> {
    (0..f.grid().dim())
        .map(|a| gradient(f, a).expect("axis in range"))
        .collect()
}

/// `|Ψ|² = Ψ̄Ψ`.
pub fn prob_density(psi: &ComplexField) -> RealField {
    psi.norm_sqr()
}

/// `j = (ħ/2mi)(Ψ̄∇Ψ - Ψ∇Ψ̄)`, one field per axis.
pub fn prob_current(psi: &ComplexField, k: &PhysicalConstants) -> Result<Vec<RealField>> {
    let pre = Complex64::new(0.0, -k.hbar / (2.0 * k.m));
    gradients(psi)
        .iter()
        .map(|g| {
            pointwise(psi, "probability current", |n| {
                let (p, d) = (psi.values()[n], g.values()[n]);
                pre * (p.conj() * d - p * d.conj())
            })
        })
        .collect()
}

/// `Ψ̇` from the Schrödinger equation, zero on Dirichlet end points.
pub fn schrodinger_time_derivative(
    psi: &ComplexField,
    v: &RealField,
    k: &PhysicalConstants,
) -> Result<ComplexField> {
    psi.check_grid(v)?;
    let lap = laplacian(psi);
    let grid = psi.grid();
    let kin = -k.hbar * k.hbar / (2.0 * k.m);
    let vals = exec::map_indexed(grid.len(), |n| {
        if grid.is_dirichlet_boundary(n) {
            return Complex64::new(0.0, 0.0);
        }
        (lap.values()[n] * kin + psi.values()[n] * v.values()[n]) / (I * k.hbar)
    });
    Ok(ComplexField::from_parts(grid.clone(), vals))
}

/// Energy-momentum tensor of the Schrödinger Lagrangian on one snapshot.
///
/// `Ψ̇` inside the components comes from the equation of motion.
/// `T⁰ᵢ = -(iħc/2)(Ψ̄∂ᵢΨ - Ψ∂ᵢΨ̄)`.
pub fn schrodinger_tensor(
    psi: &ComplexField,
    v: &RealField,
    k: &PhysicalConstants,
    t: f64,
) -> Result<TensorComponents> {
    psi.check_grid(v)?;
    let dim = psi.grid().dim();
    let psi_dot = schrodinger_time_derivative(psi, v, k)?;
    let grads = gradients(psi);
    let kinetic = gradient_energy(psi);
    let h2m = k.hbar * k.hbar / (2.0 * k.m);
    let p = psi.values();
    let pd = psi_dot.values();
    let vv = v.values();

    let t00 = RealField::from_parts(
        psi.grid().clone(),
        (0..p.len())
            .map(|n| -h2m * kinetic.values()[n] - vv[n] * p[n].norm_sqr())
            .collect(),
    );
    let lagrangian = pointwise(psi, "schrodinger lagrangian", |n| {
        let time = -0.5 * I * k.hbar * (p[n].conj() * pd[n] - p[n] * pd[n].conj());
        time + h2m * kinetic.values()[n] + vv[n] * p[n].norm_sqr()
    })?;
    let mut ti0 = Vec::with_capacity(dim);
    let mut t0i = Vec::with_capacity(dim);
    for g in &grads {
        let d = g.values();
        ti0.push(pointwise(psi, "T^i_0", |n| {
            (pd[n].conj() * d[n] + pd[n] * d[n].conj()) * (h2m / k.c)
        })?);
        t0i.push(pointwise(psi, "T^0_i", |n| {
            -0.5 * I * k.hbar * k.c * (p[n].conj() * d[n] - p[n] * d[n].conj())
        })?);
    }
    let tij = spatial_block(psi, &grads, &lagrangian, h2m)?;
    Ok(TensorComponents {
        theory: Theory::Schrodinger,
        t00,
        ti0,
        t0i,
        tij,
        lagrangian,
        t,
    })
}

/// `coef (∂ᵢf̄∂ⱼf + ∂ᵢf∂ⱼf̄) - δᵢⱼ L`.
fn spatial_block(
    f: &ComplexField,
    grads: &[ComplexField],
    lagrangian: &RealField,
    coef: f64,
) -> Result<Vec<Vec<RealField>>> {
    let dim = grads.len();
    let mut out = Vec::with_capacity(dim);
    for i in 0..dim {
        let mut row = Vec::with_capacity(dim);
        for j in 0..dim {
            let (gi, gj) = (grads[i].values(), grads[j].values());
            let l = lagrangian.values();
            row.push(pointwise(f, "T^i_j", |n| {
                let sym = (gi[n].conj() * gj[n] + gi[n] * gj[n].conj()) * coef;
                if i == j {
                    sym - l[n]
                } else {
                    sym
                }
            })?);
        }
        out.push(row);
    }
    Ok(out)
}

/// Energy-momentum tensor of the minimally coupled Klein-Gordon Lagrangian,
/// using the stored `φ̇`.
pub fn kg_tensor(
    phi: &ComplexField,
    phi_dot: &ComplexField,
    v: &RealField,
    k: &PhysicalConstants,
    t: f64,
) -> Result<TensorComponents> {
    phi.check_grid(phi_dot)?;
    phi.check_grid(v)?;
    let dim = phi.grid().dim();
    let grads = gradients(phi);
    let kinetic = gradient_energy(phi);
    let (p, pd, vv) = (phi.values(), phi_dot.values(), v.values());
    let c2 = k.c * k.c;
    let mass_term = k.m * k.m * c2 / (k.hbar * k.hbar);
    let eff = |n: usize| mass_term - k.q * k.q * vv[n] * vv[n] / (k.hbar * k.hbar * c2);

    let t00 = RealField::from_parts(
        phi.grid().clone(),
        (0..p.len())
            .map(|n| -pd[n].norm_sqr() / c2 - kinetic.values()[n] - eff(n) * p[n].norm_sqr())
            .collect(),
    );
    let lagrangian = pointwise(phi, "klein-gordon lagrangian", |n| {
        let coupling = I * (k.q * vv[n] / (k.hbar * c2)) * (p[n].conj() * pd[n] - p[n] * pd[n].conj());
        coupling + (-pd[n].norm_sqr() / c2 + kinetic.values()[n] + eff(n) * p[n].norm_sqr())
    })?;
    let mut ti0 = Vec::with_capacity(dim);
    let mut t0i = Vec::with_capacity(dim);
    for g in &grads {
        let d = g.values();
        ti0.push(pointwise(phi, "T^i_0", |n| {
            (pd[n].conj() * d[n] + pd[n] * d[n].conj()) / k.c
        })?);
        t0i.push(pointwise(phi, "T^0_i", |n| {
            -(pd[n].conj() * d[n] + pd[n] * d[n].conj()) / k.c
                + I * (k.q * vv[n] / (k.hbar * k.c)) * (p[n].conj() * d[n] - p[n] * d[n].conj())
        })?);
    }
    let tij = spatial_block(phi, &grads, &lagrangian, 1.0)?;
    Ok(TensorComponents {
        theory: Theory::KleinGordon,
        t00,
        ti0,
        t0i,
        tij,
        lagrangian,
        t,
    })
}

/// General `∂L/∂V` for the Klein-Gordon Lagrangian:
/// `(iq/ħc²)(φ̄φ̇ - φφ̄̇) - 2(q²V/ħ²c²)φ̄φ`.
pub fn kg_charge_density(
    phi: &ComplexField,
    phi_dot: &ComplexField,
    v: &RealField,
    k: &PhysicalConstants,
) -> Result<RealField> {
    phi.check_grid(phi_dot)?;
    phi.check_grid(v)?;
    let (p, pd, vv) = (phi.values(), phi_dot.values(), v.values());
    let c2 = k.c * k.c;
    pointwise(phi, "charge density", |n| {
        I * (k.q / (k.hbar * c2)) * (p[n].conj() * pd[n] - p[n] * pd[n].conj())
            - 2.0 * k.q * k.q * vv[n] / (k.hbar * k.hbar * c2) * p[n].norm_sqr()
    })
}

/// Stationary-state charge density `(2q/ħ²c²)(E - qV)φ̄φ`.
pub fn kg_stationary_charge_density(
    phi: &ComplexField,
    energy: f64,
    v: &RealField,
    k: &PhysicalConstants,
) -> Result<RealField> {
    phi.zip_map(v, |p, vv| {
        2.0 * k.q / (k.hbar * k.hbar * k.c * k.c) * (energy - k.q * vv) * p.norm_sqr()
    })
}

/// Charge density (general form) and current `j = i(q/ħ)(φ∇φ̄ - φ̄∇φ)`.
pub fn kg_charge_and_current(
    phi: &ComplexField,
    phi_dot: &ComplexField,
    v: &RealField,
    k: &PhysicalConstants,
) -> Result<(RealField, Vec<RealField>)> {
    let rho = kg_charge_density(phi, phi_dot, v, k)?;
    let p = phi.values();
    let current = gradients(phi)
        .iter()
        .map(|g| {
            let d = g.values();
            pointwise(phi, "electric current", |n| {
                I * (k.q / k.hbar) * (p[n] * d[n].conj() - p[n].conj() * d[n])
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok((rho, current))
}

/// `∂L/∂V` and the potential derivatives at time `t`.
pub fn source_term(
    fields: FieldRef<'_>,
    potential: &PotentialSpec,
    k: &PhysicalConstants,
    t: f64,
) -> Result<SourceTerm> {
    let grid = match fields {
        FieldRef::Schrodinger { psi } => psi.grid().clone(),
        FieldRef::KleinGordon { phi, .. } => phi.grid().clone(),
    };
    let dl_dv = match fields {
        FieldRef::Schrodinger { psi } => prob_density(psi),
        FieldRef::KleinGordon { phi, phi_dot } => {
            let v = potential.sample(&grid, t);
            kg_charge_density(phi, phi_dot, &v, k)?
        }
    };
    Ok(SourceTerm {
        dl_dv,
        grad_v: potential.sample_grad(&grid, t),
        dv_dt: potential.sample_time_derivative(&grid, t),
        t,
    })
}

/// `Re ∫Ψ̄(ħ/i)∂ⱼΨ` per axis.
pub fn expectation_p(psi: &ComplexField, k: &PhysicalConstants) -> Result<Vec<f64>> {
    let scale = integrate(&psi.norm_sqr());
    gradients(psi)
        .iter()
        .map(|g| {
            let z = crate::fieldgrid::inner_product(psi, g)? * Complex64::new(0.0, -k.hbar);
            real_scalar(z, scale, "<p>")
        })
        .collect()
}

/// `∫Ψ̄(-ħ²/2m ∇² + V)Ψ`.
pub fn expectation_h(psi: &ComplexField, v: &RealField, k: &PhysicalConstants) -> Result<f64> {
    psi.check_grid(v)?;
    let lap = laplacian(psi);
    let kin = -k.hbar * k.hbar / (2.0 * k.m);
    let vals = (0..psi.values().len())
        .map(|n| lap.values()[n] * kin + psi.values()[n] * v.values()[n])
        .collect();
    let h_psi = ComplexField::from_parts(psi.grid().clone(), vals);
    let z = crate::fieldgrid::inner_product(psi, &h_psi)?;
    real_scalar(z, z.re.abs().max(integrate(&psi.norm_sqr())), "<H>")
}

/// `⟨-∇V⟩` per axis.
pub fn expectation_force(psi: &ComplexField, potential: &PotentialSpec, t: f64) -> Vec<f64> {
    let rho = prob_density(psi);
    potential
        .sample_grad(psi.grid(), t)
        .iter()
        .map(|g| -integrate(&rho.zip_map(g, |a, b| a * b).expect("same grid")))
        .collect()
}

/// `⟨∂V/∂t⟩`.
pub fn expectation_vdot(psi: &ComplexField, potential: &PotentialSpec, t: f64) -> f64 {
    let rho = prob_density(psi);
    let vt = potential.sample_time_derivative(psi.grid(), t);
    integrate(&rho.zip_map(&vt, |a, b| a * b).expect("same grid"))
}

fn require_2d(dim: usize, what: &str) -> Result<()> {
    if dim != 2 {
        return Err(Error::InvalidArgument(format!("{what} needs a 2D grid")));
    }
    Ok(())
}

/// `τ_z = x(-∂_yV) - y(-∂_xV)` weighted by `w`, about `origin`.
fn torque_density(
    weight: &RealField,
    potential: &PotentialSpec,
    t: f64,
    origin: [f64; 2],
) -> Result<RealField> {
    let grid = weight.grid();
    require_2d(grid.dim(), "torque")?;
    let vals = (0..grid.len())
        .map(|n| {
            let p = grid.point(n);
            let g = potential.grad(p, t);
            let (x, y) = (p[0] - origin[0], p[1] - origin[1]);
            weight.values()[n] * (x * -g[1] - y * -g[0])
        })
        .collect();
    Ok(RealField::from_parts(grid.clone(), vals))
}

/// `⟨τ_z⟩` about the coordinate origin.
pub fn expectation_torque(psi: &ComplexField, potential: &PotentialSpec, t: f64) -> Result<f64> {
    Ok(integrate(&torque_density(
        &prob_density(psi),
        potential,
        t,
        [0.0, 0.0],
    )?))
}

/// `∫ w (r × E)_z` for an arbitrary weight (charge density for KG).
pub fn weighted_torque(weight: &RealField, potential: &PotentialSpec, t: f64) -> Result<f64> {
    Ok(integrate(&torque_density(weight, potential, t, [0.0, 0.0])?))
}

/// `ℓ_z = (1/c)(x T⁰² - y T⁰¹)` about the coordinate origin.
pub fn angular_momentum_density(
    tensor: &TensorComponents,
    k: &PhysicalConstants,
) -> Result<RealField> {
    angular_momentum_density_about(tensor, k, [0.0, 0.0])
}

pub fn angular_momentum_density_about(
    tensor: &TensorComponents,
    k: &PhysicalConstants,
    origin: [f64; 2],
) -> Result<RealField> {
    require_2d(tensor.dim(), "angular momentum density")?;
    let grid = tensor.t00.grid();
    let vals = (0..grid.len())
        .map(|n| {
            let p = grid.point(n);
            let (x, y) = (p[0] - origin[0], p[1] - origin[1]);
            (x * tensor.t0i[1].values()[n] - y * tensor.t0i[0].values()[n]) / k.c
        })
        .collect();
    Ok(RealField::from_parts(grid.clone(), vals))
}

/// `H = ∫-T⁰₀`.
pub fn field_energy(tensor: &TensorComponents) -> f64 {
    -integrate(&tensor.t00)
}

/// `P_i = (1/c)∫T⁰ᵢ`.
pub fn field_momentum(tensor: &TensorComponents, k: &PhysicalConstants) -> Vec<f64> {
    tensor.t0i.iter().map(|f| integrate(f) / k.c).collect()
}

/// `L_z = ∫ℓ_z`.
pub fn field_angular_momentum(tensor: &TensorComponents, k: &PhysicalConstants) -> Result<f64> {
    Ok(integrate(&angular_momentum_density(tensor, k)?))
}

/// `⟨L̂_z⟩ = ∫Ψ̄(x p̂_y - y p̂_x)Ψ` computed without the tensor.
pub fn expectation_lz(psi: &ComplexField, k: &PhysicalConstants) -> Result<f64> {
    require_2d(psi.grid().dim(), "<L_z>")?;
    let g = gradients(psi);
    let grid = psi.grid();
    let vals: Vec<f64> = (0..grid.len())
        .map(|n| {
            let p = grid.point(n);
            let c = psi.values()[n].conj();
            k.hbar * (p[0] * (c * g[1].values()[n]).im - p[1] * (c * g[0].values()[n]).im)
        })
        .collect();
    Ok(integrate(&RealField::from_parts(grid.clone(), vals)))
}

/// Rotation currents in 2D: the independent density `M⁰¹²` and its
/// antisymmetric partner, plus the spatial fluxes `Mⁱ¹²`.
#[derive(Debug, Clone)]
pub struct RotationCurrent {
    pub m012: RealField,
    pub m021: RealField,
    pub flux: Vec<RealField>,
    pub origin: [f64; 2],
}

/// `M^{μνσ} = x^ν T^{μσ} - x^σ T^{μν}` for `ν,σ ∈ {1,2}`.
pub fn rotation_current(tensor: &TensorComponents, origin: [f64; 2]) -> Result<RotationCurrent> {
    require_2d(tensor.dim(), "rotation current")?;
    let grid = tensor.t00.grid().clone();
    let coords: Vec<(f64, f64)> = (0..grid.len())
        .map(|n| {
            let p = grid.point(n);
            (p[0] - origin[0], p[1] - origin[1])
        })
        .collect();
    let moment = |a: &RealField, b: &RealField, flip: bool| {
        let vals = coords
            .iter()
            .enumerate()
            .map(|(n, &(x, y))| {
                let (u, w) = (x * b.values()[n], y * a.values()[n]);
                if flip {
                    w - u
                } else {
                    u - w
                }
            })
            .collect();
        RealField::from_parts(grid.clone(), vals)
    };
    let m012 = moment(&tensor.t0i[0], &tensor.t0i[1], false);
    let m021 = moment(&tensor.t0i[0], &tensor.t0i[1], true);
    let flux = (0..2)
        .map(|i| moment(&tensor.tij[i][0], &tensor.tij[i][1], false))
        .collect();
    Ok(RotationCurrent {
        m012,
        m021,
        flux,
        origin,
    })
}
