//! Self-gravity of a homogeneous sphere: the centre-of-mass pair potential,
//! its quadratic limit, and the per-branch quadratic expansion that drives
//! the Gaussian evolution.

use crate::params::{omega_s, Branch, ConstantsSet, SphereParams, SpinWeights};
use thiserror::Error;

/// Width below which the nuclear granularity boosts the harmonic pulsation.
pub const NUCLEON_SCALE: f64 = 1e-12;
/// `(10⁻¹⁰ / 10⁻¹²)^{3/2}`: ratio of the lattice to nucleon volume, square-rooted.
pub const NUCLEAR_BOOST: f64 = 1000.0;

#[derive(Debug, Error, PartialEq)]
pub enum PotentialError {
    #[error("branch {branch:?}: Newton cross term requested at zero separation (nu = {nu})")]
    SingularNewton { branch: Branch, nu: f64 },
}

fn gm2(sphere: &SphereParams, constants: &ConstantsSet) -> f64 {
    constants.newton_g * sphere.mass * sphere.mass
}

/// Mutual gravitational energy of two copies of the sphere whose centres are
/// `d` apart.
pub fn v_eff(d: f64, sphere: &SphereParams, constants: &ConstantsSet) -> f64 {
    let r = sphere.radius;
    let scale = gm2(sphere, constants);
    if d <= 2.0 * r {
        let x = d / r;
        let x2 = x * x;
        scale / r * (-1.2 + 0.5 * x2 - 3.0 / 16.0 * x2 * x + x2 * x2 * x / 160.0)
    } else {
        -scale / d
    }
}

/// Derivative of [`v_eff`] with respect to `d`.
pub fn v_eff_slope(d: f64, sphere: &SphereParams, constants: &ConstantsSet) -> f64 {
    let r = sphere.radius;
    let scale = gm2(sphere, constants);
    if d <= 2.0 * r {
        let x = d / r;
        scale / (r * r) * (x - 9.0 / 16.0 * x * x + x.powi(4) / 32.0)
    } else {
        scale / (d * d)
    }
}

/// Two-term truncation `Gm²/R (−6/5 + ½ (d/R)²)`, valid for `d ≪ R`.
pub fn quadratic_v_eff(d: f64, sphere: &SphereParams, constants: &ConstantsSet) -> f64 {
    let x = d / sphere.radius;
    gm2(sphere, constants) / sphere.radius * (-1.2 + 0.5 * x * x)
}

/// Regime weight ν: one while the branches overlap (`d ≤ 2R`), `|β|` once
/// they have separated.
pub fn nu_branch(branch: Branch, d: f64, weights: &SpinWeights, sphere: &SphereParams) -> f64 {
    if d <= 2.0 * sphere.radius {
        1.0
    } else {
        weights.weight_sq(branch).sqrt()
    }
}

/// Pulsation of the harmonic self-potential for a packet of variance `q`,
/// including the optional nuclear-granularity boost below the nucleon scale.
pub fn effective_omega_s(
    q: f64,
    sphere: &SphereParams,
    constants: &ConstantsSet,
    nuclear_correction: bool,
) -> f64 {
    let w = omega_s(sphere, constants);
    if nuclear_correction && q.sqrt() < NUCLEON_SCALE {
        w * NUCLEAR_BOOST
    } else {
        w
    }
}

/// Quadratic expansion `V₀ + V₁ z + V₂ z²` of a branch potential.
#[derive(Clone, Copy, Debug, PartialEq, Default)]
pub struct TaylorCoeffs {
    pub v0: f64,
    pub v1: f64,
    pub v2: f64,
    pub expansion_point: f64,
}

impl TaylorCoeffs {
    pub fn eval(&self, z: f64) -> f64 {
        self.v0 + self.v1 * z + self.v2 * z * z
    }
}

impl std::ops::Add for TaylorCoeffs {
    type Output = TaylorCoeffs;
    fn add(self, rhs: TaylorCoeffs) -> TaylorCoeffs {
        TaylorCoeffs {
            v0: self.v0 + rhs.v0,
            v1: self.v1 + rhs.v1,
            v2: self.v2 + rhs.v2,
            expansion_point: self.expansion_point,
        }
    }
}

/// Instantaneous state of one branch as seen by the self-gravity potential.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct BranchContext {
    pub branch: Branch,
    pub nu: f64,
    pub mean_z: f64,
    /// Mean of the other branch; sets the separation `d`.
    pub other_mean_z: f64,
    /// Position variance of this branch.
    pub q: f64,
    /// Harmonic pulsation in force (possibly boosted).
    pub omega_s: f64,
}

impl BranchContext {
    pub fn distance(&self) -> f64 {
        (self.mean_z - self.other_mean_z).abs()
    }
}

/// Self-gravity potential of a branch expanded around its own mean:
/// `ν²[m ω²/2 (z−⟨z⟩)² + m ω²/2 Q − 6/5 Gm²/R] − (1−ν²) Gm²/d`.
pub fn branch_taylor(
    ctx: &BranchContext,
    sphere: &SphereParams,
    constants: &ConstantsSet,
) -> Result<TaylorCoeffs, PotentialError> {
    let m = sphere.mass;
    let nu2 = ctx.nu * ctx.nu;
    let k = m * ctx.omega_s * ctx.omega_s;
    let z = ctx.mean_z;
    let self_energy = 1.2 * gm2(sphere, constants) / sphere.radius;
    let mut v0 = nu2 * (0.5 * k * (z * z + ctx.q) - self_energy);
    if nu2 < 1.0 {
        let d = ctx.distance();
        if d <= 0.0 {
            return Err(PotentialError::SingularNewton {
                branch: ctx.branch,
                nu: ctx.nu,
            });
        }
        v0 -= (1.0 - nu2) * gm2(sphere, constants) / d;
    }
    let v2 = 0.5 * k * nu2;
    Ok(TaylorCoeffs {
        v0,
        v1: -2.0 * v2 * z,
        v2,
        expansion_point: z,
    })
}

/// Stern-Gerlach potential `±λ gμ_B/2 (B₀ − B₀′ z)` as Taylor coefficients.
pub fn magnetic_taylor(
    branch: Branch,
    lambda: i8,
    b0: f64,
    b0_grad: f64,
    constants: &ConstantsSet,
) -> TaylorCoeffs {
    let c = branch.sign() * lambda as f64 * constants.half_g_mu_b();
    TaylorCoeffs {
        v0: c * b0,
        v1: -c * b0_grad,
        v2: 0.0,
        expansion_point: 0.0,
    }
}
