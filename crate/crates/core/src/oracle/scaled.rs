//! Reduced-mass configuration in which the grid solver is affordable while
//! every term of the phase stays visible.

use super::GridSpec;
use crate::params::{
    ConstantsSet, ExperimentConfig, InitialState, Protocol, SphereParams, SpinWeights,
};

/// Dimensionless description of a scaled interferometer.
///
/// Lengths are in units of `s₀ = √Q₀`. Newton's constant is chosen so that
/// `ω_s T₅` equals `omega_t5`; the constants are otherwise the rounded set.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ScaledDesign {
    pub mass: f64,
    /// `ħT₅/(2mQ₀)`; free spreading multiplies the variance by `1 + r²`.
    pub spread_ratio: f64,
    /// Half the peak separation over `s₀`.
    pub separation: f64,
    /// Radius over `s₀`.
    pub radius_ratio: f64,
    /// Self-gravity pulsation times the run length.
    pub omega_t5: f64,
    pub t1: f64,
    pub plateau: f64,
    pub beta_plus_sq: f64,
}

impl Default for ScaledDesign {
    fn default() -> Self {
        ScaledDesign {
            mass: 5.5e-15,
            spread_ratio: 8.0,
            separation: 15.5,
            radius_ratio: 5.2,
            omega_t5: 0.3,
            t1: 0.25,
            plateau: 1.0,
            beta_plus_sq: 1.0 / 3.0,
        }
    }
}

impl ScaledDesign {
    pub fn t5(&self) -> f64 {
        4.0 * self.t1 + self.plateau
    }

    pub fn sqrt_q0(&self, constants: &ConstantsSet) -> f64 {
        (constants.hbar * self.t5() / (2.0 * self.mass * self.spread_ratio)).sqrt()
    }

    pub fn config(&self) -> ExperimentConfig {
        let base = ConstantsSet::paper();
        let s0 = self.sqrt_q0(&base);
        let accel = self.separation * s0 / (self.t1 * self.t1);
        let grad = accel * self.mass / base.half_g_mu_b();
        let radius = self.radius_ratio * s0;
        let g = (self.omega_t5 / self.t5()).powi(2) * radius.powi(3) / self.mass;
        ExperimentConfig {
            constants: base.with_newton_g(g),
            sphere: SphereParams {
                mass: self.mass,
                radius,
            },
            weights: SpinWeights::from_plus(self.beta_plus_sq),
            protocol: Protocol::symmetric(self.t1, self.plateau, 0.0, grad),
            initial: InitialState::from_sqrt(s0),
            nuclear_correction: false,
        }
        .checked_allowing_pure_spin()
        .expect("scaled design is valid")
    }

    /// Grid that resolves the initial packet and the peak momentum, sized
    /// to hold both branches plus eight final widths.
    pub fn grid(&self, cells_per_sigma: f64, steps_per_t1: usize) -> GridSpec {
        let cfg = self.config();
        let s0 = cfg.initial.q0.sqrt();
        let hbar = cfg.constants.hbar;
        let m = self.mass;
        let t5 = self.t5();
        let accel = self.separation * s0 / (self.t1 * self.t1);
        let z_peak = accel * self.t1 * self.t1;
        let sigma_max = s0 * (1.0 + (hbar * t5 / (2.0 * m * cfg.initial.q0)).powi(2)).sqrt();
        let k_peak = m * accel * self.t1 / hbar;
        let dz_res = s0 / cells_per_sigma;
        let dz_band = std::f64::consts::PI / (8.0 * k_peak) * 0.999;
        let dz = dz_res.min(dz_band);
        let half_width = z_peak + 8.0 * sigma_max;
        let n = (2.0 * half_width / dz).ceil() as usize;
        let n = n.next_power_of_two();
        GridSpec {
            n,
            half_width: 0.5 * n as f64 * dz,
            dt: self.t1 / steps_per_t1 as f64,
        }
    }
}
