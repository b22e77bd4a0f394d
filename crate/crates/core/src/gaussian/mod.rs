//! Gaussian packets `exp(−A z²/2 + B z + C)` for each branch: the
//! closed-form width evolution, spreads, and the `(A, B, C)` equations.

mod coupled;
mod flow;
mod history;

pub use coupled::{run_coupled, BranchFinal, CoupledOptions, CoupledRun, CoupledSample, Frame};
pub use flow::HarmonicFlow;
pub use history::{nu_regimes, BranchHistory, Epoch};

use crate::ode::{integrate, OdeError, OdeOptions};
use crate::params::{omega_s, Branch, ExperimentConfig};
use crate::potential::TaylorCoeffs;
use num_complex::Complex64;
use serde::Serialize;
use std::io::{self, Write};

/// Packet parameters at time `t`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct GaussianBranch {
    /// m⁻²
    pub a: Complex64,
    /// m⁻¹
    pub b: Complex64,
    pub c: Complex64,
    pub t: f64,
    pub branch: Branch,
}

impl GaussianBranch {
    /// Normalised minimum-uncertainty packet at rest at the origin.
    pub fn ground_state(branch: Branch, q0: f64) -> Self {
        let a = 0.5 / q0;
        GaussianBranch {
            a: Complex64::new(a, 0.0),
            b: Complex64::new(0.0, 0.0),
            c: Complex64::new(-0.25 * (std::f64::consts::PI / a).ln(), 0.0),
            t: 0.0,
            branch,
        }
    }

    pub fn q(&self) -> f64 {
        0.5 / self.a.re
    }

    pub fn p_var(&self, hbar: f64) -> f64 {
        0.5 * hbar * hbar * self.a.norm_sqr() / self.a.re
    }

    pub fn mean_z(&self) -> f64 {
        self.b.re / self.a.re
    }

    pub fn mean_p(&self, hbar: f64) -> f64 {
        hbar * (self.b.im - self.a.im * self.b.re / self.a.re)
    }

    /// `∫|ψ|² dz`.
    pub fn norm(&self) -> f64 {
        let ar = self.a.re;
        (std::f64::consts::PI / ar).sqrt() * (self.b.re * self.b.re / ar + 2.0 * self.c.re).exp()
    }

    fn pack(&self) -> [f64; 6] {
        [
            self.a.re, self.a.im, self.b.re, self.b.im, self.c.re, self.c.im,
        ]
    }

    fn unpack(&mut self, y: &[f64]) {
        self.a = Complex64::new(y[0], y[1]);
        self.b = Complex64::new(y[2], y[3]);
        self.c = Complex64::new(y[4], y[5]);
    }

    /// Absolute tolerances scaled to the current packet.
    pub fn tolerances(&self, rtol: f64) -> OdeOptions {
        let sa = self.a.norm();
        let sb = self.b.norm() + sa.sqrt();
        let sc = 1.0 + self.c.norm();
        OdeOptions {
            rtol,
            atol: vec![
                rtol * sa,
                rtol * sa,
                rtol * sb,
                rtol * sb,
                rtol * sc,
                rtol * sc,
            ],
            ..Default::default()
        }
    }
}

/// Right-hand side of the `(A, B, C)` system for potential `V₀ + V₁z + V₂z²`.
pub(crate) fn abc_rhs(y: &[f64], v: &TaylorCoeffs, hbar: f64, m: f64, out: &mut [f64]) {
    let a = Complex64::new(y[0], y[1]);
    let b = Complex64::new(y[2], y[3]);
    let minus_i = Complex64::new(0.0, -1.0);
    let k = hbar / m;
    let da = minus_i * (k * a * a - 2.0 * v.v2 / hbar);
    let db = minus_i * (k * a * b + v.v1 / hbar);
    let dc = minus_i * (0.5 * k * (a - b * b) + v.v0 / hbar);
    out[0] = da.re;
    out[1] = da.im;
    out[2] = db.re;
    out[3] = db.im;
    out[4] = dc.re;
    out[5] = dc.im;
}

/// Evolves a packet for `dt` under fixed quadratic potential coefficients.
pub fn evolve_abc(
    state: &GaussianBranch,
    coeffs: &TaylorCoeffs,
    dt: f64,
    hbar: f64,
    mass: f64,
    opts: &OdeOptions,
) -> Result<GaussianBranch, OdeError> {
    let mut y = state.pack();
    let t0 = state.t;
    integrate(
        |_, y, d| abc_rhs(y, coeffs, hbar, mass, d),
        t0,
        t0 + dt,
        &mut y,
        opts,
    )?;
    let mut out = *state;
    out.unpack(&y);
    out.t = t0 + dt;
    Ok(out)
}

/// `A(t)` for a ground-state packet under a constant weight `ν` from `t = 0`.
pub fn a_analytic(t: f64, nu: f64, config: &ExperimentConfig) -> Complex64 {
    let w = omega_s(&config.sphere, &config.constants);
    let a0 = Complex64::new(0.5 / config.initial.q0, 0.0);
    HarmonicFlow::new(a0, nu * w, config.constants.hbar / config.sphere.mass).a(t)
}

/// `Q(t) = Q₀ cos²(νω t) + ħ² sin²(νω t)/(4 m² ν²ω² Q₀)`.
pub fn spread_q(t: f64, nu: f64, config: &ExperimentConfig) -> f64 {
    let k = nu * omega_s(&config.sphere, &config.constants);
    let q0 = config.initial.q0;
    let m = config.sphere.mass;
    let hbar = config.constants.hbar;
    let x = k * t;
    let s = if x.abs() < 1e-8 { t } else { x.sin() / k };
    q0 * x.cos().powi(2) + hbar * hbar * s * s / (4.0 * m * m * q0)
}

/// Momentum variance `(ħ²/2)|A|²/Re A` along the same closed form.
pub fn spread_p(t: f64, nu: f64, config: &ExperimentConfig) -> f64 {
    let a = a_analytic(t, nu, config);
    let hbar = config.constants.hbar;
    0.5 * hbar * hbar * a.norm_sqr() / a.re
}

/// Free-particle spread `Q₀[1 + ħ²t²/(4m²Q₀²)]`.
pub fn q_free(t: f64, config: &ExperimentConfig) -> f64 {
    let q0 = config.initial.q0;
    let r = config.constants.hbar * t / (2.0 * config.sphere.mass * q0);
    q0 * (1.0 + r * r)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct WidthDifference {
    /// `(√Q₀/2)(1 − 2|β₋|²)(ω_s t)²`, m.
    pub quadratic: f64,
    /// `√Q₋ − √Q₊` from the closed-form spreads with `ν± = |β±|`, m.
    pub exact: f64,
}

/// Difference of the packet widths of the two branches after separation.
pub fn width_difference(t: f64, config: &ExperimentConfig) -> WidthDifference {
    let w = omega_s(&config.sphere, &config.constants);
    let beta_minus = config.weights.beta_minus_sq;
    let quadratic = 0.5 * config.initial.q0.sqrt() * (1.0 - 2.0 * beta_minus) * (w * t).powi(2);
    let nu_plus = config.weights.beta_plus_sq.sqrt();
    let nu_minus = beta_minus.sqrt();
    let exact = spread_q(t, nu_minus, config).sqrt() - spread_q(t, nu_plus, config).sqrt();
    WidthDifference { quadratic, exact }
}

/// Sampled spreads of both branches along the protocol.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SpreadCurve {
    pub t: Vec<f64>,
    pub q_plus: Vec<f64>,
    pub q_minus: Vec<f64>,
    pub q_free: Vec<f64>,
}

impl SpreadCurve {
    pub fn sample(config: &ExperimentConfig, samples: usize) -> Self {
        let plus = BranchHistory::new(Branch::Plus, config);
        let minus = BranchHistory::new(Branch::Minus, config);
        let t = uniform_grid(config.protocol.t5, samples);
        SpreadCurve {
            q_plus: t.iter().map(|&t| plus.q(t)).collect(),
            q_minus: t.iter().map(|&t| minus.q(t)).collect(),
            q_free: t.iter().map(|&t| q_free(t, config)).collect(),
            t,
        }
    }

    pub fn write_csv<W: Write>(&self, mut w: W) -> io::Result<()> {
        writeln!(w, "t_s,Q_plus_m2,Q_minus_m2,Q_free_m2")?;
        for i in 0..self.t.len() {
            writeln!(
                w,
                "{},{},{},{}",
                sci(self.t[i]),
                sci(self.q_plus[i]),
                sci(self.q_minus[i]),
                sci(self.q_free[i])
            )?;
        }
        Ok(())
    }
}

/// `samples` equally spaced times from 0 to `end` inclusive.
pub fn uniform_grid(end: f64, samples: usize) -> Vec<f64> {
    let n = samples.max(2);
    (0..n)
        .map(|i| {
            if i == n - 1 {
                end
            } else {
                end * i as f64 / (n - 1) as f64
            }
        })
        .collect()
}

/// Scientific notation with 17 significant digits.
pub fn sci(x: f64) -> String {
    format!("{x:.16e}")
}
