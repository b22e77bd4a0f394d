//! Closed-form evolution of the width parameter `A` under a constant
//! harmonic potential, written through the linear solution
//! `u(τ) = cos κτ + i (ħ/m) A₀ sin κτ / κ` so that it stays finite for any
//! `κτ` and reduces to free spreading at `κ = 0`.

use num_complex::Complex64;
use std::f64::consts::PI;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct HarmonicFlow {
    /// `A` at the start of the flow, m⁻².
    pub a_start: Complex64,
    /// Pulsation `ν ω`, rad/s.
    pub kappa: f64,
    /// `ħ/m`, m²/s.
    pub hbar_over_m: f64,
}

/// `sin(κτ)/κ`, equal to `τ` at `κ = 0`.
fn sinc_time(kappa: f64, tau: f64) -> f64 {
    let x = kappa * tau;
    if x.abs() < 1e-8 {
        tau * (1.0 - x * x / 6.0)
    } else {
        x.sin() / kappa
    }
}

/// `(y − sin y)/y³`, with its series near zero.
fn h(y: f64) -> f64 {
    if y.abs() < 0.1 {
        let y2 = y * y;
        1.0 / 6.0 - y2 / 120.0 + y2 * y2 / 5040.0 - y2 * y2 * y2 / 362880.0
    } else {
        (y - y.sin()) / (y * y * y)
    }
}

impl HarmonicFlow {
    pub fn new(a_start: Complex64, kappa: f64, hbar_over_m: f64) -> Self {
        HarmonicFlow {
            a_start,
            kappa,
            hbar_over_m,
        }
    }

    fn u(&self, tau: f64) -> Complex64 {
        let c = (self.kappa * tau).cos();
        let s = sinc_time(self.kappa, tau);
        Complex64::new(c, 0.0) + Complex64::i() * self.hbar_over_m * self.a_start * s
    }

    /// `A(τ)`.
    pub fn a(&self, tau: f64) -> Complex64 {
        let k = self.kappa;
        let c = (k * tau).cos();
        let s = sinc_time(k, tau);
        let num = self.a_start * c + Complex64::i() * (k * k * s / self.hbar_over_m);
        num / self.u(tau)
    }

    /// `Q(τ)/Q(0) = |u|²`.
    pub fn width_factor(&self, tau: f64) -> f64 {
        self.u(tau).norm_sqr()
    }

    /// Unwrapped `arg u(τ)`, equal to `(2/ħ)·∫ ħ² Re A/(2m)`; grows by `π`
    /// every half period.
    pub fn phase_advance(&self, tau: f64) -> f64 {
        if self.kappa == 0.0 {
            return self.u(tau).arg();
        }
        let half_period = PI / self.kappa;
        let k = (tau / half_period).floor();
        let reduced = tau - k * half_period;
        let mut arg = self.u(reduced).arg();
        // Im u ≥ 0 on the reduced interval
        if arg < 0.0 {
            arg += 2.0 * PI;
        }
        k * PI + arg
    }

    /// `∫₀^τ |u|² dτ'`.
    pub fn width_factor_integral(&self, tau: f64) -> f64 {
        let k = self.kappa;
        let a = self.hbar_over_m * self.a_start.im;
        let b = self.hbar_over_m * self.a_start.re;
        let y = 2.0 * k * tau;
        let sin_part = 2.0 * tau.powi(3) * h(y);
        let s = sinc_time(k, tau);
        tau - k * k * sin_part - a * s * s + (a * a + b * b) * sin_part
    }
}
