//! Piecewise closed-form evolution of one branch over the whole protocol.
//! The pulsation changes when the branches separate or rejoin (ν switch)
//! and, with the nuclear correction, when the width crosses the nucleon
//! scale; `A` is continuous across every switch.

use super::flow::HarmonicFlow;
use crate::params::{omega_s, Branch, ExperimentConfig};
use crate::potential::{NUCLEAR_BOOST, NUCLEON_SCALE};
use crate::trajectories::separation_window;
use num_complex::Complex64;

/// Interval of constant pulsation.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Epoch {
    pub start: f64,
    pub end: f64,
    pub nu: f64,
    /// Pulsation of the self-potential before the ν factor (boost included).
    pub omega: f64,
    pub flow: HarmonicFlow,
    pub q_start: f64,
    /// Cumulative values of the integrals at `start`.
    pub i1_start: f64,
    pub i2_start: f64,
    pub nu_sq_start: f64,
}

impl Epoch {
    fn kappa(&self) -> f64 {
        self.nu * self.omega
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct BranchHistory {
    pub branch: Branch,
    pub epochs: Vec<Epoch>,
    mass: f64,
    hbar: f64,
}

/// Boundaries of the ν regimes as `(start, end, ν)`.
pub fn nu_regimes(branch: Branch, config: &ExperimentConfig) -> Vec<(f64, f64, f64)> {
    let t5 = config.protocol.t5;
    match separation_window(config) {
        None => vec![(0.0, t5, 1.0)],
        Some((ta, tb)) => {
            let nu = config.weights.weight_sq(branch).sqrt();
            vec![(0.0, ta, 1.0), (ta, tb, nu), (tb, t5, 1.0)]
        }
    }
}

impl BranchHistory {
    pub fn new(branch: Branch, config: &ExperimentConfig) -> Self {
        let m = config.sphere.mass;
        let hbar = config.constants.hbar;
        let base_omega = omega_s(&config.sphere, &config.constants);
        let q_nucleon = NUCLEON_SCALE * NUCLEON_SCALE;
        let boosted = |q: f64| config.nuclear_correction && q < q_nucleon;
        let omega_for = |q: f64| {
            if boosted(q) {
                base_omega * NUCLEAR_BOOST
            } else {
                base_omega
            }
        };

        let mut epochs: Vec<Epoch> = Vec::new();
        let mut a = Complex64::new(0.5 / config.initial.q0, 0.0);
        let (mut i1, mut i2, mut nu_sq) = (0.0, 0.0, 0.0);
        for (start, end, nu) in nu_regimes(branch, config) {
            let mut t = start;
            while t < end {
                let q = 0.5 / a.re;
                let omega = omega_for(q);
                let flow = HarmonicFlow::new(a, nu * omega, hbar / m);
                let mut stop = end;
                if config.nuclear_correction {
                    if let Some(tc) = first_flip(&flow, q, end - t, q_nucleon, boosted(q)) {
                        stop = t + tc;
                    }
                }
                let ep = Epoch {
                    start: t,
                    end: stop,
                    nu,
                    omega,
                    flow,
                    q_start: q,
                    i1_start: i1,
                    i2_start: i2,
                    nu_sq_start: nu_sq,
                };
                let tau = stop - t;
                i1 += 0.5 * flow.phase_advance(tau);
                i2 += i2_increment(&ep, tau, m, hbar);
                nu_sq += nu * nu * tau;
                a = flow.a(tau);
                epochs.push(ep);
                t = stop;
            }
        }
        BranchHistory {
            branch,
            epochs,
            mass: m,
            hbar,
        }
    }

    fn epoch_at(&self, t: f64) -> &Epoch {
        let i = self.epochs.partition_point(|e| e.end < t);
        &self.epochs[i.min(self.epochs.len() - 1)]
    }

    pub fn a(&self, t: f64) -> Complex64 {
        let e = self.epoch_at(t);
        e.flow.a(t - e.start)
    }

    /// Position variance, m².
    pub fn q(&self, t: f64) -> f64 {
        let e = self.epoch_at(t);
        e.q_start * e.flow.width_factor(t - e.start)
    }

    /// Momentum variance `(ħ²/2)|A|²/Re A`, (kg·m/s)².
    pub fn p_var(&self, t: f64) -> f64 {
        let a = self.a(t);
        0.5 * self.hbar * self.hbar * a.norm_sqr() / a.re
    }

    pub fn nu(&self, t: f64) -> f64 {
        self.epoch_at(t).nu
    }

    /// `∫₀ᵗ ħ/(4mQ) dt`, rad.
    pub fn i1(&self, t: f64) -> f64 {
        let e = self.epoch_at(t);
        e.i1_start + 0.5 * e.flow.phase_advance(t - e.start)
    }

    /// `∫₀ᵗ (m ω²/2ħ) ν² Q dt`, rad.
    pub fn i2(&self, t: f64) -> f64 {
        let e = self.epoch_at(t);
        e.i2_start + i2_increment(e, t - e.start, self.mass, self.hbar)
    }

    /// `∫₀ᵗ ν² dt`, s.
    pub fn nu_sq_integral(&self, t: f64) -> f64 {
        let e = self.epoch_at(t);
        e.nu_sq_start + e.nu * e.nu * (t - e.start)
    }
}

fn i2_increment(e: &Epoch, tau: f64, m: f64, hbar: f64) -> f64 {
    let k = e.kappa();
    m * k * k / (2.0 * hbar) * e.q_start * e.flow.width_factor_integral(tau)
}

/// First time in `(0, span]` at which the boost status of the flow
/// changes, bracketed by sampling and refined by bisection. The returned
/// time lies just on the far side of the crossing.
fn first_flip(
    flow: &HarmonicFlow,
    q_start: f64,
    span: f64,
    q_cross: f64,
    below: bool,
) -> Option<f64> {
    let is_below = |tau: f64| q_start * flow.width_factor(tau) < q_cross;
    let periods = flow.kappa * span / std::f64::consts::PI;
    let n = (16.0 * periods).ceil().clamp(256.0, 1e6) as usize;
    let mut lo = 0.0;
    for i in 1..=n {
        let hi = span * i as f64 / n as f64;
        if is_below(hi) != below {
            let (mut a, mut b) = (lo, hi);
            while b - a > 4.0 * f64::EPSILON * b {
                let mid = 0.5 * (a + b);
                if is_below(mid) != below {
                    b = mid;
                } else {
                    a = mid;
                }
            }
            return Some(b);
        }
        lo = hi;
    }
    None
}
