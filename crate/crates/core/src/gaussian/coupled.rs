//! Direct numerical integration of both branches together, used to check
//! the closed forms. Branch potentials are rebuilt at every stage from the
//! integrated state, and regime changes (separation, nuclear boost) are
//! located as events of the integration rather than taken from the closed
//! forms.

use super::abc_rhs;
use crate::ode::{integrate_until, OdeError, OdeOptions, OdeStats};
use crate::params::{omega_s, Branch, ExperimentConfig};
use crate::potential::{
    branch_taylor, magnetic_taylor, BranchContext, TaylorCoeffs, NUCLEAR_BOOST, NUCLEON_SCALE,
};
use crate::trajectories::{acceleration, lambda_of_t};
use num_complex::Complex64;

/// State representation for the coupled integration.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Frame {
    /// Width `A`, means, classical action and the residual quantum phase
    /// per branch. Keeps the phase of order tens of radians, so it is usable
    /// at physical parameters.
    Comoving,
    /// The raw `(A, B, C)` coefficients. `Im C` carries the full action, so
    /// only scaled parameters keep it within double precision.
    Lab,
}

#[derive(Clone, Debug, PartialEq)]
pub struct CoupledOptions {
    pub frame: Frame,
    pub rtol: f64,
    /// Times at which `A` and the means are recorded.
    pub samples: Vec<f64>,
}

impl Default for CoupledOptions {
    fn default() -> Self {
        CoupledOptions {
            frame: Frame::Comoving,
            rtol: 1e-10,
            samples: Vec::new(),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CoupledSample {
    pub t: f64,
    /// Indexed by `[Plus, Minus]`.
    pub a: [Complex64; 2],
    pub mean_z: [f64; 2],
    pub mean_p: [f64; 2],
}

/// Branch phase at the end of the run, split like the closed-form
/// decomposition where the frame allows it.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct BranchFinal {
    pub branch: Branch,
    pub a: Complex64,
    pub mean_z: f64,
    pub mean_p: f64,
    pub boundary_zp: f64,
    pub boundary_width: f64,
    /// `S_Cl/ħ` (comoving frame only).
    pub classical: Option<f64>,
    /// Phase from the self-gravity and spreading terms (comoving frame only).
    pub quantum: Option<f64>,
    /// `Im C`.
    pub imc: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct CoupledRun {
    pub frame: Frame,
    pub samples: Vec<CoupledSample>,
    pub finals: [BranchFinal; 2],
    /// Times at which the regime changed.
    pub switches: Vec<f64>,
    pub stats: OdeStats,
}

impl CoupledRun {
    /// `Im C₊ − Im C₋`, differenced term by term where available.
    pub fn delta_phi(&self) -> f64 {
        let [p, m] = &self.finals;
        match (p.classical, m.classical, p.quantum, m.quantum) {
            (Some(cp), Some(cm), Some(qp), Some(qm)) => {
                (p.boundary_zp - m.boundary_zp)
                    + (p.boundary_width - m.boundary_width)
                    + (cp - cm)
                    + (qp - qm)
            }
            _ => p.imc - m.imc,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
struct Regime {
    overlap: bool,
    boost: [bool; 2],
}

struct Setup<'a> {
    config: &'a ExperimentConfig,
    frame: Frame,
    hbar: f64,
    mass: f64,
    omega: f64,
}

const BRANCHES: [Branch; 2] = [Branch::Plus, Branch::Minus];

impl Setup<'_> {
    fn a(&self, y: &[f64], i: usize) -> Complex64 {
        Complex64::new(y[6 * i], y[6 * i + 1])
    }

    fn mean_z(&self, y: &[f64], i: usize) -> f64 {
        match self.frame {
            Frame::Comoving => y[6 * i + 2],
            Frame::Lab => y[6 * i + 2] / y[6 * i],
        }
    }

    fn mean_p(&self, y: &[f64], i: usize) -> f64 {
        let o = 6 * i;
        match self.frame {
            Frame::Comoving => y[o + 3],
            Frame::Lab => self.hbar * (y[o + 3] - y[o + 1] * y[o + 2] / y[o]),
        }
    }

    fn regime(&self, y: &[f64]) -> Regime {
        let d = (self.mean_z(y, 0) - self.mean_z(y, 1)).abs();
        let q_nucleon = NUCLEON_SCALE * NUCLEON_SCALE;
        let boost = |i: usize| self.config.nuclear_correction && 0.5 / y[6 * i] < q_nucleon;
        Regime {
            overlap: d <= 2.0 * self.config.sphere.radius,
            boost: [boost(0), boost(1)],
        }
    }

    fn gravity(&self, y: &[f64], i: usize, regime: Regime) -> Option<TaylorCoeffs> {
        let cfg = self.config;
        let branch = BRANCHES[i];
        let nu = if regime.overlap {
            1.0
        } else {
            cfg.weights.weight_sq(branch).sqrt()
        };
        let omega = if regime.boost[i] {
            self.omega * NUCLEAR_BOOST
        } else {
            self.omega
        };
        let ctx = BranchContext {
            branch,
            nu,
            mean_z: self.mean_z(y, i),
            other_mean_z: self.mean_z(y, 1 - i),
            q: 0.5 / y[6 * i],
            omega_s: omega,
        };
        branch_taylor(&ctx, &cfg.sphere, &cfg.constants).ok()
    }

    fn rhs(&self, y: &[f64], out: &mut [f64], regime: Regime, lambda: i8) {
        let cfg = self.config;
        for i in 0..2 {
            let o = 6 * i;
            let Some(grav) = self.gravity(y, i, regime) else {
                out[o..o + 6].fill(f64::NAN);
                continue;
            };
            let mag = magnetic_taylor(
                BRANCHES[i],
                lambda,
                cfg.protocol.b0,
                cfg.protocol.b0_grad,
                &cfg.constants,
            );
            match self.frame {
                Frame::Lab => abc_rhs(
                    &y[o..o + 6],
                    &(grav + mag),
                    self.hbar,
                    self.mass,
                    &mut out[o..o + 6],
                ),
                Frame::Comoving => {
                    let a = self.a(y, i);
                    let (z, p) = (y[o + 2], y[o + 3]);
                    let k = self.hbar / self.mass;
                    let da = Complex64::new(0.0, -1.0) * (k * a * a - 2.0 * grav.v2 / self.hbar);
                    out[o] = da.re;
                    out[o + 1] = da.im;
                    out[o + 2] = p / self.mass;
                    let self_force = grav.v1 + 2.0 * grav.v2 * z;
                    out[o + 3] = -(mag.v1 + 2.0 * mag.v2 * z) - self_force;
                    out[o + 4] = p * p / (2.0 * self.mass) - mag.eval(z);
                    out[o + 5] = -0.5 * k * a.re - grav.eval(z) / self.hbar;
                }
            }
        }
    }

    fn initial_state(&self) -> Vec<f64> {
        let a0 = 0.5 / self.config.initial.q0;
        let c0 = -0.25 * (std::f64::consts::PI / a0).ln();
        let branch = match self.frame {
            // [ReA, ImA, ⟨z⟩, ⟨p⟩, S, φ]
            Frame::Comoving => [a0, 0.0, 0.0, 0.0, 0.0, 0.0],
            // [ReA, ImA, ReB, ImB, ReC, ImC]
            Frame::Lab => [a0, 0.0, 0.0, 0.0, c0, 0.0],
        };
        [branch, branch].concat()
    }

    fn tolerances(&self, rtol: f64) -> OdeOptions {
        let cfg = self.config;
        let a_scale = 0.5 / cfg.initial.q0;
        let acc = acceleration(cfg);
        let z_scale = (acc * cfg.protocol.t1 * cfg.protocol.t1).max(cfg.sphere.radius);
        let p_scale = (self.mass * acc * cfg.protocol.t1).max(self.hbar / z_scale);
        let scales = match self.frame {
            Frame::Comoving => {
                let s = p_scale * p_scale / self.mass * cfg.protocol.t5;
                [a_scale, a_scale, z_scale, p_scale, s, 1.0]
            }
            Frame::Lab => {
                let b = a_scale * z_scale + p_scale / self.hbar;
                let c = a_scale * z_scale * z_scale + p_scale * z_scale / self.hbar + 1.0;
                [a_scale, a_scale, b, b, c, c]
            }
        };
        OdeOptions {
            rtol,
            atol: [scales, scales].concat().iter().map(|s| s * rtol).collect(),
            ..Default::default()
        }
    }

    fn sample(&self, t: f64, y: &[f64]) -> CoupledSample {
        CoupledSample {
            t,
            a: [self.a(y, 0), self.a(y, 1)],
            mean_z: [self.mean_z(y, 0), self.mean_z(y, 1)],
            mean_p: [self.mean_p(y, 0), self.mean_p(y, 1)],
        }
    }

    fn final_of(&self, y: &[f64], i: usize) -> BranchFinal {
        let a = self.a(y, i);
        let z = self.mean_z(y, i);
        let p = self.mean_p(y, i);
        let boundary_zp = -z * p / self.hbar;
        let boundary_width = -0.5 * a.im * z * z;
        let o = 6 * i;
        let (classical, quantum, imc) = match self.frame {
            Frame::Comoving => {
                let cl = y[o + 4] / self.hbar;
                let q = y[o + 5];
                (Some(cl), Some(q), boundary_zp + boundary_width + cl + q)
            }
            Frame::Lab => (None, None, y[o + 5]),
        };
        BranchFinal {
            branch: BRANCHES[i],
            a,
            mean_z: z,
            mean_p: p,
            boundary_zp,
            boundary_width,
            classical,
            quantum,
            imc,
        }
    }
}

/// Integrates both branches from the ground state to `T₅`.
pub fn run_coupled(
    config: &ExperimentConfig,
    opts: &CoupledOptions,
) -> Result<CoupledRun, OdeError> {
    let setup = Setup {
        config,
        frame: opts.frame,
        hbar: config.constants.hbar,
        mass: config.sphere.mass,
        omega: omega_s(&config.sphere, &config.constants),
    };
    let t5 = config.protocol.t5;
    let breaks = config.protocol.breakpoints();
    let mut samples: Vec<f64> = opts
        .samples
        .iter()
        .copied()
        .filter(|t| (0.0..=t5).contains(t))
        .collect();
    samples.sort_by(f64::total_cmp);
    samples.dedup();
    let mut stops: Vec<f64> = breaks[1..]
        .iter()
        .copied()
        .chain(samples.iter().copied())
        .filter(|&t| t > 0.0)
        .collect();
    stops.sort_by(f64::total_cmp);
    stops.dedup();

    let ode = setup.tolerances(opts.rtol);
    let mut y = setup.initial_state();
    let mut t = 0.0;
    let mut recorded = Vec::with_capacity(samples.len());
    let mut switches = Vec::new();
    let mut stats = OdeStats::default();
    let mut next_sample = 0;
    if samples.first() == Some(&0.0) {
        recorded.push(setup.sample(0.0, &y));
        next_sample = 1;
    }
    for stop in stops {
        let lambda = lambda_of_t(0.5 * (t + stop), &config.protocol).expect("inside protocol");
        while t < stop {
            let regime = setup.regime(&y);
            let out = integrate_until(
                |_, y, d| setup.rhs(y, d, regime, lambda),
                t,
                stop,
                &mut y,
                &ode,
                Some(|_: f64, y: &[f64]| if setup.regime(y) == regime { -1.0 } else { 1.0 }),
            )?;
            stats += out.stats;
            if out.event {
                switches.push(out.t);
            }
            t = out.t;
        }
        if next_sample < samples.len() && samples[next_sample] == stop {
            recorded.push(setup.sample(stop, &y));
            next_sample += 1;
        }
    }
    Ok(CoupledRun {
        frame: opts.frame,
        samples: recorded,
        finals: [setup.final_of(&y, 0), setup.final_of(&y, 1)],
        switches,
        stats,
    })
}
