//! Branch phases `Im C±(t)` assembled from closed forms, their difference
//! `Δφ(t)`, and the back-of-envelope estimates.
//!
//! The phase of a branch is
//! `−⟨z⟩⟨p⟩/ħ − Im A ⟨z⟩²/2 + S_Cl/ħ − (i1 + i2 + const_self + newton_cross)`,
//! the last four being the time integrals of the four parts of the quantum
//! energy `ħ²/4mQ + mω²ν²Q/2 − (6/5)Gm²ν²/R − (1−ν²)Gm²/d`, divided by ħ.
//! Branch phases are of order 10¹³ rad because of the classical action, so
//! `Δφ` is always formed term by term.

use crate::exec::Execution;
use crate::gaussian::{sci, uniform_grid, BranchHistory};
use crate::params::{omega_s, separation_time, Branch, ExperimentConfig, ValidationReport};
use crate::trajectories::{
    classical_action_until, inverse_distance_integral, mean_state, separation_window,
    TimeOutOfRange,
};
use serde::Serialize;
use std::io::{self, Write};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum PhaseError {
    #[error("invalid configuration: {0}")]
    Invalid(#[from] ValidationReport),
    #[error(transparent)]
    Time(#[from] TimeOutOfRange),
}

/// Phase of one branch at one time, rad.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize)]
pub struct BranchPhase {
    pub boundary_zp: f64,
    pub boundary_width: f64,
    pub classical: f64,
    pub i1: f64,
    pub i2: f64,
    pub const_self: f64,
    pub newton_cross: f64,
    pub total: f64,
}

/// Per-term differences `(+) − (−)`, rad.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize)]
pub struct TermDiffs {
    pub boundary_zp: f64,
    pub boundary_width: f64,
    pub classical: f64,
    pub i1: f64,
    pub i2: f64,
    pub const_self: f64,
    pub newton_cross: f64,
}

impl TermDiffs {
    /// Contribution of the terms to `Δφ`.
    pub fn delta_phi(&self) -> f64 {
        self.boundary_zp + self.boundary_width + self.classical
            - (self.i1 + self.i2 + self.const_self + self.newton_cross)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct PhaseBreakdown {
    pub t: f64,
    pub plus: BranchPhase,
    pub minus: BranchPhase,
    pub diff: TermDiffs,
    pub delta_phi: f64,
}

/// Closed-form phase model of one configuration.
#[derive(Clone, Debug)]
pub struct PhaseModel {
    config: ExperimentConfig,
    histories: [BranchHistory; 2],
    window: Option<(f64, f64)>,
}

fn index(branch: Branch) -> usize {
    match branch {
        Branch::Plus => 0,
        Branch::Minus => 1,
    }
}

/// Per-branch integrals together with the raw classical parts needed to
/// difference them without cancellation.
struct Parts {
    phase: BranchPhase,
    gradient: f64,
    uniform: f64,
}

impl PhaseModel {
    /// Validates (and snaps) the configuration and builds both histories.
    pub fn new(config: &ExperimentConfig) -> Result<Self, PhaseError> {
        let config = config.clone().checked_allowing_pure_spin()?;
        let histories = [
            BranchHistory::new(Branch::Plus, &config),
            BranchHistory::new(Branch::Minus, &config),
        ];
        let window = separation_window(&config);
        Ok(PhaseModel {
            config,
            histories,
            window,
        })
    }

    pub fn config(&self) -> &ExperimentConfig {
        &self.config
    }

    pub fn history(&self, branch: Branch) -> &BranchHistory {
        &self.histories[index(branch)]
    }

    /// Times between which the packets are separated.
    pub fn separation_window(&self) -> Option<(f64, f64)> {
        self.window
    }

    fn gm2(&self) -> f64 {
        let c = &self.config;
        c.constants.newton_g * c.sphere.mass * c.sphere.mass
    }

    /// `∫₀ᵗ dt/d` over the separated part of `[0, t]`.
    fn inverse_distance_until(&self, t: f64) -> f64 {
        match self.window {
            Some((ta, tb)) if t > ta => inverse_distance_integral(ta, t.min(tb), &self.config),
            _ => 0.0,
        }
    }

    fn parts(&self, branch: Branch, t: f64) -> Result<Parts, TimeOutOfRange> {
        let cfg = &self.config;
        let hbar = cfg.constants.hbar;
        let h = self.history(branch);
        let ms = mean_state(branch, t, cfg)?;
        let cl = classical_action_until(branch, t, cfg)?;
        let a = h.a(t);
        let nu2_sep = cfg.weights.weight_sq(branch);
        let mut p = BranchPhase {
            boundary_zp: -ms.mean_z * ms.mean_p / hbar,
            boundary_width: -0.5 * a.im * ms.mean_z * ms.mean_z,
            classical: cl.phase,
            i1: h.i1(t),
            i2: h.i2(t),
            const_self: -1.2 * self.gm2() / (hbar * cfg.sphere.radius) * h.nu_sq_integral(t),
            newton_cross: -(1.0 - nu2_sep) * self.gm2() / hbar * self.inverse_distance_until(t),
            total: 0.0,
        };
        p.total = p.boundary_zp + p.boundary_width + p.classical
            - (p.i1 + p.i2 + p.const_self + p.newton_cross);
        Ok(Parts {
            phase: p,
            gradient: cl.gradient_part,
            uniform: cl.uniform_part,
        })
    }

    /// Phase of one branch at `t`.
    pub fn branch_phase(&self, branch: Branch, t: f64) -> Result<BranchPhase, TimeOutOfRange> {
        Ok(self.parts(branch, t)?.phase)
    }

    pub fn breakdown(&self, t: f64) -> Result<PhaseBreakdown, TimeOutOfRange> {
        let p = self.parts(Branch::Plus, t)?;
        let m = self.parts(Branch::Minus, t)?;
        let hbar = self.config.constants.hbar;
        let (a, b) = (&p.phase, &m.phase);
        let diff = TermDiffs {
            boundary_zp: a.boundary_zp - b.boundary_zp,
            boundary_width: a.boundary_width - b.boundary_width,
            classical: ((p.gradient - m.gradient) + (p.uniform - m.uniform)) / hbar,
            i1: a.i1 - b.i1,
            i2: a.i2 - b.i2,
            const_self: a.const_self - b.const_self,
            newton_cross: a.newton_cross - b.newton_cross,
        };
        Ok(PhaseBreakdown {
            t,
            plus: p.phase,
            minus: m.phase,
            delta_phi: diff.delta_phi(),
            diff,
        })
    }

    pub fn delta_phi(&self, t: f64) -> Result<f64, TimeOutOfRange> {
        Ok(self.breakdown(t)?.delta_phi)
    }

    /// `Δφ(T₅)`.
    pub fn final_delta_phi(&self) -> f64 {
        self.delta_phi(self.config.protocol.t5)
            .expect("T5 lies inside the protocol window")
    }

    /// Instantaneous quantum energy of a branch, J.
    pub fn f_quantum(&self, branch: Branch, t: f64) -> Result<f64, TimeOutOfRange> {
        let cfg = &self.config;
        let d = crate::trajectories::branch_distance(t, cfg)?;
        let h = self.history(branch);
        let q = h.q(t);
        let nu = h.nu(t);
        let e = h
            .epochs
            .iter()
            .find(|e| e.start <= t && t <= e.end)
            .expect("covered");
        let (m, hbar) = (cfg.sphere.mass, cfg.constants.hbar);
        let nu2 = nu * nu;
        let mut f = hbar * hbar / (4.0 * m * q) + 0.5 * m * e.omega * e.omega * q * nu2
            - nu2 * 1.2 * self.gm2() / cfg.sphere.radius;
        if nu2 < 1.0 {
            f -= (1.0 - nu2) * self.gm2() / d;
        }
        Ok(f)
    }

    /// Breakdown sampled on a uniform grid of `samples` times over `[0, T₅]`.
    pub fn curve(&self, samples: usize) -> PhaseCurve {
        let t = uniform_grid(self.config.protocol.t5, samples);
        PhaseCurve {
            rows: t
                .iter()
                .map(|&t| self.breakdown(t).expect("grid inside protocol"))
                .collect(),
        }
    }
}

/// Default number of samples of a [`PhaseCurve`].
pub const CURVE_SAMPLES: usize = 2000;

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct PhaseCurve {
    pub rows: Vec<PhaseBreakdown>,
}

impl PhaseCurve {
    /// `Δφ(t)` with the per-term differences.
    pub fn write_csv<W: Write>(&self, mut w: W) -> io::Result<()> {
        writeln!(
            w,
            "t_s,delta_phi_rad,i1_diff,i2_diff,const_self_diff,newton_diff,classical_diff,boundary_diff"
        )?;
        for r in &self.rows {
            let d = &r.diff;
            writeln!(
                w,
                "{},{},{},{},{},{},{},{}",
                sci(r.t),
                sci(r.delta_phi),
                sci(d.i1),
                sci(d.i2),
                sci(d.const_self),
                sci(d.newton_cross),
                sci(d.classical),
                sci(d.boundary_zp + d.boundary_width)
            )?;
        }
        Ok(())
    }

    /// Every quantum term for each branch separately.
    pub fn write_contributions_csv<W: Write>(&self, mut w: W) -> io::Result<()> {
        let names = ["i1", "i2", "const_self", "newton_cross", "boundary_width"];
        let mut header = vec!["t_s".to_string()];
        for b in Branch::BOTH {
            for n in names {
                header.push(format!("{n}_{}", b.label()));
            }
        }
        writeln!(w, "{}", header.join(","))?;
        for r in &self.rows {
            let mut cells = vec![sci(r.t)];
            for p in [&r.plus, &r.minus] {
                for v in [p.i1, p.i2, p.const_self, p.newton_cross, p.boundary_width] {
                    cells.push(sci(v));
                }
            }
            writeln!(w, "{}", cells.join(","))?;
        }
        Ok(())
    }
}

/// Quantum energy `F_Q` of a branch at `t`, J.
pub fn f_quantum(branch: Branch, t: f64, config: &ExperimentConfig) -> Result<f64, PhaseError> {
    Ok(PhaseModel::new(config)?.f_quantum(branch, t)?)
}

/// Phase of one branch at `t`.
pub fn imc(branch: Branch, t: f64, config: &ExperimentConfig) -> Result<BranchPhase, PhaseError> {
    Ok(PhaseModel::new(config)?.branch_phase(branch, t)?)
}

/// `Δφ(t) = Im C₊(t) − Im C₋(t)`.
pub fn delta_phi(t: f64, config: &ExperimentConfig) -> Result<f64, PhaseError> {
    Ok(PhaseModel::new(config)?.delta_phi(t)?)
}

/// `(1/2) arctan(ħ tan(νωt) / (2mνQ₀ω))` continued across the poles of the
/// tangent, for a ground-state packet under constant ν.
pub fn i1_closed(t: f64, nu: f64, config: &ExperimentConfig) -> f64 {
    let (m, hbar, q0) = (config.sphere.mass, config.constants.hbar, config.initial.q0);
    let k = nu * omega_s(&config.sphere, &config.constants);
    if k * t == 0.0 {
        return 0.5 * (hbar * t / (2.0 * m * q0)).atan();
    }
    let theta = k * t;
    let turns = (theta / std::f64::consts::PI).round();
    let reduced = theta - turns * std::f64::consts::PI;
    0.5 * ((hbar * reduced.tan() / (2.0 * m * q0 * k)).atan() + turns * std::f64::consts::PI)
}

/// `(mν²ω²/2ħ) ∫₀ᵗ Q dt` for a ground-state packet under constant ν:
/// `(mν²ω²/2ħ)[Q₀t/2 + ħ²t/(8m²ν²ω²Q₀) + (Q₀ − ħ²/(4m²ν²ω²Q₀)) sin(2νωt)/(4νω)]`,
/// regrouped to stay accurate when `νωt` is small.
pub fn i2_closed(t: f64, nu: f64, config: &ExperimentConfig) -> f64 {
    let (m, hbar, q0) = (config.sphere.mass, config.constants.hbar, config.initial.q0);
    let k = nu * omega_s(&config.sphere, &config.constants);
    let y = 2.0 * k * t;
    // ∫ sin²(kt)/k² dt = 2t³ (y − sin y)/y³
    let h = if y.abs() < 0.1 {
        let y2 = y * y;
        1.0 / 6.0 - y2 / 120.0 + y2 * y2 / 5040.0 - y2 * y2 * y2 / 362880.0
    } else {
        (y - y.sin()) / (y * y * y)
    };
    let sin_sq = 2.0 * t.powi(3) * h;
    let cos_sq = t - k * k * sin_sq;
    let integral = q0 * cos_sq + hbar * hbar / (4.0 * m * m * q0) * sin_sq;
    m * k * k / (2.0 * hbar) * integral
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct NaiveEstimate {
    /// Constant self-energy only: `(6/5)(Gm²/ħR)(T₅ − 2T_s)(|β₊|² − |β₋|²)`.
    pub one_term: f64,
    /// Adds the Newton cross term with `d ≈ 2R` during separation.
    pub two_term: f64,
}

/// Estimates of `Δφ(T₅)` from the dominant terms.
pub fn naive_estimate(config: &ExperimentConfig) -> NaiveEstimate {
    let c = &config.constants;
    let s = &config.sphere;
    let gm2_hr = c.newton_g * s.mass * s.mass / (c.hbar * s.radius);
    let span = config.protocol.t5 - 2.0 * separation_time(config);
    let asym = config.weights.beta_plus_sq - config.weights.beta_minus_sq;
    NaiveEstimate {
        one_term: 1.2 * gm2_hr * span * asym,
        two_term: (1.2 * gm2_hr - 0.5 * gm2_hr) * span * asym,
    }
}

#[derive(Debug, Serialize)]
pub struct SweepPoint {
    pub radius: f64,
    pub mass: f64,
    /// `Δφ(T₅)` or the reason the point failed.
    pub delta_phi: Result<f64, String>,
}

/// `Δφ(T₅)` for each radius at the density of `config`.
pub fn radius_sweep(config: &ExperimentConfig, radii: &[f64], exec: Execution) -> Vec<SweepPoint> {
    exec.map(radii, |&r| {
        let mut cfg = config.clone();
        cfg.sphere = if r > 0.0 {
            config.sphere.rescaled_radius(r)
        } else {
            crate::params::SphereParams {
                mass: 0.0,
                radius: r,
            }
        };
        let delta_phi = PhaseModel::new(&cfg)
            .map(|m| m.final_delta_phi())
            .map_err(|e| e.to_string());
        SweepPoint {
            radius: r,
            mass: cfg.sphere.mass,
            delta_phi,
        }
    })
}

/// Least-squares slope of `ln|Δφ|` against `ln R` over the successful points.
pub fn log_log_slope(points: &[SweepPoint]) -> Option<f64> {
    let xy: Vec<(f64, f64)> = points
        .iter()
        .filter_map(|p| match p.delta_phi {
            Ok(v) if v != 0.0 => Some((p.radius.ln(), v.abs().ln())),
            _ => None,
        })
        .collect();
    if xy.len() < 2 {
        return None;
    }
    let n = xy.len() as f64;
    let mx = xy.iter().map(|p| p.0).sum::<f64>() / n;
    let my = xy.iter().map(|p| p.1).sum::<f64>() / n;
    let sxy: f64 = xy.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let sxx: f64 = xy.iter().map(|p| (p.0 - mx).powi(2)).sum();
    Some(sxy / sxx)
}
