//! Ehrenfest trajectories of the two spin packets. Self-gravity exerts no
//! net force on a packet's own mean, so the means follow the magnetic force
//! alone and are known in closed form on each of the five segments.

use crate::params::{Branch, ExperimentConfig, Protocol, Segment};
use serde::Serialize;
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
#[error("time {t} s outside the protocol window [0, {t5}] s")]
pub struct TimeOutOfRange {
    pub t: f64,
    pub t5: f64,
}

fn check_time(t: f64, protocol: &Protocol) -> Result<(), TimeOutOfRange> {
    if (0.0..=protocol.t5).contains(&t) {
        Ok(())
    } else {
        Err(TimeOutOfRange { t, t5: protocol.t5 })
    }
}

/// Sign of the gradient coupling at time `t`. Boundary instants: `T₁ → +1`,
/// `T₂, T₃ → 0` (plateau closed), `T₄ → −1`.
pub fn lambda_of_t(t: f64, protocol: &Protocol) -> Result<i8, TimeOutOfRange> {
    check_time(t, protocol)?;
    let p = protocol;
    Ok(if t <= p.t1 {
        1
    } else if t < p.t2 {
        -1
    } else if t <= p.t3 {
        0
    } else if t <= p.t4 {
        -1
    } else {
        1
    })
}

/// Index of the segment whose closed form is used at `t` (half-open
/// `[T_i, T_{i+1})`, last one closed).
pub(crate) fn segment_index(t: f64, protocol: &Protocol) -> usize {
    let p = protocol;
    if t < p.t1 {
        0
    } else if t < p.t2 {
        1
    } else if t < p.t3 {
        2
    } else if t < p.t4 {
        3
    } else {
        4
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct MeanState {
    pub t: f64,
    pub branch: Branch,
    /// m
    pub mean_z: f64,
    /// kg·m/s
    pub mean_p: f64,
}

/// Acceleration `g μ_B B₀′ / (2m)` of the spin-up packet while λ = 1.
pub fn acceleration(config: &ExperimentConfig) -> f64 {
    config.constants.half_g_mu_b() * config.protocol.b0_grad / config.sphere.mass
}

/// Spin-up `(⟨z⟩, ⟨p⟩)` from the closed form of segment `seg`.
fn plus_on_segment(seg: usize, t: f64, config: &ExperimentConfig) -> (f64, f64) {
    let p = &config.protocol;
    let force = config.constants.half_g_mu_b() * p.b0_grad;
    let half_acc = 0.5 * force / config.sphere.mass;
    let t1 = p.t1;
    match seg {
        0 => (half_acc * t * t, force * t),
        1 => {
            let u = t - 2.0 * t1;
            (half_acc * (2.0 * t1 * t1 - u * u), -force * u)
        }
        2 => (2.0 * half_acc * t1 * t1, 0.0),
        3 => {
            let u = t - p.t3;
            (half_acc * (2.0 * t1 * t1 - u * u), -force * u)
        }
        _ => {
            let u = t - p.t5;
            (half_acc * u * u, force * u)
        }
    }
}

fn mirrored(branch: Branch, (z, pz): (f64, f64)) -> (f64, f64) {
    match branch {
        Branch::Plus => (z, pz),
        Branch::Minus => (-z, -pz),
    }
}

/// `⟨z⟩±(t)`, `⟨p⟩±(t)`.
pub fn mean_state(
    branch: Branch,
    t: f64,
    config: &ExperimentConfig,
) -> Result<MeanState, TimeOutOfRange> {
    check_time(t, &config.protocol)?;
    let seg = segment_index(t, &config.protocol);
    let (mean_z, mean_p) = mirrored(branch, plus_on_segment(seg, t, config));
    Ok(MeanState {
        t,
        branch,
        mean_z,
        mean_p,
    })
}

/// Separation `|⟨z⟩₊ − ⟨z⟩₋|` of the two packets.
pub fn branch_distance(t: f64, config: &ExperimentConfig) -> Result<f64, TimeOutOfRange> {
    Ok(2.0 * mean_state(Branch::Plus, t, config)?.mean_z.abs())
}

/// Times `(t_a, t_b)` between which the packets are more than `2R` apart,
/// or `None` if they never separate. With the crossing inside the first
/// segment `t_a` equals the separation time `T_s`.
pub fn separation_window(config: &ExperimentConfig) -> Option<(f64, f64)> {
    let p = &config.protocol;
    let a = acceleration(config);
    let contact = 2.0 * config.sphere.radius / a;
    let t1sq = p.t1 * p.t1;
    if contact >= 2.0 * t1sq {
        return None;
    }
    if contact <= t1sq {
        let ts = contact.sqrt();
        Some((ts, p.t5 - ts))
    } else {
        let w = (2.0 * t1sq - contact).sqrt();
        Some((2.0 * p.t1 - w, p.t3 + w))
    }
}

/// `∫ dt / d(t)` over `[from, to]`, assembled from the closed forms on each
/// segment. The packets must be separated (d > 0) on the whole interval.
pub fn inverse_distance_integral(from: f64, to: f64, config: &ExperimentConfig) -> f64 {
    let p = &config.protocol;
    let a = acceleration(config);
    let t1 = p.t1;
    let c = std::f64::consts::SQRT_2 * t1;
    let mut total = 0.0;
    for (i, seg) in p.segments().iter().enumerate() {
        let lo = from.max(seg.start);
        let hi = to.min(seg.end());
        if hi <= lo {
            continue;
        }
        total += match i {
            0 => (1.0 / lo - 1.0 / hi) / a,
            1 => ((hi - 2.0 * t1) / c).atanh() / (a * c) - ((lo - 2.0 * t1) / c).atanh() / (a * c),
            2 => (hi - lo) / (2.0 * a * t1 * t1),
            3 => ((hi - p.t3) / c).atanh() / (a * c) - ((lo - p.t3) / c).atanh() / (a * c),
            _ => (1.0 / (p.t5 - hi) - 1.0 / (p.t5 - lo)) / a,
        };
    }
    total
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct ClassicalAction {
    /// J·s
    pub action: f64,
    /// `S/ħ`, rad
    pub phase: f64,
    /// Kinetic plus field-gradient part (J·s); identical for both branches.
    pub gradient_part: f64,
    /// Uniform-field part (J·s); opposite for the two branches.
    pub uniform_part: f64,
}

/// Branch-independent part of `⟨p⟩²/2m − V_ext(⟨z⟩)`: kinetic energy plus
/// the gradient term. Evaluated from the branch's own means.
fn lagrangian_gradient_part(branch: Branch, seg: usize, t: f64, config: &ExperimentConfig) -> f64 {
    let (z, p) = mirrored(branch, plus_on_segment(seg, t, config));
    let lambda = config.protocol.segments()[seg].lambda as f64;
    let half = config.constants.half_g_mu_b();
    p * p / (2.0 * config.sphere.mass)
        + branch.sign() * (lambda * (half * (config.protocol.b0_grad * z)))
}

/// Signed time integral of λ up to `t`; exactly zero at `T₅`.
pub fn lambda_integral(t: f64, protocol: &Protocol) -> f64 {
    let mut total = 0.0;
    for seg in protocol.segments() {
        total += seg.lambda as f64 * covered(&seg, t);
    }
    total
}

fn covered(seg: &Segment, t: f64) -> f64 {
    if t >= seg.end() {
        seg.duration
    } else if t > seg.start {
        t - seg.start
    } else {
        0.0
    }
}

/// Classical action `∫₀ᵗ [⟨p⟩²/2m − V_ext(⟨z⟩)] dt` along a branch. The
/// integrand is quadratic in time on every segment, so Simpson's rule is
/// exact there.
pub fn classical_action_until(
    branch: Branch,
    t: f64,
    config: &ExperimentConfig,
) -> Result<ClassicalAction, TimeOutOfRange> {
    check_time(t, &config.protocol)?;
    let mut gradient_part = 0.0;
    for (i, seg) in config.protocol.segments().iter().enumerate() {
        let h = covered(seg, t);
        if h <= 0.0 {
            continue;
        }
        let f = |x: f64| lagrangian_gradient_part(branch, i, x, config);
        let a = seg.start;
        gradient_part += h / 6.0 * (f(a) + 4.0 * f(a + 0.5 * h) + f(a + h));
    }
    let uniform_part = -branch.sign()
        * config.constants.half_g_mu_b()
        * config.protocol.b0
        * lambda_integral(t, &config.protocol);
    let action = gradient_part + uniform_part;
    Ok(ClassicalAction {
        action,
        phase: action / config.constants.hbar,
        gradient_part,
        uniform_part,
    })
}

/// Action accumulated over the whole protocol.
pub fn classical_action(branch: Branch, config: &ExperimentConfig) -> ClassicalAction {
    classical_action_until(branch, config.protocol.t5, config)
        .expect("T5 lies inside the protocol window")
}
