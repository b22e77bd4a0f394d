//! Physical constants, experiment configuration and the Stern-Gerlach
//! time schedule, together with the invariants tying them together.

mod file;

pub use file::{apply_overrides, parse_config, ConfigError, CONFIG_KEYS};

use serde::Serialize;
use std::fmt;

/// Absolute tolerance on protocol times (seconds).
pub const TIME_TOLERANCE: f64 = 1e-12;
/// Tolerance on `|β₊|² + |β₋|² = 1`.
pub const WEIGHT_TOLERANCE: f64 = 1e-12;

/// One spin component of the superposition.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize)]
pub enum Branch {
    Plus,
    Minus,
}

impl Branch {
    pub const BOTH: [Branch; 2] = [Branch::Plus, Branch::Minus];

    /// `+1` for the spin-up packet, `-1` for spin-down.
    pub fn sign(self) -> f64 {
        match self {
            Branch::Plus => 1.0,
            Branch::Minus => -1.0,
        }
    }

    pub fn other(self) -> Branch {
        match self {
            Branch::Plus => Branch::Minus,
            Branch::Minus => Branch::Plus,
        }
    }

    pub fn label(self) -> &'static str {
        match self {
            Branch::Plus => "plus",
            Branch::Minus => "minus",
        }
    }
}

/// Named registry of the physical constants entering the model.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ConstantsSet {
    pub name: String,
    /// Newton's constant, m³ kg⁻¹ s⁻².
    pub newton_g: f64,
    /// Reduced Planck constant, J·s.
    pub hbar: f64,
    /// Bohr magneton, J/T.
    pub mu_b: f64,
    pub g_factor: f64,
}

impl ConstantsSet {
    pub const NAMES: [&'static str; 2] = ["paper", "codata"];

    pub fn codata() -> Self {
        Self {
            name: "codata".into(),
            newton_g: 6.674e-11,
            hbar: 1.0546e-34,
            mu_b: 9.274e-24,
            g_factor: 2.0,
        }
    }

    /// CODATA values except `ħ = 1.00e-34 J·s`, the rounding under which the
    /// published baseline numbers were produced.
    pub fn paper() -> Self {
        Self {
            name: "paper".into(),
            hbar: 1.00e-34,
            ..Self::codata()
        }
    }

    pub fn by_name(name: &str) -> Option<Self> {
        match name {
            "paper" => Some(Self::paper()),
            "codata" => Some(Self::codata()),
            _ => None,
        }
    }

    /// Same set with a different gravitational constant (used for the
    /// `G = 0` control runs and the scaled grid runs).
    pub fn with_newton_g(mut self, newton_g: f64) -> Self {
        self.newton_g = newton_g;
        self
    }

    /// `g μ_B / 2`, the magnetic moment coupling to the gradient (J/T).
    pub fn half_g_mu_b(&self) -> f64 {
        0.5 * self.g_factor * self.mu_b
    }
}

impl Default for ConstantsSet {
    fn default() -> Self {
        Self::paper()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct SphereParams {
    /// kg
    pub mass: f64,
    /// m
    pub radius: f64,
}

impl SphereParams {
    pub fn baseline() -> Self {
        Self {
            mass: 5.5e-15,
            radius: 1e-6,
        }
    }

    pub fn density(&self) -> f64 {
        self.mass / (4.0 / 3.0 * std::f64::consts::PI * self.radius.powi(3))
    }

    /// Sphere of the same density with a different radius.
    pub fn rescaled_radius(&self, radius: f64) -> Self {
        Self {
            mass: self.density() * 4.0 / 3.0 * std::f64::consts::PI * radius.powi(3),
            radius,
        }
    }
}

/// Squared moduli of the spin amplitudes β₊, β₋.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct SpinWeights {
    pub beta_plus_sq: f64,
    pub beta_minus_sq: f64,
}

impl SpinWeights {
    pub fn from_plus(beta_plus_sq: f64) -> Self {
        Self {
            beta_plus_sq,
            beta_minus_sq: 1.0 - beta_plus_sq,
        }
    }

    pub fn weight_sq(&self, branch: Branch) -> f64 {
        match branch {
            Branch::Plus => self.beta_plus_sq,
            Branch::Minus => self.beta_minus_sq,
        }
    }

    pub fn swapped(&self) -> Self {
        Self {
            beta_plus_sq: self.beta_minus_sq,
            beta_minus_sq: self.beta_plus_sq,
        }
    }
}

/// The five switching times of the magnetic gradient plus the field itself.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct Protocol {
    pub t1: f64,
    pub t2: f64,
    pub t3: f64,
    pub t4: f64,
    pub t5: f64,
    /// Uniform field B₀ (T).
    pub b0: f64,
    /// Gradient B₀′ (T/m).
    pub b0_grad: f64,
}

/// One constant-λ piece of the protocol.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Segment {
    pub start: f64,
    pub duration: f64,
    pub lambda: i8,
}

impl Segment {
    pub fn end(&self) -> f64 {
        self.start + self.duration
    }
}

impl Protocol {
    /// Protocol that satisfies the recombination constraint by construction.
    pub fn symmetric(t1: f64, plateau: f64, b0: f64, b0_grad: f64) -> Self {
        let t2 = 2.0 * t1;
        let t3 = t2 + plateau;
        let t4 = t3 + t1;
        Self {
            t1,
            t2,
            t3,
            t4,
            t5: t4 + t1,
            b0,
            b0_grad,
        }
    }

    pub fn baseline() -> Self {
        Self::symmetric(0.25, 1.0, 0.0, 1e6)
    }

    /// Duration of the λ = 0 plateau, `T₃ − T₂`.
    pub fn plateau(&self) -> f64 {
        self.t3 - self.t2
    }

    /// Rebuilds the times from `T₁` and the plateau so that the segment
    /// lengths cancel exactly in floating point.
    pub fn snapped(&self) -> Self {
        Self::symmetric(self.t1, self.plateau(), self.b0, self.b0_grad)
    }

    /// The five λ segments. Durations are the canonical `[T₁, T₁, T₃−T₂, T₁, T₁]`
    /// so that `Σ λ·duration` is exactly zero.
    pub fn segments(&self) -> [Segment; 5] {
        let t1 = self.t1;
        [
            Segment {
                start: 0.0,
                duration: t1,
                lambda: 1,
            },
            Segment {
                start: self.t1,
                duration: t1,
                lambda: -1,
            },
            Segment {
                start: self.t2,
                duration: self.plateau(),
                lambda: 0,
            },
            Segment {
                start: self.t3,
                duration: t1,
                lambda: -1,
            },
            Segment {
                start: self.t4,
                duration: t1,
                lambda: 1,
            },
        ]
    }

    pub fn breakpoints(&self) -> [f64; 6] {
        [0.0, self.t1, self.t2, self.t3, self.t4, self.t5]
    }
}

/// Initial packet: position variance Q₀ of the trap ground state.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct InitialState {
    /// m²
    pub q0: f64,
}

impl InitialState {
    pub fn from_sqrt(sqrt_q0: f64) -> Self {
        Self {
            q0: sqrt_q0 * sqrt_q0,
        }
    }

    /// Trap frequency whose ground state has variance Q₀: `ħ/(m Q₀)`.
    pub fn omega_trap(&self, mass: f64, hbar: f64) -> f64 {
        hbar / (mass * self.q0)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ExperimentConfig {
    pub constants: ConstantsSet,
    pub sphere: SphereParams,
    pub weights: SpinWeights,
    pub protocol: Protocol,
    pub initial: InitialState,
    pub nuclear_correction: bool,
}

impl ExperimentConfig {
    /// Validates the aggregate and snaps the protocol times onto the
    /// recombination constraint.
    pub fn new(
        constants: ConstantsSet,
        sphere: SphereParams,
        weights: SpinWeights,
        protocol: Protocol,
        initial: InitialState,
        nuclear_correction: bool,
    ) -> Result<Self, ValidationReport> {
        Self {
            constants,
            sphere,
            weights,
            protocol,
            initial,
            nuclear_correction,
        }
        .checked()
    }

    /// `R = 1 µm`, `m = 5.5e-15 kg`, `B₀′ = 10⁶ T/m`, `T₁ = 0.25 s`, one-second plateau,
    /// `|β₊|² = 1/3` and `√Q₀ = 1 nm`.
    pub fn baseline(constants: ConstantsSet) -> Self {
        Self {
            constants,
            sphere: SphereParams::baseline(),
            weights: SpinWeights::from_plus(1.0 / 3.0),
            protocol: Protocol::baseline(),
            initial: InitialState::from_sqrt(1e-9),
            nuclear_correction: false,
        }
    }

    pub fn checked(mut self) -> Result<Self, ValidationReport> {
        let report = validate(&self);
        if report.is_ok() {
            self.protocol = self.protocol.snapped();
            Ok(self)
        } else {
            Err(report)
        }
    }

    /// As [`checked`](Self::checked), but also accepts a pure spin state
    /// (one weight exactly 0, the other exactly 1), which the simulators
    /// handle as a branch without self-gravity.
    pub fn checked_allowing_pure_spin(mut self) -> Result<Self, ValidationReport> {
        let mut report = validate(&self);
        let w = self.weights;
        report.violations.retain(|v| {
            let value = match v.field.as_str() {
                "weights.beta_plus_sq" => w.beta_plus_sq,
                "weights.beta_minus_sq" => w.beta_minus_sq,
                _ => return true,
            };
            value != 0.0 && value != 1.0
        });
        if report.is_ok() {
            self.protocol = self.protocol.snapped();
            Ok(self)
        } else {
            Err(report)
        }
    }

    pub fn omega_trap(&self) -> f64 {
        self.initial
            .omega_trap(self.sphere.mass, self.constants.hbar)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Violation {
    pub field: String,
    pub message: String,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize)]
pub struct ValidationReport {
    pub violations: Vec<Violation>,
}

impl ValidationReport {
    pub fn is_ok(&self) -> bool {
        self.violations.is_empty()
    }

    fn check(&mut self, ok: bool, field: &str, message: impl FnOnce() -> String) {
        if !ok {
            self.violations.push(Violation {
                field: field.to_string(),
                message: message(),
            });
        }
    }
}

impl fmt::Display for ValidationReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.is_ok() {
            return write!(f, "configuration valid");
        }
        write!(f, "{} invariant(s) violated:", self.violations.len())?;
        for v in &self.violations {
            write!(f, "\n  {}: {}", v.field, v.message)?;
        }
        Ok(())
    }
}

impl std::error::Error for ValidationReport {}

fn positive_finite(x: f64) -> bool {
    x.is_finite() && x > 0.0
}

/// Checks every invariant of the configuration and lists the violated ones.
pub fn validate(config: &ExperimentConfig) -> ValidationReport {
    let mut r = ValidationReport::default();
    let c = &config.constants;
    for (field, value) in [
        ("constants.G", c.newton_g),
        ("constants.hbar", c.hbar),
        ("constants.mu_B", c.mu_b),
        ("constants.g_factor", c.g_factor),
    ] {
        // G = 0 is the self-gravity-free control; everything else must be positive.
        let ok = if field == "constants.G" {
            value.is_finite() && value >= 0.0
        } else {
            positive_finite(value)
        };
        r.check(ok, field, || {
            format!("must be positive and finite, got {value:e}")
        });
    }

    let s = &config.sphere;
    r.check(positive_finite(s.mass), "sphere.mass", || {
        format!("must be > 0, got {:e}", s.mass)
    });
    r.check(positive_finite(s.radius), "sphere.radius", || {
        format!("must be > 0, got {:e}", s.radius)
    });

    let w = &config.weights;
    for (field, value) in [
        ("weights.beta_plus_sq", w.beta_plus_sq),
        ("weights.beta_minus_sq", w.beta_minus_sq),
    ] {
        r.check(value > 0.0 && value < 1.0, field, || {
            format!("must lie in (0, 1), got {value}")
        });
    }
    let sum = w.beta_plus_sq + w.beta_minus_sq;
    r.check((sum - 1.0).abs() <= WEIGHT_TOLERANCE, "weights", || {
        format!("|beta+|^2 + |beta-|^2 = {sum:.15}, expected 1")
    });

    let p = &config.protocol;
    let ordered = p.t1 > 0.0 && p.t1 < p.t2 && p.t2 <= p.t3 && p.t3 < p.t4 && p.t4 < p.t5;
    r.check(ordered && p.t5.is_finite(), "protocol.times", || {
        format!(
            "need 0 < T1 < T2 <= T3 < T4 < T5, got {} {} {} {} {}",
            p.t1, p.t2, p.t3, p.t4, p.t5
        )
    });
    for (field, len) in [
        ("protocol.T2-T1", p.t2 - p.t1),
        ("protocol.T4-T3", p.t4 - p.t3),
        ("protocol.T5-T4", p.t5 - p.t4),
    ] {
        r.check((len - p.t1).abs() <= TIME_TOLERANCE, field, || {
            format!("recombination requires {field} = T1 = {}, got {len}", p.t1)
        });
    }
    r.check(positive_finite(p.b0_grad), "protocol.B0_grad", || {
        format!("must be > 0, got {:e}", p.b0_grad)
    });
    r.check(p.b0.is_finite() && p.b0 >= 0.0, "protocol.B0", || {
        format!("must be >= 0, got {:e}", p.b0)
    });

    let q0 = config.initial.q0;
    r.check(positive_finite(q0), "initial.Q0", || {
        format!("must be > 0, got {q0:e}")
    });
    r
}

/// Pulsation of the comoving harmonic self-potential, `√(G m / R³)`.
pub fn omega_s(sphere: &SphereParams, constants: &ConstantsSet) -> f64 {
    (constants.newton_g * sphere.mass / sphere.radius.powi(3)).sqrt()
}

/// Time after which the branches no longer overlap under constant force,
/// `√(4 m R / (g μ_B B₀′))`.
pub fn separation_time(config: &ExperimentConfig) -> f64 {
    let c = &config.constants;
    (4.0 * config.sphere.mass * config.sphere.radius
        / (c.g_factor * c.mu_b * config.protocol.b0_grad))
        .sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn baseline() -> ExperimentConfig {
        ExperimentConfig::baseline(ConstantsSet::paper())
    }

    #[test]
    fn baseline_is_valid() {
        let report = validate(&baseline());
        assert!(report.is_ok(), "{report}");
        assert!(baseline().checked().is_ok());
    }

    #[test]
    fn broken_recombination_is_reported() {
        let mut cfg = baseline();
        cfg.protocol.t5 = 2.1;
        let report = validate(&cfg);
        assert!(!report.is_ok());
        assert!(report
            .violations
            .iter()
            .any(|v| v.field == "protocol.T5-T4"));
    }

    #[test]
    fn symmetric_weights_pass() {
        let mut cfg = baseline();
        cfg.weights = SpinWeights {
            beta_plus_sq: 0.5,
            beta_minus_sq: 0.5,
        };
        assert!(validate(&cfg).is_ok());
    }

    #[test]
    fn weights_must_sum_to_one() {
        let mut cfg = baseline();
        cfg.weights.beta_minus_sq = 0.6;
        let report = validate(&cfg);
        assert_eq!(report.violations.len(), 1);
        assert_eq!(report.violations[0].field, "weights");
    }

    #[test]
    fn every_bad_field_listed() {
        let mut cfg = baseline();
        cfg.sphere.mass = -1.0;
        cfg.protocol.b0_grad = 0.0;
        cfg.initial.q0 = 0.0;
        cfg.constants.hbar = f64::NAN;
        let fields: Vec<_> = validate(&cfg)
            .violations
            .into_iter()
            .map(|v| v.field)
            .collect();
        for f in [
            "sphere.mass",
            "protocol.B0_grad",
            "initial.Q0",
            "constants.hbar",
        ] {
            assert!(fields.iter().any(|x| x == f), "{f} missing in {fields:?}");
        }
    }

    #[test]
    fn validate_is_idempotent() {
        let mut cfg = baseline();
        cfg.protocol.t4 = 1.8;
        let before = cfg.clone();
        assert_eq!(validate(&cfg), validate(&cfg));
        assert_eq!(cfg, before);
    }

    #[test]
    fn omega_s_baseline() {
        let w = omega_s(&SphereParams::baseline(), &ConstantsSet::paper());
        assert!((w - 6.0586e-4).abs() < 1e-7, "{w}");
    }

    #[test]
    fn omega_s_scales_with_sqrt_mass() {
        let c = ConstantsSet::codata();
        let s = SphereParams::baseline();
        let heavy = SphereParams {
            mass: 4.0 * s.mass,
            ..s
        };
        let ratio = omega_s(&heavy, &c) / omega_s(&s, &c);
        assert!((ratio - 2.0).abs() < 1e-14);
    }

    #[test]
    fn omega_s_depends_only_on_density() {
        let c = ConstantsSet::codata();
        let s = SphereParams::baseline();
        let w = omega_s(&s, &c);
        for r in [0.3e-6, 2.0e-6, 7.5e-6] {
            let other = s.rescaled_radius(r);
            assert!((omega_s(&other, &c) / w - 1.0).abs() < 1e-13);
        }
    }

    #[test]
    fn separation_time_baseline() {
        let ts = separation_time(&baseline());
        assert!((ts - 0.034).abs() < 0.034 * 0.03, "{ts}");
        // direct evaluation: sqrt(4 * 5.5e-15 * 1e-6 / (2 * 9.274e-24 * 1e6))
        let direct = (2.2e-20f64 / 1.8548e-17).sqrt();
        assert!((ts - direct).abs() < 1e-15);
        assert!((ts - 0.0344).abs() < 5e-5);
    }

    #[test]
    fn separation_time_inverse_sqrt_gradient() {
        let cfg = baseline();
        let mut strong = cfg.clone();
        strong.protocol.b0_grad *= 4.0;
        let ratio = separation_time(&strong) / separation_time(&cfg);
        assert!((ratio - 0.5).abs() < 1e-14);
    }

    #[test]
    fn omega_trap_identity() {
        let init = InitialState::from_sqrt(1e-13);
        let m = 5.5e-15;
        let hbar = 1e-34;
        let w = init.omega_trap(m, hbar);
        assert!((w * init.q0 * m / hbar - 1.0).abs() < 1e-15);
        assert!((w - 1.82e6).abs() < 0.01 * 1.82e6);
    }

    #[test]
    fn snapped_segments_cancel_exactly() {
        let p = Protocol {
            t1: 0.1,
            t2: 0.2,
            t3: 0.7,
            t4: 0.8 + 1e-13,
            t5: 0.9,
            b0: 0.0,
            b0_grad: 1.0,
        };
        let s = p.snapped();
        let total: f64 = s
            .segments()
            .iter()
            .map(|seg| seg.lambda as f64 * seg.duration)
            .sum();
        assert_eq!(total, 0.0);
        assert!((s.t5 - 0.9).abs() < 1e-12);
    }

    #[test]
    fn named_sets() {
        assert_eq!(ConstantsSet::by_name("paper").unwrap().hbar, 1.0e-34);
        assert_eq!(ConstantsSet::by_name("codata").unwrap().hbar, 1.0546e-34);
        assert!(ConstantsSet::by_name("si").is_none());
        assert_eq!(ConstantsSet::default().name, "paper");
    }
}
