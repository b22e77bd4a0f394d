use humpty_core::gaussian::{a_analytic, spread_p, spread_q, BranchHistory};
use humpty_core::params::*;
use humpty_core::phase::PhaseModel;
use humpty_core::potential::{quadratic_v_eff, v_eff, v_eff_slope};
use humpty_core::trajectories::{classical_action, lambda_integral, mean_state};
use proptest::prelude::*;

fn protocol() -> impl Strategy<Value = Protocol> {
    (
        0.01f64..0.5,
        0.0f64..2.0,
        0.0f64..0.2,
        1e4f64..1e7,
        -1e-13f64..1e-13,
    )
        .prop_map(|(t1, plateau, b0, grad, jitter)| {
            let mut p = Protocol::symmetric(t1, plateau, b0, grad);
            // within the snapping tolerance of the recombination constraint
            p.t4 += jitter;
            p
        })
}

fn config(p: Protocol) -> ExperimentConfig {
    ExperimentConfig {
        protocol: p,
        ..ExperimentConfig::baseline(ConstantsSet::paper())
    }
    .checked()
    .unwrap()
}

fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs().max(f64::MIN_POSITIVE)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(20))]

    #[test]
    fn classical_actions_cancel(p in protocol()) {
        let cfg = config(p);
        let plus = classical_action(Branch::Plus, &cfg).phase;
        let minus = classical_action(Branch::Minus, &cfg).phase;
        prop_assert!((plus - minus).abs() < 1e-10, "{} vs {}", plus, minus);
    }

    #[test]
    fn uniform_field_drops_out(p in protocol()) {
        let cfg = config(p);
        let shifted = config(Protocol { b0: cfg.protocol.b0 + 0.1, ..cfg.protocol });
        let a = PhaseModel::new(&cfg).unwrap().final_delta_phi();
        let b = PhaseModel::new(&shifted).unwrap().final_delta_phi();
        prop_assert!((a - b).abs() < 1e-10, "{} vs {}", a, b);
    }
}

proptest! {
    #[test]
    fn lambda_integrates_to_zero(p in protocol()) {
        let cfg = config(p);
        prop_assert_eq!(lambda_integral(cfg.protocol.t5, &cfg.protocol), 0.0);
    }

    #[test]
    fn trap_frequency_reproduces_hbar(sqrt_q0 in 1e-14f64..1e-6, mass in 1e-20f64..1e-10) {
        let c = ConstantsSet::paper();
        let s = InitialState::from_sqrt(sqrt_q0);
        prop_assert!(rel(s.omega_trap(mass, c.hbar) * s.q0 * mass, c.hbar) < 4.0 * f64::EPSILON);
    }

    #[test]
    fn validation_is_idempotent(t1 in -0.1f64..0.5, beta in -0.2f64..1.2, q in -1e-18f64..1e-16) {
        let mut cfg = ExperimentConfig::baseline(ConstantsSet::paper());
        cfg.protocol = Protocol::symmetric(t1, 1.0, 0.0, 1e6);
        cfg.weights = SpinWeights::from_plus(beta);
        cfg.initial.q0 = q;
        let before = cfg.clone();
        let first = validate(&cfg);
        prop_assert_eq!(&first, &validate(&cfg));
        prop_assert_eq!(&cfg, &before);
    }

    #[test]
    fn pair_potential_is_smooth_at_contact(radius in 1e-8f64..1e-4, mass in 1e-18f64..1e-10) {
        let c = ConstantsSet::paper();
        let s = SphereParams { mass, radius };
        let contact = 2.0 * radius;
        let outside = contact * (1.0 + 1e-15);
        prop_assert!(rel(v_eff(contact, &s, &c), v_eff(outside, &s, &c)) < 1e-12);
        prop_assert!(rel(v_eff_slope(contact, &s, &c), v_eff_slope(outside, &s, &c)) < 1e-12);
    }

    #[test]
    fn pair_potential_increases(x in 0.0f64..10.0, dx in 1e-6f64..1.0) {
        let (s, c) = (SphereParams::baseline(), ConstantsSet::paper());
        let r = s.radius;
        let (d0, d1) = (x * r, (x + dx) * r);
        // monotone on each side of contact
        if d0 > 2.0 * r || d1 <= 2.0 * r {
            prop_assert!(v_eff(d1, &s, &c) > v_eff(d0, &s, &c));
        }
        prop_assert!(v_eff(d1, &s, &c) < 0.0);
    }

    #[test]
    fn quadratic_truncation_error_is_exact(x in 0.0f64..2.0) {
        let (s, c) = (SphereParams::baseline(), ConstantsSet::paper());
        let d = x * s.radius;
        let e = c.newton_g * s.mass * s.mass / s.radius;
        let expected = e * (3.0 / 16.0 * x.powi(3) - x.powi(5) / 160.0);
        let got = quadratic_v_eff(d, &s, &c) - v_eff(d, &s, &c);
        prop_assert!((got - expected).abs() <= 1e-14 * e, "{} vs {}", got, expected);
    }

    #[test]
    fn branches_mirror_each_other(p in protocol(), u in 0.0f64..=1.0) {
        let cfg = config(p);
        let t = u * cfg.protocol.t5;
        let plus = mean_state(Branch::Plus, t, &cfg).unwrap();
        let minus = mean_state(Branch::Minus, t, &cfg).unwrap();
        prop_assert_eq!(minus.mean_z, -plus.mean_z);
        prop_assert_eq!(minus.mean_p, -plus.mean_p);
    }

    #[test]
    fn trajectories_ignore_gravity_and_spread(p in protocol(), u in 0.0f64..=1.0, sqrt_q0 in 1e-13f64..1e-8, beta in 0.01f64..0.99) {
        let cfg = config(p);
        let mut other = cfg.clone();
        other.constants = other.constants.with_newton_g(0.0);
        other.initial = InitialState::from_sqrt(sqrt_q0);
        other.weights = SpinWeights::from_plus(beta);
        let t = u * cfg.protocol.t5;
        for b in Branch::BOTH {
            prop_assert_eq!(mean_state(b, t, &cfg).unwrap(), mean_state(b, t, &other).unwrap());
        }
    }

    #[test]
    fn means_are_continuous_at_switches(p in protocol()) {
        let cfg = config(p);
        let scale_z = mean_state(Branch::Plus, cfg.protocol.t2, &cfg).unwrap().mean_z;
        let scale_p = mean_state(Branch::Plus, cfg.protocol.t1, &cfg).unwrap().mean_p;
        for t in [cfg.protocol.t1, cfg.protocol.t2, cfg.protocol.t3, cfg.protocol.t4] {
            let before = mean_state(Branch::Plus, t * (1.0 - 1e-15), &cfg).unwrap();
            let at = mean_state(Branch::Plus, t, &cfg).unwrap();
            prop_assert!((before.mean_z - at.mean_z).abs() <= 1e-12 * scale_z);
            prop_assert!((before.mean_p - at.mean_p).abs() <= 1e-12 * scale_p);
        }
    }

    #[test]
    fn width_law_matches_complex_width(u in 0.0f64..=1.0, nu in 0.1f64..=1.0, sqrt_q0 in 1e-13f64..1e-8) {
        let mut cfg = ExperimentConfig::baseline(ConstantsSet::paper());
        cfg.initial = InitialState::from_sqrt(sqrt_q0);
        let t = u * cfg.protocol.t5;
        let a = a_analytic(t, nu, &cfg);
        prop_assert!(rel(0.5 / a.re, spread_q(t, nu, &cfg)) < 1e-12);
    }

    #[test]
    fn uncertainty_product_stays_above_bound(u in 0.0f64..=1.0, nu in 0.1f64..=1.0, sqrt_q0 in 1e-13f64..1e-8) {
        let mut cfg = ExperimentConfig::baseline(ConstantsSet::paper());
        cfg.initial = InitialState::from_sqrt(sqrt_q0);
        let t = u * cfg.protocol.t5;
        let hbar = cfg.constants.hbar;
        let product = spread_q(t, nu, &cfg) * spread_p(t, nu, &cfg);
        prop_assert!(product - 0.25 * hbar * hbar >= -1e-20 * hbar * hbar);
        for b in Branch::BOTH {
            let h = BranchHistory::new(b, &cfg);
            prop_assert!(h.q(t) * h.p_var(t) >= 0.25 * hbar * hbar * (1.0 - 1e-12));
        }
    }

    #[test]
    fn swapping_weights_flips_phase(beta in 0.01f64..0.99) {
        let mut cfg = ExperimentConfig::baseline(ConstantsSet::paper());
        cfg.weights = SpinWeights::from_plus(beta);
        let a = PhaseModel::new(&cfg).unwrap().final_delta_phi();
        cfg.weights = cfg.weights.swapped();
        let b = PhaseModel::new(&cfg).unwrap().final_delta_phi();
        prop_assert_eq!(a, -b);
    }
}
