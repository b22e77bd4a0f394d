use humpty_core::oracle::*;
use humpty_core::params::{Branch, ExperimentConfig, SpinWeights};
use humpty_core::phase::PhaseModel;
use humpty_core::potential::v_eff;
use humpty_core::trajectories::mean_state;

fn design() -> ScaledDesign {
    ScaledDesign::default()
}

fn run(cfg: &ExperimentConfig, spec: &GridSpec, opts: &OracleOptions) -> GridRun {
    evolve_grid(cfg, spec, opts).expect("grid run")
}

fn without_gravity(mut cfg: ExperimentConfig) -> ExperimentConfig {
    cfg.constants = cfg.constants.with_newton_g(0.0);
    cfg
}

#[test]
fn free_spreading_matches_exact_variance() {
    let d = design();
    let cfg = without_gravity(d.config());
    let opts = OracleOptions {
        magnetic: false,
        ..Default::default()
    };
    let r = run(&cfg, &d.grid(8.0, 50), &opts);
    let (q0, m, hbar) = (cfg.initial.q0, cfg.sphere.mass, cfg.constants.hbar);
    for rec in &r.history {
        let x = hbar * rec.t / (2.0 * m * q0);
        let exact = q0 * (1.0 + x * x);
        for q in rec.q {
            assert!(
                (q / exact - 1.0).abs() < 1e-6,
                "t = {}: {q} vs {exact}",
                rec.t
            );
        }
    }
    assert!(r.delta_phi().abs() < 1e-12);
}

#[test]
fn harmonic_only_matches_breathing_width() {
    let d = design();
    let cfg = d.config();
    let opts = OracleOptions {
        magnetic: false,
        force_overlap: true,
        ..Default::default()
    };
    let r = run(&cfg, &d.grid(8.0, 100), &opts);
    let (q0, m, hbar) = (cfg.initial.q0, cfg.sphere.mass, cfg.constants.hbar);
    let w = (cfg.constants.newton_g * m / cfg.sphere.radius.powi(3)).sqrt();
    for rec in &r.history {
        let (s, c) = (w * rec.t).sin_cos();
        let exact = q0 * c * c + hbar * hbar * s * s / (4.0 * m * m * w * w * q0);
        for q in rec.q {
            assert!(
                (q / exact - 1.0).abs() < 1e-6,
                "t = {}: {q} vs {exact}",
                rec.t
            );
        }
    }
}

#[test]
fn scaled_run_matches_closed_forms() {
    let d = design();
    let cfg = d.config();
    let r = run(&cfg, &d.grid(8.0, 200), &OracleOptions::default());
    let model = PhaseModel::new(&cfg).unwrap();
    let exact = model.final_delta_phi();
    assert!(
        (r.delta_phi() / exact - 1.0).abs() < 1e-2,
        "{} vs {exact}",
        r.delta_phi()
    );
    let mut worst: f64 = 0.0;
    for rec in &r.history {
        for (i, b) in Branch::BOTH.into_iter().enumerate() {
            worst = worst.max((rec.q[i] / model.history(b).q(rec.t) - 1.0).abs());
        }
    }
    assert!(worst < 1e-4, "worst Q mismatch {worst:e}");
}

#[test]
fn branch_phases_converge_to_decomposition() {
    let d = design();
    let cfg = d.config();
    let model = PhaseModel::new(&cfg).unwrap();
    // per-branch phases carry an O(dt²) splitting error that cancels in Δφ
    let worst = |steps| {
        let r = run(&cfg, &d.grid(8.0, steps), &OracleOptions::default());
        let mut worst: f64 = 0.0;
        for rec in &r.history {
            for (i, b) in Branch::BOTH.into_iter().enumerate() {
                let expected = model.branch_phase(b, rec.t).unwrap().total;
                worst = worst.max((rec.phase[i] - expected).abs());
            }
        }
        worst
    };
    let (coarse, fine) = (worst(200), worst(400));
    assert!(fine < 2e-4, "{fine}");
    assert!((3.5..4.5).contains(&(coarse / fine)), "{coarse} / {fine}");
}

#[test]
fn norm_is_conserved() {
    let d = design();
    let cfg = d.config();
    let r = run(&cfg, &d.grid(8.0, 100), &OracleOptions::default());
    for rec in &r.history {
        for n in rec.norm {
            assert!((n - 1.0).abs() < 1e-9, "t = {}: norm {n}", rec.t);
        }
    }
}

#[test]
fn means_follow_classical_trajectories() {
    let d = design();
    let cfg = d.config();
    let r = run(&cfg, &d.grid(8.0, 100), &OracleOptions::default());
    let scale = cfg.protocol.b0_grad * cfg.constants.half_g_mu_b() / cfg.sphere.mass
        * cfg.protocol.t1.powi(2);
    for rec in &r.history {
        for (i, b) in Branch::BOTH.into_iter().enumerate() {
            let z = mean_state(b, rec.t, &cfg).unwrap().mean_z;
            assert!(
                (rec.mean_z[i] - z).abs() < 1e-4 * scale,
                "{b:?} at t = {}: {} vs {z}",
                rec.t,
                rec.mean_z[i]
            );
        }
    }
}

#[test]
fn uncertainty_relation_holds_at_the_end() {
    let d = design();
    let cfg = d.config();
    let r = run(&cfg, &d.grid(8.0, 100), &OracleOptions::default());
    let hbar = cfg.constants.hbar;
    for b in Branch::BOTH {
        let mo = moments(&r.final_state.grid, r.final_state.psi(b), hbar);
        assert!(mo.q * mo.p_var >= 0.25 * hbar * hbar * (1.0 - 1e-6));
        assert!(mo.mean_z.abs() < 1e-6 * cfg.initial.q0.sqrt());
    }
}

#[test]
fn symmetric_run_without_gravity_has_no_phase() {
    let d = design();
    let cfg = without_gravity(d.config());
    let r = run(&cfg, &d.grid(8.0, 100), &OracleOptions::default());
    assert!(r.delta_phi().abs() < 1e-4, "{}", r.delta_phi());
}

#[test]
fn constant_offset_shifts_phase() {
    let d = design();
    let cfg = without_gravity(d.config());
    let hbar = cfg.constants.hbar;
    let (start, end) = (0.4, 1.1);
    let energy = 1.7 * hbar / (end - start);
    let opts = OracleOptions {
        offset: Some(ConstantOffset {
            branch: Branch::Plus,
            energy,
            start,
            end,
        }),
        ..Default::default()
    };
    let r = run(&cfg, &d.grid(8.0, 100), &opts);
    let expected = -energy * (end - start) / hbar;
    assert!(
        (r.delta_phi() - expected).abs() < 1e-6,
        "{} vs {expected}",
        r.delta_phi()
    );
}

#[test]
fn splitting_converges_at_second_order() {
    let d = design();
    let cfg = d.config();
    let exact = PhaseModel::new(&cfg).unwrap().final_delta_phi();
    let err = |steps| {
        let r = run(&cfg, &d.grid(12.0, steps), &OracleOptions::default());
        (r.delta_phi() - exact).abs()
    };
    let (coarse, fine) = (err(50), err(100));
    let ratio = coarse / fine;
    assert!((3.5..4.5).contains(&ratio), "error ratio {ratio}");
}

#[test]
fn refinement_changes_phase_by_under_a_milliradian() {
    let d = design();
    let cfg = d.config();
    let coarse = d.grid(8.0, 100);
    let fine = GridSpec {
        n: 2 * coarse.n,
        half_width: coarse.half_width,
        dt: 0.5 * coarse.dt,
    };
    let a = run(&cfg, &coarse, &OracleOptions::default()).delta_phi();
    let b = run(&cfg, &fine, &OracleOptions::default()).delta_phi();
    assert!((a - b).abs() < 1e-3, "{a} vs {b}");
}

#[test]
fn lone_branch_feels_only_its_self_term() {
    let d = ScaledDesign {
        beta_plus_sq: 1.0,
        ..design()
    };
    let cfg = d.config();
    assert_eq!(cfg.weights, SpinWeights::from_plus(1.0));
    let spec = d.grid(8.0, 400);
    let r = run(&cfg, &spec, &OracleOptions::default());
    let model = PhaseModel::new(&cfg).unwrap();
    let t5 = cfg.protocol.t5;
    let plus = model.branch_phase(Branch::Plus, t5).unwrap();
    assert_eq!(plus.newton_cross, 0.0);
    assert!((extract_phase(&r, Branch::Plus) - plus.total).abs() < 2e-4);
    // same + potential as a run that never leaves the overlap regime
    let overlapped = run(
        &cfg,
        &spec,
        &OracleOptions {
            force_overlap: true,
            ..Default::default()
        },
    );
    assert_eq!(
        extract_phase(&r, Branch::Plus),
        extract_phase(&overlapped, Branch::Plus)
    );
    // the + width breathes at the full self-gravity frequency throughout
    let (q0, m, hbar) = (cfg.initial.q0, cfg.sphere.mass, cfg.constants.hbar);
    let w = (cfg.constants.newton_g * m / cfg.sphere.radius.powi(3)).sqrt();
    let (s, c) = (w * t5).sin_cos();
    let exact = q0 * c * c + hbar * hbar * s * s / (4.0 * m * m * w * w * q0);
    let q = r.history.last().unwrap().q[0];
    assert!((q / exact - 1.0).abs() < 1e-6, "{q} vs {exact}");
}

#[test]
fn convolution_matches_direct_quadrature() {
    let d = design();
    let cfg = d.config();
    let spec = d.grid(8.0, 100);
    let grid = Grid::new(spec.n, spec.half_width);
    let psi = gaussian_packet(&grid, cfg.initial.q0, 0.0, 0.0);
    let state = GridState {
        grid: grid.clone(),
        psi: [psi.clone(), psi.clone()],
        t: 0.0,
    };
    let v = convolution_potential(&state, &cfg);
    let e = cfg.constants.newton_g * cfg.sphere.mass.powi(2) / cfg.sphere.radius;
    let sigma = cfg.initial.q0.sqrt();
    for (j, &z) in grid.z.iter().enumerate().step_by(7) {
        if z.abs() > 4.0 * sigma {
            continue;
        }
        let direct: f64 = grid
            .z
            .iter()
            .zip(&psi)
            .map(|(&zp, c)| {
                c.norm_sqr() * grid.dz * v_eff((z - zp).abs(), &cfg.sphere, &cfg.constants)
            })
            .sum();
        assert!(((v[0][j] - direct) / e).abs() < 1e-12, "z = {z}");
        assert_eq!(v[0][j], v[1][j]);
    }
}

#[test]
fn convolution_departs_from_quadratic_by_the_cubic_term() {
    let d = design();
    let cfg = d.config();
    let spec = d.grid(8.0, 100);
    let grid = Grid::new(spec.n, spec.half_width);
    let psi = gaussian_packet(&grid, cfg.initial.q0, 0.0, 0.0);
    let state = GridState {
        grid: grid.clone(),
        psi: [psi.clone(), psi],
        t: 0.0,
    };
    let v = convolution_potential(&state, &cfg);
    let r = cfg.sphere.radius;
    let e = cfg.constants.newton_g * cfg.sphere.mass.powi(2) / r;
    let q0 = cfg.initial.q0;
    let s = q0.sqrt() / r;
    let j0 = spec.n / 2;
    assert_eq!(grid.z[j0], 0.0);
    // Gaussian absolute moments: <|x|^3> = 2 sqrt(2/pi) s^3, <|x|^5> = 8 sqrt(2/pi) s^5
    let c = (2.0 / std::f64::consts::PI).sqrt();
    let quadratic = -1.2 + 0.5 * s * s;
    let expected = quadratic - 3.0 / 16.0 * 2.0 * c * s.powi(3) + 8.0 * c * s.powi(5) / 160.0;
    assert!(
        (v[0][j0] / e - expected).abs() < 1e-9,
        "{} vs {expected}",
        v[0][j0] / e
    );
    assert!((v[0][j0] / e - quadratic).abs() < 3e-3);
}

#[test]
fn convolution_mode_agrees_in_sign_and_magnitude() {
    let d = design();
    let cfg = d.config();
    let spec = d.grid(8.0, 100);
    let moment = run(&cfg, &spec, &OracleOptions::default()).delta_phi();
    let conv = run(
        &cfg,
        &spec,
        &OracleOptions {
            gravity: GravityModel::Convolution,
            ..Default::default()
        },
    )
    .delta_phi();
    // the full pair potential also acts between overlapping branches, which
    // the quadratic model drops; only the order of magnitude must agree
    let ratio = conv / moment;
    assert!(
        (0.5..2.0).contains(&ratio),
        "moment {moment} convolution {conv}"
    );
}

#[test]
fn snapshots_are_kept_and_written() {
    let d = design();
    let cfg = d.config();
    let opts = OracleOptions {
        snapshots: vec![cfg.protocol.t2, 0.0],
        ..Default::default()
    };
    let r = run(&cfg, &d.grid(8.0, 50), &opts);
    assert_eq!(r.snapshots.len(), 2);
    assert_eq!(r.snapshots[0].t, 0.0);
    assert!((r.snapshots[1].t - cfg.protocol.t2).abs() < 1e-12);
    let mut buf = Vec::new();
    r.snapshots[1].write_csv(&mut buf).unwrap();
    let text = String::from_utf8(buf).unwrap();
    assert_eq!(text.lines().count(), 2 + r.final_state.grid.len());
}

#[test]
fn narrow_grid_reports_escape() {
    let d = design();
    let cfg = d.config();
    let mut spec = d.grid(8.0, 50);
    spec.half_width *= 0.5;
    spec.n /= 2;
    match evolve_grid(&cfg, &spec, &OracleOptions::default()) {
        Err(OracleError::GridEscape { edge_mass, .. }) => assert!(edge_mass > 1e-10),
        other => panic!("expected grid escape, got {other:?}"),
    }
}

#[test]
fn coarse_grid_is_rejected() {
    let d = design();
    let cfg = d.config();
    let mut spec = d.grid(8.0, 50);
    spec.n /= 4;
    assert!(matches!(
        evolve_grid(&cfg, &spec, &OracleOptions::default()),
        Err(OracleError::UnderResolved(_))
    ));
}
