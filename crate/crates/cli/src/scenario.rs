use crate::error::CliError;
use crate::summary::RunSummary;
use clap::ValueEnum;
use humpty_core::exec::Execution;
use humpty_core::gaussian::{sci, SpreadCurve};
use humpty_core::oracle::{evolve_grid, OracleOptions, ScaledDesign};
use humpty_core::params::{
    apply_overrides, omega_s, separation_time, Branch, ExperimentConfig, InitialState, Protocol,
};
use humpty_core::phase::{log_log_slope, naive_estimate, radius_sweep, PhaseModel, CURVE_SAMPLES};
use humpty_core::trajectories::branch_distance;
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum Scenario {
    Baseline,
    RadiusSweep,
    Q0Sweep,
    ShortProtocol,
    OracleCompare,
    Contributions,
}

/// Radii of the sweep, m: log-spaced over `[0.5, 2] µm`.
pub fn sweep_radii() -> Vec<f64> {
    let n = 13;
    (0..n)
        .map(|i| 0.5e-6 * 4f64.powf(i as f64 / (n - 1) as f64))
        .collect()
}

pub const SWEEP_SQRT_Q0: [f64; 3] = [1e-9, 1e-10, 1e-13];

/// Short protocol: `T₁ = 0.025 s`, `T₅ = 0.2 s`.
pub fn short_protocol(base: &Protocol) -> Protocol {
    Protocol::symmetric(0.025, 0.1, base.b0, base.b0_grad)
}

pub struct Context<'a> {
    pub config: ExperimentConfig,
    /// Raw config document, re-applied on top of scenario-specific bases.
    pub overrides: Option<&'a str>,
    pub out: &'a Path,
    pub exec: Execution,
}

impl Context<'_> {
    fn create(&self, name: &str, summary: &mut RunSummary) -> Result<BufWriter<File>, CliError> {
        let path: PathBuf = self.out.join(name);
        let file =
            File::create(&path).map_err(CliError::io(format!("creating {}", path.display())))?;
        summary.artifacts.push(name.to_string());
        Ok(BufWriter::new(file))
    }

    fn write_with<F>(&self, name: &str, summary: &mut RunSummary, f: F) -> Result<(), CliError>
    where
        F: FnOnce(&mut BufWriter<File>) -> std::io::Result<()>,
    {
        let mut w = self.create(name, summary)?;
        f(&mut w)
            .and_then(|_| w.flush())
            .map_err(CliError::io(format!("writing {name}")))
    }
}

fn finite(name: &str, x: f64) -> Result<f64, CliError> {
    if x.is_finite() {
        Ok(x)
    } else {
        Err(CliError::Numerical(format!("{name} is not finite ({x})")))
    }
}

/// Fills the headline numbers of a closed-form run.
fn headline(summary: &mut RunSummary, model: &PhaseModel) -> Result<(), CliError> {
    let cfg = model.config();
    let b = model.breakdown(cfg.protocol.t5)?;
    let naive = naive_estimate(cfg);
    let dphi = finite("delta_phi", b.delta_phi)?;
    summary.delta_phi_rad = Some(dphi);
    summary.naive = Some(naive);
    summary.terms = Some(b.diff);
    summary.put("delta_phi_rad", dphi);
    summary.put("naive_one_term_rad", naive.one_term);
    summary.put("naive_two_term_rad", naive.two_term);
    summary.put("delta_phi_over_naive", dphi / naive.one_term);
    summary.put("separation_time_s", separation_time(cfg));
    summary.put("omega_s_rad_per_s", omega_s(&cfg.sphere, &cfg.constants));
    summary.put("omega_trap_rad_per_s", cfg.omega_trap());
    summary.put_terms("", &b.diff);
    Ok(())
}

pub fn run(scenario: Scenario, ctx: &Context) -> Result<RunSummary, CliError> {
    match scenario {
        Scenario::Baseline => baseline(ctx),
        Scenario::RadiusSweep => sweep(ctx),
        Scenario::Q0Sweep => q0_sweep(ctx),
        Scenario::ShortProtocol => short(ctx),
        Scenario::OracleCompare => oracle(ctx),
        Scenario::Contributions => contributions(ctx),
    }
}

fn baseline(ctx: &Context) -> Result<RunSummary, CliError> {
    let model = PhaseModel::new(&ctx.config)?;
    let mut s = RunSummary::new("baseline", model.config());
    headline(&mut s, &model)?;
    let curve = model.curve(CURVE_SAMPLES);
    ctx.write_with("phase_curve.csv", &mut s, |w| curve.write_csv(w))?;
    let spread = SpreadCurve::sample(model.config(), CURVE_SAMPLES);
    ctx.write_with("spread.csv", &mut s, |w| spread.write_csv(w))?;
    Ok(s)
}

fn contributions(ctx: &Context) -> Result<RunSummary, CliError> {
    let model = PhaseModel::new(&ctx.config)?;
    let mut s = RunSummary::new("contributions", model.config());
    headline(&mut s, &model)?;
    let curve = model.curve(CURVE_SAMPLES);
    ctx.write_with("contributions.csv", &mut s, |w| {
        curve.write_contributions_csv(w)
    })?;
    ctx.write_with("phase_curve.csv", &mut s, |w| curve.write_csv(w))?;
    Ok(s)
}

fn sweep(ctx: &Context) -> Result<RunSummary, CliError> {
    let cfg = ctx.config.clone().checked()?;
    let mut s = RunSummary::new("radius-sweep", &cfg);
    let points = radius_sweep(&cfg, &sweep_radii(), ctx.exec);
    let mut rows = Vec::with_capacity(points.len());
    for p in &points {
        let v = match &p.delta_phi {
            Ok(v) => finite("delta_phi", *v)?,
            Err(e) => return Err(CliError::Numerical(format!("radius {:e} m: {e}", p.radius))),
        };
        rows.push([p.radius, p.mass, v]);
    }
    let slope = log_log_slope(&points)
        .ok_or_else(|| CliError::Numerical("sweep has fewer than two usable points".into()))?;
    s.put("radius_slope", slope);
    ctx.write_with("radius_sweep.csv", &mut s, |w| {
        write_rows(
            w,
            &["radius_m", "mass_kg", "delta_phi_rad"],
            rows.iter().map(|r| r.to_vec()),
        )
    })?;
    Ok(s)
}

fn q0_sweep(ctx: &Context) -> Result<RunSummary, CliError> {
    let base = ctx.config.clone().checked()?;
    let mut s = RunSummary::new("q0-sweep", &base);
    let configs: Vec<ExperimentConfig> = SWEEP_SQRT_Q0
        .iter()
        .map(|&q| ExperimentConfig {
            initial: InitialState::from_sqrt(q),
            ..base.clone()
        })
        .collect();
    ensure_single_constants(&configs)?;
    let models = ctx.exec.map(&configs, PhaseModel::new);
    for (model, q) in models.into_iter().zip(SWEEP_SQRT_Q0) {
        let model = model?;
        let b = model.breakdown(model.config().protocol.t5)?;
        let tag = format!("sqrtQ0_{q:e}");
        s.put(
            format!("delta_phi_rad.{tag}"),
            finite("delta_phi", b.delta_phi)?,
        );
        s.put(
            format!("omega_trap_rad_per_s.{tag}"),
            model.config().omega_trap(),
        );
        s.put_terms(&format!("{tag}."), &b.diff);
        let curve = model.curve(CURVE_SAMPLES);
        ctx.write_with(&format!("contributions_{tag}.csv"), &mut s, |w| {
            curve.write_contributions_csv(w)
        })?;
        ctx.write_with(&format!("phase_curve_{tag}.csv"), &mut s, |w| {
            curve.write_csv(w)
        })?;
    }
    Ok(s)
}

/// Rejects a set of runs that does not share one constants set.
pub fn ensure_single_constants(configs: &[ExperimentConfig]) -> Result<(), CliError> {
    match configs.first() {
        Some(first) if configs.iter().any(|c| c.constants != first.constants) => Err(
            CliError::Usage("a sweep must use a single constants set".into()),
        ),
        _ => Ok(()),
    }
}

fn short(ctx: &Context) -> Result<RunSummary, CliError> {
    let mut cfg = ctx.config.clone();
    cfg.protocol = short_protocol(&cfg.protocol);
    let model = PhaseModel::new(&cfg)?;
    let cfg = model.config();
    let mut s = RunSummary::new("short-protocol", cfg);
    headline(&mut s, &model)?;
    let d = branch_distance(cfg.protocol.t2, cfg)?;
    s.put("plateau_separation_m", d);
    s.put("plateau_separation_over_2r", d / (2.0 * cfg.sphere.radius));
    let curve = model.curve(CURVE_SAMPLES);
    ctx.write_with("phase_curve.csv", &mut s, |w| curve.write_csv(w))?;
    Ok(s)
}

fn oracle(ctx: &Context) -> Result<RunSummary, CliError> {
    let design = ScaledDesign::default();
    let cfg = match ctx.overrides {
        Some(doc) => apply_overrides(design.config(), doc)?,
        None => design.config(),
    };
    let spec = design.grid(8.0, 200);
    let model = PhaseModel::new(&cfg)?;
    let run = evolve_grid(
        &cfg,
        &spec,
        &OracleOptions {
            exec: ctx.exec,
            ..Default::default()
        },
    )?;
    let mut s = RunSummary::new("oracle-compare", model.config());
    headline(&mut s, &model)?;
    let grid_dphi = finite("grid delta_phi", run.delta_phi())?;
    let closed = model.final_delta_phi();
    let mut rows = Vec::with_capacity(run.history.len());
    let mut worst_q: f64 = 0.0;
    for rec in &run.history {
        let qp = model.history(Branch::Plus).q(rec.t);
        let qm = model.history(Branch::Minus).q(rec.t);
        worst_q = worst_q
            .max((rec.q[0] / qp - 1.0).abs())
            .max((rec.q[1] / qm - 1.0).abs());
        rows.push(vec![
            rec.t,
            rec.delta_phi(),
            model.delta_phi(rec.t)?,
            rec.q[0],
            qp,
            rec.q[1],
            qm,
        ]);
    }
    s.put("grid_delta_phi_rad", grid_dphi);
    s.put("grid_delta_phi_rel_error", grid_dphi / closed - 1.0);
    s.put("grid_q_max_rel_error", worst_q);
    s.put("grid_points", spec.n as f64);
    s.put("grid_steps", run.steps as f64);
    ctx.write_with("oracle_history.csv", &mut s, |w| {
        write_rows(
            w,
            &[
                "t_s",
                "grid_delta_phi_rad",
                "closed_delta_phi_rad",
                "grid_Q_plus_m2",
                "closed_Q_plus_m2",
                "grid_Q_minus_m2",
                "closed_Q_minus_m2",
            ],
            rows.into_iter(),
        )
    })?;
    Ok(s)
}

fn write_rows<W: Write>(
    w: &mut W,
    header: &[&str],
    rows: impl Iterator<Item = Vec<f64>>,
) -> std::io::Result<()> {
    let mut out = csv::Writer::from_writer(w);
    out.write_record(header)?;
    for row in rows {
        out.write_record(row.iter().map(|&x| sci(x)))?;
    }
    out.flush()
}
