//! Split-step grid integration of the two branch wave functions, used as an
//! independent check of the Gaussian closed forms.
//!
//! Each branch is normalised on its own; the spin weights enter only through
//! the self-gravity potential. One step is: half potential step with the
//! potential built from the current moments, exact kinetic step in Fourier
//! space, half potential step with the potential rebuilt from the new
//! moments. The magnetic coupling sign is taken at the step midpoint and
//! steps never straddle a switching time.

mod grid;
mod scaled;

pub use grid::{
    fit_quadratic_phase, gaussian_packet, moments, momentum_moments, normalize, position_moments,
    Grid, Moments, PositionMoments, QuadraticPhase,
};
pub use scaled::ScaledDesign;

use crate::exec::Execution;
use crate::gaussian::sci;
use crate::params::{Branch, ExperimentConfig, ValidationReport};
use crate::potential::{
    branch_taylor, effective_omega_s, magnetic_taylor, nu_branch, v_eff, BranchContext,
    PotentialError, TaylorCoeffs,
};
use crate::trajectories::{acceleration, lambda_of_t, separation_window};
use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};
use std::f64::consts::PI;
use std::io::{self, Write};
use std::sync::Arc;
use thiserror::Error;

/// Cells at each edge checked for escaping probability.
const EDGE_CELLS: usize = 4;
/// Largest tolerated probability in the edge cells.
const EDGE_MASS_LIMIT: f64 = 1e-10;

#[derive(Debug, Error)]
pub enum OracleError {
    #[error("invalid configuration: {0}")]
    Invalid(#[from] ValidationReport),
    #[error("grid under-resolved: {0}")]
    UnderResolved(String),
    #[error(
        "{branch:?} packet reached the grid edge at t = {t} s (edge probability {edge_mass:e})"
    )]
    GridEscape {
        t: f64,
        branch: Branch,
        edge_mass: f64,
    },
    #[error(
        "{branch:?} phase jumped by {jump} rad in one step at t = {t} s; unwrapping is ambiguous"
    )]
    UnwrapAmbiguity { t: f64, branch: Branch, jump: f64 },
    #[error("phase fit failed for {branch:?} at t = {t} s")]
    PhaseFit { t: f64, branch: Branch },
    #[error(transparent)]
    Potential(#[from] PotentialError),
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct GridSpec {
    pub n: usize,
    /// Grid covers `[−half_width, half_width)`, m.
    pub half_width: f64,
    /// Target time step; each protocol segment is split into equal steps no
    /// longer than this, s.
    pub dt: f64,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum GravityModel {
    /// Quadratic self-term and constant cross term rebuilt from the moments.
    #[default]
    MomentRebuilt,
    /// Weighted convolution of both densities with the sphere pair
    /// potential.
    Convolution,
}

/// Extra constant energy added to one branch over a time interval.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ConstantOffset {
    pub branch: Branch,
    /// J
    pub energy: f64,
    pub start: f64,
    pub end: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct OracleOptions {
    pub gravity: GravityModel,
    /// Treat the branches as overlapping throughout (ν = 1).
    pub force_overlap: bool,
    /// Apply the Stern-Gerlach potential.
    pub magnetic: bool,
    pub offset: Option<ConstantOffset>,
    /// Times at which the full state is kept.
    pub snapshots: Vec<f64>,
    pub exec: Execution,
}

impl Default for OracleOptions {
    fn default() -> Self {
        OracleOptions {
            gravity: GravityModel::MomentRebuilt,
            force_overlap: false,
            magnetic: true,
            offset: None,
            snapshots: Vec::new(),
            exec: Execution::Sequential,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct GridState {
    pub grid: Grid,
    /// Indexed by `[Plus, Minus]`.
    pub psi: [Vec<Complex64>; 2],
    pub t: f64,
}

impl GridState {
    pub fn psi(&self, branch: Branch) -> &[Complex64] {
        &self.psi[idx(branch)]
    }

    /// `(z, Re ψ₊, Im ψ₊, Re ψ₋, Im ψ₋)` rows.
    pub fn write_csv<W: Write>(&self, mut w: W) -> io::Result<()> {
        writeln!(w, "# t_s = {}", sci(self.t))?;
        writeln!(w, "z_m,re_psi_plus,im_psi_plus,re_psi_minus,im_psi_minus")?;
        for j in 0..self.grid.len() {
            let (p, m) = (self.psi[0][j], self.psi[1][j]);
            writeln!(
                w,
                "{},{},{},{},{}",
                sci(self.grid.z[j]),
                sci(p.re),
                sci(p.im),
                sci(m.re),
                sci(m.im)
            )?;
        }
        Ok(())
    }
}

/// Per-step record of both branches.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct GridRecord {
    pub t: f64,
    pub mean_z: [f64; 2],
    pub q: [f64; 2],
    pub norm: [f64; 2],
    /// Phase at `z = 0` of the fitted quadratic phase, unwrapped in time.
    pub phase: [f64; 2],
}

impl GridRecord {
    pub fn delta_phi(&self) -> f64 {
        self.phase[0] - self.phase[1]
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct GridRun {
    pub history: Vec<GridRecord>,
    pub snapshots: Vec<GridState>,
    pub final_state: GridState,
    pub steps: usize,
}

impl GridRun {
    pub fn delta_phi(&self) -> f64 {
        self.history.last().expect("non-empty history").delta_phi()
    }
}

/// Unwrapped phase of a branch at the end of a run.
pub fn extract_phase(run: &GridRun, branch: Branch) -> f64 {
    run.history.last().expect("non-empty history").phase[idx(branch)]
}

fn idx(b: Branch) -> usize {
    match b {
        Branch::Plus => 0,
        Branch::Minus => 1,
    }
}

const BRANCHES: [Branch; 2] = Branch::BOTH;

/// Checks that the grid resolves the initial packet and the largest mean
/// momentum of the protocol.
pub fn check_resolution(
    config: &ExperimentConfig,
    spec: &GridSpec,
    magnetic: bool,
) -> Result<(), OracleError> {
    let grid_dz = 2.0 * spec.half_width / spec.n as f64;
    let sigma = config.initial.q0.sqrt();
    if grid_dz > sigma / 8.0 {
        return Err(OracleError::UnderResolved(format!(
            "dz = {grid_dz:e} m exceeds sqrt(Q0)/8 = {:e} m",
            sigma / 8.0
        )));
    }
    if magnetic {
        let p_max = config.sphere.mass * acceleration(config) * config.protocol.t1;
        let k_needed = 8.0 * p_max / config.constants.hbar;
        if PI / grid_dz < k_needed {
            return Err(OracleError::UnderResolved(format!(
                "spectral bandwidth {:e} m^-1 below 8 max|<p>|/hbar = {k_needed:e} m^-1",
                PI / grid_dz
            )));
        }
    }
    Ok(())
}

struct Solver<'a> {
    config: &'a ExperimentConfig,
    opts: &'a OracleOptions,
    grid: Grid,
    fft: Arc<dyn Fft<f64>>,
    ifft: Arc<dyn Fft<f64>>,
    conv: Option<Convolver>,
    window: Option<(f64, f64)>,
}

impl Solver<'_> {
    fn gravity_coeffs(
        &self,
        pm: &[PositionMoments; 2],
        i: usize,
        t_mid: f64,
    ) -> Result<TaylorCoeffs, PotentialError> {
        let cfg = self.config;
        // the regime is fixed per step; steps are aligned with the contact
        // times so a switch never falls inside one
        let separated = match self.window {
            Some((ta, tb)) => !self.opts.force_overlap && ta < t_mid && t_mid < tb,
            None => false,
        };
        let nu = if separated {
            nu_branch(BRANCHES[i], f64::INFINITY, &cfg.weights, &cfg.sphere)
        } else {
            1.0
        };
        let ctx = BranchContext {
            branch: BRANCHES[i],
            nu,
            mean_z: pm[i].mean_z,
            other_mean_z: pm[1 - i].mean_z,
            q: pm[i].q,
            omega_s: effective_omega_s(
                pm[i].q,
                &cfg.sphere,
                &cfg.constants,
                cfg.nuclear_correction,
            ),
        };
        branch_taylor(&ctx, &cfg.sphere, &cfg.constants)
    }

    /// Potential of both branches on the grid at time `t_mid` (for λ and
    /// the offset) from the given state.
    fn potentials(
        &self,
        psi: &[Vec<Complex64>; 2],
        pm: &[PositionMoments; 2],
        t_mid: f64,
    ) -> Result<[Vec<f64>; 2], OracleError> {
        let cfg = self.config;
        let lambda = lambda_of_t(t_mid, &cfg.protocol).expect("inside protocol");
        let conv = self.conv.as_ref().map(|c| c.potentials(psi, cfg));
        let mut out: [Vec<f64>; 2] = [Vec::new(), Vec::new()];
        for i in 0..2 {
            let mut v = if self.opts.magnetic {
                magnetic_taylor(
                    BRANCHES[i],
                    lambda,
                    cfg.protocol.b0,
                    cfg.protocol.b0_grad,
                    &cfg.constants,
                )
            } else {
                TaylorCoeffs::default()
            };
            if let Some(off) = self.opts.offset {
                if off.branch == BRANCHES[i] && off.start <= t_mid && t_mid < off.end {
                    v.v0 += off.energy;
                }
            }
            let mut pot: Vec<f64> = self.grid.z.iter().map(|&z| v.eval(z)).collect();
            match &conv {
                Some(c) => pot.iter_mut().zip(&c[i]).for_each(|(p, g)| *p += g),
                None => {
                    let g = self.gravity_coeffs(pm, i, t_mid)?;
                    // expand about the mean to keep the large terms apart
                    let z0 = g.expansion_point;
                    let shift = g.v0 + g.v1 * z0 + g.v2 * z0 * z0;
                    for (p, &z) in pot.iter_mut().zip(&self.grid.z) {
                        let x = z - z0;
                        *p += shift + (g.v1 + 2.0 * g.v2 * z0) * x + g.v2 * x * x;
                    }
                }
            }
            out[i] = pot;
        }
        Ok(out)
    }

    fn kick(&self, psi: &mut [Complex64], pot: &[f64], dt: f64) {
        let hbar = self.config.constants.hbar;
        self.opts.exec.for_each_mut(psi, |j, c| {
            *c *= Complex64::from_polar(1.0, -pot[j] * dt / hbar);
        });
    }

    fn drift(&self, psi: &mut [Complex64], phases: &[Complex64]) {
        self.fft.process(psi);
        let scale = 1.0 / psi.len() as f64;
        for (c, p) in psi.iter_mut().zip(phases) {
            *c *= p * scale;
        }
        self.ifft.process(psi);
    }

    fn kinetic_phases(&self, dt: f64) -> Vec<Complex64> {
        let c = self.config.constants.hbar / (2.0 * self.config.sphere.mass);
        self.grid
            .k
            .iter()
            .map(|&k| Complex64::from_polar(1.0, -c * k * k * dt))
            .collect()
    }

    fn edge_mass(&self, psi: &[Complex64]) -> f64 {
        let n = psi.len();
        let s: f64 = psi[..EDGE_CELLS]
            .iter()
            .chain(&psi[n - EDGE_CELLS..])
            .map(|c| c.norm_sqr())
            .sum();
        s * self.grid.dz
    }
}

/// Pair-potential convolution on a zero-padded grid of twice the size.
struct Convolver {
    fft: Arc<dyn Fft<f64>>,
    ifft: Arc<dyn Fft<f64>>,
    kernel_hat: Vec<Complex64>,
    n: usize,
    dz: f64,
}

impl Convolver {
    fn new(grid: &Grid, config: &ExperimentConfig) -> Self {
        let n = grid.len();
        let mut planner = FftPlanner::new();
        let fft = planner.plan_fft_forward(2 * n);
        let ifft = planner.plan_fft_inverse(2 * n);
        let mut kernel = vec![Complex64::new(0.0, 0.0); 2 * n];
        for (m, slot) in kernel.iter_mut().enumerate() {
            // circular index m ↔ separation (m or m − 2N)·dz
            let offset = if m < n {
                m as f64
            } else {
                m as f64 - 2.0 * n as f64
            };
            if m != n {
                *slot = Complex64::new(
                    v_eff((offset * grid.dz).abs(), &config.sphere, &config.constants),
                    0.0,
                );
            }
        }
        fft.process(&mut kernel);
        Convolver {
            fft,
            ifft,
            kernel_hat: kernel,
            n,
            dz: grid.dz,
        }
    }

    /// `V±(z) = Σ_j |β_j|² ∫ |ψ_j(z')|² v_eff(|z − z'|) dz'`.
    fn potentials(&self, psi: &[Vec<Complex64>; 2], config: &ExperimentConfig) -> [Vec<f64>; 2] {
        let mut fields: Vec<Vec<f64>> = Vec::with_capacity(2);
        for p in psi.iter() {
            let mut rho = vec![Complex64::new(0.0, 0.0); 2 * self.n];
            for (r, c) in rho.iter_mut().zip(p) {
                *r = Complex64::new(c.norm_sqr() * self.dz, 0.0);
            }
            self.fft.process(&mut rho);
            for (r, k) in rho.iter_mut().zip(&self.kernel_hat) {
                *r *= k;
            }
            self.ifft.process(&mut rho);
            let scale = 1.0 / (2 * self.n) as f64;
            fields.push(rho[..self.n].iter().map(|c| c.re * scale).collect());
        }
        let w = [config.weights.beta_plus_sq, config.weights.beta_minus_sq];
        let total: Vec<f64> = (0..self.n)
            .map(|j| w[0] * fields[0][j] + w[1] * fields[1][j])
            .collect();
        [total.clone(), total]
    }
}

/// Self-gravity potential of both branches from the weighted convolution of
/// their densities with the sphere pair potential.
pub fn convolution_potential(state: &GridState, config: &ExperimentConfig) -> [Vec<f64>; 2] {
    Convolver::new(&state.grid, config).potentials(&state.psi, config)
}

/// `(start, end, steps)` per interval between consecutive protocol,
/// contact and offset times.
fn step_plan(config: &ExperimentConfig, opts: &OracleOptions, dt: f64) -> Vec<(f64, f64, usize)> {
    let t5 = config.protocol.t5;
    let mut cuts: Vec<f64> = config.protocol.breakpoints().to_vec();
    if let Some((ta, tb)) = separation_window(config).filter(|_| opts.magnetic) {
        cuts.extend([ta, tb]);
    }
    if let Some(off) = opts.offset {
        cuts.extend([off.start.clamp(0.0, t5), off.end.clamp(0.0, t5)]);
    }
    cuts.sort_by(f64::total_cmp);
    cuts.windows(2)
        .filter(|w| w[1] > w[0])
        .map(|w| {
            let duration = w[1] - w[0];
            let n = (duration / dt).ceil().max(1.0) as usize;
            (w[0], w[1], n)
        })
        .collect()
}

struct PhaseTracker {
    last: [f64; 2],
}

impl PhaseTracker {
    fn update(&mut self, t: f64, raw: [f64; 2]) -> Result<[f64; 2], OracleError> {
        let two_pi = 2.0 * PI;
        let mut out = [0.0; 2];
        for i in 0..2 {
            let unwrapped = raw[i] + two_pi * ((self.last[i] - raw[i]) / two_pi).round();
            let jump = unwrapped - self.last[i];
            if jump.abs() > 0.5 * PI {
                return Err(OracleError::UnwrapAmbiguity {
                    t,
                    branch: BRANCHES[i],
                    jump,
                });
            }
            out[i] = unwrapped;
        }
        self.last = out;
        Ok(out)
    }
}

fn raw_phases(
    grid: &Grid,
    psi: &[Vec<Complex64>; 2],
    pm: &[PositionMoments; 2],
    t: f64,
) -> Result<[f64; 2], OracleError> {
    let mut out = [0.0; 2];
    for i in 0..2 {
        let fit = fit_quadratic_phase(grid, &psi[i], &pm[i]).ok_or(OracleError::PhaseFit {
            t,
            branch: BRANCHES[i],
        })?;
        out[i] = fit.eval(0.0);
    }
    Ok(out)
}

/// Evolves both branches from the ground state over the whole protocol.
pub fn evolve_grid(
    config: &ExperimentConfig,
    spec: &GridSpec,
    opts: &OracleOptions,
) -> Result<GridRun, OracleError> {
    let config = config.clone().checked_allowing_pure_spin()?;
    check_resolution(&config, spec, opts.magnetic)?;
    let grid = Grid::new(spec.n, spec.half_width);
    let mut planner = FftPlanner::new();
    let solver = Solver {
        config: &config,
        opts,
        fft: planner.plan_fft_forward(spec.n),
        ifft: planner.plan_fft_inverse(spec.n),
        conv: (opts.gravity == GravityModel::Convolution).then(|| Convolver::new(&grid, &config)),
        window: if opts.magnetic {
            separation_window(&config)
        } else {
            None
        },
        grid,
    };
    let g = &solver.grid;

    let psi0 = gaussian_packet(g, config.initial.q0, 0.0, 0.0);
    let mut psi = [psi0.clone(), psi0];
    let mut pm = [position_moments(g, &psi[0]), position_moments(g, &psi[1])];
    let mut tracker = PhaseTracker { last: [0.0; 2] };
    let first = tracker.update(0.0, raw_phases(g, &psi, &pm, 0.0)?)?;
    let mut history = vec![GridRecord {
        t: 0.0,
        mean_z: [pm[0].mean_z, pm[1].mean_z],
        q: [pm[0].q, pm[1].q],
        norm: [pm[0].norm, pm[1].norm],
        phase: first,
    }];

    let mut snap_times: Vec<f64> = opts.snapshots.clone();
    snap_times.sort_by(f64::total_cmp);
    let mut snapshots = Vec::new();
    let mut next_snap = 0;
    let mut take_snapshots =
        |t: f64, psi: &[Vec<Complex64>; 2], force: bool, snapshots: &mut Vec<GridState>| {
            while next_snap < snap_times.len() && (snap_times[next_snap] <= t || force) {
                snapshots.push(GridState {
                    grid: solver.grid.clone(),
                    psi: psi.clone(),
                    t,
                });
                next_snap += 1;
            }
        };
    take_snapshots(0.0, &psi, false, &mut snapshots);

    let mut steps = 0;
    for (start, end, n) in step_plan(&config, opts, spec.dt) {
        let dt = (end - start) / n as f64;
        let phases = solver.kinetic_phases(dt);
        for s in 0..n {
            let t0 = start + dt * s as f64;
            let t1 = if s + 1 == n { end } else { t0 + dt };
            let t_mid = 0.5 * (t0 + t1);
            let v = solver.potentials(&psi, &pm, t_mid)?;
            let [a, b] = &mut psi;
            opts.exec.join(
                || {
                    solver.kick(a, &v[0], 0.5 * dt);
                    solver.drift(a, &phases);
                },
                || {
                    solver.kick(b, &v[1], 0.5 * dt);
                    solver.drift(b, &phases);
                },
            );
            pm = [position_moments(g, &psi[0]), position_moments(g, &psi[1])];
            let v = solver.potentials(&psi, &pm, t_mid)?;
            let [a, b] = &mut psi;
            opts.exec.join(
                || solver.kick(a, &v[0], 0.5 * dt),
                || solver.kick(b, &v[1], 0.5 * dt),
            );
            steps += 1;

            for i in 0..2 {
                let edge = solver.edge_mass(&psi[i]);
                if edge > EDGE_MASS_LIMIT {
                    return Err(OracleError::GridEscape {
                        t: t1,
                        branch: BRANCHES[i],
                        edge_mass: edge,
                    });
                }
            }
            let phase = tracker.update(t1, raw_phases(g, &psi, &pm, t1)?)?;
            history.push(GridRecord {
                t: t1,
                mean_z: [pm[0].mean_z, pm[1].mean_z],
                q: [pm[0].q, pm[1].q],
                norm: [pm[0].norm, pm[1].norm],
                phase,
            });
            take_snapshots(t1, &psi, false, &mut snapshots);
        }
    }
    let t_end = config.protocol.t5;
    take_snapshots(t_end, &psi, true, &mut snapshots);
    Ok(GridRun {
        history,
        snapshots,
        final_state: GridState {
            grid: solver.grid.clone(),
            psi,
            t: t_end,
        },
        steps,
    })
}
