//! Adaptive Dormand–Prince 5(4) integrator for real state vectors, with
//! optional location of a sign change of a scalar event function.

use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum OdeError {
    #[error("step size underflow at t = {t} s (h = {h:e}); state = {state:?}")]
    StepUnderflow { t: f64, h: f64, state: Vec<f64> },
    #[error("step budget of {max_steps} exhausted at t = {t} s; state = {state:?}")]
    TooManySteps {
        t: f64,
        max_steps: usize,
        state: Vec<f64>,
    },
    #[error("non-finite derivative at t = {t} s; state = {state:?}")]
    NonFinite { t: f64, state: Vec<f64> },
}

#[derive(Clone, Debug, PartialEq)]
pub struct OdeOptions {
    pub rtol: f64,
    /// Absolute tolerance per component; a single entry applies to all.
    pub atol: Vec<f64>,
    pub max_steps: usize,
    pub initial_step: Option<f64>,
}

impl Default for OdeOptions {
    fn default() -> Self {
        OdeOptions {
            rtol: 1e-10,
            atol: vec![1e-14],
            max_steps: 2_000_000,
            initial_step: None,
        }
    }
}

impl OdeOptions {
    fn atol(&self, i: usize) -> f64 {
        if self.atol.len() == 1 {
            self.atol[0]
        } else {
            self.atol[i]
        }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct OdeStats {
    pub accepted: usize,
    pub rejected: usize,
    pub evaluations: usize,
}

impl std::ops::AddAssign for OdeStats {
    fn add_assign(&mut self, o: OdeStats) {
        self.accepted += o.accepted;
        self.rejected += o.rejected;
        self.evaluations += o.evaluations;
    }
}

/// Where an integration stopped.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Outcome {
    pub t: f64,
    /// True if the event function changed sign and integration stopped there.
    pub event: bool,
    pub stats: OdeStats,
}

const C: [f64; 6] = [0.2, 0.3, 0.8, 8.0 / 9.0, 1.0, 1.0];
const A2: [f64; 1] = [0.2];
const A3: [f64; 2] = [3.0 / 40.0, 9.0 / 40.0];
const A4: [f64; 3] = [44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0];
const A5: [f64; 4] = [
    19372.0 / 6561.0,
    -25360.0 / 2187.0,
    64448.0 / 6561.0,
    -212.0 / 729.0,
];
const A6: [f64; 5] = [
    9017.0 / 3168.0,
    -355.0 / 33.0,
    46732.0 / 5247.0,
    49.0 / 176.0,
    -5103.0 / 18656.0,
];
const B: [f64; 6] = [
    35.0 / 384.0,
    0.0,
    500.0 / 1113.0,
    125.0 / 192.0,
    -2187.0 / 6784.0,
    11.0 / 84.0,
];
const E: [f64; 7] = [
    71.0 / 57600.0,
    0.0,
    -71.0 / 16695.0,
    71.0 / 1920.0,
    -17253.0 / 339200.0,
    22.0 / 525.0,
    -1.0 / 40.0,
];

struct Stepper<F> {
    rhs: F,
    k: [Vec<f64>; 7],
    tmp: Vec<f64>,
    evaluations: usize,
}

impl<F: FnMut(f64, &[f64], &mut [f64])> Stepper<F> {
    fn new(rhs: F, n: usize) -> Self {
        Stepper {
            rhs,
            k: std::array::from_fn(|_| vec![0.0; n]),
            tmp: vec![0.0; n],
            evaluations: 0,
        }
    }

    fn eval(&mut self, t: f64, y: &[f64], slot: usize) -> Result<(), OdeError> {
        let mut out = std::mem::take(&mut self.k[slot]);
        (self.rhs)(t, y, &mut out);
        self.evaluations += 1;
        let finite = out.iter().all(|v| v.is_finite());
        self.k[slot] = out;
        if finite {
            Ok(())
        } else {
            Err(OdeError::NonFinite {
                t,
                state: y.to_vec(),
            })
        }
    }

    /// One step from `(t, y)` with `k[0] = f(t, y)` already set. Writes the
    /// fifth-order solution to `out` and `k[6] = f(t+h, out)`; returns the
    /// embedded error estimate per component in `err`.
    fn step(
        &mut self,
        t: f64,
        y: &[f64],
        h: f64,
        out: &mut [f64],
        err: &mut [f64],
    ) -> Result<(), OdeError> {
        let n = y.len();
        let rows: [&[f64]; 5] = [&A2, &A3, &A4, &A5, &A6];
        for (stage, row) in rows.iter().enumerate() {
            for i in 0..n {
                let mut acc = 0.0;
                for (j, a) in row.iter().enumerate() {
                    acc += a * self.k[j][i];
                }
                self.tmp[i] = y[i] + h * acc;
            }
            let tmp = std::mem::take(&mut self.tmp);
            let r = self.eval(t + C[stage] * h, &tmp, stage + 1);
            self.tmp = tmp;
            r?;
        }
        for i in 0..n {
            let mut acc = 0.0;
            for (j, b) in B.iter().enumerate() {
                acc += b * self.k[j][i];
            }
            out[i] = y[i] + h * acc;
        }
        self.eval(t + h, out, 6)?;
        for i in 0..n {
            let mut acc = 0.0;
            for (j, e) in E.iter().enumerate() {
                acc += e * self.k[j][i];
            }
            err[i] = h * acc;
        }
        Ok(())
    }
}

fn error_norm(y: &[f64], y_new: &[f64], err: &[f64], opts: &OdeOptions) -> f64 {
    let n = y.len();
    let mut sum = 0.0;
    for i in 0..n {
        let scale = opts.atol(i) + opts.rtol * y[i].abs().max(y_new[i].abs());
        let r = err[i] / scale;
        sum += r * r;
    }
    (sum / n as f64).sqrt()
}

/// Advances `y` from `t0` to `t1` (`t1 > t0`).
pub fn integrate<F>(
    rhs: F,
    t0: f64,
    t1: f64,
    y: &mut [f64],
    opts: &OdeOptions,
) -> Result<OdeStats, OdeError>
where
    F: FnMut(f64, &[f64], &mut [f64]),
{
    integrate_until(rhs, t0, t1, y, opts, None::<fn(f64, &[f64]) -> f64>).map(|o| o.stats)
}

/// Advances `y` from `t0` towards `t1`, stopping early just past the first
/// sign change of `event(t, y)` if one is given. The crossing is bracketed
/// by re-stepping from the start of the offending step and bisecting the
/// step length.
pub fn integrate_until<F, G>(
    rhs: F,
    t0: f64,
    t1: f64,
    y: &mut [f64],
    opts: &OdeOptions,
    mut event: Option<G>,
) -> Result<Outcome, OdeError>
where
    F: FnMut(f64, &[f64], &mut [f64]),
    G: FnMut(f64, &[f64]) -> f64,
{
    let n = y.len();
    assert!(
        opts.atol.len() == 1 || opts.atol.len() == n,
        "atol must have 1 or {n} entries"
    );
    let mut stats = OdeStats::default();
    if t1 <= t0 {
        return Ok(Outcome {
            t: t0,
            event: false,
            stats,
        });
    }
    let mut st = Stepper::new(rhs, n);
    let mut t = t0;
    st.eval(t, y, 0)?;
    let mut g_prev = event.as_mut().map(|g| g(t, y));

    let span = t1 - t0;
    let mut h = match opts.initial_step {
        Some(h) => h,
        None => initial_step(&mut st, t, y, span, opts)?,
    }
    .min(span);

    let mut y_new = vec![0.0; n];
    let mut err = vec![0.0; n];
    let mut last_rejected = false;
    loop {
        if stats.accepted + stats.rejected >= opts.max_steps {
            return Err(OdeError::TooManySteps {
                t,
                max_steps: opts.max_steps,
                state: y.to_vec(),
            });
        }
        let remaining = t1 - t;
        let finishing = h >= remaining * (1.0 - 1e-12);
        let h_try = if finishing { remaining } else { h };
        if h_try <= 16.0 * f64::EPSILON * t.abs().max(span) {
            return Err(OdeError::StepUnderflow {
                t,
                h: h_try,
                state: y.to_vec(),
            });
        }
        st.step(t, y, h_try, &mut y_new, &mut err)?;
        let e = error_norm(y, &y_new, &err, opts);
        if e <= 1.0 {
            stats.accepted += 1;
            let t_new = if finishing { t1 } else { t + h_try };
            if let (Some(g), Some(g0)) = (event.as_mut(), g_prev) {
                let g1 = g(t_new, &y_new);
                if crossed(g0, g1) {
                    let t_hit = locate(&mut st, &mut *g, t, y, h_try, g0, &mut y_new, &mut err)?;
                    y.copy_from_slice(&y_new);
                    stats.evaluations = st.evaluations;
                    return Ok(Outcome {
                        t: t_hit,
                        event: true,
                        stats,
                    });
                }
                g_prev = Some(g1);
            }
            y.copy_from_slice(&y_new);
            t = t_new;
            let k6 = std::mem::take(&mut st.k[6]);
            st.k[0].copy_from_slice(&k6);
            st.k[6] = k6;
            if finishing {
                stats.evaluations = st.evaluations;
                return Ok(Outcome {
                    t,
                    event: false,
                    stats,
                });
            }
            let mut fac = 0.9 * e.max(1e-10).powf(-0.2);
            fac = fac.clamp(0.2, 10.0);
            if last_rejected {
                fac = fac.min(1.0);
            }
            h = h_try * fac;
            last_rejected = false;
        } else {
            stats.rejected += 1;
            h = h_try * (0.9 * e.powf(-0.2)).max(0.1);
            last_rejected = true;
        }
    }
}

fn crossed(g0: f64, g1: f64) -> bool {
    (g0 < 0.0 && g1 >= 0.0) || (g0 > 0.0 && g1 <= 0.0)
}

/// Bisects the step length so that `y_new` ends just past the crossing.
/// Returns the crossing time.
#[allow(clippy::too_many_arguments)]
fn locate<F, G>(
    st: &mut Stepper<F>,
    g: &mut G,
    t: f64,
    y: &[f64],
    h: f64,
    g0: f64,
    y_new: &mut [f64],
    err: &mut [f64],
) -> Result<f64, OdeError>
where
    F: FnMut(f64, &[f64], &mut [f64]),
    G: FnMut(f64, &[f64]) -> f64,
{
    let k0 = st.k[0].clone();
    let (mut lo, mut hi) = (0.0_f64, h);
    let tol = 4.0 * f64::EPSILON * t.abs().max(h);
    while hi - lo > tol {
        let mid = 0.5 * (lo + hi);
        st.k[0].copy_from_slice(&k0);
        st.step(t, y, mid, y_new, err)?;
        if crossed(g0, g(t + mid, y_new)) {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    st.k[0].copy_from_slice(&k0);
    st.step(t, y, hi, y_new, err)?;
    Ok(t + hi)
}

fn initial_step<F>(
    st: &mut Stepper<F>,
    t: f64,
    y: &[f64],
    span: f64,
    opts: &OdeOptions,
) -> Result<f64, OdeError>
where
    F: FnMut(f64, &[f64], &mut [f64]),
{
    let n = y.len();
    let norm = |v: &dyn Fn(usize) -> f64| {
        let mut s = 0.0;
        for i in 0..n {
            let sc = opts.atol(i) + opts.rtol * y[i].abs();
            s += (v(i) / sc).powi(2);
        }
        (s / n as f64).sqrt()
    };
    let d0 = norm(&|i| y[i]);
    let d1 = norm(&|i| st.k[0][i]);
    let h0 = if d0 < 1e-5 || d1 < 1e-5 {
        1e-6 * span
    } else {
        0.01 * d0 / d1
    }
    .min(span);
    let y1: Vec<f64> = (0..n).map(|i| y[i] + h0 * st.k[0][i]).collect();
    st.eval(t + h0, &y1, 1)?;
    let d2 = norm(&|i| st.k[1][i] - st.k[0][i]) / h0;
    let h1 = if d1.max(d2) <= 1e-15 {
        (h0 * 1e-3).max(1e-6 * span)
    } else {
        (0.01 / d1.max(d2)).powf(0.2)
    };
    Ok((100.0 * h0).min(h1).min(span))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exponential_decay() {
        let mut y = [1.0];
        let stats = integrate(
            |_, y, d| d[0] = -y[0],
            0.0,
            5.0,
            &mut y,
            &OdeOptions::default(),
        )
        .unwrap();
        assert!((y[0] - (-5.0f64).exp()).abs() < 1e-11);
        assert!(stats.accepted > 10);
    }

    #[test]
    fn harmonic_oscillator_long_run() {
        let mut y = [1.0, 0.0];
        let opts = OdeOptions {
            rtol: 1e-12,
            atol: vec![1e-14],
            ..Default::default()
        };
        integrate(
            |_, y, d| {
                d[0] = y[1];
                d[1] = -y[0];
            },
            0.0,
            20.0,
            &mut y,
            &opts,
        )
        .unwrap();
        assert!((y[0] - 20f64.cos()).abs() < 1e-9);
        assert!((y[1] + 20f64.sin()).abs() < 1e-9);
    }

    #[test]
    fn event_located_precisely() {
        // falling body: z = 1 − t²/2 hits zero at √2
        let mut y = [1.0, 0.0];
        let out = integrate_until(
            |_, y, d| {
                d[0] = y[1];
                d[1] = -1.0;
            },
            0.0,
            10.0,
            &mut y,
            &OdeOptions::default(),
            Some(|_t: f64, y: &[f64]| y[0]),
        )
        .unwrap();
        assert!(out.event);
        assert!((out.t - 2f64.sqrt()).abs() < 1e-12);
        assert!(y[0] <= 0.0 && y[0] > -1e-12);
    }

    #[test]
    fn no_event_reaches_end() {
        let mut y = [1.0];
        let out = integrate_until(
            |_, _, d| d[0] = 1.0,
            0.0,
            1.0,
            &mut y,
            &OdeOptions::default(),
            Some(|_t: f64, y: &[f64]| y[0] + 10.0),
        )
        .unwrap();
        assert!(!out.event);
        assert_eq!(out.t, 1.0);
        assert!((y[0] - 2.0).abs() < 1e-14);
    }

    #[test]
    fn finite_time_blowup_underflows() {
        let mut y = [1.0];
        let err = integrate(
            |_, y, d| d[0] = y[0] * y[0],
            0.0,
            2.0,
            &mut y,
            &OdeOptions::default(),
        )
        .unwrap_err();
        match err {
            OdeError::StepUnderflow { t, .. } | OdeError::TooManySteps { t, .. } => {
                assert!(t < 1.0 && t > 0.99)
            }
            OdeError::NonFinite { t, .. } => assert!(t <= 1.0),
        }
    }

    #[test]
    fn fifth_order_convergence() {
        // fixed steps via tight initial step and loose tolerance are awkward;
        // check tolerance proportionality instead
        let run = |rtol: f64| {
            let mut y = [0.0, 1.0];
            let opts = OdeOptions {
                rtol,
                atol: vec![rtol],
                ..Default::default()
            };
            integrate(
                |t, y, d| {
                    d[0] = y[1];
                    d[1] = -y[0] + t.sin() * 0.1;
                },
                0.0,
                10.0,
                &mut y,
                &opts,
            )
            .unwrap();
            y[0]
        };
        let reference = run(1e-13);
        let coarse = (run(1e-6) - reference).abs();
        let fine = (run(1e-9) - reference).abs();
        assert!(fine < coarse);
        assert!(fine < 1e-7);
    }
}
