//! Uniform periodic grid, moments of a sampled wave function, and the
//! quadratic phase fit used to read off the global phase.

use num_complex::Complex64;
use rustfft::FftPlanner;

/// Uniform periodic grid `z_j = −L + j·dz`, `dz = 2L/N`.
#[derive(Clone, Debug, PartialEq)]
pub struct Grid {
    pub z: Vec<f64>,
    pub dz: f64,
    /// Angular wavenumbers in FFT order, m⁻¹.
    pub k: Vec<f64>,
}

impl Grid {
    pub fn new(n: usize, half_width: f64) -> Self {
        let dz = 2.0 * half_width / n as f64;
        let z = (0..n).map(|j| -half_width + j as f64 * dz).collect();
        let dk = 2.0 * std::f64::consts::PI / (n as f64 * dz);
        let k = (0..n)
            .map(|j| {
                let j = j as i64;
                let n = n as i64;
                (if j < n / 2 { j } else { j - n }) as f64 * dk
            })
            .collect();
        Grid { z, dz, k }
    }

    pub fn len(&self) -> usize {
        self.z.len()
    }

    pub fn is_empty(&self) -> bool {
        self.z.is_empty()
    }

    /// Largest representable wavenumber, `π/dz`.
    pub fn k_max(&self) -> f64 {
        std::f64::consts::PI / self.dz
    }
}

/// Normalised Gaussian of variance `q` centred at `z0` with wavenumber `k0`.
pub fn gaussian_packet(grid: &Grid, q: f64, z0: f64, k0: f64) -> Vec<Complex64> {
    let mut psi: Vec<Complex64> = grid
        .z
        .iter()
        .map(|&z| {
            let x = z - z0;
            Complex64::from_polar((-x * x / (4.0 * q)).exp(), k0 * x)
        })
        .collect();
    normalize(&mut psi, grid.dz);
    psi
}

pub fn normalize(psi: &mut [Complex64], dz: f64) {
    let n: f64 = psi.iter().map(|c| c.norm_sqr()).sum::<f64>() * dz;
    let s = 1.0 / n.sqrt();
    psi.iter_mut().for_each(|c| *c *= s);
}

#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct PositionMoments {
    pub norm: f64,
    pub mean_z: f64,
    pub q: f64,
}

pub fn position_moments(grid: &Grid, psi: &[Complex64]) -> PositionMoments {
    let (mut s0, mut s1) = (0.0, 0.0);
    for (z, c) in grid.z.iter().zip(psi) {
        let w = c.norm_sqr();
        s0 += w;
        s1 += w * z;
    }
    let mean = s1 / s0;
    let s2: f64 = grid
        .z
        .iter()
        .zip(psi)
        .map(|(z, c)| c.norm_sqr() * (z - mean) * (z - mean))
        .sum();
    PositionMoments {
        norm: s0 * grid.dz,
        mean_z: mean,
        q: s2 / s0,
    }
}

/// `(⟨p⟩, P)` from the spectral density of `ψ̂`.
pub fn momentum_moments(grid: &Grid, psi_hat: &[Complex64], hbar: f64) -> (f64, f64) {
    let (mut s0, mut s1) = (0.0, 0.0);
    for (k, c) in grid.k.iter().zip(psi_hat) {
        let w = c.norm_sqr();
        s0 += w;
        s1 += w * k;
    }
    let mean = s1 / s0;
    let s2: f64 = grid
        .k
        .iter()
        .zip(psi_hat)
        .map(|(k, c)| c.norm_sqr() * (k - mean) * (k - mean))
        .sum();
    (hbar * mean, hbar * hbar * s2 / s0)
}

/// Standard moments of a sampled branch.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct Moments {
    pub norm: f64,
    pub mean_z: f64,
    pub mean_p: f64,
    pub q: f64,
    pub p_var: f64,
}

pub fn moments(grid: &Grid, psi: &[Complex64], hbar: f64) -> Moments {
    let pm = position_moments(grid, psi);
    let mut hat = psi.to_vec();
    FftPlanner::new()
        .plan_fft_forward(hat.len())
        .process(&mut hat);
    let (mean_p, p_var) = momentum_moments(grid, &hat, hbar);
    Moments {
        norm: pm.norm,
        mean_z: pm.mean_z,
        mean_p,
        q: pm.q,
        p_var,
    }
}

/// Quadratic phase `c₀ + c₁x + c₂x²`, `x = (z − z_ref)/scale`, fitted to
/// the spatially unwrapped phase of a packet.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct QuadraticPhase {
    pub coeffs: [f64; 3],
    pub z_ref: f64,
    pub scale: f64,
}

impl QuadraticPhase {
    pub fn eval(&self, z: f64) -> f64 {
        let x = (z - self.z_ref) / self.scale;
        self.coeffs[0] + x * (self.coeffs[1] + x * self.coeffs[2])
    }
}

fn wrap(x: f64) -> f64 {
    let two_pi = 2.0 * std::f64::consts::PI;
    x - two_pi * (x / two_pi).round()
}

/// Weighted least-squares quadratic fit of `arg ψ` over the points within
/// four standard deviations of the mean, weights `|ψ|²`.
pub fn fit_quadratic_phase(
    grid: &Grid,
    psi: &[Complex64],
    pm: &PositionMoments,
) -> Option<QuadraticPhase> {
    let sigma = pm.q.sqrt();
    let n = psi.len();
    let centre = grid.z.iter().position(|&z| z >= pm.mean_z).unwrap_or(n - 1);
    let in_window = |j: usize| (grid.z[j] - pm.mean_z).abs() <= 4.0 * sigma;
    let mut phase = vec![0.0; n];
    phase[centre] = psi[centre].arg();
    let mut hi = centre;
    while hi + 1 < n && in_window(hi + 1) {
        phase[hi + 1] = phase[hi] + wrap(psi[hi + 1].arg() - psi[hi].arg());
        hi += 1;
    }
    let mut lo = centre;
    while lo > 0 && in_window(lo - 1) {
        phase[lo - 1] = phase[lo] + wrap(psi[lo - 1].arg() - psi[lo].arg());
        lo -= 1;
    }
    if hi - lo < 3 {
        return None;
    }
    // normal equations of the weighted fit
    let mut m = [[0.0; 3]; 3];
    let mut rhs = [0.0; 3];
    for j in lo..=hi {
        let w = psi[j].norm_sqr();
        let x = (grid.z[j] - pm.mean_z) / sigma;
        let basis = [1.0, x, x * x];
        for a in 0..3 {
            rhs[a] += w * basis[a] * phase[j];
            for b in 0..3 {
                m[a][b] += w * basis[a] * basis[b];
            }
        }
    }
    solve3(m, rhs).map(|coeffs| QuadraticPhase {
        coeffs,
        z_ref: pm.mean_z,
        scale: sigma,
    })
}

fn solve3(mut m: [[f64; 3]; 3], mut r: [f64; 3]) -> Option<[f64; 3]> {
    for col in 0..3 {
        let pivot = (col..3).max_by(|&a, &b| m[a][col].abs().total_cmp(&m[b][col].abs()))?;
        if m[pivot][col] == 0.0 {
            return None;
        }
        m.swap(col, pivot);
        r.swap(col, pivot);
        for row in col + 1..3 {
            let f = m[row][col] / m[col][col];
            for c in col..3 {
                m[row][c] -= f * m[col][c];
            }
            r[row] -= f * r[col];
        }
    }
    let mut x = [0.0; 3];
    for row in (0..3).rev() {
        let mut s = r[row];
        for c in row + 1..3 {
            s -= m[row][c] * x[c];
        }
        x[row] = s / m[row][row];
    }
    Some(x)
}

#[cfg(test)]
mod tests {
    use super::*;

    const HBAR: f64 = 1e-34;

    #[test]
    fn grid_is_mirror_symmetric() {
        let g = Grid::new(64, 3.0);
        for j in 1..64 {
            assert!((g.z[j] + g.z[64 - j]).abs() < 1e-14);
        }
        assert_eq!(g.k[1], -g.k[63]);
    }

    #[test]
    fn initial_gaussian_moments() {
        let g = Grid::new(1024, 1e-9);
        let q = (5e-11f64).powi(2);
        let psi = gaussian_packet(&g, q, 0.0, 0.0);
        let m = moments(&g, &psi, HBAR);
        assert!((m.norm - 1.0).abs() < 1e-14);
        assert!(m.mean_z.abs() < 1e-24);
        assert!((m.q / q - 1.0).abs() < 1e-12);
        assert!(m.mean_p.abs() < 1e-12 * HBAR / q.sqrt(), "{}", m.mean_p);
        assert!((m.p_var / (HBAR * HBAR / (4.0 * q)) - 1.0).abs() < 1e-10);
        assert!(m.q * m.p_var >= HBAR * HBAR / 4.0 * (1.0 - 1e-6));
    }

    #[test]
    fn translated_and_boosted() {
        let g = Grid::new(2048, 1e-9);
        let q = (4e-11f64).powi(2);
        let a = 2.3e-10;
        let k0 = 3.0e10;
        let psi = gaussian_packet(&g, q, a, k0);
        let m = moments(&g, &psi, HBAR);
        assert!((m.mean_z - a).abs() < 1e-22);
        assert!((m.q / q - 1.0).abs() < 1e-12);
        assert!((m.mean_p / (HBAR * k0) - 1.0).abs() < 1e-10);
    }

    #[test]
    fn quadratic_phase_recovered() {
        let g = Grid::new(2048, 1e-9);
        let q = (4e-11f64).powi(2);
        let z0 = 3e-10;
        let (c0, c1, c2) = (1.3, 2.0e10, -4.0e19);
        let psi: Vec<Complex64> =
            g.z.iter()
                .map(|&z| {
                    let x = z - z0;
                    Complex64::from_polar((-x * x / (4.0 * q)).exp(), c0 + c1 * z + c2 * z * z)
                })
                .collect();
        let pm = position_moments(&g, &psi);
        let fit = fit_quadratic_phase(&g, &psi, &pm).unwrap();
        let at0 = fit.eval(0.0);
        assert!((wrap(at0 - c0)).abs() < 1e-9, "{at0}");
        let z = z0 + 1e-11;
        assert!((wrap(fit.eval(z) - (c0 + c1 * z + c2 * z * z))).abs() < 1e-9);
    }
}
