//! Frenkel-Kontorova ion model: Coulomb chain in a harmonic trap plus a sinusoidal lattice.

use crate::chain_statics::{self, StaticsError};
use crate::foundation::{consts, coulomb_constant, IonSpecies, TrapConfig};
use nalgebra::{DMatrix, DVector, SymmetricEigen};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use std::f64::consts::{PI, TAU};
use thiserror::Error;

pub const GOLDEN: f64 = 1.618_033_988_749_895;

#[derive(Debug, Error)]
pub enum FkError {
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("minimizer did not converge (gradient norm {residual:e} after {iterations} iterations)")]
    NoConvergence { residual: f64, iterations: usize },
    #[error("configuration is not a minimum (lowest Hessian eigenvalue {0:e})")]
    NotMinimum(f64),
    #[error("tuning needs at least 12 ions, got {0}")]
    TooFew(usize),
    #[error(transparent)]
    Statics(#[from] StaticsError),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FkConfig {
    pub n: usize,
    pub nu_tilde: f64,
    pub k_tilde: f64,
    /// Lattice phase φ in −K̃ cos(z̃ + φ).
    pub phase: f64,
}

impl FkConfig {
    pub fn new(n: usize, nu_tilde: f64, k_tilde: f64) -> Result<Self, FkError> {
        if n < 3 || !(nu_tilde > 0.0) || !(k_tilde >= 0.0) {
            return Err(FkError::Config(format!("N={n}, ν̃={nu_tilde}, K̃={k_tilde}")));
        }
        Ok(FkConfig { n, nu_tilde, k_tilde, phase: 0.0 })
    }

    pub fn with_k(self, k_tilde: f64) -> Self {
        FkConfig { k_tilde, ..self }
    }

    pub fn with_phase(self, phase: f64) -> Self {
        FkConfig { phase, ..self }
    }
}

/// Scales linking SI quantities to the dimensionless model.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FkUnits {
    /// Lattice period d in m.
    pub period: f64,
    /// d̃ = d/2π, the length unit.
    pub length: f64,
    /// e²/(4πε₀ d̃) in J.
    pub energy: f64,
    pub nu_tilde: f64,
    pub hbar_eff: f64,
}

impl FkUnits {
    pub fn new(species: &IonSpecies, trap: &TrapConfig, period: f64) -> Result<Self, FkError> {
        if !(period > 0.0) {
            return Err(FkError::Config(format!("lattice period {period}")));
        }
        let length = period / TAU;
        let ke2 = coulomb_constant(species);
        let energy = ke2 / length;
        let m = species.mass();
        let nu_tilde = (m * trap.nu_z * trap.nu_z * length.powi(3) / ke2).sqrt();
        let hbar_eff = consts::REDUCED_PLANCK / (m * ke2 * length).sqrt();
        Ok(FkUnits { period, length, energy, nu_tilde, hbar_eff })
    }

    pub fn k_tilde(&self, strength: f64) -> f64 {
        strength / self.energy
    }

    pub fn depth_kelvin(&self, k_tilde: f64) -> f64 {
        k_tilde * self.energy / consts::BOLTZMANN
    }
}

/// Units and configuration for a lattice −K cos(2πz/d) of strength `strength` (J).
pub fn dimensionless_transform(
    n: usize,
    species: &IonSpecies,
    trap: &TrapConfig,
    period: f64,
    strength: f64,
) -> Result<(FkConfig, FkUnits), FkError> {
    let units = FkUnits::new(species, trap, period)?;
    Ok((FkConfig::new(n, units.nu_tilde, units.k_tilde(strength))?, units))
}

pub fn energy(z: &[f64], c: &FkConfig) -> f64 {
    let mut e = 0.0;
    for i in 0..z.len() {
        e += 0.5 * c.nu_tilde * c.nu_tilde * z[i] * z[i] - c.k_tilde * (z[i] + c.phase).cos();
        for j in i + 1..z.len() {
            e += 1.0 / (z[j] - z[i]).abs();
        }
    }
    e
}

pub fn gradient(z: &[f64], c: &FkConfig) -> Vec<f64> {
    let n = z.len();
    (0..n)
        .map(|i| {
            let mut g = c.nu_tilde * c.nu_tilde * z[i] + c.k_tilde * (z[i] + c.phase).sin();
            for j in 0..n {
                if j != i {
                    let d = z[i] - z[j];
                    g -= d.signum() / (d * d);
                }
            }
            g
        })
        .collect()
}

pub fn hessian(z: &[f64], c: &FkConfig) -> DMatrix<f64> {
    let n = z.len();
    let mut h = DMatrix::zeros(n, n);
    for i in 0..n {
        let mut diag = c.nu_tilde * c.nu_tilde + c.k_tilde * (z[i] + c.phase).cos();
        for j in 0..n {
            if j != i {
                let k = 2.0 / (z[i] - z[j]).abs().powi(3);
                h[(i, j)] = -k;
                diag += k;
            }
        }
        h[(i, i)] = diag;
    }
    h
}

#[derive(Debug, Clone)]
pub struct FkState {
    pub config: FkConfig,
    pub positions: Vec<f64>,
    pub energy: f64,
    pub gradient_norm: f64,
    /// Energy after each accepted minimizer step.
    pub energy_trace: Vec<f64>,
}

fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

/// Saddle-free Newton: the Hessian's eigenvalues are replaced by their magnitudes, so every
/// direction is a descent direction.
fn minimize(mut z: Vec<f64>, c: &FkConfig) -> Result<FkState, FkError> {
    const MAX_ITER: usize = 2000;
    let mut e = energy(&z, c);
    let mut trace = vec![e];
    let mut gnorm = f64::INFINITY;
    for _ in 0..MAX_ITER {
        let g = gradient(&z, c);
        gnorm = norm(&g);
        if gnorm < 1e-10 {
            break;
        }
        let eig = SymmetricEigen::new(hessian(&z, c));
        let gv = DVector::from_column_slice(&g);
        let proj = eig.eigenvectors.transpose() * &gv;
        let floor = 1e-8 * eig.eigenvalues.amax().max(1.0);
        let scaled = DVector::from_iterator(proj.len(), proj.iter().zip(eig.eigenvalues.iter()).map(|(p, l)| -p / l.abs().max(floor)));
        let dir = &eig.eigenvectors * scaled;
        let mut step = 1.0;
        let mut accepted = false;
        for _ in 0..60 {
            let trial: Vec<f64> = z.iter().zip(dir.iter()).map(|(a, d)| a + step * d).collect();
            if trial.windows(2).all(|w| w[1] > w[0]) {
                let et = energy(&trial, c);
                let ok = et <= e || (gnorm < 1e-6 && et <= e + 1e-13 * e.abs() && norm(&gradient(&trial, c)) < gnorm);
                if ok {
                    z = trial;
                    e = et.min(e);
                    trace.push(et);
                    accepted = true;
                    break;
                }
            }
            step *= 0.5;
        }
        if !accepted {
            break;
        }
    }
    if gnorm < 1e-9 {
        Ok(FkState { config: *c, energy: energy(&z, c), positions: z, gradient_norm: gnorm, energy_trace: trace })
    } else {
        Err(FkError::NoConvergence { residual: gnorm, iterations: MAX_ITER })
    }
}

fn lowest_eigen(z: &[f64], c: &FkConfig) -> (f64, Vec<f64>) {
    let eig = SymmetricEigen::new(hessian(z, c));
    let k = eig.eigenvalues.imin();
    (eig.eigenvalues[k], eig.eigenvectors.column(k).iter().cloned().collect())
}

/// K̃ = 0 equilibrium in z̃ units, from the harmonic-trap chain solver.
pub fn coulomb_chain(n: usize, nu_tilde: f64) -> Result<Vec<f64>, FkError> {
    let u = chain_statics::solve_scaled(&vec![1.0; n], &vec![0.0; n])?;
    let zeta = nu_tilde.powf(-2.0 / 3.0);
    Ok(u.iter().map(|x| x * zeta).collect())
}

/// Local minimum starting from `seed` (default: the K̃ = 0 chain). Converged saddles are
/// pushed off along the unstable direction and re-minimized.
pub fn ground_state(config: &FkConfig, seed: Option<&[f64]>) -> Result<FkState, FkError> {
    let start = match seed {
        Some(s) if s.len() == config.n => s.to_vec(),
        Some(s) => return Err(FkError::Config(format!("seed has {} positions for N={}", s.len(), config.n))),
        None => coulomb_chain(config.n, config.nu_tilde)?,
    };
    let mut state = minimize(start, config)?;
    for _ in 0..10 {
        let (lambda, v) = lowest_eigen(&state.positions, config);
        if lambda > 0.0 {
            return Ok(state);
        }
        let pushed: Vec<f64> = state.positions.iter().zip(&v).map(|(z, d)| z + 1e-3 * d).collect();
        let mut next = minimize(pushed, config)?;
        next.energy_trace.splice(0..0, state.energy_trace.iter().cloned());
        state = next;
    }
    Err(FkError::NotMinimum(lowest_eigen(&state.positions, config).0))
}

/// Lowest-energy local minimum over the seed and `restarts` Gaussian perturbations of it.
pub fn ground_state_search(config: &FkConfig, seed: &[f64], restarts: usize, rng_seed: u64) -> Result<FkState, FkError> {
    let mut rng = ChaCha8Rng::seed_from_u64(rng_seed);
    let mut best = ground_state(config, Some(seed))?;
    for _ in 0..restarts {
        let mut trial: Vec<f64> = seed.iter().map(|z| z + 0.5 * gaussian(&mut rng)).collect();
        trial.sort_by(f64::total_cmp);
        if trial.windows(2).any(|w| w[1] - w[0] < 1e-3) {
            continue;
        }
        if let Ok(s) = ground_state(config, Some(&trial)) {
            if s.energy < best.energy {
                best = s;
            }
        }
    }
    Ok(best)
}

fn gaussian<R: Rng>(rng: &mut R) -> f64 {
    let (u1, u2): (f64, f64) = (rng.gen::<f64>().max(f64::MIN_POSITIVE), rng.gen());
    (-2.0 * u1.ln()).sqrt() * (TAU * u2).cos()
}

pub fn central_third(n: usize) -> std::ops::Range<usize> {
    n / 3..n - n / 3
}

pub fn central_spacing(z: &[f64]) -> f64 {
    let r = central_third(z.len());
    (z[r.end - 1] - z[r.start]) / (r.len() - 1) as f64
}

/// ν̃ for which the K̃ = 0 central-third spacing equals `ratio` lattice periods. Chain lengths
/// scale as ν̃^{−2/3}, so the solution is closed-form given the unit-trap chain.
pub fn golden_mean_tuning(n: usize, ratio: f64) -> Result<f64, FkError> {
    if n < 12 {
        return Err(FkError::TooFew(n));
    }
    if !(ratio > 0.0) {
        return Err(FkError::Config(format!("density ratio {ratio}")));
    }
    let unit = central_spacing(&coulomb_chain(n, 1.0)?);
    Ok((unit / (TAU * ratio)).powf(1.5))
}

/// Lattice period giving `ratio` lattice periods per central ion spacing.
pub fn golden_period(spacing: f64, ratio: f64) -> f64 {
    spacing / ratio
}

/// Angle α between each beam and the trap axis for which λ/(2 cos α) equals the period.
pub fn beam_angle(wavelength: f64, period: f64) -> Result<f64, FkError> {
    let c = wavelength / (2.0 * period);
    if c > 1.0 {
        return Err(FkError::Config(format!("period {period} below λ/2")));
    }
    Ok(c.acos())
}

#[derive(Debug, Clone)]
pub struct Hull {
    /// (z̃⁰ mod 2π, z̃ mod 2π) over the central third, sorted by the first entry.
    pub samples: Vec<(f64, f64)>,
    pub max_gap: f64,
}

/// Largest circular gap between the central-third positions mod 2π.
pub fn hull_function(state: &FkState, reference: &FkState) -> Result<Hull, FkError> {
    if state.positions.len() != reference.positions.len() {
        return Err(FkError::Config("hull needs equal ion numbers".into()));
    }
    let r = central_third(state.positions.len());
    let wrap = |z: f64| z.rem_euclid(TAU);
    let mut samples: Vec<(f64, f64)> = r.clone().map(|i| (wrap(reference.positions[i]), wrap(state.positions[i]))).collect();
    samples.sort_by(|a, b| a.0.total_cmp(&b.0));
    let mut image: Vec<f64> = samples.iter().map(|s| s.1).collect();
    image.sort_by(f64::total_cmp);
    let mut max_gap = image[0] + TAU - image[image.len() - 1];
    for w in image.windows(2) {
        max_gap = max_gap.max(w[1] - w[0]);
    }
    Ok(Hull { samples, max_gap })
}

pub fn phonon_spectrum(state: &FkState) -> Result<Vec<f64>, FkError> {
    let eig = SymmetricEigen::new(hessian(&state.positions, &state.config));
    let mut v: Vec<f64> = eig.eigenvalues.iter().cloned().collect();
    v.sort_by(f64::total_cmp);
    if v[0] <= 0.0 {
        return Err(FkError::NotMinimum(v[0]));
    }
    Ok(v.into_iter().map(f64::sqrt).collect())
}

/// F(k) = |Σ_n e^{ikz_n}|²/N.
pub fn form_factor(positions: &[f64], k_grid: &[f64]) -> Vec<f64> {
    let n = positions.len() as f64;
    k_grid
        .iter()
        .map(|&k| {
            let (c, s) = positions.iter().fold((0.0, 0.0), |(c, s), z| (c + (k * z).cos(), s + (k * z).sin()));
            (c * c + s * s) / n
        })
        .collect()
}

#[derive(Debug, Clone)]
pub struct AubryPoint {
    pub k_tilde: f64,
    pub max_gap: f64,
    /// Lowest mode frequency relative to the K̃ = 0 chain.
    pub spectral_gap: f64,
    pub energy: f64,
    pub positions: Vec<f64>,
}

#[derive(Debug, Clone)]
pub struct AubryScan {
    pub nu_tilde: f64,
    pub points: Vec<AubryPoint>,
    pub baseline: f64,
    pub threshold: f64,
    pub critical: Option<f64>,
}

/// Geometric K̃ scan with continuation. K_c is where the hull max-gap first exceeds
/// `factor` × its value at the first scan point, interpolated in ln K̃.
pub fn aubry_scan(n: usize, ratio: f64, k_values: &[f64], factor: f64, restarts: usize, seed: u64) -> Result<AubryScan, FkError> {
    if k_values.is_empty() {
        return Err(FkError::Config("empty K̃ scan".into()));
    }
    let nu = golden_mean_tuning(n, ratio)?;
    let base_cfg = FkConfig::new(n, nu, 0.0)?;
    let reference = ground_state(&base_cfg, None)?;
    let w0 = phonon_spectrum(&reference)?[0];
    let mut seed_pos = reference.positions.clone();
    let mut points = Vec::with_capacity(k_values.len());
    for (i, &k) in k_values.iter().enumerate() {
        let s = ground_state_search(&base_cfg.with_k(k), &seed_pos, restarts, seed.wrapping_add(i as u64))?;
        let hull = hull_function(&s, &reference)?;
        let spectral_gap = phonon_spectrum(&s)?[0] / w0;
        seed_pos = s.positions.clone();
        points.push(AubryPoint { k_tilde: k, max_gap: hull.max_gap, spectral_gap, energy: s.energy, positions: s.positions });
    }
    let baseline = points[0].max_gap;
    let threshold = factor * baseline;
    let critical = points.windows(2).find_map(|w| {
        (w[0].max_gap <= threshold && w[1].max_gap > threshold).then(|| {
            let f = (threshold - w[0].max_gap) / (w[1].max_gap - w[0].max_gap);
            (w[0].k_tilde.ln() + f * (w[1].k_tilde.ln() - w[0].k_tilde.ln())).exp()
        })
    });
    Ok(AubryScan { nu_tilde: nu, points, baseline, threshold, critical })
}

pub fn geometric_grid(from: f64, to: f64, count: usize) -> Vec<f64> {
    if count < 2 {
        return vec![from];
    }
    (0..count).map(|i| from * (to / from).powf(i as f64 / (count - 1) as f64)).collect()
}

/// Nearest lattice minimum offset of each ion, in z̃ units.
pub fn pinning_offsets(state: &FkState) -> Vec<f64> {
    state
        .positions
        .iter()
        .map(|z| {
            let x = (z + state.config.phase).rem_euclid(TAU);
            if x > PI {
                TAU - x
            } else {
                x
            }
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn gradient_and_hessian_consistent() {
        let c = FkConfig::new(5, 0.3, 0.2).unwrap().with_phase(0.4);
        let z = vec![-3.0, -1.2, 0.1, 1.5, 3.3];
        let g = gradient(&z, &c);
        let h = hessian(&z, &c);
        let eps = 1e-6;
        for i in 0..5 {
            let mut zp = z.clone();
            let mut zm = z.clone();
            zp[i] += eps;
            zm[i] -= eps;
            assert!(((energy(&zp, &c) - energy(&zm, &c)) / (2.0 * eps) - g[i]).abs() < 1e-7);
            let gp = gradient(&zp, &c);
            let gm = gradient(&zm, &c);
            for j in 0..5 {
                assert!(((gp[j] - gm[j]) / (2.0 * eps) - h[(i, j)]).abs() < 1e-6);
            }
        }
    }

    #[test]
    fn form_factor_limits() {
        let periodic: Vec<f64> = (0..20).map(|i| TAU * i as f64).collect();
        let f = form_factor(&periodic, &[1.0, 2.0]);
        assert!((f[0] - 20.0).abs() < 1e-9 && (f[1] - 20.0).abs() < 1e-9);
        assert!(form_factor(&[0.7], &[0.1, 3.0, 17.0]).iter().all(|&x| (x - 1.0).abs() < 1e-15));
    }

    #[test]
    fn beam_geometry() {
        let d = golden_period(5e-6, GOLDEN);
        assert!((d / 3.1e-6 - 1.0).abs() < 0.03);
        let a = beam_angle(1064e-9, d).unwrap().to_degrees();
        assert!((a - 80.0).abs() < 1.0, "{a}");
        assert!(beam_angle(1064e-9, 1e-7).is_err());
    }
}
