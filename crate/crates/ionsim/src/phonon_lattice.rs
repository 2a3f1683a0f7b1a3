//! Transverse-phonon Bose-Hubbard model, sideband read-out and the hardcore XY ladder.

use crate::chain_statics::ChainEquilibrium;
use crate::foundation::{consts, coulomb_constant, IonSpecies};
use crate::linalg::{self, Csr, LinalgError};
use num_complex::Complex64 as C64;
use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;
use std::collections::HashMap;
use thiserror::Error;

pub const DEFAULT_SECTOR_CAP: usize = 200_000;
/// Zigzag amplitude beyond which the ladder flips into a helix.
pub const HELICAL_LIMIT: f64 = 0.965;

#[derive(Debug, Error)]
pub enum LatticeError {
    #[error("ions {0} and {1} coincide")]
    Coincident(usize, usize),
    #[error("radial frequency {nu_x} must exceed axial frequency {nu_z}")]
    NotLinear { nu_x: f64, nu_z: f64 },
    #[error("invalid lattice field: {0}")]
    Field(String),
    #[error("sector dimension {dim} exceeds cap {cap}")]
    Capacity { dim: usize, cap: usize },
    #[error("dimension mismatch: {0}")]
    Dimension(String),
    #[error("populations must sum to 1 (got {0})")]
    Populations(f64),
    #[error(transparent)]
    Linalg(#[from] LinalgError),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LatticeField {
    /// Peak AC Stark shift F in J.
    pub peak_shift: f64,
    /// k_SW in rad/m.
    pub wave_number: f64,
    pub phase_offset: f64,
}

impl LatticeField {
    pub fn new(peak_shift: f64, wave_number: f64, phase_offset: f64) -> Result<Self, LatticeError> {
        if !(peak_shift >= 0.0) || !(wave_number > 0.0) || !phase_offset.is_finite() {
            return Err(LatticeError::Field(format!("F={peak_shift}, k={wave_number}, δ={phase_offset}")));
        }
        Ok(LatticeField { peak_shift, wave_number, phase_offset })
    }
}

#[derive(Debug, Clone)]
pub struct BhmParameters {
    /// t_ij in rad/s, zero diagonal.
    pub hopping: DMatrix<f64>,
    /// Reduced radial frequencies ν^(i) in rad/s.
    pub site_frequencies: Vec<f64>,
    pub nu_x: f64,
    /// U in rad/s.
    pub interaction: f64,
    pub eta: f64,
}

impl BhmParameters {
    pub fn sites(&self) -> usize {
        self.site_frequencies.len()
    }

    pub fn max_hopping(&self) -> f64 {
        self.hopping.iter().cloned().fold(0.0, f64::max)
    }

    pub fn with_interaction(mut self, u: f64) -> Self {
        self.interaction = u;
        self
    }

    /// Uniform nearest-neighbour chain, useful for closed-form checks.
    pub fn uniform_chain(sites: usize, t: f64, u: f64) -> Self {
        let hopping = DMatrix::from_fn(sites, sites, |i, j| if i.abs_diff(j) == 1 { t } else { 0.0 });
        BhmParameters { hopping, site_frequencies: vec![0.0; sites], nu_x: 0.0, interaction: u, eta: 0.0 }
    }
}

/// t_ij = e²/(8πε₀ m ν_x |z_i − z_j|³) and ν^(i) = ν_x − Σ_j t_ij.
pub fn hopping_matrix(eq: &ChainEquilibrium, nu_x: f64) -> Result<BhmParameters, LatticeError> {
    if nu_x <= eq.trap.nu_z {
        return Err(LatticeError::NotLinear { nu_x, nu_z: eq.trap.nu_z });
    }
    let n = eq.positions.len();
    let pre = coulomb_constant(&eq.species) / (2.0 * eq.species.mass() * nu_x);
    let mut hopping = DMatrix::zeros(n, n);
    for i in 0..n {
        for j in 0..i {
            let d = (eq.positions[i] - eq.positions[j]).abs();
            if d == 0.0 {
                return Err(LatticeError::Coincident(j, i));
            }
            hopping[(i, j)] = pre / d.powi(3);
            hopping[(j, i)] = hopping[(i, j)];
        }
    }
    let site_frequencies = (0..n).map(|i| nu_x - hopping.row(i).sum()).collect();
    Ok(BhmParameters { hopping, site_frequencies, nu_x, interaction: 0.0, eta: 0.0 })
}

pub fn lamb_dicke(wave_number: f64, species: &IonSpecies, nu_x: f64) -> f64 {
    (consts::REDUCED_PLANCK * wave_number * wave_number / (2.0 * species.mass() * nu_x)).sqrt()
}

fn fourth_derivative(f: impl Fn(f64) -> f64, h: f64) -> f64 {
    (f(2.0 * h) - 4.0 * f(h) + 6.0 * f(0.0) - 4.0 * f(-h) + f(-2.0 * h)) / h.powi(4)
}

/// U = 2(−1)^δ Fη²/ħ at the extremes. Other offsets scale it by the ratio of the local quartic
/// curvature of cos²(kx + πδ/2) to its value at δ = 0, evaluated by finite differences.
pub fn interaction_strength(field: &LatticeField, eta: f64) -> f64 {
    let base = 2.0 * field.peak_shift * eta * eta / consts::REDUCED_PLANCK;
    let d = field.phase_offset;
    if d == d.round() {
        return if (d as i64) % 2 == 0 { base } else { -base };
    }
    let curv = |delta: f64| {
        let f = |x: f64| (x + 0.5 * std::f64::consts::PI * delta).cos().powi(2);
        let (c1, c2) = (fourth_derivative(f, 0.04), fourth_derivative(f, 0.02));
        (16.0 * c2 - c1) / 15.0
    };
    base * curv(d) / curv(0.0)
}

#[derive(Debug, Clone)]
pub struct FockSector {
    pub sites: usize,
    pub phonons: usize,
    states: Vec<Vec<u8>>,
    index: HashMap<Vec<u8>, usize>,
}

impl FockSector {
    pub fn new(sites: usize, phonons: usize) -> Result<Self, LatticeError> {
        Self::with_cap(sites, phonons, DEFAULT_SECTOR_CAP)
    }

    pub fn with_cap(sites: usize, phonons: usize, cap: usize) -> Result<Self, LatticeError> {
        if sites == 0 || phonons > u8::MAX as usize {
            return Err(LatticeError::Dimension(format!("{sites} sites, {phonons} phonons")));
        }
        let dim = Self::dimension(sites, phonons);
        if dim > cap as f64 {
            return Err(LatticeError::Capacity { dim: dim as usize, cap });
        }
        let mut states = Vec::with_capacity(dim as usize);
        let mut cur = vec![0u8; sites];
        fn rec(i: usize, rem: usize, cur: &mut Vec<u8>, out: &mut Vec<Vec<u8>>) {
            if i + 1 == cur.len() {
                cur[i] = rem as u8;
                out.push(cur.clone());
                return;
            }
            for k in (0..=rem).rev() {
                cur[i] = k as u8;
                rec(i + 1, rem - k, cur, out);
            }
        }
        rec(0, phonons, &mut cur, &mut states);
        let index = states.iter().enumerate().map(|(i, s)| (s.clone(), i)).collect();
        Ok(FockSector { sites, phonons, states, index })
    }

    /// C(N_ph + L − 1, L − 1) as a float so oversize requests can be rejected cheaply.
    pub fn dimension(sites: usize, phonons: usize) -> f64 {
        (1..sites).fold(1.0, |acc, k| acc * (phonons + k) as f64 / k as f64).round()
    }

    pub fn dim(&self) -> usize {
        self.states.len()
    }

    pub fn state(&self, k: usize) -> &[u8] {
        &self.states[k]
    }

    pub fn index_of(&self, occ: &[u8]) -> Option<usize> {
        self.index.get(occ).copied()
    }

    /// Apply a_i† a_j to basis state k, returning (target, amplitude).
    fn hop(&self, k: usize, i: usize, j: usize) -> Option<(usize, f64)> {
        let s = &self.states[k];
        if s[j] == 0 {
            return None;
        }
        let mut t = s.clone();
        let amp = if i == j {
            s[j] as f64
        } else {
            t[j] -= 1;
            t[i] += 1;
            (s[j] as f64 * (s[i] as f64 + 1.0)).sqrt()
        };
        Some((self.index[&t], amp))
    }
}

pub fn build_bhm(params: &BhmParameters, sector: &FockSector) -> Result<Csr, LatticeError> {
    build_bhm_in_frame(params, sector, 0.0)
}

/// BHM with ω_f·N̂ subtracted. N̂ is conserved, so this only shifts the sector by ω_f·N_ph.
pub fn build_bhm_in_frame(params: &BhmParameters, sector: &FockSector, frame: f64) -> Result<Csr, LatticeError> {
    let l = params.sites();
    if l != sector.sites {
        return Err(LatticeError::Dimension(format!("{l} sites in parameters, {} in sector", sector.sites)));
    }
    let mut trip = Vec::new();
    for k in 0..sector.dim() {
        let s = sector.state(k);
        let mut diag = 0.0;
        for i in 0..l {
            let n = s[i] as f64;
            diag += (params.nu_x + params.site_frequencies[i] - frame) * n + params.interaction * n * (n - 1.0);
        }
        trip.push((k, k, C64::new(diag, 0.0)));
        for i in 0..l {
            for j in 0..l {
                let t = params.hopping[(i, j)];
                if i != j && t != 0.0 {
                    if let Some((target, amp)) = sector.hop(k, i, j) {
                        trip.push((target, k, C64::new(t * amp, 0.0)));
                    }
                }
            }
        }
    }
    Ok(Csr::from_triplets(sector.dim(), trip))
}

#[derive(Debug, Clone)]
pub struct BhmObservables {
    pub energy: f64,
    pub mean: Vec<f64>,
    pub variance: Vec<f64>,
    pub cnn: DMatrix<f64>,
    pub caa: DMatrix<f64>,
}

impl BhmObservables {
    pub fn mean_variance(&self) -> f64 {
        self.variance.iter().sum::<f64>() / self.variance.len() as f64
    }
}

pub fn observables_of(state: &[C64], sector: &FockSector) -> BhmObservables {
    let l = sector.sites;
    let probs: Vec<f64> = state.iter().map(|a| a.norm_sqr()).collect();
    let mut mean: Vec<f64> = vec![0.0; l];
    let mut nn = DMatrix::<f64>::zeros(l, l);
    for (k, p) in probs.iter().enumerate() {
        let s = sector.state(k);
        for i in 0..l {
            mean[i] += p * s[i] as f64;
            for j in 0..l {
                nn[(i, j)] += p * (s[i] as f64) * (s[j] as f64);
            }
        }
    }
    let cnn = DMatrix::from_fn(l, l, |i, j| nn[(i, j)] - mean[i] * mean[j]);
    let variance = (0..l).map(|i| cnn[(i, i)]).collect();
    let mut hop = DMatrix::<f64>::zeros(l, l);
    for k in 0..sector.dim() {
        for i in 0..l {
            for j in 0..l {
                if let Some((target, amp)) = sector.hop(k, i, j) {
                    hop[(i, j)] += (state[target].conj() * state[k]).re * amp;
                }
            }
        }
    }
    let caa = DMatrix::from_fn(l, l, |i, j| {
        let d = (mean[i] * mean[j]).sqrt();
        if d > 0.0 {
            hop[(i, j)] / d
        } else {
            0.0
        }
    });
    BhmObservables { energy: 0.0, mean, variance, cnn, caa }
}

pub fn ground_observables(h: &Csr, sector: &FockSector) -> Result<BhmObservables, LatticeError> {
    if h.dim() != sector.dim() {
        return Err(LatticeError::Dimension(format!("operator {} vs sector {}", h.dim(), sector.dim())));
    }
    let gs = linalg::ground_state(h, 1e-10, 3000)?;
    let mut obs = observables_of(&gs.vector, sector);
    obs.energy = gs.energy;
    Ok(obs)
}

/// Mean of C_{i,i+d} over pairs at each distance d = 1..L−1.
pub fn distance_profile(c: &DMatrix<f64>) -> Vec<f64> {
    let l = c.nrows();
    (1..l).map(|d| (0..l - d).map(|i| c[(i, i + d)]).sum::<f64>() / (l - d) as f64).collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Decay {
    Algebraic,
    Exponential,
}

#[derive(Debug, Clone, Copy)]
pub struct DecayFit {
    pub label: Decay,
    pub aic_exponential: f64,
    pub aic_algebraic: f64,
    /// 1/ξ for the exponential fit.
    pub inverse_length: f64,
    /// α for the algebraic fit.
    pub exponent: f64,
}

fn line_fit(x: &[f64], y: &[f64]) -> (f64, f64) {
    let n = x.len() as f64;
    let (mx, my) = (x.iter().sum::<f64>() / n, y.iter().sum::<f64>() / n);
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = x.iter().map(|a| (a - mx).powi(2)).sum();
    let slope = sxy / sxx;
    let rss = x.iter().zip(y).map(|(a, b)| (b - my - slope * (a - mx)).powi(2)).sum();
    (slope, rss)
}

/// Compare ln|C| linear in d against ln|C| linear in ln d; lower AIC wins.
pub fn classify_decay(profile: &[f64]) -> Option<DecayFit> {
    let pts: Vec<(f64, f64)> = profile
        .iter()
        .enumerate()
        .filter(|(_, c)| c.abs() > 1e-300)
        .map(|(k, c)| ((k + 1) as f64, c.abs().ln()))
        .collect();
    if pts.len() < 3 {
        return None;
    }
    let n = pts.len() as f64;
    let d: Vec<f64> = pts.iter().map(|p| p.0).collect();
    let lnd: Vec<f64> = d.iter().map(|x| x.ln()).collect();
    let y: Vec<f64> = pts.iter().map(|p| p.1).collect();
    let aic = |rss: f64| n * (rss / n + 1e-300).ln() + 4.0;
    let (se, re) = line_fit(&d, &y);
    let (sa, ra) = line_fit(&lnd, &y);
    let (ae, aa) = (aic(re), aic(ra));
    Some(DecayFit {
        label: if ae < aa { Decay::Exponential } else { Decay::Algebraic },
        aic_exponential: ae,
        aic_algebraic: aa,
        inverse_length: -se,
        exponent: -sa,
    })
}

#[derive(Debug, Clone)]
pub struct ScanPoint {
    pub u_over_t: f64,
    pub observables: BhmObservables,
    pub decay: Option<DecayFit>,
}

/// Ground-state observables for U = r·max t_ij over each ratio r, in parallel.
pub fn interaction_scan(params: &BhmParameters, phonons: usize, ratios: &[f64]) -> Result<Vec<ScanPoint>, LatticeError> {
    let sector = FockSector::new(params.sites(), phonons)?;
    let tmax = params.max_hopping();
    ratios
        .par_iter()
        .map(|&r| {
            let p = params.clone().with_interaction(r * tmax);
            let h = build_bhm_in_frame(&p, &sector, 2.0 * p.nu_x)?.scale(1.0 / tmax);
            let mut obs = ground_observables(&h, &sector)?;
            obs.energy *= tmax;
            let decay = classify_decay(&distance_profile(&obs.caa));
            Ok(ScanPoint { u_over_t: r, observables: obs, decay })
        })
        .collect()
}

pub fn sideband_signal(populations: &[f64], rabi: f64, times: &[f64]) -> Result<Vec<f64>, LatticeError> {
    let total: f64 = populations.iter().sum();
    if (total - 1.0).abs() > 1e-9 {
        return Err(LatticeError::Populations(total));
    }
    Ok(times
        .iter()
        .map(|&t| {
            populations.iter().enumerate().map(|(n, p)| p * ((n as f64).sqrt() * rabi * t).sin().powi(2)).sum()
        })
        .collect())
}

#[derive(Debug, Clone)]
pub struct PopulationFit {
    pub populations: Vec<f64>,
    pub condition: f64,
    pub ill_conditioned: bool,
}

/// Least-squares P(1..n_max) on the √n frequency grid, with P(0) from normalization.
pub fn recover_populations(signal: &[f64], rabi: f64, times: &[f64], n_max: usize) -> Result<PopulationFit, LatticeError> {
    if signal.len() != times.len() || times.len() < n_max || n_max == 0 {
        return Err(LatticeError::Dimension(format!("{} samples for {n_max} populations", times.len())));
    }
    let a = DMatrix::from_fn(times.len(), n_max, |r, c| (((c + 1) as f64).sqrt() * rabi * times[r]).sin().powi(2));
    let svd = a.svd(true, true);
    let smax = svd.singular_values.max();
    let smin = svd.singular_values.min();
    let condition = if smin > 0.0 { smax / smin } else { f64::INFINITY };
    let x = svd
        .solve(&DVector::from_column_slice(signal), smax * 1e-14)
        .map_err(|e| LatticeError::Dimension(e.to_string()))?;
    let mut populations = vec![1.0 - x.sum()];
    populations.extend(x.iter());
    Ok(PopulationFit { populations, condition, ill_conditioned: condition > 1e6 })
}

/// Hardcore bosons (spins ½) at fixed particle number; bit i set means site i occupied (spin up).
#[derive(Debug, Clone)]
pub struct HardcoreSector {
    pub sites: usize,
    pub particles: usize,
    states: Vec<u32>,
}

impl HardcoreSector {
    pub fn new(sites: usize, particles: usize) -> Result<Self, LatticeError> {
        if sites == 0 || sites > 24 || particles > sites {
            return Err(LatticeError::Dimension(format!("{particles} hardcore bosons on {sites} sites")));
        }
        let states = (0u32..1 << sites).filter(|s| s.count_ones() as usize == particles).collect();
        Ok(HardcoreSector { sites, particles, states })
    }

    pub fn dim(&self) -> usize {
        self.states.len()
    }

    fn index(&self, s: u32) -> usize {
        self.states.binary_search(&s).expect("state in sector")
    }

    /// Apply S_i⁺ S_j⁻ (i ≠ j).
    fn exchange(&self, psi: &[C64], i: usize, j: usize, out: &mut [C64], scale: C64) {
        for (k, &s) in self.states.iter().enumerate() {
            if (s >> j) & 1 == 1 && (s >> i) & 1 == 0 {
                out[self.index(s ^ (1 << i) ^ (1 << j))] += scale * psi[k];
            }
        }
    }
}

/// H_S = Σ_{α<β} t_αβ (S_α⁺S_β⁻ + h.c.) + Σ V_α S_α^z, i.e. 2Σ t (SˣSˣ + SʸSʸ) + Σ V S^z.
pub fn build_xy(couplings: &DMatrix<f64>, potential: &[f64], sector: &HardcoreSector) -> Result<Csr, LatticeError> {
    let l = sector.sites;
    if couplings.nrows() != l || potential.len() != l {
        return Err(LatticeError::Dimension(format!("couplings for {} sites, sector has {l}", couplings.nrows())));
    }
    let mut trip = Vec::new();
    for (k, &s) in sector.states.iter().enumerate() {
        let diag: f64 = (0..l).map(|a| potential[a] * if (s >> a) & 1 == 1 { 0.5 } else { -0.5 }).sum();
        trip.push((k, k, C64::new(diag, 0.0)));
        for a in 0..l {
            for b in 0..l {
                let t = couplings[(a, b)];
                if a != b && t != 0.0 && (s >> b) & 1 == 1 && (s >> a) & 1 == 0 {
                    trip.push((sector.index(s ^ (1 << a) ^ (1 << b)), k, C64::new(t, 0.0)));
                }
            }
        }
    }
    Ok(Csr::from_triplets(sector.dim(), trip))
}

#[derive(Debug, Clone, Copy)]
pub struct ZigzagLadder {
    pub sites: usize,
    /// Transverse displacement ±ξ in units of the axial spacing.
    pub amplitude: f64,
}

impl ZigzagLadder {
    pub fn positions(&self) -> Vec<[f64; 2]> {
        (0..self.sites).map(|i| [i as f64, if i % 2 == 0 { self.amplitude } else { -self.amplitude }]).collect()
    }

    /// Dipolar 1/d³ couplings between all pairs, in units of the leg coupling at distance 2.
    pub fn couplings(&self) -> DMatrix<f64> {
        let p = self.positions();
        DMatrix::from_fn(self.sites, self.sites, |a, b| {
            if a == b {
                0.0
            } else {
                let d = ((p[a][0] - p[b][0]).powi(2) + (p[a][1] - p[b][1]).powi(2)).sqrt();
                8.0 / d.powi(3)
            }
        })
    }

    /// |t₂/t₁| between leg (i, i+2) and rung (i, i+1) neighbours.
    pub fn coupling_ratio(&self) -> f64 {
        (1.0 + 4.0 * self.amplitude * self.amplitude).powf(1.5) / 8.0
    }

    pub fn is_planar(&self) -> bool {
        self.amplitude < HELICAL_LIMIT
    }
}

#[derive(Debug, Clone)]
pub struct Chirality {
    /// ⟨κ_i⟩ per bond (i, i+1).
    pub kappa: Vec<f64>,
    /// ⟨κ_i κ_j⟩.
    pub correlations: DMatrix<f64>,
    pub order: f64,
}

/// κ_i = 4(S_iˣS_{i+1}ʸ − S_iʸS_{i+1}ˣ) = 2i(S_i⁺S_{i+1}⁻ − S_i⁻S_{i+1}⁺).
pub fn xy_chirality(state: &[C64], sector: &HardcoreSector) -> Result<Chirality, LatticeError> {
    let l = sector.sites;
    if state.len() != sector.dim() || l < 3 {
        return Err(LatticeError::Dimension(format!("state of length {} on {l} sites", state.len())));
    }
    let applied: Vec<Vec<C64>> = (0..l - 1)
        .map(|i| {
            let mut out = vec![C64::new(0.0, 0.0); state.len()];
            sector.exchange(state, i, i + 1, &mut out, C64::new(0.0, 2.0));
            sector.exchange(state, i + 1, i, &mut out, C64::new(0.0, -2.0));
            out
        })
        .collect();
    let bonds = l - 1;
    let kappa = applied.iter().map(|k| linalg::dot(state, k).re).collect();
    let correlations = DMatrix::from_fn(bonds, bonds, |i, j| linalg::dot(&applied[i], &applied[j]).re);
    let span = l as isize - 2;
    let mut total = 0.0;
    for delta in -span..=span {
        let m = bonds - delta.unsigned_abs();
        let s: f64 = (0..bonds)
            .filter_map(|i| {
                let j = i as isize + delta;
                (j >= 0 && (j as usize) < bonds).then(|| correlations[(i, j as usize)])
            })
            .sum();
        total += s / m as f64;
    }
    Ok(Chirality { kappa, correlations, order: total / (2 * l - 3) as f64 })
}

/// Chiral order of the half-filled XY ground state on a zigzag ladder.
pub fn ladder_chiral_order(ladder: &ZigzagLadder) -> Result<Chirality, LatticeError> {
    let sector = HardcoreSector::new(ladder.sites, ladder.sites / 2)?;
    let h = build_xy(&ladder.couplings(), &vec![0.0; ladder.sites], &sector)?;
    let gs = linalg::ground_state(&h, 1e-11, 2000)?;
    xy_chirality(&gs.vector, &sector)
}
