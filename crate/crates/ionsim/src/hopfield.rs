//! Hopfield associative memory with Hebbian and ion-chain weights.

use crate::chain_statics::NormalModes;
use crate::foundation::{consts, IonSpecies};
use nalgebra::DMatrix;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum HopfieldError {
    #[error("pattern length {got} does not match network size {expected}")]
    Shape { expected: usize, got: usize },
    #[error("pattern entries must be ±1")]
    Entries,
    #[error("at least one pattern is required")]
    NoPatterns,
    #[error("flip count {r} exceeds network size {n}")]
    Flips { r: usize, n: usize },
    #[error("mode {0} has no usable sign pattern")]
    Mode(usize),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Pattern(Vec<i8>);

impl Pattern {
    pub fn new(entries: Vec<i8>) -> Result<Self, HopfieldError> {
        if entries.iter().any(|&s| s != 1 && s != -1) {
            return Err(HopfieldError::Entries);
        }
        Ok(Pattern(entries))
    }

    pub fn random<R: Rng>(n: usize, rng: &mut R) -> Self {
        Pattern((0..n).map(|_| if rng.gen::<bool>() { 1 } else { -1 }).collect())
    }

    pub fn entries(&self) -> &[i8] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn negated(&self) -> Self {
        Pattern(self.0.iter().map(|s| -s).collect())
    }

    pub fn with_flips(&self, sites: &[usize]) -> Self {
        let mut p = self.clone();
        for &i in sites {
            p.0[i] = -p.0[i];
        }
        p
    }

    /// Normalized overlap (1/N) Σ ξ_i s_i.
    pub fn overlap(&self, other: &Pattern) -> f64 {
        let dot: i64 = self.0.iter().zip(&other.0).map(|(&a, &b)| (a * b) as i64).sum();
        dot as f64 / self.0.len() as f64
    }
}

#[derive(Debug, Clone)]
pub struct Weights {
    pub j: DMatrix<f64>,
    pub h: Vec<f64>,
}

impl Weights {
    pub fn empty(n: usize) -> Self {
        Weights { j: DMatrix::zeros(n, n), h: vec![0.0; n] }
    }

    pub fn size(&self) -> usize {
        self.h.len()
    }

    fn check(&self, p: &Pattern) -> Result<(), HopfieldError> {
        if p.len() != self.size() {
            return Err(HopfieldError::Shape { expected: self.size(), got: p.len() });
        }
        Ok(())
    }

    /// One Hebbian step J ← λJ + εξξᵀ, diagonal kept at zero.
    pub fn learn(&mut self, p: &Pattern, lambda: f64, epsilon: f64) -> Result<(), HopfieldError> {
        self.check(p)?;
        let n = self.size();
        for a in 0..n {
            for b in 0..n {
                self.j[(a, b)] = if a == b {
                    0.0
                } else {
                    lambda * self.j[(a, b)] + epsilon * (p.0[a] * p.0[b]) as f64
                };
            }
        }
        Ok(())
    }
}

pub fn hebb_store(patterns: &[Pattern], epsilon: f64) -> Result<Weights, HopfieldError> {
    let first = patterns.first().ok_or(HopfieldError::NoPatterns)?;
    let mut w = Weights::empty(first.len());
    for p in patterns {
        w.learn(p, 1.0, epsilon)?;
    }
    Ok(w)
}

fn activation(w: &Weights, s: &[i8], i: usize) -> f64 {
    let row = w.j.row(i);
    let mut a = w.h[i];
    for (j, &sj) in s.iter().enumerate() {
        if j != i {
            a += row[j] * sj as f64;
        }
    }
    a
}

/// One sequential sweep in the given order; returns the number of flips.
pub fn update_sequential(state: &mut Pattern, w: &Weights, order: &[usize]) -> Result<usize, HopfieldError> {
    w.check(state)?;
    let mut flips = 0;
    for &i in order {
        let a = activation(w, &state.0, i);
        let new = if a > 0.0 {
            1
        } else if a < 0.0 {
            -1
        } else {
            state.0[i]
        };
        if new != state.0[i] {
            state.0[i] = new;
            flips += 1;
        }
    }
    Ok(flips)
}

pub fn energy(state: &Pattern, w: &Weights) -> Result<f64, HopfieldError> {
    w.check(state)?;
    let n = state.len();
    let s = &state.0;
    let mut e = 0.0;
    for i in 0..n {
        for j in 0..n {
            if i != j {
                e -= 0.5 * w.j[(i, j)] * (s[i] * s[j]) as f64;
            }
        }
        e -= w.h[i] * s[i] as f64;
    }
    Ok(e)
}

#[derive(Debug, Clone)]
pub struct Recall {
    pub state: Pattern,
    /// Sweeps that flipped at least one spin.
    pub sweeps: usize,
    pub energy_trace: Vec<f64>,
    pub converged: bool,
    pub orders: Vec<Vec<usize>>,
}

/// Iterate seeded random-order sweeps until a sweep flips nothing.
pub fn recall<R: Rng>(initial: &Pattern, w: &Weights, max_sweeps: usize, rng: &mut R) -> Result<Recall, HopfieldError> {
    let mut state = initial.clone();
    let mut trace = vec![energy(&state, w)?];
    let mut orders = Vec::new();
    let mut order: Vec<usize> = (0..state.len()).collect();
    let mut sweeps = 0;
    for _ in 0..max_sweeps {
        order.shuffle(rng);
        orders.push(order.clone());
        let flips = update_sequential(&mut state, w, &order)?;
        trace.push(energy(&state, w)?);
        if flips == 0 {
            return Ok(Recall { state, sweeps, energy_trace: trace, converged: true, orders });
        }
        sweeps += 1;
    }
    Ok(Recall { state, sweeps, energy_trace: trace, converged: false, orders })
}

/// J_ij = (ħ/2m) ∂ω Σ_n S_in S_jn / ν_n² with a single factor of the gradient, zero diagonal.
pub fn ion_weights(modes: &NormalModes, species: &IonSpecies, d_omega: f64) -> Weights {
    let n = modes.len();
    let pre = consts::REDUCED_PLANCK / (2.0 * species.mass()) * d_omega;
    let mut j = DMatrix::zeros(n, n);
    for a in 0..n {
        for b in 0..a {
            let v: f64 = (0..n).map(|m| modes.s(a, m) * modes.s(b, m) / modes.frequencies[m].powi(2)).sum();
            j[(a, b)] = pre * v;
            j[(b, a)] = pre * v;
        }
    }
    Weights { j, h: vec![0.0; n] }
}

/// Sign pattern of a mode, with near-node ions (|S_in| below 1e-8) reported separately and
/// assigned +1.
pub fn mode_pattern(modes: &NormalModes, mode: usize) -> Result<(Pattern, Vec<usize>), HopfieldError> {
    if mode >= modes.len() {
        return Err(HopfieldError::Mode(mode));
    }
    let mut nodes = Vec::new();
    let entries = (0..modes.len())
        .map(|i| {
            let s = modes.s(i, mode);
            if s.abs() < 1e-8 {
                nodes.push(i);
                1
            } else if s > 0.0 {
                1
            } else {
                -1
            }
        })
        .collect();
    Ok((Pattern(entries), nodes))
}

fn trial_rng(seed: u64, trial: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(trial);
    rng
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Estimate {
    pub probability: f64,
    /// Half-width of the 95% normal-approximation interval.
    pub ci: f64,
    pub trials: usize,
}

impl Estimate {
    fn from_count(ok: usize, trials: usize) -> Self {
        let p = ok as f64 / trials as f64;
        Estimate { probability: p, ci: 1.96 * (p * (1.0 - p) / trials as f64).sqrt(), trials }
    }
}

/// Flip `r` random spins of `pattern`, recall, and count exact returns.
pub fn robustness(pattern: &Pattern, w: &Weights, r: usize, trials: usize, seed: u64) -> Result<Estimate, HopfieldError> {
    let n = pattern.len();
    if r > n {
        return Err(HopfieldError::Flips { r, n });
    }
    w.check(pattern)?;
    let ok: usize = (0..trials)
        .into_par_iter()
        .map(|t| {
            let mut rng = trial_rng(seed, t as u64);
            let sites = rand::seq::index::sample(&mut rng, n, r).into_vec();
            let start = pattern.with_flips(&sites);
            let res = recall(&start, w, 10 * n, &mut rng).expect("shapes checked");
            usize::from(res.state == *pattern)
        })
        .sum();
    Ok(Estimate::from_count(ok, trials))
}

/// Recall probability for each of the two lowest-mode patterns of an ion chain.
pub fn robustness_experiment(
    modes: &NormalModes,
    species: &IonSpecies,
    d_omega: f64,
    r: usize,
    trials: usize,
    seed: u64,
) -> Result<[Estimate; 2], HopfieldError> {
    let w = ion_weights(modes, species, d_omega);
    let (p1, _) = mode_pattern(modes, 0)?;
    let (p2, _) = mode_pattern(modes, 1)?;
    Ok([
        robustness(&p1, &w, r, trials, seed)?,
        robustness(&p2, &w, r, trials, seed.wrapping_add(1))?,
    ])
}

#[derive(Debug, Clone, PartialEq)]
pub struct CapacityPoint {
    pub patterns: usize,
    pub success: Estimate,
}

/// Store p random patterns, corrupt the first by `noise` (fraction of flipped bits), and count
/// exact recalls, for each p in `loads`.
pub fn capacity_scan(n: usize, loads: &[usize], noise: f64, trials: usize, seed: u64) -> Vec<CapacityPoint> {
    loads
        .iter()
        .map(|&p| {
            let ok: usize = (0..trials)
                .into_par_iter()
                .map(|t| {
                    let mut rng = trial_rng(seed ^ (p as u64).wrapping_mul(0x9e37_79b9_7f4a_7c15), t as u64);
                    let pats: Vec<Pattern> = (0..p).map(|_| Pattern::random(n, &mut rng)).collect();
                    let w = hebb_store(&pats, 1.0 / n as f64).expect("p >= 1");
                    let flips = (noise * n as f64).round() as usize;
                    let sites = rand::seq::index::sample(&mut rng, n, flips).into_vec();
                    let res = recall(&pats[0].with_flips(&sites), &w, 10 * n, &mut rng).expect("shapes agree");
                    usize::from(res.state == pats[0])
                })
                .sum();
            CapacityPoint { patterns: p, success: Estimate::from_count(ok, trials) }
        })
        .collect()
}

/// Load p/N at which the success curve first drops through 1/2, linearly interpolated.
pub fn half_crossing(n: usize, scan: &[CapacityPoint]) -> Option<f64> {
    scan.windows(2).find_map(|w| {
        let (a, b) = (&w[0], &w[1]);
        let (pa, pb) = (a.success.probability, b.success.probability);
        (pa >= 0.5 && pb < 0.5).then(|| {
            let f = (pa - 0.5) / (pa - pb);
            (a.patterns as f64 + f * (b.patterns as f64 - a.patterns as f64)) / n as f64
        })
    })
}
