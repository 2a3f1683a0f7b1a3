//! Internal levels ⊗ truncated Fock space: sideband drives, evolution, Mach-Zehnder and
//! quadrature read-out.

use crate::linalg::{self, expm_multiply, Csr};
use num_complex::Complex64 as C64;
use std::f64::consts::FRAC_PI_4;
use thiserror::Error;

/// Population allowed in the two highest Fock levels before a run is rejected.
pub const TRUNCATION_GUARD: f64 = 1e-6;

#[derive(Debug, Error)]
pub enum FockError {
    #[error("cutoff {cutoff} too small for sideband order {order}")]
    Cutoff { cutoff: usize, order: usize },
    #[error("{population:e} population in the top Fock levels at cutoff {cutoff}; increase the cutoff")]
    Truncation { population: f64, cutoff: usize },
    #[error("norm drifted to {0}")]
    Norm(f64),
    #[error("pulse calibration failed: {0}")]
    Calibration(String),
    #[error("internal state is not prepared in |+_φ⟩ (defect {0:e})")]
    Protocol(f64),
    #[error("invalid drive: {0}")]
    Drive(String),
    #[error("dimension mismatch: {0}")]
    Dimension(String),
}

#[derive(Debug, Clone, PartialEq)]
pub struct HybridState {
    pub internal_dim: usize,
    pub cutoff: usize,
    /// Index = level·(cutoff + 1) + n.
    pub amplitudes: Vec<C64>,
}

impl HybridState {
    pub fn zero(internal_dim: usize, cutoff: usize) -> Self {
        HybridState { internal_dim, cutoff, amplitudes: vec![C64::new(0.0, 0.0); internal_dim * (cutoff + 1)] }
    }

    pub fn basis(internal_dim: usize, cutoff: usize, level: usize, n: usize) -> Self {
        let mut s = Self::zero(internal_dim, cutoff);
        s.amplitudes[level * (cutoff + 1) + n] = C64::new(1.0, 0.0);
        s
    }

    /// Internal ⊗ motional product state.
    pub fn product(internal: &[C64], motional: &[C64]) -> Self {
        let cutoff = motional.len() - 1;
        let amplitudes = internal.iter().flat_map(|a| motional.iter().map(move |m| a * m)).collect();
        HybridState { internal_dim: internal.len(), cutoff, amplitudes }
    }

    pub fn dim(&self) -> usize {
        self.amplitudes.len()
    }

    pub fn index(&self, level: usize, n: usize) -> usize {
        level * (self.cutoff + 1) + n
    }

    pub fn amplitude(&self, level: usize, n: usize) -> C64 {
        self.amplitudes[self.index(level, n)]
    }

    pub fn norm(&self) -> f64 {
        linalg::norm(&self.amplitudes)
    }

    pub fn level_population(&self, level: usize) -> f64 {
        (0..=self.cutoff).map(|n| self.amplitude(level, n).norm_sqr()).sum()
    }

    pub fn fock_distribution(&self) -> Vec<f64> {
        (0..=self.cutoff).map(|n| (0..self.internal_dim).map(|l| self.amplitude(l, n).norm_sqr()).sum()).collect()
    }

    pub fn top_population(&self) -> f64 {
        let p = self.fock_distribution();
        p[self.cutoff] + if self.cutoff > 0 { p[self.cutoff - 1] } else { 0.0 }
    }

    pub fn check_truncation(&self) -> Result<(), FockError> {
        let population = self.top_population();
        if population > TRUNCATION_GUARD {
            return Err(FockError::Truncation { population, cutoff: self.cutoff });
        }
        Ok(())
    }

    /// Same state embedded at a larger cutoff.
    pub fn with_cutoff(&self, cutoff: usize) -> Self {
        let mut s = Self::zero(self.internal_dim, cutoff);
        for l in 0..self.internal_dim {
            for n in 0..=self.cutoff.min(cutoff) {
                let k = s.index(l, n);
                s.amplitudes[k] = self.amplitude(l, n);
            }
        }
        s
    }

    /// Multiply level-n amplitudes by e^{−i n φ}, the free evolution under a trap-frequency offset.
    pub fn phase_shift(&self, phi: f64) -> Self {
        let mut s = self.clone();
        for l in 0..self.internal_dim {
            for n in 0..=self.cutoff {
                let k = s.index(l, n);
                s.amplitudes[k] *= C64::from_polar(1.0, -(n as f64) * phi);
            }
        }
        s
    }
}

/// Coherent-state Fock amplitudes up to `cutoff`.
pub fn coherent_amplitudes(alpha: C64, cutoff: usize) -> Vec<C64> {
    let mut v = Vec::with_capacity(cutoff + 1);
    let mut c = C64::new((-0.5 * alpha.norm_sqr()).exp(), 0.0);
    for n in 0..=cutoff {
        if n > 0 {
            c *= alpha / (n as f64).sqrt();
        }
        v.push(c);
    }
    v
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DriveKind {
    Carrier,
    Red(usize),
    Blue(usize),
}

impl DriveKind {
    pub fn order(&self) -> usize {
        match *self {
            DriveKind::Carrier => 0,
            DriveKind::Red(q) | DriveKind::Blue(q) => q,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LambDicke {
    /// ηᵠ√((n+q)!/n!), the bare ladder-operator element.
    LeadingOrder,
    /// q!·e^{−η²/2}ηᵠ√(n!/(n+q)!) L_n^q(η²), normalized to agree with the leading order as η → 0.
    Full,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DriveSpec {
    pub kind: DriveKind,
    /// Ω for the carrier, Ω̃ for sidebands (rad/s).
    pub rabi: f64,
    pub phase: f64,
    pub eta: f64,
    pub lamb_dicke: LambDicke,
}

impl DriveSpec {
    pub fn carrier(rabi: f64, phase: f64) -> Self {
        DriveSpec { kind: DriveKind::Carrier, rabi, phase, eta: 0.0, lamb_dicke: LambDicke::Full }
    }

    pub fn red(order: usize, rabi: f64, phase: f64, eta: f64) -> Self {
        DriveSpec { kind: DriveKind::Red(order), rabi, phase, eta, lamb_dicke: LambDicke::Full }
    }

    pub fn blue(order: usize, rabi: f64, phase: f64, eta: f64) -> Self {
        DriveSpec { kind: DriveKind::Blue(order), rabi, phase, eta, lamb_dicke: LambDicke::Full }
    }

    pub fn leading_order(self) -> Self {
        DriveSpec { lamb_dicke: LambDicke::LeadingOrder, ..self }
    }

    pub fn with_phase(self, phase: f64) -> Self {
        DriveSpec { phase, ..self }
    }

    fn validate(&self) -> Result<(), FockError> {
        if !(self.rabi >= 0.0) || !self.phase.is_finite() || !self.eta.is_finite() {
            return Err(FockError::Drive(format!("{self:?}")));
        }
        if matches!(self.kind, DriveKind::Red(0) | DriveKind::Blue(0)) {
            return Err(FockError::Drive("sideband order must be at least 1".into()));
        }
        Ok(())
    }

    /// Coupling between |↓, n⟩ and |↑, n ± q⟩ (or |↑, n⟩ for the carrier), in rad/s.
    pub fn matrix_element(&self, n_low: usize) -> f64 {
        let q = self.kind.order();
        if q == 0 {
            return self.rabi;
        }
        self.rabi * ladder(n_low, q, self.eta, self.lamb_dicke)
    }
}

fn ln_factorial(n: usize) -> f64 {
    (1..=n).map(|k| (k as f64).ln()).sum()
}

/// Generalized Laguerre polynomial L_n^α(x) by the three-term recurrence.
pub fn laguerre(n: usize, alpha: f64, x: f64) -> f64 {
    let (mut prev, mut cur) = (1.0, 1.0 + alpha - x);
    if n == 0 {
        return prev;
    }
    for k in 1..n {
        let k = k as f64;
        let next = ((2.0 * k + 1.0 + alpha - x) * cur - (k + alpha) * prev) / (k + 1.0);
        prev = cur;
        cur = next;
    }
    cur
}

/// Element between Fock levels n and n+q, including ηᵠ.
pub fn ladder(n: usize, q: usize, eta: f64, mode: LambDicke) -> f64 {
    let root = 0.5 * (ln_factorial(n + q) - ln_factorial(n));
    match mode {
        LambDicke::LeadingOrder => eta.powi(q as i32) * root.exp(),
        LambDicke::Full => {
            let x = eta * eta;
            (ln_factorial(q) - root - 0.5 * x).exp() * eta.powi(q as i32) * laguerre(n, q as f64, x)
        }
    }
}

/// σ⁺ = |↑⟩⟨↓| with ↓ = level 0, ↑ = level 1.
pub fn build_drive(spec: &DriveSpec, internal_dim: usize, cutoff: usize) -> Result<Csr, FockError> {
    spec.validate()?;
    let q = spec.kind.order();
    if internal_dim < 2 {
        return Err(FockError::Dimension("drives need two internal levels".into()));
    }
    if cutoff < q + 2 {
        return Err(FockError::Cutoff { cutoff, order: q });
    }
    let f = cutoff + 1;
    let dim = internal_dim * f;
    let e = C64::from_polar(1.0, spec.phase);
    let mut trip = Vec::new();
    let mut couple = |up_n: usize, down_n: usize, g: f64| {
        let (u, d) = (f + up_n, down_n);
        trip.push((u, d, e * g));
        trip.push((d, u, e.conj() * g));
    };
    match spec.kind {
        DriveKind::Carrier => (0..f).for_each(|n| couple(n, n, spec.rabi)),
        // red: σ⁺aᵠ takes |↓, n+q⟩ to |↑, n⟩
        DriveKind::Red(_) => (0..f - q).for_each(|n| couple(n, n + q, spec.matrix_element(n))),
        // blue: σ⁺a†ᵠ takes |↓, n⟩ to |↑, n+q⟩
        DriveKind::Blue(_) => (0..f - q).for_each(|n| couple(n + q, n, spec.matrix_element(n))),
    }
    Ok(Csr::from_triplets(dim, trip))
}

pub fn summed_drive(drives: &[DriveSpec], internal_dim: usize, cutoff: usize) -> Result<Csr, FockError> {
    let mut h = Csr::from_triplets(internal_dim * (cutoff + 1), Vec::new());
    for d in drives {
        h = h.combine(C64::new(1.0, 0.0), &build_drive(d, internal_dim, cutoff)?, C64::new(1.0, 0.0));
    }
    Ok(h)
}

/// Evolution under a fixed operator with norm and truncation checks at `checks` intermediate points.
pub fn evolve_operator(state: &HybridState, h: &Csr, duration: f64, checks: usize) -> Result<HybridState, FockError> {
    if h.dim() != state.dim() {
        return Err(FockError::Dimension(format!("operator {} vs state {}", h.dim(), state.dim())));
    }
    let mut s = state.clone();
    let segments = checks.max(1);
    for _ in 0..segments {
        s.amplitudes = expm_multiply(h, &s.amplitudes, duration / segments as f64, 1e-13);
        s.check_truncation()?;
    }
    let nrm = s.norm();
    if (nrm - state.norm()).abs() > 1e-9 {
        return Err(FockError::Norm(nrm));
    }
    Ok(s)
}

pub fn evolve_hybrid(state: &HybridState, drives: &[DriveSpec], duration: f64) -> Result<HybridState, FockError> {
    let h = summed_drive(drives, state.internal_dim, state.cutoff)?;
    evolve_operator(state, &h, duration, 8)
}

/// Piecewise-constant midpoint evolution under H(t).
pub fn evolve_schedule<F>(state: &HybridState, h_at: F, duration: f64, steps: usize) -> Result<HybridState, FockError>
where
    F: Fn(f64) -> Csr,
{
    let steps = steps.max(1);
    let dt = duration / steps as f64;
    let mut s = state.clone();
    for k in 0..steps {
        let h = h_at((k as f64 + 0.5) * dt);
        if h.dim() != s.dim() {
            return Err(FockError::Dimension(format!("operator {} vs state {}", h.dim(), s.dim())));
        }
        s.amplitudes = expm_multiply(&h, &s.amplitudes, dt, 1e-13);
    }
    s.check_truncation()?;
    let nrm = s.norm();
    if (nrm - state.norm()).abs() > 1e-9 {
        return Err(FockError::Norm(nrm));
    }
    Ok(s)
}

#[derive(Debug, Clone, Copy)]
pub struct MzCalibration {
    pub order: usize,
    /// Coupling between |↑, 0⟩ and |↓, n⟩ in rad/s.
    pub coupling: f64,
    /// Duration of each beamsplitter pulse.
    pub half_pi_time: f64,
}

pub fn calibrate_mz(order: usize, rabi: f64, eta: f64, lamb_dicke: LambDicke) -> Result<MzCalibration, FockError> {
    if order == 0 {
        return Err(FockError::Calibration("order must be at least 1".into()));
    }
    let coupling = DriveSpec { kind: DriveKind::Red(order), rabi, phase: 0.0, eta, lamb_dicke }.matrix_element(0);
    if !(coupling.abs() > 0.0) || !coupling.is_finite() {
        return Err(FockError::Calibration(format!("sideband coupling {coupling} for order {order}")));
    }
    Ok(MzCalibration { order, coupling, half_pi_time: FRAC_PI_4 / coupling.abs() })
}

#[derive(Debug, Clone)]
pub struct MzOutcome {
    pub detect: f64,
    pub calibration: MzCalibration,
    pub final_state: HybridState,
}

/// |↑,0⟩ → π/2 on the nth red sideband → phase nφ on level n → π/2 → P(↑).
pub fn nonlinear_mz(order: usize, phi: f64, rabi: f64, eta: f64, cutoff: usize) -> Result<MzOutcome, FockError> {
    let calibration = calibrate_mz(order, rabi, eta, LambDicke::Full)?;
    let drive = DriveSpec::red(order, rabi, 0.0, eta);
    let h = build_drive(&drive, 2, cutoff)?;
    let input = HybridState::basis(2, cutoff, 1, 0);
    let split = evolve_operator(&input, &h, calibration.half_pi_time, 1)?;
    let shifted = split.phase_shift(phi);
    let out = evolve_operator(&shifted, &h, calibration.half_pi_time, 1)?;
    Ok(MzOutcome { detect: out.level_population(1), calibration, final_state: out })
}

/// The Hermitian quadrature i(a†e^{iφ} − a e^{−iφ})/2: φ = 0 is momentum-like, φ = −π/2 is
/// (a + a†)/2.
pub fn quadrature_operator(phi: f64, cutoff: usize) -> Csr {
    let e = C64::from_polar(1.0, phi);
    let i = C64::new(0.0, 1.0);
    let mut trip = Vec::new();
    for n in 0..cutoff {
        let s = ((n + 1) as f64).sqrt();
        // a†: |n⟩ → |n+1⟩, a: |n+1⟩ → |n⟩
        trip.push((n + 1, n, 0.5 * i * e * s));
        trip.push((n, n + 1, -0.5 * i * e.conj() * s));
    }
    Csr::from_triplets(cutoff + 1, trip)
}

#[derive(Debug, Clone, Copy)]
pub struct QuadratureRoutes {
    pub direct: f64,
    pub slope: f64,
}

/// Route A: ⟨Y_φ⟩ of the motional part. Route B: dP_↑/dτ at τ = 0 under the red sideband,
/// divided by ηΩ̃, by central difference. The state must be |+_φ⟩ ⊗ motion with
/// |+_φ⟩ = (|↓⟩ + e^{iφ}|↑⟩)/√2.
pub fn quadrature_expectation(state: &HybridState, phi: f64, rabi: f64, eta: f64) -> Result<QuadratureRoutes, FockError> {
    if state.internal_dim != 2 {
        return Err(FockError::Dimension("quadrature read-out needs two internal levels".into()));
    }
    let f = state.cutoff + 1;
    let e = C64::from_polar(1.0, phi);
    let down = &state.amplitudes[..f];
    let up = &state.amplitudes[f..];
    let defect = down.iter().zip(up).map(|(d, u)| (u - e * d).norm_sqr()).sum::<f64>().sqrt();
    if defect > 1e-10 {
        return Err(FockError::Protocol(defect));
    }
    let motion: Vec<C64> = down.iter().map(|d| d * std::f64::consts::SQRT_2).collect();
    let direct = quadrature_operator(phi, state.cutoff).expectation(&motion).re;
    let g = eta * rabi;
    if !(g > 0.0) {
        return Err(FockError::Calibration("ηΩ̃ must be positive".into()));
    }
    let h = build_drive(&DriveSpec::red(1, rabi, 0.0, eta).leading_order(), 2, state.cutoff)?;
    let tau = 1e-4 / g;
    let p = |t: f64| {
        let v = expm_multiply(&h, &state.amplitudes, t, 1e-15);
        v[f..].iter().map(|a| a.norm_sqr()).sum::<f64>()
    };
    let slope = (p(tau) - p(-tau)) / (2.0 * tau) / g;
    Ok(QuadratureRoutes { direct, slope })
}
