//! Relativistic and cosmological analogues: trap opening and sideband thermometry, phonon
//! creation under a changing axial confinement, and 1+1 Dirac dynamics.

use crate::foundation::consts::{BOLTZMANN, REDUCED_PLANCK};
use crate::fock_engine::{FockError, HybridState};
use crate::linalg::{expm_multiply, Csr};
use nalgebra::{DMatrix, DVector};
use num_complex::Complex64 as C64;
use std::f64::consts::PI;
use std::sync::Arc;
use thiserror::Error;

/// κ/ν₀ above which the opening is no longer slow.
pub const SLOW_LIMIT: f64 = 1e-2;
/// ν(T)/κ above which the opening has not reached the long-time regime.
pub const LATE_LIMIT: f64 = 0.1;

#[derive(Debug, Error)]
pub enum RelativityError {
    #[error("closed form is singular at zero detuning; use the sideband ratio instead")]
    Singular,
    #[error("invalid parameter: {0}")]
    Parameter(String),
    #[error("integrator failure: {0}")]
    Integrator(String),
    #[error("fit failed: {0}")]
    Fit(String),
    #[error(transparent)]
    Fock(#[from] FockError),
}

type Profile = Arc<dyn Fn(f64) -> f64 + Send + Sync>;

#[derive(Clone)]
pub struct TrapRamp {
    pub nu0: f64,
    /// Opening rate of the exponential profile; 0 for other profiles.
    pub kappa: f64,
    pub duration: f64,
    profile: Option<Profile>,
}

impl std::fmt::Debug for TrapRamp {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("TrapRamp")
            .field("nu0", &self.nu0)
            .field("kappa", &self.kappa)
            .field("duration", &self.duration)
            .field("custom", &self.profile.is_some())
            .finish()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Validity {
    pub slow_ratio: f64,
    pub late_ratio: f64,
    pub slow: bool,
    pub long_time: bool,
}

impl Validity {
    pub fn ok(&self) -> bool {
        self.slow && self.long_time
    }
}

impl TrapRamp {
    /// ν(t) = ν₀e^{−κt}.
    pub fn exponential(nu0: f64, kappa: f64, duration: f64) -> Result<Self, RelativityError> {
        if !(nu0 > 0.0) || !(kappa >= 0.0) || !(duration > 0.0) {
            return Err(RelativityError::Parameter(format!("ν₀={nu0}, κ={kappa}, T={duration}")));
        }
        Ok(TrapRamp { nu0, kappa, duration, profile: None })
    }

    /// Constant frequency ν₀.
    pub fn stationary(nu0: f64, duration: f64) -> Result<Self, RelativityError> {
        Self::exponential(nu0, 0.0, duration)
    }

    pub fn custom<F>(duration: f64, profile: F) -> Result<Self, RelativityError>
    where
        F: Fn(f64) -> f64 + Send + Sync + 'static,
    {
        let nu0 = profile(0.0);
        if !(nu0 > 0.0) || !(duration > 0.0) {
            return Err(RelativityError::Parameter(format!("ν(0)={nu0}, T={duration}")));
        }
        Ok(TrapRamp { nu0, kappa: 0.0, duration, profile: Some(Arc::new(profile)) })
    }

    /// Smooth-step strengthening from ν₀ to ν₁ over `rise`, then held.
    pub fn quench(nu0: f64, nu1: f64, rise: f64, duration: f64) -> Result<Self, RelativityError> {
        if !(nu1 > 0.0) || !(rise > 0.0) {
            return Err(RelativityError::Parameter(format!("ν₁={nu1}, rise={rise}")));
        }
        Self::custom(duration, move |t| {
            let x = (t / rise).clamp(0.0, 1.0);
            nu0 + (nu1 - nu0) * x * x * (3.0 - 2.0 * x)
        })
    }

    pub fn is_exponential(&self) -> bool {
        self.profile.is_none()
    }

    pub fn frequency(&self, t: f64) -> f64 {
        match &self.profile {
            Some(f) => f(t),
            None => self.nu0 * (-self.kappa * t).exp(),
        }
    }

    pub fn validity(&self) -> Validity {
        let slow_ratio = self.kappa / self.nu0;
        let late_ratio = if self.kappa > 0.0 { self.frequency(self.duration) / self.kappa } else { f64::INFINITY };
        Validity { slow_ratio, late_ratio, slow: slow_ratio < SLOW_LIMIT, long_time: late_ratio < LATE_LIMIT }
    }
}

/// First-order excitation probability, (Ωη₀)²(2πν₀/(κΔ²))(e^{πΔ/κ} − 1)⁻².
pub fn unruh_probability(delta: f64, ramp: &TrapRamp, rabi: f64, eta0: f64) -> Result<f64, RelativityError> {
    if !ramp.is_exponential() || !(ramp.kappa > 0.0) {
        return Err(RelativityError::Parameter("closed form needs an exponential opening with κ > 0".into()));
    }
    if delta == 0.0 {
        return Err(RelativityError::Singular);
    }
    let k = ramp.kappa;
    let x = PI * delta / k;
    let denom = x.exp_m1();
    Ok((rabi * eta0).powi(2) * 2.0 * PI * ramp.nu0 / (k * delta * delta) / (denom * denom))
}

/// P(Δ)/P(−Δ) = e^{−2πΔ/κ}.
pub fn sideband_ratio(delta: f64, kappa: f64) -> f64 {
    (-2.0 * PI * delta / kappa).exp()
}

/// ħκ/(2πk_B).
pub fn unruh_temperature(kappa: f64) -> f64 {
    REDUCED_PLANCK * kappa / (2.0 * PI * BOLTZMANN)
}

/// ħ√(3Λ)/k_B for a cosmological constant Λ in s⁻².
pub fn gibbons_hawking_temperature(lambda: f64) -> f64 {
    REDUCED_PLANCK * (3.0 * lambda).sqrt() / BOLTZMANN
}

/// Opening rate whose trap temperature equals the Gibbons-Hawking temperature of Λ.
pub fn kappa_for_lambda(lambda: f64) -> f64 {
    2.0 * PI * (3.0 * lambda).sqrt()
}

pub fn thermal_ratio(nbar: f64) -> f64 {
    nbar / (nbar + 1.0)
}

/// Temperature with n̄/(n̄+1) = e^{−ħν/k_BT}.
pub fn temperature_from_ratio(ratio: f64, frequency: f64) -> f64 {
    REDUCED_PLANCK * frequency / (BOLTZMANN * (1.0 / ratio).ln())
}

/// Mode function u with z(t) = z₀(u a + u* a†), u(0) = 1, started in the adiabatic vacuum.
#[derive(Debug, Clone, Copy)]
pub struct ModeEnd {
    pub u: C64,
    pub du: C64,
    pub reference: f64,
}

impl ModeEnd {
    /// Bogoliubov coefficients against the Fock basis of frequency `omega`.
    pub fn bogoliubov(&self, omega: f64) -> (C64, C64) {
        let i = C64::new(0.0, 1.0);
        let s = 1.0 / (2.0 * (self.reference * omega).sqrt());
        ((omega * self.u + i * self.du) * s, (omega * self.u - i * self.du) * s)
    }

    pub fn occupation(&self, omega: f64) -> f64 {
        self.bogoliubov(omega).1.norm_sqr()
    }

    /// Squeezed-vacuum Fock populations in the basis of frequency `omega`.
    pub fn populations(&self, omega: f64, n_max: usize) -> Vec<f64> {
        let (a, b) = self.bogoliubov(omega);
        let t = (b.norm() / a.norm()).powi(2);
        let mut p = vec![0.0; n_max + 1];
        let mut c = 1.0 / a.norm();
        for m in 0..=n_max / 2 {
            if m > 0 {
                let m = m as f64;
                c *= t * (2.0 * m - 1.0) / (2.0 * m);
            }
            p[2 * m] = c;
        }
        p
    }
}

fn rk4_step<F>(f: &F, t: f64, y: &[C64], h: f64) -> Vec<C64>
where
    F: Fn(f64, &[C64]) -> Vec<C64>,
{
    let k1 = f(t, y);
    let y2: Vec<C64> = y.iter().zip(&k1).map(|(a, k)| a + k * (0.5 * h)).collect();
    let k2 = f(t + 0.5 * h, &y2);
    let y3: Vec<C64> = y.iter().zip(&k2).map(|(a, k)| a + k * (0.5 * h)).collect();
    let k3 = f(t + 0.5 * h, &y3);
    let y4: Vec<C64> = y.iter().zip(&k3).map(|(a, k)| a + k * h).collect();
    let k4 = f(t + h, &y4);
    (0..y.len()).map(|j| y[j] + (k1[j] + 2.0 * k2[j] + 2.0 * k3[j] + k4[j]) * (h / 6.0)).collect()
}

/// RK4 with a step resolving the fastest local rate; `rate(t)` bounds the oscillation frequency.
fn integrate<F, R>(f: F, rate: R, y0: Vec<C64>, duration: f64, resolution: f64) -> Result<Vec<C64>, RelativityError>
where
    F: Fn(f64, &[C64]) -> Vec<C64>,
    R: Fn(f64) -> f64,
{
    let mut t = 0.0;
    let mut y = y0;
    let floor = 1.0 / duration;
    while t < duration {
        let h = (resolution / rate(t).max(floor)).min(duration - t);
        y = rk4_step(&f, t, &y, h);
        t += h;
        if y.iter().any(|v| !v.re.is_finite() || !v.im.is_finite()) {
            return Err(RelativityError::Integrator(format!("non-finite state at t = {t:e}")));
        }
    }
    Ok(y)
}

#[derive(Debug, Clone)]
pub struct TrapOpening {
    pub deltas: Vec<f64>,
    /// P(+|Δ|), the phonon-absorbing sideband.
    pub p_red: Vec<f64>,
    /// P(−|Δ|).
    pub p_blue: Vec<f64>,
    pub ratios: Vec<f64>,
    pub closed_ratios: Vec<f64>,
    pub nbar: f64,
    pub fitted_temperature: f64,
    pub expected_temperature: f64,
    pub validity: Validity,
    pub mode: ModeEnd,
}

/// Amplitude ∫ u*(t)e^{iΔt} dt for each detuning. The laser is taken on adiabatically before
/// the opening starts and stays on while the trap is held at ν(T) afterwards.
pub fn detection_amplitudes(ramp: &TrapRamp, deltas: &[f64]) -> Result<(Vec<C64>, ModeEnd), RelativityError> {
    let i = C64::new(0.0, 1.0);
    let nu0 = ramp.nu0;
    let dmax = deltas.iter().fold(0.0f64, |m, d| m.max(d.abs()));
    let rhs = |t: f64, y: &[C64]| -> Vec<C64> {
        let nu = ramp.frequency(t);
        let mut d = Vec::with_capacity(y.len());
        d.push(y[1]);
        d.push(-nu * nu * y[0]);
        d.extend(deltas.iter().map(|&del| y[0].conj() * C64::from_polar(1.0, del * t)));
        d
    };
    // adiabatic vacuum: u̇ = (−iν − ν̇/2ν)u
    let h = 1e-6 / nu0;
    let nu_dot = (ramp.frequency(h) - nu0) / h;
    let mut y0 = vec![C64::new(1.0, 0.0), C64::new(-0.5 * nu_dot / nu0, -nu0)];
    y0.extend(deltas.iter().map(|_| C64::new(0.0, 0.0)));
    let y = integrate(rhs, |t| ramp.frequency(t).max(dmax), y0, ramp.duration, 0.02)?;
    let (u, du) = (y[0], y[1]);
    let t = ramp.duration;
    let nut = ramp.frequency(t);
    let amps = deltas
        .iter()
        .enumerate()
        .map(|(k, &del)| {
            let head = 1.0 / (i * (nu0 + del));
            let tail = if nut > 1e-9 * del.abs() {
                let a = (u + i * du / nut) * 0.5;
                let b = (u - i * du / nut) * 0.5;
                C64::from_polar(1.0, del * t) * (a.conj() * i / (del + nut) + b.conj() * i / (del - nut))
            } else {
                C64::from_polar(1.0, del * t) * (u.conj() * i / del - du.conj() / (del * del))
            };
            head + y[2 + k] + tail
        })
        .collect();
    Ok((amps, ModeEnd { u, du, reference: nu0 }))
}

/// Sideband read-out after the opening, with the temperature fitted from ln(P_red/P_blue) vs Δ.
pub fn trap_opening_simulation(ramp: &TrapRamp, deltas: &[f64], rabi: f64, eta0: f64) -> Result<TrapOpening, RelativityError> {
    if deltas.is_empty() || deltas.iter().any(|d| !(d.abs() > 0.0)) {
        return Err(RelativityError::Parameter("detunings must be nonzero".into()));
    }
    let mags: Vec<f64> = deltas.iter().map(|d| d.abs()).collect();
    let signed: Vec<f64> = mags.iter().flat_map(|&d| [d, -d]).collect();
    let (amps, mode) = detection_amplitudes(ramp, &signed)?;
    let scale = (rabi * eta0).powi(2);
    let p_red: Vec<f64> = amps.iter().step_by(2).map(|a| scale * a.norm_sqr()).collect();
    let p_blue: Vec<f64> = amps.iter().skip(1).step_by(2).map(|a| scale * a.norm_sqr()).collect();
    let ratios: Vec<f64> = p_red.iter().zip(&p_blue).map(|(r, b)| r / b).collect();
    let closed_ratios = mags.iter().map(|&d| sideband_ratio(d, ramp.kappa)).collect();
    let (sxy, sxx) = mags.iter().zip(&ratios).fold((0.0, 0.0), |(a, b), (d, r)| (a + d * r.ln(), b + d * d));
    let fitted_temperature = -REDUCED_PLANCK / (BOLTZMANN * sxy / sxx);
    let nut = ramp.frequency(ramp.duration);
    Ok(TrapOpening {
        deltas: mags,
        p_red,
        p_blue,
        ratios,
        closed_ratios,
        nbar: mode.occupation(nut),
        fitted_temperature,
        expected_temperature: unruh_temperature(ramp.kappa),
        validity: ramp.validity(),
        mode,
    })
}

#[derive(Debug, Clone)]
pub struct ModeCreation {
    /// Initial normal-mode frequency.
    pub frequency: f64,
    /// Coulomb part ν_κ² = ω_κ² − ν_z(0)².
    pub nu_kappa_sq: f64,
    pub final_frequency: f64,
    pub end: ModeEnd,
    pub alpha: C64,
    pub beta: C64,
    /// Populations in the Fock basis of the final instantaneous frequency.
    pub populations: Vec<f64>,
}

#[derive(Debug, Clone)]
pub struct ParticleCreation {
    pub scaling: f64,
    pub scaling_rate: f64,
    pub modes: Vec<ModeCreation>,
}

/// Scaling ansatz b̈ + ν²b = ν(0)²/b² with each phonon mode a parametric oscillator of
/// frequency² ν² + ν_κ²/b³.
pub fn particle_creation(ramp: &TrapRamp, mode_frequencies: &[f64], n_max: usize) -> Result<ParticleCreation, RelativityError> {
    let nu0 = ramp.nu0;
    let mut extra = Vec::with_capacity(mode_frequencies.len());
    for &w in mode_frequencies {
        let e = w * w - nu0 * nu0;
        if !(e >= -1e-9 * nu0 * nu0) {
            return Err(RelativityError::Parameter(format!("mode frequency {w} below the axial frequency {nu0}")));
        }
        extra.push(e.max(0.0));
    }
    let rhs = |t: f64, y: &[C64]| -> Vec<C64> {
        let nu = ramp.frequency(t);
        let b = y[0].re;
        let mut d = vec![y[1], C64::new(nu0 * nu0 / (b * b) - nu * nu * b, 0.0)];
        for (k, e) in extra.iter().enumerate() {
            let (u, du) = (y[2 + 2 * k], y[3 + 2 * k]);
            d.push(du);
            d.push(-(nu * nu + e / (b * b * b)) * u);
        }
        d
    };
    let h = 1e-6 / nu0;
    let nu_dot = (ramp.frequency(h) - nu0) / h;
    let mut y0 = vec![C64::new(1.0, 0.0), C64::new(0.0, 0.0)];
    for &w in mode_frequencies {
        y0.push(C64::new(1.0, 0.0));
        y0.push(C64::new(-0.5 * nu0 * nu_dot / (w * w), -w));
    }
    let wmax = mode_frequencies.iter().fold(nu0, |m, &w| m.max(w));
    let y = integrate(
        |t, y| {
            if !(y[0].re > 0.0) {
                return vec![C64::new(f64::NAN, 0.0); y.len()];
            }
            rhs(t, y)
        },
        |t| {
            let sc = ramp.frequency(t) / nu0;
            wmax * sc.max(1.0)
        },
        y0,
        ramp.duration,
        0.01,
    )?;
    let b = y[0].re;
    let nut = ramp.frequency(ramp.duration);
    let modes = mode_frequencies
        .iter()
        .zip(&extra)
        .enumerate()
        .map(|(k, (&w, &e))| {
            let end = ModeEnd { u: y[2 + 2 * k], du: y[3 + 2 * k], reference: w };
            let final_frequency = (nut * nut + e / (b * b * b)).sqrt();
            let (alpha, beta) = end.bogoliubov(final_frequency);
            ModeCreation {
                frequency: w,
                nu_kappa_sq: e,
                final_frequency,
                end,
                alpha,
                beta,
                populations: end.populations(final_frequency, n_max),
            }
        })
        .collect();
    Ok(ParticleCreation { scaling: b, scaling_rate: y[1].re, modes })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DiracParams {
    pub eta: f64,
    /// Ground-state spread Δ in m.
    pub delta_spread: f64,
    /// Ω̃ in rad/s.
    pub rabi_sideband: f64,
    /// Ω in rad/s.
    pub rabi_carrier: f64,
}

impl DiracParams {
    pub fn new(eta: f64, delta_spread: f64, rabi_sideband: f64, rabi_carrier: f64) -> Result<Self, RelativityError> {
        if !(eta > 0.0 && delta_spread > 0.0 && rabi_sideband > 0.0 && rabi_carrier >= 0.0) {
            return Err(RelativityError::Parameter(format!(
                "η={eta}, Δ={delta_spread}, Ω̃={rabi_sideband}, Ω={rabi_carrier}"
            )));
        }
        Ok(DiracParams { eta, delta_spread, rabi_sideband, rabi_carrier })
    }

    pub fn with_carrier(self, rabi_carrier: f64) -> Self {
        DiracParams { rabi_carrier, ..self }
    }

    /// c = 2ηΔΩ̃ in m/s.
    pub fn c_eff(&self) -> f64 {
        2.0 * self.eta * self.delta_spread * self.rabi_sideband
    }

    /// mc² = ħΩ in J.
    pub fn rest_energy(&self) -> f64 {
        REDUCED_PLANCK * self.rabi_carrier
    }

    /// E/ħ for a packet of mean momentum p₀ (kg·m/s).
    pub fn energy_rate(&self, p0: f64) -> f64 {
        ((self.c_eff() * p0 / REDUCED_PLANCK).powi(2) + self.rabi_carrier.powi(2)).sqrt()
    }

    /// 2E/ħ.
    pub fn zb_frequency(&self, p0: f64) -> f64 {
        2.0 * self.energy_rate(p0)
    }

    /// ηħ²Ω̃ΩΔ / (4η²Ω̃²Δ²p₀² + ħ²Ω²), in m.
    pub fn zb_amplitude(&self, p0: f64) -> f64 {
        let h = REDUCED_PLANCK;
        let (e, d, w, o) = (self.eta, self.delta_spread, self.rabi_sideband, self.rabi_carrier);
        let den = 4.0 * e * e * w * w * d * d * p0 * p0 + h * h * o * o;
        if den == 0.0 {
            return 0.0;
        }
        e * h * h * w * o * d / den
    }

    /// Momentum p₀ for a dimensionless wave number p₀Δ/ħ.
    pub fn momentum(&self, scaled: f64) -> f64 {
        scaled * REDUCED_PLANCK / self.delta_spread
    }

    /// H/ħ = ηΩ̃ σ_x ⊗ i(a† − a) + Ω σ_z, on level a = 0, b = 1.
    pub fn hamiltonian(&self, cutoff: usize) -> Csr {
        let f = cutoff + 1;
        let g = self.eta * self.rabi_sideband;
        let mut trip = Vec::new();
        for n in 0..f {
            trip.push((n, n, C64::new(self.rabi_carrier, 0.0)));
            trip.push((f + n, f + n, C64::new(-self.rabi_carrier, 0.0)));
        }
        for n in 0..cutoff {
            let s = ((n + 1) as f64).sqrt();
            // i(a† − a): ⟨n+1|·|n⟩ = i√(n+1), ⟨n|·|n+1⟩ = −i√(n+1)
            for (r, c) in [(0, f), (f, 0)] {
                trip.push((r + n + 1, c + n, C64::new(0.0, g * s)));
                trip.push((r + n, c + n + 1, C64::new(0.0, -g * s)));
            }
        }
        Csr::from_triplets(2 * f, trip)
    }
}

fn position_operator(cutoff: usize, delta: f64) -> Csr {
    let f = cutoff + 1;
    let mut trip = Vec::new();
    for off in [0, f] {
        for n in 0..cutoff {
            let s = delta * ((n + 1) as f64).sqrt();
            trip.push((off + n + 1, off + n, C64::new(s, 0.0)));
            trip.push((off + n, off + n + 1, C64::new(s, 0.0)));
        }
    }
    Csr::from_triplets(2 * f, trip)
}

fn momentum_operator(cutoff: usize, delta: f64) -> Csr {
    let f = cutoff + 1;
    let p0 = REDUCED_PLANCK / (2.0 * delta);
    let mut trip = Vec::new();
    for off in [0, f] {
        for n in 0..cutoff {
            let s = p0 * ((n + 1) as f64).sqrt();
            trip.push((off + n + 1, off + n, C64::new(0.0, s)));
            trip.push((off + n, off + n + 1, C64::new(0.0, -s)));
        }
    }
    Csr::from_triplets(2 * f, trip)
}

fn sigma_x_operator(cutoff: usize) -> Csr {
    let f = cutoff + 1;
    let trip = (0..f).flat_map(|n| [(n, f + n, C64::new(1.0, 0.0)), (f + n, n, C64::new(1.0, 0.0))]).collect();
    Csr::from_triplets(2 * f, trip)
}

/// Runs the normalized recursion for h_0(ξ)..h_cutoff(ξ), passing each value to `visit`.
fn hermite_at(cutoff: usize, x: f64, mut visit: impl FnMut(usize, f64)) {
    // h_0 underflows beyond |ξ| ≈ 38, so the recursion carries a separate log scale
    let mut log_scale = -0.5 * x * x;
    let (mut prev, mut cur) = (0.0, PI.powf(-0.25));
    visit(0, cur * log_scale.exp());
    for n in 0..cutoff {
        let next = if n == 0 {
            2f64.sqrt() * x * cur
        } else {
            (2.0 / (n as f64 + 1.0)).sqrt() * x * cur - (n as f64 / (n as f64 + 1.0)).sqrt() * prev
        };
        prev = cur;
        cur = next;
        if cur.abs() > 1e150 {
            prev *= 1e-150;
            cur *= 1e-150;
            log_scale += 150.0 * std::f64::consts::LN_10;
        }
        visit(n + 1, cur * log_scale.exp());
    }
}

/// Normalized oscillator eigenfunctions on a grid, one row per n.
fn hermite_functions(cutoff: usize, xi: &[f64]) -> DMatrix<f64> {
    let mut h = DMatrix::zeros(cutoff + 1, xi.len());
    for (j, &x) in xi.iter().enumerate() {
        hermite_at(cutoff, x, |n, v| h[(n, j)] = v);
    }
    h
}

/// Uniform ξ grid covering the support of h_cutoff, with `per_node` points per nodal spacing.
fn oscillator_grid(cutoff: usize, per_node: f64) -> (Vec<f64>, f64) {
    let reach = (2.0 * cutoff as f64 + 1.0).sqrt() + 8.0;
    let step = PI / (2.0 * cutoff as f64 + 1.0).sqrt() / per_node;
    let n = (2.0 * reach / step).ceil() as usize + 1;
    ((0..n).map(|k| -reach + k as f64 * step).collect(), step)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Wavepacket {
    /// Centre in m.
    pub center: f64,
    /// Position spread σ_x in m.
    pub width: f64,
    /// Mean momentum in kg·m/s.
    pub momentum: f64,
    pub spinor: [C64; 2],
}

/// Gaussian packet ⊗ spinor expanded in the Fock basis of spread Δ.
pub fn wavepacket_state(params: &DiracParams, packet: &Wavepacket, cutoff: usize) -> Result<HybridState, RelativityError> {
    let d = params.delta_spread;
    if !(packet.width > 0.0) {
        return Err(RelativityError::Parameter("packet width must be positive".into()));
    }
    let (xc, w, k) = (packet.center / d, packet.width / d, packet.momentum * d / REDUCED_PLANCK);
    let (xi, step) = oscillator_grid(cutoff, 6.0);
    let norm = 2f64.powf(0.25) * (2.0 * PI * w * w).powf(-0.25);
    let mut motion = vec![C64::new(0.0, 0.0); cutoff + 1];
    for &s in &xi {
        let x = 2f64.sqrt() * s;
        let g = (x - xc).powi(2) / (4.0 * w * w);
        if g > 700.0 {
            continue;
        }
        let phi = C64::from_polar(norm * (-g).exp() * step, k * x);
        hermite_at(cutoff, s, |n, v| motion[n] += phi * v);
    }
    let captured: f64 = motion.iter().map(|a| a.norm_sqr()).sum();
    if (1.0 - captured).abs() > 1e-8 {
        return Err(FockError::Truncation { population: (1.0 - captured).abs(), cutoff }.into());
    }
    let sn = (packet.spinor[0].norm_sqr() + packet.spinor[1].norm_sqr()).sqrt();
    let mut s = HybridState::product(&[packet.spinor[0] / sn, packet.spinor[1] / sn], &motion);
    let nrm = s.norm();
    s.amplitudes.iter_mut().for_each(|a| *a /= nrm);
    s.check_truncation()?;
    Ok(s)
}

/// Positive-energy spinor (E + mc², c p₀)/norm of the free Dirac operator.
pub fn positive_energy_spinor(params: &DiracParams, p0: f64) -> [C64; 2] {
    let e = params.energy_rate(p0);
    let a = e + params.rabi_carrier;
    let b = params.c_eff() * p0 / REDUCED_PLANCK;
    let n = (a * a + b * b).sqrt();
    [C64::new(a / n, 0.0), C64::new(b / n, 0.0)]
}

#[derive(Debug, Clone, Default)]
pub struct Trajectory {
    pub times: Vec<f64>,
    pub x: Vec<f64>,
    pub p: Vec<f64>,
    /// d⟨x⟩/dt = c⟨σ_x⟩.
    pub velocity: Vec<f64>,
    pub p_b: Vec<f64>,
    pub energy: Vec<f64>,
}

impl Trajectory {
    pub fn max_speed(&self) -> f64 {
        self.velocity.iter().fold(0.0f64, |m, v| m.max(v.abs()))
    }
}

fn record(traj: &mut Trajectory, t: f64, s: &[C64], ops: &[&Csr; 4], c: f64, f: usize) {
    traj.times.push(t);
    traj.x.push(ops[0].expectation(s).re);
    traj.p.push(ops[1].expectation(s).re);
    traj.velocity.push(c * ops[2].expectation(s).re);
    traj.energy.push(ops[3].expectation(s).re);
    traj.p_b.push(s[f..].iter().map(|a| a.norm_sqr()).sum());
}

fn run_trajectory(
    params: &DiracParams,
    initial: &HybridState,
    duration: f64,
    samples: usize,
    h_at: impl Fn(f64) -> Csr,
) -> Result<Trajectory, RelativityError> {
    if initial.internal_dim != 2 {
        return Err(RelativityError::Parameter("Dirac spinor needs two internal levels".into()));
    }
    let cutoff = initial.cutoff;
    let f = cutoff + 1;
    let x = position_operator(cutoff, params.delta_spread);
    let p = momentum_operator(cutoff, params.delta_spread);
    let sx = sigma_x_operator(cutoff);
    let h0 = params.hamiltonian(cutoff).scale(REDUCED_PLANCK);
    let ops = [&x, &p, &sx, &h0];
    let samples = samples.max(1);
    let dt = duration / samples as f64;
    let mut traj = Trajectory::default();
    let mut s = initial.amplitudes.clone();
    record(&mut traj, 0.0, &s, &ops, params.c_eff(), f);
    for k in 0..samples {
        let h = h_at(k as f64 * dt);
        s = expm_multiply(&h, &s, dt, 1e-12);
        record(&mut traj, (k + 1) as f64 * dt, &s, &ops, params.c_eff(), f);
    }
    let state = HybridState { internal_dim: 2, cutoff, amplitudes: s };
    state.check_truncation()?;
    if (state.norm() - 1.0).abs() > 1e-8 {
        return Err(FockError::Norm(state.norm()).into());
    }
    Ok(traj)
}

pub fn dirac_evolution(params: &DiracParams, initial: &HybridState, duration: f64, samples: usize) -> Result<Trajectory, RelativityError> {
    let h = params.hamiltonian(initial.cutoff);
    run_trajectory(params, initial, duration, samples, |_| h.clone())
}

#[derive(Debug, Clone, Copy)]
pub struct ZbFit {
    pub offset: f64,
    pub drift: f64,
    pub amplitude: f64,
    pub omega: f64,
    pub phase: f64,
    pub rms_residual: f64,
}

fn linear_zb(t: &[f64], x: &[f64], omega: f64) -> (DVector<f64>, f64) {
    let a = DMatrix::from_fn(t.len(), 4, |i, j| match j {
        0 => 1.0,
        1 => t[i],
        2 => (omega * t[i]).sin(),
        _ => (omega * t[i]).cos(),
    });
    let b = DVector::from_column_slice(x);
    let coef = a.clone().svd(true, true).solve(&b, 1e-14).unwrap_or_else(|_| DVector::zeros(4));
    let r = (&a * &coef - b).norm();
    (coef, r)
}

/// Least-squares x(t) ≈ a₀ + a₁t + R sin(ωt + χ), refined from the guess ω₀ by
/// Gauss-Newton on ω with the linear parameters eliminated.
pub fn fit_zitterbewegung(traj: &Trajectory, omega_guess: f64) -> Result<ZbFit, RelativityError> {
    let n = traj.times.len();
    if n < 8 || !(omega_guess > 0.0) {
        return Err(RelativityError::Fit(format!("{n} samples, ω guess {omega_guess}")));
    }
    let scale = traj.x.iter().fold(0.0f64, |m, v| m.max(v.abs())).max(f64::MIN_POSITIVE);
    let xs: Vec<f64> = traj.x.iter().map(|v| v / scale).collect();
    let cost = |w: f64| linear_zb(&traj.times, &xs, w).1;
    let mut w = omega_guess;
    let mut h = 0.05 * omega_guess;
    for _ in 0..80 {
        let (c0, cm, cp) = (cost(w), cost(w - h), cost(w + h));
        let curv = cp + cm - 2.0 * c0;
        let next = if curv > 0.0 { w - 0.5 * h * (cp - cm) / curv } else if cp < cm { w + h } else { w - h };
        let next = next.clamp(w - 2.0 * h, w + 2.0 * h);
        if cost(next) < c0 {
            w = next;
        }
        h *= 0.6;
        if h < 1e-12 * omega_guess {
            break;
        }
    }
    let (coef, r) = linear_zb(&traj.times, &xs, w);
    let (s, c) = (coef[2] * scale, coef[3] * scale);
    Ok(ZbFit {
        offset: coef[0] * scale,
        drift: coef[1] * scale,
        amplitude: (s * s + c * c).sqrt(),
        omega: w,
        phase: c.atan2(s),
        rms_residual: r * scale / (n as f64).sqrt(),
    })
}

/// Amplitude of the oscillation at a fixed frequency, drift removed.
pub fn zb_amplitude_at(traj: &Trajectory, omega: f64) -> f64 {
    let (coef, _) = linear_zb(&traj.times, &traj.x, omega);
    (coef[2] * coef[2] + coef[3] * coef[3]).sqrt()
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum StepShape {
    /// V(|a⟩⟨a| + |b⟩⟨b|), a global energy offset.
    Global,
    /// V·Θ(x − x_s) on both levels, smoothed as (1 + tanh((x − x_s)/w))/2; lengths in m.
    Spatial { position: f64, smoothing: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KleinStep {
    /// V/ħ in rad/s.
    pub height: f64,
    pub t0: f64,
    pub shape: StepShape,
}

#[derive(Debug, Clone)]
pub struct KleinResult {
    pub trajectory: Trajectory,
    pub p_b_at_t0: f64,
    pub p_b_final: f64,
    pub growth: f64,
    pub supercritical: bool,
}

fn step_operator(params: &DiracParams, shape: StepShape, cutoff: usize) -> Csr {
    let f = cutoff + 1;
    match shape {
        StepShape::Global => Csr::from_triplets(2 * f, (0..2 * f).map(|k| (k, k, C64::new(1.0, 0.0))).collect()),
        StepShape::Spatial { position, smoothing } => {
            let (xi, step) = oscillator_grid(cutoff, 12.0);
            let h = hermite_functions(cutoff, &xi);
            let (xs, w) = (position / params.delta_spread, smoothing / params.delta_spread);
            let theta = DVector::from_iterator(xi.len(), xi.iter().map(|s| 0.5 * (1.0 + ((2f64.sqrt() * s - xs) / w).tanh())));
            let mut weighted = h.clone();
            for (j, mut col) in weighted.column_iter_mut().enumerate() {
                col *= theta[j] * step;
            }
            let m = &h * weighted.transpose();
            let mut trip = Vec::new();
            for r in 0..f {
                for c in 0..f {
                    let v = m[(r, c)];
                    if v.abs() > 1e-14 {
                        trip.push((r, c, C64::new(v, 0.0)));
                        trip.push((f + r, f + c, C64::new(v, 0.0)));
                    }
                }
            }
            Csr::from_triplets(2 * f, trip)
        }
    }
}

/// H_D, plus the step switched on at t₀; P_b is tracked throughout.
pub fn klein_step(
    params: &DiracParams,
    initial: &HybridState,
    step: &KleinStep,
    duration: f64,
    samples: usize,
) -> Result<KleinResult, RelativityError> {
    if !(step.height >= 0.0) {
        return Err(RelativityError::Parameter(format!("step height {}", step.height)));
    }
    let h0 = params.hamiltonian(initial.cutoff);
    let hv = h0.combine(C64::new(1.0, 0.0), &step_operator(params, step.shape, initial.cutoff), C64::new(step.height, 0.0));
    let t0 = step.t0;
    let trajectory = run_trajectory(params, initial, duration, samples, |t| if t + 1e-12 * duration >= t0 { hv.clone() } else { h0.clone() })?;
    let k0 = trajectory.times.iter().position(|&t| t >= t0 - 1e-12 * duration).unwrap_or(0);
    let p_b_at_t0 = trajectory.p_b[k0];
    let p_b_final = *trajectory.p_b.last().unwrap_or(&p_b_at_t0);
    Ok(KleinResult {
        p_b_at_t0,
        p_b_final,
        growth: p_b_final - p_b_at_t0,
        supercritical: step.height > 2.0 * params.rabi_carrier,
        trajectory,
    })
}
