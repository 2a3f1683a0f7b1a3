//! Magnetic-gradient spin-spin couplings and the direct dipole-dipole estimate.
//!
//! Exported couplings follow H = -(ħ/2) Σ_{i<j} J_ij σᶻ_i σᶻ_j.

use crate::chain_statics::{ChainEquilibrium, NormalModes};
use crate::foundation::{consts, IonSpecies};
use nalgebra::DMatrix;
use std::f64::consts::PI;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum CouplingError {
    #[error("separation must be positive, got {0}")]
    Separation(f64),
    #[error("frequency must be positive, got {0}")]
    Frequency(f64),
    #[error("dimension mismatch: {modes} modes but {ions} ion gradients")]
    Dimension { modes: usize, ions: usize },
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GradientField {
    /// Offset field, T.
    pub offset_b0: f64,
    /// dB/dz, T/m.
    pub gradient_b: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FrequencyGradients {
    /// Resonance frequency of each ion, rad/s.
    pub omega: Vec<f64>,
    /// ∂ω/∂z of each ion, rad/(s·m).
    pub d_omega: Vec<f64>,
}

impl FrequencyGradients {
    pub fn uniform(n: usize, d_omega: f64) -> Self {
        FrequencyGradients { omega: vec![0.0; n], d_omega: vec![d_omega; n] }
    }
}

#[derive(Debug, Clone)]
pub struct CouplingMatrix {
    /// Spin-spin couplings, rad/s, zero diagonal.
    pub j: DMatrix<f64>,
    /// Self-energy terms J_ii removed from `j`.
    pub self_energy: Vec<f64>,
    pub epsilon: DMatrix<f64>,
}

pub fn dipole_dipole_shift(gamma1: f64, gamma2: f64, separation: f64, theta: f64) -> Result<f64, CouplingError> {
    if !(separation > 0.0) {
        return Err(CouplingError::Separation(separation));
    }
    let mu = consts::VACUUM_PERMEABILITY / (4.0 * PI);
    let angular = 3.0 * theta.cos().powi(2) - 1.0;
    Ok(consts::REDUCED_PLANCK / 4.0 * mu * gamma1 * gamma2 * angular / separation.powi(3))
}

pub fn gradients_from_field(eq: &ChainEquilibrium, field: &GradientField, gamma: f64) -> FrequencyGradients {
    FrequencyGradients {
        omega: eq.positions.iter().map(|z| gamma * (field.offset_b0 + field.gradient_b * z)).collect(),
        d_omega: vec![gamma * field.gradient_b; eq.positions.len()],
    }
}

fn check(modes: &NormalModes, grads: &FrequencyGradients) -> Result<(), CouplingError> {
    if modes.len() != grads.d_omega.len() {
        return Err(CouplingError::Dimension { modes: modes.len(), ions: grads.d_omega.len() });
    }
    Ok(())
}

/// ε_in = Δz_n ∂ω_i S_in / ν_n.
pub fn epsilon_matrix(modes: &NormalModes, grads: &FrequencyGradients) -> Result<DMatrix<f64>, CouplingError> {
    check(modes, grads)?;
    let n = modes.len();
    Ok(DMatrix::from_fn(n, n, |i, m| {
        modes.ground_state_spreads[m] * grads.d_omega[i] * modes.s(i, m) / modes.frequencies[m]
    }))
}

/// J_ij = Σ_n ν_n ε_in ε_jn with the diagonal split off into `self_energy`.
pub fn j_matrix(modes: &NormalModes, grads: &FrequencyGradients) -> Result<CouplingMatrix, CouplingError> {
    let epsilon = epsilon_matrix(modes, grads)?;
    let n = modes.len();
    let mut j = DMatrix::zeros(n, n);
    for a in 0..n {
        for b in a..n {
            let v: f64 = (0..n).map(|m| modes.frequencies[m] * epsilon[(a, m)] * epsilon[(b, m)]).sum();
            j[(a, b)] = v;
            j[(b, a)] = v;
        }
    }
    let self_energy = (0..n).map(|a| j[(a, a)]).collect();
    j.fill_diagonal(0.0);
    Ok(CouplingMatrix { j, self_energy, epsilon })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SingleIonShift {
    /// Internal-energy change divided by ħ, rad/s.
    pub energy_shift: f64,
    pub eta_eff: f64,
    /// Static displacement d_z, m.
    pub displacement: f64,
}

pub fn single_ion_shift(species: &IonSpecies, nu: f64, grad: f64) -> Result<SingleIonShift, CouplingError> {
    if !(nu > 0.0) {
        return Err(CouplingError::Frequency(nu));
    }
    let hbar = consts::REDUCED_PLANCK;
    let m = species.mass();
    let force = 0.5 * hbar * grad;
    let displacement = force / (m * nu * nu);
    let spread = (hbar / (2.0 * m * nu)).sqrt();
    Ok(SingleIonShift {
        energy_shift: -force * force / (hbar * m * nu * nu),
        eta_eff: displacement / spread,
        displacement,
    })
}
