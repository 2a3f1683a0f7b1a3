//! Equilibrium configuration and normal modes of a linear Coulomb chain.
//!
//! Positions are solved in units of the length scale ζ = (e²/4πε₀mν₁²)^{1/3}, where the
//! potential energy per mν₁²ζ² reads Σ cᵢ(uᵢ−wᵢ)²/2 + Σ_{i<j} 1/|uᵢ−uⱼ|.

use crate::foundation::{consts, coulomb_constant, IonSpecies, TrapConfig};
use crate::linalg::eigh_real;
use nalgebra::DMatrix;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum StaticsError {
    #[error("frequency must be positive, got {0}")]
    Domain(f64),
    #[error("equilibrium search did not converge: gradient norm {residual:.3e} after {iterations} iterations")]
    NoConvergence { residual: f64, iterations: usize },
    #[error("Hessian is not positive definite (lowest eigenvalue {0:.3e}); the linear chain is unstable")]
    Unstable(f64),
    #[error("invalid axial potential: {0}")]
    Potential(String),
    #[error("at least one ion is required")]
    Empty,
}

/// Axial confinement. `SiteWells` gives every ion its own quadratic well: curvature in units of
/// mν_z² and centre in units of ζ.
#[derive(Debug, Clone, PartialEq)]
pub enum AxialPotential {
    Harmonic,
    SiteWells { curvature: Vec<f64>, centres: Vec<f64> },
}

impl AxialPotential {
    /// Two equal harmonic wells at ±separation/2 (ζ units) holding n/2 ions each.
    pub fn double_well(n: usize, separation: f64) -> Self {
        let centres = (0..n)
            .map(|i| if i < n / 2 { -separation / 2.0 } else { separation / 2.0 })
            .collect();
        AxialPotential::SiteWells { curvature: vec![1.0; n], centres }
    }

    /// Equally spaced microtraps of identical curvature.
    pub fn microtraps(n: usize, spacing: f64, curvature: f64) -> Self {
        let off = (n as f64 - 1.0) / 2.0;
        AxialPotential::SiteWells {
            curvature: vec![curvature; n],
            centres: (0..n).map(|i| (i as f64 - off) * spacing).collect(),
        }
    }

    fn resolve(&self, n: usize) -> Result<(Vec<f64>, Vec<f64>), StaticsError> {
        match self {
            AxialPotential::Harmonic => Ok((vec![1.0; n], vec![0.0; n])),
            AxialPotential::SiteWells { curvature, centres } => {
                if curvature.len() != n || centres.len() != n {
                    return Err(StaticsError::Potential(format!(
                        "expected {n} curvatures and centres, got {} and {}",
                        curvature.len(),
                        centres.len()
                    )));
                }
                if curvature.iter().any(|&c| !(c > 0.0)) {
                    return Err(StaticsError::Potential("curvatures must be positive".into()));
                }
                if centres.windows(2).any(|w| w[1] < w[0]) {
                    return Err(StaticsError::Potential("well centres must be non-decreasing".into()));
                }
                Ok((curvature.clone(), centres.clone()))
            }
        }
    }
}

#[derive(Debug, Clone)]
pub struct ChainEquilibrium {
    /// Positions in m, ascending.
    pub positions: Vec<f64>,
    /// Positions in units of ζ.
    pub scaled: Vec<f64>,
    pub length_scale_zeta: f64,
    pub trap: TrapConfig,
    pub species: IonSpecies,
    /// Site curvatures in units of mν_z².
    pub curvature: Vec<f64>,
}

#[derive(Debug, Clone)]
pub struct NormalModes {
    /// Angular frequencies, ascending.
    pub frequencies: Vec<f64>,
    /// Column n is the normalized displacement pattern S_{·n}.
    pub mode_matrix: DMatrix<f64>,
    /// Ground-state extension √(ħ/2mν_n) per mode, m.
    pub ground_state_spreads: Vec<f64>,
}

impl NormalModes {
    pub fn len(&self) -> usize {
        self.frequencies.len()
    }

    pub fn is_empty(&self) -> bool {
        self.frequencies.is_empty()
    }

    pub fn s(&self, ion: usize, mode: usize) -> f64 {
        self.mode_matrix[(ion, mode)]
    }
}

pub fn length_scale(species: &IonSpecies, nu1: f64) -> Result<f64, StaticsError> {
    if !(nu1 > 0.0) {
        return Err(StaticsError::Domain(nu1));
    }
    Ok((coulomb_constant(species) / (species.mass() * nu1 * nu1)).cbrt())
}

/// The empirical minimum-spacing fit 2ζN^{-0.56}.
pub fn spacing_estimate(n: usize, zeta: f64) -> f64 {
    2.0 * zeta * (n as f64).powf(-0.56)
}

pub fn ground_state_spread(species: &IonSpecies, nu: f64) -> Result<f64, StaticsError> {
    if !(nu > 0.0) {
        return Err(StaticsError::Domain(nu));
    }
    Ok((consts::REDUCED_PLANCK / (2.0 * species.mass() * nu)).sqrt())
}

/// Dimensionless potential energy.
pub fn scaled_energy(u: &[f64], curvature: &[f64], centres: &[f64]) -> f64 {
    let mut e = 0.0;
    for i in 0..u.len() {
        e += 0.5 * curvature[i] * (u[i] - centres[i]).powi(2);
        for j in 0..i {
            e += 1.0 / (u[i] - u[j]).abs();
        }
    }
    e
}

pub fn scaled_gradient(u: &[f64], curvature: &[f64], centres: &[f64]) -> Vec<f64> {
    let n = u.len();
    let mut g: Vec<f64> = (0..n).map(|i| curvature[i] * (u[i] - centres[i])).collect();
    for i in 0..n {
        for j in 0..i {
            let d = u[i] - u[j];
            let f = d.signum() / (d * d);
            g[i] -= f;
            g[j] += f;
        }
    }
    g
}

/// Axial Hessian in units of mν_z²: A_ii = c_i + Σ 2/|u_ij|³, A_ij = −2/|u_ij|³.
pub fn axial_hessian(u: &[f64], curvature: &[f64]) -> DMatrix<f64> {
    let n = u.len();
    let mut a = DMatrix::zeros(n, n);
    for i in 0..n {
        a[(i, i)] = curvature[i];
        for j in 0..n {
            if i != j {
                let k = 2.0 / (u[i] - u[j]).abs().powi(3);
                a[(i, j)] = -k;
                a[(i, i)] += k;
            }
        }
    }
    a
}

/// Radial Hessian in units of mν_z² for radial-to-axial ratio `beta` = ν_x/ν_z:
/// B_ii = β² − Σ 1/|u_ij|³, B_ij = 1/|u_ij|³.
pub fn radial_hessian(u: &[f64], beta: f64) -> DMatrix<f64> {
    let n = u.len();
    let mut b = DMatrix::zeros(n, n);
    for i in 0..n {
        b[(i, i)] = beta * beta;
        for j in 0..n {
            if i != j {
                let k = 1.0 / (u[i] - u[j]).abs().powi(3);
                b[(i, j)] = k;
                b[(i, i)] -= k;
            }
        }
    }
    b
}

fn initial_guess(curvature: &[f64], centres: &[f64]) -> Vec<f64> {
    let n = centres.len();
    let mut u = vec![0.0; n];
    let mut start = 0;
    while start < n {
        let mut end = start + 1;
        while end < n && centres[end] == centres[start] {
            end += 1;
        }
        let m = end - start;
        let c = curvature[start..end].iter().sum::<f64>() / m as f64;
        let spacing = if m > 1 { 2.0 * (m as f64).powf(-0.56) * c.cbrt().recip() } else { 0.0 };
        let off = (m as f64 - 1.0) / 2.0;
        for k in 0..m {
            u[start + k] = centres[start] + (k as f64 - off) * spacing;
        }
        start = end;
    }
    // resolve overlaps between neighbouring groups
    for i in 1..n {
        if u[i] <= u[i - 1] {
            u[i] = u[i - 1] + 1e-2;
        }
    }
    u
}

fn sorted_strictly(u: &[f64]) -> bool {
    u.windows(2).all(|w| w[1] > w[0])
}

/// Newton iteration with backtracking line search; falls back to damped gradient steps when the
/// Newton direction is not a descent direction.
pub fn solve_scaled(curvature: &[f64], centres: &[f64]) -> Result<Vec<f64>, StaticsError> {
    let n = curvature.len();
    if n == 0 {
        return Err(StaticsError::Empty);
    }
    let mut u = initial_guess(curvature, centres);
    let mut e = scaled_energy(&u, curvature, centres);
    let max_iter = 500;
    let mut gnorm = f64::INFINITY;
    for _ in 0..max_iter {
        let g = scaled_gradient(&u, curvature, centres);
        gnorm = g.iter().map(|x| x * x).sum::<f64>().sqrt();
        if gnorm < 1e-13 {
            return Ok(u);
        }
        let h = axial_hessian(&u, curvature);
        let gv = nalgebra::DVector::from_column_slice(&g);
        let mut dir: Vec<f64> = match h.clone().cholesky() {
            Some(ch) => ch.solve(&gv).iter().map(|x| -x).collect(),
            None => g.iter().map(|x| -x).collect(),
        };
        let slope: f64 = dir.iter().zip(&g).map(|(d, g)| d * g).sum();
        if slope >= 0.0 {
            dir = g.iter().map(|x| -x).collect();
        }
        let mut step = 1.0;
        let mut accepted = false;
        for _ in 0..60 {
            let trial: Vec<f64> = u.iter().zip(&dir).map(|(a, d)| a + step * d).collect();
            if sorted_strictly(&trial) {
                let et = scaled_energy(&trial, curvature, centres);
                // close to the minimum energy differences drown in rounding; use the gradient
                let better = if gnorm < 1e-6 {
                    let gt = scaled_gradient(&trial, curvature, centres);
                    gt.iter().map(|x| x * x).sum::<f64>().sqrt() < gnorm
                } else {
                    et <= e
                };
                if better {
                    u = trial;
                    e = et;
                    accepted = true;
                    break;
                }
            }
            step *= 0.5;
        }
        if !accepted {
            // at machine precision the energy can no longer resolve progress
            if gnorm < 1e-9 {
                return Ok(u);
            }
            break;
        }
    }
    if gnorm < 1e-10 {
        return Ok(u);
    }
    Err(StaticsError::NoConvergence { residual: gnorm, iterations: max_iter })
}

pub fn equilibrium_positions(
    n: usize,
    species: &IonSpecies,
    trap: &TrapConfig,
) -> Result<ChainEquilibrium, StaticsError> {
    equilibrium_in(n, species, trap, &AxialPotential::Harmonic)
}

pub fn equilibrium_in(
    n: usize,
    species: &IonSpecies,
    trap: &TrapConfig,
    potential: &AxialPotential,
) -> Result<ChainEquilibrium, StaticsError> {
    if n == 0 {
        return Err(StaticsError::Empty);
    }
    let zeta = length_scale(species, trap.nu_z)?;
    let (curvature, centres) = potential.resolve(n)?;
    let mut scaled = solve_scaled(&curvature, &centres)?;
    if matches!(potential, AxialPotential::Harmonic) {
        // enforce the mirror symmetry the harmonic problem has exactly
        let s: Vec<f64> = (0..n).map(|i| 0.5 * (scaled[i] - scaled[n - 1 - i])).collect();
        scaled = s;
    }
    Ok(ChainEquilibrium {
        positions: scaled.iter().map(|u| u * zeta).collect(),
        scaled,
        length_scale_zeta: zeta,
        trap: *trap,
        species: species.clone(),
        curvature,
    })
}

fn modes_from(
    hessian: &DMatrix<f64>,
    nu_scale: f64,
    species: &IonSpecies,
) -> Result<NormalModes, StaticsError> {
    let (vals, mut vecs) = eigh_real(hessian);
    if vals[0] <= 0.0 {
        return Err(StaticsError::Unstable(vals[0]));
    }
    let n = vals.len();
    for k in 0..n {
        // sign convention: the first component that is not negligible is positive
        let col = vecs.column(k);
        let lead = col.iter().copied().find(|x| x.abs() > 1e-8).unwrap_or(1.0);
        if lead < 0.0 {
            vecs.column_mut(k).neg_mut();
        }
    }
    let frequencies: Vec<f64> = vals.iter().map(|l| nu_scale * l.sqrt()).collect();
    let ground_state_spreads = frequencies
        .iter()
        .map(|&nu| ground_state_spread(species, nu))
        .collect::<Result<_, _>>()?;
    Ok(NormalModes { frequencies, mode_matrix: vecs, ground_state_spreads })
}

pub fn normal_modes(eq: &ChainEquilibrium) -> Result<NormalModes, StaticsError> {
    modes_from(&axial_hessian(&eq.scaled, &eq.curvature), eq.trap.nu_z, &eq.species)
}

/// Transverse modes along x; fails with `Unstable` past the zigzag threshold.
pub fn radial_modes(eq: &ChainEquilibrium) -> Result<NormalModes, StaticsError> {
    let beta = eq.trap.nu_x / eq.trap.nu_z;
    modes_from(&radial_hessian(&eq.scaled, beta), eq.trap.nu_z, &eq.species)
}
