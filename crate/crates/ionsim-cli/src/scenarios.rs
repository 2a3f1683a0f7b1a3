use crate::config::{parse_params, Sweep};
use crate::error::CliError;
use crate::output::{Cell, Check, Outcome, Table};
use ionsim::chain_statics::{equilibrium_in, equilibrium_positions, normal_modes, AxialPotential};
use ionsim::fkim::{self, FkConfig};
use ionsim::fock_engine::{nonlinear_mz, HybridState};
use ionsim::foundation::{mhz_to_angular, species_lookup, IonSpecies, TrapConfig};
use ionsim::hopfield::{capacity_scan, half_crossing, robustness_experiment};
use ionsim::phonon_lattice::{hopping_matrix, interaction_scan};
use ionsim::relativity::{
    dirac_evolution, fit_zitterbewegung, klein_step, positive_energy_spinor, trap_opening_simulation,
    wavepacket_state, zb_amplitude_at, DiracParams, KleinStep, StepShape, TrapRamp, Wavepacket,
};
use ionsim::spin_coupling::{j_matrix, FrequencyGradients};
use ionsim::spin_dynamics::{
    correlation_decay, distance_average, ground_correlations, ground_state, long_range_plateau, ordered_plateau,
    two_spin_adiabatic_ramp, Axis, SpinHamiltonian,
};
use num_complex::Complex64 as C64;
use rayon::prelude::*;
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};
use std::f64::consts::TAU;

pub struct Field {
    pub name: &'static str,
    pub kind: &'static str,
    pub default: Option<&'static str>,
    pub help: &'static str,
}

pub struct Scenario {
    pub id: &'static str,
    pub summary: &'static str,
    pub fields: &'static [Field],
    validate: fn(&toml::Table) -> Result<Value, CliError>,
    run: fn(&toml::Table, u64) -> Result<Outcome, CliError>,
}

impl Scenario {
    /// Schema-check the params and return them with defaults filled in.
    pub fn validate(&self, params: &toml::Table) -> Result<Value, CliError> {
        (self.validate)(params)
    }

    pub fn run(&self, params: &toml::Table, seed: u64) -> Result<Outcome, CliError> {
        (self.run)(params, seed)
    }

    /// Smallest params table that passes validation.
    pub fn example(&self) -> toml::Table {
        let mut t = toml::Table::new();
        for f in self.fields.iter().filter(|f| f.default.is_none()) {
            let v = match f.kind {
                "integer" => toml::Value::Integer(2),
                "float" => toml::Value::Float(1.0),
                _ => toml::Value::String("1".into()),
            };
            t.insert(f.name.into(), v);
        }
        t
    }
}

fn echo<T: DeserializeOwned + Serialize>(params: &toml::Table) -> Result<Value, CliError> {
    let typed: T = parse_params(params)?;
    Ok(serde_json::to_value(typed).expect("params serialize"))
}

const fn field(name: &'static str, kind: &'static str, default: Option<&'static str>, help: &'static str) -> Field {
    Field { name, kind, default, help }
}

pub fn registry() -> &'static [Scenario] {
    &REGISTRY
}

pub fn lookup(id: &str) -> Option<&'static Scenario> {
    REGISTRY.iter().find(|s| s.id == id)
}

static REGISTRY: [Scenario; 9] = [
    Scenario {
        id: "statics",
        summary: "equilibrium positions and axial normal modes of a linear chain",
        fields: &[
            field("species", "string", Some("Ca-40"), "ion species name"),
            field("f_mhz", "float", None, "axial trap frequency, MHz"),
            field("n", "integer", None, "number of ions"),
            field("radial_mhz", "float", Some("10 × f_mhz"), "radial trap frequency, MHz"),
        ],
        validate: echo::<StaticsParams>,
        run: run_statics,
    },
    Scenario {
        id: "jmatrix",
        summary: "spin-spin couplings mediated by the axial modes in a magnetic field gradient",
        fields: &[
            field("species", "string", Some("Yb-171"), "ion species name"),
            field("f_mhz", "float", None, "axial trap frequency, MHz"),
            field("n", "integer", None, "number of ions"),
            field("gradient", "float", Some("20"), "magnetic field gradient, T/m"),
            field("gamma", "float", Some("species value"), "gyromagnetic ratio, rad/(s·T)"),
        ],
        validate: echo::<JmatrixParams>,
        run: run_jmatrix,
    },
    Scenario {
        id: "ising",
        summary: "transverse Ising ground states (mode=ground) or the two-spin adiabatic ramp (mode=ramp)",
        fields: &[
            field("mode", "ground|ramp", Some("ground"), "which experiment to run"),
            field("n", "integer", Some("8"), "number of spins (ground)"),
            field("j", "float", Some("1"), "Ising coupling J (ground)"),
            field("b", "sweep", Some("1"), "transverse field B values (ground)"),
            field("b_field", "float", Some("1"), "transverse field B'ₓ (ramp)"),
            field("ratio", "float", Some("5.2"), "final J/B'ₓ (ramp)"),
            field("excited", "bool", Some("false"), "start from the excited state (ramp)"),
        ],
        validate: echo::<IsingParams>,
        run: run_ising,
    },
    Scenario {
        id: "hopfield",
        summary: "Hebbian memory capacity (mode=capacity) or ion-weight recall robustness (mode=robustness)",
        fields: &[
            field("mode", "capacity|robustness", Some("capacity"), "which experiment to run"),
            field("n", "integer", Some("100"), "network size (capacity)"),
            field("loads", "sweep", Some("4:30:2"), "stored pattern counts (capacity)"),
            field("noise", "float", Some("0.1"), "fraction of flipped bits in the probe (capacity)"),
            field("trials", "integer", Some("300 (capacity), 10000 (robustness)"), "trials per point"),
            field("ions", "integer", Some("40"), "chain length (robustness)"),
            field("flips", "integer", Some("8"), "flipped spins per trial (robustness)"),
            field("f_mhz", "float", Some("0.2"), "axial trap frequency, MHz (robustness)"),
            field("well_separation", "float", Some("20"), "double-well centre separation, chain units (robustness)"),
            field("d_omega", "float", Some("1000"), "Zeeman frequency gradient, rad/s/m (robustness)"),
        ],
        validate: echo::<HopfieldParams>,
        run: run_hopfield,
    },
    Scenario {
        id: "bhm",
        summary: "Bose-Hubbard ground states of radial phonons across an interaction sweep",
        fields: &[
            field("species", "string", Some("Ca-40"), "ion species name"),
            field("sites", "integer", Some("8"), "number of ions"),
            field("phonons", "integer", Some("sites"), "total phonon number"),
            field("f_mhz", "float", Some("0.5"), "axial trap frequency, MHz"),
            field("radial_ratio", "float", Some("70"), "radial/axial frequency ratio"),
            field("u_over_t", "sweep", Some("1,5,10,12,15,20"), "U in units of the largest hopping"),
        ],
        validate: echo::<BhmParams>,
        run: run_bhm,
    },
    Scenario {
        id: "fkim",
        summary: "Frenkel-Kontorova ion chain: Aubry scan over K̃ (mode=scan) or one ground state (mode=ground)",
        fields: &[
            field("mode", "scan|ground", Some("scan"), "which experiment to run"),
            field("n", "integer", Some("34"), "number of ions (at least 12)"),
            field("ratio", "float", Some("1/golden mean"), "central spacing in lattice periods"),
            field("k", "sweep", Some("log:0.01:0.2:30"), "dimensionless lattice strength K̃"),
            field("factor", "float", Some("1.5"), "hull gap growth that marks the transition"),
            field("restarts", "integer", Some("4"), "random restarts per minimization"),
        ],
        validate: echo::<FkimParams>,
        run: run_fkim,
    },
    Scenario {
        id: "mz",
        summary: "nonlinear Mach-Zehnder fringes on the order-n sideband",
        fields: &[
            field("order", "integer", Some("1"), "sideband order n"),
            field("phi", "sweep", Some("0:6.28:0.1"), "interferometer phase φ, rad"),
            field("rabi_khz", "float", Some("50"), "carrier Rabi frequency Ω/2π, kHz"),
            field("eta", "float", Some("0.1"), "Lamb-Dicke parameter"),
            field("cutoff", "integer", Some("12"), "Fock cutoff"),
        ],
        validate: echo::<MzParams>,
        run: run_mz,
    },
    Scenario {
        id: "unruh",
        summary: "sideband thermometry of an exponentially opened trap",
        fields: &[
            field("nu0_mhz", "float", Some("1"), "initial trap frequency ν₀/2π, MHz"),
            field("kappa_khz", "float", Some("1"), "opening rate κ/2π, kHz"),
            field("kappa_t", "float", Some("12"), "ramp duration in units of 1/κ"),
            field("delta", "sweep", Some("0.25:1:0.25"), "detunings in units of κ"),
            field("rabi_khz", "float", Some("10"), "probe Rabi frequency, kHz"),
            field("eta0", "float", Some("0.05"), "Lamb-Dicke parameter at ν₀"),
        ],
        validate: echo::<UnruhParams>,
        run: run_unruh,
    },
    Scenario {
        id: "dirac",
        summary: "Dirac-equation analogue: Zitterbewegung fit (mode=zb) or Klein step (mode=klein)",
        fields: &[
            field("mode", "zb|klein", Some("zb"), "which experiment to run"),
            field("eta", "float", Some("0.1"), "Lamb-Dicke parameter"),
            field("delta_m", "float", Some("1e-8"), "ground-state spread Δ, m"),
            field("rabi_sideband", "float", Some("5"), "sideband coupling Ω̃, rad/s"),
            field("rabi_carrier", "float", Some("1"), "carrier coupling Ω (mass term), rad/s"),
            field("p0", "float", Some("0.5 (zb), 1 (klein)"), "mean momentum in units of ħ/2Δ"),
            field("width", "float", Some("16 (zb), 3 (klein)"), "packet width in units of Δ"),
            field("cutoff", "integer", Some("2200 (zb), 400 (klein)"), "Fock cutoff"),
            field("samples", "integer", Some("200 (zb), 80 (klein)"), "trajectory samples"),
            field("periods", "float", Some("5"), "evolution time in Zitterbewegung periods (zb)"),
            field("height", "float", Some("4"), "step height V/ħ, rad/s (klein)"),
            field("t0", "float", Some("2"), "step switch-on time, s (klein)"),
            field("duration", "float", Some("40"), "evolution time, s (klein)"),
            field("x0", "float", Some("-12"), "packet centre in units of Δ (klein)"),
            field("smoothing", "float", Some("0.2"), "step edge width in units of Δ (klein)"),
        ],
        validate: echo::<DiracCliParams>,
        run: run_dirac,
    },
];

fn species(name: &str) -> Result<IonSpecies, CliError> {
    species_lookup(name).map_err(|e| CliError::schema("params.species", e))
}

fn positive(path: &str, x: f64) -> Result<f64, CliError> {
    if x > 0.0 && x.is_finite() {
        Ok(x)
    } else {
        Err(CliError::schema(format!("params.{path}"), format!("must be positive, got {x}")))
    }
}

fn counts(path: &str, sweep: &Sweep) -> Result<Vec<usize>, CliError> {
    sweep
        .values()
        .iter()
        .map(|&x| {
            if x >= 1.0 && x.fract() == 0.0 {
                Ok(x as usize)
            } else {
                Err(CliError::schema(format!("params.{path}"), format!("expected positive integers, got {x}")))
            }
        })
        .collect()
}

fn default_ca() -> String {
    "Ca-40".into()
}

// statics

#[derive(Debug, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
struct StaticsParams {
    #[serde(default = "default_ca")]
    species: String,
    f_mhz: f64,
    n: usize,
    radial_mhz: Option<f64>,
}

fn run_statics(params: &toml::Table, _seed: u64) -> Result<Outcome, CliError> {
    let p: StaticsParams = parse_params(params)?;
    let sp = species(&p.species)?;
    let nu_z = mhz_to_angular(positive("f_mhz", p.f_mhz)?);
    let nu_r = mhz_to_angular(positive("radial_mhz", p.radial_mhz.unwrap_or(10.0 * p.f_mhz))?);
    let eq = equilibrium_positions(p.n, &sp, &TrapConfig::new(nu_z, nu_r, nu_r)?)?;
    let modes = normal_modes(&eq)?;

    let mut positions = Table::new("positions", &["ion", "position_m", "position_um", "scaled"]);
    for (i, (&x, &s)) in eq.positions.iter().zip(&eq.scaled).enumerate() {
        positions.push(vec![i.into(), x.into(), (x * 1e6).into(), s.into()]);
    }
    let mut columns = vec!["mode".to_string(), "frequency_rad_s".into(), "frequency_mhz".into()];
    columns.extend(["frequency_ratio".into(), "spread_m".into()]);
    columns.extend((0..p.n).map(|i| format!("s_{i}")));
    let mut mode_table = Table { name: "modes".into(), columns, rows: Vec::new() };
    for m in 0..modes.len() {
        let w = modes.frequencies[m];
        let mut row: Vec<Cell> = vec![m.into(), w.into(), (w / TAU * 1e-6).into(), (w / nu_z).into()];
        row.push(modes.ground_state_spreads[m].into());
        row.extend(modes.mode_matrix.column(m).iter().map(|&s| Cell::from(s)));
        mode_table.push(row);
    }

    let gaps: Vec<f64> = eq.positions.windows(2).map(|w| w[1] - w[0]).collect();
    let centre: f64 = eq.positions.iter().sum::<f64>() / p.n as f64;
    let mut checks = vec![Check::relative("com_mode_at_trap_frequency", modes.frequencies[0], nu_z, 1e-6)];
    checks.push(Check::bound("chain_centred", centre.abs() / eq.length_scale_zeta, 1e-9));
    let report = json!({
        "length_scale_m": eq.length_scale_zeta,
        "separations_m": gaps,
        "min_separation_m": gaps.iter().cloned().fold(f64::INFINITY, f64::min),
    });
    Ok(Outcome { tables: vec![positions, mode_table], reports: vec![("summary".into(), report)], checks })
}

// jmatrix

fn default_yb() -> String {
    "Yb-171".into()
}

fn default_gradient() -> f64 {
    20.0
}

#[derive(Debug, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
struct JmatrixParams {
    #[serde(default = "default_yb")]
    species: String,
    f_mhz: f64,
    n: usize,
    #[serde(default = "default_gradient")]
    gradient: f64,
    gamma: Option<f64>,
}

fn run_jmatrix(params: &toml::Table, _seed: u64) -> Result<Outcome, CliError> {
    let p: JmatrixParams = parse_params(params)?;
    let sp = species(&p.species)?;
    let gamma = p
        .gamma
        .or(sp.gyromagnetic_ratio)
        .ok_or_else(|| CliError::schema("params.gamma", format!("{} has no gyromagnetic ratio", sp.name)))?;
    let nu_z = mhz_to_angular(positive("f_mhz", p.f_mhz)?);
    let eq = equilibrium_positions(p.n, &sp, &TrapConfig::axial(nu_z))?;
    let modes = normal_modes(&eq)?;
    let c = j_matrix(&modes, &FrequencyGradients::uniform(p.n, gamma * p.gradient))?;

    let mut table = Table::new("jmatrix", &["i", "j", "j_rad_s", "j_hz", "epsilon"]);
    for i in 0..p.n {
        for k in 0..p.n {
            let v = c.j[(i, k)];
            table.push(vec![i.into(), k.into(), v.into(), (v / TAU).into(), c.epsilon[(i, k)].into()]);
        }
    }
    let asym = (&c.j - c.j.transpose()).abs().max();
    let checks = vec![
        Check::bound("symmetric", asym, 1e-12 * c.j.abs().max().max(f64::MIN_POSITIVE)),
        Check::bound("zero_diagonal", c.j.diagonal().abs().max(), 0.0),
    ];
    let report = json!({ "self_energy_rad_s": c.self_energy, "d_omega_rad_s_per_m": gamma * p.gradient });
    Ok(Outcome { tables: vec![table], reports: vec![("couplings".into(), report)], checks })
}

// ising

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Deserialize, Serialize)]
#[serde(rename_all = "lowercase")]
enum IsingMode {
    #[default]
    Ground,
    Ramp,
}

fn default_eight() -> usize {
    8
}

fn one() -> f64 {
    1.0
}

fn unit_sweep() -> Sweep {
    Sweep(vec![1.0])
}

fn default_ratio() -> f64 {
    5.2
}

#[derive(Debug, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
struct IsingParams {
    #[serde(default)]
    mode: IsingMode,
    #[serde(default = "default_eight")]
    n: usize,
    #[serde(default = "one")]
    j: f64,
    #[serde(default = "unit_sweep")]
    b: Sweep,
    #[serde(default = "one")]
    b_field: f64,
    #[serde(default = "default_ratio")]
    ratio: f64,
    #[serde(default)]
    excited: bool,
}

fn run_ising(params: &toml::Table, _seed: u64) -> Result<Outcome, CliError> {
    let p: IsingParams = parse_params(params)?;
    match p.mode {
        IsingMode::Ground => ising_ground(&p),
        IsingMode::Ramp => ising_ramp(&p),
    }
}

struct IsingPoint {
    b: f64,
    energy: f64,
    degeneracy: usize,
    profile: Vec<f64>,
    corr_diag: f64,
    xi: f64,
    r_squared: f64,
    plateau: f64,
}

fn ising_ground(p: &IsingParams) -> Result<Outcome, CliError> {
    let points: Vec<IsingPoint> = p
        .b
        .values()
        .par_iter()
        .map(|&b| {
            let gs = ground_state(&SpinHamiltonian::transverse_ising(p.n, p.j, b))?;
            let corr = ground_correlations(&gs, Axis::Z);
            let fit = correlation_decay(&corr);
            Ok(IsingPoint {
                b,
                energy: gs.energy,
                degeneracy: gs.states.len(),
                profile: distance_average(&corr),
                corr_diag: corr.diagonal().iter().map(|c| (c - 1.0).abs()).fold(0.0, f64::max),
                xi: fit.map_or(f64::NAN, |f| f.xi),
                r_squared: fit.map_or(f64::NAN, |f| f.r_squared),
                plateau: long_range_plateau(&corr),
            })
        })
        .collect::<Result<_, CliError>>()?;

    let mut phases = Table::new(
        "phases",
        &["b", "b_over_j", "energy", "degeneracy", "xi", "decay_r_squared", "plateau", "bulk_plateau"],
    );
    let mut profile = Table::new("correlations", &["b", "distance", "mean_abs_zz"]);
    for pt in &points {
        phases.push(vec![
            pt.b.into(),
            (pt.b / p.j).into(),
            pt.energy.into(),
            pt.degeneracy.into(),
            pt.xi.into(),
            pt.r_squared.into(),
            pt.plateau.into(),
            ordered_plateau(p.j, pt.b).into(),
        ]);
        for (d, c) in pt.profile.iter().enumerate() {
            profile.push(vec![pt.b.into(), (d + 1).into(), (*c).into()]);
        }
    }
    let diag = points.iter().map(|pt| pt.corr_diag).fold(0.0, f64::max);
    let checks = vec![Check::bound("zz_diagonal_is_one", diag, 1e-10)];
    Ok(Outcome { tables: vec![phases, profile], reports: Vec::new(), checks })
}

fn ising_ramp(p: &IsingParams) -> Result<Outcome, CliError> {
    let r = two_spin_adiabatic_ramp(positive("b_field", p.b_field)?, positive("ratio", p.ratio)?, p.excited)?;
    let mut table = Table::new("ramp", &["ratio", "excited", "fidelity", "phase", "duration", "min_gap"]);
    table.push(vec![p.ratio.into(), p.excited.into(), r.fidelity.into(), r.phase.into(), r.duration.into(), r.min_gap.into()]);
    let mut final_state = Table::new("final_state", &["basis", "re", "im", "probability"]);
    for (k, a) in r.final_state.amplitudes.iter().enumerate() {
        final_state.push(vec![k.into(), a.re.into(), a.im.into(), a.norm_sqr().into()]);
    }
    let checks = vec![Check::new("bell_fidelity", r.fidelity > 0.9, format!("{:.6} > 0.9", r.fidelity))];
    Ok(Outcome { tables: vec![table, final_state], reports: Vec::new(), checks })
}

// hopfield

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Deserialize, Serialize)]
#[serde(rename_all = "lowercase")]
enum HopfieldMode {
    #[default]
    Capacity,
    Robustness,
}

fn default_hundred() -> usize {
    100
}

fn default_loads() -> Sweep {
    Sweep((4..=30).step_by(2).map(|p| p as f64).collect())
}

fn default_noise() -> f64 {
    0.1
}

fn default_forty() -> usize {
    40
}

fn default_flips() -> usize {
    8
}

fn default_low_trap() -> f64 {
    0.2
}

fn default_well() -> f64 {
    20.0
}

fn default_d_omega() -> f64 {
    1e3
}

#[derive(Debug, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
struct HopfieldParams {
    #[serde(default)]
    mode: HopfieldMode,
    #[serde(default = "default_hundred")]
    n: usize,
    #[serde(default = "default_loads")]
    loads: Sweep,
    #[serde(default = "default_noise")]
    noise: f64,
    trials: Option<usize>,
    #[serde(default = "default_forty")]
    ions: usize,
    #[serde(default = "default_flips")]
    flips: usize,
    #[serde(default = "default_low_trap")]
    f_mhz: f64,
    #[serde(default = "default_well")]
    well_separation: f64,
    #[serde(default = "default_d_omega")]
    d_omega: f64,
}

fn run_hopfield(params: &toml::Table, seed: u64) -> Result<Outcome, CliError> {
    let p: HopfieldParams = parse_params(params)?;
    match p.mode {
        HopfieldMode::Capacity => {
            let loads = counts("loads", &p.loads)?;
            if !(0.0..=1.0).contains(&p.noise) {
                return Err(CliError::schema("params.noise", "must lie in [0, 1]"));
            }
            if p.n < 2 {
                return Err(CliError::schema("params.n", "network needs at least 2 neurons"));
            }
            let trials = p.trials.unwrap_or(300);
            let scan = capacity_scan(p.n, &loads, p.noise, trials, seed);
            let mut table = Table::new("capacity", &["patterns", "load", "success", "ci95", "trials"]);
            for pt in &scan {
                let s = &pt.success;
                table.push(vec![pt.patterns.into(), (pt.patterns as f64 / p.n as f64).into(), s.probability.into(), s.ci.into(), s.trials.into()]);
            }
            let alpha = half_crossing(p.n, &scan);
            let checks = vec![Check::new("half_crossing_found", alpha.is_some(), format!("{alpha:?}"))];
            let report = json!({ "half_crossing_load": alpha });
            Ok(Outcome { tables: vec![table], reports: vec![("crossing".into(), report)], checks })
        }
        HopfieldMode::Robustness => {
            let ca = species("Ca-40")?;
            let trap = TrapConfig::axial(mhz_to_angular(positive("f_mhz", p.f_mhz)?));
            let well = AxialPotential::double_well(p.ions, p.well_separation);
            let modes = normal_modes(&equilibrium_in(p.ions, &ca, &trap, &well)?)?;
            let trials = p.trials.unwrap_or(10_000);
            let est = robustness_experiment(&modes, &ca, p.d_omega, p.flips, trials, seed)?;
            let mut table = Table::new("robustness", &["pattern", "flips", "recall", "ci95", "trials"]);
            for (k, e) in est.iter().enumerate() {
                table.push(vec![(k + 1).into(), p.flips.into(), e.probability.into(), e.ci.into(), e.trials.into()]);
            }
            let worst = est.iter().map(|e| e.probability).fold(1.0, f64::min);
            let checks = vec![Check::new("recall_at_least_0.9", worst >= 0.9, format!("{worst:.4}"))];
            Ok(Outcome { tables: vec![table], reports: Vec::new(), checks })
        }
    }
}

// bhm

fn default_half() -> f64 {
    0.5
}

fn default_radial_ratio() -> f64 {
    70.0
}

fn default_u_sweep() -> Sweep {
    Sweep(vec![1.0, 5.0, 10.0, 12.0, 15.0, 20.0])
}

#[derive(Debug, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
struct BhmParams {
    #[serde(default = "default_ca")]
    species: String,
    #[serde(default = "default_eight")]
    sites: usize,
    phonons: Option<usize>,
    #[serde(default = "default_half")]
    f_mhz: f64,
    #[serde(default = "default_radial_ratio")]
    radial_ratio: f64,
    #[serde(default = "default_u_sweep")]
    u_over_t: Sweep,
}

fn run_bhm(params: &toml::Table, _seed: u64) -> Result<Outcome, CliError> {
    let p: BhmParams = parse_params(params)?;
    let sp = species(&p.species)?;
    let nu_z = mhz_to_angular(positive("f_mhz", p.f_mhz)?);
    let eq = equilibrium_positions(p.sites, &sp, &TrapConfig::axial(nu_z))?;
    let lattice = hopping_matrix(&eq, positive("radial_ratio", p.radial_ratio)? * nu_z)?;
    let phonons = p.phonons.unwrap_or(p.sites);
    let scan = interaction_scan(&lattice, phonons, p.u_over_t.values())?;

    let mut table = Table::new(
        "scan",
        &["u_over_t", "energy", "mean_variance", "decay", "aic_exponential", "aic_algebraic", "correlation_length", "exponent"],
    );
    let mut sites = Table::new("sites", &["u_over_t", "site", "mean", "variance"]);
    let mut drift: f64 = 0.0;
    for s in &scan {
        let o = &s.observables;
        let (label, ae, aa, xi, alpha) = match s.decay {
            Some(d) => (format!("{:?}", d.label).to_lowercase(), d.aic_exponential, d.aic_algebraic, 1.0 / d.inverse_length, d.exponent),
            None => ("none".into(), f64::NAN, f64::NAN, f64::NAN, f64::NAN),
        };
        table.push(vec![s.u_over_t.into(), o.energy.into(), o.mean_variance().into(), label.into(), ae.into(), aa.into(), xi.into(), alpha.into()]);
        for (i, (m, v)) in o.mean.iter().zip(&o.variance).enumerate() {
            sites.push(vec![s.u_over_t.into(), i.into(), (*m).into(), (*v).into()]);
        }
        drift = drift.max((o.mean.iter().sum::<f64>() - phonons as f64).abs());
    }
    let mut checks = vec![Check::bound("phonon_number_conserved", drift, 1e-9)];
    let mott: Vec<f64> = scan.iter().filter(|s| s.u_over_t > 10.0).map(|s| s.observables.mean_variance()).collect();
    if mott.len() >= 2 {
        let ok = mott.windows(2).all(|w| w[1] < w[0]);
        checks.push(Check::new("variance_falls_above_u_10", ok, format!("{mott:?}")));
    }
    Ok(Outcome { tables: vec![table, sites], reports: Vec::new(), checks })
}

// fkim

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Deserialize, Serialize)]
#[serde(rename_all = "lowercase")]
enum FkimMode {
    #[default]
    Scan,
    Ground,
}

fn default_34() -> usize {
    34
}

fn default_density() -> f64 {
    1.0 / fkim::GOLDEN
}

fn default_k() -> Sweep {
    Sweep(fkim::geometric_grid(0.01, 0.2, 30))
}

fn default_factor() -> f64 {
    1.5
}

fn default_restarts() -> usize {
    4
}

#[derive(Debug, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
struct FkimParams {
    #[serde(default)]
    mode: FkimMode,
    #[serde(default = "default_34")]
    n: usize,
    #[serde(default = "default_density")]
    ratio: f64,
    #[serde(default = "default_k")]
    k: Sweep,
    #[serde(default = "default_factor")]
    factor: f64,
    #[serde(default = "default_restarts")]
    restarts: usize,
}

fn run_fkim(params: &toml::Table, seed: u64) -> Result<Outcome, CliError> {
    let p: FkimParams = parse_params(params)?;
    if p.k.values().iter().any(|&k| k < 0.0) {
        return Err(CliError::schema("params.k", "lattice strength must be non-negative"));
    }
    match p.mode {
        FkimMode::Scan => {
            let scan = fkim::aubry_scan(p.n, p.ratio, p.k.values(), p.factor, p.restarts, seed)?;
            let mut table = Table::new("scan", &["k_tilde", "max_gap", "spectral_gap", "energy"]);
            for pt in &scan.points {
                table.push(vec![pt.k_tilde.into(), pt.max_gap.into(), pt.spectral_gap.into(), pt.energy.into()]);
            }
            let gaps: Vec<f64> = scan.points.iter().map(|pt| pt.max_gap).collect();
            let rho = spearman(&gaps);
            let kc = scan.critical.unwrap_or(f64::INFINITY);
            let pinned: Vec<f64> = scan.points.iter().filter(|pt| pt.k_tilde >= kc).map(|pt| pt.max_gap).collect();
            let rising = pinned.windows(2).all(|w| w[1] >= w[0]);
            let checks = vec![
                Check::new("max_gap_trend", rho >= 0.8, format!("Spearman rank correlation with K̃ {rho:.3} >= 0.8")),
                Check::new("max_gap_monotone_past_transition", rising, format!("{} points past K_c", pinned.len())),
                Check::new("transition_found", scan.critical.is_some(), format!("{:?}", scan.critical)),
            ];
            let report = json!({
                "nu_tilde": scan.nu_tilde,
                "baseline_max_gap": scan.baseline,
                "threshold": scan.threshold,
                "critical_k": scan.critical,
            });
            Ok(Outcome { tables: vec![table], reports: vec![("aubry".into(), report)], checks })
        }
        FkimMode::Ground => {
            let [k] = p.k.values() else {
                return Err(CliError::schema("params.k", "ground mode takes a single K̃"));
            };
            let nu = fkim::golden_mean_tuning(p.n, p.ratio)?;
            let reference = fkim::ground_state(&FkConfig::new(p.n, nu, 0.0)?, None)?;
            let cfg = FkConfig::new(p.n, nu, *k)?;
            let state = fkim::ground_state_search(&cfg, &reference.positions, p.restarts, seed)?;
            let offsets = fkim::pinning_offsets(&state);
            let mut table = Table::new("positions", &["ion", "z_tilde", "pinning_offset"]);
            for (i, (z, o)) in state.positions.iter().zip(&offsets).enumerate() {
                table.push(vec![i.into(), (*z).into(), (*o).into()]);
            }
            let hull = fkim::hull_function(&state, &reference)?;
            let spectrum = fkim::phonon_spectrum(&state)?;
            let checks = vec![Check::bound("gradient_norm", state.gradient_norm, 1e-6)];
            let report = json!({
                "nu_tilde": nu,
                "energy": state.energy,
                "hull_max_gap": hull.max_gap,
                "lowest_mode": spectrum[0],
            });
            Ok(Outcome { tables: vec![table], reports: vec![("ground".into(), report)], checks })
        }
    }
}

/// Rank correlation of a sequence with its index.
fn spearman(y: &[f64]) -> f64 {
    let n = y.len();
    if n < 2 {
        return 1.0;
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| y[a].total_cmp(&y[b]));
    let mut rank = vec![0.0; n];
    for (r, &i) in order.iter().enumerate() {
        rank[i] = r as f64;
    }
    let d2: f64 = rank.iter().enumerate().map(|(i, r)| (r - i as f64).powi(2)).sum();
    let n = n as f64;
    1.0 - 6.0 * d2 / (n * (n * n - 1.0))
}

// mz

fn default_order() -> usize {
    1
}

fn default_phi() -> Sweep {
    Sweep((0..=62).map(|k| k as f64 * 0.1).collect())
}

fn default_rabi_mz() -> f64 {
    50.0
}

fn default_eta() -> f64 {
    0.1
}

fn default_cutoff_mz() -> usize {
    12
}

#[derive(Debug, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
struct MzParams {
    #[serde(default = "default_order")]
    order: usize,
    #[serde(default = "default_phi")]
    phi: Sweep,
    #[serde(default = "default_rabi_mz")]
    rabi_khz: f64,
    #[serde(default = "default_eta")]
    eta: f64,
    #[serde(default = "default_cutoff_mz")]
    cutoff: usize,
}

fn run_mz(params: &toml::Table, _seed: u64) -> Result<Outcome, CliError> {
    let p: MzParams = parse_params(params)?;
    let rabi = TAU * 1e3 * positive("rabi_khz", p.rabi_khz)?;
    let runs = p
        .phi
        .values()
        .par_iter()
        .map(|&phi| nonlinear_mz(p.order, phi, rabi, p.eta, p.cutoff))
        .collect::<Result<Vec<_>, _>>()?;
    let mut table = Table::new("fringes", &["phi", "p_up", "expected", "deviation"]);
    let mut worst: f64 = 0.0;
    for (&phi, r) in p.phi.values().iter().zip(&runs) {
        let expected = 0.5 * (1.0 - (p.order as f64 * phi).cos());
        worst = worst.max((r.detect - expected).abs());
        table.push(vec![phi.into(), r.detect.into(), expected.into(), (r.detect - expected).into()]);
    }
    let cal = runs[0].calibration;
    let report = json!({ "order": cal.order, "coupling_rad_s": cal.coupling, "half_pi_time_s": cal.half_pi_time });
    let checks = vec![Check::bound("fringe_deviation", worst, 1e-6)];
    Ok(Outcome { tables: vec![table], reports: vec![("calibration".into(), report)], checks })
}

// unruh

fn default_kappa_t() -> f64 {
    12.0
}

fn default_deltas() -> Sweep {
    Sweep(vec![0.25, 0.5, 0.75, 1.0])
}

fn default_rabi_unruh() -> f64 {
    10.0
}

fn default_eta0() -> f64 {
    0.05
}

#[derive(Debug, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
struct UnruhParams {
    #[serde(default = "one")]
    nu0_mhz: f64,
    #[serde(default = "one")]
    kappa_khz: f64,
    #[serde(default = "default_kappa_t")]
    kappa_t: f64,
    #[serde(default = "default_deltas")]
    delta: Sweep,
    #[serde(default = "default_rabi_unruh")]
    rabi_khz: f64,
    #[serde(default = "default_eta0")]
    eta0: f64,
}

fn run_unruh(params: &toml::Table, _seed: u64) -> Result<Outcome, CliError> {
    let p: UnruhParams = parse_params(params)?;
    let nu0 = mhz_to_angular(positive("nu0_mhz", p.nu0_mhz)?);
    let kappa = TAU * 1e3 * positive("kappa_khz", p.kappa_khz)?;
    let ramp = TrapRamp::exponential(nu0, kappa, positive("kappa_t", p.kappa_t)? / kappa)?;
    let deltas: Vec<f64> = p.delta.values().iter().map(|d| d * kappa).collect();
    let run = trap_opening_simulation(&ramp, &deltas, TAU * 1e3 * p.rabi_khz, p.eta0)?;

    let mut table = Table::new("sidebands", &["delta_over_kappa", "p_red", "p_blue", "ratio", "closed_ratio"]);
    let mut worst: f64 = 0.0;
    for k in 0..deltas.len() {
        worst = worst.max((run.ratios[k] / run.closed_ratios[k] - 1.0).abs());
        table.push(vec![p.delta.values()[k].into(), run.p_red[k].into(), run.p_blue[k].into(), run.ratios[k].into(), run.closed_ratios[k].into()]);
    }
    let v = run.validity;
    let checks = vec![
        Check::new("validity", v.ok(), format!("slow ratio {:e}, late ratio {:e}", v.slow_ratio, v.late_ratio)),
        Check::bound("ratio_vs_closed_form", worst, 0.1),
        Check::relative("fitted_temperature", run.fitted_temperature, run.expected_temperature, 0.1),
    ];
    let report = json!({
        "nbar": run.nbar,
        "fitted_temperature_k": run.fitted_temperature,
        "expected_temperature_k": run.expected_temperature,
        "slow_ratio": v.slow_ratio,
        "late_ratio": v.late_ratio,
    });
    Ok(Outcome { tables: vec![table], reports: vec![("thermometry".into(), report)], checks })
}

// dirac

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Deserialize, Serialize)]
#[serde(rename_all = "lowercase")]
enum DiracMode {
    #[default]
    Zb,
    Klein,
}

fn default_delta_m() -> f64 {
    1e-8
}

fn default_sideband() -> f64 {
    5.0
}

#[derive(Debug, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
struct DiracCliParams {
    #[serde(default)]
    mode: DiracMode,
    #[serde(default = "default_eta")]
    eta: f64,
    #[serde(default = "default_delta_m")]
    delta_m: f64,
    #[serde(default = "default_sideband")]
    rabi_sideband: f64,
    #[serde(default = "one")]
    rabi_carrier: f64,
    p0: Option<f64>,
    width: Option<f64>,
    cutoff: Option<usize>,
    samples: Option<usize>,
    periods: Option<f64>,
    height: Option<f64>,
    t0: Option<f64>,
    duration: Option<f64>,
    x0: Option<f64>,
    smoothing: Option<f64>,
}

fn trajectory_table(traj: &ionsim::relativity::Trajectory) -> Table {
    let mut table = Table::new("trajectory", &["t", "x", "p", "velocity", "p_b", "energy"]);
    for k in 0..traj.times.len() {
        table.push(vec![
            traj.times[k].into(),
            traj.x[k].into(),
            traj.p[k].into(),
            traj.velocity[k].into(),
            traj.p_b[k].into(),
            traj.energy[k].into(),
        ]);
    }
    table
}

fn run_dirac(params: &toml::Table, _seed: u64) -> Result<Outcome, CliError> {
    let p: DiracCliParams = parse_params(params)?;
    let dp = DiracParams::new(p.eta, p.delta_m, p.rabi_sideband, p.rabi_carrier)?;
    let c = dp.c_eff();
    match p.mode {
        DiracMode::Zb => {
            let pm = dp.momentum(p.p0.unwrap_or(0.5));
            let r = std::f64::consts::FRAC_1_SQRT_2;
            let packet = Wavepacket {
                center: 0.0,
                width: positive("width", p.width.unwrap_or(16.0))? * p.delta_m,
                momentum: pm,
                spinor: [C64::new(r, 0.0), C64::new(0.0, r)],
            };
            let psi = wavepacket_state(&dp, &packet, p.cutoff.unwrap_or(2200))?;
            let omega = dp.zb_frequency(pm);
            let span = positive("periods", p.periods.unwrap_or(5.0))? * TAU / omega;
            let traj = dirac_evolution(&dp, &psi, span, p.samples.unwrap_or(200))?;
            let predicted = dp.zb_amplitude(pm);
            let mut checks = vec![Check::bound("speed_bound", traj.max_speed(), c * (1.0 + 1e-6))];
            let report = if predicted > 0.0 {
                let fit = fit_zitterbewegung(&traj, omega)?;
                checks.push(Check::relative("zb_frequency", fit.omega, omega, 0.05));
                checks.push(Check::relative("zb_amplitude", fit.amplitude, predicted, 0.1));
                json!({
                    "predicted_omega": omega, "fitted_omega": fit.omega,
                    "predicted_amplitude_m": predicted, "fitted_amplitude_m": fit.amplitude,
                    "offset_m": fit.offset, "drift_m_per_s": fit.drift, "phase": fit.phase,
                    "rms_residual_m": fit.rms_residual, "c_eff": c,
                })
            } else {
                json!({ "predicted_omega": omega, "amplitude_at_omega_m": zb_amplitude_at(&traj, omega), "c_eff": c })
            };
            Ok(Outcome { tables: vec![trajectory_table(&traj)], reports: vec![("fit".into(), report)], checks })
        }
        DiracMode::Klein => {
            let pm = dp.momentum(p.p0.unwrap_or(1.0));
            let packet = Wavepacket {
                center: p.x0.unwrap_or(-12.0) * p.delta_m,
                width: positive("width", p.width.unwrap_or(3.0))? * p.delta_m,
                momentum: pm,
                spinor: positive_energy_spinor(&dp, pm),
            };
            let psi: HybridState = wavepacket_state(&dp, &packet, p.cutoff.unwrap_or(400))?;
            let shape = StepShape::Spatial { position: 0.0, smoothing: p.smoothing.unwrap_or(0.2) * p.delta_m };
            let step = KleinStep { height: p.height.unwrap_or(4.0), t0: p.t0.unwrap_or(2.0), shape };
            let res = klein_step(&dp, &psi, &step, p.duration.unwrap_or(40.0), p.samples.unwrap_or(80))?;
            let inside = res.trajectory.p_b.iter().all(|x| (-1e-9..=1.0 + 1e-9).contains(x));
            let checks = vec![
                Check::new("p_b_is_probability", inside, "0 <= P_b <= 1"),
                Check::bound("speed_bound", res.trajectory.max_speed(), c * (1.0 + 1e-6)),
            ];
            let report = json!({
                "height": step.height,
                "threshold": 2.0 * p.rabi_carrier,
                "supercritical": res.supercritical,
                "p_b_at_t0": res.p_b_at_t0,
                "p_b_final": res.p_b_final,
                "growth": res.growth,
            });
            Ok(Outcome { tables: vec![trajectory_table(&res.trajectory)], reports: vec![("klein".into(), report)], checks })
        }
    }
}
