//! Physical constants, the ion species registry and unit conversions.
//!
//! Everything inside the crate is SI; frequencies are angular (rad/s).

use serde::Deserialize;
use std::collections::BTreeMap;
use std::path::Path;
use thiserror::Error;

/// CODATA 2018 values.
pub mod consts {
    pub const ELEMENTARY_CHARGE: f64 = 1.602_176_634e-19;
    pub const VACUUM_PERMITTIVITY: f64 = 8.854_187_812_8e-12;
    pub const VACUUM_PERMEABILITY: f64 = 1.256_637_062_12e-6;
    pub const REDUCED_PLANCK: f64 = 1.054_571_817e-34;
    pub const BOLTZMANN: f64 = 1.380_649e-23;
    pub const BOHR_MAGNETON: f64 = 9.274_010_078_3e-24;
    pub const ATOMIC_MASS_UNIT: f64 = 1.660_539_066_60e-27;
    pub const ELECTRON_MASS: f64 = 9.109_383_701_5e-31;
    /// Free-electron gyromagnetic ratio magnitude, rad/(s·T).
    pub const ELECTRON_GYROMAGNETIC: f64 = 1.760_859_630_23e11;
}

#[derive(Debug, Error)]
pub enum FoundationError {
    #[error("unknown ion species '{0}'")]
    UnknownSpecies(String),
    #[error("invalid species record '{name}': {reason}")]
    InvalidSpecies { name: String, reason: String },
    #[error("invalid trap: {0}")]
    InvalidTrap(String),
    #[error("species config: {0}")]
    Config(String),
}

pub const CONSTANTS_VERSION: &str = "CODATA 2018";

/// Constant table echoed into run metadata.
pub fn constants_table() -> Vec<(&'static str, f64)> {
    use consts::*;
    vec![
        ("elementary_charge", ELEMENTARY_CHARGE),
        ("vacuum_permittivity", VACUUM_PERMITTIVITY),
        ("vacuum_permeability", VACUUM_PERMEABILITY),
        ("reduced_planck", REDUCED_PLANCK),
        ("boltzmann", BOLTZMANN),
        ("bohr_magneton", BOHR_MAGNETON),
        ("atomic_mass_unit", ATOMIC_MASS_UNIT),
        ("electron_mass", ELECTRON_MASS),
    ]
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
pub struct IonSpecies {
    pub name: String,
    /// Mass in atomic mass units.
    #[serde(rename = "mass_u")]
    pub mass_u: f64,
    #[serde(rename = "charge", default = "one")]
    pub charge_multiple: u32,
    /// Gyromagnetic ratio of the spin channel, rad/(s·T).
    #[serde(rename = "gamma", default)]
    pub gyromagnetic_ratio: Option<f64>,
}

fn one() -> u32 {
    1
}

impl IonSpecies {
    pub fn new(name: &str, mass_u: f64, charge_multiple: u32) -> Result<Self, FoundationError> {
        let s = IonSpecies {
            name: name.to_string(),
            mass_u,
            charge_multiple,
            gyromagnetic_ratio: None,
        };
        s.validate()?;
        Ok(s)
    }

    fn validate(&self) -> Result<(), FoundationError> {
        let bad = |reason: &str| FoundationError::InvalidSpecies {
            name: self.name.clone(),
            reason: reason.to_string(),
        };
        if !(self.mass_u > 0.0 && self.mass_u.is_finite()) {
            return Err(bad("mass must be positive"));
        }
        if self.charge_multiple < 1 {
            return Err(bad("charge multiple must be at least 1"));
        }
        Ok(())
    }

    /// Mass in kg.
    pub fn mass(&self) -> f64 {
        self.mass_u * consts::ATOMIC_MASS_UNIT
    }

    /// Charge in C.
    pub fn charge(&self) -> f64 {
        self.charge_multiple as f64 * consts::ELEMENTARY_CHARGE
    }
}

/// Species registry. The built-in table covers the ions discussed for trapped-ion simulators;
/// more can be merged from a TOML file.
#[derive(Debug, Clone)]
pub struct Registry {
    species: BTreeMap<String, IonSpecies>,
}

#[derive(Deserialize)]
struct SpeciesFile {
    species: Vec<IonSpecies>,
}

impl Default for Registry {
    fn default() -> Self {
        let builtin = [
            ("Be-9", 9.012_182),
            ("Mg-25", 24.985_837),
            ("Ca-40", 39.962_591),
            ("Sr-88", 87.905_612),
            ("Yb-171", 170.936_326),
            ("Yb-172", 171.936_381),
        ];
        let species = builtin
            .iter()
            .map(|&(n, m)| {
                (
                    n.to_string(),
                    IonSpecies {
                        name: n.to_string(),
                        mass_u: m,
                        charge_multiple: 1,
                        gyromagnetic_ratio: Some(consts::ELECTRON_GYROMAGNETIC),
                    },
                )
            })
            .collect();
        Registry { species }
    }
}

impl Registry {
    pub fn lookup(&self, name: &str) -> Result<IonSpecies, FoundationError> {
        self.species
            .get(name)
            .cloned()
            .ok_or_else(|| FoundationError::UnknownSpecies(name.to_string()))
    }

    pub fn names(&self) -> impl Iterator<Item = &str> {
        self.species.keys().map(String::as_str)
    }

    /// Merge entries from TOML text of the form
    /// `[[species]] name = "..", mass_u = .., charge = 1, gamma = ..`.
    pub fn extend_from_toml(&mut self, text: &str) -> Result<(), FoundationError> {
        let file: SpeciesFile =
            toml::from_str(text).map_err(|e| FoundationError::Config(e.to_string()))?;
        for s in file.species {
            s.validate()?;
            self.species.insert(s.name.clone(), s);
        }
        Ok(())
    }

    pub fn extend_from_file(&mut self, path: &Path) -> Result<(), FoundationError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| FoundationError::Config(format!("{}: {e}", path.display())))?;
        self.extend_from_toml(&text)
    }
}

/// Look up a built-in species.
pub fn species_lookup(name: &str) -> Result<IonSpecies, FoundationError> {
    Registry::default().lookup(name)
}

/// Secular trap frequencies, rad/s.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrapConfig {
    pub nu_z: f64,
    pub nu_x: f64,
    pub nu_y: f64,
}

impl TrapConfig {
    pub fn new(nu_z: f64, nu_x: f64, nu_y: f64) -> Result<Self, FoundationError> {
        for (label, v) in [("nu_z", nu_z), ("nu_x", nu_x), ("nu_y", nu_y)] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(FoundationError::InvalidTrap(format!("{label} must be positive")));
            }
        }
        Ok(TrapConfig { nu_z, nu_x, nu_y })
    }

    /// Axial-only trap with radial frequencies far above the axial one.
    pub fn axial(nu_z: f64) -> Self {
        TrapConfig { nu_z, nu_x: 10.0 * nu_z, nu_y: 10.0 * nu_z }
    }

    /// True when both radial frequencies exceed the axial one.
    pub fn is_linear_regime(&self) -> bool {
        self.nu_x > self.nu_z && self.nu_y > self.nu_z
    }
}

pub fn mhz_to_angular(f_mhz: f64) -> f64 {
    2.0 * std::f64::consts::PI * f_mhz * 1e6
}

pub fn angular_to_mhz(nu: f64) -> f64 {
    nu / (2.0 * std::f64::consts::PI * 1e6)
}

pub fn um_to_m(x: f64) -> f64 {
    x * 1e-6
}

pub fn m_to_um(x: f64) -> f64 {
    x * 1e6
}

/// e²/(4πε₀) for a given charge multiple, J·m.
pub fn coulomb_constant(species: &IonSpecies) -> f64 {
    let q = species.charge();
    q * q / (4.0 * std::f64::consts::PI * consts::VACUUM_PERMITTIVITY)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn registry_masses() {
        assert_eq!(species_lookup("Yb-171").unwrap().mass_u.round(), 171.0);
        assert_eq!(species_lookup("Be-9").unwrap().mass_u.round(), 9.0);
        assert!(matches!(
            species_lookup("Xx-999"),
            Err(FoundationError::UnknownSpecies(_))
        ));
    }

    #[test]
    fn toml_extension() {
        let mut r = Registry::default();
        r.extend_from_toml("[[species]]\nname = \"Cd-111\"\nmass_u = 110.904\ncharge = 1\ngamma = 1.0e10\n")
            .unwrap();
        let cd = r.lookup("Cd-111").unwrap();
        assert_eq!(cd.charge_multiple, 1);
        assert_eq!(cd.gyromagnetic_ratio, Some(1.0e10));
        assert!(r
            .extend_from_toml("[[species]]\nname = \"bad\"\nmass_u = -1.0\n")
            .is_err());
    }

    #[test]
    fn conversions_roundtrip() {
        for f in [1e-3, 0.5, 1.0, 17.3, 2.5e3] {
            let back = angular_to_mhz(mhz_to_angular(f));
            assert!(((back - f) / f).abs() < 1e-12);
            let x = m_to_um(um_to_m(f));
            assert!(((x - f) / f).abs() < 1e-12);
        }
    }

    #[test]
    fn trap_validation() {
        assert!(TrapConfig::new(1.0, 0.0, 1.0).is_err());
        let t = TrapConfig::new(1.0, 5.0, 5.0).unwrap();
        assert!(t.is_linear_regime());
        assert!(!TrapConfig::new(1.0, 0.5, 5.0).unwrap().is_linear_regime());
    }
}
