//! Reduced-unit systems and the species catalog.
//!
//! Two unit systems are used throughout: van der Waals reduced units
//! (sigma, epsilon, beta) in which the -1/x^6 term is universal, and
//! dipole-dipole reduced units (D, E_D) in which the anisotropic 1/x^3 term
//! is universal. All internal arithmetic is done in atomic units.

use crate::error::{Error, Result};
use serde::Deserialize;

/// CODATA-2018 constants, SI values.
#[derive(Debug, Clone)]
pub struct PhysicalConstants {
    /// Bohr radius a0 [m]
    pub bohr_radius: f64,
    /// Hartree energy [J]
    pub hartree: f64,
    /// Electron mass [kg]
    pub electron_mass: f64,
    /// Atomic mass unit [kg]
    pub amu: f64,
    /// Boltzmann constant [J/K]
    pub boltzmann: f64,
    /// Bohr magneton [J/T]
    pub bohr_magneton: f64,
    /// Debye [C m]
    pub debye: f64,
    /// Speed of light [m/s]
    pub speed_of_light: f64,
    /// Atomic unit of light intensity, Gaussian convention I = cE^2/(8 pi),
    /// equal to Eh^2/(hbar a0^2) [W/m^2]
    pub intensity_au: f64,
}

const E_CHARGE: f64 = 1.602_176_634e-19; // C

impl Default for PhysicalConstants {
    fn default() -> Self {
        let bohr_radius: f64 = 5.291_772_109_03e-11;
        let hartree: f64 = 4.359_744_722_207_1e-18;
        let electron_mass: f64 = 9.109_383_701_5e-31;
        let hbar = (hartree * electron_mass).sqrt() * bohr_radius;
        PhysicalConstants {
            bohr_radius,
            hartree,
            electron_mass,
            amu: 1.660_539_066_60e-27,
            boltzmann: 1.380_649e-23,
            bohr_magneton: 9.274_010_078_3e-24,
            debye: 3.335_640_951e-30,
            speed_of_light: 2.997_924_58e8,
            intensity_au: hartree * hartree / (hbar * bohr_radius * bohr_radius),
        }
    }
}

impl PhysicalConstants {
    pub fn hbar(&self) -> f64 {
        (self.hartree * self.electron_mass).sqrt() * self.bohr_radius
    }
    /// Speed of light in atomic units (inverse fine-structure constant).
    pub fn c_au(&self) -> f64 {
        let v_au = self.bohr_radius * self.hartree / self.hbar();
        self.speed_of_light / v_au
    }
    pub fn amu_to_au(&self) -> f64 {
        self.amu / self.electron_mass
    }
    pub fn hartree_to_kelvin(&self) -> f64 {
        self.hartree / self.boltzmann
    }
    /// Atomic dipole unit e*a0 expressed in Debye.
    pub fn au_dipole_to_debye(&self) -> f64 {
        E_CHARGE * self.bohr_radius / self.debye
    }
    /// Atomic intensity unit in GW/cm^2.
    pub fn intensity_au_gw_cm2(&self) -> f64 {
        self.intensity_au * 1e-4 * 1e-9
    }
}

/// Physical inputs of a colliding pair.
#[derive(Debug, Clone)]
pub struct SpeciesParams {
    pub name: String,
    pub mass1_amu: f64,
    pub mass2_amu: f64,
    /// Van der Waals coefficient [Hartree a0^6]
    pub c6_au: f64,
    /// Static polarizabilities [a0^3]
    pub alpha1_au: f64,
    pub alpha2_au: f64,
    /// Permanent electric dipole moments [Debye], if any
    pub electric_dipoles_debye: Option<(f64, f64)>,
    /// Permanent magnetic dipole moments [mu_B], if any
    pub magnetic_dipoles_mub: Option<(f64, f64)>,
}

impl SpeciesParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.mass1_amu > 0.0 && self.mass2_amu > 0.0) {
            return Err(Error::invalid(format!("{}: masses must be positive", self.name)));
        }
        if !(self.c6_au > 0.0) {
            return Err(Error::invalid(format!("{}: C6 must be positive", self.name)));
        }
        if !(self.alpha1_au * self.alpha2_au > 0.0) {
            return Err(Error::invalid(format!(
                "{}: polarizability product must be positive",
                self.name
            )));
        }
        if self.electric_dipoles_debye.is_some() && self.magnetic_dipoles_mub.is_some() {
            return Err(Error::invalid(format!(
                "{}: at most one kind of permanent dipole may be set",
                self.name
            )));
        }
        Ok(())
    }

    pub fn reduced_mass_amu(&self) -> f64 {
        self.mass1_amu * self.mass2_amu / (self.mass1_amu + self.mass2_amu)
    }

    pub fn has_permanent_dipole(&self) -> bool {
        self.electric_dipoles_debye.is_some() || self.magnetic_dipoles_mub.is_some()
    }

    /// Dipole-dipole strength D_12 [Hartree a0^3] of the permanent dipoles.
    pub fn permanent_dipole_strength_au(&self, pc: &PhysicalConstants) -> Result<f64> {
        if let Some((d1, d2)) = self.electric_dipoles_debye {
            let f = 1.0 / pc.au_dipole_to_debye();
            Ok((d1 * f) * (d2 * f))
        } else if let Some((m1, m2)) = self.magnetic_dipoles_mub {
            // mu_B = 1/2 in atomic units; mu0/(4 pi) = 1/c^2
            let c = pc.c_au();
            Ok((0.5 * m1) * (0.5 * m2) / (c * c))
        } else {
            Err(Error::invalid(format!("{}: no permanent dipole set", self.name)))
        }
    }
}

/// Van der Waals reduced units of a species pair.
#[derive(Debug, Clone, Copy)]
pub struct VdwUnits {
    /// Characteristic length [a0]
    pub sigma_a0: f64,
    /// Characteristic energy [Hartree]
    pub epsilon_hartree: f64,
    /// Same energy as a temperature [microkelvin]
    pub epsilon_muk: f64,
    /// Characteristic intensity [GW/cm^2]
    pub beta_gw_cm2: f64,
}

/// Dipole-dipole reduced units of a species pair with permanent dipoles.
#[derive(Debug, Clone, Copy)]
pub struct DipoleUnits {
    /// Dipole length D [a0]
    pub d_length_a0: f64,
    /// Dipole energy E_D [Hartree]
    pub e_energy_hartree: f64,
    /// Same energy as a temperature [microkelvin]
    pub e_energy_muk: f64,
    /// Reduced van der Waals strength 2 mu C6 / D^4 [dimensionless]
    pub c6bar: f64,
    /// Critical reduced intensity matching the permanent-dipole coupling
    pub i_critical: f64,
}

/// sigma = (2 mu C6)^{1/4}, epsilon = 1/(2 mu sigma^2), beta = c sigma^3 epsilon/(12 pi a1 a2).
pub fn compute_vdw_units(species: &SpeciesParams, pc: &PhysicalConstants) -> Result<VdwUnits> {
    species.validate()?;
    let mu = species.reduced_mass_amu() * pc.amu_to_au();
    let sigma = (2.0 * mu * species.c6_au).powf(0.25);
    let epsilon = 1.0 / (2.0 * mu * sigma * sigma);
    let beta_au = pc.c_au() * sigma.powi(3) * epsilon
        / (12.0 * std::f64::consts::PI * species.alpha1_au * species.alpha2_au);
    Ok(VdwUnits {
        sigma_a0: sigma,
        epsilon_hartree: epsilon,
        epsilon_muk: epsilon * pc.hartree_to_kelvin() * 1e6,
        beta_gw_cm2: beta_au * pc.intensity_au_gw_cm2(),
    })
}

/// D = mu D_12, E_D = 1/(mu D^2), c6bar = 2 mu C6/D^4, I_c = 3 D_12/(eps sigma^3).
pub fn compute_dd_units(species: &SpeciesParams, pc: &PhysicalConstants) -> Result<DipoleUnits> {
    species.validate()?;
    let strength = species.permanent_dipole_strength_au(pc)?;
    let mu = species.reduced_mass_amu() * pc.amu_to_au();
    let d = mu * strength;
    let e_d = 1.0 / (mu * d * d);
    let c6bar = 2.0 * mu * species.c6_au / d.powi(4);
    let vdw = compute_vdw_units(species, pc)?;
    let i_critical = 3.0 * strength / (vdw.epsilon_hartree * vdw.sigma_a0.powi(3));
    Ok(DipoleUnits {
        d_length_a0: d,
        e_energy_hartree: e_d,
        e_energy_muk: e_d * pc.hartree_to_kelvin() * 1e6,
        c6bar,
        i_critical,
    })
}

/// D = (I/6) sigma; the companion energy is E_D = (72/I^2) epsilon.
pub fn intensity_to_dipole_length(intensity_ru: f64, sigma: f64) -> f64 {
    intensity_ru / 6.0 * sigma
}

/// Reduced vdW strength seen from the dipole-dipole units, 6^4/I^4.
pub fn c6bar_from_intensity(intensity_ru: f64) -> f64 {
    (6.0 / intensity_ru).powi(4)
}

/// Equivalent permanent dipoles (electric [Debye], magnetic [mu_B]) that mimic
/// non-resonant light of reduced intensity I on this species.
pub fn equivalent_dipole(
    species: &SpeciesParams,
    intensity_ru: f64,
    pc: &PhysicalConstants,
) -> Result<(f64, f64)> {
    species.validate()?;
    let vdw = compute_vdw_units(species, pc)?;
    let beta_au = vdw.beta_gw_cm2 / pc.intensity_au_gw_cm2();
    // D_12 = 4 pi I alpha1 alpha2 / c with I in atomic units
    let strength = 4.0 * std::f64::consts::PI * (intensity_ru * beta_au) * species.alpha1_au
        * species.alpha2_au
        / pc.c_au();
    let d_au = strength.sqrt();
    let m_au = strength.sqrt() * pc.c_au();
    Ok((d_au * pc.au_dipole_to_debye(), 2.0 * m_au))
}

// ---------------------------------------------------------------------------
// Species catalog
// ---------------------------------------------------------------------------

/// Isotope masses [amu], AME2020 rounded to 7 digits.
const MASS_TABLE: &[(&str, f64)] = &[
    ("7Li", 7.0160034),
    ("39K", 38.9637065),
    ("40K", 39.9639982),
    ("87Rb", 86.9091805),
    ("133Cs", 132.9054520),
    ("86Sr", 85.9092606),
    ("87Sr", 86.9088775),
    ("88Sr", 87.9056125),
    ("171Yb", 170.9363302),
    ("172Yb", 171.9363859),
    ("173Yb", 172.9382151),
    ("174Yb", 173.9388664),
    ("52Cr", 51.9405062),
    ("53Cr", 52.9406481),
    ("161Dy", 160.9269405),
    ("162Dy", 161.9268056),
    ("164Dy", 163.9291819),
    ("167Er", 166.9320546),
    ("168Er", 167.9323767),
];

pub fn isotope_mass_amu(isotope: &str) -> Result<f64> {
    MASS_TABLE
        .iter()
        .find(|(n, _)| *n == isotope)
        .map(|(_, m)| *m)
        .ok_or_else(|| Error::invalid(format!("unknown isotope '{isotope}'")))
}

#[derive(Debug, Deserialize)]
struct CatalogFile {
    species: Vec<CatalogEntry>,
}

#[derive(Debug, Deserialize)]
struct CatalogEntry {
    name: String,
    #[serde(default)]
    aliases: Vec<String>,
    /// Isotopes composing each collision partner (one for atoms, several for molecules)
    partner1: Vec<String>,
    partner2: Vec<String>,
    c6_au: f64,
    alpha_au: [f64; 2],
    #[serde(default)]
    electric_dipole_debye: Option<[f64; 2]>,
    #[serde(default)]
    magnetic_dipole_mub: Option<[f64; 2]>,
}

/// A named catalog record: the species parameters plus lookup aliases.
#[derive(Debug, Clone)]
pub struct CatalogRecord {
    pub params: SpeciesParams,
    pub aliases: Vec<String>,
}

pub const DEFAULT_CATALOG_TOML: &str = include_str!("../data/species.toml");

fn normalize_key(s: &str) -> String {
    s.chars()
        .filter(|c| c.is_ascii_alphanumeric())
        .collect::<String>()
        .to_ascii_lowercase()
}

/// Parse a catalog from TOML text.
pub fn parse_catalog(text: &str) -> Result<Vec<CatalogRecord>> {
    let file: CatalogFile =
        toml::from_str(text).map_err(|e| Error::invalid(format!("catalog parse error: {e}")))?;
    let mut out = Vec::new();
    for e in file.species {
        let mass = |isotopes: &[String]| -> Result<f64> {
            isotopes.iter().map(|i| isotope_mass_amu(i)).sum()
        };
        let params = SpeciesParams {
            name: e.name.clone(),
            mass1_amu: mass(&e.partner1)?,
            mass2_amu: mass(&e.partner2)?,
            c6_au: e.c6_au,
            alpha1_au: e.alpha_au[0],
            alpha2_au: e.alpha_au[1],
            electric_dipoles_debye: e.electric_dipole_debye.map(|d| (d[0], d[1])),
            magnetic_dipoles_mub: e.magnetic_dipole_mub.map(|m| (m[0], m[1])),
        };
        params.validate()?;
        out.push(CatalogRecord { params, aliases: e.aliases });
    }
    Ok(out)
}

/// Built-in catalog shipped with the crate.
pub fn default_catalog() -> Vec<CatalogRecord> {
    parse_catalog(DEFAULT_CATALOG_TOML).expect("embedded catalog is valid")
}

/// Find a species by name or alias; punctuation and case are ignored.
pub fn find_species<'a>(catalog: &'a [CatalogRecord], name: &str) -> Result<&'a CatalogRecord> {
    let key = normalize_key(name);
    catalog
        .iter()
        .find(|r| {
            normalize_key(&r.params.name) == key
                || r.aliases.iter().any(|a| normalize_key(a) == key)
        })
        .ok_or_else(|| Error::invalid(format!("species '{name}' not in catalog")))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn pc() -> PhysicalConstants {
        PhysicalConstants::default()
    }

    fn rel(a: f64, b: f64) -> f64 {
        ((a - b) / b).abs()
    }

    #[test]
    fn vdw_units_sr88_calibration() {
        let cat = default_catalog();
        let sr = &find_species(&cat, "88Sr2").unwrap().params;
        let u = compute_vdw_units(sr, &pc()).unwrap();
        assert!(rel(u.sigma_a0, 151.053) < 2e-3);
        assert!(rel(u.epsilon_muk, 86.365) < 2e-3);
        assert!(rel(u.beta_gw_cm2, 0.6358) < 2e-3);
        let (d, m) = equivalent_dipole(sr, 1.0, &pc()).unwrap();
        assert!(rel(d, 0.04506) < 2e-3);
        assert!(rel(m, 4.858) < 2e-3);
    }

    #[test]
    fn vdw_units_scaling_law() {
        let cat = default_catalog();
        let mut sp = find_species(&cat, "88Sr2").unwrap().params.clone();
        let u0 = compute_vdw_units(&sp, &pc()).unwrap();
        sp.c6_au *= 2.0;
        let u1 = compute_vdw_units(&sp, &pc()).unwrap();
        assert_relative_eq!(u1.sigma_a0 / u0.sigma_a0, 2f64.powf(0.25), max_relative = 1e-12);
        assert_relative_eq!(
            u1.epsilon_hartree / u0.epsilon_hartree,
            1.0 / 2f64.sqrt(),
            max_relative = 1e-12
        );
    }

    #[test]
    fn dd_units_cr52() {
        let cat = default_catalog();
        let cr = &find_species(&cat, "52Cr2").unwrap().params;
        let u = compute_dd_units(cr, &pc()).unwrap();
        assert!(rel(u.d_length_a0, 22.7413) < 5e-3);
        assert!(rel(u.e_energy_muk, 12897.6) < 5e-3);
        assert!(rel(u.c6bar, 259.46) < 5e-3);
        assert!(rel(u.i_critical, 1.4944) < 5e-3);
    }

    #[test]
    fn dd_units_rbcs_molecule_pair() {
        let cat = default_catalog();
        let p = &find_species(&cat, "(87Rb-133Cs)2").unwrap().params;
        let u = compute_dd_units(p, &pc()).unwrap();
        assert!(rel(u.d_length_a0, 46917.3) < 5e-3);
        assert!(rel(u.c6bar, 1.21779e-8) < 5e-3);
        assert!(rel(u.i_critical, 571.161) < 5e-3);
    }

    #[test]
    fn c6bar_identity_and_dipole_length() {
        let cat = default_catalog();
        let sr = &find_species(&cat, "88Sr2").unwrap().params;
        let u = compute_vdw_units(sr, &pc()).unwrap();
        for i in [0.5, 1.0, 1.36, 6.0, 9.01] {
            let d = intensity_to_dipole_length(i, u.sigma_a0);
            assert_relative_eq!(
                c6bar_from_intensity(i),
                (u.sigma_a0 / d).powi(4),
                max_relative = 1e-12
            );
        }
        assert_relative_eq!(
            intensity_to_dipole_length(6.0, u.sigma_a0),
            u.sigma_a0,
            max_relative = 1e-14
        );
        assert_eq!(intensity_to_dipole_length(0.0, u.sigma_a0), 0.0);
        // D(I=1.36) = 0.2267 sigma
        assert_relative_eq!(
            intensity_to_dipole_length(1.36, u.sigma_a0) / u.sigma_a0,
            1.36 / 6.0,
            max_relative = 1e-14
        );
    }

    #[test]
    fn critical_intensity_independent_of_polarizability() {
        let cat = default_catalog();
        let mut cr = find_species(&cat, "52Cr2").unwrap().params.clone();
        let i0 = compute_dd_units(&cr, &pc()).unwrap().i_critical;
        cr.alpha1_au *= 3.7;
        cr.alpha2_au *= 0.2;
        let i1 = compute_dd_units(&cr, &pc()).unwrap().i_critical;
        assert_eq!(i0.to_bits(), i1.to_bits());
    }

    #[test]
    fn equivalent_dipole_sqrt_scaling() {
        let cat = default_catalog();
        let sr = &find_species(&cat, "174Yb2").unwrap().params;
        let (d1, m1) = equivalent_dipole(sr, 1.0, &pc()).unwrap();
        let (d4, m4) = equivalent_dipole(sr, 4.0, &pc()).unwrap();
        assert_relative_eq!(d4, 2.0 * d1, max_relative = 1e-12);
        assert_relative_eq!(m4, 2.0 * m1, max_relative = 1e-12);
    }

    #[test]
    fn licl_cs_equivalent_electric_dipole() {
        let cat = default_catalog();
        let p = &find_species(&cat, "7Li-133Cs").unwrap().params;
        let (d, _) = equivalent_dipole(p, 1.0, &pc()).unwrap();
        assert!(rel(d, 0.09025) < 2e-3);
    }

    #[test]
    fn rejects_double_dipole_kind() {
        let sp = SpeciesParams {
            name: "bad".into(),
            mass1_amu: 1.0,
            mass2_amu: 1.0,
            c6_au: 10.0,
            alpha1_au: 10.0,
            alpha2_au: 10.0,
            electric_dipoles_debye: Some((1.0, 1.0)),
            magnetic_dipoles_mub: Some((1.0, 1.0)),
        };
        assert!(sp.validate().is_err());
        let mut neg = sp.clone();
        neg.electric_dipoles_debye = None;
        neg.magnetic_dipoles_mub = None;
        neg.c6_au = -1.0;
        assert!(compute_vdw_units(&neg, &pc()).is_err());
    }
}
