//! Interfacial charge-transfer kinetics and electrolyte transport closures.

use crate::error::{Error, Result};
use crate::params::{FARADAY, GAS_CONSTANT};

/// Symmetry factors of the charge-transfer reaction.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TransferCoefficients {
    pub anodic: f64,
    pub cathodic: f64,
}

impl Default for TransferCoefficients {
    fn default() -> Self {
        Self {
            anodic: 0.5,
            cathodic: 0.5,
        }
    }
}

/// Exchange-current density i0 = i0_ref (c_e/c_ref)^aa (c_s/c_max)^ac (1 - c_s/c_max)^aa.
pub fn exchange_current(
    i0_ref: f64,
    c_s_surf: f64,
    c_e: f64,
    c_max: f64,
    c_e_ref: f64,
    alpha: TransferCoefficients,
) -> Result<f64> {
    if !(c_s_surf > 0.0 && c_s_surf < c_max) {
        return Err(Error::Kinetics(format!(
            "surface concentration {c_s_surf} outside (0, {c_max})"
        )));
    }
    if c_e <= 0.0 {
        return Err(Error::Kinetics(format!("electrolyte concentration {c_e} <= 0")));
    }
    let theta = c_s_surf / c_max;
    Ok(i0_ref
        * (c_e / c_e_ref).powf(alpha.anodic)
        * theta.powf(alpha.cathodic)
        * (1.0 - theta).powf(alpha.anodic))
}

/// Butler-Volmer molar flux out of the particle, mol/(m^2 s); positive when anodic.
/// Uses a 1000 mol/m^3 electrolyte reference and symmetric transfer
/// coefficients; [`butler_volmer_flux_with`] exposes both.
pub fn butler_volmer_flux(
    i0_ref: f64,
    c_s_surf: f64,
    c_e: f64,
    c_max: f64,
    overpotential: f64,
    temperature: f64,
) -> Result<f64> {
    butler_volmer_flux_with(
        i0_ref,
        c_s_surf,
        c_e,
        c_max,
        1000.0,
        overpotential,
        temperature,
        TransferCoefficients::default(),
    )
}

#[allow(clippy::too_many_arguments)]
pub fn butler_volmer_flux_with(
    i0_ref: f64,
    c_s_surf: f64,
    c_e: f64,
    c_max: f64,
    c_e_ref: f64,
    overpotential: f64,
    temperature: f64,
    alpha: TransferCoefficients,
) -> Result<f64> {
    if temperature <= 0.0 {
        return Err(Error::Kinetics(format!("temperature {temperature} K <= 0")));
    }
    let i0 = exchange_current(i0_ref, c_s_surf, c_e, c_max, c_e_ref, alpha)?;
    let f = FARADAY / (GAS_CONSTANT * temperature);
    Ok(i0 / FARADAY
        * ((alpha.anodic * f * overpotential).exp() - (-alpha.cathodic * f * overpotential).exp()))
}

/// Bulk electrolyte conductivity, S/m, for concentration in mol/m^3
/// (cubic fit for LiPF6 in carbonate solvent).
pub fn electrolyte_conductivity(c_e: f64) -> f64 {
    let c = c_e / 1000.0;
    0.0911 + 1.9101 * c - 1.052 * c * c + 0.1554 * c * c * c
}

/// d(conductivity)/d(c_e), S m^2/mol.
pub fn electrolyte_conductivity_slope(c_e: f64) -> f64 {
    let c = c_e / 1000.0;
    (1.9101 - 2.104 * c + 0.4662 * c * c) / 1000.0
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_overpotential_gives_zero_flux() {
        let j = butler_volmer_flux(1.0, 15000.0, 1000.0, 30000.0, 0.0, 298.15).unwrap();
        assert_eq!(j, 0.0);
    }

    #[test]
    fn symmetric_in_overpotential() {
        let a = butler_volmer_flux(2.0, 12000.0, 1100.0, 30000.0, 0.01, 298.15).unwrap();
        let b = butler_volmer_flux(2.0, 12000.0, 1100.0, 30000.0, -0.01, 298.15).unwrap();
        assert!(a > 0.0 && b < 0.0);
        assert!((a + b).abs() < 1e-15 * a.abs());
    }

    #[test]
    fn closed_form_sinh() {
        // c_s at half of c_max and c_e = c_ref make i0 = 0.5 * i0_ref; pick i0_ref = 2.
        let j = butler_volmer_flux(2.0, 15000.0, 1000.0, 30000.0, 0.1, 298.15).unwrap();
        let expected = (1.0 / FARADAY) * 2.0 * (0.5 * FARADAY * 0.1 / (GAS_CONSTANT * 298.15)).sinh();
        assert!((j - expected).abs() < 1e-12 * expected);
    }

    #[test]
    fn saturated_surface_is_kinetics_error() {
        assert!(matches!(
            butler_volmer_flux(1.0, 30000.0, 1000.0, 30000.0, 0.1, 298.15),
            Err(Error::Kinetics(_))
        ));
        assert!(butler_volmer_flux(1.0, 0.0, 1000.0, 30000.0, 0.1, 298.15).is_err());
    }

    #[test]
    fn conductivity_slope_matches_difference() {
        for c in [200.0, 800.0, 1200.0, 2500.0] {
            let h = 1e-3;
            let fd = (electrolyte_conductivity(c + h) - electrolyte_conductivity(c - h)) / (2.0 * h);
            assert!((fd - electrolyte_conductivity_slope(c)).abs() < 1e-9);
        }
    }
}
