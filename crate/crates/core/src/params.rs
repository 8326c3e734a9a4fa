//! Cell parameter set.
//!
//! The JSON form is a flat object keyed by the physical symbol (`R_p`,
//! `D_e`, `i0_n_ref`, ...) in SI units, with degradation rate constants and
//! sub-model toggles nested under `degradation`. Defaults describe a
//! representative high-power graphite/NMC pouch cell sized to 2.2 Ah; they
//! are not measurements of any particular pack.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const FARADAY: f64 = 96_485.332_12;
pub const GAS_CONSTANT: f64 = 8.314_462_618;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Electrode {
    Pos,
    Neg,
}

impl Electrode {
    pub fn name(self) -> &'static str {
        match self {
            Electrode::Pos => "positive",
            Electrode::Neg => "negative",
        }
    }
}

/// Independent switches for each degradation sub-model.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct DegradationToggles {
    pub sei_nominal: bool,
    pub sei_crack: bool,
    pub plating: bool,
    pub cracking: bool,
    pub lam: bool,
}

impl Default for DegradationToggles {
    fn default() -> Self {
        Self::all_on()
    }
}

impl DegradationToggles {
    pub const fn all_on() -> Self {
        Self {
            sei_nominal: true,
            sei_crack: true,
            plating: true,
            cracking: true,
            lam: true,
        }
    }

    pub const fn all_off() -> Self {
        Self {
            sei_nominal: false,
            sei_crack: false,
            plating: false,
            cracking: false,
            lam: false,
        }
    }

    pub fn any(&self) -> bool {
        self.sei_nominal || self.sei_crack || self.plating || self.cracking || self.lam
    }
}

/// Rate constants of the side-reaction and mechanical sub-models.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct DegradationParams {
    pub toggles: DegradationToggles,
    /// SEI growth pre-exponential factor, m/s.
    pub k_sei: f64,
    /// SEI activation energy, J/mol.
    pub e_a_sei: f64,
    pub alpha_sei: f64,
    /// SEI reaction equilibrium potential vs Li/Li+, V.
    pub u_sei: f64,
    /// Solvent-diffusion length scale, m.
    pub l_diff: f64,
    /// Initial SEI thickness, m.
    pub l_sei_init: f64,
    /// Molar density of the SEI film (rho/M), mol/m^3.
    pub sei_molar_density: f64,
    /// Plating exchange-current density, A/m^2.
    pub i0_plating: f64,
    /// Paris-law coefficient, m per cycle per Pa^m_cr.
    pub k_cr: f64,
    pub m_cr: f64,
    /// Crack surface created per unit crack-length growth per unit electrode volume, 1/m^2.
    pub crack_surface_density: f64,
    /// Initial crack length, m.
    pub l_crack_init: f64,
    /// Tensile stress above which active material becomes isolated, Pa.
    pub sigma_crit: f64,
    /// LAM rate constant, 1/s.
    pub beta_lam: f64,
    pub m_lam: f64,
    /// Also apply cracking-driven LAM to the positive electrode.
    pub lam_positive: bool,
}

impl Default for DegradationParams {
    fn default() -> Self {
        Self {
            toggles: DegradationToggles::all_on(),
            k_sei: 1.0e-9,
            e_a_sei: 30_000.0,
            alpha_sei: 0.5,
            u_sei: 0.4,
            l_diff: 2.0e-9,
            l_sei_init: 5.0e-9,
            sei_molar_density: 1.0e4,
            i0_plating: 1.0e-3,
            k_cr: 5.0e-22,
            m_cr: 2.0,
            crack_surface_density: 3.0e10,
            l_crack_init: 2.0e-8,
            sigma_crit: 2.5e7,
            beta_lam: 1.0e-4,
            m_lam: 1.0,
            lam_positive: false,
        }
    }
}

/// Electrochemical, mechanical and fixed geometry/thermal parameters of one cell.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ParameterSet {
    pub theta_p_max: f64,
    pub theta_p_min: f64,
    pub theta_n_max: f64,
    pub theta_n_min: f64,
    #[serde(rename = "R_p")]
    pub r_p: f64,
    #[serde(rename = "R_n")]
    pub r_n: f64,
    pub sigma_p: f64,
    pub sigma_n: f64,
    pub eps_p: f64,
    pub eps_sep: f64,
    pub eps_n: f64,
    pub eps_f_p: f64,
    pub eps_f_n: f64,
    pub a_p: f64,
    pub a_n: f64,
    #[serde(rename = "D_e")]
    pub d_e: f64,
    #[serde(rename = "D_p")]
    pub d_p: f64,
    #[serde(rename = "D_n")]
    pub d_n: f64,
    pub c_e_init: f64,
    pub i0_p_ref: f64,
    pub i0_n_ref: f64,
    #[serde(rename = "R_SEI")]
    pub r_sei: f64,
    pub nu_p: f64,
    pub nu_n: f64,
    #[serde(rename = "E_p")]
    pub e_p: f64,
    #[serde(rename = "E_n")]
    pub e_n: f64,
    #[serde(rename = "V_p")]
    pub v_p: f64,
    #[serde(rename = "V_n")]
    pub v_n: f64,
    #[serde(rename = "V_Li")]
    pub v_li: f64,

    #[serde(rename = "L_p")]
    pub l_p: f64,
    #[serde(rename = "L_sep")]
    pub l_sep: f64,
    #[serde(rename = "L_n")]
    pub l_n: f64,
    #[serde(rename = "A_cell")]
    pub a_cell: f64,
    pub c_p_max: f64,
    pub c_n_max: f64,
    /// Reference electrolyte concentration of the exchange-current law.
    pub c_e_ref: f64,
    pub t_plus: f64,
    pub bruggeman: f64,
    pub faraday: f64,
    pub gas_constant: f64,
    #[serde(rename = "T_amb")]
    pub t_amb: f64,
    /// Lumped thermal mass m*c_th, J/K.
    pub m_c_th: f64,
    /// Convective conductance h*A_surf, W/K.
    #[serde(rename = "h_A")]
    pub h_a: f64,
    pub n_series: u32,
    #[serde(rename = "Q_rated")]
    pub q_rated: f64,

    pub degradation: DegradationParams,
}

impl Default for ParameterSet {
    fn default() -> Self {
        Self {
            theta_p_max: 0.90,
            theta_p_min: 0.27,
            theta_n_max: 0.90,
            theta_n_min: 0.03,
            r_p: 2.5e-6,
            r_n: 3.0e-6,
            sigma_p: 10.0,
            sigma_n: 100.0,
            eps_p: 0.30,
            eps_sep: 0.45,
            eps_n: 0.30,
            eps_f_p: 0.08,
            eps_f_n: 0.05,
            a_p: 7.44e5,
            a_n: 6.5e5,
            d_e: 3.0e-10,
            d_p: 2.0e-14,
            d_n: 5.0e-14,
            c_e_init: 1200.0,
            i0_p_ref: 3.0,
            i0_n_ref: 2.0,
            r_sei: 1.0e-3,
            nu_p: 0.2,
            nu_n: 0.3,
            e_p: 375.0e9,
            e_n: 15.0e9,
            v_p: 1.25e-6,
            v_n: 3.1e-6,
            v_li: 1.3e-5,

            l_p: 43.0e-6,
            l_sep: 20.0e-6,
            l_n: 50.0e-6,
            a_cell: 0.095,
            c_p_max: 51_554.0,
            c_n_max: 30_555.0,
            c_e_ref: 1000.0,
            t_plus: 0.38,
            bruggeman: 1.5,
            faraday: FARADAY,
            gas_constant: GAS_CONSTANT,
            t_amb: 298.15,
            m_c_th: 50.0,
            h_a: 0.5,
            n_series: 4,
            q_rated: 2.2,

            degradation: DegradationParams::default(),
        }
    }
}

macro_rules! scalar_keys {
    ($($key:literal => $($field:ident).+),* $(,)?) => {
        /// Every scalar key addressable by [`ParameterSet::get`] / [`ParameterSet::set`].
        pub const PARAMETER_KEYS: &[&str] = &[$($key),*];

        impl ParameterSet {
            pub fn get(&self, key: &str) -> Result<f64> {
                match key {
                    $($key => Ok(self.$($field).+),)*
                    "n_series" => Ok(f64::from(self.n_series)),
                    _ => Err(Error::UnknownParameter(key.to_string())),
                }
            }

            pub fn set(&mut self, key: &str, value: f64) -> Result<()> {
                match key {
                    $($key => self.$($field).+ = value,)*
                    _ => return Err(Error::UnknownParameter(key.to_string())),
                }
                Ok(())
            }
        }
    };
}

scalar_keys! {
    "theta_p_max" => theta_p_max,
    "theta_p_min" => theta_p_min,
    "theta_n_max" => theta_n_max,
    "theta_n_min" => theta_n_min,
    "R_p" => r_p,
    "R_n" => r_n,
    "sigma_p" => sigma_p,
    "sigma_n" => sigma_n,
    "eps_p" => eps_p,
    "eps_sep" => eps_sep,
    "eps_n" => eps_n,
    "eps_f_p" => eps_f_p,
    "eps_f_n" => eps_f_n,
    "a_p" => a_p,
    "a_n" => a_n,
    "D_e" => d_e,
    "D_p" => d_p,
    "D_n" => d_n,
    "c_e_init" => c_e_init,
    "i0_p_ref" => i0_p_ref,
    "i0_n_ref" => i0_n_ref,
    "R_SEI" => r_sei,
    "nu_p" => nu_p,
    "nu_n" => nu_n,
    "E_p" => e_p,
    "E_n" => e_n,
    "V_p" => v_p,
    "V_n" => v_n,
    "V_Li" => v_li,
    "L_p" => l_p,
    "L_sep" => l_sep,
    "L_n" => l_n,
    "A_cell" => a_cell,
    "c_p_max" => c_p_max,
    "c_n_max" => c_n_max,
    "c_e_ref" => c_e_ref,
    "t_plus" => t_plus,
    "bruggeman" => bruggeman,
    "T_amb" => t_amb,
    "m_c_th" => m_c_th,
    "h_A" => h_a,
    "Q_rated" => q_rated,
    "degradation.k_sei" => degradation.k_sei,
    "degradation.e_a_sei" => degradation.e_a_sei,
    "degradation.alpha_sei" => degradation.alpha_sei,
    "degradation.u_sei" => degradation.u_sei,
    "degradation.l_diff" => degradation.l_diff,
    "degradation.l_sei_init" => degradation.l_sei_init,
    "degradation.sei_molar_density" => degradation.sei_molar_density,
    "degradation.i0_plating" => degradation.i0_plating,
    "degradation.k_cr" => degradation.k_cr,
    "degradation.m_cr" => degradation.m_cr,
    "degradation.crack_surface_density" => degradation.crack_surface_density,
    "degradation.l_crack_init" => degradation.l_crack_init,
    "degradation.sigma_crit" => degradation.sigma_crit,
    "degradation.beta_lam" => degradation.beta_lam,
    "degradation.m_lam" => degradation.m_lam,
}

fn invalid(name: &str, reason: impl Into<String>) -> Error {
    Error::InvalidParameter {
        name: name.to_string(),
        reason: reason.into(),
    }
}

impl ParameterSet {
    pub fn from_json_str(s: &str) -> Result<Self> {
        let params: ParameterSet = serde_json::from_str(s)?;
        params.validate()?;
        Ok(params)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json_str(&text)
    }

    pub fn to_json_string(&self) -> String {
        serde_json::to_string_pretty(self).expect("parameter set is always serializable")
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        std::fs::write(path, self.to_json_string()).map_err(|e| Error::io(path, e))
    }

    /// Active-material volume fraction, the remainder after electrolyte and filler.
    pub fn eps_am(&self, electrode: Electrode) -> f64 {
        match electrode {
            Electrode::Pos => 1.0 - self.eps_p - self.eps_f_p,
            Electrode::Neg => 1.0 - self.eps_n - self.eps_f_n,
        }
    }

    pub fn c_max(&self, electrode: Electrode) -> f64 {
        match electrode {
            Electrode::Pos => self.c_p_max,
            Electrode::Neg => self.c_n_max,
        }
    }

    pub fn thickness(&self, electrode: Electrode) -> f64 {
        match electrode {
            Electrode::Pos => self.l_p,
            Electrode::Neg => self.l_n,
        }
    }

    pub fn radius(&self, electrode: Electrode) -> f64 {
        match electrode {
            Electrode::Pos => self.r_p,
            Electrode::Neg => self.r_n,
        }
    }

    pub fn solid_diffusivity(&self, electrode: Electrode) -> f64 {
        match electrode {
            Electrode::Pos => self.d_p,
            Electrode::Neg => self.d_n,
        }
    }

    pub fn surface_area(&self, electrode: Electrode) -> f64 {
        match electrode {
            Electrode::Pos => self.a_p,
            Electrode::Neg => self.a_n,
        }
    }

    pub fn porosity(&self, electrode: Electrode) -> f64 {
        match electrode {
            Electrode::Pos => self.eps_p,
            Electrode::Neg => self.eps_n,
        }
    }

    /// Stoichiometry at the given state of charge (linear in the usable window).
    pub fn stoichiometry_at_soc(&self, electrode: Electrode, soc: f64) -> f64 {
        match electrode {
            Electrode::Neg => self.theta_n_min + soc * (self.theta_n_max - self.theta_n_min),
            Electrode::Pos => self.theta_p_max - soc * (self.theta_p_max - self.theta_p_min),
        }
    }

    /// Cyclable lithium held by the negative-electrode window, mol.
    pub fn initial_inventory_mol(&self) -> f64 {
        self.a_cell
            * self.l_n
            * self.eps_am(Electrode::Neg)
            * self.c_n_max
            * (self.theta_n_max - self.theta_n_min)
    }

    /// Convert moles of lithium to ampere-hours.
    pub fn mol_to_ah(&self, mol: f64) -> f64 {
        mol * self.faraday / 3600.0
    }

    pub fn validate(&self) -> Result<()> {
        for (name, lo, hi) in [
            ("theta_p_min", self.theta_p_min, self.theta_p_max),
            ("theta_n_min", self.theta_n_min, self.theta_n_max),
        ] {
            if !(0.0..=1.0).contains(&lo) || !(0.0..=1.0).contains(&hi) || lo >= hi {
                return Err(invalid(name, format!("limits [{lo}, {hi}] not ordered in [0, 1]")));
            }
        }
        for (name, v) in [
            ("eps_p", self.eps_p),
            ("eps_sep", self.eps_sep),
            ("eps_n", self.eps_n),
        ] {
            if !(v > 0.0 && v < 1.0) {
                return Err(invalid(name, format!("porosity {v} not in (0, 1)")));
            }
        }
        for (name, v) in [("eps_f_p", self.eps_f_p), ("eps_f_n", self.eps_f_n)] {
            if !(0.0..1.0).contains(&v) {
                return Err(invalid(name, format!("filler fraction {v} not in [0, 1)")));
            }
        }
        for electrode in [Electrode::Pos, Electrode::Neg] {
            let am = self.eps_am(electrode);
            if !(am > 0.0 && am < 1.0) {
                return Err(invalid(
                    &format!("eps_am_{}", &electrode.name()[..3]),
                    format!("porosity + filler leave active fraction {am}"),
                ));
            }
        }
        let positive = [
            ("R_p", self.r_p),
            ("R_n", self.r_n),
            ("sigma_p", self.sigma_p),
            ("sigma_n", self.sigma_n),
            ("a_p", self.a_p),
            ("a_n", self.a_n),
            ("D_e", self.d_e),
            ("D_p", self.d_p),
            ("D_n", self.d_n),
            ("c_e_init", self.c_e_init),
            ("i0_p_ref", self.i0_p_ref),
            ("i0_n_ref", self.i0_n_ref),
            ("R_SEI", self.r_sei),
            ("E_p", self.e_p),
            ("E_n", self.e_n),
            ("V_p", self.v_p),
            ("V_n", self.v_n),
            ("V_Li", self.v_li),
            ("L_p", self.l_p),
            ("L_sep", self.l_sep),
            ("L_n", self.l_n),
            ("A_cell", self.a_cell),
            ("c_p_max", self.c_p_max),
            ("c_n_max", self.c_n_max),
            ("c_e_ref", self.c_e_ref),
            ("bruggeman", self.bruggeman),
            ("faraday", self.faraday),
            ("gas_constant", self.gas_constant),
            ("T_amb", self.t_amb),
            ("m_c_th", self.m_c_th),
            ("h_A", self.h_a),
            ("Q_rated", self.q_rated),
        ];
        for (name, v) in positive {
            if !(v.is_finite() && v > 0.0) {
                return Err(invalid(name, format!("{v} must be finite and > 0")));
            }
        }
        for (name, v) in [("nu_p", self.nu_p), ("nu_n", self.nu_n)] {
            if !(v > 0.0 && v < 0.5) {
                return Err(invalid(name, format!("Poisson's ratio {v} not in (0, 0.5)")));
            }
        }
        if !(self.t_plus > 0.0 && self.t_plus < 1.0) {
            return Err(invalid("t_plus", "transference number not in (0, 1)"));
        }
        if self.n_series == 0 {
            return Err(invalid("n_series", "must be a positive integer"));
        }
        let d = &self.degradation;
        for (name, v) in [
            ("degradation.k_sei", d.k_sei),
            ("degradation.e_a_sei", d.e_a_sei),
            ("degradation.i0_plating", d.i0_plating),
            ("degradation.k_cr", d.k_cr),
            ("degradation.crack_surface_density", d.crack_surface_density),
            ("degradation.l_crack_init", d.l_crack_init),
            ("degradation.beta_lam", d.beta_lam),
        ] {
            if !(v.is_finite() && v >= 0.0) {
                return Err(invalid(name, format!("{v} must be finite and >= 0")));
            }
        }
        for (name, v) in [
            ("degradation.l_diff", d.l_diff),
            ("degradation.l_sei_init", d.l_sei_init),
            ("degradation.sei_molar_density", d.sei_molar_density),
            ("degradation.sigma_crit", d.sigma_crit),
            ("degradation.m_cr", d.m_cr),
            ("degradation.m_lam", d.m_lam),
            ("degradation.alpha_sei", d.alpha_sei),
        ] {
            if !(v.is_finite() && v > 0.0) {
                return Err(invalid(name, format!("{v} must be finite and > 0")));
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_are_valid() {
        ParameterSet::default().validate().unwrap();
    }

    #[test]
    fn volume_fractions_close() {
        let p = ParameterSet::default();
        for e in [Electrode::Pos, Electrode::Neg] {
            let sum = p.porosity(e)
                + p.eps_am(e)
                + match e {
                    Electrode::Pos => p.eps_f_p,
                    Electrode::Neg => p.eps_f_n,
                };
            assert!((sum - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn default_window_holds_rated_capacity() {
        let p = ParameterSet::default();
        let ah = p.mol_to_ah(p.initial_inventory_mol());
        assert!((ah - 2.2).abs() / 2.2 < 0.01, "window capacity {ah} Ah");
    }

    #[test]
    fn json_uses_symbol_keys() {
        let p = ParameterSet::default();
        let v: serde_json::Value = serde_json::from_str(&p.to_json_string()).unwrap();
        for key in ["R_p", "D_e", "i0_n_ref", "R_SEI", "V_Li", "A_cell", "T_amb", "n_series"] {
            assert!(v.get(key).is_some(), "missing {key}");
        }
        assert!(v["degradation"]["toggles"]["sei_crack"].as_bool().unwrap());
        let back = ParameterSet::from_json_str(&p.to_json_string()).unwrap();
        assert_eq!(back, p);
    }

    #[test]
    fn get_set_by_key() {
        let mut p = ParameterSet::default();
        for key in PARAMETER_KEYS {
            let v = p.get(key).unwrap();
            p.set(key, v).unwrap();
        }
        p.set("D_n", 1e-13).unwrap();
        assert_eq!(p.d_n, 1e-13);
        p.set("degradation.sigma_crit", 1e7).unwrap();
        assert_eq!(p.degradation.sigma_crit, 1e7);
        assert!(matches!(p.set("nope", 1.0), Err(Error::UnknownParameter(_))));
    }

    #[test]
    fn rejects_inverted_stoichiometry() {
        let mut p = ParameterSet::default();
        p.theta_n_min = 0.95;
        assert!(p.validate().is_err());
    }

    #[test]
    fn rejects_overfull_electrode() {
        let mut p = ParameterSet::default();
        p.eps_n = 0.7;
        p.eps_f_n = 0.35;
        assert!(p.validate().is_err());
    }
}
