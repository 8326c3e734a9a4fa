//! Side-reaction and mechanical degradation sub-models.
//!
//! All sub-models act on the negative electrode unless noted. They are
//! advanced once per accepted electrochemical step from end-of-step fields.

mod mechanics;
mod metrics;
mod sei;

pub use mechanics::{
    crack_growth_step, lam_step, surface_stress, volume_average, HalfCycle, StressCycleCounter,
};
pub use metrics::{compute_lam, compute_lli, LamFractions};
pub use sei::{plating_step, sei_growth_step, SeiSurface};

use serde::{Deserialize, Serialize};

use crate::params::{Electrode, ParameterSet};

/// Degradation variables carried across steps and cycles.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DegradationState {
    /// SEI thickness on the nominal particle surface, m.
    pub l_sei_nom: f64,
    /// Mean SEI thickness over the crack surface, m.
    pub l_sei_crack: f64,
    /// Crack surface area per electrode volume, 1/m.
    pub a_crack: f64,
    /// Representative crack length, m.
    pub l_crack: f64,
    /// Plated lithium per electrode volume, mol/m^3.
    pub q_plated: f64,
    pub eps_am_p: f64,
    pub eps_am_n: f64,
    pub li_lost_sei_nom: f64,
    pub li_lost_sei_crack: f64,
    pub li_lost_plating: f64,
    /// Lithium held in active material that was isolated, mol. Not cyclable,
    /// but not a side-reaction loss either.
    pub li_trapped_lam: f64,
    pub n_half_cycles: u64,
    pub stress_counter: StressCycleCounter,
    pub stress_counter_pos: StressCycleCounter,
}

impl DegradationState {
    pub fn fresh(params: &ParameterSet) -> Self {
        Self {
            l_sei_nom: params.degradation.l_sei_init,
            l_sei_crack: 0.0,
            a_crack: 0.0,
            l_crack: params.degradation.l_crack_init,
            q_plated: 0.0,
            eps_am_p: params.eps_am(Electrode::Pos),
            eps_am_n: params.eps_am(Electrode::Neg),
            li_lost_sei_nom: 0.0,
            li_lost_sei_crack: 0.0,
            li_lost_plating: 0.0,
            li_trapped_lam: 0.0,
            n_half_cycles: 0,
            stress_counter: StressCycleCounter::default(),
            stress_counter_pos: StressCycleCounter::default(),
        }
    }

    pub fn eps_am(&self, electrode: Electrode) -> f64 {
        match electrode {
            Electrode::Pos => self.eps_am_p,
            Electrode::Neg => self.eps_am_n,
        }
    }

    /// Lithium consumed by side reactions, mol.
    pub fn side_reaction_loss(&self) -> f64 {
        self.li_lost_sei_nom + self.li_lost_sei_crack + self.li_lost_plating
    }

    /// Total film thickness on the negative electrode used for the film resistance.
    pub fn film_thickness(&self, params: &ParameterSet) -> f64 {
        self.l_sei_nom + self.q_plated * params.v_li / params.a_n
    }

    /// Film resistance, ohm m^2, scaled from the initial SEI resistance.
    pub fn film_resistance(&self, params: &ParameterSet) -> f64 {
        params.r_sei * self.film_thickness(params) / params.degradation.l_sei_init
    }
}
