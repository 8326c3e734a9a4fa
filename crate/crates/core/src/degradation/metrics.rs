use serde::{Deserialize, Serialize};

use super::DegradationState;

/// Loss of lithium inventory as a fraction of the initial cyclable inventory.
pub fn compute_lli(state: &DegradationState, initial_inventory: f64) -> f64 {
    assert!(initial_inventory > 0.0, "initial inventory must be positive");
    (state.li_lost_sei_nom + state.li_lost_sei_crack + state.li_lost_plating) / initial_inventory
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LamFractions {
    pub pos: f64,
    pub neg: f64,
}

/// Loss of active material per electrode, 1 - eps_am / eps_am_initial.
pub fn compute_lam(state: &DegradationState, initial_eps_am_p: f64, initial_eps_am_n: f64) -> LamFractions {
    assert!(initial_eps_am_p > 0.0 && initial_eps_am_n > 0.0);
    LamFractions {
        pos: (1.0 - state.eps_am_p / initial_eps_am_p).clamp(0.0, 1.0),
        neg: (1.0 - state.eps_am_n / initial_eps_am_n).clamp(0.0, 1.0),
    }
}
