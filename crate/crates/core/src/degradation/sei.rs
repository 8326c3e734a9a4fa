use serde::{Deserialize, Serialize};

use super::DegradationState;
use crate::params::{Electrode, ParameterSet};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SeiSurface {
    Nominal,
    Crack,
}

/// Advance the SEI film on one surface over `dt`.
///
/// Growth follows dL/dt = r / (1 + L/L_diff) with
/// r = k exp(-E_a/RT) exp(-alpha F eta/RT); with `r` frozen over the step the
/// quantity L + L^2/(2 L_diff) grows linearly, which is integrated exactly.
/// Returns the thickness increment (m) and lithium consumed (mol).
pub fn sei_growth_step(
    state: &DegradationState,
    params: &ParameterSet,
    temperature: f64,
    local_overpotential: f64,
    surface: SeiSurface,
    dt: f64,
) -> (f64, f64) {
    let d = &params.degradation;
    let (thickness, area) = match surface {
        SeiSurface::Nominal => (
            state.l_sei_nom,
            params.a_n * state.eps_am_n / params.eps_am(Electrode::Neg),
        ),
        SeiSurface::Crack => (state.l_sei_crack, state.a_crack),
    };
    if d.k_sei == 0.0 || dt <= 0.0 {
        return (0.0, 0.0);
    }
    let rt = params.gas_constant * temperature;
    let rate = d.k_sei
        * (-d.e_a_sei / rt).exp()
        * (-d.alpha_sei * params.faraday * local_overpotential / rt).exp();
    let ld = d.l_diff;
    let s = 1.0 + thickness / ld;
    let grown = ld * ((s * s + 2.0 * rate * dt / ld).sqrt() - 1.0);
    let dl = (grown - thickness).max(0.0);
    let dli = dl * area * params.a_cell * params.l_n * d.sei_molar_density;
    (dl, dli)
}

/// Plated lithium per electrode volume (mol/m^3) over `dt`.
///
/// `anode_overpotential_vs_li` is the negative-electrode surface potential
/// against a lithium reference; plating proceeds only while it is negative.
pub fn plating_step(
    params: &ParameterSet,
    anode_overpotential_vs_li: f64,
    temperature: f64,
    dt: f64,
) -> f64 {
    if anode_overpotential_vs_li >= 0.0 || dt <= 0.0 {
        return 0.0;
    }
    let half_f = 0.5 * params.faraday * anode_overpotential_vs_li / (params.gas_constant * temperature);
    let flux = -(params.degradation.i0_plating / params.faraday) * 2.0 * half_f.sinh();
    flux.max(0.0) * params.a_n * dt
}

#[cfg(test)]
mod tests {
    use super::*;

    fn setup() -> (ParameterSet, DegradationState) {
        let p = ParameterSet::default();
        let s = DegradationState::fresh(&p);
        (p, s)
    }

    #[test]
    fn disabled_kinetics_gives_nothing() {
        let (mut p, s) = setup();
        p.degradation.k_sei = 0.0;
        assert_eq!(sei_growth_step(&s, &p, 298.15, -0.3, SeiSurface::Nominal, 10.0), (0.0, 0.0));
    }

    #[test]
    fn long_horizon_approaches_square_root_law() {
        let (p, mut s) = setup();
        s.l_sei_nom = 1e-12;
        let t0 = 1.0e7;
        let dt = 1.0e4;
        let mut thickness_at = Vec::new();
        let mut t = 0.0;
        for target in [t0, 4.0 * t0] {
            while t < target {
                let (dl, _) = sei_growth_step(&s, &p, 298.15, -0.3, SeiSurface::Nominal, dt);
                s.l_sei_nom += dl;
                t += dt;
            }
            thickness_at.push(s.l_sei_nom);
        }
        assert!(thickness_at[0] > 20.0 * p.degradation.l_diff);
        let ratio = thickness_at[1] / thickness_at[0];
        assert!((ratio - 2.0).abs() / 2.0 < 0.05, "ratio {ratio}");
    }

    #[test]
    fn rate_decreases_with_thickness() {
        let (p, mut s) = setup();
        let (thin, _) = sei_growth_step(&s, &p, 298.15, -0.3, SeiSurface::Nominal, 1.0);
        s.l_sei_nom *= 4.0;
        let (thick, _) = sei_growth_step(&s, &p, 298.15, -0.3, SeiSurface::Nominal, 1.0);
        assert!(thick < thin);
    }

    #[test]
    fn warmer_grows_faster() {
        let (p, s) = setup();
        let (cold, _) = sei_growth_step(&s, &p, 298.15, -0.3, SeiSurface::Nominal, 10.0);
        let (warm, _) = sei_growth_step(&s, &p, 318.15, -0.3, SeiSurface::Nominal, 10.0);
        assert!(warm > cold);
    }

    #[test]
    fn lithium_consumed_matches_film_volume() {
        let (p, s) = setup();
        let (dl, dli) = sei_growth_step(&s, &p, 298.15, -0.3, SeiSurface::Nominal, 100.0);
        let expected = dl * p.a_n * p.a_cell * p.l_n * p.degradation.sei_molar_density;
        assert!((dli - expected).abs() <= 1e-15 * expected);
    }

    #[test]
    fn crack_surface_without_cracks_consumes_nothing() {
        let (p, s) = setup();
        let (dl, dli) = sei_growth_step(&s, &p, 298.15, -0.3, SeiSurface::Crack, 100.0);
        assert!(dl > 0.0);
        assert_eq!(dli, 0.0);
    }

    #[test]
    fn plating_off_for_positive_potential() {
        let p = ParameterSet::default();
        assert_eq!(plating_step(&p, 0.05, 298.15, 1.0), 0.0);
    }

    #[test]
    fn plating_monotone_in_driving_force() {
        let p = ParameterSet::default();
        let a = plating_step(&p, -0.010, 298.15, 1.0);
        let b = plating_step(&p, -0.020, 298.15, 1.0);
        assert!(b > a && a > 0.0);
    }

    #[test]
    fn plating_closed_form() {
        let p = ParameterSet::default();
        let t = 298.15;
        let x = 0.5 * p.faraday * 0.01 / (p.gas_constant * t);
        let expected = (p.degradation.i0_plating / p.faraday) * (x.exp() - (-x).exp()) * p.a_n * 1.0;
        let got = plating_step(&p, -0.01, t, 1.0);
        assert!((got - expected).abs() < 1e-12 * expected);
    }
}
