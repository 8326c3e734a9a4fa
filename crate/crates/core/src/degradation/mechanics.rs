use serde::{Deserialize, Serialize};

use super::DegradationState;
use crate::params::{Electrode, ParameterSet};

/// Volume-weighted mean of a radial profile given shell volume fractions.
pub fn volume_average(profile: &[f64], shell_fraction: &[f64]) -> f64 {
    profile.iter().zip(shell_fraction).map(|(c, w)| c * w).sum()
}

/// Tangential stress at the particle surface, Pa.
///
/// sigma_t = Omega E / (3 (1 - nu)) (c_avg - c_surf); positive (tensile) while
/// the particle is being delithiated.
pub fn surface_stress(c_avg: f64, c_surf: f64, params: &ParameterSet, electrode: Electrode) -> f64 {
    let (omega, young, poisson) = match electrode {
        Electrode::Pos => (params.v_p, params.e_p, params.nu_p),
        Electrode::Neg => (params.v_n, params.e_n, params.nu_n),
    };
    omega * young / (3.0 * (1.0 - poisson)) * (c_avg - c_surf)
}

/// A completed stress reversal.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HalfCycle {
    pub amplitude: f64,
}

/// Turning-point detector with a hysteresis band.
///
/// A half-cycle is closed once the signal retreats from its running extreme by
/// more than the band; its amplitude is half the distance between the two
/// bounding turning points.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct StressCycleCounter {
    last_turn: Option<f64>,
    candidate: f64,
    direction: i8,
}

impl StressCycleCounter {
    pub fn push(&mut self, stress: f64, band: f64) -> Option<HalfCycle> {
        let Some(last) = self.last_turn else {
            self.last_turn = Some(stress);
            self.candidate = stress;
            return None;
        };
        match self.direction {
            0 => {
                if stress >= last + band {
                    self.direction = 1;
                    self.candidate = stress;
                } else if stress <= last - band {
                    self.direction = -1;
                    self.candidate = stress;
                }
                None
            }
            dir => {
                let extends = if dir > 0 { stress > self.candidate } else { stress < self.candidate };
                let reverses = if dir > 0 {
                    stress <= self.candidate - band
                } else {
                    stress >= self.candidate + band
                };
                if extends {
                    self.candidate = stress;
                    None
                } else if reverses {
                    let amplitude = 0.5 * (self.candidate - last).abs();
                    self.last_turn = Some(self.candidate);
                    self.candidate = stress;
                    self.direction = -dir;
                    Some(HalfCycle { amplitude })
                } else {
                    None
                }
            }
        }
    }
}

/// Paris-law crack growth for one stress half-cycle.
///
/// dl/dN = k_cr sigma^m_cr per full cycle, so a half-cycle contributes half.
/// Returns (crack length increment m, crack area increment 1/m).
pub fn crack_growth_step(
    _state: &DegradationState,
    stress_amplitude: f64,
    params: &ParameterSet,
) -> (f64, f64) {
    let d = &params.degradation;
    if stress_amplitude <= 0.0 {
        return (0.0, 0.0);
    }
    let dl = 0.5 * d.k_cr * stress_amplitude.powf(d.m_cr);
    (dl, dl * d.crack_surface_density)
}

/// Change in active-material fraction from stress above the isolation threshold.
pub fn lam_step(eps_am: f64, stress: f64, params: &ParameterSet, dt: f64) -> f64 {
    let d = &params.degradation;
    if stress <= d.sigma_crit || eps_am <= 0.0 {
        return 0.0;
    }
    let excess = (stress - d.sigma_crit) / d.sigma_crit;
    let delta = -d.beta_lam * excess.powf(d.m_lam) * dt;
    delta.max(-eps_am)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn uniform_profile_is_stress_free() {
        let p = ParameterSet::default();
        assert_eq!(surface_stress(12000.0, 12000.0, &p, Electrode::Neg), 0.0);
    }

    #[test]
    fn stress_linear_in_modulus() {
        let mut p = ParameterSet::default();
        let a = surface_stress(12000.0, 11000.0, &p, Electrode::Neg);
        p.e_n *= 2.0;
        let b = surface_stress(12000.0, 11000.0, &p, Electrode::Neg);
        assert!((b - 2.0 * a).abs() < 1e-9 * a);
    }

    #[test]
    fn stress_from_linear_radial_profile() {
        let mut p = ParameterSet::default();
        p.v_n = 3.5e-6;
        p.e_n = 15e9;
        p.nu_n = 0.3;
        // c(rho) = c_s + k (1 - rho) on 50 shells; evaluate c_avg numerically.
        let n = 50;
        let faces: Vec<f64> = (0..=n).map(|i| i as f64 / n as f64).collect();
        let fractions: Vec<f64> = faces.windows(2).map(|w| w[1].powi(3) - w[0].powi(3)).collect();
        let c_surf = 10_000.0;
        // Exact mean of (1 - rho) over a sphere is 1/4, so slope 4000 gives 1000.
        let profile: Vec<f64> = faces
            .windows(2)
            .map(|w| {
                let (a, b) = (w[0], w[1]);
                // shell average of (1 - rho) weighted by rho^2
                let num = (b.powi(3) - a.powi(3)) / 3.0 - (b.powi(4) - a.powi(4)) / 4.0;
                c_surf + 4000.0 * num / ((b.powi(3) - a.powi(3)) / 3.0)
            })
            .collect();
        let c_avg = volume_average(&profile, &fractions);
        assert!((c_avg - c_surf - 1000.0).abs() < 1e-9);
        let sigma = surface_stress(c_avg, c_surf, &p, Electrode::Neg);
        assert!((sigma - 25.0e6).abs() < 1e-3, "{sigma}");
    }

    #[test]
    fn zero_amplitude_no_growth() {
        let p = ParameterSet::default();
        let s = DegradationState::fresh(&p);
        assert_eq!(crack_growth_step(&s, 0.0, &p), (0.0, 0.0));
    }

    #[test]
    fn growth_quadruples_when_stress_doubles() {
        let mut p = ParameterSet::default();
        p.degradation.m_cr = 2.0;
        let s = DegradationState::fresh(&p);
        let (a, _) = crack_growth_step(&s, 1.0e7, &p);
        let (b, _) = crack_growth_step(&s, 2.0e7, &p);
        assert!((b / a - 4.0).abs() < 1e-12);
    }

    #[test]
    fn sinusoidal_stress_counts_ten_cycles() {
        let p = ParameterSet::default();
        let s = DegradationState::fresh(&p);
        let amp = 1.0e7;
        let band = 0.01 * p.degradation.sigma_crit;
        let mut counter = StressCycleCounter::default();
        let mut total = 0.0;
        let mut half_cycles = 0;
        let per_cycle = 200;
        for i in 0..=10 * per_cycle {
            let t = i as f64 / per_cycle as f64;
            let sigma = amp * (2.0 * std::f64::consts::PI * t).sin();
            if let Some(hc) = counter.push(sigma, band) {
                half_cycles += 1;
                total += crack_growth_step(&s, hc.amplitude, &p).0;
            }
        }
        let expected = 10.0 * p.degradation.k_cr * amp.powf(p.degradation.m_cr);
        assert_eq!(half_cycles, 20);
        // The first half-cycle starts at zero rather than a trough.
        assert!((total - expected).abs() / expected < 0.05, "{total} vs {expected}");
    }

    #[test]
    fn jitter_inside_band_is_ignored() {
        let mut counter = StressCycleCounter::default();
        let band = 1.0e5;
        let mut count = 0;
        for i in 0..1000 {
            let sigma = 5.0e6 + if i % 2 == 0 { 2.0e4 } else { -2.0e4 };
            count += counter.push(sigma, band).is_some() as usize;
        }
        assert_eq!(count, 0);
    }

    #[test]
    fn lam_below_threshold_is_zero() {
        let p = ParameterSet::default();
        assert_eq!(lam_step(0.6, 0.5 * p.degradation.sigma_crit, &p, 1.0), 0.0);
    }

    #[test]
    fn lam_at_twice_threshold() {
        let mut p = ParameterSet::default();
        p.degradation.m_lam = 1.0;
        p.degradation.beta_lam = 1e-6;
        let d = lam_step(0.6, 2.0 * p.degradation.sigma_crit, &p, 1.0);
        assert!((d + 1e-6).abs() < 1e-18);
    }

    #[test]
    fn lam_clamps_at_zero() {
        let p = ParameterSet::default();
        assert_eq!(lam_step(0.0, 10.0 * p.degradation.sigma_crit, &p, 1.0), 0.0);
        let d = lam_step(1e-9, 10.0 * p.degradation.sigma_crit, &p, 1e6);
        assert_eq!(d, -1e-9);
    }
}
