use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::degradation::{compute_lam, compute_lli};
use crate::error::{Error, Result};
use crate::model::{run_profile, Cell, MeshSpec, SolverOptions};
use crate::params::{DegradationToggles, Electrode, ParameterSet};
use crate::profiles::{CurrentProfile, MotionTag};

/// How the cell returns to its starting state between repetitions.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum RechargePolicy {
    /// Constant current to the upper cutoff, then constant voltage until the
    /// current tapers below `taper_c_rate`. Degradation stays active.
    CcCv { c_rate: f64, taper_c_rate: f64 },
    /// Reset concentrations, potentials and temperature to rest at the
    /// initial state of charge; degradation state is kept.
    Teleport,
}

impl Default for RechargePolicy {
    fn default() -> Self {
        RechargePolicy::CcCv {
            c_rate: 1.0,
            taper_c_rate: 0.05,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ReplayOptions {
    pub repetitions: usize,
    pub recharge: RechargePolicy,
    pub mesh: MeshSpec,
    pub solver: SolverOptions,
    pub initial_soc: f64,
    /// C-rate of the capacity check discharge; zero skips the check.
    pub capacity_check_c_rate: f64,
    /// Step used while holding constant voltage, s.
    pub cv_step: f64,
}

impl Default for ReplayOptions {
    fn default() -> Self {
        Self {
            repetitions: 20,
            recharge: RechargePolicy::default(),
            mesh: MeshSpec::default(),
            solver: SolverOptions::default(),
            initial_soc: 1.0,
            capacity_check_c_rate: 0.2,
            cv_step: 10.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TemperatureStats {
    pub min_k: f64,
    pub max_k: f64,
    pub mean_k: f64,
    pub final_k: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HealthReport {
    /// Row name, e.g. `hover` or `cc_16A`.
    pub tag: String,
    pub motion: MotionTag,
    pub cycles: usize,
    /// Repetitions cut short by the lower voltage cutoff.
    pub truncated_cycles: usize,
    /// Discharged charge over all repetitions, Ah.
    pub charge_throughput: f64,
    /// Integral of pack voltage times current over the discharges, Wh.
    pub energy_consumed: f64,
    pub lli: f64,
    pub lam_n: f64,
    pub lam_p: f64,
    /// Ah-equivalent lithium consumed by each side reaction.
    pub loss_sei_nominal: f64,
    pub loss_sei_crack: f64,
    pub loss_plating: f64,
    pub capacity_fade: f64,
    /// Cyclable lithium at the start, Ah.
    pub initial_inventory_ah: f64,
    pub crack_area: f64,
    pub stress_half_cycles: u64,
    pub temperature: TemperatureStats,
}

impl HealthReport {
    /// `lli * inventory - sum of losses`, relative to the larger side.
    pub fn additivity_error(&self) -> f64 {
        let total = self.loss_sei_nominal + self.loss_sei_crack + self.loss_plating;
        let lhs = self.lli * self.initial_inventory_ah;
        if total == 0.0 && lhs == 0.0 {
            0.0
        } else {
            (lhs - total).abs() / lhs.abs().max(total.abs())
        }
    }
}

fn recharge(cell: &mut Cell, policy: RechargePolicy, options: &ReplayOptions) -> Result<()> {
    match policy {
        RechargePolicy::Teleport => {
            cell.set_equilibrium(options.initial_soc)?;
            cell.state.temperature = cell.params.t_amb;
            cell.reset_step_hint();
            Ok(())
        }
        RechargePolicy::CcCv { c_rate, taper_c_rate } => {
            let q = cell.params.q_rated;
            let current = -c_rate * q;
            let mut energy = 0.0;
            cell.reset_step_hint();
            // Constant-current phase, bounded at twice the nominal duration.
            let chunk = 60.0;
            let mut elapsed = 0.0;
            let limit = 2.0 * 3600.0 / c_rate;
            while cell.state.v_cell < cell.options.v_max {
                if !cell.advance(current, chunk, &mut energy)? {
                    break;
                }
                elapsed += chunk;
                if elapsed > limit {
                    return Err(Error::Simulation {
                        time: cell.state.time,
                        reason: "constant-current charge never reached the upper cutoff".into(),
                    });
                }
            }
            let v_max = cell.options.v_max;
            cell.hold_voltage(v_max, taper_c_rate * q, 4.0 * 3600.0, options.cv_step, &mut energy)?;
            cell.reset_step_hint();
            Ok(())
        }
    }
}

/// Dischargeable capacity (Ah) at `c_rate` from rest at full charge, with
/// degradation frozen. The cell itself is not modified.
pub fn capacity_check(cell: &Cell, c_rate: f64) -> Result<f64> {
    let mut probe = cell.clone();
    probe.params.degradation.toggles = DegradationToggles::all_off();
    probe.set_equilibrium(1.0)?;
    probe.state.temperature = probe.params.t_amb;
    probe.reset_step_hint();
    let current = c_rate * probe.params.q_rated;
    let mut energy = 0.0;
    let start = probe.state.time;
    let limit = 3.0 * 3600.0 / c_rate;
    while probe.advance(current, 60.0, &mut energy)? {
        if probe.state.time - start > limit {
            break;
        }
    }
    Ok((probe.state.time - start) * current / 3600.0)
}

/// Replay a profile `repetitions` times, recharging in between.
pub fn replay(params: &ParameterSet, profile: &CurrentProfile, tag: &str, options: &ReplayOptions) -> Result<HealthReport> {
    replay_with_traces(params, profile, tag, options, &mut |_, _| {})
}

/// As [`replay`], handing each cycle's discharge trace to `observe`.
pub fn replay_with_traces(
    params: &ParameterSet,
    profile: &CurrentProfile,
    tag: &str,
    options: &ReplayOptions,
    observe: &mut dyn FnMut(usize, &crate::model::VoltageTrace),
) -> Result<HealthReport> {
    if profile.is_empty() {
        return Err(Error::input("profile has no samples"));
    }
    let mut cell = Cell::new(params.clone(), options.mesh, options.solver.clone(), options.initial_soc)?;
    if let RechargePolicy::CcCv { .. } = options.recharge {
        // Top up to the charge cutoff so every repetition starts from the
        // state the recharge returns to; not counted as ageing.
        let toggles = cell.params.degradation.toggles;
        cell.params.degradation.toggles = DegradationToggles::all_off();
        recharge(&mut cell, options.recharge, options)?;
        cell.params.degradation.toggles = toggles;
    }
    let fresh_capacity = if options.capacity_check_c_rate > 0.0 && options.repetitions > 0 {
        Some(capacity_check(&cell, options.capacity_check_c_rate)?)
    } else {
        None
    };
    let period = profile.period();
    let mut throughput = 0.0;
    let mut energy = 0.0;
    let mut truncated = 0;
    let t_amb = cell.state.temperature;
    let mut temps = TemperatureStats {
        min_k: t_amb,
        max_k: t_amb,
        mean_k: t_amb,
        final_k: t_amb,
    };
    let mut t_sum = 0.0;
    let mut t_count = 0usize;
    for cycle in 0..options.repetitions {
        let trace = run_profile(&mut cell, profile).map_err(|e| Error::Simulation {
            time: cell.state.time,
            reason: format!("cycle {cycle}: {e}"),
        })?;
        observe(cycle, &trace);
        throughput += trace.applied_current.iter().sum::<f64>() * period / 3600.0;
        energy += trace.energy_wh;
        truncated += trace.truncated as usize;
        for &t in &trace.temperature {
            temps.min_k = temps.min_k.min(t);
            temps.max_k = temps.max_k.max(t);
            t_sum += t;
            t_count += 1;
        }
        recharge(&mut cell, options.recharge, options).map_err(|e| Error::Simulation {
            time: cell.state.time,
            reason: format!("recharge after cycle {cycle}: {e}"),
        })?;
    }
    if t_count > 0 {
        temps.mean_k = t_sum / t_count as f64;
    }
    temps.final_k = cell.state.temperature;

    let capacity_fade = match fresh_capacity {
        Some(fresh) => {
            let aged = capacity_check(&cell, options.capacity_check_c_rate)?;
            ((fresh - aged) / fresh).max(0.0)
        }
        None => 0.0,
    };
    let d = &cell.state.degradation;
    let inventory = params.initial_inventory_mol();
    let lam = compute_lam(d, params.eps_am(Electrode::Pos), params.eps_am(Electrode::Neg));
    Ok(HealthReport {
        tag: tag.to_string(),
        motion: profile.label.unwrap_or(MotionTag::Other),
        cycles: options.repetitions,
        truncated_cycles: truncated,
        charge_throughput: throughput,
        energy_consumed: energy,
        lli: compute_lli(d, inventory),
        lam_n: lam.neg,
        lam_p: lam.pos,
        loss_sei_nominal: params.mol_to_ah(d.li_lost_sei_nom),
        loss_sei_crack: params.mol_to_ah(d.li_lost_sei_crack),
        loss_plating: params.mol_to_ah(d.li_lost_plating),
        capacity_fade,
        initial_inventory_ah: params.mol_to_ah(inventory),
        crack_area: d.a_crack,
        stress_half_cycles: d.n_half_cycles,
        temperature: temps,
    })
}

/// Replay several profiles concurrently; results keep the input order.
pub fn replay_many(
    params: &ParameterSet,
    jobs: &[(String, CurrentProfile)],
    options: &ReplayOptions,
) -> Result<Vec<HealthReport>> {
    jobs.par_iter()
        .map(|(tag, profile)| replay(params, profile, tag, options))
        .collect()
}
