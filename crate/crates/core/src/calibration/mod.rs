//! Parameter estimation from voltage-current data with a switching portfolio
//! of population metaheuristics, plus reference-performance-test protocols.

mod optimizers;
mod problem;
mod rpt;

pub use optimizers::{
    switch_strategy, window_improvement, Archive, Cmaes, DifferentialEvolution, OptimizerId, ParticleSwarm,
};
pub use problem::{
    calibrate, evaluate, CalibrationProblem, CalibrationResult, Dataset, DatasetSpec, FreeParameter,
    OptimizerSettings, ProblemDocument, StopReason, VoltageKind,
};
pub use rpt::{generate_rpt, PulseSchedule, RptKind};

use crate::error::{Error, Result};
use crate::model::VoltageTrace;

fn check_times(a: &VoltageTrace, b: &VoltageTrace, n: usize) -> Result<()> {
    for i in 0..n {
        let (ta, tb) = (a.times[i], b.times[i]);
        if (ta - tb).abs() > 1e-9 * ta.abs().max(tb.abs()).max(1.0) {
            return Err(Error::input(format!("timestamps differ at sample {i}: {ta} vs {tb}")));
        }
    }
    Ok(())
}

/// Root-mean-square difference of the pack voltages of two traces with
/// identical sample times.
pub fn rmse(measured: &VoltageTrace, simulated: &VoltageTrace) -> Result<f64> {
    let n = measured.len();
    if n == 0 || simulated.len() != n {
        return Err(Error::input(format!(
            "trace lengths differ or are empty: {} vs {}",
            n,
            simulated.len()
        )));
    }
    check_times(measured, simulated, n)?;
    let ss: f64 = measured
        .pack_voltage
        .iter()
        .zip(&simulated.pack_voltage)
        .map(|(a, b)| (a - b) * (a - b))
        .sum();
    Ok((ss / n as f64).sqrt())
}

/// As [`rmse`], but a simulation that ended early at a cutoff is extended
/// with `pad_pack_voltage`. Returns the error and whether padding was needed.
pub fn rmse_padded(measured: &VoltageTrace, simulated: &VoltageTrace, pad_pack_voltage: f64) -> Result<(f64, bool)> {
    let n = measured.len();
    let m = simulated.len();
    if n == 0 || m > n || (m < n && !simulated.truncated) {
        return Err(Error::input(format!(
            "simulated trace of {m} samples cannot be compared with {n} measured samples"
        )));
    }
    check_times(measured, simulated, m)?;
    let mut ss = 0.0;
    for i in 0..n {
        let sim = if i < m { simulated.pack_voltage[i] } else { pad_pack_voltage };
        let r = measured.pack_voltage[i] - sim;
        ss += r * r;
    }
    Ok(((ss / n as f64).sqrt(), m < n))
}
