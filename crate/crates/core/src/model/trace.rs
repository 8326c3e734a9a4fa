use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::cell::{Cell, SolverOptions};
use super::mesh::MeshSpec;
use crate::error::{Error, Result};
use crate::params::ParameterSet;
use crate::profiles::CurrentProfile;

/// Terminal response sampled once per profile sample.
///
/// Sample `i` is the state at the end of the `i`-th profile period, so its
/// time is `(i + 1) / sample_rate` past the start of the run.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct VoltageTrace {
    pub times: Vec<f64>,
    pub cell_voltage: Vec<f64>,
    pub pack_voltage: Vec<f64>,
    pub temperature: Vec<f64>,
    pub applied_current: Vec<f64>,
    pub n_series: u32,
    /// A voltage cutoff ended the run before the profile was exhausted.
    pub truncated: bool,
    /// Pack energy delivered, integral of V_pack I dt over accepted steps, Wh.
    pub energy_wh: f64,
}

impl VoltageTrace {
    pub fn new(n_series: u32) -> Self {
        Self {
            n_series,
            ..Self::default()
        }
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn push(&mut self, t: f64, current: f64, v_cell: f64, temperature: f64) {
        self.times.push(t);
        self.applied_current.push(current);
        self.cell_voltage.push(v_cell);
        self.pack_voltage.push(self.n_series as f64 * v_cell);
        self.temperature.push(temperature);
    }

    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["t_s", "i_a", "v_cell_v", "v_pack_v", "temp_k"])?;
        for i in 0..self.len() {
            w.write_record(&[
                self.times[i].to_string(),
                self.applied_current[i].to_string(),
                self.cell_voltage[i].to_string(),
                self.pack_voltage[i].to_string(),
                self.temperature[i].to_string(),
            ])?;
        }
        w.flush().map_err(|e| Error::io("<trace>", e))?;
        Ok(())
    }

    pub fn save_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
        self.write_csv(std::io::BufWriter::new(file))
    }

    /// Read a trace written by [`VoltageTrace::write_csv`]. The pack size is
    /// inferred from the first row with a nonzero cell voltage.
    pub fn from_csv_reader<R: std::io::Read>(input: R) -> Result<Self> {
        let mut r = csv::Reader::from_reader(input);
        let mut trace = Self::new(1);
        for (row, rec) in r.records().enumerate() {
            let rec = rec?;
            if rec.len() != 5 {
                return Err(Error::Parse {
                    row: row + 2,
                    reason: format!("expected 5 columns, found {}", rec.len()),
                });
            }
            let mut vals = [0.0; 5];
            for (k, v) in vals.iter_mut().enumerate() {
                *v = rec[k].trim().parse().map_err(|_| Error::Parse {
                    row: row + 2,
                    reason: format!("not a number: {:?}", &rec[k]),
                })?;
            }
            trace.times.push(vals[0]);
            trace.applied_current.push(vals[1]);
            trace.cell_voltage.push(vals[2]);
            trace.pack_voltage.push(vals[3]);
            trace.temperature.push(vals[4]);
        }
        if let Some(i) = trace.cell_voltage.iter().position(|v| *v != 0.0) {
            trace.n_series = (trace.pack_voltage[i] / trace.cell_voltage[i]).round().max(1.0) as u32;
        }
        Ok(trace)
    }

    pub fn load_csv(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
        Self::from_csv_reader(std::io::BufReader::new(file))
    }
}

/// Options for a standalone simulation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SimOptions {
    pub mesh: MeshSpec,
    pub solver: SolverOptions,
    pub initial_soc: f64,
}

impl Default for SimOptions {
    fn default() -> Self {
        Self {
            mesh: MeshSpec::default(),
            solver: SolverOptions::default(),
            initial_soc: 1.0,
        }
    }
}

/// Simulate a profile from rest at `options.initial_soc`.
pub fn simulate(params: &ParameterSet, profile: &CurrentProfile, options: &SimOptions) -> Result<VoltageTrace> {
    let mut cell = Cell::new(params.clone(), options.mesh, options.solver.clone(), options.initial_soc)?;
    run_profile(&mut cell, profile)
}

/// Drive an existing cell through a profile, holding each sample over one period.
pub fn run_profile(cell: &mut Cell, profile: &CurrentProfile) -> Result<VoltageTrace> {
    if profile.samples.is_empty() {
        return Err(Error::input("profile has no samples"));
    }
    let period = 1.0 / profile.sample_rate;
    let start = cell.state.time;
    let mut trace = VoltageTrace::new(cell.params.n_series);
    let mut energy = 0.0;
    cell.reset_step_hint();
    for (i, &current) in profile.samples.iter().enumerate() {
        let completed = cell.advance(current, period, &mut energy)?;
        trace.push(
            start + (i + 1) as f64 * period,
            current,
            cell.state.v_cell,
            cell.state.temperature,
        );
        if !completed {
            trace.truncated = true;
            break;
        }
    }
    trace.energy_wh = energy;
    Ok(trace)
}
