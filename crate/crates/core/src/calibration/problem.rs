use std::collections::BTreeMap;
use std::io::Write;
use std::path::{Path, PathBuf};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::optimizers::{switch_strategy, Archive, Cmaes, DifferentialEvolution, OptimizerId, ParticleSwarm};
use super::rmse_padded;
use crate::error::{Error, Result};
use crate::model::{simulate, SimOptions, VoltageTrace};
use crate::params::ParameterSet;
use crate::profiles::{read_profile, CurrentProfile};

/// Score given to candidates whose simulation fails, V.
const FAILURE_PENALTY: f64 = 1.0e3;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum VoltageKind {
    /// Measured voltages are whole-pack voltages.
    #[default]
    Pack,
    /// Measured voltages are per-cell and are scaled to the pack.
    Cell,
}

#[derive(Debug, Clone)]
pub struct Dataset {
    pub name: String,
    pub profile: CurrentProfile,
    /// Pack voltages after any cell-to-pack scaling.
    pub measured: VoltageTrace,
    pub weight: f64,
    pub options: SimOptions,
}

impl Dataset {
    /// Build a dataset, scaling per-cell measurements to pack voltages.
    pub fn new(
        name: impl Into<String>,
        profile: CurrentProfile,
        mut measured: VoltageTrace,
        kind: VoltageKind,
        n_series: u32,
        weight: f64,
        options: SimOptions,
    ) -> Result<Self> {
        let name = name.into();
        if kind == VoltageKind::Cell {
            measured.n_series = n_series;
            measured.pack_voltage = measured.cell_voltage.iter().map(|v| n_series as f64 * v).collect();
        }
        if !(weight > 0.0) {
            return Err(Error::input(format!("dataset {name}: weight must be positive")));
        }
        // a measured test that stopped at a cutoff covers only a prefix
        let profile = if measured.len() < profile.len() && !measured.is_empty() {
            profile.slice(0, measured.len(), profile.label)
        } else {
            profile
        };
        if measured.len() != profile.len() {
            return Err(Error::input(format!(
                "dataset {name}: {} measured samples for a {}-sample profile",
                measured.len(),
                profile.len()
            )));
        }
        for (i, &t) in measured.times.iter().enumerate() {
            let expected = (i + 1) as f64 / profile.sample_rate;
            if (t - expected).abs() > 1e-6 * expected.max(1.0) {
                return Err(Error::input(format!(
                    "dataset {name}: sample {i} at {t} s, profile expects {expected} s"
                )));
            }
        }
        Ok(Self {
            name,
            profile,
            measured,
            weight,
            options,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FreeParameter {
    pub key: String,
    pub lower: f64,
    pub upper: f64,
    /// Search on a log scale. By default, bounds spanning a factor of ten or
    /// more are searched logarithmically.
    #[serde(default)]
    pub log_scale: Option<bool>,
}

impl FreeParameter {
    fn is_log(&self) -> bool {
        self.log_scale.unwrap_or(self.lower > 0.0 && self.upper / self.lower >= 10.0)
    }

    pub fn from_unit(&self, u: f64) -> f64 {
        let u = u.clamp(0.0, 1.0);
        let v = if self.is_log() {
            (self.lower.ln() + u * (self.upper.ln() - self.lower.ln())).exp()
        } else {
            self.lower + u * (self.upper - self.lower)
        };
        v.clamp(self.lower, self.upper)
    }

    pub fn to_unit(&self, v: f64) -> f64 {
        if self.is_log() {
            (v.ln() - self.lower.ln()) / (self.upper.ln() - self.lower.ln())
        } else {
            (v - self.lower) / (self.upper - self.lower)
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct OptimizerSettings {
    pub population: usize,
    /// Generations over which the incumbent must improve.
    pub switch_window: usize,
    /// Relative improvement below which the incumbent is replaced.
    pub switch_delta: f64,
    pub stagnation_generations: usize,
    pub stagnation_tol: f64,
    pub portfolio: Vec<OptimizerId>,
}

impl Default for OptimizerSettings {
    fn default() -> Self {
        Self {
            population: 32,
            switch_window: 5,
            switch_delta: 1e-3,
            stagnation_generations: 20,
            stagnation_tol: 1e-5,
            portfolio: OptimizerId::PORTFOLIO.to_vec(),
        }
    }
}

#[derive(Debug, Clone)]
pub struct CalibrationProblem {
    pub datasets: Vec<Dataset>,
    pub free_parameters: Vec<FreeParameter>,
    /// Values of every parameter not being estimated.
    pub fixed_parameters: ParameterSet,
    pub budget: usize,
    pub seed: u64,
    pub settings: OptimizerSettings,
}

impl CalibrationProblem {
    pub fn validate(&self) -> Result<()> {
        if self.datasets.is_empty() {
            return Err(Error::Calibration("no datasets".into()));
        }
        if self.free_parameters.is_empty() {
            return Err(Error::Calibration("no free parameters".into()));
        }
        for f in &self.free_parameters {
            self.fixed_parameters.get(&f.key)?;
            if !(f.lower.is_finite() && f.upper.is_finite() && f.lower < f.upper) {
                return Err(Error::InvalidParameter {
                    name: f.key.clone(),
                    reason: format!("bounds [{}, {}] are not a finite interval", f.lower, f.upper),
                });
            }
            if f.is_log() && f.lower <= 0.0 {
                return Err(Error::InvalidParameter {
                    name: f.key.clone(),
                    reason: "log-scaled bounds must be positive".into(),
                });
            }
        }
        if self.settings.population < 4 {
            return Err(Error::Calibration("population must be at least 4".into()));
        }
        if self.budget < self.settings.population {
            return Err(Error::Calibration(format!(
                "budget {} is smaller than the population {}",
                self.budget, self.settings.population
            )));
        }
        if self.settings.portfolio.is_empty() {
            return Err(Error::Calibration("empty optimizer portfolio".into()));
        }
        Ok(())
    }

    /// Parameter set for a point of the unit hypercube.
    pub fn parameters_at(&self, unit: &[f64]) -> Result<ParameterSet> {
        let mut p = self.fixed_parameters.clone();
        for (f, &u) in self.free_parameters.iter().zip(unit) {
            p.set(&f.key, f.from_unit(u))?;
        }
        Ok(p)
    }
}

/// Weighted RMS of per-dataset RMSEs, and the per-dataset values.
pub fn evaluate(params: &ParameterSet, datasets: &[Dataset]) -> Result<(f64, Vec<f64>)> {
    params.validate()?;
    let mut per = Vec::with_capacity(datasets.len());
    let mut num = 0.0;
    let mut den = 0.0;
    for d in datasets {
        let sim = simulate(params, &d.profile, &d.options)?;
        let pad = d.options.solver.v_min * params.n_series as f64;
        let (e, _) = rmse_padded(&d.measured, &sim, pad)?;
        num += d.weight * e * e;
        den += d.weight;
        per.push(e);
    }
    Ok(((num / den).sqrt(), per))
}

fn score(problem: &CalibrationProblem, unit: &[f64]) -> f64 {
    match problem.parameters_at(unit).and_then(|p| evaluate(&p, &problem.datasets)) {
        Ok((v, _)) if v.is_finite() => v,
        _ => FAILURE_PENALTY,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StopReason {
    Budget,
    Stagnation,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CalibrationResult {
    pub best_parameters: ParameterSet,
    /// Estimated values of the free parameters.
    pub estimates: BTreeMap<String, f64>,
    /// V.
    pub best_rmse: f64,
    pub per_dataset_rmse: BTreeMap<String, f64>,
    pub evaluation_count: usize,
    /// (evaluation index from 1, best-so-far RMSE after it).
    pub convergence_history: Vec<(usize, f64)>,
    /// Optimizer that ran each generation after the initial sample.
    pub optimizer_trace: Vec<OptimizerId>,
    pub stopped_by: StopReason,
    pub seed: u64,
}

impl CalibrationResult {
    pub fn write_history_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["evaluation", "best_rmse_v"])?;
        for (i, v) in &self.convergence_history {
            w.write_record([i.to_string(), v.to_string()])?;
        }
        w.flush().map_err(|e| Error::io("<history>", e))?;
        Ok(())
    }

    pub fn save(&self, json_path: impl AsRef<Path>, history_path: impl AsRef<Path>) -> Result<()> {
        let jp = json_path.as_ref();
        std::fs::write(jp, serde_json::to_string_pretty(self)? + "\n").map_err(|e| Error::io(jp, e))?;
        let hp = history_path.as_ref();
        let file = std::fs::File::create(hp).map_err(|e| Error::io(hp, e))?;
        self.write_history_csv(std::io::BufWriter::new(file))
    }
}

/// Minimize the weighted RMSE over the free parameters.
pub fn calibrate(problem: &CalibrationProblem) -> Result<CalibrationResult> {
    problem.validate()?;
    let s = &problem.settings;
    let dim = problem.free_parameters.len();
    let pop = s.population;
    let mut rng = ChaCha8Rng::seed_from_u64(problem.seed);

    // Latin hypercube initial sample.
    let mut points = vec![vec![0.0; dim]; pop];
    for k in 0..dim {
        let mut strata: Vec<usize> = (0..pop).collect();
        for i in (1..pop).rev() {
            let j = rng.random_range(0..=i);
            strata.swap(i, j);
        }
        for i in 0..pop {
            points[i][k] = (strata[i] as f64 + rng.random::<f64>()) / pop as f64;
        }
    }
    let values = evaluate_all(problem, &points)?;
    let mut history = Vec::with_capacity(problem.budget);
    let mut best = f64::INFINITY;
    for v in &values {
        best = best.min(*v);
        history.push((history.len() + 1, best));
    }
    let mut archive = Archive { points, values };

    let mut de = DifferentialEvolution::default();
    let mut pso = ParticleSwarm::default();
    let mut cma = Cmaes::default();
    let mut active = 0usize;
    let mut since_switch = vec![best];
    let mut generation_bests = vec![best];
    let mut trace = Vec::new();
    let mut stopped_by = StopReason::Budget;

    while history.len() < problem.budget {
        let count = pop.min(problem.budget - history.len());
        let id = s.portfolio[active];
        let candidates = match id {
            OptimizerId::DifferentialEvolution => de.propose(&archive, count, &mut rng),
            OptimizerId::ParticleSwarm => pso.propose(&archive, count, &mut rng),
            OptimizerId::Cmaes => cma.propose(&archive, count, &mut rng),
        };
        let vals = evaluate_all(problem, &candidates)?;
        if id == OptimizerId::Cmaes {
            cma.update(&vals);
        }
        for (i, (c, v)) in candidates.into_iter().zip(vals).enumerate() {
            best = best.min(v);
            history.push((history.len() + 1, best));
            if v < archive.values[i] {
                archive.points[i] = c;
                archive.values[i] = v;
            }
        }
        trace.push(id);
        generation_bests.push(best);
        since_switch.push(best);

        let g = s.stagnation_generations;
        if generation_bests.len() > g {
            let old = generation_bests[generation_bests.len() - 1 - g];
            if old - best <= s.stagnation_tol * old.abs() {
                stopped_by = StopReason::Stagnation;
                break;
            }
        }
        let next = switch_strategy(active, s.portfolio.len(), &since_switch, s.switch_window, s.switch_delta);
        if next != active {
            active = next;
            since_switch = vec![best];
            if s.portfolio[active] == OptimizerId::Cmaes {
                cma.activate(&archive);
            }
        }
    }

    let b = archive.best();
    let best_parameters = problem.parameters_at(&archive.points[b])?;
    let per_dataset_rmse = match evaluate(&best_parameters, &problem.datasets) {
        Ok((_, per)) => problem.datasets.iter().map(|d| d.name.clone()).zip(per).collect(),
        Err(_) => BTreeMap::new(),
    };
    let estimates = problem
        .free_parameters
        .iter()
        .map(|f| Ok((f.key.clone(), best_parameters.get(&f.key)?)))
        .collect::<Result<_>>()?;
    Ok(CalibrationResult {
        best_parameters,
        estimates,
        best_rmse: archive.values[b],
        per_dataset_rmse,
        evaluation_count: history.len(),
        convergence_history: history,
        optimizer_trace: trace,
        stopped_by,
        seed: problem.seed,
    })
}

fn evaluate_all(problem: &CalibrationProblem, points: &[Vec<f64>]) -> Result<Vec<f64>> {
    let values: Vec<f64> = points.par_iter().map(|u| score(problem, u)).collect();
    if values.iter().all(|&v| v >= FAILURE_PENALTY) {
        return Err(Error::Calibration(format!(
            "all {} candidates of a generation failed to simulate",
            values.len()
        )));
    }
    Ok(values)
}

/// On-disk form of a dataset: profile CSV (with optional sidecar) and a
/// measured trace CSV in the `t_s,i_a,v_cell_v,v_pack_v,temp_k` schema.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetSpec {
    pub name: String,
    pub profile: PathBuf,
    pub trace: PathBuf,
    #[serde(default = "one")]
    pub weight: f64,
    #[serde(default)]
    pub voltage: VoltageKind,
    #[serde(default)]
    pub options: SimOptions,
}

fn one() -> f64 {
    1.0
}

/// JSON form of a calibration problem. Relative paths resolve against the
/// directory holding the document.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProblemDocument {
    pub datasets: Vec<DatasetSpec>,
    pub free_parameters: Vec<FreeParameter>,
    /// Parameter file supplying the fixed values; defaults when absent.
    #[serde(default)]
    pub base_parameters: Option<PathBuf>,
    /// Individual fixed values overriding the base file.
    #[serde(default)]
    pub fixed_parameters: BTreeMap<String, f64>,
    pub budget: usize,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub settings: OptimizerSettings,
}

impl ProblemDocument {
    pub fn load(path: impl AsRef<Path>) -> Result<(Self, PathBuf)> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let doc: Self = serde_json::from_str(&text)?;
        let base = path.parent().map(Path::to_path_buf).unwrap_or_default();
        Ok((doc, base))
    }

    pub fn resolve(&self, base_dir: &Path) -> Result<CalibrationProblem> {
        let at = |p: &Path| if p.is_absolute() { p.to_path_buf() } else { base_dir.join(p) };
        let mut fixed = match &self.base_parameters {
            Some(p) => ParameterSet::load(at(p))?,
            None => ParameterSet::default(),
        };
        for (k, v) in &self.fixed_parameters {
            fixed.set(k, *v)?;
        }
        let datasets = self
            .datasets
            .iter()
            .map(|d| {
                let pp = at(&d.profile);
                let tp = at(&d.trace);
                for p in [&pp, &tp] {
                    if !p.exists() {
                        return Err(Error::io(
                            p.clone(),
                            std::io::Error::new(std::io::ErrorKind::NotFound, "dataset file not found"),
                        ));
                    }
                }
                let profile = read_profile(&pp)?;
                let trace = VoltageTrace::load_csv(&tp)?;
                Dataset::new(&d.name, profile, trace, d.voltage, fixed.n_series, d.weight, d.options.clone())
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(CalibrationProblem {
            datasets,
            free_parameters: self.free_parameters.clone(),
            fixed_parameters: fixed,
            budget: self.budget,
            seed: self.seed,
            settings: self.settings.clone(),
        })
    }
}
