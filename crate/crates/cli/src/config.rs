use std::path::{Path, PathBuf};

use flightcell::assessment::RechargePolicy;
use flightcell::model::{MeshSpec, SolverOptions};
use flightcell::profiles::{Stitch, ThresholdConfig};
use flightcell::DegradationToggles;
use serde::{Deserialize, Serialize};

use crate::failure::CliError;

/// Everything a run needs. Every field has a default, so an empty file (or
/// no file at all) is a valid configuration.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    /// Parameter JSON; built-in defaults when absent.
    pub parameters: Option<PathBuf>,
    pub output_dir: Option<PathBuf>,
    pub seed: Option<u64>,
    pub mesh: Option<MeshSpec>,
    pub solver: Option<SolverOptions>,
    pub extract: ExtractConfig,
    pub calibrate: CalibrateConfig,
    pub replay: ReplayConfig,
    pub assess: AssessConfig,
    pub report: ReportConfig,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExtractConfig {
    /// Flight log CSV with `t_s,i_a` columns.
    pub log: Option<PathBuf>,
    /// JSON label intervals; threshold segmentation when absent.
    pub labels: Option<PathBuf>,
    /// Replace `log` and `labels` with the bundled synthetic log.
    pub synthetic: bool,
    pub nominal_rate: Option<f64>,
    pub max_jitter: f64,
    pub sensor_range: f64,
    /// Moving-average window, samples.
    pub window: usize,
    pub threshold: ThresholdConfig,
    pub target_duration_s: f64,
    pub stitch: Stitch,
    /// Pack voltage used for the energy estimate in the stats file.
    pub nominal_pack_voltage: Option<f64>,
}

impl Default for ExtractConfig {
    fn default() -> Self {
        Self {
            log: None,
            labels: None,
            synthetic: false,
            nominal_rate: None,
            max_jitter: 0.1,
            sensor_range: 100.0,
            window: 10,
            threshold: ThresholdConfig::default(),
            target_duration_s: 240.0,
            stitch: Stitch::default(),
            nominal_pack_voltage: None,
        }
    }
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CalibrateConfig {
    /// Calibration problem JSON.
    pub problem: Option<PathBuf>,
    pub budget: Option<usize>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ReplayConfig {
    pub profile: Option<PathBuf>,
    pub tag: Option<String>,
    pub repetitions: usize,
    /// Also write the voltage trace of every cycle.
    pub traces: bool,
}

impl Default for ReplayConfig {
    fn default() -> Self {
        Self {
            profile: None,
            tag: None,
            repetitions: 20,
            traces: false,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AssessConfig {
    /// Motion profile CSVs. When empty, every profile in `profile_dir` is used.
    pub profiles: Vec<PathBuf>,
    /// Defaults to `<output_dir>/profiles`, where `extract` writes.
    pub profile_dir: Option<PathBuf>,
    /// Constant-current baselines, A.
    pub baseline_currents: Vec<f64>,
    /// Constant-current baselines as C-rates of the rated capacity; used
    /// instead of `baseline_currents` when non-empty.
    pub baseline_c_rates: Vec<f64>,
    pub baseline_duration_s: f64,
    pub baseline_sample_rate: f64,
    pub repetitions: usize,
    pub recharge: RechargePolicy,
    pub capacity_check_c_rate: f64,
    /// Overrides the degradation toggles of the parameter set.
    pub toggles: Option<DegradationToggles>,
}

impl Default for AssessConfig {
    fn default() -> Self {
        Self {
            profiles: Vec::new(),
            profile_dir: None,
            baseline_currents: vec![16.0, 18.0, 20.0, 22.0],
            baseline_c_rates: Vec::new(),
            baseline_duration_s: 240.0,
            baseline_sample_rate: 10.0,
            repetitions: 20,
            recharge: RechargePolicy::default(),
            capacity_check_c_rate: 0.2,
            toggles: None,
        }
    }
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ReportConfig {
    /// Health reports JSON written by `assess` or `replay`.
    pub reports: Option<PathBuf>,
}

impl RunConfig {
    /// Load a TOML config. Relative paths inside it resolve against the
    /// directory holding the file.
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
        let mut cfg: RunConfig = toml::from_str(&text)
            .map_err(|e| CliError::config(format!("{}: {}", path.display(), e.message())))?;
        let base = path.parent().unwrap_or(Path::new(""));
        cfg.rebase(base);
        Ok(cfg)
    }

    fn rebase(&mut self, base: &Path) {
        let fix = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        };
        let opt = |p: &mut Option<PathBuf>| {
            if let Some(p) = p {
                fix(p)
            }
        };
        opt(&mut self.parameters);
        opt(&mut self.output_dir);
        opt(&mut self.extract.log);
        opt(&mut self.extract.labels);
        opt(&mut self.calibrate.problem);
        opt(&mut self.replay.profile);
        opt(&mut self.assess.profile_dir);
        opt(&mut self.report.reports);
        self.assess.profiles.iter_mut().for_each(fix);
    }

    pub fn output_dir(&self) -> PathBuf {
        self.output_dir.clone().unwrap_or_else(|| PathBuf::from("out"))
    }
}
