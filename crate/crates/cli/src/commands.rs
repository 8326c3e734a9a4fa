use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use flightcell::assessment::{
    fit_baselines, motion_report, plot_data, replay_many, replay_with_traces, HealthReport, Metric, ReplayOptions,
};
use flightcell::calibration::{calibrate as run_calibration, ProblemDocument};
use flightcell::profiles::{
    constant_current, load_labels, moving_average, parse_log, periodic_reconstruct, profile_stats, read_profile,
    save_labels, segment, synthetic_flight_log, write_profile, CurrentProfile, MotionTag, ParseOptions, ProfileStats,
    SegmentLabel, SegmentMode,
};
use flightcell::ParameterSet;
use serde::{Deserialize, Serialize};

use crate::config::RunConfig;
use crate::failure::CliError;

/// Seed of the bundled synthetic flight log when none is given.
const SYNTHETIC_SEED: u64 = 1;

fn create_dir(path: &Path) -> Result<(), CliError> {
    std::fs::create_dir_all(path).map_err(|e| CliError::io(path, e))
}

fn write_text(path: &Path, text: &str) -> Result<(), CliError> {
    std::fs::write(path, text).map_err(|e| CliError::io(path, e))
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<(), CliError> {
    let text = serde_json::to_string_pretty(value).map_err(flightcell::Error::from)?;
    write_text(path, &(text + "\n"))
}

fn require_exists(path: &Path) -> Result<(), CliError> {
    if path.exists() {
        Ok(())
    } else {
        Err(CliError::io(
            path,
            std::io::Error::new(std::io::ErrorKind::NotFound, "no such file or directory"),
        ))
    }
}

fn load_params(cfg: &RunConfig) -> Result<ParameterSet, CliError> {
    match &cfg.parameters {
        Some(p) => {
            require_exists(p)?;
            Ok(ParameterSet::load(p)?)
        }
        None => Ok(ParameterSet::default()),
    }
}

fn replay_options(cfg: &RunConfig, repetitions: usize) -> ReplayOptions {
    let mut o = ReplayOptions {
        repetitions,
        ..ReplayOptions::default()
    };
    if let Some(m) = &cfg.mesh {
        o.mesh = m.clone();
    }
    if let Some(s) = &cfg.solver {
        o.solver = s.clone();
    }
    o
}

fn tag_for(profile: &CurrentProfile, path: &Path) -> String {
    match profile.label {
        Some(tag) => tag.to_string(),
        None => path.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default(),
    }
}

pub fn calibrate(cfg: &RunConfig) -> Result<(), CliError> {
    let path = cfg
        .calibrate
        .problem
        .as_ref()
        .ok_or_else(|| CliError::config("calibrate needs a problem file (--problem or [calibrate].problem)"))?;
    require_exists(path)?;
    let (mut doc, base) = ProblemDocument::load(path)?;
    if doc.base_parameters.is_none() {
        doc.base_parameters = cfg.parameters.clone();
    }
    if let Some(seed) = cfg.seed {
        doc.seed = seed;
    }
    if let Some(b) = cfg.calibrate.budget {
        doc.budget = b;
    }
    for d in &mut doc.datasets {
        if let Some(m) = &cfg.mesh {
            d.options.mesh = m.clone();
        }
        if let Some(s) = &cfg.solver {
            d.options.solver = s.clone();
        }
    }
    let problem = doc.resolve(&base)?;
    let result = run_calibration(&problem)?;
    let out = cfg.output_dir();
    create_dir(&out)?;
    result.save(out.join("calibration.json"), out.join("convergence.csv"))?;
    result.best_parameters.save(out.join("calibrated_params.json"))?;
    Ok(())
}

#[derive(Debug, Serialize)]
struct MotionSummary {
    file: String,
    segments_found: usize,
    source_start_s: f64,
    source_duration_s: f64,
    stats: ProfileStats,
}

#[derive(Debug, Serialize)]
struct SegmentRecord {
    start_s: f64,
    end_s: f64,
    tag: MotionTag,
}

pub fn extract(cfg: &RunConfig) -> Result<(), CliError> {
    let e = &cfg.extract;
    let out = cfg.output_dir();
    create_dir(&out)?;
    let (log_path, labels_path) = if e.synthetic {
        let log = synthetic_flight_log(cfg.seed.unwrap_or(SYNTHETIC_SEED));
        let lp = out.join("synthetic_flight_log.csv");
        write_text(&lp, &log.csv)?;
        let labels = out.join("synthetic_flight_labels.json");
        save_labels(&labels, &log.labels)?;
        (lp, e.labels.clone())
    } else {
        let lp = e
            .log
            .clone()
            .ok_or_else(|| CliError::config("extract needs a flight log (--log, --synthetic or [extract].log)"))?;
        (lp, e.labels.clone())
    };
    require_exists(&log_path)?;
    let options = ParseOptions {
        nominal_rate: e.nominal_rate,
        max_jitter: e.max_jitter,
        sensor_range: e.sensor_range,
    };
    let raw = parse_log(&log_path, &options)?;
    let filtered = moving_average(&raw, e.window)?;
    let mode = match &labels_path {
        Some(p) => {
            require_exists(p)?;
            SegmentMode::LabelFile { labels: load_labels(p)? }
        }
        None => SegmentMode::Threshold(e.threshold.clone()),
    };
    let segments = segment(&filtered, &mode)?;
    let period = filtered.period();
    let records: Vec<SegmentRecord> = segments
        .iter()
        .map(|s| SegmentRecord {
            start_s: s.start as f64 * period,
            end_s: s.end as f64 * period,
            tag: s.tag,
        })
        .collect();
    write_json(&out.join("segments.json"), &records)?;

    // the longest segment of each motion is the template for its profile
    let mut longest: BTreeMap<MotionTag, (&SegmentLabel, usize)> = BTreeMap::new();
    for s in &segments {
        let entry = longest.entry(s.tag).or_insert((s, 0));
        entry.1 += 1;
        if s.len() > entry.0.len() {
            entry.0 = s;
        }
    }
    if longest.is_empty() {
        return Err(flightcell::Error::Input("no motion segments found in the log".into()).into());
    }
    let params = load_params(cfg)?;
    let pack_v = e.nominal_pack_voltage.unwrap_or(3.7 * params.n_series as f64);
    let dir = out.join("profiles");
    create_dir(&dir)?;
    let mut summary = BTreeMap::new();
    for (tag, (seg, count)) in longest {
        let mut p = periodic_reconstruct(&filtered, seg, e.target_duration_s, e.stitch)?;
        p.metadata.insert("source".into(), log_path.display().to_string());
        p.metadata
            .insert("template".into(), format!("{:.3}-{:.3} s", seg.start as f64 * period, seg.end as f64 * period));
        let file = format!("{tag}.csv");
        write_profile(dir.join(&file), &p)?;
        summary.insert(
            tag.to_string(),
            MotionSummary {
                file: format!("profiles/{file}"),
                segments_found: count,
                source_start_s: seg.start as f64 * period,
                source_duration_s: seg.len() as f64 * period,
                stats: profile_stats(&p, pack_v)?,
            },
        );
    }
    write_json(&out.join("profile_stats.json"), &summary)
}

pub fn replay(cfg: &RunConfig) -> Result<(), CliError> {
    let r = &cfg.replay;
    let path = r
        .profile
        .as_ref()
        .ok_or_else(|| CliError::config("replay needs a profile (--profile or [replay].profile)"))?;
    require_exists(path)?;
    let params = load_params(cfg)?;
    let profile = read_profile(path)?;
    let tag = r.tag.clone().unwrap_or_else(|| tag_for(&profile, path));
    let options = replay_options(cfg, r.repetitions);
    let out = cfg.output_dir();
    create_dir(&out)?;
    let trace_dir = out.join("traces");
    if r.traces {
        create_dir(&trace_dir)?;
    }
    let mut trace_error = None;
    let report = replay_with_traces(&params, &profile, &tag, &options, &mut |cycle, trace| {
        if r.traces && trace_error.is_none() {
            let p = trace_dir.join(format!("{tag}_cycle{:03}.csv", cycle + 1));
            if let Err(e) = trace.save_csv(&p) {
                trace_error = Some(e);
            }
        }
    })?;
    if let Some(e) = trace_error {
        return Err(e.into());
    }
    write_json(&out.join(format!("replay_{tag}.json")), &report)
}

fn motion_profiles(cfg: &RunConfig) -> Result<Vec<PathBuf>, CliError> {
    let a = &cfg.assess;
    if !a.profiles.is_empty() {
        for p in &a.profiles {
            require_exists(p)?;
        }
        return Ok(a.profiles.clone());
    }
    let dir = a.profile_dir.clone().unwrap_or_else(|| cfg.output_dir().join("profiles"));
    require_exists(&dir)?;
    let mut paths: Vec<PathBuf> = std::fs::read_dir(&dir)
        .map_err(|e| CliError::io(&dir, e))?
        .filter_map(|entry| entry.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|x| x == "csv"))
        .collect();
    paths.sort();
    Ok(paths)
}

fn write_outputs(out: &Path, reports: &[HealthReport]) -> Result<(), CliError> {
    let fit = fit_baselines(reports)?;
    let table = motion_report(reports, &fit)?;
    write_json(&out.join("baseline_fit.json"), &fit)?;
    table.save_csv(out.join("comparison.csv"))?;
    write_json(&out.join("comparison.json"), &table)?;
    let plots = out.join("plots");
    create_dir(&plots)?;
    for m in Metric::ALL {
        write_text(&plots.join(format!("{}.csv", m.name())), &plot_data(reports, &fit, m))?;
    }
    Ok(())
}

pub fn assess(cfg: &RunConfig) -> Result<(), CliError> {
    let a = &cfg.assess;
    let mut params = load_params(cfg)?;
    if let Some(t) = a.toggles {
        params.degradation.toggles = t;
    }
    let mut jobs: Vec<(String, CurrentProfile)> = Vec::new();
    let rate = a.baseline_sample_rate;
    if a.baseline_c_rates.is_empty() {
        for &amps in &a.baseline_currents {
            jobs.push((format!("cc_{amps}A"), constant_current(amps, a.baseline_duration_s, rate)?));
        }
    } else {
        for &c in &a.baseline_c_rates {
            let amps = c * params.q_rated;
            jobs.push((format!("cc_{c}C"), constant_current(amps, a.baseline_duration_s, rate)?));
        }
    }
    for path in motion_profiles(cfg)? {
        let profile = read_profile(&path)?;
        let mut tag = tag_for(&profile, &path);
        if profile.label == Some(MotionTag::Cc) {
            tag = format!("cc_{}", path.file_stem().unwrap_or_default().to_string_lossy());
        }
        jobs.push((tag, profile));
    }
    let mut options = replay_options(cfg, a.repetitions);
    options.recharge = a.recharge;
    options.capacity_check_c_rate = a.capacity_check_c_rate;
    let reports = replay_many(&params, &jobs, &options)?;
    let out = cfg.output_dir();
    create_dir(&out)?;
    write_json(&out.join("reports.json"), &reports)?;
    write_outputs(&out, &reports)
}

#[derive(Deserialize)]
#[serde(untagged)]
enum ReportFile {
    Many(Vec<HealthReport>),
    One(Box<HealthReport>),
}

pub fn report(cfg: &RunConfig) -> Result<(), CliError> {
    let out = cfg.output_dir();
    let path = cfg.report.reports.clone().unwrap_or_else(|| out.join("reports.json"));
    require_exists(&path)?;
    let text = std::fs::read_to_string(&path).map_err(|e| CliError::io(&path, e))?;
    let reports = match serde_json::from_str(&text).map_err(flightcell::Error::from)? {
        ReportFile::Many(v) => v,
        ReportFile::One(r) => vec![*r],
    };
    create_dir(&out)?;
    write_outputs(&out, &reports)
}
