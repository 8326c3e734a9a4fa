use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::{CurrentProfile, MotionTag, SegmentLabel, DEFAULT_SENSOR_RANGE};
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ParseOptions {
    /// Nominal sample rate, Hz. Estimated from the timestamps when absent.
    pub nominal_rate: Option<f64>,
    /// Largest tolerated deviation of a sampling interval from the nominal
    /// period, as a fraction of the period.
    pub max_jitter: f64,
    pub sensor_range: f64,
}

impl Default for ParseOptions {
    fn default() -> Self {
        Self {
            nominal_rate: None,
            max_jitter: 0.1,
            sensor_range: DEFAULT_SENSOR_RANGE,
        }
    }
}

/// One row of a label file, in seconds from the start of the log.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LabelInterval {
    pub start_s: f64,
    pub end_s: f64,
    pub tag: MotionTag,
}

struct RawLog {
    times: Vec<f64>,
    currents: Vec<f64>,
    motions: Vec<Option<String>>,
}

fn read_raw(text: &str) -> Result<RawLog> {
    let mut reader = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(text.as_bytes());
    let headers = reader.headers()?.clone();
    let col = |name: &str| headers.iter().position(|h| h == name);
    let (Some(it), Some(ii)) = (col("t_s"), col("i_a")) else {
        return Err(Error::Parse {
            row: 1,
            reason: "header must contain t_s and i_a".into(),
        });
    };
    let im = col("motion");
    let mut raw = RawLog {
        times: Vec::new(),
        currents: Vec::new(),
        motions: Vec::new(),
    };
    for (k, rec) in reader.records().enumerate() {
        let row = k + 2;
        let rec = rec.map_err(|e| Error::Parse {
            row,
            reason: e.to_string(),
        })?;
        let field = |i: usize| -> Result<f64> {
            let s = rec.get(i).ok_or_else(|| Error::Parse {
                row,
                reason: "missing column".into(),
            })?;
            s.parse::<f64>()
                .ok()
                .filter(|v| v.is_finite())
                .ok_or_else(|| Error::Parse {
                    row,
                    reason: format!("not a finite number: {s:?}"),
                })
        };
        let t = field(it)?;
        let i = field(ii)?;
        if let Some(&prev) = raw.times.last() {
            if t <= prev {
                return Err(Error::Parse {
                    row,
                    reason: format!("timestamp {t} does not increase (previous {prev})"),
                });
            }
        }
        raw.times.push(t);
        raw.currents.push(i);
        raw.motions.push(im.and_then(|m| rec.get(m)).map(str::to_string));
    }
    Ok(raw)
}

/// Round to three significant figures.
fn snap_rate(rate: f64) -> f64 {
    let scale = 10f64.powi(2 - rate.log10().floor() as i32);
    (rate * scale).round() / scale
}

/// Parse a `t_s,i_a` log held in memory.
pub fn parse_log_str(text: &str, options: &ParseOptions) -> Result<CurrentProfile> {
    let raw = read_raw(text)?;
    let n = raw.times.len();
    if n < 2 {
        return Err(Error::Parse {
            row: n + 1,
            reason: "a log needs at least two samples".into(),
        });
    }
    let t0 = raw.times[0];
    let span = raw.times[n - 1] - t0;
    let rate = match options.nominal_rate {
        Some(r) if r > 0.0 => r,
        Some(r) => return Err(Error::input(format!("nominal rate {r} must be positive"))),
        None => snap_rate((n - 1) as f64 / span),
    };
    let period = 1.0 / rate;
    let mut uniform = true;
    for k in 1..n {
        let dev = (raw.times[k] - raw.times[k - 1] - period).abs();
        if dev >= options.max_jitter * period {
            return Err(Error::Parse {
                row: k + 2,
                reason: format!(
                    "sampling interval {:.6} s deviates from the nominal {:.6} s by more than {}%",
                    raw.times[k] - raw.times[k - 1],
                    period,
                    100.0 * options.max_jitter
                ),
            });
        }
        // Timestamps written as decimal text are never exactly uniform.
        if (raw.times[k] - (t0 + k as f64 * period)).abs() > 1e-6 * period {
            uniform = false;
        }
    }
    let samples = if uniform {
        raw.currents
    } else {
        let m = (span * rate + 1e-9).floor() as usize + 1;
        let mut out = Vec::with_capacity(m);
        let mut j = 0;
        for k in 0..m {
            let t = t0 + k as f64 * period;
            while j + 2 < n && raw.times[j + 1] < t {
                j += 1;
            }
            let (ta, tb) = (raw.times[j], raw.times[j + 1]);
            let w = ((t - ta) / (tb - ta)).clamp(0.0, 1.0);
            out.push(raw.currents[j] + w * (raw.currents[j + 1] - raw.currents[j]));
        }
        out
    };
    let mut profile = CurrentProfile::with_range(rate, samples, None, options.sensor_range)
        .map_err(|e| Error::Parse {
            row: 0,
            reason: e.to_string(),
        })?;
    profile.metadata.insert("start_time_s".into(), t0.to_string());
    if !uniform {
        profile.metadata.insert("resampled".into(), "linear".into());
    }
    Ok(profile)
}

pub fn parse_log(path: impl AsRef<Path>, options: &ParseOptions) -> Result<CurrentProfile> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let mut p = parse_log_str(&text, options)?;
    p.metadata.insert("source".into(), path.display().to_string());
    Ok(p)
}

/// Label intervals recovered from the optional `motion` column of a log.
/// Rows with an empty or unknown motion are left unlabeled.
pub fn labels_from_log(text: &str) -> Result<Vec<LabelInterval>> {
    let raw = read_raw(text)?;
    let n = raw.times.len();
    let period = if n > 1 { (raw.times[n - 1] - raw.times[0]) / (n - 1) as f64 } else { 0.0 };
    let t0 = raw.times.first().copied().unwrap_or(0.0);
    let mut out: Vec<LabelInterval> = Vec::new();
    let mut open: Option<(usize, MotionTag)> = None;
    for k in 0..=n {
        let tag = if k < n {
            raw.motions[k].as_deref().and_then(|m| m.parse::<MotionTag>().ok())
        } else {
            None
        };
        if open.map(|(_, t)| Some(t)) != Some(tag) {
            if let Some((s, t)) = open.take() {
                let micro = |v: f64| (v * 1e6).round() / 1e6;
                out.push(LabelInterval {
                    start_s: micro(raw.times[s] - t0),
                    end_s: micro(raw.times[k - 1] - t0 + period),
                    tag: t,
                });
            }
            open = tag.map(|t| (k, t));
        }
    }
    Ok(out)
}

pub fn load_labels(path: impl AsRef<Path>) -> Result<Vec<LabelInterval>> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    Ok(serde_json::from_str(&text)?)
}

pub fn save_labels(path: impl AsRef<Path>, labels: &[LabelInterval]) -> Result<()> {
    let path = path.as_ref();
    let text = serde_json::to_string_pretty(labels)?;
    std::fs::write(path, text + "\n").map_err(|e| Error::io(path, e))
}

/// Sample-index intervals for a label set on a profile.
pub(crate) fn labels_to_segments(labels: &[LabelInterval], profile: &CurrentProfile) -> Result<Vec<SegmentLabel>> {
    let n = profile.len();
    let mut segs = Vec::with_capacity(labels.len());
    for l in labels {
        if !(l.start_s.is_finite() && l.end_s.is_finite()) || l.start_s < 0.0 || l.end_s <= l.start_s {
            return Err(Error::input(format!(
                "label [{}, {}) {} is not a valid interval",
                l.start_s, l.end_s, l.tag
            )));
        }
        let start = (l.start_s * profile.sample_rate).round() as usize;
        let end = ((l.end_s * profile.sample_rate).round() as usize).min(n);
        if start >= n {
            return Err(Error::input(format!(
                "label starting at {} s lies beyond the {} s profile",
                l.start_s,
                profile.duration()
            )));
        }
        if end > start {
            segs.push(SegmentLabel { start, end, tag: l.tag });
        }
    }
    segs.sort_by_key(|s| (s.start, s.end));
    for w in segs.windows(2) {
        if w[1].start < w[0].end {
            return Err(Error::input(format!(
                "label intervals overlap: samples [{}, {}) {} and [{}, {}) {}",
                w[0].start, w[0].end, w[0].tag, w[1].start, w[1].end, w[1].tag
            )));
        }
    }
    Ok(segs)
}

#[derive(Serialize, Deserialize)]
struct Sidecar {
    sample_rate: f64,
    label: Option<MotionTag>,
    #[serde(default)]
    metadata: std::collections::BTreeMap<String, String>,
}

fn sidecar_path(path: &Path) -> PathBuf {
    let mut s = path.as_os_str().to_owned();
    s.push(".json");
    PathBuf::from(s)
}

/// Canonical CSV text for a profile; times are `i / sample_rate`.
pub(crate) fn profile_csv(profile: &CurrentProfile) -> String {
    let mut out = String::from("t_s,i_a\n");
    for (i, v) in profile.samples.iter().enumerate() {
        out.push_str(&format!("{},{}\n", i as f64 / profile.sample_rate, v));
    }
    out
}

/// Write `path` as canonical CSV and `path.json` with rate, tag and metadata.
pub fn write_profile(path: impl AsRef<Path>, profile: &CurrentProfile) -> Result<()> {
    let path = path.as_ref();
    std::fs::write(path, profile_csv(profile)).map_err(|e| Error::io(path, e))?;
    let side = Sidecar {
        sample_rate: profile.sample_rate,
        label: profile.label,
        metadata: profile.metadata.clone(),
    };
    let sp = sidecar_path(path);
    std::fs::write(&sp, serde_json::to_string_pretty(&side)? + "\n").map_err(|e| Error::io(&sp, e))
}

/// Read a profile CSV, applying its sidecar when one exists.
pub fn read_profile(path: impl AsRef<Path>) -> Result<CurrentProfile> {
    let path = path.as_ref();
    let sp = sidecar_path(path);
    let side: Option<Sidecar> = match std::fs::read_to_string(&sp) {
        Ok(text) => Some(serde_json::from_str(&text)?),
        Err(_) => None,
    };
    let options = ParseOptions {
        nominal_rate: side.as_ref().map(|s| s.sample_rate),
        ..ParseOptions::default()
    };
    let mut profile = parse_log(path, &options)?;
    if let Some(s) = side {
        profile.label = s.label;
        profile.metadata = s.metadata;
    }
    Ok(profile)
}
