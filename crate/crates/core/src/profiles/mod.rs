//! Current profiles: ingestion of flight logs, filtering, motion segmentation,
//! periodic reconstruction and constant-current baselines.

mod io;
mod segment;
mod signal;
mod synthetic;

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use io::{
    labels_from_log, load_labels, parse_log, parse_log_str, read_profile, save_labels, write_profile,
    LabelInterval, ParseOptions,
};
pub use segment::{segment, Band, SegmentMode, ThresholdConfig};
pub use signal::{moving_average, periodic_reconstruct, Stitch};
pub use synthetic::{synthetic_flight_log, SyntheticLog};

/// Default current-sensor range, A.
pub const DEFAULT_SENSOR_RANGE: f64 = 100.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MotionTag {
    Hover,
    Vertical,
    Horizontal,
    Cc,
    Other,
}

impl MotionTag {
    pub fn as_str(self) -> &'static str {
        match self {
            MotionTag::Hover => "hover",
            MotionTag::Vertical => "vertical",
            MotionTag::Horizontal => "horizontal",
            MotionTag::Cc => "cc",
            MotionTag::Other => "other",
        }
    }
}

impl fmt::Display for MotionTag {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for MotionTag {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "hover" => Ok(MotionTag::Hover),
            "vertical" => Ok(MotionTag::Vertical),
            "horizontal" => Ok(MotionTag::Horizontal),
            "cc" => Ok(MotionTag::Cc),
            "other" => Ok(MotionTag::Other),
            other => Err(Error::input(format!("unknown motion tag {other:?}"))),
        }
    }
}

/// Uniformly sampled applied current, discharge positive.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CurrentProfile {
    /// Hz.
    pub sample_rate: f64,
    /// A.
    pub samples: Vec<f64>,
    pub label: Option<MotionTag>,
    #[serde(default)]
    pub metadata: BTreeMap<String, String>,
}

impl CurrentProfile {
    /// Validated profile using the default sensor range.
    pub fn new(sample_rate: f64, samples: Vec<f64>, label: Option<MotionTag>) -> Result<Self> {
        Self::with_range(sample_rate, samples, label, DEFAULT_SENSOR_RANGE)
    }

    pub fn with_range(sample_rate: f64, samples: Vec<f64>, label: Option<MotionTag>, range: f64) -> Result<Self> {
        if !(sample_rate > 0.0) || !sample_rate.is_finite() {
            return Err(Error::input(format!("sample rate {sample_rate} must be positive")));
        }
        if let Some(i) = samples.iter().position(|v| !v.is_finite() || v.abs() > range) {
            return Err(Error::input(format!(
                "sample {i} = {} outside the sensor range of {range} A",
                samples[i]
            )));
        }
        Ok(Self {
            sample_rate,
            samples,
            label,
            metadata: BTreeMap::new(),
        })
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn period(&self) -> f64 {
        1.0 / self.sample_rate
    }

    pub fn duration(&self) -> f64 {
        self.samples.len() as f64 / self.sample_rate
    }

    /// Sample `start..end` as a new profile with the given tag.
    pub fn slice(&self, start: usize, end: usize, label: Option<MotionTag>) -> CurrentProfile {
        CurrentProfile {
            sample_rate: self.sample_rate,
            samples: self.samples[start..end].to_vec(),
            label,
            metadata: self.metadata.clone(),
        }
    }

    /// Profile with every sample multiplied by `factor`.
    pub fn scaled(&self, factor: f64) -> CurrentProfile {
        CurrentProfile {
            samples: self.samples.iter().map(|v| v * factor).collect(),
            ..self.clone()
        }
    }
}

/// A labeled half-open sample interval `[start, end)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SegmentLabel {
    pub start: usize,
    pub end: usize,
    pub tag: MotionTag,
}

impl SegmentLabel {
    pub fn len(&self) -> usize {
        self.end - self.start
    }

    pub fn is_empty(&self) -> bool {
        self.end == self.start
    }
}

/// Constant current for `duration` seconds at `rate` Hz, tagged `cc`.
pub fn constant_current(amps: f64, duration: f64, rate: f64) -> Result<CurrentProfile> {
    if !(duration > 0.0) || !(rate > 0.0) {
        return Err(Error::input("constant-current duration and rate must be positive"));
    }
    let n = (duration * rate).round() as usize;
    let mut p = CurrentProfile::new(rate, vec![amps; n.max(1)], Some(MotionTag::Cc))?;
    p.metadata.insert("source".into(), format!("constant current {amps} A"));
    Ok(p)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ProfileStats {
    pub mean_current: f64,
    pub rms_current: f64,
    /// Ah, sample-and-hold integral of the current.
    pub charge_throughput: f64,
    /// Wh, charge times the nominal pack voltage.
    pub energy_estimate: f64,
    /// Largest absolute sample, A.
    pub peak: f64,
    /// Population standard deviation, A.
    pub ripple_std: f64,
}

pub fn profile_stats(profile: &CurrentProfile, pack_voltage: f64) -> Result<ProfileStats> {
    if profile.is_empty() {
        return Err(Error::input("profile has no samples"));
    }
    let n = profile.len() as f64;
    let s = &profile.samples;
    let mean = s.iter().sum::<f64>() / n;
    let rms = (s.iter().map(|v| v * v).sum::<f64>() / n).sqrt();
    let var = s.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
    let charge = s.iter().sum::<f64>() * profile.period() / 3600.0;
    Ok(ProfileStats {
        mean_current: mean,
        rms_current: rms,
        charge_throughput: charge,
        energy_estimate: charge * pack_voltage,
        peak: s.iter().fold(0.0f64, |m, v| m.max(v.abs())),
        ripple_std: var.sqrt(),
    })
}
