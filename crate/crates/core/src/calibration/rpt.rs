use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::profiles::{CurrentProfile, MotionTag};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum RptKind {
    #[serde(rename = "cc_0p1c")]
    Cc0p1c,
    #[serde(rename = "cc_2c")]
    Cc2c,
    #[serde(rename = "pulse")]
    Pulse,
}

impl std::str::FromStr for RptKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "cc_0p1c" => Ok(RptKind::Cc0p1c),
            "cc_2c" => Ok(RptKind::Cc2c),
            "pulse" => Ok(RptKind::Pulse),
            other => Err(Error::input(format!("unknown RPT kind {other:?}"))),
        }
    }
}

/// Discharge pulses separated by rests.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PulseSchedule {
    pub c_rate: f64,
    pub on_s: f64,
    pub rest_s: f64,
    /// Number of pulses; by default enough to pass the rated capacity once.
    pub count: Option<usize>,
}

impl Default for PulseSchedule {
    fn default() -> Self {
        Self {
            c_rate: 2.0,
            on_s: 10.0,
            rest_s: 40.0,
            count: None,
        }
    }
}

/// Reference-performance-test current profile for a pack of `q_rated` Ah.
///
/// Constant-current kinds run for 1.1 times their nominal duration so that the
/// lower cutoff, not the profile, ends the test.
pub fn generate_rpt(kind: RptKind, q_rated: f64, sample_rate: f64, pulse: &PulseSchedule) -> Result<CurrentProfile> {
    if !(q_rated > 0.0) || !(sample_rate > 0.0) {
        return Err(Error::input("rated capacity and sample rate must be positive"));
    }
    let samples = match kind {
        RptKind::Cc0p1c | RptKind::Cc2c => {
            let c = if kind == RptKind::Cc0p1c { 0.1 } else { 2.0 };
            let n = (1.1 * 3600.0 / c * sample_rate - 1e-9).ceil() as usize;
            vec![c * q_rated; n]
        }
        RptKind::Pulse => {
            let on = (pulse.on_s * sample_rate).round() as usize;
            let rest = (pulse.rest_s * sample_rate).round() as usize;
            if on == 0 {
                return Err(Error::input("pulse shorter than one sample"));
            }
            let count = pulse
                .count
                .unwrap_or_else(|| (3600.0 / (pulse.c_rate * pulse.on_s) - 1e-9).ceil() as usize);
            let mut v = Vec::with_capacity(count * (on + rest));
            for _ in 0..count {
                v.extend(std::iter::repeat(pulse.c_rate * q_rated).take(on));
                v.extend(std::iter::repeat(0.0).take(rest));
            }
            v
        }
    };
    let mut p = CurrentProfile::new(sample_rate, samples, Some(MotionTag::Other))?;
    p.metadata.insert(
        "rpt".into(),
        serde_json::to_value(kind)?.as_str().unwrap_or_default().to_string(),
    );
    Ok(p)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn tenth_c_current() {
        let p = generate_rpt(RptKind::Cc0p1c, 2.2, 0.01, &PulseSchedule::default()).unwrap();
        assert!(p.samples.iter().all(|&v| (v - 0.22).abs() < 1e-15));
    }

    #[test]
    fn two_c_current() {
        let p = generate_rpt(RptKind::Cc2c, 2.2, 1.0, &PulseSchedule::default()).unwrap();
        assert!(p.samples.iter().all(|&v| v == 4.4));
        assert_eq!(p.len(), 1980);
    }

    #[test]
    fn pulse_schedule() {
        let sched = PulseSchedule { count: Some(3), ..Default::default() };
        let p = generate_rpt(RptKind::Pulse, 2.2, 1.0, &sched).unwrap();
        assert_eq!(p.len(), 150);
        for k in 0..3 {
            assert!(p.samples[50 * k..50 * k + 10].iter().all(|&v| v == 4.4));
            assert!(p.samples[50 * k + 10..50 * (k + 1)].iter().all(|&v| v == 0.0));
        }
    }

    #[test]
    fn default_pulses_cover_capacity() {
        let p = generate_rpt(RptKind::Pulse, 2.2, 1.0, &PulseSchedule::default()).unwrap();
        let ah: f64 = p.samples.iter().sum::<f64>() / 3600.0;
        assert!(ah >= 2.2 - 1e-9, "{ah}");
    }
}
