//! Synthetic multirotor flight log used as a bundled fixture.
//!
//! This is constructed data, not a recorded flight. Each motion has a simple
//! generating model:
//! - hover: 16 A with 0.3 A white noise;
//! - horizontal: 17 A with a 1.5 A, 4 s sinusoidal ripple and 0.3 A noise;
//! - vertical: 14 A with 1 s climb bursts to 32 A every 3 s (20 A mean)
//!   and 0.5 A noise.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use super::{LabelInterval, MotionTag};

pub struct SyntheticLog {
    /// `t_s,i_a,motion` CSV text.
    pub csv: String,
    pub labels: Vec<LabelInterval>,
    pub sample_rate: f64,
}

const SCHEDULE: [(MotionTag, f64); 7] = [
    (MotionTag::Vertical, 30.0),
    (MotionTag::Hover, 60.0),
    (MotionTag::Horizontal, 60.0),
    (MotionTag::Vertical, 30.0),
    (MotionTag::Hover, 60.0),
    (MotionTag::Horizontal, 60.0),
    (MotionTag::Vertical, 30.0),
];

fn motion_current(tag: MotionTag, t: f64) -> f64 {
    match tag {
        MotionTag::Hover => 16.0,
        MotionTag::Horizontal => 17.0 + 1.5 * (2.0 * std::f64::consts::PI * t / 4.0).sin(),
        MotionTag::Vertical => {
            if t.rem_euclid(3.0) < 1.0 {
                32.0
            } else {
                14.0
            }
        }
        MotionTag::Cc | MotionTag::Other => 0.0,
    }
}

fn noise_std(tag: MotionTag) -> f64 {
    match tag {
        MotionTag::Vertical => 0.5,
        _ => 0.3,
    }
}

/// A 10 Hz log of six minutes of mixed flight.
pub fn synthetic_flight_log(seed: u64) -> SyntheticLog {
    let rate = 10.0;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut csv = String::from("t_s,i_a,motion\n");
    let mut labels = Vec::new();
    let mut k = 0usize;
    let mut t0 = 0.0;
    for (tag, duration) in SCHEDULE {
        let n = (duration * rate) as usize;
        let noise = Normal::new(0.0, noise_std(tag)).expect("positive std");
        for j in 0..n {
            let local = j as f64 / rate;
            let i = motion_current(tag, local) + noise.sample(&mut rng);
            csv.push_str(&format!("{:.1},{:.3},{}\n", k as f64 / rate, i, tag));
            k += 1;
        }
        labels.push(LabelInterval {
            start_s: t0,
            end_s: t0 + duration,
            tag,
        });
        t0 += duration;
    }
    SyntheticLog {
        csv,
        labels,
        sample_rate: rate,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::profiles::{labels_from_log, parse_log_str, ParseOptions};

    #[test]
    fn log_parses_at_ten_hertz() {
        let log = synthetic_flight_log(1);
        let p = parse_log_str(&log.csv, &ParseOptions::default()).unwrap();
        assert_eq!(p.sample_rate, 10.0);
        assert_eq!(p.len(), 3300);
        assert!(!p.metadata.contains_key("resampled"));
    }

    #[test]
    fn motion_column_matches_labels() {
        let log = synthetic_flight_log(1);
        assert_eq!(labels_from_log(&log.csv).unwrap(), log.labels);
    }

    #[test]
    fn deterministic_in_seed() {
        assert_eq!(synthetic_flight_log(3).csv, synthetic_flight_log(3).csv);
        assert_ne!(synthetic_flight_log(3).csv, synthetic_flight_log(4).csv);
    }
}
