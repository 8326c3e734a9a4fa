use serde::{Deserialize, Serialize};

use super::{CurrentProfile, SegmentLabel};
use crate::error::{Error, Result};

/// Trailing moving average; the first `window - 1` outputs average the
/// available prefix.
pub fn moving_average(profile: &CurrentProfile, window: usize) -> Result<CurrentProfile> {
    let n = profile.len();
    if window == 0 {
        return Err(Error::input("moving-average window must be at least 1"));
    }
    if window > n {
        return Err(Error::input(format!(
            "moving-average window {window} exceeds profile length {n}"
        )));
    }
    let x = &profile.samples;
    let mut out = Vec::with_capacity(n);
    // Compensated running sum so long signals stay within rounding of the
    // direct window sum.
    let (mut sum, mut comp) = (0.0f64, 0.0f64);
    let add = |sum: &mut f64, comp: &mut f64, v: f64| {
        let t = *sum + v;
        if sum.abs() >= v.abs() {
            *comp += (*sum - t) + v;
        } else {
            *comp += (v - t) + *sum;
        }
        *sum = t;
    };
    for i in 0..n {
        add(&mut sum, &mut comp, x[i]);
        if i >= window {
            add(&mut sum, &mut comp, -x[i - window]);
        }
        let count = (i + 1).min(window);
        out.push((sum + comp) / count as f64);
    }
    let mut p = profile.clone();
    p.samples = out;
    p.metadata.insert("moving_average_window".into(), window.to_string());
    Ok(p)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum Stitch {
    Repeat,
    /// Overlap `k` samples at each seam with a linear blend.
    Crossfade { k: usize },
}

impl Default for Stitch {
    fn default() -> Self {
        Stitch::Crossfade { k: 5 }
    }
}

/// Tile a segment until it lasts at least `target_duration` seconds.
///
/// `Repeat` concatenates verbatim. `Crossfade` overlaps the last `k` samples
/// of each tile with the first `k` of the next; the blended samples carry a
/// constant correction so that each seam adds exactly `L - k` samples at the
/// segment mean, keeping the output mean equal to the segment mean.
pub fn periodic_reconstruct(
    profile: &CurrentProfile,
    seg: &SegmentLabel,
    target_duration: f64,
    stitch: Stitch,
) -> Result<CurrentProfile> {
    if seg.end > profile.len() || seg.start >= seg.end {
        return Err(Error::input(format!(
            "segment [{}, {}) out of range for {} samples",
            seg.start,
            seg.end,
            profile.len()
        )));
    }
    let src = &profile.samples[seg.start..seg.end];
    let len = src.len();
    if len < 2 {
        return Err(Error::input("segment needs at least two samples"));
    }
    let seg_duration = len as f64 / profile.sample_rate;
    if target_duration < seg_duration * (1.0 - 1e-12) {
        return Err(Error::input(format!(
            "target duration {target_duration} s is shorter than the {seg_duration} s segment"
        )));
    }
    let target = (target_duration * profile.sample_rate - 1e-9).ceil().max(len as f64) as usize;
    let k = match stitch {
        Stitch::Repeat => 0,
        Stitch::Crossfade { k } => k.min(len / 2),
    };
    let mut out: Vec<f64> = src.to_vec();
    if k == 0 {
        while out.len() < target {
            out.extend_from_slice(src);
        }
    } else {
        let mean = src.iter().sum::<f64>() / len as f64;
        let tail = &src[len - k..];
        let head = &src[..k];
        let mut blend: Vec<f64> = (0..k)
            .map(|m| {
                let w = (m + 1) as f64 / (k + 1) as f64;
                (1.0 - w) * tail[m] + w * head[m]
            })
            .collect();
        let wanted = tail.iter().sum::<f64>() + head.iter().sum::<f64>() - k as f64 * mean;
        let correction = (wanted - blend.iter().sum::<f64>()) / k as f64;
        for b in &mut blend {
            *b += correction;
        }
        while out.len() < target {
            let keep = out.len() - k;
            out.truncate(keep);
            out.extend_from_slice(&blend);
            out.extend_from_slice(&src[k..]);
        }
    }
    let mut p = CurrentProfile {
        sample_rate: profile.sample_rate,
        samples: out,
        label: Some(seg.tag),
        metadata: profile.metadata.clone(),
    };
    p.metadata.insert("segment".into(), format!("{}..{}", seg.start, seg.end));
    p.metadata.insert(
        "stitch".into(),
        match stitch {
            Stitch::Repeat => "repeat".into(),
            Stitch::Crossfade { k } => format!("crossfade:{k}"),
        },
    );
    Ok(p)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::profiles::MotionTag;

    fn prof(v: Vec<f64>) -> CurrentProfile {
        CurrentProfile::new(10.0, v, None).unwrap()
    }

    #[test]
    fn worked_moving_average() {
        let p = moving_average(&prof(vec![1.0, 2.0, 3.0, 4.0]), 2).unwrap();
        assert_eq!(p.samples, vec![1.0, 1.5, 2.5, 3.5]);
    }

    #[test]
    fn window_one_is_identity() {
        let x = vec![3.0, -1.0, 7.5];
        assert_eq!(moving_average(&prof(x.clone()), 1).unwrap().samples, x);
    }

    #[test]
    fn window_too_long() {
        assert!(moving_average(&prof(vec![1.0, 2.0]), 3).is_err());
        assert!(moving_average(&prof(vec![1.0, 2.0]), 0).is_err());
    }

    #[test]
    fn three_tiles() {
        let p = prof((0..100).map(|i| i as f64 * 0.1).collect());
        let seg = SegmentLabel { start: 0, end: 100, tag: MotionTag::Hover };
        let out = periodic_reconstruct(&p, &seg, 30.0, Stitch::Repeat).unwrap();
        assert_eq!(out.len(), 300);
        assert_eq!(out.label, Some(MotionTag::Hover));
    }

    #[test]
    fn constant_segment_unchanged() {
        let p = prof(vec![16.0; 50]);
        let seg = SegmentLabel { start: 0, end: 50, tag: MotionTag::Hover };
        for stitch in [Stitch::Repeat, Stitch::Crossfade { k: 5 }] {
            let out = periodic_reconstruct(&p, &seg, 17.0, stitch).unwrap();
            assert!(out.samples.iter().all(|v| (v - 16.0).abs() < 1e-12));
        }
    }

    #[test]
    fn crossfade_softens_sawtooth_seam() {
        let p = prof((0..20).map(|i| i as f64).collect());
        let seg = SegmentLabel { start: 0, end: 20, tag: MotionTag::Other };
        let max_step = |v: &[f64]| v.windows(2).map(|w| (w[1] - w[0]).abs()).fold(0.0, f64::max);
        let rep = periodic_reconstruct(&p, &seg, 8.0, Stitch::Repeat).unwrap();
        let xf = periodic_reconstruct(&p, &seg, 8.0, Stitch::Crossfade { k: 5 }).unwrap();
        assert!(max_step(&xf.samples) < max_step(&rep.samples));
        let mean = |v: &[f64]| v.iter().sum::<f64>() / v.len() as f64;
        assert!((mean(&xf.samples) - 9.5).abs() < 0.01 * 9.5);
    }
}
