use serde::{Deserialize, Serialize};

use super::io::labels_to_segments;
use super::{CurrentProfile, LabelInterval, MotionTag, SegmentLabel};
use crate::error::{Error, Result};

/// Acceptance region of one motion class in (window mean, window variance).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Band {
    pub tag: MotionTag,
    /// Closed mean interval, A.
    pub mean: [f64; 2],
    /// Half-open variance interval, A^2. Unbounded when absent.
    #[serde(default)]
    pub variance: Option<[f64; 2]>,
}

impl Band {
    fn var_range(&self) -> [f64; 2] {
        self.variance.unwrap_or([0.0, f64::INFINITY])
    }

    fn contains(&self, mean: f64, var: f64) -> bool {
        let [vl, vh] = self.var_range();
        mean >= self.mean[0] && mean <= self.mean[1] && var >= vl && var < vh
    }

    fn overlaps(&self, other: &Band) -> bool {
        let [a, b] = self.var_range();
        let [c, d] = other.var_range();
        self.mean[0] <= other.mean[1] && other.mean[0] <= self.mean[1] && a < d && c < b
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ThresholdConfig {
    pub window_s: f64,
    /// Fraction of a window shared with the next one.
    pub overlap: f64,
    pub min_duration_s: f64,
    pub bands: Vec<Band>,
}

impl Default for ThresholdConfig {
    /// Bands tuned to the bundled synthetic log after the default filter.
    fn default() -> Self {
        Self {
            window_s: 2.0,
            overlap: 0.5,
            min_duration_s: 5.0,
            bands: vec![
                Band {
                    tag: MotionTag::Hover,
                    mean: [12.0, 18.0],
                    variance: Some([0.0, 0.4]),
                },
                Band {
                    tag: MotionTag::Horizontal,
                    mean: [14.0, 20.0],
                    variance: Some([0.4, 4.0]),
                },
                Band {
                    tag: MotionTag::Vertical,
                    mean: [16.0, 30.0],
                    variance: Some([4.0, 400.0]),
                },
            ],
        }
    }
}

impl ThresholdConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.window_s > 0.0) || !(0.0..1.0).contains(&self.overlap) || self.min_duration_s < 0.0 {
            return Err(Error::input("threshold window, overlap or min_duration out of range"));
        }
        for (i, a) in self.bands.iter().enumerate() {
            if !(a.mean[0] <= a.mean[1]) || !(a.var_range()[0] < a.var_range()[1]) {
                return Err(Error::input(format!("band {} has an empty range", a.tag)));
            }
            for b in &self.bands[i + 1..] {
                if a.overlaps(b) {
                    return Err(Error::input(format!("bands {} and {} overlap", a.tag, b.tag)));
                }
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "snake_case")]
pub enum SegmentMode {
    LabelFile { labels: Vec<LabelInterval> },
    Threshold(ThresholdConfig),
}

/// Split a (filtered) profile into sorted, disjoint motion segments.
pub fn segment(profile: &CurrentProfile, mode: &SegmentMode) -> Result<Vec<SegmentLabel>> {
    match mode {
        SegmentMode::LabelFile { labels } => labels_to_segments(labels, profile),
        SegmentMode::Threshold(cfg) => threshold_segments(profile, cfg),
    }
}

fn threshold_segments(profile: &CurrentProfile, cfg: &ThresholdConfig) -> Result<Vec<SegmentLabel>> {
    cfg.validate()?;
    let n = profile.len();
    let x = &profile.samples;
    let w = ((cfg.window_s * profile.sample_rate).round() as usize).max(2);
    if n < w {
        return Ok(Vec::new());
    }
    let hop = (((1.0 - cfg.overlap) * w as f64).round() as usize).clamp(1, w);
    // Each window owns the first `hop` samples it covers; the last one owns the rest.
    let mut owned: Vec<(usize, usize, Option<MotionTag>)> = Vec::new();
    let mut start = 0;
    while start + w <= n {
        let win = &x[start..start + w];
        let mean = win.iter().sum::<f64>() / w as f64;
        let var = win.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / w as f64;
        let tag = cfg.bands.iter().find(|b| b.contains(mean, var)).map(|b| b.tag);
        let next = start + hop;
        let end = if next + w <= n { next } else { n };
        owned.push((start, end, tag));
        start = next;
    }
    let mut segs: Vec<SegmentLabel> = Vec::new();
    for (s, e, tag) in owned {
        let Some(tag) = tag else { continue };
        match segs.last_mut() {
            Some(last) if last.tag == tag && last.end == s => last.end = e,
            _ => segs.push(SegmentLabel { start: s, end: e, tag }),
        }
    }
    // Move boundaries between neighbouring classes onto the best change point.
    for i in 1..segs.len() {
        let (a, b) = (segs[i - 1], segs[i]);
        if a.tag == b.tag || b.start - a.end > w {
            continue;
        }
        let lo = a.start.max(a.end.saturating_sub(w)) + 1;
        let hi = (b.start + w).min(b.end - 1);
        if lo > hi {
            continue;
        }
        let split = best_split(&x[a.start..b.end], lo - a.start, hi - a.start) + a.start;
        segs[i - 1].end = split;
        segs[i].start = split;
    }
    let min_len = (cfg.min_duration_s * profile.sample_rate).round() as usize;
    segs.retain(|s| s.len() >= min_len.max(1));
    Ok(segs)
}

/// Index in `lo..=hi` splitting `x` into two pieces of least total squared
/// deviation from their means.
fn best_split(x: &[f64], lo: usize, hi: usize) -> usize {
    let n = x.len();
    let mut prefix = vec![0.0; n + 1];
    let mut prefix2 = vec![0.0; n + 1];
    for i in 0..n {
        prefix[i + 1] = prefix[i] + x[i];
        prefix2[i + 1] = prefix2[i] + x[i] * x[i];
    }
    let cost = |a: usize, b: usize| {
        let m = (b - a) as f64;
        let s = prefix[b] - prefix[a];
        prefix2[b] - prefix2[a] - s * s / m
    };
    let mut best = (f64::INFINITY, lo);
    for k in lo..=hi {
        let c = cost(0, k) + cost(k, n);
        if c < best.0 - 1e-12 * c.abs().max(1.0) {
            best = (c, k);
        }
    }
    best.1
}

#[cfg(test)]
mod tests {
    use super::*;

    fn step_profile() -> CurrentProfile {
        let mut v = vec![16.0; 100];
        v.extend(vec![22.0; 100]);
        CurrentProfile::new(10.0, v, None).unwrap()
    }

    fn step_bands() -> ThresholdConfig {
        ThresholdConfig {
            bands: vec![
                Band { tag: MotionTag::Hover, mean: [14.0, 18.0], variance: None },
                Band { tag: MotionTag::Vertical, mean: [20.0, 24.0], variance: None },
            ],
            ..ThresholdConfig::default()
        }
    }

    #[test]
    fn step_splits_at_change_point() {
        let segs = segment(&step_profile(), &SegmentMode::Threshold(step_bands())).unwrap();
        assert_eq!(
            segs,
            vec![
                SegmentLabel { start: 0, end: 100, tag: MotionTag::Hover },
                SegmentLabel { start: 100, end: 200, tag: MotionTag::Vertical },
            ]
        );
    }

    #[test]
    fn zero_profile_matches_nothing() {
        let p = CurrentProfile::new(10.0, vec![0.0; 200], None).unwrap();
        assert!(segment(&p, &SegmentMode::Threshold(step_bands())).unwrap().is_empty());
    }

    #[test]
    fn overlapping_bands_rejected() {
        let mut cfg = step_bands();
        cfg.bands[1].mean = [17.0, 24.0];
        assert!(segment(&step_profile(), &SegmentMode::Threshold(cfg)).is_err());
    }

    #[test]
    fn default_bands_are_disjoint() {
        ThresholdConfig::default().validate().unwrap();
    }

    #[test]
    fn label_file_pass_through() {
        let p = CurrentProfile::new(10.0, vec![0.0; 200], None).unwrap();
        let labels = vec![
            LabelInterval { start_s: 0.0, end_s: 10.0, tag: MotionTag::Hover },
            LabelInterval { start_s: 10.0, end_s: 20.0, tag: MotionTag::Vertical },
        ];
        let segs = segment(&p, &SegmentMode::LabelFile { labels }).unwrap();
        assert_eq!(segs.len(), 2);
        assert_eq!((segs[0].start, segs[0].end, segs[1].start, segs[1].end), (0, 100, 100, 200));
    }
}
