use flightcell::profiles::{
    moving_average, parse_log_str, periodic_reconstruct, profile_stats, read_profile, segment, synthetic_flight_log,
    write_profile, CurrentProfile, LabelInterval, MotionTag, ParseOptions, SegmentLabel, SegmentMode, Stitch,
    ThresholdConfig,
};
use proptest::prelude::*;

const TAGS: [MotionTag; 4] = [MotionTag::Hover, MotionTag::Vertical, MotionTag::Horizontal, MotionTag::Other];

fn profile(rate: f64, samples: Vec<f64>) -> CurrentProfile {
    CurrentProfile::new(rate, samples, None).unwrap()
}

fn close(a: f64, b: f64) -> bool {
    (a - b).abs() <= 1e-12 * a.abs().max(b.abs()).max(1.0)
}

fn brute_moving_average(x: &[f64], w: usize) -> Vec<f64> {
    (0..x.len())
        .map(|i| {
            let lo = (i + 1).saturating_sub(w);
            x[lo..=i].iter().sum::<f64>() / (i + 1 - lo) as f64
        })
        .collect()
}

/// Crossfade reconstruction written position by position: with P = L - k the
/// output is tile 0, then at each seam offset s P the k blended samples
/// followed by src[k..].
fn brute_reconstruct(src: &[f64], target: usize, k: usize) -> Vec<f64> {
    let len = src.len();
    if k == 0 {
        let tiles = target.div_ceil(len).max(1);
        return (0..tiles * len).map(|j| src[j % len]).collect();
    }
    let p = len - k;
    let mut tiles = 1;
    while len + (tiles - 1) * p < target {
        tiles += 1;
    }
    let mean = src.iter().sum::<f64>() / len as f64;
    let raw: Vec<f64> = (0..k)
        .map(|m| {
            let w = (m + 1) as f64 / (k + 1) as f64;
            (1.0 - w) * src[p + m] + w * src[m]
        })
        .collect();
    let want = src[p..].iter().sum::<f64>() + src[..k].iter().sum::<f64>() - k as f64 * mean;
    let corr = (want - raw.iter().sum::<f64>()) / k as f64;
    let total = len + (tiles - 1) * p;
    (0..total)
        .map(|j| {
            let (t, r) = (j / p, j % p);
            if t == 0 {
                src[j]
            } else if t < tiles && r < k {
                raw[r] + corr
            } else if t >= tiles {
                src[p + r]
            } else {
                src[r]
            }
        })
        .collect()
}

fn samples(max_len: usize) -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(-100.0f64..100.0, 2..max_len)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(300))]

    #[test]
    fn moving_average_matches_window_sums(x in samples(400), w in 1usize..40) {
        let w = w.min(x.len());
        let got = moving_average(&profile(10.0, x.clone()), w).unwrap();
        for (a, b) in got.samples.iter().zip(brute_moving_average(&x, w)) {
            prop_assert!(close(*a, b), "{} vs {}", a, b);
        }
    }

    #[test]
    fn stats_match_two_pass_formulas(x in samples(400), rate in 0.5f64..50.0, v in 5.0f64..30.0) {
        let p = profile(rate, x.clone());
        let s = profile_stats(&p, v).unwrap();
        let n = x.len() as f64;
        let mean = x.iter().sum::<f64>() / n;
        let var = x.iter().map(|y| (y - mean).powi(2)).sum::<f64>() / n;
        let charge = x.iter().map(|y| y / rate).sum::<f64>() / 3600.0;
        prop_assert!(close(s.mean_current, mean));
        prop_assert!(close(s.rms_current, (x.iter().map(|y| y * y).sum::<f64>() / n).sqrt()));
        prop_assert!(close(s.ripple_std, var.sqrt()));
        prop_assert!(close(s.charge_throughput, charge));
        prop_assert!(close(s.energy_estimate, charge * v));
        prop_assert_eq!(s.peak, x.iter().fold(0.0f64, |m, y| m.max(y.abs())));
    }

    #[test]
    fn reconstruction_matches_positional_construction(
        x in samples(120),
        stretch in 1.0f64..6.0,
        k in 0usize..12,
    ) {
        let p = profile(10.0, x.clone());
        let seg = SegmentLabel { start: 0, end: x.len(), tag: MotionTag::Hover };
        let target_s = x.len() as f64 / 10.0 * stretch;
        let stitch = if k == 0 { Stitch::Repeat } else { Stitch::Crossfade { k } };
        let got = periodic_reconstruct(&p, &seg, target_s, stitch).unwrap();
        let target = (target_s * 10.0 - 1e-9).ceil() as usize;
        let want = brute_reconstruct(&x, target.max(x.len()), k.min(x.len() / 2));
        prop_assert_eq!(got.samples.len(), want.len());
        for (a, b) in got.samples.iter().zip(&want) {
            prop_assert!(close(*a, *b), "{} vs {}", a, b);
        }
        prop_assert_eq!(got.label, Some(MotionTag::Hover));
    }

    #[test]
    fn crossfade_keeps_the_segment_mean(x in prop::collection::vec(5.0f64..40.0, 10..200), k in 1usize..10) {
        let p = profile(10.0, x.clone());
        let seg = SegmentLabel { start: 0, end: x.len(), tag: MotionTag::Vertical };
        let out = periodic_reconstruct(&p, &seg, x.len() as f64 / 10.0 * 4.5, Stitch::Crossfade { k }).unwrap();
        let m_in = x.iter().sum::<f64>() / x.len() as f64;
        let m_out = out.samples.iter().sum::<f64>() / out.len() as f64;
        prop_assert!((m_out - m_in).abs() <= 0.01 * m_in.abs());
    }

    #[test]
    fn repeat_tiles_reproduce_segment_and_charge(
        x in samples(100),
        tiles in 1usize..6,
        offset in 0usize..20,
    ) {
        let mut padded = vec![0.0; offset];
        padded.extend_from_slice(&x);
        let p = profile(10.0, padded);
        let seg = SegmentLabel { start: offset, end: offset + x.len(), tag: MotionTag::Other };
        let out = periodic_reconstruct(&p, &seg, (tiles * x.len()) as f64 / 10.0, Stitch::Repeat).unwrap();
        prop_assert_eq!(out.len(), tiles * x.len());
        for chunk in out.samples.chunks(x.len()) {
            prop_assert_eq!(chunk, &x[..]);
        }
        let one = profile_stats(&profile(10.0, x.clone()), 1.0).unwrap().charge_throughput;
        let all = profile_stats(&out, 1.0).unwrap().charge_throughput;
        prop_assert!((all - tiles as f64 * one).abs() <= 1e-9 * one.abs().max(1e-12) + 1e-15);
    }

    #[test]
    fn label_segments_are_sorted_disjoint_and_complete(
        raw in prop::collection::vec((0u32..300, 1u32..300, 0usize..4), 0..20),
        shuffle_seed in any::<u64>(),
    ) {
        // Build non-overlapping intervals on the sample grid, end to end with gaps.
        let mut t = 0.0;
        let mut labels = Vec::new();
        for (gap, len, tag) in &raw {
            let start = t + *gap as f64 / 10.0;
            let end = start + *len as f64 / 10.0;
            labels.push(LabelInterval { start_s: start, end_s: end, tag: TAGS[*tag] });
            t = end;
        }
        let n = ((t * 10.0).ceil() as usize).max(1) + 5;
        let mut order: Vec<usize> = (0..labels.len()).collect();
        let mut s = shuffle_seed;
        for i in (1..order.len()).rev() {
            s = s.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            order.swap(i, (s >> 33) as usize % (i + 1));
        }
        let shuffled: Vec<LabelInterval> = order.iter().map(|&i| labels[i].clone()).collect();
        let p = profile(10.0, vec![15.0; n]);
        let segs = segment(&p, &SegmentMode::LabelFile { labels: shuffled }).unwrap();
        prop_assert_eq!(segs.len(), labels.len());
        for w in segs.windows(2) {
            prop_assert!(w[0].end <= w[1].start);
        }
        for (s, l) in segs.iter().zip(&labels) {
            prop_assert!(s.start < s.end && s.end <= n);
            prop_assert_eq!(s.tag, l.tag);
        }
    }

    #[test]
    fn threshold_segments_are_sorted_disjoint_and_long_enough(
        levels in prop::collection::vec((0usize..4, 20usize..200), 1..12),
        noise in prop::collection::vec(-1.0f64..1.0, 2400),
    ) {
        let base = [16.0, 17.0, 22.0, 40.0];
        let mut x = Vec::new();
        for (lvl, len) in &levels {
            for j in 0..*len {
                let ripple = if *lvl == 2 { if (x.len() / 10) % 3 == 0 { 12.0 } else { -6.0 } } else { 0.0 };
                x.push(base[*lvl] + ripple + 0.3 * noise[(x.len() + j) % noise.len()]);
            }
        }
        let p = profile(10.0, x);
        let cfg = ThresholdConfig::default();
        let segs = segment(&p, &SegmentMode::Threshold(cfg.clone())).unwrap();
        for w in segs.windows(2) {
            prop_assert!(w[0].end <= w[1].start);
        }
        for s in &segs {
            prop_assert!(s.end <= p.len());
            prop_assert!(s.len() as f64 >= cfg.min_duration_s * 10.0 - 1e-9);
            prop_assert!(cfg.bands.iter().any(|b| b.tag == s.tag));
        }
    }

    #[test]
    fn profile_files_round_trip(x in samples(300), rate in prop::sample::select(vec![1.0, 5.0, 10.0, 50.0])) {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("p.csv");
        let mut p = profile(rate, x);
        p.label = Some(MotionTag::Horizontal);
        write_profile(&path, &p).unwrap();
        let back = read_profile(&path).unwrap();
        prop_assert_eq!(back.samples, p.samples);
        prop_assert_eq!(back.sample_rate, p.sample_rate);
        prop_assert_eq!(back.label, p.label);
    }
}

#[test]
fn overlapping_labels_are_rejected() {
    let p = profile(10.0, vec![15.0; 500]);
    let labels = vec![
        LabelInterval { start_s: 0.0, end_s: 20.0, tag: MotionTag::Hover },
        LabelInterval { start_s: 10.0, end_s: 30.0, tag: MotionTag::Vertical },
    ];
    assert!(segment(&p, &SegmentMode::LabelFile { labels }).is_err());
}

#[test]
fn synthetic_log_segments_into_three_motions() {
    let log = synthetic_flight_log(1);
    let raw = parse_log_str(&log.csv, &ParseOptions::default()).unwrap();
    assert_eq!(raw.sample_rate, 10.0);
    let filtered = moving_average(&raw, 10).unwrap();
    let segs = segment(&filtered, &SegmentMode::Threshold(ThresholdConfig::default())).unwrap();
    for tag in [MotionTag::Hover, MotionTag::Vertical, MotionTag::Horizontal] {
        assert!(segs.iter().any(|s| s.tag == tag), "{tag} missing");
    }
    // Most of the flight time is classified as the labelled motion.
    let mut agree = 0;
    for s in &segs {
        for i in s.start..s.end {
            let t = i as f64 / 10.0;
            if log.labels.iter().any(|l| l.tag == s.tag && t >= l.start_s && t < l.end_s) {
                agree += 1;
            }
        }
    }
    assert!(agree as f64 > 0.8 * raw.len() as f64, "{agree} of {}", raw.len());
}
