//! Continuous recognition over a frame stream.
//!
//! Class scores are computed over a short trailing window per frame; the
//! standard deviation of the resulting class probabilities dips where the
//! window straddles two actions, so segment boundaries are placed at
//! prominent local minima of the smoothed deviation curve. Each detected
//! span is then labeled from its own frames, and spans whose confidence
//! falls under a gate are emitted as unknown — supervision requests rather
//! than guesses.

use std::collections::HashSet;

use crate::error::{Error, Result};
use crate::model::{argmax_smallest, softmax_at, CoverModel};
use crate::types::FeatureVector;

/// Default scoring window (frames).
pub const DEFAULT_WINDOW: usize = 15;
/// Default width of the deviation-smoothing moving average (frames).
pub const DEFAULT_SMOOTHING: usize = 9;

/// Per-frame class probabilities and deviation curves for one sequence.
#[derive(Debug, Clone)]
pub struct ScoreSeries {
    /// Normalized class-probability vector per frame (windowed scores).
    pub probs: Vec<Vec<f64>>,
    /// Per-frame standard deviation of the class probabilities.
    pub stddev: Vec<f64>,
    /// Centered moving average of `stddev`.
    pub smoothed: Vec<f64>,
    /// Label names in class-id order, snapshot at scoring time.
    pub labels: Vec<String>,
    window: usize,
    /// Per-frame log smoothed posteriors of the frame's nearest ball.
    frame_logp: Vec<Vec<f64>>,
    /// Per-frame kernel weight against the nearest ball.
    frame_weight: Vec<f64>,
}

impl ScoreSeries {
    pub fn len(&self) -> usize {
        self.stddev.len()
    }

    pub fn is_empty(&self) -> bool {
        self.stddev.is_empty()
    }

    pub fn window(&self) -> usize {
        self.window
    }
}

/// One hypothesized action span; `label == None` is a supervision request.
#[derive(Debug, Clone, PartialEq)]
pub struct SegmentHypothesis {
    /// First frame of the span.
    pub start: usize,
    /// One past the last frame of the span.
    pub end: usize,
    pub label: Option<String>,
    pub confidence: f64,
}

/// Scores every frame of a sequence against a frozen model.
///
/// Frame `f` is scored over the trailing window `[f-window+1, f]` (clipped
/// at the start); the per-frame probability vector is the normalized
/// exponential of the window's distance-weighted mean log posteriors, which
/// for `window == 1` coincides with the single-frame bag confidence.
pub fn frame_scores(
    model: &CoverModel,
    frames: &[FeatureVector],
    window: usize,
    smoothing: usize,
) -> Result<ScoreSeries> {
    if frames.is_empty() {
        return Err(Error::EmptyInput("frames"));
    }
    if window == 0 {
        return Err(Error::invalid("window", "must be at least 1"));
    }
    if smoothing == 0 {
        return Err(Error::invalid("smoothing", "must be at least 1"));
    }
    if model.num_balls() == 0 {
        return Err(Error::EmptyModel);
    }
    let dim = model.dim().expect("nonempty model has a dimensionality");
    for f in frames {
        if f.dim() != dim {
            return Err(Error::DimensionMismatch {
                expected: dim,
                found: f.dim(),
            });
        }
    }

    let num_classes = model.num_classes();
    let mut frame_logp = Vec::with_capacity(frames.len());
    let mut frame_weight = Vec::with_capacity(frames.len());
    for f in frames {
        let (logp, w) = model
            .descriptor_terms(f.as_slice())
            .expect("model checked nonempty");
        frame_logp.push(logp);
        frame_weight.push(w);
    }

    let mut probs = Vec::with_capacity(frames.len());
    let mut stddev = Vec::with_capacity(frames.len());
    for f in 0..frames.len() {
        let start = (f + 1).saturating_sub(window);
        let len = (f - start + 1) as f64;
        let mut conf = vec![0.0; num_classes];
        for t in start..=f {
            for y in 0..num_classes {
                conf[y] += frame_weight[t] * frame_logp[t][y];
            }
        }
        for c in &mut conf {
            *c /= len;
        }
        let p = softmax_vec(&conf);
        stddev.push(population_std(&p));
        probs.push(p);
    }
    let smoothed = centered_moving_average(&stddev, smoothing);

    Ok(ScoreSeries {
        probs,
        stddev,
        smoothed,
        labels: model.labels().names().to_vec(),
        window,
        frame_logp,
        frame_weight,
    })
}

/// Cuts the sequence at prominent local minima of the smoothed deviation
/// curve, labels each span over its own frames, and gates low-confidence
/// spans to unknown.
///
/// A frame is a boundary when its smoothed deviation is strictly below both
/// neighbors and below `mean - 0.5·std` of the whole smoothed curve.
pub fn detect_segments(series: &ScoreSeries, gate: f64) -> Vec<SegmentHypothesis> {
    let n = series.len();
    let s = &series.smoothed;
    let m = mean(s);
    let sd = population_std_about(s, m);
    let prominence = m - 0.5 * sd;

    let mut cuts = Vec::new();
    for f in 1..n.saturating_sub(1) {
        if s[f] < s[f - 1] && s[f] < s[f + 1] && s[f] < prominence {
            cuts.push(f);
        }
    }

    let num_classes = series.labels.len();
    let mut segments = Vec::with_capacity(cuts.len() + 1);
    let mut start = 0usize;
    for cut in cuts.into_iter().chain(std::iter::once(n)) {
        if cut == start {
            continue;
        }
        let end = cut;
        let len = (end - start) as f64;
        let mut scores = vec![0.0; num_classes];
        let mut conf = vec![0.0; num_classes];
        for t in start..end {
            for y in 0..num_classes {
                scores[y] += series.frame_logp[t][y];
                conf[y] += series.frame_weight[t] * series.frame_logp[t][y];
            }
        }
        for c in &mut conf {
            *c /= len;
        }
        let best = argmax_smallest(&scores).expect("at least one class");
        let confidence = softmax_at(&conf, best);
        let label = (confidence >= gate).then(|| series.labels[best].clone());
        segments.push(SegmentHypothesis {
            start,
            end,
            label,
            confidence,
        });
        start = end;
    }
    segments
}

/// Minimal edit distance with a caller-supplied match predicate.
pub fn edit_distance_with<A, B>(a: &[A], b: &[B], eq: impl Fn(&A, &B) -> bool) -> usize {
    let mut prev: Vec<usize> = (0..=b.len()).collect();
    let mut cur = vec![0usize; b.len() + 1];
    for (i, ai) in a.iter().enumerate() {
        cur[0] = i + 1;
        for (j, bj) in b.iter().enumerate() {
            let cost = usize::from(!eq(ai, bj));
            cur[j + 1] = (cur[j] + 1).min(prev[j + 1] + 1).min(prev[j] + cost);
        }
        std::mem::swap(&mut prev, &mut cur);
    }
    prev[b.len()]
}

/// Edit distance (substitutions + deletions + insertions, unit costs)
/// divided by the ground-truth length.
pub fn levenshtein_error<T: PartialEq>(predicted: &[T], truth: &[T]) -> Result<f64> {
    if truth.is_empty() {
        return Err(Error::EmptyInput("ground truth"));
    }
    let dist = edit_distance_with(predicted, truth, |a, b| a == b);
    Ok(dist as f64 / truth.len() as f64)
}

/// Scores a detected segment sequence against a ground-truth label sequence.
///
/// Unknown segments are dropped before matching (a missed action then costs
/// a deletion), unless `unknown_matches` names labels an unknown segment may
/// stand for — supervision requests over those held-out classes then count
/// as correct.
pub fn sequence_error(
    segments: &[SegmentHypothesis],
    truth: &[String],
    unknown_matches: Option<&HashSet<String>>,
) -> Result<f64> {
    if truth.is_empty() {
        return Err(Error::EmptyInput("ground truth"));
    }
    let dist = match unknown_matches {
        None => {
            let kept: Vec<&str> = segments
                .iter()
                .filter_map(|s| s.label.as_deref())
                .collect();
            edit_distance_with(&kept, truth, |a, b| *a == b.as_str())
        }
        Some(set) => {
            let tokens: Vec<Option<&str>> = segments.iter().map(|s| s.label.as_deref()).collect();
            edit_distance_with(&tokens, truth, |a, b| match a {
                Some(name) => *name == b.as_str(),
                None => set.contains(b.as_str()),
            })
        }
    };
    Ok(dist as f64 / truth.len() as f64)
}

fn mean(values: &[f64]) -> f64 {
    values.iter().sum::<f64>() / values.len() as f64
}

fn population_std(values: &[f64]) -> f64 {
    population_std_about(values, mean(values))
}

fn population_std_about(values: &[f64], m: f64) -> f64 {
    let var = values.iter().map(|v| (v - m) * (v - m)).sum::<f64>() / values.len() as f64;
    var.sqrt()
}

fn softmax_vec(values: &[f64]) -> Vec<f64> {
    let max = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = values.iter().map(|v| (v - max).exp()).collect();
    let denom: f64 = exps.iter().sum();
    exps.into_iter().map(|e| e / denom).collect()
}

fn centered_moving_average(values: &[f64], width: usize) -> Vec<f64> {
    let half = width / 2;
    let n = values.len();
    (0..n)
        .map(|i| {
            let lo = i.saturating_sub(half);
            let hi = (i + half).min(n - 1);
            values[lo..=hi].iter().sum::<f64>() / (hi - lo + 1) as f64
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::synth::{generate, generate_frame_sequence, SynthSpec};

    fn spec(classes: usize) -> SynthSpec {
        SynthSpec {
            classes,
            dim: classes.max(2),
            separation: 8.0,
            sigma: 1.0,
            bags: 40 * classes,
            bag_len: (8, 12),
            ..Default::default()
        }
    }

    fn trained_model(classes: usize) -> CoverModel {
        let ds = generate(&spec(classes), 42).unwrap();
        let mut m = CoverModel::with_defaults();
        for bag in ds.bags() {
            m.learn_bag(bag, bag.true_label().unwrap()).unwrap();
        }
        assert_eq!(m.num_classes(), classes);
        m
    }

    #[test]
    fn window_one_equals_single_frame_confidence() {
        let model = trained_model(3);
        let (frames, _, _) = generate_frame_sequence(&spec(3), &[1], (6, 6), 7).unwrap();
        let series = frame_scores(&model, &frames, 1, 1).unwrap();
        for (f, frame) in frames.iter().enumerate() {
            let bag = crate::types::VideoBag::new("w", vec![frame.clone()], None).unwrap();
            let p = model.predict_bag(&bag).unwrap();
            let expected = softmax_vec(&p.confidences);
            assert_eq!(series.probs[f], expected, "frame {f}");
        }
    }

    #[test]
    fn probability_vectors_are_normalized() {
        let model = trained_model(3);
        let (frames, _, _) =
            generate_frame_sequence(&spec(3), &[0, 2], (40, 40), 9).unwrap();
        let series = frame_scores(&model, &frames, DEFAULT_WINDOW, DEFAULT_SMOOTHING).unwrap();
        for p in &series.probs {
            let sum: f64 = p.iter().sum();
            assert!((sum - 1.0).abs() < 1e-9);
        }
        for &s in &series.stddev {
            assert!(s >= 0.0);
        }
    }

    #[test]
    fn switch_produces_local_minimum_near_boundary() {
        let model = trained_model(2);
        // two-class piecewise stream switching at frame 100
        let (frames, _, bounds) =
            generate_frame_sequence(&spec(2), &[0, 1], (100, 100), 3).unwrap();
        assert_eq!(bounds, vec![100]);
        let w = DEFAULT_WINDOW;
        let series = frame_scores(&model, &frames, w, DEFAULT_SMOOTHING).unwrap();
        let s = &series.smoothed;
        let in_window = (100 - w..=100 + w).any(|f| {
            f >= 1 && f + 1 < s.len() && s[f] < s[f - 1] && s[f] < s[f + 1]
        });
        assert!(in_window, "no local minimum within ±{w} of the switch");
    }

    #[test]
    fn constant_single_class_stream_yields_one_segment() {
        // a model that only knows one class scores every frame [1.0]:
        // the deviation curve is identically zero, so no strict minima
        let ds = generate(
            &SynthSpec {
                classes: 1,
                dim: 2,
                bags: 30,
                bag_len: (5, 5),
                ..Default::default()
            },
            1,
        )
        .unwrap();
        let mut model = CoverModel::with_defaults();
        for bag in ds.bags() {
            model.learn_bag(bag, bag.true_label().unwrap()).unwrap();
        }
        let (frames, _, _) = generate_frame_sequence(
            &SynthSpec {
                classes: 1,
                dim: 2,
                ..Default::default()
            },
            &[0],
            (120, 120),
            5,
        )
        .unwrap();
        let series = frame_scores(&model, &frames, DEFAULT_WINDOW, DEFAULT_SMOOTHING).unwrap();
        let segments = detect_segments(&series, 0.0);
        assert_eq!(segments.len(), 1);
        assert_eq!((segments[0].start, segments[0].end), (0, 120));
    }

    #[test]
    fn three_actions_detected_with_correct_labels() {
        let model = trained_model(3);
        let (frames, truth, bounds) =
            generate_frame_sequence(&spec(3), &[0, 1, 2], (70, 90), 11).unwrap();
        let series = frame_scores(&model, &frames, DEFAULT_WINDOW, DEFAULT_SMOOTHING).unwrap();
        let segments = detect_segments(&series, 0.4);
        assert_eq!(segments.len(), 3, "expected three spans");
        let labels: Vec<&str> = segments.iter().filter_map(|s| s.label.as_deref()).collect();
        assert_eq!(labels, truth.iter().map(String::as_str).collect::<Vec<_>>());
        for (seg, &truth_bound) in segments[1..].iter().zip(&bounds) {
            let err = seg.start.abs_diff(truth_bound);
            assert!(
                err <= DEFAULT_WINDOW,
                "boundary {} vs truth {truth_bound}",
                seg.start
            );
        }
    }

    #[test]
    fn held_out_class_is_gated_to_unknown() {
        // train on classes 0 and 1 only; stream class 2
        let full_spec = spec(3);
        let ds = generate(&full_spec, 21).unwrap();
        let mut model = CoverModel::with_defaults();
        for bag in ds.bags() {
            let label = bag.true_label().unwrap();
            if label != "c2" {
                model.learn_bag(bag, label).unwrap();
            }
        }
        let (frames, _, _) = generate_frame_sequence(&full_spec, &[2], (60, 60), 13).unwrap();
        let series = frame_scores(&model, &frames, DEFAULT_WINDOW, DEFAULT_SMOOTHING).unwrap();
        let segments = detect_segments(&series, 0.75);
        assert!(!segments.is_empty());
        assert!(
            segments.iter().all(|s| s.label.is_none()),
            "held-out class should request supervision: {segments:?}"
        );
    }

    #[test]
    fn segments_partition_every_frame() {
        let model = trained_model(3);
        let (frames, _, _) =
            generate_frame_sequence(&spec(3), &[0, 2, 1, 0], (30, 60), 17).unwrap();
        let series = frame_scores(&model, &frames, DEFAULT_WINDOW, DEFAULT_SMOOTHING).unwrap();
        let segments = detect_segments(&series, 0.4);
        let mut covered = 0;
        for (i, seg) in segments.iter().enumerate() {
            assert!(seg.start < seg.end);
            assert_eq!(seg.start, covered, "segment {i} not contiguous");
            covered = seg.end;
        }
        assert_eq!(covered, frames.len());
    }

    #[test]
    fn raising_gate_never_decreases_unknowns() {
        let model = trained_model(3);
        let (frames, _, _) =
            generate_frame_sequence(&spec(3), &[0, 1, 2], (40, 60), 23).unwrap();
        let series = frame_scores(&model, &frames, DEFAULT_WINDOW, DEFAULT_SMOOTHING).unwrap();
        let mut prev_unknowns = 0;
        for gate in [0.0, 0.3, 0.6, 0.9, 1.01] {
            let segments = detect_segments(&series, gate);
            let unknowns = segments.iter().filter(|s| s.label.is_none()).count();
            assert!(unknowns >= prev_unknowns, "gate {gate}");
            prev_unknowns = unknowns;
        }
    }

    #[test]
    fn levenshtein_examples() {
        let gt = ["grasp", "move", "release"];
        assert_eq!(levenshtein_error(&gt, &gt).unwrap(), 0.0);
        assert!(
            (levenshtein_error(&["grasp", "release"], &gt).unwrap() - 1.0 / 3.0).abs() < 1e-15
        );
        let empty: [&str; 0] = [];
        assert_eq!(levenshtein_error(&empty, &gt).unwrap(), 1.0);
        assert!(levenshtein_error(&gt, &empty).is_err());
    }

    #[test]
    fn sequence_error_unknown_policies() {
        let segs = vec![
            SegmentHypothesis {
                start: 0,
                end: 10,
                label: Some("a".into()),
                confidence: 0.9,
            },
            SegmentHypothesis {
                start: 10,
                end: 20,
                label: None,
                confidence: 0.2,
            },
            SegmentHypothesis {
                start: 20,
                end: 30,
                label: Some("c".into()),
                confidence: 0.8,
            },
        ];
        let truth = vec!["a".to_string(), "b".to_string(), "c".to_string()];
        // default: the unknown drops out, costing one deletion
        let err = sequence_error(&segs, &truth, None).unwrap();
        assert!((err - 1.0 / 3.0).abs() < 1e-15);
        // with b marked held-out, the supervision request is correct
        let held: HashSet<String> = ["b".to_string()].into();
        assert_eq!(sequence_error(&segs, &truth, Some(&held)).unwrap(), 0.0);
    }

    mod properties {
        use super::*;
        use proptest::prelude::*;

        fn tokens() -> impl Strategy<Value = Vec<u8>> {
            proptest::collection::vec(0u8..4, 0..12)
        }

        proptest! {
            #[test]
            fn error_scales_symmetrically(a in tokens(), b in tokens()) {
                prop_assume!(!a.is_empty() && !b.is_empty());
                let e_ab = levenshtein_error(&a, &b).unwrap();
                let e_ba = levenshtein_error(&b, &a).unwrap();
                // distance symmetry: error(a,b)·|b| == error(b,a)·|a|
                prop_assert!((e_ab * b.len() as f64 - e_ba * a.len() as f64).abs() < 1e-9);
            }

            #[test]
            fn self_error_is_zero(a in tokens()) {
                prop_assume!(!a.is_empty());
                prop_assert_eq!(levenshtein_error(&a, &a).unwrap(), 0.0);
            }
        }
    }
}
