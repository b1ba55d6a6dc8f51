//! Budget-limited active learning over a bag stream.
//!
//! Each step predicts the incoming bag on the current model, folds the
//! outcome into the prequential (online) accuracy, and only then decides
//! whether to spend one of the budgeted annotation queries. A queried bag is
//! fed back into the model; an unqueried bag leaves the model untouched.
//!
//! The query decision depends on the variant:
//! * `Full` — annotate everything (the budget is treated as 1).
//! * `Rnd` — annotate with probability equal to the budget.
//! * `VarUn` — variable-uncertainty thresholding on the prediction
//!   confidence.
//! * `VarUnFix` — `VarUn` with a hard cap on the model size.
//!
//! All variants respect a hard rate bound: a query is permitted at step `i`
//! only while `(b + 1) / i <= B`, counting prior queries `b` from the start
//! of the stream.

use std::collections::HashMap;
use std::io::Write;
use std::str::FromStr;

use rand::Rng;

use crate::error::{Error, Result};
use crate::model::CoverModel;
use crate::types::VideoBag;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Variant {
    Full,
    Rnd,
    VarUn,
    VarUnFix,
}

impl Variant {
    pub const ALL: [Variant; 4] = [Variant::Full, Variant::Rnd, Variant::VarUn, Variant::VarUnFix];

    pub fn as_str(&self) -> &'static str {
        match self {
            Variant::Full => "full",
            Variant::Rnd => "rnd",
            Variant::VarUn => "varun",
            Variant::VarUnFix => "varunfix",
        }
    }
}

impl std::fmt::Display for Variant {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Variant {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "full" => Ok(Variant::Full),
            "rnd" | "random" => Ok(Variant::Rnd),
            "varun" => Ok(Variant::VarUn),
            "varunfix" => Ok(Variant::VarUnFix),
            other => Err(Error::invalid(
                "variant",
                format!("`{other}` is not one of full, rnd, varun, varunfix"),
            )),
        }
    }
}

/// Threshold state of the variable-uncertainty strategy plus the query
/// budget bookkeeping.
#[derive(Debug, Clone, PartialEq)]
pub struct ActiveState {
    /// Confidence threshold Θ; starts at 1 and stays positive.
    pub threshold: f64,
    /// Multiplicative threshold step τ in (0, 1].
    pub tau: f64,
    /// Budget B in (0, 1]: hard upper bound on the query rate.
    pub budget: f64,
    /// Bags observed so far (i).
    pub videos_seen: u64,
    /// Labels requested so far (b).
    pub labels_requested: u64,
}

pub const DEFAULT_TAU: f64 = 0.01;

impl ActiveState {
    pub fn new(budget: f64, tau: f64) -> Result<Self> {
        if !(budget > 0.0 && budget <= 1.0) {
            return Err(Error::invalid("budget", format!("{budget} not in (0, 1]")));
        }
        if !(tau > 0.0 && tau <= 1.0) {
            return Err(Error::invalid("tau", format!("{tau} not in (0, 1]")));
        }
        Ok(ActiveState {
            threshold: 1.0,
            tau,
            budget,
            videos_seen: 0,
            labels_requested: 0,
        })
    }

    /// Like [`new`](Self::new), but `Full` pins the budget to 1 since it
    /// annotates every bag by definition.
    pub fn for_variant(variant: Variant, budget: f64, tau: f64) -> Result<Self> {
        let budget = match variant {
            Variant::Full => 1.0,
            _ => budget,
        };
        Self::new(budget, tau)
    }

    /// Fraction of observed bags whose labels were requested.
    pub fn query_rate(&self) -> f64 {
        if self.videos_seen == 0 {
            0.0
        } else {
            self.labels_requested as f64 / self.videos_seen as f64
        }
    }

    /// Whether one more query at the current step would still respect the
    /// budget. `videos_seen` must already count the current bag.
    fn budget_allows(&self) -> bool {
        (self.labels_requested + 1) as f64 <= self.budget * self.videos_seen as f64
    }
}

/// One variable-uncertainty decision: query iff `confidence < Θ`, then move
/// Θ down by τ after a query and up by τ after a confident skip.
pub fn var_un_decide(state: &mut ActiveState, confidence: f64) -> bool {
    debug_assert!(confidence >= 0.0);
    if confidence < state.threshold {
        state.threshold *= 1.0 - state.tau;
        true
    } else {
        state.threshold *= 1.0 + state.tau;
        false
    }
}

/// Prequential accuracy recurrence `A_i = (1 - 1/i)·A_{i-1} + (1/i)·correct`.
pub fn online_accuracy_update(prev: f64, i: u64, correct: bool) -> f64 {
    debug_assert!(i >= 1);
    let inv = 1.0 / i as f64;
    (1.0 - inv) * prev + if correct { inv } else { 0.0 }
}

/// Source of true labels, standing in for the human annotator.
pub trait LabelOracle {
    fn true_label(&self, bag_id: &str) -> Option<&str>;
}

/// Oracle backed by a bag-id → label map.
#[derive(Debug, Clone, Default)]
pub struct MapOracle {
    labels: HashMap<String, String>,
}

impl MapOracle {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn insert(&mut self, bag_id: impl Into<String>, label: impl Into<String>) {
        self.labels.insert(bag_id.into(), label.into());
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }
}

impl LabelOracle for MapOracle {
    fn true_label(&self, bag_id: &str) -> Option<&str> {
        self.labels.get(bag_id).map(String::as_str)
    }
}

/// Everything recorded about one stream step.
#[derive(Debug, Clone, PartialEq)]
pub struct StepRecord {
    /// 1-based stream position.
    pub index: u64,
    /// Predicted label name, `None` while the model is empty.
    pub predicted: Option<String>,
    /// True label, recorded only when it was actually requested.
    pub true_label: Option<String>,
    pub queried: bool,
    pub correct: bool,
    pub confidence: f64,
    pub threshold: f64,
    pub balls: usize,
    pub query_rate: f64,
    pub online_accuracy: f64,
}

/// Running prequential statistics and the per-step log.
#[derive(Debug, Clone, Default)]
pub struct StreamStats {
    pub online_accuracy: f64,
    pub videos_seen: u64,
    pub log: Vec<StepRecord>,
}

impl StreamStats {
    pub fn new() -> Self {
        Self::default()
    }

    /// Writes the step log as CSV with a version line and a header row.
    pub fn write_csv(&self, mut w: impl Write) -> std::io::Result<()> {
        writeln!(w, "# steplog v1")?;
        writeln!(
            w,
            "index,predicted,true_label,queried,confidence,theta,balls,query_rate,online_accuracy"
        )?;
        for r in &self.log {
            writeln!(
                w,
                "{},{},{},{},{},{},{},{},{}",
                r.index,
                r.predicted.as_deref().unwrap_or("?"),
                r.true_label.as_deref().unwrap_or(""),
                u8::from(r.queried),
                r.confidence,
                r.threshold,
                r.balls,
                r.query_rate,
                r.online_accuracy,
            )?;
        }
        Ok(())
    }
}

/// Advances one stream step: predict, score, then maybe query and learn.
///
/// The RNG is consumed only by the `Rnd` variant, which draws exactly once
/// per step whether or not it queries.
pub fn stream_step(
    model: &mut CoverModel,
    state: &mut ActiveState,
    stats: &mut StreamStats,
    bag: &VideoBag,
    oracle: &dyn LabelOracle,
    variant: Variant,
    rng: &mut impl Rng,
) -> Result<StepRecord> {
    let truth = oracle
        .true_label(bag.id())
        .ok_or_else(|| Error::OracleMiss(bag.id().to_string()))?
        .to_string();

    state.videos_seen += 1;
    let i = state.videos_seen;

    let prediction = model.predict_bag(bag)?;
    let predicted = prediction
        .predicted
        .and_then(|id| model.label_name(id))
        .map(str::to_string);
    let correct = predicted.as_deref() == Some(truth.as_str());
    stats.online_accuracy = online_accuracy_update(stats.online_accuracy, i, correct);
    stats.videos_seen = i;

    let rnd_draw: f64 = match variant {
        Variant::Rnd => rng.gen(),
        _ => 0.0,
    };
    let queried = match variant {
        Variant::Full => true,
        Variant::Rnd => state.budget_allows() && rnd_draw < state.budget,
        Variant::VarUn | Variant::VarUnFix => {
            // a budget-blocked step never consults the strategy, so Θ holds
            state.budget_allows() && var_un_decide(state, prediction.top_confidence)
        }
    };

    if queried {
        model.learn_bag(bag, &truth)?;
        state.labels_requested += 1;
    }

    let record = StepRecord {
        index: i,
        predicted,
        true_label: queried.then_some(truth),
        queried,
        correct,
        confidence: prediction.top_confidence,
        threshold: state.threshold,
        balls: model.num_balls(),
        query_rate: state.query_rate(),
        online_accuracy: stats.online_accuracy,
    };
    stats.log.push(record.clone());
    Ok(record)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{CoverModel, ModelConfig};
    use crate::types::FeatureVector;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn bag(id: &str, points: &[&[f64]], label: &str) -> VideoBag {
        let descriptors = points
            .iter()
            .map(|p| FeatureVector::new(p.to_vec()).unwrap())
            .collect();
        VideoBag::new(id, descriptors, Some(label.to_string())).unwrap()
    }

    fn oracle_for(bags: &[VideoBag]) -> MapOracle {
        let mut o = MapOracle::new();
        for b in bags {
            o.insert(b.id(), b.true_label().unwrap());
        }
        o
    }

    #[test]
    fn var_un_decide_examples() {
        let mut s = ActiveState::new(1.0, 0.01).unwrap();
        assert!(var_un_decide(&mut s, 0.4));
        assert_eq!(s.threshold, 0.99);

        let mut s = ActiveState::new(1.0, 0.01).unwrap();
        s.threshold = 0.5;
        assert!(!var_un_decide(&mut s, 0.8));
        assert!((s.threshold - 0.505).abs() < 1e-15);

        // boundary: confidence equal to Θ does not query
        let mut s = ActiveState::new(1.0, 0.01).unwrap();
        s.threshold = 0.7;
        assert!(!var_un_decide(&mut s, 0.7));
    }

    #[test]
    fn online_accuracy_examples() {
        assert_eq!(online_accuracy_update(0.0, 1, true), 1.0);
        assert_eq!(online_accuracy_update(1.0, 2, false), 0.5);
    }

    #[test]
    fn online_accuracy_matches_direct_mean() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..100 {
            let n = rng.gen_range(1..400usize);
            let flags: Vec<bool> = (0..n).map(|_| rng.gen_bool(0.6)).collect();
            let mut a = 0.0;
            for (i, &c) in flags.iter().enumerate() {
                a = online_accuracy_update(a, (i + 1) as u64, c);
            }
            let mean = flags.iter().filter(|&&c| c).count() as f64 / n as f64;
            assert!((a - mean).abs() < 1e-12);
        }
    }

    #[test]
    fn full_variant_always_queries() {
        let bags: Vec<VideoBag> = (0..10)
            .map(|i| bag(&format!("b{i}"), &[&[i as f64, 0.0]], "A"))
            .collect();
        let oracle = oracle_for(&bags);
        let mut model = CoverModel::with_defaults();
        let mut state = ActiveState::for_variant(Variant::Full, 0.05, 0.01).unwrap();
        assert_eq!(state.budget, 1.0); // Full pins the budget
        let mut stats = StreamStats::new();
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        for b in &bags {
            let r = stream_step(
                &mut model, &mut state, &mut stats, b, &oracle, Variant::Full, &mut rng,
            )
            .unwrap();
            assert!(r.queried);
        }
        assert_eq!(state.labels_requested, 10);
    }

    #[test]
    fn budget_gate_blocks_varun_regardless_of_confidence() {
        let mut model = CoverModel::with_defaults();
        let mut state = ActiveState::new(0.5, 0.01).unwrap();
        // pretend we already spent the allowance
        state.videos_seen = 3;
        state.labels_requested = 2;
        let mut stats = StreamStats::new();
        let b = bag("x", &[&[0.0]], "A");
        let mut oracle = MapOracle::new();
        oracle.insert("x", "A");
        let theta_before = state.threshold;
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let r = stream_step(
            &mut model, &mut state, &mut stats, &b, &oracle, Variant::VarUn, &mut rng,
        )
        .unwrap();
        // (2+1)/4 > 0.5 → blocked; Θ untouched; model untouched
        assert!(!r.queried);
        assert_eq!(state.threshold, theta_before);
        assert_eq!(model.num_balls(), 0);
    }

    #[test]
    fn cold_start_unknown_prediction_queries() {
        let mut model = CoverModel::with_defaults();
        let mut state = ActiveState::new(1.0, 0.01).unwrap();
        let mut stats = StreamStats::new();
        let b = bag("x", &[&[0.0]], "A");
        let mut oracle = MapOracle::new();
        oracle.insert("x", "A");
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let r = stream_step(
            &mut model, &mut state, &mut stats, &b, &oracle, Variant::VarUn, &mut rng,
        )
        .unwrap();
        assert!(r.queried); // confidence 0 < Θ = 1
        assert!(!r.correct); // unknown prediction scores as incorrect
        assert_eq!(r.predicted, None);
    }

    #[test]
    fn unqueried_step_leaves_model_bitwise_unchanged() {
        let mut model = CoverModel::with_defaults();
        // warm up so predictions are confident for "A"
        for i in 0..30 {
            model
                .learn_bag(&bag(&format!("w{i}"), &[&[0.0, 0.0]], "A"), "A")
                .unwrap();
        }
        model
            .learn_bag(&bag("w-far", &[&[100.0, 0.0]], "B"), "B")
            .unwrap();
        let before = model.snapshot().to_json();

        let mut state = ActiveState::new(1.0, 0.01).unwrap();
        state.threshold = 1e-9; // nothing is uncertain enough to query
        let mut stats = StreamStats::new();
        let b = bag("q", &[&[0.0, 0.0]], "A");
        let mut oracle = MapOracle::new();
        oracle.insert("q", "A");
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let r = stream_step(
            &mut model, &mut state, &mut stats, &b, &oracle, Variant::VarUn, &mut rng,
        )
        .unwrap();
        assert!(!r.queried);
        assert_eq!(model.snapshot().to_json(), before);
    }

    #[test]
    fn oracle_miss_aborts() {
        let mut model = CoverModel::with_defaults();
        let mut state = ActiveState::new(1.0, 0.01).unwrap();
        let mut stats = StreamStats::new();
        let b = bag("mystery", &[&[0.0]], "A");
        let oracle = MapOracle::new();
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let err = stream_step(
            &mut model, &mut state, &mut stats, &b, &oracle, Variant::Full, &mut rng,
        )
        .unwrap_err();
        assert!(matches!(err, Error::OracleMiss(_)));
    }

    #[test]
    fn rnd_is_reproducible_and_draws_every_step() {
        let bags: Vec<VideoBag> = (0..40)
            .map(|i| bag(&format!("b{i}"), &[&[(i % 7) as f64, 0.0]], "A"))
            .collect();
        let oracle = oracle_for(&bags);

        let run = |seed: u64| {
            let mut model = CoverModel::with_defaults();
            let mut state = ActiveState::new(0.3, 0.01).unwrap();
            let mut stats = StreamStats::new();
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            for b in &bags {
                stream_step(
                    &mut model, &mut state, &mut stats, b, &oracle, Variant::Rnd, &mut rng,
                )
                .unwrap();
            }
            (
                state.labels_requested,
                stats.online_accuracy,
                rng.gen::<u64>(),
            )
        };
        assert_eq!(run(7), run(7));
        // the trailing rng draw pins the number of draws consumed: one per
        // step, queried or not
        let (_, _, tail) = run(7);
        let mut reference = ChaCha8Rng::seed_from_u64(7);
        for _ in 0..40 {
            reference.gen::<f64>();
        }
        assert_eq!(tail, reference.gen::<u64>());
    }

    #[test]
    fn full_with_unlimited_cap_equals_plain_training() {
        let bags: Vec<VideoBag> = (0..25)
            .map(|i| {
                let label = if i % 2 == 0 { "A" } else { "B" };
                bag(
                    &format!("b{i}"),
                    &[&[(i % 5) as f64, (i % 4) as f64]],
                    label,
                )
            })
            .collect();
        let oracle = oracle_for(&bags);

        let mut streamed = CoverModel::with_defaults();
        let mut state = ActiveState::for_variant(Variant::Full, 1.0, 0.01).unwrap();
        let mut stats = StreamStats::new();
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        for b in &bags {
            stream_step(
                &mut streamed, &mut state, &mut stats, b, &oracle, Variant::Full, &mut rng,
            )
            .unwrap();
        }

        let mut plain = CoverModel::with_defaults();
        for b in &bags {
            plain.learn_bag(b, b.true_label().unwrap()).unwrap();
        }
        assert_eq!(streamed.snapshot().to_json(), plain.snapshot().to_json());
    }

    #[test]
    fn theta_trajectory_replays_from_log() {
        let bags: Vec<VideoBag> = (0..60)
            .map(|i| {
                let label = ["A", "B"][i % 2];
                bag(
                    &format!("b{i}"),
                    &[&[(i % 9) as f64, (i % 4) as f64]],
                    label,
                )
            })
            .collect();
        let oracle = oracle_for(&bags);
        let mut model = CoverModel::with_defaults();
        let mut state = ActiveState::new(0.6, 0.01).unwrap();
        let mut stats = StreamStats::new();
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        for b in &bags {
            stream_step(
                &mut model, &mut state, &mut stats, b, &oracle, Variant::VarUn, &mut rng,
            )
            .unwrap();
        }
        // replay: Θ depends only on the recorded confidence sequence
        let mut theta = 1.0;
        let mut b = 0u64;
        for (i, r) in stats.log.iter().enumerate() {
            let budget_ok = (b + 1) as f64 <= 0.6 * (i as u64 + 1) as f64;
            let mut queried = false;
            if budget_ok {
                if r.confidence < theta {
                    theta *= 0.99;
                    queried = true;
                    b += 1;
                } else {
                    theta *= 1.01;
                }
            }
            assert_eq!(r.threshold, theta, "step {i}");
            assert_eq!(r.queried, queried, "step {i}");
        }
    }

    #[test]
    fn step_log_csv_shape() {
        let bags: Vec<VideoBag> = (0..3)
            .map(|i| bag(&format!("b{i}"), &[&[i as f64]], "A"))
            .collect();
        let oracle = oracle_for(&bags);
        let mut model = CoverModel::with_defaults();
        let mut state = ActiveState::for_variant(Variant::Full, 1.0, 0.01).unwrap();
        let mut stats = StreamStats::new();
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        for b in &bags {
            stream_step(
                &mut model, &mut state, &mut stats, b, &oracle, Variant::Full, &mut rng,
            )
            .unwrap();
        }
        let mut out = Vec::new();
        stats.write_csv(&mut out).unwrap();
        let text = String::from_utf8(out).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines[0], "# steplog v1");
        assert!(lines[1].starts_with("index,predicted,true_label,queried"));
        assert_eq!(lines.len(), 2 + 3);
    }
}
