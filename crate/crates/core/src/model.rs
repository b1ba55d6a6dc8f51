//! The incremental ball-cover learner.
//!
//! The feature space is covered online by balls, each carrying a center, an
//! adaptive radius, a mistake count, and per-class counts. Training consumes
//! labeled bags descriptor by descriptor: a descriptor inside its nearest
//! ball updates that ball (shrinking the radius on a local mistake, nudging
//! the center toward the running mean on a correct call), while a descriptor
//! outside it founds a new ball whose radius is the distance to that nearest
//! center. When a cap on the number of balls is set, balls are evicted at
//! random with probability proportional to `mistakes + 1`.
//!
//! Bag prediction accumulates log posteriors of each descriptor's nearest
//! ball, and the confidence measure weights those log posteriors by a
//! Gaussian kernel of the descriptor-to-center distance.

use std::collections::BTreeMap;

use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::index::{BallId, KdIndex, LinearIndex, Neighbor, NnIndex};
use crate::types::{sq_dist, ClassId, LabelTable, VideoBag};

/// Index backend selection; the linear scan exists for oracle testing.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum IndexBackend {
    #[default]
    KdTree,
    LinearScan,
}

#[derive(Debug, Clone)]
pub(crate) enum Backend {
    Kd(KdIndex),
    Linear(LinearIndex),
}

impl Backend {
    fn new(kind: IndexBackend) -> Self {
        match kind {
            IndexBackend::KdTree => Backend::Kd(KdIndex::new()),
            IndexBackend::LinearScan => Backend::Linear(LinearIndex::new()),
        }
    }

    fn as_index(&self) -> &dyn NnIndex {
        match self {
            Backend::Kd(i) => i,
            Backend::Linear(i) => i,
        }
    }

    fn as_index_mut(&mut self) -> &mut dyn NnIndex {
        match self {
            Backend::Kd(i) => i,
            Backend::Linear(i) => i,
        }
    }
}

/// Model construction knobs. Everything else is data-driven.
#[derive(Debug, Clone)]
pub struct ModelConfig {
    /// Cap on the number of balls; `None` disables eviction.
    pub max_balls: Option<usize>,
    /// Seed of the model's own RNG (used only by eviction).
    pub seed: u64,
    /// When true (default), the reported top confidence is the softmax of
    /// the per-class confidence scores; when false it is the raw
    /// exponential of the top score.
    pub normalized_confidence: bool,
    pub backend: IndexBackend,
}

impl Default for ModelConfig {
    fn default() -> Self {
        ModelConfig {
            max_balls: None,
            seed: 0,
            normalized_confidence: true,
            backend: IndexBackend::KdTree,
        }
    }
}

/// One cover element with its local class statistics.
#[derive(Debug, Clone, PartialEq)]
pub struct Ball {
    id: BallId,
    center: Vec<f64>,
    /// Radius at creation time (R).
    initial_radius: f64,
    /// Current radius: `R * max(m, 1)^(-1/4)`.
    radius: f64,
    /// Number of local prediction mistakes (m).
    mistakes: u64,
    /// Per-class sample counts, indexed by dense class id.
    counts: Vec<u64>,
    /// Total samples counted into this ball.
    total: u64,
    /// Samples averaged into the center (creation sample plus every
    /// correctly predicted member).
    center_samples: u64,
}

impl Ball {
    fn new(id: BallId, center: Vec<f64>, radius: f64, label: ClassId) -> Self {
        let mut counts = vec![0; label.0 as usize + 1];
        counts[label.0 as usize] = 1;
        Ball {
            id,
            center,
            initial_radius: radius,
            radius,
            mistakes: 0,
            counts,
            total: 1,
            center_samples: 1,
        }
    }

    pub(crate) fn from_parts(
        id: BallId,
        center: Vec<f64>,
        initial_radius: f64,
        radius: f64,
        mistakes: u64,
        counts: Vec<u64>,
        center_samples: u64,
    ) -> Self {
        let total = counts.iter().sum();
        Ball {
            id,
            center,
            initial_radius,
            radius,
            mistakes,
            counts,
            total,
            center_samples,
        }
    }

    pub fn id(&self) -> BallId {
        self.id
    }

    pub fn center(&self) -> &[f64] {
        &self.center
    }

    pub fn initial_radius(&self) -> f64 {
        self.initial_radius
    }

    pub fn radius(&self) -> f64 {
        self.radius
    }

    pub fn mistakes(&self) -> u64 {
        self.mistakes
    }

    pub fn center_samples(&self) -> u64 {
        self.center_samples
    }

    pub fn total_count(&self) -> u64 {
        self.total
    }

    pub fn count(&self, y: ClassId) -> u64 {
        self.counts.get(y.0 as usize).copied().unwrap_or(0)
    }

    pub(crate) fn counts(&self) -> &[u64] {
        &self.counts
    }

    /// Raw class posterior `n_s(y) / n_s`; zero for classes unseen locally.
    pub fn class_posterior(&self, y: ClassId) -> f64 {
        debug_assert!(self.total >= 1);
        self.count(y) as f64 / self.total as f64
    }

    /// Add-one smoothed posterior `(n_s(y) + 1) / (n_s + |Y|)` over the
    /// current global label set; strictly positive, so logs stay finite.
    pub fn smoothed_posterior(&self, y: ClassId, num_classes: usize) -> f64 {
        debug_assert!(num_classes >= 1);
        (self.count(y) + 1) as f64 / (self.total + num_classes as u64) as f64
    }

    /// Locally most frequent class, smallest id on ties.
    fn local_argmax(&self) -> ClassId {
        let mut best = 0usize;
        for (i, &c) in self.counts.iter().enumerate() {
            if c > self.counts[best] {
                best = i;
            }
        }
        ClassId(best as u32)
    }

    fn bump(&mut self, y: ClassId) {
        let idx = y.0 as usize;
        if idx >= self.counts.len() {
            self.counts.resize(idx + 1, 0);
        }
        self.counts[idx] += 1;
        self.total += 1;
    }

    fn record_mistake(&mut self) {
        self.mistakes += 1;
        self.radius = self.initial_radius * (self.mistakes as f64).powf(-0.25);
    }
}

/// Outcome of learning one bag.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct UpdateReport {
    pub balls_created: usize,
    pub mistakes: usize,
    pub evicted: Vec<BallId>,
    pub new_label: bool,
}

/// Prediction for one bag. Score and confidence vectors are indexed by dense
/// class id; both are empty iff the model was empty (`predicted == None`).
#[derive(Debug, Clone, PartialEq)]
pub struct BagPrediction {
    /// Winning class, or `None` when the model holds no balls yet.
    pub predicted: Option<ClassId>,
    /// Per-class sums of log smoothed posteriors over the bag.
    pub log_scores: Vec<f64>,
    /// Per-class distance-weighted mean log posteriors; always `<= 0`.
    pub confidences: Vec<f64>,
    /// Confidence of the predicted class in `(0, 1]`, or `0.0` when unknown.
    pub top_confidence: f64,
}

impl BagPrediction {
    fn unknown() -> Self {
        BagPrediction {
            predicted: None,
            log_scores: Vec::new(),
            confidences: Vec::new(),
            top_confidence: 0.0,
        }
    }
}

/// The set of balls, the label table, and the index over centers.
#[derive(Debug, Clone)]
pub struct CoverModel {
    config: ModelConfig,
    dim: Option<usize>,
    balls: BTreeMap<BallId, Ball>,
    labels: LabelTable,
    index: Backend,
    /// Saved first descriptor of the cold start, consumed by the first ball.
    pending_first: Option<Vec<f64>>,
    next_ball: u64,
    rng: ChaCha8Rng,
}

impl CoverModel {
    pub fn new(config: ModelConfig) -> Self {
        let rng = ChaCha8Rng::seed_from_u64(config.seed);
        let index = Backend::new(config.backend);
        CoverModel {
            config,
            dim: None,
            balls: BTreeMap::new(),
            labels: LabelTable::new(),
            index,
            pending_first: None,
            next_ball: 0,
            rng,
        }
    }

    pub fn with_defaults() -> Self {
        Self::new(ModelConfig::default())
    }

    pub fn config(&self) -> &ModelConfig {
        &self.config
    }

    pub fn num_balls(&self) -> usize {
        self.balls.len()
    }

    pub fn num_classes(&self) -> usize {
        self.labels.len()
    }

    pub fn dim(&self) -> Option<usize> {
        self.dim
    }

    pub fn labels(&self) -> &LabelTable {
        &self.labels
    }

    pub fn label_name(&self, id: ClassId) -> Option<&str> {
        self.labels.name(id)
    }

    pub fn balls(&self) -> impl Iterator<Item = &Ball> {
        self.balls.values()
    }

    pub fn ball(&self, id: BallId) -> Option<&Ball> {
        self.balls.get(&id)
    }

    pub(crate) fn parts(
        &self,
    ) -> (
        &ModelConfig,
        Option<usize>,
        &BTreeMap<BallId, Ball>,
        &LabelTable,
        &Option<Vec<f64>>,
        u64,
        &ChaCha8Rng,
    ) {
        (
            &self.config,
            self.dim,
            &self.balls,
            &self.labels,
            &self.pending_first,
            self.next_ball,
            &self.rng,
        )
    }

    /// Rebuilds a model from stored parts; used by the snapshot loader.
    pub(crate) fn from_parts(
        config: ModelConfig,
        dim: Option<usize>,
        balls: Vec<Ball>,
        labels: LabelTable,
        pending_first: Option<Vec<f64>>,
        next_ball: u64,
        rng: ChaCha8Rng,
    ) -> Result<Self> {
        let mut index = Backend::new(config.backend);
        let mut map = BTreeMap::new();
        for ball in balls {
            index.as_index_mut().insert(ball.id, &ball.center)?;
            map.insert(ball.id, ball);
        }
        Ok(CoverModel {
            config,
            dim,
            balls: map,
            labels,
            index,
            pending_first,
            next_ball,
            rng,
        })
    }

    fn check_dim(&mut self, bag_dim: usize) -> Result<()> {
        match self.dim {
            None => {
                self.dim = Some(bag_dim);
                Ok(())
            }
            Some(d) if d == bag_dim => Ok(()),
            Some(d) => Err(Error::DimensionMismatch {
                expected: d,
                found: bag_dim,
            }),
        }
    }

    fn create_ball(&mut self, center: Vec<f64>, radius: f64, label: ClassId) -> Result<BallId> {
        let id = BallId(self.next_ball);
        self.next_ball += 1;
        self.index.as_index_mut().insert(id, &center)?;
        self.balls.insert(id, Ball::new(id, center, radius, label));
        Ok(id)
    }

    fn learn_descriptor(&mut self, x: &[f64], y: ClassId, report: &mut UpdateReport) -> Result<()> {
        if self.balls.is_empty() {
            match self.pending_first.take() {
                None => {
                    self.pending_first = Some(x.to_vec());
                }
                Some(first) => {
                    let radius = sq_dist(&first, x).sqrt();
                    if radius == 0.0 {
                        // exact duplicate of the saved point: a zero-radius
                        // ball would be unreachable, so keep waiting
                        self.pending_first = Some(first);
                        return Ok(());
                    }
                    self.create_ball(x.to_vec(), radius, y)?;
                    report.balls_created += 1;
                }
            }
            return Ok(());
        }

        let Neighbor { id, distance } = self
            .index
            .as_index()
            .nearest(x)
            .expect("nonempty model must have index entries");
        let ball = self.balls.get_mut(&id).expect("index and ball set in sync");
        if distance <= ball.radius {
            if y != ball.local_argmax() {
                ball.record_mistake();
                report.mistakes += 1;
                ball.bump(y);
            } else {
                ball.center_samples += 1;
                let k = ball.center_samples as f64;
                for i in 0..ball.center.len() {
                    ball.center[i] += (x[i] - ball.center[i]) / k;
                }
                ball.bump(y);
                let center = ball.center.clone();
                self.index.as_index_mut().relocate(id, &center)?;
            }
        } else {
            // distance > radius > 0, so the new ball's radius is positive
            self.create_ball(x.to_vec(), distance, y)?;
            report.balls_created += 1;
        }
        Ok(())
    }

    /// Consumes one labeled bag, descriptor by descriptor in order, then
    /// evicts until the ball cap is respected.
    pub fn learn_bag(&mut self, bag: &VideoBag, label: &str) -> Result<UpdateReport> {
        self.check_dim(bag.dim())?;
        let mut report = UpdateReport::default();
        report.new_label = self.labels.id(label).is_none();
        let y = self.labels.intern(label);
        for x in bag.descriptors() {
            self.learn_descriptor(x.as_slice(), y, &mut report)?;
        }
        if let Some(cap) = self.config.max_balls {
            while self.balls.len() > cap {
                let evicted = self.evict()?;
                report.evicted.push(evicted);
            }
        }
        Ok(report)
    }

    /// Removes one ball drawn with probability `(m_s + 1) / (Σ m_r + |S|)`,
    /// using the model's own RNG.
    pub fn evict(&mut self) -> Result<BallId> {
        let mut rng = std::mem::replace(&mut self.rng, ChaCha8Rng::seed_from_u64(0));
        let out = self.evict_with_rng(&mut rng);
        self.rng = rng;
        out
    }

    /// Same as [`evict`](Self::evict) with an external RNG; handy for
    /// distribution tests.
    pub fn evict_with_rng(&mut self, rng: &mut dyn RngCore) -> Result<BallId> {
        if self.balls.is_empty() {
            return Err(Error::EmptyModel);
        }
        let total_weight: u64 = self
            .balls
            .values()
            .map(|b| b.mistakes + 1)
            .sum();
        let mut draw = rng.gen_range(0..total_weight);
        let mut victim = None;
        for (id, ball) in &self.balls {
            let w = ball.mistakes + 1;
            if draw < w {
                victim = Some(*id);
                break;
            }
            draw -= w;
        }
        let victim = victim.expect("weights sum to total_weight");
        self.index.as_index_mut().remove(victim)?;
        self.balls.remove(&victim);
        Ok(victim)
    }

    /// Predicts the label of a bag from the current cover.
    ///
    /// Returns the unknown prediction (confidence zero) while the model has
    /// no balls.
    pub fn predict_bag(&self, bag: &VideoBag) -> Result<BagPrediction> {
        if self.balls.is_empty() {
            return Ok(BagPrediction::unknown());
        }
        let dim = self.dim.expect("model with balls has a dimensionality");
        if bag.dim() != dim {
            return Err(Error::DimensionMismatch {
                expected: dim,
                found: bag.dim(),
            });
        }
        let num_classes = self.labels.len();
        let mut log_scores = vec![0.0; num_classes];
        let mut confidences = vec![0.0; num_classes];
        for x in bag.descriptors() {
            let (logp, weight) = self
                .descriptor_terms(x.as_slice())
                .expect("nonempty model must have index entries");
            for y in 0..num_classes {
                log_scores[y] += logp[y];
                confidences[y] += weight * logp[y];
            }
        }
        let t = bag.len() as f64;
        for c in &mut confidences {
            *c /= t;
        }
        let predicted = argmax_smallest(&log_scores).expect("at least one class");
        let top_confidence = if self.config.normalized_confidence {
            softmax_at(&confidences, predicted)
        } else {
            confidences[predicted].exp()
        };
        Ok(BagPrediction {
            predicted: Some(ClassId(predicted as u32)),
            log_scores,
            confidences,
            top_confidence,
        })
    }

    /// Per-descriptor prediction terms: log smoothed posteriors of the
    /// descriptor's nearest ball for every known class, and the kernel
    /// weight of the descriptor against that ball. `None` on an empty model.
    pub(crate) fn descriptor_terms(&self, x: &[f64]) -> Option<(Vec<f64>, f64)> {
        let Neighbor { id, distance } = self.index.as_index().nearest(x)?;
        let ball = &self.balls[&id];
        let weight = (-(distance * distance) / (2.0 * ball.radius * ball.radius)).exp();
        let num_classes = self.labels.len();
        let logp = (0..num_classes)
            .map(|y| ball.smoothed_posterior(ClassId(y as u32), num_classes).ln())
            .collect();
        Some((logp, weight))
    }

    /// Convenience: predicted label name, if any.
    pub fn predict_label(&self, bag: &VideoBag) -> Result<Option<String>> {
        let p = self.predict_bag(bag)?;
        Ok(p
            .predicted
            .and_then(|id| self.labels.name(id))
            .map(str::to_string))
    }
}

/// Index of the largest value, smallest index on exact ties.
pub(crate) fn argmax_smallest(values: &[f64]) -> Option<usize> {
    let mut best: Option<usize> = None;
    for (i, &v) in values.iter().enumerate() {
        match best {
            None => best = Some(i),
            Some(b) if v > values[b] => best = Some(i),
            _ => {}
        }
    }
    best
}

/// `exp(values[at]) / Σ exp(values[y])`, computed in the max-shifted form.
pub(crate) fn softmax_at(values: &[f64], at: usize) -> f64 {
    let max = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let denom: f64 = values.iter().map(|v| (v - max).exp()).sum();
    (values[at] - max).exp() / denom
}
