//! Synthetic Gaussian-mixture datasets and frame sequences.
//!
//! Desk-scale stand-ins for real video features: each class is an isotropic
//! Gaussian blob placed on its own axis, bags draw their descriptors around
//! the class mean, and optional schedules inject concept drift or a class
//! that only appears partway through the stream.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::dataset::{Dataset, DatasetItem, Split};
use crate::error::{Error, Result};
use crate::types::{FeatureVector, VideoBag};

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum DriftKind {
    /// Translate every class mean by this magnitude along the diagonal.
    Shift(f64),
    /// Each class jumps to the next class's mean (cyclically); the harshest
    /// abrupt drift: a frozen model maps almost everything to a wrong class.
    Rotate,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DriftSpec {
    pub at_bag: usize,
    pub kind: DriftKind,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NovelSpec {
    /// Class index withheld until `at_bag`.
    pub class: usize,
    pub at_bag: usize,
}

#[derive(Debug, Clone)]
pub struct SynthSpec {
    pub classes: usize,
    pub dim: usize,
    /// Distance of each class mean from the origin along its own axis;
    /// mutual mean distance is `separation·√2`.
    pub separation: f64,
    pub sigma: f64,
    pub bags: usize,
    /// Inclusive range of descriptors per bag.
    pub bag_len: (usize, usize),
    pub drift: Option<DriftSpec>,
    pub novel: Option<NovelSpec>,
    /// `None` tags everything `stream`; `Some(f)` tags the first
    /// `round(f·bags)` bags `train` and the rest `test`.
    pub train_fraction: Option<f64>,
    pub label_prefix: String,
}

impl Default for SynthSpec {
    fn default() -> Self {
        SynthSpec {
            classes: 3,
            dim: 3,
            separation: 10.0,
            sigma: 1.0,
            bags: 600,
            bag_len: (5, 5),
            drift: None,
            novel: None,
            train_fraction: None,
            label_prefix: "c".into(),
        }
    }
}

impl SynthSpec {
    pub fn validate(&self) -> Result<()> {
        if self.classes == 0 {
            return Err(Error::invalid("classes", "at least one class required"));
        }
        if self.dim < self.classes {
            return Err(Error::invalid(
                "dim",
                format!(
                    "axis placement needs dim >= classes ({} < {})",
                    self.dim, self.classes
                ),
            ));
        }
        if !(self.sigma > 0.0) {
            return Err(Error::invalid("sigma", "degenerate covariance"));
        }
        if self.separation < 0.0 {
            return Err(Error::invalid("separation", "must be nonnegative"));
        }
        if self.bags == 0 {
            return Err(Error::invalid("bags", "at least one bag required"));
        }
        if self.bag_len.0 == 0 || self.bag_len.0 > self.bag_len.1 {
            return Err(Error::invalid("bag_len", "need 1 <= min <= max"));
        }
        if let Some(novel) = &self.novel {
            if novel.class >= self.classes {
                return Err(Error::invalid("novel.class", "class index out of range"));
            }
            if self.classes == 1 {
                return Err(Error::invalid(
                    "novel",
                    "cannot withhold the only class",
                ));
            }
        }
        if let Some(f) = self.train_fraction {
            if !(f > 0.0 && f < 1.0) {
                return Err(Error::invalid("train_fraction", "must lie in (0, 1)"));
            }
        }
        Ok(())
    }

    pub fn label(&self, class: usize) -> String {
        format!("{}{}", self.label_prefix, class)
    }

    /// Mean of `class` at stream position `bag_idx`, drift applied.
    pub fn mean(&self, class: usize, bag_idx: usize) -> Vec<f64> {
        let mut base_class = class;
        let mut offset = 0.0;
        if let Some(drift) = &self.drift {
            if bag_idx >= drift.at_bag {
                match drift.kind {
                    DriftKind::Rotate => base_class = (class + 1) % self.classes,
                    DriftKind::Shift(mag) => offset = mag / (self.dim as f64).sqrt(),
                }
            }
        }
        let mut mean = vec![offset; self.dim];
        mean[base_class] += self.separation;
        mean
    }
}

/// Generates a reproducible dataset of labeled bags.
pub fn generate(spec: &SynthSpec, seed: u64) -> Result<Dataset> {
    spec.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let noise = Normal::new(0.0, spec.sigma).expect("sigma validated positive");
    let train_cutoff = spec
        .train_fraction
        .map(|f| (f * spec.bags as f64).round() as usize);

    let mut items = Vec::with_capacity(spec.bags);
    for i in 0..spec.bags {
        let class = draw_class(spec, i, &mut rng);
        let t = rng.gen_range(spec.bag_len.0..=spec.bag_len.1);
        let mean = spec.mean(class, i);
        let mut descriptors = Vec::with_capacity(t);
        for _ in 0..t {
            let coords: Vec<f64> = mean.iter().map(|m| m + noise.sample(&mut rng)).collect();
            descriptors.push(FeatureVector::new(coords).expect("finite by construction"));
        }
        let split = match train_cutoff {
            None => Split::Stream,
            Some(cut) if i < cut => Split::Train,
            Some(_) => Split::Test,
        };
        let bag = VideoBag::new(format!("bag_{i:05}"), descriptors, Some(spec.label(class)))?;
        items.push(DatasetItem { bag, split });
    }
    Dataset::new(spec.dim, items)
}

fn draw_class(spec: &SynthSpec, bag_idx: usize, rng: &mut ChaCha8Rng) -> usize {
    let withheld = spec
        .novel
        .as_ref()
        .filter(|n| bag_idx < n.at_bag)
        .map(|n| n.class);
    loop {
        let c = rng.gen_range(0..spec.classes);
        if Some(c) != withheld {
            return c;
        }
    }
}

/// Generates one continuous frame stream: consecutive same-generator
/// segments, one per entry of `segment_classes`.
///
/// Returns the frames, the per-segment label names, and the start frame of
/// every segment after the first (the true boundaries).
pub fn generate_frame_sequence(
    spec: &SynthSpec,
    segment_classes: &[usize],
    seg_len: (usize, usize),
    seed: u64,
) -> Result<(Vec<FeatureVector>, Vec<String>, Vec<usize>)> {
    spec.validate()?;
    if segment_classes.is_empty() {
        return Err(Error::EmptyInput("segment_classes"));
    }
    if seg_len.0 == 0 || seg_len.0 > seg_len.1 {
        return Err(Error::invalid("seg_len", "need 1 <= min <= max"));
    }
    if let Some(&bad) = segment_classes.iter().find(|&&c| c >= spec.classes) {
        return Err(Error::invalid(
            "segment_classes",
            format!("class {bad} out of range"),
        ));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let noise = Normal::new(0.0, spec.sigma).expect("sigma validated positive");
    let mut frames = Vec::new();
    let mut labels = Vec::with_capacity(segment_classes.len());
    let mut boundaries = Vec::new();
    for (k, &class) in segment_classes.iter().enumerate() {
        if k > 0 {
            boundaries.push(frames.len());
        }
        let len = rng.gen_range(seg_len.0..=seg_len.1);
        let mean = spec.mean(class, 0);
        for _ in 0..len {
            let coords: Vec<f64> = mean.iter().map(|m| m + noise.sample(&mut rng)).collect();
            frames.push(FeatureVector::new(coords).expect("finite by construction"));
        }
        labels.push(spec.label(class));
    }
    Ok((frames, labels, boundaries))
}

/// Nine well-separated classes in twelve dimensions with utterance-sized
/// bags and a fixed 270/370 train/test split, shaped like the public
/// Japanese-vowels LPC frame series.
pub fn vowels_preset() -> SynthSpec {
    SynthSpec {
        classes: 9,
        dim: 12,
        separation: 6.0,
        sigma: 1.0,
        bags: 640,
        bag_len: (7, 29),
        drift: None,
        novel: None,
        train_fraction: Some(270.0 / 640.0),
        label_prefix: "v".into(),
    }
}

/// Four moderately separated classes whose means rotate abruptly at bag 300:
/// the benchmark for drift adaptation and active-learning comparisons.
pub fn drift_preset() -> SynthSpec {
    SynthSpec {
        classes: 4,
        dim: 4,
        separation: 6.0,
        sigma: 1.0,
        bags: 600,
        bag_len: (5, 5),
        drift: Some(DriftSpec {
            at_bag: 300,
            kind: DriftKind::Rotate,
        }),
        novel: None,
        train_fraction: None,
        label_prefix: "c".into(),
    }
}
