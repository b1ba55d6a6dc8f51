//! Versioned model snapshots.
//!
//! A snapshot captures every ball, the label table, the cold-start slot, and
//! the model's RNG state, so a reloaded model continues bit-for-bit where the
//! original left off. The on-disk form is JSON; 64-bit floats survive the
//! round trip exactly.

use std::fs;
use std::path::Path;

use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::index::BallId;
use crate::model::{Ball, CoverModel, ModelConfig};
use crate::types::LabelTable;

pub const SNAPSHOT_FORMAT: &str = "coverstream-model";
pub const SNAPSHOT_VERSION: u32 = 1;

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct BallSnapshot {
    pub id: u64,
    pub center: Vec<f64>,
    pub initial_radius: f64,
    pub radius: f64,
    pub mistakes: u64,
    pub counts: Vec<u64>,
    pub center_samples: u64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ModelSnapshot {
    pub format: String,
    pub version: u32,
    pub dim: Option<usize>,
    pub max_balls: Option<usize>,
    pub normalized_confidence: bool,
    pub next_ball: u64,
    pub labels: Vec<String>,
    pub pending_first: Option<Vec<f64>>,
    pub rng: ChaCha8Rng,
    pub balls: Vec<BallSnapshot>,
}

impl ModelSnapshot {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("snapshot serialization cannot fail")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::Snapshot(e.to_string()))
    }

    fn validate(&self) -> Result<()> {
        if self.format != SNAPSHOT_FORMAT {
            return Err(Error::Snapshot(format!(
                "unexpected format tag `{}`",
                self.format
            )));
        }
        if self.version != SNAPSHOT_VERSION {
            return Err(Error::Snapshot(format!(
                "unsupported version {} (expected {})",
                self.version, SNAPSHOT_VERSION
            )));
        }
        if !self.balls.is_empty() && self.dim.is_none() {
            return Err(Error::Snapshot("balls present but no dimensionality".into()));
        }
        if let (Some(dim), Some(p)) = (self.dim, &self.pending_first) {
            if p.len() != dim {
                return Err(Error::Snapshot("pending point dimensionality mismatch".into()));
            }
        }
        for b in &self.balls {
            if b.id >= self.next_ball {
                return Err(Error::Snapshot(format!(
                    "ball id {} not below next_ball {}",
                    b.id, self.next_ball
                )));
            }
            if Some(b.center.len()) != self.dim {
                return Err(Error::Snapshot(format!(
                    "ball {} center dimensionality mismatch",
                    b.id
                )));
            }
            if b.center.iter().any(|c| !c.is_finite()) {
                return Err(Error::Snapshot(format!("ball {} has non-finite center", b.id)));
            }
            if !(b.initial_radius > 0.0 && b.radius > 0.0) {
                return Err(Error::Snapshot(format!("ball {} has non-positive radius", b.id)));
            }
            if b.counts.len() > self.labels.len() {
                return Err(Error::Snapshot(format!(
                    "ball {} counts exceed the label table",
                    b.id
                )));
            }
            if b.counts.iter().sum::<u64>() == 0 {
                return Err(Error::Snapshot(format!("ball {} has no samples", b.id)));
            }
            let law = b.initial_radius * (b.mistakes.max(1) as f64).powf(-0.25);
            if (b.radius - law).abs() > 1e-9 * law {
                return Err(Error::Snapshot(format!(
                    "ball {} violates the radius law",
                    b.id
                )));
            }
        }
        Ok(())
    }
}

impl CoverModel {
    pub fn snapshot(&self) -> ModelSnapshot {
        let (config, dim, balls, labels, pending, next_ball, rng) = self.parts();
        ModelSnapshot {
            format: SNAPSHOT_FORMAT.to_string(),
            version: SNAPSHOT_VERSION,
            dim,
            max_balls: config.max_balls,
            normalized_confidence: config.normalized_confidence,
            next_ball,
            labels: labels.names().to_vec(),
            pending_first: pending.clone(),
            rng: rng.clone(),
            balls: balls
                .values()
                .map(|b| BallSnapshot {
                    id: b.id().0,
                    center: b.center().to_vec(),
                    initial_radius: b.initial_radius(),
                    radius: b.radius(),
                    mistakes: b.mistakes(),
                    counts: b.counts().to_vec(),
                    center_samples: b.center_samples(),
                })
                .collect(),
        }
    }

    pub fn from_snapshot(snap: ModelSnapshot) -> Result<Self> {
        snap.validate()?;
        let config = ModelConfig {
            max_balls: snap.max_balls,
            seed: 0, // superseded by the restored RNG state
            normalized_confidence: snap.normalized_confidence,
            backend: Default::default(),
        };
        let balls = snap
            .balls
            .into_iter()
            .map(|b| {
                Ball::from_parts(
                    BallId(b.id),
                    b.center,
                    b.initial_radius,
                    b.radius,
                    b.mistakes,
                    b.counts,
                    b.center_samples,
                )
            })
            .collect();
        CoverModel::from_parts(
            config,
            snap.dim,
            balls,
            LabelTable::from(snap.labels),
            snap.pending_first,
            snap.next_ball,
            snap.rng,
        )
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        fs::write(path, self.snapshot().to_json())?;
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let text = fs::read_to_string(path)?;
        Self::from_snapshot(ModelSnapshot::from_json(&text)?)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::types::{FeatureVector, VideoBag};
    use rand::SeedableRng;

    fn bag(id: &str, points: &[&[f64]]) -> VideoBag {
        let descriptors = points
            .iter()
            .map(|p| FeatureVector::new(p.to_vec()).unwrap())
            .collect();
        VideoBag::new(id, descriptors, None).unwrap()
    }

    fn trained_model() -> CoverModel {
        let mut cfg = ModelConfig::default();
        cfg.max_balls = Some(6);
        cfg.seed = 9;
        let mut m = CoverModel::new(cfg);
        for i in 0..25 {
            let x = [(i * 7 % 13) as f64, (i * 5 % 11) as f64 / 3.0];
            let label = ["A", "B", "C"][i % 3];
            m.learn_bag(&bag(&format!("b{i}"), &[&x]), label).unwrap();
        }
        m
    }

    #[test]
    fn snapshot_round_trips_bit_exactly() {
        let m = trained_model();
        let json = m.snapshot().to_json();
        let restored = CoverModel::from_snapshot(ModelSnapshot::from_json(&json).unwrap()).unwrap();
        assert_eq!(restored.snapshot().to_json(), json);

        // behavioral equality: identical prediction and identical next draw
        let q = bag("q", &[&[4.0, 1.0], &[9.0, 2.5]]);
        assert_eq!(m.predict_bag(&q).unwrap(), restored.predict_bag(&q).unwrap());
        let mut a = m.clone();
        let mut b = restored;
        assert_eq!(a.evict().unwrap(), b.evict().unwrap());
    }

    #[test]
    fn save_and_load_via_file() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("model.json");
        let m = trained_model();
        m.save(&path).unwrap();
        let restored = CoverModel::load(&path).unwrap();
        assert_eq!(m.snapshot().to_json(), restored.snapshot().to_json());
    }

    #[test]
    fn snapshot_rejects_corrupt_state() {
        let m = trained_model();
        let mut snap = m.snapshot();
        snap.balls[0].radius = snap.balls[0].initial_radius * 2.0;
        assert!(CoverModel::from_snapshot(snap).is_err());

        let mut snap = m.snapshot();
        snap.version = 99;
        assert!(CoverModel::from_snapshot(snap).is_err());

        let mut snap = m.snapshot();
        snap.balls[0].counts = vec![];
        assert!(CoverModel::from_snapshot(snap).is_err());
    }

    #[test]
    fn hand_built_snapshot_constructs_model() {
        // snapshots double as the public constructor for crafted models
        let snap = ModelSnapshot {
            format: SNAPSHOT_FORMAT.to_string(),
            version: SNAPSHOT_VERSION,
            dim: Some(2),
            max_balls: None,
            normalized_confidence: true,
            next_ball: 2,
            labels: vec!["walk".into(), "run".into()],
            pending_first: None,
            rng: rand_chacha::ChaCha8Rng::seed_from_u64(3),
            balls: vec![
                BallSnapshot {
                    id: 0,
                    center: vec![0.0, 0.0],
                    initial_radius: 2.0,
                    radius: 2.0,
                    mistakes: 0,
                    counts: vec![3, 1],
                    center_samples: 1,
                },
                BallSnapshot {
                    id: 1,
                    center: vec![10.0, 0.0],
                    initial_radius: 4.0,
                    radius: 4.0 * (3.0_f64).powf(-0.25),
                    mistakes: 3,
                    counts: vec![0, 5],
                    center_samples: 2,
                },
            ],
        };
        let m = CoverModel::from_snapshot(snap).unwrap();
        assert_eq!(m.num_balls(), 2);
        assert_eq!(m.num_classes(), 2);
        let p = m.predict_bag(&bag("q", &[&[10.0, 0.1]])).unwrap();
        assert_eq!(m.label_name(p.predicted.unwrap()), Some("run"));
    }
}
