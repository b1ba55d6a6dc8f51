//! Brute-force index: the semantic reference for every spatial backend.

use crate::error::{Error, Result};
use crate::types::sq_dist;

use super::{consider, BallId, Neighbor, NnIndex};

/// Entries kept sorted by id; queries scan all of them.
#[derive(Debug, Clone, Default)]
pub struct LinearIndex {
    entries: Vec<(u64, Vec<f64>)>,
}

impl LinearIndex {
    pub fn new() -> Self {
        Self::default()
    }

    fn position(&self, id: u64) -> std::result::Result<usize, usize> {
        self.entries.binary_search_by_key(&id, |(i, _)| *i)
    }
}

impl NnIndex for LinearIndex {
    fn insert(&mut self, id: BallId, center: &[f64]) -> Result<()> {
        if let Some((_, existing)) = self.entries.first() {
            if existing.len() != center.len() {
                return Err(Error::DimensionMismatch {
                    expected: existing.len(),
                    found: center.len(),
                });
            }
        }
        match self.position(id.0) {
            Ok(_) => Err(Error::DuplicateBall(id)),
            Err(pos) => {
                self.entries.insert(pos, (id.0, center.to_vec()));
                Ok(())
            }
        }
    }

    fn remove(&mut self, id: BallId) -> Result<()> {
        match self.position(id.0) {
            Ok(pos) => {
                self.entries.remove(pos);
                Ok(())
            }
            Err(_) => Err(Error::UnknownBall(id)),
        }
    }

    fn nearest(&self, query: &[f64]) -> Option<Neighbor> {
        if self.entries.is_empty() {
            return None;
        }
        let mut best = (f64::INFINITY, u64::MAX);
        for (id, center) in &self.entries {
            consider(&mut best, sq_dist(query, center), *id);
        }
        Some(Neighbor {
            id: BallId(best.1),
            distance: best.0.sqrt(),
        })
    }

    fn len(&self) -> usize {
        self.entries.len()
    }
}
