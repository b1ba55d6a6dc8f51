//! Exact nearest-neighbor index over ball centers.
//!
//! Two interchangeable backends live here: [`KdIndex`], the production
//! structure with expected-logarithmic queries, and [`LinearIndex`], a
//! brute-force reference that doubles as the oracle in property tests.
//!
//! Both backends answer queries with the entry minimizing the pair
//! (squared distance, ball id) lexicographically, squared distances being
//! accumulated in coordinate order. That single tie rule is what makes the
//! two backends agree bitwise on every query.

mod kdtree;
mod linear;

pub use kdtree::KdIndex;
pub use linear::LinearIndex;

use serde::{Deserialize, Serialize};

use crate::error::Result;

/// Opaque handle of a ball; unique for the lifetime of a model.
#[derive(
    Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize,
)]
pub struct BallId(pub u64);

impl std::fmt::Display for BallId {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}", self.0)
    }
}

/// A nearest-neighbor answer: the winning entry and its Euclidean distance.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Neighbor {
    pub id: BallId,
    pub distance: f64,
}

/// Dynamic exact nearest-neighbor index over centers.
pub trait NnIndex {
    /// Adds an entry. Fails if `id` is already present.
    fn insert(&mut self, id: BallId, center: &[f64]) -> Result<()>;

    /// Removes an entry. Fails if `id` is not present.
    fn remove(&mut self, id: BallId) -> Result<()>;

    /// Moves an entry to a new center, atomically from the caller's view.
    fn relocate(&mut self, id: BallId, center: &[f64]) -> Result<()> {
        self.remove(id)?;
        self.insert(id, center)
    }

    /// Returns the entry minimizing (squared distance, id), or `None` when
    /// the index is empty.
    fn nearest(&self, query: &[f64]) -> Option<Neighbor>;

    fn len(&self) -> usize;

    fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

/// Updates `best = (squared distance, id)` under the shared tie rule.
#[inline]
fn consider(best: &mut (f64, u64), sq: f64, id: u64) {
    if sq < best.0 || (sq == best.0 && id < best.1) {
        *best = (sq, id);
    }
}
