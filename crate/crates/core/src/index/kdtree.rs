//! Dynamic kd-tree with bucketed leaves.
//!
//! Queries prune a subtree only when the squared distance from the query to
//! the subtree's bounding box strictly exceeds the best squared distance seen
//! so far. Both quantities accumulate per-coordinate terms in the same order,
//! and rounding is monotone, so the computed box bound can never exceed the
//! computed distance of a point inside the box. Pruning therefore never drops
//! a candidate the linear scan would have reported, and the two backends
//! agree bitwise.

use std::collections::HashMap;

use crate::error::{Error, Result};
use crate::types::sq_dist;

use super::{consider, BallId, Neighbor, NnIndex};

const LEAF_CAP: usize = 16;

#[derive(Debug, Clone)]
enum Node {
    Split {
        dim: u32,
        value: f64,
        left: u32,
        right: u32,
    },
    Leaf {
        entries: Vec<(u64, Vec<f64>)>,
    },
}

#[derive(Debug, Clone, Default)]
pub struct KdIndex {
    dim: usize,
    // nodes[0] is the root whenever the index is nonempty
    nodes: Vec<Node>,
    locations: HashMap<u64, Vec<f64>>,
    mutations: usize,
}

impl KdIndex {
    pub fn new() -> Self {
        Self::default()
    }

    /// Midpoint of the occupied range, nudged so that both halves are
    /// nonempty (points at `min` go left, points at `max` go right).
    fn split_value(min: f64, max: f64) -> f64 {
        let mid = min + (max - min) / 2.0;
        if mid < max {
            mid
        } else {
            min
        }
    }

    /// Dimension with the widest spread among `entries`, with its range.
    fn widest_dim(dim: usize, entries: &[(u64, Vec<f64>)]) -> (usize, f64, f64) {
        let mut best = (0usize, 0.0f64, 0.0f64, -1.0f64);
        for d in 0..dim {
            let mut lo = f64::INFINITY;
            let mut hi = f64::NEG_INFINITY;
            for (_, c) in entries {
                lo = lo.min(c[d]);
                hi = hi.max(c[d]);
            }
            let spread = hi - lo;
            if spread > best.3 {
                best = (d, lo, hi, spread);
            }
        }
        (best.0, best.1, best.2)
    }

    fn leaf_for(&self, center: &[f64]) -> usize {
        let mut n = 0usize;
        loop {
            match &self.nodes[n] {
                Node::Leaf { .. } => return n,
                Node::Split {
                    dim, value, left, right, ..
                } => {
                    n = if center[*dim as usize] <= *value {
                        *left as usize
                    } else {
                        *right as usize
                    };
                }
            }
        }
    }

    fn split_leaf(&mut self, n: usize) {
        let entries = match &mut self.nodes[n] {
            Node::Leaf { entries } => std::mem::take(entries),
            Node::Split { .. } => unreachable!("split_leaf on split node"),
        };
        let (d, lo, hi) = Self::widest_dim(self.dim, &entries);
        if hi <= lo {
            // all coordinates identical: keep the oversized leaf
            self.nodes[n] = Node::Leaf { entries };
            return;
        }
        let value = Self::split_value(lo, hi);
        let (left_entries, right_entries): (Vec<_>, Vec<_>) =
            entries.into_iter().partition(|(_, c)| c[d] <= value);
        let left = self.nodes.len() as u32;
        self.nodes.push(Node::Leaf {
            entries: left_entries,
        });
        let right = self.nodes.len() as u32;
        self.nodes.push(Node::Leaf {
            entries: right_entries,
        });
        self.nodes[n] = Node::Split {
            dim: d as u32,
            value,
            left,
            right,
        };
    }

    /// Rebuilds a balanced tree from scratch; entries ordered by id so the
    /// structure depends only on the current contents.
    fn rebuild(&mut self) {
        let mut entries: Vec<(u64, Vec<f64>)> = self
            .locations
            .iter()
            .map(|(id, c)| (*id, c.clone()))
            .collect();
        entries.sort_unstable_by_key(|(id, _)| *id);
        self.nodes.clear();
        self.mutations = 0;
        if entries.is_empty() {
            return;
        }
        self.build(entries);
    }

    fn build(&mut self, entries: Vec<(u64, Vec<f64>)>) -> u32 {
        let slot = self.nodes.len() as u32;
        self.nodes.push(Node::Leaf {
            entries: Vec::new(),
        });
        if entries.len() <= LEAF_CAP {
            self.nodes[slot as usize] = Node::Leaf { entries };
            return slot;
        }
        let (d, lo, hi) = Self::widest_dim(self.dim, &entries);
        if hi <= lo {
            self.nodes[slot as usize] = Node::Leaf { entries };
            return slot;
        }
        let value = Self::split_value(lo, hi);
        let (left_entries, right_entries): (Vec<_>, Vec<_>) =
            entries.into_iter().partition(|(_, c)| c[d] <= value);
        let left = self.build(left_entries);
        let right = self.build(right_entries);
        self.nodes[slot as usize] = Node::Split {
            dim: d as u32,
            value,
            left,
            right,
        };
        slot
    }

    fn after_mutation(&mut self) {
        self.mutations += 1;
        if self.mutations > 64 + 4 * self.locations.len() {
            self.rebuild();
        }
    }

    fn search(
        &self,
        n: usize,
        query: &[f64],
        lo: &mut [f64],
        hi: &mut [f64],
        best: &mut (f64, u64),
    ) {
        match &self.nodes[n] {
            Node::Leaf { entries } => {
                for (id, c) in entries {
                    consider(best, sq_dist(query, c), *id);
                }
            }
            Node::Split {
                dim, value, left, right,
            } => {
                let d = *dim as usize;
                let near_left = query[d] <= *value;
                let (near, far) = if near_left {
                    (*left as usize, *right as usize)
                } else {
                    (*right as usize, *left as usize)
                };

                // near child first; its box shares the query's side
                if near_left {
                    let old = hi[d];
                    hi[d] = old.min(*value);
                    self.search(near, query, lo, hi, best);
                    hi[d] = old;
                } else {
                    let old = lo[d];
                    lo[d] = old.max(*value);
                    self.search(near, query, lo, hi, best);
                    lo[d] = old;
                }

                // far child only if its box could still hold a winner
                if near_left {
                    let old = lo[d];
                    lo[d] = old.max(*value);
                    if box_sq_dist(query, lo, hi) <= best.0 {
                        self.search(far, query, lo, hi, best);
                    }
                    lo[d] = old;
                } else {
                    let old = hi[d];
                    hi[d] = old.min(*value);
                    if box_sq_dist(query, lo, hi) <= best.0 {
                        self.search(far, query, lo, hi, best);
                    }
                    hi[d] = old;
                }
            }
        }
    }
}

/// Squared distance from `query` to the axis-aligned box `[lo, hi]`,
/// accumulated in coordinate order like `sq_dist`.
fn box_sq_dist(query: &[f64], lo: &[f64], hi: &[f64]) -> f64 {
    let mut acc = 0.0;
    for i in 0..query.len() {
        let q = query[i];
        let excess = if q < lo[i] {
            lo[i] - q
        } else if q > hi[i] {
            q - hi[i]
        } else {
            0.0
        };
        acc += excess * excess;
    }
    acc
}

impl NnIndex for KdIndex {
    fn insert(&mut self, id: BallId, center: &[f64]) -> Result<()> {
        if self.locations.contains_key(&id.0) {
            return Err(Error::DuplicateBall(id));
        }
        if self.locations.is_empty() {
            self.dim = center.len();
            self.nodes.clear();
            self.nodes.push(Node::Leaf {
                entries: Vec::new(),
            });
        } else if center.len() != self.dim {
            return Err(Error::DimensionMismatch {
                expected: self.dim,
                found: center.len(),
            });
        }
        let leaf = self.leaf_for(center);
        match &mut self.nodes[leaf] {
            Node::Leaf { entries } => entries.push((id.0, center.to_vec())),
            Node::Split { .. } => unreachable!(),
        }
        let overfull = matches!(&self.nodes[leaf], Node::Leaf { entries } if entries.len() > LEAF_CAP);
        if overfull {
            self.split_leaf(leaf);
        }
        self.locations.insert(id.0, center.to_vec());
        self.after_mutation();
        Ok(())
    }

    fn remove(&mut self, id: BallId) -> Result<()> {
        let center = self
            .locations
            .remove(&id.0)
            .ok_or(Error::UnknownBall(id))?;
        let leaf = self.leaf_for(&center);
        match &mut self.nodes[leaf] {
            Node::Leaf { entries } => {
                let pos = entries
                    .iter()
                    .position(|(i, _)| *i == id.0)
                    .expect("index entry out of sync with location map");
                entries.remove(pos);
            }
            Node::Split { .. } => unreachable!(),
        }
        if self.locations.is_empty() {
            self.nodes.clear();
            self.dim = 0;
            self.mutations = 0;
        } else {
            self.after_mutation();
        }
        Ok(())
    }

    fn nearest(&self, query: &[f64]) -> Option<Neighbor> {
        if self.locations.is_empty() {
            return None;
        }
        let mut best = (f64::INFINITY, u64::MAX);
        let mut lo = vec![f64::NEG_INFINITY; self.dim];
        let mut hi = vec![f64::INFINITY; self.dim];
        self.search(0, query, &mut lo, &mut hi, &mut best);
        Some(Neighbor {
            id: BallId(best.1),
            distance: best.0.sqrt(),
        })
    }

    fn len(&self) -> usize {
        self.locations.len()
    }
}
