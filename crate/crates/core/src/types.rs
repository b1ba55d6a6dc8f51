//! Shared domain types: feature vectors, bags of descriptors, and interned
//! class labels, plus the Euclidean metric used by every other module.

use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// One point in the d-dimensional feature space.
///
/// Coordinates are finite 64-bit floats. Distance comparisons elsewhere are
/// exact on the stored bits, so equal inputs reproduce equal results across
/// runs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct FeatureVector(Vec<f64>);

impl FeatureVector {
    pub fn new(coords: Vec<f64>) -> Result<Self> {
        if coords.is_empty() {
            return Err(Error::EmptyFeatureVector);
        }
        if let Some(index) = coords.iter().position(|c| !c.is_finite()) {
            return Err(Error::NonFiniteCoordinate { index });
        }
        Ok(FeatureVector(coords))
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }
}

impl AsRef<[f64]> for FeatureVector {
    fn as_ref(&self) -> &[f64] {
        &self.0
    }
}

/// Squared Euclidean distance, accumulated in coordinate order.
///
/// Keeping one summation order everywhere makes results bit-reproducible and
/// lets the spatial index prune with bounds that can never exceed the value
/// computed here. Callers must have checked dimensions.
pub(crate) fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    let mut acc = 0.0;
    for i in 0..a.len() {
        let d = a[i] - b[i];
        acc += d * d;
    }
    acc
}

/// Euclidean distance between two descriptors.
pub fn distance(a: &FeatureVector, b: &FeatureVector) -> Result<f64> {
    if a.dim() != b.dim() {
        return Err(Error::DimensionMismatch {
            expected: a.dim(),
            found: b.dim(),
        });
    }
    Ok(sq_dist(a.as_slice(), b.as_slice()).sqrt())
}

/// An ordered, nonempty collection of descriptors labeled (and predicted) as
/// one unit.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VideoBag {
    id: String,
    descriptors: Vec<FeatureVector>,
    true_label: Option<String>,
}

impl VideoBag {
    /// Builds a bag, checking that it is nonempty and that all descriptors
    /// share one dimensionality.
    pub fn new(
        id: impl Into<String>,
        descriptors: Vec<FeatureVector>,
        true_label: Option<String>,
    ) -> Result<Self> {
        let id = id.into();
        let Some(first) = descriptors.first() else {
            return Err(Error::EmptyBag { id });
        };
        let dim = first.dim();
        for d in &descriptors {
            if d.dim() != dim {
                return Err(Error::DimensionMismatch {
                    expected: dim,
                    found: d.dim(),
                });
            }
        }
        Ok(VideoBag {
            id,
            descriptors,
            true_label,
        })
    }

    pub fn id(&self) -> &str {
        &self.id
    }

    pub fn descriptors(&self) -> &[FeatureVector] {
        &self.descriptors
    }

    pub fn len(&self) -> usize {
        self.descriptors.len()
    }

    pub fn is_empty(&self) -> bool {
        false // nonempty by construction
    }

    pub fn dim(&self) -> usize {
        self.descriptors[0].dim()
    }

    pub fn true_label(&self) -> Option<&str> {
        self.true_label.as_deref()
    }
}

/// Dense id assigned to a class label in arrival order.
#[derive(
    Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize,
)]
pub struct ClassId(pub u32);

impl std::fmt::Display for ClassId {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}", self.0)
    }
}

/// Bidirectional label table. Ids are handed out in first-seen order and the
/// set only ever grows.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct LabelTable {
    names: Vec<String>,
    by_name: HashMap<String, ClassId>,
}

impl LabelTable {
    pub fn new() -> Self {
        Self::default()
    }

    /// Returns the id for `name`, allocating the next dense id if unseen.
    pub fn intern(&mut self, name: &str) -> ClassId {
        if let Some(&id) = self.by_name.get(name) {
            return id;
        }
        let id = ClassId(self.names.len() as u32);
        self.names.push(name.to_string());
        self.by_name.insert(name.to_string(), id);
        id
    }

    pub fn id(&self, name: &str) -> Option<ClassId> {
        self.by_name.get(name).copied()
    }

    pub fn name(&self, id: ClassId) -> Option<&str> {
        self.names.get(id.0 as usize).map(String::as_str)
    }

    pub fn len(&self) -> usize {
        self.names.len()
    }

    pub fn is_empty(&self) -> bool {
        self.names.is_empty()
    }

    /// Label names in id order.
    pub fn names(&self) -> &[String] {
        &self.names
    }
}

impl From<Vec<String>> for LabelTable {
    fn from(names: Vec<String>) -> Self {
        let mut table = LabelTable::new();
        for n in names {
            table.intern(&n);
        }
        table
    }
}
