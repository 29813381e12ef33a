//! Vector space representation of visits and users.
//!
//! Each namespace (visit-level field) is a block of the feature space. A
//! visit's vector holds raw term frequencies per block, each active block is
//! scaled to unit length and the whole vector by `1/sqrt(F)` for `F` active
//! blocks, so every block carries the same share of the norm no matter how
//! many tokens it has. A user is the normalized centroid of their visits.

mod space;
mod sparse;

use std::collections::BTreeMap;

use thiserror::Error;

use crate::users::{UserRecord, Visit};

pub use space::{FeatureSetMask, FeatureSpace};
pub use sparse::SparseVector;

#[derive(Debug, Error)]
pub enum VectorError {
    #[error("no token reaches the minimum count; the vocabulary is empty")]
    EmptyVocabulary,
    #[error("a centroid needs at least one visit")]
    NoVisits,
    #[error("feature set mask is empty")]
    EmptyMask,
    #[error("unknown feature set {0:?}")]
    UnknownMask(String),
    #[error("non-finite value {value} at index {index}")]
    NonFinite { index: u32, value: f64 },
    #[error("invalid feature space: {0}")]
    InvalidSpace(String),
    #[error("cannot parse sparse vector: {0}")]
    Parse(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Feature vector of one visit over the namespaces of `space` selected by
/// `mask`. Tokens outside the dictionary are ignored; a visit with no known
/// token in any namespace maps to the zero vector.
pub fn vectorize_visit(visit: &Visit, space: &FeatureSpace, mask: FeatureSetMask) -> SparseVector {
    let mut blocks: Vec<Vec<(u32, f64)>> = Vec::new();
    for (field, _) in space.blocks() {
        if !mask.includes_field(*field) {
            continue;
        }
        let mut ids: Vec<u32> = field
            .visit_tokens(visit)
            .iter()
            .filter_map(|t| space.index_of(*field, t))
            .collect();
        if ids.is_empty() {
            continue;
        }
        ids.sort_unstable();
        let mut block: Vec<(u32, f64)> = Vec::new();
        for i in ids {
            match block.last_mut() {
                Some(last) if last.0 == i => last.1 += 1.0,
                _ => block.push((i, 1.0)),
            }
        }
        blocks.push(block);
    }
    let scale = 1.0 / (blocks.len() as f64).sqrt();
    let mut entries = Vec::with_capacity(blocks.iter().map(Vec::len).sum());
    for block in blocks {
        let norm = block.iter().map(|e| e.1 * e.1).sum::<f64>().sqrt();
        entries.extend(block.into_iter().map(|(i, tf)| (i, tf / norm * scale)));
    }
    SparseVector::from_sorted_unchecked(entries)
}

/// Running sum of visit vectors. Streaming and batch scoring both go through
/// this type, so the same visits in the same order give the same centroid to
/// the last bit.
#[derive(Clone, Debug, Default)]
pub struct CentroidAccumulator {
    sum: BTreeMap<u32, f64>,
    count: usize,
}

impl CentroidAccumulator {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn push(&mut self, v: &SparseVector) {
        for (i, x) in v.iter() {
            *self.sum.entry(i).or_insert(0.0) += x;
        }
        self.count += 1;
    }

    pub fn count(&self) -> usize {
        self.count
    }

    /// Mean of the pushed vectors scaled to unit length.
    pub fn centroid(&self) -> Result<SparseVector, VectorError> {
        if self.count == 0 {
            return Err(VectorError::NoVisits);
        }
        let n = self.count as f64;
        let mean: Vec<(u32, f64)> = self
            .sum
            .iter()
            .map(|(&i, &s)| (i, s / n))
            .filter(|e| e.1 != 0.0)
            .collect();
        Ok(SparseVector::from_sorted_unchecked(mean).normalized())
    }
}

pub fn user_centroid(visits: &[SparseVector]) -> Result<SparseVector, VectorError> {
    let mut acc = CentroidAccumulator::new();
    for v in visits {
        acc.push(v);
    }
    acc.centroid()
}

/// Centroid of a user's visits; `NoVisits` for users known only from their
/// registration.
pub fn user_vector(record: &UserRecord, space: &FeatureSpace, mask: FeatureSetMask) -> Result<SparseVector, VectorError> {
    let mut acc = CentroidAccumulator::new();
    for v in &record.visits {
        acc.push(&vectorize_visit(v, space, mask));
    }
    acc.centroid()
}
