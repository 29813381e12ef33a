use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::SvmError;
use crate::query::{evaluate_ordinals, SegmentQuery};
use crate::users::UserStore;
use crate::vector::{user_vector, FeatureSetMask, FeatureSpace, SparseVector};

#[derive(Clone, Debug, PartialEq)]
pub struct Example {
    pub user_id: String,
    pub x: SparseVector,
    /// +1 for segment members, -1 otherwise.
    pub y: i8,
}

/// How a training set was drawn.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Provenance {
    pub query: String,
    pub seed: u64,
    pub neg_ratio: f64,
    pub min_visits: usize,
    pub mask: FeatureSetMask,
    pub feature_space_id: String,
}

#[derive(Clone, Debug, PartialEq)]
pub struct TrainingSet {
    pub examples: Vec<Example>,
    pub dim: usize,
    pub provenance: Provenance,
}

impl TrainingSet {
    pub fn len(&self) -> usize {
        self.examples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.examples.is_empty()
    }

    pub fn positives(&self) -> usize {
        self.examples.iter().filter(|e| e.y > 0).count()
    }

    pub fn negatives(&self) -> usize {
        self.len() - self.positives()
    }

    /// Copy restricted to the given example positions.
    pub fn subset(&self, positions: &[usize]) -> TrainingSet {
        TrainingSet {
            examples: positions.iter().map(|&i| self.examples[i].clone()).collect(),
            dim: self.dim,
            provenance: self.provenance.clone(),
        }
    }

    /// Normalized centroid of the positive examples.
    pub fn positive_centroid(&self) -> SparseVector {
        let pos: Vec<SparseVector> = self.examples.iter().filter(|e| e.y > 0).map(|e| e.x.clone()).collect();
        crate::vector::user_centroid(&pos).unwrap_or_default()
    }
}

/// Positives are all segment members with at least `min_visits` visits;
/// negatives are a seeded uniform sample, without replacement, of
/// `⌈neg_ratio·|pos|⌉` other users meeting the same visit threshold.
pub fn assemble_training_set(
    q: &SegmentQuery,
    store: &UserStore,
    space: &FeatureSpace,
    mask: FeatureSetMask,
    neg_ratio: f64,
    min_visits: usize,
    seed: u64,
) -> Result<TrainingSet, SvmError> {
    if !(neg_ratio.is_finite() && neg_ratio > 0.0) {
        return Err(SvmError::InvalidConfig(format!("neg_ratio must be positive, got {neg_ratio}")));
    }
    if min_visits == 0 {
        return Err(SvmError::InvalidConfig("min_visits must be at least 1".into()));
    }
    let members = evaluate_ordinals(q, store)?;
    let active = |o: u32| store.record_at(o).visits.len() >= min_visits;
    let positives: Vec<u32> = members.iter().copied().filter(|&o| active(o)).collect();
    if positives.is_empty() {
        return Err(SvmError::EmptySegment);
    }
    let mut is_member = vec![false; store.len()];
    for &o in &members {
        is_member[o as usize] = true;
    }
    let pool: Vec<u32> = (0..store.len() as u32).filter(|&o| !is_member[o as usize] && active(o)).collect();
    if pool.is_empty() {
        return Err(SvmError::NoNegativesAvailable);
    }
    let wanted = ((neg_ratio * positives.len() as f64).ceil() as usize).min(pool.len());
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut picked: Vec<usize> = rand::seq::index::sample(&mut rng, pool.len(), wanted).into_vec();
    picked.sort_unstable();
    let negatives: Vec<u32> = picked.into_iter().map(|k| pool[k]).collect();

    let example = |o: u32, y: i8| -> Result<Example, SvmError> {
        Ok(Example {
            user_id: store.user_id(o).to_string(),
            x: user_vector(store.record_at(o), space, mask)?,
            y,
        })
    };
    let mut examples = Vec::with_capacity(positives.len() + negatives.len());
    for o in positives {
        examples.push(example(o, 1)?);
    }
    for o in negatives {
        examples.push(example(o, -1)?);
    }
    Ok(TrainingSet {
        examples,
        dim: space.dim(),
        provenance: Provenance {
            query: q.describe(),
            seed,
            neg_ratio,
            min_visits,
            mask,
            feature_space_id: space.id().to_string(),
        },
    })
}
