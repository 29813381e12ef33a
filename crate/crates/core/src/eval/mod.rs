//! Ranking metrics, stratified cross-validation and feature-set ablations.

mod ablation;
mod metrics;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::svm::{train, SvmConfig, SvmError, TrainingSet};

pub use ablation::{run_ablation, AblationRow, AblationSpec, AblationTable};
pub use metrics::{auc, bep, roc};

#[derive(Debug, Error)]
pub enum EvalError {
    #[error("no positive examples")]
    NoPositives,
    #[error("predictions contain a single class")]
    SingleClass,
    #[error("score at position {0} is not finite")]
    NonFiniteScore(usize),
    #[error("{k}-fold cross-validation needs at least {k} examples per class, got {positives} positive and {negatives} negative")]
    TooFewExamples { k: usize, positives: usize, negatives: usize },
    #[error("invalid evaluation settings: {0}")]
    InvalidSpec(String),
    #[error(transparent)]
    Svm(#[from] SvmError),
    #[error(transparent)]
    Vector(#[from] crate::vector::VectorError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FoldMetrics {
    pub fold: usize,
    pub positives: usize,
    pub negatives: usize,
    pub bep: f64,
    pub auc: f64,
    pub objective: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct HeldOut {
    pub user_id: String,
    pub fold: usize,
    pub label: i8,
    pub score: f64,
}

/// Cross-validation results. The headline `bep`, `auc` and `roc` are computed
/// on the pooled held-out scores; fold averages are reported alongside.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub k: usize,
    pub seed: u64,
    pub examples: usize,
    pub positives: usize,
    pub negatives: usize,
    pub bep: f64,
    pub auc: f64,
    pub roc: Vec<(f64, f64)>,
    pub mean_fold_bep: f64,
    pub mean_fold_auc: f64,
    pub folds: Vec<FoldMetrics>,
    pub predictions: Vec<HeldOut>,
}

impl EvalReport {
    /// ROC points as `fpr,tpr` CSV.
    pub fn roc_csv(&self) -> String {
        let mut out = String::from("fpr,tpr\n");
        for (f, t) in &self.roc {
            out.push_str(&format!("{f},{t}\n"));
        }
        out
    }
}

/// Assigns each example to one of `k` folds. Each class is shuffled with the
/// seed and dealt round-robin, so per-class counts differ by at most one
/// between folds; negatives continue dealing where positives stopped to keep
/// fold sizes balanced too.
pub fn stratified_folds(labels: &[i8], k: usize, seed: u64) -> Result<Vec<usize>, EvalError> {
    if k < 2 {
        return Err(EvalError::InvalidSpec(format!("k must be at least 2, got {k}")));
    }
    let pos: Vec<usize> = (0..labels.len()).filter(|&i| labels[i] > 0).collect();
    let neg: Vec<usize> = (0..labels.len()).filter(|&i| labels[i] <= 0).collect();
    if pos.len() < k || neg.len() < k {
        return Err(EvalError::TooFewExamples {
            k,
            positives: pos.len(),
            negatives: neg.len(),
        });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut fold = vec![0; labels.len()];
    let mut next = 0;
    for mut class in [pos, neg] {
        class.shuffle(&mut rng);
        for i in class {
            fold[i] = next % k;
            next += 1;
        }
    }
    Ok(fold)
}

pub fn cross_validate(ts: &TrainingSet, k: usize, cfg: &SvmConfig, seed: u64) -> Result<EvalReport, EvalError> {
    let labels: Vec<i8> = ts.examples.iter().map(|e| e.y).collect();
    let fold_of = stratified_folds(&labels, k, seed)?;
    cfg.validate()?;

    let results: Vec<Result<(Vec<(usize, f64)>, f64), EvalError>> = std::thread::scope(|scope| {
        let handles: Vec<_> = (0..k)
            .map(|f| {
                let fold_of = &fold_of;
                scope.spawn(move || {
                    let train_idx: Vec<usize> = (0..ts.len()).filter(|&i| fold_of[i] != f).collect();
                    let model = train(&ts.subset(&train_idx), cfg)?;
                    let scored = (0..ts.len())
                        .filter(|&i| fold_of[i] == f)
                        .map(|i| Ok((i, model.score(&ts.examples[i].x)?)))
                        .collect::<Result<Vec<_>, SvmError>>()?;
                    Ok((scored, model.training.objective))
                })
            })
            .collect();
        handles.into_iter().map(|h| h.join().expect("fold worker panicked")).collect()
    });

    let mut scores = vec![0.0; ts.len()];
    let mut folds = Vec::with_capacity(k);
    for (f, r) in results.into_iter().enumerate() {
        let (scored, objective) = r?;
        let preds: Vec<(f64, i8)> = scored.iter().map(|&(i, s)| (s, labels[i])).collect();
        for &(i, s) in &scored {
            scores[i] = s;
        }
        folds.push(FoldMetrics {
            fold: f,
            positives: preds.iter().filter(|p| p.1 > 0).count(),
            negatives: preds.iter().filter(|p| p.1 <= 0).count(),
            bep: bep(&preds)?,
            auc: auc(&preds)?,
            objective,
        });
    }
    let pooled: Vec<(f64, i8)> = scores.iter().copied().zip(labels.iter().copied()).collect();
    let (roc_points, pooled_auc) = roc(&pooled)?;
    Ok(EvalReport {
        k,
        seed,
        examples: ts.len(),
        positives: ts.positives(),
        negatives: ts.negatives(),
        bep: bep(&pooled)?,
        auc: pooled_auc,
        roc: roc_points,
        mean_fold_bep: folds.iter().map(|f| f.bep).sum::<f64>() / k as f64,
        mean_fold_auc: folds.iter().map(|f| f.auc).sum::<f64>() / k as f64,
        folds,
        predictions: ts
            .examples
            .iter()
            .enumerate()
            .map(|(i, e)| HeldOut {
                user_id: e.user_id.clone(),
                fold: fold_of[i],
                label: e.y,
                score: scores[i],
            })
            .collect(),
    })
}
