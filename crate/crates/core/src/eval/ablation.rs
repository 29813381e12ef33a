use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;

use serde::{Deserialize, Serialize};

use super::{cross_validate, EvalError, EvalReport};
use crate::query::SegmentQuery;
use crate::svm::{assemble_training_set, SvmConfig};
use crate::users::UserStore;
use crate::vector::{FeatureSetMask, FeatureSpace};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AblationSpec {
    pub query: SegmentQuery,
    pub masks: Vec<FeatureSetMask>,
    pub min_visits: Vec<usize>,
    pub k: usize,
    pub seed: u64,
    pub neg_ratio: f64,
    pub min_token_count: usize,
    pub svm: SvmConfig,
    /// Cells evaluated concurrently; 0 means one per available core.
    pub threads: usize,
}

impl AblationSpec {
    /// The six standard feature sets at `min_visits = 1`, with defaults.
    pub fn standard(query: SegmentQuery) -> Self {
        Self {
            query,
            masks: FeatureSetMask::PRESETS.iter().map(|p| p.1).collect(),
            min_visits: vec![1],
            k: 5,
            seed: 0,
            neg_ratio: 1.0,
            min_token_count: 1,
            svm: SvmConfig::default(),
            threads: 0,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AblationRow {
    pub mask: FeatureSetMask,
    pub min_visits: usize,
    pub bep: f64,
    pub auc: f64,
    pub mean_fold_bep: f64,
    pub mean_fold_auc: f64,
    pub positives: usize,
    pub negatives: usize,
    pub dim: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AblationTable {
    pub query: String,
    pub k: usize,
    pub seed: u64,
    pub rows: Vec<AblationRow>,
    #[serde(skip)]
    pub reports: Vec<EvalReport>,
}

impl AblationTable {
    /// `mask,min_visits,bep,auc` rows in mask-major order.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("mask,min_visits,bep,auc\n");
        for r in &self.rows {
            out.push_str(&format!("{},{},{},{}\n", r.mask, r.min_visits, r.bep, r.auc));
        }
        out
    }

    pub fn row(&self, mask: FeatureSetMask, min_visits: usize) -> Option<&AblationRow> {
        self.rows.iter().find(|r| r.mask == mask && r.min_visits == min_visits)
    }
}

/// Cross-validates every `(mask, min_visits)` cell with the same seed.
pub fn run_ablation(spec: &AblationSpec, store: &UserStore) -> Result<AblationTable, EvalError> {
    if spec.masks.is_empty() || spec.min_visits.is_empty() {
        return Err(EvalError::InvalidSpec("masks and min_visits must be non-empty".into()));
    }
    let spaces = spec
        .masks
        .iter()
        .map(|&m| FeatureSpace::build(store, m, spec.min_token_count))
        .collect::<Result<Vec<_>, _>>()?;
    let cells: Vec<(usize, usize)> = (0..spec.masks.len())
        .flat_map(|m| spec.min_visits.iter().map(move |&v| (m, v)))
        .collect();

    let run_cell = |&(m, min_visits): &(usize, usize)| -> Result<(AblationRow, EvalReport), EvalError> {
        let mask = spec.masks[m];
        let ts = assemble_training_set(&spec.query, store, &spaces[m], mask, spec.neg_ratio, min_visits, spec.seed)?;
        let report = cross_validate(&ts, spec.k, &spec.svm, spec.seed)?;
        let row = AblationRow {
            mask,
            min_visits,
            bep: report.bep,
            auc: report.auc,
            mean_fold_bep: report.mean_fold_bep,
            mean_fold_auc: report.mean_fold_auc,
            positives: report.positives,
            negatives: report.negatives,
            dim: spaces[m].dim(),
        };
        Ok((row, report))
    };

    let threads = match spec.threads {
        0 => std::thread::available_parallelism().map_or(1, |n| n.get()),
        t => t,
    }
    .min(cells.len());
    let next = AtomicUsize::new(0);
    let slots: Mutex<Vec<Option<Result<(AblationRow, EvalReport), EvalError>>>> =
        Mutex::new((0..cells.len()).map(|_| None).collect());
    std::thread::scope(|scope| {
        for _ in 0..threads {
            scope.spawn(|| loop {
                let i = next.fetch_add(1, Ordering::Relaxed);
                if i >= cells.len() {
                    break;
                }
                let r = run_cell(&cells[i]);
                slots.lock().expect("result lock")[i] = Some(r);
            });
        }
    });

    let mut rows = Vec::with_capacity(cells.len());
    let mut reports = Vec::with_capacity(cells.len());
    for slot in slots.into_inner().expect("result lock") {
        let (row, report) = slot.expect("every cell ran")?;
        rows.push(row);
        reports.push(report);
    }
    Ok(AblationTable {
        query: spec.query.describe(),
        k: spec.k,
        seed: spec.seed,
        rows,
        reports,
    })
}
