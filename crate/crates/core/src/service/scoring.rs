use std::collections::HashMap;

use crate::content::PageStore;
use crate::ingest::{AccessEvent, Enricher};
use crate::svm::SvmModel;
use crate::users::Visit;
use crate::vector::{vectorize_visit, CentroidAccumulator, FeatureSpace, SparseVector};

use super::{PipelineError, UserScore};

/// A trained model together with everything needed to turn raw log records
/// into its feature vectors. Immutable once built.
#[derive(Clone, Debug)]
pub struct Scorer {
    model: SvmModel,
    space: FeatureSpace,
    enricher: Enricher,
    pages: PageStore,
}

impl Scorer {
    pub fn new(model: SvmModel, space: FeatureSpace, enricher: Enricher, pages: PageStore) -> Result<Self, PipelineError> {
        model.check_space(&space)?;
        Ok(Self {
            model,
            space,
            enricher,
            pages,
        })
    }

    pub fn model(&self) -> &SvmModel {
        &self.model
    }

    pub fn space(&self) -> &FeatureSpace {
        &self.space
    }

    pub fn enricher(&self) -> &Enricher {
        &self.enricher
    }

    pub fn parse_event(&self, line: &str) -> Result<AccessEvent, PipelineError> {
        Ok(self.enricher.parse_event(line)?)
    }

    pub fn visit_vector(&self, event: &AccessEvent) -> SparseVector {
        let visit = Visit {
            event: event.clone(),
            page: self.pages.entry(&event.url).cloned(),
        };
        vectorize_visit(&visit, &self.space, self.model.mask)
    }

    pub fn score_vector(&self, x: &SparseVector) -> Result<f64, PipelineError> {
        Ok(self.model.score(x)?)
    }

    pub fn user_score(&self, user_id: &str, acc: &CentroidAccumulator) -> Result<UserScore, PipelineError> {
        let c = acc.centroid()?;
        let score = self.score_vector(&c)?;
        Ok(UserScore {
            user_id: user_id.to_string(),
            score,
            decision: if score > 0.0 { 1 } else { -1 },
        })
    }

    /// Scores each user on the centroid of their events, users listed in
    /// order of first appearance.
    pub fn score_batch(&self, events: &[AccessEvent]) -> Result<Vec<UserScore>, PipelineError> {
        let mut order: Vec<&str> = Vec::new();
        let mut accs: HashMap<&str, CentroidAccumulator> = HashMap::new();
        for e in events {
            let acc = accs.entry(&e.user_id).or_insert_with(|| {
                order.push(&e.user_id);
                CentroidAccumulator::new()
            });
            acc.push(&self.visit_vector(e));
        }
        order.into_iter().map(|u| self.user_score(u, &accs[u])).collect()
    }
}

/// Rolling per-user centroids over an event stream.
#[derive(Debug)]
pub struct StreamScorer<'a> {
    scorer: &'a Scorer,
    users: HashMap<String, CentroidAccumulator>,
}

impl<'a> StreamScorer<'a> {
    pub fn new(scorer: &'a Scorer) -> Self {
        Self {
            scorer,
            users: HashMap::new(),
        }
    }

    /// Folds the event into its user's centroid and returns the user's
    /// updated score.
    pub fn push(&mut self, event: &AccessEvent) -> Result<UserScore, PipelineError> {
        let x = self.scorer.visit_vector(event);
        let acc = self.users.entry(event.user_id.clone()).or_default();
        acc.push(&x);
        self.scorer.user_score(&event.user_id, acc)
    }

    pub fn users(&self) -> usize {
        self.users.len()
    }
}
