//! Pipeline plumbing shared by the command-line tool and the scoring
//! endpoint: configuration, store construction and model scoring.

mod config;
mod http;
mod scoring;

use std::fs::File;
use std::io::{BufRead, BufReader};
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::content::{ContentError, Gazetteer, PageStore, TokenRules};
use crate::eval::EvalError;
use crate::explain::ExplainError;
use crate::ingest::{DeviceRules, EngineRules, Enricher, GeoTable, IngestError};
use crate::query::QueryError;
use crate::svm::SvmError;
use crate::users::{StoreError, UserStore};
use crate::vector::VectorError;

pub use config::{EvaluatorSettings, Paths, PipelineConfig, TrainerSettings, VectorizerSettings};
pub use http::{handle_score, ModelRegistry, ScoreRequest, ScoreResponse, UserScore};
pub use scoring::{Scorer, StreamScorer};

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error("configuration error: {0}")]
    Config(String),
    #[error(transparent)]
    Ingest(#[from] IngestError),
    #[error(transparent)]
    Content(#[from] ContentError),
    #[error(transparent)]
    Store(#[from] StoreError),
    #[error(transparent)]
    Query(#[from] QueryError),
    #[error(transparent)]
    Vector(#[from] VectorError),
    #[error(transparent)]
    Svm(#[from] SvmError),
    #[error(transparent)]
    Eval(#[from] EvalError),
    #[error(transparent)]
    Explain(#[from] ExplainError),
    #[error("{path}: {source}")]
    File { path: String, source: std::io::Error },
}

/// Counts gathered while building a store.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct IngestReport {
    pub pages: usize,
    pub events_accepted: usize,
    pub events_malformed: usize,
    pub profiles_accepted: usize,
    pub profiles_rejected: usize,
    pub users: usize,
}

/// Builds a store from its three inputs. Pages are loaded first so every
/// visit is linked to its page record.
pub fn build_store(
    enricher: Enricher,
    rules: TokenRules,
    pages: Option<impl BufRead>,
    logs: Option<impl BufRead>,
    registrations: Option<impl BufRead>,
) -> Result<(UserStore, IngestReport), PipelineError> {
    let mut report = IngestReport::default();
    let mut page_store = PageStore::new(rules);
    if let Some(r) = pages {
        report.pages = page_store.read_jsonl(r)?;
    }
    let mut store = UserStore::new(enricher, page_store);
    if let Some(r) = logs {
        let (events, stats) = store.enricher().read_events(r)?;
        report.events_accepted = stats.accepted;
        report.events_malformed = stats.malformed;
        for e in events {
            store.add_visit(e);
        }
    }
    if let Some(r) = registrations {
        let (ok, bad) = store.read_profiles(r)?;
        report.profiles_accepted = ok;
        report.profiles_rejected = bad;
    }
    report.users = store.len();
    Ok((store, report))
}

fn open(path: &Path) -> Result<BufReader<File>, PipelineError> {
    File::open(path).map(BufReader::new).map_err(|source| PipelineError::File {
        path: path.display().to_string(),
        source,
    })
}

fn open_opt(path: Option<&Path>) -> Result<Option<BufReader<File>>, PipelineError> {
    path.map(open).transpose()
}

impl PipelineConfig {
    /// Loads the geo table, user-agent and search-engine rules named in the
    /// config. Missing tables are empty.
    pub fn enricher(&self) -> Result<Enricher, PipelineError> {
        let p = &self.paths;
        let geo = match open_opt(p.geo.as_deref())? {
            Some(r) => GeoTable::from_csv(r)?,
            None => GeoTable::default(),
        };
        let devices = match open_opt(p.devices.as_deref())? {
            Some(r) => DeviceRules::from_csv(r)?,
            None => DeviceRules::default(),
        };
        let engines = match open_opt(p.engines.as_deref())? {
            Some(r) => EngineRules::from_csv(r)?,
            None => EngineRules::default(),
        };
        Ok(Enricher::new(geo, devices, engines, &self.timezone)?)
    }

    pub fn token_rules(&self) -> Result<TokenRules, PipelineError> {
        let p = &self.paths;
        let stoplist = match open_opt(p.stoplist.as_deref())? {
            Some(r) => TokenRules::stoplist_from_lines(r)?,
            None => Default::default(),
        };
        let gazetteer = match open_opt(p.gazetteer.as_deref())? {
            Some(r) => Gazetteer::from_lines(r)?,
            None => Gazetteer::default(),
        };
        Ok(TokenRules { stoplist, gazetteer })
    }

    /// Reads every configured input and builds the user store.
    pub fn build_store(&self) -> Result<(UserStore, IngestReport), PipelineError> {
        let p = &self.paths;
        build_store(
            self.enricher()?,
            self.token_rules()?,
            open_opt(p.pages.as_deref())?,
            open_opt(p.logs.as_deref())?,
            open_opt(p.registrations.as_deref())?,
        )
    }
}

/// A model plus the feature space and training set it was fitted on.
#[derive(Clone, Debug)]
pub struct Trained {
    pub model: crate::svm::SvmModel,
    pub space: crate::vector::FeatureSpace,
    pub training_set: crate::svm::TrainingSet,
}

/// Builds the feature space, assembles the training set for `query` and
/// trains the SVM with the settings of `cfg`.
pub fn train_segment(
    store: &UserStore,
    query: &crate::query::SegmentQuery,
    cfg: &PipelineConfig,
) -> Result<Trained, PipelineError> {
    let mask = cfg.vectorizer.mask;
    let space = crate::vector::FeatureSpace::build(store, mask, cfg.vectorizer.min_token_count)?;
    let training_set = crate::svm::assemble_training_set(
        query,
        store,
        &space,
        mask,
        cfg.trainer.neg_ratio,
        cfg.trainer.min_visits,
        cfg.trainer.seed,
    )?;
    let model = crate::svm::train(&training_set, &cfg.trainer.svm())?;
    Ok(Trained {
        model,
        space,
        training_set,
    })
}
