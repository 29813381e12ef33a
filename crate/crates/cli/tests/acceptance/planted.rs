use std::collections::HashSet;
use std::sync::OnceLock;

use segmodel_core::content::TokenRules;
use segmodel_core::eval::{auc, cross_validate, run_ablation, AblationSpec, EvalReport};
use segmodel_core::explain::tag_cloud;
use segmodel_core::ingest::{DeviceRules, EngineRules, Enricher, GeoTable};
use segmodel_core::query::SegmentQuery;
use segmodel_core::service::build_store;
use segmodel_core::svm::{assemble_training_set, train, SvmConfig, SvmModel, TrainingSet};
use segmodel_core::syngen::{generate, Corpus, GeneratorConfig, NamespaceSpec, SEGMENT_QUERY};
use segmodel_core::users::UserStore;
use segmodel_core::vector::{FeatureSetMask, FeatureSpace};

use crate::{ensure, Outcome};

const MASK: FeatureSetMask = FeatureSetMask::ALL;
const MIN_TOKEN_COUNT: usize = 2;
const FOLDS: usize = 5;

pub fn load(corpus: &Corpus) -> Result<UserStore, String> {
    let geo = GeoTable::from_csv(corpus.geo.as_bytes()).map_err(|e| e.to_string())?;
    let enricher = Enricher::new(geo, DeviceRules::default(), EngineRules::default(), "UTC").map_err(|e| e.to_string())?;
    let (store, _) = build_store(
        enricher,
        TokenRules::default(),
        Some(corpus.pages.as_bytes()),
        Some(corpus.logs.as_bytes()),
        Some(corpus.registrations.as_bytes()),
    )
    .map_err(|e| e.to_string())?;
    Ok(store)
}

/// The default planted corpus with its store, dictionary and query.
struct Planted {
    corpus: Corpus,
    store: UserStore,
    space: FeatureSpace,
    query: SegmentQuery,
}

static PLANTED: OnceLock<Result<Planted, String>> = OnceLock::new();
static FULL_HISTORY: OnceLock<Result<(TrainingSet, EvalReport, SvmModel), String>> = OnceLock::new();

fn planted() -> Result<&'static Planted, String> {
    PLANTED
        .get_or_init(|| {
            let corpus = generate(&GeneratorConfig::default()).map_err(|e| e.to_string())?;
            let store = load(&corpus)?;
            let space = FeatureSpace::build(&store, MASK, MIN_TOKEN_COUNT).map_err(|e| e.to_string())?;
            let query = SEGMENT_QUERY.parse().map_err(|e| format!("{e}"))?;
            Ok(Planted { corpus, store, space, query })
        })
        .as_ref()
        .map_err(Clone::clone)
}

fn evaluate_at(p: &Planted, min_visits: usize) -> Result<(TrainingSet, EvalReport), String> {
    let ts = assemble_training_set(&p.query, &p.store, &p.space, MASK, 1.0, min_visits, 0).map_err(|e| e.to_string())?;
    let report = cross_validate(&ts, FOLDS, &SvmConfig::default(), 0).map_err(|e| e.to_string())?;
    Ok((ts, report))
}

fn full_history() -> Result<&'static (TrainingSet, EvalReport, SvmModel), String> {
    FULL_HISTORY
        .get_or_init(|| {
            let p = planted()?;
            let (ts, report) = evaluate_at(p, 1)?;
            let model = train(&ts, &SvmConfig::default()).map_err(|e| e.to_string())?;
            Ok((ts, report, model))
        })
        .as_ref()
        .map_err(Clone::clone)
}

/// Oracle AUC restricted to the users of a training set.
fn oracle_auc_on(corpus: &Corpus, ts: &TrainingSet) -> Result<f64, String> {
    let ids: HashSet<&str> = ts.examples.iter().map(|e| e.user_id.as_str()).collect();
    let preds: Vec<(f64, i8)> = corpus.truth.iter().filter(|t| ids.contains(t.0.as_str())).map(|t| (t.2, t.1)).collect();
    auc(&preds).map_err(|e| e.to_string())
}

pub fn recovery() -> Outcome {
    let p = planted()?;
    let (ts, report, _) = full_history()?;
    let visits: usize = p.store.iter().map(|(_, _, r)| r.visits.len()).sum();
    let oracle = oracle_auc_on(&p.corpus, ts)?;
    let gap = oracle - report.auc;
    ensure(gap <= 0.05, || format!("pooled AUC {:.4} is {gap:.4} below the oracle {oracle:.4}", report.auc))?;
    ensure(report.auc <= oracle + 0.02, || format!("pooled AUC {:.4} exceeds the oracle {oracle:.4}", report.auc))?;
    Ok(format!(
        "{} users, {:.1} visits/user, pooled AUC {:.4}, oracle {:.4} (difference {gap:.4})",
        p.store.len(),
        visits as f64 / p.store.len() as f64,
        report.auc,
        oracle
    ))
}

pub fn explanation() -> Outcome {
    let p = planted()?;
    let (_, _, model) = full_history()?;
    let planted = p.corpus.oracle.planted_tokens();
    let cloud = tag_cloud(model, &model.positive_centroid, 10, &p.space).map_err(|e| e.to_string())?;
    let hits = cloud.terms.iter().filter(|t| planted.contains(&(t.namespace, t.token.clone()))).count();
    ensure(hits >= 8, || {
        let terms: Vec<String> = cloud.terms.iter().map(|t| format!("{}:{}", t.namespace, t.token)).collect();
        format!("{hits} of {} planted tokens in the cloud {terms:?}", planted.len())
    })?;
    let ranking = |m: &SvmModel| -> Result<Vec<String>, String> {
        let c = tag_cloud(m, &m.positive_centroid, 10, &p.space).map_err(|e| e.to_string())?;
        Ok(c.terms.iter().map(|t| format!("{}:{}", t.namespace, t.token)).collect())
    };
    let base = ranking(model)?;
    for alpha in [0.25, 3.0, 1e3] {
        let mut scaled = model.clone();
        scaled.w.iter_mut().for_each(|v| *v *= alpha);
        let r = ranking(&scaled)?;
        ensure(r == base, || format!("ranking changes when w is scaled by {alpha}"))?;
    }
    Ok(format!("{hits} of {} planted tokens in the top 10; ranking unchanged under scaling by 0.25, 3, 1000", planted.len()))
}

pub fn min_visits() -> Outcome {
    let p = planted()?;
    let (_, short, _) = full_history()?;
    let (ts, long) = evaluate_at(p, 10)?;
    let gain = long.auc - short.auc;
    ensure(gain >= 0.02, || format!("AUC {:.4} at min_visits 10 vs {:.4} at 1", long.auc, short.auc))?;
    Ok(format!(
        "AUC {:.4} at min_visits 1, {:.4} at min_visits 10 ({} examples), gain {gain:.4}",
        short.auc,
        long.auc,
        ts.len()
    ))
}

pub fn ablation() -> Outcome {
    let quiet = NamespaceSpec { discriminative: 0, ..GeneratorConfig::default().content };
    let cfg = GeneratorConfig {
        n_users: 2000,
        seed: 8,
        content: quiet,
        country: NamespaceSpec::new(12, 1, 0),
        hour: NamespaceSpec::new(24, 1, 0),
        ..GeneratorConfig::default()
    };
    let corpus = generate(&cfg).map_err(|e| e.to_string())?;
    let store = load(&corpus)?;
    let query: SegmentQuery = SEGMENT_QUERY.parse().map_err(|e| format!("{e}"))?;
    let spec = AblationSpec::standard(query);
    let table = run_ablation(&spec, &store).map_err(|e| e.to_string())?;
    ensure(table.rows.len() == 6, || format!("{} rows", table.rows.len()))?;
    for ((name, mask), row) in FeatureSetMask::PRESETS.iter().zip(&table.rows) {
        ensure(row.mask == *mask && row.min_visits == 1, || format!("row for {name} is {} / {}", row.mask, row.min_visits))?;
        ensure(row.auc.is_finite() && row.bep.is_finite(), || format!("row {name} has non-finite metrics"))?;
    }
    let get = |m| table.row(m, 1).map(|r| r.auc).unwrap_or(f64::NAN);
    let (entities, context) = (get(FeatureSetMask::ENTITIES), get(FeatureSetMask::CONTEXT));
    ensure(entities > context, || format!("entities AUC {entities:.4} does not beat context AUC {context:.4}"))?;
    let summary: Vec<String> = FeatureSetMask::PRESETS.iter().zip(&table.rows).map(|((n, _), r)| format!("{n} {:.3}", r.auc)).collect();
    Ok(format!("6 rows; AUC {}", summary.join(", ")))
}
