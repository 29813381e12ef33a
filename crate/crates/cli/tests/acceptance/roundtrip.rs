use segmodel_core::eval::{cross_validate, EvalReport};
use segmodel_core::fields::Field;
use segmodel_core::query::{evaluate, SegmentQuery};
use segmodel_core::service::{train_segment, PipelineConfig};
use segmodel_core::svm::SvmModel;
use segmodel_core::syngen::{generate, GeneratorConfig, SEGMENT_QUERY};
use segmodel_core::users::UserStore;
use segmodel_core::vector::{user_vector, FeatureSpace};

use crate::planted::load;
use crate::{ensure, Outcome};

struct Run {
    store: UserStore,
    report: EvalReport,
    model: SvmModel,
    model_bytes: Vec<u8>,
    space: FeatureSpace,
    space_bytes: Vec<u8>,
}

fn pipeline() -> Result<Run, String> {
    let corpus = generate(&GeneratorConfig { n_users: 800, seed: 3, ..GeneratorConfig::default() }).map_err(|e| e.to_string())?;
    let store = load(&corpus)?;
    let cfg = PipelineConfig::default();
    let query: SegmentQuery = SEGMENT_QUERY.parse().map_err(|e| format!("{e}"))?;
    let trained = train_segment(&store, &query, &cfg).map_err(|e| e.to_string())?;
    let report = cross_validate(&trained.training_set, cfg.evaluator.k, &cfg.trainer.svm(), cfg.evaluator.seed)
        .map_err(|e| e.to_string())?;
    let mut model_bytes = Vec::new();
    trained.model.write(&mut model_bytes).map_err(|e| e.to_string())?;
    let mut space_bytes = Vec::new();
    trained.space.write_tsv(&mut space_bytes).map_err(|e| e.to_string())?;
    Ok(Run {
        store,
        report,
        model: trained.model,
        model_bytes,
        space: trained.space,
        space_bytes,
    })
}

fn close(a: f64, b: f64) -> bool {
    (a - b).abs() <= 1e-9
}

fn same_report(a: &EvalReport, b: &EvalReport) -> Result<(), String> {
    ensure(close(a.auc, b.auc) && close(a.bep, b.bep), || format!("AUC/BEP {}/{} vs {}/{}", a.auc, a.bep, b.auc, b.bep))?;
    ensure(close(a.mean_fold_auc, b.mean_fold_auc) && close(a.mean_fold_bep, b.mean_fold_bep), || "fold means differ".into())?;
    ensure(a.predictions.len() == b.predictions.len(), || "prediction counts differ".into())?;
    for (x, y) in a.predictions.iter().zip(&b.predictions) {
        ensure(x.user_id == y.user_id && x.fold == y.fold && close(x.score, y.score), || {
            format!("held-out prediction for {} differs", x.user_id)
        })?;
    }
    Ok(())
}

fn probe_queries() -> Vec<SegmentQuery> {
    use SegmentQuery::*;
    vec![
        Eq(Field::Gender, "female".into()),
        Not(Box::new(Eq(Field::Gender, "male".into()))),
        Or(vec![Eq(Field::Country, "c00".into()), Range(Field::HourOfDay, 6, 9)]),
        And(vec![Eq(Field::NamedEntities, "ent000".into()), Not(Box::new(Eq(Field::Category, "cat01".into())))]),
    ]
}

pub fn check() -> Outcome {
    let a = pipeline()?;
    let b = pipeline()?;
    same_report(&a.report, &b.report)?;
    ensure(a.model_bytes == b.model_bytes, || "model files differ between runs".into())?;
    ensure(a.space_bytes == b.space_bytes, || "feature-space files differ between runs".into())?;

    let mut snap = Vec::new();
    a.store.write_snapshot(&mut snap).map_err(|e| e.to_string())?;
    let restored = UserStore::read_snapshot(snap.as_slice()).map_err(|e| e.to_string())?;
    for q in probe_queries() {
        let (x, y) = (evaluate(&q, &a.store), evaluate(&q, &restored));
        ensure(x.as_ref().ok() == y.as_ref().ok() && x.is_ok(), || format!("query {q} differs after the snapshot round trip"))?;
    }
    let mask = a.model.mask;
    for (_, id, record) in a.store.iter() {
        let other = restored.record(id).ok_or_else(|| format!("user {id} missing after restore"))?;
        let (x, y) = (user_vector(record, &a.space, mask).ok(), user_vector(other, &a.space, mask).ok());
        ensure(x == y, || format!("user {id} vector differs after the snapshot round trip"))?;
    }

    let space = FeatureSpace::read_tsv(a.space_bytes.as_slice()).map_err(|e| e.to_string())?;
    ensure(space.id() == a.space.id() && space.dim() == a.space.dim(), || "feature space id or size changed".into())?;
    for i in 0..space.dim() as u32 {
        let (f, t) = a.space.column(i).unwrap();
        ensure(space.column(i) == Some((f, t)) && space.index_of(f, t) == Some(i), || format!("column {i} changed"))?;
    }

    let model = SvmModel::read(a.model_bytes.as_slice()).map_err(|e| e.to_string())?;
    let mut again = Vec::new();
    model.write(&mut again).map_err(|e| e.to_string())?;
    ensure(again == a.model_bytes, || "model file changes when rewritten".into())?;
    let mut scored = 0;
    for (_, id, record) in restored.iter() {
        let Ok(x) = user_vector(record, &space, mask) else { continue };
        let s1 = a.model.score(&x).map_err(|e| e.to_string())?;
        let s2 = model.score(&x).map_err(|e| e.to_string())?;
        ensure(s1.to_bits() == s2.to_bits(), || format!("user {id}: score {s1} vs {s2} after the model round trip"))?;
        scored += 1;
    }
    Ok(format!(
        "two runs agree (AUC {:.6}), identical model and space files; {} users and {scored} scores identical after round trips",
        a.report.auc,
        restored.len()
    ))
}
