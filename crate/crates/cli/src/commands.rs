use std::fs;
use std::io::{self, BufRead, BufWriter, Write};
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use serde_json::json;

use segmodel_core::eval::{cross_validate, run_ablation, AblationSpec};
use segmodel_core::explain::{tag_cloud, Format};
use segmodel_core::query::SegmentQuery;
use segmodel_core::service::{train_segment, PipelineConfig, Scorer, StreamScorer};
use segmodel_core::svm::{assemble_training_set, load_model, SvmModel};
use segmodel_core::syngen::{generate, GeneratorConfig};
use segmodel_core::users::UserStore;
use segmodel_core::vector::{FeatureSetMask, FeatureSpace};

use crate::exit::{CliError, ExitKind};
use crate::{
    AblateArgs, Cli, Command, EvalArgs, ExplainArgs, IngestArgs, ModelArgs, QueryArgs, ScoreArgs, SegmentArgs, StoreArg,
    SyngenArgs, TrainArgs,
};

pub fn run(cli: Cli) -> Result<()> {
    let cfg = match &cli.config {
        Some(path) => PipelineConfig::load(path).with_context(|| format!("loading config {}", path.display()))?,
        None => PipelineConfig::default(),
    };
    match cli.command {
        Command::Ingest(a) => ingest(cfg, a),
        Command::Query(a) => query(&cfg, a),
        Command::Train(a) => train(cfg, a),
        Command::Eval(a) => eval(cfg, a),
        Command::Ablate(a) => ablate(cfg, a),
        Command::Explain(a) => explain(a),
        Command::Score(a) => score(&cfg, a),
        Command::Serve(a) => crate::serve::serve(&cfg, a),
        Command::Syngen(a) => syngen(a),
    }
}

fn write_file(path: &Path, bytes: &[u8]) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    }
    fs::write(path, bytes).with_context(|| format!("writing {}", path.display()))
}

fn print_json(value: &serde_json::Value) -> Result<()> {
    let mut out = io::stdout().lock();
    serde_json::to_writer_pretty(&mut out, value)?;
    writeln!(out)?;
    Ok(())
}

fn workspace_file(cfg: &PipelineConfig, name: &str) -> Option<PathBuf> {
    cfg.paths.workspace.as_ref().map(|w| w.join(name))
}

pub fn store_path(cfg: &PipelineConfig, arg: &StoreArg) -> Result<PathBuf> {
    arg.store
        .clone()
        .or_else(|| workspace_file(cfg, "store.snap"))
        .ok_or_else(|| CliError::input("no store given: pass --store or set paths.workspace in the config").into())
}

pub fn load_store(cfg: &PipelineConfig, arg: &StoreArg) -> Result<UserStore> {
    let path = store_path(cfg, arg)?;
    if !path.exists() {
        return Err(CliError::input(format!("store snapshot {} does not exist", path.display())).into());
    }
    UserStore::load(&path).with_context(|| format!("loading store {}", path.display()))
}

fn parse_query(text: &str) -> Result<SegmentQuery> {
    text.parse::<SegmentQuery>()
        .with_context(|| format!("parsing query {text:?}"))
}

fn parse_mask(text: &str) -> Result<FeatureSetMask> {
    text.parse::<FeatureSetMask>()
        .map_err(|e| CliError::input(format!("--mask {text:?}: {e}")).into())
}

/// The feature space stored beside a model: `dir/stem.space.tsv`.
pub fn space_path_for(model: &Path) -> PathBuf {
    let stem = model.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
    model.with_file_name(format!("{stem}.space.tsv"))
}

pub fn load_model_and_space(args: &ModelArgs) -> Result<(SvmModel, FeatureSpace)> {
    let model_path = &args.model;
    let space_path = args.space.clone().unwrap_or_else(|| space_path_for(model_path));
    for p in [model_path, &space_path] {
        if !p.exists() {
            return Err(CliError {
                kind: ExitKind::Model,
                message: format!("{} does not exist", p.display()),
            }
            .into());
        }
    }
    let model = load_model(model_path).with_context(|| format!("loading model {}", model_path.display()))?;
    let space = FeatureSpace::load(&space_path).with_context(|| format!("loading feature space {}", space_path.display()))?;
    model.check_space(&space)?;
    Ok((model, space))
}

fn apply_segment(cfg: &mut PipelineConfig, a: &SegmentArgs) -> Result<()> {
    if let Some(s) = a.seed {
        cfg.trainer.seed = s;
        cfg.evaluator.seed = s;
    }
    if let Some(m) = &a.mask {
        cfg.vectorizer.mask = parse_mask(m)?;
    }
    if let Some(v) = a.min_visits {
        cfg.trainer.min_visits = v;
    }
    if let Some(r) = a.neg_ratio {
        cfg.trainer.neg_ratio = r;
    }
    if let Some(c) = a.min_token_count {
        cfg.vectorizer.min_token_count = c;
    }
    if let Some(l) = a.lambda {
        cfg.trainer.lambda = l;
    }
    if let Some(e) = a.epochs {
        cfg.trainer.epochs = e;
    }
    cfg.validate()?;
    Ok(())
}

fn ingest(mut cfg: PipelineConfig, a: IngestArgs) -> Result<()> {
    let p = &mut cfg.paths;
    for (slot, flag) in [
        (&mut p.logs, a.logs),
        (&mut p.pages, a.pages),
        (&mut p.registrations, a.registrations),
        (&mut p.geo, a.geo),
        (&mut p.devices, a.devices),
        (&mut p.engines, a.engines),
        (&mut p.stoplist, a.stoplist),
        (&mut p.gazetteer, a.gazetteer),
    ] {
        if flag.is_some() {
            *slot = flag;
        }
    }
    if let Some(tz) = a.timezone {
        cfg.timezone = tz;
    }
    cfg.validate()?;
    cfg.check_paths()?;
    let out = a
        .out
        .clone()
        .or_else(|| workspace_file(&cfg, "store.snap"))
        .ok_or_else(|| CliError::input("no output given: pass --out or set paths.workspace in the config"))?;
    let (store, report) = cfg.build_store()?;
    let mut bytes = Vec::new();
    store.write_snapshot(&mut bytes)?;
    write_file(&out, &bytes)?;
    print_json(&json!({ "snapshot": out.display().to_string(), "report": report }))
}

fn query(cfg: &PipelineConfig, a: QueryArgs) -> Result<()> {
    let q = parse_query(&a.query)?;
    let store = load_store(cfg, &a.store)?;
    let users = segmodel_core::query::evaluate(&q, &store)?;
    if let Some(out) = &a.out {
        let mut text = String::new();
        for id in users.ids() {
            text.push_str(id);
            text.push('\n');
        }
        write_file(out, text.as_bytes())?;
    }
    print_json(&json!({
        "query": q.describe(),
        "size": users.len(),
        "sample": users.ids().iter().take(a.sample).collect::<Vec<_>>(),
    }))
}

fn train(mut cfg: PipelineConfig, a: TrainArgs) -> Result<()> {
    apply_segment(&mut cfg, &a.segment)?;
    let q = parse_query(&a.segment.query)?;
    let store = load_store(&cfg, &a.segment.store)?;
    let t = train_segment(&store, &q, &cfg)?;
    let mut model_bytes = Vec::new();
    t.model.write(&mut model_bytes)?;
    write_file(&a.out, &model_bytes)?;
    let space_path = space_path_for(&a.out);
    let mut space_bytes = Vec::new();
    t.space.write_tsv(&mut space_bytes)?;
    write_file(&space_path, &space_bytes)?;
    print_json(&json!({
        "model": a.out.display().to_string(),
        "space": space_path.display().to_string(),
        "feature_space_id": t.space.id(),
        "dim": t.space.dim(),
        "training": t.model.training,
        "b": t.model.b,
    }))
}

fn eval(mut cfg: PipelineConfig, a: EvalArgs) -> Result<()> {
    apply_segment(&mut cfg, &a.segment)?;
    if let Some(k) = a.k_folds {
        cfg.evaluator.k = k;
    }
    cfg.validate()?;
    let q = parse_query(&a.segment.query)?;
    let store = load_store(&cfg, &a.segment.store)?;
    let mask = cfg.vectorizer.mask;
    let space = FeatureSpace::build(&store, mask, cfg.vectorizer.min_token_count)?;
    let ts = assemble_training_set(
        &q,
        &store,
        &space,
        mask,
        cfg.trainer.neg_ratio,
        cfg.trainer.min_visits,
        cfg.trainer.seed,
    )?;
    let report = cross_validate(&ts, cfg.evaluator.k, &cfg.trainer.svm(), cfg.evaluator.seed)?;
    let body = json!({
        "query": q.describe(),
        "mask": mask.to_string(),
        "min_visits": cfg.trainer.min_visits,
        "neg_ratio": cfg.trainer.neg_ratio,
        "feature_space_id": space.id(),
        "report": report,
    });
    write_file(&a.out, (serde_json::to_string_pretty(&body)? + "\n").as_bytes())?;
    if let Some(roc) = &a.roc_out {
        write_file(roc, report.roc_csv().as_bytes())?;
    }
    print_json(&json!({
        "report": a.out.display().to_string(),
        "examples": report.examples,
        "bep": report.bep,
        "auc": report.auc,
        "mean_fold_bep": report.mean_fold_bep,
        "mean_fold_auc": report.mean_fold_auc,
    }))
}

fn ablate(cfg: PipelineConfig, a: AblateArgs) -> Result<()> {
    let q = parse_query(&a.query)?;
    let mut spec = AblationSpec::standard(q);
    if !a.masks.is_empty() {
        spec.masks = a.masks.iter().map(|m| parse_mask(m)).collect::<Result<_>>()?;
    }
    spec.min_visits = if a.min_visits.is_empty() {
        vec![cfg.trainer.min_visits]
    } else {
        a.min_visits.clone()
    };
    spec.k = a.k_folds.unwrap_or(cfg.evaluator.k);
    spec.seed = a.seed.unwrap_or(cfg.evaluator.seed);
    spec.neg_ratio = a.neg_ratio.unwrap_or(cfg.trainer.neg_ratio);
    spec.min_token_count = a.min_token_count.unwrap_or(cfg.vectorizer.min_token_count);
    spec.svm = cfg.trainer.svm();
    if let Some(l) = a.lambda {
        spec.svm.lambda = l;
    }
    spec.svm.seed = spec.seed;
    spec.threads = a.threads;
    let store = load_store(&cfg, &a.store)?;
    let table = run_ablation(&spec, &store)?;
    write_file(&a.out, table.to_csv().as_bytes())?;
    if let Some(j) = &a.json_out {
        write_file(j, (serde_json::to_string_pretty(&table)? + "\n").as_bytes())?;
    }
    print_json(&json!({ "table": a.out.display().to_string(), "rows": table.rows.len() }))
}

fn explain(a: ExplainArgs) -> Result<()> {
    let format: Format = a.format.parse()?;
    let (model, space) = load_model_and_space(&a.model)?;
    let cloud = tag_cloud(&model, &model.positive_centroid, a.k, &space)?;
    let mut doc = cloud.render(format);
    if !doc.ends_with('\n') {
        doc.push('\n');
    }
    write_file(&a.out, doc.as_bytes())?;
    print_json(&json!({ "cloud": a.out.display().to_string(), "terms": cloud.len() }))
}

fn csv_field(s: &str) -> String {
    if s.contains([',', '"', '\n', '\r']) {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}

fn score(cfg: &PipelineConfig, a: ScoreArgs) -> Result<()> {
    let (model, space) = load_model_and_space(&a.model)?;
    let store = load_store(cfg, &a.store)?;
    let scorer = Scorer::new(model, space, store.enricher().clone(), store.pages().clone())?;
    let mut stream = StreamScorer::new(&scorer);
    let mut out = BufWriter::new(io::stdout().lock());
    let (mut accepted, mut malformed) = (0usize, 0usize);
    for line in io::stdin().lock().lines() {
        let line = line.context("reading standard input")?;
        if line.trim().is_empty() {
            continue;
        }
        let event = match scorer.parse_event(&line) {
            Ok(e) => e,
            Err(_) => {
                malformed += 1;
                continue;
            }
        };
        accepted += 1;
        let s = stream.push(&event)?;
        writeln!(out, "{},{}", csv_field(&s.user_id), s.score)?;
    }
    out.flush()?;
    if malformed > 0 {
        eprintln!("{}", json!({ "warning": "malformed events skipped", "accepted": accepted, "malformed": malformed }));
    }
    Ok(())
}

fn syngen(a: SyngenArgs) -> Result<()> {
    let mut g = GeneratorConfig::default();
    if let Some(v) = a.seed {
        g.seed = v;
    }
    if let Some(v) = a.users {
        g.n_users = v;
    }
    if let Some(v) = a.gap {
        g.gap = v;
    }
    if let Some(v) = a.visits_min {
        g.visits_min = v;
    }
    if let Some(v) = a.visits_max {
        g.visits_max = v;
    }
    if let Some(v) = a.coverage {
        g.coverage = v;
    }
    if let Some(v) = a.prior {
        g.prior = v;
    }
    let corpus = generate(&g)?;
    corpus.write_to(&a.out)?;

    let mut cfg = PipelineConfig::default();
    cfg.paths.logs = Some("logs.jsonl".into());
    cfg.paths.pages = Some("pages.jsonl".into());
    cfg.paths.registrations = Some("registrations.jsonl".into());
    cfg.paths.geo = Some("geo.csv".into());
    cfg.paths.workspace = Some("work".into());
    cfg.trainer.seed = g.seed;
    cfg.evaluator.seed = g.seed;
    write_file(&a.out.join("config.toml"), cfg.to_toml().as_bytes())?;

    print_json(&json!({
        "dir": a.out.display().to_string(),
        "users": g.n_users,
        "positives": corpus.truth.iter().filter(|t| t.1 > 0).count(),
        "oracle_auc": corpus.oracle_auc(),
        "segment_query": segmodel_core::syngen::SEGMENT_QUERY,
    }))
}
