mod commands;
mod exit;
mod serve;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use exit::{classify, report, ExitKind};

/// Segment modeling over web access logs.
///
/// Exit codes: 0 success, 1 internal error, 2 bad command line, 3 invalid
/// configuration or input, 4 data error, 5 model error. Failures print one
/// JSON object on standard error.
#[derive(Debug, Parser)]
#[command(name = "segmodel", version, about, long_about = None)]
pub struct Cli {
    /// Pipeline config file (TOML). Flags override its values.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Parse logs, pages and registrations into a store snapshot.
    Ingest(IngestArgs),
    /// Evaluate a segment query and print its size and a sample.
    Query(QueryArgs),
    /// Train a segment model and write it with its feature space.
    Train(TrainArgs),
    /// Cross-validate a segment model and write the report.
    Eval(EvalArgs),
    /// Cross-validate over feature sets and minimum visit counts.
    Ablate(AblateArgs),
    /// Write the tag cloud of a trained model.
    Explain(ExplainArgs),
    /// Score JSON-lines events from standard input with rolling user centroids.
    Score(ScoreArgs),
    /// Serve `POST /v1/score` over HTTP.
    Serve(ServeArgs),
    /// Generate a synthetic corpus with a planted segment.
    Syngen(SyngenArgs),
}

#[derive(Debug, Args)]
pub struct IngestArgs {
    #[arg(long)]
    pub logs: Option<PathBuf>,
    #[arg(long)]
    pub pages: Option<PathBuf>,
    #[arg(long)]
    pub registrations: Option<PathBuf>,
    #[arg(long)]
    pub geo: Option<PathBuf>,
    #[arg(long)]
    pub devices: Option<PathBuf>,
    #[arg(long)]
    pub engines: Option<PathBuf>,
    #[arg(long)]
    pub stoplist: Option<PathBuf>,
    #[arg(long)]
    pub gazetteer: Option<PathBuf>,
    #[arg(long)]
    pub timezone: Option<String>,
    /// Snapshot path; defaults to `store.snap` in the configured workspace.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct StoreArg {
    /// Store snapshot; defaults to `store.snap` in the configured workspace.
    #[arg(long)]
    pub store: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct QueryArgs {
    #[command(flatten)]
    pub store: StoreArg,
    /// Segment query, e.g. `gender = female AND age in [20, 40]`.
    pub query: String,
    /// Number of user ids to print.
    #[arg(long, default_value_t = 10)]
    pub sample: usize,
    /// Also write every matching user id, one per line.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct SegmentArgs {
    #[command(flatten)]
    pub store: StoreArg,
    /// Segment query defining the positive class.
    #[arg(long)]
    pub query: String,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Feature set: context, text, entities, metadata, all_content, all, or a `+` union.
    #[arg(long)]
    pub mask: Option<String>,
    #[arg(long)]
    pub min_visits: Option<usize>,
    #[arg(long)]
    pub neg_ratio: Option<f64>,
    #[arg(long)]
    pub min_token_count: Option<usize>,
    #[arg(long)]
    pub lambda: Option<f64>,
    #[arg(long)]
    pub epochs: Option<usize>,
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    #[command(flatten)]
    pub segment: SegmentArgs,
    /// Model file; the feature space goes next to it as `<stem>.space.tsv`.
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct EvalArgs {
    #[command(flatten)]
    pub segment: SegmentArgs,
    #[arg(long)]
    pub k_folds: Option<usize>,
    /// JSON report.
    #[arg(long)]
    pub out: PathBuf,
    /// ROC curve as `fpr,tpr` CSV.
    #[arg(long)]
    pub roc_out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct AblateArgs {
    #[command(flatten)]
    pub store: StoreArg,
    #[arg(long)]
    pub query: String,
    /// Comma-separated feature sets; defaults to the six standard ones.
    #[arg(long, value_delimiter = ',')]
    pub masks: Vec<String>,
    /// Comma-separated minimum visit counts.
    #[arg(long, value_delimiter = ',')]
    pub min_visits: Vec<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub neg_ratio: Option<f64>,
    #[arg(long)]
    pub k_folds: Option<usize>,
    #[arg(long)]
    pub min_token_count: Option<usize>,
    #[arg(long)]
    pub lambda: Option<f64>,
    /// Cells evaluated in parallel; 0 uses every core.
    #[arg(long, default_value_t = 0)]
    pub threads: usize,
    /// `mask,min_visits,bep,auc` table.
    #[arg(long)]
    pub out: PathBuf,
    /// Full table with per-cell details as JSON.
    #[arg(long)]
    pub json_out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct ModelArgs {
    #[arg(long)]
    pub model: PathBuf,
    /// Feature space; defaults to `<model stem>.space.tsv` beside the model.
    #[arg(long)]
    pub space: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct ExplainArgs {
    #[command(flatten)]
    pub model: ModelArgs,
    #[arg(long, default_value_t = 10)]
    pub k: usize,
    /// text, json or html.
    #[arg(long, default_value = "text")]
    pub format: String,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct ScoreArgs {
    #[command(flatten)]
    pub model: ModelArgs,
    /// Snapshot providing page records and enrichment tables.
    #[command(flatten)]
    pub store: StoreArg,
}

#[derive(Debug, Args)]
pub struct ServeArgs {
    /// Model to load, as `id=path` or `path` (id is the file stem). Repeatable.
    #[arg(long = "model", required = true)]
    pub models: Vec<String>,
    #[command(flatten)]
    pub store: StoreArg,
    #[arg(long, default_value = "127.0.0.1:8080")]
    pub addr: String,
    #[arg(long, default_value_t = 4)]
    pub threads: usize,
}

#[derive(Debug, Args)]
pub struct SyngenArgs {
    /// Output directory for the corpus files and a matching config.
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub users: Option<usize>,
    #[arg(long)]
    pub gap: Option<f64>,
    #[arg(long)]
    pub visits_min: Option<usize>,
    #[arg(long)]
    pub visits_max: Option<usize>,
    #[arg(long)]
    pub coverage: Option<f64>,
    #[arg(long)]
    pub prior: Option<f64>,
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            if !e.use_stderr() {
                let _ = e.print();
                return ExitCode::SUCCESS;
            }
            let kind = ExitKind::Usage;
            let msg = e.to_string();
            eprintln!(
                "{}",
                serde_json::json!({ "error": kind.name(), "exit_code": kind.code(), "message": msg.trim_end() })
            );
            return ExitCode::from(kind.code() as u8);
        }
    };
    match commands::run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            let kind = classify(&err);
            eprintln!("{}", report(&err, kind));
            ExitCode::from(kind.code() as u8)
        }
    }
}
