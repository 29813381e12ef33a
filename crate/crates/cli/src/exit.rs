//! Exit codes and the JSON error line printed on failure.
//!
//! | code | meaning |
//! |------|---------|
//! | 0 | success |
//! | 1 | internal or I/O failure |
//! | 2 | bad command line |
//! | 3 | invalid configuration or input (config file, query text, flags) |
//! | 4 | data problem (malformed input files, empty segment, too few examples) |
//! | 5 | model problem (corrupt or incompatible model or feature space) |

use std::fmt;

use segmodel_core::eval::EvalError;
use segmodel_core::explain::ExplainError;
use segmodel_core::ingest::IngestError;
use segmodel_core::query::QueryError;
use segmodel_core::service::PipelineError;
use segmodel_core::svm::SvmError;
use segmodel_core::syngen::SyngenError;
use segmodel_core::users::StoreError;
use segmodel_core::vector::VectorError;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ExitKind {
    Internal = 1,
    Usage = 2,
    Input = 3,
    Data = 4,
    Model = 5,
}

impl ExitKind {
    pub fn code(self) -> i32 {
        self as i32
    }

    pub fn name(self) -> &'static str {
        match self {
            ExitKind::Internal => "internal",
            ExitKind::Usage => "usage",
            ExitKind::Input => "input",
            ExitKind::Data => "data",
            ExitKind::Model => "model",
        }
    }
}

/// An error raised by the command layer itself with an explicit kind.
#[derive(Debug)]
pub struct CliError {
    pub kind: ExitKind,
    pub message: String,
}

impl CliError {
    pub fn input(message: impl Into<String>) -> Self {
        Self {
            kind: ExitKind::Input,
            message: message.into(),
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.message)
    }
}

impl std::error::Error for CliError {}

fn svm_kind(e: &SvmError) -> ExitKind {
    match e {
        SvmError::DimensionMismatch { .. }
        | SvmError::SpaceMismatch { .. }
        | SvmError::VersionMismatch { .. }
        | SvmError::CorruptModel(_) => ExitKind::Model,
        SvmError::InvalidConfig(_) | SvmError::Query(_) => ExitKind::Input,
        SvmError::Vector(v) => vector_kind(v),
        SvmError::Io(_) => ExitKind::Internal,
        _ => ExitKind::Data,
    }
}

fn vector_kind(e: &VectorError) -> ExitKind {
    match e {
        VectorError::EmptyMask | VectorError::UnknownMask(_) => ExitKind::Input,
        VectorError::InvalidSpace(_) | VectorError::Parse(_) => ExitKind::Model,
        VectorError::Io(_) => ExitKind::Internal,
        _ => ExitKind::Data,
    }
}

fn eval_kind(e: &EvalError) -> ExitKind {
    match e {
        EvalError::InvalidSpec(_) => ExitKind::Input,
        EvalError::Svm(s) => svm_kind(s),
        EvalError::Vector(v) => vector_kind(v),
        EvalError::Io(_) => ExitKind::Internal,
        _ => ExitKind::Data,
    }
}

fn pipeline_kind(e: &PipelineError) -> ExitKind {
    match e {
        PipelineError::Config(_) | PipelineError::Query(_) | PipelineError::File { .. } => ExitKind::Input,
        PipelineError::Ingest(IngestError::UnknownTimezone(_)) => ExitKind::Input,
        PipelineError::Ingest(IngestError::Io(_)) => ExitKind::Internal,
        PipelineError::Ingest(_) | PipelineError::Content(_) => ExitKind::Data,
        PipelineError::Store(StoreError::CorruptSnapshot(_)) => ExitKind::Data,
        PipelineError::Store(StoreError::Io(_)) => ExitKind::Internal,
        PipelineError::Store(_) => ExitKind::Data,
        PipelineError::Vector(v) => vector_kind(v),
        PipelineError::Svm(s) => svm_kind(s),
        PipelineError::Eval(v) => eval_kind(v),
        PipelineError::Explain(x) => explain_kind(x),
    }
}

fn explain_kind(e: &ExplainError) -> ExitKind {
    match e {
        ExplainError::DimensionMismatch { .. } => ExitKind::Model,
        ExplainError::InvalidK | ExplainError::Parse(_) => ExitKind::Input,
        ExplainError::EmptyCloud => ExitKind::Data,
    }
}

/// Picks the exit kind from the first recognized error in the chain.
pub fn classify(err: &anyhow::Error) -> ExitKind {
    for cause in err.chain() {
        if let Some(e) = cause.downcast_ref::<CliError>() {
            return e.kind;
        }
        if let Some(e) = cause.downcast_ref::<PipelineError>() {
            return pipeline_kind(e);
        }
        if let Some(e) = cause.downcast_ref::<SvmError>() {
            return svm_kind(e);
        }
        if let Some(e) = cause.downcast_ref::<VectorError>() {
            return vector_kind(e);
        }
        if let Some(e) = cause.downcast_ref::<EvalError>() {
            return eval_kind(e);
        }
        if cause.downcast_ref::<QueryError>().is_some() {
            return ExitKind::Input;
        }
        if let Some(e) = cause.downcast_ref::<StoreError>() {
            return match e {
                StoreError::Io(_) => ExitKind::Internal,
                _ => ExitKind::Data,
            };
        }
        if let Some(e) = cause.downcast_ref::<ExplainError>() {
            return explain_kind(e);
        }
        if let Some(e) = cause.downcast_ref::<SyngenError>() {
            return match e {
                SyngenError::Io(_) => ExitKind::Internal,
                _ => ExitKind::Input,
            };
        }
    }
    ExitKind::Internal
}

/// One-line JSON error report for standard error.
pub fn report(err: &anyhow::Error, kind: ExitKind) -> String {
    let causes: Vec<String> = err.chain().skip(1).map(|c| c.to_string()).collect();
    serde_json::json!({
        "error": kind.name(),
        "exit_code": kind.code(),
        "message": err.to_string(),
        "causes": causes,
    })
    .to_string()
}
