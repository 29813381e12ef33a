//! Segment modeling for content web sites.
//!
//! Users are described by their access-log context, the content and
//! semantics of the pages they read, and (for some of them) registration
//! data. A segment is defined by a query over those fields; the matching
//! users plus a random sample of the rest form a training set of per-user
//! centroid vectors for a linear SVM, which is evaluated by cross-validated
//! BEP and ROC and explained as a ranked keyword cloud.

pub mod content;
pub mod eval;
pub mod explain;
pub mod fields;
pub mod ingest;
pub mod query;
pub mod service;
pub mod svm;
pub mod syngen;
pub mod users;
pub mod vector;

pub use content::{PageRecord, PageStore};
pub use eval::{AblationTable, EvalReport};
pub use explain::TagCloud;
pub use fields::Field;
pub use ingest::{AccessEvent, Enricher};
pub use query::SegmentQuery;
pub use service::{PipelineConfig, Scorer};
pub use svm::{SvmConfig, SvmModel, TrainingSet};
pub use users::{UserProfile, UserSet, UserStore};
pub use vector::{FeatureSetMask, FeatureSpace, SparseVector};
