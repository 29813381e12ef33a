//! Segment definitions as search queries over the user index.
//!
//! Registration predicates (gender, age, income, job title) test the user's
//! profile; a missing profile value fails every comparison. Visit predicates
//! hold when at least one of the user's visits satisfies them, and each such
//! leaf is quantified over visits on its own: `category = style AND
//! day_of_week = tue` matches a user who read Style on Monday and anything on
//! Tuesday. `NOT` complements within all known users, registered or not.

mod parser;

use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::fields::{Field, Kind, Level};
use crate::users::{complement, intersect, union, UserRecord, UserSet, UserStore};

pub use parser::parse_query;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Position {
    pub offset: usize,
    pub line: usize,
    pub column: usize,
}

impl fmt::Display for Position {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "line {}, column {}", self.line, self.column)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum QueryError {
    #[error("syntax error at {position}: {message}")]
    Syntax { message: String, position: Position },
    #[error("unknown field {name:?} at {position}")]
    UnknownField { name: String, position: Position },
    #[error("operator `{op}` cannot be applied to field {field}")]
    TypeMismatch { field: Field, op: &'static str },
    #[error("query has an empty AND/OR group")]
    EmptyGroup,
}

impl QueryError {
    fn locate(text: &str, offset: usize) -> Position {
        let before = &text[..offset.min(text.len())];
        let line = before.matches('\n').count() + 1;
        let column = before.rsplit('\n').next().map(|l| l.chars().count()).unwrap_or(0) + 1;
        Position { offset, line, column }
    }

    fn syntax(text: &str, offset: usize, message: impl Into<String>) -> Self {
        QueryError::Syntax {
            message: message.into(),
            position: Self::locate(text, offset),
        }
    }
}

/// A segment definition. Numeric bounds are inclusive.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum SegmentQuery {
    Eq(Field, String),
    Ge(Field, i64),
    Le(Field, i64),
    Range(Field, i64, i64),
    And(Vec<SegmentQuery>),
    Or(Vec<SegmentQuery>),
    Not(Box<SegmentQuery>),
}

impl SegmentQuery {
    /// Checks operator/field compatibility and that groups are non-empty.
    pub fn validate(&self) -> Result<(), QueryError> {
        match self {
            SegmentQuery::Eq(f, _) if f.kind() == Kind::Numeric => Err(QueryError::TypeMismatch { field: *f, op: "=" }),
            SegmentQuery::Ge(f, _) if f.kind() != Kind::Numeric => Err(QueryError::TypeMismatch { field: *f, op: ">=" }),
            SegmentQuery::Le(f, _) if f.kind() != Kind::Numeric => Err(QueryError::TypeMismatch { field: *f, op: "<=" }),
            SegmentQuery::Range(f, _, _) if f.kind() != Kind::Numeric => {
                Err(QueryError::TypeMismatch { field: *f, op: "in" })
            }
            SegmentQuery::And(qs) | SegmentQuery::Or(qs) => {
                if qs.is_empty() {
                    return Err(QueryError::EmptyGroup);
                }
                qs.iter().try_for_each(SegmentQuery::validate)
            }
            SegmentQuery::Not(q) => q.validate(),
            _ => Ok(()),
        }
    }

    /// Canonical text form; parsing it yields the same query.
    pub fn describe(&self) -> String {
        let mut out = String::new();
        self.write_canonical(&mut out);
        out
    }

    fn write_canonical(&self, out: &mut String) {
        match self {
            SegmentQuery::Eq(f, v) => {
                out.push_str(f.name());
                out.push_str(" = ");
                out.push_str(&quote(v));
            }
            SegmentQuery::Ge(f, v) => out.push_str(&format!("{f} >= {v}")),
            SegmentQuery::Le(f, v) => out.push_str(&format!("{f} <= {v}")),
            SegmentQuery::Range(f, lo, hi) => out.push_str(&format!("{f} in [{lo}, {hi}]")),
            SegmentQuery::And(qs) | SegmentQuery::Or(qs) => {
                let sep = if matches!(self, SegmentQuery::And(_)) { " AND " } else { " OR " };
                out.push('(');
                for (i, q) in qs.iter().enumerate() {
                    if i > 0 {
                        out.push_str(sep);
                    }
                    q.write_canonical(out);
                }
                out.push(')');
            }
            SegmentQuery::Not(q) => {
                out.push_str("NOT ");
                q.write_canonical(out);
            }
        }
    }

    /// Direct per-user evaluation without the index.
    pub fn matches(&self, record: &UserRecord) -> bool {
        match self {
            SegmentQuery::Eq(f, v) => match f.level() {
                Level::User => f.profile_token(&record.profile).as_deref() == Some(v.as_str()),
                Level::Visit => record.visits.iter().any(|vis| f.visit_tokens(vis).iter().any(|t| t == v)),
            },
            SegmentQuery::Ge(f, lo) => number_in(*f, record, *lo, i64::MAX),
            SegmentQuery::Le(f, hi) => number_in(*f, record, i64::MIN, *hi),
            SegmentQuery::Range(f, lo, hi) => number_in(*f, record, *lo, *hi),
            SegmentQuery::And(qs) => qs.iter().all(|q| q.matches(record)),
            SegmentQuery::Or(qs) => qs.iter().any(|q| q.matches(record)),
            SegmentQuery::Not(q) => !q.matches(record),
        }
    }
}

fn number_in(field: Field, record: &UserRecord, lo: i64, hi: i64) -> bool {
    let inside = |v: i64| lo <= v && v <= hi;
    match field.level() {
        Level::User => field.profile_number(&record.profile).is_some_and(inside),
        Level::Visit => record.visits.iter().any(|v| field.visit_number(v).is_some_and(inside)),
    }
}

fn quote(v: &str) -> String {
    let bare = !v.is_empty()
        && v.chars().all(|c| c.is_alphanumeric() || "_-./:".contains(c))
        && !["and", "or", "not", "in"].contains(&v);
    if bare {
        v.to_string()
    } else {
        let mut s = String::with_capacity(v.len() + 2);
        s.push('"');
        for c in v.chars() {
            if c == '"' || c == '\\' {
                s.push('\\');
            }
            s.push(c);
        }
        s.push('"');
        s
    }
}

impl fmt::Display for SegmentQuery {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.describe())
    }
}

impl std::str::FromStr for SegmentQuery {
    type Err = QueryError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        parse_query(s)
    }
}

/// Sorted ordinals of the users matching `q`.
pub fn evaluate_ordinals(q: &SegmentQuery, store: &UserStore) -> Result<Vec<u32>, QueryError> {
    q.validate()?;
    Ok(eval(q, store))
}

fn eval(q: &SegmentQuery, store: &UserStore) -> Vec<u32> {
    let idx = store.index();
    match q {
        SegmentQuery::Eq(f, v) => idx.postings(*f, v).to_vec(),
        SegmentQuery::Ge(f, lo) => idx.range(*f, *lo, i64::MAX),
        SegmentQuery::Le(f, hi) => idx.range(*f, i64::MIN, *hi),
        SegmentQuery::Range(f, lo, hi) => idx.range(*f, *lo, *hi),
        SegmentQuery::And(qs) => {
            let mut parts: Vec<Vec<u32>> = qs.iter().map(|q| eval(q, store)).collect();
            // shortest lists first keeps intermediate results small
            parts.sort_by_key(Vec::len);
            let mut it = parts.into_iter();
            let first = it.next().unwrap_or_default();
            it.fold(first, |acc, p| if acc.is_empty() { acc } else { intersect(&acc, &p) })
        }
        SegmentQuery::Or(qs) => qs.iter().fold(Vec::new(), |acc, q| union(&acc, &eval(q, store))),
        SegmentQuery::Not(q) => complement(&eval(q, store), store.len() as u32),
    }
}

pub fn evaluate(q: &SegmentQuery, store: &UserStore) -> Result<UserSet, QueryError> {
    Ok(store.to_user_set(&evaluate_ordinals(q, store)?))
}
