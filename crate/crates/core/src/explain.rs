//! Keyword-cloud explanations of a trained segment model.
//!
//! A feature's contribution is `wᵢ·μᵢ`, its term in the dot product between
//! the model's normal vector and the centroid of the positive class. The
//! cloud lists the features with the largest positive contributions.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::fields::Field;
use crate::svm::SvmModel;
use crate::vector::{FeatureSpace, SparseVector};

#[derive(Debug, Error)]
pub enum ExplainError {
    #[error("no feature contributes positively to the positive centroid")]
    EmptyCloud,
    #[error("dimension mismatch: model has {model}, input needs {found}")]
    DimensionMismatch { model: usize, found: usize },
    #[error("k must be at least 1")]
    InvalidK,
    #[error("invalid tag cloud: {0}")]
    Parse(String),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TagTerm {
    pub namespace: Field,
    pub token: String,
    pub contribution: f64,
    pub rank: usize,
}

/// Terms ranked by descending contribution, starting at rank 1.
#[derive(Clone, Debug, PartialEq)]
pub struct TagCloud {
    pub terms: Vec<TagTerm>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Format {
    Text,
    Json,
    Html,
}

impl std::str::FromStr for Format {
    type Err = ExplainError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "text" | "txt" => Ok(Format::Text),
            "json" => Ok(Format::Json),
            "html" => Ok(Format::Html),
            other => Err(ExplainError::Parse(format!("unknown format {other:?}"))),
        }
    }
}

pub fn tag_cloud(
    model: &SvmModel,
    positive_centroid: &SparseVector,
    k: usize,
    space: &FeatureSpace,
) -> Result<TagCloud, ExplainError> {
    if k == 0 {
        return Err(ExplainError::InvalidK);
    }
    if space.dim() != model.dim() {
        return Err(ExplainError::DimensionMismatch {
            model: model.dim(),
            found: space.dim(),
        });
    }
    if positive_centroid.min_dim() > model.dim() {
        return Err(ExplainError::DimensionMismatch {
            model: model.dim(),
            found: positive_centroid.min_dim(),
        });
    }
    let mut scored: Vec<(f64, Field, &str)> = positive_centroid
        .iter()
        .map(|(i, mu)| (model.w[i as usize] * mu, i))
        .filter(|(c, _)| *c > 0.0)
        .map(|(c, i)| {
            let (f, t) = space.column(i).expect("index within space");
            (c, f, t)
        })
        .collect();
    if scored.is_empty() {
        return Err(ExplainError::EmptyCloud);
    }
    scored.sort_by(|a, b| {
        b.0.total_cmp(&a.0)
            .then_with(|| a.1.name().cmp(b.1.name()))
            .then_with(|| a.2.cmp(b.2))
    });
    scored.truncate(k);
    Ok(TagCloud {
        terms: scored
            .into_iter()
            .enumerate()
            .map(|(r, (c, f, t))| TagTerm {
                namespace: f,
                token: t.to_string(),
                contribution: c,
                rank: r + 1,
            })
            .collect(),
    })
}

impl TagCloud {
    pub fn len(&self) -> usize {
        self.terms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn render(&self, format: Format) -> String {
        match format {
            Format::Text => self.to_text(),
            Format::Json => self.to_json(),
            Format::Html => self.to_html(),
        }
    }

    /// Distinct uppercase words in alphabetical order, each with the largest
    /// contribution among its namespaces.
    fn words(&self) -> Vec<(String, f64)> {
        let mut words: Vec<(String, f64)> = Vec::new();
        for t in &self.terms {
            let w = t.token.to_uppercase();
            match words.iter_mut().find(|(x, _)| *x == w) {
                Some(slot) => slot.1 = slot.1.max(t.contribution),
                None => words.push((w, t.contribution)),
            }
        }
        words.sort_by(|a, b| a.0.cmp(&b.0));
        words
    }

    pub fn to_text(&self) -> String {
        self.words().into_iter().map(|w| w.0).collect::<Vec<_>>().join(" ")
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(&self.terms).expect("tag terms serialize")
    }

    pub fn from_json(text: &str) -> Result<Self, ExplainError> {
        let terms: Vec<TagTerm> = serde_json::from_str(text).map_err(|e| ExplainError::Parse(e.to_string()))?;
        Ok(TagCloud { terms })
    }

    /// Font size in points: linear in contribution from 10 to 32; a cloud
    /// whose contributions are all equal uses 32.
    pub fn font_size(contribution: f64, min: f64, max: f64) -> f64 {
        if max > min {
            10.0 + 22.0 * (contribution - min) / (max - min)
        } else {
            32.0
        }
    }

    pub fn to_html(&self) -> String {
        let words = self.words();
        let min = words.iter().map(|w| w.1).fold(f64::INFINITY, f64::min);
        let max = words.iter().map(|w| w.1).fold(f64::NEG_INFINITY, f64::max);
        let mut out = String::from(
            "<!DOCTYPE html>\n<html>\n<head>\n<meta charset=\"utf-8\">\n<title>Segment tag cloud</title>\n</head>\n\
             <body style=\"font-family: sans-serif; max-width: 48em; margin: 2em auto; line-height: 1.6;\">\n<p>\n",
        );
        for (w, c) in &words {
            let size = Self::font_size(*c, min, max);
            let _ = writeln!(
                out,
                "<span style=\"font-size: {size:.1}pt; margin-right: 0.4em;\" title=\"{c}\">{}</span>",
                escape_html(w)
            );
        }
        out.push_str("</p>\n</body>\n</html>\n");
        out
    }
}

fn escape_html(s: &str) -> String {
    let mut out = String::with_capacity(s.len());
    for c in s.chars() {
        match c {
            '&' => out.push_str("&amp;"),
            '<' => out.push_str("&lt;"),
            '>' => out.push_str("&gt;"),
            '"' => out.push_str("&quot;"),
            '\'' => out.push_str("&#39;"),
            c => out.push(c),
        }
    }
    out
}
