//! Page records, keyword tokenization and gazetteer entity matching.

use std::collections::{BTreeMap, BTreeSet, HashSet};
use std::io::{BufRead, Write};
use std::sync::Arc;

use chrono::{Datelike, NaiveDate};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::ingest::canonical_url;

#[derive(Debug, Error)]
pub enum ContentError {
    #[error("invalid page record: {0}")]
    InvalidRecord(String),
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Editorial metadata attached to an article.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct PageMetadata {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub author: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub publish_date: Option<NaiveDate>,
    #[serde(default)]
    pub topics: Vec<String>,
    #[serde(default)]
    pub keywords: Vec<String>,
    #[serde(default)]
    pub people: Vec<String>,
    #[serde(default)]
    pub organizations: Vec<String>,
    #[serde(default)]
    pub countries: Vec<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub page_type: Option<String>,
}

/// Content and semantics of one page. Content fields a page does not carry
/// are `None`, which is different from present-but-empty.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct PageRecord {
    pub url: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub title: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub meta_tags: Option<Vec<String>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub content_text: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub named_entities: Option<Vec<String>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub metadata: Option<PageMetadata>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub categories: Option<Vec<String>>,
}

impl PageRecord {
    pub fn validate(&self) -> Result<(), ContentError> {
        if self.url.trim().is_empty() {
            return Err(ContentError::InvalidRecord("empty url".into()));
        }
        if let Some(meta) = &self.metadata {
            let lists = [
                ("topics", &meta.topics),
                ("keywords", &meta.keywords),
                ("people", &meta.people),
                ("organizations", &meta.organizations),
                ("countries", &meta.countries),
            ];
            for (name, list) in lists {
                if list.iter().any(|s| s.trim().is_empty()) {
                    return Err(ContentError::InvalidRecord(format!(
                        "{}: metadata.{name} contains an empty string",
                        self.url
                    )));
                }
            }
        }
        Ok(())
    }
}

/// Lowercased alphanumeric runs in document order, with stopwords and
/// single-character tokens dropped.
pub fn tokenize(text: &str, stoplist: &BTreeSet<String>) -> Vec<String> {
    text.to_lowercase()
        .split(|c: char| !c.is_alphanumeric())
        .filter(|t| t.chars().count() >= 2 && !stoplist.contains(*t))
        .map(str::to_string)
        .collect()
}

/// Case-insensitive set of (possibly multi-token) entity names.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(from = "Vec<String>", into = "Vec<String>")]
pub struct Gazetteer {
    names: BTreeSet<String>,
    #[serde(skip)]
    sequences: HashSet<Vec<String>>,
    #[serde(skip)]
    longest: usize,
}

impl Gazetteer {
    /// Names are normalized to lowercase single-space-separated alphanumeric
    /// tokens. Names that normalize to nothing are dropped.
    pub fn new<I, S>(names: I) -> Self
    where
        I: IntoIterator<Item = S>,
        S: AsRef<str>,
    {
        let no_stop = BTreeSet::new();
        let mut g = Gazetteer::default();
        for name in names {
            let toks = tokenize(name.as_ref(), &no_stop);
            if toks.is_empty() {
                continue;
            }
            g.longest = g.longest.max(toks.len());
            g.names.insert(toks.join(" "));
            g.sequences.insert(toks);
        }
        g
    }

    pub fn from_lines<R: BufRead>(reader: R) -> Result<Self, ContentError> {
        let mut names = Vec::new();
        for line in reader.lines() {
            let line = line?;
            let line = line.trim();
            if !line.is_empty() && !line.starts_with('#') {
                names.push(line.to_string());
            }
        }
        Ok(Self::new(names))
    }

    pub fn is_empty(&self) -> bool {
        self.names.is_empty()
    }

    pub fn names(&self) -> impl Iterator<Item = &str> {
        self.names.iter().map(String::as_str)
    }

    /// Greedy left-to-right scan: at each position the longest name starting
    /// there is reported and the scan resumes after it.
    pub fn find(&self, tokens: &[String]) -> Vec<String> {
        let mut out = Vec::new();
        let mut i = 0;
        while i < tokens.len() {
            let max = self.longest.min(tokens.len() - i);
            let hit = (1..=max)
                .rev()
                .find(|&len| self.sequences.contains(&tokens[i..i + len]));
            match hit {
                Some(len) => {
                    out.push(tokens[i..i + len].join(" "));
                    i += len;
                }
                None => i += 1,
            }
        }
        out
    }
}

impl From<Vec<String>> for Gazetteer {
    fn from(names: Vec<String>) -> Self {
        Gazetteer::new(names)
    }
}

impl From<Gazetteer> for Vec<String> {
    fn from(g: Gazetteer) -> Self {
        g.names.into_iter().collect()
    }
}

pub fn match_gazetteer(tokens: &[String], gazetteer: &Gazetteer) -> Vec<String> {
    gazetteer.find(tokens)
}

/// Stoplist and gazetteer applied when deriving keyword and entity tokens.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct TokenRules {
    pub stoplist: BTreeSet<String>,
    pub gazetteer: Gazetteer,
}

impl TokenRules {
    pub fn stoplist_from_lines<R: BufRead>(reader: R) -> Result<BTreeSet<String>, ContentError> {
        let mut out = BTreeSet::new();
        for line in reader.lines() {
            let line = line?;
            for word in line.split_whitespace() {
                if word.starts_with('#') {
                    break;
                }
                out.insert(word.to_lowercase());
            }
        }
        Ok(out)
    }
}

/// Tokens derived once per page, shared by the index and the vectorizer.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct PageFeatures {
    pub title: Vec<String>,
    pub content: Vec<String>,
    pub entities: Vec<String>,
    pub meta_tags: Vec<String>,
    pub categories: Vec<String>,
    pub author: Vec<String>,
    pub topics: Vec<String>,
    pub keywords: Vec<String>,
    pub people: Vec<String>,
    pub organizations: Vec<String>,
    pub countries: Vec<String>,
    pub page_type: Vec<String>,
    pub publish_date: Vec<String>,
}

fn labels(list: &[String]) -> Vec<String> {
    list.iter()
        .map(|s| s.trim().to_lowercase())
        .filter(|s| !s.is_empty())
        .collect()
}

impl PageFeatures {
    pub fn extract(page: &PageRecord, rules: &TokenRules) -> Self {
        let title = page
            .title
            .as_deref()
            .map(|t| tokenize(t, &rules.stoplist))
            .unwrap_or_default();
        let content = page
            .content_text
            .as_deref()
            .map(|t| tokenize(t, &rules.stoplist))
            .unwrap_or_default();
        let mut entities = page.named_entities.as_deref().map(labels).unwrap_or_default();
        if !rules.gazetteer.is_empty() {
            entities.extend(rules.gazetteer.find(&title));
            entities.extend(rules.gazetteer.find(&content));
        }
        let meta = page.metadata.clone().unwrap_or_default();
        let one = |v: &Option<String>| v.iter().map(|s| s.trim().to_lowercase()).filter(|s| !s.is_empty()).collect();
        PageFeatures {
            title,
            content,
            entities,
            meta_tags: page.meta_tags.as_deref().map(labels).unwrap_or_default(),
            categories: page.categories.as_deref().map(labels).unwrap_or_default(),
            author: one(&meta.author),
            topics: labels(&meta.topics),
            keywords: labels(&meta.keywords),
            people: labels(&meta.people),
            organizations: labels(&meta.organizations),
            countries: labels(&meta.countries),
            page_type: one(&meta.page_type),
            publish_date: meta
                .publish_date
                .map(|d| vec![format!("{:04}-{:02}", d.year(), d.month())])
                .unwrap_or_default(),
        }
    }
}

/// A stored page with its derived tokens.
#[derive(Debug, PartialEq, Eq)]
pub struct PageEntry {
    pub record: PageRecord,
    pub features: PageFeatures,
}

/// Pages keyed by URL with lowercased scheme and host.
#[derive(Clone, Debug, Default)]
pub struct PageStore {
    rules: TokenRules,
    pages: BTreeMap<String, Arc<PageEntry>>,
}

pub fn page_key(url: &str) -> String {
    canonical_url(url).unwrap_or_else(|| url.trim().to_string())
}

impl PageStore {
    pub fn new(rules: TokenRules) -> Self {
        Self {
            rules,
            pages: BTreeMap::new(),
        }
    }

    pub fn rules(&self) -> &TokenRules {
        &self.rules
    }

    /// Inserts or replaces the page stored under the record's URL.
    pub fn upsert_page(&mut self, record: PageRecord) -> Result<(), ContentError> {
        record.validate()?;
        let features = PageFeatures::extract(&record, &self.rules);
        self.pages
            .insert(page_key(&record.url), Arc::new(PageEntry { record, features }));
        Ok(())
    }

    pub fn get_page(&self, url: &str) -> Option<&PageRecord> {
        self.entry(url).map(|e| &e.record)
    }

    pub fn entry(&self, url: &str) -> Option<&Arc<PageEntry>> {
        self.pages.get(&page_key(url))
    }

    pub fn len(&self) -> usize {
        self.pages.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pages.is_empty()
    }

    pub fn records(&self) -> impl Iterator<Item = &PageRecord> {
        self.pages.values().map(|e| &e.record)
    }

    /// Loads JSON-lines page records; blank lines are skipped.
    pub fn read_jsonl<R: BufRead>(&mut self, reader: R) -> Result<usize, ContentError> {
        let mut n = 0;
        for (i, line) in reader.lines().enumerate() {
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            let record: PageRecord = serde_json::from_str(&line).map_err(|e| ContentError::Parse {
                line: i + 1,
                message: e.to_string(),
            })?;
            self.upsert_page(record).map_err(|e| ContentError::Parse {
                line: i + 1,
                message: e.to_string(),
            })?;
            n += 1;
        }
        Ok(n)
    }

    pub fn write_jsonl<W: Write>(&self, mut out: W) -> Result<(), ContentError> {
        for record in self.records() {
            serde_json::to_writer(&mut out, record).map_err(std::io::Error::from)?;
            out.write_all(b"\n")?;
        }
        Ok(())
    }
}
