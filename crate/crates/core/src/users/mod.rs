//! Per-user visit histories, registration profiles and the inverted index
//! that makes users searchable by demographics and visits.

mod index;
mod snapshot;

use std::collections::HashMap;
use std::fmt;
use std::io::BufRead;
use std::str::FromStr;
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::content::{PageEntry, PageStore};
use crate::fields::{Field, Kind, Level};
use crate::ingest::{url_host, AccessEvent, Enricher};

pub use index::{complement, intersect, union, InvertedIndex};

#[derive(Debug, Error)]
pub enum StoreError {
    #[error("invalid profile: {0}")]
    InvalidProfile(String),
    #[error("field {0} is not indexed for this kind of lookup")]
    UnknownField(Field),
    #[error("empty range [{lo}, {hi}]")]
    InvalidRange { lo: i64, hi: i64 },
    #[error("corrupt snapshot: {0}")]
    CorruptSnapshot(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Gender {
    #[serde(alias = "Male", alias = "MALE", alias = "m", alias = "M")]
    Male,
    #[serde(alias = "Female", alias = "FEMALE", alias = "f", alias = "F")]
    Female,
}

impl Gender {
    pub fn as_str(self) -> &'static str {
        match self {
            Gender::Male => "male",
            Gender::Female => "female",
        }
    }
}

impl fmt::Display for Gender {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Gender {
    type Err = StoreError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_lowercase().as_str() {
            "male" | "m" => Ok(Gender::Male),
            "female" | "f" => Ok(Gender::Female),
            other => Err(StoreError::InvalidProfile(format!("unknown gender {other:?}"))),
        }
    }
}

/// Registration data of one user. A user with any field present counts as
/// registered.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct UserProfile {
    pub user_id: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gender: Option<Gender>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub age: Option<u32>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub income: Option<i64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub job_title: Option<String>,
}

impl UserProfile {
    pub fn empty(user_id: impl Into<String>) -> Self {
        Self {
            user_id: user_id.into(),
            ..Default::default()
        }
    }

    pub fn is_registered(&self) -> bool {
        self.gender.is_some() || self.age.is_some() || self.income.is_some() || self.job_title.is_some()
    }

    pub fn validate(&self) -> Result<(), StoreError> {
        if self.user_id.trim().is_empty() {
            return Err(StoreError::InvalidProfile("empty user_id".into()));
        }
        if let Some(age) = self.age {
            if age > 120 {
                return Err(StoreError::InvalidProfile(format!("{}: age {age} outside [0,120]", self.user_id)));
            }
        }
        if let Some(income) = self.income {
            if income < 0 {
                return Err(StoreError::InvalidProfile(format!("{}: negative income {income}", self.user_id)));
            }
        }
        Ok(())
    }
}

/// An access event joined with the page it requested, when that page is known.
#[derive(Clone, Debug)]
pub struct Visit {
    pub event: AccessEvent,
    pub page: Option<Arc<PageEntry>>,
}

impl Visit {
    pub fn host(&self) -> Option<&str> {
        url_host(&self.event.url)
    }
}

#[derive(Clone, Debug)]
pub struct UserRecord {
    pub profile: UserProfile,
    /// Ascending by timestamp; equal timestamps keep arrival order.
    pub visits: Vec<Visit>,
}

/// Sorted, deduplicated user ids.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct UserSet(Vec<String>);

impl UserSet {
    pub fn from_ids<I, S>(ids: I) -> Self
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        let mut v: Vec<String> = ids.into_iter().map(Into::into).collect();
        v.sort();
        v.dedup();
        Self(v)
    }

    pub fn ids(&self) -> &[String] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn contains(&self, id: &str) -> bool {
        self.0.binary_search_by(|x| x.as_str().cmp(id)).is_ok()
    }

    pub fn into_vec(self) -> Vec<String> {
        self.0
    }
}

/// All users, their visits and the index over both.
///
/// Pages should be loaded before events are added: a visit links to the page
/// stored under its URL at the time it is added.
#[derive(Clone, Debug, Default)]
pub struct UserStore {
    enricher: Enricher,
    pages: PageStore,
    ids: Vec<String>,
    ordinals: HashMap<String, u32>,
    records: Vec<UserRecord>,
    index: InvertedIndex,
}

impl UserStore {
    pub fn new(enricher: Enricher, pages: PageStore) -> Self {
        Self {
            enricher,
            pages,
            ..Default::default()
        }
    }

    pub fn enricher(&self) -> &Enricher {
        &self.enricher
    }

    pub fn pages(&self) -> &PageStore {
        &self.pages
    }

    pub fn index(&self) -> &InvertedIndex {
        &self.index
    }

    pub fn len(&self) -> usize {
        self.ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ids.is_empty()
    }

    fn ordinal_or_insert(&mut self, user_id: &str) -> u32 {
        if let Some(&o) = self.ordinals.get(user_id) {
            return o;
        }
        let o = self.ids.len() as u32;
        self.ids.push(user_id.to_string());
        self.ordinals.insert(user_id.to_string(), o);
        self.records.push(UserRecord {
            profile: UserProfile::empty(user_id),
            visits: Vec::new(),
        });
        o
    }

    pub fn ordinal(&self, user_id: &str) -> Option<u32> {
        self.ordinals.get(user_id).copied()
    }

    pub fn user_id(&self, ordinal: u32) -> &str {
        &self.ids[ordinal as usize]
    }

    pub fn record(&self, user_id: &str) -> Option<&UserRecord> {
        self.ordinal(user_id).map(|o| &self.records[o as usize])
    }

    pub fn record_at(&self, ordinal: u32) -> &UserRecord {
        &self.records[ordinal as usize]
    }

    /// `(ordinal, user id, record)` in ordinal order.
    pub fn iter(&self) -> impl Iterator<Item = (u32, &str, &UserRecord)> {
        self.records
            .iter()
            .enumerate()
            .map(|(i, r)| (i as u32, self.ids[i].as_str(), r))
    }

    /// Resolves the visited page and appends the visit to its user.
    pub fn add_visit(&mut self, event: AccessEvent) {
        let page = self.pages.entry(&event.url).cloned();
        self.add_linked_visit(Visit { event, page });
    }

    pub(crate) fn add_linked_visit(&mut self, visit: Visit) {
        let ord = self.ordinal_or_insert(&visit.event.user_id);
        for field in Field::visit_fields() {
            match field.kind() {
                Kind::Categorical => {
                    for tok in field.visit_tokens(&visit) {
                        self.index.insert_token(field, &tok, ord);
                    }
                }
                Kind::Numeric => {
                    if let Some(v) = field.visit_number(&visit) {
                        self.index.insert_number(field, v, ord);
                    }
                }
            }
        }
        let visits = &mut self.records[ord as usize].visits;
        let pos = visits.partition_point(|v| v.event.timestamp <= visit.event.timestamp);
        visits.insert(pos, visit);
    }

    /// Replaces the user's registration data and its index entries.
    pub fn set_profile(&mut self, profile: UserProfile) -> Result<(), StoreError> {
        profile.validate()?;
        let ord = self.ordinal_or_insert(&profile.user_id);
        let old = std::mem::replace(&mut self.records[ord as usize].profile, profile);
        for field in Field::ALL.into_iter().filter(|f| f.level() == Level::User) {
            if let Some(tok) = field.profile_token(&old) {
                self.index.remove_token(field, &tok, ord);
            }
            if let Some(v) = field.profile_number(&old) {
                self.index.remove_number(field, v, ord);
            }
            let new = &self.records[ord as usize].profile;
            if let Some(tok) = field.profile_token(new) {
                self.index.insert_token(field, &tok, ord);
            }
            if let Some(v) = field.profile_number(new) {
                self.index.insert_number(field, v, ord);
            }
        }
        Ok(())
    }

    /// Reads JSON-lines profiles, skipping and counting lines that do not
    /// parse or violate the profile invariants. Returns `(accepted, rejected)`.
    pub fn read_profiles<R: BufRead>(&mut self, reader: R) -> Result<(usize, usize), StoreError> {
        let (mut ok, mut bad) = (0, 0);
        for line in reader.lines() {
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            match serde_json::from_str::<UserProfile>(&line) {
                Ok(p) => match self.set_profile(p) {
                    Ok(()) => ok += 1,
                    Err(StoreError::InvalidProfile(_)) => bad += 1,
                    Err(e) => return Err(e),
                },
                Err(_) => bad += 1,
            }
        }
        Ok((ok, bad))
    }

    pub(crate) fn postings_ordinals(&self, field: Field, token: &str) -> Result<&[u32], StoreError> {
        if field.kind() != Kind::Categorical {
            return Err(StoreError::UnknownField(field));
        }
        Ok(self.index.postings(field, token))
    }

    pub(crate) fn range_ordinals(&self, field: Field, lo: i64, hi: i64) -> Result<Vec<u32>, StoreError> {
        if field.kind() != Kind::Numeric {
            return Err(StoreError::UnknownField(field));
        }
        if lo > hi {
            return Err(StoreError::InvalidRange { lo, hi });
        }
        Ok(self.index.range(field, lo, hi))
    }

    pub fn to_user_set(&self, ordinals: &[u32]) -> UserSet {
        UserSet::from_ids(ordinals.iter().map(|&o| self.ids[o as usize].clone()))
    }

    /// Users having `token` in a categorical field (for visit fields: in at
    /// least one visit).
    pub fn postings(&self, field: Field, token: &str) -> Result<UserSet, StoreError> {
        Ok(self.to_user_set(self.postings_ordinals(field, token)?))
    }

    /// Users with a value of a numeric field in the closed range `[lo, hi]`.
    pub fn range(&self, field: Field, lo: i64, hi: i64) -> Result<UserSet, StoreError> {
        Ok(self.to_user_set(&self.range_ordinals(field, lo, hi)?))
    }
}
