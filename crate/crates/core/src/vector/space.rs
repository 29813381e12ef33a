use std::collections::{BTreeMap, HashMap};
use std::fmt;
use std::io::{BufRead, Write};
use std::ops::Range;
use std::str::FromStr;

use serde::{Deserialize, Deserializer, Serialize, Serializer};
use sha2::{Digest, Sha256};

use super::VectorError;
use crate::fields::{FeatureGroup, Field};
use crate::users::UserStore;

/// A non-empty set of feature groups.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct FeatureSetMask(u8);

impl FeatureSetMask {
    pub const CONTEXT: Self = Self(1);
    pub const TEXT: Self = Self(2);
    pub const ENTITIES: Self = Self(4);
    pub const METADATA: Self = Self(8);
    pub const ALL_CONTENT: Self = Self(2 | 4 | 8);
    pub const ALL: Self = Self(15);

    /// The six presets in ablation order.
    pub const PRESETS: [(&'static str, FeatureSetMask); 6] = [
        ("context", Self::CONTEXT),
        ("text", Self::TEXT),
        ("entities", Self::ENTITIES),
        ("metadata", Self::METADATA),
        ("all_content", Self::ALL_CONTENT),
        ("all", Self::ALL),
    ];

    fn bit(g: FeatureGroup) -> u8 {
        match g {
            FeatureGroup::Context => 1,
            FeatureGroup::Text => 2,
            FeatureGroup::Entities => 4,
            FeatureGroup::Metadata => 8,
        }
    }

    pub fn from_groups(groups: impl IntoIterator<Item = FeatureGroup>) -> Result<Self, VectorError> {
        let bits = groups.into_iter().fold(0, |acc, g| acc | Self::bit(g));
        if bits == 0 {
            Err(VectorError::EmptyMask)
        } else {
            Ok(Self(bits))
        }
    }

    pub fn contains(self, g: FeatureGroup) -> bool {
        self.0 & Self::bit(g) != 0
    }

    pub fn includes_field(self, f: Field) -> bool {
        f.group().is_some_and(|g| self.contains(g))
    }

    pub fn is_subset_of(self, other: Self) -> bool {
        self.0 & !other.0 == 0
    }

    pub fn groups(self) -> impl Iterator<Item = FeatureGroup> {
        FeatureGroup::ALL.into_iter().filter(move |g| self.contains(*g))
    }

    /// Namespaces selected by the mask, in namespace order.
    pub fn fields(self) -> impl Iterator<Item = Field> {
        Field::visit_fields().filter(move |f| self.includes_field(*f))
    }
}

impl fmt::Display for FeatureSetMask {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if let Some((name, _)) = Self::PRESETS.iter().find(|(_, m)| m == self) {
            return f.write_str(name);
        }
        let names: Vec<&str> = self.groups().map(FeatureGroup::as_str).collect();
        f.write_str(&names.join("+"))
    }
}

impl FromStr for FeatureSetMask {
    type Err = VectorError;

    /// A preset name or groups joined by `+`, e.g. `context+entities`.
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let norm = s.trim().to_lowercase().replace(['-', ' '], "_");
        if let Some((_, m)) = Self::PRESETS.iter().find(|(n, _)| *n == norm) {
            return Ok(*m);
        }
        if norm == "all_features" {
            return Ok(Self::ALL);
        }
        let mut bits = 0;
        for part in norm.split('+') {
            let m = Self::PRESETS
                .iter()
                .find(|(n, _)| *n == part)
                .map(|(_, m)| *m)
                .ok_or_else(|| VectorError::UnknownMask(s.to_string()))?;
            bits |= m.0;
        }
        Ok(Self(bits))
    }
}

impl Serialize for FeatureSetMask {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for FeatureSetMask {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        String::deserialize(d)?.parse().map_err(serde::de::Error::custom)
    }
}

/// Dictionary from `(namespace, token)` to a dense column index.
///
/// Columns are ordered by namespace, then token, so every namespace occupies
/// one contiguous index range.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct FeatureSpace {
    columns: Vec<(Field, String)>,
    lookup: HashMap<Field, HashMap<String, u32>>,
    blocks: Vec<(Field, Range<u32>)>,
    id: String,
}

impl FeatureSpace {
    /// Builds a space from `(namespace, token)` columns in any order.
    pub fn from_columns(columns: impl IntoIterator<Item = (Field, String)>) -> Result<Self, VectorError> {
        let mut grouped: BTreeMap<Field, Vec<String>> = BTreeMap::new();
        for (f, t) in columns {
            if f.group().is_none() {
                return Err(VectorError::InvalidSpace(format!("{f} cannot be a feature namespace")));
            }
            grouped.entry(f).or_default().push(t);
        }
        let mut cols = Vec::new();
        for (f, mut toks) in grouped {
            toks.sort();
            let before = toks.len();
            toks.dedup();
            if toks.len() != before {
                return Err(VectorError::InvalidSpace(format!("duplicate token in {f}")));
            }
            cols.extend(toks.into_iter().map(|t| (f, t)));
        }
        Ok(Self::from_sorted(cols))
    }

    fn from_sorted(columns: Vec<(Field, String)>) -> Self {
        let mut lookup: HashMap<Field, HashMap<String, u32>> = HashMap::new();
        let mut blocks: Vec<(Field, Range<u32>)> = Vec::new();
        for (i, (f, t)) in columns.iter().enumerate() {
            let i = i as u32;
            lookup.entry(*f).or_default().insert(t.clone(), i);
            match blocks.last_mut() {
                Some((g, r)) if g == f => r.end = i + 1,
                _ => blocks.push((*f, i..i + 1)),
            }
        }
        let mut space = Self {
            columns,
            lookup,
            blocks,
            id: String::new(),
        };
        let mut table = Vec::new();
        space.write_tsv(&mut table).expect("write to memory");
        space.id = Sha256::digest(&table).iter().take(8).map(|b| format!("{b:02x}")).collect();
        space
    }

    /// Vocabulary of every token occurring in at least `min_token_count`
    /// visits, over the namespaces selected by `mask`.
    pub fn build(store: &UserStore, mask: FeatureSetMask, min_token_count: usize) -> Result<Self, VectorError> {
        let fields: Vec<Field> = mask.fields().collect();
        let mut counts: BTreeMap<(Field, String), usize> = BTreeMap::new();
        let mut seen = std::collections::HashSet::new();
        for (_, _, rec) in store.iter() {
            for visit in &rec.visits {
                for &f in &fields {
                    seen.clear();
                    for tok in f.visit_tokens(visit) {
                        if seen.insert(tok.clone()) {
                            *counts.entry((f, tok.into_owned())).or_default() += 1;
                        }
                    }
                }
            }
        }
        let threshold = min_token_count.max(1);
        let columns: Vec<(Field, String)> = counts
            .into_iter()
            .filter(|(_, c)| *c >= threshold)
            .map(|(k, _)| k)
            .collect();
        if columns.is_empty() {
            return Err(VectorError::EmptyVocabulary);
        }
        Ok(Self::from_sorted(columns))
    }

    pub fn dim(&self) -> usize {
        self.columns.len()
    }

    /// Content hash of the dictionary.
    pub fn id(&self) -> &str {
        &self.id
    }

    pub fn index_of(&self, field: Field, token: &str) -> Option<u32> {
        self.lookup.get(&field)?.get(token).copied()
    }

    pub fn column(&self, index: u32) -> Option<(Field, &str)> {
        self.columns.get(index as usize).map(|(f, t)| (*f, t.as_str()))
    }

    /// Namespaces present in the space with their index ranges.
    pub fn blocks(&self) -> &[(Field, Range<u32>)] {
        &self.blocks
    }

    pub fn block(&self, field: Field) -> Option<Range<u32>> {
        self.blocks.iter().find(|(f, _)| *f == field).map(|(_, r)| r.clone())
    }

    pub fn namespaces(&self) -> impl Iterator<Item = Field> + '_ {
        self.blocks.iter().map(|(f, _)| *f)
    }

    /// `namespace<TAB>token<TAB>index` lines; tabs, newlines and backslashes
    /// in tokens are backslash-escaped.
    pub fn write_tsv<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        for (i, (f, t)) in self.columns.iter().enumerate() {
            writeln!(out, "{}\t{}\t{i}", f.name(), escape(t))?;
        }
        out.flush()
    }

    pub fn read_tsv<R: BufRead>(input: R) -> Result<Self, VectorError> {
        let mut columns = Vec::new();
        for (n, line) in input.lines().enumerate() {
            let line = line?;
            if line.is_empty() {
                continue;
            }
            let bad = |m: &str| VectorError::InvalidSpace(format!("line {}: {m}", n + 1));
            let mut parts = line.split('\t');
            let (Some(ns), Some(tok), Some(idx), None) = (parts.next(), parts.next(), parts.next(), parts.next()) else {
                return Err(bad("expected three tab-separated columns"));
            };
            let field: Field = ns.parse().map_err(|_| bad("unknown namespace"))?;
            let idx: usize = idx.parse().map_err(|_| bad("bad index"))?;
            if idx != columns.len() {
                return Err(bad("indices must be dense and in order"));
            }
            columns.push((field, unescape(tok).ok_or_else(|| bad("bad escape"))?));
        }
        let space = Self::from_columns(columns.clone())?;
        if space.columns != columns {
            return Err(VectorError::InvalidSpace("columns are not in canonical order".into()));
        }
        Ok(space)
    }

    pub fn save(&self, path: impl AsRef<std::path::Path>) -> Result<(), VectorError> {
        let f = std::fs::File::create(path)?;
        self.write_tsv(std::io::BufWriter::new(f))?;
        Ok(())
    }

    pub fn load(path: impl AsRef<std::path::Path>) -> Result<Self, VectorError> {
        let f = std::fs::File::open(path)?;
        Self::read_tsv(std::io::BufReader::new(f))
    }
}

fn escape(s: &str) -> String {
    let mut out = String::with_capacity(s.len());
    for c in s.chars() {
        match c {
            '\\' => out.push_str("\\\\"),
            '\t' => out.push_str("\\t"),
            '\n' => out.push_str("\\n"),
            '\r' => out.push_str("\\r"),
            c => out.push(c),
        }
    }
    out
}

fn unescape(s: &str) -> Option<String> {
    let mut out = String::with_capacity(s.len());
    let mut chars = s.chars();
    while let Some(c) = chars.next() {
        if c == '\\' {
            out.push(match chars.next()? {
                '\\' => '\\',
                't' => '\t',
                'n' => '\n',
                'r' => '\r',
                _ => return None,
            });
        } else {
            out.push(c);
        }
    }
    Some(out)
}
