use std::collections::{BTreeSet, HashMap};

use crate::fields::Field;

/// Membership index over users, addressed by dense user ordinals.
///
/// Categorical postings hold each user at most once per `(field, token)`
/// regardless of how many visits carry the token. Numeric columns are kept
/// ordered by `(value, ordinal)` so range queries are a tree search.
#[derive(Clone, Debug, Default)]
pub struct InvertedIndex {
    postings: HashMap<Field, HashMap<String, Vec<u32>>>,
    numeric: HashMap<Field, BTreeSet<(i64, u32)>>,
}

impl InvertedIndex {
    pub fn insert_token(&mut self, field: Field, token: &str, user: u32) {
        let tokens = self.postings.entry(field).or_default();
        if !tokens.contains_key(token) {
            tokens.insert(token.to_string(), Vec::new());
        }
        let list = tokens.get_mut(token).expect("inserted above");
        if let Err(pos) = list.binary_search(&user) {
            list.insert(pos, user);
        }
    }

    pub fn remove_token(&mut self, field: Field, token: &str, user: u32) {
        if let Some(tokens) = self.postings.get_mut(&field) {
            if let Some(list) = tokens.get_mut(token) {
                if let Ok(pos) = list.binary_search(&user) {
                    list.remove(pos);
                }
                if list.is_empty() {
                    tokens.remove(token);
                }
            }
        }
    }

    pub fn insert_number(&mut self, field: Field, value: i64, user: u32) {
        self.numeric.entry(field).or_default().insert((value, user));
    }

    pub fn remove_number(&mut self, field: Field, value: i64, user: u32) {
        if let Some(col) = self.numeric.get_mut(&field) {
            col.remove(&(value, user));
        }
    }

    pub fn postings(&self, field: Field, token: &str) -> &[u32] {
        self.postings
            .get(&field)
            .and_then(|t| t.get(token))
            .map(Vec::as_slice)
            .unwrap_or(&[])
    }

    /// Sorted, deduplicated ordinals with a value in `[lo, hi]`.
    pub fn range(&self, field: Field, lo: i64, hi: i64) -> Vec<u32> {
        let Some(col) = self.numeric.get(&field) else {
            return Vec::new();
        };
        if lo > hi {
            return Vec::new();
        }
        let mut out: Vec<u32> = col.range((lo, 0)..=(hi, u32::MAX)).map(|&(_, u)| u).collect();
        out.sort_unstable();
        out.dedup();
        out
    }

    /// All `(token, postings)` pairs of one categorical field.
    pub fn tokens(&self, field: Field) -> impl Iterator<Item = (&str, &[u32])> {
        self.postings
            .get(&field)
            .into_iter()
            .flat_map(|t| t.iter().map(|(k, v)| (k.as_str(), v.as_slice())))
    }

    pub fn column(&self, field: Field) -> impl Iterator<Item = (i64, u32)> + '_ {
        self.numeric.get(&field).into_iter().flat_map(|c| c.iter().copied())
    }
}

/// Intersection of two sorted ordinal lists.
pub fn intersect(a: &[u32], b: &[u32]) -> Vec<u32> {
    let (small, large) = if a.len() <= b.len() { (a, b) } else { (b, a) };
    let mut out = Vec::with_capacity(small.len());
    let mut j = 0;
    for &x in small {
        // galloping would help for very skewed lengths; linear merge is fine here
        while j < large.len() && large[j] < x {
            j += 1;
        }
        if j == large.len() {
            break;
        }
        if large[j] == x {
            out.push(x);
        }
    }
    out
}

pub fn union(a: &[u32], b: &[u32]) -> Vec<u32> {
    let mut out = Vec::with_capacity(a.len() + b.len());
    let (mut i, mut j) = (0, 0);
    while i < a.len() && j < b.len() {
        match a[i].cmp(&b[j]) {
            std::cmp::Ordering::Less => {
                out.push(a[i]);
                i += 1;
            }
            std::cmp::Ordering::Greater => {
                out.push(b[j]);
                j += 1;
            }
            std::cmp::Ordering::Equal => {
                out.push(a[i]);
                i += 1;
                j += 1;
            }
        }
    }
    out.extend_from_slice(&a[i..]);
    out.extend_from_slice(&b[j..]);
    out
}

/// `0..universe` minus `a`.
pub fn complement(a: &[u32], universe: u32) -> Vec<u32> {
    let mut out = Vec::with_capacity(universe as usize - a.len().min(universe as usize));
    let mut it = a.iter().peekable();
    for u in 0..universe {
        if it.peek() == Some(&&u) {
            it.next();
        } else {
            out.push(u);
        }
    }
    out
}
