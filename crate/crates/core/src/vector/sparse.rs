use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use super::VectorError;

/// Sparse vector with strictly increasing indices and no explicit zeros.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct SparseVector {
    entries: Vec<(u32, f64)>,
}

impl SparseVector {
    pub fn zero() -> Self {
        Self::default()
    }

    /// Builds a vector from unordered pairs. Duplicate indices are summed and
    /// zeros dropped.
    pub fn from_pairs(mut pairs: Vec<(u32, f64)>) -> Result<Self, VectorError> {
        if let Some(&(i, v)) = pairs.iter().find(|(_, v)| !v.is_finite()) {
            return Err(VectorError::NonFinite { index: i, value: v });
        }
        pairs.sort_by_key(|p| p.0);
        let mut entries: Vec<(u32, f64)> = Vec::with_capacity(pairs.len());
        for (i, v) in pairs {
            match entries.last_mut() {
                Some(last) if last.0 == i => last.1 += v,
                _ => entries.push((i, v)),
            }
        }
        entries.retain(|e| e.1 != 0.0);
        Ok(Self { entries })
    }

    /// Caller guarantees sorted, unique, finite, nonzero entries.
    pub(crate) fn from_sorted_unchecked(entries: Vec<(u32, f64)>) -> Self {
        debug_assert!(entries.windows(2).all(|w| w[0].0 < w[1].0));
        debug_assert!(entries.iter().all(|e| e.1 != 0.0 && e.1.is_finite()));
        Self { entries }
    }

    pub fn from_dense(values: &[f64]) -> Result<Self, VectorError> {
        Self::from_pairs(
            values
                .iter()
                .enumerate()
                .filter(|(_, v)| **v != 0.0)
                .map(|(i, v)| (i as u32, *v))
                .collect(),
        )
    }

    pub fn entries(&self) -> &[(u32, f64)] {
        &self.entries
    }

    pub fn iter(&self) -> impl Iterator<Item = (u32, f64)> + '_ {
        self.entries.iter().copied()
    }

    /// Number of stored (nonzero) entries.
    pub fn nnz(&self) -> usize {
        self.entries.len()
    }

    pub fn is_zero(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn get(&self, index: u32) -> f64 {
        self.entries
            .binary_search_by_key(&index, |e| e.0)
            .map(|k| self.entries[k].1)
            .unwrap_or(0.0)
    }

    /// One past the largest index, or 0 for the zero vector.
    pub fn min_dim(&self) -> usize {
        self.entries.last().map_or(0, |e| e.0 as usize + 1)
    }

    pub fn norm(&self) -> f64 {
        self.entries.iter().map(|e| e.1 * e.1).sum::<f64>().sqrt()
    }

    pub fn dot(&self, other: &SparseVector) -> f64 {
        let (a, b) = (&self.entries, &other.entries);
        let (mut i, mut j, mut acc) = (0, 0, 0.0);
        while i < a.len() && j < b.len() {
            match a[i].0.cmp(&b[j].0) {
                std::cmp::Ordering::Less => i += 1,
                std::cmp::Ordering::Greater => j += 1,
                std::cmp::Ordering::Equal => {
                    acc += a[i].1 * b[j].1;
                    i += 1;
                    j += 1;
                }
            }
        }
        acc
    }

    /// Dot product with a dense vector; indices past its end count as zero.
    pub fn dot_dense(&self, dense: &[f64]) -> f64 {
        self.entries
            .iter()
            .map(|&(i, v)| dense.get(i as usize).map_or(0.0, |w| w * v))
            .sum()
    }

    pub fn scaled(&self, factor: f64) -> SparseVector {
        if factor == 0.0 {
            return Self::zero();
        }
        Self {
            entries: self.entries.iter().map(|&(i, v)| (i, v * factor)).collect(),
        }
    }

    /// Scales to unit L2 norm; the zero vector stays zero.
    pub fn normalized(&self) -> SparseVector {
        let n = self.norm();
        if n == 0.0 {
            Self::zero()
        } else {
            Self {
                entries: self.entries.iter().map(|&(i, v)| (i, v / n)).collect(),
            }
        }
    }

    pub fn add(&self, other: &SparseVector) -> SparseVector {
        let mut pairs = self.entries.clone();
        pairs.extend_from_slice(&other.entries);
        Self::from_pairs(pairs).expect("sum of finite vectors")
    }

    pub fn to_dense(&self, dim: usize) -> Vec<f64> {
        let mut out = vec![0.0; dim.max(self.min_dim())];
        for &(i, v) in &self.entries {
            out[i as usize] = v;
        }
        out
    }
}

/// Wire form: `index:value` pairs separated by single spaces.
impl fmt::Display for SparseVector {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (k, (i, v)) in self.entries.iter().enumerate() {
            if k > 0 {
                f.write_str(" ")?;
            }
            write!(f, "{i}:{v:?}")?;
        }
        Ok(())
    }
}

impl FromStr for SparseVector {
    type Err = VectorError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let mut pairs = Vec::new();
        for item in s.split_whitespace() {
            let bad = || VectorError::Parse(format!("bad entry {item:?}"));
            let (i, v) = item.split_once(':').ok_or_else(bad)?;
            let i: u32 = i.parse().map_err(|_| bad())?;
            let v: f64 = v.parse().map_err(|_| bad())?;
            if pairs.last().is_some_and(|&(p, _)| p >= i) {
                return Err(VectorError::Parse(format!("index {i} out of order")));
            }
            pairs.push((i, v));
        }
        Self::from_pairs(pairs)
    }
}

impl Serialize for SparseVector {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for SparseVector {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}
