//! Finite sets of integers kept as sorted, deduplicated vectors.

use serde::{Deserialize, Serialize};

#[derive(Clone, Debug, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct IntSet(Vec<i64>);

impl IntSet {
    pub fn new() -> Self {
        Self(Vec::new())
    }

    /// Builds a set from already sorted, strictly increasing values.
    ///
    /// Panics in debug builds when the input is not strictly increasing.
    pub fn from_sorted(values: Vec<i64>) -> Self {
        debug_assert!(values.windows(2).all(|w| w[0] < w[1]));
        Self(values)
    }

    pub fn range(lo: i64, hi: i64) -> Self {
        Self((lo..=hi).collect())
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn contains(&self, x: i64) -> bool {
        self.0.binary_search(&x).is_ok()
    }

    pub fn min(&self) -> Option<i64> {
        self.0.first().copied()
    }

    pub fn max(&self) -> Option<i64> {
        self.0.last().copied()
    }

    pub fn iter(&self) -> impl DoubleEndedIterator<Item = i64> + ExactSizeIterator + '_ {
        self.0.iter().copied()
    }

    pub fn as_slice(&self) -> &[i64] {
        &self.0
    }

    pub fn into_vec(self) -> Vec<i64> {
        self.0
    }

    /// `{x + shift : x in self}`
    pub fn translate(&self, shift: i64) -> Self {
        Self(self.0.iter().map(|x| x + shift).collect())
    }

    pub fn intersection(&self, other: &IntSet) -> Self {
        let (mut i, mut j) = (0, 0);
        let mut out = Vec::new();
        while i < self.0.len() && j < other.0.len() {
            match self.0[i].cmp(&other.0[j]) {
                std::cmp::Ordering::Less => i += 1,
                std::cmp::Ordering::Greater => j += 1,
                std::cmp::Ordering::Equal => {
                    out.push(self.0[i]);
                    i += 1;
                    j += 1;
                }
            }
        }
        Self(out)
    }

    pub fn is_subset(&self, other: &IntSet) -> bool {
        self.0.iter().all(|&x| other.contains(x))
    }
}

impl FromIterator<i64> for IntSet {
    fn from_iter<I: IntoIterator<Item = i64>>(iter: I) -> Self {
        let mut v: Vec<i64> = iter.into_iter().collect();
        v.sort_unstable();
        v.dedup();
        Self(v)
    }
}

impl From<Vec<i64>> for IntSet {
    fn from(v: Vec<i64>) -> Self {
        v.into_iter().collect()
    }
}

impl<'a> IntoIterator for &'a IntSet {
    type Item = i64;
    type IntoIter = std::iter::Copied<std::slice::Iter<'a, i64>>;

    fn into_iter(self) -> Self::IntoIter {
        self.0.iter().copied()
    }
}
