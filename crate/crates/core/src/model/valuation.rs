use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};

/// A map from labels to finite sets of stream positions.
///
/// Position sets are kept sorted and duplicate-free; labels with an empty
/// set are never stored, so structural equality is semantic equality.
#[derive(Clone, Debug, Default, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Valuation(BTreeMap<String, Vec<usize>>);

impl Valuation {
    pub fn new() -> Self {
        Self::default()
    }

    /// `ν_{L,i}`: every label in `labels` maps to `{position}`.
    pub fn singleton<S: AsRef<str>>(labels: impl IntoIterator<Item = S>, position: usize) -> Self {
        let mut v = Valuation::new();
        for l in labels {
            v.insert(l.as_ref(), position);
        }
        v
    }

    pub fn from_pairs<S: AsRef<str>>(pairs: impl IntoIterator<Item = (S, usize)>) -> Self {
        let mut v = Valuation::new();
        for (l, p) in pairs {
            v.insert(l.as_ref(), p);
        }
        v
    }

    pub fn insert(&mut self, label: &str, position: usize) {
        let set = match self.0.get_mut(label) {
            Some(set) => set,
            None => self.0.entry(label.to_string()).or_default(),
        };
        if let Err(at) = set.binary_search(&position) {
            set.insert(at, position);
        }
    }

    pub fn get(&self, label: &str) -> &[usize] {
        self.0.get(label).map(Vec::as_slice).unwrap_or(&[])
    }

    pub fn labels(&self) -> impl Iterator<Item = &str> {
        self.0.keys().map(String::as_str)
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, &[usize])> {
        self.0.iter().map(|(l, s)| (l.as_str(), s.as_slice()))
    }

    /// All `(label, position)` pairs in label order.
    pub fn pairs(&self) -> impl Iterator<Item = (&str, usize)> {
        self.iter().flat_map(|(l, s)| s.iter().map(move |&p| (l, p)))
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    /// Total number of `(label, position)` pairs.
    pub fn size(&self) -> usize {
        self.0.values().map(Vec::len).sum()
    }

    pub fn min_position(&self) -> Option<usize> {
        self.0.values().filter_map(|s| s.first().copied()).min()
    }

    pub fn max_position(&self) -> Option<usize> {
        self.0.values().filter_map(|s| s.last().copied()).max()
    }

    /// `ν ⊕ ν'`: label-wise union.
    pub fn product(&self, other: &Valuation) -> Valuation {
        let mut out = self.clone();
        for (l, p) in other.pairs() {
            out.insert(l, p);
        }
        out
    }

    /// True iff the label-wise position sets are pairwise disjoint.
    pub fn is_simple_product(&self, other: &Valuation) -> bool {
        other.iter().all(|(l, ps)| {
            let mine = self.get(l);
            ps.iter().all(|p| mine.binary_search(p).is_err())
        })
    }

    /// Membership test `|now - min(ν)| <= w` for a finite or infinite window.
    pub fn within_window(&self, now: usize, window: Option<usize>) -> bool {
        match (self.min_position(), window) {
            (_, None) => true,
            (None, Some(_)) => true,
            (Some(m), Some(w)) => now.abs_diff(m) <= w,
        }
    }
}

impl fmt::Display for Valuation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("{")?;
        for (i, (l, s)) in self.iter().enumerate() {
            if i > 0 {
                f.write_str(", ")?;
            }
            write!(f, "{l}: {s:?}")?;
        }
        f.write_str("}")
    }
}
