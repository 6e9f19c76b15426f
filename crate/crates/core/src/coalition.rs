//! Sets of searchers, stored as a 64-bit mask.

use std::fmt;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

/// Hard cap on the number of searchers a [`Coalition`] can address.
pub const MAX_SEARCHERS: usize = 64;

/// A set of searcher indices. The validator is never a member; it is
/// implicit in every coalition whose value is queried.
#[derive(Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Default)]
pub struct Coalition(u64);

impl Coalition {
    pub const EMPTY: Coalition = Coalition(0);

    pub fn from_mask(mask: u64) -> Self {
        Coalition(mask)
    }

    pub fn mask(self) -> u64 {
        self.0
    }

    /// All searchers `0..n`.
    pub fn full(n: usize) -> Self {
        assert!(n <= MAX_SEARCHERS, "at most {MAX_SEARCHERS} searchers");
        if n == MAX_SEARCHERS {
            Coalition(u64::MAX)
        } else {
            Coalition((1u64 << n) - 1)
        }
    }

    pub fn singleton(i: usize) -> Self {
        assert!(i < MAX_SEARCHERS);
        Coalition(1u64 << i)
    }

    pub fn from_indices<I: IntoIterator<Item = usize>>(indices: I) -> Self {
        indices.into_iter().fold(Coalition::EMPTY, |c, i| c.with(i))
    }

    pub fn contains(self, i: usize) -> bool {
        i < MAX_SEARCHERS && self.0 & (1u64 << i) != 0
    }

    pub fn with(self, i: usize) -> Self {
        assert!(i < MAX_SEARCHERS);
        Coalition(self.0 | (1u64 << i))
    }

    pub fn without(self, i: usize) -> Self {
        if i >= MAX_SEARCHERS {
            return self;
        }
        Coalition(self.0 & !(1u64 << i))
    }

    pub fn union(self, other: Coalition) -> Self {
        Coalition(self.0 | other.0)
    }

    pub fn intersection(self, other: Coalition) -> Self {
        Coalition(self.0 & other.0)
    }

    pub fn difference(self, other: Coalition) -> Self {
        Coalition(self.0 & !other.0)
    }

    pub fn is_subset_of(self, other: Coalition) -> bool {
        self.0 & !other.0 == 0
    }

    pub fn is_empty(self) -> bool {
        self.0 == 0
    }

    pub fn len(self) -> usize {
        self.0.count_ones() as usize
    }

    /// Highest member index plus one (0 for the empty set).
    pub fn span(self) -> usize {
        (u64::BITS - self.0.leading_zeros()) as usize
    }

    pub fn iter(self) -> impl Iterator<Item = usize> {
        let mut rest = self.0;
        std::iter::from_fn(move || {
            if rest == 0 {
                None
            } else {
                let i = rest.trailing_zeros() as usize;
                rest &= rest - 1;
                Some(i)
            }
        })
    }

    pub fn to_vec(self) -> Vec<usize> {
        self.iter().collect()
    }

    /// Every subset of `Coalition::full(n)`, in increasing mask order.
    pub fn all(n: usize) -> impl Iterator<Item = Coalition> {
        assert!(n < MAX_SEARCHERS);
        (0..(1u64 << n)).map(Coalition)
    }

    /// Every superset of `self` inside `universe` (including `self` when it
    /// is contained in `universe`).
    pub fn supersets_within(self, universe: Coalition) -> impl Iterator<Item = Coalition> {
        let free = universe.0 & !self.0;
        let base = self.0;
        let mut sub = free;
        let mut done = !self.is_subset_of(universe);
        std::iter::from_fn(move || {
            if done {
                return None;
            }
            let out = Coalition(base | sub);
            if sub == 0 {
                done = true;
            } else {
                sub = (sub - 1) & free;
            }
            Some(out)
        })
    }
}

impl fmt::Debug for Coalition {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_set().entries(self.iter()).finish()
    }
}

impl FromIterator<usize> for Coalition {
    fn from_iter<T: IntoIterator<Item = usize>>(iter: T) -> Self {
        Coalition::from_indices(iter)
    }
}

impl Serialize for Coalition {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.collect_seq(self.iter())
    }
}

impl<'de> Deserialize<'de> for Coalition {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let indices = Vec::<usize>::deserialize(deserializer)?;
        if let Some(&bad) = indices.iter().find(|&&i| i >= MAX_SEARCHERS) {
            return Err(serde::de::Error::custom(format!(
                "searcher index {bad} exceeds the supported maximum {}",
                MAX_SEARCHERS - 1
            )));
        }
        Ok(Coalition::from_indices(indices))
    }
}
