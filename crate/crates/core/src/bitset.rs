//! Fixed-universe bit sets used for rule covers.

use alloc::vec;
use alloc::vec::Vec;

/// A set of instance indices drawn from `0..universe`.
///
/// Equality, ordering and hashing only look at the members and the universe
/// size, so two covers built in different ways compare equal when they hold
/// the same instances.
#[derive(Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Debug)]
pub struct CoverSet {
    words: Vec<u64>,
    universe: usize,
}

impl CoverSet {
    pub fn empty(universe: usize) -> Self {
        CoverSet {
            words: vec![0; universe.div_ceil(64)],
            universe,
        }
    }

    pub fn full(universe: usize) -> Self {
        let mut set = CoverSet {
            words: vec![u64::MAX; universe.div_ceil(64)],
            universe,
        };
        set.clear_tail();
        set
    }

    pub fn from_indices<I: IntoIterator<Item = usize>>(universe: usize, indices: I) -> Self {
        let mut set = Self::empty(universe);
        for i in indices {
            set.insert(i);
        }
        set
    }

    pub fn from_predicate<F: FnMut(usize) -> bool>(universe: usize, mut keep: F) -> Self {
        let mut set = Self::empty(universe);
        for i in 0..universe {
            if keep(i) {
                set.insert(i);
            }
        }
        set
    }

    fn clear_tail(&mut self) {
        let rem = self.universe % 64;
        if rem != 0 {
            if let Some(last) = self.words.last_mut() {
                *last &= (1u64 << rem) - 1;
            }
        }
    }

    pub fn universe(&self) -> usize {
        self.universe
    }

    pub fn insert(&mut self, i: usize) {
        assert!(i < self.universe, "index {i} outside universe {}", self.universe);
        self.words[i / 64] |= 1 << (i % 64);
    }

    pub fn remove(&mut self, i: usize) {
        assert!(i < self.universe, "index {i} outside universe {}", self.universe);
        self.words[i / 64] &= !(1 << (i % 64));
    }

    pub fn contains(&self, i: usize) -> bool {
        i < self.universe && self.words[i / 64] & (1 << (i % 64)) != 0
    }

    pub fn len(&self) -> usize {
        self.words.iter().map(|w| w.count_ones() as usize).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.words.iter().all(|&w| w == 0)
    }

    pub fn intersection(&self, other: &CoverSet) -> CoverSet {
        self.zip_with(other, |a, b| a & b)
    }

    pub fn union(&self, other: &CoverSet) -> CoverSet {
        self.zip_with(other, |a, b| a | b)
    }

    pub fn difference(&self, other: &CoverSet) -> CoverSet {
        self.zip_with(other, |a, b| a & !b)
    }

    pub fn union_with(&mut self, other: &CoverSet) {
        debug_assert_eq!(self.universe, other.universe);
        for (a, b) in self.words.iter_mut().zip(&other.words) {
            *a |= b;
        }
    }

    fn zip_with(&self, other: &CoverSet, op: impl Fn(u64, u64) -> u64) -> CoverSet {
        debug_assert_eq!(self.universe, other.universe);
        CoverSet {
            words: self
                .words
                .iter()
                .zip(&other.words)
                .map(|(&a, &b)| op(a, b))
                .collect(),
            universe: self.universe,
        }
    }

    pub fn intersection_len(&self, other: &CoverSet) -> usize {
        self.words
            .iter()
            .zip(&other.words)
            .map(|(a, b)| (a & b).count_ones() as usize)
            .sum()
    }

    pub fn union_len(&self, other: &CoverSet) -> usize {
        self.words
            .iter()
            .zip(&other.words)
            .map(|(a, b)| (a | b).count_ones() as usize)
            .sum()
    }

    pub fn is_subset(&self, other: &CoverSet) -> bool {
        self.words.iter().zip(&other.words).all(|(a, b)| a & !b == 0)
    }

    pub fn is_disjoint(&self, other: &CoverSet) -> bool {
        self.words.iter().zip(&other.words).all(|(a, b)| a & b == 0)
    }

    /// Jaccard similarity `|A ∩ B| / |A ∪ B|`; two empty sets count as identical.
    pub fn jaccard(&self, other: &CoverSet) -> f64 {
        let union = self.union_len(other);
        if union == 0 {
            return 1.0;
        }
        self.intersection_len(other) as f64 / union as f64
    }

    pub fn iter(&self) -> impl Iterator<Item = usize> + '_ {
        self.words.iter().enumerate().flat_map(|(w, &word)| {
            let mut bits = word;
            core::iter::from_fn(move || {
                if bits == 0 {
                    return None;
                }
                let tz = bits.trailing_zeros() as usize;
                bits &= bits - 1;
                Some(w * 64 + tz)
            })
        })
    }

    pub fn to_vec(&self) -> Vec<usize> {
        self.iter().collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn full_respects_universe() {
        let s = CoverSet::full(70);
        assert_eq!(s.len(), 70);
        assert!(!s.contains(70));
        assert_eq!(s.iter().last(), Some(69));
    }

    #[test]
    fn jaccard_of_disjoint_is_zero() {
        let a = CoverSet::from_indices(10, [0, 1]);
        let b = CoverSet::from_indices(10, [2, 3]);
        assert_eq!(a.jaccard(&b), 0.0);
        assert_eq!(a.jaccard(&a), 1.0);
    }

    proptest! {
        #[test]
        fn set_ops_match_vec_semantics(
            a in proptest::collection::btree_set(0usize..150, 0..60),
            b in proptest::collection::btree_set(0usize..150, 0..60),
        ) {
            let sa = CoverSet::from_indices(150, a.iter().copied());
            let sb = CoverSet::from_indices(150, b.iter().copied());
            let inter: alloc::vec::Vec<usize> = a.intersection(&b).copied().collect();
            let uni: alloc::vec::Vec<usize> = a.union(&b).copied().collect();
            let diff: alloc::vec::Vec<usize> = a.difference(&b).copied().collect();
            prop_assert_eq!(sa.intersection(&sb).to_vec(), inter.clone());
            prop_assert_eq!(sa.union(&sb).to_vec(), uni.clone());
            prop_assert_eq!(sa.difference(&sb).to_vec(), diff);
            prop_assert_eq!(sa.intersection_len(&sb), inter.len());
            prop_assert_eq!(sa.union_len(&sb), uni.len());
            prop_assert_eq!(sa.is_subset(&sb), a.is_subset(&b));
        }
    }
}
