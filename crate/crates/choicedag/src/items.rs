//! Item sets as 64-bit masks.
//!
//! Items are 0-based indices internally; all I/O displays 1-based ids to
//! match the usual catalog numbering. The mask representation caps the
//! universe at 64 items, which covers every workload this library targets.

use serde::{Deserialize, Serialize};
use std::fmt;

/// An unordered set of items, one bit per item.
#[derive(Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Default, Serialize, Deserialize)]
#[serde(transparent)]
pub struct ItemSet(pub u64);

impl ItemSet {
    pub const EMPTY: ItemSet = ItemSet(0);

    /// The full universe {0, .., n-1}.
    pub fn universe(n: usize) -> ItemSet {
        debug_assert!(n <= 64);
        if n == 64 {
            ItemSet(u64::MAX)
        } else {
            ItemSet((1u64 << n) - 1)
        }
    }

    pub fn singleton(item: usize) -> ItemSet {
        ItemSet(1u64 << item)
    }

    pub fn from_items<I: IntoIterator<Item = usize>>(items: I) -> ItemSet {
        let mut mask = 0u64;
        for z in items {
            mask |= 1u64 << z;
        }
        ItemSet(mask)
    }

    pub fn len(self) -> usize {
        self.0.count_ones() as usize
    }

    pub fn is_empty(self) -> bool {
        self.0 == 0
    }

    pub fn contains(self, item: usize) -> bool {
        self.0 >> item & 1 == 1
    }

    pub fn insert(self, item: usize) -> ItemSet {
        ItemSet(self.0 | 1u64 << item)
    }

    pub fn remove(self, item: usize) -> ItemSet {
        ItemSet(self.0 & !(1u64 << item))
    }

    pub fn union(self, other: ItemSet) -> ItemSet {
        ItemSet(self.0 | other.0)
    }

    pub fn intersection(self, other: ItemSet) -> ItemSet {
        ItemSet(self.0 & other.0)
    }

    pub fn difference(self, other: ItemSet) -> ItemSet {
        ItemSet(self.0 & !other.0)
    }

    pub fn is_subset_of(self, other: ItemSet) -> bool {
        self.0 & !other.0 == 0
    }

    pub fn is_proper_subset_of(self, other: ItemSet) -> bool {
        self.0 != other.0 && self.is_subset_of(other)
    }

    pub fn is_disjoint_from(self, other: ItemSet) -> bool {
        self.0 & other.0 == 0
    }

    /// Iterate members in increasing item order.
    pub fn iter(self) -> impl Iterator<Item = usize> {
        let mut rest = self.0;
        std::iter::from_fn(move || {
            if rest == 0 {
                None
            } else {
                let z = rest.trailing_zeros() as usize;
                rest &= rest - 1;
                Some(z)
            }
        })
    }

    /// 1-based, sorted item ids, the external representation.
    pub fn to_one_based(self) -> Vec<usize> {
        self.iter().map(|z| z + 1).collect()
    }

    pub fn from_one_based(ids: &[usize]) -> crate::Result<ItemSet> {
        let mut mask = 0u64;
        for &id in ids {
            if id == 0 || id > 64 {
                return Err(crate::Error::InvalidParameter(format!(
                    "item id {id} out of range 1..=64"
                )));
            }
            mask |= 1u64 << (id - 1);
        }
        Ok(ItemSet(mask))
    }
}

impl fmt::Debug for ItemSet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{self}")
    }
}

impl fmt::Display for ItemSet {
    /// 1-based members joined by `-`; the empty set prints as `{}`.
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.is_empty() {
            return write!(f, "{{}}");
        }
        let ids: Vec<String> = self.iter().map(|z| (z + 1).to_string()).collect();
        write!(f, "{}", ids.join("-"))
    }
}

/// Iterate every subset of `mask`, including the empty set and `mask` itself.
pub fn subsets_of(mask: u64) -> impl Iterator<Item = u64> {
    let mut sub = 0u64;
    let mut done = false;
    std::iter::from_fn(move || {
        if done {
            return None;
        }
        let current = sub;
        if sub == mask {
            done = true;
        } else {
            // standard submask enumeration trick
            sub = (sub.wrapping_sub(mask)) & mask;
        }
        Some(current)
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn set_basics() {
        let s = ItemSet::from_items([0, 2, 5]);
        assert_eq!(s.len(), 3);
        assert!(s.contains(2));
        assert!(!s.contains(1));
        assert_eq!(s.to_one_based(), vec![1, 3, 6]);
        assert_eq!(s.to_string(), "1-3-6");
        assert_eq!(ItemSet::EMPTY.to_string(), "{}");
    }

    #[test]
    fn subset_relations() {
        let a = ItemSet::from_items([0, 1]);
        let b = ItemSet::from_items([0, 1, 2]);
        assert!(a.is_proper_subset_of(b));
        assert!(a.is_subset_of(a));
        assert!(!a.is_proper_subset_of(a));
        assert!(a.is_disjoint_from(ItemSet::singleton(3)));
    }

    #[test]
    fn subset_enumeration_counts() {
        let mask = ItemSet::from_items([1, 3, 4]).0;
        let subs: Vec<u64> = subsets_of(mask).collect();
        assert_eq!(subs.len(), 8);
        assert!(subs.contains(&0));
        assert!(subs.contains(&mask));
        for s in subs {
            assert_eq!(s & !mask, 0);
        }
    }

    #[test]
    fn one_based_roundtrip() {
        let s = ItemSet::from_one_based(&[2, 7, 1]).unwrap();
        assert_eq!(s.to_one_based(), vec![1, 2, 7]);
        assert!(ItemSet::from_one_based(&[0]).is_err());
        assert!(ItemSet::from_one_based(&[65]).is_err());
    }
}
