//! Greedy approximate minimum set cover over prefix collections.
//!
//! The instances that arise here are special: the target is a prefix `A`,
//! the candidate sets are the one-item deletions S⁻(A) = { A∖{x} : x ∈ A },
//! and every prefix to cover is a proper subset of `A` — hence always
//! coverable. The greedy rule gives the classic (1 + ln|P|) approximation.

use crate::items::ItemSet;
use crate::{Error, Result};

/// A cover instance: the target prefix and the prefixes that must each be
/// contained in some chosen candidate.
#[derive(Clone, Debug)]
pub struct CoverInstance {
    pub target: ItemSet,
    pub universe: Vec<ItemSet>,
}

impl CoverInstance {
    pub fn new(target: ItemSet, universe: Vec<ItemSet>) -> CoverInstance {
        CoverInstance { target, universe }
    }

    fn check(&self) -> Result<()> {
        for p in &self.universe {
            if !p.is_proper_subset_of(self.target) {
                return Err(Error::UncoverablePrefix(format!(
                    "{p} is not a proper subset of target {}",
                    self.target
                )));
            }
        }
        Ok(())
    }
}

/// Greedy cover: repeatedly pick the candidate A∖{x} containing the most
/// yet-uncovered prefixes, breaking ties toward the smallest removed item.
pub fn greedy_min_cover(inst: &CoverInstance) -> Result<Vec<ItemSet>> {
    inst.check()?;
    let mut uncovered: Vec<ItemSet> = inst.universe.clone();
    uncovered.sort();
    uncovered.dedup();
    let mut used = vec![false; 64];
    let mut cover = Vec::new();
    while !uncovered.is_empty() {
        let mut best: Option<(usize, usize)> = None; // (count, removed item)
        for x in inst.target.iter() {
            if used[x] {
                continue;
            }
            let cand = inst.target.remove(x);
            let count = uncovered.iter().filter(|p| p.is_subset_of(cand)).count();
            // strict > keeps the earliest (smallest) x on ties
            if best.map_or(count > 0, |(c, _)| count > c) {
                best = Some((count, x));
            }
        }
        let (_, x) = best.expect("proper subsets are always coverable");
        used[x] = true;
        let cand = inst.target.remove(x);
        uncovered.retain(|p| !p.is_subset_of(cand));
        cover.push(cand);
    }
    Ok(cover)
}

/// True iff every chosen set is some A∖{x} and every prefix is contained in
/// a chosen set.
pub fn verify_cover(inst: &CoverInstance, cover: &[ItemSet]) -> bool {
    let valid_candidate = |c: &ItemSet| {
        c.is_subset_of(inst.target) && c.len() + 1 == inst.target.len()
    };
    cover.iter().all(valid_candidate)
        && inst
            .universe
            .iter()
            .all(|p| cover.iter().any(|c| p.is_subset_of(*c)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn set(ids: &[usize]) -> ItemSet {
        ItemSet::from_one_based(ids).unwrap()
    }

    /// Exhaustive minimum over all subsets of S⁻(A); fine for |A| ≤ 10.
    fn optimum_size(inst: &CoverInstance) -> usize {
        let candidates: Vec<ItemSet> =
            inst.target.iter().map(|x| inst.target.remove(x)).collect();
        let mut best = usize::MAX;
        for choice in 0u32..(1 << candidates.len()) {
            let chosen: Vec<ItemSet> = candidates
                .iter()
                .enumerate()
                .filter(|(i, _)| choice >> i & 1 == 1)
                .map(|(_, &c)| c)
                .collect();
            if chosen.len() < best && verify_cover(inst, &chosen) {
                best = chosen.len();
            }
        }
        best
    }

    #[test]
    fn interference_instance_has_size_two_cover() {
        let target = set(&[1, 2, 3, 4, 5, 6]);
        let universe = vec![
            ItemSet::EMPTY,
            set(&[1]),
            set(&[2]),
            set(&[3]),
            set(&[1, 2, 3, 4]),
            set(&[1, 2, 3, 5]),
            set(&[1, 2, 3, 6]),
        ];
        let inst = CoverInstance::new(target, universe);
        let cover = greedy_min_cover(&inst).unwrap();
        assert_eq!(cover.len(), 2);
        assert!(verify_cover(&inst, &cover));
        // smallest-item tie-break: drop 4 first, then 5
        assert_eq!(cover, vec![set(&[1, 2, 3, 5, 6]), set(&[1, 2, 3, 4, 6])]);
        assert_eq!(optimum_size(&inst), 2);
    }

    #[test]
    fn empty_and_singleton_universes() {
        let target = set(&[1, 2, 3]);
        let inst = CoverInstance::new(target, vec![]);
        assert!(greedy_min_cover(&inst).unwrap().is_empty());

        let inst = CoverInstance::new(target, vec![set(&[1, 2])]);
        let cover = greedy_min_cover(&inst).unwrap();
        assert_eq!(cover, vec![set(&[1, 2])]);
    }

    #[test]
    fn uncoverable_prefix_rejected() {
        let target = set(&[1, 2, 3]);
        let inst = CoverInstance::new(target, vec![set(&[1, 4])]);
        assert!(matches!(
            greedy_min_cover(&inst),
            Err(Error::UncoverablePrefix(_))
        ));
        // the target itself is not a *proper* subset
        let inst = CoverInstance::new(target, vec![target]);
        assert!(greedy_min_cover(&inst).is_err());
    }

    #[test]
    fn verify_rejects_bad_covers() {
        let target = set(&[1, 2, 3]);
        let inst = CoverInstance::new(target, vec![set(&[1])]);
        assert!(!verify_cover(&inst, &[]));
        // not a one-item deletion of the target
        assert!(!verify_cover(&inst, &[set(&[1])]));
        assert!(!verify_cover(&inst, &[set(&[1, 4])]));
        assert!(verify_cover(&inst, &[set(&[1, 2])]));
    }

    #[test]
    fn greedy_matches_approximation_bound() {
        let mut rng = ChaCha8Rng::seed_from_u64(99);
        for _ in 0..500 {
            let size = rng.gen_range(2..=10usize);
            let items: Vec<usize> = (0..16).filter(|_| rng.gen_bool(0.7)).take(size).collect();
            if items.len() < 2 {
                continue;
            }
            let target = ItemSet::from_items(items.iter().copied());
            let mut universe = Vec::new();
            for _ in 0..rng.gen_range(0..12usize) {
                let sub = ItemSet(rng.gen::<u64>() & target.0);
                if sub.is_proper_subset_of(target) {
                    universe.push(sub);
                }
            }
            let inst = CoverInstance::new(target, universe);
            let cover = greedy_min_cover(&inst).unwrap();
            assert!(verify_cover(&inst, &cover));
            let opt = optimum_size(&inst);
            let bound = (1.0 + (inst.universe.len().max(1) as f64).ln()) * opt as f64;
            assert!(
                cover.len() as f64 <= bound + 1e-9,
                "greedy {} opt {opt} universe {}",
                cover.len(),
                inst.universe.len()
            );
        }
    }
}
