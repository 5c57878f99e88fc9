//! Indistinguishable ranking pairs and the observationally-equivalent
//! alternate model built from them.
//!
//! Two rankings that share a top-`i` item set but differ in order both
//! above and below position `i` can have their "tails" swapped without
//! changing any choice probability. Detecting such pairs shows which parts
//! of a model no amount of querying can pin down.

use crate::items::ItemSet;
use crate::model::{ChoiceModel, Ranking};
use crate::{Error, Result};
use serde::{Deserialize, Serialize};

/// A pair of type indices that are indistinguishable when merged at level
/// `i`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct IndistWitness {
    pub pi1: usize,
    pub pi2: usize,
    pub i: usize,
}

/// True iff the two rankings (1) share the top-`i` item set, (2) order
/// those top items differently, and (3) order the remaining items
/// differently.
pub fn is_indistinguishable(r1: &Ranking, r2: &Ranking, i: usize) -> Result<bool> {
    let n = r1.n();
    if r2.n() != n {
        return Err(Error::InvalidParameter("rankings over different universes".into()));
    }
    if i < 2 || i + 2 > n {
        return Err(Error::InvalidParameter(format!(
            "merge position {i} outside 2..={}",
            n - 2
        )));
    }
    Ok(r1.top_set(i) == r2.top_set(i)
        && r1.order()[..i] != r2.order()[..i]
        && r1.order()[i..] != r2.order()[i..])
}

/// All (unordered pair, i) witnesses among the model's types; with
/// `frequent_only`, rare types are skipped.
pub fn find_witnesses(m: &ChoiceModel, frequent_only: bool) -> Vec<IndistWitness> {
    let n = m.n();
    if n < 4 {
        return Vec::new();
    }
    let candidates: Vec<usize> = m
        .types()
        .iter()
        .enumerate()
        .filter(|(_, (_, p))| !frequent_only || *p >= m.kappa())
        .map(|(t, _)| t)
        .collect();
    // prefix-set fingerprints per level make each pair check O(n)
    let prefixes: Vec<Vec<ItemSet>> = candidates
        .iter()
        .map(|&t| {
            let r = &m.types()[t].0;
            (2..=n - 2).map(|i| r.top_set(i)).collect()
        })
        .collect();
    let mut out = Vec::new();
    for a in 0..candidates.len() {
        for b in a + 1..candidates.len() {
            for i in 2..=n - 2 {
                if prefixes[a][i - 2] != prefixes[b][i - 2] {
                    continue;
                }
                let r1 = &m.types()[candidates[a]].0;
                let r2 = &m.types()[candidates[b]].0;
                if r1.order()[..i] != r2.order()[..i] && r1.order()[i..] != r2.order()[i..] {
                    out.push(IndistWitness {
                        pi1: candidates[a],
                        pi2: candidates[b],
                        i,
                    });
                }
            }
        }
    }
    out
}

/// Build the alternate model that swaps the tails of the witness pair: with
/// p(π) ≤ p(π′) (swapping the pair if needed), the cross-breeds
/// π̄ = (π's top i, π′'s tail) and π̄′ = (π′'s top i, π's tail) each receive
/// mass p(π), π′ keeps p(π′) − p(π), and π drops to zero. Every choice
/// probability of the result equals the original's.
pub fn confusable_model(m: &ChoiceModel, w: &IndistWitness) -> Result<ChoiceModel> {
    let n = m.n();
    let (t1, t2) = (w.pi1, w.pi2);
    if t1 >= m.types().len() || t2 >= m.types().len() || t1 == t2 {
        return Err(Error::InvalidParameter(format!(
            "witness indices ({t1}, {t2}) invalid"
        )));
    }
    let (r1, p1) = &m.types()[t1];
    let (r2, p2) = &m.types()[t2];
    if !is_indistinguishable(r1, r2, w.i)? {
        return Err(Error::InvalidParameter(format!(
            "types {t1} and {t2} are not indistinguishable at i={}",
            w.i
        )));
    }
    // WLOG p(π) ≤ p(π′)
    let (pi, pi_prime, p_lo) = if p1 <= p2 {
        (r1, r2, *p1)
    } else {
        (r2, r1, *p2)
    };
    let crossbreed = |top: &Ranking, tail: &Ranking| {
        let mut order: Vec<usize> = top.order()[..w.i].to_vec();
        order.extend_from_slice(&tail.order()[w.i..]);
        Ranking::new(order)
    };
    let bar = crossbreed(pi, pi_prime)?;
    let bar_prime = crossbreed(pi_prime, pi)?;

    // merge masses on rankings: the cross-breeds may coincide with existing
    // types of the model
    let mut table: Vec<(Ranking, f64)> = m.types().to_vec();
    let bump = |table: &mut Vec<(Ranking, f64)>, r: &Ranking, delta: f64| {
        if let Some(entry) = table.iter_mut().find(|(t, _)| t == r) {
            entry.1 += delta;
        } else {
            table.push((r.clone(), delta));
        }
    };
    bump(&mut table, pi, -p_lo); // π → 0
    bump(&mut table, pi_prime, -p_lo); // π′ → p(π′) − p(π)
    bump(&mut table, &bar, p_lo);
    bump(&mut table, &bar_prime, p_lo);
    table.retain(|(_, p)| *p > 0.0);

    // tail swaps can push a frequent type's residual mass below κ; widen ρ
    // to whatever rare mass the new table carries
    let rare_mass: f64 = table
        .iter()
        .filter(|(_, p)| *p < m.kappa())
        .map(|(_, p)| p)
        .sum();
    let rho = m.rho().max(rare_mass.min(0.999_999));
    ChoiceModel::new(n, table, m.kappa(), rho)
}
