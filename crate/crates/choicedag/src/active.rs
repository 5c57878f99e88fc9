//! Active-learning estimation: the inclusion-exclusion edge estimator and
//! the level-by-level DAG builder that drives it.
//!
//! The naive ancestor recursion expands into choice frequencies with
//! exponentially large coefficients, which amplify sampling error. The
//! estimator here instead covers the interfering ancestors with one-item
//! deletions of the prefix and applies inclusion-exclusion over the cover,
//! so every queried frequency enters with coefficient ±1.

use crate::dag::Dag;
use crate::items::ItemSet;
use crate::oracle::{ExactOracle, FrequencyOracle, LedgerRow, QueryLedger};
use crate::setcover::{greedy_min_cover, CoverInstance};
use crate::{Error, Result};
use std::collections::BTreeMap;

/// Parameters of a DAG estimation run.
#[derive(Clone, Debug)]
pub struct EstimationConfig {
    /// Fraction of levels to learn: n0 = ⌈α·n⌉.
    pub alpha: f64,
    pub epsilon: f64,
    pub delta: f64,
    pub kappa: f64,
    /// Bound on the number of frequent types; defaults to ⌈1/κ⌉.
    pub k_bound: Option<usize>,
    /// Per-assortment sample ceiling; 0 disables the cap.
    pub m_cap: u64,
}

impl EstimationConfig {
    pub fn validate(&self) -> Result<()> {
        if !(0.0 < self.alpha && self.alpha <= 1.0) {
            return Err(Error::InvalidParameter(format!(
                "alpha={} outside (0,1]",
                self.alpha
            )));
        }
        if !(self.epsilon > 0.0) {
            return Err(Error::InvalidParameter("epsilon must be > 0".into()));
        }
        if !(0.0 < self.delta && self.delta < 1.0) {
            return Err(Error::InvalidParameter(format!(
                "delta={} outside (0,1)",
                self.delta
            )));
        }
        if !(0.0 < self.kappa && self.kappa < 1.0) {
            return Err(Error::InvalidParameter(format!(
                "kappa={} outside (0,1)",
                self.kappa
            )));
        }
        Ok(())
    }

    /// Levels to learn for an n-item universe.
    pub fn n0(&self, n: usize) -> usize {
        ((self.alpha * n as f64).ceil() as usize).clamp(1, n)
    }

    pub fn k(&self) -> usize {
        self.k_bound
            .unwrap_or_else(|| (1.0 / self.kappa).ceil() as usize)
    }

    /// Per-edge accuracy ε′ = min(ε/n0, κ/4).
    pub fn eps_prime(&self, n: usize) -> f64 {
        (self.epsilon / self.n0(n) as f64).min(self.kappa / 4.0)
    }

    /// Per-edge confidence δ′ = δ/(α·n²·K).
    pub fn delta_prime(&self, n: usize) -> f64 {
        self.delta / (self.alpha * (n * n) as f64 * self.k() as f64)
    }
}

/// Consumers per assortment for a cover of size `c`:
/// m = ⌈2^(2c−1) · (ln(1/δ) + (c+1)·ln 2) / ε²⌉.
pub fn sample_size(cover_size: usize, eps: f64, delta: f64) -> u64 {
    let c = cover_size as f64;
    let m = (2.0f64).powf(2.0 * c - 1.0) * ((1.0 / delta).ln() + (c + 1.0) * 2.0f64.ln())
        / (eps * eps);
    m.ceil() as u64
}

/// Offer `s` to `m` consumers and return the fraction choosing `z`.
pub fn estimate_frequency<O: FrequencyOracle>(
    oracle: &mut O,
    s: ItemSet,
    z: usize,
    m: u64,
) -> Result<f64> {
    if m == 0 {
        return Err(Error::InvalidParameter("m must be >= 1".into()));
    }
    oracle.estimate(s, z, m)
}

/// The signed assortment list of the inclusion-exclusion estimator for
/// prefix `a` under `cover`: the base query N∖A with +1, then one term per
/// non-empty sub-collection ℬ ⊆ cover, querying N∖⋂ℬ with sign −(−1)^(|ℬ|+1).
/// Every coefficient is ±1 by construction.
pub fn incl_excl_terms(n: usize, a: ItemSet, cover: &[ItemSet]) -> Vec<(ItemSet, i32)> {
    let universe = ItemSet::universe(n);
    let mut terms = vec![(universe.difference(a), 1)];
    for choice in 1u32..(1 << cover.len()) {
        let mut inter = universe;
        let mut size = 0;
        for (i, &b) in cover.iter().enumerate() {
            if choice >> i & 1 == 1 {
                inter = inter.intersection(b);
                size += 1;
            }
        }
        let sign = if size % 2 == 1 { -1 } else { 1 };
        terms.push((universe.difference(inter), sign));
    }
    terms
}

/// Result of one edge estimation, with the query-plan facts the ledger
/// records.
#[derive(Clone, Copy, Debug)]
pub struct EdgeEstimate {
    pub e_hat: f64,
    pub cover_size: usize,
    /// Consumers per assortment actually used.
    pub m: u64,
    /// Distinct assortments sampled (base query included).
    pub terms_queried: u64,
    /// The sample-size formula wanted more than `m_cap` allowed.
    pub capped: bool,
}

/// Estimate e_{A⊕z} by inclusion-exclusion over a greedy cover of the
/// interfering ancestors recorded in `g_hat` (every A′ ⊊ A whose extension
/// A′∪{z} is a known node). Duplicate intersection assortments are queried
/// once, with their signs accumulated, and all terms go to the oracle as a
/// single batch so sampling oracles can answer them with common random
/// numbers.
pub fn alg_ie<O: FrequencyOracle>(
    g_hat: &Dag,
    a: ItemSet,
    z: usize,
    eps: f64,
    delta: f64,
    m_cap: u64,
    oracle: &mut O,
) -> Result<EdgeEstimate> {
    if a.contains(z) {
        return Err(Error::InvalidParameter(format!(
            "item {} already in prefix {a}",
            z + 1
        )));
    }
    let interfering: Vec<ItemSet> = g_hat
        .nodes()
        .keys()
        .map(|&m| ItemSet(m))
        .filter(|&p| p.is_proper_subset_of(a) && g_hat.nodes().contains_key(&p.insert(z).0))
        .collect();
    let mut cover = greedy_min_cover(&CoverInstance::new(a, interfering))?;
    // The greedy cover only accounts for interference the estimate so far
    // knows about. Rankings too rare to be stored still rank z first behind
    // some prefix A′ ⊊ A, and with a cover of deletions {A∖{x} : x ∈ X} the
    // only such prefixes whose bias survives are those containing all of X.
    // Widening X to min(|A|, 3) items keeps the formula exact — a superset
    // cover still satisfies the inclusion-exclusion identity — while
    // reducing the surviving bias to rare mass concentrated behind three
    // common items, at a cost of at most eight queried terms.
    let mut deleted: Vec<usize> = cover
        .iter()
        .flat_map(|&c| a.difference(c).iter())
        .collect();
    for x in a.iter() {
        if deleted.len() >= a.len().min(3) {
            break;
        }
        if !deleted.contains(&x) {
            cover.push(a.remove(x));
            deleted.push(x);
        }
    }

    let wanted = sample_size(cover.len(), eps, delta);
    let capped = m_cap > 0 && wanted > m_cap;
    let m = if capped { m_cap } else { wanted };

    // accumulate signs per distinct assortment; base term first
    let mut signed: BTreeMap<u64, i64> = BTreeMap::new();
    for (s, sign) in incl_excl_terms(oracle.n(), a, &cover) {
        *signed.entry(s.0).or_insert(0) += sign as i64;
    }
    let queries: Vec<(ItemSet, usize)> = signed
        .iter()
        .filter(|&(_, &c)| c != 0)
        .map(|(&mask, _)| (ItemSet(mask), z))
        .collect();
    let coeffs: Vec<i64> = signed.values().copied().filter(|&c| c != 0).collect();
    let estimates = oracle.estimate_many(&queries, m)?;
    let e_hat: f64 = coeffs
        .iter()
        .zip(&estimates)
        .map(|(&c, &q)| c as f64 * q)
        .sum();
    let terms_queried = queries.len() as u64;
    Ok(EdgeEstimate {
        e_hat,
        cover_size: cover.len(),
        m,
        terms_queried,
        capped,
    })
}

/// Exact-probability version of the inclusion-exclusion formula, used as a
/// reference path in tests. The cover must consist of one-item deletions of
/// `a`.
pub fn edge_prob_incl_excl_exact(
    oracle: &mut ExactOracle,
    a: ItemSet,
    z: usize,
    cover: &[ItemSet],
) -> Result<f64> {
    for c in cover {
        if !(c.is_subset_of(a) && c.len() + 1 == a.len()) {
            return Err(Error::InvalidCover(format!(
                "{c} is not a one-item deletion of {a}"
            )));
        }
    }
    let mut e = 0.0;
    for (s, sign) in incl_excl_terms(oracle.n(), a, cover) {
        e += sign as f64 * oracle.q(s, z)?;
    }
    Ok(e)
}

/// Learn the frequent-type DAG down to level n0, estimating every candidate
/// edge with [`alg_ie`] at (ε′, δ′) and keeping those with ê ≥ κ/2.
pub fn alg_dag<O: FrequencyOracle>(
    oracle: &mut O,
    cfg: &EstimationConfig,
) -> Result<(Dag, QueryLedger)> {
    cfg.validate()?;
    let n = oracle.n();
    let n0 = cfg.n0(n);
    let eps = cfg.eps_prime(n);
    let delta = cfg.delta_prime(n);

    let mut d = Dag::new(n);
    d.insert_node(ItemSet::EMPTY, 1.0);
    let mut ledger = QueryLedger::default();
    let universe = ItemSet::universe(n);
    for j in 0..n0 {
        for (a, _) in d.level_nodes(j) {
            for z in universe.difference(a).iter() {
                let est = alg_ie(&d, a, z, eps, delta, cfg.m_cap, oracle)?;
                ledger.rows.push(LedgerRow {
                    level: j,
                    prefix: a,
                    item: z,
                    cover_size: est.cover_size,
                    m: est.m,
                    terms_queried: est.terms_queried,
                    e_hat: est.e_hat,
                    capped: est.capped,
                });
                if est.e_hat >= cfg.kappa / 2.0 {
                    d.insert_edge(a, z, est.e_hat);
                    let node = a.insert(z);
                    let p = d.node_prob(node).unwrap_or(0.0) + est.e_hat;
                    d.insert_node(node, p);
                }
            }
        }
    }
    Ok((d, ledger))
}
