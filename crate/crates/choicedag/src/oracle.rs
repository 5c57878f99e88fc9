//! Query oracles: the interface between estimators and a population of
//! consumers, plus the ledger that accounts for every query made.
//!
//! Two implementations exist. [`ExactOracle`] answers with the true choice
//! probability (one "call" per answer) and backs the exact reconstruction
//! path. [`SampledOracle`] offers the assortment to `m` independently drawn
//! consumers and reports the observed frequency, which is what a field
//! deployment would see.

use crate::items::ItemSet;
use crate::model::ChoiceModel;
use crate::Result;
use rand::Rng;
use serde::{Deserialize, Serialize};
use std::collections::BTreeSet;

/// Source of (approximate) choice frequencies q̂_z(S).
pub trait FrequencyOracle {
    fn n(&self) -> usize;

    /// Estimate the probability of choosing `z` from `s`, spending up to `m`
    /// consumers. Exact oracles ignore `m`.
    fn estimate(&mut self, s: ItemSet, z: usize, m: u64) -> Result<f64>;

    /// Estimate several frequencies that will be combined into one quantity,
    /// `m` consumers each. Sampling oracles answer all queries with common
    /// random numbers (the same consumer panel), so that the sampling error
    /// of a signed combination of the answers depends only on the mass whose
    /// choice actually differs between the assortments, not on the magnitude
    /// of the individual frequencies.
    fn estimate_many(&mut self, queries: &[(ItemSet, usize)], m: u64) -> Result<Vec<f64>> {
        queries.iter().map(|&(s, z)| self.estimate(s, z, m)).collect()
    }

    /// Total consumers drawn so far (0 for exact oracles).
    fn consumers_used(&self) -> u64;

    /// Number of answers given so far.
    fn calls(&self) -> u64;
}

/// Oracle that answers with exact choice probabilities from a known model.
pub struct ExactOracle<'a> {
    model: &'a ChoiceModel,
    calls: u64,
}

impl<'a> ExactOracle<'a> {
    pub fn new(model: &'a ChoiceModel) -> Self {
        ExactOracle { model, calls: 0 }
    }

    pub fn q(&mut self, s: ItemSet, z: usize) -> Result<f64> {
        self.calls += 1;
        self.model.choice_probability(s, z)
    }
}

impl FrequencyOracle for ExactOracle<'_> {
    fn n(&self) -> usize {
        self.model.n()
    }

    fn estimate(&mut self, s: ItemSet, z: usize, _m: u64) -> Result<f64> {
        self.q(s, z)
    }

    fn consumers_used(&self) -> u64 {
        0
    }

    fn calls(&self) -> u64 {
        self.calls
    }
}

/// Oracle that simulates consumers: each answer offers the assortment to `m`
/// freshly drawn types and returns the empirical choice frequency. Batched
/// queries ([`FrequencyOracle::estimate_many`]) share one panel of `m` types
/// across the assortments — common random numbers — which leaves every
/// individual answer unbiased while making signed combinations of the
/// answers far less noisy.
pub struct SampledOracle<'a, R: Rng> {
    model: &'a ChoiceModel,
    rng: R,
    consumers: u64,
    calls: u64,
    assortments: BTreeSet<u64>,
}

impl<'a, R: Rng> SampledOracle<'a, R> {
    pub fn new(model: &'a ChoiceModel, rng: R) -> Self {
        SampledOracle {
            model,
            rng,
            consumers: 0,
            calls: 0,
            assortments: BTreeSet::new(),
        }
    }

    /// Distinct assortments offered so far.
    pub fn distinct_assortments(&self) -> usize {
        self.assortments.len()
    }
}

impl<R: Rng> FrequencyOracle for SampledOracle<'_, R> {
    fn n(&self) -> usize {
        self.model.n()
    }

    fn estimate(&mut self, s: ItemSet, z: usize, m: u64) -> Result<f64> {
        if !s.contains(z) {
            return Err(crate::Error::ItemNotOffered { item: z + 1 });
        }
        let mut hits = 0u64;
        for _ in 0..m {
            if self.model.sample_choice(s, &mut self.rng)? == z {
                hits += 1;
            }
        }
        self.consumers += m;
        self.calls += 1;
        self.assortments.insert(s.0);
        Ok(hits as f64 / m as f64)
    }

    fn estimate_many(&mut self, queries: &[(ItemSet, usize)], m: u64) -> Result<Vec<f64>> {
        for &(s, z) in queries {
            if !s.contains(z) {
                return Err(crate::Error::ItemNotOffered { item: z + 1 });
            }
        }
        let mut hits = vec![0u64; queries.len()];
        for _ in 0..m {
            let t = self.model.sample_type(&mut self.rng);
            let ranking = &self.model.types()[t].0;
            for (h, &(s, z)) in hits.iter_mut().zip(queries) {
                if ranking.choose(s)? == z {
                    *h += 1;
                }
            }
        }
        self.consumers += m * queries.len() as u64;
        self.calls += queries.len() as u64;
        for &(s, _) in queries {
            self.assortments.insert(s.0);
        }
        Ok(hits.into_iter().map(|h| h as f64 / m as f64).collect())
    }

    fn consumers_used(&self) -> u64 {
        self.consumers
    }

    fn calls(&self) -> u64 {
        self.calls
    }
}

/// One edge-estimation record: which edge, how large its query plan was, and
/// what came out.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct LedgerRow {
    pub level: usize,
    pub prefix: ItemSet,
    pub item: usize,
    pub cover_size: usize,
    /// Consumers per assortment.
    pub m: u64,
    /// Distinct assortments sampled for this edge (base query included).
    pub terms_queried: u64,
    pub e_hat: f64,
    /// True when `m` was clamped by `m_cap`, voiding the theoretical bound.
    pub capped: bool,
}

/// Exact accounting of the queries an estimation run made.
#[derive(Clone, Debug, Default, Serialize, Deserialize)]
pub struct QueryLedger {
    pub rows: Vec<LedgerRow>,
}

impl QueryLedger {
    /// Total consumers across all rows: Σ m · terms_queried.
    pub fn total_consumers(&self) -> u64 {
        self.rows.iter().map(|r| r.m * r.terms_queried).sum()
    }

    pub fn any_capped(&self) -> bool {
        self.rows.iter().any(|r| r.capped)
    }

    pub fn to_csv(&self) -> String {
        let mut out =
            String::from("level,prefix,item,cover_size,m,terms_queried,e_hat,capped\n");
        for r in &self.rows {
            out.push_str(&format!(
                "{},{},{},{},{},{},{},{}\n",
                r.level,
                r.prefix,
                r.item + 1,
                r.cover_size,
                r.m,
                r.terms_queried,
                r.e_hat,
                r.capped
            ));
        }
        out
    }
}
