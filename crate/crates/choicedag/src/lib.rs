//! Ranking-based (non-parametric) choice models, their prefix-DAG
//! representation, and an active-learning estimator for the DAG.
//!
//! A choice model is a distribution over full rankings of `n` items; a
//! consumer offered an assortment picks the item her ranking places first.
//! The DAG stores, per level `j`, every positive-probability top-`j` item
//! set (prefix) with its mass, and edges carrying the mass of types that
//! rank a prefix (in any order) immediately followed by one more item.
//!
//! Modules:
//! - [`model`]: rankings, choice probabilities by enumeration, seeded
//!   synthetic generators.
//! - [`dag`]: the DAG itself, ground-truth construction, evaluation of
//!   choice probabilities from a DAG, reconstruction from an exact
//!   probability oracle, truncation and comparison metrics.
//! - [`setcover`]: greedy approximate minimum cover over prefix
//!   collections.
//! - [`oracle`]: exact and sampling query oracles with a query ledger.
//! - [`active`]: the inclusion-exclusion edge estimator and the
//!   level-by-level active-learning DAG builder.
//! - [`indist`]: indistinguishable ranking pairs and the
//!   observationally-equivalent alternate model construction.
//! - [`experiments`]: seeded experiment harness and report emission.

pub mod active;
pub mod dag;
pub mod experiments;
pub mod indist;
pub mod items;
pub mod model;
pub mod oracle;
pub mod setcover;

mod error;

pub use error::Error;
pub use items::ItemSet;

pub type Result<T> = std::result::Result<T, Error>;

/// Map `0..count` through `f`, in parallel when the `parallel` feature is
/// enabled and `parallel` is requested. Output order is by index either way,
/// so results are independent of scheduling.
pub fn map_indexed<T, F>(count: usize, parallel: bool, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(usize) -> T + Sync + Send,
{
    #[cfg(feature = "parallel")]
    if parallel {
        use rayon::prelude::*;
        return (0..count).into_par_iter().map(f).collect();
    }
    let _ = parallel;
    (0..count).map(f).collect()
}
