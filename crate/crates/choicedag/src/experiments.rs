//! Experiment harness: seeded synthetic sweeps over noise levels,
//! truncation levels, and accuracy targets, plus ingestion of the sushi
//! preference survey and deterministic report emission.

use crate::active::{alg_dag, EstimationConfig};
use crate::dag::{choice_prob_from_dag, dag_diff, dag_from_model, market_share};
use crate::items::ItemSet;
use crate::model::{generate_model, ChoiceModel, GenParams, Ranking};
use crate::oracle::SampledOracle;
use crate::{map_indexed, Error, Result};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use std::path::Path;

/// Which measurement a sweep produces.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Scenario {
    /// L1 error of estimated choice probabilities on random assortments.
    ChoiceProb,
    /// Structural recovery of the frequent-type DAG.
    Recovery,
}

/// Full description of a sweep. Each (ρ, ε, n0) cell runs `instances`
/// generated models.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ExperimentSpec {
    pub scenario: Scenario,
    pub n: usize,
    pub num_frequent: usize,
    pub num_rare: usize,
    pub kappa: f64,
    pub delta: f64,
    pub cv: f64,
    pub rhos: Vec<f64>,
    pub epsilons: Vec<f64>,
    /// Truncation levels n0 to sweep.
    pub levels: Vec<usize>,
    pub instances: usize,
    /// Random assortments per instance (choice-prob scenario).
    pub num_random_sets: usize,
    /// Assortment size k.
    pub set_size: usize,
    pub m_cap: u64,
    pub seed: u64,
    #[serde(default = "default_true")]
    pub parallel: bool,
}

fn default_true() -> bool {
    true
}

impl ExperimentSpec {
    pub fn validate(&self) -> Result<()> {
        if self.rhos.is_empty() || self.epsilons.is_empty() || self.levels.is_empty() {
            return Err(Error::InvalidParameter(
                "rhos, epsilons, and levels must be non-empty".into(),
            ));
        }
        if self.set_size > self.n || self.set_size == 0 {
            return Err(Error::InvalidParameter(format!(
                "set_size={} outside 1..={}",
                self.set_size, self.n
            )));
        }
        if self.instances == 0 {
            return Err(Error::InvalidParameter("instances must be >= 1".into()));
        }
        for &n0 in &self.levels {
            if n0 == 0 || n0 > self.n {
                return Err(Error::InvalidParameter(format!(
                    "n0={n0} outside 1..={}",
                    self.n
                )));
            }
        }
        Ok(())
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ChoiceProbRow {
    pub instance: usize,
    pub rho: f64,
    pub eps: f64,
    pub n0: usize,
    pub set: ItemSet,
    pub market_share: f64,
    pub l1_error: f64,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct RecoveryRow {
    pub instance: usize,
    pub rho: f64,
    pub n0: usize,
    pub max_discrepancy: f64,
    pub pct_diff_vertices: f64,
    pub queries_total: u64,
}

/// Distribution summary of per-row L1 errors within one (ρ, ε, n0) cell.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct L1Stats {
    pub rho: f64,
    pub eps: f64,
    pub n0: usize,
    pub mean: f64,
    pub std: f64,
    pub p25: f64,
    pub p50: f64,
    pub p75: f64,
}

/// Mean ± standard error of the recovery metrics within one (ρ, n0) cell.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct RecoveryStats {
    pub rho: f64,
    pub n0: usize,
    pub mean_max_discrepancy: f64,
    pub stderr_max_discrepancy: f64,
    pub mean_pct_diff: f64,
    pub stderr_pct_diff: f64,
}

#[derive(Clone, Debug, Default, Serialize, Deserialize)]
pub struct ExperimentReport {
    pub choice_rows: Vec<ChoiceProbRow>,
    pub recovery_rows: Vec<RecoveryRow>,
    pub l1_stats: Vec<L1Stats>,
    pub recovery_stats: Vec<RecoveryStats>,
}

fn mean(xs: &[f64]) -> f64 {
    xs.iter().sum::<f64>() / xs.len() as f64
}

fn std_dev(xs: &[f64], mu: f64) -> f64 {
    if xs.len() < 2 {
        return 0.0;
    }
    (xs.iter().map(|x| (x - mu) * (x - mu)).sum::<f64>() / (xs.len() - 1) as f64).sqrt()
}

/// Nearest-rank percentile of a sorted slice.
fn percentile(sorted: &[f64], p: f64) -> f64 {
    let rank = ((p / 100.0 * sorted.len() as f64).ceil() as usize).max(1);
    sorted[rank - 1]
}

/// Pearson correlation coefficient.
pub fn pearson(xs: &[f64], ys: &[f64]) -> f64 {
    let mx = mean(xs);
    let my = mean(ys);
    let mut cov = 0.0;
    let mut vx = 0.0;
    let mut vy = 0.0;
    for (x, y) in xs.iter().zip(ys) {
        cov += (x - mx) * (y - my);
        vx += (x - mx) * (x - mx);
        vy += (y - my) * (y - my);
    }
    cov / (vx.sqrt() * vy.sqrt())
}

/// Recompute the L1 aggregates from rows; also the source of truth used by
/// the runners.
pub fn l1_stats_from_rows(rows: &[ChoiceProbRow]) -> Vec<L1Stats> {
    let mut cells: BTreeMap<(u64, u64, usize), Vec<f64>> = BTreeMap::new();
    for r in rows {
        cells
            .entry((r.rho.to_bits(), r.eps.to_bits(), r.n0))
            .or_default()
            .push(r.l1_error);
    }
    cells
        .into_iter()
        .map(|((rho, eps, n0), mut xs)| {
            xs.sort_by(f64::total_cmp);
            let mu = mean(&xs);
            L1Stats {
                rho: f64::from_bits(rho),
                eps: f64::from_bits(eps),
                n0,
                mean: mu,
                std: std_dev(&xs, mu),
                p25: percentile(&xs, 25.0),
                p50: percentile(&xs, 50.0),
                p75: percentile(&xs, 75.0),
            }
        })
        .collect()
}

/// Recompute the recovery aggregates from rows.
pub fn recovery_stats_from_rows(rows: &[RecoveryRow]) -> Vec<RecoveryStats> {
    let mut cells: BTreeMap<(u64, usize), (Vec<f64>, Vec<f64>)> = BTreeMap::new();
    for r in rows {
        let cell = cells.entry((r.rho.to_bits(), r.n0)).or_default();
        cell.0.push(r.max_discrepancy);
        cell.1.push(r.pct_diff_vertices);
    }
    cells
        .into_iter()
        .map(|((rho, n0), (disc, pct))| {
            let md = mean(&disc);
            let mp = mean(&pct);
            let k = disc.len() as f64;
            RecoveryStats {
                rho: f64::from_bits(rho),
                n0,
                mean_max_discrepancy: md,
                stderr_max_discrepancy: std_dev(&disc, md) / k.sqrt(),
                mean_pct_diff: mp,
                stderr_pct_diff: std_dev(&pct, mp) / k.sqrt(),
            }
        })
        .collect()
}

/// Deterministic per-(instance, ρ-cell) random stream derived from the
/// master seed.
fn instance_rng(seed: u64, instance: usize, rho_idx: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream((instance as u64) << 8 | rho_idx as u64);
    rng
}

fn generate_instance(
    spec: &ExperimentSpec,
    rho: f64,
    rng: &mut ChaCha8Rng,
) -> Result<ChoiceModel> {
    generate_model(&GenParams {
        n: spec.n,
        num_frequent: spec.num_frequent,
        num_rare: spec.num_rare,
        rho,
        cv: spec.cv,
        kappa: spec.kappa,
        seed: rng.gen(),
        allow_merge: false,
    })
}

fn random_set(n: usize, k: usize, rng: &mut ChaCha8Rng) -> ItemSet {
    use rand::seq::SliceRandom;
    let mut items: Vec<usize> = (0..n).collect();
    items.shuffle(rng);
    ItemSet::from_items(items.into_iter().take(k))
}

/// Per instance: generate a model, learn the DAG at each (ε, n0), and score
/// the estimated choice probabilities of random assortments against exact
/// enumeration.
pub fn run_choice_prob_experiment(spec: &ExperimentSpec) -> Result<ExperimentReport> {
    spec.validate()?;
    let per_instance: Vec<Result<Vec<ChoiceProbRow>>> =
        map_indexed(spec.instances, spec.parallel, |instance| {
            let mut rows = Vec::new();
            for (rho_idx, &rho) in spec.rhos.iter().enumerate() {
                let mut rng = instance_rng(spec.seed, instance, rho_idx);
                let model = generate_instance(spec, rho, &mut rng)?;
                for &eps in &spec.epsilons {
                    for &n0 in &spec.levels {
                        let cfg = EstimationConfig {
                            alpha: n0 as f64 / spec.n as f64,
                            epsilon: eps,
                            delta: spec.delta,
                            kappa: spec.kappa,
                            k_bound: None,
                            m_cap: spec.m_cap,
                        };
                        let mut oracle =
                            SampledOracle::new(&model, ChaCha8Rng::from_rng(&mut rng).unwrap());
                        let (dag, _) = alg_dag(&mut oracle, &cfg)?;
                        for _ in 0..spec.num_random_sets {
                            let s = random_set(spec.n, spec.set_size, &mut rng);
                            let mut l1 = 0.0;
                            for z in s.iter() {
                                let q_hat = choice_prob_from_dag(&dag, s, z)?;
                                let q = model.choice_probability(s, z)?;
                                l1 += (q_hat - q).abs();
                            }
                            rows.push(ChoiceProbRow {
                                instance,
                                rho,
                                eps,
                                n0,
                                set: s,
                                market_share: market_share(&model, s, n0)?,
                                l1_error: l1,
                            });
                        }
                    }
                }
            }
            Ok(rows)
        });
    let mut choice_rows = Vec::new();
    for r in per_instance {
        choice_rows.extend(r?);
    }
    let l1_stats = l1_stats_from_rows(&choice_rows);
    Ok(ExperimentReport {
        choice_rows,
        l1_stats,
        ..Default::default()
    })
}

/// Per instance: generate a model, learn the DAG at each n0, and compare
/// against the truth. Node probabilities are compared against the full
/// model's DAG, since the estimate legitimately absorbs rare mass riding on
/// frequent prefixes. The vertex metric counts level-n0 nodes added wrongly
/// (absent from the full DAG — pure artifacts) plus frequent-type nodes not
/// inferred, as a percentage of the frequent-type level-n0 count: rare
/// structure is not required of the learner, but reporting it is not an
/// error either.
pub fn run_recovery_experiment(spec: &ExperimentSpec) -> Result<ExperimentReport> {
    spec.validate()?;
    let eps = spec.epsilons[0];
    let per_instance: Vec<Result<Vec<RecoveryRow>>> =
        map_indexed(spec.instances, spec.parallel, |instance| {
            let mut rows = Vec::new();
            for (rho_idx, &rho) in spec.rhos.iter().enumerate() {
                let mut rng = instance_rng(spec.seed, instance, rho_idx);
                let model = generate_instance(spec, rho, &mut rng)?;
                for &n0 in &spec.levels {
                    let cfg = EstimationConfig {
                        alpha: n0 as f64 / spec.n as f64,
                        epsilon: eps,
                        delta: spec.delta,
                        kappa: spec.kappa,
                        k_bound: None,
                        m_cap: spec.m_cap,
                    };
                    let mut oracle =
                        SampledOracle::new(&model, ChaCha8Rng::from_rng(&mut rng).unwrap());
                    let (dag, ledger) = alg_dag(&mut oracle, &cfg)?;
                    let truth_full = dag_from_model(&model, n0, false)?;
                    let truth_freq = dag_from_model(&model, n0, true)?;
                    let vs_full = dag_diff(&truth_full, &dag, n0)?;
                    let vs_freq = dag_diff(&truth_freq, &dag, n0)?;
                    let freq_count = truth_freq.level_nodes(n0).len().max(1);
                    let pct_diff = 100.0 * (vs_full.false_pos + vs_freq.false_neg) as f64
                        / freq_count as f64;
                    rows.push(RecoveryRow {
                        instance,
                        rho,
                        n0,
                        max_discrepancy: vs_full.max_discrepancy,
                        pct_diff_vertices: pct_diff,
                        queries_total: ledger.total_consumers(),
                    });
                }
            }
            Ok(rows)
        });
    let mut recovery_rows = Vec::new();
    for r in per_instance {
        recovery_rows.extend(r?);
    }
    let recovery_stats = recovery_stats_from_rows(&recovery_rows);
    Ok(ExperimentReport {
        recovery_rows,
        recovery_stats,
        ..Default::default()
    })
}

/// Load a ranking survey: one full ranking per line as whitespace-separated
/// 1-based item ids, `#` starting a comment. Duplicate rankings merge into
/// one type with probability count/total; κ is supplied by the caller and ρ
/// becomes the resulting sub-κ mass.
pub fn load_sushi(path: &Path, kappa: f64) -> Result<ChoiceModel> {
    let text = std::fs::read_to_string(path)?;
    let origin = path.display().to_string();
    let mut counts: BTreeMap<Vec<usize>, u64> = BTreeMap::new();
    let mut total = 0u64;
    let mut n = 0usize;
    for (idx, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let ids: Vec<usize> = line
            .split_whitespace()
            .map(|tok| {
                tok.parse::<usize>().map_err(|e| Error::Parse {
                    path: origin.clone(),
                    line: idx + 1,
                    msg: format!("bad item id {tok:?}: {e}"),
                })
            })
            .collect::<Result<_>>()?;
        let ranking = Ranking::from_one_based(&ids).map_err(|e| Error::Parse {
            path: origin.clone(),
            line: idx + 1,
            msg: e.to_string(),
        })?;
        if n == 0 {
            n = ranking.n();
        } else if ranking.n() != n {
            return Err(Error::Parse {
                path: origin.clone(),
                line: idx + 1,
                msg: format!("ranking over {} items, expected {n}", ranking.n()),
            });
        }
        *counts.entry(ranking.to_one_based()).or_insert(0) += 1;
        total += 1;
    }
    if total == 0 {
        return Err(Error::Parse {
            path: origin,
            line: 0,
            msg: "no rankings in file".into(),
        });
    }
    let types: Vec<(Ranking, f64)> = counts
        .iter()
        .map(|(ids, &c)| {
            Ok((
                Ranking::from_one_based(ids)?,
                c as f64 / total as f64,
            ))
        })
        .collect::<Result<_>>()?;
    let rho = types
        .iter()
        .filter(|(_, p)| *p < kappa)
        .map(|(_, p)| p)
        .sum::<f64>()
        .min(0.999_999);
    ChoiceModel::new(n, types, kappa, rho)
}

/// Number of distinct ordered top-`j` prefixes among the model's types.
pub fn distinct_ordered_prefixes(m: &ChoiceModel, j: usize) -> usize {
    let mut seen: std::collections::BTreeSet<Vec<usize>> = Default::default();
    for (r, _) in m.types() {
        seen.insert(r.order()[..j].to_vec());
    }
    seen.len()
}

pub fn choice_prob_csv(rows: &[ChoiceProbRow]) -> String {
    let mut out = String::from("instance,rho,eps,n0,set,market_share,l1_error\n");
    for r in rows {
        out.push_str(&format!(
            "{},{},{},{},{},{},{}\n",
            r.instance, r.rho, r.eps, r.n0, r.set, r.market_share, r.l1_error
        ));
    }
    out
}

pub fn recovery_csv(rows: &[RecoveryRow]) -> String {
    let mut out = String::from("instance,rho,n0,max_discrepancy,pct_diff_vertices,queries_total\n");
    for r in rows {
        out.push_str(&format!(
            "{},{},{},{},{},{}\n",
            r.instance, r.rho, r.n0, r.max_discrepancy, r.pct_diff_vertices, r.queries_total
        ));
    }
    out
}

/// Write a report as CSV (instance rows only) or JSON (rows + aggregates).
pub fn emit_report(rep: &ExperimentReport, format: &str, path: &Path) -> Result<()> {
    let text = match format {
        "csv" => {
            if !rep.recovery_rows.is_empty() {
                recovery_csv(&rep.recovery_rows)
            } else {
                choice_prob_csv(&rep.choice_rows)
            }
        }
        "json" => serde_json::to_string_pretty(rep)?,
        other => {
            return Err(Error::InvalidParameter(format!(
                "unknown format {other:?} (expected csv or json)"
            )))
        }
    };
    std::fs::write(path, text)?;
    Ok(())
}
