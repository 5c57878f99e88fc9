//! The prefix DAG: ground-truth construction from a model, exact
//! reconstruction from a probability oracle, evaluation, truncation, and
//! comparison metrics.

use crate::items::ItemSet;
use crate::model::ChoiceModel;
use crate::oracle::ExactOracle;
use crate::{Error, Result};
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;

/// Edges smaller than this are treated as floating-point cancellation
/// residue and dropped during reconstruction.
pub const EDGE_TOL: f64 = 1e-12;

/// Leveled graph of prefixes. A node is an unordered top-`j` item set with
/// its total probability p(A); an edge (A, A∪{z}) carries the mass of types
/// ranking the members of A first (in any order) immediately followed by z.
#[derive(Clone, Debug, PartialEq)]
pub struct Dag {
    n: usize,
    /// prefix mask -> p(A)
    nodes: BTreeMap<u64, f64>,
    /// (prefix mask, item) -> e_{A⊕z}
    edges: BTreeMap<(u64, usize), f64>,
}

impl Dag {
    pub fn new(n: usize) -> Dag {
        Dag {
            n,
            nodes: BTreeMap::new(),
            edges: BTreeMap::new(),
        }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn nodes(&self) -> &BTreeMap<u64, f64> {
        &self.nodes
    }

    pub fn edges(&self) -> &BTreeMap<(u64, usize), f64> {
        &self.edges
    }

    pub fn node_prob(&self, a: ItemSet) -> Option<f64> {
        self.nodes.get(&a.0).copied()
    }

    pub fn edge_prob(&self, a: ItemSet, z: usize) -> Option<f64> {
        self.edges.get(&(a.0, z)).copied()
    }

    pub fn insert_node(&mut self, a: ItemSet, p: f64) {
        self.nodes.insert(a.0, p);
    }

    pub fn insert_edge(&mut self, a: ItemSet, z: usize, e: f64) {
        self.edges.insert((a.0, z), e);
    }

    /// Deepest populated level (size of the largest prefix).
    pub fn max_level(&self) -> usize {
        self.nodes
            .keys()
            .map(|&m| m.count_ones() as usize)
            .max()
            .unwrap_or(0)
    }

    /// Nodes at a given level, in mask order.
    pub fn level_nodes(&self, j: usize) -> Vec<(ItemSet, f64)> {
        self.nodes
            .iter()
            .filter(|(&m, _)| m.count_ones() as usize == j)
            .map(|(&m, &p)| (ItemSet(m), p))
            .collect()
    }

    /// Largest violation of the incoming flow equation
    /// p(A) = Σ_{z∈A} e_{(A∖{z})⊕z} over all non-root nodes.
    pub fn max_incoming_residual(&self) -> f64 {
        let mut worst = 0.0f64;
        for (&mask, &p) in &self.nodes {
            if mask == 0 {
                continue;
            }
            let a = ItemSet(mask);
            let incoming: f64 = a
                .iter()
                .filter_map(|z| self.edges.get(&(a.remove(z).0, z)))
                .sum();
            worst = worst.max((p - incoming).abs());
        }
        worst
    }

    /// Largest violation of the outgoing flow equation
    /// p(A) = Σ_{z∉A} e_{A⊕z} over nodes strictly above the deepest level.
    /// Only meaningful for complete (untruncated) DAGs.
    pub fn max_outgoing_residual(&self) -> f64 {
        let deepest = self.max_level();
        let mut worst = 0.0f64;
        for (&mask, &p) in &self.nodes {
            if mask.count_ones() as usize >= deepest {
                continue;
            }
            let a = ItemSet(mask);
            let outgoing: f64 = ItemSet::universe(self.n)
                .difference(a)
                .iter()
                .filter_map(|z| self.edges.get(&(mask, z)))
                .sum();
            worst = worst.max((p - outgoing).abs());
        }
        worst
    }
}

/// Build the DAG of a known model by direct enumeration, down to level `n0`.
/// With `frequent_only`, only types with p ≥ κ contribute — the G^F of the
/// analysis — and the root carries the frequent mass rather than 1.
pub fn dag_from_model(m: &ChoiceModel, n0: usize, frequent_only: bool) -> Result<Dag> {
    if n0 < 1 || n0 > m.n() {
        return Err(Error::InvalidParameter(format!(
            "n0={n0} outside 1..={}",
            m.n()
        )));
    }
    let mut d = Dag::new(m.n());
    for (r, p) in m.types() {
        if frequent_only && *p < m.kappa() {
            continue;
        }
        for j in 0..=n0 {
            let a = r.top_set(j);
            *d.nodes.entry(a.0).or_insert(0.0) += p;
            if j < n0 {
                *d.edges.entry((a.0, r.order()[j])).or_insert(0.0) += p;
            }
        }
    }
    Ok(d)
}

/// Evaluate q_z(S) from a DAG: Σ over stored edges (A, z) with A ∩ S = ∅.
/// Exact for a complete all-types DAG; an under-estimate when the DAG is
/// truncated or frequent-only, since deep or rare types are missing.
pub fn choice_prob_from_dag(d: &Dag, s: ItemSet, z: usize) -> Result<f64> {
    if s.is_empty() {
        return Err(Error::EmptyAssortment);
    }
    if !s.contains(z) {
        return Err(Error::ItemNotOffered { item: z + 1 });
    }
    Ok(d.edges
        .iter()
        .filter(|(&(a, item), _)| item == z && ItemSet(a).is_disjoint_from(s))
        .map(|(_, &e)| e)
        .sum())
}

/// Reconstruct the complete DAG of an unknown model from an exact choice
/// probability oracle, level by level: for each known prefix A and z ∉ A,
///   ê_{A⊕z} = q_z(N∖A) − Σ_{A′ ⊊ A stored, (A′,z) an edge} ê_{A′⊕z},
/// keeping edges with ê > EDGE_TOL. One oracle call per candidate (A, z).
pub fn build_dag_exact(oracle: &mut ExactOracle, n: usize) -> Result<Dag> {
    let universe = ItemSet::universe(n);
    let mut d = Dag::new(n);
    d.insert_node(ItemSet::EMPTY, 1.0);
    // per item: source prefixes of stored edges labeled with it
    let mut by_item: Vec<Vec<u64>> = vec![Vec::new(); n];
    for j in 0..n {
        let frontier = d.level_nodes(j);
        for (a, _) in frontier {
            for z in universe.difference(a).iter() {
                let q = oracle.q(universe.difference(a).insert(z), z)?;
                let ancestors: f64 = by_item[z]
                    .iter()
                    .filter(|&&src| ItemSet(src).is_proper_subset_of(a))
                    .map(|&src| d.edges[&(src, z)])
                    .sum();
                let e_hat = q - ancestors;
                if e_hat > EDGE_TOL {
                    d.insert_edge(a, z, e_hat);
                    by_item[z].push(a.0);
                    *d.nodes.entry(a.insert(z).0).or_insert(0.0) += e_hat;
                }
            }
        }
    }
    Ok(d)
}

/// Restrict a DAG to levels 0..=n0; probabilities are untouched.
pub fn truncate(d: &Dag, n0: usize) -> Dag {
    Dag {
        n: d.n,
        nodes: d
            .nodes
            .iter()
            .filter(|(&m, _)| m.count_ones() as usize <= n0)
            .map(|(&m, &p)| (m, p))
            .collect(),
        edges: d
            .edges
            .iter()
            .filter(|(&(m, _), _)| (m.count_ones() as usize) < n0)
            .map(|(&k, &e)| (k, e))
            .collect(),
    }
}

/// Comparison of an estimated DAG against the truth at a truncation level.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct DiffMetrics {
    /// max over the union of node sets at levels ≤ n0 of |p̂(A) − p(A)|,
    /// treating a missing node's probability as 0
    pub max_discrepancy: f64,
    /// level-n0 nodes present only in the estimate
    pub false_pos: usize,
    /// level-n0 nodes present only in the truth
    pub false_neg: usize,
    /// (false_pos + false_neg) as a percentage of the truth's level-n0
    /// node count; can exceed 100% when false positives dominate
    pub pct_diff: f64,
}

impl DiffMetrics {
    pub fn csv_header() -> &'static str {
        "max_discrepancy,false_pos,false_neg,pct_diff"
    }

    pub fn to_csv_row(&self) -> String {
        format!(
            "{},{},{},{}",
            self.max_discrepancy, self.false_pos, self.false_neg, self.pct_diff
        )
    }
}

/// Compare node probabilities and level-`n0` vertex sets of two DAGs over
/// the same universe. A node present in both counts only toward the
/// discrepancy, never the vertex diff, regardless of how far apart the
/// probabilities are.
pub fn dag_diff(truth: &Dag, est: &Dag, n0: usize) -> Result<DiffMetrics> {
    if truth.n != est.n {
        return Err(Error::InvalidParameter(format!(
            "universe mismatch: {} vs {}",
            truth.n, est.n
        )));
    }
    let mut max_discrepancy = 0.0f64;
    for (&mask, &p) in &truth.nodes {
        if mask.count_ones() as usize > n0 {
            continue;
        }
        let p_hat = est.nodes.get(&mask).copied().unwrap_or(0.0);
        max_discrepancy = max_discrepancy.max((p_hat - p).abs());
    }
    for (&mask, &p_hat) in &est.nodes {
        if mask.count_ones() as usize > n0 || truth.nodes.contains_key(&mask) {
            continue;
        }
        max_discrepancy = max_discrepancy.max(p_hat.abs());
    }

    let truth_level: Vec<u64> = truth
        .nodes
        .keys()
        .copied()
        .filter(|m| m.count_ones() as usize == n0)
        .collect();
    let est_level: Vec<u64> = est
        .nodes
        .keys()
        .copied()
        .filter(|m| m.count_ones() as usize == n0)
        .collect();
    let false_pos = est_level.iter().filter(|m| !truth_level.contains(m)).count();
    let false_neg = truth_level.iter().filter(|m| !est_level.contains(m)).count();
    let pct_diff = if truth_level.is_empty() {
        if false_pos == 0 {
            0.0
        } else {
            f64::INFINITY
        }
    } else {
        100.0 * (false_pos + false_neg) as f64 / truth_level.len() as f64
    };
    Ok(DiffMetrics {
        max_discrepancy,
        false_pos,
        false_neg,
        pct_diff,
    })
}

/// Probability that a random type ranks at least one item of `s` within its
/// top `n0` positions.
pub fn market_share(m: &ChoiceModel, s: ItemSet, n0: usize) -> Result<f64> {
    if s.is_empty() {
        return Err(Error::EmptyAssortment);
    }
    Ok(m.types()
        .iter()
        .filter(|(r, _)| !r.top_set(n0).is_disjoint_from(s))
        .map(|(_, p)| p)
        .sum())
}

// ---------------------------------------------------------------------------
// JSON DAG files
// ---------------------------------------------------------------------------

#[derive(Serialize, Deserialize)]
struct NodeFile {
    set: Vec<usize>,
    prob: f64,
}

#[derive(Serialize, Deserialize)]
struct EdgeFile {
    from: Vec<usize>,
    item: usize,
    prob: f64,
}

#[derive(Serialize, Deserialize)]
struct DagFile {
    n: usize,
    nodes: Vec<NodeFile>,
    edges: Vec<EdgeFile>,
}

pub fn dag_to_json(d: &Dag) -> String {
    let file = DagFile {
        n: d.n,
        nodes: d
            .nodes
            .iter()
            .map(|(&m, &p)| NodeFile {
                set: ItemSet(m).to_one_based(),
                prob: p,
            })
            .collect(),
        edges: d
            .edges
            .iter()
            .map(|(&(m, z), &e)| EdgeFile {
                from: ItemSet(m).to_one_based(),
                item: z + 1,
                prob: e,
            })
            .collect(),
    };
    serde_json::to_string_pretty(&file).expect("DAG serialization cannot fail")
}

pub fn dag_from_json(text: &str, origin: &str) -> Result<Dag> {
    let file: DagFile = serde_json::from_str(text).map_err(|e| Error::Parse {
        path: origin.to_string(),
        line: e.line(),
        msg: e.to_string(),
    })?;
    if file.n == 0 || file.n > 64 {
        return Err(Error::InvalidParameter(format!(
            "n={} outside 1..=64",
            file.n
        )));
    }
    let mut d = Dag::new(file.n);
    for node in &file.nodes {
        let a = ItemSet::from_one_based(&node.set)?;
        d.insert_node(a, node.prob);
    }
    for edge in &file.edges {
        let a = ItemSet::from_one_based(&edge.from)?;
        if edge.item == 0 || edge.item > file.n {
            return Err(Error::InvalidParameter(format!(
                "edge item {} out of range",
                edge.item
            )));
        }
        d.insert_edge(a, edge.item - 1, edge.prob);
    }
    Ok(d)
}

pub fn load_dag(path: &std::path::Path) -> Result<Dag> {
    let text = std::fs::read_to_string(path)?;
    dag_from_json(&text, &path.display().to_string())
}

/// The node/edge sets match and every probability agrees within `tol`.
pub fn dags_close(a: &Dag, b: &Dag, tol: f64) -> bool {
    a.n == b.n
        && a.nodes.len() == b.nodes.len()
        && a.edges.len() == b.edges.len()
        && a.nodes
            .iter()
            .all(|(k, &p)| b.nodes.get(k).is_some_and(|&q| (p - q).abs() <= tol))
        && a.edges
            .iter()
            .all(|(k, &e)| b.edges.get(k).is_some_and(|&f| (e - f).abs() <= tol))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{fig1_model, ChoiceModel, Ranking};

    pub(crate) fn example1_model() -> ChoiceModel {
        let orders = [
            [1, 2, 3, 4, 5, 6, 7, 8],
            [1, 2, 3, 4, 5, 6, 8, 7],
            [1, 2, 3, 4, 7, 5, 6, 8],
            [1, 2, 3, 5, 7, 4, 6, 8],
            [1, 2, 3, 6, 7, 4, 5, 8],
            [1, 7, 2, 3, 4, 5, 6, 8],
            [2, 7, 1, 3, 4, 5, 6, 8],
            [3, 7, 1, 2, 4, 5, 6, 8],
            [7, 1, 2, 3, 4, 5, 6, 8],
        ];
        let types = orders
            .iter()
            .map(|o| (Ranking::from_one_based(o).unwrap(), 1.0 / 9.0))
            .collect();
        ChoiceModel::new(8, types, 0.05, 0.0).unwrap()
    }

    fn set(ids: &[usize]) -> ItemSet {
        ItemSet::from_one_based(ids).unwrap()
    }

    #[test]
    fn fig1_levels() {
        let m = fig1_model();
        let d = dag_from_model(&m, 2, false).unwrap();
        assert!((d.node_prob(ItemSet::EMPTY).unwrap() - 1.0).abs() < 1e-12);
        assert!((d.node_prob(set(&[1])).unwrap() - 0.6).abs() < 1e-12);
        assert!((d.node_prob(set(&[2])).unwrap() - 0.4).abs() < 1e-12);
        assert!((d.node_prob(set(&[1, 2])).unwrap() - 0.6).abs() < 1e-12);
        assert!((d.node_prob(set(&[2, 3])).unwrap() - 0.2).abs() < 1e-12);
        assert!((d.node_prob(set(&[2, 4])).unwrap() - 0.2).abs() < 1e-12);
        assert_eq!(d.level_nodes(1).len(), 2);
        assert_eq!(d.level_nodes(2).len(), 3);

        let d3 = dag_from_model(&m, 3, false).unwrap();
        assert!((d3.node_prob(set(&[1, 2, 3])).unwrap() - 0.4).abs() < 1e-12);
        assert!((d3.node_prob(set(&[1, 2, 4])).unwrap() - 0.4).abs() < 1e-12);
        assert!((d3.node_prob(set(&[2, 3, 4])).unwrap() - 0.2).abs() < 1e-12);
    }

    #[test]
    fn single_type_chain() {
        let r = Ranking::from_one_based(&[3, 1, 4, 2]).unwrap();
        let m = ChoiceModel::new(4, vec![(r, 1.0)], 0.5, 0.0).unwrap();
        let d = dag_from_model(&m, 4, false).unwrap();
        assert_eq!(d.nodes().len(), 5);
        assert_eq!(d.edges().len(), 4);
        for (_, &p) in d.nodes() {
            assert!((p - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn example1_level_six_incoming() {
        let m = example1_model();
        let d = dag_from_model(&m, 7, false).unwrap();
        let a = set(&[1, 2, 3, 4, 5, 6]);
        assert!((d.node_prob(a).unwrap() - 2.0 / 9.0).abs() < 1e-12);
        // only the two straight-prefix types feed it, both via item 6
        let incoming: Vec<usize> = a
            .iter()
            .filter(|&z| d.edge_prob(a.remove(z), z).is_some())
            .collect();
        assert_eq!(incoming, vec![5]);
        assert!((d.edge_prob(a, 6).unwrap() - 1.0 / 9.0).abs() < 1e-12);
    }

    #[test]
    fn flow_equations_hold() {
        for (m, n0) in [(fig1_model(), 5), (example1_model(), 8)] {
            let d = dag_from_model(&m, n0, false).unwrap();
            assert!(d.max_incoming_residual() < 1e-9);
            assert!(d.max_outgoing_residual() < 1e-9);
        }
    }

    #[test]
    fn level_masses_sum_to_one() {
        let d = dag_from_model(&fig1_model(), 5, false).unwrap();
        for j in 0..=5 {
            let total: f64 = d.level_nodes(j).iter().map(|(_, p)| p).sum();
            assert!((total - 1.0).abs() < 1e-12, "level {j}: {total}");
        }
    }

    #[test]
    fn choice_prob_matches_enumeration() {
        let m = fig1_model();
        let d = dag_from_model(&m, 5, false).unwrap();
        for mask in 1..(1u64 << 5) {
            let s = ItemSet(mask);
            for z in s.iter() {
                let via_dag = choice_prob_from_dag(&d, s, z).unwrap();
                let direct = m.choice_probability(s, z).unwrap();
                assert!((via_dag - direct).abs() < 1e-12, "S={s} z={}", z + 1);
            }
        }
        assert!(choice_prob_from_dag(&d, set(&[1, 2]), 2).is_err());
    }

    #[test]
    fn full_assortment_reads_level_one() {
        let d = dag_from_model(&fig1_model(), 5, false).unwrap();
        let all = ItemSet::universe(5);
        assert!((choice_prob_from_dag(&d, all, 0).unwrap() - 0.6).abs() < 1e-12);
        assert!((choice_prob_from_dag(&d, all, 1).unwrap() - 0.4).abs() < 1e-12);
        assert!(choice_prob_from_dag(&d, all, 2).unwrap().abs() < 1e-12);
    }

    #[test]
    fn truncated_dag_underestimates_to_zero() {
        let m = example1_model();
        let d = truncate(&dag_from_model(&m, 8, false).unwrap(), 3);
        // {4,5,6} shares no top-3 item with any type (every top-3 contains
        // an item from {1,2,3,7}), so the truncated DAG reports 0
        let s = set(&[4, 5, 6]);
        for z in s.iter() {
            assert!(choice_prob_from_dag(&d, s, z).unwrap().abs() < 1e-12);
        }
    }

    #[test]
    fn exact_reconstruction_roundtrip() {
        let m = fig1_model();
        let truth = dag_from_model(&m, 5, false).unwrap();
        let mut oracle = ExactOracle::new(&m);
        let rebuilt = build_dag_exact(&mut oracle, 5).unwrap();
        assert!(dags_close(&truth, &rebuilt, 1e-12));
    }

    #[test]
    fn exact_reconstruction_chain() {
        let r = Ranking::from_one_based(&[2, 3, 1]).unwrap();
        let m = ChoiceModel::new(3, vec![(r, 1.0)], 0.5, 0.0).unwrap();
        let mut oracle = ExactOracle::new(&m);
        let d = build_dag_exact(&mut oracle, 3).unwrap();
        assert_eq!(d.nodes().len(), 4);
        for (_, &p) in d.nodes() {
            assert!((p - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn exact_reconstruction_example1_edge() {
        let m = example1_model();
        let mut oracle = ExactOracle::new(&m);
        let d = build_dag_exact(&mut oracle, 8).unwrap();
        let a = set(&[1, 2, 3, 4, 5, 6]);
        assert!((d.edge_prob(a, 6).unwrap() - 1.0 / 9.0).abs() < 1e-12);
        let truth = dag_from_model(&m, 8, false).unwrap();
        assert!(dags_close(&truth, &d, 1e-12));
    }

    #[test]
    fn truncate_basics() {
        let d = dag_from_model(&fig1_model(), 5, false).unwrap();
        let t1 = truncate(&d, 1);
        assert_eq!(t1.nodes().len(), 3); // ∅, {1}, {2}
        assert_eq!(t1.max_level(), 1);
        assert!(dags_close(&truncate(&d, 5), &d, 0.0));
        let via_two_steps = truncate(&truncate(&d, 3), 2);
        assert!(dags_close(&via_two_steps, &truncate(&d, 2), 0.0));
    }

    #[test]
    fn diff_metrics() {
        let d = dag_from_model(&fig1_model(), 3, false).unwrap();
        let same = dag_diff(&d, &d, 3).unwrap();
        assert_eq!(same.max_discrepancy, 0.0);
        assert_eq!((same.false_pos, same.false_neg), (0, 0));
        assert_eq!(same.pct_diff, 0.0);

        let mut est = d.clone();
        est.nodes.remove(&set(&[2, 3]).0); // p = 0.2
        let diff = dag_diff(&d, &est, 2).unwrap();
        assert!(diff.max_discrepancy >= 0.2);
        assert_eq!((diff.false_pos, diff.false_neg), (0, 1));

        let mut est = d.clone();
        est.insert_node(set(&[3, 4]), 0.05);
        let diff = dag_diff(&d, &est, 2).unwrap();
        assert_eq!((diff.false_pos, diff.false_neg), (1, 0));
        assert!((diff.pct_diff - 100.0 / 3.0).abs() < 1e-9);
        assert!((diff.max_discrepancy - 0.05).abs() < 1e-12);
    }

    #[test]
    fn market_share_examples() {
        let m = fig1_model();
        assert!((market_share(&m, set(&[1]), 1).unwrap() - 0.6).abs() < 1e-12);
        for mask in 1..(1u64 << 5) {
            let ms = market_share(&m, ItemSet(mask), 5).unwrap();
            assert!((ms - 1.0).abs() < 1e-12);
        }
        assert!(market_share(&m, ItemSet::EMPTY, 2).is_err());
    }

    #[test]
    fn json_roundtrip() {
        let d = dag_from_model(&fig1_model(), 3, false).unwrap();
        let text = dag_to_json(&d);
        let back = dag_from_json(&text, "mem").unwrap();
        assert!(dags_close(&d, &back, 0.0));
    }
}

#[cfg(test)]
pub(crate) use tests::example1_model;
