//! Rankings, choice models, exact choice probabilities by enumeration, and
//! the seeded generators used to build synthetic instances.

use crate::items::ItemSet;
use crate::{Error, Result};
use rand::distributions::Distribution;
use rand::Rng;
use rand_distr::Gamma;
use serde::{Deserialize, Serialize};

/// Probability-sum tolerance for model validation.
pub const PROB_SUM_TOL: f64 = 1e-9;

/// A full preference order over `n` items. `order[0]` is the most preferred
/// item; `position(z)` is the 0-based rank of item `z`.
#[derive(Clone, PartialEq, Eq, Hash, Debug)]
pub struct Ranking {
    order: Vec<usize>,
    position: Vec<usize>,
}

impl Ranking {
    pub fn new(order: Vec<usize>) -> Result<Ranking> {
        let n = order.len();
        if n == 0 || n > 64 {
            return Err(Error::InvalidRanking(format!(
                "length {n} outside supported range 1..=64"
            )));
        }
        let mut position = vec![usize::MAX; n];
        for (rank, &z) in order.iter().enumerate() {
            if z >= n {
                return Err(Error::InvalidRanking(format!(
                    "item {} out of range for n={n}",
                    z + 1
                )));
            }
            if position[z] != usize::MAX {
                return Err(Error::InvalidRanking(format!("item {} repeated", z + 1)));
            }
            position[z] = rank;
        }
        Ok(Ranking { order, position })
    }

    /// Construct from 1-based ids as they appear in data files.
    pub fn from_one_based(ids: &[usize]) -> Result<Ranking> {
        let order: Vec<usize> = ids
            .iter()
            .map(|&id| {
                if id == 0 {
                    Err(Error::InvalidRanking("item id 0 (ids are 1-based)".into()))
                } else {
                    Ok(id - 1)
                }
            })
            .collect::<Result<_>>()?;
        Ranking::new(order)
    }

    pub fn n(&self) -> usize {
        self.order.len()
    }

    pub fn order(&self) -> &[usize] {
        &self.order
    }

    pub fn to_one_based(&self) -> Vec<usize> {
        self.order.iter().map(|&z| z + 1).collect()
    }

    /// 0-based rank of item `z`.
    pub fn position(&self, z: usize) -> usize {
        self.position[z]
    }

    /// The item this type picks from assortment `s`: the member of `s` with
    /// the smallest position.
    pub fn choose(&self, s: ItemSet) -> Result<usize> {
        if s.is_empty() {
            return Err(Error::EmptyAssortment);
        }
        for &z in &self.order {
            if s.contains(z) {
                return Ok(z);
            }
        }
        // unreachable: s is non-empty and items are 0..n-1
        Err(Error::ItemNotOffered {
            item: s.iter().next().unwrap() + 1,
        })
    }

    /// The unordered set of the top `j` items (the size-`j` prefix).
    pub fn top_set(&self, j: usize) -> ItemSet {
        ItemSet::from_items(self.order[..j].iter().copied())
    }

    /// True iff this ranking places every item of `a` (in some order) ahead
    /// of everything else, immediately followed by `z`.
    pub fn has_prefix_then(&self, a: ItemSet, z: usize) -> bool {
        let j = a.len();
        self.order[j] == z && self.top_set(j) == a
    }
}

/// Standalone form of [`Ranking::choose`].
pub fn choose(r: &Ranking, s: ItemSet) -> Result<usize> {
    r.choose(s)
}

/// A finite distribution over rankings, with the frequent/rare
/// classification parameters kappa and rho.
#[derive(Clone, Debug)]
pub struct ChoiceModel {
    n: usize,
    types: Vec<(Ranking, f64)>,
    kappa: f64,
    rho: f64,
    /// Cumulative probabilities, for type sampling.
    cdf: Vec<f64>,
}

impl ChoiceModel {
    pub fn new(n: usize, types: Vec<(Ranking, f64)>, kappa: f64, rho: f64) -> Result<ChoiceModel> {
        if n == 0 || n > 64 {
            return Err(Error::InvalidModel(format!("n={n} outside 1..=64")));
        }
        if !(0.0 < kappa && kappa < 1.0) {
            return Err(Error::InvalidModel(format!("kappa={kappa} outside (0,1)")));
        }
        if !(0.0..1.0).contains(&rho) {
            return Err(Error::InvalidModel(format!("rho={rho} outside [0,1)")));
        }
        let mut sum = 0.0;
        for (i, (r, p)) in types.iter().enumerate() {
            if r.n() != n {
                return Err(Error::InvalidModel(format!(
                    "types[{i}]: ranking length {} != n={n}",
                    r.n()
                )));
            }
            if !(*p >= 0.0) {
                return Err(Error::InvalidModel(format!(
                    "types[{i}]: probability {p} is negative or NaN"
                )));
            }
            sum += p;
        }
        if (sum - 1.0).abs() > PROB_SUM_TOL {
            return Err(Error::InvalidModel(format!(
                "probabilities sum to {sum}, not 1"
            )));
        }
        for i in 0..types.len() {
            for j in i + 1..types.len() {
                if types[i].0 == types[j].0 {
                    return Err(Error::InvalidModel(format!(
                        "types[{i}] and types[{j}] are the same ranking"
                    )));
                }
            }
        }
        let frequent = types.iter().filter(|(_, p)| *p >= kappa).count();
        if frequent > (1.0 / kappa).ceil() as usize {
            return Err(Error::InvalidModel(format!(
                "{frequent} frequent types exceeds ceil(1/kappa)"
            )));
        }
        let rare_mass: f64 = types.iter().filter(|(_, p)| *p < kappa).map(|(_, p)| p).sum();
        if rare_mass > rho + PROB_SUM_TOL {
            return Err(Error::InvalidModel(format!(
                "rare mass {rare_mass} exceeds rho={rho}"
            )));
        }
        let mut cdf = Vec::with_capacity(types.len());
        let mut acc = 0.0;
        for (_, p) in &types {
            acc += p;
            cdf.push(acc);
        }
        Ok(ChoiceModel {
            n,
            types,
            kappa,
            rho,
            cdf,
        })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn kappa(&self) -> f64 {
        self.kappa
    }

    pub fn rho(&self) -> f64 {
        self.rho
    }

    pub fn types(&self) -> &[(Ranking, f64)] {
        &self.types
    }

    pub fn universe(&self) -> ItemSet {
        ItemSet::universe(self.n)
    }

    /// Exact probability that a random consumer picks `z` from assortment
    /// `s`, by enumerating the types that rank `z` first within `s`.
    pub fn choice_probability(&self, s: ItemSet, z: usize) -> Result<f64> {
        if s.is_empty() {
            return Err(Error::EmptyAssortment);
        }
        if !s.contains(z) {
            return Err(Error::ItemNotOffered { item: z + 1 });
        }
        let mut q = 0.0;
        for (r, p) in &self.types {
            if r.choose(s)? == z {
                q += p;
            }
        }
        Ok(q)
    }

    /// Draw a type index from the population distribution.
    pub fn sample_type<R: Rng + ?Sized>(&self, rng: &mut R) -> usize {
        let u: f64 = rng.gen();
        match self.cdf.partition_point(|&c| c <= u) {
            i if i < self.types.len() => i,
            _ => self.types.len() - 1,
        }
    }

    /// Draw one consumer and return her choice from `s`.
    pub fn sample_choice<R: Rng + ?Sized>(&self, s: ItemSet, rng: &mut R) -> Result<usize> {
        let t = self.sample_type(rng);
        self.types[t].0.choose(s)
    }

    /// Partition type indices into (frequent, rare) by `p >= kappa`.
    pub fn classify_types(&self) -> (Vec<usize>, Vec<usize>) {
        let mut frequent = Vec::new();
        let mut rare = Vec::new();
        for (i, (_, p)) in self.types.iter().enumerate() {
            if *p >= self.kappa {
                frequent.push(i);
            } else {
                rare.push(i);
            }
        }
        (frequent, rare)
    }
}

/// Parameters for the seeded synthetic generator.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct GenParams {
    pub n: usize,
    pub num_frequent: usize,
    pub num_rare: usize,
    pub rho: f64,
    /// Coefficient of variation of the symmetric Dirichlet draws.
    pub cv: f64,
    pub kappa: f64,
    pub seed: u64,
    /// When set, duplicate random rankings are merged instead of re-drawn,
    /// so the generated type count may be smaller than requested.
    #[serde(default)]
    pub allow_merge: bool,
}

impl GenParams {
    pub fn validate(&self) -> Result<()> {
        if self.num_frequent < 1 {
            return Err(Error::InvalidParameter("num_frequent must be >= 1".into()));
        }
        if !(0.0..1.0).contains(&self.rho) {
            return Err(Error::InvalidParameter(format!(
                "rho={} outside [0,1)",
                self.rho
            )));
        }
        if !(self.cv > 0.0) {
            return Err(Error::InvalidParameter("cv must be > 0".into()));
        }
        if self.n == 0 || self.n > 64 {
            return Err(Error::InvalidParameter(format!(
                "n={} outside 1..=64",
                self.n
            )));
        }
        Ok(())
    }
}

/// Draw from a symmetric Dirichlet over `k` components whose per-component
/// coefficient of variation is `cv`: alpha = ((k-1)/cv^2 - 1)/k.
pub fn symmetric_dirichlet<R: Rng + ?Sized>(k: usize, cv: f64, rng: &mut R) -> Result<Vec<f64>> {
    if k == 1 {
        return Ok(vec![1.0]);
    }
    let alpha = ((k as f64 - 1.0) / (cv * cv) - 1.0) / k as f64;
    if !(alpha > 0.0) {
        return Err(Error::InvalidParameter(format!(
            "cv={cv} too large for k={k} components"
        )));
    }
    let gamma = Gamma::new(alpha, 1.0)
        .map_err(|e| Error::InvalidParameter(format!("gamma({alpha}): {e}")))?;
    let draws: Vec<f64> = (0..k).map(|_| gamma.sample(rng)).collect();
    let total: f64 = draws.iter().sum();
    Ok(draws.into_iter().map(|g| g / total).collect())
}

fn random_ranking<R: Rng + ?Sized>(n: usize, rng: &mut R) -> Ranking {
    use rand::seq::SliceRandom;
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(rng);
    Ranking::new(order).unwrap()
}

/// Generate a synthetic kappa-rho model: frequent rankings drawn i.i.d.
/// uniformly with Dirichlet probabilities scaled by (1 - rho), rare
/// rankings likewise scaled by rho.
pub fn generate_model(gp: &GenParams) -> Result<ChoiceModel> {
    use rand::SeedableRng;
    gp.validate()?;
    let num_rare = if gp.rho > 0.0 { gp.num_rare } else { 0 };
    let total = gp.num_frequent + num_rare;
    // factorial(n) as f64 saturates to inf for n >= 35, which is fine here
    let mut perms = 1.0f64;
    for i in 1..=gp.n {
        perms *= i as f64;
        if perms > 1e18 {
            break;
        }
    }
    if (total as f64) > perms {
        return Err(Error::InvalidParameter(format!(
            "cannot draw {total} distinct rankings over n={} items",
            gp.n
        )));
    }

    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(gp.seed);
    let mut rankings: Vec<Ranking> = Vec::with_capacity(total);
    let draw_distinct = |rankings: &mut Vec<Ranking>, count: usize, rng: &mut _| {
        let mut drawn = 0;
        while drawn < count {
            let r = random_ranking(gp.n, rng);
            if gp.allow_merge || !rankings.contains(&r) {
                if !rankings.contains(&r) {
                    rankings.push(r);
                    drawn += 1;
                } else {
                    // merged duplicate: counts toward the requested draws
                    drawn += 1;
                }
            }
        }
    };
    draw_distinct(&mut rankings, gp.num_frequent, &mut rng);
    let actual_frequent = rankings.len();
    draw_distinct(&mut rankings, num_rare, &mut rng);
    let actual_rare = rankings.len() - actual_frequent;

    let freq_probs = symmetric_dirichlet(actual_frequent, gp.cv, &mut rng)?;
    let mut types: Vec<(Ranking, f64)> = rankings
        .iter()
        .take(actual_frequent)
        .cloned()
        .zip(freq_probs.iter().map(|p| p * (1.0 - gp.rho)))
        .collect();
    if actual_rare > 0 {
        let rare_probs = symmetric_dirichlet(actual_rare, gp.cv, &mut rng)?;
        types.extend(
            rankings
                .iter()
                .skip(actual_frequent)
                .cloned()
                .zip(rare_probs.iter().map(|p| p * gp.rho)),
        );
    }
    ChoiceModel::new(gp.n, types, gp.kappa, gp.rho)
}

// ---------------------------------------------------------------------------
// JSON model files
// ---------------------------------------------------------------------------

#[derive(Serialize, Deserialize)]
struct TypeFile {
    ranking: Vec<usize>,
    prob: f64,
}

#[derive(Serialize, Deserialize)]
struct ModelFile {
    n: usize,
    types: Vec<TypeFile>,
    kappa: f64,
    rho: f64,
}

/// Serialize to the on-disk JSON schema (1-based ids).
pub fn model_to_json(m: &ChoiceModel) -> String {
    let file = ModelFile {
        n: m.n(),
        types: m
            .types()
            .iter()
            .map(|(r, p)| TypeFile {
                ranking: r.to_one_based(),
                prob: *p,
            })
            .collect(),
        kappa: m.kappa(),
        rho: m.rho(),
    };
    serde_json::to_string_pretty(&file).expect("model serialization cannot fail")
}

/// Parse and fully validate a model JSON document. Syntax errors carry the
/// offending line; semantic errors name the offending type entry.
pub fn model_from_json(text: &str, origin: &str) -> Result<ChoiceModel> {
    let file: ModelFile = serde_json::from_str(text).map_err(|e| Error::Parse {
        path: origin.to_string(),
        line: e.line(),
        msg: e.to_string(),
    })?;
    let mut types = Vec::with_capacity(file.types.len());
    for (i, t) in file.types.iter().enumerate() {
        let r = Ranking::from_one_based(&t.ranking)
            .map_err(|e| Error::InvalidModel(format!("types[{i}]: {e}")))?;
        types.push((r, t.prob));
    }
    ChoiceModel::new(file.n, types, file.kappa, file.rho)
}

pub fn load_model(path: &std::path::Path) -> Result<ChoiceModel> {
    let text = std::fs::read_to_string(path)?;
    model_from_json(&text, &path.display().to_string())
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    pub(crate) fn fig1_model() -> ChoiceModel {
        // the five equiprobable example types used throughout the module docs
        let orders = [
            [1, 2, 3, 4, 5],
            [1, 2, 3, 5, 4],
            [1, 2, 4, 3, 5],
            [2, 3, 4, 1, 5],
            [2, 4, 1, 3, 5],
        ];
        let types = orders
            .iter()
            .map(|o| (Ranking::from_one_based(o).unwrap(), 0.2))
            .collect();
        ChoiceModel::new(5, types, 0.1, 0.0).unwrap()
    }

    #[test]
    fn choose_picks_highest_ranked() {
        let r = Ranking::from_one_based(&[1, 2, 3, 4, 5]).unwrap();
        let s = ItemSet::from_one_based(&[3, 5]).unwrap();
        assert_eq!(r.choose(s).unwrap(), 2); // item 3

        let r = Ranking::from_one_based(&[2, 4, 1, 3, 5]).unwrap();
        let s = ItemSet::from_one_based(&[1, 3, 5]).unwrap();
        assert_eq!(r.choose(s).unwrap(), 0); // item 1

        assert_eq!(r.choose(ItemSet::singleton(4)).unwrap(), 4);
        assert!(matches!(
            r.choose(ItemSet::EMPTY),
            Err(Error::EmptyAssortment)
        ));
    }

    #[test]
    fn choose_full_universe_is_top_item() {
        let r = Ranking::from_one_based(&[4, 2, 5, 1, 3]).unwrap();
        assert_eq!(r.choose(ItemSet::universe(5)).unwrap(), 3);
    }

    #[test]
    fn ranking_validation() {
        assert!(Ranking::new(vec![0, 1, 1]).is_err());
        assert!(Ranking::new(vec![0, 1, 5]).is_err());
        assert!(Ranking::new(vec![]).is_err());
        let r = Ranking::new(vec![2, 0, 1]).unwrap();
        for (i, &z) in r.order().iter().enumerate() {
            assert_eq!(r.position(z), i);
        }
    }

    #[test]
    fn choice_probability_examples() {
        let m = fig1_model();
        let s12 = ItemSet::from_one_based(&[1, 2]).unwrap();
        assert!((m.choice_probability(s12, 0).unwrap() - 0.6).abs() < 1e-12);
        assert!((m.choice_probability(ItemSet::singleton(3), 3).unwrap() - 1.0).abs() < 1e-12);
        // (1,2,3,5,4) prefers 5 over 4, so q_4({4,5}) = 0.8
        let s45 = ItemSet::from_one_based(&[4, 5]).unwrap();
        assert!((m.choice_probability(s45, 3).unwrap() - 0.8).abs() < 1e-12);
        assert!(m.choice_probability(s45, 0).is_err());
    }

    #[test]
    fn choice_probabilities_normalize() {
        let m = fig1_model();
        for mask in 1..(1u64 << 5) {
            let s = ItemSet(mask);
            let total: f64 = s.iter().map(|z| m.choice_probability(s, z).unwrap()).sum();
            assert!((total - 1.0).abs() < 1e-12, "sum {total} for {s}");
        }
    }

    #[test]
    fn sample_type_frequencies() {
        let r0 = Ranking::from_one_based(&[1, 2, 3]).unwrap();
        let r1 = Ranking::from_one_based(&[2, 1, 3]).unwrap();
        let m = ChoiceModel::new(3, vec![(r0, 0.7), (r1, 0.3)], 0.1, 0.0).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let hits = (0..100_000).filter(|_| m.sample_type(&mut rng) == 0).count();
        let freq = hits as f64 / 100_000.0;
        assert!((freq - 0.7).abs() < 0.01, "freq {freq}");
    }

    #[test]
    fn zero_probability_type_never_sampled() {
        let r0 = Ranking::from_one_based(&[1, 2, 3]).unwrap();
        let r1 = Ranking::from_one_based(&[2, 1, 3]).unwrap();
        let m = ChoiceModel::new(3, vec![(r0, 1.0), (r1, 0.0)], 0.5, 0.0).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..10_000 {
            assert_eq!(m.sample_type(&mut rng), 0);
        }
    }

    #[test]
    fn single_type_always_sampled() {
        let r0 = Ranking::from_one_based(&[1, 2]).unwrap();
        let m = ChoiceModel::new(2, vec![(r0, 1.0)], 0.5, 0.0).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        assert_eq!(m.sample_type(&mut rng), 0);
    }

    #[test]
    fn generator_is_deterministic_and_valid() {
        let gp = GenParams {
            n: 8,
            num_frequent: 5,
            num_rare: 20,
            rho: 0.01,
            cv: 0.1,
            kappa: 0.01,
            seed: 42,
            allow_merge: false,
        };
        let a = generate_model(&gp).unwrap();
        let b = generate_model(&gp).unwrap();
        assert_eq!(a.types().len(), b.types().len());
        for ((ra, pa), (rb, pb)) in a.types().iter().zip(b.types()) {
            assert_eq!(ra, rb);
            assert_eq!(pa, pb);
        }
        assert_eq!(a.types().len(), 25);
        let total: f64 = a.types().iter().map(|(_, p)| p).sum();
        assert!((total - 1.0).abs() < 1e-9);
    }

    #[test]
    fn generator_rho_zero_has_no_rare_types() {
        let gp = GenParams {
            n: 6,
            num_frequent: 4,
            num_rare: 20,
            rho: 0.0,
            cv: 0.1,
            kappa: 0.01,
            seed: 7,
            allow_merge: false,
        };
        let m = generate_model(&gp).unwrap();
        assert_eq!(m.types().len(), 4);
        let mass: f64 = m.types().iter().map(|(_, p)| p).sum();
        assert!((mass - 1.0).abs() < 1e-12);
    }

    #[test]
    fn generator_validity_over_seeds() {
        for seed in 0..100 {
            let gp = GenParams {
                n: 8,
                num_frequent: 5,
                num_rare: 20,
                rho: 0.01,
                cv: 0.1,
                kappa: 0.01,
                seed,
                allow_merge: false,
            };
            // ChoiceModel::new re-validates every invariant
            let m = generate_model(&gp).unwrap();
            let (frequent, _) = m.classify_types();
            assert_eq!(frequent.len(), 5, "seed {seed}");
        }
    }

    #[test]
    fn generator_rejects_impossible_instance() {
        let gp = GenParams {
            n: 2,
            num_frequent: 3,
            num_rare: 0,
            rho: 0.0,
            cv: 0.1,
            kappa: 0.01,
            seed: 0,
            allow_merge: false,
        };
        assert!(generate_model(&gp).is_err());
    }

    #[test]
    fn classify_types_examples() {
        let m = fig1_model();
        let (f, r) = m.classify_types();
        assert_eq!(f.len(), 5);
        assert!(r.is_empty());

        let r0 = Ranking::from_one_based(&[1, 2, 3]).unwrap();
        let r1 = Ranking::from_one_based(&[2, 1, 3]).unwrap();
        let m = ChoiceModel::new(3, vec![(r0, 0.95), (r1, 0.05)], 0.1, 0.1).unwrap();
        let (f, r) = m.classify_types();
        assert_eq!(f, vec![0]);
        assert_eq!(r, vec![1]);
    }

    #[test]
    fn dirichlet_cv_matches_request() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let k = 5;
        let cv = 0.1;
        let mut values = Vec::new();
        for _ in 0..20_000 {
            values.extend(symmetric_dirichlet(k, cv, &mut rng).unwrap());
        }
        let mean: f64 = values.iter().sum::<f64>() / values.len() as f64;
        let var: f64 =
            values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / values.len() as f64;
        let observed_cv = var.sqrt() / mean;
        assert!((mean - 1.0 / k as f64).abs() < 1e-3);
        assert!((observed_cv - cv).abs() < 0.005, "cv {observed_cv}");
    }

    #[test]
    fn model_json_roundtrip_and_errors() {
        let m = fig1_model();
        let text = model_to_json(&m);
        let back = model_from_json(&text, "mem").unwrap();
        assert_eq!(back.n(), 5);
        assert_eq!(back.types().len(), 5);

        let bad = r#"{"n": 3, "types": [{"ranking": [1,1,2], "prob": 1.0}], "kappa": 0.1, "rho": 0.0}"#;
        assert!(model_from_json(bad, "mem").is_err());
        let syntactic = "{\n  \"n\": 3,\n  oops\n}";
        match model_from_json(syntactic, "mem") {
            Err(Error::Parse { line, .. }) => assert_eq!(line, 3),
            other => panic!("expected parse error, got {other:?}"),
        }
    }

    proptest::proptest! {
        #[test]
        fn normalization_and_monotone_nesting(seed in 0u64..500) {
            let gp = GenParams {
                n: 6, num_frequent: 4, num_rare: 3, rho: 0.05,
                cv: 0.1, kappa: 0.05, seed, allow_merge: false,
            };
            let m = generate_model(&gp).unwrap();
            let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0xdead);
            let mask: u64 = rng.gen_range(1..(1u64 << 6));
            let s = ItemSet(mask);
            let total: f64 = s.iter().map(|z| m.choice_probability(s, z).unwrap()).sum();
            proptest::prop_assert!((total - 1.0).abs() < 1e-12);
            // removing competitors never lowers z's share
            for z in s.iter() {
                for x in s.iter().filter(|&x| x != z) {
                    let smaller = s.remove(x);
                    let q_big = m.choice_probability(s, z).unwrap();
                    let q_small = m.choice_probability(smaller, z).unwrap();
                    proptest::prop_assert!(q_big <= q_small + 1e-12);
                }
            }
        }
    }
}

#[cfg(test)]
pub(crate) use tests::fig1_model;
