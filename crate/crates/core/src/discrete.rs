//! Exact discrete Poissonization on small multitype Galton–Watson populations.
//!
//! A `k`-sample draws `k_i` members of type `i` uniformly without replacement
//! (nothing of type `i` if `N_i < k_i`). A Bernoulli `p`-sample keeps each
//! member of type `i` independently with probability `p_i` and lists the kept
//! members in uniformly random order. Mixing the `p`-sample over
//! `π̄^k(dp) = Π_{k_i > 0} k_i p_i^{-1} dp_i` (and `p_i = 0` when `k_i = 0`)
//! and restricting to `S = k` reproduces the `k`-sample on `{N ≥ k}`.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use num::bigint::BigInt;
use num::rational::BigRational;
use num::{One, ToPrimitive, Zero};
use rand::seq::SliceRandom;
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::multi_index::MultiIndex;

pub const DEFAULT_OUTCOME_CAP: usize = 1_000_000;
/// Enumerations up to this many outcomes are checked in exact arithmetic.
pub const EXACT_OUTCOME_LIMIT: usize = 10_000;

/// Exact probability, written in JSON as `"1/3"`, `"0.25"` or an integer.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Prob(pub BigRational);

impl FromStr for Prob {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        let bad = || Error::Config(format!("cannot parse probability {s:?}"));
        if let Some((n, d)) = s.split_once('/') {
            let n: BigInt = n.trim().parse().map_err(|_| bad())?;
            let d: BigInt = d.trim().parse().map_err(|_| bad())?;
            if d.is_zero() {
                return Err(bad());
            }
            return Ok(Prob(BigRational::new(n, d)));
        }
        if let Some((whole, frac)) = s.split_once('.') {
            if frac.is_empty() || !frac.chars().all(|c| c.is_ascii_digit()) {
                return Err(bad());
            }
            let digits: BigInt = format!("{whole}{frac}").parse().map_err(|_| bad())?;
            let scale = num::pow(BigInt::from(10), frac.len());
            return Ok(Prob(BigRational::new(digits, scale)));
        }
        let n: BigInt = s.parse().map_err(|_| bad())?;
        Ok(Prob(BigRational::from_integer(n)))
    }
}

impl fmt::Display for Prob {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

impl Serialize for Prob {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.serialize_str(&self.0.to_string())
    }
}

impl<'de> Deserialize<'de> for Prob {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Repr {
            Int(u64),
            Str(String),
        }
        match Repr::deserialize(d)? {
            Repr::Int(n) => Ok(Prob(BigRational::from_integer(n.into()))),
            Repr::Str(s) => s.parse().map_err(serde::de::Error::custom),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OffspringOutcome {
    pub prob: Prob,
    /// Number of children of each type.
    pub children: Vec<u32>,
}

/// Multitype Galton–Watson model run for a fixed number of generations.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GwModel {
    pub d: usize,
    /// `offspring[i]`: law of the children of a type-`i` individual.
    pub offspring: Vec<Vec<OffspringOutcome>>,
    pub generations: usize,
    pub initial: Vec<u32>,
}

impl GwModel {
    pub fn from_json(text: &str) -> Result<Self> {
        let m: GwModel = serde_json::from_str(text)?;
        m.validate()?;
        Ok(m)
    }

    /// A fixed population of census `n`, with no generations.
    pub fn fixed(n: &[u32]) -> Self {
        let d = n.len();
        Self {
            d,
            offspring: (0..d)
                .map(|i| {
                    vec![OffspringOutcome {
                        prob: Prob(BigRational::one()),
                        children: MultiIndex::unit(d, i).entries().to_vec(),
                    }]
                })
                .collect(),
            generations: 0,
            initial: n.to_vec(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.d == 0 || self.offspring.len() != self.d || self.initial.len() != self.d {
            return Err(Error::Config("offspring and initial census must have d entries".into()));
        }
        for (i, law) in self.offspring.iter().enumerate() {
            if law.is_empty() {
                return Err(Error::Config(format!("type {} has an empty offspring law", i + 1)));
            }
            let mut total = BigRational::zero();
            for o in law {
                if o.children.len() != self.d {
                    return Err(Error::Config("offspring vectors must have d entries".into()));
                }
                if o.prob.0 <= BigRational::zero() || o.prob.0 > BigRational::one() {
                    return Err(Error::Config(format!("probability {} outside (0, 1]", o.prob)));
                }
                total += &o.prob.0;
            }
            if !total.is_one() {
                return Err(Error::Config(format!(
                    "offspring law of type {} sums to {total}, not 1",
                    i + 1
                )));
            }
        }
        Ok(())
    }

    /// Mean offspring matrix `M[i][j] = E[children of type j | parent type i]`.
    pub fn mean_matrix(&self) -> Vec<Vec<BigRational>> {
        self.offspring
            .iter()
            .map(|law| {
                (0..self.d)
                    .map(|j| {
                        law.iter()
                            .map(|o| &o.prob.0 * BigRational::from_integer(o.children[j].into()))
                            .fold(BigRational::zero(), |a, b| a + b)
                    })
                    .collect()
            })
            .collect()
    }
}

/// One individual of a genealogy: its type and parent in the previous
/// generation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct Individual {
    pub ty: usize,
    pub parent: Option<usize>,
}

/// Final population with its full genealogy.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DiscretePopulation {
    pub generations: Vec<Vec<Individual>>,
    /// Members of each type: indices into the last generation, in birth order.
    pub members: Vec<Vec<usize>>,
}

impl DiscretePopulation {
    pub fn from_generations(d: usize, generations: Vec<Vec<Individual>>) -> Self {
        let last = generations.last().expect("at least one generation");
        let mut members = vec![Vec::new(); d];
        for (idx, ind) in last.iter().enumerate() {
            members[ind.ty].push(idx);
        }
        Self { generations, members }
    }

    pub fn census(&self) -> MultiIndex {
        MultiIndex::from(self.members.iter().map(|m| m.len() as u32).collect::<Vec<_>>())
    }

    /// Index of the generation-`g` ancestor of final individual `idx`.
    pub fn ancestor(&self, idx: usize, g: usize) -> usize {
        let mut cur = idx;
        for level in (g + 1..self.generations.len()).rev() {
            cur = self.generations[level][cur].parent.expect("non-root individuals have parents");
        }
        cur
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GwOutcome {
    #[serde(serialize_with = "ser_rational")]
    pub prob: BigRational,
    pub population: DiscretePopulation,
}

fn ser_rational<S: serde::Serializer>(r: &BigRational, s: S) -> std::result::Result<S::Ok, S::Error> {
    s.serialize_str(&r.to_string())
}

/// Every genealogy of the model with its exact probability.
pub fn enumerate_outcomes(model: &GwModel, cap: usize) -> Result<Vec<GwOutcome>> {
    model.validate()?;
    let mut first = Vec::new();
    for (i, &n) in model.initial.iter().enumerate() {
        for _ in 0..n {
            first.push(Individual { ty: i, parent: None });
        }
    }
    let mut partial: Vec<(BigRational, Vec<Vec<Individual>>)> = vec![(BigRational::one(), vec![first])];
    for _ in 0..model.generations {
        let mut next = Vec::new();
        for (prob, gens) in partial {
            let parents = gens.last().expect("non-empty").clone();
            // odometer over one offspring choice per parent
            let mut choice = vec![0usize; parents.len()];
            loop {
                let mut p = prob.clone();
                let mut kids = Vec::new();
                for (pi, parent) in parents.iter().enumerate() {
                    let o = &model.offspring[parent.ty][choice[pi]];
                    p *= &o.prob.0;
                    for (j, &c) in o.children.iter().enumerate() {
                        for _ in 0..c {
                            kids.push(Individual { ty: j, parent: Some(pi) });
                        }
                    }
                }
                let mut g = gens.clone();
                g.push(kids);
                next.push((p, g));
                if next.len() > cap {
                    return Err(Error::SizeCap {
                        what: "genealogical outcomes",
                        needed: next.len() as f64,
                        cap: cap as f64,
                    });
                }
                let mut pos = 0;
                loop {
                    if pos == parents.len() {
                        break;
                    }
                    choice[pos] += 1;
                    if choice[pos] < model.offspring[parents[pos].ty].len() {
                        break;
                    }
                    choice[pos] = 0;
                    pos += 1;
                }
                if pos == parents.len() {
                    break;
                }
            }
        }
        partial = next;
    }
    Ok(partial
        .into_iter()
        .map(|(prob, gens)| GwOutcome {
            prob,
            population: DiscretePopulation::from_generations(model.d, gens),
        })
        .collect())
}

/// Law of the final census.
pub fn enumerate_population_law(model: &GwModel, cap: usize) -> Result<BTreeMap<Vec<u32>, BigRational>> {
    let mut law = BTreeMap::new();
    for o in enumerate_outcomes(model, cap)? {
        *law.entry(o.population.census().entries().to_vec())
            .or_insert_with(BigRational::zero) += o.prob;
    }
    Ok(law)
}

/// Events on (population, ordered sample). Types and members are 0-based here
/// and 1-based in the textual form.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum DiscreteEvent {
    Full,
    /// The first sampled member of type `ty` is the `member`-th of its type.
    FirstSampleIs { ty: usize, member: usize },
    /// The `member`-th individual of type `ty` is in the sample.
    Contains { ty: usize, member: usize },
    /// All sampled individuals share one ancestor in generation `generation`.
    SameAncestor { generation: usize },
}

impl DiscreteEvent {
    /// `full`, `first:T:M`, `contains:T:M`, `same-ancestor:G`.
    pub fn parse(s: &str) -> Result<Self> {
        let parts: Vec<&str> = s.trim().split(':').collect();
        let num = |p: &str| -> Result<usize> {
            p.parse::<usize>().map_err(|_| Error::Config(format!("bad number {p:?} in event {s:?}")))
        };
        let one_based = |p: &str| -> Result<usize> {
            let v = num(p)?;
            v.checked_sub(1).ok_or_else(|| Error::Config(format!("event {s:?}: indices start at 1")))
        };
        match parts.as_slice() {
            ["full"] => Ok(Self::Full),
            ["first", t, m] => Ok(Self::FirstSampleIs { ty: one_based(t)?, member: one_based(m)? }),
            ["contains", t, m] => Ok(Self::Contains { ty: one_based(t)?, member: one_based(m)? }),
            ["same-ancestor", g] => Ok(Self::SameAncestor { generation: num(g)? }),
            _ => Err(Error::Config(format!("unknown event {s:?}"))),
        }
    }

    pub fn holds(&self, pop: &DiscretePopulation, sample: &[Vec<usize>]) -> bool {
        match *self {
            Self::Full => true,
            Self::FirstSampleIs { ty, member } => sample.get(ty).and_then(|s| s.first()) == Some(&member),
            Self::Contains { ty, member } => sample.get(ty).is_some_and(|s| s.contains(&member)),
            Self::SameAncestor { generation } => {
                let mut anc = None;
                for (i, s) in sample.iter().enumerate() {
                    for &pos in s {
                        let a = pop.ancestor(pop.members[i][pos], generation);
                        match anc {
                            None => anc = Some(a),
                            Some(b) if b != a => return false,
                            _ => {}
                        }
                    }
                }
                true
            }
        }
    }

    /// Exchangeable events do not depend on the order of the sample.
    pub fn is_exchangeable(&self) -> bool {
        !matches!(self, Self::FirstSampleIs { .. })
    }
}

impl fmt::Display for DiscreteEvent {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match *self {
            Self::Full => write!(f, "full"),
            Self::FirstSampleIs { ty, member } => write!(f, "first:{}:{}", ty + 1, member + 1),
            Self::Contains { ty, member } => write!(f, "contains:{}:{}", ty + 1, member + 1),
            Self::SameAncestor { generation } => write!(f, "same-ancestor:{generation}"),
        }
    }
}

/// Calls `f` on every ordered `k`-tuple of distinct elements of `0..n`.
fn for_each_ordered(n: usize, k: usize, f: &mut dyn FnMut(&[usize])) {
    fn rec(n: usize, k: usize, used: &mut Vec<bool>, cur: &mut Vec<usize>, f: &mut dyn FnMut(&[usize])) {
        if cur.len() == k {
            f(cur);
            return;
        }
        for v in 0..n {
            if !used[v] {
                used[v] = true;
                cur.push(v);
                rec(n, k, used, cur, f);
                cur.pop();
                used[v] = false;
            }
        }
    }
    rec(n, k, &mut vec![false; n], &mut Vec::with_capacity(k), f);
}

/// Calls `f` on every increasing `k`-subset of `0..n`.
fn for_each_subset(n: usize, k: usize, f: &mut dyn FnMut(&[usize])) {
    fn rec(start: usize, n: usize, k: usize, cur: &mut Vec<usize>, f: &mut dyn FnMut(&[usize])) {
        if cur.len() == k {
            f(cur);
            return;
        }
        for v in start..n {
            cur.push(v);
            rec(v + 1, n, k, cur, f);
            cur.pop();
        }
    }
    rec(0, n, k, &mut Vec::with_capacity(k), f);
}

fn permutations(items: &[usize], f: &mut dyn FnMut(&[usize])) {
    for_each_ordered(items.len(), items.len(), &mut |perm| {
        let v: Vec<usize> = perm.iter().map(|&p| items[p]).collect();
        f(&v);
    });
}

/// Product over types of per-type enumerations, with the sample assembled
/// type by type.
fn for_each_product(
    per_type: &[Vec<Vec<usize>>],
    cur: &mut Vec<Vec<usize>>,
    f: &mut dyn FnMut(&[Vec<usize>]),
) {
    let i = cur.len();
    if i == per_type.len() {
        f(cur);
        return;
    }
    for choice in &per_type[i] {
        cur.push(choice.clone());
        for_each_product(per_type, cur, f);
        cur.pop();
    }
}

fn falling(n: u32, k: u32) -> u128 {
    (0..k).map(|j| u128::from(n - j)).product()
}

/// `ℙ^k(A, N ≥ k | population)`: uniform ordered draws without replacement.
pub fn k_sample_probability(pop: &DiscretePopulation, k: &MultiIndex, event: &DiscreteEvent) -> BigRational {
    let n = pop.census();
    if !k.le(&n) {
        return BigRational::zero();
    }
    let per_type: Vec<Vec<Vec<usize>>> = (0..k.dim())
        .map(|i| {
            let mut v = Vec::new();
            for_each_ordered(n.get(i) as usize, k.get(i) as usize, &mut |t| v.push(t.to_vec()));
            v
        })
        .collect();
    let mut hits: u128 = 0;
    for_each_product(&per_type, &mut Vec::new(), &mut |s| {
        if event.holds(pop, s) {
            hits += 1;
        }
    });
    let total: u128 = (0..k.dim()).map(|i| falling(n.get(i), k.get(i))).product();
    BigRational::new(BigInt::from(hits), BigInt::from(total))
}

/// `∫ π̄^k(dp) p^k (1-p)^{N-k}` for one type: the beta integral
/// `k B(k, N-k+1) = k! (N-k)! / N!`, and 1 when `k = 0`.
pub fn beta_weight(n: u32, k: u32) -> BigRational {
    if k == 0 {
        return BigRational::one();
    }
    if k > n {
        return BigRational::zero();
    }
    let kf: u128 = (1..=u128::from(k)).product();
    BigRational::new(BigInt::from(kf), BigInt::from(falling(n, k)))
}

/// `∫ π̄^k(dp) ℚ^p(A, S = k | population)`: a sum over `p`-samples of size
/// exactly `k` (every subset, in every order with probability `1/k!`) with
/// the `p`-integral done in closed form.
pub fn p_sample_mixture(pop: &DiscretePopulation, k: &MultiIndex, event: &DiscreteEvent) -> BigRational {
    let n = pop.census();
    let mut weight = BigRational::one();
    let mut orders: u128 = 1;
    for i in 0..k.dim() {
        weight *= beta_weight(n.get(i), k.get(i));
        orders *= (1..=u128::from(k.get(i))).product::<u128>();
    }
    if weight.is_zero() {
        return weight;
    }
    let per_type: Vec<Vec<Vec<usize>>> = (0..k.dim())
        .map(|i| {
            let mut v = Vec::new();
            for_each_subset(n.get(i) as usize, k.get(i) as usize, &mut |s| v.push(s.to_vec()));
            v
        })
        .collect();
    let mut hits: u128 = 0;
    for_each_product(&per_type, &mut Vec::new(), &mut |subsets| {
        let ordered: Vec<Vec<Vec<usize>>> = subsets
            .iter()
            .map(|s| {
                let mut v = Vec::new();
                permutations(s, &mut |p| v.push(p.to_vec()));
                v
            })
            .collect();
        for_each_product(&ordered, &mut Vec::new(), &mut |sample| {
            if event.holds(pop, sample) {
                hits += 1;
            }
        });
    });
    weight * BigRational::new(BigInt::from(hits), BigInt::from(orders))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Arithmetic {
    Exact,
    Float,
}

impl fmt::Display for Arithmetic {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::Exact => "exact",
            Self::Float => "float",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct IdentityRow {
    pub event: String,
    pub lhs: f64,
    pub rhs: f64,
    pub gap: f64,
    pub mode: Arithmetic,
    /// Exact values, when computed exactly.
    pub lhs_exact: Option<String>,
    pub rhs_exact: Option<String>,
}

impl IdentityRow {
    pub fn holds(&self) -> bool {
        match self.mode {
            Arithmetic::Exact => self.lhs_exact == self.rhs_exact,
            Arithmetic::Float => self.gap <= 1e-12,
        }
    }
}

/// Both sides of the discrete identity for each event, summed over the
/// genealogies of `model`.
pub fn bernoulli_identity_check(
    model: &GwModel,
    k: &MultiIndex,
    events: &[DiscreteEvent],
    cap: usize,
) -> Result<Vec<IdentityRow>> {
    if k.dim() != model.d {
        return Err(Error::Contract("k must have d entries".into()));
    }
    for e in events {
        if let DiscreteEvent::SameAncestor { generation } = e {
            if *generation > model.generations {
                return Err(Error::Config(format!("event {e}: the model has {} generations", model.generations)));
            }
        }
    }
    let outcomes = enumerate_outcomes(model, cap)?;
    let mode = if outcomes.len() <= EXACT_OUTCOME_LIMIT {
        Arithmetic::Exact
    } else {
        Arithmetic::Float
    };
    let mut rows = Vec::with_capacity(events.len());
    for e in events {
        let (lhs, rhs, exact) = match mode {
            Arithmetic::Exact => {
                let mut l = BigRational::zero();
                let mut r = BigRational::zero();
                for o in &outcomes {
                    l += &o.prob * k_sample_probability(&o.population, k, e);
                    r += &o.prob * p_sample_mixture(&o.population, k, e);
                }
                let lf = l.to_f64().unwrap_or(f64::NAN);
                let rf = r.to_f64().unwrap_or(f64::NAN);
                (lf, rf, Some((l.to_string(), r.to_string())))
            }
            Arithmetic::Float => {
                let (mut l, mut r) = (0.0, 0.0);
                for o in &outcomes {
                    let p = o.prob.to_f64().unwrap_or(f64::NAN);
                    l += p * k_sample_probability(&o.population, k, e).to_f64().unwrap_or(f64::NAN);
                    r += p * p_sample_mixture(&o.population, k, e).to_f64().unwrap_or(f64::NAN);
                }
                (l, r, None)
            }
        };
        let (lhs_exact, rhs_exact) = match exact {
            Some((a, b)) => (Some(a), Some(b)),
            None => (None, None),
        };
        rows.push(IdentityRow {
            event: e.to_string(),
            lhs,
            rhs,
            gap: (lhs - rhs).abs(),
            mode,
            lhs_exact,
            rhs_exact,
        });
    }
    Ok(rows)
}

/// `ℚ^p(A | population, S = k)` at a fixed `p`, summing over every Bernoulli
/// outcome of every size; `None` when `ℚ^p(S = k) = 0`.
pub fn p_sample_conditional(
    pop: &DiscretePopulation,
    k: &MultiIndex,
    p: &[BigRational],
    event: &DiscreteEvent,
) -> Option<BigRational> {
    let n = pop.census();
    let d = k.dim();
    let mut joint = BigRational::zero();
    let mut marginal = BigRational::zero();
    // every inclusion pattern, type by type
    let per_type: Vec<Vec<Vec<usize>>> = (0..d)
        .map(|i| {
            let mut v = Vec::new();
            for size in 0..=n.get(i) as usize {
                for_each_subset(n.get(i) as usize, size, &mut |s| v.push(s.to_vec()));
            }
            v
        })
        .collect();
    for_each_product(&per_type, &mut Vec::new(), &mut |subsets| {
        let mut w = BigRational::one();
        for i in 0..d {
            let kept = subsets[i].len() as i32;
            let dropped = n.get(i) as i32 - kept;
            w *= num::pow::pow(p[i].clone(), kept as usize)
                * num::pow::pow(BigRational::one() - &p[i], dropped as usize);
        }
        if subsets.iter().enumerate().any(|(i, s)| s.len() as u32 != k.get(i)) {
            return;
        }
        marginal += &w;
        let ordered: Vec<Vec<Vec<usize>>> = subsets
            .iter()
            .map(|s| {
                let mut v = Vec::new();
                permutations(s, &mut |q| v.push(q.to_vec()));
                v
            })
            .collect();
        let orders: usize = ordered.iter().map(Vec::len).product();
        let mut hits = 0usize;
        for_each_product(&ordered, &mut Vec::new(), &mut |sample| {
            if event.holds(pop, sample) {
                hits += 1;
            }
        });
        joint += w * BigRational::new(BigInt::from(hits), BigInt::from(orders));
    });
    if marginal.is_zero() {
        None
    } else {
        Some(joint / marginal)
    }
}

/// Uniform ordered sample without replacement; type `i` is empty when
/// `N_i < k_i`. Entries are positions within each type.
pub fn sample_k(pop: &DiscretePopulation, k: &MultiIndex, rng: &mut ChaCha8Rng) -> Vec<Vec<usize>> {
    pop.members
        .iter()
        .enumerate()
        .map(|(i, m)| {
            let ki = k.get(i) as usize;
            if m.len() < ki {
                return Vec::new();
            }
            rand::seq::index::sample(rng, m.len(), ki).into_vec()
        })
        .collect()
}

/// Independent inclusion with probability `p_i`, then a uniform shuffle.
pub fn sample_p(pop: &DiscretePopulation, p: &[f64], rng: &mut ChaCha8Rng) -> Vec<Vec<usize>> {
    pop.members
        .iter()
        .enumerate()
        .map(|(i, m)| {
            let mut kept: Vec<usize> = (0..m.len()).filter(|_| rng.random::<f64>() < p[i]).collect();
            kept.shuffle(rng);
            kept
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn q(s: &str) -> BigRational {
        s.parse::<Prob>().unwrap().0
    }

    fn binary(p: &str) -> GwModel {
        let mut m = GwModel::fixed(&[1]);
        m.offspring[0] = vec![
            OffspringOutcome { prob: Prob(q(p)), children: vec![2] },
            OffspringOutcome { prob: Prob(BigRational::one() - q(p)), children: vec![0] },
        ];
        m.generations = 1;
        m
    }

    #[test]
    fn parses_probabilities() {
        assert_eq!(q("1/3"), BigRational::new(1.into(), 3.into()));
        assert_eq!(q("0.25"), BigRational::new(1.into(), 4.into()));
        assert_eq!(q("1"), BigRational::one());
        assert!("1/0".parse::<Prob>().is_err());
        assert!("x".parse::<Prob>().is_err());
    }

    #[test]
    fn deterministic_chain() {
        let mut m = GwModel::fixed(&[1]);
        m.generations = 2;
        let out = enumerate_outcomes(&m, DEFAULT_OUTCOME_CAP).unwrap();
        assert_eq!(out.len(), 1);
        assert!(out[0].prob.is_one());
    }

    #[test]
    fn binary_split_or_die() {
        let law = enumerate_population_law(&binary("1/2"), DEFAULT_OUTCOME_CAP).unwrap();
        assert_eq!(law.len(), 2);
        assert_eq!(law[&vec![2]], q("1/2"));
        assert_eq!(law[&vec![0]], q("1/2"));
    }

    #[test]
    fn fixed_population_examples() {
        let m = GwModel::fixed(&[3]);
        let rows = bernoulli_identity_check(&m, &MultiIndex::from(vec![2]), &[DiscreteEvent::Full], 100).unwrap();
        assert_eq!(rows[0].lhs_exact.as_deref(), Some("1"));
        assert!(rows[0].holds());

        let m = GwModel::fixed(&[4]);
        let ev = DiscreteEvent::FirstSampleIs { ty: 0, member: 2 };
        let rows = bernoulli_identity_check(&m, &MultiIndex::from(vec![1]), &[ev], 100).unwrap();
        assert_eq!(rows[0].lhs_exact.as_deref(), Some("1/4"));
        assert_eq!(rows[0].rhs_exact.as_deref(), Some("1/4"));
    }

    #[test]
    fn empty_sample_sees_only_the_population() {
        let m = binary("1/3");
        let rows = bernoulli_identity_check(
            &m,
            &MultiIndex::from(vec![0]),
            &[DiscreteEvent::Full, DiscreteEvent::SameAncestor { generation: 0 }],
            100,
        )
        .unwrap();
        for r in rows {
            assert_eq!(r.lhs_exact.as_deref(), Some("1"));
            assert!(r.holds());
        }
    }

    #[test]
    fn cap_is_enforced() {
        let mut m = binary("1/2");
        m.generations = 4;
        assert!(matches!(enumerate_outcomes(&m, 10), Err(Error::SizeCap { .. })));
    }

    #[test]
    fn rejects_bad_laws() {
        let mut m = binary("1/2");
        m.offspring[0][0].prob = Prob(q("2/3"));
        assert!(m.validate().is_err());
        assert!(DiscreteEvent::parse("first:0:1").is_err());
        assert_eq!(DiscreteEvent::parse("contains:2:3").unwrap(), DiscreteEvent::Contains { ty: 1, member: 2 });
    }
}
