//! Labelled ancestral forests `ℍ^k(m)` and their energies.
//!
//! A forest has generations `0..=m`. Generation `m` holds the `|k|` leaves,
//! one per sample label `(i, j)`; every earlier generation is a coarsening
//! of the next one, and every internal vertex carries a free type. Vertices
//! inside a generation are ordered by their smallest leaf label, which makes
//! the representation canonical.

use std::fmt;

use crate::error::{Error, Result};
use crate::jet::JetSpace;
use crate::laplace::{solve_u, solve_u_with, LaplaceSolution};
use crate::mechanism::BranchingMechanism;
use crate::multi_index::MultiIndex;
use crate::ode::OdeOptions;

pub const DEFAULT_FOREST_CAP: u128 = 1_000_000;

#[derive(Clone, PartialEq, Eq, Hash)]
pub struct LabeledForest {
    k: MultiIndex,
    /// `parents[ℓ][v]`: index in generation `ℓ` of the parent of vertex `v`
    /// of generation `ℓ + 1`.
    parents: Vec<Vec<usize>>,
    /// `types[ℓ][v]` for every generation `ℓ <= m` (0-based types).
    types: Vec<Vec<usize>>,
}

/// Sample label `(type, j)` with 0-based entries.
pub type LeafLabel = (usize, usize);

fn leaf_labels(k: &MultiIndex) -> Vec<LeafLabel> {
    let mut out = Vec::with_capacity(k.total() as usize);
    for (i, &ki) in k.entries().iter().enumerate() {
        for j in 0..ki as usize {
            out.push((i, j));
        }
    }
    out
}

impl LabeledForest {
    pub fn sample_size(&self) -> &MultiIndex {
        &self.k
    }

    pub fn dim(&self) -> usize {
        self.k.dim()
    }

    /// Number of generations below the roots.
    pub fn depth(&self) -> usize {
        self.parents.len()
    }

    pub fn generation_size(&self, level: usize) -> usize {
        self.types[level].len()
    }

    pub fn parents(&self, level: usize) -> &[usize] {
        &self.parents[level]
    }

    pub fn types(&self, level: usize) -> &[usize] {
        &self.types[level]
    }

    /// The label `φ(v)` of leaf `v`.
    pub fn leaf_labels(&self) -> Vec<LeafLabel> {
        leaf_labels(&self.k)
    }

    /// The trivial forest: every leaf sits on its own stick.
    pub fn trivial(k: &MultiIndex, m: usize) -> Result<Self> {
        check_shape(k, m)?;
        let leaves = leaf_labels(k);
        let n = leaves.len();
        let types = vec![leaves.iter().map(|l| l.0).collect::<Vec<_>>(); m + 1];
        Ok(Self {
            k: k.clone(),
            parents: vec![(0..n).collect(); m],
            types,
        })
    }

    /// One generation, one non-stick tree rooted in type `c` whose leaves are
    /// the first `α_i` labels of each type; all other leaves are sticks.
    pub fn single_event(k: &MultiIndex, c: usize, alpha: &MultiIndex) -> Result<Self> {
        check_shape(k, 1)?;
        if alpha.dim() != k.dim() || !alpha.le(k) || alpha.is_zero() {
            return Err(Error::Contract(format!("need 0 < α <= k, got α = {alpha}, k = {k}")));
        }
        if alpha.is_unit(c) {
            return Err(Error::Contract("α = e_c gives a stick, not a merger".into()));
        }
        if c >= k.dim() {
            return Err(Error::Contract(format!("type {c} out of range")));
        }
        let leaves = leaf_labels(k);
        let mut parents = Vec::with_capacity(leaves.len());
        let mut root_types = Vec::new();
        let mut tree_root = None;
        for &(i, j) in &leaves {
            if (j as u32) < alpha.get(i) {
                let r = *tree_root.get_or_insert_with(|| {
                    root_types.push(c);
                    root_types.len() - 1
                });
                parents.push(r);
            } else {
                root_types.push(i);
                parents.push(root_types.len() - 1);
            }
        }
        Ok(Self {
            k: k.clone(),
            parents: vec![parents],
            types: vec![root_types, leaves.iter().map(|l| l.0).collect()],
        })
    }

    /// Children of every vertex in generation `level`.
    fn children(&self, level: usize) -> Vec<Vec<usize>> {
        let mut out = vec![Vec::new(); self.generation_size(level)];
        for (v, &p) in self.parents[level].iter().enumerate() {
            out[p].push(v);
        }
        out
    }

    pub fn stats(&self) -> ForestStats {
        let d = self.dim();
        let mut rootdegree = vec![0u32; d];
        for &t in &self.types[0] {
            rootdegree[t] += 1;
        }
        let mut outdegrees = Vec::with_capacity(self.depth());
        for level in 0..self.depth() {
            let mut mus = vec![vec![0u32; d]; self.generation_size(level)];
            for (v, &p) in self.parents[level].iter().enumerate() {
                mus[p][self.types[level + 1][v]] += 1;
            }
            outdegrees.push(mus.into_iter().map(MultiIndex::from).collect());
        }
        ForestStats {
            rootdegree: MultiIndex::from(rootdegree),
            outdegrees,
        }
    }

    /// Checks every structural invariant of `ℍ^k(m)`.
    pub fn validate(&self) -> Result<()> {
        let m = self.depth();
        let leaves = leaf_labels(&self.k);
        if self.types.len() != m + 1 || self.types[m].len() != leaves.len() {
            return Err(Error::Contract("leaf generation does not match k".into()));
        }
        for (v, &(i, _)) in leaves.iter().enumerate() {
            if self.types[m][v] != i {
                return Err(Error::Contract(format!("leaf {v} type differs from its label")));
            }
        }
        for level in 0..m {
            if self.parents[level].len() != self.types[level + 1].len() {
                return Err(Error::Contract(format!("generation {} parent list has the wrong length", level + 1)));
            }
            let children = self.children(level);
            if children.iter().any(Vec::is_empty) {
                return Err(Error::Contract(format!("generation {level} has a vertex without children")));
            }
            if self.types[level].iter().any(|&t| t >= self.dim()) {
                return Err(Error::Contract("type out of range".into()));
            }
        }
        Ok(())
    }

    /// `g1:0,0 g2:0,1 | g0:1 g1:1,1 | 1.1,1.2` (parents 0-based; types and
    /// labels 1-based).
    pub fn to_line(&self) -> String {
        let mut s = String::new();
        for (level, ps) in self.parents.iter().enumerate() {
            if level > 0 {
                s.push(' ');
            }
            s.push_str(&format!("g{}:{}", level + 1, join(ps.iter().map(|p| p.to_string()))));
        }
        s.push_str(" | ");
        let internal: Vec<String> = (0..self.depth())
            .map(|level| {
                format!(
                    "g{level}:{}",
                    join(self.types[level].iter().map(|t| (t + 1).to_string()))
                )
            })
            .collect();
        s.push_str(&internal.join(" "));
        s.push_str(" | ");
        s.push_str(&join(
            leaf_labels(&self.k)
                .iter()
                .map(|(i, j)| format!("{}.{}", i + 1, j + 1)),
        ));
        s
    }
}

fn join<I: Iterator<Item = String>>(it: I) -> String {
    it.collect::<Vec<_>>().join(",")
}

impl fmt::Debug for LabeledForest {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.to_line())
    }
}

impl fmt::Display for LabeledForest {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.to_line())
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ForestStats {
    /// Type census of the roots.
    pub rootdegree: MultiIndex,
    /// `outdegrees[ℓ][v]`: type census of the children of vertex `v` in generation `ℓ`.
    pub outdegrees: Vec<Vec<MultiIndex>>,
}

impl ForestStats {
    pub fn max_outdegree(&self) -> u32 {
        self.outdegrees
            .iter()
            .flatten()
            .map(MultiIndex::total)
            .max()
            .unwrap_or(0)
    }
}

fn check_shape(k: &MultiIndex, m: usize) -> Result<()> {
    if k.is_zero() {
        return Err(Error::Contract("k must be nonzero".into()));
    }
    if m == 0 {
        return Err(Error::Contract("m must be >= 1".into()));
    }
    Ok(())
}

/// Stirling numbers of the second kind `S(n, b)` for `b <= n <= max`.
fn stirling2(max: usize) -> Vec<Vec<u128>> {
    let mut s = vec![vec![0u128; max + 1]; max + 1];
    s[0][0] = 1;
    for n in 1..=max {
        for b in 1..=n {
            s[n][b] = (b as u128) * s[n - 1][b] + s[n - 1][b - 1];
        }
    }
    s
}

/// `|ℍ^k(m)|` in `d` types: `count_L(n) = Σ_b S(n, b) d^b count_{L-1}(b)`.
pub fn count_forests(k: &MultiIndex, m: usize, d: usize) -> Result<u128> {
    check_shape(k, m)?;
    if k.dim() != d {
        return Err(Error::Contract(format!("k has dimension {}, expected {d}", k.dim())));
    }
    let n = k.total() as usize;
    let s = stirling2(n);
    let mut count = vec![1u128; n + 1];
    for _ in 0..m {
        let mut next = vec![0u128; n + 1];
        for (size, slot) in next.iter_mut().enumerate() {
            let mut acc = 0u128;
            for b in 1..=size {
                let term = s[size][b]
                    .saturating_mul((d as u128).saturating_pow(b as u32))
                    .saturating_mul(count[b]);
                acc = acc.saturating_add(term);
            }
            *slot = acc;
        }
        count = next;
    }
    Ok(count[n])
}

/// Next restricted growth string in lexicographic order.
fn next_rgs(a: &mut [usize]) -> bool {
    let n = a.len();
    if n <= 1 {
        return false;
    }
    let mut prefix_max = vec![0usize; n];
    for i in 1..n {
        prefix_max[i] = prefix_max[i - 1].max(a[i - 1]);
    }
    for i in (1..n).rev() {
        if a[i] <= prefix_max[i] {
            a[i] += 1;
            for v in &mut a[i + 1..] {
                *v = 0;
            }
            return true;
        }
    }
    false
}

/// Streams `ℍ^k(m)` in canonical order: the finest partition level changes
/// slowest, internal-vertex types fastest.
pub struct ForestEnumerator {
    d: usize,
    current: LabeledForest,
    started: bool,
    done: bool,
}

impl ForestEnumerator {
    pub fn new(k: &MultiIndex, m: usize, d: usize, cap: u128) -> Result<Self> {
        let total = count_forests(k, m, d)?;
        if total > cap {
            return Err(Error::SizeCap {
                what: "forest enumeration",
                needed: total as f64,
                cap: cap as f64,
            });
        }
        let leaves = leaf_labels(k);
        let mut current = LabeledForest {
            k: k.clone(),
            parents: vec![Vec::new(); m],
            types: vec![Vec::new(); m + 1],
        };
        current.types[m] = leaves.iter().map(|l| l.0).collect();
        let mut e = Self {
            d,
            current,
            started: false,
            done: false,
        };
        e.reset_levels_below(m);
        Ok(e)
    }

    /// Coarsest chain (single block) on every level `< top`, all types zero.
    fn reset_levels_below(&mut self, top: usize) {
        for level in (0..top).rev() {
            let n_children = self.current.types[level + 1].len();
            self.current.parents[level] = vec![0; n_children];
            self.current.types[level] = vec![0; 1];
        }
        self.reset_types();
    }

    fn reset_types(&mut self) {
        let m = self.current.depth();
        for level in 0..m {
            let n = self.current.parents[level].iter().max().map_or(0, |&x| x + 1);
            self.current.types[level] = vec![0; n];
        }
    }

    fn advance_types(&mut self) -> bool {
        let m = self.current.depth();
        for level in (0..m).rev() {
            for t in self.current.types[level].iter_mut().rev() {
                if *t + 1 < self.d {
                    *t += 1;
                    return true;
                }
                *t = 0;
            }
        }
        false
    }

    fn advance_partitions(&mut self) -> bool {
        let m = self.current.depth();
        for level in 0..m {
            if next_rgs(&mut self.current.parents[level]) {
                let n = self.current.parents[level].iter().max().map_or(0, |&x| x + 1);
                self.current.types[level] = vec![0; n];
                self.reset_levels_below(level);
                return true;
            }
        }
        false
    }

    /// Moves to the next forest; `false` once the space is exhausted.
    pub fn advance(&mut self) -> bool {
        if self.done {
            return false;
        }
        if !self.started {
            self.started = true;
            return true;
        }
        if self.advance_types() || self.advance_partitions() {
            return true;
        }
        self.done = true;
        false
    }

    pub fn current(&self) -> &LabeledForest {
        &self.current
    }
}

impl Iterator for ForestEnumerator {
    type Item = LabeledForest;

    fn next(&mut self) -> Option<LabeledForest> {
        if self.advance() {
            Some(self.current.clone())
        } else {
            None
        }
    }
}

pub fn enumerate_forests(k: &MultiIndex, m: usize, d: usize) -> Result<ForestEnumerator> {
    ForestEnumerator::new(k, m, d, DEFAULT_FOREST_CAP)
}

/// Jets of `u(Δt_ℓ, ·)` at `θ_ℓ = u(T - t_{ℓ+1}, λ)` for every mesh level.
#[derive(Debug, Clone)]
pub struct MeshJets {
    mesh: Vec<f64>,
    lambda: Vec<f64>,
    levels: Vec<LaplaceSolution>,
}

impl MeshJets {
    pub fn new(mech: &BranchingMechanism, mesh: &[f64], lambda: &[f64], degree: u32) -> Result<Self> {
        Self::with_options(mech, mesh, lambda, degree, &OdeOptions::default())
    }

    pub fn with_options(
        mech: &BranchingMechanism,
        mesh: &[f64],
        lambda: &[f64],
        degree: u32,
        opts: &OdeOptions,
    ) -> Result<Self> {
        check_mesh(mesh)?;
        let m = mesh.len() - 1;
        let mut levels: Vec<Option<LaplaceSolution>> = vec![None; m];
        let mut theta = lambda.to_vec();
        for level in (0..m).rev() {
            let dt = mesh[level + 1] - mesh[level];
            let sol = solve_u_with(mech, dt, &theta, degree, opts)?;
            theta = sol.value();
            levels[level] = Some(sol);
        }
        Ok(Self {
            mesh: mesh.to_vec(),
            lambda: lambda.to_vec(),
            levels: levels.into_iter().map(|s| s.expect("every level solved")).collect(),
        })
    }

    pub fn mesh(&self) -> &[f64] {
        &self.mesh
    }

    pub fn lambda(&self) -> &[f64] {
        &self.lambda
    }

    pub fn horizon(&self) -> f64 {
        *self.mesh.last().expect("mesh has at least two points")
    }

    pub fn depth(&self) -> usize {
        self.levels.len()
    }

    pub fn degree(&self) -> u32 {
        self.levels[0].degree()
    }

    pub fn level(&self, level: usize) -> &LaplaceSolution {
        &self.levels[level]
    }

    /// `u(T, λ)`.
    pub fn u_total(&self) -> Vec<f64> {
        self.levels[0].value()
    }
}

fn check_mesh(mesh: &[f64]) -> Result<()> {
    if mesh.len() < 2 {
        return Err(Error::Contract("mesh needs at least two points".into()));
    }
    if mesh[0] != 0.0 {
        return Err(Error::Contract("mesh must start at 0".into()));
    }
    if mesh.windows(2).any(|w| !(w[1] > w[0]) || !w[1].is_finite()) {
        return Err(Error::Contract("mesh must be strictly increasing and finite".into()));
    }
    Ok(())
}

/// Energy as `(sign, log |E|)`; `log = -∞` encodes zero.
pub fn forest_log_energy(forest: &LabeledForest, x: &[f64], jets: &MeshJets) -> Result<(f64, f64)> {
    let m = forest.depth();
    if jets.depth() != m {
        return Err(Error::Contract(format!(
            "mesh has {} levels, forest has {m}",
            jets.depth()
        )));
    }
    if x.len() != forest.dim() {
        return Err(Error::Contract("x has the wrong dimension".into()));
    }
    let stats = forest.stats();
    if stats.max_outdegree() > jets.degree() {
        return Err(Error::Contract(format!(
            "forest needs jet degree {}, provider has {}",
            stats.max_outdegree(),
            jets.degree()
        )));
    }
    let k_total = forest.sample_size().total();
    let rho_total = stats.rootdegree.total();
    let mut sign = if (k_total - rho_total).is_multiple_of(2) { 1.0 } else { -1.0 };
    let mut log = 0.0;
    for (i, &r) in stats.rootdegree.entries().iter().enumerate() {
        if r > 0 {
            if x[i] == 0.0 {
                return Ok((1.0, f64::NEG_INFINITY));
            }
            log += f64::from(r) * x[i].abs().ln();
            if x[i] < 0.0 && r % 2 == 1 {
                sign = -sign;
            }
        }
    }
    for (level, mus) in stats.outdegrees.iter().enumerate() {
        let sol = jets.level(level);
        for (v, mu) in mus.iter().enumerate() {
            let tau = forest.types(level)[v];
            let dv = sol.derivative(tau, mu)?;
            if dv == 0.0 {
                return Ok((1.0, f64::NEG_INFINITY));
            }
            log += dv.abs().ln();
            if dv < 0.0 {
                sign = -sign;
            }
        }
    }
    Ok((sign, log))
}

/// Slack below zero that is attributed to solver noise.
const ENERGY_SLACK: f64 = 1e-9;

/// `E_{t,x}(H, λ) = (-1)^{|k|-|ρ|} x^ρ Π_ℓ Π_v D^{μ(v)}_{τ(v)} u(Δt_ℓ, θ_ℓ)`.
pub fn forest_energy(forest: &LabeledForest, x: &[f64], jets: &MeshJets) -> Result<f64> {
    let (sign, log) = forest_log_energy(forest, x, jets)?;
    let e = sign * log.exp();
    if e < 0.0 {
        if e >= -ENERGY_SLACK {
            return Ok(0.0);
        }
        return Err(Error::Contract(format!("negative forest energy {e:.3e} for {forest}")));
    }
    Ok(e)
}

/// `Σ_{H ∈ ℍ^k(m)} E(H)` by enumeration.
pub fn partition_function_enumerated(k: &MultiIndex, x: &[f64], jets: &MeshJets, cap: u128) -> Result<f64> {
    let mut e = ForestEnumerator::new(k, jets.depth(), k.dim(), cap)?;
    let mut terms = Vec::new();
    while e.advance() {
        terms.push(forest_energy(e.current(), x, jets)?);
    }
    // sum small terms first
    terms.sort_by(f64::total_cmp);
    Ok(terms.iter().sum())
}

/// `(-1)^{|k|} D^k e^{-⟨x,u⟩} / e^{-⟨x,u⟩}` from a jet of `u(T, ·)` at `λ`.
pub fn partition_function_from_jet(k: &MultiIndex, x: &[f64], sol: &LaplaceSolution) -> Result<f64> {
    if k.total() > sol.degree() {
        return Err(Error::Contract(format!(
            "k = {k} needs jet degree {}, solution has {}",
            k.total(),
            sol.degree()
        )));
    }
    let space: &std::sync::Arc<JetSpace> = sol.jets()[0].space();
    let mut arg = crate::jet::Jet::zero(space);
    for (i, jet) in sol.jets().iter().enumerate() {
        arg.axpy(-x[i], jet);
    }
    let e = arg.exp_shifted();
    let sign = if k.total().is_multiple_of(2) { 1.0 } else { -1.0 };
    Ok(sign * e.derivative(k)?)
}

/// Solves `u(T, ·)` directly and evaluates [`partition_function_from_jet`].
pub fn partition_function_jet(
    mech: &BranchingMechanism,
    k: &MultiIndex,
    horizon: f64,
    x: &[f64],
    lambda: &[f64],
) -> Result<f64> {
    let sol = solve_u(mech, horizon, lambda, k.total())?;
    partition_function_from_jet(k, x, &sol)
}

/// `ℚ(For = H, S = k) = (λ^k / k!) e^{-⟨x,u(T,λ)⟩} E(H)`.
pub fn forest_law_q(forest: &LabeledForest, x: &[f64], jets: &MeshJets) -> Result<f64> {
    let k = forest.sample_size();
    let lambda = jets.lambda();
    if !k.dominated_by_support(lambda) {
        return Ok(0.0);
    }
    let e = forest_energy(forest, x, jets)?;
    if e == 0.0 {
        return Ok(0.0);
    }
    let u = jets.u_total();
    let dot: f64 = x.iter().zip(&u).map(|(a, b)| a * b).sum();
    Ok(k.pow(lambda) / k.factorial() * (-dot).exp() * e)
}

/// Conditional forest law `E(H) / Σ_I E(I)` over the whole space, in
/// enumeration order.
pub fn conditional_law(k: &MultiIndex, x: &[f64], jets: &MeshJets, cap: u128) -> Result<Vec<(LabeledForest, f64)>> {
    let mut e = ForestEnumerator::new(k, jets.depth(), k.dim(), cap)?;
    let mut rows = Vec::new();
    while e.advance() {
        let energy = forest_energy(e.current(), x, jets)?;
        rows.push((e.current().clone(), energy));
    }
    let total: f64 = rows.iter().map(|r| r.1).sum();
    if total <= 0.0 {
        return Err(Error::Domain("partition function vanishes".into()));
    }
    Ok(rows.into_iter().map(|(h, e)| (h, e / total)).collect())
}

/// The marked multitype Galton–Watson description of a `λ`-sample's ancestry.
pub struct MarkedProcess<'a> {
    mech: &'a BranchingMechanism,
    horizon: f64,
    lambda: Vec<f64>,
    x: Vec<f64>,
}

impl<'a> MarkedProcess<'a> {
    pub fn new(mech: &'a BranchingMechanism, horizon: f64, x: &[f64], lambda: &[f64]) -> Result<Self> {
        if x.len() != mech.dim() || lambda.len() != mech.dim() {
            return Err(Error::Contract("x and λ must match the mechanism dimension".into()));
        }
        Ok(Self {
            mech,
            horizon,
            lambda: lambda.to_vec(),
            x: x.to_vec(),
        })
    }

    /// Poisson means `x_i u_i(T, λ)` of the time-0 marked census.
    pub fn root_means(&self) -> Result<Vec<f64>> {
        let u = solve_u(self.mech, self.horizon, &self.lambda, 0)?.value();
        Ok(u.iter().zip(&self.x).map(|(a, b)| a * b).collect())
    }

    /// `P(N(0) = 0) = e^{-⟨x,u(T,λ)⟩}`.
    pub fn prob_no_roots(&self) -> Result<f64> {
        Ok((-self.root_means()?.iter().sum::<f64>()).exp())
    }

    /// `P(type-i marked particle at s has marked offspring census α at t)
    /// = r_i^α(t - s, u(T - t, λ)) / u_i(T - s, λ)`.
    pub fn transition(&self, s: f64, t: f64, i: usize, alpha: &MultiIndex) -> Result<f64> {
        let sol = self.level_solution(s, t, alpha.total())?;
        let denom = sol.value()[i];
        if denom <= 0.0 {
            return Err(Error::Domain("no marked particles at the start time".into()));
        }
        Ok(sol.outdegree_rate(i, alpha)? / denom)
    }

    /// `Σ_{0<|α|<=A}` of the transition row.
    pub fn row_total(&self, s: f64, t: f64, i: usize, truncation: u32) -> Result<f64> {
        let sol = self.level_solution(s, t, truncation)?;
        let tr = sol.check_total_rate(i, truncation)?;
        Ok(tr.partial / tr.u)
    }

    fn level_solution(&self, s: f64, t: f64, degree: u32) -> Result<LaplaceSolution> {
        if !(0.0 <= s && s <= t && t <= self.horizon) {
            return Err(Error::Contract(format!("need 0 <= s <= t <= T, got s = {s}, t = {t}")));
        }
        let theta = solve_u(self.mech, self.horizon - t, &self.lambda, 0)?.value();
        solve_u(self.mech, t - s, &theta, degree)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn feller() -> BranchingMechanism {
        BranchingMechanism::feller(0.5).unwrap()
    }

    #[test]
    fn small_counts() {
        let k3 = MultiIndex::from(vec![3]);
        assert_eq!(count_forests(&k3, 1, 1).unwrap(), 5);
        assert_eq!(enumerate_forests(&k3, 1, 1).unwrap().count(), 5);
        let k2 = MultiIndex::from(vec![2]);
        assert_eq!(enumerate_forests(&k2, 2, 1).unwrap().count(), 3);
        let k10 = MultiIndex::from(vec![1, 0]);
        let all: Vec<_> = enumerate_forests(&k10, 1, 2).unwrap().collect();
        assert_eq!(all.len(), 2);
        assert_eq!(all[0].types(0), &[0]);
        assert_eq!(all[1].types(0), &[1]);
    }

    #[test]
    fn size_cap_is_enforced() {
        let k = MultiIndex::from(vec![2, 1, 1]);
        assert!(matches!(
            ForestEnumerator::new(&k, 3, 3, 1000),
            Err(Error::SizeCap { .. })
        ));
    }

    #[test]
    fn line_format() {
        let k = MultiIndex::from(vec![2]);
        let h = LabeledForest::single_event(&k, 0, &MultiIndex::from(vec![2])).unwrap();
        assert_eq!(h.to_line(), "g1:0,0 | g0:1 | 1.1,1.2");
        let t = LabeledForest::trivial(&MultiIndex::from(vec![1, 1]), 2).unwrap();
        assert_eq!(t.to_line(), "g1:0,1 g2:0,1 | g0:1,2 g1:1,2 | 1.1,2.1");
    }

    #[test]
    fn feller_pair_energies() {
        let jets = MeshJets::new(&feller(), &[0.0, 1.0], &[1.0], 2).unwrap();
        let k = MultiIndex::from(vec![2]);
        let merge = LabeledForest::single_event(&k, 0, &k).unwrap();
        let sticks = LabeledForest::trivial(&k, 1).unwrap();
        assert_relative_eq!(forest_energy(&merge, &[1.0], &jets).unwrap(), 8.0 / 27.0, max_relative = 1e-9);
        assert_relative_eq!(forest_energy(&sticks, &[1.0], &jets).unwrap(), 16.0 / 81.0, max_relative = 1e-9);
        let z = partition_function_enumerated(&k, &[1.0], &jets, DEFAULT_FOREST_CAP).unwrap();
        assert_relative_eq!(z, 40.0 / 81.0, max_relative = 1e-9);
        let zj = partition_function_jet(&feller(), &k, 1.0, &[1.0], &[1.0]).unwrap();
        assert_relative_eq!(zj, 40.0 / 81.0, max_relative = 1e-9);
        let q: f64 = enumerate_forests(&k, 1, 1)
            .unwrap()
            .map(|h| forest_law_q(&h, &[1.0], &jets).unwrap())
            .sum();
        assert_relative_eq!(q, 0.5 * (-2.0f64 / 3.0).exp() * 40.0 / 81.0, max_relative = 1e-9);
    }

    #[test]
    fn zero_lambda_and_zero_x() {
        let k = MultiIndex::from(vec![2]);
        let jets = MeshJets::new(&feller(), &[0.0, 1.0], &[0.0], 2).unwrap();
        let h = LabeledForest::trivial(&k, 1).unwrap();
        assert_eq!(forest_law_q(&h, &[1.0], &jets).unwrap(), 0.0);
        let jets = MeshJets::new(&feller(), &[0.0, 1.0], &[1.0], 2).unwrap();
        assert_eq!(forest_energy(&h, &[0.0], &jets).unwrap(), 0.0);
    }

    #[test]
    fn degree_contract() {
        let k = MultiIndex::from(vec![3]);
        let jets = MeshJets::new(&feller(), &[0.0, 1.0], &[1.0], 2).unwrap();
        let h = LabeledForest::single_event(&k, 0, &k).unwrap();
        assert!(matches!(forest_energy(&h, &[1.0], &jets), Err(Error::Contract(_))));
    }

    #[test]
    fn marked_process_rows() {
        let mech = feller();
        let mp = MarkedProcess::new(&mech, 1.0, &[1.0], &[1.0]).unwrap();
        assert_relative_eq!(mp.prob_no_roots().unwrap(), (-2.0f64 / 3.0).exp(), max_relative = 1e-9);
        assert_relative_eq!(
            mp.transition(0.0, 1.0, 0, &MultiIndex::from(vec![2])).unwrap(),
            2.0 / 9.0,
            max_relative = 1e-9
        );
        assert_relative_eq!(mp.transition(0.4, 0.4, 0, &MultiIndex::from(vec![1])).unwrap(), 1.0);
        let r6 = mp.row_total(0.0, 1.0, 0, 6).unwrap();
        let r8 = mp.row_total(0.0, 1.0, 0, 8).unwrap();
        assert!(r6 < r8 && r8 <= 1.0 + 1e-12);
        assert!(1.0 - r8 < 0.01);
    }
}
