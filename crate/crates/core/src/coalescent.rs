//! Local merger rates and multitype Λ-coalescents.
//!
//! A multitype Λ-coalescent with `k` blocks merges a chosen group of `α`
//! blocks into one block of type `c` at rate
//!
//! `λ^{(c)}_{α,k} = Σ_{j≠c} 1{α=e_j} κ_{c,j} + 1{α=2e_c} 2β_c + ∫ s^α (1-s)^{k-α} Q_c(ds)`.
//!
//! A CSBP of current size `x` induces such rates with `κ_{c,j} x_c / x_j`,
//! `β_c / x_c` and `Q_c = x_c T_x^# ν_c`, where `T_x(r)_j = r_j / (r_j + x_j)`.

use std::collections::HashMap;

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use statrs::function::gamma::ln_gamma;

use crate::error::{Error, Result};
use crate::forests::LabeledForest;
use crate::mechanism::{BranchingMechanism, Density1d};
use crate::montecarlo::replica_rng;
use crate::multi_index::MultiIndex;
use crate::poissonize::{integrate_pi_k, ForestLawP};
use crate::quadrature::{self, Tolerance};

fn check_event(k: &MultiIndex, alpha: &MultiIndex, c: usize) -> Result<()> {
    if alpha.dim() != k.dim() {
        return Err(Error::Contract("α and k have different dimensions".into()));
    }
    if c >= k.dim() {
        return Err(Error::Contract(format!("type {c} out of range")));
    }
    if alpha.is_zero() || alpha.is_unit(c) {
        return Err(Error::Contract(format!("α = {alpha} is not a merger into type {}", c + 1)));
    }
    if !alpha.le(k) {
        return Err(Error::Contract(format!("α = {alpha} exceeds k = {k}")));
    }
    Ok(())
}

/// `ln B(a, b)`
fn ln_beta(a: f64, b: f64) -> f64 {
    ln_gamma(a) + ln_gamma(b) - ln_gamma(a + b)
}

/// `x_c ∫ s^α (1-s)^{k-α} T_x^# ν(ds)` for a one-dimensional density, in
/// jump-size coordinates: `[0, x]` through `r = x w^q`, `[x, ∞)` through
/// `r = x / v`.
fn density_merger_integral(dens: &Density1d, x: f64, k: u32, alpha: u32, tol: &Tolerance) -> Result<f64> {
    let (a, kk) = (f64::from(alpha), f64::from(k));
    let integrand = |r: f64| -> f64 {
        let s = r / (x + r);
        let one_minus = x / (x + r);
        s.powf(a) * one_minus.powf(kk - a) * dens.eval(r)
    };
    // r^{α - 1 - index} near zero
    let e = a - 1.0 - dens.index();
    let q = if e < 0.0 { 1.0 / (e + 1.0) } else { 1.0 };
    let near = quadrature::integrate(
        |w| {
            if w <= 0.0 {
                return 0.0;
            }
            let r = x * w.powf(q);
            integrand(r) * x * q * w.powf(q - 1.0)
        },
        0.0,
        1.0,
        tol,
    )?;
    let far = quadrature::integrate(
        |v| {
            if v <= 0.0 {
                return 0.0;
            }
            let r = x / v;
            integrand(r) * x / (v * v)
        },
        0.0,
        1.0,
        tol,
    )?;
    Ok(x * (near.value + far.value))
}

/// Local merger rate of a CSBP with current population `x`.
pub fn merger_rate(
    mech: &BranchingMechanism,
    x: &[f64],
    k: &MultiIndex,
    alpha: &MultiIndex,
    c: usize,
) -> Result<f64> {
    let d = mech.dim();
    if x.len() != d || k.dim() != d {
        return Err(Error::Contract("x and k must match the mechanism dimension".into()));
    }
    check_event(k, alpha, c)?;
    if !k.dominated_by_support(x) {
        return Err(Error::Domain(format!("x must be positive wherever k is (k = {k})")));
    }
    let mut rate = 0.0;
    if alpha.total() == 1 {
        let j = (0..d).find(|&j| alpha.get(j) == 1).expect("unit index");
        if x[j] == 0.0 {
            return Err(Error::Domain(format!("x_{} = 0 in a type-change rate", j + 1)));
        }
        rate += mech.kappa()[c][j] * x[c] / x[j];
    }
    if alpha.total() == 2 && alpha.get(c) == 2 {
        if x[c] == 0.0 {
            return Err(Error::Domain(format!("x_{} = 0 in a pair-merger rate", c + 1)));
        }
        rate += 2.0 * mech.beta()[c] / x[c];
    }
    let nu = &mech.nu()[c];
    let mut bulk = 0.0;
    for atom in &nu.atoms {
        let mut w = atom.mass;
        for j in 0..d {
            let (aj, kj) = (alpha.get(j), k.get(j));
            let denom = atom.r[j] + x[j];
            if denom == 0.0 {
                // r_j = x_j = 0 forces α_j = k_j = 0
                continue;
            }
            let s = atom.r[j] / denom;
            let om = x[j] / denom;
            w *= pow0(s, aj) * pow0(om, kj - aj);
        }
        bulk += w;
    }
    if let Some(dens) = &nu.density1d {
        rate += density_merger_integral(dens, x[0], k.get(0), alpha.get(0), mech.tolerance())?;
    }
    Ok(rate + x[c] * bulk)
}

fn pow0(base: f64, n: u32) -> f64 {
    if n == 0 {
        1.0
    } else {
        base.powi(n as i32)
    }
}

/// Measure `Q_c` on `[0, 1]^d`: atoms plus an optional one-dimensional power
/// density `scale · s^p (1 - s)^q` on `(0, 1)`.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct QMeasure {
    #[serde(default)]
    pub atoms: Vec<QAtom>,
    #[serde(default)]
    pub density: Option<PowerDensity>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct QAtom {
    pub mass: f64,
    pub s: Vec<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PowerDensity {
    pub scale: f64,
    pub p: f64,
    pub q: f64,
}

/// `(β, Q)` equivalent to a Λ-coalescent measure written in the
/// `s^{j-2}(1-s)^{k-j} Λ(ds)` convention.
#[derive(Debug, Clone, PartialEq)]
pub struct FromLambda {
    pub beta: f64,
    pub q: QMeasure,
}

impl QMeasure {
    /// Converts one-dimensional Λ data: an atom of mass `m` at 0 becomes
    /// `β = m / 2`, an atom at `s > 0` becomes a `Q` atom of mass `m / s²`,
    /// and a density `f` becomes `f / s²`.
    pub fn from_lambda(atoms: &[(f64, f64)], density: Option<PowerDensity>) -> Result<FromLambda> {
        let mut beta = 0.0;
        let mut q = QMeasure::default();
        for &(mass, s) in atoms {
            if !(mass > 0.0) || !(0.0..=1.0).contains(&s) {
                return Err(Error::Domain(format!("bad Λ atom ({mass}, {s})")));
            }
            if s == 0.0 {
                beta += mass / 2.0;
            } else {
                q.atoms.push(QAtom {
                    mass: mass / (s * s),
                    s: vec![s],
                });
            }
        }
        q.density = density.map(|d| PowerDensity { p: d.p - 2.0, ..d });
        q.validate(1)?;
        Ok(FromLambda { beta, q })
    }

    pub fn validate(&self, d: usize) -> Result<()> {
        for atom in &self.atoms {
            if !(atom.mass > 0.0 && atom.mass.is_finite()) || atom.s.len() != d {
                return Err(Error::Domain("Q atoms need positive mass and d coordinates".into()));
            }
            if atom.s.iter().any(|&s| !(0.0..=1.0).contains(&s)) {
                return Err(Error::Domain("Q atoms must lie in [0, 1]^d".into()));
            }
        }
        if let Some(dens) = &self.density {
            if d != 1 {
                return Err(Error::Domain("Q densities are one-dimensional".into()));
            }
            // every rate with |α| >= 2 must be finite
            if !(dens.scale > 0.0) || dens.p + 3.0 <= 0.0 || dens.q + 1.0 <= 0.0 {
                return Err(Error::Domain(format!(
                    "Q density s^{} (1-s)^{} gives infinite merger rates",
                    dens.p, dens.q
                )));
            }
        }
        Ok(())
    }

    /// `∫ s^α (1-s)^{k-α} Q(ds)`.
    pub fn moment(&self, k: &MultiIndex, alpha: &MultiIndex) -> Result<f64> {
        let mut v = 0.0;
        for atom in &self.atoms {
            let mut w = atom.mass;
            for (j, &s) in atom.s.iter().enumerate() {
                w *= pow0(s, alpha.get(j)) * pow0(1.0 - s, k.get(j) - alpha.get(j));
            }
            v += w;
        }
        if let Some(dens) = &self.density {
            let a = f64::from(alpha.get(0)) + dens.p + 1.0;
            let b = f64::from(k.get(0) - alpha.get(0)) + dens.q + 1.0;
            if a <= 0.0 || b <= 0.0 {
                return Err(Error::Domain(format!("infinite Q moment for α = {alpha}, k = {k}")));
            }
            v += dens.scale * ln_beta(a, b).exp();
        }
        Ok(v)
    }
}

/// Parameters `(κ, β, Q)` of a multitype Λ-coalescent.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LambdaCoalescent {
    pub kappa: Vec<Vec<f64>>,
    pub beta: Vec<f64>,
    pub q: Vec<QMeasure>,
}

impl LambdaCoalescent {
    pub fn new(kappa: Vec<Vec<f64>>, beta: Vec<f64>, q: Vec<QMeasure>) -> Result<Self> {
        let d = beta.len();
        if d == 0 || kappa.len() != d || kappa.iter().any(|r| r.len() != d) || q.len() != d {
            return Err(Error::Domain("inconsistent coalescent dimensions".into()));
        }
        for (c, row) in kappa.iter().enumerate() {
            for (j, &v) in row.iter().enumerate() {
                if j != c && !(v >= 0.0) {
                    return Err(Error::Domain("type-change rates must be >= 0".into()));
                }
            }
        }
        if beta.iter().any(|&b| !(b >= 0.0)) {
            return Err(Error::Domain("pair-merger coefficients must be >= 0".into()));
        }
        for m in &q {
            m.validate(d)?;
        }
        Ok(Self { kappa, beta, q })
    }

    /// Kingman's coalescent: pairs merge at rate `2β`.
    pub fn kingman(beta: f64) -> Result<Self> {
        Self::new(vec![vec![0.0]], vec![beta], vec![QMeasure::default()])
    }

    /// Bolthausen–Sznitman: Λ uniform on `[0, 1]`.
    pub fn bolthausen_sznitman() -> Self {
        let conv = QMeasure::from_lambda(&[], Some(PowerDensity { scale: 1.0, p: 0.0, q: 0.0 }))
            .expect("uniform Λ is valid");
        Self::new(vec![vec![0.0]], vec![conv.beta], vec![conv.q]).expect("valid")
    }

    /// Beta(2 - a, a) coalescent, `a ∈ (0, 2)`.
    pub fn beta_coalescent(a: f64) -> Result<Self> {
        if !(a > 0.0 && a < 2.0) {
            return Err(Error::Domain(format!("beta-coalescent index must lie in (0, 2), got {a}")));
        }
        let norm = ln_beta(2.0 - a, a).exp();
        let conv = QMeasure::from_lambda(
            &[],
            Some(PowerDensity {
                scale: 1.0 / norm,
                p: 1.0 - a,
                q: a - 1.0,
            }),
        )?;
        Self::new(vec![vec![0.0]], vec![conv.beta], vec![conv.q])
    }

    pub fn dim(&self) -> usize {
        self.beta.len()
    }
}

/// `λ^{(c)}_{α,k}` for abstract `(κ_{c,·}, β_c, Q_c)`.
pub fn lambda_coalescent_rate(
    q: &QMeasure,
    kappa_row: &[f64],
    beta: f64,
    k: &MultiIndex,
    alpha: &MultiIndex,
    c: usize,
) -> Result<f64> {
    check_event(k, alpha, c)?;
    let mut rate = 0.0;
    if alpha.total() == 1 {
        let j = (0..k.dim()).find(|&j| alpha.get(j) == 1).expect("unit index");
        rate += kappa_row[j];
    }
    if alpha.total() == 2 && alpha.get(c) == 2 {
        rate += 2.0 * beta;
    }
    Ok(rate + q.moment(k, alpha)?)
}

/// Source of merger rates for the simulator.
pub trait RateProvider: Sync {
    fn dim(&self) -> usize;
    fn rate(&self, census: &MultiIndex, alpha: &MultiIndex, c: usize) -> Result<f64>;
}

impl RateProvider for LambdaCoalescent {
    fn dim(&self) -> usize {
        self.beta.len()
    }

    fn rate(&self, census: &MultiIndex, alpha: &MultiIndex, c: usize) -> Result<f64> {
        lambda_coalescent_rate(&self.q[c], &self.kappa[c], self.beta[c], census, alpha, c)
    }
}

/// Local rates of a CSBP frozen at population size `x`.
pub struct CsbpRates<'a> {
    pub mech: &'a BranchingMechanism,
    pub x: Vec<f64>,
}

impl RateProvider for CsbpRates<'_> {
    fn dim(&self) -> usize {
        self.mech.dim()
    }

    fn rate(&self, census: &MultiIndex, alpha: &MultiIndex, c: usize) -> Result<f64> {
        merger_rate(self.mech, &self.x, census, alpha, c)
    }
}

/// One possible transition out of a census.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EventRate {
    pub alpha: MultiIndex,
    pub c: usize,
    /// Rate for one specific group of blocks.
    pub per_group: f64,
    /// `per_group × Π_i C(n_i, α_i)`.
    pub total: f64,
}

/// Every transition out of `census`, in graded multi-index order, then by type.
pub fn rate_table<P: RateProvider + ?Sized>(provider: &P, census: &MultiIndex) -> Result<Vec<EventRate>> {
    let d = provider.dim();
    let mut rows = Vec::new();
    for alpha in census.sub_indices_graded() {
        if alpha.is_zero() {
            continue;
        }
        for c in 0..d {
            if alpha.is_unit(c) {
                continue;
            }
            let per_group = provider.rate(census, &alpha, c)?;
            if !(per_group >= 0.0 && per_group.is_finite()) {
                return Err(Error::Domain(format!(
                    "rate {per_group} for α = {alpha}, c = {} is not a finite non-negative number",
                    c + 1
                )));
            }
            if per_group == 0.0 {
                continue;
            }
            let total = census.binomial(&alpha) * per_group;
            rows.push(EventRate {
                alpha: alpha.clone(),
                c,
                per_group,
                total,
            });
        }
    }
    Ok(rows)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Block {
    pub ty: usize,
    pub members: Vec<(usize, usize)>,
}

/// Blocks of a multitype partition of `[k]` and the backward clock.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TypedPartition {
    pub blocks: Vec<Block>,
    pub clock: f64,
}

impl TypedPartition {
    /// Singletons `{(i, j)}` of type `i`.
    pub fn singletons(k: &MultiIndex) -> Self {
        let mut blocks = Vec::new();
        for (i, &ki) in k.entries().iter().enumerate() {
            for j in 0..ki as usize {
                blocks.push(Block {
                    ty: i,
                    members: vec![(i, j)],
                });
            }
        }
        Self { blocks, clock: 0.0 }
    }

    pub fn census(&self, d: usize) -> MultiIndex {
        let mut n = vec![0u32; d];
        for b in &self.blocks {
            n[b.ty] += 1;
        }
        MultiIndex::from(n)
    }

    /// Blocks partition the labels, with no empty or repeated members.
    pub fn is_valid(&self, k: &MultiIndex) -> bool {
        let mut seen = std::collections::HashSet::new();
        for b in &self.blocks {
            if b.members.is_empty() {
                return false;
            }
            for &m in &b.members {
                if !seen.insert(m) {
                    return false;
                }
            }
        }
        seen.len() == k.total() as usize
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CoalescentEvent {
    pub run: u64,
    pub time: f64,
    pub alpha: MultiIndex,
    pub c: usize,
    pub blocks_before: usize,
    pub blocks_after: usize,
}

impl CoalescentEvent {
    pub fn kind(&self) -> &'static str {
        if self.alpha.total() == 1 {
            "type-change"
        } else if self.alpha.total() == 2 && self.alpha.get(self.c) == 2 {
            "pair"
        } else {
            "multiple"
        }
    }

    /// `run,time,kind,c,alpha,blocks_before,blocks_after` (1-based type).
    pub fn csv_row(&self) -> String {
        format!(
            "{},{},{},{},\"{}\",{},{}",
            self.run,
            self.time,
            self.kind(),
            self.c + 1,
            serde_json::to_string(self.alpha.entries()).expect("integers serialize"),
            self.blocks_before,
            self.blocks_after
        )
    }
}

pub const EVENT_CSV_HEADER: &str = "run,time,kind,c,alpha,blocks_before,blocks_after";

const SIM_DOMAIN: u64 = 0x33;

/// Rate tables memoised by census; the reachable census set is finite.
pub struct RateCache<'a, P: RateProvider + ?Sized> {
    provider: &'a P,
    tables: HashMap<MultiIndex, (f64, Vec<EventRate>)>,
}

impl<'a, P: RateProvider + ?Sized> RateCache<'a, P> {
    pub fn new(provider: &'a P) -> Self {
        Self {
            provider,
            tables: HashMap::new(),
        }
    }

    pub fn get(&mut self, census: &MultiIndex) -> Result<&(f64, Vec<EventRate>)> {
        if !self.tables.contains_key(census) {
            let rows = rate_table(self.provider, census)?;
            let total: f64 = rows.iter().map(|r| r.total).sum();
            if !total.is_finite() {
                return Err(Error::Domain("total event rate overflowed".into()));
            }
            self.tables.insert(census.clone(), (total, rows));
        }
        Ok(&self.tables[census])
    }

    pub fn into_tables(self) -> HashMap<MultiIndex, (f64, Vec<EventRate>)> {
        self.tables
    }

    /// Precomputes every census with at most `|k|` blocks; type changes can
    /// leave the box `n <= k` but never add blocks.
    pub fn fill(&mut self, k: &MultiIndex) -> Result<()> {
        for n in MultiIndex::all_up_to(k.dim(), k.total()) {
            if !n.is_zero() {
                self.get(&n)?;
            }
        }
        Ok(())
    }
}

/// Runs the jump chain from singletons until one block remains, the total
/// rate vanishes or the clock passes `horizon`.
pub fn simulate_once(
    tables: &HashMap<MultiIndex, (f64, Vec<EventRate>)>,
    d: usize,
    k: &MultiIndex,
    horizon: Option<f64>,
    rng: &mut ChaCha8Rng,
    run: u64,
) -> Result<(Vec<CoalescentEvent>, TypedPartition)> {
    let mut state = TypedPartition::singletons(k);
    let mut events = Vec::new();
    while state.blocks.len() > 1 {
        let census = state.census(d);
        let (total, rows) = tables
            .get(&census)
            .ok_or_else(|| Error::Contract(format!("no rate table for census {census}")))?;
        if *total <= 0.0 {
            break;
        }
        let dt = Exp::new(*total).expect("positive rate").sample(rng);
        let t = state.clock + dt;
        if horizon.is_some_and(|h| t > h) {
            break;
        }
        state.clock = t;
        let mut target = rng.random::<f64>() * total;
        let mut chosen = rows.len() - 1;
        for (i, r) in rows.iter().enumerate() {
            if target < r.total {
                chosen = i;
                break;
            }
            target -= r.total;
        }
        let ev = &rows[chosen];
        let before = state.blocks.len();
        // uniformly chosen α_i blocks of each type i
        let mut picked = Vec::new();
        for i in 0..d {
            let of_type: Vec<usize> = (0..state.blocks.len()).filter(|&b| state.blocks[b].ty == i).collect();
            let need = ev.alpha.get(i) as usize;
            let chosen = rand::seq::index::sample(rng, of_type.len(), need);
            picked.extend(chosen.into_iter().map(|p| of_type[p]));
        }
        picked.sort_unstable();
        let mut members = Vec::new();
        for &b in picked.iter().rev() {
            let blk = state.blocks.swap_remove(b);
            members.extend(blk.members);
        }
        members.sort_unstable();
        state.blocks.push(Block { ty: ev.c, members });
        events.push(CoalescentEvent {
            run,
            time: t,
            alpha: ev.alpha.clone(),
            c: ev.c,
            blocks_before: before,
            blocks_after: state.blocks.len(),
        });
    }
    Ok((events, state))
}

/// Independent runs with per-run RNG streams; output is in run order.
pub fn simulate_typed_coalescent<P: RateProvider + ?Sized>(
    provider: &P,
    k: &MultiIndex,
    horizon: Option<f64>,
    runs: u64,
    seed: u64,
) -> Result<Vec<Vec<CoalescentEvent>>> {
    if k.dim() != provider.dim() {
        return Err(Error::Contract("k and rate provider dimensions differ".into()));
    }
    let mut cache = RateCache::new(provider);
    cache.fill(k)?;
    let tables = cache.into_tables();
    let d = provider.dim();
    (0..runs)
        .into_par_iter()
        .map(|run| {
            let mut rng = replica_rng(seed, SIM_DOMAIN, run);
            simulate_once(&tables, d, k, horizon, &mut rng, run).map(|(ev, _)| ev)
        })
        .collect()
}

/// Probability of each first event and the mean waiting time, from the table.
pub fn first_event_law<P: RateProvider + ?Sized>(provider: &P, k: &MultiIndex) -> Result<(Vec<(EventRate, f64)>, f64)> {
    let rows = rate_table(provider, k)?;
    let total: f64 = rows.iter().map(|r| r.total).sum();
    if total <= 0.0 {
        return Ok((Vec::new(), f64::INFINITY));
    }
    Ok((rows.into_iter().map(|r| {
        let p = r.total / total;
        (r, p)
    }).collect(), 1.0 / total))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SmallTimeRow {
    pub t: f64,
    /// `(1/t) ℙ(For = H^k_{c,α}, 𝒵(t) ≻ k)`
    pub ratio: f64,
    pub ratio_error: f64,
    /// Relative gap to the closed-form limit.
    pub gap: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SmallTimeReport {
    pub rows: Vec<SmallTimeRow>,
    /// `(-1)^{|α|} (x^{k-α+e_c} / k!) ∫ π^k(dλ) λ^k e^{-⟨x,λ⟩} D^α ψ_c(λ)`
    pub limit_integral: f64,
    pub limit_integral_error: f64,
    /// Closed form of the merger rate.
    pub limit_closed: f64,
    /// Least-squares slope of `log gap` against `log t`.
    pub order: f64,
}

impl SmallTimeReport {
    /// Each halving of `t` shrinks the gap by a factor of at least
    /// `1/2 · (1 + slack)`, on a grid sorted by decreasing `t`. Gaps within ten
    /// quadrature errors of zero count as converged.
    pub fn gap_halves(&self, slack: f64) -> bool {
        let floor = |r: &SmallTimeRow| 10.0 * r.ratio_error / self.limit_closed.abs() + 1e-12;
        self.rows.windows(2).all(|w| {
            let (a, b) = (&w[0], &w[1]);
            if b.gap <= floor(b) {
                return true;
            }
            let step = b.t / a.t;
            b.gap <= a.gap * step * (1.0 + slack)
        })
    }
}

/// Small-time behaviour of the single-event forest probability.
pub fn small_time_verify(
    mech: &BranchingMechanism,
    x: &[f64],
    k: &MultiIndex,
    alpha: &MultiIndex,
    c: usize,
    t_grid: &[f64],
    tol: &Tolerance,
) -> Result<SmallTimeReport> {
    check_event(k, alpha, c)?;
    if !mech.is_atomic() {
        return Err(Error::Contract("small-time verification needs a finite-atom mechanism".into()));
    }
    if t_grid.iter().any(|&t| !(t > 0.0 && t.is_finite())) {
        return Err(Error::Contract("t grid must be positive".into()));
    }
    let forest = LabeledForest::single_event(k, c, alpha)?;
    let limit_closed = merger_rate(mech, x, k, alpha, c)?;

    let rho = k.checked_sub(alpha).expect("α <= k").add(&MultiIndex::unit(k.dim(), c));
    let prefactor = rho.pow(x) / k.factorial();
    let sign = if alpha.total().is_multiple_of(2) { 1.0 } else { -1.0 };
    let integral = integrate_pi_k(
        k,
        |l| {
            let dot: f64 = x.iter().zip(l).map(|(a, b)| a * b).sum();
            let w = k.pow(l) * (-dot).exp();
            if w == 0.0 {
                return Ok(0.0);
            }
            Ok(w * mech.psi_derivative(c, alpha, l)?)
        },
        tol,
    )?;
    let limit_integral = sign * prefactor * integral.value;
    let limit_integral_error = prefactor * integral.error;

    let mut rows = Vec::with_capacity(t_grid.len());
    for &t in t_grid {
        let tol_t = Tolerance {
            abs: tol.abs * t,
            ..*tol
        };
        let mut law = ForestLawP::new(mech, &[0.0, t], x, k, tol_t)?;
        let p = law.probability(&forest)?;
        let ratio = p.value / t;
        rows.push(SmallTimeRow {
            t,
            ratio,
            ratio_error: p.error / t,
            gap: (ratio - limit_closed).abs() / limit_closed.abs().max(f64::MIN_POSITIVE),
        });
    }
    let pts: Vec<(f64, f64)> = rows
        .iter()
        .filter(|r| r.gap > 0.0)
        .map(|r| (r.t.ln(), r.gap.ln()))
        .collect();
    let order = if pts.len() >= 2 {
        let n = pts.len() as f64;
        let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
        let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
        let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
        let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
        sxy / sxx
    } else {
        f64::NAN
    };
    Ok(SmallTimeReport {
        rows,
        limit_integral,
        limit_integral_error,
        limit_closed,
        order,
    })
}
