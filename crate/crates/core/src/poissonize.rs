//! Poissonization of uniform samples.
//!
//! The mixing measure `π^k` puts `k_i dλ_i / λ_i` on every coordinate with
//! `k_i > 0` and `δ_0` elsewhere. Integrals against it use `λ = s / (1 - s)`
//! on the active coordinates, so `k dλ/λ` becomes `k ds / (s (1 - s))`.

use std::collections::HashMap;

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp, Poisson};
use serde::{Deserialize, Serialize};
use statrs::function::gamma::ln_gamma;

use crate::error::{Error, Result};
use crate::forests::{self, LabeledForest, MeshJets};
use crate::laplace::solve_u;
use crate::mechanism::BranchingMechanism;
use crate::montecarlo::{run_replicas, z_score};
use crate::multi_index::MultiIndex;
use crate::quadrature::{try_integrate_cube, Estimate, Tolerance};

/// `∫ π^k(dλ) f(λ)`.
pub fn integrate_pi_k<F>(k: &MultiIndex, mut f: F, tol: &Tolerance) -> Result<Estimate>
where
    F: FnMut(&[f64]) -> Result<f64>,
{
    let active: Vec<usize> = (0..k.dim()).filter(|&i| k.get(i) > 0).collect();
    let mut lambda = vec![0.0; k.dim()];
    try_integrate_cube(
        active.len(),
        |s| {
            let mut weight = 1.0;
            for (slot, &i) in active.iter().enumerate() {
                let si = s[slot];
                let om = 1.0 - si;
                lambda[i] = si / om;
                weight *= f64::from(k.get(i)) / (si * om);
            }
            let v = f(&lambda)?;
            Ok(if v == 0.0 { 0.0 } else { weight * v })
        },
        tol,
    )
}

/// Tolerance used by the identity checks.
pub fn tight_tolerance() -> Tolerance {
    Tolerance::new(1e-13, 1e-12).with_max_intervals(4000)
}

/// `∫ π^j(dλ) (λz)^j / j! e^{-λz}`, which is 1 for every `j >= 0`, `z > 0`.
pub fn gamma_identity_check(j: u32, z: f64, tol: &Tolerance) -> Result<Estimate> {
    if !(z > 0.0 && z.is_finite()) {
        return Err(Error::Domain(format!("z must be positive, got {z}")));
    }
    let k = MultiIndex::from(vec![j]);
    let log_fact = ln_gamma(f64::from(j) + 1.0);
    integrate_pi_k(
        &k,
        |l| {
            let lz = l[0] * z;
            if j == 0 {
                return Ok((-lz).exp());
            }
            Ok((f64::from(j) * lz.ln() - lz - log_fact).exp())
        },
        tol,
    )
}

/// `∫ π^k(dλ) λ^k e^{-⟨y,λ⟩}`, which equals `k! / y^k` for `y ≻ 0`.
pub fn gamma_factorial_check(k: &MultiIndex, y: &[f64], tol: &Tolerance) -> Result<Estimate> {
    if y.len() != k.dim() || y.iter().any(|&v| !(v > 0.0 && v.is_finite())) {
        return Err(Error::Domain("y must be positive with one entry per type".into()));
    }
    integrate_pi_k(
        k,
        |l| {
            let mut log = 0.0;
            for (i, (&li, &yi)) in l.iter().zip(y).enumerate() {
                let ki = k.get(i);
                log -= yi * li;
                if ki > 0 {
                    log += f64::from(ki) * li.ln();
                }
            }
            Ok(log.exp())
        },
        tol,
    )
}

/// `ℙ_x^{k,T}(For = H, 𝒵(T) ≻ k)` and its mesh-wide total, with the jets at
/// each quadrature node cached by `λ`.
pub struct ForestLawP<'a> {
    mech: &'a BranchingMechanism,
    mesh: Vec<f64>,
    x: Vec<f64>,
    k: MultiIndex,
    tol: Tolerance,
    cache: HashMap<Vec<u64>, MeshJets>,
}

impl<'a> ForestLawP<'a> {
    pub fn new(mech: &'a BranchingMechanism, mesh: &[f64], x: &[f64], k: &MultiIndex, tol: Tolerance) -> Result<Self> {
        if x.len() != mech.dim() || k.dim() != mech.dim() {
            return Err(Error::Contract("x and k must match the mechanism dimension".into()));
        }
        if k.total() > crate::jet::MAX_DEGREE {
            return Err(Error::Contract(format!("|k| = {} exceeds the jet degree cap", k.total())));
        }
        Ok(Self {
            mech,
            mesh: mesh.to_vec(),
            x: x.to_vec(),
            k: k.clone(),
            tol,
            cache: HashMap::new(),
        })
    }

    fn jets(&mut self, lambda: &[f64]) -> Result<&MeshJets> {
        let key: Vec<u64> = lambda.iter().map(|v| v.to_bits()).collect();
        if !self.cache.contains_key(&key) {
            let jets = MeshJets::new(self.mech, &self.mesh, lambda, self.k.total())?;
            self.cache.insert(key.clone(), jets);
        }
        Ok(&self.cache[&key])
    }

    pub fn cached_nodes(&self) -> usize {
        self.cache.len()
    }

    pub fn probability(&mut self, forest: &LabeledForest) -> Result<Estimate> {
        if forest.sample_size() != &self.k || forest.depth() + 1 != self.mesh.len() {
            return Err(Error::Contract("forest does not match the sample size or mesh".into()));
        }
        let tol = self.tol;
        let k = self.k.clone();
        let x = self.x.clone();
        integrate_pi_k(
            &k,
            |lambda| {
                let jets = self.jets(lambda)?;
                let (sign, log_e) = forests::forest_log_energy(forest, &x, jets)?;
                if log_e == f64::NEG_INFINITY {
                    return Ok(0.0);
                }
                let v = sign * (log_prefactor(&x, &k, lambda, &jets.u_total()) + log_e).exp();
                Ok(v.max(0.0))
            },
            &tol,
        )
    }

    /// `Σ_H ℙ(For = H, 𝒵(T) ≻ k) = ℙ(𝒵(T) ≻ k)` through the jet form of the
    /// partition function.
    pub fn total(&mut self) -> Result<Estimate> {
        let tol = self.tol;
        let k = self.k.clone();
        let x = self.x.clone();
        let horizon = *self.mesh.last().expect("mesh is nonempty");
        let mech = self.mech;
        integrate_pi_k(
            &k,
            |lambda| {
                let sol = solve_u(mech, horizon, lambda, k.total())?;
                let z = forests::partition_function_from_jet(&k, &x, &sol)?;
                if z <= 0.0 {
                    return Ok(0.0);
                }
                Ok((log_prefactor(&x, &k, lambda, &sol.value()) + z.ln()).exp())
            },
            &tol,
        )
    }
}

/// `log(λ^k / k!) - ⟨x, u⟩`
fn log_prefactor(x: &[f64], k: &MultiIndex, lambda: &[f64], u: &[f64]) -> f64 {
    let dot: f64 = x.iter().zip(u).map(|(a, b)| a * b).sum();
    let mut log = -dot;
    for (i, &ki) in k.entries().iter().enumerate() {
        if ki > 0 {
            log += f64::from(ki) * lambda[i].ln() - ln_gamma(f64::from(ki) + 1.0);
        }
    }
    log
}

/// Probability that a uniform `k`-sample (`d = 1`) descends from a single
/// time-0 ancestor:
/// `((-1)^{k-1} x / k!) ∫ (k dλ/λ) λ^k e^{-x u(T,λ)} ∂^k u(T,λ)`.
pub fn mrca_probability(mech: &BranchingMechanism, k: u32, horizon: f64, x: f64, tol: &Tolerance) -> Result<Estimate> {
    if mech.dim() != 1 {
        return Err(Error::Contract("the MRCA probability is implemented for d = 1".into()));
    }
    if k < 2 {
        return Err(Error::Contract("the MRCA probability needs k >= 2".into()));
    }
    if horizon == 0.0 {
        return Ok(Estimate {
            value: 0.0,
            error: 0.0,
            evaluations: 0,
        });
    }
    let km = MultiIndex::from(vec![k]);
    let log_fact = ln_gamma(f64::from(k) + 1.0);
    let est = integrate_pi_k(
        &km,
        |l| {
            let sol = solve_u(mech, horizon, l, k)?;
            let dk = sol.derivative(0, &km)?;
            let signed = if (k - 1).is_multiple_of(2) { dk } else { -dk };
            if signed <= 0.0 {
                return Ok(0.0);
            }
            let log = x.ln() - log_fact + f64::from(k) * l[0].ln() - x * sol.value()[0] + signed.ln();
            Ok(log.exp())
        },
        tol,
    )?;
    if est.value < -est.error {
        return Err(Error::Contract(format!("negative MRCA probability {}", est.value)));
    }
    Ok(est)
}

/// Population laws with closed-form Poissonization data and exact samplers.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum PopulationFixture {
    /// `Z = z` almost surely.
    Deterministic { z: Vec<f64> },
    /// One type, `Z ~ Exp(rate)`.
    Exponential { rate: f64 },
    /// One type, `Z = Z(T)` of the Feller diffusion `ψ = β λ²` started at `x`.
    Feller { beta: f64, horizon: f64, x: f64 },
}

impl PopulationFixture {
    pub fn dim(&self) -> usize {
        match self {
            PopulationFixture::Deterministic { z } => z.len(),
            _ => 1,
        }
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            PopulationFixture::Deterministic { z } => {
                if z.is_empty() || z.iter().any(|&v| !(v >= 0.0 && v.is_finite())) {
                    return Err(Error::Config("deterministic z must be finite, non-negative and nonempty".into()));
                }
            }
            PopulationFixture::Exponential { rate } => {
                if !(*rate > 0.0 && rate.is_finite()) {
                    return Err(Error::Config("exponential rate must be positive".into()));
                }
            }
            PopulationFixture::Feller { beta, horizon, x } => {
                if !(*beta > 0.0 && *horizon > 0.0 && *x > 0.0) {
                    return Err(Error::Config("feller fixture needs beta, horizon, x > 0".into()));
                }
            }
        }
        Ok(())
    }

    /// `P(Z ≻ k)`.
    pub fn prob_dominates(&self, k: &MultiIndex) -> f64 {
        match self {
            PopulationFixture::Deterministic { z } => {
                if k.dominated_by_support(z) {
                    1.0
                } else {
                    0.0
                }
            }
            PopulationFixture::Exponential { .. } => 1.0,
            PopulationFixture::Feller { beta, horizon, x } => {
                if k.is_zero() {
                    1.0
                } else {
                    -(-x / (beta * horizon)).exp_m1()
                }
            }
        }
    }

    /// `P[(λZ)^k / k! e^{-⟨λ,Z⟩}; Z ≻ k]`.
    pub fn poisson_weight(&self, k: &MultiIndex, lambda: &[f64]) -> Result<f64> {
        match self {
            PopulationFixture::Deterministic { z } => {
                if !k.dominated_by_support(z) {
                    return Ok(0.0);
                }
                let mut log = 0.0;
                for i in 0..z.len() {
                    let lz = lambda[i] * z[i];
                    let ki = f64::from(k.get(i));
                    if k.get(i) > 0 {
                        log += ki * lz.ln() - ln_gamma(ki + 1.0);
                    }
                    log -= lz;
                }
                Ok(log.exp())
            }
            PopulationFixture::Exponential { rate } => {
                let kk = f64::from(k.get(0));
                Ok(rate * lambda[0].powf(kk) / (rate + lambda[0]).powf(kk + 1.0))
            }
            PopulationFixture::Feller { beta, horizon, x } => {
                // (λ^k / k!) (-1)^k ∂^k e^{-x u(T, λ)}
                let mech = BranchingMechanism::feller(*beta)?;
                let sol = solve_u(&mech, *horizon, lambda, k.total())?;
                let z = forests::partition_function_from_jet(k, &[*x], &sol)?;
                let kk = f64::from(k.get(0));
                Ok((kk * lambda[0].ln() - ln_gamma(kk + 1.0) - x * sol.value()[0]).exp() * z)
            }
        }
    }

    /// One exact draw of `Z`.
    pub fn sample(&self, rng: &mut ChaCha8Rng) -> Vec<f64> {
        match self {
            PopulationFixture::Deterministic { z } => z.clone(),
            PopulationFixture::Exponential { rate } => {
                vec![Exp::new(*rate).expect("validated rate").sample(rng)]
            }
            PopulationFixture::Feller { beta, horizon, x } => {
                // compound Poisson(x / (βT)) of exponentials with mean βT
                let scale = beta * horizon;
                let n = Poisson::new(x / scale).expect("validated mean").sample(rng) as u64;
                let e = Exp::new(1.0 / scale).expect("validated scale");
                vec![(0..n).map(|_| e.sample(rng)).sum()]
            }
        }
    }
}

/// `∫ π^k(dλ) Π^k-density`, where the density is `P[(λZ)^k/k! e^{-λZ} | Z ≻ k]`.
pub struct NormalizedMixture {
    pub k: MultiIndex,
    pub fixture: PopulationFixture,
}

impl NormalizedMixture {
    pub fn new(k: &MultiIndex, fixture: PopulationFixture) -> Result<Self> {
        fixture.validate()?;
        if fixture.dim() != k.dim() {
            return Err(Error::Contract("fixture and k dimensions differ".into()));
        }
        if fixture.prob_dominates(k) == 0.0 {
            return Err(Error::Domain("P(Z ≻ k) = 0; Π^k is undefined".into()));
        }
        Ok(Self {
            k: k.clone(),
            fixture,
        })
    }

    /// Density of `Π^k` against `π^k`.
    pub fn density(&self, lambda: &[f64]) -> Result<f64> {
        Ok(self.fixture.poisson_weight(&self.k, lambda)? / self.fixture.prob_dominates(&self.k))
    }

    pub fn total_mass(&self, tol: &Tolerance) -> Result<Estimate> {
        integrate_pi_k(&self.k, |l| self.density(l), tol)
    }
}

/// Events on `(Z, ordered sample)`; sample entries are `b[i][j]`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum MixtureEvent {
    Full,
    /// `b_{1,1} < Z_1 / 2`
    FirstBelowMedian,
    /// every `b_{i,j} < Z_i / 2`
    AllInLowerHalf,
    /// `Z_1 > 1` and `b_{1,1} < 1/2`
    LargeAndFirstSmall,
    /// `b_{1,1} < b_{1,2}`
    FirstTwoOrdered,
}

impl MixtureEvent {
    pub const ALL: [MixtureEvent; 5] = [
        MixtureEvent::Full,
        MixtureEvent::FirstBelowMedian,
        MixtureEvent::AllInLowerHalf,
        MixtureEvent::LargeAndFirstSmall,
        MixtureEvent::FirstTwoOrdered,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            MixtureEvent::Full => "full",
            MixtureEvent::FirstBelowMedian => "first-below-median",
            MixtureEvent::AllInLowerHalf => "all-in-lower-half",
            MixtureEvent::LargeAndFirstSmall => "large-and-first-small",
            MixtureEvent::FirstTwoOrdered => "first-two-ordered",
        }
    }

    pub fn parse(name: &str) -> Result<Self> {
        Self::ALL
            .iter()
            .copied()
            .find(|e| e.name() == name)
            .ok_or_else(|| Error::Config(format!("unknown event {name:?}")))
    }

    /// Whether the event is defined for sample size `k`.
    pub fn applies_to(&self, k: &MultiIndex) -> bool {
        match self {
            MixtureEvent::Full | MixtureEvent::AllInLowerHalf => true,
            MixtureEvent::FirstBelowMedian | MixtureEvent::LargeAndFirstSmall => k.get(0) >= 1,
            MixtureEvent::FirstTwoOrdered => k.get(0) >= 2,
        }
    }

    pub fn holds(&self, z: &[f64], b: &[Vec<f64>]) -> bool {
        match self {
            MixtureEvent::Full => true,
            MixtureEvent::FirstBelowMedian => b[0][0] < 0.5 * z[0],
            MixtureEvent::AllInLowerHalf => b
                .iter()
                .enumerate()
                .all(|(i, bi)| bi.iter().all(|&v| v < 0.5 * z[i])),
            MixtureEvent::LargeAndFirstSmall => z[0] > 1.0 && b[0][0] < 0.5,
            MixtureEvent::FirstTwoOrdered => b[0][0] < b[0][1],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MixtureRow {
    pub event: &'static str,
    pub lhs: f64,
    pub lhs_se: f64,
    pub rhs: f64,
    pub rhs_se: f64,
    pub z: f64,
}

const LHS_DOMAIN: u64 = 0x11;
const RHS_DOMAIN: u64 = 0x22;

/// Monte Carlo check of `ℙ^k(A, Z ≻ k) = ∫ π^k(dλ) ℚ^λ(A, S = k)`.
///
/// The left side draws `Z` and an i.i.d. uniform sample. The right side
/// couples all `λ`-samples through unit-rate points on `(0, Z_i) × (0, ∞)`:
/// the points of height `< λ_i` form the `λ_i`-sample, so `S_i = k_i` exactly
/// for `λ_i` between the `k_i`-th and `(k_i+1)`-th lowest heights and the
/// `π^k` integral of the indicator is `Π_i k_i log(h_{(k_i+1)} / h_{(k_i)})`.
pub fn mixture_identity_mc(
    k: &MultiIndex,
    fixture: &PopulationFixture,
    events: &[MixtureEvent],
    replicas: u64,
    seed: u64,
) -> Result<Vec<MixtureRow>> {
    fixture.validate()?;
    if fixture.dim() != k.dim() {
        return Err(Error::Contract("fixture and k dimensions differ".into()));
    }
    if replicas < 2 {
        return Err(Error::Config("need at least two replicas".into()));
    }
    for e in events {
        if !e.applies_to(k) {
            return Err(Error::Config(format!("event {} needs a larger sample", e.name())));
        }
    }
    let d = k.dim();
    let width = events.len();
    let draw_sample = |rng: &mut ChaCha8Rng, z: &[f64]| -> Vec<Vec<f64>> {
        (0..d)
            .map(|i| (0..k.get(i)).map(|_| rng.random::<f64>() * z[i]).collect())
            .collect()
    };
    let lhs = run_replicas(replicas, width, seed, LHS_DOMAIN, |rng, _, out| {
        let z = fixture.sample(rng);
        if !k.dominated_by_support(&z) {
            return;
        }
        let b = draw_sample(rng, &z);
        for (slot, e) in events.iter().enumerate() {
            out[slot] = if e.holds(&z, &b) { 1.0 } else { 0.0 };
        }
    });
    let rhs = run_replicas(replicas, width, seed, RHS_DOMAIN, |rng, _, out| {
        let z = fixture.sample(rng);
        let mut weight = 1.0;
        for i in 0..d {
            let ki = k.get(i);
            if ki == 0 {
                continue;
            }
            if z[i] <= 0.0 {
                return;
            }
            let heights = Exp::new(z[i]).expect("positive rate");
            let mut h = 0.0;
            let mut below = 0.0;
            for _ in 0..ki {
                h += heights.sample(rng);
                below = h;
            }
            let above = h + heights.sample(rng);
            weight *= f64::from(ki) * (above / below).ln();
        }
        // positions of the k lowest points, labelled in uniform random order
        let b = draw_sample(rng, &z);
        for (slot, e) in events.iter().enumerate() {
            out[slot] = if e.holds(&z, &b) { weight } else { 0.0 };
        }
    });
    Ok(events
        .iter()
        .enumerate()
        .map(|(slot, e)| {
            let (l, ls, r, rs) = (lhs.mean(slot), lhs.stderr(slot), rhs.mean(slot), rhs.stderr(slot));
            MixtureRow {
                event: e.name(),
                lhs: l,
                lhs_se: ls,
                rhs: r,
                rhs_se: rs,
                z: z_score(l, ls, r, rs),
            }
        })
        .collect())
}
