//! Particle approximation of a CSBP by particles of mass `1/n`.
//!
//! Per type-`c` particle:
//! - split into two or die, each at rate `β_c n`;
//! - emit one type-`j` particle at rate `κ_{c,j}` (`j ≠ c`);
//! - `κ_{c,c} > 0` is a birth rate, `κ_{c,c} < 0` a death rate;
//! - an atom `(m, r)` of `ν_c` fires at rate `m / n` and adds `⌊n r_j⌋`
//!   type-`j` children; its compensator is a death at rate `m r_c 1{r_c ≤ 1}`.
//!
//! These match the mean and second-order behaviour of `ψ` up to `O(1/n)`.
//! Every particle remembers the time-0 particle it descends from, which is all
//! the genealogy the MRCA estimate needs.

use rand::Rng;
use rand_distr::Exp1;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::mechanism::BranchingMechanism;
use crate::montecarlo::run_replicas;
use crate::multi_index::MultiIndex;

pub const DEFAULT_PARTICLE_CAP: usize = 5_000_000;

#[derive(Debug, Clone, PartialEq)]
enum Move {
    Split,
    Die,
    Emit(usize),
    Jump(Vec<u32>),
}

#[derive(Debug, Clone)]
struct TypeClock {
    total: f64,
    moves: Vec<(f64, Move)>,
}

#[derive(Debug, Clone)]
pub struct ParticleSystem {
    n: u32,
    clocks: Vec<TypeClock>,
    cap: usize,
}

/// Terminal particles: `roots[i]` lists the time-0 ancestor of every type-`i`
/// particle alive at the horizon.
#[derive(Debug, Clone, PartialEq)]
pub struct Terminal {
    pub roots: Vec<Vec<u32>>,
    pub initial: usize,
    pub events: u64,
}

impl Terminal {
    pub fn mass(&self, n: u32) -> Vec<f64> {
        self.roots.iter().map(|r| r.len() as f64 / f64::from(n)).collect()
    }

    /// Every terminal particle has exactly one time-0 ancestor.
    pub fn is_well_formed(&self) -> bool {
        self.roots.iter().flatten().all(|&r| (r as usize) < self.initial)
    }
}

impl ParticleSystem {
    pub fn new(mech: &BranchingMechanism, n: u32) -> Result<Self> {
        let d = mech.dim();
        if d > 2 {
            return Err(Error::Contract("the particle oracle supports d <= 2".into()));
        }
        if n == 0 {
            return Err(Error::Contract("particle scale n must be positive".into()));
        }
        if !mech.is_atomic() {
            return Err(Error::Contract("the particle oracle needs a finite-atom mechanism".into()));
        }
        let nf = f64::from(n);
        let mut clocks = Vec::with_capacity(d);
        for c in 0..d {
            let mut moves = Vec::new();
            let beta = mech.beta()[c];
            if beta > 0.0 {
                moves.push((beta * nf, Move::Split));
                moves.push((beta * nf, Move::Die));
            }
            let mut death = 0.0;
            for (j, &k) in mech.kappa()[c].iter().enumerate() {
                if j != c && k > 0.0 {
                    moves.push((k, Move::Emit(j)));
                } else if j == c && k > 0.0 {
                    moves.push((k, Move::Emit(c)));
                } else if j == c && k < 0.0 {
                    death += -k;
                }
            }
            for atom in &mech.nu()[c].atoms {
                let kids: Vec<u32> = atom.r.iter().map(|&r| (nf * r).floor() as u32).collect();
                if kids.iter().any(|&v| v > 0) {
                    moves.push((atom.mass / nf, Move::Jump(kids)));
                }
                if atom.r[c] <= 1.0 {
                    death += atom.mass * atom.r[c];
                }
            }
            if death > 0.0 {
                moves.push((death, Move::Die));
            }
            let total = moves.iter().map(|m| m.0).sum();
            clocks.push(TypeClock { total, moves });
        }
        Ok(Self {
            n,
            clocks,
            cap: DEFAULT_PARTICLE_CAP,
        })
    }

    pub fn with_cap(mut self, cap: usize) -> Self {
        self.cap = cap;
        self
    }

    pub fn n(&self) -> u32 {
        self.n
    }

    /// `round(n x_i)` particles of each type, each its own root.
    pub fn initial_counts(&self, x: &[f64]) -> Vec<usize> {
        x.iter().map(|&v| (v * f64::from(self.n)).round() as usize).collect()
    }

    pub fn simulate(&self, x: &[f64], horizon: f64, rng: &mut ChaCha8Rng) -> Result<Terminal> {
        let d = self.clocks.len();
        if x.len() != d || x.iter().any(|&v| !(v >= 0.0 && v.is_finite())) {
            return Err(Error::Domain("x must be finite, non-negative and of length d".into()));
        }
        if !(horizon >= 0.0 && horizon.is_finite()) {
            return Err(Error::Domain(format!("horizon must be finite and >= 0, got {horizon}")));
        }
        let mut roots: Vec<Vec<u32>> = Vec::with_capacity(d);
        let mut next_root = 0u32;
        for count in self.initial_counts(x) {
            roots.push((next_root..next_root + count as u32).collect());
            next_root += count as u32;
        }
        let mut t = 0.0;
        let mut events = 0u64;
        let mut alive: usize = roots.iter().map(Vec::len).sum();
        loop {
            let total: f64 = (0..d).map(|c| roots[c].len() as f64 * self.clocks[c].total).sum();
            if total <= 0.0 {
                break;
            }
            t += rng.sample::<f64, _>(Exp1) / total;
            if t > horizon {
                break;
            }
            events += 1;
            // one uniform picks the type, the particle and the move
            let mut u = rng.random::<f64>() * total;
            let mut c = 0;
            while c + 1 < d && u >= roots[c].len() as f64 * self.clocks[c].total {
                u -= roots[c].len() as f64 * self.clocks[c].total;
                c += 1;
            }
            let clock = &self.clocks[c];
            let len = roots[c].len();
            let idx = ((u / clock.total) as usize).min(len - 1);
            let mut v = u - idx as f64 * clock.total;
            let mut mv = &clock.moves[clock.moves.len() - 1].1;
            for (r, m) in &clock.moves {
                if v < *r {
                    mv = m;
                    break;
                }
                v -= r;
            }
            let root = roots[c][idx];
            match mv {
                Move::Split => {
                    roots[c].push(root);
                    alive += 1;
                }
                Move::Die => {
                    roots[c].swap_remove(idx);
                    alive -= 1;
                }
                Move::Emit(j) => {
                    roots[*j].push(root);
                    alive += 1;
                }
                Move::Jump(kids) => {
                    for (j, &m) in kids.iter().enumerate() {
                        roots[j].extend(std::iter::repeat_n(root, m as usize));
                        alive += m as usize;
                    }
                }
            }
            if alive > self.cap {
                return Err(Error::Explosion { count: alive, cap: self.cap });
            }
        }
        Ok(Terminal {
            roots,
            initial: next_root as usize,
            events,
        })
    }
}

/// Whether a uniform type-respecting `k`-sample of the terminal particles
/// descends from a single time-0 particle; false if some type has fewer
/// than `k_i` particles.
pub fn sample_same_root(term: &Terminal, k: &MultiIndex, rng: &mut ChaCha8Rng) -> bool {
    let mut common = None;
    for (i, r) in term.roots.iter().enumerate() {
        let ki = k.get(i) as usize;
        if r.len() < ki {
            return false;
        }
        for pos in rand::seq::index::sample(rng, r.len(), ki) {
            let root = r[pos];
            match common {
                None => common = Some(root),
                Some(c) if c != root => return false,
                _ => {}
            }
        }
    }
    true
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MrcaRow {
    pub n: u32,
    pub estimate: f64,
    pub stderr: f64,
    pub replicas: u64,
}

/// Weighted least-squares fit of `estimate ≈ limit + slope / n`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct BiasFit {
    pub limit: f64,
    pub limit_stderr: f64,
    pub slope: f64,
}

impl BiasFit {
    pub fn allowance(&self, n: u32) -> f64 {
        self.slope.abs() / f64::from(n)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MrcaEstimate {
    pub rows: Vec<MrcaRow>,
    pub fit: Option<BiasFit>,
}

impl MrcaEstimate {
    /// `|estimate - reference| <= 3 SE + |slope|/n` at the finest `n`.
    pub fn consistent_with(&self, reference: f64) -> bool {
        let Some(row) = self.rows.iter().max_by_key(|r| r.n) else {
            return false;
        };
        let bias = self.fit.map_or(0.0, |f| f.allowance(row.n));
        (row.estimate - reference).abs() <= 3.0 * row.stderr + bias
    }
}

pub fn fit_bias(rows: &[MrcaRow]) -> Option<BiasFit> {
    if rows.len() < 2 {
        return None;
    }
    // weights 1/se², design (1, 1/n)
    let (mut s0, mut s1, mut s2, mut t0, mut t1) = (0.0, 0.0, 0.0, 0.0, 0.0);
    for r in rows {
        let w = 1.0 / r.stderr.max(1e-12).powi(2);
        let z = 1.0 / f64::from(r.n);
        s0 += w;
        s1 += w * z;
        s2 += w * z * z;
        t0 += w * r.estimate;
        t1 += w * z * r.estimate;
    }
    let det = s0 * s2 - s1 * s1;
    if det.abs() < f64::EPSILON * s0 * s2 {
        return None;
    }
    Some(BiasFit {
        limit: (s2 * t0 - s1 * t1) / det,
        limit_stderr: (s2 / det).sqrt(),
        slope: (s0 * t1 - s1 * t0) / det,
    })
}

const MRCA_DOMAIN: u64 = 0x44;
const MASS_DOMAIN: u64 = 0x55;

/// `ℙ(the k-sample at T has one time-0 ancestor)` for each particle scale.
pub fn estimate_mrca(
    mech: &BranchingMechanism,
    x: &[f64],
    horizon: f64,
    k: &MultiIndex,
    n_grid: &[u32],
    replicas: u64,
    seed: u64,
) -> Result<MrcaEstimate> {
    if k.dim() != mech.dim() || x.len() != mech.dim() {
        return Err(Error::Contract("x and k must match the mechanism dimension".into()));
    }
    let mut rows = Vec::with_capacity(n_grid.len());
    for (gi, &n) in n_grid.iter().enumerate() {
        let sys = ParticleSystem::new(mech, n)?;
        let failure = std::sync::Mutex::new(None);
        let m = run_replicas(replicas, 1, seed, MRCA_DOMAIN + ((gi as u64) << 8), |rng, _, out| {
            match sys.simulate(x, horizon, rng) {
                Ok(term) => {
                    debug_assert!(term.is_well_formed());
                    out[0] = f64::from(u8::from(sample_same_root(&term, k, rng)));
                }
                Err(e) => {
                    failure.lock().expect("poisoned").get_or_insert(e);
                }
            }
        });
        if let Some(e) = failure.into_inner().expect("poisoned") {
            return Err(e);
        }
        rows.push(MrcaRow {
            n,
            estimate: m.mean(0),
            stderr: m.stderr(0),
            replicas,
        });
    }
    let fit = fit_bias(&rows);
    Ok(MrcaEstimate { rows, fit })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MassSummary {
    pub mean: Vec<f64>,
    pub stderr: Vec<f64>,
    pub extinction: f64,
    pub extinction_stderr: f64,
}

/// Terminal mass per type and the probability that everything died out.
pub fn terminal_mass(
    mech: &BranchingMechanism,
    x: &[f64],
    horizon: f64,
    n: u32,
    replicas: u64,
    seed: u64,
) -> Result<MassSummary> {
    let sys = ParticleSystem::new(mech, n)?;
    let d = mech.dim();
    let failure = std::sync::Mutex::new(None);
    let m = run_replicas(replicas, d + 1, seed, MASS_DOMAIN, |rng, _, out| match sys.simulate(x, horizon, rng) {
        Ok(term) => {
            let mass = term.mass(n);
            out[..d].copy_from_slice(&mass);
            out[d] = f64::from(u8::from(term.roots.iter().all(Vec::is_empty)));
        }
        Err(e) => {
            failure.lock().expect("poisoned").get_or_insert(e);
        }
    });
    if let Some(e) = failure.into_inner().expect("poisoned") {
        return Err(e);
    }
    Ok(MassSummary {
        mean: (0..d).map(|i| m.mean(i)).collect(),
        stderr: (0..d).map(|i| m.stderr(i)).collect(),
        extinction: m.mean(d),
        extinction_stderr: m.stderr(d),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mechanism::JumpMeasure;
    use crate::montecarlo::replica_rng;

    #[test]
    fn inert_population_is_constant() {
        let m = BranchingMechanism::new(vec![vec![0.0]], vec![0.0], vec![JumpMeasure::default()]).unwrap();
        let sys = ParticleSystem::new(&m, 10).unwrap();
        let term = sys.simulate(&[1.3], 5.0, &mut replica_rng(1, 0, 0)).unwrap();
        assert_eq!(term.roots[0], (0..13).collect::<Vec<u32>>());
        assert_eq!(term.events, 0);
    }

    #[test]
    fn zero_horizon_has_no_common_ancestor() {
        let m = BranchingMechanism::feller(0.5).unwrap();
        let est = estimate_mrca(&m, &[1.0], 0.0, &MultiIndex::from(vec![2]), &[50], 200, 1).unwrap();
        assert_eq!(est.rows[0].estimate, 0.0);
    }

    #[test]
    fn independent_types_never_share_roots() {
        let m = BranchingMechanism::new(
            vec![vec![0.0, 0.0], vec![0.0, 0.0]],
            vec![0.5, 0.5],
            vec![JumpMeasure::default(), JumpMeasure::default()],
        )
        .unwrap();
        let est = estimate_mrca(&m, &[1.0, 1.0], 1.0, &MultiIndex::from(vec![1, 1]), &[20], 500, 2).unwrap();
        assert_eq!(est.rows[0].estimate, 0.0);
    }

    #[test]
    fn explosion_guard() {
        let m = BranchingMechanism::new(vec![vec![5.0]], vec![0.0], vec![JumpMeasure::default()]).unwrap();
        let sys = ParticleSystem::new(&m, 100).unwrap().with_cap(1000);
        let res = sys.simulate(&[1.0], 10.0, &mut replica_rng(1, 0, 0));
        assert!(matches!(res, Err(Error::Explosion { .. })));
    }

    #[test]
    fn bias_fit_recovers_a_line() {
        let rows: Vec<MrcaRow> = [50u32, 100, 200]
            .iter()
            .map(|&n| MrcaRow { n, estimate: 0.5 + 3.0 / f64::from(n), stderr: 0.01, replicas: 1 })
            .collect();
        let fit = fit_bias(&rows).unwrap();
        assert!((fit.limit - 0.5).abs() < 1e-12);
        assert!((fit.slope - 3.0).abs() < 1e-10);
    }

    #[test]
    fn rejects_unsupported_mechanisms() {
        assert!(ParticleSystem::new(&BranchingMechanism::neveu(), 10).is_err());
    }
}
