//! Laplace exponents `u(t, λ)` of multitype CSBPs.
//!
//! `∂_t u + ψ(u) = 0`, `u(0, λ) = λ`, integrated in jet arithmetic so every
//! mixed partial `D^α u(t, λ)` with `|α| <= degree` comes out of one solve.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::jet::{Jet, JetSpace};
use crate::mechanism::BranchingMechanism;
use crate::multi_index::MultiIndex;
use crate::ode::{self, OdeOptions, OdeStats};

#[derive(Debug, Clone)]
pub struct LaplaceSolution {
    t: f64,
    lambda: Vec<f64>,
    jets: Vec<Jet>,
    stats: OdeStats,
}

impl LaplaceSolution {
    pub fn t(&self) -> f64 {
        self.t
    }

    pub fn lambda(&self) -> &[f64] {
        &self.lambda
    }

    pub fn degree(&self) -> u32 {
        self.jets[0].space().degree()
    }

    pub fn dim(&self) -> usize {
        self.jets.len()
    }

    pub fn jets(&self) -> &[Jet] {
        &self.jets
    }

    pub fn stats(&self) -> &OdeStats {
        &self.stats
    }

    /// `u(t, λ)`.
    pub fn value(&self) -> Vec<f64> {
        self.jets.iter().map(Jet::value).collect()
    }

    /// `D^α u_i(t, λ)`.
    pub fn derivative(&self, i: usize, alpha: &MultiIndex) -> Result<f64> {
        self.jets[i].derivative(alpha)
    }

    /// Outdegree rate `(-1)^{|α|+1} λ^α D^α u_i / α!`.
    pub fn outdegree_rate(&self, i: usize, alpha: &MultiIndex) -> Result<f64> {
        if alpha.is_zero() {
            return Err(Error::Contract("outdegree rates need α ≠ 0".into()));
        }
        if alpha.total() > self.degree() {
            return Err(Error::Contract(format!(
                "outdegree {alpha} exceeds solution degree {}",
                self.degree()
            )));
        }
        let sign = if alpha.total() % 2 == 1 { 1.0 } else { -1.0 };
        Ok(sign * alpha.pow(&self.lambda) * self.jets[i].coeff(alpha))
    }

    /// `(Σ_{0<|α|<=A} r_i^α, u_i, u_i - Σ)`.
    pub fn check_total_rate(&self, i: usize, truncation: u32) -> Result<TotalRate> {
        if truncation > self.degree() {
            return Err(Error::Contract(format!(
                "truncation {truncation} exceeds solution degree {}",
                self.degree()
            )));
        }
        let mut partial = 0.0;
        for alpha in self.jets[i].space().monomials() {
            let n = alpha.total();
            if n == 0 || n > truncation {
                continue;
            }
            partial += self.outdegree_rate(i, alpha)?;
        }
        let u = self.jets[i].value();
        Ok(TotalRate {
            partial,
            u,
            gap: u - partial,
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TotalRate {
    pub partial: f64,
    pub u: f64,
    pub gap: f64,
}

pub fn solve_u(mech: &BranchingMechanism, t: f64, lambda: &[f64], degree: u32) -> Result<LaplaceSolution> {
    solve_u_with(mech, t, lambda, degree, &OdeOptions::default())
}

pub fn solve_u_with(
    mech: &BranchingMechanism,
    t: f64,
    lambda: &[f64],
    degree: u32,
    opts: &OdeOptions,
) -> Result<LaplaceSolution> {
    let d = mech.dim();
    if lambda.len() != d {
        return Err(Error::Domain(format!("λ must have length {d}")));
    }
    if lambda.iter().any(|&l| !(l >= 0.0 && l.is_finite())) {
        return Err(Error::Domain("λ must be finite and non-negative".into()));
    }
    if !(t >= 0.0 && t.is_finite()) {
        return Err(Error::Domain(format!("t must be finite and >= 0, got {t}")));
    }
    let space = JetSpace::get(d, degree)?;
    let m = space.len();
    let initial: Vec<Jet> = (0..d).map(|i| Jet::variable(&space, i, lambda[i])).collect();
    if t == 0.0 {
        return Ok(LaplaceSolution {
            t,
            lambda: lambda.to_vec(),
            jets: initial,
            stats: OdeStats::default(),
        });
    }
    // surface domain errors (λ ⊁ α for unbounded jump support) directly
    mech.psi_jets(&initial)?;

    let mut y0 = Vec::with_capacity(d * m);
    for j in &initial {
        y0.extend_from_slice(j.coeffs());
    }
    let rhs = |y: &[f64], dy: &mut [f64]| -> Result<()> {
        let u: Vec<Jet> = (0..d)
            .map(|i| Jet::from_coeffs(&space, y[i * m..(i + 1) * m].to_vec()))
            .collect();
        let psi = mech.psi_jets(&u)?;
        for (i, p) in psi.iter().enumerate() {
            for (dst, src) in dy[i * m..(i + 1) * m].iter_mut().zip(p.coeffs()) {
                *dst = -src;
            }
        }
        Ok(())
    };
    let (y, stats) = ode::solve(rhs, &y0, t, opts)?;
    let jets: Vec<Jet> = (0..d)
        .map(|i| Jet::from_coeffs(&space, y[i * m..(i + 1) * m].to_vec()))
        .collect();
    let sol = LaplaceSolution {
        t,
        lambda: lambda.to_vec(),
        jets,
        stats,
    };
    check_signs(&sol)?;
    Ok(sol)
}

/// `(-1)^{|α|+1} D^α u_i >= 0` for `α ≠ 0`, and `u_i >= 0`, up to a
/// tolerance proportional to the largest coefficient of the jet.
fn check_signs(sol: &LaplaceSolution) -> Result<()> {
    for (i, jet) in sol.jets.iter().enumerate() {
        let slack = 1e-8 * (1.0 + jet.max_abs());
        if jet.value() < -slack {
            return Err(Error::Contract(format!(
                "u_{i} = {} is negative",
                jet.value()
            )));
        }
        for (alpha, &c) in jet.space().monomials().iter().zip(jet.coeffs()).skip(1) {
            let sign = if alpha.total() % 2 == 1 { 1.0 } else { -1.0 };
            if sign * c < -slack {
                return Err(Error::Contract(format!(
                    "alternating sign violated: D^{alpha} u_{i} has coefficient {c}"
                )));
            }
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn feller_jet_values() {
        let m = BranchingMechanism::feller(0.5).unwrap();
        let sol = solve_u(&m, 1.0, &[1.0], 4).unwrap();
        assert_relative_eq!(sol.value()[0], 2.0 / 3.0, max_relative = 1e-10);
        assert_relative_eq!(sol.derivative(0, &MultiIndex::from(vec![1])).unwrap(), 4.0 / 9.0, max_relative = 1e-9);
        assert_relative_eq!(sol.derivative(0, &MultiIndex::from(vec![2])).unwrap(), -8.0 / 27.0, max_relative = 1e-9);
        assert_relative_eq!(sol.outdegree_rate(0, &MultiIndex::from(vec![2])).unwrap(), 4.0 / 27.0, max_relative = 1e-9);
        let tr = sol.check_total_rate(0, 1).unwrap();
        assert_relative_eq!(tr.gap, 2.0 / 9.0, max_relative = 1e-9);
    }

    #[test]
    fn zero_time_is_exact() {
        let m = BranchingMechanism::feller(0.5).unwrap();
        let sol = solve_u(&m, 0.0, &[1.7], 3).unwrap();
        assert_eq!(sol.value(), vec![1.7]);
        assert_eq!(sol.derivative(0, &MultiIndex::from(vec![1])).unwrap(), 1.0);
        assert_eq!(sol.derivative(0, &MultiIndex::from(vec![2])).unwrap(), 0.0);
        assert_eq!(sol.outdegree_rate(0, &MultiIndex::from(vec![1])).unwrap(), 1.7);
        assert_eq!(sol.check_total_rate(0, 1).unwrap().gap, 0.0);
    }

    #[test]
    fn neveu_value() {
        let m = BranchingMechanism::neveu();
        let sol = solve_u(&m, 2f64.ln(), &[std::f64::consts::E], 2).unwrap();
        assert_relative_eq!(sol.value()[0], 0.5f64.exp(), max_relative = 1e-9);
    }

    #[test]
    fn degree_contracts() {
        let m = BranchingMechanism::feller(0.5).unwrap();
        let sol = solve_u(&m, 1.0, &[1.0], 2).unwrap();
        assert!(sol.outdegree_rate(0, &MultiIndex::from(vec![3])).is_err());
        assert!(sol.outdegree_rate(0, &MultiIndex::from(vec![0])).is_err());
        assert!(sol.check_total_rate(0, 3).is_err());
        assert!(solve_u(&m, 1.0, &[1.0], 9).is_err());
    }

    #[test]
    fn unbounded_support_at_zero_is_refused() {
        let m = BranchingMechanism::stable(1.5, 1.0).unwrap();
        assert!(matches!(solve_u(&m, 1.0, &[0.0], 2), Err(Error::Domain(_))));
        assert!(solve_u(&m, 1.0, &[0.5], 2).is_ok());
    }
}
