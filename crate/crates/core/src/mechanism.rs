//! Multitype branching mechanisms in Lévy–Khintchine form.
//!
//! `ψ_c(λ) = -Σ_j κ_{c,j} λ_j + β_c λ_c² + ∫ (e^{-⟨λ,r⟩} - 1 + λ_c r_c 1{r_c ≤ 1}) ν_c(dr)`
//!
//! Jump measures are finite lists of atoms in any dimension, plus an
//! optional density on `(0, ∞)` when `d = 1`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::jet::Jet;
use crate::multi_index::{factorial, MultiIndex};
use crate::quadrature::{self, Tolerance};

/// Euler–Mascheroni constant.
pub const EULER_GAMMA: f64 = 0.577_215_664_901_532_9;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Atom {
    pub mass: f64,
    pub r: Vec<f64>,
}

fn one() -> f64 {
    1.0
}

/// One-dimensional jump densities on `(0, ∞)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case", deny_unknown_fields)]
pub enum Density1d {
    /// `scale · r^{-1-alpha}`, `alpha ∈ (1, 2)`.
    Stable {
        alpha: f64,
        #[serde(default = "one")]
        scale: f64,
    },
    /// `scale · r^{-2}`; with drift `κ = scale (γ - 1)` this is Neveu's
    /// mechanism `λ log λ`.
    InverseSquare {
        #[serde(default = "one")]
        scale: f64,
    },
}

impl Density1d {
    pub fn eval(&self, r: f64) -> f64 {
        match *self {
            Density1d::Stable { alpha, scale } => scale * r.powf(-1.0 - alpha),
            Density1d::InverseSquare { scale } => scale / (r * r),
        }
    }

    /// Exponent `a` in `r^{-1-a}`.
    pub fn index(&self) -> f64 {
        match *self {
            Density1d::Stable { alpha, .. } => alpha,
            Density1d::InverseSquare { .. } => 1.0,
        }
    }

    pub fn scale(&self) -> f64 {
        match *self {
            Density1d::Stable { scale, .. } | Density1d::InverseSquare { scale } => scale,
        }
    }

    fn validate(&self) -> Result<()> {
        match *self {
            Density1d::Stable { alpha, scale } => {
                if !(alpha > 1.0 && alpha < 2.0) {
                    return Err(Error::Domain(format!(
                        "stable index must lie in (1, 2), got {alpha}"
                    )));
                }
                if !(scale > 0.0 && scale.is_finite()) {
                    return Err(Error::Domain(format!("density scale must be positive, got {scale}")));
                }
            }
            Density1d::InverseSquare { scale } => {
                if !(scale > 0.0 && scale.is_finite()) {
                    return Err(Error::Domain(format!("density scale must be positive, got {scale}")));
                }
            }
        }
        Ok(())
    }

    /// `n`-th derivative of `λ ↦ ∫ (e^{-λr} - 1 + λ r 1{r≤1}) ν(dr)`.
    pub fn derivative(&self, lambda: f64, n: u32, tol: &Tolerance) -> Result<f64> {
        if lambda < 0.0 || !lambda.is_finite() {
            return Err(Error::Domain(format!("λ must be finite and >= 0, got {lambda}")));
        }
        match *self {
            Density1d::InverseSquare { scale } => {
                let v = match n {
                    0 if lambda == 0.0 => 0.0,
                    0 => lambda * lambda.ln() + (EULER_GAMMA - 1.0) * lambda,
                    _ if lambda == 0.0 => {
                        return Err(Error::Domain(
                            "derivatives of the r^-2 density need λ > 0".into(),
                        ))
                    }
                    1 => lambda.ln() + EULER_GAMMA,
                    _ => {
                        let sign = if n.is_multiple_of(2) { 1.0 } else { -1.0 };
                        sign * factorial(n - 2) / lambda.powi(n as i32 - 1)
                    }
                };
                Ok(scale * v)
            }
            Density1d::Stable { alpha, scale } => {
                if n >= 2 && lambda == 0.0 {
                    return Err(Error::Domain(format!(
                        "derivative of order {n} at λ = 0 diverges for unbounded jump support"
                    )));
                }
                Ok(scale * stable_integral(alpha, lambda, n, tol)?)
            }
        }
    }
}

/// `e^{-x} - 1 + x` without cancellation at small `x`.
fn exp_remainder2(x: f64) -> f64 {
    if x.abs() < 1e-3 {
        x * x * (0.5 - x * (1.0 / 6.0 - x * (1.0 / 24.0 - x / 120.0)))
    } else {
        (-x).exp_m1() + x
    }
}

/// Unit-scale stable integrals, split at `r = 1`. The inner piece is mapped
/// through `r = w^{1/(2-a)}` which removes the `r^{1-a}` endpoint singularity.
fn stable_integral(a: f64, lambda: f64, n: u32, tol: &Tolerance) -> Result<f64> {
    let q = 1.0 / (2.0 - a);
    let inner_integrand = |r: f64| -> f64 {
        match n {
            0 => exp_remainder2(lambda * r) * r.powf(-1.0 - a),
            1 => -(-lambda * r).exp_m1() * r.powf(-a),
            _ => r.powf(n as f64 - 1.0 - a) * (-lambda * r).exp(),
        }
    };
    let outer_integrand = |r: f64| -> f64 {
        match n {
            0 => (-lambda * r).exp_m1() * r.powf(-1.0 - a),
            1 => -r.powf(-a) * (-lambda * r).exp(),
            _ => r.powf(n as f64 - 1.0 - a) * (-lambda * r).exp(),
        }
    };
    let inner = quadrature::integrate(
        |w| {
            if w <= 0.0 {
                return 0.0;
            }
            let r = w.powf(q);
            inner_integrand(r) * q * w.powf(q - 1.0)
        },
        0.0,
        1.0,
        tol,
    )?;
    let outer = quadrature::integrate_to_infinity(outer_integrand, 1.0, tol)?;
    let sign = if n >= 2 && n % 2 == 1 { -1.0 } else { 1.0 };
    Ok(sign * (inner.value + outer.value))
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct JumpMeasure {
    #[serde(default)]
    pub atoms: Vec<Atom>,
    #[serde(default)]
    pub density1d: Option<Density1d>,
}

impl JumpMeasure {
    pub fn is_zero(&self) -> bool {
        self.atoms.is_empty() && self.density1d.is_none()
    }

    /// True when every atom is finite in all coordinates and there is no density.
    pub fn is_atomic(&self) -> bool {
        self.density1d.is_none()
    }
}

/// Serialized form; unknown keys are rejected.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MechanismSpec {
    pub d: usize,
    pub kappa: Vec<Vec<f64>>,
    pub beta: Vec<f64>,
    pub nu: Vec<JumpMeasure>,
}

#[derive(Debug, Clone)]
pub struct BranchingMechanism {
    d: usize,
    kappa: Vec<Vec<f64>>,
    beta: Vec<f64>,
    nu: Vec<JumpMeasure>,
    tol: Tolerance,
}

impl BranchingMechanism {
    pub fn new(
        kappa: Vec<Vec<f64>>,
        beta: Vec<f64>,
        nu: Vec<JumpMeasure>,
    ) -> Result<Self> {
        Self::from_spec(MechanismSpec {
            d: beta.len(),
            kappa,
            beta,
            nu,
        })
    }

    pub fn from_spec(spec: MechanismSpec) -> Result<Self> {
        let d = spec.d;
        if d == 0 {
            return Err(Error::Domain("dimension d must be >= 1".into()));
        }
        if spec.kappa.len() != d || spec.kappa.iter().any(|row| row.len() != d) {
            return Err(Error::Domain(format!("kappa must be a {d}x{d} matrix")));
        }
        if spec.beta.len() != d || spec.nu.len() != d {
            return Err(Error::Domain(format!("beta and nu must have length {d}")));
        }
        for (c, row) in spec.kappa.iter().enumerate() {
            for (j, &k) in row.iter().enumerate() {
                if !k.is_finite() {
                    return Err(Error::Domain(format!("kappa[{c}][{j}] is not finite")));
                }
                if j != c && k < 0.0 {
                    return Err(Error::Domain(format!(
                        "off-diagonal kappa[{c}][{j}] = {k} must be >= 0"
                    )));
                }
            }
        }
        for (c, &b) in spec.beta.iter().enumerate() {
            if !(b >= 0.0 && b.is_finite()) {
                return Err(Error::Domain(format!("beta[{c}] = {b} must be finite and >= 0")));
            }
        }
        for (c, m) in spec.nu.iter().enumerate() {
            for atom in &m.atoms {
                if !(atom.mass > 0.0 && atom.mass.is_finite()) {
                    return Err(Error::Domain(format!("atom mass in nu[{c}] must be positive")));
                }
                if atom.r.len() != d {
                    return Err(Error::Domain(format!("atom location in nu[{c}] must have length {d}")));
                }
                if atom.r.iter().any(|&x| !(x >= 0.0 && x.is_finite())) {
                    return Err(Error::Domain(format!("atom location in nu[{c}] must be finite and >= 0")));
                }
                if atom.r.iter().all(|&x| x == 0.0) {
                    return Err(Error::Domain(format!("atom at the origin in nu[{c}]")));
                }
            }
            if let Some(dens) = &m.density1d {
                if d != 1 {
                    return Err(Error::Domain("density1d is only supported when d = 1".into()));
                }
                dens.validate()?;
            }
        }
        let mech = Self {
            d,
            kappa: spec.kappa,
            beta: spec.beta,
            nu: spec.nu,
            tol: Tolerance::default(),
        };
        mech.check_integrability()?;
        Ok(mech)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let spec: MechanismSpec = serde_json::from_str(text)?;
        Self::from_spec(spec)
    }

    pub fn to_spec(&self) -> MechanismSpec {
        MechanismSpec {
            d: self.d,
            kappa: self.kappa.clone(),
            beta: self.beta.clone(),
            nu: self.nu.clone(),
        }
    }

    /// Quadrature tolerance used for density terms.
    pub fn with_tolerance(mut self, tol: Tolerance) -> Self {
        self.tol = tol;
        self
    }

    pub fn tolerance(&self) -> &Tolerance {
        &self.tol
    }

    /// `ψ(λ) = β λ²` in one dimension.
    pub fn feller(beta: f64) -> Result<Self> {
        Self::new(vec![vec![0.0]], vec![beta], vec![JumpMeasure::default()])
    }

    /// Neveu's `ψ(λ) = λ log λ`, as the density `r^{-2}` with drift `γ - 1`.
    pub fn neveu() -> Self {
        Self::new(
            vec![vec![EULER_GAMMA - 1.0]],
            vec![0.0],
            vec![JumpMeasure {
                atoms: vec![],
                density1d: Some(Density1d::InverseSquare { scale: 1.0 }),
            }],
        )
        .expect("neveu parameters are valid")
    }

    /// One-dimensional stable mechanism with density `scale · r^{-1-alpha}`.
    pub fn stable(alpha: f64, scale: f64) -> Result<Self> {
        Self::new(
            vec![vec![0.0]],
            vec![0.0],
            vec![JumpMeasure {
                atoms: vec![],
                density1d: Some(Density1d::Stable { alpha, scale }),
            }],
        )
    }

    pub fn dim(&self) -> usize {
        self.d
    }

    pub fn kappa(&self) -> &[Vec<f64>] {
        &self.kappa
    }

    pub fn beta(&self) -> &[f64] {
        &self.beta
    }

    pub fn nu(&self) -> &[JumpMeasure] {
        &self.nu
    }

    pub fn is_atomic(&self) -> bool {
        self.nu.iter().all(JumpMeasure::is_atomic)
    }

    /// `∫ (r_c² ∧ 1) + Σ_{j≠c} (r_j ∧ 1) dν_c` must be finite.
    fn check_integrability(&self) -> Result<()> {
        for (c, m) in self.nu.iter().enumerate() {
            if let Some(dens) = &m.density1d {
                let near = quadrature::integrate(|r| r * r * dens.eval(r), 0.0, 1.0, &self.tol)?;
                let far = quadrature::integrate_to_infinity(|r| dens.eval(r), 1.0, &self.tol)?;
                let total = near.value + far.value;
                if !total.is_finite() {
                    return Err(Error::Domain(format!("nu[{c}] fails the integrability condition")));
                }
            }
        }
        Ok(())
    }

    fn check_lambda(&self, lambda: &[f64]) -> Result<()> {
        if lambda.len() != self.d {
            return Err(Error::Domain(format!(
                "λ has length {}, mechanism dimension is {}",
                lambda.len(),
                self.d
            )));
        }
        if lambda.iter().any(|&l| !(l >= 0.0 && l.is_finite())) {
            return Err(Error::Domain("λ must be finite and non-negative".into()));
        }
        Ok(())
    }

    pub fn psi(&self, lambda: &[f64]) -> Result<Vec<f64>> {
        self.check_lambda(lambda)?;
        (0..self.d).map(|c| self.psi_component(c, lambda)).collect()
    }

    pub fn psi_component(&self, c: usize, lambda: &[f64]) -> Result<f64> {
        self.check_lambda(lambda)?;
        let mut v = 0.0;
        for (j, &l) in lambda.iter().enumerate() {
            v -= self.kappa[c][j] * l;
        }
        v += self.beta[c] * lambda[c] * lambda[c];
        for atom in &self.nu[c].atoms {
            let dot: f64 = atom.r.iter().zip(lambda).map(|(r, l)| r * l).sum();
            let comp = if atom.r[c] <= 1.0 { lambda[c] * atom.r[c] } else { 0.0 };
            v += atom.mass * ((-dot).exp_m1() + comp);
        }
        if let Some(dens) = &self.nu[c].density1d {
            v += dens.derivative(lambda[0], 0, &self.tol)?;
        }
        Ok(v)
    }

    /// `D^α ψ_c(λ)`.
    pub fn psi_derivative(&self, c: usize, alpha: &MultiIndex, lambda: &[f64]) -> Result<f64> {
        self.check_lambda(lambda)?;
        if alpha.dim() != self.d {
            return Err(Error::Domain("α has the wrong dimension".into()));
        }
        if alpha.is_zero() {
            return self.psi_component(c, lambda);
        }
        let n = alpha.total();
        let mut v = 0.0;
        if n == 1 {
            let j = (0..self.d).find(|&j| alpha.get(j) == 1).expect("unit index");
            v -= self.kappa[c][j];
            if j == c {
                v += 2.0 * self.beta[c] * lambda[c];
            }
        } else if n == 2 && alpha.get(c) == 2 {
            v += 2.0 * self.beta[c];
        }
        let sign = if n.is_multiple_of(2) { 1.0 } else { -1.0 };
        for atom in &self.nu[c].atoms {
            let dot: f64 = atom.r.iter().zip(lambda).map(|(r, l)| r * l).sum();
            let term = sign * alpha.pow(&atom.r) * (-dot).exp();
            v += atom.mass * term;
            if alpha.is_unit(c) && atom.r[c] <= 1.0 {
                v += atom.mass * atom.r[c];
            }
        }
        if let Some(dens) = &self.nu[c].density1d {
            v += dens.derivative(lambda[0], n, &self.tol)?;
        }
        Ok(v)
    }

    /// Every derivative `ψ_c^{(n)}(λ)`, `n = 0..=degree`, of the density part.
    fn density_derivatives(&self, c: usize, lambda: f64, degree: u32) -> Result<Option<Vec<f64>>> {
        match &self.nu[c].density1d {
            None => Ok(None),
            Some(dens) => (0..=degree)
                .map(|n| dens.derivative(lambda, n, &self.tol))
                .collect::<Result<Vec<_>>>()
                .map(Some),
        }
    }

    /// `ψ(U)` for a vector of jets `U` sharing one jet space.
    pub fn psi_jets(&self, u: &[Jet]) -> Result<Vec<Jet>> {
        if u.len() != self.d {
            return Err(Error::Domain("jet vector has the wrong length".into()));
        }
        let space = u[0].space().clone();
        let values: Vec<f64> = u.iter().map(Jet::value).collect();
        self.check_lambda(&values)?;
        let mut out = Vec::with_capacity(self.d);
        for c in 0..self.d {
            let mut acc = Jet::zero(&space);
            for (j, uj) in u.iter().enumerate() {
                if self.kappa[c][j] != 0.0 {
                    acc.axpy(-self.kappa[c][j], uj);
                }
            }
            if self.beta[c] != 0.0 {
                acc.axpy(self.beta[c], &u[c].mul(&u[c]));
            }
            for atom in &self.nu[c].atoms {
                let mut arg = Jet::zero(&space);
                for (j, uj) in u.iter().enumerate() {
                    if atom.r[j] != 0.0 {
                        arg.axpy(-atom.r[j], uj);
                    }
                }
                let mut e = arg.exp();
                e.coeffs_mut()[0] -= 1.0;
                if atom.r[c] <= 1.0 {
                    e.axpy(atom.r[c], &u[c]);
                }
                acc.axpy(atom.mass, &e);
            }
            if let Some(derivs) = self.density_derivatives(c, values[0], space.degree())? {
                acc = acc.add(&u[0].compose(&derivs));
            }
            out.push(acc);
        }
        Ok(out)
    }

    /// Invariant report: `ψ_c(0) = 0` and coefficient sign conditions.
    pub fn validate(&self) -> Vec<(String, bool, String)> {
        let mut rows = Vec::new();
        let zero = vec![0.0; self.d];
        match self.psi(&zero) {
            Ok(v) => {
                let worst = v.iter().fold(0.0f64, |m, x| m.max(x.abs()));
                rows.push(("psi_zero".to_string(), worst <= 1e-12, format!("{worst:.3e}")));
            }
            Err(e) => rows.push(("psi_zero".to_string(), false, e.to_string())),
        }
        let off_diag_ok = (0..self.d).all(|c| (0..self.d).all(|j| j == c || self.kappa[c][j] >= 0.0));
        rows.push(("kappa_offdiag_nonneg".to_string(), off_diag_ok, String::new()));
        let beta_ok = self.beta.iter().all(|&b| b >= 0.0);
        rows.push(("beta_nonneg".to_string(), beta_ok, String::new()));
        rows.push(("integrability".to_string(), self.check_integrability().is_ok(), String::new()));
        rows
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::jet::JetSpace;
    use approx::assert_relative_eq;
    use statrs::function::gamma::gamma;

    fn one_atom(mass: f64, r: f64) -> BranchingMechanism {
        BranchingMechanism::new(
            vec![vec![0.0]],
            vec![0.0],
            vec![JumpMeasure {
                atoms: vec![Atom { mass, r: vec![r] }],
                density1d: None,
            }],
        )
        .unwrap()
    }

    #[test]
    fn feller_and_drift_values() {
        let m = BranchingMechanism::feller(0.5).unwrap();
        assert_relative_eq!(m.psi(&[2.0]).unwrap()[0], 2.0);
        let drift = BranchingMechanism::new(vec![vec![1.0]], vec![0.0], vec![JumpMeasure::default()]).unwrap();
        assert_relative_eq!(drift.psi(&[3.0]).unwrap()[0], -3.0);
        let a2 = MultiIndex::from(vec![2]);
        assert_relative_eq!(m.psi_derivative(0, &a2, &[0.7]).unwrap(), 1.0);
    }

    #[test]
    fn cross_drift_derivative() {
        let m = BranchingMechanism::new(
            vec![vec![0.0, 0.3], vec![0.8, 0.0]],
            vec![0.0, 0.0],
            vec![JumpMeasure::default(), JumpMeasure::default()],
        )
        .unwrap();
        let e1 = MultiIndex::unit(2, 0);
        assert_relative_eq!(m.psi_derivative(1, &e1, &[0.4, 1.1]).unwrap(), -0.8);
    }

    #[test]
    fn single_atom_third_derivative_at_zero() {
        let m = one_atom(1.0, 1.0);
        assert_relative_eq!(
            m.psi_derivative(0, &MultiIndex::from(vec![3]), &[0.0]).unwrap(),
            -1.0
        );
        assert_eq!(m.psi(&[0.0]).unwrap()[0], 0.0);
    }

    #[test]
    fn rejects_bad_parameters() {
        assert!(BranchingMechanism::feller(-1.0).is_err());
        assert!(BranchingMechanism::new(
            vec![vec![0.0, -1.0], vec![0.0, 0.0]],
            vec![0.0, 0.0],
            vec![JumpMeasure::default(), JumpMeasure::default()],
        )
        .is_err());
        assert!(BranchingMechanism::stable(2.5, 1.0).is_err());
        assert!(BranchingMechanism::from_json(r#"{"d":1,"kappa":[[0]],"beta":[1],"nu":[{}],"extra":1}"#).is_err());
    }

    #[test]
    fn json_round_trip() {
        let text = r#"{"d":1,"kappa":[[0.0]],"beta":[0.5],"nu":[{"atoms":[{"mass":2.0,"r":[0.5]}],"density1d":null}]}"#;
        let m = BranchingMechanism::from_json(text).unwrap();
        let again = BranchingMechanism::from_spec(m.to_spec()).unwrap();
        assert_eq!(again.to_spec(), m.to_spec());
        let st = r#"{"d":1,"kappa":[[0]],"beta":[0],"nu":[{"density1d":{"family":"stable","alpha":1.5}}]}"#;
        assert!(BranchingMechanism::from_json(st).is_ok());
    }

    #[test]
    fn stable_matches_gamma_closed_form() {
        // C Γ(-a) λ^a - λ C / (a - 1)
        let (a, c) = (1.5, 0.7);
        let m = BranchingMechanism::stable(a, c).unwrap();
        for &l in &[0.1, 1.0, 4.0] {
            let expect = c * (gamma(-a) * f64::powf(l, a) - l / (a - 1.0));
            assert_relative_eq!(m.psi(&[l]).unwrap()[0], expect, max_relative = 1e-8);
            let d2 = c * gamma(-a) * a * (a - 1.0) * f64::powf(l, a - 2.0);
            assert_relative_eq!(
                m.psi_derivative(0, &MultiIndex::from(vec![2]), &[l]).unwrap(),
                d2,
                max_relative = 1e-8
            );
        }
        assert!(m.psi_derivative(0, &MultiIndex::from(vec![2]), &[0.0]).is_err());
    }

    #[test]
    fn neveu_closed_form() {
        let m = BranchingMechanism::neveu();
        for &l in &[0.2, 1.0, 3.0] {
            assert_relative_eq!(m.psi(&[l]).unwrap()[0], l * f64::ln(l), epsilon = 1e-14);
            assert_relative_eq!(
                m.psi_derivative(0, &MultiIndex::from(vec![1]), &[l]).unwrap(),
                f64::ln(l) + 1.0,
                epsilon = 1e-14
            );
        }
    }

    #[test]
    fn inverse_square_density_matches_quadrature() {
        // λ log λ + (γ - 1) λ against a direct integral of the compensated exponential
        let tol = Tolerance::new(1e-12, 1e-11).with_max_intervals(5000);
        let l: f64 = 2.0;
        let inner = quadrature::integrate(|r| exp_remainder2(l * r) / (r * r), 0.0, 1.0, &tol).unwrap();
        let outer = quadrature::integrate_to_infinity(|r| (-l * r).exp_m1() / (r * r), 1.0, &tol).unwrap();
        let dens = Density1d::InverseSquare { scale: 1.0 };
        assert_relative_eq!(
            dens.derivative(l, 0, &tol).unwrap(),
            inner.value + outer.value,
            max_relative = 1e-9
        );
    }

    #[test]
    fn jets_agree_with_pointwise_derivatives() {
        let m = BranchingMechanism::new(
            vec![vec![0.2, 0.5], vec![0.1, -0.3]],
            vec![0.5, 0.25],
            vec![
                JumpMeasure {
                    atoms: vec![Atom { mass: 1.5, r: vec![0.6, 0.4] }, Atom { mass: 0.3, r: vec![2.0, 0.0] }],
                    density1d: None,
                },
                JumpMeasure {
                    atoms: vec![Atom { mass: 0.8, r: vec![0.0, 1.2] }],
                    density1d: None,
                },
            ],
        )
        .unwrap();
        let space = JetSpace::get(2, 4).unwrap();
        let lam = [0.7, 1.3];
        let u: Vec<Jet> = (0..2).map(|i| Jet::variable(&space, i, lam[i])).collect();
        let psi = m.psi_jets(&u).unwrap();
        for c in 0..2 {
            for alpha in space.monomials() {
                assert_relative_eq!(
                    psi[c].derivative(alpha).unwrap(),
                    m.psi_derivative(c, alpha, &lam).unwrap(),
                    max_relative = 1e-12,
                    epsilon = 1e-14
                );
            }
        }
    }
}
