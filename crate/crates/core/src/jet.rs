//! Truncated multivariate Taylor polynomials.
//!
//! A [`Jet`] stores Taylor coefficients `D^α f(p) / α!` for every `|α| <= D`
//! in a shared [`JetSpace`]. Arithmetic is exact truncation of the formal
//! power series at total degree `D`.

use std::collections::HashMap;
use std::fmt;
use std::sync::{Arc, Mutex, OnceLock};

use crate::error::{Error, Result};
use crate::multi_index::{factorial, MultiIndex};

/// Hard cap on the total degree of a jet space.
pub const MAX_DEGREE: u32 = 8;

/// Monomial layout for jets in `d` variables truncated at degree `D`.
pub struct JetSpace {
    dim: usize,
    degree: u32,
    monomials: Vec<MultiIndex>,
    index: HashMap<MultiIndex, usize>,
    /// `products[n]` lists every `(i, j)` with `m_i + m_j = m_n`.
    products: Vec<Vec<(u32, u32)>>,
    /// Position of the degree-1 monomial `e_i`.
    units: Vec<usize>,
}

impl JetSpace {
    /// Shared space for `(dim, degree)`; spaces are built once per process.
    pub fn get(dim: usize, degree: u32) -> Result<Arc<JetSpace>> {
        if dim == 0 {
            return Err(Error::Domain("jet dimension must be >= 1".into()));
        }
        if degree > MAX_DEGREE {
            return Err(Error::Contract(format!(
                "jet degree {degree} exceeds the cap {MAX_DEGREE}"
            )));
        }
        static CACHE: OnceLock<Mutex<HashMap<(usize, u32), Arc<JetSpace>>>> = OnceLock::new();
        let cache = CACHE.get_or_init(|| Mutex::new(HashMap::new()));
        let mut guard = cache.lock().unwrap_or_else(|e| e.into_inner());
        Ok(guard
            .entry((dim, degree))
            .or_insert_with(|| Arc::new(JetSpace::build(dim, degree)))
            .clone())
    }

    fn build(dim: usize, degree: u32) -> JetSpace {
        let monomials = MultiIndex::all_up_to(dim, degree);
        let index: HashMap<MultiIndex, usize> = monomials
            .iter()
            .enumerate()
            .map(|(i, m)| (m.clone(), i))
            .collect();
        let mut products = vec![Vec::new(); monomials.len()];
        for (i, a) in monomials.iter().enumerate() {
            for (j, b) in monomials.iter().enumerate() {
                if a.total() + b.total() > degree {
                    continue;
                }
                let n = index[&a.add(b)];
                products[n].push((i as u32, j as u32));
            }
        }
        let units = (0..dim)
            .map(|i| {
                if degree == 0 {
                    usize::MAX
                } else {
                    index[&MultiIndex::unit(dim, i)]
                }
            })
            .collect();
        JetSpace {
            dim,
            degree,
            monomials,
            index,
            products,
            units,
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn degree(&self) -> u32 {
        self.degree
    }

    pub fn len(&self) -> usize {
        self.monomials.len()
    }

    pub fn is_empty(&self) -> bool {
        self.monomials.is_empty()
    }

    pub fn monomials(&self) -> &[MultiIndex] {
        &self.monomials
    }

    pub fn position(&self, alpha: &MultiIndex) -> Option<usize> {
        self.index.get(alpha).copied()
    }

    /// `out = a * b` on raw coefficient slices.
    pub fn mul_into(&self, a: &[f64], b: &[f64], out: &mut [f64]) {
        for (n, pairs) in self.products.iter().enumerate() {
            let mut acc = 0.0;
            for &(i, j) in pairs {
                acc += a[i as usize] * b[j as usize];
            }
            out[n] = acc;
        }
    }

    /// `Σ_n f_n h^n / n!` for `h` with zero constant term, by Horner's rule.
    /// `derivs[n]` is the n-th derivative of a scalar map at the base value.
    pub fn compose_into(&self, h: &[f64], derivs: &[f64], out: &mut [f64]) {
        let top = (self.degree as usize).min(derivs.len().saturating_sub(1));
        out.iter_mut().for_each(|v| *v = 0.0);
        out[0] = derivs[top] / factorial(top as u32);
        let mut tmp = vec![0.0; self.len()];
        for n in (0..top).rev() {
            self.mul_into(out, h, &mut tmp);
            tmp[0] += derivs[n] / factorial(n as u32);
            out.copy_from_slice(&tmp);
        }
    }
}

impl fmt::Debug for JetSpace {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("JetSpace")
            .field("dim", &self.dim)
            .field("degree", &self.degree)
            .field("len", &self.monomials.len())
            .finish()
    }
}

#[derive(Clone)]
pub struct Jet {
    space: Arc<JetSpace>,
    coeffs: Vec<f64>,
}

impl Jet {
    pub fn zero(space: &Arc<JetSpace>) -> Self {
        Self {
            space: space.clone(),
            coeffs: vec![0.0; space.len()],
        }
    }

    pub fn constant(space: &Arc<JetSpace>, value: f64) -> Self {
        let mut j = Self::zero(space);
        j.coeffs[0] = value;
        j
    }

    /// The coordinate map `λ ↦ λ_i` expanded at `λ_i = value`.
    pub fn variable(space: &Arc<JetSpace>, i: usize, value: f64) -> Self {
        let mut j = Self::constant(space, value);
        if space.degree > 0 {
            j.coeffs[space.units[i]] = 1.0;
        }
        j
    }

    pub fn from_coeffs(space: &Arc<JetSpace>, coeffs: Vec<f64>) -> Self {
        assert_eq!(coeffs.len(), space.len(), "coefficient count mismatch");
        Self {
            space: space.clone(),
            coeffs,
        }
    }

    pub fn space(&self) -> &Arc<JetSpace> {
        &self.space
    }

    pub fn coeffs(&self) -> &[f64] {
        &self.coeffs
    }

    pub fn coeffs_mut(&mut self) -> &mut [f64] {
        &mut self.coeffs
    }

    pub fn value(&self) -> f64 {
        self.coeffs[0]
    }

    /// Taylor coefficient `D^α f / α!`, zero above the truncation degree.
    pub fn coeff(&self, alpha: &MultiIndex) -> f64 {
        self.space
            .position(alpha)
            .map_or(0.0, |p| self.coeffs[p])
    }

    /// Mixed partial `D^α f` at the base point.
    pub fn derivative(&self, alpha: &MultiIndex) -> Result<f64> {
        if alpha.total() > self.space.degree {
            return Err(Error::Contract(format!(
                "derivative {alpha} requested from a degree-{} jet",
                self.space.degree
            )));
        }
        Ok(self.coeff(alpha) * alpha.factorial())
    }

    pub fn add(&self, other: &Jet) -> Jet {
        let coeffs = self
            .coeffs
            .iter()
            .zip(&other.coeffs)
            .map(|(a, b)| a + b)
            .collect();
        Jet {
            space: self.space.clone(),
            coeffs,
        }
    }

    pub fn sub(&self, other: &Jet) -> Jet {
        let coeffs = self
            .coeffs
            .iter()
            .zip(&other.coeffs)
            .map(|(a, b)| a - b)
            .collect();
        Jet {
            space: self.space.clone(),
            coeffs,
        }
    }

    pub fn scale(&self, s: f64) -> Jet {
        Jet {
            space: self.space.clone(),
            coeffs: self.coeffs.iter().map(|a| a * s).collect(),
        }
    }

    /// `self += s * other`
    pub fn axpy(&mut self, s: f64, other: &Jet) {
        for (a, b) in self.coeffs.iter_mut().zip(&other.coeffs) {
            *a += s * b;
        }
    }

    pub fn mul(&self, other: &Jet) -> Jet {
        let mut out = Jet::zero(&self.space);
        self.space.mul_into(&self.coeffs, &other.coeffs, &mut out.coeffs);
        out
    }

    /// The jet with its constant term removed.
    pub fn nonconstant(&self) -> Jet {
        let mut h = self.clone();
        h.coeffs[0] = 0.0;
        h
    }

    /// `g ∘ self` where `derivs[n] = g^{(n)}(self.value())`.
    pub fn compose(&self, derivs: &[f64]) -> Jet {
        let h = self.nonconstant();
        let mut out = Jet::zero(&self.space);
        self.space.compose_into(&h.coeffs, derivs, &mut out.coeffs);
        out
    }

    pub fn exp(&self) -> Jet {
        let e = self.value().exp();
        let derivs = vec![e; self.space.degree as usize + 1];
        self.compose(&derivs)
    }

    /// `exp(self - self.value())`; the relative exponential, free of the
    /// overflow/underflow that `e^{a_0}` can cause.
    pub fn exp_shifted(&self) -> Jet {
        let derivs = vec![1.0; self.space.degree as usize + 1];
        self.compose(&derivs)
    }

    pub fn max_abs(&self) -> f64 {
        self.coeffs.iter().fold(0.0, |m, v| m.max(v.abs()))
    }
}

impl fmt::Debug for Jet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let mut m = f.debug_map();
        for (alpha, c) in self.space.monomials.iter().zip(&self.coeffs) {
            m.entry(alpha, c);
        }
        m.finish()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn product_of_linear_forms() {
        let s = JetSpace::get(2, 3).unwrap();
        let x = Jet::variable(&s, 0, 1.0);
        let y = Jet::variable(&s, 1, 2.0);
        // (x y)(1 + a, 2 + b) = 2 + 2a + b + ab
        let p = x.mul(&y);
        assert_relative_eq!(p.value(), 2.0);
        assert_relative_eq!(p.coeff(&MultiIndex::from(vec![1, 0])), 2.0);
        assert_relative_eq!(p.coeff(&MultiIndex::from(vec![0, 1])), 1.0);
        assert_relative_eq!(p.coeff(&MultiIndex::from(vec![1, 1])), 1.0);
        assert_eq!(p.coeff(&MultiIndex::from(vec![2, 0])), 0.0);
    }

    #[test]
    fn exp_matches_closed_form_derivatives() {
        // f(x, y) = exp(2x - y) at (0.3, 0.1); D^α f = 2^a (-1)^b f
        let s = JetSpace::get(2, 5).unwrap();
        let arg = Jet::variable(&s, 0, 0.3)
            .scale(2.0)
            .sub(&Jet::variable(&s, 1, 0.1));
        let e = arg.exp();
        let f0 = (0.5f64).exp();
        for alpha in s.monomials() {
            let expect = 2f64.powi(alpha.get(0) as i32)
                * (-1f64).powi(alpha.get(1) as i32)
                * f0;
            assert_relative_eq!(e.derivative(alpha).unwrap(), expect, max_relative = 1e-13);
        }
    }

    #[test]
    fn compose_log_of_one_plus() {
        // log(1 + x) at x = 0.5 via compose with log derivatives
        let s = JetSpace::get(1, 6).unwrap();
        let x = Jet::variable(&s, 0, 1.5);
        let derivs: Vec<f64> = (0..=6)
            .map(|n| {
                if n == 0 {
                    1.5f64.ln()
                } else {
                    (-1f64).powi(n - 1) * factorial((n - 1) as u32) / 1.5f64.powi(n)
                }
            })
            .collect();
        let l = x.compose(&derivs);
        for n in 1..=6u32 {
            let alpha = MultiIndex::from(vec![n]);
            assert_relative_eq!(l.derivative(&alpha).unwrap(), derivs[n as usize], max_relative = 1e-13);
        }
    }

    #[test]
    fn degree_cap_and_contract() {
        assert!(JetSpace::get(1, MAX_DEGREE + 1).is_err());
        let s = JetSpace::get(1, 2).unwrap();
        let x = Jet::variable(&s, 0, 1.0);
        assert!(x.derivative(&MultiIndex::from(vec![3])).is_err());
    }
}
