//! Multi-indices over `Z^d_{>=0}`.
//!
//! Used for sample sizes, vertex outdegrees, rootdegrees and for addressing
//! mixed partial derivatives.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(transparent)]
pub struct MultiIndex(Vec<u32>);

impl MultiIndex {
    pub fn new(entries: Vec<u32>) -> Result<Self> {
        if entries.is_empty() {
            return Err(Error::Domain("multi-index must have dimension >= 1".into()));
        }
        Ok(Self(entries))
    }

    pub fn zeros(d: usize) -> Self {
        Self(vec![0; d])
    }

    /// The unit vector `e_i`.
    pub fn unit(d: usize, i: usize) -> Self {
        let mut v = vec![0; d];
        v[i] = 1;
        Self(v)
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn entries(&self) -> &[u32] {
        &self.0
    }

    pub fn get(&self, i: usize) -> u32 {
        self.0[i]
    }

    /// `|alpha|`
    pub fn total(&self) -> u32 {
        self.0.iter().sum()
    }

    pub fn is_zero(&self) -> bool {
        self.0.iter().all(|&a| a == 0)
    }

    pub fn is_unit(&self, i: usize) -> bool {
        self.total() == 1 && self.0[i] == 1
    }

    /// `alpha!`
    pub fn factorial(&self) -> f64 {
        self.0.iter().map(|&a| factorial(a)).product()
    }

    /// `lambda^alpha` with `0^0 = 1`.
    pub fn pow(&self, lambda: &[f64]) -> f64 {
        self.0
            .iter()
            .zip(lambda)
            .map(|(&a, &l)| if a == 0 { 1.0 } else { l.powi(a as i32) })
            .product()
    }

    /// `lambda ≻ alpha`: `lambda_i > 0` wherever `alpha_i > 0`.
    pub fn dominated_by_support(&self, lambda: &[f64]) -> bool {
        self.0.iter().zip(lambda).all(|(&a, &l)| a == 0 || l > 0.0)
    }

    /// Componentwise `self <= other`.
    pub fn le(&self, other: &MultiIndex) -> bool {
        self.0.iter().zip(&other.0).all(|(a, b)| a <= b)
    }

    pub fn add(&self, other: &MultiIndex) -> MultiIndex {
        MultiIndex(self.0.iter().zip(&other.0).map(|(a, b)| a + b).collect())
    }

    /// Componentwise difference; `None` unless `other <= self`.
    pub fn checked_sub(&self, other: &MultiIndex) -> Option<MultiIndex> {
        self.0
            .iter()
            .zip(&other.0)
            .map(|(a, b)| a.checked_sub(*b))
            .collect::<Option<Vec<_>>>()
            .map(MultiIndex)
    }

    /// `prod_i C(self_i, other_i)`.
    pub fn binomial(&self, other: &MultiIndex) -> f64 {
        self.0
            .iter()
            .zip(&other.0)
            .map(|(&n, &k)| binomial(n, k))
            .product()
    }

    /// Every multi-index of dimension `d` with `|alpha| <= degree`, graded
    /// by total degree and reverse-lexicographic inside a degree.
    pub fn all_up_to(d: usize, degree: u32) -> Vec<MultiIndex> {
        let mut out = Vec::new();
        for total in 0..=degree {
            let mut cur = vec![0u32; d];
            compositions(total, 0, &mut cur, &mut out);
        }
        out
    }

    /// Sub-indices of `self` in the order of [`MultiIndex::all_up_to`].
    pub fn sub_indices_graded(&self) -> Vec<MultiIndex> {
        MultiIndex::all_up_to(self.dim(), self.total())
            .into_iter()
            .filter(|a| a.le(self))
            .collect()
    }

    /// Every multi-index `beta` with `0 <= beta <= self`.
    pub fn sub_indices(&self) -> Vec<MultiIndex> {
        let mut out = vec![MultiIndex::zeros(self.dim())];
        for (i, &a) in self.0.iter().enumerate() {
            let mut next = Vec::with_capacity(out.len() * (a as usize + 1));
            for base in &out {
                for v in 0..=a {
                    let mut m = base.clone();
                    m.0[i] = v;
                    next.push(m);
                }
            }
            out = next;
        }
        out
    }
}

fn compositions(remaining: u32, pos: usize, cur: &mut Vec<u32>, out: &mut Vec<MultiIndex>) {
    let d = cur.len();
    if pos == d - 1 {
        cur[pos] = remaining;
        out.push(MultiIndex(cur.clone()));
        return;
    }
    for v in (0..=remaining).rev() {
        cur[pos] = v;
        compositions(remaining - v, pos + 1, cur, out);
    }
    cur[pos] = 0;
}

pub fn factorial(n: u32) -> f64 {
    (1..=n).map(f64::from).product()
}

pub fn binomial(n: u32, k: u32) -> f64 {
    if k > n {
        return 0.0;
    }
    let k = k.min(n - k);
    let mut acc = 1.0;
    for j in 0..k {
        acc = acc * f64::from(n - j) / f64::from(j + 1);
    }
    acc.round()
}

impl fmt::Debug for MultiIndex {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{self}")
    }
}

impl fmt::Display for MultiIndex {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "(")?;
        for (i, a) in self.0.iter().enumerate() {
            if i > 0 {
                write!(f, ",")?;
            }
            write!(f, "{a}")?;
        }
        write!(f, ")")
    }
}

impl From<Vec<u32>> for MultiIndex {
    fn from(v: Vec<u32>) -> Self {
        assert!(!v.is_empty(), "multi-index must have dimension >= 1");
        Self(v)
    }
}

impl std::str::FromStr for MultiIndex {
    type Err = Error;

    /// Parses `2,1,0` (optionally wrapped in brackets or parentheses).
    fn from_str(s: &str) -> Result<Self> {
        let trimmed = s.trim().trim_matches(|c| matches!(c, '(' | ')' | '[' | ']'));
        let entries = trimmed
            .split(',')
            .map(|p| {
                p.trim()
                    .parse::<u32>()
                    .map_err(|e| Error::Config(format!("bad multi-index entry {p:?}: {e}")))
            })
            .collect::<Result<Vec<_>>>()?;
        MultiIndex::new(entries)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn graded_enumeration_counts() {
        // C(d + D, d) monomials of degree <= D
        assert_eq!(MultiIndex::all_up_to(1, 4).len(), 5);
        assert_eq!(MultiIndex::all_up_to(2, 3).len(), 10);
        assert_eq!(MultiIndex::all_up_to(3, 4).len(), 35);
        let all = MultiIndex::all_up_to(2, 2);
        assert!(all[0].is_zero());
        assert_eq!(all[1], MultiIndex::from(vec![1, 0]));
        assert_eq!(all[2], MultiIndex::from(vec![0, 1]));
    }

    #[test]
    fn factorial_pow_and_zero_power_convention() {
        let a = MultiIndex::from(vec![2, 0, 3]);
        assert_eq!(a.total(), 5);
        assert_eq!(a.factorial(), 12.0);
        assert_eq!(a.pow(&[2.0, 0.0, 1.5]), 4.0 * 3.375);
        assert!(a.dominated_by_support(&[1.0, 0.0, 1.0]));
        assert!(!a.dominated_by_support(&[0.0, 1.0, 1.0]));
    }

    #[test]
    fn sub_indices_and_binomials() {
        let k = MultiIndex::from(vec![2, 1]);
        assert_eq!(k.sub_indices().len(), 6);
        assert_eq!(k.binomial(&MultiIndex::from(vec![1, 1])), 2.0);
        assert_eq!(binomial(6, 3), 20.0);
        assert_eq!(binomial(2, 3), 0.0);
    }

    #[test]
    fn parse() {
        let m: MultiIndex = "[2, 1]".parse().unwrap();
        assert_eq!(m, MultiIndex::from(vec![2, 1]));
        assert!("".parse::<MultiIndex>().is_err());
    }
}
