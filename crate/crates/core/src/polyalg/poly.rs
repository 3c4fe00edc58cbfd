use std::fmt;
use std::ops::{Add, Mul, Neg, Sub};

use nalgebra::Complex;
use serde::{Deserialize, Serialize};

use crate::{Error, Matrix, Result, Vector};

/// Dense real polynomial with ascending coefficients.
///
/// Trailing (highest-degree) exact zeros are trimmed on construction, so the
/// zero polynomial is stored as an empty coefficient list and reports
/// `degree() == None`.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(transparent)]
pub struct ScalarPoly {
    coeffs: Vec<f64>,
}

impl ScalarPoly {
    pub fn new(mut coeffs: Vec<f64>) -> Self {
        while coeffs.last() == Some(&0.0) {
            coeffs.pop();
        }
        Self { coeffs }
    }

    pub fn zero() -> Self {
        Self { coeffs: Vec::new() }
    }

    pub fn constant(c: f64) -> Self {
        Self::new(vec![c])
    }

    /// `a0 + a1·λ`
    pub fn linear(a0: f64, a1: f64) -> Self {
        Self::new(vec![a0, a1])
    }

    /// `∏ (λ - r)` over the given roots.
    pub fn from_roots(roots: &[f64]) -> Self {
        roots
            .iter()
            .fold(Self::constant(1.0), |acc, &r| &acc * &Self::linear(-r, 1.0))
    }

    pub fn coeffs(&self) -> &[f64] {
        &self.coeffs
    }

    pub fn coeff(&self, k: usize) -> f64 {
        self.coeffs.get(k).copied().unwrap_or(0.0)
    }

    /// `None` encodes the −∞ degree of the zero polynomial.
    pub fn degree(&self) -> Option<usize> {
        self.coeffs.len().checked_sub(1)
    }

    pub fn is_zero(&self) -> bool {
        self.coeffs.is_empty()
    }

    pub fn leading(&self) -> f64 {
        self.coeffs.last().copied().unwrap_or(0.0)
    }

    pub fn max_abs_coeff(&self) -> f64 {
        self.coeffs.iter().fold(0.0_f64, |m, c| m.max(c.abs()))
    }

    pub fn eval(&self, x: f64) -> f64 {
        self.coeffs.iter().rev().fold(0.0, |acc, &c| acc * x + c)
    }

    pub fn eval_complex(&self, z: Complex<f64>) -> Complex<f64> {
        self.coeffs
            .iter()
            .rev()
            .fold(Complex::new(0.0, 0.0), |acc, &c| acc * z + c)
    }

    pub fn derivative(&self) -> Self {
        Self::new(
            self.coeffs
                .iter()
                .enumerate()
                .skip(1)
                .map(|(k, &c)| k as f64 * c)
                .collect(),
        )
    }

    pub fn scale(&self, s: f64) -> Self {
        Self::new(self.coeffs.iter().map(|c| c * s).collect())
    }

    /// Drops leading coefficients whose magnitude is below `rel_tol` times the
    /// largest coefficient.
    pub fn trimmed(&self, rel_tol: f64) -> Self {
        let cut = rel_tol * self.max_abs_coeff();
        let mut coeffs = self.coeffs.clone();
        while coeffs.last().is_some_and(|c| c.abs() <= cut) {
            coeffs.pop();
        }
        Self::new(coeffs)
    }

    /// All complex roots (with multiplicity), see [`super::poly_roots`].
    pub fn roots(&self, tol: f64) -> Result<Vec<Complex<f64>>> {
        super::roots::poly_roots(self, tol)
    }

    /// Real roots (ascending) under the real-acceptance tolerance `tol`.
    pub fn real_roots(&self, tol: f64) -> Result<Vec<f64>> {
        let mut out: Vec<f64> = self
            .roots(tol)?
            .into_iter()
            .filter(|z| z.im == 0.0)
            .map(|z| z.re)
            .collect();
        out.sort_by(|a, b| a.total_cmp(b));
        Ok(out)
    }

    /// Polynomial of degree `< xs.len()` through the points `(xs[k], ys[k])`.
    ///
    /// The Vandermonde system is solved in the scaled variable `λ / s` with
    /// `s = max |xs|`, then mapped back.
    pub fn interpolate(xs: &[f64], ys: &[f64]) -> Result<Self> {
        if xs.len() != ys.len() || xs.is_empty() {
            return Err(Error::InvalidInput(
                "interpolation needs equally many abscissae and values".into(),
            ));
        }
        let n = xs.len();
        let s = xs.iter().fold(0.0_f64, |m, x| m.max(x.abs())).max(1e-300);
        let vander = Matrix::from_fn(n, n, |i, j| (xs[i] / s).powi(j as i32));
        let rhs = Vector::from_column_slice(ys);
        let sol = vander
            .lu()
            .solve(&rhs)
            .ok_or_else(|| Error::DegenerateInput("repeated interpolation nodes".into()))?;
        Ok(Self::new(
            sol.iter()
                .enumerate()
                .map(|(k, c)| c / s.powi(k as i32))
                .collect(),
        ))
    }

    /// Chebyshev nodes of the first kind on `[-s, s]`.
    pub fn chebyshev_nodes(count: usize, s: f64) -> Vec<f64> {
        (0..count)
            .map(|k| {
                s * (std::f64::consts::PI * (2 * k + 1) as f64 / (2 * count) as f64).cos()
            })
            .collect()
    }
}

impl fmt::Display for ScalarPoly {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.is_zero() {
            return write!(f, "0");
        }
        let mut first = true;
        for (k, c) in self.coeffs.iter().enumerate() {
            if *c == 0.0 {
                continue;
            }
            if !first {
                write!(f, " + ")?;
            }
            first = false;
            match k {
                0 => write!(f, "{c}")?,
                1 => write!(f, "{c}·λ")?,
                _ => write!(f, "{c}·λ^{k}")?,
            }
        }
        Ok(())
    }
}

impl Add for &ScalarPoly {
    type Output = ScalarPoly;

    fn add(self, rhs: &ScalarPoly) -> ScalarPoly {
        let n = self.coeffs.len().max(rhs.coeffs.len());
        ScalarPoly::new((0..n).map(|k| self.coeff(k) + rhs.coeff(k)).collect())
    }
}

impl Sub for &ScalarPoly {
    type Output = ScalarPoly;

    fn sub(self, rhs: &ScalarPoly) -> ScalarPoly {
        let n = self.coeffs.len().max(rhs.coeffs.len());
        ScalarPoly::new((0..n).map(|k| self.coeff(k) - rhs.coeff(k)).collect())
    }
}

impl Mul for &ScalarPoly {
    type Output = ScalarPoly;

    fn mul(self, rhs: &ScalarPoly) -> ScalarPoly {
        if self.is_zero() || rhs.is_zero() {
            return ScalarPoly::zero();
        }
        let mut out = vec![0.0; self.coeffs.len() + rhs.coeffs.len() - 1];
        for (i, a) in self.coeffs.iter().enumerate() {
            for (j, b) in rhs.coeffs.iter().enumerate() {
                out[i + j] += a * b;
            }
        }
        ScalarPoly::new(out)
    }
}

impl Neg for &ScalarPoly {
    type Output = ScalarPoly;

    fn neg(self) -> ScalarPoly {
        self.scale(-1.0)
    }
}

impl Add for ScalarPoly {
    type Output = ScalarPoly;

    fn add(self, rhs: ScalarPoly) -> ScalarPoly {
        &self + &rhs
    }
}

impl Sub for ScalarPoly {
    type Output = ScalarPoly;

    fn sub(self, rhs: ScalarPoly) -> ScalarPoly {
        &self - &rhs
    }
}

impl Mul for ScalarPoly {
    type Output = ScalarPoly;

    fn mul(self, rhs: ScalarPoly) -> ScalarPoly {
        &self * &rhs
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn trailing_zeros_are_trimmed() {
        let p = ScalarPoly::new(vec![1.0, 2.0, 0.0, 0.0]);
        assert_eq!(p.degree(), Some(1));
        assert_eq!(ScalarPoly::new(vec![0.0, 0.0]).degree(), None);
        assert!(ScalarPoly::zero().is_zero());
    }

    #[test]
    fn arithmetic_and_eval() {
        let a = ScalarPoly::new(vec![1.0, 1.0]);
        let b = ScalarPoly::new(vec![-1.0, 1.0]);
        let prod = &a * &b;
        assert_eq!(prod.coeffs(), &[-1.0, 0.0, 1.0]);
        assert_eq!((&prod - &prod).degree(), None);
        assert_eq!(prod.eval(3.0), 8.0);
        assert_eq!(prod.derivative().coeffs(), &[0.0, 2.0]);
    }

    #[test]
    fn interpolation_recovers_cubic() {
        let p = ScalarPoly::new(vec![2.0, -1.0, 0.5, 3.0]);
        let xs = ScalarPoly::chebyshev_nodes(4, 5.0);
        let ys: Vec<f64> = xs.iter().map(|&x| p.eval(x)).collect();
        let q = ScalarPoly::interpolate(&xs, &ys).unwrap();
        for k in 0..4 {
            assert!((p.coeff(k) - q.coeff(k)).abs() < 1e-10);
        }
    }
}
