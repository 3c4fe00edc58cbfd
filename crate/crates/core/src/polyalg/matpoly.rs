use serde::{Deserialize, Serialize};

use super::ScalarPoly;
use crate::linalg::{from_rows, to_rows};
use crate::{Error, Matrix, Result};

/// Matrix polynomial `Σ_k C_k λ^k` with real `rows × cols` coefficients.
#[derive(Debug, Clone, PartialEq)]
pub struct MatrixPoly {
    coeffs: Vec<Matrix>,
    rows: usize,
    cols: usize,
}

impl MatrixPoly {
    /// Builds from ascending coefficients; trailing all-zero coefficients are
    /// dropped so that `degree()` is the index of the last nonzero matrix.
    pub fn new(mut coeffs: Vec<Matrix>, rows: usize, cols: usize) -> Result<Self> {
        if coeffs.iter().any(|c| c.shape() != (rows, cols)) {
            return Err(Error::InvalidInput(format!(
                "matrix polynomial coefficients must all be {rows}x{cols}"
            )));
        }
        while coeffs.last().is_some_and(|c| c.iter().all(|&x| x == 0.0)) {
            coeffs.pop();
        }
        Ok(Self { coeffs, rows, cols })
    }

    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self { coeffs: Vec::new(), rows, cols }
    }

    pub fn constant(m: Matrix) -> Self {
        let (r, c) = m.shape();
        Self::new(vec![m], r, c).expect("shape is consistent")
    }

    /// `c0 + c1·λ`
    pub fn linear(c0: Matrix, c1: Matrix) -> Result<Self> {
        let (r, c) = c0.shape();
        Self::new(vec![c0, c1], r, c)
    }

    /// Assembles a matrix polynomial from its scalar-polynomial entries.
    pub fn from_entries(entries: &[Vec<ScalarPoly>]) -> Result<Self> {
        let rows = entries.len();
        let cols = entries.first().map_or(0, Vec::len);
        if entries.iter().any(|r| r.len() != cols) {
            return Err(Error::InvalidInput("ragged polynomial entries".into()));
        }
        let len = entries
            .iter()
            .flatten()
            .map(|p| p.coeffs().len())
            .max()
            .unwrap_or(0);
        let coeffs = (0..len)
            .map(|k| Matrix::from_fn(rows, cols, |i, j| entries[i][j].coeff(k)))
            .collect();
        Self::new(coeffs, rows, cols)
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn coeffs(&self) -> &[Matrix] {
        &self.coeffs
    }

    pub fn coeff(&self, k: usize) -> Matrix {
        self.coeffs
            .get(k)
            .cloned()
            .unwrap_or_else(|| Matrix::zeros(self.rows, self.cols))
    }

    pub fn degree(&self) -> Option<usize> {
        self.coeffs.len().checked_sub(1)
    }

    pub fn is_zero(&self) -> bool {
        self.coeffs.is_empty()
    }

    pub fn entry(&self, i: usize, j: usize) -> ScalarPoly {
        ScalarPoly::new(self.coeffs.iter().map(|c| c[(i, j)]).collect())
    }

    pub fn eval(&self, lambda: f64) -> Matrix {
        self.coeffs
            .iter()
            .rev()
            .fold(Matrix::zeros(self.rows, self.cols), |acc, c| acc * lambda + c)
    }

    pub fn transpose(&self) -> Self {
        Self {
            coeffs: self.coeffs.iter().map(Matrix::transpose).collect(),
            rows: self.cols,
            cols: self.rows,
        }
    }

    pub fn derivative(&self) -> Self {
        let coeffs = self
            .coeffs
            .iter()
            .enumerate()
            .skip(1)
            .map(|(k, c)| c * k as f64)
            .collect();
        Self::new(coeffs, self.rows, self.cols).expect("shape preserved")
    }

    pub fn scale(&self, s: f64) -> Self {
        Self::new(self.coeffs.iter().map(|c| c * s).collect(), self.rows, self.cols)
            .expect("shape preserved")
    }

    pub fn add(&self, other: &Self) -> Result<Self> {
        self.check_same_shape(other)?;
        let n = self.coeffs.len().max(other.coeffs.len());
        Self::new(
            (0..n).map(|k| self.coeff(k) + other.coeff(k)).collect(),
            self.rows,
            self.cols,
        )
    }

    pub fn sub(&self, other: &Self) -> Result<Self> {
        self.add(&other.scale(-1.0))
    }

    pub fn mul(&self, other: &Self) -> Result<Self> {
        if self.cols != other.rows {
            return Err(Error::InvalidInput(format!(
                "cannot multiply {}x{} by {}x{} matrix polynomials",
                self.rows, self.cols, other.rows, other.cols
            )));
        }
        if self.is_zero() || other.is_zero() {
            return Ok(Self::zeros(self.rows, other.cols));
        }
        let mut out =
            vec![Matrix::zeros(self.rows, other.cols); self.coeffs.len() + other.coeffs.len() - 1];
        for (i, a) in self.coeffs.iter().enumerate() {
            for (j, b) in other.coeffs.iter().enumerate() {
                out[i + j] += a * b;
            }
        }
        Self::new(out, self.rows, other.cols)
    }

    pub fn left_mul(&self, m: &Matrix) -> Result<Self> {
        Self::constant(m.clone()).mul(self)
    }

    pub fn right_mul(&self, m: &Matrix) -> Result<Self> {
        self.mul(&Self::constant(m.clone()))
    }

    pub fn max_abs_coeff(&self) -> f64 {
        self.coeffs.iter().fold(0.0_f64, |m, c| m.max(c.amax()))
    }

    pub fn is_symmetric(&self, tol: f64) -> bool {
        let scale = 1.0 + self.max_abs_coeff();
        self.rows == self.cols
            && self
                .coeffs
                .iter()
                .all(|c| (c - c.transpose()).amax() <= tol * scale)
    }

    /// Determinant polynomial. Laplace expansion on polynomial entries for
    /// sizes up to 4, Chebyshev-node interpolation beyond.
    pub fn det(&self) -> Result<ScalarPoly> {
        if self.rows != self.cols {
            return Err(Error::InvalidInput("determinant of a non-square matrix polynomial".into()));
        }
        let n = self.rows;
        if n == 0 {
            return Ok(ScalarPoly::constant(1.0));
        }
        if n <= 4 {
            let entries: Vec<Vec<ScalarPoly>> = (0..n)
                .map(|i| (0..n).map(|j| self.entry(i, j)).collect())
                .collect();
            return Ok(laplace_det(&entries));
        }
        let deg = n * self.degree().unwrap_or(0);
        let scale = self.eval_scale();
        let xs = ScalarPoly::chebyshev_nodes(deg + 1, scale);
        let ys: Vec<f64> = xs.iter().map(|&x| self.eval(x).determinant()).collect();
        ScalarPoly::interpolate(&xs, &ys)
    }

    /// Characteristic scale of λ for interpolation: ratio of low- to
    /// high-order coefficient norms, at least 1.
    fn eval_scale(&self) -> f64 {
        let lo = self.coeff(0).norm();
        let hi = self.coeffs.last().map_or(1.0, Matrix::norm).max(1e-300);
        (lo / hi).max(1.0)
    }

    fn check_same_shape(&self, other: &Self) -> Result<()> {
        if (self.rows, self.cols) != (other.rows, other.cols) {
            return Err(Error::InvalidInput("matrix polynomial shape mismatch".into()));
        }
        Ok(())
    }
}

pub(crate) fn laplace_det(entries: &[Vec<ScalarPoly>]) -> ScalarPoly {
    let n = entries.len();
    match n {
        0 => ScalarPoly::constant(1.0),
        1 => entries[0][0].clone(),
        2 => &(&entries[0][0] * &entries[1][1]) - &(&entries[0][1] * &entries[1][0]),
        _ => {
            let mut acc = ScalarPoly::zero();
            for j in 0..n {
                if entries[0][j].is_zero() {
                    continue;
                }
                let minor: Vec<Vec<ScalarPoly>> = entries[1..]
                    .iter()
                    .map(|row| {
                        row.iter()
                            .enumerate()
                            .filter(|&(k, _)| k != j)
                            .map(|(_, p)| p.clone())
                            .collect()
                    })
                    .collect();
                let term = &entries[0][j] * &laplace_det(&minor);
                acc = if j % 2 == 0 { &acc + &term } else { &acc - &term };
            }
            acc
        }
    }
}

/// Serialized form: ascending list of row-major coefficient matrices.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MatrixPolyRecord {
    pub rows: usize,
    pub cols: usize,
    pub coeffs: Vec<Vec<Vec<f64>>>,
}

impl From<&MatrixPoly> for MatrixPolyRecord {
    fn from(p: &MatrixPoly) -> Self {
        Self {
            rows: p.rows,
            cols: p.cols,
            coeffs: p.coeffs.iter().map(to_rows).collect(),
        }
    }
}

impl TryFrom<MatrixPolyRecord> for MatrixPoly {
    type Error = Error;

    fn try_from(r: MatrixPolyRecord) -> Result<Self> {
        let coeffs = r
            .coeffs
            .iter()
            .map(|c| {
                if c.is_empty() {
                    Some(Matrix::zeros(r.rows, r.cols))
                } else {
                    from_rows(c)
                }
            })
            .collect::<Option<Vec<_>>>()
            .ok_or_else(|| Error::Parse("ragged coefficient matrix".into()))?;
        MatrixPoly::new(coeffs, r.rows, r.cols)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn eval_and_product() {
        let a = MatrixPoly::linear(Matrix::identity(2, 2), Matrix::identity(2, 2) * 2.0).unwrap();
        let b = a.mul(&a).unwrap();
        assert_eq!(b.degree(), Some(2));
        let x = 0.7;
        let direct = a.eval(x) * a.eval(x);
        assert!((b.eval(x) - direct).amax() < 1e-14);
    }

    #[test]
    fn det_matches_pointwise_for_five_by_five() {
        let c0 = Matrix::from_fn(5, 5, |i, j| ((i * 7 + j * 3) % 5) as f64 - 2.0);
        let c1 = Matrix::from_fn(5, 5, |i, j| if i == j { 1.0 + i as f64 } else { 0.1 * j as f64 });
        let p = MatrixPoly::linear(c0, c1).unwrap();
        let d = p.det().unwrap();
        for &x in &[-1.3, 0.2, 2.5] {
            let direct = p.eval(x).determinant();
            assert!((d.eval(x) - direct).abs() < 1e-8 * (1.0 + direct.abs()));
        }
    }

    #[test]
    fn zero_coefficients_trimmed() {
        let p = MatrixPoly::new(vec![Matrix::identity(2, 2), Matrix::zeros(2, 2)], 2, 2).unwrap();
        assert_eq!(p.degree(), Some(0));
        assert!(MatrixPoly::new(vec![Matrix::zeros(2, 3)], 2, 2).is_err());
    }
}
