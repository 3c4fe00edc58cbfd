use super::{MatrixPoly, ScalarPoly, REAL_ROOT_TOL};
use crate::{Error, Matrix, Result};

/// Linear pencil `P(λ) = λM − N`.
///
/// Regularity is checked on construction; the determinant and adjugate are
/// computed once and cached since every downstream quantity needs them.
#[derive(Debug, Clone)]
pub struct Pencil {
    m: Matrix,
    n: Matrix,
    det: ScalarPoly,
    adj: MatrixPoly,
}

impl Pencil {
    pub fn new(m: Matrix, n: Matrix) -> Result<Self> {
        if !m.is_square() || m.shape() != n.shape() {
            return Err(Error::InvalidInput(format!(
                "pencil needs two equal square matrices, got {:?} and {:?}",
                m.shape(),
                n.shape()
            )));
        }
        if m.iter().chain(n.iter()).any(|x| !x.is_finite()) {
            return Err(Error::InvalidInput("non-finite pencil entry".into()));
        }
        let poly = MatrixPoly::linear(-&n, m.clone())?;
        let det = poly.det()?;
        let dim = m.nrows();
        let scale = (m.norm() + n.norm()).max(1e-300).powi(dim as i32);
        if det.max_abs_coeff() <= 1e-12 * scale {
            return Err(Error::DegeneratePencil);
        }
        let adj = adjugate(&poly)?;
        Ok(Self { m, n, det, adj })
    }

    pub fn dim(&self) -> usize {
        self.m.nrows()
    }

    pub fn m(&self) -> &Matrix {
        &self.m
    }

    pub fn n(&self) -> &Matrix {
        &self.n
    }

    pub fn eval(&self, lambda: f64) -> Matrix {
        &self.m * lambda - &self.n
    }

    pub fn as_matrix_poly(&self) -> MatrixPoly {
        MatrixPoly::linear(-&self.n, self.m.clone()).expect("square pencil")
    }

    /// `det(λM − N)`.
    pub fn det(&self) -> &ScalarPoly {
        &self.det
    }

    /// `Adj(λM − N)`, degree at most `n − 1`.
    pub fn adjugate(&self) -> &MatrixPoly {
        &self.adj
    }

    /// Real generalized eigenvalues σ_P (real roots of the determinant).
    pub fn spectrum(&self) -> Result<Vec<f64>> {
        match self.det.degree() {
            Some(d) if d >= 1 => self.det.real_roots(REAL_ROOT_TOL),
            _ => Ok(Vec::new()),
        }
    }
}

/// Adjugate by signed cofactors: `Adj_ij = (−1)^{i+j} det(minor_ji)`.
fn adjugate(p: &MatrixPoly) -> Result<MatrixPoly> {
    let n = p.rows();
    if n == 1 {
        return Ok(MatrixPoly::constant(Matrix::identity(1, 1)));
    }
    let mut entries = vec![vec![ScalarPoly::zero(); n]; n];
    for (i, row) in entries.iter_mut().enumerate() {
        for (j, e) in row.iter_mut().enumerate() {
            let minor_coeffs: Vec<Matrix> = p
                .coeffs()
                .iter()
                .map(|c| c.clone().remove_row(j).remove_column(i))
                .collect();
            let minor = MatrixPoly::new(minor_coeffs, n - 1, n - 1)?;
            let d = minor.det()?;
            *e = if (i + j) % 2 == 0 { d } else { -&d };
        }
    }
    MatrixPoly::from_entries(&entries)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn diagonal_pencils() {
        let p = Pencil::new(Matrix::identity(2, 2), Matrix::identity(2, 2)).unwrap();
        assert_eq!(p.det().coeffs(), &[1.0, -2.0, 1.0]);
        let q = Pencil::new(Matrix::from_diagonal(&crate::Vector::from_vec(vec![2.0, 3.0])), Matrix::zeros(2, 2))
            .unwrap();
        assert_eq!(q.det().coeffs(), &[0.0, 0.0, 6.0]);
    }

    #[test]
    fn adjugate_of_scaled_identity() {
        let p = Pencil::new(Matrix::identity(3, 3), Matrix::zeros(3, 3)).unwrap();
        let adj = p.adjugate();
        assert_eq!(adj.degree(), Some(2));
        assert_eq!(adj.coeff(2), Matrix::identity(3, 3));
    }

    #[test]
    fn singular_pencil_rejected() {
        let m = Matrix::from_row_slice(2, 2, &[1.0, 0.0, 0.0, 0.0]);
        let n = Matrix::from_row_slice(2, 2, &[1.0, 0.0, 0.0, 0.0]);
        assert!(matches!(Pencil::new(m, n), Err(Error::DegeneratePencil)));
    }

    #[test]
    fn two_by_two_adjugate_formula() {
        let m = Matrix::from_row_slice(2, 2, &[1.0, 2.0, 0.5, 3.0]);
        let n = Matrix::from_row_slice(2, 2, &[-1.0, 0.3, 2.0, 1.0]);
        let p = Pencil::new(m, n).unwrap();
        for &x in &[-2.0, 0.1, 1.7] {
            let pm = p.eval(x);
            let adj = p.adjugate().eval(x);
            let expect = Matrix::from_row_slice(2, 2, &[pm[(1, 1)], -pm[(0, 1)], -pm[(1, 0)], pm[(0, 0)]]);
            assert!((adj - expect).amax() < 1e-12);
        }
    }
}
