use serde::{Deserialize, Serialize};

use crate::plant::{ClfForm, Plant, QuadraticFn, TransformedClf};
use crate::polyalg::{MatrixPoly, Pencil, ScalarPoly};
use crate::{Error, Matrix, Result, Vector};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum PlantCase {
    DriftlessFullRank,
    Lti,
}

/// Pencil `P(λ) = λM − N` and offset `w` of one barrier.
#[derive(Debug, Clone)]
pub struct PencilSystem {
    pub pencil: Pencil,
    pub w: Vector,
    pub barrier_idx: usize,
    pub case: PlantCase,
    pub h_h: Matrix,
    pub center: Vector,
}

impl PencilSystem {
    pub fn dim(&self) -> usize {
        self.w.len()
    }

    /// `ν(λ) = P(λ)⁻¹ w`, `None` on the spectrum.
    pub fn nu(&self, lambda: f64) -> Option<Vector> {
        self.pencil.eval(lambda).lu().solve(&self.w)
    }

    /// Candidate equilibrium `x = ν(λ) + c`.
    pub fn state(&self, lambda: f64) -> Option<Vector> {
        self.nu(lambda).map(|nu| nu + &self.center)
    }

    /// `q(λ) = ν(λ)ᵀ H_h ν(λ)` evaluated directly.
    pub fn q_direct(&self, lambda: f64) -> Option<f64> {
        self.nu(lambda).map(|nu| nu.dot(&(&self.h_h * &nu)))
    }
}

/// Pencil data for barrier `idx`.
///
/// * driftless: `M = H_h`, `N = pH_V̄`, `w = N(c − x₀)`
/// * LTI: `M = BBᵀH_h`, `N = pBBᵀH_V̄ − A`, `w = pBBᵀH_V̄(c − x₀) − A(c − o)`
///   which reduces to `N(c − x₀)` when the drift origin `o` is `x₀`.
pub fn build_pencil(
    plant: &Plant,
    clf: &TransformedClf,
    barrier: &QuadraticFn,
    idx: usize,
    p: f64,
) -> Result<PencilSystem> {
    if clf.form != ClfForm::Transformed {
        return Err(Error::UnsupportedGeometry(
            "pencil analysis needs a quadratic transformed CLF".into(),
        ));
    }
    let n = plant.dim();
    if clf.dim() != n || barrier.dim() != n {
        return Err(Error::InvalidInput("plant, CLF and barrier dimensions disagree".into()));
    }
    let hv = clf.hessian();
    let dc = &barrier.center - clf.center();
    let (m, nmat, w, case) = match plant {
        Plant::Driftless { .. } => {
            let nmat = hv * p;
            let w = &nmat * &dc;
            (barrier.h.clone(), nmat, w, PlantCase::DriftlessFullRank)
        }
        Plant::Lti { a, b, origin } => {
            let g = b * b.transpose();
            let m = &g * &barrier.h;
            let gh = &g * hv * p;
            let nmat = &gh - a;
            let w = &gh * &dc - a * (&barrier.center - origin);
            (m, nmat, w, PlantCase::Lti)
        }
    };
    Ok(PencilSystem {
        pencil: Pencil::new(m, nmat)?,
        w,
        barrier_idx: idx,
        case,
        h_h: barrier.h.clone(),
        center: barrier.center.clone(),
    })
}

/// `q(λ) = n(λ)/d(λ)` with `n = (Adj·w)ᵀ H_h (Adj·w)`, `d = det P²`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QFunction {
    pub n_poly: ScalarPoly,
    pub det_poly: ScalarPoly,
    pub d_poly: ScalarPoly,
    pub z_poly: ScalarPoly,
    pub spectrum: Vec<f64>,
    pub proper: bool,
}

impl QFunction {
    /// `d` is evaluated as `det P(λ)²`, which is better conditioned near the
    /// spectrum than the expanded square.
    pub fn q(&self, lambda: f64) -> f64 {
        let det = self.det_poly.eval(lambda);
        self.n_poly.eval(lambda) / (det * det)
    }
}

pub fn q_function(ps: &PencilSystem) -> Result<QFunction> {
    let adj_w = adjugate_times_w(ps)?;
    let n_poly = adj_w
        .transpose()
        .mul(&MatrixPoly::constant(ps.h_h.clone()))?
        .mul(&adj_w)?
        .entry(0, 0);
    let det_poly = ps.pencil.det().clone();
    let d_poly = &det_poly * &det_poly;
    let z_poly = (&n_poly - &d_poly).trimmed(1e-15);
    let proper = match (n_poly.degree(), d_poly.degree()) {
        (None, _) => true,
        (Some(a), Some(b)) => a < b,
        (Some(_), None) => false,
    };
    Ok(QFunction { n_poly, det_poly, d_poly, z_poly, spectrum: ps.pencil.spectrum()?, proper })
}

/// `Adj{P(λ)}·w` as an `n × 1` matrix polynomial.
pub(crate) fn adjugate_times_w(ps: &PencilSystem) -> Result<MatrixPoly> {
    let w = Matrix::from_column_slice(ps.dim(), 1, ps.w.as_slice());
    ps.pencil.adjugate().right_mul(&w)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::plant::{ClassK, InputMap};

    #[test]
    fn radial_q_function() {
        let plant = Plant::driftless(InputMap::Constant(Matrix::identity(2, 2))).unwrap();
        let clf = TransformedClf::new(
            QuadraticFn::new(Matrix::identity(2, 2), Vector::zeros(2)).unwrap(),
            ClassK::Linear(1.0),
        );
        let bar = QuadraticFn::new(Matrix::identity(2, 2), Vector::from_vec(vec![3.0, 0.0])).unwrap();
        let ps = build_pencil(&plant, &clf, &bar, 0, 1.0).unwrap();
        let qf = q_function(&ps).unwrap();
        // q = 9/(λ−1)², so n = 9(λ−1)² and d = (λ−1)⁴
        for &x in &[0.0, 2.5, 4.0, -2.0] {
            assert!((qf.q(x) - 9.0 / ((x - 1.0) * (x - 1.0))).abs() < 1e-12);
        }
        assert!(qf.proper);
        assert_eq!(qf.spectrum.len(), 2);
        let roots = qf.z_poly.real_roots(1e-8).unwrap();
        assert!(roots.iter().any(|r| (r - 4.0).abs() < 1e-9));
        assert!(roots.iter().any(|r| (r + 2.0).abs() < 1e-9));
    }
}
