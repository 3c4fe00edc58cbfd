use nalgebra::Cholesky;

use crate::linalg::min_sym_eigenvalue;
use crate::qp::solve_constraints;
use crate::{Error, Matrix, Result, Vector};

/// Number of shape parameters for an `n × n` Hessian.
pub fn shape_len(n: usize) -> usize {
    n * (n + 1) / 2
}

/// State dimension from a shape-vector length.
pub fn shape_dim(len: usize) -> Result<usize> {
    let n = ((((8 * len + 1) as f64).sqrt() - 1.0) / 2.0).round() as usize;
    if shape_len(n) != len {
        return Err(Error::InvalidInput(format!("{len} is not a triangular number")));
    }
    Ok(n)
}

/// Lower-triangular `L(π)`, entries packed row by row.
pub fn factor_from_shape(pi: &Vector) -> Result<Matrix> {
    let n = shape_dim(pi.len())?;
    let mut l = Matrix::zeros(n, n);
    let mut k = 0;
    for i in 0..n {
        for j in 0..=i {
            l[(i, j)] = pi[k];
            k += 1;
        }
    }
    Ok(l)
}

fn shape_from_factor(l: &Matrix) -> Vector {
    let n = l.nrows();
    let mut pi = Vector::zeros(shape_len(n));
    let mut k = 0;
    for i in 0..n {
        for j in 0..=i {
            pi[k] = l[(i, j)];
            k += 1;
        }
    }
    pi
}

/// `H(π) = L(π)ᵀ L(π)`
pub fn hessian_from_shape(pi: &Vector) -> Result<Matrix> {
    let l = factor_from_shape(pi)?;
    Ok(l.transpose() * l)
}

/// Inverse of [`hessian_from_shape`] with nonnegative diagonal on `L`.
///
/// `LᵀL` with `L` lower triangular is a Cholesky factorization in reversed
/// index order: with the exchange matrix `J`, `JHJ = (JLᵀJ)(JLJ)` and `JLᵀJ`
/// is lower triangular.
pub fn shape_from_hessian(h: &Matrix) -> Result<Vector> {
    let n = h.nrows();
    if !h.is_square() {
        return Err(Error::InvalidInput("shape Hessian must be square".into()));
    }
    let scale = 1.0 + h.amax();
    if min_sym_eigenvalue(h) < -1e-12 * scale {
        return Err(Error::InvalidInput("shape Hessian has a negative eigenvalue".into()));
    }
    let flipped = Matrix::from_fn(n, n, |i, j| h[(n - 1 - i, n - 1 - j)]);
    let c = Cholesky::new(flipped.clone())
        .or_else(|| Cholesky::new(flipped + Matrix::identity(n, n) * (1e-14 * scale)))
        .ok_or_else(|| Error::InvalidInput("shape Hessian is not positive semidefinite".into()))?
        .l();
    // L = (J C J)ᵀ
    let l = Matrix::from_fn(n, n, |i, j| c[(n - 1 - j, n - 1 - i)]);
    Ok(shape_from_factor(&l))
}

/// `V_π = ½‖H(π) − H_t‖_F²` and its gradient over `π`.
pub fn shape_lyapunov(pi: &Vector, target: &Matrix) -> Result<(f64, Vector)> {
    let l = factor_from_shape(pi)?;
    let e = l.transpose() * &l - target;
    let value = 0.5 * e.norm_squared();
    // dV = tr(E dLᵀ L + E Lᵀ dL) = 2⟨L E, dL⟩ for symmetric E
    let grad_l = &l * &e * 2.0;
    Ok((value, shape_from_factor(&grad_l.lower_triangle())))
}

/// Shape control from the single-constraint QP
/// `min ½‖u‖² + ½p_π δ²  s.t.  ∇V_πᵀu + γ_π V_π ≤ δ`.
/// Returns `(u_π, δ)`.
pub fn shape_qp_step(pi: &Vector, target: &Matrix, p_pi: f64, gamma_pi: f64) -> Result<(Vector, f64)> {
    let (v, grad) = shape_lyapunov(pi, target)?;
    let k = grad.len();
    let mut a = Matrix::zeros(1, k + 1);
    a.view_mut((0, 0), (1, k)).copy_from(&grad.transpose());
    a[(0, k)] = -1.0;
    let b = Vector::from_element(1, -gamma_pi * v);
    let out = solve_constraints(&a, &b, p_pi)
        .map_err(|_| Error::InvalidInput("shape QP is infeasible".into()))?;
    Ok((out.u, out.delta))
}

/// `sqrt(1 − λ_min/λ_max)` of the level-set ellipses of `H`.
pub fn eccentricity(h: &Matrix) -> f64 {
    let ev = crate::linalg::sym_eigenvalues(h);
    (1.0 - ev[0] / ev[ev.len() - 1]).max(0.0).sqrt()
}
