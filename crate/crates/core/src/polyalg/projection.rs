use crate::{Error, Matrix, Result};

const ORTHO_TOL: f64 = 1e-10;

/// `P_Z = I − G Z N₁ Zᵀ` for G-orthogonal columns of `Z` and diagonal `N₁ ≻ 0`.
pub fn oblique_projection(z: &Matrix, g: &Matrix, n1: &Matrix) -> Result<Matrix> {
    check_inputs(z, g, n1)?;
    let n = z.nrows();
    Ok(Matrix::identity(n, n) - g * z * n1 * z.transpose())
}

/// The diagonal sequence `N₁, N₂, …, N_k` with `(P_Z)^k = I − G Z N_k Zᵀ`.
#[derive(Debug, Clone)]
pub struct ProjectionSequence {
    pub n: Vec<Matrix>,
    /// Every member of the infinite sequence is positive definite.
    pub generalized: bool,
}

/// Generates `N_1..N_k` by `N_{j+1} = N_j + N₁ − N_j D N₁` with `D = ZᵀGZ`
/// (diagonal by G-orthogonality). Per diagonal entry the closed form is
/// `n_j = (1 − (1 − d·n₁)^j)/d`, so the whole sequence stays positive iff
/// `d·n₁ < 2` on every entry.
pub fn projection_sequence(n1: &Matrix, z: &Matrix, g: &Matrix, k: usize) -> Result<ProjectionSequence> {
    check_inputs(z, g, n1)?;
    let d = z.transpose() * g * z;
    let mut seq = Vec::with_capacity(k);
    if k >= 1 {
        seq.push(n1.clone());
    }
    while seq.len() < k {
        let last = seq.last().expect("nonempty");
        seq.push(last + n1 - last * &d * n1);
    }
    let generalized = (0..n1.nrows()).all(|j| d[(j, j)] * n1[(j, j)] < 2.0);
    Ok(ProjectionSequence { n: seq, generalized })
}

fn check_inputs(z: &Matrix, g: &Matrix, n1: &Matrix) -> Result<()> {
    let (n, r) = z.shape();
    if g.shape() != (n, n) || n1.shape() != (r, r) {
        return Err(Error::InvalidInput("projection dimensions disagree".into()));
    }
    let d = z.transpose() * g * z;
    let scale = 1.0 + d.diagonal().amax();
    for i in 0..r {
        for j in 0..r {
            if i != j && d[(i, j)].abs() > ORTHO_TOL * scale {
                return Err(Error::InvalidInput(format!(
                    "columns {i} and {j} are not G-orthogonal ({:e})",
                    d[(i, j)]
                )));
            }
            if i != j && n1[(i, j)] != 0.0 {
                return Err(Error::InvalidInput("N1 must be diagonal".into()));
            }
        }
        if n1[(i, i)] <= 0.0 {
            return Err(Error::InvalidInput("N1 must be positive definite".into()));
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::Vector;

    #[test]
    fn euclidean_case_is_orthogonal_projector() {
        let z = Matrix::from_column_slice(3, 1, &[0.6, 0.8, 0.0]);
        let g = Matrix::identity(3, 3);
        let n1 = Matrix::identity(1, 1);
        let p = oblique_projection(&z, &g, &n1).unwrap();
        assert!((&p * &p - &p).amax() < 1e-14);
        let seq = projection_sequence(&n1, &z, &g, 4).unwrap();
        assert!(seq.n.iter().all(|m| (m - &n1).amax() < 1e-14));
        assert!(seq.generalized);
    }

    #[test]
    fn non_orthogonal_rejected() {
        let z = Matrix::from_row_slice(2, 2, &[1.0, 1.0, 0.0, 1.0]);
        let r = oblique_projection(&z, &Matrix::identity(2, 2), &Matrix::identity(2, 2));
        assert!(matches!(r, Err(Error::InvalidInput(_))));
    }

    #[test]
    fn non_generalized_flag() {
        let z = Matrix::from_column_slice(2, 1, &[1.0, 0.0]);
        let g = Matrix::from_diagonal(&Vector::from_vec(vec![3.0, 1.0]));
        let seq = projection_sequence(&Matrix::identity(1, 1), &z, &g, 3).unwrap();
        assert!(!seq.generalized);
        // n_2 = 2·1 − 3 = −1
        assert!((seq.n[1][(0, 0)] + 1.0).abs() < 1e-14);
    }
}
