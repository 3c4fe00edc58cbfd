use super::MatrixPoly;
use crate::linalg::rank;
use crate::{Error, Matrix, Result};

// Generic evaluation points for rank tests; irrational-ish so that they
// avoid the finitely many rank drops of any polynomial basis we meet.
const PROBES: [f64; 3] = [0.754_877_666_2, -1.324_717_957_2, 2.618_033_988_7];
const KERNEL_TOL: f64 = 1e-10;
const RANK_TOL: f64 = 1e-8;

/// Polynomial basis `R(λ)` (`n × (n−1)`) of the left null space of the
/// vector polynomial `v(λ)`: `R(λ)ᵀ v(λ) ≡ 0`, rank `n − 1` generically.
///
/// For `n = 2` the exact rotation `(−v₂, v₁)` is returned. Otherwise the
/// degree `d = 0, 1, …, max_deg` is increased until the stacked convolution
/// system has `n − 1` kernel vectors that are independent at generic λ.
pub fn poly_nullspace(v: &MatrixPoly, max_deg: usize) -> Result<MatrixPoly> {
    let n = v.rows();
    if v.cols() != 1 || n < 2 {
        return Err(Error::InvalidInput("null space needs an n×1 vector polynomial, n ≥ 2".into()));
    }
    if v.is_zero() {
        return Err(Error::DegenerateInput("null space of the zero vector polynomial".into()));
    }
    if n == 2 {
        let coeffs = v
            .coeffs()
            .iter()
            .map(|c| Matrix::from_column_slice(2, 1, &[-c[1], c[0]]))
            .collect();
        return MatrixPoly::new(coeffs, 2, 1);
    }

    let l = v.degree().expect("nonzero");
    let scale = v.max_abs_coeff();
    let mut best_rank = 0;
    for d in 0..=max_deg {
        let rows = l + d + 1;
        let cols = (d + 1) * n;
        // Row j collects the λ^j coefficient of rᵀv = Σ_k r_kᵀ v_{j−k}.
        let mut conv = Matrix::zeros(rows.max(cols), cols);
        for j in 0..rows {
            for k in 0..=d {
                if j >= k && j - k <= l {
                    let vc = &v.coeffs()[j - k];
                    for i in 0..n {
                        conv[(j, k * n + i)] = vc[(i, 0)] / scale;
                    }
                }
            }
        }
        let svd = conv.svd(false, true);
        let vt = svd.v_t.expect("requested V^T");
        let smax = svd.singular_values.amax().max(1e-300);
        let kernel: Vec<usize> = (0..cols)
            .filter(|&c| svd.singular_values[c] <= KERNEL_TOL * smax)
            .collect();

        // Greedily keep kernel vectors that raise the rank at the probes.
        let mut chosen: Vec<Vec<Matrix>> = Vec::new();
        for &kidx in &kernel {
            let row = vt.row(kidx);
            let cand: Vec<Matrix> = (0..=d)
                .map(|k| Matrix::from_fn(n, 1, |i, _| row[k * n + i]))
                .collect();
            let mut trial = chosen.clone();
            trial.push(cand);
            if generic_rank(&trial, n) == trial.len() {
                chosen = trial;
            }
            if chosen.len() == n - 1 {
                break;
            }
        }
        best_rank = best_rank.max(chosen.len());
        if chosen.len() == n - 1 {
            let coeffs = (0..=d)
                .map(|k| Matrix::from_fn(n, n - 1, |i, c| chosen[c][k][(i, 0)]))
                .collect();
            return MatrixPoly::new(coeffs, n, n - 1);
        }
    }
    Err(Error::NullspaceDegreeExceeded { rank: best_rank, max_deg })
}

fn generic_rank(cols: &[Vec<Matrix>], n: usize) -> usize {
    PROBES
        .iter()
        .map(|&x| {
            let m = Matrix::from_fn(n, cols.len(), |i, c| {
                cols[c].iter().rev().fold(0.0, |acc, coef| acc * x + coef[(i, 0)])
            });
            rank(&m, RANK_TOL)
        })
        .max()
        .unwrap_or(0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::rank;

    #[test]
    fn planar_rotation() {
        let v = MatrixPoly::new(
            vec![
                Matrix::from_column_slice(2, 1, &[1.0, 2.0]),
                Matrix::from_column_slice(2, 1, &[-1.0, 0.5]),
            ],
            2,
            1,
        )
        .unwrap();
        let r = poly_nullspace(&v, 1).unwrap();
        assert_eq!(r.coeff(0), Matrix::from_column_slice(2, 1, &[-2.0, 1.0]));
        assert_eq!(r.coeff(1), Matrix::from_column_slice(2, 1, &[-0.5, -1.0]));
    }

    #[test]
    fn constant_axis_vector() {
        let v = MatrixPoly::constant(Matrix::from_column_slice(3, 1, &[1.0, 0.0, 0.0]));
        let r = poly_nullspace(&v, 2).unwrap();
        assert_eq!(r.degree(), Some(0));
        let c = r.coeff(0);
        assert!(c.row(0).amax() < 1e-12);
        assert_eq!(rank(&c, 1e-9), 2);
    }

    #[test]
    fn cubic_three_vector() {
        let v = MatrixPoly::new(
            vec![
                Matrix::from_column_slice(3, 1, &[1.0, -0.3, 2.0]),
                Matrix::from_column_slice(3, 1, &[0.4, 1.1, -0.7]),
                Matrix::from_column_slice(3, 1, &[-1.2, 0.2, 0.9]),
                Matrix::from_column_slice(3, 1, &[0.5, 0.8, 0.1]),
            ],
            3,
            1,
        )
        .unwrap();
        let r = poly_nullspace(&v, 3).unwrap();
        let prod = r.transpose().mul(&v).unwrap();
        assert!(prod.max_abs_coeff() < 1e-9);
        for &x in &[-3.1, -0.4, 0.9, 2.2] {
            assert_eq!(rank(&r.eval(x), 1e-9), 2);
        }
    }
}
