use nalgebra::Complex;

use super::ScalarPoly;
use crate::{Error, Matrix, Result};

/// Default real-root acceptance tolerance: `|im| <= tol·(1 + |re|)`.
pub const REAL_ROOT_TOL: f64 = 1e-8;

/// Roots of `p` (with multiplicity) from the eigenvalues of the balanced
/// companion matrix of its monic normalization, polished by Newton steps.
///
/// Roots whose imaginary part satisfies `|im| <= tol·(1 + |re|)` are snapped
/// onto the real axis. The result is sorted by real part, then imaginary part.
pub fn poly_roots(p: &ScalarPoly, tol: f64) -> Result<Vec<Complex<f64>>> {
    let deg = p
        .degree()
        .ok_or_else(|| Error::DegenerateInput("roots of the zero polynomial".into()))?;
    if deg == 0 {
        return Ok(Vec::new());
    }
    let c = p.coeffs();
    let lead = c[deg];

    // Exact zero roots first; the companion of the deflated polynomial is
    // better conditioned.
    let zeros = c.iter().take_while(|&&x| x == 0.0).count();
    let mut roots = vec![Complex::new(0.0, 0.0); zeros];
    let d = deg - zeros;
    if d == 1 {
        roots.push(Complex::new(-c[zeros] / c[zeros + 1], 0.0));
    } else if d > 1 {
        let mut comp = Matrix::zeros(d, d);
        for i in 1..d {
            comp[(i, i - 1)] = 1.0;
        }
        for i in 0..d {
            comp[(i, d - 1)] = -c[zeros + i] / lead;
        }
        balance(&mut comp);
        roots.extend(comp.complex_eigenvalues().iter().copied());
    }

    let dp = p.derivative();
    for z in roots.iter_mut() {
        polish(p, &dp, z);
        if z.im.abs() <= tol * (1.0 + z.re.abs()) {
            z.im = 0.0;
        }
    }
    roots.sort_by(|a, b| a.re.total_cmp(&b.re).then(a.im.total_cmp(&b.im)));
    Ok(roots)
}

fn polish(p: &ScalarPoly, dp: &ScalarPoly, z: &mut Complex<f64>) {
    let mut best = *z;
    let mut best_res = p.eval_complex(best).norm();
    for _ in 0..4 {
        let d = dp.eval_complex(best);
        if d.norm() == 0.0 {
            break;
        }
        let cand = best - p.eval_complex(best) / d;
        let res = p.eval_complex(cand).norm();
        if res.is_finite() && res < best_res {
            best = cand;
            best_res = res;
        } else {
            break;
        }
    }
    *z = best;
}

/// Parlett–Reinsch balancing by powers of two (in place, similarity).
fn balance(m: &mut Matrix) {
    let n = m.nrows();
    const RADIX: f64 = 2.0;
    let mut converged = false;
    while !converged {
        converged = true;
        for i in 0..n {
            let mut r = 0.0;
            let mut c = 0.0;
            for j in 0..n {
                if j != i {
                    c += m[(j, i)].abs();
                    r += m[(i, j)].abs();
                }
            }
            if c == 0.0 || r == 0.0 {
                continue;
            }
            let s = c + r;
            let mut f = 1.0;
            let mut g = r / RADIX;
            while c < g {
                f *= RADIX;
                c *= RADIX * RADIX;
            }
            g = r * RADIX;
            while c > g {
                f /= RADIX;
                c /= RADIX * RADIX;
            }
            if (c + r) / f < 0.95 * s {
                converged = false;
                for j in 0..n {
                    m[(i, j)] /= f;
                }
                for j in 0..n {
                    m[(j, i)] *= f;
                }
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn factored_quadratic() {
        let p = ScalarPoly::new(vec![2.0, -3.0, 1.0]);
        let r = p.real_roots(REAL_ROOT_TOL).unwrap();
        assert_eq!(r.len(), 2);
        assert!((r[0] - 1.0).abs() < 1e-12 && (r[1] - 2.0).abs() < 1e-12);
    }

    #[test]
    fn complex_pair() {
        let p = ScalarPoly::new(vec![1.0, 0.0, 1.0]);
        let r = poly_roots(&p, REAL_ROOT_TOL).unwrap();
        assert_eq!(r.len(), 2);
        assert!(r.iter().all(|z| (z.re).abs() < 1e-12 && (z.im.abs() - 1.0).abs() < 1e-12));
        assert!(p.real_roots(REAL_ROOT_TOL).unwrap().is_empty());
    }

    #[test]
    fn zero_polynomial_rejected() {
        assert!(matches!(
            poly_roots(&ScalarPoly::zero(), REAL_ROOT_TOL),
            Err(Error::DegenerateInput(_))
        ));
    }

    #[test]
    fn wilkinson_six() {
        let p = ScalarPoly::from_roots(&[1.0, 2.0, 3.0, 4.0, 5.0, 6.0]);
        let r = p.real_roots(REAL_ROOT_TOL).unwrap();
        assert_eq!(r.len(), 6);
        for (k, x) in r.iter().enumerate() {
            assert!((x - (k + 1) as f64).abs() < 1e-6, "{x}");
        }
    }

    #[test]
    fn zero_roots_deflated() {
        let p = ScalarPoly::new(vec![0.0, 0.0, -4.0, 1.0]);
        let r = p.real_roots(REAL_ROOT_TOL).unwrap();
        assert_eq!(r, vec![0.0, 0.0, 4.0]);
    }
}
