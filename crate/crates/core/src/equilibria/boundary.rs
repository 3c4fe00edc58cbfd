use log::debug;

use super::pencil_system::adjugate_times_w;
use super::{spectrum_pairs, Diagnostics, EquilibriumPoint, Location, PencilSystem, QFunction, Verdict};
use crate::linalg::{fd_jacobian, orthogonal_complement, rank, sym_eigenvalues, symmetrize};
use crate::plant::{barrier_eval, Plant, QuadraticFn, TransformedClf};
use crate::polyalg::{poly_nullspace, MatrixPoly, REAL_ROOT_TOL};
use crate::qp::{closed_loop_with_outcome, ControllerConfig};
use crate::{Error, Matrix, Result, Vector};

/// Roots of `z` closer than `CLEARANCE·(1 + |λ|)` to `σ_P` are degenerate.
pub const CLEARANCE: f64 = 1e-6;
/// `|max eig S(λ_e)| ≤ MARGINAL_TOL·‖S(λ_e)‖_F` is reported as marginal.
pub const MARGINAL_TOL: f64 = 1e-7;

/// `S(λ) = R(λ)ᵀ(P(λ) + P(λ)ᵀ)R(λ)` with `R(λ)ᵀ H_h Adj{P(λ)} w ≡ 0`.
#[derive(Debug, Clone)]
pub struct StabilityPoly {
    pub s: MatrixPoly,
    pub r: MatrixPoly,
    /// `v(λ) = H_h Adj{P(λ)} w`, parallel to `∇h` along the candidate curve.
    pub v: MatrixPoly,
}

impl StabilityPoly {
    /// `S(λ)`, or the pointwise congruent matrix on the orthogonal complement
    /// of `v(λ)` where the polynomial basis loses rank.
    pub fn at(&self, ps: &PencilSystem, lambda: f64) -> Matrix {
        let n = ps.dim();
        let r = self.r.eval(lambda);
        if rank(&r, 1e-8) == n - 1 {
            return symmetrize(&self.s.eval(lambda));
        }
        let v = self.v.eval(lambda).column(0).into_owned();
        let c = orthogonal_complement(&v);
        let p = ps.pencil.eval(lambda);
        symmetrize(&(c.transpose() * (&p + p.transpose()) * c))
    }
}

pub fn stability_polynomial(ps: &PencilSystem) -> Result<StabilityPoly> {
    let n = ps.dim();
    if n < 2 {
        return Err(Error::InvalidInput("stability polynomial needs n ≥ 2".into()));
    }
    let v = MatrixPoly::constant(ps.h_h.clone()).mul(&adjugate_times_w(ps)?)?;
    let r = poly_nullspace(&v, n - 1)?;
    let p = ps.pencil.as_matrix_poly();
    let sym = p.add(&p.transpose())?;
    let raw = r.transpose().mul(&sym)?.mul(&r)?;
    let coeffs = raw.coeffs().iter().map(symmetrize).collect();
    let s = MatrixPoly::new(coeffs, n - 1, n - 1)?;
    Ok(StabilityPoly { s, r, v })
}

pub fn classify_matrix(s: &Matrix, rel_tol: f64) -> Verdict {
    let tol = rel_tol * s.norm();
    let max = sym_eigenvalues(s).last().copied().unwrap_or(0.0);
    if max > tol {
        Verdict::Unstable
    } else if max < -tol {
        Verdict::Stable
    } else {
        Verdict::Marginal
    }
}

/// Verdict and extreme eigenvalues of `S(λ_e)`.
pub fn classify_equilibrium(lambda_e: f64, sp: &StabilityPoly, ps: &PencilSystem) -> (Verdict, f64, f64) {
    let s = sp.at(ps, lambda_e);
    let ev = sym_eigenvalues(&s);
    (classify_matrix(&s, MARGINAL_TOL), ev[0], ev[ev.len() - 1])
}

/// Quantities of the boundary Jacobian formula at one point.
#[derive(Debug, Clone)]
pub struct BoundaryFrame {
    pub z1: Vector,
    pub z2: Vector,
    pub eta: f64,
    pub z: Matrix,
    pub n1: Matrix,
    pub psi: Matrix,
    pub j_i: Matrix,
}

/// `J_cl = (I − GZN₁Zᵀ)J_i − GZN₁ΨZᵀ` at a boundary equilibrium.
pub fn boundary_jacobian(
    x_e: &Vector,
    lambda_e: f64,
    plant: &Plant,
    clf: &TransformedClf,
    barrier: &QuadraticFn,
    cfg: &ControllerConfig,
) -> Result<(Matrix, BoundaryFrame)> {
    let n = x_e.len();
    let p = cfg.p;
    let g = plant.gram(x_e);
    let (h, grad_h) = barrier_eval(barrier, x_e);
    let (v, grad_v) = clf.recover(x_e);
    if (plant.g(x_e).transpose() * &grad_h).norm() <= 1e-8 {
        return Err(Error::UnsupportedDegenerate("L_g h vanishes at the boundary point".into()));
    }
    let gnorm = grad_h.dot(&(&g * &grad_h)).sqrt();
    let z1 = &grad_h / gnorm;
    let proj = z1.dot(&(&g * &grad_v));
    let z2 = &grad_v - &z1 * proj;
    let eta = 1.0 / (1.0 + p * z2.dot(&(&g * &z2)));

    let mut z = Matrix::zeros(n, 2);
    z.set_column(0, &z1);
    z.set_column(1, &z2);
    let n1 = Matrix::from_diagonal(&Vector::from_vec(vec![1.0, p * eta]));
    let da = cfg.alpha.derivative(h);
    let dg = cfg.gamma.derivative(v);
    let psi = Matrix::from_row_slice(2, 2, &[da, 0.0, proj * (dg - da), dg]);

    let j_i = plant.drift_jacobian(x_e) + plant.gram_product_jacobian(x_e, &grad_h, &barrier.h) * lambda_e
        - plant.gram_product_jacobian(x_e, &grad_v, &clf.hess_v(x_e)) * (p * cfg.gamma.eval(v));
    let gzn = &g * &z * &n1;
    let j_cl = (Matrix::identity(n, n) - &gzn * z.transpose()) * &j_i - &gzn * &psi * z.transpose();
    Ok((j_cl, BoundaryFrame { z1, z2, eta, z, n1, psi, j_i }))
}

#[derive(Debug, Clone, Default)]
pub struct BoundaryResult {
    pub points: Vec<EquilibriumPoint>,
    /// Roots of `z` too close to the pencil spectrum.
    pub degenerate: Vec<f64>,
}

/// Boundary equilibria of barrier `ps.barrier_idx`, classified and verified
/// against the actual QP closed loop with all `barriers` present.
pub fn boundary_equilibria(
    ps: &PencilSystem,
    qf: &QFunction,
    sp: &StabilityPoly,
    plant: &Plant,
    clf: &TransformedClf,
    barriers: &[QuadraticFn],
    cfg: &ControllerConfig,
) -> Result<BoundaryResult> {
    let idx = ps.barrier_idx;
    let barrier = &barriers[idx];
    let mut out = BoundaryResult::default();
    let roots = match qf.z_poly.degree() {
        Some(d) if d >= 1 => qf.z_poly.real_roots(REAL_ROOT_TOL)?,
        _ => Vec::new(),
    };
    let scale = 1.0 + ps.w.norm() + ps.center.norm();

    for root in roots {
        if root < -1e-12 * (1.0 + root.abs()) {
            continue;
        }
        let root = root.max(0.0);
        if qf.spectrum.iter().any(|s| (s - root).abs() <= CLEARANCE * (1.0 + root.abs())) {
            debug!("barrier {}: root λ = {root} of z is within clearance of σ_P; skipped", idx + 1);
            out.degenerate.push(root);
            continue;
        }
        let lambda = refine_root(ps, root);
        let Some(x) = ps.state(lambda) else {
            out.degenerate.push(lambda);
            continue;
        };

        let (verdict, s_min, s_max) = classify_equilibrium(lambda, sp, ps);
        let h_residual = barrier_eval(barrier, &x).0.abs();
        let (field_residual, clf_gap, safe) = match closed_loop_with_outcome(&x, plant, clf, barriers, cfg) {
            Ok((f, qp)) => {
                let (v, _) = clf.recover(&x);
                let gap = (qp.clf_multiplier() - cfg.p * cfg.gamma.eval(v)).abs();
                let safe = barriers
                    .iter()
                    .enumerate()
                    .all(|(j, b)| j == idx || barrier_eval(b, &x).0 >= -1e-9);
                (f.norm(), gap, safe)
            }
            Err(_) => (f64::INFINITY, f64::INFINITY, false),
        };

        let cl = |y: &Vector| {
            closed_loop_with_outcome(y, plant, clf, barriers, cfg).map_or_else(|_| y * f64::NAN, |(f, _)| f)
        };
        let fd = fd_jacobian(cl, &x, 1e-6);
        let (spectrum, mismatch) = match boundary_jacobian(&x, lambda, plant, clf, barrier, cfg) {
            Ok((j, _)) => (spectrum_pairs(&j), (&j - &fd).amax()),
            Err(_) => (spectrum_pairs(&fd), f64::NAN),
        };

        out.points.push(EquilibriumPoint {
            x_e: x.iter().copied().collect(),
            lambda_e: lambda,
            location: Location::Boundary(idx),
            verdict,
            diagnostics: Diagnostics {
                field_residual,
                h_residual,
                clf_multiplier_gap: clf_gap,
                s_min_eig: s_min,
                s_max_eig: s_max,
                jacobian_spectrum: spectrum,
                jacobian_mismatch: mismatch,
                verified: safe && field_residual <= 1e-6 * scale && h_residual <= 1e-6,
            },
        });
    }
    Ok(out)
}

/// Newton polish of `q(λ) = 1` using direct solves, which is better
/// conditioned than the expanded polynomial `z`.
fn refine_root(ps: &PencilSystem, lambda0: f64) -> f64 {
    let phi = |l: f64| -> Option<(f64, f64)> {
        let lu = ps.pencil.eval(l).lu();
        let nu = lu.solve(&ps.w)?;
        let dnu = -lu.solve(&(ps.pencil.m() * &nu))?;
        let hn = &ps.h_h * &nu;
        Some((nu.dot(&hn) - 1.0, 2.0 * dnu.dot(&hn)))
    };
    let mut best = lambda0;
    let Some((mut best_res, _)) = phi(lambda0) else { return lambda0 };
    let mut l = lambda0;
    for _ in 0..8 {
        let Some((f, df)) = phi(l) else { break };
        if df == 0.0 || !df.is_finite() {
            break;
        }
        l -= f / df;
        match phi(l) {
            Some((r, _)) if r.abs() < best_res.abs() => {
                best = l;
                best_res = r;
            }
            _ => break,
        }
        if best_res.abs() < 1e-15 {
            break;
        }
    }
    best
}

#[cfg(test)]
mod tests {
    use super::super::{build_pencil, q_function};
    use super::*;
    use crate::plant::{ClassK, InputMap};

    fn radial() -> (Plant, TransformedClf, Vec<QuadraticFn>) {
        let plant = Plant::driftless(InputMap::Constant(Matrix::identity(2, 2))).unwrap();
        let clf = TransformedClf::new(
            QuadraticFn::new(Matrix::identity(2, 2), Vector::zeros(2)).unwrap(),
            ClassK::Linear(1.0),
        );
        let bar = QuadraticFn::new(Matrix::identity(2, 2), Vector::from_vec(vec![3.0, 0.0])).unwrap();
        (plant, clf, vec![bar])
    }

    #[test]
    fn radial_equilibrium_is_unstable_saddle() {
        let (plant, clf, bars) = radial();
        let cfg = ControllerConfig::default();
        let ps = build_pencil(&plant, &clf, &bars[0], 0, 1.0).unwrap();
        let qf = q_function(&ps).unwrap();
        let sp = stability_polynomial(&ps).unwrap();
        let res = boundary_equilibria(&ps, &qf, &sp, &plant, &clf, &bars, &cfg).unwrap();
        assert_eq!(res.points.len(), 1);
        let e = &res.points[0];
        assert!((e.lambda_e - 4.0).abs() < 1e-8);
        assert!((e.x_e[0] - 4.0).abs() < 1e-6 && e.x_e[1].abs() < 1e-6);
        assert_eq!(e.verdict, Verdict::Unstable);
        assert!(e.diagnostics.verified);
        assert!(e.diagnostics.jacobian_mismatch < 1e-4, "{}", e.diagnostics.jacobian_mismatch);
        assert!(e.diagnostics.clf_multiplier_gap < 1e-6);
    }

    #[test]
    fn radial_frame_is_collinear() {
        let (plant, clf, bars) = radial();
        let cfg = ControllerConfig::default();
        let x = Vector::from_vec(vec![4.0, 0.0]);
        let (j, frame) = boundary_jacobian(&x, 4.0, &plant, &clf, &bars[0], &cfg).unwrap();
        assert!(frame.z2.norm() < 1e-12);
        assert!((frame.eta - 1.0).abs() < 1e-12);
        // eigenvalue along z₁ is −α′(h)
        let along = j * &frame.z1;
        assert!((along + &frame.z1 * cfg.alpha.derivative(0.0)).norm() < 1e-9);
    }

    #[test]
    fn classification_thresholds() {
        assert_eq!(classify_matrix(&Matrix::from_element(1, 1, -1.0), MARGINAL_TOL), Verdict::Stable);
        assert_eq!(classify_matrix(&Matrix::from_element(1, 1, 3.0), MARGINAL_TOL), Verdict::Unstable);
        assert_eq!(classify_matrix(&Matrix::zeros(1, 1), MARGINAL_TOL), Verdict::Marginal);
    }
}
