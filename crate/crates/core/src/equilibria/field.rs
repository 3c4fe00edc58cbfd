use super::{spectrum_pairs, Diagnostics, EquilibriumPoint, Location, Verdict};
use crate::plant::{barrier_eval, Plant, QuadraticFn, TransformedClf};
use crate::qp::{box_grid, closed_loop_field, ControllerConfig};
use crate::{Matrix, Result, Vector};

/// `f_i(x, λ) = f(x) + λG∇h − pG∇V̄`
pub fn equilibrium_field(
    x: &Vector,
    lambda: f64,
    plant: &Plant,
    clf: &TransformedClf,
    barrier: &QuadraticFn,
    p: f64,
) -> Vector {
    let dir = barrier.grad(x) * lambda - clf.grad_vbar(x) * p;
    plant.drift(x) + plant.gram(x) * dir
}

/// Jacobian of [`equilibrium_field`] in `x`, including `∂G` terms.
pub fn equilibrium_jacobian(
    x: &Vector,
    lambda: f64,
    plant: &Plant,
    clf: &TransformedClf,
    barrier: &QuadraticFn,
    p: f64,
) -> Matrix {
    let dir = barrier.grad(x) * lambda - clf.grad_vbar(x) * p;
    let ddir = &barrier.h * lambda - clf.hess_vbar(x) * p;
    plant.drift_jacobian(x) + plant.gram_product_jacobian(x, &dir, &ddir)
}

const NEWTON_ITERS: usize = 60;
const DEDUP_RADIUS: f64 = 1e-5;

/// Zeros of `f(x) − pG∇V̄` inside the safe set, by damped Newton from a
/// `grid^n` lattice over the box `[lo, hi]`.
pub fn interior_equilibria(
    plant: &Plant,
    clf: &TransformedClf,
    barriers: &[QuadraticFn],
    cfg: &ControllerConfig,
    lo: &[f64],
    hi: &[f64],
    grid: usize,
) -> Result<Vec<EquilibriumPoint>> {
    let p = cfg.p;
    let residual = |x: &Vector| plant.drift(x) - plant.gram(x) * clf.grad_vbar(x) * p;
    let jacobian = |x: &Vector| {
        let gv = clf.grad_vbar(x);
        plant.drift_jacobian(x) - plant.gram_product_jacobian(x, &gv, &clf.hess_vbar(x)) * p
    };
    let in_safe_set = |x: &Vector| barriers.iter().all(|b| barrier_eval(b, x).0 >= 0.0);
    let scale = 1.0 + lo.iter().chain(hi).fold(0.0_f64, |m, v| m.max(v.abs()));

    let mut found: Vec<Vector> = Vec::new();
    for seed in box_grid(lo, hi, grid) {
        if !in_safe_set(&seed) {
            continue;
        }
        let mut x = seed;
        let mut r = residual(&x);
        for _ in 0..NEWTON_ITERS {
            if r.norm() <= 1e-12 * scale {
                break;
            }
            let Some(step) = jacobian(&x).lu().solve(&r) else { break };
            let mut t = 1.0;
            let mut accepted = false;
            while t > 1e-6 {
                let cand = &x - &step * t;
                let rc = residual(&cand);
                if rc.norm() < r.norm() {
                    x = cand;
                    r = rc;
                    accepted = true;
                    break;
                }
                t *= 0.5;
            }
            if !accepted {
                break;
            }
        }
        if r.norm() <= 1e-9 * scale && in_safe_set(&x) && !found.iter().any(|y| (y - &x).norm() <= DEDUP_RADIUS) {
            found.push(x);
        }
    }
    found.sort_by(|a, b| {
        a.iter()
            .zip(b.iter())
            .map(|(u, v)| u.total_cmp(v))
            .find(|o| o.is_ne())
            .unwrap_or(std::cmp::Ordering::Equal)
    });

    found
        .into_iter()
        .map(|x| {
            let jac = jacobian(&x);
            let spectrum = spectrum_pairs(&jac);
            let max_re = spectrum.iter().map(|e| e[0]).fold(f64::NEG_INFINITY, f64::max);
            let verdict = if max_re < -1e-9 {
                Verdict::Stable
            } else if max_re > 1e-9 {
                Verdict::Unstable
            } else {
                Verdict::Marginal
            };
            // The closed loop is only Lipschitz at x₀, so no finite-difference
            // comparison is made for interior points.
            let field_residual = closed_loop_field(&x, plant, clf, barriers, cfg)?.norm();
            Ok(EquilibriumPoint {
                x_e: x.iter().copied().collect(),
                lambda_e: 0.0,
                location: Location::Interior,
                verdict,
                diagnostics: Diagnostics {
                    field_residual,
                    h_residual: 0.0,
                    clf_multiplier_gap: 0.0,
                    s_min_eig: f64::NAN,
                    s_max_eig: f64::NAN,
                    jacobian_spectrum: spectrum,
                    jacobian_mismatch: 0.0,
                    verified: field_residual <= 1e-6 * scale,
                },
            })
        })
        .collect()
}
