use log::debug;
use serde::Serialize;

use super::shape::{hessian_from_shape, shape_from_hessian};
use crate::equilibria::{
    build_pencil, compatibility_barrier, is_compatible, q_function, stability_polynomial, CompatBarrier,
};
use crate::equilibria::{CompatEvidence, DEFAULT_EPSILON};
use crate::linalg::{max_sym_eigenvalue, min_sym_eigenvalue, to_rows};
use crate::plant::{Plant, QuadraticFn, TransformedClf};
use crate::qp::ControllerConfig;
use crate::{Error, Matrix, Result, Vector};

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CompatOptions {
    pub epsilon: f64,
    pub rounds: usize,
    pub initial_weight: f64,
    pub weight_growth: f64,
    pub inner_iterations: usize,
    /// Relative finite-difference step, `h = step·(1 + |θ|)`.
    pub fd_step: f64,
    /// Required margin on the normalized barrier during the search.
    pub margin: f64,
}

impl Default for CompatOptions {
    fn default() -> Self {
        Self {
            epsilon: DEFAULT_EPSILON,
            rounds: 8,
            initial_weight: 10.0,
            weight_growth: 10.0,
            inner_iterations: 200,
            fd_step: 1e-6,
            margin: 1e-3,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Certificate {
    pub b: f64,
    pub sigma_minus: f64,
    pub monotone_ok: bool,
    /// Max eigenvalue of `HA + AᵀH` (zero for driftless plants).
    pub lmi_max_eig: f64,
}

impl Certificate {
    pub fn holds(&self) -> bool {
        self.b >= -1e-8 && self.monotone_ok && self.lmi_max_eig <= 1e-8
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct CompatSolution {
    #[serde(serialize_with = "ser_matrix")]
    pub h: Matrix,
    /// `‖H − H_ref‖_F²`
    pub objective: f64,
    pub cert: Certificate,
    pub exact: CompatEvidence,
    pub iterations: usize,
    pub rounds: usize,
    pub converged: bool,
    /// Best feasible objective after each round that had one.
    pub history: Vec<f64>,
}

fn ser_matrix<S: serde::Serializer>(m: &Matrix, s: S) -> std::result::Result<S::Ok, S::Error> {
    serde::Serialize::serialize(&to_rows(m), s)
}

fn with_hessian(clf: &TransformedClf, h: Matrix) -> Result<TransformedClf> {
    Ok(TransformedClf { quad: QuadraticFn::new(h, clf.center().clone())?, ..clf.clone() })
}

fn lmi_max_eig(plant: &Plant, h: &Matrix) -> f64 {
    match plant {
        Plant::Lti { a, .. } => max_sym_eigenvalue(&(h * a + a.transpose() * h)),
        Plant::Driftless { .. } => 0.0,
    }
}

/// Exact certificate of Thm-5 type for a candidate Hessian.
pub fn certificate(
    h: &Matrix,
    plant: &Plant,
    clf: &TransformedClf,
    barrier: &QuadraticFn,
    cfg: &ControllerConfig,
    eps: f64,
) -> Result<(Certificate, CompatBarrier)> {
    let cand = with_hessian(clf, h.clone())?;
    let ps = build_pencil(plant, &cand, barrier, 0, cfg.p)?;
    let qf = q_function(&ps)?;
    let sp = stability_polynomial(&ps)?;
    let cb = compatibility_barrier(&qf, &sp, eps)?;
    let cert = Certificate {
        b: cb.b,
        sigma_minus: cb.sigma_minus,
        monotone_ok: cb.monotone_ok,
        lmi_max_eig: lmi_max_eig(plant, h),
    };
    Ok((cert, cb))
}

/// Scale-free constraint violations used inside the penalty.
fn violations(
    h: &Matrix,
    plant: &Plant,
    clf: &TransformedClf,
    barrier: &QuadraticFn,
    cfg: &ControllerConfig,
    opts: &CompatOptions,
) -> Option<[f64; 4]> {
    let hn = h.norm().max(1e-300);
    let pd = (1e-6 - min_sym_eigenvalue(h) / hn).max(0.0);
    let lmi = (lmi_max_eig(plant, h) / hn).max(0.0);
    let cand = with_hessian(clf, h.clone()).ok()?;
    let ps = build_pencil(plant, &cand, barrier, 0, cfg.p).ok()?;
    let qf = q_function(&ps).ok()?;
    let sp = stability_polynomial(&ps).ok()?;
    let cb = compatibility_barrier(&qf, &sp, opts.epsilon).ok()?;

    let bar = match cb.range() {
        None => 0.0,
        Some((lo, hi)) => {
            let eps = opts.epsilon;
            let ratio = |l: f64| {
                let n = qf.n_poly.eval(l);
                let d = qf.d_poly.eval(l) * eps;
                (n - d) / (n.abs() + d.abs()).max(1e-300)
            };
            let phi = &qf.n_poly - &qf.d_poly.scale(eps);
            let mut pts = crate::equilibria::critical_points(&phi, lo, hi).ok()?;
            pts.extend((0..=200).map(|k| lo + (hi - lo) * k as f64 / 200.0));
            let worst = pts.into_iter().map(ratio).fold(f64::INFINITY, f64::min);
            (opts.margin - worst).max(0.0)
        }
    };

    let ds = sp.s.derivative();
    let mono = if ds.is_zero() {
        0.0
    } else {
        (0..=200)
            .map(|k| {
                let m = ds.eval(cb.lambda_max * k as f64 / 200.0);
                let nrm = m.norm();
                if nrm == 0.0 {
                    0.0
                } else {
                    (-min_sym_eigenvalue(&m) / nrm).max(0.0)
                }
            })
            .fold(0.0, f64::max)
    };
    Some([pd, lmi, bar, mono])
}

/// Nearest (Frobenius) Hessian to `h_ref` satisfying the CLF condition, the
/// compatibility barrier `B ≥ 0` and `S′ ⪰ 0`.
///
/// Exterior penalty over the factor parameters `π` with BFGS inner solves on
/// finite-difference gradients. Each candidate is certified exactly; the
/// result is re-checked with the exact boundary-equilibrium classification.
pub fn compatibilize(
    h_ref: &Matrix,
    plant: &Plant,
    clf: &TransformedClf,
    barrier: &QuadraticFn,
    cfg: &ControllerConfig,
    opts: &CompatOptions,
) -> Result<CompatSolution> {
    let theta0 = shape_from_hessian(h_ref)?;
    if min_sym_eigenvalue(h_ref) <= 0.0 {
        return Err(Error::InvalidInput("reference Hessian must be positive definite".into()));
    }
    let (cert0, _) = certificate(h_ref, plant, clf, barrier, cfg, opts.epsilon)?;
    if cert0.holds() {
        let exact = is_compatible(plant, &with_hessian(clf, h_ref.clone())?, barrier, cfg)?;
        return Ok(CompatSolution {
            h: h_ref.clone(),
            objective: 0.0,
            cert: cert0,
            exact,
            iterations: 0,
            rounds: 0,
            converged: true,
            history: vec![0.0],
        });
    }

    let href_scale = h_ref.norm_squared();
    let penalty = |theta: &Vector, mu: f64| -> f64 {
        let Ok(h) = hessian_from_shape(theta) else { return f64::INFINITY };
        let dist = (&h - h_ref).norm_squared() / href_scale;
        match violations(&h, plant, clf, barrier, cfg, opts) {
            Some(v) => dist + mu * v.iter().map(|x| x * x).sum::<f64>(),
            None => f64::INFINITY,
        }
    };

    let mut theta = theta0;
    let mut mu = opts.initial_weight;
    let mut iterations = 0;
    let mut history = Vec::new();
    let mut best: Option<(f64, Matrix, Certificate, CompatEvidence)> = None;
    let mut last_diag = String::new();

    for round in 1..=opts.rounds {
        let (t, its) = bfgs(|th| penalty(th, mu), &theta, opts.inner_iterations, opts.fd_step);
        theta = t;
        iterations += its;
        let h = hessian_from_shape(&theta)?;
        let objective = (&h - h_ref).norm_squared();
        match certificate(&h, plant, clf, barrier, cfg, opts.epsilon) {
            Ok((cert, _)) => {
                debug!("compat round {round}: μ={mu:e} obj={objective:.6} B={:e} mono={} lmi={:e}",
                    cert.b, cert.monotone_ok, cert.lmi_max_eig);
                last_diag = format!(
                    "objective {objective:.6e}, B {:.6e}, monotone {}, lmi {:.3e}",
                    cert.b, cert.monotone_ok, cert.lmi_max_eig
                );
                if cert.holds() && min_sym_eigenvalue(&h) > 0.0 {
                    let exact = is_compatible(plant, &with_hessian(clf, h.clone())?, barrier, cfg)?;
                    if exact.compatible && best.as_ref().map_or(true, |b| objective < b.0) {
                        best = Some((objective, h.clone(), cert, exact));
                    }
                }
            }
            Err(e) => last_diag = format!("certificate failed: {e}"),
        }
        if let Some(b) = &best {
            history.push(b.0);
            return Ok(CompatSolution {
                h: b.1.clone(),
                objective: b.0,
                cert: b.2.clone(),
                exact: b.3.clone(),
                iterations,
                rounds: round,
                converged: true,
                history,
            });
        }
        mu *= opts.weight_growth;
    }
    Err(Error::CompatibilizationFailed { rounds: opts.rounds, diagnostics: last_diag })
}

/// BFGS with backtracking on central finite-difference gradients.
fn bfgs<F: Fn(&Vector) -> f64>(f: F, x0: &Vector, max_iter: usize, step: f64) -> (Vector, usize) {
    let n = x0.len();
    let grad = |x: &Vector| {
        Vector::from_fn(n, |k, _| {
            let h = step * (1.0 + x[k].abs());
            let mut xp = x.clone();
            let mut xm = x.clone();
            xp[k] += h;
            xm[k] -= h;
            let (fp, fm) = (f(&xp), f(&xm));
            if fp.is_finite() && fm.is_finite() {
                (fp - fm) / (2.0 * h)
            } else {
                0.0
            }
        })
    };
    let mut x = x0.clone();
    let mut fx = f(&x);
    let mut g = grad(&x);
    let mut hinv = Matrix::identity(n, n);
    let mut it = 0;
    while it < max_iter {
        it += 1;
        if g.norm() < 1e-10 {
            break;
        }
        let mut d = -(&hinv * &g);
        if d.dot(&g) >= 0.0 {
            hinv = Matrix::identity(n, n);
            d = -g.clone();
        }
        let mut t = 1.0;
        let slope = d.dot(&g);
        let mut accepted = None;
        while t > 1e-12 {
            let xn = &x + &d * t;
            let fxn = f(&xn);
            if fxn.is_finite() && fxn <= fx + 1e-4 * t * slope {
                accepted = Some((xn, fxn));
                break;
            }
            t *= 0.5;
        }
        let Some((xn, fxn)) = accepted else {
            if hinv != Matrix::identity(n, n) {
                hinv = Matrix::identity(n, n);
                continue;
            }
            break;
        };
        let gn = grad(&xn);
        let s = &xn - &x;
        let y = &gn - &g;
        let sy = s.dot(&y);
        if sy > 1e-14 * s.norm() * y.norm() {
            let rho = 1.0 / sy;
            let i = Matrix::identity(n, n);
            let left = &i - &s * y.transpose() * rho;
            let right = &i - &y * s.transpose() * rho;
            hinv = &left * &hinv * &right + &s * s.transpose() * rho;
        }
        let progress = fx - fxn;
        x = xn;
        fx = fxn;
        g = gn;
        if progress.abs() <= 1e-15 * (1.0 + fx.abs()) {
            break;
        }
    }
    (x, it)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn bfgs_minimizes_rosenbrock() {
        let f = |x: &Vector| (1.0 - x[0]).powi(2) + 100.0 * (x[1] - x[0] * x[0]).powi(2);
        let (x, _) = bfgs(f, &Vector::from_vec(vec![-1.2, 1.0]), 500, 1e-7);
        assert!((x[0] - 1.0).abs() < 1e-4 && (x[1] - 1.0).abs() < 1e-4, "{x}");
    }

    fn fig2() -> (Plant, TransformedClf, QuadraticFn, ControllerConfig) {
        use crate::plant::ClassK;
        let plant = Plant::lti(Matrix::identity(2, 2) * -2.0, Matrix::identity(2, 2), Vector::zeros(2)).unwrap();
        let href = Matrix::from_diagonal(&Vector::from_vec(vec![5.0, 8.0]));
        let clf = TransformedClf::new(QuadraticFn::new(href, Vector::zeros(2)).unwrap(), ClassK::Linear(1.0));
        let bar = QuadraticFn::new(
            Matrix::from_row_slice(2, 2, &[1.95, -0.61, -0.61, 0.28]),
            Vector::from_vec(vec![6.0, 0.0]),
        )
        .unwrap();
        let cfg = ControllerConfig { p: 0.33, ..Default::default() };
        (plant, clf, bar, cfg)
    }

    #[test]
    fn compatible_reference_is_returned_unchanged() {
        let (plant, clf, _, cfg) = fig2();
        let bar = QuadraticFn::new(
            Matrix::from_row_slice(2, 2, &[1.0, 0.2, 0.2, 2.0]),
            Vector::from_vec(vec![1.0, 6.0]),
        )
        .unwrap();
        let sol = compatibilize(clf.hessian(), &plant, &clf, &bar, &cfg, &CompatOptions::default()).unwrap();
        assert_eq!(sol.objective, 0.0);
        assert_eq!(&sol.h, clf.hessian());
    }

    #[test]
    fn incompatible_barrier_gets_rounder_hessian() {
        use crate::compat::eccentricity;
        let (plant, clf, bar, cfg) = fig2();
        let href = clf.hessian().clone();
        let sol = compatibilize(&href, &plant, &clf, &bar, &cfg, &CompatOptions::default()).unwrap();
        assert!(sol.objective > 0.0);
        assert!(sol.exact.compatible);
        assert!(sol.cert.holds(), "{:?}", sol.cert);
        assert!(eccentricity(&sol.h) < eccentricity(&href), "{}", sol.h);
        assert!(min_sym_eigenvalue(&sol.h) > 0.0);
    }
}
