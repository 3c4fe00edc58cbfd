//! Randomized invariant suites, shared by the `selftest` command and the
//! acceptance runner. Every suite is deterministic in its seed.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::equilibria::{build_pencil, is_compatible, q_function, Verdict};
use crate::plant::{barrier_eval, ClassK, InputMap, Plant, QuadraticFn, TransformedClf};
use crate::polyalg::{oblique_projection, projection_sequence, MatrixPoly};
use crate::qp::ControllerConfig;
use crate::sim::{Scenario, BUNDLED};
use crate::{Matrix, Vector};

#[derive(Debug, Clone, Serialize)]
pub struct SuiteResult {
    pub name: String,
    pub passed: bool,
    pub checks: usize,
    /// Largest observed error, in the suite's own measure.
    pub worst: f64,
    pub detail: String,
}

impl SuiteResult {
    fn new(name: &str, checks: usize, worst: f64, passed: bool, detail: String) -> Self {
        Self { name: name.into(), passed, checks, worst, detail }
    }
}

fn random_matrix(rng: &mut ChaCha8Rng, r: usize, c: usize) -> Matrix {
    Matrix::from_fn(r, c, |_, _| rng.gen_range(-1.0..1.0))
}

/// Symmetric PD matrix with eigenvalues in `[lo, hi]`.
fn random_pd(rng: &mut ChaCha8Rng, n: usize, lo: f64, hi: f64) -> Matrix {
    let q = random_matrix(rng, n, n).qr().q();
    let d = Vector::from_fn(n, |_, _| rng.gen_range(lo..hi));
    &q * Matrix::from_diagonal(&d) * q.transpose()
}

fn random_vector(rng: &mut ChaCha8Rng, n: usize, scale: f64) -> Vector {
    Vector::from_fn(n, |_, _| rng.gen_range(-scale..scale))
}

fn random_instance(rng: &mut ChaCha8Rng, n: usize, lti: bool) -> (Plant, TransformedClf, QuadraticFn, f64) {
    let plant = if lti {
        Plant::lti(random_matrix(rng, n, n) * 2.0, random_matrix(rng, n, n), Vector::zeros(n)).expect("dims")
    } else {
        let mut g = random_matrix(rng, n, n);
        g += Matrix::identity(n, n) * 2.0;
        Plant::driftless(InputMap::Constant(g)).expect("full rank")
    };
    let clf = TransformedClf::new(
        QuadraticFn::new(random_pd(rng, n, 0.5, 5.0), Vector::zeros(n)).expect("symmetric"),
        ClassK::Linear(rng.gen_range(0.5..2.0)),
    );
    let bar = QuadraticFn::new(random_pd(rng, n, 0.2, 3.0), random_vector(rng, n, 5.0)).expect("symmetric");
    (plant, clf, bar, rng.gen_range(0.2..3.0))
}

/// `n(λ)/d(λ)` against direct `ν(λ)ᵀH_hν(λ)`, and `Adj·P ≡ det·I`.
pub fn qfunction_algebra(seed: u64, count_2d: usize, count_3d: usize, samples: usize) -> SuiteResult {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (mut worst_q, mut worst_adj, mut checks) = (0.0_f64, 0.0_f64, 0);
    let mut failures = Vec::new();
    for k in 0..count_2d + count_3d {
        let n = if k < count_2d { 2 } else { 3 };
        let (plant, clf, bar, p) = random_instance(&mut rng, n, k % 2 == 0);
        let ps = match build_pencil(&plant, &clf, &bar, 0, p) {
            Ok(ps) => ps,
            Err(e) => {
                failures.push(format!("instance {k}: {e}"));
                continue;
            }
        };
        let qf = match q_function(&ps) {
            Ok(q) => q,
            Err(e) => {
                failures.push(format!("instance {k}: {e}"));
                continue;
            }
        };
        let mut accepted = 0;
        let mut tries = 0;
        while accepted < samples && tries < 100 * samples {
            tries += 1;
            let l = rng.gen_range(-10.0..30.0);
            // both sides lose accuracy next to the spectrum
            let sv = ps.pencil.eval(l).singular_values();
            if sv.min() < 1e-6 * sv.max() {
                continue;
            }
            let Some(direct) = ps.q_direct(l) else { continue };
            let err = (qf.q(l) - direct).abs() / direct.abs().max(1.0);
            worst_q = worst_q.max(err);
            accepted += 1;
            checks += 1;
        }
        let prod = ps.pencil.adjugate().mul(&ps.pencil.as_matrix_poly()).expect("square");
        let det_i = MatrixPoly::new(
            ps.pencil.det().coeffs().iter().map(|&c| Matrix::identity(n, n) * c).collect(),
            n,
            n,
        )
        .expect("shape");
        let diff = prod.sub(&det_i).expect("shape");
        let err = diff.max_abs_coeff() / det_i.max_abs_coeff().max(1.0);
        worst_adj = worst_adj.max(err);
        checks += 1;
    }
    let passed = failures.is_empty() && worst_q <= 1e-8 && worst_adj <= 1e-9;
    SuiteResult::new(
        "qfunction_algebra",
        checks,
        worst_q.max(worst_adj),
        passed,
        format!("max rel q error {worst_q:.2e} (tol 1e-8), max Adj·P − det·I {worst_adj:.2e} (tol 1e-9){}", fail_note(&failures)),
    )
}

fn fail_note(failures: &[String]) -> String {
    if failures.is_empty() {
        String::new()
    } else {
        format!("; {} failures, first: {}", failures.len(), failures[0])
    }
}

/// `q(0) ≥ 1 ⇔ h(x₀) ≥ 0` on random instances.
pub fn origin_test(seed: u64, count: usize) -> SuiteResult {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (mut agree, mut inside, mut outside) = (0, 0, 0);
    let mut failures = Vec::new();
    for k in 0..count {
        let n = 2 + k % 2;
        let (plant, clf, mut bar, p) = random_instance(&mut rng, n, k % 3 != 0);
        // place x₀ at a chosen ellipse "radius" s, away from s = 1
        let s = loop {
            let s: f64 = rng.gen_range(0.2..2.0);
            if (s - 1.0).abs() > 0.02 {
                break s;
            }
        };
        let dir = random_vector(&mut rng, n, 1.0);
        let r = (dir.dot(&(&bar.h * &dir))).sqrt();
        bar.center = clf.center() + dir * (s / r);
        let ps = match build_pencil(&plant, &clf, &bar, 0, p) {
            Ok(ps) => ps,
            Err(e) => {
                failures.push(format!("instance {k}: {e}"));
                continue;
            }
        };
        let q0 = match q_function(&ps) {
            Ok(qf) => qf.q(0.0),
            Err(e) => {
                failures.push(format!("instance {k}: {e}"));
                continue;
            }
        };
        let h0 = barrier_eval(&bar, clf.center()).0;
        if (q0 >= 1.0 - 1e-9) == (h0 >= -1e-9) {
            agree += 1;
        } else {
            failures.push(format!("instance {k}: q(0) = {q0}, h(x0) = {h0}"));
        }
        if h0 >= 0.0 {
            inside += 1;
        } else {
            outside += 1;
        }
    }
    let passed = failures.is_empty() && inside >= 100.min(count / 3) && outside >= 100.min(count / 3);
    SuiteResult::new(
        "origin_test",
        count,
        (count - agree) as f64,
        passed,
        format!("{agree}/{count} agree; h(x0) ≥ 0 in {inside}, < 0 in {outside}{}", fail_note(&failures)),
    )
}

/// Properties (i)–(v) of the generalized oblique projection.
pub fn projection_properties(seed: u64, count: usize, max_power: usize) -> SuiteResult {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst = 0.0_f64;
    let mut checks = 0;
    let mut failures = Vec::new();
    for k in 0..count {
        let n = rng.gen_range(2..=5);
        let rank_g = rng.gen_range(1..=n);
        let m = random_matrix(&mut rng, n, rank_g);
        let g = &m * m.transpose();
        let r = rng.gen_range(1..=n.min(3));
        // G-orthogonal columns by Gram–Schmidt in the G semi-inner product
        let mut z = Matrix::zeros(n, r);
        for j in 0..r {
            let mut v = random_vector(&mut rng, n, 1.0);
            for i in 0..j {
                let zi = z.column(i).into_owned();
                let nn = zi.dot(&(&g * &zi));
                if nn > 1e-12 {
                    v -= &zi * (zi.dot(&(&g * &v)) / nn);
                }
            }
            z.set_column(j, &v);
        }
        let n1 = Matrix::from_diagonal(&Vector::from_fn(r, |_, _| rng.gen_range(0.1..1.0)));
        let (pz, seq) = match (oblique_projection(&z, &g, &n1), projection_sequence(&n1, &z, &g, max_power)) {
            (Ok(p), Ok(s)) => (p, s),
            (Err(e), _) | (_, Err(e)) => {
                failures.push(format!("triple {k}: {e}"));
                continue;
            }
        };
        let d = z.transpose() * &g * &z;
        let ir = Matrix::identity(r, r);
        let mut pk = Matrix::identity(n, n);
        for (j, nk) in seq.n.iter().enumerate() {
            pk = &pk * &pz;
            let e1 = (&pk - (Matrix::identity(n, n) - &g * &z * nk * z.transpose())).amax();
            let e2 = (&pk * &g * &z - &g * &z * (&ir - nk * &d)).amax();
            let e3 = (z.transpose() * &pk - (&ir - &d * nk) * z.transpose()).amax();
            worst = worst.max(e1).max(e2).max(e3);
            checks += 3;
            if e1.max(e2).max(e3) > 1e-10 {
                failures.push(format!("triple {k}, power {}: errors {e1:.1e} {e2:.1e} {e3:.1e}", j + 1));
            }
        }
        // w with ZᵀGw = 0 spans the null space of ZᵀG
        let ztg = z.transpose() * &g;
        let svd = ztg.clone().svd(false, true);
        let vt = svd.v_t.expect("requested");
        let rank = svd.singular_values.iter().filter(|&&s| s > 1e-10).count();
        for row in rank..vt.nrows() {
            let w = vt.row(row).transpose().into_owned();
            let e4 = (&pz * &g * &w - &g * &w).amax();
            let e5 = (w.transpose() * &pz - w.transpose()).amax();
            worst = worst.max(e4).max(e5);
            checks += 2;
            if e4.max(e5) > 1e-10 {
                failures.push(format!("triple {k}: (iv)/(v) errors {e4:.1e} {e5:.1e}"));
            }
        }
    }
    SuiteResult::new(
        "projection_properties",
        checks,
        worst,
        failures.is_empty(),
        format!("max abs error {worst:.2e} (tol 1e-10){}", fail_note(&failures)),
    )
}

/// Transformed-CLF relations on random states of a CLF.
fn transformed_clf_checks(clf: &TransformedClf, rng: &mut ChaCha8Rng, count: usize) -> (f64, f64, Vec<String>) {
    let n = clf.dim();
    let x0 = clf.center();
    let (mut worst_rel, mut worst_inv) = (0.0_f64, 0.0_f64);
    let mut failures = Vec::new();
    if clf.vbar(x0) != 0.0 {
        failures.push("V̄(x0) ≠ 0".into());
    }
    for _ in 0..count {
        let x = x0 + random_vector(rng, n, 10.0);
        let vbar = clf.vbar(&x);
        if vbar <= 0.0 {
            failures.push(format!("V̄ ≤ 0 at {x}"));
        }
        let (v, gv) = clf.recover(&x);
        let vb_grad = clf.grad_vbar(&x);
        let rel = (&vb_grad - &gv * clf.gamma.eval(v)).norm() / vb_grad.norm();
        let inv = (clf.gamma.integral(v) - vbar).abs() / vbar;
        // same level set: rescale another direction to the same V̄
        let dir = random_vector(rng, n, 1.0);
        let y = x0 + &dir * (vbar / clf.vbar(&(x0 + &dir))).sqrt();
        let level = (clf.recover(&y).0 - v).abs() / v;
        worst_rel = worst_rel.max(rel).max(level);
        worst_inv = worst_inv.max(inv).max((clf.gamma.integral_inverse(clf.gamma.integral(v)) - v).abs() / v);
    }
    (worst_rel, worst_inv, failures)
}

/// Positivity, invertibility, shared level sets and `∇V̄ = γ(V)∇V` for the
/// CLF of every bundled scenario.
pub fn transformed_clf(seed: u64, count: usize) -> SuiteResult {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (mut worst_rel, mut worst_inv) = (0.0_f64, 0.0_f64);
    let mut failures = Vec::new();
    let mut checks = 0;
    for (name, text) in BUNDLED {
        let s = match Scenario::parse(text, None) {
            Ok(s) => s,
            Err(e) => {
                failures.push(format!("{name}: {e}"));
                continue;
            }
        };
        let (r, i, f) = transformed_clf_checks(&s.clf, &mut rng, count);
        worst_rel = worst_rel.max(r);
        worst_inv = worst_inv.max(i);
        failures.extend(f.into_iter().map(|m| format!("{name}: {m}")));
        checks += count;
    }
    let passed = failures.is_empty() && worst_rel <= 1e-9 && worst_inv <= 1e-10;
    SuiteResult::new(
        "transformed_clf",
        checks,
        worst_rel.max(worst_inv),
        passed,
        format!(
            "max rel gradient/level-set error {worst_rel:.2e} (tol 1e-9), max round-trip error {worst_inv:.2e} (tol 1e-10){}",
            fail_note(&failures)
        ),
    )
}

/// Closed-form driftless case: `q(λ) = 9/(λ − 1)²` has the single admissible
/// root `λ = 4` at `x = (4, 0)`, which is unstable.
pub fn radial_oracle() -> SuiteResult {
    let plant = Plant::driftless(InputMap::Constant(Matrix::identity(2, 2))).expect("identity");
    let clf = TransformedClf::new(
        QuadraticFn::new(Matrix::identity(2, 2), Vector::zeros(2)).expect("identity"),
        ClassK::Linear(1.0),
    );
    let bar = QuadraticFn::new(Matrix::identity(2, 2), Vector::from_vec(vec![3.0, 0.0])).expect("identity");
    let cfg = ControllerConfig::default();
    let ev = match is_compatible(&plant, &clf, &bar, &cfg) {
        Ok(ev) => ev,
        Err(e) => return SuiteResult::new("radial_oracle", 0, f64::INFINITY, false, e.to_string()),
    };
    let ok = ev.roots.len() == 1 && {
        let r = &ev.roots[0];
        (r.lambda - 4.0).abs() <= 1e-8
            && (r.x_e[0] - 4.0).abs() <= 1e-6
            && r.x_e[1].abs() <= 1e-6
            && r.verdict == Verdict::Unstable
    };
    let worst = ev.roots.first().map_or(f64::INFINITY, |r| (r.lambda - 4.0).abs());
    let detail = match ev.roots.as_slice() {
        [r] => format!("λ_e = {}, x_e = {:?}, {:?}", r.lambda, r.x_e, r.verdict),
        roots => format!("{} roots", roots.len()),
    };
    SuiteResult::new("radial_oracle", 1, worst, ok && ev.compatible, detail)
}

/// Every suite with its default size.
pub fn run_all(seed: u64) -> Vec<SuiteResult> {
    vec![
        radial_oracle(),
        qfunction_algebra(seed, 200, 50, 20),
        origin_test(seed + 1, 500),
        projection_properties(seed + 2, 100, 5),
        transformed_clf(seed + 3, 100),
    ]
}
