use proptest::prelude::*;

use clfcbf::compat::{hessian_from_shape, shape_from_hessian, shape_len};
use clfcbf::equilibria::{build_pencil, q_function};
use clfcbf::plant::{barrier_eval, ClassK, InputMap, Plant, QuadraticFn, TransformedClf};
use clfcbf::qp::{active_region, solve_qp, ControllerConfig, Region};
use clfcbf::{Matrix, Vector};

fn pd2() -> impl Strategy<Value = Matrix> {
    (0.3..4.0f64, 0.3..4.0f64, 0.0..std::f64::consts::PI).prop_map(|(a, b, th)| {
        let (c, s) = (th.cos(), th.sin());
        let r = Matrix::from_row_slice(2, 2, &[c, -s, s, c]);
        &r * Matrix::from_diagonal(&Vector::from_vec(vec![a, b])) * r.transpose()
    })
}

fn vec2(scale: f64) -> impl Strategy<Value = Vector> {
    (-scale..scale, -scale..scale).prop_map(|(a, b)| Vector::from_vec(vec![a, b]))
}

fn well_conditioned_g() -> impl Strategy<Value = Matrix> {
    prop::array::uniform4(-0.5..0.5f64).prop_map(|e| Matrix::from_row_slice(2, 2, &e) + Matrix::identity(2, 2) * 1.5)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    #[test]
    fn shape_round_trip(h in pd2()) {
        let pi = shape_from_hessian(&h).unwrap();
        prop_assert_eq!(pi.len(), shape_len(2));
        let back = hessian_from_shape(&pi).unwrap();
        prop_assert!((back - &h).norm() <= 1e-12 * h.norm().max(1.0));
    }

    #[test]
    fn qfunction_matches_direct(
        hv in pd2(), hh in pd2(), c in vec2(5.0), g in well_conditioned_g(),
        p in 0.2..3.0f64, lambda in 0.0..30.0f64,
    ) {
        let plant = Plant::driftless(InputMap::Constant(g)).unwrap();
        let clf = TransformedClf::new(QuadraticFn::new(hv, Vector::zeros(2)).unwrap(), ClassK::Linear(1.0));
        let bar = QuadraticFn::new(hh, c).unwrap();
        let ps = build_pencil(&plant, &clf, &bar, 0, p).unwrap();
        let qf = q_function(&ps).unwrap();
        let sv = ps.pencil.eval(lambda).singular_values();
        prop_assume!(sv.min() > 1e-4 * sv.max());
        let direct = ps.q_direct(lambda).unwrap();
        prop_assert!((qf.q(lambda) - direct).abs() <= 1e-8 * direct.abs().max(1.0));
    }

    /// The QP solution satisfies the KKT conditions of
    /// `min ½‖u‖² + ½pδ²  s.t.  A(u, δ) ≤ b`.
    #[test]
    fn qp_kkt(
        hv in pd2(), h1 in pd2(), h2 in pd2(), x in vec2(8.0),
        a in prop::array::uniform4(-2.0..2.0f64), p in 0.1..5.0f64,
    ) {
        let plant = Plant::lti(Matrix::from_row_slice(2, 2, &a), Matrix::identity(2, 2), Vector::zeros(2)).unwrap();
        let clf = TransformedClf::new(QuadraticFn::new(hv, Vector::zeros(2)).unwrap(), ClassK::Linear(1.0));
        let barriers = vec![
            QuadraticFn::new(h1, Vector::from_vec(vec![5.0, 0.0])).unwrap(),
            QuadraticFn::new(h2, Vector::from_vec(vec![-5.0, 1.0])).unwrap(),
        ];
        prop_assume!(x.norm() > 1e-3);
        let cfg = ControllerConfig { p, ..Default::default() };
        let out = solve_qp(&x, &plant, &clf, &barriers, &cfg).unwrap();
        let scale = 1.0 + out.u.norm() + out.delta.abs() + out.lambdas.norm();
        prop_assert!(out.lambdas.iter().all(|&l| l >= -1e-9 * scale));
        prop_assert!(out.residuals.iter().all(|&r| r <= 1e-8 * scale));
        for j in 0..out.lambdas.len() {
            prop_assert!((out.lambdas[j] * out.residuals[j]).abs() <= 1e-8 * scale * scale);
        }
        // Stationarity in δ: pδ equals the CLF multiplier.
        prop_assert!((p * out.delta - out.lambdas[0]).abs() <= 1e-8 * scale);
        // Stationarity in u: u = −λ₀ L_gV + Σ λ_i L_gh_i.
        let (_, grad_v) = clf.recover(&x);
        let mut u = -plant.g(&x).transpose() * grad_v * out.lambdas[0];
        for (i, b) in barriers.iter().enumerate() {
            u += plant.g(&x).transpose() * barrier_eval(b, &x).1 * out.lambdas[i + 1];
        }
        prop_assert!((u - &out.u).norm() <= 1e-8 * scale);
    }

    #[test]
    fn region_labels(l0 in 0.0..2.0f64, l1 in 0.0..2.0f64, l2 in 0.0..2.0f64, tol in 1e-6..1e-1f64) {
        let out = clfcbf::qp::QpOutcome {
            u: Vector::zeros(2),
            delta: 0.0,
            lambdas: Vector::from_vec(vec![l0, l1, l2]),
            active: Vec::new(),
            objective: 0.0,
            residuals: Vector::zeros(3),
        };
        let r = active_region(&out, tol);
        let on: Vec<usize> = [l1, l2].iter().enumerate().filter(|(_, &l)| l > tol).map(|(i, _)| i).collect();
        let expected = match on.as_slice() {
            [] => "interior".to_string(),
            [i] if l0 > tol => format!("S{}", i + 1),
            set => format!("M{}", set.iter().map(|i| (i + 1).to_string()).collect::<Vec<_>>().join("+")),
        };
        prop_assert_eq!(r.label(), expected);
        prop_assert_eq!(matches!(r, Region::Interior), on.is_empty());
    }
}
