//! The min-norm CLF-CBF quadratic program
//!
//! ```text
//! min ½‖u‖² + ½pδ²  s.t.  L_fV + L_gV·u + γ(V) ≤ δ,
//!                         L_fh_i + L_gh_i·u ≥ −α(h_i)
//! ```
//!
//! solved exactly by active-set enumeration, plus the closed-loop field and
//! the active-region classification.

use serde::{Deserialize, Serialize};

use crate::plant::{barrier_eval, ClassK, Plant, QuadraticFn, TransformedClf};
use crate::{Error, Matrix, Result, Vector};

/// Enumeration is exponential in the number of barriers.
pub const MAX_BARRIERS: usize = 16;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ControllerConfig {
    pub p: f64,
    pub gamma: ClassK,
    pub alpha: ClassK,
    /// Region threshold is `multiplier_tol·(1 + ‖∇V̄‖)`.
    pub multiplier_tol: f64,
}

impl Default for ControllerConfig {
    fn default() -> Self {
        Self { p: 1.0, gamma: ClassK::Linear(1.0), alpha: ClassK::Linear(1.0), multiplier_tol: 1e-7 }
    }
}

impl ControllerConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.p > 0.0 && self.p.is_finite()) {
            return Err(Error::InvalidInput("slack penalty p must be positive".into()));
        }
        self.gamma.validate()?;
        self.alpha.validate()
    }
}

/// Solution of the QP. Constraint 0 is the CLF, constraint `i + 1` barrier `i`.
#[derive(Debug, Clone, PartialEq)]
pub struct QpOutcome {
    pub u: Vector,
    pub delta: f64,
    pub lambdas: Vector,
    pub active: Vec<usize>,
    pub objective: f64,
    /// `a_jᵀz − b_j` for every constraint (≤ 0 when feasible).
    pub residuals: Vector,
}

impl QpOutcome {
    pub fn clf_multiplier(&self) -> f64 {
        self.lambdas[0]
    }

    pub fn barrier_multipliers(&self) -> &[f64] {
        &self.lambdas.as_slice()[1..]
    }
}

/// Inequality data `A z ≤ b` over `z = (u, δ)`, together with the pieces
/// the closed loop needs again.
struct Constraints {
    a: Matrix,
    b: Vector,
    f: Vector,
    g: Matrix,
}

fn assemble(
    x: &Vector,
    plant: &Plant,
    clf: &TransformedClf,
    barriers: &[QuadraticFn],
    cfg: &ControllerConfig,
) -> Constraints {
    let m = plant.input_dim();
    let f = plant.drift(x);
    let g = plant.g(x);
    let (v, grad_v) = clf.recover(x);
    let mut a = Matrix::zeros(barriers.len() + 1, m + 1);
    let mut b = Vector::zeros(barriers.len() + 1);

    let lgv = g.transpose() * &grad_v;
    a.view_mut((0, 0), (1, m)).copy_from(&lgv.transpose());
    a[(0, m)] = -1.0;
    b[0] = -(grad_v.dot(&f) + cfg.gamma.eval(v));

    for (i, bar) in barriers.iter().enumerate() {
        let (h, grad_h) = barrier_eval(bar, x);
        let lgh = g.transpose() * &grad_h;
        a.view_mut((i + 1, 0), (1, m)).copy_from(&(-lgh).transpose());
        b[i + 1] = grad_h.dot(&f) + cfg.alpha.eval(h);
    }
    Constraints { a, b, f, g }
}

pub fn solve_qp(
    x: &Vector,
    plant: &Plant,
    clf: &TransformedClf,
    barriers: &[QuadraticFn],
    cfg: &ControllerConfig,
) -> Result<QpOutcome> {
    if barriers.len() > MAX_BARRIERS {
        return Err(Error::InvalidInput(format!("at most {MAX_BARRIERS} barriers supported")));
    }
    if x.iter().any(|v| !v.is_finite()) {
        return Err(Error::InvalidInput("non-finite state".into()));
    }
    let c = assemble(x, plant, clf, barriers, cfg);
    solve_constraints(&c.a, &c.b, cfg.p).map_err(|violated| Error::Infeasible {
        state: x.iter().copied().collect(),
        violated,
    })
}

/// Active-set enumeration of `min ½zᵀQz s.t. Az ≤ b`, `Q = diag(I, p)`.
///
/// Candidate sets are visited by size, then lexicographically; the first
/// one passing primal and dual feasibility is the unique optimum because the
/// objective is strictly convex. On failure the constraints violated by the
/// least-violating candidate are returned.
pub(crate) fn solve_constraints(a: &Matrix, b: &Vector, p: f64) -> std::result::Result<QpOutcome, Vec<usize>> {
    let (k, dim) = a.shape();
    let qinv = Vector::from_fn(dim, |j, _| if j + 1 == dim { 1.0 / p } else { 1.0 });
    let scale = 1.0 + b.amax() + a.amax();
    let primal_tol = 1e-9 * scale;
    let dual_tol = 1e-9 * scale;

    let mut best_violation = (f64::INFINITY, Vec::new());
    for size in 0..=k.min(dim) {
        for set in Combinations::new(k, size) {
            let mut z = Vector::zeros(dim);
            let mut mu = Vector::zeros(k);
            if size > 0 {
                let aw = Matrix::from_fn(size, dim, |r, col| a[(set[r], col)]);
                let bw = Vector::from_fn(size, |r, _| b[set[r]]);
                let aq = Matrix::from_fn(size, dim, |r, col| aw[(r, col)] * qinv[col]);
                let kmat = &aq * aw.transpose();
                let Some(sol) = kmat.clone().lu().solve(&(-&bw)) else { continue };
                if (&kmat * &sol + &bw).amax() > 1e-9 * (1.0 + bw.amax()) {
                    continue;
                }
                z = -(aq.transpose() * &sol);
                for (r, &j) in set.iter().enumerate() {
                    mu[j] = sol[r];
                }
            }
            let residuals = a * &z - b;
            let violation = residuals.max().max(0.0);
            let dual_ok = mu.iter().all(|&l| l >= -dual_tol);
            if violation <= primal_tol && dual_ok {
                let objective = 0.5 * z.iter().zip(qinv.iter()).map(|(zi, qi)| zi * zi / qi).sum::<f64>();
                let u = z.rows(0, dim - 1).into_owned();
                mu.iter_mut().for_each(|l| *l = l.max(0.0));
                return Ok(QpOutcome { u, delta: z[dim - 1], lambdas: mu, active: set, objective, residuals });
            }
            if violation < best_violation.0 {
                let violated = (0..k).filter(|&j| residuals[j] > primal_tol).collect();
                best_violation = (violation, violated);
            }
        }
    }
    Err(best_violation.1)
}

/// Lexicographic `size`-subsets of `0..n`.
struct Combinations {
    n: usize,
    idx: Vec<usize>,
    done: bool,
}

impl Combinations {
    fn new(n: usize, size: usize) -> Self {
        Self { n, idx: (0..size).collect(), done: size > n }
    }
}

impl Iterator for Combinations {
    type Item = Vec<usize>;

    fn next(&mut self) -> Option<Vec<usize>> {
        if self.done {
            return None;
        }
        let out = self.idx.clone();
        let size = self.idx.len();
        let mut i = size;
        loop {
            if i == 0 {
                self.done = true;
                break;
            }
            i -= 1;
            if self.idx[i] < self.n - size + i {
                self.idx[i] += 1;
                for j in i + 1..size {
                    self.idx[j] = self.idx[j - 1] + 1;
                }
                break;
            }
        }
        Some(out)
    }
}

/// `f(x) + g(x)u⋆(x)`
pub fn closed_loop_field(
    x: &Vector,
    plant: &Plant,
    clf: &TransformedClf,
    barriers: &[QuadraticFn],
    cfg: &ControllerConfig,
) -> Result<Vector> {
    let out = solve_qp(x, plant, clf, barriers, cfg)?;
    Ok(plant.drift(x) + plant.g(x) * &out.u)
}

/// Closed loop written through the multipliers: `f + G(−λ₀∇V + Σλ_i∇h_i)`.
pub fn closed_loop_field_multipliers(
    x: &Vector,
    plant: &Plant,
    clf: &TransformedClf,
    barriers: &[QuadraticFn],
    out: &QpOutcome,
) -> Vector {
    let (_, grad_v) = clf.recover(x);
    let mut dir = -grad_v * out.lambdas[0];
    for (i, b) in barriers.iter().enumerate() {
        dir += b.grad(x) * out.lambdas[i + 1];
    }
    plant.drift(x) + plant.gram(x) * dir
}

/// Closed-loop field together with the QP solution that produced it.
pub fn closed_loop_with_outcome(
    x: &Vector,
    plant: &Plant,
    clf: &TransformedClf,
    barriers: &[QuadraticFn],
    cfg: &ControllerConfig,
) -> Result<(Vector, QpOutcome)> {
    let out = solve_qp(x, plant, clf, barriers, cfg)?;
    let c = assemble(x, plant, clf, barriers, cfg);
    Ok((c.f + c.g * &out.u, out))
}

/// Which constraints are active at a state.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Region {
    Interior,
    /// Only the CLF and barrier `i` (zero-based) are active.
    Single(usize),
    /// Any other pattern of active barrier constraints.
    MultiActive(Vec<usize>),
}

impl Region {
    /// Stable label used in CSV output; barriers are numbered from 1.
    pub fn label(&self) -> String {
        match self {
            Region::Interior => "interior".into(),
            Region::Single(i) => format!("S{}", i + 1),
            Region::MultiActive(set) => {
                let ids: Vec<String> = set.iter().map(|i| (i + 1).to_string()).collect();
                format!("M{}", ids.join("+"))
            }
        }
    }
}

pub fn region_tolerance(clf: &TransformedClf, x: &Vector, cfg: &ControllerConfig) -> f64 {
    cfg.multiplier_tol * (1.0 + clf.grad_vbar(x).norm())
}

pub fn active_region(out: &QpOutcome, tol: f64) -> Region {
    let active: Vec<usize> = out
        .barrier_multipliers()
        .iter()
        .enumerate()
        .filter(|(_, &l)| l > tol)
        .map(|(i, _)| i)
        .collect();
    match active.as_slice() {
        [] => Region::Interior,
        [i] if out.clf_multiplier() > tol => Region::Single(*i),
        _ => Region::MultiActive(active),
    }
}

/// Outcome of a feasibility sweep over a set of states.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct FeasibilityReport {
    pub checked: usize,
    pub infeasible: Vec<Vec<f64>>,
}

/// Solves the QP at every state inside the safe set and records failures.
pub fn feasibility_sweep<'a>(
    states: impl IntoIterator<Item = &'a Vector>,
    plant: &Plant,
    clf: &TransformedClf,
    barriers: &[QuadraticFn],
    cfg: &ControllerConfig,
) -> FeasibilityReport {
    let mut report = FeasibilityReport::default();
    for x in states {
        if barriers.iter().any(|b| barrier_eval(b, x).0 < 0.0) {
            continue;
        }
        report.checked += 1;
        if solve_qp(x, plant, clf, barriers, cfg).is_err() {
            report.infeasible.push(x.iter().copied().collect());
        }
    }
    report
}

/// Uniform grid over an axis-aligned box, `per_axis` points per axis.
pub fn box_grid(lo: &[f64], hi: &[f64], per_axis: usize) -> Vec<Vector> {
    let n = lo.len();
    let total = per_axis.pow(n as u32);
    (0..total)
        .map(|mut k| {
            Vector::from_fn(n, |d, _| {
                let i = k % per_axis;
                k /= per_axis;
                if per_axis == 1 {
                    0.5 * (lo[d] + hi[d])
                } else {
                    lo[d] + (hi[d] - lo[d]) * i as f64 / (per_axis - 1) as f64
                }
            })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::plant::InputMap;

    fn v2(a: f64, b: f64) -> Vector {
        Vector::from_vec(vec![a, b])
    }

    fn radial() -> (Plant, TransformedClf, Vec<QuadraticFn>) {
        let plant = Plant::driftless(InputMap::Constant(Matrix::identity(2, 2))).unwrap();
        let clf = TransformedClf::new(
            QuadraticFn::new(Matrix::identity(2, 2), v2(0.0, 0.0)).unwrap(),
            ClassK::Linear(1.0),
        );
        let bar = QuadraticFn::new(Matrix::identity(2, 2), v2(3.0, 0.0)).unwrap();
        (plant, clf, vec![bar])
    }

    #[test]
    fn combinations_are_lexicographic() {
        let all: Vec<Vec<usize>> = Combinations::new(4, 2).collect();
        assert_eq!(all, vec![vec![0, 1], vec![0, 2], vec![0, 3], vec![1, 2], vec![1, 3], vec![2, 3]]);
        assert_eq!(Combinations::new(3, 0).count(), 1);
        assert_eq!(Combinations::new(2, 3).count(), 0);
    }

    #[test]
    fn zero_at_clf_minimum() {
        let (plant, clf, bars) = radial();
        let out = solve_qp(&v2(0.0, 0.0), &plant, &clf, &bars, &ControllerConfig::default()).unwrap();
        assert_eq!(out.u.norm(), 0.0);
        assert_eq!(out.delta, 0.0);
        assert!(out.lambdas.iter().all(|&l| l == 0.0));
        assert_eq!(active_region(&out, 1e-7), Region::Interior);
    }

    #[test]
    fn single_clf_constraint_closed_form() {
        // Driftless g = I, CBF slack: λ₀ = γ(V)/(‖∇V‖² + 1/p), u = −λ₀∇V.
        let (plant, clf, bars) = radial();
        let cfg = ControllerConfig { p: 2.0, ..Default::default() };
        let x = v2(-1.0, 2.0);
        let out = solve_qp(&x, &plant, &clf, &bars, &cfg).unwrap();
        let (v, gv) = clf.recover(&x);
        let l0 = v / (gv.norm_squared() + 1.0 / cfg.p);
        assert!((out.lambdas[0] - l0).abs() < 1e-12);
        assert!((out.u.clone() + gv * l0).norm() < 1e-12);
        assert!((out.delta - l0 / cfg.p).abs() < 1e-12);
    }

    #[test]
    fn antipodal_point_is_equilibrium() {
        let (plant, clf, bars) = radial();
        let f = closed_loop_field(&v2(4.0, 0.0), &plant, &clf, &bars, &ControllerConfig::default()).unwrap();
        assert!(f.norm() < 1e-8);
    }

    #[test]
    fn infeasible_reports_violations() {
        // Two contradictory one-dimensional barrier constraints.
        let a = Matrix::from_row_slice(3, 2, &[0.0, -1.0, 1.0, 0.0, -1.0, 0.0]);
        let b = Vector::from_vec(vec![0.0, -1.0, -1.0]);
        let err = solve_constraints(&a, &b, 1.0).unwrap_err();
        assert!(!err.is_empty());
    }
}
