//! Plant dynamics, quadratic CLF/CBF objects, the transformed CLF and the
//! standing-assumption checks.

use nalgebra::Cholesky;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::linalg::{max_sym_eigenvalue, min_sym_eigenvalue, rank};
use crate::{Error, Matrix, Result, Vector};

/// Input map of a driftless plant.
#[derive(Debug, Clone, PartialEq)]
pub enum InputMap {
    Constant(Matrix),
    /// `g(x) = (1 + gain·‖x‖²)·base`; full rank wherever `base` is.
    Scaled { base: Matrix, gain: f64 },
}

#[derive(Debug, Clone, PartialEq)]
pub enum Plant {
    /// `ẋ = A(x − origin) + B u`
    Lti { a: Matrix, b: Matrix, origin: Vector },
    /// `ẋ = g(x) u` with `rank g(x) = n`.
    Driftless { g: InputMap },
}

impl Plant {
    pub fn lti(a: Matrix, b: Matrix, origin: Vector) -> Result<Self> {
        let n = a.nrows();
        if !a.is_square() || b.nrows() != n || origin.len() != n || b.ncols() == 0 {
            return Err(Error::InvalidInput("LTI plant dimensions disagree".into()));
        }
        Ok(Plant::Lti { a, b, origin })
    }

    pub fn driftless(g: InputMap) -> Result<Self> {
        let base = match &g {
            InputMap::Constant(b) | InputMap::Scaled { base: b, .. } => b,
        };
        if base.ncols() < base.nrows() || rank(base, 1e-10) < base.nrows() {
            return Err(Error::InvalidInput("driftless input map must have full row rank".into()));
        }
        if let InputMap::Scaled { gain, .. } = g {
            if gain < 0.0 {
                return Err(Error::InvalidInput("input-map gain must be nonnegative".into()));
            }
        }
        Ok(Plant::Driftless { g })
    }

    pub fn dim(&self) -> usize {
        match self {
            Plant::Lti { a, .. } => a.nrows(),
            Plant::Driftless { g: InputMap::Constant(b) | InputMap::Scaled { base: b, .. } } => b.nrows(),
        }
    }

    pub fn input_dim(&self) -> usize {
        match self {
            Plant::Lti { b, .. } => b.ncols(),
            Plant::Driftless { g: InputMap::Constant(b) | InputMap::Scaled { base: b, .. } } => b.ncols(),
        }
    }

    pub fn is_driftless(&self) -> bool {
        matches!(self, Plant::Driftless { .. })
    }

    pub fn drift(&self, x: &Vector) -> Vector {
        match self {
            Plant::Lti { a, origin, .. } => a * (x - origin),
            Plant::Driftless { .. } => Vector::zeros(x.len()),
        }
    }

    pub fn drift_jacobian(&self, x: &Vector) -> Matrix {
        match self {
            Plant::Lti { a, .. } => a.clone(),
            Plant::Driftless { .. } => Matrix::zeros(x.len(), x.len()),
        }
    }

    pub fn g(&self, x: &Vector) -> Matrix {
        match self {
            Plant::Lti { b, .. } => b.clone(),
            Plant::Driftless { g: InputMap::Constant(b) } => b.clone(),
            Plant::Driftless { g: InputMap::Scaled { base, gain } } => base * (1.0 + gain * x.norm_squared()),
        }
    }

    /// `G(x) = g(x) g(x)ᵀ`
    pub fn gram(&self, x: &Vector) -> Matrix {
        let g = self.g(x);
        &g * g.transpose()
    }

    /// Jacobian of `x ↦ G(x) v(x)` given `v(x)` and its Jacobian `dv`.
    pub fn gram_product_jacobian(&self, x: &Vector, v: &Vector, dv: &Matrix) -> Matrix {
        let mut jac = self.gram(x) * dv;
        if let Plant::Driftless { g: InputMap::Scaled { base, gain } } = self {
            // G = s² BBᵀ, s = 1 + gain‖x‖², ∂(s²)/∂x = 4 s gain x
            let s = 1.0 + gain * x.norm_squared();
            let bbt_v = base * (base.transpose() * v);
            jac += &bbt_v * (x.transpose() * (4.0 * s * gain));
        }
        jac
    }
}

/// `½ (x − c)ᵀ H (x − c)`
#[derive(Debug, Clone, PartialEq)]
pub struct QuadraticFn {
    pub h: Matrix,
    pub center: Vector,
}

impl QuadraticFn {
    pub fn new(h: Matrix, center: Vector) -> Result<Self> {
        if !h.is_square() || h.nrows() != center.len() {
            return Err(Error::InvalidInput("quadratic Hessian/center dimensions disagree".into()));
        }
        if (&h - h.transpose()).amax() > 1e-12 * (1.0 + h.amax()) {
            return Err(Error::InvalidInput("quadratic Hessian must be symmetric".into()));
        }
        let h = (&h + h.transpose()) * 0.5;
        Ok(Self { h, center })
    }

    pub fn dim(&self) -> usize {
        self.center.len()
    }

    pub fn delta(&self, x: &Vector) -> Vector {
        x - &self.center
    }

    /// `ΔᵀHΔ`
    pub fn form(&self, x: &Vector) -> f64 {
        let d = self.delta(x);
        d.dot(&(&self.h * &d))
    }

    pub fn value(&self, x: &Vector) -> f64 {
        0.5 * self.form(x)
    }

    pub fn grad(&self, x: &Vector) -> Vector {
        &self.h * self.delta(x)
    }
}

/// Class-K function; only the linear shape is implemented.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ClassK {
    Linear(f64),
}

impl Default for ClassK {
    fn default() -> Self {
        ClassK::Linear(1.0)
    }
}

impl ClassK {
    pub fn eval(&self, s: f64) -> f64 {
        match *self {
            ClassK::Linear(c) => c * s,
        }
    }

    pub fn derivative(&self, _s: f64) -> f64 {
        match *self {
            ClassK::Linear(c) => c,
        }
    }

    pub fn gain(&self) -> f64 {
        match *self {
            ClassK::Linear(c) => c,
        }
    }

    /// `∫₀^V γ(s) ds`
    pub fn integral(&self, v: f64) -> f64 {
        match *self {
            ClassK::Linear(c) => 0.5 * c * v * v,
        }
    }

    /// Inverse of [`Self::integral`] on `[0, ∞)`.
    pub fn integral_inverse(&self, vbar: f64) -> f64 {
        match *self {
            ClassK::Linear(c) => (2.0 * vbar.max(0.0) / c).sqrt(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        match *self {
            ClassK::Linear(c) if c > 0.0 && c.is_finite() => Ok(()),
            _ => Err(Error::InvalidInput("class-K gain must be positive".into())),
        }
    }
}

/// Which function the configured quadratic represents.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ClfForm {
    /// The quadratic is the transformed CLF `V̄`; `V` is recovered from it.
    #[default]
    Transformed,
    /// The quadratic is `V` itself; `V̄ = ∫γ` is then quartic.
    Original,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TransformedClf {
    pub quad: QuadraticFn,
    pub gamma: ClassK,
    pub form: ClfForm,
}

impl TransformedClf {
    pub fn new(quad: QuadraticFn, gamma: ClassK) -> Self {
        Self { quad, gamma, form: ClfForm::Transformed }
    }

    pub fn with_form(mut self, form: ClfForm) -> Self {
        self.form = form;
        self
    }

    pub fn center(&self) -> &Vector {
        &self.quad.center
    }

    pub fn dim(&self) -> usize {
        self.quad.dim()
    }

    /// Constant Hessian of the quadratic object (`H_V̄` in transformed form).
    pub fn hessian(&self) -> &Matrix {
        &self.quad.h
    }

    pub fn vbar(&self, x: &Vector) -> f64 {
        match self.form {
            ClfForm::Transformed => self.quad.value(x),
            ClfForm::Original => self.gamma.integral(self.quad.value(x)),
        }
    }

    pub fn grad_vbar(&self, x: &Vector) -> Vector {
        match self.form {
            ClfForm::Transformed => self.quad.grad(x),
            ClfForm::Original => self.quad.grad(x) * self.gamma.eval(self.quad.value(x)),
        }
    }

    pub fn hess_vbar(&self, x: &Vector) -> Matrix {
        match self.form {
            ClfForm::Transformed => self.quad.h.clone(),
            ClfForm::Original => {
                let v = self.quad.value(x);
                let gv = self.quad.grad(x);
                &self.quad.h * self.gamma.eval(v) + &gv * gv.transpose() * self.gamma.derivative(v)
            }
        }
    }

    /// `V(x)` and `∇V(x)`, both zero at the minimum.
    pub fn recover(&self, x: &Vector) -> (f64, Vector) {
        match self.form {
            ClfForm::Original => (self.quad.value(x), self.quad.grad(x)),
            ClfForm::Transformed => {
                let vbar = self.quad.value(x);
                let v = self.gamma.integral_inverse(vbar);
                let gv = self.gamma.eval(v);
                if gv <= 0.0 {
                    return (0.0, Vector::zeros(x.len()));
                }
                (v, self.quad.grad(x) / gv)
            }
        }
    }

    /// Hessian of the recovered `V`, from `H_V̄ = γ(V)H_V + γ′(V)∇V∇Vᵀ`.
    /// Undefined at the minimum, where a zero matrix is returned.
    pub fn hess_v(&self, x: &Vector) -> Matrix {
        match self.form {
            ClfForm::Original => self.quad.h.clone(),
            ClfForm::Transformed => {
                let (v, gv) = self.recover(x);
                let g = self.gamma.eval(v);
                if g <= 0.0 {
                    return Matrix::zeros(x.len(), x.len());
                }
                (&self.quad.h - &gv * gv.transpose() * self.gamma.derivative(v)) / g
            }
        }
    }
}

/// Recovered `V` and `∇V` of a transformed CLF.
pub fn clf_recover(t: &TransformedClf, x: &Vector) -> (f64, Vector) {
    t.recover(x)
}

/// Barrier `h = ½(ΔᵀHΔ − 1)` and `∇h = HΔ`.
pub fn barrier_eval(b: &QuadraticFn, x: &Vector) -> (f64, Vector) {
    (0.5 * (b.form(x) - 1.0), b.grad(x))
}

/// The CLF minimum lies in the safe set of every barrier.
pub fn check_assumption1(clf_center: &Vector, barriers: &[QuadraticFn]) -> bool {
    barriers.iter().all(|b| barrier_eval(b, clf_center).0 >= 0.0)
}

const DISJOINT_MARGIN: f64 = 1e-6;

/// Pairwise disjointness of the unsafe ellipsoids `{ΔᵀHΔ ≤ 1}`, certified by
/// sampling the boundary of each ellipsoid against every other barrier.
pub fn check_assumption2(barriers: &[QuadraticFn]) -> Result<bool> {
    let factors = barriers
        .iter()
        .map(|b| {
            Cholesky::new(b.h.clone())
                .map(|c| c.l())
                .ok_or_else(|| Error::UnsupportedGeometry("barrier Hessian is not positive definite".into()))
        })
        .collect::<Result<Vec<_>>>()?;
    for (i, bi) in barriers.iter().enumerate() {
        for (j, bj) in barriers.iter().enumerate() {
            if i != j && min_on_boundary(bi, &factors[i], bj) <= DISJOINT_MARGIN {
                return Ok(false);
            }
        }
    }
    Ok(true)
}

/// Minimum of `h_j` over `∂E_i = {c_i + L⁻ᵀu : ‖u‖ = 1}`.
fn min_on_boundary(bi: &QuadraticFn, li: &Matrix, bj: &QuadraticFn) -> f64 {
    let n = bi.dim();
    let lt_inv = li.transpose().try_inverse().expect("Cholesky factor is invertible");
    let point = |u: &Vector| &bi.center + &lt_inv * u;
    if n == 2 {
        return (0..720)
            .map(|k| {
                let th = 2.0 * std::f64::consts::PI * k as f64 / 720.0;
                barrier_eval(bj, &point(&Vector::from_vec(vec![th.cos(), th.sin()]))).0
            })
            .fold(f64::INFINITY, f64::min);
    }

    // Projected gradient on the unit sphere from axis and random starts.
    let mut rng = ChaCha8Rng::seed_from_u64(0x5eed);
    let mut starts: Vec<Vector> = Vec::new();
    for k in 0..n {
        for s in [1.0, -1.0] {
            let mut e = Vector::zeros(n);
            e[k] = s;
            starts.push(e);
        }
    }
    for _ in 0..8 * n {
        let u = Vector::from_fn(n, |_, _| rng.gen_range(-1.0..1.0));
        if u.norm() > 1e-3 {
            starts.push(u.normalize());
        }
    }
    let a = lt_inv.transpose() * &bj.h * &lt_inv;
    let step = 0.5 / (max_sym_eigenvalue(&a).abs() + 1e-12);
    let mut best = f64::INFINITY;
    for mut u in starts {
        for _ in 0..500 {
            let (_, gh) = barrier_eval(bj, &point(&u));
            let gu = lt_inv.transpose() * gh;
            let tangent = &gu - &u * u.dot(&gu);
            if tangent.norm() < 1e-12 {
                break;
            }
            u = (&u - tangent * step).normalize();
        }
        best = best.min(barrier_eval(bj, &point(&u)).0);
    }
    best
}

/// The CLF condition: `H A + Aᵀ H ⪯ 0` for LTI plants, vacuous for driftless.
pub fn check_assumption3(plant: &Plant, t: &TransformedClf) -> bool {
    match plant {
        Plant::Lti { a, .. } => {
            let h = t.hessian();
            let lmi = h * a + a.transpose() * h;
            max_sym_eigenvalue(&lmi) <= 1e-9 * (1.0 + h.norm() * a.norm())
        }
        Plant::Driftless { .. } => true,
    }
}

/// Positive definiteness with a relative floor.
pub fn is_positive_definite(h: &Matrix, floor: f64) -> bool {
    h.is_square() && min_sym_eigenvalue(h) > floor * (1.0 + h.amax())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn v2(a: f64, b: f64) -> Vector {
        Vector::from_vec(vec![a, b])
    }

    fn circle(c: Vector, r: f64) -> QuadraticFn {
        QuadraticFn::new(Matrix::identity(2, 2) / (r * r), c).unwrap()
    }

    #[test]
    fn recovery_at_minimum_and_half_level() {
        let clf = TransformedClf::new(circle(v2(0.0, 0.0), 1.0), ClassK::Linear(1.0));
        let (v, g) = clf.recover(&v2(0.0, 0.0));
        assert_eq!(v, 0.0);
        assert_eq!(g.norm(), 0.0);
        let (v, _) = clf.recover(&v2(1.0, 0.0));
        assert!((v - 1.0).abs() < 1e-15);
    }

    #[test]
    fn barrier_values() {
        let h = Matrix::from_row_slice(2, 2, &[3.9, -0.61, -0.61, 0.56]);
        let b = QuadraticFn::new(h, v2(6.0, 0.0)).unwrap();
        assert_eq!(barrier_eval(&b, &v2(6.0, 0.0)).0, -0.5);
        let on = v2(6.0 + 1.0 / 3.9_f64.sqrt(), 0.0);
        assert!(barrier_eval(&b, &on).0.abs() < 1e-14);
        assert!(check_assumption1(&v2(0.0, 0.0), std::slice::from_ref(&b)));
        assert!(!check_assumption1(&v2(6.0, 0.0), &[b]));
    }

    #[test]
    fn disjointness() {
        let a = circle(v2(0.0, 0.0), 1.0);
        assert!(check_assumption2(&[a.clone(), circle(v2(3.0, 0.0), 1.0)]).unwrap());
        assert!(!check_assumption2(&[a.clone(), a.clone()]).unwrap());
        assert!(!check_assumption2(&[a.clone(), circle(v2(1.9, 0.0), 1.0)]).unwrap());
        let flat = QuadraticFn::new(Matrix::from_diagonal(&v2(1.0, 0.0)), v2(5.0, 0.0)).unwrap();
        assert!(matches!(check_assumption2(&[a, flat]), Err(Error::UnsupportedGeometry(_))));
    }

    #[test]
    fn disjointness_three_d() {
        let ball = |c: [f64; 3]| QuadraticFn::new(Matrix::identity(3, 3), Vector::from_row_slice(&c)).unwrap();
        assert!(check_assumption2(&[ball([0.0, 0.0, 0.0]), ball([0.0, 2.5, 0.0])]).unwrap());
        assert!(!check_assumption2(&[ball([0.0, 0.0, 0.0]), ball([1.0, 1.0, 0.5])]).unwrap());
    }

    #[test]
    fn clf_condition() {
        let clf = TransformedClf::new(circle(v2(0.0, 0.0), 1.0), ClassK::Linear(1.0));
        let b = Matrix::identity(2, 2);
        let stable = Plant::lti(Matrix::identity(2, 2) * -2.0, b.clone(), v2(0.0, 0.0)).unwrap();
        assert!(check_assumption3(&stable, &clf));
        let chain = Plant::lti(Matrix::from_row_slice(2, 2, &[0.0, 1.0, 0.0, 0.0]), b, v2(0.0, 0.0)).unwrap();
        assert!(!check_assumption3(&chain, &clf));
    }

    #[test]
    fn scaled_gram_jacobian_matches_differences() {
        let base = Matrix::from_row_slice(2, 3, &[1.0, 0.2, 0.0, 0.0, 1.0, 0.5]);
        let plant = Plant::driftless(InputMap::Scaled { base, gain: 0.3 }).unwrap();
        let hv = Matrix::from_row_slice(2, 2, &[2.0, 0.4, 0.4, 1.0]);
        let field = |x: &Vector| plant.gram(x) * (&hv * x);
        let x = v2(0.7, -1.1);
        let analytic = plant.gram_product_jacobian(&x, &(&hv * &x), &hv);
        let fd = crate::linalg::fd_jacobian(field, &x, 1e-6);
        assert!((analytic - fd).amax() < 1e-6);
    }
}
