use serde::{Deserialize, Serialize};

use super::shape::{hessian_from_shape, shape_qp_step};
use crate::linalg::min_sym_eigenvalue;
use crate::plant::{Plant, QuadraticFn, TransformedClf};
use crate::qp::{active_region, closed_loop_with_outcome, region_tolerance, ControllerConfig, QpOutcome, Region};
use crate::{Error, Matrix, Result, Vector};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct AdaptiveConfig {
    pub p_pi: f64,
    pub gamma_pi: f64,
    /// Consecutive steps a region must persist before the target changes.
    pub hysteresis: usize,
    /// Minimum eigenvalue allowed for `H(π)`.
    pub pd_floor: f64,
}

impl Default for AdaptiveConfig {
    fn default() -> Self {
        Self { p_pi: 1.0, gamma_pi: 5.0, hysteresis: 3, pd_floor: 1e-6 }
    }
}

impl AdaptiveConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.p_pi > 0.0 && self.gamma_pi > 0.0 && self.pd_floor > 0.0) {
            return Err(Error::InvalidInput("adaptation gains and floor must be positive".into()));
        }
        Ok(())
    }
}

/// Reference Hessian plus one target per barrier.
#[derive(Debug, Clone, PartialEq)]
pub struct ShapeTargets {
    pub reference: Matrix,
    pub per_barrier: Vec<Matrix>,
}

impl ShapeTargets {
    /// Barrier whose target a region selects; `None` selects the reference.
    pub fn selector(region: &Region) -> Option<usize> {
        match region {
            Region::Single(i) => Some(*i),
            _ => None,
        }
    }

    pub fn target(&self, sel: Option<usize>) -> &Matrix {
        sel.and_then(|i| self.per_barrier.get(i)).unwrap_or(&self.reference)
    }
}

/// Debounces target switching between integration steps.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RegionFilter {
    hold: usize,
    current: Option<usize>,
    pending: Option<usize>,
    count: usize,
}

impl RegionFilter {
    pub fn new(hold: usize) -> Self {
        Self { hold: hold.max(1), current: None, pending: None, count: 0 }
    }

    pub fn current(&self) -> Option<usize> {
        self.current
    }

    /// Feed the raw selector of one step and return the filtered one.
    pub fn update(&mut self, raw: Option<usize>) -> Option<usize> {
        if raw == self.current {
            self.count = 0;
        } else if raw == self.pending && self.count > 0 {
            self.count += 1;
        } else {
            self.pending = raw;
            self.count = 1;
        }
        if self.count >= self.hold {
            self.current = raw;
            self.count = 0;
        }
        self.current
    }
}

/// Transformed CLF with the Hessian `H(π)`, checked against the curvature floor.
pub fn clf_with_shape(base: &TransformedClf, pi: &Vector, pd_floor: f64) -> Result<TransformedClf> {
    let h = hessian_from_shape(pi)?;
    let min_eig = min_sym_eigenvalue(&h);
    if min_eig < pd_floor {
        return Err(Error::ShapeDegenerate { min_eig });
    }
    Ok(TransformedClf { quad: QuadraticFn::new(h, base.center().clone())?, ..base.clone() })
}

#[derive(Debug, Clone)]
pub struct AdaptiveStep {
    pub dx: Vector,
    pub dpi: Vector,
    pub outcome: QpOutcome,
    pub region: Region,
    pub shape_delta: f64,
}

/// Coupled field `(ẋ, π̇)` with the shape target chosen by `selected`.
pub fn adaptive_closed_loop(
    x: &Vector,
    pi: &Vector,
    plant: &Plant,
    clf: &TransformedClf,
    barriers: &[QuadraticFn],
    cfg: &ControllerConfig,
    targets: &ShapeTargets,
    selected: Option<usize>,
    acfg: &AdaptiveConfig,
) -> Result<AdaptiveStep> {
    let current = clf_with_shape(clf, pi, acfg.pd_floor)?;
    let (dx, outcome) = closed_loop_with_outcome(x, plant, &current, barriers, cfg)?;
    let region = active_region(&outcome, region_tolerance(&current, x, cfg));
    let (dpi, shape_delta) = shape_qp_step(pi, targets.target(selected), acfg.p_pi, acfg.gamma_pi)?;
    Ok(AdaptiveStep { dx, dpi, outcome, region, shape_delta })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::compat::shape_from_hessian;
    use crate::plant::ClassK;
    use crate::qp::closed_loop_field;

    #[test]
    fn filter_needs_three_steps_each_way() {
        let mut f = RegionFilter::new(3);
        assert_eq!(f.update(Some(2)), None);
        assert_eq!(f.update(Some(2)), None);
        assert_eq!(f.update(Some(2)), Some(2));
        assert_eq!(f.update(None), Some(2));
        assert_eq!(f.update(Some(2)), Some(2));
        assert_eq!(f.update(None), Some(2));
        assert_eq!(f.update(None), Some(2));
        assert_eq!(f.update(None), None);
    }

    #[test]
    fn filter_restarts_on_interruption() {
        let mut f = RegionFilter::new(3);
        f.update(Some(0));
        f.update(Some(0));
        f.update(Some(1));
        assert_eq!(f.update(Some(1)), None);
        assert_eq!(f.update(Some(1)), Some(1));
    }

    #[test]
    fn at_reference_matches_static_loop() {
        let a = Matrix::identity(2, 2) * -2.0;
        let plant = Plant::lti(a, Matrix::identity(2, 2), Vector::zeros(2)).unwrap();
        let h = Matrix::from_diagonal(&Vector::from_vec(vec![5.0, 8.0]));
        let clf = TransformedClf::new(QuadraticFn::new(h.clone(), Vector::zeros(2)).unwrap(), ClassK::Linear(1.0));
        let bars = [QuadraticFn::new(Matrix::identity(2, 2), Vector::from_vec(vec![4.0, 0.0])).unwrap()];
        let cfg = ControllerConfig::default();
        let targets = ShapeTargets { reference: h.clone(), per_barrier: vec![h.clone()] };
        let pi = shape_from_hessian(&h).unwrap();
        let x = Vector::from_vec(vec![1.0, 2.0]);
        let step =
            adaptive_closed_loop(&x, &pi, &plant, &clf, &bars, &cfg, &targets, None, &AdaptiveConfig::default())
                .unwrap();
        assert!(step.dpi.amax() < 1e-12);
        let dx = closed_loop_field(&x, &plant, &clf, &bars, &cfg).unwrap();
        assert!((step.dx - dx).amax() < 1e-12);
    }

    #[test]
    fn floor_violation_is_reported() {
        let clf = TransformedClf::new(
            QuadraticFn::new(Matrix::identity(2, 2), Vector::zeros(2)).unwrap(),
            ClassK::Linear(1.0),
        );
        let pi = Vector::from_vec(vec![1.0, 0.0, 1e-4]);
        assert!(matches!(clf_with_shape(&clf, &pi, 1e-6), Err(Error::ShapeDegenerate { .. })));
    }
}
