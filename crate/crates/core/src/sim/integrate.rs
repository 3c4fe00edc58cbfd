use serde::Serialize;

use super::scenario::SimConfig;
use crate::compat::{clf_with_shape, hessian_from_shape, shape_from_hessian, shape_qp_step, AdaptiveConfig, RegionFilter, ShapeTargets};
use crate::plant::{barrier_eval, Plant, QuadraticFn, TransformedClf};
use crate::qp::{active_region, closed_loop_with_outcome, region_tolerance, ControllerConfig, QpOutcome, Region};
use crate::{Error, Result, Vector};

/// One classical Runge–Kutta step.
pub fn rk4_step<F>(mut f: F, x: &Vector, k1: Vector, dt: f64) -> Result<Vector>
where
    F: FnMut(&Vector) -> Result<Vector>,
{
    let k2 = f(&(x + &k1 * (0.5 * dt)))?;
    let k3 = f(&(x + &k2 * (0.5 * dt)))?;
    let k4 = f(&(x + &k3 * dt))?;
    Ok(x + (k1 + k2 * 2.0 + k3 * 2.0 + k4) * (dt / 6.0))
}

/// Fixed-step RK4 of `ẋ = f(x)` over `[0, t_end]`; returns times and states.
pub fn integrate<F>(mut f: F, x0: &Vector, t_end: f64, dt: f64) -> Result<(Vec<f64>, Vec<Vector>)>
where
    F: FnMut(&Vector) -> Result<Vector>,
{
    if !(dt > 0.0 && t_end >= dt) {
        return Err(Error::InvalidInput("integration needs dt > 0 and t_end ≥ dt".into()));
    }
    let steps = (t_end / dt).round() as usize;
    let mut times = vec![0.0];
    let mut states = vec![x0.clone()];
    for k in 0..steps {
        let x = &states[k];
        let k1 = f(x)?;
        let next = rk4_step(&mut f, x, k1, dt)?;
        times.push((k + 1) as f64 * dt);
        states.push(next);
    }
    Ok((times, states))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Termination {
    /// Reached the CLF minimum (and, when adaptive, the reference shape).
    Converged,
    /// Came to rest away from the minimum.
    ConvergedOther { x_e: Vec<f64> },
    HorizonReached,
    Infeasible { message: String },
    ShapeDegenerate { min_eig: f64 },
}

/// Time series of one closed-loop run; row `k` holds the state at `t_k` and
/// the QP solution there.
#[derive(Debug, Clone, Default)]
pub struct Trajectory {
    pub times: Vec<f64>,
    pub states: Vec<Vector>,
    pub controls: Vec<Vector>,
    pub deltas: Vec<f64>,
    pub multipliers: Vec<Vector>,
    pub regions: Vec<Region>,
    pub h_values: Vec<Vec<f64>>,
    pub vbar: Vec<f64>,
    /// Shape parameters per row, empty for static runs.
    pub shapes: Vec<Vector>,
    /// Selected shape target per row, `None` for the reference.
    pub targets: Vec<Option<usize>>,
    pub termination: Option<Termination>,
}

impl Trajectory {
    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn min_h(&self) -> f64 {
        self.h_values.iter().flatten().copied().fold(f64::INFINITY, f64::min)
    }

    fn record(&mut self, t: f64, x: &Vector, out: &QpOutcome, region: Region, barriers: &[QuadraticFn], vbar: f64) {
        self.times.push(t);
        self.states.push(x.clone());
        self.controls.push(out.u.clone());
        self.deltas.push(out.delta);
        self.multipliers.push(out.lambdas.clone());
        self.regions.push(region);
        self.h_values.push(barriers.iter().map(|b| barrier_eval(b, x).0).collect());
        self.vbar.push(vbar);
    }
}

/// Everything the closed loop needs.
pub struct LoopData<'a> {
    pub plant: &'a Plant,
    pub clf: &'a TransformedClf,
    pub barriers: &'a [QuadraticFn],
    pub cfg: &'a ControllerConfig,
    pub sim: &'a SimConfig,
}

fn failure(e: Error) -> Termination {
    match e {
        Error::ShapeDegenerate { min_eig } => Termination::ShapeDegenerate { min_eig },
        other => Termination::Infeasible { message: other.to_string() },
    }
}

/// Closed loop with the fixed CLF.
pub fn simulate_static(data: &LoopData, x0: &Vector) -> Trajectory {
    let LoopData { plant, clf, barriers, cfg, sim } = *data;
    let steps = (sim.t_end / sim.dt).round() as usize;
    let mut traj = Trajectory::default();
    let mut x = x0.clone();
    let field = |y: &Vector| closed_loop_with_outcome(y, plant, clf, barriers, cfg).map(|r| r.0);
    for k in 0..=steps {
        let (dx, out) = match closed_loop_with_outcome(&x, plant, clf, barriers, cfg) {
            Ok(r) => r,
            Err(e) => {
                traj.termination = Some(failure(e));
                return traj;
            }
        };
        let region = active_region(&out, region_tolerance(clf, &x, cfg));
        traj.record(k as f64 * sim.dt, &x, &out, region, barriers, clf.vbar(&x));
        if let Some(t) = settle(&x, &dx, clf, sim, k == steps) {
            traj.termination = Some(t);
            return traj;
        }
        match rk4_step(field, &x, dx, sim.dt) {
            Ok(next) => x = next,
            Err(e) => {
                traj.termination = Some(failure(e));
                return traj;
            }
        }
    }
    unreachable!("the final step always settles")
}

/// Convergence, stall and horizon tests on the current row.
fn settle(x: &Vector, dx: &Vector, clf: &TransformedClf, sim: &SimConfig, last: bool) -> Option<Termination> {
    let at_min = (x - clf.center()).norm() <= sim.conv_tol;
    if at_min {
        return Some(Termination::Converged);
    }
    let speed = dx.norm();
    if speed <= sim.stall_speed {
        return Some(Termination::ConvergedOther { x_e: x.iter().copied().collect() });
    }
    last.then_some(Termination::HorizonReached)
}

/// Coupled state/shape closed loop. The shape target is chosen once per
/// step through the hysteresis filter and frozen for the RK4 stages.
pub fn simulate_adaptive(
    data: &LoopData,
    targets: &ShapeTargets,
    acfg: &AdaptiveConfig,
    x0: &Vector,
) -> Trajectory {
    let LoopData { plant, clf, barriers, cfg, sim } = *data;
    let steps = (sim.t_end / sim.dt).round() as usize;
    let n = x0.len();
    let mut traj = Trajectory::default();
    let mut filter = RegionFilter::new(acfg.hysteresis);
    let mut pi = match shape_from_hessian(&targets.reference) {
        Ok(p) => p,
        Err(e) => {
            traj.termination = Some(failure(e));
            return traj;
        }
    };
    let mut x = x0.clone();

    for k in 0..=steps {
        let stage1 = || -> Result<(Vector, QpOutcome, Region, TransformedClf)> {
            let current = clf_with_shape(clf, &pi, acfg.pd_floor)?;
            let (dx, out) = closed_loop_with_outcome(&x, plant, &current, barriers, cfg)?;
            let region = active_region(&out, region_tolerance(&current, &x, cfg));
            Ok((dx, out, region, current))
        };
        let (dx, out, region, current) = match stage1() {
            Ok(r) => r,
            Err(e) => {
                traj.termination = Some(failure(e));
                return traj;
            }
        };
        let selected = filter.update(ShapeTargets::selector(&region));
        let target = targets.target(selected);
        traj.record(k as f64 * sim.dt, &x, &out, region, barriers, current.vbar(&x));
        traj.shapes.push(pi.clone());
        traj.targets.push(selected);

        let dpi = match shape_qp_step(&pi, target, acfg.p_pi, acfg.gamma_pi) {
            Ok((u, _)) => u,
            Err(e) => {
                traj.termination = Some(failure(e));
                return traj;
            }
        };
        let shape_err = hessian_from_shape(&pi).map_or(f64::INFINITY, |h| (h - &targets.reference).norm());
        let at_min = (&x - clf.center()).norm() <= sim.conv_tol;
        let last = k == steps;
        if at_min && (shape_err <= sim.conv_tol || last) {
            traj.termination = Some(Termination::Converged);
            return traj;
        }
        if !at_min {
            let speed = dx.norm();
            let still = dpi.norm() <= sim.stall_speed;
            if speed <= sim.stall_speed && still {
                traj.termination = Some(Termination::ConvergedOther { x_e: x.iter().copied().collect() });
                return traj;
            }
        }
        if last {
            traj.termination = Some(Termination::HorizonReached);
            return traj;
        }

        // Joint state (x, π) for the remaining stages.
        let field = |y: &Vector| -> Result<Vector> {
            let (xs, ps) = (y.rows(0, n).into_owned(), y.rows(n, y.len() - n).into_owned());
            let current = clf_with_shape(clf, &ps, acfg.pd_floor)?;
            let (dx, _) = closed_loop_with_outcome(&xs, plant, &current, barriers, cfg)?;
            let (dp, _) = shape_qp_step(&ps, target, acfg.p_pi, acfg.gamma_pi)?;
            Ok(join(&dx, &dp))
        };
        match rk4_step(field, &join(&x, &pi), join(&dx, &dpi), sim.dt) {
            Ok(next) => {
                x = next.rows(0, n).into_owned();
                pi = next.rows(n, next.len() - n).into_owned();
            }
            Err(e) => {
                traj.termination = Some(failure(e));
                return traj;
            }
        }
    }
    unreachable!("the final step always settles")
}

fn join(a: &Vector, b: &Vector) -> Vector {
    Vector::from_iterator(a.len() + b.len(), a.iter().chain(b.iter()).copied())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::plant::{ClassK, InputMap};
    use crate::Matrix;

    #[test]
    fn scalar_decay() {
        let (t, xs) = integrate(|x| Ok(-x), &Vector::from_element(1, 1.0), 1.0, 1e-3).unwrap();
        assert_eq!(t.len(), 1001);
        assert!((xs[1000][0] - (-1.0f64).exp()).abs() < 1e-8);
    }

    #[test]
    fn zero_field_is_constant() {
        let x0 = Vector::from_vec(vec![1.0, -2.0]);
        let (_, xs) = integrate(|x| Ok(x * 0.0), &x0, 0.5, 0.1).unwrap();
        assert!(xs.iter().all(|x| x == &x0));
    }

    #[test]
    fn static_run_converges_without_obstacles() {
        let plant = Plant::driftless(InputMap::Constant(Matrix::identity(2, 2))).unwrap();
        let clf = TransformedClf::new(
            QuadraticFn::new(Matrix::identity(2, 2), Vector::zeros(2)).unwrap(),
            ClassK::Linear(1.0),
        );
        let cfg = ControllerConfig::default();
        let sim = SimConfig { t_end: 20.0, dt: 1e-2, conv_tol: 1e-3, stall_speed: 1e-6 };
        let data = LoopData { plant: &plant, clf: &clf, barriers: &[], cfg: &cfg, sim: &sim };
        let traj = simulate_static(&data, &Vector::from_vec(vec![2.0, 1.0]));
        assert_eq!(traj.termination, Some(Termination::Converged));
        assert!(traj.times.windows(2).all(|w| ((w[1] - w[0]) - 1e-2).abs() < 1e-12));
    }
}
