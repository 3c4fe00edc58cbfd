use log::{info, warn};
use rayon::prelude::*;
use serde::Serialize;

use super::integrate::{simulate_adaptive, simulate_static, LoopData, Termination, Trajectory};
use super::scenario::Scenario;
use crate::compat::{compatibilize, hessian_from_shape, CompatOptions, CompatSolution, ShapeTargets};
use crate::equilibria::{analyze_barrier, interior_equilibria, is_compatible, BarrierAnalysis, EquilibriumPoint, Location, Verdict};
use crate::linalg::to_rows;
use crate::plant::{check_assumption1, check_assumption2, check_assumption3};
use crate::qp::{box_grid, feasibility_sweep, FeasibilityReport};
use crate::{Error, Matrix, Vector};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct RunOptions {
    pub compat: bool,
    pub simulate: bool,
    pub adaptive: bool,
}

impl RunOptions {
    pub fn analyze() -> Self {
        Self::default()
    }

    pub fn compat() -> Self {
        Self { compat: true, ..Self::default() }
    }

    pub fn simulate(adaptive: bool) -> Self {
        Self { compat: adaptive, simulate: true, adaptive }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct Assumptions {
    pub clf_minimum_safe: bool,
    pub barriers_disjoint: bool,
    pub clf_condition: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct CompatRecord {
    pub barrier: usize,
    /// The reference Hessian already passes the exact check.
    pub reference_compatible: bool,
    pub hessian: Vec<Vec<f64>>,
    pub solution: Option<CompatSolution>,
}

#[derive(Debug, Clone, Serialize)]
pub struct NearestEquilibrium {
    pub barrier: Option<usize>,
    pub lambda: f64,
    pub verdict: Verdict,
    pub distance: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct TrajectorySummary {
    pub index: usize,
    pub start: Vec<f64>,
    pub end: Vec<f64>,
    pub rows: usize,
    pub t_end: f64,
    pub termination: Termination,
    pub min_h: f64,
    /// Known equilibrium closest to a non-minimum rest point.
    pub nearest_equilibrium: Option<NearestEquilibrium>,
    /// `‖H(π) − H_ref‖_F` at the last row of adaptive runs.
    pub final_shape_error: Option<f64>,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize)]
pub struct Statistics {
    pub total: usize,
    pub converged: usize,
    pub converged_other: usize,
    pub horizon_reached: usize,
    pub infeasible: usize,
    pub shape_degenerate: usize,
}

impl Statistics {
    pub fn count(terms: impl IntoIterator<Item = Termination>) -> Self {
        let mut s = Self::default();
        for t in terms {
            s.total += 1;
            match t {
                Termination::Converged => s.converged += 1,
                Termination::ConvergedOther { .. } => s.converged_other += 1,
                Termination::HorizonReached => s.horizon_reached += 1,
                Termination::Infeasible { .. } => s.infeasible += 1,
                Termination::ShapeDegenerate { .. } => s.shape_degenerate += 1,
            }
        }
        s
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct StageError {
    pub stage: String,
    pub barrier: Option<usize>,
    pub validation: bool,
    pub message: String,
}

#[derive(Debug, Clone, Serialize)]
pub struct Report {
    pub scenario: String,
    pub seed: u64,
    pub adaptive: bool,
    pub assumptions: Assumptions,
    pub barriers: Vec<BarrierAnalysis>,
    pub interior: Vec<EquilibriumPoint>,
    pub feasibility: FeasibilityReport,
    pub compat: Vec<CompatRecord>,
    pub trajectories: Vec<TrajectorySummary>,
    pub statistics: Statistics,
    pub errors: Vec<StageError>,
    #[serde(skip)]
    pub runs: Vec<Trajectory>,
    #[serde(skip)]
    pub conv_tol: f64,
}

impl Report {
    pub fn failed(&self) -> bool {
        !self.errors.is_empty()
    }
}

fn stage_error(stage: &str, barrier: Option<usize>, e: &Error) -> StageError {
    warn!("{stage} failed: {e}");
    StageError {
        stage: stage.into(),
        barrier,
        validation: matches!(e, Error::Validation(_) | Error::Parse(_)),
        message: e.to_string(),
    }
}

/// Grid with about `points` nodes over the analysis box.
fn feasibility_grid(s: &Scenario) -> Vec<Vector> {
    let n = s.lo.len() as f64;
    let per_axis = (s.feasibility_points as f64).powf(1.0 / n).round().max(2.0) as usize;
    box_grid(&s.lo, &s.hi, per_axis)
}

/// Per-barrier shape targets: the reference where it is already compatible,
/// otherwise the compatibilized Hessian.
fn shape_targets(s: &Scenario, errors: &mut Vec<StageError>) -> Vec<CompatRecord> {
    let href = s.clf.hessian();
    let opts = CompatOptions { epsilon: s.epsilon, ..CompatOptions::default() };
    (0..s.barriers.len())
        .map(|i| {
            let bar = &s.barriers[i];
            let reference_compatible = match is_compatible(&s.plant, &s.clf, bar, &s.cfg) {
                Ok(ev) => ev.compatible,
                Err(e) => {
                    errors.push(stage_error("compat", Some(i), &e));
                    return CompatRecord { barrier: i, reference_compatible: false, hessian: to_rows(href), solution: None };
                }
            };
            if reference_compatible {
                return CompatRecord { barrier: i, reference_compatible, hessian: to_rows(href), solution: None };
            }
            info!("compatibilizing barrier {}", i + 1);
            match compatibilize(href, &s.plant, &s.clf, bar, &s.cfg, &opts) {
                Ok(sol) => CompatRecord { barrier: i, reference_compatible, hessian: to_rows(&sol.h), solution: Some(sol) },
                Err(e) => {
                    errors.push(stage_error("compat", Some(i), &e));
                    CompatRecord { barrier: i, reference_compatible, hessian: to_rows(href), solution: None }
                }
            }
        })
        .collect()
}

fn nearest(x_e: &[f64], barriers: &[BarrierAnalysis], interior: &[EquilibriumPoint]) -> Option<NearestEquilibrium> {
    let dist = |p: &[f64]| p.iter().zip(x_e).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt();
    barriers
        .iter()
        .flat_map(|b| b.equilibria.iter())
        .chain(interior.iter())
        .map(|e| NearestEquilibrium {
            barrier: match e.location {
                Location::Boundary(i) => Some(i),
                Location::Interior => None,
            },
            lambda: e.lambda_e,
            verdict: e.verdict,
            distance: dist(&e.x_e),
        })
        .min_by(|a, b| a.distance.total_cmp(&b.distance))
}

/// Analysis pipeline and, on request, compatibilization and simulation.
/// Failing stages are recorded and the remaining ones still run.
pub fn run_scenario(s: &Scenario, opts: RunOptions) -> Report {
    let mut errors = Vec::new();
    let assumptions = Assumptions {
        clf_minimum_safe: check_assumption1(s.clf.center(), &s.barriers),
        barriers_disjoint: check_assumption2(&s.barriers).unwrap_or(false),
        clf_condition: check_assumption3(&s.plant, &s.clf),
    };

    let mut barriers = Vec::new();
    for i in 0..s.barriers.len() {
        match analyze_barrier(&s.plant, &s.clf, &s.barriers, i, &s.cfg, s.epsilon) {
            Ok(a) => barriers.push(a),
            Err(e) => errors.push(stage_error("equilibria", Some(i), &e)),
        }
    }
    let interior = match interior_equilibria(&s.plant, &s.clf, &s.barriers, &s.cfg, &s.lo, &s.hi, s.interior_grid) {
        Ok(v) => v,
        Err(e) => {
            errors.push(stage_error("interior", None, &e));
            Vec::new()
        }
    };
    let feasibility = feasibility_sweep(feasibility_grid(s).iter(), &s.plant, &s.clf, &s.barriers, &s.cfg);

    let compat = if opts.compat { shape_targets(s, &mut errors) } else { Vec::new() };

    let runs: Vec<Trajectory> = if opts.simulate {
        let data = LoopData { plant: &s.plant, clf: &s.clf, barriers: &s.barriers, cfg: &s.cfg, sim: &s.sim };
        let targets = ShapeTargets {
            reference: s.clf.hessian().clone(),
            per_barrier: compat
                .iter()
                .map(|c| crate::linalg::from_rows(&c.hessian).expect("square"))
                .collect::<Vec<Matrix>>(),
        };
        s.starts
            .par_iter()
            .map(|x0| {
                if opts.adaptive {
                    simulate_adaptive(&data, &targets, &s.adaptive, x0)
                } else {
                    simulate_static(&data, x0)
                }
            })
            .collect()
    } else {
        Vec::new()
    };

    let href = s.clf.hessian();
    let trajectories: Vec<TrajectorySummary> = runs
        .iter()
        .enumerate()
        .map(|(index, t)| {
            let termination = t.termination.clone().unwrap_or(Termination::HorizonReached);
            let nearest_equilibrium = match &termination {
                Termination::ConvergedOther { x_e } => nearest(x_e, &barriers, &interior),
                _ => None,
            };
            TrajectorySummary {
                index,
                start: s.starts[index].iter().copied().collect(),
                end: t.states.last().map(|x| x.iter().copied().collect()).unwrap_or_default(),
                rows: t.len(),
                t_end: t.times.last().copied().unwrap_or(0.0),
                min_h: t.min_h(),
                nearest_equilibrium,
                final_shape_error: t
                    .shapes
                    .last()
                    .and_then(|pi| hessian_from_shape(pi).ok())
                    .map(|h| (h - href).norm()),
                termination,
            }
        })
        .collect();
    let statistics = Statistics::count(trajectories.iter().map(|t| t.termination.clone()));

    Report {
        scenario: s.name.clone(),
        seed: s.seed,
        adaptive: opts.adaptive,
        assumptions,
        barriers,
        interior,
        feasibility,
        compat,
        trajectories,
        statistics,
        errors,
        runs,
        conv_tol: s.sim.conv_tol,
    }
}
