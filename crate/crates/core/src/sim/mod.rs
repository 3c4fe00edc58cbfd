//! Fixed-step simulation, scenario files, the analysis/simulation pipeline
//! and report emission.

mod emit;
mod integrate;
mod report;
mod scenario;

pub use emit::{emit, num, trajectory_header};
pub use integrate::{integrate, rk4_step, simulate_adaptive, simulate_static, LoopData, Termination, Trajectory};
pub use report::{
    run_scenario, Assumptions, CompatRecord, NearestEquilibrium, Report, RunOptions, StageError, Statistics,
    TrajectorySummary,
};
pub use scenario::{
    bundled, AdaptationSpec, AnalysisSpec, BarrierSpec, ClfSpec, ControllerSpec, GridSpec, PlantSpec, RingSpec,
    Scenario, ScenarioFile, SimConfig, SimSpec, BUNDLED,
};
