//! Closed-loop equilibria of the CLF-CBF-QP controller.
//!
//! Boundary equilibria on `∂C_i` solve `f_i(x, λ) = f + λG∇h_i − pG∇V̄ = 0`
//! with `h_i(x) = 0`. For quadratic data this is the pencil equation
//! `P(λ)ν = w` with `ν = x − c_i`, and the boundary condition becomes
//! `q(λ) = n(λ)/det P(λ)² = 1`.

mod boundary;
mod compatibility;
mod field;
mod pencil_system;

use serde::{Deserialize, Serialize};

pub use boundary::{
    boundary_equilibria, boundary_jacobian, classify_equilibrium, classify_matrix, stability_polynomial,
    BoundaryFrame, BoundaryResult, StabilityPoly, CLEARANCE, MARGINAL_TOL,
};
pub use compatibility::{
    analyze_barrier, compatibility_barrier, critical_points, default_lambda_max, is_compatible, BarrierAnalysis, CompatBarrier, CompatEvidence,
    RootEvidence, DEFAULT_EPSILON,
};
pub use field::{equilibrium_field, equilibrium_jacobian, interior_equilibria};
pub use pencil_system::{build_pencil, q_function, PencilSystem, PlantCase, QFunction};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Verdict {
    Stable,
    Unstable,
    Marginal,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Location {
    /// On the boundary of barrier `i` (zero-based).
    Boundary(usize),
    Interior,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Diagnostics {
    /// `‖f_cl(x_e)‖` with the actual QP controller in the loop.
    pub field_residual: f64,
    pub h_residual: f64,
    /// `|λ₀(x_e) − pγ(V(x_e))|`
    pub clf_multiplier_gap: f64,
    /// Extreme eigenvalues of `S(λ_e)` (boundary points only).
    pub s_min_eig: f64,
    pub s_max_eig: f64,
    /// Eigenvalues `(re, im)` of the closed-loop Jacobian.
    pub jacobian_spectrum: Vec<[f64; 2]>,
    /// Max entrywise gap between the analytic and finite-difference Jacobians.
    pub jacobian_mismatch: f64,
    pub verified: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EquilibriumPoint {
    pub x_e: Vec<f64>,
    pub lambda_e: f64,
    pub location: Location,
    pub verdict: Verdict,
    pub diagnostics: Diagnostics,
}

pub(crate) fn spectrum_pairs(m: &crate::Matrix) -> Vec<[f64; 2]> {
    let mut ev: Vec<[f64; 2]> = m.complex_eigenvalues().iter().map(|z| [z.re, z.im]).collect();
    ev.sort_by(|a, b| a[0].total_cmp(&b[0]).then(a[1].total_cmp(&b[1])));
    ev
}
