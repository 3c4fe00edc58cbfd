//! Compatible CLF Hessians and the adaptive CLF-shape controller.
//!
//! The Hessian is parametrized as `H(π) = L(π)ᵀL(π)` with `L` lower
//! triangular. [`compatibilize`] searches that space for the Hessian nearest
//! to a reference that makes a barrier compatible; the adaptive loop then
//! steers `π` toward the target selected by the active region.

mod adaptive;
mod optimize;
mod shape;

pub use adaptive::{
    adaptive_closed_loop, clf_with_shape, AdaptiveConfig, AdaptiveStep, RegionFilter, ShapeTargets,
};
pub use optimize::{certificate, compatibilize, Certificate, CompatOptions, CompatSolution};
pub use shape::{
    eccentricity, factor_from_shape, hessian_from_shape, shape_dim, shape_from_hessian, shape_len,
    shape_lyapunov, shape_qp_step,
};
