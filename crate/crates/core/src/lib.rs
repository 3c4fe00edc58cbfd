//! Safety-critical control with CLF-CBF quadratic programs.
//!
//! The crate is organised bottom-up:
//!
//! * [`polyalg`] : scalar/matrix polynomials, linear matrix pencils, polynomial
//!   null spaces, definiteness intervals and generalized oblique projections.
//! * [`plant`] : plant dynamics, quadratic CLF/CBF objects, the transformed CLF
//!   and checks of the standing assumptions.
//! * [`qp`] : the min-norm CLF-CBF-QP controller and its closed loop.
//! * [`equilibria`] : boundary/interior equilibria, Q-functions, stability
//!   polynomials and the compatibility barrier.
//! * [`compat`] : the compatibilization optimizer and the adaptive CLF-shape
//!   controller.
//! * [`sim`] : RK4 integration, scenarios, reports and file emission.

pub mod compat;
pub mod equilibria;
pub mod error;
pub mod linalg;
pub mod plant;
pub mod polyalg;
pub mod qp;
pub mod selftest;
pub mod sim;

pub use error::{Error, Result};

pub type Vector = nalgebra::DVector<f64>;
pub type Matrix = nalgebra::DMatrix<f64>;
