//! Dense polynomial algebra: scalar and matrix polynomials, linear pencils,
//! polynomial null spaces, definiteness intervals and the generalized
//! oblique projections used by the boundary-Jacobian analysis.

mod intervals;
mod matpoly;
mod nullspace;
mod pencil;
mod poly;
mod projection;
mod roots;

pub use intervals::{definiteness_intervals, Definiteness, SignIntervals, SEMIDEF_TOL};
pub use matpoly::{MatrixPoly, MatrixPolyRecord};
pub use nullspace::poly_nullspace;
pub use pencil::Pencil;
pub use poly::ScalarPoly;
pub use projection::{oblique_projection, projection_sequence, ProjectionSequence};
pub use roots::{poly_roots, REAL_ROOT_TOL};
