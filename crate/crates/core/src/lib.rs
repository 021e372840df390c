//! Desk-scale numerics for the gluing construction of steady Kähler-Ricci
//! solitons on crepant resolutions, in the U(n)-invariant radial reduction.
//!
//! Everything lives on a uniform grid in the log-radius `t = 2 log r`:
//!
//! * [`radial_soliton`]: the Cao family `φ_a`, its asymptotics and residuals.
//! * [`ale_model`]: the Calabi Ricci-flat bubble on O(-n) and its moment map.
//! * [`glue`]: the glued approximate solution, weights and error term.
//! * [`drift_operator`]: the drift Laplacian `¼(Δ - κX)`, banded solves and
//!   weighted norms.
//! * [`soliton_newton`]: the Monge-Ampère operator, its linearization, the
//!   inverse-function certificate and the Newton solve.

pub mod ale_model;
pub mod drift_operator;
pub mod error;
pub mod glue;
pub mod grid;
pub mod quadrature;
pub mod radial_soliton;
pub mod rng;
pub mod soliton_newton;
pub mod tridiag;

pub use error::{Error, Result};
pub use grid::Grid;
