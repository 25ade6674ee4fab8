//! Ground-state Q-vortex profiles of a sextic complex scalar field on a disk.
//!
//! The radial profile is expanded in an orthonormal sine basis, the action
//! is minimized on the sphere of prescribed reduced norm, and the frequency
//! comes out as the Lagrange multiplier. Closed-form bounds on the frequency,
//! amplitude and boundary decay are checked against every computed solution.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod basis;
pub mod cli;
pub mod error;
pub mod model;
pub mod oracle;
pub mod quadrature;
pub mod solver;
pub mod sweep;

pub use error::{Error, Result};
