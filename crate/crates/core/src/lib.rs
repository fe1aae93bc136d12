//! Numerical analysis of the similarity boundary value problem
//!
//! ```text
//! f''' + ((m+1)/2) f f'' - m f'^2 = 0,   f(0) = a,  f'(0) = -1,  f'(inf) = 0
//! ```
//!
//! by shooting on `b = f''(0)`, by tracing separatrices of the reduced autonomous
//! system in `(u, v) = (f'/f^2, f''/f^3)`, and against closed-form solutions.

pub mod error;
pub mod integrator;
pub mod model;
pub mod oracles;
pub mod phaseplane;
pub mod quadrature;
pub mod shooting;

pub use error::{Error, Result};
pub use model::ModelParams;
pub use shooting::{solve, BvpSolution, Regime, ShootControls, SolutionSet};
