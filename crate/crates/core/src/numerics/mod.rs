//! Generic numerical building blocks: special functions, quadrature,
//! ODE integration and root finding.

pub mod ode;
pub mod quadrature;
pub mod roots;
pub mod special;

pub use ode::{OdeError, OdeOptions, OdeOutcome, OdeState};
pub use quadrature::{integrate_to_infinity, QuadOptions, QuadResult};
pub use roots::RootError;
