//! Omega-scale functions: ODE construction, Taylor integration, the decaying
//! combination `Z - c W`, and a Volterra solver used as an independent check.

mod ode;
mod passage;
mod solution;
mod taylor;
mod volterra;

pub use ode::{build_ode, OdeSpec};
pub use passage::PassageProfile;
pub use solution::{c_ratio_limit, taylor_integrate, taylor_integrate_with, OmegaScaleSolution};
pub use taylor::{Mesh, TaylorConfig};
pub use volterra::{volterra_solve, VolterraSolution, MIN_MESH};
