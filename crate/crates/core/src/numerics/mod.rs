//! Shared numerical engine: explicit integration with dense output and
//! events, delay integration by the method of steps, bracketed root finding,
//! scalar maximization and adaptive quadrature.

mod dde;
mod grid;
mod ode;
mod optimize;
mod quad;
mod roots;
pub(crate) mod slaved;

pub use dde::{integrate_dde, DdeProblem};
pub use grid::Grid;
pub use ode::{
    integrate_ode, Control, Direction, Event, EventKind, EventSpec, OdeOptions, OdeSolution,
    Trajectory,
};
pub use optimize::maximize_scalar;
pub use quad::{quad_adaptive, quad_ladder, Domain};
pub use roots::find_root;
