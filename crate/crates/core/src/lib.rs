//! Linear feedback control of the variable-height inverted pendulum.
//!
//! The [`controllers`] module holds three interchangeable balance laws behind
//! the [`controllers::BalanceController`] trait: proportional DCM feedback of
//! the LIP, DCM–eCMP feedback of the floating-base pendulum, and best-effort
//! pole placement of the 4D DCM `[ξ; ω]` solved as a small QP every tick.
//! The [`simulator`] runs them in closed loop against the point-mass model.

pub mod admittance;
pub mod controllers;
pub mod geometry;
pub mod pendulum;
pub mod qp;
pub mod simulator;

pub use controllers::{BalanceController, ControllerRegistry};
pub use simulator::{run_scenario, Outcome, Scenario, Trajectory};
