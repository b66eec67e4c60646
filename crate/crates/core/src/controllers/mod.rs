//! Reduced-model feedback laws.
//!
//! Every law implements [`BalanceController`] and is created by name from a
//! [`ControllerRegistry`], so simulations pick their controller at runtime.

mod fip;
mod lip;
mod registry;
mod vhip;

use std::time::Duration;

use nalgebra::Vector3;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geometry::{ContactGeometry, FeasibilityLimits, GeometryError};
use crate::pendulum::{ModelError, PendulumState, ReferenceSetpoint};
use crate::qp::QpError;

pub use fip::{fip_feedback, FipController};
pub use lip::{lip_feedback, LipController};
pub use registry::{ControllerFactory, ControllerParams, ControllerRegistry};
pub use vhip::{build_vhip_qp, closed_loop_rates, vhip_feedback, VhipController, VhipLayout};

#[derive(Debug, Error)]
pub enum ControlError {
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Geometry(#[from] GeometryError),
    #[error(transparent)]
    Qp(#[from] QpError),
    #[error("invalid gains: {0}")]
    InvalidGains(String),
    #[error("unknown controller `{name}` (available: {available})")]
    UnknownController { name: String, available: String },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ControllerGains {
    /// Proportional DCM gain, `1 − kp` is the normalized closed-loop pole.
    pub kp: f64,
    /// Damping of the DCM height constraint.
    pub kappa: f64,
    /// Control period, s.
    pub dt: f64,
}

impl Default for ControllerGains {
    fn default() -> Self {
        Self {
            kp: 3.0,
            kappa: 0.5,
            dt: 0.005,
        }
    }
}

impl ControllerGains {
    /// Gain used on hardware, softer than the simulation default.
    pub fn hardware() -> Self {
        Self {
            kp: 1.4,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<(), ControlError> {
        if !(self.kp > 1.0) {
            return Err(ControlError::InvalidGains(format!("kp must exceed 1, got {}", self.kp)));
        }
        if !(0.0..=1.0).contains(&self.kappa) {
            return Err(ControlError::InvalidGains(format!(
                "kappa must lie in [0, 1], got {}",
                self.kappa
            )));
        }
        if !(self.dt > 0.0 && self.dt.is_finite()) {
            return Err(ControlError::InvalidGains(format!("dt must be positive, got {}", self.dt)));
        }
        Ok(())
    }
}

/// Tracking errors (measured minus reference) and the measured CoM velocity.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Measurement {
    pub delta_c: Vector3<f64>,
    pub delta_c_dot: Vector3<f64>,
    pub c_dot: Vector3<f64>,
}

impl Measurement {
    pub fn from_state(state: &PendulumState, reference: &ReferenceSetpoint) -> Self {
        Self {
            delta_c: state.c - reference.c,
            delta_c_dot: state.c_dot - reference.c_dot,
            c_dot: state.c_dot,
        }
    }

    pub fn com(&self, reference: &ReferenceSetpoint) -> Vector3<f64> {
        reference.c + self.delta_c
    }

    /// `Δc + Δċ/ω`, the DCM error read out at frequency `omega`.
    pub fn dcm_error(&self, omega: f64) -> Vector3<f64> {
        self.delta_c + self.delta_c_dot / omega
    }
}

/// Which constraint groups were saturated in a tick.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Saturation {
    pub zmp: bool,
    pub lambda: bool,
    pub omega: bool,
    pub height: bool,
}

impl Saturation {
    pub fn any(&self) -> bool {
        self.zmp || self.lambda || self.omega || self.height
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ControlOutput {
    /// Commanded ZMP, on the contact plane.
    pub z: Vector3<f64>,
    /// Commanded stiffness.
    pub lambda: f64,
    /// DCM chosen by the controller.
    pub xi: Vector3<f64>,
    /// Natural frequency chosen by the controller.
    pub omega: f64,
    pub delta_xi: Vector3<f64>,
    pub delta_omega: f64,
    pub delta_sigma: Vector3<f64>,
    pub saturation: Saturation,
    /// Set when the QP failed and the clamped LIP law was used instead.
    pub degraded: bool,
    pub qp_iterations: Option<usize>,
    pub solve_time: Option<Duration>,
}

impl ControlOutput {
    /// Output reproducing the reference inputs.
    pub fn at_reference(reference: &ReferenceSetpoint) -> Self {
        Self {
            z: reference.z,
            lambda: reference.lambda,
            xi: reference.xi,
            omega: reference.omega,
            delta_xi: Vector3::zeros(),
            delta_omega: 0.0,
            delta_sigma: Vector3::zeros(),
            saturation: Saturation::default(),
            degraded: false,
            qp_iterations: None,
            solve_time: None,
        }
    }
}

/// Everything a controller sees in one tick.
#[derive(Debug, Clone, Copy)]
pub struct ControlContext<'a> {
    pub measurement: &'a Measurement,
    pub reference: &'a ReferenceSetpoint,
    pub limits: &'a FeasibilityLimits,
    pub gains: &'a ControllerGains,
    pub geometry: &'a ContactGeometry,
    pub gravity: f64,
}

pub trait BalanceController: Send {
    fn name(&self) -> &str;

    fn compute(&mut self, ctx: &ControlContext<'_>) -> Result<ControlOutput, ControlError>;
}
