//! Reduced models of the centroidal dynamics and their divergent components.
//!
//! Three inverted pendulum models share the same point-mass plant:
//!
//! ```text
//! VHIP:  c̈ = λ (c − z) + g
//! LIP:   c̈ = ω₀² (c − z) + g
//! FIP:   c̈ = (c − e) / b² + g
//! ```
//!
//! All of them use the divergent component ξ = c + ċ/ω. For the FIP the
//! frequency is stored as ω = 1/b so the three models share one representation.

use nalgebra::Vector3;
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Standard gravity, m/s².
pub const STANDARD_GRAVITY: f64 = 9.81;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ModelError {
    #[error("non-finite {0}")]
    NonFinite(&'static str),
    #[error("{name} must be positive, got {value}")]
    NonPositive { name: &'static str, value: f64 },
    #[error("inconsistent reference: {0}")]
    InconsistentReference(String),
}

/// Gravity vector in a z-up world frame.
pub fn gravity_vector(g: f64) -> Vector3<f64> {
    Vector3::new(0.0, 0.0, -g)
}

fn finite(v: &Vector3<f64>) -> bool {
    v.iter().all(|x| x.is_finite())
}

fn check_finite(v: &Vector3<f64>, what: &'static str) -> Result<(), ModelError> {
    if finite(v) {
        Ok(())
    } else {
        Err(ModelError::NonFinite(what))
    }
}

fn check_positive(name: &'static str, value: f64) -> Result<(), ModelError> {
    if !value.is_finite() {
        return Err(ModelError::NonFinite(name));
    }
    if value <= 0.0 {
        return Err(ModelError::NonPositive { name, value });
    }
    Ok(())
}

/// CoM position and velocity of the point-mass model.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PendulumState {
    pub c: Vector3<f64>,
    pub c_dot: Vector3<f64>,
}

impl PendulumState {
    pub fn new(c: Vector3<f64>, c_dot: Vector3<f64>) -> Self {
        Self { c, c_dot }
    }

    pub fn at_rest(c: Vector3<f64>) -> Self {
        Self {
            c,
            c_dot: Vector3::zeros(),
        }
    }

    pub fn is_finite(&self) -> bool {
        finite(&self.c) && finite(&self.c_dot)
    }
}

/// Contact input of the VHIP: ZMP and normalized stiffness.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ReducedInput {
    pub z: Vector3<f64>,
    pub lambda: f64,
}

impl ReducedInput {
    pub fn new(z: Vector3<f64>, lambda: f64) -> Self {
        Self { z, lambda }
    }
}

/// Four-dimensional DCM: spatial component and natural frequency.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DcmState {
    pub xi: Vector3<f64>,
    pub omega: f64,
}

/// VHIP acceleration `λ (c − z) + g`.
pub fn vhip_accel(
    state: &PendulumState,
    input: &ReducedInput,
    g: f64,
) -> Result<Vector3<f64>, ModelError> {
    check_finite(&state.c, "CoM position")?;
    check_finite(&input.z, "ZMP")?;
    check_positive("lambda", input.lambda)?;
    Ok(input.lambda * (state.c - input.z) + gravity_vector(g))
}

/// LIP acceleration `ω₀² (c − z) + g`.
pub fn lip_accel(
    state: &PendulumState,
    z: &Vector3<f64>,
    omega0: f64,
    g: f64,
) -> Result<Vector3<f64>, ModelError> {
    check_finite(&state.c, "CoM position")?;
    check_finite(z, "ZMP")?;
    check_positive("omega0", omega0)?;
    Ok(omega0 * omega0 * (state.c - z) + gravity_vector(g))
}

/// FIP acceleration `(c − e) / b² + g`.
pub fn fip_accel(
    state: &PendulumState,
    e: &Vector3<f64>,
    b: f64,
    g: f64,
) -> Result<Vector3<f64>, ModelError> {
    check_finite(&state.c, "CoM position")?;
    check_finite(e, "eCMP")?;
    check_positive("b", b)?;
    Ok((state.c - e) / (b * b) + gravity_vector(g))
}

/// Natural frequency of the LIP at height `h`.
pub fn lip_frequency(h: f64, g: f64) -> f64 {
    (g / h).sqrt()
}

/// Divergent component of motion `ξ = c + ċ/ω`.
pub fn dcm(c: &Vector3<f64>, c_dot: &Vector3<f64>, omega: f64) -> Result<Vector3<f64>, ModelError> {
    check_positive("omega", omega)?;
    Ok(c + c_dot / omega)
}

/// Right-hand side of the Riccati equation `ω̇ = ω² − λ`.
pub fn riccati_rate(omega: f64, lambda: f64) -> f64 {
    omega * omega - lambda
}

/// Decoupled first-order rates of the VHIP:
/// `ξ̇ = (λ/ω)(ξ − z) + g/ω` and `ċ = ω(ξ − c)`.
pub fn dcm_rates(
    xi: &Vector3<f64>,
    c: &Vector3<f64>,
    omega: f64,
    input: &ReducedInput,
    g: f64,
) -> Result<(Vector3<f64>, Vector3<f64>), ModelError> {
    check_positive("omega", omega)?;
    check_positive("lambda", input.lambda)?;
    let xi_dot = (input.lambda / omega) * (xi - input.z) + gravity_vector(g) / omega;
    let c_dot = omega * (xi - c);
    Ok((xi_dot, c_dot))
}

/// Desired state of the reduced model, consistent with all of its equations.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ReferenceSetpoint {
    pub c: Vector3<f64>,
    pub c_dot: Vector3<f64>,
    pub c_ddot: Vector3<f64>,
    pub xi: Vector3<f64>,
    pub omega: f64,
    pub lambda: f64,
    pub z: Vector3<f64>,
    /// Virtual repellent point `z − g/λ`.
    pub v: Vector3<f64>,
}

impl ReferenceSetpoint {
    /// Static equilibrium with the CoM above `z` at height `n·(c − z)`.
    pub fn static_equilibrium(
        c: Vector3<f64>,
        z: Vector3<f64>,
        normal: &Vector3<f64>,
        g: f64,
    ) -> Result<Self, ModelError> {
        check_finite(&c, "reference CoM")?;
        check_finite(&z, "reference ZMP")?;
        let height = normal.dot(&(c - z));
        check_positive("reference CoM height", height)?;
        let lambda = g / height;
        let omega = lambda.sqrt();
        let reference = Self {
            c,
            c_dot: Vector3::zeros(),
            c_ddot: Vector3::zeros(),
            xi: c,
            omega,
            lambda,
            z,
            v: z - gravity_vector(g) / lambda,
        };
        reference.validate(g)?;
        Ok(reference)
    }

    pub fn validate(&self, g: f64) -> Result<(), ModelError> {
        for (v, what) in [
            (&self.c, "reference CoM"),
            (&self.c_dot, "reference CoM velocity"),
            (&self.c_ddot, "reference CoM acceleration"),
            (&self.xi, "reference DCM"),
            (&self.z, "reference ZMP"),
            (&self.v, "reference VRP"),
        ] {
            check_finite(v, what)?;
        }
        check_positive("reference omega", self.omega)?;
        check_positive("reference lambda", self.lambda)?;
        let dcm_gap = (self.c_dot - self.omega * (self.xi - self.c)).amax();
        if dcm_gap > 1e-9 {
            return Err(ModelError::InconsistentReference(format!(
                "c_dot differs from omega (xi - c) by {dcm_gap:e}"
            )));
        }
        let vrp_gap = (self.v - (self.z - gravity_vector(g) / self.lambda)).amax();
        if vrp_gap > 1e-9 {
            return Err(ModelError::InconsistentReference(format!(
                "v differs from z - g/lambda by {vrp_gap:e}"
            )));
        }
        Ok(())
    }
}
