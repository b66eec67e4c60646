use nalgebra::Vector3;

use super::{BalanceController, ControlContext, ControlError, ControlOutput, Saturation};
use crate::geometry::ecmp_to_zmp;
use crate::pendulum::gravity_vector;

/// DCM–eCMP feedback: `Δe = kp Δξ` with `Δξ = Δc + b Δċ`, then the eCMP is
/// converted to a ZMP on the contact plane, clamped to the support area.
pub fn fip_feedback(ctx: &ControlContext<'_>, b: f64) -> Result<ControlOutput, ControlError> {
    let reference = ctx.reference;
    let m = ctx.measurement;
    reference.validate(ctx.gravity)?;
    if !(b > 0.0) {
        return Err(ControlError::InvalidGains(format!("b must be positive, got {b}")));
    }
    let g = gravity_vector(ctx.gravity);
    let e_ref = reference.c - b * b * (reference.c_ddot - g);
    let xi_ref = reference.c + b * reference.c_dot;
    let delta_xi = m.delta_c + b * m.delta_c_dot;
    let e = e_ref + ctx.gains.kp * delta_xi;
    let c = m.com(reference);
    let projected = ecmp_to_zmp(&c, &e, b, ctx.geometry)?;
    let limits = ctx.limits;
    Ok(ControlOutput {
        z: projected.z,
        lambda: projected.lambda,
        xi: xi_ref + delta_xi,
        omega: 1.0 / b,
        delta_xi,
        delta_omega: 1.0 / b - reference.omega,
        delta_sigma: Vector3::zeros(),
        saturation: Saturation {
            zmp: projected.clamped,
            lambda: projected.lambda < limits.lambda_min || projected.lambda > limits.lambda_max,
            ..Saturation::default()
        },
        ..ControlOutput::at_reference(reference)
    })
}

#[derive(Debug, Clone)]
pub struct FipController {
    pub b: f64,
}

impl FipController {
    pub fn new(b: f64) -> Self {
        Self { b }
    }
}

impl BalanceController for FipController {
    fn name(&self) -> &str {
        "fip"
    }

    fn compute(&mut self, ctx: &ControlContext<'_>) -> Result<ControlOutput, ControlError> {
        fip_feedback(ctx, self.b)
    }
}
