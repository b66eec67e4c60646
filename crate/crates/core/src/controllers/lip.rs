use nalgebra::Vector3;

use super::{BalanceController, ControlContext, ControlError, ControlOutput, ControllerGains, Saturation};
use crate::geometry::{clamp_zmp, ContactGeometry};

/// Proportional DCM feedback at the ZMP: `Δz = kp Δξ`, horizontal part only.
pub fn lip_feedback(delta_xi: &Vector3<f64>, gains: &ControllerGains) -> Vector3<f64> {
    let dz = gains.kp * delta_xi;
    Vector3::new(dz.x, dz.y, 0.0)
}

/// Applies a ZMP offset in the contact plane and clamps it to the support area.
pub(crate) fn clamped_zmp(
    z_ref: &Vector3<f64>,
    offset: &Vector3<f64>,
    geometry: &ContactGeometry,
) -> (Vector3<f64>, bool) {
    let tangent = geometry.tangent_basis();
    let wanted = z_ref + tangent * (tangent.transpose() * offset);
    let z = clamp_zmp(&wanted, geometry);
    let clamped = (z - wanted).norm() > 1e-12;
    (z, clamped)
}

/// LIP tracking with constant stiffness `λ = ω₀²`.
#[derive(Debug, Clone, Default)]
pub struct LipController;

impl BalanceController for LipController {
    fn name(&self) -> &str {
        "lip"
    }

    fn compute(&mut self, ctx: &ControlContext<'_>) -> Result<ControlOutput, ControlError> {
        let reference = ctx.reference;
        reference.validate(ctx.gravity)?;
        let delta_xi = ctx.measurement.dcm_error(reference.omega);
        let (z, clamped) = clamped_zmp(&reference.z, &lip_feedback(&delta_xi, ctx.gains), ctx.geometry);
        Ok(ControlOutput {
            z,
            lambda: reference.lambda,
            xi: reference.xi + delta_xi,
            omega: reference.omega,
            delta_xi,
            saturation: Saturation {
                zmp: clamped,
                ..Saturation::default()
            },
            ..ControlOutput::at_reference(reference)
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn proportional_law() {
        let gains = ControllerGains::default();
        assert_eq!(lip_feedback(&Vector3::zeros(), &gains), Vector3::zeros());
        assert_relative_eq!(
            lip_feedback(&Vector3::new(0.01, 0.0, 0.0), &gains),
            Vector3::new(0.03, 0.0, 0.0),
            epsilon = 1e-15
        );
    }

    #[test]
    fn closed_loop_pole() {
        // Δξ̇ = ω₀ (Δξ − Δz) = (1 − kp) ω₀ Δξ
        let gains = ControllerGains::default();
        let omega0 = 3.5;
        let delta_xi = Vector3::new(0.02, -0.01, 0.0);
        let rate = omega0 * (delta_xi - lip_feedback(&delta_xi, &gains));
        assert_relative_eq!(rate, (1.0 - gains.kp) * omega0 * delta_xi, epsilon = 1e-15);
    }
}
