//! Best-effort pole placement of the 4D DCM `[ξ; ω]`.
//!
//! Each tick solves a 10-variable QP over `X = [Δξ Δω Δz̄ Δλ Δσ]`. The
//! equalities bind states to inputs through the feedback law, split the
//! measured DCM error between `Δξ` and `Δω`, and tie `Δλ` to `Δω`. The cost
//! penalizes the pole-placement violation `Δσ`, horizontal components first.

use std::time::Instant;

use nalgebra::{DMatrix, DVector, Vector3};

use super::lip::{clamped_zmp, lip_feedback};
use super::{BalanceController, ControlContext, ControlError, ControlOutput, ControllerGains, Saturation};
use crate::geometry::zmp_halfspaces;
use crate::pendulum::ReferenceSetpoint;
use crate::qp::{ActiveSetSolver, QpProblem, QpSettings};

/// Regularization weight of the non-slack variables.
pub const EPSILON_WEIGHT: f64 = 1e-6;
/// Weight of the vertical pole-placement violation.
pub const VERTICAL_SIGMA_WEIGHT: f64 = 1e-3;

/// Column and row layout of the VHIP QP.
pub struct VhipLayout;

impl VhipLayout {
    pub const NUM_VARIABLES: usize = 10;
    pub const NUM_EQUALITIES: usize = 7;
    pub const XI: usize = 0;
    pub const OMEGA: usize = 3;
    pub const ZMP: usize = 4;
    pub const LAMBDA: usize = 6;
    pub const SIGMA: usize = 7;

    /// ZMP half-spaces come first; their count depends on the support polygon.
    pub fn lambda_rows(zmp_rows: usize) -> [usize; 2] {
        [zmp_rows, zmp_rows + 1]
    }

    pub fn omega_rows(zmp_rows: usize) -> [usize; 2] {
        [zmp_rows + 2, zmp_rows + 3]
    }

    pub fn height_rows(zmp_rows: usize) -> [usize; 2] {
        [zmp_rows + 4, zmp_rows + 5]
    }
}

/// Closed-loop rates `((1 − kp) λᵈ/ωᵈ, (1 − kp) ωᵈ)` of the spatial and
/// frequential DCM errors.
pub fn closed_loop_rates(reference: &ReferenceSetpoint, gains: &ControllerGains) -> (f64, f64) {
    let pole = 1.0 - gains.kp;
    (pole * reference.lambda / reference.omega, pole * reference.omega)
}

pub fn build_vhip_qp(ctx: &ControlContext<'_>) -> Result<QpProblem, ControlError> {
    let r = ctx.reference;
    let m = ctx.measurement;
    let kp = ctx.gains.kp;
    r.validate(ctx.gravity)?;
    ctx.gains.validate()?;
    let n = VhipLayout::NUM_VARIABLES;
    let (xi_col, om_col, zmp_col, la_col, si_col) = (
        VhipLayout::XI,
        VhipLayout::OMEGA,
        VhipLayout::ZMP,
        VhipLayout::LAMBDA,
        VhipLayout::SIGMA,
    );

    let mut weights = DVector::from_element(n, EPSILON_WEIGHT);
    weights[si_col] = 1.0;
    weights[si_col + 1] = 1.0;
    weights[si_col + 2] = VERTICAL_SIGMA_WEIGHT;
    let w = DMatrix::from_diagonal(&weights);

    let mut a = DMatrix::zeros(VhipLayout::NUM_EQUALITIES, n);
    let mut b = DVector::zeros(VhipLayout::NUM_EQUALITIES);
    let tangent = ctx.geometry.tangent_basis();
    let omega_col = (r.xi - r.v) / r.omega;
    let lambda_col = (r.z - r.xi) / r.lambda;
    let split_col = m.c_dot / (r.omega * r.omega);
    let measured = m.dcm_error(r.omega);
    for i in 0..3 {
        // feedback law with pole-placement violation
        a[(i, xi_col + i)] = -kp;
        a[(i, om_col)] = omega_col[i];
        a[(i, zmp_col)] = tangent[(i, 0)];
        a[(i, zmp_col + 1)] = tangent[(i, 1)];
        a[(i, la_col)] = lambda_col[i];
        a[(i, si_col + i)] = 1.0;
        // split of the measured DCM error between Δξ and Δω
        a[(3 + i, xi_col + i)] = 1.0;
        a[(3 + i, om_col)] = split_col[i];
        b[3 + i] = measured[i];
    }
    a[(6, om_col)] = r.omega * (1.0 + kp);
    a[(6, la_col)] = -1.0;

    let support = zmp_halfspaces(ctx.geometry, &ctx.geometry.to_local(&r.z));
    let zr = support.rows();
    let mut g = DMatrix::zeros(zr + 6, n);
    let mut h = DVector::zeros(zr + 6);
    g.view_mut((0, zmp_col), (zr, 2)).copy_from(&support.c);
    h.rows_mut(0, zr).copy_from(&support.d);

    let limits = ctx.limits;
    let [la_hi, la_lo] = VhipLayout::lambda_rows(zr);
    g[(la_hi, la_col)] = 1.0;
    h[la_hi] = limits.lambda_max - r.lambda;
    g[(la_lo, la_col)] = -1.0;
    h[la_lo] = r.lambda - limits.lambda_min;

    let [om_hi, om_lo] = VhipLayout::omega_rows(zr);
    g[(om_hi, om_col)] = 1.0;
    h[om_hi] = limits.omega_max - r.omega;
    g[(om_lo, om_col)] = -1.0;
    h[om_lo] = r.omega - limits.omega_min;

    // ξ_z of the next tick, with Δξ̇_z = (λ/ω)((1 − kp)Δξ_z + Δσ_z)
    let g_sigma = (1.0 + ctx.gains.kappa) * ctx.gains.dt * r.lambda / r.omega;
    let g_xi = 1.0 + g_sigma * (1.0 - kp);
    let [hz_hi, hz_lo] = VhipLayout::height_rows(zr);
    g[(hz_hi, xi_col + 2)] = g_xi;
    g[(hz_hi, si_col + 2)] = g_sigma;
    h[hz_hi] = limits.h_max - r.xi.z;
    g[(hz_lo, xi_col + 2)] = -g_xi;
    g[(hz_lo, si_col + 2)] = -g_sigma;
    h[hz_lo] = r.xi.z - limits.h_min;

    Ok(QpProblem::new(w, a, b, g, h)?)
}

/// Solves the VHIP QP and maps its solution to ZMP and stiffness commands.
///
/// When the QP has no solution the clamped LIP law is applied with the
/// reference stiffness and the output is flagged as degraded.
pub fn vhip_feedback(
    ctx: &ControlContext<'_>,
    solver: &mut ActiveSetSolver,
) -> Result<ControlOutput, ControlError> {
    solve_tick(ctx, solver, &[]).map(|(output, _)| output)
}

fn solve_tick(
    ctx: &ControlContext<'_>,
    solver: &mut ActiveSetSolver,
    warm_start: &[usize],
) -> Result<(ControlOutput, Vec<usize>), ControlError> {
    let r = ctx.reference;
    let problem = build_vhip_qp(ctx)?;
    let started = Instant::now();
    let solution = solver.solve_warm(&problem, warm_start)?;
    let solve_time = started.elapsed();

    if !solution.is_solved() {
        let delta_xi = ctx.measurement.dcm_error(r.omega);
        let (z, _) = clamped_zmp(&r.z, &lip_feedback(&delta_xi, ctx.gains), ctx.geometry);
        let output = ControlOutput {
            z,
            xi: r.xi + delta_xi,
            delta_xi,
            saturation: Saturation {
                zmp: true,
                ..Saturation::default()
            },
            degraded: true,
            qp_iterations: Some(solution.iterations),
            solve_time: Some(solve_time),
            ..ControlOutput::at_reference(r)
        };
        return Ok((output, Vec::new()));
    }

    let x = &solution.x;
    let delta_xi = Vector3::new(x[VhipLayout::XI], x[VhipLayout::XI + 1], x[VhipLayout::XI + 2]);
    let delta_omega = x[VhipLayout::OMEGA];
    let delta_zmp = nalgebra::Vector2::new(x[VhipLayout::ZMP], x[VhipLayout::ZMP + 1]);
    let delta_lambda = x[VhipLayout::LAMBDA];
    let delta_sigma = Vector3::new(
        x[VhipLayout::SIGMA],
        x[VhipLayout::SIGMA + 1],
        x[VhipLayout::SIGMA + 2],
    );
    let zr = problem.num_inequalities() - 6;
    let active = |rows: [usize; 2]| rows.iter().any(|i| solution.active_set.contains(i));
    let saturation = Saturation {
        zmp: solution.active_set.iter().any(|&i| i < zr),
        lambda: active(VhipLayout::lambda_rows(zr)),
        omega: active(VhipLayout::omega_rows(zr)),
        height: active(VhipLayout::height_rows(zr)),
    };
    let z = ctx.geometry.to_world(&(ctx.geometry.to_local(&r.z) + delta_zmp));
    let output = ControlOutput {
        z,
        lambda: r.lambda + delta_lambda,
        xi: r.xi + delta_xi,
        omega: r.omega + delta_omega,
        delta_xi,
        delta_omega,
        delta_sigma,
        saturation,
        degraded: false,
        qp_iterations: Some(solution.iterations),
        solve_time: Some(solve_time),
    };
    Ok((output, solution.active_set))
}

/// QP-based VHIP tracking. The previous active set seeds the next solve.
#[derive(Debug, Clone, Default)]
pub struct VhipController {
    solver: ActiveSetSolver,
    active_set: Vec<usize>,
}

impl VhipController {
    pub fn new(settings: QpSettings) -> Self {
        Self {
            solver: ActiveSetSolver::new(settings),
            active_set: Vec::new(),
        }
    }
}

impl BalanceController for VhipController {
    fn name(&self) -> &str {
        "vhip"
    }

    fn compute(&mut self, ctx: &ControlContext<'_>) -> Result<ControlOutput, ControlError> {
        let warm = std::mem::take(&mut self.active_set);
        let (output, active_set) = solve_tick(ctx, &mut self.solver, &warm)?;
        self.active_set = active_set;
        Ok(output)
    }
}
