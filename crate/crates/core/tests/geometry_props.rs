use nalgebra::{Vector2, Vector3};
use proptest::prelude::*;
use vhip::geometry::{
    clamp_zmp, ecmp_to_zmp, lambda_bounds, omega_bounds, zmp_halfspaces, ActuationLimits, ContactGeometry,
};
use vhip::pendulum::{fip_accel, vhip_accel, PendulumState, ReducedInput, STANDARD_GRAVITY as G};

fn geometry_strategy() -> impl Strategy<Value = ContactGeometry> {
    (-0.5f64..0.5, -0.5f64..0.5, -3.2f64..3.2, 0.02f64..0.3, 0.02f64..0.3).prop_map(|(px, py, yaw, x, y)| {
        ContactGeometry::flat(Vector3::new(px, py, 0.0), yaw, x, y).unwrap()
    })
}

#[test]
fn fig2_force_bounds() {
    let ground = ContactGeometry::flat(Vector3::zeros(), 0.0, 0.1, 0.1).unwrap();
    let limits = ActuationLimits::for_mass(38.0, G);
    let c = Vector3::new(0.0, 0.0, 0.8);
    let (lo, hi) = lambda_bounds(limits.f_min, limits.f_max, 38.0, &c, &ground).unwrap();
    assert!((lo - 1.22625).abs() < 1e-12 && (hi - 24.525).abs() < 1e-12);
    let (wlo, whi) = omega_bounds(lo, hi);
    assert!((wlo - 1.1074).abs() < 1e-4 && (whi - 4.9523).abs() < 1e-4);
    let (lo2, hi2) = lambda_bounds(limits.f_min, limits.f_max, 38.0, &(2.0 * c), &ground).unwrap();
    assert!((lo2 - lo / 2.0).abs() < 1e-12 && (hi2 - hi / 2.0).abs() < 1e-12);
}

#[test]
fn saturating_ecmp_lands_on_boundary() {
    let ground = ContactGeometry::flat(Vector3::zeros(), 0.0, 0.112, 0.065).unwrap();
    let b = (0.8 / G).sqrt();
    let c = Vector3::new(0.0, 0.035, 0.8);
    let e = Vector3::new(0.0, 0.2, 0.0);
    let p = ecmp_to_zmp(&c, &e, b, &ground).unwrap();
    assert!(p.clamped);
    assert!((p.z.y - 0.065).abs() < 1e-12 && ground.contains(&p.z, 1e-12));
}

#[test]
fn raised_ecmp_along_ray_keeps_zmp() {
    let ground = ContactGeometry::flat(Vector3::zeros(), 0.0, 0.2, 0.2).unwrap();
    let b = 0.2856;
    let c = Vector3::new(0.0, 0.0, 0.8);
    let e = Vector3::new(0.01, 0.0, 0.0);
    let raised = c + 0.5 * (e - c);
    let on_plane = ecmp_to_zmp(&c, &e, b, &ground).unwrap();
    let above = ecmp_to_zmp(&c, &raised, b, &ground).unwrap();
    assert!((on_plane.z - above.z).amax() < 1e-12);
    assert!(above.lambda < 1.0 / (b * b) && (on_plane.lambda - 1.0 / (b * b)).abs() < 1e-12);
    // the FIP and VHIP accelerations agree
    let state = PendulumState::at_rest(c);
    let fip = fip_accel(&state, &raised, b, G).unwrap();
    let vhip = vhip_accel(&state, &ReducedInput::new(above.z, above.lambda), G).unwrap();
    assert!((fip - vhip).amax() < 1e-10);
}

proptest! {
    #[test]
    fn clamp_is_idempotent_projection(geometry in geometry_strategy(), x in -1.0f64..1.0, y in -1.0f64..1.0) {
        let z = Vector3::new(x, y, 0.3);
        let once = clamp_zmp(&z, &geometry);
        let twice = clamp_zmp(&once, &geometry);
        prop_assert!((once - twice).amax() <= 1e-12);
        prop_assert!(geometry.contains(&once, 1e-12));
        prop_assert!(geometry.normal_height(&once).abs() <= 1e-12);
        let halfspaces = zmp_halfspaces(&geometry, &Vector2::zeros());
        prop_assert!(halfspaces.max_violation(&geometry.to_local(&once)) <= 1e-12);
    }

    #[test]
    fn clamp_fixes_interior_points(geometry in geometry_strategy(), fx in -0.99f64..0.99, fy in -0.99f64..0.99) {
        let z = geometry.to_world(&Vector2::new(fx * geometry.half_extent_x, fy * geometry.half_extent_y));
        prop_assert!((clamp_zmp(&z, &geometry) - z).amax() <= 1e-12);
    }

    #[test]
    fn halfspaces_match_rectangle(geometry in geometry_strategy(), rx in -0.9f64..0.9, ry in -0.9f64..0.9, dx in -0.6f64..0.6, dy in -0.6f64..0.6) {
        let z_ref = Vector2::new(rx * geometry.half_extent_x, ry * geometry.half_extent_y);
        let halfspaces = zmp_halfspaces(&geometry, &z_ref);
        let delta = Vector2::new(dx, dy);
        let inside = geometry.contains(&geometry.to_world(&(z_ref + delta)), 0.0);
        prop_assert_eq!(halfspaces.max_violation(&delta) <= 0.0, inside);
    }

    #[test]
    fn ecmp_conversion_reproduces_fip_force(geometry in geometry_strategy(), h in 0.4f64..1.2, ex in -0.05f64..0.05, ey in -0.05f64..0.05, en in -0.2f64..0.3, b in 0.2f64..0.5) {
        let c = geometry.p + h * geometry.normal();
        let e = geometry.p + geometry.tangent_basis() * Vector2::new(ex, ey) + en * geometry.normal();
        let p = ecmp_to_zmp(&c, &e, b, &geometry).unwrap();
        if !p.clamped {
            prop_assert!((p.lambda * (c - p.z) - (c - e) / (b * b)).amax() <= 1e-10);
        }
        prop_assert!(geometry.contains(&p.z, 1e-12));
    }

    #[test]
    fn frequency_bounds_square_to_stiffness_bounds(lo in 0.01f64..50.0, span in 0.0f64..50.0) {
        let (wlo, whi) = omega_bounds(lo, lo + span);
        prop_assert!((wlo * wlo - lo).abs() <= 1e-12 * lo.max(1.0));
        prop_assert!((whi * whi - (lo + span)).abs() <= 1e-12 * (lo + span).max(1.0));
    }
}
