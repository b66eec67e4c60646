//! Support area of the contact, feasibility bounds on the VHIP inputs.

use nalgebra::{DMatrix, DVector, Matrix3, Matrix3x2, Rotation3, Vector2, Vector3};
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GeometryError {
    #[error("CoM is at or below the contact plane (normal height {0})")]
    ComBelowContact(f64),
    #[error("ray from CoM through eCMP does not reach the contact plane (c_n = {c_n}, e_n = {e_n})")]
    DegenerateRay { c_n: f64, e_n: f64 },
    #[error("invalid contact geometry: {0}")]
    Invalid(String),
    #[error("invalid feasibility limits: {0}")]
    InvalidLimits(String),
}

/// Rectangular support area attached to the ZMP frame.
///
/// The frame has origin `p` and rotation `R` (ZMP frame to world). The
/// contact normal is the third column of `R`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ContactGeometry {
    pub p: Vector3<f64>,
    pub rotation: Matrix3<f64>,
    pub half_extent_x: f64,
    pub half_extent_y: f64,
}

impl ContactGeometry {
    pub fn new(
        p: Vector3<f64>,
        rotation: Matrix3<f64>,
        half_extent_x: f64,
        half_extent_y: f64,
    ) -> Result<Self, GeometryError> {
        let geometry = Self {
            p,
            rotation,
            half_extent_x,
            half_extent_y,
        };
        geometry.validate()?;
        Ok(geometry)
    }

    /// Flat rectangle on `z = p_z`, rotated by `yaw` around the vertical.
    pub fn flat(p: Vector3<f64>, yaw: f64, half_extent_x: f64, half_extent_y: f64) -> Result<Self, GeometryError> {
        let rotation = *Rotation3::from_axis_angle(&Vector3::z_axis(), yaw).matrix();
        Self::new(p, rotation, half_extent_x, half_extent_y)
    }

    pub fn validate(&self) -> Result<(), GeometryError> {
        if !(self.half_extent_x > 0.0 && self.half_extent_y > 0.0) {
            return Err(GeometryError::Invalid(format!(
                "half extents must be positive, got ({}, {})",
                self.half_extent_x, self.half_extent_y
            )));
        }
        if !self.p.iter().chain(self.rotation.iter()).all(|x| x.is_finite()) {
            return Err(GeometryError::Invalid("non-finite frame".into()));
        }
        let orthogonality = (self.rotation.transpose() * self.rotation - Matrix3::identity()).amax();
        if orthogonality > 1e-9 || (self.rotation.determinant() - 1.0).abs() > 1e-9 {
            return Err(GeometryError::Invalid("rotation is not a proper orthonormal matrix".into()));
        }
        Ok(())
    }

    pub fn normal(&self) -> Vector3<f64> {
        self.rotation.column(2).into_owned()
    }

    /// First two columns of the rotation: tangent directions of the contact plane.
    pub fn tangent_basis(&self) -> Matrix3x2<f64> {
        self.rotation.fixed_columns::<2>(0).into_owned()
    }

    /// Height of a point above the contact plane.
    pub fn normal_height(&self, point: &Vector3<f64>) -> f64 {
        self.normal().dot(&(point - self.p))
    }

    /// Coordinates of the projection of `point` on the contact plane, in the ZMP frame.
    pub fn to_local(&self, point: &Vector3<f64>) -> Vector2<f64> {
        self.tangent_basis().transpose() * (point - self.p)
    }

    pub fn to_world(&self, local: &Vector2<f64>) -> Vector3<f64> {
        self.p + self.tangent_basis() * local
    }

    pub fn contains(&self, point: &Vector3<f64>, tol: f64) -> bool {
        let local = self.to_local(point);
        local.x.abs() <= self.half_extent_x + tol && local.y.abs() <= self.half_extent_y + tol
    }

    /// Horizontal distance from a point's projection to the support rectangle (zero inside).
    pub fn distance_outside(&self, point: &Vector3<f64>) -> f64 {
        let local = self.to_local(point);
        let dx = (local.x.abs() - self.half_extent_x).max(0.0);
        let dy = (local.y.abs() - self.half_extent_y).max(0.0);
        dx.hypot(dy)
    }
}

/// Half-space representation `C Δz̄ ≤ d` of the support area around a reference ZMP.
#[derive(Debug, Clone, PartialEq)]
pub struct ZmpHalfSpaces {
    pub c: DMatrix<f64>,
    pub d: DVector<f64>,
}

impl ZmpHalfSpaces {
    pub fn rows(&self) -> usize {
        self.d.len()
    }

    pub fn max_violation(&self, delta: &Vector2<f64>) -> f64 {
        let lhs = &self.c * DVector::from_column_slice(delta.as_slice());
        (lhs - &self.d).max()
    }
}

/// Rows are ordered `+x, −x, +y, −y`.
pub fn zmp_halfspaces(geometry: &ContactGeometry, z_ref_local: &Vector2<f64>) -> ZmpHalfSpaces {
    let (x, y) = (geometry.half_extent_x, geometry.half_extent_y);
    #[rustfmt::skip]
    let c = DMatrix::from_row_slice(4, 2, &[
         1.0,  0.0,
        -1.0,  0.0,
         0.0,  1.0,
         0.0, -1.0,
    ]);
    let d = DVector::from_vec(vec![
        x - z_ref_local.x,
        x + z_ref_local.x,
        y - z_ref_local.y,
        y + z_ref_local.y,
    ]);
    ZmpHalfSpaces { c, d }
}

/// Euclidean projection of `z` onto the support rectangle, on the contact plane.
pub fn clamp_zmp(z: &Vector3<f64>, geometry: &ContactGeometry) -> Vector3<f64> {
    let local = geometry.to_local(z);
    let clamped = Vector2::new(
        local.x.clamp(-geometry.half_extent_x, geometry.half_extent_x),
        local.y.clamp(-geometry.half_extent_y, geometry.half_extent_y),
    );
    geometry.to_world(&clamped)
}

/// ZMP and stiffness realizing the same contact force as an eCMP.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ProjectedZmp {
    pub z: Vector3<f64>,
    pub lambda: f64,
    pub clamped: bool,
}

/// Intersects the ray from `c` through `e` with the contact plane.
///
/// The stiffness comes from the normal components so that `λ (c − z) = (c − e)/b²`
/// before clamping. When the intersection leaves the support area the ZMP is
/// clamped and `λ` is kept, which preserves the normal force.
pub fn ecmp_to_zmp(
    c: &Vector3<f64>,
    e: &Vector3<f64>,
    b: f64,
    geometry: &ContactGeometry,
) -> Result<ProjectedZmp, GeometryError> {
    let c_n = geometry.normal_height(c);
    let e_n = geometry.normal_height(e);
    if c_n <= 0.0 {
        return Err(GeometryError::ComBelowContact(c_n));
    }
    if c_n - e_n <= f64::EPSILON * c_n.abs().max(1.0) {
        return Err(GeometryError::DegenerateRay { c_n, e_n });
    }
    let s = c_n / (c_n - e_n);
    let z = c + s * (e - c);
    let lambda = (c_n - e_n) / (b * b * c_n);
    let projected = clamp_zmp(&z, geometry);
    let clamped = (projected - z).norm() > 1e-12;
    Ok(ProjectedZmp {
        z: if clamped { projected } else { geometry.to_world(&geometry.to_local(&z)) },
        lambda,
        clamped,
    })
}

/// Bounds on the normal contact force and on the DCM height.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ActuationLimits {
    pub f_min: f64,
    pub f_max: f64,
    pub h_min: f64,
    pub h_max: f64,
}

impl ActuationLimits {
    /// Normal force between `0.1 mg` and `2 mg`; DCM height in `[0.6, 1.0]` m.
    pub fn for_mass(mass: f64, g: f64) -> Self {
        Self {
            f_min: 0.1 * mass * g,
            f_max: 2.0 * mass * g,
            h_min: 0.6,
            h_max: 1.0,
        }
    }

    pub fn validate(&self) -> Result<(), GeometryError> {
        if !(self.f_min > 0.0 && self.f_min <= self.f_max && self.f_max.is_finite()) {
            return Err(GeometryError::InvalidLimits(format!(
                "need 0 < f_min <= f_max, got f_min = {}, f_max = {}",
                self.f_min, self.f_max
            )));
        }
        if !(self.h_min < self.h_max) {
            return Err(GeometryError::InvalidLimits(format!(
                "need h_min < h_max, got h_min = {}, h_max = {}",
                self.h_min, self.h_max
            )));
        }
        Ok(())
    }
}

/// Limits for one control tick: actuation bounds plus the state-dependent
/// bounds on `λ` and `ω`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FeasibilityLimits {
    pub f_min: f64,
    pub f_max: f64,
    pub lambda_min: f64,
    pub lambda_max: f64,
    pub omega_min: f64,
    pub omega_max: f64,
    pub h_min: f64,
    pub h_max: f64,
}

impl FeasibilityLimits {
    pub fn at_com(
        actuation: &ActuationLimits,
        mass: f64,
        c: &Vector3<f64>,
        geometry: &ContactGeometry,
    ) -> Result<Self, GeometryError> {
        actuation.validate()?;
        let (lambda_min, lambda_max) = lambda_bounds(actuation.f_min, actuation.f_max, mass, c, geometry)?;
        let (omega_min, omega_max) = omega_bounds(lambda_min, lambda_max);
        Ok(Self {
            f_min: actuation.f_min,
            f_max: actuation.f_max,
            lambda_min,
            lambda_max,
            omega_min,
            omega_max,
            h_min: actuation.h_min,
            h_max: actuation.h_max,
        })
    }
}

/// `λ_min = f_min / (m n·(c − p))`, same for the upper bound.
pub fn lambda_bounds(
    f_min: f64,
    f_max: f64,
    mass: f64,
    c: &Vector3<f64>,
    geometry: &ContactGeometry,
) -> Result<(f64, f64), GeometryError> {
    let height = geometry.normal_height(c);
    if !(height > 0.0) {
        return Err(GeometryError::ComBelowContact(height));
    }
    let scale = mass * height;
    Ok((f_min / scale, f_max / scale))
}

pub fn omega_bounds(lambda_min: f64, lambda_max: f64) -> (f64, f64) {
    (lambda_min.sqrt(), lambda_max.sqrt())
}
