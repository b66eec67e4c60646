//! Vertical CoM admittance driven by the measured normalized stiffness.

use nalgebra::Vector3;
use rand::SeedableRng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::geometry::{ContactGeometry, GeometryError};
use crate::pendulum::gravity_vector;

/// Net contact force, with optional zero-mean Gaussian noise on each axis.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ForceMeasurement {
    pub f: Vector3<f64>,
    pub noise_std: f64,
}

impl ForceMeasurement {
    pub fn exact(f: Vector3<f64>) -> Self {
        Self { f, noise_std: 0.0 }
    }

    /// The measured force with noise drawn from `rng`.
    pub fn sample<R: rand::Rng>(&self, rng: &mut R) -> Vector3<f64> {
        if self.noise_std > 0.0 {
            let normal = Normal::new(0.0, self.noise_std).expect("finite standard deviation");
            self.f + Vector3::from_fn(|_, _| normal.sample(rng))
        } else {
            self.f
        }
    }
}

/// `λ = n·f / (m n·(c − p))`.
pub fn measure_lambda(
    force: &Vector3<f64>,
    mass: f64,
    c: &Vector3<f64>,
    geometry: &ContactGeometry,
) -> Result<f64, GeometryError> {
    let height = geometry.normal_height(c);
    if !(height > 0.0) {
        return Err(GeometryError::ComBelowContact(height));
    }
    Ok(geometry.normal().dot(force) / (mass * height))
}

/// Vertical CoM acceleration offset `A_z (λᵈ − λ)`.
///
/// A measured stiffness above the desired one (robot pushed down) yields a
/// negative offset: the CoM complies downward.
pub fn vertical_com_admittance(lambda_desired: f64, lambda_measured: f64, gain: f64) -> f64 {
    gain * (lambda_desired - lambda_measured)
}

/// Point-mass experiment: a position-controlled CoM is pushed vertically while
/// admittance control shifts its commanded height.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct VerticalPushSetup {
    pub mass: f64,
    pub gravity: f64,
    pub com_height: f64,
    /// Admittance gain `A_z`.
    pub gain: f64,
    /// Vertical external force during the push, N (negative pushes down).
    pub push_force: f64,
    pub push_start: f64,
    pub push_duration: f64,
    pub duration: f64,
    pub dt: f64,
    /// Standard deviation of the force sensor noise, N.
    pub noise_std: f64,
    pub seed: u64,
}

impl Default for VerticalPushSetup {
    fn default() -> Self {
        Self {
            mass: 38.0,
            gravity: crate::pendulum::STANDARD_GRAVITY,
            com_height: 0.8,
            gain: 0.005,
            push_force: -0.3 * 38.0 * crate::pendulum::STANDARD_GRAVITY,
            push_start: 0.5,
            push_duration: 1.0,
            duration: 3.0,
            dt: 0.005,
            noise_std: 0.0,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct VerticalPushSample {
    pub t: f64,
    pub com_height: f64,
    pub lambda_measured: f64,
    pub lambda_commanded: f64,
    pub pushing: bool,
}

/// Simulates the push. The CoM tracks its commanded height exactly; the
/// ground reaction balances gravity, the push and the commanded acceleration.
pub fn simulate_vertical_push(
    setup: &VerticalPushSetup,
    geometry: &ContactGeometry,
) -> Result<Vec<VerticalPushSample>, GeometryError> {
    let lambda_desired = setup.gravity / setup.com_height;
    let normal = geometry.normal();
    let mut rng = rand::rngs::StdRng::seed_from_u64(setup.seed);
    let mut c = geometry.p + setup.com_height * normal;
    let mut velocity = 0.0;
    let mut accel = 0.0;
    let steps = (setup.duration / setup.dt).round() as usize;
    let mut samples = Vec::with_capacity(steps + 1);
    for k in 0..=steps {
        let t = k as f64 * setup.dt;
        let pushing = t >= setup.push_start && t < setup.push_start + setup.push_duration;
        let external = if pushing { setup.push_force } else { 0.0 };
        // m c̈ = f + f_ext + m g along the normal
        let contact = setup.mass * (accel * normal - gravity_vector(setup.gravity)) - external * normal;
        let measured = ForceMeasurement {
            f: contact,
            noise_std: setup.noise_std,
        }
        .sample(&mut rng);
        let lambda_measured = measure_lambda(&measured, setup.mass, &c, geometry)?;
        samples.push(VerticalPushSample {
            t,
            com_height: geometry.normal_height(&c),
            lambda_measured,
            lambda_commanded: lambda_desired,
            pushing,
        });
        accel = vertical_com_admittance(lambda_desired, lambda_measured, setup.gain);
        velocity += accel * setup.dt;
        c += velocity * setup.dt * normal;
    }
    Ok(samples)
}
