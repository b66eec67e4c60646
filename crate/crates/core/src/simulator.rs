//! Perfect closed-loop simulation of the point-mass pendulum.
//!
//! Each control tick measures the state, asks the controller for `(z, λ)`,
//! holds them for one period and integrates the VHIP dynamics with RK4.
//! Impulses are velocity jumps applied between ticks.

use std::time::Duration;

use nalgebra::{Vector2, Vector3};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::controllers::{
    ControlContext, ControlError, ControlOutput, ControllerGains, ControllerParams, ControllerRegistry, Measurement,
    Saturation,
};
use crate::geometry::{ActuationLimits, ContactGeometry, FeasibilityLimits, GeometryError};
use crate::pendulum::{gravity_vector, ModelError, PendulumState, ReferenceSetpoint, STANDARD_GRAVITY};
use crate::qp::QpSettings;

/// Escape distance of the DCM beyond the support area, or above the height limit, that counts as a fall, m.
pub const ESCAPE_DISTANCE: f64 = 0.5;
/// Lowest admissible CoM height, m.
pub const MIN_COM_HEIGHT: f64 = 0.05;
/// Final DCM error below which a run counts as recovered, m.
pub const RECOVERED_DCM_ERROR: f64 = 0.01;
/// Final frequency error below which a run counts as recovered, 1/s.
pub const RECOVERED_OMEGA_ERROR: f64 = 0.01;

#[derive(Debug, Error)]
pub enum SimError {
    #[error(transparent)]
    Control(#[from] ControlError),
    #[error(transparent)]
    Geometry(#[from] GeometryError),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error("invalid scenario: {field}: {reason}")]
    InvalidScenario { field: &'static str, reason: String },
    #[error("invalid bracket [{lo}, {hi}]: {reason}")]
    InvalidBracket { lo: f64, hi: f64, reason: String },
}

fn invalid(field: &'static str, reason: impl Into<String>) -> SimError {
    SimError::InvalidScenario {
        field,
        reason: reason.into(),
    }
}

/// Rectangular support area on flat ground.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SupportConfig {
    pub origin: Vector3<f64>,
    /// Rotation of the ZMP frame around the vertical, rad.
    pub yaw: f64,
    pub half_extent_x: f64,
    pub half_extent_y: f64,
}

impl Default for SupportConfig {
    fn default() -> Self {
        Self {
            origin: Vector3::zeros(),
            yaw: 0.0,
            half_extent_x: 0.112,
            half_extent_y: 0.065,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Impulse {
    /// Time of the velocity jump, s.
    pub time: f64,
    /// Direction in the ZMP frame; normalized before use.
    pub direction: Vector3<f64>,
    /// Magnitude, N·s.
    pub magnitude: f64,
}

impl Default for Impulse {
    fn default() -> Self {
        Self {
            time: 0.5,
            direction: Vector3::y(),
            magnitude: 0.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Scenario {
    pub controller: String,
    /// Total mass, kg.
    pub mass: f64,
    pub gravity: f64,
    /// Height of the reference CoM above the contact, m.
    pub com_height: f64,
    /// Distance from the reference ZMP to the lateral (+y) edge of the support area, m.
    pub edge_offset: f64,
    pub support: SupportConfig,
    pub gains: ControllerGains,
    pub limits: ActuationLimits,
    /// Velocity scaling of the DCM–eCMP law; `sqrt(h/g)` when absent.
    pub b: Option<f64>,
    pub impulse: Impulse,
    /// Simulated time, s.
    pub duration: f64,
    /// Integrator substeps per control period.
    pub substeps: usize,
}

impl Default for Scenario {
    fn default() -> Self {
        Self::fig2()
    }
}

impl Scenario {
    /// Lateral push on a 38 kg pendulum standing 0.8 m high near an edge.
    ///
    /// The edge distance and control period are calibrated so that the
    /// DCM–eCMP controller fails near 5.2 N·s and the height constraint
    /// slides instead of turning infeasible.
    pub fn fig2() -> Self {
        let mass = 38.0;
        Self {
            controller: "vhip".into(),
            mass,
            gravity: STANDARD_GRAVITY,
            com_height: 0.8,
            edge_offset: 0.041,
            support: SupportConfig::default(),
            gains: ControllerGains {
                dt: 0.03,
                ..ControllerGains::default()
            },
            limits: ActuationLimits::for_mass(mass, STANDARD_GRAVITY),
            b: None,
            impulse: Impulse::default(),
            duration: 10.0,
            substeps: 1,
        }
    }

    pub fn with_controller(mut self, name: &str) -> Self {
        self.controller = name.to_owned();
        self
    }

    pub fn with_impulse(mut self, magnitude: f64) -> Self {
        self.impulse.magnitude = magnitude;
        self
    }

    pub fn validate(&self) -> Result<(), SimError> {
        let positive = |field: &'static str, v: f64| {
            if v > 0.0 && v.is_finite() {
                Ok(())
            } else {
                Err(invalid(field, format!("must be positive and finite, got {v}")))
            }
        };
        positive("mass", self.mass)?;
        positive("gravity", self.gravity)?;
        positive("com_height", self.com_height)?;
        positive("support.half_extent_x", self.support.half_extent_x)?;
        positive("support.half_extent_y", self.support.half_extent_y)?;
        positive("duration", self.duration)?;
        if self.controller.is_empty() {
            return Err(invalid("controller", "must name a registered controller"));
        }
        if !(0.0..=2.0 * self.support.half_extent_y).contains(&self.edge_offset) {
            return Err(invalid(
                "edge_offset",
                format!(
                    "must lie in [0, {}] to keep the reference ZMP in the support area, got {}",
                    2.0 * self.support.half_extent_y,
                    self.edge_offset
                ),
            ));
        }
        self.gains.validate()?;
        self.limits.validate()?;
        if let Some(b) = self.b {
            positive("b", b)?;
        }
        if self.substeps == 0 {
            return Err(invalid("substeps", "must be at least 1"));
        }
        if !(self.impulse.time >= 0.0 && self.impulse.time < self.duration) {
            return Err(invalid(
                "impulse.time",
                format!("must lie in [0, duration = {}), got {}", self.duration, self.impulse.time),
            ));
        }
        if !(self.impulse.magnitude >= 0.0 && self.impulse.magnitude.is_finite()) {
            return Err(invalid(
                "impulse.magnitude",
                format!("must be non-negative, got {}", self.impulse.magnitude),
            ));
        }
        if !(self.impulse.direction.norm() > 0.0) {
            return Err(invalid("impulse.direction", "must be a non-zero vector"));
        }
        self.geometry()?;
        Ok(())
    }

    pub fn geometry(&self) -> Result<ContactGeometry, GeometryError> {
        ContactGeometry::flat(
            self.support.origin,
            self.support.yaw,
            self.support.half_extent_x,
            self.support.half_extent_y,
        )
    }

    pub fn reference(&self) -> Result<ReferenceSetpoint, SimError> {
        let geometry = self.geometry()?;
        let z = geometry.to_world(&Vector2::new(0.0, self.support.half_extent_y - self.edge_offset));
        let c = z + self.com_height * geometry.normal();
        Ok(ReferenceSetpoint::static_equilibrium(c, z, &geometry.normal(), self.gravity)?)
    }

    pub fn b(&self) -> f64 {
        self.b.unwrap_or_else(|| (self.com_height / self.gravity).sqrt())
    }

    pub fn controller_params(&self) -> ControllerParams {
        ControllerParams {
            b: self.b(),
            qp: QpSettings::default(),
        }
    }

    /// Impulse direction expressed in the world frame, unit norm.
    pub fn impulse_direction(&self) -> Result<Vector3<f64>, GeometryError> {
        let rotation = self.geometry()?.rotation;
        Ok((rotation * self.impulse.direction).normalize())
    }

    pub fn num_ticks(&self) -> usize {
        (self.duration / self.gains.dt).round() as usize
    }
}

/// RK4 integration of `c̈ = λ (c − z) + g` over one period with the inputs held.
pub fn step(state: &PendulumState, output: &ControlOutput, dt: f64, substeps: usize, gravity: f64) -> PendulumState {
    let g = gravity_vector(gravity);
    let accel = |c: &Vector3<f64>| output.lambda * (c - output.z) + g;
    let h = dt / substeps.max(1) as f64;
    let (mut c, mut v) = (state.c, state.c_dot);
    for _ in 0..substeps.max(1) {
        let k1v = accel(&c);
        let k1c = v;
        let k2v = accel(&(c + 0.5 * h * k1c));
        let k2c = v + 0.5 * h * k1v;
        let k3v = accel(&(c + 0.5 * h * k2c));
        let k3c = v + 0.5 * h * k2v;
        let k4v = accel(&(c + h * k3c));
        let k4c = v + h * k3v;
        c += h / 6.0 * (k1c + 2.0 * k2c + 2.0 * k3c + k4c);
        v += h / 6.0 * (k1v + 2.0 * k2v + 2.0 * k3v + k4v);
    }
    PendulumState::new(c, v)
}

/// Instantaneous velocity jump `Δċ = i/m` along `direction`.
pub fn apply_impulse(state: &PendulumState, direction: &Vector3<f64>, magnitude: f64, mass: f64) -> PendulumState {
    PendulumState::new(state.c, state.c_dot + (magnitude / mass) * direction)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Outcome {
    Recovered,
    Failed,
    Timeout,
}

impl Outcome {
    pub fn as_str(&self) -> &'static str {
        match self {
            Outcome::Recovered => "recovered",
            Outcome::Failed => "failed",
            Outcome::Timeout => "timeout",
        }
    }
}

/// One control tick.
#[derive(Debug, Clone, PartialEq)]
pub struct Sample {
    pub t: f64,
    pub c: Vector3<f64>,
    pub c_dot: Vector3<f64>,
    pub xi: Vector3<f64>,
    pub omega: f64,
    pub lambda: f64,
    pub z: Vector3<f64>,
    pub delta_xi: Vector3<f64>,
    pub delta_omega: f64,
    pub sigma: Vector3<f64>,
    pub saturation: Saturation,
    pub degraded: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub controller: String,
    pub impulse: f64,
    pub outcome: Outcome,
    pub failure_reason: Option<String>,
    pub ticks: usize,
    pub peak_omega: f64,
    pub peak_xi_z: f64,
    /// Largest `|ξ_z − ξ_zᵈ|`.
    pub peak_xi_z_excursion: f64,
    pub final_dcm_error: f64,
    pub final_omega_error: f64,
    pub zmp_saturated_ticks: usize,
    pub height_saturated_ticks: usize,
    pub degraded_ticks: usize,
}

#[derive(Debug, Clone)]
pub struct Trajectory {
    pub reference: ReferenceSetpoint,
    pub samples: Vec<Sample>,
    pub summary: Summary,
    /// Wall-clock QP solve time per tick, for controllers that solve one.
    pub solve_times: Vec<Duration>,
}

impl Trajectory {
    pub fn outcome(&self) -> Outcome {
        self.summary.outcome
    }

    pub fn median_solve_time(&self) -> Option<Duration> {
        median(&self.solve_times)
    }
}

pub fn median(times: &[Duration]) -> Option<Duration> {
    if times.is_empty() {
        return None;
    }
    let mut sorted = times.to_vec();
    sorted.sort_unstable();
    Some(sorted[sorted.len() / 2])
}

fn failure(
    state: &PendulumState,
    reference: &ReferenceSetpoint,
    geometry: &ContactGeometry,
    limits: &ActuationLimits,
) -> Option<String> {
    if !state.is_finite() {
        return Some("non-finite state".into());
    }
    let height = geometry.normal_height(&state.c);
    if height <= MIN_COM_HEIGHT {
        return Some(format!("CoM height {height:.3} m below {MIN_COM_HEIGHT} m"));
    }
    let xi = state.c + state.c_dot / reference.omega;
    let escape = geometry.distance_outside(&xi);
    if escape > ESCAPE_DISTANCE {
        return Some(format!("DCM {escape:.3} m outside the support area"));
    }
    let rise = geometry.normal_height(&xi) - limits.h_max;
    if rise > ESCAPE_DISTANCE {
        return Some(format!("DCM {rise:.3} m above the height limit"));
    }
    None
}

pub fn run_scenario(scenario: &Scenario, registry: &ControllerRegistry) -> Result<Trajectory, SimError> {
    scenario.validate()?;
    let geometry = scenario.geometry()?;
    let reference = scenario.reference()?;
    let mut controller = registry.create(&scenario.controller, &scenario.controller_params())?;
    let direction = scenario.impulse_direction()?;
    let dt = scenario.gains.dt;
    let n_ticks = scenario.num_ticks();
    let impulse_tick = (scenario.impulse.time / dt - 1e-9).ceil().max(0.0) as usize;

    let mut state = PendulumState::at_rest(reference.c);
    let mut samples = Vec::with_capacity(n_ticks + 1);
    let mut solve_times = Vec::new();
    let mut failure_reason = None;

    for k in 0..=n_ticks {
        if k == impulse_tick && scenario.impulse.magnitude != 0.0 {
            state = apply_impulse(&state, &direction, scenario.impulse.magnitude, scenario.mass);
        }
        if let Some(reason) = failure(&state, &reference, &geometry, &scenario.limits) {
            failure_reason = Some(reason);
            break;
        }
        let measurement = Measurement::from_state(&state, &reference);
        let limits = FeasibilityLimits::at_com(&scenario.limits, scenario.mass, &state.c, &geometry)?;
        let ctx = ControlContext {
            measurement: &measurement,
            reference: &reference,
            limits: &limits,
            gains: &scenario.gains,
            geometry: &geometry,
            gravity: scenario.gravity,
        };
        let output = match controller.compute(&ctx) {
            Ok(output) => output,
            Err(ControlError::Geometry(err)) => {
                failure_reason = Some(format!("controller cannot act: {err}"));
                break;
            }
            Err(err) => return Err(err.into()),
        };
        if let Some(time) = output.solve_time {
            solve_times.push(time);
        }
        samples.push(Sample {
            t: k as f64 * dt,
            c: state.c,
            c_dot: state.c_dot,
            xi: output.xi,
            omega: output.omega,
            lambda: output.lambda,
            z: output.z,
            delta_xi: output.delta_xi,
            delta_omega: output.delta_omega,
            sigma: output.delta_sigma,
            saturation: output.saturation,
            degraded: output.degraded,
        });
        if k < n_ticks {
            state = step(&state, &output, dt, scenario.substeps, scenario.gravity);
        }
    }

    let summary = summarize(scenario, &reference, &samples, failure_reason);
    Ok(Trajectory {
        reference,
        samples,
        summary,
        solve_times,
    })
}

fn summarize(
    scenario: &Scenario,
    reference: &ReferenceSetpoint,
    samples: &[Sample],
    failure_reason: Option<String>,
) -> Summary {
    let (final_dcm_error, final_omega_error) = samples
        .last()
        .map(|s| (s.delta_xi.norm(), s.delta_omega.abs()))
        .unwrap_or((f64::INFINITY, f64::INFINITY));
    let outcome = if failure_reason.is_some() {
        Outcome::Failed
    } else if final_dcm_error < RECOVERED_DCM_ERROR && final_omega_error < RECOVERED_OMEGA_ERROR {
        Outcome::Recovered
    } else {
        Outcome::Timeout
    };
    let fold_max = |f: &dyn Fn(&Sample) -> f64| samples.iter().map(f).fold(f64::NEG_INFINITY, f64::max);
    Summary {
        controller: scenario.controller.clone(),
        impulse: scenario.impulse.magnitude,
        outcome,
        failure_reason,
        ticks: samples.len(),
        peak_omega: fold_max(&|s| s.omega),
        peak_xi_z: fold_max(&|s| s.xi.z),
        peak_xi_z_excursion: fold_max(&|s| (s.xi.z - reference.xi.z).abs()),
        final_dcm_error,
        final_omega_error,
        zmp_saturated_ticks: samples.iter().filter(|s| s.saturation.zmp).count(),
        height_saturated_ticks: samples.iter().filter(|s| s.saturation.height).count(),
        degraded_ticks: samples.iter().filter(|s| s.degraded).count(),
    }
}

/// Runs independent scenarios on scoped threads, preserving order.
pub fn run_batch(scenarios: &[Scenario], registry: &ControllerRegistry) -> Vec<Result<Trajectory, SimError>> {
    std::thread::scope(|scope| {
        let handles: Vec<_> = scenarios
            .iter()
            .map(|scenario| scope.spawn(move || run_scenario(scenario, registry)))
            .collect();
        handles
            .into_iter()
            .map(|h| h.join().expect("scenario thread panicked"))
            .collect()
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BisectionStep {
    pub magnitude: f64,
    pub outcome: Outcome,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ThresholdResult {
    pub controller: String,
    /// Largest impulse found to recover, N·s.
    pub threshold: f64,
    /// Smallest impulse found not to recover, N·s.
    pub upper: f64,
    pub tolerance: f64,
    pub trace: Vec<BisectionStep>,
}

/// Bisects the impulse magnitude between a recovering `lo` and a
/// non-recovering `hi` until the bracket is narrower than `tol`.
pub fn find_threshold(
    template: &Scenario,
    controller: &str,
    bracket: (f64, f64),
    tol: f64,
    registry: &ControllerRegistry,
) -> Result<ThresholdResult, SimError> {
    let (mut lo, mut hi) = bracket;
    let bad_bracket = |reason: &str| SimError::InvalidBracket {
        lo: bracket.0,
        hi: bracket.1,
        reason: reason.into(),
    };
    if !(lo < hi) || lo < 0.0 || !hi.is_finite() {
        return Err(bad_bracket("need 0 <= lo < hi"));
    }
    if !(tol > 0.0) {
        return Err(bad_bracket("tolerance must be positive"));
    }
    let base = template.clone().with_controller(controller);
    let mut trace = Vec::new();
    let run = |magnitude: f64, trace: &mut Vec<BisectionStep>| -> Result<Outcome, SimError> {
        let outcome = run_scenario(&base.clone().with_impulse(magnitude), registry)?.outcome();
        trace.push(BisectionStep { magnitude, outcome });
        Ok(outcome)
    };
    let lo_outcome = run(lo, &mut trace)?;
    let hi_outcome = run(hi, &mut trace)?;
    match (lo_outcome, hi_outcome) {
        (Outcome::Recovered, Outcome::Recovered) => return Err(bad_bracket("both ends recover")),
        (Outcome::Recovered, _) => {}
        (_, Outcome::Recovered) => return Err(bad_bracket("lower end fails while upper end recovers")),
        _ => return Err(bad_bracket("both ends fail")),
    }
    while hi - lo > tol {
        let mid = 0.5 * (lo + hi);
        if run(mid, &mut trace)? == Outcome::Recovered {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(ThresholdResult {
        controller: controller.to_owned(),
        threshold: lo,
        upper: hi,
        tolerance: tol,
        trace,
    })
}

#[derive(Debug, Clone)]
pub struct ComparisonEntry {
    pub magnitude: f64,
    pub baseline: Trajectory,
    pub candidate: Trajectory,
    pub max_zmp_difference: f64,
    pub max_dcm_difference: f64,
    pub max_candidate_delta_omega: f64,
}

#[derive(Debug, Clone)]
pub struct ComparisonReport {
    pub baseline: String,
    pub candidate: String,
    pub entries: Vec<ComparisonEntry>,
}

/// Per-tick `(zmp, dcm)` distances over the ticks both runs share.
pub fn pairwise_differences(a: &Trajectory, b: &Trajectory) -> Vec<(f64, f64)> {
    a.samples
        .iter()
        .zip(&b.samples)
        .map(|(x, y)| ((x.z - y.z).norm(), (x.xi - y.xi).norm()))
        .collect()
}

/// Runs the DCM–eCMP and VHIP controllers on the same impulses.
pub fn compare_controllers(
    template: &Scenario,
    magnitudes: &[f64],
    registry: &ControllerRegistry,
) -> Result<ComparisonReport, SimError> {
    compare_pair(template, magnitudes, "fip", "vhip", registry)
}

pub fn compare_pair(
    template: &Scenario,
    magnitudes: &[f64],
    baseline: &str,
    candidate: &str,
    registry: &ControllerRegistry,
) -> Result<ComparisonReport, SimError> {
    let scenarios: Vec<Scenario> = magnitudes
        .iter()
        .flat_map(|&m| {
            [baseline, candidate].map(|name| template.clone().with_controller(name).with_impulse(m))
        })
        .collect();
    let mut runs = run_batch(&scenarios, registry).into_iter();
    let mut entries = Vec::with_capacity(magnitudes.len());
    for &magnitude in magnitudes {
        let baseline_run = runs.next().expect("one run per scenario")?;
        let candidate_run = runs.next().expect("one run per scenario")?;
        let diffs = pairwise_differences(&baseline_run, &candidate_run);
        let max_of = |f: fn(&(f64, f64)) -> f64| diffs.iter().map(f).fold(0.0, f64::max);
        entries.push(ComparisonEntry {
            magnitude,
            max_zmp_difference: max_of(|d| d.0),
            max_dcm_difference: max_of(|d| d.1),
            max_candidate_delta_omega: candidate_run
                .samples
                .iter()
                .map(|s| s.delta_omega.abs())
                .fold(0.0, f64::max),
            baseline: baseline_run,
            candidate: candidate_run,
        });
    }
    Ok(ComparisonReport {
        baseline: baseline.to_owned(),
        candidate: candidate.to_owned(),
        entries,
    })
}
