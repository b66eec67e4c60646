//! End-to-end acceptance checks. Prints one PASS/FAIL line per criterion and
//! exits with a failure status if any criterion fails.

mod common;

use std::process::ExitCode;
use std::time::{Duration, Instant};

use nalgebra::Vector3;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use vhip::admittance::{simulate_vertical_push, VerticalPushSetup};
use vhip::controllers::{build_vhip_qp, ControlContext, Measurement, VhipLayout};
use vhip::geometry::FeasibilityLimits;
use vhip::pendulum::{riccati_rate, PendulumState};
use vhip::qp::solve;
use vhip::simulator::{find_threshold, run_scenario, Scenario, Trajectory};
use vhip::ControllerRegistry;

struct Verdict {
    pass: bool,
    detail: String,
}

fn verdict(pass: bool, detail: String) -> Verdict {
    Verdict { pass, detail }
}

fn run(scenario: &Scenario) -> Trajectory {
    run_scenario(scenario, &ControllerRegistry::with_builtins()).expect("scenario runs")
}

fn push(controller: &str, magnitude: f64) -> Trajectory {
    run(&Scenario::fig2().with_controller(controller).with_impulse(magnitude))
}

fn controller_coincidence() -> Verdict {
    let started = Instant::now();
    let mut scenario = Scenario::fig2();
    scenario.duration = 5.0;
    let fip = run(&scenario.clone().with_controller("fip").with_impulse(1.5));
    let vhip = run(&scenario.with_controller("vhip").with_impulse(1.5));
    let dz = fip
        .samples
        .iter()
        .zip(&vhip.samples)
        .map(|(a, b)| (a.z - b.z).norm())
        .fold(0.0, f64::max);
    let dw = vhip.samples.iter().map(|s| s.delta_omega.abs()).fold(0.0, f64::max);
    let elapsed = started.elapsed();
    verdict(
        fip.samples.len() == vhip.samples.len() && dz < 1e-3 && dw < 1e-6 && elapsed < Duration::from_secs(5),
        format!("max |z_vhip - z_fip| = {dz:.3e} m, max |dω| = {dw:.3e} 1/s, {elapsed:.2?}"),
    )
}

fn omega_jump() -> Verdict {
    let peak = push("vhip", 4.5).summary.peak_omega;
    verdict((3.9..=4.5).contains(&peak), format!("peak ω = {peak:.3} 1/s"))
}

fn height_strategy() -> Verdict {
    let excursion = push("vhip", 4.5).summary.peak_xi_z_excursion;
    verdict((0.10..=0.20).contains(&excursion), format!("peak ξ_z excursion = {excursion:.4} m"))
}

fn threshold_separation() -> Verdict {
    let started = Instant::now();
    let registry = ControllerRegistry::with_builtins();
    let template = Scenario::fig2();
    let fip = find_threshold(&template, "fip", (0.0, 20.0), 0.01, &registry).expect("bracket holds");
    let vhip = find_threshold(&template, "vhip", (0.0, 20.0), 0.01, &registry).expect("bracket holds");
    let elapsed = started.elapsed();
    let (f, v) = (fip.threshold, vhip.threshold);
    verdict(
        (4.7..=5.7).contains(&f) && (5.5..=6.5).contains(&v) && v - f >= 0.4 && elapsed < Duration::from_secs(120),
        format!("fip {f:.3} N·s, vhip {v:.3} N·s, gap {:.3} N·s, {elapsed:.2?}", v - f),
    )
}

fn saturation_ceiling() -> Verdict {
    let t = push("vhip", 5.7);
    let peak = t.summary.peak_xi_z;
    let ticks = t.summary.height_saturated_ticks;
    verdict(
        peak <= 1.0 + 1e-6 && ticks >= 1,
        format!("max ξ_z = {peak:.6} m, height constraint active in {ticks} ticks ({})", t.outcome().as_str()),
    )
}

fn qp_latency() -> Verdict {
    let mut times = Vec::new();
    for magnitude in [1.5, 4.5, 5.7] {
        times.extend(push("vhip", magnitude).solve_times);
    }
    let median = vhip::simulator::median(&times).unwrap_or(Duration::MAX);
    verdict(
        median < Duration::from_millis(1),
        format!("median solve {median:.2?} over {} ticks", times.len()),
    )
}

fn oracle_equivalence() -> Verdict {
    let started = Instant::now();
    let mut rng = common::rng(17);
    let mut worst: f64 = 0.0;
    let total = 1000;
    let mut matched = 0;
    for _ in 0..total {
        let m = rng.random_range(0..=10);
        let problem = common::random_problem(&mut rng, m);
        let Some(oracle) = common::enumerate_active_sets(&problem) else {
            continue;
        };
        let Ok(solution) = solve(&problem) else {
            continue;
        };
        if !solution.is_solved() {
            continue;
        }
        let gap = (problem.objective(&solution.x) - oracle.objective).abs();
        worst = worst.max(gap);
        if gap <= 1e-6 {
            matched += 1;
        }
    }
    let elapsed = started.elapsed();
    verdict(
        matched == total && elapsed < Duration::from_secs(60),
        format!("{matched}/{total} problems match, worst objective gap {worst:.2e}, {elapsed:.2?}"),
    )
}

/// Least-squares slope of `ln y` against `t`.
fn log_slope(points: &[(f64, f64)]) -> f64 {
    let n = points.len() as f64;
    let mt = points.iter().map(|p| p.0).sum::<f64>() / n;
    let my = points.iter().map(|p| p.1.ln()).sum::<f64>() / n;
    let num: f64 = points.iter().map(|p| (p.0 - mt) * (p.1.ln() - my)).sum();
    let den: f64 = points.iter().map(|p| (p.0 - mt).powi(2)).sum();
    num / den
}

/// Largest relative gap between `y(t)/y(t0)` and `exp(rate (t − t0))`.
fn worst_relative_gap(points: &[(f64, f64)], rate: f64) -> f64 {
    let (t0, y0) = points[0];
    points
        .iter()
        .map(|&(t, y)| (y / y0 / (rate * (t - t0)).exp() - 1.0).abs())
        .fold(0.0, f64::max)
}

fn pole_placement_decay() -> Verdict {
    // spatial: small forward push, well inside the support area
    let mut scenario = Scenario::fig2().with_impulse(0.5);
    scenario.impulse.direction = Vector3::x();
    scenario.gains.dt = 2e-4;
    scenario.duration = 1.6;
    let t = run(&scenario);
    let reference = t.reference;
    let spatial_rate = (1.0 - scenario.gains.kp) * reference.lambda / reference.omega;
    let unsaturated = t.samples.iter().all(|s| !s.saturation.any());
    let start = scenario.impulse.time + scenario.gains.dt;
    let xi: Vec<(f64, f64)> = t
        .samples
        .iter()
        .filter(|s| s.t >= start - 1e-12 && s.t <= start + 1.0 + 1e-12)
        .map(|s| (s.t, s.delta_xi.norm()))
        .collect();
    let spatial_fit = log_slope(&xi);
    let spatial_gap = worst_relative_gap(&xi, spatial_rate);

    // frequential: Riccati dynamics under the stiffness law read from the QP
    let geometry = scenario.geometry().unwrap();
    let state = PendulumState::at_rest(reference.c);
    let measurement = Measurement::from_state(&state, &reference);
    let limits = FeasibilityLimits::at_com(&scenario.limits, scenario.mass, &state.c, &geometry).unwrap();
    let ctx = ControlContext {
        measurement: &measurement,
        reference: &reference,
        limits: &limits,
        gains: &scenario.gains,
        geometry: &geometry,
        gravity: scenario.gravity,
    };
    let qp = build_vhip_qp(&ctx).unwrap();
    let row = VhipLayout::NUM_EQUALITIES - 1;
    let stiffness_gain = qp.a[(row, VhipLayout::OMEGA)] / -qp.a[(row, VhipLayout::LAMBDA)];
    let lambda_of = |omega: f64| reference.lambda + stiffness_gain * (omega - reference.omega);
    let f = |omega: f64| riccati_rate(omega, lambda_of(omega));
    let h = 1e-4;
    let mut omega = reference.omega + 1e-3;
    let mut w = vec![(0.0, omega - reference.omega)];
    for k in 1..=10_000 {
        let k1 = f(omega);
        let k2 = f(omega + 0.5 * h * k1);
        let k3 = f(omega + 0.5 * h * k2);
        let k4 = f(omega + h * k3);
        omega += h / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
        let in_bounds = lambda_of(omega) >= limits.lambda_min && lambda_of(omega) <= limits.lambda_max;
        assert!(in_bounds, "stiffness bounds stay inactive");
        w.push((k as f64 * h, omega - reference.omega));
    }
    let frequency_rate = (1.0 - scenario.gains.kp) * reference.omega;
    let frequency_fit = log_slope(&w);
    let frequency_gap = worst_relative_gap(&w, frequency_rate);

    let rel = |fit: f64, rate: f64| (fit / rate - 1.0).abs();
    verdict(
        unsaturated
            && rel(spatial_fit, spatial_rate) <= 0.02
            && spatial_gap <= 0.02
            && rel(frequency_fit, frequency_rate) <= 0.02
            && frequency_gap <= 0.02,
        format!(
            "Δξ rate {spatial_fit:.4} vs {spatial_rate:.4} (worst gap {:.2}%), Δω rate {frequency_fit:.4} vs {frequency_rate:.4} (worst gap {:.2}%)",
            100.0 * spatial_gap,
            100.0 * frequency_gap
        ),
    )
}

fn riccati_viability() -> Verdict {
    let scenario = Scenario::fig2();
    let geometry = scenario.geometry().unwrap();
    let reference = scenario.reference().unwrap();
    let limits = FeasibilityLimits::at_com(&scenario.limits, scenario.mass, &reference.c, &geometry).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let h = 1e-3;
    let trials = 500;
    let mut crossed = 0;
    let mut reentered = 0;
    for _ in 0..trials {
        let mut omega = rng.random_range(limits.omega_min..limits.omega_max);
        let mut below = false;
        for _ in 0..5_000 {
            // random stiffness until ω leaves through the bottom, then λ_min
            let lambda = if below {
                limits.lambda_min
            } else {
                rng.random_range(limits.lambda_min..=limits.lambda_max)
            };
            let f = |w: f64| riccati_rate(w, lambda);
            let k1 = f(omega);
            let k2 = f(omega + 0.5 * h * k1);
            let k3 = f(omega + 0.5 * h * k2);
            let k4 = f(omega + h * k3);
            omega += h / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
            if !below && omega < limits.omega_min {
                below = true;
                crossed += 1;
            } else if below && omega >= limits.omega_min {
                reentered += 1;
                break;
            }
            if omega > limits.omega_max {
                break;
            }
        }
    }
    verdict(
        crossed > 0 && reentered == 0,
        format!("{crossed}/{trials} trajectories crossed below ω_min, {reentered} re-entered"),
    )
}

fn admittance_direction() -> Verdict {
    let geometry = Scenario::fig2().geometry().unwrap();
    let setup = VerticalPushSetup::default();
    let samples = simulate_vertical_push(&setup, &geometry).unwrap();
    let during: Vec<_> = samples.iter().filter(|s| s.pushing).collect();
    let stiffer = during.iter().all(|s| s.lambda_measured > s.lambda_commanded);
    let descending = during.windows(2).skip(1).all(|w| w[1].com_height < w[0].com_height);
    let stiff = VerticalPushSetup {
        gain: 0.0,
        ..setup
    };
    let passthrough = simulate_vertical_push(&stiff, &geometry)
        .unwrap()
        .iter()
        .all(|s| s.com_height == setup.com_height);
    let drop = setup.com_height - during.last().map_or(setup.com_height, |s| s.com_height);
    verdict(
        stiffer && descending && passthrough && drop > 0.0,
        format!(
            "λ_measured > λ_d: {stiffer}, monotone descent: {descending} ({:.1} mm), A_z = 0 stiff: {passthrough}",
            1e3 * drop
        ),
    )
}

type Criterion = (&'static str, fn() -> Verdict);

fn main() -> ExitCode {
    let criteria: [Criterion; 10] = [
        ("controller coincidence", controller_coincidence),
        ("omega jump", omega_jump),
        ("height strategy magnitude", height_strategy),
        ("large-impulse separation", threshold_separation),
        ("saturation ceiling", saturation_ceiling),
        ("QP latency", qp_latency),
        ("QP oracle equivalence", oracle_equivalence),
        ("pole-placement decay", pole_placement_decay),
        ("Riccati viability", riccati_viability),
        ("vertical admittance direction", admittance_direction),
    ];
    let mut failures = 0;
    for (i, (name, check)) in criteria.iter().enumerate() {
        let v = check();
        let status = if v.pass { "PASS" } else { "FAIL" };
        println!("[{status}] {:>2}. {name}: {}", i + 1, v.detail);
        if !v.pass {
            failures += 1;
        }
    }
    println!("{} of {} acceptance criteria passed", criteria.len() - failures, criteria.len());
    if failures == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
