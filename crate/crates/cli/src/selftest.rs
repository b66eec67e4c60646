use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use vhip::qp::{kkt_residuals, ActiveSetSolver, QpProblem};
use vhip::{run_scenario, ControllerRegistry, Outcome, Scenario};

#[derive(Debug, Clone)]
pub struct Check {
    pub name: &'static str,
    pub passed: bool,
    pub detail: String,
}

/// Random convex QP with ten variables, seven equalities and `m`
/// inequalities, feasible by construction.
pub fn random_qp(rng: &mut ChaCha8Rng, m: usize) -> QpProblem {
    const N: usize = 10;
    const P: usize = 7;
    let mut w = DMatrix::zeros(N, N);
    for i in 0..N {
        w[(i, i)] = if rng.random_bool(0.3) { 1e-6 } else { rng.random_range(0.1..2.0) };
    }
    let l = DMatrix::from_fn(N, N, |_, _| rng.random_range(-0.3..0.3));
    w += &l * l.transpose();
    let a = DMatrix::from_fn(P, N, |_, _| rng.random_range(-1.0..1.0));
    let feasible = DVector::from_fn(N, |_, _| rng.random_range(-1.0..1.0));
    let b = &a * &feasible;
    let g = DMatrix::from_fn(m, N, |_, _| rng.random_range(-1.0..1.0));
    let slack = DVector::from_fn(m, |_, _| if rng.random_bool(0.2) { 0.0 } else { rng.random_range(0.0..0.5) });
    let h = &g * &feasible + slack;
    QpProblem::new(w, a, b, g, h).expect("consistent dimensions")
}

fn qp_check(seed: u64) -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut solver = ActiveSetSolver::default();
    let mut worst: f64 = 0.0;
    let mut failures = 0;
    let trials = 200;
    for _ in 0..trials {
        let m = rng.random_range(0..=10);
        let problem = random_qp(&mut rng, m);
        let ok = solver.solve(&problem).ok().and_then(|sol| {
            let residual = kkt_residuals(&problem, &sol).ok()?.max();
            let dual_ok = sol.dual_ineq.iter().all(|&mu| mu >= -1e-9);
            Some((residual, dual_ok))
        });
        match ok {
            Some((residual, true)) if residual < 1e-6 => worst = worst.max(residual),
            _ => failures += 1,
        }
    }
    Check {
        name: "qp kkt",
        passed: failures == 0,
        detail: format!("{}/{trials} problems solved, worst residual {worst:.1e}", trials - failures),
    }
}

fn coincidence_check(registry: &ControllerRegistry) -> Check {
    let mut scenario = Scenario::fig2().with_impulse(1.5);
    scenario.duration = 5.0;
    let runs = ["fip", "vhip"].map(|name| run_scenario(&scenario.clone().with_controller(name), registry));
    let [Ok(fip), Ok(vhip)] = runs else {
        return Check {
            name: "small push coincidence",
            passed: false,
            detail: "simulation error".into(),
        };
    };
    let gap = fip
        .samples
        .iter()
        .zip(&vhip.samples)
        .map(|(a, b)| (a.z - b.z).norm())
        .fold(0.0, f64::max);
    Check {
        name: "small push coincidence",
        passed: gap < 1e-3,
        detail: format!("max ZMP gap {gap:.2e} m"),
    }
}

fn recovery_check(registry: &ControllerRegistry) -> Check {
    let outcome = |name: &str| {
        run_scenario(&Scenario::fig2().with_controller(name).with_impulse(5.7), registry).map(|t| t.outcome())
    };
    let (fip, vhip) = (outcome("fip"), outcome("vhip"));
    let passed = matches!(fip, Ok(o) if o != Outcome::Recovered) && matches!(vhip, Ok(Outcome::Recovered));
    let show = |r: &Result<Outcome, _>| r.as_ref().map(|o| o.as_str()).unwrap_or("error");
    Check {
        name: "large push recovery",
        passed,
        detail: format!("5.7 N·s: fip {}, vhip {}", show(&fip), show(&vhip)),
    }
}

pub fn run(seed: u64, registry: &ControllerRegistry) -> Vec<Check> {
    vec![qp_check(seed), coincidence_check(registry), recovery_check(registry)]
}
