mod common;

use nalgebra::{DMatrix, DVector};
use proptest::prelude::*;
use rand::Rng;
use vhip::qp::{kkt_residuals, solve, ActiveSetSolver, QpProblem, QpSettings, QpStatus};

use common::{enumerate_active_sets, random_problem, rng};

#[test]
fn matches_enumeration_oracle_on_random_problems() {
    let mut rng = rng(2024);
    let mut compared = 0;
    for _ in 0..1200 {
        let m = rng.random_range(0..=10);
        let problem = random_problem(&mut rng, m);
        let oracle = enumerate_active_sets(&problem).expect("feasible by construction");
        let solution = solve(&problem).unwrap();
        assert_eq!(solution.status, QpStatus::Solved);
        let gap = (problem.objective(&solution.x) - oracle.objective).abs();
        assert!(
            gap <= 1e-6 * oracle.objective.abs().max(1.0),
            "objective {} vs oracle {}",
            problem.objective(&solution.x),
            oracle.objective
        );
        assert!((&solution.x - &oracle.x).amax() <= 1e-5, "{} vs {}", solution.x, oracle.x);
        compared += 1;
    }
    assert!(compared >= 1000);
}

#[test]
fn kkt_conditions_hold_at_solution() {
    let mut rng = rng(7);
    for _ in 0..200 {
        let problem = random_problem(&mut rng, 10);
        let solution = solve(&problem).unwrap();
        let r = kkt_residuals(&problem, &solution).unwrap();
        assert!(r.primal_eq <= 1e-9 && r.primal_ineq <= 1e-9, "{r:?}");
        assert!(r.stationarity <= 1e-8, "{r:?}");
        assert!(solution.dual_ineq.iter().all(|&mu| mu >= -1e-12));
    }
}

#[test]
fn inconsistent_bounds_are_infeasible() {
    let mut rng = rng(11);
    for _ in 0..50 {
        let mut problem = random_problem(&mut rng, 8);
        // row 0 and its negation with a gap between them
        let row = problem.g.row(0).into_owned();
        problem.g.set_row(1, &(-&row));
        problem.h[1] = -problem.h[0] - 0.1;
        assert_eq!(solve(&problem).unwrap().status, QpStatus::Infeasible);
    }
}

#[test]
fn stationarity_grows_linearly_off_optimum() {
    let problem = random_problem(&mut rng(5), 0);
    let solution = solve(&problem).unwrap();
    let direction = DVector::from_fn(10, |i, _| if i % 2 == 0 { 1.0 } else { -1.0 });
    let residual = |scale: f64| {
        let mut moved = solution.clone();
        moved.x += scale * &direction;
        kkt_residuals(&problem, &moved).unwrap().stationarity
    };
    let ratio = residual(2e-3) / residual(1e-3);
    assert!((ratio - 2.0).abs() < 0.05, "ratio {ratio}");
}

#[test]
fn max_iterations_reported() {
    let problem = random_problem(&mut rng(3), 10);
    let mut solver = ActiveSetSolver::new(QpSettings {
        max_iterations: 0,
        ..QpSettings::default()
    });
    let solution = solver.solve(&problem).unwrap();
    let full = solve(&problem).unwrap();
    if full.iterations > 0 {
        assert_eq!(solution.status, QpStatus::MaxIterations);
    }
}

fn problem_strategy() -> impl Strategy<Value = QpProblem> {
    (any::<u64>(), 0usize..=10).prop_map(|(seed, m)| random_problem(&mut rng(seed), m))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    #[test]
    fn solve_is_deterministic(problem in problem_strategy()) {
        let first = solve(&problem).unwrap();
        let second = solve(&problem).unwrap();
        prop_assert_eq!(first, second);
    }

    #[test]
    fn warm_start_keeps_optimum(problem in problem_strategy(), guess in proptest::collection::vec(0usize..12, 0..6)) {
        let cold = solve(&problem).unwrap();
        let mut solver = ActiveSetSolver::default();
        let warm = solver.solve_warm(&problem, &guess).unwrap();
        prop_assert_eq!(warm.status, cold.status);
        prop_assert!((&warm.x - &cold.x).amax() <= 1e-8);
        let from_optimum = solver.solve_warm(&problem, &cold.active_set).unwrap();
        prop_assert!((&from_optimum.x - &cold.x).amax() <= 1e-8);
        prop_assert!(from_optimum.iterations <= cold.iterations);
    }

    #[test]
    fn scaling_cost_keeps_minimizer(problem in problem_strategy(), scale in 0.1f64..10.0) {
        let scaled = QpProblem::new(scale * &problem.w, problem.a.clone(), problem.b.clone(), problem.g.clone(), problem.h.clone()).unwrap();
        let a = solve(&problem).unwrap();
        let b = solve(&scaled).unwrap();
        prop_assert!((&a.x - &b.x).amax() <= 1e-6);
    }
}

#[test]
fn rejects_bad_problems() {
    let w = DMatrix::<f64>::identity(3, 3);
    let a = DMatrix::from_row_slice(2, 3, &[1.0, 1.0, 0.0, 2.0, 2.0, 0.0]);
    let problem = QpProblem::new(w.clone(), a, DVector::from_vec(vec![1.0, 2.0]), DMatrix::zeros(0, 3), DVector::zeros(0)).unwrap();
    assert!(solve(&problem).is_err());
    let mut nan = QpProblem::unconstrained(w).unwrap();
    nan.w[(0, 0)] = f64::NAN;
    assert!(solve(&nan).is_err());
}
