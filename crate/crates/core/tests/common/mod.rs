#![allow(dead_code)]

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use vhip::qp::QpProblem;

pub const N: usize = 10;
pub const P: usize = 7;

/// Brute-force reference: solves the equality-constrained KKT system for every
/// subset of inequalities and keeps the best primal-feasible point.
pub struct Oracle {
    pub x: DVector<f64>,
    pub objective: f64,
}

pub fn enumerate_active_sets(problem: &QpProblem) -> Option<Oracle> {
    let n = problem.w.nrows();
    let p = problem.a.nrows();
    let m = problem.g.nrows();
    let mut best: Option<Oracle> = None;
    for mask in 0u32..(1 << m) {
        let rows: Vec<usize> = (0..m).filter(|i| mask & (1 << i) != 0).collect();
        let k = p + rows.len();
        if k > n {
            continue;
        }
        let mut kkt = DMatrix::zeros(n + k, n + k);
        let mut rhs = DVector::zeros(n + k);
        kkt.view_mut((0, 0), (n, n)).copy_from(&(2.0 * &problem.w));
        for i in 0..p {
            for j in 0..n {
                kkt[(n + i, j)] = problem.a[(i, j)];
                kkt[(j, n + i)] = problem.a[(i, j)];
            }
            rhs[n + i] = problem.b[i];
        }
        for (r, &row) in rows.iter().enumerate() {
            for j in 0..n {
                kkt[(n + p + r, j)] = problem.g[(row, j)];
                kkt[(j, n + p + r)] = problem.g[(row, j)];
            }
            rhs[n + p + r] = problem.h[row];
        }
        let svd = kkt.clone().svd(false, false);
        let smallest = svd.singular_values.min();
        if smallest < 1e-10 * svd.singular_values.max().max(1.0) {
            continue;
        }
        let Some(sol) = kkt.lu().solve(&rhs) else {
            continue;
        };
        let x = sol.rows(0, n).into_owned();
        let slack = &problem.g * &x - &problem.h;
        if slack.iter().any(|&s| s > 1e-9) {
            continue;
        }
        if (&problem.a * &x - &problem.b).amax() > 1e-9 {
            continue;
        }
        let objective = problem.objective(&x);
        if best.as_ref().is_none_or(|b| objective < b.objective) {
            best = Some(Oracle { x, objective });
        }
    }
    best
}

/// Random feasible problem with the controller's dimensions.
///
/// The cost mixes unit and `1e-6` diagonal weights like the VHIP QP; the
/// constraints are built around a known feasible point, some of them tight.
pub fn random_problem(rng: &mut ChaCha8Rng, m: usize) -> QpProblem {
    let mut w = DMatrix::zeros(N, N);
    for i in 0..N {
        w[(i, i)] = if rng.random_bool(0.3) { 1e-6 } else { rng.random_range(0.1..2.0) };
    }
    if rng.random_bool(0.5) {
        let l = DMatrix::from_fn(N, N, |_, _| rng.random_range(-0.3..0.3));
        w += &l * l.transpose();
    }
    let a = DMatrix::from_fn(P, N, |_, _| rng.random_range(-1.0..1.0));
    let feasible = DVector::from_fn(N, |_, _| rng.random_range(-1.0..1.0));
    let b = &a * &feasible;
    let g = DMatrix::from_fn(m, N, |_, _| rng.random_range(-1.0..1.0));
    let h = &g * &feasible + DVector::from_fn(m, |_, _| if rng.random_bool(0.2) { 0.0 } else { rng.random_range(0.0..0.5) });
    QpProblem::new(w, a, b, g, h).expect("consistent dimensions")
}

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}
