//! Dense strictly convex quadratic programs.
//!
//! ```text
//!     minimize     x' W x
//!     subject to   A x  = b
//!                  G x <= h
//! ```
//!
//! Solved by a primal active-set method: every iteration solves the
//! equality-constrained subproblem on the working set through its full KKT
//! system. A feasible starting point comes from a proximal phase 1 on the
//! elastic problem `min t²` with `G x − t ≤ h`, `t ≥ 0`, which also detects
//! infeasible constraint sets.

use nalgebra::{DMatrix, DVector};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum QpError {
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error("cost matrix is not symmetric (asymmetry {0:e})")]
    NotSymmetric(f64),
    #[error("cost matrix is not positive definite")]
    NotPositiveDefinite,
    #[error("equality constraints are rank deficient (rank {rank} < {rows})")]
    RankDeficient { rank: usize, rows: usize },
    #[error("problem data contains non-finite values")]
    NonFinite,
    #[error("solution status is {0:?}, KKT residuals are undefined")]
    NotSolved(QpStatus),
}

#[derive(Debug, Clone, PartialEq)]
pub struct QpProblem {
    pub w: DMatrix<f64>,
    pub a: DMatrix<f64>,
    pub b: DVector<f64>,
    pub g: DMatrix<f64>,
    pub h: DVector<f64>,
}

impl QpProblem {
    pub fn new(
        w: DMatrix<f64>,
        a: DMatrix<f64>,
        b: DVector<f64>,
        g: DMatrix<f64>,
        h: DVector<f64>,
    ) -> Result<Self, QpError> {
        let problem = Self { w, a, b, g, h };
        problem.check_dimensions()?;
        Ok(problem)
    }

    /// Problem without constraints.
    pub fn unconstrained(w: DMatrix<f64>) -> Result<Self, QpError> {
        let n = w.ncols();
        Self::new(
            w,
            DMatrix::zeros(0, n),
            DVector::zeros(0),
            DMatrix::zeros(0, n),
            DVector::zeros(0),
        )
    }

    pub fn num_variables(&self) -> usize {
        self.w.ncols()
    }

    pub fn num_equalities(&self) -> usize {
        self.a.nrows()
    }

    pub fn num_inequalities(&self) -> usize {
        self.g.nrows()
    }

    pub fn objective(&self, x: &DVector<f64>) -> f64 {
        x.dot(&(&self.w * x))
    }

    fn check_dimensions(&self) -> Result<(), QpError> {
        let n = self.w.ncols();
        let mismatch = |what: String| Err(QpError::DimensionMismatch(what));
        if self.w.nrows() != n {
            return mismatch(format!("W is {}x{}", self.w.nrows(), n));
        }
        if self.a.ncols() != n || self.a.nrows() != self.b.len() {
            return mismatch(format!(
                "A is {}x{} and b has {} rows for {n} variables",
                self.a.nrows(),
                self.a.ncols(),
                self.b.len()
            ));
        }
        if self.g.ncols() != n || self.g.nrows() != self.h.len() {
            return mismatch(format!(
                "G is {}x{} and h has {} rows for {n} variables",
                self.g.nrows(),
                self.g.ncols(),
                self.h.len()
            ));
        }
        if self.a.nrows() > n {
            return mismatch(format!("{} equalities for {n} variables", self.a.nrows()));
        }
        Ok(())
    }

    /// Checks every precondition of [`ActiveSetSolver::solve`].
    pub fn validate(&self) -> Result<(), QpError> {
        self.check_dimensions()?;
        let all = self
            .w
            .iter()
            .chain(self.a.iter())
            .chain(self.b.iter())
            .chain(self.g.iter())
            .chain(self.h.iter());
        if !all.clone().all(|v| v.is_finite()) {
            return Err(QpError::NonFinite);
        }
        let asymmetry = (&self.w - self.w.transpose()).amax();
        if asymmetry > 1e-12 * self.w.amax().max(1.0) {
            return Err(QpError::NotSymmetric(asymmetry));
        }
        if self.w.clone().cholesky().is_none() {
            return Err(QpError::NotPositiveDefinite);
        }
        let rows = self.a.nrows();
        if rows > 0 {
            let scale = self.a.amax().max(1.0);
            let rank = self.a.rank(1e-10 * scale);
            if rank < rows {
                return Err(QpError::RankDeficient { rank, rows });
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum QpStatus {
    Solved,
    Infeasible,
    MaxIterations,
}

#[derive(Debug, Clone, PartialEq)]
pub struct QpSolution {
    pub x: DVector<f64>,
    /// Inequalities in the final working set, sorted.
    pub active_set: Vec<usize>,
    pub dual_eq: DVector<f64>,
    /// One multiplier per inequality, zero for inactive rows.
    pub dual_ineq: DVector<f64>,
    pub status: QpStatus,
    pub iterations: usize,
}

impl QpSolution {
    pub fn is_solved(&self) -> bool {
        self.status == QpStatus::Solved
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QpSettings {
    pub feasibility_tol: f64,
    pub stationarity_tol: f64,
    pub max_iterations: usize,
}

impl Default for QpSettings {
    fn default() -> Self {
        Self {
            feasibility_tol: 1e-9,
            stationarity_tol: 1e-8,
            max_iterations: 50,
        }
    }
}

/// Weight of the proximal term in phase 1.
const PROX_WEIGHT: f64 = 1e-6;
const MAX_PROX_ROUNDS: usize = 12;

/// Active-set solver holding per-solve scratch state.
///
/// One instance serves one solve at a time; create one per thread.
#[derive(Debug, Clone, Default)]
pub struct ActiveSetSolver {
    pub settings: QpSettings,
    last_iterations: usize,
}

impl ActiveSetSolver {
    pub fn new(settings: QpSettings) -> Self {
        Self {
            settings,
            last_iterations: 0,
        }
    }

    /// Iterations spent by the last solve, phase 1 included.
    pub fn last_iterations(&self) -> usize {
        self.last_iterations
    }

    pub fn solve(&mut self, problem: &QpProblem) -> Result<QpSolution, QpError> {
        self.solve_warm(problem, &[])
    }

    /// Solves starting from a guess of the active set. The guess is dropped
    /// when the point it defines is infeasible, so it only affects the
    /// iteration count.
    pub fn solve_warm(&mut self, problem: &QpProblem, guess: &[usize]) -> Result<QpSolution, QpError> {
        problem.validate()?;
        let n = problem.num_variables();
        let m = problem.num_inequalities();
        let tol = self.settings.feasibility_tol;
        let p = 2.0 * &problem.w;
        let q = DVector::zeros(n);
        let engine = Engine {
            p: &p,
            q: &q,
            a: &problem.a,
            b: &problem.b,
            g: &problem.g,
            h: &problem.h,
            settings: self.settings,
        };

        let mut iterations = 0;
        let start = self.warm_start(&engine, guess);
        let (x0, working) = match start {
            Some(start) => start,
            None => match phase_one(problem, self.settings, &mut iterations) {
                PhaseOne::Feasible(x) => (x, Vec::new()),
                PhaseOne::Infeasible(x) => {
                    self.last_iterations = iterations;
                    return Ok(QpSolution {
                        x,
                        active_set: Vec::new(),
                        dual_eq: DVector::zeros(problem.num_equalities()),
                        dual_ineq: DVector::zeros(m),
                        status: QpStatus::Infeasible,
                        iterations,
                    });
                }
                PhaseOne::Stalled(x) => {
                    self.last_iterations = iterations;
                    return Ok(QpSolution {
                        x,
                        active_set: Vec::new(),
                        dual_eq: DVector::zeros(problem.num_equalities()),
                        dual_ineq: DVector::zeros(m),
                        status: QpStatus::MaxIterations,
                        iterations,
                    });
                }
            },
        };

        let run = engine.run(x0, working);
        iterations += run.iterations;
        self.last_iterations = iterations;
        let mut dual_ineq = DVector::zeros(m);
        for (&i, &mu) in run.working.iter().zip(run.mu.iter()) {
            dual_ineq[i] = mu;
        }
        let mut active_set = run.working;
        active_set.sort_unstable();
        let feasible = max_violation(&problem.g, &problem.h, &run.x) <= tol
            && (&problem.a * &run.x - &problem.b).amax() <= tol.max(1e-12 * problem.b.amax());
        let status = if run.converged && feasible {
            QpStatus::Solved
        } else {
            QpStatus::MaxIterations
        };
        Ok(QpSolution {
            x: run.x,
            active_set,
            dual_eq: run.lambda,
            dual_ineq,
            status,
            iterations,
        })
    }

    fn warm_start(&self, engine: &Engine<'_>, guess: &[usize]) -> Option<(DVector<f64>, Vec<usize>)> {
        if guess.is_empty() {
            return None;
        }
        let mut working: Vec<usize> = guess.iter().copied().filter(|&i| i < engine.g.nrows()).collect();
        working.sort_unstable();
        working.dedup();
        if working.is_empty() {
            return None;
        }
        let n = engine.p.nrows();
        let rows = engine.a.nrows() + working.len();
        if rows > n {
            return None;
        }
        let mut stacked = DMatrix::zeros(rows, n);
        stacked.view_mut((0, 0), (engine.a.nrows(), n)).copy_from(engine.a);
        for (j, &i) in working.iter().enumerate() {
            stacked.row_mut(engine.a.nrows() + j).copy_from(&engine.g.row(i));
        }
        if stacked.rank(1e-10 * stacked.amax().max(1.0)) < rows {
            return None;
        }
        let (y, _, _) = engine.subproblem(&working)?;
        if max_violation(engine.g, engine.h, &y) <= self.settings.feasibility_tol {
            Some((y, working))
        } else {
            None
        }
    }
}

/// Convenience wrapper with default settings.
pub fn solve(problem: &QpProblem) -> Result<QpSolution, QpError> {
    ActiveSetSolver::default().solve(problem)
}

fn max_violation(g: &DMatrix<f64>, h: &DVector<f64>, x: &DVector<f64>) -> f64 {
    if h.is_empty() {
        return f64::NEG_INFINITY;
    }
    (g * x - h).max()
}

/// `min ½ y'Py + q'y` subject to `A y = b`, `G y ≤ h`.
struct Engine<'a> {
    p: &'a DMatrix<f64>,
    q: &'a DVector<f64>,
    a: &'a DMatrix<f64>,
    b: &'a DVector<f64>,
    g: &'a DMatrix<f64>,
    h: &'a DVector<f64>,
    settings: QpSettings,
}

struct EngineRun {
    x: DVector<f64>,
    working: Vec<usize>,
    mu: Vec<f64>,
    lambda: DVector<f64>,
    iterations: usize,
    converged: bool,
}

impl Engine<'_> {
    /// Minimizer of the objective with the working set held as equalities.
    fn subproblem(&self, working: &[usize]) -> Option<(DVector<f64>, DVector<f64>, Vec<f64>)> {
        let n = self.p.nrows();
        let pe = self.a.nrows();
        let k = n + pe + working.len();
        let mut kkt = DMatrix::zeros(k, k);
        let mut rhs = DVector::zeros(k);
        kkt.view_mut((0, 0), (n, n)).copy_from(self.p);
        rhs.rows_mut(0, n).copy_from(&(-self.q));
        if pe > 0 {
            kkt.view_mut((n, 0), (pe, n)).copy_from(self.a);
            kkt.view_mut((0, n), (n, pe)).copy_from(&self.a.transpose());
            rhs.rows_mut(n, pe).copy_from(self.b);
        }
        for (j, &i) in working.iter().enumerate() {
            let row = self.g.row(i);
            let r = n + pe + j;
            for c in 0..n {
                kkt[(r, c)] = row[c];
                kkt[(c, r)] = row[c];
            }
            rhs[r] = self.h[i];
        }
        let sol = kkt.lu().solve(&rhs)?;
        if !sol.iter().all(|v| v.is_finite()) {
            return None;
        }
        let y = sol.rows(0, n).into_owned();
        let lambda = sol.rows(n, pe).into_owned();
        let mu = sol.rows(n + pe, working.len()).iter().copied().collect();
        Some((y, lambda, mu))
    }

    fn run(&self, mut x: DVector<f64>, mut working: Vec<usize>) -> EngineRun {
        let m = self.g.nrows();
        let dual_tol = self.settings.stationarity_tol;
        let mut iterations = 0;
        let mut last = (DVector::zeros(self.a.nrows()), Vec::new());
        while iterations < self.settings.max_iterations {
            iterations += 1;
            let Some((y, lambda, mu)) = self.subproblem(&working) else {
                // Dependent working set: drop the latest addition and retry.
                if working.pop().is_some() {
                    continue;
                }
                break;
            };
            let step = &y - &x;
            let step_tol = 1e-12 * (1.0 + x.amax());
            if step.amax() <= step_tol {
                x = y;
                // Most negative multiplier leaves; ties go to the lowest index.
                let leaving = working
                    .iter()
                    .zip(mu.iter())
                    .enumerate()
                    .filter(|(_, (_, &mu))| mu < -dual_tol)
                    .min_by(|(_, (ia, ma)), (_, (ib, mb))| ma.total_cmp(mb).then(ia.cmp(ib)))
                    .map(|(pos, _)| pos);
                match leaving {
                    Some(pos) => {
                        working.remove(pos);
                        continue;
                    }
                    None => {
                        return EngineRun {
                            x,
                            working,
                            mu,
                            lambda,
                            iterations,
                            converged: true,
                        };
                    }
                }
            }
            last = (lambda, mu);
            let step_norm = step.norm();
            let mut alpha = 1.0;
            let mut blocking = None;
            for i in 0..m {
                if working.contains(&i) {
                    continue;
                }
                let row = self.g.row(i);
                let rate = row.dot(&step.transpose());
                if rate <= 1e-12 * row.norm() * step_norm {
                    continue;
                }
                let slack = (self.h[i] - row.dot(&x.transpose())).max(0.0);
                let ratio = slack / rate;
                if ratio < alpha {
                    alpha = ratio;
                    blocking = Some(i);
                }
            }
            x += alpha * &step;
            if let Some(i) = blocking {
                working.push(i);
            }
        }
        EngineRun {
            x,
            working,
            mu: last.1,
            lambda: last.0,
            iterations,
            converged: false,
        }
    }
}

enum PhaseOne {
    Feasible(DVector<f64>),
    Infeasible(DVector<f64>),
    Stalled(DVector<f64>),
}

/// Finds a feasible point by proximal minimization of the elastic slack `t`.
fn phase_one(problem: &QpProblem, settings: QpSettings, iterations: &mut usize) -> PhaseOne {
    let n = problem.num_variables();
    let m = problem.num_inequalities();
    let pe = problem.num_equalities();
    let tol = settings.feasibility_tol;

    // least-norm solution of A x = b
    let mut x = if pe > 0 {
        let aat = &problem.a * problem.a.transpose();
        match aat.cholesky() {
            Some(chol) => problem.a.transpose() * chol.solve(&problem.b),
            None => return PhaseOne::Stalled(DVector::zeros(n)),
        }
    } else {
        DVector::zeros(n)
    };
    let mut violation = max_violation(&problem.g, &problem.h, &x);
    if violation <= tol {
        return PhaseOne::Feasible(x);
    }

    let mut p1 = DMatrix::zeros(n + 1, n + 1);
    for i in 0..n {
        p1[(i, i)] = PROX_WEIGHT;
    }
    p1[(n, n)] = 1.0;
    let mut a1 = DMatrix::zeros(pe, n + 1);
    a1.view_mut((0, 0), (pe, n)).copy_from(&problem.a);
    let mut g1 = DMatrix::zeros(m + 1, n + 1);
    g1.view_mut((0, 0), (m, n)).copy_from(&problem.g);
    for i in 0..m {
        g1[(i, n)] = -1.0;
    }
    g1[(m, n)] = -1.0;
    let mut h1 = DVector::zeros(m + 1);
    h1.rows_mut(0, m).copy_from(&problem.h);

    let mut working = Vec::new();
    for _ in 0..MAX_PROX_ROUNDS {
        let mut q1 = DVector::zeros(n + 1);
        q1.rows_mut(0, n).copy_from(&(-PROX_WEIGHT * &x));
        let engine = Engine {
            p: &p1,
            q: &q1,
            a: &a1,
            b: &problem.b,
            g: &g1,
            h: &h1,
            settings,
        };
        let mut start = DVector::zeros(n + 1);
        start.rows_mut(0, n).copy_from(&x);
        start[n] = violation.max(0.0);
        // keep only rows still tight at the new start
        working.retain(|&i: &usize| {
            let r = g1.row(i).dot(&start.transpose()) - h1[i];
            r.abs() <= 1e-12 * (1.0 + h1[i].abs())
        });
        let run = engine.run(start, std::mem::take(&mut working));
        *iterations += run.iterations;
        if !run.converged {
            return PhaseOne::Stalled(run.x.rows(0, n).into_owned());
        }
        let next = run.x.rows(0, n).into_owned();
        let next_violation = max_violation(&problem.g, &problem.h, &next);
        if next_violation <= tol {
            return PhaseOne::Feasible(next);
        }
        if next_violation > 0.5 * violation {
            return PhaseOne::Infeasible(next);
        }
        x = next;
        violation = next_violation;
        working = run.working;
    }
    PhaseOne::Stalled(x)
}

/// Infinity norms of the KKT residuals of a solved problem.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KktResiduals {
    pub stationarity: f64,
    pub primal_eq: f64,
    pub primal_ineq: f64,
    pub complementarity: f64,
}

impl KktResiduals {
    pub fn max(&self) -> f64 {
        self.stationarity
            .max(self.primal_eq)
            .max(self.primal_ineq)
            .max(self.complementarity)
    }
}

pub fn kkt_residuals(problem: &QpProblem, solution: &QpSolution) -> Result<KktResiduals, QpError> {
    if solution.status != QpStatus::Solved {
        return Err(QpError::NotSolved(solution.status));
    }
    let x = &solution.x;
    let grad = 2.0 * &problem.w * x
        + problem.a.transpose() * &solution.dual_eq
        + problem.g.transpose() * &solution.dual_ineq;
    let slack = &problem.g * x - &problem.h;
    let primal_ineq = slack.iter().fold(0.0_f64, |acc, &s| acc.max(s));
    let complementarity = slack
        .iter()
        .zip(solution.dual_ineq.iter())
        .fold(0.0_f64, |acc, (s, mu)| acc.max((s * mu).abs()));
    Ok(KktResiduals {
        stationarity: grad.amax(),
        primal_eq: (&problem.a * x - &problem.b).amax(),
        primal_ineq,
        complementarity,
    })
}
