//! Convex quadratic programs with nonnegativity bounds and linear inequality
//! rows:
//!
//! ```text
//! minimize ½ θᵀQθ − cᵀθ   subject to   θ ≥ 0,  Aθ ≤ b
//! ```
//!
//! Solved with a primal active-set method. The working set indexes bounds
//! first (`0..P`) and general rows after them (`P..P+r`); ties in both the
//! leaving and the blocking rule go to the lowest index.

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Relative tolerance on the scaled KKT residual of a returned solution.
pub const KKT_TOL: f64 = 1e-8;

#[derive(Debug, Clone, PartialEq)]
pub struct QpProblem {
    pub q: DMatrix<f64>,
    pub c: DVector<f64>,
    /// `r × P` inequality rows.
    pub a: DMatrix<f64>,
    pub b: DVector<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ActiveConstraint {
    Bound(usize),
    Row(usize),
}

#[derive(Debug, Clone, PartialEq)]
pub struct QpSolution {
    pub theta: DVector<f64>,
    pub objective: f64,
    pub kkt_residual: f64,
    /// Multipliers of the general rows.
    pub row_multipliers: DVector<f64>,
    /// Multipliers of the bounds `θ ≥ 0`.
    pub bound_multipliers: DVector<f64>,
    pub active_set: Vec<ActiveConstraint>,
    pub iterations: usize,
    /// Whether a Tikhonov bump was needed on a singular reduced Hessian.
    pub regularized: bool,
}

impl QpProblem {
    pub fn new(q: DMatrix<f64>, c: DVector<f64>, a: DMatrix<f64>, b: DVector<f64>) -> Result<Self> {
        let p = c.len();
        if q.shape() != (p, p) {
            return Err(Error::InvalidInput(format!("Q is {:?}, expected {p}×{p}", q.shape())));
        }
        if a.ncols() != p && a.nrows() > 0 {
            return Err(Error::InvalidInput(format!(
                "A has {} columns, expected {p}",
                a.ncols()
            )));
        }
        if a.nrows() != b.len() {
            return Err(Error::InvalidInput(format!(
                "A has {} rows but b has {}",
                a.nrows(),
                b.len()
            )));
        }
        let all_finite = q
            .iter()
            .chain(c.iter())
            .chain(a.iter())
            .chain(b.iter())
            .all(|v| v.is_finite());
        if !all_finite {
            return Err(Error::InvalidInput("QP data contains non-finite values".into()));
        }
        let asym = (&q - q.transpose()).amax();
        if asym > 1e-10 * q.amax().max(1.0) {
            return Err(Error::InvalidInput(format!(
                "Q is not symmetric (max asymmetry {asym:e})"
            )));
        }
        let a = if a.nrows() == 0 { DMatrix::zeros(0, p) } else { a };
        Ok(QpProblem { q, c, a, b })
    }

    pub fn n_vars(&self) -> usize {
        self.c.len()
    }

    pub fn n_rows(&self) -> usize {
        self.a.nrows()
    }

    pub fn objective(&self, theta: &DVector<f64>) -> f64 {
        0.5 * theta.dot(&(&self.q * theta)) - self.c.dot(theta)
    }

    /// Scale applied to KKT residuals.
    pub fn residual_scale(&self, theta: &DVector<f64>) -> f64 {
        let qinf = (0..self.n_vars())
            .map(|i| self.q.row(i).iter().map(|v| v.abs()).sum::<f64>())
            .fold(0.0, f64::max);
        1f64.max(qinf * theta.amax().max(1.0)).max(self.c.amax())
    }

    /// Largest violation of `θ ≥ 0` and `Aθ ≤ b`.
    pub fn infeasibility(&self, theta: &DVector<f64>) -> f64 {
        let bounds = theta.iter().map(|t| (-t).max(0.0)).fold(0.0, f64::max);
        let rows = (&self.a * theta - &self.b)
            .iter()
            .map(|v| v.max(0.0))
            .fold(0.0, f64::max);
        bounds.max(rows)
    }
}

/// Scaled KKT residual of `(θ, μ, ν)`: stationarity, primal and dual
/// feasibility and complementarity, divided by
/// `max(1, ‖Q‖∞ max(1, ‖θ‖∞), ‖c‖∞)`.
pub fn kkt_residual(problem: &QpProblem, theta: &DVector<f64>, mu: &DVector<f64>, nu: &DVector<f64>) -> f64 {
    let grad = &problem.q * theta - &problem.c + problem.a.transpose() * mu - nu;
    let slack = &problem.a * theta - &problem.b;
    let stationarity = grad.amax();
    let primal = problem.infeasibility(theta);
    let dual = mu.iter().chain(nu.iter()).map(|v| (-v).max(0.0)).fold(0.0, f64::max);
    let comp_rows = mu
        .iter()
        .zip(slack.iter())
        .map(|(m, s)| (m * s).abs())
        .fold(0.0, f64::max);
    let comp_bounds = nu
        .iter()
        .zip(theta.iter())
        .map(|(n, t)| (n * t).abs())
        .fold(0.0, f64::max);
    let worst = stationarity.max(primal).max(dual).max(comp_rows).max(comp_bounds);
    worst / problem.residual_scale(theta)
}

/// Solves from `θ = 0`, which must be feasible (`b ≥ 0`).
pub fn solve(problem: &QpProblem) -> Result<QpSolution> {
    solve_warm(problem, &DVector::zeros(problem.n_vars()))
}

/// Solves from a feasible starting point `theta0`.
pub fn solve_warm(problem: &QpProblem, theta0: &DVector<f64>) -> Result<QpSolution> {
    let p = problem.n_vars();
    if theta0.len() != p {
        return Err(Error::InvalidInput(format!(
            "start has length {}, expected {p}",
            theta0.len()
        )));
    }
    let feas_tol = 1e-10 * problem.residual_scale(theta0);
    if problem.infeasibility(theta0) > feas_tol {
        return Err(Error::InvalidInput(format!(
            "starting point violates the constraints by {:e}",
            problem.infeasibility(theta0)
        )));
    }
    ActiveSet::new(problem, theta0).run()
}

struct ActiveSet<'a> {
    pr: &'a QpProblem,
    theta: DVector<f64>,
    fixed: Vec<bool>,
    rows: Vec<usize>,
    regularized: bool,
}

struct Step {
    /// Full-length step; zero on fixed variables.
    p: DVector<f64>,
    stationary: bool,
}

impl<'a> ActiveSet<'a> {
    fn new(pr: &'a QpProblem, theta0: &DVector<f64>) -> Self {
        let fixed: Vec<bool> = theta0.iter().map(|&t| t <= 0.0).collect();
        let theta = theta0.map(|t| t.max(0.0));
        ActiveSet {
            pr,
            theta,
            fixed,
            rows: Vec::new(),
            regularized: false,
        }
    }

    fn free(&self) -> Vec<usize> {
        (0..self.pr.n_vars()).filter(|&i| !self.fixed[i]).collect()
    }

    /// Working general rows restricted to the free variables.
    fn row_block(&self, free: &[usize]) -> DMatrix<f64> {
        DMatrix::from_fn(self.rows.len(), free.len(), |i, j| self.pr.a[(self.rows[i], free[j])])
    }

    fn gradient(&self) -> DVector<f64> {
        &self.pr.q * &self.theta - &self.pr.c
    }

    fn equality_step(&mut self, scale: f64) -> Step {
        let p = self.pr.n_vars();
        let free = self.free();
        let mut step = DVector::zeros(p);
        if free.is_empty() {
            return Step {
                p: step,
                stationary: true,
            };
        }
        let g = self.gradient();
        let gf = DVector::from_fn(free.len(), |i, _| g[free[i]]);
        let n = null_space(&self.row_block(&free));
        if n.ncols() == 0 {
            return Step {
                p: step,
                stationary: true,
            };
        }
        let rg = n.transpose() * &gf;
        if rg.amax() <= 1e-13 * scale {
            return Step {
                p: step,
                stationary: true,
            };
        }
        let qff = DMatrix::from_fn(free.len(), free.len(), |i, j| self.pr.q[(free[i], free[j])]);
        let mut h = n.transpose() * qff * &n;
        h = (&h + h.transpose()) * 0.5;
        let eig = SymmetricEigen::new(h.clone());
        let max_eig = eig.eigenvalues.amax();
        let min_eig = eig.eigenvalues.iter().copied().fold(f64::INFINITY, f64::min);
        if min_eig <= 1e-12 * max_eig.max(f64::MIN_POSITIVE) {
            let bump = 1e-10 * self.pr.q.trace() / p as f64;
            let bump = if bump > 0.0 { bump } else { 1e-10 };
            for i in 0..h.nrows() {
                h[(i, i)] += bump;
            }
            self.regularized = true;
        }
        let z = match h.clone().cholesky() {
            Some(ch) => ch.solve(&rg),
            None => {
                // Fall back to the eigen-decomposition with clamped spectrum.
                let eig = SymmetricEigen::new(h);
                let floor = 1e-10 * eig.eigenvalues.amax().max(1e-300);
                let inv = eig.eigenvalues.map(|e| 1.0 / e.max(floor));
                &eig.eigenvectors * inv.component_mul(&(eig.eigenvectors.transpose() * &rg))
            }
        };
        let pf = -(&n * z);
        for (k, &i) in free.iter().enumerate() {
            step[i] = pf[k];
        }
        Step {
            p: step,
            stationary: false,
        }
    }

    /// Multipliers `(μ, ν)` at the current point for the working set.
    fn multipliers(&self) -> (DVector<f64>, DVector<f64>) {
        let p = self.pr.n_vars();
        let free = self.free();
        let g = self.gradient();
        let mut mu = DVector::zeros(self.pr.n_rows());
        if !self.rows.is_empty() {
            // (Qθ − c)_F + C_Fᵀ μ_W = 0 in the least-squares sense.
            let cf = self.row_block(&free);
            let gf = DVector::from_fn(free.len(), |i, _| g[free[i]]);
            let ct = cf.transpose();
            let sol = if free.is_empty() {
                DVector::zeros(self.rows.len())
            } else {
                let svd = ct.svd(true, true);
                svd.solve(&(-gf), 1e-12)
                    .unwrap_or_else(|_| DVector::zeros(self.rows.len()))
            };
            for (k, &r) in self.rows.iter().enumerate() {
                mu[r] = sol[k];
            }
        }
        let at_mu = self.pr.a.transpose() * &mu;
        let nu = DVector::from_fn(p, |i, _| if self.fixed[i] { g[i] + at_mu[i] } else { 0.0 });
        (mu, nu)
    }

    fn run(mut self) -> Result<QpSolution> {
        let p = self.pr.n_vars();
        let r = self.pr.n_rows();
        let max_iters = 50 * (p + r) + 100;
        let mut iterations = 0;
        loop {
            if iterations >= max_iters {
                let (mu, nu) = self.multipliers();
                let residual = kkt_residual(self.pr, &self.theta, &mu, &nu);
                return Err(Error::QpNonconvergence {
                    iterations,
                    residual,
                    best: self.theta.iter().copied().collect(),
                });
            }
            iterations += 1;
            let scale = self.pr.residual_scale(&self.theta);
            let step = self.equality_step(scale);
            if step.stationary {
                let (mu, nu) = self.multipliers();
                let mut leave: Option<(usize, f64)> = None;
                let dual_tol = -1e-12 * scale;
                let candidates = (0..p)
                    .filter(|&i| self.fixed[i])
                    .map(|i| (i, nu[i]))
                    .chain(self.rows.iter().map(|&j| (p + j, mu[j])));
                for (idx, m) in candidates {
                    if m < dual_tol && leave.is_none_or(|(li, lm)| m < lm || (m == lm && idx < li)) {
                        leave = Some((idx, m));
                    }
                }
                match leave {
                    None => return self.finish(iterations, mu, nu),
                    Some((idx, _)) if idx < p => self.fixed[idx] = false,
                    Some((idx, _)) => self.rows.retain(|&j| j != idx - p),
                }
                continue;
            }

            // Ratio test over constraints outside the working set.
            let d = &step.p;
            let mut alpha = 1.0;
            let mut block: Option<usize> = None;
            for i in 0..p {
                if !self.fixed[i] && d[i] < 0.0 {
                    let t = (self.theta[i] / -d[i]).max(0.0);
                    if t < alpha {
                        alpha = t;
                        block = Some(i);
                    }
                }
            }
            let ad = &self.pr.a * d;
            let at = &self.pr.a * &self.theta;
            for j in 0..r {
                if self.rows.contains(&j) || ad[j] <= 1e-14 * d.amax() {
                    continue;
                }
                let t = ((self.pr.b[j] - at[j]) / ad[j]).max(0.0);
                if t < alpha {
                    alpha = t;
                    block = Some(p + j);
                }
            }
            self.theta += d * alpha;
            for i in 0..p {
                if self.fixed[i] || self.theta[i] < 0.0 {
                    self.theta[i] = self.theta[i].max(0.0);
                }
            }
            match block {
                Some(i) if i < p => {
                    self.theta[i] = 0.0;
                    self.fixed[i] = true;
                }
                Some(i) => self.rows.push(i - p),
                None => {}
            }
        }
    }

    fn finish(self, iterations: usize, mu: DVector<f64>, nu: DVector<f64>) -> Result<QpSolution> {
        let residual = kkt_residual(self.pr, &self.theta, &mu, &nu);
        if residual > KKT_TOL || !residual.is_finite() {
            return Err(Error::QpNonconvergence {
                iterations,
                residual,
                best: self.theta.iter().copied().collect(),
            });
        }
        let p = self.pr.n_vars();
        let mut active_set: Vec<ActiveConstraint> =
            (0..p).filter(|&i| self.fixed[i]).map(ActiveConstraint::Bound).collect();
        let mut rows = self.rows.clone();
        rows.sort_unstable();
        active_set.extend(rows.into_iter().map(ActiveConstraint::Row));
        Ok(QpSolution {
            objective: self.pr.objective(&self.theta),
            theta: self.theta,
            kkt_residual: residual,
            row_multipliers: mu,
            bound_multipliers: nu,
            active_set,
            iterations,
            regularized: self.regularized,
        })
    }
}

/// Orthonormal basis of the null space of `c` (`k × f`), as an `f × (f − rank)`
/// matrix.
fn null_space(c: &DMatrix<f64>) -> DMatrix<f64> {
    let f = c.ncols();
    if c.nrows() == 0 {
        return DMatrix::identity(f, f);
    }
    let eig = SymmetricEigen::new(c.transpose() * c);
    let top = eig.eigenvalues.amax().max(f64::MIN_POSITIVE);
    let keep: Vec<usize> = (0..f).filter(|&i| eig.eigenvalues[i] <= 1e-10 * top).collect();
    DMatrix::from_fn(f, keep.len(), |i, j| eig.eigenvectors[(i, keep[j])])
}
