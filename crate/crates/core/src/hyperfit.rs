//! Likelihood fit of the correlation parameters and noise ratio, and the
//! generalized ridge initial estimate that follows from them.

use nalgebra::{DMatrix, DVector};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::design::{CenteredResponse, DesignTable, ModelMatrix};
use crate::error::{Error, Result};
use crate::linalg::{cholesky_jittered, log_det};
use crate::optim::{minimize_box, BoxOptions};
use crate::prior::{prior_diag, Hyperparams, PriorDiagonal, RunDistances};

pub const DEFAULT_SEED: u64 = 20_240_917;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct FitOptions {
    /// Number of local starts; `None` means one per hyperparameter plus one.
    pub n_starts: Option<usize>,
    pub rho_bounds: (f64, f64),
    pub lambda_bounds: (f64, f64),
    pub local_tol: f64,
    pub max_local_iters: usize,
    pub seed: u64,
}

impl Default for FitOptions {
    fn default() -> Self {
        FitOptions {
            n_starts: None,
            rho_bounds: (1e-15, 0.999),
            lambda_bounds: (0.01, 0.99),
            local_tol: 1e-8,
            max_local_iters: 500,
            seed: DEFAULT_SEED,
        }
    }
}

impl FitOptions {
    fn validate(&self) -> Result<()> {
        let (rl, rh) = self.rho_bounds;
        let (ll, lh) = self.lambda_bounds;
        if !(rl > 0.0 && rl < rh && rh <= 1.0) {
            return Err(Error::InvalidInput(format!("bad rho bounds ({rl}, {rh})")));
        }
        if !(ll > 0.0 && ll < lh && lh < 1.0) {
            return Err(Error::InvalidInput(format!("bad lambda bounds ({ll}, {lh})")));
        }
        if self.n_starts == Some(0) {
            return Err(Error::InvalidInput("n_starts must be positive".into()));
        }
        Ok(())
    }
}

/// Profiled negative log-likelihood of `(λ, ρ)` for a fixed design and
/// centered response.
///
/// `nll = ln(yᵀK⁻¹y / n) + ln det K / n` with `K = Ψ_n + (δ/m) I`, where `m`
/// is the replicate count and `y` the per-run mean.
#[derive(Debug, Clone)]
pub struct Likelihood {
    dist: RunDistances,
    y: DVector<f64>,
    replicates: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LikelihoodValue {
    pub nll: f64,
    pub nu2: f64,
    /// Gradient with respect to `(λ, ρ_1, …, ρ_k)`.
    pub grad: Option<Vec<f64>>,
}

impl Likelihood {
    pub fn new(design: &DesignTable, y: &CenteredResponse) -> Result<Self> {
        if y.values.len() != design.n_runs() {
            return Err(Error::InvalidInput(format!(
                "response has {} entries for {} runs",
                y.values.len(),
                design.n_runs()
            )));
        }
        Ok(Likelihood {
            dist: RunDistances::new(design)?,
            y: y.values.clone(),
            replicates: y.replicates.max(1),
        })
    }

    /// Number of hyperparameters, `λ` included.
    pub fn dim(&self) -> usize {
        self.dist.n_params() + 1
    }

    fn check(&self, lambda: f64, rho: &[f64]) -> Result<()> {
        if rho.len() != self.dist.n_params() {
            return Err(Error::InvalidInput(format!(
                "expected {} correlation parameters, got {}",
                self.dist.n_params(),
                rho.len()
            )));
        }
        if !(lambda > 0.0 && lambda < 1.0) || rho.iter().any(|r| !(*r > 0.0 && *r <= 1.0)) {
            return Err(Error::InvalidInput(format!(
                "hyperparameters out of range: lambda {lambda}, rho {rho:?}"
            )));
        }
        Ok(())
    }

    pub fn evaluate(&self, lambda: f64, rho: &[f64], with_grad: bool) -> Result<LikelihoodValue> {
        self.check(lambda, rho)?;
        let n = self.dist.n as f64;
        let m = self.replicates as f64;
        let psi = self.dist.correlation(rho);
        let mut k = psi.clone();
        let nugget = lambda / (1.0 - lambda) / m;
        for i in 0..self.dist.n {
            k[(i, i)] += nugget;
        }
        let (chol, _) = cholesky_jittered(&k)?;
        let alpha = chol.solve(&self.y);
        let s = self.y.dot(&alpha);
        if !(s > 0.0) || !s.is_finite() {
            return Err(Error::NumericalFailure {
                reason: "quadratic form yᵀK⁻¹y is not positive".into(),
                jitter: 0.0,
            });
        }
        let nll = (s / n).ln() + log_det(&chol) / n;
        let grad = with_grad.then(|| {
            let kinv = chol.inverse();
            let w = (&kinv / n - &alpha * alpha.transpose() / s).component_mul(&psi);
            let mut g = Vec::with_capacity(self.dim());
            g.push((kinv.trace() / n - alpha.dot(&alpha) / s) / ((1.0 - lambda).powi(2) * m));
            for (e, &r) in self.dist.exponents.iter().zip(rho) {
                g.push(w.component_mul(e).sum() / r);
            }
            g
        });
        Ok(LikelihoodValue { nll, nu2: s / n, grad })
    }
}

/// Negative log-likelihood at `(λ, ρ)`.
pub fn nll(design: &DesignTable, y: &CenteredResponse, lambda: f64, rho: &[f64]) -> Result<f64> {
    Ok(Likelihood::new(design, y)?.evaluate(lambda, rho, false)?.nll)
}

/// Analytic gradient of [`nll`] with respect to `(λ, ρ_1, …, ρ_k)`.
pub fn nll_grad(design: &DesignTable, y: &CenteredResponse, lambda: f64, rho: &[f64]) -> Result<Vec<f64>> {
    let v = Likelihood::new(design, y)?.evaluate(lambda, rho, true)?;
    Ok(v.grad.unwrap_or_default())
}

/// Maximin Latin hypercube on the unit cube: the best of `candidates` random
/// hypercubes by minimum pairwise distance.
pub fn maximin_lhs(n: usize, dim: usize, candidates: usize, rng: &mut impl Rng) -> Vec<Vec<f64>> {
    let mut best: Option<(f64, Vec<Vec<f64>>)> = None;
    for _ in 0..candidates.max(1) {
        let mut pts = vec![vec![0.0; dim]; n];
        for d in 0..dim {
            let mut perm: Vec<usize> = (0..n).collect();
            perm.shuffle(rng);
            for (i, p) in perm.into_iter().enumerate() {
                pts[i][d] = (p as f64 + rng.random::<f64>()) / n as f64;
            }
        }
        let mut mind = f64::INFINITY;
        for i in 0..n {
            for j in i + 1..n {
                let d2: f64 = pts[i].iter().zip(&pts[j]).map(|(a, b)| (a - b).powi(2)).sum();
                mind = mind.min(d2);
            }
        }
        if best.as_ref().is_none_or(|(b, _)| mind > *b) {
            best = Some((mind, pts));
        }
    }
    best.map(|b| b.1).unwrap_or_default()
}

/// Outcome of one local optimization.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StartOutcome {
    /// `(λ, ρ…)` where the local search began.
    pub start: Vec<f64>,
    pub start_nll: f64,
    /// `(λ, ρ…)` where it ended.
    pub end: Vec<f64>,
    pub end_nll: f64,
    pub iterations: usize,
    pub converged: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MultiStartReport {
    pub best: Hyperparams,
    pub best_start: usize,
    pub starts: Vec<Option<StartOutcome>>,
}

/// Starting points in `(λ, ρ…)` coordinates: the box center, then a seeded
/// maximin Latin hypercube.
pub fn start_points(dim: usize, opts: &FitOptions) -> Vec<Vec<f64>> {
    let total = opts.n_starts.unwrap_or(dim);
    let (lo, hi) = bounds(dim, opts);
    let mut pts = vec![lo.iter().zip(&hi).map(|(a, b)| 0.5 * (a + b)).collect::<Vec<_>>()];
    if total > 1 {
        let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
        for u in maximin_lhs(total - 1, dim, 50, &mut rng) {
            pts.push(u.iter().enumerate().map(|(i, v)| lo[i] + v * (hi[i] - lo[i])).collect());
        }
    }
    pts
}

fn bounds(dim: usize, opts: &FitOptions) -> (Vec<f64>, Vec<f64>) {
    let mut lo = vec![opts.rho_bounds.0; dim];
    let mut hi = vec![opts.rho_bounds.1; dim];
    lo[0] = opts.lambda_bounds.0;
    hi[0] = opts.lambda_bounds.1;
    (lo, hi)
}

/// Multi-start minimization of the likelihood, with per-start diagnostics.
pub fn fit_hyperparams_report(
    design: &DesignTable,
    y: &CenteredResponse,
    opts: &FitOptions,
) -> Result<MultiStartReport> {
    opts.validate()?;
    let lik = Likelihood::new(design, y)?;
    let dim = lik.dim();
    let (lo, hi) = bounds(dim, opts);
    let starts = start_points(dim, opts);
    let box_opts = BoxOptions {
        tol: opts.local_tol,
        max_iters: opts.max_local_iters,
    };
    let f = |x: &[f64]| -> Option<(f64, Vec<f64>)> {
        let v = lik.evaluate(x[0], &x[1..], true).ok()?;
        Some((v.nll, v.grad?))
    };
    let outcomes: Vec<Option<StartOutcome>> = starts
        .par_iter()
        .map(|s| {
            let start_nll = lik.evaluate(s[0], &s[1..], false).ok()?.nll;
            let r = minimize_box(f, s, &lo, &hi, box_opts)?;
            Some(StartOutcome {
                start: s.clone(),
                start_nll,
                end: r.x,
                end_nll: r.value,
                iterations: r.iterations,
                converged: r.converged,
            })
        })
        .collect();
    let mut best: Option<(usize, &StartOutcome)> = None;
    for (i, o) in outcomes.iter().enumerate() {
        if let Some(o) = o {
            if o.end_nll.is_finite() && best.is_none_or(|(_, b)| o.end_nll < b.end_nll) {
                best = Some((i, o));
            }
        }
    }
    let Some((best_start, b)) = best else {
        return Err(Error::NumericalFailure {
            reason: "likelihood could not be evaluated at any start".into(),
            jitter: 1e-6,
        });
    };
    let v = lik.evaluate(b.end[0], &b.end[1..], false)?;
    let best = Hyperparams {
        rho: b.end[1..].to_vec(),
        lambda: b.end[0],
        nu2: v.nu2,
        nll: v.nll,
    };
    Ok(MultiStartReport {
        best,
        best_start,
        starts: outcomes,
    })
}

/// Maximum likelihood `(λ, ρ)` over the box, with profiled `ν²`.
pub fn fit_hyperparams(design: &DesignTable, y: &CenteredResponse, opts: &FitOptions) -> Result<Hyperparams> {
    Ok(fit_hyperparams_report(design, y, opts)?.best)
}

/// Generalized ridge estimate and the diagonal used for degrees of freedom.
#[derive(Debug, Clone, PartialEq)]
pub struct InitialEstimate {
    pub beta: DVector<f64>,
    pub hp: Hyperparams,
    /// `d_i (Uᵀ K⁻¹ U)_ii`; these sum to the trace of the ridge hat matrix.
    pub posterior_weight_diag: DVector<f64>,
}

/// `β̂ = D Uᵀ (U D Uᵀ + (δ/m) I)⁻¹ y` for an arbitrary working matrix `u`.
pub fn ridge_estimate(
    u: &DMatrix<f64>,
    prior: &PriorDiagonal,
    y: &CenteredResponse,
    hyper: &Hyperparams,
) -> Result<InitialEstimate> {
    let (n, p) = u.shape();
    if prior.d.len() != p || y.values.len() != n {
        return Err(Error::InvalidInput(format!(
            "shape mismatch: U is {n}×{p}, prior has {}, response has {}",
            prior.d.len(),
            y.values.len()
        )));
    }
    let ud = DMatrix::from_fn(n, p, |i, j| u[(i, j)] * prior.d[j]);
    let mut k = &ud * u.transpose();
    let nugget = hyper.delta() / y.replicates.max(1) as f64;
    for i in 0..n {
        k[(i, i)] += nugget;
    }
    let (chol, _) = cholesky_jittered(&k)?;
    let alpha = chol.solve(&y.values);
    let beta = ud.transpose() * alpha;
    let kinv_u = chol.solve(u);
    let posterior_weight_diag = DVector::from_fn(p, |j, _| prior.d[j] * u.column(j).dot(&kinv_u.column(j)));
    if beta.iter().all(|b| b.abs() < 1e-300) {
        return Err(Error::DegenerateEstimate);
    }
    Ok(InitialEstimate {
        beta,
        hp: hyper.clone(),
        posterior_weight_diag,
    })
}

/// [`ridge_estimate`] on the coded model matrix with the prior implied by `hp`.
pub fn initial_estimate(
    design: &DesignTable,
    mm: &ModelMatrix,
    y: &CenteredResponse,
    hp: &Hyperparams,
) -> Result<InitialEstimate> {
    let prior = prior_diag(&design.factors, mm, &hp.rho)?;
    ridge_estimate(&mm.matrix(), &prior, y, hp)
}
