//! Heredity-constrained nonnegative garrote on top of the ridge initial
//! estimate, GCV tuning over a budget grid, and the full pipeline.

use std::fmt;
use std::str::FromStr;
use std::time::Instant;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::design::{
    build_model_matrix, center_response, heredity_constraints_with, Component, DesignTable, HeredityConstraint,
    HeredityMode, ModelMatrix, Scope,
};
use crate::error::{Error, Result, Stage};
use crate::hyperfit::{fit_hyperparams, ridge_estimate, FitOptions, InitialEstimate};
use crate::prior::{prior_diag, Hyperparams};
use crate::qp::{solve_warm, QpProblem, QpSolution};

pub const SELECTION_EPS: f64 = 1e-8;

/// Effect scope requested by the caller; `Auto` picks main effects only when
/// the main-effect columns alone already fill the run size.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ScopeChoice {
    #[default]
    Auto,
    MainOnly,
    #[serde(rename = "main-2fi")]
    Main2fi,
}

impl ScopeChoice {
    pub fn resolve(self, design: &DesignTable) -> Scope {
        match self {
            ScopeChoice::MainOnly => Scope::MainOnly,
            ScopeChoice::Main2fi => Scope::MainPlus2fi,
            ScopeChoice::Auto => {
                let mains: usize = design.factors.iter().map(|f| f.n_levels() - 1).sum();
                if mains >= design.n_runs() {
                    Scope::MainOnly
                } else {
                    Scope::MainPlus2fi
                }
            }
        }
    }
}

impl FromStr for ScopeChoice {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "auto" => Ok(ScopeChoice::Auto),
            "main-only" | "main_only" | "main" => Ok(ScopeChoice::MainOnly),
            "main-2fi" | "main_2fi" | "2fi" => Ok(ScopeChoice::Main2fi),
            _ => Err(Error::InvalidInput(format!("unknown scope `{s}`"))),
        }
    }
}

impl fmt::Display for ScopeChoice {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ScopeChoice::Auto => "auto",
            ScopeChoice::MainOnly => "main-only",
            ScopeChoice::Main2fi => "main-2fi",
        })
    }
}

impl FromStr for HeredityMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "weak" => Ok(HeredityMode::Weak),
            "strong" => Ok(HeredityMode::Strong),
            _ => Err(Error::InvalidInput(format!("unknown heredity mode `{s}`"))),
        }
    }
}

/// Interval of the budget grid: `[0.1, 0.3(n−1)]` or the wider `[0.1, n−1]`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GridRange {
    #[default]
    Narrow,
    Wide,
}

/// Equally spaced budgets on the chosen interval. A single point sits at the
/// upper end.
pub fn m_grid(n: usize, points: usize, range: GridRange) -> Result<Vec<f64>> {
    if points == 0 {
        return Err(Error::InvalidInput("the budget grid needs at least one point".into()));
    }
    let top = (n as f64 - 1.0)
        * match range {
            GridRange::Narrow => 0.3,
            GridRange::Wide => 1.0,
        };
    let lo = 0.1;
    if top <= lo {
        return Err(Error::InvalidInput(format!(
            "run size {n} is too small for a budget grid"
        )));
    }
    if points == 1 {
        return Ok(vec![top]);
    }
    Ok((0..points)
        .map(|i| lo + (top - lo) * i as f64 / (points - 1) as f64)
        .collect())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct GarroteOptions {
    pub heredity: HeredityMode,
    pub scope: ScopeChoice,
    /// Divide working columns by their standard deviation before the ridge
    /// estimate and the garrote.
    pub standardize: bool,
    pub grid_points: usize,
    pub grid_range: GridRange,
    pub selection_eps: f64,
    /// Also bound higher polynomial components by the factor's linear one.
    pub quadratic_child_of_linear: bool,
    pub fit: FitOptions,
}

impl Default for GarroteOptions {
    fn default() -> Self {
        GarroteOptions {
            heredity: HeredityMode::Weak,
            scope: ScopeChoice::Auto,
            standardize: true,
            grid_points: 50,
            grid_range: GridRange::Narrow,
            selection_eps: SELECTION_EPS,
            quadratic_child_of_linear: false,
            fit: FitOptions::default(),
        }
    }
}

/// Garrote fit at one budget.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GarroteSolution {
    /// Budget; `None` for the replicated criterion, which has no budget.
    #[serde(rename = "M")]
    pub m: Option<f64>,
    pub theta: Vec<f64>,
    pub beta_ng: Vec<f64>,
    pub df: f64,
    pub gcv: f64,
    pub selected: Vec<usize>,
    pub kkt_residual: f64,
    pub regularized: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PathPoint {
    #[serde(rename = "M")]
    pub m: f64,
    pub gcv: f64,
    pub df: f64,
    pub k: usize,
}

/// `Q = ZᵀZ`, `c = Zᵀy` with `Z = U diag(β̂)`, rows `[1ᵀ; heredity]`,
/// `b = [M; 0]`.
pub fn shrinkage_qp(
    u: &DMatrix<f64>,
    beta: &DVector<f64>,
    y: &DVector<f64>,
    m: f64,
    constraints: &[HeredityConstraint],
) -> Result<QpProblem> {
    if !(m > 0.0) {
        return Err(Error::InvalidInput(format!("budget must be positive, got {m}")));
    }
    let g = Garrote::new(u, beta, y, &DVector::zeros(beta.len()), constraints)?;
    Ok(g.qp(Some(m), 0.0))
}

/// `‖y − U β^{NG}‖² / (n (1 − df/n)²)`; infinite when `df ≥ n`.
pub fn gcv_value(theta: &[f64], u: &DMatrix<f64>, beta: &DVector<f64>, y: &DVector<f64>, w: &DVector<f64>) -> f64 {
    let n = y.len() as f64;
    let bng = DVector::from_fn(beta.len(), |i, _| theta[i] * beta[i]);
    let rss = (y - u * bng).norm_squared();
    let df: f64 = theta.iter().zip(w.iter()).map(|(t, w)| t * w).sum();
    if df >= n {
        f64::INFINITY
    } else {
        rss / (n * (1.0 - df / n).powi(2))
    }
}

/// Precomputed pieces shared by every QP of one garrote fit.
#[derive(Debug, Clone)]
pub struct Garrote {
    u: DMatrix<f64>,
    beta: DVector<f64>,
    y: DVector<f64>,
    w: DVector<f64>,
    constraints: Vec<HeredityConstraint>,
    q: DMatrix<f64>,
    zty: DVector<f64>,
}

impl Garrote {
    pub fn new(
        u: &DMatrix<f64>,
        beta: &DVector<f64>,
        y: &DVector<f64>,
        w: &DVector<f64>,
        constraints: &[HeredityConstraint],
    ) -> Result<Self> {
        let (n, p) = u.shape();
        if beta.len() != p || w.len() != p || y.len() != n {
            return Err(Error::InvalidInput(format!(
                "shape mismatch: U is {n}×{p}, β̂ has {}, w has {}, y has {}",
                beta.len(),
                w.len(),
                y.len()
            )));
        }
        if let Some(c) = constraints
            .iter()
            .find(|c| c.child >= p || c.parents.iter().any(|&q| q >= p))
        {
            return Err(Error::InvalidInput(format!(
                "heredity row references column {} beyond {p}",
                c.child
            )));
        }
        if beta.iter().all(|b| *b == 0.0) {
            return Err(Error::DegenerateEstimate);
        }
        let z = DMatrix::from_fn(n, p, |i, j| u[(i, j)] * beta[j]);
        let mut q = z.transpose() * &z;
        q = (&q + q.transpose()) * 0.5;
        let zty = z.transpose() * y;
        Ok(Garrote {
            u: u.clone(),
            beta: beta.clone(),
            y: y.clone(),
            w: w.clone(),
            constraints: constraints.to_vec(),
            q,
            zty,
        })
    }

    pub fn n_vars(&self) -> usize {
        self.beta.len()
    }

    /// QP at budget `m` (`None` drops the budget row) with linear term
    /// `Zᵀy − penalty·w`.
    pub fn qp(&self, m: Option<f64>, penalty: f64) -> QpProblem {
        let p = self.n_vars();
        let budget = usize::from(m.is_some());
        let r = budget + self.constraints.len();
        let mut a = DMatrix::zeros(r, p);
        let mut b = DVector::zeros(r);
        if let Some(m) = m {
            a.row_mut(0).fill(1.0);
            b[0] = m;
        }
        for (k, c) in self.constraints.iter().enumerate() {
            a.row_mut(budget + k).copy_from(&c.row(p).transpose());
        }
        let c = &self.zty - &self.w * penalty;
        QpProblem {
            q: self.q.clone(),
            c,
            a,
            b,
        }
    }

    /// Zeroes `θ` below `eps`, then drops children whose heredity rows have
    /// no selected parent left, repeating until stable.
    pub fn threshold(&self, theta: &DVector<f64>, eps: f64) -> Vec<f64> {
        let mut t: Vec<f64> = theta.iter().map(|&v| if v > eps { v } else { 0.0 }).collect();
        loop {
            let mut changed = false;
            for c in &self.constraints {
                if t[c.child] > 0.0 && c.parents.iter().all(|&q| t[q] == 0.0) {
                    t[c.child] = 0.0;
                    changed = true;
                }
            }
            if !changed {
                return t;
            }
        }
    }

    fn solution(&self, m: Option<f64>, qp: &QpSolution, eps: f64) -> GarroteSolution {
        let theta = self.threshold(&qp.theta, eps);
        let beta_ng: Vec<f64> = theta.iter().zip(self.beta.iter()).map(|(t, b)| t * b).collect();
        let df = theta.iter().zip(self.w.iter()).map(|(t, w)| t * w).sum();
        let gcv = gcv_value(&theta, &self.u, &self.beta, &self.y, &self.w);
        let selected = (0..theta.len()).filter(|&i| theta[i] > 0.0).collect();
        GarroteSolution {
            m,
            theta,
            beta_ng,
            df,
            gcv,
            selected,
            kkt_residual: qp.kkt_residual,
            regularized: qp.regularized,
        }
    }

    /// Solves at every budget in `grid` (ascending, warm-started) and returns
    /// the path with the GCV minimizer (earliest on ties).
    pub fn solve_path(&self, grid: &[f64], eps: f64) -> Result<(Vec<PathPoint>, GarroteSolution)> {
        if grid.is_empty() {
            return Err(Error::InvalidInput("empty budget grid".into()));
        }
        let mut grid = grid.to_vec();
        grid.sort_by(f64::total_cmp);
        let mut path = Vec::with_capacity(grid.len());
        let mut best: Option<GarroteSolution> = None;
        let mut start = DVector::zeros(self.n_vars());
        for &m in &grid {
            let pr = self.qp(Some(m), 0.0);
            let qp = solve_warm(&pr, &start).map_err(|e| Error::PathAborted {
                m,
                partial: path.clone(),
                source: Box::new(e),
            })?;
            let sol = self.solution(Some(m), &qp, eps);
            path.push(PathPoint {
                m,
                gcv: sol.gcv,
                df: sol.df,
                k: sol.selected.len(),
            });
            start = qp.theta;
            if best.as_ref().is_none_or(|b| sol.gcv < b.gcv) {
                best = Some(sol);
            }
        }
        Ok((path, best.expect("grid is non-empty")))
    }

    /// Replicated criterion `½‖ȳ − Uβ^{NG}‖² + σ̂² Σ θ_i w_i` under the
    /// heredity rows only.
    pub fn replicated_fit(&self, sigma2: f64, eps: f64) -> Result<GarroteSolution> {
        if !(sigma2 >= 0.0) || !sigma2.is_finite() {
            return Err(Error::InvalidInput(format!(
                "σ̂² must be finite and nonnegative, got {sigma2}"
            )));
        }
        let pr = self.qp(None, sigma2);
        let qp = solve_warm(&pr, &DVector::zeros(self.n_vars()))?;
        Ok(self.solution(None, &qp, eps))
    }
}

/// Ordinary least squares of `y` on the selected columns via column-pivoted
/// QR; numerically dependent columns get coefficient 0.
pub fn ls_refit(u: &DMatrix<f64>, selected: &[usize], y: &DVector<f64>) -> (Vec<f64>, f64) {
    let tss = y.norm_squared();
    if selected.is_empty() || tss == 0.0 {
        return (vec![0.0; selected.len()], 0.0);
    }
    let x = DMatrix::from_fn(u.nrows(), selected.len(), |i, j| u[(i, selected[j])]);
    let qr = x.clone().col_piv_qr();
    let r = qr.r();
    let k = r.nrows().min(r.ncols());
    let top = (0..k).map(|i| r[(i, i)].abs()).fold(0.0, f64::max);
    let rank = (0..k)
        .take_while(|&i| r[(i, i)].abs() > 1e-10 * top.max(1e-300))
        .count();
    if rank < selected.len() {
        log::warn!("dropping {} aliased columns from the refit", selected.len() - rank);
    }
    let qy = qr.q().transpose() * y;
    let mut z = DVector::zeros(selected.len());
    for i in (0..rank).rev() {
        let s: f64 = (i + 1..rank).map(|j| r[(i, j)] * z[j]).sum();
        z[i] = (qy[i] - s) / r[(i, i)];
    }
    qr.p().inv_permute_rows(&mut z);
    let rss = (y - &x * &z).norm_squared();
    (z.iter().copied().collect(), (1.0 - rss / tss).clamp(0.0, 1.0))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Effect {
    pub label: String,
    pub beta: f64,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Timings {
    pub hyperfit_ms: f64,
    pub estimate_ms: f64,
    pub garrote_ms: f64,
    pub refit_ms: f64,
    pub total_ms: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitReport {
    pub solution: GarroteSolution,
    pub path: Vec<PathPoint>,
    /// Selected effects, largest `|β^{NG}|` first.
    pub effects: Vec<Effect>,
    pub r_squared: f64,
    pub hyper: Hyperparams,
    pub timings: Timings,
    pub scope: Scope,
    pub heredity: HeredityMode,
    pub labels: Vec<String>,
    pub beta_init: Vec<f64>,
    pub column_scales: Vec<f64>,
    pub grid: Vec<f64>,
    pub seed: u64,
}

impl FitReport {
    pub fn effect(&self, label: &str) -> Option<f64> {
        self.effects.iter().find(|e| e.label == label).map(|e| e.beta)
    }

    pub fn selected_labels(&self) -> Vec<&str> {
        self.effects.iter().map(|e| e.label.as_str()).collect()
    }

    /// Copy with timings cleared, for reproducibility comparisons.
    pub fn without_timings(&self) -> FitReport {
        FitReport {
            timings: Timings::default(),
            ..self.clone()
        }
    }
}

fn ms(t: Instant) -> f64 {
    t.elapsed().as_secs_f64() * 1e3
}

/// Working matrix and initial estimate for a design at given hyperparameters.
pub fn working_estimate(
    design: &DesignTable,
    mm: &ModelMatrix,
    y: &crate::design::CenteredResponse,
    hp: &Hyperparams,
    standardize: bool,
) -> Result<(DMatrix<f64>, Vec<f64>, InitialEstimate)> {
    let (u, scales) = if standardize {
        mm.standardized()
    } else {
        (mm.matrix(), vec![1.0; mm.n_cols()])
    };
    let prior = prior_diag(&design.factors, mm, &hp.rho)?;
    let est = ridge_estimate(&u, &prior, y, hp)?;
    Ok((u, scales, est))
}

/// The full pipeline: center, fit hyperparameters, ridge estimate, garrote
/// (GCV path, or the replicated criterion when σ̂² is available), LS refit.
pub fn higarrote(design: &DesignTable, opts: &GarroteOptions) -> Result<FitReport> {
    let t0 = Instant::now();
    design.validate()?;
    let y = center_response(design).map_err(|e| e.at(Stage::Center))?;
    let scope = opts.scope.resolve(design);
    let mm = build_model_matrix(design, scope)?;

    let t = Instant::now();
    let hyper = fit_hyperparams(design, &y, &opts.fit).map_err(|e| e.at(Stage::Hyperfit))?;
    let hyperfit_ms = ms(t);

    let t = Instant::now();
    let (u, column_scales, est) =
        working_estimate(design, &mm, &y, &hyper, opts.standardize).map_err(|e| e.at(Stage::InitialEstimate))?;
    let estimate_ms = ms(t);

    let t = Instant::now();
    let constraints = heredity_constraints_with(&mm, opts.heredity, opts.quadratic_child_of_linear);
    let garrote = Garrote::new(&u, &est.beta, &y.values, &est.posterior_weight_diag, &constraints)
        .map_err(|e| e.at(Stage::Garrote))?;
    let (grid, path, solution) = match y.sigma2 {
        Some(s2) => {
            let sol = garrote
                .replicated_fit(s2, opts.selection_eps)
                .map_err(|e| e.at(Stage::Garrote))?;
            (Vec::new(), Vec::new(), sol)
        }
        None => {
            let grid = m_grid(design.n_runs(), opts.grid_points, opts.grid_range).map_err(|e| e.at(Stage::Garrote))?;
            let (path, sol) = garrote
                .solve_path(&grid, opts.selection_eps)
                .map_err(|e| e.at(Stage::Garrote))?;
            (grid, path, sol)
        }
    };
    let garrote_ms = ms(t);

    let t = Instant::now();
    let (_, r_squared) = ls_refit(&u, &solution.selected, &y.values);
    let refit_ms = ms(t);

    let mut order = solution.selected.clone();
    order.sort_by(|&a, &b| {
        solution.beta_ng[b]
            .abs()
            .total_cmp(&solution.beta_ng[a].abs())
            .then(a.cmp(&b))
    });
    let effects = order
        .into_iter()
        .map(|i| Effect {
            label: mm.columns[i].label.clone(),
            beta: solution.beta_ng[i],
        })
        .collect();

    Ok(FitReport {
        solution,
        path,
        effects,
        r_squared,
        hyper,
        timings: Timings {
            hyperfit_ms,
            estimate_ms,
            garrote_ms,
            refit_ms,
            total_ms: ms(t0),
        },
        scope,
        heredity: opts.heredity,
        labels: mm.columns.iter().map(|c| c.label.clone()).collect(),
        beta_init: est.beta.iter().copied().collect(),
        column_scales,
        grid,
        seed: opts.fit.seed,
    })
}

/// Checks the heredity principle on a selected set of model-matrix columns.
pub fn heredity_holds(mm: &ModelMatrix, selected: &[usize], mode: HeredityMode) -> bool {
    let chosen = |i: usize| selected.contains(&i);
    selected.iter().all(|&i| {
        let c = &mm.columns[i];
        match (c.component, mode) {
            (Component::Main { .. }, _) => true,
            (Component::Interaction, HeredityMode::Weak) => c.parents.iter().any(|&q| chosen(q)),
            (Component::Interaction, HeredityMode::Strong) => c.parents.iter().all(|&q| chosen(q)),
        }
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::design::{heredity_constraints, FactorSpec};
    use approx::assert_abs_diff_eq;

    #[test]
    fn single_column_qp() {
        let u = DMatrix::from_column_slice(2, 1, &[1.0, -1.0]);
        let beta = DVector::from_vec(vec![2.0]);
        let y = DVector::from_vec(vec![2.0, -2.0]);
        let pr = shrinkage_qp(&u, &beta, &y, 10.0, &[]).unwrap();
        assert_eq!(pr.q[(0, 0)], 8.0);
        assert_eq!(pr.c[0], 8.0);
        let s = crate::qp::solve(&pr).unwrap();
        assert_abs_diff_eq!(s.theta[0] * beta[0], 2.0, epsilon = 1e-12);
    }

    #[test]
    fn degenerate_estimate_rejected() {
        let u = DMatrix::from_column_slice(2, 1, &[1.0, -1.0]);
        let r = shrinkage_qp(&u, &DVector::zeros(1), &DVector::from_vec(vec![1.0, -1.0]), 1.0, &[]);
        assert!(matches!(r, Err(Error::DegenerateEstimate)));
    }

    #[test]
    fn gcv_at_zero_is_mean_square() {
        let u = DMatrix::from_row_slice(4, 2, &[1.0, 1.0, -1.0, 1.0, 1.0, -1.0, -1.0, -1.0]);
        let y = DVector::from_vec(vec![1.0, 2.0, -1.0, -2.0]);
        let beta = DVector::from_vec(vec![0.5, 1.0]);
        let w = DVector::from_vec(vec![0.4, 0.4]);
        assert_abs_diff_eq!(gcv_value(&[0.0, 0.0], &u, &beta, &y, &w), 10.0 / 4.0);
        assert_eq!(gcv_value(&[10.0, 0.0], &u, &beta, &y, &w), f64::INFINITY);
    }

    #[test]
    fn grid_endpoints() {
        let g = m_grid(12, 50, GridRange::Narrow).unwrap();
        assert_eq!(g.len(), 50);
        assert_abs_diff_eq!(g[0], 0.1);
        assert_abs_diff_eq!(g[49], 3.3, epsilon = 1e-12);
        assert_abs_diff_eq!(m_grid(12, 2, GridRange::Wide).unwrap()[1], 11.0);
        assert_eq!(m_grid(12, 1, GridRange::Narrow).unwrap().len(), 1);
        assert!(m_grid(12, 0, GridRange::Narrow).is_err());
    }

    #[test]
    fn refit_matches_normal_equations_and_drops_aliases() {
        let u = DMatrix::from_row_slice(
            5,
            3,
            &[
                1.0, 2.0, 2.0, -1.0, 0.5, 0.5, 0.3, -1.0, -1.0, 2.0, 0.0, 0.0, -2.3, 1.1, 1.1,
            ],
        );
        let y = DVector::from_vec(vec![1.0, -0.5, 0.2, 0.7, -1.4]);
        let (coef, r2) = ls_refit(&u, &[0, 1], &y);
        let x = u.columns(0, 2).into_owned();
        let b = (x.transpose() * &x).try_inverse().unwrap() * x.transpose() * &y;
        assert_abs_diff_eq!(coef[0], b[0], epsilon = 1e-12);
        assert_abs_diff_eq!(coef[1], b[1], epsilon = 1e-12);
        let (_, r2_alias) = ls_refit(&u, &[0, 1, 2], &y);
        assert_abs_diff_eq!(r2, r2_alias, epsilon = 1e-12);
        assert_eq!(ls_refit(&u, &[], &y).1, 0.0);
    }

    fn replicated_design(noise: &[f64]) -> DesignTable {
        let factors = vec![
            FactorSpec::two_level("A"),
            FactorSpec::two_level("B"),
            FactorSpec::two_level("C"),
        ];
        let runs: Vec<Vec<usize>> = (0..8).map(|i| vec![i & 1, (i >> 1) & 1, (i >> 2) & 1]).collect();
        let mut resp = DMatrix::zeros(8, 2);
        for i in 0..8 {
            let a = if i & 1 == 1 { 1.0 } else { -1.0 };
            for r in 0..2 {
                resp[(i, r)] = 3.0 * a + noise[2 * i + r];
            }
        }
        DesignTable::new(factors, runs, resp).unwrap()
    }

    #[test]
    fn replicated_fit_keeps_active_effect() {
        let noise = [
            0.3, -0.1, -0.4, 0.2, 0.1, 0.5, -0.2, -0.3, 0.4, 0.0, -0.5, 0.1, 0.2, -0.2, 0.0, 0.3,
        ];
        let d = replicated_design(&noise);
        let r = higarrote(&d, &GarroteOptions::default()).unwrap();
        assert!(r.path.is_empty());
        assert!(r.solution.m.is_none());
        assert_eq!(r.effects[0].label, "A");
        assert!((r.effects[0].beta - 3.0).abs() < 0.3);
    }

    #[test]
    fn replicated_penalty_limits() {
        let d = replicated_design(&[0.1; 16]);
        let y = center_response(&d).unwrap();
        let mm = build_model_matrix(&d, Scope::MainPlus2fi).unwrap();
        let hp = Hyperparams::new(0.1, vec![0.5; 3]);
        let (u, _, est) = working_estimate(&d, &mm, &y, &hp, true).unwrap();
        let rows = heredity_constraints(&mm, HeredityMode::Weak);
        let g = Garrote::new(&u, &est.beta, &y.values, &est.posterior_weight_diag, &rows).unwrap();
        let huge = g.replicated_fit(1e12, SELECTION_EPS).unwrap();
        assert!(huge.selected.is_empty());
        assert!(g.replicated_fit(0.0, SELECTION_EPS).is_ok());
        assert!(g.replicated_fit(-1.0, SELECTION_EPS).is_err());
    }

    #[test]
    fn threshold_repairs_heredity() {
        let u = DMatrix::identity(3, 3);
        let rows = vec![HeredityConstraint {
            child: 2,
            parents: vec![0, 1],
        }];
        let g = Garrote::new(
            &u,
            &DVector::from_element(3, 1.0),
            &DVector::zeros(3),
            &DVector::zeros(3),
            &rows,
        )
        .unwrap();
        let t = g.threshold(&DVector::from_vec(vec![1e-9, 1e-10, 0.5]), 1e-8);
        assert_eq!(t, vec![0.0, 0.0, 0.0]);
        let t = g.threshold(&DVector::from_vec(vec![1e-9, 0.2, 0.5]), 1e-8);
        assert_eq!(t, vec![0.0, 0.2, 0.5]);
    }
}
