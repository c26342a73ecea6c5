//! Factors, coding schemes, designs and the effect model matrix.
//!
//! A factor with `m` levels is represented by an `m × m` coding matrix whose
//! first column is the intercept and whose remaining columns are mutually
//! orthogonal contrasts ("dummies"). Main-effect columns of the model matrix are
//! the dummies evaluated at each run's level; two-factor interaction columns are
//! elementwise products of dummies from two different factors.

use std::collections::{BTreeSet, HashMap};
use std::fmt;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

const ORTHO_TOL: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FactorKind {
    Quantitative,
    Qualitative,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Coding {
    OrthogonalPolynomial,
    Helmert,
    /// Four-level coding whose contrasts are average differences between
    /// pairs of levels.
    #[serde(rename = "paired_level_4", alias = "paired")]
    PairedLevel4,
    /// User-supplied `m × m` matrix, rows indexed by level.
    Custom(Vec<Vec<f64>>),
}

impl Coding {
    pub fn default_for(kind: FactorKind) -> Coding {
        match kind {
            FactorKind::Quantitative => Coding::OrthogonalPolynomial,
            FactorKind::Qualitative => Coding::Helmert,
        }
    }
}

/// One experimental factor.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FactorSpec {
    pub name: String,
    pub kind: FactorKind,
    pub levels: Vec<String>,
    pub coding: Coding,
}

impl FactorSpec {
    /// Builds a factor with the default coding for its kind.
    pub fn new<S: Into<String>>(name: S, kind: FactorKind, levels: &[&str]) -> Result<Self> {
        let f = FactorSpec {
            name: name.into(),
            kind,
            levels: levels.iter().map(|s| s.to_string()).collect(),
            coding: Coding::default_for(kind),
        };
        f.validate()?;
        Ok(f)
    }

    pub fn with_coding(mut self, coding: Coding) -> Result<Self> {
        self.coding = coding;
        self.validate()?;
        Ok(self)
    }

    /// Two-level factor with levels `-1` and `1`.
    pub fn two_level<S: Into<String>>(name: S) -> Self {
        FactorSpec {
            name: name.into(),
            kind: FactorKind::Quantitative,
            levels: vec!["-1".into(), "1".into()],
            coding: Coding::OrthogonalPolynomial,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.name.is_empty() {
            return Err(Error::InvalidFactor {
                factor: self.name.clone(),
                reason: "empty name".into(),
            });
        }
        if self.levels.len() < 2 {
            return Err(Error::InvalidFactor {
                factor: self.name.clone(),
                reason: format!("needs at least 2 levels, got {}", self.levels.len()),
            });
        }
        let distinct: BTreeSet<&str> = self.levels.iter().map(String::as_str).collect();
        if distinct.len() != self.levels.len() {
            return Err(Error::InvalidFactor {
                factor: self.name.clone(),
                reason: "levels are not distinct".into(),
            });
        }
        coding_matrix(self).map(|_| ())
    }

    pub fn n_levels(&self) -> usize {
        self.levels.len()
    }

    /// Number of correlation parameters this factor contributes.
    pub fn n_params(&self) -> usize {
        match self.kind {
            FactorKind::Quantitative => 1,
            FactorKind::Qualitative => self.n_levels() - 1,
        }
    }

    /// Index of a level label. Falls back to numeric comparison so that
    /// `"5.50"` matches a configured level `"5.5"`.
    pub fn level_index(&self, label: &str) -> Option<usize> {
        let label = label.trim();
        if let Some(i) = self.levels.iter().position(|l| l == label) {
            return Some(i);
        }
        let x: f64 = label.parse().ok()?;
        self.levels.iter().position(|l| {
            l.trim()
                .parse::<f64>()
                .map(|y| (x - y).abs() <= 1e-9 * x.abs().max(1.0))
                .unwrap_or(false)
        })
    }

    fn dummy_suffix(&self, d: usize) -> String {
        if self.n_levels() == 2 {
            return String::new();
        }
        match self.kind {
            FactorKind::Quantitative => match d {
                1 => "_l".into(),
                2 => "_q".into(),
                3 => "_c".into(),
                _ => format!("_p{d}"),
            },
            FactorKind::Qualitative => format!("_{d}"),
        }
    }
}

/// Full `m × m` coding matrix of a factor, intercept column first.
pub fn coding_matrix(factor: &FactorSpec) -> Result<DMatrix<f64>> {
    let m = factor.n_levels();
    let invalid = |reason: String| Error::InvalidCoding {
        factor: factor.name.clone(),
        reason,
    };
    let u = match &factor.coding {
        Coding::OrthogonalPolynomial => orthogonal_polynomial(m),
        Coding::Helmert => helmert(m),
        Coding::PairedLevel4 => {
            if m != 4 {
                return Err(invalid(format!("paired_level_4 needs exactly 4 levels, got {m}")));
            }
            DMatrix::from_row_slice(
                4,
                4,
                &[
                    1.0, -1.0, 1.0, -1.0, //
                    1.0, -1.0, -1.0, 1.0, //
                    1.0, 1.0, -1.0, -1.0, //
                    1.0, 1.0, 1.0, 1.0,
                ],
            )
        }
        Coding::Custom(rows) => {
            if rows.len() != m || rows.iter().any(|r| r.len() != m) {
                return Err(invalid(format!("custom coding must be {m}x{m}")));
            }
            let u = DMatrix::from_fn(m, m, |i, j| rows[i][j]);
            if u.column(0).iter().any(|&v| (v - 1.0).abs() > ORTHO_TOL) {
                return Err(invalid("first column must be all ones".into()));
            }
            u
        }
    };
    check_orthogonal(&u).map_err(invalid)?;
    Ok(u)
}

fn check_orthogonal(u: &DMatrix<f64>) -> std::result::Result<(), String> {
    let g = u.transpose() * u;
    let m = u.ncols();
    for i in 0..m {
        if g[(i, i)] <= ORTHO_TOL {
            return Err(format!("column {i} is zero"));
        }
        for j in 0..i {
            let scale = (g[(i, i)] * g[(j, j)]).sqrt();
            if g[(i, j)].abs() > ORTHO_TOL * scale {
                return Err(format!("columns {j} and {i} are not orthogonal"));
            }
        }
    }
    Ok(())
}

/// Orthogonal polynomial contrasts on equispaced levels `1..m`, each column
/// scaled to squared norm `m` and with positive leading coefficient.
fn orthogonal_polynomial(m: usize) -> DMatrix<f64> {
    let center = (m as f64 + 1.0) / 2.0;
    let mut u = DMatrix::<f64>::zeros(m, m);
    for deg in 0..m {
        let mut col = DVector::from_fn(m, |i, _| (i as f64 + 1.0 - center).powi(deg as i32));
        // Two passes of modified Gram-Schmidt keep high degrees accurate.
        for _ in 0..2 {
            for k in 0..deg {
                let q = u.column(k);
                let proj = q.dot(&col) / q.dot(&q);
                col -= q * proj;
            }
        }
        let norm = col.norm();
        col *= (m as f64).sqrt() / norm;
        u.set_column(deg, &col);
    }
    u.column_mut(0).fill(1.0);
    u
}

/// Helmert contrasts: column `k` compares level `k+1` with the mean of the
/// first `k` levels. Columns scaled to squared norm `m`.
fn helmert(m: usize) -> DMatrix<f64> {
    let mut u = DMatrix::<f64>::zeros(m, m);
    u.column_mut(0).fill(1.0);
    for k in 1..m {
        let scale = (m as f64 / (k * (k + 1)) as f64).sqrt();
        for i in 0..k {
            u[(i, k)] = -scale;
        }
        u[(k, k)] = k as f64 * scale;
    }
    u
}

/// Factors, run levels, and response(s) of one experiment.
#[derive(Debug, Clone, PartialEq)]
pub struct DesignTable {
    pub factors: Vec<FactorSpec>,
    /// `runs[i][j]` is the level index of factor `j` in run `i`.
    pub runs: Vec<Vec<usize>>,
    /// `n × m` responses; `m > 1` when runs are replicated.
    pub response: DMatrix<f64>,
}

impl DesignTable {
    pub fn new(factors: Vec<FactorSpec>, runs: Vec<Vec<usize>>, response: DMatrix<f64>) -> Result<Self> {
        let d = DesignTable {
            factors,
            runs,
            response,
        };
        d.validate()?;
        Ok(d)
    }

    /// Single-response convenience constructor.
    pub fn with_response(factors: Vec<FactorSpec>, runs: Vec<Vec<usize>>, y: &[f64]) -> Result<Self> {
        let response = DMatrix::from_column_slice(y.len(), 1, y);
        Self::new(factors, runs, response)
    }

    pub fn validate(&self) -> Result<()> {
        if self.factors.is_empty() {
            return Err(Error::InvalidDesign("no factors".into()));
        }
        let mut names = BTreeSet::new();
        for f in &self.factors {
            f.validate()?;
            if !names.insert(f.name.as_str()) {
                return Err(Error::InvalidDesign(format!("duplicate factor `{}`", f.name)));
            }
        }
        if self.runs.is_empty() {
            return Err(Error::InvalidDesign("no runs".into()));
        }
        for (i, run) in self.runs.iter().enumerate() {
            if run.len() != self.factors.len() {
                return Err(Error::InvalidDesign(format!(
                    "run {} has {} levels, expected {}",
                    i + 1,
                    run.len(),
                    self.factors.len()
                )));
            }
            for (j, &lvl) in run.iter().enumerate() {
                if lvl >= self.factors[j].n_levels() {
                    return Err(Error::InvalidDesign(format!(
                        "run {}: level index {} out of range for factor `{}`",
                        i + 1,
                        lvl,
                        self.factors[j].name
                    )));
                }
            }
        }
        if self.response.nrows() != self.runs.len() || self.response.ncols() == 0 {
            return Err(Error::InvalidDesign(format!(
                "response has {} rows, expected {}",
                self.response.nrows(),
                self.runs.len()
            )));
        }
        if self.response.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidDesign("response contains non-finite values".into()));
        }
        Ok(())
    }

    pub fn n_runs(&self) -> usize {
        self.runs.len()
    }

    pub fn replicate_count(&self) -> usize {
        self.response.ncols()
    }

    /// Total number of correlation parameters (length of ρ).
    pub fn n_rho(&self) -> usize {
        self.factors.iter().map(FactorSpec::n_params).sum()
    }

    /// Level indices of factor `j` over all runs.
    pub fn factor_levels(&self, j: usize) -> Vec<usize> {
        self.runs.iter().map(|r| r[j]).collect()
    }

    /// Applies `f` to every response value (e.g. a log transform).
    pub fn map_response(mut self, f: impl Fn(f64) -> f64) -> Result<Self> {
        self.response.apply(|v| *v = f(*v));
        self.validate()?;
        Ok(self)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Scope {
    MainOnly,
    MainPlus2fi,
}

impl fmt::Display for Scope {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Scope::MainOnly => "main-only",
            Scope::MainPlus2fi => "main-2fi",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum HeredityMode {
    Weak,
    Strong,
}

impl fmt::Display for HeredityMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            HeredityMode::Weak => "weak",
            HeredityMode::Strong => "strong",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Component {
    /// Dummy `dummy` (1-based coding column) of factor `factor`;
    /// `polynomial` marks orthogonal-polynomial components.
    Main {
        factor: usize,
        dummy: usize,
        polynomial: bool,
    },
    Interaction,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EffectColumn {
    pub id: usize,
    pub label: String,
    pub values: DVector<f64>,
    pub degree: u8,
    /// Ids of the main-effect columns whose product gives this column.
    pub parents: Vec<usize>,
    /// Per factor, the coding column used (0 = intercept, factor absent).
    pub dummy_profile: Vec<usize>,
    pub component: Component,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ModelMatrix {
    pub columns: Vec<EffectColumn>,
    pub n: usize,
    pub scope: Scope,
}

impl ModelMatrix {
    pub fn n_cols(&self) -> usize {
        self.columns.len()
    }

    /// Dense `n × P` matrix in coded units.
    pub fn matrix(&self) -> DMatrix<f64> {
        let mut u = DMatrix::zeros(self.n, self.columns.len());
        for (j, c) in self.columns.iter().enumerate() {
            u.set_column(j, &c.values);
        }
        u
    }

    pub fn labels(&self) -> Vec<&str> {
        self.columns.iter().map(|c| c.label.as_str()).collect()
    }

    pub fn column_index(&self, label: &str) -> Option<usize> {
        self.columns.iter().position(|c| c.label == label)
    }

    /// Population standard deviation of each column; constant columns get 1.
    pub fn column_scales(&self) -> Vec<f64> {
        let n = self.n as f64;
        self.columns
            .iter()
            .map(|c| {
                let mean = c.values.sum() / n;
                let var = c.values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
                if var.sqrt() > 1e-12 {
                    var.sqrt()
                } else {
                    1.0
                }
            })
            .collect()
    }

    /// Columns divided by their population standard deviation.
    pub fn standardized(&self) -> (DMatrix<f64>, Vec<f64>) {
        let scales = self.column_scales();
        let mut u = self.matrix();
        for (j, s) in scales.iter().enumerate() {
            u.column_mut(j).unscale_mut(*s);
        }
        (u, scales)
    }
}

/// Builds the effect model matrix for `scope`.
///
/// Mains come first in factor order (each factor's dummies in coding-column
/// order), followed by every product of two mains from distinct factors in
/// lexicographic parent order.
pub fn build_model_matrix(design: &DesignTable, scope: Scope) -> Result<ModelMatrix> {
    design.validate()?;
    let p = design.factors.len();
    let n = design.n_runs();
    let codings = design.factors.iter().map(coding_matrix).collect::<Result<Vec<_>>>()?;
    let single_char = design.factors.iter().all(|f| f.name.chars().count() == 1);
    let sep = if single_char { "" } else { ":" };

    let mut columns: Vec<EffectColumn> = Vec::new();
    for (j, f) in design.factors.iter().enumerate() {
        for d in 1..f.n_levels() {
            let values = DVector::from_fn(n, |i, _| codings[j][(design.runs[i][j], d)]);
            let mut profile = vec![0; p];
            profile[j] = d;
            columns.push(EffectColumn {
                id: columns.len(),
                label: format!("{}{}", f.name, f.dummy_suffix(d)),
                values,
                degree: 1,
                parents: Vec::new(),
                dummy_profile: profile,
                component: Component::Main {
                    factor: j,
                    dummy: d,
                    polynomial: f.coding == Coding::OrthogonalPolynomial,
                },
            });
        }
    }

    if scope == Scope::MainPlus2fi {
        let n_main = columns.len();
        for a in 0..n_main {
            for b in (a + 1)..n_main {
                let (fa, fb) = match (columns[a].component, columns[b].component) {
                    (Component::Main { factor: fa, .. }, Component::Main { factor: fb, .. }) => (fa, fb),
                    _ => unreachable!("only mains precede interactions"),
                };
                if fa == fb {
                    continue;
                }
                let values = columns[a].values.component_mul(&columns[b].values);
                let profile: Vec<usize> = columns[a]
                    .dummy_profile
                    .iter()
                    .zip(&columns[b].dummy_profile)
                    .map(|(x, y)| x + y)
                    .collect();
                let label = format!("{}{}{}", columns[a].label, sep, columns[b].label);
                columns.push(EffectColumn {
                    id: columns.len(),
                    label,
                    values,
                    degree: 2,
                    parents: vec![a, b],
                    dummy_profile: profile,
                    component: Component::Interaction,
                });
            }
        }
    }

    Ok(ModelMatrix { columns, n, scope })
}

/// A linear heredity row `θ_child − Σ θ_parents ≤ 0`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct HeredityConstraint {
    pub child: usize,
    pub parents: Vec<usize>,
}

impl HeredityConstraint {
    /// Dense coefficient row of length `p`.
    pub fn row(&self, p: usize) -> DVector<f64> {
        let mut r = DVector::zeros(p);
        r[self.child] = 1.0;
        for &q in &self.parents {
            r[q] -= 1.0;
        }
        r
    }

    pub fn is_satisfied(&self, theta: &[f64], tol: f64) -> bool {
        theta[self.child] - self.parents.iter().map(|&q| theta[q]).sum::<f64>() <= tol
    }
}

/// Heredity rows for every interaction column.
pub fn heredity_constraints(mm: &ModelMatrix, mode: HeredityMode) -> Vec<HeredityConstraint> {
    heredity_constraints_with(mm, mode, false)
}

/// Like [`heredity_constraints`]; with `quadratic_child_of_linear` every
/// higher polynomial component of a quantitative factor is additionally bounded
/// by that factor's linear component.
pub fn heredity_constraints_with(
    mm: &ModelMatrix,
    mode: HeredityMode,
    quadratic_child_of_linear: bool,
) -> Vec<HeredityConstraint> {
    let mut rows = Vec::new();
    if quadratic_child_of_linear {
        let linear: HashMap<usize, usize> = mm
            .columns
            .iter()
            .filter_map(|c| match c.component {
                Component::Main { factor, dummy: 1, .. } => Some((factor, c.id)),
                _ => None,
            })
            .collect();
        for c in &mm.columns {
            if let Component::Main {
                factor,
                dummy,
                polynomial: true,
            } = c.component
            {
                if dummy >= 2 {
                    rows.push(HeredityConstraint {
                        child: c.id,
                        parents: vec![linear[&factor]],
                    });
                }
            }
        }
    }
    for c in mm.columns.iter().filter(|c| c.degree == 2) {
        match mode {
            HeredityMode::Weak => rows.push(HeredityConstraint {
                child: c.id,
                parents: c.parents.clone(),
            }),
            HeredityMode::Strong => {
                for &q in &c.parents {
                    rows.push(HeredityConstraint {
                        child: c.id,
                        parents: vec![q],
                    });
                }
            }
        }
    }
    rows
}

/// Centered response used by the fit.
#[derive(Debug, Clone, PartialEq)]
pub struct CenteredResponse {
    /// Per-run (sample-mean) response minus the grand mean.
    pub values: DVector<f64>,
    pub mean: f64,
    /// Pooled within-run variance `Σ s_i² / n`, replicated designs only.
    pub sigma2: Option<f64>,
    pub replicates: usize,
}

pub fn center_response(design: &DesignTable) -> Result<CenteredResponse> {
    let y = &design.response;
    let (n, m) = (y.nrows(), y.ncols());
    let (lo, hi) = y
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &v| (a.min(v), b.max(v)));
    if hi - lo <= 1e-12 * hi.abs().max(lo.abs()).max(1.0) {
        return Err(Error::DegenerateResponse);
    }
    let means = DVector::from_fn(n, |i, _| y.row(i).sum() / m as f64);
    let mean = means.sum() / n as f64;
    let values = means.map(|v| v - mean);
    let sigma2 = (m > 1).then(|| {
        let total: f64 = (0..n)
            .map(|i| {
                let mu = means[i];
                y.row(i).iter().map(|v| (v - mu).powi(2)).sum::<f64>() / (m - 1) as f64
            })
            .sum();
        total / n as f64
    });
    Ok(CenteredResponse {
        values,
        mean,
        sigma2,
        replicates: m,
    })
}
