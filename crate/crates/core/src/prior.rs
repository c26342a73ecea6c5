//! Product Gaussian correlation and the prior variances it induces on the
//! model-matrix coefficients.
//!
//! Each factor contributes a correlation `ψ(h) = ρ^{h²}` per parameter. For a
//! quantitative factor `h` is the rank distance between levels; a qualitative
//! factor has one parameter per dummy with `h` the 0/1 mismatch of that dummy's
//! coded values. The prior variance of a coefficient is the product over
//! factors of the diagonal of `U_j⁻¹ Ψ_j U_j⁻ᵀ`, indexed by the column's dummy
//! profile.

use std::ops::Range;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::design::{coding_matrix, DesignTable, FactorKind, FactorSpec, ModelMatrix};
use crate::error::{Error, Result};

/// Correlation parameters and noise ratio.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Hyperparams {
    pub rho: Vec<f64>,
    /// Noise ratio `σ² / (σ² + ν²)`.
    pub lambda: f64,
    /// Profiled process variance.
    pub nu2: f64,
    /// Achieved negative log-likelihood.
    pub nll: f64,
}

impl Hyperparams {
    /// Hyperparameters that have not been through the likelihood yet.
    pub fn new(lambda: f64, rho: Vec<f64>) -> Self {
        Hyperparams {
            rho,
            lambda,
            nu2: f64::NAN,
            nll: f64::NAN,
        }
    }

    /// `λ / (1 − λ)`.
    pub fn delta(&self) -> f64 {
        self.lambda / (1.0 - self.lambda)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PriorDiagonal {
    /// Prior variance of each coefficient divided by ν².
    pub d: DVector<f64>,
    pub tau2_over_nu2: f64,
}

/// Slice of the flat ρ vector owned by each factor.
pub fn rho_ranges(factors: &[FactorSpec]) -> Vec<Range<usize>> {
    let mut start = 0;
    factors
        .iter()
        .map(|f| {
            let r = start..start + f.n_params();
            start = r.end;
            r
        })
        .collect()
}

/// Per-parameter exponent matrices `h²` between the levels of a factor.
pub fn level_exponents(factor: &FactorSpec) -> Result<Vec<DMatrix<f64>>> {
    let m = factor.n_levels();
    Ok(match factor.kind {
        FactorKind::Quantitative => {
            vec![DMatrix::from_fn(m, m, |a, b| (a as f64 - b as f64).powi(2))]
        }
        FactorKind::Qualitative => {
            let u = coding_matrix(factor)?;
            (1..m)
                .map(|d| {
                    DMatrix::from_fn(m, m, |a, b| {
                        if (u[(a, d)] - u[(b, d)]).abs() > 1e-12 {
                            1.0
                        } else {
                            0.0
                        }
                    })
                })
                .collect()
        }
    })
}

fn check_rho_len(factor: &FactorSpec, rho: &[f64]) -> Result<()> {
    if rho.len() != factor.n_params() {
        return Err(Error::InvalidInput(format!(
            "factor `{}` takes {} correlation parameters, got {}",
            factor.name,
            factor.n_params(),
            rho.len()
        )));
    }
    Ok(())
}

/// Level correlation matrix `Ψ_j` of one factor.
pub fn factor_correlation(factor: &FactorSpec, rho: &[f64]) -> Result<DMatrix<f64>> {
    check_rho_len(factor, rho)?;
    let m = factor.n_levels();
    let mut psi = DMatrix::from_element(m, m, 1.0);
    for (e, &r) in level_exponents(factor)?.iter().zip(rho) {
        psi.zip_apply(e, |p, h| {
            if h != 0.0 {
                *p *= r.powf(h);
            }
        });
    }
    Ok(psi)
}

/// Run-by-run exponent matrices for every correlation parameter of a design.
///
/// `Ψ_n = Π_i ρ_i^{E_i}` elementwise, so these are all the likelihood needs.
#[derive(Debug, Clone)]
pub struct RunDistances {
    pub exponents: Vec<DMatrix<f64>>,
    pub n: usize,
}

impl RunDistances {
    pub fn new(design: &DesignTable) -> Result<Self> {
        let n = design.n_runs();
        let mut exponents = Vec::with_capacity(design.n_rho());
        for (j, f) in design.factors.iter().enumerate() {
            let levels = design.factor_levels(j);
            for e in level_exponents(f)? {
                exponents.push(DMatrix::from_fn(n, n, |a, b| e[(levels[a], levels[b])]));
            }
        }
        Ok(RunDistances { exponents, n })
    }

    pub fn n_params(&self) -> usize {
        self.exponents.len()
    }

    /// `Ψ_n` at `rho` (all entries of `rho` must be positive).
    pub fn correlation(&self, rho: &[f64]) -> DMatrix<f64> {
        let mut log_psi = DMatrix::<f64>::zeros(self.n, self.n);
        for (e, &r) in self.exponents.iter().zip(rho) {
            let lr = r.ln();
            log_psi.zip_apply(e, |l, h| {
                if h != 0.0 {
                    *l += h * lr;
                }
            });
        }
        log_psi.map(f64::exp)
    }
}

/// Run correlation matrix `Ψ_n[i,k] = Π_j Ψ_j[level(i,j), level(k,j)]`.
pub fn run_correlation(design: &DesignTable, hp: &Hyperparams) -> Result<DMatrix<f64>> {
    let n = design.n_runs();
    if hp.rho.len() != design.n_rho() {
        return Err(Error::InvalidInput(format!(
            "expected {} correlation parameters, got {}",
            design.n_rho(),
            hp.rho.len()
        )));
    }
    let mut psi = DMatrix::from_element(n, n, 1.0);
    for ((j, f), range) in design.factors.iter().enumerate().zip(rho_ranges(&design.factors)) {
        let pj = factor_correlation(f, &hp.rho[range])?;
        let lv = design.factor_levels(j);
        psi.component_mul_assign(&DMatrix::from_fn(n, n, |a, b| pj[(lv[a], lv[b])]));
    }
    Ok(psi)
}

/// Diagonal of `U_j⁻¹ Ψ_j U_j⁻ᵀ` for one factor.
pub fn factor_prior_variances(factor: &FactorSpec, rho: &[f64]) -> Result<DVector<f64>> {
    let u = coding_matrix(factor)?;
    let uinv = u.try_inverse().ok_or_else(|| Error::InvalidCoding {
        factor: factor.name.clone(),
        reason: "coding matrix is singular".into(),
    })?;
    let psi = factor_correlation(factor, rho)?;
    let v = &uinv * psi * uinv.transpose();
    Ok(v.diagonal())
}

/// Prior variance (over ν²) of every model-matrix column.
pub fn prior_diag(factors: &[FactorSpec], mm: &ModelMatrix, rho: &[f64]) -> Result<PriorDiagonal> {
    let ranges = rho_ranges(factors);
    let total = ranges.last().map_or(0, |r| r.end);
    if rho.len() != total {
        return Err(Error::InvalidInput(format!(
            "expected {total} correlation parameters, got {}",
            rho.len()
        )));
    }
    let per_factor = factors
        .iter()
        .zip(&ranges)
        .map(|(f, r)| factor_prior_variances(f, &rho[r.clone()]))
        .collect::<Result<Vec<_>>>()?;
    let tau2_over_nu2 = per_factor.iter().map(|v| v[0]).product();
    let d = DVector::from_iterator(
        mm.n_cols(),
        mm.columns.iter().map(|c| {
            c.dummy_profile
                .iter()
                .zip(&per_factor)
                .map(|(&k, v)| v[k])
                .product::<f64>()
        }),
    );
    Ok(PriorDiagonal { d, tau2_over_nu2 })
}

/// `τ²/ν² = Π_j sum(Ψ_j) / q²` with `q = Π_j m_j`.
pub fn tau2_over_nu2(factors: &[FactorSpec], rho: &[f64]) -> Result<f64> {
    factors
        .iter()
        .zip(rho_ranges(factors))
        .map(|(f, r)| {
            let m = f.n_levels() as f64;
            Ok(factor_correlation(f, &rho[r])?.sum() / (m * m))
        })
        .product()
}
