use nalgebra::{Cholesky, DMatrix, Dyn};

use crate::error::{Error, Result};

/// Jitter ladder for symmetric positive definite solves, relative to the mean
/// diagonal entry.
const JITTERS: [f64; 6] = [0.0, 1e-10, 1e-9, 1e-8, 1e-7, 1e-6];

/// Cholesky factor of `k`, adding diagonal jitter when the plain factorization
/// fails. Returns the factor and the jitter that was needed.
pub(crate) fn cholesky_jittered(k: &DMatrix<f64>) -> Result<(Cholesky<f64, Dyn>, f64)> {
    let n = k.nrows();
    let scale = (k.trace() / n as f64).abs().max(f64::MIN_POSITIVE);
    for &j in &JITTERS {
        let mut m = k.clone();
        if j > 0.0 {
            for i in 0..n {
                m[(i, i)] += j * scale;
            }
        }
        if let Some(c) = m.cholesky() {
            if c.l_dirty().diagonal().iter().all(|v| v.is_finite() && *v > 0.0) {
                return Ok((c, j * scale));
            }
        }
    }
    Err(Error::NumericalFailure {
        reason: "Cholesky factorization failed".into(),
        jitter: JITTERS[JITTERS.len() - 1] * scale,
    })
}

pub(crate) fn log_det(c: &Cholesky<f64, Dyn>) -> f64 {
    2.0 * c.l_dirty().diagonal().iter().map(|v| v.ln()).sum::<f64>()
}
