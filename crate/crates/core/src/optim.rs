//! Box-constrained quasi-Newton minimization.
//!
//! Projected BFGS: variables sitting on a bound with the gradient pushing
//! outward are frozen, the remaining ones take a BFGS step, and the step is
//! projected back onto the box inside an Armijo backtracking search.

use nalgebra::{DMatrix, DVector};

#[derive(Debug, Clone)]
pub struct LocalResult {
    pub x: Vec<f64>,
    pub value: f64,
    pub iterations: usize,
    /// Projected-gradient criterion met (or no further progress possible).
    pub converged: bool,
}

#[derive(Debug, Clone, Copy)]
pub struct BoxOptions {
    pub tol: f64,
    pub max_iters: usize,
}

fn project(x: &mut DVector<f64>, lo: &[f64], hi: &[f64]) {
    for i in 0..x.len() {
        x[i] = x[i].clamp(lo[i], hi[i]);
    }
}

fn projected_gradient_norm(x: &DVector<f64>, g: &DVector<f64>, lo: &[f64], hi: &[f64]) -> f64 {
    (0..x.len())
        .map(|i| {
            // Distance moved by a unit projected steepest-descent step.
            let t = (x[i] - g[i]).clamp(lo[i], hi[i]);
            (t - x[i]).abs()
        })
        .fold(0.0, f64::max)
}

/// Minimizes `f` over the box `[lo, hi]` starting from `x0`.
///
/// `f` returns the value and gradient, or `None` where it cannot be evaluated;
/// such points are treated as infinitely bad by the line search.
pub fn minimize_box<F>(f: F, x0: &[f64], lo: &[f64], hi: &[f64], opts: BoxOptions) -> Option<LocalResult>
where
    F: Fn(&[f64]) -> Option<(f64, Vec<f64>)>,
{
    let n = x0.len();
    let mut x = DVector::from_column_slice(x0);
    project(&mut x, lo, hi);
    let (mut fx, g0) = f(x.as_slice())?;
    let mut g = DVector::from_vec(g0);
    // Hessian approximation; the step solves the reduced system on free variables.
    let mut b = DMatrix::<f64>::identity(n, n);
    let mut scaled = false;
    let mut stalls = 0;

    for iter in 0..opts.max_iters {
        if projected_gradient_norm(&x, &g, lo, hi) < opts.tol {
            return Some(LocalResult {
                x: x.as_slice().to_vec(),
                value: fx,
                iterations: iter,
                converged: true,
            });
        }
        let free: Vec<usize> = (0..n)
            .filter(|&i| !((x[i] <= lo[i] && g[i] > 0.0) || (x[i] >= hi[i] && g[i] < 0.0)))
            .collect();
        let gf = DVector::from_fn(free.len(), |k, _| g[free[k]]);
        let bff = DMatrix::from_fn(free.len(), free.len(), |i, j| b[(free[i], free[j])]);
        let mut d = DVector::<f64>::zeros(n);
        if let Some(ch) = bff.cholesky() {
            let df = ch.solve(&gf);
            for (k, &i) in free.iter().enumerate() {
                d[i] = -df[k];
            }
        }
        let gd = g.dot(&d);
        if !(gd < -1e-14 * g.norm() * d.norm()) || !d.iter().all(|v| v.is_finite()) {
            b = DMatrix::identity(n, n);
            scaled = false;
            d.fill(0.0);
            for &i in &free {
                d[i] = -g[i];
            }
        }
        if !scaled {
            // First step: move at most a tenth of the widest box side.
            let width = (0..n).map(|i| hi[i] - lo[i]).fold(0.0, f64::max);
            let dn = d.amax();
            if dn > 0.1 * width {
                d *= 0.1 * width / dn;
            }
        }

        let mut t = 1.0;
        let mut accepted = None;
        for _ in 0..50 {
            let mut xt = &x + &d * t;
            project(&mut xt, lo, hi);
            if let Some((ft, gt)) = f(xt.as_slice()) {
                let decrease = g.dot(&(&xt - &x));
                if ft.is_finite() && ft <= fx + 1e-4 * decrease {
                    accepted = Some((xt, ft, DVector::from_vec(gt)));
                    break;
                }
            }
            t *= 0.5;
        }
        let Some((xt, ft, gt)) = accepted else {
            return Some(LocalResult {
                x: x.as_slice().to_vec(),
                value: fx,
                iterations: iter,
                converged: true,
            });
        };

        let s = &xt - &x;
        let y = &gt - &g;
        let sy = s.dot(&y);
        if sy > 1e-12 * s.norm() * y.norm() {
            if !scaled {
                b = DMatrix::identity(n, n) * (y.dot(&y) / sy);
                scaled = true;
            }
            let bs = &b * &s;
            let sbs = s.dot(&bs);
            b += &y * y.transpose() / sy - &bs * bs.transpose() / sbs;
        }

        let progress = fx - ft;
        x = xt;
        g = gt;
        fx = ft;
        if progress <= 1e-15 * fx.abs().max(1.0) {
            stalls += 1;
            if stalls >= 3 {
                return Some(LocalResult {
                    x: x.as_slice().to_vec(),
                    value: fx,
                    iterations: iter + 1,
                    converged: true,
                });
            }
        } else {
            stalls = 0;
        }
    }
    Some(LocalResult {
        x: x.as_slice().to_vec(),
        value: fx,
        iterations: opts.max_iters,
        converged: false,
    })
}
