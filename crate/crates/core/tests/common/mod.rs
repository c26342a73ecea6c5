#![allow(dead_code)]

use higarrote::QpProblem;
use nalgebra::{DMatrix, DVector};
use rand::Rng;

/// Linear and quadratic prior ratios of a 3-level quantitative factor.
pub fn quantitative_ratios(rho: f64) -> (f64, f64) {
    let den = 3.0 + 4.0 * rho + 2.0 * rho.powi(4);
    ((3.0 - 3.0 * rho.powi(4)) / den, (3.0 - 4.0 * rho + rho.powi(4)) / den)
}

/// Prior ratios of the two dummies of a 3-level Helmert-coded factor.
pub fn helmert_ratios(r1: f64, r2: f64) -> (f64, f64) {
    let den = 3.0 + 2.0 * r1 + 4.0 * r1 * r2;
    (3.0 * (1.0 - r1) / den, (3.0 + r1 - 4.0 * r1 * r2) / den)
}

/// Global minimizer of a strictly convex QP by enumerating every candidate
/// active set with linearly independent rows.
pub fn brute_force_qp(pr: &QpProblem) -> (DVector<f64>, f64) {
    let p = pr.c.len();
    let r = pr.a.nrows();
    let total = p + r;
    let row = |k: usize| -> (DVector<f64>, f64) {
        if k < p {
            let mut e = DVector::zeros(p);
            e[k] = -1.0;
            (e, 0.0)
        } else {
            (pr.a.row(k - p).transpose(), pr.b[k - p])
        }
    };
    let mut best: Option<(DVector<f64>, f64)> = None;
    for mask in 0u32..(1 << total) {
        let set: Vec<usize> = (0..total).filter(|k| mask & (1 << k) != 0).collect();
        if set.len() > p {
            continue;
        }
        let s = set.len();
        let mut g = DMatrix::zeros(s, p);
        let mut h = DVector::zeros(s);
        for (i, &k) in set.iter().enumerate() {
            let (a, b) = row(k);
            g.set_row(i, &a.transpose());
            h[i] = b;
        }
        if s > 0 {
            let sv = g.clone().svd(false, false).singular_values;
            let top = sv.max();
            if sv.iter().any(|v| *v <= 1e-9 * top.max(1e-300)) {
                continue;
            }
        }
        let mut kkt = DMatrix::zeros(p + s, p + s);
        kkt.view_mut((0, 0), (p, p)).copy_from(&pr.q);
        kkt.view_mut((0, p), (p, s)).copy_from(&g.transpose());
        kkt.view_mut((p, 0), (s, p)).copy_from(&g);
        let mut rhs = DVector::zeros(p + s);
        rhs.rows_mut(0, p).copy_from(&pr.c);
        rhs.rows_mut(p, s).copy_from(&h);
        let Some(sol) = kkt.lu().solve(&rhs) else { continue };
        let theta = sol.rows(0, p).into_owned();
        let feasible =
            theta.iter().all(|t| *t >= -1e-9) && (0..r).all(|k| pr.a.row(k).dot(&theta.transpose()) <= pr.b[k] + 1e-9);
        if !feasible {
            continue;
        }
        let obj = 0.5 * theta.dot(&(&pr.q * &theta)) - pr.c.dot(&theta);
        if best.as_ref().is_none_or(|(_, o)| obj < *o) {
            best = Some((theta, obj));
        }
    }
    best.expect("θ = 0 is always a feasible vertex")
}

/// Random strictly convex QP with garrote-shaped rows: an optional budget,
/// heredity-like rows and generic rows, all with `b ≥ 0`.
pub fn random_qp(rng: &mut impl Rng) -> QpProblem {
    let p = rng.random_range(1..=4usize);
    let r = rng.random_range(0..=3usize);
    let k = rng.random_range(1..=p + 2);
    let bmat = DMatrix::from_fn(k, p, |_, _| rng.random_range(-2.0..2.0));
    let ridge = if rng.random_bool(0.3) { 1e-3 } else { 0.1 };
    let q = bmat.transpose() * &bmat + DMatrix::identity(p, p) * ridge;
    let q = (&q + q.transpose()) * 0.5;
    let c = DVector::from_fn(p, |_, _| rng.random_range(-2.0..3.0));
    let mut a = DMatrix::zeros(r, p);
    let mut b = DVector::zeros(r);
    for i in 0..r {
        match rng.random_range(0..3) {
            0 => {
                a.row_mut(i).fill(1.0);
                b[i] = rng.random_range(0.1..3.0);
            }
            1 if p >= 2 => {
                let child = rng.random_range(0..p);
                let parent = (child + rng.random_range(1..p)) % p;
                a[(i, child)] = 1.0;
                a[(i, parent)] = -1.0;
            }
            _ => {
                for j in 0..p {
                    a[(i, j)] = rng.random_range(-1.0..1.0);
                }
                b[i] = rng.random_range(0.0..2.0);
            }
        }
    }
    QpProblem::new(q, c, a, b).expect("well-formed")
}

/// Central difference with a Richardson step: `(4 D(h/2) − D(h)) / 3`.
pub fn derivative(f: impl Fn(f64) -> f64, x: f64, h: f64) -> f64 {
    let d = |h: f64| (f(x + h) - f(x - h)) / (2.0 * h);
    (4.0 * d(h / 2.0) - d(h)) / 3.0
}
