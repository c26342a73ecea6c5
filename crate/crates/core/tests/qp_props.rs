mod common;

use approx::assert_abs_diff_eq;
use higarrote::qp::{kkt_residual, solve, solve_warm, KKT_TOL};
use higarrote::QpProblem;
use nalgebra::{dmatrix, dvector, DMatrix, DVector};
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn problem(q: DMatrix<f64>, c: DVector<f64>, a: DMatrix<f64>, b: DVector<f64>) -> QpProblem {
    QpProblem::new(q, c, a, b).unwrap()
}

#[test]
fn interior_optimum() {
    let s = solve(&problem(dmatrix![2.0], dvector![2.0], dmatrix![1.0], dvector![10.0])).unwrap();
    assert_abs_diff_eq!(s.theta[0], 1.0, epsilon = 1e-12);
    assert_abs_diff_eq!(s.objective, -1.0, epsilon = 1e-12);
}

#[test]
fn binding_budget_has_multiplier_two() {
    let s = solve(&problem(dmatrix![2.0], dvector![4.0], dmatrix![1.0], dvector![1.0])).unwrap();
    assert_abs_diff_eq!(s.theta[0], 1.0, epsilon = 1e-12);
    assert_abs_diff_eq!(s.row_multipliers[0], 2.0, epsilon = 1e-12);
}

#[test]
fn heredity_row_ties_the_pair() {
    let pr = problem(
        DMatrix::identity(2, 2),
        dvector![1.0, 2.0],
        dmatrix![-1.0, 1.0],
        dvector![0.0],
    );
    let s = solve(&pr).unwrap();
    assert_abs_diff_eq!(s.theta, dvector![1.5, 1.5], epsilon = 1e-12);

    let mut best = (f64::INFINITY, 0.0, 0.0);
    for i in 0..=300 {
        for j in 0..=i {
            let t = dvector![i as f64 * 0.01, j as f64 * 0.01];
            let o = pr.objective(&t);
            if o < best.0 {
                best = (o, t[0], t[1]);
            }
        }
    }
    assert_abs_diff_eq!(best.1, 1.5, epsilon = 1e-9);
    assert_abs_diff_eq!(best.2, 1.5, epsilon = 1e-9);
}

#[test]
fn nonpositive_linear_term_gives_zero() {
    let q = dmatrix![2.0, 0.5; 0.5, 1.0];
    let s = solve(&problem(q, dvector![-1.0, 0.0], dmatrix![1.0, 1.0], dvector![3.0])).unwrap();
    assert_eq!(s.theta, dvector![0.0, 0.0]);
    assert_eq!(s.objective, 0.0);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn matches_brute_force(seed in any::<u64>()) {
        let pr = common::random_qp(&mut ChaCha8Rng::seed_from_u64(seed));
        let s = solve(&pr).unwrap();
        let (_, brute) = common::brute_force_qp(&pr);
        prop_assert!((s.objective - brute).abs() < 1e-4, "solver {} vs brute {}", s.objective, brute);
    }

    #[test]
    fn solutions_are_certified(seed in any::<u64>()) {
        let pr = common::random_qp(&mut ChaCha8Rng::seed_from_u64(seed));
        let s = solve(&pr).unwrap();
        prop_assert!(s.theta.iter().all(|t| *t >= -1e-10));
        prop_assert!((&pr.a * &s.theta - &pr.b).iter().all(|v| *v <= 1e-8));
        let r = kkt_residual(&pr, &s.theta, &s.row_multipliers, &s.bound_multipliers);
        prop_assert!(r < KKT_TOL, "kkt {r:e}");
        prop_assert!(s.objective <= 1e-12);
        prop_assert_eq!(s.objective, pr.objective(&s.theta));
    }

    #[test]
    fn objective_falls_as_budget_grows(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let base = common::random_qp(&mut rng);
        let p = base.c.len();
        let mut a = DMatrix::zeros(base.a.nrows() + 1, p);
        a.row_mut(0).fill(1.0);
        a.view_mut((1, 0), base.a.shape()).copy_from(&base.a);
        let mut last = f64::INFINITY;
        let mut start = DVector::zeros(p);
        for k in 1..=12 {
            let mut b = DVector::zeros(a.nrows());
            b[0] = 0.25 * k as f64;
            b.rows_mut(1, base.b.len()).copy_from(&base.b);
            let pr = QpProblem::new(base.q.clone(), base.c.clone(), a.clone(), b).unwrap();
            let s = solve_warm(&pr, &start).unwrap();
            prop_assert!(s.objective <= last + 1e-10);
            last = s.objective;
            start = s.theta;
        }
    }

    #[test]
    fn warm_and_cold_starts_agree(seed in any::<u64>()) {
        let pr = common::random_qp(&mut ChaCha8Rng::seed_from_u64(seed));
        let cold = solve(&pr).unwrap();
        let warm = solve_warm(&pr, &cold.theta).unwrap();
        prop_assert!((cold.objective - warm.objective).abs() < 1e-10);
    }
}

#[test]
fn rank_deficient_hessian_reaches_the_optimal_value() {
    let z = dmatrix![1.0, 1.0, 0.0; 1.0, 1.0, 1.0; 1.0, 1.0, -1.0];
    let y = dvector![2.0, 3.0, 1.0];
    let q = z.transpose() * &z;
    let c = z.transpose() * &y;
    let pr = problem(q, c, dmatrix![1.0, 1.0, 1.0], dvector![10.0]);
    let s = solve(&pr).unwrap();
    let rss = (&y - &z * &s.theta).norm_squared();
    assert_abs_diff_eq!(rss, 0.0, epsilon = 1e-8);
    assert!(s.kkt_residual < KKT_TOL);
}
