//! Acceptance suite: one PASS/FAIL line per criterion, nonzero exit on any
//! failure.

mod common;

use std::process::ExitCode;
use std::time::Instant;

use higarrote::datasets::{bundle, refit_fixtures, IDS};
use higarrote::design::Component;
use higarrote::garrote::working_estimate;
use higarrote::qp::{kkt_residual, solve, solve_warm, KKT_TOL};
use higarrote::reproduce::{check_fit, refit_r_squared, reproduce};
use higarrote::{
    build_model_matrix, center_response, heredity_constraints_with, higarrote as fit, m_grid, prior_diag,
    run_simulation, DesignTable, FactorKind, FactorSpec, FitReport, Garrote, GarroteOptions, HeredityMode, Likelihood,
    Scope, SimSpec,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

struct Outcome {
    passed: bool,
    detail: String,
}

fn outcome(passed: bool, detail: String) -> Outcome {
    Outcome { passed, detail }
}

fn single_threaded<T: Send>(f: impl FnOnce() -> T + Send) -> T {
    rayon::ThreadPoolBuilder::new()
        .num_threads(1)
        .build()
        .expect("thread pool")
        .install(f)
}

fn refit_fixtures_match() -> Outcome {
    let t = Instant::now();
    let mut bad = Vec::new();
    let mut parts = Vec::new();
    for f in refit_fixtures() {
        let r2 = refit_r_squared(&f).expect("fixture refits");
        parts.push(format!(
            "{}{{{}}} {:.3}/{:.2}",
            f.dataset,
            f.labels.join(","),
            r2,
            f.r_squared
        ));
        if (r2 - f.r_squared).abs() > 0.01 {
            bad.push(f.dataset);
        }
    }
    let secs = t.elapsed().as_secs_f64();
    outcome(
        bad.is_empty() && secs < 1.0,
        format!("{}; {secs:.3} s (limit 1 s)", parts.join("; ")),
    )
}

fn full_factorial(factors: &[FactorSpec]) -> Vec<Vec<usize>> {
    let mut runs = vec![vec![]];
    for f in factors {
        runs = runs
            .into_iter()
            .flat_map(|r| {
                (0..f.n_levels()).map(move |l| {
                    let mut r = r.clone();
                    r.push(l);
                    r
                })
            })
            .collect();
    }
    runs
}

fn closed_form_prior() -> Outcome {
    let t = Instant::now();
    let factors = vec![
        FactorSpec::new("X", FactorKind::Quantitative, &["1", "2", "3"]).unwrap(),
        FactorSpec::new("Q", FactorKind::Qualitative, &["a", "b", "c"]).unwrap(),
    ];
    let runs = full_factorial(&factors);
    let y: Vec<f64> = (0..runs.len()).map(|i| i as f64).collect();
    let d = DesignTable::with_response(factors.clone(), runs, &y).unwrap();
    let mm = build_model_matrix(&d, Scope::MainPlus2fi).unwrap();
    let col = |l: &str| mm.column_index(l).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(17);
    let mut worst: f64 = 0.0;
    for _ in 0..1000 {
        let rho = [
            rng.random_range(1e-6..0.999),
            rng.random_range(1e-6..0.999),
            rng.random_range(1e-6..0.999),
        ];
        let pd = prior_diag(&d.factors, &mm, &rho).unwrap();
        let tau = pd.tau2_over_nu2;
        let (rl, rq) = common::quantitative_ratios(rho[0]);
        let (r1, r2) = common::helmert_ratios(rho[1], rho[2]);
        let got = [
            pd.d[col("X_l")] / tau,
            pd.d[col("X_q")] / tau,
            pd.d[col("Q_1")] / tau,
            pd.d[col("Q_2")] / tau,
            pd.d[col("X_qQ_1")] / tau,
        ];
        let want = [rl, rq, r1, r2, rq * r1];
        for (g, w) in got.iter().zip(want) {
            worst = worst.max((g - w).abs());
        }
    }
    let secs = t.elapsed().as_secs_f64();
    outcome(
        worst <= 1e-10 && secs < 5.0,
        format!("1000 draws, max |ratio - closed form| = {worst:.2e}; {secs:.3} s (limit 5 s)"),
    )
}

fn toy_recovery() -> Outcome {
    let t = Instant::now();
    let v = reproduce("toy_pb12").expect("toy fit");
    let secs = t.elapsed().as_secs_f64();
    let effects: Vec<String> = v
        .fit
        .effects
        .iter()
        .map(|e| format!("{}={:.3}", e.label, e.beta))
        .collect();
    outcome(
        v.passed && secs < 5.0,
        format!("{}; {secs:.2} s (limit 5 s)", effects.join(" ")),
    )
}

fn simulation() -> Outcome {
    let t = Instant::now();
    let s = run_simulation(&SimSpec::default(), &GarroteOptions::default()).expect("simulation");
    let secs = t.elapsed().as_secs_f64();
    let (a, ab, ac) = (s.frequency("A"), s.frequency("AB"), s.frequency("AC"));
    outcome(
        a == 1.0 && ab >= 0.95 && ac >= 0.80 && secs < 180.0,
        format!(
            "A {:.0}%, AB {:.0}%, AC {:.0}% over {} replications (floors 100/95/80); {secs:.1} s (limit 180 s)",
            a * 100.0,
            ab * 100.0,
            ac * 100.0,
            s.replications.len()
        ),
    )
}

fn case_study(id: &str) -> Outcome {
    let t = Instant::now();
    let v = single_threaded(|| reproduce(id)).expect("case study fit");
    let secs = t.elapsed().as_secs_f64();
    let failed: Vec<String> = v
        .checks
        .iter()
        .filter(|c| !c.passed)
        .map(|c| c.detail.clone())
        .collect();
    let shown: Vec<String> = v
        .fit
        .effects
        .iter()
        .take(6)
        .map(|e| format!("{}={:.3}", e.label, e.beta))
        .collect();
    let mut detail = format!(
        "{} R2={:.3}; {secs:.2} s single-threaded (limit 60 s)",
        shown.join(" "),
        v.fit.r_squared
    );
    if !failed.is_empty() {
        detail.push_str(&format!("; failed: {}", failed.join(" | ")));
    }
    outcome(v.passed && secs < 60.0, detail)
}

fn gradient_vs_finite_differences() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(99);
    let mut worst: f64 = 0.0;
    let mut worst_at = String::new();
    for id in IDS {
        let d = bundle(id).unwrap().design().unwrap();
        let y = center_response(&d).unwrap();
        let lik = Likelihood::new(&d, &y).unwrap();
        for _ in 0..20 {
            let x: Vec<f64> = (0..lik.dim()).map(|_| rng.random_range(0.05..0.95)).collect();
            let f = |x: &[f64]| lik.evaluate(x[0], &x[1..], false).unwrap().nll;
            let g = lik.evaluate(x[0], &x[1..], true).unwrap().grad.unwrap();
            let fd: Vec<f64> = (0..x.len())
                .map(|i| {
                    common::derivative(
                        |v| {
                            let mut z = x.clone();
                            z[i] = v;
                            f(&z)
                        },
                        x[i],
                        1e-4,
                    )
                })
                .collect();
            let scale = fd.iter().fold(0.0f64, |m, v| m.max(v.abs())).max(1e-3);
            let err = g.iter().zip(&fd).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max) / scale;
            if err > worst {
                worst = err;
                worst_at = id.to_string();
            }
        }
    }
    outcome(
        worst < 1e-5,
        format!("7 datasets x 20 points, max relative error {worst:.2e} ({worst_at})"),
    )
}

fn qp_brute_force() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let mut worst: f64 = 0.0;
    let mut errors = 0;
    for _ in 0..200 {
        let pr = common::random_qp(&mut rng);
        let (_, brute) = common::brute_force_qp(&pr);
        match solve(&pr) {
            Ok(s) => worst = worst.max((s.objective - brute).abs()),
            Err(_) => errors += 1,
        }
    }
    outcome(
        errors == 0 && worst < 1e-4,
        format!("200 problems, max objective gap {worst:.2e}, {errors} solver errors"),
    )
}

fn path_kkt(fits: &[(String, FitReport)]) -> Outcome {
    let mut worst: f64 = 0.0;
    let mut solves = 0;
    for (id, fr) in fits {
        let b = bundle(id).unwrap();
        let d = b.reproduction_design().unwrap();
        let y = center_response(&d).unwrap();
        let mm = build_model_matrix(&d, fr.scope).unwrap();
        let (u, _, est) = working_estimate(&d, &mm, &y, &fr.hyper, true).unwrap();
        let cons = heredity_constraints_with(&mm, fr.heredity, false);
        let g = Garrote::new(&u, &est.beta, &y.values, &est.posterior_weight_diag, &cons).unwrap();
        let grid = m_grid(d.n_runs(), 50, Default::default()).unwrap();
        let mut start = nalgebra::DVector::zeros(g.n_vars());
        for m in grid {
            let pr = g.qp(Some(m), 0.0);
            let s = solve_warm(&pr, &start).expect("path solve");
            let r = kkt_residual(&pr, &s.theta, &s.row_multipliers, &s.bound_multipliers);
            worst = worst.max(r).max(s.kkt_residual);
            solves += 1;
            start = s.theta;
        }
    }
    outcome(
        worst < KKT_TOL,
        format!("{solves} path solves, max scaled KKT residual {worst:.2e} (limit 1e-8)"),
    )
}

fn heredity_in_reports(fits: &[(String, FitReport)]) -> Outcome {
    let mut violations = Vec::new();
    for (id, fr) in fits {
        let d = bundle(id).unwrap().reproduction_design().unwrap();
        let mm = build_model_matrix(&d, fr.scope).unwrap();
        let chosen: Vec<usize> = fr
            .selected_labels()
            .iter()
            .map(|l| mm.column_index(l).unwrap())
            .collect();
        for &i in &chosen {
            let c = &mm.columns[i];
            if c.component != Component::Interaction {
                continue;
            }
            let present = c.parents.iter().filter(|p| chosen.contains(p)).count();
            let ok = match fr.heredity {
                HeredityMode::Weak => present >= 1,
                HeredityMode::Strong => present == c.parents.len(),
            };
            if !ok {
                violations.push(format!("{id}:{}", c.label));
            }
        }
    }
    outcome(
        violations.is_empty(),
        format!("{} reported models, violations: {:?}", fits.len(), violations),
    )
}

fn reproducibility(fits: &[(String, FitReport)]) -> Outcome {
    let mut differing = Vec::new();
    for (id, first) in fits {
        let b = bundle(id).unwrap();
        let d = b.reproduction_design().unwrap();
        let again = single_threaded(|| fit(&d, &b.options())).unwrap();
        let same = again.without_timings() == first.without_timings()
            && serde_json::to_string(&again.without_timings()).unwrap()
                == serde_json::to_string(&first.without_timings()).unwrap();
        if !same {
            differing.push(id.clone());
        }
    }
    outcome(
        differing.is_empty(),
        format!(
            "{} datasets refit with a fixed seed, differing: {:?}",
            fits.len(),
            differing
        ),
    )
}

fn main() -> ExitCode {
    let mut results: Vec<(String, Outcome)> = Vec::new();
    let mut run = |name: &str, f: &dyn Fn() -> Outcome| {
        let o = f();
        println!("{} {name}: {}", if o.passed { "PASS" } else { "FAIL" }, o.detail);
        results.push((name.to_string(), o));
    };

    run("1 least-squares refit fixtures", &refit_fixtures_match);
    run("2 closed-form prior ratios", &closed_form_prior);
    run("3 noiseless toy recovery", &toy_recovery);
    run("4 toy simulation selection rates", &simulation);
    for id in IDS.iter().filter(|i| **i != "toy_pb12") {
        run(&format!("5 case study {id}"), &|| case_study(id));
    }

    let fits: Vec<(String, FitReport)> = IDS
        .iter()
        .map(|id| {
            let b = bundle(id).unwrap();
            let d = b.reproduction_design().unwrap();
            let f = fit(&d, &b.options()).unwrap();
            let checks = check_fit(&b, &f);
            assert!(!checks.is_empty());
            (id.to_string(), f)
        })
        .collect();
    run(
        "6a likelihood gradient vs finite differences",
        &gradient_vs_finite_differences,
    );
    run("6b QP vs brute-force enumeration", &qp_brute_force);
    run("6c KKT residual on every path solve", &|| path_kkt(&fits));
    run("6d heredity in every reported model", &|| heredity_in_reports(&fits));
    run("6e fixed-seed bitwise reproducibility", &|| reproducibility(&fits));

    let failed = results.iter().filter(|(_, o)| !o.passed).count();
    println!("{} of {} criteria passed", results.len() - failed, results.len());
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
