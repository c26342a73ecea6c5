//! Runs bundled case studies and checks them against their expectations.

use std::time::Instant;

use rayon::prelude::*;
use serde::Serialize;

use crate::datasets::{bundle, Check, DatasetBundle, RefitFixture, IDS};
use crate::design::{build_model_matrix, center_response};
use crate::error::{Error, Result};
use crate::garrote::{higarrote, ls_refit, FitReport, GarroteOptions};

#[derive(Debug, Clone, Serialize)]
pub struct CheckResult {
    pub check: Check,
    pub provenance: String,
    pub passed: bool,
    pub detail: String,
}

#[derive(Debug, Clone, Serialize)]
pub struct DatasetVerdict {
    pub id: String,
    pub passed: bool,
    pub checks: Vec<CheckResult>,
    pub fit: FitReport,
    pub elapsed_ms: f64,
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map_or("not selected".into(), |b| format!("{b:.4}"))
}

/// Evaluates one check against a fit.
pub fn evaluate(check: &Check, fit: &FitReport) -> (bool, String) {
    match check {
        Check::Selected(labels) => {
            let missing: Vec<&str> = labels
                .iter()
                .map(String::as_str)
                .filter(|l| fit.effect(l).is_none())
                .collect();
            let detail = if missing.is_empty() {
                format!("selected {{{}}}", labels.join(", "))
            } else {
                format!("missing {{{}}}", missing.join(", "))
            };
            (missing.is_empty(), detail)
        }
        Check::Coefficient { label, lo, hi } => {
            let b = fit.effect(label);
            let ok = b.is_some_and(|b| b >= *lo && b <= *hi);
            (ok, format!("{label} = {} in [{lo:.3}, {hi:.3}]", fmt_opt(b)))
        }
        Check::Sign { label, positive } => {
            let b = fit.effect(label);
            let ok = b.is_some_and(|b| if *positive { b > 0.0 } else { b < 0.0 });
            let sign = if *positive { '+' } else { '-' };
            (ok, format!("{label} = {} with sign {sign}", fmt_opt(b)))
        }
        Check::RSquaredAtLeast(min) => (fit.r_squared >= *min, format!("R² = {:.4} ≥ {min:.2}", fit.r_squared)),
        Check::ExtrasBelow { allowed, bound } => {
            let extras: Vec<String> = fit
                .effects
                .iter()
                .filter(|e| !allowed.contains(&e.label) && e.beta.abs() >= *bound)
                .map(|e| format!("{}={:.3}", e.label, e.beta))
                .collect();
            let detail = if extras.is_empty() {
                format!("no other effect with |β| ≥ {bound}")
            } else {
                format!("large extras: {}", extras.join(", "))
            };
            (extras.is_empty(), detail)
        }
    }
}

pub fn check_fit(b: &DatasetBundle, fit: &FitReport) -> Vec<CheckResult> {
    b.expected
        .iter()
        .map(|e| {
            let (passed, detail) = evaluate(&e.check, fit);
            CheckResult {
                check: e.check.clone(),
                provenance: e.provenance.clone(),
                passed,
                detail,
            }
        })
        .collect()
}

/// Runs one bundled dataset with its default options adjusted by `tweak`.
pub fn reproduce_with(id: &str, tweak: impl Fn(&mut GarroteOptions)) -> Result<DatasetVerdict> {
    let b = bundle(id)?;
    let t = Instant::now();
    let design = b.reproduction_design()?;
    let mut opts = b.options();
    tweak(&mut opts);
    let fit = higarrote(&design, &opts)?;
    let elapsed_ms = t.elapsed().as_secs_f64() * 1e3;
    let checks = check_fit(&b, &fit);
    Ok(DatasetVerdict {
        id: b.id.to_string(),
        passed: checks.iter().all(|c| c.passed),
        checks,
        fit,
        elapsed_ms,
    })
}

pub fn reproduce(id: &str) -> Result<DatasetVerdict> {
    reproduce_with(id, |_| {})
}

/// `"all"` or a single id; datasets run in parallel and come back in
/// bundle order.
pub fn reproduce_many(which: &str, tweak: impl Fn(&mut GarroteOptions) + Sync) -> Result<Vec<DatasetVerdict>> {
    let ids: Vec<&str> = if which == "all" {
        IDS.to_vec()
    } else {
        vec![IDS
            .iter()
            .copied()
            .find(|i| *i == which)
            .ok_or_else(|| Error::UnknownDataset(which.to_string()))?]
    };
    ids.par_iter().map(|id| reproduce_with(id, &tweak)).collect()
}

/// Least-squares refit R² of a published model on its bundled design.
pub fn refit_r_squared(f: &RefitFixture) -> Result<f64> {
    let b = bundle(f.dataset)?;
    let d = b.design()?;
    let mm = build_model_matrix(&d, b.scope_choice().resolve(&d))?;
    let y = center_response(&d)?;
    let idx = f
        .labels
        .iter()
        .map(|l| {
            mm.column_index(l)
                .ok_or_else(|| Error::Config(format!("{}: unknown effect `{l}`", f.dataset)))
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(ls_refit(&mm.matrix(), &idx, &y.values).1)
}

impl DatasetVerdict {
    pub fn to_text(&self) -> String {
        let mut s = format!(
            "{} {} ({:.0} ms)\n",
            if self.passed { "PASS" } else { "FAIL" },
            self.id,
            self.elapsed_ms
        );
        for c in &self.checks {
            s.push_str(&format!(
                "  {} {}  [{}]\n",
                if c.passed { "ok  " } else { "FAIL" },
                c.detail,
                c.provenance
            ));
        }
        s
    }
}
