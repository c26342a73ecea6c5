//! Machine (JSON) and human (aligned text) renderings of a fit.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::design::{HeredityMode, Scope};
use crate::garrote::{Effect, FitReport, PathPoint};
use crate::prior::Hyperparams;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridInfo {
    pub points: usize,
    pub lo: f64,
    pub hi: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Report {
    pub dataset: String,
    pub seed: u64,
    pub hyper: Hyperparams,
    pub path: Vec<PathPoint>,
    pub effects: Vec<Effect>,
    pub r_squared: f64,
    pub runtime_ms: f64,
    pub scope: Scope,
    pub heredity: HeredityMode,
    /// Number of model-matrix columns considered.
    pub n_columns: usize,
    #[serde(rename = "M")]
    pub m: Option<f64>,
    pub grid: Option<GridInfo>,
}

impl Report {
    pub fn new(dataset: &str, fit: &FitReport) -> Self {
        Report {
            dataset: dataset.to_string(),
            seed: fit.seed,
            hyper: fit.hyper.clone(),
            path: fit.path.clone(),
            effects: fit.effects.clone(),
            r_squared: fit.r_squared,
            runtime_ms: fit.timings.total_ms,
            scope: fit.scope,
            heredity: fit.heredity,
            n_columns: fit.labels.len(),
            m: fit.solution.m,
            grid: match (fit.grid.first(), fit.grid.last()) {
                (Some(&lo), Some(&hi)) => Some(GridInfo {
                    points: fit.grid.len(),
                    lo,
                    hi,
                }),
                _ => None,
            },
        }
    }

    pub fn to_json(&self) -> serde_json::Result<String> {
        serde_json::to_string_pretty(self)
    }

    pub fn to_text(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "dataset   {}", self.dataset);
        let _ = writeln!(
            s,
            "scope     {} ({} columns)   heredity {}   seed {}",
            self.scope, self.n_columns, self.heredity, self.seed
        );
        let _ = writeln!(
            s,
            "lambda    {:.4}   nu2 {:.4}   nll {:.4}",
            self.hyper.lambda, self.hyper.nu2, self.hyper.nll
        );
        let rho: Vec<String> = self.hyper.rho.iter().map(|r| format!("{r:.3}")).collect();
        let _ = writeln!(s, "rho       {}", rho.join(" "));
        match (self.m, &self.grid) {
            (Some(m), Some(g)) => {
                let _ = writeln!(s, "M         {m:.4}   grid {} points on [{}, {}]", g.points, g.lo, g.hi);
            }
            _ => {
                let _ = writeln!(s, "M         (replicated criterion)");
            }
        }
        let _ = writeln!(s, "R^2       {:.4}", self.r_squared);
        let _ = writeln!(s, "runtime   {:.1} ms", self.runtime_ms);
        let _ = writeln!(s);
        let width = self.effects.iter().map(|e| e.label.len()).max().unwrap_or(6).max(6);
        let _ = writeln!(s, "{:<width$}  {:>12}", "effect", "beta");
        for e in &self.effects {
            let _ = writeln!(s, "{:<width$}  {:>12.4}", e.label, e.beta);
        }
        s
    }
}
