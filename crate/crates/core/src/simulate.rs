//! Monte Carlo study: responses from a known sparse model on a bundled design
//! plus Gaussian noise, refit with the full pipeline.

use std::collections::BTreeMap;

use nalgebra::{DMatrix, DVector};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::datasets::bundle;
use crate::design::{build_model_matrix, DesignTable, Scope};
use crate::error::{Error, Result};
use crate::garrote::{higarrote, Effect, GarroteOptions};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Term {
    pub effect: String,
    pub coefficient: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SimSpec {
    pub design: String,
    pub model: Vec<Term>,
    pub sd: f64,
    pub replications: usize,
    pub seed: u64,
}

impl Default for SimSpec {
    fn default() -> Self {
        SimSpec {
            design: "toy_pb12".into(),
            model: [("A", 20.0), ("AB", 10.0), ("AC", 5.0)]
                .into_iter()
                .map(|(e, c)| Term {
                    effect: e.into(),
                    coefficient: c,
                })
                .collect(),
            sd: 1.0,
            replications: 100,
            seed: 1,
        }
    }
}

impl SimSpec {
    pub fn validate(&self) -> Result<()> {
        if self.replications == 0 {
            return Err(Error::Config("replications must be at least 1".into()));
        }
        if !(self.sd >= 0.0 && self.sd.is_finite()) {
            return Err(Error::Config(format!(
                "noise sd must be finite and nonnegative, got {}",
                self.sd
            )));
        }
        if self.model.is_empty() {
            return Err(Error::Config("the true model has no terms".into()));
        }
        Ok(())
    }
}

/// Replaces the response of `design` with `Σ coef·column + noise`, columns in
/// coded units of the `scope` model matrix.
pub fn model_response(design: &DesignTable, scope: Scope, model: &[(&str, f64)], noise: &[f64]) -> Result<DesignTable> {
    let mm = build_model_matrix(design, scope)?;
    if noise.len() != design.n_runs() {
        return Err(Error::InvalidInput(format!(
            "{} noise draws for {} runs",
            noise.len(),
            design.n_runs()
        )));
    }
    let mut y = DVector::from_column_slice(noise);
    for (label, coef) in model {
        let j = mm
            .column_index(label)
            .ok_or_else(|| Error::Config(format!("true model names unknown effect `{label}`")))?;
        y += &mm.columns[j].values * *coef;
    }
    DesignTable::new(
        design.factors.clone(),
        design.runs.clone(),
        DMatrix::from_column_slice(y.len(), 1, y.as_slice()),
    )
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Replication {
    pub index: usize,
    pub effects: Vec<Effect>,
    pub r_squared: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EffectSummary {
    pub label: String,
    /// Fraction of replications selecting the effect.
    pub frequency: f64,
    /// Quartiles of the coefficient over the replications that selected it.
    pub q1: f64,
    pub median: f64,
    pub q3: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimSummary {
    pub spec: SimSpec,
    pub effects: Vec<EffectSummary>,
    /// Fraction of replications whose selected set equals the true model.
    pub exact_recovery: f64,
    /// Fraction of replications by number of selected effects.
    pub model_sizes: BTreeMap<usize, f64>,
    pub replications: Vec<Replication>,
}

fn quantile(sorted: &[f64], p: f64) -> f64 {
    if sorted.is_empty() {
        return f64::NAN;
    }
    let h = (sorted.len() - 1) as f64 * p;
    let (lo, hi) = (h.floor() as usize, h.ceil() as usize);
    sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
}

/// Noise for replication `index`: its own ChaCha stream under `seed`.
pub fn noise_draws(seed: u64, index: usize, n: usize, sd: f64) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index as u64);
    if sd == 0.0 {
        return vec![0.0; n];
    }
    let normal = Normal::new(0.0, sd).expect("sd validated");
    (0..n).map(|_| normal.sample(&mut rng)).collect()
}

/// Runs the study; replications run in parallel and are reported in order.
pub fn run_simulation(spec: &SimSpec, opts: &GarroteOptions) -> Result<SimSummary> {
    spec.validate()?;
    let b = bundle(&spec.design)?;
    let design = b.design()?;
    let scope = opts.scope.resolve(&design);
    let model: Vec<(&str, f64)> = spec.model.iter().map(|t| (t.effect.as_str(), t.coefficient)).collect();
    model_response(&design, scope, &model, &vec![0.0; design.n_runs()])?;

    let replications = (0..spec.replications)
        .into_par_iter()
        .map(|i| {
            let noise = noise_draws(spec.seed, i, design.n_runs(), spec.sd);
            let d = model_response(&design, scope, &model, &noise)?;
            let r = higarrote(&d, opts)?;
            Ok(Replication {
                index: i,
                effects: r.effects,
                r_squared: r.r_squared,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(summarize(spec, replications))
}

pub fn summarize(spec: &SimSpec, replications: Vec<Replication>) -> SimSummary {
    let total = replications.len() as f64;
    let mut coefs: BTreeMap<String, Vec<f64>> = BTreeMap::new();
    let mut sizes: BTreeMap<usize, f64> = BTreeMap::new();
    let mut exact = 0usize;
    let mut truth: Vec<&str> = spec.model.iter().map(|t| t.effect.as_str()).collect();
    truth.sort_unstable();
    for r in &replications {
        for e in &r.effects {
            coefs.entry(e.label.clone()).or_default().push(e.beta);
        }
        *sizes.entry(r.effects.len()).or_default() += 1.0 / total;
        let mut sel: Vec<&str> = r.effects.iter().map(|e| e.label.as_str()).collect();
        sel.sort_unstable();
        if sel == truth {
            exact += 1;
        }
    }
    let mut effects: Vec<EffectSummary> = coefs
        .into_iter()
        .map(|(label, mut v)| {
            v.sort_by(f64::total_cmp);
            EffectSummary {
                label,
                frequency: v.len() as f64 / total,
                q1: quantile(&v, 0.25),
                median: quantile(&v, 0.5),
                q3: quantile(&v, 0.75),
            }
        })
        .collect();
    effects.sort_by(|a, b| b.frequency.total_cmp(&a.frequency).then_with(|| a.label.cmp(&b.label)));
    SimSummary {
        spec: spec.clone(),
        effects,
        exact_recovery: exact as f64 / total,
        model_sizes: sizes,
        replications,
    }
}

impl SimSummary {
    pub fn frequency(&self, label: &str) -> f64 {
        self.effects
            .iter()
            .find(|e| e.label == label)
            .map_or(0.0, |e| e.frequency)
    }

    pub fn effect(&self, label: &str) -> Option<&EffectSummary> {
        self.effects.iter().find(|e| e.label == label)
    }

    /// Long-format CSV: one row per replication and selected effect.
    pub fn replications_csv(&self) -> Result<String> {
        let mut w = csv::Writer::from_writer(Vec::new());
        let err = |e: csv::Error| Error::InvalidInput(e.to_string());
        w.write_record(["replication", "effect", "beta", "r_squared"])
            .map_err(err)?;
        for r in &self.replications {
            for e in &r.effects {
                w.write_record([
                    r.index.to_string(),
                    e.label.clone(),
                    format!("{:?}", e.beta),
                    format!("{:?}", r.r_squared),
                ])
                .map_err(err)?;
            }
        }
        let bytes = w.into_inner().map_err(|e| Error::InvalidInput(e.to_string()))?;
        String::from_utf8(bytes).map_err(|e| Error::InvalidInput(e.to_string()))
    }
}
