//! Bundled case-study designs with their published expectations.

use serde::Serialize;

use crate::design::{build_model_matrix, DesignTable, Scope};
use crate::error::{Error, Result};
use crate::garrote::{GarroteOptions, ScopeChoice};
use crate::io::{parse_design, ConfigFormat, DesignConfig};

/// One verifiable claim about a fit.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub enum Check {
    /// All of these effects are selected.
    Selected(Vec<String>),
    /// The coefficient of `label` lies in `[lo, hi]`.
    Coefficient { label: String, lo: f64, hi: f64 },
    /// The coefficient of `label` has this sign.
    Sign { label: String, positive: bool },
    /// Least-squares refit R² is at least this.
    RSquaredAtLeast(f64),
    /// Every selected effect outside `allowed` has `|β| < bound`.
    ExtrasBelow { allowed: Vec<String>, bound: f64 },
}

impl Check {
    /// Window of ±0.15 absolute or ±15% relative around `target`, whichever
    /// is wider.
    pub fn near(label: &str, target: f64) -> Check {
        let tol = 0.15f64.max(0.15 * target.abs());
        Check::Coefficient {
            label: label.into(),
            lo: target - tol,
            hi: target + tol,
        }
    }

    pub fn within(label: &str, lo: f64, hi: f64) -> Check {
        Check::Coefficient {
            label: label.into(),
            lo,
            hi,
        }
    }

    pub fn selected(labels: &[&str]) -> Check {
        Check::Selected(labels.iter().map(|s| s.to_string()).collect())
    }

    pub fn sign(label: &str, positive: bool) -> Check {
        Check::Sign {
            label: label.into(),
            positive,
        }
    }

    /// Effect labels this check refers to.
    pub fn labels(&self) -> Vec<&str> {
        match self {
            Check::Selected(v) => v.iter().map(String::as_str).collect(),
            Check::ExtrasBelow { allowed, .. } => allowed.iter().map(String::as_str).collect(),
            Check::Coefficient { label, .. } | Check::Sign { label, .. } => vec![label.as_str()],
            Check::RSquaredAtLeast(_) => Vec::new(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Expectation {
    pub check: Check,
    /// Published source of the expected value.
    pub provenance: String,
}

/// Published model whose least-squares refit R² is known.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RefitFixture {
    pub dataset: &'static str,
    pub labels: Vec<&'static str>,
    pub r_squared: f64,
    pub provenance: &'static str,
}

#[derive(Debug, Clone)]
pub struct DatasetBundle {
    pub id: &'static str,
    pub csv: &'static str,
    pub config: DesignConfig,
    pub expected: Vec<Expectation>,
    /// When set, reproduction replaces the response with this noiseless
    /// model evaluated on the bundled design.
    pub true_model: Option<Vec<(&'static str, f64)>>,
}

pub const IDS: [&str; 7] = [
    "toy_pb12",
    "cast_fatigue",
    "frac_2_9_5",
    "router_bit",
    "blood_glucose",
    "resin_dsd",
    "epoxy_ssd",
];

fn sources(id: &str) -> Option<(&'static str, &'static str)> {
    Some(match id {
        "toy_pb12" => (
            include_str!("../data/toy_pb12.csv"),
            include_str!("../data/toy_pb12.json"),
        ),
        "cast_fatigue" => (
            include_str!("../data/cast_fatigue.csv"),
            include_str!("../data/cast_fatigue.json"),
        ),
        "frac_2_9_5" => (
            include_str!("../data/frac_2_9_5.csv"),
            include_str!("../data/frac_2_9_5.json"),
        ),
        "router_bit" => (
            include_str!("../data/router_bit.csv"),
            include_str!("../data/router_bit.json"),
        ),
        "blood_glucose" => (
            include_str!("../data/blood_glucose.csv"),
            include_str!("../data/blood_glucose.json"),
        ),
        "resin_dsd" => (
            include_str!("../data/resin_dsd.csv"),
            include_str!("../data/resin_dsd.json"),
        ),
        "epoxy_ssd" => (
            include_str!("../data/epoxy_ssd.csv"),
            include_str!("../data/epoxy_ssd.json"),
        ),
        _ => return None,
    })
}

fn expect(check: Check, provenance: &str) -> Expectation {
    Expectation {
        check,
        provenance: provenance.into(),
    }
}

fn expectations(id: &str) -> Vec<Expectation> {
    match id {
        "toy_pb12" => {
            let src = "Table 1 design; true model y = 20A + 10AB + 5AC";
            vec![
                expect(Check::selected(&["A", "AB", "AC"]), src),
                expect(Check::within("A", 19.5, 20.5), src),
                expect(Check::within("AB", 9.5, 10.5), src),
                expect(Check::within("AC", 4.5, 5.5), src),
                expect(
                    Check::ExtrasBelow {
                        allowed: vec!["A".into(), "AB".into(), "AC".into()],
                        bound: 1.0,
                    },
                    src,
                ),
            ]
        }
        "cast_fatigue" => {
            let src = "Table 4, Selected Effects in Cast Fatigue Experiment: F(.44), FG(-.43), R² 96%";
            vec![
                expect(Check::selected(&["F", "FG"]), src),
                expect(Check::within("F", 0.39, 0.49), src),
                expect(Check::within("FG", -0.48, -0.38), src),
                expect(Check::RSquaredAtLeast(0.90), src),
            ]
        }
        "frac_2_9_5" => {
            let src = "Table 2, Selected Effects in the 2^(9-5) Experiment: EJ(-1.29), J, E, G, GJ";
            vec![
                expect(Check::selected(&["EJ", "J", "E", "G", "GJ"]), src),
                expect(Check::sign("EJ", false), src),
                expect(Check::sign("J", false), src),
                expect(Check::sign("E", true), src),
                expect(Check::sign("G", true), src),
                expect(Check::sign("GJ", true), src),
                expect(Check::near("EJ", -1.29), src),
            ]
        }
        "router_bit" => {
            let src = "Table 3, Selected Effects in Router Bit Experiment";
            vec![expect(Check::selected(&["D_2", "G", "J", "GJ", "D_2H"]), src)]
        }
        "blood_glucose" => {
            let src = "Table 5, Selected Effects in Blood Glucose Experiment";
            vec![
                expect(Check::selected(&["B_lH_q", "B_qH_q", "B_l"]), src),
                expect(Check::RSquaredAtLeast(0.90), src),
            ]
        }
        "resin_dsd" => {
            let src = "Table 6, Selected Effects in Resin Experiment: F(-2.20), A";
            vec![
                expect(Check::selected(&["F_l", "A_l"]), src),
                expect(Check::within("F_l", -2.35, -2.05), src),
                expect(Check::RSquaredAtLeast(0.95), src),
            ]
        }
        "epoxy_ssd" => {
            let src = "Table 7, Selected Effects in Epoxy Experiment: 15(-61.22), 12, 20";
            vec![
                expect(Check::selected(&["15", "12", "20"]), src),
                expect(Check::within("15", -71.0, -55.0), src),
                expect(Check::RSquaredAtLeast(0.95), src),
            ]
        }
        _ => Vec::new(),
    }
}

/// Published models used as least-squares refit fixtures.
pub fn refit_fixtures() -> Vec<RefitFixture> {
    vec![
        RefitFixture {
            dataset: "cast_fatigue",
            labels: vec!["F", "D"],
            r_squared: 0.59,
            provenance: "Table 4, Hunter model",
        },
        RefitFixture {
            dataset: "cast_fatigue",
            labels: vec!["F", "FG"],
            r_squared: 0.89,
            provenance: "Table 4, stepH model",
        },
        RefitFixture {
            dataset: "frac_2_9_5",
            labels: vec!["EJ", "J", "E", "G", "GJ"],
            r_squared: 0.70,
            provenance: "Table 2",
        },
        RefitFixture {
            dataset: "blood_glucose",
            labels: vec!["E_q", "F_q", "E_lF_l"],
            r_squared: 0.68,
            provenance: "Table 5",
        },
        RefitFixture {
            dataset: "resin_dsd",
            labels: vec!["F_l"],
            r_squared: 0.88,
            provenance: "Table 6, RAMP model",
        },
        RefitFixture {
            dataset: "epoxy_ssd",
            labels: vec!["15", "20", "12", "4", "10"],
            r_squared: 0.97,
            provenance: "Table 7",
        },
    ]
}

/// Loads a bundled dataset by id.
pub fn bundle(id: &str) -> Result<DatasetBundle> {
    let (csv, config) = sources(id).ok_or_else(|| Error::UnknownDataset(id.to_string()))?;
    let id = IDS.iter().copied().find(|i| *i == id).expect("sources and IDS agree");
    let config = DesignConfig::parse(config, ConfigFormat::Json)?;
    let true_model = (id == "toy_pb12").then(|| vec![("A", 20.0), ("AB", 10.0), ("AC", 5.0)]);
    let b = DatasetBundle {
        id,
        csv,
        config,
        expected: expectations(id),
        true_model,
    };
    b.validate()?;
    Ok(b)
}

impl DatasetBundle {
    /// The design exactly as bundled.
    pub fn design(&self) -> Result<DesignTable> {
        parse_design(self.csv, self.id, &self.config)
    }

    /// The design the reproduction runs on.
    pub fn reproduction_design(&self) -> Result<DesignTable> {
        let d = self.design()?;
        match &self.true_model {
            Some(model) => crate::simulate::model_response(&d, self.scope_for(&d), model, &vec![0.0; d.n_runs()]),
            None => Ok(d),
        }
    }

    pub fn scope_choice(&self) -> ScopeChoice {
        self.config.scope.unwrap_or_default()
    }

    fn scope_for(&self, d: &DesignTable) -> Scope {
        self.scope_choice().resolve(d)
    }

    pub fn options(&self) -> GarroteOptions {
        let mut o = GarroteOptions {
            scope: self.scope_choice(),
            ..GarroteOptions::default()
        };
        if let Some(h) = self.config.heredity {
            o.heredity = h;
        }
        o
    }

    /// Refuses expectations without provenance or naming unknown effects.
    pub fn validate(&self) -> Result<()> {
        let d = self.design()?;
        let mm = build_model_matrix(&d, self.scope_for(&d))?;
        for e in &self.expected {
            if e.provenance.trim().is_empty() {
                return Err(Error::Config(format!(
                    "{}: expectation {:?} has no provenance",
                    self.id, e.check
                )));
            }
            if let Some(l) = e.check.labels().into_iter().find(|l| mm.column_index(l).is_none()) {
                return Err(Error::Config(format!(
                    "{}: expectation names unknown effect `{l}`",
                    self.id
                )));
            }
        }
        Ok(())
    }
}
