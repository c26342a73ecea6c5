//! Design configs (JSON or TOML) and CSV design tables.

use std::fmt;
use std::path::Path;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::design::{Coding, DesignTable, FactorKind, FactorSpec, HeredityMode};
use crate::error::{Error, Result};
use crate::garrote::ScopeChoice;

/// A level as written in a config: numbers and strings are both accepted.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Level {
    Number(f64),
    Text(String),
}

impl fmt::Display for Level {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Level::Number(x) => write!(f, "{x}"),
            Level::Text(s) => f.write_str(s),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FactorConfig {
    pub name: String,
    pub kind: FactorKind,
    pub levels: Vec<Level>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub coding: Option<Coding>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Transform {
    Log,
}

/// One column name, or one per replicate.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Columns {
    One(String),
    Many(Vec<String>),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResponseConfig {
    pub column: Columns,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub transform: Option<Transform>,
    /// With a single column name `Y` and `replicates = m`, the replicate
    /// columns are `Y_1 … Y_m`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub replicates: Option<usize>,
}

impl ResponseConfig {
    pub fn column_names(&self) -> Result<Vec<String>> {
        match (&self.column, self.replicates) {
            (Columns::One(c), None | Some(1)) => Ok(vec![c.clone()]),
            (Columns::One(c), Some(m)) if m > 1 => Ok((1..=m).map(|i| format!("{c}_{i}")).collect()),
            (Columns::Many(cs), r) if !cs.is_empty() && r.is_none_or(|m| m == cs.len()) => Ok(cs.clone()),
            _ => Err(Error::Config(format!(
                "response columns {:?} do not match replicates {:?}",
                self.column, self.replicates
            ))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DesignConfig {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub name: Option<String>,
    pub factors: Vec<FactorConfig>,
    pub response: ResponseConfig,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub scope: Option<ScopeChoice>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub heredity: Option<HeredityMode>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ConfigFormat {
    Json,
    Toml,
}

impl DesignConfig {
    pub fn parse(text: &str, format: ConfigFormat) -> Result<Self> {
        match format {
            ConfigFormat::Json => serde_json::from_str(text)
                .map_err(|e| Error::Config(format!("line {}, column {}: {e}", e.line(), e.column()))),
            ConfigFormat::Toml => toml::from_str(text).map_err(|e| Error::Config(e.to_string())),
        }
    }

    /// Reads a config, choosing the format from the extension (`.toml`, else JSON).
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        let format = match path.extension().and_then(|e| e.to_str()) {
            Some("toml") => ConfigFormat::Toml,
            _ => ConfigFormat::Json,
        };
        Self::parse(&text, format).map_err(|e| match e {
            Error::Config(m) => Error::Config(format!("{}: {m}", path.display())),
            other => other,
        })
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn factor_specs(&self) -> Result<Vec<FactorSpec>> {
        self.factors
            .iter()
            .map(|f| {
                let levels: Vec<String> = f.levels.iter().map(ToString::to_string).collect();
                let spec = FactorSpec {
                    name: f.name.clone(),
                    kind: f.kind,
                    levels,
                    coding: f.coding.clone().unwrap_or(Coding::default_for(f.kind)),
                };
                spec.validate()?;
                Ok(spec)
            })
            .collect()
    }

    /// Config describing `design` with response columns `columns`.
    pub fn from_design(design: &DesignTable, name: Option<&str>, columns: Vec<String>) -> Self {
        DesignConfig {
            name: name.map(str::to_string),
            factors: design
                .factors
                .iter()
                .map(|f| FactorConfig {
                    name: f.name.clone(),
                    kind: f.kind,
                    levels: f.levels.iter().cloned().map(Level::Text).collect(),
                    coding: Some(f.coding.clone()),
                })
                .collect(),
            response: ResponseConfig {
                column: if columns.len() == 1 {
                    Columns::One(columns[0].clone())
                } else {
                    Columns::Many(columns)
                },
                transform: None,
                replicates: None,
            },
            scope: None,
            heredity: None,
        }
    }
}

/// Parses CSV text into a design table according to `config`. Factor and
/// response columns are matched by header name; other columns are ignored.
/// `source` names the input in error messages.
pub fn parse_design(text: &str, source: &str, config: &DesignConfig) -> Result<DesignTable> {
    let factors = config.factor_specs()?;
    let responses = config.response.column_names()?;
    let mut reader = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_reader(text.as_bytes());
    let parse_err = |line: u64, column: usize, message: String| Error::Parse {
        path: source.to_string(),
        line: line as usize,
        column,
        message,
    };
    let headers = reader.headers().map_err(|e| parse_err(1, 0, e.to_string()))?.clone();
    let find = |name: &str| {
        headers
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| parse_err(1, 0, format!("missing column `{name}`")))
    };
    let factor_cols = factors.iter().map(|f| find(&f.name)).collect::<Result<Vec<_>>>()?;
    let response_cols = responses.iter().map(|r| find(r)).collect::<Result<Vec<_>>>()?;

    let mut runs = Vec::new();
    let mut values = Vec::new();
    for record in reader.records() {
        let record = record.map_err(|e| {
            let line = e.position().map_or(0, |p| p.line());
            parse_err(line, 0, e.to_string())
        })?;
        let line = record.position().map_or(0, |p| p.line());
        let cell = |c: usize| record.get(c).unwrap_or("");
        let mut run = Vec::with_capacity(factors.len());
        for (f, &c) in factors.iter().zip(&factor_cols) {
            let raw = cell(c);
            let idx = f.level_index(raw).ok_or_else(|| {
                parse_err(
                    line,
                    c + 1,
                    format!(
                        "`{raw}` is not a level of factor `{}` (levels: {})",
                        f.name,
                        f.levels.join(", ")
                    ),
                )
            })?;
            run.push(idx);
        }
        let mut row = Vec::with_capacity(response_cols.len());
        for &c in &response_cols {
            let raw = cell(c);
            let mut v: f64 = raw
                .parse()
                .ok()
                .filter(|v: &f64| v.is_finite())
                .ok_or_else(|| parse_err(line, c + 1, format!("response `{raw}` is not a finite number")))?;
            if config.response.transform == Some(Transform::Log) {
                if v <= 0.0 {
                    return Err(parse_err(
                        line,
                        c + 1,
                        format!("log transform needs a positive response, got {raw}"),
                    ));
                }
                v = v.ln();
            }
            row.push(v);
        }
        runs.push(run);
        values.push(row);
    }
    if runs.is_empty() {
        return Err(parse_err(1, 0, "no data rows".into()));
    }
    let response = DMatrix::from_fn(values.len(), response_cols.len(), |i, j| values[i][j]);
    DesignTable::new(factors, runs, response)
}

pub fn read_design(csv_path: &Path, config: &DesignConfig) -> Result<DesignTable> {
    let text = std::fs::read_to_string(csv_path)?;
    parse_design(&text, &csv_path.display().to_string(), config)
}

/// Writes `design` as CSV with level labels and response columns `columns`.
pub fn design_to_csv(design: &DesignTable, columns: &[String]) -> Result<String> {
    if columns.len() != design.replicate_count() {
        return Err(Error::InvalidInput(format!(
            "{} response column names for {} replicates",
            columns.len(),
            design.replicate_count()
        )));
    }
    let mut w = csv::Writer::from_writer(Vec::new());
    let header: Vec<&str> = design
        .factors
        .iter()
        .map(|f| f.name.as_str())
        .chain(columns.iter().map(String::as_str))
        .collect();
    let io = |e: csv::Error| Error::InvalidInput(e.to_string());
    w.write_record(&header).map_err(io)?;
    for (i, run) in design.runs.iter().enumerate() {
        let mut rec: Vec<String> = run
            .iter()
            .zip(&design.factors)
            .map(|(&l, f)| f.levels[l].clone())
            .collect();
        // `{:?}` on f64 is the shortest representation that round-trips.
        rec.extend(design.response.row(i).iter().map(|v| format!("{v:?}")));
        w.write_record(&rec).map_err(io)?;
    }
    let bytes = w.into_inner().map_err(|e| Error::InvalidInput(e.to_string()))?;
    String::from_utf8(bytes).map_err(|e| Error::InvalidInput(e.to_string()))
}

#[cfg(test)]
mod tests {
    use super::*;

    const CONFIG: &str = r#"{
        "factors": [
            {"name": "A", "kind": "quantitative", "levels": [-1, 1]},
            {"name": "B", "kind": "qualitative", "levels": ["x", "y", "z"]},
            {"name": "D", "kind": "qualitative", "levels": [1, 2, 3, 4], "coding": "paired_level_4"}
        ],
        "response": {"column": "Y", "transform": "log"}
    }"#;

    const CSV: &str = "A,B,D,Y\n-1,x,1,1.0\n1,y,2,2.0\n-1,z,3,3.0\n1,x,4,4.0\n";

    #[test]
    fn parses_json_and_csv() {
        let cfg = DesignConfig::parse(CONFIG, ConfigFormat::Json).unwrap();
        let d = parse_design(CSV, "t.csv", &cfg).unwrap();
        assert_eq!(d.runs[1], vec![1, 1, 1]);
        assert!((d.response[(3, 0)] - 4f64.ln()).abs() < 1e-15);
        assert_eq!(d.factors[2].coding, Coding::PairedLevel4);
    }

    #[test]
    fn toml_matches_json() {
        let toml_text = r#"
            [[factors]]
            name = "A"
            kind = "quantitative"
            levels = [-1, 1]

            [[factors]]
            name = "B"
            kind = "qualitative"
            levels = ["x", "y", "z"]

            [[factors]]
            name = "D"
            kind = "qualitative"
            levels = [1, 2, 3, 4]
            coding = "paired_level_4"

            [response]
            column = "Y"
            transform = "log"
        "#;
        let a = DesignConfig::parse(toml_text, ConfigFormat::Toml).unwrap();
        let b = DesignConfig::parse(CONFIG, ConfigFormat::Json).unwrap();
        assert_eq!(a.factor_specs().unwrap(), b.factor_specs().unwrap());
    }

    #[test]
    fn bad_cell_reports_line_and_column() {
        let cfg = DesignConfig::parse(CONFIG, ConfigFormat::Json).unwrap();
        let bad = "A,B,D,Y\n-1,x,1,1.0\n1,q,2,2.0\n";
        match parse_design(bad, "bad.csv", &cfg) {
            Err(Error::Parse {
                line, column, message, ..
            }) => {
                assert_eq!((line, column), (3, 2));
                assert!(message.contains("`q`"));
            }
            other => panic!("unexpected {other:?}"),
        }
        let bad = "A,B,D,Y\n-1,x,1,abc\n";
        assert!(matches!(
            parse_design(bad, "bad.csv", &cfg),
            Err(Error::Parse { line: 2, column: 4, .. })
        ));
        let bad = "A,B,Y\n-1,x,1\n";
        assert!(matches!(
            parse_design(bad, "bad.csv", &cfg),
            Err(Error::Parse { line: 1, .. })
        ));
        assert!(DesignConfig::parse("{\"factors\": 3}", ConfigFormat::Json).is_err());
    }

    #[test]
    fn replicate_columns() {
        let mut cfg = DesignConfig::parse(CONFIG, ConfigFormat::Json).unwrap();
        cfg.response.transform = None;
        cfg.response.replicates = Some(2);
        let csv = "A,B,D,Y_1,Y_2\n-1,x,1,1,2\n1,y,2,3,4\n";
        let d = parse_design(csv, "r.csv", &cfg).unwrap();
        assert_eq!(d.replicate_count(), 2);
        assert_eq!(d.response[(1, 1)], 4.0);
        cfg.response.column = Columns::Many(vec!["Y_1".into()]);
        assert!(parse_design(csv, "r.csv", &cfg).is_err());
    }

    #[test]
    fn round_trip() {
        let cfg = DesignConfig::parse(CONFIG, ConfigFormat::Json).unwrap();
        let d = parse_design(CSV, "t.csv", &cfg).unwrap();
        let cols = vec!["Y".to_string()];
        let text = design_to_csv(&d, &cols).unwrap();
        let cfg2 = DesignConfig::from_design(&d, None, cols);
        let json = cfg2.to_json().unwrap();
        let cfg3 = DesignConfig::parse(&json, ConfigFormat::Json).unwrap();
        assert_eq!(parse_design(&text, "rt.csv", &cfg3).unwrap(), d);
    }
}
