//! Scenario files, result records and grid CSV output.

use std::collections::BTreeMap;
use std::io::{Read, Write};
use std::path::Path;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::allocation::{allocate, Strategy};
use crate::error::{Error, Result};
use crate::estimators::{
    Basis, EstimationContext, Estimator, InterpolationMethod, Method, TargetSpec,
};
use crate::linalg::{Weights, CONDITION_WARNING};
use crate::model::{ModelFunction, ModelSpec};
use crate::multiindex::LowerSet;
use crate::placement::{find_lower_set_relabeling, PointSet, Relabeling};

pub const SCENARIO_VERSION: u32 = 1;

#[derive(Clone, Debug, PartialEq)]
pub enum LowerSetChoice {
    Auto,
    Explicit(LowerSet),
}

#[derive(Serialize, Deserialize)]
#[serde(untagged)]
enum LowerSetRepr {
    Keyword(String),
    Explicit(LowerSet),
}

impl Serialize for LowerSetChoice {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        match self {
            LowerSetChoice::Auto => LowerSetRepr::Keyword("auto".into()).serialize(s),
            LowerSetChoice::Explicit(l) => LowerSetRepr::Explicit(l.clone()).serialize(s),
        }
    }
}

impl<'de> Deserialize<'de> for LowerSetChoice {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        match LowerSetRepr::deserialize(d)? {
            LowerSetRepr::Keyword(k) if k == "auto" => Ok(LowerSetChoice::Auto),
            LowerSetRepr::Keyword(k) => Err(serde::de::Error::custom(format!(
                "expected \"auto\" or a list of multi-indices, found \"{k}\""
            ))),
            LowerSetRepr::Explicit(l) => Ok(LowerSetChoice::Explicit(l)),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
pub enum ModelChoice {
    Monomials { lower_set: LowerSetChoice },
    Functions { functions: Vec<ModelFunction> },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Resources {
    #[serde(rename = "N")]
    pub total: f64,
    #[serde(default = "one")]
    pub repetitions: u32,
}

fn one() -> u32 {
    1
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    pub version: u32,
    pub dimension: usize,
    pub sensors: PointSet,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub labels: Option<Vec<String>>,
    pub model: ModelChoice,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub field_values: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub weights: Option<Weights>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub resources: Option<Resources>,
    #[serde(default)]
    pub targets: Vec<TargetSpec>,
}

/// The model a scenario resolves to, with how an automatic lower set was found.
#[derive(Clone, Debug)]
pub struct ResolvedModel {
    pub basis: Basis,
    pub relabeling: Option<Relabeling>,
}

impl Scenario {
    pub fn from_json_str(text: &str) -> Result<Scenario> {
        let de = &mut serde_json::Deserializer::from_str(text);
        let scenario: Scenario = serde_path_to_error::deserialize(de).map_err(|e| {
            let path = e.path().to_string();
            Error::scenario(path, e.into_inner().to_string())
        })?;
        scenario.validate()?;
        Ok(scenario)
    }

    pub fn to_json_string(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    /// Cross-field invariants that the schema alone cannot express.
    pub fn validate(&self) -> Result<()> {
        if self.version != SCENARIO_VERSION {
            return Err(Error::scenario(
                "version",
                format!(
                    "unsupported version {}, expected {SCENARIO_VERSION}",
                    self.version
                ),
            ));
        }
        let p = self.sensors.len();
        if self.sensors.dim() != self.dimension {
            return Err(Error::scenario(
                "sensors",
                format!(
                    "sensors have dimension {}, scenario declares {}",
                    self.sensors.dim(),
                    self.dimension
                ),
            ));
        }
        if let Err(Error::DuplicatePoints { first, second }) = self.sensors.check_distinct() {
            return Err(Error::scenario(
                format!("sensors[{second}]"),
                format!("duplicates sensor {first}"),
            ));
        }
        if let Some(labels) = &self.labels {
            if labels.len() != p {
                return Err(Error::scenario(
                    "labels",
                    format!("{} labels for {p} sensors", labels.len()),
                ));
            }
        }
        if let Some(f) = &self.field_values {
            if f.len() != p {
                return Err(Error::scenario(
                    "field_values",
                    format!("{} values for {p} sensors", f.len()),
                ));
            }
            if f.iter().any(|v| !v.is_finite()) {
                return Err(Error::scenario("field_values", "values must be finite"));
            }
        }
        if let Some(w) = &self.weights {
            w.validate(p)
                .map_err(|e| Error::scenario("weights", e.to_string()))?;
        }
        if let Some(r) = &self.resources {
            if !(r.total > 0.0 && r.total.is_finite()) {
                return Err(Error::scenario("resources.N", "must be positive"));
            }
            if r.repetitions == 0 {
                return Err(Error::scenario(
                    "resources.repetitions",
                    "must be at least 1",
                ));
            }
        }
        match &self.model {
            ModelChoice::Monomials {
                lower_set: LowerSetChoice::Explicit(l),
            } => {
                if l.dim() != self.dimension {
                    return Err(Error::scenario(
                        "model.lower_set",
                        format!("multi-indices have dimension {}", l.dim()),
                    ));
                }
                if l.len() > p {
                    return Err(Error::scenario(
                        "model.lower_set",
                        format!("{} monomials exceed the {p} sensors", l.len()),
                    ));
                }
            }
            ModelChoice::Monomials { .. } => {}
            ModelChoice::Functions { functions } => {
                ModelSpec::new(self.dimension, functions.clone())
                    .map_err(|e| Error::scenario("model.functions", e.to_string()))?;
                if functions.len() > p {
                    return Err(Error::scenario(
                        "model.functions",
                        format!("{} functions exceed the {p} sensors", functions.len()),
                    ));
                }
            }
        }
        for (i, t) in self.targets.iter().enumerate() {
            t.validate(self.dimension)
                .map_err(|e| Error::scenario(format!("targets[{i}]"), e.to_string()))?;
        }
        Ok(())
    }

    /// Resolves `"auto"` lower sets through placement equivalence.
    pub fn resolve_model(&self) -> Result<ResolvedModel> {
        match &self.model {
            ModelChoice::Monomials {
                lower_set: LowerSetChoice::Explicit(l),
            } => Ok(ResolvedModel {
                basis: Basis::Monomials(l.clone()),
                relabeling: None,
            }),
            ModelChoice::Monomials {
                lower_set: LowerSetChoice::Auto,
            } => match find_lower_set_relabeling(&self.sensors)? {
                Some((l, r)) => Ok(ResolvedModel {
                    basis: Basis::Monomials(l),
                    relabeling: Some(r),
                }),
                None => Err(Error::scenario(
                    "model.lower_set",
                    "sensor placement is not equivalent to any lower set; give the lower set explicitly",
                )),
            },
            ModelChoice::Functions { functions } => Ok(ResolvedModel {
                basis: Basis::Functions(ModelSpec::new(self.dimension, functions.clone())?),
                relabeling: None,
            }),
        }
    }

    pub fn context(&self, method: InterpolationMethod) -> Result<EstimationContext> {
        let resolved = self.resolve_model()?;
        Ok(EstimationContext {
            points: self.sensors.clone(),
            basis: resolved.basis,
            weights: self.weights.clone().unwrap_or_default(),
            method,
        })
    }
}

pub fn load_scenario(path: impl AsRef<Path>) -> Result<Scenario> {
    let text = std::fs::read_to_string(path)?;
    Scenario::from_json_str(&text)
}

pub fn read_scenario<R: Read>(mut reader: R) -> Result<Scenario> {
    let mut text = String::new();
    reader.read_to_string(&mut text)?;
    Scenario::from_json_str(&text)
}

/// One estimator's output, ready for JSON.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ResultRecord {
    pub target_id: usize,
    pub target: TargetSpec,
    pub method: Method,
    pub c: Vec<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub predicted_value: Option<f64>,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub variances: BTreeMap<String, f64>,
    pub error_free: bool,
    pub condition_number: f64,
    pub condition_warning: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub bias_direction: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub warnings: Vec<String>,
}

impl ResultRecord {
    pub fn new(
        target_id: usize,
        estimator: &Estimator,
        field_values: Option<&[f64]>,
        resources: Option<&Resources>,
        strategies: &[Strategy],
    ) -> Result<ResultRecord> {
        let predicted_value = field_values.map(|f| estimator.apply(f)).transpose()?;
        let mut variances = BTreeMap::new();
        if let Some(r) = resources {
            if estimator.c.iter().any(|&v| v != 0.0) {
                for s in strategies {
                    let a = allocate(*s, &estimator.c, r.total, r.repetitions)?;
                    variances.insert(s.name(), a.variance);
                }
            }
        }
        Ok(ResultRecord {
            target_id,
            target: estimator.target.clone(),
            method: estimator.method,
            c: estimator.c.clone(),
            predicted_value,
            variances,
            error_free: estimator.error_free,
            condition_number: estimator.condition_number,
            condition_warning: estimator.condition_number > CONDITION_WARNING,
            bias_direction: estimator.bias_direction.clone(),
            warnings: estimator.warnings.clone(),
        })
    }
}

/// Writes `x1,…,xm,value` rows with 17 significant digits.
pub fn write_grid_csv<W: Write>(w: W, dim: usize, rows: &[(Vec<f64>, f64)]) -> Result<()> {
    let mut out = csv::Writer::from_writer(w);
    let header = (1..=dim)
        .map(|i| format!("x{i}"))
        .chain(["value".to_string()]);
    out.write_record(header).map_err(csv_error)?;
    for (point, value) in rows {
        if point.len() != dim {
            return Err(Error::DimensionMismatch {
                expected: dim,
                found: point.len(),
            });
        }
        let fields = point
            .iter()
            .chain(std::iter::once(value))
            .map(|v| format!("{v:.16e}"));
        out.write_record(fields).map_err(csv_error)?;
    }
    out.flush()?;
    Ok(())
}

fn csv_error(e: csv::Error) -> Error {
    match e.into_kind() {
        csv::ErrorKind::Io(io) => Error::Io(io),
        other => Error::Parse(format!("{other:?}")),
    }
}

pub fn emit_grid_csv(rows: &[(Vec<f64>, f64)], dim: usize, path: impl AsRef<Path>) -> Result<()> {
    let file = std::fs::File::create(path)?;
    write_grid_csv(std::io::BufWriter::new(file), dim, rows)
}

/// Reads a file produced by [`write_grid_csv`].
pub fn read_grid_csv<R: Read>(reader: R) -> Result<Vec<(Vec<f64>, f64)>> {
    let mut input = csv::Reader::from_reader(reader);
    let mut rows = Vec::new();
    for record in input.deserialize::<Vec<f64>>() {
        let mut values = record.map_err(csv_error)?;
        let value = values
            .pop()
            .ok_or_else(|| Error::Parse("empty CSV row".into()))?;
        rows.push((values, value));
    }
    Ok(rows)
}
