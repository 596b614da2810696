//! JSON problem description.

use std::collections::BTreeMap;
use std::path::Path;

use serde::Deserialize;
use serde_json::Value;

use geoharm::atlas::{example_field, model, ExampleField, Model};
use geoharm::expr::parse;
use geoharm::geometry::{Chart, MetricField, ScalarField};
use geoharm::solver::Tolerances;

use crate::CliError;

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Manifest {
    pub dimension: Option<usize>,
    pub coordinates: Option<Vec<String>>,
    /// Lower-triangular rows of component expressions.
    pub metric: Option<Vec<Vec<String>>>,
    pub model: Option<String>,
    pub f: Option<String>,
    pub field: Option<FieldSpec>,
    #[serde(default)]
    pub domain: Domain,
    #[serde(default)]
    pub points: Vec<Vec<f64>>,
    pub seed: Option<u64>,
    #[serde(default)]
    pub tolerances: ManifestTolerances,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FieldSpec {
    pub name: String,
    #[serde(default)]
    pub params: BTreeMap<String, Value>,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Domain {
    #[serde(rename = "box")]
    pub bounds: Option<Vec<(f64, f64)>>,
    /// Each expression must be `> 0` on the domain.
    #[serde(default)]
    pub constraints: Vec<String>,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ManifestTolerances {
    /// Replaces every check tolerance in `check`.
    pub check: Option<f64>,
    pub residual: Option<f64>,
    pub picard: Option<f64>,
    pub max_sweeps: Option<usize>,
    pub max_picard: Option<usize>,
    pub theta: Option<f64>,
}

impl ManifestTolerances {
    pub fn solver(&self) -> Tolerances {
        let d = Tolerances::default();
        Tolerances {
            residual: self.residual.unwrap_or(d.residual),
            picard: self.picard.unwrap_or(d.picard),
            max_sweeps: self.max_sweeps.unwrap_or(d.max_sweeps),
            max_picard: self.max_picard.unwrap_or(d.max_picard),
            theta: self.theta.unwrap_or(d.theta),
            ..d
        }
    }
}

/// A manifest resolved into geometric objects.
#[derive(Debug, Clone)]
pub struct Problem {
    pub metric: MetricField,
    pub field: ScalarField,
    /// Finite box used for sampling and for grids.
    pub sample_box: Option<Vec<(f64, f64)>>,
    pub points: Vec<Vec<f64>>,
    pub seed: Option<u64>,
    pub tolerances: ManifestTolerances,
}

fn input(msg: impl Into<String>) -> CliError {
    CliError::Input(msg.into())
}

fn in_field(what: &str, e: geoharm::Error) -> CliError {
    input(format!("{what}: {e}"))
}

impl Manifest {
    pub fn load(path: &Path) -> Result<Manifest, CliError> {
        let text =
            std::fs::read_to_string(path).map_err(|e| input(format!("{}: {e}", path.display())))?;
        Manifest::from_json(&text).map_err(|e| match e {
            CliError::Input(m) => input(format!("{}: {m}", path.display())),
            other => other,
        })
    }

    pub fn from_json(text: &str) -> Result<Manifest, CliError> {
        serde_json::from_str(text).map_err(|e| input(format!("malformed manifest: {e}")))
    }

    pub fn resolve(&self) -> Result<Problem, CliError> {
        let (metric, sample_box, field_expr, extra) = match (&self.model, &self.metric) {
            (Some(_), Some(_)) => return Err(input("give either `model` or `metric`, not both")),
            (None, None) => return Err(input("one of `model` or `metric` is required")),
            (Some(name), None) => {
                let m: Model = name.parse().map_err(|e| in_field("model", e))?;
                let entry = model(m).map_err(|e| in_field("model", e))?;
                if let Some(coords) = &self.coordinates {
                    if coords.as_slice() != entry.metric.chart().coords() {
                        return Err(input(format!(
                            "model charts use coordinates {:?}",
                            entry.metric.chart().coords()
                        )));
                    }
                }
                let (expr, extra) = match &self.field {
                    Some(spec) => {
                        let pf = example_field_from(spec, m)?;
                        if pf.model() != m {
                            return Err(input(format!(
                                "field `{}` lives on {}, not {m}",
                                spec.name,
                                pf.model()
                            )));
                        }
                        let (e, x) = example_field(&pf).map_err(|e| in_field("field", e))?;
                        (Some(e), x)
                    }
                    None => (None, vec![]),
                };
                (entry.metric, Some(entry.sample_box), expr, extra)
            }
            (None, Some(rows)) => {
                let n = rows.len();
                let coords = match &self.coordinates {
                    Some(c) => c.clone(),
                    None => (1..=n).map(|i| format!("x{i}")).collect(),
                };
                let chart = Chart::new(coords).map_err(|e| in_field("coordinates", e))?;
                let mut parsed = Vec::with_capacity(n);
                for (i, row) in rows.iter().enumerate() {
                    let mut out = Vec::with_capacity(row.len());
                    for (j, text) in row.iter().enumerate() {
                        out.push(
                            parse(text)
                                .map_err(|e| input(format!("metric[{i}][{j}] `{text}`: {e}")))?,
                        );
                    }
                    parsed.push(out);
                }
                let metric = MetricField::new(chart, parsed).map_err(|e| in_field("metric", e))?;
                if self.field.is_some() {
                    return Err(input("named fields need a `model`"));
                }
                (metric, None, None, vec![])
            }
        };
        let n = metric.chart().dim();
        if let Some(d) = self.dimension {
            if d != n {
                return Err(input(format!(
                    "dimension {d} does not match the {n}-dimensional chart"
                )));
            }
        }

        let expr = match (&self.f, &self.field, field_expr) {
            (Some(_), Some(_), _) => return Err(input("give either `f` or `field`, not both")),
            (None, None, _) => return Err(input("one of `f` or `field` is required")),
            (Some(text), None, _) => parse(text).map_err(|e| input(format!("f `{text}`: {e}")))?,
            (None, Some(_), Some(expr)) => expr,
            (None, Some(_), None) => unreachable!("named fields are resolved with the model"),
        };

        let mut chart = metric.chart().clone();
        let mut sample_box = sample_box;
        if let Some(bx) = &self.domain.bounds {
            if bx.len() != n
                || bx
                    .iter()
                    .any(|(lo, hi)| !(lo < hi && (hi - lo).is_finite()))
            {
                return Err(input(format!(
                    "domain.box must hold {n} finite intervals lo < hi"
                )));
            }
            sample_box = Some(bx.clone());
        }
        for c in extra {
            chart = chart.with_constraint(c).map_err(|e| in_field("field", e))?;
        }
        for text in &self.domain.constraints {
            let c = parse(text).map_err(|e| input(format!("domain.constraints `{text}`: {e}")))?;
            chart = chart
                .with_constraint(c)
                .map_err(|e| in_field("domain.constraints", e))?;
        }
        let metric = metric
            .with_chart(chart)
            .map_err(|e| in_field("domain", e))?;
        let field =
            ScalarField::new(metric.chart().coords(), expr).map_err(|e| in_field("f", e))?;

        for (k, p) in self.points.iter().enumerate() {
            if p.len() != n {
                return Err(input(format!(
                    "points[{k}] has {} coordinates, expected {n}",
                    p.len()
                )));
            }
            if let Some(bx) = &self.domain.bounds {
                if p.iter().zip(bx).any(|(x, (lo, hi))| !(lo <= x && x <= hi)) {
                    return Err(input(format!(
                        "points[{k}] = {p:?} lies outside the domain box"
                    )));
                }
            }
        }
        Ok(Problem {
            metric,
            field,
            sample_box,
            points: self.points.clone(),
            seed: self.seed,
            tolerances: self.tolerances.clone(),
        })
    }
}

fn number(spec: &FieldSpec, key: &str, default: Option<f64>) -> Result<f64, CliError> {
    match spec.params.get(key) {
        Some(v) => v
            .as_f64()
            .ok_or_else(|| input(format!("field.params.{key} must be a number"))),
        None => default.ok_or_else(|| input(format!("field `{}` needs params.{key}", spec.name))),
    }
}

fn example_field_from(spec: &FieldSpec, m: Model) -> Result<ExampleField, CliError> {
    let known: &[&str] = match spec.name.as_str() {
        "linear_euclidean" => &["a"],
        "hyperbolic_vertical" | "hyperbolic_horizontal" => &["a", "b", "n"],
        "sphere_coordinate" => &["c", "n"],
        other => return Err(input(format!("unknown field `{other}`"))),
    };
    if let Some(k) = spec.params.keys().find(|k| !known.contains(&k.as_str())) {
        return Err(input(format!(
            "field `{}` has no parameter `{k}`",
            spec.name
        )));
    }
    let n = match spec.params.get("n") {
        Some(v) => v
            .as_u64()
            .map(|v| v as usize)
            .ok_or_else(|| input("field.params.n must be a positive integer"))?,
        None => m.dim(),
    };
    Ok(match spec.name.as_str() {
        "linear_euclidean" => {
            let a = spec
                .params
                .get("a")
                .and_then(Value::as_array)
                .and_then(|a| a.iter().map(Value::as_f64).collect::<Option<Vec<f64>>>())
                .ok_or_else(|| input("field.params.a must be an array of numbers"))?;
            ExampleField::LinearEuclidean { a }
        }
        "hyperbolic_vertical" => ExampleField::HyperbolicVertical {
            a: number(spec, "a", Some(0.0))?,
            b: number(spec, "b", None)?,
            n,
        },
        "hyperbolic_horizontal" => ExampleField::HyperbolicHorizontal {
            a: number(spec, "a", Some(0.0))?,
            b: number(spec, "b", None)?,
            n,
        },
        _ => ExampleField::SphereCoordinate {
            c: number(spec, "c", None)?,
            n,
        },
    })
}
