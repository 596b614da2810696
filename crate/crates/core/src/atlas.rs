//! Built-in model spaces and example fields.
//!
//! Models use the coordinates `x1, …, xn`:
//!
//! | name              | metric                         | chart            |
//! |-------------------|--------------------------------|------------------|
//! | `euclidean(n)`    | `δ_ij`                         | ℝⁿ               |
//! | `hyperbolic(n)`   | `x_n⁻² δ_ij` (upper half-space) | `x_n > 0`        |
//! | `sphere_stereo(n)`| `4 (1 + |x|²)⁻² δ_ij`          | ℝⁿ (stereographic) |
//!
//! Example fields bake their parameters into expression literals, so every
//! downstream consumer sees an ordinary [`ScalarField`].

use std::fmt;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::expr::{BinOp, Expr};
use crate::geometry::{Chart, MetricField, ScalarField};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Model {
    Euclidean(usize),
    Hyperbolic(usize),
    SphereStereo(usize),
}

impl Model {
    pub fn dim(self) -> usize {
        match self {
            Model::Euclidean(n) | Model::Hyperbolic(n) | Model::SphereStereo(n) => n,
        }
    }

    /// Ricci curvature is `ricci_factor · g` on every model.
    pub fn ricci_factor(self) -> f64 {
        match self {
            Model::Euclidean(_) => 0.0,
            Model::Hyperbolic(n) => -(n as f64 - 1.0),
            Model::SphereStereo(n) => n as f64 - 1.0,
        }
    }
}

impl fmt::Display for Model {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Model::Euclidean(n) => write!(f, "euclidean({n})"),
            Model::Hyperbolic(n) => write!(f, "hyperbolic({n})"),
            Model::SphereStereo(n) => write!(f, "sphere_stereo({n})"),
        }
    }
}

impl FromStr for Model {
    type Err = Error;

    /// Accepts `name(n)` with `name` one of `euclidean`, `hyperbolic`, `sphere_stereo`.
    fn from_str(s: &str) -> Result<Model> {
        let bad = || Error::UnsupportedModel(s.to_string());
        let s = s.trim();
        let open = s.find('(').ok_or_else(bad)?;
        let close = s.strip_suffix(')').ok_or_else(bad)?;
        let n: usize = close[open + 1..].trim().parse().map_err(|_| bad())?;
        match s[..open].trim() {
            "euclidean" => Ok(Model::Euclidean(n)),
            "hyperbolic" => Ok(Model::Hyperbolic(n)),
            "sphere_stereo" => Ok(Model::SphereStereo(n)),
            _ => Err(bad()),
        }
    }
}

/// A registered model: metric on its chart plus a default sampling box.
#[derive(Debug, Clone)]
pub struct ModelEntry {
    pub model: Model,
    pub metric: MetricField,
    pub sample_box: Vec<(f64, f64)>,
}

fn lit(v: f64) -> Expr {
    if v < 0.0 {
        Expr::Neg(Box::new(Expr::Number(-v)))
    } else {
        Expr::Number(v)
    }
}

fn var(i: usize) -> Expr {
    Expr::Var(format!("x{}", i + 1))
}

fn bin(op: BinOp, a: Expr, b: Expr) -> Expr {
    Expr::Binary(op, Box::new(a), Box::new(b))
}

fn sum_of(terms: impl IntoIterator<Item = Expr>) -> Expr {
    terms
        .into_iter()
        .reduce(|a, b| bin(BinOp::Add, a, b))
        .unwrap_or(Expr::Number(0.0))
}

pub fn model(model: Model) -> Result<ModelEntry> {
    let n = model.dim();
    if !(1..=8).contains(&n) || (matches!(model, Model::Hyperbolic(_)) && n < 2) {
        return Err(Error::UnsupportedModel(model.to_string()));
    }
    let chart = Chart::standard(n)?;
    let (diag, chart, sample_box) = match model {
        Model::Euclidean(_) => (Expr::Number(1.0), chart, vec![(-2.0, 2.0); n]),
        Model::Hyperbolic(_) => {
            let mut bounds = vec![(f64::NEG_INFINITY, f64::INFINITY); n];
            bounds[n - 1] = (0.0, f64::INFINITY);
            let mut sample = vec![(-2.0, 2.0); n];
            sample[n - 1] = (0.5, 5.0);
            let diag = bin(
                BinOp::Div,
                Expr::Number(1.0),
                bin(BinOp::Pow, var(n - 1), Expr::Number(2.0)),
            );
            (diag, chart.with_bounds(bounds)?, sample)
        }
        Model::SphereStereo(_) => {
            let r2 = sum_of((0..n).map(|i| bin(BinOp::Pow, var(i), Expr::Number(2.0))));
            let denom = bin(
                BinOp::Pow,
                bin(BinOp::Add, Expr::Number(1.0), r2),
                Expr::Number(2.0),
            );
            (
                bin(BinOp::Div, Expr::Number(4.0), denom),
                chart,
                vec![(-1.5, 1.5); n],
            )
        }
    };
    let rows = (0..n)
        .map(|i| {
            (0..=i)
                .map(|j| {
                    if i == j {
                        diag.clone()
                    } else {
                        Expr::Number(0.0)
                    }
                })
                .collect()
        })
        .collect();
    Ok(ModelEntry {
        model,
        metric: MetricField::new(chart, rows)?,
        sample_box,
    })
}

/// The example fields.
#[derive(Debug, Clone, PartialEq)]
pub enum ExampleField {
    /// `f = a₁x₁ + … + aₙxₙ` on `euclidean(n)`, `Σaᵢ² < 1`.
    LinearEuclidean { a: Vec<f64> },
    /// `f = a + b·xₙ^{n−1}` on `hyperbolic(n)`, domain `0 < b(n−1)xₙ^{n−1} < 1`.
    HyperbolicVertical { a: f64, b: f64, n: usize },
    /// `f = a + b(x₁ + … + x_{n−1})` on `hyperbolic(n)`, domain `0 < (n−1)b²xₙ² < 1`.
    HyperbolicHorizontal { a: f64, b: f64, n: usize },
    /// `f = c·2x₁/(1 + |x|²)` on `sphere_stereo(n)`: a non-harmonic field on the sphere.
    SphereCoordinate { c: f64, n: usize },
}

/// One row of a fixture's expected-property table.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Expectation {
    /// `Δf = 0` everywhere sampled (identity into `(M, g̃)` is harmonic).
    HarmonicCodomain(bool),
    /// `Hess f(∇f, ∇f) + (1 − s)Δf = 0` everywhere sampled (identity from `(M, g̃)` is harmonic).
    HarmonicDomain(bool),
}

impl ExampleField {
    pub fn name(&self) -> &'static str {
        match self {
            ExampleField::LinearEuclidean { .. } => "linear_euclidean",
            ExampleField::HyperbolicVertical { .. } => "hyperbolic_vertical",
            ExampleField::HyperbolicHorizontal { .. } => "hyperbolic_horizontal",
            ExampleField::SphereCoordinate { .. } => "sphere_coordinate",
        }
    }

    /// The model this field lives on.
    pub fn model(&self) -> Model {
        match self {
            ExampleField::LinearEuclidean { a } => Model::Euclidean(a.len()),
            ExampleField::HyperbolicVertical { n, .. }
            | ExampleField::HyperbolicHorizontal { n, .. } => Model::Hyperbolic(*n),
            ExampleField::SphereCoordinate { n, .. } => Model::SphereStereo(*n),
        }
    }

    pub fn expected(&self) -> Vec<Expectation> {
        use Expectation::*;
        match self {
            ExampleField::LinearEuclidean { .. } | ExampleField::HyperbolicHorizontal { .. } => {
                vec![HarmonicCodomain(true), HarmonicDomain(true)]
            }
            ExampleField::HyperbolicVertical { .. } => {
                vec![HarmonicCodomain(true), HarmonicDomain(false)]
            }
            ExampleField::SphereCoordinate { .. } => {
                vec![HarmonicCodomain(false), HarmonicDomain(false)]
            }
        }
    }
}

impl fmt::Display for ExampleField {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ExampleField::LinearEuclidean { a } => write!(f, "linear_euclidean(a={a:?})"),
            ExampleField::HyperbolicVertical { a, b, n } => {
                write!(f, "hyperbolic_vertical(a={a}, b={b}, n={n})")
            }
            ExampleField::HyperbolicHorizontal { a, b, n } => {
                write!(f, "hyperbolic_horizontal(a={a}, b={b}, n={n})")
            }
            ExampleField::SphereCoordinate { c, n } => write!(f, "sphere_coordinate(c={c}, n={n})"),
        }
    }
}

/// Builds the field expression and its extra domain constraints (each `> 0`).
pub fn example_field(field: &ExampleField) -> Result<(Expr, Vec<Expr>)> {
    let param = |msg: String| Err(Error::Parameter(msg));
    match field {
        ExampleField::LinearEuclidean { a } => {
            let norm2: f64 = a.iter().map(|v| v * v).sum();
            if a.is_empty() || !(norm2 < 1.0) {
                return param(format!(
                    "linear_euclidean needs sum(a_i^2) < 1, got {norm2}"
                ));
            }
            let f = sum_of(
                a.iter()
                    .enumerate()
                    .map(|(i, &ai)| bin(BinOp::Mul, lit(ai), var(i))),
            );
            Ok((f, vec![]))
        }
        ExampleField::HyperbolicVertical { a, b, n } => {
            if *n < 2 || !(*b > 0.0) {
                return param(format!(
                    "hyperbolic_vertical needs n >= 2 and b > 0 (got n={n}, b={b})"
                ));
            }
            let pow = bin(BinOp::Pow, var(n - 1), lit(*n as f64 - 1.0));
            let f = bin(BinOp::Add, lit(*a), bin(BinOp::Mul, lit(*b), pow.clone()));
            // 0 < b(n−1)xₙ^{n−1} < 1
            let w = bin(BinOp::Mul, lit(b * (*n as f64 - 1.0)), pow);
            Ok((f, vec![w.clone(), bin(BinOp::Sub, Expr::Number(1.0), w)]))
        }
        ExampleField::HyperbolicHorizontal { a, b, n } => {
            if *n < 2 || *b == 0.0 || !b.is_finite() {
                return param(format!(
                    "hyperbolic_horizontal needs n >= 2 and b != 0 (got n={n}, b={b})"
                ));
            }
            let f = bin(
                BinOp::Add,
                lit(*a),
                bin(BinOp::Mul, lit(*b), sum_of((0..n - 1).map(var))),
            );
            // 0 < (n−1)b²xₙ² < 1
            let w = bin(
                BinOp::Mul,
                lit((*n as f64 - 1.0) * b * b),
                bin(BinOp::Pow, var(n - 1), Expr::Number(2.0)),
            );
            Ok((f, vec![w.clone(), bin(BinOp::Sub, Expr::Number(1.0), w)]))
        }
        ExampleField::SphereCoordinate { c, n } => {
            if *n < 1 || !(c.abs() < 1.0) {
                return param(format!("sphere_coordinate needs |c| < 1 (got {c})"));
            }
            let r2 = sum_of((0..*n).map(|i| bin(BinOp::Pow, var(i), Expr::Number(2.0))));
            let f = bin(
                BinOp::Div,
                bin(BinOp::Mul, lit(2.0 * c), var(0)),
                bin(BinOp::Add, Expr::Number(1.0), r2),
            );
            Ok((f, vec![]))
        }
    }
}

/// A model, a field on it, and the combined domain.
#[derive(Debug, Clone)]
pub struct Fixture {
    pub name: String,
    pub model: Model,
    /// Metric whose chart includes the field's constraints.
    pub metric: MetricField,
    pub field: ScalarField,
    pub sample_box: Vec<(f64, f64)>,
    pub expected: Vec<Expectation>,
}

impl Fixture {
    pub fn new(field: &ExampleField) -> Result<Fixture> {
        let entry = model(field.model())?;
        let (expr, constraints) = example_field(field)?;
        Fixture::with_constraints(
            field.to_string(),
            entry,
            expr,
            constraints,
            field.expected(),
        )
    }

    /// A fixture from an arbitrary expression on a model.
    pub fn custom(name: impl Into<String>, model_kind: Model, f: &str) -> Result<Fixture> {
        let entry = model(model_kind)?;
        Fixture::with_constraints(name.into(), entry, crate::expr::parse(f)?, vec![], vec![])
    }

    fn with_constraints(
        name: String,
        entry: ModelEntry,
        expr: Expr,
        constraints: Vec<Expr>,
        expected: Vec<Expectation>,
    ) -> Result<Fixture> {
        let mut chart = entry.metric.chart().clone();
        for c in constraints {
            chart = chart.with_constraint(c)?;
        }
        let metric = entry.metric.with_chart(chart)?;
        let field = ScalarField::new(metric.chart().coords(), expr)?;
        Ok(Fixture {
            name,
            model: entry.model,
            metric,
            field,
            sample_box: entry.sample_box,
            expected,
        })
    }

    pub fn sample(&self, count: usize, seed: u64) -> Result<Vec<Vec<f64>>> {
        sample_points(self.metric.chart(), &self.sample_box, count, seed)
    }
}

/// Seeded rejection sampling of `count` points of `chart` inside `sample_box`.
pub fn sample_points(
    chart: &Chart,
    sample_box: &[(f64, f64)],
    count: usize,
    seed: u64,
) -> Result<Vec<Vec<f64>>> {
    if sample_box.len() != chart.dim()
        || sample_box
            .iter()
            .any(|(lo, hi)| !(lo < hi && (hi - lo).is_finite()))
    {
        return Err(Error::Input(format!(
            "sampling box {sample_box:?} must be finite and match the chart"
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Vec::with_capacity(count);
    let mut tries = 0usize;
    while out.len() < count {
        tries += 1;
        if tries > 1000 * (count + 10) {
            return Err(Error::Input(
                "sampling box barely intersects the domain".into(),
            ));
        }
        let p: Vec<f64> = sample_box
            .iter()
            .map(|&(lo, hi)| rng.gen_range(lo..hi))
            .collect();
        if chart.contains(&p) {
            out.push(p);
        }
    }
    Ok(out)
}

/// A random polynomial of total degree ≤ `degree` in `x1..xn` with
/// coefficients uniform in `[-1, 1]`, multiplied by `scale`.
pub fn random_polynomial(n: usize, degree: usize, scale: f64, rng: &mut impl Rng) -> Expr {
    let mut terms = Vec::new();
    let mut exps = vec![0usize; n];
    loop {
        let total: usize = exps.iter().sum();
        if total <= degree {
            let c = scale * rng.gen_range(-1.0..1.0);
            let mut t = lit(c);
            for (i, &e) in exps.iter().enumerate() {
                if e > 0 {
                    t = bin(
                        BinOp::Mul,
                        t,
                        bin(BinOp::Pow, var(i), Expr::Number(e as f64)),
                    );
                }
            }
            terms.push(t);
        }
        // odometer over exponent vectors
        let mut k = 0;
        while k < n {
            exps[k] += 1;
            if exps[k] <= degree {
                break;
            }
            exps[k] = 0;
            k += 1;
        }
        if k == n {
            break;
        }
    }
    sum_of(terms)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{metric_at, ricci};

    #[test]
    fn model_names_round_trip() {
        for m in [
            Model::Euclidean(2),
            Model::Hyperbolic(3),
            Model::SphereStereo(2),
        ] {
            assert_eq!(m.to_string().parse::<Model>().unwrap(), m);
        }
        assert!("torus(2)".parse::<Model>().is_err());
        assert!("euclidean".parse::<Model>().is_err());
        assert!(model(Model::Euclidean(9)).is_err());
        assert!(model(Model::Hyperbolic(1)).is_err());
    }

    #[test]
    fn model_metrics() {
        let e = model(Model::Euclidean(2)).unwrap();
        assert_eq!(
            metric_at(&e.metric, &[0.3, -1.0]).unwrap().value,
            nalgebra::DMatrix::identity(2, 2)
        );

        let h = model(Model::Hyperbolic(3)).unwrap();
        let g = metric_at(&h.metric, &[0.0, 0.0, 2.0]).unwrap().value;
        assert_eq!(g, nalgebra::DMatrix::identity(3, 3) * 0.25);
        let ric = ricci(&h.metric, &[0.0, 0.0, 2.0]).unwrap();
        assert!((ric - g * -2.0).abs().max() < 1e-12);
        assert!(h.metric.chart().check(&[0.0, 0.0, -1.0]).is_err());

        let s = model(Model::SphereStereo(2)).unwrap();
        let g = metric_at(&s.metric, &[0.0, 0.0]).unwrap().value;
        assert_eq!(g, nalgebra::DMatrix::identity(2, 2) * 4.0);
        let ric = ricci(&s.metric, &[0.0, 0.0]).unwrap();
        assert!((ric - g).abs().max() < 1e-12);
    }

    #[test]
    fn example_field_parameters() {
        assert!(matches!(
            example_field(&ExampleField::LinearEuclidean { a: vec![0.8, 0.6] }),
            Err(Error::Parameter(_))
        ));
        assert!(example_field(&ExampleField::HyperbolicVertical {
            a: 0.0,
            b: -0.1,
            n: 2
        })
        .is_err());
        assert!(example_field(&ExampleField::HyperbolicHorizontal {
            a: 0.0,
            b: 0.0,
            n: 2
        })
        .is_err());
        let (f, c) = example_field(&ExampleField::HyperbolicVertical {
            a: 1.0,
            b: 0.1,
            n: 3,
        })
        .unwrap();
        assert_eq!(f.to_string(), "(1 + (0.1 * (x3 ^ 2)))");
        assert_eq!(c.len(), 2);
    }

    #[test]
    fn fixture_domain_includes_constraints() {
        let fx = Fixture::new(&ExampleField::HyperbolicVertical {
            a: 0.0,
            b: 0.1,
            n: 2,
        })
        .unwrap();
        assert!(fx.metric.chart().contains(&[0.0, 5.0]));
        assert!(!fx.metric.chart().contains(&[0.0, 10.5]));
        let pts = fx.sample(30, 1).unwrap();
        assert_eq!(pts.len(), 30);
        assert!(pts.iter().all(|p| fx.metric.chart().contains(p)));
        assert_eq!(pts, fx.sample(30, 1).unwrap());
    }

    #[test]
    fn random_polynomial_has_all_monomials() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let e = random_polynomial(2, 3, 1.0, &mut rng);
        let text = e.to_string();
        // 10 monomials of degree ≤ 3 in two variables
        assert_eq!(text.matches(" + ").count(), 9, "{text}");
    }
}
