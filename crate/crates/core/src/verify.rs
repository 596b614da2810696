//! Self-verification battery.
//!
//! [`verify_all`] runs every registered identity on embedded fixtures and
//! returns a [`Report`]; [`check_manifold`] runs the cross-method subset on a
//! caller-supplied metric and field. Both are deterministic for a fixed seed.
//!
//! Cross-method comparisons use the scaled difference
//! `|a − b| / max(1, |a|, |b|)`, which is the absolute difference for
//! quantities of unit size and a relative one for large quantities.

use nalgebra::{DVector, SymmetricEigen};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::atlas::{model, random_polynomial, ExampleField, Expectation, Fixture, Model};
use crate::chi::{ChiContext, DivChiGradMethod, DivChiMethod};
use crate::deform::{tension_identity, ConnectionMethod, DeformedMetric};
use crate::expr::{BinOp, Expr};
use crate::geometry::oracle::{agreement_residual, fd_oracle, Quantity};
use crate::geometry::{
    christoffel, cov_deriv_sym2, grad, hess, laplacian, lie_metric, metric_at, orthonormal_frame,
    ricci, ricci_grad_plus_grad_laplacian, rough_laplacian_grad, Chart, GradientOf, MetricField,
    MetricTensor, ScalarField,
};
use crate::solver::{GridProblem, Mode, Tolerances};
use crate::{Error, Result};

pub const TOOL: &str = "geoharm";

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CheckRecord {
    pub id: String,
    /// Name of the identity or example the check exercises.
    pub anchor: String,
    pub points: usize,
    pub max_residual: f64,
    pub tolerance: f64,
    pub pass: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Summary {
    pub total: usize,
    pub passed: usize,
    pub failed: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Report {
    pub tool: String,
    pub version: String,
    pub seed: u64,
    pub checks: Vec<CheckRecord>,
    pub summary: Summary,
}

impl Report {
    fn new(seed: u64, mut checks: Vec<CheckRecord>) -> Report {
        checks.sort_by(|a, b| a.id.cmp(&b.id));
        let passed = checks.iter().filter(|c| c.pass).count();
        Report {
            tool: TOOL.to_string(),
            version: env!("CARGO_PKG_VERSION").to_string(),
            seed,
            summary: Summary {
                total: checks.len(),
                passed,
                failed: checks.len() - passed,
            },
            checks,
        }
    }

    pub fn all_passed(&self) -> bool {
        self.summary.failed == 0
    }

    pub fn failures(&self) -> impl Iterator<Item = &CheckRecord> {
        self.checks.iter().filter(|c| !c.pass)
    }
}

/// `|a − b| / max(1, |a|, |b|)`.
pub fn scaled_diff(a: f64, b: f64) -> f64 {
    (a - b).abs() / 1f64.max(a.abs()).max(b.abs())
}

fn scaled_diff_vec(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .fold(0.0, |m, (x, y)| m.max(scaled_diff(*x, *y)))
}

/// Residual accumulator handed to each check body.
#[derive(Default)]
struct Acc {
    max: f64,
    points: usize,
}

impl Acc {
    fn push(&mut self, r: f64) {
        self.points += 1;
        // NaN must fail the check, so it poisons the maximum
        self.max = if r.is_nan() {
            f64::INFINITY
        } else {
            self.max.max(r)
        };
    }
}

struct Battery {
    seed: u64,
    tol_override: Option<f64>,
    records: Vec<CheckRecord>,
}

impl Battery {
    fn rng(&self, stream: u64) -> ChaCha8Rng {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        rng.set_stream(stream);
        rng
    }

    fn run(
        &mut self,
        id: &str,
        anchor: &str,
        tolerance: f64,
        body: impl FnOnce(&mut Acc, &mut ChaCha8Rng) -> Result<()>,
    ) {
        let tolerance = self.tol_override.unwrap_or(tolerance);
        let mut rng = self.rng(self.records.len() as u64 + 1);
        let mut acc = Acc::default();
        let outcome = body(&mut acc, &mut rng);
        let (max_residual, error) = match outcome {
            Ok(()) if acc.points > 0 => (acc.max, None),
            Ok(()) => (f64::MAX, Some("no points evaluated".to_string())),
            Err(e) => (f64::MAX, Some(e.to_string())),
        };
        let max_residual = if max_residual.is_finite() {
            max_residual
        } else {
            f64::MAX
        };
        self.records.push(CheckRecord {
            id: id.to_string(),
            anchor: anchor.to_string(),
            points: acc.points,
            max_residual,
            tolerance,
            pass: error.is_none() && max_residual <= tolerance,
            error,
        });
    }
}

/// The five fixtures used by the sampled deformation checks.
pub fn standard_fixtures() -> Result<Vec<Fixture>> {
    Ok(vec![
        Fixture::new(&ExampleField::LinearEuclidean { a: vec![0.6, 0.0] })?,
        Fixture::new(&ExampleField::HyperbolicVertical {
            a: 0.0,
            b: 0.1,
            n: 2,
        })?,
        Fixture::new(&ExampleField::HyperbolicHorizontal {
            a: 0.0,
            b: 0.2,
            n: 2,
        })?,
        Fixture::custom(
            "quadratic_euclidean",
            Model::Euclidean(2),
            "0.1*(x1^2+x2^2)",
        )?,
        Fixture::new(&ExampleField::SphereCoordinate { c: 0.5, n: 2 })?,
    ])
}

fn deformed(fx: &Fixture) -> Result<DeformedMetric> {
    DeformedMetric::new(fx.metric.clone(), fx.field.clone())
}

fn chi_ctx(fx: &Fixture) -> Result<ChiContext> {
    ChiContext::new(fx.metric.clone(), fx.field.clone())
}

/// A metric with nonconstant off-diagonal terms, for oracle checks.
pub fn generic_metric() -> Result<MetricField> {
    let chart = Chart::standard(2)?.with_bounds(vec![(-1.5, 1.5), (-1.5, 1.5)])?;
    MetricField::parse(
        chart,
        &[vec!["1 + 0.1*x1^2"], vec!["0.2*sin(x2)", "exp(0.3*x1*x2)"]],
    )
}

/// A random cubic on `metric`'s chart, rescaled so that `s ≤ 0.5` at `p`.
pub fn random_valid_cubic(
    metric: &MetricField,
    p: &[f64],
    rng: &mut impl Rng,
) -> Result<ScalarField> {
    let n = metric.chart().dim();
    let expr = random_polynomial(n, 3, 0.5, rng);
    let f = ScalarField::new(metric.chart().coords(), expr.clone())?;
    let s = crate::geometry::grad_norm2(&f, metric, p)?;
    if s <= 0.5 {
        return Ok(f);
    }
    let c = (0.5 / s).sqrt();
    ScalarField::new(
        metric.chart().coords(),
        Expr::Binary(BinOp::Mul, Box::new(Expr::Number(c)), Box::new(expr)),
    )
}

fn models_2d() -> [Model; 3] {
    [
        Model::Euclidean(2),
        Model::Hyperbolic(2),
        Model::SphereStereo(2),
    ]
}

/// Options for [`verify_all`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct VerifyOptions {
    pub seed: u64,
    /// Replaces every check's tolerance.
    pub tol: Option<f64>,
}

impl Default for VerifyOptions {
    fn default() -> Self {
        VerifyOptions { seed: 0, tol: None }
    }
}

pub fn verify_all(opts: VerifyOptions) -> Report {
    let mut b = Battery {
        seed: opts.seed,
        tol_override: opts.tol,
        records: Vec::new(),
    };
    geometry_checks(&mut b);
    deform_checks(&mut b);
    chi_checks(&mut b);
    atlas_checks(&mut b);
    solver_checks(&mut b);
    Report::new(opts.seed, b.records)
}

fn geometry_checks(b: &mut Battery) {
    b.run(
        "geometry.jet_vs_fd",
        "jet second derivatives against finite differences",
        1e-6,
        |acc, rng| {
            let e = model(Model::Euclidean(2))?.metric;
            for text in [
                "sin(x1)*exp(x2)",
                "log(2+x1^2)*sqrt(2+x2)",
                "tan(0.3*x1)/(1+x2^2)",
                "(x1+2)^2.5*cos(x1*x2)",
            ] {
                let f = ScalarField::parse(e.chart().coords(), text)?;
                for _ in 0..5 {
                    let p = [rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)];
                    let h = hess(&f, &e, &p)?;
                    let fd = fd_oracle(Quantity::Hessian, &e, Some(&f), &p, 1e-3)?;
                    acc.push(agreement_residual(h.transpose().as_slice(), &fd.data, 1e-8));
                }
            }
            Ok(())
        },
    );

    let oracle_metrics = || -> Result<Vec<(MetricField, Vec<(f64, f64)>)>> {
        Ok(vec![
            (
                model(Model::Hyperbolic(2))?.metric,
                vec![(-1.0, 1.0), (0.5, 3.0)],
            ),
            (
                model(Model::SphereStereo(2))?.metric,
                vec![(-1.0, 1.0), (-1.0, 1.0)],
            ),
            (generic_metric()?, vec![(-1.0, 1.0), (-1.0, 1.0)]),
        ])
    };

    b.run(
        "geometry.christoffel_vs_fd",
        "Christoffel symbols against finite differences",
        1e-6,
        |acc, rng| {
            for (g, bx) in oracle_metrics()? {
                for _ in 0..5 {
                    let p: Vec<f64> = bx.iter().map(|&(lo, hi)| rng.gen_range(lo..hi)).collect();
                    let c = christoffel(&g, &p)?;
                    let fd = fd_oracle(Quantity::Christoffel, &g, None, &p, 1e-3)?;
                    acc.push(agreement_residual(&c.values(), &fd.data, 1e-8));
                }
            }
            Ok(())
        },
    );

    b.run(
        "geometry.hessian_vs_fd",
        "covariant Hessian against finite differences",
        1e-6,
        |acc, rng| {
            for (g, bx) in oracle_metrics()? {
                let f = ScalarField::parse(g.chart().coords(), "x1^2*x2 + sin(x2) - 0.3*x1")?;
                for _ in 0..5 {
                    let p: Vec<f64> = bx.iter().map(|&(lo, hi)| rng.gen_range(lo..hi)).collect();
                    let h = hess(&f, &g, &p)?;
                    let fd = fd_oracle(Quantity::Hessian, &g, Some(&f), &p, 1e-3)?;
                    acc.push(agreement_residual(h.transpose().as_slice(), &fd.data, 1e-8));
                }
            }
            Ok(())
        },
    );

    b.run(
        "geometry.ricci_vs_fd",
        "Ricci tensor against nested finite differences",
        1e-5,
        |acc, rng| {
            for (g, bx) in oracle_metrics()? {
                for _ in 0..3 {
                    let p: Vec<f64> = bx.iter().map(|&(lo, hi)| rng.gen_range(lo..hi)).collect();
                    let r = ricci(&g, &p)?;
                    let fd = fd_oracle(Quantity::Ricci, &g, None, &p, 1e-3)?;
                    acc.push(agreement_residual(r.transpose().as_slice(), &fd.data, 1e-8));
                }
            }
            Ok(())
        },
    );

    b.run(
        "geometry.ricci_constant_curvature",
        "Ric = -(n-1)g on hyperbolic space, (n-1)g on the sphere",
        1e-9,
        |acc, rng| {
            for n in 2..=4 {
                for m in [Model::Hyperbolic(n), Model::SphereStereo(n)] {
                    let e = model(m)?;
                    for p in
                        crate::atlas::sample_points(e.metric.chart(), &e.sample_box, 5, rng.gen())?
                    {
                        let g = metric_at(&e.metric, &p)?.value;
                        let r = ricci(&e.metric, &p)?;
                        let expected = &g * m.ricci_factor();
                        acc.push(scaled_diff_vec(r.as_slice(), expected.as_slice()));
                    }
                }
            }
            Ok(())
        },
    );

    b.run(
        "geometry.metric_compatibility",
        "Levi-Civita connection is metric",
        1e-10,
        |acc, rng| {
            for m in models_2d()
                .into_iter()
                .chain([Model::Hyperbolic(3), Model::SphereStereo(3)])
            {
                let e = model(m)?;
                for p in crate::atlas::sample_points(e.metric.chart(), &e.sample_box, 5, rng.gen())?
                {
                    let nabla = cov_deriv_sym2(&MetricTensor, &e.metric, &p)?;
                    let scale = metric_at(&e.metric, &p)?.value.abs().max().max(1.0);
                    acc.push(nabla.as_slice().iter().fold(0.0f64, |a, v| a.max(v.abs())) / scale);
                }
            }
            Ok(())
        },
    );

    b.run(
        "geometry.christoffel_symmetry",
        "torsion-free connection",
        1e-14,
        |acc, rng| {
            let g = generic_metric()?;
            for _ in 0..10 {
                let p = [rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)];
                let c = christoffel(&g, &p)?;
                let mut worst: f64 = 0.0;
                for k in 0..2 {
                    worst = worst.max((c.get(k, 0, 1) - c.get(k, 1, 0)).abs());
                }
                acc.push(worst);
            }
            Ok(())
        },
    );

    b.run(
        "geometry.commutation",
        "trace of second covariant derivative of grad f equals Ric(grad f) + grad lap f",
        1e-8,
        |acc, rng| {
            for m in [Model::Euclidean(2), Model::Hyperbolic(2)] {
                let e = model(m)?;
                for p in
                    crate::atlas::sample_points(e.metric.chart(), &e.sample_box, 10, rng.gen())?
                {
                    let f = random_valid_cubic(&e.metric, &p, rng)?;
                    let lhs = rough_laplacian_grad(&f, &e.metric, &p)?;
                    let rhs = ricci_grad_plus_grad_laplacian(&f, &e.metric, &p)?;
                    acc.push(scaled_diff_vec(lhs.as_slice(), rhs.as_slice()));
                }
            }
            Ok(())
        },
    );

    b.run(
        "geometry.frame_trace",
        "adapted orthonormal frame traces the Hessian to the Laplacian",
        1e-10,
        |acc, rng| {
            for m in models_2d() {
                let e = model(m)?;
                for p in crate::atlas::sample_points(e.metric.chart(), &e.sample_box, 5, rng.gen())?
                {
                    let f = random_valid_cubic(&e.metric, &p, rng)?;
                    let gr = grad(&f, &e.metric, &p)?;
                    let frame = orthonormal_frame(&e.metric, &p, Some(&gr))?;
                    let t = frame.trace(&hess(&f, &e.metric, &p)?);
                    acc.push(scaled_diff(t, laplacian(&f, &e.metric, &p)?));
                }
            }
            Ok(())
        },
    );

    b.run(
        "geometry.lie_gradient",
        "Lie derivative of g along grad f is twice the Hessian",
        1e-10,
        |acc, rng| {
            for m in models_2d() {
                let e = model(m)?;
                for p in crate::atlas::sample_points(e.metric.chart(), &e.sample_box, 5, rng.gen())?
                {
                    let f = random_valid_cubic(&e.metric, &p, rng)?;
                    let lie = lie_metric(&GradientOf(&f), &e.metric, &p)?;
                    let h = hess(&f, &e.metric, &p)? * 2.0;
                    acc.push(scaled_diff_vec(lie.as_slice(), h.as_slice()));
                }
            }
            Ok(())
        },
    );
}

fn deform_checks(b: &mut Battery) {
    b.run(
        "deform.example_tension_c",
        "identity into the deformed metric is harmonic for the harmonic example families",
        1e-9,
        |acc, rng| {
            for field in [
                ExampleField::LinearEuclidean { a: vec![0.6, 0.0] },
                ExampleField::HyperbolicVertical {
                    a: 0.0,
                    b: 0.1,
                    n: 2,
                },
                ExampleField::HyperbolicVertical {
                    a: 0.0,
                    b: 0.1,
                    n: 3,
                },
            ] {
                let fx = Fixture::new(&field)?;
                let d = deformed(&fx)?;
                for p in fx.sample(30, rng.gen())? {
                    acc.push(d.tension_c(&p)?.abs().max());
                }
            }
            Ok(())
        },
    );

    b.run(
        "deform.example_tension_d",
        "identity from the deformed metric is harmonic for the domain-harmonic examples",
        1e-9,
        |acc, rng| {
            for field in [
                ExampleField::LinearEuclidean { a: vec![0.6, 0.0] },
                ExampleField::HyperbolicHorizontal {
                    a: 0.0,
                    b: 0.2,
                    n: 2,
                },
                ExampleField::HyperbolicHorizontal {
                    a: 0.0,
                    b: 0.2,
                    n: 3,
                },
            ] {
                let fx = Fixture::new(&field)?;
                let d = deformed(&fx)?;
                for p in fx.sample(30, rng.gen())? {
                    acc.push(d.tension_d(&p)?.abs().max().max(d.residual_d(&p)?.abs()));
                }
            }
            Ok(())
        },
    );

    b.run(
        "deform.worked_example",
        "quadratic field on the plane at (1,1)",
        1e-12,
        |acc, _| {
            let fx = Fixture::custom(
                "quadratic_euclidean",
                Model::Euclidean(2),
                "0.1*(x1^2+x2^2)",
            )?;
            let d = deformed(&fx)?;
            let p = [1.0, 1.0];
            let lap_t = 0.016 / 0.8464 + 0.4 / 0.92;
            acc.push((d.residual_d(&p)? - 0.384).abs());
            acc.push((d.deformed_laplacian_f(&p)? - lap_t).abs());
            acc.push(scaled_diff_vec(
                d.tension_c(&p)?.as_slice(),
                &[-0.08 / 0.92; 2],
            ));
            acc.push(scaled_diff_vec(
                d.tension_d(&p)?.as_slice(),
                &[0.2 * lap_t; 2],
            ));
            let c = d.deformed_christoffel(&p, ConnectionMethod::ViaConnectionFormula)?;
            acc.push((c.get(0, 0, 0) + 0.04 / 0.92).abs());
            Ok(())
        },
    );

    b.run(
        "deform.connection_two_way",
        "deformed Levi-Civita connection, formula against direct",
        1e-9,
        |acc, rng| {
            for fx in standard_fixtures()? {
                let d = deformed(&fx)?;
                for p in fx.sample(50, rng.gen())? {
                    let via = d.deformed_christoffel(&p, ConnectionMethod::ViaConnectionFormula)?;
                    let direct = d.deformed_christoffel(&p, ConnectionMethod::Direct)?;
                    acc.push(scaled_diff_vec(&via.values(), &direct.values()));
                }
            }
            Ok(())
        },
    );

    b.run(
        "deform.master_tension_c",
        "general identity-map tension reproduces the codomain-deformed closed form",
        1e-9,
        |acc, rng| {
            for fx in standard_fixtures()? {
                let d = deformed(&fx)?;
                for p in fx.sample(50, rng.gen())? {
                    let general = tension_identity(d.base(), &d, &p)?;
                    acc.push(scaled_diff_vec(
                        general.as_slice(),
                        d.tension_c(&p)?.as_slice(),
                    ));
                }
            }
            Ok(())
        },
    );

    b.run(
        "deform.master_tension_d",
        "general identity-map tension reproduces the domain-deformed closed form",
        1e-9,
        |acc, rng| {
            for fx in standard_fixtures()? {
                let d = deformed(&fx)?;
                for p in fx.sample(50, rng.gen())? {
                    let general = tension_identity(&d, d.base(), &p)?;
                    acc.push(scaled_diff_vec(
                        general.as_slice(),
                        d.tension_d(&p)?.as_slice(),
                    ));
                }
            }
            Ok(())
        },
    );

    b.run(
        "deform.tension_d_is_laplacian_times_grad",
        "tension of the domain-deformed identity is the deformed Laplacian times grad f",
        1e-9,
        |acc, rng| {
            for fx in standard_fixtures()? {
                let d = deformed(&fx)?;
                for p in fx.sample(50, rng.gen())? {
                    let g = grad(&fx.field, &fx.metric, &p)?;
                    let expected = g * d.deformed_laplacian(&fx.field, &p)?;
                    acc.push(scaled_diff_vec(
                        d.tension_d(&p)?.as_slice(),
                        expected.as_slice(),
                    ));
                }
            }
            Ok(())
        },
    );

    b.run(
        "deform.laplacian_two_way",
        "deformed Laplacian of f, closed form against direct assembly",
        1e-9,
        |acc, rng| {
            for fx in standard_fixtures()? {
                let d = deformed(&fx)?;
                for p in fx.sample(50, rng.gen())? {
                    acc.push(scaled_diff(
                        d.deformed_laplacian_f(&p)?,
                        d.deformed_laplacian(&fx.field, &p)?,
                    ));
                }
            }
            Ok(())
        },
    );

    b.run(
        "deform.eps_scaling",
        "harmonicity of the codomain-deformed identity is independent of the scale eps",
        0.0,
        |acc, rng| {
            for fx in standard_fixtures()? {
                let pts = fx.sample(20, rng.gen())?;
                let reference = deformed(&fx)?.predicates(&pts, 1e-8)?.harmonic_c;
                for eps in [0.25, 0.5, 0.9] {
                    let pr = deformed(&fx)?.with_eps(eps)?.predicates(&pts, 1e-8)?;
                    acc.push(if pr.harmonic_c == reference { 0.0 } else { 1.0 });
                }
            }
            Ok(())
        },
    );

    b.run(
        "deform.additivity",
        "sum of harmonic functions with gradient norms summing below one",
        1e-8,
        |acc, rng| {
            let e = model(Model::Euclidean(2))?;
            let coords = e.metric.chart().coords();
            let (f1, f2) = ("0.3*x1 - 0.1*x2", "0.2*x1 + 0.4*x2");
            let sum = ScalarField::parse(coords, &format!("({f1}) + ({f2})"))?;
            let d = DeformedMetric::new(e.metric.clone(), sum)?;
            let pts = crate::atlas::sample_points(e.metric.chart(), &e.sample_box, 30, rng.gen())?;
            let pr = d.predicates(&pts, 1e-8)?;
            acc.push(pr.max_laplacian);
            acc.push(if pr.harmonic_c { 0.0 } else { 1.0 });
            Ok(())
        },
    );

    b.run(
        "deform.affine_residual",
        "affine f makes the domain-deformed identity harmonic",
        1e-12,
        |acc, rng| {
            for n in 1..=4 {
                let e = model(Model::Euclidean(n))?;
                let a: Vec<f64> = (0..n).map(|_| rng.gen_range(-0.45..0.45)).collect();
                let terms: Vec<String> = a
                    .iter()
                    .enumerate()
                    .map(|(i, v)| format!("({v})*x{}", i + 1))
                    .collect();
                let f = ScalarField::parse(
                    e.metric.chart().coords(),
                    &format!("0.7 + {}", terms.join(" + ")),
                )?;
                let d = DeformedMetric::new(e.metric.clone(), f)?;
                for p in
                    crate::atlas::sample_points(e.metric.chart(), &e.sample_box, 10, rng.gen())?
                {
                    acc.push(d.residual_d(&p)?.abs());
                }
            }
            Ok(())
        },
    );

    b.run(
        "deform.eps_residual",
        "eps-scaled residual equals eps^2 times the unit residual plus (1-eps^2) lap f",
        1e-10,
        |acc, rng| {
            for fx in standard_fixtures()? {
                let d1 = deformed(&fx)?;
                for eps in [0.3, 0.7] {
                    let de = deformed(&fx)?.with_eps(eps)?;
                    for p in fx.sample(10, rng.gen())? {
                        let lap = laplacian(&fx.field, &fx.metric, &p)?;
                        let lhs = de.eps_residual(&p)?;
                        let rhs = eps * eps * d1.residual_d(&p)? + (1.0 - eps * eps) * lap;
                        acc.push(scaled_diff(lhs, rhs));
                    }
                }
            }
            Ok(())
        },
    );

    b.run(
        "deform.convexity",
        "convex f with harmonic domain-deformed identity is harmonic",
        1e-8,
        |acc, rng| {
            let fixtures = [
                Fixture::new(&ExampleField::LinearEuclidean { a: vec![0.6, 0.0] })?,
                Fixture::new(&ExampleField::LinearEuclidean {
                    a: vec![0.2, -0.3, 0.5],
                })?,
                Fixture::new(&ExampleField::HyperbolicHorizontal {
                    a: 0.0,
                    b: 0.2,
                    n: 2,
                })?,
                Fixture::custom(
                    "quadratic_euclidean",
                    Model::Euclidean(2),
                    "0.1*(x1^2+x2^2)",
                )?,
            ];
            for fx in fixtures {
                let d = deformed(&fx)?;
                for p in fx.sample(30, rng.gen())? {
                    let h = hess(&fx.field, &fx.metric, &p)?;
                    let convex = SymmetricEigen::new(h)
                        .eigenvalues
                        .iter()
                        .all(|&l| l >= -1e-10);
                    if convex && d.residual_d(&p)?.abs() <= 1e-10 {
                        acc.push(laplacian(&fx.field, &fx.metric, &p)?.abs());
                    }
                }
            }
            Ok(())
        },
    );

    b.run(
        "deform.conformal_gradient",
        "conformal gradient: lambda(m + (1-m)s) on the quadratic example",
        1e-12,
        |acc, _| {
            let fx = Fixture::custom(
                "quadratic_euclidean",
                Model::Euclidean(2),
                "0.1*(x1^2+x2^2)",
            )?;
            let pr = deformed(&fx)?.predicates(&[vec![1.0, 1.0]], 1e-8)?;
            let lambda = pr.conformal_lambda.ok_or(Error::SelfCheck {
                check: "conformal detection",
                residual: pr.conformal_defect,
            })?;
            acc.push((lambda - 0.2).abs());
            acc.push((pr.conformal_residual.unwrap_or(f64::NAN) - 0.2 * (2.0 - 0.08)).abs());
            acc.push(if pr.harmonic_c || pr.harmonic_d {
                1.0
            } else {
                0.0
            });
            Ok(())
        },
    );
}

/// Random cubic fields at random points of each 2-D model.
fn random_cases(rng: &mut ChaCha8Rng, per_model: usize) -> Result<Vec<(ChiContext, Vec<f64>)>> {
    let mut out = Vec::new();
    for m in models_2d() {
        let e = model(m)?;
        for p in crate::atlas::sample_points(e.metric.chart(), &e.sample_box, per_model, rng.gen())?
        {
            let f = random_valid_cubic(&e.metric, &p, rng)?;
            out.push((ChiContext::new(e.metric.clone(), f)?, p));
        }
    }
    Ok(out)
}

fn chi_checks(b: &mut Battery) {
    b.run(
        "chi.trace",
        "trace of chi is m times the Laplacian",
        1e-10,
        |acc, rng| {
            for (c, p) in random_cases(rng, 10)? {
                let lap = laplacian(c.field(), c.metric(), &p)?;
                acc.push(scaled_diff(c.trace_chi(&p)?, 2.0 * lap));
            }
            Ok(())
        },
    );

    b.run(
        "chi.gradf",
        "chi(grad f, grad f) is s times the domain-deformed residual",
        1e-10,
        |acc, rng| {
            for (c, p) in random_cases(rng, 10)? {
                let d = DeformedMetric::new(c.metric().clone(), c.field().clone())?;
                let s = d.validity(&p)?;
                acc.push(scaled_diff(c.chi_gradf(&p)?, s * d.residual_d(&p)?));
            }
            Ok(())
        },
    );

    b.run(
        "chi.divergence_two_way",
        "divergence of chi, closed form against covariant differentiation",
        1e-8,
        |acc, rng| {
            for (c, p) in random_cases(rng, 20)? {
                let v = DVector::from_fn(2, |_, _| rng.gen_range(-1.0..1.0));
                let a = c.div_chi(&p, &v, DivChiMethod::Analytic)?;
                let d = c.div_chi(&p, &v, DivChiMethod::Direct)?;
                acc.push(scaled_diff(a, d));
            }
            Ok(())
        },
    );

    b.run(
        "chi.divergence_vs_fd",
        "divergence of chi against nested finite differences",
        1e-5,
        |acc, rng| {
            let mut cases = vec![];
            let g = generic_metric()?;
            for _ in 0..3 {
                let p = vec![rng.gen_range(-0.8..0.8), rng.gen_range(-0.8..0.8)];
                let f = random_valid_cubic(&g, &p, rng)?;
                cases.push((ChiContext::new(g.clone(), f)?, p));
            }
            cases.extend(random_cases(rng, 2)?);
            for (c, p) in cases {
                let jet = c.div_chi_covector(&p)?;
                let fd = fd_oracle(Quantity::DivChi, c.metric(), Some(c.field()), &p, 1e-3)?;
                acc.push(agreement_residual(jet.as_slice(), &fd.data, 1e-8));
            }
            Ok(())
        },
    );

    b.run(
        "chi.gradf_three_way",
        "(div chi)(grad f): closed form, Bochner form and direct divergence",
        1e-8,
        |acc, rng| {
            let mut cases = random_cases(rng, 20)?;
            for fx in standard_fixtures()? {
                for p in fx.sample(5, rng.gen())? {
                    cases.push((chi_ctx(&fx)?, p));
                }
            }
            for (c, p) in cases {
                let a = c.div_chi_gradf(&p, DivChiGradMethod::ClosedForm)?;
                let bf = c.div_chi_gradf(&p, DivChiGradMethod::BochnerForm)?;
                let d = c.div_chi_gradf(&p, DivChiGradMethod::ViaDivChi)?;
                acc.push(
                    scaled_diff(a, bf)
                        .max(scaled_diff(a, d))
                        .max(scaled_diff(bf, d)),
                );
            }
            Ok(())
        },
    );

    b.run(
        "chi.bochner",
        "Bochner-Weitzenbock formula for functions",
        1e-8,
        |acc, rng| {
            for (c, p) in random_cases(rng, 20)? {
                let bd = c.bundle(&p)?;
                let scale = 1f64
                    .max(0.5 * bd.lap_s.abs())
                    .max(bd.hess_norm2)
                    .max(bd.ric_grad_grad().abs());
                acc.push(c.bochner_residual(&p)?.abs() / scale);
            }
            Ok(())
        },
    );

    b.run(
        "chi.lie_identity",
        "divergence of chi(., grad f) splits into (div chi)(grad f) plus <Hess f, chi>",
        1e-8,
        |acc, rng| {
            for (c, p) in random_cases(rng, 20)? {
                let (l, r) = c.lie_identity_check(&p)?;
                acc.push(scaled_diff(l, r));
            }
            Ok(())
        },
    );

    b.run(
        "chi.grad_s_two_way",
        "grad s equals 2 Hess(grad f, .) raised",
        1e-9,
        |acc, rng| {
            for (c, p) in random_cases(rng, 10)? {
                let bd = c.bundle(&p)?;
                acc.push(scaled_diff_vec(
                    bd.grad_s.as_slice(),
                    bd.grad_s_direct.as_slice(),
                ));
            }
            Ok(())
        },
    );

    b.run(
        "chi.affine_flat_vanishes",
        "affine f with constant gradient norm on flat space: (div chi)(grad f) = 0",
        1e-12,
        |acc, rng| {
            for n in 2..=4 {
                let e = model(Model::Euclidean(n))?;
                let terms: Vec<String> = (0..n)
                    .map(|i| format!("({})*x{}", rng.gen_range(-0.4..0.4), i + 1))
                    .collect();
                let f = ScalarField::parse(e.metric.chart().coords(), &terms.join(" + "))?;
                let c = ChiContext::new(e.metric.clone(), f)?;
                for p in crate::atlas::sample_points(e.metric.chart(), &e.sample_box, 5, rng.gen())?
                {
                    let v = c.div_chi_gradf(&p, DivChiGradMethod::ClosedForm)?;
                    // the inequality (div chi)(grad f) <= 0 and its equality case
                    acc.push(v.abs().max(v.max(0.0)));
                }
            }
            Ok(())
        },
    );

    b.run(
        "chi.conformal_closed_form",
        "conformal gradient of constant length: closed form of div chi(., grad f)",
        1e-8,
        |acc, rng| {
            let cases = [
                (Model::Euclidean(2), "0.6*x1 - 0.2*x2"),
                (Model::Euclidean(3), "0.3*x1 + 0.1*x2 - 0.5*x3"),
                (Model::SphereStereo(2), "2"),
                (Model::Hyperbolic(2), "1.5"),
            ];
            for (m, text) in cases {
                let e = model(m)?;
                let f = ScalarField::parse(e.metric.chart().coords(), text)?;
                let c = ChiContext::new(e.metric.clone(), f)?;
                for p in crate::atlas::sample_points(e.metric.chart(), &e.sample_box, 5, rng.gen())?
                {
                    let (lhs, _) = c.lie_identity_check(&p)?;
                    acc.push(scaled_diff(lhs, c.conformal_closed_form(&p)?));
                }
            }
            Ok(())
        },
    );
}

fn atlas_checks(b: &mut Battery) {
    b.run(
        "atlas.expectations",
        "expected harmonicity table of the example fields",
        0.0,
        |acc, rng| {
            let fields = [
                ExampleField::LinearEuclidean { a: vec![0.6, 0.0] },
                ExampleField::LinearEuclidean {
                    a: vec![0.1, 0.2, 0.3],
                },
                ExampleField::HyperbolicVertical {
                    a: 0.0,
                    b: 0.1,
                    n: 2,
                },
                ExampleField::HyperbolicVertical {
                    a: 1.0,
                    b: 0.1,
                    n: 3,
                },
                ExampleField::HyperbolicHorizontal {
                    a: 0.0,
                    b: 0.2,
                    n: 2,
                },
                ExampleField::HyperbolicHorizontal {
                    a: -1.0,
                    b: 0.2,
                    n: 3,
                },
                ExampleField::SphereCoordinate { c: 0.5, n: 2 },
            ];
            for field in fields {
                let fx = Fixture::new(&field)?;
                let pts = fx.sample(30, rng.gen())?;
                let pr = deformed(&fx)?.predicates(&pts, 1e-8)?;
                for e in &fx.expected {
                    let holds = match *e {
                        Expectation::HarmonicCodomain(v) => pr.harmonic_c == v,
                        Expectation::HarmonicDomain(v) => pr.harmonic_d == v,
                    };
                    acc.push(if holds { 0.0 } else { 1.0 });
                }
            }
            let h = model(Model::Hyperbolic(2))?;
            let fx = Fixture::new(&ExampleField::HyperbolicVertical {
                a: 0.0,
                b: 0.1,
                n: 2,
            })?;
            acc.push(
                (crate::geometry::grad_norm2(&fx.field, &h.metric, &[0.0, 5.0])? - 0.25).abs(),
            );
            Ok(())
        },
    );
}

fn solver_checks(b: &mut Battery) {
    let unit = [(0.0, 1.0), (0.0, 1.0)];
    let problem = |bc: &str, mode: Mode| -> Result<GridProblem> {
        let e = model(Model::Euclidean(2))?;
        Ok(GridProblem {
            boundary: ScalarField::parse(e.metric.chart().coords(), bc)?,
            metric: e.metric,
            domain: unit,
            nx: 17,
            ny: 17,
            mode,
            tol: Tolerances::default(),
        })
    };
    b.run(
        "solver.bilinear_exact",
        "discrete energy minimizer reproduces bilinear data",
        1e-8,
        |acc, _| {
            let mut pr = problem("x1*x2", Mode::Base)?;
            pr.tol.residual = 1e-12;
            let sol = pr.solve_base()?;
            acc.push(sol.field.sup_error(|x, y| x * y));
            Ok(())
        },
    );
    b.run(
        "solver.affine_fixed_point",
        "affine data is a fixed point of the deformed Picard iteration",
        1e-12,
        |acc, _| {
            let sol = problem("0.6*x1", Mode::Deformed)?.solve_deformed()?;
            acc.push(if sol.trace.picard_iterations == 1 {
                0.0
            } else {
                1.0
            });
            acc.push(sol.trace.picard_changes.iter().cloned().fold(0.0, f64::max));
            Ok(())
        },
    );
}

/// Cross-method battery on a user-supplied metric and field.
///
/// A validity violation at any point aborts with that point; other
/// evaluation errors are recorded as failed checks.
pub fn check_manifold(
    metric: &MetricField,
    f: &ScalarField,
    points: &[Vec<f64>],
    seed: u64,
    tol: Option<f64>,
) -> Result<Report> {
    if points.is_empty() {
        return Err(Error::Input("need at least one sample point".into()));
    }
    let d = DeformedMetric::new(metric.clone(), f.clone())?;
    for p in points {
        d.validity(p)?;
    }
    let c = ChiContext::new(metric.clone(), f.clone())?;
    let m = metric.chart().dim();
    let mut b = Battery {
        seed,
        tol_override: tol,
        records: Vec::new(),
    };
    b.run(
        "deform.connection_two_way",
        "deformed Levi-Civita connection, formula against direct",
        1e-9,
        |acc, _| {
            for p in points {
                let via = d.deformed_christoffel(p, ConnectionMethod::ViaConnectionFormula)?;
                let direct = d.deformed_christoffel(p, ConnectionMethod::Direct)?;
                acc.push(scaled_diff_vec(&via.values(), &direct.values()));
            }
            Ok(())
        },
    );
    b.run(
        "deform.master_tension_c",
        "general identity-map tension reproduces the codomain-deformed closed form",
        1e-9,
        |acc, _| {
            for p in points {
                acc.push(scaled_diff_vec(
                    tension_identity(metric, &d, p)?.as_slice(),
                    d.tension_c(p)?.as_slice(),
                ));
            }
            Ok(())
        },
    );
    b.run(
        "deform.master_tension_d",
        "general identity-map tension reproduces the domain-deformed closed form",
        1e-9,
        |acc, _| {
            for p in points {
                acc.push(scaled_diff_vec(
                    tension_identity(&d, metric, p)?.as_slice(),
                    d.tension_d(p)?.as_slice(),
                ));
            }
            Ok(())
        },
    );
    b.run(
        "deform.tension_d_is_laplacian_times_grad",
        "tension of the domain-deformed identity is the deformed Laplacian times grad f",
        1e-9,
        |acc, _| {
            for p in points {
                let expected = grad(f, metric, p)? * d.deformed_laplacian(f, p)?;
                acc.push(scaled_diff_vec(
                    d.tension_d(p)?.as_slice(),
                    expected.as_slice(),
                ));
            }
            Ok(())
        },
    );
    b.run(
        "deform.laplacian_two_way",
        "deformed Laplacian of f, closed form against direct assembly",
        1e-9,
        |acc, _| {
            for p in points {
                acc.push(scaled_diff(
                    d.deformed_laplacian_f(p)?,
                    d.deformed_laplacian(f, p)?,
                ));
            }
            Ok(())
        },
    );
    b.run(
        "chi.trace",
        "trace of chi is m times the Laplacian",
        1e-10,
        |acc, _| {
            for p in points {
                acc.push(scaled_diff(
                    c.trace_chi(p)?,
                    m as f64 * laplacian(f, metric, p)?,
                ));
            }
            Ok(())
        },
    );
    b.run(
        "chi.gradf",
        "chi(grad f, grad f) is s times the domain-deformed residual",
        1e-10,
        |acc, _| {
            for p in points {
                acc.push(scaled_diff(
                    c.chi_gradf(p)?,
                    d.validity(p)? * d.residual_d(p)?,
                ));
            }
            Ok(())
        },
    );
    b.run(
        "chi.divergence_two_way",
        "divergence of chi, closed form against covariant differentiation",
        1e-8,
        |acc, rng| {
            for p in points {
                let v = DVector::from_fn(m, |_, _| rng.gen_range(-1.0..1.0));
                acc.push(scaled_diff(
                    c.div_chi(p, &v, DivChiMethod::Analytic)?,
                    c.div_chi(p, &v, DivChiMethod::Direct)?,
                ));
            }
            Ok(())
        },
    );
    b.run(
        "chi.gradf_three_way",
        "(div chi)(grad f): closed form, Bochner form and direct divergence",
        1e-8,
        |acc, _| {
            for p in points {
                let a = c.div_chi_gradf(p, DivChiGradMethod::ClosedForm)?;
                let bf = c.div_chi_gradf(p, DivChiGradMethod::BochnerForm)?;
                let dd = c.div_chi_gradf(p, DivChiGradMethod::ViaDivChi)?;
                acc.push(scaled_diff(a, bf).max(scaled_diff(a, dd)));
            }
            Ok(())
        },
    );
    b.run(
        "chi.bochner",
        "Bochner-Weitzenbock formula for functions",
        1e-8,
        |acc, _| {
            for p in points {
                let bd = c.bundle(p)?;
                let scale = 1f64
                    .max(0.5 * bd.lap_s.abs())
                    .max(bd.hess_norm2)
                    .max(bd.ric_grad_grad().abs());
                acc.push(c.bochner_residual(p)?.abs() / scale);
            }
            Ok(())
        },
    );
    b.run(
        "chi.lie_identity",
        "divergence of chi(., grad f) splits into (div chi)(grad f) plus <Hess f, chi>",
        1e-8,
        |acc, _| {
            for p in points {
                let (l, r) = c.lie_identity_check(p)?;
                acc.push(scaled_diff(l, r));
            }
            Ok(())
        },
    );
    b.run(
        "chi.grad_s_two_way",
        "grad s equals 2 Hess(grad f, .) raised",
        1e-9,
        |acc, _| {
            for p in points {
                let bd = c.bundle(p)?;
                acc.push(scaled_diff_vec(
                    bd.grad_s.as_slice(),
                    bd.grad_s_direct.as_slice(),
                ));
            }
            Ok(())
        },
    );
    Ok(Report::new(seed, b.records))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_run_passes() {
        let r = verify_all(VerifyOptions::default());
        let failed: Vec<_> = r.failures().collect();
        assert!(failed.is_empty(), "{failed:#?}");
        assert!(r.checks.len() >= 25);
        assert!(r.checks.iter().all(|c| !c.anchor.is_empty()));
    }

    #[test]
    fn tight_tolerance_fails_oracle_checks() {
        let r = verify_all(VerifyOptions {
            seed: 0,
            tol: Some(1e-15),
        });
        assert!(!r.all_passed());
        assert!(r.failures().any(|c| c.id == "geometry.christoffel_vs_fd"));
    }
}
