//! Tensor calculus on a single coordinate chart.
//!
//! Metrics and scalar fields are expression-valued; every operation evaluates
//! them as order-3 jets at the requested point and assembles the tensor from
//! exact derivatives. Components are coordinate components throughout:
//! vectors are contravariant, one-forms and [`Sym2`] values covariant.
//!
//! Conventions: `Δ = div grad = g^{ij} Hess_ij`; `Ric` from
//! `Ric_ij = ∂_k Γ^k_ij − ∂_i Γ^k_kj + Γ^k_kl Γ^l_ij − Γ^k_il Γ^l_kj`, which gives
//! `Ric = −(n−1)g` on hyperbolic space.

mod frame;
pub mod oracle;
pub(crate) mod tensor;

use nalgebra::{DMatrix, DVector};

use crate::expr::{self, Bound, Expr};
use crate::jet::Jet;
use crate::{Error, Result};

pub use frame::{orthonormal_frame, PointFrame};
use tensor::{ix2, ix3};

/// Jet order used for every field evaluation: third derivatives of `f` and
/// second derivatives of `g` are the highest consumed anywhere.
pub const JET_ORDER: usize = 3;

/// Contravariant components of a tangent vector.
pub type Vector = DVector<f64>;
/// Covariant components of a one-form.
pub type Covector = DVector<f64>;
/// Covariant components of a symmetric bilinear form.
pub type Sym2 = DMatrix<f64>;

/// Covariant (0,3) array `(∇_k T)_ij`; the first slot is the derivative direction.
#[derive(Debug, Clone, PartialEq)]
pub struct Sym3 {
    dim: usize,
    data: Vec<f64>,
}

impl Sym3 {
    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn get(&self, k: usize, i: usize, j: usize) -> f64 {
        self.data[ix3(self.dim, k, i, j)]
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }
}

/// A coordinate domain: named coordinates, an open box and strict
/// inequality constraints `expr > 0`.
#[derive(Debug, Clone)]
pub struct Chart {
    coords: Vec<String>,
    bounds: Vec<(f64, f64)>,
    constraints: Vec<(Expr, Bound)>,
}

impl Chart {
    pub fn new<S: Into<String>>(coords: impl IntoIterator<Item = S>) -> Result<Chart> {
        let coords: Vec<String> = coords.into_iter().map(Into::into).collect();
        let m = coords.len();
        if m == 0 || m > crate::jet::MAX_DIM {
            return Err(Error::InvalidChart(format!(
                "dimension {m} outside 1..={}",
                crate::jet::MAX_DIM
            )));
        }
        for (i, c) in coords.iter().enumerate() {
            let valid_ident = c
                .chars()
                .next()
                .is_some_and(|ch| ch.is_ascii_alphabetic() || ch == '_')
                && c.chars().all(|ch| ch.is_ascii_alphanumeric() || ch == '_');
            if !valid_ident || c == "pi" || c == "e" || expr::Func::from_name(c).is_some() {
                return Err(Error::InvalidChart(format!(
                    "`{c}` is not a usable coordinate name"
                )));
            }
            if coords[..i].contains(c) {
                return Err(Error::InvalidChart(format!("duplicate coordinate `{c}`")));
            }
        }
        Ok(Chart {
            bounds: vec![(f64::NEG_INFINITY, f64::INFINITY); m],
            coords,
            constraints: Vec::new(),
        })
    }

    /// `x1, …, xn`.
    pub fn standard(n: usize) -> Result<Chart> {
        Chart::new((1..=n).map(|i| format!("x{i}")))
    }

    pub fn with_bounds(mut self, bounds: Vec<(f64, f64)>) -> Result<Chart> {
        if bounds.len() != self.dim() || bounds.iter().any(|(lo, hi)| !(lo < hi)) {
            return Err(Error::InvalidChart(format!(
                "bad coordinate box {bounds:?}"
            )));
        }
        self.bounds = bounds;
        Ok(self)
    }

    /// Adds the constraint `expr > 0`.
    pub fn with_constraint(mut self, expr: Expr) -> Result<Chart> {
        let bound = expr.bind(&self.coords)?;
        self.constraints.push((expr, bound));
        Ok(self)
    }

    pub fn dim(&self) -> usize {
        self.coords.len()
    }

    pub fn coords(&self) -> &[String] {
        &self.coords
    }

    pub fn bounds(&self) -> &[(f64, f64)] {
        &self.bounds
    }

    pub fn constraints(&self) -> impl Iterator<Item = &Expr> {
        self.constraints.iter().map(|(e, _)| e)
    }

    /// Strict membership: open box and every constraint `> 0`.
    pub fn contains(&self, p: &[f64]) -> bool {
        p.len() == self.dim()
            && p.iter().all(|x| x.is_finite())
            && p.iter()
                .zip(&self.bounds)
                .all(|(x, (lo, hi))| lo < x && x < hi)
            && self
                .constraints
                .iter()
                .all(|(_, b)| b.eval(p).is_ok_and(|v| v > 0.0))
    }

    pub fn check(&self, p: &[f64]) -> Result<()> {
        if self.contains(p) {
            Ok(())
        } else {
            Err(Error::OutsideDomain { point: p.to_vec() })
        }
    }
}

/// A smooth function on a chart.
#[derive(Debug, Clone)]
pub struct ScalarField {
    expr: Expr,
    bound: Bound,
}

impl ScalarField {
    pub fn new(coords: &[String], expr: Expr) -> Result<ScalarField> {
        let bound = expr.bind(coords)?;
        Ok(ScalarField { expr, bound })
    }

    pub fn parse(coords: &[String], text: &str) -> Result<ScalarField> {
        ScalarField::new(coords, expr::parse(text)?)
    }

    pub fn expr(&self) -> &Expr {
        &self.expr
    }

    pub fn dim(&self) -> usize {
        self.bound.dim()
    }

    pub fn value(&self, p: &[f64]) -> Result<f64> {
        Ok(self.bound.eval(p)?)
    }

    pub fn jet(&self, p: &[f64], order: usize) -> Result<Jet> {
        Ok(self.bound.eval_jet(p, order)?)
    }
}

/// Anything that supplies metric components as jets at a point.
pub trait MetricSource {
    fn dim(&self) -> usize;

    /// Rejects points outside the domain.
    fn check_point(&self, p: &[f64]) -> Result<()>;

    /// Full `m×m` row-major component jets. Implementations may return a
    /// lower order than requested when their inputs cannot support it.
    fn component_jets(&self, p: &[f64], order: usize) -> Result<Vec<Jet>>;

    fn component_values(&self, p: &[f64]) -> Result<Sym2> {
        let m = self.dim();
        let jets = self.component_jets(p, 0)?;
        Ok(DMatrix::from_fn(m, m, |i, j| jets[ix2(m, i, j)].value()))
    }
}

/// An expression-valued symmetric metric, stored as its lower triangle.
#[derive(Debug, Clone)]
pub struct MetricField {
    chart: Chart,
    entries: Vec<Expr>,
    bound: Vec<Bound>,
}

fn tri(i: usize, j: usize) -> usize {
    let (i, j) = if i >= j { (i, j) } else { (j, i) };
    i * (i + 1) / 2 + j
}

impl MetricField {
    /// `rows[i]` holds `g_i0 … g_ii`.
    pub fn new(chart: Chart, rows: Vec<Vec<Expr>>) -> Result<MetricField> {
        let m = chart.dim();
        if rows.len() != m || rows.iter().enumerate().any(|(i, r)| r.len() != i + 1) {
            return Err(Error::InvalidChart(format!(
                "metric needs a lower-triangular grid with {m} rows of lengths 1..={m}"
            )));
        }
        let entries: Vec<Expr> = rows.into_iter().flatten().collect();
        let bound = entries
            .iter()
            .map(|e| e.bind(chart.coords()))
            .collect::<Result<_, _>>()?;
        Ok(MetricField {
            chart,
            entries,
            bound,
        })
    }

    pub fn parse(chart: Chart, rows: &[Vec<&str>]) -> Result<MetricField> {
        let rows = rows
            .iter()
            .map(|r| {
                r.iter()
                    .map(|t| expr::parse(t))
                    .collect::<Result<Vec<_>, _>>()
            })
            .collect::<Result<Vec<_>, _>>()?;
        MetricField::new(chart, rows)
    }

    /// Same components with additional domain constraints.
    pub fn with_chart(&self, chart: Chart) -> Result<MetricField> {
        if chart.coords() != self.chart.coords() {
            return Err(Error::InvalidChart("coordinate names differ".into()));
        }
        let rows = (0..chart.dim())
            .map(|i| (0..=i).map(|j| self.entries[tri(i, j)].clone()).collect())
            .collect();
        MetricField::new(chart, rows)
    }

    pub fn chart(&self) -> &Chart {
        &self.chart
    }

    pub fn entry(&self, i: usize, j: usize) -> &Expr {
        &self.entries[tri(i, j)]
    }

    /// Plain floating-point component `g_ij(p)`.
    pub fn component(&self, i: usize, j: usize, p: &[f64]) -> Result<f64> {
        Ok(self.bound[tri(i, j)].eval(p)?)
    }
}

impl MetricSource for MetricField {
    fn dim(&self) -> usize {
        self.chart.dim()
    }

    fn check_point(&self, p: &[f64]) -> Result<()> {
        self.chart.check(p)
    }

    fn component_jets(&self, p: &[f64], order: usize) -> Result<Vec<Jet>> {
        let m = self.dim();
        let tri_jets = self
            .bound
            .iter()
            .map(|b| b.eval_jet(p, order))
            .collect::<Result<Vec<_>, _>>()?;
        Ok((0..m * m)
            .map(|k| tri_jets[tri(k / m, k % m)].clone())
            .collect())
    }
}

/// Cholesky positive-definiteness test with relative pivot tolerance `1e-12`.
pub fn is_positive_definite(a: &Sym2) -> bool {
    let m = a.nrows();
    let scale = (0..m).map(|i| a[(i, i)].abs()).fold(0.0, f64::max);
    if !(scale > 0.0) {
        return false;
    }
    let mut l = DMatrix::<f64>::zeros(m, m);
    for j in 0..m {
        let mut d = a[(j, j)];
        for k in 0..j {
            d -= l[(j, k)] * l[(j, k)];
        }
        if !(d > 1e-12 * scale) {
            return false;
        }
        let d = d.sqrt();
        l[(j, j)] = d;
        for i in j + 1..m {
            let mut v = a[(i, j)];
            for k in 0..j {
                v -= l[(i, k)] * l[(j, k)];
            }
            l[(i, j)] = v / d;
        }
    }
    true
}

/// Metric, inverse metric and Christoffel symbols as jets at one point.
#[derive(Debug, Clone)]
pub struct LocalMetric {
    dim: usize,
    point: Vec<f64>,
    pub(crate) g: Vec<Jet>,
    pub(crate) ginv: Vec<Jet>,
    pub(crate) gamma: Vec<Jet>,
}

impl LocalMetric {
    pub fn new(
        metric: &(impl MetricSource + ?Sized),
        p: &[f64],
        order: usize,
    ) -> Result<LocalMetric> {
        metric.check_point(p)?;
        let m = metric.dim();
        let g = metric.component_jets(p, order)?;
        let value = DMatrix::from_fn(m, m, |i, j| g[ix2(m, i, j)].value());
        if !is_positive_definite(&value) {
            return Err(Error::NotPositiveDefinite { point: p.to_vec() });
        }
        let ginv = tensor::inverse(m, &g)?;
        let gamma = tensor::christoffel(m, &g, &ginv)?;
        Ok(LocalMetric {
            dim: m,
            point: p.to_vec(),
            g,
            ginv,
            gamma,
        })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn point(&self) -> &[f64] {
        &self.point
    }

    pub fn g(&self) -> Sym2 {
        values2(self.dim, &self.g)
    }

    pub fn ginv(&self) -> Sym2 {
        values2(self.dim, &self.ginv)
    }

    pub fn christoffel(&self) -> Christoffel {
        Christoffel {
            dim: self.dim,
            jets: self.gamma.clone(),
        }
    }

    pub fn ricci(&self) -> Result<Sym2> {
        let ric = tensor::ricci(self.dim, &self.gamma)?;
        let r = values2(self.dim, &ric);
        let asym = (&r - r.transpose()).abs().max();
        if asym > 1e-9 * (1.0 + r.abs().max()) {
            return Err(Error::SelfCheck {
                check: "ricci symmetry",
                residual: asym,
            });
        }
        Ok((&r + r.transpose()) * 0.5)
    }

    /// Derivative data of a scalar field at this point.
    pub fn scalar(&self, f: &ScalarField) -> Result<LocalScalar> {
        LocalScalar::from_jet(self, f.jet(&self.point, JET_ORDER)?)
    }
}

/// Gradient, Hessian and Laplacian of a scalar as jets at one point.
#[derive(Debug, Clone)]
pub struct LocalScalar {
    pub(crate) f: Jet,
    pub(crate) df: Vec<Jet>,
    pub(crate) grad: Vec<Jet>,
    pub(crate) s: Jet,
    pub(crate) hess: Vec<Jet>,
    pub(crate) lap: Jet,
}

impl LocalScalar {
    pub(crate) fn from_jet(lm: &LocalMetric, f: Jet) -> Result<LocalScalar> {
        let m = lm.dim;
        let df = (0..m)
            .map(|i| f.partial(i))
            .collect::<Result<Vec<_>, _>>()?;
        let grad = tensor::raise(m, &lm.ginv, &df);
        let s = tensor::sum(&df[0], (0..m).map(|i| &df[i] * &grad[i]));
        let hess = tensor::hessian(m, &df, &lm.gamma)?;
        let lap = tensor::trace(m, &lm.ginv, &hess);
        Ok(LocalScalar {
            f,
            df,
            grad,
            s,
            hess,
            lap,
        })
    }

    pub fn value(&self) -> f64 {
        self.f.value()
    }

    pub fn df(&self) -> Covector {
        values1(&self.df)
    }

    pub fn grad(&self) -> Vector {
        values1(&self.grad)
    }

    /// `s = g(grad f, grad f)`.
    pub fn grad_norm2(&self) -> f64 {
        self.s.value()
    }

    pub fn hess(&self) -> Sym2 {
        values2(self.df.len(), &self.hess)
    }

    pub fn laplacian(&self) -> f64 {
        self.lap.value()
    }
}

pub(crate) fn values1(v: &[Jet]) -> DVector<f64> {
    DVector::from_iterator(v.len(), v.iter().map(Jet::value))
}

pub(crate) fn values2(m: usize, a: &[Jet]) -> DMatrix<f64> {
    DMatrix::from_fn(m, m, |i, j| a[ix2(m, i, j)].value())
}

/// A symmetric (0,2) tensor field evaluated as jets (order ≥ 1 for differentiation).
pub trait Sym2Field {
    fn sym2_jets(&self, metric: &dyn MetricSource, p: &[f64]) -> Result<Vec<Jet>>;
}

/// A vector field evaluated as contravariant component jets.
pub trait VectorField {
    fn vector_jets(&self, metric: &dyn MetricSource, p: &[f64]) -> Result<Vec<Jet>>;
}

/// The metric itself as a tensor field.
pub struct MetricTensor;

impl Sym2Field for MetricTensor {
    fn sym2_jets(&self, metric: &dyn MetricSource, p: &[f64]) -> Result<Vec<Jet>> {
        metric.check_point(p)?;
        metric.component_jets(p, JET_ORDER)
    }
}

/// `Hess f`.
pub struct HessianOf<'a>(pub &'a ScalarField);

impl Sym2Field for HessianOf<'_> {
    fn sym2_jets(&self, metric: &dyn MetricSource, p: &[f64]) -> Result<Vec<Jet>> {
        Ok(LocalMetric::new(metric, p, JET_ORDER)?.scalar(self.0)?.hess)
    }
}

/// `df ⊗ df`.
pub struct DfOuter<'a>(pub &'a ScalarField);

impl Sym2Field for DfOuter<'_> {
    fn sym2_jets(&self, metric: &dyn MetricSource, p: &[f64]) -> Result<Vec<Jet>> {
        metric.check_point(p)?;
        let m = metric.dim();
        let f = self.0.jet(p, JET_ORDER)?;
        let df = (0..m)
            .map(|i| f.partial(i))
            .collect::<Result<Vec<_>, _>>()?;
        Ok((0..m * m).map(|k| &df[k / m] * &df[k % m]).collect())
    }
}

/// `grad f`.
pub struct GradientOf<'a>(pub &'a ScalarField);

impl VectorField for GradientOf<'_> {
    fn vector_jets(&self, metric: &dyn MetricSource, p: &[f64]) -> Result<Vec<Jet>> {
        Ok(LocalMetric::new(metric, p, JET_ORDER)?.scalar(self.0)?.grad)
    }
}

/// Expression-valued vector field `X^i = exprs[i]`.
pub struct ExprVectorField(pub Vec<ScalarField>);

impl VectorField for ExprVectorField {
    fn vector_jets(&self, metric: &dyn MetricSource, p: &[f64]) -> Result<Vec<Jet>> {
        metric.check_point(p)?;
        self.0.iter().map(|c| c.jet(p, JET_ORDER)).collect()
    }
}

/// Metric components, inverse, and their jets at a point.
#[derive(Debug, Clone)]
pub struct MetricAt {
    pub value: Sym2,
    pub inverse: Sym2,
    /// Row-major `m×m` component jets.
    pub jets: Vec<Jet>,
}

pub fn metric_at(metric: &(impl MetricSource + ?Sized), p: &[f64]) -> Result<MetricAt> {
    let lm = LocalMetric::new(metric, p, 2)?;
    Ok(MetricAt {
        value: lm.g(),
        inverse: lm.ginv(),
        jets: lm.g,
    })
}

/// Christoffel symbols `Γ^k_ij` with their jets.
#[derive(Debug, Clone)]
pub struct Christoffel {
    dim: usize,
    jets: Vec<Jet>,
}

impl Christoffel {
    pub(crate) fn from_jets(dim: usize, jets: Vec<Jet>) -> Christoffel {
        Christoffel { dim, jets }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn get(&self, k: usize, i: usize, j: usize) -> f64 {
        self.jets[ix3(self.dim, k, i, j)].value()
    }

    /// `∂_l Γ^k_ij`.
    pub fn derivative(&self, k: usize, i: usize, j: usize, l: usize) -> f64 {
        self.jets[ix3(self.dim, k, i, j)].d(l)
    }

    /// All values, `Γ^k_ij` at `k·m² + i·m + j`.
    pub fn values(&self) -> Vec<f64> {
        self.jets.iter().map(Jet::value).collect()
    }
}

pub fn christoffel(metric: &(impl MetricSource + ?Sized), p: &[f64]) -> Result<Christoffel> {
    Ok(LocalMetric::new(metric, p, JET_ORDER)?.christoffel())
}

pub fn grad(f: &ScalarField, metric: &(impl MetricSource + ?Sized), p: &[f64]) -> Result<Vector> {
    Ok(LocalMetric::new(metric, p, JET_ORDER)?.scalar(f)?.grad())
}

/// `s = ‖grad f‖²`.
pub fn grad_norm2(
    f: &ScalarField,
    metric: &(impl MetricSource + ?Sized),
    p: &[f64],
) -> Result<f64> {
    Ok(LocalMetric::new(metric, p, JET_ORDER)?
        .scalar(f)?
        .grad_norm2())
}

pub fn hess(f: &ScalarField, metric: &(impl MetricSource + ?Sized), p: &[f64]) -> Result<Sym2> {
    Ok(LocalMetric::new(metric, p, JET_ORDER)?.scalar(f)?.hess())
}

pub fn laplacian(f: &ScalarField, metric: &(impl MetricSource + ?Sized), p: &[f64]) -> Result<f64> {
    Ok(LocalMetric::new(metric, p, JET_ORDER)?
        .scalar(f)?
        .laplacian())
}

pub fn ricci(metric: &(impl MetricSource + ?Sized), p: &[f64]) -> Result<Sym2> {
    LocalMetric::new(metric, p, JET_ORDER)?.ricci()
}

fn as_dyn<M: MetricSource>(m: &M) -> &dyn MetricSource {
    m
}

/// `(∇_k T)_ij`.
pub fn cov_deriv_sym2<M: MetricSource>(t: &dyn Sym2Field, metric: &M, p: &[f64]) -> Result<Sym3> {
    let lm = LocalMetric::new(metric, p, JET_ORDER)?;
    let tj = t.sym2_jets(as_dyn(metric), p)?;
    let nabla = tensor::cov_deriv_sym2(lm.dim, &tj, &lm.gamma)?;
    Ok(Sym3 {
        dim: lm.dim,
        data: nabla.iter().map(Jet::value).collect(),
    })
}

/// `(div T)_j = g^{ik}(∇_i T)_kj`.
pub fn div_sym2<M: MetricSource>(t: &dyn Sym2Field, metric: &M, p: &[f64]) -> Result<Covector> {
    let lm = LocalMetric::new(metric, p, JET_ORDER)?;
    let tj = t.sym2_jets(as_dyn(metric), p)?;
    Ok(values1(&tensor::div_sym2(
        lm.dim, &tj, &lm.ginv, &lm.gamma,
    )?))
}

pub fn div_vec<M: MetricSource>(x: &dyn VectorField, metric: &M, p: &[f64]) -> Result<f64> {
    let lm = LocalMetric::new(metric, p, JET_ORDER)?;
    let xj = x.vector_jets(as_dyn(metric), p)?;
    Ok(tensor::div_vec(lm.dim, &xj, &lm.gamma)?.value())
}

/// `trace_g ∇² grad f`.
pub fn rough_laplacian_grad(
    f: &ScalarField,
    metric: &(impl MetricSource + ?Sized),
    p: &[f64],
) -> Result<Vector> {
    let lm = LocalMetric::new(metric, p, JET_ORDER)?;
    let ls = lm.scalar(f)?;
    Ok(values1(&tensor::rough_laplacian_vec(
        lm.dim, &ls.grad, &lm.ginv, &lm.gamma,
    )?))
}

/// `Ric(grad f)^♯ + grad Δf`, the right-hand side of the commutation identity
/// for [`rough_laplacian_grad`].
pub fn ricci_grad_plus_grad_laplacian(
    f: &ScalarField,
    metric: &(impl MetricSource + ?Sized),
    p: &[f64],
) -> Result<Vector> {
    let lm = LocalMetric::new(metric, p, JET_ORDER)?;
    let ls = lm.scalar(f)?;
    let ric = lm.ricci()?;
    let ginv = lm.ginv();
    let grad = ls.grad();
    let dlap = DVector::from_iterator(lm.dim, (0..lm.dim).map(|i| ls.lap.d(i)));
    Ok(&ginv * (&ric * &grad) + &ginv * dlap)
}

/// `(L_X g)_ij`, computed from partial derivatives of `X` and `g` only.
pub fn lie_metric<M: MetricSource>(x: &dyn VectorField, metric: &M, p: &[f64]) -> Result<Sym2> {
    let lm = LocalMetric::new(metric, p, JET_ORDER)?;
    let xj = x.vector_jets(as_dyn(metric), p)?;
    Ok(values2(lm.dim, &tensor::lie_metric(lm.dim, &xj, &lm.g)?))
}

/// `⟨S, T⟩ = g^{ik} g^{jl} S_ij T_kl`.
pub fn inner_sym2(
    s: &Sym2,
    t: &Sym2,
    metric: &(impl MetricSource + ?Sized),
    p: &[f64],
) -> Result<f64> {
    let ginv = metric_at(metric, p)?.inverse;
    Ok(inner_sym2_with(s, t, &ginv))
}

pub(crate) fn inner_sym2_with(s: &Sym2, t: &Sym2, ginv: &Sym2) -> f64 {
    (ginv * s * ginv).component_mul(t).sum()
}

#[cfg(test)]
mod tests;
