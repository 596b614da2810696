//! The deformed metric `g̃ = g − ε² df⊗df` and the two identity maps
//! `Ĩ_c : (M, g) → (M, g̃)` and `Ĩ_d : (M, g̃) → (M, g)`.
//!
//! Closed forms are evaluated for the scaled function `εf`, so every formula
//! below reads with `f` standing for `εf` and `s = ‖grad(εf)‖²`.

use nalgebra::DVector;

use crate::geometry::{
    metric_at, Christoffel, LocalMetric, LocalScalar, MetricAt, MetricField, MetricSource,
    ScalarField, Vector, JET_ORDER,
};
use crate::jet::Jet;
use crate::{Error, Result};

/// Validity margin: `ε² s < 1 − VALIDITY_MARGIN`.
pub const VALIDITY_MARGIN: f64 = 1e-12;

#[derive(Debug, Clone)]
pub struct DeformedMetric {
    base: MetricField,
    f: ScalarField,
    eps: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ConnectionMethod {
    /// `Γ̃^k_ij = Γ^k_ij − Hess_ij (grad f)^k / (1 − s)`.
    ViaConnectionFormula,
    /// Coordinate Christoffel formula applied to the components of `g̃`.
    Direct,
}

/// Base-metric data of `εf` at one point.
struct Local {
    lm: LocalMetric,
    ls: LocalScalar,
}

impl Local {
    fn s(&self) -> f64 {
        self.ls.grad_norm2()
    }

    /// `Hess(∇f, ∇f)`.
    fn hess_grad_grad(&self) -> f64 {
        let g = self.ls.grad();
        g.dot(&(self.ls.hess() * &g))
    }
}

impl DeformedMetric {
    pub fn new(base: MetricField, f: ScalarField) -> Result<DeformedMetric> {
        if f.dim() != base.chart().dim() {
            return Err(Error::Input(format!(
                "field has {} coordinates, metric has {}",
                f.dim(),
                base.chart().dim()
            )));
        }
        Ok(DeformedMetric { base, f, eps: 1.0 })
    }

    /// Deforms by `εf` instead of `f`, `ε ∈ (0, 1]`.
    pub fn with_eps(mut self, eps: f64) -> Result<DeformedMetric> {
        if !(eps > 0.0 && eps <= 1.0) {
            return Err(Error::Parameter(format!(
                "eps must lie in (0, 1], got {eps}"
            )));
        }
        self.eps = eps;
        Ok(self)
    }

    pub fn base(&self) -> &MetricField {
        &self.base
    }

    pub fn field(&self) -> &ScalarField {
        &self.f
    }

    pub fn eps(&self) -> f64 {
        self.eps
    }

    fn local(&self, p: &[f64]) -> Result<Local> {
        let lm = LocalMetric::new(&self.base, p, JET_ORDER)?;
        let fj = self.f.jet(p, JET_ORDER)?.scale(self.eps);
        let ls = LocalScalar::from_jet(&lm, fj)?;
        let s = ls.grad_norm2();
        if !(s < 1.0 - VALIDITY_MARGIN) {
            return Err(Error::Validity {
                point: p.to_vec(),
                s: s / (self.eps * self.eps),
            });
        }
        Ok(Local { lm, ls })
    }

    /// `s = ‖grad f‖²` of the unscaled field, after checking `ε² s < 1`.
    pub fn validity(&self, p: &[f64]) -> Result<f64> {
        Ok(self.local(p)?.s() / (self.eps * self.eps))
    }

    pub fn deformed_metric_at(&self, p: &[f64]) -> Result<MetricAt> {
        metric_at(self, p)
    }

    pub fn deformed_christoffel(&self, p: &[f64], method: ConnectionMethod) -> Result<Christoffel> {
        match method {
            ConnectionMethod::Direct => Ok(LocalMetric::new(self, p, 2)?.christoffel()),
            ConnectionMethod::ViaConnectionFormula => {
                let l = self.local(p)?;
                let m = l.lm.dim();
                let one_minus_s = l.ls.s.scale(-1.0).add_scalar(1.0);
                let inv = one_minus_s.recip()?;
                let mut jets = Vec::with_capacity(m * m * m);
                for k in 0..m {
                    let gk = &l.ls.grad[k] * &inv;
                    for i in 0..m {
                        for j in 0..m {
                            let corr = &l.ls.hess[i * m + j] * &gk;
                            jets.push(&l.lm.gamma[(k * m + i) * m + j] - &corr);
                        }
                    }
                }
                Ok(Christoffel::from_jets(m, jets))
            }
        }
    }

    /// `τ(Ĩ_c) = −Δf / (1 − s) · grad f`.
    pub fn tension_c(&self, p: &[f64]) -> Result<Vector> {
        let l = self.local(p)?;
        Ok(l.ls.grad() * (-l.ls.laplacian() / (1.0 - l.s())))
    }

    /// `Hess f(∇f, ∇f) + (1 − s) Δf`; `Ĩ_d` is harmonic exactly where this vanishes.
    pub fn residual_d(&self, p: &[f64]) -> Result<f64> {
        let l = self.local(p)?;
        Ok(l.hess_grad_grad() + (1.0 - l.s()) * l.ls.laplacian())
    }

    /// `ε² Hess f(∇f, ∇f) + (1 − ε² s) Δf` with `f` unscaled; equals
    /// `residual_d / ε`.
    pub fn eps_residual(&self, p: &[f64]) -> Result<f64> {
        Ok(self.residual_d(p)? / self.eps)
    }

    /// `τ(Ĩ_d) = [Hess f(∇f, ∇f)/(1 − s)² + Δf/(1 − s)] grad f`.
    pub fn tension_d(&self, p: &[f64]) -> Result<Vector> {
        let l = self.local(p)?;
        let q = 1.0 - l.s();
        Ok(l.ls.grad() * (l.hess_grad_grad() / (q * q) + l.ls.laplacian() / q))
    }

    /// `Δ̃f` from the closed form `Hess f(∇f, ∇f)/(1 − s)² + Δf/(1 − s)`.
    pub fn deformed_laplacian_f(&self, p: &[f64]) -> Result<f64> {
        let l = self.local(p)?;
        let q = 1.0 - l.s();
        Ok(l.hess_grad_grad() / (q * q) + l.ls.laplacian() / q)
    }

    /// Laplace–Beltrami of `u` with respect to `g̃`, assembled from the
    /// components of `g̃` and its own Christoffel symbols.
    pub fn deformed_laplacian(&self, u: &ScalarField, p: &[f64]) -> Result<f64> {
        Ok(LocalMetric::new(self, p, 2)?.scalar(u)?.laplacian())
    }

    /// Harmonicity predicates over a sample.
    pub fn predicates(&self, sample: &[Vec<f64>], tol: f64) -> Result<Predicates> {
        if sample.is_empty() {
            return Err(Error::Input(
                "predicates need at least one sample point".into(),
            ));
        }
        let mut out = Predicates {
            harmonic_c: true,
            harmonic_d: true,
            max_laplacian: 0.0,
            max_residual_d: 0.0,
            conformal_lambda: None,
            conformal_defect: 0.0,
            conformal_residual: None,
            worst_point: sample[0].clone(),
        };
        let mut worst = -1.0f64;
        let mut conformal: Option<(f64, f64)> = None;
        for p in sample {
            let l = self.local(p)?;
            let m = l.lm.dim() as f64;
            let lap = l.ls.laplacian();
            let res = l.hess_grad_grad() + (1.0 - l.s()) * lap;
            out.max_laplacian = out.max_laplacian.max(lap.abs());
            out.max_residual_d = out.max_residual_d.max(res.abs());
            let badness = lap.abs().max(res.abs());
            if badness > worst {
                worst = badness;
                out.worst_point = p.clone();
            }
            let lambda = lap / m;
            let defect = (l.ls.hess() - l.lm.g() * lambda).abs().max();
            out.conformal_defect = out.conformal_defect.max(defect);
            let rc = lambda * (m + (1.0 - m) * l.s());
            if conformal.map_or(true, |(_, r)| rc.abs() > r.abs()) {
                conformal = Some((lambda, rc));
            }
        }
        out.harmonic_c = out.max_laplacian <= tol;
        out.harmonic_d = out.max_residual_d <= tol;
        if out.conformal_defect <= tol {
            if let Some((lambda, r)) = conformal {
                out.conformal_lambda = Some(lambda);
                out.conformal_residual = Some(r);
            }
        }
        Ok(out)
    }
}

impl MetricSource for DeformedMetric {
    fn dim(&self) -> usize {
        self.base.chart().dim()
    }

    fn check_point(&self, p: &[f64]) -> Result<()> {
        self.local(p).map(|_| ())
    }

    /// `g̃` jets; capped at order 2 since `f` is differentiated once.
    fn component_jets(&self, p: &[f64], order: usize) -> Result<Vec<Jet>> {
        let order = order.min(JET_ORDER - 1);
        let m = self.dim();
        let g = self.base.component_jets(p, order)?;
        let f = self.f.jet(p, order + 1)?.scale(self.eps);
        let df = (0..m)
            .map(|i| f.partial(i))
            .collect::<Result<Vec<_>, _>>()?;
        Ok((0..m * m)
            .map(|k| &g[k] - &(&df[k / m] * &df[k % m]))
            .collect())
    }
}

/// Outcome of [`DeformedMetric::predicates`].
#[derive(Debug, Clone, PartialEq)]
pub struct Predicates {
    /// `Ĩ_c` harmonic: `max |Δf| ≤ tol`.
    pub harmonic_c: bool,
    /// `Ĩ_d` harmonic: `max |residual_d| ≤ tol`.
    pub harmonic_d: bool,
    pub max_laplacian: f64,
    pub max_residual_d: f64,
    /// `λ = Δf/m` when `Hess f = λg` holds on the whole sample.
    pub conformal_lambda: Option<f64>,
    /// `max |Hess f − (Δf/m) g|` over the sample.
    pub conformal_defect: f64,
    /// `λ(m + (1 − m)s)` at the sample point where it is largest, when conformal.
    pub conformal_residual: Option<f64>,
    /// Sample point with the largest `max(|Δf|, |residual_d|)`.
    pub worst_point: Vec<f64>,
}

/// Tension field of the identity map `(M, g_dom) → (M, g_cod)`:
/// `τ^k = g_dom^{ij} (Γ_cod − Γ_dom)^k_ij`.
pub fn tension_identity(
    dom: &(impl MetricSource + ?Sized),
    cod: &(impl MetricSource + ?Sized),
    p: &[f64],
) -> Result<Vector> {
    let ld = LocalMetric::new(dom, p, 2)?;
    let lc = LocalMetric::new(cod, p, 2)?;
    let m = ld.dim();
    if lc.dim() != m {
        return Err(Error::Input(
            "domain and codomain metrics differ in dimension".into(),
        ));
    }
    let ginv = ld.ginv();
    let (gd, gc) = (ld.christoffel().values(), lc.christoffel().values());
    Ok(DVector::from_fn(m, |k, _| {
        let mut acc = 0.0;
        for i in 0..m {
            for j in 0..m {
                let ix = (k * m + i) * m + j;
                acc += ginv[(i, j)] * (gc[ix] - gd[ix]);
            }
        }
        acc
    }))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::atlas::{model, Model};
    use crate::geometry::Vector;
    use nalgebra::dmatrix;

    fn deformed(m: Model, f: &str) -> DeformedMetric {
        let e = model(m).unwrap();
        let f = ScalarField::parse(e.metric.chart().coords(), f).unwrap();
        DeformedMetric::new(e.metric, f).unwrap()
    }

    fn close(a: &Vector, b: &[f64], tol: f64) -> bool {
        a.iter().zip(b).all(|(x, y)| (x - y).abs() <= tol)
    }

    #[test]
    fn deformed_metric_values() {
        let d = deformed(Model::Euclidean(2), "0.6*x1");
        let g = d.deformed_metric_at(&[0.3, 0.1]).unwrap().value;
        assert!((g - dmatrix![0.64, 0.0; 0.0, 1.0]).abs().max() < 1e-15);

        let d = deformed(Model::Hyperbolic(2), "0.1*x2");
        let g = d.deformed_metric_at(&[0.0, 5.0]).unwrap().value;
        assert!((g[(0, 0)] - 0.04).abs() < 1e-15);
        assert!((g[(1, 1)] - 0.03).abs() < 1e-15);
    }

    #[test]
    fn validity_violation_carries_witness() {
        let d = deformed(Model::Euclidean(2), "1.2*x1");
        match d.residual_d(&[0.5, 0.5]) {
            Err(Error::Validity { point, s }) => {
                assert_eq!(point, vec![0.5, 0.5]);
                assert!((s - 1.44).abs() < 1e-12);
            }
            other => panic!("expected validity error, got {other:?}"),
        }
        // the scaled family is valid once eps² s < 1
        let d = d.with_eps(0.5).unwrap();
        assert!((d.validity(&[0.5, 0.5]).unwrap() - 1.44).abs() < 1e-12);
    }

    #[test]
    fn quadratic_example() {
        let d = deformed(Model::Euclidean(2), "0.1*(x1^2+x2^2)");
        let p = [1.0, 1.0];
        assert!((d.residual_d(&p).unwrap() - 0.384).abs() < 1e-15);
        let tc = d.tension_c(&p).unwrap();
        assert!(close(&tc, &[-0.08 / 0.92, -0.08 / 0.92], 1e-15));
        let expected = 0.016 / 0.8464 + 0.4 / 0.92;
        assert!((d.deformed_laplacian_f(&p).unwrap() - expected).abs() < 1e-15);
        let td = d.tension_d(&p).unwrap();
        assert!(close(&td, &[0.2 * expected, 0.2 * expected], 1e-15));

        let via = d
            .deformed_christoffel(&p, ConnectionMethod::ViaConnectionFormula)
            .unwrap();
        let direct = d
            .deformed_christoffel(&p, ConnectionMethod::Direct)
            .unwrap();
        assert!((via.get(0, 0, 0) + 0.04 / 0.92).abs() < 1e-15);
        let diff = via
            .values()
            .iter()
            .zip(direct.values())
            .fold(0.0f64, |a, (x, y)| a.max((x - y).abs()));
        assert!(diff < 1e-13);

        assert!(close(
            &tension_identity(d.base(), &d, &p).unwrap(),
            tc.as_slice(),
            1e-13
        ));
        assert!(close(
            &tension_identity(&d, d.base(), &p).unwrap(),
            td.as_slice(),
            1e-13
        ));
        assert!((d.deformed_laplacian(d.field(), &p).unwrap() - expected).abs() < 1e-13);
    }

    #[test]
    fn horizontal_example_is_harmonic() {
        let d = deformed(Model::Hyperbolic(2), "0.2*x1");
        let p = [1.0, 2.0];
        assert!((d.validity(&p).unwrap() - 0.16).abs() < 1e-15);
        assert!(d.residual_d(&p).unwrap().abs() < 1e-15);
        assert!(d.tension_d(&p).unwrap().abs().max() < 1e-15);
    }

    #[test]
    fn predicates_on_examples() {
        let d = deformed(Model::Euclidean(2), "0.6*x1");
        let sample: Vec<Vec<f64>> = (0..20)
            .map(|k| vec![0.1 * k as f64 - 1.0, 0.05 * k as f64])
            .collect();
        let pr = d.predicates(&sample, 1e-8).unwrap();
        assert!(pr.harmonic_c && pr.harmonic_d);

        let d = deformed(Model::Euclidean(2), "0.1*(x1^2+x2^2)");
        let pr = d.predicates(&[vec![1.0, 1.0]], 1e-8).unwrap();
        assert!(!pr.harmonic_c && !pr.harmonic_d);
        assert!((pr.conformal_lambda.unwrap() - 0.2).abs() < 1e-15);
        assert!((pr.conformal_residual.unwrap() - 0.2 * (2.0 - 0.08)).abs() < 1e-15);

        let d = deformed(Model::Hyperbolic(2), "1 + 0.1*x2");
        let pr = d
            .predicates(&[vec![0.0, 2.0], vec![0.5, 3.0]], 1e-8)
            .unwrap();
        assert!(pr.harmonic_c && !pr.harmonic_d);
    }

    #[test]
    fn eps_residual_matches_definition() {
        let eps = 0.7;
        let d = deformed(Model::Hyperbolic(2), "0.3*x1^2 - 0.1*x2")
            .with_eps(eps)
            .unwrap();
        let p = [0.4, 1.5];
        let e = model(Model::Hyperbolic(2)).unwrap();
        let lm = LocalMetric::new(&e.metric, &p, JET_ORDER).unwrap();
        let ls = lm.scalar(d.field()).unwrap();
        let g = ls.grad();
        let expected = eps * eps * g.dot(&(ls.hess() * &g))
            + (1.0 - eps * eps * ls.grad_norm2()) * ls.laplacian();
        assert!((d.eps_residual(&p).unwrap() - expected).abs() < 1e-14);
    }
}
