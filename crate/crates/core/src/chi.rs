//! The symmetric tensor `χ = s·Hess f + Δf·(g − df⊗df)` and its divergence.
//!
//! `trace_g χ = m·Δf` and `χ(∇f, ∇f) = s·residual_d`, so the two identity-map
//! harmonicity conditions are the trace and the `∇f`-contraction of `χ`.
//! Every operator here (grad, div, Ric, Δ, ♯) refers to the base metric `g`.

use nalgebra::DVector;

use crate::geometry::{
    inner_sym2_with, tensor, values1, values2, Covector, LocalMetric, LocalScalar, MetricField,
    ScalarField, Sym2, Vector, JET_ORDER,
};
use crate::jet::Jet;
use crate::{Error, Result};

/// Relative tolerance of the identities asserted inside [`ChiContext`].
const SELF_CHECK: f64 = 1e-10;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DivChiMethod {
    /// Closed-form expression in `s`, `Hess f`, `Ric`, `grad Δf`, `grad s`.
    Analytic,
    /// Covariant divergence of `χ` evaluated as a jet field.
    Direct,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DivChiGradMethod {
    /// `½‖grad s‖² + s Ric(∇f,∇f) + g(grad Δf, ∇f) − (Δf)² s − ½Δf g(∇f, grad s)`.
    ClosedForm,
    /// Same quantity with `g(grad Δf, ∇f)` eliminated by the Bochner formula.
    BochnerForm,
    /// [`DivChiMethod::Direct`] with `V = grad f`.
    ViaDivChi,
}

/// Pointwise ingredients of `χ`.
#[derive(Debug, Clone)]
pub struct ChiBundle {
    pub g: Sym2,
    pub ginv: Sym2,
    pub df: Covector,
    pub grad: Vector,
    pub s: f64,
    pub hess: Sym2,
    pub lap: f64,
    /// `grad s = 2 Hess(∇f, ·)^♯`.
    pub grad_s: Vector,
    /// `grad s` from differentiating the jet of `s`.
    pub grad_s_direct: Vector,
    pub grad_lap: Vector,
    pub ric: Sym2,
    /// `‖Hess f‖²`.
    pub hess_norm2: f64,
    /// `Δs`.
    pub lap_s: f64,
}

impl ChiBundle {
    /// `χ = s·Hess f + Δf·(g − df⊗df)`.
    pub fn chi(&self) -> Sym2 {
        &self.hess * self.s + (&self.g - &self.df * self.df.transpose()) * self.lap
    }

    /// `Ric(∇f, ∇f)`.
    pub fn ric_grad_grad(&self) -> f64 {
        self.grad.dot(&(&self.ric * &self.grad))
    }

    /// `Hess f(∇f, ∇f)`.
    pub fn hess_grad_grad(&self) -> f64 {
        self.grad.dot(&(&self.hess * &self.grad))
    }

    fn inner(&self, a: &Vector, b: &Vector) -> f64 {
        a.dot(&(&self.g * b))
    }
}

struct Local {
    lm: LocalMetric,
    ls: LocalScalar,
}

#[derive(Debug, Clone)]
pub struct ChiContext {
    metric: MetricField,
    f: ScalarField,
}

fn close(a: f64, b: f64, rel: f64) -> bool {
    (a - b).abs() <= rel * (1.0 + a.abs().max(b.abs()))
}

impl ChiContext {
    pub fn new(metric: MetricField, f: ScalarField) -> Result<ChiContext> {
        if f.dim() != metric.chart().dim() {
            return Err(Error::Input("field and metric dimensions differ".into()));
        }
        Ok(ChiContext { metric, f })
    }

    pub fn metric(&self) -> &MetricField {
        &self.metric
    }

    pub fn field(&self) -> &ScalarField {
        &self.f
    }

    fn local(&self, p: &[f64]) -> Result<Local> {
        let lm = LocalMetric::new(&self.metric, p, JET_ORDER)?;
        let ls = lm.scalar(&self.f)?;
        Ok(Local { lm, ls })
    }

    pub fn bundle(&self, p: &[f64]) -> Result<ChiBundle> {
        let l = self.local(p)?;
        Self::bundle_from(&l)
    }

    fn bundle_from(l: &Local) -> Result<ChiBundle> {
        let m = l.lm.dim();
        let ginv = l.lm.ginv();
        let hess = l.ls.hess();
        let grad = l.ls.grad();
        let grad_s = &ginv * (&hess * &grad) * 2.0;
        let ds = DVector::from_iterator(m, (0..m).map(|i| l.ls.s.d(i)));
        let grad_s_direct = &ginv * ds;
        let dlap = DVector::from_iterator(m, (0..m).map(|i| l.ls.lap.d(i)));
        // s is an order-2 jet, enough for its Laplacian
        let s_scalar = LocalScalar::from_jet(&l.lm, l.ls.s.clone())?;
        Ok(ChiBundle {
            g: l.lm.g(),
            df: l.ls.df(),
            s: l.ls.grad_norm2(),
            lap: l.ls.laplacian(),
            grad_s,
            grad_s_direct,
            grad_lap: &ginv * dlap,
            ric: l.lm.ricci()?,
            hess_norm2: inner_sym2_with(&hess, &hess, &ginv),
            lap_s: s_scalar.laplacian(),
            ginv,
            hess,
            grad,
        })
    }

    pub fn chi_at(&self, p: &[f64]) -> Result<Sym2> {
        Ok(self.bundle(p)?.chi())
    }

    /// `trace_g χ`, asserted equal to `m·Δf`.
    pub fn trace_chi(&self, p: &[f64]) -> Result<f64> {
        let b = self.bundle(p)?;
        let t = b.ginv.component_mul(&b.chi()).sum();
        let expected = b.g.nrows() as f64 * b.lap;
        if !close(t, expected, SELF_CHECK) {
            return Err(Error::SelfCheck {
                check: "trace chi = m lap f",
                residual: (t - expected).abs(),
            });
        }
        Ok(t)
    }

    /// `χ(∇f, ∇f)`, asserted equal to `s·[Hess f(∇f,∇f) + (1 − s)Δf]`.
    pub fn chi_gradf(&self, p: &[f64]) -> Result<f64> {
        let b = self.bundle(p)?;
        let v = b.grad.dot(&(b.chi() * &b.grad));
        let expected = b.s * (b.hess_grad_grad() + (1.0 - b.s) * b.lap);
        if !close(v, expected, SELF_CHECK) {
            return Err(Error::SelfCheck {
                check: "chi(grad f, grad f) = s residual_d",
                residual: (v - expected).abs(),
            });
        }
        Ok(v)
    }

    /// `χ` as jets (order 1), rebuilt from the field rather than from point values.
    fn chi_jets(l: &Local) -> Vec<Jet> {
        let m = l.lm.dim();
        (0..m * m)
            .map(|k| {
                let (i, j) = (k / m, k % m);
                let dd = &l.ls.df[i] * &l.ls.df[j];
                let bracket = &l.lm.g[k] - &dd;
                &(&l.ls.s * &l.ls.hess[k]) + &(&l.ls.lap * &bracket)
            })
            .collect()
    }

    /// `(div χ)_j = g^{ik} (∇_i χ)_kj` from jets.
    pub fn div_chi_covector(&self, p: &[f64]) -> Result<Covector> {
        let l = self.local(p)?;
        let chi = Self::chi_jets(&l);
        Ok(values1(&tensor::div_sym2(
            l.lm.dim(),
            &chi,
            &l.lm.ginv,
            &l.lm.gamma,
        )?))
    }

    /// `(div χ)(V)`.
    pub fn div_chi(&self, p: &[f64], v: &Vector, method: DivChiMethod) -> Result<f64> {
        if v.len() != self.metric.chart().dim() {
            return Err(Error::Input(format!("vector has {} components", v.len())));
        }
        match method {
            DivChiMethod::Direct => Ok(self.div_chi_covector(p)?.dot(v)),
            DivChiMethod::Analytic => {
                let b = self.bundle(p)?;
                let v_grad = b.inner(v, &b.grad);
                Ok(v.dot(&(&b.hess * &b.grad_s))
                    + b.s * v.dot(&(&b.ric * &b.grad))
                    + (1.0 + b.s) * b.inner(&b.grad_lap, v)
                    - b.inner(&b.grad_lap, &b.grad) * v_grad
                    - b.lap * b.lap * v_grad
                    - 0.5 * b.lap * b.inner(v, &b.grad_s))
            }
        }
    }

    /// `(div χ)(∇f)`.
    pub fn div_chi_gradf(&self, p: &[f64], method: DivChiGradMethod) -> Result<f64> {
        let b = self.bundle(p)?;
        let half_gs2 = 0.5 * b.inner(&b.grad_s, &b.grad_s);
        let tail = -b.lap * b.lap * b.s - 0.5 * b.lap * b.inner(&b.grad, &b.grad_s);
        match method {
            DivChiGradMethod::ClosedForm => {
                Ok(half_gs2 + b.s * b.ric_grad_grad() + b.inner(&b.grad_lap, &b.grad) + tail)
            }
            DivChiGradMethod::BochnerForm => Ok(half_gs2 - (1.0 - b.s) * b.ric_grad_grad()
                + 0.5 * b.lap_s
                - b.hess_norm2
                + tail),
            DivChiGradMethod::ViaDivChi => self.div_chi(p, &b.grad, DivChiMethod::Direct),
        }
    }

    /// `½Δs − ‖Hess f‖² − g(∇f, grad Δf) − Ric(∇f, ∇f)`; vanishes identically.
    pub fn bochner_residual(&self, p: &[f64]) -> Result<f64> {
        let b = self.bundle(p)?;
        Ok(0.5 * b.lap_s - b.hess_norm2 - b.inner(&b.grad, &b.grad_lap) - b.ric_grad_grad())
    }

    /// `(div W, (div χ)(∇f) + ⟨Hess f, χ⟩)` with `W = χ(·, ∇f)^♯`.
    pub fn lie_identity_check(&self, p: &[f64]) -> Result<(f64, f64)> {
        let l = self.local(p)?;
        let m = l.lm.dim();
        let chi = Self::chi_jets(&l);
        // w_j = χ_jk ∇^k f, raised with g
        let w_flat: Vec<Jet> = (0..m)
            .map(|j| tensor::sum(&chi[0], (0..m).map(|k| &chi[j * m + k] * &l.ls.grad[k])))
            .collect();
        let w = tensor::raise(m, &l.lm.ginv, &w_flat);
        let lhs = tensor::div_vec(m, &w, &l.lm.gamma)?.value();

        let b = Self::bundle_from(&l)?;
        let chi_v = values2(m, &chi);
        let rhs = self.div_chi_gradf(p, DivChiGradMethod::ClosedForm)?
            + inner_sym2_with(&b.hess, &chi_v, &b.ginv);
        Ok((lhs, rhs))
    }

    /// `−(1 − s)Ric(∇f,∇f) − ‖Hess f‖² + (1 − s)(Δf)²`, the value of
    /// `div χ(·, ∇f)` when `grad f` is conformal with constant length.
    pub fn conformal_closed_form(&self, p: &[f64]) -> Result<f64> {
        let b = self.bundle(p)?;
        Ok(-(1.0 - b.s) * b.ric_grad_grad() - b.hess_norm2 + (1.0 - b.s) * b.lap * b.lap)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::atlas::{model, Model};
    use nalgebra::dvector;

    fn ctx(m: Model, f: &str) -> ChiContext {
        let e = model(m).unwrap();
        let f = ScalarField::parse(e.metric.chart().coords(), f).unwrap();
        ChiContext::new(e.metric, f).unwrap()
    }

    #[test]
    fn quadratic_example_values() {
        let c = ctx(Model::Euclidean(2), "0.1*(x1^2+x2^2)");
        let chi = c.chi_at(&[1.0, 1.0]).unwrap();
        assert!((chi[(0, 0)] - 0.4).abs() < 1e-14);
        assert!((chi[(0, 1)] + 0.016).abs() < 1e-14);
        assert!((chi[(1, 1)] - 0.4).abs() < 1e-14);
        assert!((c.trace_chi(&[1.0, 1.0]).unwrap() - 0.8).abs() < 1e-14);
        assert!((c.chi_gradf(&[1.0, 1.0]).unwrap() - 0.03072).abs() < 1e-14);
    }

    #[test]
    fn affine_field_vanishes() {
        let c = ctx(Model::Euclidean(2), "0.6*x1");
        let p = [0.3, -0.7];
        assert_eq!(c.chi_at(&p).unwrap().abs().max(), 0.0);
        for m in [
            DivChiGradMethod::ClosedForm,
            DivChiGradMethod::BochnerForm,
            DivChiGradMethod::ViaDivChi,
        ] {
            assert!(c.div_chi_gradf(&p, m).unwrap().abs() < 1e-15);
        }
        let (l, r) = c.lie_identity_check(&p).unwrap();
        assert!(l.abs() < 1e-15 && r.abs() < 1e-15);
    }

    #[test]
    fn divergence_methods_agree_on_hyperbolic_plane() {
        let c = ctx(Model::Hyperbolic(2), "0.05*x1^3 - 0.1*x1*x2^2 + 0.2*x2");
        let p = [0.4, 1.3];
        let v = dvector![0.7, -1.1];
        let a = c.div_chi(&p, &v, DivChiMethod::Analytic).unwrap();
        let d = c.div_chi(&p, &v, DivChiMethod::Direct).unwrap();
        assert!((a - d).abs() < 1e-10, "{a} vs {d}");
        let b = c.bundle(&p).unwrap();
        assert!((&b.grad_s - &b.grad_s_direct).abs().max() < 1e-12);
        assert!(c.bochner_residual(&p).unwrap().abs() < 1e-10);
        let (l, r) = c.lie_identity_check(&p).unwrap();
        assert!((l - r).abs() < 1e-10);
    }

    #[test]
    fn chi_gradf_vanishes_on_horizontal_example() {
        let c = ctx(Model::Hyperbolic(2), "0.2*x1");
        assert!(c.chi_gradf(&[1.0, 2.0]).unwrap().abs() < 1e-15);
    }
}
