//! Finite-difference recomputation of jet-derived tensors.
//!
//! Uses only plain evaluation of the metric and field expressions: central
//! differences with one Richardson step (`(4·D(h/2) − D(h)) / 3`). Quantities
//! that need a derivative of an already differenced tensor (Ricci, div χ)
//! difference the inner finite-difference tensor again with an outer step of
//! `10·h`.

use nalgebra::DMatrix;

use super::{MetricField, ScalarField};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Quantity {
    /// `Γ^k_ij`, shape `[m, m, m]`.
    Christoffel,
    /// `Hess f`, shape `[m, m]`.
    Hessian,
    /// `Δf`, shape `[]`.
    Laplacian,
    /// `Ric`, shape `[m, m]`.
    Ricci,
    /// `(div χ)_j`, shape `[m]`.
    DivChi,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FdTensor {
    pub shape: Vec<usize>,
    pub data: Vec<f64>,
}

const OUTER: f64 = 10.0;

struct Ctx<'a> {
    metric: &'a MetricField,
    f: Option<&'a ScalarField>,
    p: Vec<f64>,
    margin: f64,
    m: usize,
}

type VecFn<'a> = dyn Fn(&[f64]) -> Result<Vec<f64>> + 'a;

impl Ctx<'_> {
    fn guard(&self, q: &[f64]) -> Result<()> {
        if self.metric.chart().contains(q) {
            Ok(())
        } else {
            Err(Error::InsufficientMargin {
                point: self.p.clone(),
                margin: self.margin,
            })
        }
    }

    fn metric(&self, q: &[f64]) -> Result<DMatrix<f64>> {
        self.guard(q)?;
        let m = self.m;
        let mut g = DMatrix::zeros(m, m);
        for i in 0..m {
            for j in 0..=i {
                let v = self.metric.component(i, j, q)?;
                g[(i, j)] = v;
                g[(j, i)] = v;
            }
        }
        Ok(g)
    }

    fn field(&self) -> Result<&ScalarField> {
        self.f
            .ok_or_else(|| Error::Input("finite-difference quantity needs a scalar field".into()))
    }

    fn f_value(&self, q: &[f64]) -> Result<Vec<f64>> {
        self.guard(q)?;
        Ok(vec![self.field()?.value(q)?])
    }

    /// `∂_i φ` for every output component.
    fn d1(&self, phi: &VecFn, q: &[f64], i: usize, h: f64) -> Result<Vec<f64>> {
        let central = |h: f64| -> Result<Vec<f64>> {
            let mut a = q.to_vec();
            let mut b = q.to_vec();
            a[i] += h;
            b[i] -= h;
            let (fa, fb) = (phi(&a)?, phi(&b)?);
            Ok(fa
                .iter()
                .zip(&fb)
                .map(|(x, y)| (x - y) / (2.0 * h))
                .collect())
        };
        richardson(central(h)?, central(h / 2.0)?)
    }

    /// `∂_i∂_j φ`.
    fn d2(&self, phi: &VecFn, q: &[f64], i: usize, j: usize, h: f64) -> Result<Vec<f64>> {
        let stencil = |h: f64| -> Result<Vec<f64>> {
            let at = |si: f64, sj: f64| {
                let mut x = q.to_vec();
                x[i] += si * h;
                x[j] += sj * h;
                phi(&x)
            };
            if i == j {
                let (a, c, b) = (at(0.5, 0.5)?, phi(q)?, at(-0.5, -0.5)?);
                Ok(a.iter()
                    .zip(&c)
                    .zip(&b)
                    .map(|((a, c), b)| (a - 2.0 * c + b) / (h * h))
                    .collect())
            } else {
                let (pp, pm, mp, mm) = (
                    at(1.0, 1.0)?,
                    at(1.0, -1.0)?,
                    at(-1.0, 1.0)?,
                    at(-1.0, -1.0)?,
                );
                Ok((0..pp.len())
                    .map(|k| (pp[k] - pm[k] - mp[k] + mm[k]) / (4.0 * h * h))
                    .collect())
            }
        };
        richardson(stencil(h)?, stencil(h / 2.0)?)
    }

    fn gradient(&self, phi: &VecFn, q: &[f64], h: f64) -> Result<Vec<Vec<f64>>> {
        (0..self.m).map(|i| self.d1(phi, q, i, h)).collect()
    }

    /// `Γ^k_ij` at `q`, flattened `k·m² + i·m + j`.
    fn christoffel(&self, q: &[f64], h: f64) -> Result<Vec<f64>> {
        let m = self.m;
        let g = self.metric(q)?;
        let ginv = g
            .clone()
            .try_inverse()
            .ok_or(Error::NotPositiveDefinite { point: q.to_vec() })?;
        let gfun = |x: &[f64]| -> Result<Vec<f64>> { Ok(self.metric(x)?.as_slice().to_vec()) };
        // dg[l][(i, j)] column-major as nalgebra stores it; g is symmetric
        let dg = self.gradient(&gfun, q, h)?;
        let d = |l: usize, i: usize, j: usize| dg[l][i + j * m];
        let mut out = vec![0.0; m * m * m];
        for k in 0..m {
            for i in 0..m {
                for j in 0..m {
                    out[(k * m + i) * m + j] = 0.5
                        * (0..m)
                            .map(|l| ginv[(k, l)] * (d(i, j, l) + d(j, i, l) - d(l, i, j)))
                            .sum::<f64>();
                }
            }
        }
        Ok(out)
    }

    /// `(Hess f, Δf, df, s)` at `q`.
    fn hessian(&self, q: &[f64], h: f64) -> Result<(DMatrix<f64>, f64, Vec<f64>, f64)> {
        let m = self.m;
        let gamma = self.christoffel(q, h)?;
        let ffun = |x: &[f64]| self.f_value(x);
        let df: Vec<f64> = self
            .gradient(&ffun, q, h)?
            .into_iter()
            .map(|v| v[0])
            .collect();
        let mut hess = DMatrix::zeros(m, m);
        for i in 0..m {
            for j in i..m {
                let second = self.d2(&ffun, q, i, j, h)?[0];
                let corr: f64 = (0..m).map(|k| gamma[(k * m + i) * m + j] * df[k]).sum();
                hess[(i, j)] = second - corr;
                hess[(j, i)] = second - corr;
            }
        }
        let ginv = self
            .metric(q)?
            .try_inverse()
            .ok_or(Error::NotPositiveDefinite { point: q.to_vec() })?;
        let lap = ginv.component_mul(&hess).sum();
        let dfv = nalgebra::DVector::from_vec(df.clone());
        let s = dfv.dot(&(&ginv * &dfv));
        Ok((hess, lap, df, s))
    }

    fn ricci(&self, h: f64) -> Result<Vec<f64>> {
        let m = self.m;
        let q = self.p.clone();
        let gamma = self.christoffel(&q, h)?;
        let gfun = |x: &[f64]| self.christoffel(x, h);
        let dgamma = self.gradient(&gfun, &q, OUTER * h)?;
        let gm = |k: usize, i: usize, j: usize| gamma[(k * m + i) * m + j];
        let dgm = |l: usize, k: usize, i: usize, j: usize| dgamma[l][(k * m + i) * m + j];
        let mut ric = vec![0.0; m * m];
        for i in 0..m {
            for j in 0..m {
                let mut acc = 0.0;
                for k in 0..m {
                    acc += dgm(k, k, i, j) - dgm(i, k, k, j);
                    for l in 0..m {
                        acc += gm(k, k, l) * gm(l, i, j) - gm(k, i, l) * gm(l, k, j);
                    }
                }
                ric[i * m + j] = acc;
            }
        }
        Ok(ric)
    }

    fn chi(&self, q: &[f64], h: f64) -> Result<Vec<f64>> {
        let m = self.m;
        let (hess, lap, df, s) = self.hessian(q, h)?;
        let g = self.metric(q)?;
        Ok((0..m * m)
            .map(|k| {
                let (i, j) = (k / m, k % m);
                s * hess[(i, j)] + lap * (g[(i, j)] - df[i] * df[j])
            })
            .collect())
    }

    fn div_chi(&self, h: f64) -> Result<Vec<f64>> {
        let m = self.m;
        let q = self.p.clone();
        let chi = self.chi(&q, h)?;
        let gamma = self.christoffel(&q, h)?;
        let ginv = self
            .metric(&q)?
            .try_inverse()
            .ok_or(Error::NotPositiveDefinite { point: q.clone() })?;
        let cfun = |x: &[f64]| self.chi(x, h);
        let dchi = self.gradient(&cfun, &q, OUTER * h)?;
        let gm = |k: usize, i: usize, j: usize| gamma[(k * m + i) * m + j];
        let mut out = vec![0.0; m];
        for (j, slot) in out.iter_mut().enumerate() {
            let mut acc = 0.0;
            for i in 0..m {
                for k in 0..m {
                    let mut nabla = dchi[i][k * m + j];
                    for l in 0..m {
                        nabla -= gm(l, i, k) * chi[l * m + j] + gm(l, i, j) * chi[k * m + l];
                    }
                    acc += ginv[(i, k)] * nabla;
                }
            }
            *slot = acc;
        }
        Ok(out)
    }
}

fn richardson(coarse: Vec<f64>, fine: Vec<f64>) -> Result<Vec<f64>> {
    Ok(coarse
        .iter()
        .zip(&fine)
        .map(|(c, f)| (4.0 * f - c) / 3.0)
        .collect())
}

/// Recomputes `quantity` at `p` by finite differences with base step `h`.
pub fn fd_oracle(
    quantity: Quantity,
    metric: &MetricField,
    f: Option<&ScalarField>,
    p: &[f64],
    h: f64,
) -> Result<FdTensor> {
    let m = metric.chart().dim();
    let nested = matches!(quantity, Quantity::Ricci | Quantity::DivChi);
    let reach = if nested { (OUTER + 1.0) * h } else { h };
    let ctx = Ctx {
        metric,
        f,
        p: p.to_vec(),
        margin: 2.0 * reach,
        m,
    };
    metric.chart().check(p)?;
    for i in 0..m {
        for sign in [-1.0, 1.0] {
            let mut q = p.to_vec();
            q[i] += sign * 2.0 * reach;
            ctx.guard(&q)?;
        }
    }
    let (shape, data) = match quantity {
        Quantity::Christoffel => (vec![m, m, m], ctx.christoffel(p, h)?),
        Quantity::Hessian => {
            let (hess, ..) = ctx.hessian(p, h)?;
            (vec![m, m], hess.transpose().as_slice().to_vec())
        }
        Quantity::Laplacian => (vec![], vec![ctx.hessian(p, h)?.1]),
        Quantity::Ricci => (vec![m, m], ctx.ricci(h)?),
        Quantity::DivChi => (vec![m], ctx.div_chi(h)?),
    };
    Ok(FdTensor { shape, data })
}

/// `max_c |a_c − b_c| ≤ rel·max|b| + abs` comparison used against oracle output.
pub fn agrees(jet: &[f64], oracle: &[f64], rel: f64, abs: f64) -> bool {
    agreement_residual(jet, oracle, abs / rel) <= rel
}

/// `max_c |a_c − b_c| / (max|b| + floor)`: relative error against the tensor's size.
pub fn agreement_residual(jet: &[f64], oracle: &[f64], floor: f64) -> f64 {
    let scale = oracle.iter().fold(0.0f64, |a, b| a.max(b.abs())) + floor;
    jet.iter()
        .zip(oracle)
        .fold(0.0f64, |a, (x, y)| a.max((x - y).abs()))
        / scale
}
