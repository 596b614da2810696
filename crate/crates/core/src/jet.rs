//! Truncated multivariate Taylor arithmetic.
//!
//! A [`Jet`] carries the Taylor coefficients of a smooth function of `dim`
//! variables about a point, up to total degree `order ≤ 3`. Arithmetic on jets
//! is exact up to rounding, so composing jets of the coordinates yields exact
//! first, second and third partial derivatives of any expression.
//!
//! Coefficients are stored as Taylor coefficients `c_α = ∂^α f / α!`, one per
//! multi-index `α` with `|α| ≤ order`. Within each degree block the multi-indices
//! are enumerated as non-decreasing index tuples `(i₁ ≤ … ≤ i_k)` in
//! lexicographic order, so the degree-k block has `C(dim + k - 1, k)` entries.
//! Use [`Jet::derivative`] to read partial derivatives rather than raw
//! coefficients.

use std::collections::HashMap;
use std::fmt;
use std::ops::{Add, Mul, Neg, Sub};
use std::sync::OnceLock;

use thiserror::Error;

/// Highest supported total degree.
pub const MAX_ORDER: usize = 3;
/// Highest supported number of variables.
pub const MAX_DIM: usize = 8;

/// Smallest divisor magnitude accepted by [`Jet::recip`].
const DIV_FLOOR: f64 = 1e-300;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum JetError {
    #[error("jet dimension {dim} / order {order} outside supported range (dim 1..={MAX_DIM}, order 0..={MAX_ORDER})")]
    Unsupported { dim: usize, order: usize },
    #[error("variable index {index} out of range for dimension {dim}")]
    IndexOutOfRange { index: usize, dim: usize },
    #[error("jet shape mismatch: (dim {}, order {}) vs (dim {}, order {})", .left.0, .left.1, .right.0, .right.1)]
    ShapeMismatch {
        left: (usize, usize),
        right: (usize, usize),
    },
    #[error("division by near-zero value {0:e}")]
    DivisionByZero(f64),
    #[error("{func} is not smooth at {value}")]
    Domain { func: &'static str, value: f64 },
    #[error("cannot differentiate an order-0 jet")]
    OrderExhausted,
    #[error("non-finite coefficient produced")]
    NonFinite,
}

/// Index tables shared by every jet of a given `(dim, order)`.
struct Layout {
    dim: usize,
    order: usize,
    exps: Vec<[u8; MAX_DIM]>,
    block_start: [usize; MAX_ORDER + 2],
    index: HashMap<[u8; MAX_DIM], usize>,
    /// `(a, b, out)` triples with `exps[a] + exps[b] = exps[out]`.
    products: Vec<(u16, u16, u16)>,
    /// `α!` for every multi-index.
    factorial: Vec<f64>,
}

impl Layout {
    fn build(dim: usize, order: usize) -> Layout {
        let mut exps = Vec::new();
        let mut block_start = [0; MAX_ORDER + 2];
        for degree in 0..=order {
            block_start[degree] = exps.len();
            let mut tuple = vec![0usize; degree];
            loop {
                let mut e = [0u8; MAX_DIM];
                for &i in &tuple {
                    e[i] += 1;
                }
                exps.push(e);
                // next non-decreasing tuple
                let mut pos = degree;
                while pos > 0 && tuple[pos - 1] == dim - 1 {
                    pos -= 1;
                }
                if pos == 0 {
                    break;
                }
                let v = tuple[pos - 1] + 1;
                for t in &mut tuple[pos - 1..] {
                    *t = v;
                }
            }
        }
        for b in block_start.iter_mut().skip(order + 1) {
            *b = exps.len();
        }
        let index: HashMap<_, _> = exps.iter().enumerate().map(|(i, e)| (*e, i)).collect();
        let mut products = Vec::new();
        for (out, eo) in exps.iter().enumerate() {
            for (a, ea) in exps.iter().enumerate() {
                if (0..dim).any(|d| ea[d] > eo[d]) {
                    continue;
                }
                let mut eb = [0u8; MAX_DIM];
                for d in 0..dim {
                    eb[d] = eo[d] - ea[d];
                }
                products.push((a as u16, index[&eb] as u16, out as u16));
            }
        }
        let factorial = exps
            .iter()
            .map(|e| {
                e.iter()
                    .map(|&k| (1..=k as u32).product::<u32>() as f64)
                    .product()
            })
            .collect();
        Layout {
            dim,
            order,
            exps,
            block_start,
            index,
            products,
            factorial,
        }
    }

    fn len(&self) -> usize {
        self.exps.len()
    }
}

fn layout(dim: usize, order: usize) -> Result<&'static Layout, JetError> {
    static TABLES: [[OnceLock<Layout>; MAX_ORDER + 1]; MAX_DIM + 1] =
        [const { [const { OnceLock::new() }; MAX_ORDER + 1] }; MAX_DIM + 1];
    if dim == 0 || dim > MAX_DIM || order > MAX_ORDER {
        return Err(JetError::Unsupported { dim, order });
    }
    Ok(TABLES[dim][order].get_or_init(|| Layout::build(dim, order)))
}

/// Number of coefficients stored by a jet of the given shape.
pub fn coeff_count(dim: usize, order: usize) -> Result<usize, JetError> {
    layout(dim, order).map(Layout::len)
}

/// Binary operations accepted by [`Jet::arith`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ArithOp {
    Add,
    Sub,
    Mul,
    Div,
}

/// Smooth univariate functions that can be composed with a jet.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Univariate {
    Sin,
    Cos,
    Tan,
    Exp,
    Log,
    Sqrt,
    Recip,
    /// `x^c` for a constant real exponent; requires `x > 0`.
    Pow(f64),
}

impl Univariate {
    pub fn name(self) -> &'static str {
        match self {
            Univariate::Sin => "sin",
            Univariate::Cos => "cos",
            Univariate::Tan => "tan",
            Univariate::Exp => "exp",
            Univariate::Log => "log",
            Univariate::Sqrt => "sqrt",
            Univariate::Recip => "recip",
            Univariate::Pow(_) => "pow",
        }
    }

    /// Derivatives `f, f', f'', f'''` at `x`.
    fn derivatives(self, x: f64) -> Result<[f64; MAX_ORDER + 1], JetError> {
        let domain = |ok: bool| {
            if ok {
                Ok(())
            } else {
                Err(JetError::Domain {
                    func: self.name(),
                    value: x,
                })
            }
        };
        Ok(match self {
            Univariate::Sin => {
                let (s, c) = x.sin_cos();
                [s, c, -s, -c]
            }
            Univariate::Cos => {
                let (s, c) = x.sin_cos();
                [c, -s, -c, s]
            }
            Univariate::Tan => {
                domain(x.cos().abs() > 1e-12)?;
                let t = x.tan();
                let sec2 = 1.0 + t * t;
                [t, sec2, 2.0 * t * sec2, sec2 * (2.0 + 6.0 * t * t)]
            }
            Univariate::Exp => {
                let e = x.exp();
                [e; 4]
            }
            Univariate::Log => {
                domain(x > 0.0)?;
                let r = 1.0 / x;
                [x.ln(), r, -r * r, 2.0 * r * r * r]
            }
            Univariate::Sqrt => {
                domain(x > 0.0)?;
                let s = x.sqrt();
                [s, 0.5 / s, -0.25 / (x * s), 0.375 / (x * x * s)]
            }
            Univariate::Recip => {
                if x.abs() <= DIV_FLOOR {
                    return Err(JetError::DivisionByZero(x));
                }
                let r = 1.0 / x;
                [r, -r * r, 2.0 * r * r * r, -6.0 * r * r * r * r]
            }
            Univariate::Pow(c) => {
                domain(x > 0.0)?;
                [
                    x.powf(c),
                    c * x.powf(c - 1.0),
                    c * (c - 1.0) * x.powf(c - 2.0),
                    c * (c - 1.0) * (c - 2.0) * x.powf(c - 3.0),
                ]
            }
        })
    }
}

/// Truncated Taylor expansion of a scalar function of `dim` variables.
///
/// The operator impls (`+`, `-`, `*` on `&Jet`) follow truncated power-series
/// semantics: combining jets of different orders yields a jet of the smaller
/// order. They panic on dimension mismatch. [`Jet::arith`] is the strict,
/// fallible form.
#[derive(Clone)]
pub struct Jet {
    layout: &'static Layout,
    coeffs: Vec<f64>,
}

impl PartialEq for Jet {
    fn eq(&self, other: &Self) -> bool {
        self.dim() == other.dim() && self.order() == other.order() && self.coeffs == other.coeffs
    }
}

impl fmt::Debug for Jet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Jet")
            .field("dim", &self.dim())
            .field("order", &self.order())
            .field("coeffs", &self.coeffs)
            .finish()
    }
}

impl Jet {
    pub fn constant(value: f64, dim: usize, order: usize) -> Result<Jet, JetError> {
        let layout = layout(dim, order)?;
        let mut coeffs = vec![0.0; layout.len()];
        coeffs[0] = value;
        Ok(Jet { layout, coeffs })
    }

    /// Jet of the coordinate function `x_index` at a point whose
    /// `index`-th coordinate is `value`.
    pub fn variable(index: usize, value: f64, dim: usize, order: usize) -> Result<Jet, JetError> {
        if index >= dim {
            return Err(JetError::IndexOutOfRange { index, dim });
        }
        let mut jet = Jet::constant(value, dim, order)?;
        if order >= 1 {
            jet.coeffs[1 + index] = 1.0;
        }
        Ok(jet)
    }

    /// Builds a jet from raw Taylor coefficients in storage order.
    pub fn from_coeffs(dim: usize, order: usize, coeffs: Vec<f64>) -> Result<Jet, JetError> {
        let layout = layout(dim, order)?;
        if coeffs.len() != layout.len() {
            return Err(JetError::ShapeMismatch {
                left: (dim, order),
                right: (dim, coeffs.len()),
            });
        }
        Ok(Jet { layout, coeffs })
    }

    fn zeros_like(layout: &'static Layout) -> Jet {
        Jet {
            layout,
            coeffs: vec![0.0; layout.len()],
        }
    }

    pub fn dim(&self) -> usize {
        self.layout.dim
    }

    pub fn order(&self) -> usize {
        self.layout.order
    }

    pub fn value(&self) -> f64 {
        self.coeffs[0]
    }

    /// Raw Taylor coefficients in storage order.
    pub fn coeffs(&self) -> &[f64] {
        &self.coeffs
    }

    /// Coefficients of one degree block.
    pub fn block(&self, degree: usize) -> &[f64] {
        let l = self.layout;
        &self.coeffs[l.block_start[degree]..l.block_start[degree + 1]]
    }

    fn slot(&self, indices: &[usize]) -> usize {
        assert!(
            indices.len() <= self.order(),
            "derivative of degree {} requested from order-{} jet",
            indices.len(),
            self.order()
        );
        let mut e = [0u8; MAX_DIM];
        for &i in indices {
            assert!(i < self.dim(), "coordinate index {i} out of range");
            e[i] += 1;
        }
        self.layout.index[&e]
    }

    /// Taylor coefficient of the monomial `x_{i₁}⋯x_{i_k}` (indices in any order).
    pub fn taylor_coeff(&self, indices: &[usize]) -> f64 {
        self.coeffs[self.slot(indices)]
    }

    /// Partial derivative `∂_{i₁}⋯∂_{i_k} f` at the expansion point.
    ///
    /// Panics if `indices.len()` exceeds the jet order.
    pub fn derivative(&self, indices: &[usize]) -> f64 {
        let s = self.slot(indices);
        self.coeffs[s] * self.layout.factorial[s]
    }

    /// First partial derivative `∂_i f`.
    pub fn d(&self, i: usize) -> f64 {
        self.derivative(&[i])
    }

    pub fn gradient(&self) -> Vec<f64> {
        (0..self.dim()).map(|i| self.d(i)).collect()
    }

    /// Jet of `∂_i f`, one order lower.
    pub fn partial(&self, i: usize) -> Result<Jet, JetError> {
        if self.order() == 0 {
            return Err(JetError::OrderExhausted);
        }
        if i >= self.dim() {
            return Err(JetError::IndexOutOfRange {
                index: i,
                dim: self.dim(),
            });
        }
        let lower = layout(self.dim(), self.order() - 1)?;
        let mut out = Jet::zeros_like(lower);
        for (slot, e) in lower.exps.iter().enumerate() {
            let mut raised = *e;
            raised[i] += 1;
            out.coeffs[slot] = f64::from(raised[i]) * self.coeffs[self.layout.index[&raised]];
        }
        Ok(out)
    }

    /// Drops every coefficient above `order`.
    pub fn truncate(&self, order: usize) -> Jet {
        if order >= self.order() {
            return self.clone();
        }
        let l = layout(self.dim(), order).expect("smaller order of a valid layout");
        Jet {
            layout: l,
            coeffs: self.coeffs[..l.len()].to_vec(),
        }
    }

    pub fn is_finite(&self) -> bool {
        self.coeffs.iter().all(|c| c.is_finite())
    }

    fn check_finite(self) -> Result<Jet, JetError> {
        if self.is_finite() {
            Ok(self)
        } else {
            Err(JetError::NonFinite)
        }
    }

    fn same_shape(&self, other: &Jet) -> Result<(), JetError> {
        if self.dim() != other.dim() || self.order() != other.order() {
            return Err(JetError::ShapeMismatch {
                left: (self.dim(), self.order()),
                right: (other.dim(), other.order()),
            });
        }
        Ok(())
    }

    /// Strict binary operation: both operands must share dimension and order.
    pub fn arith(&self, other: &Jet, op: ArithOp) -> Result<Jet, JetError> {
        self.same_shape(other)?;
        let out = match op {
            ArithOp::Add => self + other,
            ArithOp::Sub => self - other,
            ArithOp::Mul => self * other,
            ArithOp::Div => self.try_div(other)?,
        };
        out.check_finite()
    }

    /// `self / other`, computed as `self * recip(other)`.
    pub fn try_div(&self, other: &Jet) -> Result<Jet, JetError> {
        Ok(self * &other.recip()?)
    }

    pub fn recip(&self) -> Result<Jet, JetError> {
        self.apply(Univariate::Recip)
    }

    pub fn sqrt(&self) -> Result<Jet, JetError> {
        self.apply(Univariate::Sqrt)
    }

    /// Composition `fun ∘ self`.
    pub fn apply(&self, fun: Univariate) -> Result<Jet, JetError> {
        let d = fun.derivatives(self.value())?;
        // f(a₀ + â) = Σ_k f⁽ᵏ⁾(a₀)/k! · âᵏ with â nilpotent of index order+1
        let mut nil = self.clone();
        nil.coeffs[0] = 0.0;
        let mut out = Jet::constant(d[0], self.dim(), self.order())?;
        let mut power = Jet::constant(1.0, self.dim(), self.order())?;
        let mut factorial = 1.0;
        for (k, dk) in d.iter().enumerate().skip(1).take(self.order()) {
            power = &power * &nil;
            factorial *= k as f64;
            out.axpy(dk / factorial, &power);
        }
        out.check_finite()
    }

    /// Integer power by repeated multiplication (exact for polynomials).
    pub fn powi(&self, n: i32) -> Result<Jet, JetError> {
        let base = if n < 0 { self.recip()? } else { self.clone() };
        let mut out = Jet::constant(1.0, self.dim(), self.order())?;
        for _ in 0..n.unsigned_abs() {
            out = &out * &base;
        }
        out.check_finite()
    }

    /// `self += alpha * other` (same layout).
    fn axpy(&mut self, alpha: f64, other: &Jet) {
        for (a, b) in self.coeffs.iter_mut().zip(&other.coeffs) {
            *a += alpha * b;
        }
    }

    pub fn scale(&self, alpha: f64) -> Jet {
        Jet {
            layout: self.layout,
            coeffs: self.coeffs.iter().map(|c| alpha * c).collect(),
        }
    }

    pub fn add_scalar(&self, alpha: f64) -> Jet {
        let mut out = self.clone();
        out.coeffs[0] += alpha;
        out
    }

    /// Both operands truncated to the smaller order.
    fn aligned<'a>(
        a: &'a Jet,
        b: &'a Jet,
    ) -> (std::borrow::Cow<'a, Jet>, std::borrow::Cow<'a, Jet>) {
        use std::borrow::Cow;
        assert_eq!(a.dim(), b.dim(), "jet dimension mismatch");
        match a.order().cmp(&b.order()) {
            std::cmp::Ordering::Equal => (Cow::Borrowed(a), Cow::Borrowed(b)),
            std::cmp::Ordering::Less => (Cow::Borrowed(a), Cow::Owned(b.truncate(a.order()))),
            std::cmp::Ordering::Greater => (Cow::Owned(a.truncate(b.order())), Cow::Borrowed(b)),
        }
    }
}

impl Add for &Jet {
    type Output = Jet;
    fn add(self, rhs: &Jet) -> Jet {
        let (a, b) = Jet::aligned(self, rhs);
        let mut out = a.into_owned();
        out.axpy(1.0, &b);
        out
    }
}

impl Sub for &Jet {
    type Output = Jet;
    fn sub(self, rhs: &Jet) -> Jet {
        let (a, b) = Jet::aligned(self, rhs);
        let mut out = a.into_owned();
        out.axpy(-1.0, &b);
        out
    }
}

impl Mul for &Jet {
    type Output = Jet;
    fn mul(self, rhs: &Jet) -> Jet {
        let (a, b) = Jet::aligned(self, rhs);
        let mut out = Jet::zeros_like(a.layout);
        for &(i, j, k) in &a.layout.products {
            out.coeffs[k as usize] += a.coeffs[i as usize] * b.coeffs[j as usize];
        }
        out
    }
}

impl Neg for &Jet {
    type Output = Jet;
    fn neg(self) -> Jet {
        self.scale(-1.0)
    }
}

impl Mul<f64> for &Jet {
    type Output = Jet;
    fn mul(self, rhs: f64) -> Jet {
        self.scale(rhs)
    }
}

macro_rules! forward_owned {
    ($($tr:ident $m:ident),*) => {$(
        impl $tr<Jet> for Jet {
            type Output = Jet;
            fn $m(self, rhs: Jet) -> Jet { (&self).$m(&rhs) }
        }
        impl $tr<&Jet> for Jet {
            type Output = Jet;
            fn $m(self, rhs: &Jet) -> Jet { (&self).$m(rhs) }
        }
        impl $tr<Jet> for &Jet {
            type Output = Jet;
            fn $m(self, rhs: Jet) -> Jet { self.$m(&rhs) }
        }
    )*};
}
forward_owned!(Add add, Sub sub, Mul mul);

#[cfg(test)]
mod tests {
    use super::*;

    fn x(value: f64, order: usize) -> Jet {
        Jet::variable(0, value, 1, order).unwrap()
    }

    #[test]
    fn layout_sizes() {
        for dim in 1..=MAX_DIM {
            let sizes = [1, dim, dim * (dim + 1) / 2, dim * (dim + 1) * (dim + 2) / 6];
            for order in 0..=MAX_ORDER {
                let expected: usize = sizes[..=order].iter().sum();
                assert_eq!(coeff_count(dim, order).unwrap(), expected);
            }
        }
        assert!(coeff_count(0, 1).is_err());
        assert!(coeff_count(9, 1).is_err());
        assert!(coeff_count(2, 4).is_err());
    }

    #[test]
    fn blocks_are_non_decreasing_tuples() {
        let j = Jet::constant(0.0, 3, 3).unwrap();
        assert_eq!(j.block(2).len(), 6);
        assert_eq!(j.block(3).len(), 10);
        let l = j.layout;
        // degree-2 block: (0,0) (0,1) (0,2) (1,1) (1,2) (2,2)
        let expected: [[u8; 3]; 6] = [
            [2, 0, 0],
            [1, 1, 0],
            [1, 0, 1],
            [0, 2, 0],
            [0, 1, 1],
            [0, 0, 2],
        ];
        for (k, e) in expected.iter().enumerate() {
            assert_eq!(&l.exps[l.block_start[2] + k][..3], e);
        }
    }

    #[test]
    fn seed_variable() {
        assert_eq!(x(3.0, 2).coeffs(), &[3.0, 1.0, 0.0]);
        let y = Jet::variable(1, -2.0, 2, 1).unwrap();
        assert_eq!(y.value(), -2.0);
        assert_eq!(y.gradient(), vec![0.0, 1.0]);
        assert_eq!(
            Jet::variable(2, 0.0, 2, 1),
            Err(JetError::IndexOutOfRange { index: 2, dim: 2 })
        );
        let sq = &x(3.0, 2) * &x(3.0, 2);
        assert_eq!(
            (sq.value(), sq.derivative(&[0]), sq.derivative(&[0, 0])),
            (9.0, 6.0, 2.0)
        );
    }

    fn derivs_1d(j: &Jet) -> Vec<f64> {
        (0..=j.order()).map(|k| j.derivative(&vec![0; k])).collect()
    }

    #[test]
    fn arith_examples() {
        let a = x(2.0, 3);
        let sq = a.arith(&a, ArithOp::Mul).unwrap();
        assert_eq!(derivs_1d(&sq), vec![4.0, 4.0, 2.0, 0.0]);
        let back = sq.arith(&a, ArithOp::Div).unwrap();
        let d = derivs_1d(&back);
        for (got, want) in d.iter().zip([2.0, 1.0, 0.0, 0.0]) {
            assert!((got - want).abs() < 1e-15, "{d:?}");
        }
        let x1 = Jet::variable(0, 1.0, 2, 2).unwrap();
        let x2 = Jet::variable(1, 1.0, 2, 2).unwrap();
        let p = x1.arith(&x2, ArithOp::Mul).unwrap();
        assert_eq!(p.value(), 1.0);
        assert_eq!(p.gradient(), vec![1.0, 1.0]);
        assert_eq!(p.derivative(&[0, 1]), 1.0);
        assert_eq!(p.derivative(&[0, 0]), 0.0);
        assert_eq!(p.derivative(&[1, 1]), 0.0);
    }

    #[test]
    fn arith_errors() {
        let a = x(1.0, 2);
        let b = x(1.0, 3);
        assert!(matches!(
            a.arith(&b, ArithOp::Add),
            Err(JetError::ShapeMismatch { .. })
        ));
        let c = Jet::variable(0, 1.0, 2, 2).unwrap();
        assert!(matches!(
            a.arith(&c, ArithOp::Mul),
            Err(JetError::ShapeMismatch { .. })
        ));
        let zero = Jet::constant(0.0, 1, 2).unwrap();
        assert!(matches!(
            a.arith(&zero, ArithOp::Div),
            Err(JetError::DivisionByZero(_))
        ));
    }

    #[test]
    fn univariate_examples() {
        assert_eq!(
            derivs_1d(&x(0.0, 3).apply(Univariate::Exp).unwrap()),
            vec![1.0; 4]
        );
        let l = derivs_1d(&x(1.0, 3).apply(Univariate::Log).unwrap());
        for (got, want) in l.iter().zip([0.0, 1.0, -1.0, 2.0]) {
            assert!((got - want).abs() < 1e-15);
        }
        let s = x(4.0, 2).sqrt().unwrap();
        assert_eq!(s.value(), 2.0);
        assert!((s.d(0) - 0.25).abs() < 1e-15);
        // Taylor coefficient f''/2 = -1/64; the derivative itself is -1/32.
        assert!((s.taylor_coeff(&[0, 0]) + 1.0 / 64.0).abs() < 1e-15);
        assert!((s.derivative(&[0, 0]) + 1.0 / 32.0).abs() < 1e-15);
        // finite-difference oracle for the second derivative of sqrt at 4
        let h = 1e-4;
        let fd = ((4.0f64 + h).sqrt() - 2.0 * 2.0 + (4.0f64 - h).sqrt()) / (h * h);
        assert!((fd - s.derivative(&[0, 0])).abs() < 1e-6);
    }

    #[test]
    fn univariate_domain_errors() {
        let e = x(-1.0, 2).apply(Univariate::Log).unwrap_err();
        assert_eq!(
            e,
            JetError::Domain {
                func: "log",
                value: -1.0
            }
        );
        assert!(x(0.0, 2).sqrt().is_err());
        assert!(x(std::f64::consts::FRAC_PI_2, 1)
            .apply(Univariate::Tan)
            .is_err());
        assert!(x(-2.0, 1).apply(Univariate::Pow(0.5)).is_err());
    }

    #[test]
    fn partial_shifts_order() {
        // f = x1^2 x2 at (1, 2)
        let x1 = Jet::variable(0, 1.0, 2, 3).unwrap();
        let x2 = Jet::variable(1, 2.0, 2, 3).unwrap();
        let f = &(&x1 * &x1) * &x2;
        let fx = f.partial(0).unwrap();
        assert_eq!(fx.order(), 2);
        assert_eq!(fx.value(), 4.0); // 2 x1 x2
        assert_eq!(fx.derivative(&[0]), 4.0); // 2 x2
        assert_eq!(fx.derivative(&[1]), 2.0); // 2 x1
        assert_eq!(fx.derivative(&[0, 1]), 2.0);
        assert_eq!(f.derivative(&[0, 0, 1]), 2.0);
        assert_eq!(
            Jet::constant(1.0, 2, 0).unwrap().partial(0),
            Err(JetError::OrderExhausted)
        );
    }

    #[test]
    fn mixed_order_operators_truncate() {
        let a = x(1.0, 3);
        let b = x(1.0, 1);
        assert_eq!((&a * &b).order(), 1);
        assert_eq!((&a + &b).order(), 1);
    }

    #[test]
    fn powi_matches_repeated_product() {
        let a = Jet::variable(1, 0.5, 2, 3).unwrap();
        let p = a.powi(3).unwrap();
        assert_eq!(p.derivative(&[1, 1, 1]), 6.0);
        let r = a.powi(-2).unwrap();
        assert!((r.value() - 4.0).abs() < 1e-15);
        assert!((r.d(1) + 16.0).abs() < 1e-12);
    }
}
