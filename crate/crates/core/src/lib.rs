//! Chart-based Riemannian tensor calculus for identity maps between a metric
//! `g` and its deformation `g̃ = g − df⊗df`.
//!
//! Every derivative is computed with truncated Taylor jets ([`jet`]), so the
//! tension fields, Laplacians, curvature and the divergence of the `χ` tensor
//! are exact up to rounding. A finite-difference oracle
//! ([`geometry::oracle`]) provides an independent check of the jet path.
//!
//! Module map:
//!
//! * [`jet`]: multivariate Taylor arithmetic to total order 3.
//! * [`expr`]: the expression language used for metric components and fields.
//! * [`geometry`]: charts, metrics, Christoffel symbols, Hessian, Laplacian,
//!   Ricci, covariant divergence, Lie derivative, frames.
//! * [`deform`]: the deformed metric, both identity-map tension fields and the
//!   harmonicity predicates.
//! * [`chi`]: the symmetric tensor `χ = s·Hess f + Δf·(g − df⊗df)` and its
//!   divergence identities.
//! * [`atlas`]: built-in model spaces and example fields.
//! * [`solver`]: discrete Dirichlet-energy minimization on 2-D grids.
//! * [`verify`]: the self-verification battery behind `geoharm verify-paper`.
//!
//! Sign conventions: `Δ = div grad` (so `Δ(x²) = 2` on ℝ), and Ricci is
//! normalized so that hyperbolic space has `Ric = −(n−1)g`.

pub mod atlas;
pub mod chi;
pub mod deform;
mod error;
pub mod expr;
pub mod geometry;
pub mod jet;
pub mod solver;
pub mod verify;

pub use error::{Error, Result};

#[cfg(doctest)]
mod book {
    #[doc = include_str!("../../../book/src/introduction.md")]
    mod introduction {}
    #[doc = include_str!("../../../book/src/jets.md")]
    mod jets {}
    #[doc = include_str!("../../../book/src/expressions.md")]
    mod expressions {}
    #[doc = include_str!("../../../book/src/tensor-calculus.md")]
    mod tensor_calculus {}
    #[doc = include_str!("../../../book/src/deformation.md")]
    mod deformation {}
    #[doc = include_str!("../../../book/src/chi.md")]
    mod chi {}
    #[doc = include_str!("../../../book/src/models.md")]
    mod models {}
    #[doc = include_str!("../../../book/src/solver.md")]
    mod solver {}
    #[doc = include_str!("../../../book/src/cli.md")]
    mod cli {}
}
