use nalgebra::{dmatrix, dvector, DMatrix};

use super::oracle::{agreement_residual, fd_oracle, Quantity};
use super::*;
use crate::atlas::{model, Model};

fn metric(m: Model) -> MetricField {
    model(m).unwrap().metric
}

fn field(metric: &MetricField, text: &str) -> ScalarField {
    ScalarField::parse(metric.chart().coords(), text).unwrap()
}

#[test]
fn chart_rejects_bad_names() {
    assert!(Chart::new(["x", "x"]).is_err());
    assert!(Chart::new(["sin"]).is_err());
    assert!(Chart::new(["pi"]).is_err());
    assert!(Chart::new(["1x"]).is_err());
    assert!(Chart::new(Vec::<String>::new()).is_err());
    assert!(Chart::standard(9).is_err());
    assert!(Chart::new(["r", "theta"]).is_ok());
}

#[test]
fn metric_needs_lower_triangle() {
    let chart = Chart::standard(2).unwrap();
    assert!(MetricField::parse(chart.clone(), &[vec!["1"], vec!["0"]]).is_err());
    assert!(MetricField::parse(chart, &[vec!["1"], vec!["0", "1"]]).is_ok());
}

#[test]
fn non_spd_metric_is_rejected() {
    let chart = Chart::standard(2).unwrap();
    let g = MetricField::parse(chart, &[vec!["1"], vec!["2", "1"]]).unwrap();
    assert!(matches!(
        metric_at(&g, &[0.0, 0.0]),
        Err(Error::NotPositiveDefinite { .. })
    ));
}

#[test]
fn hyperbolic_christoffel_symbols() {
    let h = metric(Model::Hyperbolic(2));
    let c = christoffel(&h, &[0.0, 2.0]).unwrap();
    // Γ¹₁₂ = −1/y, Γ²₁₁ = 1/y, Γ²₂₂ = −1/y at y = 2
    assert!((c.get(0, 0, 1) + 0.5).abs() < 1e-15);
    assert!((c.get(1, 0, 0) - 0.5).abs() < 1e-15);
    assert!((c.get(1, 1, 1) + 0.5).abs() < 1e-15);
    assert!(c.get(0, 0, 0).abs() < 1e-15);
    let fd = fd_oracle(Quantity::Christoffel, &h, None, &[0.0, 2.0], 1e-3).unwrap();
    assert!(agreement_residual(&c.values(), &fd.data, 1e-8) < 1e-6);
}

#[test]
fn outside_domain() {
    let h = metric(Model::Hyperbolic(2));
    assert!(matches!(
        christoffel(&h, &[0.0, -1.0]),
        Err(Error::OutsideDomain { .. })
    ));
}

#[test]
fn gradient_and_norm() {
    let h = metric(Model::Hyperbolic(2));
    let f = field(&h, "0.2*x1");
    let g = grad(&f, &h, &[1.0, 2.0]).unwrap();
    assert!((g - dvector![0.8, 0.0]).abs().max() < 1e-15);
    assert!((grad_norm2(&f, &h, &[1.0, 2.0]).unwrap() - 0.16).abs() < 1e-15);
}

#[test]
fn hessian_on_hyperbolic_plane() {
    let h = metric(Model::Hyperbolic(2));
    let f = field(&h, "0.2*x1");
    let hs = hess(&f, &h, &[1.0, 2.0]).unwrap();
    // Hess_ij = −Γ^1_ij · 0.2: only the mixed entries survive
    assert!((&hs - dmatrix![0.0, 0.1; 0.1, 0.0]).abs().max() < 1e-15);
    assert!(laplacian(&f, &h, &[1.0, 2.0]).unwrap().abs() < 1e-15);
    let fd = fd_oracle(Quantity::Hessian, &h, Some(&f), &[1.0, 2.0], 1e-3).unwrap();
    assert!(agreement_residual(hs.transpose().as_slice(), &fd.data, 1e-8) < 1e-6);
}

#[test]
fn laplacian_sign_convention() {
    let e = metric(Model::Euclidean(1));
    let f = field(&e, "x1^2");
    assert_eq!(laplacian(&f, &e, &[0.7]).unwrap(), 2.0);
}

#[test]
fn vertical_family_is_harmonic() {
    for n in 2..=4 {
        let h = metric(Model::Hyperbolic(n));
        let f = field(&h, &format!("1 + 0.1*x{n}^{}", n - 1));
        let mut p = vec![0.3; n];
        p[n - 1] = 1.7;
        assert!(laplacian(&f, &h, &p).unwrap().abs() < 1e-13, "n = {n}");
    }
}

#[test]
fn constant_curvature_ricci() {
    for n in 2..=4 {
        let mut p = vec![0.2; n];
        p[n - 1] = 1.5;
        let h = metric(Model::Hyperbolic(n));
        let g = metric_at(&h, &p).unwrap().value;
        let ric = ricci(&h, &p).unwrap();
        assert!(
            (ric + g * (n as f64 - 1.0)).abs().max() < 1e-12,
            "hyperbolic({n})"
        );

        let s = metric(Model::SphereStereo(n));
        let g = metric_at(&s, &p).unwrap().value;
        let ric = ricci(&s, &p).unwrap();
        assert!(
            (ric - g * (n as f64 - 1.0)).abs().max() < 1e-12,
            "sphere_stereo({n})"
        );
    }
}

#[test]
fn ricci_matches_oracle_on_generic_metric() {
    let chart = Chart::standard(2).unwrap();
    let g = MetricField::parse(
        chart,
        &[vec!["1 + 0.1*x1^2"], vec!["0.2*sin(x2)", "exp(0.3*x1*x2)"]],
    )
    .unwrap();
    let p = [0.4, -0.3];
    let ric = ricci(&g, &p).unwrap();
    let fd = fd_oracle(Quantity::Ricci, &g, None, &p, 1e-3).unwrap();
    assert!(agreement_residual(ric.transpose().as_slice(), &fd.data, 1e-8) < 1e-5);
}

#[test]
fn metric_is_parallel() {
    let s = metric(Model::SphereStereo(3));
    let nabla = cov_deriv_sym2(&MetricTensor, &s, &[0.3, -0.2, 0.5]).unwrap();
    assert!(nabla.as_slice().iter().all(|v| v.abs() < 1e-13));
    let div = div_sym2(&MetricTensor, &s, &[0.3, -0.2, 0.5]).unwrap();
    assert!(div.abs().max() < 1e-13);
}

#[test]
fn divergence_of_df_squared() {
    // div(df⊗df) = Δf·df + Hess(∇f, ·)
    let h = metric(Model::Hyperbolic(2));
    let f = field(&h, "x1^2*x2 - 0.3*x2^3");
    let p = [0.5, 1.2];
    let div = div_sym2(&DfOuter(&f), &h, &p).unwrap();
    let lm = LocalMetric::new(&h, &p, JET_ORDER).unwrap();
    let ls = lm.scalar(&f).unwrap();
    let expected = ls.df() * ls.laplacian() + ls.hess() * ls.grad();
    assert!((div - expected).abs().max() < 1e-12);
}

#[test]
fn lie_derivative_of_gradient_is_twice_hessian() {
    let s = metric(Model::SphereStereo(2));
    let f = field(&s, "x1*x2 + 0.5*sin(x1)");
    let p = [0.3, 0.8];
    let lie = lie_metric(&GradientOf(&f), &s, &p).unwrap();
    let h = hess(&f, &s, &p).unwrap();
    assert!((lie - h * 2.0).abs().max() < 1e-12);
}

#[test]
fn divergence_of_gradient_is_laplacian() {
    let h = metric(Model::Hyperbolic(3));
    let f = field(&h, "x1*x3^2 + x2^3");
    let p = [0.1, 0.4, 2.0];
    let d = div_vec(&GradientOf(&f), &h, &p).unwrap();
    assert!((d - laplacian(&f, &h, &p).unwrap()).abs() < 1e-12);
}

#[test]
fn commutation_identity() {
    for m in [
        Model::Euclidean(2),
        Model::Hyperbolic(2),
        Model::SphereStereo(2),
    ] {
        let g = metric(m);
        let f = field(&g, "0.3*x1^3 - x1*x2^2 + 0.2*x2");
        let p = [0.4, 1.1];
        let lhs = rough_laplacian_grad(&f, &g, &p).unwrap();
        let rhs = ricci_grad_plus_grad_laplacian(&f, &g, &p).unwrap();
        assert!((lhs - rhs).abs().max() < 1e-11, "{m}");
    }
}

#[test]
fn inner_product_of_metric_with_itself() {
    let s = metric(Model::SphereStereo(3));
    let p = [0.1, 0.2, 0.3];
    let g = metric_at(&s, &p).unwrap().value;
    assert!((inner_sym2(&g, &g, &s, &p).unwrap() - 3.0).abs() < 1e-13);
}

#[test]
fn adapted_frame_traces_hessian() {
    let h = metric(Model::Hyperbolic(2));
    let f = field(&h, "x1^2 + 0.3*x2^2");
    let p = [0.6, 1.4];
    let g = metric_at(&h, &p).unwrap().value;
    let gr = grad(&f, &h, &p).unwrap();
    let frame = orthonormal_frame(&h, &p, Some(&gr)).unwrap();
    assert!(frame.adapted);
    assert!(frame.orthonormality_defect(&g) < 1e-14);
    // first vector parallel to grad f
    let e0 = &frame.vectors[0];
    assert!((e0 * gr.dot(&(&g * e0)) - &gr).abs().max() < 1e-13);
    let trace = frame.trace(&hess(&f, &h, &p).unwrap());
    assert!((trace - laplacian(&f, &h, &p).unwrap()).abs() < 1e-12);
}

#[test]
fn frame_rejects_zero_seed() {
    let e = metric(Model::Euclidean(2));
    let zero = dvector![0.0, 0.0];
    assert!(matches!(
        orthonormal_frame(&e, &[0.0, 0.0], Some(&zero)),
        Err(Error::ZeroVector { .. })
    ));
    let plain = orthonormal_frame(&e, &[0.0, 0.0], None).unwrap();
    assert_eq!(plain.vectors.len(), 2);
    assert!(!plain.adapted);
}

#[test]
fn positive_definiteness() {
    assert!(is_positive_definite(&DMatrix::identity(3, 3)));
    assert!(!is_positive_definite(&dmatrix![1.0, 2.0; 2.0, 1.0]));
    assert!(!is_positive_definite(&DMatrix::zeros(2, 2)));
}
