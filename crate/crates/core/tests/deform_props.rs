use proptest::prelude::*;

use geoharm::atlas::{model, Model};
use geoharm::chi::{ChiContext, DivChiGradMethod};
use geoharm::deform::{tension_identity, ConnectionMethod, DeformedMetric};
use geoharm::geometry::{grad, laplacian, ScalarField};
use geoharm::Error;

fn quadratic(m: Model, c: [f64; 5]) -> (DeformedMetric, ChiContext) {
    let e = model(m).unwrap();
    let text = format!(
        "{}*x1 + {}*x2 + {}*x1^2 + {}*x1*x2 + {}*x2^2",
        c[0], c[1], c[2], c[3], c[4]
    );
    let f = ScalarField::parse(e.metric.chart().coords(), &text).unwrap();
    (
        DeformedMetric::new(e.metric.clone(), f.clone()).unwrap(),
        ChiContext::new(e.metric, f).unwrap(),
    )
}

fn coeffs() -> impl Strategy<Value = [f64; 5]> {
    prop::array::uniform5(-0.15f64..0.15)
}

fn scaled(a: f64, b: f64) -> f64 {
    (a - b).abs() / 1f64.max(a.abs()).max(b.abs())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn connection_two_ways_on_hyperbolic_plane(c in coeffs(), x in -1.0f64..1.0, y in 0.6f64..1.5) {
        let (d, _) = quadratic(Model::Hyperbolic(2), c);
        let p = [x, y];
        prop_assume!(d.validity(&p).is_ok());
        let a = d.deformed_christoffel(&p, ConnectionMethod::ViaConnectionFormula).unwrap();
        let b = d.deformed_christoffel(&p, ConnectionMethod::Direct).unwrap();
        for (u, v) in a.values().iter().zip(b.values()) {
            prop_assert!(scaled(*u, v) < 1e-9);
        }
    }

    #[test]
    fn tension_closed_forms_match_general_tension(c in coeffs(), x in -1.0f64..1.0, y in -1.0f64..1.0) {
        let (d, _) = quadratic(Model::SphereStereo(2), c);
        let p = [x, y];
        prop_assume!(d.validity(&p).is_ok());
        let tc = tension_identity(d.base(), &d, &p).unwrap() - d.tension_c(&p).unwrap();
        let td = tension_identity(&d, d.base(), &p).unwrap() - d.tension_d(&p).unwrap();
        prop_assert!(tc.amax() < 1e-9 && td.amax() < 1e-9);
    }

    #[test]
    fn domain_tension_is_deformed_laplacian_times_gradient(c in coeffs(), x in -1.5f64..1.5, y in -1.5f64..1.5) {
        let (d, _) = quadratic(Model::Euclidean(2), c);
        let p = [x, y];
        prop_assume!(d.validity(&p).is_ok());
        let expected = grad(d.field(), d.base(), &p).unwrap() * d.deformed_laplacian(d.field(), &p).unwrap();
        prop_assert!((d.tension_d(&p).unwrap() - expected).amax() < 1e-9);
    }

    #[test]
    fn chi_contractions(c in coeffs(), x in -1.0f64..1.0, y in 0.6f64..1.5) {
        let (d, chi) = quadratic(Model::Hyperbolic(2), c);
        let p = [x, y];
        prop_assume!(d.validity(&p).is_ok());
        let lap = laplacian(d.field(), d.base(), &p).unwrap();
        prop_assert!(scaled(chi.trace_chi(&p).unwrap(), 2.0 * lap) < 1e-10);
        let s = d.validity(&p).unwrap();
        prop_assert!(scaled(chi.chi_gradf(&p).unwrap(), s * d.residual_d(&p).unwrap()) < 1e-10);
        let a = chi.div_chi_gradf(&p, DivChiGradMethod::ClosedForm).unwrap();
        let b = chi.div_chi_gradf(&p, DivChiGradMethod::ViaDivChi).unwrap();
        prop_assert!(scaled(a, b) < 1e-8);
    }

    #[test]
    fn affine_fields_make_both_identities_harmonic(a in -0.6f64..0.6, b in -0.6f64..0.6, x in -2.0f64..2.0, y in -2.0f64..2.0) {
        prop_assume!(a * a + b * b < 0.95);
        let (d, _) = quadratic(Model::Euclidean(2), [a, b, 0.0, 0.0, 0.0]);
        let p = [x, y];
        prop_assert!(d.residual_d(&p).unwrap().abs() < 1e-15);
        prop_assert!(d.tension_c(&p).unwrap().amax() < 1e-15);
    }
}

#[test]
fn breach_of_the_standing_hypothesis_is_reported() {
    let e = model(Model::Euclidean(2)).unwrap();
    let f = ScalarField::parse(e.metric.chart().coords(), "1.2*x1").unwrap();
    let d = DeformedMetric::new(e.metric, f).unwrap();
    match d.tension_c(&[0.3, 0.4]) {
        Err(Error::Validity { point, s }) => {
            assert_eq!(point, vec![0.3, 0.4]);
            assert!((s - 1.44).abs() < 1e-12);
        }
        other => panic!("{other:?}"),
    }
    // a smaller eps brings the same field back inside the hypothesis
    let ok = d.with_eps(0.5).unwrap();
    assert!(ok.tension_c(&[0.3, 0.4]).is_ok());
}
