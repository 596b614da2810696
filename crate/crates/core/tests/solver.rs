use geoharm::atlas::{model, Model};
use geoharm::geometry::ScalarField;
use geoharm::solver::{GridProblem, Mode, Quantity, Tolerances};
use geoharm::Error;

fn problem(m: Model, bc: &str, domain: [(f64, f64); 2], n: usize, mode: Mode) -> GridProblem {
    let e = model(m).unwrap();
    GridProblem {
        boundary: ScalarField::parse(e.metric.chart().coords(), bc).unwrap(),
        metric: e.metric,
        domain,
        nx: n,
        ny: n,
        mode,
        tol: Tolerances::default(),
    }
}

const UNIT: [(f64, f64); 2] = [(0.0, 1.0), (0.0, 1.0)];

#[test]
fn saddle_within_second_order_bound_at_64() {
    let sol = problem(Model::Euclidean(2), "x1^2 - x2^2", UNIT, 64, Mode::Base)
        .solve_base()
        .unwrap();
    assert!(sol.field.sup_error(|x, y| x * x - y * y) <= 2e-3);
}

#[test]
fn hyperbolic_vertical_family_recovered() {
    let sol = problem(
        Model::Hyperbolic(2),
        "1 + 0.1*x2",
        [(0.0, 1.0), (1.0, 2.0)],
        33,
        Mode::Base,
    )
    .solve_base()
    .unwrap();
    assert!(sol.field.sup_error(|_, y| 1.0 + 0.1 * y) < 1e-8);
}

#[test]
fn discrete_maximum_principle() {
    let bc = "sin(3*x1)*cos(2*x2) + x1*x2";
    let p = problem(
        Model::SphereStereo(2),
        bc,
        [(-0.5, 0.5), (-0.5, 0.5)],
        25,
        Mode::Base,
    );
    let sol = p.solve_base().unwrap();
    let f = &sol.field;
    let mut lo = f64::INFINITY;
    let mut hi = f64::NEG_INFINITY;
    for j in 0..f.ny {
        for i in 0..f.nx {
            if i == 0 || j == 0 || i == f.nx - 1 || j == f.ny - 1 {
                lo = lo.min(f.at(i, j));
                hi = hi.max(f.at(i, j));
            }
        }
    }
    for v in &f.values {
        assert!(*v >= lo - 1e-10 && *v <= hi + 1e-10);
    }
}

#[test]
fn base_report_columns_meet_tolerance() {
    let p = problem(
        Model::Hyperbolic(2),
        "0.3*x1*x2",
        [(0.0, 1.0), (1.0, 2.0)],
        17,
        Mode::Base,
    );
    let sol = p.solve_base().unwrap();
    let t = p
        .sample_report(&sol.field, &[Quantity::F, Quantity::Lap])
        .unwrap();
    assert_eq!(t.header, ["x1", "x2", "f", "lap"]);
    let lap = t.column("lap").unwrap();
    assert!(lap.iter().all(|v| v.abs() <= 1e-8));
}

#[test]
fn deformed_horizontal_example_converges() {
    let p = problem(
        Model::Hyperbolic(2),
        "0.2*x1",
        [(0.0, 1.0), (1.0, 2.0)],
        33,
        Mode::Deformed,
    );
    let sol = p.solve_deformed().unwrap();
    assert!(sol.trace.final_residual <= 1e-8);
    let t = p
        .sample_report(&sol.field, &[Quantity::S, Quantity::Residual])
        .unwrap();
    assert!(t.column("s").unwrap().iter().all(|&s| s <= 0.8 + 1e-8));
    assert!(t
        .column("residual")
        .unwrap()
        .iter()
        .all(|r| r.abs() <= 1e-8));
    // the horizontal field is itself a fixed point of the continuous problem
    assert!(sol.field.sup_error(|x, _| 0.2 * x) < 1e-3);
}

#[test]
fn deformed_solution_differs_from_base_for_curved_data() {
    let base = problem(
        Model::Euclidean(2),
        "0.3*(x1^2 - x2^2)",
        UNIT,
        17,
        Mode::Base,
    )
    .solve_base()
    .unwrap();
    let p = problem(
        Model::Euclidean(2),
        "0.3*(x1^2 - x2^2)",
        UNIT,
        17,
        Mode::Deformed,
    );
    let sol = p.solve_deformed().unwrap();
    assert!(sol.trace.picard_iterations > 1);
    let gap = base
        .field
        .values
        .iter()
        .zip(&sol.field.values)
        .map(|(a, b)| (a - b).abs())
        .fold(0.0, f64::max);
    assert!(gap > 1e-6, "gap {gap}");
    let changes = &sol.trace.picard_changes;
    assert!(changes.last().unwrap() <= &1e-11);
}

#[test]
fn steep_start_is_rejected() {
    let p = problem(Model::Euclidean(2), "0.95*x1", UNIT, 9, Mode::Deformed);
    assert!(matches!(p.solve_deformed(), Err(Error::Parameter(_))));
}

#[test]
fn validity_breach_reports_witness() {
    let mut p = problem(Model::Euclidean(2), "0.85*x1", UNIT, 9, Mode::Deformed);
    p.tol.initial_s_limit = 0.9;
    p.tol.validity_limit = 0.7;
    match p.solve_deformed() {
        Err(Error::Validity { point, s }) => {
            assert_eq!(point.len(), 2);
            assert!(s >= 0.7);
        }
        other => panic!("expected validity error, got {other:?}"),
    }
}

#[test]
fn non_convergence_is_reported() {
    let mut p = problem(Model::Euclidean(2), "x1^2 - x2^2", UNIT, 33, Mode::Base);
    p.tol.max_sweeps = 4;
    assert!(matches!(p.solve_base(), Err(Error::NotConverged { .. })));
}

#[test]
fn csv_is_deterministic() {
    let p = problem(Model::Euclidean(2), "0.5*x1*x2", UNIT, 9, Mode::Base);
    let a = p
        .sample_report(&p.solve_base().unwrap().field, &[Quantity::F])
        .unwrap()
        .to_csv();
    let b = p
        .sample_report(&p.solve_base().unwrap().field, &[Quantity::F])
        .unwrap()
        .to_csv();
    assert_eq!(a, b);
    assert!(a.starts_with("x1,x2,f\n"));
}
