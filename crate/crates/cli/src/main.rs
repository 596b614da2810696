use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use serde::Serialize;
use serde_json::{json, Value};

use geoharm::atlas::sample_points;
use geoharm::chi::{ChiContext, DivChiGradMethod};
use geoharm::deform::{ConnectionMethod, DeformedMetric};
use geoharm::geometry::{christoffel, grad, hess, laplacian, ricci, ScalarField, Sym2};
use geoharm::solver::{parse_grid, GridProblem, Mode, Quantity as Column, Solution};
use geoharm::verify::{check_manifold, verify_all, Report, VerifyOptions};

mod manifest;

use manifest::{Manifest, Problem};

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{0}")]
    Input(String),
    #[error(transparent)]
    Core(#[from] geoharm::Error),
    #[error("{0} check(s) failed")]
    ChecksFailed(usize),
}

impl CliError {
    fn exit_code(&self) -> u8 {
        use geoharm::Error as E;
        match self {
            CliError::ChecksFailed(_) => 1,
            CliError::Input(_) => 2,
            CliError::Core(E::Validity { .. }) => 3,
            CliError::Core(E::NotConverged { .. }) => 4,
            CliError::Core(E::SelfCheck { .. }) => 1,
            CliError::Core(_) => 2,
        }
    }
}

#[derive(Debug, Parser)]
#[command(
    name = "geoharm",
    version,
    about = "Harmonicity of identity maps under g - df⊗df"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Run the embedded verification suite.
    #[command(name = "verify-paper")]
    Verify {
        /// Replace every check tolerance.
        #[arg(long)]
        tol: Option<f64>,
        #[arg(long, env = "GEO_SEED", default_value_t = 0)]
        seed: u64,
    },
    /// Evaluate a quantity at the manifest's points.
    Eval {
        #[arg(long)]
        manifest: PathBuf,
        #[arg(long, value_enum)]
        quantity: EvalQuantity,
        /// Comma-separated coordinates; replaces the manifest points.
        #[arg(long, allow_hyphen_values = true)]
        point: Option<String>,
    },
    /// Run the cross-method identity battery at random domain points.
    Check {
        #[arg(long)]
        manifest: PathBuf,
        #[arg(long, default_value_t = 50)]
        samples: usize,
        #[arg(long, env = "GEO_SEED")]
        seed: Option<u64>,
    },
    /// Solve the Dirichlet problem on a 2-D grid and write node values as CSV.
    Solve {
        #[arg(long)]
        manifest: PathBuf,
        /// Node counts `AxB`.
        #[arg(long, default_value = "33x33")]
        grid: String,
        /// Boundary expression; defaults to the manifest's f.
        #[arg(long)]
        bc: Option<String>,
        #[arg(long, value_enum, default_value_t = SolveMode::Base)]
        mode: SolveMode,
        #[arg(long)]
        out: PathBuf,
    },
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum SolveMode {
    Base,
    Deformed,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
#[value(rename_all = "snake_case")]
enum EvalQuantity {
    S,
    Grad,
    Hess,
    Laplacian,
    Christoffel,
    Ricci,
    DeformedChristoffel,
    TensionC,
    TensionD,
    ResidualD,
    DeformedLaplacian,
    Chi,
    TraceChi,
    DivChi,
    DivChiGradf,
    BochnerResidual,
}

impl EvalQuantity {
    fn name(self) -> String {
        self.to_possible_value()
            .expect("no skipped variants")
            .get_name()
            .to_string()
    }
}

fn matrix(m: &Sym2) -> Value {
    json!((0..m.nrows())
        .map(|i| m.row(i).iter().copied().collect::<Vec<f64>>())
        .collect::<Vec<_>>())
}

fn cube(dim: usize, get: impl Fn(usize, usize, usize) -> f64) -> Value {
    json!((0..dim)
        .map(|k| (0..dim)
            .map(|i| (0..dim).map(|j| get(k, i, j)).collect::<Vec<_>>())
            .collect::<Vec<_>>())
        .collect::<Vec<_>>())
}

fn vector(v: impl IntoIterator<Item = f64>) -> Value {
    json!(v.into_iter().collect::<Vec<f64>>())
}

#[derive(Serialize)]
struct EvalRecord<'a> {
    point: &'a [f64],
    quantity: String,
    value: Value,
    s: f64,
}

fn evaluate(
    q: EvalQuantity,
    d: &DeformedMetric,
    c: &ChiContext,
    p: &[f64],
) -> Result<Value, CliError> {
    use EvalQuantity as Q;
    let (g, f) = (d.base(), d.field());
    let n = g.chart().dim();
    Ok(match q {
        Q::S => json!(d.validity(p)?),
        Q::Grad => vector(grad(f, g, p)?.iter().copied()),
        Q::Hess => matrix(&hess(f, g, p)?),
        Q::Laplacian => json!(laplacian(f, g, p)?),
        Q::Christoffel => {
            let c = christoffel(g, p)?;
            cube(n, |k, i, j| c.get(k, i, j))
        }
        Q::Ricci => matrix(&ricci(g, p)?),
        Q::DeformedChristoffel => {
            let c = d.deformed_christoffel(p, ConnectionMethod::ViaConnectionFormula)?;
            cube(n, |k, i, j| c.get(k, i, j))
        }
        Q::TensionC => vector(d.tension_c(p)?.iter().copied()),
        Q::TensionD => vector(d.tension_d(p)?.iter().copied()),
        Q::ResidualD => json!(d.residual_d(p)?),
        Q::DeformedLaplacian => json!(d.deformed_laplacian_f(p)?),
        Q::Chi => matrix(&c.chi_at(p)?),
        Q::TraceChi => json!(c.trace_chi(p)?),
        Q::DivChi => vector(c.div_chi_covector(p)?.iter().copied()),
        Q::DivChiGradf => json!(c.div_chi_gradf(p, DivChiGradMethod::ClosedForm)?),
        Q::BochnerResidual => json!(c.bochner_residual(p)?),
    })
}

fn parse_point(text: &str) -> Result<Vec<f64>, CliError> {
    text.split(',')
        .map(|t| t.trim().parse::<f64>())
        .collect::<Result<_, _>>()
        .map_err(|e| CliError::Input(format!("--point `{text}`: {e}")))
}

fn load(path: &PathBuf) -> Result<Problem, CliError> {
    Manifest::load(path)?.resolve()
}

fn print_json(v: &impl Serialize) {
    println!("{}", serde_json::to_string_pretty(v).expect("serializable"));
}

fn report_outcome(report: &Report) -> Result<(), CliError> {
    print_json(report);
    for c in report.failures() {
        eprintln!(
            "FAIL {} ({}): max residual {:e} > tolerance {:e}{}",
            c.id,
            c.anchor,
            c.max_residual,
            c.tolerance,
            c.error
                .as_deref()
                .map(|e| format!(" [{e}]"))
                .unwrap_or_default()
        );
    }
    eprintln!(
        "{}/{} checks passed",
        report.summary.passed, report.summary.total
    );
    if report.all_passed() {
        Ok(())
    } else {
        Err(CliError::ChecksFailed(report.summary.failed))
    }
}

fn cmd_eval(manifest: &PathBuf, q: EvalQuantity, point: Option<&str>) -> Result<(), CliError> {
    let pb = load(manifest)?;
    let points = match point {
        Some(text) => vec![parse_point(text)?],
        None => pb.points.clone(),
    };
    if points.is_empty() {
        return Err(CliError::Input(
            "no evaluation points: add `points` to the manifest or pass --point".into(),
        ));
    }
    let n = pb.metric.chart().dim();
    let d = DeformedMetric::new(pb.metric.clone(), pb.field.clone())?;
    let c = ChiContext::new(pb.metric.clone(), pb.field.clone())?;
    for p in &points {
        if p.len() != n {
            return Err(CliError::Input(format!(
                "point {p:?} needs {n} coordinates"
            )));
        }
        let s = d.validity(p)?;
        let value = evaluate(q, &d, &c, p)?;
        let rec = EvalRecord {
            point: p,
            quantity: q.name(),
            value,
            s,
        };
        println!("{}", serde_json::to_string(&rec).expect("serializable"));
    }
    Ok(())
}

fn cmd_check(manifest: &PathBuf, samples: usize, seed: Option<u64>) -> Result<(), CliError> {
    if samples == 0 {
        return Err(CliError::Input("--samples must be at least 1".into()));
    }
    let pb = load(manifest)?;
    let seed = seed.or(pb.seed).unwrap_or(0);
    let bx = pb.sample_box.as_ref().ok_or_else(|| {
        CliError::Input("check needs `domain.box` to sample a custom metric".into())
    })?;
    let mut points = sample_points(pb.metric.chart(), bx, samples, seed)?;
    points.extend(pb.points.iter().cloned());
    let report = check_manifold(&pb.metric, &pb.field, &points, seed, pb.tolerances.check)?;
    report_outcome(&report)
}

#[derive(Serialize)]
struct SolveSummary {
    mode: &'static str,
    grid: [usize; 2],
    converged: bool,
    iterations: usize,
    sweeps: usize,
    picard_iterations: usize,
    final_residual: f64,
    max_s: f64,
    out: Option<String>,
}

fn summary(
    mode: Mode,
    nx: usize,
    ny: usize,
    sol: &Solution,
    converged: bool,
    out: Option<String>,
) -> SolveSummary {
    let t = &sol.trace;
    SolveSummary {
        mode: if mode == Mode::Base {
            "base"
        } else {
            "deformed"
        },
        grid: [nx, ny],
        converged,
        iterations: if mode == Mode::Base {
            t.sweeps
        } else {
            t.picard_iterations
        },
        sweeps: t.sweeps,
        picard_iterations: t.picard_iterations,
        final_residual: t.final_residual,
        max_s: t.max_s,
        out,
    }
}

fn cmd_solve(
    manifest: &PathBuf,
    grid: &str,
    bc: Option<&str>,
    mode: SolveMode,
    out: &PathBuf,
) -> Result<(), CliError> {
    let pb = load(manifest)?;
    if pb.metric.chart().dim() != 2 {
        return Err(CliError::Input(
            "solve needs a 2-dimensional manifest".into(),
        ));
    }
    let (nx, ny) = parse_grid(grid)?;
    let bx = pb
        .sample_box
        .as_ref()
        .ok_or_else(|| CliError::Input("solve needs `domain.box`".into()))?;
    let boundary = match bc {
        Some(text) => ScalarField::parse(pb.metric.chart().coords(), text)
            .map_err(|e| CliError::Input(format!("--bc `{text}`: {e}")))?,
        None => pb.field.clone(),
    };
    let mode = match mode {
        SolveMode::Base => Mode::Base,
        SolveMode::Deformed => Mode::Deformed,
    };
    let problem = GridProblem {
        metric: pb.metric.clone(),
        domain: [bx[0], bx[1]],
        nx,
        ny,
        boundary,
        mode,
        tol: pb.tolerances.solver(),
    };
    let write = |sol: &Solution| -> Result<String, CliError> {
        let table = problem.sample_report(&sol.field, &[Column::F, Column::S, Column::Residual])?;
        std::fs::write(out, table.to_csv())
            .map_err(|e| CliError::Input(format!("{}: {e}", out.display())))?;
        Ok(out.display().to_string())
    };
    match mode {
        Mode::Base => match problem.solve_base() {
            Ok(sol) => {
                let path = write(&sol)?;
                print_json(&summary(mode, nx, ny, &sol, true, Some(path)));
                Ok(())
            }
            Err(geoharm::Error::NotConverged {
                iterations,
                residual,
            }) => {
                print_json(&json!({
                    "mode": "base",
                    "grid": [nx, ny],
                    "converged": false,
                    "iterations": iterations,
                    "final_residual": residual,
                    "out": null,
                }));
                Err(geoharm::Error::NotConverged {
                    iterations,
                    residual,
                }
                .into())
            }
            Err(e) => Err(e.into()),
        },
        Mode::Deformed => {
            let (sol, err) = problem.solve_deformed_traced()?;
            let path = write(&sol)?;
            print_json(&summary(mode, nx, ny, &sol, err.is_none(), Some(path)));
            match err {
                None => Ok(()),
                Some(e) => Err(e.into()),
            }
        }
    }
}

fn run(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::Verify { tol, seed } => report_outcome(&verify_all(VerifyOptions { seed, tol })),
        Command::Eval {
            manifest,
            quantity,
            point,
        } => cmd_eval(&manifest, quantity, point.as_deref()),
        Command::Check {
            manifest,
            samples,
            seed,
        } => cmd_check(&manifest, samples, seed),
        Command::Solve {
            manifest,
            grid,
            bc,
            mode,
            out,
        } => cmd_solve(&manifest, &grid, bc.as_deref(), mode, &out),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            match &e {
                CliError::ChecksFailed(_) => {}
                CliError::Core(geoharm::Error::Validity { point, s }) => {
                    eprintln!("error: validity violated at witness point {point:?} (s = {s})")
                }
                other => eprintln!("error: {other}"),
            }
            ExitCode::from(e.exit_code())
        }
    }
}
