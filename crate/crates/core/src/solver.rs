//! Dirichlet-energy minimization for functions on a 2-D coordinate box.
//!
//! The discrete energy is that of the bilinear (Q1) interpolant,
//! `E_h(f) = ½ Σ_cells ∫ ∇f·A ∇f`, with the coefficient `A = √det g · g⁻¹`
//! frozen per cell at its center. Its Euler–Lagrange equation `K f = 0` on
//! interior nodes is a 9-point flux-form discretization of `div(A ∇f) = 0`,
//! i.e. of `Δ_g f = 0`. Minimization runs red–black Gauss–Seidel sweeps.
//!
//! In deformed mode `A` is built from `g̃ = g − df⊗df`, with `df` the
//! gradient of the current iterate at each cell center, and the nonlinear
//! problem `Δ_g̃ f = 0` is solved by damped Picard iteration.
//!
//! Grids are given as node counts: `nx × ny` nodes including the boundary.

use std::fmt::Write as _;
use std::str::FromStr;

use nalgebra::{Matrix2, Vector2};

use crate::geometry::{MetricField, ScalarField};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    Base,
    Deformed,
}

impl FromStr for Mode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Mode> {
        match s {
            "base" => Ok(Mode::Base),
            "deformed" => Ok(Mode::Deformed),
            _ => Err(Error::Input(format!(
                "unknown solver mode `{s}` (expected base or deformed)"
            ))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Tolerances {
    /// Bound on the max-node discrete Laplacian residual.
    pub residual: f64,
    /// Bound on the max-node Picard update.
    pub picard: f64,
    pub max_sweeps: usize,
    pub max_picard: usize,
    /// Picard damping `θ ∈ (0, 1]`.
    pub theta: f64,
    /// Iterates with any `s` at or above this abort the deformed solve.
    pub validity_limit: f64,
    /// Required margin `max s ≤ initial_s_limit` for the base-harmonic start.
    pub initial_s_limit: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Tolerances {
            residual: 1e-8,
            picard: 1e-11,
            max_sweeps: 50_000,
            max_picard: 500,
            theta: 0.5,
            validity_limit: 0.999,
            initial_s_limit: 0.8,
        }
    }
}

/// A Dirichlet problem on a uniform grid.
#[derive(Debug, Clone)]
pub struct GridProblem {
    pub metric: MetricField,
    /// `[(x1_min, x1_max), (x2_min, x2_max)]`.
    pub domain: [(f64, f64); 2],
    pub nx: usize,
    pub ny: usize,
    pub boundary: ScalarField,
    pub mode: Mode,
    pub tol: Tolerances,
}

/// Node values on the grid, row-major (`x1` fastest).
#[derive(Debug, Clone, PartialEq)]
pub struct GridField {
    pub nx: usize,
    pub ny: usize,
    pub origin: [f64; 2],
    pub spacing: [f64; 2],
    pub values: Vec<f64>,
}

impl GridField {
    pub fn index(&self, i: usize, j: usize) -> usize {
        j * self.nx + i
    }

    pub fn node(&self, i: usize, j: usize) -> [f64; 2] {
        [
            self.origin[0] + i as f64 * self.spacing[0],
            self.origin[1] + j as f64 * self.spacing[1],
        ]
    }

    pub fn at(&self, i: usize, j: usize) -> f64 {
        self.values[self.index(i, j)]
    }

    fn is_boundary(&self, i: usize, j: usize) -> bool {
        i == 0 || j == 0 || i + 1 == self.nx || j + 1 == self.ny
    }

    /// Gradient of the bilinear interpolant at the center of cell `(i, j)`.
    pub fn cell_gradient(&self, i: usize, j: usize) -> Vector2<f64> {
        let (f00, f10, f01, f11) = (
            self.at(i, j),
            self.at(i + 1, j),
            self.at(i, j + 1),
            self.at(i + 1, j + 1),
        );
        Vector2::new(
            ((f10 - f00) + (f11 - f01)) / (2.0 * self.spacing[0]),
            ((f01 - f00) + (f11 - f10)) / (2.0 * self.spacing[1]),
        )
    }

    /// Bilinear interpolant at `x`, clamped to the grid.
    pub fn interpolate(&self, x: [f64; 2]) -> f64 {
        let locate = |d: usize, n: usize| {
            let t = ((x[d] - self.origin[d]) / self.spacing[d]).clamp(0.0, (n - 1) as f64);
            let c = (t.floor() as usize).min(n - 2);
            (c, t - c as f64)
        };
        let (i, u) = locate(0, self.nx);
        let (j, v) = locate(1, self.ny);
        (1.0 - u) * (1.0 - v) * self.at(i, j)
            + u * (1.0 - v) * self.at(i + 1, j)
            + (1.0 - u) * v * self.at(i, j + 1)
            + u * v * self.at(i + 1, j + 1)
    }

    /// `max |f_h − exact|` over nodes, edge midpoints and cell centers.
    pub fn sup_error(&self, exact: impl Fn(f64, f64) -> f64) -> f64 {
        let mut worst: f64 = 0.0;
        for j in 0..(2 * self.ny - 1) {
            for i in 0..(2 * self.nx - 1) {
                let x = [
                    self.origin[0] + 0.5 * i as f64 * self.spacing[0],
                    self.origin[1] + 0.5 * j as f64 * self.spacing[1],
                ];
                worst = worst.max((self.interpolate(x) - exact(x[0], x[1])).abs());
            }
        }
        worst
    }
}

/// Convergence record of a solve.
#[derive(Debug, Clone, PartialEq)]
pub struct SolveTrace {
    /// Gauss–Seidel sweeps over all linear solves.
    pub sweeps: usize,
    /// Picard steps (0 in base mode).
    pub picard_iterations: usize,
    /// Max-node update of each Picard step.
    pub picard_changes: Vec<f64>,
    /// Max-node `|Δ_h f|` of the returned field (w.r.t. `g̃` in deformed mode).
    pub final_residual: f64,
    /// Max over nodes of `s = ‖grad f‖²` (base metric).
    pub max_s: f64,
    /// Energy at each residual check of the base solve.
    pub energy: Vec<f64>,
}

#[derive(Debug, Clone)]
pub struct Solution {
    pub field: GridField,
    pub trace: SolveTrace,
}

/// Assembled 9-point operator. `stencil[n][k]` couples node `n` to neighbor
/// `(di, dj) = (k % 3 − 1, k / 3 − 1)`.
struct Operator {
    stencil: Vec<[f64; 9]>,
    /// Per-node `hx·hy·w` with `w` the mean `√det` of adjacent cells.
    mass: Vec<f64>,
}

/// Pointwise 2×2 metric values at cell centers and nodes.
struct MetricSamples {
    cells: Vec<Matrix2<f64>>,
    nodes: Vec<Matrix2<f64>>,
}

const GAUSS: [f64; 2] = [0.211_324_865_405_187_1, 0.788_675_134_594_812_9];

impl GridProblem {
    fn check(&self) -> Result<()> {
        if self.metric.chart().dim() != 2 || self.boundary.dim() != 2 {
            return Err(Error::Input("the grid solver needs a 2-D chart".into()));
        }
        if self.nx < 3 || self.ny < 3 {
            return Err(Error::Input(format!(
                "grid {}x{} needs at least 3 nodes per axis",
                self.nx, self.ny
            )));
        }
        if self
            .domain
            .iter()
            .any(|(lo, hi)| !(lo < hi && (hi - lo).is_finite()))
        {
            return Err(Error::Input(format!("bad solver box {:?}", self.domain)));
        }
        if !(self.tol.theta > 0.0 && self.tol.theta <= 1.0) {
            return Err(Error::Parameter(format!(
                "damping theta = {} outside (0, 1]",
                self.tol.theta
            )));
        }
        Ok(())
    }

    fn empty_field(&self) -> GridField {
        let (ax, ay) = (self.domain[0], self.domain[1]);
        GridField {
            nx: self.nx,
            ny: self.ny,
            origin: [ax.0, ay.0],
            spacing: [
                (ax.1 - ax.0) / (self.nx - 1) as f64,
                (ay.1 - ay.0) / (self.ny - 1) as f64,
            ],
            values: vec![0.0; self.nx * self.ny],
        }
    }

    /// Boundary nodes set from the boundary expression, interior zero.
    fn initial_field(&self) -> Result<GridField> {
        let mut f = self.empty_field();
        for j in 0..self.ny {
            for i in 0..self.nx {
                if f.is_boundary(i, j) {
                    let v = self.boundary.value(&f.node(i, j))?;
                    if !v.is_finite() {
                        return Err(Error::Input(format!(
                            "boundary data not finite at {:?}",
                            f.node(i, j)
                        )));
                    }
                    let k = f.index(i, j);
                    f.values[k] = v;
                }
            }
        }
        Ok(f)
    }

    fn metric_at(&self, x: [f64; 2]) -> Result<Matrix2<f64>> {
        let c = |i, j| self.metric.component(i, j, &x);
        let g = Matrix2::new(c(0, 0)?, c(1, 0)?, c(1, 0)?, c(1, 1)?);
        if !(g[(0, 0)] > 0.0 && g.determinant() > 0.0) {
            return Err(Error::NotPositiveDefinite { point: x.to_vec() });
        }
        Ok(g)
    }

    fn sample_metric(&self, f: &GridField) -> Result<MetricSamples> {
        let mut cells = Vec::with_capacity((self.nx - 1) * (self.ny - 1));
        for j in 0..self.ny - 1 {
            for i in 0..self.nx - 1 {
                let c = f.node(i, j);
                let x = [c[0] + 0.5 * f.spacing[0], c[1] + 0.5 * f.spacing[1]];
                self.metric.chart().check(&x)?;
                cells.push(self.metric_at(x)?);
            }
        }
        let mut nodes = Vec::with_capacity(self.nx * self.ny);
        for j in 0..self.ny {
            for i in 0..self.nx {
                nodes.push(self.metric_at(f.node(i, j))?);
            }
        }
        Ok(MetricSamples { cells, nodes })
    }

    /// Per-cell `g` or `g̃` (deformed with the current iterate).
    fn cell_metrics(
        &self,
        ms: &MetricSamples,
        f: &GridField,
        deformed: bool,
    ) -> Result<Vec<Matrix2<f64>>> {
        let mut out = Vec::with_capacity(ms.cells.len());
        for j in 0..self.ny - 1 {
            for i in 0..self.nx - 1 {
                let g = ms.cells[j * (self.nx - 1) + i];
                if !deformed {
                    out.push(g);
                    continue;
                }
                let d = f.cell_gradient(i, j);
                let gt = g - d * d.transpose();
                if !(gt[(0, 0)] > 0.0 && gt.determinant() > 0.0) {
                    let c = f.node(i, j);
                    let s = d.dot(&(g.try_inverse().unwrap_or_else(Matrix2::zeros) * d));
                    return Err(Error::Validity {
                        point: vec![c[0] + 0.5 * f.spacing[0], c[1] + 0.5 * f.spacing[1]],
                        s,
                    });
                }
                out.push(gt);
            }
        }
        Ok(out)
    }

    fn assemble(&self, f: &GridField, metrics: &[Matrix2<f64>]) -> Operator {
        let (nx, ny) = (self.nx, self.ny);
        let [hx, hy] = f.spacing;
        let mut stencil = vec![[0.0; 9]; nx * ny];
        let mut weight = vec![0.0; nx * ny];
        let mut count = vec![0.0; nx * ny];
        // local node a = (ai, aj) in {0,1}²
        let corners = [(0usize, 0usize), (1, 0), (0, 1), (1, 1)];
        for j in 0..ny - 1 {
            for i in 0..nx - 1 {
                let g = metrics[j * (nx - 1) + i];
                let det = g.determinant();
                let a = g.try_inverse().expect("checked SPD") * det.sqrt();
                let mut ke = [[0.0; 4]; 4];
                for &u in &GAUSS {
                    for &v in &GAUSS {
                        let grads: Vec<Vector2<f64>> = corners
                            .iter()
                            .map(|&(ai, aj)| {
                                let (su, sv) = (
                                    if ai == 1 { 1.0 } else { -1.0 },
                                    if aj == 1 { 1.0 } else { -1.0 },
                                );
                                let (pu, pv) = (
                                    if ai == 1 { u } else { 1.0 - u },
                                    if aj == 1 { v } else { 1.0 - v },
                                );
                                Vector2::new(su * pv / hx, sv * pu / hy)
                            })
                            .collect();
                        for (ra, ga) in grads.iter().enumerate() {
                            for (rb, gb) in grads.iter().enumerate() {
                                ke[ra][rb] += 0.25 * hx * hy * ga.dot(&(a * gb));
                            }
                        }
                    }
                }
                for (ra, &(ai, aj)) in corners.iter().enumerate() {
                    let n = (j + aj) * nx + (i + ai);
                    weight[n] += det.sqrt();
                    count[n] += 1.0;
                    for (rb, &(bi, bj)) in corners.iter().enumerate() {
                        let k = (1 + bj - aj) * 3 + (1 + bi - ai);
                        stencil[n][k] += ke[ra][rb];
                    }
                }
            }
        }
        let mass = weight
            .iter()
            .zip(&count)
            .map(|(w, c)| hx * hy * w / c)
            .collect();
        Operator { stencil, mass }
    }

    fn apply_row(op: &Operator, f: &GridField, i: usize, j: usize) -> f64 {
        let row = &op.stencil[f.index(i, j)];
        let mut acc = 0.0;
        for dj in 0..3 {
            for di in 0..3 {
                let c = row[dj * 3 + di];
                if c != 0.0 {
                    acc += c * f.at(i + di - 1, j + dj - 1);
                }
            }
        }
        acc
    }

    /// `max |Δ_h f|` over interior nodes.
    fn residual(op: &Operator, f: &GridField) -> f64 {
        let mut worst: f64 = 0.0;
        for j in 1..f.ny - 1 {
            for i in 1..f.nx - 1 {
                worst = worst.max((Self::apply_row(op, f, i, j) / op.mass[f.index(i, j)]).abs());
            }
        }
        worst
    }

    fn energy(op: &Operator, f: &GridField) -> f64 {
        let mut e = 0.0;
        for j in 0..f.ny {
            for i in 0..f.nx {
                let row = &op.stencil[f.index(i, j)];
                for dj in 0..3 {
                    for di in 0..3 {
                        let (ii, jj) = (i + di, j + dj);
                        if ii >= 1 && jj >= 1 && ii <= f.nx && jj <= f.ny {
                            e += 0.5 * f.at(i, j) * row[dj * 3 + di] * f.at(ii - 1, jj - 1);
                        }
                    }
                }
            }
        }
        e
    }

    fn sweep(op: &Operator, f: &mut GridField) {
        for color in 0..2 {
            for j in 1..f.ny - 1 {
                let start = 1 + (j + 1 + color) % 2;
                for i in (start..f.nx - 1).step_by(2) {
                    let n = f.index(i, j);
                    let diag = op.stencil[n][4];
                    let off = Self::apply_row(op, f, i, j) - diag * f.values[n];
                    f.values[n] = -off / diag;
                }
            }
        }
    }

    /// Gauss–Seidel until the residual reaches `target`, or stagnates below
    /// `tol.residual` at the rounding floor.
    fn relax(
        &self,
        op: &Operator,
        f: &mut GridField,
        target: f64,
        trace: &mut SolveTrace,
        record_energy: bool,
    ) -> Result<f64> {
        const CHECK: usize = 16;
        let mut previous = f64::INFINITY;
        let mut sweeps = 0;
        loop {
            let r = Self::residual(op, f);
            if record_energy {
                trace.energy.push(Self::energy(op, f));
            }
            if r <= target || (r <= self.tol.residual && r >= previous) {
                return Ok(r);
            }
            if sweeps >= self.tol.max_sweeps {
                return Err(Error::NotConverged {
                    iterations: sweeps,
                    residual: r,
                });
            }
            previous = r;
            for _ in 0..CHECK {
                Self::sweep(op, f);
            }
            sweeps += CHECK;
            trace.sweeps += CHECK;
        }
    }

    fn max_s(&self, ms: &MetricSamples, f: &GridField) -> Vec<f64> {
        node_s(self, ms, f)
    }

    pub fn solve_base(&self) -> Result<Solution> {
        self.check()?;
        let mut f = self.initial_field()?;
        let ms = self.sample_metric(&f)?;
        let op = self.assemble(&f, &self.cell_metrics(&ms, &f, false)?);
        let mut trace = SolveTrace {
            sweeps: 0,
            picard_iterations: 0,
            picard_changes: Vec::new(),
            final_residual: 0.0,
            max_s: 0.0,
            energy: Vec::new(),
        };
        trace.final_residual = self.relax(&op, &mut f, self.tol.residual, &mut trace, true)?;
        trace.max_s = self.max_s(&ms, &f).into_iter().fold(0.0, f64::max);
        Ok(Solution { field: f, trace })
    }

    /// Picard iteration on `Δ_g̃ f = 0` from the base-harmonic start.
    ///
    /// On [`Error::NotConverged`] the partial trace is lost; use
    /// [`GridProblem::solve_deformed_traced`] to keep it.
    pub fn solve_deformed(&self) -> Result<Solution> {
        let (sol, err) = self.solve_deformed_traced()?;
        match err {
            Some(e) => Err(e),
            None => Ok(sol),
        }
    }

    /// Like [`GridProblem::solve_deformed`], but returns the last iterate
    /// together with a non-convergence error instead of discarding it.
    pub fn solve_deformed_traced(&self) -> Result<(Solution, Option<Error>)> {
        self.check()?;
        let inner = self.tol.residual * 1e-3;
        let mut f = self.initial_field()?;
        let ms = self.sample_metric(&f)?;
        let mut trace = SolveTrace {
            sweeps: 0,
            picard_iterations: 0,
            picard_changes: Vec::new(),
            final_residual: 0.0,
            max_s: 0.0,
            energy: Vec::new(),
        };
        let op = self.assemble(&f, &self.cell_metrics(&ms, &f, false)?);
        self.relax(&op, &mut f, inner, &mut trace, false)?;
        let s0 = cell_s_max(self, &ms, &f).max(self.max_s(&ms, &f).into_iter().fold(0.0, f64::max));
        if s0 > self.tol.initial_s_limit {
            return Err(Error::Parameter(format!(
                "base-harmonic start has max s = {s0:.6} > {}; scale the boundary data down",
                self.tol.initial_s_limit
            )));
        }

        let theta = self.tol.theta;
        loop {
            let op = self.assemble(&f, &self.cell_metrics(&ms, &f, true)?);
            let mut next = f.clone();
            if let Err(e) = self.relax(&op, &mut next, inner, &mut trace, false) {
                trace.final_residual = Self::residual(&op, &f);
                return Ok((Solution { field: f, trace }, Some(e)));
            }
            let mut change: f64 = 0.0;
            for (a, b) in f.values.iter_mut().zip(&next.values) {
                let updated = theta * b + (1.0 - theta) * *a;
                change = change.max((updated - *a).abs());
                *a = updated;
            }
            trace.picard_iterations += 1;
            trace.picard_changes.push(change);
            self.guard_validity(&ms, &f)?;
            if change <= self.tol.picard {
                break;
            }
            if !change.is_finite() || trace.picard_iterations >= self.tol.max_picard {
                let op = self.assemble(&f, &self.cell_metrics(&ms, &f, true)?);
                trace.final_residual = Self::residual(&op, &f);
                let e = Error::NotConverged {
                    iterations: trace.picard_iterations,
                    residual: trace.final_residual,
                };
                return Ok((Solution { field: f, trace }, Some(e)));
            }
        }
        let op = self.assemble(&f, &self.cell_metrics(&ms, &f, true)?);
        trace.final_residual = Self::residual(&op, &f);
        trace.max_s = self.max_s(&ms, &f).into_iter().fold(0.0, f64::max);
        let err = (trace.final_residual > self.tol.residual).then(|| Error::NotConverged {
            iterations: trace.picard_iterations,
            residual: trace.final_residual,
        });
        Ok((Solution { field: f, trace }, err))
    }

    pub fn solve(&self) -> Result<Solution> {
        match self.mode {
            Mode::Base => self.solve_base(),
            Mode::Deformed => self.solve_deformed(),
        }
    }

    fn guard_validity(&self, ms: &MetricSamples, f: &GridField) -> Result<()> {
        for j in 0..self.ny - 1 {
            for i in 0..self.nx - 1 {
                let g = ms.cells[j * (self.nx - 1) + i];
                let d = f.cell_gradient(i, j);
                let s = d.dot(&(g.try_inverse().expect("checked SPD") * d));
                if !(s < self.tol.validity_limit) {
                    let c = f.node(i, j);
                    return Err(Error::Validity {
                        point: vec![c[0] + 0.5 * f.spacing[0], c[1] + 0.5 * f.spacing[1]],
                        s,
                    });
                }
            }
        }
        Ok(())
    }

    /// Per-node report columns.
    pub fn sample_report(&self, field: &GridField, quantities: &[Quantity]) -> Result<Table> {
        let ms = self.sample_metric(field)?;
        let base_op = self.assemble(field, &self.cell_metrics(&ms, field, false)?);
        let need_deformed = quantities.iter().any(|q| {
            matches!(q, Quantity::LapDeformed)
                || (matches!(q, Quantity::Residual) && self.mode == Mode::Deformed)
        });
        let deformed_op = if need_deformed {
            Some(self.assemble(field, &self.cell_metrics(&ms, field, true)?))
        } else {
            None
        };
        let s = self.max_s(&ms, field);
        let lap_of = |op: &Operator, i: usize, j: usize| {
            if field.is_boundary(i, j) {
                0.0
            } else {
                Self::apply_row(op, field, i, j) / op.mass[field.index(i, j)]
            }
        };
        let coords = self.metric.chart().coords();
        let mut header: Vec<String> = coords.to_vec();
        header.extend(quantities.iter().map(|q| q.name().to_string()));
        let mut rows = Vec::with_capacity(field.nx * field.ny);
        for j in 0..field.ny {
            for i in 0..field.nx {
                let x = field.node(i, j);
                let mut row = vec![x[0], x[1]];
                for q in quantities {
                    row.push(match q {
                        Quantity::F => field.at(i, j),
                        Quantity::S => s[field.index(i, j)],
                        Quantity::Lap => lap_of(&base_op, i, j),
                        Quantity::LapDeformed => {
                            lap_of(deformed_op.as_ref().expect("assembled"), i, j)
                        }
                        Quantity::Residual => match self.mode {
                            Mode::Base => lap_of(&base_op, i, j),
                            Mode::Deformed => {
                                lap_of(deformed_op.as_ref().expect("assembled"), i, j)
                            }
                        },
                    });
                }
                rows.push(row);
            }
        }
        Ok(Table { header, rows })
    }
}

/// Node `s`: mean over adjacent cells of `g(grad f, grad f)` with the cell
/// gradient and the node metric.
fn node_s(p: &GridProblem, ms: &MetricSamples, f: &GridField) -> Vec<f64> {
    let mut acc = vec![0.0; p.nx * p.ny];
    let mut count = vec![0.0; p.nx * p.ny];
    for j in 0..p.ny - 1 {
        for i in 0..p.nx - 1 {
            let d = f.cell_gradient(i, j);
            for (ai, aj) in [(0, 0), (1, 0), (0, 1), (1, 1)] {
                let n = f.index(i + ai, j + aj);
                let ginv = ms.nodes[n].try_inverse().expect("checked SPD");
                acc[n] += d.dot(&(ginv * d));
                count[n] += 1.0;
            }
        }
    }
    acc.iter().zip(&count).map(|(a, c)| a / c).collect()
}

fn cell_s_max(p: &GridProblem, ms: &MetricSamples, f: &GridField) -> f64 {
    let mut worst: f64 = 0.0;
    for j in 0..p.ny - 1 {
        for i in 0..p.nx - 1 {
            let d = f.cell_gradient(i, j);
            let ginv = ms.cells[j * (p.nx - 1) + i]
                .try_inverse()
                .expect("checked SPD");
            worst = worst.max(d.dot(&(ginv * d)));
        }
    }
    worst
}

/// Columns available to [`GridProblem::sample_report`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Quantity {
    /// Node value.
    F,
    /// `‖grad f‖²` in the base metric.
    S,
    /// Discrete `Δ_g f` (0 on boundary nodes).
    Lap,
    /// Discrete `Δ_g̃ f` (0 on boundary nodes).
    LapDeformed,
    /// Discrete residual of the problem's own mode.
    Residual,
}

impl Quantity {
    pub fn name(self) -> &'static str {
        match self {
            Quantity::F => "f",
            Quantity::S => "s",
            Quantity::Lap => "lap",
            Quantity::LapDeformed => "lap_deformed",
            Quantity::Residual => "residual",
        }
    }
}

impl FromStr for Quantity {
    type Err = Error;

    fn from_str(s: &str) -> Result<Quantity> {
        [
            Quantity::F,
            Quantity::S,
            Quantity::Lap,
            Quantity::LapDeformed,
            Quantity::Residual,
        ]
        .into_iter()
        .find(|q| q.name() == s)
        .ok_or_else(|| Error::Input(format!("unknown report quantity `{s}`")))
    }
}

/// Tabular report, one row per node in row-major order.
#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    pub header: Vec<String>,
    pub rows: Vec<Vec<f64>>,
}

impl Table {
    pub fn column(&self, name: &str) -> Option<Vec<f64>> {
        let k = self.header.iter().position(|h| h == name)?;
        Some(self.rows.iter().map(|r| r[k]).collect())
    }

    /// CSV with a header row and `{:e}`-style round-trip numbers.
    pub fn to_csv(&self) -> String {
        let mut out = self.header.join(",");
        out.push('\n');
        for row in &self.rows {
            for (k, v) in row.iter().enumerate() {
                if k > 0 {
                    out.push(',');
                }
                let _ = write!(out, "{v:.16e}");
            }
            out.push('\n');
        }
        out
    }
}

/// Parses `"AxB"` node counts.
pub fn parse_grid(text: &str) -> Result<(usize, usize)> {
    let bad = || Error::Input(format!("grid `{text}` is not of the form AxB"));
    let (a, b) = text.split_once(['x', 'X', '×']).ok_or_else(bad)?;
    Ok((
        a.trim().parse().map_err(|_| bad())?,
        b.trim().parse().map_err(|_| bad())?,
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::atlas::{model, Model};

    fn problem(m: Model, domain: [(f64, f64); 2], n: usize, bc: &str, mode: Mode) -> GridProblem {
        let e = model(m).unwrap();
        let boundary = ScalarField::parse(e.metric.chart().coords(), bc).unwrap();
        GridProblem {
            metric: e.metric,
            domain,
            nx: n,
            ny: n,
            boundary,
            mode,
            tol: Tolerances::default(),
        }
    }

    #[test]
    fn bilinear_data_is_reproduced() {
        let p = problem(
            Model::Euclidean(2),
            [(0.0, 1.0), (0.0, 1.0)],
            17,
            "x1*x2",
            Mode::Base,
        );
        let sol = p.solve_base().unwrap();
        assert!(sol.trace.final_residual <= 1e-8);
        let err = sol.field.sup_error(|x, y| x * y);
        assert!(err < 1e-8, "{err}");
    }

    #[test]
    fn energy_decreases() {
        let p = problem(
            Model::Euclidean(2),
            [(0.0, 1.0), (0.0, 1.0)],
            9,
            "x1^2 - x2^2",
            Mode::Base,
        );
        let sol = p.solve_base().unwrap();
        let e = &sol.trace.energy;
        assert!(e.len() > 2);
        assert!(e.windows(2).all(|w| w[1] <= w[0] + 1e-14), "{e:?}");
    }

    #[test]
    fn report_shape() {
        let p = problem(
            Model::Euclidean(2),
            [(0.0, 1.0), (0.0, 1.0)],
            8,
            "x1",
            Mode::Base,
        );
        let sol = p.solve_base().unwrap();
        let t = p
            .sample_report(&sol.field, &[Quantity::F, Quantity::S])
            .unwrap();
        assert_eq!(t.rows.len(), 64);
        assert!(t.to_csv().starts_with("x1,x2,f,s\n"));
    }

    #[test]
    fn grid_parsing() {
        assert_eq!(parse_grid("33x17").unwrap(), (33, 17));
        assert!(parse_grid("33").is_err());
        assert!(parse_grid("ax3").is_err());
    }

    #[test]
    fn affine_deformed_fixed_point() {
        let p = problem(
            Model::Euclidean(2),
            [(0.0, 1.0), (0.0, 1.0)],
            17,
            "0.6*x1",
            Mode::Deformed,
        );
        let sol = p.solve_deformed().unwrap();
        assert_eq!(sol.trace.picard_iterations, 1);
        assert!(sol.trace.picard_changes[0] <= 1e-12);
        assert!((sol.trace.max_s - 0.36).abs() < 1e-9);
    }
}
