//! Reproduction harness: relative error of the direct solver on the built-in
//! problem, operation-count scaling, and the iterative baseline.

mod report;
pub mod svg;

use std::cmp::Ordering;
use std::fmt;
use std::str::FromStr;

pub use report::{
    emit_csv, emit_svg, emit_table1_csv, emit_table1_svg, scaling_chart, scaling_csv, table1_chart,
    table1_csv,
};

pub fn svg_for_scaling(report: &ScalingReport) -> String {
    scaling_chart(report).render()
}

pub fn svg_for_table1(rows: &[ErrorRow]) -> String {
    table1_chart(rows).render()
}

use crate::applyplan::{apply, build_plan, predict_direct_costs, CostPrediction, OpCounters};
use crate::dense::{apply_dense, invert, DenseMatrix};
use crate::error::{Error, Result};
use crate::grid::{analytic_solution, assemble_rhs, build_uniform, Grid2D, SourceField};
use crate::iterative::{gauss_seidel_solve, predict_iterations, predict_iterative_total};
use crate::quant::quantize;

/// How the inverse is rounded before it is applied.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Rounding {
    Digits(u32),
    Unrounded,
}

impl Ord for Rounding {
    fn cmp(&self, other: &Self) -> Ordering {
        match (self, other) {
            (Rounding::Digits(a), Rounding::Digits(b)) => a.cmp(b),
            (Rounding::Digits(_), Rounding::Unrounded) => Ordering::Less,
            (Rounding::Unrounded, Rounding::Digits(_)) => Ordering::Greater,
            (Rounding::Unrounded, Rounding::Unrounded) => Ordering::Equal,
        }
    }
}

impl PartialOrd for Rounding {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl fmt::Display for Rounding {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Rounding::Digits(m) => write!(f, "{m}"),
            Rounding::Unrounded => f.write_str("none"),
        }
    }
}

impl FromStr for Rounding {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        if s == "none" {
            return Ok(Rounding::Unrounded);
        }
        s.parse()
            .map(Rounding::Digits)
            .map_err(|_| Error::InvalidArgument(format!("expected digits or \"none\", got {s:?}")))
    }
}

/// Grid sides used by default (n = 81 needs an explicit opt-in).
pub const DEFAULT_SIDES: [usize; 4] = [5, 11, 21, 41];
pub const LARGE_SIDE: usize = 81;

pub const TABLE1_ROUNDINGS: [Rounding; 6] = [
    Rounding::Digits(1),
    Rounding::Digits(2),
    Rounding::Digits(3),
    Rounding::Digits(5),
    Rounding::Digits(6),
    Rounding::Unrounded,
];

/// Published relative errors for sides 5, 11, 21, 41, 81.
pub const PUBLISHED_SIDES: [usize; 5] = [5, 11, 21, 41, 81];
pub const PUBLISHED_ERRORS: [(Rounding, [f64; 5]); 5] = [
    (
        Rounding::Digits(1),
        [0.0569, 0.0352, 0.0292, 0.02843, 0.02829],
    ),
    (
        Rounding::Digits(2),
        [0.0658, 0.0112, 0.0038, 0.00276, 0.00277],
    ),
    (
        Rounding::Digits(3),
        [0.0658, 0.0105, 0.0026, 0.00074, 0.00027],
    ),
    (
        Rounding::Digits(5),
        [0.0658, 0.0107, 0.0026, 0.00065, 0.00016],
    ),
    (
        Rounding::Unrounded,
        [0.0658, 0.0107, 0.0026, 0.00065, 0.00016],
    ),
];

pub fn published_error(n: usize, rounding: Rounding) -> Option<f64> {
    let col = PUBLISHED_SIDES.iter().position(|&s| s == n)?;
    PUBLISHED_ERRORS
        .iter()
        .find(|(r, _)| *r == rounding)
        .map(|(_, row)| row[col])
}

/// `max |u_num - u_exact| / max |u_exact|` over all grid points.
pub fn relative_error(numerical: &[f64], grid: &Grid2D) -> Result<f64> {
    let n = grid.n_points();
    if numerical.len() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            actual: numerical.len(),
        });
    }
    let exact = grid.sample(analytic_solution);
    let peak = exact.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    if peak == 0.0 {
        return Err(Error::DegenerateNormalization);
    }
    let worst = numerical
        .iter()
        .zip(&exact)
        .fold(0.0f64, |m, (a, b)| m.max((a - b).abs()));
    Ok(worst / peak)
}

/// Supplies the inverse operator for a grid, e.g. from a cache.
pub trait InverseSource {
    fn inverse(&mut self, grid: &Grid2D) -> Result<DenseMatrix>;
}

impl<F> InverseSource for F
where
    F: FnMut(&Grid2D) -> Result<DenseMatrix>,
{
    fn inverse(&mut self, grid: &Grid2D) -> Result<DenseMatrix> {
        self(grid)
    }
}

/// Computes every inverse from scratch.
#[derive(Debug, Default, Clone, Copy)]
pub struct FreshInverse;

impl InverseSource for FreshInverse {
    fn inverse(&mut self, grid: &Grid2D) -> Result<DenseMatrix> {
        invert(build_uniform(grid)?)
    }
}

/// Applies `inverse` to `rhs`, rounding it first unless `Unrounded`.
/// Rounded inverses go through the shared-product plan; the unrounded one
/// through the conventional dense product.
pub fn solve_with_inverse(
    inverse: &DenseMatrix,
    rounding: Rounding,
    rhs: &[f64],
) -> Result<(Vec<f64>, OpCounters)> {
    match rounding {
        Rounding::Unrounded => apply_dense(inverse, rhs),
        Rounding::Digits(m) => apply(&build_plan(&quantize(inverse, m)?), rhs),
    }
}

pub fn test_problem_rhs(grid: &Grid2D) -> Result<Vec<f64>> {
    assemble_rhs(grid, &SourceField::poisson_test_problem(grid))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ErrorRow {
    pub n: usize,
    pub rounding: Rounding,
    pub error: f64,
}

pub fn run_table1(sides: &[usize], roundings: &[Rounding]) -> Result<Vec<ErrorRow>> {
    run_table1_with(sides, roundings, &mut FreshInverse)
}

/// One row per (side, rounding), sorted by side then rounding.
pub fn run_table1_with(
    sides: &[usize],
    roundings: &[Rounding],
    source: &mut impl InverseSource,
) -> Result<Vec<ErrorRow>> {
    let mut sides = sides.to_vec();
    sides.sort_unstable();
    sides.dedup();
    let mut roundings = roundings.to_vec();
    roundings.sort_unstable();
    roundings.dedup();

    let mut rows = Vec::with_capacity(sides.len() * roundings.len());
    for &n in &sides {
        let grid = Grid2D::square(n)?;
        let inverse = source.inverse(&grid)?;
        let rhs = test_problem_rhs(&grid)?;
        for &rounding in &roundings {
            let (u, _) = solve_with_inverse(&inverse, rounding, &rhs)?;
            rows.push(ErrorRow {
                n,
                rounding,
                error: relative_error(&u, &grid)?,
            });
        }
    }
    Ok(rows)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScalingRow {
    pub n: usize,
    pub n_total: usize,
    pub digits: u32,
    pub measured: OpCounters,
    pub naive: OpCounters,
    pub prediction: CostPrediction,
}

impl ScalingRow {
    pub fn alpha_mult(&self) -> f64 {
        self.measured.multiplications as f64 / self.n_total as f64
    }

    pub fn alpha_add(&self) -> f64 {
        self.measured.additions as f64 / self.n_total as f64
    }
}

/// Least-squares slopes of `log(count)` against `log(N)` for one precision.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SlopeFit {
    pub digits: u32,
    pub mult_slope: f64,
    pub add_slope: f64,
    pub naive_mult_slope: f64,
    pub naive_add_slope: f64,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct ScalingReport {
    pub rows: Vec<ScalingRow>,
    pub fits: Vec<SlopeFit>,
}

/// Slope of the least-squares line through `(ln x, ln y)`; `NaN` with fewer
/// than two distinct `x`.
pub fn log_log_slope(points: &[(f64, f64)]) -> f64 {
    let k = points.len() as f64;
    let (lx, ly): (Vec<f64>, Vec<f64>) = points.iter().map(|&(x, y)| (x.ln(), y.ln())).unzip();
    let mx = lx.iter().sum::<f64>() / k;
    let my = ly.iter().sum::<f64>() / k;
    let sxy: f64 = lx.iter().zip(&ly).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = lx.iter().map(|x| (x - mx) * (x - mx)).sum();
    if sxx == 0.0 {
        f64::NAN
    } else {
        sxy / sxx
    }
}

pub fn full_prediction(digits: u32, n_total: usize) -> CostPrediction {
    CostPrediction {
        iterations: predict_iterations(n_total, digits),
        iterative_total: predict_iterative_total(n_total, digits),
        ..predict_direct_costs(digits, n_total)
    }
}

pub fn run_scaling(sides: &[usize], digits: &[u32]) -> Result<ScalingReport> {
    run_scaling_with(sides, digits, &mut FreshInverse)
}

/// Measures plan and dense operation counts on the built-in problem for
/// every (side, digits) pair; rows sorted by side then digits.
pub fn run_scaling_with(
    sides: &[usize],
    digits: &[u32],
    source: &mut impl InverseSource,
) -> Result<ScalingReport> {
    if sides.is_empty() || digits.is_empty() {
        return Err(Error::InvalidArgument(
            "scaling study needs at least one side and one precision".into(),
        ));
    }
    let mut sides = sides.to_vec();
    sides.sort_unstable();
    sides.dedup();
    let mut digits = digits.to_vec();
    digits.sort_unstable();
    digits.dedup();

    let mut rows = Vec::new();
    for &n in &sides {
        let grid = Grid2D::square(n)?;
        let inverse = source.inverse(&grid)?;
        let rhs = test_problem_rhs(&grid)?;
        let (_, naive) = apply_dense(&inverse, &rhs)?;
        for &m in &digits {
            let (_, measured) = solve_with_inverse(&inverse, Rounding::Digits(m), &rhs)?;
            rows.push(ScalingRow {
                n,
                n_total: grid.n_points(),
                digits: m,
                measured,
                naive,
                prediction: full_prediction(m, grid.n_points()),
            });
        }
    }

    let fits = digits
        .iter()
        .map(|&m| {
            let series: Vec<&ScalingRow> = rows.iter().filter(|r| r.digits == m).collect();
            let slope = |f: &dyn Fn(&ScalingRow) -> u64| {
                let pts: Vec<(f64, f64)> = series
                    .iter()
                    .map(|r| (r.n_total as f64, f(r) as f64))
                    .collect();
                log_log_slope(&pts)
            };
            SlopeFit {
                digits: m,
                mult_slope: slope(&|r| r.measured.multiplications),
                add_slope: slope(&|r| r.measured.additions),
                naive_mult_slope: slope(&|r| r.naive.multiplications),
                naive_add_slope: slope(&|r| r.naive.additions),
            }
        })
        .collect();
    Ok(ScalingReport { rows, fits })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IterativeCostRow {
    pub n: usize,
    pub n_total: usize,
    pub digits: u32,
    pub sweeps: usize,
    pub operations: u64,
    pub converged: bool,
    pub predicted_sweeps: f64,
    pub predicted_operations: f64,
}

/// Gauss-Seidel on the built-in problem to tolerance `10^-digits`.
pub fn run_iterative_scaling(sides: &[usize], digits: u32) -> Result<Vec<IterativeCostRow>> {
    let tol = 10f64.powi(-(digits as i32));
    sides
        .iter()
        .map(|&n| {
            let grid = Grid2D::square(n)?;
            let rhs = test_problem_rhs(&grid)?;
            let report = gauss_seidel_solve(&grid, &rhs, tol, 10_000_000)?;
            let n_total = grid.n_points();
            Ok(IterativeCostRow {
                n,
                n_total,
                digits,
                sweeps: report.iterations,
                operations: report.operations,
                converged: report.converged,
                predicted_sweeps: predict_iterations(n_total, digits),
                predicted_operations: predict_iterative_total(n_total, digits),
            })
        })
        .collect()
}
