//! Gauss-Seidel and SOR sweeps over the five-point stencil.
//!
//! Each sweep is charged `5 N` elementary operations regardless of how many
//! points are interior, so reported costs line up with the cost model in
//! [`predict_iterative_total`].

use std::f64::consts::{LN_10, PI};

use crate::error::{Error, Result};
use crate::grid::Grid2D;

/// Elementary operations charged per grid point per sweep.
pub const OPS_PER_POINT_SWEEP: u64 = 5;

#[derive(Debug, Clone, PartialEq)]
pub struct IterativeReport {
    pub solution: Vec<f64>,
    pub iterations: usize,
    /// `5 * N * iterations`.
    pub operations: u64,
    pub converged: bool,
    /// Max-norm of the change made by the last sweep.
    pub final_correction: f64,
    pub omega: f64,
}

/// `2 / (1 + sqrt(1 - rho^2))` with `rho` the Jacobi spectral radius of the
/// grid; equals `2 / (1 + sin(pi h))` on a square grid.
pub fn optimal_omega(grid: &Grid2D) -> f64 {
    if grid.n_interior() == 0 {
        return 1.0;
    }
    let rho = 0.5 * ((PI / (grid.nx() - 1) as f64).cos() + (PI / (grid.ny() - 1) as f64).cos());
    2.0 / (1.0 + (1.0 - rho * rho).sqrt())
}

/// SOR with relaxation `omega`; `omega <= 0` selects [`optimal_omega`].
///
/// Sweeps run over interior points in index order, updating in place.
/// Iteration stops once the largest change in a sweep is at most
/// `tol * max(1, max|u|)`. Running out of sweeps is not an error: the
/// report comes back with `converged == false`.
pub fn sor_solve(
    grid: &Grid2D,
    rhs: &[f64],
    omega: f64,
    tol: f64,
    max_iter: usize,
) -> Result<IterativeReport> {
    let n = grid.n_points();
    if rhs.len() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            actual: rhs.len(),
        });
    }
    if !(tol > 0.0) {
        return Err(Error::InvalidArgument(format!(
            "tolerance must be positive, got {tol}"
        )));
    }
    let omega = if omega <= 0.0 {
        optimal_omega(grid)
    } else {
        omega
    };
    if !(omega < 2.0) {
        return Err(Error::InvalidArgument(format!(
            "relaxation factor must lie in (0, 2), got {omega}"
        )));
    }

    let nx = grid.nx();
    let mut u: Vec<f64> = (0..n)
        .map(|p| {
            if grid.is_boundary_index(p) {
                rhs[p]
            } else {
                0.0
            }
        })
        .collect();
    let mut iterations = 0;
    let mut correction = f64::INFINITY;
    let mut converged = false;

    while iterations < max_iter {
        iterations += 1;
        correction = 0.0;
        for i in 2..grid.ny() {
            for j in 2..nx {
                let p = grid.index(i, j);
                let gs = rhs[p] + 0.25 * (u[p - 1] + u[p + 1] + u[p - nx] + u[p + nx]);
                let next = if omega == 1.0 {
                    gs
                } else {
                    u[p] + omega * (gs - u[p])
                };
                correction = correction.max((next - u[p]).abs());
                u[p] = next;
            }
        }
        let scale = u.iter().fold(1.0f64, |s, v| s.max(v.abs()));
        if correction <= tol * scale {
            converged = true;
            break;
        }
    }

    Ok(IterativeReport {
        solution: u,
        iterations,
        operations: OPS_PER_POINT_SWEEP * n as u64 * iterations as u64,
        converged,
        final_correction: correction,
        omega,
    })
}

pub fn gauss_seidel_solve(
    grid: &Grid2D,
    rhs: &[f64],
    tol: f64,
    max_iter: usize,
) -> Result<IterativeReport> {
    sor_solve(grid, rhs, 1.0, tol, max_iter)
}

/// Predicted sweeps to reach accuracy `10^-digits`: `(2 ln 10 / pi) m N`.
pub fn predict_iterations(n_total: usize, digits: u32) -> f64 {
    2.0 * LN_10 / PI * digits as f64 * n_total as f64
}

/// Predicted total operations, `5 N` per sweep: `(10 ln 10 / pi) m N^2`.
pub fn predict_iterative_total(n_total: usize, digits: u32) -> f64 {
    let n = n_total as f64;
    10.0 * LN_10 / PI * digits as f64 * n * n
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dense::{apply_dense, invert};
    use crate::grid::{analytic_solution, assemble_rhs, build_uniform, SourceField};

    fn problem(n: usize) -> (Grid2D, Vec<f64>) {
        let grid = Grid2D::square(n).unwrap();
        let rhs = assemble_rhs(&grid, &SourceField::poisson_test_problem(&grid)).unwrap();
        (grid, rhs)
    }

    fn direct(grid: &Grid2D, rhs: &[f64]) -> Vec<f64> {
        let inv = invert(build_uniform(grid).unwrap()).unwrap();
        apply_dense(&inv, rhs).unwrap().0
    }

    fn max_diff(a: &[f64], b: &[f64]) -> f64 {
        a.iter()
            .zip(b)
            .fold(0.0f64, |m, (x, y)| m.max((x - y).abs()))
    }

    #[test]
    fn zero_rhs_converges_immediately() {
        let grid = Grid2D::square(6).unwrap();
        let rhs = vec![0.0; 36];
        for report in [
            sor_solve(&grid, &rhs, -1.0, 1e-10, 100).unwrap(),
            gauss_seidel_solve(&grid, &rhs, 1e-10, 100).unwrap(),
        ] {
            assert!(report.converged);
            assert_eq!(report.iterations, 1);
            assert_eq!(report.final_correction, 0.0);
            assert!(report.solution.iter().all(|&v| v == 0.0));
            assert_eq!(report.operations, 5 * 36);
        }
    }

    #[test]
    fn sor_matches_direct_on_small_grid() {
        let grid = Grid2D::new(3, 5).unwrap();
        let rhs = assemble_rhs(&grid, &SourceField::poisson_test_problem(&grid)).unwrap();
        let tol = 1e-12;
        let report = sor_solve(&grid, &rhs, 0.0, tol, 10_000).unwrap();
        assert!(report.converged);
        assert!(max_diff(&report.solution, &direct(&grid, &rhs)) <= 10.0 * tol);
    }

    #[test]
    fn unit_omega_is_gauss_seidel() {
        let (grid, rhs) = problem(9);
        for max_iter in [1, 2, 7, 40] {
            let a = sor_solve(&grid, &rhs, 1.0, 1e-14, max_iter).unwrap();
            let b = gauss_seidel_solve(&grid, &rhs, 1e-14, max_iter).unwrap();
            assert_eq!(a, b);
        }
    }

    #[test]
    fn gauss_seidel_error_matches_direct() {
        let (grid, rhs) = problem(11);
        // The stopping rule bounds the last correction, not the error; on this
        // problem the relative error lags the correction by roughly 1e3.
        let tol = 1e-9;
        let gs = gauss_seidel_solve(&grid, &rhs, tol * 1e-3, 100_000).unwrap();
        assert!(gs.converged);
        let exact = grid.sample(analytic_solution);
        let peak = exact.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        let err_gs = max_diff(&gs.solution, &exact) / peak;
        let err_direct = max_diff(&direct(&grid, &rhs), &exact) / peak;
        assert!(
            (err_gs - err_direct).abs() <= 2.0 * tol,
            "{err_gs} vs {err_direct}"
        );
    }

    #[test]
    fn sor_beats_gauss_seidel_at_optimal_omega() {
        let (grid, rhs) = problem(21);
        let gs = gauss_seidel_solve(&grid, &rhs, 1e-8, 1_000_000).unwrap();
        let sor = sor_solve(&grid, &rhs, -1.0, 1e-8, 1_000_000).unwrap();
        assert!(gs.converged && sor.converged);
        assert!(gs.iterations > sor.iterations);
        assert!((sor.omega - 2.0 / (1.0 + (PI * grid.hx()).sin())).abs() < 1e-12);
    }

    #[test]
    fn converged_solution_satisfies_stencil() {
        let (grid, rhs) = problem(13);
        let tol = 1e-9;
        let r = sor_solve(&grid, &rhs, -1.0, tol, 100_000).unwrap();
        let a = build_uniform(&grid).unwrap();
        for p in 0..grid.n_points() {
            let au: f64 = (0..grid.n_points())
                .map(|q| a.get(p, q) * r.solution[q])
                .sum();
            assert!((au - rhs[p]).abs() <= tol);
        }
    }

    #[test]
    fn tighter_tolerance_needs_more_sweeps() {
        let (grid, rhs) = problem(15);
        let mut last = 0;
        for m in 2..=9 {
            let r = gauss_seidel_solve(&grid, &rhs, 10f64.powi(-m), 1_000_000).unwrap();
            assert!(r.iterations >= last);
            assert_eq!(
                r.operations,
                5 * grid.n_points() as u64 * r.iterations as u64
            );
            last = r.iterations;
        }
    }

    #[test]
    fn exhausting_sweeps_is_reported() {
        let (grid, rhs) = problem(21);
        let r = gauss_seidel_solve(&grid, &rhs, 1e-14, 3).unwrap();
        assert!(!r.converged);
        assert_eq!(r.iterations, 3);
    }

    #[test]
    fn bad_arguments() {
        let (grid, rhs) = problem(5);
        assert!(sor_solve(&grid, &rhs, 2.0, 1e-6, 10).is_err());
        assert!(sor_solve(&grid, &rhs, 1.0, 0.0, 10).is_err());
        assert!(sor_solve(&grid, &rhs[..3], 1.0, 1e-6, 10).is_err());
    }

    #[test]
    fn iteration_predictions() {
        // reference values evaluated independently to 16 digits
        let close = |a: f64, b: f64| (a / b - 1.0).abs() < 5e-7;
        assert!(close(predict_iterations(100, 3), 439.7613593276567));
        assert_eq!(predict_iterations(100, 0), 0.0);
        assert!(close(predict_iterations(1, 1), 1.4658711977588557));
        assert!(close(predict_iterative_total(10, 1), 732.9355988794279));
        assert_eq!(predict_iterative_total(10, 0), 0.0);
        for (n, m) in [(1, 1), (17, 3), (1681, 6)] {
            let ratio = predict_iterative_total(n, m) / (5.0 * n as f64 * predict_iterations(n, m));
            assert!((ratio - 1.0).abs() < 1e-12);
        }
    }
}
