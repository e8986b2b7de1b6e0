//! Uniform 2-D grid, five-point operator assembly and the built-in test problem.
//!
//! Points are numbered row by row: the point at row `i` (along y, 1-based)
//! and column `j` (along x, 1-based) has index `(i - 1) * nx + (j - 1)`.
//! Boundary points get identity rows so the system carries its Dirichlet
//! data in the right-hand side.

use crate::dense::{check_capacity, DenseMatrix};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Grid2D {
    nx: usize,
    ny: usize,
    length: f64,
    hx: f64,
    hy: f64,
}

impl Grid2D {
    /// Grid on the unit square.
    pub fn new(nx: usize, ny: usize) -> Result<Self> {
        Self::with_length(nx, ny, 1.0)
    }

    pub fn square(n: usize) -> Result<Self> {
        Self::new(n, n)
    }

    pub fn with_length(nx: usize, ny: usize, length: f64) -> Result<Self> {
        if nx < 2 || ny < 2 {
            return Err(Error::InvalidGrid(format!(
                "need at least 2 points per axis, got {nx}x{ny}"
            )));
        }
        if !(length.is_finite() && length > 0.0) {
            return Err(Error::InvalidGrid(format!(
                "domain length must be positive, got {length}"
            )));
        }
        Ok(Self {
            nx,
            ny,
            length,
            hx: length / (nx - 1) as f64,
            hy: length / (ny - 1) as f64,
        })
    }

    pub fn nx(&self) -> usize {
        self.nx
    }

    pub fn ny(&self) -> usize {
        self.ny
    }

    pub fn length(&self) -> f64 {
        self.length
    }

    pub fn hx(&self) -> f64 {
        self.hx
    }

    pub fn hy(&self) -> f64 {
        self.hy
    }

    /// Total number of points `N = nx * ny`.
    pub fn n_points(&self) -> usize {
        self.nx * self.ny
    }

    pub fn n_interior(&self) -> usize {
        (self.nx - 2) * (self.ny - 2)
    }

    /// 0-based index of the 1-based point `(i, j)`.
    #[inline]
    pub fn index(&self, i: usize, j: usize) -> usize {
        debug_assert!((1..=self.ny).contains(&i) && (1..=self.nx).contains(&j));
        (i - 1) * self.nx + (j - 1)
    }

    /// Inverse of [`Grid2D::index`].
    #[inline]
    pub fn point(&self, p: usize) -> (usize, usize) {
        (p / self.nx + 1, p % self.nx + 1)
    }

    #[inline]
    pub fn x(&self, j: usize) -> f64 {
        self.hx * (j - 1) as f64
    }

    #[inline]
    pub fn y(&self, i: usize) -> f64 {
        self.hy * (i - 1) as f64
    }

    /// Physical coordinates `(x, y)` of point index `p`.
    pub fn coords(&self, p: usize) -> (f64, f64) {
        let (i, j) = self.point(p);
        (self.x(j), self.y(i))
    }

    #[inline]
    pub fn is_boundary(&self, i: usize, j: usize) -> bool {
        i == 1 || i == self.ny || j == 1 || j == self.nx
    }

    pub fn is_boundary_index(&self, p: usize) -> bool {
        let (i, j) = self.point(p);
        self.is_boundary(i, j)
    }

    /// Indices of the four axis neighbors of interior point `(i, j)`, in the
    /// order west, east, south, north.
    fn neighbors(&self, i: usize, j: usize) -> [usize; 4] {
        [
            self.index(i, j - 1),
            self.index(i, j + 1),
            self.index(i - 1, j),
            self.index(i + 1, j),
        ]
    }

    /// Samples `f(x, y)` at every grid point.
    pub fn sample(&self, f: impl Fn(f64, f64) -> f64) -> Vec<f64> {
        (0..self.n_points())
            .map(|p| {
                let (x, y) = self.coords(p);
                f(x, y)
            })
            .collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RowKind {
    Boundary,
    Interior,
}

impl RowKind {
    pub fn is_boundary(self) -> bool {
        self == RowKind::Boundary
    }
}

/// System matrix with identity rows at boundary points.
#[derive(Debug, Clone, PartialEq)]
pub struct OperatorMatrix {
    matrix: DenseMatrix,
    row_kind: Vec<RowKind>,
}

impl OperatorMatrix {
    pub fn dim(&self) -> usize {
        self.matrix.dim()
    }

    pub fn get(&self, row: usize, col: usize) -> f64 {
        self.matrix.get(row, col)
    }

    pub fn row_kind(&self, row: usize) -> RowKind {
        self.row_kind[row]
    }

    pub fn row_kinds(&self) -> &[RowKind] {
        &self.row_kind
    }

    pub fn into_dense(self) -> DenseMatrix {
        self.matrix
    }
}

impl AsRef<DenseMatrix> for OperatorMatrix {
    fn as_ref(&self) -> &DenseMatrix {
        &self.matrix
    }
}

/// Per-point coefficients of the variable-coefficient stencil.
#[derive(Debug, Clone, PartialEq)]
pub struct CoefficientField {
    beta: Vec<f64>,
}

impl CoefficientField {
    pub fn new(beta: Vec<f64>) -> Result<Self> {
        if let Some(p) = beta.iter().position(|b| !b.is_finite()) {
            return Err(Error::InvalidArgument(format!(
                "coefficient at point {p} is not finite"
            )));
        }
        Ok(Self { beta })
    }

    pub fn constant(grid: &Grid2D, value: f64) -> Result<Self> {
        Self::new(vec![value; grid.n_points()])
    }

    pub fn values(&self) -> &[f64] {
        &self.beta
    }
}

/// Source samples `f` and Dirichlet data `g`, one value per grid point.
///
/// Only interior entries of `f` and boundary entries of `g` are read.
#[derive(Debug, Clone, PartialEq)]
pub struct SourceField {
    f: Vec<f64>,
    g: Vec<f64>,
}

impl SourceField {
    pub fn from_samples(f: Vec<f64>, g: Vec<f64>) -> Result<Self> {
        if f.len() != g.len() {
            return Err(Error::DimensionMismatch {
                expected: f.len(),
                actual: g.len(),
            });
        }
        Ok(Self { f, g })
    }

    pub fn from_fns(
        grid: &Grid2D,
        f: impl Fn(f64, f64) -> f64,
        g: impl Fn(f64, f64) -> f64,
    ) -> Self {
        Self {
            f: grid.sample(f),
            g: grid.sample(g),
        }
    }

    /// The built-in problem: [`test_source`] with zero boundary data.
    pub fn poisson_test_problem(grid: &Grid2D) -> Self {
        Self::from_fns(grid, test_source, |_, _| 0.0)
    }

    pub fn f(&self) -> &[f64] {
        &self.f
    }

    pub fn g(&self) -> &[f64] {
        &self.g
    }
}

fn build_with(grid: &Grid2D, weight: impl Fn(usize) -> f64) -> Result<OperatorMatrix> {
    let n = grid.n_points();
    check_capacity(n)?;
    let mut matrix = DenseMatrix::identity(n)?;
    let mut row_kind = vec![RowKind::Boundary; n];
    for i in 2..grid.ny() {
        for j in 2..grid.nx() {
            let p = grid.index(i, j);
            row_kind[p] = RowKind::Interior;
            for q in grid.neighbors(i, j) {
                matrix.set(p, q, -0.25 * weight(q));
            }
        }
    }
    Ok(OperatorMatrix { matrix, row_kind })
}

/// Five-point operator: interior rows are `u_p - (u_W + u_E + u_S + u_N) / 4`.
pub fn build_uniform(grid: &Grid2D) -> Result<OperatorMatrix> {
    build_with(grid, |_| 1.0)
}

/// Five-point operator whose neighbor weights are scaled by the coefficient
/// of the neighbor point.
pub fn build_variable(grid: &Grid2D, coeffs: &CoefficientField) -> Result<OperatorMatrix> {
    if coeffs.beta.len() != grid.n_points() {
        return Err(Error::DimensionMismatch {
            expected: grid.n_points(),
            actual: coeffs.beta.len(),
        });
    }
    build_with(grid, |q| coeffs.beta[q])
}

/// Right-hand side for [`build_uniform`]: boundary slots carry `g`, interior
/// slots carry `-f * hx * hy / 4`.
pub fn assemble_rhs(grid: &Grid2D, source: &SourceField) -> Result<Vec<f64>> {
    let n = grid.n_points();
    if source.f.len() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            actual: source.f.len(),
        });
    }
    let scale = grid.hx() * grid.hy() / 4.0;
    Ok((0..n)
        .map(|p| {
            if grid.is_boundary_index(p) {
                source.g[p]
            } else {
                -source.f[p] * scale
            }
        })
        .collect())
}

/// Exact solution of the built-in problem, `(x^4 - x^3)(y^3 - y^2)`.
pub fn analytic_solution(x: f64, y: f64) -> f64 {
    (x.powi(4) - x.powi(3)) * (y.powi(3) - y.powi(2))
}

/// Laplacian of [`analytic_solution`].
pub fn test_source(x: f64, y: f64) -> f64 {
    (12.0 * x * x - 6.0 * x) * (y.powi(3) - y * y) + (x.powi(4) - x.powi(3)) * (6.0 * y - 2.0)
}
