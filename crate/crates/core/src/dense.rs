//! Dense square matrices and the one-time inversion of the system operator.

use crate::applyplan::OpCounters;
use crate::error::{Error, Result};

/// Upper bound on stored entries (1 GiB of `f64`).
pub const MAX_DENSE_ENTRIES: usize = 1 << 27;

/// Pivots below this fraction of the largest input magnitude are treated as zero.
pub const SINGULARITY_THRESHOLD: f64 = 1e-13;

/// Row-major dense `n x n` matrix with finite entries.
#[derive(Debug, Clone, PartialEq)]
pub struct DenseMatrix {
    n: usize,
    data: Vec<f64>,
}

pub(crate) fn check_capacity(n: usize) -> Result<()> {
    match n.checked_mul(n) {
        Some(len) if len <= MAX_DENSE_ENTRIES => Ok(()),
        _ => Err(Error::Capacity {
            n,
            limit: MAX_DENSE_ENTRIES,
        }),
    }
}

impl DenseMatrix {
    pub fn zeros(n: usize) -> Result<Self> {
        check_capacity(n)?;
        Ok(Self {
            n,
            data: vec![0.0; n * n],
        })
    }

    pub fn identity(n: usize) -> Result<Self> {
        let mut m = Self::zeros(n)?;
        for i in 0..n {
            m.data[i * n + i] = 1.0;
        }
        Ok(m)
    }

    /// Wraps row-major data. Fails if the length is not a square or an entry
    /// is not finite.
    pub fn from_row_major(n: usize, data: Vec<f64>) -> Result<Self> {
        check_capacity(n)?;
        if data.len() != n * n {
            return Err(Error::DimensionMismatch {
                expected: n * n,
                actual: data.len(),
            });
        }
        if let Some(pos) = data.iter().position(|v| !v.is_finite()) {
            return Err(Error::InvalidArgument(format!(
                "non-finite entry at ({}, {})",
                pos / n,
                pos % n
            )));
        }
        Ok(Self { n, data })
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let n = rows.len();
        let mut data = Vec::with_capacity(n * n);
        for row in rows {
            if row.len() != n {
                return Err(Error::DimensionMismatch {
                    expected: n,
                    actual: row.len(),
                });
            }
            data.extend_from_slice(row);
        }
        Self::from_row_major(n, data)
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    #[inline]
    pub fn get(&self, row: usize, col: usize) -> f64 {
        self.data[row * self.n + col]
    }

    #[inline]
    pub(crate) fn set(&mut self, row: usize, col: usize, value: f64) {
        self.data[row * self.n + col] = value;
    }

    pub fn row(&self, row: usize) -> &[f64] {
        &self.data[row * self.n..(row + 1) * self.n]
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0f64, |acc, v| acc.max(v.abs()))
    }
}

impl AsRef<DenseMatrix> for DenseMatrix {
    fn as_ref(&self) -> &DenseMatrix {
        self
    }
}

fn axpy(dst: &mut [f64], alpha: f64, src: &[f64]) {
    for (d, s) in dst.iter_mut().zip(src) {
        *d -= alpha * s;
    }
}

/// Inverts `a` through an LU factorization with partial pivoting.
///
/// The pivot in each column is the entry of largest magnitude on or below the
/// diagonal, ties going to the lowest row index, so repeated runs produce
/// bit-identical inverses. A pivot whose magnitude does not exceed
/// `SINGULARITY_THRESHOLD * max|a|` is reported as [`Error::Singular`].
pub fn invert(a: impl AsRef<DenseMatrix>) -> Result<DenseMatrix> {
    let a = a.as_ref();
    let n = a.n;
    let threshold = SINGULARITY_THRESHOLD * a.max_abs();
    let mut lu = a.data.clone();
    let mut perm: Vec<usize> = (0..n).collect();

    for k in 0..n {
        let mut p = k;
        let mut best = lu[k * n + k].abs();
        for r in k + 1..n {
            let v = lu[r * n + k].abs();
            if v > best {
                best = v;
                p = r;
            }
        }
        if !(best > threshold) {
            return Err(Error::Singular {
                column: k,
                pivot: best,
            });
        }
        if p != k {
            for c in 0..n {
                lu.swap(k * n + c, p * n + c);
            }
            perm.swap(k, p);
        }

        let (head, tail) = lu.split_at_mut((k + 1) * n);
        let pivot_row = &head[k * n..];
        let pivot = pivot_row[k];
        for row in tail.chunks_exact_mut(n) {
            if row[k] == 0.0 {
                continue;
            }
            let l = row[k] / pivot;
            row[k] = l;
            axpy(&mut row[k + 1..], l, &pivot_row[k + 1..]);
        }
    }

    // Solve L U X = P for all columns at once, one row operation at a time.
    let mut x = vec![0.0; n * n];
    for (i, &src) in perm.iter().enumerate() {
        x[i * n + src] = 1.0;
    }
    for i in 1..n {
        let (head, tail) = x.split_at_mut(i * n);
        let xi = &mut tail[..n];
        for k in 0..i {
            let l = lu[i * n + k];
            if l != 0.0 {
                axpy(xi, l, &head[k * n..(k + 1) * n]);
            }
        }
    }
    for i in (0..n).rev() {
        let (head, tail) = x.split_at_mut((i + 1) * n);
        let xi = &mut head[i * n..];
        for k in i + 1..n {
            let u = lu[i * n + k];
            if u != 0.0 {
                let off = (k - i - 1) * n;
                axpy(xi, u, &tail[off..off + n]);
            }
        }
        let d = lu[i * n + i];
        for v in xi.iter_mut() {
            *v /= d;
        }
    }

    DenseMatrix::from_row_major(n, x)
}

/// Max-norm of `a * ainv - I`.
pub fn residual_check(a: impl AsRef<DenseMatrix>, ainv: &DenseMatrix) -> Result<f64> {
    let a = a.as_ref();
    if a.n != ainv.n {
        return Err(Error::DimensionMismatch {
            expected: a.n,
            actual: ainv.n,
        });
    }
    let n = a.n;
    let mut worst = 0.0f64;
    let mut acc = vec![0.0; n];
    for i in 0..n {
        acc.iter_mut().for_each(|v| *v = 0.0);
        for (k, &aik) in a.row(i).iter().enumerate() {
            if aik != 0.0 {
                for (s, b) in acc.iter_mut().zip(ainv.row(k)) {
                    *s += aik * b;
                }
            }
        }
        acc[i] -= 1.0;
        worst = acc.iter().fold(worst, |w, v| w.max(v.abs()));
    }
    Ok(worst)
}

/// Conventional row-by-row product, `N^2` multiplications and `N(N-1)` additions.
pub fn apply_dense(m: &DenseMatrix, x: &[f64]) -> Result<(Vec<f64>, OpCounters)> {
    if x.len() != m.n {
        return Err(Error::DimensionMismatch {
            expected: m.n,
            actual: x.len(),
        });
    }
    let mut counters = OpCounters::default();
    let y = (0..m.n)
        .map(|i| {
            let row = m.row(i);
            let mut acc = row[0] * x[0];
            counters.multiplications += 1;
            for j in 1..m.n {
                acc += row[j] * x[j];
                counters.multiplications += 1;
                counters.additions += 1;
            }
            acc
        })
        .collect();
    Ok((y, counters))
}
