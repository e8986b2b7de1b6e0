//! Decimal fixed-point representation of a dense matrix.

use std::collections::HashSet;

use crate::dense::{check_capacity, DenseMatrix};
use crate::error::{Error, Result};

pub const MAX_DIGITS: u32 = 12;

/// Entry `(r, c)` is `mantissas[r * n + c] * 10^-scale_digits`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct QuantizedMatrix {
    n: usize,
    scale_digits: u32,
    mantissas: Vec<i64>,
}

fn check_digits(digits: u32) -> Result<()> {
    if digits > MAX_DIGITS {
        return Err(Error::InvalidArgument(format!(
            "digits must be in 0..={MAX_DIGITS}, got {digits}"
        )));
    }
    Ok(())
}

impl QuantizedMatrix {
    pub fn from_mantissas(n: usize, scale_digits: u32, mantissas: Vec<i64>) -> Result<Self> {
        check_digits(scale_digits)?;
        check_capacity(n)?;
        if mantissas.len() != n * n {
            return Err(Error::DimensionMismatch {
                expected: n * n,
                actual: mantissas.len(),
            });
        }
        Ok(Self {
            n,
            scale_digits,
            mantissas,
        })
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn scale_digits(&self) -> u32 {
        self.scale_digits
    }

    /// `10^m` as a float; exact for every allowed `m`.
    pub fn scale(&self) -> f64 {
        10f64.powi(self.scale_digits as i32)
    }

    #[inline]
    pub fn mantissa(&self, row: usize, col: usize) -> i64 {
        self.mantissas[row * self.n + col]
    }

    pub fn mantissas(&self) -> &[i64] {
        &self.mantissas
    }

    /// The real value of an entry as used by every multiply in this crate.
    #[inline]
    pub fn value(&self, row: usize, col: usize) -> f64 {
        self.mantissa(row, col) as f64 / self.scale()
    }

    pub fn nonzero_count(&self) -> usize {
        self.mantissas.iter().filter(|&&v| v != 0).count()
    }
}

/// Rounds every entry to `digits` decimal places, halves away from zero.
pub fn quantize(mat: &DenseMatrix, digits: u32) -> Result<QuantizedMatrix> {
    check_digits(digits)?;
    let n = mat.dim();
    let scale = 10f64.powi(digits as i32);
    // 2^63: the first float outside i64
    const LIMIT: f64 = 9_223_372_036_854_775_808.0;
    let mantissas = mat
        .as_slice()
        .iter()
        .enumerate()
        .map(|(k, &v)| {
            let r = (v * scale).round();
            if !(-LIMIT..LIMIT).contains(&r) {
                Err(Error::MantissaOverflow {
                    row: k / n,
                    col: k % n,
                    value: v,
                    digits,
                })
            } else {
                Ok(r as i64)
            }
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(QuantizedMatrix {
        n,
        scale_digits: digits,
        mantissas,
    })
}

pub fn dequantize(q: &QuantizedMatrix) -> DenseMatrix {
    let scale = q.scale();
    let data = q.mantissas.iter().map(|&v| v as f64 / scale).collect();
    DenseMatrix::from_row_major(q.n, data).expect("quantized values are finite")
}

/// Nonzero count and, per column, the number of distinct nonzero `|mantissa|`.
pub fn sparsity_stats(q: &QuantizedMatrix) -> (usize, Vec<usize>) {
    let n = q.n;
    let mut distinct = Vec::with_capacity(n);
    let mut seen = HashSet::new();
    for col in 0..n {
        seen.clear();
        for row in 0..n {
            let v = q.mantissa(row, col);
            if v != 0 {
                seen.insert(v.unsigned_abs());
            }
        }
        distinct.push(seen.len());
    }
    (q.nonzero_count(), distinct)
}
