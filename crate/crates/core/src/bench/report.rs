use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use super::svg::{LogLogChart, Series};
use super::{ErrorRow, Rounding, ScalingReport};
use crate::error::{Error, Result};

pub const SCALING_HEADER: &str = "n,N,m,n_mult,n_add,alpha_mult,alpha_add,naive_mult,naive_add,\
pred_prod_eq9,pred_sum_eq10,pred_iter_eq7,pred_iter_total_eq8";
pub const TABLE1_HEADER: &str = "n,digits,error";

/// Plain decimal with six significant digits.
pub(crate) fn six_significant(x: f64) -> String {
    if x == 0.0 || !x.is_finite() {
        return format!("{x}");
    }
    let exponent = x.abs().log10().floor() as i32;
    let decimals = (5 - exponent).max(0) as usize;
    format!("{x:.decimals$}")
}

pub fn scaling_csv(report: &ScalingReport) -> String {
    let mut out = String::from(SCALING_HEADER);
    out.push('\n');
    for r in &report.rows {
        writeln!(
            out,
            "{},{},{},{},{},{},{},{},{},{},{},{},{}",
            r.n,
            r.n_total,
            r.digits,
            r.measured.multiplications,
            r.measured.additions,
            r.alpha_mult(),
            r.alpha_add(),
            r.naive.multiplications,
            r.naive.additions,
            r.prediction.direct_products,
            r.prediction.direct_sums,
            r.prediction.iterations,
            r.prediction.iterative_total,
        )
        .unwrap();
    }
    out
}

pub fn table1_csv(rows: &[ErrorRow]) -> String {
    let mut out = String::from(TABLE1_HEADER);
    out.push('\n');
    for r in rows {
        writeln!(out, "{},{},{}", r.n, r.rounding, six_significant(r.error)).unwrap();
    }
    out
}

fn write_file(path: &Path, contents: &str) -> Result<()> {
    fs::write(path, contents).map_err(|e| Error::io(path, e))
}

pub fn emit_csv(report: &ScalingReport, path: &Path) -> Result<()> {
    write_file(path, &scaling_csv(report))
}

pub fn emit_table1_csv(rows: &[ErrorRow], path: &Path) -> Result<()> {
    write_file(path, &table1_csv(rows))
}

/// Operation counts against `N`: one multiplication and one addition series
/// per precision, plus the dense `N^2` product.
pub fn scaling_chart(report: &ScalingReport) -> LogLogChart {
    let mut chart = LogLogChart::new(
        "Elementary operations per matrix-vector product",
        "N (unknowns)",
        "operations",
    );
    let mut digits: Vec<u32> = report.rows.iter().map(|r| r.digits).collect();
    digits.sort_unstable();
    digits.dedup();
    for &m in &digits {
        let rows = report.rows.iter().filter(|r| r.digits == m);
        chart.push(Series::new(
            format!("m={m} multiplications"),
            rows.clone()
                .map(|r| (r.n_total as f64, r.measured.multiplications as f64))
                .collect(),
        ));
        chart.push(
            Series::new(
                format!("m={m} additions"),
                rows.map(|r| (r.n_total as f64, r.measured.additions as f64))
                    .collect(),
            )
            .dashed(),
        );
    }
    let mut naive: Vec<(f64, f64)> = report
        .rows
        .iter()
        .map(|r| (r.n_total as f64, r.naive.multiplications as f64))
        .collect();
    naive.dedup();
    chart.push(Series::new("dense N^2".to_string(), naive));
    chart
}

pub fn table1_chart(rows: &[ErrorRow]) -> LogLogChart {
    let mut chart = LogLogChart::new("Relative error vs. grid side", "n", "relative error");
    let mut roundings: Vec<Rounding> = rows.iter().map(|r| r.rounding).collect();
    roundings.sort_unstable();
    roundings.dedup();
    for rounding in roundings {
        let label = match rounding {
            Rounding::Digits(m) => format!("{m} digits"),
            Rounding::Unrounded => "unrounded".to_string(),
        };
        let pts = rows
            .iter()
            .filter(|r| r.rounding == rounding && r.error > 0.0)
            .map(|r| (r.n as f64, r.error))
            .collect();
        chart.push(Series::new(label, pts));
    }
    chart
}

pub fn emit_svg(report: &ScalingReport, path: &Path) -> Result<()> {
    write_file(path, &scaling_chart(report).render())
}

pub fn emit_table1_svg(rows: &[ErrorRow], path: &Path) -> Result<()> {
    write_file(path, &table1_chart(rows).render())
}
