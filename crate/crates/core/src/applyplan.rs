//! Fast application of a quantized matrix by sharing products.
//!
//! Within one column `j`, every entry with the same magnitude `|v|` needs the
//! same product `(|v| * 10^-m) * x_j`. The plan computes that product once per
//! (column, distinct magnitude) and then adds or subtracts it into each row
//! that holds the value. A column with `k` distinct nonzero magnitudes and
//! `z` nonzero entries therefore costs `k` multiplications and `z` additions.
//!
//! Columns are processed in ascending order, so each output row receives its
//! contributions in the same order as [`apply_naive_quantized`] and the two
//! produce bitwise-identical results.

use std::ops::{Add, AddAssign};

use crate::error::{Error, Result};
use crate::quant::QuantizedMatrix;

/// Elementary operation counts for one matrix-vector product.
#[derive(Debug, Default, Clone, Copy, PartialEq, Eq, Hash)]
pub struct OpCounters {
    pub multiplications: u64,
    pub additions: u64,
}

impl OpCounters {
    pub fn new(multiplications: u64, additions: u64) -> Self {
        Self {
            multiplications,
            additions,
        }
    }

    pub fn total(&self) -> u64 {
        self.multiplications + self.additions
    }
}

impl Add for OpCounters {
    type Output = OpCounters;

    fn add(self, rhs: Self) -> Self {
        OpCounters::new(
            self.multiplications + rhs.multiplications,
            self.additions + rhs.additions,
        )
    }
}

impl AddAssign for OpCounters {
    fn add_assign(&mut self, rhs: Self) {
        *self = *self + rhs;
    }
}

const SIGN_BIT: u32 = 1 << 31;

/// A row receiving a shared product, with the sign it is applied with.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Member(u32);

impl Member {
    fn new(row: usize, negative: bool) -> Self {
        debug_assert!(row < SIGN_BIT as usize);
        Member(row as u32 | if negative { SIGN_BIT } else { 0 })
    }

    #[inline]
    pub fn row(self) -> usize {
        (self.0 & !SIGN_BIT) as usize
    }

    #[inline]
    pub fn is_negative(self) -> bool {
        self.0 & SIGN_BIT != 0
    }
}

/// All entries of one column sharing a magnitude.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Group<'a> {
    pub magnitude: u64,
    pub members: &'a [Member],
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ApplyPlan {
    n: usize,
    scale_digits: u32,
    /// `col_start[j]..col_start[j + 1]` indexes the groups of column `j`.
    col_start: Vec<usize>,
    magnitudes: Vec<u64>,
    /// `group_start[g]..group_start[g + 1]` indexes the members of group `g`.
    group_start: Vec<usize>,
    members: Vec<Member>,
}

impl ApplyPlan {
    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn scale_digits(&self) -> u32 {
        self.scale_digits
    }

    pub fn groups(&self, col: usize) -> impl Iterator<Item = Group<'_>> + '_ {
        (self.col_start[col]..self.col_start[col + 1]).map(move |g| Group {
            magnitude: self.magnitudes[g],
            members: &self.members[self.group_start[g]..self.group_start[g + 1]],
        })
    }

    pub fn group_count(&self, col: usize) -> usize {
        self.col_start[col + 1] - self.col_start[col]
    }

    /// Operation counts every call to [`apply`] will report.
    pub fn planned_counts(&self) -> OpCounters {
        OpCounters::new(self.magnitudes.len() as u64, self.members.len() as u64)
    }
}

pub fn build_plan(q: &QuantizedMatrix) -> ApplyPlan {
    let n = q.dim();
    let mut col_start = Vec::with_capacity(n + 1);
    let mut magnitudes = Vec::new();
    let mut group_start = Vec::new();
    let mut members = Vec::with_capacity(q.nonzero_count());
    let mut entries: Vec<(u64, usize, bool)> = Vec::with_capacity(n);

    col_start.push(0);
    for col in 0..n {
        entries.clear();
        entries.extend((0..n).filter_map(|row| {
            let v = q.mantissa(row, col);
            (v != 0).then(|| (v.unsigned_abs(), row, v < 0))
        }));
        entries.sort_unstable_by_key(|&(mag, row, _)| (mag, row));
        let mut current = None;
        for &(mag, row, negative) in &entries {
            if current != Some(mag) {
                magnitudes.push(mag);
                group_start.push(members.len());
                current = Some(mag);
            }
            members.push(Member::new(row, negative));
        }
        col_start.push(magnitudes.len());
    }
    group_start.push(members.len());

    ApplyPlan {
        n,
        scale_digits: q.scale_digits(),
        col_start,
        magnitudes,
        group_start,
        members,
    }
}

fn check_len(n: usize, x: &[f64]) -> Result<()> {
    if x.len() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            actual: x.len(),
        });
    }
    Ok(())
}

/// Executes the plan on `x`, counting every multiplication and addition.
pub fn apply(plan: &ApplyPlan, x: &[f64]) -> Result<(Vec<f64>, OpCounters)> {
    check_len(plan.n, x)?;
    let scale = 10f64.powi(plan.scale_digits as i32);
    let mut y = vec![0.0; plan.n];
    let mut counters = OpCounters::default();
    for (col, &xj) in x.iter().enumerate() {
        for group in plan.groups(col) {
            let t = (group.magnitude as f64 / scale) * xj;
            counters.multiplications += 1;
            for m in group.members {
                let yi = &mut y[m.row()];
                *yi += if m.is_negative() { -t } else { t };
            }
            counters.additions += group.members.len() as u64;
        }
    }
    Ok((y, counters))
}

/// Reference product: one multiplication and one addition per nonzero entry,
/// columns ascending and rows ascending within a column.
pub fn apply_naive_quantized(q: &QuantizedMatrix, x: &[f64]) -> Result<(Vec<f64>, OpCounters)> {
    let n = q.dim();
    check_len(n, x)?;
    let mut y = vec![0.0; n];
    let mut counters = OpCounters::default();
    for (col, &xj) in x.iter().enumerate() {
        for (row, yi) in y.iter_mut().enumerate() {
            if q.mantissa(row, col) != 0 {
                *yi += q.value(row, col) * xj;
                counters.multiplications += 1;
                counters.additions += 1;
            }
        }
    }
    Ok((y, counters))
}

/// Reference cost predictions for the direct and iterative routes.
#[derive(Debug, Default, Clone, Copy, PartialEq)]
pub struct CostPrediction {
    pub direct_products: f64,
    pub direct_sums: f64,
    pub iterative_total: f64,
    pub iterations: f64,
}

/// `2.5 m^2.5 N` products and `14.2 m^2.5 N` sums; iterative fields left at zero.
pub fn predict_direct_costs(m: u32, n_total: usize) -> CostPrediction {
    let growth = (m as f64).powf(2.5) * n_total as f64;
    CostPrediction {
        direct_products: 2.5 * growth,
        direct_sums: 14.2 * growth,
        ..CostPrediction::default()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::quant::sparsity_stats;
    use proptest::prelude::*;

    fn q(n: usize, m: u32, mant: Vec<i64>) -> QuantizedMatrix {
        QuantizedMatrix::from_mantissas(n, m, mant).unwrap()
    }

    fn identity(n: usize, m: u32) -> QuantizedMatrix {
        let unit = 10i64.pow(m);
        q(
            n,
            m,
            (0..n * n)
                .map(|k| if k % (n + 1) == 0 { unit } else { 0 })
                .collect(),
        )
    }

    #[test]
    fn identity_plan() {
        let plan = build_plan(&identity(4, 2));
        for col in 0..4 {
            let groups: Vec<_> = plan.groups(col).collect();
            assert_eq!(groups.len(), 1);
            assert_eq!(groups[0].magnitude, 100);
            assert_eq!(groups[0].members, &[Member::new(col, false)]);
        }
        assert_eq!(plan.planned_counts(), OpCounters::new(4, 4));

        let x = [3.5, -1.0, 0.0, 2.0];
        let (y, c) = apply(&plan, &x).unwrap();
        assert_eq!(y, x);
        assert_eq!(c, OpCounters::new(4, 4));
    }

    #[test]
    fn equal_magnitudes_share_one_product() {
        // column 0 holds 25, 25, -25, 0
        let mut mant = vec![0i64; 16];
        mant[0] = 25;
        mant[4] = 25;
        mant[8] = -25;
        let plan = build_plan(&q(4, 2, mant));
        let groups: Vec<_> = plan.groups(0).collect();
        assert_eq!(groups.len(), 1);
        assert_eq!(groups[0].magnitude, 25);
        let rows: Vec<_> = groups[0]
            .members
            .iter()
            .map(|m| (m.row(), m.is_negative()))
            .collect();
        assert_eq!(rows, vec![(0, false), (1, false), (2, true)]);
        assert_eq!(plan.planned_counts(), OpCounters::new(1, 3));

        let (y, c) = apply(&plan, &[2.0, 9.0, 9.0, 9.0]).unwrap();
        assert_eq!(y, vec![0.5, 0.5, -0.5, 0.0]);
        assert_eq!(c, OpCounters::new(1, 3));
    }

    #[test]
    fn groups_sorted_by_magnitude() {
        let plan = build_plan(&q(3, 0, vec![7, 0, 0, -2, 0, 0, 7, 0, 0]));
        let mags: Vec<_> = plan.groups(0).map(|g| g.magnitude).collect();
        assert_eq!(mags, vec![2, 7]);
        assert_eq!(plan.group_count(1), 0);
    }

    #[test]
    fn zero_matrix() {
        let plan = build_plan(&q(3, 1, vec![0; 9]));
        let (y, c) = apply(&plan, &[1.0, 2.0, 3.0]).unwrap();
        assert_eq!(y, vec![0.0; 3]);
        assert_eq!(c, OpCounters::default());
        let (y, c) = apply_naive_quantized(&q(3, 1, vec![0; 9]), &[1.0, 2.0, 3.0]).unwrap();
        assert_eq!(y, vec![0.0; 3]);
        assert_eq!(c, OpCounters::default());
    }

    #[test]
    fn naive_hand_computation() {
        let m = q(2, 1, vec![10, -5, 0, 20]);
        // values 1.0, -0.5, 0, 2.0
        let (y, c) = apply_naive_quantized(&m, &[2.0, 4.0]).unwrap();
        assert_eq!(y, vec![0.0, 8.0]);
        assert_eq!(c, OpCounters::new(3, 3));

        let (y, c) = apply_naive_quantized(&identity(3, 4), &[1.0, -2.0, 0.5]).unwrap();
        assert_eq!(y, vec![1.0, -2.0, 0.5]);
        assert_eq!(c, OpCounters::new(3, 3));
    }

    #[test]
    fn dimension_mismatch() {
        let m = identity(3, 1);
        assert!(apply(&build_plan(&m), &[1.0]).is_err());
        assert!(apply_naive_quantized(&m, &[1.0; 4]).is_err());
    }

    #[test]
    fn plan_on_grid_inverse_matches_stats() {
        use crate::{dense::invert, grid::build_uniform, grid::Grid2D, quant::quantize};
        let inv = invert(build_uniform(&Grid2D::new(3, 5).unwrap()).unwrap()).unwrap();
        let qm = quantize(&inv, 2).unwrap();
        let (nnz, per_col) = sparsity_stats(&qm);
        let plan = build_plan(&qm);
        assert_eq!(
            plan.planned_counts(),
            OpCounters::new(per_col.iter().sum::<usize>() as u64, nnz as u64)
        );
    }

    #[test]
    fn direct_predictions() {
        let p = predict_direct_costs(1, 1000);
        assert!((p.direct_products - 2500.0).abs() < 1e-9);
        assert!((p.direct_sums - 14200.0).abs() < 1e-9);
        let p = predict_direct_costs(2, 100);
        assert!((p.direct_products / 1414.2135623731 - 1.0).abs() < 1e-6);
        assert!((p.direct_sums / 8032.7330342792 - 1.0).abs() < 1e-6);
        assert_eq!(p.iterations, 0.0);
    }

    fn quantized_strategy() -> impl Strategy<Value = QuantizedMatrix> {
        (1usize..10, 0u32..5).prop_flat_map(|(n, m)| {
            // small alphabet so magnitudes repeat within columns
            prop::collection::vec(-6i64..=6, n * n)
                .prop_map(move |mant| QuantizedMatrix::from_mantissas(n, m, mant).unwrap())
        })
    }

    proptest! {
        #[test]
        fn plan_invariants(qm in quantized_strategy()) {
            let plan = build_plan(&qm);
            let n = qm.dim();
            let mut entries = 0;
            for col in 0..n {
                let mut mags = Vec::new();
                let mut covered = Vec::new();
                for g in plan.groups(col) {
                    prop_assert!(g.magnitude > 0);
                    mags.push(g.magnitude);
                    for m in g.members {
                        let v = qm.mantissa(m.row(), col);
                        prop_assert_eq!(v.unsigned_abs(), g.magnitude);
                        prop_assert_eq!(v < 0, m.is_negative());
                        covered.push(m.row());
                    }
                }
                let mut sorted = mags.clone();
                sorted.dedup();
                prop_assert_eq!(&sorted, &mags);
                covered.sort_unstable();
                let nonzero: Vec<_> = (0..n).filter(|&r| qm.mantissa(r, col) != 0).collect();
                prop_assert_eq!(covered, nonzero);
                entries += mags.len();
            }
            let (nnz, per_col) = sparsity_stats(&qm);
            prop_assert_eq!(entries, per_col.iter().sum::<usize>());
            prop_assert_eq!(plan.planned_counts().additions, nnz as u64);
            prop_assert_eq!(build_plan(&qm), plan);
        }

        #[test]
        fn plan_matches_oracle(
            qm in quantized_strategy(),
            seed in prop::collection::vec(-100.0f64..100.0, 10),
        ) {
            let x = &seed[..qm.dim()];
            let plan = build_plan(&qm);
            let (fast, fc) = apply(&plan, x).unwrap();
            let (slow, sc) = apply_naive_quantized(&qm, x).unwrap();
            prop_assert_eq!(
                fast.iter().map(|v| v.to_bits()).collect::<Vec<_>>(),
                slow.iter().map(|v| v.to_bits()).collect::<Vec<_>>()
            );
            prop_assert_eq!(fc, plan.planned_counts());
            prop_assert!(fc.multiplications <= sc.multiplications);
            prop_assert_eq!(fc.additions, sc.additions);
            let n2 = (qm.dim() * qm.dim()) as u64;
            prop_assert!(sc.multiplications <= n2);
        }
    }
}
