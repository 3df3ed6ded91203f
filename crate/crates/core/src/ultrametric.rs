//! The ultra-metric on the `d`-adic integers induced by a solenoid function.
//!
//! Geometrically, `|u|_s(a, b)` is the length of the deepest cylinder the two
//! words share, measured in the grid realized from `s`. The closed-form
//! series over partial digit sums is kept as a diagnostic only: evaluated as
//! printed it does not depend on the agreement depth for constant `s`.

use crate::dadic::{agreement_depth, Agreement, DadicWord};
use crate::math::checked_pow;
use crate::solenoid::SolenoidTable;
use crate::tiling::{realize_levels, PartitionLevels, DEFAULT_CONSISTENCY_TOLERANCE};
use crate::{Error, Result};

#[derive(Clone, Debug)]
pub struct UltraMetricEvaluator {
    table: SolenoidTable,
    realized: PartitionLevels,
    max_depth: usize,
}

/// A metric value; `identical` marks pairs that agree on every available digit.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct MetricValue {
    pub value: f64,
    pub agreement: Agreement,
    pub identical: bool,
}

impl UltraMetricEvaluator {
    pub fn new(table: SolenoidTable, max_depth: usize) -> Result<Self> {
        Self::with_tolerance(table, max_depth, DEFAULT_CONSISTENCY_TOLERANCE)
    }

    /// As [`Self::new`] with an explicit cross-level consistency tolerance.
    pub fn with_tolerance(table: SolenoidTable, max_depth: usize, tolerance: f64) -> Result<Self> {
        let realized = realize_levels(&table, max_depth, tolerance)?;
        Ok(Self { table, realized, max_depth })
    }

    pub fn table(&self) -> &SolenoidTable {
        &self.table
    }

    pub fn realized(&self) -> &PartitionLevels {
        &self.realized
    }

    pub fn max_depth(&self) -> usize {
        self.max_depth
    }

    pub fn degree(&self) -> u32 {
        self.table.degree()
    }

    /// Normalized length of the level-`depth` interval addressed by `w`.
    pub fn cylinder_length(&self, w: &DadicWord) -> Result<f64> {
        if w.degree() != self.degree() {
            return Err(Error::DegreeMismatch(w.degree(), self.degree()));
        }
        let depth = w.depth();
        if depth > self.max_depth {
            return Err(Error::DepthExceeded { depth, max: self.max_depth });
        }
        let position = w.cylinder_position().ok_or(Error::DepthExceeded { depth, max: self.max_depth })?;
        self.realized
            .length(depth, position as usize + 1)
            .ok_or(Error::DepthExceeded { depth, max: self.max_depth })
    }

    /// `inf_{0 <= i <= n} |I_{a_i ... a_0}|` where `n` is the agreement depth;
    /// the level-0 diameter 1 for disjoint words and 0 for identical ones.
    pub fn u_metric(&self, a: &DadicWord, b: &DadicWord) -> Result<MetricValue> {
        let agreement = agreement_depth(a, b)?;
        let value = match agreement {
            Agreement::Disjoint => 1.0,
            Agreement::Identical(_) => 0.0,
            Agreement::Prefix(n) => {
                if n + 1 > self.max_depth {
                    return Err(Error::DepthExceeded { depth: n + 1, max: self.max_depth });
                }
                let word = a.padded(n + 1);
                let mut inf = f64::INFINITY;
                for i in 0..=n {
                    inf = inf.min(self.cylinder_length(&word.truncated(i + 1))?);
                }
                inf
            }
        };
        Ok(MetricValue { value, agreement, identical: matches!(agreement, Agreement::Identical(_)) })
    }
}

/// Partial digit sums `A_i = sum_{m<=i} a_m d^m` and `E_i = sum_{m<=i} (d-1) d^m`.
fn partial_sums(w: &DadicWord, i: usize) -> (usize, usize) {
    let d = w.degree() as usize;
    let mut a_sum = 0usize;
    let mut power = 1usize;
    for m in 0..=i {
        a_sum += w.digits().get(m).copied().unwrap_or(0) as usize * power;
        power *= d;
    }
    (a_sum, power - 1)
}

/// One term of the series for prefix depth `i`:
/// `1 + sum_{j=A_i}^{E_i} prod_{l=A_i}^{j} s(l) + sum_{j=0}^{A_i-1} prod_{l=j}^{A_i-1} s(l)`.
pub fn series_term(t: &SolenoidTable, w: &DadicWord, i: usize) -> Result<f64> {
    let (a_i, e_i) = partial_sums(w, i);
    if e_i > t.max_index() {
        return Err(Error::IndexOutOfRange { index: e_i, limit: t.max_index() });
    }
    let s = t.values();
    let mut forward = 0.0;
    let mut run = 1.0;
    for &v in &s[a_i..=e_i] {
        run *= v;
        forward += run;
    }
    let mut backward = 0.0;
    let mut run = 1.0;
    for &v in s[..a_i].iter().rev() {
        run *= v;
        backward += run;
    }
    Ok(1.0 + forward + backward)
}

/// The printed series form of the ultra-metric, evaluated verbatim (infimum
/// over prefix depths `0..=n`).
pub fn u_metric_series_diagnostic(t: &SolenoidTable, a: &DadicWord, b: &DadicWord) -> Result<f64> {
    let n = match agreement_depth(a, b)? {
        Agreement::Disjoint => return Ok(f64::NAN),
        Agreement::Prefix(n) => n,
        Agreement::Identical(depth) => depth.saturating_sub(1),
    };
    let mut inf = f64::INFINITY;
    for i in 0..=n {
        inf = inf.min(series_term(t, a, i)?);
    }
    Ok(inf)
}

/// All words of a given depth, in integer order.
pub fn words_at_depth(degree: u32, depth: usize) -> Result<alloc::vec::Vec<DadicWord>> {
    let count = checked_pow(degree, depth).ok_or(Error::DepthExceeded { depth, max: 63 })?;
    (0..count).map(|k| DadicWord::from_integer(k, degree, depth)).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::solenoid::Provenance;
    use alloc::vec;
    use approx::assert_abs_diff_eq;

    fn uniform(depth: usize) -> UltraMetricEvaluator {
        let t = SolenoidTable::constant(2, (1 << depth) - 1, 1.0).unwrap();
        UltraMetricEvaluator::new(t, depth).unwrap()
    }

    fn w(k: u64, depth: usize) -> DadicWord {
        DadicWord::from_integer(k, 2, depth).unwrap()
    }

    #[test]
    fn cylinder_examples() {
        let ev = uniform(4);
        assert_eq!(ev.cylinder_length(&w(0, 1)).unwrap(), 0.5);
        assert_eq!(ev.cylinder_length(&w(0, 2)).unwrap(), 0.25);
        assert!(matches!(ev.cylinder_length(&w(0, 5)), Err(Error::DepthExceeded { .. })));
    }

    #[test]
    fn metric_examples() {
        let ev = uniform(4);
        assert_eq!(ev.u_metric(&w(0, 4), &w(2, 4)).unwrap().value, 0.5);
        assert_eq!(ev.u_metric(&w(0, 4), &w(4, 4)).unwrap().value, 0.25);
        assert_eq!(ev.u_metric(&w(0, 4), &w(1, 4)).unwrap().value, 1.0);
        let same = ev.u_metric(&w(3, 4), &w(3, 2)).unwrap();
        assert!(same.identical && same.value == 0.0);
    }

    #[test]
    fn nonuniform_cylinder_reads_the_realized_grid() {
        let vals: Vec<f64> = (0..16).map(|k| 1.0 + 0.05 * (k % 3) as f64).collect();
        let t = SolenoidTable::new(2, vals.clone(), Provenance::Manual).unwrap();
        let ev = UltraMetricEvaluator::with_tolerance(t, 2, f64::INFINITY).unwrap();
        // Word (a_0, a_1) = (1, 0) addresses the third quarter.
        let raw = [1.0, vals[1], vals[1] * vals[2], vals[1] * vals[2] * vals[3]];
        let total: f64 = raw.iter().sum();
        let word = DadicWord::new(2, vec![1, 0]).unwrap();
        assert_abs_diff_eq!(ev.cylinder_length(&word).unwrap(), raw[2] / total, epsilon = 1e-15);
        // 1 = (1,0,0,...) and 5 = (1,0,1,...) share that cylinder.
        assert_abs_diff_eq!(ev.u_metric(&w(1, 4), &w(5, 4)).unwrap().value, raw[2] / total, epsilon = 1e-15);
    }

    #[test]
    fn series_diagnostic_for_constant_table() {
        let t = SolenoidTable::constant(2, 255, 1.0).unwrap();
        let ev = uniform(7);
        for (a, b) in [(0u64, 2u64), (3, 7), (0, 64), (5, 101)] {
            assert_eq!(u_metric_series_diagnostic(&t, &w(a, 8), &w(b, 8)).unwrap(), 3.0);
        }
        for i in 0..7 {
            let word = w(0, 8);
            let term = series_term(&t, &word, i).unwrap();
            assert_eq!(term, 1.0 + (1u64 << (i + 1)) as f64);
            let cyl = ev.cylinder_length(&word.truncated(i + 1)).unwrap();
            assert_abs_diff_eq!(term, 1.0 + 1.0 / cyl, epsilon = 1e-12);
        }
    }
}
