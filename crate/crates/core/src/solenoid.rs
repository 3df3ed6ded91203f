//! Solenoid functions represented by their values on the integers.
//!
//! A [`SolenoidTable`] holds `s(0), ..., s(K)`. For `k >= 1` the value `s(k)`
//! is the ratio `|I_{k+1}| / |I_k|` of consecutive intervals of the fixed
//! grid; `s(0)` is the wraparound ratio across the base point and takes part
//! in no matching constraint.

use alloc::collections::BTreeMap;
use alloc::vec::Vec;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::dadic::DadicWord;
use crate::math::{self, checked_pow};
use crate::ultrametric::UltraMetricEvaluator;
use crate::{Error, Result};

/// Where a table came from.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Provenance {
    Generated,
    Extracted,
    Manual,
}

impl Provenance {
    pub fn as_str(&self) -> &'static str {
        match self {
            Provenance::Generated => "generated",
            Provenance::Extracted => "extracted",
            Provenance::Manual => "manual",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s.trim() {
            "generated" => Some(Provenance::Generated),
            "extracted" => Some(Provenance::Extracted),
            "manual" => Some(Provenance::Manual),
            _ => None,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct SolenoidTable {
    degree: u32,
    values: Vec<f64>,
    provenance: Provenance,
    lo: f64,
    hi: f64,
}

impl SolenoidTable {
    /// Validates positivity and finiteness and records the value bounds.
    pub fn new(degree: u32, values: Vec<f64>, provenance: Provenance) -> Result<Self> {
        if degree < 2 {
            return Err(Error::InvalidDegree(degree));
        }
        if values.is_empty() {
            return Err(Error::IndexOutOfRange { index: 0, limit: 0 });
        }
        let mut lo = f64::INFINITY;
        let mut hi = 0.0f64;
        for (index, &v) in values.iter().enumerate() {
            if !v.is_finite() {
                return Err(Error::NonFinite { index });
            }
            if v <= 0.0 {
                return Err(Error::NonPositive { index });
            }
            lo = lo.min(v);
            hi = hi.max(v);
        }
        Ok(Self { degree, values, provenance, lo, hi })
    }

    /// `s(k) = value` for `0 <= k <= max_index`.
    pub fn constant(degree: u32, max_index: usize, value: f64) -> Result<Self> {
        Self::new(degree, alloc::vec![value; max_index + 1], Provenance::Manual)
    }

    pub fn degree(&self) -> u32 {
        self.degree
    }

    /// The largest index `K` with a stored value.
    pub fn max_index(&self) -> usize {
        self.values.len() - 1
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn provenance(&self) -> Provenance {
        self.provenance
    }

    /// `(lo, hi)` with `lo <= s(k) <= hi` for every stored `k`.
    pub fn bounds(&self) -> (f64, f64) {
        (self.lo, self.hi)
    }

    pub fn is_constant(&self) -> bool {
        self.lo == self.hi
    }

    pub fn get(&self, k: usize) -> Result<f64> {
        self.values
            .get(k)
            .copied()
            .ok_or(Error::IndexOutOfRange { index: k, limit: self.max_index() })
    }

    /// Every value multiplied by `factor`.
    pub fn scaled(&self, factor: f64) -> Result<Self> {
        Self::new(self.degree, self.values.iter().map(|v| v * factor).collect(), self.provenance)
    }

    /// Largest `a` for which the matching condition can be evaluated.
    pub fn max_matching_index(&self) -> usize {
        let d = self.degree as usize;
        ((self.max_index() + 1) / d).saturating_sub(1)
    }

    /// Right-hand side of the matching condition at `a`: the ratio of the
    /// amalgamated fine intervals `d(a-1)+1 ..= da` and `da+1 ..= d(a+1)`.
    pub fn matching_rhs(&self, a: usize) -> Result<f64> {
        let d = self.degree as usize;
        let top = d * a + d - 1;
        if a == 0 || top > self.max_index() {
            return Err(Error::IndexOutOfRange { index: a, limit: self.max_matching_index() });
        }
        let s = &self.values;
        let lead: f64 = (1..d).map(|i| s[d * a - i]).product();
        let mut numerator = 0.0;
        let mut run = 1.0;
        for l in 0..d {
            run *= s[d * a + l];
            numerator += run;
        }
        // sum_{j=1}^{d-1} prod_{l=j}^{d-1} s(da - l), accumulated from j = d-1 down.
        let mut denominator = 1.0;
        let mut run = 1.0;
        for l in (1..d).rev() {
            run *= s[d * a - l];
            denominator += run;
        }
        Ok(lead * numerator / denominator)
    }

    /// `|s(a) - RHS(a)|`.
    pub fn matching_residual(&self, a: usize) -> Result<f64> {
        let rhs = self.matching_rhs(a)?;
        Ok((self.values[a] - rhs).abs())
    }

    /// Residuals for every valid `a` (`1..=max_matching_index`).
    pub fn matching_residuals(&self) -> Vec<f64> {
        (1..=self.max_matching_index())
            .map(|a| self.matching_residual(a).unwrap_or(f64::NAN))
            .collect()
    }

    /// Sup of the matching residuals over `1 <= a <= min(limit, max valid)`.
    pub fn max_matching_residual(&self, limit: Option<usize>) -> f64 {
        let upper = limit.map_or(self.max_matching_index(), |l| l.min(self.max_matching_index()));
        (1..=upper)
            .filter_map(|a| self.matching_residual(a).ok())
            .fold(0.0, f64::max)
    }

    /// Solenoid cross-ratio function `(1 + s(x)) (1 + 1/s(x+1))`.
    pub fn cross_ratio(&self, x: usize) -> Result<f64> {
        if x >= self.max_index() {
            return Err(Error::IndexOutOfRange { index: x, limit: self.max_index() - 1 });
        }
        Ok((1.0 + self.values[x]) * (1.0 + 1.0 / self.values[x + 1]))
    }

    /// The cross-ratio function on `0..K`.
    pub fn cross_ratio_values(&self) -> Vec<f64> {
        (0..self.max_index()).map(|x| (1.0 + self.values[x]) * (1.0 + 1.0 / self.values[x + 1])).collect()
    }

    /// Number of leading digits every word of that depth can address:
    /// the largest `n` with `d^n - 1 <= K`.
    pub fn word_depth(&self) -> usize {
        let mut n = 0;
        while checked_pow(self.degree, n + 1).is_some_and(|p| p - 1 <= self.max_index() as u64) {
            n += 1;
        }
        n
    }
}

/// Builds a degree-2 table from `a_1` and the even entries `a_2, ..., a_{2N}`
/// by the odd-index recursion
/// `a_{2n+1} = (a_n / a_{2n}) (1 + 1/a_{2n-1}) - 1`.
///
/// The result has `K = 2N - 1`; `s(0)` is `wraparound` (default `a_1`).
pub fn generate_from_free_data(a1: f64, evens: &[f64], wraparound: Option<f64>) -> Result<SolenoidTable> {
    if !(a1 > 0.0) {
        return Err(Error::NonPositive { index: 1 });
    }
    if let Some(i) = evens.iter().position(|&v| !(v > 0.0)) {
        return Err(Error::NonPositive { index: 2 * (i + 1) });
    }
    if evens.is_empty() {
        return Err(Error::IndexOutOfRange { index: 2, limit: 1 });
    }
    let big_n = evens.len();
    let mut a = alloc::vec![0.0; 2 * big_n];
    a[1] = a1;
    for (i, &e) in evens.iter().enumerate() {
        let idx = 2 * (i + 1);
        if idx < a.len() {
            a[idx] = e;
        }
    }
    for n in 1..big_n {
        let odd = (a[n] / a[2 * n]) * (1.0 + 1.0 / a[2 * n - 1]) - 1.0;
        if !(odd > 0.0) {
            return Err(Error::NonPositive { index: 2 * n + 1 });
        }
        a[2 * n + 1] = odd;
    }
    // a_{2N+1} is already forced by the data; the table stops short of it
    // but the data must not leave the positive cone there either.
    let next = (a[big_n] / evens[big_n - 1]) * (1.0 + 1.0 / a[2 * big_n - 1]) - 1.0;
    if !(next > 0.0) {
        return Err(Error::NonPositive { index: 2 * big_n + 1 });
    }
    a[0] = wraparound.unwrap_or(a1);
    if !(a[0] > 0.0) {
        return Err(Error::NonPositive { index: 0 });
    }
    // a_{2N} itself does not fit below K = 2N - 1.
    SolenoidTable::new(2, a, Provenance::Generated)
}

/// Result of an envelope-style modulus fit.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ModulusFit {
    /// Fitted exponent (`mu` for quasiperiodicity, `alpha` for Hölder fits).
    pub exponent: f64,
    pub constant: f64,
    /// RMS residual of the log-log fit.
    pub residual: f64,
    pub pairs_used: usize,
}

/// Per-level spreads `D_i = max |s(j) - s(k)|` over `d^i | (j - k)`.
pub fn quasiperiodicity_spreads(t: &SolenoidTable) -> Vec<f64> {
    let k_max = t.max_index();
    let mut out = Vec::new();
    let mut i = 0;
    while let Some(step) = checked_pow(t.degree(), i) {
        if step as usize > k_max {
            break;
        }
        let step = step as usize;
        let spread = (0..step)
            .map(|r| {
                let (lo, hi) = t.values()[r..]
                    .iter()
                    .step_by(step)
                    .fold((f64::INFINITY, 0.0f64), |(lo, hi), &v| (lo.min(v), hi.max(v)));
                hi - lo
            })
            .fold(0.0, f64::max);
        out.push(spread);
        i += 1;
    }
    out
}

/// Fits `D_i ~ C mu^i`. A table whose spreads all vanish is
/// [`Error::Degenerate`]; a single nonzero level gives `mu = 0`.
pub fn quasiperiodicity_modulus(t: &SolenoidTable) -> Result<ModulusFit> {
    let d = t.degree() as usize;
    if t.max_index() < d * d {
        return Err(Error::IndexOutOfRange { index: t.max_index(), limit: d * d });
    }
    let spreads = quasiperiodicity_spreads(t);
    let points: Vec<(f64, f64)> = spreads
        .iter()
        .enumerate()
        .filter(|(_, &v)| v > 0.0)
        .map(|(i, &v)| (i as f64, math::ln(v)))
        .collect();
    match points.len() {
        0 => Err(Error::Degenerate),
        1 => Ok(ModulusFit { exponent: 0.0, constant: math::exp(points[0].1), residual: 0.0, pairs_used: 1 }),
        _ => {
            let fit = math::fit_line(&points).ok_or(Error::Degenerate)?;
            Ok(ModulusFit {
                exponent: math::exp(fit.slope).min(1.0),
                constant: math::exp(fit.intercept),
                residual: fit.rms_residual,
                pairs_used: points.len(),
            })
        }
    }
}

/// Value of the solenoid function at a word, with a truncation bound.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct WordValue {
    pub value: f64,
    /// Zero when the word is an integer inside the table.
    pub bound: f64,
    pub index: usize,
}

/// Evaluates `s` at a (possibly deep) word by truncating it to the depth the
/// table covers, bounding the error by the fitted quasiperiodicity modulus.
pub fn evaluate_at_word(t: &SolenoidTable, w: &DadicWord) -> Result<WordValue> {
    if w.degree() != t.degree() {
        return Err(Error::DegreeMismatch(w.degree(), t.degree()));
    }
    if let Some(k) = w.integer_value().filter(|&k| k <= t.max_index() as u64) {
        return Ok(WordValue { value: t.values()[k as usize], bound: 0.0, index: k as usize });
    }
    let depth = t.word_depth();
    let k = w
        .truncated(depth)
        .integer_value()
        .filter(|&k| k <= t.max_index() as u64)
        .ok_or(Error::IndexOutOfRange { index: usize::MAX, limit: t.max_index() })? as usize;
    let bound = match quasiperiodicity_modulus(t) {
        Ok(fit) => fit.constant * math::powf(fit.exponent, depth as f64),
        Err(Error::Degenerate) => 0.0,
        Err(e) => return Err(e),
    };
    Ok(WordValue { value: t.values()[k], bound, index: k })
}

/// How pairs are chosen for Hölder fits.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct PairSampling {
    /// Enumerate all pairs when there are at most this many; otherwise sample.
    pub max_pairs: usize,
    pub seed: u64,
}

impl Default for PairSampling {
    fn default() -> Self {
        Self { max_pairs: 1 << 20, seed: 0x5eed }
    }
}

/// Per-bucket envelope point of a Hölder fit.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct EnvelopeBucket {
    pub key: i32,
    pub metric: f64,
    pub difference: f64,
}

/// Fits `|f(x) - f(y)| <= C u(x, y)^alpha` for `f` given by `values` on the
/// integers, using per-dyadic-bucket maxima of the pair differences.
pub fn holder_fit_values(
    values: &[f64],
    metric: &UltraMetricEvaluator,
    sampling: PairSampling,
) -> Result<(ModulusFit, Vec<EnvelopeBucket>)> {
    let depth = metric.max_depth();
    let reach = checked_pow(metric.degree(), depth).map_or(usize::MAX, |p| p as usize);
    let n = values.len().min(reach);
    if n < 2 {
        return Err(Error::Degenerate);
    }
    let words: Vec<DadicWord> = (0..n)
        .map(|k| DadicWord::from_integer(k as u64, metric.degree(), depth))
        .collect::<Result<_>>()?;
    let mut buckets: BTreeMap<i32, (f64, f64)> = BTreeMap::new();
    let mut used = 0usize;
    let mut visit = |x: usize, y: usize| -> Result<()> {
        let u = metric.u_metric(&words[x], &words[y])?.value;
        if u > 0.0 {
            let key = math::floor(math::log2(u)) as i32;
            let diff = (values[x] - values[y]).abs();
            let e = buckets.entry(key).or_insert((0.0, 0.0));
            e.0 = e.0.max(u);
            e.1 = e.1.max(diff);
            used += 1;
        }
        Ok(())
    };
    let total = n * (n - 1) / 2;
    if total <= sampling.max_pairs {
        for x in 0..n {
            for y in (x + 1)..n {
                visit(x, y)?;
            }
        }
    } else {
        let mut rng = ChaCha8Rng::seed_from_u64(sampling.seed);
        for _ in 0..sampling.max_pairs {
            let x = rng.random_range(0..n);
            let mut y = rng.random_range(0..n - 1);
            if y >= x {
                y += 1;
            }
            visit(x, y)?;
        }
    }
    let envelope: Vec<EnvelopeBucket> = buckets
        .into_iter()
        .map(|(key, (metric, difference))| EnvelopeBucket { key, metric, difference })
        .collect();
    let points: Vec<(f64, f64)> = envelope
        .iter()
        .filter(|b| b.difference > 0.0)
        .map(|b| (math::ln(b.metric), math::ln(b.difference)))
        .collect();
    if points.is_empty() {
        return Err(Error::Degenerate);
    }
    let fit = math::fit_line(&points).ok_or(Error::Degenerate)?;
    Ok((
        ModulusFit {
            exponent: fit.slope,
            constant: math::exp(fit.intercept),
            residual: fit.rms_residual,
            pairs_used: used,
        },
        envelope,
    ))
}

/// Hölder fit of the table itself under the ultra-metric of `metric`.
pub fn holder_modulus_fit(t: &SolenoidTable, metric: &UltraMetricEvaluator, sampling: PairSampling) -> Result<ModulusFit> {
    if t.is_constant() {
        return Err(Error::Degenerate);
    }
    holder_fit_values(t.values(), metric, sampling).map(|(fit, _)| fit)
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    fn table(values: &[f64]) -> SolenoidTable {
        SolenoidTable::new(2, values.to_vec(), Provenance::Manual).unwrap()
    }

    #[test]
    fn constant_table_is_a_fixed_point() {
        let t = SolenoidTable::constant(2, 64, 1.0).unwrap();
        assert_eq!(t.matching_rhs(1).unwrap(), 1.0);
        assert!(t.matching_residuals().iter().all(|&r| r == 0.0));
        assert!(t.cross_ratio_values().iter().all(|&c| c == 4.0));
    }

    #[test]
    fn matching_examples() {
        let t = table(&[1.2, 1.2, 1.0, 1.2]);
        assert_abs_diff_eq!(t.matching_rhs(1).unwrap(), 1.2, epsilon = 1e-15);
        assert_abs_diff_eq!(t.matching_residual(1).unwrap(), 0.0, epsilon = 1e-15);
        let perturbed = table(&[1.2, 1.2, 1.0, 1.3]);
        // 1.2 * 2.3 / 2.2
        assert_abs_diff_eq!(perturbed.matching_rhs(1).unwrap(), 1.2 * 2.3 / 2.2, epsilon = 1e-15);
        assert_abs_diff_eq!(perturbed.matching_residual(1).unwrap(), 0.054_545_454_545_454_5, epsilon = 1e-12);
    }

    #[test]
    fn matching_preconditions() {
        let t = table(&[1.0, 1.0, 1.0, 1.0]);
        assert!(matches!(t.matching_rhs(0), Err(Error::IndexOutOfRange { .. })));
        assert!(matches!(t.matching_rhs(2), Err(Error::IndexOutOfRange { .. })));
        assert_eq!(t.max_matching_index(), 1);
    }

    #[test]
    fn general_degree_matching_against_direct_lengths() {
        // Lengths of a grid generated by arbitrary ratios; amalgamate by hand.
        let d = 3usize;
        let s: Vec<f64> = (0..30).map(|k| 1.0 + 0.1 * math::sin(k as f64)).collect();
        let t = SolenoidTable::new(3, s.clone(), Provenance::Manual).unwrap();
        let mut len = vec![1.0f64];
        for k in 1..s.len() {
            let prev = len[k - 1];
            len.push(prev * s[k]);
        }
        // len[m] = |I_{m+1}|; coarse interval a covers fine d(a-1)+1 ..= da.
        let coarse = |a: usize| -> f64 { ((d * (a - 1) + 1)..=(d * a)).map(|m| len[m - 1]).sum() };
        for a in 1..=t.max_matching_index() {
            let direct = coarse(a + 1) / coarse(a);
            assert_abs_diff_eq!(t.matching_rhs(a).unwrap(), direct, epsilon = 1e-13);
        }
    }

    #[test]
    fn generation_examples() {
        let constant = generate_from_free_data(1.0, &[1.0; 16], None).unwrap();
        assert!(constant.values().iter().all(|&v| v == 1.0));
        assert_eq!(constant.max_index(), 31);
        assert_eq!(generate_from_free_data(1.0, &[2.0, 1.0], None), Err(Error::NonPositive { index: 3 }));
        assert_eq!(generate_from_free_data(1.0, &[2.0], None), Err(Error::NonPositive { index: 3 }));
        let t = generate_from_free_data(1.2, &[1.0, 1.0], None).unwrap();
        assert_abs_diff_eq!(t.values()[3], 1.2, epsilon = 1e-15);
        assert_eq!(t.values()[0], 1.2);
        assert_eq!(generate_from_free_data(1.0, &[1.0, -1.0], None), Err(Error::NonPositive { index: 4 }));
    }

    #[test]
    fn cross_ratio_examples() {
        let t = table(&[1.2, 1.0, 2.0]);
        assert_abs_diff_eq!(t.cross_ratio(0).unwrap(), 4.4, epsilon = 1e-15);
        assert_abs_diff_eq!(t.cross_ratio(1).unwrap(), 3.0, epsilon = 1e-15);
        assert!(matches!(t.cross_ratio(2), Err(Error::IndexOutOfRange { .. })));
    }

    #[test]
    fn matching_is_not_scale_invariant() {
        let t = generate_from_free_data(1.1, &[0.9, 1.05, 1.0, 0.95], None).unwrap();
        assert!(t.max_matching_residual(None) < 1e-14);
        assert!(t.scaled(1.3).unwrap().max_matching_residual(None) > 1e-3);
    }

    #[test]
    fn quasiperiodicity_examples() {
        let constant = SolenoidTable::constant(2, 64, 1.0).unwrap();
        assert_eq!(quasiperiodicity_modulus(&constant), Err(Error::Degenerate));
        // Parity is not 3-adically continuous, so the spread never shrinks.
        let parity: Vec<f64> = (0..=200).map(|j| 1.0 + 0.1 * (j % 2) as f64).collect();
        let t = SolenoidTable::new(3, parity, Provenance::Manual).unwrap();
        let spreads = quasiperiodicity_spreads(&t);
        assert!(spreads.iter().all(|&d| (d - 0.1).abs() < 1e-15));
        assert_abs_diff_eq!(quasiperiodicity_modulus(&t).unwrap().exponent, 1.0, epsilon = 1e-12);
        // A geometric example: s(j) = 1 + 0.5^{v(j)}-style decay through digits.
        let vals: Vec<f64> = (0..256u32)
            .map(|j| 1.0 + (0..8).map(|i| ((j >> i) & 1) as f64 * 0.3 * 0.5f64.powi(i)).sum::<f64>())
            .collect();
        let g = SolenoidTable::new(2, vals, Provenance::Manual).unwrap();
        let fit = quasiperiodicity_modulus(&g).unwrap();
        assert!(fit.exponent < 0.6 && fit.exponent > 0.4, "{fit:?}");
    }

    #[test]
    fn evaluate_exact_and_truncated() {
        let t = SolenoidTable::constant(2, 63, 1.0).unwrap();
        let deep = DadicWord::new(2, vec![1; 20]).unwrap();
        let v = evaluate_at_word(&t, &deep).unwrap();
        assert_eq!((v.value, v.bound, v.index), (1.0, 0.0, 63));
        let vals: Vec<f64> = (0..64).map(|k| 1.0 + 0.01 * k as f64).collect();
        let t = SolenoidTable::new(2, vals, Provenance::Manual).unwrap();
        let five = DadicWord::from_integer(5, 2, 30).unwrap();
        let v = evaluate_at_word(&t, &five).unwrap();
        assert_eq!((v.value, v.bound), (t.values()[5], 0.0));
        let v = evaluate_at_word(&t, &deep).unwrap();
        assert_eq!(v.index, 63);
        assert!(v.bound > 0.0);
    }

    proptest! {
        #[test]
        fn generated_tables_satisfy_matching(
            a1 in 0.9f64..1.1,
            evens in proptest::collection::vec(0.9f64..1.1, 2..12),
        ) {
            if let Ok(t) = generate_from_free_data(a1, &evens, None) {
                for a in 1..=t.max_matching_index() {
                    prop_assert!(t.matching_residual(a).unwrap() <= 1e-13 * t.values()[a].max(1.0));
                }
            }
        }
    }
}
