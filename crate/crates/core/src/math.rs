//! Elementary functions, compensated summation and least-squares lines.
//!
//! Transcendental functions go through `libm` so results are identical with
//! and without `std`.

use alloc::vec::Vec;

#[inline]
pub fn ln(x: f64) -> f64 {
    libm::log(x)
}

#[inline]
pub fn ln_1p(x: f64) -> f64 {
    libm::log1p(x)
}

#[inline]
pub fn exp(x: f64) -> f64 {
    libm::exp(x)
}

#[inline]
pub fn exp_m1(x: f64) -> f64 {
    libm::expm1(x)
}

#[inline]
pub fn sin(x: f64) -> f64 {
    libm::sin(x)
}

#[inline]
pub fn cos(x: f64) -> f64 {
    libm::cos(x)
}

#[inline]
pub fn powf(x: f64, y: f64) -> f64 {
    libm::pow(x, y)
}

#[inline]
pub fn sqrt(x: f64) -> f64 {
    libm::sqrt(x)
}

#[inline]
pub fn floor(x: f64) -> f64 {
    libm::floor(x)
}

#[inline]
pub fn round(x: f64) -> f64 {
    libm::round(x)
}

#[inline]
pub fn log2(x: f64) -> f64 {
    libm::log2(x)
}

/// `d^n` as `u64`, or `None` on overflow.
pub fn checked_pow(d: u32, n: usize) -> Option<u64> {
    let mut acc: u64 = 1;
    for _ in 0..n {
        acc = acc.checked_mul(u64::from(d))?;
    }
    Some(acc)
}

/// Neumaier's variant of Kahan summation.
#[derive(Clone, Copy, Debug, Default)]
pub struct CompensatedSum {
    sum: f64,
    compensation: f64,
}

impl CompensatedSum {
    pub fn new() -> Self {
        Self::default()
    }

    #[inline]
    pub fn add(&mut self, value: f64) {
        let t = self.sum + value;
        if self.sum.abs() >= value.abs() {
            self.compensation += (self.sum - t) + value;
        } else {
            self.compensation += (value - t) + self.sum;
        }
        self.sum = t;
    }

    #[inline]
    pub fn value(&self) -> f64 {
        self.sum + self.compensation
    }
}

impl core::iter::FromIterator<f64> for CompensatedSum {
    fn from_iter<I: IntoIterator<Item = f64>>(iter: I) -> Self {
        let mut acc = CompensatedSum::new();
        for v in iter {
            acc.add(v);
        }
        acc
    }
}

/// Compensated sum of an iterator.
pub fn sum<I: IntoIterator<Item = f64>>(iter: I) -> f64 {
    iter.into_iter().collect::<CompensatedSum>().value()
}

/// Ordinary least-squares line `y = intercept + slope * x`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LineFit {
    pub slope: f64,
    pub intercept: f64,
    /// Root mean square of the residuals.
    pub rms_residual: f64,
    /// Standard error of the slope; `NaN` with fewer than three points.
    pub slope_std_error: f64,
    pub points: usize,
}

/// Fits a line through `(x, y)` pairs. Returns `None` for fewer than two
/// points or when every `x` coincides.
pub fn fit_line(points: &[(f64, f64)]) -> Option<LineFit> {
    let n = points.len();
    if n < 2 {
        return None;
    }
    let nf = n as f64;
    let mean_x = sum(points.iter().map(|p| p.0)) / nf;
    let mean_y = sum(points.iter().map(|p| p.1)) / nf;
    let sxx = sum(points.iter().map(|p| (p.0 - mean_x) * (p.0 - mean_x)));
    let sxy = sum(points.iter().map(|p| (p.0 - mean_x) * (p.1 - mean_y)));
    if sxx <= 0.0 {
        return None;
    }
    let slope = sxy / sxx;
    let intercept = mean_y - slope * mean_x;
    let sse = sum(points.iter().map(|p| {
        let r = p.1 - (intercept + slope * p.0);
        r * r
    }));
    let slope_std_error = if n > 2 {
        sqrt(sse / (nf - 2.0) / sxx)
    } else {
        f64::NAN
    };
    Some(LineFit {
        slope,
        intercept,
        rms_residual: sqrt(sse / nf),
        slope_std_error,
        points: n,
    })
}

/// Prefix sums `0, x0, x0 + x1, ...` (length `values.len() + 1`), compensated.
pub fn prefix_sums(values: &[f64]) -> Vec<f64> {
    let mut out = Vec::with_capacity(values.len() + 1);
    let mut acc = CompensatedSum::new();
    out.push(0.0);
    for &v in values {
        acc.add(v);
        out.push(acc.value());
    }
    out
}

/// Upper quantile by nearest rank on a scratch copy.
pub fn quantile(values: &[f64], q: f64) -> f64 {
    if values.is_empty() {
        return f64::NAN;
    }
    let mut sorted: Vec<f64> = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    let rank = libm::ceil(q * sorted.len() as f64) as usize;
    sorted[rank.clamp(1, sorted.len()) - 1]
}
