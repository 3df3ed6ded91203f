//! Expanding circle maps of degree `d` and their Markov partitions.
//!
//! Maps are handled through their lift `F: R -> R`, strictly increasing with
//! `F(x + 1) = F(x) + d`. The level-`n` partition consists of the preimages
//! `f^{-n}(p)` of a fixed point `p`, ordered counterclockwise from `p` and
//! stored as offsets from `p`.

use alloc::vec::Vec;
use core::f64::consts::PI;

use crate::math::{self, checked_pow};
use crate::solenoid::{Provenance, SolenoidTable};
use crate::tiling::{realize_level, PartitionLevels};
use crate::{Error, Result};

/// Default cap on the number of intervals of a partition level.
pub const DEFAULT_INTERVAL_CAP: u64 = 1 << 20;

/// Default bound on matching residuals accepted by [`realize_map`].
pub const DEFAULT_REALIZE_TOLERANCE: f64 = 1e-3;

/// `amplitude * sin(2 pi harmonic x + phase)`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TrigTerm {
    pub harmonic: u32,
    pub amplitude: f64,
    pub phase: f64,
}

impl TrigTerm {
    pub fn new(harmonic: u32, amplitude: f64) -> Self {
        Self { harmonic, amplitude, phase: 0.0 }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum MapForm {
    /// `x -> d x`.
    Linear,
    /// `x -> d x + sum_k eps_k sin(2 pi k x + phi_k)`.
    TrigPerturbed(Vec<TrigTerm>),
    /// Piecewise linear through the finest level of a realized grid: knot `j`
    /// goes to coarse point `j mod d^{N-1}` plus `floor(j / d^{N-1})`.
    Realized { knots: Vec<f64> },
    /// Piecewise linear through user lift samples on `[0, 1]`.
    Sampled { xs: Vec<f64>, ys: Vec<f64> },
}

#[derive(Clone, Debug, PartialEq)]
pub struct CircleMap {
    degree: u32,
    form: MapForm,
    /// Lower bound on the lift derivative.
    expansion_floor: f64,
    // Lift values at the realized knots, cached.
    knot_values: Vec<f64>,
}

fn interpolate(xs: &[f64], ys: &[f64], x: f64) -> f64 {
    // xs strictly increasing, xs[0] <= x <= xs[last].
    let idx = xs.partition_point(|&k| k <= x).clamp(1, xs.len() - 1);
    let (x0, x1, y0, y1) = (xs[idx - 1], xs[idx], ys[idx - 1], ys[idx]);
    y0 + (x - x0) * ((y1 - y0) / (x1 - x0))
}

fn invert_linear_pieces(xs: &[f64], ys: &[f64], y: f64) -> f64 {
    let idx = ys.partition_point(|&k| k <= y).clamp(1, ys.len() - 1);
    let (x0, x1, y0, y1) = (xs[idx - 1], xs[idx], ys[idx - 1], ys[idx]);
    if y == y0 {
        return x0;
    }
    if y == y1 {
        return x1;
    }
    (x0 + (y - y0) * ((x1 - x0) / (y1 - y0))).clamp(x0, x1)
}

impl CircleMap {
    pub fn linear(degree: u32) -> Result<Self> {
        if degree < 2 {
            return Err(Error::InvalidDegree(degree));
        }
        Ok(Self { degree, form: MapForm::Linear, expansion_floor: f64::from(degree), knot_values: Vec::new() })
    }

    /// Requires `d - 2 pi sum_k k |eps_k| > 1`, which certifies expansion.
    pub fn trig(degree: u32, terms: Vec<TrigTerm>) -> Result<Self> {
        if degree < 2 {
            return Err(Error::InvalidDegree(degree));
        }
        if terms.iter().any(|t| t.harmonic == 0 || !t.amplitude.is_finite() || !t.phase.is_finite()) {
            return Err(Error::InvalidMap("trigonometric terms need harmonic >= 1 and finite coefficients"));
        }
        let floor = f64::from(degree) - 2.0 * PI * terms.iter().map(|t| f64::from(t.harmonic) * t.amplitude.abs()).sum::<f64>();
        if !(floor > 1.0) {
            return Err(Error::InvalidMap("perturbation too large to certify expansion"));
        }
        Ok(Self { degree, form: MapForm::TrigPerturbed(terms), expansion_floor: floor, knot_values: Vec::new() })
    }

    /// `x -> d x + eps sin(2 pi x)`.
    pub fn sine(degree: u32, eps: f64) -> Result<Self> {
        Self::trig(degree, alloc::vec![TrigTerm::new(1, eps)])
    }

    /// Piecewise-linear map through the finest level (left endpoints, starting
    /// at 0) of a nested `d`-grid.
    pub fn realized(degree: u32, finest: &[f64]) -> Result<Self> {
        let levels = PartitionLevels::nested_from_finest(degree, finest)?;
        let depth = levels.depth();
        if depth == 0 {
            return Err(Error::InvalidMap("realized map needs at least one level"));
        }
        let coarse = levels.level(depth - 1).expect("depth >= 1").endpoints();
        let per_branch = coarse.len();
        let mut knots = finest.to_vec();
        knots.push(1.0);
        let values: Vec<f64> = (0..knots.len())
            .map(|j| {
                let wraps = j / per_branch;
                let base = if j % per_branch == 0 { 0.0 } else { coarse[j % per_branch] };
                base + wraps as f64
            })
            .collect();
        let floor = values
            .windows(2)
            .zip(knots.windows(2))
            .map(|(y, x)| (y[1] - y[0]) / (x[1] - x[0]))
            .fold(f64::INFINITY, f64::min);
        if !(floor > 0.0) {
            return Err(Error::InvalidMap("realized map is not increasing"));
        }
        Ok(Self { degree, form: MapForm::Realized { knots }, expansion_floor: floor, knot_values: values })
    }

    /// Piecewise-linear lift through `(xs, ys)` with `xs[0] = 0`, `xs[last] = 1`
    /// and `ys[last] = ys[0] + d`.
    pub fn sampled(degree: u32, xs: Vec<f64>, ys: Vec<f64>) -> Result<Self> {
        if degree < 2 {
            return Err(Error::InvalidDegree(degree));
        }
        if xs.len() < 2 || xs.len() != ys.len() || xs[0] != 0.0 || xs[xs.len() - 1] != 1.0 {
            return Err(Error::InvalidMap("samples must cover [0, 1]"));
        }
        if (ys[ys.len() - 1] - ys[0] - f64::from(degree)).abs() > 1e-12 {
            return Err(Error::InvalidMap("lift must increase by the degree over one turn"));
        }
        if xs.windows(2).any(|w| !(w[0] < w[1])) || ys.windows(2).any(|w| !(w[0] < w[1])) {
            return Err(Error::InvalidMap("samples must be strictly increasing"));
        }
        let floor = ys
            .windows(2)
            .zip(xs.windows(2))
            .map(|(y, x)| (y[1] - y[0]) / (x[1] - x[0]))
            .fold(f64::INFINITY, f64::min);
        Ok(Self { degree, form: MapForm::Sampled { xs, ys }, expansion_floor: floor, knot_values: Vec::new() })
    }

    pub fn degree(&self) -> u32 {
        self.degree
    }

    pub fn form(&self) -> &MapForm {
        &self.form
    }

    pub fn expansion_floor(&self) -> f64 {
        self.expansion_floor
    }

    /// Lift value and, for analytic forms, the derivative.
    fn lift_and_derivative(&self, x: f64) -> (f64, Option<f64>) {
        let d = f64::from(self.degree);
        match &self.form {
            MapForm::Linear => (d * x, Some(d)),
            MapForm::TrigPerturbed(terms) => {
                let mut value = d * x;
                let mut slope = d;
                for t in terms {
                    let k = f64::from(t.harmonic);
                    let angle = 2.0 * PI * k * x + t.phase;
                    value += t.amplitude * math::sin(angle);
                    slope += 2.0 * PI * k * t.amplitude * math::cos(angle);
                }
                (value, Some(slope))
            }
            MapForm::Realized { knots } => (self.periodic(x, |u| interpolate(knots, &self.knot_values, u)), None),
            MapForm::Sampled { xs, ys } => (self.periodic(x, |u| interpolate(xs, ys, u)), None),
        }
    }

    fn periodic(&self, x: f64, on_unit: impl Fn(f64) -> f64) -> f64 {
        if (0.0..=1.0).contains(&x) {
            return on_unit(x);
        }
        let turns = math::floor(x);
        on_unit(x - turns) + turns * f64::from(self.degree)
    }

    /// The lift `F(x)`.
    pub fn lift(&self, x: f64) -> f64 {
        self.lift_and_derivative(x).0
    }

    /// Solves `F(x) = y` for `x` in `[lo, hi]`, where `F(lo) <= y <= F(hi)`.
    fn preimage(&self, y: f64, lo: f64, hi: f64) -> Result<f64> {
        match &self.form {
            MapForm::Linear => Ok((y / f64::from(self.degree)).clamp(lo, hi)),
            MapForm::Realized { knots } if lo >= 0.0 && hi <= 1.0 => Ok(invert_linear_pieces(knots, &self.knot_values, y)),
            MapForm::Sampled { xs, ys } if lo >= 0.0 && hi <= 1.0 => Ok(invert_linear_pieces(xs, ys, y)),
            _ => solve_increasing(|x| self.lift_and_derivative(x), y, lo, hi),
        }
    }

    /// The fixed point continuing `p = 0` of the unperturbed family, in `[0, 1)`.
    pub fn fixed_point(&self) -> Result<f64> {
        let offset = math::round(self.lift(0.0));
        if self.lift(0.0) == offset {
            return Ok(0.0);
        }
        // g(x) = F(x) - x - offset is increasing with slope >= floor - 1 > 0.
        let g = |x: f64| {
            let (v, dv) = self.lift_and_derivative(x);
            (v - x, dv.map(|s| s - 1.0))
        };
        let mut half = 0.5;
        while !(g(-half).0 <= offset && g(half).0 >= offset) {
            half *= 2.0;
            if half > 64.0 {
                return Err(Error::NoConvergence { near: 0.0 });
            }
        }
        let x = solve_increasing(g, offset, -half, half)?;
        let p = x - math::floor(x);
        Ok(if p >= 1.0 { 0.0 } else { p })
    }

    /// Levels `0..=n` of the Markov partition generated by the fixed point.
    ///
    /// Level `n + 1` reuses the level-`n` endpoints bit for bit, and every
    /// new endpoint is solved inside the parent interval containing it.
    pub fn partition(&self, n: usize, cap: u64) -> Result<PartitionLevels> {
        let count = checked_pow(self.degree, n).unwrap_or(u64::MAX);
        if count > cap {
            return Err(Error::CapExceeded { level: n, intervals: count, cap });
        }
        let d = self.degree as usize;
        let p = self.fixed_point()?;
        let wraps = math::round(self.lift(p) - p);
        let mut levels: Vec<Vec<f64>> = Vec::with_capacity(n + 1);
        levels.push(alloc::vec![0.0]);
        for level in 0..n {
            let parent = &levels[level];
            let m = parent.len();
            let mut next = Vec::with_capacity(m * d);
            for i in 0..m * d {
                if i % d == 0 {
                    next.push(parent[i / d]);
                    continue;
                }
                // Point i of the finer level maps to point i mod m, branch i / m.
                let target = p + wraps + (i / m) as f64 + parent[i % m];
                let j = i / d;
                let lo = p + parent[j];
                let hi = p + parent.get(j + 1).copied().unwrap_or(1.0);
                let x = self.preimage(target, lo, hi)?;
                next.push(x - p);
            }
            levels.push(next);
        }
        PartitionLevels::from_endpoints(self.degree, levels)
    }
}

/// Safeguarded Newton iteration on an increasing function, falling back to
/// bisection whenever a Newton step leaves the bracket.
fn solve_increasing(f: impl Fn(f64) -> (f64, Option<f64>), target: f64, lo: f64, hi: f64) -> Result<f64> {
    let (mut a, mut b) = (lo, hi);
    let fa = f(a).0 - target;
    let fb = f(b).0 - target;
    if fa == 0.0 {
        return Ok(a);
    }
    if fb == 0.0 {
        return Ok(b);
    }
    if !(fa < 0.0 && fb > 0.0) {
        return Err(Error::NoConvergence { near: 0.5 * (lo + hi) });
    }
    let mut x = 0.5 * (a + b);
    for _ in 0..400 {
        let (v, dv) = f(x);
        let g = v - target;
        if g == 0.0 {
            return Ok(x);
        }
        if g < 0.0 {
            a = x;
        } else {
            b = x;
        }
        let newton = dv.filter(|s| *s > 0.0).map(|s| x - g / s);
        let next = match newton {
            Some(cand) if cand > a && cand < b => cand,
            _ => 0.5 * (a + b),
        };
        if next == x || next <= a || next >= b {
            return Ok(x);
        }
        if (next - x).abs() <= 1e-16 * (1.0 + x.abs()) {
            return Ok(next);
        }
        x = next;
    }
    if b - a <= 1e-14 {
        Ok(x)
    } else {
        Err(Error::NoConvergence { near: x })
    }
}

/// Convergence report of an extraction.
#[derive(Clone, Debug, PartialEq)]
pub struct ExtractionDiagnostics {
    /// `(n, sup_k |s_{n+1}(k) - s_n(k)|)` over indices present at both levels.
    pub level_sup: Vec<(usize, f64)>,
    /// Fitted geometric decay rate of `level_sup` (0 when it vanishes).
    pub decay_rate: f64,
}

#[derive(Clone, Debug)]
pub struct Extraction {
    pub table: SolenoidTable,
    pub diagnostics: ExtractionDiagnostics,
    pub partition: PartitionLevels,
}

/// Asymptotic length ratios of the level-`depth` partition:
/// `s(k) = |I_{k+1}| / |I_k|` for `1 <= k <= max_index`, and
/// `s(0) = |I_1| / |I_{d^N}|` across the fixed point.
pub fn extract_solenoid(m: &CircleMap, depth: usize, max_index: usize) -> Result<Extraction> {
    let count = checked_pow(m.degree(), depth).unwrap_or(u64::MAX);
    if max_index as u64 + 2 > count {
        return Err(Error::IndexOutOfRange { index: max_index, limit: count.saturating_sub(2) as usize });
    }
    let partition = m.partition(depth, DEFAULT_INTERVAL_CAP.max(count))?;
    extract_from_partition(&partition, max_index)
}

/// Extraction from an already computed partition.
pub fn extract_from_partition(partition: &PartitionLevels, max_index: usize) -> Result<Extraction> {
    let depth = partition.depth();
    let ratios = partition.ratios(depth).expect("deepest level exists");
    if max_index + 1 >= ratios.len() {
        return Err(Error::IndexOutOfRange { index: max_index, limit: ratios.len().saturating_sub(2) });
    }
    let table = SolenoidTable::new(partition.degree(), ratios[..=max_index].to_vec(), Provenance::Extracted)?;
    let mut level_sup = Vec::new();
    let mut previous = partition.ratios(1).expect("level 1 exists");
    for n in 1..depth {
        let current = partition.ratios(n + 1).expect("level exists");
        let upper = max_index.min(previous.len() - 1);
        let sup = (1..=upper).map(|k| (current[k] - previous[k]).abs()).fold(0.0, f64::max);
        level_sup.push((n, sup));
        previous = current;
    }
    let points: Vec<(f64, f64)> = level_sup
        .iter()
        .filter(|(n, sup)| *n >= 2 && *sup > 0.0)
        .map(|&(n, sup)| (n as f64, math::ln(sup)))
        .collect();
    let decay_rate = math::fit_line(&points).map_or(0.0, |f| math::exp(f.slope));
    Ok(Extraction { table, diagnostics: ExtractionDiagnostics { level_sup, decay_rate }, partition: partition.clone() })
}

/// A piecewise-linear expanding map whose level-`depth` partition is the
/// level-`depth` grid generated by `t`.
///
/// Rejects tables whose matching residuals (over the indices the grid uses)
/// exceed `tolerance`.
pub fn realize_map(t: &SolenoidTable, depth: usize, tolerance: f64) -> Result<CircleMap> {
    if depth == 0 {
        return Err(Error::InvalidMap("realization depth must be at least 1"));
    }
    let used = checked_pow(t.degree(), depth.saturating_sub(1)).map_or(usize::MAX, |c| c as usize);
    let residual = t.max_matching_residual(Some(used.saturating_sub(1)));
    if residual > tolerance {
        return Err(Error::Inconsistent { residual, tolerance });
    }
    if t.is_constant() {
        return CircleMap::linear(t.degree());
    }
    let lengths = realize_level(t, depth)?;
    let mut finest = math::prefix_sums(&lengths);
    finest.pop();
    CircleMap::realized(t.degree(), &finest)
}

/// A monotone circle homeomorphism matching the level-`depth` partition
/// points of one map to those of another, in circular order from the base
/// points; piecewise linear in between.
#[derive(Clone, Debug, PartialEq)]
pub struct Conjugacy {
    degree: u32,
    depth: usize,
    xs: Vec<f64>,
    ys: Vec<f64>,
}

impl Conjugacy {
    pub fn from_pairs(degree: u32, depth: usize, xs: Vec<f64>, ys: Vec<f64>) -> Result<Self> {
        if xs.len() != ys.len() || xs.len() < 2 {
            return Err(Error::InvalidHomeomorphism("conjugacy needs matched point lists"));
        }
        if xs.windows(2).any(|w| !(w[0] < w[1])) || ys.windows(2).any(|w| !(w[0] < w[1])) {
            return Err(Error::InvalidHomeomorphism("conjugacy is not increasing"));
        }
        Ok(Self { degree, depth, xs, ys })
    }

    pub fn degree(&self) -> u32 {
        self.degree
    }

    pub fn depth(&self) -> usize {
        self.depth
    }

    pub fn point_pairs(&self) -> impl Iterator<Item = (f64, f64)> + '_ {
        self.xs.iter().copied().zip(self.ys.iter().copied())
    }

    pub fn xs(&self) -> &[f64] {
        &self.xs
    }

    pub fn ys(&self) -> &[f64] {
        &self.ys
    }

    /// `h(x)` for `x` in `[0, 1]` (offsets from the source base point).
    pub fn eval(&self, x: f64) -> f64 {
        interpolate(&self.xs, &self.ys, x)
    }

    pub fn is_identity(&self) -> bool {
        self.xs == self.ys
    }
}

/// Conjugacy sending `f`'s partition points to `g`'s at every level up to
/// `depth`.
pub fn conjugacy_map(f: &CircleMap, g: &CircleMap, depth: usize) -> Result<Conjugacy> {
    if f.degree() != g.degree() {
        return Err(Error::DegreeMismatch(f.degree(), g.degree()));
    }
    let cap = checked_pow(f.degree(), depth).unwrap_or(u64::MAX).max(DEFAULT_INTERVAL_CAP);
    let pf = f.partition(depth, cap)?;
    let pg = g.partition(depth, cap)?;
    conjugacy_from_partitions(&pf, &pg)
}

/// Conjugacy between the deepest levels of two partitions of equal shape.
pub fn conjugacy_from_partitions(pf: &PartitionLevels, pg: &PartitionLevels) -> Result<Conjugacy> {
    if pf.degree() != pg.degree() {
        return Err(Error::DegreeMismatch(pf.degree(), pg.degree()));
    }
    let depth = pf.depth().min(pg.depth());
    let mut xs = pf.level(depth).expect("level").endpoints().to_vec();
    let mut ys = pg.level(depth).expect("level").endpoints().to_vec();
    xs.push(1.0);
    ys.push(1.0);
    Conjugacy::from_pairs(pf.degree(), depth, xs, ys)
}

/// Coordinates in which partition intervals are measured.
#[derive(Clone, Debug, PartialEq)]
pub enum Chart {
    /// Lengths on the circle itself.
    Euclidean,
    /// Lengths read from a grid with the same combinatorics (e.g. a solenoidal
    /// chart realized from a solenoid table).
    Grid(PartitionLevels),
}

impl Chart {
    fn length(&self, partition: &PartitionLevels, n: usize, k: usize) -> f64 {
        match self {
            Chart::Euclidean => partition.length(n, k),
            Chart::Grid(levels) => levels.length(n, k),
        }
        .unwrap_or(f64::NAN)
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LevelComparability {
    pub level: usize,
    /// `max` of `|u(I)| / |u(I')|` and its inverse over adjacent pairs.
    pub bound: f64,
    /// `max |log (|u(I)| |v(E I')|) / (|u(I')| |v(E I)|)|` over adjacent pairs.
    pub defect: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ComparabilityReport {
    pub levels: Vec<LevelComparability>,
    pub bound: f64,
    /// Geometric decay rate fitted to the defects (0 when they vanish).
    pub decay_rate: f64,
}

/// Bounded-geometry and expansion-comparability check: adjacent level-`n`
/// intervals measured in chart `u`, their images (level `n - 1`) in chart
/// `v`, for `1 <= n <= depth`.
pub fn expansion_comparability(m: &CircleMap, u: &Chart, v: &Chart, depth: usize) -> Result<ComparabilityReport> {
    let partition = m.partition(depth, DEFAULT_INTERVAL_CAP.max(checked_pow(m.degree(), depth).unwrap_or(u64::MAX)))?;
    comparability_on_partition(&partition, u, v)
}

/// As [`expansion_comparability`] on a precomputed partition.
pub fn comparability_on_partition(partition: &PartitionLevels, u: &Chart, v: &Chart) -> Result<ComparabilityReport> {
    for chart in [u, v] {
        if let Chart::Grid(levels) = chart {
            if levels.depth() < partition.depth() || levels.degree() != partition.degree() {
                return Err(Error::DepthExceeded { depth: partition.depth(), max: levels.depth() });
            }
        }
    }
    let mut out = Vec::new();
    for n in 2..=partition.depth() {
        let count = partition.level(n).expect("level").len();
        let coarse = partition.level(n - 1).expect("level").len();
        let mut bound = 1.0f64;
        let mut defect = 0.0f64;
        for k in 1..count {
            let (a, b) = (k, k + 1);
            let ua = u.length(partition, n, a);
            let ub = u.length(partition, n, b);
            let ea = (a - 1) % coarse + 1;
            let eb = (b - 1) % coarse + 1;
            let va = v.length(partition, n - 1, ea);
            let vb = v.length(partition, n - 1, eb);
            let ratio = ua / ub;
            bound = bound.max(ratio).max(1.0 / ratio);
            defect = defect.max(math::ln(ua * vb / (ub * va)).abs());
        }
        out.push(LevelComparability { level: n, bound, defect });
    }
    let bound = out.iter().map(|l| l.bound).fold(1.0, f64::max);
    let points: Vec<(f64, f64)> = out
        .iter()
        .filter(|l| l.defect > 1e-15)
        .map(|l| (l.level as f64, math::ln(l.defect)))
        .collect();
    let decay_rate = math::fit_line(&points).map_or(0.0, |f| math::exp(f.slope));
    Ok(ComparabilityReport { levels: out, bound, decay_rate })
}
