//! Grids of an interval, homeomorphisms, and their ratio and cross-ratio
//! distortion.

use alloc::vec::Vec;
use core::ops::RangeInclusive;

use crate::circle::Conjugacy;
use crate::math;
use crate::tiling::PartitionLevels;
use crate::{Error, GridAxiom, Result};

/// Intervals shorter than this fraction of the whole are rejected.
pub const DEGENERATE_FRACTION: f64 = 1e-15;

/// A nested family of partitions of `[a, b]`. Level `n` is stored as its
/// `Ω(n) + 1` endpoints, first `a`, last `b`.
#[derive(Clone, Debug, PartialEq)]
pub struct GridSpec {
    domain: (f64, f64),
    levels: Vec<Vec<f64>>,
    adjacency_bound: f64,
    max_children: usize,
}

pub enum GridSource<'a> {
    /// `[a, b]` cut into `2^n` equal pieces at each level `0..=depth`.
    Dyadic { a: f64, b: f64, depth: usize },
    /// Partition levels on the circle, opened at the base point as `[0, 1]`.
    FromPartition(&'a PartitionLevels),
    Explicit(Vec<Vec<f64>>),
}

pub fn build_grid(source: GridSource<'_>) -> Result<GridSpec> {
    match source {
        GridSource::Dyadic { a, b, depth } => {
            if !(a < b) || !a.is_finite() || !b.is_finite() {
                return Err(Error::GridAxiomViolation { axiom: GridAxiom::Cover, level: 0 });
            }
            if depth > 52 {
                return Err(Error::DepthExceeded { depth, max: 52 });
            }
            let span = b - a;
            let levels = (0..=depth)
                .map(|n| {
                    let m = 1u64 << n;
                    let mut pts: Vec<f64> = (0..m).map(|k| a + span * (k as f64 / m as f64)).collect();
                    pts.push(b);
                    pts
                })
                .collect();
            GridSpec::new(levels)
        }
        GridSource::FromPartition(p) => {
            let levels = p
                .levels()
                .iter()
                .map(|l| {
                    let mut pts = l.endpoints().to_vec();
                    pts.push(1.0);
                    pts
                })
                .collect();
            GridSpec::new(levels)
        }
        GridSource::Explicit(levels) => GridSpec::new(levels),
    }
}

impl GridSpec {
    /// Validates the grid axioms and computes the bounds `B` and `M`.
    pub fn new(levels: Vec<Vec<f64>>) -> Result<Self> {
        let first = levels.first().ok_or(Error::GridAxiomViolation { axiom: GridAxiom::Cover, level: 0 })?;
        if first.len() < 2 {
            return Err(Error::GridAxiomViolation { axiom: GridAxiom::Cover, level: 0 });
        }
        let a = first[0];
        let b = first[first.len() - 1];
        if !(a < b) {
            return Err(Error::GridAxiomViolation { axiom: GridAxiom::Cover, level: 0 });
        }
        let floor = DEGENERATE_FRACTION * (b - a);
        let mut adjacency_bound = 1.0f64;
        let mut max_children = 0usize;
        for (n, pts) in levels.iter().enumerate() {
            if pts.len() < 2 || pts[0] != a || pts[pts.len() - 1] != b || pts.iter().any(|x| !x.is_finite()) {
                return Err(Error::GridAxiomViolation { axiom: GridAxiom::Cover, level: n });
            }
            if pts.windows(2).any(|w| !(w[0] < w[1])) {
                return Err(Error::GridAxiomViolation { axiom: GridAxiom::DisjointInteriors, level: n });
            }
            if pts.windows(2).any(|w| w[1] - w[0] < floor) {
                return Err(Error::GridAxiomViolation { axiom: GridAxiom::Degenerate, level: n });
            }
            for w in pts.windows(3) {
                let r = (w[2] - w[1]) / (w[1] - w[0]);
                adjacency_bound = adjacency_bound.max(r).max(1.0 / r);
            }
            if n == 0 {
                continue;
            }
            // Coarse endpoints must reappear, each coarse interval splitting
            // into at least two pieces.
            let coarse = &levels[n - 1];
            let mut j = 0usize;
            for window in coarse.windows(2) {
                if pts.get(j) != Some(&window[0]) {
                    return Err(Error::GridAxiomViolation { axiom: GridAxiom::Nesting, level: n });
                }
                let start = j;
                while j < pts.len() && pts[j] < window[1] {
                    j += 1;
                }
                if pts.get(j) != Some(&window[1]) {
                    return Err(Error::GridAxiomViolation { axiom: GridAxiom::Nesting, level: n });
                }
                let children = j - start;
                if children < 2 {
                    return Err(Error::GridAxiomViolation { axiom: GridAxiom::Children, level: n });
                }
                max_children = max_children.max(children);
            }
        }
        Ok(Self { domain: (a, b), levels, adjacency_bound, max_children: max_children.max(2) })
    }

    pub fn domain(&self) -> (f64, f64) {
        self.domain
    }

    /// Deepest level.
    pub fn depth(&self) -> usize {
        self.levels.len() - 1
    }

    pub fn level(&self, n: usize) -> Option<&[f64]> {
        self.levels.get(n).map(Vec::as_slice)
    }

    pub fn levels(&self) -> &[Vec<f64>] {
        &self.levels
    }

    /// Number of intervals at level `n`.
    pub fn omega(&self, n: usize) -> Option<usize> {
        self.levels.get(n).map(|l| l.len() - 1)
    }

    /// `B`: bound on adjacent length ratios.
    pub fn adjacency_bound(&self) -> f64 {
        self.adjacency_bound
    }

    /// `M`: maximum number of children of an interval.
    pub fn max_children(&self) -> usize {
        self.max_children
    }

    /// Image grid under the affine map `x -> scale x + shift`, `scale > 0`.
    pub fn affine_image(&self, scale: f64, shift: f64) -> Result<Self> {
        if !(scale > 0.0) {
            return Err(Error::InvalidHomeomorphism("affine change of coordinates must be increasing"));
        }
        GridSpec::new(self.levels.iter().map(|l| l.iter().map(|x| scale * x + shift).collect()).collect())
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum HomeomorphismKind {
    /// `x -> a x + b`.
    Affine { a: f64, b: f64 },
    /// `x -> (a x + b) / (c x + d)`.
    Moebius { a: f64, b: f64, c: f64, d: f64 },
    /// `x -> x^gamma` on a nonnegative domain.
    Power { gamma: f64 },
    /// `x -> x + sum c x^p`, given as `(c, p)` pairs.
    Perturbation(Vec<(f64, f64)>),
    /// Piecewise linear through the given points.
    Sampled { xs: Vec<f64>, ys: Vec<f64> },
    Conjugacy(Conjugacy),
}

#[derive(Clone, Debug, PartialEq)]
pub struct Homeomorphism {
    kind: HomeomorphismKind,
    domain: (f64, f64),
}

// Increment of x^p from x1 to x1 + delta, without cancellation.
fn power_increment(x1: f64, delta: f64, p: f64) -> f64 {
    if x1 == 0.0 {
        math::powf(delta, p)
    } else {
        math::powf(x1, p) * math::exp_m1(p * math::ln_1p(delta / x1))
    }
}

impl Homeomorphism {
    pub fn new(kind: HomeomorphismKind, domain: (f64, f64)) -> Result<Self> {
        let (lo, hi) = domain;
        if !(lo < hi) || !lo.is_finite() || !hi.is_finite() {
            return Err(Error::InvalidHomeomorphism("domain must be a nondegenerate interval"));
        }
        match &kind {
            HomeomorphismKind::Affine { a, .. } => {
                if !(*a > 0.0) {
                    return Err(Error::InvalidHomeomorphism("affine slope must be positive"));
                }
            }
            HomeomorphismKind::Moebius { a, b, c, d } => {
                let (p, q) = (c * lo + d, c * hi + d);
                if !(a * d - b * c > 0.0) || !(p * q > 0.0) {
                    return Err(Error::InvalidHomeomorphism("Moebius map must be increasing without a pole on the domain"));
                }
            }
            HomeomorphismKind::Power { gamma } => {
                if !(*gamma > 0.0) || lo < 0.0 {
                    return Err(Error::InvalidHomeomorphism("power map needs gamma > 0 on a nonnegative domain"));
                }
            }
            HomeomorphismKind::Perturbation(terms) => {
                if terms.iter().any(|(c, p)| !c.is_finite() || !(*p > 0.0)) || (lo < 0.0 && terms.iter().any(|(_, p)| math::floor(*p) != *p)) {
                    return Err(Error::InvalidHomeomorphism("perturbation exponents must be positive, integral on negative domains"));
                }
                // Derivative check on a fine sample, including the endpoints.
                let samples = 4096;
                for i in 0..=samples {
                    let x = lo + (hi - lo) * (i as f64 / samples as f64);
                    let slope = 1.0 + terms.iter().map(|(c, p)| if x == 0.0 && *p < 1.0 { f64::INFINITY * c.signum() } else { c * p * math::powf(x, p - 1.0) }).sum::<f64>();
                    if !(slope > 0.0) {
                        return Err(Error::InvalidHomeomorphism("perturbation is not increasing"));
                    }
                }
            }
            HomeomorphismKind::Sampled { xs, ys } => {
                if xs.len() < 2 || xs.len() != ys.len() || xs[0] != lo || xs[xs.len() - 1] != hi {
                    return Err(Error::InvalidHomeomorphism("samples must span the domain"));
                }
                if xs.windows(2).any(|w| !(w[0] < w[1])) || ys.windows(2).any(|w| !(w[0] < w[1])) {
                    return Err(Error::InvalidHomeomorphism("samples must be strictly increasing"));
                }
            }
            HomeomorphismKind::Conjugacy(c) => {
                let xs = c.xs();
                if xs[0] != lo || xs[xs.len() - 1] != hi {
                    return Err(Error::InvalidHomeomorphism("conjugacy domain must be its knot span"));
                }
            }
        }
        Ok(Self { kind, domain })
    }

    pub fn affine(a: f64, b: f64, domain: (f64, f64)) -> Result<Self> {
        Self::new(HomeomorphismKind::Affine { a, b }, domain)
    }

    pub fn moebius(a: f64, b: f64, c: f64, d: f64, domain: (f64, f64)) -> Result<Self> {
        Self::new(HomeomorphismKind::Moebius { a, b, c, d }, domain)
    }

    pub fn power(gamma: f64, domain: (f64, f64)) -> Result<Self> {
        Self::new(HomeomorphismKind::Power { gamma }, domain)
    }

    pub fn perturbation(terms: Vec<(f64, f64)>, domain: (f64, f64)) -> Result<Self> {
        Self::new(HomeomorphismKind::Perturbation(terms), domain)
    }

    pub fn sampled(xs: Vec<f64>, ys: Vec<f64>) -> Result<Self> {
        let domain = (*xs.first().unwrap_or(&0.0), *xs.last().unwrap_or(&0.0));
        Self::new(HomeomorphismKind::Sampled { xs, ys }, domain)
    }

    /// On `[0, 1]`, the circle conjugacy opened at the base point.
    pub fn conjugacy(c: Conjugacy) -> Result<Self> {
        Self::new(HomeomorphismKind::Conjugacy(c), (0.0, 1.0))
    }

    pub fn kind(&self) -> &HomeomorphismKind {
        &self.kind
    }

    pub fn domain(&self) -> (f64, f64) {
        self.domain
    }

    fn check(&self, x: f64) -> Result<()> {
        if x >= self.domain.0 && x <= self.domain.1 {
            Ok(())
        } else {
            Err(Error::DomainViolation(x))
        }
    }

    pub fn eval(&self, x: f64) -> Result<f64> {
        self.check(x)?;
        Ok(match &self.kind {
            HomeomorphismKind::Affine { a, b } => a * x + b,
            HomeomorphismKind::Moebius { a, b, c, d } => (a * x + b) / (c * x + d),
            HomeomorphismKind::Power { gamma } => math::powf(x, *gamma),
            HomeomorphismKind::Perturbation(terms) => x + terms.iter().map(|(c, p)| c * math::powf(x, *p)).sum::<f64>(),
            HomeomorphismKind::Sampled { xs, ys } => piecewise(xs, ys, x),
            HomeomorphismKind::Conjugacy(c) => c.eval(x),
        })
    }

    /// `h(x2) - h(x1)` for `x1 < x2`, computed without cancellation where a
    /// closed form allows.
    pub fn increment(&self, x1: f64, x2: f64) -> Result<f64> {
        self.check(x1)?;
        self.check(x2)?;
        let delta = x2 - x1;
        Ok(match &self.kind {
            HomeomorphismKind::Affine { a, .. } => a * delta,
            HomeomorphismKind::Moebius { a, b, c, d } => (a * d - b * c) * delta / ((c * x1 + d) * (c * x2 + d)),
            HomeomorphismKind::Power { gamma } => power_increment(x1, delta, *gamma),
            HomeomorphismKind::Perturbation(terms) => {
                delta
                    + terms
                        .iter()
                        .map(|(c, p)| {
                            if math::floor(*p) == *p && x1 < 0.0 {
                                c * (math::powf(x2, *p) - math::powf(x1, *p))
                            } else {
                                c * power_increment(x1, delta, *p)
                            }
                        })
                        .sum::<f64>()
            }
            HomeomorphismKind::Sampled { xs, ys } => piecewise(xs, ys, x2) - piecewise(xs, ys, x1),
            HomeomorphismKind::Conjugacy(c) => c.eval(x2) - c.eval(x1),
        })
    }

    /// Knots of the piecewise-linear kinds.
    pub fn knots(&self) -> Option<&[f64]> {
        match &self.kind {
            HomeomorphismKind::Sampled { xs, .. } => Some(xs),
            HomeomorphismKind::Conjugacy(c) => Some(c.xs()),
            _ => None,
        }
    }
}

fn piecewise(xs: &[f64], ys: &[f64], x: f64) -> f64 {
    let idx = xs.partition_point(|&k| k <= x).clamp(1, xs.len() - 1);
    let (x0, x1, y0, y1) = (xs[idx - 1], xs[idx], ys[idx - 1], ys[idx]);
    if x == x0 {
        return y0;
    }
    if x == x1 {
        return y1;
    }
    y0 + (x - x0) * ((y1 - y0) / (x1 - x0))
}

/// A closed interval `[left, right]`.
pub type Interval = (f64, f64);

fn adjacent(i: Interval, j: Interval) -> Result<()> {
    if i.0 < i.1 && i.1 == j.0 && j.0 < j.1 {
        Ok(())
    } else {
        Err(Error::NotAdjacent)
    }
}

/// `log((|I| / |I'|) (|h(I')| / |h(I)|))`.
pub fn lrd(h: &Homeomorphism, i: Interval, j: Interval) -> Result<f64> {
    adjacent(i, j)?;
    let hi = h.increment(i.0, i.1)?;
    let hj = h.increment(j.0, j.1)?;
    Ok(math::ln(((i.1 - i.0) * hj) / ((j.1 - j.0) * hi)))
}

/// `log(1 + (L'/L)(L + L' + L'')/L'')` for consecutive lengths.
pub fn cross_ratio_lengths(l: f64, l1: f64, l2: f64) -> f64 {
    math::ln_1p((l1 / l) * ((l + l1 + l2) / l2))
}

/// Log cross ratio of three consecutive adjacent intervals.
pub fn cross_ratio(i: Interval, j: Interval, k: Interval) -> Result<f64> {
    adjacent(i, j)?;
    adjacent(j, k)?;
    Ok(cross_ratio_lengths(i.1 - i.0, j.1 - j.0, k.1 - k.0))
}

/// `log((x2 - x0)(x3 - x1) / ((x1 - x0)(x3 - x2)))`.
pub fn classical_cross_ratio(x0: f64, x1: f64, x2: f64, x3: f64) -> f64 {
    math::ln(((x2 - x0) * (x3 - x1)) / ((x1 - x0) * (x3 - x2)))
}

/// `cr(h(I), h(I'), h(I'')) - cr(I, I', I'')`.
pub fn crd(h: &Homeomorphism, i: Interval, j: Interval, k: Interval) -> Result<f64> {
    let before = cross_ratio(i, j, k)?;
    let hi = h.increment(i.0, i.1)?;
    let hj = h.increment(j.0, j.1)?;
    let hk = h.increment(k.0, k.1)?;
    Ok(cross_ratio_lengths(hi, hj, hk) - before)
}

/// One grid interval `I^n_beta` and the functionals starting at it.
/// Fields needing `beta + 1` (`r`, `r_h`, `lrd`) or `beta + 2` (`cr`, `cr_h`,
/// `crd`) are NaN where those intervals do not exist.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct DistortionRecord {
    pub n: usize,
    /// 1-based position within the level.
    pub beta: usize,
    pub len: f64,
    pub r: f64,
    pub r_h: f64,
    pub lrd: f64,
    pub cr: f64,
    pub cr_h: f64,
    pub crd: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct DistortionDataset {
    pub records: Vec<DistortionRecord>,
    pub domain: (f64, f64),
    pub adjacency_bound: f64,
    pub max_children: usize,
}

impl DistortionDataset {
    /// Levels present, ascending.
    pub fn levels(&self) -> Vec<usize> {
        let mut out: Vec<usize> = self.records.iter().map(|r| r.n).collect();
        out.dedup();
        out
    }

    pub fn level(&self, n: usize) -> impl Iterator<Item = &DistortionRecord> + '_ {
        self.records.iter().filter(move |r| r.n == n)
    }

    /// Same records with every `lrd` and `crd` multiplied by `len^delta`
    /// (a synthetic strengthening of the bounds).
    pub fn strengthened(&self, delta: f64) -> Self {
        let mut out = self.clone();
        for r in &mut out.records {
            let f = math::powf(r.len, delta);
            r.lrd *= f;
            r.crd *= f;
        }
        out
    }
}

fn require_resolution(h: &Homeomorphism, g: &GridSpec, n: usize) -> Result<()> {
    let Some(knots) = h.knots() else { return Ok(()) };
    let need = g.max_children() * g.max_children();
    let pts = g.level(n).expect("level checked");
    for w in pts.windows(2) {
        let lo = knots.partition_point(|&k| k <= w[0]);
        let hi = knots.partition_point(|&k| k < w[1]);
        // Knot segments meeting the open interval.
        if hi + 1 - lo < need {
            return Err(Error::DepthExceeded { depth: n, max: n.saturating_sub(1) });
        }
    }
    Ok(())
}

/// Records of grid level `n`.
pub fn sweep_level(h: &Homeomorphism, g: &GridSpec, n: usize) -> Result<Vec<DistortionRecord>> {
    let pts = g.level(n).ok_or(Error::DepthExceeded { depth: n, max: g.depth() })?;
    let (a, b) = g.domain();
    if a < h.domain().0 {
        return Err(Error::DomainViolation(a));
    }
    if b > h.domain().1 {
        return Err(Error::DomainViolation(b));
    }
    require_resolution(h, g, n)?;
    let lens: Vec<f64> = pts.windows(2).map(|w| w[1] - w[0]).collect();
    let images = pts.windows(2).map(|w| h.increment(w[0], w[1])).collect::<Result<Vec<f64>>>()?;
    let count = lens.len();
    let lrds: Vec<f64> = (0..count.saturating_sub(1)).map(|i| math::ln((lens[i] * images[i + 1]) / (lens[i + 1] * images[i]))).collect();
    let mut out = Vec::with_capacity(count);
    for i in 0..count {
        let mut rec = DistortionRecord {
            n,
            beta: i + 1,
            len: lens[i],
            r: f64::NAN,
            r_h: f64::NAN,
            lrd: f64::NAN,
            cr: f64::NAN,
            cr_h: f64::NAN,
            crd: f64::NAN,
        };
        if i + 1 < count {
            rec.r = lens[i + 1] / lens[i];
            rec.r_h = images[i + 1] / images[i];
            rec.lrd = lrds[i];
        }
        if i + 2 < count {
            rec.cr = cross_ratio_lengths(lens[i], lens[i + 1], lens[i + 2]);
            rec.cr_h = cross_ratio_lengths(images[i], images[i + 1], images[i + 2]);
            // cr_h - cr, expanded through lrd so that small distortions keep
            // their relative accuracy.
            let r1 = rec.r;
            let r2 = lens[i + 2] / lens[i + 1];
            rec.crd = math::ln_1p(math::exp_m1(lrds[i]) / (1.0 + 1.0 / r1)) + math::ln_1p(math::exp_m1(-lrds[i + 1]) / (1.0 + r2));
        }
        out.push(rec);
    }
    Ok(out)
}

/// Records of all levels in `levels`, ordered by `(n, beta)`.
pub fn sweep(h: &Homeomorphism, g: &GridSpec, levels: RangeInclusive<usize>) -> Result<DistortionDataset> {
    let mut records = Vec::new();
    for n in levels {
        records.extend(sweep_level(h, g, n)?);
    }
    Ok(assemble(g, records))
}

/// Wraps externally computed per-level records with the grid metadata.
pub fn assemble(g: &GridSpec, records: Vec<DistortionRecord>) -> DistortionDataset {
    DistortionDataset { records, domain: g.domain(), adjacency_bound: g.adjacency_bound(), max_children: g.max_children() }
}

fn deviation(a: f64, b: f64) -> f64 {
    match (a.is_nan(), b.is_nan()) {
        (true, true) => 0.0,
        (false, false) => (a - b).abs(),
        _ => f64::INFINITY,
    }
}

/// Largest discrepancy between stored records and a recomputation through
/// the single-interval functionals.
pub fn reproducibility_error(ds: &DistortionDataset, h: &Homeomorphism, g: &GridSpec) -> Result<f64> {
    let mut worst = 0.0f64;
    for rec in &ds.records {
        let pts = g.level(rec.n).ok_or(Error::DepthExceeded { depth: rec.n, max: g.depth() })?;
        let at = |k: usize| -> Option<Interval> { (k + 1 < pts.len()).then(|| (pts[k], pts[k + 1])) };
        let i = at(rec.beta - 1).ok_or(Error::IndexOutOfRange { index: rec.beta, limit: pts.len() - 1 })?;
        worst = worst.max(deviation(rec.len, i.1 - i.0));
        let (lrd_v, cr_v, crd_v) = match (at(rec.beta), at(rec.beta + 1)) {
            (Some(j), Some(k)) => (lrd(h, i, j)?, cross_ratio(i, j, k)?, crd(h, i, j, k)?),
            (Some(j), None) => (lrd(h, i, j)?, f64::NAN, f64::NAN),
            _ => (f64::NAN, f64::NAN, f64::NAN),
        };
        worst = worst.max(deviation(rec.lrd, lrd_v)).max(deviation(rec.cr, cr_v)).max(deviation(rec.crd, crd_v));
        worst = worst.max(deviation(rec.crd, rec.cr_h - rec.cr));
    }
    Ok(worst)
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LevelConstant {
    pub n: usize,
    /// `max residual / max(lrd^2, lrd'^2)` over the level.
    pub constant: f64,
    /// Largest residual on the level.
    pub residual: f64,
    /// Pairs evaluated (pairs with `max(|lrd|, |lrd'|)` below the floor are skipped).
    pub pairs: usize,
}

#[derive(Clone, Debug, PartialEq)]
pub struct IdentitySummary {
    pub levels: Vec<LevelConstant>,
    /// Single constant covering every level.
    pub constant: f64,
    /// `max / min` of the per-level constants over the deepest four levels
    /// with data (1 when fewer than two).
    pub spread: f64,
}

/// Distortions below this are treated as round-off.
pub const IDENTITY_FLOOR: f64 = 1e-12;

fn summarize(levels: Vec<LevelConstant>) -> IdentitySummary {
    let constant = levels.iter().map(|l| l.constant).fold(0.0, f64::max);
    let tail: Vec<f64> = levels.iter().filter(|l| l.pairs > 0).rev().take(4).map(|l| l.constant).collect();
    let spread = if tail.len() < 2 {
        1.0
    } else {
        let max = tail.iter().copied().fold(0.0, f64::max);
        let min = tail.iter().copied().fold(f64::INFINITY, f64::min);
        if min > 0.0 { max / min } else { f64::INFINITY }
    };
    IdentitySummary { levels, constant, spread }
}

/// Residual of the first-order expansion
/// `crd(β) ≈ lrd(β)/(1 + 1/r(β)) - lrd(β+1)/(1 + r(β+1))`.
pub fn taylor_identity_residual(ds: &DistortionDataset) -> IdentitySummary {
    let mut levels = Vec::new();
    for n in ds.levels() {
        let recs: Vec<&DistortionRecord> = ds.level(n).collect();
        let mut lc = LevelConstant { n, constant: 0.0, residual: 0.0, pairs: 0 };
        for w in recs.windows(2) {
            let (a, b) = (w[0], w[1]);
            if a.crd.is_nan() || b.lrd.is_nan() {
                continue;
            }
            let scale = a.lrd.abs().max(b.lrd.abs());
            if scale < IDENTITY_FLOOR {
                continue;
            }
            let first_order = a.lrd / (1.0 + 1.0 / a.r) - b.lrd / (1.0 + b.r);
            let residual = (a.crd - first_order).abs();
            lc.residual = lc.residual.max(residual);
            lc.constant = lc.constant.max(residual / (scale * scale));
            lc.pairs += 1;
        }
        levels.push(lc);
    }
    summarize(levels)
}

/// Residual of `r_h / r ≈ 1 + lrd`.
pub fn ratio_identity_residual(ds: &DistortionDataset) -> IdentitySummary {
    let mut levels = Vec::new();
    for n in ds.levels() {
        let mut lc = LevelConstant { n, constant: 0.0, residual: 0.0, pairs: 0 };
        for rec in ds.level(n) {
            if rec.lrd.is_nan() || rec.lrd.abs() < IDENTITY_FLOOR {
                continue;
            }
            let residual = (rec.r_h / rec.r - 1.0 - rec.lrd).abs();
            lc.residual = lc.residual.max(residual);
            lc.constant = lc.constant.max(residual / (rec.lrd * rec.lrd));
            lc.pairs += 1;
        }
        levels.push(lc);
    }
    summarize(levels)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn unit_dyadic(depth: usize) -> GridSpec {
        build_grid(GridSource::Dyadic { a: 0.0, b: 1.0, depth }).unwrap()
    }

    #[test]
    fn lrd_examples() {
        let square = Homeomorphism::power(2.0, (1.0, 2.0)).unwrap();
        assert_abs_diff_eq!(lrd(&square, (1.0, 1.5), (1.5, 2.0)).unwrap(), 1.4f64.ln(), epsilon = 1e-15);
        let p = Homeomorphism::power(0.7, (0.0, 1.0)).unwrap();
        let oracle = (2f64.powf(0.7) - 1.0).ln();
        for n in 1..30 {
            let l = 0.5f64.powi(n);
            assert_abs_diff_eq!(lrd(&p, (0.0, l), (l, 2.0 * l)).unwrap(), oracle, epsilon = 1e-13);
        }
        assert_abs_diff_eq!(oracle, -0.4708, epsilon = 1e-4);
        assert_eq!(lrd(&p, (0.0, 0.25), (0.3, 0.5)), Err(Error::NotAdjacent));
        assert_eq!(lrd(&p, (0.5, 1.0), (1.0, 1.5)), Err(Error::DomainViolation(1.5)));
    }

    #[test]
    fn cross_ratio_examples() {
        assert_abs_diff_eq!(cross_ratio_lengths(1.0, 1.0, 1.0), 4f64.ln(), epsilon = 1e-15);
        assert_abs_diff_eq!(cross_ratio_lengths(1.0, 2.0, 1.0), 9f64.ln(), epsilon = 1e-15);
        assert_abs_diff_eq!(classical_cross_ratio(0.0, 1.0, 3.0, 4.0), 9f64.ln(), epsilon = 1e-15);
        assert_eq!(cross_ratio((0.0, 1.0), (1.0, 2.0), (2.5, 3.0)), Err(Error::NotAdjacent));
    }

    #[test]
    fn crd_examples() {
        let square = Homeomorphism::power(2.0, (1.0, 2.0)).unwrap();
        let t = (1.0, 4.0 / 3.0);
        let u = (4.0 / 3.0, 5.0 / 3.0);
        let v = (5.0 / 3.0, 2.0);
        assert_abs_diff_eq!(crd(&square, t, u, v).unwrap(), (320f64 / 77.0).ln() - 4f64.ln(), epsilon = 1e-14);
        let m = Homeomorphism::moebius(1.0, 0.0, -1.0, 2.0, (0.0, 1.0)).unwrap();
        assert!(crd(&m, (0.1, 0.2), (0.2, 0.5), (0.5, 0.9)).unwrap().abs() < 1e-12);
        let aff = Homeomorphism::affine(2.0, 0.0, (0.0, 1.0)).unwrap();
        assert_eq!(crd(&aff, (0.0, 0.25), (0.25, 0.5), (0.5, 1.0)).unwrap(), 0.0);
    }

    #[test]
    fn dyadic_grid_bounds() {
        let g = unit_dyadic(10);
        assert_eq!(g.adjacency_bound(), 1.0);
        assert_eq!(g.max_children(), 2);
        assert_eq!(g.omega(10), Some(1024));
    }

    #[test]
    fn grid_axioms() {
        let nested_fail = GridSpec::new(alloc::vec![alloc::vec![0.0, 1.0], alloc::vec![0.0, 0.5, 1.0], alloc::vec![0.0, 0.2, 0.6, 0.8, 1.0]]);
        assert_eq!(nested_fail, Err(Error::GridAxiomViolation { axiom: GridAxiom::Nesting, level: 2 }));
        let cover = GridSpec::new(alloc::vec![alloc::vec![0.0, 1.0], alloc::vec![0.0, 0.5, 0.9]]);
        assert_eq!(cover, Err(Error::GridAxiomViolation { axiom: GridAxiom::Cover, level: 1 }));
        let one_child = GridSpec::new(alloc::vec![alloc::vec![0.0, 1.0], alloc::vec![0.0, 0.5, 1.0], alloc::vec![0.0, 0.5, 0.75, 1.0]]);
        assert_eq!(one_child, Err(Error::GridAxiomViolation { axiom: GridAxiom::Children, level: 2 }));
        let tiny = GridSpec::new(alloc::vec![alloc::vec![0.0, 1.0], alloc::vec![0.0, 1e-17, 1.0]]);
        assert_eq!(tiny, Err(Error::GridAxiomViolation { axiom: GridAxiom::Degenerate, level: 1 }));
        let g = GridSpec::new(alloc::vec![alloc::vec![0.0, 1.0], alloc::vec![0.0, 0.25, 0.5, 1.0]]).unwrap();
        assert_eq!(g.max_children(), 3);
        assert_eq!(g.adjacency_bound(), 2.0);
    }

    #[test]
    fn affine_sweep_vanishes() {
        let h = Homeomorphism::affine(2.0, 3.0, (0.0, 1.0)).unwrap();
        let g = unit_dyadic(10);
        let ds = sweep(&h, &g, 0..=10).unwrap();
        for r in &ds.records {
            assert!(r.lrd.is_nan() || r.lrd == 0.0);
            assert!(r.crd.is_nan() || r.crd == 0.0);
        }
        let s = taylor_identity_residual(&ds);
        assert_eq!(s.constant, 0.0);
    }

    #[test]
    fn sweep_nan_layout_and_reproducibility() {
        let h = Homeomorphism::perturbation(alloc::vec![(0.1, 2.0)], (0.0, 1.0)).unwrap();
        let g = unit_dyadic(8);
        let ds = sweep(&h, &g, 2..=8).unwrap();
        let level2: Vec<_> = ds.level(2).collect();
        assert_eq!(level2.len(), 4);
        assert!(level2[3].lrd.is_nan() && level2[2].crd.is_nan() && !level2[2].lrd.is_nan() && !level2[1].crd.is_nan());
        assert!(reproducibility_error(&ds, &h, &g).unwrap() <= 1e-13);
    }

    #[test]
    fn taylor_constant_near_one_eighth() {
        // For r = 1 the second-order remainder is (lrd^2 - lrd'^2)/8; with
        // lrd' ≈ lrd the fitted ratio is bounded by 1/8 plus cross terms.
        let h = Homeomorphism::perturbation(alloc::vec![(0.1, 2.0)], (0.0, 1.0)).unwrap();
        let ds = sweep(&h, &unit_dyadic(12), 4..=12).unwrap();
        let s = taylor_identity_residual(&ds);
        assert!(s.constant > 0.0 && s.constant < 1.0);
        assert!(s.spread < 1.2);
        let q = ratio_identity_residual(&ds);
        assert_abs_diff_eq!(q.constant, 0.5, epsilon = 0.01);
    }

    #[test]
    fn sampled_resolution_guard() {
        let xs: Vec<f64> = (0..=16).map(|k| k as f64 / 16.0).collect();
        let ys: Vec<f64> = xs.iter().map(|x| x * x + x).collect();
        let ys: Vec<f64> = ys.iter().map(|y| y / 2.0).collect();
        let h = Homeomorphism::sampled(xs, ys).unwrap();
        let g = unit_dyadic(4);
        assert!(sweep_level(&h, &g, 2).is_ok());
        assert!(matches!(sweep_level(&h, &g, 3), Err(Error::DepthExceeded { .. })));
    }

    #[test]
    fn stable_increments_agree_with_differences() {
        let p = Homeomorphism::power(0.7, (0.0, 1.0)).unwrap();
        let m = Homeomorphism::moebius(1.0, 0.0, -1.0, 2.0, (0.0, 1.0)).unwrap();
        for (x1, x2) in [(0.0, 0.3), (0.2, 0.7), (0.5, 1.0)] {
            for h in [&p, &m] {
                assert_abs_diff_eq!(h.increment(x1, x2).unwrap(), h.eval(x2).unwrap() - h.eval(x1).unwrap(), epsilon = 1e-15);
            }
        }
    }
}
