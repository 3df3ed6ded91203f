//! Asymptotic-order fits of distortion datasets and smoothness verdicts.

use alloc::vec::Vec;

use crate::circle::{self, CircleMap};
use crate::distortion::{build_grid, sweep, DistortionDataset, DistortionRecord, GridSource, Homeomorphism};
use crate::math;
use crate::solenoid::{holder_fit_values, holder_modulus_fit, ModulusFit, PairSampling, SolenoidTable};
use crate::ultrametric::UltraMetricEvaluator;
use crate::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ClassifyConfig {
    /// Exponent tolerance `tol`.
    pub exponent_tolerance: f64,
    /// Per-level factor `rho` of the trend test.
    pub trend_factor: f64,
    /// Fewer levels than this set the `few_levels` caveat.
    pub min_levels: usize,
    /// Intervals dropped at each end of a level for cross-ratio verdicts.
    pub cross_margin: usize,
    /// Envelopes at or below this are treated as zero.
    pub zero_floor: f64,
    /// Slopes this close to a rung threshold resolve to the weaker rung.
    pub ambiguity_band: f64,
}

impl Default for ClassifyConfig {
    fn default() -> Self {
        Self {
            exponent_tolerance: 0.15,
            trend_factor: 0.9,
            min_levels: 6,
            cross_margin: 1,
            zero_floor: 1e-12,
            ambiguity_band: 0.02,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Field {
    Lrd,
    Crd,
}

impl Field {
    fn of(self, r: &DistortionRecord) -> f64 {
        match self {
            Field::Lrd => r.lrd,
            Field::Crd => r.crd,
        }
    }
}

/// Normalizer `|I|^{-k}` applied before taking level maxima.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Normalizer {
    One,
    InverseLength,
    InverseLengthSquared,
}

impl Normalizer {
    fn power(self) -> i32 {
        match self {
            Normalizer::One => 0,
            Normalizer::InverseLength => 1,
            Normalizer::InverseLengthSquared => 2,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Trend {
    Decaying,
    Bounded,
    Growing,
}

impl Trend {
    pub fn as_str(self) -> &'static str {
        match self {
            Trend::Decaying => "decaying",
            Trend::Bounded => "bounded",
            Trend::Growing => "growing",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LevelEnvelope {
    pub n: usize,
    /// `max_β |I^n_β|`.
    pub scale: f64,
    /// `max_β |field| |I|^{-k}`.
    pub sup: f64,
    /// 0.9-quantile of the same values.
    pub q90: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct EnvelopeStats {
    pub field: Field,
    pub normalizer: Normalizer,
    pub levels: Vec<LevelEnvelope>,
    /// Least-squares slope of `log sup` against `log scale` over the deepest
    /// half of the levels; `+inf` when the envelope vanishes.
    pub slope: f64,
    pub half_width: f64,
    /// Same fit on the 0.9-quantile envelope.
    pub q90_slope: f64,
    pub trend: Trend,
    /// Geometric mean per-level factor of `sup` over the last four levels.
    pub trend_factor: f64,
    pub vanishing: bool,
}

fn fit_tail(levels: &[LevelEnvelope], pick: impl Fn(&LevelEnvelope) -> f64, floor: f64) -> (f64, f64) {
    let take = levels.len().div_ceil(2);
    let points: Vec<(f64, f64)> = levels[levels.len() - take..]
        .iter()
        .filter(|l| pick(l) > floor)
        .map(|l| (math::ln(l.scale), math::ln(pick(l))))
        .collect();
    if points.len() < 2 {
        return (f64::INFINITY, 0.0);
    }
    match math::fit_line(&points) {
        Some(f) => (f.slope, 2.0 * f.slope_std_error),
        None => (f64::INFINITY, 0.0),
    }
}

/// Per-level envelopes of `field`, dropping `margin` intervals at each end of
/// every level.
pub fn envelope_fit(ds: &DistortionDataset, field: Field, normalizer: Normalizer, margin: usize, config: &ClassifyConfig) -> Result<EnvelopeStats> {
    let k = normalizer.power();
    let mut levels = Vec::new();
    for n in ds.levels() {
        let recs: Vec<&DistortionRecord> = ds.level(n).filter(|r| !field.of(r).is_nan()).collect();
        if recs.len() <= 2 * margin {
            continue;
        }
        let inner = &recs[margin..recs.len() - margin];
        let values: Vec<f64> = inner.iter().map(|r| field.of(r).abs() * math::powf(r.len, -f64::from(k))).collect();
        let scale = ds.level(n).map(|r| r.len).fold(0.0, f64::max);
        levels.push(LevelEnvelope {
            n,
            scale,
            sup: values.iter().copied().fold(0.0, f64::max),
            q90: math::quantile(&values, 0.9),
        });
    }
    if levels.len() < 4 {
        return Err(Error::TooFewLevels { got: levels.len(), need: 4 });
    }
    // The zero floor applies to the raw field, before normalization.
    let raw_floor = |l: &LevelEnvelope| config.zero_floor * math::powf(l.scale, -f64::from(k));
    let vanishing = levels.iter().all(|l| l.sup <= raw_floor(l));
    let floor_at_last = raw_floor(levels.last().expect("four levels"));
    let (slope, half_width, q90_slope, trend, factor) = if vanishing {
        (f64::INFINITY, 0.0, f64::INFINITY, Trend::Decaying, 0.0)
    } else {
        let (slope, hw) = fit_tail(&levels, |l| l.sup, 0.0);
        let (q90_slope, _) = fit_tail(&levels, |l| l.q90, 0.0);
        let tail = &levels[levels.len() - 4..];
        let (first, last) = (tail[0].sup, tail[3].sup);
        let factor = if first > 0.0 { math::powf(last / first, 1.0 / 3.0) } else { f64::INFINITY };
        let trend = if last <= floor_at_last || factor <= config.trend_factor {
            Trend::Decaying
        } else if factor >= 1.0 / config.trend_factor {
            Trend::Growing
        } else {
            Trend::Bounded
        };
        (slope, hw, q90_slope, trend, factor)
    };
    Ok(EnvelopeStats { field, normalizer, levels, slope, half_width, q90_slope, trend, trend_factor: factor, vanishing })
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Smoothness {
    NotQuasisymmetric,
    Quasisymmetric,
    Uaa,
    C1Alpha(f64),
    C1Lipschitz,
    Affine,
    C2Alpha(f64),
    C2Lipschitz,
}

impl Smoothness {
    /// Position on its ladder, higher is smoother.
    pub fn rank(self) -> u8 {
        match self {
            Smoothness::NotQuasisymmetric => 0,
            Smoothness::Quasisymmetric => 1,
            Smoothness::Uaa => 2,
            Smoothness::C1Alpha(_) => 3,
            Smoothness::C1Lipschitz | Smoothness::C2Alpha(_) => 4,
            Smoothness::Affine | Smoothness::C2Lipschitz => 5,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Smoothness::NotQuasisymmetric => "not-quasisymmetric",
            Smoothness::Quasisymmetric => "quasisymmetric",
            Smoothness::Uaa => "uaa",
            Smoothness::C1Alpha(_) => "C1+alpha",
            Smoothness::C1Lipschitz => "C1+lipschitz",
            Smoothness::Affine => "affine",
            Smoothness::C2Alpha(_) => "C2+alpha",
            Smoothness::C2Lipschitz => "C2+lipschitz",
        }
    }

    pub fn alpha(self) -> Option<f64> {
        match self {
            Smoothness::C1Alpha(a) | Smoothness::C2Alpha(a) => Some(a),
            _ => None,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct SmoothnessVerdict {
    pub verdict: Smoothness,
    /// Raw envelope.
    pub evidence: EnvelopeStats,
    /// Envelope normalized by the rung's top exponent.
    pub normalized: EnvelopeStats,
    /// Cross-ratio verdicts only speak for compact subintervals of the interior.
    pub interior_only: bool,
    /// Fewer than the configured minimum number of levels.
    pub few_levels: bool,
    /// Slope fell inside the ambiguity band of a rung threshold.
    pub ambiguous: bool,
}

// Rung decision on the slope alone: `Some(true)` above `threshold`,
// `Some(false)` below, `None` (treated as below) inside the band.
fn above(slope: f64, threshold: f64, band: f64) -> (bool, bool) {
    if (slope - threshold).abs() <= band {
        (false, true)
    } else {
        (slope > threshold, false)
    }
}

pub fn classify_ratio(ds: &DistortionDataset, config: &ClassifyConfig) -> Result<SmoothnessVerdict> {
    let raw = envelope_fit(ds, Field::Lrd, Normalizer::One, 0, config)?;
    let normalized = envelope_fit(ds, Field::Lrd, Normalizer::InverseLength, 0, config)?;
    let tol = config.exponent_tolerance;
    let band = config.ambiguity_band;
    let mut ambiguous = false;
    let verdict = if raw.vanishing || normalized.trend == Trend::Decaying {
        Smoothness::Affine
    } else if raw.trend == Trend::Growing {
        Smoothness::NotQuasisymmetric
    } else {
        let (lip, amb_lip) = above(raw.slope, 1.0 - tol, band);
        let (alpha, amb_alpha) = above(raw.slope, tol, band);
        if lip && normalized.trend != Trend::Growing {
            Smoothness::C1Lipschitz
        } else if alpha {
            ambiguous |= amb_lip;
            Smoothness::C1Alpha(raw.slope.min(1.0))
        } else {
            ambiguous |= amb_alpha;
            if raw.trend == Trend::Decaying { Smoothness::Uaa } else { Smoothness::Quasisymmetric }
        }
    };
    let few_levels = raw.levels.len() < config.min_levels;
    Ok(SmoothnessVerdict { verdict, evidence: raw, normalized, interior_only: false, few_levels, ambiguous })
}

pub fn classify_cross(ds: &DistortionDataset, config: &ClassifyConfig) -> Result<SmoothnessVerdict> {
    let margin = config.cross_margin;
    let raw = envelope_fit(ds, Field::Crd, Normalizer::One, margin, config)?;
    let normalized = envelope_fit(ds, Field::Crd, Normalizer::InverseLengthSquared, margin, config)?;
    let tol = config.exponent_tolerance;
    let band = config.ambiguity_band;
    let mut ambiguous = false;
    let verdict = if raw.vanishing {
        Smoothness::C2Lipschitz
    } else if raw.trend == Trend::Growing {
        Smoothness::NotQuasisymmetric
    } else {
        let (lip, amb_lip) = above(raw.slope, 2.0 - tol, band);
        let (c2, amb_c2) = above(raw.slope, 1.0 + tol, band);
        let (c1, amb_c1) = above(raw.slope, tol, band);
        if lip && normalized.trend != Trend::Growing {
            Smoothness::C2Lipschitz
        } else if c2 {
            ambiguous |= amb_lip;
            Smoothness::C2Alpha((raw.slope - 1.0).min(1.0))
        } else if c1 {
            ambiguous |= amb_c2;
            Smoothness::C1Alpha(raw.slope.min(1.0))
        } else {
            ambiguous |= amb_c1;
            if raw.trend == Trend::Decaying { Smoothness::Uaa } else { Smoothness::Quasisymmetric }
        }
    };
    let few_levels = raw.levels.len() < config.min_levels;
    Ok(SmoothnessVerdict { verdict, evidence: raw, normalized, interior_only: true, few_levels, ambiguous })
}

/// Agreement tolerance between the two columns of the experiment.
pub const TABLE1_AGREEMENT: f64 = 0.2;

#[derive(Clone, Debug)]
pub struct Table1Report {
    pub depth: usize,
    pub extraction: circle::ExtractionDiagnostics,
    pub table: SolenoidTable,
    /// Hölder fit of the table; `None` for a constant table (Lipschitz row).
    pub solenoid_fit: Option<ModulusFit>,
    pub cross_ratio_fit: Option<ModulusFit>,
    pub ratio: SmoothnessVerdict,
    pub cross: SmoothnessVerdict,
    /// `|alpha_s - lrd slope| <= 0.2`, or both sides trivial.
    pub agreement: bool,
    /// Set when a nonconstant table fits an exponent above `1 + tol`.
    pub guard_fired: bool,
    pub dataset: DistortionDataset,
}

/// Depths used by the experiment at extraction depth `n`.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Table1Depths {
    pub extract: usize,
    pub metric: usize,
    pub realize: usize,
    pub sweep_lo: usize,
    pub sweep_hi: usize,
}

impl Table1Depths {
    pub fn for_depth(n: usize) -> Result<Self> {
        if n < 10 {
            return Err(Error::TooFewLevels { got: n, need: 10 });
        }
        Ok(Self { extract: n, metric: n - 4, realize: n - 2, sweep_lo: 2, sweep_hi: n - 4 })
    }
}

/// Solenoid side versus chart-change side, for map `m` at depth `n`.
pub fn table1_experiment(m: &CircleMap, n: usize, config: &ClassifyConfig, sampling: PairSampling) -> Result<Table1Report> {
    let depths = Table1Depths::for_depth(n)?;
    let count = math::checked_pow(m.degree(), n).ok_or(Error::DepthExceeded { depth: n, max: 0 })? as usize;
    let ex = circle::extract_solenoid(m, n, count - 2)?;
    let table = ex.table.clone();
    let (solenoid_fit, cross_ratio_fit) = if table.is_constant() {
        (None, None)
    } else {
        let evaluator = UltraMetricEvaluator::new(table.clone(), depths.metric)?;
        let s_fit = holder_modulus_fit(&table, &evaluator, sampling)?;
        let cr_fit = holder_fit_values(&table.cross_ratio_values(), &evaluator, sampling).map(|(f, _)| f).ok();
        (Some(s_fit), cr_fit)
    };
    let g = circle::realize_map(&table, depths.realize, circle::DEFAULT_REALIZE_TOLERANCE)?;
    // Source partition: truncate the extraction partition instead of
    // recomputing it.
    let source = ex.partition.truncated(depths.realize);
    let target = g.partition(depths.realize, circle::DEFAULT_INTERVAL_CAP.max(count as u64))?;
    let conj = circle::conjugacy_from_partitions(&source, &target)?;
    let h = Homeomorphism::conjugacy(conj)?;
    let grid = build_grid(GridSource::FromPartition(&source.truncated(depths.sweep_hi)))?;
    let dataset = sweep(&h, &grid, depths.sweep_lo..=depths.sweep_hi)?;
    let ratio = classify_ratio(&dataset, config)?;
    let cross = classify_cross(&dataset, config)?;
    let alpha_h = ratio.evidence.slope;
    let agreement = match solenoid_fit {
        None => ratio.verdict == Smoothness::Affine,
        Some(fit) => (fit.exponent.min(1.0) - alpha_h.min(1.0)).abs() <= TABLE1_AGREEMENT || (fit.exponent - alpha_h).abs() <= TABLE1_AGREEMENT,
    };
    let guard_fired = solenoid_fit.is_some_and(|f| f.exponent > 1.0 + config.exponent_tolerance);
    Ok(Table1Report {
        depth: n,
        extraction: ex.diagnostics,
        table,
        solenoid_fit,
        cross_ratio_fit,
        ratio,
        cross,
        agreement,
        guard_fired,
        dataset,
    })
}
