//! Subcommand implementations.

use std::fs::File;
use std::io::{BufReader, Write};
use std::path::{Path, PathBuf};

use anyhow::{anyhow, bail, Context, Result};
use rayon::prelude::*;
use serde::Serialize;
use solenoid_core::circle::{self, CircleMap, TrigTerm, DEFAULT_INTERVAL_CAP, DEFAULT_REALIZE_TOLERANCE};
use solenoid_core::classify::{self, ClassifyConfig, SmoothnessVerdict};
use solenoid_core::dadic::{agreement_depth, Agreement, DadicWord};
use solenoid_core::distortion::{self, build_grid, GridSource, GridSpec, Homeomorphism};
use solenoid_core::math::checked_pow;
use solenoid_core::solenoid::{self, ModulusFit, PairSampling, SolenoidTable};
use solenoid_core::tiling::{self, TilingWindow, DEFAULT_CONSISTENCY_TOLERANCE};
use solenoid_core::ultrametric::UltraMetricEvaluator;

use crate::cli::{self, Command, GlobalArgs, MapArgs};
use crate::config::{self, MapConfig, RunConfig};
use crate::formats;

/// Everything a subcommand needs besides its own flags.
pub struct RunContext {
    pub cfg: RunConfig,
    pub output: Option<PathBuf>,
    pub report: Option<PathBuf>,
    pub seed: Option<u64>,
    pub cap: u64,
}

impl RunContext {
    pub fn new(global: &GlobalArgs, cfg: RunConfig) -> Self {
        Self {
            output: global.output.clone().or_else(|| cfg.output.clone()),
            report: global.report.clone().or_else(|| cfg.report.clone()),
            seed: global.seed.or(cfg.seed),
            cap: global.cap.or(cfg.cap).unwrap_or(DEFAULT_INTERVAL_CAP),
            cfg,
        }
    }

    fn sampling(&self, max_pairs: Option<usize>) -> PairSampling {
        let mut s = PairSampling::default();
        if let Some(seed) = self.seed {
            s.seed = seed;
        }
        if let Some(m) = max_pairs.or(self.cfg.max_pairs) {
            s.max_pairs = m;
        }
        s
    }

    fn check_cap(&self, degree: u32, depth: usize) -> Result<()> {
        let count = checked_pow(degree, depth).unwrap_or(u64::MAX);
        if count > self.cap {
            return Err(solenoid_core::Error::CapExceeded { level: depth, intervals: count, cap: self.cap })
                .context("depth exceeds the interval cap; pass --cap to raise it");
        }
        Ok(())
    }

    /// Writes the primary artifact and, if any, the report. Without an
    /// output path the artifact goes to stdout and the report only to its
    /// own path; with one, the report defaults to stdout.
    fn emit(&self, artifact: &[u8], report: Option<&str>) -> Result<()> {
        match &self.output {
            Some(path) => write_file(path, artifact)?,
            None => stdout(artifact)?,
        }
        if let Some(text) = report {
            match (&self.report, &self.output) {
                (Some(path), _) => write_file(path, text.as_bytes())?,
                (None, Some(_)) => stdout(text.as_bytes())?,
                (None, None) => {}
            }
        }
        Ok(())
    }
}

fn write_file(path: &Path, bytes: &[u8]) -> Result<()> {
    std::fs::write(path, bytes).with_context(|| format!("writing {}", path.display()))
}

fn stdout(bytes: &[u8]) -> Result<()> {
    let mut out = std::io::stdout().lock();
    out.write_all(bytes)?;
    out.flush()?;
    Ok(())
}

fn open(path: &Path) -> Result<BufReader<File>> {
    Ok(BufReader::new(File::open(path).with_context(|| format!("opening {}", path.display()))?))
}

fn need<T>(v: Option<T>, what: &str) -> Result<T> {
    v.ok_or_else(|| anyhow!("missing required setting `{what}`"))
}

fn load_table(flag: &Option<PathBuf>, cfg: &RunConfig) -> Result<SolenoidTable> {
    let path = need(flag.clone().or_else(|| cfg.table.clone()), "table")?;
    formats::read_table(open(&path)?).with_context(|| format!("reading table {}", path.display()))
}

fn toml_text<T: Serialize>(v: &T) -> Result<String> {
    Ok(toml::to_string(v)?)
}

fn csv_bytes(f: impl FnOnce(&mut Vec<u8>) -> Result<()>) -> Result<Vec<u8>> {
    let mut buf = Vec::new();
    f(&mut buf)?;
    Ok(buf)
}

/// Largest `n` with `d^n - 2 <= K`.
fn deepest_level(t: &SolenoidTable) -> usize {
    let mut n = 0;
    while checked_pow(t.degree(), n + 1).is_some_and(|c| c <= t.max_index() as u64 + 2) {
        n += 1;
    }
    n
}

pub fn resolve_map(args: &MapArgs, cfg: &MapConfig, realize_tolerance: Option<f64>) -> Result<CircleMap> {
    let degree = args.degree.or(cfg.degree).unwrap_or(2);
    let eps = args.eps.clone().or_else(|| cfg.eps.clone());
    let terms: Option<Vec<TrigTerm>> = match (&eps, &cfg.terms) {
        (Some(eps), _) => Some(eps.iter().enumerate().map(|(i, &a)| TrigTerm::new(i as u32 + 1, a)).collect()),
        (None, Some(t)) => Some(t.iter().map(|t| TrigTerm { harmonic: t.harmonic, amplitude: t.amplitude, phase: t.phase }).collect()),
        (None, None) => None,
    };
    let form = args.form.clone().or_else(|| cfg.form.clone()).unwrap_or_else(|| if terms.is_some() { "trig".into() } else { "linear".into() });
    Ok(match form.as_str() {
        "linear" => CircleMap::linear(degree)?,
        "trig" => CircleMap::trig(degree, need(terms, "map.eps or map.terms")?)?,
        "realized" => {
            let path = need(args.map_table.clone().or_else(|| cfg.table.clone()), "map.table")?;
            let t = formats::read_table(open(&path)?)?;
            let depth = args.realize_depth.or(cfg.realize_depth).unwrap_or_else(|| deepest_level(&t));
            circle::realize_map(&t, depth, realize_tolerance.unwrap_or(DEFAULT_REALIZE_TOLERANCE)).context("realize_map")?
        }
        other => bail!("unknown map form {other:?} (expected linear, trig or realized)"),
    })
}

pub fn run(command: &Command, ctx: &RunContext) -> Result<()> {
    match command {
        Command::Extract(a) => extract(a, ctx),
        Command::VerifyMatching(a) => verify_matching(a, ctx),
        Command::Generate(a) => generate(a, ctx),
        Command::Amalgamate(a) => amalgamate(a, ctx),
        Command::Realize(a) => realize(a, ctx),
        Command::Ultrametric(a) => ultrametric(a, ctx),
        Command::Holder(a) => holder(a, ctx),
        Command::Distort(a) => distort(a, ctx),
        Command::Classify(a) => classify_cmd(a, ctx),
        Command::Table1(a) => table1(a, ctx),
        Command::Roundtrip(a) => roundtrip(a, ctx),
    }
}

#[derive(Serialize)]
struct LevelSup {
    level: usize,
    sup: f64,
}

#[derive(Serialize)]
struct ExtractReport {
    degree: u32,
    depth: usize,
    max_index: usize,
    fixed_point: f64,
    decay_rate: f64,
    cauchy: Vec<LevelSup>,
}

fn extract(a: &cli::ExtractArgs, ctx: &RunContext) -> Result<()> {
    let cfg = &ctx.cfg;
    let m = resolve_map(&a.map, &cfg.map, cfg.realize_tolerance)?;
    let depth = a.depth.or(cfg.depth).unwrap_or(12);
    ctx.check_cap(m.degree(), depth)?;
    let d = m.degree();
    let default_k = checked_pow(d, depth.div_ceil(2).saturating_sub(1)).map_or(1, |c| c as usize).saturating_sub(1).max(1);
    let k = a.max_index.or(cfg.max_index).unwrap_or(default_k);
    let ex = circle::extract_solenoid(&m, depth, k).context("extract_solenoid")?;
    if let Some(path) = a.partition_output.clone().or_else(|| cfg.partition_output.clone()) {
        let bytes = csv_bytes(|b| formats::write_partition(b, &ex.partition))?;
        write_file(&path, &bytes)?;
    }
    let report = ExtractReport {
        degree: d,
        depth,
        max_index: k,
        fixed_point: m.fixed_point()?,
        decay_rate: ex.diagnostics.decay_rate,
        cauchy: ex.diagnostics.level_sup.iter().map(|&(level, sup)| LevelSup { level, sup }).collect(),
    };
    let table = csv_bytes(|b| formats::write_table(b, &ex.table))?;
    ctx.emit(&table, Some(&toml_text(&report)?))
}

#[derive(Serialize)]
struct MatchingReport {
    degree: u32,
    max_index: usize,
    max_matching_index: usize,
    max_residual: f64,
    residuals: Vec<f64>,
}

fn verify_matching(a: &cli::TableArgs, ctx: &RunContext) -> Result<()> {
    let t = load_table(&a.table, &ctx.cfg)?;
    let residuals = t.matching_residuals();
    let report = MatchingReport {
        degree: t.degree(),
        max_index: t.max_index(),
        max_matching_index: t.max_matching_index(),
        max_residual: residuals.iter().copied().fold(0.0, f64::max),
        residuals,
    };
    ctx.emit(toml_text(&report)?.as_bytes(), None)
}

fn generate(a: &cli::GenerateArgs, ctx: &RunContext) -> Result<()> {
    let f = &ctx.cfg.free_data;
    let a1 = need(a.a1.or(f.a1), "a1")?;
    let evens = need(a.evens.clone().or_else(|| f.evens.clone()), "evens")?;
    let t = solenoid::generate_from_free_data(a1, &evens, a.wraparound.or(f.wraparound)).context("generate_from_free_data")?;
    ctx.emit(&csv_bytes(|b| formats::write_table(b, &t))?, None)
}

#[derive(Serialize)]
struct AmalgamateReport {
    degree: u32,
    input_range: [i64; 2],
    coarse_range: [i64; 2],
    fixed_point_residual: f64,
}

fn amalgamate(a: &cli::AmalgamateArgs, ctx: &RunContext) -> Result<()> {
    let window = match (a.window.clone().or_else(|| ctx.cfg.window.clone()), &a.table) {
        (Some(path), _) => formats::read_window(open(&path)?)?,
        (None, table) => TilingWindow::from_table(&load_table(table, &ctx.cfg)?)?,
    };
    let coarse = window.amalgamate().context("amalgamate")?;
    let report = AmalgamateReport {
        degree: window.degree(),
        input_range: [window.lo(), window.hi()],
        coarse_range: [coarse.lo(), coarse.hi()],
        fixed_point_residual: window.fixed_point_residual()?,
    };
    ctx.emit(&csv_bytes(|b| formats::write_window(b, &coarse))?, Some(&toml_text(&report)?))
}

fn realize(a: &cli::RealizeArgs, ctx: &RunContext) -> Result<()> {
    let cfg = &ctx.cfg;
    let t = load_table(&a.table, cfg)?;
    let depth = a.depth.or(cfg.depth).unwrap_or_else(|| deepest_level(&t));
    ctx.check_cap(t.degree(), depth)?;
    let levels = if a.via_map {
        let tol = a.realize_tolerance.or(cfg.realize_tolerance).unwrap_or(DEFAULT_REALIZE_TOLERANCE);
        let m = circle::realize_map(&t, depth, tol).context("realize_map")?;
        m.partition(depth, ctx.cap).context("partition")?
    } else {
        let tol = a.consistency_tolerance.or(cfg.consistency_tolerance).unwrap_or(DEFAULT_CONSISTENCY_TOLERANCE);
        tiling::realize_levels(&t, depth, tol).context("realize_levels")?
    };
    ctx.emit(&csv_bytes(|b| formats::write_partition(b, &levels))?, None)
}

fn agreement_label(a: Agreement) -> String {
    match a {
        Agreement::Disjoint => "disjoint".into(),
        Agreement::Prefix(n) => format!("prefix:{n}"),
        Agreement::Identical(n) => format!("identical:{n}"),
    }
}

fn ultrametric(a: &cli::UltrametricArgs, ctx: &RunContext) -> Result<()> {
    let cfg = &ctx.cfg;
    let t = load_table(&a.table, cfg)?;
    let d = t.degree();
    let depth = a.depth.or(cfg.depth).unwrap_or_else(|| t.word_depth().saturating_sub(3).max(1));
    let tol = a.consistency_tolerance.or(cfg.consistency_tolerance).unwrap_or(DEFAULT_CONSISTENCY_TOLERANCE);
    let ev = UltraMetricEvaluator::with_tolerance(t, depth, tol).context("realize_levels")?;
    let pairs: Vec<(u64, u64)> = match (a.pairs.clone().or_else(|| cfg.pairs.clone()), a.all_pairs_depth.or(cfg.all_pairs_depth)) {
        (Some(path), _) => formats::read_pairs(open(&path)?)?,
        (None, Some(m)) => {
            let n = need(checked_pow(d, m), "all_pairs_depth within range")?;
            (0..n).flat_map(|x| (x + 1..n).map(move |y| (x, y))).collect()
        }
        (None, None) => bail!("ultrametric needs `pairs` or `all_pairs_depth`"),
    };
    let rows: Vec<(u64, u64, f64, String)> = pairs
        .par_iter()
        .map(|&(x, y)| {
            let wx = DadicWord::from_integer(x, d, depth)?;
            let wy = DadicWord::from_integer(y, d, depth)?;
            let m = ev.u_metric(&wx, &wy)?;
            Ok((x, y, m.value, agreement_label(agreement_depth(&wx, &wy)?)))
        })
        .collect::<solenoid_core::Result<_>>()
        .context("u_metric")?;
    let bytes = csv_bytes(|b| {
        let mut w = csv::Writer::from_writer(b);
        w.write_record(["a", "b", "u", "agreement"])?;
        for (x, y, u, label) in rows {
            w.write_record([x.to_string(), y.to_string(), u.to_string(), label])?;
        }
        w.flush()?;
        Ok(())
    })?;
    ctx.emit(&bytes, None)
}

#[derive(Serialize)]
struct FitReport {
    degenerate: bool,
    exponent: f64,
    constant: f64,
    residual: f64,
    pairs_used: usize,
}

impl FitReport {
    /// Degenerate fits print the `mu = 0` / `alpha = +inf` style sentinel
    /// given by `sentinel`.
    fn from(fit: solenoid_core::Result<ModulusFit>, sentinel: f64) -> Result<Self> {
        match fit {
            Ok(f) => Ok(Self { degenerate: false, exponent: f.exponent, constant: f.constant, residual: f.residual, pairs_used: f.pairs_used }),
            Err(solenoid_core::Error::Degenerate) => Ok(Self { degenerate: true, exponent: sentinel, constant: 0.0, residual: 0.0, pairs_used: 0 }),
            Err(e) => Err(e.into()),
        }
    }
}

#[derive(Serialize)]
struct HolderReport {
    degree: u32,
    max_index: usize,
    metric_depth: usize,
    quasiperiodicity: FitReport,
    solenoid: FitReport,
    cross_ratio: FitReport,
}

fn holder(a: &cli::HolderArgs, ctx: &RunContext) -> Result<()> {
    let cfg = &ctx.cfg;
    let t = load_table(&a.table, cfg)?;
    let depth = a.depth.or(cfg.depth).unwrap_or_else(|| t.word_depth().saturating_sub(3).max(1));
    let tol = a.consistency_tolerance.or(cfg.consistency_tolerance).unwrap_or(DEFAULT_CONSISTENCY_TOLERANCE);
    let sampling = ctx.sampling(a.max_pairs);
    let ev = UltraMetricEvaluator::with_tolerance(t.clone(), depth, tol).context("realize_levels")?;
    let quasi = FitReport::from(solenoid::quasiperiodicity_modulus(&t), 0.0)?;
    let sfit = FitReport::from(solenoid::holder_modulus_fit(&t, &ev, sampling), f64::INFINITY)?;
    let cr = t.cross_ratio_values();
    let crfit = FitReport::from(if t.is_constant() { Err(solenoid_core::Error::Degenerate) } else { solenoid::holder_fit_values(&cr, &ev, sampling).map(|(f, _)| f) }, f64::INFINITY)?;
    let report = HolderReport { degree: t.degree(), max_index: t.max_index(), metric_depth: depth, quasiperiodicity: quasi, solenoid: sfit, cross_ratio: crfit };
    ctx.emit(toml_text(&report)?.as_bytes(), None)
}

fn param_list(params: &[f64], count: usize, kind: &str) -> Result<()> {
    if params.len() != count {
        bail!("{kind} takes {count} parameters, got {}", params.len());
    }
    Ok(())
}

fn resolve_homeomorphism(a: &cli::DistortArgs, ctx: &RunContext, domain: (f64, f64), grid_depth: usize) -> Result<Homeomorphism> {
    let hc = &ctx.cfg.homeomorphism;
    let kind = need(a.homeo.clone().or_else(|| hc.kind.clone()), "homeomorphism.kind")?;
    let params = a.params.clone().or_else(|| hc.params.clone()).unwrap_or_default();
    Ok(match kind.as_str() {
        "affine" => {
            param_list(&params, 2, "affine")?;
            Homeomorphism::affine(params[0], params[1], domain)?
        }
        "moebius" => {
            param_list(&params, 4, "moebius")?;
            Homeomorphism::moebius(params[0], params[1], params[2], params[3], domain)?
        }
        "power" => {
            param_list(&params, 1, "power")?;
            Homeomorphism::power(params[0], domain)?
        }
        "perturbation" => {
            if params.is_empty() || !params.len().is_multiple_of(2) {
                bail!("perturbation takes coefficient, exponent pairs");
            }
            Homeomorphism::perturbation(params.chunks(2).map(|c| (c[0], c[1])).collect(), domain)?
        }
        "sampled" => {
            let path = need(a.homeo_file.clone().or_else(|| hc.path.clone()), "homeomorphism.path")?;
            let (xs, ys) = formats::read_samples(open(&path)?)?;
            Homeomorphism::sampled(xs, ys)?
        }
        "conjugacy" => {
            let target = resolve_map(&a.map, &ctx.cfg.map, ctx.cfg.realize_tolerance)?;
            let depth = a.homeo_depth.or(hc.depth).unwrap_or(grid_depth + 2);
            ctx.check_cap(target.degree(), depth)?;
            let source = CircleMap::linear(target.degree())?;
            Homeomorphism::conjugacy(circle::conjugacy_map(&source, &target, depth).context("conjugacy_map")?)?
        }
        other => bail!("unknown homeomorphism kind {other:?}"),
    })
}

fn explicit_levels(p: &Path) -> Result<Vec<Vec<f64>>> {
    let mut rows = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(open(p)?);
    let mut levels: Vec<Vec<f64>> = Vec::new();
    let mut ends: Vec<f64> = Vec::new();
    for rec in rows.records() {
        let rec = rec?;
        let n: usize = rec.get(0).unwrap_or("").parse().context("level")?;
        let left: f64 = rec.get(2).unwrap_or("").parse().context("left")?;
        let len: f64 = rec.get(3).unwrap_or("").parse().context("length")?;
        if n == levels.len() {
            levels.push(Vec::new());
            ends.push(0.0);
        } else if n + 1 != levels.len() {
            bail!("explicit grid rows must be ordered by level");
        }
        levels[n].push(left);
        ends[n] = left + len;
    }
    for (l, e) in levels.iter_mut().zip(ends) {
        l.push(e);
    }
    Ok(levels)
}

fn resolve_grid(a: &cli::DistortArgs, ctx: &RunContext, domain: (f64, f64), levels: [usize; 2]) -> Result<GridSpec> {
    let gc = &ctx.cfg.grid;
    let source = a.grid.clone().or_else(|| gc.source.clone()).unwrap_or_else(|| "dyadic".into());
    let depth = a.grid_depth.or(gc.depth).unwrap_or(levels[1]);
    let grid = match source.as_str() {
        "dyadic" => {
            ctx.check_cap(2, depth)?;
            build_grid(GridSource::Dyadic { a: domain.0, b: domain.1, depth })?
        }
        "partition" => {
            let path = need(a.grid_file.clone().or_else(|| gc.path.clone()), "grid.path")?;
            let degree = a.map.degree.or(ctx.cfg.map.degree).unwrap_or(2);
            let p = formats::read_partition(open(&path)?, degree)?;
            build_grid(GridSource::FromPartition(&p))?
        }
        "explicit" => {
            let path = need(a.grid_file.clone().or_else(|| gc.path.clone()), "grid.path")?;
            build_grid(GridSource::Explicit(explicit_levels(&path)?))?
        }
        "map" => {
            let m = resolve_map(&a.map, &ctx.cfg.map, ctx.cfg.realize_tolerance)?;
            ctx.check_cap(m.degree(), depth)?;
            build_grid(GridSource::FromPartition(&m.partition(depth, ctx.cap).context("partition")?))?
        }
        other => bail!("unknown grid source {other:?} (expected dyadic, partition, explicit or map)"),
    };
    Ok(grid)
}

/// Sweep with one task per level; records come back in level order.
pub fn parallel_sweep(h: &Homeomorphism, g: &GridSpec, levels: [usize; 2]) -> Result<distortion::DistortionDataset> {
    let per_level: Vec<Vec<distortion::DistortionRecord>> = (levels[0]..=levels[1])
        .into_par_iter()
        .map(|n| distortion::sweep_level(h, g, n))
        .collect::<solenoid_core::Result<_>>()
        .context("sweep")?;
    Ok(distortion::assemble(g, per_level.into_iter().flatten().collect()))
}

fn distort(a: &cli::DistortArgs, ctx: &RunContext) -> Result<()> {
    let cfg = &ctx.cfg;
    let domain = match a.domain.clone().or_else(|| cfg.grid.domain.map(|d| d.to_vec())) {
        Some(d) if d.len() == 2 => (d[0], d[1]),
        Some(_) => bail!("domain takes two numbers a,b"),
        None => (0.0, 1.0),
    };
    let levels = match (&a.levels, cfg.levels) {
        (Some(s), _) => cli::parse_levels(s)?,
        (None, Some(l)) => l,
        (None, None) => {
            let depth = a.grid_depth.or(cfg.grid.depth).unwrap_or(10);
            [depth.min(2), depth]
        }
    };
    let grid = resolve_grid(a, ctx, domain, levels)?;
    if levels[1] > grid.depth() {
        bail!("level range ends at {} but the grid has depth {}", levels[1], grid.depth());
    }
    let h = resolve_homeomorphism(a, ctx, domain, grid.depth())?;
    let ds = parallel_sweep(&h, &grid, levels)?;
    ctx.emit(&csv_bytes(|b| formats::write_dataset(b, &ds))?, None)
}

#[derive(Serialize)]
struct EnvelopeSection {
    slope: f64,
    half_width: f64,
    q90_slope: f64,
    trend: &'static str,
    trend_factor: f64,
    levels: usize,
}

impl From<&classify::EnvelopeStats> for EnvelopeSection {
    fn from(s: &classify::EnvelopeStats) -> Self {
        Self { slope: s.slope, half_width: s.half_width, q90_slope: s.q90_slope, trend: s.trend.as_str(), trend_factor: s.trend_factor, levels: s.levels.len() }
    }
}

#[derive(Serialize)]
pub struct VerdictSection {
    verdict: &'static str,
    #[serde(skip_serializing_if = "Option::is_none")]
    alpha: Option<f64>,
    caveats: Vec<&'static str>,
    raw: EnvelopeSection,
    normalized: EnvelopeSection,
}

impl From<&SmoothnessVerdict> for VerdictSection {
    fn from(v: &SmoothnessVerdict) -> Self {
        let mut caveats = Vec::new();
        if v.interior_only {
            caveats.push("interior-only");
        }
        if v.few_levels {
            caveats.push("few-levels");
        }
        if v.ambiguous {
            caveats.push("ambiguous");
        }
        Self { verdict: v.verdict.name(), alpha: v.verdict.alpha(), caveats, raw: (&v.evidence).into(), normalized: (&v.normalized).into() }
    }
}

#[derive(Serialize)]
struct TolerancesSection {
    exponent_tolerance: f64,
    trend_factor: f64,
    min_levels: usize,
    cross_margin: usize,
    zero_floor: f64,
    ambiguity_band: f64,
}

impl From<&ClassifyConfig> for TolerancesSection {
    fn from(c: &ClassifyConfig) -> Self {
        Self {
            exponent_tolerance: c.exponent_tolerance,
            trend_factor: c.trend_factor,
            min_levels: c.min_levels,
            cross_margin: c.cross_margin,
            zero_floor: c.zero_floor,
            ambiguity_band: c.ambiguity_band,
        }
    }
}

#[derive(Serialize)]
struct VerdictReport {
    ratio: VerdictSection,
    cross: VerdictSection,
    tolerances: TolerancesSection,
}

fn classify_cmd(a: &cli::ClassifyArgs, ctx: &RunContext) -> Result<()> {
    let path = need(a.dataset.clone().or_else(|| ctx.cfg.dataset.clone()), "dataset")?;
    let ds = formats::read_dataset(open(&path)?)?;
    let c = a.tolerances.overrides().or(ctx.cfg.classify).resolve()?;
    let ratio = classify::classify_ratio(&ds, &c).context("classify_ratio")?;
    let cross = classify::classify_cross(&ds, &c).context("classify_cross")?;
    let report = VerdictReport { ratio: (&ratio).into(), cross: (&cross).into(), tolerances: (&c).into() };
    ctx.emit(toml_text(&report)?.as_bytes(), None)
}

#[derive(Serialize)]
struct SolenoidSide {
    constant_table: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    alpha: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    holder_constant: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    cross_ratio_alpha: Option<f64>,
    extraction_decay_rate: f64,
}

#[derive(Serialize)]
struct Table1Text {
    depth: usize,
    agreement: bool,
    guard_fired: bool,
    agreement_tolerance: f64,
    solenoid: SolenoidSide,
    ratio: VerdictSection,
    cross: VerdictSection,
}

fn table1(a: &cli::Table1Args, ctx: &RunContext) -> Result<()> {
    let cfg = &ctx.cfg;
    let m = resolve_map(&a.map, &cfg.map, cfg.realize_tolerance)?;
    let depth = a.depth.or(cfg.depth).unwrap_or(14);
    ctx.check_cap(m.degree(), depth)?;
    let c = a.tolerances.overrides().or(cfg.classify).resolve()?;
    let r = classify::table1_experiment(&m, depth, &c, ctx.sampling(a.max_pairs)).context("table1_experiment")?;
    let text = Table1Text {
        depth,
        agreement: r.agreement,
        guard_fired: r.guard_fired,
        agreement_tolerance: classify::TABLE1_AGREEMENT,
        solenoid: SolenoidSide {
            constant_table: r.table.is_constant(),
            alpha: r.solenoid_fit.map(|f| f.exponent),
            holder_constant: r.solenoid_fit.map(|f| f.constant),
            cross_ratio_alpha: r.cross_ratio_fit.map(|f| f.exponent),
            extraction_decay_rate: r.extraction.decay_rate,
        },
        ratio: (&r.ratio).into(),
        cross: (&r.cross).into(),
    };
    ctx.emit(toml_text(&text)?.as_bytes(), None)
}

#[derive(Serialize)]
struct RoundtripReport {
    realize_depth: usize,
    extract_depth: usize,
    compare_max_index: usize,
    sup_error: f64,
    full_range_max_index: usize,
    full_range_sup_error: f64,
}

pub fn sup_difference(a: &[f64], b: &[f64], upto: usize) -> f64 {
    a.iter().zip(b).take(upto + 1).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

fn roundtrip(a: &cli::RoundtripArgs, ctx: &RunContext) -> Result<()> {
    let cfg = &ctx.cfg;
    let t = load_table(&a.table, cfg)?;
    let d = t.degree();
    let realize_depth = a.depth.or(cfg.depth).unwrap_or_else(|| deepest_level(&t));
    let extract_depth = a.extract_depth.or(cfg.extract_depth).unwrap_or(realize_depth.saturating_sub(2).max(1));
    ctx.check_cap(d, realize_depth.max(extract_depth))?;
    let tol = a.realize_tolerance.or(cfg.realize_tolerance).unwrap_or(DEFAULT_REALIZE_TOLERANCE);
    let g = circle::realize_map(&t, realize_depth, tol).context("realize_map")?;
    let reach = need(checked_pow(d, extract_depth), "extract depth within range")? as usize - 2;
    let full = reach.min(t.max_index());
    let compare = a
        .compare_max_index
        .or(cfg.compare_max_index)
        .unwrap_or_else(|| checked_pow(d, extract_depth.saturating_sub(4)).map_or(1, |c| c as usize))
        .min(full);
    let back = circle::extract_solenoid(&g, extract_depth, full).context("extract_solenoid")?;
    let report = RoundtripReport {
        realize_depth,
        extract_depth,
        compare_max_index: compare,
        sup_error: sup_difference(back.table.values(), t.values(), compare),
        full_range_max_index: full,
        full_range_sup_error: sup_difference(back.table.values(), t.values(), full),
    };
    ctx.emit(toml_text(&report)?.as_bytes(), None)
}

/// Loads the config named by the flags, if any.
pub fn load_config(global: &GlobalArgs) -> Result<RunConfig> {
    match &global.config {
        Some(p) => config::load(p),
        None => Ok(RunConfig::default()),
    }
}
