//! Command-line definitions.

use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};

use crate::config::ClassifyOverrides;

#[derive(Debug, Parser)]
#[command(name = "solenoid-lab", version, about = "Expanding circle maps, solenoid functions and distortion of grids")]
pub struct Cli {
    #[command(flatten)]
    pub global: GlobalArgs,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Args, Default, Clone)]
pub struct GlobalArgs {
    /// TOML run configuration; flags override its keys.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Worker threads (default: available cores).
    #[arg(long, global = true)]
    pub threads: Option<usize>,
    /// Primary artifact path (default: stdout).
    #[arg(short, long, global = true)]
    pub output: Option<PathBuf>,
    /// Secondary report path.
    #[arg(long, global = true)]
    pub report: Option<PathBuf>,
    /// Seed for pair subsampling.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Override the cap on intervals per partition level (default 2^20).
    #[arg(long, global = true)]
    pub cap: Option<u64>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Circle map to solenoid table and convergence report.
    Extract(ExtractArgs),
    /// Matching residuals of a table.
    VerifyMatching(TableArgs),
    /// Table from free data by the odd-index recursion.
    Generate(GenerateArgs),
    /// One step of the amalgamation operator on a tiling window.
    Amalgamate(AmalgamateArgs),
    /// Table to partition levels.
    Realize(RealizeArgs),
    /// Ultra-metric distances between integer pairs.
    Ultrametric(UltrametricArgs),
    /// Quasiperiodicity and Hölder modulus fits.
    Holder(HolderArgs),
    /// Homeomorphism and grid to distortion dataset.
    Distort(DistortArgs),
    /// Distortion dataset to smoothness verdicts.
    Classify(ClassifyArgs),
    /// Solenoid side against chart-change side for a map.
    Table1(Table1Args),
    /// Realize a table, extract it again and compare.
    Roundtrip(RoundtripArgs),
}

#[derive(Debug, Args, Default, Clone)]
pub struct MapArgs {
    #[arg(long)]
    pub degree: Option<u32>,
    /// linear, trig or realized.
    #[arg(long)]
    pub form: Option<String>,
    /// Amplitudes of harmonics 1, 2, ...
    #[arg(long, value_delimiter = ',', allow_negative_numbers = true)]
    pub eps: Option<Vec<f64>>,
    /// Table for the realized form.
    #[arg(long)]
    pub map_table: Option<PathBuf>,
    #[arg(long)]
    pub realize_depth: Option<usize>,
}

#[derive(Debug, Args, Default, Clone)]
pub struct ExtractArgs {
    #[command(flatten)]
    pub map: MapArgs,
    /// Partition depth N.
    #[arg(long)]
    pub depth: Option<usize>,
    /// Largest table index K (at most d^N - 2).
    #[arg(long)]
    pub max_index: Option<usize>,
    /// Also write the partition levels here.
    #[arg(long)]
    pub partition_output: Option<PathBuf>,
}

#[derive(Debug, Args, Default, Clone)]
pub struct TableArgs {
    #[arg(long)]
    pub table: Option<PathBuf>,
}

#[derive(Debug, Args, Default, Clone)]
pub struct GenerateArgs {
    #[arg(long)]
    pub a1: Option<f64>,
    /// a_2, a_4, ..., a_{2N}.
    #[arg(long, value_delimiter = ',')]
    pub evens: Option<Vec<f64>>,
    /// s(0); defaults to a_1.
    #[arg(long)]
    pub wraparound: Option<f64>,
}

#[derive(Debug, Args, Default, Clone)]
pub struct AmalgamateArgs {
    /// Window CSV.
    #[arg(long)]
    pub window: Option<PathBuf>,
    /// Alternatively, a table (window r_m = s(m), m >= 1).
    #[arg(long)]
    pub table: Option<PathBuf>,
}

#[derive(Debug, Args, Default, Clone)]
pub struct RealizeArgs {
    #[arg(long)]
    pub table: Option<PathBuf>,
    #[arg(long)]
    pub depth: Option<usize>,
    /// Build the realized map and output its partition instead.
    #[arg(long)]
    pub via_map: bool,
    #[arg(long)]
    pub consistency_tolerance: Option<f64>,
    #[arg(long)]
    pub realize_tolerance: Option<f64>,
}

#[derive(Debug, Args, Default, Clone)]
pub struct UltrametricArgs {
    #[arg(long)]
    pub table: Option<PathBuf>,
    /// Evaluator depth.
    #[arg(long)]
    pub depth: Option<usize>,
    /// CSV of `a,b` pairs.
    #[arg(long)]
    pub pairs: Option<PathBuf>,
    /// All pairs of integers below d^m.
    #[arg(long)]
    pub all_pairs_depth: Option<usize>,
    #[arg(long)]
    pub consistency_tolerance: Option<f64>,
}

#[derive(Debug, Args, Default, Clone)]
pub struct HolderArgs {
    #[arg(long)]
    pub table: Option<PathBuf>,
    /// Evaluator depth.
    #[arg(long)]
    pub depth: Option<usize>,
    #[arg(long)]
    pub max_pairs: Option<usize>,
    #[arg(long)]
    pub consistency_tolerance: Option<f64>,
}

#[derive(Debug, Args, Default, Clone)]
pub struct DistortArgs {
    /// affine, moebius, power, perturbation, sampled or conjugacy.
    #[arg(long)]
    pub homeo: Option<String>,
    /// Parameters: affine a,b; moebius a,b,c,d; power gamma; perturbation c1,p1,c2,p2,...
    #[arg(long, value_delimiter = ',', allow_negative_numbers = true)]
    pub params: Option<Vec<f64>>,
    /// Samples CSV (`x,y`) for the sampled kind.
    #[arg(long)]
    pub homeo_file: Option<PathBuf>,
    /// Partition depth for the conjugacy kind.
    #[arg(long)]
    pub homeo_depth: Option<usize>,
    #[command(flatten)]
    pub map: MapArgs,
    /// dyadic, partition or explicit.
    #[arg(long)]
    pub grid: Option<String>,
    #[arg(long)]
    pub grid_depth: Option<usize>,
    /// Partition CSV for the partition and explicit sources.
    #[arg(long)]
    pub grid_file: Option<PathBuf>,
    #[arg(long, value_delimiter = ',', allow_negative_numbers = true)]
    pub domain: Option<Vec<f64>>,
    /// Inclusive level range `lo..hi`.
    #[arg(long)]
    pub levels: Option<String>,
}

#[derive(Debug, Args, Default, Clone)]
pub struct ClassifyFlags {
    #[arg(long)]
    pub exponent_tolerance: Option<f64>,
    #[arg(long)]
    pub trend_factor: Option<f64>,
    #[arg(long)]
    pub min_levels: Option<usize>,
    #[arg(long)]
    pub cross_margin: Option<usize>,
    #[arg(long)]
    pub zero_floor: Option<f64>,
    #[arg(long)]
    pub ambiguity_band: Option<f64>,
}

impl ClassifyFlags {
    pub fn overrides(&self) -> ClassifyOverrides {
        ClassifyOverrides {
            exponent_tolerance: self.exponent_tolerance,
            trend_factor: self.trend_factor,
            min_levels: self.min_levels,
            cross_margin: self.cross_margin,
            zero_floor: self.zero_floor,
            ambiguity_band: self.ambiguity_band,
        }
    }
}

#[derive(Debug, Args, Default, Clone)]
pub struct ClassifyArgs {
    #[arg(long)]
    pub dataset: Option<PathBuf>,
    #[command(flatten)]
    pub tolerances: ClassifyFlags,
}

#[derive(Debug, Args, Default, Clone)]
pub struct Table1Args {
    #[command(flatten)]
    pub map: MapArgs,
    #[arg(long)]
    pub depth: Option<usize>,
    #[arg(long)]
    pub max_pairs: Option<usize>,
    #[command(flatten)]
    pub tolerances: ClassifyFlags,
}

#[derive(Debug, Args, Default, Clone)]
pub struct RoundtripArgs {
    #[arg(long)]
    pub table: Option<PathBuf>,
    /// Realization depth (default: deepest the table supports).
    #[arg(long)]
    pub depth: Option<usize>,
    /// Extraction depth (default: realization depth - 2).
    #[arg(long)]
    pub extract_depth: Option<usize>,
    /// Compare indices up to this (default: d^(extract depth - 4)).
    #[arg(long)]
    pub compare_max_index: Option<usize>,
    #[arg(long)]
    pub realize_tolerance: Option<f64>,
}

/// Parses `lo..hi` (inclusive).
pub fn parse_levels(s: &str) -> anyhow::Result<[usize; 2]> {
    let (lo, hi) = s.split_once("..").ok_or_else(|| anyhow::anyhow!("level range must look like lo..hi, got {s:?}"))?;
    let lo: usize = lo.trim().parse()?;
    let hi: usize = hi.trim().trim_start_matches('=').parse()?;
    if lo > hi {
        anyhow::bail!("empty level range {s:?}");
    }
    Ok([lo, hi])
}
