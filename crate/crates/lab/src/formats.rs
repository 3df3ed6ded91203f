//! CSV artifacts.
//!
//! Floats are written with `Display`, which is the shortest representation
//! that parses back to the same bits (`NaN` and `inf` included).

use std::io::{Read, Write};

use anyhow::{anyhow, bail, Context, Result};
use solenoid_core::distortion::{DistortionDataset, DistortionRecord};
use solenoid_core::solenoid::{Provenance, SolenoidTable};
use solenoid_core::tiling::{PartitionLevels, TilingWindow};

fn reader<R: Read>(r: R) -> csv::Reader<R> {
    csv::ReaderBuilder::new().has_headers(false).flexible(true).trim(csv::Trim::All).from_reader(r)
}

fn field<T: std::str::FromStr>(rec: &csv::StringRecord, i: usize, what: &str) -> Result<T> {
    let raw = rec.get(i).ok_or_else(|| anyhow!("missing column {i} ({what})"))?;
    raw.parse().map_err(|_| anyhow!("cannot parse {what} from {raw:?}"))
}

fn expect_header(rec: Option<csv::StringRecord>, want: &[&str]) -> Result<()> {
    let rec = rec.ok_or_else(|| anyhow!("missing header {}", want.join(",")))?;
    if rec.iter().ne(want.iter().copied()) {
        bail!("expected header {}, found {}", want.join(","), rec.iter().collect::<Vec<_>>().join(","));
    }
    Ok(())
}

fn records<R: Read>(r: R) -> Result<Vec<csv::StringRecord>> {
    reader(r).records().collect::<std::result::Result<_, _>>().context("malformed CSV")
}

/// ```text
/// d,K,provenance
/// 2,3,generated
/// index,value
/// 0,1.2
/// ...
/// ```
pub fn write_table<W: Write>(w: W, t: &SolenoidTable) -> Result<()> {
    let mut out = csv::WriterBuilder::new().flexible(true).from_writer(w);
    out.write_record(["d", "K", "provenance"])?;
    out.write_record([t.degree().to_string(), t.max_index().to_string(), t.provenance().as_str().to_string()])?;
    out.write_record(["index", "value"])?;
    for (k, v) in t.values().iter().enumerate() {
        out.write_record([k.to_string(), v.to_string()])?;
    }
    out.flush()?;
    Ok(())
}

pub fn read_table<R: Read>(r: R) -> Result<SolenoidTable> {
    let mut rows = records(r)?.into_iter();
    expect_header(rows.next(), &["d", "K", "provenance"])?;
    let meta = rows.next().ok_or_else(|| anyhow!("missing table metadata"))?;
    let degree: u32 = field(&meta, 0, "d")?;
    let k: usize = field(&meta, 1, "K")?;
    let provenance = Provenance::parse(meta.get(2).unwrap_or("")).ok_or_else(|| anyhow!("unknown provenance"))?;
    expect_header(rows.next(), &["index", "value"])?;
    let mut values = Vec::with_capacity(k + 1);
    for (expected, rec) in rows.enumerate() {
        let index: usize = field(&rec, 0, "index")?;
        if index != expected {
            bail!("table indices must be 0..=K in order; found {index} at row {expected}");
        }
        values.push(field::<f64>(&rec, 1, "value")?);
    }
    if values.len() != k + 1 {
        bail!("header declares K = {k} but {} values follow", values.len());
    }
    Ok(SolenoidTable::new(degree, values, provenance)?)
}

/// `level,index,left,length`, index 1-based within the level.
pub fn write_partition<W: Write>(w: W, p: &PartitionLevels) -> Result<()> {
    let mut out = csv::Writer::from_writer(w);
    out.write_record(["level", "index", "left", "length"])?;
    for (n, level) in p.levels().iter().enumerate() {
        for (k, (x, l)) in level.endpoints().iter().zip(level.lengths()).enumerate() {
            out.write_record([n.to_string(), (k + 1).to_string(), x.to_string(), l.to_string()])?;
        }
    }
    out.flush()?;
    Ok(())
}

/// Reads partition levels back from their left endpoints; lengths are
/// recomputed.
pub fn read_partition<R: Read>(r: R, degree: u32) -> Result<PartitionLevels> {
    let mut rows = records(r)?.into_iter();
    expect_header(rows.next(), &["level", "index", "left", "length"])?;
    let mut levels: Vec<Vec<f64>> = Vec::new();
    for rec in rows {
        let n: usize = field(&rec, 0, "level")?;
        let k: usize = field(&rec, 1, "index")?;
        let x: f64 = field(&rec, 2, "left")?;
        if n == levels.len() {
            levels.push(Vec::new());
        }
        if n + 1 != levels.len() || k != levels[n].len() + 1 {
            bail!("partition rows must be ordered by level and index (at level {n}, index {k})");
        }
        levels[n].push(x);
    }
    Ok(PartitionLevels::from_endpoints(degree, levels)?)
}

pub const DATASET_HEADER: [&str; 9] = ["n", "beta", "len", "r", "r_h", "lrd", "cr", "cr_h", "crd"];

pub fn write_dataset<W: Write>(w: W, ds: &DistortionDataset) -> Result<()> {
    let mut out = csv::Writer::from_writer(w);
    out.write_record(DATASET_HEADER)?;
    for r in &ds.records {
        out.write_record([
            r.n.to_string(),
            r.beta.to_string(),
            r.len.to_string(),
            r.r.to_string(),
            r.r_h.to_string(),
            r.lrd.to_string(),
            r.cr.to_string(),
            r.cr_h.to_string(),
            r.crd.to_string(),
        ])?;
    }
    out.flush()?;
    Ok(())
}

/// Grid metadata is not stored in the CSV; it is recomputed from the
/// records where needed (domain from the lengths of the coarsest level).
pub fn read_dataset<R: Read>(r: R) -> Result<DistortionDataset> {
    let mut rows = records(r)?.into_iter();
    expect_header(rows.next(), &DATASET_HEADER)?;
    let mut out = Vec::new();
    for rec in rows {
        out.push(DistortionRecord {
            n: field(&rec, 0, "n")?,
            beta: field(&rec, 1, "beta")?,
            len: field(&rec, 2, "len")?,
            r: field(&rec, 3, "r")?,
            r_h: field(&rec, 4, "r_h")?,
            lrd: field(&rec, 5, "lrd")?,
            cr: field(&rec, 6, "cr")?,
            cr_h: field(&rec, 7, "cr_h")?,
            crd: field(&rec, 8, "crd")?,
        });
    }
    if out.windows(2).any(|w| (w[0].n, w[0].beta) >= (w[1].n, w[1].beta)) {
        bail!("dataset records must be ordered by (n, beta)");
    }
    let first = out.first().map(|r| r.n);
    let span: f64 = out.iter().filter(|r| Some(r.n) == first).map(|r| r.len).sum();
    let adjacency_bound = out
        .iter()
        .filter(|r| !r.r.is_nan())
        .map(|r| r.r.max(1.0 / r.r))
        .fold(1.0, f64::max);
    Ok(DistortionDataset { records: out, domain: (0.0, span), adjacency_bound, max_children: 0 })
}

/// ```text
/// d,lo
/// 2,1
/// index,ratio
/// 1,1.2
/// ```
pub fn write_window<W: Write>(w: W, win: &TilingWindow) -> Result<()> {
    let mut out = csv::WriterBuilder::new().flexible(true).from_writer(w);
    out.write_record(["d", "lo"])?;
    out.write_record([win.degree().to_string(), win.lo().to_string()])?;
    out.write_record(["index", "ratio"])?;
    for (i, r) in win.ratios().iter().enumerate() {
        out.write_record([(win.lo() + i as i64).to_string(), r.to_string()])?;
    }
    out.flush()?;
    Ok(())
}

pub fn read_window<R: Read>(r: R) -> Result<TilingWindow> {
    let mut rows = records(r)?.into_iter();
    expect_header(rows.next(), &["d", "lo"])?;
    let meta = rows.next().ok_or_else(|| anyhow!("missing window metadata"))?;
    let degree: u32 = field(&meta, 0, "d")?;
    let lo: i64 = field(&meta, 1, "lo")?;
    expect_header(rows.next(), &["index", "ratio"])?;
    let mut ratios = Vec::new();
    for (i, rec) in rows.enumerate() {
        let index: i64 = field(&rec, 0, "index")?;
        if index != lo + i as i64 {
            bail!("window indices must be consecutive from {lo}");
        }
        ratios.push(field::<f64>(&rec, 1, "ratio")?);
    }
    Ok(TilingWindow::new(degree, lo, ratios)?)
}

/// Pairs of nonnegative integers, `a,b` with that header.
pub fn read_pairs<R: Read>(r: R) -> Result<Vec<(u64, u64)>> {
    let mut rows = records(r)?.into_iter();
    expect_header(rows.next(), &["a", "b"])?;
    rows.map(|rec| Ok((field(&rec, 0, "a")?, field(&rec, 1, "b")?))).collect()
}

/// Monotone samples `x,y` with that header.
pub fn read_samples<R: Read>(r: R) -> Result<(Vec<f64>, Vec<f64>)> {
    let mut rows = records(r)?.into_iter();
    expect_header(rows.next(), &["x", "y"])?;
    let mut xs = Vec::new();
    let mut ys = Vec::new();
    for rec in rows {
        xs.push(field(&rec, 0, "x")?);
        ys.push(field(&rec, 1, "y")?);
    }
    Ok((xs, ys))
}
