//! Monte Carlo sweeps over sentence length and chunk size, and their tables.
//!
//! Every cell seeds its replicates from `derive_seed(master, cell_index)`,
//! where the index encodes the cell's coordinates, and replicate `r` draws
//! from stream `r` of that seed. Results therefore depend only on the master
//! seed and the cell, never on the worker count or scheduling.

use std::collections::BTreeMap;
use std::fs;
use std::io::{self, BufRead, Write};
use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::generate::{gen_family, ChunkConfig, GenerateError};
use crate::metrics::{aggregate, count_type1, count_type2, mdd_plain, pearson, MetricsError};
use crate::model::{derive_seed, ChunkMode, Family, RngStream, SweepRow};
use crate::treebank::CorpusSummary;

#[derive(Debug, Error)]
pub enum ExperimentError {
    #[error(transparent)]
    Generate(#[from] GenerateError),
    #[error(transparent)]
    Metrics(#[from] MetricsError),
    #[error("grid has no {mode} cell for n = {n}")]
    MissingCell { mode: ChunkMode, n: usize },
    #[error("invalid experiment configuration: {0}")]
    InvalidConfig(String),
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: io::Error },
    #[error("line {line}: {reason}")]
    Table { line: usize, reason: String },
    #[error("{0}")]
    Json(#[from] serde_json::Error),
    #[error("cannot start worker pool: {0}")]
    Pool(#[from] rayon::ThreadPoolBuildError),
}

pub type Result<T, E = ExperimentError> = std::result::Result<T, E>;

pub const DEFAULT_REPLICATES: usize = 5000;
pub const DEFAULT_CHUNK_LENGTHS: [usize; 6] = [2, 4, 8, 16, 32, 64];
pub const DEFAULT_CROSSING_N: usize = 23;

/// Natural-language reference point used when no treebank is supplied.
pub const NL_MEAN_SL: f64 = 23.0;
pub const NL_MDD: f64 = 3.79;

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub master_seed: u64,
    pub replicates: usize,
    pub lengths: Vec<usize>,
    pub families: Vec<Family>,
    /// Chunk size interval for RL3/RL4 in the length sweep; `[1, n]` if unset.
    pub chunk_range: Option<(usize, usize)>,
    /// Worker cap; `None` uses every core.
    pub jobs: Option<usize>,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            master_seed: 0,
            replicates: DEFAULT_REPLICATES,
            lengths: (2..=100).collect(),
            families: Family::ALL.to_vec(),
            chunk_range: None,
            jobs: None,
        }
    }
}

impl ExperimentConfig {
    pub fn with_seed(master_seed: u64) -> Self {
        ExperimentConfig {
            master_seed,
            ..Default::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.replicates == 0 {
            return Err(ExperimentError::InvalidConfig(
                "replicates must be >= 1".into(),
            ));
        }
        if let Some(&n) = self.lengths.iter().find(|&&n| n < 2) {
            return Err(ExperimentError::InvalidConfig(format!(
                "sentence length {n} < 2"
            )));
        }
        if self.jobs == Some(0) {
            return Err(ExperimentError::InvalidConfig("jobs must be >= 1".into()));
        }
        Ok(())
    }

    /// Runs `f` on a pool capped at `jobs` workers.
    fn install<T: Send>(&self, f: impl FnOnce() -> T + Send) -> Result<T> {
        match self.jobs {
            None => Ok(f()),
            Some(jobs) => {
                let pool = rayon::ThreadPoolBuilder::new().num_threads(jobs).build()?;
                Ok(pool.install(f))
            }
        }
    }
}

/// Coordinates of one sweep cell.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Cell {
    pub family: Family,
    pub n: usize,
    pub chunk: Option<ChunkConfig>,
}

impl Cell {
    pub fn plain(family: Family, n: usize) -> Self {
        Cell {
            family,
            n,
            chunk: None,
        }
    }

    pub fn chunked(family: Family, n: usize, cfg: ChunkConfig) -> Self {
        Cell {
            family,
            n,
            chunk: Some(cfg),
        }
    }

    fn mode(&self) -> ChunkMode {
        self.chunk.map_or(ChunkMode::None, |c| c.mode)
    }

    /// Stable 64-bit encoding of the coordinates:
    /// family (8 bits) | mode (8) | min size (16) | max size (16) | n (16).
    pub fn index(&self) -> u64 {
        let (min, max) = self.chunk.map_or((0, 0), |c| (c.min_size, c.max_size));
        (self.family.code() << 56)
            | (self.mode().code() << 48)
            | ((min as u64 & 0xFFFF) << 32)
            | ((max as u64 & 0xFFFF) << 16)
            | (self.n as u64 & 0xFFFF)
    }
}

/// Generates and measures every replicate of one cell.
pub fn run_cell(cell: &Cell, master_seed: u64, replicates: usize) -> Result<SweepRow> {
    if let Some(cfg) = &cell.chunk {
        cfg.validate(cell.n)?;
    }
    let seed = derive_seed(master_seed, cell.index());
    let measured: Vec<(f64, f64, f64)> = (0..replicates as u64)
        .into_par_iter()
        .map(|rep| {
            let mut rng = RngStream::new(seed, rep);
            let tree = gen_family(cell.family, cell.n, cell.chunk.as_ref(), &mut rng)?;
            Ok((
                mdd_plain(&tree)?,
                count_type1(&tree) as f64,
                count_type2(&tree) as f64,
            ))
        })
        .collect::<Result<_>>()?;

    let column = |f: fn(&(f64, f64, f64)) -> f64| measured.iter().map(f).collect::<Vec<_>>();
    let mdd = aggregate(&column(|m| m.0))?;
    let type1 = aggregate(&column(|m| m.1))?;
    let type2 = aggregate(&column(|m| m.2))?;
    Ok(SweepRow {
        family: cell.family,
        n: cell.n,
        chunk_mode: cell.mode(),
        chunk_param: cell.chunk.map(|c| c.max_size),
        replicates,
        mean_mdd: mdd.mean,
        sd_mdd: mdd.sd,
        mean_type1: type1.mean,
        mean_type2: type2.mean,
    })
}

/// Runs cells in parallel and returns rows in canonical order.
pub fn run_cells(cfg: &ExperimentConfig, cells: &[Cell]) -> Result<Vec<SweepRow>> {
    cfg.validate()?;
    let mut rows = cfg.install(|| {
        cells
            .par_iter()
            .map(|cell| run_cell(cell, cfg.master_seed, cfg.replicates))
            .collect::<Result<Vec<_>>>()
    })??;
    sort_rows(&mut rows);
    Ok(rows)
}

pub fn sort_rows(rows: &mut [SweepRow]) {
    rows.sort_by_key(SweepRow::order_key);
}

/// Every family at every length. Chunked families draw sizes from
/// `cfg.chunk_range`, else from `[1, n]`.
pub fn sweep_lengths(cfg: &ExperimentConfig) -> Result<Vec<SweepRow>> {
    let mut cells = Vec::new();
    for &family in &cfg.families {
        for &n in &cfg.lengths {
            let cell = if family.is_chunked() {
                let (min, max) = cfg.chunk_range.unwrap_or((1, n));
                Cell::chunked(family, n, ChunkConfig::random(min, max.min(n)))
            } else {
                Cell::plain(family, n)
            };
            cells.push(cell);
        }
    }
    run_cells(cfg, &cells)
}

/// RL3 mean MDD over a (length, chunk size) grid. Sizes larger than the
/// length are skipped.
pub fn sweep_chunks(
    cfg: &ExperimentConfig,
    mode: ChunkMode,
    lengths: &[usize],
    sizes: &[usize],
) -> Result<Vec<SweepRow>> {
    let make = match mode {
        ChunkMode::RandomMax => |s| ChunkConfig::random(1, s),
        ChunkMode::Fixed => ChunkConfig::fixed,
        ChunkMode::None => {
            return Err(ExperimentError::InvalidConfig(
                "chunk sweep needs random_max or fixed mode".into(),
            ))
        }
    };
    let cells: Vec<Cell> = lengths
        .iter()
        .flat_map(|&n| {
            sizes
                .iter()
                .filter(move |&&s| s >= 1 && s <= n)
                .map(move |&s| Cell::chunked(Family::RL3, n, make(s)))
        })
        .collect();
    run_cells(cfg, &cells)
}

/// For each length and each chunk mode in the grid, the row with the
/// smallest mean MDD (ties go to the smaller size).
pub fn optimal_chunk_curve(grid: &[SweepRow], lengths: &[usize]) -> Result<Vec<SweepRow>> {
    let mut modes: Vec<ChunkMode> = grid
        .iter()
        .filter(|r| r.family == Family::RL3 && r.chunk_mode != ChunkMode::None)
        .map(|r| r.chunk_mode)
        .collect();
    modes.sort();
    modes.dedup();
    if modes.is_empty() {
        return Err(ExperimentError::MissingCell {
            mode: ChunkMode::RandomMax,
            n: lengths.first().copied().unwrap_or(0),
        });
    }

    let mut out = Vec::new();
    for &mode in &modes {
        for &n in lengths {
            let best = grid
                .iter()
                .filter(|r| r.family == Family::RL3 && r.chunk_mode == mode && r.n == n)
                .min_by(|a, b| {
                    a.mean_mdd
                        .total_cmp(&b.mean_mdd)
                        .then(a.chunk_param.cmp(&b.chunk_param))
                })
                .ok_or(ExperimentError::MissingCell { mode, n })?;
            out.push(best.clone());
        }
    }
    sort_rows(&mut out);
    Ok(out)
}

/// Crossing counts at one length for RL3 with sizes drawn from
/// `[1, max_size]`, plus the unchunked RL1 baseline row.
pub fn sweep_crossings(
    cfg: &ExperimentConfig,
    n: usize,
    max_sizes: &[usize],
) -> Result<Vec<SweepRow>> {
    let mut cells = vec![Cell::plain(Family::RL1, n)];
    cells.extend(
        max_sizes
            .iter()
            .filter(|&&m| m >= 1 && m <= n)
            .map(|&m| Cell::chunked(Family::RL3, n, ChunkConfig::random(1, m))),
    );
    run_cells(cfg, &cells)
}

/// Pearson correlation between sentence length and mean MDD across rows.
pub fn length_mdd_correlation(rows: &[SweepRow]) -> Result<f64> {
    let xs: Vec<f64> = rows.iter().map(|r| r.n as f64).collect();
    let ys: Vec<f64> = rows.iter().map(|r| r.mean_mdd).collect();
    Ok(pearson(&xs, &ys)?)
}

/// [`length_mdd_correlation`] for each family present, in family order.
pub fn correlation_by_family(rows: &[SweepRow]) -> Result<Vec<(Family, f64)>> {
    let mut by_family: BTreeMap<Family, Vec<SweepRow>> = BTreeMap::new();
    for r in rows {
        by_family.entry(r.family).or_default().push(r.clone());
    }
    by_family
        .into_iter()
        .map(|(f, rows)| Ok((f, length_mdd_correlation(&rows)?)))
        .collect()
}

/// Per-sentence length/MDD correlation of a treebank, if defined.
pub fn treebank_correlation(summary: &CorpusSummary) -> Option<f64> {
    summary.pearson_sl_mdd
}

/// A labeled (sentence length, MDD) point annotating the tables.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReferencePoint {
    pub label: String,
    pub mean_sl: f64,
    pub mdd: f64,
    /// True for the built-in constants, false when measured from a treebank.
    pub reference: bool,
}

impl ReferencePoint {
    pub fn natural_language() -> Self {
        ReferencePoint {
            label: "NL".into(),
            mean_sl: NL_MEAN_SL,
            mdd: NL_MDD,
            reference: true,
        }
    }

    pub fn from_summary(label: &str, summary: &CorpusSummary) -> Self {
        ReferencePoint {
            label: label.into(),
            mean_sl: summary.mean_sl,
            mdd: summary.mdd_per_sentence_mean,
            reference: false,
        }
    }
}

/// Sidecar written next to every table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TableMetadata {
    pub master_seed: Option<u64>,
    pub replicates: Option<usize>,
    pub version: String,
    /// Seconds since the Unix epoch.
    pub timestamp: u64,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub reference: Vec<ReferencePoint>,
}

impl TableMetadata {
    pub fn new(master_seed: Option<u64>, replicates: Option<usize>) -> Self {
        TableMetadata {
            master_seed,
            replicates,
            version: env!("CARGO_PKG_VERSION").to_string(),
            timestamp: SystemTime::now()
                .duration_since(UNIX_EPOCH)
                .map_or(0, |d| d.as_secs()),
            reference: Vec::new(),
        }
    }

    pub fn for_config(cfg: &ExperimentConfig) -> Self {
        Self::new(Some(cfg.master_seed), Some(cfg.replicates))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TableFormat {
    Csv,
    Json,
}

impl TableFormat {
    /// JSON for `.json` paths, CSV otherwise.
    pub fn from_path(path: &Path) -> Self {
        match path.extension().and_then(|e| e.to_str()) {
            Some(ext) if ext.eq_ignore_ascii_case("json") => TableFormat::Json,
            _ => TableFormat::Csv,
        }
    }
}

pub const CSV_HEADER: &str =
    "family,n,chunk_mode,chunk_param,replicates,mean_mdd,sd_mdd,mean_type1,mean_type2";

pub fn write_csv<W: Write>(rows: &[SweepRow], mut out: W) -> io::Result<()> {
    writeln!(out, "{CSV_HEADER}")?;
    for r in rows {
        let param = r.chunk_param.map_or("none".to_string(), |p| p.to_string());
        writeln!(
            out,
            "{},{},{},{},{},{},{},{},{}",
            r.family,
            r.n,
            r.chunk_mode,
            param,
            r.replicates,
            r.mean_mdd,
            r.sd_mdd,
            r.mean_type1,
            r.mean_type2
        )?;
    }
    Ok(())
}

pub fn write_json<W: Write>(rows: &[SweepRow], mut out: W) -> io::Result<()> {
    serde_json::to_writer_pretty(&mut out, rows)?;
    writeln!(out)
}

/// Parses a table written by [`write_csv`].
pub fn read_csv<R: BufRead>(input: R) -> Result<Vec<SweepRow>> {
    let mut rows = Vec::new();
    for (idx, line) in input.lines().enumerate() {
        let line_no = idx + 1;
        let line = line.map_err(|source| ExperimentError::Io {
            path: PathBuf::from("<table>"),
            source,
        })?;
        if idx == 0 {
            if line.trim() != CSV_HEADER {
                return Err(ExperimentError::Table {
                    line: 1,
                    reason: "unexpected header".into(),
                });
            }
            continue;
        }
        if line.trim().is_empty() {
            continue;
        }
        rows.push(
            parse_csv_row(&line).map_err(|reason| ExperimentError::Table {
                line: line_no,
                reason,
            })?,
        );
    }
    Ok(rows)
}

fn parse_csv_row(line: &str) -> std::result::Result<SweepRow, String> {
    let cols: Vec<&str> = line.trim().split(',').collect();
    if cols.len() != 9 {
        return Err(format!("expected 9 columns, found {}", cols.len()));
    }
    let int = |s: &str| s.parse::<usize>().map_err(|_| format!("bad integer {s:?}"));
    let real = |s: &str| s.parse::<f64>().map_err(|_| format!("bad number {s:?}"));
    Ok(SweepRow {
        family: cols[0].parse()?,
        n: int(cols[1])?,
        chunk_mode: cols[2].parse()?,
        chunk_param: match cols[3] {
            "none" => None,
            s => Some(int(s)?),
        },
        replicates: int(cols[4])?,
        mean_mdd: real(cols[5])?,
        sd_mdd: real(cols[6])?,
        mean_type1: real(cols[7])?,
        mean_type2: real(cols[8])?,
    })
}

/// Reads a CSV or JSON table, choosing by extension.
pub fn read_table(path: &Path) -> Result<Vec<SweepRow>> {
    let io_err = |source| ExperimentError::Io {
        path: path.to_path_buf(),
        source,
    };
    let file = fs::File::open(path).map_err(io_err)?;
    let reader = io::BufReader::new(file);
    match TableFormat::from_path(path) {
        TableFormat::Json => Ok(serde_json::from_reader(reader)?),
        TableFormat::Csv => read_csv(reader),
    }
}

/// Sidecar location: `<path>.meta.json`.
pub fn metadata_path(path: &Path) -> PathBuf {
    let mut name = path.as_os_str().to_owned();
    name.push(".meta.json");
    PathBuf::from(name)
}

/// Writes rows in canonical order plus the metadata sidecar.
pub fn emit_table(
    rows: &[SweepRow],
    format: TableFormat,
    path: &Path,
    meta: &TableMetadata,
) -> Result<()> {
    let mut sorted = rows.to_vec();
    sort_rows(&mut sorted);
    let io_err = |source| ExperimentError::Io {
        path: path.to_path_buf(),
        source,
    };
    let mut buf = Vec::new();
    match format {
        TableFormat::Csv => write_csv(&sorted, &mut buf),
        TableFormat::Json => write_json(&sorted, &mut buf),
    }
    .map_err(io_err)?;
    fs::write(path, buf).map_err(io_err)?;

    let meta_path = metadata_path(path);
    let mut meta_buf = serde_json::to_vec_pretty(meta)?;
    meta_buf.push(b'\n');
    fs::write(&meta_path, meta_buf).map_err(|source| ExperimentError::Io {
        path: meta_path,
        source,
    })?;
    Ok(())
}
