//! `deplin`: generate random dependency trees, run the chunking sweeps, and
//! measure treebanks.
//!
//! Exit status: 0 on success, 1 on usage errors, 2 on data errors.

use std::ffi::OsString;
use std::fmt::Display;
use std::fs;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::error::ErrorKind;
use clap::{Args, Parser, Subcommand, ValueEnum};

use deplin::experiments::{
    self, emit_table, optimal_chunk_curve, read_table, sweep_chunks, sweep_crossings,
    sweep_lengths, ExperimentConfig, ReferencePoint, TableFormat, TableMetadata,
    DEFAULT_REPLICATES,
};
use deplin::oracle::{enumerate_projective_trees, enumerate_rooted_trees};
use deplin::treebank::{corpus_summary, read_treebank, ParseOptions};
use deplin::{
    count_type1, count_type2, gen_family, mdd_plain, measure, ChunkConfig, ChunkMode, Family,
    RngStream, SweepRow,
};

#[derive(Debug, Parser)]
#[command(
    name = "deplin",
    version,
    about = "Random dependency trees, chunking and crossing statistics"
)]
struct Cli {
    /// Worker threads for sweeps [default: all cores]
    #[arg(long, global = true, env = "DEPLIN_JOBS")]
    jobs: Option<usize>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Generate trees of one family and print head sequences with metrics
    Gen(GenArgs),
    /// Mean MDD and crossings per family over a range of sentence lengths
    SweepLength(SweepLengthArgs),
    /// RL3 mean MDD over a (sentence length, chunk size) grid
    SweepChunk(SweepChunkArgs),
    /// RL3 crossing counts at one sentence length over maximal chunk sizes
    SweepCrossings(SweepCrossingsArgs),
    /// Minimal mean MDD per sentence length from a chunk-size grid
    Optimal(OptimalArgs),
    /// Summary statistics of a CoNLL treebank
    Treebank(TreebankArgs),
    /// Enumerate every tree (or every continuous tree) on n nodes
    Oracle(OracleArgs),
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum FamilyArg {
    Rl1,
    Rl2,
    Rl3,
    Rl4,
}

impl From<FamilyArg> for Family {
    fn from(f: FamilyArg) -> Self {
        match f {
            FamilyArg::Rl1 => Family::RL1,
            FamilyArg::Rl2 => Family::RL2,
            FamilyArg::Rl3 => Family::RL3,
            FamilyArg::Rl4 => Family::RL4,
        }
    }
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum ModeArg {
    Random,
    Fixed,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum FormatArg {
    Csv,
    Json,
}

#[derive(Debug, Args)]
struct GenArgs {
    #[arg(long, value_enum)]
    family: FamilyArg,
    /// Sentence length
    #[arg(long)]
    n: usize,
    /// Smallest chunk size (rl3/rl4)
    #[arg(long, requires = "max", conflicts_with = "fixed")]
    min: Option<usize>,
    /// Largest chunk size (rl3/rl4)
    #[arg(long, requires = "min", conflicts_with = "fixed")]
    max: Option<usize>,
    /// Fixed chunk size (rl3/rl4)
    #[arg(long)]
    fixed: Option<usize>,
    #[arg(long)]
    seed: u64,
    #[arg(long, default_value_t = 1)]
    count: u64,
}

#[derive(Debug, Args)]
struct Output {
    /// Output table; stdout when omitted
    #[arg(long)]
    out: Option<PathBuf>,
    /// Table format [default: from the --out extension, else csv]
    #[arg(long, value_enum)]
    format: Option<FormatArg>,
}

#[derive(Debug, Args)]
struct SweepLengthArgs {
    /// Sentence lengths, e.g. 2..100 or 2,4,8
    #[arg(long, default_value = "2..100", value_parser = parse_list)]
    lengths: IntList,
    #[arg(long, default_value_t = DEFAULT_REPLICATES)]
    replicates: usize,
    /// Families to run, e.g. rl1,rl3
    #[arg(
        long,
        value_enum,
        value_delimiter = ',',
        default_value = "rl1,rl2,rl3,rl4"
    )]
    families: Vec<FamilyArg>,
    /// Chunk size interval for rl3/rl4 [default: 1..n per length]
    #[arg(long, requires = "chunk_max")]
    chunk_min: Option<usize>,
    #[arg(long, requires = "chunk_min")]
    chunk_max: Option<usize>,
    #[arg(long)]
    seed: u64,
    #[command(flatten)]
    output: Output,
}

#[derive(Debug, Args)]
struct SweepChunkArgs {
    #[arg(long, value_enum)]
    mode: ModeArg,
    #[arg(long, default_value = "2,4,8,16,32,64", value_parser = parse_list)]
    lengths: IntList,
    /// Chunk sizes (maximal sizes in random mode)
    #[arg(long, default_value = "1..64", value_parser = parse_list)]
    sizes: IntList,
    #[arg(long, default_value_t = DEFAULT_REPLICATES)]
    replicates: usize,
    #[arg(long)]
    seed: u64,
    #[command(flatten)]
    output: Output,
}

#[derive(Debug, Args)]
struct SweepCrossingsArgs {
    #[arg(long, default_value_t = experiments::DEFAULT_CROSSING_N)]
    n: usize,
    /// Maximal chunk sizes [default: 1..n]
    #[arg(long, value_parser = parse_list)]
    max_sizes: Option<IntList>,
    #[arg(long, default_value_t = DEFAULT_REPLICATES)]
    replicates: usize,
    #[arg(long)]
    seed: u64,
    #[command(flatten)]
    output: Output,
}

#[derive(Debug, Args)]
struct OptimalArgs {
    /// Grid written by sweep-chunk
    #[arg(long = "in")]
    input: PathBuf,
    /// Sentence lengths [default: every length in the grid]
    #[arg(long, value_parser = parse_list)]
    lengths: Option<IntList>,
    /// Treebank for the natural-language reference point
    #[arg(long)]
    treebank: Option<PathBuf>,
    #[command(flatten)]
    output: Output,
}

#[derive(Debug, Args)]
struct TreebankArgs {
    /// CoNLL file, optionally gzip-compressed
    #[arg(long = "in")]
    input: PathBuf,
    /// Drop PU/PUNCT tokens before measuring
    #[arg(long)]
    skip_punct: bool,
    /// Summary file (.json or .csv); JSON on stdout when omitted
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, value_enum)]
    format: Option<FormatArg>,
}

#[derive(Debug, Args)]
struct OracleArgs {
    #[arg(long)]
    n: usize,
    /// Only continuous trees
    #[arg(long)]
    projective: bool,
}

#[derive(Debug, Clone)]
struct IntList(Vec<usize>);

/// Parses `2..100`, `2..=100` (both inclusive) and comma lists of either.
fn parse_list(s: &str) -> Result<IntList, String> {
    let mut out = Vec::new();
    for part in s.split(',').map(str::trim).filter(|p| !p.is_empty()) {
        if let Some((lo, hi)) = part.split_once("..") {
            let hi = hi.strip_prefix('=').unwrap_or(hi);
            let lo: usize = lo.parse().map_err(|_| format!("bad range start {lo:?}"))?;
            let hi: usize = hi.parse().map_err(|_| format!("bad range end {hi:?}"))?;
            if lo > hi {
                return Err(format!("empty range {part}"));
            }
            out.extend(lo..=hi);
        } else {
            out.push(part.parse().map_err(|_| format!("bad integer {part:?}"))?);
        }
    }
    if out.is_empty() {
        return Err("empty list".into());
    }
    Ok(IntList(out))
}

enum CliError {
    Usage(String),
    Data(String),
}

impl CliError {
    fn usage(msg: impl Display) -> Self {
        CliError::Usage(msg.to_string())
    }

    fn data(msg: impl Display) -> Self {
        CliError::Data(msg.to_string())
    }
}

impl From<experiments::ExperimentError> for CliError {
    fn from(e: experiments::ExperimentError) -> Self {
        use experiments::ExperimentError as E;
        match e {
            E::InvalidConfig(_) | E::Generate(_) | E::Pool(_) => CliError::usage(e),
            _ => CliError::data(e),
        }
    }
}

impl From<io::Error> for CliError {
    fn from(e: io::Error) -> Self {
        CliError::data(e)
    }
}

type CliResult = Result<(), CliError>;

fn table_format(output: &Output) -> TableFormat {
    match (output.format, &output.out) {
        (Some(FormatArg::Csv), _) => TableFormat::Csv,
        (Some(FormatArg::Json), _) => TableFormat::Json,
        (None, Some(path)) => TableFormat::from_path(path),
        (None, None) => TableFormat::Csv,
    }
}

fn write_rows(rows: &[SweepRow], output: &Output, meta: &TableMetadata) -> CliResult {
    let format = table_format(output);
    match &output.out {
        Some(path) => Ok(emit_table(rows, format, path, meta)?),
        None => {
            let mut sorted = rows.to_vec();
            experiments::sort_rows(&mut sorted);
            let stdout = io::stdout().lock();
            match format {
                TableFormat::Csv => experiments::write_csv(&sorted, stdout)?,
                TableFormat::Json => experiments::write_json(&sorted, stdout)?,
            }
            Ok(())
        }
    }
}

fn base_config(seed: u64, replicates: usize, jobs: Option<usize>) -> ExperimentConfig {
    ExperimentConfig {
        master_seed: seed,
        replicates,
        jobs,
        ..Default::default()
    }
}

fn cmd_gen(args: GenArgs) -> CliResult {
    let family = Family::from(args.family);
    if args.n == 0 {
        return Err(CliError::usage("--n must be at least 1"));
    }
    let chunk = match (args.min, args.max, args.fixed) {
        (Some(min), Some(max), None) => Some(ChunkConfig::random(min, max)),
        (None, None, Some(size)) => Some(ChunkConfig::fixed(size)),
        _ => None,
    };
    if family.is_chunked() && chunk.is_none() {
        return Err(CliError::usage(format!(
            "--family {} needs --min and --max, or --fixed",
            family.to_string().to_lowercase()
        )));
    }
    if !family.is_chunked() && chunk.is_some() {
        return Err(CliError::usage("chunk flags only apply to rl3 and rl4"));
    }
    if let Some(cfg) = &chunk {
        cfg.validate(args.n).map_err(CliError::usage)?;
    }

    let mut out = BufWriter::new(io::stdout().lock());
    for i in 0..args.count {
        let mut rng = RngStream::new(args.seed, i);
        let tree = gen_family(family, args.n, chunk.as_ref(), &mut rng).map_err(CliError::usage)?;
        let record = serde_json::to_string(&measure(&tree)).map_err(CliError::data)?;
        writeln!(out, "{}\t{}", tree.to_head_line(), record)?;
    }
    out.flush()?;
    Ok(())
}

fn cmd_sweep_length(args: SweepLengthArgs, jobs: Option<usize>) -> CliResult {
    let mut cfg = base_config(args.seed, args.replicates, jobs);
    cfg.lengths = args.lengths.0;
    cfg.families = args.families.into_iter().map(Family::from).collect();
    cfg.chunk_range = args.chunk_min.zip(args.chunk_max);
    if let Some((min, max)) = cfg.chunk_range {
        if min == 0 || min > max {
            return Err(CliError::usage("need 1 <= --chunk-min <= --chunk-max"));
        }
    }
    let rows = sweep_lengths(&cfg)?;
    let mut meta = TableMetadata::for_config(&cfg);
    meta.reference.push(ReferencePoint::natural_language());
    write_rows(&rows, &args.output, &meta)
}

fn cmd_sweep_chunk(args: SweepChunkArgs, jobs: Option<usize>) -> CliResult {
    let cfg = base_config(args.seed, args.replicates, jobs);
    let mode = match args.mode {
        ModeArg::Random => ChunkMode::RandomMax,
        ModeArg::Fixed => ChunkMode::Fixed,
    };
    let rows = sweep_chunks(&cfg, mode, &args.lengths.0, &args.sizes.0)?;
    write_rows(&rows, &args.output, &TableMetadata::for_config(&cfg))
}

fn cmd_sweep_crossings(args: SweepCrossingsArgs, jobs: Option<usize>) -> CliResult {
    if args.n < 2 {
        return Err(CliError::usage("--n must be at least 2"));
    }
    let cfg = base_config(args.seed, args.replicates, jobs);
    let sizes = args
        .max_sizes
        .map(|l| l.0)
        .unwrap_or_else(|| (1..=args.n).collect());
    let rows = sweep_crossings(&cfg, args.n, &sizes)?;
    write_rows(&rows, &args.output, &TableMetadata::for_config(&cfg))
}

fn cmd_optimal(args: OptimalArgs) -> CliResult {
    let grid = read_table(&args.input)
        .map_err(|e| CliError::data(format!("{}: {e}", args.input.display())))?;
    let lengths = args.lengths.map(|l| l.0).unwrap_or_else(|| {
        let mut ns: Vec<usize> = grid.iter().map(|r| r.n).collect();
        ns.sort_unstable();
        ns.dedup();
        ns
    });
    let rows = optimal_chunk_curve(&grid, &lengths)?;

    let mut meta = TableMetadata::new(None, grid.first().map(|r| r.replicates));
    if let Ok(side) = fs::read(experiments::metadata_path(&args.input)) {
        if let Ok(grid_meta) = serde_json::from_slice::<TableMetadata>(&side) {
            meta.master_seed = grid_meta.master_seed;
        }
    }
    meta.reference.push(match &args.treebank {
        Some(path) => {
            let summary = summarize(path, ParseOptions::default())?;
            ReferencePoint::from_summary("NL", &summary)
        }
        None => ReferencePoint::natural_language(),
    });
    write_rows(&rows, &args.output, &meta)
}

fn summarize(path: &Path, opts: ParseOptions) -> Result<deplin::treebank::CorpusSummary, CliError> {
    let outcome = read_treebank(path, opts).map_err(CliError::data)?;
    for diag in &outcome.diagnostics {
        eprintln!("{}: {diag}", path.display());
    }
    corpus_summary(&outcome.records).map_err(|e| CliError::data(format!("{}: {e}", path.display())))
}

fn cmd_treebank(args: TreebankArgs) -> CliResult {
    let opts = ParseOptions {
        skip_punct: args.skip_punct,
    };
    let summary = summarize(&args.input, opts)?;
    let format = match (args.format, &args.out) {
        (Some(FormatArg::Csv), _) => TableFormat::Csv,
        (Some(FormatArg::Json), _) | (None, None) => TableFormat::Json,
        (None, Some(path)) => TableFormat::from_path(path),
    };
    let mut buf = Vec::new();
    match format {
        TableFormat::Json => summary.write_json(&mut buf)?,
        TableFormat::Csv => summary.write_csv(&mut buf)?,
    }
    match &args.out {
        Some(path) => {
            fs::write(path, buf).map_err(|e| CliError::data(format!("{}: {e}", path.display())))?
        }
        None => io::stdout().lock().write_all(&buf)?,
    }
    Ok(())
}

fn cmd_oracle(args: OracleArgs) -> CliResult {
    let trees = if args.projective {
        enumerate_projective_trees(args.n)
    } else {
        enumerate_rooted_trees(args.n)
    }
    .map_err(CliError::usage)?;

    let mut out = BufWriter::new(io::stdout().lock());
    for t in &trees {
        writeln!(out, "{}", t.to_head_line())?;
    }
    writeln!(out, "# count: {}", trees.len())?;
    if args.n >= 2 {
        let mean = |f: &dyn Fn(&deplin::DepTree) -> f64| {
            trees.iter().map(f).sum::<f64>() / trees.len() as f64
        };
        writeln!(out, "# mean_mdd: {}", mean(&|t| mdd_plain(t).unwrap()))?;
        writeln!(out, "# mean_type1: {}", mean(&|t| count_type1(t) as f64))?;
        writeln!(out, "# mean_type2: {}", mean(&|t| count_type2(t) as f64))?;
    }
    out.flush()?;
    Ok(())
}

fn run<I, T>(argv: I) -> u8
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(e) => {
            let code = match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => 0,
                _ => 1,
            };
            let _ = e.print();
            return code;
        }
    };
    if cli.jobs == Some(0) {
        eprintln!("error: --jobs must be at least 1");
        return 1;
    }
    let jobs = cli.jobs;
    let result = match cli.command {
        Command::Gen(a) => cmd_gen(a),
        Command::SweepLength(a) => cmd_sweep_length(a, jobs),
        Command::SweepChunk(a) => cmd_sweep_chunk(a, jobs),
        Command::SweepCrossings(a) => cmd_sweep_crossings(a, jobs),
        Command::Optimal(a) => cmd_optimal(a),
        Command::Treebank(a) => cmd_treebank(a),
        Command::Oracle(a) => cmd_oracle(a),
    };
    match result {
        Ok(()) => 0,
        Err(CliError::Usage(msg)) => {
            eprintln!("error: {msg}");
            1
        }
        Err(CliError::Data(msg)) => {
            eprintln!("error: {msg}");
            2
        }
    }
}

fn main() -> ExitCode {
    ExitCode::from(run(std::env::args_os()))
}
