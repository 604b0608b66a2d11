//! CoNLL-X / CoNLL-U ingestion and corpus-level baseline statistics.

use std::fs::File;
use std::io::{self, BufRead, BufReader, Read, Write};
use std::path::Path;

use flate2::read::MultiGzDecoder;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::metrics::{count_type1, count_type2, mdd_plain, pearson, CompensatedSum};
use crate::model::{validate_tree, DepTree, TreeError};

#[derive(Debug, Error)]
pub enum TreebankError {
    #[error("line {line}: {reason}")]
    MalformedLine { line: usize, reason: String },
    #[error("sentence starting at line {line}: {source}")]
    InvalidTree { line: usize, source: TreeError },
    #[error("sentence starting at line {line}: {reason}")]
    Dropped { line: usize, reason: String },
    #[error("no sentence with at least two tokens")]
    NoUsableSentences,
    #[error("{path}: {source}")]
    Io { path: String, source: io::Error },
}

/// One parsed sentence.
#[derive(Debug, Clone, PartialEq)]
pub struct SentenceRecord {
    pub tokens: Vec<String>,
    pub tree: DepTree,
    /// 1-based line number of the sentence's first token.
    pub source_line: usize,
}

#[derive(Debug, Clone, Copy, Default)]
pub struct ParseOptions {
    /// Drop tokens tagged `PU` or `PUNCT` in the coarse or fine POS column.
    pub skip_punct: bool,
}

/// Parsed sentences plus per-sentence diagnostics for everything skipped.
#[derive(Debug, Default)]
pub struct ParseOutcome {
    pub records: Vec<SentenceRecord>,
    pub diagnostics: Vec<TreebankError>,
}

struct Token {
    form: String,
    head: usize,
    punct: bool,
}

fn is_punct_tag(tag: &str) -> bool {
    matches!(tag, "PU" | "PUNCT")
}

/// Reads sentences from CoNLL text. Malformed or ill-formed sentences are
/// reported in the outcome's diagnostics and skipped.
pub fn parse_conll<R: BufRead>(reader: R, opts: ParseOptions) -> io::Result<ParseOutcome> {
    let mut outcome = ParseOutcome::default();
    let mut tokens: Vec<Token> = Vec::new();
    let mut start_line = 0;
    let mut error: Option<TreebankError> = None;

    for (idx, line) in reader.lines().enumerate() {
        let line = line?;
        let line_no = idx + 1;
        let trimmed = line.trim_end_matches(['\r', '\n']);
        if trimmed.trim().is_empty() {
            finish_sentence(&mut tokens, &mut error, start_line, opts, &mut outcome);
            continue;
        }
        if trimmed.starts_with('#') {
            continue;
        }
        if tokens.is_empty() && error.is_none() {
            start_line = line_no;
        }
        if error.is_some() {
            continue;
        }
        match parse_token_line(trimmed, tokens.len() + 1, line_no) {
            Ok(Some(tok)) => tokens.push(tok),
            Ok(None) => {}
            Err(e) => error = Some(e),
        }
    }
    finish_sentence(&mut tokens, &mut error, start_line, opts, &mut outcome);
    Ok(outcome)
}

fn parse_token_line(
    line: &str,
    expected_id: usize,
    line_no: usize,
) -> Result<Option<Token>, TreebankError> {
    let malformed = |reason: String| TreebankError::MalformedLine {
        line: line_no,
        reason,
    };
    let cols: Vec<&str> = line.split('\t').collect();
    if cols.len() < 8 {
        return Err(malformed(format!(
            "expected at least 8 tab-separated columns, found {}",
            cols.len()
        )));
    }
    let id = cols[0];
    if id.contains('-') || id.contains('.') {
        return Ok(None);
    }
    let id: usize = id
        .parse()
        .map_err(|_| malformed(format!("non-integer token id {id:?}")))?;
    if id != expected_id {
        return Err(malformed(format!("token id {id}, expected {expected_id}")));
    }
    let head: usize = cols[6]
        .parse()
        .map_err(|_| malformed(format!("non-integer head {:?}", cols[6])))?;
    Ok(Some(Token {
        form: cols[1].to_string(),
        head,
        punct: is_punct_tag(cols[3]) || is_punct_tag(cols[4]),
    }))
}

fn finish_sentence(
    tokens: &mut Vec<Token>,
    error: &mut Option<TreebankError>,
    line: usize,
    opts: ParseOptions,
    outcome: &mut ParseOutcome,
) {
    if let Some(e) = error.take() {
        outcome.diagnostics.push(e);
        tokens.clear();
        return;
    }
    if tokens.is_empty() {
        return;
    }
    let taken = std::mem::take(tokens);
    let heads: Vec<usize> = taken.iter().map(|t| t.head).collect();
    let tree = match validate_tree(&heads) {
        Ok(tree) => tree,
        Err(source) => {
            outcome
                .diagnostics
                .push(TreebankError::InvalidTree { line, source });
            return;
        }
    };
    let record = SentenceRecord {
        tokens: taken.iter().map(|t| t.form.clone()).collect(),
        tree,
        source_line: line,
    };
    if opts.skip_punct && taken.iter().any(|t| t.punct) {
        let keep: Vec<bool> = taken.iter().map(|t| !t.punct).collect();
        match remove_positions(&record, &keep) {
            Ok(Some(r)) => outcome.records.push(r),
            Ok(None) => {}
            Err(reason) => outcome
                .diagnostics
                .push(TreebankError::Dropped { line, reason }),
        }
    } else {
        outcome.records.push(record);
    }
}

/// Drops positions with `keep[p - 1] == false`, reattaching orphans to their
/// nearest kept ancestor. `Ok(None)` when nothing is left.
fn remove_positions(
    record: &SentenceRecord,
    keep: &[bool],
) -> Result<Option<SentenceRecord>, String> {
    let tree = &record.tree;
    if !keep[tree.root() - 1] {
        return Err("root token is punctuation".into());
    }
    let mut new_index = vec![0usize; tree.n() + 1];
    let mut next = 0;
    for p in 1..=tree.n() {
        if keep[p - 1] {
            next += 1;
            new_index[p] = next;
        }
    }
    if next == 0 {
        return Ok(None);
    }
    let mut heads = Vec::with_capacity(next);
    let mut tokens = Vec::with_capacity(next);
    for p in (1..=tree.n()).filter(|&p| keep[p - 1]) {
        let mut g = tree.head(p);
        while let Some(h) = g {
            if keep[h - 1] {
                break;
            }
            g = tree.head(h);
        }
        heads.push(g.map_or(0, |h| new_index[h]));
        tokens.push(record.tokens[p - 1].clone());
    }
    let tree = validate_tree(&heads).map_err(|e| e.to_string())?;
    Ok(Some(SentenceRecord {
        tokens,
        tree,
        source_line: record.source_line,
    }))
}

/// Opens a treebank file, transparently decompressing gzip input.
pub fn read_treebank(path: &Path, opts: ParseOptions) -> Result<ParseOutcome, TreebankError> {
    let io_err = |source| TreebankError::Io {
        path: path.display().to_string(),
        source,
    };
    let mut file = File::open(path).map_err(io_err)?;
    let mut magic = [0u8; 2];
    let read = file.read(&mut magic).map_err(io_err)?;
    let file = File::open(path).map_err(io_err)?;
    let gz = read == 2 && magic == [0x1f, 0x8b];
    let outcome = if gz {
        parse_conll(BufReader::new(MultiGzDecoder::new(file)), opts)
    } else {
        parse_conll(BufReader::new(file), opts)
    };
    outcome.map_err(io_err)
}

/// Corpus-level statistics over the parsed sentences.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorpusSummary {
    pub sentence_count: usize,
    pub token_count: usize,
    pub mean_sl: f64,
    /// Mean of per-sentence MDDs (sentences with at least two tokens).
    pub mdd_per_sentence_mean: f64,
    /// Total distance over total edges.
    pub mdd_pooled: f64,
    pub total_type1: u64,
    pub total_type2: u64,
    /// `None` when fewer than two usable sentences or zero variance.
    pub pearson_sl_mdd: Option<f64>,
}

pub const SUMMARY_CSV_HEADER: &str = "sentence_count,token_count,mean_sl,mdd_per_sentence_mean,mdd_pooled,total_type1,total_type2,pearson_sl_mdd";

pub fn corpus_summary(records: &[SentenceRecord]) -> Result<CorpusSummary, TreebankError> {
    let usable: Vec<&SentenceRecord> = records.iter().filter(|r| r.tree.n() >= 2).collect();
    if usable.is_empty() {
        return Err(TreebankError::NoUsableSentences);
    }
    let token_count: usize = records.iter().map(|r| r.tree.n()).sum();
    let mut total_distance = 0u64;
    let mut total_edges = 0u64;
    let mut mdds = Vec::with_capacity(usable.len());
    let mut lengths = Vec::with_capacity(usable.len());
    for r in &usable {
        total_distance += r.tree.total_distance();
        total_edges += r.tree.edge_count() as u64;
        mdds.push(mdd_plain(&r.tree).expect("usable sentences have n >= 2"));
        lengths.push(r.tree.n() as f64);
    }
    let mdd_sum: CompensatedSum = mdds.iter().copied().collect();

    Ok(CorpusSummary {
        sentence_count: records.len(),
        token_count,
        mean_sl: token_count as f64 / records.len() as f64,
        mdd_per_sentence_mean: mdd_sum.value() / mdds.len() as f64,
        mdd_pooled: total_distance as f64 / total_edges as f64,
        total_type1: records.iter().map(|r| count_type1(&r.tree)).sum(),
        total_type2: records.iter().map(|r| count_type2(&r.tree)).sum(),
        pearson_sl_mdd: pearson(&lengths, &mdds).ok(),
    })
}

impl CorpusSummary {
    pub fn write_json<W: Write>(&self, mut out: W) -> io::Result<()> {
        serde_json::to_writer_pretty(&mut out, self)?;
        writeln!(out)
    }

    pub fn write_csv<W: Write>(&self, mut out: W) -> io::Result<()> {
        writeln!(out, "{SUMMARY_CSV_HEADER}")?;
        writeln!(
            out,
            "{},{},{},{},{},{},{},{}",
            self.sentence_count,
            self.token_count,
            self.mean_sl,
            self.mdd_per_sentence_mean,
            self.mdd_pooled,
            self.total_type1,
            self.total_type2,
            self.pearson_sl_mdd
                .map_or("none".to_string(), |r| r.to_string()),
        )
    }
}
