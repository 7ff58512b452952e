//! File formats: JSONL run traces, sequences and logit traces, plus plain-text score files.
//!
//! Logit traces start with a header line `{"vocab":V,"len":L}` followed by one
//! record per (step, position): `{"t":..,"pos":..,"masked":..,"logp":[..]}`.
//! Records come in call order and positions in index order. `-inf` entries are
//! written as `null`; finite values use shortest round-trip formatting so a
//! trace reloads bit-exactly.

use std::fs::{self, File};
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use dualguide_core::{LogitMatrix, LogitTrace, RunTrace};
use serde::{Deserialize, Serialize};

use crate::error::{AppError, AppResult};

pub fn create(path: &Path) -> AppResult<BufWriter<File>> {
    if let Some(dir) = path.parent() {
        if !dir.as_os_str().is_empty() {
            fs::create_dir_all(dir).map_err(|e| AppError::io(dir, e))?;
        }
    }
    File::create(path)
        .map(BufWriter::new)
        .map_err(|e| AppError::io(path, e))
}

fn open(path: &Path) -> AppResult<BufReader<File>> {
    File::open(path)
        .map(BufReader::new)
        .map_err(|e| AppError::io(path, e))
}

fn parse_err(path: &Path, line: usize, msg: impl ToString) -> AppError {
    AppError::Parse {
        path: path.to_path_buf(),
        line,
        msg: msg.to_string(),
    }
}

fn write_json_line<T: Serialize>(w: &mut impl Write, path: &Path, value: &T) -> AppResult<()> {
    let line = serde_json::to_string(value).map_err(|e| parse_err(path, 0, e))?;
    writeln!(w, "{line}").map_err(|e| AppError::io(path, e))
}

/// Non-blank lines with their 1-based numbers.
fn lines(path: &Path) -> AppResult<Vec<(usize, String)>> {
    let mut out = Vec::new();
    for (i, line) in open(path)?.lines().enumerate() {
        let line = line.map_err(|e| AppError::io(path, e))?;
        if !line.trim().is_empty() {
            out.push((i + 1, line));
        }
    }
    Ok(out)
}

#[derive(Serialize, Deserialize)]
struct ChainLine {
    chain: usize,
    #[serde(flatten)]
    trace: RunTrace,
}

pub fn write_run_traces(path: &Path, traces: &[RunTrace]) -> AppResult<()> {
    let mut w = create(path)?;
    for (chain, trace) in traces.iter().enumerate() {
        write_json_line(
            &mut w,
            path,
            &ChainLine {
                chain,
                trace: trace.clone(),
            },
        )?;
    }
    w.flush().map_err(|e| AppError::io(path, e))
}

pub fn read_run_traces(path: &Path) -> AppResult<Vec<RunTrace>> {
    lines(path)?
        .into_iter()
        .map(|(n, line)| {
            serde_json::from_str::<ChainLine>(&line)
                .map(|c| c.trace)
                .map_err(|e| parse_err(path, n, e))
        })
        .collect()
}

pub fn write_sequences(path: &Path, samples: &[Vec<u32>]) -> AppResult<()> {
    let mut w = create(path)?;
    for s in samples {
        write_json_line(&mut w, path, s)?;
    }
    w.flush().map_err(|e| AppError::io(path, e))
}

pub fn read_sequences(path: &Path) -> AppResult<Vec<Vec<u32>>> {
    lines(path)?
        .into_iter()
        .map(|(n, line)| serde_json::from_str(&line).map_err(|e| parse_err(path, n, e)))
        .collect()
}

#[derive(Serialize, Deserialize)]
struct TraceHeader {
    vocab: usize,
    len: usize,
}

#[derive(Serialize, Deserialize)]
struct RowRecord {
    t: usize,
    pos: usize,
    masked: bool,
    logp: Vec<Option<f64>>,
}

fn encode_row(row: &[f64]) -> Vec<Option<f64>> {
    row.iter()
        .map(|&x| if x == f64::NEG_INFINITY { None } else { Some(x) })
        .collect()
}

pub fn write_logit_trace(path: &Path, trace: &LogitTrace) -> AppResult<()> {
    let mut w = create(path)?;
    write_json_line(
        &mut w,
        path,
        &TraceHeader {
            vocab: trace.vocab(),
            len: trace.seq_len(),
        },
    )?;
    for frame in trace.frames() {
        for pos in 0..frame.matrix.len() {
            write_json_line(
                &mut w,
                path,
                &RowRecord {
                    t: frame.t,
                    pos,
                    masked: frame.matrix.is_masked(pos),
                    logp: encode_row(frame.matrix.row(pos)),
                },
            )?;
        }
    }
    w.flush().map_err(|e| AppError::io(path, e))
}

pub fn read_logit_trace(path: &Path) -> AppResult<LogitTrace> {
    let all = lines(path)?;
    let mut it = all.into_iter();
    let (n, head) = it.next().ok_or_else(|| parse_err(path, 1, "empty logit trace"))?;
    let header: TraceHeader = serde_json::from_str(&head).map_err(|e| parse_err(path, n, e))?;
    let (v, len) = (header.vocab, header.len);
    let mut trace = LogitTrace::new(v, len);
    let mut values = Vec::with_capacity(len * v);
    let mut masked = Vec::with_capacity(len);
    let mut current_t = None;
    for (n, line) in it {
        let rec: RowRecord = serde_json::from_str(&line).map_err(|e| parse_err(path, n, e))?;
        if rec.pos != masked.len() {
            return Err(parse_err(
                path,
                n,
                format!("expected position {}, found {}", masked.len(), rec.pos),
            ));
        }
        if rec.logp.len() != v {
            return Err(parse_err(path, n, format!("row has {} entries, vocabulary is {v}", rec.logp.len())));
        }
        match current_t {
            Some(t) if t != rec.t => {
                return Err(parse_err(path, n, format!("step {} inside a frame for step {t}", rec.t)))
            }
            _ => current_t = Some(rec.t),
        }
        values.extend(rec.logp.iter().map(|x| x.unwrap_or(f64::NEG_INFINITY)));
        masked.push(rec.masked);
        if masked.len() == len {
            let mut m = LogitMatrix::from_rows(len, v, std::mem::take(&mut values))
                .map_err(|e| parse_err(path, n, e))?;
            for (pos, &flag) in masked.iter().enumerate() {
                m.set_masked(pos, flag);
            }
            trace.push(rec.t, m).map_err(|e| parse_err(path, n, e))?;
            masked.clear();
            current_t = None;
        }
    }
    if !masked.is_empty() {
        return Err(parse_err(path, 0, "trace ends inside a frame"));
    }
    Ok(trace)
}

fn columns<'a>(path: &Path, n: usize, line: &'a str, want: usize) -> AppResult<Option<Vec<&'a str>>> {
    let body = line.split('#').next().unwrap_or("").trim();
    if body.is_empty() {
        return Ok(None);
    }
    let cols: Vec<&str> = body.split_whitespace().collect();
    if cols.len() != want {
        return Err(parse_err(path, n, format!("expected {want} columns, found {}", cols.len())));
    }
    Ok(Some(cols))
}

fn field<T: std::str::FromStr>(path: &Path, n: usize, s: &str) -> AppResult<T>
where
    T::Err: std::fmt::Display,
{
    s.parse().map_err(|e| parse_err(path, n, format!("'{s}': {e}")))
}

/// `token_index value` per line; `#` starts a comment.
pub fn read_score_file(path: &Path) -> AppResult<Vec<(u32, f64)>> {
    let mut out = Vec::new();
    for (n, line) in lines(path)? {
        if let Some(c) = columns(path, n, &line, 2)? {
            out.push((field(path, n, c[0])?, field(path, n, c[1])?));
        }
    }
    Ok(out)
}

/// `token_index member_count tagged_count` per line, one line per token in order.
pub fn read_cluster_file(path: &Path) -> AppResult<Vec<(usize, usize)>> {
    let mut out = Vec::new();
    for (n, line) in lines(path)? {
        if let Some(c) = columns(path, n, &line, 3)? {
            let token: usize = field(path, n, c[0])?;
            if token != out.len() {
                return Err(parse_err(path, n, format!("expected token {}, found {token}", out.len())));
            }
            out.push((field(path, n, c[1])?, field(path, n, c[2])?));
        }
    }
    Ok(out)
}
