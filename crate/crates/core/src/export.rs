//! Text formats: feature matrices, alignments and ground truth as CSV.
//!
//! Numbers are written with six significant digits unless full precision is
//! requested, in which case the shortest representation that parses back to
//! the same `f64` is used.

use std::fmt::Write as _;

use thiserror::Error;

use crate::dp_align::{AlignmentEntry, AlignmentResult};
use crate::filterbank::Spectrogram;

#[derive(Debug, Error, PartialEq)]
pub enum CsvError {
    #[error("line {line}: {msg}")]
    Parse { line: usize, msg: String },
    #[error("missing or unexpected header: {0}")]
    Header(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Precision {
    #[default]
    SixDigits,
    Full,
}

/// Formats `x` rounded to six significant digits.
pub fn fmt_sig6(x: f64) -> String {
    if !x.is_finite() {
        return format!("{x}");
    }
    let rounded: f64 = format!("{x:.5e}").parse().expect("scientific notation parses");
    format!("{rounded}")
}

fn fmt_num(x: f64, precision: Precision) -> String {
    match precision {
        Precision::SixDigits => fmt_sig6(x),
        Precision::Full => format!("{x}"),
    }
}

/// `frame,p21,...,p108` followed by one row per frame.
pub fn spectrogram_to_csv(m: &Spectrogram, precision: Precision) -> String {
    let mut out = String::from("frame");
    for p in m.band_pitches() {
        write!(out, ",p{p}").unwrap();
    }
    out.push('\n');
    for t in 0..m.num_frames() {
        write!(out, "{t}").unwrap();
        for b in 0..m.num_bands() {
            out.push(',');
            out.push_str(&fmt_num(m.get(b, t), precision));
        }
        out.push('\n');
    }
    out
}

pub fn spectrogram_from_csv(text: &str, frame_rate: f64) -> Result<Spectrogram, CsvError> {
    let mut lines = text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty());
    let (_, header) = lines.next().ok_or_else(|| CsvError::Header("empty file".into()))?;
    let mut cols = header.split(',');
    if cols.next().map(str::trim) != Some("frame") {
        return Err(CsvError::Header(header.to_string()));
    }
    let pitches: Vec<u8> = cols
        .map(|c| c.trim().strip_prefix('p').and_then(|p| p.parse().ok()))
        .collect::<Option<_>>()
        .ok_or_else(|| CsvError::Header(header.to_string()))?;
    let mut rows = vec![Vec::new(); pitches.len()];
    for (idx, line) in lines {
        let parse_err = |msg: String| CsvError::Parse { line: idx + 1, msg };
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != pitches.len() + 1 {
            return Err(parse_err(format!(
                "expected {} fields, found {}",
                pitches.len() + 1,
                fields.len()
            )));
        }
        for (b, f) in fields[1..].iter().enumerate() {
            let v: f64 = f.trim().parse().map_err(|_| parse_err(format!("bad number `{f}`")))?;
            if !(v >= 0.0 && v.is_finite()) {
                return Err(parse_err(format!("value `{f}` is not a finite non-negative number")));
            }
            rows[b].push(v);
        }
    }
    Ok(Spectrogram::from_rows(rows, frame_rate, pitches))
}

pub const ALIGNMENT_HEADER: &str = "score_index,beat,pitches,frame,time_s,cumulative_cost";

pub fn alignment_to_csv(result: &AlignmentResult) -> String {
    let mut out = format!("{ALIGNMENT_HEADER}\n");
    for e in &result.entries {
        let pitches: Vec<String> = e.pitches.iter().map(u8::to_string).collect();
        writeln!(
            out,
            "{},{},{},{},{},{}",
            e.score_index,
            fmt_sig6(e.beat),
            pitches.join("+"),
            e.frame,
            fmt_sig6(e.time_s),
            fmt_sig6(e.cumulative_cost)
        )
        .unwrap();
    }
    out
}

pub fn alignment_to_json(result: &AlignmentResult) -> String {
    serde_json::to_string_pretty(result).expect("alignment serializes")
}

/// Parses an alignment CSV back into entries (costs and times at the
/// written precision).
pub fn alignment_from_csv(text: &str) -> Result<Vec<AlignmentEntry>, CsvError> {
    let mut lines = text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty());
    match lines.next() {
        Some((_, h)) if h.trim() == ALIGNMENT_HEADER => {}
        other => return Err(CsvError::Header(other.map_or("empty file", |(_, h)| h).to_string())),
    }
    lines
        .map(|(idx, line)| {
            let err = |msg: &str| CsvError::Parse {
                line: idx + 1,
                msg: msg.to_string(),
            };
            let f: Vec<&str> = line.split(',').map(str::trim).collect();
            if f.len() != 6 {
                return Err(err("expected 6 fields"));
            }
            let pitches = f[2]
                .split('+')
                .map(|p| p.parse::<u8>())
                .collect::<Result<Vec<_>, _>>()
                .map_err(|_| err("bad pitch list"))?;
            Ok(AlignmentEntry {
                score_index: f[0].parse().map_err(|_| err("bad score_index"))?,
                beat: f[1].parse().map_err(|_| err("bad beat"))?,
                pitches,
                frame: f[3].parse().map_err(|_| err("bad frame"))?,
                time_s: f[4].parse().map_err(|_| err("bad time_s"))?,
                cumulative_cost: f[5].parse().map_err(|_| err("bad cumulative_cost"))?,
            })
        })
        .collect()
}

pub const TRUTH_HEADER: &str = "score_index,beat,time_s";

pub fn truth_to_csv(beats: &[f64], times: &[f64]) -> String {
    let mut out = format!("{TRUTH_HEADER}\n");
    for (i, (b, t)) in beats.iter().zip(times).enumerate() {
        writeln!(out, "{i},{},{}", fmt_sig6(*b), fmt_sig6(*t)).unwrap();
    }
    out
}

/// Returns `(beats, times)` from a ground-truth CSV.
pub fn truth_from_csv(text: &str) -> Result<(Vec<f64>, Vec<f64>), CsvError> {
    let mut lines = text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty());
    match lines.next() {
        Some((_, h)) if h.trim() == TRUTH_HEADER => {}
        other => return Err(CsvError::Header(other.map_or("empty file", |(_, h)| h).to_string())),
    }
    let mut beats = Vec::new();
    let mut times = Vec::new();
    for (idx, line) in lines {
        let err = |msg: &str| CsvError::Parse {
            line: idx + 1,
            msg: msg.to_string(),
        };
        let f: Vec<&str> = line.split(',').map(str::trim).collect();
        if f.len() != 3 {
            return Err(err("expected 3 fields"));
        }
        beats.push(f[1].parse().map_err(|_| err("bad beat"))?);
        times.push(f[2].parse().map_err(|_| err("bad time_s"))?);
    }
    Ok((beats, times))
}
