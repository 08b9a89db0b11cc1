//! On-disk formats: ground truth as CSV, predictions and decode requests as
//! JSON lines.
//!
//! Parsers validate every record and report positioned errors (1-based line
//! number plus reason). Writers serialize floats with 6 decimal places, so
//! identical data always produces identical bytes and parse/serialize
//! round-trips are stable.
//!
//! Exact formats:
//!
//! * ground truth CSV, header `page_id,class,x1,y1,x2,y2`;
//! * prediction JSONL, one object per line:
//!   `{"page_id":str,"class":"embedded"|"isolated","score":float,
//!   "box":[x1,y1,x2,y2],"model_id":int?}` (`model_id` defaults to 0);
//! * decode-request JSONL:
//!   `{"page_id":str,"level":int,"x":float,"y":float,"dists":[4][regmax+1]}`
//!   with `dists` in left, top, right, bottom order.

use std::collections::HashSet;
use std::fmt::Write as _;
use std::io::{BufRead, BufReader, Read, Write};

use serde::Deserialize;
use thiserror::Error;

use crate::detection::{Detection, FusedDetection, GroundTruth, PredictionRecord};
use crate::geometry::BBox;

pub const GT_CSV_HEADER: &str = "page_id,class,x1,y1,x2,y2";

#[derive(Debug, Error)]
pub enum ParseError {
    #[error("line {line}: {reason}")]
    Record { line: u64, reason: String },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl ParseError {
    fn record(line: u64, reason: impl ToString) -> Self {
        ParseError::Record { line, reason: reason.to_string() }
    }
}

/// Parses a ground-truth CSV stream. Rows must carry a valid box, a known
/// class (case-insensitive) and a nonempty page id; rows identical to an
/// earlier one are rejected.
pub fn parse_gt<R: Read>(reader: R) -> Result<Vec<GroundTruth>, ParseError> {
    let mut csv_reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_reader(reader);

    {
        let headers = csv_reader.headers().map_err(csv_reason)?;
        let expected: Vec<&str> = GT_CSV_HEADER.split(',').collect();
        if headers.iter().collect::<Vec<_>>() != expected {
            return Err(ParseError::record(
                1,
                format!("expected header `{GT_CSV_HEADER}`"),
            ));
        }
    }

    let mut out = Vec::new();
    let mut seen: HashSet<(String, u8, [u64; 4])> = HashSet::new();
    for record in csv_reader.records() {
        let record = record.map_err(csv_reason)?;
        let line = record.position().map_or(0, |p| p.line());
        if record.len() != 6 {
            return Err(ParseError::record(
                line,
                format!("expected 6 fields, got {}", record.len()),
            ));
        }
        let page_id = record[0].to_string();
        if page_id.is_empty() {
            return Err(ParseError::record(line, "empty page_id"));
        }
        let class = record[1]
            .parse()
            .map_err(|e| ParseError::record(line, e))?;
        let mut coords = [0.0f64; 4];
        for (slot, field) in coords.iter_mut().zip(record.iter().skip(2)) {
            *slot = field
                .parse()
                .map_err(|_| ParseError::record(line, format!("malformed coordinate `{field}`")))?;
        }
        let bbox = BBox::new(coords[0], coords[1], coords[2], coords[3])
            .map_err(|e| ParseError::record(line, e))?;
        let key = (
            page_id.clone(),
            class as u8,
            [coords[0].to_bits(), coords[1].to_bits(), coords[2].to_bits(), coords[3].to_bits()],
        );
        if !seen.insert(key) {
            return Err(ParseError::record(line, "duplicate of an earlier row"));
        }
        out.push(GroundTruth { page_id, class, bbox });
    }
    Ok(out)
}

fn csv_reason(err: csv::Error) -> ParseError {
    let line = match err.position() {
        Some(p) => p.line(),
        None => 0,
    };
    match err.into_kind() {
        csv::ErrorKind::Io(io) => ParseError::Io(io),
        other => ParseError::record(line, format!("{other:?}")),
    }
}

#[derive(Deserialize)]
struct RawPrediction {
    page_id: String,
    class: String,
    score: f64,
    #[serde(rename = "box")]
    bbox: [f64; 4],
    #[serde(default)]
    model_id: Option<u32>,
}

/// Parses a prediction JSONL stream. Blank lines are skipped; `model_id`
/// defaults to 0. An empty stream yields an empty list.
pub fn parse_predictions<R: Read>(reader: R) -> Result<Vec<PredictionRecord>, ParseError> {
    let mut out = Vec::new();
    for (idx, line) in BufReader::new(reader).lines().enumerate() {
        let line_no = idx as u64 + 1;
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let raw: RawPrediction = serde_json::from_str(&line)
            .map_err(|e| ParseError::record(line_no, e))?;
        let class = raw
            .class
            .parse()
            .map_err(|e| ParseError::record(line_no, e))?;
        let bbox = BBox::new(raw.bbox[0], raw.bbox[1], raw.bbox[2], raw.bbox[3])
            .map_err(|e| ParseError::record(line_no, e))?;
        let detection = Detection::new(bbox, class, raw.score, raw.model_id.unwrap_or(0))
            .map_err(|e| ParseError::record(line_no, e))?;
        out.push(PredictionRecord { page_id: raw.page_id, detection });
    }
    Ok(out)
}

/// One grid point with its four side distributions, awaiting decoding.
#[derive(Debug, Clone, Deserialize, PartialEq)]
pub struct DecodeRequest {
    pub page_id: String,
    pub level: u8,
    pub x: f64,
    pub y: f64,
    /// Left, top, right, bottom.
    pub dists: [Vec<f64>; 4],
}

/// Parses a decode-request JSONL stream. Distribution contents are validated
/// later, when a pyramid spec is known.
pub fn parse_decode_requests<R: Read>(reader: R) -> Result<Vec<DecodeRequest>, ParseError> {
    let mut out = Vec::new();
    for (idx, line) in BufReader::new(reader).lines().enumerate() {
        let line_no = idx as u64 + 1;
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let request: DecodeRequest = serde_json::from_str(&line)
            .map_err(|e| ParseError::record(line_no, e))?;
        out.push(request);
    }
    Ok(out)
}

/// One CSV row, floats at 6 decimals. Page ids are quoted when needed.
pub fn format_gt_row(gt: &GroundTruth) -> String {
    let b = &gt.bbox;
    format!(
        "{},{},{:.6},{:.6},{:.6},{:.6}",
        csv_field(&gt.page_id),
        gt.class,
        b.x1(),
        b.y1(),
        b.x2(),
        b.y2()
    )
}

fn csv_field(s: &str) -> String {
    if s.contains([',', '"', '\n', '\r']) {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}

pub fn write_gt<W: Write>(mut writer: W, gts: &[GroundTruth]) -> std::io::Result<()> {
    writeln!(writer, "{GT_CSV_HEADER}")?;
    for gt in gts {
        writeln!(writer, "{}", format_gt_row(gt))?;
    }
    Ok(())
}

/// One prediction as a JSON line (no trailing newline).
pub fn format_prediction(page_id: &str, det: &Detection) -> String {
    let b = det.bbox();
    format!(
        "{{\"page_id\":{},\"class\":\"{}\",\"score\":{:.6},\"box\":[{:.6},{:.6},{:.6},{:.6}],\"model_id\":{}}}",
        json_string(page_id),
        det.class(),
        det.score(),
        b.x1(),
        b.y1(),
        b.x2(),
        b.y2(),
        det.model_id()
    )
}

/// Like [`format_prediction`] with the cluster size appended.
pub fn format_fused(page_id: &str, fused: &FusedDetection) -> String {
    let mut line = format_prediction(page_id, &fused.detection);
    line.pop();
    let _ = write!(line, ",\"cluster_size\":{}}}", fused.cluster_size);
    line
}

/// A decoded box as a JSON line (no trailing newline).
pub fn format_decoded_box(page_id: &str, bbox: &BBox) -> String {
    format!(
        "{{\"page_id\":{},\"box\":[{:.6},{:.6},{:.6},{:.6}]}}",
        json_string(page_id),
        bbox.x1(),
        bbox.y1(),
        bbox.x2(),
        bbox.y2()
    )
}

fn json_string(s: &str) -> String {
    serde_json::to_string(s).expect("strings always serialize")
}

pub fn write_predictions<W: Write>(
    mut writer: W,
    preds: &[PredictionRecord],
) -> std::io::Result<()> {
    for p in preds {
        writeln!(writer, "{}", format_prediction(&p.page_id, &p.detection))?;
    }
    Ok(())
}
