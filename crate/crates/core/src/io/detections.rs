//! Detection and ground-truth CSV in the common multi-object-tracking layout:
//! `frame,id,bb_left,bb_top,bb_width,bb_height,conf,class`.

use std::collections::BTreeMap;
use std::fs::File;
use std::io::{Read, Write};
use std::path::Path;

use super::{fmt_num, IoError};
use crate::model::{BoundingBox, Detection};
use crate::sim::GroundTruth;

pub const COLUMNS: [&str; 8] = ["frame", "id", "bb_left", "bb_top", "bb_width", "bb_height", "conf", "class"];

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DetectionRow {
    pub frame: u64,
    /// −1 when the identity is unknown.
    pub id: i64,
    pub bbox: BoundingBox,
    pub confidence: f64,
    pub class_id: i64,
}

impl DetectionRow {
    pub fn detection(&self) -> Detection {
        Detection {
            frame: self.frame,
            bbox: self.bbox,
            confidence: self.confidence,
            class_id: self.class_id,
        }
    }

    pub fn from_detection(d: &Detection, id: i64) -> Self {
        Self {
            frame: d.frame,
            id,
            bbox: d.bbox,
            confidence: d.confidence,
            class_id: d.class_id,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct DetectionFile {
    /// In file order; frames never decrease.
    pub rows: Vec<DetectionRow>,
}

impl DetectionFile {
    pub fn detections(&self) -> Vec<Detection> {
        self.rows.iter().map(DetectionRow::detection).collect()
    }

    pub fn by_frame(&self) -> BTreeMap<u64, Vec<Detection>> {
        let mut out: BTreeMap<u64, Vec<Detection>> = BTreeMap::new();
        for r in &self.rows {
            out.entry(r.frame).or_default().push(r.detection());
        }
        out
    }

    pub fn frame_range(&self) -> Option<(u64, u64)> {
        Some((self.rows.first()?.frame, self.rows.last()?.frame))
    }

    /// Rows with a known id read as ground truth.
    pub fn to_ground_truth(&self, gsd_km_per_px: f64, fps: f64) -> GroundTruth {
        let boxes: Vec<(u64, u64, BoundingBox)> = self
            .rows
            .iter()
            .filter(|r| r.id >= 0)
            .map(|r| (r.frame, r.id as u64, r.bbox))
            .collect();
        GroundTruth::from_boxes(&boxes, gsd_km_per_px, fps, None)
    }

    pub fn from_ground_truth(truth: &GroundTruth) -> Self {
        Self {
            rows: truth
                .rows
                .iter()
                .map(|r| DetectionRow {
                    frame: r.frame,
                    id: r.id as i64,
                    bbox: r.bbox,
                    confidence: 1.0,
                    class_id: 0,
                })
                .collect(),
        }
    }
}

fn field<T: std::str::FromStr>(rec: &csv::StringRecord, idx: usize, line: u64, what: &str) -> Result<T, IoError> {
    let raw = &rec[idx];
    raw.parse()
        .map_err(|_| IoError::at(line, Some(COLUMNS[idx]), format!("expected {what}, found `{raw}`")))
}

/// Parses detection rows. A leading header line starting with `frame` is
/// skipped; columns past the eighth are ignored. An empty input is valid.
pub fn parse_detections<R: Read>(input: R) -> Result<DetectionFile, IoError> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(input);
    let mut rows = Vec::new();
    let mut first = true;
    for rec in reader.records() {
        let rec = rec?;
        let line = rec.position().map_or(0, |p| p.line());
        if std::mem::take(&mut first) && rec.get(0).is_some_and(|f| f.eq_ignore_ascii_case("frame")) {
            continue;
        }
        if rec.len() < COLUMNS.len() {
            return Err(IoError::at(
                line,
                None,
                format!("expected {} columns, found {}", COLUMNS.len(), rec.len()),
            ));
        }
        let frame: u64 = field(&rec, 0, line, "a non-negative integer frame")?;
        let id: i64 = field(&rec, 1, line, "an integer id")?;
        let mut v = [0.0f64; 5];
        for (k, slot) in v.iter_mut().enumerate() {
            *slot = field(&rec, 2 + k, line, "a number")?;
            if !slot.is_finite() {
                return Err(IoError::at(line, Some(COLUMNS[2 + k]), "value must be finite"));
            }
        }
        let class_id: i64 = field(&rec, 7, line, "an integer class")?;
        for (k, name) in [(2, "width"), (3, "height")] {
            if v[k] <= 0.0 {
                return Err(IoError::at(
                    line,
                    Some(COLUMNS[2 + k]),
                    format!("box {name} must be positive, got {}", v[k]),
                ));
            }
        }
        if let Some(prev) = rows.last().map(|r: &DetectionRow| r.frame) {
            if frame < prev {
                return Err(IoError::at(
                    line,
                    Some("frame"),
                    format!("frames must not decrease ({frame} after {prev})"),
                ));
            }
        }
        rows.push(DetectionRow {
            frame,
            id,
            bbox: BoundingBox::new(v[0], v[1], v[2], v[3]),
            confidence: v[4],
            class_id,
        });
    }
    Ok(DetectionFile { rows })
}

pub fn read_detections(path: &Path) -> Result<DetectionFile, IoError> {
    let file = File::open(path).map_err(|e| IoError::file(path, e))?;
    parse_detections(file)
}

/// Writes rows with a header line.
pub fn write_detections<W: Write>(rows: &[DetectionRow], out: W) -> Result<(), IoError> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(COLUMNS)?;
    for r in rows {
        w.write_record([
            r.frame.to_string(),
            r.id.to_string(),
            fmt_num(r.bbox.x),
            fmt_num(r.bbox.y),
            fmt_num(r.bbox.w),
            fmt_num(r.bbox.h),
            fmt_num(r.confidence),
            r.class_id.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}
