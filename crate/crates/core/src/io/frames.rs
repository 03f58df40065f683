//! JSON Lines frame files.
//!
//! One frame per line:
//!
//! ```text
//! {"frame": "000123",
//!  "gts":   [{"cls": "Car", "x": .., "y": .., "z": .., "l": .., "w": .., "h": .., "theta": .., "difficulty": "moderate"}],
//!  "preds": [{"cls": "Car", "x": .., "y": .., "z": .., "l": .., "w": .., "h": .., "theta": .., "score": 0.93}]}
//! ```
//!
//! Either array may be missing. Ground-truth objects may carry a `points`
//! array of `[x, y, z]` triples for the augmentation tools. Lengths are in
//! meters, angles in radians.

use std::collections::{HashMap, HashSet};
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::Box7;
use crate::metrics::{Frame, GtObject, PredObject};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GtRecord {
    pub cls: String,
    pub x: f64,
    pub y: f64,
    pub z: f64,
    pub l: f64,
    pub w: f64,
    pub h: f64,
    pub theta: f64,
    pub difficulty: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub points: Option<Vec<[f64; 3]>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PredRecord {
    pub cls: String,
    pub x: f64,
    pub y: f64,
    pub z: f64,
    pub l: f64,
    pub w: f64,
    pub h: f64,
    pub theta: f64,
    pub score: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FrameRecord {
    pub frame: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gts: Option<Vec<GtRecord>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub preds: Option<Vec<PredRecord>>,
}

impl GtRecord {
    pub fn from_object(g: &GtObject, points: Option<Vec<[f64; 3]>>) -> Self {
        let b = &g.bbox;
        Self {
            cls: g.cls.clone(),
            x: b.x(),
            y: b.y(),
            z: b.z(),
            l: b.l(),
            w: b.w(),
            h: b.h(),
            theta: b.theta(),
            difficulty: g.difficulty.as_str().to_string(),
            points,
        }
    }

    pub fn to_box(&self) -> Result<Box7> {
        Box7::new(self.x, self.y, self.z, self.l, self.w, self.h, self.theta)
    }

    pub fn to_object(&self) -> Result<GtObject> {
        Ok(GtObject {
            bbox: self.to_box()?,
            cls: self.cls.clone(),
            difficulty: self.difficulty.parse()?,
        })
    }
}

impl PredRecord {
    pub fn from_object(p: &PredObject) -> Self {
        let b = &p.bbox;
        Self {
            cls: p.cls.clone(),
            x: b.x(),
            y: b.y(),
            z: b.z(),
            l: b.l(),
            w: b.w(),
            h: b.h(),
            theta: b.theta(),
            score: p.score,
        }
    }

    pub fn to_object(&self) -> Result<PredObject> {
        if !(0.0..=1.0).contains(&self.score) {
            return Err(Error::InvalidConfig(format!(
                "prediction score {} outside [0, 1]",
                self.score
            )));
        }
        Ok(PredObject {
            bbox: Box7::new(self.x, self.y, self.z, self.l, self.w, self.h, self.theta)?,
            cls: self.cls.clone(),
            score: self.score,
        })
    }
}

impl FrameRecord {
    pub fn from_frame(f: &Frame) -> Self {
        Self {
            frame: f.frame_id.clone(),
            gts: Some(f.gts.iter().map(|g| GtRecord::from_object(g, None)).collect()),
            preds: Some(f.preds.iter().map(PredRecord::from_object).collect()),
        }
    }

    pub fn to_frame(&self) -> Result<Frame> {
        if self.frame.is_empty() {
            return Err(Error::InvalidConfig("empty frame id".into()));
        }
        let gts = self
            .gts
            .iter()
            .flatten()
            .map(GtRecord::to_object)
            .collect::<Result<_>>()?;
        let preds = self
            .preds
            .iter()
            .flatten()
            .map(PredRecord::to_object)
            .collect::<Result<_>>()?;
        Ok(Frame {
            frame_id: self.frame.clone(),
            gts,
            preds,
        })
    }
}

fn open(path: &Path) -> Result<BufReader<File>> {
    File::open(path)
        .map(BufReader::new)
        .map_err(|e| Error::io(path, e))
}

/// Raw records, one per non-blank line, validated into frames on the way.
pub fn read_frame_records(path: &Path) -> Result<Vec<FrameRecord>> {
    let mut out = Vec::new();
    for (i, line) in open(path)?.lines().enumerate() {
        let line = line.map_err(|e| Error::io(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        let parse_err = |message: String| Error::Parse {
            path: path.to_path_buf(),
            line: i + 1,
            message,
        };
        let rec: FrameRecord =
            serde_json::from_str(&line).map_err(|e| parse_err(e.to_string()))?;
        rec.to_frame().map_err(|e| parse_err(e.to_string()))?;
        out.push(rec);
    }
    Ok(out)
}

pub fn load_frames(path: &Path) -> Result<Vec<Frame>> {
    read_frame_records(path)?
        .iter()
        .map(FrameRecord::to_frame)
        .collect()
}

pub fn write_frame_records(path: &Path, records: &[FrameRecord]) -> Result<()> {
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(file);
    for rec in records {
        serde_json::to_writer(&mut w, rec)?;
        w.write_all(b"\n").map_err(|e| Error::io(path, e))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

pub fn write_frames(path: &Path, frames: &[Frame]) -> Result<()> {
    let records: Vec<FrameRecord> = frames.iter().map(FrameRecord::from_frame).collect();
    write_frame_records(path, &records)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct MergeReport {
    /// Frames present only in the ground-truth file.
    pub gt_only: usize,
    /// Frames present only in the prediction file.
    pub pred_only: usize,
}

/// Joins ground truths from `gt_frames` with predictions from
/// `pred_frames` by frame id. Missing counterparts become empty lists.
/// Output follows ground-truth file order, then prediction-only frames.
pub fn merge_frames(gt_frames: Vec<Frame>, pred_frames: Vec<Frame>) -> Result<(Vec<Frame>, MergeReport)> {
    let mut preds: HashMap<String, Vec<PredObject>> = HashMap::with_capacity(pred_frames.len());
    let mut pred_order = Vec::with_capacity(pred_frames.len());
    for f in pred_frames {
        if preds.contains_key(&f.frame_id) {
            return Err(Error::DuplicateFrame(f.frame_id));
        }
        pred_order.push(f.frame_id.clone());
        preds.insert(f.frame_id, f.preds);
    }

    let mut report = MergeReport::default();
    let mut seen = HashSet::with_capacity(gt_frames.len());
    let mut out = Vec::with_capacity(gt_frames.len());
    for f in gt_frames {
        if !seen.insert(f.frame_id.clone()) {
            return Err(Error::DuplicateFrame(f.frame_id));
        }
        let p = preds.remove(&f.frame_id).unwrap_or_else(|| {
            report.gt_only += 1;
            Vec::new()
        });
        out.push(Frame {
            frame_id: f.frame_id,
            gts: f.gts,
            preds: p,
        });
    }
    for id in pred_order {
        if let Some(p) = preds.remove(&id) {
            report.pred_only += 1;
            out.push(Frame {
                frame_id: id,
                gts: Vec::new(),
                preds: p,
            });
        }
    }
    if report.gt_only + report.pred_only > 0 {
        log::warn!(
            "{} frame(s) without predictions, {} frame(s) without ground truth",
            report.gt_only,
            report.pred_only
        );
    }
    Ok((out, report))
}
