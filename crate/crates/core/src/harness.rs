//! File-in/file-out drivers behind the command-line subcommands.
//!
//! Each `run_*` function reads its inputs, calls the library operation and
//! writes the result. They return a small report so callers and tests can
//! check counts without re-reading outputs.

use std::collections::HashMap;
use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use serde_json::json;

use crate::augment::{self, ObjectSample, SizeStats};
use crate::corner_targets::{self, GridConfig, Plane, RegressionMaps, TargetGrid};
use crate::edgehead::{self, ControlResiduals, EdgeResiduals, RotationMode, StandardResiduals};
use crate::error::{Error, Result};
use crate::geometry;
use crate::io::frames::{self, FrameRecord, PredRecord};
use crate::io::tensor::{self, Tensor};
use crate::metrics::{self, EvalConfig, Frame, Metric};
use crate::msgm::{self, ConvKernel, Dense, FeatureMap, MsgmParams, KERNEL_SIZES};

/// Runs `f` on a dedicated pool of `threads` workers, or on the global pool
/// when `None`.
pub fn with_threads<T: Send>(threads: Option<usize>, f: impl FnOnce() -> T + Send) -> Result<T> {
    match threads {
        None => Ok(f()),
        Some(0) => Err(Error::InvalidConfig("threads must be >= 1".into())),
        Some(n) => {
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(n)
                .build()
                .map_err(|e| Error::InvalidConfig(format!("thread pool: {e}")))?;
            Ok(pool.install(f))
        }
    }
}

fn write_text(path: &Path, text: &str) -> Result<()> {
    fs::write(path, text).map_err(|e| Error::io(path, e))
}

/// Frames from a combined file, or ground truths and predictions from two
/// files joined by frame id.
pub fn load_dataset(gt_path: &Path, pred_path: Option<&Path>) -> Result<Vec<Frame>> {
    let gts = frames::load_frames(gt_path)?;
    match pred_path {
        None => Ok(gts),
        Some(p) => {
            let preds = frames::load_frames(p)?;
            let gts = gts
                .into_iter()
                .map(|f| Frame {
                    preds: Vec::new(),
                    ..f
                })
                .collect();
            let preds = preds
                .into_iter()
                .map(|f| Frame {
                    gts: Vec::new(),
                    ..f
                })
                .collect();
            Ok(frames::merge_frames(gts, preds)?.0)
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize)]
pub struct Counts {
    pub frames: usize,
    pub gts: usize,
    pub preds: usize,
    /// Objects outside the evaluated class.
    pub skipped: usize,
}

impl Counts {
    pub fn of(dataset: &[Frame], class: &str) -> Self {
        let mut c = Counts {
            frames: dataset.len(),
            ..Counts::default()
        };
        for f in dataset {
            for g in &f.gts {
                if g.cls == class {
                    c.gts += 1;
                } else {
                    c.skipped += 1;
                }
            }
            for p in &f.preds {
                if p.cls == class {
                    c.preds += 1;
                } else {
                    c.skipped += 1;
                }
            }
        }
        c
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MetricRow {
    pub metric: Metric,
    pub threshold: f64,
    pub alpha: f64,
    pub ap: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct HistRow {
    pub bin_lo: f64,
    pub bin_hi: f64,
    pub p_a: f64,
    pub p_b: f64,
    pub diff: f64,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize)]
pub struct RunReport {
    pub rows: Vec<MetricRow>,
    pub hist: Vec<HistRow>,
    pub counts: Counts,
    /// Set when either histogram had no values in range, so the
    /// differences do not sum to zero.
    pub hist_flagged: bool,
}

pub fn eval_csv(rows: &[MetricRow]) -> String {
    let mut out = String::from("metric,threshold,alpha,AP\n");
    for r in rows {
        writeln!(out, "{},{},{},{:.4}", r.metric, r.threshold, r.alpha, r.ap).expect("string write");
    }
    out
}

/// AP for all four metrics at each penalty ratio in `alphas`.
pub fn evaluate_rows(dataset: &[Frame], cfg: &EvalConfig, alphas: &[f64]) -> Result<Vec<MetricRow>> {
    let alphas = if alphas.is_empty() { &[cfg.alpha][..] } else { alphas };
    let mut rows = Vec::with_capacity(4 * alphas.len());
    for &alpha in alphas {
        let cfg = EvalConfig {
            alpha,
            ..cfg.clone()
        };
        let table = metrics::evaluate(dataset, &cfg)?;
        for m in Metric::ALL {
            rows.push(MetricRow {
                metric: m,
                threshold: cfg.thresholds.get(m),
                alpha,
                ap: table.get(m),
            });
        }
    }
    Ok(rows)
}

pub fn run_eval(
    gt_path: &Path,
    pred_path: Option<&Path>,
    cfg: &EvalConfig,
    alphas: &[f64],
    out: Option<&Path>,
) -> Result<(RunReport, String)> {
    let dataset = load_dataset(gt_path, pred_path)?;
    let rows = evaluate_rows(&dataset, cfg, alphas)?;
    let csv = eval_csv(&rows);
    if let Some(path) = out {
        write_text(path, &csv)?;
    }
    let report = RunReport {
        rows,
        counts: Counts::of(&dataset, &cfg.class_filter),
        ..RunReport::default()
    };
    Ok((report, csv))
}

pub fn hist_csv(rows: &[HistRow]) -> String {
    let mut out = String::from("bin_lo,bin_hi,p_a,p_b,diff\n");
    for r in rows {
        writeln!(out, "{},{},{},{},{}", r.bin_lo, r.bin_hi, r.p_a, r.p_b, r.diff).expect("string write");
    }
    out
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HistOptions {
    pub lo: f64,
    pub hi: f64,
    pub bins: usize,
}

impl Default for HistOptions {
    fn default() -> Self {
        Self {
            lo: 0.0,
            hi: 2.0,
            bins: 20,
        }
    }
}

/// Gap-distribution difference `P_B - P_A` between two prediction sets.
pub fn run_hist(
    gt_path: &Path,
    pred_a: &Path,
    pred_b: &Path,
    cfg: &EvalConfig,
    opts: HistOptions,
    out: Option<&Path>,
) -> Result<(RunReport, String)> {
    let a = load_dataset(gt_path, Some(pred_a))?;
    let b = load_dataset(gt_path, Some(pred_b))?;
    let ha = metrics::gcs_histogram(&a, cfg, opts.lo, opts.hi, opts.bins)?;
    let hb = metrics::gcs_histogram(&b, cfg, opts.lo, opts.hi, opts.bins)?;
    let diff = metrics::proportion_difference(&ha.proportions, &hb.proportions)?;
    let rows: Vec<HistRow> = (0..ha.bins())
        .map(|i| {
            let (bin_lo, bin_hi) = ha.bin_edges(i);
            HistRow {
                bin_lo,
                bin_hi,
                p_a: ha.proportions[i],
                p_b: hb.proportions[i],
                diff: diff[i],
            }
        })
        .collect();
    let flagged = ha.empty || hb.empty;
    if flagged {
        log::warn!(
            "empty gap distribution (a: {}, b: {}); differences do not sum to zero",
            ha.empty,
            hb.empty
        );
    }
    let csv = hist_csv(&rows);
    if let Some(path) = out {
        write_text(path, &csv)?;
    }
    let report = RunReport {
        hist: rows,
        counts: Counts::of(&a, &cfg.class_filter),
        hist_flagged: flagged,
        ..RunReport::default()
    };
    Ok((report, csv))
}

/// Channel names of a target tensor: one heatmap per class, the regression
/// heads, then the mask.
pub fn target_channels(classes: &[String]) -> Vec<String> {
    classes
        .iter()
        .map(|c| format!("heatmap:{c}"))
        .chain(RegressionMaps::CHANNELS.iter().map(|s| s.to_string()))
        .chain(std::iter::once("mask".to_string()))
        .collect()
}

pub fn targets_to_tensor(t: &TargetGrid) -> Result<Tensor> {
    let (h, w) = (t.height(), t.width());
    let mut data = Vec::with_capacity((t.heatmaps.len() + 11) * h * w);
    for p in t
        .heatmaps
        .iter()
        .chain(t.regression.planes())
        .chain(std::iter::once(&t.mask))
    {
        data.extend_from_slice(p.data());
    }
    let channels = target_channels(&t.classes);
    Tensor::new("targets", vec![channels.len(), h, w], data)?.with_channels(channels)
}

pub fn tensor_to_targets(t: &Tensor) -> Result<TargetGrid> {
    let [c, h, w] = t.dims[..] else {
        return Err(Error::ShapeMismatch(format!(
            "target tensor must be [C, H, W], got {:?}",
            t.dims
        )));
    };
    let plane = |i: usize| Plane::from_vec(w, h, t.channel(i).to_vec());
    let find = |name: &str| {
        t.channel_index(name)
            .ok_or_else(|| Error::TensorFormat(format!("missing channel `{name}`")))
    };
    let classes: Vec<String> = t
        .channels
        .iter()
        .filter_map(|n| n.strip_prefix("heatmap:").map(str::to_string))
        .collect();
    let heatmaps = classes
        .iter()
        .map(|cls| plane(find(&format!("heatmap:{cls}"))?))
        .collect::<Result<Vec<_>>>()?;
    let reg = RegressionMaps::CHANNELS
        .iter()
        .map(|n| plane(find(n)?))
        .collect::<Result<Vec<_>>>()?;
    let mask = match t.channel_index("mask") {
        Some(i) => plane(i)?,
        None => Plane::zeros(w, h),
    };
    debug_assert!(c >= classes.len() + RegressionMaps::CHANNELS.len());
    Ok(TargetGrid {
        classes,
        heatmaps,
        regression: RegressionMaps::from_planes(reg)?,
        mask,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize)]
pub struct TargetsReport {
    pub written: usize,
    pub skipped_out_of_range: usize,
    pub skipped_unknown_class: usize,
}

/// Target maps for one frame of `frames_path` (the first when `frame_id`
/// is `None`).
pub fn run_targets(
    frames_path: &Path,
    frame_id: Option<&str>,
    classes: &[String],
    grid: &GridConfig,
    out: &Path,
) -> Result<TargetsReport> {
    let dataset = frames::load_frames(frames_path)?;
    let frame = match frame_id {
        Some(id) => dataset.iter().find(|f| f.frame_id == id),
        None => dataset.first(),
    }
    .ok_or_else(|| {
        Error::InvalidConfig(format!(
            "frame {} not found in {}",
            frame_id.unwrap_or("<first>"),
            frames_path.display()
        ))
    })?;
    let (targets, rep) = corner_targets::build_targets(&frame.gts, classes, grid)?;
    let report = TargetsReport {
        written: rep.written,
        skipped_out_of_range: rep.skipped_out_of_range,
        skipped_unknown_class: rep.skipped_unknown_class,
    };
    let meta = json!({
        "frame": frame.frame_id,
        "classes": classes,
        "grid": grid,
        "report": report,
    });
    tensor::write_tensors(out, &[targets_to_tensor(&targets)?], meta)?;
    Ok(report)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize)]
pub struct DecodeReport {
    pub decoded: usize,
    pub rejected_c2c: usize,
    pub rejected_corner: usize,
    pub rejected_invalid: usize,
}

/// Decodes a target tensor back to boxes and writes them as a
/// prediction-only frame. The grid recorded in the sidecar wins over
/// `grid`.
pub fn run_decode(
    targets_path: &Path,
    grid: &GridConfig,
    top_k: usize,
    score_thresh: f64,
    out: &Path,
) -> Result<DecodeReport> {
    let tensors = tensor::read_tensors(targets_path)?;
    let targets = tensor_to_targets(tensor::find(&tensors, "targets")?)?;
    let sidecar = tensor::read_sidecar(targets_path)?;
    let meta = sidecar.map(|s| s.meta).unwrap_or_default();
    let grid = match meta.get("grid") {
        Some(g) => serde_json::from_value(g.clone())?,
        None => grid.clone(),
    };
    grid.validate()?;
    if grid.width() != targets.width() || grid.height() != targets.height() {
        return Err(Error::ShapeMismatch(format!(
            "grid is {}x{} but targets are {}x{}",
            grid.height(),
            grid.width(),
            targets.height(),
            targets.width()
        )));
    }
    let frame_id = meta
        .get("frame")
        .and_then(|f| f.as_str())
        .unwrap_or("decoded")
        .to_string();
    let dec = corner_targets::decode_grid(&targets, &grid, top_k, score_thresh)?;
    let rec = FrameRecord {
        frame: frame_id,
        gts: None,
        preds: Some(dec.preds.iter().map(PredRecord::from_object).collect()),
    };
    frames::write_frame_records(out, &[rec])?;
    Ok(DecodeReport {
        decoded: dec.preds.len(),
        rejected_c2c: dec.rejected_c2c,
        rejected_corner: dec.rejected_corner,
        rejected_invalid: dec.rejected_invalid,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Codec {
    #[default]
    Edgehead,
    Control,
    Standard,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Residuals {
    Standard(StandardResiduals),
    Edge(EdgeResiduals),
    Control(ControlResiduals),
}

/// One line of a residual file, keyed by frame and anchor index.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResidualRecord {
    pub frame: String,
    pub anchor: usize,
    pub gt: usize,
    #[serde(flatten)]
    pub residuals: Residuals,
}

/// Index of the same-class ground truth with the highest BEV IoU, if any
/// overlaps at all. Earlier ground truths win ties.
fn best_gt(frame: &Frame, anchor: usize) -> Option<usize> {
    let a = &frame.preds[anchor];
    let mut best: Option<(usize, f64)> = None;
    for (i, g) in frame.gts.iter().enumerate() {
        if g.cls != a.cls {
            continue;
        }
        let iou = geometry::bev_iou(&a.bbox, &g.bbox);
        if iou > 0.0 && best.is_none_or(|(_, b)| iou > b) {
            best = Some((i, iou));
        }
    }
    best.map(|(i, _)| i)
}

/// Residual targets for every prediction (anchor) that overlaps a ground
/// truth of its class.
pub fn encode_residuals(dataset: &[Frame], codec: Codec, mode: RotationMode) -> Vec<ResidualRecord> {
    let mut out = Vec::new();
    for f in dataset {
        for ai in 0..f.preds.len() {
            let Some(gi) = best_gt(f, ai) else { continue };
            let (a, g) = (&f.preds[ai].bbox, &f.gts[gi].bbox);
            let residuals = match codec {
                Codec::Edgehead => Residuals::Edge(edgehead::edgehead_residuals_with(a, g, mode)),
                Codec::Control => Residuals::Control(edgehead::control_group_residuals(a, g)),
                Codec::Standard => Residuals::Standard(edgehead::standard_residuals(a, g)),
            };
            out.push(ResidualRecord {
                frame: f.frame_id.clone(),
                anchor: ai,
                gt: gi,
                residuals,
            });
        }
    }
    out
}

pub fn write_residuals(path: &Path, records: &[ResidualRecord]) -> Result<()> {
    let mut text = String::new();
    for r in records {
        text.push_str(&serde_json::to_string(r)?);
        text.push('\n');
    }
    write_text(path, &text)
}

pub fn read_residuals(path: &Path) -> Result<Vec<ResidualRecord>> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    text.lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, l)| {
            serde_json::from_str(l).map_err(|e| Error::Parse {
                path: path.to_path_buf(),
                line: i + 1,
                message: e.to_string(),
            })
        })
        .collect()
}

pub fn run_edgehead_encode(
    frames_path: &Path,
    codec: Codec,
    mode: RotationMode,
    out: &Path,
) -> Result<usize> {
    let dataset = frames::load_frames(frames_path)?;
    let records = encode_residuals(&dataset, codec, mode);
    write_residuals(out, &records)?;
    Ok(records.len())
}

/// Replaces each keyed anchor with its refined box. Anchors without a
/// residual are kept as they are.
pub fn apply_residuals(
    dataset: &mut [Frame],
    records: &[ResidualRecord],
    mode: RotationMode,
) -> Result<usize> {
    let index: HashMap<&str, usize> = dataset
        .iter()
        .enumerate()
        .map(|(i, f)| (f.frame_id.as_str(), i))
        .collect();
    let mut updates = Vec::with_capacity(records.len());
    for r in records {
        let Some(&fi) = index.get(r.frame.as_str()) else {
            return Err(Error::InvalidConfig(format!("residual for unknown frame `{}`", r.frame)));
        };
        let Some(anchor) = dataset[fi].preds.get(r.anchor) else {
            return Err(Error::InvalidConfig(format!(
                "frame `{}` has no anchor {}",
                r.frame, r.anchor
            )));
        };
        let refined = match &r.residuals {
            Residuals::Edge(e) => edgehead::apply_edgehead_residuals_with(&anchor.bbox, e, mode)?,
            Residuals::Control(c) => edgehead::apply_control_residuals(&anchor.bbox, c)?,
            Residuals::Standard(s) => edgehead::apply_standard_residuals(&anchor.bbox, s)?,
        };
        updates.push((fi, r.anchor, refined));
    }
    for (fi, ai, b) in &updates {
        dataset[*fi].preds[*ai].bbox = *b;
    }
    Ok(updates.len())
}

pub fn run_edgehead_apply(
    frames_path: &Path,
    residuals_path: &Path,
    mode: RotationMode,
    out: &Path,
) -> Result<usize> {
    let mut dataset = frames::load_frames(frames_path)?;
    let records = read_residuals(residuals_path)?;
    let n = apply_residuals(&mut dataset, &records, mode)?;
    frames::write_frames(out, &dataset)?;
    Ok(n)
}

pub fn params_to_tensors(p: &MsgmParams) -> Result<Vec<Tensor>> {
    let mut out = Vec::new();
    for (k, size) in p.kernels.iter().zip(KERNEL_SIZES) {
        out.push(Tensor::new(
            format!("conv{size}.weight"),
            vec![k.out_channels, k.in_channels, size, size],
            k.weights.clone(),
        )?);
        out.push(Tensor::new(format!("conv{size}.bias"), vec![k.out_channels], k.bias.clone())?);
    }
    for (name, d) in [("gate1", &p.gate_hidden), ("gate2", &p.gate_out)] {
        out.push(Tensor::new(
            format!("{name}.weight"),
            vec![d.out_features, d.in_features],
            d.weights.clone(),
        )?);
        out.push(Tensor::new(format!("{name}.bias"), vec![d.out_features], d.bias.clone())?);
    }
    Ok(out)
}

pub fn params_from_tensors(tensors: &[Tensor]) -> Result<MsgmParams> {
    let dims = |t: &Tensor, rank: usize| -> Result<Vec<usize>> {
        if t.dims.len() != rank {
            return Err(Error::ShapeMismatch(format!(
                "`{}` must have rank {rank}, got {:?}",
                t.name, t.dims
            )));
        }
        Ok(t.dims.clone())
    };
    let conv = |size: usize| -> Result<ConvKernel> {
        let w = tensor::find(tensors, &format!("conv{size}.weight"))?;
        let b = tensor::find(tensors, &format!("conv{size}.bias"))?;
        let d = dims(w, 4)?;
        if d[2] != size || d[3] != size {
            return Err(Error::ShapeMismatch(format!("`{}` must be {size}x{size}, got {d:?}", w.name)));
        }
        ConvKernel::new(d[0], d[1], size, w.data.clone(), b.data.clone())
    };
    let dense = |name: &str| -> Result<Dense> {
        let w = tensor::find(tensors, &format!("{name}.weight"))?;
        let b = tensor::find(tensors, &format!("{name}.bias"))?;
        let d = dims(w, 2)?;
        Dense::new(d[0], d[1], w.data.clone(), b.data.clone())
    };
    MsgmParams::new([conv(1)?, conv(3)?, conv(5)?], dense("gate1")?, dense("gate2")?)
}

pub fn feature_map_from_tensor(t: &Tensor) -> Result<FeatureMap> {
    let [c, h, w] = t.dims[..] else {
        return Err(Error::ShapeMismatch(format!("features must be [C, H, W], got {:?}", t.dims)));
    };
    FeatureMap::new(c, h, w, t.data.clone())
}

/// Writes seeded random parameters for `in_channels → out_channels`.
pub fn run_msgm_init(in_channels: usize, out_channels: usize, seed: u64, scale: f64, out: &Path) -> Result<()> {
    if in_channels == 0 || out_channels == 0 {
        return Err(Error::ShapeMismatch("channel counts must be >= 1".into()));
    }
    let p = MsgmParams::random(in_channels, out_channels, seed, scale);
    let meta = json!({"seed": seed, "scale": scale});
    tensor::write_tensors(out, &params_to_tensors(&p)?, meta)
}

/// Forward pass; the output file holds `features` and `gate_weights`.
pub fn run_msgm_forward(params_path: &Path, input_path: &Path, out: &Path) -> Result<[f64; 3]> {
    let params = params_from_tensors(&tensor::read_tensors(params_path)?)?;
    let input_tensors = tensor::read_tensors(input_path)?;
    let input = feature_map_from_tensor(tensor::find(&input_tensors, "features")?)?;
    let weights = msgm::gate_weights(&input, &params)?;
    let branches = msgm::branch_outputs(&input, &params)?;
    let fused = msgm::fuse(&branches, weights)?;
    let dims = fused.dims().to_vec();
    let tensors = [
        Tensor::new("features", dims, fused.into_data())?,
        Tensor::new("gate_weights", vec![3], weights.to_vec())?,
    ];
    tensor::write_tensors(out, &tensors, json!({}))?;
    Ok(weights)
}

#[derive(Debug, Clone, PartialEq)]
pub enum AugmentOp {
    /// Fixed per-axis factors.
    RosFixed([f64; 3]),
    /// Factors drawn from `[lo, hi]`, one draw per object in file order.
    RosRandom { lo: f64, hi: f64, seed: u64 },
    /// Statistical normalization; `source` defaults to the mean size of the
    /// file's selected objects.
    Sn {
        source: Option<SizeStats>,
        target: SizeStats,
    },
}

/// Augments the ground truths of `classes` in every frame. Predictions and
/// other classes pass through unchanged. Returns the number of objects
/// touched.
pub fn augment_records(records: &mut [FrameRecord], classes: &[String], op: &AugmentOp) -> Result<usize> {
    let selected = |cls: &str| classes.iter().any(|c| c == cls);
    let op = match op {
        AugmentOp::Sn { source: None, target } => {
            let boxes = records
                .iter()
                .flat_map(|r| r.gts.iter().flatten())
                .filter(|g| selected(&g.cls))
                .map(|g| g.to_box())
                .collect::<Result<Vec<_>>>()?;
            match SizeStats::from_boxes(&boxes) {
                Some(source) => AugmentOp::Sn {
                    source: Some(source),
                    target: *target,
                },
                None => return Ok(0),
            }
        }
        other => other.clone(),
    };
    let mut rng = match op {
        AugmentOp::RosRandom { seed, .. } => Some(ChaCha8Rng::seed_from_u64(seed)),
        _ => None,
    };
    let mut touched = 0;
    for rec in records.iter_mut() {
        for g in rec.gts.iter_mut().flatten() {
            if !selected(&g.cls) {
                continue;
            }
            let sample = ObjectSample {
                bbox: g.to_box()?,
                points: g.points.clone().unwrap_or_default(),
            };
            let out = match &op {
                AugmentOp::RosFixed(f) => augment::ros_scale(&sample, *f)?,
                AugmentOp::RosRandom { lo, hi, .. } => {
                    let f = augment::rng_factors(*lo, *hi, rng.as_mut().expect("seeded"))?;
                    augment::ros_scale(&sample, f)?
                }
                AugmentOp::Sn { source, target } => {
                    augment::sn_normalize(&sample, source.as_ref().expect("resolved"), target)?
                }
            };
            let b = out.bbox;
            (g.l, g.w, g.h) = (b.l(), b.w(), b.h());
            if g.points.is_some() {
                g.points = Some(out.points);
            }
            touched += 1;
        }
    }
    Ok(touched)
}

pub fn run_augment(input: &Path, classes: &[String], op: &AugmentOp, out: &Path) -> Result<usize> {
    let mut records = frames::read_frame_records(input)?;
    let n = augment_records(&mut records, classes, op)?;
    frames::write_frame_records(out, &records)?;
    Ok(n)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::Box7;
    use crate::metrics::{Difficulty, GtObject, PredObject};

    fn frame(id: &str, gt: Box7, pred: Box7) -> Frame {
        Frame {
            frame_id: id.into(),
            gts: vec![GtObject {
                bbox: gt,
                cls: "Car".into(),
                difficulty: Difficulty::Easy,
            }],
            preds: vec![PredObject {
                bbox: pred,
                cls: "Car".into(),
                score: 0.9,
            }],
        }
    }

    #[test]
    fn csv_layout() {
        let b = Box7::new(10.0, 3.0, 0.0, 4.0, 2.0, 1.5, 0.2).unwrap();
        let rows = evaluate_rows(&[frame("0", b, b)], &EvalConfig::default(), &[]).unwrap();
        assert_eq!(
            eval_csv(&rows),
            "metric,threshold,alpha,AP\nBEV,0.7,1,100.0000\n3D,0.7,1,100.0000\n\
             CS-BEV,0.5,1,100.0000\nCS-ABS,0.7,1,100.0000\n"
        );
    }

    #[test]
    fn residual_records_parse_back() {
        let a = Box7::new(10.0, 2.0, 0.0, 4.0, 2.0, 1.5, 0.0).unwrap();
        let g = Box7::new(10.5, 2.0, 0.1, 4.2, 2.0, 1.5, 0.3).unwrap();
        let ds = [frame("f", g, a)];
        for codec in [Codec::Edgehead, Codec::Control, Codec::Standard] {
            let recs = encode_residuals(&ds, codec, RotationMode::SetToTarget);
            assert_eq!(recs.len(), 1);
            let line = serde_json::to_string(&recs[0]).unwrap();
            let back: ResidualRecord = serde_json::from_str(&line).unwrap();
            assert_eq!(back, recs[0], "{line}");
        }
    }

    #[test]
    fn target_tensor_round_trip() {
        let grid = GridConfig {
            x_range: [0.0, 4.0],
            y_range: [0.0, 3.0],
            ..GridConfig::default()
        };
        let gt = GtObject {
            bbox: Box7::new(2.0, 1.5, 0.0, 1.0, 0.6, 1.0, 0.3).unwrap(),
            cls: "Car".into(),
            difficulty: Difficulty::Easy,
        };
        let classes = vec!["Car".to_string(), "Cyclist".to_string()];
        let (t, _) = corner_targets::build_targets(&[gt], &classes, &grid).unwrap();
        let tensor = targets_to_tensor(&t).unwrap();
        assert_eq!(tensor.dims, vec![13, 30, 40]);
        assert_eq!(tensor_to_targets(&tensor).unwrap(), t);
    }
}
