//! Dataset-level evaluation: greedy matching, R40-style average precision
//! and the closer-surfaces gap histograms.

use std::collections::HashSet;
use std::fmt;
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{self, Box7};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Difficulty {
    Easy,
    Moderate,
    Hard,
    Unknown,
}

impl Difficulty {
    pub fn as_str(&self) -> &'static str {
        match self {
            Difficulty::Easy => "easy",
            Difficulty::Moderate => "moderate",
            Difficulty::Hard => "hard",
            Difficulty::Unknown => "unknown",
        }
    }
}

impl FromStr for Difficulty {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "easy" => Ok(Difficulty::Easy),
            "moderate" => Ok(Difficulty::Moderate),
            "hard" => Ok(Difficulty::Hard),
            "unknown" => Ok(Difficulty::Unknown),
            _ => Err(Error::UnknownDifficulty(s.to_string())),
        }
    }
}

/// Which ground truths count as valid targets; the rest are ignored.
///
/// Levels are cumulative as in the KITTI protocol: `moderate` evaluates easy
/// and moderate objects. `all` also admits `unknown`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DifficultyFilter {
    Easy,
    #[default]
    Moderate,
    Hard,
    All,
}

impl DifficultyFilter {
    pub fn admits(&self, d: Difficulty) -> bool {
        match self {
            DifficultyFilter::All => true,
            DifficultyFilter::Easy => d == Difficulty::Easy,
            DifficultyFilter::Moderate => matches!(d, Difficulty::Easy | Difficulty::Moderate),
            DifficultyFilter::Hard => d != Difficulty::Unknown,
        }
    }
}

impl FromStr for DifficultyFilter {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "easy" => Ok(DifficultyFilter::Easy),
            "moderate" => Ok(DifficultyFilter::Moderate),
            "hard" => Ok(DifficultyFilter::Hard),
            "all" => Ok(DifficultyFilter::All),
            _ => Err(Error::UnknownDifficulty(s.to_string())),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GtObject {
    pub bbox: Box7,
    pub cls: String,
    pub difficulty: Difficulty,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PredObject {
    pub bbox: Box7,
    pub cls: String,
    pub score: f64,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct Frame {
    pub frame_id: String,
    pub gts: Vec<GtObject>,
    pub preds: Vec<PredObject>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Metric {
    Bev,
    ThreeD,
    CsBev,
    CsAbs,
}

impl Metric {
    pub const ALL: [Metric; 4] = [Metric::Bev, Metric::ThreeD, Metric::CsBev, Metric::CsAbs];

    pub fn name(&self) -> &'static str {
        match self {
            Metric::Bev => "BEV",
            Metric::ThreeD => "3D",
            Metric::CsBev => "CS-BEV",
            Metric::CsAbs => "CS-ABS",
        }
    }
}

impl fmt::Display for Metric {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl serde::Serialize for Metric {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.serialize_str(self.name())
    }
}

impl FromStr for Metric {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_uppercase().replace('_', "-").as_str() {
            "BEV" => Ok(Metric::Bev),
            "3D" => Ok(Metric::ThreeD),
            "CS-BEV" => Ok(Metric::CsBev),
            "CS-ABS" => Ok(Metric::CsAbs),
            _ => Err(Error::UnknownMetric(s.to_string())),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Thresholds {
    pub bev: f64,
    #[serde(rename = "3d")]
    pub iou_3d: f64,
    pub cs_bev: f64,
    pub cs_abs: f64,
}

impl Default for Thresholds {
    fn default() -> Self {
        Self {
            bev: 0.7,
            iou_3d: 0.7,
            cs_bev: 0.5,
            cs_abs: 0.7,
        }
    }
}

impl Thresholds {
    pub fn get(&self, metric: Metric) -> f64 {
        match metric {
            Metric::Bev => self.bev,
            Metric::ThreeD => self.iou_3d,
            Metric::CsBev => self.cs_bev,
            Metric::CsAbs => self.cs_abs,
        }
    }

    pub fn set(&mut self, metric: Metric, value: f64) {
        match metric {
            Metric::Bev => self.bev = value,
            Metric::ThreeD => self.iou_3d = value,
            Metric::CsBev => self.cs_bev = value,
            Metric::CsAbs => self.cs_abs = value,
        }
    }
}

/// How CS-ABS decides that a prediction hits a ground truth.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum CsAbsMatching {
    /// Threshold `Γ_ABS` directly.
    #[default]
    Score,
    /// Additionally require BEV IoU above the BEV threshold.
    BevGated,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EvalConfig {
    pub alpha: f64,
    pub thresholds: Thresholds,
    pub recall_points: usize,
    pub difficulty_filter: DifficultyFilter,
    pub class_filter: String,
    pub cs_abs_matching: CsAbsMatching,
}

impl Default for EvalConfig {
    fn default() -> Self {
        Self {
            alpha: 1.0,
            thresholds: Thresholds::default(),
            recall_points: 40,
            difficulty_filter: DifficultyFilter::Moderate,
            class_filter: "Car".to_string(),
            cs_abs_matching: CsAbsMatching::Score,
        }
    }
}

impl EvalConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.alpha.is_finite() && self.alpha >= 0.0) {
            return Err(Error::InvalidPenaltyRatio(self.alpha));
        }
        for m in Metric::ALL {
            let t = self.thresholds.get(m);
            if !(t > 0.0 && t <= 1.0) {
                return Err(Error::InvalidConfig(format!(
                    "threshold for {m} must be in (0, 1], got {t}"
                )));
            }
        }
        if self.recall_points == 0 {
            return Err(Error::InvalidConfig("recall_points must be >= 1".into()));
        }
        Ok(())
    }
}

/// Metric-specific similarity between a prediction and a ground truth.
pub fn pair_score(metric: Metric, pred: &Box7, gt: &Box7, cfg: &EvalConfig) -> Result<f64> {
    Ok(match metric {
        Metric::Bev => geometry::bev_iou(pred, gt),
        Metric::ThreeD => geometry::iou_3d(pred, gt),
        Metric::CsBev => geometry::cs_bev_score(pred, gt, cfg.alpha)?,
        Metric::CsAbs => {
            if cfg.cs_abs_matching == CsAbsMatching::BevGated
                && geometry::bev_iou(pred, gt) < cfg.thresholds.bev
            {
                0.0
            } else {
                geometry::cs_abs_score(pred, gt, cfg.alpha)?
            }
        }
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MatchStatus {
    TruePositive,
    FalsePositive,
    /// Matched a ground truth excluded by the difficulty filter.
    Ignored,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MatchRecord {
    /// Index into `frame.preds`.
    pub pred_index: usize,
    pub confidence: f64,
    /// Index into `frame.gts`.
    pub gt_index: Option<usize>,
    pub match_score: f64,
    pub status: MatchStatus,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct FrameMatches {
    pub frame_id: String,
    pub records: Vec<MatchRecord>,
    /// Valid (non-ignored) ground truths of the evaluated class.
    pub num_valid_gt: usize,
    /// Valid ground truths no prediction claimed.
    pub missed_gts: Vec<usize>,
}

/// Greedy matching of one frame under `metric`.
///
/// Predictions of the evaluated class are visited by descending confidence
/// (insertion index breaks ties). Each takes the unclaimed valid ground
/// truth with the highest score at or above the threshold. A prediction
/// with no such target that still clears the threshold against an ignored
/// ground truth is marked [`MatchStatus::Ignored`]; ignored ground truths
/// may absorb several predictions.
pub fn match_frame(frame: &Frame, metric: Metric, cfg: &EvalConfig) -> Result<FrameMatches> {
    cfg.validate()?;
    let threshold = cfg.thresholds.get(metric);

    let gts: Vec<(usize, &GtObject)> = frame
        .gts
        .iter()
        .enumerate()
        .filter(|(_, g)| g.cls == cfg.class_filter)
        .collect();
    let valid: Vec<bool> = gts
        .iter()
        .map(|(_, g)| cfg.difficulty_filter.admits(g.difficulty))
        .collect();

    let mut order: Vec<usize> = frame
        .preds
        .iter()
        .enumerate()
        .filter(|(_, p)| p.cls == cfg.class_filter)
        .map(|(i, _)| i)
        .collect();
    order.sort_by(|&a, &b| {
        frame.preds[b]
            .score
            .total_cmp(&frame.preds[a].score)
            .then(a.cmp(&b))
    });

    let mut claimed = vec![false; gts.len()];
    let mut records = Vec::with_capacity(order.len());
    for pi in order {
        let pred = &frame.preds[pi];
        let mut best_valid: Option<(usize, f64)> = None;
        let mut best_ignored: Option<(usize, f64)> = None;
        for (k, (_, gt)) in gts.iter().enumerate() {
            if valid[k] && claimed[k] {
                continue;
            }
            let s = pair_score(metric, &pred.bbox, &gt.bbox, cfg)?;
            if s < threshold {
                continue;
            }
            let slot = if valid[k] {
                &mut best_valid
            } else {
                &mut best_ignored
            };
            if slot.is_none_or(|(_, best)| s > best) {
                *slot = Some((k, s));
            }
        }
        let record = match (best_valid, best_ignored) {
            (Some((k, s)), _) => {
                claimed[k] = true;
                MatchRecord {
                    pred_index: pi,
                    confidence: pred.score,
                    gt_index: Some(gts[k].0),
                    match_score: s,
                    status: MatchStatus::TruePositive,
                }
            }
            (None, Some((k, s))) => MatchRecord {
                pred_index: pi,
                confidence: pred.score,
                gt_index: Some(gts[k].0),
                match_score: s,
                status: MatchStatus::Ignored,
            },
            (None, None) => MatchRecord {
                pred_index: pi,
                confidence: pred.score,
                gt_index: None,
                match_score: 0.0,
                status: MatchStatus::FalsePositive,
            },
        };
        records.push(record);
    }

    let missed_gts = gts
        .iter()
        .enumerate()
        .filter(|(k, _)| valid[*k] && !claimed[*k])
        .map(|(_, (i, _))| *i)
        .collect();
    Ok(FrameMatches {
        frame_id: frame.frame_id.clone(),
        records,
        num_valid_gt: valid.iter().filter(|v| **v).count(),
        missed_gts,
    })
}

/// A point of the precision/recall curve.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PrPoint {
    pub confidence: f64,
    pub recall: f64,
    pub precision: f64,
}

/// Precision/recall at every distinct confidence threshold, from the
/// highest confidence down. Equal confidences form one operating point, so
/// the curve does not depend on the order of tied detections.
pub fn pr_curve<'a>(
    records: impl IntoIterator<Item = &'a MatchRecord>,
    total_gt: usize,
) -> Vec<PrPoint> {
    let mut dets: Vec<(f64, bool)> = records
        .into_iter()
        .filter(|r| r.status != MatchStatus::Ignored)
        .map(|r| (r.confidence, r.status == MatchStatus::TruePositive))
        .collect();
    dets.sort_by(|a, b| b.0.total_cmp(&a.0));

    let mut curve = Vec::new();
    let (mut tp, mut fp) = (0usize, 0usize);
    let mut i = 0;
    while i < dets.len() {
        let conf = dets[i].0;
        while i < dets.len() && dets[i].0 == conf {
            if dets[i].1 {
                tp += 1;
            } else {
                fp += 1;
            }
            i += 1;
        }
        let recall = if total_gt == 0 {
            0.0
        } else {
            tp as f64 / total_gt as f64
        };
        curve.push(PrPoint {
            confidence: conf,
            recall,
            precision: tp as f64 / (tp + fp) as f64,
        });
    }
    curve
}

/// Interpolated AP in percent over `recall_points` equally spaced recall
/// levels `k / recall_points`, `k = 1..=recall_points`.
pub fn average_precision<'a>(
    records: impl IntoIterator<Item = &'a MatchRecord>,
    total_gt: usize,
    recall_points: usize,
) -> f64 {
    if total_gt == 0 || recall_points == 0 {
        return 0.0;
    }
    let curve = pr_curve(records, total_gt);
    // suffix maxima of precision: best precision at recall >= r
    let mut best_from = vec![0.0f64; curve.len() + 1];
    for i in (0..curve.len()).rev() {
        best_from[i] = best_from[i + 1].max(curve[i].precision);
    }
    let mut sum = 0.0;
    let mut j = 0;
    for k in 1..=recall_points {
        let level = k as f64 / recall_points as f64;
        // recall is non-decreasing along the curve
        while j < curve.len() && curve[j].recall < level - 1e-12 {
            j += 1;
        }
        sum += best_from[j];
    }
    100.0 * sum / recall_points as f64
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ApTable {
    pub bev: f64,
    pub iou_3d: f64,
    pub cs_bev: f64,
    pub cs_abs: f64,
}

impl ApTable {
    pub fn get(&self, metric: Metric) -> f64 {
        match metric {
            Metric::Bev => self.bev,
            Metric::ThreeD => self.iou_3d,
            Metric::CsBev => self.cs_bev,
            Metric::CsAbs => self.cs_abs,
        }
    }
}

/// Frames sorted by id; fails on duplicates.
pub fn canonical_order(dataset: &[Frame]) -> Result<Vec<&Frame>> {
    let mut seen = HashSet::with_capacity(dataset.len());
    for f in dataset {
        if !seen.insert(f.frame_id.as_str()) {
            return Err(Error::DuplicateFrame(f.frame_id.clone()));
        }
    }
    let mut frames: Vec<&Frame> = dataset.iter().collect();
    frames.sort_by(|a, b| a.frame_id.cmp(&b.frame_id));
    Ok(frames)
}

/// Matches every frame in parallel and returns the per-frame results in
/// frame-id order.
pub fn match_dataset(
    dataset: &[Frame],
    metric: Metric,
    cfg: &EvalConfig,
) -> Result<Vec<FrameMatches>> {
    let frames = canonical_order(dataset)?;
    frames
        .par_iter()
        .map(|f| match_frame(f, metric, cfg))
        .collect()
}

pub fn ap_for_metric(dataset: &[Frame], metric: Metric, cfg: &EvalConfig) -> Result<f64> {
    let matches = match_dataset(dataset, metric, cfg)?;
    let total_gt = matches.iter().map(|m| m.num_valid_gt).sum();
    Ok(average_precision(
        matches.iter().flat_map(|m| m.records.iter()),
        total_gt,
        cfg.recall_points,
    ))
}

/// AP for all four metrics, each with its own matching pass.
pub fn evaluate(dataset: &[Frame], cfg: &EvalConfig) -> Result<ApTable> {
    cfg.validate()?;
    canonical_order(dataset)?;
    Ok(ApTable {
        bev: ap_for_metric(dataset, Metric::Bev, cfg)?,
        iou_3d: ap_for_metric(dataset, Metric::ThreeD, cfg)?,
        cs_bev: ap_for_metric(dataset, Metric::CsBev, cfg)?,
        cs_abs: ap_for_metric(dataset, Metric::CsAbs, cfg)?,
    })
}

/// Closer-surfaces gaps of all BEV true positives, in canonical order.
pub fn matched_gaps(dataset: &[Frame], cfg: &EvalConfig) -> Result<Vec<f64>> {
    let frames = canonical_order(dataset)?;
    let matches = match_dataset(dataset, Metric::Bev, cfg)?;
    let mut gaps = Vec::new();
    for (frame, m) in frames.iter().zip(&matches) {
        for r in &m.records {
            if r.status != MatchStatus::TruePositive {
                continue;
            }
            let gt = r.gt_index.expect("true positives carry a gt");
            gaps.push(geometry::closer_surfaces_gap(
                &frame.preds[r.pred_index].bbox,
                &frame.gts[gt].bbox,
            ));
        }
    }
    Ok(gaps)
}

#[derive(Debug, Clone, PartialEq)]
pub struct Histogram {
    pub lo: f64,
    pub hi: f64,
    pub proportions: Vec<f64>,
    /// Values that fell inside `[lo, hi]`.
    pub in_range: usize,
    /// Set when no value fell inside the interval; proportions are all zero.
    pub empty: bool,
}

impl Histogram {
    pub fn bins(&self) -> usize {
        self.proportions.len()
    }

    pub fn bin_edges(&self, i: usize) -> (f64, f64) {
        let width = (self.hi - self.lo) / self.bins() as f64;
        (self.lo + width * i as f64, self.lo + width * (i + 1) as f64)
    }
}

/// Proportion of `values` in each of `bins` equal sub-intervals of
/// `[lo, hi]`. Values outside the interval are dropped; `hi` itself falls in
/// the last bin.
pub fn histogram(values: &[f64], lo: f64, hi: f64, bins: usize) -> Result<Histogram> {
    if bins == 0 {
        return Err(Error::InvalidConfig("bins must be >= 1".into()));
    }
    if !(lo.is_finite() && hi.is_finite() && lo < hi) {
        return Err(Error::InvalidConfig(format!(
            "histogram interval must satisfy lo < hi, got [{lo}, {hi}]"
        )));
    }
    let mut counts = vec![0usize; bins];
    let width = hi - lo;
    for &v in values {
        if !(lo..=hi).contains(&v) {
            continue;
        }
        let idx = (((v - lo) / width) * bins as f64).floor() as usize;
        counts[idx.min(bins - 1)] += 1;
    }
    let in_range: usize = counts.iter().sum();
    let proportions = if in_range == 0 {
        vec![0.0; bins]
    } else {
        counts
            .iter()
            .map(|&c| c as f64 / in_range as f64)
            .collect()
    };
    Ok(Histogram {
        lo,
        hi,
        proportions,
        in_range,
        empty: in_range == 0,
    })
}

/// Histogram of the gaps of BEV-matched true positives.
pub fn gcs_histogram(
    dataset: &[Frame],
    cfg: &EvalConfig,
    lo: f64,
    hi: f64,
    bins: usize,
) -> Result<Histogram> {
    histogram(&matched_gaps(dataset, cfg)?, lo, hi, bins)
}

/// `Diff_AB(i) = P_B(i) - P_A(i)`.
pub fn proportion_difference(model_a: &[f64], model_b: &[f64]) -> Result<Vec<f64>> {
    if model_a.len() != model_b.len() {
        return Err(Error::BinCountMismatch {
            left: model_a.len(),
            right: model_b.len(),
        });
    }
    Ok(model_a.iter().zip(model_b).map(|(a, b)| b - a).collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn car(x: f64, y: f64) -> Box7 {
        Box7::new(x, y, 0.0, 4.0, 2.0, 1.5, 0.0).unwrap()
    }

    fn gt(b: Box7, d: Difficulty) -> GtObject {
        GtObject {
            bbox: b,
            cls: "Car".into(),
            difficulty: d,
        }
    }

    fn pred(b: Box7, s: f64) -> PredObject {
        PredObject {
            bbox: b,
            cls: "Car".into(),
            score: s,
        }
    }

    fn frame(id: &str, gts: Vec<GtObject>, preds: Vec<PredObject>) -> Frame {
        Frame {
            frame_id: id.into(),
            gts,
            preds,
        }
    }

    #[test]
    fn parse_names() {
        assert_eq!("cs-bev".parse::<Metric>().unwrap(), Metric::CsBev);
        assert_eq!("3D".parse::<Metric>().unwrap(), Metric::ThreeD);
        assert!(matches!(
            "AOS".parse::<Metric>(),
            Err(Error::UnknownMetric(_))
        ));
        assert!("extreme".parse::<Difficulty>().is_err());
    }

    #[test]
    fn single_tp() {
        let f = frame(
            "a",
            vec![gt(car(10.0, 2.0), Difficulty::Easy)],
            vec![pred(car(10.0, 2.0), 0.9)],
        );
        let m = match_frame(&f, Metric::Bev, &EvalConfig::default()).unwrap();
        assert_eq!(m.records.len(), 1);
        assert_eq!(m.records[0].status, MatchStatus::TruePositive);
        assert_eq!(m.records[0].match_score, 1.0);
        assert!(m.missed_gts.is_empty());
    }

    #[test]
    fn single_fn() {
        let f = frame("a", vec![gt(car(10.0, 2.0), Difficulty::Easy)], vec![]);
        let m = match_frame(&f, Metric::CsAbs, &EvalConfig::default()).unwrap();
        assert!(m.records.is_empty());
        assert_eq!(m.missed_gts, vec![0]);
        assert_eq!(m.num_valid_gt, 1);
    }

    #[test]
    fn ignored_gt_absorbs_prediction() {
        let f = frame(
            "a",
            vec![gt(car(10.0, 2.0), Difficulty::Hard)],
            vec![pred(car(10.0, 2.0), 0.9), pred(car(30.0, 2.0), 0.8)],
        );
        let m = match_frame(&f, Metric::Bev, &EvalConfig::default()).unwrap();
        assert_eq!(m.num_valid_gt, 0);
        assert_eq!(m.records[0].status, MatchStatus::Ignored);
        assert_eq!(m.records[1].status, MatchStatus::FalsePositive);
    }

    #[test]
    fn other_classes_are_skipped() {
        let mut p = pred(car(10.0, 2.0), 0.9);
        p.cls = "Pedestrian".into();
        let f = frame("a", vec![gt(car(10.0, 2.0), Difficulty::Easy)], vec![p]);
        let m = match_frame(&f, Metric::Bev, &EvalConfig::default()).unwrap();
        assert!(m.records.is_empty());
        assert_eq!(m.num_valid_gt, 1);
    }

    #[test]
    fn ap_edge_cases() {
        assert_eq!(average_precision(std::iter::empty(), 0, 40), 0.0);
        assert_eq!(average_precision(std::iter::empty(), 3, 40), 0.0);
        let rec = |c: f64, tp: bool| MatchRecord {
            pred_index: 0,
            confidence: c,
            gt_index: None,
            match_score: 0.0,
            status: if tp {
                MatchStatus::TruePositive
            } else {
                MatchStatus::FalsePositive
            },
        };
        let fp_only = [rec(0.9, false)];
        assert_eq!(average_precision(&fp_only, 0, 40), 0.0);
        let perfect = [rec(0.9, true), rec(0.8, true), rec(0.1, false)];
        assert_eq!(average_precision(&perfect, 2, 40), 100.0);
        // one TP out of two gts: first 20 recall levels at precision 1
        assert_eq!(average_precision(&[rec(0.9, true)], 2, 40), 50.0);
    }

    #[test]
    fn tied_confidences_are_one_operating_point() {
        let rec = |tp: bool| MatchRecord {
            pred_index: 0,
            confidence: 0.5,
            gt_index: None,
            match_score: 0.0,
            status: if tp {
                MatchStatus::TruePositive
            } else {
                MatchStatus::FalsePositive
            },
        };
        let a = [rec(true), rec(false)];
        let b = [rec(false), rec(true)];
        assert_eq!(
            average_precision(&a, 1, 40),
            average_precision(&b, 1, 40)
        );
        assert_eq!(average_precision(&a, 1, 40), 50.0);
    }

    #[test]
    fn duplicate_frames_rejected() {
        let ds = vec![frame("x", vec![], vec![]), frame("x", vec![], vec![])];
        assert!(matches!(
            evaluate(&ds, &EvalConfig::default()),
            Err(Error::DuplicateFrame(_))
        ));
    }

    #[test]
    fn config_validation() {
        let cfg = EvalConfig {
            recall_points: 0,
            ..EvalConfig::default()
        };
        assert!(cfg.validate().is_err());
        let mut cfg = EvalConfig::default();
        cfg.thresholds.cs_bev = 0.0;
        assert!(cfg.validate().is_err());
        let cfg = EvalConfig {
            alpha: -1.0,
            ..EvalConfig::default()
        };
        assert!(cfg.validate().is_err());
    }

    #[test]
    fn config_json_defaults() {
        let cfg: EvalConfig = serde_json::from_str(r#"{"alpha": 0.5}"#).unwrap();
        assert_eq!(cfg.alpha, 0.5);
        assert_eq!(cfg.thresholds, Thresholds::default());
        let cfg: EvalConfig =
            serde_json::from_str(r#"{"thresholds": {"3d": 0.5}, "difficulty_filter": "hard"}"#)
                .unwrap();
        assert_eq!(cfg.thresholds.iou_3d, 0.5);
        assert_eq!(cfg.thresholds.bev, 0.7);
        assert_eq!(cfg.difficulty_filter, DifficultyFilter::Hard);
    }

    #[test]
    fn histogram_basics() {
        let h = histogram(&[0.0; 5], 0.0, 2.0, 20).unwrap();
        assert_eq!(h.proportions[0], 1.0);
        assert!(h.proportions[1..].iter().all(|p| *p == 0.0));

        let h = histogram(&[0.5, 1.5, 2.0, 3.0, -1.0], 0.0, 2.0, 2).unwrap();
        assert_eq!(h.in_range, 3);
        assert_eq!(h.proportions, vec![1.0 / 3.0, 2.0 / 3.0]);

        let h = histogram(&[5.0], 0.0, 2.0, 4).unwrap();
        assert!(h.empty);
        assert!(h.proportions.iter().all(|p| *p == 0.0));

        assert!(histogram(&[], 0.0, 2.0, 0).is_err());
        assert!(histogram(&[], 2.0, 2.0, 3).is_err());
    }

    #[test]
    fn difference_cases() {
        let a = [0.25, 0.25, 0.5];
        assert_eq!(proportion_difference(&a, &a).unwrap(), vec![0.0; 3]);
        let b = [0.5, 0.25, 0.25];
        let d = proportion_difference(&a, &b).unwrap();
        assert!(d[0] > 0.0 && d[2] < 0.0);
        assert_eq!(d.iter().sum::<f64>(), 0.0);
        assert!(matches!(
            proportion_difference(&a, &b[..2]),
            Err(Error::BinCountMismatch { .. })
        ));
    }
}
