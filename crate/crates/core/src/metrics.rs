//! Detection-level precision, recall and F-measure.

use log::warn;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{Point, Polygon};
use crate::labelgen::Annotation;
use crate::pse::Detection;

/// Default IoU needed for a detection to match a ground truth.
pub const DEFAULT_IOU_THRESHOLD: f64 = 0.5;

/// Intersection over union of two polygons, computed exactly.
///
/// The plane is cut into horizontal slabs at every vertex and every edge
/// crossing. Inside a slab no edge ends or changes order, so each span
/// length is linear in y and the midpoint rule integrates it exactly.
pub fn polygon_iou(a: &Polygon, b: &Polygon) -> f64 {
    let (ax0, ay0, ax1, ay1) = a.bounds();
    let (bx0, by0, bx1, by1) = b.bounds();
    if ax1 <= bx0 || bx1 <= ax0 || ay1 <= by0 || by1 <= ay0 {
        return 0.0;
    }
    let mut cuts: Vec<f64> = a.vertices().iter().chain(b.vertices()).map(|p| p.y).collect();
    let edges: Vec<_> = a.edges().chain(b.edges()).collect();
    for (i, &(p, q)) in edges.iter().enumerate() {
        for &(r, s) in &edges[i + 1..] {
            if let Some(y) = crossing_y(p, q, r, s) {
                cuts.push(y);
            }
        }
    }
    cuts.sort_by(f64::total_cmp);
    cuts.dedup();

    let (mut area_a, mut area_b, mut inter) = (0.0, 0.0, 0.0);
    let (mut spans_a, mut spans_b) = (Vec::new(), Vec::new());
    for w in cuts.windows(2) {
        let h = w[1] - w[0];
        if h <= 0.0 {
            continue;
        }
        let y = 0.5 * (w[0] + w[1]);
        row_spans(a, y, &mut spans_a);
        row_spans(b, y, &mut spans_b);
        area_a += h * spans_a.iter().map(|(lo, hi)| hi - lo).sum::<f64>();
        area_b += h * spans_b.iter().map(|(lo, hi)| hi - lo).sum::<f64>();
        for &(alo, ahi) in &spans_a {
            for &(blo, bhi) in &spans_b {
                inter += h * (ahi.min(bhi) - alo.max(blo)).max(0.0);
            }
        }
    }
    let union = area_a + area_b - inter;
    if union <= 0.0 {
        0.0
    } else {
        (inter / union).clamp(0.0, 1.0)
    }
}

/// y of the proper crossing of segments pq and rs, if any.
fn crossing_y(p: Point, q: Point, r: Point, s: Point) -> Option<f64> {
    let (dx, dy) = (q.x - p.x, q.y - p.y);
    let (ex, ey) = (s.x - r.x, s.y - r.y);
    let denom = dx * ey - dy * ex;
    if denom == 0.0 {
        return None;
    }
    let t = ((r.x - p.x) * ey - (r.y - p.y) * ex) / denom;
    let u = ((r.x - p.x) * dy - (r.y - p.y) * dx) / denom;
    ((0.0..=1.0).contains(&t) && (0.0..=1.0).contains(&u)).then_some(p.y + t * dy)
}

/// Even-odd inside intervals of `poly` along the horizontal line `y`.
fn row_spans(poly: &Polygon, y: f64, spans: &mut Vec<(f64, f64)>) {
    let mut xs: Vec<f64> = poly
        .edges()
        .filter(|(a, b)| (a.y > y) != (b.y > y))
        .map(|(a, b)| a.x + (y - a.y) * (b.x - a.x) / (b.y - a.y))
        .collect();
    xs.sort_by(f64::total_cmp);
    spans.clear();
    spans.extend(xs.chunks_exact(2).map(|p| (p[0], p[1])));
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Match {
    pub det_index: usize,
    pub gt_index: usize,
    pub iou: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub precision: f64,
    pub recall: f64,
    pub f_measure: f64,
    pub matches: Vec<Match>,
    /// Detections scored (after dropping those on ignore regions).
    pub detections: usize,
    /// Ground truths that must be found (ignore regions excluded).
    pub ground_truths: usize,
    /// Detections dropped for matching an ignore region.
    pub discarded: usize,
}

impl EvalReport {
    fn from_counts(matched: usize, detections: usize, ground_truths: usize) -> (f64, f64, f64) {
        let precision = match (detections, ground_truths) {
            (0, 0) => 1.0,
            (0, _) => 0.0,
            (d, _) => matched as f64 / d as f64,
        };
        let recall = if ground_truths == 0 { 1.0 } else { matched as f64 / ground_truths as f64 };
        (precision, recall, f_measure(precision, recall))
    }
}

/// Harmonic mean of precision and recall; 0 when both are 0.
pub fn f_measure(precision: f64, recall: f64) -> f64 {
    if precision + recall > 0.0 {
        2.0 * precision * recall / (precision + recall)
    } else {
        0.0
    }
}

/// Scores detections against one image's annotation.
///
/// Detections overlapping an ignore region at `iou_threshold` or more are
/// dropped first. The rest are matched one-to-one to the remaining ground
/// truths greedily by descending IoU (ties by detection index, then ground
/// truth index), counting pairs with IoU at or above the threshold.
pub fn evaluate(dets: &[Detection], gts: &Annotation, iou_threshold: f64) -> Result<EvalReport> {
    if !(iou_threshold > 0.0 && iou_threshold < 1.0) {
        return Err(Error::InvalidArgument(format!("IoU threshold {iou_threshold} outside (0, 1)")));
    }
    gts.validate()?;

    let mut care: Vec<(usize, Polygon)> = Vec::new();
    let mut ignore: Vec<Polygon> = Vec::new();
    for (i, region) in gts.regions.iter().enumerate() {
        match gts.region_polygon(i) {
            Ok(p) if region.ignore => ignore.push(p),
            Ok(p) => care.push((i, p)),
            Err(e) => warn!("ground truth {i} skipped: {e}"),
        }
    }

    let mut kept: Vec<(usize, Option<Polygon>)> = Vec::new();
    let mut discarded = 0;
    for (i, det) in dets.iter().enumerate() {
        let poly = det.shape.to_polygon().ok();
        let on_ignore = poly
            .as_ref()
            .is_some_and(|p| ignore.iter().any(|ig| polygon_iou(p, ig) >= iou_threshold));
        if on_ignore {
            discarded += 1;
        } else {
            kept.push((i, poly));
        }
    }

    let mut pairs: Vec<Match> = Vec::new();
    for (det_index, poly) in &kept {
        let Some(poly) = poly else { continue };
        for (gt_index, gt) in &care {
            let iou = polygon_iou(poly, gt);
            if iou >= iou_threshold {
                pairs.push(Match { det_index: *det_index, gt_index: *gt_index, iou });
            }
        }
    }
    pairs.sort_by(|a, b| {
        b.iou.total_cmp(&a.iou).then(a.det_index.cmp(&b.det_index)).then(a.gt_index.cmp(&b.gt_index))
    });
    let mut det_used = vec![false; dets.len()];
    let mut gt_used = vec![false; gts.regions.len()];
    let mut matches = Vec::new();
    for m in pairs {
        if !det_used[m.det_index] && !gt_used[m.gt_index] {
            det_used[m.det_index] = true;
            gt_used[m.gt_index] = true;
            matches.push(m);
        }
    }

    let (precision, recall, f_measure) = EvalReport::from_counts(matches.len(), kept.len(), care.len());
    Ok(EvalReport { precision, recall, f_measure, matches, detections: kept.len(), ground_truths: care.len(), discarded })
}

/// Dataset-level scores from per-image reports (counts are pooled, not averaged).
pub fn aggregate(reports: &[EvalReport]) -> (f64, f64, f64) {
    let matched = reports.iter().map(|r| r.matches.len()).sum();
    let dets = reports.iter().map(|r| r.detections).sum();
    let gts = reports.iter().map(|r| r.ground_truths).sum();
    EvalReport::from_counts(matched, dets, gts)
}
