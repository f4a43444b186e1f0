//! Evaluation: rank-1 re-identification accuracy, IDF1 and identity switches.

use std::collections::{BTreeMap, HashMap};

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::assignment::max_weight_assignment;
use crate::formats::DetectionRecord;
use crate::gallery::{FeatureVector, Gallery, GalleryError, PersonId, Strategy};
use crate::pose::Orientation;

pub const DEFAULT_IOU_THRESHOLD: f64 = 0.5;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum MetricsError {
    #[error("gallery fraction {0} must lie strictly between 0 and 1")]
    InvalidFraction(f64),
    #[error("no queries to evaluate")]
    NoQueries,
    #[error("no gallery items")]
    EmptyGallery,
    #[error(transparent)]
    Gallery(#[from] GalleryError),
}

#[derive(Debug, Clone, PartialEq)]
pub struct LabeledFeature {
    pub person: PersonId,
    pub feature: FeatureVector,
    /// Orientation ratio of the sample, when keypoints were available.
    pub s2t: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct LabeledFeatureSet {
    pub items: Vec<LabeledFeature>,
}

impl LabeledFeatureSet {
    pub fn new(items: Vec<LabeledFeature>) -> Self {
        Self { items }
    }

    pub fn len(&self) -> usize {
        self.items.len()
    }

    pub fn is_empty(&self) -> bool {
        self.items.is_empty()
    }
}

/// Stratified per-person split. Persons with a single item go to the gallery
/// only; everyone else keeps at least one item on each side.
pub fn split_gallery_query(
    set: &LabeledFeatureSet,
    gallery_fraction: f64,
    seed: u64,
) -> Result<(LabeledFeatureSet, LabeledFeatureSet), MetricsError> {
    if !(gallery_fraction > 0.0 && gallery_fraction < 1.0) {
        return Err(MetricsError::InvalidFraction(gallery_fraction));
    }
    let mut by_person: BTreeMap<PersonId, Vec<usize>> = BTreeMap::new();
    for (idx, item) in set.items.iter().enumerate() {
        by_person.entry(item.person).or_default().push(idx);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut gallery_idx = Vec::new();
    let mut query_idx = Vec::new();
    for indices in by_person.values_mut() {
        let n = indices.len();
        if n == 1 {
            gallery_idx.push(indices[0]);
            continue;
        }
        indices.shuffle(&mut rng);
        let keep = ((gallery_fraction * n as f64).round() as usize).clamp(1, n - 1);
        gallery_idx.extend_from_slice(&indices[..keep]);
        query_idx.extend_from_slice(&indices[keep..]);
    }
    gallery_idx.sort_unstable();
    query_idx.sort_unstable();
    let pick = |idx: &[usize]| LabeledFeatureSet::new(idx.iter().map(|&i| set.items[i].clone()).collect());
    Ok((pick(&gallery_idx), pick(&query_idx)))
}

/// Builds a gallery from labelled items in order. Orientation bins use each
/// item's ratio, or the middle bin when it has none.
pub fn build_gallery(strategy: Strategy, items: &LabeledFeatureSet, smax: f64) -> Result<Gallery, MetricsError> {
    let dim = items.items.first().ok_or(MetricsError::EmptyGallery)?.feature.dim();
    let mut gallery = Gallery::new(strategy, dim);
    let bins = strategy.bins().unwrap_or(1);
    for item in &items.items {
        let bin = Orientation::from_ratio(item.s2t, bins, smax).bin;
        gallery.insert(item.person, &item.feature, bin)?;
    }
    Ok(gallery)
}

/// Fraction of queries whose nearest gallery person carries the query's id.
pub fn rank1(gallery: &Gallery, queries: &LabeledFeatureSet) -> Result<f64, MetricsError> {
    if queries.is_empty() {
        return Err(MetricsError::NoQueries);
    }
    if gallery.is_empty() {
        return Err(MetricsError::EmptyGallery);
    }
    let mut hits = 0usize;
    for q in &queries.items {
        let (person, _) = gallery.nearest_person(&q.feature)?;
        if person == q.person {
            hits += 1;
        }
    }
    Ok(hits as f64 / queries.len() as f64)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MotScores {
    pub idf1: f64,
    pub idtp: u64,
    pub idfp: u64,
    pub idfn: u64,
    pub id_switches: u64,
}

impl MotScores {
    pub fn rows(&self) -> Vec<(&'static str, String)> {
        vec![
            ("idf1", format!("{:.6}", self.idf1)),
            ("idtp", self.idtp.to_string()),
            ("idfp", self.idfp.to_string()),
            ("idfn", self.idfn.to_string()),
            ("id_switches", self.id_switches.to_string()),
        ]
    }
}

fn by_frame(records: &[DetectionRecord]) -> BTreeMap<u32, Vec<&DetectionRecord>> {
    let mut frames: BTreeMap<u32, Vec<&DetectionRecord>> = BTreeMap::new();
    for r in records {
        frames.entry(r.frame).or_default().push(r);
    }
    frames
}

/// Matched-frame counts between every ground-truth and predicted trajectory,
/// as `(gt ids, pred ids, counts[gt][pred])`.
pub fn trajectory_overlaps(
    gt: &[DetectionRecord],
    pred: &[DetectionRecord],
    iou_threshold: f64,
) -> (Vec<i64>, Vec<i64>, Vec<Vec<u64>>) {
    let mut gt_ids: Vec<i64> = gt.iter().map(|r| r.id).collect();
    gt_ids.sort_unstable();
    gt_ids.dedup();
    let mut pred_ids: Vec<i64> = pred.iter().map(|r| r.id).collect();
    pred_ids.sort_unstable();
    pred_ids.dedup();
    let gt_col: HashMap<i64, usize> = gt_ids.iter().enumerate().map(|(i, &id)| (id, i)).collect();
    let pred_col: HashMap<i64, usize> = pred_ids.iter().enumerate().map(|(i, &id)| (id, i)).collect();

    let mut counts = vec![vec![0u64; pred_ids.len()]; gt_ids.len()];
    let pred_frames = by_frame(pred);
    for (frame, gts) in by_frame(gt) {
        let Some(preds) = pred_frames.get(&frame) else { continue };
        for g in &gts {
            for p in preds {
                if g.bbox.iou(&p.bbox) >= iou_threshold {
                    counts[gt_col[&g.id]][pred_col[&p.id]] += 1;
                }
            }
        }
    }
    (gt_ids, pred_ids, counts)
}

/// Identity scores from a global one-to-one trajectory matching that
/// maximises the number of matched detections.
pub fn idf1(gt: &[DetectionRecord], pred: &[DetectionRecord], iou_threshold: f64) -> MotScores {
    let (_, _, counts) = trajectory_overlaps(gt, pred, iou_threshold);
    let weights: Vec<Vec<f64>> = counts.iter().map(|r| r.iter().map(|&c| c as f64).collect()).collect();
    let idtp: u64 = max_weight_assignment(&weights)
        .iter()
        .enumerate()
        .filter_map(|(i, c)| c.map(|j| counts[i][j]))
        .sum();
    let idfn = gt.len() as u64 - idtp;
    let idfp = pred.len() as u64 - idtp;
    let denom = 2 * idtp + idfp + idfn;
    let idf1 = if denom == 0 { 1.0 } else { 2.0 * idtp as f64 / denom as f64 };
    MotScores { idf1, idtp, idfp, idfn, id_switches: id_switches(gt, pred, iou_threshold) }
}

/// Counts identity switches with per-frame IoU matching. A ground-truth object
/// keeps its last matched track while that pairing still clears the threshold;
/// the rest are matched by maximum total IoU.
pub fn id_switches(gt: &[DetectionRecord], pred: &[DetectionRecord], iou_threshold: f64) -> u64 {
    let pred_frames = by_frame(pred);
    let mut last: HashMap<i64, i64> = HashMap::new();
    let mut switches = 0u64;
    for (frame, gts) in by_frame(gt) {
        let empty = Vec::new();
        let preds = pred_frames.get(&frame).unwrap_or(&empty);
        let mut gt_match: Vec<Option<usize>> = vec![None; gts.len()];
        let mut pred_used = vec![false; preds.len()];

        for (gi, g) in gts.iter().enumerate() {
            let Some(&prev) = last.get(&g.id) else { continue };
            if let Some(pi) = preds
                .iter()
                .enumerate()
                .position(|(pi, p)| !pred_used[pi] && p.id == prev && g.bbox.iou(&p.bbox) >= iou_threshold)
            {
                gt_match[gi] = Some(pi);
                pred_used[pi] = true;
            }
        }

        let free_gt: Vec<usize> = (0..gts.len()).filter(|&i| gt_match[i].is_none()).collect();
        let free_pred: Vec<usize> = (0..preds.len()).filter(|&j| !pred_used[j]).collect();
        if !free_gt.is_empty() && !free_pred.is_empty() {
            let weights: Vec<Vec<f64>> = free_gt
                .iter()
                .map(|&gi| {
                    free_pred
                        .iter()
                        .map(|&pj| {
                            let iou = gts[gi].bbox.iou(&preds[pj].bbox);
                            if iou >= iou_threshold { iou } else { 0.0 }
                        })
                        .collect()
                })
                .collect();
            for (row, col) in max_weight_assignment(&weights).into_iter().enumerate() {
                if let Some(c) = col {
                    gt_match[free_gt[row]] = Some(free_pred[c]);
                }
            }
        }

        for (gi, m) in gt_match.iter().enumerate() {
            let Some(pi) = *m else { continue };
            let track = preds[pi].id;
            if let Some(prev) = last.insert(gts[gi].id, track) {
                if prev != track {
                    switches += 1;
                }
            }
        }
    }
    switches
}
