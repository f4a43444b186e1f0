//! On-disk formats: MOT-style CSV for detections, ground truth and tracks,
//! feature tables, and JSON-lines keypoint streams.
//!
//! The `det_index` of a detection is its 0-based position among the rows of
//! its frame, in file order. Features and keypoints are joined to detections
//! on `(frame, det_index)`.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::gallery::FeatureVector;

/// Number of keypoints in the COCO-18 body layout.
pub const COCO18_LEN: usize = 18;
pub const RIGHT_SHOULDER: usize = 2;
pub const LEFT_SHOULDER: usize = 5;
pub const RIGHT_HIP: usize = 8;
pub const LEFT_HIP: usize = 11;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum FormatError {
    #[error("line {line}: {msg}")]
    Parse { line: usize, msg: String },
    #[error("line {line}: {msg}")]
    Validation { line: usize, msg: String },
    #[error("record {index}: track id {id} must be >= 1")]
    InvalidTrackId { index: usize, id: i64 },
}

impl FormatError {
    fn parse(line: usize, msg: impl Into<String>) -> Self {
        FormatError::Parse { line, msg: msg.into() }
    }

    fn validation(line: usize, msg: impl Into<String>) -> Self {
        FormatError::Validation { line, msg: msg.into() }
    }
}

/// Axis-aligned box in image pixels, top-left anchored.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoundingBox {
    pub left: f64,
    pub top: f64,
    pub width: f64,
    pub height: f64,
}

impl BoundingBox {
    pub fn new(left: f64, top: f64, width: f64, height: f64) -> Self {
        Self { left, top, width, height }
    }

    pub fn from_center(cx: f64, cy: f64, width: f64, height: f64) -> Self {
        Self::new(cx - width / 2.0, cy - height / 2.0, width, height)
    }

    pub fn center(&self) -> (f64, f64) {
        (self.left + self.width / 2.0, self.top + self.height / 2.0)
    }

    pub fn area(&self) -> f64 {
        self.width * self.height
    }

    pub fn iou(&self, other: &BoundingBox) -> f64 {
        let x1 = self.left.max(other.left);
        let y1 = self.top.max(other.top);
        let x2 = (self.left + self.width).min(other.left + other.width);
        let y2 = (self.top + self.height).min(other.top + other.height);
        let inter = (x2 - x1).max(0.0) * (y2 - y1).max(0.0);
        let union = self.area() + other.area() - inter;
        if union <= 0.0 {
            0.0
        } else {
            inter / union
        }
    }
}

/// One row of a MOT-style file.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DetectionRecord {
    pub frame: u32,
    /// -1 when the identity is unknown (raw detections).
    pub id: i64,
    pub bbox: BoundingBox,
    pub conf: f64,
}

impl DetectionRecord {
    pub fn new(frame: u32, id: i64, bbox: BoundingBox, conf: f64) -> Self {
        Self { frame, id, bbox, conf }
    }
}

fn parse_field<T: std::str::FromStr>(raw: &str, name: &str, line: usize) -> Result<T, FormatError> {
    raw.trim()
        .parse()
        .map_err(|_| FormatError::parse(line, format!("invalid {name} {:?}", raw.trim())))
}

pub fn parse_mot(text: &str) -> Result<Vec<DetectionRecord>, FormatError> {
    let mut records = Vec::new();
    for (idx, raw) in text.lines().enumerate() {
        let line = idx + 1;
        if raw.trim().is_empty() {
            continue;
        }
        let fields: Vec<&str> = raw.split(',').collect();
        if fields.len() < 7 {
            return Err(FormatError::parse(
                line,
                format!("too few fields: expected at least 7, found {}", fields.len()),
            ));
        }
        let frame: i64 = parse_field(fields[0], "frame", line)?;
        let id: i64 = parse_field(fields[1], "id", line)?;
        let left: f64 = parse_field(fields[2], "bb_left", line)?;
        let top: f64 = parse_field(fields[3], "bb_top", line)?;
        let width: f64 = parse_field(fields[4], "bb_width", line)?;
        let height: f64 = parse_field(fields[5], "bb_height", line)?;
        let conf: f64 = parse_field(fields[6], "conf", line)?;

        if frame < 1 || frame > u32::MAX as i64 {
            return Err(FormatError::validation(line, format!("frame {frame} out of range")));
        }
        if !(width > 0.0) || !(height > 0.0) {
            return Err(FormatError::validation(
                line,
                format!("box dimensions must be positive, got {width}x{height}"),
            ));
        }
        if !left.is_finite() || !top.is_finite() || !width.is_finite() || !height.is_finite() {
            return Err(FormatError::validation(line, "non-finite box coordinate"));
        }
        if !(conf >= 0.0) {
            return Err(FormatError::validation(line, format!("confidence {conf} is negative")));
        }
        records.push(DetectionRecord {
            frame: frame as u32,
            id,
            bbox: BoundingBox::new(left, top, width, height),
            conf,
        });
    }
    Ok(records)
}

fn push_mot_line(out: &mut String, r: &DetectionRecord) {
    let b = &r.bbox;
    let _ = writeln!(
        out,
        "{},{},{:.2},{:.2},{:.2},{:.2},{:.2},-1,-1,-1",
        r.frame, r.id, b.left, b.top, b.width, b.height, r.conf
    );
}

/// Formats raw detections or ground truth; ids are written as given.
pub fn write_detections(records: &[DetectionRecord]) -> String {
    let mut out = String::new();
    for r in records {
        push_mot_line(&mut out, r);
    }
    out
}

/// Formats tracker output. Every record must carry a track id >= 1.
pub fn write_tracks(records: &[DetectionRecord]) -> Result<String, FormatError> {
    if let Some((index, r)) = records.iter().enumerate().find(|(_, r)| r.id < 1) {
        return Err(FormatError::InvalidTrackId { index, id: r.id });
    }
    Ok(write_detections(records))
}

/// Groups records by frame, keeping file order within each frame so that the
/// position inside a group is the record's `det_index`.
pub fn group_by_frame(records: &[DetectionRecord]) -> BTreeMap<u32, Vec<DetectionRecord>> {
    let mut frames: BTreeMap<u32, Vec<DetectionRecord>> = BTreeMap::new();
    for r in records {
        frames.entry(r.frame).or_default().push(*r);
    }
    frames
}

/// Appearance features keyed by `(frame, det_index)`.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureTable {
    dim: usize,
    entries: BTreeMap<(u32, usize), FeatureVector>,
}

impl FeatureTable {
    pub fn new(dim: usize) -> Self {
        Self { dim, entries: BTreeMap::new() }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Returns the displaced vector if the key was already present.
    pub fn insert(&mut self, frame: u32, det_index: usize, feature: FeatureVector) -> Option<FeatureVector> {
        assert_eq!(feature.dim(), self.dim, "feature dimension must match table");
        self.entries.insert((frame, det_index), feature)
    }

    pub fn get(&self, frame: u32, det_index: usize) -> Option<&FeatureVector> {
        self.entries.get(&(frame, det_index))
    }

    pub fn iter(&self) -> impl Iterator<Item = (&(u32, usize), &FeatureVector)> {
        self.entries.iter()
    }
}

pub fn parse_features(text: &str) -> Result<FeatureTable, FormatError> {
    let mut lines = text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty());
    let (hidx, header) = lines
        .next()
        .ok_or_else(|| FormatError::parse(1, "missing '# dim=<d>' header"))?;
    let dim: usize = header
        .trim()
        .strip_prefix('#')
        .map(str::trim)
        .and_then(|h| h.strip_prefix("dim="))
        .and_then(|d| d.trim().parse().ok())
        .filter(|&d| d > 0)
        .ok_or_else(|| FormatError::parse(hidx + 1, "missing '# dim=<d>' header"))?;

    let mut table = FeatureTable::new(dim);
    for (idx, raw) in lines {
        let line = idx + 1;
        let fields: Vec<&str> = raw.split(',').collect();
        if fields.len() < 2 {
            return Err(FormatError::parse(line, "expected frame,det_index,values..."));
        }
        let frame: u32 = parse_field(fields[0], "frame", line)?;
        if frame < 1 {
            return Err(FormatError::validation(line, "frame must be >= 1"));
        }
        let det_index: usize = parse_field(fields[1], "det_index", line)?;
        let values = fields[2..]
            .iter()
            .map(|v| parse_field::<f64>(v, "feature value", line))
            .collect::<Result<Vec<_>, _>>()?;
        if values.len() != dim {
            return Err(FormatError::validation(
                line,
                format!("feature length {} != {dim}", values.len()),
            ));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(FormatError::validation(line, "non-finite feature value"));
        }
        if table.entries.contains_key(&(frame, det_index)) {
            return Err(FormatError::validation(
                line,
                format!("duplicate key ({frame},{det_index})"),
            ));
        }
        table.entries.insert((frame, det_index), FeatureVector::new(values));
    }
    Ok(table)
}

/// Writes values with shortest round-trip formatting so parsing is lossless.
pub fn write_features(table: &FeatureTable) -> String {
    let mut out = format!("# dim={}\n", table.dim);
    for ((frame, det_index), feature) in &table.entries {
        let _ = write!(out, "{frame},{det_index}");
        for v in feature.as_slice() {
            let _ = write!(out, ",{v}");
        }
        out.push('\n');
    }
    out
}

/// A single 2D keypoint with detector confidence. `(0,0,0)` means undetected.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(from = "[f64; 3]", into = "[f64; 3]")]
pub struct Keypoint {
    pub x: f64,
    pub y: f64,
    pub c: f64,
}

impl Keypoint {
    pub fn new(x: f64, y: f64, c: f64) -> Self {
        Self { x, y, c }
    }
}

impl From<[f64; 3]> for Keypoint {
    fn from([x, y, c]: [f64; 3]) -> Self {
        Self { x, y, c }
    }
}

impl From<Keypoint> for [f64; 3] {
    fn from(k: Keypoint) -> Self {
        [k.x, k.y, k.c]
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KeypointRecord {
    pub frame: u32,
    pub det_index: usize,
    pub keypoints: Vec<Keypoint>,
}

impl KeypointRecord {
    pub fn torso(&self) -> crate::pose::TorsoPoints {
        crate::pose::TorsoPoints {
            right_shoulder: self.keypoints[RIGHT_SHOULDER],
            left_shoulder: self.keypoints[LEFT_SHOULDER],
            right_hip: self.keypoints[RIGHT_HIP],
            left_hip: self.keypoints[LEFT_HIP],
        }
    }
}

pub fn parse_keypoints(text: &str) -> Result<Vec<KeypointRecord>, FormatError> {
    let mut records = Vec::new();
    for (idx, raw) in text.lines().enumerate() {
        let line = idx + 1;
        if raw.trim().is_empty() {
            continue;
        }
        let record: KeypointRecord = serde_json::from_str(raw)
            .map_err(|e| FormatError::parse(line, format!("invalid keypoint JSON: {e}")))?;
        if record.frame < 1 {
            return Err(FormatError::validation(line, "frame must be >= 1"));
        }
        if record.keypoints.len() != COCO18_LEN {
            return Err(FormatError::validation(
                line,
                format!("expected {COCO18_LEN} keypoints, found {}", record.keypoints.len()),
            ));
        }
        if let Some(k) = record.keypoints.iter().find(|k| !(0.0..=1.0).contains(&k.c)) {
            return Err(FormatError::validation(
                line,
                format!("keypoint confidence {} outside [0,1]", k.c),
            ));
        }
        records.push(record);
    }
    Ok(records)
}

pub fn write_keypoints(records: &[KeypointRecord]) -> String {
    let mut out = String::new();
    for r in records {
        // Serializing plain numbers and arrays cannot fail.
        out.push_str(&serde_json::to_string(r).expect("keypoint record serializes"));
        out.push('\n');
    }
    out
}

/// Flat `metric,value` result table.
pub fn write_metrics<'a, I>(rows: I) -> String
where
    I: IntoIterator<Item = (&'a str, String)>,
{
    let mut out = String::from("metric,value\n");
    for (name, value) in rows {
        let _ = writeln!(out, "{name},{value}");
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_mot_line_and_ignores_world_coordinates() {
        let recs = parse_mot("1,-1,10,20,30,60,0.9,-1,-1,-1").unwrap();
        assert_eq!(
            recs,
            vec![DetectionRecord::new(1, -1, BoundingBox::new(10.0, 20.0, 30.0, 60.0), 0.9)]
        );
    }

    #[test]
    fn empty_text_is_empty_list() {
        assert!(parse_mot("").unwrap().is_empty());
        assert!(parse_mot("\n\n").unwrap().is_empty());
    }

    #[test]
    fn too_few_fields_reports_line() {
        let err = parse_mot("1,-1,10,20").unwrap_err();
        assert!(matches!(err, FormatError::Parse { line: 1, .. }), "{err}");
        let err = parse_mot("1,1,0,0,5,5,1\n2,1,0,0").unwrap_err();
        assert!(matches!(err, FormatError::Parse { line: 2, .. }));
    }

    #[test]
    fn rejects_bad_frame_and_box() {
        assert!(matches!(
            parse_mot("0,1,0,0,5,5,1").unwrap_err(),
            FormatError::Validation { line: 1, .. }
        ));
        assert!(matches!(
            parse_mot("1,1,0,0,0,5,1").unwrap_err(),
            FormatError::Validation { .. }
        ));
        assert!(matches!(
            parse_mot("1,1,0,0,5,-2,1").unwrap_err(),
            FormatError::Validation { .. }
        ));
        assert!(matches!(parse_mot("1,x,0,0,5,5,1").unwrap_err(), FormatError::Parse { .. }));
    }

    #[test]
    fn write_tracks_canonical_format() {
        let r = DetectionRecord::new(1, 3, BoundingBox::new(10.0, 20.0, 30.0, 60.0), 1.0);
        assert_eq!(write_tracks(&[r]).unwrap(), "1,3,10.00,20.00,30.00,60.00,1.00,-1,-1,-1\n");
        assert_eq!(write_tracks(&[]).unwrap(), "");
        let bad = DetectionRecord { id: -1, ..r };
        assert_eq!(
            write_tracks(&[r, bad]).unwrap_err(),
            FormatError::InvalidTrackId { index: 1, id: -1 }
        );
    }

    #[test]
    fn features_basic_and_errors() {
        let t = parse_features("# dim=2\n1,0,1.0,0.0").unwrap();
        assert_eq!(t.dim(), 2);
        assert_eq!(t.get(1, 0).unwrap().as_slice(), &[1.0, 0.0]);

        let err = parse_features("# dim=2\n1,0,1.0").unwrap_err();
        assert!(err.to_string().contains("length 1 != 2"), "{err}");

        let err = parse_features("# dim=2\n1,0,1,0\n1,0,0,1").unwrap_err();
        assert!(err.to_string().contains("duplicate key (1,0)"), "{err}");
        assert!(matches!(err, FormatError::Validation { line: 3, .. }));

        assert!(parse_features("1,0,1,0").is_err());
        assert!(parse_features("").is_err());
    }

    #[test]
    fn features_round_trip_exactly() {
        let mut t = FeatureTable::new(3);
        t.insert(1, 0, FeatureVector::new(vec![0.1, -2.5e-7, 1.0 / 3.0]));
        t.insert(2, 1, FeatureVector::new(vec![f64::MIN_POSITIVE, 0.0, -1.0]));
        assert_eq!(parse_features(&write_features(&t)).unwrap(), t);
    }

    fn keypoint_line(n: usize, c: f64) -> String {
        let kps = vec![format!("[1,2,{c}]"); n].join(",");
        format!("{{\"frame\":1,\"det_index\":0,\"keypoints\":[{kps}]}}")
    }

    #[test]
    fn keypoints_all_missing() {
        let recs = parse_keypoints(&keypoint_line(18, 0.0).replace("[1,2,", "[0,0,")).unwrap();
        assert_eq!(recs.len(), 1);
        assert!(recs[0].keypoints.iter().all(|k| *k == Keypoint::default()));
    }

    #[test]
    fn keypoints_reject_wrong_arity_and_confidence() {
        assert!(matches!(
            parse_keypoints(&keypoint_line(17, 0.5)).unwrap_err(),
            FormatError::Validation { line: 1, .. }
        ));
        let mut bad = keypoint_line(18, 1.0);
        bad = bad.replacen("[1,2,1]", "[1,2,1.5]", 1);
        assert!(parse_keypoints(&bad).is_err());
        assert!(matches!(
            parse_keypoints("not json").unwrap_err(),
            FormatError::Parse { line: 1, .. }
        ));
    }

    #[test]
    fn keypoints_round_trip() {
        let rec = KeypointRecord {
            frame: 4,
            det_index: 2,
            keypoints: (0..18).map(|i| Keypoint::new(i as f64, 0.5, 0.25)).collect(),
        };
        let text = write_keypoints(std::slice::from_ref(&rec));
        assert_eq!(parse_keypoints(&text).unwrap(), vec![rec]);
    }

    #[test]
    fn iou_basics() {
        let a = BoundingBox::new(0.0, 0.0, 10.0, 10.0);
        assert_eq!(a.iou(&a), 1.0);
        assert_eq!(a.iou(&BoundingBox::new(20.0, 0.0, 10.0, 10.0)), 0.0);
        let half = BoundingBox::new(5.0, 0.0, 10.0, 10.0);
        assert!((a.iou(&half) - 50.0 / 150.0).abs() < 1e-12);
    }
}
