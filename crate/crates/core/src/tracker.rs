//! Frame-by-frame tracking loop: predict, associate, update, and gallery
//! maintenance with track lifecycle management.
//!
//! Only the consensus particle's assignment drives the Kalman updates and the
//! gallery; particles carry association hypotheses and their weights, not
//! per-particle filter banks.

use std::collections::{BTreeMap, HashMap};
use std::fmt;
use std::str::FromStr;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::association::{
    self, AssociationError, AssociationMatrix, AssociationMode, Column, ParticleSet, PositionParams, Sampling,
    CHI2_GATE_4DOF,
};
use crate::filter::{self, FilterError, Measurement, TrackState};
use crate::formats::{self, DetectionRecord, FeatureTable, FormatError, KeypointRecord};
use crate::gallery::{FeatureVector, Gallery, GalleryError, PersonId, Strategy};
use crate::pose::{Orientation, TorsoPoints};

#[derive(Debug, Error)]
pub enum TrackerError {
    #[error("invalid config: {0}")]
    Config(String),
    #[error(transparent)]
    Format(#[from] FormatError),
    #[error(transparent)]
    Association(#[from] AssociationError),
    #[error(transparent)]
    Filter(#[from] FilterError),
    #[error(transparent)]
    Gallery(#[from] GalleryError),
    #[error("missing feature for frame {frame}, detection {det_index}")]
    MissingFeature { frame: u32, det_index: usize },
    #[error("missing keypoints for frame {frame}, detection {det_index}")]
    MissingKeypoints { frame: u32, det_index: usize },
    #[error("duplicate keypoints for frame {frame}, detection {det_index}")]
    DuplicateKeypoints { frame: u32, det_index: usize },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum GalleryKind {
    Full,
    Averaged,
    Random,
    #[default]
    Orientation,
}

impl GalleryKind {
    pub fn strategy(self, bins: usize, seed: u64) -> Strategy {
        match self {
            GalleryKind::Full => Strategy::Full,
            GalleryKind::Averaged => Strategy::Averaged,
            GalleryKind::Random => Strategy::RandomBins { bins, seed },
            GalleryKind::Orientation => Strategy::OrientationBins { bins },
        }
    }
}

impl fmt::Display for GalleryKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            GalleryKind::Full => "full",
            GalleryKind::Averaged => "avg",
            GalleryKind::Random => "random",
            GalleryKind::Orientation => "orient",
        })
    }
}

impl FromStr for GalleryKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "full" => Ok(GalleryKind::Full),
            "avg" | "averaged" | "average" => Ok(GalleryKind::Averaged),
            "random" | "random_bins" => Ok(GalleryKind::Random),
            "orient" | "orientation" | "orientation_bins" => Ok(GalleryKind::Orientation),
            _ => Err(format!("unknown gallery strategy {s:?}")),
        }
    }
}

fn de_from_str<'de, D, T>(d: D) -> Result<T, D::Error>
where
    D: serde::Deserializer<'de>,
    T: FromStr<Err = String>,
{
    let s = String::deserialize(d)?;
    s.parse().map_err(serde::de::Error::custom)
}

fn ser_display<S: serde::Serializer, T: fmt::Display>(v: &T, s: S) -> Result<S::Ok, S::Error> {
    s.collect_str(v)
}

/// Flat tracker configuration, loadable from a TOML file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrackerConfig {
    pub bins: usize,
    pub smax: f64,
    pub particles: usize,
    #[serde(deserialize_with = "de_from_str", serialize_with = "ser_display")]
    pub mode: AssociationMode,
    #[serde(deserialize_with = "de_from_str", serialize_with = "ser_display")]
    pub gallery: GalleryKind,
    pub q: f64,
    pub r: f64,
    pub d0_pos: f64,
    pub d0_app: f64,
    pub confirm_hits: u32,
    pub max_age: u32,
    pub seed: u64,
}

impl Default for TrackerConfig {
    fn default() -> Self {
        Self {
            bins: 5,
            smax: 1.0,
            particles: 20,
            mode: AssociationMode::PosApp,
            gallery: GalleryKind::Orientation,
            q: filter::DEFAULT_PROCESS_NOISE,
            r: filter::DEFAULT_MEASUREMENT_NOISE,
            d0_pos: association::DEFAULT_D0_POSITION,
            d0_app: association::DEFAULT_D0_APPEARANCE,
            confirm_hits: 2,
            max_age: 30,
            seed: 0,
        }
    }
}

impl TrackerConfig {
    pub fn from_toml(text: &str) -> Result<Self, TrackerError> {
        let config: Self = toml::from_str(text).map_err(|e| TrackerError::Config(e.to_string()))?;
        config.validate()?;
        Ok(config)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("flat config serializes")
    }

    pub fn validate(&self) -> Result<(), TrackerError> {
        let fail = |msg: &str| Err(TrackerError::Config(msg.to_string()));
        if self.bins < 1 {
            return fail("bins must be >= 1");
        }
        if self.particles < 1 {
            return fail("particles must be >= 1");
        }
        if !(self.smax > 0.0) {
            return fail("smax must be positive");
        }
        if !(self.q >= 0.0) || !(self.r > 0.0) {
            return fail("q must be >= 0 and r must be positive");
        }
        if !self.d0_pos.is_finite() || !self.d0_app.is_finite() {
            return fail("d0_pos and d0_app must be finite");
        }
        if self.confirm_hits < 1 {
            return fail("confirm_hits must be >= 1");
        }
        Ok(())
    }

    pub fn strategy(&self) -> Strategy {
        self.gallery.strategy(self.bins, self.seed)
    }

    pub fn needs_features(&self) -> bool {
        self.mode.uses_appearance()
    }

    pub fn needs_keypoints(&self) -> bool {
        self.needs_features() && self.gallery == GalleryKind::Orientation
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TrackStatus {
    Tentative,
    Confirmed,
    Dead,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Track {
    pub track_id: u64,
    pub state: TrackState,
    pub hits: u32,
    /// Consecutive frames without an associated detection.
    pub misses: u32,
    pub status: TrackStatus,
}

/// A detection joined with its optional appearance feature and torso keypoints.
#[derive(Debug, Clone, PartialEq)]
pub struct FrameDetection {
    pub record: DetectionRecord,
    pub feature: Option<FeatureVector>,
    pub torso: Option<TorsoPoints>,
}

impl FrameDetection {
    pub fn new(record: DetectionRecord) -> Self {
        Self { record, feature: None, torso: None }
    }
}

/// Parsed inputs for a whole sequence, joined on `(frame, det_index)`.
#[derive(Debug, Clone, Default)]
pub struct SequenceData {
    frames: BTreeMap<u32, Vec<DetectionRecord>>,
    features: Option<FeatureTable>,
    keypoints: HashMap<(u32, usize), KeypointRecord>,
}

impl SequenceData {
    pub fn new(
        detections: &[DetectionRecord],
        features: Option<FeatureTable>,
        keypoints: Option<Vec<KeypointRecord>>,
    ) -> Result<Self, TrackerError> {
        let mut index = HashMap::new();
        for k in keypoints.unwrap_or_default() {
            let key = (k.frame, k.det_index);
            if index.insert(key, k).is_some() {
                return Err(TrackerError::DuplicateKeypoints { frame: key.0, det_index: key.1 });
            }
        }
        Ok(Self { frames: formats::group_by_frame(detections), features, keypoints: index })
    }

    pub fn from_texts(det: &str, features: Option<&str>, keypoints: Option<&str>) -> Result<Self, TrackerError> {
        let detections = formats::parse_mot(det)?;
        let features = features.map(formats::parse_features).transpose()?;
        let keypoints = keypoints.map(formats::parse_keypoints).transpose()?;
        Self::new(&detections, features, keypoints)
    }

    pub fn last_frame(&self) -> Option<u32> {
        self.frames.keys().next_back().copied()
    }

    /// Joins one frame's detections with the side inputs the config requires.
    pub fn frame(&self, frame: u32, config: &TrackerConfig) -> Result<Vec<FrameDetection>, TrackerError> {
        let Some(records) = self.frames.get(&frame) else {
            return Ok(Vec::new());
        };
        let want_features = config.needs_features();
        let want_keypoints = config.needs_keypoints();
        records
            .iter()
            .enumerate()
            .map(|(det_index, record)| {
                let mut det = FrameDetection::new(*record);
                if want_features {
                    let feat = self
                        .features
                        .as_ref()
                        .and_then(|t| t.get(frame, det_index))
                        .ok_or(TrackerError::MissingFeature { frame, det_index })?;
                    det.feature = Some(feat.clone());
                }
                if want_keypoints {
                    let kp = self
                        .keypoints
                        .get(&(frame, det_index))
                        .ok_or(TrackerError::MissingKeypoints { frame, det_index })?;
                    det.torso = Some(kp.torso());
                }
                Ok(det)
            })
            .collect()
    }
}

pub struct Tracker {
    config: TrackerConfig,
    tracks: Vec<Track>,
    gallery: Option<Gallery>,
    particles: ParticleSet,
    picker: Sampling<ChaCha8Rng>,
    next_id: u64,
}

impl Tracker {
    pub fn new(config: TrackerConfig) -> Result<Self, TrackerError> {
        config.validate()?;
        Ok(Self {
            particles: ParticleSet::new(config.particles),
            picker: Sampling(ChaCha8Rng::seed_from_u64(config.seed)),
            config,
            tracks: Vec::new(),
            gallery: None,
            next_id: 1,
        })
    }

    pub fn config(&self) -> &TrackerConfig {
        &self.config
    }

    /// Tentative and confirmed tracks.
    pub fn live_tracks(&self) -> &[Track] {
        &self.tracks
    }

    pub fn gallery(&self) -> Option<&Gallery> {
        self.gallery.as_ref()
    }

    pub fn tracks_created(&self) -> u64 {
        self.next_id - 1
    }

    fn association_matrix(&mut self, dets: &[FrameDetection]) -> Result<AssociationMatrix, TrackerError> {
        let mode = self.config.mode;
        let pos = if mode.uses_position() {
            let states: Vec<TrackState> = self.tracks.iter().map(|t| t.state).collect();
            let measurements: Vec<Measurement> = dets.iter().map(|d| Measurement::from_bbox(&d.record.bbox)).collect();
            let params = PositionParams { r: self.config.r, d0: self.config.d0_pos, gate: CHI2_GATE_4DOF };
            Some(association::position_likelihood(&states, &measurements, &params)?)
        } else {
            None
        };
        let app = if mode.uses_appearance() {
            let features: Vec<FeatureVector> = dets
                .iter()
                .enumerate()
                .map(|(i, d)| {
                    d.feature.clone().ok_or(TrackerError::MissingFeature { frame: d.record.frame, det_index: i })
                })
                .collect::<Result<_, _>>()?;
            let persons: Vec<PersonId> = self.tracks.iter().map(|t| t.track_id).collect();
            let d0_app = self.config.d0_app;
            let gallery = self.gallery_for(features.first().map_or(0, FeatureVector::dim));
            Some(association::appearance_likelihood(gallery, &persons, &features, d0_app)?)
        } else {
            None
        };
        Ok(match (pos, app) {
            (Some(p), Some(a)) => association::combine(&p, &a, mode)?,
            (Some(m), None) | (None, Some(m)) => m,
            (None, None) => unreachable!("every mode uses position or appearance"),
        })
    }

    fn gallery_for(&mut self, dim: usize) -> &Gallery {
        let strategy = self.config.strategy();
        self.gallery.get_or_insert_with(|| Gallery::new(strategy, dim))
    }

    fn remember_appearance(&mut self, track_id: u64, det: &FrameDetection) -> Result<(), TrackerError> {
        if !self.config.mode.uses_appearance() {
            return Ok(());
        }
        let Some(feat) = det.feature.as_ref() else {
            return Ok(());
        };
        let bins = self.config.bins;
        let bin = det
            .torso
            .as_ref()
            .map(|t| Orientation::estimate(t, bins, self.config.smax).bin)
            .unwrap_or_else(|| crate::pose::fallback_bin(bins));
        self.gallery_for(feat.dim());
        self.gallery.as_mut().expect("gallery initialised").insert(track_id, feat, bin)?;
        Ok(())
    }

    /// Advances the tracker by one frame and returns the records of confirmed
    /// tracks updated in it, ordered by track id.
    pub fn process_frame(&mut self, frame: u32, dets: &[FrameDetection]) -> Result<Vec<DetectionRecord>, TrackerError> {
        let q = self.config.q;
        for t in &mut self.tracks {
            t.state = filter::predict(&t.state, q);
        }

        let assignment = if dets.is_empty() {
            Vec::new()
        } else {
            let matrix = self.association_matrix(dets)?;
            let particles = std::mem::replace(&mut self.particles, ParticleSet::new(1));
            let (particles, consensus) = association::rbpf_step(particles, &matrix, &mut self.picker);
            self.particles = particles;
            consensus
        };

        let mut updated = vec![false; self.tracks.len()];
        let mut spawned = Vec::new();
        let mut conf_of = HashMap::new();
        for (det, col) in dets.iter().zip(&assignment) {
            let m = Measurement::from_bbox(&det.record.bbox);
            let id = match *col {
                Column::Track(j) => {
                    let track = &mut self.tracks[j];
                    track.state = filter::update(&track.state, &m, self.config.r)?;
                    track.hits += 1;
                    track.misses = 0;
                    updated[j] = true;
                    track.track_id
                }
                Column::NewTrack => {
                    let id = self.next_id;
                    self.next_id += 1;
                    spawned.push(Track {
                        track_id: id,
                        state: TrackState::from_measurement(&m),
                        hits: 1,
                        misses: 0,
                        status: TrackStatus::Tentative,
                    });
                    id
                }
            };
            conf_of.insert(id, det.record.conf);
            self.remember_appearance(id, det)?;
        }

        let confirm_hits = self.config.confirm_hits;
        let max_age = self.config.max_age;
        let mut dead = Vec::new();
        for (j, t) in self.tracks.iter_mut().enumerate() {
            if !updated[j] {
                t.misses += 1;
                // A tentative track that misses is most likely spurious.
                if t.misses > max_age || t.status == TrackStatus::Tentative {
                    t.status = TrackStatus::Dead;
                    dead.push(t.track_id);
                }
            }
        }
        self.tracks.retain(|t| t.status != TrackStatus::Dead);
        if let Some(g) = self.gallery.as_mut() {
            for id in dead {
                g.remove(id);
            }
        }
        self.tracks.extend(spawned);

        let mut emitted = Vec::new();
        for t in &mut self.tracks {
            if t.status == TrackStatus::Tentative && t.hits >= confirm_hits {
                t.status = TrackStatus::Confirmed;
            }
            if t.status == TrackStatus::Confirmed && t.misses == 0 {
                if let Some(&conf) = conf_of.get(&t.track_id) {
                    emitted.push(DetectionRecord::new(frame, t.track_id as i64, t.state.bbox(), conf));
                }
            }
        }
        emitted.sort_by_key(|r| r.id);
        Ok(emitted)
    }
}

/// Runs the tracker over every frame from 1 to the last detection frame.
/// Output is sorted by `(frame, track_id)`.
pub fn run_sequence(config: &TrackerConfig, data: &SequenceData) -> Result<Vec<DetectionRecord>, TrackerError> {
    let mut tracker = Tracker::new(config.clone())?;
    let mut out = Vec::new();
    let Some(last) = data.last_frame() else {
        return Ok(out);
    };
    for frame in 1..=last {
        let dets = data.frame(frame, config)?;
        out.extend(tracker.process_frame(frame, &dets)?);
    }
    Ok(out)
}
