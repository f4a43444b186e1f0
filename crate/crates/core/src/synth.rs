//! Labelled synthetic sequences: ground truth, noisy detections, appearance
//! features that depend on identity and facing quadrant, and torso keypoints
//! whose shoulder-to-torso ratio equals the cosine of the facing angle.

use std::f64::consts::{PI, TAU};
use std::fs;
use std::io;
use std::path::Path;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal, StandardNormal};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::formats::{
    self, BoundingBox, DetectionRecord, FeatureTable, Keypoint, KeypointRecord, COCO18_LEN, LEFT_HIP,
    LEFT_SHOULDER, RIGHT_HIP, RIGHT_SHOULDER,
};
use crate::gallery::{FeatureVector, PersonId};
use crate::metrics::{LabeledFeature, LabeledFeatureSet};
use crate::pose::s2t_ratio;

pub const GT_FILE: &str = "gt.csv";
pub const DET_FILE: &str = "det.csv";
pub const FEATURES_FILE: &str = "features.csv";
pub const KEYPOINTS_FILE: &str = "keypoints.jsonl";

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SynthError {
    #[error("invalid synth config: {0}")]
    Config(String),
    #[error("invalid synth config TOML: {0}")]
    Toml(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SynthConfig {
    pub persons: usize,
    pub frames: u32,
    pub width: f64,
    pub height: f64,
    pub dim: usize,
    /// Weight of the per-quadrant appearance component.
    pub kappa: f64,
    /// Norm scale of the per-sample feature noise.
    pub sigma: f64,
    /// Standard deviation of the box jitter, in pixels.
    pub sigma_det: f64,
    pub crossing: bool,
    pub seed: u64,
    /// Speed in pixels per frame for free-walking persons.
    pub speed: f64,
    /// Heading change per frame, in radians; nonzero values bend paths into arcs.
    pub turn_rate: f64,
    /// Draw the facing angle uniformly per sample instead of from the velocity.
    pub random_facing: bool,
}

impl Default for SynthConfig {
    fn default() -> Self {
        Self {
            persons: 4,
            frames: 100,
            width: 1280.0,
            height: 720.0,
            dim: 8,
            kappa: 0.8,
            sigma: 0.3,
            sigma_det: 2.0,
            crossing: false,
            seed: 0,
            speed: 4.0,
            turn_rate: 0.0,
            random_facing: false,
        }
    }
}

impl SynthConfig {
    pub fn from_toml(text: &str) -> Result<Self, SynthError> {
        let cfg: Self = toml::from_str(text).map_err(|e| SynthError::Toml(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("synth config serializes")
    }

    pub fn validate(&self) -> Result<(), SynthError> {
        let fail = |m: &str| Err(SynthError::Config(m.to_string()));
        if self.persons < 1 {
            return fail("persons must be >= 1");
        }
        if self.frames < 1 {
            return fail("frames must be >= 1");
        }
        if self.dim < 2 {
            return fail("dim must be >= 2");
        }
        if !(self.width > 0.0 && self.height > 0.0) {
            return fail("image size must be positive");
        }
        if !(self.kappa >= 0.0) || !(self.sigma >= 0.0) || !(self.sigma_det >= 0.0) {
            return fail("kappa, sigma and sigma_det must be non-negative");
        }
        if !self.speed.is_finite() || !self.turn_rate.is_finite() {
            return fail("speed and turn_rate must be finite");
        }
        Ok(())
    }
}

/// Facing quadrant of an angle: `floor(wrap(theta) / (pi/2))`.
pub fn quadrant(theta: f64) -> usize {
    let wrapped = theta.rem_euclid(TAU);
    ((wrapped / (PI / 2.0)).floor() as usize).min(3)
}

/// Ground truth for one generated detection.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SynthSample {
    pub frame: u32,
    pub det_index: usize,
    pub person: PersonId,
    pub theta: f64,
    pub quadrant: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SynthOutput {
    pub gt: Vec<DetectionRecord>,
    /// Same order as `gt`, ids set to -1.
    pub detections: Vec<DetectionRecord>,
    pub features: FeatureTable,
    pub keypoints: Vec<KeypointRecord>,
    pub samples: Vec<SynthSample>,
}

impl SynthOutput {
    pub fn gt_text(&self) -> String {
        formats::write_detections(&self.gt)
    }

    pub fn det_text(&self) -> String {
        formats::write_detections(&self.detections)
    }

    pub fn features_text(&self) -> String {
        formats::write_features(&self.features)
    }

    pub fn keypoints_text(&self) -> String {
        formats::write_keypoints(&self.keypoints)
    }

    pub fn write_to_dir(&self, dir: &Path) -> io::Result<()> {
        fs::create_dir_all(dir)?;
        fs::write(dir.join(GT_FILE), self.gt_text())?;
        fs::write(dir.join(DET_FILE), self.det_text())?;
        fs::write(dir.join(FEATURES_FILE), self.features_text())?;
        fs::write(dir.join(KEYPOINTS_FILE), self.keypoints_text())?;
        Ok(())
    }

    /// Every feature with its person id and the ratio measured from its keypoints.
    pub fn labeled_features(&self) -> LabeledFeatureSet {
        let items = self
            .samples
            .iter()
            .zip(&self.keypoints)
            .map(|(s, k)| LabeledFeature {
                person: s.person,
                feature: self.features.get(s.frame, s.det_index).expect("feature per sample").clone(),
                s2t: s2t_ratio(&k.torso()).ok(),
            })
            .collect();
        LabeledFeatureSet::new(items)
    }
}

fn unit_gaussian(rng: &mut ChaCha8Rng, dim: usize) -> Vec<f64> {
    loop {
        let v: Vec<f64> = (0..dim).map(|_| StandardNormal.sample(rng)).collect();
        let n = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        if n > 1e-12 {
            return v.into_iter().map(|x| x / n).collect();
        }
    }
}

struct Person {
    u: Vec<f64>,
    v: [Vec<f64>; 4],
    box_w: f64,
    box_h: f64,
    pos: (f64, f64),
    vel: (f64, f64),
}

fn spawn(config: &SynthConfig, index: usize, rng: &mut ChaCha8Rng) -> Person {
    let u = unit_gaussian(rng, config.dim);
    let v = std::array::from_fn(|_| unit_gaussian(rng, config.dim));
    let box_h = 0.2 * config.height * rng.random_range(0.95..1.05);
    let box_w = 0.4 * box_h;
    let (cx, cy) = (config.width / 2.0, config.height / 2.0);
    let (pos, vel) = if config.crossing {
        // Alternate between the left and right borders, all aimed at the centre at mid-sequence.
        let x = if index % 2 == 0 { 0.05 * config.width } else { 0.95 * config.width };
        let start = (x, rng.random_range(0.1 * config.height..0.9 * config.height));
        let target = (cx, cy);
        let half = (config.frames as f64 / 2.0).max(1.0);
        (start, ((target.0 - start.0) / half, (target.1 - start.1) / half))
    } else {
        let start = (rng.random_range(0.0..config.width), rng.random_range(0.0..config.height));
        let heading = rng.random_range(0.0..TAU);
        (start, (config.speed * heading.cos(), config.speed * heading.sin()))
    };
    Person { u, v, box_w, box_h, pos, vel }
}

fn feature(config: &SynthConfig, p: &Person, quadrant: usize, rng: &mut ChaCha8Rng) -> FeatureVector {
    let scale = config.sigma / (config.dim as f64).sqrt();
    let mut g: Vec<f64> = (0..config.dim)
        .map(|k| {
            let eps: f64 = StandardNormal.sample(rng);
            p.u[k] + config.kappa * p.v[quadrant][k] + scale * eps
        })
        .collect();
    let n = g.iter().map(|x| x * x).sum::<f64>().sqrt();
    if n > 0.0 {
        g.iter_mut().for_each(|x| *x /= n);
    }
    FeatureVector::new(g)
}

/// Torso placed inside the box so that the measured ratio is `cos(theta)`.
fn keypoints(frame: u32, det_index: usize, b: &BoundingBox, theta: f64) -> KeypointRecord {
    let (cx, _) = b.center();
    let torso = 0.3 * b.height;
    let shoulder_y = b.top + 0.2 * b.height;
    let hip_y = shoulder_y + torso;
    let facing = theta.cos();
    let half_shoulder = 0.55 * torso * facing;
    let half_hip = 0.45 * torso * facing;
    let mut kp = vec![Keypoint::default(); COCO18_LEN];
    kp[0] = Keypoint::new(cx, b.top + 0.08 * b.height, 1.0);
    kp[1] = Keypoint::new(cx, shoulder_y, 1.0);
    kp[RIGHT_SHOULDER] = Keypoint::new(cx + half_shoulder, shoulder_y, 1.0);
    kp[LEFT_SHOULDER] = Keypoint::new(cx - half_shoulder, shoulder_y, 1.0);
    kp[RIGHT_HIP] = Keypoint::new(cx + half_hip, hip_y, 1.0);
    kp[LEFT_HIP] = Keypoint::new(cx - half_hip, hip_y, 1.0);
    KeypointRecord { frame, det_index, keypoints: kp }
}

pub fn generate(config: &SynthConfig) -> Result<SynthOutput, SynthError> {
    config.validate()?;
    // Separate streams so motion, appearance and noise do not shift each other.
    let stream = |k: u64| {
        let mut r = ChaCha8Rng::seed_from_u64(config.seed);
        r.set_stream(k);
        r
    };
    let mut world_rng = stream(1);
    let mut noise_rng = stream(2);
    let mut facing_rng = stream(3);
    let mut order_rng = stream(4);
    let jitter = Normal::new(0.0, config.sigma_det).expect("finite non-negative deviation");

    let mut persons: Vec<Person> = (0..config.persons).map(|i| spawn(config, i, &mut world_rng)).collect();
    let mut out = SynthOutput {
        gt: Vec::new(),
        detections: Vec::new(),
        features: FeatureTable::new(config.dim),
        keypoints: Vec::new(),
        samples: Vec::new(),
    };

    for frame in 1..=config.frames {
        let mut order: Vec<usize> = (0..persons.len()).collect();
        order.shuffle(&mut order_rng);
        for (det_index, &i) in order.iter().enumerate() {
            let p = &persons[i];
            let person = i as PersonId + 1;
            let gt_box = BoundingBox::from_center(p.pos.0, p.pos.1, p.box_w, p.box_h);
            let det_box = BoundingBox::new(
                gt_box.left + jitter.sample(&mut noise_rng),
                gt_box.top + jitter.sample(&mut noise_rng),
                (gt_box.width + jitter.sample(&mut noise_rng)).max(1.0),
                (gt_box.height + jitter.sample(&mut noise_rng)).max(1.0),
            );
            let theta = if config.random_facing {
                facing_rng.random_range(0.0..TAU)
            } else {
                p.vel.1.atan2(p.vel.0)
            };
            let q = quadrant(theta);

            out.gt.push(DetectionRecord::new(frame, person as i64, gt_box, 1.0));
            out.detections.push(DetectionRecord::new(frame, -1, det_box, 1.0));
            out.features.insert(frame, det_index, feature(config, p, q, &mut noise_rng));
            out.keypoints.push(keypoints(frame, det_index, &det_box, theta));
            out.samples.push(SynthSample { frame, det_index, person, theta, quadrant: q });
        }
        for p in &mut persons {
            p.pos.0 += p.vel.0;
            p.pos.1 += p.vel.1;
            if config.turn_rate != 0.0 {
                let (s, c) = config.turn_rate.sin_cos();
                p.vel = (c * p.vel.0 - s * p.vel.1, s * p.vel.0 + c * p.vel.1);
            }
        }
    }
    Ok(out)
}
