//! Orientation from torso keypoints.
//!
//! The shoulder-to-torso (S2T) ratio is the confidence-weighted signed width of
//! the torso divided by its height. Image y grows downward, so height is taken
//! hip-minus-shoulder and is positive for an upright person. A positive ratio
//! means the right shoulder appears to the right of the left one in the image,
//! i.e. the person faces away from the camera; negative means facing it.

use thiserror::Error;

use crate::formats::Keypoint;

/// Smallest torso height, in pixels, for which the ratio is defined.
pub const DEFAULT_MIN_HEIGHT: f64 = 1e-6;

#[derive(Debug, Error, Clone, Copy, PartialEq)]
pub enum OrientationUnavailable {
    #[error("torso keypoints carry too little confidence")]
    NoConfidence,
    #[error("degenerate torso height {0} px")]
    DegenerateHeight(f64),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TorsoPoints {
    pub right_shoulder: Keypoint,
    pub left_shoulder: Keypoint,
    pub right_hip: Keypoint,
    pub left_hip: Keypoint,
}

impl TorsoPoints {
    fn points(&self) -> [&Keypoint; 4] {
        [&self.right_shoulder, &self.left_shoulder, &self.right_hip, &self.left_hip]
    }

    /// Confidence-weighted signed width and height, each divided by the total
    /// confidence mass. A pair term is dropped when either of its keypoints
    /// has zero confidence, so undetected keypoints never leak coordinates.
    pub fn width_height(&self) -> Result<(f64, f64), OrientationUnavailable> {
        let (rs, ls, rh, lh) = (&self.right_shoulder, &self.left_shoulder, &self.right_hip, &self.left_hip);
        let mass = rs.c + ls.c + rh.c + lh.c;
        if !(mass > 0.0) {
            return Err(OrientationUnavailable::NoConfidence);
        }
        let seen = |a: &Keypoint, b: &Keypoint| a.c > 0.0 && b.c > 0.0;
        let term = |a: &Keypoint, b: &Keypoint, d: f64| if seen(a, b) { (a.c + b.c) * d } else { 0.0 };
        if !(seen(rs, ls) || seen(rh, lh)) || !(seen(rs, rh) || seen(ls, lh)) {
            return Err(OrientationUnavailable::NoConfidence);
        }
        let width = (term(rs, ls, rs.x - ls.x) + term(rh, lh, rh.x - lh.x)) / mass;
        let height = (term(rs, rh, rh.y - rs.y) + term(ls, lh, lh.y - ls.y)) / mass;
        Ok((width, height))
    }
}

pub fn s2t_ratio(torso: &TorsoPoints) -> Result<f64, OrientationUnavailable> {
    s2t_ratio_with(torso, DEFAULT_MIN_HEIGHT)
}

pub fn s2t_ratio_with(torso: &TorsoPoints, min_height: f64) -> Result<f64, OrientationUnavailable> {
    debug_assert!(torso.points().iter().all(|k| (0.0..=1.0).contains(&k.c)));
    let (width, height) = torso.width_height()?;
    if !(height.abs() >= min_height) {
        return Err(OrientationUnavailable::DegenerateHeight(height));
    }
    Ok(width / height)
}

/// Uniform partition of `[-smax, smax]` into `bins` intervals; values outside
/// the range are clamped into the end bins.
pub fn orientation_bin(s2t: f64, bins: usize, smax: f64) -> usize {
    assert!(bins >= 1, "bin count must be at least 1");
    assert!(smax > 0.0, "clamp bound must be positive");
    let s = s2t.clamp(-smax, smax);
    let idx = ((s + smax) / (2.0 * smax) * bins as f64).floor();
    // NaN lands in bin 0 through the saturating cast.
    (idx as usize).min(bins - 1)
}

/// Bin used when the torso is not visible enough to estimate orientation.
pub fn fallback_bin(bins: usize) -> usize {
    bins / 2
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Orientation {
    /// NaN when `valid` is false.
    pub s2t: f64,
    pub bin: usize,
    pub valid: bool,
}

impl Orientation {
    pub fn estimate(torso: &TorsoPoints, bins: usize, smax: f64) -> Self {
        Self::from_ratio(s2t_ratio(torso).ok(), bins, smax)
    }

    pub fn from_ratio(s2t: Option<f64>, bins: usize, smax: f64) -> Self {
        match s2t {
            Some(s) => Self { s2t: s, bin: orientation_bin(s, bins, smax), valid: true },
            None => Self { s2t: f64::NAN, bin: fallback_bin(bins), valid: false },
        }
    }
}
