//! Multi-object tracking with orientation-binned appearance galleries.
//!
//! Torso keypoints give a signed shoulder-to-torso ratio, which selects an
//! orientation bin in a per-identity feature gallery. Tracks are kept by a
//! constant-velocity Kalman filter and detections are associated through a
//! particle filter over assignment hypotheses, scored by position and
//! appearance likelihoods. Evaluation covers rank-1 re-identification, IDF1
//! and identity switches, and a synthetic generator provides labelled data.

pub mod assignment;
pub mod association;
pub mod cli;
pub mod filter;
pub mod formats;
pub mod gallery;
pub mod metrics;
pub mod pose;
pub mod synth;
pub mod tracker;
