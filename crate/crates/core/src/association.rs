//! Probabilistic data association.
//!
//! Each detection gets a row of probabilities over the live tracks plus a
//! trailing NEW_TRACK column. The position term is a softmin over Mahalanobis
//! distances, the appearance term a softmin over the distance to the nearest
//! gallery feature of each track, and the two are combined by an entry-wise
//! product. Normalising constants are absorbed by row normalisation.
//!
//! Assignments are drawn by a particle filter over association hypotheses:
//! every particle samples a one-to-one assignment per frame, weights are
//! updated by the sampled probabilities, and the best particle gives the
//! consensus assignment.

use std::fmt;
use std::str::FromStr;

use rand::Rng;
use thiserror::Error;

use crate::filter::{self, FilterError, Measurement, TrackState};
use crate::gallery::{FeatureVector, Gallery, GalleryError, PersonId};

/// 95% quantile of the chi-square distribution with 4 degrees of freedom.
pub const CHI2_GATE_4DOF: f64 = 9.488;
pub const DEFAULT_D0_POSITION: f64 = 4.0;
pub const DEFAULT_D0_APPEARANCE: f64 = 1.5;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum AssociationError {
    #[error(transparent)]
    Filter(#[from] FilterError),
    #[error(transparent)]
    Gallery(#[from] GalleryError),
    #[error("matrix shapes differ: {0:?} vs {1:?}")]
    ShapeMismatch((usize, usize), (usize, usize)),
}

/// Target of one detection's assignment.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Column {
    Track(usize),
    NewTrack,
}

/// Row-normalised association probabilities. Columns `0..tracks` are the live
/// tracks in caller order, column `tracks` is NEW_TRACK.
#[derive(Debug, Clone, PartialEq)]
pub struct AssociationMatrix {
    tracks: usize,
    values: Vec<f64>,
}

impl AssociationMatrix {
    /// Normalises each row of non-negative likelihoods. A row with no mass
    /// falls back to NEW_TRACK with probability one.
    pub fn from_likelihoods(tracks: usize, mut values: Vec<f64>) -> Self {
        let cols = tracks + 1;
        assert_eq!(values.len() % cols, 0, "likelihood buffer must hold whole rows");
        for row in values.chunks_mut(cols) {
            let total: f64 = row.iter().sum();
            if total > 0.0 && total.is_finite() {
                row.iter_mut().for_each(|v| *v /= total);
            } else {
                row.iter_mut().for_each(|v| *v = 0.0);
                row[tracks] = 1.0;
            }
        }
        Self { tracks, values }
    }

    pub fn from_rows(tracks: usize, rows: &[Vec<f64>]) -> Self {
        Self::from_likelihoods(tracks, rows.iter().flatten().copied().collect())
    }

    pub fn tracks(&self) -> usize {
        self.tracks
    }

    pub fn cols(&self) -> usize {
        self.tracks + 1
    }

    pub fn detections(&self) -> usize {
        self.values.len() / self.cols()
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.detections(), self.cols())
    }

    pub fn new_track_col(&self) -> usize {
        self.tracks
    }

    pub fn row(&self, i: usize) -> &[f64] {
        let c = self.cols();
        &self.values[i * c..(i + 1) * c]
    }

    pub fn get(&self, i: usize, col: Column) -> f64 {
        match col {
            Column::Track(j) => self.row(i)[j],
            Column::NewTrack => self.row(i)[self.tracks],
        }
    }

    pub fn rows(&self) -> impl Iterator<Item = &[f64]> {
        self.values.chunks(self.cols())
    }

    fn column_of(&self, idx: usize) -> Column {
        if idx == self.tracks {
            Column::NewTrack
        } else {
            Column::Track(idx)
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PositionParams {
    /// Measurement noise scale.
    pub r: f64,
    /// Distance assigned to the NEW_TRACK column.
    pub d0: f64,
    /// Squared-Mahalanobis gate; entries beyond it get zero likelihood.
    pub gate: f64,
}

impl Default for PositionParams {
    fn default() -> Self {
        Self {
            r: filter::DEFAULT_MEASUREMENT_NOISE,
            d0: DEFAULT_D0_POSITION,
            gate: CHI2_GATE_4DOF,
        }
    }
}

pub fn position_likelihood(
    tracks: &[TrackState],
    detections: &[Measurement],
    params: &PositionParams,
) -> Result<AssociationMatrix, AssociationError> {
    let cols = tracks.len() + 1;
    let mut values = Vec::with_capacity(detections.len() * cols);
    for det in detections {
        for track in tracks {
            let d2 = filter::mahalanobis_squared(track, det, params.r)?;
            values.push(if d2 > params.gate { 0.0 } else { (-d2.sqrt()).exp() });
        }
        values.push((-params.d0).exp());
    }
    Ok(AssociationMatrix::from_likelihoods(tracks.len(), values))
}

/// `persons[j]` is the gallery identity behind track column `j`. Persons with
/// nothing stored are scored like NEW_TRACK.
pub fn appearance_likelihood(
    gallery: &Gallery,
    persons: &[PersonId],
    features: &[FeatureVector],
    d0_app: f64,
) -> Result<AssociationMatrix, AssociationError> {
    let cols = persons.len() + 1;
    let floor = (-d0_app).exp();
    let mut values = Vec::with_capacity(features.len() * cols);
    for feat in features {
        if feat.dim() != gallery.dim() {
            return Err(GalleryError::DimensionMismatch { expected: gallery.dim(), got: feat.dim() }.into());
        }
        for &person in persons {
            let entry = match gallery.min_distance(person, feat) {
                Ok(d) => (-d).exp(),
                Err(GalleryError::UnknownPerson(_) | GalleryError::EmptyPerson(_)) => floor,
                Err(e) => return Err(e.into()),
            };
            values.push(entry);
        }
        values.push(floor);
    }
    Ok(AssociationMatrix::from_likelihoods(persons.len(), values))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum AssociationMode {
    PosOnly,
    AppOnly,
    #[default]
    PosApp,
}

impl AssociationMode {
    pub fn uses_position(self) -> bool {
        matches!(self, AssociationMode::PosOnly | AssociationMode::PosApp)
    }

    pub fn uses_appearance(self) -> bool {
        matches!(self, AssociationMode::AppOnly | AssociationMode::PosApp)
    }
}

impl fmt::Display for AssociationMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            AssociationMode::PosOnly => "pos",
            AssociationMode::AppOnly => "app",
            AssociationMode::PosApp => "pos+app",
        })
    }
}

impl FromStr for AssociationMode {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().replace(['_', '-'], "").as_str() {
            "pos" | "posonly" | "position" => Ok(AssociationMode::PosOnly),
            "app" | "apponly" | "appearance" => Ok(AssociationMode::AppOnly),
            "pos+app" | "posapp" | "both" => Ok(AssociationMode::PosApp),
            _ => Err(format!("unknown association mode {s:?}")),
        }
    }
}

pub fn combine(
    pos: &AssociationMatrix,
    app: &AssociationMatrix,
    mode: AssociationMode,
) -> Result<AssociationMatrix, AssociationError> {
    if pos.shape() != app.shape() {
        return Err(AssociationError::ShapeMismatch(pos.shape(), app.shape()));
    }
    Ok(match mode {
        AssociationMode::PosOnly => pos.clone(),
        AssociationMode::AppOnly => app.clone(),
        AssociationMode::PosApp => {
            let product = pos.values.iter().zip(&app.values).map(|(a, b)| a * b).collect();
            AssociationMatrix::from_likelihoods(pos.tracks, product)
        }
    })
}

/// Source of column choices for the particle filter.
pub trait ColumnPicker {
    /// Uniform draw in `[0, 1)`.
    fn uniform(&mut self) -> f64;

    /// Picks an index with probability proportional to `weights`; `total` is
    /// their positive sum.
    fn pick(&mut self, weights: &[f64], total: f64) -> usize {
        let target = self.uniform() * total;
        let mut cum = 0.0;
        let mut last_positive = 0;
        for (idx, &w) in weights.iter().enumerate() {
            if w <= 0.0 {
                continue;
            }
            cum += w;
            last_positive = idx;
            if target < cum {
                return idx;
            }
        }
        last_positive
    }
}

/// Random sampling from a seeded generator.
#[derive(Debug, Clone)]
pub struct Sampling<R>(pub R);

impl<R: Rng> ColumnPicker for Sampling<R> {
    fn uniform(&mut self) -> f64 {
        self.0.random::<f64>()
    }
}

/// Always takes the most probable available column (lowest index on ties).
#[derive(Debug, Clone, Copy, Default)]
pub struct Greedy;

impl ColumnPicker for Greedy {
    fn uniform(&mut self) -> f64 {
        0.5
    }

    fn pick(&mut self, weights: &[f64], _total: f64) -> usize {
        let mut best = 0;
        for (idx, &w) in weights.iter().enumerate() {
            if w > weights[best] {
                best = idx;
            }
        }
        best
    }
}

/// One association hypothesis.
#[derive(Debug, Clone, PartialEq)]
pub struct Particle {
    pub weight: f64,
    /// Assignment sampled in the latest step, one entry per detection.
    pub assignment: Vec<Column>,
    /// Sum of log sampled probabilities over the particle's lineage.
    pub log_likelihood: f64,
    pub new_tracks: u64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ParticleSet {
    particles: Vec<Particle>,
}

impl ParticleSet {
    pub fn new(count: usize) -> Self {
        assert!(count >= 1, "particle count must be at least 1");
        let w = 1.0 / count as f64;
        Self {
            particles: vec![
                Particle { weight: w, assignment: Vec::new(), log_likelihood: 0.0, new_tracks: 0 };
                count
            ],
        }
    }

    pub fn len(&self) -> usize {
        self.particles.len()
    }

    pub fn is_empty(&self) -> bool {
        self.particles.is_empty()
    }

    pub fn particles(&self) -> &[Particle] {
        &self.particles
    }

    pub fn weights(&self) -> impl Iterator<Item = f64> + '_ {
        self.particles.iter().map(|p| p.weight)
    }

    pub fn effective_sample_size(&self) -> f64 {
        1.0 / self.particles.iter().map(|p| p.weight * p.weight).sum::<f64>()
    }

    fn normalize(&mut self) {
        let total: f64 = self.weights().sum();
        let n = self.particles.len() as f64;
        for p in &mut self.particles {
            p.weight = if total > 0.0 && total.is_finite() { p.weight / total } else { 1.0 / n };
        }
    }

    fn systematic_resample<P: ColumnPicker>(&mut self, picker: &mut P) {
        let n = self.particles.len();
        let step = 1.0 / n as f64;
        let mut position = picker.uniform() * step;
        let mut cum = self.particles[0].weight;
        let mut src = 0;
        let mut out = Vec::with_capacity(n);
        for _ in 0..n {
            while position >= cum && src + 1 < n {
                src += 1;
                cum += self.particles[src].weight;
            }
            let mut p = self.particles[src].clone();
            p.weight = step;
            out.push(p);
            position += step;
        }
        self.particles = out;
    }

    fn best(&self) -> &Particle {
        let mut best = &self.particles[0];
        for p in &self.particles[1..] {
            if p.weight > best.weight {
                best = p;
            }
        }
        best
    }
}

/// Samples a one-to-one assignment per particle (detections in row order,
/// NEW_TRACK always available), reweights, resamples when the effective
/// sample size drops below half the particle count, and returns the
/// assignment of the highest-weight particle.
pub fn rbpf_step<P: ColumnPicker>(
    mut ps: ParticleSet,
    a: &AssociationMatrix,
    picker: &mut P,
) -> (ParticleSet, Vec<Column>) {
    let cols = a.cols();
    let new_col = a.new_track_col();
    let mut restricted = vec![0.0; cols];
    let mut taken = vec![false; a.tracks()];

    for particle in &mut ps.particles {
        taken.iter_mut().for_each(|t| *t = false);
        particle.assignment.clear();
        for i in 0..a.detections() {
            let row = a.row(i);
            for (j, slot) in restricted.iter_mut().enumerate() {
                *slot = if j < new_col && taken[j] { 0.0 } else { row[j] };
            }
            let total: f64 = restricted.iter().sum();
            let idx = if total > 0.0 { picker.pick(&restricted, total) } else { new_col };
            let col = a.column_of(idx);
            if let Column::Track(j) = col {
                taken[j] = true;
            } else {
                particle.new_tracks += 1;
            }
            particle.weight *= row[idx];
            particle.log_likelihood += row[idx].ln();
            particle.assignment.push(col);
        }
    }
    ps.normalize();

    let consensus = ps.best().assignment.clone();
    if ps.effective_sample_size() < ps.len() as f64 / 2.0 {
        ps.systematic_resample(picker);
    }
    (ps, consensus)
}
