//! Per-person appearance feature stores.
//!
//! A [`Gallery`] keeps either every feature ever inserted ([`Strategy::Full`])
//! or one running-average slot per bin. Binned storage is O(persons x bins)
//! regardless of how many features arrive.

use std::collections::BTreeMap;
use std::fmt;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

pub type PersonId = u64;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GalleryError {
    #[error("feature dimension {got} does not match gallery dimension {expected}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("bin {bin} out of range for {bins} bins")]
    BinOutOfRange { bin: usize, bins: usize },
    #[error("unknown person {0}")]
    UnknownPerson(PersonId),
    #[error("person {0} has no stored features")]
    EmptyPerson(PersonId),
    #[error("gallery is empty")]
    EmptyGallery,
}

/// Appearance embedding of one detection.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureVector(Vec<f64>);

impl FeatureVector {
    pub fn new(values: Vec<f64>) -> Self {
        Self(values)
    }

    pub fn zeros(dim: usize) -> Self {
        Self(vec![0.0; dim])
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn distance(&self, other: &FeatureVector) -> f64 {
        debug_assert_eq!(self.dim(), other.dim());
        self.0
            .iter()
            .zip(&other.0)
            .map(|(a, b)| (a - b) * (a - b))
            .sum::<f64>()
            .sqrt()
    }

    pub fn norm(&self) -> f64 {
        self.0.iter().map(|v| v * v).sum::<f64>().sqrt()
    }
}

impl From<Vec<f64>> for FeatureVector {
    fn from(v: Vec<f64>) -> Self {
        Self(v)
    }
}

/// Running arithmetic mean of the features assigned to one bin.
#[derive(Debug, Clone, PartialEq)]
pub struct BinSlot {
    mean: FeatureVector,
    count: u64,
}

impl BinSlot {
    pub fn new(dim: usize) -> Self {
        Self { mean: FeatureVector::zeros(dim), count: 0 }
    }

    pub fn mean(&self) -> &FeatureVector {
        &self.mean
    }

    pub fn count(&self) -> u64 {
        self.count
    }

    pub fn is_empty(&self) -> bool {
        self.count == 0
    }

    /// Folds one feature into the mean. The dimension must match.
    pub fn push(&mut self, feat: &FeatureVector) {
        self.count += 1;
        let n = self.count as f64;
        for (m, x) in self.mean.0.iter_mut().zip(&feat.0) {
            *m += (x - *m) / n;
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Strategy {
    /// Every inserted feature is kept.
    Full,
    /// A single running average per person.
    Averaged,
    /// Running averages in `bins` slots, each feature going to a random slot.
    RandomBins { bins: usize, seed: u64 },
    /// Running averages in `bins` orientation slots chosen by the caller.
    OrientationBins { bins: usize },
}

impl Strategy {
    /// Number of slots per person; `None` for unbounded storage.
    pub fn bins(&self) -> Option<usize> {
        match *self {
            Strategy::Full => None,
            Strategy::Averaged => Some(1),
            Strategy::RandomBins { bins, .. } | Strategy::OrientationBins { bins } => Some(bins),
        }
    }
}

impl fmt::Display for Strategy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Strategy::Full => write!(f, "full"),
            Strategy::Averaged => write!(f, "avg"),
            Strategy::RandomBins { bins, .. } => write!(f, "random:{bins}"),
            Strategy::OrientationBins { bins } => write!(f, "orient:{bins}"),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
enum Store {
    Full(Vec<FeatureVector>),
    Binned(Vec<BinSlot>),
}

impl Store {
    fn candidates(&self) -> Box<dyn Iterator<Item = &FeatureVector> + '_> {
        match self {
            Store::Full(all) => Box::new(all.iter()),
            Store::Binned(slots) => Box::new(slots.iter().filter(|s| !s.is_empty()).map(|s| &s.mean)),
        }
    }

    fn vector_count(&self) -> usize {
        match self {
            Store::Full(all) => all.len(),
            Store::Binned(slots) => slots.iter().filter(|s| !s.is_empty()).count(),
        }
    }
}

#[derive(Debug, Clone)]
pub struct Gallery {
    strategy: Strategy,
    dim: usize,
    persons: BTreeMap<PersonId, Store>,
    rng: Option<ChaCha8Rng>,
}

impl Gallery {
    pub fn new(strategy: Strategy, dim: usize) -> Self {
        if let Some(bins) = strategy.bins() {
            assert!(bins >= 1, "binned gallery needs at least one bin");
        }
        let rng = match strategy {
            Strategy::RandomBins { seed, .. } => Some(ChaCha8Rng::seed_from_u64(seed)),
            _ => None,
        };
        Self { strategy, dim, persons: BTreeMap::new(), rng }
    }

    pub fn strategy(&self) -> Strategy {
        self.strategy
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn is_empty(&self) -> bool {
        self.persons.is_empty()
    }

    pub fn persons(&self) -> impl Iterator<Item = PersonId> + '_ {
        self.persons.keys().copied()
    }

    pub fn contains(&self, person: PersonId) -> bool {
        self.persons.contains_key(&person)
    }

    pub fn remove(&mut self, person: PersonId) {
        self.persons.remove(&person);
    }

    /// Total number of stored vectors (non-empty slots for binned strategies).
    pub fn stored_vectors(&self) -> usize {
        self.persons.values().map(Store::vector_count).sum()
    }

    /// Slots of a person under a binned strategy.
    pub fn slots(&self, person: PersonId) -> Option<&[BinSlot]> {
        match self.persons.get(&person)? {
            Store::Binned(slots) => Some(slots),
            Store::Full(_) => None,
        }
    }

    /// All features of a person under [`Strategy::Full`], in insertion order.
    pub fn history(&self, person: PersonId) -> Option<&[FeatureVector]> {
        match self.persons.get(&person)? {
            Store::Full(all) => Some(all),
            Store::Binned(_) => None,
        }
    }

    /// Adds a feature for `person`. `bin` is only consulted by
    /// [`Strategy::OrientationBins`].
    pub fn insert(&mut self, person: PersonId, feat: &FeatureVector, bin: usize) -> Result<(), GalleryError> {
        if feat.dim() != self.dim {
            return Err(GalleryError::DimensionMismatch { expected: self.dim, got: feat.dim() });
        }
        let target = match self.strategy {
            Strategy::Full => None,
            Strategy::Averaged => Some(0),
            Strategy::RandomBins { bins, .. } => {
                let rng = self.rng.as_mut().expect("random strategy owns a generator");
                Some(rng.random_range(0..bins))
            }
            Strategy::OrientationBins { bins } => {
                if bin >= bins {
                    return Err(GalleryError::BinOutOfRange { bin, bins });
                }
                Some(bin)
            }
        };
        let dim = self.dim;
        let bins = self.strategy.bins();
        let store = self.persons.entry(person).or_insert_with(|| match bins {
            None => Store::Full(Vec::new()),
            Some(b) => Store::Binned(vec![BinSlot::new(dim); b]),
        });
        match (store, target) {
            (Store::Full(all), _) => all.push(feat.clone()),
            (Store::Binned(slots), Some(t)) => slots[t].push(feat),
            (Store::Binned(_), None) => unreachable!("binned store always has a target slot"),
        }
        Ok(())
    }

    /// Euclidean distance from `feat` to the closest stored vector of `person`.
    pub fn min_distance(&self, person: PersonId, feat: &FeatureVector) -> Result<f64, GalleryError> {
        if feat.dim() != self.dim {
            return Err(GalleryError::DimensionMismatch { expected: self.dim, got: feat.dim() });
        }
        let store = self.persons.get(&person).ok_or(GalleryError::UnknownPerson(person))?;
        store
            .candidates()
            .map(|c| c.distance(feat))
            .min_by(f64::total_cmp)
            .ok_or(GalleryError::EmptyPerson(person))
    }

    /// Closest person to `feat`; ties go to the smallest id.
    pub fn nearest_person(&self, feat: &FeatureVector) -> Result<(PersonId, f64), GalleryError> {
        let mut best: Option<(PersonId, f64)> = None;
        for &person in self.persons.keys() {
            let d = match self.min_distance(person, feat) {
                Ok(d) => d,
                Err(GalleryError::EmptyPerson(_)) => continue,
                Err(e) => return Err(e),
            };
            // Ascending id order means strict comparison keeps the smallest id on ties.
            if best.is_none_or(|(_, bd)| d < bd) {
                best = Some((person, d));
            }
        }
        best.ok_or(GalleryError::EmptyGallery)
    }
}
