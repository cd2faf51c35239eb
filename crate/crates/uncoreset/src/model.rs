//! Uncertain point sets: each point takes one of `k` discrete locations,
//! uniformly at random and independently of the other points.

use crate::exact::{mix_seed, Rat};
use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use std::cmp::Ordering;
use std::collections::HashSet;

pub type PointId = i64;

#[derive(Debug, thiserror::Error, PartialEq, Eq)]
pub enum ModelError {
    #[error("point set must be non-empty")]
    Empty,
    #[error("point {0} has no locations")]
    NoLocations(PointId),
    #[error("duplicate point id {0}")]
    DuplicateId(PointId),
    #[error("point {id}: expected {expected} locations, found {found}")]
    LocationCountMismatch { id: PointId, expected: usize, found: usize },
    #[error("point {id}: expected dimension {expected}, found {found}")]
    DimensionMismatch { id: PointId, expected: usize, found: usize },
    #[error("location index {index} out of range (k = {k})")]
    IndexOutOfRange { index: usize, k: usize },
    #[error("unknown point id {0}")]
    UnknownId(PointId),
}

/// One uncertain point: an id plus its `k` candidate locations, each with
/// probability exactly `1/k`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct UncertainPoint {
    pub id: PointId,
    pub locations: Vec<Vec<Rat>>,
}

impl UncertainPoint {
    pub fn new(id: PointId, locations: Vec<Vec<Rat>>) -> Self {
        UncertainPoint { id, locations }
    }

    pub fn k(&self) -> usize {
        self.locations.len()
    }

    pub fn dim(&self) -> usize {
        self.locations.first().map_or(0, |l| l.len())
    }
}

/// A validated set of uncertain points sharing `k` and `d`.
///
/// Location probabilities are hard-wired uniform: the ingestion formats have
/// no weight field and none is accepted.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct UncertainPointSet {
    points: Vec<UncertainPoint>,
    k: usize,
    d: usize,
}

impl UncertainPointSet {
    pub fn new(points: Vec<UncertainPoint>) -> Result<Self, ModelError> {
        let first = points.first().ok_or(ModelError::Empty)?;
        let k = first.k();
        let d = first.dim();
        if k == 0 {
            return Err(ModelError::NoLocations(first.id));
        }
        if d == 0 {
            return Err(ModelError::DimensionMismatch { id: first.id, expected: 1, found: 0 });
        }
        let mut seen = HashSet::with_capacity(points.len());
        for p in &points {
            if !seen.insert(p.id) {
                return Err(ModelError::DuplicateId(p.id));
            }
            if p.k() != k {
                return Err(ModelError::LocationCountMismatch { id: p.id, expected: k, found: p.k() });
            }
            for loc in &p.locations {
                if loc.len() != d {
                    return Err(ModelError::DimensionMismatch { id: p.id, expected: d, found: loc.len() });
                }
            }
        }
        Ok(UncertainPointSet { points, k, d })
    }

    pub fn points(&self) -> &[UncertainPoint] {
        &self.points
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn dim(&self) -> usize {
        self.d
    }

    /// The `j`-th canonical traversal (0-based): every point's `j`-th location.
    pub fn traversal(&self, j: usize) -> Result<Vec<(PointId, &[Rat])>, ModelError> {
        if j >= self.k {
            return Err(ModelError::IndexOutOfRange { index: j, k: self.k });
        }
        Ok(self
            .points
            .iter()
            .map(|p| (p.id, p.locations[j].as_slice()))
            .collect())
    }

    /// Flattens to the certified set of all `n * k` locations.
    pub fn certify(&self) -> CertifiedSet {
        let mut entries = Vec::with_capacity(self.len() * self.k);
        for p in &self.points {
            for (j, loc) in p.locations.iter().enumerate() {
                entries.push(CertifiedEntry { id: p.id, loc_index: j, coords: loc.clone() });
            }
        }
        CertifiedSet { entries, n: self.len(), k: self.k, d: self.d }
    }

    /// Draws one transversal: an independent uniform location choice per
    /// point. Deterministic given the seed.
    pub fn instantiate(&self, seed: u64) -> Transversal {
        let mut rng = ChaCha8Rng::seed_from_u64(mix_seed(seed, 0x7261_6e64, 0));
        let choices = self
            .points
            .iter()
            .map(|p| (p.id, rng.random_range(0..self.k)))
            .collect();
        Transversal { choices }
    }

    /// The subset containing exactly the points with the given ids, with all
    /// location data intact, preserving this set's point order.
    pub fn subset_by_ids(&self, ids: &[PointId]) -> Result<UncertainPointSet, ModelError> {
        let want: HashSet<PointId> = ids.iter().copied().collect();
        for id in ids {
            if !self.points.iter().any(|p| p.id == *id) {
                return Err(ModelError::UnknownId(*id));
            }
        }
        let points: Vec<UncertainPoint> =
            self.points.iter().filter(|p| want.contains(&p.id)).cloned().collect();
        UncertainPointSet::new(points)
    }

    /// Same uncertain set with each point's locations sorted ascending
    /// (d = 1 only meaningful; ties keep input order). Location order within
    /// a point carries no probability information, so this is semantics
    /// preserving; the threshold machinery requires the sorted form.
    pub fn with_sorted_locations(&self) -> UncertainPointSet {
        let points = self
            .points
            .iter()
            .map(|p| {
                let mut locs = p.locations.clone();
                locs.sort_by(|a, b| lex_cmp(a, b));
                UncertainPoint::new(p.id, locs)
            })
            .collect();
        UncertainPointSet { points, k: self.k, d: self.d }
    }

    pub fn position_of(&self, id: PointId) -> Option<usize> {
        self.points.iter().position(|p| p.id == id)
    }

    pub fn ids(&self) -> Vec<PointId> {
        self.points.iter().map(|p| p.id).collect()
    }
}

fn lex_cmp(a: &[Rat], b: &[Rat]) -> Ordering {
    for (x, y) in a.iter().zip(b) {
        match x.cmp(y) {
            Ordering::Equal => continue,
            other => return other,
        }
    }
    Ordering::Equal
}

/// One instantiation: a location index per point, aligned with the parent
/// set's point order.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Transversal {
    pub choices: Vec<(PointId, usize)>,
}

/// A flattened location: owning point, location index within it, coordinates.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct CertifiedEntry {
    pub id: PointId,
    pub loc_index: usize,
    pub coords: Vec<Rat>,
}

impl CertifiedEntry {
    /// Total order used everywhere a 1D sort happens: (value, id, location
    /// index). Makes all derived permutations unique even with ties.
    pub fn sort_key_1d(&self) -> (&Rat, PointId, usize) {
        (&self.coords[0], self.id, self.loc_index)
    }
}

/// All `n * k` certified locations of an uncertain point set.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct CertifiedSet {
    pub entries: Vec<CertifiedEntry>,
    pub n: usize,
    pub k: usize,
    pub d: usize,
}

impl CertifiedSet {
    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Entries restricted to one location index, in point order.
    pub fn traversal_entries(&self, j: usize) -> Vec<&CertifiedEntry> {
        self.entries.iter().filter(|e| e.loc_index == j).collect()
    }
}
