//! Range families over locations: membership predicates, VC descriptors, and
//! finite canonical covers for exact verification.
//!
//! Two ranges inducing the same subset of the certified set answer every
//! query identically, so a cover built from midpoints between consecutive
//! distinct coordinates is exhaustive for verification.

use crate::exact::{mix_seed, rat, ExtCoord, Rat};
use crate::model::{CertifiedSet, UncertainPoint};
use num_traits::Zero;
use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use std::fmt;

#[derive(Debug, thiserror::Error, PartialEq, Eq)]
pub enum RangeError {
    #[error("dimension mismatch: range is {range}-dimensional, point is {point}-dimensional")]
    DimensionMismatch { range: usize, point: usize },
    #[error("invalid bounds: lower {0} exceeds upper {1}")]
    InvalidBounds(String, String),
    #[error("family {0:?} not supported here")]
    UnsupportedFamily(FamilyKind),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FamilyKind {
    HalfLine,
    Interval,
    Rect,
}

impl fmt::Display for FamilyKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            FamilyKind::HalfLine => write!(f, "halfline"),
            FamilyKind::Interval => write!(f, "interval"),
            FamilyKind::Rect => write!(f, "rect"),
        }
    }
}

/// A range family plus the VC dimension used in sampling bounds.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct FamilyDescriptor {
    pub kind: FamilyKind,
    pub dim: usize,
    pub vc_dim: usize,
}

impl FamilyDescriptor {
    pub fn half_line() -> Self {
        FamilyDescriptor { kind: FamilyKind::HalfLine, dim: 1, vc_dim: 1 }
    }

    pub fn interval() -> Self {
        FamilyDescriptor { kind: FamilyKind::Interval, dim: 1, vc_dim: 2 }
    }

    pub fn rect(dim: usize) -> Self {
        FamilyDescriptor { kind: FamilyKind::Rect, dim, vc_dim: 2 * dim }
    }

    pub fn new(kind: FamilyKind, dim: usize) -> Self {
        match kind {
            FamilyKind::HalfLine => Self::half_line(),
            FamilyKind::Interval => Self::interval(),
            FamilyKind::Rect => Self::rect(dim),
        }
    }
}

/// A concrete query range.
///
/// `ThresholdWindow` is the three-sided product `[a, inf) x (-inf, b] x
/// (b, inf)` consumed by the threshold lifting; `DominanceBox` is the
/// semi-bounded box `prod ((-inf, a_i] x (a_i, inf))` stabbed by lifted box
/// corners. Interval and rectangle sides are closed; only the lifted shapes
/// carry strict sides.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Range {
    HalfLine { x: Rat },
    Interval { a: Rat, b: Rat },
    Rect { bounds: Vec<(Rat, Rat)> },
    NegOrthant { apex: Vec<ExtCoord> },
    ThresholdWindow { a: Rat, b: Rat },
    DominanceBox { apex: Vec<Rat> },
}

impl Range {
    pub fn interval(a: Rat, b: Rat) -> Result<Self, RangeError> {
        if a > b {
            return Err(RangeError::InvalidBounds(a.to_string(), b.to_string()));
        }
        Ok(Range::Interval { a, b })
    }

    pub fn rect(bounds: Vec<(Rat, Rat)>) -> Result<Self, RangeError> {
        for (a, b) in &bounds {
            if a > b {
                return Err(RangeError::InvalidBounds(a.to_string(), b.to_string()));
            }
        }
        Ok(Range::Rect { bounds })
    }

    /// Dimension of the points this range applies to.
    pub fn dim(&self) -> usize {
        match self {
            Range::HalfLine { .. } | Range::Interval { .. } => 1,
            Range::Rect { bounds } => bounds.len(),
            Range::NegOrthant { apex } => apex.len(),
            Range::ThresholdWindow { .. } => 3,
            Range::DominanceBox { apex } => 2 * apex.len(),
        }
    }

    pub fn contains(&self, p: &[Rat]) -> Result<bool, RangeError> {
        if p.len() != self.dim() {
            return Err(RangeError::DimensionMismatch { range: self.dim(), point: p.len() });
        }
        Ok(match self {
            Range::HalfLine { x } => p[0] <= *x,
            Range::Interval { a, b } => *a <= p[0] && p[0] <= *b,
            Range::Rect { bounds } => {
                bounds.iter().zip(p).all(|((a, b), v)| a <= v && v <= b)
            }
            Range::NegOrthant { apex } => {
                apex.iter().zip(p).all(|(a, v)| ExtCoord::Fin(v.clone()) <= *a)
            }
            Range::ThresholdWindow { a, b } => p[0] >= *a && p[1] <= *b && p[2] > *b,
            Range::DominanceBox { apex } => apex
                .iter()
                .enumerate()
                .all(|(i, a)| p[2 * i] <= *a && p[2 * i + 1] > *a),
        })
    }

    /// Membership for points carrying infinity sentinels (lifted points).
    pub fn contains_ext(&self, p: &[ExtCoord]) -> Result<bool, RangeError> {
        if p.len() != self.dim() {
            return Err(RangeError::DimensionMismatch { range: self.dim(), point: p.len() });
        }
        Ok(match self {
            Range::ThresholdWindow { a, b } => {
                p[0] >= ExtCoord::Fin(a.clone())
                    && p[1] <= ExtCoord::Fin(b.clone())
                    && p[2] > ExtCoord::Fin(b.clone())
            }
            Range::NegOrthant { apex } => apex.iter().zip(p).all(|(a, v)| v <= a),
            Range::DominanceBox { apex } => apex.iter().enumerate().all(|(i, a)| {
                p[2 * i] <= ExtCoord::Fin(a.clone()) && p[2 * i + 1] > ExtCoord::Fin(a.clone())
            }),
            _ => {
                let finite: Option<Vec<Rat>> = p.iter().map(|c| c.finite().cloned()).collect();
                match finite {
                    Some(coords) => self.contains(&coords)?,
                    None => false,
                }
            }
        })
    }
}

impl fmt::Display for Range {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        use crate::exact::format_rat as fr;
        match self {
            Range::HalfLine { x } => write!(f, "(-inf, {}]", fr(x)),
            Range::Interval { a, b } => write!(f, "[{}, {}]", fr(a), fr(b)),
            Range::Rect { bounds } => {
                let parts: Vec<String> =
                    bounds.iter().map(|(a, b)| format!("[{}, {}]", fr(a), fr(b))).collect();
                write!(f, "{}", parts.join(" x "))
            }
            Range::NegOrthant { apex } => {
                let parts: Vec<String> = apex.iter().map(|a| format!("(-inf, {a}]")).collect();
                write!(f, "{}", parts.join(" x "))
            }
            Range::ThresholdWindow { a, b } => {
                write!(f, "[{}, inf) x (-inf, {}] x ({}, inf)", fr(a), fr(b), fr(b))
            }
            Range::DominanceBox { apex } => {
                let parts: Vec<String> =
                    apex.iter().map(|a| format!("(-inf, {}] x ({}, inf)", fr(a), fr(a))).collect();
                write!(f, "{}", parts.join(" x "))
            }
        }
    }
}

/// Probability that an uncertain point lands in `r`: an exact multiple of
/// `1/k`.
pub fn inclusion_prob(p: &UncertainPoint, r: &Range) -> Result<Rat, RangeError> {
    let mut hits = 0i64;
    for loc in &p.locations {
        if r.contains(loc)? {
            hits += 1;
        }
    }
    Ok(rat(hits, p.k() as i64))
}

/// Budget for covers whose full size is super-quadratic (rectangles).
#[derive(Clone, Copy, Debug)]
pub struct CoverConfig {
    pub budget: usize,
    pub seed: u64,
}

impl Default for CoverConfig {
    fn default() -> Self {
        CoverConfig { budget: 100_000, seed: 0xC0FFEE }
    }
}

/// Midpoints between consecutive distinct values, with sentinels below the
/// minimum and above the maximum. Every subset a half-line can induce is
/// induced by cutting at one of these.
fn cuts(values: &mut Vec<Rat>) -> Vec<Rat> {
    values.sort();
    values.dedup();
    if values.is_empty() {
        return vec![Rat::zero()];
    }
    let one = rat(1, 1);
    let half = rat(1, 2);
    let mut cuts = Vec::with_capacity(values.len() + 1);
    cuts.push(values[0].clone() - &one);
    for w in values.windows(2) {
        cuts.push((&w[0] + &w[1]) * &half);
    }
    cuts.push(values[values.len() - 1].clone() + &one);
    cuts
}

/// A finite set of ranges such that every range in the family induces the
/// same subset of `c` as some returned range. Exact for half-lines and
/// intervals; rectangle covers are capped at `cfg.budget` and uniformly
/// subsampled beyond it.
pub fn canonical_ranges_with(
    c: &CertifiedSet,
    f: &FamilyDescriptor,
    cfg: CoverConfig,
) -> Result<Vec<Range>, RangeError> {
    let axis_cuts: Vec<Vec<Rat>> = (0..c.d)
        .map(|axis| {
            let mut vals: Vec<Rat> = c.entries.iter().map(|e| e.coords[axis].clone()).collect();
            cuts(&mut vals)
        })
        .collect();
    match f.kind {
        FamilyKind::HalfLine => {
            Ok(axis_cuts[0].iter().cloned().map(|x| Range::HalfLine { x }).collect())
        }
        FamilyKind::Interval => {
            let cs = &axis_cuts[0];
            let mut out = Vec::with_capacity(cs.len() * (cs.len() + 1) / 2);
            for i in 0..cs.len() {
                for j in i..cs.len() {
                    out.push(Range::Interval { a: cs[i].clone(), b: cs[j].clone() });
                }
            }
            Ok(out)
        }
        FamilyKind::Rect => {
            let per_axis: Vec<usize> =
                axis_cuts.iter().map(|cs| cs.len() * (cs.len() + 1) / 2).collect();
            let total: u128 = per_axis.iter().map(|&m| m as u128).product();
            if total <= cfg.budget as u128 {
                let mut out = Vec::with_capacity(total as usize);
                let mut stack = vec![Vec::new()];
                for cs in &axis_cuts {
                    let mut next = Vec::new();
                    for partial in &stack {
                        for i in 0..cs.len() {
                            for j in i..cs.len() {
                                let mut b: Vec<(Rat, Rat)> = partial.clone();
                                b.push((cs[i].clone(), cs[j].clone()));
                                next.push(b);
                            }
                        }
                    }
                    stack = next;
                }
                for b in stack {
                    out.push(Range::Rect { bounds: b });
                }
                Ok(out)
            } else {
                let mut rng = ChaCha8Rng::seed_from_u64(mix_seed(cfg.seed, 0x636f_7665, 0));
                let mut out = Vec::with_capacity(cfg.budget);
                for _ in 0..cfg.budget {
                    let bounds = axis_cuts
                        .iter()
                        .map(|cs| {
                            let i = rng.random_range(0..cs.len());
                            let j = rng.random_range(0..cs.len());
                            let (lo, hi) = if i <= j { (i, j) } else { (j, i) };
                            (cs[lo].clone(), cs[hi].clone())
                        })
                        .collect();
                    out.push(Range::Rect { bounds });
                }
                Ok(out)
            }
        }
    }
}

pub fn canonical_ranges(c: &CertifiedSet, f: &FamilyDescriptor) -> Result<Vec<Range>, RangeError> {
    canonical_ranges_with(c, f, CoverConfig::default())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::datasets;
    use crate::exact::{rat_int, ExtCoord};
    use crate::model::UncertainPoint;
    use num_traits::One;
    use std::collections::HashSet;

    fn hl(x: f64) -> Range {
        Range::HalfLine { x: crate::exact::rat_f64(x) }
    }

    #[test]
    fn half_line_contains() {
        assert!(hl(13.5).contains(&[rat_int(13)]).unwrap());
        assert!(!hl(13.5).contains(&[rat_int(14)]).unwrap());
    }

    #[test]
    fn interval_closed_endpoints() {
        let r = Range::interval(rat_int(3), rat_int(3)).unwrap();
        assert!(r.contains(&[rat_int(3)]).unwrap());
        assert!(Range::interval(rat_int(4), rat_int(3)).is_err());
    }

    #[test]
    fn rect_membership() {
        let r = Range::rect(vec![(rat(3, 2), rat(7, 2)), (rat(5, 2), rat(9, 2))]).unwrap();
        assert!(r.contains(&[rat_int(3), rat_int(3)]).unwrap());
        assert!(!r.contains(&[rat_int(2), rat_int(1)]).unwrap());
        assert!(r.contains(&[rat_int(3)]).is_err(), "dimension mismatch");
    }

    #[test]
    fn threshold_window_strict_third() {
        let r = Range::ThresholdWindow { a: rat_int(2), b: rat_int(6) };
        assert!(r.contains(&[rat_int(3), rat_int(5), rat_int(7)]).unwrap());
        assert!(!r.contains(&[rat_int(3), rat_int(5), rat_int(6)]).unwrap());
        assert!(r
            .contains_ext(&[
                ExtCoord::Fin(rat_int(3)),
                ExtCoord::Fin(rat_int(5)),
                ExtCoord::PosInf
            ])
            .unwrap());
    }

    #[test]
    fn inclusion_prob_examples() {
        let p = datasets::interleaved_ten();
        let p3 = &p.points()[2];
        assert_eq!(inclusion_prob(p3, &hl(13.5)).unwrap(), Rat::one());
        // an empty range
        let empty = Range::interval(rat_int(100), rat_int(100)).unwrap();
        assert_eq!(inclusion_prob(p3, &empty).unwrap(), Rat::zero());
        let q = UncertainPoint::new(
            1,
            vec![vec![rat_int(1)], vec![rat_int(3)], vec![rat_int(5)], vec![rat_int(7)]],
        );
        let r = Range::interval(rat_int(2), rat_int(6)).unwrap();
        assert_eq!(inclusion_prob(&q, &r).unwrap(), rat(2, 4));
    }

    #[test]
    fn half_line_cover_sizes() {
        let vals = UncertainPoint::new(1, vec![vec![rat_int(1)], vec![rat_int(2)], vec![rat_int(3)]]);
        let set = crate::model::UncertainPointSet::new(vec![vals]).unwrap();
        let cover =
            canonical_ranges(&set.certify(), &FamilyDescriptor::half_line()).unwrap();
        assert_eq!(cover.len(), 4);

        let fx = datasets::interleaved_ten();
        let cover = canonical_ranges(&fx.certify(), &FamilyDescriptor::half_line()).unwrap();
        assert_eq!(cover.len(), 21);
        // one of them separates 13 from 14
        assert!(cover.iter().any(|r| match r {
            Range::HalfLine { x } => *x >= rat_int(13) && *x < rat_int(14),
            _ => false,
        }));
    }

    #[test]
    fn interval_cover_realizes_all_subsets() {
        let two = UncertainPoint::new(1, vec![vec![rat_int(1)], vec![rat_int(2)]]);
        let set = crate::model::UncertainPointSet::new(vec![two]).unwrap();
        let c = set.certify();
        let cover = canonical_ranges(&c, &FamilyDescriptor::interval()).unwrap();
        let mut subsets = HashSet::new();
        for r in &cover {
            let mut s = Vec::new();
            for (i, e) in c.entries.iter().enumerate() {
                if r.contains(&e.coords).unwrap() {
                    s.push(i);
                }
            }
            subsets.insert(s);
        }
        assert_eq!(subsets.len(), 4, "{{}}, {{1}}, {{2}}, {{1,2}}");
    }

    #[test]
    fn cover_is_exhaustive_for_random_ranges() {
        // any half-line/interval induces the same subset as some cover range
        let set = datasets::random_uniform(6, 2, 1, 17);
        let c = set.certify();
        for f in [FamilyDescriptor::half_line(), FamilyDescriptor::interval()] {
            let cover = canonical_ranges(&c, &f).unwrap();
            let cover_subsets: HashSet<Vec<usize>> = cover
                .iter()
                .map(|r| {
                    (0..c.entries.len())
                        .filter(|&i| r.contains(&c.entries[i].coords).unwrap())
                        .collect()
                })
                .collect();
            let mut rng = ChaCha8Rng::seed_from_u64(99);
            for _ in 0..200 {
                let a = rat(rng.random_range(-10..400), 3);
                let b = &a + rat_int(rng.random_range(0..300));
                let r = match f.kind {
                    FamilyKind::HalfLine => Range::HalfLine { x: a },
                    _ => Range::Interval { a, b },
                };
                let subset: Vec<usize> = (0..c.entries.len())
                    .filter(|&i| r.contains(&c.entries[i].coords).unwrap())
                    .collect();
                assert!(cover_subsets.contains(&subset), "unrealized subset for {r}");
            }
        }
    }

    #[test]
    fn rect_cover_budget() {
        let set = datasets::random_uniform(40, 2, 2, 23);
        let cfg = CoverConfig { budget: 500, seed: 1 };
        let cover = canonical_ranges_with(&set.certify(), &FamilyDescriptor::rect(2), cfg).unwrap();
        assert_eq!(cover.len(), 500);
        for r in &cover {
            if let Range::Rect { bounds } = r {
                assert!(bounds.iter().all(|(a, b)| a <= b));
            } else {
                panic!("expected rect");
            }
        }
    }

    #[test]
    fn monotone_under_inclusion() {
        let p = datasets::random_uniform(8, 3, 1, 31);
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..100 {
            let a = rat_int(rng.random_range(0..150));
            let b = &a + rat_int(rng.random_range(0..100));
            let wide = Range::Interval { a: a.clone() - rat_int(5), b: &b + rat_int(5) };
            let narrow = Range::Interval { a, b };
            for pt in p.points() {
                assert!(
                    inclusion_prob(pt, &narrow).unwrap() <= inclusion_prob(pt, &wide).unwrap()
                );
            }
        }
    }
}
