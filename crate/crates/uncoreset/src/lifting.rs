//! Reductions that turn threshold range counting into exact point counting:
//! the 3D window lifting for two-sided intervals, coordinate doubling to
//! negative orthants, tight-orthant apex sets, disjoint box decompositions of
//! their dominance region, and the box-to-point lifting stabbed by query
//! apexes.

use crate::exact::{ExtCoord, Rat};
use crate::model::{PointId, UncertainPoint, UncertainPointSet};
use crate::ranges::{Range, RangeError};

#[derive(Debug, thiserror::Error, PartialEq)]
pub enum LiftError {
    #[error("threshold {t} out of range [1, {k}]")]
    BadThreshold { t: usize, k: usize },
    #[error("locations must be sorted ascending for the window lifting")]
    Unsorted,
    #[error("supported for original dimension 1 or 2, got {0}")]
    UnsupportedDim(usize),
    #[error(transparent)]
    Range(#[from] RangeError),
}

/// One window of `t` consecutive sorted locations, represented as a 3D point
/// `(first, last, successor)` with `+inf` standing in for the missing
/// successor of the rightmost window.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct LiftedPoint {
    pub owner: PointId,
    pub t: usize,
    pub coords: Vec<ExtCoord>,
}

/// Apexes of the tight negative orthants containing exactly `t` doubled
/// locations of one point.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ApexSet {
    pub owner: PointId,
    pub t: usize,
    pub apexes: Vec<Vec<Rat>>,
}

/// Pairwise disjoint boxes covering the union of positive orthants of an
/// apex set. Sides are closed below and open above; `hi = +inf` marks an
/// unbounded side.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct BoxSet {
    pub owner: PointId,
    pub t: usize,
    pub boxes: Vec<DisjointBox>,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct DisjointBox {
    pub lo: Vec<Rat>,
    pub hi: Vec<ExtCoord>,
}

impl DisjointBox {
    pub fn contains(&self, p: &[Rat]) -> bool {
        self.lo.len() == p.len()
            && self
                .lo
                .iter()
                .zip(&self.hi)
                .zip(p)
                .all(|((lo, hi), v)| lo <= v && ExtCoord::Fin(v.clone()) < *hi)
    }

    /// The box corner list `(lo_1, hi_1, ..., lo_D, hi_D)` as a point in
    /// doubled dimension, for stabbing by a `DominanceBox` query.
    pub fn lift(&self) -> Vec<ExtCoord> {
        let mut out = Vec::with_capacity(2 * self.lo.len());
        for (lo, hi) in self.lo.iter().zip(&self.hi) {
            out.push(ExtCoord::Fin(lo.clone()));
            out.push(hi.clone());
        }
        out
    }
}

/// Measured sizes of a threshold lifting: permutations per threshold system,
/// lifted elements per point, and total permutations over all thresholds.
#[derive(Clone, Debug, Default, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub struct LiftingStats {
    pub perms_per_system: usize,
    pub lifted_per_point: usize,
    pub total_perms: usize,
}

/// Lifts a sorted 1D point to one 3D point per window of `t` consecutive
/// locations: window `[j - t + 1 .. j]` maps to `(loc[j - t + 1], loc[j],
/// loc[j + 1])` with `+inf` as the successor of the last window. Exactly
/// `k - t + 1` lifted points.
pub fn lift_rc_1d(p: &UncertainPoint, t: usize) -> Result<Vec<LiftedPoint>, LiftError> {
    let k = p.k();
    if t == 0 || t > k {
        return Err(LiftError::BadThreshold { t, k });
    }
    let vals: Vec<&Rat> = p.locations.iter().map(|l| &l[0]).collect();
    if vals.windows(2).any(|w| w[0] > w[1]) {
        return Err(LiftError::Unsorted);
    }
    let mut out = Vec::with_capacity(k - t + 1);
    for j in (t - 1)..k {
        let first = vals[j + 1 - t].clone();
        let last = vals[j].clone();
        let succ =
            if j + 1 < k { ExtCoord::Fin(vals[j + 1].clone()) } else { ExtCoord::PosInf };
        out.push(LiftedPoint {
            owner: p.id,
            t,
            coords: vec![ExtCoord::Fin(first), ExtCoord::Fin(last), succ],
        });
    }
    Ok(out)
}

/// The 3D query window for `[a, b]`: `[a, inf) x (-inf, b] x (b, inf)`.
pub fn lift_rc_query_1d(a: Rat, b: Rat) -> Result<Range, LiftError> {
    if a > b {
        return Err(LiftError::Range(RangeError::InvalidBounds(a.to_string(), b.to_string())));
    }
    Ok(Range::ThresholdWindow { a, b })
}

/// Doubles coordinates: a point `q` becomes `(-q_1, q_1, ..., -q_d, q_d)`,
/// so `q ∈ prod [a_i, b_i]` iff the doubled point is dominated by the
/// doubled rect apex `(-a_1, b_1, ..., -a_d, b_d)`.
pub fn double_point(q: &[Rat]) -> Vec<Rat> {
    let mut out = Vec::with_capacity(2 * q.len());
    for v in q {
        out.push(-v.clone());
        out.push(v.clone());
    }
    out
}

/// Doubles a rectangle into the apex of the equivalent negative orthant.
pub fn double_rect(bounds: &[(Rat, Rat)]) -> Vec<Rat> {
    let mut out = Vec::with_capacity(2 * bounds.len());
    for (a, b) in bounds {
        out.push(-a.clone());
        out.push(b.clone());
    }
    out
}

fn dominated(q: &[Rat], apex: &[Rat]) -> bool {
    q.iter().zip(apex).all(|(v, a)| v <= a)
}

/// Apexes of all tight negative orthants containing exactly `t` of the given
/// points: candidates are drawn from the grid of per-axis point coordinates;
/// kept when the orthant holds exactly `t` points and every bounding facet
/// touches a contained point.
pub fn tight_apexes_of(points: &[Vec<Rat>], owner: PointId, t: usize) -> ApexSet {
    let dim = points.first().map_or(0, Vec::len);
    let axis_vals: Vec<Vec<Rat>> = (0..dim)
        .map(|a| {
            let mut v: Vec<Rat> = points.iter().map(|p| p[a].clone()).collect();
            v.sort();
            v.dedup();
            v
        })
        .collect();
    let mut apexes = Vec::new();
    let mut idx = vec![0usize; dim];
    'outer: loop {
        let apex: Vec<Rat> =
            idx.iter().enumerate().map(|(a, &i)| axis_vals[a][i].clone()).collect();
        let inside: Vec<&Vec<Rat>> = points.iter().filter(|p| dominated(p, &apex)).collect();
        if inside.len() == t && (0..dim).all(|a| inside.iter().any(|p| p[a] == apex[a])) {
            apexes.push(apex);
        }
        // odometer over the candidate grid
        for a in (0..dim).rev() {
            idx[a] += 1;
            if idx[a] < axis_vals[a].len() {
                continue 'outer;
            }
            idx[a] = 0;
        }
        break;
    }
    ApexSet { owner, t, apexes }
}

/// Tight apex set of an uncertain point after coordinate doubling.
pub fn tight_apexes(p: &UncertainPoint, t: usize) -> Result<ApexSet, LiftError> {
    if t == 0 || t > p.k() {
        return Err(LiftError::BadThreshold { t, k: p.k() });
    }
    let doubled: Vec<Vec<Rat>> = p.locations.iter().map(|l| double_point(l)).collect();
    Ok(tight_apexes_of(&doubled, p.id, t))
}

fn in_union(apexes: &[Vec<Rat>], q: &[Rat]) -> bool {
    apexes.iter().any(|c| c.iter().zip(q).all(|(ci, qi)| qi >= ci))
}

/// Decomposes the union of positive orthants of the apexes into pairwise
/// disjoint boxes: space is cut along every apex coordinate per axis, cells
/// are classified by their minimum corner, and runs of kept cells merge
/// along the last axis.
pub fn disjoint_boxes(c: &ApexSet) -> BoxSet {
    let dim = c.apexes.first().map_or(0, Vec::len);
    if c.apexes.is_empty() {
        return BoxSet { owner: c.owner, t: c.t, boxes: Vec::new() };
    }
    let axis_cuts: Vec<Vec<Rat>> = (0..dim)
        .map(|a| {
            let mut v: Vec<Rat> = c.apexes.iter().map(|ap| ap[a].clone()).collect();
            v.sort();
            v.dedup();
            v
        })
        .collect();
    let mut boxes = Vec::new();
    let last = dim - 1;
    let mut idx = vec![0usize; dim];
    let mut run_start: Option<usize> = None;
    // walk cells in odometer order, last axis fastest, merging kept runs
    'outer: loop {
        let corner: Vec<Rat> =
            idx.iter().enumerate().map(|(a, &i)| axis_cuts[a][i].clone()).collect();
        let keep = in_union(&c.apexes, &corner);
        if keep && run_start.is_none() {
            run_start = Some(idx[last]);
        }
        let at_axis_end = idx[last] + 1 == axis_cuts[last].len();
        if !keep || at_axis_end {
            if let Some(start) = run_start.take() {
                let end = if keep { idx[last] + 1 } else { idx[last] };
                if end > start {
                    let mut lo = Vec::with_capacity(dim);
                    let mut hi = Vec::with_capacity(dim);
                    for a in 0..last {
                        lo.push(axis_cuts[a][idx[a]].clone());
                        hi.push(if idx[a] + 1 < axis_cuts[a].len() {
                            ExtCoord::Fin(axis_cuts[a][idx[a] + 1].clone())
                        } else {
                            ExtCoord::PosInf
                        });
                    }
                    lo.push(axis_cuts[last][start].clone());
                    hi.push(if end < axis_cuts[last].len() {
                        ExtCoord::Fin(axis_cuts[last][end].clone())
                    } else {
                        ExtCoord::PosInf
                    });
                    boxes.push(DisjointBox { lo, hi });
                }
            }
        }
        for a in (0..dim).rev() {
            idx[a] += 1;
            if idx[a] < axis_cuts[a].len() {
                continue 'outer;
            }
            idx[a] = 0;
        }
        break;
    }
    BoxSet { owner: c.owner, t: c.t, boxes }
}

/// Lifts every box to its corner-list point in doubled dimension.
pub fn lift_boxes(b: &BoxSet) -> Vec<(PointId, Vec<ExtCoord>)> {
    b.boxes.iter().map(|bx| (b.owner, bx.lift())).collect()
}

/// The semi-bounded box around a query point `a`: lifted box corners land in
/// it exactly when `a` lies in the original box.
pub fn lift_query_point(a: &[Rat]) -> Range {
    Range::DominanceBox { apex: a.to_vec() }
}

/// Exact threshold count by box stabbing: how many points have inclusion
/// probability at least `t / k` in the rectangle, computed by stabbing the
/// doubled rectangle apex through every point's box set.
pub fn rc_count_via_boxes(p: &UncertainPointSet, r: &Range, t: usize) -> Result<usize, LiftError> {
    let bounds: Vec<(Rat, Rat)> = match r {
        Range::Rect { bounds } => bounds.clone(),
        Range::Interval { a, b } => vec![(a.clone(), b.clone())],
        _ => {
            return Err(LiftError::Range(RangeError::UnsupportedFamily(
                crate::ranges::FamilyKind::Rect,
            )))
        }
    };
    if p.dim() != bounds.len() {
        return Err(LiftError::Range(RangeError::DimensionMismatch {
            range: bounds.len(),
            point: p.dim(),
        }));
    }
    if p.dim() > 2 {
        return Err(LiftError::UnsupportedDim(p.dim()));
    }
    if t == 0 || t > p.k() {
        return Err(LiftError::BadThreshold { t, k: p.k() });
    }
    let apex = double_rect(&bounds);
    let query = lift_query_point(&apex);
    let mut count = 0usize;
    for pt in p.points() {
        let boxes = disjoint_boxes(&tight_apexes(pt, t)?);
        let mut hits = 0usize;
        for (_, lifted) in lift_boxes(&boxes) {
            if query.contains_ext(&lifted)? {
                hits += 1;
            }
        }
        debug_assert!(hits <= 1, "stabbing must hit at most one box");
        count += usize::from(hits > 0);
    }
    Ok(count)
}

/// Direct union-membership test, the oracle for box decompositions.
pub fn union_contains(c: &ApexSet, q: &[Rat]) -> bool {
    in_union(&c.apexes, q)
}
