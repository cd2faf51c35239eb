//! The partition / color-halve pipeline that converts low-discrepancy
//! colorings into small coresets.
//!
//! Points are split into parts, repeatedly paired, and each pair union is
//! halved by keeping one side of a balanced low-discrepancy coloring, chosen
//! at random. Every `beta + 3`rd step merges without halving, letting set
//! sizes grow once per epoch. Each halving round logs the exact measured
//! query gap it introduced and the discrepancy-based bound, so the final
//! error is certified by the sum of the ledger.

use crate::discrepancy::{eval_disc, Coloring};
use crate::exact::{mix_seed, rat_usize, Rat};
use crate::lifting::{disjoint_boxes, lift_boxes, lift_rc_1d, LiftingStats};
use crate::model::{PointId, UncertainPointSet};
use crate::permutations::{
    canonical_permutation_system, level_permutation_system, PermutationSystem,
};
use crate::ranges::{canonical_ranges_with, CoverConfig, FamilyDescriptor, FamilyKind, Range};
use crate::exact::ExtCoord;
use num_traits::Zero;
use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

#[derive(Debug, thiserror::Error, PartialEq)]
pub enum MrError {
    #[error("epsilon {0} outside (0, 1)")]
    BadEpsilon(f64),
    #[error("set of size {0} cannot be halved")]
    TooSmall(usize),
    #[error("threshold machinery unsupported for family {family} in dimension {dim}")]
    Unsupported { family: FamilyKind, dim: usize },
    #[error(transparent)]
    Perm(#[from] crate::permutations::PermError),
    #[error(transparent)]
    Disc(#[from] crate::discrepancy::DiscError),
    #[error(transparent)]
    Lift(#[from] crate::lifting::LiftError),
    #[error(transparent)]
    Range(#[from] crate::ranges::RangeError),
}

/// Which guarantee the reduction must preserve.
#[derive(Clone, Copy, Debug, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum GuaranteeKind {
    Re,
    Rc,
}

#[derive(Clone, Debug)]
pub struct BuildTarget {
    pub kind: GuaranteeKind,
    pub family: FamilyDescriptor,
}

/// Pipeline constants. `gamma`/`omega` default to the family-specific values
/// when unset; `c_part` defaults to `4 * (beta + 2)`.
#[derive(Clone, Debug)]
pub struct MergeReduceParams {
    pub beta: u32,
    pub gamma: Option<f64>,
    pub omega: Option<f64>,
    pub c_part: Option<f64>,
    pub c_size: f64,
    pub seed: u64,
}

impl Default for MergeReduceParams {
    fn default() -> Self {
        MergeReduceParams { beta: 2, gamma: None, omega: None, c_part: None, c_size: 1.0, seed: 0 }
    }
}

impl MergeReduceParams {
    pub fn with_seed(seed: u64) -> Self {
        MergeReduceParams { seed, ..Default::default() }
    }

    pub fn gamma_or(&self, fallback: f64) -> f64 {
        self.gamma.unwrap_or(fallback)
    }

    pub fn omega_or(&self, fallback: f64) -> f64 {
        self.omega.unwrap_or(fallback)
    }

    pub fn part_multiplier(&self) -> f64 {
        self.c_part.unwrap_or(4.0 * (self.beta as f64 + 2.0))
    }
}

/// Target coreset size `g`: `c_size * (gamma / eps) * max(1, log2(gamma /
/// eps))^omega`, rounded to the nearest integer and then up to even, never
/// below 2. Unset `gamma`/`omega` count as 1 and 0.
pub fn coreset_size(eps: f64, params: &MergeReduceParams) -> Result<usize, MrError> {
    if !(eps > 0.0 && eps < 1.0) {
        return Err(MrError::BadEpsilon(eps));
    }
    let gamma = params.gamma_or(1.0);
    let omega = params.omega_or(0.0);
    let ratio = gamma / eps;
    let x = params.c_size * ratio * ratio.log2().max(1.0).powf(omega);
    let mut g = x.round().max(2.0) as usize;
    if g % 2 == 1 {
        g += 1;
    }
    Ok(g)
}

/// How the kept side of each halving is chosen. `Random` is the production
/// policy; `KeepLargerIn` deliberately biases toward the side with more
/// certified mass in one range and exists to validate the zero-bias test's
/// sensitivity.
#[derive(Clone, Debug)]
pub enum SidePolicy {
    Random,
    KeepLargerIn(Range),
}

#[derive(Clone, Debug, serde::Serialize)]
pub struct GroupEntry {
    pub size: usize,
    pub perm_disc: u64,
    #[serde(with = "crate::exact::serde_rat")]
    pub family_disc: Rat,
    pub per_threshold: Option<Vec<u64>>,
    pub kept_positive: bool,
}

#[derive(Clone, Debug, serde::Serialize)]
pub struct RoundEntry {
    pub round: usize,
    pub skipped: bool,
    pub groups: Vec<GroupEntry>,
    /// max over groups of family_disc / group size
    #[serde(with = "crate::exact::serde_rat")]
    pub bound: Rat,
    /// exact measured sup over the family cover of the query gap this round
    /// introduced
    #[serde(with = "crate::exact::serde_rat")]
    pub error: Rat,
}

#[derive(Clone, Debug)]
pub struct MergeReduceOutcome {
    pub ids: Vec<PointId>,
    pub ledger: Vec<RoundEntry>,
    /// set when `g >= n` made the reduction a no-op
    pub trivial: bool,
    pub target_size: usize,
    pub lifting: Option<LiftingStats>,
}

impl MergeReduceOutcome {
    pub fn ledger_bound(&self) -> Rat {
        self.ledger.iter().map(|r| r.bound.clone()).sum()
    }

    pub fn ledger_error(&self) -> Rat {
        self.ledger.iter().map(|r| r.error.clone()).sum()
    }
}

pub type ColoringFn<'a> = dyn Fn(&PermutationSystem, u64) -> Coloring + Sync + 'a;

fn validate_target(p: &UncertainPointSet, target: &BuildTarget) -> Result<(), MrError> {
    let f = &target.family;
    let ok = match (target.kind, f.kind) {
        (_, FamilyKind::HalfLine) | (_, FamilyKind::Interval) => p.dim() == 1,
        (GuaranteeKind::Re, FamilyKind::Rect) => p.dim() == f.dim && f.dim >= 1,
        (GuaranteeKind::Rc, FamilyKind::Rect) => p.dim() == f.dim && (1..=2).contains(&f.dim),
    };
    if ok {
        Ok(())
    } else {
        Err(MrError::Unsupported { family: f.kind, dim: f.dim })
    }
}

/// Replaces infinity sentinels with a value beyond the finite span so lifted
/// points can enter the ordinary level-tree construction.
fn definitize(coords: &[ExtCoord]) -> Vec<Rat> {
    let finite_max = coords
        .iter()
        .filter_map(ExtCoord::finite)
        .max()
        .cloned()
        .unwrap_or_else(Rat::zero);
    coords
        .iter()
        .map(|c| match c {
            ExtCoord::Fin(r) => r.clone(),
            ExtCoord::PosInf => finite_max.clone() + rat_usize(1),
            ExtCoord::NegInf => -(finite_max.clone() + rat_usize(1)),
        })
        .collect()
}

/// The permutation system a coloring must keep balanced for this target.
fn build_system(
    s: &UncertainPointSet,
    target: &BuildTarget,
) -> Result<(PermutationSystem, Option<LiftingStats>), MrError> {
    match (target.kind, target.family.kind) {
        (GuaranteeKind::Re, FamilyKind::HalfLine) | (GuaranteeKind::Re, FamilyKind::Interval) => {
            Ok((canonical_permutation_system(s)?, None))
        }
        (GuaranteeKind::Re, FamilyKind::Rect) => {
            if s.dim() == 1 {
                return Ok((canonical_permutation_system(s)?, None));
            }
            let mut sys = PermutationSystem::empty(s.len());
            for j in 0..s.k() {
                let pts: Vec<Vec<Rat>> =
                    s.points().iter().map(|p| p.locations[j].clone()).collect();
                let level = level_permutation_system(&pts)?;
                sys.absorb(format!("traversal-{j}"), level.perms().to_vec());
            }
            Ok((sys, None))
        }
        (GuaranteeKind::Rc, FamilyKind::HalfLine) => {
            Ok((canonical_permutation_system(&s.with_sorted_locations())?, None))
        }
        (GuaranteeKind::Rc, FamilyKind::Interval) => {
            let sorted = s.with_sorted_locations();
            let mut sys = PermutationSystem::empty(s.len());
            let mut stats = LiftingStats::default();
            for t in 1..=s.k() {
                let mut coords: Vec<Vec<Rat>> = Vec::new();
                let mut owners: Vec<u32> = Vec::new();
                for (pos, pt) in sorted.points().iter().enumerate() {
                    for lifted in lift_rc_1d(pt, t)? {
                        coords.push(definitize(&lifted.coords));
                        owners.push(pos as u32);
                    }
                }
                stats.lifted_per_point = stats.lifted_per_point.max(coords.len() / s.len().max(1));
                let level = level_permutation_system(&coords)?;
                stats.perms_per_system = stats.perms_per_system.max(level.perms().len());
                let remapped: Vec<Vec<u32>> = level
                    .perms()
                    .iter()
                    .map(|perm| perm.iter().map(|&e| owners[e as usize]).collect())
                    .collect();
                stats.total_perms += remapped.len();
                sys.absorb(format!("threshold-{t}"), remapped);
            }
            Ok((sys, Some(stats)))
        }
        (GuaranteeKind::Rc, FamilyKind::Rect) => {
            if s.dim() == 1 {
                return build_system(
                    s,
                    &BuildTarget { kind: GuaranteeKind::Rc, family: FamilyDescriptor::interval() },
                );
            }
            let mut sys = PermutationSystem::empty(s.len());
            let mut stats = LiftingStats::default();
            for t in 1..=s.k() {
                let mut coords: Vec<Vec<Rat>> = Vec::new();
                let mut owners: Vec<u32> = Vec::new();
                for (pos, pt) in s.points().iter().enumerate() {
                    let boxes = disjoint_boxes(&crate::lifting::tight_apexes(pt, t)?);
                    for (_, corner) in lift_boxes(&boxes) {
                        coords.push(definitize(&corner));
                        owners.push(pos as u32);
                    }
                }
                stats.lifted_per_point = stats.lifted_per_point.max(coords.len() / s.len().max(1));
                let level = level_permutation_system(&coords)?;
                stats.perms_per_system = stats.perms_per_system.max(level.perms().len());
                let remapped: Vec<Vec<u32>> = level
                    .perms()
                    .iter()
                    .map(|perm| perm.iter().map(|&e| owners[e as usize]).collect())
                    .collect();
                stats.total_perms += remapped.len();
                sys.absorb(format!("threshold-{t}"), remapped);
            }
            Ok((sys, Some(stats)))
        }
    }
}

/// Sorted (value, sign) events over the certified locations of a group.
fn certified_events(p: &UncertainPointSet, positions: &[usize], signs: &[i8]) -> Vec<(Rat, i64)> {
    let mut events: Vec<(Rat, i64)> = Vec::new();
    for (local, &pos) in positions.iter().enumerate() {
        for loc in &p.points()[pos].locations {
            events.push((loc[0].clone(), signs[local] as i64));
        }
    }
    events.sort_by(|a, b| a.0.cmp(&b.0));
    events
}

/// Per-point sorted location values, 1D.
fn sorted_locations(p: &UncertainPointSet, pos: usize) -> Vec<Rat> {
    let mut v: Vec<Rat> = p.points()[pos].locations.iter().map(|l| l[0].clone()).collect();
    v.sort();
    v
}

/// Exact family discrepancy of a coloring over one group, in the units of
/// the one-round bound: sup over the family of |query(kept) - query(group)|
/// times the group size.
fn group_family_disc(
    p: &UncertainPointSet,
    positions: &[usize],
    target: &BuildTarget,
    coloring: &Coloring,
    rect_cover: Option<&[Range]>,
) -> Result<(Rat, Option<Vec<u64>>), MrError> {
    let k = p.k() as i64;
    match (target.kind, target.family.kind) {
        (GuaranteeKind::Re, FamilyKind::HalfLine) => {
            let events = certified_events(p, positions, coloring.signs());
            let mut pref = 0i64;
            let mut best = 0i64;
            let mut i = 0;
            while i < events.len() {
                let mut j = i;
                while j < events.len() && events[j].0 == events[i].0 {
                    pref += events[j].1;
                    j += 1;
                }
                best = best.max(pref.abs());
                i = j;
            }
            Ok((Rat::new(best.into(), k.into()), None))
        }
        (GuaranteeKind::Re, FamilyKind::Interval) => {
            let events = certified_events(p, positions, coloring.signs());
            let (mut pref, mut max_p, mut min_p) = (0i64, 0i64, 0i64);
            let mut i = 0;
            while i < events.len() {
                let mut j = i;
                while j < events.len() && events[j].0 == events[i].0 {
                    pref += events[j].1;
                    j += 1;
                }
                max_p = max_p.max(pref);
                min_p = min_p.min(pref);
                i = j;
            }
            Ok((Rat::new((max_p - min_p).into(), k.into()), None))
        }
        (GuaranteeKind::Re, FamilyKind::Rect) => {
            let cover = rect_cover.expect("rect cover prepared by caller");
            let mut best = 0i64;
            for r in cover {
                let mut sum = 0i64;
                for (local, &pos) in positions.iter().enumerate() {
                    for loc in &p.points()[pos].locations {
                        if r.contains(loc)? {
                            sum += coloring.sign(local) as i64;
                        }
                    }
                }
                best = best.max(sum.abs());
            }
            Ok((Rat::new(best.into(), k.into()), None))
        }
        (GuaranteeKind::Rc, FamilyKind::HalfLine) => {
            let mut per_t = Vec::with_capacity(p.k());
            for t in 0..p.k() {
                let mut pts: Vec<(Rat, i64)> = positions
                    .iter()
                    .enumerate()
                    .map(|(local, &pos)| {
                        (sorted_locations(p, pos)[t].clone(), coloring.sign(local) as i64)
                    })
                    .collect();
                pts.sort_by(|a, b| a.0.cmp(&b.0));
                let mut pref = 0i64;
                let mut best = 0i64;
                let mut i = 0;
                while i < pts.len() {
                    let mut j = i;
                    while j < pts.len() && pts[j].0 == pts[i].0 {
                        pref += pts[j].1;
                        j += 1;
                    }
                    best = best.max(pref.abs());
                    i = j;
                }
                per_t.push(best as u64);
            }
            let max = *per_t.iter().max().unwrap_or(&0);
            Ok((Rat::new((max as i64).into(), 1.into()), Some(per_t)))
        }
        (GuaranteeKind::Rc, FamilyKind::Interval) | (GuaranteeKind::Rc, FamilyKind::Rect)
            if target.family.kind == FamilyKind::Interval || p.dim() == 1 =>
        {
            let kk = p.k();
            // distinct values with per-bucket (local point, sign) entries
            let mut all: Vec<(Rat, usize)> = Vec::new();
            for (local, &pos) in positions.iter().enumerate() {
                for loc in &p.points()[pos].locations {
                    all.push((loc[0].clone(), local));
                }
            }
            all.sort_by(|a, b| a.0.cmp(&b.0));
            let mut buckets: Vec<Vec<usize>> = Vec::new();
            let mut cuts = 0usize;
            let mut i = 0;
            while i < all.len() {
                let mut j = i;
                let mut b = Vec::new();
                while j < all.len() && all[j].0 == all[i].0 {
                    b.push(all[j].1);
                    j += 1;
                }
                buckets.push(b);
                cuts += 1;
                i = j;
            }
            let mut per_t = vec![0i64; kk];
            let m = positions.len();
            for start in 0..cuts {
                let mut counts = vec![0usize; m];
                let mut signed = vec![0i64; kk + 1];
                for bucket in buckets.iter().skip(start).take(cuts - start) {
                    for &local in bucket {
                        counts[local] += 1;
                        let c = counts[local];
                        if c <= kk {
                            signed[c] += coloring.sign(local) as i64;
                        }
                    }
                    for t in 1..=kk {
                        per_t[t - 1] = per_t[t - 1].max(signed[t].abs());
                    }
                }
            }
            let per_t_u: Vec<u64> = per_t.iter().map(|&v| v as u64).collect();
            let max = per_t.iter().copied().max().unwrap_or(0);
            Ok((Rat::new(max.into(), 1.into()), Some(per_t_u)))
        }
        (GuaranteeKind::Rc, FamilyKind::Rect) => {
            let cover = rect_cover.expect("rect cover prepared by caller");
            let kk = p.k();
            let mut per_t = vec![0i64; kk];
            for r in cover {
                let mut signed = vec![0i64; kk + 1];
                for (local, &pos) in positions.iter().enumerate() {
                    let mut c = 0usize;
                    for loc in &p.points()[pos].locations {
                        if r.contains(loc)? {
                            c += 1;
                        }
                    }
                    for cell in &mut signed[1..=c] {
                        *cell += coloring.sign(local) as i64;
                    }
                }
                for t in 1..=kk {
                    per_t[t - 1] = per_t[t - 1].max(signed[t].abs());
                }
            }
            let per_t_u: Vec<u64> = per_t.iter().map(|&v| v as u64).collect();
            let max = per_t.iter().copied().max().unwrap_or(0);
            Ok((Rat::new(max.into(), 1.into()), Some(per_t_u)))
        }
        _ => unreachable!("validated earlier"),
    }
}

/// Exact sup over the family of |query(after) - query(before)|, the measured
/// error one round introduced.
fn family_gap(
    p: &UncertainPointSet,
    before: &[usize],
    after: &[usize],
    target: &BuildTarget,
    rect_cover: Option<&[Range]>,
) -> Result<Rat, MrError> {
    let (na, nb) = (before.len() as i64, after.len() as i64);
    let k = p.k() as i64;
    match (target.kind, target.family.kind) {
        (GuaranteeKind::Re, FamilyKind::HalfLine) | (GuaranteeKind::Re, FamilyKind::Interval) => {
            // h(x) = cnt_before(x) * nb - cnt_after(x) * na over certified values
            let mut events: Vec<(Rat, i64)> = Vec::new();
            let after_set: std::collections::HashSet<usize> = after.iter().copied().collect();
            for &pos in before {
                let weight_b = nb; // certified count in before weighted by nb
                let weight_a = if after_set.contains(&pos) { na } else { 0 };
                for loc in &p.points()[pos].locations {
                    events.push((loc[0].clone(), weight_b - weight_a));
                }
            }
            events.sort_by(|a, b| a.0.cmp(&b.0));
            let (mut pref, mut max_p, mut min_p) = (0i64, 0i64, 0i64);
            let mut i = 0;
            while i < events.len() {
                let mut j = i;
                while j < events.len() && events[j].0 == events[i].0 {
                    pref += events[j].1;
                    j += 1;
                }
                max_p = max_p.max(pref);
                min_p = min_p.min(pref);
                i = j;
            }
            let spread = if target.family.kind == FamilyKind::HalfLine {
                max_p.max(-min_p)
            } else {
                max_p - min_p
            };
            Ok(Rat::new(spread.into(), (k * na * nb).into()))
        }
        (GuaranteeKind::Re, FamilyKind::Rect) => {
            let cover = rect_cover.expect("rect cover prepared by caller");
            let after_set: std::collections::HashSet<usize> = after.iter().copied().collect();
            let mut best = Rat::zero();
            for r in cover {
                let mut ca = 0i64;
                let mut cb = 0i64;
                for &pos in before {
                    for loc in &p.points()[pos].locations {
                        if r.contains(loc)? {
                            ca += 1;
                            if after_set.contains(&pos) {
                                cb += 1;
                            }
                        }
                    }
                }
                let gap = Rat::new((ca * nb - cb * na).abs().into(), (k * na * nb).into());
                if gap > best {
                    best = gap;
                }
            }
            Ok(best)
        }
        (GuaranteeKind::Rc, FamilyKind::HalfLine) => {
            let after_set: std::collections::HashSet<usize> = after.iter().copied().collect();
            let mut best = 0i64;
            for t in 0..p.k() {
                let mut pts: Vec<(Rat, i64)> = before
                    .iter()
                    .map(|&pos| {
                        let w = nb - if after_set.contains(&pos) { na } else { 0 };
                        (sorted_locations(p, pos)[t].clone(), w)
                    })
                    .collect();
                pts.sort_by(|a, b| a.0.cmp(&b.0));
                let mut pref = 0i64;
                let mut i = 0;
                while i < pts.len() {
                    let mut j = i;
                    while j < pts.len() && pts[j].0 == pts[i].0 {
                        pref += pts[j].1;
                        j += 1;
                    }
                    best = best.max(pref.abs());
                    i = j;
                }
            }
            Ok(Rat::new(best.into(), (na * nb).into()))
        }
        (GuaranteeKind::Rc, FamilyKind::Interval)
        | (GuaranteeKind::Rc, FamilyKind::Rect)
            if target.family.kind == FamilyKind::Interval || p.dim() == 1 =>
        {
            let kk = p.k();
            let after_set: std::collections::HashSet<usize> = after.iter().copied().collect();
            let mut all: Vec<(Rat, usize)> = Vec::new();
            for (local, &pos) in before.iter().enumerate() {
                for loc in &p.points()[pos].locations {
                    all.push((loc[0].clone(), local));
                }
            }
            all.sort_by(|a, b| a.0.cmp(&b.0));
            let mut buckets: Vec<Vec<usize>> = Vec::new();
            let mut i = 0;
            while i < all.len() {
                let mut j = i;
                let mut b = Vec::new();
                while j < all.len() && all[j].0 == all[i].0 {
                    b.push(all[j].1);
                    j += 1;
                }
                buckets.push(b);
                i = j;
            }
            let weights: Vec<i64> = before
                .iter()
                .map(|&pos| nb - if after_set.contains(&pos) { na } else { 0 })
                .collect();
            let m = before.len();
            let mut best = 0i64;
            for start in 0..buckets.len() {
                let mut counts = vec![0usize; m];
                let mut gap = vec![0i64; kk + 1];
                for bucket in buckets.iter().skip(start) {
                    for &local in bucket {
                        counts[local] += 1;
                        let c = counts[local];
                        if c <= kk {
                            gap[c] += weights[local];
                        }
                    }
                    for cell in &gap[1..=kk] {
                        best = best.max(cell.abs());
                    }
                }
            }
            Ok(Rat::new(best.into(), (na * nb).into()))
        }
        (GuaranteeKind::Rc, FamilyKind::Rect) => {
            let cover = rect_cover.expect("rect cover prepared by caller");
            let kk = p.k();
            let after_set: std::collections::HashSet<usize> = after.iter().copied().collect();
            let mut best = 0i64;
            for r in cover {
                let mut gap = vec![0i64; kk + 1];
                for &pos in before {
                    let w = nb - if after_set.contains(&pos) { na } else { 0 };
                    let mut c = 0usize;
                    for loc in &p.points()[pos].locations {
                        if r.contains(loc)? {
                            c += 1;
                        }
                    }
                    for cell in &mut gap[1..=c] {
                        *cell += w;
                    }
                }
                for cell in &gap[1..=kk] {
                    best = best.max(cell.abs());
                }
            }
            Ok(Rat::new(best.into(), (na * nb).into()))
        }
        _ => unreachable!("validated earlier"),
    }
}

fn rect_cover_for(
    p: &UncertainPointSet,
    target: &BuildTarget,
) -> Result<Option<Vec<Range>>, MrError> {
    if target.family.kind != FamilyKind::Rect || p.dim() == 1 {
        return Ok(None);
    }
    // a modest budget keeps per-round sweeps affordable; verification uses
    // the same deterministic cover
    let cfg = CoverConfig { budget: 20_000, seed: CoverConfig::default().seed };
    Ok(Some(canonical_ranges_with(&p.certify(), &target.family, cfg)?))
}

struct HalvedGroup {
    kept: Vec<usize>,
    entry: GroupEntry,
    stats: Option<LiftingStats>,
}

fn halve_group(
    p: &UncertainPointSet,
    positions: &[usize],
    target: &BuildTarget,
    coloring_fn: &ColoringFn,
    side: &SidePolicy,
    seed: u64,
    rect_cover: Option<&[Range]>,
) -> Result<HalvedGroup, MrError> {
    if positions.len() < 2 {
        return Err(MrError::TooSmall(positions.len()));
    }
    let sub = UncertainPointSet::new(
        positions.iter().map(|&pos| p.points()[pos].clone()).collect(),
    )
    .expect("group subsets are valid");
    let (sys, stats) = build_system(&sub, target)?;
    let coloring = coloring_fn(&sys, seed);
    let perm_disc = eval_disc(&sys, &coloring)?.max_abs;
    let (family_disc, per_threshold) =
        group_family_disc(p, positions, target, &coloring, rect_cover)?;
    let keep_positive = match side {
        SidePolicy::Random => {
            ChaCha8Rng::seed_from_u64(mix_seed(seed, 0x7369_6465, 1)).random_bool(0.5)
        }
        SidePolicy::KeepLargerIn(range) => {
            let mut plus = 0i64;
            let mut minus = 0i64;
            for (local, &pos) in positions.iter().enumerate() {
                for loc in &p.points()[pos].locations {
                    if range.contains(loc)? {
                        if coloring.sign(local) == 1 {
                            plus += 1;
                        } else {
                            minus += 1;
                        }
                    }
                }
            }
            // compare fractions: plus / |P+| vs minus / |P-|
            let np = coloring.positive_count() as i64;
            let nm = positions.len() as i64 - np;
            plus * nm >= minus * np
        }
    };
    let kept: Vec<usize> = positions
        .iter()
        .enumerate()
        .filter(|(local, _)| (coloring.sign(*local) == 1) == keep_positive)
        .map(|(_, &pos)| pos)
        .collect();
    Ok(HalvedGroup {
        kept,
        entry: GroupEntry {
            size: positions.len(),
            perm_disc,
            family_disc,
            per_threshold,
            kept_positive: keep_positive,
        },
        stats,
    })
}

/// Halves one set by a balanced low-discrepancy coloring, returning the kept
/// half and the measured one-round record.
pub fn halve(
    s: &UncertainPointSet,
    target: &BuildTarget,
    coloring_fn: &ColoringFn,
    side: &SidePolicy,
    seed: u64,
) -> Result<(UncertainPointSet, GroupEntry), MrError> {
    validate_target(s, target)?;
    let positions: Vec<usize> = (0..s.len()).collect();
    let rect_cover = rect_cover_for(s, target)?;
    let halved =
        halve_group(s, &positions, target, coloring_fn, side, seed, rect_cover.as_deref())?;
    let ids: Vec<PointId> = halved.kept.iter().map(|&pos| s.points()[pos].id).collect();
    Ok((s.subset_by_ids(&ids).expect("kept ids exist"), halved.entry))
}

/// Pairs up the sets in order; a leftover odd set joins the final group, so
/// every group halves by exactly one half and the per-round accounting stays
/// exact.
fn group_sets(sets: &[Vec<usize>]) -> Vec<Vec<usize>> {
    let mut groups: Vec<Vec<usize>> = Vec::with_capacity(sets.len() / 2 + 1);
    let mut iter = sets.chunks_exact(2);
    for pair in iter.by_ref() {
        let mut g = pair[0].clone();
        g.extend_from_slice(&pair[1]);
        groups.push(g);
    }
    if let [leftover] = iter.remainder() {
        if let Some(last) = groups.last_mut() {
            last.extend_from_slice(leftover);
        } else {
            groups.push(leftover.clone());
        }
    }
    groups
}

/// Runs the full pipeline down to the target size, recording the per-round
/// ledger. Returns the surviving point ids in original order.
pub fn merge_reduce(
    p: &UncertainPointSet,
    target: &BuildTarget,
    eps: f64,
    params: &MergeReduceParams,
    coloring_fn: &ColoringFn,
    side: &SidePolicy,
) -> Result<MergeReduceOutcome, MrError> {
    validate_target(p, target)?;
    let g = coreset_size(eps, params)?;
    let n = p.len();
    if g >= n {
        return Ok(MergeReduceOutcome {
            ids: p.ids(),
            ledger: Vec::new(),
            trivial: true,
            target_size: g,
            lifting: None,
        });
    }
    let rect_cover = rect_cover_for(p, target)?;
    let part = (params.part_multiplier() * g as f64).ceil().max(2.0) as usize;
    let positions: Vec<usize> = (0..n).collect();
    let mut sets: Vec<Vec<usize>> = positions.chunks(part).map(<[usize]>::to_vec).collect();
    let mut ledger: Vec<RoundEntry> = Vec::new();
    let mut lifting: Option<LiftingStats> = None;
    let mut round = 0usize;
    let mut stage1_step = 0u32;
    let epoch = params.beta + 3;

    while sets.len() > 1 {
        let skip = stage1_step % epoch == epoch - 1;
        let groups = group_sets(&sets);
        if skip {
            // merge without coloring: contents unchanged, zero error
            let entry = RoundEntry {
                round,
                skipped: true,
                groups: groups
                    .iter()
                    .map(|gr| GroupEntry {
                        size: gr.len(),
                        perm_disc: 0,
                        family_disc: Rat::zero(),
                        per_threshold: None,
                        kept_positive: true,
                    })
                    .collect(),
                bound: Rat::zero(),
                error: Rat::zero(),
            };
            sets = groups;
            ledger.push(entry);
        } else {
            let before: Vec<usize> = groups.iter().flatten().copied().collect();
            let results: Vec<Result<HalvedGroup, MrError>> = groups
                .par_iter()
                .enumerate()
                .map(|(gi, gr)| {
                    halve_group(
                        p,
                        gr,
                        target,
                        coloring_fn,
                        side,
                        mix_seed(params.seed, round as u64, gi as u64),
                        rect_cover.as_deref(),
                    )
                })
                .collect();
            let mut group_entries = Vec::with_capacity(groups.len());
            let mut new_sets = Vec::with_capacity(groups.len());
            let mut bound = Rat::zero();
            for r in results {
                let h = r?;
                if let Some(s) = h.stats {
                    merge_into(&mut lifting, s);
                }
                let b = h.entry.family_disc.clone() / rat_usize(h.entry.size);
                if b > bound {
                    bound = b;
                }
                group_entries.push(h.entry);
                new_sets.push(h.kept);
            }
            let after: Vec<usize> = new_sets.iter().flatten().copied().collect();
            let error = family_gap(p, &before, &after, target, rect_cover.as_deref())?;
            ledger.push(RoundEntry { round, skipped: false, groups: group_entries, bound, error });
            sets = new_sets;
        }
        round += 1;
        stage1_step += 1;
    }

    // stage 2: color-halve the single survivor until it reaches the target
    let mut current = sets.pop().unwrap_or_default();
    while current.len() > g {
        let h = halve_group(
            p,
            &current,
            target,
            coloring_fn,
            side,
            mix_seed(params.seed, round as u64, 0),
            rect_cover.as_deref(),
        )?;
        if let Some(s) = h.stats.clone() {
            merge_into(&mut lifting, s);
        }
        let error = family_gap(p, &current, &h.kept, target, rect_cover.as_deref())?;
        let bound = h.entry.family_disc.clone() / rat_usize(h.entry.size);
        ledger.push(RoundEntry {
            round,
            skipped: false,
            groups: vec![h.entry],
            bound,
            error,
        });
        current = h.kept;
        round += 1;
    }

    let mut kept: Vec<usize> = current;
    kept.sort_unstable();
    Ok(MergeReduceOutcome {
        ids: kept.iter().map(|&pos| p.points()[pos].id).collect(),
        ledger,
        trivial: false,
        target_size: g,
        lifting,
    })
}

fn merge_into(slot: &mut Option<LiftingStats>, s: LiftingStats) {
    let sink = slot.get_or_insert_with(LiftingStats::default);
    sink.perms_per_system = sink.perms_per_system.max(s.perms_per_system);
    sink.lifted_per_point = sink.lifted_per_point.max(s.lifted_per_point);
    sink.total_perms = sink.total_perms.max(s.total_perms);
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::datasets;
    use crate::discrepancy::{find_coloring, ColoringBudget};
    use crate::exact::{rat, rat_int};
    use crate::queries::expected_fraction;
    use crate::ranges::canonical_ranges;
    use num_traits::ToPrimitive;

    fn default_coloring<'a>() -> impl Fn(&PermutationSystem, u64) -> Coloring + Sync + 'a {
        |sys, seed| find_coloring(sys, &ColoringBudget::light(), seed).coloring
    }

    fn re_halfline() -> BuildTarget {
        BuildTarget { kind: GuaranteeKind::Re, family: FamilyDescriptor::half_line() }
    }

    #[test]
    fn coreset_size_examples() {
        let p = MergeReduceParams {
            gamma: Some(1.0),
            omega: Some(0.0),
            c_size: 1.0,
            ..Default::default()
        };
        assert_eq!(coreset_size(0.5, &p).unwrap(), 2);
        let p = MergeReduceParams {
            gamma: Some(2f64.sqrt()),
            omega: Some(1.0),
            c_size: 1.0,
            ..Default::default()
        };
        assert_eq!(coreset_size(0.1, &p).unwrap(), 54);
        assert!(coreset_size(1.0, &p).is_err());
        assert!(coreset_size(0.0, &p).is_err());
    }

    #[test]
    fn coreset_size_monotone() {
        let p = MergeReduceParams {
            gamma: Some(1.5),
            omega: Some(1.0),
            ..Default::default()
        };
        let mut eps = 0.4;
        let mut prev = coreset_size(eps, &p).unwrap();
        for _ in 0..4 {
            eps /= 2.0;
            let next = coreset_size(eps, &p).unwrap();
            assert!(next >= prev, "halving eps cannot shrink g");
            prev = next;
        }
    }

    #[test]
    fn halve_alternating_example() {
        // {1,2,3,4} with the alternating coloring in sorted order: keeping
        // the positive side gives half-line error exactly disc/n = 1/4
        let pts: Vec<crate::model::UncertainPoint> = (1..=4)
            .map(|v| crate::model::UncertainPoint::new(v, vec![vec![rat_int(v)]]))
            .collect();
        let s = UncertainPointSet::new(pts).unwrap();
        let alternating = |_sys: &PermutationSystem, _seed: u64| {
            Coloring::from_signs(vec![1, -1, 1, -1])
        };
        let (kept, entry) = halve(
            &s,
            &re_halfline(),
            &alternating,
            &SidePolicy::KeepLargerIn(Range::HalfLine { x: rat_int(100) }),
            3,
        )
        .unwrap();
        // both sides have the same total mass, tie keeps the positive side
        assert_eq!(kept.ids(), vec![1, 3]);
        assert_eq!(entry.family_disc, rat_int(1));
        let cover = canonical_ranges(&s.certify(), &FamilyDescriptor::half_line()).unwrap();
        let mut worst = Rat::zero();
        for r in &cover {
            let gap =
                expected_fraction(&s, r).unwrap() - expected_fraction(&kept, r).unwrap();
            let gap = if gap < Rat::zero() { -gap } else { gap };
            if gap > worst {
                worst = gap;
            }
        }
        assert_eq!(worst, rat(1, 4));
    }

    #[test]
    fn halve_output_size() {
        let p = datasets::random_uniform(64, 2, 1, 5);
        let coloring = default_coloring();
        let (kept, _) =
            halve(&p, &re_halfline(), &coloring, &SidePolicy::Random, 1).unwrap();
        assert_eq!(kept.len(), 32);
    }

    #[test]
    fn halve_side_choice_is_fair() {
        let p = datasets::random_uniform(16, 2, 1, 6);
        let coloring = default_coloring();
        let mut kept_positive = 0usize;
        for seed in 0..200u64 {
            let (_, entry) =
                halve(&p, &re_halfline(), &coloring, &SidePolicy::Random, seed).unwrap();
            kept_positive += usize::from(entry.kept_positive);
        }
        assert!(
            (70..=130).contains(&kept_positive),
            "positive side kept {kept_positive}/200 times"
        );
    }

    #[test]
    fn trivial_when_target_exceeds_n() {
        let p = datasets::random_uniform(16, 2, 1, 7);
        let params = MergeReduceParams {
            gamma: Some(1.0),
            omega: Some(0.0),
            ..MergeReduceParams::with_seed(3)
        };
        let coloring = default_coloring();
        let out =
            merge_reduce(&p, &re_halfline(), 0.01, &params, &coloring, &SidePolicy::Random)
                .unwrap();
        assert!(out.trivial);
        assert_eq!(out.ids, p.ids());
        assert!(out.ledger.is_empty());
    }

    #[test]
    fn deterministic_given_seed() {
        let p = datasets::random_uniform(128, 2, 1, 8);
        let params = MergeReduceParams {
            gamma: Some(1.0),
            omega: Some(0.0),
            ..MergeReduceParams::with_seed(11)
        };
        let coloring = default_coloring();
        let a = merge_reduce(&p, &re_halfline(), 0.25, &params, &coloring, &SidePolicy::Random)
            .unwrap();
        let b = merge_reduce(&p, &re_halfline(), 0.25, &params, &coloring, &SidePolicy::Random)
            .unwrap();
        assert_eq!(a.ids, b.ids);
    }

    #[test]
    fn size_schedule_and_epochs() {
        // 32 parts of size 64: four color-halve steps shrink the set count
        // to two, the fifth step merges without coloring, then stage 2 runs
        let p = datasets::random_uniform(2048, 1, 1, 9);
        let params = MergeReduceParams {
            gamma: Some(1.0),
            omega: Some(0.0),
            c_size: 4.0,
            ..MergeReduceParams::with_seed(13)
        };
        // g = 4 * (1/0.25) = 16 -> parts of 16 * 16 = 256... choose eps so
        // that g = 4: c_size=1, eps=0.25 -> 4
        let params = MergeReduceParams { c_size: 1.0, ..params };
        let g = coreset_size(0.25, &params).unwrap();
        assert_eq!(g, 4);
        let coloring = default_coloring();
        let out = merge_reduce(&p, &re_halfline(), 0.25, &params, &coloring, &SidePolicy::Random)
            .unwrap();
        assert!(!out.trivial);
        assert_eq!(out.ids.len(), 4);
        // part size 64 -> 32 parts; steps 0..3 halve, step 4 is the skip
        let skip_rounds: Vec<usize> =
            out.ledger.iter().filter(|e| e.skipped).map(|e| e.round).collect();
        assert_eq!(skip_rounds, vec![4]);
        // set count halves every step: group counts 16, 8, 4, 2, 1(skip)
        let group_counts: Vec<usize> = out.ledger.iter().map(|e| e.groups.len()).collect();
        assert_eq!(&group_counts[..5], &[16, 8, 4, 2, 1]);
        // during stage 1 halving rounds the group size stays 128 (two parts
        // of 64); after the skip the single set has 128 points
        for e in &out.ledger[..4] {
            for gr in &e.groups {
                assert_eq!(gr.size, 128);
            }
        }
        let stage2_sizes: Vec<usize> =
            out.ledger[5..].iter().map(|e| e.groups[0].size).collect();
        assert_eq!(stage2_sizes, vec![128, 64, 32, 16, 8]);
    }

    #[test]
    fn ledger_soundness_on_small_build() {
        let p = datasets::random_uniform(256, 2, 1, 10);
        let params = MergeReduceParams {
            gamma: Some(1.2),
            omega: Some(0.5),
            ..MergeReduceParams::with_seed(17)
        };
        let coloring = default_coloring();
        let out = merge_reduce(&p, &re_halfline(), 0.2, &params, &coloring, &SidePolicy::Random)
            .unwrap();
        assert!(!out.trivial);
        let t = p.subset_by_ids(&out.ids).unwrap();
        let cover = canonical_ranges(&p.certify(), &FamilyDescriptor::half_line()).unwrap();
        let mut final_err = Rat::zero();
        for r in &cover {
            let gap = expected_fraction(&p, r).unwrap() - expected_fraction(&t, r).unwrap();
            let gap = if gap < Rat::zero() { -gap } else { gap };
            if gap > final_err {
                final_err = gap;
            }
        }
        assert!(
            final_err <= out.ledger_error(),
            "final {} > summed round errors {}",
            final_err,
            out.ledger_error()
        );
        // per-round: measured error within the discrepancy bound (all group
        // sizes here are even)
        for e in &out.ledger {
            assert!(
                e.error <= e.bound,
                "round {} error {} exceeds bound {}",
                e.round,
                e.error,
                e.bound
            );
        }
        let _ = out.ledger_bound().to_f64();
    }

    #[test]
    fn rc_halfline_build_small() {
        let p = datasets::random_uniform(256, 3, 1, 11);
        let params = MergeReduceParams {
            gamma: Some(1.5),
            omega: Some(0.5),
            ..MergeReduceParams::with_seed(19)
        };
        let target =
            BuildTarget { kind: GuaranteeKind::Rc, family: FamilyDescriptor::half_line() };
        let coloring = default_coloring();
        let out =
            merge_reduce(&p, &target, 0.3, &params, &coloring, &SidePolicy::Random).unwrap();
        assert!(!out.trivial);
        let t = p.subset_by_ids(&out.ids).unwrap();
        // exact sup over (cut, threshold) of the threshold-count gap
        let gap = family_gap(
            &p,
            &(0..p.len()).collect::<Vec<_>>(),
            &out.ids.iter().map(|id| p.position_of(*id).unwrap()).collect::<Vec<_>>(),
            &target,
            None,
        )
        .unwrap();
        assert!(gap <= out.ledger_error(), "{gap} vs {}", out.ledger_error());
        assert_eq!(t.k(), p.k());
    }

    #[test]
    fn unsupported_targets_rejected() {
        let p3 = datasets::random_uniform(8, 2, 3, 12);
        let target =
            BuildTarget { kind: GuaranteeKind::Rc, family: FamilyDescriptor::rect(3) };
        let coloring = default_coloring();
        assert!(matches!(
            merge_reduce(
                &p3,
                &target,
                0.2,
                &MergeReduceParams::default(),
                &coloring,
                &SidePolicy::Random
            ),
            Err(MrError::Unsupported { .. })
        ));
    }
}
