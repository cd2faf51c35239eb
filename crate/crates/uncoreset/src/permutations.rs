//! Permutation systems: the `k` canonical orders of a 1D uncertain set, and
//! the level-wise tree orders that let axis-aligned rectangles be read off as
//! disjoint rank intervals.

use crate::exact::Rat;
use crate::model::UncertainPointSet;
use crate::ranges::Range;

#[derive(Debug, thiserror::Error, PartialEq, Eq)]
pub enum PermError {
    #[error("expected dimension {expected}, found {found}")]
    WrongDimension { expected: String, found: usize },
    #[error("system has no tree metadata; build it with level_permutation_system")]
    NoTree,
    #[error("range/system mismatch: {0}")]
    Mismatch(String),
}

/// Elements of one permutation with ranks in `(lo, hi]`, written 0-based as
/// `[lo, hi)`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub struct IntervalRef {
    pub perm: usize,
    pub lo: usize,
    pub hi: usize,
}

/// A named block of permutations inside a system (e.g. one per threshold).
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct PermGroup {
    pub label: String,
    pub perms: std::ops::Range<usize>,
}

/// `ℓ` orderings of a ground set of colorable owners.
///
/// Canonical and level systems are bijections over the owners; systems
/// assembled from liftings repeat an owner once per lifted element.
#[derive(Clone, Debug)]
pub struct PermutationSystem {
    owner_count: usize,
    perms: Vec<Vec<u32>>,
    groups: Vec<PermGroup>,
    tree: Option<LevelTree>,
}

impl PermutationSystem {
    pub fn from_perms(owner_count: usize, perms: Vec<Vec<u32>>) -> Self {
        PermutationSystem { owner_count, perms, groups: Vec::new(), tree: None }
    }

    pub fn owner_count(&self) -> usize {
        self.owner_count
    }

    pub fn perms(&self) -> &[Vec<u32>] {
        &self.perms
    }

    pub fn groups(&self) -> &[PermGroup] {
        &self.groups
    }

    pub fn total_elements(&self) -> usize {
        self.perms.iter().map(Vec::len).sum()
    }

    /// Appends another system over the same owner universe as a labelled
    /// group. The absorbed system's owner indices must already refer to this
    /// system's owners.
    pub fn absorb(&mut self, label: String, perms: Vec<Vec<u32>>) {
        let base = self.perms.len();
        self.groups.push(PermGroup { label, perms: base..base + perms.len() });
        self.perms.extend(perms);
    }

    pub fn empty(owner_count: usize) -> Self {
        PermutationSystem { owner_count, perms: Vec::new(), groups: Vec::new(), tree: None }
    }
}

/// The `k` canonical permutations of a 1D uncertain set: permutation `j`
/// sorts the points by their `j`-th location, ties broken by (value, id).
pub fn canonical_permutation_system(
    p: &UncertainPointSet,
) -> Result<PermutationSystem, PermError> {
    if p.dim() != 1 {
        return Err(PermError::WrongDimension { expected: "1".into(), found: p.dim() });
    }
    let n = p.len();
    let perms = (0..p.k())
        .map(|j| {
            let mut order: Vec<u32> = (0..n as u32).collect();
            order.sort_by(|&a, &b| {
                let pa = &p.points()[a as usize];
                let pb = &p.points()[b as usize];
                pa.locations[j][0]
                    .cmp(&pb.locations[j][0])
                    .then_with(|| pa.id.cmp(&pb.id))
            });
            order
        })
        .collect();
    Ok(PermutationSystem { owner_count: n, perms, groups: Vec::new(), tree: None })
}

#[derive(Clone, Debug)]
struct LevelTree {
    dim: usize,
    levels: usize, // 1 + ceil(log2 n), shared by every axis
    root: AxisNode,
}

/// Tree over one axis: elements in this axis's sorted order plus, per level,
/// the per-node content for the remaining axes. Ranks are padded to a power
/// of two with trailing empty slots, so a node at (level, index) covers slots
/// `[index * w, (index + 1) * w)` with `w = slots >> level`.
#[derive(Clone, Debug)]
struct AxisNode {
    keys: Vec<Rat>,
    levels: Vec<Vec<NodeContent>>,
}

#[derive(Clone, Debug)]
enum NodeContent {
    /// last axis: node's elements sorted by it
    Leaf { order: Vec<u32>, keys: Vec<Rat> },
    Tree(Box<AxisNode>),
}

fn sort_by_axis(points: &[Vec<Rat>], idx: &[u32], axis: usize) -> (Vec<u32>, Vec<Rat>) {
    let mut order: Vec<u32> = idx.to_vec();
    order.sort_by(|&a, &b| {
        points[a as usize][axis]
            .cmp(&points[b as usize][axis])
            .then_with(|| a.cmp(&b))
    });
    let keys = order.iter().map(|&i| points[i as usize][axis].clone()).collect();
    (order, keys)
}

fn build_axis(points: &[Vec<Rat>], idx: &[u32], axis: usize, levels: usize, dim: usize) -> AxisNode {
    let (sorted, keys) = sort_by_axis(points, idx, axis);
    let m = sorted.len();
    let slots = 1usize << (levels - 1);
    let mut level_nodes = Vec::with_capacity(levels);
    for level in 0..levels {
        let width = slots >> level;
        let node_count = 1usize << level;
        let mut nodes = Vec::with_capacity(node_count);
        for node in 0..node_count {
            let lo = (node * width).min(m);
            let hi = ((node + 1) * width).min(m);
            let members = &sorted[lo..hi];
            let content = if axis + 2 == dim {
                let (order, keys) = sort_by_axis(points, members, axis + 1);
                NodeContent::Leaf { order, keys }
            } else {
                NodeContent::Tree(Box::new(build_axis(points, members, axis + 1, levels, dim)))
            };
            nodes.push(content);
        }
        level_nodes.push(nodes);
    }
    AxisNode { keys, levels: level_nodes }
}

/// Emits this subtree's permutations for every level tuple of the remaining
/// axes, row-major (this axis's level varies slowest).
fn collect_perms(node: &AxisNode, out: &mut Vec<Vec<u32>>) {
    for level_nodes in &node.levels {
        let per_node: Vec<Vec<Vec<u32>>> = level_nodes
            .iter()
            .map(|content| match content {
                NodeContent::Leaf { order, .. } => vec![order.clone()],
                NodeContent::Tree(t) => {
                    let mut inner = Vec::new();
                    collect_perms(t, &mut inner);
                    inner
                }
            })
            .collect();
        let tuples = per_node.first().map_or(1, Vec::len);
        for t in 0..tuples {
            let mut perm = Vec::new();
            for node_perms in &per_node {
                perm.extend_from_slice(&node_perms[t]);
            }
            out.push(perm);
        }
    }
}

/// Level permutation system over `d >= 2` dimensional locations.
///
/// A balanced tree on ranks is built over the first coordinate; each of its
/// `1 + ceil(log2 n)` levels contributes the concatenation of its nodes'
/// points ordered by the remaining coordinates, recursing once per extra
/// dimension. Permutations are indexed by the level tuple in row-major
/// order, which fixes the indexing the construction leaves open for `d > 2`.
pub fn level_permutation_system(points: &[Vec<Rat>]) -> Result<PermutationSystem, PermError> {
    let dim = points.first().map_or(0, Vec::len);
    if dim < 2 {
        return Err(PermError::WrongDimension { expected: ">= 2".into(), found: dim });
    }
    let n = points.len();
    let levels = 1 + n.next_power_of_two().trailing_zeros() as usize;
    let idx: Vec<u32> = (0..n as u32).collect();
    let root = build_axis(points, &idx, 0, levels, dim);
    let mut perms = Vec::new();
    collect_perms(&root, &mut perms);
    debug_assert_eq!(perms.len(), levels.pow(dim as u32 - 1));
    Ok(PermutationSystem {
        owner_count: n,
        perms,
        groups: Vec::new(),
        tree: Some(LevelTree { dim, levels, root }),
    })
}

/// Canonical cover of the slot interval `[lo, hi)` by maximal aligned nodes;
/// at most two per level.
fn cover_nodes(levels: usize, lo: usize, hi: usize, out: &mut Vec<(usize, usize)>) {
    fn rec(
        level: usize,
        node: usize,
        nlo: usize,
        nhi: usize,
        lo: usize,
        hi: usize,
        out: &mut Vec<(usize, usize)>,
    ) {
        if hi <= nlo || nhi <= lo {
            return;
        }
        if lo <= nlo && nhi <= hi {
            out.push((level, node));
            return;
        }
        let mid = (nlo + nhi) / 2;
        rec(level + 1, node * 2, nlo, mid, lo, hi, out);
        rec(level + 1, node * 2 + 1, mid, nhi, lo, hi, out);
    }
    rec(0, 0, 0, 1usize << (levels - 1), lo, hi, out);
}

fn rank_range(keys: &[Rat], a: &Rat, b: &Rat) -> (usize, usize) {
    (keys.partition_point(|v| v < a), keys.partition_point(|v| v <= b))
}

fn decompose_axis(
    node: &AxisNode,
    bounds: &[(Rat, Rat)],
    levels: usize,
    perm_stride: usize,
    perm_base: usize,
    elem_base: usize,
    out: &mut Vec<IntervalRef>,
) {
    let (a, b) = &bounds[0];
    let (lo, hi) = rank_range(&node.keys, a, b);
    if lo >= hi {
        return;
    }
    let m = node.keys.len();
    let mut chosen = Vec::new();
    cover_nodes(levels, lo, hi, &mut chosen);
    for (level, node_idx) in chosen {
        let width = (1usize << (levels - 1)) >> level;
        // padding sits at the end of the slot range, so the node's segment
        // inside this level's permutation starts at min(slot_lo, m)
        let seg_base = elem_base + (node_idx * width).min(m);
        let perm = perm_base + level * perm_stride;
        match &node.levels[level][node_idx] {
            NodeContent::Leaf { keys, .. } => {
                let (la, lb) = &bounds[1];
                let (llo, lhi) = rank_range(keys, la, lb);
                if llo < lhi {
                    out.push(IntervalRef { perm, lo: seg_base + llo, hi: seg_base + lhi });
                }
            }
            NodeContent::Tree(t) => {
                decompose_axis(
                    t,
                    &bounds[1..],
                    levels,
                    perm_stride / levels,
                    perm,
                    seg_base,
                    out,
                );
            }
        }
    }
}

/// Decomposes `r ∩ S` into pairwise disjoint rank intervals of the level
/// permutations; their union is exactly the set of points inside `r`.
pub fn decompose_range(sys: &PermutationSystem, r: &Range) -> Result<Vec<IntervalRef>, PermError> {
    let tree = sys.tree.as_ref().ok_or(PermError::NoTree)?;
    let bounds = match r {
        Range::Rect { bounds } => bounds,
        other => return Err(PermError::Mismatch(format!("expected a rect, got {other}"))),
    };
    if bounds.len() != tree.dim {
        return Err(PermError::Mismatch(format!(
            "rect dimension {} vs system dimension {}",
            bounds.len(),
            tree.dim
        )));
    }
    let stride = tree.levels.pow(tree.dim as u32 - 2);
    let mut out = Vec::new();
    decompose_axis(&tree.root, bounds, tree.levels, stride, 0, 0, &mut out);
    Ok(out)
}

/// Resolves an interval back to the owners it selects.
pub fn interval_members(sys: &PermutationSystem, iv: &IntervalRef) -> Vec<u32> {
    sys.perms[iv.perm][iv.lo..iv.hi].to_vec()
}
