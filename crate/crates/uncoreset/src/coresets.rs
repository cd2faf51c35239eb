//! Public coreset constructors: random sampling and discrepancy-based
//! reduction for the expectation and threshold-count guarantees, plus the
//! parameter transfer that turns an expectation coreset into a quantile one.

use crate::discrepancy::{find_coloring, Coloring, ColoringBudget};
use crate::exact::{mix_seed, rat_to_f64, Rat};
use crate::lifting::LiftingStats;
use crate::mergereduce::{
    merge_reduce, BuildTarget, GuaranteeKind, MergeReduceParams, MrError, RoundEntry, SidePolicy,
};
use crate::model::{PointId, UncertainPointSet};
use crate::permutations::PermutationSystem;
use crate::ranges::{FamilyDescriptor, FamilyKind};
use crate::verify::measure_re_error;
use rand::seq::index::sample;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

#[derive(Debug, thiserror::Error, PartialEq)]
pub enum CoresetError {
    #[error("epsilon {0} outside (0, 1)")]
    BadEpsilon(f64),
    #[error("delta {0} outside (0, 1)")]
    BadDelta(f64),
    #[error("epsilon' {0} outside (0, 1/2)")]
    BadEpsPrime(f64),
    #[error(transparent)]
    MergeReduce(#[from] MrError),
    #[error(transparent)]
    Verify(#[from] crate::verify::VerifyError),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CoresetKind {
    Re,
    Rc,
    Rq,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    Sample,
    Discrepancy,
}

/// Sampling constants: failure probability and the size multiplier.
#[derive(Clone, Copy, Debug)]
pub struct SampleParams {
    pub delta: f64,
    pub c_samp: f64,
}

impl Default for SampleParams {
    fn default() -> Self {
        SampleParams { delta: 0.1, c_samp: 1.0 }
    }
}

/// Quantile-coreset parameters: the measured expectation error, the vertical
/// tolerance, and the derived horizontal window.
#[derive(Clone, Debug)]
pub struct RqParams {
    pub eps_measured: Rat,
    pub eps_prime: f64,
    pub alpha: f64,
    /// the guarantee is vacuous when the window reaches 1/2
    pub alpha_exceeds_half: bool,
}

/// A constructed coreset: the surviving uncertain points with all their
/// locations, plus how they were chosen.
#[derive(Clone, Debug)]
pub struct CoresetArtifact {
    pub subset: UncertainPointSet,
    pub kind: CoresetKind,
    pub method: Method,
    pub family: FamilyDescriptor,
    pub eps: f64,
    pub seed: u64,
    pub sample: Option<SampleParams>,
    pub rq: Option<RqParams>,
    pub ledger: Vec<RoundEntry>,
    pub trivial: bool,
    pub lifting: Option<LiftingStats>,
}

impl CoresetArtifact {
    pub fn ids(&self) -> Vec<PointId> {
        self.subset.ids()
    }
}

fn check_eps(eps: f64) -> Result<(), CoresetError> {
    if eps > 0.0 && eps < 1.0 {
        Ok(())
    } else {
        Err(CoresetError::BadEpsilon(eps))
    }
}

/// Sample size for the expectation guarantee:
/// `c * (1 / eps^2) * (vc + ln(k / delta))`, capped at `n` by the caller.
pub fn re_sample_size(eps: f64, sp: &SampleParams, vc: usize, k: usize) -> usize {
    let raw = sp.c_samp * (1.0 / (eps * eps)) * (vc as f64 + (k as f64 / sp.delta).ln());
    raw.ceil().max(1.0) as usize
}

/// Sample size for the threshold-count guarantee:
/// `c * (1 / eps^2) * (vc + ln(1 / delta))`.
pub fn rc_sample_size(eps: f64, sp: &SampleParams, vc: usize) -> usize {
    let raw = sp.c_samp * (1.0 / (eps * eps)) * (vc as f64 + (1.0 / sp.delta).ln());
    raw.ceil().max(1.0) as usize
}

fn uniform_subset(p: &UncertainPointSet, size: usize, seed: u64) -> UncertainPointSet {
    if size >= p.len() {
        return p.clone();
    }
    let mut rng = ChaCha8Rng::seed_from_u64(mix_seed(seed, 0x7361_6d70, 0));
    let mut picks = sample(&mut rng, p.len(), size).into_vec();
    picks.sort_unstable();
    let ids: Vec<PointId> = picks.iter().map(|&i| p.points()[i].id).collect();
    p.subset_by_ids(&ids).expect("sampled ids exist")
}

fn sample_artifact(
    p: &UncertainPointSet,
    f: &FamilyDescriptor,
    kind: CoresetKind,
    eps: f64,
    sp: &SampleParams,
    seed: u64,
    size: usize,
) -> CoresetArtifact {
    let subset = uniform_subset(p, size, seed);
    let trivial = subset.len() == p.len();
    CoresetArtifact {
        subset,
        kind,
        method: Method::Sample,
        family: f.clone(),
        eps,
        seed,
        sample: Some(*sp),
        rq: None,
        ledger: Vec::new(),
        trivial,
        lifting: None,
    }
}

/// Uniform sample without replacement preserving the expectation guarantee
/// with probability `1 - delta`.
pub fn build_re_sample(
    p: &UncertainPointSet,
    f: &FamilyDescriptor,
    eps: f64,
    sp: &SampleParams,
    seed: u64,
) -> Result<CoresetArtifact, CoresetError> {
    check_eps(eps)?;
    if !(sp.delta > 0.0 && sp.delta < 1.0) {
        return Err(CoresetError::BadDelta(sp.delta));
    }
    let size = re_sample_size(eps, sp, f.vc_dim, p.k()).min(p.len());
    Ok(sample_artifact(p, f, CoresetKind::Re, eps, sp, seed, size))
}

/// Uniform sample without replacement preserving the threshold-count
/// guarantee with probability `1 - delta`.
pub fn build_rc_sample(
    p: &UncertainPointSet,
    f: &FamilyDescriptor,
    eps: f64,
    sp: &SampleParams,
    seed: u64,
) -> Result<CoresetArtifact, CoresetError> {
    check_eps(eps)?;
    if !(sp.delta > 0.0 && sp.delta < 1.0) {
        return Err(CoresetError::BadDelta(sp.delta));
    }
    let size = rc_sample_size(eps, sp, f.vc_dim).min(p.len());
    Ok(sample_artifact(p, f, CoresetKind::Rc, eps, sp, seed, size))
}

/// Discrepancy scale and log exponent for the reduction, by family and
/// guarantee.
fn family_gamma_omega(kind: GuaranteeKind, f: &FamilyDescriptor, k: usize) -> (f64, f64) {
    let kf = k as f64;
    match (kind, f.kind) {
        (GuaranteeKind::Re, FamilyKind::HalfLine) | (GuaranteeKind::Re, FamilyKind::Interval) => {
            (kf.sqrt(), 1.0)
        }
        (GuaranteeKind::Re, FamilyKind::Rect) => {
            (kf.sqrt(), (3.0 * f.dim as f64 - 1.0) / 2.0)
        }
        (GuaranteeKind::Rc, FamilyKind::HalfLine) => (kf.sqrt(), 1.0),
        (GuaranteeKind::Rc, FamilyKind::Interval) => (kf * kf, 4.0),
        (GuaranteeKind::Rc, FamilyKind::Rect) => {
            (kf.powf(3.0 * f.dim as f64 + 0.5), 6.0 * f.dim as f64 - 0.5)
        }
    }
}

fn resolve_params(
    kind: GuaranteeKind,
    f: &FamilyDescriptor,
    k: usize,
    mrp: &MergeReduceParams,
) -> MergeReduceParams {
    let (g, o) = family_gamma_omega(kind, f, k);
    MergeReduceParams {
        gamma: Some(mrp.gamma_or(g)),
        omega: Some(mrp.omega_or(o)),
        ..mrp.clone()
    }
}

fn default_coloring(sys: &PermutationSystem, seed: u64) -> Coloring {
    find_coloring(sys, &ColoringBudget::default(), seed).coloring
}

fn disc_artifact(
    p: &UncertainPointSet,
    target: BuildTarget,
    kind: CoresetKind,
    eps: f64,
    params: &MergeReduceParams,
    coloring_fn: &crate::mergereduce::ColoringFn,
    side: &SidePolicy,
) -> Result<CoresetArtifact, CoresetError> {
    let out = merge_reduce(p, &target, eps, params, coloring_fn, side)?;
    let subset = p.subset_by_ids(&out.ids).expect("surviving ids exist");
    Ok(CoresetArtifact {
        subset,
        kind,
        method: Method::Discrepancy,
        family: target.family,
        eps,
        seed: params.seed,
        sample: None,
        rq: None,
        ledger: out.ledger,
        trivial: out.trivial,
        lifting: out.lifting,
    })
}

/// Expectation coreset by iterated low-discrepancy halving. Unset
/// `gamma`/`omega` take the family defaults.
pub fn build_re_disc(
    p: &UncertainPointSet,
    f: &FamilyDescriptor,
    eps: f64,
    mrp: &MergeReduceParams,
) -> Result<CoresetArtifact, CoresetError> {
    build_re_disc_with(p, f, eps, mrp, &default_coloring, &SidePolicy::Random)
}

/// As [`build_re_disc`] with an injectable coloring procedure and side
/// policy.
pub fn build_re_disc_with(
    p: &UncertainPointSet,
    f: &FamilyDescriptor,
    eps: f64,
    mrp: &MergeReduceParams,
    coloring_fn: &crate::mergereduce::ColoringFn,
    side: &SidePolicy,
) -> Result<CoresetArtifact, CoresetError> {
    check_eps(eps)?;
    let params = resolve_params(GuaranteeKind::Re, f, p.k(), mrp);
    let target = BuildTarget { kind: GuaranteeKind::Re, family: f.clone() };
    disc_artifact(p, target, CoresetKind::Re, eps, &params, coloring_fn, side)
}

/// Threshold-count coreset by iterated low-discrepancy halving over the
/// per-threshold systems.
pub fn build_rc_disc(
    p: &UncertainPointSet,
    f: &FamilyDescriptor,
    eps: f64,
    mrp: &MergeReduceParams,
) -> Result<CoresetArtifact, CoresetError> {
    build_rc_disc_with(p, f, eps, mrp, &default_coloring, &SidePolicy::Random)
}

pub fn build_rc_disc_with(
    p: &UncertainPointSet,
    f: &FamilyDescriptor,
    eps: f64,
    mrp: &MergeReduceParams,
    coloring_fn: &crate::mergereduce::ColoringFn,
    side: &SidePolicy,
) -> Result<CoresetArtifact, CoresetError> {
    check_eps(eps)?;
    let params = resolve_params(GuaranteeKind::Rc, f, p.k(), mrp);
    let target = BuildTarget { kind: GuaranteeKind::Rc, family: f.clone() };
    disc_artifact(p, target, CoresetKind::Rc, eps, &params, coloring_fn, side)
}

/// The horizontal window that a size-`t` expectation coreset with error
/// `eps` guarantees at vertical tolerance `eps_prime`:
/// `eps + sqrt(ln(2 / eps_prime) / (2 t))`.
pub fn rq_alpha(eps: f64, eps_prime: f64, t_size: usize) -> f64 {
    eps + ((2.0 / eps_prime).ln() / (2.0 * t_size as f64)).sqrt()
}

#[derive(Clone, Debug)]
pub enum MethodParams {
    Sample(SampleParams),
    Discrepancy(MergeReduceParams),
}

/// Builds an expectation coreset by the chosen method, measures its true
/// expectation error, and attaches the quantile guarantee with the window
/// derived from the measured (not nominal) error.
pub fn build_rq(
    p: &UncertainPointSet,
    f: &FamilyDescriptor,
    eps: f64,
    eps_prime: f64,
    method: &MethodParams,
    seed: u64,
) -> Result<CoresetArtifact, CoresetError> {
    check_eps(eps)?;
    if !(eps_prime > 0.0 && eps_prime < 0.5) {
        return Err(CoresetError::BadEpsPrime(eps_prime));
    }
    let mut artifact = match method {
        MethodParams::Sample(sp) => build_re_sample(p, f, eps, sp, seed)?,
        MethodParams::Discrepancy(mrp) => {
            let mrp = MergeReduceParams { seed, ..mrp.clone() };
            build_re_disc(p, f, eps, &mrp)?
        }
    };
    let measured = measure_re_error(p, &artifact.subset, f)?.max_re_error;
    let alpha = rq_alpha(rat_to_f64(&measured), eps_prime, artifact.subset.len());
    artifact.kind = CoresetKind::Rq;
    artifact.rq = Some(RqParams {
        eps_measured: measured,
        eps_prime,
        alpha,
        alpha_exceeds_half: alpha >= 0.5,
    });
    Ok(artifact)
}
