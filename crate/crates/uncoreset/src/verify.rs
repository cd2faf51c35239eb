//! Exact error measurement for every coreset kind, quantization checking,
//! variance validation, and the zero-bias test.

use crate::discrepancy::{find_coloring, ColoringBudget};
use crate::exact::{mix_seed, rat_to_f64, rat_usize, Rat};
use crate::mergereduce::{
    merge_reduce, BuildTarget, GuaranteeKind, MergeReduceParams, SidePolicy,
};
use crate::model::UncertainPointSet;
use crate::queries::rq_cdf;
use crate::ranges::{
    canonical_ranges_with, inclusion_prob, CoverConfig, FamilyDescriptor, FamilyKind, Range,
};
use num_traits::{One, Signed, Zero};
use rayon::prelude::*;

#[derive(Debug, thiserror::Error, PartialEq)]
pub enum VerifyError {
    #[error(transparent)]
    Range(#[from] crate::ranges::RangeError),
    #[error(transparent)]
    Query(#[from] crate::queries::QueryError),
    #[error(transparent)]
    MergeReduce(#[from] crate::mergereduce::MrError),
    #[error("need at least {need} trials, got {got}")]
    TooFewTrials { need: usize, got: usize },
}

/// Cap on stored per-range rows; the sup and its witness are always exact.
const DETAIL_CAP: usize = 4096;

#[derive(Clone, Debug)]
pub struct RangeErrorDetail {
    pub range: Range,
    pub error: Rat,
    pub tau: Option<Rat>,
}

/// Measured worst-case query gaps between a set and its coreset.
#[derive(Clone, Debug)]
pub struct ErrorReport {
    pub family: FamilyKind,
    pub max_re_error: Rat,
    pub re_argmax: Option<Range>,
    pub sup_rc_error: Rat,
    pub rc_argmax: Option<(Range, Rat)>,
    pub details: Vec<RangeErrorDetail>,
}

impl ErrorReport {
    fn empty(family: FamilyKind) -> Self {
        ErrorReport {
            family,
            max_re_error: Rat::zero(),
            re_argmax: None,
            sup_rc_error: Rat::zero(),
            rc_argmax: None,
            details: Vec::new(),
        }
    }

    fn cap_details(&mut self) {
        self.details.sort_by(|a, b| b.error.cmp(&a.error).then_with(|| {
            format!("{}", a.range).cmp(&format!("{}", b.range))
        }));
        self.details.truncate(DETAIL_CAP);
    }
}

/// Distinct sorted 1D certified values of a set.
fn certified_values(p: &UncertainPointSet) -> Vec<Rat> {
    let mut v: Vec<Rat> =
        p.points().iter().flat_map(|pt| pt.locations.iter().map(|l| l[0].clone())).collect();
    v.sort();
    v
}

fn prefix_count(sorted: &[Rat], x: &Rat) -> i64 {
    sorted.partition_point(|v| v <= x) as i64
}

/// Exact max over the family of |E_r(P) - E_r(T)|, with the attaining range.
pub fn measure_re_error(
    p: &UncertainPointSet,
    t: &UncertainPointSet,
    f: &FamilyDescriptor,
) -> Result<ErrorReport, VerifyError> {
    measure_re_error_with(p, t, f, CoverConfig::default())
}

/// As [`measure_re_error`] with an explicit rectangle-cover budget.
pub fn measure_re_error_with(
    p: &UncertainPointSet,
    t: &UncertainPointSet,
    f: &FamilyDescriptor,
    cover_cfg: CoverConfig,
) -> Result<ErrorReport, VerifyError> {
    let mut report = ErrorReport::empty(f.kind);
    let (np, nt) = (p.len() as i64, t.len() as i64);
    let k = p.k() as i64;
    let denom = Rat::new((k * np * nt).into(), 1.into());
    match f.kind {
        FamilyKind::HalfLine => {
            let pv = certified_values(p);
            let tv = certified_values(t);
            let mut cuts: Vec<Rat> = pv.iter().chain(tv.iter()).cloned().collect();
            cuts.sort();
            cuts.dedup();
            for x in &cuts {
                let h = prefix_count(&pv, x) * nt - prefix_count(&tv, x) * np;
                let err = Rat::new(h.abs().into(), 1.into()) / &denom;
                if err > report.max_re_error {
                    report.max_re_error = err.clone();
                    report.re_argmax = Some(Range::HalfLine { x: x.clone() });
                }
                report.details.push(RangeErrorDetail {
                    range: Range::HalfLine { x: x.clone() },
                    error: err,
                    tau: None,
                });
            }
        }
        FamilyKind::Interval => {
            let pv = certified_values(p);
            let tv = certified_values(t);
            let mut cuts: Vec<Rat> = pv.iter().chain(tv.iter()).cloned().collect();
            cuts.sort();
            cuts.dedup();
            // h(x) = cnt_p(x) * nt - cnt_t(x) * np; the widest spread of h
            // over cuts (with the empty prefix) is the interval max
            let (mut max_h, mut max_i) = (0i64, None::<usize>);
            let (mut min_h, mut min_i) = (0i64, None::<usize>);
            for (i, x) in cuts.iter().enumerate() {
                let h = prefix_count(&pv, x) * nt - prefix_count(&tv, x) * np;
                if h > max_h {
                    max_h = h;
                    max_i = Some(i);
                }
                if h < min_h {
                    min_h = h;
                    min_i = Some(i);
                }
            }
            report.max_re_error = Rat::new((max_h - min_h).into(), 1.into()) / &denom;
            if report.max_re_error > Rat::zero() {
                // interval from just after the lower cut to the upper cut
                let (lo_i, hi_i) = match (max_i, min_i) {
                    (Some(a), Some(b)) if a < b => (Some(a), b),
                    (Some(a), Some(b)) => (Some(b), a),
                    (Some(a), None) => (None, a),
                    (None, Some(b)) => (None, b),
                    (None, None) => (None, 0),
                };
                let a = match lo_i {
                    Some(i) => cuts[i + 1].clone(),
                    None => cuts[0].clone(),
                };
                let b = cuts[hi_i].clone();
                report.re_argmax = Some(Range::Interval { a, b });
            }
        }
        FamilyKind::Rect => {
            let cover = canonical_ranges_with(&p.certify(), f, cover_cfg)?;
            let chunks: Vec<(Rat, Range)> = cover
                .par_iter()
                .map(|r| {
                    let mut cp = 0i64;
                    let mut ct = 0i64;
                    for pt in p.points() {
                        for loc in &pt.locations {
                            if r.contains(loc).unwrap() {
                                cp += 1;
                            }
                        }
                    }
                    for pt in t.points() {
                        for loc in &pt.locations {
                            if r.contains(loc).unwrap() {
                                ct += 1;
                            }
                        }
                    }
                    let h = (cp * nt - ct * np).abs();
                    (Rat::new(h.into(), 1.into()), r.clone())
                })
                .collect();
            for (h, r) in chunks {
                let err = h / &denom;
                if err > report.max_re_error {
                    report.max_re_error = err.clone();
                    report.re_argmax = Some(r.clone());
                }
                report.details.push(RangeErrorDetail { range: r, error: err, tau: None });
            }
        }
    }
    if let Some(r) = &report.re_argmax {
        // the witness must reproduce the reported value on re-evaluation
        let direct = crate::queries::expected_fraction(p, r)?
            - crate::queries::expected_fraction(t, r)?;
        debug_assert_eq!(direct.abs(), report.max_re_error);
    }
    report.cap_details();
    Ok(report)
}

/// The `t`-th smallest location value of each point (1D).
fn kth_smallest_lists(p: &UncertainPointSet) -> Vec<Vec<Rat>> {
    let k = p.k();
    let mut per_t: Vec<Vec<Rat>> = vec![Vec::with_capacity(p.len()); k];
    for pt in p.points() {
        let mut vals: Vec<Rat> = pt.locations.iter().map(|l| l[0].clone()).collect();
        vals.sort();
        for (t, v) in vals.into_iter().enumerate() {
            per_t[t].push(v);
        }
    }
    for list in &mut per_t {
        list.sort();
    }
    per_t
}

/// Exact sup over ranges and thresholds of |G_P(tau) - G_T(tau)|. Both step
/// functions have breakpoints only at multiples of `1/k`, so the sweep over
/// `tau ∈ {1/k, ..., k/k}` is exhaustive.
pub fn measure_rc_error(
    p: &UncertainPointSet,
    t: &UncertainPointSet,
    f: &FamilyDescriptor,
) -> Result<ErrorReport, VerifyError> {
    measure_rc_error_with(p, t, f, CoverConfig::default())
}

/// As [`measure_rc_error`] with an explicit rectangle-cover budget.
pub fn measure_rc_error_with(
    p: &UncertainPointSet,
    t: &UncertainPointSet,
    f: &FamilyDescriptor,
    cover_cfg: CoverConfig,
) -> Result<ErrorReport, VerifyError> {
    let mut report = ErrorReport::empty(f.kind);
    let (np, nt) = (p.len() as i64, t.len() as i64);
    let k = p.k();
    let denom = Rat::new((np * nt).into(), 1.into());
    match f.kind {
        FamilyKind::HalfLine => {
            let pk = kth_smallest_lists(p);
            let tk = kth_smallest_lists(t);
            let mut cuts = certified_values(p);
            cuts.extend(certified_values(t));
            cuts.sort();
            cuts.dedup();
            for x in &cuts {
                let mut worst_here = Rat::zero();
                let mut worst_tau = None;
                for tt in 0..k {
                    let h = prefix_count(&pk[tt], x) * nt - prefix_count(&tk[tt], x) * np;
                    let err = Rat::new(h.abs().into(), 1.into()) / &denom;
                    let tau = Rat::new(((tt + 1) as i64).into(), (k as i64).into());
                    if err > report.sup_rc_error {
                        report.sup_rc_error = err.clone();
                        report.rc_argmax =
                            Some((Range::HalfLine { x: x.clone() }, tau.clone()));
                    }
                    if err > worst_here {
                        worst_here = err;
                        worst_tau = Some(tau);
                    }
                }
                report.details.push(RangeErrorDetail {
                    range: Range::HalfLine { x: x.clone() },
                    error: worst_here,
                    tau: worst_tau,
                });
            }
        }
        FamilyKind::Interval => {
            // O(cuts^2 * k) two-pointer sweep over closed value intervals
            let mut vals = certified_values(p);
            vals.extend(certified_values(t));
            vals.sort();
            vals.dedup();
            let locate = |set: &UncertainPointSet| -> Vec<Vec<usize>> {
                let mut buckets = vec![Vec::new(); vals.len()];
                for (pos, pt) in set.points().iter().enumerate() {
                    for loc in &pt.locations {
                        let i = vals.partition_point(|v| v < &loc[0]);
                        buckets[i].push(pos);
                    }
                }
                buckets
            };
            let pb = locate(p);
            let tb = locate(t);
            let mut best = 0i64;
            let mut argmax = None;
            for start in 0..vals.len() {
                let mut pc = vec![0usize; p.len()];
                let mut tc = vec![0usize; t.len()];
                let mut ge_p = vec![0i64; k + 1];
                let mut ge_t = vec![0i64; k + 1];
                for end in start..vals.len() {
                    for &pos in &pb[end] {
                        pc[pos] += 1;
                        if pc[pos] <= k {
                            ge_p[pc[pos]] += 1;
                        }
                    }
                    for &pos in &tb[end] {
                        tc[pos] += 1;
                        if tc[pos] <= k {
                            ge_t[tc[pos]] += 1;
                        }
                    }
                    for tt in 1..=k {
                        let h = (ge_p[tt] * nt - ge_t[tt] * np).abs();
                        if h > best {
                            best = h;
                            argmax = Some((
                                Range::Interval {
                                    a: vals[start].clone(),
                                    b: vals[end].clone(),
                                },
                                Rat::new((tt as i64).into(), (k as i64).into()),
                            ));
                        }
                    }
                }
            }
            report.sup_rc_error = Rat::new(best.into(), 1.into()) / &denom;
            report.rc_argmax = argmax;
        }
        FamilyKind::Rect => {
            let cover = canonical_ranges_with(&p.certify(), f, cover_cfg)?;
            for r in &cover {
                let mut worst_here = Rat::zero();
                let mut worst_tau = None;
                let count_ge = |set: &UncertainPointSet| -> Vec<i64> {
                    let mut ge = vec![0i64; k + 1];
                    for pt in set.points() {
                        let mut c = 0usize;
                        for loc in &pt.locations {
                            if r.contains(loc).unwrap() {
                                c += 1;
                            }
                        }
                        for cell in &mut ge[1..=c] {
                            *cell += 1;
                        }
                    }
                    ge
                };
                let gp = count_ge(p);
                let gt = count_ge(t);
                for tt in 1..=k {
                    let h = (gp[tt] * nt - gt[tt] * np).abs();
                    let err = Rat::new(h.into(), 1.into()) / &denom;
                    let tau = Rat::new((tt as i64).into(), (k as i64).into());
                    if err > report.sup_rc_error {
                        report.sup_rc_error = err.clone();
                        report.rc_argmax = Some((r.clone(), tau.clone()));
                    }
                    if err > worst_here {
                        worst_here = err;
                        worst_tau = Some(tau);
                    }
                }
                report.details.push(RangeErrorDetail {
                    range: r.clone(),
                    error: worst_here,
                    tau: worst_tau,
                });
            }
        }
    }
    if let Some((r, tau)) = &report.rc_argmax {
        let direct = crate::queries::rc_fraction(p, r, tau)?
            - crate::queries::rc_fraction(t, r, tau)?;
        debug_assert_eq!(direct.abs(), report.sup_rc_error);
    }
    report.cap_details();
    Ok(report)
}

#[derive(Clone, Debug)]
pub struct QuantizationWitness {
    pub range: Range,
    pub tau: Rat,
    pub best_distance: Rat,
}

/// Verdicts for one range under the two readings of the window comparison.
///
/// `band` asks that `[F_T(tau - alpha), F_T(tau + alpha)]` intersect
/// `[F_P(tau) - eps', F_P(tau) + eps']`; this is the form the concentration
/// transfer guarantees. `pointwise` additionally demands an attained step
/// value of `F_T` within `eps'`, which is stronger exactly when `F_P(tau)`
/// falls inside a window-wide jump of `F_T`.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct RangeVerdict {
    pub band: bool,
    pub pointwise: bool,
}

/// Per-range verdicts of the horizontal-window CDF comparison. `pass` is the
/// band verdict over every range.
#[derive(Clone, Debug)]
pub struct QuantizationReport {
    pub eps_prime: Rat,
    pub alpha: Rat,
    pub pass: bool,
    pub pointwise_pass: bool,
    pub per_range: Vec<(Range, RangeVerdict)>,
    /// worst pointwise witness across all ranges and thresholds
    pub worst: Option<QuantizationWitness>,
}

impl QuantizationReport {
    pub fn range_verdict(&self, r: &Range) -> Option<RangeVerdict> {
        self.per_range.iter().find(|(range, _)| range == r).map(|(_, v)| *v)
    }
}

fn clamp01(x: Rat) -> Rat {
    if x < Rat::zero() {
        Rat::zero()
    } else if x > Rat::one() {
        Rat::one()
    } else {
        x
    }
}

/// Values `F_T` attains on the closed window `[lo, hi]`: a consecutive run
/// of its step values (zero included below the first breakpoint).
fn attained_values(cdf: &crate::queries::CdfTable, lo: &Rat, hi: &Rat) -> Vec<Rat> {
    let bps = cdf.breakpoints();
    let vals = cdf.values();
    let lo_idx = bps.partition_point(|b| b <= lo); // count of bps <= lo
    let hi_idx = bps.partition_point(|b| b <= hi);
    let mut out = Vec::with_capacity(hi_idx - lo_idx + 1);
    if lo_idx == 0 {
        out.push(Rat::zero());
    } else {
        out.push(vals[lo_idx - 1].clone());
    }
    for v in &vals[lo_idx..hi_idx] {
        out.push(v.clone());
    }
    out
}

/// Checks, for every canonical range and every threshold `tau ∈ [0, 1]`,
/// that some value of the coreset CDF inside the horizontal window
/// `[tau - alpha, tau + alpha]` comes within `eps_prime` of the original
/// CDF. The window itself is not clipped: a CDF is 0 left of its first
/// breakpoint and 1 right of its last, and the corner cases at `tau` near 0
/// or 1 rely on exactly those values. Sufficiency grid: the original CDF's
/// breakpoints plus the coreset CDF's breakpoints shifted by ±alpha.
pub fn quantization_check(
    p: &UncertainPointSet,
    t: &UncertainPointSet,
    f: &FamilyDescriptor,
    eps_prime: &Rat,
    alpha: &Rat,
) -> Result<QuantizationReport, VerifyError> {
    quantization_check_with(p, t, f, eps_prime, alpha, CoverConfig::default())
}

/// As [`quantization_check`] with an explicit rectangle-cover budget.
pub fn quantization_check_with(
    p: &UncertainPointSet,
    t: &UncertainPointSet,
    f: &FamilyDescriptor,
    eps_prime: &Rat,
    alpha: &Rat,
    cover_cfg: CoverConfig,
) -> Result<QuantizationReport, VerifyError> {
    let mut cert = p.certify();
    cert.entries.extend(t.certify().entries);
    let cover = canonical_ranges_with(&cert, f, cover_cfg)?;
    let outcomes: Vec<(Range, RangeVerdict, Option<QuantizationWitness>)> = cover
        .par_iter()
        .map(|r| {
            let fp = rq_cdf(p, r).expect("dimension-checked");
            let ft = rq_cdf(t, r).expect("dimension-checked");
            let mut grid: Vec<Rat> = vec![Rat::zero(), Rat::one()];
            grid.extend(fp.breakpoints().iter().cloned());
            for b in ft.breakpoints() {
                grid.push(clamp01(b + alpha));
                grid.push(clamp01(b - alpha));
            }
            grid.sort();
            grid.dedup();
            let mut verdict = RangeVerdict { band: true, pointwise: true };
            let mut worst: Option<QuantizationWitness> = None;
            for tau in &grid {
                let target = fp.eval(tau);
                let attained = attained_values(&ft, &(tau - alpha), &(tau + alpha));
                let band_lo = attained.first().expect("nonempty");
                let band_hi = attained.last().expect("nonempty");
                if band_lo - eps_prime > target || band_hi + eps_prime < target {
                    verdict.band = false;
                }
                // nearest attained step value to the target
                let i = attained.partition_point(|v| v < &target);
                let mut best: Option<Rat> = None;
                for cand in attained
                    .get(i.saturating_sub(1)..=i.min(attained.len() - 1))
                    .unwrap_or(&[])
                {
                    let d = (cand - &target).abs();
                    if best.as_ref().is_none_or(|b| &d < b) {
                        best = Some(d);
                    }
                }
                let dist = best.expect("window always attains a value");
                if &dist > eps_prime {
                    verdict.pointwise = false;
                    if worst.as_ref().is_none_or(|w| dist > w.best_distance) {
                        worst = Some(QuantizationWitness {
                            range: r.clone(),
                            tau: tau.clone(),
                            best_distance: dist,
                        });
                    }
                }
            }
            (r.clone(), verdict, worst)
        })
        .collect();
    let mut per_range = Vec::with_capacity(outcomes.len());
    let mut worst: Option<QuantizationWitness> = None;
    let mut pass = true;
    let mut pointwise_pass = true;
    for (r, verdict, w) in outcomes {
        pass &= verdict.band;
        pointwise_pass &= verdict.pointwise;
        per_range.push((r, verdict));
        if let Some(w) = w {
            if worst.as_ref().is_none_or(|cur| w.best_distance > cur.best_distance) {
                worst = Some(w);
            }
        }
    }
    Ok(QuantizationReport {
        eps_prime: eps_prime.clone(),
        alpha: alpha.clone(),
        pass,
        pointwise_pass,
        per_range,
        worst,
    })
}

/// One inclusion-probability class of a coreset.
#[derive(Clone, Debug)]
pub struct ThresholdGroup {
    /// inclusion probability `index / k`
    pub index: usize,
    pub size: usize,
    pub weight: Rat,
    pub mean: Rat,
    pub variance_contrib: Rat,
}

#[derive(Clone, Debug)]
pub struct VarianceReport {
    pub groups: Vec<ThresholdGroup>,
    /// exact `Var[|S ∩ r| / |S|]` over instantiations of the coreset
    pub exact: Rat,
    /// sum of the per-class contributions; equals `exact` by independence
    pub decomposed: Rat,
    /// `1/(4|T|) + 3 eps + 2 k eps^2`
    pub bound: Rat,
    pub within_bound: bool,
}

/// Exact instantiation variance of the in-range fraction, its decomposition
/// over inclusion-probability classes, and the coarse bound in terms of the
/// measured threshold-count error.
pub fn variance_report(
    t: &UncertainPointSet,
    r: &Range,
    eps_rc: &Rat,
) -> Result<VarianceReport, VerifyError> {
    let k = t.k();
    let n = t.len();
    let nn = rat_usize(n);
    let mut class_sizes = vec![0usize; k + 1];
    let mut exact = Rat::zero();
    for pt in t.points() {
        let q = inclusion_prob(pt, r)?;
        let hits = (q.clone() * rat_usize(k)).to_integer();
        class_sizes[usize::try_from(hits.clone()).expect("0..=k")] += 1;
        exact += &q * (Rat::one() - &q);
    }
    exact /= &nn * &nn;
    let mut groups = Vec::with_capacity(k + 1);
    let mut decomposed = Rat::zero();
    for (i, &size) in class_sizes.iter().enumerate() {
        let mean = Rat::new((i as i64).into(), (k as i64).into());
        let weight = rat_usize(size) / &nn;
        let contrib =
            rat_usize(size) * &mean * (Rat::one() - &mean) / (&nn * &nn);
        decomposed += &contrib;
        groups.push(ThresholdGroup { index: i, size, weight, mean, variance_contrib: contrib });
    }
    let quarter = Rat::new(1.into(), 4.into());
    let bound = &quarter / &nn
        + rat_usize(3) * eps_rc
        + rat_usize(2 * k) * eps_rc * eps_rc;
    let within_bound = exact <= bound;
    Ok(VarianceReport { groups, exact, decomposed, bound, within_bound })
}

#[derive(Clone, Debug)]
pub struct ZeroBiasReport {
    pub range: Range,
    pub trials: usize,
    pub mean: f64,
    pub stderr: f64,
    pub pass: bool,
}

/// Builds `trials` independent reductions and tests that the signed error on
/// a fixed canonical range has mean within three standard errors of zero.
/// The side policy parameter admits the deliberately biased control that
/// must fail this test.
pub fn zero_bias_check(
    p: &UncertainPointSet,
    f: &FamilyDescriptor,
    eps: f64,
    params: &MergeReduceParams,
    trials: usize,
    side: &SidePolicy,
) -> Result<ZeroBiasReport, VerifyError> {
    if trials < 100 {
        return Err(VerifyError::TooFewTrials { need: 100, got: trials });
    }
    let cover = canonical_ranges_with(&p.certify(), f, CoverConfig::default())?;
    let range = cover[cover.len() / 2].clone();
    let target = BuildTarget { kind: GuaranteeKind::Re, family: f.clone() };
    let base = crate::queries::expected_fraction(p, &range)?;
    let coloring_fn = |sys: &crate::permutations::PermutationSystem, seed: u64| {
        find_coloring(sys, &ColoringBudget::light(), seed).coloring
    };
    let errors: Vec<f64> = (0..trials)
        .into_par_iter()
        .map(|trial| {
            let trial_params = MergeReduceParams {
                seed: mix_seed(params.seed, 0x7a62, trial as u64),
                ..params.clone()
            };
            let out = merge_reduce(p, &target, eps, &trial_params, &coloring_fn, side)
                .expect("validated target");
            let t = p.subset_by_ids(&out.ids).expect("subset ids");
            let et = crate::queries::expected_fraction(&t, &range).expect("same dims");
            rat_to_f64(&(base.clone() - et))
        })
        .collect();
    let m = errors.len() as f64;
    let mean = errors.iter().sum::<f64>() / m;
    let var = errors.iter().map(|e| (e - mean) * (e - mean)).sum::<f64>() / (m - 1.0);
    let stderr = (var / m).sqrt();
    let pass = if stderr == 0.0 { mean == 0.0 } else { mean.abs() <= 3.0 * stderr };
    Ok(ZeroBiasReport { range, trials, mean, stderr, pass })
}
