//! Acceptance suite: the worked example plus exact-oracle property checks,
//! one test per criterion, each printing a pass/fail line.
//!
//! Run with `cargo test --test acceptance -- --nocapture` to see the lines.

use num_traits::{Signed, ToPrimitive, Zero};
use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use uncoreset::coresets::{
    build_rc_disc, build_rc_sample, build_re_disc, build_re_sample, build_rq, rq_alpha,
    MethodParams, SampleParams,
};
use uncoreset::datasets;
use uncoreset::discrepancy::{
    eval_disc, exhaustive_coloring, find_coloring, Coloring, ColoringBudget,
};
use uncoreset::exact::{rat, rat_f64, rat_int, rat_usize, Rat};
use uncoreset::lifting::{
    disjoint_boxes, lift_rc_1d, lift_rc_query_1d, rc_count_via_boxes, tight_apexes,
    union_contains,
};
use uncoreset::mergereduce::{coreset_size, MergeReduceParams, SidePolicy};
use uncoreset::model::{UncertainPoint, UncertainPointSet};
use uncoreset::permutations::{canonical_permutation_system, PermutationSystem};
use uncoreset::queries::{brute_force_cdf, expected_fraction, rc_fraction, rq_cdf};
use uncoreset::ranges::{canonical_ranges, FamilyDescriptor, Range};
use uncoreset::verify::{
    measure_rc_error, measure_re_error, quantization_check, variance_report, zero_bias_check,
};

fn report(criterion: usize, label: &str, pass: bool, detail: &str) {
    println!(
        "criterion {criterion} ({label}): {}: {detail}",
        if pass { "PASS" } else { "FAIL" }
    );
    assert!(pass, "criterion {criterion} ({label}): {detail}");
}

#[test]
fn criterion_01_golden_fixture() {
    let p = datasets::interleaved_ten();
    let t = datasets::interleaved_ten_odd_subset();
    let r = Range::HalfLine { x: rat_f64(13.5) };

    let ep = expected_fraction(&p, &r).unwrap();
    let et = expected_fraction(&t, &r).unwrap();
    let mut ok = ep == rat(13, 20) && et == rat(7, 10);
    ok &= (ep.clone() - et.clone()).abs() == rat(1, 20);

    let fp = rq_cdf(&p, &r).unwrap();
    ok &= fp.eval(&rat(3, 4)) == rat(99, 128);

    let ft = rq_cdf(&t, &r).unwrap();
    ok &= ft.eval(&rat(3, 5)) == rat(1, 2) && ft.eval(&rat(79, 100)) == rat(1, 2);
    ok &= ft.eval(&rat(4, 5)) == rat(7, 8) && ft.eval(&rat(99, 100)) == rat(7, 8);

    // the worked example's quantization claim, in its strong pointwise form
    let q = quantization_check(
        &p,
        &t,
        &FamilyDescriptor::half_line(),
        &rat(1016, 10_000),
        &rat(1, 10),
    )
    .unwrap();
    let verdict = q
        .per_range
        .iter()
        .find(|(range, _)| {
            matches!(range, Range::HalfLine { x } if *x >= rat_int(13) && *x < rat_int(14))
        })
        .map(|(_, v)| *v)
        .expect("separating range present in the cover");
    ok &= verdict.pointwise && verdict.band;

    report(
        1,
        "golden fixture",
        ok,
        &format!(
            "E_P = {ep}, E_T = {et}, F_P(0.75) = {}, quantization at (0.1016, 0.1) = {:?}",
            fp.eval(&rat(3, 4)),
            verdict
        ),
    );
}

#[test]
fn criterion_02_oracle_equivalence() {
    // exact CDF equals full enumeration on 500 random instances
    let failures: usize = (0..500u64)
        .into_par_iter()
        .map(|case| {
            let mut rng = ChaCha8Rng::seed_from_u64(10_000 + case);
            let k = rng.random_range(2..=4usize);
            let max_n = match k {
                2 => 19,
                3 => 12,
                _ => 9,
            };
            let n = rng.random_range(3..=max_n);
            let p = datasets::random_uniform(n, k, 1, 20_000 + case);
            let span = (8 * n * k) as i64;
            let a = rat_int(rng.random_range(0..span));
            let b = &a + rat_int(rng.random_range(0..span));
            let r = if rng.random_bool(0.5) {
                Range::HalfLine { x: a }
            } else {
                Range::Interval { a, b }
            };
            usize::from(brute_force_cdf(&p, &r).unwrap() != rq_cdf(&p, &r).unwrap())
        })
        .sum();

    // threshold counts against the sorted traversal, 1000 random cases
    let query_failures: usize = (0..1000u64)
        .into_par_iter()
        .map(|case| {
            let mut rng = ChaCha8Rng::seed_from_u64(30_000 + case);
            let n = rng.random_range(2..=24usize);
            let k = rng.random_range(1..=5usize);
            let p = datasets::random_uniform(n, k, 1, 40_000 + case).with_sorted_locations();
            let span = (8 * n * k) as i64;
            let x = rat(rng.random_range(-2..2 * span), 2);
            let t = rng.random_range(1..=k);
            let r = Range::HalfLine { x };
            let tau = rat(t as i64, k as i64);
            let lhs = rc_fraction(&p, &r, &tau).unwrap() * rat_usize(n);
            let rhs = p
                .traversal(t - 1)
                .unwrap()
                .iter()
                .filter(|(_, loc)| r.contains(loc).unwrap())
                .count();
            usize::from(lhs != rat_usize(rhs))
        })
        .sum();

    report(
        2,
        "oracle equivalence",
        failures == 0 && query_failures == 0,
        &format!(
            "500/500 enumerations equal the convolution, {}/1000 threshold-count equalities exact",
            1000 - query_failures
        ),
    );
}

#[test]
fn criterion_03_lifting_correctness() {
    // window uniqueness on 2000 random (p, t, [a, b])
    let unique_failures: usize = (0..2000u64)
        .into_par_iter()
        .map(|case| {
            let mut rng = ChaCha8Rng::seed_from_u64(50_000 + case);
            let k = rng.random_range(1..=6usize);
            let mut vals: Vec<i64> = (0..k).map(|_| rng.random_range(0..60)).collect();
            vals.sort_unstable();
            let p = UncertainPoint::new(1, vals.iter().map(|v| vec![rat_int(*v)]).collect());
            let t = rng.random_range(1..=k);
            let lifted = lift_rc_1d(&p, t).unwrap();
            let a = rng.random_range(-5..65);
            let b = rng.random_range(a..=65);
            let r = lift_rc_query_1d(rat_int(a), rat_int(b)).unwrap();
            let hits = lifted.iter().filter(|l| r.contains_ext(&l.coords).unwrap()).count();
            let inside = vals.iter().filter(|v| a <= **v && **v <= b).count();
            usize::from(!(hits <= 1 && (hits == 1) == (inside >= t)))
        })
        .sum();

    // end-to-end threshold counts via box stabbing on 500 random 2D instances,
    // with box sets verified disjoint and union-correct by Monte Carlo probes
    let box_failures: usize = (0..500u64)
        .into_par_iter()
        .map(|case| {
            let mut rng = ChaCha8Rng::seed_from_u64(60_000 + case);
            let n = rng.random_range(2..=20usize);
            let k = rng.random_range(1..=4usize);
            let p = datasets::random_uniform(n, k, 2, 70_000 + case);
            let span = (8 * n * k) as i64;
            let mut bad = 0usize;
            for _ in 0..3 {
                let a0 = rng.random_range(0..span);
                let b0 = rng.random_range(a0..=span);
                let a1 = rng.random_range(0..span);
                let b1 = rng.random_range(a1..=span);
                let r = Range::rect(vec![
                    (rat_int(a0), rat_int(b0)),
                    (rat_int(a1), rat_int(b1)),
                ])
                .unwrap();
                let t = rng.random_range(1..=k);
                let tau = rat(t as i64, k as i64);
                let lhs = rc_count_via_boxes(&p, &r, t).unwrap();
                let rhs = rc_fraction(&p, &r, &tau).unwrap() * rat_usize(n);
                if rat_usize(lhs) != rhs {
                    bad += 1;
                }
            }
            // 10^4 probes across random (point, threshold) box sets
            for _ in 0..10_000 {
                let pos = rng.random_range(0..n);
                let t = rng.random_range(1..=k);
                let apexes = tight_apexes(&p.points()[pos], t).unwrap();
                let boxes = disjoint_boxes(&apexes);
                let q: Vec<Rat> =
                    (0..4).map(|_| rat(rng.random_range(-8 * span..8 * span), 2)).collect();
                let hits = boxes.boxes.iter().filter(|b| b.contains(&q)).count();
                if hits > 1 || (hits == 1) != union_contains(&apexes, &q) {
                    bad += 1;
                    break;
                }
            }
            bad
        })
        .sum();

    report(
        3,
        "lifting correctness",
        unique_failures == 0 && box_failures == 0,
        "2000 window-uniqueness cases and 500 box-stabbing instances with 10^4 probes each, all exact",
    );
}

#[test]
fn criterion_04_halving_bound() {
    // one-round error of any balanced coloring is at most disc/n on every
    // canonical half-line, exactly
    let failures: usize = (0..500u64)
        .into_par_iter()
        .map(|case| {
            let mut rng = ChaCha8Rng::seed_from_u64(80_000 + case);
            let n = 2 * rng.random_range(2..=32usize);
            let k = rng.random_range(1..=4usize);
            let p = datasets::random_uniform(n, k, 1, 90_000 + case);
            let sys = canonical_permutation_system(&p).unwrap();
            let coloring = Coloring::random_balanced(n, &mut rng);
            let disc = eval_disc(&sys, &coloring).unwrap().max_abs;
            let plus_ids: Vec<i64> = p
                .points()
                .iter()
                .enumerate()
                .filter(|(i, _)| coloring.sign(*i) == 1)
                .map(|(_, pt)| pt.id)
                .collect();
            if plus_ids.is_empty() {
                return 0;
            }
            let plus = p.subset_by_ids(&plus_ids).unwrap();
            let cover = canonical_ranges(&p.certify(), &FamilyDescriptor::half_line()).unwrap();
            let bound = rat(disc as i64, n as i64);
            let mut bad = 0usize;
            for r in &cover {
                let gap =
                    (expected_fraction(&p, r).unwrap() - expected_fraction(&plus, r).unwrap())
                        .abs();
                if gap > bound {
                    bad += 1;
                }
            }
            bad
        })
        .sum();
    report(4, "one-round halving bound", failures == 0, "500 random colorings, exact");
}

#[test]
fn criterion_05_merge_reduce_guarantee() {
    // (a) expectation build at n = 4096, k = 4, half-lines, eps = 0.1
    let p = datasets::random_uniform(4096, 4, 1, 555);
    let f = FamilyDescriptor::half_line();
    let mrp = MergeReduceParams::with_seed(777);
    let art = build_re_disc(&p, &f, 0.1, &mrp).unwrap();
    let g = coreset_size(
        0.1,
        &MergeReduceParams { gamma: Some(2.0), omega: Some(1.0), ..mrp.clone() },
    )
    .unwrap();
    let size_ok = art.subset.len() <= g;
    let re = measure_re_error(&p, &art.subset, &f).unwrap();
    let re_ok = re.max_re_error <= rat(1, 10);
    report(
        5,
        "expectation reduction 4096x4",
        size_ok && re_ok,
        &format!(
            "|T| = {} <= g = {g}, measured error {} <= 0.1",
            art.subset.len(),
            re.max_re_error.to_f64().unwrap()
        ),
    );

    // (b) threshold-count build on the same instance
    let rc_art = build_rc_disc(&p, &f, 0.1, &MergeReduceParams::with_seed(778)).unwrap();
    let rc = measure_rc_error(&p, &rc_art.subset, &f).unwrap();
    let rc_ok = rc.sup_rc_error <= rat(1, 10);
    report(
        5,
        "threshold reduction 4096x4",
        rc_ok,
        &format!(
            "|T| = {}, sup over (range, tau) = {} <= 0.1",
            rc_art.subset.len(),
            rc.sup_rc_error.to_f64().unwrap()
        ),
    );

    // (c) rectangles in the plane at n = 1024, k = 2, eps = 0.15
    let p2 = datasets::random_uniform(1024, 2, 2, 556);
    let f2 = FamilyDescriptor::rect(2);
    let art2 = build_re_disc(&p2, &f2, 0.15, &MergeReduceParams::with_seed(779)).unwrap();
    let re2 = measure_re_error(&p2, &art2.subset, &f2).unwrap();
    let re2_ok = re2.max_re_error <= rat(3, 20);
    report(
        5,
        "rectangle reduction 1024x2",
        re2_ok,
        &format!(
            "|T| = {}, measured error over the grid cover {} <= 0.15",
            art2.subset.len(),
            re2.max_re_error.to_f64().unwrap()
        ),
    );
}

#[test]
fn criterion_06_zero_bias() {
    let p = datasets::random_uniform(1024, 2, 1, 666);
    let f = FamilyDescriptor::half_line();
    let params = MergeReduceParams::with_seed(42);
    let honest = zero_bias_check(&p, &f, 0.2, &params, 500, &SidePolicy::Random).unwrap();
    report(
        6,
        "zero bias",
        honest.pass,
        &format!(
            "mean signed error {:+.6} within 3 x stderr {:.6} over 500 seeds",
            honest.mean, honest.stderr
        ),
    );
    // the deliberately biased side policy must fail the same test
    let control = zero_bias_check(
        &p,
        &f,
        0.2,
        &params,
        500,
        &SidePolicy::KeepLargerIn(honest.range.clone()),
    )
    .unwrap();
    report(
        6,
        "zero bias adversarial control",
        !control.pass,
        &format!(
            "always keeping the heavier side shifts the mean to {:+.6} (stderr {:.6})",
            control.mean, control.stderr
        ),
    );
}

#[test]
fn criterion_07_sampling_bounds() {
    let p = datasets::random_uniform(2000, 4, 1, 888);
    let sp = SampleParams { delta: 0.1, c_samp: 1.0 };

    let re_exceed: usize = (0..200u64)
        .into_par_iter()
        .map(|trial| {
            let art =
                build_re_sample(&p, &FamilyDescriptor::half_line(), 0.2, &sp, 1_000 + trial)
                    .unwrap();
            let rep = measure_re_error(&p, &art.subset, &FamilyDescriptor::half_line()).unwrap();
            usize::from(rep.max_re_error > rat(1, 5))
        })
        .sum();

    let rc_exceed: usize = (0..200u64)
        .into_par_iter()
        .map(|trial| {
            let art =
                build_rc_sample(&p, &FamilyDescriptor::interval(), 0.2, &sp, 2_000 + trial)
                    .unwrap();
            let rep = measure_rc_error(&p, &art.subset, &FamilyDescriptor::interval()).unwrap();
            usize::from(rep.sup_rc_error > rat(1, 5))
        })
        .sum();

    report(
        7,
        "sampling bounds",
        re_exceed <= 30 && rc_exceed <= 30,
        &format!(
            "expectation trials over eps: {re_exceed}/200, threshold trials over eps: {rc_exceed}/200 (allowance 30)"
        ),
    );
}

#[test]
fn criterion_08_rq_transfer() {
    let p = datasets::random_uniform(1024, 2, 1, 999);
    let f = FamilyDescriptor::half_line();
    let art = build_rq(
        &p,
        &f,
        0.1,
        0.1,
        &MethodParams::Discrepancy(MergeReduceParams::default()),
        31,
    )
    .unwrap();
    let rq = art.rq.as_ref().unwrap();
    let alpha = rq_alpha(rq.eps_measured.to_f64().unwrap(), 0.1, art.subset.len());
    let rep = quantization_check(&p, &art.subset, &f, &rat(1, 10), &rat_f64(alpha)).unwrap();
    report(
        8,
        "quantile transfer",
        rep.pass && !rq.alpha_exceeds_half,
        &format!(
            "|T| = {}, measured eps = {:.5}, alpha = {alpha:.5}, all {} canonical ranges pass",
            art.subset.len(),
            rq.eps_measured.to_f64().unwrap(),
            rep.per_range.len()
        ),
    );
}

#[test]
fn criterion_09_variance() {
    // exact equality of the class decomposition on 1000 random pairs
    let decomposition_failures: usize = (0..1000u64)
        .into_par_iter()
        .map(|case| {
            let mut rng = ChaCha8Rng::seed_from_u64(110_000 + case);
            let n = rng.random_range(2..=16usize);
            let k = rng.random_range(1..=5usize);
            let t = datasets::random_uniform(n, k, 1, 120_000 + case);
            let span = (8 * n * k) as i64;
            let a = rat_int(rng.random_range(0..span));
            let b = &a + rat_int(rng.random_range(0..span));
            let r = Range::Interval { a, b };
            let rep = variance_report(&t, &r, &Rat::zero()).unwrap();
            usize::from(rep.exact != rep.decomposed || rep.exact > rat(1, 4 * n as i64))
        })
        .sum();

    // the two-point equality case: variance 1/8 = 1/(4|T|) exactly
    let t2 = UncertainPointSet::new(vec![
        UncertainPoint::new(1, vec![vec![rat_int(0)], vec![rat_int(10)]]),
        UncertainPoint::new(2, vec![vec![rat_int(1)], vec![rat_int(11)]]),
    ])
    .unwrap();
    let rep2 = variance_report(&t2, &Range::HalfLine { x: rat_int(5) }, &Rat::zero()).unwrap();
    let equality_ok = rep2.exact == rat(1, 8) && rep2.bound == rat(1, 8);

    // corollary bound with the measured threshold error of a reduction-built
    // coreset
    let p = datasets::random_uniform(512, 2, 1, 1234);
    let f = FamilyDescriptor::half_line();
    let art = build_rc_disc(&p, &f, 0.2, &MergeReduceParams::with_seed(55)).unwrap();
    let rc = measure_rc_error(&p, &art.subset, &f).unwrap();
    let cover = canonical_ranges(&p.certify(), &f).unwrap();
    let mut bound_ok = true;
    for r in cover.iter().step_by(37) {
        let rep = variance_report(&art.subset, r, &rc.sup_rc_error).unwrap();
        bound_ok &= rep.within_bound;
    }

    report(
        9,
        "variance decomposition",
        decomposition_failures == 0 && equality_ok && bound_ok,
        "1000 exact decompositions, the 1/8 equality case, and the corollary bound with measured error",
    );
}

#[test]
fn criterion_10_coloring_quality() {
    // within factor 2 of the exhaustive optimum on 50 small instances
    let factor_failures: usize = (0..50u64)
        .into_par_iter()
        .map(|case| {
            let mut rng = ChaCha8Rng::seed_from_u64(130_000 + case);
            let n = rng.random_range(4..=14usize);
            let ell = rng.random_range(1..=3usize);
            let perms: Vec<Vec<u32>> = (0..ell)
                .map(|_| {
                    let mut perm: Vec<u32> = (0..n as u32).collect();
                    for i in (1..n).rev() {
                        let j = rng.random_range(0..=i);
                        perm.swap(i, j);
                    }
                    perm
                })
                .collect();
            let sys = PermutationSystem::from_perms(n, perms);
            let (_, opt) = exhaustive_coloring(&sys).unwrap();
            let found = find_coloring(&sys, &ColoringBudget::default(), 140_000 + case).disc;
            usize::from(found > opt * 2)
        })
        .sum();

    // the default target at n = 1024, 4 permutations
    let p = datasets::random_uniform(1024, 4, 1, 7)
        .with_sorted_locations();
    let sys = canonical_permutation_system(&p).unwrap();
    let out = find_coloring(&sys, &ColoringBudget::default(), 7);
    let target = 4.0 * 4.0f64.sqrt() * (1.0 + 1024.0f64.log2());
    let target_ok = (out.disc as f64) <= target && out.met_target;

    report(
        10,
        "coloring quality",
        factor_failures == 0 && target_ok,
        &format!(
            "50/50 within twice the optimum; n = 1024, l = 4: disc {} <= target {target}",
            out.disc
        ),
    );
}
