//! Property tests over randomly generated uncertain sets.

use proptest::prelude::*;
use uncoreset::cli::{read_points_jsonl, write_points_jsonl};
use uncoreset::discrepancy::{eval_disc, eval_disc_naive, Coloring};
use uncoreset::exact::{rat, rat_int, Rat};
use uncoreset::model::{UncertainPoint, UncertainPointSet};
use uncoreset::permutations::PermutationSystem;
use uncoreset::queries::{brute_force_cdf, rq_cdf};
use uncoreset::ranges::{inclusion_prob, Range};

fn arb_set(max_n: usize, max_k: usize) -> impl Strategy<Value = UncertainPointSet> {
    (1..=max_n, 1..=max_k).prop_flat_map(|(n, k)| {
        proptest::collection::vec(
            proptest::collection::vec(-50i64..50, k..=k),
            n..=n,
        )
        .prop_map(|rows| {
            let points = rows
                .into_iter()
                .enumerate()
                .map(|(i, vals)| {
                    UncertainPoint::new(
                        i as i64 + 1,
                        vals.into_iter().map(|v| vec![rat(v, 4)]).collect(),
                    )
                })
                .collect();
            UncertainPointSet::new(points).expect("generated sets are valid")
        })
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn certify_restricted_is_each_traversal(p in arb_set(8, 4)) {
        let cert = p.certify();
        prop_assert_eq!(cert.len(), p.len() * p.k());
        for j in 0..p.k() {
            let trav = p.traversal(j).unwrap();
            let entries = cert.traversal_entries(j);
            prop_assert_eq!(entries.len(), trav.len());
            for (e, (id, loc)) in entries.iter().zip(&trav) {
                prop_assert_eq!(e.id, *id);
                prop_assert_eq!(e.coords.as_slice(), *loc);
            }
        }
    }

    #[test]
    fn jsonl_round_trip(p in arb_set(8, 3)) {
        let text = write_points_jsonl(&p);
        prop_assert_eq!(read_points_jsonl(&text).unwrap(), p);
    }

    #[test]
    fn cdf_convolution_equals_enumeration(p in arb_set(7, 3), a in -60i64..60, w in 0i64..80) {
        let r = Range::Interval { a: rat(a, 4), b: rat(a + w, 4) };
        prop_assert_eq!(rq_cdf(&p, &r).unwrap(), brute_force_cdf(&p, &r).unwrap());
    }

    #[test]
    fn inclusion_prob_monotone(p in arb_set(8, 4), a in -60i64..60, w in 0i64..40, pad in 1i64..20) {
        let narrow = Range::Interval { a: rat(a, 4), b: rat(a + w, 4) };
        let wide = Range::Interval { a: rat(a - pad, 4), b: rat(a + w + pad, 4) };
        for pt in p.points() {
            prop_assert!(inclusion_prob(pt, &narrow).unwrap() <= inclusion_prob(pt, &wide).unwrap());
        }
    }

    #[test]
    fn interval_disc_prefix_equals_naive(
        orders in proptest::collection::vec(proptest::collection::vec(0u32..16, 16..=16), 1..=3),
        signs in proptest::collection::vec(prop_oneof![Just(1i8), Just(-1i8)], 16..=16),
    ) {
        // turn each random row into a permutation of 0..16 via stable ranking
        let perms: Vec<Vec<u32>> = orders
            .into_iter()
            .map(|row| {
                let mut idx: Vec<u32> = (0..16).collect();
                idx.sort_by_key(|&i| (row[i as usize], i));
                idx
            })
            .collect();
        let sys = PermutationSystem::from_perms(16, perms);
        let coloring = Coloring::from_signs(signs);
        prop_assert_eq!(
            eval_disc(&sys, &coloring).unwrap().max_abs,
            eval_disc_naive(&sys, &coloring)
        );
    }

    #[test]
    fn cdf_is_monotone_step_function(p in arb_set(8, 3), x in -60i64..60) {
        let f = rq_cdf(&p, &Range::HalfLine { x: rat(x, 4) }).unwrap();
        let values = f.values();
        prop_assert!(values.windows(2).all(|w| w[0] <= w[1]));
        prop_assert_eq!(values.last().unwrap().clone(), Rat::new(1.into(), 1.into()));
        // evaluation below the first breakpoint is zero
        let below = f.breakpoints().first().unwrap() - rat_int(1);
        prop_assert_eq!(f.eval(&below), Rat::new(0.into(), 1.into()));
    }
}
