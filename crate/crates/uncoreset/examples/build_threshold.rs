//! Threshold-count coresets: the half-line case rides the canonical
//! permutations directly; two-sided intervals go through the window lifting,
//! one system per threshold.

use num_traits::ToPrimitive;
use uncoreset::coresets::build_rc_disc;
use uncoreset::datasets;
use uncoreset::mergereduce::MergeReduceParams;
use uncoreset::ranges::FamilyDescriptor;
use uncoreset::verify::measure_rc_error;

fn main() {
    let p = datasets::random_uniform(2048, 3, 1, 5);
    let eps = 0.1;

    let f = FamilyDescriptor::half_line();
    let art = build_rc_disc(&p, &f, eps, &MergeReduceParams::with_seed(2)).unwrap();
    let rep = measure_rc_error(&p, &art.subset, &f).unwrap();
    println!(
        "half-lines: |T| = {:4}  sup over (range, tau) = {:.5}  (eps = {eps})",
        art.subset.len(),
        rep.sup_rc_error.to_f64().unwrap()
    );
    if let Some((r, tau)) = &rep.rc_argmax {
        println!("  worst pair: {r} at tau = {tau}");
    }

    // the interval machinery needs a forced scale to act on small inputs;
    // with the default constants the target size exceeds any practical n
    let p = datasets::random_uniform(256, 2, 1, 6);
    let f = FamilyDescriptor::interval();
    let mrp = MergeReduceParams {
        gamma: Some(2.0),
        omega: Some(1.0),
        c_size: 2.0,
        ..MergeReduceParams::with_seed(3)
    };
    let art = build_rc_disc(&p, &f, 0.25, &mrp).unwrap();
    let rep = measure_rc_error(&p, &art.subset, &f).unwrap();
    println!(
        "intervals:  |T| = {:4}  sup over (range, tau) = {:.5}  (eps = 0.25)",
        art.subset.len(),
        rep.sup_rc_error.to_f64().unwrap()
    );
    if let Some(stats) = &art.lifting {
        println!(
            "  lifting: {} permutations per threshold system, {} windows per point, {} permutations total",
            stats.perms_per_system, stats.lifted_per_point, stats.total_perms
        );
    }
}
