//! Expectation coresets built by uniform sampling and by low-discrepancy
//! reduction, with their exact measured errors.

use num_traits::ToPrimitive;
use uncoreset::coresets::{build_re_disc, build_re_sample, SampleParams};
use uncoreset::datasets;
use uncoreset::mergereduce::MergeReduceParams;
use uncoreset::ranges::FamilyDescriptor;
use uncoreset::verify::measure_re_error;

fn main() {
    let p = datasets::random_uniform(2048, 3, 1, 42);
    let f = FamilyDescriptor::half_line();
    let eps = 0.1;

    let sampled = build_re_sample(&p, &f, eps, &SampleParams::default(), 1).unwrap();
    let rep = measure_re_error(&p, &sampled.subset, &f).unwrap();
    println!(
        "sampling:  |T| = {:4}  measured error = {:.5}  (eps = {eps})",
        sampled.subset.len(),
        rep.max_re_error.to_f64().unwrap()
    );

    let reduced = build_re_disc(&p, &f, eps, &MergeReduceParams::with_seed(1)).unwrap();
    let rep = measure_re_error(&p, &reduced.subset, &f).unwrap();
    println!(
        "reduction: |T| = {:4}  measured error = {:.5}  (eps = {eps})",
        reduced.subset.len(),
        rep.max_re_error.to_f64().unwrap()
    );
    println!("worst range: {}", rep.re_argmax.unwrap());

    println!("\nreduction ledger (size, permutation disc, round error):");
    for e in &reduced.ledger {
        let sizes: Vec<String> = e.groups.iter().map(|g| g.size.to_string()).collect();
        let discs: Vec<String> = e.groups.iter().map(|g| g.perm_disc.to_string()).collect();
        println!(
            "  round {:2} {} sizes [{}] disc [{}] error {:.6}",
            e.round,
            if e.skipped { "merge" } else { "halve" },
            sizes.join(", "),
            discs.join(", "),
            e.error.to_f64().unwrap()
        );
    }
}
