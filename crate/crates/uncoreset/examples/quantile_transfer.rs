//! An expectation coreset doubles as a quantile coreset: the full count CDF
//! is reproduced within a vertical tolerance after a bounded horizontal
//! shift, with the window derived from the measured (not nominal) error.

use num_traits::ToPrimitive;
use uncoreset::coresets::{build_rq, MethodParams};
use uncoreset::datasets;
use uncoreset::exact::rat_f64;
use uncoreset::mergereduce::MergeReduceParams;
use uncoreset::ranges::FamilyDescriptor;
use uncoreset::verify::quantization_check;

fn main() {
    let p = datasets::random_uniform(1024, 2, 1, 9);
    let f = FamilyDescriptor::half_line();
    let (eps, eps_prime) = (0.1, 0.1);

    let art = build_rq(
        &p,
        &f,
        eps,
        eps_prime,
        &MethodParams::Discrepancy(MergeReduceParams::default()),
        11,
    )
    .unwrap();
    let rq = art.rq.as_ref().unwrap();
    println!(
        "|T| = {}, measured expectation error = {:.5}, derived window alpha = {:.5}",
        art.subset.len(),
        rq.eps_measured.to_f64().unwrap(),
        rq.alpha
    );

    let rep = quantization_check(
        &p,
        &art.subset,
        &f,
        &rat_f64(rq.eps_prime),
        &rat_f64(rq.alpha),
    )
    .unwrap();
    println!(
        "window comparison over {} canonical ranges: band pass = {}, pointwise pass = {}",
        rep.per_range.len(),
        rep.pass,
        rep.pointwise_pass
    );
    if let Some(w) = &rep.worst {
        println!(
            "hardest pointwise spot: {} at tau = {} (nearest step {} away)",
            w.range,
            w.tau,
            w.best_distance.to_f64().unwrap()
        );
    }
}
