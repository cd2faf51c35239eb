//! Size/error trade-off table: sampling shrinks like 1/eps^2, the reduction
//! like 1/eps (up to a log), at matching measured error.

use num_traits::ToPrimitive;
use std::time::Instant;
use uncoreset::coresets::{build_re_disc, build_re_sample, SampleParams};
use uncoreset::datasets;
use uncoreset::mergereduce::MergeReduceParams;
use uncoreset::ranges::FamilyDescriptor;
use uncoreset::verify::measure_re_error;

fn main() {
    let p = datasets::random_uniform(4096, 2, 1, 77);
    let f = FamilyDescriptor::half_line();
    println!("n,k,method,eps,coreset_size,eps_measured,wall_ms");
    for eps in [0.4, 0.2, 0.1, 0.05] {
        let start = Instant::now();
        let art = build_re_sample(&p, &f, eps, &SampleParams::default(), 7).unwrap();
        let err = measure_re_error(&p, &art.subset, &f).unwrap().max_re_error;
        println!(
            "{},{},sample,{eps},{},{:.5},{}",
            p.len(),
            p.k(),
            art.subset.len(),
            err.to_f64().unwrap(),
            start.elapsed().as_millis()
        );

        let start = Instant::now();
        let art = build_re_disc(&p, &f, eps, &MergeReduceParams::with_seed(7)).unwrap();
        let err = measure_re_error(&p, &art.subset, &f).unwrap().max_re_error;
        println!(
            "{},{},discrepancy,{eps},{},{:.5},{}",
            p.len(),
            p.k(),
            art.subset.len(),
            err.to_f64().unwrap(),
            start.elapsed().as_millis()
        );
    }
}
