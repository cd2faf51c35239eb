//! The three query semantics on the built-in ten-point data set, answered
//! exactly and cross-checked against full transversal enumeration.

use uncoreset::datasets;
use uncoreset::exact::{format_rat, rat, rat_f64};
use uncoreset::queries::{brute_force_cdf, expected_fraction, rc_fraction, rq_cdf};
use uncoreset::ranges::Range;

fn main() {
    let p = datasets::interleaved_ten();
    let t = datasets::interleaved_ten_odd_subset();
    let r = Range::HalfLine { x: rat_f64(13.5) };

    println!("data: n = {}, k = {}, query range {r}", p.len(), p.k());

    let ep = expected_fraction(&p, &r).unwrap();
    let et = expected_fraction(&t, &r).unwrap();
    println!("expected fraction     full set {}   subset {}", format_rat(&ep), format_rat(&et));

    let tau = rat(2, 3);
    let gp = rc_fraction(&p, &r, &tau).unwrap();
    let gt = rc_fraction(&t, &r, &tau).unwrap();
    println!(
        "threshold count (2/3) full set {}   subset {}",
        format_rat(&gp),
        format_rat(&gt)
    );

    let fp = rq_cdf(&p, &r).unwrap();
    println!("count distribution of the full set:");
    for (b, v) in fp.breakpoints().iter().zip(fp.values()) {
        println!("  F({}) = {}", format_rat(b), format_rat(v));
    }
    println!("F(0.75) = {}", format_rat(&fp.eval(&rat(3, 4))));

    let oracle = brute_force_cdf(&p, &r).unwrap();
    println!(
        "matches enumeration of all {} transversals: {}",
        (p.k() as u64).pow(p.len() as u32),
        oracle == fp
    );
}
