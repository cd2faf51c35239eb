//! Balanced low-discrepancy colorings: local search against the exhaustive
//! optimum on a small system, then at a size where only search is feasible.

use uncoreset::datasets;
use uncoreset::discrepancy::{eval_disc, exhaustive_coloring, find_coloring, ColoringBudget};
use uncoreset::permutations::canonical_permutation_system;

fn main() {
    let small = datasets::random_uniform(14, 3, 1, 21);
    let sys = canonical_permutation_system(&small).unwrap();
    let (best, optimum) = exhaustive_coloring(&sys).unwrap();
    let found = find_coloring(&sys, &ColoringBudget::default(), 1);
    println!(
        "n = 14, {} permutations: exhaustive optimum = {}, local search = {}",
        sys.perms().len(),
        optimum,
        found.disc
    );
    let verify = eval_disc(&sys, &best).unwrap();
    println!(
        "optimum coloring re-evaluates to {} (worst interval: permutation {}, ranks {}..{})",
        verify.max_abs, verify.argmax.perm, verify.argmax.lo, verify.argmax.hi
    );

    let big = datasets::random_uniform(1024, 4, 1, 22);
    let sys = canonical_permutation_system(&big).unwrap();
    let out = find_coloring(&sys, &ColoringBudget::default(), 2);
    println!(
        "n = 1024, 4 permutations: local search reaches {} (target {:.1}, met: {})",
        out.disc, out.target, out.met_target
    );
}
