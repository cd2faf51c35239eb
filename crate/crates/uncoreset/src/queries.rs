//! Exact evaluators for the three query semantics, plus brute-force
//! transversal enumeration as the ground-truth oracle.

use crate::exact::{rat_usize, Rat};
use crate::model::UncertainPointSet;
use crate::ranges::{inclusion_prob, Range, RangeError};
use num_bigint::{BigInt, BigUint};
use num_traits::{One, Zero};

#[derive(Debug, thiserror::Error, PartialEq)]
pub enum QueryError {
    #[error(transparent)]
    Range(#[from] RangeError),
    #[error("threshold {0} outside (0, 1]")]
    BadThreshold(String),
    #[error("instance too large for enumeration: k^n = {0} exceeds 10^6")]
    TooLarge(f64),
}

/// Right-continuous step CDF over count fractions `c / n`.
///
/// `breakpoints` are the ascending jump positions; `values[i]` is the CDF on
/// `[breakpoints[i], breakpoints[i + 1])`. Below the first breakpoint the CDF
/// is zero; the final value is one.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct CdfTable {
    breakpoints: Vec<Rat>,
    values: Vec<Rat>,
}

impl CdfTable {
    pub fn new(breakpoints: Vec<Rat>, values: Vec<Rat>) -> Self {
        debug_assert_eq!(breakpoints.len(), values.len());
        debug_assert!(breakpoints.windows(2).all(|w| w[0] < w[1]));
        debug_assert!(values.windows(2).all(|w| w[0] <= w[1]));
        debug_assert!(values.last().is_none_or(One::is_one));
        CdfTable { breakpoints, values }
    }

    pub fn breakpoints(&self) -> &[Rat] {
        &self.breakpoints
    }

    pub fn values(&self) -> &[Rat] {
        &self.values
    }

    /// Step value at the greatest breakpoint `<= tau` (right-continuity),
    /// zero below the first breakpoint.
    pub fn eval(&self, tau: &Rat) -> Rat {
        match self.breakpoints.partition_point(|b| b <= tau) {
            0 => Rat::zero(),
            i => self.values[i - 1].clone(),
        }
    }
}

/// Expected fraction of points in `r`: exactly `|P_cert ∩ r| / (nk)`.
pub fn expected_fraction(p: &UncertainPointSet, r: &Range) -> Result<Rat, QueryError> {
    let mut hits = 0usize;
    for pt in p.points() {
        for loc in &pt.locations {
            if r.contains(loc)? {
                hits += 1;
            }
        }
    }
    Ok(rat_usize(hits) / rat_usize(p.len() * p.k()))
}

/// Fraction of points whose inclusion probability is at least `tau`.
pub fn rc_fraction(p: &UncertainPointSet, r: &Range, tau: &Rat) -> Result<Rat, QueryError> {
    if !(tau > &Rat::zero() && tau <= &Rat::one()) {
        return Err(QueryError::BadThreshold(tau.to_string()));
    }
    let mut count = 0usize;
    for pt in p.points() {
        if &inclusion_prob(pt, r)? >= tau {
            count += 1;
        }
    }
    Ok(rat_usize(count) / rat_usize(p.len()))
}

/// Number of locations of each point inside `r`.
fn in_range_counts(p: &UncertainPointSet, r: &Range) -> Result<Vec<usize>, QueryError> {
    p.points()
        .iter()
        .map(|pt| {
            let mut t = 0usize;
            for loc in &pt.locations {
                if r.contains(loc)? {
                    t += 1;
                }
            }
            Ok(t)
        })
        .collect()
}

/// Numerators of `((k - t) + t x)^m`: the count distribution of `m` points
/// sharing in-range location count `t`, over the denominator `k^m`.
fn binomial_row(m: usize, t: usize, k: usize) -> Vec<BigUint> {
    let a = BigUint::from(k - t);
    let b = BigUint::from(t);
    let mut row = Vec::with_capacity(m + 1);
    row.push(a.pow(m as u32));
    for j in 1..=m {
        let prev = &row[j - 1];
        let num = prev * &b * BigUint::from(m - j + 1);
        row.push(num / (BigUint::from(j) * &a));
    }
    row
}

fn convolve(a: &[BigUint], b: &[BigUint]) -> Vec<BigUint> {
    let mut out = vec![BigUint::zero(); a.len() + b.len() - 1];
    for (i, x) in a.iter().enumerate() {
        if x.is_zero() {
            continue;
        }
        for (j, y) in b.iter().enumerate() {
            out[i + j] += x * y;
        }
    }
    out
}

/// Exact distribution of `|Q ∩ r| / |Q|` over transversals `Q`.
///
/// `|Q ∩ r|` is Poisson-binomial with per-point success probability
/// `t_i / k`. Points sharing the same `t` form a binomial block whose exact
/// integer PMF comes from the expansion of `((k - t) + t x)^m`; the at most
/// `k - 1` blocks are convolved in exact integer arithmetic over the common
/// denominator `k^m`.
pub fn rq_cdf(p: &UncertainPointSet, r: &Range) -> Result<CdfTable, QueryError> {
    let counts = in_range_counts(p, r)?;
    let k = p.k();
    let sure: usize = counts.iter().filter(|&&t| t == k).count();
    let mut group_sizes = vec![0usize; k.max(1)];
    for &t in &counts {
        if t > 0 && t < k {
            group_sizes[t] += 1;
        }
    }
    let mut pmf: Vec<BigUint> = vec![BigUint::one()];
    let mut mixed = 0usize;
    for (t, &m) in group_sizes.iter().enumerate().skip(1) {
        if m == 0 {
            continue;
        }
        mixed += m;
        let row = binomial_row(m, t, k);
        pmf = convolve(&pmf, &row);
    }

    let denom = BigInt::from(BigUint::from(k).pow(mixed as u32));
    let n = rat_usize(p.len());
    let mut breakpoints = Vec::with_capacity(pmf.len());
    let mut values = Vec::with_capacity(pmf.len());
    let mut cum = BigUint::zero();
    for (j, mass) in pmf.iter().enumerate() {
        cum += mass;
        breakpoints.push(rat_usize(sure + j) / &n);
        values.push(Rat::new(BigInt::from(cum.clone()), denom.clone()));
    }
    Ok(CdfTable::new(breakpoints, values))
}

/// Ground-truth oracle: enumerates all `k^n` transversals explicitly.
pub fn brute_force_cdf(p: &UncertainPointSet, r: &Range) -> Result<CdfTable, QueryError> {
    let size = (p.k() as f64).powi(p.len() as i32);
    if size > 1e6 {
        return Err(QueryError::TooLarge(size));
    }
    let in_range: Vec<Vec<bool>> = p
        .points()
        .iter()
        .map(|pt| pt.locations.iter().map(|l| r.contains(l)).collect::<Result<_, _>>())
        .collect::<Result<_, _>>()?;

    let n = p.len();
    let mut hist = vec![0u64; n + 1];
    // depth-first walk over every transversal, carrying the partial count
    let mut choice = vec![0usize; n];
    let mut partial = vec![0usize; n + 1];
    let mut depth = 0usize;
    loop {
        if depth == n {
            hist[partial[n]] += 1;
            // backtrack to the deepest level with a remaining choice
            loop {
                if depth == 0 {
                    let total = BigInt::from(BigUint::from(p.k()).pow(n as u32));
                    let nn = rat_usize(n);
                    let mut breakpoints = Vec::new();
                    let mut values = Vec::new();
                    let mut cum = 0u64;
                    for (c, &m) in hist.iter().enumerate() {
                        if m == 0 {
                            continue;
                        }
                        cum += m;
                        breakpoints.push(rat_usize(c) / &nn);
                        values.push(Rat::new(BigInt::from(cum), total.clone()));
                    }
                    return Ok(CdfTable::new(breakpoints, values));
                }
                depth -= 1;
                choice[depth] += 1;
                if choice[depth] < p.k() {
                    break;
                }
                choice[depth] = 0;
            }
        }
        partial[depth + 1] = partial[depth] + usize::from(in_range[depth][choice[depth]]);
        depth += 1;
    }
}
