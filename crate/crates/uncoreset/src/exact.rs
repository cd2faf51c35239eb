//! Exact coordinate and probability arithmetic.
//!
//! All coordinates and probabilities are `BigRational`. Coordinates may be
//! extended with `-inf`/`+inf` sentinels ([`ExtCoord`]) for semi-bounded
//! boxes; sentinels are ordered against all finite values but never enter
//! arithmetic.

use num_bigint::{BigInt, BigUint};
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};
use std::cmp::Ordering;
use std::fmt;
use std::str::FromStr;

pub type Rat = BigRational;

pub fn rat_int(n: i64) -> Rat {
    Rat::from_integer(BigInt::from(n))
}

pub fn rat(num: i64, den: i64) -> Rat {
    Rat::new(BigInt::from(num), BigInt::from(den))
}

pub fn rat_usize(n: usize) -> Rat {
    Rat::from_integer(BigInt::from(n))
}

/// Exact conversion from a finite `f64`, preserving the binary value.
pub fn rat_f64(x: f64) -> Rat {
    Rat::from_float(x).expect("finite float")
}

pub fn rat_to_f64(r: &Rat) -> f64 {
    r.to_f64().unwrap_or(f64::NAN)
}

/// A coordinate extended with infinities.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum ExtCoord {
    NegInf,
    Fin(Rat),
    PosInf,
}

impl ExtCoord {
    pub fn finite(&self) -> Option<&Rat> {
        match self {
            ExtCoord::Fin(r) => Some(r),
            _ => None,
        }
    }

    pub fn is_finite(&self) -> bool {
        matches!(self, ExtCoord::Fin(_))
    }
}

impl PartialOrd for ExtCoord {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for ExtCoord {
    fn cmp(&self, other: &Self) -> Ordering {
        use ExtCoord::*;
        match (self, other) {
            (NegInf, NegInf) | (PosInf, PosInf) => Ordering::Equal,
            (NegInf, _) | (_, PosInf) => Ordering::Less,
            (_, NegInf) | (PosInf, _) => Ordering::Greater,
            (Fin(a), Fin(b)) => a.cmp(b),
        }
    }
}

impl From<Rat> for ExtCoord {
    fn from(r: Rat) -> Self {
        ExtCoord::Fin(r)
    }
}

impl fmt::Display for ExtCoord {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ExtCoord::NegInf => write!(f, "-inf"),
            ExtCoord::PosInf => write!(f, "+inf"),
            ExtCoord::Fin(r) => write!(f, "{}", format_rat(r)),
        }
    }
}

#[derive(Debug, thiserror::Error, PartialEq, Eq)]
#[error("invalid numeric literal `{0}`")]
pub struct ParseRatError(pub String);

/// Parses an exact decimal (`-12.5`, `3e-2`) or a fraction (`13/20`).
pub fn parse_rat(s: &str) -> Result<Rat, ParseRatError> {
    let s = s.trim();
    let err = || ParseRatError(s.to_string());
    if s.is_empty() {
        return Err(err());
    }
    if let Some((num, den)) = s.split_once('/') {
        let n = BigInt::from_str(num.trim()).map_err(|_| err())?;
        let d = BigInt::from_str(den.trim()).map_err(|_| err())?;
        if d.is_zero() {
            return Err(err());
        }
        return Ok(Rat::new(n, d));
    }
    // decimal with optional exponent
    let (mantissa, exp) = match s.split_once(['e', 'E']) {
        Some((m, e)) => (m, i32::from_str(e).map_err(|_| err())?),
        None => (s, 0),
    };
    let (int_part, frac_part) = match mantissa.split_once('.') {
        Some((i, f)) => (i, f),
        None => (mantissa, ""),
    };
    if frac_part.contains(['+', '-']) {
        return Err(err());
    }
    let negative = int_part.starts_with('-');
    let digits: String = format!(
        "{}{}",
        int_part.trim_start_matches(['+', '-']),
        frac_part
    );
    if digits.is_empty() || !digits.bytes().all(|b| b.is_ascii_digit()) {
        return Err(err());
    }
    let n = BigInt::from_str(&digits).map_err(|_| err())?;
    let n = if negative { -n } else { n };
    let scale = frac_part.len() as i32 - exp;
    let ten = BigInt::from(10);
    let pow = ten.pow(scale.unsigned_abs());
    Ok(if scale >= 0 {
        Rat::new(n, pow)
    } else {
        Rat::from_integer(n * pow)
    })
}

/// Formats exactly: a finite decimal when the reduced denominator is
/// `2^a * 5^b`, otherwise `p/q`. `parse_rat` round-trips both forms.
pub fn format_rat(r: &Rat) -> String {
    let denom = r.denom().magnitude().clone();
    let (mut twos, mut fives, mut rest) = (0u32, 0u32, denom);
    let two = BigUint::from(2u32);
    let five = BigUint::from(5u32);
    while (&rest % &two).is_zero() {
        rest /= &two;
        twos += 1;
    }
    while (&rest % &five).is_zero() {
        rest /= &five;
        fives += 1;
    }
    if !rest.is_one() {
        return format!("{}/{}", r.numer(), r.denom());
    }
    // scale to denominator 10^max(twos, fives)
    let digits = twos.max(fives);
    let scale = BigUint::from(2u32).pow(digits - twos) * BigUint::from(5u32).pow(digits - fives);
    let scaled = r.numer() * BigInt::from(scale);
    if digits == 0 {
        return scaled.to_string();
    }
    let neg = scaled.is_negative();
    let mag = scaled.magnitude().to_string();
    let mag = if mag.len() <= digits as usize {
        format!("{}{}", "0".repeat(digits as usize + 1 - mag.len()), mag)
    } else {
        mag
    };
    let split = mag.len() - digits as usize;
    let mut out = String::new();
    if neg {
        out.push('-');
    }
    out.push_str(&mag[..split]);
    out.push('.');
    out.push_str(&mag[split..]);
    // trim trailing zeros in the fraction but keep at least one digit
    while out.ends_with('0') && !out.ends_with(".0") {
        out.pop();
    }
    out
}

/// Serde adapter: rationals as exact strings.
pub mod serde_rat {
    use super::*;
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(r: &Rat, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&format_rat(r))
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Rat, D::Error> {
        let s = String::deserialize(d)?;
        parse_rat(&s).map_err(serde::de::Error::custom)
    }
}

/// Deterministic seed derivation (splitmix64 over the stream inputs), so
/// parallel and serial runs agree.
pub fn mix_seed(base: u64, a: u64, b: u64) -> u64 {
    let mut x = base ^ a.wrapping_mul(0x9e37_79b9_7f4a_7c15) ^ b.wrapping_mul(0xbf58_476d_1ce4_e5b9);
    for _ in 0..2 {
        x = x.wrapping_add(0x9e37_79b9_7f4a_7c15);
        let mut z = x;
        z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
        x = z ^ (z >> 31);
    }
    x
}
