//! Exact rationals and their `p/q` text form.

use std::str::FromStr;

use num_bigint::BigInt;
use num_integer::Integer;
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};

use crate::error::LabError;

pub type Rational = BigRational;

pub fn int(n: i64) -> Rational {
    Rational::from_integer(BigInt::from(n))
}

pub fn ratio(p: i64, q: i64) -> Rational {
    Rational::new(BigInt::from(p), BigInt::from(q))
}

/// `2^e` for any signed exponent.
pub fn pow2(e: i64) -> Rational {
    if e >= 0 {
        Rational::from_integer(BigInt::one() << (e as usize))
    } else {
        Rational::new_raw(BigInt::one(), BigInt::one() << ((-e) as usize))
    }
}

/// Powers of coprime parts stay coprime, so no reduction is needed.
pub fn pow(base: &Rational, e: u32) -> Rational {
    Rational::new_raw(base.numer().pow(e), base.denom().pow(e))
}

/// Parses `p/q`, `p`, a plain decimal like `0.25`, or scientific `2.5e-1`.
pub fn parse_rational(s: &str) -> Result<Rational, LabError> {
    let s = s.trim();
    let bad = || LabError::parse(0, 0, format!("not a rational: {s:?}"));
    if let Some((m, e)) = s.split_once(['e', 'E']) {
        let e: i64 = e.parse().map_err(|_| bad())?;
        if m.contains('/') || e.unsigned_abs() > 100_000 {
            return Err(bad());
        }
        return Ok(parse_rational(m).map_err(|_| bad())? * pow10(e));
    }
    if let Some((p, q)) = s.split_once('/') {
        let p = BigInt::from_str(p.trim()).map_err(|_| bad())?;
        let q = BigInt::from_str(q.trim()).map_err(|_| bad())?;
        if q.is_zero() {
            return Err(bad());
        }
        return Ok(Rational::new(p, q));
    }
    if let Some((whole, frac)) = s.split_once('.') {
        if frac.is_empty() || !frac.chars().all(|c| c.is_ascii_digit()) {
            return Err(bad());
        }
        let neg = whole.starts_with('-');
        let whole_abs = whole.trim_start_matches(['-', '+']);
        let w = if whole_abs.is_empty() {
            BigInt::zero()
        } else {
            BigInt::from_str(whole_abs).map_err(|_| bad())?
        };
        let f = BigInt::from_str(frac).map_err(|_| bad())?;
        let scale = num_traits::pow(BigInt::from(10), frac.len());
        let mag = Rational::new(w * &scale + f, scale);
        return Ok(if neg { -mag } else { mag });
    }
    BigInt::from_str(s)
        .map(Rational::from_integer)
        .map_err(|_| bad())
}

/// Canonical `p/q` form; integers are written as `p/1` so readers never
/// have to special-case.
pub fn format_rational(q: &Rational) -> String {
    format!("{}/{}", q.numer(), q.denom())
}

pub fn pow10(e: i64) -> Rational {
    let p = num_traits::pow(BigInt::from(10), e.unsigned_abs() as usize);
    if e >= 0 {
        Rational::from_integer(p)
    } else {
        Rational::new_raw(BigInt::one(), p)
    }
}

/// `q` to `digits` significant digits, rounded down or up (toward `±∞`),
/// so that a `[down, up]` pair always encloses `q`. Plain notation is used
/// for exponents in `[-6, 21)`, scientific otherwise.
pub fn format_decimal(q: &Rational, digits: u32, up: bool) -> String {
    if q.is_zero() {
        return "0".into();
    }
    let neg = q.is_negative();
    let a = q.abs();
    let mut e = (floor_log2(&a) as f64 * std::f64::consts::LOG10_2).floor() as i64;
    while pow10(e) > a {
        e -= 1;
    }
    while pow10(e + 1) <= a {
        e += 1;
    }
    let scaled = &a * pow10(digits as i64 - 1 - e);
    let mut m = if up != neg {
        scaled.ceil()
    } else {
        scaled.floor()
    }
    .to_integer();
    if m == pow10(digits as i64).to_integer() {
        m /= 10;
        e += 1;
    }
    let all = m.to_string();
    let sig = all.trim_end_matches('0');
    let sign = if neg { "-" } else { "" };
    if (-6..21).contains(&e) {
        let body = if e >= 0 {
            let e = e as usize;
            if sig.len() > e + 1 {
                format!("{}.{}", &sig[..=e], &sig[e + 1..])
            } else {
                format!("{sig}{}", "0".repeat(e + 1 - sig.len()))
            }
        } else {
            format!("0.{}{sig}", "0".repeat((-e - 1) as usize))
        };
        return format!("{sign}{body}");
    }
    let mantissa = if sig.len() > 1 {
        format!("{}.{}", &sig[..1], &sig[1..])
    } else {
        sig.to_string()
    };
    format!("{sign}{mantissa}e{e}")
}

/// Nearest double, tolerant of numerators and denominators far outside the
/// `f64` exponent range.
pub fn to_f64(q: &Rational) -> f64 {
    if q.is_zero() {
        return 0.0;
    }
    if let (Some(n), Some(d)) = (q.numer().to_f64(), q.denom().to_f64()) {
        if n.is_finite() && d.is_finite() && d != 0.0 {
            return n / d;
        }
    }
    let shift = q.numer().bits() as i64 - q.denom().bits() as i64;
    let scaled = q.abs() * pow2(-shift + 60);
    let m = scaled.to_integer().to_f64().unwrap_or(f64::NAN) * 2f64.powi(-60);
    let v = m * 2f64.powf(shift as f64);
    if q.is_negative() {
        -v
    } else {
        v
    }
}

/// `floor(log2 |q|)` computed from bit lengths; `q` must be non-zero.
pub fn floor_log2(q: &Rational) -> i64 {
    let n = q.numer().abs();
    let d = q.denom();
    let mut e = n.bits() as i64 - d.bits() as i64;
    // n / d in [2^(e-1), 2^(e+1)); settle which side of 2^e.
    let (lhs, rhs) = if e >= 0 {
        (n.clone(), d << (e as usize))
    } else {
        (n.clone() << ((-e) as usize), d.clone())
    };
    if lhs < rhs {
        e -= 1;
    }
    e
}

/// Exponent `e` when `q == 2^e`.
pub fn exact_log2(q: &Rational) -> Option<i64> {
    if !q.is_positive() {
        return None;
    }
    let is_pow2 = |b: &BigInt| b.is_positive() && b.trailing_zeros() == Some(b.bits() - 1);
    if is_pow2(q.numer()) && is_pow2(q.denom()) {
        Some(q.numer().bits() as i64 - q.denom().bits() as i64)
    } else {
        None
    }
}

/// Floor of `q * 2^bits`, as an integer.
pub fn scaled_floor(q: &Rational, bits: u32) -> BigInt {
    let num = q.numer() << (bits as usize);
    num.div_floor(q.denom())
}

pub fn scaled_ceil(q: &Rational, bits: u32) -> BigInt {
    let num = q.numer() << (bits as usize);
    let (d, r) = num.div_mod_floor(q.denom());
    if r.is_zero() {
        d
    } else {
        d + 1
    }
}

/// `Some(e)` when the denominator is `2^e`.
fn dyadic_exponent(q: &Rational) -> Option<u64> {
    let d = q.denom();
    let e = d.trailing_zeros().unwrap_or(0);
    (d.bits() == e + 1).then_some(e)
}

/// `a + b`, shifting instead of taking a gcd when both are dyadic.
pub fn add(a: &Rational, b: &Rational) -> Rational {
    match (dyadic_exponent(a), dyadic_exponent(b)) {
        (Some(ea), Some(eb)) => {
            let e = ea.max(eb);
            let n = (a.numer() << (e - ea) as usize) + (b.numer() << (e - eb) as usize);
            from_scaled(n, e as u32)
        }
        _ => a + b,
    }
}

/// `a * b`, shifting instead of taking a gcd when both are dyadic.
pub fn mul(a: &Rational, b: &Rational) -> Rational {
    match (dyadic_exponent(a), dyadic_exponent(b)) {
        (Some(ea), Some(eb)) => from_scaled(a.numer() * b.numer(), (ea + eb) as u32),
        _ => a * b,
    }
}

/// `n / 2^bits` in lowest terms; a shift replaces the gcd.
pub fn from_scaled(n: BigInt, bits: u32) -> Rational {
    let Some(tz) = n.trailing_zeros() else {
        return Rational::zero();
    };
    let shift = tz.min(bits as u64) as usize;
    Rational::new_raw(n >> shift, BigInt::one() << (bits as usize - shift))
}

/// Serde adapter storing rationals as `"p/q"` strings.
pub mod serde_rational {
    use super::*;
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(q: &Rational, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&format_rational(q))
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Rational, D::Error> {
        let s = String::deserialize(d)?;
        parse_rational(&s).map_err(serde::de::Error::custom)
    }

    pub mod vec {
        use super::*;
        use serde::ser::SerializeSeq;

        pub fn serialize<S: Serializer>(v: &[Rational], s: S) -> Result<S::Ok, S::Error> {
            let mut seq = s.serialize_seq(Some(v.len()))?;
            for q in v {
                seq.serialize_element(&format_rational(q))?;
            }
            seq.end()
        }

        pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Vec<Rational>, D::Error> {
            let v = Vec::<String>::deserialize(d)?;
            v.iter()
                .map(|s| parse_rational(s).map_err(serde::de::Error::custom))
                .collect()
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn decimal_rounds_outward() {
        let third = ratio(1, 3);
        assert_eq!(format_decimal(&third, 15, false), "0.333333333333333");
        assert_eq!(format_decimal(&third, 15, true), "0.333333333333334");
        assert_eq!(
            format_decimal(&-third.clone(), 15, false),
            "-0.333333333333334"
        );
        assert_eq!(format_decimal(&-third, 15, true), "-0.333333333333333");
        assert_eq!(format_decimal(&ratio(1, 4), 15, false), "0.25");
        assert_eq!(format_decimal(&int(1200), 15, true), "1200");
        assert_eq!(
            format_decimal(&pow2(-30), 15, false),
            "9.31322574615478e-10"
        );
        assert_eq!(format_decimal(&pow2(-30), 15, true), "9.31322574615479e-10");
        assert_eq!(format_decimal(&pow2(80), 15, false), "1.20892581961462e24");
        assert_eq!(format_decimal(&Rational::zero(), 15, true), "0");
    }

    #[test]
    fn decimal_carry_bumps_the_exponent() {
        let q = int(10).pow(15) - ratio(1, 1000);
        assert_eq!(format_decimal(&q, 15, true), "1000000000000000");
        assert_eq!(format_decimal(&q, 15, false), "999999999999999");
    }

    #[test]
    fn scientific_input() {
        assert_eq!(parse_rational("2.5e-1").unwrap(), ratio(1, 4));
        assert_eq!(parse_rational("3E2").unwrap(), int(300));
        assert!(parse_rational("1/2e3").is_err());
    }

    proptest! {
        #[test]
        fn decimal_pair_encloses(p in -10_000_000i64..10_000_000, q in 1i64..10_000_000, shift in -80i64..80) {
            let x = ratio(p, q) * pow2(shift);
            let lo = parse_rational(&format_decimal(&x, 15, false)).unwrap();
            let hi = parse_rational(&format_decimal(&x, 15, true)).unwrap();
            prop_assert!(lo <= x && x <= hi);
            prop_assert!(&hi - &lo <= x.abs() * ratio(1, 10i64.pow(13)));
        }
    }

    #[test]
    fn parse_forms() {
        assert_eq!(parse_rational("1/3").unwrap(), ratio(1, 3));
        assert_eq!(parse_rational("6/4").unwrap(), ratio(3, 2));
        assert_eq!(parse_rational("-2").unwrap(), int(-2));
        assert_eq!(parse_rational("0.25").unwrap(), ratio(1, 4));
        assert!(parse_rational("1/0").is_err());
        assert!(parse_rational("x").is_err());
    }

    #[test]
    fn format_is_canonical() {
        assert_eq!(format_rational(&ratio(2, 4)), "1/2");
        assert_eq!(format_rational(&int(3)), "3/1");
        assert_eq!(format_rational(&ratio(1, -3)), "-1/3");
    }

    #[test]
    fn floor_log2_matches_powers() {
        assert_eq!(floor_log2(&ratio(1, 8)), -3);
        assert_eq!(floor_log2(&ratio(2, 9)), -3);
        assert_eq!(floor_log2(&ratio(9, 2)), 2);
        assert_eq!(floor_log2(&int(1)), 0);
        assert_eq!(floor_log2(&pow2(-20000)), -20000);
    }

    #[test]
    fn exact_log2_detects_powers() {
        assert_eq!(exact_log2(&pow2(-17)), Some(-17));
        assert_eq!(exact_log2(&int(1)), Some(0));
        assert_eq!(exact_log2(&ratio(3, 4)), None);
        assert_eq!(exact_log2(&int(0)), None);
    }

    #[test]
    fn to_f64_handles_tiny_values() {
        let v = to_f64(&pow2(-3000));
        assert_eq!(v, 0.0);
        let v = to_f64(&(pow2(-1100) * int(3)));
        assert!(v >= 0.0);
        assert!((to_f64(&ratio(2, 9)) - 2.0 / 9.0).abs() < 1e-16);
    }
}
