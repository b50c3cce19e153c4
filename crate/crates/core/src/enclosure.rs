//! Certified real arithmetic: closed intervals with exact rational
//! endpoints, the binary logarithm with a guaranteed enclosure, and the
//! extended values (±∞) that deficiencies take.
//!
//! Endpoints stay exact until an operation has to round (logarithms,
//! exponentials) or the caller asks for [`Enclosure::round_out`]. Rounding is
//! always outward, so every enclosure contains the true value.

use std::cmp::Ordering;
use std::fmt;

use num_bigint::BigInt;
use num_integer::Integer;
use num_traits::{One, Signed, Zero};
use serde::{Deserialize, Serialize};

use crate::error::{LabError, Result};
use crate::rational::{
    self, exact_log2, floor_log2, from_scaled, int, pow2, scaled_ceil, scaled_floor, to_f64,
    Rational,
};

/// Guard bits carried beyond the requested precision inside the logarithm.
const LOG_GUARD_BITS: u32 = 8;

#[derive(Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Enclosure {
    #[serde(with = "crate::rational::serde_rational")]
    lo: Rational,
    #[serde(with = "crate::rational::serde_rational")]
    hi: Rational,
}

impl Enclosure {
    pub fn new(lo: Rational, hi: Rational) -> Self {
        assert!(lo <= hi, "enclosure endpoints out of order");
        Enclosure { lo, hi }
    }

    pub fn exact(q: Rational) -> Self {
        Enclosure {
            lo: q.clone(),
            hi: q,
        }
    }

    pub fn zero() -> Self {
        Self::exact(Rational::zero())
    }

    pub fn lo(&self) -> &Rational {
        &self.lo
    }

    pub fn hi(&self) -> &Rational {
        &self.hi
    }

    pub fn width(&self) -> Rational {
        &self.hi - &self.lo
    }

    pub fn is_exact(&self) -> bool {
        self.lo == self.hi
    }

    pub fn midpoint(&self) -> Rational {
        (&self.lo + &self.hi) / int(2)
    }

    pub fn mid_f64(&self) -> f64 {
        to_f64(&self.midpoint())
    }

    pub fn lo_f64(&self) -> f64 {
        to_f64(&self.lo)
    }

    pub fn hi_f64(&self) -> f64 {
        to_f64(&self.hi)
    }

    pub fn contains(&self, q: &Rational) -> bool {
        &self.lo <= q && q <= &self.hi
    }

    pub fn overlaps(&self, other: &Enclosure) -> bool {
        self.lo <= other.hi && other.lo <= self.hi
    }

    /// Every point of `self` is strictly below every point of `other`.
    pub fn certainly_lt(&self, other: &Enclosure) -> bool {
        self.hi < other.lo
    }

    pub fn certainly_le(&self, other: &Enclosure) -> bool {
        self.hi <= other.lo
    }

    pub fn certainly_positive(&self) -> bool {
        self.lo.is_positive()
    }

    pub fn add(&self, other: &Enclosure) -> Enclosure {
        Enclosure {
            lo: rational::add(&self.lo, &other.lo),
            hi: rational::add(&self.hi, &other.hi),
        }
    }

    pub fn sub(&self, other: &Enclosure) -> Enclosure {
        Enclosure {
            lo: &self.lo - &other.hi,
            hi: &self.hi - &other.lo,
        }
    }

    pub fn neg(&self) -> Enclosure {
        Enclosure {
            lo: -&self.hi,
            hi: -&self.lo,
        }
    }

    pub fn add_exact(&self, q: &Rational) -> Enclosure {
        Enclosure {
            lo: rational::add(&self.lo, q),
            hi: rational::add(&self.hi, q),
        }
    }

    pub fn scale(&self, q: &Rational) -> Enclosure {
        let a = rational::mul(&self.lo, q);
        let b = rational::mul(&self.hi, q);
        if a <= b {
            Enclosure { lo: a, hi: b }
        } else {
            Enclosure { lo: b, hi: a }
        }
    }

    pub fn mul(&self, other: &Enclosure) -> Enclosure {
        if self.is_exact() {
            return other.scale(&self.lo);
        }
        if other.is_exact() {
            return self.scale(&other.lo);
        }
        if !self.lo.is_negative() && !other.lo.is_negative() {
            return Enclosure {
                lo: rational::mul(&self.lo, &other.lo),
                hi: rational::mul(&self.hi, &other.hi),
            };
        }
        let c = [
            &self.lo * &other.lo,
            &self.lo * &other.hi,
            &self.hi * &other.lo,
            &self.hi * &other.hi,
        ];
        let lo = c.iter().min().unwrap().clone();
        let hi = c.iter().max().unwrap().clone();
        Enclosure { lo, hi }
    }

    pub fn recip(&self) -> Result<Enclosure> {
        if !self.lo.is_positive() && !self.hi.is_negative() {
            return Err(LabError::Domain(
                "reciprocal of an enclosure containing 0".into(),
            ));
        }
        Ok(Enclosure {
            lo: self.hi.recip(),
            hi: self.lo.recip(),
        })
    }

    pub fn div(&self, other: &Enclosure) -> Result<Enclosure> {
        Ok(self.mul(&other.recip()?))
    }

    /// `self / other` rounded outward onto the grid `2^-bits`, without
    /// forming the reduced quotient when both sides are positive.
    pub fn div_round(&self, other: &Enclosure, bits: u32) -> Result<Enclosure> {
        if !self.lo.is_positive() || !other.lo.is_positive() {
            return Ok(self.div(other)?.round_out(bits));
        }
        let scaled = |a: &Rational, b: &Rational| -> (BigInt, BigInt) {
            (
                (a.numer() * b.denom()) << (bits as usize),
                a.denom() * b.numer(),
            )
        };
        let (n, d) = scaled(&self.lo, &other.hi);
        let lo = n.div_floor(&d);
        let (n, d) = scaled(&self.hi, &other.lo);
        let hi = n.div_ceil(&d);
        Ok(Enclosure {
            lo: from_scaled(lo, bits),
            hi: from_scaled(hi, bits),
        })
    }

    pub fn max(&self, other: &Enclosure) -> Enclosure {
        Enclosure {
            lo: (&self.lo).max(&other.lo).clone(),
            hi: (&self.hi).max(&other.hi).clone(),
        }
    }

    pub fn min(&self, other: &Enclosure) -> Enclosure {
        Enclosure {
            lo: (&self.lo).min(&other.lo).clone(),
            hi: (&self.hi).min(&other.hi).clone(),
        }
    }

    /// Widens the endpoints onto the grid `2^-bits`.
    pub fn round_out(&self, bits: u32) -> Enclosure {
        Enclosure {
            lo: from_scaled(scaled_floor(&self.lo, bits), bits),
            hi: from_scaled(scaled_ceil(&self.hi, bits), bits),
        }
    }

    /// Enclosure of `log2` over the interval; requires a positive lower end.
    pub fn log2(&self, bits: u32) -> Result<Enclosure> {
        if !self.lo.is_positive() {
            return Err(LabError::Domain("log2 of a non-positive enclosure".into()));
        }
        let lo = certified_log2(&self.lo, bits)?;
        if self.is_exact() {
            return Ok(lo.enclosure);
        }
        let hi = certified_log2(&self.hi, bits)?;
        Ok(Enclosure {
            lo: lo.enclosure.lo,
            hi: hi.enclosure.hi,
        })
    }

    pub fn exp2(&self, bits: u32) -> Enclosure {
        let lo = exp2_rational(&self.lo, bits);
        if self.is_exact() {
            return lo;
        }
        let hi = exp2_rational(&self.hi, bits);
        Enclosure {
            lo: lo.lo,
            hi: hi.hi,
        }
    }

    /// `self^exponent` for a positive enclosure. Integer exponents are
    /// evaluated by exact repeated multiplication.
    pub fn pow(&self, exponent: &Rational, bits: u32) -> Result<Enclosure> {
        if !self.lo.is_positive() {
            return Err(LabError::Domain("power of a non-positive enclosure".into()));
        }
        if exponent.is_integer() {
            let e = exponent.to_integer();
            let n: u64 = e
                .abs()
                .try_into()
                .map_err(|_| LabError::Domain("exponent too large".into()))?;
            let mut acc = Enclosure::exact(Rational::one());
            for _ in 0..n {
                acc = acc.mul(self);
            }
            return if e.is_negative() {
                acc.recip()
            } else {
                Ok(acc)
            };
        }
        Ok(self.log2(bits)?.scale(exponent).exp2(bits))
    }
}

impl fmt::Debug for Enclosure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "[{:.17e}, {:.17e}]", to_f64(&self.lo), to_f64(&self.hi))
    }
}

/// A certified binary logarithm.
#[derive(Clone, Debug, PartialEq)]
pub struct HpLog {
    pub enclosure: Enclosure,
    pub precision: u32,
}

impl HpLog {
    /// Midpoint of the enclosure, a dyadic rational.
    pub fn value(&self) -> Rational {
        self.enclosure.midpoint()
    }

    pub fn lo(&self) -> &Rational {
        self.enclosure.lo()
    }

    pub fn hi(&self) -> &Rational {
        self.enclosure.hi()
    }
}

/// Enclosure of `log2 q` of width at most `2^(2 - precision)`.
///
/// The fractional part is produced by the classical square-and-halve digit
/// recurrence, run twice in fixed point: once rounding every step down and
/// once rounding up. Rounding down can only decrease the represented
/// logarithm, so the first run yields a lower bound and the second an upper
/// bound. Exact powers of two return a zero-width enclosure.
pub fn certified_log2(q: &Rational, precision: u32) -> Result<HpLog> {
    if !q.is_positive() {
        return Err(LabError::Domain(format!("log2 of non-positive value {q}")));
    }
    if let Some(e) = exact_log2(q) {
        return Ok(HpLog {
            enclosure: Enclosure::exact(int(e)),
            precision,
        });
    }
    let e = floor_log2(q);
    let mantissa = q * pow2(-e);
    let w = precision + LOG_GUARD_BITS;
    let lo = digit_run(&scaled_floor(&mantissa, w), w, precision, false);
    let hi = digit_run(&scaled_ceil(&mantissa, w), w, precision, true);
    let e = int(e);
    Ok(HpLog {
        enclosure: Enclosure::new(&e + lo, &e + hi),
        precision,
    })
}

/// One square-and-halve pass over a fixed-point mantissa `v / 2^w` in
/// `[1, 2]`. Returns a bound on `log2(v / 2^w)`.
fn digit_run(start: &BigInt, w: u32, precision: u32, round_up: bool) -> Rational {
    let one = BigInt::one() << (w as usize);
    let two = &one << 1usize;
    let mut v = start.clone();
    let mut digits = BigInt::zero();
    for _ in 0..precision {
        let sq = &v * &v;
        v = if round_up {
            ceil_shr(&sq, w)
        } else {
            &sq >> (w as usize)
        };
        digits <<= 1usize;
        if v >= two {
            digits += 1;
            v = if round_up {
                ceil_shr(&v, 1)
            } else {
                &v >> 1usize
            };
        }
    }
    // Tail: m - 1 <= log2 m <= min(1, 3/2 (m - 1)) on [1, 2].
    let excess = Rational::new(&v - &one, one.clone());
    let tail = if round_up {
        (excess * Rational::new(3.into(), 2.into())).min(Rational::one())
    } else {
        excess
    };
    (Rational::from_integer(digits) + tail) * pow2(-(precision as i64))
}

fn ceil_shr(v: &BigInt, s: u32) -> BigInt {
    let q = v >> (s as usize);
    if (&q << (s as usize)) == *v {
        q
    } else {
        q + 1
    }
}

/// Enclosure of `ln 2` from `sum 1/(k 2^k)`, accurate to about `2^-bits`.
pub fn ln2(bits: u32) -> Enclosure {
    let w = bits + 8;
    let terms = w as usize + 2;
    let unit = BigInt::one() << (w as usize);
    let mut lo = BigInt::zero();
    let mut hi = BigInt::zero();
    for k in 1..=terms {
        let den = BigInt::from(k) << k;
        let (d, r) = unit.div_mod_floor(&den);
        lo += &d;
        hi += if r.is_zero() { d } else { d + 1 };
    }
    // Remainder of the series is below 2 / ((K + 1) 2^K) < 2^-K.
    hi += 1;
    Enclosure::new(from_scaled(lo, w), from_scaled(hi, w))
}

/// Enclosure of `2^r` with relative accuracy about `2^-bits`.
pub fn exp2_rational(r: &Rational, bits: u32) -> Enclosure {
    let k = r.floor();
    let f = r - &k;
    let k: i64 = k.to_integer().try_into().expect("exponent out of range");
    if f.is_zero() {
        return Enclosure::exact(pow2(k));
    }
    let w = bits + 16;
    let t = ln2(w).scale(&f).round_out(w);
    let exp_lo = taylor_exp(t.lo(), w, false);
    let exp_hi = taylor_exp(t.hi(), w, true);
    let s = pow2(k);
    Enclosure::new(exp_lo * &s, exp_hi * &s)
}

/// Bound on `e^t` for `0 <= t < 1` by its Taylor series, with the remainder
/// added when an upper bound is requested.
fn taylor_exp(t: &Rational, w: u32, upper: bool) -> Rational {
    let eps = pow2(-(w as i64) - 4);
    let mut sum = Rational::one();
    let mut term = Rational::one();
    let mut i = 1i64;
    loop {
        term = &term * t / int(i);
        term = if upper {
            from_scaled(scaled_ceil(&term, w + 8), w + 8)
        } else {
            from_scaled(scaled_floor(&term, w + 8), w + 8)
        };
        sum += &term;
        i += 1;
        if term < eps {
            break;
        }
    }
    if upper {
        // Remainder after the last term: at most 2 * next term since t < 1.
        sum += term * t * int(2) / int(i);
        from_scaled(scaled_ceil(&sum, w), w)
    } else {
        from_scaled(scaled_floor(&sum, w), w)
    }
}

/// Enclosure of `log2 3`, used by the factor-3 windows of the rarefied
/// construction.
pub fn log2_three(bits: u32) -> Enclosure {
    certified_log2(&int(3), bits).expect("3 > 0").enclosure
}

/// A value in the extended reals as deficiencies need it: `-∞` for a
/// vanishing semimeasure, `+∞` for a positive semimeasure on a null set.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub enum DeficiencyValue {
    NegInfinity,
    Finite(Enclosure),
    PosInfinity,
}

impl DeficiencyValue {
    pub fn exact(q: Rational) -> Self {
        DeficiencyValue::Finite(Enclosure::exact(q))
    }

    /// `log2 q` with `log2 0 = -∞`.
    pub fn log2_of(q: &Rational, bits: u32) -> Result<Self> {
        if q.is_zero() {
            Ok(DeficiencyValue::NegInfinity)
        } else {
            Ok(DeficiencyValue::Finite(certified_log2(q, bits)?.enclosure))
        }
    }

    pub fn finite(&self) -> Option<&Enclosure> {
        match self {
            DeficiencyValue::Finite(e) => Some(e),
            _ => None,
        }
    }

    pub fn is_neg_infinity(&self) -> bool {
        matches!(self, DeficiencyValue::NegInfinity)
    }

    pub fn is_pos_infinity(&self) -> bool {
        matches!(self, DeficiencyValue::PosInfinity)
    }

    /// `self <= other` decided at enclosure endpoints, with `slack` allowed.
    pub fn le_within(&self, other: &DeficiencyValue, slack: &Rational) -> bool {
        use DeficiencyValue::*;
        match (self, other) {
            (NegInfinity, _) | (_, PosInfinity) => true,
            (PosInfinity, _) | (_, NegInfinity) => false,
            (Finite(a), Finite(b)) => a.hi() <= &(b.lo() + slack),
        }
    }

    pub fn certainly_le(&self, other: &DeficiencyValue) -> bool {
        self.le_within(other, &Rational::zero())
    }

    fn rank(&self) -> u8 {
        match self {
            DeficiencyValue::NegInfinity => 0,
            DeficiencyValue::Finite(_) => 1,
            DeficiencyValue::PosInfinity => 2,
        }
    }

    /// Pointwise maximum of two enclosed values.
    pub fn max(&self, other: &DeficiencyValue) -> DeficiencyValue {
        match (self, other) {
            (DeficiencyValue::Finite(a), DeficiencyValue::Finite(b)) => {
                DeficiencyValue::Finite(a.max(b))
            }
            _ => {
                if self.rank() >= other.rank() {
                    self.clone()
                } else {
                    other.clone()
                }
            }
        }
    }

    pub fn min(&self, other: &DeficiencyValue) -> DeficiencyValue {
        match (self, other) {
            (DeficiencyValue::Finite(a), DeficiencyValue::Finite(b)) => {
                DeficiencyValue::Finite(a.min(b))
            }
            _ => {
                if self.rank() <= other.rank() {
                    self.clone()
                } else {
                    other.clone()
                }
            }
        }
    }

    /// `self - other`; infinite operands of equal sign have no defined
    /// difference and yield `None`.
    pub fn minus(&self, other: &DeficiencyValue) -> Option<DeficiencyValue> {
        use DeficiencyValue::*;
        match (self, other) {
            (Finite(a), Finite(b)) => Some(Finite(a.sub(b))),
            (PosInfinity, PosInfinity) | (NegInfinity, NegInfinity) => None,
            (PosInfinity, _) | (_, NegInfinity) => Some(PosInfinity),
            (NegInfinity, _) | (_, PosInfinity) => Some(NegInfinity),
        }
    }

    pub fn width(&self) -> Rational {
        match self {
            DeficiencyValue::Finite(e) => e.width(),
            _ => Rational::zero(),
        }
    }

    pub fn lo_f64(&self) -> f64 {
        match self {
            DeficiencyValue::NegInfinity => f64::NEG_INFINITY,
            DeficiencyValue::Finite(e) => to_f64(e.lo()),
            DeficiencyValue::PosInfinity => f64::INFINITY,
        }
    }

    pub fn hi_f64(&self) -> f64 {
        match self {
            DeficiencyValue::NegInfinity => f64::NEG_INFINITY,
            DeficiencyValue::Finite(e) => to_f64(e.hi()),
            DeficiencyValue::PosInfinity => f64::INFINITY,
        }
    }

    /// Total order on the lower endpoints, used for reporting only.
    pub fn cmp_lo(&self, other: &DeficiencyValue) -> Ordering {
        match (self, other) {
            (DeficiencyValue::Finite(a), DeficiencyValue::Finite(b)) => a.lo().cmp(b.lo()),
            _ => self.rank().cmp(&other.rank()),
        }
    }
}
