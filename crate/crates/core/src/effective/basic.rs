//! Step functions determined by finite prefixes, and increasing stage
//! sequences of them standing for lower-semicomputable functions.

use std::collections::BTreeMap;

use num_traits::{Signed, Zero};

use crate::bits::{prefix_violation, BitString};
use crate::enclosure::Enclosure;
use crate::error::{LabError, Result};
use crate::measure::Measure;
use crate::rational::{pow2, Rational};

/// Finitely many `(stem, value)` pieces with prefix-free stems; zero
/// outside their union.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct BasicFunction {
    pieces: BTreeMap<BitString, Rational>,
}

impl BasicFunction {
    pub fn zero() -> Self {
        Self::default()
    }

    pub fn new(pieces: impl IntoIterator<Item = (BitString, Rational)>) -> Result<Self> {
        let mut map = BTreeMap::new();
        for (s, v) in pieces {
            if map.insert(s.clone(), v).is_some() {
                return Err(LabError::Invalid(format!("stem {s} listed twice")));
            }
        }
        if let Some((a, b)) = prefix_violation(map.keys()) {
            return Err(LabError::Invalid(format!(
                "stems {a} and {b} are comparable"
            )));
        }
        Ok(BasicFunction { pieces: map })
    }

    /// `value · 1_[stem]`.
    pub fn indicator(stem: BitString, value: Rational) -> Self {
        BasicFunction {
            pieces: BTreeMap::from([(stem, value)]),
        }
    }

    pub fn pieces(&self) -> impl Iterator<Item = (&BitString, &Rational)> {
        self.pieces.iter()
    }

    pub fn len(&self) -> usize {
        self.pieces.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pieces.is_empty()
    }

    pub fn max_depth(&self) -> usize {
        self.pieces.keys().map(BitString::len).max().unwrap_or(0)
    }

    fn covering(&self, x: &BitString) -> Option<(&BitString, &Rational)> {
        self.pieces
            .range(..=x.clone())
            .next_back()
            .filter(|(s, _)| s.is_prefix_of(x))
    }

    fn has_proper_extension(&self, x: &BitString) -> bool {
        self.pieces
            .range(x.clone()..)
            .find(|(s, _)| *s != x)
            .is_some_and(|(s, _)| x.is_proper_prefix_of(s))
    }

    /// Value on every sequence extending `x`.
    pub fn eval(&self, x: &BitString) -> Result<Rational> {
        if let Some((_, v)) = self.covering(x) {
            return Ok(v.clone());
        }
        if self.has_proper_extension(x) {
            return Err(LabError::UndeterminedPrefix {
                stem: x.to_string(),
            });
        }
        Ok(Rational::zero())
    }

    /// `Σ value · μ([stem])`, exact for exact measures.
    pub fn integrate(&self, mu: &Measure) -> Result<Rational> {
        if !mu.is_exact() {
            let stages = match mu {
                Measure::Oracle(o) => o.budget,
                _ => 0,
            };
            return Err(LabError::PrecisionExhausted {
                what: "exact integral against an oracle measure".into(),
                stages,
            });
        }
        let mut total = Rational::zero();
        for (s, v) in &self.pieces {
            total += v * mu.exact_measure(s)?;
        }
        Ok(total)
    }

    /// Certified integral against any measure, using `ε = 2^-stage`.
    pub fn integrate_enclosure(&self, mu: &Measure, stage: u32) -> Result<Enclosure> {
        if mu.is_exact() {
            return Ok(Enclosure::exact(self.integrate(mu)?));
        }
        let eps = pow2(-(stage as i64));
        let mut total = Rational::zero();
        let mut slack = Rational::zero();
        for (s, v) in &self.pieces {
            total += v * mu.measure_of(s, &eps)?;
            slack += v.abs() * &eps;
        }
        Ok(Enclosure::new(&total - &slack, total + slack))
    }

    /// Combines two functions on their common prefix-free refinement.
    pub fn combine(
        &self,
        other: &BasicFunction,
        op: impl Fn(&Rational, &Rational) -> Rational,
    ) -> BasicFunction {
        let mut out = BTreeMap::new();
        let zero = Rational::zero();
        let mut stack = vec![BitString::root()];
        while let Some(x) = stack.pop() {
            if self.has_proper_extension(&x) || other.has_proper_extension(&x) {
                stack.push(x.child(true));
                stack.push(x.child(false));
                continue;
            }
            let a = self.covering(&x).map(|(_, v)| v);
            let b = other.covering(&x).map(|(_, v)| v);
            if a.is_some() || b.is_some() {
                out.insert(x, op(a.unwrap_or(&zero), b.unwrap_or(&zero)));
            }
        }
        BasicFunction { pieces: out }
    }

    pub fn pointwise_max(&self, other: &BasicFunction) -> BasicFunction {
        self.combine(other, |a, b| a.max(b).clone())
    }

    pub fn pointwise_sum(&self, other: &BasicFunction) -> BasicFunction {
        self.combine(other, |a, b| a + b)
    }

    /// First stem of the common refinement where `self < other`.
    pub fn first_drop_below(&self, other: &BasicFunction) -> Option<BitString> {
        let diff = self.combine(other, |a, b| a - b);
        diff.pieces
            .into_iter()
            .find(|(_, v)| v.is_negative())
            .map(|(s, _)| s)
    }
}

/// An increasing sequence of basic functions; its pointwise limit is a
/// lower-semicomputable function.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct StagedEnumeration {
    stages: Vec<BasicFunction>,
}

impl StagedEnumeration {
    /// Accepts materialized stages after checking they never decrease.
    pub fn new(stages: Vec<BasicFunction>) -> Result<Self> {
        for (i, w) in stages.windows(2).enumerate() {
            if let Some(stem) = w[1].first_drop_below(&w[0]) {
                return Err(LabError::MalformedEnumeration {
                    stage: i + 2,
                    stem: stem.to_string(),
                });
            }
        }
        Ok(StagedEnumeration { stages })
    }

    pub fn stages(&self) -> &[BasicFunction] {
        &self.stages
    }

    pub fn last(&self) -> BasicFunction {
        self.stages.last().cloned().unwrap_or_default()
    }

    pub fn len(&self) -> usize {
        self.stages.len()
    }

    pub fn is_empty(&self) -> bool {
        self.stages.is_empty()
    }
}

/// Materializes stages `1..=cutoff` from a lower enumeration. At stage `s`
/// the source lists newly found pairs `(r, x)`, each asserting `t > r'` on
/// `[x]` for every rational `r' < r`; stage `s` is the maximum of all
/// `r · 1_[x]` seen so far.
pub fn enumeration_to_stages(
    mut source: impl FnMut(usize) -> Vec<(Rational, BitString)>,
    cutoff: usize,
) -> Result<StagedEnumeration> {
    let mut current = BasicFunction::zero();
    let mut stages = Vec::with_capacity(cutoff);
    for s in 1..=cutoff {
        for (r, x) in source(s) {
            if r.is_negative() {
                return Err(LabError::MalformedEnumeration {
                    stage: s,
                    stem: x.to_string(),
                });
            }
            current = current.pointwise_max(&BasicFunction::indicator(x, r));
        }
        stages.push(current.clone());
    }
    StagedEnumeration::new(stages)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rational::{int, ratio};
    use proptest::prelude::*;

    fn b(s: &str) -> BitString {
        s.parse().unwrap()
    }

    fn f(pieces: &[(&str, i64)]) -> BasicFunction {
        BasicFunction::new(pieces.iter().map(|(s, v)| (b(s), int(*v)))).unwrap()
    }

    #[test]
    fn eval_examples() {
        assert_eq!(f(&[("0", 2)]).eval(&b("0110")).unwrap(), int(2));
        assert_eq!(f(&[("0", 2)]).eval(&b("10")).unwrap(), int(0));
        assert_eq!(f(&[("00", 1), ("01", 3)]).eval(&b("01")).unwrap(), int(3));
        assert!(matches!(
            f(&[("00", 1), ("01", 3)]).eval(&b("0")),
            Err(LabError::UndeterminedPrefix { .. })
        ));
    }

    #[test]
    fn rejects_comparable_stems() {
        assert!(BasicFunction::new([(b("0"), int(1)), (b("01"), int(1))]).is_err());
    }

    #[test]
    fn integrate_examples() {
        assert_eq!(f(&[("0", 2)]).integrate(&Measure::Uniform).unwrap(), int(1));
        let g = BasicFunction::new((1..=3).map(|k| {
            let stem = BitString::repeat(false, k).concat(&BitString::repeat(true, k));
            (stem, pow2(2 * k as i64 - 1))
        }))
        .unwrap();
        assert_eq!(g.integrate(&Measure::Uniform).unwrap(), ratio(3, 2));
        assert_eq!(
            BasicFunction::zero().integrate(&Measure::Uniform).unwrap(),
            int(0)
        );
    }

    #[test]
    fn integrate_oracle_needs_enclosure() {
        let m = Measure::oracle("u", 30, |x, _| pow2(-(x.len() as i64)));
        assert!(matches!(
            f(&[("0", 2)]).integrate(&m),
            Err(LabError::PrecisionExhausted { .. })
        ));
        let e = f(&[("0", 2)]).integrate_enclosure(&m, 20).unwrap();
        assert!(e.contains(&int(1)));
    }

    #[test]
    fn max_and_sum_examples() {
        assert_eq!(
            f(&[("0", 1)]).pointwise_max(&f(&[("1", 2)])),
            f(&[("0", 1), ("1", 2)])
        );
        assert_eq!(
            f(&[("0", 1)]).pointwise_max(&f(&[("00", 5)])),
            f(&[("00", 5), ("01", 1)])
        );
        let g = f(&[("0", 1), ("11", 4)]);
        assert_eq!(g.pointwise_sum(&BasicFunction::zero()), g);
    }

    #[test]
    fn staging_examples() {
        let e = enumeration_to_stages(
            |s| {
                if s == 2 {
                    vec![(int(3), b("1"))]
                } else {
                    vec![]
                }
            },
            5,
        )
        .unwrap();
        assert_eq!(e.last(), f(&[("1", 3)]));
        let empty = enumeration_to_stages(|_| vec![], 4).unwrap();
        assert!(empty.stages().iter().all(BasicFunction::is_empty));
        let two = enumeration_to_stages(
            |s| match s {
                1 => vec![(int(2), b("0"))],
                3 => vec![(int(4), b("01"))],
                _ => vec![],
            },
            4,
        )
        .unwrap();
        assert_eq!(two.last(), f(&[("00", 2), ("01", 4)]));
    }

    #[test]
    fn non_monotone_stages_rejected() {
        let r = StagedEnumeration::new(vec![f(&[("0", 2)]), f(&[("00", 2), ("01", 1)])]);
        assert_eq!(
            r,
            Err(LabError::MalformedEnumeration {
                stage: 2,
                stem: "01".into()
            })
        );
    }

    fn arb_fn() -> impl Strategy<Value = BasicFunction> {
        proptest::collection::vec(
            (proptest::collection::vec(any::<bool>(), 0..6), 0i64..20),
            0..6,
        )
        .prop_map(|v| {
            let mut out = BasicFunction::zero();
            for (bits, val) in v {
                out = out.pointwise_max(&BasicFunction::indicator(
                    BitString::from_bits(bits),
                    int(val),
                ));
            }
            out
        })
    }

    proptest! {
        #[test]
        fn max_is_pointwise(f in arb_fn(), g in arb_fn(), probe in proptest::collection::vec(any::<bool>(), 6)) {
            let x = BitString::from_bits(probe);
            let m = f.pointwise_max(&g);
            prop_assert_eq!(m.eval(&x).unwrap(), f.eval(&x).unwrap().max(g.eval(&x).unwrap()));
            let s = f.pointwise_sum(&g);
            prop_assert_eq!(s.eval(&x).unwrap(), f.eval(&x).unwrap() + g.eval(&x).unwrap());
        }

        #[test]
        fn staged_maxima_never_decrease(pairs in proptest::collection::vec((0usize..6, proptest::collection::vec(any::<bool>(), 0..5), 0i64..9), 0..10)) {
            let e = enumeration_to_stages(|s| {
                pairs.iter().filter(|p| p.0 + 1 == s).map(|p| (int(p.2), BitString::from_bits(p.1.clone()))).collect()
            }, 6).unwrap();
            for w in e.stages().windows(2) {
                prop_assert!(w[1].first_drop_below(&w[0]).is_none());
            }
        }
    }
}
