//! Martin-Löf tests materialized to finitely many levels.

use num_traits::Zero;

use crate::bits::{BitString, StemSet};
use crate::error::{LabError, Result};
use crate::measure::Measure;
use crate::rational::{format_rational, pow2, Rational};

/// Levels `V_1 ⊇ V_2 ⊇ ... ⊇ V_D`, each a finite union of intervals.
/// Levels past `D` are treated as empty, so deficiencies computed from a
/// materialized test are lower bounds.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct MLTest {
    levels: Vec<StemSet>,
}

impl MLTest {
    pub fn empty() -> Self {
        Self::default()
    }

    /// `levels[i]` lists the stems of `V_{i+1}`.
    pub fn new(levels: impl IntoIterator<Item = impl IntoIterator<Item = BitString>>) -> Self {
        MLTest {
            levels: levels.into_iter().map(StemSet::from_stems).collect(),
        }
    }

    pub fn from_sets(levels: Vec<StemSet>) -> Self {
        MLTest { levels }
    }

    /// Runs `generator(n, s)` for levels `1..=depth` and stages `1..=stages`.
    pub fn from_generator(
        generator: impl Fn(usize, usize) -> Vec<BitString>,
        depth: usize,
        stages: usize,
    ) -> Self {
        let levels = (1..=depth)
            .map(|n| StemSet::from_stems((1..=stages).flat_map(|s| generator(n, s))))
            .collect();
        MLTest { levels }
    }

    pub fn depth(&self) -> usize {
        self.levels.len()
    }

    /// `V_n` for `n ≥ 1`; empty past the materialized depth.
    pub fn level(&self, n: usize) -> Option<&StemSet> {
        if n == 0 {
            None
        } else {
            self.levels.get(n - 1)
        }
    }

    pub fn levels(&self) -> &[StemSet] {
        &self.levels
    }
}

/// `μ` of a canonical finite union of intervals.
pub fn measure_of_union(mu: &Measure, set: &StemSet) -> Result<Rational> {
    let mut total = Rational::zero();
    for x in set.iter() {
        total += mu.exact_measure(x)?;
    }
    Ok(total)
}

/// Exact `μ(V_n)` per level after checking nesting and `μ(V_n) ≤ 2^-n`.
pub fn mltest_validate(test: &MLTest, mu: &Measure) -> Result<Vec<Rational>> {
    let mut out = Vec::with_capacity(test.depth());
    for (i, level) in test.levels.iter().enumerate() {
        let n = i + 1;
        if i > 0 && !level.is_subset_of(&test.levels[i - 1]) {
            let stray = level
                .iter()
                .find(|x| !test.levels[i - 1].covers(x))
                .expect("some stem escapes");
            return Err(LabError::InvalidTest {
                level: n,
                reason: format!("stem {stray} is not inside level {}", n - 1),
            });
        }
        let m = measure_of_union(mu, level)?;
        if m > pow2(-(n as i64)) {
            return Err(LabError::InvalidTest {
                level: n,
                reason: format!("measure {} exceeds 2^-{n}", format_rational(&m)),
            });
        }
        out.push(m);
    }
    Ok(out)
}

/// Largest `k` with `[x] ⊆ V_k`, or 0.
pub fn deficiency_from_test(test: &MLTest, x: &BitString) -> usize {
    (1..=test.depth())
        .rev()
        .find(|&k| test.levels[k - 1].covers(x))
        .unwrap_or(0)
}

/// `U_n = ∪_j V^j_{n+j}` with members numbered from 1.
pub fn universal_mix(tests: &[MLTest], mu: &Measure) -> Result<MLTest> {
    for t in tests {
        mltest_validate(t, mu)?;
    }
    let depth = tests
        .iter()
        .enumerate()
        .map(|(i, t)| t.depth().saturating_sub(i + 1))
        .max()
        .unwrap_or(0);
    let mut levels = vec![StemSet::new(); depth];
    for (n, level) in levels.iter_mut().enumerate() {
        for (i, t) in tests.iter().enumerate() {
            if let Some(v) = t.level(n + 1 + i + 1) {
                level.union_with(v);
            }
        }
    }
    let u = MLTest { levels };
    mltest_validate(&u, mu)?;
    Ok(u)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn zeros(n: usize) -> BitString {
        BitString::repeat(false, n)
    }

    fn b(s: &str) -> BitString {
        s.parse().unwrap()
    }

    fn zero_test(depth: usize) -> MLTest {
        MLTest::new((1..=depth).map(|n| vec![zeros(n)]))
    }

    #[test]
    fn validate_examples() {
        let m = mltest_validate(&zero_test(6), &Measure::Uniform).unwrap();
        assert_eq!(m, (1..=6).map(|n| pow2(-n)).collect::<Vec<_>>());

        let bad = MLTest::new((1..=4).map(|n| vec![zeros(n - 1)]));
        assert!(matches!(
            mltest_validate(&bad, &Measure::Uniform),
            Err(LabError::InvalidTest { level: 1, .. })
        ));

        let two =
            MLTest::new((1..=5).map(|n| vec![zeros(2 * n), b("1").concat(&zeros(2 * n - 1))]));
        let m = mltest_validate(&two, &Measure::Uniform).unwrap();
        for (i, q) in m.iter().enumerate() {
            let n = i as i64 + 1;
            assert_eq!(q, &pow2(-2 * n + 1));
        }
    }

    #[test]
    fn nesting_violation_reported() {
        let t = MLTest::new(vec![vec![b("00")], vec![b("10")]]);
        assert!(matches!(
            mltest_validate(&t, &Measure::Uniform),
            Err(LabError::InvalidTest { level: 2, .. })
        ));
    }

    #[test]
    fn deficiency_examples() {
        let t = zero_test(8);
        assert_eq!(deficiency_from_test(&t, &zeros(4)), 4);
        assert_eq!(deficiency_from_test(&t, &b("1")), 0);
        let even = MLTest::new((1..=5).map(|n| vec![zeros(2 * n)]));
        assert_eq!(deficiency_from_test(&even, &zeros(6)), 3);
    }

    #[test]
    fn mix_examples() {
        let v = zero_test(8);
        let u = universal_mix(std::slice::from_ref(&v), &Measure::Uniform).unwrap();
        assert_eq!(u.depth(), 7);
        for n in 1..=7 {
            assert_eq!(u.level(n), v.level(n + 1));
            assert_eq!(
                deficiency_from_test(&u, &zeros(n + 1)),
                deficiency_from_test(&v, &zeros(n + 1)) - 1
            );
        }

        let u = universal_mix(&[v.clone(), v.clone()], &Measure::Uniform).unwrap();
        let m = mltest_validate(&u, &Measure::Uniform).unwrap();
        for n in 1..=6 {
            assert_eq!(
                u.level(n).unwrap().iter().cloned().collect::<Vec<_>>(),
                vec![zeros(n + 1)]
            );
            assert_eq!(m[n - 1], pow2(-(n as i64) - 1));
        }

        let e = universal_mix(&[], &Measure::Uniform).unwrap();
        assert_eq!(e.depth(), 0);
        assert_eq!(deficiency_from_test(&e, &zeros(5)), 0);
    }

    #[test]
    fn mix_propagates_invalid_member() {
        let bad = MLTest::new(vec![vec![BitString::root()]]);
        assert!(universal_mix(&[zero_test(3), bad], &Measure::Uniform).is_err());
    }

    /// Random valid tests: `V_n` is the union over `m ≥ n` of stems
    /// `0^{m+1} t` for a few random tails `t`.
    fn arb_test() -> impl Strategy<Value = MLTest> {
        (
            1usize..6,
            proptest::collection::vec(proptest::collection::vec(any::<bool>(), 0..3), 1..3),
        )
            .prop_map(|(depth, tails)| {
                MLTest::new((1..=depth).map(|n| {
                    (n..=depth)
                        .flat_map(|m| {
                            tails
                                .iter()
                                .map(move |t| zeros(m + 1).concat(&BitString::from_bits(t.clone())))
                        })
                        .collect::<Vec<_>>()
                }))
            })
    }

    proptest! {
        #[test]
        fn mix_dominates_members(tests in proptest::collection::vec(arb_test(), 0..4), probe in proptest::collection::vec(any::<bool>(), 0..9)) {
            for t in &tests {
                mltest_validate(t, &Measure::Uniform).unwrap();
            }
            let u = universal_mix(&tests, &Measure::Uniform).unwrap();
            let x = BitString::from_bits(probe);
            let du = deficiency_from_test(&u, &x) as i64;
            for (j, t) in tests.iter().enumerate() {
                prop_assert!(du >= deficiency_from_test(t, &x) as i64 - (j as i64 + 1));
            }
        }
    }
}
