//! Discrete and continuous semimeasures materialized on finite trees.

use std::collections::{BTreeMap, BTreeSet};

use num_traits::{One, Signed, Zero};

use crate::bits::BitString;
use crate::enclosure::{certified_log2, DeficiencyValue};
use crate::error::{LabError, Result};
use crate::measure::Measure;
use crate::rational::{format_rational, Rational};

/// `-log2 w` as an enclosure, or `+∞` when `w = 0`.
pub fn complexity_of(w: &Rational, bits: u32) -> Result<DeficiencyValue> {
    if w.is_zero() {
        return Ok(DeficiencyValue::PosInfinity);
    }
    Ok(DeficiencyValue::Finite(
        certified_log2(w, bits)?.enclosure.neg(),
    ))
}

/// A mass assignment on strings with total at most 1.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct DiscreteSemimeasure {
    pub mass: BTreeMap<BitString, Rational>,
}

impl DiscreteSemimeasure {
    pub fn new(mass: impl IntoIterator<Item = (BitString, Rational)>) -> Self {
        DiscreteSemimeasure {
            mass: mass.into_iter().collect(),
        }
    }

    pub fn get(&self, x: &BitString) -> Rational {
        self.mass.get(x).cloned().unwrap_or_else(Rational::zero)
    }

    /// Surrogate prefix complexity `K(x) = -log2 m(x)`.
    pub fn complexity(&self, x: &BitString, bits: u32) -> Result<DeficiencyValue> {
        complexity_of(&self.get(x), bits)
    }
}

/// Total mass, rejecting negative entries and totals above 1.
pub fn validate_discrete(m: &DiscreteSemimeasure) -> Result<Rational> {
    let mut total = Rational::zero();
    for (x, q) in &m.mass {
        if q.is_negative() {
            return Err(LabError::InvalidSemimeasure {
                stem: x.to_string(),
                reason: "negative mass".into(),
            });
        }
        total += q;
    }
    if total > Rational::one() {
        return Err(LabError::InvalidSemimeasure {
            stem: "-".into(),
            reason: format!("total mass {} exceeds 1", format_rational(&total)),
        });
    }
    Ok(total)
}

/// Weights on a finite tree; absent nodes weigh 0. Claims hold up to
/// `depth`.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct ContinuousSemimeasure {
    pub weight: BTreeMap<BitString, Rational>,
    pub depth: usize,
}

impl ContinuousSemimeasure {
    pub fn zero(depth: usize) -> Self {
        ContinuousSemimeasure {
            weight: BTreeMap::new(),
            depth,
        }
    }

    pub fn new(weight: impl IntoIterator<Item = (BitString, Rational)>, depth: usize) -> Self {
        let mut weight: BTreeMap<_, _> = weight.into_iter().collect();
        weight.retain(|_, q: &mut Rational| !q.is_zero());
        ContinuousSemimeasure { weight, depth }
    }

    /// The measure itself viewed as a semimeasure, materialized to `depth`.
    pub fn from_measure(mu: &Measure, depth: usize) -> Result<Self> {
        let mut weight = BTreeMap::new();
        let mut stack = vec![mu.cursor()?];
        while let Some(c) = stack.pop() {
            let m = c.mass();
            if m.is_zero() {
                continue;
            }
            if c.stem().len() < depth {
                stack.push(c.child(true));
                stack.push(c.child(false));
            }
            weight.insert(c.stem().clone(), m);
        }
        Ok(ContinuousSemimeasure { weight, depth })
    }

    pub fn get(&self, x: &BitString) -> Rational {
        self.weight.get(x).cloned().unwrap_or_else(Rational::zero)
    }

    pub fn add(&mut self, x: &BitString, q: &Rational) {
        if q.is_zero() {
            return;
        }
        *self.weight.entry(x.clone()).or_insert_with(Rational::zero) += q;
    }

    /// Surrogate monotone complexity `KA(x) = -log2 a(x)`.
    pub fn complexity(&self, x: &BitString, bits: u32) -> Result<DeficiencyValue> {
        complexity_of(&self.get(x), bits)
    }

    /// Nodes whose split inequality has to be checked: every stored node
    /// and every ancestor of one, above the depth limit.
    fn internal_nodes(&self) -> BTreeSet<BitString> {
        let mut out = BTreeSet::new();
        for x in self.weight.keys() {
            let mut p = x.parent();
            while let Some(y) = p {
                if !out.insert(y.clone()) {
                    break;
                }
                p = y.parent();
            }
        }
        out.insert(BitString::root());
        out
    }

    /// `Σ_{|x| = n} weight(x)` for `n = 0..=depth`.
    pub fn level_sums(&self) -> Vec<Rational> {
        let mut sums = vec![Rational::zero(); self.depth + 1];
        for (x, q) in &self.weight {
            if x.len() <= self.depth {
                sums[x.len()] += q;
            }
        }
        sums
    }
}

/// Checks `a(root) ≤ 1` and `a(x) ≥ a(x0) + a(x1)`; returns the smallest
/// slack seen (the root's slack is `1 - a(root)`).
pub fn validate_continuous(a: &ContinuousSemimeasure) -> Result<Rational> {
    for (x, q) in &a.weight {
        if q.is_negative() {
            return Err(LabError::InvalidSemimeasure {
                stem: x.to_string(),
                reason: "negative weight".into(),
            });
        }
        if x.len() > a.depth {
            return Err(LabError::InvalidSemimeasure {
                stem: x.to_string(),
                reason: "deeper than the declared depth".into(),
            });
        }
    }
    let root = a.get(&BitString::root());
    let mut worst = Rational::one() - &root;
    if worst.is_negative() {
        return Err(LabError::InvalidSemimeasure {
            stem: "-".into(),
            reason: "root weight exceeds 1".into(),
        });
    }
    for x in a.internal_nodes() {
        if x.len() >= a.depth {
            continue;
        }
        let slack = a.get(&x) - a.get(&x.child(false)) - a.get(&x.child(true));
        if slack.is_negative() {
            return Err(LabError::InvalidSemimeasure {
                stem: x.to_string(),
                reason: format!("children exceed parent by {}", format_rational(&-slack)),
            });
        }
        if slack < worst {
            worst = slack;
        }
    }
    Ok(worst)
}

/// Semimeasures with user-supplied weights standing in for the mass of
/// their machine descriptions.
#[derive(Clone, Debug, Default)]
pub struct MachinePool {
    pub members: Vec<(ContinuousSemimeasure, Rational)>,
}

/// `weight(x) = Σ_j w_j a_j(x)`.
pub fn mix_pool(pool: &MachinePool) -> Result<ContinuousSemimeasure> {
    let mut total = Rational::zero();
    for (_, w) in &pool.members {
        if w.is_negative() {
            return Err(LabError::InvalidSemimeasure {
                stem: "-".into(),
                reason: "negative pool weight".into(),
            });
        }
        total += w;
    }
    if total > Rational::one() {
        return Err(LabError::InvalidSemimeasure {
            stem: "-".into(),
            reason: format!("pool weights sum to {}", format_rational(&total)),
        });
    }
    let depth = pool.members.iter().map(|(a, _)| a.depth).max().unwrap_or(0);
    let mut out = ContinuousSemimeasure::zero(depth);
    for (a, w) in &pool.members {
        for (x, q) in &a.weight {
            out.add(x, &(q * w));
        }
    }
    validate_continuous(&out)?;
    Ok(out)
}

/// Replays the mass increments of increasing discrete stages: an increment
/// `ε` at `x` adds `ε` on every prefix of `x` and `ε μ([y])/μ([x])` on each
/// extension `y` of `x` down to `depth`.
pub fn lift_discrete_to_continuous(
    stages: &[DiscreteSemimeasure],
    mu: &Measure,
    depth: usize,
) -> Result<ContinuousSemimeasure> {
    let mut a = ContinuousSemimeasure::zero(depth);
    let empty = DiscreteSemimeasure::default();
    for (i, stage) in stages.iter().enumerate() {
        let prev = if i == 0 { &empty } else { &stages[i - 1] };
        for x in prev.mass.keys() {
            if !stage.mass.contains_key(x) && prev.get(x).is_positive() {
                return Err(LabError::MalformedEnumeration {
                    stage: i + 1,
                    stem: x.to_string(),
                });
            }
        }
        for (x, q) in &stage.mass {
            let eps = q - prev.get(x);
            if eps.is_negative() {
                return Err(LabError::MalformedEnumeration {
                    stage: i + 1,
                    stem: x.to_string(),
                });
            }
            if eps.is_zero() {
                continue;
            }
            replay_increment(&mut a, x, &eps, mu)?;
        }
    }
    Ok(a)
}

fn replay_increment(
    a: &mut ContinuousSemimeasure,
    x: &BitString,
    eps: &Rational,
    mu: &Measure,
) -> Result<()> {
    for p in x.prefixes().take(a.depth.min(x.len()) + 1) {
        a.add(&p, eps);
    }
    if x.len() >= a.depth {
        return Ok(());
    }
    let mut c = mu.cursor()?;
    for &b in x.bits() {
        c.advance(b);
    }
    let base = c.mass();
    if base.is_zero() {
        return Err(LabError::ZeroMeasure {
            stem: x.to_string(),
        });
    }
    let scale = eps / &base;
    let mut stack = vec![c.child(false), c.child(true)];
    while let Some(c) = stack.pop() {
        let m = c.mass();
        if m.is_zero() {
            continue;
        }
        a.add(c.stem(), &(&scale * m));
        if c.stem().len() < a.depth {
            stack.push(c.child(false));
            stack.push(c.child(true));
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rational::{int, pow2, ratio};
    use proptest::prelude::*;

    fn b(s: &str) -> BitString {
        s.parse().unwrap()
    }

    fn all_strings(max_len: usize) -> Vec<BitString> {
        let mut out = vec![BitString::root()];
        let mut i = 0;
        while i < out.len() {
            if out[i].len() < max_len {
                let x = out[i].clone();
                out.push(x.child(false));
                out.push(x.child(true));
            }
            i += 1;
        }
        out
    }

    #[test]
    fn discrete_totals() {
        let m = DiscreteSemimeasure::new(all_strings(4).into_iter().filter(|x| !x.is_empty()).map(
            |x| {
                let q = pow2(-2 * x.len() as i64 - 1);
                (x, q)
            },
        ));
        assert_eq!(validate_discrete(&m).unwrap(), ratio(15, 32));
        assert_eq!(
            validate_discrete(&DiscreteSemimeasure::default()).unwrap(),
            int(0)
        );
        assert_eq!(
            validate_discrete(&DiscreteSemimeasure::new([(BitString::root(), int(1))])).unwrap(),
            int(1)
        );
        assert!(validate_discrete(&DiscreteSemimeasure::new([
            (b("0"), ratio(3, 4)),
            (b("1"), ratio(1, 2))
        ]))
        .is_err());
    }

    #[test]
    fn continuous_examples() {
        let u = ContinuousSemimeasure::from_measure(&Measure::Uniform, 5).unwrap();
        assert_eq!(validate_continuous(&u).unwrap(), int(0));
        let bad = ContinuousSemimeasure::new(
            [
                (BitString::root(), int(1)),
                (b("0"), ratio(3, 4)),
                (b("1"), ratio(3, 4)),
            ],
            2,
        );
        assert_eq!(
            validate_continuous(&bad).unwrap_err(),
            LabError::InvalidSemimeasure {
                stem: "-".into(),
                reason: "children exceed parent by 1/2".into()
            }
        );
        let chain =
            ContinuousSemimeasure::new((0..=6).map(|k| (BitString::repeat(false, k), int(1))), 6);
        assert!(validate_continuous(&chain).is_ok());
    }

    #[test]
    fn pool_examples() {
        let zeros =
            ContinuousSemimeasure::new((0..=4).map(|k| (BitString::repeat(false, k), int(1))), 4);
        let ones =
            ContinuousSemimeasure::new((0..=4).map(|k| (BitString::repeat(true, k), int(1))), 4);
        let single = mix_pool(&MachinePool {
            members: vec![(zeros.clone(), int(1))],
        })
        .unwrap();
        assert_eq!(single, zeros);
        let both = mix_pool(&MachinePool {
            members: vec![(zeros.clone(), ratio(1, 2)), (ones, ratio(1, 2))],
        })
        .unwrap();
        assert_eq!(both.get(&b("0")), ratio(1, 2));
        assert_eq!(both.get(&b("1")), ratio(1, 2));
        assert_eq!(mix_pool(&MachinePool::default()).unwrap().weight.len(), 0);
        assert!(mix_pool(&MachinePool {
            members: vec![(zeros.clone(), int(1)), (zeros, int(1))]
        })
        .is_err());
    }

    #[test]
    fn lift_examples() {
        let stage = DiscreteSemimeasure::new([(b("0"), ratio(1, 2))]);
        let a = lift_discrete_to_continuous(&[stage], &Measure::Uniform, 3).unwrap();
        assert_eq!(a.get(&b("0")), ratio(1, 2));
        assert_eq!(a.get(&b("00")), ratio(1, 4));
        assert_eq!(a.get(&b("01")), ratio(1, 4));
        assert_eq!(a.get(&BitString::root()), ratio(1, 2));
        assert!(validate_continuous(&a).is_ok());

        let none = lift_discrete_to_continuous(&[], &Measure::Uniform, 3).unwrap();
        assert!(none.weight.is_empty());

        let root = DiscreteSemimeasure::new([(BitString::root(), ratio(1, 4))]);
        let a = lift_discrete_to_continuous(&[root], &Measure::Uniform, 4).unwrap();
        for x in all_strings(4) {
            assert_eq!(a.get(&x), ratio(1, 4) * pow2(-(x.len() as i64)));
        }
    }

    #[test]
    fn lift_rejects_null_support() {
        let mu = Measure::point(BitString::root(), b("0")).unwrap();
        let stage = DiscreteSemimeasure::new([(b("1"), ratio(1, 2))]);
        assert_eq!(
            lift_discrete_to_continuous(&[stage], &mu, 3).unwrap_err(),
            LabError::ZeroMeasure { stem: "1".into() }
        );
    }

    #[test]
    fn complexity_of_zero_is_top() {
        assert!(complexity_of(&int(0), 64).unwrap().is_pos_infinity());
        let k = complexity_of(&ratio(1, 8), 64).unwrap();
        assert!(k.finite().unwrap().contains(&int(3)));
    }

    fn arb_stages() -> impl Strategy<Value = Vec<DiscreteSemimeasure>> {
        proptest::collection::vec(
            (proptest::collection::vec(any::<bool>(), 0..4), 1i64..4),
            0..6,
        )
        .prop_map(|incs| {
            // Each increment is c/64 so the running total stays below 1.
            let mut cur = DiscreteSemimeasure::default();
            let mut out = Vec::new();
            for (bits, c) in incs {
                let x = BitString::from_bits(bits);
                let q = cur.get(&x) + ratio(c, 64);
                cur.mass.insert(x, q);
                out.push(cur.clone());
            }
            out
        })
    }

    proptest! {
        #[test]
        fn lift_is_valid_and_dominates(stages in arb_stages(), p in 1i64..8) {
            let mu = Measure::bernoulli(ratio(p, 8)).unwrap();
            let depth = 5;
            let a = lift_discrete_to_continuous(&stages, &mu, depth).unwrap();
            validate_continuous(&a).unwrap();
            for s in a.level_sums() {
                prop_assert!(s <= int(1));
            }
            if let Some(last) = stages.last() {
                for (x, m) in &last.mass {
                    let mx = mu.exact_measure(x).unwrap();
                    for w in all_strings(depth).into_iter().filter(|w| x.is_proper_prefix_of(w)) {
                        let bound = m * mu.exact_measure(&w).unwrap() / &mx;
                        prop_assert!(a.get(&w) >= bound);
                    }
                }
            }
        }

        #[test]
        fn pool_dominates_members(stages in arb_stages(), w1 in 0i64..4, w2 in 0i64..4) {
            let a1 = lift_discrete_to_continuous(&stages, &Measure::Uniform, 4).unwrap();
            let a2 = ContinuousSemimeasure::from_measure(&Measure::bernoulli(ratio(1, 3)).unwrap(), 4).unwrap();
            let (w1, w2) = (ratio(w1, 8), ratio(w2, 8));
            let mix = mix_pool(&MachinePool { members: vec![(a1.clone(), w1.clone()), (a2.clone(), w2.clone())] }).unwrap();
            for x in all_strings(4) {
                prop_assert!(mix.get(&x) >= &w1 * a1.get(&x));
                prop_assert!(mix.get(&x) >= &w2 * a2.get(&x));
            }
        }
    }
}
