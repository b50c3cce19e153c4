//! Probabilistic output machines given as finite branching programs.

use std::collections::BTreeMap;

use num_traits::{One, Signed, Zero};

use crate::bits::BitString;
use crate::error::{LabError, Result};
use crate::rational::{format_rational, Rational};

use super::semimeasure::ContinuousSemimeasure;

/// From this state the machine prints 0 with `p0` and moves to `next0`,
/// prints 1 with `p1` and moves to `next1`, and otherwise falls silent.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct State {
    pub p0: Rational,
    pub next0: usize,
    pub p1: Rational,
    pub next1: usize,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Program {
    pub start: usize,
    pub states: BTreeMap<usize, State>,
}

impl Program {
    pub fn validate(&self) -> Result<()> {
        if !self.states.contains_key(&self.start) {
            return Err(LabError::MalformedProgram {
                state: self.start,
                reason: "start state is not defined".into(),
            });
        }
        for (&id, s) in &self.states {
            if s.p0.is_negative() || s.p1.is_negative() {
                return Err(LabError::MalformedProgram {
                    state: id,
                    reason: "negative probability".into(),
                });
            }
            let total = &s.p0 + &s.p1;
            if total > Rational::one() {
                return Err(LabError::MalformedProgram {
                    state: id,
                    reason: format!("emission probabilities sum to {}", format_rational(&total)),
                });
            }
            for next in [s.next0, s.next1] {
                if !self.states.contains_key(&next) {
                    return Err(LabError::MalformedProgram {
                        state: id,
                        reason: format!("unknown successor {next}"),
                    });
                }
            }
        }
        Ok(())
    }

    /// A one-state program printing i.i.d. bits.
    pub fn iid(p0: Rational, p1: Rational) -> Self {
        Program {
            start: 0,
            states: BTreeMap::from([(
                0,
                State {
                    p0,
                    next0: 0,
                    p1,
                    next1: 0,
                },
            )]),
        }
    }
}

/// `weight(x)` = probability that the output begins with `x`, for all
/// `|x| ≤ depth` of positive weight.
pub fn machine_to_semimeasure(program: &Program, depth: usize) -> Result<ContinuousSemimeasure> {
    program.validate()?;
    let mut weight = BTreeMap::new();
    let start: BTreeMap<usize, Rational> = BTreeMap::from([(program.start, Rational::one())]);
    let mut stack = vec![(BitString::root(), start)];
    while let Some((x, dist)) = stack.pop() {
        let w: Rational = dist.values().sum();
        if w.is_zero() {
            continue;
        }
        if x.len() < depth {
            for bit in [true, false] {
                let mut next: BTreeMap<usize, Rational> = BTreeMap::new();
                for (id, p) in &dist {
                    let s = &program.states[id];
                    let (q, to) = if bit {
                        (&s.p1, s.next1)
                    } else {
                        (&s.p0, s.next0)
                    };
                    if !q.is_zero() {
                        *next.entry(to).or_insert_with(Rational::zero) += p * q;
                    }
                }
                stack.push((x.child(bit), next));
            }
        }
        weight.insert(x, w);
    }
    Ok(ContinuousSemimeasure { weight, depth })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::effective::validate_continuous;
    use crate::rational::{int, pow2, ratio};

    #[test]
    fn deterministic_zero_printer() {
        let a = machine_to_semimeasure(&Program::iid(int(1), int(0)), 8).unwrap();
        for k in 0..=8 {
            assert_eq!(a.get(&BitString::repeat(false, k)), int(1));
        }
        assert_eq!(a.weight.len(), 9);
    }

    #[test]
    fn fair_coin_is_uniform() {
        let a = machine_to_semimeasure(&Program::iid(ratio(1, 2), ratio(1, 2)), 6).unwrap();
        assert_eq!(a.get(&"0110".parse().unwrap()), pow2(-4));
        assert_eq!(validate_continuous(&a).unwrap(), int(0));
    }

    #[test]
    fn biased_coin_product() {
        let a = machine_to_semimeasure(&Program::iid(ratio(2, 3), ratio(1, 3)), 3).unwrap();
        assert_eq!(a.get(&"01".parse().unwrap()), ratio(2, 9));
    }

    #[test]
    fn halting_machine_is_strictly_sub() {
        // Prints one 1 and then stops.
        let p = Program {
            start: 0,
            states: BTreeMap::from([
                (
                    0,
                    State {
                        p0: int(0),
                        next0: 1,
                        p1: int(1),
                        next1: 1,
                    },
                ),
                (
                    1,
                    State {
                        p0: int(0),
                        next0: 1,
                        p1: int(0),
                        next1: 1,
                    },
                ),
            ]),
        };
        let a = machine_to_semimeasure(&p, 4).unwrap();
        assert_eq!(a.get(&"1".parse().unwrap()), int(1));
        assert_eq!(a.get(&"10".parse().unwrap()), int(0));
        assert_eq!(validate_continuous(&a).unwrap(), int(0));
    }

    #[test]
    fn malformed_programs() {
        let over = Program::iid(ratio(2, 3), ratio(2, 3));
        assert!(matches!(
            machine_to_semimeasure(&over, 2),
            Err(LabError::MalformedProgram { state: 0, .. })
        ));
        let dangling = Program {
            start: 0,
            states: BTreeMap::from([(
                0,
                State {
                    p0: int(1),
                    next0: 7,
                    p1: int(0),
                    next1: 0,
                },
            )]),
        };
        assert!(dangling.validate().is_err());
    }
}
