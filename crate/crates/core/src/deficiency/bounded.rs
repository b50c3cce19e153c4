//! Probability-bounded and expectation-bounded functions.

use std::collections::BTreeMap;

use num_traits::{One, Zero};

use crate::bits::StemSet;
use crate::effective::{BasicFunction, StagedEnumeration};
use crate::error::{LabError, Result};
use crate::measure::Measure;
use crate::rational::{format_rational, int, pow2, Rational};

use super::mltest::MLTest;

/// Checks `μ{t > c} ≤ 1/c` for every rational `c`. For a step function the
/// supremum of `c μ{t > c}` is approached from below each value `v`, so it
/// suffices to check `v μ{t ≥ v} ≤ 1`; the first failing `v` is returned.
pub fn probability_bound_violation(t: &BasicFunction, mu: &Measure) -> Result<Option<Rational>> {
    let mut by_value: BTreeMap<Rational, Rational> = BTreeMap::new();
    for (x, v) in t.pieces() {
        if *v > Rational::zero() {
            *by_value.entry(v.clone()).or_insert_with(Rational::zero) += mu.exact_measure(x)?;
        }
    }
    let mut tail = Rational::zero();
    for (v, m) in by_value.iter().rev() {
        tail += m;
        if v * &tail > Rational::one() {
            return Ok(Some(v.clone()));
        }
    }
    Ok(None)
}

/// The level-set test `V_n = {t > 2^n}` of the last materialized stage.
pub fn pb_from_function(t: &StagedEnumeration, mu: &Measure) -> Result<MLTest> {
    let f = t.last();
    if let Some(c) = probability_bound_violation(&f, mu)? {
        return Err(LabError::NotProbabilityBounded {
            witness: format_rational(&c),
        });
    }
    let mut levels = Vec::new();
    for n in 1.. {
        let threshold = pow2(n);
        let set = StemSet::from_stems(
            f.pieces()
                .filter(|(_, v)| **v > threshold)
                .map(|(x, _)| x.clone()),
        );
        if set.is_empty() {
            break;
        }
        levels.push(set);
    }
    Ok(MLTest::from_sets(levels))
}

/// Weighted sum of clipped candidates, with the clipping stage of each.
#[derive(Clone, Debug)]
pub struct EbMix {
    pub enumeration: StagedEnumeration,
    /// `∫` of each output stage.
    pub integrals: Vec<Rational>,
    /// Stage (1-based) at which candidate `n` was clipped, if ever.
    pub clipped_at: Vec<Option<usize>>,
}

/// Candidate `n` (from 1) enters with weight `2^-n`. Its stages are
/// replayed; at the first stage whose integral passes 1 the increment is
/// scaled by `λ = (1 - I_prev)/(I_s - I_prev)` so the integral lands on 1,
/// and the candidate is frozen from then on.
pub fn eb_mix(candidates: &[StagedEnumeration], mu: &Measure) -> Result<EbMix> {
    let stages = candidates
        .iter()
        .map(StagedEnumeration::len)
        .max()
        .unwrap_or(0);
    let mut clipped_at = vec![None; candidates.len()];
    let mut current: Vec<BasicFunction> = vec![BasicFunction::zero(); candidates.len()];
    let mut currents_int: Vec<Rational> = vec![Rational::zero(); candidates.len()];
    let mut out = Vec::with_capacity(stages);
    let mut integrals = Vec::with_capacity(stages);
    for s in 0..stages {
        for (n, cand) in candidates.iter().enumerate() {
            if clipped_at[n].is_some() || s >= cand.len() {
                continue;
            }
            let next = &cand.stages()[s];
            let next_int = next.integrate(mu)?;
            if next_int <= Rational::one() {
                current[n] = next.clone();
                currents_int[n] = next_int;
                continue;
            }
            let prev = &current[n];
            let lambda = (Rational::one() - &currents_int[n]) / (&next_int - &currents_int[n]);
            let step = next.combine(prev, |a, b| (a - b) * &lambda);
            current[n] = prev.pointwise_sum(&step);
            currents_int[n] = Rational::one();
            clipped_at[n] = Some(s + 1);
        }
        let mut mix = BasicFunction::zero();
        let mut total = Rational::zero();
        for (n, f) in current.iter().enumerate() {
            let w = pow2(-(n as i64) - 1);
            mix = mix.pointwise_sum(&f.combine(&BasicFunction::zero(), |a, _| a * &w));
            total += &currents_int[n] * &w;
        }
        debug_assert_eq!(mix.integrate(mu).ok(), Some(total.clone()));
        out.push(mix);
        integrals.push(total);
    }
    let enumeration = StagedEnumeration::new(out)?;
    Ok(EbMix {
        enumeration,
        integrals,
        clipped_at,
    })
}

/// `∫ t dμ ≤ 1` for the last stage, as used by the expectation bound.
pub fn is_expectation_bounded(t: &StagedEnumeration, mu: &Measure) -> Result<bool> {
    Ok(t.last().integrate(mu)? <= int(1))
}
