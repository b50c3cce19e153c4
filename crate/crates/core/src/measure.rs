//! Computable probability measures on Cantor space.
//!
//! Exact kinds (uniform, Bernoulli, branching, point masses and finite
//! mixtures of these) return exact rationals. The oracle kind wraps an
//! ε-approximation function and decides strict comparisons by refining
//! `ε_i = 2^-i` up to a stage budget, failing with
//! [`LabError::PrecisionExhausted`] rather than guessing.

use std::collections::BTreeMap;
use std::fmt;
use std::sync::Arc;

use num_traits::{One, Signed, Zero};
use serde::{Deserialize, Serialize};

use crate::bits::BitString;
use crate::error::{LabError, Result};
use crate::rational::{format_rational, int, parse_rational, pow2, Rational};

pub type ApproxFn = dyn Fn(&BitString, &Rational) -> Rational + Send + Sync;
pub type WeightFn = dyn Fn(&BitString) -> Rational + Send + Sync;

/// Conditional probability of one designated bit after each prefix.
/// Lookup order: explicit stem, then depth, then formula, then default.
#[derive(Clone)]
pub struct BranchingRule {
    pub bit: bool,
    pub default: Rational,
    pub by_depth: BTreeMap<usize, Rational>,
    pub by_stem: BTreeMap<BitString, Rational>,
    pub formula: Option<Arc<WeightFn>>,
}

impl BranchingRule {
    /// Every node sends probability `weight` to child `bit`.
    pub fn constant(bit: bool, weight: Rational) -> Self {
        BranchingRule {
            bit,
            default: weight,
            by_depth: BTreeMap::new(),
            by_stem: BTreeMap::new(),
            formula: None,
        }
    }

    pub fn from_formula(
        bit: bool,
        f: impl Fn(&BitString) -> Rational + Send + Sync + 'static,
    ) -> Self {
        BranchingRule {
            bit,
            default: Rational::new(1.into(), 2.into()),
            by_depth: BTreeMap::new(),
            by_stem: BTreeMap::new(),
            formula: Some(Arc::new(f)),
        }
    }

    pub fn weight_at(&self, x: &BitString) -> Rational {
        if let Some(w) = self.by_stem.get(x) {
            return w.clone();
        }
        if let Some(w) = self.by_depth.get(&x.len()) {
            return w.clone();
        }
        if let Some(f) = &self.formula {
            return f(x);
        }
        self.default.clone()
    }

    pub fn child_probability(&self, x: &BitString, b: bool) -> Rational {
        let w = self.weight_at(x);
        if b == self.bit {
            w
        } else {
            Rational::one() - w
        }
    }
}

/// An eventually periodic infinite sequence `prefix cycle cycle ...`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Sequence {
    pub prefix: BitString,
    pub cycle: BitString,
}

impl Sequence {
    pub fn new(prefix: BitString, cycle: BitString) -> Result<Self> {
        if cycle.is_empty() {
            return Err(LabError::MalformedMeasure(
                "point mass needs a non-empty cycle".into(),
            ));
        }
        Ok(Sequence { prefix, cycle })
    }

    pub fn bit(&self, i: usize) -> bool {
        if i < self.prefix.len() {
            self.prefix.bit(i)
        } else {
            self.cycle.bit((i - self.prefix.len()) % self.cycle.len())
        }
    }

    pub fn begins_with(&self, x: &BitString) -> bool {
        x.bits().iter().enumerate().all(|(i, b)| self.bit(i) == *b)
    }
}

/// Approximation-oracle measure: `approx(x, ε)` must lie within `ε` of
/// `μ([x])`.
#[derive(Clone)]
pub struct OracleMeasure {
    pub label: String,
    pub approx: Arc<ApproxFn>,
    /// Largest `i` for which `ε = 2^-i` will be requested.
    pub budget: u32,
}

#[derive(Clone)]
pub enum Measure {
    Uniform,
    /// `p` is the probability of a 1 at every position.
    Bernoulli {
        p: Rational,
    },
    Branching(BranchingRule),
    Point(Sequence),
    /// Convex combination; weights are non-negative and sum to 1.
    Mixture(Vec<(Rational, Measure)>),
    Oracle(OracleMeasure),
}

impl fmt::Debug for Measure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Measure::Uniform => write!(f, "Uniform"),
            Measure::Bernoulli { p } => write!(f, "Bernoulli({p})"),
            Measure::Branching(r) => {
                write!(f, "Branching(bit={}, default={})", r.bit as u8, r.default)
            }
            Measure::Point(s) => write!(f, "Point({}({})*)", s.prefix, s.cycle),
            Measure::Mixture(parts) => f.debug_list().entries(parts.iter()).finish(),
            Measure::Oracle(o) => write!(f, "Oracle({}, budget={})", o.label, o.budget),
        }
    }
}

impl Measure {
    pub fn bernoulli(p: Rational) -> Result<Self> {
        check_probability(&p, "bernoulli p")?;
        Ok(Measure::Bernoulli { p })
    }

    pub fn branching(rule: BranchingRule) -> Result<Self> {
        check_probability(&rule.default, "branching default")?;
        for w in rule.by_depth.values().chain(rule.by_stem.values()) {
            check_probability(w, "branching weight")?;
        }
        Ok(Measure::Branching(rule))
    }

    pub fn point(prefix: BitString, cycle: BitString) -> Result<Self> {
        Ok(Measure::Point(Sequence::new(prefix, cycle)?))
    }

    pub fn mixture(parts: Vec<(Rational, Measure)>) -> Result<Self> {
        let mut total = Rational::zero();
        for (w, _) in &parts {
            if w.is_negative() {
                return Err(LabError::MalformedMeasure("negative mixture weight".into()));
            }
            total += w;
        }
        if !total.is_one() {
            return Err(LabError::MalformedMeasure(format!(
                "mixture weights sum to {} instead of 1",
                format_rational(&total)
            )));
        }
        Ok(Measure::Mixture(parts))
    }

    pub fn oracle(
        label: impl Into<String>,
        budget: u32,
        approx: impl Fn(&BitString, &Rational) -> Rational + Send + Sync + 'static,
    ) -> Self {
        Measure::Oracle(OracleMeasure {
            label: label.into(),
            approx: Arc::new(approx),
            budget,
        })
    }

    pub fn is_exact(&self) -> bool {
        match self {
            Measure::Oracle(_) => false,
            Measure::Mixture(parts) => parts.iter().all(|(_, m)| m.is_exact()),
            _ => true,
        }
    }

    /// Leaf components with their overall weights.
    fn leaves(&self) -> Vec<(Rational, &Measure)> {
        match self {
            Measure::Mixture(parts) => parts
                .iter()
                .flat_map(|(w, m)| m.leaves().into_iter().map(move |(v, l)| (w * v, l)))
                .collect(),
            other => vec![(Rational::one(), other)],
        }
    }

    /// `μ([xb])` from `μ([x])` for a non-mixture exact kind.
    fn leaf_child_mass(&self, x: &BitString, mass: &Rational, b: bool) -> Rational {
        if mass.is_zero() {
            return Rational::zero();
        }
        match self {
            Measure::Uniform => mass / int(2),
            Measure::Bernoulli { p } => {
                if b {
                    mass * p
                } else {
                    mass * (Rational::one() - p)
                }
            }
            Measure::Branching(rule) => mass * rule.child_probability(x, b),
            Measure::Point(seq) => {
                if seq.bit(x.len()) == b {
                    mass.clone()
                } else {
                    Rational::zero()
                }
            }
            Measure::Mixture(_) | Measure::Oracle(_) => unreachable!("not a leaf exact kind"),
        }
    }

    /// Incremental evaluator positioned at the root; exact kinds only.
    pub fn cursor(&self) -> Result<Cursor<'_>> {
        if !self.is_exact() {
            return Err(LabError::Domain("cursor requires an exact measure".into()));
        }
        let leaves = self.leaves();
        let masses = vec![Rational::one(); leaves.len()];
        Ok(Cursor {
            leaves,
            masses,
            stem: BitString::root(),
        })
    }

    /// Exact `μ([x])`; fails for oracle kinds.
    pub fn exact_measure(&self, x: &BitString) -> Result<Rational> {
        let mut c = self.cursor()?;
        for &b in x.bits() {
            c.advance(b);
            if c.is_null() {
                return Ok(Rational::zero());
            }
        }
        Ok(c.mass())
    }

    /// An ε-approximation of `μ([x])` in `[0, 1]`; exact kinds ignore ε.
    pub fn measure_of(&self, x: &BitString, eps: &Rational) -> Result<Rational> {
        if !eps.is_positive() {
            return Err(LabError::Domain(
                "approximation tolerance must be positive".into(),
            ));
        }
        match self {
            Measure::Oracle(o) => {
                let q = (o.approx)(x, eps);
                Ok(q.max(Rational::zero()).min(Rational::one()))
            }
            _ if self.is_exact() => self.exact_measure(x),
            _ => Err(LabError::Domain(
                "mixtures with oracle parts are not supported".into(),
            )),
        }
    }

    /// `(μ[x0], μ[x1])`, each within ε, checking additivity within 3ε.
    pub fn children_split(&self, x: &BitString, eps: &Rational) -> Result<(Rational, Rational)> {
        if self.is_exact() {
            let mut c = self.cursor()?;
            for &b in x.bits() {
                c.advance(b);
            }
            let (l, r) = (c.child(false).mass(), c.child(true).mass());
            if l.clone() + &r != c.mass() {
                return Err(LabError::MalformedMeasure(format!(
                    "additivity fails at {x}"
                )));
            }
            return Ok((l, r));
        }
        let parent = self.measure_of(x, eps)?;
        let l = self.measure_of(&x.child(false), eps)?;
        let r = self.measure_of(&x.child(true), eps)?;
        let gap = (l.clone() + &r - parent).abs();
        if gap > eps * int(3) {
            return Err(LabError::MalformedMeasure(format!(
                "additivity violated at {x} by {}",
                format_rational(&gap)
            )));
        }
        Ok((l, r))
    }

    /// Decides `Σ cᵢ μ([xᵢ]) > 0`. Exact zero is `false` for exact kinds and
    /// undecidable (precision exhausted) for oracle kinds.
    pub fn decide_positive(&self, terms: &[(Rational, BitString)], what: &str) -> Result<bool> {
        if self.is_exact() {
            let mut s = Rational::zero();
            for (c, x) in terms {
                s += c * self.exact_measure(x)?;
            }
            return Ok(s.is_positive());
        }
        let Measure::Oracle(o) = self else {
            return Err(LabError::Domain(
                "mixtures with oracle parts are not supported".into(),
            ));
        };
        let weight: Rational = terms.iter().map(|(c, _)| c.abs()).sum();
        for i in 1..=o.budget {
            let eps = pow2(-(i as i64));
            let mut s = Rational::zero();
            for (c, x) in terms {
                s += c * self.measure_of(x, &eps)?;
            }
            let bound = &weight * &eps;
            if s > bound {
                return Ok(true);
            }
            if s < -bound {
                return Ok(false);
            }
        }
        Err(LabError::PrecisionExhausted {
            what: what.to_string(),
            stages: o.budget,
        })
    }

    /// Walks the heavy branch: from `x` print `b` when `μ[xb] > μ[x]/3`,
    /// preferring 0 when both children qualify.
    pub fn heavy_walk(&self) -> HeavyWalker<'_> {
        HeavyWalker {
            measure: self,
            cursor: self.cursor().ok(),
            stem: BitString::root(),
            mass: Rational::one(),
        }
    }

    pub fn to_spec(&self) -> Result<MeasureSpec> {
        Ok(match self {
            Measure::Uniform => MeasureSpec::Uniform,
            Measure::Bernoulli { p } => MeasureSpec::Bernoulli {
                p: format_rational(p),
            },
            Measure::Branching(rule) => {
                if rule.formula.is_some() {
                    return Err(LabError::Invalid(
                        "formula-driven branching measures have no file form".into(),
                    ));
                }
                let mut weights = Vec::new();
                for (d, w) in &rule.by_depth {
                    weights.push(["depth".to_string(), d.to_string(), format_rational(w)]);
                }
                for (s, w) in &rule.by_stem {
                    weights.push(["string".to_string(), s.to_string(), format_rational(w)]);
                }
                MeasureSpec::Branching {
                    bit: Some(if rule.bit { "1" } else { "0" }.to_string()),
                    default: Some(format_rational(&rule.default)),
                    weights,
                }
            }
            Measure::Point(seq) => MeasureSpec::Point {
                prefix: seq.prefix.to_string(),
                cycle: seq.cycle.to_string(),
            },
            Measure::Mixture(parts) => MeasureSpec::Mixture {
                parts: parts
                    .iter()
                    .map(|(_, m)| m.to_spec())
                    .collect::<Result<_>>()?,
                weights: parts.iter().map(|(w, _)| format_rational(w)).collect(),
            },
            Measure::Oracle(o) => {
                return Err(LabError::Invalid(format!(
                    "oracle measure {} has no file form",
                    o.label
                )))
            }
        })
    }

    pub fn from_spec(spec: &MeasureSpec) -> Result<Self> {
        match spec {
            MeasureSpec::Uniform => Ok(Measure::Uniform),
            MeasureSpec::Bernoulli { p } => Measure::bernoulli(parse_rational(p)?),
            MeasureSpec::Branching {
                bit,
                default,
                weights,
            } => {
                let bit = match bit.as_deref() {
                    None | Some("0") => false,
                    Some("1") => true,
                    Some(other) => {
                        return Err(LabError::MalformedMeasure(format!(
                            "branching bit must be 0 or 1, got {other:?}"
                        )))
                    }
                };
                let default = match default {
                    Some(d) => parse_rational(d)?,
                    None => Rational::new(1.into(), 2.into()),
                };
                let mut rule = BranchingRule::constant(bit, default);
                for [selector, key, value] in weights {
                    let w = parse_rational(value)?;
                    match selector.as_str() {
                        "depth" => {
                            let d: usize = key.parse().map_err(|_| {
                                LabError::MalformedMeasure(format!("bad depth {key:?}"))
                            })?;
                            rule.by_depth.insert(d, w);
                        }
                        "string" => {
                            rule.by_stem.insert(key.parse()?, w);
                        }
                        other => {
                            return Err(LabError::MalformedMeasure(format!(
                                "unknown weight selector {other:?}"
                            )))
                        }
                    }
                }
                Measure::branching(rule)
            }
            MeasureSpec::Point { prefix, cycle } => Measure::point(prefix.parse()?, cycle.parse()?),
            MeasureSpec::Mixture { parts, weights } => {
                if parts.len() != weights.len() {
                    return Err(LabError::MalformedMeasure(
                        "mixture parts and weights differ in length".into(),
                    ));
                }
                let parts = parts
                    .iter()
                    .zip(weights)
                    .map(|(p, w)| Ok((parse_rational(w)?, Measure::from_spec(p)?)))
                    .collect::<Result<Vec<_>>>()?;
                Measure::mixture(parts)
            }
        }
    }

    /// Parses the JSON measure file format.
    pub fn from_json(text: &str) -> Result<Self> {
        let spec: MeasureSpec = serde_json::from_str(text)
            .map_err(|e| LabError::parse(e.line(), e.column(), e.to_string()))?;
        Measure::from_spec(&spec)
    }

    pub fn to_json(&self) -> Result<String> {
        serde_json::to_string(&self.to_spec()?).map_err(|e| LabError::Invalid(e.to_string()))
    }
}

fn check_probability(p: &Rational, what: &str) -> Result<()> {
    if p.is_negative() || p > &Rational::one() {
        return Err(LabError::MalformedMeasure(format!(
            "{what} = {} is outside [0, 1]",
            format_rational(p)
        )));
    }
    Ok(())
}

/// File form of a measure. Rationals are `"p/q"` strings.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum MeasureSpec {
    Uniform,
    Bernoulli {
        p: String,
    },
    Branching {
        #[serde(default, skip_serializing_if = "Option::is_none")]
        bit: Option<String>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        default: Option<String>,
        #[serde(default)]
        weights: Vec<[String; 3]>,
    },
    Point {
        #[serde(default)]
        prefix: String,
        cycle: String,
    },
    Mixture {
        parts: Vec<MeasureSpec>,
        weights: Vec<String>,
    },
}

/// Exact incremental evaluation of `μ([x])` along a path.
#[derive(Clone)]
pub struct Cursor<'a> {
    leaves: Vec<(Rational, &'a Measure)>,
    masses: Vec<Rational>,
    stem: BitString,
}

impl<'a> Cursor<'a> {
    pub fn stem(&self) -> &BitString {
        &self.stem
    }

    pub fn mass(&self) -> Rational {
        self.leaves
            .iter()
            .zip(&self.masses)
            .map(|((w, _), m)| w * m)
            .sum()
    }

    pub fn is_null(&self) -> bool {
        self.masses.iter().all(Zero::is_zero)
    }

    pub fn advance(&mut self, b: bool) {
        for ((_, leaf), m) in self.leaves.iter().zip(self.masses.iter_mut()) {
            *m = leaf.leaf_child_mass(&self.stem, m, b);
        }
        self.stem.push(b);
    }

    pub fn child(&self, b: bool) -> Cursor<'a> {
        let mut c = self.clone();
        c.advance(b);
        c
    }
}

/// One step of the heavy-branch walk: the printed bit, whether both bits
/// qualified, `μ(B_k)` and `μ(C_k)` for the sibling interval.
#[derive(Clone, Debug, PartialEq)]
pub struct HeavyStep {
    pub bit: bool,
    pub tie: bool,
    pub mass_b: Rational,
    pub mass_c: Rational,
}

pub struct HeavyWalker<'a> {
    measure: &'a Measure,
    cursor: Option<Cursor<'a>>,
    stem: BitString,
    mass: Rational,
}

impl<'a> HeavyWalker<'a> {
    /// Starts the walk inside `[x]` rather than at the root.
    pub fn from_stem(measure: &'a Measure, x: &BitString) -> Result<Self> {
        let mut cursor = measure.cursor().ok();
        let mass = match &mut cursor {
            Some(c) => {
                for &b in x.bits() {
                    c.advance(b);
                }
                c.mass()
            }
            None => {
                let o = match measure {
                    Measure::Oracle(o) => o,
                    _ => unreachable!(),
                };
                measure.measure_of(x, &pow2(-(o.budget as i64)))?
            }
        };
        Ok(HeavyWalker {
            measure,
            cursor,
            stem: x.clone(),
            mass,
        })
    }

    pub fn stem(&self) -> &BitString {
        &self.stem
    }

    pub fn mass(&self) -> &Rational {
        &self.mass
    }

    pub fn step(&mut self) -> Result<HeavyStep> {
        match &mut self.cursor {
            Some(c) => {
                let c0 = c.child(false);
                let c1 = c.child(true);
                let (m0, m1) = (c0.mass(), c1.mass());
                let q0 = &m0 * int(3) > self.mass;
                let q1 = &m1 * int(3) > self.mass;
                let (bit, next, mass_b, mass_c) = match (q0, q1) {
                    (true, _) => (false, c0, m0, m1),
                    (false, true) => (true, c1, m1, m0),
                    (false, false) => {
                        return Err(LabError::ZeroMeasure {
                            stem: self.stem.to_string(),
                        })
                    }
                };
                *c = next;
                self.stem.push(bit);
                self.mass = mass_b.clone();
                Ok(HeavyStep {
                    bit,
                    tie: q0 && q1,
                    mass_b,
                    mass_c,
                })
            }
            None => {
                let m = self.measure;
                let x = self.stem.clone();
                let third = Rational::new((-1).into(), 1.into());
                let q0 = m.decide_positive(
                    &[(int(3), x.child(false)), (third.clone(), x.clone())],
                    &format!("mu[{}] > mu[{x}]/3", x.child(false)),
                )?;
                let q1 = if q0 {
                    // Only needed for the tie flag; an undecidable second
                    // comparison does not block the choice of 0.
                    m.decide_positive(&[(int(3), x.child(true)), (third, x.clone())], "tie")
                        .unwrap_or(false)
                } else {
                    m.decide_positive(
                        &[(int(3), x.child(true)), (third, x.clone())],
                        &format!("mu[{}] > mu[{x}]/3", x.child(true)),
                    )?
                };
                let bit = if q0 {
                    false
                } else if q1 {
                    true
                } else {
                    return Err(LabError::ZeroMeasure {
                        stem: x.to_string(),
                    });
                };
                let Measure::Oracle(o) = m else {
                    unreachable!()
                };
                let eps = pow2(-(o.budget as i64));
                let mass_b = m.measure_of(&x.child(bit), &eps)?;
                let mass_c = m.measure_of(&x.child(!bit), &eps)?;
                self.stem.push(bit);
                self.mass = mass_b.clone();
                Ok(HeavyStep {
                    bit,
                    tie: q0 && q1,
                    mass_b,
                    mass_c,
                })
            }
        }
    }
}

/// Result of following the heavy branch to probe for atoms.
#[derive(Clone, Debug)]
pub struct AtomAudit {
    pub path: BitString,
    /// `μ(B_k)` for `k = 0..=depth`.
    pub masses: Vec<Rational>,
    pub suspected_atom: bool,
}

impl AtomAudit {
    pub fn final_mass(&self) -> &Rational {
        self.masses.last().expect("masses include the root")
    }
}

/// Follows the heavy branch to `depth` and flags a suspected atom when
/// `μ(B_depth)` stays above `threshold` and has not even halved since the
/// midpoint of the walk.
pub fn nonatomic_audit(measure: &Measure, depth: usize, threshold: &Rational) -> Result<AtomAudit> {
    if depth == 0 {
        return Err(LabError::Domain("atom audit needs depth >= 1".into()));
    }
    let mut walk = measure.heavy_walk();
    let mut masses = vec![walk.mass().clone()];
    for _ in 0..depth {
        let step = walk.step()?;
        masses.push(step.mass_b);
    }
    let last = masses[depth].clone();
    let mid = &masses[depth.div_ceil(2)];
    let suspected_atom = &last > threshold && last.clone() * int(2) > *mid;
    Ok(AtomAudit {
        path: walk.stem().clone(),
        masses,
        suspected_atom,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rational::ratio;

    fn b(s: &str) -> BitString {
        s.parse().unwrap()
    }

    fn eps() -> Rational {
        pow2(-20)
    }

    fn point_half_uniform() -> Measure {
        Measure::mixture(vec![
            (
                ratio(1, 2),
                Measure::point(BitString::root(), b("0")).unwrap(),
            ),
            (ratio(1, 2), Measure::Uniform),
        ])
        .unwrap()
    }

    #[test]
    fn uniform_interval() {
        assert_eq!(
            Measure::Uniform.measure_of(&b("0110"), &eps()).unwrap(),
            ratio(1, 16)
        );
        assert_eq!(
            Measure::Uniform
                .measure_of(&BitString::root(), &eps())
                .unwrap(),
            int(1)
        );
    }

    #[test]
    fn bernoulli_product() {
        let m = Measure::bernoulli(ratio(1, 3)).unwrap();
        assert_eq!(m.measure_of(&b("01"), &eps()).unwrap(), ratio(2, 9));
    }

    #[test]
    fn branching_by_depth_formula() {
        // weight of bit 0 at depth d is 1/2 + 2^(-d-2)
        let rule =
            BranchingRule::from_formula(false, |x| ratio(1, 2) + pow2(-(x.len() as i64) - 2));
        let m = Measure::branching(rule).unwrap();
        assert_eq!(m.measure_of(&b("00"), &eps()).unwrap(), ratio(15, 32));
    }

    #[test]
    fn children_split_examples() {
        assert_eq!(
            Measure::Uniform
                .children_split(&BitString::root(), &eps())
                .unwrap(),
            (ratio(1, 2), ratio(1, 2))
        );
        let m = Measure::bernoulli(ratio(1, 3)).unwrap();
        assert_eq!(
            m.children_split(&b("1"), &eps()).unwrap(),
            (ratio(2, 9), ratio(1, 9))
        );
        let mix = point_half_uniform();
        assert_eq!(mix.measure_of(&b("0"), &eps()).unwrap(), ratio(3, 4));
        assert_eq!(
            mix.children_split(&b("0"), &eps()).unwrap(),
            (ratio(5, 8), ratio(1, 8))
        );
    }

    #[test]
    fn oracle_split_detects_malformed() {
        // Claims μ[x] = 1/2 everywhere: additivity breaks at the root.
        let bad = Measure::oracle("half", 30, |_, _| ratio(1, 2));
        assert!(matches!(
            bad.children_split(&BitString::root(), &eps()),
            Err(LabError::MalformedMeasure(_))
        ));
    }

    #[test]
    fn oracle_measure_respects_tolerance() {
        let m = Measure::oracle("noisy-uniform", 40, |x, e| {
            pow2(-(x.len() as i64)) + e / int(2)
        });
        let q = m.measure_of(&b("01"), &ratio(1, 100)).unwrap();
        assert!((q - ratio(1, 4)).abs() <= ratio(1, 100));
        assert!(m.measure_of(&b("01"), &int(0)).is_err());
    }

    #[test]
    fn oracle_tie_exhausts_precision() {
        // Bernoulli(1/3) through an oracle: μ[x1] = μ[x]/3 exactly, which an
        // approximation can never decide.
        let exact = Measure::bernoulli(ratio(1, 3)).unwrap();
        let m = Measure::oracle("bern", 24, move |x, e| {
            exact.exact_measure(x).unwrap() - e / int(2)
        });
        let r = m.decide_positive(&[(int(3), b("1")), (int(-1), BitString::root())], "tie");
        assert!(matches!(r, Err(LabError::PrecisionExhausted { .. })));
        // The bit-0 comparison is decidable and the walk proceeds.
        let mut w = m.heavy_walk();
        assert!(!w.step().unwrap().bit);
    }

    #[test]
    fn mixture_rejects_bad_weights() {
        assert!(Measure::mixture(vec![(ratio(1, 2), Measure::Uniform)]).is_err());
        assert!(Measure::bernoulli(ratio(4, 3)).is_err());
    }

    #[test]
    fn atom_audit_examples() {
        let thr = pow2(-16);
        let u = nonatomic_audit(&Measure::Uniform, 32, &thr).unwrap();
        assert!(!u.suspected_atom);
        assert_eq!(u.final_mass(), &pow2(-32));

        let a = nonatomic_audit(&point_half_uniform(), 32, &thr).unwrap();
        assert!(a.suspected_atom);
        assert_eq!(a.final_mass(), &(ratio(1, 2) + pow2(-33)));

        let bern = Measure::bernoulli(ratio(1, 3)).unwrap();
        let r = nonatomic_audit(&bern, 64, &thr).unwrap();
        assert!(!r.suspected_atom);
        assert_eq!(r.final_mass(), &crate::rational::pow(&ratio(2, 3), 64));
    }

    #[test]
    fn json_round_trip() {
        let text = r#"{"kind":"mixture","parts":[{"kind":"point","cycle":"0"},{"kind":"bernoulli","p":"1/3"}],"weights":["1/2","1/2"]}"#;
        let m = Measure::from_json(text).unwrap();
        let again = Measure::from_json(&m.to_json().unwrap()).unwrap();
        for x in ["", "0", "01", "0001"] {
            let x: BitString = x.parse().unwrap();
            assert_eq!(
                m.exact_measure(&x).unwrap(),
                again.exact_measure(&x).unwrap()
            );
        }
        let br = Measure::from_json(
            r#"{"kind":"branching","weights":[["depth","1","5/8"]],"default":"3/4"}"#,
        )
        .unwrap();
        assert_eq!(br.exact_measure(&b("00")).unwrap(), ratio(15, 32));
    }

    #[test]
    fn json_errors_carry_position() {
        let err = Measure::from_json("{\"kind\":\n \"nope\"}").unwrap_err();
        assert!(matches!(err, LabError::Parse { line: 2, .. }));
    }
}
