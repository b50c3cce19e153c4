//! The deterministic heavy-branch machine and the non-integrability of
//! `t_f / log t_f` along its cells.

use num_traits::{One, Zero};

use crate::bits::BitString;
use crate::enclosure::{certified_log2, Enclosure};
use crate::error::{LabError, Result};
use crate::measure::Measure;
use crate::rational::{self, format_rational, int, Rational};

use super::series::{trend, DivergenceTrend};

/// Output of the heavy-branch machine to a finite depth `N`.
///
/// `B_k` is the interval of the first `k` output bits and `C_k = B_{k-1} - B_k`
/// the sibling the machine did not take at step `k`.
#[derive(Clone, Debug)]
pub struct HeavyBranchTrace {
    pub output: BitString,
    /// `μ(B_k)` for `k = 0..=N`.
    pub mass_b: Vec<Rational>,
    /// `μ(C_k)` for `k = 1..=N`, stored at index `k - 1`.
    pub mass_c: Vec<Rational>,
    /// Whether both children qualified at step `k` (index `k - 1`).
    pub ties: Vec<bool>,
}

impl HeavyBranchTrace {
    pub fn depth(&self) -> usize {
        self.ties.len()
    }

    pub fn b(&self, k: usize) -> &Rational {
        &self.mass_b[k]
    }

    pub fn c(&self, k: usize) -> &Rational {
        &self.mass_c[k - 1]
    }

    pub fn stem_b(&self, k: usize) -> BitString {
        self.output.prefix(k)
    }

    pub fn stem_c(&self, k: usize) -> BitString {
        self.output.prefix(k - 1).child(!self.output.bit(k - 1))
    }

    /// Checks the step bound, the split `μB_{k-1} = μB_k + μC_k` and the
    /// finite tail identity, all exactly.
    pub fn verify(&self) -> TraceCheck {
        let n = self.depth();
        let mut check = TraceCheck::default();
        // Dyadic-aware arithmetic keeps deep uniform traces linear in practice.
        let three = int(3);
        for k in 1..=n {
            let (prev, cur) = (self.b(k - 1), self.b(k));
            if check.step_bound_failure.is_none()
                && !(rational::mul(cur, &three) > *prev && cur <= prev)
            {
                check.step_bound_failure = Some(k);
            }
            if check.split_failure.is_none() && *prev != rational::add(cur, self.c(k)) {
                check.split_failure = Some(k);
            }
        }
        let floor = -self.b(n);
        let mut tail = Rational::zero();
        for k in (0..n).rev() {
            tail = rational::add(&tail, self.c(k + 1));
            if tail != rational::add(self.b(k), &floor) {
                check.tail_failure = Some(k);
            }
        }
        check
    }
}

/// First failing step of each trace invariant, if any.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct TraceCheck {
    pub step_bound_failure: Option<usize>,
    pub split_failure: Option<usize>,
    pub tail_failure: Option<usize>,
}

impl TraceCheck {
    pub fn pass(&self) -> bool {
        self.step_bound_failure.is_none()
            && self.split_failure.is_none()
            && self.tail_failure.is_none()
    }
}

/// Runs the machine that prints `b` whenever `μ[xb] > μ[x]/3`, preferring 0.
///
/// With `atom_threshold` set, a final `μ(B_N)` above the threshold that has
/// not halved since depth `N/2` is reported as a suspected atom.
pub fn heavy_branch_run(
    mu: &Measure,
    depth: usize,
    atom_threshold: Option<&Rational>,
) -> Result<HeavyBranchTrace> {
    let mut walk = mu.heavy_walk();
    let mut mass_b = Vec::with_capacity(depth + 1);
    let mut mass_c = Vec::with_capacity(depth);
    let mut ties = Vec::with_capacity(depth);
    mass_b.push(walk.mass().clone());
    for _ in 0..depth {
        let step = walk.step()?;
        mass_b.push(step.mass_b);
        mass_c.push(step.mass_c);
        ties.push(step.tie);
    }
    if let (Some(threshold), true) = (atom_threshold, depth > 0) {
        let last = &mass_b[depth];
        if last > threshold && last * int(2) > mass_b[depth.div_ceil(2)] {
            return Err(LabError::AtomSuspected {
                value: format_rational(last),
            });
        }
    }
    Ok(HeavyBranchTrace {
        output: walk.stem().clone(),
        mass_b,
        mass_c,
        ties,
    })
}

/// `t_f` on the cell `C_{k+1}` recomputed from `a_f` along the cell's stem.
#[derive(Clone, Debug)]
pub struct CellCheck {
    pub k: usize,
    pub t_f: Rational,
    /// `t_f == 1/μ(B_k)` exactly.
    pub pass: bool,
}

#[derive(Clone, Debug)]
pub struct HeavyIntegralRow {
    pub k: usize,
    pub mass_c: Rational,
    pub mass_b: Rational,
    pub term: Enclosure,
    pub partial: Enclosure,
}

#[derive(Clone, Debug)]
pub struct HeavyIntegralReport {
    pub terms: usize,
    pub rows: Vec<HeavyIntegralRow>,
    pub trend: DivergenceTrend,
    pub cells: Vec<CellCheck>,
    /// `k` whose cell `C_{k+1}` had measure zero and was left out.
    pub dropped: Vec<usize>,
}

impl HeavyIntegralReport {
    pub fn pass(&self) -> bool {
        self.trend.pass && self.cells.iter().all(|c| c.pass)
    }

    /// Partial sum at `K`.
    pub fn partial_at_k(&self) -> &Enclosure {
        self.trend
            .partial_at(self.terms)
            .expect("K is a checkpoint")
    }
}

/// Sums `μC_{k+1} / (μB_k log2(1/μB_k))` for `k = 1..=2K`, which needs a
/// trace of depth at least `2K + 1`, and recomputes `t_f` on sample cells.
pub fn heavy_integral_harness(
    trace: &HeavyBranchTrace,
    mu: &Measure,
    terms: usize,
    bits: u32,
) -> Result<HeavyIntegralReport> {
    if terms < 8 {
        return Err(LabError::Domain(
            "the divergence checkpoints need at least 8 terms".into(),
        ));
    }
    let last = 2 * terms;
    if trace.depth() < last + 1 {
        return Err(LabError::Domain(format!(
            "trace depth {} < {}",
            trace.depth(),
            last + 1
        )));
    }
    let mut partial = Enclosure::zero();
    let mut partials = Vec::with_capacity(last);
    let mut rows = Vec::new();
    let mut dropped = Vec::new();
    for k in 1..=last {
        let (b, c) = (trace.b(k), trace.c(k + 1));
        if *b >= Rational::one() {
            return Err(LabError::Domain(format!("log of measure >= 1 at k = {k}")));
        }
        let term = if c.is_zero() {
            dropped.push(k);
            Enclosure::zero()
        } else {
            let log = certified_log2(&b.recip(), bits)?.enclosure;
            Enclosure::exact(c / b).div(&log)?.round_out(bits)
        };
        partial = partial.add(&term).round_out(bits);
        partials.push(partial.clone());
        if sampled(k, terms) {
            rows.push(HeavyIntegralRow {
                k,
                mass_c: c.clone(),
                mass_b: b.clone(),
                term,
                partial: partial.clone(),
            });
        }
    }
    let trend = trend("sum muC/(muB log2(1/muB))", &partials, terms);
    let mut cells = Vec::new();
    if mu.is_exact() {
        for k in (1..=64.min(last)).chain([terms / 2, terms]) {
            if cells.iter().any(|c: &CellCheck| c.k == k) || trace.c(k + 1).is_zero() {
                continue;
            }
            let t_f = cell_t_f(trace, mu, k)?;
            let pass = t_f == trace.b(k).recip();
            cells.push(CellCheck { k, t_f, pass });
        }
    }
    Ok(HeavyIntegralReport {
        terms,
        rows,
        trend,
        cells,
        dropped,
    })
}

/// `sup_n a_f(ω_1..n)/μ[ω_1..n]` on `C_{k+1}`, where `a_f` is 1 on prefixes
/// of the output and 0 elsewhere. Only prefixes of the cell's stem matter:
/// deeper strings are no longer output prefixes.
fn cell_t_f(trace: &HeavyBranchTrace, mu: &Measure, k: usize) -> Result<Rational> {
    let stem = trace.stem_c(k + 1);
    let mut cursor = mu.cursor()?;
    let mut on_output = true;
    let mut best = Rational::zero();
    for n in 0..=stem.len() {
        if n > 0 {
            let bit = stem.bit(n - 1);
            on_output &= bit == trace.output.bit(n - 1);
            cursor.advance(bit);
        }
        let mass = cursor.mass();
        if on_output && !mass.is_zero() {
            best = best.max(mass.recip());
        }
    }
    Ok(best)
}

/// Rows kept for tables: the first 32 terms, powers of two and checkpoints.
pub fn sampled(k: usize, terms: usize) -> bool {
    k <= 32
        || k.is_power_of_two()
        || [terms / 8, terms / 4, terms / 2, terms, 2 * terms].contains(&k)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::measure::BranchingRule;
    use crate::rational::{pow, pow2, ratio, to_f64};

    #[test]
    fn uniform_walk_prints_zeros() {
        let t = heavy_branch_run(&Measure::Uniform, 16, None).unwrap();
        assert_eq!(t.output, BitString::repeat(false, 16));
        for k in 1..=16 {
            assert_eq!(t.b(k), &pow2(-(k as i64)));
            assert_eq!(t.c(k), &pow2(-(k as i64)));
            assert!(t.ties[k - 1]);
        }
        assert!(t.verify().pass());
    }

    #[test]
    fn bernoulli_third_child_is_not_heavy() {
        let mu = Measure::bernoulli(ratio(1, 3)).unwrap();
        let t = heavy_branch_run(&mu, 8, None).unwrap();
        assert_eq!(t.output, BitString::repeat(false, 8));
        assert_eq!(t.b(8), &pow(&ratio(2, 3), 8));
        assert!(t.ties.iter().all(|&tie| !tie));
        assert!(t.verify().pass());
    }

    #[test]
    fn branching_three_quarters_on_one() {
        let mu = Measure::branching(BranchingRule::constant(true, ratio(3, 4))).unwrap();
        let t = heavy_branch_run(&mu, 4, None).unwrap();
        assert_eq!(t.output.to_string(), "1111");
        for k in 1..=4 {
            assert_eq!(t.c(k), &(pow(&ratio(3, 4), k as u32 - 1) * ratio(1, 4)));
        }
        assert_eq!(t.stem_c(2).to_string(), "10");
    }

    #[test]
    fn atom_is_flagged() {
        let point = Measure::point(BitString::root(), "0".parse().unwrap()).unwrap();
        let mu =
            Measure::mixture(vec![(ratio(1, 2), point), (ratio(1, 2), Measure::Uniform)]).unwrap();
        let err = heavy_branch_run(&mu, 40, Some(&ratio(1, 100))).unwrap_err();
        assert!(matches!(err, LabError::AtomSuspected { .. }));
        assert!(heavy_branch_run(&Measure::Uniform, 40, Some(&ratio(1, 100))).is_ok());
    }

    #[test]
    fn broken_trace_is_caught() {
        let mut t = heavy_branch_run(&Measure::Uniform, 6, None).unwrap();
        t.mass_c[2] = ratio(1, 3);
        let check = t.verify();
        assert_eq!(check.split_failure, Some(3));
        assert!(check.tail_failure.is_some());
    }

    #[test]
    fn integral_uniform_small() {
        let t = heavy_branch_run(&Measure::Uniform, 2 * 64 + 1, None).unwrap();
        let r = heavy_integral_harness(&t, &Measure::Uniform, 64, 64).unwrap();
        let harmonic: f64 = (1..=64).map(|k| 0.5 / k as f64).sum();
        assert!((r.partial_at_k().mid_f64() - harmonic).abs() < 1e-9);
        assert!(r.pass());
        // t_f = 2^k on C_{k+1}.
        for c in &r.cells {
            assert_eq!(c.t_f, pow2(c.k as i64));
        }
    }

    #[test]
    fn integral_branching_matches_direct_sum() {
        let mu = Measure::branching(BranchingRule::constant(true, ratio(3, 4))).unwrap();
        let t = heavy_branch_run(&mu, 2 * 32 + 1, None).unwrap();
        let r = heavy_integral_harness(&t, &mu, 32, 64).unwrap();
        let l = (4.0f64 / 3.0).log2();
        let direct: f64 = (1..=32).map(|k| 0.25 / (k as f64 * l)).sum();
        assert!((r.partial_at_k().mid_f64() - direct).abs() < 1e-9);
        assert!(r.cells.iter().all(|c| c.pass));
        assert!(to_f64(&r.cells[0].t_f) > 1.0);
    }

    #[test]
    fn integral_needs_deep_trace() {
        let t = heavy_branch_run(&Measure::Uniform, 10, None).unwrap();
        assert!(heavy_integral_harness(&t, &Measure::Uniform, 8, 64).is_err());
    }
}
