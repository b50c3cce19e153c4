//! Searching for a semimeasure that keeps up with `g / log g` on every `D_k`.
//!
//! If `a` dominated `t = g / log2 g` up to `2^-c`, each `D_k` would be covered
//! by stems `w` with `a(w)/μ[w] ≥ 2^-c / (2 μD_k log2(1/μD_k))`, and the
//! resulting prefix-free family would carry `a`-mass `Σ_k 2^{-c-1}/log2(1/μD_k)`,
//! which diverges. The audit looks for those stems in a concrete `a`.

use num_traits::{One, Zero};

use crate::bits::{is_prefix_free, BitString};
use crate::enclosure::{certified_log2, log2_three, Enclosure};
use crate::error::{LabError, Result};
use crate::measure::Measure;
use crate::rational::{int, pow2, Rational};

use super::rarefied::RarefiedFamily;
use super::series::{trend_at, DivergenceTrend};

#[derive(Clone, Debug)]
pub struct Witness {
    pub stem: BitString,
    pub a: Rational,
    pub mass: Rational,
}

#[derive(Clone, Debug)]
pub struct WitnessEntry {
    /// Rank `k` of `𝐃_k`.
    pub rank: usize,
    pub required: Enclosure,
    /// `None` when no cover exists within the searched depth.
    pub cover: Option<Vec<Witness>>,
    /// `μ[w]² < μD_k < μC_k²` for every witness.
    pub size_argument: bool,
    /// `Σ_l a(w) ≥ 2^{-c-1}/log2(1/μD_k)` for a found cover.
    pub mass_bound: bool,
    /// `S_k log2(1/μ𝐂_k) / log2(1/μ𝐃_k)`, expected in `(1/(1 + log2 3/(S_k log2(1/μ𝐂_k))), 1)`.
    pub factor: Enclosure,
    pub factor_ok: bool,
}

#[derive(Clone, Debug)]
pub struct WitnessReport {
    pub c: u32,
    pub entries: Vec<WitnessEntry>,
    pub prefix_free: bool,
    /// `Σ_{k,l} a(w^k_l)` over the covers found.
    pub contradiction_sum: Rational,
    /// Partial sums of `Σ_k 1/log2(1/μ𝐃_k)`.
    pub lower_bound: DivergenceTrend,
    /// First `K` where `2^{-c-1} Σ_{k≤K} 1/log2(1/μ𝐃_k)` certainly exceeds 1.
    pub crossing: Option<usize>,
    /// Partial sums of `Σ_k 1/(S_k log2(1/μ𝐂_k))`.
    pub comparison: DivergenceTrend,
}

impl WitnessReport {
    pub fn covered(&self) -> usize {
        self.entries.iter().filter(|e| e.cover.is_some()).count()
    }

    /// Every finitely checkable consistency condition held; finding no
    /// cover is not a failure.
    pub fn pass(&self) -> bool {
        self.prefix_free
            && self
                .entries
                .iter()
                .all(|e| e.factor_ok && (e.cover.is_none() || e.mass_bound))
            && self.lower_bound.stall.is_none()
            && self.comparison.stall.is_none()
    }
}

struct Search<'a> {
    a: &'a dyn Fn(&BitString) -> Rational,
    mu: &'a Measure,
    required: &'a Enclosure,
    limit: usize,
}

impl Search<'_> {
    /// `a(w) ≥ r μ[w]` for every `r` in the required enclosure.
    fn qualifies(&self, w: &BitString) -> Result<Option<Witness>> {
        let a = (self.a)(w);
        if a.is_zero() {
            return Ok(None);
        }
        let mass = self.mu.exact_measure(w)?;
        let ok = mass.is_zero() || a >= self.required.hi() * &mass;
        Ok(ok.then(|| Witness {
            stem: w.clone(),
            a,
            mass,
        }))
    }

    fn cover_below(&self, w: &BitString) -> Result<Option<Vec<Witness>>> {
        if let Some(found) = self.qualifies(w)? {
            return Ok(Some(vec![found]));
        }
        if w.len() >= self.limit || (self.a)(w).is_zero() {
            return Ok(None);
        }
        let Some(mut left) = self.cover_below(&w.child(false))? else {
            return Ok(None);
        };
        let Some(right) = self.cover_below(&w.child(true))? else {
            return Ok(None);
        };
        left.extend(right);
        Ok(Some(left))
    }
}

/// For every `𝐃_k` looks for the shortest prefix of its stem, or failing
/// that a cover by extensions at most `extension` bits deeper (and within
/// `a_depth`), on which `a/μ` reaches the required ratio.
pub fn witness_audit(
    family: &RarefiedFamily,
    mu: &Measure,
    a: &dyn Fn(&BitString) -> Rational,
    a_depth: usize,
    c: u32,
    extension: usize,
) -> Result<WitnessReport> {
    let bits = family.bits;
    let log3 = log2_three(bits);
    let scale = pow2(-(c as i64) - 1);
    let mut entries = Vec::new();
    let mut all_stems = Vec::new();
    let mut contradiction_sum = Rational::zero();
    let mut lower = Vec::new();
    let mut comparison = Vec::new();
    let (mut lower_sum, mut comparison_sum) = (Enclosure::zero(), Enclosure::zero());
    let mut crossing = None;
    for k in 1..=family.len() {
        let cell = family.ranked(k);
        let d = cell
            .d
            .as_ref()
            .ok_or_else(|| LabError::Domain(format!("D_{} was not constructed", cell.index)))?;
        let log_d = certified_log2(&d.mass.recip(), bits)?.enclosure;
        let required = Enclosure::exact(scale.clone()).div(&log_d.scale(&d.mass))?;
        let search = Search {
            a,
            mu,
            required: &required,
            limit: a_depth.min(d.stem.len() + extension),
        };

        let mut cover = None;
        for n in 0..=d.stem.len().min(a_depth) {
            if let Some(w) = search.qualifies(&d.stem.prefix(n))? {
                cover = Some(vec![w]);
                break;
            }
        }
        if cover.is_none() && d.stem.len() < a_depth {
            cover = search.cover_below(&d.stem)?;
        }

        let bound = Enclosure::exact(scale.clone()).div(&log_d)?;
        let (size_argument, mass_bound) = match &cover {
            Some(ws) => {
                let sum: Rational = ws.iter().map(|w| w.a.clone()).sum();
                contradiction_sum += &sum;
                all_stems.extend(ws.iter().map(|w| w.stem.clone()));
                let size = ws.iter().all(|w| &w.mass * &w.mass < d.mass)
                    && d.mass < &cell.mass * &cell.mass;
                (size, &sum >= bound.hi())
            }
            None => (true, true),
        };

        let log_c = certified_log2(&cell.mass.recip(), bits)?.enclosure;
        let s_log_c = family.s[k - 1].mul(&log_c);
        let factor = s_log_c.div(&log_d)?;
        let floor = Enclosure::exact(int(1)).div(&log3.div(&s_log_c)?.add_exact(&int(1)))?;
        let slack = factor.width() + floor.width();
        let factor_ok =
            *factor.lo() <= Rational::one() + &slack && *factor.hi() >= floor.lo() - &slack;

        lower_sum = lower_sum.add(&log_d.recip()?).round_out(bits);
        comparison_sum = comparison_sum.add(&s_log_c.recip()?).round_out(bits);
        if crossing.is_none() && lower_sum.lo() * &scale > Rational::one() {
            crossing = Some(k);
        }
        lower.push(lower_sum.clone());
        comparison.push(comparison_sum.clone());
        entries.push(WitnessEntry {
            rank: k,
            required,
            cover,
            size_argument,
            mass_bound,
            factor,
            factor_ok,
        });
    }
    let points: Vec<usize> = (0..)
        .map(|i| 1usize << i)
        .take_while(|&j| j <= family.len())
        .collect();
    Ok(WitnessReport {
        c,
        entries,
        prefix_free: is_prefix_free(all_stems.iter()),
        contradiction_sum,
        lower_bound: trend_at("sum 1/log2(1/muD)", &lower, &points),
        crossing,
        comparison: trend_at("sum 1/(S log2(1/muC))", &comparison, &points),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::separation::heavy::heavy_branch_run;
    use crate::separation::rarefied::{dk_construct, order_by_measure};

    fn uniform_family(count: usize) -> RarefiedFamily {
        let mu = Measure::Uniform;
        let trace = heavy_branch_run(&mu, count, None).unwrap();
        let mut f = order_by_measure(&trace, &mu, 128).unwrap();
        dk_construct(&mut f, &mu, 100_000).unwrap();
        f
    }

    #[test]
    fn uniform_weights_find_no_witness() {
        let f = uniform_family(16);
        let uniform = |x: &BitString| pow2(-(x.len() as i64));
        let r = witness_audit(&f, &Measure::Uniform, &uniform, 4096, 3, 4).unwrap();
        assert!(r.pass());
        // Required ratio for μD = 2^-m is 2^(m-4)/m; uniform a has ratio 1.
        for e in &r.entries {
            let m = f.ranked(e.rank).d.as_ref().unwrap().stem.len() as i64;
            assert!(e.required.contains(&(pow2(m - 4) / int(m))));
            assert_eq!(e.cover.is_some(), pow2(m - 4) <= int(m));
        }
        assert_eq!(r.covered(), 1);
        assert!(r
            .lower_bound
            .checkpoints
            .windows(2)
            .all(|w| w[0].1.certainly_lt(&w[1].1)));
    }

    #[test]
    fn chain_semimeasure_misses_the_cells() {
        let f = uniform_family(8);
        let chain = |x: &BitString| if x.count_ones() == 0 { int(1) } else { int(0) };
        let r = witness_audit(&f, &Measure::Uniform, &chain, 4096, 3, 2).unwrap();
        assert!(r.contradiction_sum <= int(1));
        assert!(r.covered() <= 1);
    }

    #[test]
    fn generous_semimeasure_covers_and_respects_the_bound() {
        let f = uniform_family(4);
        // Put weight 1/2^k on the stem of D_k itself.
        let stems: Vec<(BitString, Rational)> = (1..=4)
            .map(|k| {
                (
                    f.ranked(k).d.as_ref().unwrap().stem.clone(),
                    pow2(-(k as i64)),
                )
            })
            .collect();
        let a = move |x: &BitString| {
            stems
                .iter()
                .filter(|(s, _)| x.is_prefix_of(s))
                .map(|(_, w)| w.clone())
                .sum::<Rational>()
        };
        let r = witness_audit(&f, &Measure::Uniform, &a, 4096, 0, 0).unwrap();
        assert!(r.covered() > 0);
        assert!(r.pass());
        assert!(r
            .entries
            .iter()
            .filter(|e| e.cover.is_some())
            .all(|e| e.mass_bound));
    }
}
