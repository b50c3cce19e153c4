//! Deficiencies read off semimeasures along a path, and the audits that
//! relate them.

use num_traits::{One, Signed, Zero};
use serde::Serialize;

use crate::bits::{is_prefix_free, BitString};
use crate::effective::{BasicFunction, ContinuousSemimeasure, DiscreteSemimeasure};
use crate::enclosure::{certified_log2, DeficiencyValue, Enclosure};
use crate::error::{LabError, Result};
use crate::measure::Measure;
use crate::rational::{floor_log2, format_rational, int, pow2, Rational};

use super::mltest::{deficiency_from_test, MLTest};

/// A ratio `mass / μ` with the conventions `0/· = 0` and `q/0 = +∞`.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord)]
enum Ratio {
    Finite(Rational),
    Infinite,
}

impl Ratio {
    fn new(mass: Rational, mu: &Rational) -> Ratio {
        if mass.is_zero() {
            Ratio::Finite(Rational::zero())
        } else if mu.is_zero() {
            Ratio::Infinite
        } else {
            Ratio::Finite(mass / mu)
        }
    }

    fn log2(&self, bits: u32) -> Result<DeficiencyValue> {
        match self {
            Ratio::Infinite => Ok(DeficiencyValue::PosInfinity),
            Ratio::Finite(q) => DeficiencyValue::log2_of(q, bits),
        }
    }
}

/// Both sides of the identity relating the supremum and the sum of
/// `m(w)/μ([w])` over prefixes `w ⪯ x`, in log scale.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct GacsValue {
    pub sup_form: DeficiencyValue,
    pub sum_form: DeficiencyValue,
    /// Length of the prefix attaining the supremum.
    pub argmax: usize,
}

pub fn gacs_deficiency(
    m: &DiscreteSemimeasure,
    mu: &Measure,
    x: &BitString,
    bits: u32,
) -> Result<GacsValue> {
    let mut c = mu.cursor()?;
    let mut best = Ratio::Finite(Rational::zero());
    let mut argmax = 0;
    let mut sum = Ratio::Finite(Rational::zero());
    for n in 0..=x.len() {
        if n > 0 {
            c.advance(x.bit(n - 1));
        }
        let r = Ratio::new(m.get(&x.prefix(n)), &c.mass());
        sum = match (sum, &r) {
            (Ratio::Finite(s), Ratio::Finite(q)) => Ratio::Finite(s + q),
            _ => Ratio::Infinite,
        };
        if r > best {
            best = r;
            argmax = n;
        }
    }
    Ok(GacsValue {
        sup_form: best.log2(bits)?,
        sum_form: sum.log2(bits)?,
        argmax,
    })
}

/// Finite-depth proxies of the three a priori deficiencies along a path.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct AprioriReport {
    /// Max over prefixes of length `0..=N`.
    pub d_a: DeficiencyValue,
    /// Max over the tail window `[n0, N]`.
    pub limsup: DeficiencyValue,
    /// Min over the tail window.
    pub liminf: DeficiencyValue,
    pub window: (usize, usize),
    pub argmax: usize,
}

/// `log2(a(w)/μ([w]))` for the prefixes `w` of `path` with `|w| ≤ N`.
fn ratio_profile(
    a: &ContinuousSemimeasure,
    mu: &Measure,
    path: &BitString,
    n_max: usize,
) -> Result<Vec<Ratio>> {
    let mut c = mu.cursor()?;
    let mut out = Vec::with_capacity(n_max + 1);
    for n in 0..=n_max {
        if n > 0 {
            c.advance(path.bit(n - 1));
        }
        out.push(Ratio::new(a.get(&path.prefix(n)), &c.mass()));
    }
    Ok(out)
}

pub fn apriori_deficiencies(
    a: &ContinuousSemimeasure,
    mu: &Measure,
    path: &BitString,
    window: (usize, usize),
    bits: u32,
) -> Result<AprioriReport> {
    let (n0, n_max) = window;
    if n0 > n_max || n_max > path.len() || n_max > a.depth {
        return Err(LabError::Domain(format!(
            "window [{n0}, {n_max}] must lie within the path length {} and depth {}",
            path.len(),
            a.depth
        )));
    }
    let profile = ratio_profile(a, mu, path, n_max)?;
    let (argmax, best) = profile
        .iter()
        .enumerate()
        .max_by(|x, y| x.1.cmp(y.1).then(y.0.cmp(&x.0)))
        .expect("non-empty");
    let tail = &profile[n0..=n_max];
    let hi = tail.iter().max().expect("non-empty window");
    let lo = tail.iter().min().expect("non-empty window");
    Ok(AprioriReport {
        d_a: best.log2(bits)?,
        limsup: hi.log2(bits)?,
        liminf: lo.log2(bits)?,
        window,
        argmax,
    })
}

/// One slab `A_n = {2^n ≤ t < 2^{n+1}}` of the integral of
/// `t (log2 t)^{-1-ε}`.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Slab {
    pub n: i64,
    pub integral: Enclosure,
    /// `2 n^{-1-ε}`.
    pub bound: Enclosure,
    pub pass: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SlabReport {
    pub slabs: Vec<Slab>,
    pub total: Enclosure,
    pub bound_total: Enclosure,
}

pub fn dp_vs_de_slab_audit(
    t: &BasicFunction,
    mu: &Measure,
    eps: &Rational,
    bits: u32,
) -> Result<SlabReport> {
    if !eps.is_positive() {
        return Err(LabError::Domain("slab exponent needs ε > 0".into()));
    }
    let exponent = -(Rational::one() + eps);
    let mut by_slab: std::collections::BTreeMap<i64, Enclosure> = std::collections::BTreeMap::new();
    for (x, v) in t.pieces() {
        if *v < int(2) {
            continue;
        }
        let n = floor_log2(v);
        let log = certified_log2(v, bits)?.enclosure;
        let weight = log.pow(&exponent, bits)?.scale(&(v * mu.exact_measure(x)?));
        let slot = by_slab.entry(n).or_insert_with(Enclosure::zero);
        let sum = slot.add(&weight);
        // Exact sums stay exact; only inexact ones are widened to the grid.
        *slot = if sum.is_exact() {
            sum
        } else {
            sum.round_out(bits)
        };
    }
    let mut slabs = Vec::new();
    let mut total = Enclosure::zero();
    let mut bound_total = Enclosure::zero();
    for (n, integral) in by_slab {
        let bound = Enclosure::exact(int(n))
            .pow(&exponent, bits)?
            .scale(&int(2));
        if !integral.certainly_le(&bound) {
            if bound.certainly_lt(&integral) {
                return Err(LabError::NotProbabilityBounded {
                    witness: format_rational(&pow2(n)),
                });
            }
            return Err(LabError::Undecided {
                what: format!("slab {n} bound"),
                bits,
            });
        }
        total = total.add(&integral);
        bound_total = bound_total.add(&bound);
        slabs.push(Slab {
            n,
            integral,
            bound,
            pass: true,
        });
    }
    Ok(SlabReport {
        slabs,
        total,
        bound_total,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct MarkovReport {
    pub stems: Vec<BitString>,
    #[serde(with = "crate::rational::serde_rational")]
    pub mu_mass: Rational,
    #[serde(with = "crate::rational::serde_rational")]
    pub a_mass: Rational,
    pub c: u32,
    pub prefix_free: bool,
    /// `Σ μ([x]) < Σ a(x)/2^c ≤ 2^-c` (the strict part is vacuous for empty S).
    pub pass: bool,
}

/// Minimal stems where `a(x)/μ([x])` first exceeds `2^c`.
pub fn markov_prefixfree_audit(
    a: &ContinuousSemimeasure,
    mu: &Measure,
    c: u32,
) -> Result<MarkovReport> {
    let threshold = pow2(c as i64);
    let mut stems = Vec::new();
    let mut mu_mass = Rational::zero();
    let mut a_mass = Rational::zero();
    let mut stack = vec![mu.cursor()?];
    while let Some(cur) = stack.pop() {
        let w = a.get(cur.stem());
        if w.is_zero() {
            continue;
        }
        let m = cur.mass();
        if w > &threshold * &m {
            mu_mass += m;
            a_mass += w;
            stems.push(cur.stem().clone());
            continue;
        }
        if cur.stem().len() < a.depth {
            stack.push(cur.child(true));
            stack.push(cur.child(false));
        }
    }
    stems.sort();
    let prefix_free = is_prefix_free(&stems);
    let scaled = &a_mass / &threshold;
    let pass = prefix_free && (stems.is_empty() || mu_mass < scaled) && scaled <= pow2(-(c as i64));
    Ok(MarkovReport {
        stems,
        mu_mass,
        a_mass,
        c,
        prefix_free,
        pass,
    })
}

/// The five deficiencies at one path, with pairwise differences.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ChainReport {
    pub depth: usize,
    pub window: (usize, usize),
    pub d_e: GacsValue,
    pub d_p: usize,
    pub apriori: AprioriReport,
    /// `liminf ≤ limsup ≤ d^A`, checked at enclosure endpoints.
    pub order_holds: bool,
    pub differences: Vec<(String, String, Option<DeficiencyValue>)>,
}

impl ChainReport {
    pub fn entries(&self) -> Vec<(&'static str, DeficiencyValue)> {
        vec![
            ("d_E", self.d_e.sup_form.clone()),
            ("d_liminfA", self.apriori.liminf.clone()),
            ("d_limsupA", self.apriori.limsup.clone()),
            ("d_A", self.apriori.d_a.clone()),
            ("d_P", DeficiencyValue::exact(int(self.d_p as i64))),
        ]
    }
}

#[allow(clippy::too_many_arguments)]
pub fn chain_report(
    m: &DiscreteSemimeasure,
    a: &ContinuousSemimeasure,
    test: &MLTest,
    mu: &Measure,
    path: &BitString,
    depth: usize,
    window: (usize, usize),
    bits: u32,
) -> Result<ChainReport> {
    if path.len() < depth {
        return Err(LabError::Domain(format!(
            "path of length {} is shorter than depth {depth}",
            path.len()
        )));
    }
    let x = path.prefix(depth);
    let d_e = gacs_deficiency(m, mu, &x, bits)?;
    let d_p = deficiency_from_test(test, &x);
    let apriori = apriori_deficiencies(a, mu, path, window, bits)?;
    let slack = apriori.liminf.width() + apriori.limsup.width() + apriori.d_a.width();
    let order_holds = apriori.liminf.le_within(&apriori.limsup, &slack)
        && apriori.limsup.le_within(&apriori.d_a, &slack);
    let mut report = ChainReport {
        depth,
        window,
        d_e,
        d_p,
        apriori,
        order_holds,
        differences: Vec::new(),
    };
    let entries = report.entries();
    for i in 0..entries.len() {
        for j in i + 1..entries.len() {
            report.differences.push((
                entries[j].0.to_string(),
                entries[i].0.to_string(),
                entries[j].1.minus(&entries[i].1),
            ));
        }
    }
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::effective::{
        lift_discrete_to_continuous, machine_to_semimeasure, mix_pool, MachinePool, Program,
    };
    use crate::rational::ratio;

    const BITS: u32 = 96;

    fn b(s: &str) -> BitString {
        s.parse().unwrap()
    }

    fn zeros(n: usize) -> BitString {
        BitString::repeat(false, n)
    }

    fn always_zero(depth: usize) -> ContinuousSemimeasure {
        machine_to_semimeasure(&Program::iid(int(1), int(0)), depth).unwrap()
    }

    fn uniform_a(depth: usize) -> ContinuousSemimeasure {
        ContinuousSemimeasure::from_measure(&Measure::Uniform, depth).unwrap()
    }

    fn contains(v: &DeficiencyValue, q: Rational) -> bool {
        v.finite().is_some_and(|e| e.contains(&q))
    }

    fn all_strings(n: usize) -> Vec<BitString> {
        let mut out = vec![BitString::root()];
        for _ in 0..n {
            out = out
                .into_iter()
                .flat_map(|x| [x.child(false), x.child(true)])
                .collect();
        }
        out
    }

    #[test]
    fn gacs_geometric_mass() {
        // m(w) = 2^{-2|w|-1}; against uniform the ratio is 2^{-|w|-1}, so the
        // root attains the supremum 1/2.
        let m = DiscreteSemimeasure::new((0..=4).flat_map(all_strings).map(|w| {
            let q = pow2(-2 * w.len() as i64 - 1);
            (w, q)
        }));
        let g = gacs_deficiency(&m, &Measure::Uniform, &b("0110"), BITS).unwrap();
        assert!(contains(&g.sup_form, int(-1)));
        assert_eq!(g.argmax, 0);
        // Sum of 2^{-n-1}, n = 0..4, is 31/32.
        let expected = (31f64 / 32.0).log2();
        let e = g.sum_form.finite().unwrap();
        assert!(e.lo_f64() <= expected && expected <= e.hi_f64());
        assert!(g.sup_form.certainly_le(&g.sum_form));
    }

    #[test]
    fn gacs_single_term_and_empty() {
        let m = DiscreteSemimeasure::new([(zeros(4), ratio(1, 2))]);
        let g = gacs_deficiency(&m, &Measure::Uniform, &zeros(4), BITS).unwrap();
        assert!(contains(&g.sup_form, int(3)));
        assert!(contains(&g.sum_form, int(3)));
        let g = gacs_deficiency(
            &DiscreteSemimeasure::default(),
            &Measure::Uniform,
            &zeros(4),
            BITS,
        )
        .unwrap();
        assert!(g.sup_form.is_neg_infinity() && g.sum_form.is_neg_infinity());
    }

    #[test]
    fn gacs_null_prefix_is_top() {
        let mu = Measure::point(BitString::root(), b("1")).unwrap();
        let m = DiscreteSemimeasure::new([(b("0"), ratio(1, 4))]);
        let g = gacs_deficiency(&m, &mu, &b("00"), BITS).unwrap();
        assert!(g.sup_form.is_pos_infinity());
    }

    #[test]
    fn apriori_uniform_is_zero() {
        let r = apriori_deficiencies(
            &uniform_a(10),
            &Measure::Uniform,
            &b("0110100110"),
            (5, 10),
            BITS,
        )
        .unwrap();
        for v in [&r.d_a, &r.limsup, &r.liminf] {
            assert_eq!(v, &DeficiencyValue::exact(int(0)));
        }
    }

    #[test]
    fn apriori_always_zero_machine() {
        let n = 16;
        let r = apriori_deficiencies(
            &always_zero(n),
            &Measure::Uniform,
            &zeros(n),
            (n / 2, n),
            BITS,
        )
        .unwrap();
        assert!(contains(&r.d_a, int(16)));
        assert!(contains(&r.limsup, int(16)));
        // The window minimum sits at its left end.
        assert!(contains(&r.liminf, int(8)));
    }

    #[test]
    fn apriori_after_a_one() {
        let (n, k) = (16, 5);
        let path = zeros(k).concat(&b("1")).concat(&zeros(n - k - 1));
        let r = apriori_deficiencies(&always_zero(n), &Measure::Uniform, &path, (k + 1, n), BITS)
            .unwrap();
        assert!(contains(&r.d_a, int(k as i64)));
        assert!(r.limsup.is_neg_infinity() && r.liminf.is_neg_infinity());
    }

    #[test]
    fn apriori_rejects_window_past_depth() {
        assert!(
            apriori_deficiencies(&always_zero(4), &Measure::Uniform, &zeros(8), (2, 6), BITS)
                .is_err()
        );
    }

    #[test]
    fn slab_examples() {
        let eps = int(1);
        let t = BasicFunction::new((1..=10).map(|k| (zeros(k).concat(&b("1")), pow2(k as i64))))
            .unwrap();
        let r = dp_vs_de_slab_audit(&t, &Measure::Uniform, &eps, BITS).unwrap();
        assert_eq!(r.slabs.len(), 10);
        for s in &r.slabs {
            // 2^k · k^{-2} · 2^{-k-1} = 1/(2k²)
            assert!(s.integral.contains(&ratio(1, 2 * s.n * s.n)));
            assert!(s.bound.contains(&ratio(2, s.n * s.n)));
        }

        let one = BasicFunction::indicator(BitString::root(), int(1));
        let r = dp_vs_de_slab_audit(&one, &Measure::Uniform, &eps, BITS).unwrap();
        assert!(r.slabs.is_empty());
        assert_eq!(r.total, Enclosure::zero());

        // t = 4 on a quarter: 4 · (1/4) · 2^{-1-ε}
        let quarter = BasicFunction::indicator(b("00"), int(4));
        let half_eps = ratio(1, 2);
        let r = dp_vs_de_slab_audit(&quarter, &Measure::Uniform, &half_eps, BITS).unwrap();
        let expected = 2f64.powf(-1.5);
        assert!(
            r.slabs[0].integral.lo_f64() <= expected && expected <= r.slabs[0].integral.hi_f64()
        );
    }

    #[test]
    fn slab_detects_unbounded_function() {
        let t = BasicFunction::indicator(BitString::root(), int(16));
        assert!(matches!(
            dp_vs_de_slab_audit(&t, &Measure::Uniform, &int(1), BITS),
            Err(LabError::NotProbabilityBounded { .. })
        ));
    }

    #[test]
    fn markov_examples() {
        let r = markov_prefixfree_audit(&always_zero(8), &Measure::Uniform, 3).unwrap();
        assert_eq!(r.stems, vec![zeros(4)]);
        assert_eq!(r.mu_mass, ratio(1, 16));
        assert!(r.pass);

        let r = markov_prefixfree_audit(&uniform_a(8), &Measure::Uniform, 1).unwrap();
        assert!(r.stems.is_empty() && r.mu_mass.is_zero() && r.pass);

        let coin = machine_to_semimeasure(&Program::iid(ratio(1, 2), ratio(1, 2)), 8).unwrap();
        let pool = mix_pool(&MachinePool {
            members: vec![(always_zero(8), ratio(1, 2)), (coin, ratio(1, 2))],
        })
        .unwrap();
        let r = markov_prefixfree_audit(&pool, &Measure::Uniform, 2).unwrap();
        assert_eq!(r.stems, vec![zeros(3)]);
        assert_eq!(r.mu_mass, ratio(1, 8));
        assert!(r.pass);
    }

    #[test]
    fn chain_uniform_is_flat() {
        let depth = 8;
        let path = b("01101001");
        let m = DiscreteSemimeasure::default();
        let r = chain_report(
            &m,
            &uniform_a(depth),
            &MLTest::empty(),
            &Measure::Uniform,
            &path,
            depth,
            (4, depth),
            BITS,
        )
        .unwrap();
        assert!(r.order_holds);
        assert_eq!(r.apriori.d_a, DeficiencyValue::exact(int(0)));
        assert_eq!(r.d_p, 0);
        for (_, _, d) in r
            .differences
            .iter()
            .filter(|d| !d.0.contains("E") && !d.1.contains("E"))
        {
            assert_eq!(d.as_ref().unwrap(), &DeficiencyValue::exact(int(0)));
        }
    }

    #[test]
    fn chain_with_lifted_semimeasure() {
        let depth = 10;
        let m = DiscreteSemimeasure::new([(zeros(4), ratio(1, 2))]);
        let a = lift_discrete_to_continuous(std::slice::from_ref(&m), &Measure::Uniform, depth)
            .unwrap();
        let path = zeros(depth);
        let r = chain_report(
            &m,
            &a,
            &MLTest::empty(),
            &Measure::Uniform,
            &path,
            depth,
            (5, depth),
            BITS,
        )
        .unwrap();
        assert!(contains(&r.d_e.sup_form, int(3)));
        let slack = r.apriori.d_a.width() + r.d_e.sup_form.width();
        assert!(r.d_e.sup_form.le_within(&r.apriori.d_a, &slack));
        assert!(r.d_e.sup_form.le_within(&r.apriori.liminf, &slack));
        assert!(r.order_holds);
    }
}
