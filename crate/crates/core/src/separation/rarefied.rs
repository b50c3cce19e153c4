//! The rarefied family `D_k ⊆ C_k` and the probability-bounded function
//! `g = Σ_k 1_{D_k} / (2 μD_k)` that no a priori deficiency can follow.

use num_traits::{One, Signed, Zero};
use serde::{Deserialize, Serialize};

use crate::bits::BitString;
use crate::deficiency::probability_bound_violation;
use crate::effective::BasicFunction;
use crate::enclosure::{certified_log2, log2_three, Enclosure};
use crate::error::{LabError, Result};
use crate::measure::{Measure, MeasureSpec};
use crate::rational::{floor_log2, int, pow2, Rational};

use super::heavy::HeavyBranchTrace;
use super::series::{trend_at, DivergenceTrend};

/// Largest working precision the constructions escalate to.
pub const MAX_LOG_BITS: u32 = 4096;

/// One retained cell `C_k` of the heavy-branch trace.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Cell {
    /// Original step index `k`.
    pub index: usize,
    pub stem: BitString,
    #[serde(with = "crate::rational::serde_rational")]
    pub mass: Rational,
    /// `τ(k)`, 1-based.
    pub rank: usize,
    pub d: Option<DInterval>,
}

/// `D_k` with the window data it was certified against.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DInterval {
    pub stem: BitString,
    #[serde(with = "crate::rational::serde_rational")]
    pub mass: Rational,
    /// Enclosure of `S_{τ(k)} log2 μC_k`, the log of the target.
    pub log_target: Enclosure,
    pub log_mass: Enclosure,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RarefiedFamily {
    /// Present whenever the measure has a serializable description.
    pub measure: Option<MeasureSpec>,
    pub bits: u32,
    /// Retained cells in original order; indices of zero cells are in `dropped`.
    pub cells: Vec<Cell>,
    pub dropped: Vec<usize>,
    /// `order[j]` is the position in `cells` of the `(j+1)`-th largest cell.
    pub order: Vec<usize>,
    /// `z_j = 3 / log2(1/μ𝐂_j)` by rank.
    pub z: Vec<Enclosure>,
    /// `S_j = 1 + Σ_{i≤j} z_i` by rank.
    pub s: Vec<Enclosure>,
}

impl RarefiedFamily {
    pub fn len(&self) -> usize {
        self.cells.len()
    }

    pub fn is_empty(&self) -> bool {
        self.cells.is_empty()
    }

    /// The cell of rank `j` (1-based).
    pub fn ranked(&self, j: usize) -> &Cell {
        &self.cells[self.order[j - 1]]
    }

    pub fn s_of(&self, cell: &Cell) -> &Enclosure {
        &self.s[cell.rank - 1]
    }

    /// `S_j` at the powers of two up to the family size.
    pub fn s_growth(&self) -> DivergenceTrend {
        let points: Vec<usize> = (0..)
            .map(|i| 1usize << i)
            .take_while(|&j| j <= self.len())
            .collect();
        let mut t = trend_at("S_j", &self.s, &points);
        t.pass = t.stall.is_none() && t.margins.iter().all(Enclosure::certainly_positive);
        t
    }

    fn fill_exponents(&mut self, bits: u32) -> Result<()> {
        let mut s = Enclosure::exact(Rational::one());
        self.z.clear();
        self.s.clear();
        for j in 1..=self.len() {
            let mass = &self.ranked(j).mass;
            if *mass >= Rational::one() {
                return Err(LabError::Domain(format!("cell of rank {j} has measure 1")));
            }
            let log = certified_log2(&mass.recip(), bits)?.enclosure;
            let z = Enclosure::exact(int(3)).div(&log)?.round_out(bits);
            s = s.add(&z).round_out(bits);
            self.z.push(z);
            self.s.push(s.clone());
        }
        self.bits = bits;
        Ok(())
    }
}

/// Ranks the non-null cells by decreasing measure, ties by index, and
/// computes `z_j` and `S_j`.
pub fn order_by_measure(
    trace: &HeavyBranchTrace,
    mu: &Measure,
    bits: u32,
) -> Result<RarefiedFamily> {
    let mut cells = Vec::new();
    let mut dropped = Vec::new();
    for k in 1..=trace.depth() {
        if trace.c(k).is_zero() {
            dropped.push(k);
        } else {
            cells.push(Cell {
                index: k,
                stem: trace.stem_c(k),
                mass: trace.c(k).clone(),
                rank: 0,
                d: None,
            });
        }
    }
    if cells.is_empty() {
        return Err(LabError::Domain("every C_k has measure zero".into()));
    }
    let mut order: Vec<usize> = (0..cells.len()).collect();
    order.sort_by(|&a, &b| {
        cells[b]
            .mass
            .cmp(&cells[a].mass)
            .then(cells[a].index.cmp(&cells[b].index))
    });
    for (j, &i) in order.iter().enumerate() {
        cells[i].rank = j + 1;
    }
    let mut family = RarefiedFamily {
        measure: mu.to_spec().ok(),
        bits,
        cells,
        dropped,
        order,
        z: Vec::new(),
        s: Vec::new(),
    };
    family.fill_exponents(bits)?;
    Ok(family)
}

enum Decision {
    Yes,
    No,
    Undecided,
}

/// Is `log2 m < L` for every point of the enclosure `L`? Bit lengths settle
/// most comparisons before a certified logarithm is needed.
fn below(m: &Rational, target: &Enclosure, bits: u32) -> Result<(Decision, Option<Enclosure>)> {
    let fl = int(floor_log2(m));
    if &(&fl + int(1)) <= target.lo() {
        return Ok((Decision::Yes, None));
    }
    if &fl >= target.hi() {
        return Ok((Decision::No, None));
    }
    let lm = certified_log2(m, bits)?.enclosure;
    let d = if lm.hi() < target.lo() {
        Decision::Yes
    } else if lm.lo() >= target.hi() {
        Decision::No
    } else {
        Decision::Undecided
    };
    Ok((d, Some(lm)))
}

fn construct_one(
    cell: &Cell,
    s: &Enclosure,
    mu: &Measure,
    budget: usize,
    bits: u32,
    log3: &Enclosure,
) -> Result<DInterval> {
    let log_c = certified_log2(&cell.mass, bits)?.enclosure;
    let log_target = s.mul(&log_c).round_out(bits);
    let mut walk = crate::measure::HeavyWalker::from_stem(mu, &cell.stem)?;
    let undecided = |what: String| LabError::Undecided { what, bits };
    loop {
        let m = walk.mass().clone();
        if m.is_zero() {
            return Err(LabError::ZeroMeasure {
                stem: walk.stem().to_string(),
            });
        }
        match below(&m, &log_target, bits)? {
            (Decision::Yes, _) => break,
            (Decision::No, _) => {}
            (Decision::Undecided, _) => {
                return Err(undecided(format!(
                    "mu[{}] < target of D_{}",
                    walk.stem(),
                    cell.index
                )));
            }
        }
        if walk.stem().len() >= budget {
            return Err(LabError::DepthBudgetExhausted {
                k: cell.index,
                budget,
            });
        }
        walk.step()?;
    }
    let mass = walk.mass().clone();
    let log_mass = certified_log2(&mass, bits)?.enclosure;
    // Lower edge of the window: log2 μD + log2 3 > S log2 μC.
    if log_mass.lo() + log3.lo() <= *log_target.hi() {
        return Err(undecided(format!("lower window edge of D_{}", cell.index)));
    }
    Ok(DInterval {
        stem: walk.stem().clone(),
        mass,
        log_target,
        log_mass,
    })
}

/// Builds every `D_k` by a heavy descent inside `C_k`, stopping at the first
/// stem whose measure is certainly below `(μC_k)^{S_τ(k)}`. The comparison is
/// made between logarithms; any undecided comparison restarts the whole
/// family at twice the precision, up to [`MAX_LOG_BITS`].
pub fn dk_construct(family: &mut RarefiedFamily, mu: &Measure, budget: usize) -> Result<()> {
    if !mu.is_exact() {
        return Err(LabError::Domain(
            "the rarefied family needs an exact measure".into(),
        ));
    }
    let mut bits = family.bits;
    loop {
        let log3 = log2_three(bits);
        let attempt: Result<Vec<DInterval>> = family
            .cells
            .iter()
            .map(|c| construct_one(c, family.s_of(c), mu, budget, bits, &log3))
            .collect();
        match attempt {
            Ok(ds) => {
                for (c, d) in family.cells.iter_mut().zip(ds) {
                    c.d = Some(d);
                }
                return Ok(());
            }
            Err(LabError::Undecided { .. }) if bits < MAX_LOG_BITS => {
                bits = (bits * 2).min(MAX_LOG_BITS);
                family.fill_exponents(bits)?;
            }
            Err(e) => return Err(e),
        }
    }
}

/// The window `(1/3) T < μD_k < T`, `T = (μC_k)^S`, re-checked at endpoints.
#[derive(Clone, Debug)]
pub struct WindowCheck {
    pub index: usize,
    pub upper: bool,
    pub lower: bool,
}

pub fn window_checks(family: &RarefiedFamily) -> Vec<WindowCheck> {
    let log3 = log2_three(family.bits);
    family
        .cells
        .iter()
        .filter_map(|c| {
            let d = c.d.as_ref()?;
            Some(WindowCheck {
                index: c.index,
                upper: d.log_mass.hi() < d.log_target.lo(),
                lower: d.log_mass.lo() + log3.lo() > *d.log_target.hi(),
            })
        })
        .collect()
}

/// `log2(𝐂_j^{S_j} / 𝐂_{j+1}^{S_{j+1}}) = 3 + S_j log2(μ𝐂_j/μ𝐂_{j+1})`, using
/// `z_{j+1} log2 μ𝐂_{j+1} = -3` exactly.
#[derive(Clone, Debug)]
pub struct RatioCheck {
    pub rank: usize,
    pub log_ratio: Enclosure,
    pub pass: bool,
}

pub fn ratio_checks(family: &RarefiedFamily) -> Result<Vec<RatioCheck>> {
    let mut out = Vec::new();
    for j in 1..family.len() {
        let q = &family.ranked(j).mass / &family.ranked(j + 1).mass;
        let log_ratio = if q < Rational::one() {
            return Ok(vec![RatioCheck {
                rank: j,
                log_ratio: Enclosure::exact(int(0)),
                pass: false,
            }]);
        } else if q.is_one() {
            Enclosure::exact(int(3))
        } else {
            family.s[j - 1]
                .mul(&certified_log2(&q, family.bits)?.enclosure)
                .add_exact(&int(3))
        };
        let pass = log_ratio.lo() >= &int(3);
        out.push(RatioCheck {
            rank: j,
            log_ratio,
            pass,
        });
    }
    Ok(out)
}

/// `μ{g > C}` against `1/C` at one grid point.
#[derive(Clone, Debug)]
pub struct LevelCheck {
    pub c: Rational,
    pub mass_above: Rational,
    pub pass: bool,
}

/// Checks `μ{g > C} < 1/C` on the level values of `g` and on `2^0..=2^max_exp`.
pub fn level_checks(g: &BasicFunction, mu: &Measure, max_exp: i64) -> Result<Vec<LevelCheck>> {
    let mut levels: Vec<(Rational, Rational)> = Vec::new();
    for (x, v) in g.pieces() {
        levels.push((v.clone(), mu.exact_measure(x)?));
    }
    levels.sort();
    let mut grid: Vec<Rational> = levels
        .iter()
        .map(|(v, _)| v.clone())
        .chain((0..=max_exp).map(pow2))
        .collect();
    grid.sort();
    grid.dedup();
    // Suffix sums of the mass strictly above each level.
    let mut suffix = vec![Rational::zero(); levels.len() + 1];
    for i in (0..levels.len()).rev() {
        suffix[i] = &suffix[i + 1] + &levels[i].1;
    }
    Ok(grid
        .into_iter()
        .map(|c| {
            let first_above = levels.partition_point(|(v, _)| *v <= c);
            let mass_above = suffix[first_above].clone();
            let pass = &mass_above * &c < Rational::one();
            LevelCheck {
                c,
                mass_above,
                pass,
            }
        })
        .collect())
}

#[derive(Clone, Debug)]
pub struct GReport {
    pub g: BasicFunction,
    pub levels: Vec<LevelCheck>,
    /// Value `v` with `v μ{g ≥ v} > 1`, from the left-limit criterion.
    pub left_limit_violation: Option<Rational>,
    /// First π-rank `j` with `μ𝐃_j < Σ_{μD_i < μ𝐃_j} μD_i`.
    pub dominance_failure: Option<usize>,
    pub pi_matches_tau: bool,
    /// `𝐃_j ⊆ 𝐂_j` for every rank.
    pub d_in_c: bool,
    pub windows: Vec<WindowCheck>,
    pub ratios: Vec<RatioCheck>,
}

impl GReport {
    pub fn pass(&self) -> bool {
        self.levels.iter().all(|l| l.pass)
            && self.left_limit_violation.is_none()
            && self.dominance_failure.is_none()
            && self.pi_matches_tau
            && self.d_in_c
            && self.windows.iter().all(|w| w.upper && w.lower)
            && self.ratios.iter().all(|r| r.pass)
    }
}

/// First index `j` (1-based, in decreasing order) where a mass is smaller
/// than the total of the strictly smaller masses.
fn dominance_failure(masses: &[Rational]) -> Option<usize> {
    let mut sorted: Vec<(usize, &Rational)> = masses.iter().enumerate().collect();
    sorted.sort_by(|a, b| b.1.cmp(a.1).then(a.0.cmp(&b.0)));
    let mut smaller = Rational::zero();
    let mut failure = None;
    let mut i = sorted.len();
    while i > 0 {
        let mut j = i;
        while j > 0 && sorted[j - 1].1 == sorted[i - 1].1 {
            j -= 1;
        }
        if sorted[i - 1].1 < &smaller {
            failure = Some(j + 1);
        }
        for (_, m) in &sorted[j..i] {
            smaller += *m;
        }
        i = j;
    }
    failure
}

/// Builds `g` over the constructed `D_k` and runs every level-set check.
pub fn g_build_general(family: &RarefiedFamily, mu: &Measure) -> Result<GReport> {
    let mut pieces = Vec::new();
    for c in &family.cells {
        let d =
            c.d.as_ref()
                .ok_or_else(|| LabError::Domain(format!("D_{} was not constructed", c.index)))?;
        pieces.push((d.stem.clone(), (&d.mass * int(2)).recip()));
    }
    let g = BasicFunction::new(pieces)?;
    let masses: Vec<Rational> = family
        .cells
        .iter()
        .map(|c| c.d.as_ref().unwrap().mass.clone())
        .collect();
    let mut pi: Vec<usize> = (0..family.len()).collect();
    pi.sort_by(|&a, &b| {
        masses[b]
            .cmp(&masses[a])
            .then(family.cells[a].index.cmp(&family.cells[b].index))
    });
    let pi_matches_tau = pi == family.order;
    let d_in_c = (1..=family.len()).all(|j| {
        let d = family.cells[pi[j - 1]].d.as_ref().unwrap();
        family.ranked(j).stem.is_prefix_of(&d.stem)
    });
    Ok(GReport {
        levels: level_checks(&g, mu, 40)?,
        left_limit_violation: probability_bound_violation(&g, mu)?,
        dominance_failure: dominance_failure(&masses),
        pi_matches_tau,
        d_in_c,
        windows: window_checks(family),
        ratios: ratio_checks(family)?,
        g,
    })
}

#[derive(Clone, Debug)]
pub struct UniformGReport {
    pub g: BasicFunction,
    pub levels: Vec<LevelCheck>,
    pub left_limit_violation: Option<Rational>,
    /// Partial sums of `Σ 1/(2(2k-1))`.
    pub series: DivergenceTrend,
}

impl UniformGReport {
    pub fn pass(&self) -> bool {
        self.levels.iter().all(|l| l.pass)
            && self.left_limit_violation.is_none()
            && self.series.pass
    }
}

/// `g = Σ_{k≤k_max} 2^{2k-1} 1_{[0^k 1^k]}` under the uniform measure, with
/// the lower-bound series summed to `2 · series_terms`.
pub fn g_uniform_case(k_max: usize, series_terms: usize, bits: u32) -> Result<UniformGReport> {
    let pieces = (1..=k_max).map(|k| {
        let stem = BitString::repeat(false, k).concat(&BitString::repeat(true, k));
        (stem, pow2(2 * k as i64 - 1))
    });
    let g = BasicFunction::new(pieces)?;
    let mu = Measure::Uniform;
    let mut partial = Enclosure::zero();
    let mut partials = Vec::with_capacity(2 * series_terms);
    for k in 1..=2 * series_terms as i64 {
        partial = partial
            .add_exact(&Rational::new(1.into(), (2 * (2 * k - 1)).into()))
            .round_out(bits);
        partials.push(partial.clone());
    }
    Ok(UniformGReport {
        levels: level_checks(&g, &mu, 40)?,
        left_limit_violation: probability_bound_violation(&g, &mu)?,
        series: super::series::trend("sum 1/(2(2k-1))", &partials, series_terms),
        g,
    })
}

/// True when every entry of `masses` is at least the total of the smaller ones.
pub fn dominates(masses: &[Rational]) -> bool {
    dominance_failure(masses).is_none() && masses.iter().all(|m| !m.is_negative())
}
