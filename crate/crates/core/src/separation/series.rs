//! Divergent-series audits: partial sums at doubling checkpoints and the
//! telescoping identities behind `Σ c_k / (R_k log(1/R_k)) = ∞`.

use std::collections::HashMap;

use num_traits::{One, Signed, Zero};

use crate::enclosure::{certified_log2, Enclosure};
use crate::error::{LabError, Result};
use crate::rational::{int, pow, ratio, Rational};

use super::heavy::{sampled, HeavyBranchTrace};

/// A partial-sum sequence sampled at `K/8, K/4, K/2, K, 2K`.
#[derive(Clone, Debug)]
pub struct DivergenceTrend {
    pub name: String,
    pub checkpoints: Vec<(usize, Enclosure)>,
    /// `partial(next) - partial(this)` between consecutive checkpoints.
    pub margins: Vec<Enclosure>,
    /// First index whose partial sum did not certainly exceed its predecessor.
    pub stall: Option<usize>,
    pub pass: bool,
}

impl DivergenceTrend {
    pub fn partial_at(&self, k: usize) -> Option<&Enclosure> {
        self.checkpoints
            .iter()
            .find(|(j, _)| *j == k)
            .map(|(_, e)| e)
    }

    /// Margin from `K` to `2K`.
    pub fn last_margin(&self) -> Option<&Enclosure> {
        self.margins.last()
    }
}

/// Checkpoints `K/8, K/4, K/2, K, 2K` for a run of `2K` terms.
pub fn checkpoints(terms: usize) -> Vec<usize> {
    vec![terms / 8, terms / 4, terms / 2, terms, 2 * terms]
}

/// Builds a trend from `partials[k-1] = Σ_{n≤k}` over the checkpoints of
/// `terms`. Checkpoints past the end of `partials` are left out.
pub fn trend(name: &str, partials: &[Enclosure], terms: usize) -> DivergenceTrend {
    let points: Vec<usize> = checkpoints(terms)
        .into_iter()
        .filter(|&k| k >= 1 && k <= partials.len())
        .collect();
    trend_at(name, partials, &points)
}

pub fn trend_at(name: &str, partials: &[Enclosure], points: &[usize]) -> DivergenceTrend {
    let stall = (1..partials.len()).find(|&i| !partials[i - 1].certainly_lt(&partials[i]));
    let checkpoints: Vec<(usize, Enclosure)> = points
        .iter()
        .map(|&k| (k, partials[k - 1].clone()))
        .collect();
    let margins: Vec<Enclosure> = checkpoints
        .windows(2)
        .map(|w| w[1].1.sub(&w[0].1))
        .collect();
    let pass =
        stall.is_none() && margins.len() >= 4 && margins.iter().all(Enclosure::certainly_positive);
    DivergenceTrend {
        name: name.into(),
        checkpoints,
        margins,
        stall,
        pass,
    }
}

/// Where the terms `c_k` and tails `R_k = Σ_{n>k} c_n` come from.
#[derive(Clone, Debug)]
pub enum SeriesSource {
    /// `c_k = (1 - r) r^(k-1)`, `R_k = r^k`.
    Geometric { ratio: Rational },
    /// `c_k = 1/(k(k+1))`, `R_k = 1/(k+1)`.
    HarmonicTail,
    /// Explicit `(c_k, R_k)` for `k = 1, 2, ...`; `R_0 = R_1 + c_1`.
    Custom { pairs: Vec<(Rational, Rational)> },
}

impl SeriesSource {
    pub fn halving() -> Self {
        SeriesSource::Geometric { ratio: ratio(1, 2) }
    }

    /// The heavy-branch cells: `c_k = μ(C_k)` with tails `R_k = μ(B_k)`.
    pub fn from_trace(trace: &HeavyBranchTrace) -> Self {
        let pairs = (1..=trace.depth())
            .map(|k| (trace.c(k).clone(), trace.b(k).clone()))
            .collect();
        SeriesSource::Custom { pairs }
    }

    pub fn label(&self) -> String {
        match self {
            SeriesSource::Geometric { ratio } => format!("geometric({ratio})"),
            SeriesSource::HarmonicTail => "harmonic-tail".into(),
            SeriesSource::Custom { pairs } => format!("custom({} terms)", pairs.len()),
        }
    }

    fn len(&self) -> Option<usize> {
        match self {
            SeriesSource::Custom { pairs } => Some(pairs.len()),
            _ => None,
        }
    }

    fn validate(&self) -> Result<()> {
        match self {
            SeriesSource::Geometric { ratio }
                if !(ratio.is_positive() && *ratio < Rational::one()) =>
            {
                Err(LabError::InvalidSeries {
                    k: 0,
                    reason: format!("ratio {ratio} outside (0, 1)"),
                })
            }
            SeriesSource::Custom { pairs } if pairs.is_empty() => Err(LabError::InvalidSeries {
                k: 1,
                reason: "no terms".into(),
            }),
            _ => Ok(()),
        }
    }

    /// Exact `(c_k, R_k)`; `k = 0` yields `(0, R_0)`.
    fn exact(&self, k: usize) -> (Rational, Rational) {
        match self {
            SeriesSource::Geometric { ratio } if k == 0 => (Rational::zero(), Rational::one()),
            SeriesSource::Geometric { ratio } => {
                let prev = pow(ratio, k as u32 - 1);
                ((Rational::one() - ratio) * &prev, prev * ratio)
            }
            SeriesSource::HarmonicTail => {
                let k = k as i64;
                let c = if k == 0 {
                    Rational::zero()
                } else {
                    Rational::new(1.into(), (k * (k + 1)).into())
                };
                (c, Rational::new(1.into(), (k + 1).into()))
            }
            SeriesSource::Custom { pairs } if k == 0 => {
                (Rational::zero(), &pairs[0].0 + &pairs[0].1)
            }
            SeriesSource::Custom { pairs } => pairs[k - 1].clone(),
        }
    }

    /// `z_k = c_k/R_k` and an enclosure of `log2(1/R_k)`, from closed forms
    /// where they exist so that no `k`-sized rational is formed.
    fn streamed(
        &self,
        k: usize,
        bits: u32,
        log_ratio: &Option<Enclosure>,
    ) -> Result<(Rational, Enclosure)> {
        match self {
            SeriesSource::Geometric { ratio } => {
                let z = (Rational::one() - ratio) / ratio;
                let log = log_ratio
                    .as_ref()
                    .expect("cached for geometric sources")
                    .scale(&int(k as i64));
                Ok((z, log.round_out(bits)))
            }
            SeriesSource::HarmonicTail => {
                let z = Rational::new(1.into(), (k as i64).into());
                Ok((z, certified_log2(&int(k as i64 + 1), bits)?.enclosure))
            }
            SeriesSource::Custom { pairs } => {
                let (c, r) = &pairs[k - 1];
                if !c.is_positive() {
                    return Err(LabError::InvalidSeries {
                        k,
                        reason: format!("term {c} is not positive"),
                    });
                }
                if !r.is_positive() {
                    return Err(LabError::InvalidSeries {
                        k,
                        reason: format!("tail {r} is not positive"),
                    });
                }
                Ok((c / r, certified_log2(&r.recip(), bits)?.enclosure))
            }
        }
    }
}

/// One sampled row of the audit table.
#[derive(Clone, Debug)]
pub struct SeriesRow {
    pub k: usize,
    pub c: Rational,
    pub r: Rational,
    pub term: Enclosure,
    pub partial: Enclosure,
}

/// The proof identities at one checkpoint.
#[derive(Clone, Debug)]
pub struct IdentityCheck {
    pub k: usize,
    /// `1/R_k = (1/R_0) Π (1 + z_n)`, exactly.
    pub product: bool,
    /// `log2(1/R_k)` against `log2(1/R_0) + Σ log2(1 + z_n)`.
    pub log_lhs: Enclosure,
    pub log_rhs: Enclosure,
    pub log: bool,
    /// `S_k` against `S_1 Π_{n<k} (1 + z_{n+1}/S_n)`.
    pub b_product: bool,
}

impl IdentityCheck {
    pub fn pass(&self) -> bool {
        self.product && self.log && self.b_product
    }
}

#[derive(Clone, Debug)]
pub struct SeriesReport {
    pub label: String,
    pub terms: usize,
    pub rows: Vec<SeriesRow>,
    /// `Σ c_k / R_k`.
    pub z_sum: DivergenceTrend,
    /// `Σ c_k / (R_k log2(1/R_k))`.
    pub weighted: DivergenceTrend,
    /// `Σ z_k / S_k`.
    pub normalized: DivergenceTrend,
    pub identities: Vec<IdentityCheck>,
    /// First `k` with `R_{k-1} != R_k + c_k`.
    pub tail_failure: Option<usize>,
}

impl SeriesReport {
    pub fn pass(&self) -> bool {
        self.tail_failure.is_none()
            && self.z_sum.pass
            && self.weighted.pass
            && self.normalized.pass
            && self.identities.iter().all(IdentityCheck::pass)
    }

    pub fn trends(&self) -> [&DivergenceTrend; 3] {
        [&self.z_sum, &self.weighted, &self.normalized]
    }
}

/// Runs `2K` terms of the series. Partial sums stream through closed forms;
/// the exact identities are checked on every term of a custom series and on
/// the sampled terms of a closed-form one.
pub fn series_divergence_audit(
    source: &SeriesSource,
    terms: usize,
    bits: u32,
) -> Result<SeriesReport> {
    if terms < 8 {
        return Err(LabError::Domain(
            "the divergence checkpoints need at least 8 terms".into(),
        ));
    }
    source.validate()?;
    let last = 2 * terms;
    if let Some(n) = source.len() {
        if n < last {
            return Err(LabError::InvalidSeries {
                k: n + 1,
                reason: format!("{n} terms supplied, {last} needed"),
            });
        }
    }
    let marks = checkpoints(terms);
    let exhaustive = matches!(source, SeriesSource::Custom { .. });
    let (_, r0) = source.exact(0);
    if !r0.is_positive() {
        return Err(LabError::InvalidSeries {
            k: 0,
            reason: "R_0 must be positive".into(),
        });
    }
    let log_r0 = certified_log2(&r0.recip(), bits)?.enclosure;
    // Extra bits absorb the factor k in k log2(1/r).
    let log_ratio = match source {
        SeriesSource::Geometric { ratio } => {
            Some(certified_log2(&ratio.recip(), bits + 24)?.enclosure)
        }
        _ => None,
    };
    let mut logs: HashMap<Rational, Enclosure> = HashMap::new();

    let mut r_prev = r0.clone();
    let mut product = r0.recip();
    let mut log_sum = Enclosure::zero();
    let mut s = Enclosure::zero();
    let mut b_product = Enclosure::zero();
    let (mut z_partial, mut w_partial, mut b_partial) =
        (Enclosure::zero(), Enclosure::zero(), Enclosure::zero());
    let mut partials: [Vec<Enclosure>; 3] = Default::default();
    let mut rows = Vec::new();
    let mut identities = Vec::new();
    let mut tail_failure = None;

    for k in 1..=last {
        let (z, log_r) = source.streamed(k, bits, &log_ratio)?;
        if !log_r.certainly_positive() {
            return Err(LabError::InvalidSeries {
                k,
                reason: "tail >= 1 has no positive log2(1/R_k)".into(),
            });
        }
        let keep = sampled(k, terms);
        if exhaustive || keep {
            let (c, r) = source.exact(k);
            if !exhaustive {
                r_prev = source.exact(k - 1).1;
            }
            // R_{k-1} = R_k + c_k, equivalently z_k = R_{k-1}/R_k - 1.
            if tail_failure.is_none() && (r_prev != &r + &c || z != &r_prev / &r - Rational::one())
            {
                tail_failure = Some(k);
            }
            if keep {
                rows.push(SeriesRow {
                    k,
                    c,
                    r: r.clone(),
                    term: Enclosure::zero(),
                    partial: Enclosure::zero(),
                });
            }
            r_prev = r;
        }
        let z_enc = Enclosure::exact(z.clone());
        let growth = Rational::one() + &z;
        // A constant ratio would make this running product a k-bit number.
        if !matches!(source, SeriesSource::Geometric { .. }) {
            product *= &growth;
        }
        let log_growth = match logs.get(&growth) {
            Some(e) => e.clone(),
            None => {
                let e = certified_log2(&growth, bits)?.enclosure;
                if logs.len() < 64 {
                    logs.insert(growth.clone(), e.clone());
                }
                e
            }
        };
        log_sum = log_sum.add(&log_growth).round_out(bits);

        // b-phase: S_k = Σ_{n≤k} z_n and S_k = S_1 Π_{n<k} (1 + z_{n+1}/S_n).
        b_product = if k == 1 {
            z_enc.clone()
        } else {
            b_product
                .mul(&z_enc.div_round(&s, bits)?.add_exact(&int(1)))
                .round_out(bits)
        };
        s = s.add(&z_enc).round_out(bits);
        let b = z_enc.div_round(&s, bits)?;

        let term = z_enc.div_round(&log_r, bits)?;
        z_partial = z_partial.add_exact(&z).round_out(bits);
        w_partial = w_partial.add(&term).round_out(bits);
        b_partial = b_partial.add(&b).round_out(bits);
        partials[0].push(z_partial.clone());
        partials[1].push(w_partial.clone());
        partials[2].push(b_partial.clone());

        if keep {
            let row = rows.last_mut().expect("pushed above");
            row.term = term;
            row.partial = w_partial.clone();
        }
        if marks.contains(&k) {
            let log_rhs = log_r0.add(&log_sum);
            identities.push(IdentityCheck {
                k,
                product: match source {
                    SeriesSource::Geometric { .. } => {
                        &r0.recip() * pow(&growth, k as u32) == r_prev.recip()
                    }
                    _ => product == r_prev.recip(),
                },
                log: log_r.overlaps(&log_rhs),
                log_lhs: log_r.clone(),
                log_rhs,
                b_product: b_product.overlaps(&s),
            });
        }
    }
    let [zp, wp, bp] = partials;
    Ok(SeriesReport {
        label: source.label(),
        terms,
        rows,
        z_sum: trend("sum c/R", &zp, terms),
        weighted: trend("sum c/(R log2(1/R))", &wp, terms),
        normalized: trend("sum z/S", &bp, terms),
        identities,
        tail_failure,
    })
}
