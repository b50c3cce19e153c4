//! Capital functions on the binary tree: (super/sub)martingale checks, the
//! universal supermartingale `a/μ`, the crossing construction `M^β_α`, and
//! the Fatou bound on `∫ liminf M`.
//!
//! A [`TreeFunction`] is stored sparsely. A node that is not stored takes
//! the value of its nearest stored ancestor if that ancestor is *held*, and
//! 0 otherwise. Holding is how frozen capital is represented without
//! materializing whole subtrees.

use std::collections::{BTreeMap, BTreeSet};

use num_traits::{Signed, Zero};
use serde::Serialize;

use crate::bits::BitString;
use crate::effective::ContinuousSemimeasure;
use crate::error::{LabError, Result};
use crate::measure::{Cursor, Measure};
use crate::rational::{format_rational, Rational};

#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct TreeFunction {
    values: BTreeMap<BitString, Rational>,
    hold: BTreeSet<BitString>,
    pub depth: usize,
}

impl TreeFunction {
    pub fn new(values: impl IntoIterator<Item = (BitString, Rational)>, depth: usize) -> Self {
        TreeFunction {
            values: values.into_iter().collect(),
            hold: BTreeSet::new(),
            depth,
        }
    }

    /// `v` at every node.
    pub fn constant(v: Rational, depth: usize) -> Self {
        let mut t = TreeFunction::new([(BitString::root(), v)], depth);
        t.hold.insert(BitString::root());
        t
    }

    pub fn set(&mut self, x: BitString, v: Rational) {
        self.values.insert(x, v);
    }

    /// Absent descendants of `x` inherit its value.
    pub fn hold(&mut self, x: BitString) {
        self.hold.insert(x);
    }

    pub fn is_held(&self, x: &BitString) -> bool {
        self.hold.contains(x)
    }

    pub fn stored(&self) -> impl Iterator<Item = (&BitString, &Rational, bool)> {
        self.values
            .iter()
            .map(|(x, v)| (x, v, self.hold.contains(x)))
    }

    pub fn value(&self, x: &BitString) -> Rational {
        if let Some(v) = self.values.get(x) {
            return v.clone();
        }
        let mut p = x.parent();
        while let Some(y) = p {
            if let Some(v) = self.values.get(&y) {
                return if self.hold.contains(&y) {
                    v.clone()
                } else {
                    Rational::zero()
                };
            }
            p = y.parent();
        }
        Rational::zero()
    }

    fn has_stored_descendant(&self, x: &BitString) -> bool {
        self.values
            .range(x.clone()..)
            .find(|(s, _)| *s != x)
            .is_some_and(|(s, _)| x.is_proper_prefix_of(s))
    }

    /// Whether every descendant of `x` carries `x`'s own value.
    pub fn constant_below(&self, x: &BitString) -> bool {
        if self.has_stored_descendant(x) {
            return false;
        }
        match self.values.get(x) {
            None => true,
            Some(v) => self.hold.contains(x) || v.is_zero(),
        }
    }

    /// Stored nodes and their ancestors.
    fn skeleton(&self) -> BTreeSet<BitString> {
        let mut out = BTreeSet::new();
        out.insert(BitString::root());
        for x in self.values.keys() {
            for p in x.prefixes() {
                out.insert(p);
            }
        }
        out
    }
}

/// Nodes that carry distinct information for a family of trees: every
/// skeleton node and the children of nodes that are not constant below,
/// cut at `depth`. Returned in preorder.
fn frontier(trees: &[&TreeFunction], depth: usize) -> Vec<BitString> {
    let mut nodes = BTreeSet::new();
    for t in trees {
        for x in t.skeleton() {
            if x.len() <= depth {
                nodes.insert(x);
            }
        }
    }
    let mut extra = Vec::new();
    for x in &nodes {
        if x.len() < depth && !trees.iter().all(|t| t.constant_below(x)) {
            extra.push(x.child(false));
            extra.push(x.child(true));
        }
    }
    nodes.extend(extra);
    nodes.into_iter().collect()
}

/// Visits `nodes` (preorder, closed under parents) with a measure cursor
/// positioned at each one.
fn with_cursors<'a>(
    mu: &'a Measure,
    nodes: &[BitString],
    mut f: impl FnMut(&BitString, &Cursor<'a>) -> Result<()>,
) -> Result<()> {
    let mut stack: Vec<Cursor<'a>> = Vec::new();
    for x in nodes {
        while stack
            .last()
            .is_some_and(|c| !c.stem().is_proper_prefix_of(x))
        {
            stack.pop();
        }
        let mut c = match stack.last() {
            Some(top) => top.clone(),
            None => mu.cursor()?,
        };
        for &b in &x.bits()[c.stem().len()..] {
            c.advance(b);
        }
        f(x, &c)?;
        stack.push(c);
    }
    Ok(())
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Kind {
    Martingale,
    Supermartingale,
    Submartingale,
    Unclassified,
}

/// Classification with the extreme signed slacks
/// `μ[x]M(x) - μ[x0]M(x0) - μ[x1]M(x1)`.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct TreeCheck {
    pub kind: Kind,
    #[serde(with = "crate::rational::serde_rational")]
    pub min_slack: Rational,
    pub min_at: BitString,
    #[serde(with = "crate::rational::serde_rational")]
    pub max_slack: Rational,
    pub max_at: BitString,
    pub nodes_checked: usize,
}

pub fn tree_validate(m: &TreeFunction, mu: &Measure) -> Result<TreeCheck> {
    for (x, v) in &m.values {
        if v.is_negative() {
            return Err(LabError::InvalidCapital {
                stem: x.to_string(),
                reason: format!("negative value {}", format_rational(v)),
            });
        }
    }
    let nodes = frontier(&[m], m.depth);
    let mut min = (Rational::zero(), BitString::root());
    let mut max = (Rational::zero(), BitString::root());
    let mut checked = 0;
    with_cursors(mu, &nodes, |x, c| {
        if x.len() >= m.depth || m.constant_below(x) {
            return Ok(());
        }
        let (c0, c1) = (c.child(false), c.child(true));
        let slack = c.mass() * m.value(x)
            - c0.mass() * m.value(&x.child(false))
            - c1.mass() * m.value(&x.child(true));
        checked += 1;
        if slack < min.0 {
            min = (slack.clone(), x.clone());
        }
        if slack > max.0 {
            max = (slack, x.clone());
        }
        Ok(())
    })?;
    let kind = match (min.0.is_negative(), max.0.is_positive()) {
        (false, false) => Kind::Martingale,
        (false, true) => Kind::Supermartingale,
        (true, false) => Kind::Submartingale,
        (true, true) => Kind::Unclassified,
    };
    Ok(TreeCheck {
        kind,
        min_slack: min.0,
        min_at: min.1,
        max_slack: max.0,
        max_at: max.1,
        nodes_checked: checked,
    })
}

fn require_supermartingale(m: &TreeFunction, mu: &Measure) -> Result<TreeCheck> {
    let check = tree_validate(m, mu)?;
    match check.kind {
        Kind::Martingale | Kind::Supermartingale => Ok(check),
        _ => Err(LabError::NotSupermartingale {
            stem: check.min_at.to_string(),
        }),
    }
}

/// `M = a/μ` on the stored nodes of `a`.
pub fn universal_from_semimeasure(a: &ContinuousSemimeasure, mu: &Measure) -> Result<TreeFunction> {
    let mut m = TreeFunction::new([], a.depth);
    for (x, w) in &a.weight {
        let mass = mu.exact_measure(x)?;
        if mass.is_zero() {
            return Err(LabError::ZeroMeasure {
                stem: x.to_string(),
            });
        }
        m.set(x.clone(), w / mass);
    }
    require_supermartingale(&m, mu)?;
    Ok(m)
}

/// `M · μ`, the inverse of [`universal_from_semimeasure`].
pub fn semimeasure_from_tree(m: &TreeFunction, mu: &Measure) -> Result<ContinuousSemimeasure> {
    let mut out = ContinuousSemimeasure::zero(m.depth);
    for (x, v) in &m.values {
        out.add(x, &(v * mu.exact_measure(x)?));
    }
    Ok(out)
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct WinCheck {
    pub wins: bool,
    /// Length of the shortest prefix attaining the maximum.
    pub argmax: usize,
    #[serde(with = "crate::rational::serde_rational")]
    pub max: Rational,
}

pub fn wins_check(m: &TreeFunction, path: &BitString, threshold: &Rational) -> Result<WinCheck> {
    if path.len() > m.depth {
        return Err(LabError::Domain(format!(
            "path of length {} exceeds depth {}",
            path.len(),
            m.depth
        )));
    }
    let mut best = (m.value(&BitString::root()), 0);
    for n in 1..=path.len() {
        let v = m.value(&path.prefix(n));
        if v > best.0 {
            best = (v, n);
        }
    }
    Ok(WinCheck {
        wins: &best.0 >= threshold,
        argmax: best.1,
        max: best.0,
    })
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct CrossingParams {
    pub alpha: Rational,
    pub beta: Rational,
    /// Traversal depth; capped by the input's own depth.
    pub depth: usize,
}

impl CrossingParams {
    pub fn new(alpha: Rational, beta: Rational, depth: usize) -> Result<Self> {
        if !alpha.is_positive() || alpha >= beta {
            return Err(LabError::Domain(
                "crossing parameters need 0 < alpha < beta".into(),
            ));
        }
        Ok(CrossingParams { alpha, beta, depth })
    }
}

/// One completed upcross: activation at `entry`, freeze at `exit`.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Upcross {
    pub entry: BitString,
    pub exit: BitString,
    #[serde(with = "crate::rational::serde_rational")]
    pub entry_value: Rational,
    #[serde(with = "crate::rational::serde_rational")]
    pub exit_value: Rational,
}

#[derive(Clone, Debug)]
pub struct Crossing {
    pub tree: TreeFunction,
    pub upcrosses: Vec<Upcross>,
}

#[derive(Clone, Debug)]
enum Mode {
    Frozen {
        cap: Rational,
    },
    Active {
        cap: Rational,
        entry_m: Rational,
        entry: BitString,
    },
}

/// Builds `M^β_α` with initial capital 1. In frozen mode the capital stays
/// put until `0 < M(x) < α`, which activates betting at `x`; while active
/// the capital is `cap · M(z)/M(x)`, and the first `z` with `M(z) > β`
/// freezes it again. Each completed segment multiplies the capital by
/// `M(z)/M(x) > β/α`.
pub fn doob_crossing_build(
    m: &TreeFunction,
    params: &CrossingParams,
    mu: &Measure,
) -> Result<Crossing> {
    require_supermartingale(m, mu)?;
    let depth = params.depth.min(m.depth);
    let nodes = frontier(&[m], depth);
    let mut out = TreeFunction::new([], depth);
    let mut upcrosses = Vec::new();
    let mut modes: BTreeMap<BitString, Mode> = BTreeMap::new();
    for x in &nodes {
        let incoming = match x.parent() {
            None => Mode::Frozen {
                cap: Rational::from_integer(1.into()),
            },
            Some(p) => modes[&p].clone(),
        };
        let mx = m.value(x);
        let (mode, value) = match incoming {
            Mode::Frozen { cap } => {
                if mx.is_positive() && mx < params.alpha {
                    (
                        Mode::Active {
                            cap: cap.clone(),
                            entry_m: mx,
                            entry: x.clone(),
                        },
                        cap,
                    )
                } else {
                    let v = cap.clone();
                    (Mode::Frozen { cap }, v)
                }
            }
            Mode::Active {
                cap,
                entry_m,
                entry,
            } => {
                let v = &cap * &mx / &entry_m;
                if mx > params.beta {
                    upcrosses.push(Upcross {
                        entry,
                        exit: x.clone(),
                        entry_value: cap,
                        exit_value: v.clone(),
                    });
                    (Mode::Frozen { cap: v.clone() }, v)
                } else {
                    (
                        Mode::Active {
                            cap,
                            entry_m,
                            entry,
                        },
                        v,
                    )
                }
            }
        };
        out.set(x.clone(), value);
        if x.len() >= depth || m.constant_below(x) {
            out.hold(x.clone());
        }
        modes.insert(x.clone(), mode);
    }
    require_supermartingale(&out, mu)?;
    Ok(Crossing {
        tree: out,
        upcrosses,
    })
}

/// `Σ_i w_i T_i` over a finite grid; weights must be non-negative.
pub fn weighted_sum(trees: &[(Rational, TreeFunction)]) -> Result<TreeFunction> {
    if trees.iter().any(|(w, _)| w.is_negative()) {
        return Err(LabError::Domain("negative weight".into()));
    }
    let depth = trees.iter().map(|(_, t)| t.depth).max().unwrap_or(0);
    let refs: Vec<&TreeFunction> = trees.iter().map(|(_, t)| t).collect();
    let mut out = TreeFunction::new([], depth);
    for x in frontier(&refs, depth) {
        let v: Rational = trees.iter().map(|(w, t)| w * t.value(&x)).sum();
        if refs.iter().all(|t| t.constant_below(&x)) {
            out.hold(x.clone());
        }
        out.set(x, v);
    }
    Ok(out)
}

/// `Σ M^β_α` over a user grid of `(α, β, weight)` triples with weights
/// summing to at most 1.
pub fn doob_grid(
    m: &TreeFunction,
    grid: &[(Rational, Rational, Rational)],
    depth: usize,
    mu: &Measure,
) -> Result<TreeFunction> {
    let total: Rational = grid.iter().map(|g| g.2.clone()).sum();
    if total > Rational::from_integer(1.into()) {
        return Err(LabError::Domain("grid weights exceed 1".into()));
    }
    let mut parts = Vec::new();
    for (a, b, w) in grid {
        let p = CrossingParams::new(a.clone(), b.clone(), depth)?;
        parts.push((w.clone(), doob_crossing_build(m, &p, mu)?.tree));
    }
    let sum = weighted_sum(&parts)?;
    require_supermartingale(&sum, mu)?;
    Ok(sum)
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct FatouReport {
    /// `∫ min_{n ∈ window} M(ω_{1..n}) dμ`.
    #[serde(with = "crate::rational::serde_rational")]
    pub integral: Rational,
    /// `min_{n ∈ window} Σ_{|x| = n} M(x) μ([x])`.
    #[serde(with = "crate::rational::serde_rational")]
    pub bound: Rational,
    pub window: (usize, usize),
    pub pass: bool,
}

pub fn fatou_estimate(
    m: &TreeFunction,
    mu: &Measure,
    window: (usize, usize),
) -> Result<FatouReport> {
    let (n0, n_max) = window;
    if n0 > n_max || n_max > m.depth {
        return Err(LabError::Domain(format!(
            "window [{n0}, {n_max}] must lie within depth {}",
            m.depth
        )));
    }
    let nodes = frontier(&[m], n_max);
    let mut level = vec![Rational::zero(); n_max + 1];
    let mut integral = Rational::zero();
    let mut running: BTreeMap<BitString, Option<Rational>> = BTreeMap::new();
    with_cursors(mu, &nodes, |x, c| {
        let v = m.value(x);
        let inherited = x.parent().and_then(|p| running[&p].clone());
        let run = if x.len() >= n0 {
            Some(inherited.map_or(v.clone(), |r| r.min(v.clone())))
        } else {
            inherited
        };
        let mass = c.mass();
        let leaf = x.len() == n_max || m.constant_below(x);
        if leaf {
            // Every deeper level up to n_max repeats v on this interval.
            for lv in level.iter_mut().take(n_max + 1).skip(x.len()) {
                *lv += &mass * &v;
            }
            let ahead = if x.len() < n_max {
                Some(v.clone())
            } else {
                None
            };
            let final_min = match (run.clone(), ahead) {
                (Some(r), Some(a)) => r.min(a),
                (Some(r), None) => r,
                (None, Some(a)) => a,
                (None, None) => Rational::zero(),
            };
            integral += &mass * final_min;
        } else {
            level[x.len()] += &mass * &v;
        }
        running.insert(x.clone(), run);
        Ok(())
    })?;
    // Leaves below a non-constant node were reached through the frontier, so
    // every interval of the depth-n_max partition is counted exactly once.
    let bound = level[n0..=n_max]
        .iter()
        .min()
        .cloned()
        .unwrap_or_else(Rational::zero);
    Ok(FatouReport {
        pass: integral <= bound,
        integral,
        bound,
        window,
    })
}
