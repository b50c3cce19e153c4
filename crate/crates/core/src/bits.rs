//! Finite binary strings, the intervals `[x]` they name, and canonical
//! finite unions of intervals.

use std::collections::BTreeSet;
use std::fmt;
use std::str::FromStr;

use crate::error::LabError;

/// A finite binary string. The empty string names the whole space.
///
/// Ordering is lexicographic with a prefix sorting before its extensions,
/// which is exactly depth-first preorder on the binary tree.
#[derive(Clone, Default, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct BitString(Vec<bool>);

impl BitString {
    pub fn root() -> Self {
        BitString(Vec::new())
    }

    pub fn from_bits(bits: impl IntoIterator<Item = bool>) -> Self {
        BitString(bits.into_iter().collect())
    }

    /// `bit` repeated `n` times.
    pub fn repeat(bit: bool, n: usize) -> Self {
        BitString(vec![bit; n])
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn bits(&self) -> &[bool] {
        &self.0
    }

    pub fn bit(&self, i: usize) -> bool {
        self.0[i]
    }

    pub fn push(&mut self, bit: bool) {
        self.0.push(bit);
    }

    pub fn child(&self, bit: bool) -> Self {
        let mut v = self.0.clone();
        v.push(bit);
        BitString(v)
    }

    pub fn sibling(&self) -> Option<Self> {
        let mut v = self.0.clone();
        let last = v.pop()?;
        v.push(!last);
        Some(BitString(v))
    }

    pub fn parent(&self) -> Option<Self> {
        if self.0.is_empty() {
            None
        } else {
            Some(BitString(self.0[..self.0.len() - 1].to_vec()))
        }
    }

    pub fn prefix(&self, n: usize) -> Self {
        BitString(self.0[..n].to_vec())
    }

    pub fn concat(&self, other: &BitString) -> Self {
        let mut v = self.0.clone();
        v.extend_from_slice(&other.0);
        BitString(v)
    }

    /// `self ⪯ other`: `self` is a prefix of `other` (or equal).
    pub fn is_prefix_of(&self, other: &BitString) -> bool {
        other.0.len() >= self.0.len() && other.0[..self.0.len()] == self.0[..]
    }

    pub fn is_proper_prefix_of(&self, other: &BitString) -> bool {
        self.0.len() < other.0.len() && self.is_prefix_of(other)
    }

    pub fn comparable(&self, other: &BitString) -> bool {
        self.is_prefix_of(other) || other.is_prefix_of(self)
    }

    /// All prefixes from the root up to and including `self`.
    pub fn prefixes(&self) -> impl Iterator<Item = BitString> + '_ {
        (0..=self.0.len()).map(move |n| self.prefix(n))
    }

    pub fn count_ones(&self) -> usize {
        self.0.iter().filter(|b| **b).count()
    }
}

impl fmt::Display for BitString {
    /// The root is written `-` so that it survives whitespace-separated
    /// file formats.
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.0.is_empty() {
            return f.write_str("-");
        }
        let s: String = self.0.iter().map(|b| if *b { '1' } else { '0' }).collect();
        f.write_str(&s)
    }
}

impl fmt::Debug for BitString {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "BitString({self})")
    }
}

impl FromStr for BitString {
    type Err = LabError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let s = s.trim();
        if s == "-" || s.is_empty() {
            return Ok(BitString::root());
        }
        s.chars()
            .enumerate()
            .map(|(i, c)| match c {
                '0' => Ok(false),
                '1' => Ok(true),
                _ => Err(LabError::parse(0, i + 1, format!("bad bit {c:?} in {s:?}"))),
            })
            .collect::<Result<Vec<_>, _>>()
            .map(BitString)
    }
}

impl serde::Serialize for BitString {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&self.to_string())
    }
}

impl<'de> serde::Deserialize<'de> for BitString {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

/// The interval `[x]`: all infinite extensions of `x`.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Interval {
    pub stem: BitString,
}

impl Interval {
    pub fn new(stem: BitString) -> Self {
        Interval { stem }
    }

    pub fn whole() -> Self {
        Interval {
            stem: BitString::root(),
        }
    }

    /// `[self] ⊆ [other]`.
    pub fn is_subset_of(&self, other: &Interval) -> bool {
        other.stem.is_prefix_of(&self.stem)
    }

    pub fn halves(&self) -> (Interval, Interval) {
        (
            Interval::new(self.stem.child(false)),
            Interval::new(self.stem.child(true)),
        )
    }

    pub fn is_disjoint(&self, other: &Interval) -> bool {
        !self.stem.comparable(&other.stem)
    }
}

/// True when no stem is a prefix of (or equal to) another.
pub fn is_prefix_free<'a>(stems: impl IntoIterator<Item = &'a BitString>) -> bool {
    let mut v: Vec<&BitString> = stems.into_iter().collect();
    v.sort();
    v.windows(2).all(|w| !w[0].is_prefix_of(w[1]))
}

/// First pair `(a, b)` with `a ⪯ b`, if any.
pub fn prefix_violation<'a>(
    stems: impl IntoIterator<Item = &'a BitString>,
) -> Option<(BitString, BitString)> {
    let mut v: Vec<&BitString> = stems.into_iter().collect();
    v.sort();
    v.windows(2)
        .find(|w| w[0].is_prefix_of(w[1]))
        .map(|w| (w[0].clone(), w[1].clone()))
}

/// A finite union of intervals kept in canonical form: prefix-free, with
/// sibling pairs `[x0] ∪ [x1]` merged into `[x]`. In that form `[y]` is
/// covered by the union iff some member is a prefix of `y`.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct StemSet {
    stems: BTreeSet<BitString>,
}

impl StemSet {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn from_stems(stems: impl IntoIterator<Item = BitString>) -> Self {
        let mut s = StemSet::new();
        for x in stems {
            s.insert(x);
        }
        s
    }

    pub fn len(&self) -> usize {
        self.stems.len()
    }

    pub fn is_empty(&self) -> bool {
        self.stems.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = &BitString> {
        self.stems.iter()
    }

    pub fn covers(&self, y: &BitString) -> bool {
        y.prefixes().any(|p| self.stems.contains(&p))
    }

    pub fn insert(&mut self, x: BitString) {
        if self.covers(&x) {
            return;
        }
        let extensions: Vec<BitString> = self
            .stems
            .range(x.clone()..)
            .take_while(|s| x.is_prefix_of(s))
            .cloned()
            .collect();
        for e in extensions {
            self.stems.remove(&e);
        }
        let mut x = x;
        while let Some(sib) = x.sibling() {
            if self.stems.remove(&sib) {
                x = x.parent().expect("non-root has a parent");
            } else {
                break;
            }
        }
        self.stems.insert(x);
    }

    pub fn union_with(&mut self, other: &StemSet) {
        for x in other.iter() {
            self.insert(x.clone());
        }
    }

    pub fn is_subset_of(&self, other: &StemSet) -> bool {
        self.stems.iter().all(|x| other.covers(x))
    }
}
