//! Line-oriented text formats for semimeasures, capital functions,
//! Martin-Löf tests, machine programs and custom series.
//!
//! Every format shares the same lexical rules: blank lines and lines whose
//! first non-blank character is `#` are ignored, fields are separated by
//! whitespace, the empty string is written `-`, and rationals are `p/q`.
//! Errors carry the 1-based line and column of the offending field.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use crate::bits::BitString;
use crate::deficiency::MLTest;
use crate::effective::{ContinuousSemimeasure, DiscreteSemimeasure, Program, State};
use crate::error::{LabError, Result};
use crate::martingale::TreeFunction;
use crate::rational::{format_rational, parse_rational, Rational};
use crate::separation::{RarefiedFamily, SeriesSource};

/// One whitespace-separated field and its 1-based column.
#[derive(Clone, Copy, Debug)]
struct Field<'a> {
    text: &'a str,
    line: usize,
    column: usize,
}

impl Field<'_> {
    fn error(&self, message: impl Into<String>) -> LabError {
        LabError::parse(self.line, self.column, message)
    }

    /// Shifts an error raised inside the field to its absolute position.
    fn locate(&self, e: LabError) -> LabError {
        match e {
            LabError::Parse {
                column, message, ..
            } => LabError::parse(self.line, self.column + column.saturating_sub(1), message),
            other => self.error(other.to_string()),
        }
    }

    fn stem(&self) -> Result<BitString> {
        self.text.parse().map_err(|e| self.locate(e))
    }

    fn rational(&self) -> Result<Rational> {
        parse_rational(self.text).map_err(|e| self.locate(e))
    }

    fn count(&self) -> Result<usize> {
        self.text.parse().map_err(|_| {
            self.error(format!(
                "expected a non-negative integer, found {:?}",
                self.text
            ))
        })
    }
}

/// The non-comment lines of `text`, split into fields.
fn records(text: &str) -> impl Iterator<Item = (usize, Vec<Field<'_>>)> {
    text.lines().enumerate().filter_map(|(i, raw)| {
        let line = i + 1;
        let trimmed = raw.trim_start();
        if trimmed.is_empty() || trimmed.starts_with('#') {
            return None;
        }
        let mut fields = Vec::new();
        let mut start = None;
        for (j, c) in raw.char_indices().chain([(raw.len(), ' ')]) {
            match (c.is_whitespace(), start) {
                (false, None) => start = Some(j),
                (true, Some(s)) => {
                    let column = raw[..s].chars().count() + 1;
                    fields.push(Field {
                        text: &raw[s..j],
                        line,
                        column,
                    });
                    start = None;
                }
                _ => {}
            }
        }
        Some((line, fields))
    })
}

fn arity(line: usize, fields: &[Field<'_>], allowed: &[usize], what: &str) -> Result<()> {
    if allowed.contains(&fields.len()) {
        return Ok(());
    }
    let column = fields
        .get(allowed.iter().copied().max().unwrap_or(0))
        .map_or(1, |f| f.column);
    Err(LabError::parse(
        line,
        column,
        format!(
            "{what}: expected {allowed:?} fields, found {}",
            fields.len()
        ),
    ))
}

/// `depth N` directive, if this record is one.
fn depth_directive(line: usize, fields: &[Field<'_>]) -> Result<Option<usize>> {
    if fields[0].text != "depth" {
        return Ok(None);
    }
    arity(line, fields, &[2], "depth directive")?;
    fields[1].count().map(Some)
}

/// Weighted stems with an optional `depth N` directive.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct WeightFile {
    pub entries: Vec<(BitString, Rational)>,
    pub depth: Option<usize>,
}

impl WeightFile {
    pub fn parse(text: &str) -> Result<Self> {
        let mut out = WeightFile::default();
        let mut seen = BTreeMap::new();
        for (line, fields) in records(text) {
            if let Some(d) = depth_directive(line, &fields)? {
                out.depth = Some(d);
                continue;
            }
            arity(line, &fields, &[2], "weight line")?;
            let stem = fields[0].stem()?;
            if let Some(first) = seen.insert(stem.clone(), line) {
                return Err(fields[0].error(format!("stem {stem} already given on line {first}")));
            }
            out.entries.push((stem, fields[1].rational()?));
        }
        Ok(out)
    }

    pub fn discrete(&self) -> DiscreteSemimeasure {
        DiscreteSemimeasure::new(self.entries.iter().cloned())
    }

    /// Depth defaults to the longest stem listed.
    pub fn continuous(&self) -> ContinuousSemimeasure {
        let longest = self.entries.iter().map(|(x, _)| x.len()).max().unwrap_or(0);
        ContinuousSemimeasure::new(self.entries.iter().cloned(), self.depth.unwrap_or(longest))
    }

    pub fn render(&self) -> String {
        let mut s = String::new();
        if let Some(d) = self.depth {
            writeln!(s, "depth {d}").unwrap();
        }
        for (x, w) in &self.entries {
            writeln!(s, "{x} {}", format_rational(w)).unwrap();
        }
        s
    }
}

pub fn parse_discrete(text: &str) -> Result<DiscreteSemimeasure> {
    WeightFile::parse(text).map(|w| w.discrete())
}

pub fn parse_continuous(text: &str) -> Result<ContinuousSemimeasure> {
    WeightFile::parse(text).map(|w| w.continuous())
}

pub fn render_continuous(a: &ContinuousSemimeasure) -> String {
    WeightFile {
        entries: a
            .weight
            .iter()
            .map(|(x, w)| (x.clone(), w.clone()))
            .collect(),
        depth: Some(a.depth),
    }
    .render()
}

/// `stem value [hold]` lines plus an optional `depth N`; a trailing `hold`
/// freezes the value on every extension of the stem.
pub fn parse_tree(text: &str) -> Result<TreeFunction> {
    let mut values = Vec::new();
    let mut held = Vec::new();
    let mut depth = None;
    for (line, fields) in records(text) {
        if let Some(d) = depth_directive(line, &fields)? {
            depth = Some(d);
            continue;
        }
        arity(line, &fields, &[2, 3], "capital line")?;
        let stem = fields[0].stem()?;
        if let Some(flag) = fields.get(2) {
            if flag.text != "hold" {
                return Err(flag.error(format!("expected `hold`, found {:?}", flag.text)));
            }
            held.push(stem.clone());
        }
        values.push((stem, fields[1].rational()?));
    }
    let longest = values.iter().map(|(x, _)| x.len()).max().unwrap_or(0);
    let mut tree = TreeFunction::new(values, depth.unwrap_or(longest));
    for x in held {
        tree.hold(x);
    }
    Ok(tree)
}

pub fn render_tree(m: &TreeFunction) -> String {
    let mut s = format!("depth {}\n", m.depth);
    for (x, v, held) in m.stored() {
        let flag = if held { " hold" } else { "" };
        writeln!(s, "{x} {}{flag}", format_rational(v)).unwrap();
    }
    s
}

/// `level stem` lines; levels are 1-based and may be listed in any order.
pub fn parse_test(text: &str) -> Result<MLTest> {
    let mut levels: Vec<Vec<BitString>> = Vec::new();
    for (line, fields) in records(text) {
        arity(line, &fields, &[2], "test line")?;
        let n = fields[0].count()?;
        if n == 0 {
            return Err(fields[0].error("levels start at 1"));
        }
        if levels.len() < n {
            levels.resize(n, Vec::new());
        }
        levels[n - 1].push(fields[1].stem()?);
    }
    Ok(MLTest::new(levels))
}

pub fn render_test(test: &MLTest) -> String {
    let mut s = String::new();
    for (i, level) in test.levels().iter().enumerate() {
        for x in level.iter() {
            writeln!(s, "{} {x}", i + 1).unwrap();
        }
    }
    s
}

/// `start id` and `state id p0 next0 p1 next1` lines.
pub fn parse_program(text: &str) -> Result<Program> {
    let mut start = None;
    let mut states = BTreeMap::new();
    for (line, fields) in records(text) {
        match fields[0].text {
            "start" => {
                arity(line, &fields, &[2], "start line")?;
                start = Some(fields[1].count()?);
            }
            "state" => {
                arity(line, &fields, &[6], "state line")?;
                let id = fields[1].count()?;
                let state = State {
                    p0: fields[2].rational()?,
                    next0: fields[3].count()?,
                    p1: fields[4].rational()?,
                    next1: fields[5].count()?,
                };
                if states.insert(id, state).is_some() {
                    return Err(fields[1].error(format!("state {id} defined twice")));
                }
            }
            other => {
                return Err(fields[0].error(format!("expected `start` or `state`, found {other:?}")))
            }
        }
    }
    let start = start.ok_or_else(|| LabError::parse(1, 1, "missing `start` line"))?;
    let program = Program { start, states };
    program.validate()?;
    Ok(program)
}

pub fn render_program(p: &Program) -> String {
    let mut s = format!("start {}\n", p.start);
    for (id, st) in &p.states {
        writeln!(
            s,
            "state {id} {} {} {} {}",
            format_rational(&st.p0),
            st.next0,
            format_rational(&st.p1),
            st.next1
        )
        .unwrap();
    }
    s
}

/// `c R` lines: the k-th line gives `c_k` and the tail `R_k`.
pub fn parse_series(text: &str) -> Result<SeriesSource> {
    let mut pairs = Vec::new();
    for (line, fields) in records(text) {
        arity(line, &fields, &[2], "series line")?;
        pairs.push((fields[0].rational()?, fields[1].rational()?));
    }
    Ok(SeriesSource::Custom { pairs })
}

pub fn render_series(pairs: &[(Rational, Rational)]) -> String {
    pairs
        .iter()
        .map(|(c, r)| format!("{} {}\n", format_rational(c), format_rational(r)))
        .collect()
}

/// Rarefied families are stored as JSON with exact `p/q` fields.
pub fn parse_family(text: &str) -> Result<RarefiedFamily> {
    serde_json::from_str(text).map_err(|e| LabError::parse(e.line(), e.column(), e.to_string()))
}

pub fn render_family(family: &RarefiedFamily) -> Result<String> {
    serde_json::to_string_pretty(family).map_err(|e| LabError::Invalid(e.to_string()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rational::{int, ratio};
    use proptest::prelude::*;

    fn position(e: LabError) -> (usize, usize) {
        match e {
            LabError::Parse { line, column, .. } => (line, column),
            other => panic!("not a parse error: {other}"),
        }
    }

    #[test]
    fn weights_skip_comments_and_read_root() {
        let w = WeightFile::parse("# header\n\n- 1/2\n  01 1/8\ndepth 4\n").unwrap();
        assert_eq!(w.depth, Some(4));
        assert_eq!(
            w.entries,
            vec![
                (BitString::root(), ratio(1, 2)),
                ("01".parse().unwrap(), ratio(1, 8))
            ]
        );
        let a = w.continuous();
        assert_eq!(a.depth, 4);
        assert_eq!(a.get(&BitString::root()), ratio(1, 2));
    }

    #[test]
    fn bad_bit_reports_its_column() {
        let e = WeightFile::parse("0 1/2\n  0120 1/4\n").unwrap_err();
        assert_eq!(position(e), (2, 5));
    }

    #[test]
    fn bad_rational_reports_its_line() {
        let e = WeightFile::parse("0 1/2\n1 x/4\n").unwrap_err();
        assert_eq!(position(e).0, 2);
    }

    #[test]
    fn duplicate_stem_is_rejected() {
        let e = WeightFile::parse("0 1/2\n0 1/4\n").unwrap_err();
        assert_eq!(position(e), (2, 1));
    }

    #[test]
    fn missing_field_is_rejected() {
        assert!(matches!(
            WeightFile::parse("0\n"),
            Err(LabError::Parse { line: 1, .. })
        ));
    }

    #[test]
    fn tree_hold_and_depth() {
        let m = parse_tree("depth 3\n- 1\n0 2 hold\n1 0\n").unwrap();
        assert_eq!(m.depth, 3);
        assert!(m.is_held(&"0".parse().unwrap()));
        assert_eq!(m.value(&"01".parse().unwrap()), int(2));
        let again = parse_tree(&render_tree(&m)).unwrap();
        assert_eq!(again, m);
        assert!(parse_tree("0 1 freeze\n").is_err());
    }

    #[test]
    fn test_levels_in_any_order() {
        let t = parse_test("2 00\n1 0\n").unwrap();
        assert_eq!(t.depth(), 2);
        assert_eq!(parse_test(&render_test(&t)).unwrap(), t);
        assert_eq!(position(parse_test("0 1\n").unwrap_err()), (1, 1));
    }

    #[test]
    fn program_round_trip() {
        let p = parse_program("start 0\nstate 0 1/2 0 1/2 1\nstate 1 1/3 0 1/3 1\n").unwrap();
        assert_eq!(p.states.len(), 2);
        assert_eq!(parse_program(&render_program(&p)).unwrap(), p);
    }

    #[test]
    fn program_errors() {
        assert_eq!(
            position(parse_program("state 0 1/2 0 1/2 0\n").unwrap_err()),
            (1, 1)
        );
        assert_eq!(
            position(parse_program("start 0\nhalt\n").unwrap_err()),
            (2, 1)
        );
        assert!(parse_program("start 0\nstate 0 3/4 0 1/2 0\n").is_err());
    }

    #[test]
    fn series_pairs() {
        let SeriesSource::Custom { pairs } = parse_series("1/2 1/2\n1/4 1/4\n").unwrap() else {
            panic!()
        };
        assert_eq!(pairs[1], (ratio(1, 4), ratio(1, 4)));
        assert_eq!(render_series(&pairs), "1/2 1/2\n1/4 1/4\n");
    }

    #[test]
    fn family_json_errors_carry_position() {
        assert!(matches!(
            parse_family("{\n  \"bits\": x\n}"),
            Err(LabError::Parse { line: 2, .. })
        ));
    }

    proptest! {
        #[test]
        fn weight_files_round_trip(entries in proptest::collection::btree_map(
            proptest::collection::vec(any::<bool>(), 0..12),
            (0i64..1000, 1i64..1000),
            0..20,
        )) {
            let w = WeightFile {
                entries: entries.into_iter().map(|(b, (p, q))| (BitString::from_bits(b), ratio(p, q))).collect(),
                depth: Some(12),
            };
            prop_assert_eq!(WeightFile::parse(&w.render()).unwrap(), w);
        }
    }
}
