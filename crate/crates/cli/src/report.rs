//! Run reports: named checks, tables and a JSON summary, written atomically
//! as CSV and/or JSON with byte-stable rendering.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use clap::ValueEnum;
use deficiency_core::enclosure::{DeficiencyValue, Enclosure};
use deficiency_core::rational::{format_decimal, format_rational, Rational};
use deficiency_core::separation::DivergenceTrend;
use serde::Serialize;
use serde_json::{json, Map, Value};

pub const DIGITS: u32 = 15;

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    Csv,
    Json,
}

#[derive(Clone, Debug, Serialize)]
pub struct Check {
    pub name: String,
    pub pass: bool,
    /// Minimal witness of a failure: a stem, level or index.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub witness: Option<String>,
    pub detail: String,
}

#[derive(Clone, Debug, Serialize)]
pub struct Table {
    pub name: String,
    pub columns: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

impl Table {
    pub fn new(name: &str, columns: &[&str]) -> Self {
        Table {
            name: name.into(),
            columns: columns.iter().map(|c| c.to_string()).collect(),
            rows: Vec::new(),
        }
    }

    pub fn push(&mut self, row: Vec<String>) {
        debug_assert_eq!(row.len(), self.columns.len(), "row width for {}", self.name);
        self.rows.push(row);
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct RunReport {
    pub command: String,
    pub config: Value,
    pub pass: bool,
    pub checks: Vec<Check>,
    pub summary: Map<String, Value>,
    pub tables: Vec<Table>,
}

impl RunReport {
    pub fn new(command: &str, config: Value) -> Self {
        RunReport {
            command: command.into(),
            config,
            pass: true,
            checks: Vec::new(),
            summary: Map::new(),
            tables: Vec::new(),
        }
    }

    pub fn check(
        &mut self,
        name: &str,
        pass: bool,
        witness: Option<String>,
        detail: impl Into<String>,
    ) {
        self.pass &= pass;
        self.checks.push(Check {
            name: name.into(),
            pass,
            witness: if pass { None } else { witness },
            detail: detail.into(),
        });
    }

    pub fn note(&mut self, key: &str, value: impl Into<Value>) {
        self.summary.insert(key.into(), value.into());
    }

    pub fn table(&mut self, table: Table) {
        self.tables.push(table);
    }

    pub fn failures(&self) -> impl Iterator<Item = &Check> {
        self.checks.iter().filter(|c| !c.pass)
    }

    /// The first table goes to `<command>.csv`, later ones to
    /// `<command>.<table>.csv`.
    fn csv_name(&self, i: usize) -> String {
        if i == 0 {
            format!("{}.csv", self.command)
        } else {
            format!("{}.{}.csv", self.command, self.tables[i].name)
        }
    }

    pub fn emit(&self, dir: &Path, formats: &[Format]) -> Result<Vec<PathBuf>> {
        let mut written = Vec::new();
        if formats.contains(&Format::Csv) {
            for (i, t) in self.tables.iter().enumerate() {
                written.push(write_atomic(dir, &self.csv_name(i), &csv_bytes(t)?)?);
            }
        }
        if formats.contains(&Format::Json) {
            let mut text = serde_json::to_string_pretty(self)?;
            text.push('\n');
            written.push(write_atomic(
                dir,
                &format!("{}.json", self.command),
                text.as_bytes(),
            )?);
        }
        Ok(written)
    }
}

pub fn csv_bytes(t: &Table) -> Result<Vec<u8>> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(&t.columns)?;
    for row in &t.rows {
        w.write_record(row)?;
    }
    Ok(w.into_inner().map_err(|e| e.into_error())?)
}

/// Writes through a temporary file in `dir` and renames it into place.
pub fn write_atomic(dir: &Path, name: &str, bytes: &[u8]) -> Result<PathBuf> {
    fs::create_dir_all(dir)
        .with_context(|| format!("creating output directory {}", dir.display()))?;
    let target = dir.join(name);
    let mut tmp = tempfile::NamedTempFile::new_in(dir)
        .with_context(|| format!("output path {} is not writable", dir.display()))?;
    tmp.write_all(bytes)?;
    tmp.flush()?;
    tmp.persist(&target)
        .with_context(|| format!("renaming into {}", target.display()))?;
    Ok(target)
}

pub fn exact(q: &Rational) -> String {
    format_rational(q)
}

pub fn lo(e: &Enclosure) -> String {
    format_decimal(e.lo(), DIGITS, false)
}

pub fn hi(e: &Enclosure) -> String {
    format_decimal(e.hi(), DIGITS, true)
}

/// `[lo, hi]` as outward-rounded decimals.
pub fn pair(e: &Enclosure) -> Value {
    json!([lo(e), hi(e)])
}

pub fn deficiency_bounds(d: &DeficiencyValue) -> (String, String) {
    match d {
        DeficiencyValue::NegInfinity => ("-inf".into(), "-inf".into()),
        DeficiencyValue::PosInfinity => ("+inf".into(), "+inf".into()),
        DeficiencyValue::Finite(e) => (lo(e), hi(e)),
    }
}

pub fn deficiency(d: &DeficiencyValue) -> Value {
    let (l, h) = deficiency_bounds(d);
    json!([l, h])
}

pub fn trend(t: &DivergenceTrend) -> Value {
    json!({
        "name": t.name,
        "checkpoints": t.checkpoints.iter().map(|(k, e)| json!({"k": k, "partial": pair(e)})).collect::<Vec<_>>(),
        "margins": t.margins.iter().map(pair).collect::<Vec<_>>(),
        "stall": t.stall,
        "pass": t.pass,
    })
}

pub fn flag(pass: bool) -> String {
    if pass { "pass" } else { "fail" }.into()
}

#[cfg(test)]
mod tests {
    use super::*;
    use deficiency_core::rational::{int, ratio};

    fn sample() -> RunReport {
        let mut r = RunReport::new("demo", json!({"terms": 8}));
        let mut t = Table::new("rows", &["k", "value_lo", "value_hi", "pass"]);
        let e = Enclosure::new(ratio(1, 3), ratio(2, 3));
        t.push(vec!["1".into(), lo(&e), hi(&e), flag(true)]);
        r.table(t);
        r.check("positive", true, None, "1/3 > 0");
        r
    }

    #[test]
    fn emits_byte_identical_files() {
        let a = tempfile::tempdir().unwrap();
        let b = tempfile::tempdir().unwrap();
        let formats = [Format::Csv, Format::Json];
        sample().emit(a.path(), &formats).unwrap();
        sample().emit(b.path(), &formats).unwrap();
        for name in ["demo.csv", "demo.json"] {
            assert_eq!(
                fs::read(a.path().join(name)).unwrap(),
                fs::read(b.path().join(name)).unwrap()
            );
        }
        let csv = fs::read_to_string(a.path().join("demo.csv")).unwrap();
        assert_eq!(
            csv,
            "k,value_lo,value_hi,pass\n1,0.333333333333333,0.666666666666667,pass\n"
        );
    }

    #[test]
    fn empty_table_is_header_only() {
        let mut r = RunReport::new("empty", Value::Null);
        r.table(Table::new("rows", &["k", "pass"]));
        let dir = tempfile::tempdir().unwrap();
        r.emit(dir.path(), &[Format::Csv]).unwrap();
        assert_eq!(
            fs::read_to_string(dir.path().join("empty.csv")).unwrap(),
            "k,pass\n"
        );
        assert!(!dir.path().join("empty.json").exists());
    }

    #[test]
    fn json_and_csv_agree() {
        let dir = tempfile::tempdir().unwrap();
        sample()
            .emit(dir.path(), &[Format::Csv, Format::Json])
            .unwrap();
        let v: Value =
            serde_json::from_str(&fs::read_to_string(dir.path().join("demo.json")).unwrap())
                .unwrap();
        let row = &v["tables"][0]["rows"][0];
        let csv = fs::read_to_string(dir.path().join("demo.csv")).unwrap();
        let line: Vec<&str> = csv.lines().nth(1).unwrap().split(',').collect();
        for (i, cell) in line.iter().enumerate() {
            assert_eq!(row[i], *cell);
        }
    }

    #[test]
    fn failed_check_keeps_witness_and_clears_pass() {
        let mut r = sample();
        r.check(
            "bound",
            false,
            Some("stem 0101".into()),
            "mass exceeds 2^-3",
        );
        r.check("other", true, Some("ignored".into()), "");
        assert!(!r.pass);
        let failed: Vec<_> = r.failures().collect();
        assert_eq!(failed.len(), 1);
        assert_eq!(failed[0].witness.as_deref(), Some("stem 0101"));
        assert!(r.checks[2].witness.is_none());
    }

    #[test]
    fn unwritable_directory_is_an_error() {
        let dir = tempfile::tempdir().unwrap();
        let file = dir.path().join("plain");
        fs::write(&file, "x").unwrap();
        assert!(sample().emit(&file.join("sub"), &[Format::Csv]).is_err());
    }

    #[test]
    fn infinite_deficiencies_render_as_words() {
        assert_eq!(deficiency_bounds(&DeficiencyValue::PosInfinity).0, "+inf");
        let d = DeficiencyValue::exact(int(3));
        assert_eq!(deficiency_bounds(&d), ("3".into(), "3".into()));
    }
}
