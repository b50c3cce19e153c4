//! Reading inputs and turning library failures into report entries.

use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use clap::Args;
use deficiency_core::bits::BitString;
use deficiency_core::effective::{machine_to_semimeasure, ContinuousSemimeasure};
use deficiency_core::error::LabError;
use deficiency_core::formats;
use deficiency_core::measure::Measure;
use deficiency_core::rational::{parse_rational, Rational};
use serde::Serialize;

use crate::report::RunReport;

pub fn read(path: &Path) -> Result<String> {
    fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))
}

/// Parses a file, naming it in any error.
pub fn load<T>(
    path: &Path,
    parse: impl FnOnce(&str) -> deficiency_core::error::Result<T>,
) -> Result<T> {
    let text = read(path)?;
    parse(&text).with_context(|| format!("in {}", path.display()))
}

/// `uniform`, an inline JSON measure, or a path to a measure file.
pub fn measure(arg: &str) -> Result<Measure> {
    match arg.trim() {
        "uniform" => Ok(Measure::Uniform),
        inline if inline.starts_with('{') => {
            Measure::from_json(inline).context("in the inline measure")
        }
        path => load(Path::new(path), Measure::from_json),
    }
}

pub fn rational(arg: &str) -> Result<Rational> {
    parse_rational(arg).with_context(|| format!("reading {arg:?}"))
}

pub fn stem(arg: &str) -> Result<BitString> {
    arg.parse().with_context(|| format!("reading stem {arg:?}"))
}

/// A continuous semimeasure given as a weight file or as a machine program
/// materialized to a depth.
#[derive(Debug, Args, Serialize)]
pub struct SemimeasureSource {
    /// Weight file with `stem p/q` lines.
    #[arg(long, conflicts_with = "program", required_unless_present = "program")]
    pub semimeasure: Option<PathBuf>,
    /// Machine program with `start` and `state` lines.
    #[arg(long)]
    pub program: Option<PathBuf>,
    /// Depth to which the program's output semimeasure is computed.
    #[arg(long = "program-depth", default_value_t = 12)]
    pub program_depth: usize,
}

impl SemimeasureSource {
    pub fn load(&self) -> Result<ContinuousSemimeasure> {
        match (&self.semimeasure, &self.program) {
            (Some(path), _) => load(path, formats::parse_continuous),
            (None, Some(path)) => {
                let program = load(path, formats::parse_program)?;
                Ok(machine_to_semimeasure(&program, self.program_depth)?)
            }
            (None, None) => bail!("one of --semimeasure or --program is required"),
        }
    }
}

/// The stem, level or index an error points at.
pub fn witness(e: &LabError) -> Option<String> {
    match e {
        LabError::InvalidSemimeasure { stem, .. }
        | LabError::InvalidCapital { stem, .. }
        | LabError::NotSupermartingale { stem }
        | LabError::ZeroMeasure { stem }
        | LabError::UndeterminedPrefix { stem } => Some(format!("stem {stem}")),
        LabError::InvalidTest { level, .. } => Some(format!("level {level}")),
        LabError::NotProbabilityBounded { witness } => Some(format!("c just below {witness}")),
        LabError::AtomSuspected { value } => Some(format!("mass {value}")),
        LabError::DepthBudgetExhausted { k, .. } => Some(format!("k = {k}")),
        LabError::InvalidSeries { k, .. } => Some(format!("k = {k}")),
        LabError::MalformedProgram { state, .. } => Some(format!("state {state}")),
        _ => None,
    }
}

/// Failures that disprove the property under test; anything else (parse,
/// precision, domain) aborts the run.
fn is_verdict(e: &LabError) -> bool {
    matches!(
        e,
        LabError::InvalidSemimeasure { .. }
            | LabError::InvalidCapital { .. }
            | LabError::NotSupermartingale { .. }
            | LabError::InvalidTest { .. }
            | LabError::NotProbabilityBounded { .. }
            | LabError::AtomSuspected { .. }
            | LabError::DepthBudgetExhausted { .. }
            | LabError::InvalidSeries { .. }
            | LabError::ZeroMeasure { .. }
    )
}

/// Passes values through; a disproving error becomes a failed check named
/// `name` and yields `None`.
pub fn verdict<T>(
    report: &mut RunReport,
    name: &str,
    r: deficiency_core::error::Result<T>,
) -> Result<Option<T>> {
    match r {
        Ok(v) => Ok(Some(v)),
        Err(e) if is_verdict(&e) => {
            report.check(name, false, witness(&e), e.to_string());
            Ok(None)
        }
        Err(e) => Err(e.into()),
    }
}
