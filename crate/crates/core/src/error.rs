use thiserror::Error;

/// Every failure the laboratory can report. Variants carry the minimal
/// witness (stem, level, index) that identifies the offending object.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum LabError {
    #[error("precision exhausted after {stages} refinement stages deciding {what}")]
    PrecisionExhausted { what: String, stages: u32 },

    #[error("domain error: {0}")]
    Domain(String),

    #[error("malformed measure: {0}")]
    MalformedMeasure(String),

    #[error("string {stem} is shorter than a covering stem; value undetermined")]
    UndeterminedPrefix { stem: String },

    #[error("invalid semimeasure at {stem}: {reason}")]
    InvalidSemimeasure { stem: String, reason: String },

    #[error("invalid Martin-Löf test at level {level}: {reason}")]
    InvalidTest { level: usize, reason: String },

    #[error(
        "function is not probability bounded: mu{{t > c}} exceeds 1/c for c just below {witness}"
    )]
    NotProbabilityBounded { witness: String },

    #[error("malformed enumeration at stage {stage}, stem {stem}")]
    MalformedEnumeration { stage: usize, stem: String },

    #[error("zero-measure stem {stem} where positive measure is required")]
    ZeroMeasure { stem: String },

    #[error("invalid capital function at {stem}: {reason}")]
    InvalidCapital { stem: String, reason: String },

    #[error("not a supermartingale at {stem}")]
    NotSupermartingale { stem: String },

    #[error("suspected atom: heavy-branch measure stabilised at {value}")]
    AtomSuspected { value: String },

    #[error("depth budget {budget} exhausted constructing D_{k}")]
    DepthBudgetExhausted { k: usize, budget: usize },

    #[error("enclosure too wide to decide {what} at {bits} bits")]
    Undecided { what: String, bits: u32 },

    #[error("malformed program at state {state}: {reason}")]
    MalformedProgram { state: usize, reason: String },

    #[error("invalid series at k = {k}: {reason}")]
    InvalidSeries { k: usize, reason: String },

    #[error("parse error at line {line}, column {column}: {message}")]
    Parse {
        line: usize,
        column: usize,
        message: String,
    },

    #[error("{0}")]
    Invalid(String),
}

impl LabError {
    pub fn parse(line: usize, column: usize, message: impl Into<String>) -> Self {
        LabError::Parse {
            line,
            column,
            message: message.into(),
        }
    }

    /// Re-anchors a position-less parse error at a concrete line/column.
    pub fn at(self, line: usize, column: usize) -> Self {
        match self {
            LabError::Parse { message, .. } => LabError::Parse {
                line,
                column,
                message,
            },
            other => other,
        }
    }
}

pub type Result<T> = std::result::Result<T, LabError>;
