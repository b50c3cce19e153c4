//! Exact and certified computations around randomness deficiencies on
//! Cantor space: measures, Martin-Löf tests, semimeasures and
//! supermartingales, and the heavy-branch separation constructions.

pub mod bits;
pub mod deficiency;
pub mod effective;
pub mod enclosure;
pub mod error;
pub mod formats;
pub mod martingale;
pub mod measure;
pub mod rational;
pub mod separation;

pub use bits::{BitString, Interval, StemSet};
pub use enclosure::{certified_log2, DeficiencyValue, Enclosure, HpLog};
pub use error::{LabError, Result};
pub use measure::{Measure, MeasureSpec};
pub use rational::Rational;
