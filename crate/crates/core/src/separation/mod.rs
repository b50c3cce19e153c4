//! The heavy-branch machine, divergent-series audits and the rarefied family
//! separating the a priori deficiency from the probability-bounded one.

mod heavy;
mod rarefied;
mod series;
mod witness;

pub use heavy::{
    heavy_branch_run, heavy_integral_harness, sampled, CellCheck, HeavyBranchTrace,
    HeavyIntegralReport, HeavyIntegralRow, TraceCheck,
};
pub use rarefied::{
    dk_construct, dominates, g_build_general, g_uniform_case, level_checks, order_by_measure,
    ratio_checks, window_checks, Cell, DInterval, GReport, LevelCheck, RarefiedFamily, RatioCheck,
    UniformGReport, WindowCheck, MAX_LOG_BITS,
};
pub use series::{
    checkpoints, series_divergence_audit, trend, trend_at, DivergenceTrend, IdentityCheck,
    SeriesReport, SeriesRow, SeriesSource,
};
pub use witness::{witness_audit, Witness, WitnessEntry, WitnessReport};
