pub mod deficiency;
pub mod martingale;
pub mod separation;

/// Columns shared by the deficiency and martingale tables.
pub const OBJECT_COLUMNS: [&str; 6] = [
    "object_id",
    "level_or_prefix",
    "value_lo",
    "value_hi",
    "bound",
    "pass",
];

/// Columns shared by the separation tables.
pub const SERIES_COLUMNS: [&str; 8] = [
    "k",
    "mu_C",
    "mu_B",
    "term_lo",
    "term_hi",
    "partial_lo",
    "partial_hi",
    "pass",
];
