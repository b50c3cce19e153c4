//! Martin-Löf tests, bounded functions and the deficiency functionals.

mod apriori;
mod bounded;
mod mltest;

pub use apriori::{
    apriori_deficiencies, chain_report, dp_vs_de_slab_audit, gacs_deficiency,
    markov_prefixfree_audit, AprioriReport, ChainReport, GacsValue, MarkovReport, Slab, SlabReport,
};
pub use bounded::{
    eb_mix, is_expectation_bounded, pb_from_function, probability_bound_violation, EbMix,
};
pub use mltest::{deficiency_from_test, measure_of_union, mltest_validate, universal_mix, MLTest};
