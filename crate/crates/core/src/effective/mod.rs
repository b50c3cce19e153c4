//! Basic functions, staged lower-semicomputable functions, and the
//! semimeasures that carry the complexity surrogates.

mod basic;
mod machine;
mod semimeasure;

pub use basic::{enumeration_to_stages, BasicFunction, StagedEnumeration};
pub use machine::{machine_to_semimeasure, Program, State};
pub use semimeasure::{
    complexity_of, lift_discrete_to_continuous, mix_pool, validate_continuous, validate_discrete,
    ContinuousSemimeasure, DiscreteSemimeasure, MachinePool,
};
