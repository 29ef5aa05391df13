//! Signal model of one synchronous symbol period: spreading codes, sparse
//! user activity, zero-forcing precoding, a fast frequency-hopping jammer
//! and white Gaussian noise.

mod alphabet;
mod codes;
mod dataset;
mod jammer;
mod scenario;

pub use alphabet::SymbolAlphabet;
pub use codes::{hadamard_codes, SpreadingMatrix};
pub use dataset::{
    generate_dataset, read_dataset, read_record, write_dataset, write_record, Example,
};
pub(crate) use dataset::generate_examples;
pub use jammer::{draw_jammer, JammerConfig, JammerRealization};
pub use scenario::{
    clean_mixture, draw_active_set, draw_awgn, draw_channel, generate_scenario, precode_symbol,
    ActiveSet, ChannelRealization, PowerReference, ScenarioConfig, ScenarioRealization,
};
