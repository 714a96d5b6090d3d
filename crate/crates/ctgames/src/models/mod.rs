//! Canonical model families: single-agent renewal, two-player entry with an
//! exogenous demand state, and the anonymous quality ladder with static
//! Bertrand-Nash pricing.

pub mod entry;
pub mod ladder;
pub mod renewal;

pub use entry::{entry_build, symmetric_flow_table, EntryModel, EntryParams, EntryRates};
pub use ladder::{ladder_build, ladder_profits, LadderConfig, LadderModel, LadderParams, ProfitTable};
pub use renewal::{renewal_build, RenewalModel, RenewalParams};
