//! Markov jump processes: intensity matrices, transition matrices via
//! uniformization, trajectory simulation, and discrete-time sampling.

mod expm;
mod intensity;
mod io;
mod simulate;

pub use expm::{expm, TransitionMatrix};
pub use intensity::{aggregate, decompose, IntensityMatrix};
pub use io::{
    read_events_csv, read_panel_csv, write_events_csv, write_events_file, write_panel_csv,
    write_panel_file, EventSample, MarketEvents, MarketPanel, PanelSample,
};
pub use simulate::{
    sample_discrete, simulate, simulate_with_rng, Attribution, EventRecord, MoveChannel, SimStop,
};
