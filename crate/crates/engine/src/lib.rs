//! Host side of the batched PIC engine: cycle pipeline, input decks, dumps,
//! diagnostics CSV and run manifests.

pub mod checkpoint;
pub mod cli;
pub mod deckfile;
pub mod error;
pub mod output;
pub mod pipeline;
pub mod vtk;

pub use error::{EngineError, Phase};
pub use pipeline::{run_simulation, AnyState, CycleReport, RunSummary, SimulationState};
