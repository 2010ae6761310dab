//! Configuration, seeded runs, CSV output, sweeps, timing and checkpoints.
//!
//! A run observes the shared quantized state, lets every agent act, steps
//! the environment, quantizes the next state and lets every agent learn.
//! Files per run: `config.toml` (resolved), `metrics.csv`, `trajectory.csv`,
//! `timing.csv`, `summary.txt` and optionally `checkpoint.json`.

pub mod agents;
pub mod bench;
pub mod config;
pub mod output;
pub mod run;
pub mod sim;
pub mod sweep;
pub mod trace;

pub use agents::AnyAgent;
pub use bench::{timing_benchmark, TimingReport};
pub use config::{AgentKind, SimConfig};
pub use run::{drive, resume_in_dir, run_all_seeds, run_in_memory, run_to_dir};
pub use sim::{Simulation, SlotRecord};
pub use sweep::{sweep, SweepRow, SweepTable, Variation};
pub use trace::{MeanStd, RunTrace, TracePoint};
