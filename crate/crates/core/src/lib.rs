//! Cycle-level DDR5 memory-system simulator.
//!
//! The crate is split along the simulated hardware: [`device`] models the DRAM
//! chips and their timing rules, [`controller`] the per-channel FR-FCFS memory
//! controller, [`traffic`] the pointer-chase + stream request generator, and
//! [`experiment`] drives sweeps and the analytic bandwidth model. [`config`],
//! [`output`] and [`trace`] are the file-format edges used by the CLI.

pub mod cli;
pub mod config;
pub mod controller;
pub mod device;
pub mod error;
pub mod experiment;
pub mod output;
pub mod trace;
pub mod traffic;

pub use config::{parse_config, Config};
pub use controller::{Controller, ControllerStats, QueueFull, ReqClass, Request};
pub use device::{
    ns_to_nck, verify_trace, Address, BankState, BankStatus, ChannelState, Command, CommandKind,
    DataBurst, DeviceOrg, Direction, TimingNs, TimingParams, TraceChecker, Violation,
};
pub use error::{ConfigError, DeviceError, ExperimentError};
pub use experiment::{
    achievable_bw, build_curves, ref_penalty, ref_penalty_worst, run_point, theoretical_bw,
    AnalyticModel, CurveSet, RunPointResult, SweepOptions,
};
pub use traffic::{next_stream_address, rw_pattern, GenConfig};

/// Tool version stamped into every output header.
pub const VERSION: &str = env!("CARGO_PKG_VERSION");
