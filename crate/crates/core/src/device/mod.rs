//! DDR5 organization, command set, bank state machines and timing rules.

mod command;
mod org;
mod state;
mod timing;
mod verify;

pub use command::{Command, CommandKind, DataBurst, Direction};
pub use org::{Address, DeviceOrg};
pub use state::{BankState, BankStatus, ChannelState};
pub use timing::{ns_to_nck, TimingNs, TimingParams, DDR5_4800_TCK_NS};
pub use verify::{verify_trace, Constraint, TraceChecker, Violation};
