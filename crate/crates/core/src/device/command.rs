use std::fmt;
use std::str::FromStr;

use super::org::Address;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum CommandKind {
    Act,
    Pre,
    /// Precharge every bank of a rank.
    PreAll,
    Rd,
    Wr,
    /// All-bank refresh of a rank.
    RefAll,
}

impl CommandKind {
    pub fn is_column(self) -> bool {
        matches!(self, CommandKind::Rd | CommandKind::Wr)
    }

    pub fn is_rank_scoped(self) -> bool {
        matches!(self, CommandKind::PreAll | CommandKind::RefAll)
    }

    pub fn mnemonic(self) -> &'static str {
        match self {
            CommandKind::Act => "ACT",
            CommandKind::Pre => "PRE",
            CommandKind::PreAll => "PREab",
            CommandKind::Rd => "RD",
            CommandKind::Wr => "WR",
            CommandKind::RefAll => "REFab",
        }
    }
}

impl fmt::Display for CommandKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.mnemonic())
    }
}

impl FromStr for CommandKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Ok(match s {
            "ACT" => CommandKind::Act,
            "PRE" => CommandKind::Pre,
            "PREab" => CommandKind::PreAll,
            "RD" => CommandKind::Rd,
            "WR" => CommandKind::Wr,
            "REFab" => CommandKind::RefAll,
            other => return Err(format!("unknown command `{other}`")),
        })
    }
}

/// A DRAM command as it appears on a channel's command bus.
///
/// Rank-scoped commands ignore bank group, bank, row and column; ACT ignores
/// the column; PRE ignores row and column.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Command {
    pub kind: CommandKind,
    pub addr: Address,
    pub time: u64,
}

impl Command {
    pub fn new(kind: CommandKind, addr: Address, time: u64) -> Self {
        Command { kind, addr, time }
    }

    /// Zeroes the address fields the command kind does not use.
    pub fn normalized(mut self) -> Self {
        match self.kind {
            CommandKind::PreAll | CommandKind::RefAll => {
                self.addr.bank_group = 0;
                self.addr.bank = 0;
                self.addr.row = 0;
                self.addr.column = 0;
            }
            CommandKind::Pre => {
                self.addr.row = 0;
                self.addr.column = 0;
            }
            CommandKind::Act => self.addr.column = 0,
            CommandKind::Rd | CommandKind::Wr => {}
        }
        self
    }
}

impl fmt::Display for Command {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}@{} {}", self.kind, self.time, self.addr)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Direction {
    Read,
    Write,
}

/// Occupancy of a channel's data bus by one burst, `[start, end)` in nCK.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct DataBurst {
    pub channel: u32,
    pub direction: Direction,
    pub start: u64,
    pub end: u64,
    pub request_id: u64,
}

impl DataBurst {
    pub fn overlaps(&self, other: &DataBurst) -> bool {
        self.channel == other.channel && self.start < other.end && other.start < self.end
    }
}
