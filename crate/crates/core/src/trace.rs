//! Command-trace dump: one command per line,
//! `issue_time_nck,kind,channel,rank,bank_group,bank,row,column`.
//! Lines starting with `#` are comments. Fields a command kind does not use
//! are written as 0.

use std::io::{self, Write};

use crate::device::{Address, Command};

pub const TRACE_HEADER: &str = "# issue_time_nck,kind,channel,rank,bank_group,bank,row,column";

pub fn format_command(cmd: &Command) -> String {
    let c = cmd.normalized();
    let a = &c.addr;
    format!(
        "{},{},{},{},{},{},{},{}",
        c.time, c.kind, a.channel, a.rank, a.bank_group, a.bank, a.row, a.column
    )
}

pub struct TraceWriter<W: Write> {
    out: W,
    written: u64,
}

impl<W: Write> TraceWriter<W> {
    pub fn new(mut out: W) -> io::Result<Self> {
        writeln!(out, "{TRACE_HEADER}")?;
        Ok(TraceWriter { out, written: 0 })
    }

    pub fn write(&mut self, cmd: &Command) -> io::Result<()> {
        self.written += 1;
        writeln!(self.out, "{}", format_command(cmd))
    }

    pub fn written(&self) -> u64 {
        self.written
    }

    pub fn finish(mut self) -> io::Result<W> {
        self.out.flush()?;
        Ok(self.out)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("trace line {line}: {msg}")]
pub struct TraceParseError {
    pub line: usize,
    pub msg: String,
}

pub fn parse_trace(text: &str) -> Result<Vec<Command>, TraceParseError> {
    let mut out = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = i + 1;
        let raw = raw.trim();
        if raw.is_empty() || raw.starts_with('#') {
            continue;
        }
        let err = |msg: String| TraceParseError { line, msg };
        let fields: Vec<&str> = raw.split(',').map(str::trim).collect();
        if fields.len() != 8 {
            return Err(err(format!("expected 8 fields, found {}", fields.len())));
        }
        let num = |idx: usize| -> Result<u64, TraceParseError> {
            fields[idx]
                .parse()
                .map_err(|_| err(format!("bad number `{}`", fields[idx])))
        };
        let small = |idx: usize| -> Result<u32, TraceParseError> {
            u32::try_from(num(idx)?).map_err(|_| err(format!("`{}` too large", fields[idx])))
        };
        let kind = fields[1].parse().map_err(err)?;
        out.push(Command::new(
            kind,
            Address {
                channel: small(2)?,
                rank: small(3)?,
                bank_group: small(4)?,
                bank: small(5)?,
                row: small(6)?,
                column: small(7)?,
            },
            num(0)?,
        ));
    }
    Ok(out)
}
