//! Independent legality oracle for command traces.
//!
//! Every command is compared pairwise against the earlier commands of its
//! channel that are close enough in time to matter, and bank status is
//! replayed from scratch. None of the bookkeeping in [`super::ChannelState`]
//! is reused.

use std::collections::VecDeque;
use std::fmt;

use super::command::{Command, CommandKind};
use super::org::DeviceOrg;
use super::timing::TimingParams;
use crate::error::DeviceError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Constraint {
    Trcd,
    Tras,
    Trp,
    Trtp,
    Twr,
    Trfc,
    TrrdS,
    TrrdL,
    Tfaw,
    TccdS,
    TccdL,
    TwtrS,
    TwtrL,
    ReadToWrite,
    BusOverlap,
    CommandBus,
    BankStatus,
}

impl fmt::Display for Constraint {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            Constraint::Trcd => "tRCD",
            Constraint::Tras => "tRAS",
            Constraint::Trp => "tRP",
            Constraint::Trtp => "tRTP",
            Constraint::Twr => "tWR",
            Constraint::Trfc => "tRFC",
            Constraint::TrrdS => "tRRD_S",
            Constraint::TrrdL => "tRRD_L",
            Constraint::Tfaw => "tFAW",
            Constraint::TccdS => "tCCD_S",
            Constraint::TccdL => "tCCD_L",
            Constraint::TwtrS => "tWTR_S",
            Constraint::TwtrL => "tWTR_L",
            Constraint::ReadToWrite => "read-to-write turnaround",
            Constraint::BusOverlap => "data-bus overlap",
            Constraint::CommandBus => "command-bus conflict",
            Constraint::BankStatus => "bank status",
        };
        f.write_str(s)
    }
}

/// One broken rule. `first` is the earlier command of the offending pair
/// (absent for bank-status errors); `deficit` is how many nCK too early
/// `second` was issued.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Violation {
    pub first: Option<Command>,
    pub second: Command,
    pub constraint: Constraint,
    pub deficit: u64,
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match &self.first {
            Some(p) => write!(
                f,
                "{} violated between [{}] and [{}]: {} nCK short",
                self.constraint, p, self.second, self.deficit
            ),
            None => write!(f, "{} violated by [{}]", self.constraint, self.second),
        }
    }
}

#[derive(Debug, Clone)]
struct ChannelHistory {
    recent: VecDeque<Command>,
    refreshes: VecDeque<Command>,
    open_rows: Vec<Option<u32>>,
}

/// Streaming trace checker. Commands must be fed in issue-time order; memory
/// stays bounded by the longest timing constraint.
#[derive(Debug, Clone)]
pub struct TraceChecker {
    org: DeviceOrg,
    t: TimingParams,
    window: u64,
    channels: Vec<ChannelHistory>,
    last_time: Option<u64>,
    fed: usize,
    count: u64,
    kept: Vec<Violation>,
    keep_limit: usize,
}

impl TraceChecker {
    pub fn new(org: DeviceOrg, timing: TimingParams) -> Self {
        let t = timing;
        let burst = org.burst_nck();
        let window = [
            t.t_rcd,
            t.t_ras,
            t.t_rp,
            t.t_rtp,
            t.cwl + burst + t.t_wr,
            t.t_rrd_l,
            t.t_rrd_s,
            t.t_faw,
            t.t_ccd_l,
            t.t_ccd_s,
            t.cwl + burst + t.t_wtr_l,
            (t.cl + burst + t.t_rtw_gap).saturating_sub(t.cwl),
            t.cl.max(t.cwl) + burst,
            1,
        ]
        .into_iter()
        .max()
        .unwrap();
        TraceChecker {
            org,
            t,
            window,
            channels: (0..org.channels)
                .map(|_| ChannelHistory {
                    recent: VecDeque::new(),
                    refreshes: VecDeque::new(),
                    open_rows: vec![None; org.banks_per_channel() as usize],
                })
                .collect(),
            last_time: None,
            fed: 0,
            count: 0,
            kept: Vec::new(),
            keep_limit: usize::MAX,
        }
    }

    /// Keeps at most `limit` violation records; the total is still counted.
    pub fn with_limit(mut self, limit: usize) -> Self {
        self.keep_limit = limit;
        self
    }

    pub fn violation_count(&self) -> u64 {
        self.count
    }

    pub fn violations(&self) -> &[Violation] {
        &self.kept
    }

    pub fn commands_checked(&self) -> usize {
        self.fed
    }

    pub fn into_violations(self) -> Vec<Violation> {
        self.kept
    }

    fn report(&mut self, v: Violation) {
        self.count += 1;
        if self.kept.len() < self.keep_limit {
            self.kept.push(v);
        }
    }

    pub fn feed(&mut self, cmd: &Command) -> Result<(), DeviceError> {
        if let Some(last) = self.last_time {
            if cmd.time < last {
                return Err(DeviceError::UnsortedTrace { index: self.fed });
            }
        }
        self.org.check_address(&cmd.addr)?;
        self.last_time = Some(cmd.time);
        self.fed += 1;

        let ch = cmd.addr.channel as usize;
        let horizon = cmd.time.saturating_sub(self.window);
        let refresh_horizon = cmd.time.saturating_sub(self.t.t_rfc);
        {
            let h = &mut self.channels[ch];
            while h.recent.front().is_some_and(|p| p.time < horizon) {
                h.recent.pop_front();
            }
            while h
                .refreshes
                .front()
                .is_some_and(|p| p.time < refresh_horizon)
            {
                h.refreshes.pop_front();
            }
        }

        let mut found = Vec::new();
        let h = &self.channels[ch];
        for p in h.recent.iter() {
            self.check_pair(p, cmd, &mut found);
        }
        for p in h.refreshes.iter() {
            if p.addr.rank == cmd.addr.rank
                && matches!(cmd.kind, CommandKind::Act | CommandKind::RefAll)
            {
                need(p, cmd, self.t.t_rfc, Constraint::Trfc, &mut found);
            }
        }
        if cmd.kind == CommandKind::Act {
            let acts: Vec<&Command> = h
                .recent
                .iter()
                .filter(|p| {
                    p.kind == CommandKind::Act
                        && p.addr.rank == cmd.addr.rank
                        && p.time + self.t.t_faw > cmd.time
                })
                .collect();
            if acts.len() >= 4 {
                let oldest = acts[acts.len() - 4];
                need(oldest, cmd, self.t.t_faw, Constraint::Tfaw, &mut found);
            }
        }
        if let Some(v) = self.replay_status(cmd) {
            found.push(v);
        }
        for v in found {
            self.report(v);
        }

        let h = &mut self.channels[ch];
        h.recent.push_back(*cmd);
        if cmd.kind == CommandKind::RefAll {
            h.refreshes.push_back(*cmd);
        }
        Ok(())
    }

    fn check_pair(&self, p: &Command, c: &Command, out: &mut Vec<Violation>) {
        use CommandKind::*;
        let t = &self.t;
        let burst = self.org.burst_nck();
        if p.time == c.time {
            out.push(Violation {
                first: Some(*p),
                second: *c,
                constraint: Constraint::CommandBus,
                deficit: 1,
            });
        }
        if p.kind.is_column() && c.kind.is_column() {
            let p_start = p.time + if p.kind == Rd { t.cl } else { t.cwl };
            let c_start = c.time + if c.kind == Rd { t.cl } else { t.cwl };
            let (p_end, c_end) = (p_start + burst, c_start + burst);
            if p_start < c_end && c_start < p_end {
                out.push(Violation {
                    first: Some(*p),
                    second: *c,
                    constraint: Constraint::BusOverlap,
                    deficit: p_end.saturating_sub(c_start).max(1),
                });
            }
            if p.kind == Rd && c.kind == Wr && c_start < p_end + t.t_rtw_gap {
                out.push(Violation {
                    first: Some(*p),
                    second: *c,
                    constraint: Constraint::ReadToWrite,
                    deficit: p_end + t.t_rtw_gap - c_start,
                });
            }
        }
        if p.addr.rank != c.addr.rank {
            return;
        }
        let same_bank = p.addr.bank_group == c.addr.bank_group && p.addr.bank == c.addr.bank;
        let same_group = p.addr.bank_group == c.addr.bank_group;
        match (p.kind, c.kind) {
            (Act, Rd) | (Act, Wr) if same_bank => need(p, c, t.t_rcd, Constraint::Trcd, out),
            (Act, Pre) if same_bank => need(p, c, t.t_ras, Constraint::Tras, out),
            (Act, PreAll) => need(p, c, t.t_ras, Constraint::Tras, out),
            (Act, Act) => {
                if same_group {
                    need(p, c, t.t_rrd_l, Constraint::TrrdL, out)
                } else {
                    need(p, c, t.t_rrd_s, Constraint::TrrdS, out)
                }
            }
            (Pre, Act) if same_bank => need(p, c, t.t_rp, Constraint::Trp, out),
            (Pre, RefAll) | (PreAll, Act) | (PreAll, RefAll) => {
                need(p, c, t.t_rp, Constraint::Trp, out)
            }
            (Rd, Pre) if same_bank => need(p, c, t.t_rtp, Constraint::Trtp, out),
            (Rd, PreAll) => need(p, c, t.t_rtp, Constraint::Trtp, out),
            (Wr, Pre) if same_bank => need(p, c, t.cwl + burst + t.t_wr, Constraint::Twr, out),
            (Wr, PreAll) => need(p, c, t.cwl + burst + t.t_wr, Constraint::Twr, out),
            (Rd, Rd) | (Wr, Wr) => {
                if same_group {
                    need(p, c, t.t_ccd_l, Constraint::TccdL, out)
                } else {
                    need(p, c, t.t_ccd_s, Constraint::TccdS, out)
                }
            }
            (Wr, Rd) => {
                if same_group {
                    need(p, c, t.cwl + burst + t.t_wtr_l, Constraint::TwtrL, out)
                } else {
                    need(p, c, t.cwl + burst + t.t_wtr_s, Constraint::TwtrS, out)
                }
            }
            _ => {}
        }
    }

    fn replay_status(&mut self, c: &Command) -> Option<Violation> {
        let per_rank = self.org.banks_per_rank() as usize;
        let bank = self.org.bank_index(&c.addr);
        let rank_lo = c.addr.rank as usize * per_rank;
        let rows = &mut self.channels[c.addr.channel as usize].open_rows;
        let ok = match c.kind {
            CommandKind::Act => {
                let ok = rows[bank].is_none();
                rows[bank] = Some(c.addr.row);
                ok
            }
            CommandKind::Pre => rows[bank].take().is_some(),
            CommandKind::PreAll => {
                let slice = &mut rows[rank_lo..rank_lo + per_rank];
                let ok = slice.iter().any(Option::is_some);
                slice.iter_mut().for_each(|r| *r = None);
                ok
            }
            CommandKind::Rd | CommandKind::Wr => rows[bank] == Some(c.addr.row),
            CommandKind::RefAll => rows[rank_lo..rank_lo + per_rank]
                .iter()
                .all(Option::is_none),
        };
        (!ok).then_some(Violation {
            first: None,
            second: *c,
            constraint: Constraint::BankStatus,
            deficit: 0,
        })
    }
}

fn need(p: &Command, c: &Command, gap: u64, constraint: Constraint, out: &mut Vec<Violation>) {
    let earliest = p.time + gap;
    if c.time < earliest {
        out.push(Violation {
            first: Some(*p),
            second: *c,
            constraint,
            deficit: earliest - c.time,
        });
    }
}

/// Checks a whole trace. Empty result means every command was legal.
pub fn verify_trace(
    trace: &[Command],
    org: &DeviceOrg,
    timing: &TimingParams,
) -> Result<Vec<Violation>, DeviceError> {
    let mut checker = TraceChecker::new(*org, *timing);
    for cmd in trace {
        checker.feed(cmd)?;
    }
    Ok(checker.into_violations())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::device::Address;

    fn at(bg: u32, bank: u32, row: u32) -> Address {
        Address {
            bank_group: bg,
            bank,
            row,
            ..Default::default()
        }
    }

    fn c(kind: CommandKind, addr: Address, time: u64) -> Command {
        Command::new(kind, addr, time)
    }

    fn check(trace: &[Command]) -> Vec<Violation> {
        verify_trace(trace, &DeviceOrg::ddr5_4800(), &TimingParams::ddr5_4800()).unwrap()
    }

    #[test]
    fn empty_trace_is_clean() {
        assert!(check(&[]).is_empty());
    }

    #[test]
    fn reads_too_close_in_group_pair() {
        // groups 0 and 1 read 7 nCK apart
        let t = [
            c(CommandKind::Act, at(0, 0, 1), 0),
            c(CommandKind::Act, at(1, 0, 1), 8),
            c(CommandKind::Rd, at(0, 0, 1), 50),
            c(CommandKind::Rd, at(1, 0, 1), 57),
        ];
        let v = check(&t);
        let ccd: Vec<_> = v
            .iter()
            .filter(|v| v.constraint == Constraint::TccdS)
            .collect();
        assert_eq!(ccd.len(), 1);
        assert_eq!(ccd[0].deficit, 1);
        assert_eq!(ccd[0].first.unwrap().time, 50);
        // the bursts overlap as well
        assert!(v.iter().any(|v| v.constraint == Constraint::BusOverlap));
    }

    #[test]
    fn legal_sequence_is_clean() {
        let t = [
            c(CommandKind::Act, at(0, 0, 1), 0),
            c(CommandKind::Act, at(1, 0, 1), 8),
            c(CommandKind::Rd, at(0, 0, 1), 34),
            c(CommandKind::Rd, at(1, 0, 1), 42),
            c(CommandKind::PreAll, at(0, 0, 0), 85),
            c(CommandKind::RefAll, at(0, 0, 0), 119),
            c(CommandKind::Act, at(0, 0, 3), 119 + 708),
        ];
        assert_eq!(check(&t), vec![]);
    }

    #[test]
    fn trcd_short_by_one() {
        let t = [
            c(CommandKind::Act, at(0, 0, 1), 0),
            c(CommandKind::Rd, at(0, 0, 1), 33),
        ];
        let v = check(&t);
        assert_eq!(v.len(), 1);
        assert_eq!((v[0].constraint, v[0].deficit), (Constraint::Trcd, 1));
    }

    #[test]
    fn refresh_with_open_bank() {
        let t = [
            c(CommandKind::Act, at(0, 0, 1), 0),
            c(CommandKind::RefAll, at(0, 0, 0), 500),
        ];
        let v = check(&t);
        assert_eq!(v.len(), 1);
        assert_eq!(v[0].constraint, Constraint::BankStatus);
    }

    #[test]
    fn act_too_soon_after_refresh() {
        let t = [
            c(CommandKind::RefAll, at(0, 0, 0), 10),
            c(CommandKind::Act, at(3, 2, 1), 10 + 707),
        ];
        let v = check(&t);
        assert_eq!(v.len(), 1);
        assert_eq!((v[0].constraint, v[0].deficit), (Constraint::Trfc, 1));
    }

    #[test]
    fn faw_counts_four_previous() {
        let t: Vec<_> = (0..5)
            .map(|i| {
                c(
                    CommandKind::Act,
                    at(i, 0, 1),
                    8 * i as u64 - (i == 4) as u64,
                )
            })
            .collect();
        let v = check(&t);
        assert!(v
            .iter()
            .any(|v| v.constraint == Constraint::Tfaw && v.deficit == 1));
    }

    #[test]
    fn write_then_read_same_group() {
        let t = [
            c(CommandKind::Act, at(0, 0, 1), 0),
            c(CommandKind::Wr, at(0, 0, 1), 34),
            c(CommandKind::Rd, at(0, 0, 1), 34 + 32 + 8 + 23),
        ];
        let v = check(&t);
        assert_eq!(v.len(), 1);
        assert_eq!((v[0].constraint, v[0].deficit), (Constraint::TwtrL, 1));
    }

    #[test]
    fn unsorted_trace_rejected() {
        let t = [
            c(CommandKind::Act, at(0, 0, 1), 10),
            c(CommandKind::Act, at(1, 0, 1), 5),
        ];
        assert!(matches!(
            verify_trace(&t, &DeviceOrg::ddr5_4800(), &TimingParams::ddr5_4800()),
            Err(DeviceError::UnsortedTrace { index: 1 })
        ));
    }
}
