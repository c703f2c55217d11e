use super::command::{Command, CommandKind, DataBurst, Direction};
use super::org::{Address, DeviceOrg};
use super::timing::TimingParams;
use crate::error::DeviceError;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BankStatus {
    Closed,
    Open(u32),
}

/// Bank-scoped earliest issue times. Every field only ever moves forward.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct BankState {
    pub status: BankStatus,
    pub next_act: u64,
    pub next_pre: u64,
    pub next_rd: u64,
    pub next_wr: u64,
}

impl Default for BankState {
    fn default() -> Self {
        BankState {
            status: BankStatus::Closed,
            next_act: 0,
            next_pre: 0,
            next_rd: 0,
            next_wr: 0,
        }
    }
}

#[derive(Debug, Clone, Copy, Default)]
struct GroupState {
    next_act: u64,
    next_rd: u64,
    next_wr: u64,
}

#[derive(Debug, Clone, Default)]
struct RankState {
    next_act: u64,
    next_rd: u64,
    next_wr: u64,
    next_ref: u64,
    open_banks: u32,
    // last four ACT times, oldest first
    act_window: [u64; 4],
    acts: u32,
}

#[derive(Debug, Clone, Copy, Default)]
struct BusState {
    // earliest legal start of the next read / write burst
    read_free: u64,
    write_free: u64,
}

fn bump(slot: &mut u64, t: u64) {
    if t > *slot {
        *slot = t;
    }
}

/// Device-side state of one channel: bank state machines, bank-group and rank
/// constraints, and data-bus occupancy.
#[derive(Debug, Clone)]
pub struct ChannelState {
    channel: u32,
    org: DeviceOrg,
    timing: TimingParams,
    banks: Vec<BankState>,
    groups: Vec<GroupState>,
    ranks: Vec<RankState>,
    bus: BusState,
    cmd_bus_free: u64,
}

impl ChannelState {
    pub fn new(channel: u32, org: DeviceOrg, timing: TimingParams) -> Self {
        ChannelState {
            channel,
            org,
            timing,
            banks: vec![BankState::default(); org.banks_per_channel() as usize],
            groups: vec![
                GroupState::default();
                (org.ranks_per_channel * org.bank_groups_per_rank) as usize
            ],
            ranks: vec![RankState::default(); org.ranks_per_channel as usize],
            bus: BusState::default(),
            cmd_bus_free: 0,
        }
    }

    pub fn channel(&self) -> u32 {
        self.channel
    }

    pub fn timing(&self) -> &TimingParams {
        &self.timing
    }

    pub fn bank(&self, addr: &Address) -> &BankState {
        &self.banks[self.org.bank_index(addr)]
    }

    pub fn any_open(&self, rank: u32) -> bool {
        self.ranks[rank as usize].open_banks > 0
    }

    fn rank_banks(&self, rank: u32) -> std::ops::Range<usize> {
        let per = self.org.banks_per_rank() as usize;
        let lo = rank as usize * per;
        lo..lo + per
    }

    /// Earliest time `kind` may issue to `addr` given the current state, or
    /// `None` if the bank status does not admit the command at all.
    ///
    /// `addr` must be inside the organization and on this channel.
    pub fn ready_at(&self, kind: CommandKind, addr: &Address) -> Option<u64> {
        let t = &self.timing;
        let rank = &self.ranks[addr.rank as usize];
        let at = match kind {
            CommandKind::Act => {
                let b = &self.banks[self.org.bank_index(addr)];
                if b.status != BankStatus::Closed {
                    return None;
                }
                let g = &self.groups[self.org.group_index(addr)];
                b.next_act.max(g.next_act).max(rank.next_act)
            }
            CommandKind::Pre => {
                let b = &self.banks[self.org.bank_index(addr)];
                if b.status == BankStatus::Closed {
                    return None;
                }
                b.next_pre
            }
            CommandKind::PreAll => {
                if rank.open_banks == 0 {
                    return None;
                }
                self.banks[self.rank_banks(addr.rank)]
                    .iter()
                    .map(|b| b.next_pre)
                    .max()
                    .unwrap_or(0)
            }
            CommandKind::Rd | CommandKind::Wr => {
                let b = &self.banks[self.org.bank_index(addr)];
                if b.status != BankStatus::Open(addr.row) {
                    return None;
                }
                let g = &self.groups[self.org.group_index(addr)];
                if kind == CommandKind::Rd {
                    b.next_rd
                        .max(g.next_rd)
                        .max(rank.next_rd)
                        .max(self.bus.read_free.saturating_sub(t.cl))
                } else {
                    b.next_wr
                        .max(g.next_wr)
                        .max(rank.next_wr)
                        .max(self.bus.write_free.saturating_sub(t.cwl))
                }
            }
            CommandKind::RefAll => {
                if rank.open_banks > 0 {
                    return None;
                }
                rank.next_ref
            }
        };
        Some(at.max(self.cmd_bus_free))
    }

    /// True iff `cmd` may issue at `cmd.time`.
    pub fn legal(&self, cmd: &Command) -> Result<bool, DeviceError> {
        self.org.check_address(&cmd.addr)?;
        if cmd.addr.channel != self.channel {
            return Err(DeviceError::BadAddress {
                field: "channel",
                value: cmd.addr.channel,
                limit: self.channel + 1,
            });
        }
        Ok(matches!(self.ready_at(cmd.kind, &cmd.addr), Some(at) if at <= cmd.time))
    }

    /// Applies `cmd` and advances every affected constraint. RD and WR return
    /// the data burst they occupy.
    pub fn issue(
        &mut self,
        cmd: &Command,
        request_id: u64,
    ) -> Result<Option<DataBurst>, DeviceError> {
        if !self.legal(cmd)? {
            return Err(DeviceError::IllegalCommand { cmd: *cmd });
        }
        let now = cmd.time;
        let t = self.timing;
        let addr = &cmd.addr;
        let bi = self.org.bank_index(addr);
        let gi = self.org.group_index(addr);
        let ri = addr.rank as usize;
        self.cmd_bus_free = now + 1;
        let burst_nck = self.org.burst_nck();

        let burst = match cmd.kind {
            CommandKind::Act => {
                let b = &mut self.banks[bi];
                b.status = BankStatus::Open(addr.row);
                bump(&mut b.next_rd, now + t.t_rcd);
                bump(&mut b.next_wr, now + t.t_rcd);
                bump(&mut b.next_pre, now + t.t_ras);
                bump(&mut self.groups[gi].next_act, now + t.t_rrd_l);
                let r = &mut self.ranks[ri];
                r.open_banks += 1;
                bump(&mut r.next_act, now + t.t_rrd_s);
                r.act_window.rotate_left(1);
                r.act_window[3] = now;
                r.acts += 1;
                if r.acts >= 4 {
                    // a fifth ACT must wait tFAW after the oldest of the last four
                    let oldest = r.act_window[0];
                    bump(&mut r.next_act, oldest + t.t_faw);
                }
                None
            }
            CommandKind::Pre => {
                let b = &mut self.banks[bi];
                b.status = BankStatus::Closed;
                bump(&mut b.next_act, now + t.t_rp);
                let r = &mut self.ranks[ri];
                r.open_banks -= 1;
                bump(&mut r.next_ref, now + t.t_rp);
                None
            }
            CommandKind::PreAll => {
                let range = self.rank_banks(addr.rank);
                for b in &mut self.banks[range] {
                    b.status = BankStatus::Closed;
                    bump(&mut b.next_act, now + t.t_rp);
                }
                let r = &mut self.ranks[ri];
                r.open_banks = 0;
                bump(&mut r.next_ref, now + t.t_rp);
                None
            }
            CommandKind::Rd => {
                let start = now + t.cl;
                let end = start + burst_nck;
                bump(&mut self.banks[bi].next_pre, now + t.t_rtp);
                bump(&mut self.groups[gi].next_rd, now + t.t_ccd_l);
                bump(&mut self.ranks[ri].next_rd, now + t.t_ccd_s);
                bump(&mut self.bus.read_free, end);
                bump(&mut self.bus.write_free, end + t.t_rtw_gap);
                Some(DataBurst {
                    channel: self.channel,
                    direction: Direction::Read,
                    start,
                    end,
                    request_id,
                })
            }
            CommandKind::Wr => {
                let start = now + t.cwl;
                let end = start + burst_nck;
                bump(&mut self.banks[bi].next_pre, end + t.t_wr);
                let g = &mut self.groups[gi];
                bump(&mut g.next_wr, now + t.t_ccd_l);
                bump(&mut g.next_rd, end + t.t_wtr_l);
                let r = &mut self.ranks[ri];
                bump(&mut r.next_wr, now + t.t_ccd_s);
                bump(&mut r.next_rd, end + t.t_wtr_s);
                bump(&mut self.bus.write_free, end);
                bump(&mut self.bus.read_free, end);
                Some(DataBurst {
                    channel: self.channel,
                    direction: Direction::Write,
                    start,
                    end,
                    request_id,
                })
            }
            CommandKind::RefAll => {
                let range = self.rank_banks(addr.rank);
                for b in &mut self.banks[range] {
                    bump(&mut b.next_act, now + t.t_rfc);
                }
                let r = &mut self.ranks[ri];
                bump(&mut r.next_act, now + t.t_rfc);
                bump(&mut r.next_ref, now + t.t_rfc);
                None
            }
        };
        Ok(burst)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn chan() -> ChannelState {
        ChannelState::new(0, DeviceOrg::ddr5_4800(), TimingParams::ddr5_4800())
    }

    fn at(bg: u32, bank: u32, row: u32) -> Address {
        Address {
            bank_group: bg,
            bank,
            row,
            ..Default::default()
        }
    }

    fn cmd(kind: CommandKind, addr: Address, time: u64) -> Command {
        Command::new(kind, addr, time)
    }

    #[test]
    fn read_respects_trcd() {
        let mut c = chan();
        c.issue(&cmd(CommandKind::Act, at(0, 0, 5), 100), 0)
            .unwrap();
        assert_eq!(c.bank(&at(0, 0, 5)).status, BankStatus::Open(5));
        assert!(c.bank(&at(0, 0, 5)).next_rd >= 134);
        assert!(!c.legal(&cmd(CommandKind::Rd, at(0, 0, 5), 133)).unwrap());
        assert!(c.legal(&cmd(CommandKind::Rd, at(0, 0, 5), 134)).unwrap());
    }

    #[test]
    fn read_to_other_group_after_tccd_s() {
        let mut c = chan();
        c.issue(&cmd(CommandKind::Act, at(0, 0, 1), 0), 0).unwrap();
        c.issue(&cmd(CommandKind::Act, at(1, 0, 1), 8), 0).unwrap();
        c.issue(&cmd(CommandKind::Rd, at(0, 0, 1), 50), 0).unwrap();
        assert!(!c.legal(&cmd(CommandKind::Rd, at(1, 0, 1), 57)).unwrap());
        assert!(c.legal(&cmd(CommandKind::Rd, at(1, 0, 1), 58)).unwrap());
        // same group needs tCCD_L
        c.issue(&cmd(CommandKind::Act, at(0, 1, 1), 60), 0).unwrap();
        assert_eq!(c.ready_at(CommandKind::Rd, &at(0, 1, 1)), Some(60 + 34));
    }

    #[test]
    fn read_burst_window() {
        let mut c = chan();
        c.issue(&cmd(CommandKind::Act, at(0, 0, 1), 0), 0).unwrap();
        let b = c
            .issue(&cmd(CommandKind::Rd, at(0, 0, 1), 40), 7)
            .unwrap()
            .unwrap();
        assert_eq!((b.start, b.end, b.request_id), (74, 82, 7));
        assert_eq!(b.direction, Direction::Read);
    }

    #[test]
    fn refresh_needs_all_banks_closed() {
        let mut c = chan();
        c.issue(&cmd(CommandKind::Act, at(2, 1, 9), 0), 0).unwrap();
        assert!(!c
            .legal(&cmd(CommandKind::RefAll, at(0, 0, 0), 500))
            .unwrap());
        assert_eq!(c.ready_at(CommandKind::PreAll, &at(0, 0, 0)), Some(77));
        c.issue(&cmd(CommandKind::PreAll, at(0, 0, 0), 77), 0)
            .unwrap();
        assert_eq!(c.ready_at(CommandKind::RefAll, &at(0, 0, 0)), Some(77 + 34));
        c.issue(&cmd(CommandKind::RefAll, at(0, 0, 0), 111), 0)
            .unwrap();
        for bg in 0..8 {
            for b in 0..4 {
                assert!(c.bank(&at(bg, b, 0)).next_act >= 111 + 708);
                assert_eq!(c.ready_at(CommandKind::Act, &at(bg, b, 0)), Some(111 + 708));
            }
        }
    }

    #[test]
    fn status_gates_commands() {
        let mut c = chan();
        assert_eq!(c.ready_at(CommandKind::Rd, &at(0, 0, 1)), None);
        assert_eq!(c.ready_at(CommandKind::Pre, &at(0, 0, 1)), None);
        c.issue(&cmd(CommandKind::Act, at(0, 0, 1), 0), 0).unwrap();
        assert_eq!(c.ready_at(CommandKind::Act, &at(0, 0, 2)), None);
        assert_eq!(c.ready_at(CommandKind::Rd, &at(0, 0, 2)), None);
    }

    #[test]
    fn write_to_read_turnaround() {
        let mut c = chan();
        c.issue(&cmd(CommandKind::Act, at(0, 0, 1), 0), 0).unwrap();
        c.issue(&cmd(CommandKind::Act, at(1, 0, 1), 8), 0).unwrap();
        // write burst [34+32, 74)
        c.issue(&cmd(CommandKind::Wr, at(0, 0, 1), 34), 0).unwrap();
        assert_eq!(c.ready_at(CommandKind::Rd, &at(0, 0, 1)), Some(74 + 24));
        assert_eq!(c.ready_at(CommandKind::Rd, &at(1, 0, 1)), Some(74 + 6));
    }

    #[test]
    fn read_to_write_turnaround() {
        let mut c = chan();
        c.issue(&cmd(CommandKind::Act, at(0, 0, 1), 0), 0).unwrap();
        c.issue(&cmd(CommandKind::Rd, at(0, 0, 1), 34), 0).unwrap();
        // read burst ends at 76, write burst may start at 78, command at 46
        assert_eq!(c.ready_at(CommandKind::Wr, &at(0, 0, 1)), Some(46));
    }

    #[test]
    fn four_activate_window() {
        let org = DeviceOrg::ddr5_4800();
        let timing = TimingParams {
            t_rrd_s: 2,
            t_rrd_l: 2,
            ..TimingParams::ddr5_4800()
        };
        let mut c = ChannelState::new(0, org, timing);
        for (i, bg) in (0..4).enumerate() {
            c.issue(&cmd(CommandKind::Act, at(bg, 0, 1), 2 * i as u64), 0)
                .unwrap();
        }
        assert_eq!(c.ready_at(CommandKind::Act, &at(4, 0, 1)), Some(32));
    }

    #[test]
    fn one_command_per_cycle() {
        let mut c = chan();
        c.issue(&cmd(CommandKind::Act, at(0, 0, 1), 5), 0).unwrap();
        assert!(!c.legal(&cmd(CommandKind::Act, at(3, 0, 1), 5)).unwrap());
    }

    #[test]
    fn illegal_issue_is_an_error() {
        let mut c = chan();
        let err = c
            .issue(&cmd(CommandKind::Rd, at(0, 0, 1), 0), 0)
            .unwrap_err();
        assert!(matches!(err, DeviceError::IllegalCommand { .. }));
    }

    #[test]
    fn malformed_address_is_an_error() {
        let c = chan();
        assert!(c.legal(&cmd(CommandKind::Act, at(9, 0, 1), 0)).is_err());
        let mut other = at(0, 0, 1);
        other.channel = 3;
        assert!(c.legal(&cmd(CommandKind::Act, other, 0)).is_err());
    }
}
