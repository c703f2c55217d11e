//! Per-channel memory controller: FR-FCFS over 32-entry read and write
//! queues, open-page policy, all-bank refresh every tREFI, watermark-based
//! write draining. Reads are never served from the write queue.

use std::collections::VecDeque;
use std::fmt;

use crate::device::{
    Address, BankStatus, ChannelState, Command, CommandKind, DeviceOrg, Direction, TimingParams,
};

pub const QUEUE_CAPACITY: usize = 32;
pub const DRAIN_HIGH_WATERMARK: usize = 16;
pub const DRAIN_LOW_WATERMARK: usize = 8;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ReqClass {
    Random,
    Stream,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Request {
    pub id: u64,
    pub kind: Direction,
    pub class: ReqClass,
    pub addr: Address,
    pub generated_at: u64,
    pub enqueued_at: u64,
    pub completed_at: Option<u64>,
    /// Set once the controller has activated a row on this request's behalf.
    pub activated: bool,
}

impl Request {
    pub fn new(
        id: u64,
        kind: Direction,
        class: ReqClass,
        addr: Address,
        generated_at: u64,
    ) -> Self {
        Request {
            id,
            kind,
            class,
            addr,
            generated_at,
            enqueued_at: generated_at,
            completed_at: None,
            activated: false,
        }
    }

    pub fn latency(&self) -> Option<u64> {
        self.completed_at.map(|c| c - self.generated_at)
    }
}

/// Backpressure: the target queue is full. The request is handed back.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct QueueFull(pub Request);

impl fmt::Display for QueueFull {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "queue full (request {})", self.0.id)
    }
}

impl std::error::Error for QueueFull {}

/// Cumulative counters; never reset during a run.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct ControllerStats {
    pub refreshes: u64,
    pub row_hits: u64,
    pub row_misses: u64,
    pub bytes_read: u64,
    pub bytes_written: u64,
    pub reads_completed: u64,
    pub writes_completed: u64,
}

impl ControllerStats {
    pub fn delta(&self, earlier: &ControllerStats) -> ControllerStats {
        ControllerStats {
            refreshes: self.refreshes - earlier.refreshes,
            row_hits: self.row_hits - earlier.row_hits,
            row_misses: self.row_misses - earlier.row_misses,
            bytes_read: self.bytes_read - earlier.bytes_read,
            bytes_written: self.bytes_written - earlier.bytes_written,
            reads_completed: self.reads_completed - earlier.reads_completed,
            writes_completed: self.writes_completed - earlier.writes_completed,
        }
    }

    pub fn accumulate(&mut self, other: &ControllerStats) {
        self.refreshes += other.refreshes;
        self.row_hits += other.row_hits;
        self.row_misses += other.row_misses;
        self.bytes_read += other.bytes_read;
        self.bytes_written += other.bytes_written;
        self.reads_completed += other.reads_completed;
        self.writes_completed += other.writes_completed;
    }
}

#[derive(Debug, Clone)]
pub struct Controller {
    org: DeviceOrg,
    t_refi: u64,
    device: ChannelState,
    read_q: Vec<Request>,
    write_q: Vec<Request>,
    capacity: usize,
    refresh_deadline: u64,
    refresh_pending: bool,
    drain_mode: bool,
    // nothing can issue before wake_at unless the queues change
    wake_at: u64,
    dirty: bool,
    inflight: VecDeque<(u64, Request)>,
    stats: ControllerStats,
    refresh_log: Vec<(u32, u64)>,
    refreshed: Vec<bool>,
}

impl Controller {
    pub fn new(channel: u32, org: DeviceOrg, timing: TimingParams) -> Self {
        Controller {
            org,
            t_refi: timing.t_refi,
            device: ChannelState::new(channel, org, timing),
            read_q: Vec::with_capacity(QUEUE_CAPACITY),
            write_q: Vec::with_capacity(QUEUE_CAPACITY),
            capacity: QUEUE_CAPACITY,
            refresh_deadline: timing.t_refi,
            refresh_pending: false,
            drain_mode: false,
            wake_at: 0,
            dirty: true,
            inflight: VecDeque::new(),
            stats: ControllerStats::default(),
            refresh_log: Vec::new(),
            refreshed: vec![false; org.ranks_per_channel as usize],
        }
    }

    pub fn channel(&self) -> u32 {
        self.device.channel()
    }

    pub fn device(&self) -> &ChannelState {
        &self.device
    }

    pub fn read_occupancy(&self) -> usize {
        self.read_q.len()
    }

    pub fn write_occupancy(&self) -> usize {
        self.write_q.len()
    }

    pub fn drain_mode(&self) -> bool {
        self.drain_mode
    }

    pub fn refresh_deadline(&self) -> u64 {
        self.refresh_deadline
    }

    /// `(rank, issue time)` of every REFab so far.
    pub fn refresh_log(&self) -> &[(u32, u64)] {
        &self.refresh_log
    }

    pub fn has_work(&self) -> bool {
        !self.read_q.is_empty() || !self.write_q.is_empty() || !self.inflight.is_empty()
    }

    pub fn enqueue(&mut self, mut req: Request, now: u64) -> Result<(), QueueFull> {
        debug_assert_eq!(req.addr.channel, self.channel());
        let q = match req.kind {
            Direction::Read => &mut self.read_q,
            Direction::Write => &mut self.write_q,
        };
        if q.len() >= self.capacity {
            return Err(QueueFull(req));
        }
        req.enqueued_at = now;
        q.push(req);
        self.dirty = true;
        Ok(())
    }

    pub fn drain_stats(&self, _now: u64) -> ControllerStats {
        self.stats
    }

    /// Advances one command clock. Requests whose data burst ended at or
    /// before `now` are appended to `completed`; at most one command issues.
    pub fn tick(&mut self, now: u64, completed: &mut Vec<Request>) -> Option<Command> {
        while self.inflight.front().is_some_and(|(end, _)| *end <= now) {
            let (end, mut req) = self.inflight.pop_front().unwrap();
            req.completed_at = Some(end);
            match req.kind {
                Direction::Read => {
                    self.stats.reads_completed += 1;
                    self.stats.bytes_read += self.org.request_bytes();
                }
                Direction::Write => {
                    self.stats.writes_completed += 1;
                    self.stats.bytes_written += self.org.request_bytes();
                }
            }
            completed.push(req);
        }

        if !self.dirty && now < self.wake_at {
            return None;
        }
        self.dirty = false;

        if !self.refresh_pending && now >= self.refresh_deadline {
            self.refresh_pending = true;
        }
        if self.refresh_pending {
            return self.tick_refresh(now);
        }

        if self.write_q.len() >= DRAIN_HIGH_WATERMARK {
            self.drain_mode = true;
        } else if self.write_q.len() <= DRAIN_LOW_WATERMARK {
            self.drain_mode = false;
        }
        let serve_writes = (self.drain_mode && !self.write_q.is_empty()) || self.read_q.is_empty();

        let pick = {
            let queue = if serve_writes {
                &self.write_q
            } else {
                &self.read_q
            };
            self.select(queue, now)
        };
        match pick {
            Selection::Issue(idx, kind) => {
                let cmd = self.issue_for(serve_writes, idx, kind, now);
                self.dirty = true;
                Some(cmd)
            }
            Selection::Wait(at) => {
                self.wake_at = at.min(self.refresh_deadline);
                None
            }
        }
    }

    fn tick_refresh(&mut self, now: u64) -> Option<Command> {
        let mut wake = u64::MAX;
        for rank in 0..self.org.ranks_per_channel {
            if self.refreshed[rank as usize] {
                continue;
            }
            let addr = Address {
                channel: self.channel(),
                rank,
                ..Default::default()
            };
            let kind = if self.device.any_open(rank) {
                CommandKind::PreAll
            } else {
                CommandKind::RefAll
            };
            let ready = self
                .device
                .ready_at(kind, &addr)
                .expect("refresh path commands are status-admissible");
            if ready > now {
                wake = wake.min(ready);
                continue;
            }
            let cmd = Command::new(kind, addr, now);
            self.device
                .issue(&cmd, u64::MAX)
                .expect("controller issued an illegal refresh command");
            if kind == CommandKind::RefAll {
                self.stats.refreshes += 1;
                self.refresh_log.push((rank, now));
                self.refreshed[rank as usize] = true;
                if self.refreshed.iter().all(|&r| r) {
                    self.refreshed.iter_mut().for_each(|r| *r = false);
                    self.refresh_pending = false;
                    self.refresh_deadline += self.t_refi;
                }
            }
            self.dirty = true;
            return Some(cmd);
        }
        self.wake_at = wake;
        None
    }

    fn needed(&self, req: &Request) -> CommandKind {
        match self.device.bank(&req.addr).status {
            BankStatus::Open(row) if row == req.addr.row => match req.kind {
                Direction::Read => CommandKind::Rd,
                Direction::Write => CommandKind::Wr,
            },
            BankStatus::Open(_) => CommandKind::Pre,
            BankStatus::Closed => CommandKind::Act,
        }
    }

    /// FR-FCFS: the oldest ready column command, else the oldest ready row
    /// command. A PRE is held back while an older request in the same queue
    /// still hits the open row.
    fn select(&self, queue: &[Request], now: u64) -> Selection {
        let mut first_row_cmd: Option<(usize, CommandKind)> = None;
        let mut earliest = u64::MAX;
        for (i, req) in queue.iter().enumerate() {
            let kind = self.needed(req);
            if kind == CommandKind::Pre && self.older_hit(&queue[..i], &req.addr) {
                continue;
            }
            let Some(ready) = self.device.ready_at(kind, &req.addr) else {
                continue;
            };
            if ready <= now {
                if kind.is_column() {
                    return Selection::Issue(i, kind);
                }
                if first_row_cmd.is_none() {
                    first_row_cmd = Some((i, kind));
                }
            } else {
                earliest = earliest.min(ready);
            }
        }
        match first_row_cmd {
            Some((i, kind)) => Selection::Issue(i, kind),
            None => Selection::Wait(earliest),
        }
    }

    fn older_hit(&self, older: &[Request], addr: &Address) -> bool {
        let BankStatus::Open(open_row) = self.device.bank(addr).status else {
            return false;
        };
        older
            .iter()
            .any(|r| r.addr.same_bank(addr) && r.addr.row == open_row)
    }

    fn issue_for(&mut self, writes: bool, idx: usize, kind: CommandKind, now: u64) -> Command {
        let queue = if writes {
            &mut self.write_q
        } else {
            &mut self.read_q
        };
        let addr = queue[idx].addr;
        let cmd = Command::new(kind, addr, now).normalized();
        let burst = self
            .device
            .issue(&cmd, queue[idx].id)
            .expect("controller issued an illegal command");
        match kind {
            CommandKind::Act => queue[idx].activated = true,
            CommandKind::Rd | CommandKind::Wr => {
                let req = queue.remove(idx);
                if req.activated {
                    self.stats.row_misses += 1;
                } else {
                    self.stats.row_hits += 1;
                }
                let burst = burst.expect("column commands occupy the data bus");
                self.inflight.push_back((burst.end, req));
            }
            _ => {}
        }
        cmd
    }
}

enum Selection {
    Issue(usize, CommandKind),
    Wait(u64),
}
