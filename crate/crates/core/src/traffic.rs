//! Pointer-chase + stream request generator.
//!
//! A single random walker keeps exactly one uniformly random read in flight
//! across the whole system. Each channel also has a stream injector that
//! walks bank groups, banks and columns in order and issues a fixed
//! read/write mix at a configurable rate.

use rand::Rng;
use rand_chacha::ChaCha8Rng;

use crate::controller::{Controller, ReqClass, Request};
use crate::device::{Address, DeviceOrg, Direction};
use crate::error::ConfigError;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GenConfig {
    pub read_ratio: f64,
    /// Cycles between stream injections on a channel; 1 means every cycle.
    pub nop_period: u64,
    pub seed: u64,
    pub target_random_reads: u64,
    pub warmup_random_reads: u64,
}

impl Default for GenConfig {
    fn default() -> Self {
        GenConfig {
            read_ratio: 1.0,
            nop_period: 1,
            seed: 1,
            target_random_reads: 20_000,
            warmup_random_reads: 1_000,
        }
    }
}

impl GenConfig {
    pub fn validate(&self) -> Result<(), ConfigError> {
        if !(0.5..=1.0).contains(&self.read_ratio) {
            return Err(ConfigError::range(
                "read_ratio",
                format!("{} not in [0.5, 1.0]", self.read_ratio),
            ));
        }
        if self.nop_period == 0 {
            return Err(ConfigError::range("nop_period", "must be at least 1"));
        }
        if self.target_random_reads == 0 {
            return Err(ConfigError::range(
                "target_random_reads",
                "must be at least 1",
            ));
        }
        Ok(())
    }
}

const RATIO_SCALE: u64 = 1_000_000;

/// Read ratio in parts per million, so the interleave is exact integer math.
pub fn ratio_ppm(read_ratio: f64) -> u64 {
    (read_ratio * RATIO_SCALE as f64).round() as u64
}

/// Deterministic evenly spread read/write interleave (error diffusion with a
/// one-half threshold). Over any run of `n` consecutive indices the read
/// count is within one of `read_ratio * n`.
pub fn rw_pattern(read_ratio: f64, index: u64) -> Direction {
    let ppm = ratio_ppm(read_ratio) as u128;
    let reads_before = |i: u128| (i * ppm + RATIO_SCALE as u128 / 2) / RATIO_SCALE as u128;
    let i = index as u128;
    if reads_before(i + 1) > reads_before(i) {
        Direction::Read
    } else {
        Direction::Write
    }
}

/// Stream address for position `cursor` on `channel`: bank group varies
/// fastest, then bank, then rank, then column, then row.
pub fn next_stream_address(org: &DeviceOrg, channel: u32, cursor: u64) -> Address {
    let mut n = cursor;
    let mut digit = |radix: u32| {
        let d = (n % u64::from(radix)) as u32;
        n /= u64::from(radix);
        d
    };
    let bank_group = digit(org.bank_groups_per_rank);
    let bank = digit(org.banks_per_bank_group);
    let rank = digit(org.ranks_per_channel);
    let column = digit(org.columns_per_row);
    let row = digit(org.rows_per_bank);
    Address {
        channel,
        rank,
        bank_group,
        bank,
        row,
        column,
    }
}

pub fn random_address(org: &DeviceOrg, rng: &mut ChaCha8Rng) -> Address {
    Address {
        channel: rng.gen_range(0..org.channels),
        rank: rng.gen_range(0..org.ranks_per_channel),
        bank_group: rng.gen_range(0..org.bank_groups_per_rank),
        bank: rng.gen_range(0..org.banks_per_bank_group),
        row: rng.gen_range(0..org.rows_per_bank),
        column: rng.gen_range(0..org.columns_per_row),
    }
}

/// Monotone request id source shared by all generators of one run.
#[derive(Debug, Clone, Default)]
pub struct IdSource(u64);

impl IdSource {
    pub fn next_id(&mut self) -> u64 {
        let id = self.0;
        self.0 += 1;
        id
    }
}

/// The pointer-chase stand-in: one outstanding random read at a time.
#[derive(Debug, Clone)]
pub struct WalkerState {
    rng: ChaCha8Rng,
    outstanding: Option<u64>,
    // generated but not yet accepted by a controller
    pending: Option<Request>,
    completed: u64,
    latencies_nck: Vec<u64>,
}

impl WalkerState {
    pub fn new(rng: ChaCha8Rng) -> Self {
        WalkerState {
            rng,
            outstanding: None,
            pending: None,
            completed: 0,
            latencies_nck: Vec::new(),
        }
    }

    pub fn outstanding(&self) -> Option<u64> {
        self.outstanding
    }

    pub fn completed(&self) -> u64 {
        self.completed
    }

    /// Latency of every completed random read, in completion order.
    pub fn latencies_nck(&self) -> &[u64] {
        &self.latencies_nck
    }

    /// Generates the first request of a run at `now`.
    pub fn start(&mut self, org: &DeviceOrg, ids: &mut IdSource, now: u64) {
        debug_assert!(self.outstanding.is_none());
        self.launch(org, ids, now);
    }

    fn launch(&mut self, org: &DeviceOrg, ids: &mut IdSource, at: u64) -> u64 {
        let addr = random_address(org, &mut self.rng);
        let req = Request::new(ids.next_id(), Direction::Read, ReqClass::Random, addr, at);
        let id = req.id;
        self.outstanding = Some(id);
        self.pending = Some(req);
        id
    }

    /// Observes this cycle's completions. When the outstanding read is among
    /// them its latency is recorded and, unless `stop` says the run is over,
    /// the next random read is generated for `now + 1`. Returns the new id.
    pub fn walker_tick(
        &mut self,
        completions: &[Request],
        now: u64,
        org: &DeviceOrg,
        ids: &mut IdSource,
        stop: impl FnOnce(u64) -> bool,
    ) -> Option<u64> {
        let out = self.outstanding?;
        let done = completions
            .iter()
            .find(|r| r.id == out && r.class == ReqClass::Random)?;
        let latency = done
            .latency()
            .expect("completed request has a completion time");
        self.latencies_nck.push(latency);
        self.completed += 1;
        self.outstanding = None;
        if stop(self.completed) {
            return None;
        }
        Some(self.launch(org, ids, now + 1))
    }

    /// Offers the pending random read to its controller once its generation
    /// time has come. A full queue leaves it pending for the next cycle.
    pub fn try_enqueue(&mut self, controllers: &mut [Controller], now: u64) {
        let Some(req) = self.pending.take() else {
            return;
        };
        if req.generated_at > now {
            self.pending = Some(req);
            return;
        }
        let ch = req.addr.channel as usize;
        if let Err(full) = controllers[ch].enqueue(req, now) {
            self.pending = Some(full.0);
        }
    }
}

#[derive(Debug, Clone)]
pub struct StreamInjectorState {
    pub channel: u32,
    pub countdown: u64,
    pub rw_index: u64,
    pub cursor: u64,
    pending: Option<Request>,
    injected: u64,
    reads: u64,
}

impl StreamInjectorState {
    pub fn new(channel: u32) -> Self {
        StreamInjectorState {
            channel,
            countdown: 0,
            rw_index: 0,
            cursor: 0,
            pending: None,
            injected: 0,
            reads: 0,
        }
    }

    pub fn injected(&self) -> u64 {
        self.injected
    }

    pub fn reads_injected(&self) -> u64 {
        self.reads
    }

    /// One cycle of the injector. Returns the id of a request the controller
    /// accepted this cycle.
    pub fn stream_tick(
        &mut self,
        gen: &GenConfig,
        org: &DeviceOrg,
        controller: &mut Controller,
        ids: &mut IdSource,
        now: u64,
    ) -> Option<u64> {
        if self.countdown > 0 {
            self.countdown -= 1;
            return None;
        }
        let req = match self.pending.take() {
            Some(r) => r,
            None => Request::new(
                ids.next_id(),
                rw_pattern(gen.read_ratio, self.rw_index),
                ReqClass::Stream,
                next_stream_address(org, self.channel, self.cursor),
                now,
            ),
        };
        let id = req.id;
        let is_read = req.kind == Direction::Read;
        match controller.enqueue(req, now) {
            Ok(()) => {
                self.countdown = gen.nop_period - 1;
                self.rw_index += 1;
                self.cursor += 1;
                self.injected += 1;
                self.reads += u64::from(is_read);
                Some(id)
            }
            Err(full) => {
                self.pending = Some(full.0);
                None
            }
        }
    }
}
