use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::controller::{Controller, ControllerStats, Request};
use crate::device::{Command, DeviceOrg, TimingParams, TraceChecker};
use crate::error::ExperimentError;
use crate::traffic::{GenConfig, IdSource, StreamInjectorState, WalkerState};

/// One point on a latency-bandwidth curve.
#[derive(Debug, Clone, PartialEq)]
pub struct RunPointResult {
    pub read_ratio: f64,
    pub nop_period: u64,
    pub achieved_bw: f64,
    pub avg_latency: f64,
    pub p99_latency: f64,
    pub row_hit_rate: f64,
    /// Largest per-rank REFab count inside the measurement window.
    pub refresh_count: u64,
    /// Smallest per-rank REFab count inside the measurement window.
    pub refresh_count_min: u64,
    pub random_reads_completed: u64,
    pub seed: u64,
    pub window_nck: u64,
    pub stream_requests: u64,
    pub stream_reads: u64,
    /// Trace-oracle violation count, when the run was verified.
    pub violations: Option<u64>,
}

#[derive(Debug, Clone, Copy)]
struct Snapshot {
    now: u64,
    stats: ControllerStats,
}

/// A complete simulated system for one run: every channel controller, the
/// random walker and one stream injector per channel.
pub struct Simulation {
    org: DeviceOrg,
    timing: TimingParams,
    gen: GenConfig,
    controllers: Vec<Controller>,
    injectors: Vec<StreamInjectorState>,
    walker: WalkerState,
    ids: IdSource,
}

impl Simulation {
    /// `timing` is what the controllers schedule against.
    pub fn new(
        org: DeviceOrg,
        timing: TimingParams,
        gen: GenConfig,
    ) -> Result<Self, ExperimentError> {
        org.validate()?;
        timing.validate()?;
        gen.validate()?;
        Ok(Simulation {
            org,
            timing,
            gen,
            controllers: (0..org.channels)
                .map(|ch| Controller::new(ch, org, timing))
                .collect(),
            injectors: (0..org.channels).map(StreamInjectorState::new).collect(),
            walker: WalkerState::new(ChaCha8Rng::seed_from_u64(gen.seed)),
            ids: IdSource::default(),
        })
    }

    pub fn controllers(&self) -> &[Controller] {
        &self.controllers
    }

    fn totals(&self) -> ControllerStats {
        let mut s = ControllerStats::default();
        for c in &self.controllers {
            s.accumulate(&c.drain_stats(0));
        }
        s
    }

    /// Runs until the warmup plus target random reads have completed.
    /// Every issued command is passed to `sink` in issue order.
    pub fn run(
        &mut self,
        sink: &mut dyn FnMut(&Command),
    ) -> Result<RunPointResult, ExperimentError> {
        let org = self.org;
        let gen = self.gen;
        let total = gen.warmup_random_reads + gen.target_random_reads;
        let starvation_limit = (100 * self.timing.t_refi).max(1_000_000);

        let mut done: Vec<Request> = Vec::new();
        let mut window_start = (gen.warmup_random_reads == 0).then_some(Snapshot {
            now: 0,
            stats: ControllerStats::default(),
        });
        let mut last_progress = 0u64;
        self.walker.start(&org, &mut self.ids, 0);

        let mut now = 0u64;
        let window_end = loop {
            done.clear();
            for c in &mut self.controllers {
                if let Some(cmd) = c.tick(now, &mut done) {
                    sink(&cmd);
                }
            }
            if !done.is_empty() {
                let before = self.walker.completed();
                self.walker
                    .walker_tick(&done, now, &org, &mut self.ids, |n| n >= total);
                if self.walker.completed() != before {
                    last_progress = now;
                    let n = self.walker.completed();
                    if n == gen.warmup_random_reads && window_start.is_none() {
                        window_start = Some(Snapshot {
                            now,
                            stats: self.totals(),
                        });
                    }
                    if n >= total {
                        break Snapshot {
                            now,
                            stats: self.totals(),
                        };
                    }
                }
            }
            self.walker.try_enqueue(&mut self.controllers, now);
            for (inj, c) in self.injectors.iter_mut().zip(self.controllers.iter_mut()) {
                inj.stream_tick(&gen, &org, c, &mut self.ids, now);
            }
            if now - last_progress > starvation_limit {
                return Err(ExperimentError::Starvation {
                    now,
                    limit: starvation_limit,
                });
            }
            now += 1;
        };
        let start = window_start.expect("window starts before it ends");
        Ok(self.summarize(start, window_end))
    }

    fn summarize(&self, start: Snapshot, end: Snapshot) -> RunPointResult {
        let window = end.stats.delta(&start.stats);
        let window_nck = end.now - start.now;
        let window_ns = self.timing.nck_to_ns(window_nck);
        let bytes = window.bytes_read + window.bytes_written;
        let achieved_bw = if window_ns > 0.0 {
            bytes as f64 / window_ns
        } else {
            0.0
        };

        let skip = self.gen.warmup_random_reads as usize;
        let mut lat: Vec<u64> = self.walker.latencies_nck()[skip..].to_vec();
        let n = lat.len();
        let avg_nck = lat.iter().sum::<u64>() as f64 / n.max(1) as f64;
        lat.sort_unstable();
        let p99_nck = if n == 0 {
            0
        } else {
            lat[(n * 99).div_ceil(100) - 1]
        };

        let accesses = window.row_hits + window.row_misses;
        let row_hit_rate = if accesses == 0 {
            0.0
        } else {
            window.row_hits as f64 / accesses as f64
        };

        let mut per_rank = Vec::new();
        for c in &self.controllers {
            for rank in 0..self.org.ranks_per_channel {
                per_rank.push(
                    c.refresh_log()
                        .iter()
                        .filter(|(r, t)| *r == rank && *t > start.now && *t <= end.now)
                        .count() as u64,
                );
            }
        }

        RunPointResult {
            read_ratio: self.gen.read_ratio,
            nop_period: self.gen.nop_period,
            achieved_bw,
            avg_latency: avg_nck * self.timing.tck_ns,
            p99_latency: self.timing.nck_to_ns(p99_nck),
            row_hit_rate,
            refresh_count: per_rank.iter().copied().max().unwrap_or(0),
            refresh_count_min: per_rank.iter().copied().min().unwrap_or(0),
            random_reads_completed: n as u64,
            seed: self.gen.seed,
            window_nck,
            stream_requests: self.injectors.iter().map(|i| i.injected()).sum(),
            stream_reads: self.injectors.iter().map(|i| i.reads_injected()).sum(),
            violations: None,
        }
    }
}

/// Simulates one configuration point. Deterministic in `gen.seed`.
pub fn run_point(
    org: &DeviceOrg,
    timing: &TimingParams,
    gen: &GenConfig,
) -> Result<RunPointResult, ExperimentError> {
    Simulation::new(*org, *timing, *gen)?.run(&mut |_| {})
}

/// Like [`run_point`], with every issued command checked by the trace oracle.
pub fn run_point_verified(
    org: &DeviceOrg,
    timing: &TimingParams,
    gen: &GenConfig,
) -> Result<(RunPointResult, TraceChecker), ExperimentError> {
    let mut checker = TraceChecker::new(*org, *timing).with_limit(100);
    let mut sim = Simulation::new(*org, *timing, *gen)?;
    let mut result = sim.run(&mut |cmd| {
        checker
            .feed(cmd)
            .expect("simulator emits in-range commands in time order")
    })?;
    result.violations = Some(checker.violation_count());
    Ok((result, checker))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::experiment::theoretical_bw;

    fn quick(nop: u64, ratio: f64) -> GenConfig {
        GenConfig {
            read_ratio: ratio,
            nop_period: nop,
            seed: 7,
            target_random_reads: 300,
            warmup_random_reads: 30,
        }
    }

    fn small() -> DeviceOrg {
        DeviceOrg {
            channels: 2,
            ..DeviceOrg::ddr5_4800()
        }
    }

    #[test]
    fn deterministic_for_same_seed() {
        let t = TimingParams::ddr5_4800();
        let a = run_point(&small(), &t, &quick(3, 0.7)).unwrap();
        let b = run_point(&small(), &t, &quick(3, 0.7)).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.random_reads_completed, 300);
    }

    #[test]
    fn bandwidth_bounded_by_peak() {
        let t = TimingParams::ddr5_4800();
        let org = small();
        let r = run_point(&org, &t, &quick(1, 1.0)).unwrap();
        assert!(r.achieved_bw <= theoretical_bw(&org, &t));
        assert!(
            r.achieved_bw > 0.8 * theoretical_bw(&org, &t),
            "{}",
            r.achieved_bw
        );
    }

    #[test]
    fn verified_run_is_clean() {
        let t = TimingParams::ddr5_4800();
        let (r, checker) = run_point_verified(&small(), &t, &quick(2, 0.5)).unwrap();
        assert_eq!(r.violations, Some(0), "{:?}", checker.violations().first());
        assert!(checker.commands_checked() > 1000);
    }

    #[test]
    fn idle_latency_floor() {
        let t = TimingParams::ddr5_4800();
        let r = run_point(&small(), &t, &quick(10_000, 1.0)).unwrap();
        let floor = t.nck_to_ns(t.t_rcd + t.cl + 8);
        assert!(r.avg_latency >= floor, "{}", r.avg_latency);
        assert!(r.avg_latency < 60.0, "{}", r.avg_latency);
    }

    #[test]
    fn bad_config_fails_before_simulating() {
        let org = DeviceOrg {
            channels: 0,
            ..DeviceOrg::ddr5_4800()
        };
        let err = run_point(&org, &TimingParams::ddr5_4800(), &quick(1, 1.0)).unwrap_err();
        assert!(matches!(err, ExperimentError::Config(_)));
    }
}
