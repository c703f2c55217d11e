use std::fs::File;
use std::io::BufWriter;
use std::path::{Path, PathBuf};

use log::info;
use rayon::prelude::*;

use super::run::{RunPointResult, Simulation};
use crate::device::{DeviceOrg, TimingParams, TraceChecker};
use crate::error::{ConfigError, ExperimentError};
use crate::trace::TraceWriter;
use crate::traffic::{ratio_ppm, GenConfig};

/// The read ratios of a standard sweep.
pub const DEFAULT_RATIOS: [f64; 6] = [1.0, 0.9, 0.8, 0.7, 0.6, 0.5];

#[derive(Debug, Clone, Default)]
pub struct SweepOptions {
    /// Worker threads; 0 uses every available core.
    pub jobs: usize,
    /// Check every run's command trace with the legality oracle.
    pub verify: bool,
    /// Dump command traces here; see [`trace_path`].
    pub trace_out: Option<PathBuf>,
}

/// Trace file for one point. A single-point sweep writes to `base` as given;
/// otherwise `_r<ratio%>_n<nop>` is inserted before the extension.
pub fn trace_path(base: &Path, multi: bool, read_ratio: f64, nop_period: u64) -> PathBuf {
    if !multi {
        return base.to_path_buf();
    }
    let stem = base
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_default();
    let pct = (ratio_ppm(read_ratio) + 5_000) / 10_000;
    let name = match base.extension() {
        Some(ext) => format!("{stem}_r{pct}_n{nop_period}.{}", ext.to_string_lossy()),
        None => format!("{stem}_r{pct}_n{nop_period}"),
    };
    base.with_file_name(name)
}

fn run_one(
    org: &DeviceOrg,
    timing: &TimingParams,
    gen: &GenConfig,
    verify: bool,
    trace: Option<&Path>,
) -> Result<RunPointResult, ExperimentError> {
    let mut checker = verify.then(|| TraceChecker::new(*org, *timing).with_limit(100));
    let mut writer = match trace {
        Some(p) => Some(TraceWriter::new(BufWriter::new(File::create(p)?))?),
        None => None,
    };
    let mut io_error = None;
    let mut result = Simulation::new(*org, *timing, *gen)?.run(&mut |cmd| {
        if let Some(c) = checker.as_mut() {
            c.feed(cmd)
                .expect("simulator emits in-range commands in time order");
        }
        if let Some(w) = writer.as_mut() {
            if let Err(e) = w.write(cmd) {
                io_error.get_or_insert(e);
            }
        }
    })?;
    if let Some(e) = io_error {
        return Err(e.into());
    }
    if let Some(w) = writer {
        w.finish()?;
    }
    result.violations = checker.map(|c| c.violation_count());
    Ok(result)
}

/// One latency-bandwidth curve: a fixed read ratio, points ordered from the
/// lowest offered load (largest NOP period) to the highest.
#[derive(Debug, Clone, PartialEq)]
pub struct Curve {
    pub read_ratio: f64,
    pub points: Vec<RunPointResult>,
}

impl Curve {
    pub fn max_bw(&self) -> f64 {
        self.points
            .iter()
            .map(|p| p.achieved_bw)
            .fold(0.0, f64::max)
    }
}

/// Curves ordered by descending read ratio.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct CurveSet {
    pub curves: Vec<Curve>,
}

impl CurveSet {
    pub fn points(&self) -> impl Iterator<Item = &RunPointResult> {
        self.curves.iter().flat_map(|c| c.points.iter())
    }

    pub fn len(&self) -> usize {
        self.curves.iter().map(|c| c.points.len()).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Per-point seed, a pure function of the sweep seed and the point's key.
pub fn derive_seed(seed: u64, read_ratio: f64, nop_period: u64) -> u64 {
    splitmix64(splitmix64(splitmix64(seed) ^ ratio_ppm(read_ratio)) ^ nop_period)
}

/// `points` log-spaced integer NOP periods from `max` down to `min`,
/// duplicates after rounding removed.
pub fn log_nop_sweep(max: u64, min: u64, points: usize) -> Vec<u64> {
    let (max, min) = (max.max(1), min.max(1));
    if points <= 1 || max == min {
        return vec![max];
    }
    let (lo, hi) = ((min as f64).ln(), (max as f64).ln());
    let mut out: Vec<u64> = (0..points)
        .map(|i| {
            (hi - (hi - lo) * i as f64 / (points - 1) as f64)
                .exp()
                .round() as u64
        })
        .collect();
    out.dedup();
    out
}

pub fn default_nop_sweep() -> Vec<u64> {
    log_nop_sweep(10_000, 1, 30)
}

/// Runs the cross product of `ratios` and `nop_sweep`. Points are independent
/// and may run in parallel; the result order depends only on the inputs.
pub fn build_curves(
    org: &DeviceOrg,
    timing: &TimingParams,
    base: &GenConfig,
    ratios: &[f64],
    nop_sweep: &[u64],
    opts: SweepOptions,
) -> Result<CurveSet, ExperimentError> {
    for &r in ratios {
        if !(0.5..=1.0).contains(&r) {
            return Err(ConfigError::range("ratios", format!("{r} not in [0.5, 1.0]")).into());
        }
    }
    if nop_sweep.windows(2).any(|w| w[0] <= w[1]) {
        return Err(ConfigError::range("nop_sweep", "must be strictly decreasing").into());
    }
    if nop_sweep.contains(&0) {
        return Err(ConfigError::range("nop_sweep", "NOP periods must be at least 1").into());
    }

    let mut ratios: Vec<f64> = ratios.to_vec();
    ratios.sort_by(|a, b| b.total_cmp(a));
    ratios.dedup_by_key(|r| ratio_ppm(*r));

    let jobs: Vec<(f64, u64)> = ratios
        .iter()
        .flat_map(|&r| nop_sweep.iter().map(move |&n| (r, n)))
        .collect();
    let multi = jobs.len() > 1;

    let work = || {
        jobs.par_iter()
            .map(|&(ratio, nop)| {
                let gen = GenConfig {
                    read_ratio: ratio,
                    nop_period: nop,
                    seed: derive_seed(base.seed, ratio, nop),
                    ..*base
                };
                let trace = opts
                    .trace_out
                    .as_deref()
                    .map(|p| trace_path(p, multi, ratio, nop));
                let res = run_one(org, timing, &gen, opts.verify, trace.as_deref());
                if let Ok(r) = &res {
                    info!(
                        "ratio {:.2} nop {:>5}: {:.1} GB/s, {:.1} ns",
                        ratio, nop, r.achieved_bw, r.avg_latency
                    );
                }
                res.map_err(|e| ExperimentError::Point {
                    ratio,
                    nop,
                    source: Box::new(e),
                })
            })
            .collect::<Result<Vec<_>, _>>()
    };
    let results = if opts.jobs == 0 {
        work()?
    } else {
        rayon::ThreadPoolBuilder::new()
            .num_threads(opts.jobs)
            .build()
            .map_err(|e| std::io::Error::other(e.to_string()))?
            .install(work)?
    };

    let mut curves: Vec<Curve> = ratios
        .iter()
        .map(|&read_ratio| Curve {
            read_ratio,
            points: Vec::new(),
        })
        .collect();
    for (r, (ratio, _)) in results.into_iter().zip(&jobs) {
        let idx = ratios.iter().position(|x| x == ratio).unwrap();
        curves[idx].points.push(r);
    }
    Ok(CurveSet { curves })
}
