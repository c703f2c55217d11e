//! Sweep orchestration and the analytic bandwidth model.

mod analytic;
mod curves;
mod run;

pub use analytic::{
    achievable_bw, ref_penalty, ref_penalty_worst, ref_penalty_worst_trc, theoretical_bw,
    AnalyticModel,
};
pub use curves::{
    build_curves, default_nop_sweep, derive_seed, log_nop_sweep, trace_path, Curve, CurveSet,
    SweepOptions, DEFAULT_RATIOS,
};
pub use run::{run_point, run_point_verified, RunPointResult, Simulation};
