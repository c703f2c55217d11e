//! Closed-form peak and refresh-derated bandwidth.
//!
//! Bandwidths are decimal GB/s (10^9 B/s); penalties are ns and are taken
//! from the ns-domain timing values, before any rounding to clocks.

use crate::device::{DeviceOrg, TimingParams};
use crate::error::ConfigError;

/// Peak data rate of all channels: two transfers per command clock.
pub fn theoretical_bw(org: &DeviceOrg, timing: &TimingParams) -> f64 {
    let transfers_per_ns = 2.0 / timing.tck_ns;
    f64::from(org.channels) * transfers_per_ns * f64::from(org.channel_width_bits) / 8.0
}

/// Minimum bus idle time one all-bank refresh costs between two reads:
/// tRTP + tRP + tRFC + tRCD.
pub fn ref_penalty(timing: &TimingParams) -> f64 {
    let ns = &timing.ns;
    ns.t_rtp + ns.t_rp + ns.t_rfc + ns.t_rcd
}

/// Penalty when the refresh lands right after a freshly opened row, so the
/// precharge waits for tRAS instead of tRTP: (tRAS - tRCD) + tRP + tRFC + tRCD.
pub fn ref_penalty_worst(timing: &TimingParams) -> f64 {
    let ns = &timing.ns;
    (ns.t_ras - ns.t_rcd) + ns.t_rp + ns.t_rfc + ns.t_rcd
}

/// The same worst case with the refresh term read literally as the row cycle
/// time tRC = tRAS + tRP instead of tRFC.
pub fn ref_penalty_worst_trc(timing: &TimingParams) -> f64 {
    let ns = &timing.ns;
    let t_rc = ns.t_ras + ns.t_rp;
    (ns.t_ras - ns.t_rcd) + ns.t_rp + t_rc + ns.t_rcd
}

fn derate(bw_theoretical: f64, penalty_ns: f64, t_refi_ns: f64) -> Result<f64, ConfigError> {
    if t_refi_ns.is_nan() || t_refi_ns <= 0.0 {
        return Err(ConfigError::range("tREFI_ns", "must be positive"));
    }
    if penalty_ns > t_refi_ns {
        return Err(ConfigError::range(
            "tREFI_ns",
            format!("refresh penalty {penalty_ns:.3} ns exceeds tREFI {t_refi_ns:.3} ns"),
        ));
    }
    Ok(bw_theoretical * (1.0 - penalty_ns / t_refi_ns))
}

/// `bw_theoretical * (1 - ref_penalty / tREFI)`.
pub fn achievable_bw(bw_theoretical: f64, timing: &TimingParams) -> Result<f64, ConfigError> {
    derate(bw_theoretical, ref_penalty(timing), timing.ns.t_refi)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AnalyticModel {
    pub bw_theoretical: f64,
    pub ref_penalty: f64,
    pub bw_achievable: f64,
    pub ref_penalty_worst: f64,
    pub bw_achievable_worst: f64,
    pub ref_penalty_worst_trc: f64,
}

impl AnalyticModel {
    pub fn compute(org: &DeviceOrg, timing: &TimingParams) -> Result<Self, ConfigError> {
        let bw_theoretical = theoretical_bw(org, timing);
        let worst = ref_penalty_worst(timing);
        Ok(AnalyticModel {
            bw_theoretical,
            ref_penalty: ref_penalty(timing),
            bw_achievable: achievable_bw(bw_theoretical, timing)?,
            ref_penalty_worst: worst,
            bw_achievable_worst: derate(bw_theoretical, worst, timing.ns.t_refi)?,
            ref_penalty_worst_trc: ref_penalty_worst_trc(timing),
        })
    }

    /// Plain `key=value` summary, one per line, fixed 3-decimal formatting.
    pub fn summary(&self) -> String {
        format!(
            "bw_theoretical_gbps={:.3}\n\
             ref_penalty_ns={:.3}\n\
             bw_achievable_gbps={:.3}\n\
             ref_penalty_worst_ns={:.3}\n\
             bw_achievable_worst_gbps={:.3}\n\
             ref_penalty_worst_trc_ns={:.3}\n",
            self.bw_theoretical,
            self.ref_penalty,
            self.bw_achievable,
            self.ref_penalty_worst,
            self.bw_achievable_worst,
            self.ref_penalty_worst_trc,
        )
    }
}
