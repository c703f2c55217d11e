use crate::error::ConfigError;

/// DDR5-4800 command clock: 2400 MHz, i.e. 1/2.4 ns.
pub const DDR5_4800_TCK_NS: f64 = 1.0 / 2.4;

/// Quotients within this many clocks above an integer are treated as that
/// integer, so `7.5 ns / (1/2.4 ns)` is 18 nCK and not 19 from float noise.
const NCK_ROUNDING_SLACK: f64 = 1e-6;

/// Converts a duration in ns to whole command clocks, rounding up so that a
/// constraint is never under-waited.
pub fn ns_to_nck(value_ns: f64, tck_ns: f64) -> Result<u64, ConfigError> {
    if tck_ns.is_nan() || tck_ns <= 0.0 || !tck_ns.is_finite() {
        return Err(ConfigError::range(
            "tCK_ns",
            "clock period must be positive",
        ));
    }
    if value_ns.is_nan() || value_ns < 0.0 || !value_ns.is_finite() {
        return Err(ConfigError::range(
            "timing",
            format!("duration {value_ns} ns must be non-negative"),
        ));
    }
    let q = value_ns / tck_ns;
    Ok((q - NCK_ROUNDING_SLACK).ceil().max(0.0) as u64)
}

/// The timing values that are specified in ns and converted to clocks.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TimingNs {
    pub t_rcd: f64,
    pub t_ras: f64,
    pub t_rp: f64,
    pub t_rtp: f64,
    pub t_rfc: f64,
    pub t_refi: f64,
}

impl TimingNs {
    /// DDR5-4800AN, 16 Gb density.
    pub fn ddr5_4800() -> Self {
        TimingNs {
            t_rcd: 14.166,
            t_ras: 32.0,
            t_rp: 14.166,
            t_rtp: 7.5,
            t_rfc: 295.0,
            t_refi: 3900.0,
        }
    }
}

/// Every inter-command constraint in command clocks (nCK).
///
/// `ns` keeps the ns-domain inputs the first six clock values were derived
/// from; the analytic bandwidth model works on those directly.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TimingParams {
    pub tck_ns: f64,
    pub ns: TimingNs,
    pub cl: u64,
    pub cwl: u64,
    pub t_rcd: u64,
    pub t_ras: u64,
    pub t_rp: u64,
    pub t_rtp: u64,
    pub t_rfc: u64,
    pub t_refi: u64,
    pub t_ccd_s: u64,
    pub t_ccd_l: u64,
    pub t_wr: u64,
    pub t_wtr_s: u64,
    pub t_wtr_l: u64,
    pub t_rrd_s: u64,
    pub t_rrd_l: u64,
    pub t_faw: u64,
    /// Dead cycles between the end of a read burst and the start of a write
    /// burst on the same channel.
    pub t_rtw_gap: u64,
}

impl Default for TimingParams {
    fn default() -> Self {
        Self::ddr5_4800()
    }
}

impl TimingParams {
    pub fn ddr5_4800() -> Self {
        let mut t = TimingParams {
            tck_ns: DDR5_4800_TCK_NS,
            ns: TimingNs::ddr5_4800(),
            cl: 34,
            cwl: 32,
            t_rcd: 0,
            t_ras: 0,
            t_rp: 0,
            t_rtp: 0,
            t_rfc: 0,
            t_refi: 0,
            t_ccd_s: 8,
            t_ccd_l: 12,
            t_wr: 72,
            t_wtr_s: 6,
            t_wtr_l: 24,
            t_rrd_s: 8,
            t_rrd_l: 12,
            t_faw: 32,
            t_rtw_gap: 2,
        };
        t.resolve_ns().expect("built-in timing is valid");
        t
    }

    /// Recomputes the clock fields that come from ns-domain values.
    pub fn resolve_ns(&mut self) -> Result<(), ConfigError> {
        let tck = self.tck_ns;
        let conv = |key: &str, v: f64| {
            ns_to_nck(v, tck).map_err(|e| match e {
                ConfigError::OutOfRange { msg, .. } if key != "tCK_ns" => {
                    ConfigError::range(key, msg)
                }
                other => other,
            })
        };
        self.t_rcd = conv("tRCD_ns", self.ns.t_rcd)?;
        self.t_ras = conv("tRAS_ns", self.ns.t_ras)?;
        self.t_rp = conv("tRP_ns", self.ns.t_rp)?;
        self.t_rtp = conv("tRTP_ns", self.ns.t_rtp)?;
        self.t_rfc = conv("tRFC_ns", self.ns.t_rfc)?;
        self.t_refi = conv("tREFI_ns", self.ns.t_refi)?;
        Ok(())
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        let positive = [
            ("CL", self.cl),
            ("CWL", self.cwl),
            ("tRCD_ns", self.t_rcd),
            ("tRAS_ns", self.t_ras),
            ("tRP_ns", self.t_rp),
            ("tRTP_ns", self.t_rtp),
            ("tRFC_ns", self.t_rfc),
            ("tREFI_ns", self.t_refi),
            ("tCCD_S", self.t_ccd_s),
            ("tCCD_L", self.t_ccd_l),
            ("tWR", self.t_wr),
            ("tWTR_S", self.t_wtr_s),
            ("tWTR_L", self.t_wtr_l),
            ("tRRD_S", self.t_rrd_s),
            ("tRRD_L", self.t_rrd_l),
            ("tFAW", self.t_faw),
        ];
        for (key, v) in positive {
            if v == 0 {
                return Err(ConfigError::range(key, "must be greater than zero"));
            }
        }
        if self.t_ras < self.t_rcd {
            return Err(ConfigError::range("tRAS_ns", "tRAS must be >= tRCD"));
        }
        if self.t_refi <= self.t_rfc {
            return Err(ConfigError::range("tREFI_ns", "tREFI must be > tRFC"));
        }
        if self.t_ccd_l < self.t_ccd_s {
            return Err(ConfigError::range("tCCD_L", "tCCD_L must be >= tCCD_S"));
        }
        if self.t_wtr_l < self.t_wtr_s {
            return Err(ConfigError::range("tWTR_L", "tWTR_L must be >= tWTR_S"));
        }
        if self.t_rrd_l < self.t_rrd_s {
            return Err(ConfigError::range("tRRD_L", "tRRD_L must be >= tRRD_S"));
        }
        Ok(())
    }

    pub fn nck_to_ns(&self, nck: u64) -> f64 {
        nck as f64 * self.tck_ns
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn table_values_convert() {
        assert_eq!(ns_to_nck(14.166, DDR5_4800_TCK_NS).unwrap(), 34);
        assert_eq!(ns_to_nck(0.0, DDR5_4800_TCK_NS).unwrap(), 0);
        assert_eq!(ns_to_nck(295.0, DDR5_4800_TCK_NS).unwrap(), 708);
        assert_eq!(ns_to_nck(7.5, DDR5_4800_TCK_NS).unwrap(), 18);
        assert_eq!(ns_to_nck(32.0, DDR5_4800_TCK_NS).unwrap(), 77);
        assert_eq!(ns_to_nck(3900.0, DDR5_4800_TCK_NS).unwrap(), 9360);
    }

    #[test]
    fn truncated_clock_period_rounds_up() {
        // 0.41666 is slightly shorter than the real clock, so tRCD still
        // lands on 34 while tRFC needs a 709th clock.
        assert_eq!(ns_to_nck(14.166, 0.41666).unwrap(), 34);
        assert_eq!(ns_to_nck(295.0, 0.41666).unwrap(), 709);
    }

    #[test]
    fn bad_clock_rejected() {
        assert!(ns_to_nck(1.0, 0.0).is_err());
        assert!(ns_to_nck(1.0, -0.4).is_err());
        assert!(ns_to_nck(-1.0, 0.4).is_err());
    }

    #[test]
    fn defaults_resolve() {
        let t = TimingParams::ddr5_4800();
        assert_eq!(
            (t.t_rcd, t.t_ras, t.t_rp, t.t_rtp, t.t_rfc, t.t_refi),
            (34, 77, 34, 18, 708, 9360)
        );
        t.validate().unwrap();
    }

    #[test]
    fn refi_must_exceed_rfc() {
        let mut t = TimingParams::ddr5_4800();
        t.ns.t_rfc = 4000.0;
        t.resolve_ns().unwrap();
        assert_eq!(t.validate().unwrap_err().key(), Some("tREFI_ns"));
    }

    proptest! {
        #[test]
        fn conversion_is_monotone(a in 0.0f64..5000.0, b in 0.0f64..5000.0) {
            let (lo, hi) = if a <= b { (a, b) } else { (b, a) };
            prop_assert!(ns_to_nck(lo, DDR5_4800_TCK_NS).unwrap() <= ns_to_nck(hi, DDR5_4800_TCK_NS).unwrap());
        }

        #[test]
        fn conversion_never_under_waits(v in 0.0f64..5000.0) {
            let n = ns_to_nck(v, DDR5_4800_TCK_NS).unwrap();
            prop_assert!(n as f64 * DDR5_4800_TCK_NS >= v - 1e-6);
        }
    }
}
