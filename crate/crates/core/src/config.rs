//! Flat sectioned key-value configuration.
//!
//! ```text
//! # comment
//! [org]
//! channels = 16
//! [timing]
//! tRCD_ns = 14.166     # trailing comments are allowed
//! [generator]
//! read_ratio = 0.7
//! ```
//!
//! Sections are `org`, `timing` and `generator`; the accepted keys are listed
//! in [`KEYS`]. Timing keys ending in `_ns` are durations in ns and are
//! converted to clocks by rounding up; the other timing keys are clocks.
//! Missing keys keep their DDR5-4800 defaults. Every key can also be set
//! through an environment variable named `DDR5SIM_<SECTION>_<KEY>` in upper
//! case, e.g. `DDR5SIM_TIMING_TRFC_NS=590`.

use std::collections::HashMap;
use std::fmt::Write as _;

use sha2::{Digest, Sha256};

use crate::device::{DeviceOrg, TimingParams};
use crate::error::ConfigError;
use crate::traffic::GenConfig;

pub const ENV_PREFIX: &str = "DDR5SIM_";

pub const KEYS: &[(&str, &[&str])] = &[
    (
        "org",
        &[
            "channels",
            "ranks_per_channel",
            "bank_groups_per_rank",
            "banks_per_bank_group",
            "rows_per_bank",
            "columns_per_row",
            "channel_width_bits",
            "burst_length",
        ],
    ),
    (
        "timing",
        &[
            "tCK_ns", "tRCD_ns", "tRAS_ns", "tRP_ns", "tRTP_ns", "tRFC_ns", "tREFI_ns", "CL",
            "CWL", "tCCD_S", "tCCD_L", "tWR", "tWTR_S", "tWTR_L", "tRRD_S", "tRRD_L", "tFAW",
            "tRTW_gap",
        ],
    ),
    (
        "generator",
        &[
            "read_ratio",
            "nop_period",
            "seed",
            "target_random_reads",
            "warmup_random_reads",
        ],
    ),
];

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Config {
    pub org: DeviceOrg,
    pub timing: TimingParams,
    pub gen: GenConfig,
}

fn parse_num<T: std::str::FromStr>(key: &str, value: &str) -> Result<T, ConfigError> {
    value.parse().map_err(|_| ConfigError::InvalidValue {
        key: key.to_string(),
        line: None,
        msg: format!("cannot parse `{value}`"),
    })
}

fn parse_float(key: &str, value: &str) -> Result<f64, ConfigError> {
    let v: f64 = parse_num(key, value)?;
    if !v.is_finite() {
        return Err(ConfigError::InvalidValue {
            key: key.to_string(),
            line: None,
            msg: format!("`{value}` is not a finite number"),
        });
    }
    Ok(v)
}

impl Config {
    /// Sets one key. Values are checked for syntax here; ranges are checked
    /// by [`Config::finalize`].
    pub fn set(&mut self, section: &str, key: &str, value: &str) -> Result<(), ConfigError> {
        let o = &mut self.org;
        let t = &mut self.timing;
        let g = &mut self.gen;
        match (section, key) {
            ("org", "channels") => o.channels = parse_num(key, value)?,
            ("org", "ranks_per_channel") => o.ranks_per_channel = parse_num(key, value)?,
            ("org", "bank_groups_per_rank") => o.bank_groups_per_rank = parse_num(key, value)?,
            ("org", "banks_per_bank_group") => o.banks_per_bank_group = parse_num(key, value)?,
            ("org", "rows_per_bank") => o.rows_per_bank = parse_num(key, value)?,
            ("org", "columns_per_row") => o.columns_per_row = parse_num(key, value)?,
            ("org", "channel_width_bits") => o.channel_width_bits = parse_num(key, value)?,
            ("org", "burst_length") => o.burst_length = parse_num(key, value)?,
            ("timing", "tCK_ns") => t.tck_ns = parse_float(key, value)?,
            ("timing", "tRCD_ns") => t.ns.t_rcd = parse_float(key, value)?,
            ("timing", "tRAS_ns") => t.ns.t_ras = parse_float(key, value)?,
            ("timing", "tRP_ns") => t.ns.t_rp = parse_float(key, value)?,
            ("timing", "tRTP_ns") => t.ns.t_rtp = parse_float(key, value)?,
            ("timing", "tRFC_ns") => t.ns.t_rfc = parse_float(key, value)?,
            ("timing", "tREFI_ns") => t.ns.t_refi = parse_float(key, value)?,
            ("timing", "CL") => t.cl = parse_num(key, value)?,
            ("timing", "CWL") => t.cwl = parse_num(key, value)?,
            ("timing", "tCCD_S") => t.t_ccd_s = parse_num(key, value)?,
            ("timing", "tCCD_L") => t.t_ccd_l = parse_num(key, value)?,
            ("timing", "tWR") => t.t_wr = parse_num(key, value)?,
            ("timing", "tWTR_S") => t.t_wtr_s = parse_num(key, value)?,
            ("timing", "tWTR_L") => t.t_wtr_l = parse_num(key, value)?,
            ("timing", "tRRD_S") => t.t_rrd_s = parse_num(key, value)?,
            ("timing", "tRRD_L") => t.t_rrd_l = parse_num(key, value)?,
            ("timing", "tFAW") => t.t_faw = parse_num(key, value)?,
            ("timing", "tRTW_gap") => t.t_rtw_gap = parse_num(key, value)?,
            ("generator", "read_ratio") => g.read_ratio = parse_float(key, value)?,
            ("generator", "nop_period") => g.nop_period = parse_num(key, value)?,
            ("generator", "seed") => g.seed = parse_num(key, value)?,
            ("generator", "target_random_reads") => g.target_random_reads = parse_num(key, value)?,
            ("generator", "warmup_random_reads") => g.warmup_random_reads = parse_num(key, value)?,
            _ => {
                return Err(ConfigError::UnknownKey {
                    key: format!("{section}.{key}"),
                    line: None,
                })
            }
        }
        Ok(())
    }

    /// Converts ns timings to clocks and range-checks everything.
    pub fn finalize(&mut self) -> Result<(), ConfigError> {
        self.org.validate()?;
        self.timing.resolve_ns()?;
        self.timing.validate()?;
        self.gen.validate()
    }

    /// Applies `DDR5SIM_<SECTION>_<KEY>` variables; other variables are ignored.
    pub fn apply_env<I>(&mut self, vars: I) -> Result<(), ConfigError>
    where
        I: IntoIterator<Item = (String, String)>,
    {
        let mut names = HashMap::new();
        for (section, keys) in KEYS {
            for key in *keys {
                names.insert(
                    format!("{ENV_PREFIX}{section}_{key}").to_uppercase(),
                    (*section, *key),
                );
            }
        }
        let mut vars: Vec<(String, String)> = vars
            .into_iter()
            .filter(|(k, _)| k.starts_with(ENV_PREFIX))
            .collect();
        vars.sort();
        for (name, value) in vars {
            let Some((section, key)) = names.get(&name) else {
                return Err(ConfigError::UnknownKey {
                    key: name,
                    line: None,
                });
            };
            self.set(section, key, value.trim())?;
        }
        Ok(())
    }

    /// The fully resolved configuration in the file grammar. Re-parsing the
    /// text yields the same configuration.
    pub fn to_text(&self) -> String {
        let o = &self.org;
        let t = &self.timing;
        let g = &self.gen;
        let mut s = String::new();
        s.push_str("[org]\n");
        for (k, v) in [
            ("channels", o.channels),
            ("ranks_per_channel", o.ranks_per_channel),
            ("bank_groups_per_rank", o.bank_groups_per_rank),
            ("banks_per_bank_group", o.banks_per_bank_group),
            ("rows_per_bank", o.rows_per_bank),
            ("columns_per_row", o.columns_per_row),
            ("channel_width_bits", o.channel_width_bits),
            ("burst_length", o.burst_length),
        ] {
            writeln!(s, "{k} = {v}").unwrap();
        }
        s.push_str("[timing]\n");
        writeln!(s, "tCK_ns = {}", t.tck_ns).unwrap();
        for (k, ns, nck) in [
            ("tRCD_ns", t.ns.t_rcd, t.t_rcd),
            ("tRAS_ns", t.ns.t_ras, t.t_ras),
            ("tRP_ns", t.ns.t_rp, t.t_rp),
            ("tRTP_ns", t.ns.t_rtp, t.t_rtp),
            ("tRFC_ns", t.ns.t_rfc, t.t_rfc),
            ("tREFI_ns", t.ns.t_refi, t.t_refi),
        ] {
            writeln!(s, "{k} = {ns} # {nck} nCK").unwrap();
        }
        for (k, v) in [
            ("CL", t.cl),
            ("CWL", t.cwl),
            ("tCCD_S", t.t_ccd_s),
            ("tCCD_L", t.t_ccd_l),
            ("tWR", t.t_wr),
            ("tWTR_S", t.t_wtr_s),
            ("tWTR_L", t.t_wtr_l),
            ("tRRD_S", t.t_rrd_s),
            ("tRRD_L", t.t_rrd_l),
            ("tFAW", t.t_faw),
            ("tRTW_gap", t.t_rtw_gap),
        ] {
            writeln!(s, "{k} = {v}").unwrap();
        }
        s.push_str("[generator]\n");
        writeln!(s, "read_ratio = {}", g.read_ratio).unwrap();
        writeln!(s, "nop_period = {}", g.nop_period).unwrap();
        writeln!(s, "seed = {}", g.seed).unwrap();
        writeln!(s, "target_random_reads = {}", g.target_random_reads).unwrap();
        writeln!(s, "warmup_random_reads = {}", g.warmup_random_reads).unwrap();
        s
    }

    /// Short hex digest of the resolved configuration text.
    pub fn digest(&self) -> String {
        let hash = Sha256::digest(self.to_text().as_bytes());
        hash.iter().take(8).fold(String::new(), |mut s, b| {
            write!(s, "{b:02x}").unwrap();
            s
        })
    }
}

/// Raw key-value pairs from a config text, tagged with their line numbers.
fn parse_entries(text: &str) -> Result<Vec<(String, String, String, usize)>, ConfigError> {
    let mut section: Option<String> = None;
    let mut out = Vec::new();
    let mut seen: HashMap<(String, String), usize> = HashMap::new();
    for (i, raw) in text.lines().enumerate() {
        let line = i + 1;
        let content = raw.split('#').next().unwrap_or("").trim();
        if content.is_empty() {
            continue;
        }
        if let Some(rest) = content.strip_prefix('[') {
            let name = rest.strip_suffix(']').ok_or_else(|| ConfigError::Syntax {
                line,
                msg: format!("unterminated section header `{content}`"),
            })?;
            let name = name.trim();
            if !KEYS.iter().any(|(s, _)| *s == name) {
                return Err(ConfigError::UnknownKey {
                    key: format!("[{name}]"),
                    line: Some(line),
                });
            }
            section = Some(name.to_string());
            continue;
        }
        let (key, value) = content.split_once('=').ok_or_else(|| ConfigError::Syntax {
            line,
            msg: format!("expected `key = value`, found `{content}`"),
        })?;
        let (key, value) = (key.trim(), value.trim());
        let Some(sec) = &section else {
            return Err(ConfigError::Syntax {
                line,
                msg: format!("key `{key}` outside of a section"),
            });
        };
        if let Some(prev) = seen.insert((sec.clone(), key.to_string()), line) {
            return Err(ConfigError::Syntax {
                line,
                msg: format!("duplicate key `{key}` (first set on line {prev})"),
            });
        }
        out.push((sec.clone(), key.to_string(), value.to_string(), line));
    }
    Ok(out)
}

/// Parses a config text on top of the DDR5-4800 defaults.
pub fn parse_config(text: &str) -> Result<Config, ConfigError> {
    let mut cfg = Config::default();
    let mut lines: HashMap<String, usize> = HashMap::new();
    for (section, key, value, line) in parse_entries(text)? {
        cfg.set(&section, &key, &value).map_err(|e| match e {
            ConfigError::UnknownKey { key, .. } => ConfigError::UnknownKey {
                key,
                line: Some(line),
            },
            other => other.with_line(Some(line)),
        })?;
        lines.insert(key, line);
    }
    cfg.finalize().map_err(|e| {
        let line = e.key().and_then(|k| lines.get(k).copied());
        e.with_line(line)
    })?;
    Ok(cfg)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    const TABLE: &str = "\
[org]
channels = 16
ranks_per_channel = 1
bank_groups_per_rank = 8
banks_per_bank_group = 4
[timing]
tRCD_ns = 14.166
tRAS_ns = 32.000
tRP_ns = 14.166
tRTP_ns = 7.5
tCCD_S = 8
tRFC_ns = 295
tREFI_ns = 3900
";

    #[test]
    fn table_config() {
        let cfg = parse_config(TABLE).unwrap();
        assert_eq!(cfg.org.channels, 16);
        assert_eq!(cfg.org.banks_per_channel(), 32);
        assert_eq!(cfg.timing.t_rcd, 34);
        assert_eq!(cfg, Config::default());
    }

    #[test]
    fn empty_is_default() {
        let cfg = parse_config("").unwrap();
        assert_eq!(cfg, Config::default());
        assert_eq!(parse_config(&cfg.to_text()).unwrap(), cfg);
    }

    #[test]
    fn ratio_out_of_range() {
        let err = parse_config("[generator]\n\nread_ratio = 0.3\n").unwrap_err();
        assert_eq!(err.key(), Some("read_ratio"));
        assert_eq!(err.line(), Some(3));
        assert!(err.to_string().contains("[0.5, 1.0]"), "{err}");
    }

    #[test]
    fn unknown_key_named_with_line() {
        let err = parse_config("[timing]\ntXYZ = 4\n").unwrap_err();
        assert!(matches!(err, ConfigError::UnknownKey { line: Some(2), .. }));
        assert!(err.to_string().contains("tXYZ"));
        let err = parse_config("[dram]\n").unwrap_err();
        assert!(matches!(err, ConfigError::UnknownKey { line: Some(1), .. }));
    }

    #[test]
    fn refi_not_above_rfc() {
        let err = parse_config("[timing]\ntRFC_ns = 295\ntREFI_ns = 200\n").unwrap_err();
        assert_eq!(err.key(), Some("tREFI_ns"));
        assert_eq!(err.line(), Some(3));
    }

    #[test]
    fn syntax_errors() {
        assert!(matches!(
            parse_config("channels = 3\n"),
            Err(ConfigError::Syntax { line: 1, .. })
        ));
        assert!(matches!(
            parse_config("[org]\nchannels 3\n"),
            Err(ConfigError::Syntax { line: 2, .. })
        ));
        assert!(matches!(
            parse_config("[org]\nchannels = x\n"),
            Err(ConfigError::InvalidValue { line: Some(2), .. })
        ));
        assert!(matches!(
            parse_config("[org]\nchannels = 2\nchannels = 3\n"),
            Err(ConfigError::Syntax { line: 3, .. })
        ));
    }

    #[test]
    fn env_overrides() {
        let mut cfg = Config::default();
        cfg.apply_env(vec![
            ("DDR5SIM_TIMING_TRFC_NS".to_string(), "590".to_string()),
            ("DDR5SIM_ORG_CHANNELS".to_string(), "4".to_string()),
            ("HOME".to_string(), "/root".to_string()),
        ])
        .unwrap();
        cfg.finalize().unwrap();
        assert_eq!(cfg.timing.t_rfc, 1416);
        assert_eq!(cfg.org.channels, 4);
        let err = cfg
            .apply_env(vec![("DDR5SIM_NOPE".to_string(), "1".to_string())])
            .unwrap_err();
        assert!(matches!(err, ConfigError::UnknownKey { .. }));
    }

    #[test]
    fn echo_shows_both_units() {
        let text = Config::default().to_text();
        assert!(text.contains("tRFC_ns = 295 # 708 nCK"), "{text}");
        assert!(text.contains("tRCD_ns = 14.166 # 34 nCK"));
    }

    #[test]
    fn digest_tracks_content() {
        let a = Config::default();
        let mut b = a;
        b.gen.seed = 2;
        assert_ne!(a.digest(), b.digest());
        assert_eq!(a.digest().len(), 16);
    }

    proptest! {
        #[test]
        fn echo_reparses_identically(
            channels in 1u32..40,
            rcd in 5.0f64..30.0,
            rfc in 100.0f64..600.0,
            ratio in 0.5f64..=1.0,
            nop in 1u64..20_000,
            seed in any::<u64>(),
        ) {
            let mut cfg = Config::default();
            cfg.org.channels = channels;
            cfg.timing.ns.t_rcd = rcd;
            cfg.timing.ns.t_ras = rcd + 20.0;
            cfg.timing.ns.t_rfc = rfc;
            cfg.gen.read_ratio = ratio;
            cfg.gen.nop_period = nop;
            cfg.gen.seed = seed;
            cfg.finalize().unwrap();
            let again = parse_config(&cfg.to_text()).unwrap();
            prop_assert_eq!(again, cfg);
            prop_assert_eq!(again.to_text(), cfg.to_text());
        }
    }
}
