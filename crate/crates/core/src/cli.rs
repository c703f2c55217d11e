//! Command-line front end: `run`, `analytic` and `verify`.

use std::fs;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use thiserror::Error;

use crate::config::{parse_config, Config};
use crate::device::verify_trace;
use crate::error::{ConfigError, DeviceError, ExperimentError};
use crate::experiment::{
    build_curves, default_nop_sweep, log_nop_sweep, AnalyticModel, CurveSet, SweepOptions,
    DEFAULT_RATIOS,
};
use crate::output::{csv_text, plot_script};
use crate::trace::{parse_trace, TraceParseError};

#[derive(Debug, Parser)]
#[command(
    name = "ddr5sim",
    version,
    about = "Cycle-level DDR5 latency-bandwidth simulator"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Cmd,
}

#[derive(Debug, Subcommand)]
pub enum Cmd {
    /// Sweep read ratios and NOP periods and write curves.csv / curves.gp.
    Run(RunArgs),
    /// Print the analytic bandwidth model for a configuration.
    Analytic {
        #[arg(long)]
        config: Option<PathBuf>,
    },
    /// Check a command-trace dump against the timing rules.
    Verify {
        #[arg(long)]
        trace: PathBuf,
        #[arg(long)]
        config: Option<PathBuf>,
    },
}

#[derive(Debug, Clone, Args)]
pub struct RunArgs {
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Comma-separated read ratios in [0.5, 1.0].
    #[arg(long, value_delimiter = ',')]
    pub ratios: Option<Vec<f64>>,
    /// `MAX:MIN:POINTS` for a log-spaced sweep, or a comma-separated list.
    #[arg(long)]
    pub nop_sweep: Option<String>,
    #[arg(long)]
    pub channels: Option<u32>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Post-warmup random reads per point.
    #[arg(long)]
    pub target_reads: Option<u64>,
    #[arg(long)]
    pub warmup_reads: Option<u64>,
    #[arg(long, default_value = "out")]
    pub out: PathBuf,
    /// Dump each point's command trace. With several points the ratio and
    /// NOP period are appended to the file name.
    #[arg(long)]
    pub trace_out: Option<PathBuf>,
    /// Worker threads (0 = all cores).
    #[arg(long, default_value_t = 0)]
    pub jobs: usize,
    /// Check every command trace with the legality oracle while running.
    #[arg(long)]
    pub verify: bool,
}

#[derive(Debug, Error)]
pub enum CliError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: io::Error,
    },
    #[error(transparent)]
    Simulation(#[from] ExperimentError),
    #[error(transparent)]
    TraceFormat(#[from] TraceParseError),
    #[error(transparent)]
    Trace(#[from] DeviceError),
    #[error("{0} timing violation(s)")]
    Violations(usize),
}

impl CliError {
    pub fn class(&self) -> &'static str {
        match self {
            CliError::Config(_) => "config",
            CliError::Io { .. } => "io",
            CliError::Simulation(ExperimentError::Config(_)) => "config",
            CliError::Simulation(ExperimentError::Point { source, .. })
                if matches!(**source, ExperimentError::Config(_)) =>
            {
                "config"
            }
            CliError::Simulation(_) => "simulation",
            CliError::TraceFormat(_) | CliError::Trace(_) => "trace",
            CliError::Violations(_) => "violation",
        }
    }

    pub fn exit_code(&self) -> i32 {
        match self.class() {
            "violation" => 1,
            "config" => 2,
            "io" => 3,
            "simulation" => 4,
            _ => 5,
        }
    }
}

fn io_err(path: &Path) -> impl FnOnce(io::Error) -> CliError + '_ {
    move |source| CliError::Io {
        path: path.to_path_buf(),
        source,
    }
}

fn load_config(path: Option<&Path>) -> Result<Config, CliError> {
    let text = match path {
        Some(p) => fs::read_to_string(p).map_err(io_err(p))?,
        None => String::new(),
    };
    let mut cfg = parse_config(&text)?;
    cfg.apply_env(std::env::vars())?;
    cfg.finalize()?;
    Ok(cfg)
}

pub fn parse_nop_sweep(spec: &str) -> Result<Vec<u64>, ConfigError> {
    let bad = |msg: String| ConfigError::InvalidValue {
        key: "nop_sweep".into(),
        line: None,
        msg,
    };
    let num = |s: &str| -> Result<u64, ConfigError> {
        s.trim()
            .parse()
            .map_err(|_| bad(format!("cannot parse `{s}`")))
    };
    let mut out = if spec.contains(':') {
        let parts: Vec<&str> = spec.split(':').collect();
        let [max, min, points] = parts[..] else {
            return Err(bad(format!("expected MAX:MIN:POINTS, found `{spec}`")));
        };
        log_nop_sweep(num(max)?, num(min)?, num(points)? as usize)
    } else {
        spec.split(',').map(num).collect::<Result<Vec<_>, _>>()?
    };
    out.sort_unstable_by(|a, b| b.cmp(a));
    out.dedup();
    if out.is_empty() || out.contains(&0) {
        return Err(ConfigError::range(
            "nop_sweep",
            "NOP periods must be at least 1",
        ));
    }
    Ok(out)
}

/// Everything a `run` invocation resolved to.
#[derive(Debug, Clone)]
pub struct RunManifest {
    pub config_path: Option<PathBuf>,
    pub config: Config,
    pub ratios: Vec<f64>,
    pub nop_sweep: Vec<u64>,
    pub seed: u64,
    pub out_dir: PathBuf,
    pub trace_out: Option<PathBuf>,
    pub jobs: usize,
    pub verify: bool,
}

impl RunManifest {
    pub fn from_args(args: &RunArgs) -> Result<Self, CliError> {
        let mut config = load_config(args.config.as_deref())?;
        let overrides = [
            ("org", "channels", args.channels.map(|v| v.to_string())),
            ("generator", "seed", args.seed.map(|v| v.to_string())),
            (
                "generator",
                "target_random_reads",
                args.target_reads.map(|v| v.to_string()),
            ),
            (
                "generator",
                "warmup_random_reads",
                args.warmup_reads.map(|v| v.to_string()),
            ),
        ];
        for (section, key, value) in overrides {
            if let Some(v) = value {
                config.set(section, key, &v)?;
            }
        }
        config.finalize()?;
        let ratios = args
            .ratios
            .clone()
            .unwrap_or_else(|| DEFAULT_RATIOS.to_vec());
        for &r in &ratios {
            if !(0.5..=1.0).contains(&r) {
                return Err(ConfigError::range("ratios", format!("{r} not in [0.5, 1.0]")).into());
            }
        }
        let nop_sweep = match &args.nop_sweep {
            Some(spec) => parse_nop_sweep(spec)?,
            None => default_nop_sweep(),
        };
        Ok(RunManifest {
            config_path: args.config.clone(),
            seed: config.gen.seed,
            config,
            ratios,
            nop_sweep,
            out_dir: args.out.clone(),
            trace_out: args.trace_out.clone(),
            jobs: args.jobs,
            verify: args.verify,
        })
    }

    pub fn sweep_options(&self) -> SweepOptions {
        SweepOptions {
            jobs: self.jobs,
            verify: self.verify,
            trace_out: self.trace_out.clone(),
        }
    }
}

fn write_file(path: &Path, contents: &str) -> Result<(), CliError> {
    let file = fs::File::create(path).map_err(io_err(path))?;
    let mut w = BufWriter::new(file);
    w.write_all(contents.as_bytes()).map_err(io_err(path))?;
    w.flush().map_err(io_err(path))
}

/// Runs the sweep and writes `curves.csv`, `curves.gp` and `analytic.txt`.
pub fn run(manifest: &RunManifest) -> Result<CurveSet, CliError> {
    let cfg = &manifest.config;
    let model = AnalyticModel::compute(&cfg.org, &cfg.timing).ok();
    fs::create_dir_all(&manifest.out_dir).map_err(io_err(&manifest.out_dir))?;
    let curves = build_curves(
        &cfg.org,
        &cfg.timing,
        &cfg.gen,
        &manifest.ratios,
        &manifest.nop_sweep,
        manifest.sweep_options(),
    )?;
    let violations: u64 = curves.points().filter_map(|p| p.violations).sum();

    let csv = csv_text(&curves, cfg, manifest.seed, model.as_ref());
    write_file(&manifest.out_dir.join("curves.csv"), &csv)?;
    if let Some(m) = &model {
        write_file(
            &manifest.out_dir.join("curves.gp"),
            &plot_script(&curves, "curves.csv", m),
        )?;
        write_file(&manifest.out_dir.join("analytic.txt"), &m.summary())?;
    }
    if violations > 0 {
        return Err(CliError::Violations(violations as usize));
    }
    Ok(curves)
}

pub fn analytic(config: Option<&Path>) -> Result<String, CliError> {
    let cfg = load_config(config)?;
    let model = AnalyticModel::compute(&cfg.org, &cfg.timing)?;
    Ok(model.summary())
}

/// Returns a report; fails with `Violations` if the trace breaks any rule.
pub fn verify(trace: &Path, config: Option<&Path>) -> Result<String, CliError> {
    let cfg = load_config(config)?;
    let text = fs::read_to_string(trace).map_err(io_err(trace))?;
    let cmds = parse_trace(&text)?;
    let violations = verify_trace(&cmds, &cfg.org, &cfg.timing)?;
    let mut report = format!(
        "{} commands checked, {} violation(s)\n",
        cmds.len(),
        violations.len()
    );
    for v in violations.iter().take(20) {
        report.push_str(&format!("  {v}\n"));
    }
    if violations.is_empty() {
        Ok(report)
    } else {
        eprint!("{report}");
        Err(CliError::Violations(violations.len()))
    }
}

pub fn main_with(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Cmd::Run(args) => {
            let manifest = RunManifest::from_args(&args)?;
            let curves = run(&manifest)?;
            println!(
                "{} points written to {}",
                curves.len(),
                manifest.out_dir.join("curves.csv").display()
            );
        }
        Cmd::Analytic { config } => print!("{}", analytic(config.as_deref())?),
        Cmd::Verify { trace, config } => print!("{}", verify(&trace, config.as_deref())?),
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn nop_sweep_specs() {
        assert_eq!(parse_nop_sweep("1,100,10").unwrap(), vec![100, 10, 1]);
        let s = parse_nop_sweep("10000:1:30").unwrap();
        assert_eq!((s[0], *s.last().unwrap()), (10_000, 1));
        assert!(parse_nop_sweep("0,5").is_err());
        assert!(parse_nop_sweep("5:1").is_err());
        assert!(parse_nop_sweep("a").is_err());
    }

    fn cli(args: &[&str]) -> Cli {
        Cli::try_parse_from(std::iter::once("ddr5sim").chain(args.iter().copied())).unwrap()
    }

    const SMALL: [&str; 9] = [
        "run",
        "--channels",
        "2",
        "--target-reads",
        "50",
        "--warmup-reads",
        "5",
        "--ratios",
        "1.0,0.5",
    ];

    #[test]
    fn run_writes_outputs() {
        let dir = tempfile::tempdir().unwrap();
        let out = dir.path().join("o");
        let mut args = SMALL.to_vec();
        args.extend([
            "--nop-sweep",
            "100,1",
            "--out",
            out.to_str().unwrap(),
            "--verify",
        ]);
        main_with(cli(&args)).unwrap();
        let csv = fs::read_to_string(out.join("curves.csv")).unwrap();
        assert_eq!(csv.lines().filter(|l| !l.starts_with('#')).count(), 5);
        assert!(csv.contains("# channels = 2"), "{csv}");
        assert!(fs::read_to_string(out.join("curves.gp"))
            .unwrap()
            .contains("50% reads"));
        assert!(fs::read_to_string(out.join("analytic.txt"))
            .unwrap()
            .contains("bw_theoretical_gbps=38.400"));
    }

    #[test]
    fn trace_dump_verifies_and_tampering_is_caught() {
        let dir = tempfile::tempdir().unwrap();
        let trace = dir.path().join("t.csv");
        let mut args = SMALL.to_vec();
        args[8] = "0.7";
        args.extend(["--nop-sweep", "2", "--out"]);
        let out = dir.path().join("o");
        args.push(out.to_str().unwrap());
        args.extend(["--trace-out", trace.to_str().unwrap()]);
        main_with(cli(&args)).unwrap();
        assert!(verify(&trace, None).unwrap().contains(" 0 violation(s)"));

        // Drop the first ACT; its bank's first column access then hits a
        // closed bank.
        let text = fs::read_to_string(&trace).unwrap();
        let first_act = text.lines().position(|l| l.contains(",ACT,")).unwrap();
        let shifted: String = text
            .lines()
            .enumerate()
            .filter(|&(i, _)| i != first_act)
            .map(|(_, l)| format!("{l}\n"))
            .collect();
        let bad = dir.path().join("bad.csv");
        fs::write(&bad, shifted).unwrap();
        let err = verify(&bad, None).unwrap_err();
        assert_eq!((err.class(), err.exit_code()), ("violation", 1));
    }

    #[test]
    fn multi_point_traces_get_suffixes() {
        let dir = tempfile::tempdir().unwrap();
        let trace = dir.path().join("t.csv");
        let mut args = SMALL.to_vec();
        let out = dir.path().join("o");
        args.extend(["--nop-sweep", "10", "--out", out.to_str().unwrap()]);
        args.extend(["--trace-out", trace.to_str().unwrap()]);
        main_with(cli(&args)).unwrap();
        assert!(dir.path().join("t_r100_n10.csv").exists());
        assert!(dir.path().join("t_r50_n10.csv").exists());
        assert!(!trace.exists());
    }

    #[test]
    fn error_exit_codes() {
        let dir = tempfile::tempdir().unwrap();
        let bad = dir.path().join("bad.cfg");
        fs::write(&bad, "[timing]\ntREFI_ns = 100\n").unwrap();
        let err = analytic(Some(&bad)).unwrap_err();
        assert_eq!((err.class(), err.exit_code()), ("config", 2));

        let err = analytic(Some(&dir.path().join("missing.cfg"))).unwrap_err();
        assert_eq!((err.class(), err.exit_code()), ("io", 3));

        let mut args = SMALL.to_vec();
        args.extend(["--ratios", "0.2"]);
        let err = main_with(cli(&args)).unwrap_err();
        assert_eq!(err.class(), "config");

        let garbage = dir.path().join("g.csv");
        fs::write(&garbage, "1,XYZ,0,0,0,0,0,0\n").unwrap();
        assert_eq!(verify(&garbage, None).unwrap_err().class(), "trace");
    }

    #[test]
    fn analytic_defaults() {
        let text = analytic(None).unwrap();
        assert!(text.contains("bw_theoretical_gbps=307.200"));
        assert!(text.contains("bw_achievable_gbps=281.141"));
    }

    #[test]
    fn error_classes() {
        let e = CliError::Config(ConfigError::range("x", "y"));
        assert_eq!((e.class(), e.exit_code()), ("config", 2));
        assert_eq!(CliError::Violations(3).exit_code(), 1);
    }
}
