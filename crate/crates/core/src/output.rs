//! Result files: the sweep CSV and a gnuplot script drawing it.

use std::fmt::Write as _;

use log::warn;

use crate::config::Config;
use crate::experiment::{AnalyticModel, CurveSet};

pub const CSV_COLUMNS: &str = "read_ratio,nop_period,achieved_bw_gbps,avg_latency_ns,p99_latency_ns,row_hit_rate,refresh_count,random_reads_completed";

/// The sweep CSV. `#` header lines carry the tool version, seed, config
/// digest, analytic bandwidths and the resolved configuration; rows follow
/// in (read_ratio desc, nop_period desc) order.
pub fn csv_text(
    curves: &CurveSet,
    config: &Config,
    seed: u64,
    model: Option<&AnalyticModel>,
) -> String {
    let mut s = String::new();
    writeln!(s, "# ddr5sim {}", crate::VERSION).unwrap();
    writeln!(s, "# seed={seed}").unwrap();
    writeln!(s, "# config_digest={}", config.digest()).unwrap();
    match model {
        Some(m) => writeln!(
            s,
            "# bw_theoretical_gbps={:.3} bw_achievable_gbps={:.3}",
            m.bw_theoretical, m.bw_achievable
        )
        .unwrap(),
        None => s.push_str("# bw_theoretical_gbps=n/a bw_achievable_gbps=n/a\n"),
    }
    for line in config.to_text().lines() {
        writeln!(s, "# {line}").unwrap();
    }
    writeln!(s, "{CSV_COLUMNS}").unwrap();

    let mut rows: Vec<_> = curves.points().collect();
    rows.sort_by(|a, b| {
        b.read_ratio
            .total_cmp(&a.read_ratio)
            .then(b.nop_period.cmp(&a.nop_period))
    });
    for p in rows {
        writeln!(
            s,
            "{:.3},{},{:.3},{:.3},{:.3},{:.3},{},{}",
            p.read_ratio,
            p.nop_period,
            p.achieved_bw,
            p.avg_latency,
            p.p99_latency,
            p.row_hit_rate,
            p.refresh_count,
            p.random_reads_completed
        )
        .unwrap();
    }
    s
}

/// Gnuplot script plotting latency against bandwidth, one series per read
/// ratio, plus vertical lines at the theoretical and achievable peaks.
/// `csv_name` is referenced relative to the script's directory.
pub fn plot_script(curves: &CurveSet, csv_name: &str, model: &AnalyticModel) -> String {
    let mut s = String::new();
    s.push_str("# gnuplot script generated by ddr5sim\n");
    s.push_str("set datafile separator ','\n");
    s.push_str("set datafile commentschars '#'\n");
    s.push_str("set key top left\n");
    s.push_str("set grid\n");
    s.push_str("set xlabel 'Used memory bandwidth [GB/s]'\n");
    s.push_str("set ylabel 'Random read latency [ns]'\n");
    writeln!(
        s,
        "set xrange [0:{:.0}]",
        (model.bw_theoretical * 1.05).ceil()
    )
    .unwrap();
    writeln!(s, "set yrange [0:*]").unwrap();
    for (i, (x, label, color)) in [
        (model.bw_theoretical, "Max. theoretical BW", "orange"),
        (model.bw_achievable, "Max. achievable BW", "dark-green"),
    ]
    .into_iter()
    .enumerate()
    {
        writeln!(
            s,
            "set arrow {} from {x:.3}, graph 0 to {x:.3}, graph 1 nohead dashtype 2 lw 2 lc rgb '{color}'",
            i + 1
        )
        .unwrap();
        writeln!(
            s,
            "set label {} '{label} ({x:.1} GB/s)' at {x:.3}, graph {} right offset -1,0 tc rgb '{color}'",
            i + 1,
            0.95 - 0.05 * i as f64
        )
        .unwrap();
    }
    if curves.is_empty() {
        warn!("no curve data; plot script will only contain reference lines");
        s.push_str("plot 1/0 notitle\n");
        return s;
    }
    let series: Vec<String> = curves
        .curves
        .iter()
        .filter(|c| !c.points.is_empty())
        .map(|c| {
            format!(
                "'{csv_name}' using 3:(abs($1-{r:.3})<0.0005 ? $4 : 1/0) with linespoints title '{pct:.0}% reads'",
                r = c.read_ratio,
                pct = c.read_ratio * 100.0
            )
        })
        .collect();
    writeln!(s, "plot {}", series.join(", \\\n     ")).unwrap();
    s
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::experiment::{Curve, RunPointResult};

    fn point(ratio: f64, nop: u64) -> RunPointResult {
        RunPointResult {
            read_ratio: ratio,
            nop_period: nop,
            achieved_bw: 100.0 / nop as f64,
            avg_latency: 40.0 + ratio,
            p99_latency: 80.0,
            row_hit_rate: 0.5,
            refresh_count: 3,
            refresh_count_min: 3,
            random_reads_completed: 20_000,
            seed: 1,
            window_nck: 1,
            stream_requests: 0,
            stream_reads: 0,
            violations: None,
        }
    }

    fn set(ratios: &[f64], nops: &[u64]) -> CurveSet {
        CurveSet {
            curves: ratios
                .iter()
                .map(|&r| Curve {
                    read_ratio: r,
                    points: nops.iter().map(|&n| point(r, n)).collect(),
                })
                .collect(),
        }
    }

    fn model() -> AnalyticModel {
        let c = Config::default();
        AnalyticModel::compute(&c.org, &c.timing).unwrap()
    }

    #[test]
    fn csv_rows_and_header() {
        let nops: Vec<u64> = (1..=30).rev().collect();
        let curves = set(&[1.0, 0.9, 0.8, 0.7, 0.6, 0.5], &nops);
        let text = csv_text(&curves, &Config::default(), 42, Some(&model()));
        let data: Vec<&str> = text.lines().filter(|l| !l.starts_with('#')).collect();
        assert_eq!(data.len(), 181);
        assert_eq!(data[0], CSV_COLUMNS);
        assert_eq!(data[1], "1.000,30,3.333,41.000,80.000,0.500,3,20000");
        assert!(text.contains("# bw_theoretical_gbps=307.200 bw_achievable_gbps=281.141\n"));
        assert!(text.contains("# seed=42\n"));
        assert!(!text.contains('\r'));
    }

    #[test]
    fn csv_row_order_is_canonical() {
        let mut curves = set(&[0.5, 1.0], &[1, 100]);
        curves.curves[0].points.reverse();
        let text = csv_text(&curves, &Config::default(), 1, None);
        let keys: Vec<String> = text
            .lines()
            .filter(|l| !l.starts_with('#'))
            .skip(1)
            .map(|l| l.split(',').take(2).collect::<Vec<_>>().join(","))
            .collect();
        assert_eq!(keys, vec!["1.000,100", "1.000,1", "0.500,100", "0.500,1"]);
    }

    #[test]
    fn plot_series_per_ratio() {
        let curves = set(&[1.0, 0.9, 0.8, 0.7, 0.6, 0.5], &[10, 1]);
        let gp = plot_script(&curves, "curves.csv", &model());
        assert_eq!(gp.matches("with linespoints").count(), 6);
        assert_eq!(gp.matches("set arrow").count(), 2);
        assert!(gp.contains("title '100% reads'"));
        assert!(gp.contains("title '50% reads'"));
        assert!(gp.contains("Max. theoretical BW"));
        assert!(gp.contains("'curves.csv'"));
    }

    #[test]
    fn plot_without_curves() {
        let gp = plot_script(&CurveSet::default(), "curves.csv", &model());
        assert_eq!(gp.matches("set arrow").count(), 2);
        assert!(!gp.contains("linespoints"));
        assert!(gp.contains("plot 1/0 notitle"));
    }
}
