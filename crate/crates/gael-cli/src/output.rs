//! Run-directory plumbing: CSV serialization with fixed 17-significant-digit
//! formatting (byte-reproducible), a JSON manifest, and an optional plotting
//! script rendering the standard figures from the emitted CSVs.

use std::io;
use std::path::{Path, PathBuf};

use gael::metrics::{DistanceSeries, Histogram};

use crate::config::Config;

/// Output directory named by the config hash; tracks every emitted file for
/// the manifest.
pub struct RunDir {
    pub path: PathBuf,
    files: Vec<String>,
}

impl RunDir {
    pub fn create(base: &Path, cfg: &Config) -> io::Result<Self> {
        let path = base.join(format!("run-{:016x}", cfg.hash()));
        std::fs::create_dir_all(&path)?;
        Ok(Self { path, files: Vec::new() })
    }

    pub fn write_text(&mut self, name: &str, content: &str) -> io::Result<PathBuf> {
        let p = self.path.join(name);
        std::fs::write(&p, content)?;
        self.files.push(name.to_string());
        Ok(p)
    }

    pub fn files(&self) -> &[String] {
        &self.files
    }
}

fn fmt(x: f64) -> String {
    format!("{x:.16e}")
}

pub fn distance_csv(series: &DistanceSeries) -> String {
    let mut out = String::from("time,mean,stderr\n");
    for k in 0..series.times.len() {
        out.push_str(&format!(
            "{},{},{}\n",
            fmt(series.times[k]),
            fmt(series.mean[k]),
            fmt(series.stderr[k])
        ));
    }
    out
}

pub fn histogram_csv(h: &Histogram) -> String {
    let mut out = String::from("bin_left,bin_right,count\n");
    for (k, &c) in h.counts.iter().enumerate() {
        out.push_str(&format!("{},{},{c}\n", fmt(h.edges[k]), fmt(h.edges[k + 1])));
    }
    out
}

/// Rows of `(threshold, success probability, log-negativity)`.
pub fn postselect_csv(rows: &[(f64, f64, f64)]) -> String {
    let mut out = String::from("threshold,success_probability,log_negativity\n");
    for &(nu, p, en) in rows {
        out.push_str(&format!("{},{},{}\n", fmt(nu), fmt(p), fmt(en)));
    }
    out
}

/// Rows of `(swept value, label -> (mean, stderr))` flattened per model.
pub fn sweep_csv(param: &str, models: &[&str], rows: &[(f64, Vec<(f64, f64)>)]) -> String {
    let mut out = String::from(param);
    for m in models {
        out.push_str(&format!(",dbar_{m},stderr_{m}"));
    }
    out.push('\n');
    for (value, cells) in rows {
        out.push_str(&fmt(*value));
        for (mean, se) in cells {
            out.push_str(&format!(",{},{}", fmt(*mean), fmt(*se)));
        }
        out.push('\n');
    }
    out
}

/// Self-contained run report: config echo, summaries, and the file manifest.
pub fn manifest_json(cfg: &Config, summary: serde_json::Value, files: &[String]) -> String {
    let config: serde_json::Map<String, serde_json::Value> = cfg
        .entries()
        .iter()
        .map(|(k, v)| (k.clone(), serde_json::Value::String(v.clone())))
        .collect();
    let doc = serde_json::json!({
        "config": config,
        "config_hash": format!("{:016x}", cfg.hash()),
        "summary": summary,
        "files": files,
    });
    serde_json::to_string_pretty(&doc).expect("manifest serialization") + "\n"
}

/// Plain-text python script that renders distance curves, histograms, and
/// postselection results from whichever CSVs are present in the run
/// directory.
pub fn plot_script() -> &'static str {
    r#"#!/usr/bin/env python3
"""Render plots from the CSVs in this run directory."""
import csv
import os
import sys

import matplotlib
matplotlib.use("Agg")
import matplotlib.pyplot as plt

here = os.path.dirname(os.path.abspath(sys.argv[0]))

def read(name):
    path = os.path.join(here, name)
    if not os.path.exists(path):
        return None
    with open(path) as f:
        rows = list(csv.reader(f))
    header, data = rows[0], rows[1:]
    cols = {h: [float(r[i]) for r in data] for i, h in enumerate(header)}
    return cols

made = []

dist = [(n, read(n)) for n in ("distance_gae.csv", "distance_doe.csv")]
dist = [(n, d) for n, d in dist if d]
if dist:
    fig, ax = plt.subplots()
    for name, d in dist:
        label = name.replace("distance_", "").replace(".csv", "").upper()
        ax.plot(d["time"], d["mean"], label=label)
        lo = [m - s for m, s in zip(d["mean"], d["stderr"])]
        hi = [m + s for m, s in zip(d["mean"], d["stderr"])]
        ax.fill_between(d["time"], lo, hi, alpha=0.3)
    ax.set_xlabel("time [1/kappa]")
    ax.set_ylabel("average trace distance")
    ax.legend()
    fig.savefig(os.path.join(here, "distance.png"), dpi=150)
    made.append("distance.png")

h = read("histogram.csv")
if h:
    fig, ax = plt.subplots()
    centers = [(l + r) / 2 for l, r in zip(h["bin_left"], h["bin_right"])]
    widths = [r - l for l, r in zip(h["bin_left"], h["bin_right"])]
    ax.bar(centers, h["count"], width=widths)
    ax.set_xlabel("integrated current J")
    ax.set_ylabel("count")
    fig.savefig(os.path.join(here, "histogram.png"), dpi=150)
    made.append("histogram.png")

p = read("postselect.csv")
if p:
    fig, ax = plt.subplots()
    ax.plot(p["threshold"], p["log_negativity"], label="log negativity")
    ax.plot(p["threshold"], p["success_probability"], "--", label="success probability")
    ax.set_xlabel("postselection threshold")
    ax.legend()
    fig.savefig(os.path.join(here, "postselect.png"), dpi=150)
    made.append("postselect.png")

s = read("sweep.csv")
if s:
    fig, ax = plt.subplots()
    keys = list(s.keys())
    x = s[keys[0]]
    for k in keys[1:]:
        if k.startswith("dbar_"):
            ax.errorbar(x, s[k], yerr=s["stderr_" + k[5:]], label=k[5:].upper())
    ax.set_xlabel(keys[0])
    ax.set_ylabel("average trace distance")
    ax.legend()
    fig.savefig(os.path.join(here, "sweep.png"), dpi=150)
    made.append("sweep.png")

print("wrote", ", ".join(made) if made else "nothing (no CSVs found)")
"#
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn csv_formatting_is_stable() {
        let series = DistanceSeries {
            times: vec![0.0, 0.5],
            mean: vec![0.0, 0.1],
            stderr: vec![0.0, 0.01],
            per_traj: vec![],
            time_avg: 0.05,
            time_avg_stderr: 0.005,
        };
        let a = distance_csv(&series);
        let b = distance_csv(&series);
        assert_eq!(a, b);
        assert!(a.starts_with("time,mean,stderr\n"));
        assert_eq!(a.lines().count(), 3);
    }

    #[test]
    fn manifest_lists_files_and_echoes_config() {
        let mut cfg = Config::new();
        cfg.parse("t", "scenario.name = qnd\n").unwrap();
        let json = manifest_json(
            &cfg,
            serde_json::json!({"dbar_gae": 0.05}),
            &["distance_gae.csv".to_string()],
        );
        let doc: serde_json::Value = serde_json::from_str(&json).unwrap();
        assert_eq!(doc["config"]["scenario.name"], "qnd");
        assert_eq!(doc["files"][0], "distance_gae.csv");
        assert_eq!(doc["summary"]["dbar_gae"], 0.05);
    }
}
