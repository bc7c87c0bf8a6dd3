//! CSV/JSON output of an experiment.

use std::fs;
use std::io::Write;
use std::path::Path;

use super::{cdf, ExperimentSummary, Sample};
use crate::error::Result;
use crate::sca::TraceRow;

/// Renders `cdf.csv` next to it: `python3 plot_cdf.py [cdf.csv] [out.png]`.
pub const PLOT_SCRIPT: &str = r#"#!/usr/bin/env python3
"""Plot the sum-SE CDF of every scheme in cdf.csv."""
import csv
import sys
from collections import defaultdict

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt

src = sys.argv[1] if len(sys.argv) > 1 else "cdf.csv"
out = sys.argv[2] if len(sys.argv) > 2 else "cdf.png"
curves = defaultdict(list)
with open(src) as f:
    for row in csv.DictReader(f):
        curves[row["scheme"]].append((float(row["sum_se"]), float(row["cumulative_prob"])))
labels = {"vfd": "vFD", "heu": "HEU-vFD", "hd": "HD"}
for scheme, pts in curves.items():
    xs, ys = zip(*pts)
    plt.step(xs, ys, where="post", label=labels.get(scheme, scheme))
plt.xlabel("Sum SE (bit/s/Hz)")
plt.ylabel("CDF")
plt.grid(alpha=0.3)
plt.legend()
plt.savefig(out, dpi=150, bbox_inches="tight")
"#;

fn num(v: f64) -> String {
    format!("{v}")
}

fn cells(v: &[f64], n: usize) -> impl Iterator<Item = String> + '_ {
    (0..n).map(move |i| v.get(i).map_or(String::new(), |x| num(*x)))
}

/// Per-UE SE columns are sized by the largest UE count among the samples.
pub fn write_samples<W: Write>(samples: &[Sample], out: W) -> Result<()> {
    let kd = samples.iter().map(|s| s.dl_se.len()).max().unwrap_or(0);
    let ku = samples.iter().map(|s| s.ul_se.len()).max().unwrap_or(0);
    let mut w = csv::Writer::from_writer(out);
    let mut header: Vec<String> = ["scheme", "realization", "seed", "status", "sum_se"]
        .iter()
        .map(|s| s.to_string())
        .collect();
    header.extend((0..kd).map(|k| format!("dl_se_{k}")));
    header.extend((0..ku).map(|l| format!("ul_se_{l}")));
    header.extend(["iterations", "c1", "c2", "c3"].iter().map(|s| s.to_string()));
    w.write_record(&header)?;
    for s in samples {
        let mut row = vec![
            s.scheme.as_str().to_string(),
            s.realization.to_string(),
            s.seed.to_string(),
            s.status.as_str().to_string(),
            num(s.sum_se),
        ];
        row.extend(cells(&s.dl_se, kd));
        row.extend(cells(&s.ul_se, ku));
        row.push(s.iterations.to_string());
        row.extend([s.residuals.c1, s.residuals.c2, s.residuals.c3].map(num));
        w.write_record(&row)?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_cdf<W: Write>(summary: &ExperimentSummary, out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["scheme", "sum_se", "cumulative_prob"])?;
    for s in &summary.schemes {
        for (x, p) in cdf(&s.sum_se) {
            w.write_record([s.scheme.as_str().to_string(), num(x), num(p)])?;
        }
    }
    w.flush()?;
    Ok(())
}

fn write_trace(rows: &[TraceRow], path: &Path) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(["iteration", "phase", "objective", "c1", "c2", "c3"])?;
    for r in rows {
        w.write_record([
            r.iteration.to_string(),
            r.phase.as_str().to_string(),
            num(r.objective),
            num(r.c1),
            num(r.c2),
            num(r.c3),
        ])?;
    }
    w.flush()?;
    Ok(())
}

/// Writes `samples.csv`, `cdf.csv`, `summary.json`, `traces/<scheme>_<r>.csv`
/// and `plot_cdf.py` into `dir`.
pub fn export(summary: &ExperimentSummary, dir: &Path) -> Result<()> {
    fs::create_dir_all(dir.join("traces"))?;
    write_samples(&summary.samples, fs::File::create(dir.join("samples.csv"))?)?;
    write_cdf(summary, fs::File::create(dir.join("cdf.csv"))?)?;
    fs::write(dir.join("summary.json"), serde_json::to_string_pretty(summary)?)?;
    for s in &summary.samples {
        write_trace(&s.trace, &dir.join("traces").join(format!("{}_{}.csv", s.scheme.as_str(), s.realization)))?;
    }
    fs::write(dir.join("plot_cdf.py"), PLOT_SCRIPT)?;
    Ok(())
}
