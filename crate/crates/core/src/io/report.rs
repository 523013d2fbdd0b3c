//! Benchmark report and recall-curve outputs.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use crate::error::{Error, Result};
use crate::evaluation::BenchmarkReport;

pub fn write_report(path: impl AsRef<Path>, report: &BenchmarkReport) -> Result<()> {
    let path = path.as_ref();
    let mut text = report.to_json();
    text.push('\n');
    fs::write(path, text).map_err(|e| Error::io(path, e))
}

/// CSV with columns `metric,threshold,recall`; `metric` is `rotation_deg`
/// (translation unlimited) or `translation_m` (rotation unlimited).
pub fn encode_curves(report: &BenchmarkReport) -> String {
    let mut out = String::from("metric,threshold,recall\n");
    for (metric, points) in [
        ("rotation_deg", &report.curves.rotation),
        ("translation_m", &report.curves.translation),
    ] {
        for p in points {
            writeln!(out, "{metric},{:?},{:?}", p.threshold, p.recall).unwrap();
        }
    }
    out
}

pub fn write_curves(path: impl AsRef<Path>, report: &BenchmarkReport) -> Result<()> {
    let path = path.as_ref();
    fs::write(path, encode_curves(report)).map_err(|e| Error::io(path, e))
}
