//! Suite runner and report aggregation.

use std::path::PathBuf;
use std::time::Instant;

use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::evaluation::metrics::{PairMetrics, SuccessThresholds};
use crate::evaluation::synthetic::{generate_pair, SyntheticPairSpec};
use crate::geometry::{PointCloud, RigidTransform};
use crate::io::{pose::read_pose, ply::read_ply};
use crate::pipeline::{register, Branch, PipelineConfig, StageTimings};

/// Rotation sweep of the recall curve: 0° to 30° in 0.5° steps.
pub const RE_CURVE_STEP_DEG: f64 = 0.5;
pub const RE_CURVE_MAX_DEG: f64 = 30.0;
/// Translation sweep of the recall curve: 0 m to 1 m in 1 cm steps.
pub const TE_CURVE_STEP_M: f64 = 0.01;
pub const TE_CURVE_MAX_M: f64 = 1.0;

#[derive(Debug, Clone, PartialEq)]
pub enum BenchmarkCase {
    Synthetic {
        name: String,
        spec: SyntheticPairSpec,
    },
    Files {
        name: String,
        source: PathBuf,
        target: PathBuf,
        /// Pose file holding the source-to-target ground truth.
        ground_truth: PathBuf,
    },
}

impl BenchmarkCase {
    pub fn name(&self) -> &str {
        match self {
            BenchmarkCase::Synthetic { name, .. } | BenchmarkCase::Files { name, .. } => name,
        }
    }

    fn load(&self) -> Result<(PointCloud, PointCloud, RigidTransform)> {
        match self {
            BenchmarkCase::Synthetic { spec, .. } => {
                let pair = generate_pair(spec)?;
                Ok((pair.source, pair.target, pair.ground_truth))
            }
            BenchmarkCase::Files {
                source,
                target,
                ground_truth,
                ..
            } => Ok((read_ply(source)?, read_ply(target)?, read_pose(ground_truth)?.transform)),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PairRow {
    pub id: usize,
    pub name: String,
    /// `None` when registration failed.
    pub branch: Option<Branch>,
    pub inlier_fraction: Option<f64>,
    pub re_deg: Option<f64>,
    pub te_m: Option<f64>,
    pub success: bool,
    pub error: Option<String>,
    pub timing: StageTimings,
}

impl PairRow {
    /// A row for a pair whose registration did not produce a pose.
    pub fn failed(id: usize, name: impl Into<String>, error: impl Into<String>) -> Self {
        Self {
            id,
            name: name.into(),
            branch: None,
            inlier_fraction: None,
            re_deg: None,
            te_m: None,
            success: false,
            error: Some(error.into()),
            timing: StageTimings::default(),
        }
    }

    fn accepted(&self, re_deg: f64, te_m: f64) -> bool {
        match (self.re_deg, self.te_m) {
            (Some(re), Some(te)) => re < re_deg && te < te_m,
            _ => false,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CurvePoint {
    pub threshold: f64,
    pub recall: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RecallCurves {
    /// Recall against the rotation threshold (degrees) with no translation limit.
    pub rotation: Vec<CurvePoint>,
    /// Recall against the translation threshold (meters) with no rotation limit.
    pub translation: Vec<CurvePoint>,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize)]
pub struct BranchCounts {
    pub weighted_procrustes_refined: usize,
    pub safeguard: usize,
    pub failed: usize,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize)]
pub struct SuiteTiming {
    pub wall_seconds: f64,
    pub stages: StageTimings,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BenchmarkReport {
    pub thresholds: SuccessThresholds,
    pub pair_count: usize,
    pub successes: usize,
    pub recall: f64,
    /// Means over successful pairs only; `None` without successes.
    pub mean_re_deg: Option<f64>,
    pub mean_te_m: Option<f64>,
    pub branch_counts: BranchCounts,
    pub pairs: Vec<PairRow>,
    pub curves: RecallCurves,
    pub timing: SuiteTiming,
}

impl BenchmarkReport {
    /// Aggregates rows in any order; rows are emitted sorted by id.
    pub fn from_rows(mut rows: Vec<PairRow>, thresholds: SuccessThresholds) -> Self {
        rows.sort_by_key(|r| r.id);
        for r in &mut rows {
            r.success = r.accepted(thresholds.re_deg, thresholds.te_m);
        }
        let successes: Vec<&PairRow> = rows.iter().filter(|r| r.success).collect();
        let mean = |f: fn(&PairRow) -> Option<f64>| {
            if successes.is_empty() {
                None
            } else {
                Some(successes.iter().filter_map(|r| f(r)).sum::<f64>() / successes.len() as f64)
            }
        };
        let mut counts = BranchCounts::default();
        let mut stages = StageTimings::default();
        for r in &rows {
            match r.branch {
                Some(Branch::WeightedProcrustesRefined) => counts.weighted_procrustes_refined += 1,
                Some(Branch::Safeguard) => counts.safeguard += 1,
                None => counts.failed += 1,
            }
            stages.accumulate(&r.timing);
        }
        let report = Self {
            thresholds,
            pair_count: rows.len(),
            successes: successes.len(),
            recall: if rows.is_empty() {
                0.0
            } else {
                successes.len() as f64 / rows.len() as f64
            },
            mean_re_deg: mean(|r| r.re_deg),
            mean_te_m: mean(|r| r.te_m),
            branch_counts: counts,
            curves: curves(&rows),
            pairs: Vec::new(),
            timing: SuiteTiming {
                wall_seconds: 0.0,
                stages,
            },
        };
        Self { pairs: rows, ..report }
    }

    /// Fraction of pairs with rotation error below `re_deg` and translation
    /// error below `te_m` (both strict).
    pub fn recall_at(&self, re_deg: f64, te_m: f64) -> f64 {
        if self.pairs.is_empty() {
            return 0.0;
        }
        self.pairs.iter().filter(|r| r.accepted(re_deg, te_m)).count() as f64 / self.pairs.len() as f64
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serialises")
    }
}

fn sweep(step: f64, max: f64) -> Vec<f64> {
    let n = (max / step).round() as usize;
    (0..=n).map(|k| k as f64 * step).collect()
}

fn curves(rows: &[PairRow]) -> RecallCurves {
    let recall = |re: f64, te: f64| {
        if rows.is_empty() {
            0.0
        } else {
            rows.iter().filter(|r| r.accepted(re, te)).count() as f64 / rows.len() as f64
        }
    };
    RecallCurves {
        rotation: sweep(RE_CURVE_STEP_DEG, RE_CURVE_MAX_DEG)
            .into_iter()
            .map(|t| CurvePoint {
                threshold: t,
                recall: recall(t, f64::INFINITY),
            })
            .collect(),
        translation: sweep(TE_CURVE_STEP_M, TE_CURVE_MAX_M)
            .into_iter()
            .map(|t| CurvePoint {
                threshold: t,
                recall: recall(f64::INFINITY, t),
            })
            .collect(),
    }
}

fn run_case(id: usize, case: &BenchmarkCase, cfg: &PipelineConfig, thresholds: &SuccessThresholds) -> PairRow {
    let (source, target, gt) = match case.load() {
        Ok(v) => v,
        Err(e) => return PairRow::failed(id, case.name(), e.to_string()),
    };
    let cfg = PipelineConfig {
        weighter: cfg.weighter.with_ground_truth(gt),
        ..cfg.clone()
    };
    match register(&source, &target, &cfg) {
        Ok(result) => {
            let m = PairMetrics::evaluate(&result.transform, &gt, thresholds);
            PairRow {
                id,
                name: case.name().to_string(),
                branch: Some(result.branch),
                inlier_fraction: Some(result.inlier_fraction),
                re_deg: Some(m.re_deg()),
                te_m: Some(m.te),
                success: m.success,
                error: None,
                timing: result.timings,
            }
        }
        Err(e) => PairRow::failed(id, case.name(), e.to_string()),
    }
}

/// Registers every case in parallel and aggregates the outcome. A pair that
/// fails to load or register counts as unsuccessful; the suite carries on.
pub fn run_benchmark(
    cases: &[BenchmarkCase],
    cfg: &PipelineConfig,
    thresholds: &SuccessThresholds,
) -> Result<BenchmarkReport> {
    if cases.is_empty() {
        return Err(Error::InvalidParameter("benchmark suite is empty".into()));
    }
    cfg.validate()?;
    let clock = Instant::now();
    let rows: Vec<PairRow> = cases
        .par_iter()
        .enumerate()
        .map(|(id, case)| run_case(id, case, cfg, thresholds))
        .collect();
    let mut report = BenchmarkReport::from_rows(rows, *thresholds);
    report.timing.wall_seconds = clock.elapsed().as_secs_f64();
    Ok(report)
}
