//! Putative correspondences, ground-truth inlier labels and confidence weights.

use std::path::PathBuf;

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::geometry::{PointCloud, RigidTransform};
use crate::index::{IndexSpace, SpatialIndex};
use crate::io::weights::read_weight_file;

/// Clamp applied to probabilities before taking logs in [`bce_score`].
pub const PROBABILITY_EPS: f64 = 1e-7;

/// Default inlier radius for ground-truth labels and oracle weights (meters).
pub const DEFAULT_INLIER_TAU: f64 = 0.1;

/// Index pairs `(i, j)` matching source point `i` to target point `j`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CorrespondenceSet {
    pairs: Vec<(usize, usize)>,
    source_size: usize,
    target_size: usize,
}

impl CorrespondenceSet {
    /// Checks index bounds and that every source index occurs at most once.
    pub fn new(pairs: Vec<(usize, usize)>, source_size: usize, target_size: usize) -> Result<Self> {
        let mut seen = vec![false; source_size];
        for (k, &(i, j)) in pairs.iter().enumerate() {
            if i >= source_size || j >= target_size {
                return Err(Error::InvalidCorrespondences(format!(
                    "pair {k} ({i}, {j}) out of range for clouds of size {source_size} and {target_size}"
                )));
            }
            if std::mem::replace(&mut seen[i], true) {
                return Err(Error::InvalidCorrespondences(format!(
                    "source index {i} appears more than once"
                )));
            }
        }
        Ok(Self {
            pairs,
            source_size,
            target_size,
        })
    }

    pub fn pairs(&self) -> &[(usize, usize)] {
        &self.pairs
    }

    pub fn len(&self) -> usize {
        self.pairs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pairs.is_empty()
    }

    pub fn source_size(&self) -> usize {
        self.source_size
    }

    pub fn target_size(&self) -> usize {
        self.target_size
    }

    /// Verifies the declared sizes against the clouds.
    pub fn check_against(&self, source: &PointCloud, target: &PointCloud) -> Result<()> {
        if self.source_size != source.len() || self.target_size != target.len() {
            return Err(Error::InvalidCorrespondences(format!(
                "set declares sizes ({}, {}) but clouds have ({}, {})",
                self.source_size,
                self.target_size,
                source.len(),
                target.len()
            )));
        }
        Ok(())
    }

    /// Matched coordinates `(x_i, y_j)` in pair order.
    pub fn matched_points(
        &self,
        source: &PointCloud,
        target: &PointCloud,
    ) -> (Vec<nalgebra::Vector3<f64>>, Vec<nalgebra::Vector3<f64>>) {
        self.pairs
            .iter()
            .map(|&(i, j)| (*source.point(i), *target.point(j)))
            .unzip()
    }
}

/// Per-correspondence confidences in `[0, 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct WeightVector(Vec<f64>);

impl WeightVector {
    pub fn new(w: Vec<f64>) -> Result<Self> {
        if let Some((index, &value)) = w
            .iter()
            .enumerate()
            .find(|(_, v)| !v.is_finite() || **v < 0.0 || **v > 1.0)
        {
            return Err(Error::InvalidWeight { index, value });
        }
        Ok(Self(w))
    }

    pub fn constant(len: usize, value: f64) -> Result<Self> {
        Self::new(vec![value; len])
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn into_inner(self) -> Vec<f64> {
        self.0
    }
}

/// Ground-truth inlier flags for a correspondence set.
#[derive(Debug, Clone, PartialEq)]
pub struct InlierLabels {
    pub labels: Vec<bool>,
    pub tau: f64,
}

impl InlierLabels {
    pub fn inlier_count(&self) -> usize {
        self.labels.iter().filter(|&&l| l).count()
    }
}

/// Pairs each source point with its nearest target point in feature space.
/// Ties go to the lowest target index.
pub fn match_nearest(source: &PointCloud, target: &PointCloud) -> Result<CorrespondenceSet> {
    let fx = source.features().ok_or(Error::MissingFeatures)?;
    let fy = target.features().ok_or(Error::MissingFeatures)?;
    if fx.dim() != fy.dim() {
        return Err(Error::DimensionMismatch {
            source_dim: fx.dim(),
            target_dim: fy.dim(),
        });
    }
    let index = SpatialIndex::build(target, IndexSpace::Features)?;
    let pairs: Vec<(usize, usize)> = (0..fx.len())
        .into_par_iter()
        .map(|i| (i, index.nearest(fx.row(i)).index))
        .collect();
    CorrespondenceSet::new(pairs, source.len(), target.len())
}

/// Flags `(i, j)` as an inlier iff `‖T*(x_i) − y_j‖ < tau`.
pub fn label_inliers(
    matches: &CorrespondenceSet,
    source: &PointCloud,
    target: &PointCloud,
    ground_truth: &RigidTransform,
    tau: f64,
) -> InlierLabels {
    let labels = matches
        .pairs()
        .iter()
        .map(|&(i, j)| (ground_truth.apply_point(source.point(i)) - target.point(j)).norm() < tau)
        .collect();
    InlierLabels { labels, tau }
}

/// Source of correspondence confidences.
#[derive(Debug, Clone, PartialEq)]
pub enum WeightProvider {
    /// Every correspondence gets weight 1.
    Uniform,
    /// 1 for ground-truth inliers, 0 otherwise.
    Oracle {
        ground_truth: Option<RigidTransform>,
        tau: f64,
    },
    /// Reciprocity test times a ratio-test score.
    Heuristic,
    /// Weights stored in a weight file whose pairs must equal the set.
    File(PathBuf),
    /// Same value for every correspondence.
    Constant(f64),
}

impl WeightProvider {
    pub fn oracle(ground_truth: RigidTransform, tau: f64) -> Self {
        WeightProvider::Oracle {
            ground_truth: Some(ground_truth),
            tau,
        }
    }

    /// Fills in the ground truth of an oracle provider; other variants are unchanged.
    pub fn with_ground_truth(&self, transform: RigidTransform) -> Self {
        match self {
            WeightProvider::Oracle { tau, .. } => WeightProvider::oracle(transform, *tau),
            other => other.clone(),
        }
    }
}

pub fn weigh(
    matches: &CorrespondenceSet,
    source: &PointCloud,
    target: &PointCloud,
    provider: &WeightProvider,
) -> Result<WeightVector> {
    match provider {
        WeightProvider::Uniform => WeightVector::constant(matches.len(), 1.0),
        WeightProvider::Constant(v) => WeightVector::constant(matches.len(), *v),
        WeightProvider::Oracle { ground_truth, tau } => {
            let gt = ground_truth.as_ref().ok_or(Error::MissingGroundTruth)?;
            let labels = label_inliers(matches, source, target, gt, *tau);
            WeightVector::new(
                labels
                    .labels
                    .iter()
                    .map(|&l| if l { 1.0 } else { 0.0 })
                    .collect(),
            )
        }
        WeightProvider::Heuristic => heuristic_weights(matches, source, target),
        WeightProvider::File(path) => {
            let file = read_weight_file(path)?;
            if file.weights.len() != matches.len() {
                return Err(Error::WeightLengthMismatch {
                    expected: matches.len(),
                    found: file.weights.len(),
                });
            }
            if file.correspondences.pairs() != matches.pairs() {
                return Err(Error::InvalidCorrespondences(format!(
                    "{}: pairs differ from the correspondence set",
                    path.display()
                )));
            }
            Ok(file.weights)
        }
    }
}

/// `reciprocal(i, j) · clamp(1 − d₁/d₂, 0, 1)`, where `d₁ = ‖f_i − f_j‖` and
/// `d₂` is the feature distance from `f_i` to its nearest target other than
/// `j`. A pair is reciprocal when `i` is also the nearest source of `j`.
fn heuristic_weights(
    matches: &CorrespondenceSet,
    source: &PointCloud,
    target: &PointCloud,
) -> Result<WeightVector> {
    matches.check_against(source, target)?;
    let fx = source.features().ok_or(Error::MissingFeatures)?;
    let fy = target.features().ok_or(Error::MissingFeatures)?;
    if fx.dim() != fy.dim() {
        return Err(Error::DimensionMismatch {
            source_dim: fx.dim(),
            target_dim: fy.dim(),
        });
    }
    let target_index = SpatialIndex::build(target, IndexSpace::Features)?;
    let source_index = SpatialIndex::build(source, IndexSpace::Features)?;

    let w: Vec<f64> = matches
        .pairs()
        .par_iter()
        .map(|&(i, j)| {
            if source_index.nearest(fy.row(j)).index != i {
                return 0.0;
            }
            let d1 = feature_distance(fx.row(i), fy.row(j));
            let runner_up = target_index
                .k_nearest(fx.row(i), 2)
                .into_iter()
                .find(|n| n.index != j);
            match runner_up {
                None => 1.0,
                Some(n) if n.distance_sq > 0.0 => (1.0 - d1 / n.distance()).clamp(0.0, 1.0),
                Some(_) => 0.0,
            }
        })
        .collect();
    WeightVector::new(w)
}

fn feature_distance(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y) * (x - y))
        .sum::<f64>()
        .sqrt()
}

/// Mean binary cross-entropy (non-negative) of the weights against the labels.
pub fn bce_score(weights: &WeightVector, labels: &InlierLabels) -> Result<f64> {
    if weights.len() != labels.labels.len() {
        return Err(Error::LengthMismatch {
            left: weights.len(),
            right: labels.labels.len(),
        });
    }
    if weights.is_empty() {
        return Err(Error::EmptyCorrespondences);
    }
    let sum: f64 = weights
        .as_slice()
        .iter()
        .zip(&labels.labels)
        .map(|(&w, &inlier)| {
            let p = w.clamp(PROBABILITY_EPS, 1.0 - PROBABILITY_EPS);
            if inlier {
                p.ln()
            } else {
                (1.0 - p).ln()
            }
        })
        .sum();
    Ok(-sum / weights.len() as f64)
}
