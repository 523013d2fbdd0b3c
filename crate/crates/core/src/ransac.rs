//! RANSAC fallback over minimal 3-correspondence samples.

use nalgebra::Vector3;
use rand::seq::index::sample;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::correspondence::{CorrespondenceSet, WeightVector};
use crate::error::{Error, Result};
use crate::geometry::{PointCloud, RigidTransform};
use crate::procrustes::{prefilter, solve, NormalizedWeights};

pub const SAMPLE_SIZE: usize = 3;

/// Sine of the smallest sample angle below which a triple counts as collinear.
const COLLINEAR_TOLERANCE: f64 = 1e-9;
const MAX_DRAW_FACTOR: usize = 10;
const MAX_LOCAL_REFITS: usize = 10;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RansacConfig {
    pub max_iterations: usize,
    pub inlier_threshold: f64,
    pub confidence: f64,
    pub seed: u64,
}

impl Default for RansacConfig {
    fn default() -> Self {
        Self {
            max_iterations: 10_000,
            inlier_threshold: 0.05,
            confidence: 0.999,
            seed: 0,
        }
    }
}

impl RansacConfig {
    pub fn validate(&self) -> Result<()> {
        if self.max_iterations == 0 {
            return Err(Error::InvalidParameter("ransac max_iterations must be >= 1".into()));
        }
        if !(self.inlier_threshold > 0.0) || !self.inlier_threshold.is_finite() {
            return Err(Error::InvalidParameter(format!(
                "ransac inlier_threshold must be positive, got {}",
                self.inlier_threshold
            )));
        }
        if !(self.confidence > 0.0 && self.confidence < 1.0) {
            return Err(Error::InvalidParameter(format!(
                "ransac confidence must lie in (0, 1), got {}",
                self.confidence
            )));
        }
        Ok(())
    }
}

/// `Σ φ(w_k) / |M|`: the estimated fraction of valid correspondences.
pub fn inlier_fraction(weights: &WeightVector, tau: f64) -> Result<f64> {
    if weights.is_empty() {
        return Err(Error::EmptyCorrespondences);
    }
    let sum: f64 = prefilter(weights.as_slice(), tau).iter().sum();
    Ok(sum / weights.len() as f64)
}

#[derive(Debug, Clone, PartialEq)]
pub struct RansacResult {
    pub transform: RigidTransform,
    /// Consensus flags per correspondence under the final model.
    pub inliers: Vec<bool>,
    pub inlier_count: usize,
    /// RMS residual over the consensus set.
    pub rms: f64,
    /// Hypotheses evaluated.
    pub iterations: usize,
}

#[derive(Clone, Copy)]
struct Score {
    count: usize,
    rms: f64,
}

impl Score {
    fn beats(&self, other: &Score) -> bool {
        self.count > other.count || (self.count == other.count && self.rms < other.rms)
    }
}

fn score(
    transform: &RigidTransform,
    source: &[Vector3<f64>],
    target: &[Vector3<f64>],
    threshold: f64,
) -> (Score, Vec<bool>) {
    let mut sq = 0.0;
    let mut count = 0;
    let flags = source
        .iter()
        .zip(target)
        .map(|(x, y)| {
            let r2 = (transform.apply_point(x) - y).norm_squared();
            let inlier = r2 < threshold * threshold;
            if inlier {
                sq += r2;
                count += 1;
            }
            inlier
        })
        .collect();
    let rms = if count > 0 { (sq / count as f64).sqrt() } else { f64::INFINITY };
    (Score { count, rms }, flags)
}

fn collinear(a: &Vector3<f64>, b: &Vector3<f64>, c: &Vector3<f64>) -> bool {
    let (u, v) = (b - a, c - a);
    let scale = u.norm() * v.norm();
    !(scale > 0.0) || u.cross(&v).norm() <= COLLINEAR_TOLERANCE * scale
}

fn fit(source: &[Vector3<f64>], target: &[Vector3<f64>]) -> Option<RigidTransform> {
    let w = NormalizedWeights::uniform(source.len()).ok()?;
    solve(source, target, &w).ok().map(|s| s.transform)
}

fn subset(points: &[Vector3<f64>], flags: &[bool]) -> Vec<Vector3<f64>> {
    points
        .iter()
        .zip(flags)
        .filter(|(_, &f)| f)
        .map(|(p, _)| *p)
        .collect()
}

/// Hypotheses needed to draw one all-inlier sample with `confidence`.
fn required_iterations(inlier_ratio: f64, confidence: f64, cap: usize) -> usize {
    let p = inlier_ratio.powi(SAMPLE_SIZE as i32);
    if p >= 1.0 {
        return 1;
    }
    if p <= 0.0 {
        return cap;
    }
    let n = ((1.0 - confidence).ln() / (1.0 - p).ln()).ceil();
    if n.is_finite() && n >= 1.0 {
        (n as usize).min(cap)
    } else {
        cap
    }
}

/// Robust rigid fit of the putative correspondences.
///
/// Hypotheses come from a seeded sequential stream and are ranked by inlier
/// count, then by RMS residual, then by arrival order. The winner is refit
/// on its consensus set until the set stops growing.
pub fn ransac_register(
    matches: &CorrespondenceSet,
    source: &PointCloud,
    target: &PointCloud,
    cfg: &RansacConfig,
) -> Result<RansacResult> {
    cfg.validate()?;
    matches.check_against(source, target)?;
    let n = matches.len();
    if n < SAMPLE_SIZE {
        return Err(Error::TooFewCorrespondences { found: n });
    }
    let (xs, ys) = matches.matched_points(source, target);

    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut best: Option<(Score, RigidTransform)> = None;
    let mut required = cfg.max_iterations;
    let mut iterations = 0;
    let mut draws = 0;

    while iterations < required && draws < MAX_DRAW_FACTOR * cfg.max_iterations {
        draws += 1;
        let idx = sample(&mut rng, n, SAMPLE_SIZE);
        let (i, j, k) = (idx.index(0), idx.index(1), idx.index(2));
        if collinear(&xs[i], &xs[j], &xs[k]) || collinear(&ys[i], &ys[j], &ys[k]) {
            continue;
        }
        iterations += 1;
        let Some(model) = fit(&[xs[i], xs[j], xs[k]], &[ys[i], ys[j], ys[k]]) else {
            continue;
        };
        let (s, _) = score(&model, &xs, &ys, cfg.inlier_threshold);
        if best.as_ref().is_none_or(|(b, _)| s.beats(b)) {
            required = required_iterations(s.count as f64 / n as f64, cfg.confidence, cfg.max_iterations);
            best = Some((s, model));
        }
    }

    let Some((mut best_score, mut model)) = best else {
        return Err(Error::NoConsensus { best: 0 });
    };
    if best_score.count < SAMPLE_SIZE {
        return Err(Error::NoConsensus {
            best: best_score.count,
        });
    }

    let (_, mut flags) = score(&model, &xs, &ys, cfg.inlier_threshold);
    for _ in 0..MAX_LOCAL_REFITS {
        let Some(refit) = fit(&subset(&xs, &flags), &subset(&ys, &flags)) else {
            break;
        };
        let (s, f) = score(&refit, &xs, &ys, cfg.inlier_threshold);
        if s.count < best_score.count || (s.count == best_score.count && s.rms >= best_score.rms) {
            break;
        }
        best_score = s;
        model = refit;
        flags = f;
    }

    Ok(RansacResult {
        transform: model,
        inlier_count: best_score.count,
        inliers: flags,
        rms: best_score.rms,
        iterations,
    })
}
