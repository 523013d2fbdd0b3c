//! End-to-end pairwise registration.
//!
//! Downsample, describe, match, weigh, then either fit with weighted
//! Procrustes and refine, or fall back to RANSAC when the filtered weight
//! mass is too small or the closed-form solve fails.

use std::time::Instant;

use serde::Serialize;

use crate::correspondence::{match_nearest, weigh, CorrespondenceSet, WeightProvider, WeightVector, DEFAULT_INLIER_TAU};
use crate::error::{Error, Result};
use crate::evaluation::SuccessThresholds;
use crate::features::{compute_features, FeatureConfig};
use crate::geometry::{voxel_downsample, PointCloud, RigidTransform};
use crate::procrustes::{normalize_weights, solve, NormalizedWeights};
use crate::ransac::{inlier_fraction, ransac_register, RansacConfig};
use crate::refine::{refine, RefineConfig, RefineTrace};

/// Safeguard threshold on the filtered weight fraction.
pub const DEFAULT_SAFEGUARD_TAU: f64 = 0.05;

#[derive(Debug, Clone, PartialEq)]
pub struct PipelineConfig {
    pub feature: FeatureConfig,
    pub weighter: WeightProvider,
    pub voxel_size: f64,
    pub voxel_seed: u64,
    pub safeguard_tau_s: f64,
    /// Shared by the weight normalisation, the safeguard test and refinement.
    pub prefilter_tau: f64,
    pub refine: RefineConfig,
    pub ransac: RansacConfig,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        Self::indoor()
    }
}

impl PipelineConfig {
    /// 5 cm voxels.
    pub fn indoor() -> Self {
        Self {
            feature: FeatureConfig::default(),
            weighter: WeightProvider::Heuristic,
            voxel_size: 0.05,
            voxel_seed: 0,
            safeguard_tau_s: DEFAULT_SAFEGUARD_TAU,
            prefilter_tau: 0.4,
            refine: RefineConfig::default(),
            ransac: RansacConfig {
                inlier_threshold: 0.05,
                ..RansacConfig::default()
            },
        }
    }

    /// 30 cm voxels for outdoor lidar sweeps.
    pub fn outdoor() -> Self {
        let mut cfg = Self::indoor();
        cfg.voxel_size = 0.3;
        cfg.feature = FeatureConfig {
            descriptor: crate::features::Descriptor::LocalHistogram {
                radius: 1.5,
                bins: 8,
            },
        };
        cfg.refine.huber_delta = 0.3;
        cfg.ransac.inlier_threshold = 0.3;
        cfg
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.voxel_size > 0.0) || !self.voxel_size.is_finite() {
            return Err(Error::InvalidParameter(format!(
                "voxel_size must be positive, got {}",
                self.voxel_size
            )));
        }
        if !(self.safeguard_tau_s > 0.0 && self.safeguard_tau_s < 1.0) {
            return Err(Error::InvalidParameter(format!(
                "safeguard_tau_s must lie in (0, 1), got {}",
                self.safeguard_tau_s
            )));
        }
        if !(0.0..1.0).contains(&self.prefilter_tau) {
            return Err(Error::InvalidParameter(format!(
                "prefilter_tau must lie in [0, 1), got {}",
                self.prefilter_tau
            )));
        }
        if let WeightProvider::Oracle { tau, .. } = self.weighter {
            if !(tau > 0.0) {
                return Err(Error::InvalidParameter(format!("oracle tau must be positive, got {tau}")));
            }
        }
        if let WeightProvider::Constant(v) = self.weighter {
            if !(0.0..=1.0).contains(&v) {
                return Err(Error::InvalidParameter(format!("constant weight must lie in [0, 1], got {v}")));
            }
        }
        self.feature.validate()?;
        self.refine_config().validate()?;
        self.ransac.validate()
    }

    fn refine_config(&self) -> RefineConfig {
        RefineConfig {
            prefilter_tau: self.prefilter_tau,
            ..self.refine
        }
    }
}

/// Named configurations bundled with their success thresholds.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Preset {
    Indoor,
    Outdoor,
}

impl Preset {
    pub fn from_name(name: &str) -> Option<Self> {
        match name {
            "indoor" => Some(Preset::Indoor),
            "outdoor" | "kitti" => Some(Preset::Outdoor),
            _ => None,
        }
    }

    pub fn config(&self) -> PipelineConfig {
        match self {
            Preset::Indoor => PipelineConfig::indoor(),
            Preset::Outdoor => PipelineConfig::outdoor(),
        }
    }

    pub fn thresholds(&self) -> SuccessThresholds {
        match self {
            Preset::Indoor => SuccessThresholds::INDOOR,
            Preset::Outdoor => SuccessThresholds::OUTDOOR,
        }
    }
}

/// The oracle weighter with the default inlier radius and no ground truth yet.
pub fn oracle_weighter() -> WeightProvider {
    WeightProvider::Oracle {
        ground_truth: None,
        tau: DEFAULT_INLIER_TAU,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Branch {
    WeightedProcrustesRefined,
    Safeguard,
}

impl Branch {
    pub fn as_str(&self) -> &'static str {
        match self {
            Branch::WeightedProcrustesRefined => "weighted_procrustes_refined",
            Branch::Safeguard => "safeguard",
        }
    }
}

/// Why the safeguard branch was taken.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "kind", content = "detail", rename_all = "snake_case")]
pub enum SafeguardReason {
    LowInlierFraction,
    SolverError(String),
}

/// Wall-clock seconds per stage; stages that did not run stay at zero.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize)]
pub struct StageTimings {
    pub downsample: f64,
    pub features: f64,
    pub matching: f64,
    pub weighting: f64,
    pub procrustes: f64,
    pub refine: f64,
    pub safeguard: f64,
}

impl StageTimings {
    pub fn total(&self) -> f64 {
        self.downsample
            + self.features
            + self.matching
            + self.weighting
            + self.procrustes
            + self.refine
            + self.safeguard
    }

    pub fn accumulate(&mut self, other: &StageTimings) {
        self.downsample += other.downsample;
        self.features += other.features;
        self.matching += other.matching;
        self.weighting += other.weighting;
        self.procrustes += other.procrustes;
        self.refine += other.refine;
        self.safeguard += other.safeguard;
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RegistrationResult {
    pub transform: RigidTransform,
    pub branch: Branch,
    pub safeguard_reason: Option<SafeguardReason>,
    pub inlier_fraction: f64,
    /// Closed-form estimate before refinement (main branch only).
    pub initial_transform: Option<RigidTransform>,
    pub trace: Option<RefineTrace>,
    pub correspondence_count: usize,
    pub timings: StageTimings,
}

fn seconds(since: Instant) -> f64 {
    since.elapsed().as_secs_f64()
}

/// Registers `source` onto `target`: the returned transform maps source
/// coordinates into the target frame.
pub fn register(source: &PointCloud, target: &PointCloud, cfg: &PipelineConfig) -> Result<RegistrationResult> {
    cfg.validate()?;
    if source.is_empty() || target.is_empty() {
        return Err(Error::EmptyCloud);
    }
    let mut timings = StageTimings::default();

    let clock = Instant::now();
    let x = voxel_downsample(source, cfg.voxel_size, cfg.voxel_seed)?;
    let y = voxel_downsample(target, cfg.voxel_size, cfg.voxel_seed)?;
    timings.downsample = seconds(clock);

    let clock = Instant::now();
    let x = compute_features(&x, &cfg.feature)?;
    let y = compute_features(&y, &cfg.feature)?;
    timings.features = seconds(clock);

    let clock = Instant::now();
    let matches = match_nearest(&x, &y)?;
    timings.matching = seconds(clock);

    let clock = Instant::now();
    let weights = weigh(&matches, &x, &y, &cfg.weighter)?;
    timings.weighting = seconds(clock);

    decide(&matches, &weights, &x, &y, cfg, timings)
}

/// Runs the pipeline from the safeguard test onward on externally supplied
/// correspondences and weights.
pub fn register_with_correspondences(
    matches: &CorrespondenceSet,
    weights: &WeightVector,
    source: &PointCloud,
    target: &PointCloud,
    cfg: &PipelineConfig,
) -> Result<RegistrationResult> {
    cfg.validate()?;
    if source.is_empty() || target.is_empty() {
        return Err(Error::EmptyCloud);
    }
    matches.check_against(source, target)?;
    if weights.len() != matches.len() {
        return Err(Error::WeightLengthMismatch {
            expected: matches.len(),
            found: weights.len(),
        });
    }
    decide(matches, weights, source, target, cfg, StageTimings::default())
}

/// Baseline: one closed-form fit on every putative match with equal weights,
/// no prefilter, no refinement and no safeguard.
pub fn register_unweighted(source: &PointCloud, target: &PointCloud, cfg: &PipelineConfig) -> Result<RigidTransform> {
    cfg.validate()?;
    if source.is_empty() || target.is_empty() {
        return Err(Error::EmptyCloud);
    }
    let x = voxel_downsample(source, cfg.voxel_size, cfg.voxel_seed)?;
    let y = voxel_downsample(target, cfg.voxel_size, cfg.voxel_seed)?;
    let x = compute_features(&x, &cfg.feature)?;
    let y = compute_features(&y, &cfg.feature)?;
    let matches = match_nearest(&x, &y)?;
    let (xs, ys) = matches.matched_points(&x, &y);
    Ok(solve(&xs, &ys, &NormalizedWeights::uniform(matches.len())?)?.transform)
}

fn decide(
    matches: &CorrespondenceSet,
    weights: &WeightVector,
    x: &PointCloud,
    y: &PointCloud,
    cfg: &PipelineConfig,
    mut timings: StageTimings,
) -> Result<RegistrationResult> {
    if matches.is_empty() {
        return Err(Error::RegistrationFailed("no correspondences".into()));
    }
    let fraction = inlier_fraction(weights, cfg.prefilter_tau)?;

    let reason = if fraction < cfg.safeguard_tau_s {
        SafeguardReason::LowInlierFraction
    } else {
        match weighted_branch(matches, weights, x, y, cfg, &mut timings) {
            Ok((initial, transform, trace)) => {
                return Ok(RegistrationResult {
                    transform,
                    branch: Branch::WeightedProcrustesRefined,
                    safeguard_reason: None,
                    inlier_fraction: fraction,
                    initial_transform: Some(initial),
                    trace: Some(trace),
                    correspondence_count: matches.len(),
                    timings,
                })
            }
            Err(e) => SafeguardReason::SolverError(e.to_string()),
        }
    };

    let clock = Instant::now();
    let fallback = ransac_register(matches, x, y, &cfg.ransac);
    timings.safeguard = seconds(clock);
    match fallback {
        Ok(r) => Ok(RegistrationResult {
            transform: r.transform,
            branch: Branch::Safeguard,
            safeguard_reason: Some(reason),
            inlier_fraction: fraction,
            initial_transform: None,
            trace: None,
            correspondence_count: matches.len(),
            timings,
        }),
        Err(e) => {
            let why = match reason {
                SafeguardReason::LowInlierFraction => format!("inlier fraction {fraction} below threshold"),
                SafeguardReason::SolverError(s) => s,
            };
            Err(Error::RegistrationFailed(format!("{why}; safeguard failed: {e}")))
        }
    }
}

fn weighted_branch(
    matches: &CorrespondenceSet,
    weights: &WeightVector,
    x: &PointCloud,
    y: &PointCloud,
    cfg: &PipelineConfig,
    timings: &mut StageTimings,
) -> Result<(RigidTransform, RigidTransform, RefineTrace)> {
    let clock = Instant::now();
    let normalized = normalize_weights(weights, cfg.prefilter_tau)?;
    let (xs, ys) = matches.matched_points(x, y);
    let solution = solve(&xs, &ys, &normalized)?;
    timings.procrustes = seconds(clock);

    let clock = Instant::now();
    let (transform, trace) = refine(&solution.transform, matches, x, y, weights, &cfg.refine_config())?;
    timings.refine = seconds(clock);
    Ok((solution.transform, transform, trace))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::evaluation::{rotation_error, translation_error};
    use crate::features::Descriptor;
    use nalgebra::Vector3;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn cloud(n: usize, seed: u64) -> PointCloud {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        PointCloud::new(
            (0..n)
                .map(|_| Vector3::new(rng.random_range(0.0..2.0), rng.random_range(0.0..2.0), rng.random_range(0.0..1.0)))
                .collect(),
        )
        .unwrap()
    }

    #[test]
    fn identical_clouds_register_to_identity() {
        let x = cloud(400, 1);
        let cfg = PipelineConfig {
            feature: FeatureConfig {
                descriptor: Descriptor::RawXyz,
            },
            weighter: WeightProvider::Uniform,
            ..PipelineConfig::indoor()
        };
        let r = register(&x, &x, &cfg).unwrap();
        assert_eq!(r.branch, Branch::WeightedProcrustesRefined);
        assert!(rotation_error(r.transform.rotation(), &nalgebra::Matrix3::identity()) <= 1e-6);
        assert!(r.transform.translation().norm() <= 1e-8);
    }

    #[test]
    fn zero_weights_take_safeguard() {
        let x = cloud(300, 2);
        let cfg = PipelineConfig {
            feature: FeatureConfig {
                descriptor: Descriptor::RawXyz,
            },
            weighter: WeightProvider::Constant(0.0),
            ..PipelineConfig::indoor()
        };
        let r = register(&x, &x, &cfg).unwrap();
        assert_eq!(r.branch, Branch::Safeguard);
        assert_eq!(r.safeguard_reason, Some(SafeguardReason::LowInlierFraction));
        assert_eq!(r.inlier_fraction, 0.0);
        assert!(r.trace.is_none());
    }

    #[test]
    fn fraction_at_threshold_keeps_main_branch() {
        let x = cloud(60, 3);
        let gt = RigidTransform::from_axis_angle(Vector3::new(1.0, 1.0, 0.0), 0.5, Vector3::new(0.1, 0.2, 0.3));
        let y = crate::geometry::apply_transform(&gt, &x);
        let m = CorrespondenceSet::new((0..60).map(|i| (i, i)).collect(), 60, 60).unwrap();
        let mut w = vec![0.0; 60];
        w[5] = 1.0;
        w[17] = 1.0;
        w[42] = 1.0;
        let w = WeightVector::new(w).unwrap();
        let cfg = PipelineConfig::indoor();
        assert_eq!(inlier_fraction(&w, cfg.prefilter_tau).unwrap(), cfg.safeguard_tau_s);
        let r = register_with_correspondences(&m, &w, &x, &y, &cfg).unwrap();
        assert_eq!(r.branch, Branch::WeightedProcrustesRefined);
        assert!(rotation_error(r.transform.rotation(), gt.rotation()) <= 1e-6);
    }

    #[test]
    fn solver_failure_diverts_to_safeguard() {
        // only two positive weights: fraction is high but the solve needs three
        let x = cloud(4, 4);
        let m = CorrespondenceSet::new((0..4).map(|i| (i, i)).collect(), 4, 4).unwrap();
        let w = WeightVector::new(vec![1.0, 1.0, 0.0, 0.0]).unwrap();
        let r = register_with_correspondences(&m, &w, &x, &x, &PipelineConfig::indoor()).unwrap();
        assert_eq!(r.branch, Branch::Safeguard);
        assert!(matches!(r.safeguard_reason, Some(SafeguardReason::SolverError(_))));
        assert!(rotation_error(r.transform.rotation(), &nalgebra::Matrix3::identity()) < 1e-9);
    }

    #[test]
    fn both_branches_failing_is_an_error() {
        let x = PointCloud::from_slice(&[[0.0; 3], [1.0, 0.0, 0.0]]).unwrap();
        let m = CorrespondenceSet::new(vec![(0, 0), (1, 1)], 2, 2).unwrap();
        let w = WeightVector::constant(2, 1.0).unwrap();
        assert!(matches!(
            register_with_correspondences(&m, &w, &x, &x, &PipelineConfig::indoor()),
            Err(Error::RegistrationFailed(_))
        ));
    }

    #[test]
    fn oracle_weights_with_outliers() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let x = cloud(500, 6);
        let gt = RigidTransform::from_axis_angle(Vector3::new(0.2, -0.3, 1.0), 2.0, Vector3::new(1.0, -0.5, 0.2));
        let ys: Vec<_> = x
            .points()
            .iter()
            .enumerate()
            .map(|(k, p)| {
                if k % 5 < 3 {
                    Vector3::new(rng.random_range(-2.0..3.0), rng.random_range(-2.0..3.0), rng.random_range(-2.0..3.0))
                } else {
                    gt.apply_point(p)
                }
            })
            .collect();
        let y = PointCloud::new(ys).unwrap();
        let m = CorrespondenceSet::new((0..500).map(|i| (i, i)).collect(), 500, 500).unwrap();
        let cfg = PipelineConfig::indoor();
        let w = weigh(&m, &x, &y, &WeightProvider::oracle(gt, 0.1)).unwrap();
        let r = register_with_correspondences(&m, &w, &x, &y, &cfg).unwrap();
        assert_eq!(r.branch, Branch::WeightedProcrustesRefined);
        assert!(rotation_error(r.transform.rotation(), gt.rotation()).to_degrees() <= 0.1);
        assert!(translation_error(r.transform.translation(), gt.translation()) <= 0.005);
    }

    #[test]
    fn invalid_config_rejected() {
        let x = cloud(10, 7);
        let cfg = PipelineConfig {
            safeguard_tau_s: 1.5,
            ..PipelineConfig::indoor()
        };
        assert!(matches!(register(&x, &x, &cfg), Err(Error::InvalidParameter(_))));
        let empty = PointCloud::new(vec![]).unwrap();
        assert!(matches!(register(&empty, &x, &PipelineConfig::indoor()), Err(Error::EmptyCloud)));
    }
}
