//! Synthetic scan pairs with known ground truth.
//!
//! A room-like scene is built from random planar patches. The scene points
//! are ordered along a random horizontal direction; the source takes the
//! first `n` and the target the last `n`, so exactly `round(overlap · n)`
//! scene points are seen by both scans. The target is moved by the ground
//! truth, perturbed by Gaussian noise, and a fixed number of its points are
//! replaced by uniform clutter inside its bounding box.
//!
//! Every scene point carries a random unit descriptor shared by both scans,
//! which stands in for an ideal learned feature; clutter points get fresh
//! descriptors.

use nalgebra::Vector3;
use rand::seq::{index::sample, SliceRandom};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::correspondence::CorrespondenceSet;
use crate::error::{Error, Result};
use crate::geometry::{Features, PointCloud, RigidTransform};

/// Dimension of the descriptors attached to generated clouds.
pub const SYNTHETIC_FEATURE_DIM: usize = 16;

const PATCH_COUNT: usize = 6;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SyntheticPairSpec {
    pub n_points: usize,
    pub overlap_ratio: f64,
    /// Standard deviation of the target noise, meters.
    pub noise_sigma: f64,
    pub outlier_ratio: f64,
    /// Largest rotation angle, radians.
    pub max_rotation: f64,
    /// Largest translation norm, meters.
    pub max_translation: f64,
    pub seed: u64,
}

impl Default for SyntheticPairSpec {
    fn default() -> Self {
        Self {
            n_points: 1000,
            overlap_ratio: 0.5,
            noise_sigma: 0.0,
            outlier_ratio: 0.0,
            max_rotation: std::f64::consts::PI,
            max_translation: 1.0,
            seed: 0,
        }
    }
}

impl SyntheticPairSpec {
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidParameter(msg));
        if self.n_points < 10 {
            return bad(format!("n_points must be >= 10, got {}", self.n_points));
        }
        for (name, v) in [("overlap_ratio", self.overlap_ratio), ("outlier_ratio", self.outlier_ratio)] {
            if !(0.0..=1.0).contains(&v) {
                return bad(format!("{name} must lie in [0, 1], got {v}"));
            }
        }
        for (name, v) in [
            ("noise_sigma", self.noise_sigma),
            ("max_rotation", self.max_rotation),
            ("max_translation", self.max_translation),
        ] {
            if !(v >= 0.0) || !v.is_finite() {
                return bad(format!("{name} must be finite and non-negative, got {v}"));
            }
        }
        Ok(())
    }

    /// Scene points visible in both scans.
    pub fn shared_count(&self) -> usize {
        (self.overlap_ratio * self.n_points as f64).round() as usize
    }

    pub fn outlier_count(&self) -> usize {
        (self.outlier_ratio * self.n_points as f64).round() as usize
    }
}

#[derive(Debug, Clone)]
pub struct SyntheticPair {
    pub source: PointCloud,
    pub target: PointCloud,
    /// Maps source coordinates into the target frame.
    pub ground_truth: RigidTransform,
    /// For each target point, the source point it was generated from, if any.
    /// `None` for points outside the overlap and for clutter.
    pub target_origin: Vec<Option<usize>>,
    /// Target points replaced by clutter.
    pub outlier: Vec<bool>,
    /// Scene points seen by both scans, before clutter replacement.
    pub shared: usize,
}

impl SyntheticPair {
    pub fn outlier_count(&self) -> usize {
        self.outlier.iter().filter(|&&o| o).count()
    }

    /// Every (source, target) pair known to be a true match, in target order.
    pub fn construction_correspondences(&self) -> CorrespondenceSet {
        let pairs = self
            .target_origin
            .iter()
            .enumerate()
            .filter_map(|(j, o)| o.map(|i| (i, j)))
            .collect();
        CorrespondenceSet::new(pairs, self.source.len(), self.target.len())
            .expect("construction pairs are in range and unique")
    }

    /// Whether each pair of `set` is a true match by construction.
    pub fn construction_labels(&self, set: &CorrespondenceSet) -> Vec<bool> {
        set.pairs()
            .iter()
            .map(|&(i, j)| self.target_origin.get(j).copied().flatten() == Some(i))
            .collect()
    }
}

struct Patch {
    center: Vector3<f64>,
    u: Vector3<f64>,
    v: Vector3<f64>,
    half: (f64, f64),
}

fn random_unit(rng: &mut ChaCha8Rng) -> Vector3<f64> {
    loop {
        let v = Vector3::new(
            StandardNormal.sample(rng),
            StandardNormal.sample(rng),
            StandardNormal.sample(rng),
        );
        let n: f64 = v.norm();
        if n > 1e-9 {
            return v / n;
        }
    }
}

fn random_descriptor(rng: &mut ChaCha8Rng) -> Vec<f64> {
    loop {
        let v: Vec<f64> = (0..SYNTHETIC_FEATURE_DIM).map(|_| StandardNormal.sample(rng)).collect();
        let n = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        if n > 1e-9 {
            return v.into_iter().map(|x| x / n).collect();
        }
    }
}

fn random_patch(rng: &mut ChaCha8Rng) -> Patch {
    let center = Vector3::new(
        rng.random_range(0.5..3.5),
        rng.random_range(0.5..3.5),
        rng.random_range(0.3..2.2),
    );
    let normal = random_unit(rng);
    let helper = if normal.x.abs() < 0.9 { Vector3::x() } else { Vector3::y() };
    let u = normal.cross(&helper).normalize();
    let v = normal.cross(&u);
    Patch {
        center,
        u,
        v,
        half: (rng.random_range(0.4..1.0), rng.random_range(0.4..1.0)),
    }
}

fn random_transform(rng: &mut ChaCha8Rng, max_rotation: f64, max_translation: f64) -> RigidTransform {
    let axis = random_unit(rng);
    let angle = if max_rotation > 0.0 { rng.random_range(0.0..=max_rotation) } else { 0.0 };
    let magnitude = if max_translation > 0.0 { rng.random_range(0.0..=max_translation) } else { 0.0 };
    RigidTransform::from_axis_angle(axis, angle, random_unit(rng) * magnitude)
}

/// Builds a pair from `spec`; identical specs give identical pairs.
pub fn generate_pair(spec: &SyntheticPairSpec) -> Result<SyntheticPair> {
    spec.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let n = spec.n_points;
    let shared = spec.shared_count();
    let total = 2 * n - shared;

    let patches: Vec<Patch> = (0..PATCH_COUNT).map(|_| random_patch(&mut rng)).collect();
    let mut scene: Vec<Vector3<f64>> = (0..total)
        .map(|_| {
            let p = &patches[rng.random_range(0..PATCH_COUNT)];
            let a = rng.random_range(-p.half.0..=p.half.0);
            let b = rng.random_range(-p.half.1..=p.half.1);
            p.center + p.u * a + p.v * b
        })
        .collect();
    let heading = rng.random_range(0.0..std::f64::consts::TAU);
    let dir = Vector3::new(heading.cos(), heading.sin(), 0.0);
    scene.sort_by(|a, b| a.dot(&dir).total_cmp(&b.dot(&dir)));
    let descriptors: Vec<Vec<f64>> = (0..total).map(|_| random_descriptor(&mut rng)).collect();

    let ground_truth = random_transform(&mut rng, spec.max_rotation, spec.max_translation);

    // scene index of each slot, before shuffling
    let mut source_slots: Vec<usize> = (0..n).collect();
    let mut target_slots: Vec<usize> = (n - shared..total).collect();
    source_slots.shuffle(&mut rng);
    target_slots.shuffle(&mut rng);

    let mut source_of_scene = vec![None; total];
    for (i, &s) in source_slots.iter().enumerate() {
        source_of_scene[s] = Some(i);
    }

    let source_points: Vec<Vector3<f64>> = source_slots.iter().map(|&s| scene[s]).collect();
    let source_features: Vec<&[f64]> = source_slots.iter().map(|&s| descriptors[s].as_slice()).collect();

    let noise = Normal::new(0.0, spec.noise_sigma).expect("sigma validated");
    let mut target_points: Vec<Vector3<f64>> = target_slots
        .iter()
        .map(|&s| {
            let p = ground_truth.apply_point(&scene[s]);
            if spec.noise_sigma > 0.0 {
                p + Vector3::new(noise.sample(&mut rng), noise.sample(&mut rng), noise.sample(&mut rng))
            } else {
                p
            }
        })
        .collect();
    let mut target_features: Vec<Vec<f64>> = target_slots.iter().map(|&s| descriptors[s].clone()).collect();
    let mut target_origin: Vec<Option<usize>> = target_slots.iter().map(|&s| source_of_scene[s]).collect();

    let (lo, hi) = bounding_box(&target_points);
    let mut outlier = vec![false; n];
    for j in sample(&mut rng, n, spec.outlier_count()).into_iter() {
        target_points[j] = Vector3::new(
            uniform(&mut rng, lo.x, hi.x),
            uniform(&mut rng, lo.y, hi.y),
            uniform(&mut rng, lo.z, hi.z),
        );
        target_features[j] = random_descriptor(&mut rng);
        target_origin[j] = None;
        outlier[j] = true;
    }

    let source = PointCloud::with_features(source_points, Some(Features::from_rows(&source_features)?))?;
    let target = PointCloud::with_features(target_points, Some(Features::from_rows(&target_features)?))?;
    Ok(SyntheticPair {
        source,
        target,
        ground_truth,
        target_origin,
        outlier,
        shared,
    })
}

fn uniform(rng: &mut ChaCha8Rng, lo: f64, hi: f64) -> f64 {
    if hi > lo {
        rng.random_range(lo..hi)
    } else {
        lo
    }
}

fn bounding_box(points: &[Vector3<f64>]) -> (Vector3<f64>, Vector3<f64>) {
    points.iter().fold(
        (Vector3::repeat(f64::INFINITY), Vector3::repeat(f64::NEG_INFINITY)),
        |(lo, hi), p| (lo.inf(p), hi.sup(p)),
    )
}
