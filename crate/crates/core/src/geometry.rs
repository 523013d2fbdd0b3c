//! Point clouds, rigid transforms and voxel-grid subsampling.

use std::collections::BTreeMap;

use nalgebra::{Matrix3, Rotation3, Unit, Vector3};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};

/// Tolerance on `‖RᵀR − I‖_max` and `|det R − 1|` for a valid rotation.
pub const ROTATION_TOLERANCE: f64 = 1e-9;

/// Row-major per-point descriptors of a fixed dimension.
#[derive(Debug, Clone, PartialEq)]
pub struct Features {
    dim: usize,
    data: Vec<f64>,
}

impl Features {
    pub fn new(dim: usize, data: Vec<f64>) -> Result<Self> {
        if dim == 0 {
            return Err(Error::InvalidCloud("feature dimension must be >= 1".into()));
        }
        if !data.len().is_multiple_of(dim) {
            return Err(Error::InvalidCloud(format!(
                "feature buffer of length {} is not a multiple of dimension {dim}",
                data.len()
            )));
        }
        if let Some(pos) = data.iter().position(|v| !v.is_finite()) {
            return Err(Error::InvalidCloud(format!(
                "non-finite feature value in row {}",
                pos / dim
            )));
        }
        Ok(Self { dim, data })
    }

    pub fn from_rows<R: AsRef<[f64]>>(rows: &[R]) -> Result<Self> {
        let dim = rows.first().map(|r| r.as_ref().len()).unwrap_or(1);
        let mut data = Vec::with_capacity(rows.len() * dim);
        for (i, row) in rows.iter().enumerate() {
            let row = row.as_ref();
            if row.len() != dim {
                return Err(Error::InvalidCloud(format!(
                    "feature row {i} has dimension {}, expected {dim}",
                    row.len()
                )));
            }
            data.extend_from_slice(row);
        }
        Self::new(dim, data)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.data.len() / self.dim
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.dim..(i + 1) * self.dim]
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    fn select(&self, indices: &[usize]) -> Self {
        let mut data = Vec::with_capacity(indices.len() * self.dim);
        for &i in indices {
            data.extend_from_slice(self.row(i));
        }
        Self {
            dim: self.dim,
            data,
        }
    }
}

/// An ordered set of 3D points (meters) with optional per-point features.
#[derive(Debug, Clone, PartialEq)]
pub struct PointCloud {
    points: Vec<Vector3<f64>>,
    features: Option<Features>,
}

impl PointCloud {
    pub fn new(points: Vec<Vector3<f64>>) -> Result<Self> {
        Self::with_features(points, None)
    }

    pub fn with_features(points: Vec<Vector3<f64>>, features: Option<Features>) -> Result<Self> {
        if let Some(i) = points.iter().position(|p| !p.iter().all(|c| c.is_finite())) {
            return Err(Error::InvalidCloud(format!("point {i} has a non-finite coordinate")));
        }
        if let Some(f) = &features {
            if f.len() != points.len() {
                return Err(Error::InvalidCloud(format!(
                    "{} feature rows for {} points",
                    f.len(),
                    points.len()
                )));
            }
        }
        Ok(Self { points, features })
    }

    pub fn from_slice(points: &[[f64; 3]]) -> Result<Self> {
        Self::new(points.iter().map(|p| Vector3::from(*p)).collect())
    }

    pub fn points(&self) -> &[Vector3<f64>] {
        &self.points
    }

    pub fn point(&self, i: usize) -> &Vector3<f64> {
        &self.points[i]
    }

    pub fn features(&self) -> Option<&Features> {
        self.features.as_ref()
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// Replaces the feature block, checking the row count.
    pub fn set_features(&mut self, features: Option<Features>) -> Result<()> {
        if let Some(f) = &features {
            if f.len() != self.points.len() {
                return Err(Error::InvalidCloud(format!(
                    "{} feature rows for {} points",
                    f.len(),
                    self.points.len()
                )));
            }
        }
        self.features = features;
        Ok(())
    }

    /// Sub-cloud made of the given point indices, in that order.
    pub fn select(&self, indices: &[usize]) -> Self {
        Self {
            points: indices.iter().map(|&i| self.points[i]).collect(),
            features: self.features.as_ref().map(|f| f.select(indices)),
        }
    }

    pub fn centroid(&self) -> Option<Vector3<f64>> {
        if self.points.is_empty() {
            return None;
        }
        let sum: Vector3<f64> = self.points.iter().sum();
        Some(sum / self.points.len() as f64)
    }
}

/// A proper rigid motion `p ↦ R·p + t`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RigidTransform {
    rotation: Matrix3<f64>,
    translation: Vector3<f64>,
}

impl Default for RigidTransform {
    fn default() -> Self {
        Self::identity()
    }
}

impl RigidTransform {
    pub fn identity() -> Self {
        Self {
            rotation: Matrix3::identity(),
            translation: Vector3::zeros(),
        }
    }

    /// Validates that `rotation` lies in SO(3) within [`ROTATION_TOLERANCE`].
    pub fn new(rotation: Matrix3<f64>, translation: Vector3<f64>) -> Result<Self> {
        if !is_rotation(&rotation, ROTATION_TOLERANCE) || !translation.iter().all(|v| v.is_finite())
        {
            return Err(Error::NotARotation);
        }
        Ok(Self {
            rotation,
            translation,
        })
    }

    /// Projects `rotation` onto SO(3) (polar factor) before building the transform.
    pub fn from_approximate(rotation: Matrix3<f64>, translation: Vector3<f64>) -> Result<Self> {
        let rotation = nearest_rotation(&rotation).ok_or(Error::NotARotation)?;
        Self::new(rotation, translation)
    }

    pub fn from_axis_angle(axis: Vector3<f64>, angle: f64, translation: Vector3<f64>) -> Self {
        let rotation = match Unit::try_new(axis, 1e-15) {
            Some(axis) => *Rotation3::from_axis_angle(&axis, angle).matrix(),
            None => Matrix3::identity(),
        };
        Self {
            rotation,
            translation,
        }
    }

    pub fn from_translation(translation: Vector3<f64>) -> Self {
        Self {
            rotation: Matrix3::identity(),
            translation,
        }
    }

    /// Rotation by `angle` radians about the z axis.
    pub fn rot_z(angle: f64) -> Self {
        Self::from_axis_angle(Vector3::z(), angle, Vector3::zeros())
    }

    pub fn rotation(&self) -> &Matrix3<f64> {
        &self.rotation
    }

    pub fn translation(&self) -> &Vector3<f64> {
        &self.translation
    }

    pub fn apply_point(&self, p: &Vector3<f64>) -> Vector3<f64> {
        self.rotation * p + self.translation
    }

    pub fn inverse(&self) -> Self {
        let rt = self.rotation.transpose();
        Self {
            rotation: rt,
            translation: -(rt * self.translation),
        }
    }

    /// `self ∘ other`: applies `other` first.
    pub fn compose(&self, other: &RigidTransform) -> Self {
        let mut rotation = self.rotation * other.rotation;
        if !is_rotation(&rotation, ROTATION_TOLERANCE) {
            rotation = nearest_rotation(&rotation).unwrap_or(rotation);
        }
        Self {
            rotation,
            translation: self.rotation * other.translation + self.translation,
        }
    }

    /// Row-major rotation entries.
    pub fn rotation_row_major(&self) -> [f64; 9] {
        let r = &self.rotation;
        [
            r[(0, 0)],
            r[(0, 1)],
            r[(0, 2)],
            r[(1, 0)],
            r[(1, 1)],
            r[(1, 2)],
            r[(2, 0)],
            r[(2, 1)],
            r[(2, 2)],
        ]
    }
}

pub fn is_rotation(r: &Matrix3<f64>, tol: f64) -> bool {
    if !r.iter().all(|v| v.is_finite()) {
        return false;
    }
    let gram = r.transpose() * r - Matrix3::identity();
    gram.amax() <= tol && (r.determinant() - 1.0).abs() <= tol
}

/// Nearest orthogonal matrix with the determinant of `m` forced to +1.
pub fn nearest_rotation(m: &Matrix3<f64>) -> Option<Matrix3<f64>> {
    if !m.iter().all(|v| v.is_finite()) {
        return None;
    }
    let svd = m.svd(true, true);
    let u = svd.u?;
    let v_t = svd.v_t?;
    let mut s = Matrix3::identity();
    if (u * v_t).determinant() < 0.0 {
        // smallest singular value is last after nalgebra's sort
        s[(2, 2)] = -1.0;
    }
    Some(u * s * v_t)
}

/// Applies `transform` to every point. Features are copied unchanged.
pub fn apply_transform(transform: &RigidTransform, cloud: &PointCloud) -> PointCloud {
    PointCloud {
        points: cloud
            .points
            .iter()
            .map(|p| transform.apply_point(p))
            .collect(),
        features: cloud.features.clone(),
    }
}

pub fn compose(first: &RigidTransform, second: &RigidTransform) -> RigidTransform {
    first.compose(second)
}

/// Integer voxel coordinates of `p` on a grid anchored at the origin.
pub fn voxel_key(p: &Vector3<f64>, voxel_size: f64) -> [i64; 3] {
    [
        (p.x / voxel_size).floor() as i64,
        (p.y / voxel_size).floor() as i64,
        (p.z / voxel_size).floor() as i64,
    ]
}

/// Keeps one original point per occupied voxel, drawn uniformly within the
/// voxel from a generator seeded with `seed`. Retained points keep their
/// original relative order.
///
/// Cells are visited in key order and their members in coordinate order, so
/// the selected point set does not depend on the input order.
pub fn voxel_downsample(cloud: &PointCloud, voxel_size: f64, seed: u64) -> Result<PointCloud> {
    if cloud.is_empty() {
        return Err(Error::EmptyCloud);
    }
    if !(voxel_size > 0.0) || !voxel_size.is_finite() {
        return Err(Error::InvalidParameter(format!(
            "voxel_size must be positive, got {voxel_size}"
        )));
    }

    let mut cells: BTreeMap<[i64; 3], Vec<usize>> = BTreeMap::new();
    for (i, p) in cloud.points.iter().enumerate() {
        cells.entry(voxel_key(p, voxel_size)).or_default().push(i);
    }

    let lexicographic = |a: &usize, b: &usize| {
        let (p, q) = (&cloud.points[*a], &cloud.points[*b]);
        p.x.total_cmp(&q.x)
            .then(p.y.total_cmp(&q.y))
            .then(p.z.total_cmp(&q.z))
            .then(a.cmp(b))
    };
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut kept: Vec<usize> = cells
        .into_values()
        .map(|mut members| {
            if members.len() == 1 {
                members[0]
            } else {
                members.sort_unstable_by(lexicographic);
                members[rng.random_range(0..members.len())]
            }
        })
        .collect();
    kept.sort_unstable();
    Ok(cloud.select(&kept))
}
