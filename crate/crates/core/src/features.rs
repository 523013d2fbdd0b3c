//! Built-in point descriptors.
//!
//! `LocalHistogram` summarises the neighborhood of each point with two
//! histograms of `bins` slots each:
//!
//! 1. neighbor distances, binned uniformly over `[0, radius]`;
//! 2. `|cos θ|` between each neighbor offset and the local surface normal
//!    (smallest principal axis of the neighborhood), binned over `[0, 1]`.
//!
//! Each histogram is divided by the neighbor count, the two are concatenated
//! and the result is L2-normalised, giving [`local_histogram_dim`]`(bins) =
//! 2 · bins` entries. Only relative geometry enters, so the descriptor is
//! invariant to rigid motion of the whole cloud. A point without neighbors
//! gets the constant unit vector.

use nalgebra::{Matrix3, SymmetricEigen, Vector3};
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::geometry::{Features, PointCloud};
use crate::index::{IndexSpace, SpatialIndex};

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Descriptor {
    /// Normalised point coordinates. Only meaningful without rotation.
    RawXyz,
    LocalHistogram { radius: f64, bins: usize },
    /// Use the features already attached to the cloud.
    Precomputed,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FeatureConfig {
    pub descriptor: Descriptor,
}

impl Default for FeatureConfig {
    fn default() -> Self {
        Self {
            descriptor: Descriptor::LocalHistogram {
                radius: 0.25,
                bins: 8,
            },
        }
    }
}

impl FeatureConfig {
    pub fn validate(&self) -> Result<()> {
        if let Descriptor::LocalHistogram { radius, bins } = self.descriptor {
            if !(radius > 0.0) || !radius.is_finite() {
                return Err(Error::InvalidParameter(format!(
                    "feature radius must be positive, got {radius}"
                )));
            }
            if bins < 2 {
                return Err(Error::InvalidParameter(format!(
                    "feature bins must be >= 2, got {bins}"
                )));
            }
        }
        Ok(())
    }
}

pub fn local_histogram_dim(bins: usize) -> usize {
    2 * bins
}

/// Returns a copy of `cloud` with unit-norm features attached.
pub fn compute_features(cloud: &PointCloud, cfg: &FeatureConfig) -> Result<PointCloud> {
    if cloud.is_empty() {
        return Err(Error::EmptyCloud);
    }
    cfg.validate()?;
    let features = match cfg.descriptor {
        Descriptor::Precomputed => {
            let f = cloud.features().ok_or(Error::MissingFeatures)?;
            let rows: Vec<Vec<f64>> = (0..f.len()).map(|i| normalized(f.row(i).to_vec())).collect();
            Features::from_rows(&rows)?
        }
        Descriptor::RawXyz => {
            let rows: Vec<Vec<f64>> = cloud
                .points()
                .iter()
                .map(|p| normalized(vec![p.x, p.y, p.z]))
                .collect();
            Features::from_rows(&rows)?
        }
        Descriptor::LocalHistogram { radius, bins } => local_histograms(cloud, radius, bins)?,
    };
    let mut out = cloud.clone();
    out.set_features(Some(features))?;
    Ok(out)
}

fn normalized(mut v: Vec<f64>) -> Vec<f64> {
    let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
    if norm > 0.0 {
        v.iter_mut().for_each(|x| *x /= norm);
    } else {
        let c = 1.0 / (v.len() as f64).sqrt();
        v.iter_mut().for_each(|x| *x = c);
    }
    v
}

fn local_histograms(cloud: &PointCloud, radius: f64, bins: usize) -> Result<Features> {
    let index = SpatialIndex::build(cloud, IndexSpace::Coordinates)?;
    let points = cloud.points();
    let rows: Vec<Vec<f64>> = (0..points.len())
        .into_par_iter()
        .map(|i| {
            let p = points[i];
            let neighbors: Vec<usize> = index
                .within_radius(&[p.x, p.y, p.z], radius)
                .into_iter()
                .filter(|&j| j != i)
                .collect();
            histogram(&p, &neighbors, points, radius, bins)
        })
        .collect();
    Features::from_rows(&rows)
}

fn histogram(
    p: &Vector3<f64>,
    neighbors: &[usize],
    points: &[Vector3<f64>],
    radius: f64,
    bins: usize,
) -> Vec<f64> {
    let mut h = vec![0.0; local_histogram_dim(bins)];
    if neighbors.is_empty() {
        return normalized(h);
    }

    let offsets: Vec<Vector3<f64>> = neighbors.iter().map(|&j| points[j] - p).collect();
    let normal = local_normal(&offsets);
    let slot = |v: f64| ((v * bins as f64) as usize).min(bins - 1);
    let weight = 1.0 / offsets.len() as f64;

    for d in &offsets {
        let dist = d.norm();
        h[slot(dist / radius)] += weight;
        if let (Some(n), true) = (normal, dist > 0.0) {
            let cos = (d.dot(&n) / dist).abs().min(1.0);
            h[bins + slot(cos)] += weight;
        }
    }
    normalized(h)
}

/// Smallest principal axis of the offsets (plus the center itself), if the
/// neighborhood spans at least a plane.
fn local_normal(offsets: &[Vector3<f64>]) -> Option<Vector3<f64>> {
    if offsets.len() < 2 {
        return None;
    }
    let count = (offsets.len() + 1) as f64;
    let mean: Vector3<f64> = offsets.iter().sum::<Vector3<f64>>() / count;
    let mut cov = mean * mean.transpose();
    for d in offsets {
        let c = d - mean;
        cov += c * c.transpose();
    }
    let cov: Matrix3<f64> = cov / count;
    let eig = SymmetricEigen::new(cov);
    let vals = eig.eigenvalues;
    let mut order = [0usize, 1, 2];
    order.sort_by(|&a, &b| vals[a].total_cmp(&vals[b]));
    let [smallest, middle, largest] = order;
    if vals[middle] <= 1e-12 * vals[largest].max(f64::MIN_POSITIVE) {
        return None;
    }
    Some(eig.eigenvectors.column(smallest).into_owned())
}
