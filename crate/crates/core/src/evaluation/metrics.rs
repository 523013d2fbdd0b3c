use nalgebra::{Matrix3, Vector3};
use serde::{Deserialize, Serialize};

/// Geodesic angle `arccos((tr(R̂ᵀR*) − 1)/2)` in radians, in `[0, π]`.
pub fn rotation_error(r_hat: &Matrix3<f64>, r_star: &Matrix3<f64>) -> f64 {
    let c = (((r_hat.transpose() * r_star).trace() - 1.0) / 2.0).clamp(-1.0, 1.0);
    c.acos()
}

/// `∂/∂R̂` of [`rotation_error`]. Zero where the angle is 0 or π (non-smooth).
pub fn rotation_loss_gradient(r_hat: &Matrix3<f64>, r_star: &Matrix3<f64>) -> Matrix3<f64> {
    let c = ((r_hat.transpose() * r_star).trace() - 1.0) / 2.0;
    let s = 1.0 - c * c;
    if s <= 0.0 {
        return Matrix3::zeros();
    }
    r_star * (-0.5 / s.sqrt())
}

/// Euclidean distance `‖t̂ − t*‖₂` in meters.
pub fn translation_error(t_hat: &Vector3<f64>, t_star: &Vector3<f64>) -> f64 {
    (t_hat - t_star).norm()
}

/// Squared form `‖t̂ − t*‖²₂`, used as a training loss.
pub fn translation_loss(t_hat: &Vector3<f64>, t_star: &Vector3<f64>) -> f64 {
    (t_hat - t_star).norm_squared()
}

pub fn translation_loss_gradient(t_hat: &Vector3<f64>, t_star: &Vector3<f64>) -> Vector3<f64> {
    2.0 * (t_hat - t_star)
}

/// Success thresholds on rotation (degrees) and translation (meters).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SuccessThresholds {
    pub re_deg: f64,
    pub te_m: f64,
}

impl SuccessThresholds {
    /// Indoor scans: 15° and 30 cm.
    pub const INDOOR: Self = Self {
        re_deg: 15.0,
        te_m: 0.3,
    };

    /// Outdoor lidar: 5° and 60 cm.
    pub const OUTDOOR: Self = Self {
        re_deg: 5.0,
        te_m: 0.6,
    };

    pub fn accepts(&self, re_rad: f64, te_m: f64) -> bool {
        re_rad.to_degrees() < self.re_deg && te_m < self.te_m
    }
}

impl Default for SuccessThresholds {
    fn default() -> Self {
        Self::INDOOR
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PairMetrics {
    /// Rotation error in radians.
    pub re: f64,
    /// Translation error in meters.
    pub te: f64,
    pub success: bool,
}

impl PairMetrics {
    pub fn evaluate(
        estimate: &crate::geometry::RigidTransform,
        ground_truth: &crate::geometry::RigidTransform,
        thresholds: &SuccessThresholds,
    ) -> Self {
        let re = rotation_error(estimate.rotation(), ground_truth.rotation());
        let te = translation_error(estimate.translation(), ground_truth.translation());
        Self {
            re,
            te,
            success: thresholds.accepts(re, te),
        }
    }

    pub fn re_deg(&self) -> f64 {
        self.re.to_degrees()
    }
}
