//! Closed-form weighted rigid alignment and its derivative with respect to
//! the correspondence weights.
//!
//! Given matched points `x_k ↔ y_k` and normalised weights `w̃` (non-negative,
//! summing to one), the minimiser of `Σ w̃_k ‖y_k − (R x_k + t)‖²` is
//!
//! ```text
//! x̄ = Σ w̃_k x_k,   ȳ = Σ w̃_k y_k
//! Σ_xy = Σ w̃_k (y_k − ȳ)(x_k − x̄)ᵀ = U Σ Vᵀ
//! R̂ = U · diag(1, 1, det(U)·det(V)) · Vᵀ,   t̂ = ȳ − R̂ x̄
//! ```
//!
//! In matrix form the centring is `Y √W K √W Xᵀ` with `K = I − √w̃ √w̃ᵀ`,
//! which equals `Y K W K Xᵀ` whenever the surviving weights are equal.

use nalgebra::{Matrix3, Vector3};

use crate::correspondence::WeightVector;
use crate::error::{Error, Result};
use crate::geometry::RigidTransform;

/// `σ₂ ≤ DEGENERACY_RATIO · max(1, σ₁)` means rotation is underdetermined.
pub const DEGENERACY_RATIO: f64 = 1e-12;

/// Minimum relative gap between singular values for [`grad_weights`].
pub const GRADIENT_GAP_RATIO: f64 = 1e-6;

/// `φ(w) = I[w > τ]·w`, elementwise.
pub fn prefilter(weights: &[f64], tau: f64) -> Vec<f64> {
    weights
        .iter()
        .map(|&w| if w > tau { w } else { 0.0 })
        .collect()
}

/// `w̃ = φ(w) / ‖φ(w)‖₁`.
#[derive(Debug, Clone, PartialEq)]
pub struct NormalizedWeights {
    w_tilde: Vec<f64>,
    prefilter_tau: f64,
    filtered_sum: f64,
}

impl NormalizedWeights {
    /// Equal weights `1/n`.
    pub fn uniform(n: usize) -> Result<Self> {
        if n == 0 {
            return Err(Error::AllWeightsFiltered);
        }
        Ok(Self {
            w_tilde: vec![1.0 / n as f64; n],
            prefilter_tau: 0.0,
            filtered_sum: n as f64,
        })
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.w_tilde
    }

    pub fn len(&self) -> usize {
        self.w_tilde.len()
    }

    pub fn is_empty(&self) -> bool {
        self.w_tilde.is_empty()
    }

    pub fn prefilter_tau(&self) -> f64 {
        self.prefilter_tau
    }

    /// `‖φ(w)‖₁` before normalisation.
    pub fn filtered_sum(&self) -> f64 {
        self.filtered_sum
    }

    pub fn active_count(&self) -> usize {
        self.w_tilde.iter().filter(|&&w| w > 0.0).count()
    }
}

pub fn normalize_weights(weights: &WeightVector, tau: f64) -> Result<NormalizedWeights> {
    if !(0.0..1.0).contains(&tau) {
        return Err(Error::InvalidParameter(format!(
            "prefilter tau must lie in [0, 1), got {tau}"
        )));
    }
    let filtered = prefilter(weights.as_slice(), tau);
    let sum: f64 = filtered.iter().sum();
    if !(sum > 0.0) {
        return Err(Error::AllWeightsFiltered);
    }
    Ok(NormalizedWeights {
        w_tilde: filtered.iter().map(|w| w / sum).collect(),
        prefilter_tau: tau,
        filtered_sum: sum,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct ProcrustesSolution {
    pub transform: RigidTransform,
    /// Weighted squared error at the optimum.
    pub residual: f64,
    pub cross_covariance: Matrix3<f64>,
    /// Descending singular values of the cross-covariance.
    pub singular_values: Vector3<f64>,
    pub u: Matrix3<f64>,
    pub v: Matrix3<f64>,
    /// True when `det(U)·det(V) = −1` and the last axis was flipped.
    pub reflection_corrected: bool,
    pub source_centroid: Vector3<f64>,
    pub target_centroid: Vector3<f64>,
}

/// `Σ w̃_k ‖y_k − (R x_k + t)‖²`.
pub fn weighted_residual(
    transform: &RigidTransform,
    source: &[Vector3<f64>],
    target: &[Vector3<f64>],
    weights: &[f64],
) -> f64 {
    source
        .iter()
        .zip(target)
        .zip(weights)
        .filter(|(_, &w)| w > 0.0)
        .map(|((x, y), &w)| w * (y - transform.apply_point(x)).norm_squared())
        .sum()
}

fn check_lengths(source: &[Vector3<f64>], target: &[Vector3<f64>], weights: &[f64]) -> Result<()> {
    if source.len() != target.len() {
        return Err(Error::LengthMismatch {
            left: source.len(),
            right: target.len(),
        });
    }
    if weights.len() != source.len() {
        return Err(Error::WeightLengthMismatch {
            expected: source.len(),
            found: weights.len(),
        });
    }
    Ok(())
}

fn weighted_centroids(
    source: &[Vector3<f64>],
    target: &[Vector3<f64>],
    weights: &[f64],
) -> (Vector3<f64>, Vector3<f64>) {
    let mut xm = Vector3::zeros();
    let mut ym = Vector3::zeros();
    for ((x, y), &w) in source.iter().zip(target).zip(weights) {
        if w > 0.0 {
            xm += w * x;
            ym += w * y;
        }
    }
    (xm, ym)
}

/// Weighted rigid fit of `target ≈ R·source + t`.
pub fn solve(
    source: &[Vector3<f64>],
    target: &[Vector3<f64>],
    weights: &NormalizedWeights,
) -> Result<ProcrustesSolution> {
    let w = weights.as_slice();
    check_lengths(source, target, w)?;
    let active = weights.active_count();
    if active < 3 {
        return Err(Error::TooFewCorrespondences { found: active });
    }

    let (xm, ym) = weighted_centroids(source, target, w);
    let mut cov = Matrix3::zeros();
    for ((x, y), &wk) in source.iter().zip(target).zip(w) {
        if wk > 0.0 {
            cov += wk * (y - ym) * (x - xm).transpose();
        }
    }

    let svd = cov.svd(true, true);
    let (u, v_t) = match (svd.u, svd.v_t) {
        (Some(u), Some(v_t)) => (u, v_t),
        _ => return Err(Error::DegenerateConfiguration),
    };
    let sigma = svd.singular_values;
    if !sigma.iter().all(|s| s.is_finite()) || sigma[1] <= DEGENERACY_RATIO * sigma[0].max(1.0) {
        return Err(Error::DegenerateConfiguration);
    }

    let reflection_corrected = u.determinant() * v_t.determinant() < 0.0;
    let mut s = Matrix3::identity();
    if reflection_corrected {
        s[(2, 2)] = -1.0;
    }
    let rotation = u * s * v_t;
    let translation = ym - rotation * xm;
    let transform = RigidTransform::new(rotation, translation)?;
    let residual = weighted_residual(&transform, source, target, w);

    Ok(ProcrustesSolution {
        transform,
        residual,
        cross_covariance: cov,
        singular_values: sigma,
        u,
        v: v_t.transpose(),
        reflection_corrected,
        source_centroid: xm,
        target_centroid: ym,
    })
}

/// Upstream derivatives `∂L/∂R̂` and `∂L/∂t̂` of a scalar loss.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PoseGradient {
    pub rotation: Matrix3<f64>,
    pub translation: Vector3<f64>,
}

/// `∂L/∂w` for the raw (pre-filter) weights.
///
/// The loss sees `R̂(w̃)` and `t̂(w̃, R̂) = ȳ − R̂x̄`; the rotation derivative
/// follows from differentiating `Σ_xy = R̂·P` with `P = V·S·Σ·Vᵀ` symmetric,
/// so `dR̂ = R̂Ω` where, in the basis of `V`, `Ω'_ij = A'_ij / (p_i + p_j)`
/// and `A = R̂ᵀ dΣ − dΣᵀ R̂`. Weights removed by the prefilter get zero.
pub fn grad_weights(
    solution: &ProcrustesSolution,
    source: &[Vector3<f64>],
    target: &[Vector3<f64>],
    weights: &NormalizedWeights,
    upstream: &PoseGradient,
) -> Result<Vec<f64>> {
    let w = weights.as_slice();
    check_lengths(source, target, w)?;

    let sigma = &solution.singular_values;
    let gap = (sigma[0] - sigma[1]).min(sigma[1] - sigma[2]).abs();
    if gap < GRADIENT_GAP_RATIO * sigma[0] {
        return Err(Error::NumericallyUnstableGradient { gap });
    }

    let r = solution.transform.rotation();
    let xm = &solution.source_centroid;
    let ym = &solution.target_centroid;
    let v = &solution.v;
    let sign = if solution.reflection_corrected { -1.0 } else { 1.0 };
    let p = [sigma[0], sigma[1], sign * sigma[2]];

    // total derivative w.r.t. R̂, including t̂ = ȳ − R̂x̄
    let g_r = upstream.rotation - upstream.translation * xm.transpose();
    let b = v.transpose() * (r.transpose() * g_r) * v;
    let mut c = Matrix3::zeros();
    for i in 0..3 {
        for j in 0..3 {
            if i != j {
                c[(i, j)] = b[(i, j)] / (p[i] + p[j]);
            }
        }
    }
    let c = v * c * v.transpose();
    let g_cov = r * (c - c.transpose());

    // ∂L/∂w̃_k, treating w̃ as free and Σ_xy = Σ w̃ y xᵀ − ȳx̄ᵀ
    let g_tilde: Vec<f64> = source
        .iter()
        .zip(target)
        .map(|(x, y)| {
            let direct = upstream.translation.dot(&(y - r * x));
            let through_cov = y.dot(&(g_cov * x)) - y.dot(&(g_cov * xm)) - ym.dot(&(g_cov * x));
            direct + through_cov
        })
        .collect();

    // back through w̃ = φ(w)/Σφ(w)
    let mean: f64 = g_tilde.iter().zip(w).map(|(g, wk)| g * wk).sum();
    let scale = 1.0 / weights.filtered_sum();
    Ok(g_tilde
        .iter()
        .zip(w)
        .map(|(g, &wk)| if wk > 0.0 { scale * (g - mean) } else { 0.0 })
        .collect())
}
