//! Robust pose refinement over the continuous 6D rotation representation.
//!
//! The pose is parameterised by `(a₁, a₂, t)`. `a₁, a₂` map to a rotation
//! by Gram–Schmidt: `b₁ = a₁/‖a₁‖`, `b₂ = N(a₂ − (b₁·a₂)b₁)`, `b₃ = b₁ × b₂`.
//! The energy is `Σ φ(w_k) · huber_δ(‖y_k − (R x_k + t)‖)`, minimised by
//! gradient descent with step-halving backtracking, so recorded energies
//! never increase.

use nalgebra::{Matrix3, Vector3};
use serde::Serialize;

use crate::correspondence::{CorrespondenceSet, WeightVector};
use crate::error::{Error, Result};
use crate::geometry::{is_rotation, PointCloud, RigidTransform, ROTATION_TOLERANCE};
use crate::procrustes::prefilter;

const MIN_ORTHOGONAL_NORM: f64 = 1e-12;
const MAX_HALVINGS: usize = 60;
const MAX_STEP_GROWTH: f64 = 1024.0;

/// Two 3-vectors spanning the first two rotation columns.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Rot6D {
    pub a1: Vector3<f64>,
    pub a2: Vector3<f64>,
}

impl Rot6D {
    pub fn new(a1: Vector3<f64>, a2: Vector3<f64>) -> Self {
        Self { a1, a2 }
    }

    pub fn to_matrix(&self) -> Result<Matrix3<f64>> {
        rot6d_to_matrix(self)
    }

    fn to_array(self) -> [f64; 6] {
        [
            self.a1.x, self.a1.y, self.a1.z, self.a2.x, self.a2.y, self.a2.z,
        ]
    }
}

pub fn rot6d_to_matrix(a: &Rot6D) -> Result<Matrix3<f64>> {
    let n1 = a.a1.norm();
    if !(n1 > 0.0) || !n1.is_finite() {
        return Err(Error::DegenerateRepresentation);
    }
    let b1 = a.a1 / n1;
    let u = a.a2 - b1.dot(&a.a2) * b1;
    let nu = u.norm();
    if !(nu > MIN_ORTHOGONAL_NORM) || !nu.is_finite() {
        return Err(Error::DegenerateRepresentation);
    }
    let b2 = u / nu;
    let b3 = b1.cross(&b2);
    Ok(Matrix3::from_columns(&[b1, b2, b3]))
}

/// First two columns of `r`.
pub fn matrix_to_rot6d(r: &Matrix3<f64>) -> Result<Rot6D> {
    if !is_rotation(r, ROTATION_TOLERANCE) {
        return Err(Error::NotARotation);
    }
    Ok(Rot6D {
        a1: r.column(0).into_owned(),
        a2: r.column(1).into_owned(),
    })
}

/// Backpropagates `g = ∂E/∂R` through the Gram–Schmidt map to `(∂E/∂a₁, ∂E/∂a₂)`.
fn rot6d_backward(a: &Rot6D, g: &Matrix3<f64>) -> (Vector3<f64>, Vector3<f64>) {
    let n1 = a.a1.norm();
    let b1 = a.a1 / n1;
    let proj = b1.dot(&a.a2);
    let u = a.a2 - proj * b1;
    let nu = u.norm();
    let b2 = u / nu;

    let g1: Vector3<f64> = g.column(0).into_owned();
    let g2: Vector3<f64> = g.column(1).into_owned();
    let g3: Vector3<f64> = g.column(2).into_owned();

    // b3 = b1 × b2
    let mut gb1 = g1 + b2.cross(&g3);
    let gb2 = g2 + g3.cross(&b1);
    // b2 = u / ‖u‖
    let gu = (gb2 - b2 * b2.dot(&gb2)) / nu;
    // u = a2 − (b1·a2) b1
    let ga2 = gu - b1 * b1.dot(&gu);
    gb1 -= gu * proj + a.a2 * b1.dot(&gu);
    // b1 = a1 / ‖a1‖
    let ga1 = (gb1 - b1 * b1.dot(&gb1)) / n1;
    (ga1, ga2)
}

pub fn huber(r: f64, delta: f64) -> f64 {
    if r <= delta {
        0.5 * r * r
    } else {
        delta * (r - 0.5 * delta)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RefineConfig {
    pub prefilter_tau: f64,
    pub huber_delta: f64,
    pub max_iters: usize,
    pub step_size: f64,
    /// Stop when the relative energy decrease or the relative parameter step
    /// falls below this value.
    pub convergence_tol: f64,
}

impl Default for RefineConfig {
    fn default() -> Self {
        Self {
            prefilter_tau: 0.4,
            huber_delta: 0.05,
            max_iters: 200,
            step_size: 0.1,
            convergence_tol: 1e-8,
        }
    }
}

impl RefineConfig {
    pub fn validate(&self) -> Result<()> {
        let positive = |name: &str, v: f64| {
            if v > 0.0 && v.is_finite() {
                Ok(())
            } else {
                Err(Error::InvalidParameter(format!("{name} must be positive, got {v}")))
            }
        };
        positive("huber_delta", self.huber_delta)?;
        positive("step_size", self.step_size)?;
        positive("convergence_tol", self.convergence_tol)?;
        if !(0.0..1.0).contains(&self.prefilter_tau) {
            return Err(Error::InvalidParameter(format!(
                "prefilter_tau must lie in [0, 1), got {}",
                self.prefilter_tau
            )));
        }
        if self.max_iters == 0 {
            return Err(Error::InvalidParameter("max_iters must be >= 1".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Termination {
    Converged,
    MaxIterations,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RefineTrace {
    /// Energy of the initial pose followed by one entry per accepted step.
    pub energies: Vec<f64>,
    pub iterations: usize,
    pub termination: Termination,
}

/// Correspondences that survive the prefilter, with their `φ(w)`.
struct ActiveSet {
    source: Vec<Vector3<f64>>,
    target: Vec<Vector3<f64>>,
    weight: Vec<f64>,
}

impl ActiveSet {
    fn collect(
        matches: &CorrespondenceSet,
        source: &PointCloud,
        target: &PointCloud,
        weights: &WeightVector,
        tau: f64,
    ) -> Result<Self> {
        if weights.len() != matches.len() {
            return Err(Error::WeightLengthMismatch {
                expected: matches.len(),
                found: weights.len(),
            });
        }
        matches.check_against(source, target)?;
        let phi = prefilter(weights.as_slice(), tau);
        let mut set = ActiveSet {
            source: Vec::new(),
            target: Vec::new(),
            weight: Vec::new(),
        };
        for (&(i, j), w) in matches.pairs().iter().zip(phi) {
            if w > 0.0 {
                set.source.push(*source.point(i));
                set.target.push(*target.point(j));
                set.weight.push(w);
            }
        }
        Ok(set)
    }

    fn energy(&self, r: &Matrix3<f64>, t: &Vector3<f64>, delta: f64) -> f64 {
        self.source
            .iter()
            .zip(&self.target)
            .zip(&self.weight)
            .map(|((x, y), w)| w * huber((y - (r * x + t)).norm(), delta))
            .sum()
    }

    /// Energy and gradient with respect to `(a₁, a₂, t)`.
    fn energy_and_gradient(&self, a: &Rot6D, t: &Vector3<f64>, delta: f64) -> Result<(f64, [f64; 9])> {
        let r = rot6d_to_matrix(a)?;
        let mut e = 0.0;
        let mut g_r = Matrix3::zeros();
        let mut g_t = Vector3::zeros();
        for ((x, y), w) in self.source.iter().zip(&self.target).zip(&self.weight) {
            let res = y - (r * x + t);
            let n = res.norm();
            e += w * huber(n, delta);
            // d huber / d res, with the quadratic branch at the kink
            let dres = if n <= delta { res } else { res * (delta / n) };
            g_t -= *w * dres;
            g_r -= *w * dres * x.transpose();
        }
        let (ga1, ga2) = rot6d_backward(a, &g_r);
        Ok((
            e,
            [
                ga1.x, ga1.y, ga1.z, ga2.x, ga2.y, ga2.z, g_t.x, g_t.y, g_t.z,
            ],
        ))
    }
}

fn unpack(theta: &[f64; 9]) -> (Rot6D, Vector3<f64>) {
    (
        Rot6D::new(
            Vector3::new(theta[0], theta[1], theta[2]),
            Vector3::new(theta[3], theta[4], theta[5]),
        ),
        Vector3::new(theta[6], theta[7], theta[8]),
    )
}

/// `Σ φ(w_k) · huber_δ(‖y_j − (R x_i + t)‖)` with `R = f(a)`.
pub fn energy(
    a: &Rot6D,
    t: &Vector3<f64>,
    matches: &CorrespondenceSet,
    source: &PointCloud,
    target: &PointCloud,
    weights: &WeightVector,
    cfg: &RefineConfig,
) -> Result<f64> {
    let set = ActiveSet::collect(matches, source, target, weights, cfg.prefilter_tau)?;
    Ok(set.energy(&rot6d_to_matrix(a)?, t, cfg.huber_delta))
}

/// Analytic gradient of [`energy`] over `(a₁, a₂, t)`, returned with the energy.
pub fn energy_gradient(
    a: &Rot6D,
    t: &Vector3<f64>,
    matches: &CorrespondenceSet,
    source: &PointCloud,
    target: &PointCloud,
    weights: &WeightVector,
    cfg: &RefineConfig,
) -> Result<(f64, [f64; 9])> {
    let set = ActiveSet::collect(matches, source, target, weights, cfg.prefilter_tau)?;
    set.energy_and_gradient(a, t, cfg.huber_delta)
}

/// Refines `init` against the fixed, weighted correspondences.
///
/// The problem is expressed in a frame centred on the weighted source
/// centroid (a rigid change of coordinates that leaves every residual
/// unchanged) so rotation and translation steps are decoupled.
pub fn refine(
    init: &RigidTransform,
    matches: &CorrespondenceSet,
    source: &PointCloud,
    target: &PointCloud,
    weights: &WeightVector,
    cfg: &RefineConfig,
) -> Result<(RigidTransform, RefineTrace)> {
    cfg.validate()?;
    let mut set = ActiveSet::collect(matches, source, target, weights, cfg.prefilter_tau)?;
    if set.weight.is_empty() {
        return Err(Error::NoActiveCorrespondences);
    }
    let weight_sum: f64 = set.weight.iter().sum();
    let center: Vector3<f64> = set
        .source
        .iter()
        .zip(&set.weight)
        .map(|(x, w)| x * *w)
        .sum::<Vector3<f64>>()
        / weight_sum;
    set.source.iter_mut().for_each(|x| *x -= center);
    set.target.iter_mut().for_each(|y| *y -= center);

    // R(x − c) + t_c = R x + t − c  ⇒  t_c = t + R c − c
    let r0 = init.rotation();
    let a = matrix_to_rot6d(r0)?;
    let t_c = init.translation() + r0 * center - center;
    let mut theta = [0.0; 9];
    theta[..6].copy_from_slice(&a.to_array());
    theta[6..].copy_from_slice(t_c.as_slice());

    let delta = cfg.huber_delta;
    let (mut e, mut grad) = set.energy_and_gradient(&a, &t_c, delta)?;
    let mut trace = RefineTrace {
        energies: vec![e],
        iterations: 0,
        termination: Termination::MaxIterations,
    };
    let mut eta = cfg.step_size;

    for iter in 1..=cfg.max_iters {
        trace.iterations = iter;
        if e == 0.0 || grad.iter().all(|g| *g == 0.0) {
            trace.termination = Termination::Converged;
            break;
        }

        let mut accepted = None;
        for _ in 0..MAX_HALVINGS {
            let scale = eta / weight_sum;
            let mut cand = theta;
            cand.iter_mut().zip(&grad).for_each(|(p, g)| *p -= scale * g);
            let (ca, ct) = unpack(&cand);
            if let Ok(r) = rot6d_to_matrix(&ca) {
                let ce = set.energy(&r, &ct, delta);
                if ce <= e {
                    accepted = Some((cand, ce));
                    break;
                }
            }
            eta *= 0.5;
        }
        let Some((cand, ce)) = accepted else {
            trace.termination = Termination::Converged;
            break;
        };

        let step: f64 = cand.iter().zip(&theta).map(|(a, b)| (a - b) * (a - b)).sum::<f64>().sqrt();
        let size: f64 = theta.iter().map(|v| v * v).sum::<f64>().sqrt();
        let decrease = (e - ce) / e;
        theta = cand;
        trace.energies.push(ce);

        let (ca, ct) = unpack(&theta);
        let (ne, ng) = set.energy_and_gradient(&ca, &ct, delta)?;
        e = ne;
        grad = ng;
        if decrease < cfg.convergence_tol || step < cfg.convergence_tol * (1.0 + size) {
            trace.termination = Termination::Converged;
            break;
        }
        eta = (eta * 2.0).min(cfg.step_size * MAX_STEP_GROWTH);
    }

    let (a, t_c) = unpack(&theta);
    let rotation = rot6d_to_matrix(&a)?;
    let translation = t_c - rotation * center + center;
    Ok((RigidTransform::new(rotation, translation)?, trace))
}
