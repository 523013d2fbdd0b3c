//! Global rigid registration of point clouds.
//!
//! The main path matches points in feature space, weighs each putative
//! correspondence, fits a pose in closed form with weighted Procrustes and
//! polishes it by robust gradient descent on SE(3). When too little weight
//! survives the prefilter, a RANSAC estimator takes over.
//!
//! ```
//! use globreg::features::{Descriptor, FeatureConfig};
//! use globreg::geometry::{apply_transform, Features};
//! use globreg::{register, PipelineConfig, PointCloud, RigidTransform, WeightProvider};
//! use nalgebra::Vector3;
//!
//! // a small cloud whose points carry distinct descriptors
//! let pts: Vec<_> = (0..200)
//!     .map(|i| {
//!         let f = i as f64;
//!         Vector3::new((f * 0.37).sin() * 2.0, (f * 0.11).cos() * 2.0, (f * 0.05).sin())
//!     })
//!     .collect();
//! let desc: Vec<[f64; 3]> = (0..200).map(|i| [(i as f64 * 0.03).cos(), (i as f64 * 0.03).sin(), 1.0]).collect();
//! let source = PointCloud::with_features(pts, Some(Features::from_rows(&desc).unwrap())).unwrap();
//!
//! let truth = RigidTransform::from_axis_angle(Vector3::z(), 0.8, Vector3::new(0.3, -0.2, 0.1));
//! let target = apply_transform(&truth, &source);
//!
//! let cfg = PipelineConfig {
//!     feature: FeatureConfig { descriptor: Descriptor::Precomputed },
//!     weighter: WeightProvider::Uniform,
//!     voxel_size: 1e-3,
//!     ..PipelineConfig::indoor()
//! };
//! let result = register(&source, &target, &cfg).unwrap();
//! assert!((result.transform.translation() - truth.translation()).norm() < 1e-6);
//! ```

// `!(x > 0.0)` is used on purpose so NaN parameters are rejected
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod correspondence;
pub mod error;
pub mod evaluation;
pub mod features;
pub mod geometry;
pub mod index;
pub mod io;
pub mod pipeline;
pub mod procrustes;
pub mod ransac;
pub mod refine;

pub use correspondence::{CorrespondenceSet, WeightProvider, WeightVector};
pub use error::{Error, Result};
pub use geometry::{PointCloud, RigidTransform};
pub use pipeline::{register, register_with_correspondences, Branch, PipelineConfig, RegistrationResult};
