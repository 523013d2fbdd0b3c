//! File formats: PLY clouds, weight files, configuration, poses, suites and reports.

pub mod config;
pub mod ply;
pub mod pose;
pub mod report;
pub mod suite;
pub mod weights;

pub use config::{parse_config, read_config, ConfigFile};
pub use ply::{read_ply, write_ply, PlyFormat};
pub use pose::{read_pose, write_pose, PoseRecord};
pub use report::{write_curves, write_report};
pub use suite::{read_suite, Suite};
pub use weights::{read_weight_file, write_weight_file, WeightFile};
