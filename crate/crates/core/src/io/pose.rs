//! Pose JSON documents.
//!
//! ```json
//! {
//!   "rotation": [9 numbers, row-major],
//!   "translation": [3 numbers],
//!   "branch": "weighted_procrustes_refined" | "safeguard",
//!   "inlier_fraction": 0.42
//! }
//! ```
//!
//! Numbers are written with 17 significant digits so doubles survive a
//! round trip. `branch` and `inlier_fraction` are optional on input.

use std::fs;
use std::path::Path;

use nalgebra::{Matrix3, Vector3};
use serde_json::Value;

use crate::error::{Error, Result};
use crate::geometry::{is_rotation, RigidTransform};

/// Orthonormality slack accepted when reading hand-written poses; the matrix
/// is then projected onto the nearest rotation.
pub const POSE_ROTATION_TOLERANCE: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq)]
pub struct PoseRecord {
    pub transform: RigidTransform,
    pub branch: Option<String>,
    pub inlier_fraction: Option<f64>,
}

impl PoseRecord {
    pub fn new(transform: RigidTransform) -> Self {
        Self {
            transform,
            branch: None,
            inlier_fraction: None,
        }
    }
}

fn number(v: f64) -> String {
    if v == 0.0 {
        // avoid "-0e0" and keep zero readable
        return "0.0".to_string();
    }
    format!("{v:.16e}")
}

pub fn encode_pose(record: &PoseRecord) -> String {
    let list = |vals: &[f64]| vals.iter().map(|&v| number(v)).collect::<Vec<_>>().join(", ");
    let t = record.transform.translation();
    let mut out = format!(
        "{{\n  \"rotation\": [{}],\n  \"translation\": [{}]",
        list(&record.transform.rotation_row_major()),
        list(&[t.x, t.y, t.z])
    );
    if let Some(branch) = &record.branch {
        out.push_str(&format!(",\n  \"branch\": {}", Value::String(branch.clone())));
    }
    if let Some(f) = record.inlier_fraction {
        out.push_str(&format!(",\n  \"inlier_fraction\": {}", number(f)));
    }
    out.push_str("\n}\n");
    out
}

pub fn write_pose(path: impl AsRef<Path>, record: &PoseRecord) -> Result<()> {
    let path = path.as_ref();
    fs::write(path, encode_pose(record)).map_err(|e| Error::io(path, e))
}

pub fn read_pose(path: impl AsRef<Path>) -> Result<PoseRecord> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_pose(&text, path)
}

pub fn parse_pose(text: &str, path: &Path) -> Result<PoseRecord> {
    let doc: Value = serde_json::from_str(text)
        .map_err(|e| Error::format(path, format!("line {} column {}", e.line(), e.column()), e.to_string()))?;
    let obj = doc
        .as_object()
        .ok_or_else(|| Error::format(path, "document", "expected a JSON object"))?;
    let numbers = |key: &str, len: usize| -> Result<Vec<f64>> {
        let arr = obj
            .get(key)
            .and_then(Value::as_array)
            .ok_or_else(|| Error::format(path, key, "missing or not an array"))?;
        if arr.len() != len {
            return Err(Error::format(path, key, format!("expected {len} numbers, found {}", arr.len())));
        }
        arr.iter()
            .enumerate()
            .map(|(k, v)| v.as_f64().ok_or_else(|| Error::format(path, format!("{key}[{k}]"), "not a number")))
            .collect()
    };
    let r = numbers("rotation", 9)?;
    let t = numbers("translation", 3)?;
    let rotation = Matrix3::from_row_slice(&r);
    if !is_rotation(&rotation, POSE_ROTATION_TOLERANCE) {
        return Err(Error::format(path, "rotation", "matrix is not a rotation"));
    }
    let translation = Vector3::from_column_slice(&t);
    // exact rotations keep their bits; slightly off ones are projected
    let transform = RigidTransform::new(rotation, translation)
        .or_else(|_| RigidTransform::from_approximate(rotation, translation))
        .map_err(|e| Error::format(path, "rotation", e.to_string()))?;
    let branch = match obj.get("branch") {
        None | Some(Value::Null) => None,
        Some(Value::String(s)) => Some(s.clone()),
        Some(_) => return Err(Error::format(path, "branch", "expected a string")),
    };
    let inlier_fraction = match obj.get("inlier_fraction") {
        None | Some(Value::Null) => None,
        Some(v) => Some(v.as_f64().ok_or_else(|| Error::format(path, "inlier_fraction", "not a number"))?),
    };
    Ok(PoseRecord {
        transform,
        branch,
        inlier_fraction,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trip_is_lossless() {
        let t = RigidTransform::from_axis_angle(Vector3::new(0.3, -0.2, 0.9), 1.234567, Vector3::new(0.1, -2.0 / 3.0, 1e-17));
        let rec = PoseRecord {
            transform: t,
            branch: Some("safeguard".into()),
            inlier_fraction: Some(1.0 / 7.0),
        };
        let text = encode_pose(&rec);
        let back = parse_pose(&text, Path::new("p.json")).unwrap();
        assert_eq!(back.transform.rotation_row_major(), t.rotation_row_major());
        assert_eq!(back.transform.translation(), t.translation());
        assert_eq!(back, rec);
    }

    #[test]
    fn rotation_is_row_major() {
        let t = RigidTransform::rot_z(0.5);
        let doc: Value = serde_json::from_str(&encode_pose(&PoseRecord::new(t))).unwrap();
        let r: Vec<f64> = doc["rotation"].as_array().unwrap().iter().map(|v| v.as_f64().unwrap()).collect();
        assert_eq!(r[1], -(0.5f64).sin());
        assert_eq!(r[3], (0.5f64).sin());
        assert!(doc.get("branch").is_none());
    }

    #[test]
    fn rejects_bad_documents() {
        let p = Path::new("p.json");
        assert!(parse_pose("{", p).is_err());
        assert!(parse_pose(r#"{"rotation": [1,0,0,0,1,0,0,0], "translation": [0,0,0]}"#, p).is_err());
        assert!(parse_pose(r#"{"rotation": [2,0,0,0,1,0,0,0,1], "translation": [0,0,0]}"#, p).is_err());
        assert!(parse_pose(r#"{"rotation": [1,0,0,0,1,0,0,0,1], "translation": [0,"a",0]}"#, p).is_err());
        let ok = parse_pose(r#"{"rotation": [1,0,0,0,1,0,0,0,1], "translation": [1,2,3]}"#, p).unwrap();
        assert_eq!(ok.transform.translation(), &Vector3::new(1.0, 2.0, 3.0));
    }
}
