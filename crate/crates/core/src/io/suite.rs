//! Benchmark suite files.
//!
//! One directive per line, `#` starts a comment:
//!
//! ```text
//! synthetic count=50 seed=7 n_points=1000 overlap=0.5 noise=0 outliers=0.7 max_rotation_deg=180 max_translation=1
//! pair source=a.ply target=b.ply gt=a_b.json [name=kitchen]
//! thresholds re_deg=15 te_m=0.3
//! ```
//!
//! A `synthetic` line expands to `count` pairs with seeds `seed, seed+1, …`;
//! omitted fields take the [`SyntheticPairSpec`] defaults. Relative paths
//! resolve against the suite file's directory.

use std::collections::HashMap;
use std::fs;
use std::path::{Path, PathBuf};

use crate::error::{Error, Result};
use crate::evaluation::{BenchmarkCase, SuccessThresholds, SyntheticPairSpec};

#[derive(Debug, Clone, PartialEq)]
pub struct Suite {
    pub cases: Vec<BenchmarkCase>,
    /// Overrides the configuration's thresholds when present.
    pub thresholds: Option<SuccessThresholds>,
}

impl Suite {
    /// Files referenced by the suite that do not exist, in suite order.
    pub fn missing_files(&self) -> Vec<PathBuf> {
        self.cases
            .iter()
            .filter_map(|c| match c {
                BenchmarkCase::Files {
                    source,
                    target,
                    ground_truth,
                    ..
                } => Some([source, target, ground_truth]),
                BenchmarkCase::Synthetic { .. } => None,
            })
            .flatten()
            .filter(|p| !p.is_file())
            .cloned()
            .collect()
    }
}

pub fn read_suite(path: impl AsRef<Path>) -> Result<Suite> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_suite(&text, path)
}

fn fields<'a>(tokens: &[&'a str], allowed: &[&str]) -> std::result::Result<HashMap<&'a str, &'a str>, String> {
    let mut map = HashMap::new();
    for t in tokens {
        let (k, v) = t
            .split_once('=')
            .ok_or_else(|| format!("expected key=value, found '{t}'"))?;
        if !allowed.contains(&k) {
            return Err(format!("unknown field '{k}'"));
        }
        if v.is_empty() {
            return Err(format!("field '{k}' has no value"));
        }
        if map.insert(k, v).is_some() {
            return Err(format!("duplicate field '{k}'"));
        }
    }
    Ok(map)
}

fn get<T: std::str::FromStr>(map: &HashMap<&str, &str>, key: &str, default: T) -> std::result::Result<T, String> {
    match map.get(key) {
        None => Ok(default),
        Some(v) => v.parse().map_err(|_| format!("invalid value '{v}' for '{key}'")),
    }
}

fn require<'a>(map: &HashMap<&str, &'a str>, key: &str) -> std::result::Result<&'a str, String> {
    map.get(key).copied().ok_or_else(|| format!("missing field '{key}'"))
}

pub fn parse_suite(text: &str, path: &Path) -> Result<Suite> {
    let base = path.parent().map(Path::to_path_buf).unwrap_or_default();
    let mut cases = Vec::new();
    let mut thresholds = None;
    for (k, raw) in text.lines().enumerate() {
        let line_no = k + 1;
        let loc = format!("line {line_no}");
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let tokens: Vec<&str> = line.split_whitespace().collect();
        let located = |m: String| Error::format(path, &loc, m);
        match tokens[0] {
            "synthetic" => {
                let map = fields(
                    &tokens[1..],
                    &[
                        "count",
                        "seed",
                        "n_points",
                        "overlap",
                        "noise",
                        "outliers",
                        "max_rotation_deg",
                        "max_translation",
                        "name",
                    ],
                )
                .map_err(located)?;
                let d = SyntheticPairSpec::default();
                let count: usize = get(&map, "count", 1).map_err(located)?;
                let seed: u64 = get(&map, "seed", 0).map_err(located)?;
                let spec = SyntheticPairSpec {
                    n_points: get(&map, "n_points", d.n_points).map_err(located)?,
                    overlap_ratio: get(&map, "overlap", d.overlap_ratio).map_err(located)?,
                    noise_sigma: get(&map, "noise", d.noise_sigma).map_err(located)?,
                    outlier_ratio: get(&map, "outliers", d.outlier_ratio).map_err(located)?,
                    max_rotation: get(&map, "max_rotation_deg", d.max_rotation.to_degrees())
                        .map_err(located)?
                        .to_radians(),
                    max_translation: get(&map, "max_translation", d.max_translation).map_err(located)?,
                    seed,
                };
                spec.validate().map_err(|e| located(e.to_string()))?;
                if count == 0 {
                    return Err(located("count must be at least 1".into()));
                }
                let prefix = map.get("name").map_or_else(|| format!("synthetic-l{line_no}"), |s| s.to_string());
                for i in 0..count {
                    let seed = seed
                        .checked_add(i as u64)
                        .ok_or_else(|| located("seed range overflows".into()))?;
                    cases.push(BenchmarkCase::Synthetic {
                        name: format!("{prefix}-{seed}"),
                        spec: SyntheticPairSpec { seed, ..spec },
                    });
                }
            }
            "pair" => {
                let map = fields(&tokens[1..], &["source", "target", "gt", "name"]).map_err(located)?;
                let source = base.join(require(&map, "source").map_err(located)?);
                let target = base.join(require(&map, "target").map_err(located)?);
                let ground_truth = base.join(require(&map, "gt").map_err(located)?);
                let name = map.get("name").map_or_else(|| format!("pair-l{line_no}"), |s| s.to_string());
                cases.push(BenchmarkCase::Files {
                    name,
                    source,
                    target,
                    ground_truth,
                });
            }
            "thresholds" => {
                if thresholds.is_some() {
                    return Err(located("thresholds given twice".into()));
                }
                let map = fields(&tokens[1..], &["re_deg", "te_m"]).map_err(located)?;
                let t = SuccessThresholds {
                    re_deg: require(&map, "re_deg").and_then(|v| v.parse().map_err(|_| format!("invalid re_deg '{v}'"))).map_err(located)?,
                    te_m: require(&map, "te_m").and_then(|v| v.parse().map_err(|_| format!("invalid te_m '{v}'"))).map_err(located)?,
                };
                if !(t.re_deg > 0.0 && t.te_m > 0.0) {
                    return Err(located("thresholds must be positive".into()));
                }
                thresholds = Some(t);
            }
            other => return Err(located(format!("unknown directive '{other}'"))),
        }
    }
    if cases.is_empty() {
        return Err(Error::format(path, "end of file", "suite lists no pairs"));
    }
    Ok(Suite { cases, thresholds })
}
