//! Flat `key = value` pipeline configuration.
//!
//! Blank lines and lines starting with `#` are ignored. An optional
//! `preset = indoor | outdoor` must come before any other key; the remaining
//! keys override the preset. Unknown and repeated keys are rejected, and every
//! error names its line.
//!
//! | key | value |
//! |-----|-------|
//! | `descriptor` | `raw_xyz`, `local_histogram`, `precomputed` |
//! | `feature_radius`, `feature_bins` | local histogram parameters |
//! | `weighter` | `uniform`, `oracle`, `heuristic`, `file:<path>`, `constant:<w>` |
//! | `oracle_tau` | inlier radius of the oracle weighter, meters |
//! | `voxel_size`, `voxel_seed` | downsampling |
//! | `safeguard_tau`, `prefilter_tau` | branch test and weight prefilter |
//! | `huber_delta`, `max_iters`, `step_size`, `convergence_tol` | refinement |
//! | `ransac_max_iterations`, `ransac_inlier_threshold`, `ransac_confidence`, `ransac_seed` | safeguard |
//! | `success_re_deg`, `success_te_m` | benchmark success thresholds |

use std::fs;
use std::path::Path;
use std::str::FromStr;

use crate::correspondence::{WeightProvider, DEFAULT_INLIER_TAU};
use crate::error::{Error, Result};
use crate::evaluation::SuccessThresholds;
use crate::features::Descriptor;
use crate::pipeline::{PipelineConfig, Preset};

pub const KEYS: &[&str] = &[
    "preset",
    "descriptor",
    "feature_radius",
    "feature_bins",
    "weighter",
    "oracle_tau",
    "voxel_size",
    "voxel_seed",
    "safeguard_tau",
    "prefilter_tau",
    "huber_delta",
    "max_iters",
    "step_size",
    "convergence_tol",
    "ransac_max_iterations",
    "ransac_inlier_threshold",
    "ransac_confidence",
    "ransac_seed",
    "success_re_deg",
    "success_te_m",
];

#[derive(Debug, Clone, PartialEq)]
pub struct ConfigFile {
    pub pipeline: PipelineConfig,
    pub thresholds: SuccessThresholds,
}

impl Default for ConfigFile {
    fn default() -> Self {
        Self {
            pipeline: PipelineConfig::indoor(),
            thresholds: SuccessThresholds::INDOOR,
        }
    }
}

pub fn read_config(path: impl AsRef<Path>) -> Result<ConfigFile> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_config(&text, path)
}

/// Builder state that keeps the histogram parameters and oracle radius
/// around while the descriptor or weighter keys may still change.
struct Draft {
    file: ConfigFile,
    radius: f64,
    bins: usize,
    oracle_tau: f64,
}

impl Draft {
    fn from(file: ConfigFile) -> Self {
        let (radius, bins) = match file.pipeline.feature.descriptor {
            Descriptor::LocalHistogram { radius, bins } => (radius, bins),
            _ => (0.25, 8),
        };
        let oracle_tau = match file.pipeline.weighter {
            WeightProvider::Oracle { tau, .. } => tau,
            _ => DEFAULT_INLIER_TAU,
        };
        Self {
            file,
            radius,
            bins,
            oracle_tau,
        }
    }

    fn finish(&self) -> ConfigFile {
        let mut file = self.file.clone();
        if let Descriptor::LocalHistogram { .. } = file.pipeline.feature.descriptor {
            file.pipeline.feature.descriptor = Descriptor::LocalHistogram {
                radius: self.radius,
                bins: self.bins,
            };
        }
        if let WeightProvider::Oracle { ground_truth, .. } = file.pipeline.weighter {
            file.pipeline.weighter = WeightProvider::Oracle {
                ground_truth,
                tau: self.oracle_tau,
            };
        }
        file
    }
}

fn value<T: FromStr>(raw: &str, key: &str) -> std::result::Result<T, String> {
    raw.parse()
        .map_err(|_| format!("invalid value '{raw}' for '{key}'"))
}

fn parse_weighter(raw: &str, base: &Path) -> std::result::Result<WeightProvider, String> {
    Ok(match raw {
        "uniform" => WeightProvider::Uniform,
        "oracle" => WeightProvider::Oracle {
            ground_truth: None,
            tau: DEFAULT_INLIER_TAU,
        },
        "heuristic" => WeightProvider::Heuristic,
        _ => {
            if let Some(p) = raw.strip_prefix("file:") {
                if p.is_empty() {
                    return Err("weighter file path is empty".into());
                }
                WeightProvider::File(base.join(p))
            } else if let Some(v) = raw.strip_prefix("constant:") {
                WeightProvider::Constant(value(v, "weighter")?)
            } else {
                return Err(format!(
                    "unknown weighter '{raw}' (expected uniform, oracle, heuristic, file:<path> or constant:<w>)"
                ));
            }
        }
    })
}

fn apply(draft: &mut Draft, key: &str, raw: &str, base: &Path) -> std::result::Result<(), String> {
    let p = &mut draft.file.pipeline;
    match key {
        "descriptor" => {
            p.feature.descriptor = match raw {
                "raw_xyz" => Descriptor::RawXyz,
                "precomputed" => Descriptor::Precomputed,
                "local_histogram" => Descriptor::LocalHistogram {
                    radius: draft.radius,
                    bins: draft.bins,
                },
                _ => return Err(format!("unknown descriptor '{raw}'")),
            }
        }
        "feature_radius" => draft.radius = value(raw, key)?,
        "feature_bins" => draft.bins = value(raw, key)?,
        "weighter" => p.weighter = parse_weighter(raw, base)?,
        "oracle_tau" => draft.oracle_tau = value(raw, key)?,
        "voxel_size" => p.voxel_size = value(raw, key)?,
        "voxel_seed" => p.voxel_seed = value(raw, key)?,
        "safeguard_tau" => p.safeguard_tau_s = value(raw, key)?,
        "prefilter_tau" => p.prefilter_tau = value(raw, key)?,
        "huber_delta" => p.refine.huber_delta = value(raw, key)?,
        "max_iters" => p.refine.max_iters = value(raw, key)?,
        "step_size" => p.refine.step_size = value(raw, key)?,
        "convergence_tol" => p.refine.convergence_tol = value(raw, key)?,
        "ransac_max_iterations" => p.ransac.max_iterations = value(raw, key)?,
        "ransac_inlier_threshold" => p.ransac.inlier_threshold = value(raw, key)?,
        "ransac_confidence" => p.ransac.confidence = value(raw, key)?,
        "ransac_seed" => p.ransac.seed = value(raw, key)?,
        "success_re_deg" => draft.file.thresholds.re_deg = value(raw, key)?,
        "success_te_m" => draft.file.thresholds.te_m = value(raw, key)?,
        _ => return Err(format!("unknown key '{key}'")),
    }
    Ok(())
}

fn check(file: &ConfigFile) -> Result<()> {
    file.pipeline.validate()?;
    let t = file.thresholds;
    if !(t.re_deg > 0.0 && t.te_m > 0.0) {
        return Err(Error::InvalidParameter("success thresholds must be positive".into()));
    }
    if let WeightProvider::Oracle { tau, .. } = file.pipeline.weighter {
        if !(tau > 0.0) {
            return Err(Error::InvalidParameter(format!("oracle_tau must be positive, got {tau}")));
        }
    }
    Ok(())
}

/// Parses configuration text. Relative `file:` weighter paths resolve
/// against the directory of `path`.
pub fn parse_config(text: &str, path: &Path) -> Result<ConfigFile> {
    let base = path.parent().map(Path::to_path_buf).unwrap_or_default();
    let mut draft = Draft::from(ConfigFile::default());
    let mut seen: Vec<&str> = Vec::new();
    for (k, raw_line) in text.lines().enumerate() {
        let loc = format!("line {}", k + 1);
        let line = raw_line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let (key, raw) = line
            .split_once('=')
            .map(|(a, b)| (a.trim(), b.trim()))
            .ok_or_else(|| Error::format(path, &loc, "expected 'key = value'"))?;
        if key.is_empty() || raw.is_empty() {
            return Err(Error::format(path, loc, "expected 'key = value'"));
        }
        let key = KEYS
            .iter()
            .copied()
            .find(|&k| k == key)
            .ok_or_else(|| Error::format(path, &loc, format!("unknown key '{key}'")))?;
        if seen.contains(&key) {
            return Err(Error::format(path, loc, format!("duplicate key '{key}'")));
        }
        if key == "preset" {
            if !seen.is_empty() {
                return Err(Error::format(path, loc, "'preset' must precede every other key"));
            }
            let preset = Preset::from_name(raw)
                .ok_or_else(|| Error::format(path, &loc, format!("unknown preset '{raw}'")))?;
            draft = Draft::from(ConfigFile {
                pipeline: preset.config(),
                thresholds: preset.thresholds(),
            });
        } else {
            apply(&mut draft, key, raw, &base).map_err(|m| Error::format(path, &loc, m))?;
            check(&draft.finish()).map_err(|e| Error::format(path, &loc, e.to_string()))?;
        }
        seen.push(key);
    }
    Ok(draft.finish())
}

/// Renders a configuration that [`parse_config`] reads back unchanged
/// (given the same base directory for `file:` paths).
pub fn render_config(file: &ConfigFile) -> String {
    let p = &file.pipeline;
    let mut lines = Vec::new();
    match p.feature.descriptor {
        Descriptor::RawXyz => lines.push("descriptor = raw_xyz".to_string()),
        Descriptor::Precomputed => lines.push("descriptor = precomputed".to_string()),
        Descriptor::LocalHistogram { radius, bins } => {
            lines.push("descriptor = local_histogram".to_string());
            lines.push(format!("feature_radius = {radius:?}"));
            lines.push(format!("feature_bins = {bins}"));
        }
    }
    match &p.weighter {
        WeightProvider::Uniform => lines.push("weighter = uniform".into()),
        WeightProvider::Heuristic => lines.push("weighter = heuristic".into()),
        WeightProvider::Oracle { tau, .. } => {
            lines.push("weighter = oracle".into());
            lines.push(format!("oracle_tau = {tau:?}"));
        }
        WeightProvider::File(path) => lines.push(format!("weighter = file:{}", path.display())),
        WeightProvider::Constant(v) => lines.push(format!("weighter = constant:{v:?}")),
    }
    lines.extend([
        format!("voxel_size = {:?}", p.voxel_size),
        format!("voxel_seed = {}", p.voxel_seed),
        format!("safeguard_tau = {:?}", p.safeguard_tau_s),
        format!("prefilter_tau = {:?}", p.prefilter_tau),
        format!("huber_delta = {:?}", p.refine.huber_delta),
        format!("max_iters = {}", p.refine.max_iters),
        format!("step_size = {:?}", p.refine.step_size),
        format!("convergence_tol = {:?}", p.refine.convergence_tol),
        format!("ransac_max_iterations = {}", p.ransac.max_iterations),
        format!("ransac_inlier_threshold = {:?}", p.ransac.inlier_threshold),
        format!("ransac_confidence = {:?}", p.ransac.confidence),
        format!("ransac_seed = {}", p.ransac.seed),
        format!("success_re_deg = {:?}", file.thresholds.re_deg),
        format!("success_te_m = {:?}", file.thresholds.te_m),
    ]);
    let mut out = lines.join("\n");
    out.push('\n');
    out
}
