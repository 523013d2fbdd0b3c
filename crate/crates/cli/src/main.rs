use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use globreg::evaluation::{generate_pair, run_benchmark, SyntheticPairSpec};
use globreg::io::config::{read_config, ConfigFile};
use globreg::io::ply::{read_ply, write_ply, PlyFormat};
use globreg::io::pose::{encode_pose, read_pose, write_pose, PoseRecord};
use globreg::io::report::{write_curves, write_report};
use globreg::io::suite::read_suite;
use globreg::io::weights::read_weight_file;
use globreg::{register, register_with_correspondences, Error};

/// Global rigid registration of point clouds.
#[derive(Parser)]
#[command(name = "globreg", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Estimate the transform mapping SOURCE onto TARGET.
    Register {
        #[arg(long)]
        source: PathBuf,
        #[arg(long)]
        target: PathBuf,
        /// key = value configuration file (defaults to the indoor preset)
        #[arg(long)]
        config: Option<PathBuf>,
        /// Weight file; its correspondences replace feature matching.
        #[arg(long)]
        weights: Option<PathBuf>,
        /// Ground-truth pose used by the oracle weighter.
        #[arg(long)]
        ground_truth: Option<PathBuf>,
        /// Pose JSON destination (standard output if omitted).
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run a benchmark suite and write the report.
    Benchmark {
        #[arg(long)]
        suite: PathBuf,
        #[arg(long)]
        config: Option<PathBuf>,
        /// Report JSON destination (standard output if omitted).
        #[arg(long)]
        report: Option<PathBuf>,
        /// Recall-curve CSV destination.
        #[arg(long)]
        curves: Option<PathBuf>,
    },
    /// Write a synthetic pair as source.ply, target.ply and gt.json.
    Generate {
        #[arg(long)]
        out_dir: PathBuf,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 1000)]
        n_points: usize,
        #[arg(long, default_value_t = 0.5)]
        overlap: f64,
        #[arg(long, default_value_t = 0.0)]
        noise: f64,
        #[arg(long, default_value_t = 0.0)]
        outliers: f64,
        #[arg(long, default_value_t = 180.0)]
        max_rotation_deg: f64,
        #[arg(long, default_value_t = 1.0)]
        max_translation: f64,
        /// Write binary little-endian PLY instead of ASCII.
        #[arg(long)]
        binary: bool,
    },
}

/// Failure carrying its process exit code.
struct Failure {
    code: u8,
    message: String,
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let code = if matches!(e, Error::RegistrationFailed(_)) { 2 } else { 1 };
        Failure {
            code,
            message: e.to_string(),
        }
    }
}

fn usage(message: impl Into<String>) -> Failure {
    Failure {
        code: 1,
        message: message.into(),
    }
}

fn load_config(path: Option<&Path>) -> Result<ConfigFile, Failure> {
    Ok(match path {
        Some(p) => read_config(p)?,
        None => ConfigFile::default(),
    })
}

fn configure_threads() -> Result<(), Failure> {
    let threads = match std::env::var("DGR_THREADS") {
        Ok(v) => v
            .trim()
            .parse::<usize>()
            .map_err(|_| usage(format!("DGR_THREADS must be a non-negative integer, got '{v}'")))?,
        Err(_) => 0,
    };
    if threads > 0 {
        rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build_global()
            .map_err(|e| usage(format!("cannot configure {threads} worker threads: {e}")))?;
    }
    Ok(())
}

fn cmd_register(
    source: &Path,
    target: &Path,
    config: Option<&Path>,
    weights: Option<&Path>,
    ground_truth: Option<&Path>,
    out: Option<&Path>,
) -> Result<(), Failure> {
    let mut cfg = load_config(config)?.pipeline;
    let x = read_ply(source)?;
    let y = read_ply(target)?;
    if let Some(gt) = ground_truth {
        cfg.weighter = cfg.weighter.with_ground_truth(read_pose(gt)?.transform);
    }

    let result = match weights {
        Some(w) => {
            let file = read_weight_file(w)?;
            if file.source_size() != x.len() || file.target_size() != y.len() {
                return Err(usage(format!(
                    "{}: declared sizes ({}, {}) do not match the clouds ({}, {})",
                    w.display(),
                    file.source_size(),
                    file.target_size(),
                    x.len(),
                    y.len()
                )));
            }
            register_with_correspondences(&file.correspondences, &file.weights, &x, &y, &cfg)?
        }
        None => register(&x, &y, &cfg)?,
    };
    eprintln!(
        "branch {} | inlier fraction {:.4} | {} correspondences | {:.3} s",
        result.branch.as_str(),
        result.inlier_fraction,
        result.correspondence_count,
        result.timings.total()
    );

    let record = PoseRecord {
        transform: result.transform,
        branch: Some(result.branch.as_str().to_string()),
        inlier_fraction: Some(result.inlier_fraction),
    };
    match out {
        Some(path) => write_pose(path, &record)?,
        None => print!("{}", encode_pose(&record)),
    }
    Ok(())
}

fn cmd_benchmark(suite: &Path, config: Option<&Path>, report: Option<&Path>, curves: Option<&Path>) -> Result<(), Failure> {
    let cfg = load_config(config)?;
    let suite = read_suite(suite)?;
    let missing = suite.missing_files();
    if !missing.is_empty() {
        let list: Vec<String> = missing.iter().map(|p| p.display().to_string()).collect();
        return Err(usage(format!("suite references missing files: {}", list.join(", "))));
    }
    let thresholds = suite.thresholds.unwrap_or(cfg.thresholds);
    let result = run_benchmark(&suite.cases, &cfg.pipeline, &thresholds)?;
    eprintln!(
        "{} pairs | recall {:.4} | safeguard {} | failed {} | {:.2} s",
        result.pair_count,
        result.recall,
        result.branch_counts.safeguard,
        result.branch_counts.failed,
        result.timing.wall_seconds
    );
    match report {
        Some(path) => write_report(path, &result)?,
        None => println!("{}", result.to_json()),
    }
    if let Some(path) = curves {
        write_curves(path, &result)?;
    }
    Ok(())
}

fn run(cli: Cli) -> Result<(), Failure> {
    configure_threads()?;
    match cli.command {
        Command::Register {
            source,
            target,
            config,
            weights,
            ground_truth,
            out,
        } => cmd_register(
            &source,
            &target,
            config.as_deref(),
            weights.as_deref(),
            ground_truth.as_deref(),
            out.as_deref(),
        ),
        Command::Benchmark {
            suite,
            config,
            report,
            curves,
        } => cmd_benchmark(&suite, config.as_deref(), report.as_deref(), curves.as_deref()),
        Command::Generate {
            out_dir,
            seed,
            n_points,
            overlap,
            noise,
            outliers,
            max_rotation_deg,
            max_translation,
            binary,
        } => {
            let pair = generate_pair(&SyntheticPairSpec {
                n_points,
                overlap_ratio: overlap,
                noise_sigma: noise,
                outlier_ratio: outliers,
                max_rotation: max_rotation_deg.to_radians(),
                max_translation,
                seed,
            })?;
            std::fs::create_dir_all(&out_dir).map_err(|e| usage(format!("{}: {e}", out_dir.display())))?;
            let format = if binary { PlyFormat::BinaryLittleEndian } else { PlyFormat::Ascii };
            write_ply(&pair.source, out_dir.join("source.ply"), format)?;
            write_ply(&pair.target, out_dir.join("target.ply"), format)?;
            write_pose(out_dir.join("gt.json"), &PoseRecord::new(pair.ground_truth))?;
            eprintln!("wrote {}", out_dir.display());
            Ok(())
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {}", f.message);
            ExitCode::from(f.code)
        }
    }
}
