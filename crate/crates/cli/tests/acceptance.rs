//! Acceptance gate: runs every headline criterion at its stated tolerance
//! and prints one PASS/FAIL line each. Exits non-zero if any criterion fails.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

use std::fs;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::process::{Command, ExitCode};
use std::time::Instant;

use nalgebra::{Matrix3, Rotation3, Vector3};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde_json::Value;

use globreg::correspondence::match_nearest;
use globreg::evaluation::{
    generate_pair, rotation_error, rotation_loss_gradient, run_benchmark, translation_error, translation_loss,
    translation_loss_gradient, BenchmarkCase, BenchmarkReport, PairMetrics, SuccessThresholds, SyntheticPairSpec,
};
use globreg::features::{Descriptor, FeatureConfig};
use globreg::geometry::is_rotation;
use globreg::pipeline::{oracle_weighter, register_unweighted};
use globreg::procrustes::{grad_weights, normalize_weights, solve, NormalizedWeights, PoseGradient};
use globreg::ransac::{ransac_register, RansacConfig};
use globreg::refine::{energy, energy_gradient, matrix_to_rot6d, refine, rot6d_to_matrix, RefineConfig, Rot6D};
use globreg::{CorrespondenceSet, PipelineConfig, PointCloud, RigidTransform, WeightProvider, WeightVector};

type Outcome = Result<String, String>;
type Criterion = Box<dyn FnOnce(&mut Vec<BenchmarkReport>) -> Outcome>;

macro_rules! ensure {
    ($cond:expr, $($fmt:tt)+) => {
        if !$cond {
            return Err(format!($($fmt)+));
        }
    };
}

fn random_rotation(rng: &mut ChaCha8Rng) -> Matrix3<f64> {
    let axis = Vector3::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0));
    let axis = if axis.norm() < 1e-3 { Vector3::z() } else { axis.normalize() };
    *Rotation3::new(axis * rng.random_range(0.0..std::f64::consts::PI)).matrix()
}

fn random_points(rng: &mut ChaCha8Rng, n: usize, scale: f64) -> Vec<Vector3<f64>> {
    (0..n)
        .map(|_| {
            Vector3::new(
                rng.random_range(-scale..scale),
                rng.random_range(-scale..scale),
                rng.random_range(-scale..scale),
            )
        })
        .collect()
}

fn gaussian(rng: &mut ChaCha8Rng, sigma: f64) -> Vector3<f64> {
    // Box–Muller, kept local so the oracle does not share code with the crate
    let mut g = || {
        let u1: f64 = rng.random_range(f64::EPSILON..1.0);
        let u2: f64 = rng.random_range(0.0..1.0);
        (-2.0 * u1.ln()).sqrt() * (std::f64::consts::TAU * u2).cos()
    };
    Vector3::new(g(), g(), g()) * sigma
}

/// Classical unweighted Procrustes: centre both sets, SVD of `Σ (y−ȳ)(x−x̄)ᵀ`,
/// flip the last singular direction if needed.
fn classical_procrustes(x: &[Vector3<f64>], y: &[Vector3<f64>]) -> (Matrix3<f64>, Vector3<f64>) {
    let n = x.len() as f64;
    let xm = x.iter().sum::<Vector3<f64>>() / n;
    let ym = y.iter().sum::<Vector3<f64>>() / n;
    let mut h = Matrix3::zeros();
    for (a, b) in x.iter().zip(y) {
        h += (b - ym) * (a - xm).transpose();
    }
    let svd = h.svd(true, true);
    let (u, vt) = (svd.u.unwrap(), svd.v_t.unwrap());
    let d = (u * vt).determinant().signum();
    let r = u * Matrix3::from_diagonal(&Vector3::new(1.0, 1.0, d)) * vt;
    (r, ym - r * xm)
}

fn closed_form_exactness() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(101);
    let mut instances = Vec::new();
    for _ in 0..200 {
        let n = rng.random_range(3..=500);
        let x = random_points(&mut rng, n, 1.0);
        let gt = RigidTransform::new(random_rotation(&mut rng), random_points(&mut rng, 1, 5.0)[0]).unwrap();
        let y: Vec<_> = x.iter().map(|p| gt.apply_point(p)).collect();
        let w = WeightVector::new((0..n).map(|_| rng.random_range(0.05..=1.0)).collect()).unwrap();
        instances.push((x, y, w, gt));
    }
    let clock = Instant::now();
    let mut worst = (0.0f64, 0.0f64);
    for (x, y, w, gt) in &instances {
        let nw = normalize_weights(w, 0.0).map_err(|e| e.to_string())?;
        let sol = solve(x, y, &nw).map_err(|e| e.to_string())?;
        worst.0 = worst.0.max(rotation_error(sol.transform.rotation(), gt.rotation()));
        worst.1 = worst.1.max(translation_error(sol.transform.translation(), gt.translation()));
    }
    let elapsed = clock.elapsed().as_secs_f64();
    ensure!(worst.0 <= 1e-7, "max RE {:.3e} rad > 1e-7", worst.0);
    ensure!(worst.1 <= 1e-9, "max TE {:.3e} m > 1e-9", worst.1);
    ensure!(elapsed < 1.0, "took {elapsed:.3} s");
    Ok(format!("200 instances, max RE {:.2e} rad, max TE {:.2e} m, {:.3} s", worst.0, worst.1, elapsed))
}

fn classical_equivalence() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(202);
    let mut worst = 0.0f64;
    for _ in 0..100 {
        let n = rng.random_range(3..=300);
        let x = random_points(&mut rng, n, 1.0);
        let gt = RigidTransform::new(random_rotation(&mut rng), random_points(&mut rng, 1, 3.0)[0]).unwrap();
        let y: Vec<_> = x.iter().map(|p| gt.apply_point(p) + gaussian(&mut rng, 0.05)).collect();
        let sol = solve(&x, &y, &NormalizedWeights::uniform(n).unwrap()).map_err(|e| e.to_string())?;
        let (r, t) = classical_procrustes(&x, &y);
        worst = worst
            .max((sol.transform.rotation() - r).amax())
            .max((sol.transform.translation() - t).amax());
    }
    ensure!(worst <= 1e-9, "max entrywise deviation {worst:.3e} > 1e-9");
    Ok(format!("100 noisy instances, max deviation {worst:.2e}"))
}

fn reflection_handling() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(303);
    let mirror = Matrix3::from_diagonal(&Vector3::new(1.0, 1.0, -1.0));
    let mut worst = 0.0f64;
    let mut corrected = 0;
    for _ in 0..50 {
        let n = rng.random_range(4..=100);
        let x = random_points(&mut rng, n, 1.0);
        let r = random_rotation(&mut rng);
        let t = random_points(&mut rng, 1, 2.0)[0];
        // a mirrored copy: the unconstrained orthogonal fit would be a reflection
        let y: Vec<_> = x.iter().map(|p| r * mirror * p + t + gaussian(&mut rng, 0.01)).collect();
        let sol = solve(&x, &y, &NormalizedWeights::uniform(n).unwrap()).map_err(|e| e.to_string())?;
        let (u, v) = (sol.u, sol.v);
        ensure!(u.determinant() * v.determinant() < 0.0, "instance did not provoke a reflection");
        corrected += sol.reflection_corrected as usize;
        worst = worst.max((sol.transform.rotation().determinant() - 1.0).abs());
        ensure!(is_rotation(sol.transform.rotation(), 1e-12), "output not orthonormal");
    }
    ensure!(corrected == 50, "correction applied on {corrected}/50");
    ensure!(worst <= 1e-12, "max |det R − 1| = {worst:.3e}");
    Ok(format!("50/50 corrected, max |det R − 1| = {worst:.2e}"))
}

fn weight_gradient() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(404);
    let h = 1e-5;
    let mut worst = 0.0f64;
    for _ in 0..25 {
        let n = rng.random_range(8..=60);
        let x = random_points(&mut rng, n, 1.0);
        let gt = RigidTransform::new(random_rotation(&mut rng), random_points(&mut rng, 1, 2.0)[0]).unwrap();
        let y: Vec<_> = x.iter().map(|p| gt.apply_point(p) + gaussian(&mut rng, 0.1)).collect();
        let w: Vec<f64> = (0..n).map(|_| rng.random_range(0.2..0.95)).collect();
        // reference pose away from the estimate so the rotation loss is smooth
        let r_star = gt.rotation() * Rotation3::new(Vector3::new(0.1, -0.15, 0.2)).matrix();
        let t_star = gt.translation() + Vector3::new(0.2, 0.1, -0.3);

        let loss = |w: &[f64]| -> Result<f64, String> {
            let nw = normalize_weights(&WeightVector::new(w.to_vec()).map_err(|e| e.to_string())?, 0.0)
                .map_err(|e| e.to_string())?;
            let s = solve(&x, &y, &nw).map_err(|e| e.to_string())?;
            Ok(rotation_error(s.transform.rotation(), &r_star) + translation_loss(s.transform.translation(), &t_star))
        };
        let nw = normalize_weights(&WeightVector::new(w.clone()).unwrap(), 0.0).map_err(|e| e.to_string())?;
        let sol = solve(&x, &y, &nw).map_err(|e| e.to_string())?;
        let upstream = PoseGradient {
            rotation: rotation_loss_gradient(sol.transform.rotation(), &r_star),
            translation: translation_loss_gradient(sol.transform.translation(), &t_star),
        };
        let analytic = grad_weights(&sol, &x, &y, &nw, &upstream).map_err(|e| e.to_string())?;
        let mut max_diff = 0.0f64;
        let mut max_ref = 0.0f64;
        for k in 0..n {
            let (mut p, mut m) = (w.clone(), w.clone());
            p[k] += h;
            m[k] -= h;
            let fd = (loss(&p)? - loss(&m)?) / (2.0 * h);
            max_diff = max_diff.max((analytic[k] - fd).abs());
            max_ref = max_ref.max(fd.abs());
        }
        worst = worst.max(max_diff / max_ref);
    }
    ensure!(worst <= 1e-4, "max relative error {worst:.3e} > 1e-4");
    Ok(format!("25 instances, h = 1e-5, max relative error {worst:.2e}"))
}

fn rotation_representation() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(505);
    let mut round_trip = 0.0f64;
    let mut ortho = 0.0f64;
    let gram_error = |r: &Matrix3<f64>| (r.transpose() * r - Matrix3::identity()).amax().max((r.determinant() - 1.0).abs());
    for _ in 0..1000 {
        let r = random_rotation(&mut rng);
        let back = rot6d_to_matrix(&matrix_to_rot6d(&r).map_err(|e| e.to_string())?).map_err(|e| e.to_string())?;
        round_trip = round_trip.max((back - r).amax());
        ortho = ortho.max(gram_error(&back));
        let a = Rot6D::new(random_points(&mut rng, 1, 3.0)[0], random_points(&mut rng, 1, 3.0)[0]);
        if let Ok(m) = rot6d_to_matrix(&a) {
            ortho = ortho.max(gram_error(&m));
        }
    }
    ensure!(round_trip <= 1e-12, "round-trip error {round_trip:.3e}");
    ensure!(ortho <= 1e-12, "orthonormality error {ortho:.3e}");
    Ok(format!("1000 rotations, round trip {round_trip:.2e}, orthonormality {ortho:.2e}"))
}

fn identity_matches(n: usize) -> CorrespondenceSet {
    CorrespondenceSet::new((0..n).map(|i| (i, i)).collect(), n, n).unwrap()
}

fn refinement_energy() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(606);
    let cfg = RefineConfig::default();
    let mut steps = 0;
    for _ in 0..100 {
        let n = rng.random_range(10..=200);
        let xs = random_points(&mut rng, n, 1.0);
        let gt = RigidTransform::new(random_rotation(&mut rng), random_points(&mut rng, 1, 1.0)[0]).unwrap();
        let ys: Vec<_> = xs
            .iter()
            .map(|p| {
                if rng.random_bool(0.3) {
                    random_points(&mut rng, 1, 2.0)[0]
                } else {
                    gt.apply_point(p) + gaussian(&mut rng, 0.02)
                }
            })
            .collect();
        let (x, y) = (PointCloud::new(xs).unwrap(), PointCloud::new(ys).unwrap());
        let w = WeightVector::new((0..n).map(|_| rng.random_range(0.0..=1.0)).collect()).unwrap();
        let init = gt.compose(&RigidTransform::from_axis_angle(
            random_points(&mut rng, 1, 1.0)[0],
            rng.random_range(0.0..0.3),
            random_points(&mut rng, 1, 0.1)[0],
        ));
        let (_, trace) = match refine(&init, &identity_matches(n), &x, &y, &w, &cfg) {
            Ok(v) => v,
            Err(globreg::Error::NoActiveCorrespondences) => continue,
            Err(e) => return Err(e.to_string()),
        };
        for pair in trace.energies.windows(2) {
            ensure!(pair[1] <= pair[0], "energy rose from {} to {}", pair[0], pair[1]);
        }
        steps += trace.energies.len() - 1;
    }

    let h = 1e-6;
    let mut worst = 0.0f64;
    let mut checked = 0;
    while checked < 100 {
        let n = rng.random_range(5..=80);
        let xs = random_points(&mut rng, n, 1.0);
        let ys = random_points(&mut rng, n, 1.0);
        let (x, y) = (PointCloud::new(xs.clone()).unwrap(), PointCloud::new(ys.clone()).unwrap());
        let w = WeightVector::new((0..n).map(|_| rng.random_range(0.5..=1.0)).collect()).unwrap();
        let a = Rot6D::new(random_points(&mut rng, 1, 1.0)[0], random_points(&mut rng, 1, 1.0)[0]);
        let t = random_points(&mut rng, 1, 0.5)[0];
        let cfg = RefineConfig { huber_delta: rng.random_range(0.2..1.0), ..RefineConfig::default() };
        let Ok(r) = rot6d_to_matrix(&a) else { continue };
        // stay clear of the quadratic/linear switch
        if xs.iter().zip(&ys).any(|(p, q)| ((q - (r * p + t)).norm() - cfg.huber_delta).abs() < 1e-3) {
            continue;
        }
        let m = identity_matches(n);
        let (_, g) = energy_gradient(&a, &t, &m, &x, &y, &w, &cfg).map_err(|e| e.to_string())?;
        let theta: Vec<f64> = a.a1.iter().chain(a.a2.iter()).chain(t.iter()).copied().collect();
        let eval = |th: &[f64]| {
            let a = Rot6D::new(Vector3::new(th[0], th[1], th[2]), Vector3::new(th[3], th[4], th[5]));
            energy(&a, &Vector3::new(th[6], th[7], th[8]), &m, &x, &y, &w, &cfg).unwrap()
        };
        let (mut max_diff, mut max_ref) = (0.0f64, 0.0f64);
        for k in 0..9 {
            let (mut p, mut q) = (theta.clone(), theta.clone());
            p[k] += h;
            q[k] -= h;
            let fd = (eval(&p) - eval(&q)) / (2.0 * h);
            max_diff = max_diff.max((fd - g[k]).abs());
            max_ref = max_ref.max(fd.abs());
        }
        worst = worst.max(max_diff / max_ref);
        checked += 1;
    }
    ensure!(worst <= 1e-4, "energy gradient relative error {worst:.3e}");
    Ok(format!("100 traces ({steps} steps) non-increasing; gradient relative error {worst:.2e} over 100 points"))
}

fn precomputed(weighter: WeightProvider) -> PipelineConfig {
    PipelineConfig {
        feature: FeatureConfig { descriptor: Descriptor::Precomputed },
        weighter,
        ..PipelineConfig::indoor()
    }
}

fn suite(count: u64, seed: u64, spec: SyntheticPairSpec) -> Vec<BenchmarkCase> {
    (0..count)
        .map(|k| BenchmarkCase::Synthetic {
            name: format!("pair-{k}"),
            spec: SyntheticPairSpec { seed: seed + k, ..spec },
        })
        .collect()
}

fn check_recall_monotone(report: &BenchmarkReport) -> Result<(), String> {
    let re_grid: Vec<f64> = (0..=60).map(|k| k as f64 * 0.5).collect();
    let te_grid: Vec<f64> = (0..=60).map(|k| k as f64 * 0.02).collect();
    for &te in &te_grid {
        for pair in re_grid.windows(2) {
            ensure!(report.recall_at(pair[0], te) <= report.recall_at(pair[1], te), "recall drops in RE at te={te}");
        }
    }
    for &re in &re_grid {
        for pair in te_grid.windows(2) {
            ensure!(report.recall_at(re, pair[0]) <= report.recall_at(re, pair[1]), "recall drops in TE at re={re}");
        }
    }
    for curve in [&report.curves.rotation, &report.curves.translation] {
        ensure!(curve.windows(2).all(|p| p[0].recall <= p[1].recall), "recall curve not monotone");
    }
    Ok(())
}

fn robustness(reports: &mut Vec<BenchmarkReport>) -> Outcome {
    let spec = SyntheticPairSpec { n_points: 1000, noise_sigma: 0.0, outlier_ratio: 0.7, ..SyntheticPairSpec::default() };
    let cases = suite(50, 7000, spec);
    let clock = Instant::now();
    let report = run_benchmark(&cases, &precomputed(oracle_weighter()), &SuccessThresholds::INDOOR).map_err(|e| e.to_string())?;
    let elapsed = clock.elapsed().as_secs_f64();

    let baseline_cfg = precomputed(WeightProvider::Uniform);
    let mut baseline_hits = 0;
    for k in 0..50 {
        let pair = generate_pair(&SyntheticPairSpec { seed: 7000 + k, ..spec }).map_err(|e| e.to_string())?;
        if let Ok(est) = register_unweighted(&pair.source, &pair.target, &baseline_cfg) {
            baseline_hits += PairMetrics::evaluate(&est, &pair.ground_truth, &SuccessThresholds::INDOOR).success as usize;
        }
    }
    let baseline = baseline_hits as f64 / 50.0;
    let line = format!(
        "pipeline recall {:.2} (mean RE {:.3}°, TE {:.2} cm), unweighted recall {:.2}, {:.1} s for 50 pairs",
        report.recall,
        report.mean_re_deg.unwrap_or(f64::NAN),
        report.mean_te_m.unwrap_or(f64::NAN) * 100.0,
        baseline,
        elapsed
    );
    reports.push(report.clone());
    ensure!(report.recall == 1.0, "{line}");
    ensure!(baseline <= 0.1, "{line}");
    ensure!(elapsed < 60.0, "{line}");
    Ok(line)
}

fn safeguard(reports: &mut Vec<BenchmarkReport>) -> Outcome {
    // every pair must divert when the weighter outputs zeros
    let spec = SyntheticPairSpec { n_points: 1000, overlap_ratio: 1.0, outlier_ratio: 0.8, ..SyntheticPairSpec::default() };
    let cfg = precomputed(WeightProvider::Constant(0.0));
    let report = run_benchmark(&suite(20, 8000, spec), &cfg, &SuccessThresholds::INDOOR).map_err(|e| e.to_string())?;
    ensure!(
        report.branch_counts.safeguard == report.pair_count,
        "{} of {} pairs took the safeguard",
        report.branch_counts.safeguard,
        report.pair_count
    );
    let pipeline_worst = report
        .pairs
        .iter()
        .map(|r| (r.re_deg.unwrap_or(f64::INFINITY), r.te_m.unwrap_or(f64::INFINITY)))
        .fold((0.0f64, 0.0f64), |a, b| (a.0.max(b.0), a.1.max(b.1)));
    reports.push(report);

    // the estimator itself: 200 putative pairs, 80% outliers, 10⁴ iterations, 2 cm threshold
    let ransac_cfg = RansacConfig { max_iterations: 10_000, inlier_threshold: 0.02, ..RansacConfig::default() };
    let mut worst = (0.0f64, 0.0f64);
    for k in 0..20 {
        let pair = generate_pair(&SyntheticPairSpec {
            n_points: 200,
            overlap_ratio: 1.0,
            noise_sigma: 0.005,
            outlier_ratio: 0.8,
            seed: 9000 + k,
            ..SyntheticPairSpec::default()
        })
        .map_err(|e| e.to_string())?;
        let matches = match_nearest(&pair.source, &pair.target).map_err(|e| e.to_string())?;
        let outliers = pair.construction_labels(&matches).iter().filter(|&&l| !l).count();
        ensure!(matches.len() == 200 && outliers == 160, "expected 160/200 outliers, got {outliers}/{}", matches.len());
        let est = ransac_register(&matches, &pair.source, &pair.target, &RansacConfig { seed: k, ..ransac_cfg })
            .map_err(|e| e.to_string())?;
        let m = PairMetrics::evaluate(&est.transform, &pair.ground_truth, &SuccessThresholds::INDOOR);
        worst = (worst.0.max(m.re_deg()), worst.1.max(m.te));
    }
    let line = format!(
        "20/20 zero-weight pairs on safeguard (worst RE {:.3}°, TE {:.2} cm); RANSAC 80% outliers worst RE {:.3}°, TE {:.2} cm",
        pipeline_worst.0,
        pipeline_worst.1 * 100.0,
        worst.0,
        worst.1 * 100.0
    );
    ensure!(pipeline_worst.0 <= 0.5 && pipeline_worst.1 <= 0.01, "{line}");
    ensure!(worst.0 <= 0.5 && worst.1 <= 0.01, "{line}");
    Ok(line)
}

fn metric_identities(reports: &[BenchmarkReport]) -> Outcome {
    let mut worst = 0.0f64;
    for k in 1..=100 {
        let theta = k as f64 * std::f64::consts::PI / 101.0;
        let rz = RigidTransform::rot_z(theta);
        worst = worst.max((rotation_error(&Matrix3::identity(), rz.rotation()) - theta).abs());
    }
    ensure!(worst <= 1e-9, "max |RE − θ| = {worst:.3e}");
    ensure!(!reports.is_empty(), "no reports to check");
    for r in reports {
        check_recall_monotone(r)?;
    }
    Ok(format!("max |RE(I, rot_z θ) − θ| = {worst:.2e} over 100 θ; recall monotone on {} reports", reports.len()))
}

fn strip_timing(v: &mut Value) {
    match v {
        Value::Object(map) => {
            map.remove("timing");
            map.values_mut().for_each(strip_timing);
        }
        Value::Array(items) => items.iter_mut().for_each(strip_timing),
        _ => {}
    }
}

fn determinism() -> Outcome {
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let suite = dir.path().join("suite.cfg");
    fs::write(
        &suite,
        "synthetic count=8 seed=31 n_points=800 overlap=0.6 noise=0.005 outliers=0.5\n\
         synthetic count=4 seed=77 n_points=600 outliers=0.9\n",
    )
    .map_err(|e| e.to_string())?;
    let cfg = dir.path().join("run.cfg");
    fs::write(&cfg, "preset = indoor\ndescriptor = precomputed\nweighter = oracle\n").map_err(|e| e.to_string())?;

    let run = |tag: &str, threads: &str| -> Result<(String, Vec<u8>), String> {
        let report = dir.path().join(format!("report-{tag}.json"));
        let curves = dir.path().join(format!("curves-{tag}.csv"));
        let out = Command::new(env!("CARGO_BIN_EXE_globreg"))
            .args(["benchmark", "--suite"])
            .arg(&suite)
            .arg("--config")
            .arg(&cfg)
            .arg("--report")
            .arg(&report)
            .arg("--curves")
            .arg(&curves)
            .env("DGR_THREADS", threads)
            .output()
            .map_err(|e| e.to_string())?;
        ensure!(out.status.success(), "benchmark exited with {:?}", out.status.code());
        let mut doc: Value = serde_json::from_slice(&fs::read(&report).map_err(|e| e.to_string())?).map_err(|e| e.to_string())?;
        strip_timing(&mut doc);
        Ok((doc.to_string(), fs::read(&curves).map_err(|e| e.to_string())?))
    };
    let (a, ca) = run("a", "4")?;
    let (b, cb) = run("b", "4")?;
    let (c, cc) = run("c", "1")?;
    ensure!(a == b && ca == cb, "two identical runs differ");
    ensure!(a == c && ca == cc, "result depends on the thread count");
    Ok(format!("3 runs of a 12-pair suite agree byte for byte ({} report bytes without timing)", a.len()))
}

fn main() -> ExitCode {
    let mut reports = Vec::new();
    let criteria: Vec<(&str, Criterion)> = vec![
        ("closed-form exactness", Box::new(|_| closed_form_exactness())),
        ("classical Procrustes equivalence", Box::new(|_| classical_equivalence())),
        ("reflection handling", Box::new(|_| reflection_handling())),
        ("weight gradient", Box::new(|_| weight_gradient())),
        ("6D rotation round trip", Box::new(|_| rotation_representation())),
        ("refinement energy", Box::new(|_| refinement_energy())),
        ("robustness at 70% outliers", Box::new(robustness)),
        ("safeguard branch", Box::new(safeguard)),
        ("metric identities", Box::new(|r: &mut Vec<BenchmarkReport>| metric_identities(r))),
        ("benchmark determinism", Box::new(|_| determinism())),
    ];
    let mut failures = 0;
    for (k, (name, check)) in criteria.into_iter().enumerate() {
        let outcome = catch_unwind(AssertUnwindSafe(|| check(&mut reports)))
            .unwrap_or_else(|_| Err("panicked".to_string()));
        match outcome {
            Ok(detail) => println!("PASS  {:>2}  {name}: {detail}", k + 1),
            Err(detail) => {
                failures += 1;
                println!("FAIL  {:>2}  {name}: {detail}", k + 1);
            }
        }
    }
    println!("acceptance: {} passed, {failures} failed", 10 - failures);
    if failures == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
