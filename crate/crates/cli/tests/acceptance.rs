//! Acceptance suite. Prints one PASS/FAIL line per criterion and exits
//! nonzero if any criterion fails.

use std::panic::{catch_unwind, AssertUnwindSafe};
use std::process::Command;
use std::time::{Duration, Instant};

use capskin::calibration::{
    collect_dataset, compute_snr, export_jsonl, import_jsonl, parse_jsonl, to_jsonl_string, BaselineStats,
    CalibrationDataset, CollectionPlan, PointLog, SamplingStrategy,
};
use capskin::evalharness::{localization_error, run_size_sweep, ExperimentConfig, SweepReport};
use capskin::geometry::{discretize_surface, semicone_mesh, SemiconeSpec, SurfaceMesh};
use capskin::locnet::{self, grad, mse_loss, train, Activation, TrainConfig, HIDDEN_DIM, INPUT_DIM, OUTPUT_DIM};
use capskin::seed::derive_seed;
use capskin::skinsim::{build_semicone_skin, CapacitanceFrame, NoiseSpec, SkinConfig, SENSOR_COUNT};
use capskin::{Localizer, Localizer32, Mesh, NormStats, Params, PointSet, Vec3f};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use tempfile::TempDir;

type Outcome = Result<String, String>;

struct Suite {
    failed: usize,
}

impl Suite {
    fn run(&mut self, name: &str, f: impl FnOnce() -> Outcome) {
        let start = Instant::now();
        let outcome = catch_unwind(AssertUnwindSafe(f)).unwrap_or_else(|e| {
            let msg = e
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| e.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_default();
            Err(format!("panicked: {msg}"))
        });
        let secs = start.elapsed().as_secs_f64();
        match outcome {
            Ok(detail) => println!("PASS {name}: {detail} [{secs:.2}s]"),
            Err(detail) => {
                self.failed += 1;
                println!("FAIL {name}: {detail} [{secs:.2}s]");
            }
        }
    }
}

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

fn within(start: Instant, limit: Duration) -> Result<(), String> {
    let t = start.elapsed();
    ensure(t < limit, || format!("took {:.2}s, limit {}s", t.as_secs_f64(), limit.as_secs()))
}

fn param_count() -> usize {
    HIDDEN_DIM * INPUT_DIM + HIDDEN_DIM + OUTPUT_DIM * HIDDEN_DIM + OUTPUT_DIM
}

fn param_mut(p: &mut Params, k: usize) -> &mut f64 {
    let (n1, n2, n3) = (HIDDEN_DIM * INPUT_DIM, HIDDEN_DIM, OUTPUT_DIM * HIDDEN_DIM);
    match k {
        k if k < n1 => &mut p.w1[k],
        k if k < n1 + n2 => &mut p.b1[k - n1],
        k if k < n1 + n2 + n3 => &mut p.w2[k - n1 - n2],
        k => &mut p.b2[k - n1 - n2 - n3],
    }
}

/// Hidden unit whose pre-activation the entry feeds, for first-layer entries.
fn hidden_unit(k: usize) -> Option<usize> {
    let n1 = HIDDEN_DIM * INPUT_DIM;
    if k < n1 {
        Some(k / INPUT_DIM)
    } else if k < n1 + HIDDEN_DIM {
        Some(k - n1)
    } else {
        None
    }
}

fn pre_activations(p: &Params, x: &[f64]) -> Vec<f64> {
    (0..HIDDEN_DIM)
        .map(|h| p.b1[h] + (0..INPUT_DIM).map(|k| p.w1[h * INPUT_DIM + k] * x[k]).sum::<f64>())
        .collect()
}

fn gradient_check() -> Outcome {
    let start = Instant::now();
    let h = 1e-5;
    let mut rng = ChaCha8Rng::seed_from_u64(1001);
    let (mut checked, mut guarded, mut worst) = (0usize, 0usize, 0.0f64);
    let instances = 24;
    for instance in 0..instances {
        let act = if instance % 2 == 0 { Activation::Relu } else { Activation::Tanh };
        let batch = 2 + instance % 5;
        let (p, norm, imgs, xs) = loop {
            let p = Params::init(rng.random(), 1.5, act);
            let norm = NormStats {
                mean: (0..INPUT_DIM).map(|_| rng.random_range(-2.0..2.0)).collect(),
                scale: (0..INPUT_DIM).map(|_| rng.random_range(0.5..3.0)).collect(),
            };
            let imgs: Vec<Vec<f64>> =
                (0..batch).map(|_| (0..INPUT_DIM).map(|_| rng.random_range(-5.0..15.0)).collect()).collect();
            let xs: Vec<Vec<f64>> = imgs.iter().map(|i| norm.standardize(i)).collect();
            // A step of h must not carry a pre-activation across the kink
            // unless the entry is already excluded by the 1e-6 guard.
            let clean = act == Activation::Tanh
                || xs.iter().all(|x| {
                    let reach = 2.0 * h * x.iter().fold(1.0f64, |m, v| m.max(v.abs()));
                    pre_activations(&p, x).iter().all(|z| z.abs() < 1e-6 || z.abs() > reach)
                });
            if clean {
                break (p, norm, imgs, xs);
            }
        };
        let targets: Vec<Vec3f> = imgs
            .iter()
            .map(|i| {
                let y = locnet::forward(&p, &norm, i).unwrap();
                y + Vec3f::new(rng.random_range(-3.0..3.0), rng.random_range(-3.0..3.0), rng.random_range(-3.0..3.0))
            })
            .collect();
        let pres: Vec<Vec<f64>> = xs.iter().map(|x| pre_activations(&p, x)).collect();
        let loss = mse_loss(&p, &norm, &imgs, &targets).unwrap();
        let noise = f64::EPSILON * loss.max(1.0) / h;
        let analytic: Vec<f64> = grad(&p, &norm, &imgs, &targets).unwrap().iter().collect();
        for (k, &a) in analytic.iter().enumerate().take(param_count()) {
            if act == Activation::Relu && hidden_unit(k).is_some_and(|u| pres.iter().any(|z| z[u].abs() < 1e-6)) {
                guarded += 1;
                continue;
            }
            let mut plus = p.clone();
            *param_mut(&mut plus, k) += h;
            let mut minus = p.clone();
            *param_mut(&mut minus, k) -= h;
            let fd = (mse_loss(&plus, &norm, &imgs, &targets).unwrap() - mse_loss(&minus, &norm, &imgs, &targets).unwrap())
                / (2.0 * h);
            let scale = a.abs().max(fd.abs());
            if scale >= 1e4 * noise {
                let rel = (a - fd).abs() / scale;
                worst = worst.max(rel);
                ensure(rel < 1e-4, || format!("instance {instance} entry {k}: analytic {a} fd {fd} rel {rel:.3e}"))?;
                checked += 1;
            } else {
                ensure((a - fd).abs() < 10.0 * noise, || format!("instance {instance} entry {k}: analytic {a} fd {fd}"))?;
            }
        }
    }
    ensure(checked > 0, || "nothing checked".into())?;
    within(start, Duration::from_secs(10))?;
    Ok(format!(
        "{instances} instances, {checked} entries at rel < 1e-4 (worst {worst:.2e}), {guarded} kink-guarded"
    ))
}

fn projection_oracle() -> Outcome {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(1002);
    let points: Vec<Vec3f> = (0..5000)
        .map(|_| Vec3f::new(rng.random_range(0.0..142.0), rng.random_range(-82.0..82.0), rng.random_range(0.0..81.0)))
        .collect();
    // A network with zero weights outputs its last bias, so predict() snaps
    // exactly the chosen query.
    let mut model = Localizer {
        params: Params::zeros(Activation::Relu),
        norm: NormStats::identity(),
        surface: PointSet::new(points.clone(), 3.0),
        train_loss_history: vec![0.0],
        warnings: vec![],
    };
    let image = vec![0.0; INPUT_DIM];
    for q in 0..500 {
        let query =
            Vec3f::new(rng.random_range(-20.0..162.0), rng.random_range(-102.0..102.0), rng.random_range(-20.0..101.0));
        model.params.b2 = vec![query.x, query.y, query.z];
        let hit = model.predict(&image).unwrap();
        let mut best = (0, f64::INFINITY);
        for (i, p) in points.iter().enumerate() {
            let d = (p.x - query.x).powi(2) + (p.y - query.y).powi(2) + (p.z - query.z).powi(2);
            if d < best.1 {
                best = (i, d);
            }
        }
        ensure(hit.index == best.0, || format!("query {q}: index {} vs scan {}", hit.index, best.0))?;
    }
    within(start, Duration::from_secs(5))?;
    Ok("500 queries x 5000 points, all indices equal the exhaustive scan".into())
}

fn snr_transcription() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(1003);
    let s0: Vec<f64> = (0..SENSOR_COUNT).map(|_| rng.random_range(900.0..1100.0)).collect();
    let sigma0: Vec<f64> = (0..SENSOR_COUNT).map(|_| rng.random_range(0.5..4.0)).collect();
    let raw: Vec<Vec<Vec<f64>>> = (0..6)
        .map(|_| {
            (0..4)
                .map(|_| (0..SENSOR_COUNT).map(|i| s0[i] - rng.random_range(-8.0..60.0)).collect())
                .collect()
        })
        .collect();
    let logs = raw
        .iter()
        .map(|frames| {
            let frames = frames.iter().map(|f| CapacitanceFrame::new(f.clone()).unwrap()).collect();
            PointLog::new(Vec3f::zero(), frames).unwrap()
        })
        .collect();
    let baseline = BaselineStats {
        s0: s0.clone(),
        sigma0: sigma0.clone(),
        frame_count: 50,
    };
    let ds = CalibrationDataset::new(logs, baseline, SamplingStrategy::RandomEdge, 0).unwrap();
    let got = compute_snr(&ds);
    let mut worst = 0.0f64;
    for i in 0..SENSOR_COUNT {
        // 20 log10((max over logs of mean drop) / sigma0), drop = s0 - reading.
        let peak = raw
            .iter()
            .map(|frames| frames.iter().map(|f| s0[i] - f[i]).sum::<f64>() / frames.len() as f64)
            .fold(f64::NEG_INFINITY, f64::max);
        let want = (peak > 0.0).then(|| 20.0 * (peak / sigma0[i]).log10());
        match (got.per_sensor_db[i], want) {
            (Some(g), Some(w)) => {
                worst = worst.max((g - w).abs());
                ensure((g - w).abs() < 1e-9, || format!("sensor {i}: {g} vs {w}"))?;
            }
            (None, None) => {}
            (g, w) => return Err(format!("sensor {i}: {g:?} vs {w:?}")),
        }
    }

    let frame = CapacitanceFrame::new((0..SENSOR_COUNT).map(|i| if i == 0 { 990.0 } else { 1000.0 }).collect()).unwrap();
    let exact = CalibrationDataset::new(
        vec![PointLog::new(Vec3f::zero(), vec![frame; 3]).unwrap()],
        BaselineStats {
            s0: vec![1000.0; SENSOR_COUNT],
            sigma0: vec![1.0; SENSOR_COUNT],
            frame_count: 50,
        },
        SamplingStrategy::RandomEdge,
        0,
    )
    .unwrap();
    let snr = compute_snr(&exact);
    ensure(snr.per_sensor_db[0] == Some(20.0), || format!("drop 10, sigma 1 gave {:?}", snr.per_sensor_db[0]))?;
    ensure(snr.per_sensor_db[1..].iter().all(Option::is_none), || "zero drop must be undefined".into())?;
    Ok(format!("64 sensors within {worst:.1e} dB of direct evaluation; drop 10 / sigma 1 gives exactly 20 dB"))
}

fn nested_snr(sweep: &SweepReport) -> Outcome {
    for &seed in &sweep.config.seeds {
        let cells: Vec<_> = sweep.snr.per_cell.iter().filter(|c| c.seed == seed).collect();
        for w in cells.windows(2) {
            for (i, (a, b)) in w[0].per_sensor_db.iter().zip(&w[1].per_sensor_db).enumerate() {
                if let Some(a) = a {
                    let ok = b.is_some_and(|b| b >= *a);
                    ensure(ok, || format!("seed {seed} sensor {i}: {a} -> {b:?} at {} logs", w[1].train_size))?;
                }
            }
        }
    }
    let fit = sweep.snr.fit.as_ref().ok_or("no fit")?;
    ensure(fit.r_defined && fit.pearson_r >= 0.0, || format!("{fit:?}"))?;
    let means: Vec<String> = sweep
        .snr
        .per_size
        .iter()
        .map(|s| format!("{}:{:.2}", s.train_size, s.mean_snr_db.unwrap_or(f64::NAN)))
        .collect();
    Ok(format!(
        "per-sensor SNR non-decreasing; mean dB {}; slope {:.4} dB/log, r {:.3}",
        means.join(" "),
        fit.slope,
        fit.pearson_r
    ))
}

fn error_trend(sweep: &SweepReport) -> Outcome {
    let e20 = sweep.errors.size(20).ok_or("no 20-log row")?;
    let e100 = sweep.errors.size(100).ok_or("no 100-log row")?;
    ensure(sweep.config.seeds.len() == 5, || "expected 5 replicates".into())?;
    ensure(e100.mean_error_mm <= e20.mean_error_mm, || {
        format!("{:.2} mm at 100 logs vs {:.2} mm at 20", e100.mean_error_mm, e20.mean_error_mm)
    })?;
    let rows: Vec<String> = sweep
        .errors
        .per_size
        .iter()
        .map(|s| format!("{}:{:.1}±{:.1}", s.train_size, s.mean_error_mm, s.std_error_mm))
        .collect();
    Ok(format!("mean error mm {}", rows.join(" ")))
}

struct Session {
    mesh: Mesh,
    training: CalibrationDataset,
    validation: CalibrationDataset,
}

/// Replicate 0 of the default sweep, collected without the harness.
fn default_session() -> Session {
    let mesh: Mesh = semicone_mesh(&SemiconeSpec::default()).unwrap();
    let c = ExperimentConfig::default();
    let grid = build_semicone_skin(&mesh, c.layout_seed, &SkinConfig::default()).unwrap();
    let noise = |name| NoiseSpec::new(c.sigma_read, derive_seed(0, name)).unwrap();
    let training = collect_dataset(&mesh, &grid, &CollectionPlan::new(c.strategy, 100), &noise("calibration")).unwrap();
    let validation =
        collect_dataset(&mesh, &grid, &CollectionPlan::new(SamplingStrategy::RandomEdge, 20), &noise("validation")).unwrap();
    Session {
        mesh,
        training,
        validation,
    }
}

fn snr_gate(s: &Session) -> Outcome {
    let db = compute_snr(&s.training).mean_db.ok_or("mean SNR undefined")?;
    ensure(db < 30.0, || format!("mean SNR {db:.3} dB"))?;
    Ok(format!("mean SNR {db:.3} dB over 100 logs"))
}

// Recorded from the first verified run; replicate 0 of the default sweep.
const GOLDEN_MEAN_MM: f64 = 13.600634673717172;
const GOLDEN_STD_MM: f64 = 8.798822326865;

fn accuracy(s: &Session) -> Outcome {
    let start = Instant::now();
    let config = TrainConfig {
        seed: derive_seed(0, "train"),
        ..TrainConfig::default()
    };
    ensure(config.epochs == 2000, || format!("default epochs {}", config.epochs))?;
    let surface = discretize_surface(&s.mesh, 1.0).unwrap();
    let model: Localizer = train(&s.training, &surface, &config).unwrap();
    let err = localization_error(&model, &s.validation).unwrap();
    within(start, Duration::from_secs(120))?;
    ensure(err.mean_error_mm < 25.0, || format!("{:.3} mm", err.mean_error_mm))?;
    ensure(
        (err.mean_error_mm - GOLDEN_MEAN_MM).abs() < 1e-9 && (err.std_error_mm - GOLDEN_STD_MM).abs() < 1e-9,
        || format!("{} ± {} drifted from golden", err.mean_error_mm, err.std_error_mm),
    )?;
    Ok(format!(
        "{:.3} ± {:.3} mm at 100 logs, 2000 epochs, single thread (golden within 1e-9)",
        err.mean_error_mm, err.std_error_mm
    ))
}

fn cli_determinism() -> Outcome {
    let dirs = [TempDir::new().unwrap(), TempDir::new().unwrap()];
    for d in &dirs {
        let out = Command::new(env!("CARGO_BIN_EXE_capskin"))
            .args(["--seed", "17", "--out"])
            .arg(d.path())
            .arg("sweep")
            .output()
            .map_err(|e| e.to_string())?;
        ensure(out.status.success(), || String::from_utf8_lossy(&out.stderr).into_owned())?;
    }
    let mut sizes = Vec::new();
    for name in ["sweep.csv", "sweep.json"] {
        let a = std::fs::read(dirs[0].path().join(name)).map_err(|e| e.to_string())?;
        let b = std::fs::read(dirs[1].path().join(name)).map_err(|e| e.to_string())?;
        ensure(a == b, || format!("{name} differs between runs"))?;
        sizes.push(format!("{name} {} bytes", a.len()));
    }
    Ok(format!("two full sweeps, identical {}", sizes.join(", ")))
}

fn round_trips(s: &Session) -> Outcome {
    let dir = TempDir::new().unwrap();
    let parsed = parse_jsonl(&to_jsonl_string(&s.training)).map_err(|e| e.to_string())?;
    ensure(parsed == s.training, || "JSONL text round-trip changed the dataset".into())?;
    let path = dir.path().join("d.jsonl");
    export_jsonl(&s.validation, &path).map_err(|e| e.to_string())?;
    ensure(import_jsonl(&path).map_err(|e| e.to_string())? == s.validation, || "JSONL file round-trip".into())?;

    let config = TrainConfig {
        epochs: 50,
        ..TrainConfig::default()
    };
    let surface = discretize_surface(&s.mesh, 2.0).unwrap();
    let model: Localizer = train(&s.training, &surface, &config).unwrap();
    let path = dir.path().join("m.json");
    locnet::save(&model, &path).map_err(|e| e.to_string())?;
    let loaded: Localizer = locnet::load(&path).map_err(|e| e.to_string())?;
    ensure(loaded == model, || "model file round-trip changed the model".into())?;
    for img in s.validation.images() {
        ensure(loaded.predict(img.values()).unwrap() == model.predict(img.values()).unwrap(), || {
            "prediction changed after reload".into()
        })?;
    }

    let mesh32: SurfaceMesh<f32> = semicone_mesh(&SemiconeSpec::default()).unwrap();
    let model32: Localizer32 = train(&s.training, &discretize_surface(&mesh32, 2.0).unwrap(), &config).unwrap();
    locnet::save(&model32, &path).map_err(|e| e.to_string())?;
    let loaded32: Localizer32 = locnet::load(&path).map_err(|e| e.to_string())?;
    ensure(loaded32 == model32, || "f32 model file round-trip".into())?;
    Ok("JSONL (text and file) and model files (f64, f32) reload equal; predictions unchanged".into())
}

fn main() {
    let mut suite = Suite { failed: 0 };
    suite.run("gradient correctness", gradient_check);
    suite.run("projection oracle", projection_oracle);
    suite.run("snr transcription", snr_transcription);

    let sweep = run_size_sweep(&semicone_mesh(&SemiconeSpec::default()).unwrap(), &ExperimentConfig::default());
    match &sweep {
        Ok(sweep) => {
            suite.run("nested snr monotonicity", || nested_snr(sweep));
            suite.run("error vs size trend", || error_trend(sweep));
        }
        Err(e) => {
            for name in ["nested snr monotonicity", "error vs size trend"] {
                suite.run(name, || Err(format!("sweep failed: {e}")));
            }
        }
    }

    let session = default_session();
    suite.run("simulator realism gate", || snr_gate(&session));
    suite.run("desk-scale accuracy", || accuracy(&session));
    suite.run("sweep determinism", cli_determinism);
    suite.run("round-trips", || round_trips(&session));

    if suite.failed > 0 {
        println!("{} criteria failed", suite.failed);
        std::process::exit(1);
    }
    println!("all criteria passed");
}
