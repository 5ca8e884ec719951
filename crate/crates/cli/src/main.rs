//! `capskin`: generate the fixture mesh, collect simulated calibration data,
//! train and query localizers, and run dataset-size sweeps.
//!
//! Exit codes: 0 success, 1 runtime failure, 2 usage or validation error,
//! 3 I/O error, 4 malformed input file.

mod config;
mod error;

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use capskin::calibration::{collect_dataset, compute_snr, export_jsonl, import_jsonl, sensor_image, SnrReport};
use capskin::evalharness::{emit_report, report_to_string, run_size_sweep, ReportFormat};
use capskin::geometry::{discretize_surface, semicone_mesh, SemiconeSpec};
use capskin::locnet::{self, train, INPUT_DIM};
use capskin::skinsim::build_semicone_skin;
use capskin::Localizer;

use config::RunConfig;
use error::CliError;

#[derive(Parser)]
#[command(name = "capskin", version, about = "Contact localization on a simulated curved capacitive skin")]
struct Cli {
    /// Global seed; every sub-seed is derived from it.
    #[arg(long, global = true)]
    seed: Option<u64>,

    /// Flat TOML config file. Flags override its values.
    #[arg(long, global = true, value_name = "FILE")]
    config: Option<PathBuf>,

    /// Output directory (default: current directory).
    #[arg(long, global = true, value_name = "DIR")]
    out: Option<PathBuf>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Write the procedural semicone mesh to <out>/semicone.obj.
    Genmesh {
        /// Depth, width and height in mm.
        #[arg(long, num_args = 3, value_names = ["DEPTH", "WIDTH", "HEIGHT"])]
        dims: Option<Vec<f64>>,
    },
    /// Collect a simulated calibration dataset into <out>/dataset.jsonl.
    Calibrate {
        #[command(flatten)]
        sim: SimArgs,
        /// Calibration strategy: random_edge (random) or even_spacing (even).
        #[arg(long)]
        strategy: Option<String>,
        /// Number of point logs.
        #[arg(long)]
        n: Option<usize>,
    },
    /// Print per-sensor and mean SNR of a dataset.
    Snr {
        /// Dataset JSONL (default: <out>/dataset.jsonl).
        #[arg(long)]
        dataset: Option<PathBuf>,
    },
    /// Train a localizer on a dataset and save it to <out>/model.json.
    Train {
        /// Dataset JSONL (default: <out>/dataset.jsonl).
        #[arg(long)]
        dataset: Option<PathBuf>,
        /// Model output path (default: <out>/model.json).
        #[arg(long)]
        model: Option<PathBuf>,
        /// Mesh file whose surface constrains predictions (default: procedural semicone).
        #[arg(long)]
        mesh: Option<PathBuf>,
        #[command(flatten)]
        train: TrainArgs,
    },
    /// Predict a touch location and print `x y z raw_distance_mm`.
    Predict {
        /// Model file (default: <out>/model.json).
        #[arg(long)]
        model: Option<PathBuf>,
        /// 64 sensor image values separated by commas or whitespace.
        #[arg(long, conflicts_with = "dataset", allow_hyphen_values = true)]
        image: Option<String>,
        /// Dataset JSONL to take the image from.
        #[arg(long, requires = "log")]
        dataset: Option<PathBuf>,
        /// Zero-based point log index within --dataset.
        #[arg(long)]
        log: Option<usize>,
    },
    /// Run the dataset-size sweep; writes <out>/sweep.csv and <out>/sweep.json.
    Sweep {
        #[command(flatten)]
        sim: SimArgs,
        #[command(flatten)]
        train: TrainArgs,
        /// Training set sizes, ascending.
        #[arg(long, num_args = 1..)]
        sizes: Option<Vec<usize>>,
        /// Replicate count.
        #[arg(long)]
        replicates: Option<usize>,
        /// Validation logs per replicate.
        #[arg(long)]
        validation_size: Option<usize>,
        /// Training calibration strategy.
        #[arg(long)]
        strategy: Option<String>,
        /// nested or independent.
        #[arg(long)]
        mode: Option<String>,
    },
}

#[derive(Args)]
struct SimArgs {
    /// Mesh file (default: procedural semicone).
    #[arg(long)]
    mesh: Option<PathBuf>,
    /// Read noise standard deviation, raw units.
    #[arg(long)]
    sigma_read: Option<f64>,
    /// Frames per point log.
    #[arg(long)]
    frames: Option<usize>,
}

#[derive(Args)]
struct TrainArgs {
    #[arg(long)]
    epochs: Option<usize>,
    #[arg(long)]
    learning_rate: Option<f64>,
    /// relu or tanh.
    #[arg(long)]
    activation: Option<String>,
    #[arg(long)]
    init_scale: Option<f64>,
    /// Surface discretization spacing, mm.
    #[arg(long)]
    surface_spacing: Option<f64>,
}

impl SimArgs {
    fn apply(&self, c: &mut RunConfig) {
        c.mesh = self.mesh.clone();
        c.sigma_read = self.sigma_read;
        c.frames = self.frames;
    }
}

impl TrainArgs {
    fn apply(&self, c: &mut RunConfig) {
        c.epochs = self.epochs;
        c.learning_rate = self.learning_rate;
        c.activation = self.activation.clone();
        c.init_scale = self.init_scale;
        c.surface_spacing = self.surface_spacing;
    }
}

fn flag_config(cli: &Cli) -> RunConfig {
    let mut c = RunConfig {
        seed: cli.seed,
        out: cli.out.clone(),
        ..RunConfig::default()
    };
    match &cli.command {
        Command::Genmesh { dims } => c.dims = dims.as_ref().map(|d| [d[0], d[1], d[2]]),
        Command::Calibrate { sim, strategy, n } => {
            sim.apply(&mut c);
            c.strategy = strategy.clone();
            c.n = *n;
        }
        Command::Train { mesh, train, .. } => {
            c.mesh = mesh.clone();
            train.apply(&mut c);
        }
        Command::Sweep {
            sim,
            train,
            sizes,
            replicates,
            validation_size,
            strategy,
            mode,
        } => {
            sim.apply(&mut c);
            train.apply(&mut c);
            c.sizes = sizes.clone();
            c.replicates = *replicates;
            c.validation_size = *validation_size;
            c.strategy = strategy.clone();
            c.mode = mode.clone();
        }
        Command::Snr { .. } | Command::Predict { .. } => {}
    }
    c
}

fn out_path(dir: &Path, name: &str) -> Result<PathBuf, CliError> {
    std::fs::create_dir_all(dir).map_err(|e| CliError::io(format!("cannot create {}: {e}", dir.display())))?;
    Ok(dir.join(name))
}

fn print_snr(snr: &SnrReport) {
    match snr.mean_db {
        Some(db) => println!("mean SNR: {db:.3} dB ({}/64 sensors defined)", snr.defined_count()),
        None => println!("mean SNR: undefined (0/64 sensors defined)"),
    }
}

fn run(cli: Cli) -> Result<(), CliError> {
    let file = match &cli.config {
        Some(path) => RunConfig::load(path)?,
        None => RunConfig::default(),
    };
    let cfg = flag_config(&cli).or(file);
    let out = cfg.out_dir();

    match &cli.command {
        Command::Genmesh { .. } => {
            let spec = SemiconeSpec::with_dims(cfg.dims());
            let mesh: capskin::Mesh = semicone_mesh(&spec)?;
            let path = out_path(&out, "semicone.obj")?;
            mesh.save(&path)?;
            println!(
                "wrote {} ({} vertices, {} triangles)",
                path.display(),
                mesh.vertices().len(),
                mesh.triangles().len()
            );
        }
        Command::Calibrate { .. } => {
            let plan = cfg.plan()?;
            let mesh = cfg.load_mesh()?;
            let grid = build_semicone_skin(&mesh, cfg.layout_seed(), &cfg.skin()?)?;
            let dataset = collect_dataset(&mesh, &grid, &plan, &cfg.noise("calibration")?)?;
            let path = out_path(&out, "dataset.jsonl")?;
            export_jsonl(&dataset, &path)?;
            grid.save(out.join("skin.json"))?;
            println!("wrote {} ({} point logs, {})", path.display(), dataset.len(), plan.strategy.as_str());
            print_snr(&compute_snr(&dataset));
        }
        Command::Snr { dataset } => {
            let path = dataset.clone().unwrap_or_else(|| out.join("dataset.jsonl"));
            let dataset = import_jsonl(&path)?;
            let snr = compute_snr(&dataset);
            for (i, db) in snr.per_sensor_db.iter().enumerate() {
                match db {
                    Some(db) => println!("sensor {i:2}: {db:.3} dB"),
                    None => println!("sensor {i:2}: undefined"),
                }
            }
            print_snr(&snr);
        }
        Command::Train { dataset, model, .. } => {
            let config = cfg.train()?;
            let data_path = dataset.clone().unwrap_or_else(|| out.join("dataset.jsonl"));
            let dataset = import_jsonl(&data_path)?;
            let mesh = cfg.load_mesh()?;
            let surface = discretize_surface(&mesh, cfg.surface_spacing())?;
            let localizer: Localizer = train(&dataset, &surface, &config)?;
            let model_path = match model {
                Some(p) => p.clone(),
                None => out_path(&out, "model.json")?,
            };
            locnet::save(&localizer, &model_path)?;
            let last = localizer.train_loss_history.last().copied().unwrap_or(f64::NAN);
            println!("wrote {}", model_path.display());
            println!("final loss: {last:.6}");
        }
        Command::Predict {
            model,
            image,
            dataset,
            log,
        } => {
            let values = match (image, dataset) {
                (Some(text), _) => parse_image(text)?,
                (None, Some(path)) => {
                    let ds = import_jsonl(path)?;
                    let k = log.expect("clap enforces --log with --dataset");
                    let entry = ds
                        .point_logs()
                        .get(k)
                        .ok_or_else(|| CliError::usage(format!("--log {k} out of range ({} logs)", ds.len())))?;
                    sensor_image(entry, ds.baseline()).values().to_vec()
                }
                (None, None) => return Err(CliError::usage("predict needs --image or --dataset with --log")),
            };
            let model_path = model.clone().unwrap_or_else(|| out.join("model.json"));
            let localizer: Localizer = locnet::load(&model_path)?;
            let hit = localizer.predict(&values)?;
            println!(
                "{:.6} {:.6} {:.6} {:.6}",
                hit.point.x, hit.point.y, hit.point.z, hit.distance
            );
        }
        Command::Sweep { .. } => {
            let experiment = cfg.experiment()?;
            let mesh = cfg.load_mesh()?;
            let report = run_size_sweep(&mesh, &experiment)?;
            emit_report(&report, out_path(&out, "sweep.csv")?, ReportFormat::Csv)?;
            emit_report(&report, out_path(&out, "sweep.json")?, ReportFormat::Json)?;
            print!("{}", report_to_string(&report, ReportFormat::Csv)?);
            if let Some(fit) = &report.snr.fit {
                println!(
                    "snr fit: slope {:.6} dB/log, intercept {:.6} dB, r {:.6}",
                    fit.slope, fit.intercept, fit.pearson_r
                );
            }
        }
    }
    Ok(())
}

fn parse_image(text: &str) -> Result<Vec<f64>, CliError> {
    let values = text
        .split(|c: char| c == ',' || c.is_whitespace())
        .filter(|t| !t.is_empty())
        .map(|t| t.parse::<f64>().map_err(|e| CliError::usage(format!("bad image value {t:?}: {e}"))))
        .collect::<Result<Vec<_>, _>>()?;
    if values.len() != INPUT_DIM {
        return Err(CliError::usage(format!(
            "image has {} values, expected {INPUT_DIM}",
            values.len()
        )));
    }
    Ok(values)
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}
