use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use serde::Serialize;

use kscdl::classify::Evaluation;
use kscdl::init::{cluster_shapes_with, ClusterOptions};
use kscdl::io::{load_sequence, write_json, write_series};
use kscdl::kernel::{gram_matrix, psd_check_relative, SIGMA_GRID};
use kscdl::pipeline::{
    fit_with_dictionaries, load_trajectories, resolve_sigma, subsample, train_dictionaries, CodingMode,
    DictionaryBundle, Model, PipelineConfig,
};
use kscdl::synth::{write_synthetic, SyntheticSpec};
use kscdl::temporal::{DisplacementMode, Trajectory};
use kscdl::{Error, Result, ShapePoint};

#[derive(Parser)]
#[command(name = "kscdl", version, about = "Kendall shape-space sparse coding for landmark sequences")]
struct Cli {
    #[command(flatten)]
    global: GlobalFlags,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct GlobalFlags {
    /// Coding mode: intrinsic, extrinsic or linear
    #[arg(long, global = true)]
    mode: Option<CodingMode>,
    #[arg(long, global = true)]
    lambda: Option<f64>,
    /// Kernel bandwidth (default: largest PSD value of the grid)
    #[arg(long, global = true)]
    sigma: Option<f64>,
    #[arg(long, global = true)]
    ftp_levels: Option<usize>,
    /// off, replace or fuse
    #[arg(long, global = true)]
    displacement: Option<DisplacementMode>,
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Worker threads (default: all cores)
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// TOML file with pipeline settings; flags take precedence
    #[arg(long, global = true)]
    config: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Command {
    /// Write a synthetic dataset with all/train/test manifests
    GenSynth {
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 4)]
        classes: usize,
        #[arg(long, default_value_t = 20)]
        per_class: usize,
        #[arg(long, default_value_t = 15)]
        landmarks: usize,
        #[arg(long, default_value_t = 3)]
        dim: usize,
        #[arg(long, default_value_t = 0.03)]
        noise: f64,
        #[arg(long, default_value_t = 0.5)]
        warp: f64,
        #[arg(long, default_value_t = 30)]
        min_length: usize,
        #[arg(long, default_value_t = 50)]
        max_length: usize,
    },
    /// Report Gram-matrix eigenvalues of the frames of a manifest
    KernelCheck {
        #[arg(long)]
        manifest: PathBuf,
        #[arg(long, default_value_t = 200)]
        max_shapes: usize,
        #[arg(long)]
        report: Option<PathBuf>,
    },
    /// Cluster the frames of each class
    Cluster {
        #[arg(long)]
        manifest: PathBuf,
        #[arg(long)]
        report: Option<PathBuf>,
    },
    /// Build class dictionaries only
    TrainDict {
        #[arg(long)]
        manifest: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Train dictionaries and classifier
    Train {
        #[arg(long)]
        manifest: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Reuse dictionaries written by train-dict
        #[arg(long)]
        dicts: Option<PathBuf>,
    },
    /// Write the code series of one sequence file
    Encode {
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Predict labels for a sequence file or a manifest
    Classify {
        #[arg(long)]
        model: PathBuf,
        #[arg(long, conflicts_with = "manifest", required_unless_present = "manifest")]
        input: Option<PathBuf>,
        #[arg(long)]
        manifest: Option<PathBuf>,
    },
    /// Accuracy and confusion matrix on a labelled manifest
    Eval {
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        manifest: PathBuf,
        #[arg(long)]
        report: Option<PathBuf>,
    },
}

fn config_from(flags: &GlobalFlags) -> Result<PipelineConfig> {
    let mut c = match &flags.config {
        Some(p) => PipelineConfig::load(p)?,
        None => PipelineConfig::default(),
    };
    if let Some(v) = flags.mode {
        c.mode = v;
    }
    if let Some(v) = flags.lambda {
        c.lambda = v;
    }
    if flags.sigma.is_some() {
        c.sigma = flags.sigma;
    }
    if let Some(v) = flags.ftp_levels {
        c.ftp_levels = v;
    }
    if let Some(v) = flags.displacement {
        c.displacement = v;
    }
    if let Some(v) = flags.seed {
        c.seed = v;
    }
    c.validate()?;
    Ok(c)
}

fn frames_of(trajs: &[Trajectory], max: usize) -> Vec<ShapePoint> {
    let all: Vec<&ShapePoint> = trajs.iter().flat_map(|t| t.frames()).collect();
    subsample(all.len(), max).into_iter().map(|i| all[i].clone()).collect()
}

#[derive(Serialize)]
struct KernelReport {
    sigma: f64,
    min_eigenvalue: f64,
    max_eigenvalue: f64,
    is_psd: bool,
}

#[derive(Serialize)]
struct ClusterReport {
    class: String,
    shapes: usize,
    k: usize,
    silhouette: f64,
    sizes: Vec<usize>,
}

#[derive(Serialize)]
struct EvalReport<'a> {
    accuracy: f64,
    classes: &'a [String],
    confusion: &'a [Vec<usize>],
}

fn confusion_text(classes: &[String], eval: &Evaluation) -> String {
    let width = classes
        .iter()
        .map(|c| c.len())
        .chain(eval.confusion.iter().flatten().map(|v| v.to_string().len()))
        .max()
        .unwrap_or(1)
        .max(6);
    let mut out = format!("{:>width$}", "actual");
    for c in classes {
        out.push_str(&format!(" {c:>width$}"));
    }
    out.push('\n');
    for (c, row) in classes.iter().zip(&eval.confusion) {
        out.push_str(&format!("{c:>width$}"));
        for v in row {
            out.push_str(&format!(" {v:>width$}"));
        }
        out.push('\n');
    }
    out
}

fn run(cli: Cli) -> Result<()> {
    if let Some(n) = cli.global.threads {
        rayon::ThreadPoolBuilder::new()
            .num_threads(n.max(1))
            .build_global()
            .map_err(|e| Error::InvalidInput(e.to_string()))?;
    }
    let config = config_from(&cli.global)?;
    match cli.command {
        Command::GenSynth {
            out,
            classes,
            per_class,
            landmarks,
            dim,
            noise,
            warp,
            min_length,
            max_length,
        } => {
            let spec = SyntheticSpec {
                num_classes: classes,
                per_class,
                min_length,
                max_length,
                landmarks,
                dim,
                noise,
                warp,
                seed: config.seed,
                ..SyntheticSpec::default()
            };
            let seqs = write_synthetic(&out, &spec)?;
            println!("wrote {} sequences to {}", seqs.len(), out.display());
        }
        Command::KernelCheck {
            manifest,
            max_shapes,
            report,
        } => {
            let trajs = load_trajectories(&manifest)?;
            let shapes = frames_of(&trajs, max_shapes);
            let sigmas: Vec<f64> = match config.sigma {
                Some(s) => vec![s],
                None => SIGMA_GRID.to_vec(),
            };
            let mut rows = Vec::new();
            println!("{:>8} {:>14} {:>14} psd", "sigma", "min_eig", "max_eig");
            for s in sigmas {
                let r = psd_check_relative(&gram_matrix(&shapes, s)?);
                println!("{s:>8} {:>14.6e} {:>14.6e} {}", r.min_eigenvalue, r.max_eigenvalue, r.is_psd);
                rows.push(KernelReport {
                    sigma: s,
                    min_eigenvalue: r.min_eigenvalue,
                    max_eigenvalue: r.max_eigenvalue,
                    is_psd: r.is_psd,
                });
            }
            if let Some(p) = report {
                write_json(&p, &rows)?;
            }
        }
        Command::Cluster { manifest, report } => {
            let trajs = load_trajectories(&manifest)?;
            let all = frames_of(&trajs, usize::MAX);
            let sigma = resolve_sigma(&config, &all)?;
            let mut labels: Vec<String> = trajs.iter().filter_map(|t| t.label.clone()).collect();
            labels.sort();
            labels.dedup();
            let opts = ClusterOptions {
                seed: config.seed,
                ..ClusterOptions::default()
            };
            let mut rows = Vec::new();
            for label in labels {
                let members: Vec<Trajectory> =
                    trajs.iter().filter(|t| t.label.as_ref() == Some(&label)).cloned().collect();
                let shapes = frames_of(&members, config.max_frames_per_class);
                let c = cluster_shapes_with(&shapes, sigma, &opts)?;
                let sizes: Vec<usize> = (0..c.k).map(|k| c.members(k).len()).collect();
                println!("{label}: {} shapes, k = {}, silhouette {:.4}, sizes {sizes:?}", shapes.len(), c.k, c.silhouette);
                rows.push(ClusterReport {
                    class: label,
                    shapes: shapes.len(),
                    k: c.k,
                    silhouette: c.silhouette,
                    sizes,
                });
            }
            if let Some(p) = report {
                write_json(&p, &rows)?;
            }
        }
        Command::TrainDict { manifest, out } => {
            let trajs = load_trajectories(&manifest)?;
            let dicts = train_dictionaries(&trajs, &config)?;
            write_json(&out, &DictionaryBundle::new(&config, &dicts))?;
            println!("wrote {} dictionaries to {}", dicts.classes.len(), out.display());
        }
        Command::Train { manifest, out, dicts } => {
            let trajs = load_trajectories(&manifest)?;
            let dicts = match dicts {
                Some(p) => DictionaryBundle::load(&p)?.into_training()?,
                None => train_dictionaries(&trajs, &config)?,
            };
            let model = fit_with_dictionaries(&trajs, &config, dicts)?;
            model.save(&out)?;
            println!("trained {} classes on {} sequences; model written to {}", model.classes.len(), trajs.len(), out.display());
        }
        Command::Encode { model, input, out } => {
            let model = Model::load(&model)?;
            let seq = load_sequence(&input)?;
            let traj = seq.to_trajectory()?;
            let series = model.encode(&traj)?;
            write_series(&out, &series, seq.label.as_deref(), seq.source_id.as_deref())?;
            println!("wrote {} x {} codes to {}", series.len(), series.width(), out.display());
        }
        Command::Classify { model, input, manifest } => {
            let model = Model::load(&model)?;
            let items: Vec<(String, Trajectory)> = match (input, manifest) {
                (Some(p), _) => vec![(p.display().to_string(), load_sequence(&p)?.to_trajectory()?)],
                (None, Some(m)) => load_trajectories(&m)?
                    .into_iter()
                    .map(|t| (t.source_id.clone(), t))
                    .collect(),
                (None, None) => unreachable!("clap requires one input"),
            };
            for (name, traj) in items {
                let (label, _) = model.predict(&traj)?;
                println!("{name} {}", model.classes[label]);
            }
        }
        Command::Eval {
            model,
            manifest,
            report,
        } => {
            let model = Model::load(&model)?;
            let trajs = load_trajectories(&manifest)?;
            let eval = model.evaluate(&trajs)?;
            println!("accuracy: {:.4} ({} sequences)", eval.accuracy, trajs.len());
            print!("{}", confusion_text(&model.classes, &eval));
            if let Some(p) = report {
                write_json(
                    &p,
                    &EvalReport {
                        accuracy: eval.accuracy,
                        classes: &model.classes,
                        confusion: &eval.confusion,
                    },
                )?;
            }
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::new().filter_or("KSCDL_LOG", "warn")).init();
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) if !e.use_stderr() => {
            let _ = e.print();
            return ExitCode::SUCCESS;
        }
        Err(e) => {
            let text = e.to_string();
            let first = text.lines().next().unwrap_or("invalid arguments").trim_start_matches("error: ");
            eprintln!("error[usage]: {first}");
            return ExitCode::from(2);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            let msg = e.to_string().replace('\n', " ");
            eprintln!("error[{}]: {msg}", e.kind());
            ExitCode::FAILURE
        }
    }
}
