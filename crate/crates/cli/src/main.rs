//! `synergy`: zoo setup, dataset generation, training, retargeting,
//! first-component sweeps and evaluation reports.

use std::fs::File;
use std::io::{BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use synergy_core::cvae::TrainConfig;
use synergy_core::dataset::{build_dataset, JointDataset};
use synergy_core::eval::{evaluate, EvalConfig};
use synergy_core::io::{read_trajectory, write_ply, write_trajectory, TrajectoryPoint};
use synergy_core::refine::{iterative_learn, linspace, RefineConfig};
use synergy_core::retarget::{decode_anchors, retarget};
use synergy_core::{zoo, Error, ManipulatorModel, RigidTransform, SynergyModel};

#[derive(Debug, Parser)]
#[command(name = "synergy", version, about = "Anchor-based postural synergies across manipulators")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Built-in manipulator manifests.
    Zoo {
        #[command(subcommand)]
        action: ZooAction,
    },
    /// Joint-sample datasets.
    Dataset {
        #[command(subcommand)]
        action: DatasetAction,
    },
    /// Iterative training with end-effector frame refinement.
    Train(TrainArgs),
    /// Retarget a joint trajectory from one manipulator to another.
    Retarget(RetargetArgs),
    /// Write decoded anchors along the first principal component as PLY.
    SweepPc(SweepArgs),
    /// Write a JSON evaluation report for a checkpoint.
    Eval(EvalArgs),
}

#[derive(Debug, Subcommand)]
enum ZooAction {
    /// Write the six built-in manifests into a directory.
    Init { dir: PathBuf },
}

#[derive(Debug, Subcommand)]
enum DatasetAction {
    /// Sample uniform joint configurations for every manifest in a zoo.
    Build {
        #[arg(long)]
        zoo: PathBuf,
        #[arg(long, value_parser = clap::value_parser!(u64).range(1..))]
        n: u64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
}

#[derive(Debug, clap::Args)]
struct TrainArgs {
    #[arg(long)]
    dataset: PathBuf,
    /// Manifest directory; defaults to the built-in zoo.
    #[arg(long)]
    zoo: Option<PathBuf>,
    #[arg(long, default_value_t = 3, value_parser = clap::value_parser!(u64).range(1..))]
    budget: u64,
    /// Sweep points per reference manipulator during frame refinement.
    #[arg(long, default_value_t = 9, value_parser = clap::value_parser!(u64).range(2..))]
    k: u64,
    #[arg(long, value_parser = clap::value_parser!(u64).range(1..))]
    epochs: Option<u64>,
    #[arg(long, value_parser = clap::value_parser!(u64).range(1..))]
    batch_size: Option<u64>,
    #[arg(long, value_parser = clap::value_parser!(u64).range(1..))]
    hidden: Option<u64>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    out: PathBuf,
    /// Per-iteration refinement log, one JSON object per line.
    #[arg(long)]
    log: Option<PathBuf>,
}

#[derive(Debug, clap::Args)]
struct RetargetArgs {
    #[arg(long)]
    ckpt: PathBuf,
    #[arg(long)]
    src: String,
    #[arg(long)]
    tgt: String,
    #[arg(long = "n-pc", value_parser = clap::value_parser!(u64).range(1..=10))]
    n_pc: u64,
    #[arg(long = "in")]
    input: PathBuf,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Debug, clap::Args)]
struct SweepArgs {
    #[arg(long)]
    ckpt: PathBuf,
    #[arg(long)]
    manip: String,
    #[arg(long, default_value_t = -3.0, allow_negative_numbers = true)]
    from: f64,
    #[arg(long, default_value_t = 3.0, allow_negative_numbers = true)]
    to: f64,
    #[arg(long, default_value_t = 5, value_parser = clap::value_parser!(u64).range(1..))]
    steps: u64,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Debug, clap::Args)]
struct EvalArgs {
    #[arg(long)]
    ckpt: PathBuf,
    #[arg(long)]
    report: PathBuf,
    #[arg(long, default_value_t = 100, value_parser = clap::value_parser!(u64).range(1..))]
    samples: u64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::new().filter_or("SYNERGY_LOG", "warn")).init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    match run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}

fn run(command: Command) -> synergy_core::Result<()> {
    match command {
        Command::Zoo {
            action: ZooAction::Init { dir },
        } => {
            for path in zoo::write_zoo(&dir)? {
                log::info!("wrote {}", path.display());
            }
            Ok(())
        }
        Command::Dataset {
            action: DatasetAction::Build { zoo: dir, n, seed, out },
        } => {
            let models = zoo::load_dir(&dir)?;
            if models.is_empty() {
                return Err(Error::Validation(format!("no manifests in {}", dir.display())));
            }
            build_dataset(&models, n as usize, seed)?.save(&out)
        }
        Command::Train(args) => train(args),
        Command::Retarget(args) => retarget_file(args),
        Command::SweepPc(args) => sweep(args),
        Command::Eval(args) => {
            let psi = SynergyModel::load(&args.ckpt)?;
            let config = EvalConfig {
                samples: args.samples as usize,
                seed: args.seed,
                ..EvalConfig::default()
            };
            let report = evaluate(&psi, &config)?;
            let mut out = BufWriter::new(File::create(&args.report)?);
            serde_json::to_writer_pretty(&mut out, &report)?;
            out.write_all(b"\n")?;
            out.flush()?;
            Ok(())
        }
    }
}

/// Models for the dataset's manipulators, in dataset order.
fn models_for(dataset: &JointDataset, pool: Vec<ManipulatorModel>) -> synergy_core::Result<Vec<ManipulatorModel>> {
    let available: Vec<String> = pool.iter().map(|m| m.name().to_string()).collect();
    dataset
        .manipulators()
        .iter()
        .map(|name| {
            pool.iter()
                .find(|m| m.name() == *name)
                .cloned()
                .ok_or_else(|| Error::UnknownManipulator {
                    name: name.to_string(),
                    registered: available.join(", "),
                })
        })
        .collect()
}

fn train(args: TrainArgs) -> synergy_core::Result<()> {
    let dataset = JointDataset::load(&args.dataset)?;
    let pool = match &args.zoo {
        Some(dir) => zoo::load_dir(dir)?,
        None => zoo::builtin_models(),
    };
    let models = models_for(&dataset, pool)?;
    let refine = RefineConfig {
        k: args.k as usize,
        budget: args.budget as usize,
        ..RefineConfig::default()
    };
    let defaults = TrainConfig::default();
    let train = TrainConfig {
        epochs: args.epochs.map_or(defaults.epochs, |v| v as usize),
        batch_size: args.batch_size.map_or(defaults.batch_size, |v| v as usize),
        hidden: args.hidden.map_or(defaults.hidden, |v| v as usize),
        seed: args.seed,
        ..defaults
    };
    let psi = iterative_learn(&models, &dataset, &refine, &train)?;
    psi.save(&args.out)?;
    if let Some(path) = &args.log {
        let mut out = BufWriter::new(File::create(path)?);
        for it in &psi.refinement {
            serde_json::to_writer(&mut out, it)?;
            out.write_all(b"\n")?;
        }
        out.flush()?;
    }
    Ok(())
}

fn retarget_file(args: RetargetArgs) -> synergy_core::Result<()> {
    let psi = SynergyModel::load(&args.ckpt)?;
    let src = psi.model(&args.src)?;
    let tgt = psi.model(&args.tgt)?;
    let points = read_trajectory(BufReader::new(File::open(&args.input)?))?;
    let mut previous = tgt.mid_range();
    let mut out = Vec::with_capacity(points.len());
    for (k, p) in points.iter().enumerate() {
        src.check_joints(&p.joints)
            .map_err(|e| Error::Validation(format!("trajectory point {}: {e}", k + 1)))?;
        let eef = RigidTransform::from(&p.eef);
        let r = retarget(&psi, &args.src, &p.joints, &args.tgt, &previous, args.n_pc as usize, eef)?;
        log::debug!("point {}: residual {:.3e} after {} iterations", k + 1, r.anchor_residual, r.iterations);
        previous = r.joints.clone();
        out.push(TrajectoryPoint {
            t: p.t,
            joints: r.joints,
            eef: p.eef,
        });
    }
    let mut file = BufWriter::new(File::create(&args.out)?);
    write_trajectory(&mut file, &out)?;
    file.flush()?;
    Ok(())
}

fn sweep(args: SweepArgs) -> synergy_core::Result<()> {
    let psi = SynergyModel::load(&args.ckpt)?;
    psi.index_of(&args.manip)?;
    std::fs::create_dir_all(&args.out)?;
    let coeffs = if args.steps == 1 {
        vec![args.from]
    } else {
        linspace(args.from, args.to, args.steps as usize)
    };
    for (k, c) in coeffs.iter().enumerate() {
        let anchors = decode_anchors(&psi, &args.manip, &[*c])?;
        let path = ply_path(&args.out, &args.manip, k);
        let mut file = BufWriter::new(File::create(&path)?);
        write_ply(&mut file, &anchors)?;
        file.flush()?;
    }
    Ok(())
}

fn ply_path(dir: &Path, manip: &str, step: usize) -> PathBuf {
    dir.join(format!("{manip}_pc1_{step:03}.ply"))
}
