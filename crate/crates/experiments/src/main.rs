use anyhow::Context;
use clap::{Args, Parser, Subcommand};
use qcnn_experiments::{replay, run_command, Command, ExperimentConfig};
use std::path::PathBuf;

#[derive(Parser)]
#[command(name = "qcnn", version, about = "Deterministic QCNN experiment runs")]
struct Cli {
    #[command(subcommand)]
    command: Cmd,
}

#[derive(Args)]
struct Common {
    /// Flat `key = value` configuration file.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory (default: runs/<command>).
    #[arg(long)]
    out: Option<PathBuf>,
    /// MNIST directory; falls back to $QCNN_MNIST_DIR.
    #[arg(long)]
    data: Option<PathBuf>,
    /// Worker threads (default: all cores).
    #[arg(long)]
    threads: Option<usize>,
    /// Override any configuration key, e.g. `--set batch_size=16`.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    overrides: Vec<String>,
}

#[derive(Subcommand)]
enum Cmd {
    /// Gradient variance of the global and local costs against qubit count.
    VarianceScan {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        n_min: Option<usize>,
        #[arg(long)]
        n_max: Option<usize>,
        /// Random circuits per qubit count.
        #[arg(long)]
        samples: Option<usize>,
        /// `zero` or `product`.
        #[arg(long)]
        input: Option<String>,
    },
    /// Data loading, optional tensor-network warm start, then training.
    Train {
        #[command(flatten)]
        common: Common,
        /// `local` or `global`.
        #[arg(long)]
        cost: Option<String>,
        /// `tni` or `random`.
        #[arg(long)]
        init: Option<String>,
        #[arg(long)]
        epochs: Option<usize>,
    },
    /// Paired tensor-network vs random-start runs over several seeds.
    Ablation {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        num_seeds: Option<usize>,
        #[arg(long)]
        epochs: Option<usize>,
    },
    /// Test accuracy of a checkpoint under depolarizing noise.
    NoiseSweep {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        checkpoint: Option<PathBuf>,
        /// Comma-separated noise levels.
        #[arg(long)]
        p_list: Option<String>,
    },
    /// Tensor-network pre-training only; writes the seed angles.
    Tni {
        #[command(flatten)]
        common: Common,
    },
    /// Repeats a recorded run.
    Replay {
        manifest: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        threads: Option<usize>,
    },
    /// Prints the resolved configuration.
    ShowConfig {
        #[command(flatten)]
        common: Common,
    },
}

fn set_threads(threads: Option<usize>) -> anyhow::Result<()> {
    if let Some(n) = threads {
        rayon::ThreadPoolBuilder::new().num_threads(n).build_global()?;
    }
    Ok(())
}

/// File values first, then the common flags, then command flags.
fn resolve(common: &Common, flags: &[(&str, Option<String>)]) -> anyhow::Result<ExperimentConfig> {
    let mut cfg = match &common.config {
        Some(p) => ExperimentConfig::load(p)?,
        None => ExperimentConfig::default(),
    };
    let mut assign = |key: &str, value: &str, origin: &str| {
        cfg.set(key, value).map_err(|e| anyhow::anyhow!("{origin}: {e}"))
    };
    if let Some(seed) = common.seed {
        assign("seed", &seed.to_string(), "--seed")?;
    }
    if let Some(d) = &common.data {
        assign("data_dir", &d.display().to_string(), "--data")?;
    }
    for kv in &common.overrides {
        let (k, v) = kv
            .split_once('=')
            .with_context(|| format!("--set expects KEY=VALUE, got {kv:?}"))?;
        assign(k.trim(), v, "--set")?;
    }
    for (key, value) in flags {
        if let Some(v) = value {
            assign(key, v, &format!("--{}", key.replace('_', "-")))?;
        }
    }
    Ok(cfg)
}

fn some<T: ToString>(v: &Option<T>) -> Option<String> {
    v.as_ref().map(T::to_string)
}

fn run(common: &Common, command: Command, flags: &[(&str, Option<String>)]) -> anyhow::Result<()> {
    set_threads(common.threads)?;
    let cfg = resolve(common, flags)?;
    let out = common
        .out
        .clone()
        .unwrap_or_else(|| PathBuf::from("runs").join(command.name()));
    let manifest = run_command(command, &cfg, &out)?;
    for f in &manifest.outputs {
        println!("{}", out.join(f).display());
    }
    println!("{}", out.join(qcnn_experiments::MANIFEST_FILE).display());
    eprintln!("{} finished in {:.1}s", command.name(), manifest.duration_secs);
    Ok(())
}

fn main() -> anyhow::Result<()> {
    let cli = Cli::parse();
    match cli.command {
        Cmd::VarianceScan {
            common,
            n_min,
            n_max,
            samples,
            input,
        } => run(
            &common,
            Command::VarianceScan,
            &[
                ("scan_n_min", some(&n_min)),
                ("scan_n_max", some(&n_max)),
                ("scan_samples", some(&samples)),
                ("scan_input", input),
            ],
        ),
        Cmd::Train {
            common,
            cost,
            init,
            epochs,
        } => run(
            &common,
            Command::Train,
            &[
                ("observables", cost),
                ("init", init),
                ("training_epochs", some(&epochs)),
            ],
        ),
        Cmd::Ablation {
            common,
            num_seeds,
            epochs,
        } => run(
            &common,
            Command::Ablation,
            &[
                ("ablation_seeds", some(&num_seeds)),
                ("ablation_epochs", some(&epochs)),
            ],
        ),
        Cmd::NoiseSweep {
            common,
            checkpoint,
            p_list,
        } => run(
            &common,
            Command::NoiseSweep,
            &[
                ("checkpoint", checkpoint.map(|p| p.display().to_string())),
                ("noise_levels", p_list),
            ],
        ),
        Cmd::Tni { common } => run(&common, Command::Tni, &[]),
        Cmd::Replay {
            manifest,
            out,
            threads,
        } => {
            set_threads(threads)?;
            let m = replay(&manifest, &out)?;
            for f in &m.outputs {
                println!("{}", out.join(f).display());
            }
            Ok(())
        }
        Cmd::ShowConfig { common } => {
            print!("{}", resolve(&common, &[])?.to_text());
            Ok(())
        }
    }
}
