use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use log::info;

use lvpat_cli::{
    cmd_evaluate, cmd_experiment, cmd_extend, cmd_reconstruct, cmd_simulate, cmd_train,
    load_phantom, with_threads, CliError, ExperimentConfig,
};
use lvpat_core::forward::Part;

#[derive(Parser)]
#[command(
    name = "lvpat",
    version,
    about = "Limited-view photoacoustic data extension and reconstruction"
)]
struct Args {
    /// Experiment config (TOML)
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output directory; defaults to the config's out_dir
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Worker threads; defaults to the config value, then to all cores
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Simulate boundary data of a phantom
    Simulate {
        /// Phantom file (JSON); defaults to the config's phantom
        #[arg(long)]
        phantom: Option<PathBuf>,
        #[arg(long, default_value = "full")]
        part: Part,
    },
    /// Train one extension model per configured partition
    Train,
    /// Extend limited-view data with a trained model
    Extend {
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        data: PathBuf,
    },
    /// Back-project full-boundary data onto the configured grid
    Reconstruct {
        #[arg(long)]
        data: PathBuf,
    },
    /// Score reconstructions against a phantom
    Evaluate {
        /// Phantom file (JSON); defaults to the config's phantom
        #[arg(long)]
        phantom: Option<PathBuf>,
        /// Reconstruction containers
        #[arg(required = true)]
        recon: Vec<PathBuf>,
    },
    /// Run the full experiment
    Experiment,
}

fn run(args: Args) -> Result<(), CliError> {
    let config_path = args
        .config
        .ok_or_else(|| CliError::Config("--config is required".into()))?;
    let cfg = ExperimentConfig::load(&config_path)?;
    let out = args.out.unwrap_or_else(|| cfg.out_dir.clone());
    let threads = args
        .threads
        .or(cfg.threads)
        .unwrap_or_else(|| std::thread::available_parallelism().map_or(1, |n| n.get()));
    if threads == 0 {
        return Err(CliError::Config("--threads must be at least 1".into()));
    }
    with_threads(threads, || -> Result<(), CliError> {
        match args.command {
            Command::Simulate { phantom, part } => {
                let p = match phantom {
                    Some(path) => load_phantom(&path)?,
                    None => cfg.load_phantom()?,
                };
                let path = cmd_simulate(&cfg, &p, part, &out)?;
                println!("wrote {}", path.display());
            }
            Command::Train => {
                for r in cmd_train(&cfg, &out)? {
                    println!(
                        "{}x{}: n = {}, train {:.3} s, ridge {:e}",
                        r.partition[0], r.partition[1], r.n, r.seconds, r.ridge
                    );
                }
            }
            Command::Extend { model, data } => {
                let r = cmd_extend(&cfg, &model, &data, &out)?;
                println!(
                    "extend {:.3} s; wrote {} and {}",
                    r.seconds,
                    r.gamma2_path.display(),
                    r.full_path.display()
                );
            }
            Command::Reconstruct { data } => {
                let r = cmd_reconstruct(&cfg, &data, &out)?;
                println!(
                    "reconstruct {:.3} s; wrote {}",
                    r.seconds,
                    r.image_path.display()
                );
            }
            Command::Evaluate { phantom, recon } => {
                let p = match phantom {
                    Some(path) => load_phantom(&path)?,
                    None => cfg.load_phantom()?,
                };
                let report = cmd_evaluate(&cfg, &recon, &p, &out)?;
                print!("{}", lvpat_core::io::csv_string(&report));
            }
            Command::Experiment => {
                let s = cmd_experiment(&cfg, &out)?;
                print!("{}", lvpat_core::io::csv_string(&s.report));
                for t in &s.timings {
                    info!(
                        "{}: train {:.2} s, extend {:.3} s, reconstruct {:.2} s",
                        t.variant, t.train, t.extend, t.reconstruct
                    );
                }
                println!("outputs in {}", s.out_dir.display());
            }
        }
        Ok(())
    })?
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    match run(Args::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
