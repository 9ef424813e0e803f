use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use log::error;

use hierbayes::experiment::{
    cmd_all, cmd_diagnose, cmd_generate, cmd_map, cmd_sample, exit_code, ExperimentConfig,
    EXIT_NOT_CONVERGED, EXIT_OK,
};
use hierbayes::Result;

#[derive(Parser)]
#[command(
    name = "hierbayes",
    version,
    about = "Hierarchical Bayesian sparse inversion experiments"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,

    /// Experiment config (JSON).
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    /// Override the config's output directory.
    #[arg(long, global = true)]
    output: Option<PathBuf>,

    /// Override the data seed; chain seeds are derived from it.
    #[arg(long, global = true)]
    seed_override: Option<u64>,
}

#[derive(Subcommand)]
enum Command {
    /// Build the deconvolution problem and write its manifest.
    Generate,
    /// Hybrid IAS MAP estimate for one shape exponent.
    Map {
        #[arg(long, allow_hyphen_values = true)]
        r: f64,
    },
    /// Run the chain of one configured run.
    Sample {
        #[arg(long)]
        run: String,
    },
    /// Diagnostics of one stored chain.
    Diagnose {
        #[arg(long)]
        run: String,
    },
    /// generate, map, sample and diagnose every configured run.
    All,
    /// Print the default benchmark config.
    DefaultConfig,
}

fn load(cli: &Cli) -> Result<ExperimentConfig> {
    let path = cli.config.as_ref().ok_or_else(|| {
        hierbayes::Error::Config("--config <path> is required for this command".into())
    })?;
    let mut cfg = ExperimentConfig::load(path)?;
    if let Some(out) = &cli.output {
        cfg.output_dir = out.clone();
    }
    if let Some(seed) = cli.seed_override {
        cfg.apply_seed_override(seed);
    }
    cfg.validate()?;
    Ok(cfg)
}

fn run(cli: &Cli) -> Result<i32> {
    if let Command::DefaultConfig = cli.command {
        let out = cli.output.clone().unwrap_or_else(|| PathBuf::from("out"));
        let cfg = ExperimentConfig::benchmark(out);
        println!(
            "{}",
            serde_json::to_string_pretty(&cfg).expect("config serializes")
        );
        return Ok(EXIT_OK);
    }
    let cfg = load(cli)?;
    let code = match &cli.command {
        Command::Generate => {
            let dir = cmd_generate(&cfg)?;
            println!("{}", dir.display());
            EXIT_OK
        }
        Command::Map { r } => {
            let out = cmd_map(&cfg, *r)?;
            let rec = &out.record;
            println!(
                "r = {}: beta = {}, vartheta = {:e}, phase I {} it, phase II {} it, converged = {}",
                rec.r,
                rec.hypermodel.beta(),
                rec.hypermodel.vartheta(0),
                rec.phase1.iterations,
                rec.phase2.as_ref().map_or(0, |p| p.iterations),
                rec.converged
            );
            if rec.converged {
                EXIT_OK
            } else {
                EXIT_NOT_CONVERGED
            }
        }
        Command::Sample { run } => {
            let (_, meta) = cmd_sample(&cfg, run)?;
            println!(
                "{}: {} draws stored, acceptance rate {:.4}%",
                meta.run_id,
                meta.stored_draws,
                100.0 * meta.acceptance_rate
            );
            EXIT_OK
        }
        Command::Diagnose { run } => {
            let report = cmd_diagnose(&cfg, run)?;
            println!(
                "{run}: delta = {:.6}, compressibility mode = {}, acceptance rate {:.4}%",
                report.delta,
                report.compress_mode,
                100.0 * report.acceptance_rate
            );
            EXIT_OK
        }
        Command::All => {
            let summary = cmd_all(&cfg)?;
            for (id, report) in &summary.reports {
                println!(
                    "{id}: acceptance {:.4}%, compressibility mode {}",
                    100.0 * report.acceptance_rate,
                    report.compress_mode
                );
            }
            if summary.all_converged() {
                EXIT_OK
            } else {
                EXIT_NOT_CONVERGED
            }
        }
        Command::DefaultConfig => unreachable!(),
    };
    Ok(code)
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = Cli::parse();
    match run(&cli) {
        Ok(code) => ExitCode::from(code as u8),
        Err(err) => {
            error!("{err}");
            ExitCode::from(exit_code(&err) as u8)
        }
    }
}
