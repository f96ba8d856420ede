//! Command-line front end: analytic tables, dataset export, probe training
//! and the end-to-end experiment.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use log::info;

use semv2x::config::{load_config, validate_config, QuantFormat};
use semv2x::pipeline::{
    cmd_gen, cmd_train, flops_csv, flops_row, latency_csv, latency_notes, latency_table,
    load_sweep, payload_csv, payload_table, read_report, run_e2e, write_report, E2eOptions,
};
use semv2x::scenario::PostProcess;
use semv2x::{Error, ExperimentConfig};

#[derive(Parser)]
#[command(
    name = "semv2x",
    version,
    about = "Semantic V2X collision-prediction simulator"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,

    /// TOML config; missing sections take their defaults.
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    #[arg(long, global = true)]
    seed: Option<u64>,

    /// Where output files go.
    #[arg(long, global = true)]
    out_dir: Option<PathBuf>,

    /// Post-processing: none, heatmap, mask or hybrid.
    #[arg(long, global = true)]
    post: Option<PostProcess>,

    /// Frames removed before the collision.
    #[arg(long, global = true, value_parser = parse_gap)]
    gap: Option<u32>,

    /// Link element format: fp32, fp16 or int8.
    #[arg(long, global = true)]
    quant: Option<QuantFormat>,

    /// Send all tokens and run the whole probe at the vehicle.
    #[arg(long, global = true)]
    probe_at_vehicle: bool,
}

#[derive(Subcommand)]
enum Command {
    /// Raw and semantic payload sizes with compression ratios.
    Payload,
    /// Link rate, latency and deadline check per modulation and format.
    Latency,
    /// FLOPs, activation memory and inference time.
    Flops {
        /// Sweep file with one `[[case]]` table per row.
        #[arg(long)]
        sweep: Option<PathBuf>,
    },
    /// Generate the synthetic dataset and save it as netpbm frames.
    Gen,
    /// Train a probe on the configured condition.
    Train,
    /// Run the whole pipeline and write the report.
    E2e,
    /// Rewrite the report tables from a saved `report.json`.
    Report {
        /// Path to `report.json`.
        report: PathBuf,
    },
}

fn parse_gap(s: &str) -> Result<u32, String> {
    match s.parse::<u32>() {
        Ok(g @ (0 | 4 | 8 | 12)) => Ok(g),
        _ => Err("gap must be one of 0, 4, 8, 12".into()),
    }
}

enum Failure {
    Config(String),
    Runtime(String),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        if e.is_config_error() {
            Failure::Config(e.to_string())
        } else {
            Failure::Runtime(e.to_string())
        }
    }
}

type CliResult<T> = std::result::Result<T, Failure>;

/// Experiment commands default to the desk-scale config; the analytic ones
/// to the full-scale defaults.
fn resolve_config(cli: &Cli, experiment: bool) -> CliResult<ExperimentConfig> {
    let mut cfg = match &cli.config {
        Some(path) => load_config(path).map_err(|e| match e {
            Error::Io { .. } => Failure::Config(e.to_string()),
            e => e.into(),
        })?,
        None if experiment => {
            info!("no --config given, using the desk-scale config");
            ExperimentConfig::desk_scale()
        }
        None => ExperimentConfig::default(),
    };
    if let Some(seed) = cli.seed {
        cfg.seed = seed;
    }
    if let Some(post) = cli.post {
        cfg.dataset.post = post;
    }
    if let Some(gap) = cli.gap {
        cfg.dataset.gap = gap;
    }
    if let Some(quant) = cli.quant {
        cfg.quant = quant;
    }
    let violations = validate_config(&cfg);
    if !violations.is_empty() {
        return Err(Error::Validation(violations).into());
    }
    Ok(cfg)
}

fn out_dir(cli: &Cli, default: &str) -> PathBuf {
    cli.out_dir
        .clone()
        .unwrap_or_else(|| PathBuf::from(default))
}

/// Prints `csv` and, with `--out-dir`, also saves it as `name`.
fn emit_csv(cli: &Cli, name: &str, csv: &str) -> CliResult<()> {
    print!("{csv}");
    if let Some(dir) = &cli.out_dir {
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        let path = dir.join(name);
        fs::write(&path, csv).map_err(|e| Error::io(&path, e))?;
        info!("wrote {}", path.display());
    }
    Ok(())
}

fn run(cli: &Cli) -> CliResult<()> {
    match &cli.command {
        Command::Payload => {
            let cfg = resolve_config(cli, false)?;
            emit_csv(cli, "payload.csv", &payload_csv(&payload_table(&cfg)?))
        }
        Command::Latency => {
            let cfg = resolve_config(cli, false)?;
            let rows = latency_table(&cfg);
            for note in latency_notes(&rows) {
                eprintln!("note: {note}");
            }
            emit_csv(cli, "latency.csv", &latency_csv(&rows))
        }
        Command::Flops { sweep } => {
            let cfg = resolve_config(cli, false)?;
            let rows = match sweep {
                Some(path) => load_sweep(&cfg, path)
                    .map_err(|e| match e {
                        Error::Io { .. } => Failure::Config(e.to_string()),
                        e => e.into(),
                    })?
                    .iter()
                    .map(|(name, c)| flops_row(name, c))
                    .collect::<semv2x::Result<Vec<_>>>()?,
                None => vec![flops_row("config", &cfg)?],
            };
            emit_csv(cli, "flops.csv", &flops_csv(&rows))
        }
        Command::Gen => {
            let cfg = resolve_config(cli, true)?;
            let dir = out_dir(cli, "out/dataset");
            let n = cmd_gen(&cfg, &dir)?;
            println!("wrote {n} clips to {}", dir.display());
            Ok(())
        }
        Command::Train => {
            let cfg = resolve_config(cli, true)?;
            let dir = out_dir(cli, "out/train");
            let s = cmd_train(&cfg, &dir)?;
            println!(
                "trained on {} clips ({}/gap{}): train accuracy {:.4}, test accuracy {:.4} on {} clips",
                s.n_train, cfg.dataset.post, cfg.dataset.gap, s.train_accuracy, s.test_accuracy, s.n_test
            );
            println!("wrote {}", dir.join("probe.ckpt").display());
            Ok(())
        }
        Command::E2e => {
            let cfg = resolve_config(cli, true)?;
            let mut opts = if cli.post.is_some() || cli.gap.is_some() {
                E2eOptions::single(&cfg, cfg.dataset.post, cfg.dataset.gap)
            } else {
                E2eOptions::standard(&cfg)
            };
            opts.probe_at_vehicle = cli.probe_at_vehicle;
            let run = run_e2e(&cfg, &opts)?;
            let dir = out_dir(cli, "out/e2e");
            write_report(&run.report, Some(&run.log), &dir)?;
            for c in &run.report.conditions {
                println!(
                    "{:<14} accuracy {:.4} precision {:.4} recall {:.4} f1 {:.4} agreement {:.4}",
                    c.condition.to_string(),
                    c.metrics.accuracy,
                    c.metrics.precision,
                    c.metrics.recall,
                    c.metrics.f1,
                    c.agreement_fp32
                );
            }
            println!("report written to {}", dir.display());
            Ok(())
        }
        Command::Report { report } => {
            let parsed = read_report(report)?;
            let dir = match &cli.out_dir {
                Some(d) => d.clone(),
                None => report.parent().unwrap_or(Path::new(".")).to_path_buf(),
            };
            for path in write_report(&parsed, None, &dir)? {
                println!("{}", path.display());
            }
            Ok(())
        }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Config(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(2)
        }
        Err(Failure::Runtime(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(3)
        }
    }
}
