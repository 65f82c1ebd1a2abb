use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use digeco::analysis;
use digeco::config::normalize_key;
use digeco::{Ecosystem, Error, RunConfig};

#[derive(Parser)]
#[command(name = "digeco", version, about = "Digital ecosystem simulator")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the request loop and write succession.csv, snapshot.json and network.csv.
    Run {
        /// Config file of `key = value` lines.
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        master_seed: Option<u64>,
        #[arg(long)]
        output_dir: Option<PathBuf>,
        /// Continue from a snapshot instead of starting fresh. Only
        /// `--total-requests` and `--output-dir` may be changed.
        #[arg(long)]
        resume: Option<PathBuf>,
        /// Any config key as `--key value`.
        #[arg(trailing_var_arg = true, allow_hyphen_values = true, value_name = "--KEY VALUE")]
        overrides: Vec<String>,
    },
    /// Compute ecology metrics from a snapshot and its trace.
    Analyze {
        #[arg(long)]
        snapshot: PathBuf,
        #[arg(long)]
        trace: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Summarise the metric CSVs in a directory written by `analyze`.
    Report {
        #[arg(long)]
        out: PathBuf,
    },
}

fn parse_overrides(raw: &[String]) -> Result<Vec<(String, String)>, String> {
    let mut pairs = Vec::new();
    let mut it = raw.iter();
    while let Some(flag) = it.next() {
        let Some(stripped) = flag.strip_prefix("--") else {
            return Err(format!("expected `--key value`, found `{flag}`"));
        };
        let (key, value) = match stripped.split_once('=') {
            Some((k, v)) => (k.to_string(), v.to_string()),
            None => {
                let v = it.next().ok_or_else(|| format!("missing value for `--{stripped}`"))?;
                (stripped.to_string(), v.clone())
            }
        };
        pairs.push((normalize_key(&key), value));
    }
    Ok(pairs)
}

fn run(
    config: Option<PathBuf>,
    master_seed: Option<u64>,
    output_dir: Option<PathBuf>,
    resume: Option<PathBuf>,
    overrides: &[String],
) -> Result<(), String> {
    let overrides = parse_overrides(overrides)?;
    let eco = match resume {
        Some(snapshot) => {
            if config.is_some() || master_seed.is_some() {
                return Err("--resume takes its config from the snapshot".into());
            }
            let mut eco = Ecosystem::load_snapshot(&snapshot).map_err(|e| e.to_string())?;
            for (key, value) in &overrides {
                if key != "total_requests" {
                    return Err(format!("`{key}` cannot be changed when resuming"));
                }
                eco.config.set(key, value).map_err(|e| e.to_string())?;
            }
            eco.config.output_dir = output_dir.unwrap_or_else(|| PathBuf::from("out"));
            eco
        }
        None => {
            let mut cfg = match &config {
                Some(p) => RunConfig::from_file(p).map_err(|e| e.to_string())?,
                None => RunConfig::default(),
            };
            for (key, value) in &overrides {
                cfg.set(key, value).map_err(|e| e.to_string())?;
            }
            if let Some(seed) = master_seed {
                cfg.master_seed = seed;
            }
            if let Some(dir) = output_dir {
                cfg.output_dir = dir;
            }
            Ecosystem::new(cfg).map_err(|e| e.to_string())?
        }
    };
    let out_dir = eco.config.output_dir.clone();
    let art = analysis::run(eco, &out_dir).map_err(|e: Error| e.to_string())?;
    println!("{} requests -> {}", art.records.len(), art.trace.display());
    println!("snapshot   -> {}", art.snapshot.display());
    println!("network    -> {}", art.network.display());
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Run { config, master_seed, output_dir, resume, overrides } => {
            run(config, master_seed, output_dir, resume, &overrides)
        }
        Command::Analyze { snapshot, trace, out } => analysis::analyze_files(&snapshot, &trace, &out)
            .map(|paths| {
                for p in paths {
                    println!("{}", p.display());
                }
            })
            .map_err(|e| e.to_string()),
        Command::Report { out } => analysis::report(&out).map(|s| print!("{s}")).map_err(|e| e.to_string()),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(msg) => {
            eprintln!("error: {msg}");
            ExitCode::FAILURE
        }
    }
}
