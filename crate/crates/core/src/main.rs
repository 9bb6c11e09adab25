use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use rmtlab::experiment::{self, DensityKind, ExperimentConfig, ExperimentKind, OutputFormat, RunReport};

#[derive(Parser)]
#[command(name = "rmtlab", version, about = "Random-matrix ratio laws: sampling, densities and checks")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum Format {
    Json,
    Csv,
}

impl From<Format> for OutputFormat {
    fn from(f: Format) -> Self {
        match f {
            Format::Json => OutputFormat::Json,
            Format::Csv => OutputFormat::Csv,
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum Kind {
    UniversalReal,
    UniversalComplex,
    MatrixT,
    Girko,
}

impl From<Kind> for DensityKind {
    fn from(k: Kind) -> Self {
        match k {
            Kind::UniversalReal => DensityKind::UniversalReal,
            Kind::UniversalComplex => DensityKind::UniversalComplex,
            Kind::MatrixT => DensityKind::MatrixT,
            Kind::Girko => DensityKind::Girko,
        }
    }
}

#[derive(Subcommand)]
enum Command {
    /// Run the experiment described by a JSON config.
    Run {
        config: PathBuf,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        shards: Option<usize>,
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long, value_enum, default_value = "json")]
        format: Format,
    },
    /// Evaluate a closed-form density at one point.
    Density {
        #[arg(long, value_enum)]
        kind: Kind,
        #[arg(long, default_value = "{}")]
        params: String,
        #[arg(long)]
        at: String,
    },
    /// Check the exact identities for all m, n up to `max`.
    Identities {
        #[arg(long, default_value_t = 12)]
        max: usize,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn finish(report: &RunReport, format: OutputFormat, out: Option<PathBuf>) -> ExitCode {
    let written = match &out {
        Some(path) => experiment::emit(report, format, path),
        None => match format {
            OutputFormat::Json => {
                print!("{}", experiment::report_json(report));
                Ok(())
            }
            OutputFormat::Csv => experiment::write_csv(report, std::io::stdout().lock()),
        },
    };
    if let Err(e) = written {
        eprintln!("error: cannot write output: {e}");
        return ExitCode::from(2);
    }
    eprintln!(
        "{}: {} checks, {} failed, {:.2}s",
        report.config.kind.name(),
        report.entries.len(),
        report.failures.len(),
        report.wall_time.as_secs_f64()
    );
    for name in &report.failures {
        eprintln!("FAILED {name}");
    }
    ExitCode::from(report.exit_code() as u8)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match cli.command {
        Command::Run { config, seed, shards, out, format } => {
            let mut cfg = match ExperimentConfig::from_file(&config) {
                Ok(c) => c,
                Err(e) => {
                    eprintln!("error: {e}");
                    return ExitCode::from(2);
                }
            };
            if let Some(s) = seed {
                cfg.seed = s;
            }
            if let Some(k) = shards {
                cfg.shards = k;
            }
            let out = out.or_else(|| cfg.output.clone().map(PathBuf::from));
            match experiment::run(&cfg) {
                Ok(report) => finish(&report, format.into(), out),
                Err(e) => {
                    eprintln!("error: {e}");
                    ExitCode::from(2)
                }
            }
        }
        Command::Density { kind, params, at } => {
            let parsed = serde_json::from_str(&params)
                .map_err(|e| format!("--params: {e}"))
                .and_then(|p| serde_json::from_str(&at).map(|a| (p, a)).map_err(|e| format!("--at: {e}")));
            let (params, at) = match parsed {
                Ok(v) => v,
                Err(e) => {
                    eprintln!("error: {e}");
                    return ExitCode::from(2);
                }
            };
            match experiment::evaluate_density(kind.into(), &params, &at) {
                Ok(v) => {
                    println!("{}", serde_json::to_string_pretty(&v).expect("serializes"));
                    ExitCode::SUCCESS
                }
                Err(e) => {
                    eprintln!("error: {e}");
                    ExitCode::from(2)
                }
            }
        }
        Command::Identities { max, out } => {
            let mut cfg = ExperimentConfig::new(ExperimentKind::Identities, 0);
            cfg.max = max;
            match experiment::run(&cfg) {
                Ok(report) => finish(&report, OutputFormat::Json, out),
                Err(e) => {
                    eprintln!("error: {e}");
                    ExitCode::from(2)
                }
            }
        }
    }
}
