//! `treegibbs`: reproducible experiments for Gibbs ensembles on plane trees.

mod commands;
mod config;

use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use serde_json::json;

use commands::Report;
use config::{resolve_model, seed_or_default, ConfigFile};

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{0}")]
    Config(String),
    #[error(transparent)]
    Model(#[from] plane_gibbs::Error),
    #[error("{0}")]
    Io(String),
}

impl CliError {
    fn kind(&self) -> &'static str {
        match self {
            CliError::Config(_) => "config",
            CliError::Model(plane_gibbs::Error::InvalidModel(_)) => "invalid_model",
            CliError::Model(plane_gibbs::Error::Domain(_)) => "domain",
            CliError::Model(plane_gibbs::Error::EmptySupport(_)) => "empty_support",
            CliError::Model(plane_gibbs::Error::Resource(_)) => "resource",
            CliError::Io(_) => "io",
        }
    }

    fn exit_code(&self) -> u8 {
        match self {
            CliError::Model(plane_gibbs::Error::Resource(_)) => 3,
            _ => 2,
        }
    }
}

const EXIT_CHECK_FAILED: u8 = 4;

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Format {
    Csv,
    Json,
}

#[derive(Debug, Parser)]
#[command(name = "treegibbs", version, about = "Gibbs measures on plane trees and their infinite-volume limit")]
struct Cli {
    #[command(subcommand)]
    command: Command,
    /// TOML experiment file; flags override its values.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Master seed for all random streams.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Write the result here instead of standard output.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[arg(long, global = true, value_enum)]
    format: Option<Format>,
    /// Shorthand for `--format json`.
    #[arg(long, global = true)]
    json: bool,
    /// Print nothing on standard output.
    #[arg(long, global = true)]
    quiet: bool,
    /// Branching bound D.
    #[arg(short = 'D', long = "degree", global = true)]
    degree: Option<usize>,
    /// Energies E_0..E_D, comma separated.
    #[arg(short = 'E', long, global = true, value_delimiter = ',', allow_hyphen_values = true)]
    energies: Option<Vec<f64>>,
    #[arg(long, global = true, allow_hyphen_values = true)]
    beta: Option<f64>,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Critical point of the rate function and derived constants.
    Solve,
    /// Total variation between finite-N and limiting neighbourhood laws.
    Converge {
        #[arg(long, value_delimiter = ',')]
        orders: Option<Vec<usize>>,
        #[arg(long)]
        radius: Option<usize>,
    },
    /// Sample the first levels of the limiting infinite tree.
    Sample {
        #[arg(long)]
        steps: Option<usize>,
        #[arg(long)]
        stream: Option<u64>,
    },
    /// Monte Carlo test of the gamma limit of rescaled level sizes.
    Gamma {
        #[arg(long)]
        n: Option<usize>,
        #[arg(long)]
        samples: Option<usize>,
        /// Write a histogram of the rescaled sizes to this CSV file.
        #[arg(long)]
        histogram: Option<String>,
    },
    /// Exact Laplace-transform iteration against its limit.
    Laplace {
        #[arg(long, value_delimiter = ',')]
        ns: Option<Vec<usize>>,
        #[arg(long, allow_hyphen_values = true)]
        x: Option<f64>,
    },
    /// Diffusion approximation and grouped-progeny checks.
    Diffuse {
        #[arg(long)]
        paths: Option<usize>,
        #[arg(long)]
        dt: Option<f64>,
        #[arg(long)]
        n: Option<usize>,
        #[arg(long)]
        groups: Option<usize>,
        #[arg(long)]
        compare_paths: Option<usize>,
    },
    /// Conditional moments of the level sizes by exhaustive summation.
    Moments {
        #[arg(long)]
        max_k: Option<usize>,
    },
}

fn run(cli: Cli) -> Result<(Report, Option<Format>, Option<PathBuf>), CliError> {
    let mut file = match &cli.config {
        Some(path) => ConfigFile::load(path)?,
        None => ConfigFile::default(),
    };
    let model = resolve_model(file.model.as_ref(), cli.degree, cli.energies.clone(), cli.beta)?;
    let seed = seed_or_default(cli.seed, file.seed);
    let output = file.output.take().unwrap_or_default();
    let format = if cli.json {
        Some(Format::Json)
    } else if let Some(f) = cli.format {
        Some(f)
    } else {
        match output.format.as_deref() {
            None => None,
            Some("csv") => Some(Format::Csv),
            Some("json") => Some(Format::Json),
            Some(other) => return Err(CliError::Config(format!("unknown output format {other:?}"))),
        }
    };
    let out = cli.out.clone().or(output.path.map(PathBuf::from));

    let report = match cli.command {
        Command::Solve => commands::solve(&model)?,
        Command::Converge { orders, radius } => {
            let mut block = file.converge;
            block.orders = orders.unwrap_or(block.orders);
            block.radius = radius.unwrap_or(block.radius);
            commands::converge(&model, &block)?
        }
        Command::Sample { steps, stream } => {
            let mut block = file.sample;
            block.steps = steps.unwrap_or(block.steps);
            block.stream = stream.unwrap_or(block.stream);
            commands::sample(&model, &block, seed)?
        }
        Command::Gamma { n, samples, histogram } => {
            let mut block = file.gamma;
            block.n = n.unwrap_or(block.n);
            block.samples = samples.unwrap_or(block.samples);
            block.histogram = histogram.or(block.histogram);
            commands::gamma(&model, &block, seed)?
        }
        Command::Laplace { ns, x } => {
            let mut block = file.laplace;
            block.ns = ns.unwrap_or(block.ns);
            block.x = x.unwrap_or(block.x);
            commands::laplace(&model, &block)?
        }
        Command::Diffuse {
            paths,
            dt,
            n,
            groups,
            compare_paths,
        } => {
            let mut block = file.diffuse;
            block.paths = paths.unwrap_or(block.paths);
            block.dt = dt.unwrap_or(block.dt);
            block.n = n.unwrap_or(block.n);
            block.groups = groups.unwrap_or(block.groups);
            block.compare_paths = compare_paths.unwrap_or(block.compare_paths);
            commands::diffuse(&model, &block, seed)?
        }
        Command::Moments { max_k } => {
            let mut block = file.moments;
            block.max_k = max_k.unwrap_or(block.max_k);
            commands::moments(&model, &block)?
        }
    };
    Ok((report, format, out))
}

fn render(report: &Report, format: Option<Format>) -> String {
    match (format, &report.text) {
        (Some(Format::Json), _) => {
            let mut s = serde_json::to_string_pretty(&report.json).expect("report is valid JSON");
            s.push('\n');
            s
        }
        (None, Some(text)) => text.clone(),
        _ => report.csv.clone(),
    }
}

fn emit_error(err: &CliError) -> ExitCode {
    let body = json!({
        "error": {
            "kind": err.kind(),
            "message": err.to_string(),
            "exit_code": err.exit_code(),
        }
    });
    eprintln!("{body}");
    ExitCode::from(err.exit_code())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) if !e.use_stderr() => e.exit(),
        Err(e) => return emit_error(&CliError::Config(e.to_string().trim_end().to_string())),
    };
    let quiet = cli.quiet;
    let (report, format, out) = match run(cli) {
        Ok(r) => r,
        Err(e) => return emit_error(&e),
    };
    let body = render(&report, format);
    if let Some(path) = out {
        if let Err(e) = std::fs::write(&path, &body) {
            return emit_error(&CliError::Io(format!("cannot write {}: {e}", path.display())));
        }
    } else if !quiet {
        let mut stdout = std::io::stdout().lock();
        if stdout.write_all(body.as_bytes()).is_err() {
            return ExitCode::from(2);
        }
    }
    if report.passed {
        ExitCode::SUCCESS
    } else {
        ExitCode::from(EXIT_CHECK_FAILED)
    }
}
