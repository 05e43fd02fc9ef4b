use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use curvlines::report::{self, AnalysisConfig, LambdaRange, Mode};

#[derive(Parser)]
#[command(name = "curvlines", version, about = "Principal curvature lines, umbilics and their bifurcations")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Locate and classify umbilics.
    Analyze(Common),
    /// Umbilics, separatrices and principal lines, with an SVG portrait.
    Portrait(Common),
    /// Continue umbilic branches over a parameter range and detect events.
    Sweep(Common),
    /// Search for principal cycles.
    Cycles(Common),
    /// Print the JSON schema of the configuration or the report.
    Schema {
        #[arg(value_parser = ["config", "report"])]
        which: String,
    },
}

#[derive(Args)]
struct Common {
    /// JSON configuration file.
    #[arg(long)]
    config: PathBuf,
    /// Output directory; overrides `output.dir`.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    tol_umbilic: Option<f64>,
    /// Parameter range `start:end:steps`.
    #[arg(long)]
    lambda_range: Option<LambdaRange>,
    #[arg(long)]
    seed_grid: Option<usize>,
    /// Only log errors.
    #[arg(long)]
    quiet: bool,
}

const EXIT_CONFIG: u8 = 2;
const EXIT_COMPUTE: u8 = 3;

fn execute(mode: Mode, c: Common) -> ExitCode {
    let level = if c.quiet { "error" } else { "info" };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).init();
    let path = c.config.to_string_lossy().into_owned();
    let mut cfg = match AnalysisConfig::load(&path) {
        Ok(cfg) => cfg,
        Err(e) => {
            log::error!("{e}");
            return ExitCode::from(EXIT_CONFIG);
        }
    };
    cfg.mode = mode;
    if let Some(t) = c.tol_umbilic {
        cfg.tol_umbilic = t;
    }
    if let Some(r) = c.lambda_range {
        cfg.lambda_range = Some(r);
    }
    if let Some(n) = c.seed_grid {
        cfg.seed_grid = n;
    }
    if let Some(dir) = &c.out {
        cfg.output.dir = Some(dir.to_string_lossy().into_owned());
    }
    let out = match report::run(&cfg) {
        Ok(out) => out,
        Err(e) => {
            log::error!("{e}");
            return ExitCode::from(EXIT_CONFIG);
        }
    };
    match &cfg.output.dir {
        Some(dir) => {
            if let Err(e) = out.write(std::path::Path::new(dir)) {
                log::error!("{e}");
                return ExitCode::from(EXIT_COMPUTE);
            }
            log::info!("wrote {dir}/{}", cfg.output.report);
        }
        None => print!("{}", out.document.to_json()),
    }
    let doc = &out.document;
    log::info!(
        "{} umbilics, {} curves, {} cycles, {} branches, {} events",
        doc.umbilics.len(),
        doc.curves.len(),
        doc.cycles.len(),
        doc.branches.len(),
        doc.events.len()
    );
    for e in &doc.errors {
        log::error!("{}: {}", e.stage, e.message);
    }
    if doc.has_errors() {
        ExitCode::from(EXIT_COMPUTE)
    } else {
        ExitCode::SUCCESS
    }
}

fn main() -> ExitCode {
    match Cli::parse().command {
        Command::Analyze(c) => execute(Mode::Analyze, c),
        Command::Portrait(c) => execute(Mode::Portrait, c),
        Command::Sweep(c) => execute(Mode::Sweep, c),
        Command::Cycles(c) => execute(Mode::Cycles, c),
        Command::Schema { which } => {
            let s = if which == "config" { report::config_schema() } else { report::report_schema() };
            print!("{s}");
            ExitCode::SUCCESS
        }
    }
}
