use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use nfkp_cli::commands::{self, PlotFile};
use nfkp_cli::config::RunConfig;
use nfkp_cli::report::ReportBuilder;

#[derive(Parser)]
#[command(name = "nfkp", version, about = "Non-formal KP hierarchy: factorization, checks, flows and symbol tables")]
struct Cli {
    #[command(subcommand)]
    command: Command,
    /// JSON run configuration; defaults apply when absent.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Directory for report.json and data files; the report goes to stdout otherwise.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Overrides the config seed.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Comma-separated record names or dotted prefixes to keep.
    #[arg(long, global = true, value_delimiter = ',')]
    only: Option<Vec<String>>,
    #[arg(long, short, global = true)]
    verbose: bool,
}

#[derive(Subcommand, Clone, Copy)]
enum Command {
    /// Solve the Birkhoff factorization and check it.
    Factorize,
    /// KP residuals, zero curvature, Yang-Mills and KP-II reductions.
    Check,
    /// Integrate the truncated flows and compare with the jet.
    Flow,
    /// Closed-form rows of L², L³ and their commutator.
    PaperTable,
}

impl Command {
    fn name(self) -> &'static str {
        match self {
            Command::Factorize => "factorize",
            Command::Check => "check",
            Command::Flow => "flow",
            Command::PaperTable => "paper-table",
        }
    }
}

fn load(cli: &Cli) -> Result<RunConfig, String> {
    let mut cfg = match &cli.config {
        Some(path) => {
            let text = std::fs::read_to_string(path).map_err(|e| format!("{}: {e}", path.display()))?;
            RunConfig::parse(&text).map_err(|e| format!("{}: {e}", path.display()))?
        }
        None => RunConfig::default(),
    };
    if let Some(seed) = cli.seed {
        cfg.seed = seed;
    }
    match cli.command {
        Command::Check | Command::Flow => cfg.require_kp2().map_err(|e| e.to_string())?,
        Command::PaperTable if cfg.d != 1 => return Err("paper-table needs d = 1".into()),
        _ => {}
    }
    Ok(cfg)
}

fn write_all(dir: &Path, json: &str, files: &[PlotFile]) -> std::io::Result<()> {
    std::fs::create_dir_all(dir)?;
    std::fs::write(dir.join("report.json"), json)?;
    for f in files {
        std::fs::write(dir.join(&f.name), &f.body)?;
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    env_logger::Builder::new()
        .filter_level(if cli.verbose { log::LevelFilter::Debug } else { log::LevelFilter::Warn })
        .init();
    let cfg = match load(&cli) {
        Ok(cfg) => cfg,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(2);
        }
    };
    let rb = ReportBuilder::new(cli.command.name(), cfg.clone(), cli.only.clone());
    let outcome = match cli.command {
        Command::Factorize => commands::factorize(&cfg, rb),
        Command::Check => commands::check(&cfg, rb),
        Command::Flow => commands::flow(&cfg, rb),
        Command::PaperTable => commands::paper_table(&cfg, rb),
    };
    let report = outcome.report.finish();
    let json = report.to_json();
    match &cli.out {
        Some(dir) => {
            if let Err(e) = write_all(dir, &json, &outcome.files) {
                eprintln!("error: {}: {e}", dir.display());
                return ExitCode::from(1);
            }
            for r in &report.records {
                println!("{} {}", if r.pass { "PASS" } else { "FAIL" }, r.name);
            }
        }
        None => print!("{json}"),
    }
    if report.pass {
        ExitCode::SUCCESS
    } else {
        ExitCode::from(1)
    }
}
