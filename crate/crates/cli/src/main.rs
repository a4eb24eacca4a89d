use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::Context;
use clap::{Parser, Subcommand};
use flexigen_core::scenario::{analyze_path, validate_path, write_analysis, write_scenario, GenerateError, Mode};
use flexigen_core::{parse_config, validate_config, DayClass, GenerationConfig};

/// Like `println!`, but a closed pipe (`flexigen analyze ... | head`) is not
/// a panic.
macro_rules! say {
    ($($arg:tt)*) => {{
        use std::io::Write as _;
        let _ = writeln!(std::io::stdout(), $($arg)*);
    }};
}

#[derive(Parser)]
#[command(name = "flexigen", version, about = "Synthetic EV charging-flexibility profiles")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate one CSV per EV plus a manifest.
    Generate {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        mode: Mode,
        /// Overrides FLEXIGEN_SEED, which overrides the config's seed.
        #[arg(long, env = "FLEXIGEN_SEED")]
        seed: Option<u64>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Check profile CSVs (a file or a scenario directory).
    Validate {
        #[arg(long)]
        input: PathBuf,
    },
    /// Write run-length, hourly-profile and trip-duration tables.
    Analyze {
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
}

fn load_config(path: &Path) -> anyhow::Result<Option<GenerationConfig>> {
    let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    let cfg = parse_config(&text).with_context(|| format!("parsing {}", path.display()))?;
    let report = validate_config(&cfg);
    for f in &report.findings {
        eprintln!("{}: {f}", path.display());
    }
    Ok((!report.has_fatal()).then_some(cfg))
}

fn generate(config: &Path, mode: Mode, seed: Option<u64>, out: &Path) -> anyhow::Result<ExitCode> {
    let Some(cfg) = load_config(config)? else {
        eprintln!("refusing to generate from a config with fatal findings");
        return Ok(ExitCode::FAILURE);
    };
    let seed = seed.unwrap_or(cfg.extensions.seed);
    let written = match write_scenario(&cfg, mode, seed, out) {
        Ok(w) => w,
        Err(GenerateError::InvalidConfig(report)) => {
            eprint!("{report}");
            return Ok(ExitCode::FAILURE);
        }
        Err(e) => return Err(e.into()),
    };
    say!(
        "wrote {} {mode} profiles ({} days, seed {seed}) to {}",
        written.manifest.profiles.len(),
        written.manifest.horizon_days,
        written.dir.display()
    );
    Ok(ExitCode::SUCCESS)
}

fn validate(input: &Path) -> anyhow::Result<ExitCode> {
    let mut fatal = 0;
    let mut total = 0;
    for (path, report) in validate_path(input)? {
        total += report.findings.len();
        fatal += report.fatal_count();
        if report.is_clean() {
            say!("ok      {}", path.display());
        } else {
            say!("FAILED  {}", path.display());
            for f in &report.findings {
                say!("  {f}");
            }
        }
    }
    if total == 0 {
        Ok(ExitCode::SUCCESS)
    } else {
        eprintln!("{total} findings ({fatal} fatal)");
        Ok(ExitCode::FAILURE)
    }
}

fn analyze(input: &Path, out: &Path) -> anyhow::Result<ExitCode> {
    let analysis = analyze_path(input)?;
    let files = write_analysis(&analysis, out)?;
    let h = &analysis.hourly;
    say!(
        "{} profiles; longest connected run {} h; modal run {} h",
        analysis.profiles.len(),
        analysis.run_lengths.longest().unwrap_or(0),
        analysis.run_lengths.modal_length().unwrap_or(0)
    );
    say!(
        "weekday connected share at 03:00 {:.3}, at 11:00 {:.3}",
        h.at_clock(DayClass::Weekday, 3),
        h.at_clock(DayClass::Weekday, 11)
    );
    if let Some(median) = analysis.trips.median {
        say!(
            "{} trips; median {median:.1} min; {:.1}% within 10-60 min",
            analysis.trips.count,
            analysis.trips.share_10_60.unwrap_or(0.0) * 100.0
        );
    }
    for f in files {
        say!("wrote {}", f.display());
    }
    Ok(ExitCode::SUCCESS)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Generate {
            config,
            mode,
            seed,
            out,
        } => generate(config, *mode, *seed, out),
        Command::Validate { input } => validate(input),
        Command::Analyze { input, out } => analyze(input, out),
    };
    match result {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
