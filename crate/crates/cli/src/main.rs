//! `humpty`: runs a named scenario, writes CSV artifacts and `summary.json`
//! into the output directory, and optionally checks the summary against an
//! expectations file.

mod error;
mod expect;
mod scenario;
mod summary;

use clap::Parser;
use error::CliError;
use humpty_core::exec::Execution;
use humpty_core::params::{apply_overrides, ConstantsSet, ExperimentConfig};
use scenario::{Context, Scenario};
use std::path::PathBuf;
use std::process::ExitCode;
use std::time::Instant;

#[derive(Debug, Parser)]
#[command(name = "humpty", version, about = "Self-gravity phase shift scenarios")]
struct Args {
    scenario: Scenario,
    /// TOML config applied on top of the baseline experiment.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long, default_value = "humpty-out")]
    out: PathBuf,
    /// Physical constants set: paper or codata.
    #[arg(long)]
    constants: Option<String>,
    /// Worker threads for sweeps and the grid solver; 1 runs sequentially,
    /// 0 uses every core.
    #[arg(long, default_value_t = 0)]
    jobs: usize,
    /// CSV of `quantity,target,tolerance,source` rows to check the summary
    /// against.
    #[arg(long)]
    expectations: Option<PathBuf>,
}

fn read(path: &PathBuf) -> Result<String, CliError> {
    std::fs::read_to_string(path).map_err(CliError::io(format!("reading {}", path.display())))
}

/// Baseline experiment under the requested constants with the config file
/// applied. A config naming a different constants set than the flag is
/// rejected.
fn load_config(args: &Args, doc: Option<&str>) -> Result<ExperimentConfig, CliError> {
    let constants = match &args.constants {
        Some(name) => ConstantsSet::by_name(name).ok_or_else(|| {
            CliError::Usage(format!(
                "unknown constants set `{name}` (expected one of {})",
                ConstantsSet::NAMES.join(", ")
            ))
        })?,
        None => ConstantsSet::paper(),
    };
    let base = ExperimentConfig::baseline(constants);
    let cfg = match doc {
        Some(doc) => apply_overrides(base, doc)?,
        None => base.checked()?,
    };
    if let Some(name) = &args.constants {
        if &cfg.constants.name != name {
            return Err(CliError::Usage(format!(
                "config selects constants `{}` but --constants is `{name}`",
                cfg.constants.name
            )));
        }
    }
    Ok(cfg)
}

fn execute(args: &Args) -> Result<bool, CliError> {
    let started = Instant::now();
    let doc = args.config.as_ref().map(read).transpose()?;
    let config = load_config(args, doc.as_deref())?;
    let expectations = match &args.expectations {
        Some(path) => Some(expect::parse(&read(path)?)?),
        None => None,
    };
    std::fs::create_dir_all(&args.out)
        .map_err(CliError::io(format!("creating {}", args.out.display())))?;
    let ctx = Context {
        config,
        overrides: doc.as_deref(),
        out: &args.out,
        exec: Execution::from_jobs(args.jobs),
    };
    let mut summary = scenario::run(args.scenario, &ctx)?;
    summary.wall_time_s = started.elapsed().as_secs_f64();
    summary.artifacts.push("summary.json".into());
    let path = args.out.join("summary.json");
    let json = serde_json::to_string_pretty(&summary).expect("summary serializes");
    std::fs::write(&path, json + "\n")
        .map_err(CliError::io(format!("writing {}", path.display())))?;

    if let Some(d) = summary.delta_phi_rad {
        println!("{}: delta_phi(T5) = {d:.6} rad", summary.scenario);
    }
    for (k, v) in &summary.quantities {
        println!("  {k} = {v:.9e}");
    }
    let Some(expectations) = expectations else {
        return Ok(true);
    };
    if expectations.is_empty() {
        eprintln!("warning: expectations file has no rows; nothing to check");
        return Ok(true);
    }
    let lines = expect::compare(&summary, &expectations);
    for line in &lines {
        println!("{line}");
    }
    Ok(lines.iter().all(|l| l.pass))
}

fn main() -> ExitCode {
    let args = Args::parse();
    match execute(&args) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("{}", e.report());
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
