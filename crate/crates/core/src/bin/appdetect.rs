//! `appdetect`: generate data, preprocess, run experiments and report.
//!
//! Exit codes: 0 success, 1 invalid input or configuration, 2 runtime
//! failure, 3 every run hit its time budget.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use appliance_detect::dataio::{write_dataset, HouseholdRecord};
use appliance_detect::harness::config::parse_seeds;
use appliance_detect::harness::{
    self, load_records, report, DatasetSource, ExperimentConfig, Ini, ReportFormat, RunRecord, RunStatus,
};
use appliance_detect::preprocess::{build_instances, split_instances, write_split};
use appliance_detect::Error;

#[derive(Parser)]
#[command(name = "appdetect", version, about = "Appliance detection benchmarks on smart-meter load curves")]
struct Cli {
    /// Worker threads for data-parallel steps (default: all cores).
    #[arg(long, global = true)]
    threads: Option<usize>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// Experiment configuration file.
    #[arg(long)]
    config: PathBuf,

    /// Seeds as a list `1,2,3` or a range `1..5`; overrides the config.
    #[arg(long)]
    seeds: Option<String>,

    /// Per-run time budget in seconds; overrides the config.
    #[arg(long)]
    budget_s: Option<f64>,
}

#[derive(Subcommand)]
enum Command {
    /// Write the synthetic dataset described by the config as CSV files.
    Generate {
        #[command(flatten)]
        common: Common,
        /// Output directory.
        #[arg(long)]
        out: PathBuf,
    },
    /// Write preprocessed splits, one directory per interval and seed.
    Preprocess {
        #[command(flatten)]
        common: Common,
        /// Output directory.
        #[arg(long)]
        out: PathBuf,
    },
    /// Benchmark every classifier at the configured intervals.
    Run {
        #[command(flatten)]
        common: Common,
        /// Results file (JSON lines, appended).
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Benchmark at 1, 10, 15 and 30 minutes, or the configured intervals.
    SweepFrequency {
        #[command(flatten)]
        common: Common,
        /// Results file (JSON lines, appended).
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Train on growing fractions of the training houses or series.
    SweepDatasize {
        #[command(flatten)]
        common: Common,
        /// Results file (JSON lines, appended).
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Render results as a table.
    Report {
        /// Results file, directory of `.jsonl` files, or a wildcard.
        results: PathBuf,
        /// `markdown` or `csv`.
        #[arg(long, default_value = "markdown")]
        format: String,
        /// Write the table here instead of stdout.
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn exit_code(err: &Error) -> u8 {
    match err {
        Error::Validation(_) | Error::Parse { .. } | Error::Dimension { .. } => 1,
        Error::Timeout { .. } => 3,
        Error::Runtime(_) | Error::Io(_) => 2,
    }
}

fn load_config(common: &Common) -> Result<ExperimentConfig, Error> {
    let mut ini = Ini::load(&common.config)?;
    if let Some(seeds) = &common.seeds {
        ini.set("experiment", "seeds", seeds.as_str());
        ini.set("experiment", "n_runs", parse_seeds(seeds)?.len().to_string());
    }
    if let Some(b) = common.budget_s {
        ini.set("experiment", "budget_s", b.to_string());
    }
    let base = common.config.parent().unwrap_or(Path::new("."));
    ExperimentConfig::from_ini(&ini, base)
}

fn generate(common: &Common, out: &Path) -> Result<(), Error> {
    let cfg = load_config(common)?;
    if !matches!(cfg.source, DatasetSource::Synthetic(_)) {
        return Err(Error::Validation("generate needs a [synthetic] section and no [dataset] path".into()));
    }
    let records = load_records(&cfg)?;
    write_dataset(out, &records)?;
    println!("wrote {} households to {}", records.len(), out.display());
    Ok(())
}

fn preprocess(common: &Common, out: &Path) -> Result<(), Error> {
    let cfg = load_config(common)?;
    let records = load_records(&cfg)?;
    for interval in cfg.intervals() {
        let instances = build_instances(&records, &cfg.case_id, &cfg.preprocess_for(interval, 0))?;
        for &seed in &cfg.seeds {
            let pcfg = cfg.preprocess_for(interval, seed);
            let split = split_instances(&instances, pcfg.split, seed)?;
            let dir = out.join(format!("interval_{interval}s")).join(format!("seed_{seed}"));
            write_split(&dir, &split, &cfg.case_id, &pcfg)?;
            println!(
                "{}: train {} / validation {} / test {}",
                dir.display(),
                split.train.len(),
                split.validation.len(),
                split.test.len()
            );
        }
    }
    Ok(())
}

fn experiment(
    common: &Common,
    out: Option<&Path>,
    run: fn(&[HouseholdRecord], &ExperimentConfig) -> Result<Vec<RunRecord>, Error>,
) -> Result<u8, Error> {
    let cfg = load_config(common)?;
    let records = load_records(&cfg)?;
    let results = run(&records, &cfg)?;
    let path = out.map(Path::to_path_buf).or_else(|| cfg.output.clone()).unwrap_or_else(|| "results.jsonl".into());
    harness::write_results(&results, &path)?;
    eprintln!("appended {} records to {}", results.len(), path.display());
    if results.iter().any(RunRecord::is_ok) {
        println!("{}", report(&results, ReportFormat::Markdown)?);
    }
    for r in results.iter().filter(|r| !r.is_ok()) {
        eprintln!("{} {:?}: {}", r.run_id, r.status, r.message.as_deref().unwrap_or(""));
    }
    Ok(if !results.is_empty() && results.iter().all(|r| r.status == RunStatus::Timeout) {
        3
    } else if !results.iter().any(RunRecord::is_ok) {
        2
    } else {
        0
    })
}

fn dispatch(cli: Cli) -> Result<u8, Error> {
    if let Some(n) = cli.threads {
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| Error::Runtime(format!("cannot configure {n} threads: {e}")))?;
    }
    match &cli.command {
        Command::Generate { common, out } => generate(common, out).map(|_| 0),
        Command::Preprocess { common, out } => preprocess(common, out).map(|_| 0),
        Command::Run { common, out } => experiment(common, out.as_deref(), harness::run_benchmark_on),
        Command::SweepFrequency { common, out } => experiment(common, out.as_deref(), harness::sweep_frequency_on),
        Command::SweepDatasize { common, out } => experiment(common, out.as_deref(), harness::sweep_datasize_on),
        Command::Report { results, format, out } => {
            let table = harness::report_path(results, format.parse()?)?;
            match out {
                Some(p) => std::fs::write(p, table)?,
                None => print!("{table}"),
            }
            Ok(0)
        }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match dispatch(cli) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}
