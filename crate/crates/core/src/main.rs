use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use log::{error, info, warn};

use mhealth_audit::detect::DetectionSet;
use mhealth_audit::fixtures::{evaluate_detector, generate_corpus, FixtureConfig, GroundTruth};
use mhealth_audit::model::LedgerEntry;
use mhealth_audit::pipeline::{self, Audit, EXIT_FATAL, EXIT_OK, EXIT_PARTIAL, OUTPUT_DIR_ENV};
use mhealth_audit::Result;

#[derive(Parser)]
#[command(
    name = "mhaudit",
    version,
    about = "Privacy audit of mobile health app corpora"
)]
struct Cli {
    /// Worker threads; 0 uses all cores.
    #[arg(long, global = true, default_value_t = 0)]
    jobs: usize,
    /// Only log errors.
    #[arg(long, short, global = true)]
    quiet: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Target {
    /// Corpus manifest.
    #[arg(long)]
    manifest: PathBuf,
    /// Overrides the manifest's output directory.
    #[arg(long, env = OUTPUT_DIR_ENV)]
    output_dir: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Command {
    /// Match embedded tracker libraries in app artifacts.
    ScanStatic(Target),
    /// Label every contacted host as tracker or non-tracker.
    ClassifyHosts(Target),
    /// Search captured traffic for persona values.
    Detect(Target),
    /// Scope and privacy-label evaluation of stored detections.
    Assess(Target),
    /// Render the report bundle from stored stage outputs.
    Report(Target),
    /// All stages in order.
    Run(Target),
    /// Synthetic corpora with ground truth.
    #[command(subcommand)]
    Fixtures(FixturesCommand),
}

#[derive(Subcommand)]
enum FixturesCommand {
    /// Write a corpus directory.
    Gen {
        /// roundtrip, crawl-comparison, decoy or anchors.
        #[arg(long, conflicts_with = "config")]
        preset: Option<String>,
        /// Fixture plan JSON.
        #[arg(long)]
        config: Option<PathBuf>,
        /// Overrides the plan's seed.
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Score stored detections against a corpus's ground truth.
    Eval {
        /// Ground-truth JSON written by `fixtures gen`.
        #[arg(long)]
        truth: PathBuf,
        /// Directory holding detections.jsonl and detections_summary.json.
        #[arg(long)]
        stages: PathBuf,
    },
}

fn stage<T>(
    target: &Target,
    run: impl FnOnce(&Audit) -> Result<T>,
    ledger: impl FnOnce(&T) -> Vec<LedgerEntry>,
) -> Result<Vec<LedgerEntry>> {
    let audit = Audit::load(&target.manifest, target.output_dir.as_deref())?;
    info!(
        "{} apps, output in {}",
        audit.apps.len(),
        audit.output_dir.display()
    );
    let out = run(&audit)?;
    Ok(ledger(&out))
}

fn gen(preset: Option<&str>, config: Option<&Path>, seed: Option<u64>, out: &Path) -> Result<i32> {
    let mut plan = match (preset, config) {
        (_, Some(path)) => FixtureConfig::load(path)?,
        (Some(name), None) => FixtureConfig::preset(name, seed.unwrap_or(0))?,
        (None, None) => FixtureConfig::roundtrip(seed.unwrap_or(0)),
    };
    if let Some(seed) = seed {
        plan.seed = seed;
    }
    let corpus = generate_corpus(&plan, out)?;
    println!("{}", corpus.manifest.display());
    info!(
        "{} apps, {} planted hits",
        corpus.truth.apps.len(),
        corpus.truth.hits.len()
    );
    Ok(EXIT_OK)
}

fn eval(truth: &Path, stages: &Path) -> Result<i32> {
    let truth = GroundTruth::load(truth)?;
    let set = DetectionSet::import(
        &stages.join("detections.jsonl"),
        &stages.join("detections_summary.json"),
    )?;
    let score = evaluate_detector(&set, &truth)?;
    println!(
        "{}",
        serde_json::to_string_pretty(&score).expect("score serializes")
    );
    Ok(if score.missed.is_empty() && score.spurious.is_empty() {
        EXIT_OK
    } else {
        EXIT_PARTIAL
    })
}

fn dispatch(command: &Command) -> Result<i32> {
    let ledger = match command {
        Command::ScanStatic(t) => stage(t, pipeline::run_scan_static, |s| s.errors.clone()),
        Command::ClassifyHosts(t) => stage(t, pipeline::run_classify_hosts, |s| s.errors.clone()),
        Command::Detect(t) => stage(t, pipeline::run_detect, |s| s.errors.clone()),
        Command::Assess(t) => stage(t, pipeline::run_assess, |_| Vec::new()),
        Command::Report(t) => stage(t, pipeline::run_report, Clone::clone),
        Command::Run(t) => stage(t, pipeline::run_pipeline, Clone::clone),
        Command::Fixtures(FixturesCommand::Gen {
            preset,
            config,
            seed,
            out,
        }) => return gen(preset.as_deref(), config.as_deref(), *seed, out),
        Command::Fixtures(FixturesCommand::Eval { truth, stages }) => return eval(truth, stages),
    };
    if let Ok(entries) = &ledger {
        for e in entries {
            warn!("{} [{}]: {}", e.app_id, e.stage, e.message);
        }
    }
    let status = pipeline::exit_status(&ledger);
    ledger.map(|_| status)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(if cli.quiet {
        "error"
    } else {
        "info"
    }))
    .target(env_logger::Target::Stderr)
    .init();
    let code = pipeline::with_jobs(cli.jobs, || dispatch(&cli.command)).unwrap_or_else(|e| {
        error!("{e}");
        EXIT_FATAL
    });
    ExitCode::from(code as u8)
}
