use std::path::PathBuf;
use std::process::ExitCode;

use auflow_core::ensemble::EnsembleConfig;
use auflow_core::experiment::{self, ExperimentConfig, RunStatus};
use auflow_core::synth::{self, SyntheticSpec};
use auflow_core::{AuId, Error};
use clap::{Args, Parser, Subcommand};

/// AU occurrence detection on precomputed CNN features.
#[derive(Parser)]
#[command(name = "auflow", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a seeded synthetic corpus and a matching experiment config.
    Synth(SynthArgs),
    /// Train every configured classifier on every configured AU.
    Train(RunArgs),
    /// Evaluate trained models and ensembles on the test split.
    Eval(EvalArgs),
    /// Write the per-AU face region crop manifest.
    Regions(RegionArgs),
    /// Print a comparison table over saved report JSON files.
    Report { reports: Vec<PathBuf> },
}

#[derive(Args)]
struct SynthArgs {
    /// Output directory.
    #[arg(long)]
    out: PathBuf,
    /// JSON spec file; flags below override its fields.
    #[arg(long)]
    spec: Option<PathBuf>,
    #[arg(long)]
    subjects: Option<usize>,
    #[arg(long)]
    frames: Option<usize>,
    #[arg(long)]
    dim: Option<usize>,
    #[arg(long)]
    separation: Option<f64>,
    #[arg(long)]
    seed: Option<u64>,
    /// Also write per-region feature sets.
    #[arg(long)]
    region_features: bool,
}

#[derive(Args)]
struct RunArgs {
    /// Experiment config (JSON).
    #[arg(long)]
    config: PathBuf,
    #[arg(long)]
    output_dir: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    threads: Option<usize>,
    /// Comma-separated AU list, e.g. `1,2,12`.
    #[arg(long, value_delimiter = ',')]
    aus: Option<Vec<AuId>>,
    #[arg(long)]
    threshold: Option<u8>,
}

#[derive(Args)]
struct EvalArgs {
    #[command(flatten)]
    run: RunArgs,
    /// Extra ensemble definition files (member model paths per AU).
    #[arg(long)]
    ensemble: Vec<PathBuf>,
}

#[derive(Args)]
struct RegionArgs {
    #[command(flatten)]
    run: RunArgs,
    /// Box margin as a fraction of box size.
    #[arg(long)]
    margin: Option<f64>,
}

const EXIT_VALIDATION: u8 = 1;
const EXIT_PARTIAL: u8 = 2;
const EXIT_FAILED: u8 = 3;

impl RunArgs {
    fn load(&self) -> auflow_core::Result<ExperimentConfig> {
        let mut cfg = ExperimentConfig::load(&self.config)?;
        if let Some(d) = &self.output_dir {
            cfg.output_dir = d.clone();
        }
        if let Some(s) = self.seed {
            cfg.seed = s;
        }
        if let Some(t) = self.threads {
            cfg.threads = Some(t);
        }
        if let Some(a) = &self.aus {
            cfg.aus = a.clone();
        }
        if let Some(t) = self.threshold {
            cfg.threshold = t;
        }
        Ok(cfg)
    }
}

fn status_code(status: RunStatus) -> ExitCode {
    match status {
        RunStatus::Success => ExitCode::SUCCESS,
        RunStatus::Partial => ExitCode::from(EXIT_PARTIAL),
        RunStatus::Failed => ExitCode::from(EXIT_FAILED),
    }
}

/// Errors raised before any model is trained or scored count as
/// validation failures.
fn error_code(e: &Error) -> ExitCode {
    match e {
        Error::Validation(_)
        | Error::Lookup { .. }
        | Error::Json(_)
        | Error::Csv(_)
        | Error::Io { .. }
        | Error::Format(_)
        | Error::Length { .. }
        | Error::Shape(_)
        | Error::Ordering(_)
        | Error::Domain(_) => ExitCode::from(EXIT_VALIDATION),
        _ => ExitCode::from(EXIT_FAILED),
    }
}

fn synth_cmd(args: &SynthArgs) -> auflow_core::Result<()> {
    let mut spec = match &args.spec {
        Some(p) => {
            let text = std::fs::read_to_string(p).map_err(|e| Error::Validation(format!("{}: {e}", p.display())))?;
            serde_json::from_str(&text)?
        }
        None => SyntheticSpec::default(),
    };
    spec.n_subjects = args.subjects.unwrap_or(spec.n_subjects);
    spec.frames_per_subject = args.frames.unwrap_or(spec.frames_per_subject);
    spec.feature_dim = args.dim.unwrap_or(spec.feature_dim);
    spec.class_separation = args.separation.unwrap_or(spec.class_separation);
    spec.seed = args.seed.unwrap_or(spec.seed);
    spec.region_features |= args.region_features;
    spec.validate()?;

    let data = synth::generate(&spec)?;
    std::fs::create_dir_all(&args.out).map_err(|e| Error::Validation(format!("{}: {e}", args.out.display())))?;
    let layout = synth::write_synthetic(&args.out, &data)?;
    let mut cfg = ExperimentConfig::for_synthetic(&layout, "run", spec.seed);
    for c in &mut cfg.classifiers {
        c.lstm.input_dim = spec.feature_dim;
    }
    cfg.save(args.out.join("config.json"))?;
    std::fs::write(args.out.join("synth.json"), serde_json::to_string_pretty(&spec)? + "\n")
        .map_err(|e| Error::Validation(e.to_string()))?;
    println!(
        "wrote {} subjects x {} frames (D={}) to {}",
        spec.n_subjects,
        spec.frames_per_subject,
        spec.feature_dim,
        args.out.display()
    );
    Ok(())
}

fn run(cli: Cli) -> Result<ExitCode, Error> {
    match cli.command {
        Command::Synth(args) => {
            synth_cmd(&args)?;
            Ok(ExitCode::SUCCESS)
        }
        Command::Train(args) => {
            let cfg = args.load()?;
            let summary = experiment::train(&cfg)?;
            for c in &summary.classifiers {
                for a in &c.aus {
                    match &a.error {
                        None => println!("{} AU{}: ok ({:.2}s)", c.name, a.au, a.seconds),
                        Some(e) => eprintln!("{} AU{}: failed: {e}", c.name, a.au),
                    }
                }
            }
            Ok(status_code(summary.status()))
        }
        Command::Eval(args) => {
            let cfg = args.run.load()?;
            let extra = args.ensemble.iter().map(EnsembleConfig::load).collect::<Result<Vec<_>, _>>()?;
            let summary = experiment::evaluate(&cfg, &extra)?;
            if !summary.reports.is_empty() {
                print!("{}", auflow_core::eval::comparison_table(&summary.reports));
            }
            for f in &summary.failures {
                match f.au {
                    Some(au) => eprintln!("{} AU{au}: {}", f.model, f.error),
                    None => eprintln!("{}: {}", f.model, f.error),
                }
            }
            Ok(status_code(summary.status()))
        }
        Command::Regions(args) => {
            let cfg = args.run.load()?;
            let (path, summary) = experiment::regions(&cfg, args.margin)?;
            println!("{} rows written to {}", summary.rows, path.display());
            for (s, f, e) in &summary.errors {
                eprintln!("{s}/{f}: {e}");
            }
            let status = match (summary.rows, summary.errors.len()) {
                (0, n) if n > 0 => RunStatus::Failed,
                (_, 0) => RunStatus::Success,
                _ => RunStatus::Partial,
            };
            Ok(status_code(status))
        }
        Command::Report { reports } => {
            print!("{}", experiment::report(&reports)?);
            Ok(ExitCode::SUCCESS)
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            error_code(&e)
        }
    }
}
