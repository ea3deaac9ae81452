use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use spectest::harness::{export, run_experiment, ExperimentConfig, ExportFormat};
use spectest::{
    preset_with, run_randomization_test, simulate, Analysis, AnalysisOptions, BandwidthSpec, DecisionRule,
    Innovation, Kernel, RandomizationConfig, RandomizationKind, SpectestError, TauPlugIn, TimeSeriesPanel,
};

const EXIT_REJECT: u8 = 10;
const EXIT_ERROR: u8 = 1;

#[derive(Parser)]
#[command(name = "spectest", version, about = "Tests for equal diagonal spectral density blocks")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Test a panel read from CSV and print a JSON report.
    Test(TestArgs),
    /// Simulate a benchmark model and write it as CSV.
    Simulate(SimulateArgs),
    /// Run a size/power experiment from a config file.
    Experiment(ExperimentArgs),
}

#[derive(Clone, Copy, ValueEnum)]
enum KindArg {
    Asymptotic,
    Uncentered,
    Centered,
    Studentized,
}

#[derive(Clone, Copy, ValueEnum)]
enum RuleArg {
    PValue,
    LiteralStepFive,
}

#[derive(Clone, Copy, ValueEnum)]
enum PlugInArg {
    NullImposed,
    Unrestricted,
}

#[derive(Args)]
struct TestArgs {
    #[arg(long)]
    input: PathBuf,
    #[arg(long)]
    p: usize,
    #[arg(long)]
    q: usize,
    #[arg(long, value_enum, default_value = "studentized")]
    kind: KindArg,
    #[arg(long = "B", default_value_t = 300)]
    draws: usize,
    #[arg(long, default_value_t = 0.05)]
    alpha: f64,
    #[arg(long, default_value_t = 42)]
    seed: u64,
    #[arg(long, conflicts_with = "cv")]
    bandwidth: Option<f64>,
    /// Choose the bandwidth by cross validation (the default).
    #[arg(long)]
    cv: bool,
    #[arg(long, default_value_t = 1.0)]
    cv_mult: f64,
    #[arg(long, default_value = "bartlett-priestley")]
    kernel: String,
    #[arg(long, value_enum, default_value = "p-value")]
    rule: RuleArg,
    #[arg(long, value_enum, default_value = "null-imposed")]
    tau_plug_in: PlugInArg,
    /// Skip sample-mean removal.
    #[arg(long)]
    no_demean: bool,
    #[arg(long)]
    workers: Option<usize>,
}

#[derive(Args)]
struct SimulateArgs {
    #[arg(long)]
    model: String,
    #[arg(long, default_value = "gaussian")]
    innovation: String,
    #[arg(long)]
    n: usize,
    #[arg(long, default_value_t = 1)]
    seed: u64,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct ExperimentArgs {
    #[arg(long)]
    config: PathBuf,
    #[arg(long)]
    out: PathBuf,
    #[arg(long)]
    workers: Option<usize>,
    /// Use 400 replications and 300 draws.
    #[arg(long)]
    paper_scale: bool,
    /// Also write the text layout next to the CSV.
    #[arg(long)]
    text: Option<PathBuf>,
}

fn run_test(args: TestArgs) -> Result<bool, SpectestError> {
    let panel = TimeSeriesPanel::read_csv_path(&args.input, args.p, args.q)?;
    let kernel = Kernel::by_name(&args.kernel)?;
    let bandwidth = match args.bandwidth {
        Some(h) => BandwidthSpec::Fixed(h),
        None => BandwidthSpec::CrossValidated {
            multiplier: args.cv_mult,
            candidates: None,
        },
    };
    let tau_plug_in = match args.tau_plug_in {
        PlugInArg::NullImposed => TauPlugIn::NullImposed,
        PlugInArg::Unrestricted => TauPlugIn::Unrestricted,
    };
    let report = match args.kind {
        KindArg::Asymptotic => {
            let h = spectest::randomization::resolve_bandwidth(&panel, &kernel, &bandwidth, !args.no_demean)?;
            let options = AnalysisOptions {
                demean: !args.no_demean,
                tau_plug_in,
            };
            Analysis::new(&panel, &kernel, h, &options)?.asymptotic_test(args.alpha)?
        }
        other => {
            let kind = match other {
                KindArg::Uncentered => RandomizationKind::Uncentered,
                KindArg::Centered => RandomizationKind::Centered,
                _ => RandomizationKind::Studentized,
            };
            let mut config = RandomizationConfig::new(kind, args.draws, args.alpha, args.seed, kernel, bandwidth);
            config.rule = match args.rule {
                RuleArg::PValue => DecisionRule::PValue,
                RuleArg::LiteralStepFive => DecisionRule::LiteralStepFive,
            };
            config.workers = args.workers;
            config.demean = !args.no_demean;
            config.tau_plug_in = tau_plug_in;
            run_randomization_test(&panel, &config)?
        }
    };
    let json = serde_json::to_string_pretty(&report).expect("reports serialize");
    println!("{json}");
    Ok(report.rejects())
}

fn run_simulate(args: SimulateArgs) -> Result<(), SpectestError> {
    let spec = preset_with(&args.model, Innovation::by_name(&args.innovation)?)?;
    let panel = simulate(&spec, args.n, args.seed)?;
    match &args.out {
        Some(path) => {
            let file = std::fs::File::create(path).map_err(|source| SpectestError::Io {
                path: path.clone(),
                source,
            })?;
            panel.write_csv(std::io::BufWriter::new(file)).map_err(|source| SpectestError::Io {
                path: path.clone(),
                source,
            })
        }
        None => {
            let stdout = std::io::stdout();
            let mut lock = stdout.lock();
            panel
                .write_csv(&mut lock)
                .and_then(|_| lock.flush())
                .map_err(|source| SpectestError::Io {
                    path: PathBuf::from("<stdout>"),
                    source,
                })
        }
    }
}

fn run_experiment_command(args: ExperimentArgs) -> Result<(), SpectestError> {
    let mut config = ExperimentConfig::from_path(&args.config)?;
    if let Ok(seed) = std::env::var("SPECTEST_SEED") {
        config.seed = seed
            .trim()
            .parse()
            .map_err(|_| SpectestError::InvalidInput(format!("SPECTEST_SEED={seed:?} is not an integer")))?;
    }
    if args.paper_scale {
        config = config.paper_scale();
    }
    let table = run_experiment(&config, args.workers)?;
    export(&table, &args.out, ExportFormat::Csv)?;
    if let Some(path) = &args.text {
        export(&table, path, ExportFormat::Text)?;
    }
    eprintln!("{}", spectest::harness::to_text(&table));
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let outcome = match cli.command {
        Command::Test(args) => run_test(args).map(|reject| if reject { EXIT_REJECT } else { 0 }),
        Command::Simulate(args) => run_simulate(args).map(|_| 0),
        Command::Experiment(args) => run_experiment_command(args).map(|_| 0),
    };
    match outcome {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(EXIT_ERROR)
        }
    }
}
