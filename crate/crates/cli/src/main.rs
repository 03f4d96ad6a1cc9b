use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use qcnn::ansatz::AnsatzSet;
use qcnn::architect::PaddingMethod;
use qcnn_cli::config::{check_scales, load_config};
use qcnn_cli::experiment::{run_noise_sweep, run_train};
use qcnn_cli::resources::{parse_range, parse_reps, range_rows, render, resource_rows, OutputFormat};
use qcnn_cli::{CliError, CliResult};

#[derive(Parser)]
#[command(name = "qcnn", version, about = "QCNN padding-strategy benchmarks")]
struct Cli {
    /// Worker threads for sample-level parallelism (default: all cores).
    #[arg(long, global = true)]
    jobs: Option<usize>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Closed-form ancilla, depth and parameter counts.
    Resources(ResourcesArgs),
    /// Train one configuration over several restarts.
    Train(RunArgs),
    /// Train the configured methods at several noise scales.
    NoiseSweep(SweepArgs),
}

#[derive(Clone, Copy, ValueEnum)]
enum FormatArg {
    Csv,
    Json,
}

#[derive(Args)]
struct ResourcesArgs {
    /// Input qubit count K.
    #[arg(long, conflicts_with = "range", required_unless_present = "range")]
    qubits: Option<usize>,
    /// Sweep K over an inclusive range, e.g. 2..64.
    #[arg(long)]
    range: Option<String>,
    /// Padding method name, or `all`.
    #[arg(long, default_value = "all")]
    method: String,
    /// Convolution repetitions: one value for every layer, or a
    /// comma-separated list per layer.
    #[arg(long, default_value = "1")]
    reps: String,
    /// Ansatz set 1 or 2; both when omitted (range mode defaults to 1).
    #[arg(long)]
    ansatz: Option<u8>,
    /// Report the shared-parameter count in the `params` column.
    #[arg(long)]
    sharing: bool,
    #[arg(long, value_enum, default_value = "csv")]
    format: FormatArg,
}

#[derive(Args)]
struct RunArgs {
    /// Experiment config, or a manifest.json from an earlier run.
    #[arg(long)]
    config: PathBuf,
    /// Overrides the config's output directory.
    #[arg(long)]
    output_dir: Option<PathBuf>,
}

#[derive(Args)]
struct SweepArgs {
    #[command(flatten)]
    run: RunArgs,
    /// Comma-separated noise multipliers, e.g. 1,3,5.
    #[arg(long)]
    scales: Option<String>,
}

fn ansatz_arg(a: Option<u8>) -> CliResult<Vec<AnsatzSet>> {
    match a {
        None => Ok(vec![AnsatzSet::One, AnsatzSet::Two]),
        Some(n) => AnsatzSet::try_from(n)
            .map(|s| vec![s])
            .map_err(|_| CliError::config(format!("--ansatz must be 1 or 2, got {n}"))),
    }
}

fn resources(args: &ResourcesArgs) -> CliResult<String> {
    let format = match args.format {
        FormatArg::Csv => OutputFormat::Csv,
        FormatArg::Json => OutputFormat::Json,
    };
    let reps = parse_reps(&args.reps)?;
    if let Some(range) = &args.range {
        let (a, b) = parse_range(range)?;
        let [l] = reps[..] else {
            return Err(CliError::config("--range needs a single --reps value"));
        };
        let set = ansatz_arg(Some(args.ansatz.unwrap_or(1)))?[0];
        return render(&range_rows(a, b, set, l)?, format);
    }
    let methods = if args.method == "all" {
        PaddingMethod::ALL.to_vec()
    } else {
        vec![args.method.parse().map_err(|e: qcnn::QcnnError| CliError::config(e.to_string()))?]
    };
    let k = args.qubits.expect("clap enforces --qubits or --range");
    render(&resource_rows(k, &methods, &ansatz_arg(args.ansatz)?, &reps, args.sharing)?, format)
}

fn load(args: &RunArgs) -> CliResult<qcnn_cli::config::ExperimentConfig> {
    let mut config = load_config(&args.config)?;
    if let Some(dir) = &args.output_dir {
        config.output_dir = std::path::absolute(dir).unwrap_or_else(|_| dir.clone());
    }
    Ok(config)
}

fn run(cli: Cli) -> CliResult<()> {
    if let Some(jobs) = cli.jobs {
        if jobs == 0 {
            return Err(CliError::config("--jobs must be at least 1"));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(jobs)
            .build_global()
            .map_err(|e| CliError::config(e.to_string()))?;
    }
    match cli.command {
        Command::Resources(args) => print!("{}", resources(&args)?),
        Command::Train(args) => {
            let config = load(&args)?;
            let out = run_train(&config)?;
            let r = &out.cells[0].report;
            println!(
                "test accuracy {:.4} +- {:.4} over {} restarts; outputs in {}",
                r.mean_test_accuracy,
                r.std_test_accuracy,
                r.restarts.len(),
                config.output_dir.display()
            );
        }
        Command::NoiseSweep(args) => {
            let config = load(&args.run)?;
            let scales = match &args.scales {
                Some(s) => {
                    let v = s
                        .split(',')
                        .map(|t| t.trim().parse::<f64>())
                        .collect::<Result<Vec<_>, _>>()
                        .map_err(|_| CliError::config(format!("--scales expects numbers like 1,3,5, got '{s}'")))?;
                    check_scales(&v)?;
                    Some(v)
                }
                None => None,
            };
            let out = run_noise_sweep(&config, scales.as_deref())?;
            for c in &out.cells {
                println!(
                    "{} x{}: {:.4} +- {:.4}",
                    c.method,
                    c.scale.unwrap_or(1.0),
                    c.report.mean_test_accuracy,
                    c.report.std_test_accuracy
                );
            }
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
