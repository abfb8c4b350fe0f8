mod config;
mod fail;
mod table;

use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use kaleido_core::dataset::{build_subtasks, corpus_stats, parse_corpus_dir, split_by_situation, write_split_files};
use kaleido_core::decision::{decide, WeightOverrides};
use kaleido_core::ethics::{predict_all, read_examples_file, write_predictions, Subset};
use kaleido_core::evalkit::{grouped_accuracy, label_accuracy};
use kaleido_core::tuner::{gibbs_tune, objective, Coordinate, EvalItem, ParamGrid, TemperatureSchedule, TuneConfig};
use kaleido_core::{Execution, Pipeline, PipelineOutput, ScoredCandidate, SystemParams};
use serde::{Deserialize, Serialize};

use config::{read_json, service_config, BackendFlags, CliConfig};
use fail::{Failure, Outcome};

#[derive(Parser)]
#[command(name = "kaleido", version, about = "Values, rights and duties for a situation, and what they imply")]
struct Cli {
    /// JSON config: backend descriptor and default params.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Use a fixture backend file (overrides config and environment).
    #[arg(long, global = true)]
    fixture: Option<PathBuf>,
    /// Use a remote backend at this base URL.
    #[arg(long, global = true)]
    backend_url: Option<String>,
    /// Run batch work on one thread.
    #[arg(long, global = true)]
    sequential: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate, score and filter values for an action.
    Values {
        #[arg(long)]
        action: String,
        #[arg(long)]
        params: Option<PathBuf>,
        #[arg(long, value_enum, default_value_t = Format::Json)]
        format: Format,
    },
    /// Aggregate scored candidates into a judgment distribution.
    Decide {
        /// Candidate list, or a `values` JSON output.
        #[arg(long = "in")]
        input: PathBuf,
        /// Map from candidate index to weight.
        #[arg(long)]
        weights: Option<PathBuf>,
        #[arg(long)]
        binary: bool,
    },
    #[command(subcommand)]
    Dataset(DatasetCommand),
    /// Coordinate search over the filter thresholds.
    Tune(TuneArgs),
    #[command(subcommand)]
    Eval(EvalCommand),
    /// Run the HTTP service.
    Serve {
        #[arg(long)]
        bind: Option<String>,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum Format {
    Json,
    Table,
}

#[derive(Subcommand)]
enum DatasetCommand {
    /// Parse raw batches and write train/val/test task files.
    Build {
        #[arg(long)]
        raw: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Per-kind counts for a raw corpus.
    Stats {
        #[arg(long)]
        raw: PathBuf,
    },
}

#[derive(Args)]
struct TuneArgs {
    /// JSON list of {action, references}.
    #[arg(long)]
    eval: PathBuf,
    /// JSON grid with one value list per threshold.
    #[arg(long)]
    grid: PathBuf,
    #[arg(long, default_value_t = 3)]
    sweeps: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Starting params; defaults to the first grid value on every axis.
    #[arg(long)]
    init: Option<PathBuf>,
    /// Fixed sampling temperature instead of the geometric schedule.
    #[arg(long)]
    temperature: Option<f64>,
    /// Directory for `trace.json` and `best_params.json`.
    #[arg(long, default_value = ".")]
    out: PathBuf,
}

#[derive(Subcommand)]
enum EvalCommand {
    /// Zero-shot accuracy on one ETHICS subset.
    Ethics {
        #[arg(long)]
        subset: Subset,
        #[arg(long)]
        data: PathBuf,
        /// Write per-example predictions as JSONL.
        #[arg(long)]
        predictions: Option<PathBuf>,
    },
}

#[derive(Debug, Serialize, Deserialize)]
struct EthicsReport {
    subset: Subset,
    examples: usize,
    accuracy: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    grouped_accuracy: Option<f64>,
}

#[derive(Deserialize)]
#[serde(untagged)]
enum DecideInput {
    List(Vec<ScoredCandidate>),
    Output { candidates: Vec<ScoredCandidate> },
}

fn print_json<T: Serialize>(value: &T) -> Outcome<()> {
    let mut out = std::io::stdout().lock();
    serde_json::to_writer_pretty(&mut out, value)?;
    writeln!(out)?;
    Ok(())
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Outcome<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    std::fs::write(path, text).map_err(|e| Failure::Runtime(format!("{}: {e}", path.display())))
}

fn load_params(path: Option<&PathBuf>, cfg: &CliConfig) -> Outcome<SystemParams> {
    let params = match path {
        Some(p) => read_json(p)?,
        None => cfg.params(),
    };
    params.validate().map_err(Failure::usage)?;
    Ok(params)
}

fn run(cli: Cli) -> Outcome<()> {
    let flags = BackendFlags {
        config: cli.config.clone(),
        fixture: cli.fixture.clone(),
        backend_url: cli.backend_url.clone(),
    };
    let exec = if cli.sequential { Execution::Sequential } else { Execution::Parallel };
    match cli.command {
        Command::Values { action, params, format } => {
            if action.trim().is_empty() {
                return Err(Failure::usage("--action must be non-empty"));
            }
            let cfg = CliConfig::resolve(&flags)?;
            let params = load_params(params.as_ref(), &cfg)?;
            let backend = cfg.backend()?.connect()?;
            let out: PipelineOutput = Pipeline::new(&backend).with_execution(exec).generate_values(&action, &params)?;
            match format {
                Format::Json => print_json(&out),
                Format::Table => {
                    print!("{}", table::render(&out));
                    Ok(())
                }
            }
        }
        Command::Decide { input, weights, binary } => {
            let candidates = match read_json::<DecideInput>(&input)? {
                DecideInput::List(c) | DecideInput::Output { candidates: c } => c,
            };
            let weights: WeightOverrides = match weights {
                Some(p) => read_json(&p)?,
                None => WeightOverrides::default(),
            };
            print_json(&decide(&candidates, &weights, binary)?)
        }
        Command::Dataset(DatasetCommand::Build { raw, out, seed }) => {
            let records = parse_corpus_dir(&raw, exec)?;
            let rows = build_subtasks(&records, seed)?;
            let assignment = split_by_situation(records.len(), seed);
            let counts = write_split_files(&out, &rows, &assignment)?;
            print_json(&counts)
        }
        Command::Dataset(DatasetCommand::Stats { raw }) => {
            let records = parse_corpus_dir(&raw, exec)?;
            print_json(&corpus_stats(&records))
        }
        Command::Tune(args) => tune(args, &flags, exec),
        Command::Eval(EvalCommand::Ethics { subset, data, predictions }) => {
            let cfg = CliConfig::resolve(&flags)?;
            let examples = read_examples_file(subset, &data).map_err(Failure::usage)?;
            let backend = cfg.backend()?.connect()?;
            let preds = predict_all(&backend, &examples, exec)?;
            if let Some(path) = predictions {
                let file = std::fs::File::create(&path)?;
                write_predictions(std::io::BufWriter::new(file), &preds)?;
            }
            let predicted: Vec<bool> = preds.iter().map(|p| p.predicted_positive).collect();
            let gold: Vec<bool> = preds.iter().map(|p| p.gold_positive).collect();
            let grouped = match subset.group_size() {
                Some(g) if !preds.is_empty() && preds.len() % g == 0 => Some(grouped_accuracy(&predicted, &gold, g)?),
                _ => None,
            };
            print_json(&EthicsReport {
                subset,
                examples: preds.len(),
                accuracy: label_accuracy(&predicted, &gold)?,
                grouped_accuracy: grouped,
            })
        }
        Command::Serve { bind } => {
            let cfg = service_config(&flags, bind)?;
            let rt = tokio::runtime::Runtime::new()?;
            rt.block_on(kaleido_service::serve(cfg, async {
                let _ = tokio::signal::ctrl_c().await;
                log::info!("shutting down");
            }))
            .map_err(|e| Failure::Runtime(e.to_string()))
        }
    }
}

fn tune(args: TuneArgs, flags: &BackendFlags, exec: Execution) -> Outcome<()> {
    let cfg = CliConfig::resolve(flags)?;
    let eval_set: Vec<EvalItem> = read_json(&args.eval)?;
    let grid: ParamGrid = read_json(&args.grid)?;
    grid.validate().map_err(Failure::usage)?;
    let init = match &args.init {
        Some(p) => read_json(p)?,
        None => {
            let mut p = cfg.params();
            for c in Coordinate::ALL {
                if let Some(v) = grid.axis(c).first() {
                    c.set(&mut p, *v);
                }
            }
            p
        }
    };
    let schedule = match args.temperature {
        Some(t) => TemperatureSchedule::Constant { temperature: t },
        None => TemperatureSchedule::default(),
    };
    let tune_cfg = TuneConfig {
        sweeps: args.sweeps,
        schedule,
        seed: args.seed,
        exec,
    };
    let backend = cfg.backend()?.connect()?;
    // grid points are evaluated concurrently, so each evaluation runs its pipeline sequentially
    let trace = gibbs_tune(&grid, &init, &tune_cfg, |p| {
        objective(&backend, p, &eval_set, Execution::Sequential)
    })?;
    std::fs::create_dir_all(&args.out)?;
    write_json(&args.out.join("trace.json"), &trace)?;
    write_json(&args.out.join("best_params.json"), &trace.best_params)?;
    print_json(&trace.best_params)
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {f}");
            f.exit_code()
        }
    }
}
