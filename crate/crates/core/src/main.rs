use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use log::info;

use dipe::correlation::{correlation_matrix, export_heatmap, CorrelationMatrix};
use dipe::fusion::{evaluate_members, export_fused};
use dipe::io::{load_manifest, Dataset};
use dipe::metrics::{score_models, ModelScores, Threshold};
use dipe::num::json_number;
use dipe::report::{parse_k_range, render, sweep, Format};
use dipe::selection::{select, EnsembleSelection, Strategy};
use dipe::synth::{generate, SynthSpec};
use dipe::{Error, Result};

/// Diversity-promoting ensemble selection for segmentation models.
#[derive(Debug, Parser)]
#[command(name = "dipe", version)]
struct Cli {
    /// Worker threads (default: one per core). Results do not depend on it.
    #[arg(long, global = true)]
    threads: Option<usize>,

    /// Foreground cut-off applied to probabilities (p >= t).
    #[arg(long, global = true, default_value_t = 0.5)]
    threshold: f64,

    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Score every model against ground truth (JSON).
    Eval(EvalArgs),
    /// Pairwise agreement matrix (CSV plus PGM heatmap).
    Corr(CorrArgs),
    /// Select an ensemble (JSON with the greedy trace).
    Select(SelectArgs),
    /// Fuse an ensemble by probability averaging and export its masks.
    Fuse(FuseArgs),
    /// Sweep the budget k for several strategies.
    Report(ReportArgs),
    /// Generate a synthetic model zoo.
    Synth(SynthArgs),
}

#[derive(Debug, Args)]
struct EvalArgs {
    #[arg(long)]
    manifest: PathBuf,
    /// Output file (default: stdout).
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct CorrArgs {
    #[arg(long)]
    manifest: PathBuf,
    /// CSV output; the heatmap goes next to it with a .pgm extension.
    /// Without it the CSV is printed.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct SelectArgs {
    /// dipe, dipe-ablated, topk, all or exhaustive.
    #[arg(long, default_value = "dipe")]
    strategy: String,
    #[arg(long)]
    k: usize,
    /// Correlation CSV written by `dipe corr`.
    #[arg(long)]
    corr: Option<PathBuf>,
    /// Scores JSON written by `dipe eval`.
    #[arg(long)]
    scores: Option<PathBuf>,
    /// Prediction manifest; needed for `exhaustive`, and used to compute
    /// scores or correlations that are not given as files.
    #[arg(long)]
    manifest: Option<PathBuf>,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct FuseArgs {
    #[arg(long)]
    manifest: PathBuf,
    /// Selection JSON written by `dipe select`.
    #[arg(long, conflicts_with = "members", required_unless_present = "members")]
    selection: Option<PathBuf>,
    /// Comma-separated model ids.
    #[arg(long, value_delimiter = ',')]
    members: Option<Vec<String>>,
    /// Directory for fused.csv (and fused maps with --maps).
    #[arg(long)]
    out: PathBuf,
    /// Also write fused probability maps as <slice>.dipe.
    #[arg(long)]
    maps: bool,
}

#[derive(Debug, Args)]
struct ReportArgs {
    #[arg(long)]
    manifest: PathBuf,
    #[arg(long, value_delimiter = ',', default_value = "topk,dipe")]
    strategies: Vec<String>,
    /// Inclusive budget range such as 2..9 (default: 2..n).
    #[arg(long)]
    k: Option<String>,
    /// table, csv or series (default: csv).
    #[arg(long, default_value = "csv")]
    format: String,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct SynthArgs {
    #[arg(long)]
    spec: PathBuf,
    #[arg(long)]
    out: PathBuf,
}

fn emit(out: Option<&Path>, text: &str) -> Result<()> {
    match out {
        Some(path) => std::fs::write(path, text).map_err(|e| Error::Io {
            path: path.to_path_buf(),
            source: e,
        }),
        None => {
            let mut stdout = std::io::stdout().lock();
            stdout
                .write_all(text.as_bytes())
                .and_then(|_| stdout.flush())
                .map_err(|e| Error::Io {
                    path: PathBuf::from("<stdout>"),
                    source: e,
                })
        }
    }
}

fn load(path: &Path) -> Result<Dataset> {
    let manifest = load_manifest(path)?;
    let dataset = Dataset::load(&manifest)?;
    info!(
        "loaded {} models x {} slices from {}",
        dataset.n_models(),
        dataset.n_slices(),
        path.display()
    );
    Ok(dataset)
}

fn run_eval(args: &EvalArgs, t: Threshold) -> Result<()> {
    let dataset = load(&args.manifest)?;
    let scores = score_models(&dataset, t)?;
    emit(args.out.as_deref(), &scores.to_json())
}

fn run_corr(args: &CorrArgs, t: Threshold) -> Result<()> {
    let dataset = load(&args.manifest)?;
    let c = correlation_matrix(&dataset, t)?;
    match &args.out {
        Some(path) => {
            let pgm = export_heatmap(&c, path)?;
            info!("wrote {} and {}", path.display(), pgm.display());
            Ok(())
        }
        None => emit(None, &c.to_csv()),
    }
}

fn run_select(args: &SelectArgs, t: Threshold) -> Result<()> {
    let strategy: Strategy = args.strategy.parse()?;
    let dataset = match &args.manifest {
        Some(path) => Some(load(path)?),
        None => None,
    };
    let corr = match (&args.corr, &dataset) {
        (Some(path), _) => CorrelationMatrix::read_csv(path)?,
        (None, Some(ds)) => correlation_matrix(ds, t)?,
        (None, None) => {
            return Err(Error::Invalid(
                "select needs --corr or --manifest".to_string(),
            ))
        }
    };
    let model_ids = corr.model_ids().to_vec();
    if let Some(ds) = &dataset {
        if ds.model_ids() != model_ids.as_slice() {
            return Err(Error::Invalid(
                "correlation matrix models do not match the manifest".to_string(),
            ));
        }
    }
    let scores = match (&args.scores, &dataset) {
        (Some(path), _) => ModelScores::read(path)?.aligned_to(&model_ids)?,
        (None, Some(ds)) => score_models(ds, t)?,
        (None, None) => {
            return Err(Error::Invalid(
                "select needs --scores or --manifest".to_string(),
            ))
        }
    };
    let selection = select(strategy, &corr, &scores.dice, args.k, dataset.as_ref(), t)?;
    emit(args.out.as_deref(), &selection.to_json(&model_ids))
}

fn run_fuse(args: &FuseArgs, t: Threshold) -> Result<()> {
    let dataset = load(&args.manifest)?;
    let members = match (&args.selection, &args.members) {
        (Some(path), _) => {
            let text = std::fs::read_to_string(path).map_err(|e| Error::Io {
                path: path.clone(),
                source: e,
            })?;
            EnsembleSelection::from_json(&text, dataset.model_ids())?.members
        }
        (None, Some(ids)) => ids
            .iter()
            .map(|id| {
                dataset
                    .model_index(id)
                    .ok_or_else(|| Error::Invalid(format!("unknown model {id:?}")))
            })
            .collect::<Result<Vec<_>>>()?,
        (None, None) => unreachable!("clap requires one of --selection/--members"),
    };
    export_fused(&dataset, &members, t, &args.out, args.maps)?;
    let score = evaluate_members(&dataset, &members, t)?;
    let value = serde_json::json!({
        "members": members.iter().map(|&m| dataset.model_ids()[m].clone()).collect::<Vec<_>>(),
        "dice": json_number(score.dice),
        "iou": json_number(score.iou),
    });
    emit(
        None,
        &format!("{}\n", serde_json::to_string_pretty(&value).unwrap()),
    )
}

fn run_report(args: &ReportArgs, t: Threshold) -> Result<()> {
    let format: Format = args.format.parse()?;
    let strategies = args
        .strategies
        .iter()
        .map(|s| s.parse())
        .collect::<Result<Vec<Strategy>>>()?;
    let dataset = load(&args.manifest)?;
    let n = dataset.n_models();
    let range = match &args.k {
        Some(text) => parse_k_range(text, n)?,
        None => 2.min(n)..=n,
    };
    let report = sweep(&dataset, &strategies, range, t)?;
    emit(args.out.as_deref(), &render(&report, format))
}

fn run_synth(args: &SynthArgs) -> Result<()> {
    let spec = SynthSpec::read(&args.spec)?;
    let manifest = generate(&spec, &args.out)?;
    info!(
        "generated {} models x {} slices in {}",
        manifest.n_models(),
        manifest.n_slices(),
        args.out.display()
    );
    Ok(())
}

fn run(cli: &Cli) -> Result<()> {
    let t = Threshold::new(cli.threshold)?;
    match &cli.command {
        Command::Eval(args) => run_eval(args, t),
        Command::Corr(args) => run_corr(args, t),
        Command::Select(args) => run_select(args, t),
        Command::Fuse(args) => run_fuse(args, t),
        Command::Report(args) => run_report(args, t),
        Command::Synth(args) => run_synth(args),
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::new().filter_or("DIPE_LOG", "warn")).init();

    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };

    if let Some(threads) = cli.threads {
        if threads == 0 {
            eprintln!("error: --threads must be at least 1");
            return ExitCode::from(1);
        }
        if let Err(e) = rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build_global()
        {
            eprintln!("error: cannot start thread pool: {e}");
            return ExitCode::from(2);
        }
    }

    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}
