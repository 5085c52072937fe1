use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use framequery::data::{load_labels, load_score_table, load_scores, preset};
use framequery::episode::run_episode_traced;
use framequery::harness::{
    evaluate, parse_grid, synthesize, train, write_dataset, EvalConfig, InitialMode, ScoreSource,
    Weighting, DEFAULT_GRID, DEFAULT_MAX_CLIP_LEN, DEFAULT_SMOOTHING,
};
use framequery::server::serve;
use framequery::{HmmParams, LocalFrameSource, RemoteFrameSource, ServerCatalog};

#[derive(Parser)]
#[command(
    name = "framequery",
    version,
    about = "HMM-guided frame querying under a bandwidth budget"
)]
struct Cli {
    /// Seed for every random choice a command makes.
    #[arg(long, global = true, default_value_t = 0)]
    seed: u64,

    /// Worker threads for parallel work (default: all cores).
    #[arg(long, global = true)]
    jobs: Option<usize>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Fit HMM parameters and bin boundaries from labels and scores.
    Train(TrainArgs),
    /// Sweep bandwidth ratios and write mean accuracy per ratio as CSV.
    Eval(EvalArgs),
    /// Run one episode and dump its queries and final belief as JSON.
    Query(QueryArgs),
    /// Generate a synthetic dataset from known parameters.
    Synth(SynthArgs),
    /// Serve frame scores over TCP.
    Serve(ServeArgs),
}

#[derive(Args)]
struct TrainArgs {
    #[arg(long)]
    labels: PathBuf,
    #[arg(long)]
    scores: PathBuf,
    /// Additive smoothing for transition and emission counts.
    #[arg(long, default_value_t = DEFAULT_SMOOTHING)]
    smoothing: f64,
    #[arg(long, value_enum, default_value_t = Initial::Empirical)]
    initial: Initial,
    /// Output parameters file.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Clone, Copy, ValueEnum)]
enum Initial {
    Empirical,
    Stationary,
}

#[derive(Clone, Copy, ValueEnum)]
enum Baseline {
    Uniform,
}

#[derive(Clone, Copy, ValueEnum)]
enum Weight {
    Clips,
    Frames,
}

/// Where frame scores come from: a local scores file or a frame server.
#[derive(Args)]
struct SourceArgs {
    #[arg(long, conflicts_with = "server", required_unless_present = "server")]
    scores: Option<PathBuf>,
    /// Frame server address, e.g. 127.0.0.1:7878.
    #[arg(long)]
    server: Option<String>,
}

#[derive(Args)]
struct EvalArgs {
    #[arg(long)]
    labels: PathBuf,
    #[command(flatten)]
    source: SourceArgs,
    #[arg(long)]
    params: PathBuf,
    /// Bandwidth ratios as start:stop:step, endpoints inclusive.
    #[arg(long, default_value = DEFAULT_GRID)]
    grid: String,
    #[arg(long, default_value_t = DEFAULT_MAX_CLIP_LEN)]
    max_clip_len: usize,
    /// Also run a control policy with the same budget.
    #[arg(long, value_enum)]
    baseline: Option<Baseline>,
    /// How clip accuracies are averaged.
    #[arg(long, value_enum, default_value_t = Weight::Clips)]
    weighting: Weight,
    /// CSV output (stdout if omitted).
    #[arg(long)]
    out: Option<PathBuf>,
    /// Two-column plot data file.
    #[arg(long)]
    plot_out: Option<PathBuf>,
}

#[derive(Args)]
struct QueryArgs {
    #[arg(long)]
    params: PathBuf,
    #[command(flatten)]
    source: SourceArgs,
    /// Ground truth for accuracy (optional).
    #[arg(long)]
    labels: Option<PathBuf>,
    #[arg(long)]
    video: String,
    /// Fraction of frames the agent may request.
    #[arg(long)]
    bandwidth: f64,
    /// Episode JSON output (stdout if omitted).
    #[arg(long)]
    out: Option<PathBuf>,
    /// Write the expected loss of every frame before each request.
    #[arg(long)]
    dump_losses: Option<PathBuf>,
}

#[derive(Args)]
struct SynthArgs {
    /// Named parameter set.
    #[arg(long, conflicts_with = "params", required_unless_present = "params")]
    preset: Option<String>,
    /// Parameters file to sample from.
    #[arg(long)]
    params: Option<PathBuf>,
    #[arg(long, default_value_t = 100)]
    num_videos: usize,
    /// Frames per video.
    #[arg(long, default_value_t = 300)]
    frames: usize,
    /// Output directory.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct ServeArgs {
    #[arg(long, default_value = "127.0.0.1:7878")]
    listen: String,
    #[arg(long)]
    scores: PathBuf,
    /// Labels kept server-side; never sent to clients.
    #[arg(long)]
    labels: Option<PathBuf>,
}

fn read_params(path: &Path) -> Result<HmmParams> {
    let text =
        std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    HmmParams::from_json(&text).with_context(|| format!("parsing {}", path.display()))
}

fn write_output(path: Option<&Path>, contents: &str) -> Result<()> {
    match path {
        Some(path) => {
            std::fs::write(path, contents).with_context(|| format!("writing {}", path.display()))
        }
        None => {
            let mut stdout = std::io::stdout().lock();
            stdout.write_all(contents.as_bytes())?;
            Ok(stdout.flush()?)
        }
    }
}

fn cmd_train(args: TrainArgs) -> Result<()> {
    let records = load_scores(&args.scores, load_labels(&args.labels)?)?;
    let initial = match args.initial {
        Initial::Empirical => InitialMode::Empirical,
        Initial::Stationary => InitialMode::Stationary,
    };
    let params = train(&records, args.smoothing, initial)?;
    write_output(Some(&args.out), &(params.to_json() + "\n"))
}

fn cmd_eval(args: EvalArgs, jobs: Option<usize>) -> Result<()> {
    let params = read_params(&args.params)?;
    let mut records = load_labels(&args.labels)?;
    let scores_from = match (&args.source.scores, &args.source.server) {
        (Some(scores), _) => {
            records = load_scores(scores, records)?;
            ScoreSource::Local
        }
        (None, Some(server)) => ScoreSource::Remote(server.clone()),
        (None, None) => bail!("one of --scores or --server is required"),
    };
    let config = EvalConfig {
        grid: parse_grid(&args.grid)?,
        max_clip_len: args.max_clip_len,
        baseline: args.baseline.is_some(),
        weighting: match args.weighting {
            Weight::Clips => Weighting::Clips,
            Weight::Frames => Weighting::Frames,
        },
        jobs,
    };
    let sweep = evaluate(&params, &records, &scores_from, &config)?;
    if let Some(plot) = &args.plot_out {
        write_output(Some(plot), &sweep.to_plot_data())?;
    }
    write_output(args.out.as_deref(), &sweep.to_csv())
}

fn cmd_query(args: QueryArgs) -> Result<()> {
    let params = read_params(&args.params)?;
    let binner = params.binner();
    let labels = match &args.labels {
        Some(path) => {
            let record = load_labels(path)?
                .into_iter()
                .find(|r| r.video_id == args.video)
                .with_context(|| {
                    format!("{}: no labels for video {}", path.display(), args.video)
                })?;
            Some(record.labels)
        }
        None => None,
    };
    let (result, trace) = match (&args.source.scores, &args.source.server) {
        (Some(path), _) => {
            let table = load_score_table(path)?;
            let scores = table.get(&args.video).with_context(|| {
                format!("{}: no scores for video {}", path.display(), args.video)
            })?;
            let source = LocalFrameSource::new(scores);
            run_episode_traced(&params, &binner, source, args.bandwidth, labels.as_deref())?
        }
        (None, Some(server)) => {
            let mut source = RemoteFrameSource::connect(server.as_str(), &args.video)
                .with_context(|| format!("connecting to {server}"))?;
            let outcome = run_episode_traced(
                &params,
                &binner,
                &mut source,
                args.bandwidth,
                labels.as_deref(),
            )?;
            source.close()?;
            outcome
        }
        (None, None) => bail!("one of --scores or --server is required"),
    };
    if let Some(path) = &args.dump_losses {
        let losses: Vec<_> = trace.iter().map(|plan| &plan.expected_losses).collect();
        write_output(Some(path), &(serde_json::to_string(&losses)? + "\n"))?;
    }
    write_output(args.out.as_deref(), &(result.to_json() + "\n"))
}

fn cmd_synth(args: SynthArgs, seed: u64) -> Result<()> {
    let params = match (&args.preset, &args.params) {
        (Some(name), _) => preset(name)?,
        (None, Some(path)) => read_params(path)?,
        (None, None) => bail!("one of --preset or --params is required"),
    };
    let records = synthesize(&params, args.num_videos, args.frames, seed)?;
    write_dataset(&args.out, &params, &records)?;
    Ok(())
}

fn cmd_serve(args: ServeArgs) -> Result<()> {
    let mut catalog = ServerCatalog::from_scores_file(&args.scores)?;
    if let Some(labels) = &args.labels {
        catalog = catalog.with_labels_file(labels)?;
    }
    let videos = catalog.len();
    let server =
        serve(catalog, args.listen.as_str()).with_context(|| format!("binding {}", args.listen))?;
    let trigger = server.shutdown_trigger();
    ctrlc::set_handler(move || trigger.trigger()).context("installing signal handler")?;
    eprintln!("serving {videos} videos on {}", server.local_addr());
    server.wait();
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let outcome = match cli.command {
        Command::Train(args) => cmd_train(args),
        Command::Eval(args) => cmd_eval(args, cli.jobs),
        Command::Query(args) => cmd_query(args),
        Command::Synth(args) => cmd_synth(args, cli.seed),
        Command::Serve(args) => cmd_serve(args),
    };
    match outcome {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err:#}");
            ExitCode::FAILURE
        }
    }
}
