//! Training, bandwidth sweeps and synthetic datasets.

use std::fmt::Write as _;
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::data::{
    clip_video, compute_quantiles, generate_synthetic, write_labels, write_scores, VideoRecord,
};
use crate::episode::{
    frame_budget, run_episode_at_budgets, uniform_baseline_episode, FrameSource, LocalFrameSource,
    WindowSource,
};
use crate::error::{Error, Result};
use crate::hmm::{
    estimate_emission, estimate_initial, estimate_transition, stationary_distribution, HmmParams,
    Label, Symbol,
};
use crate::server::RemoteFrameSource;

pub const DEFAULT_GRID: &str = "0:0.1:0.005";
pub const DEFAULT_MAX_CLIP_LEN: usize = 300;
pub const DEFAULT_SMOOTHING: f64 = 1.0;

const GRID_SLACK: f64 = 1e-9;

/// How the initial label distribution is chosen during training.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum InitialMode {
    /// Label frequencies over all training frames.
    #[default]
    Empirical,
    /// Stationary distribution of the estimated transition matrix.
    Stationary,
}

/// Fits transition, emission, initial distribution and bin boundaries.
///
/// Only videos with at least one frame of interest contribute. Bin boundaries
/// are pooled over every frame score of those videos.
pub fn train(records: &[VideoRecord], smoothing: f64, initial: InitialMode) -> Result<HmmParams> {
    let qualifying: Vec<&VideoRecord> = records
        .iter()
        .filter(|r| r.has_frame_of_interest())
        .collect();
    if qualifying.is_empty() {
        return Err(Error::NoFramesOfInterest);
    }
    let mut scores = Vec::new();
    for r in &qualifying {
        let s = r.scores.as_ref().ok_or_else(|| {
            Error::MisalignedSequences(format!("video {} has labels but no scores", r.video_id))
        })?;
        scores.extend_from_slice(s);
    }
    let binner = compute_quantiles(&scores)?;
    let labels: Vec<&[Label]> = qualifying.iter().map(|r| r.labels.as_slice()).collect();
    let observations: Vec<Vec<Symbol>> = qualifying
        .iter()
        .map(|r| {
            r.scores
                .iter()
                .flatten()
                .map(|&s| binner.discretize(s))
                .collect()
        })
        .collect();
    let transition = estimate_transition(&labels, smoothing)?;
    let emission = estimate_emission(&labels, &observations, smoothing)?;
    let initial = match initial {
        InitialMode::Empirical => estimate_initial(&labels)?,
        InitialMode::Stationary => stationary_distribution(&transition),
    };
    HmmParams::new(transition, emission, initial, binner.boundaries())
}

/// Parses `start:stop:step`, inclusive of `stop` within 1e-9.
pub fn parse_grid(spec: &str) -> Result<Vec<f64>> {
    let parts: Vec<&str> = spec.split(':').collect();
    let bad = |why: &str| Error::Argument(format!("grid {spec:?}: {why}"));
    let [start, stop, step] = parts.as_slice() else {
        return Err(bad("expected start:stop:step"));
    };
    let parse = |s: &str| s.trim().parse::<f64>().map_err(|_| bad("not a number"));
    let (start, stop, step) = (parse(start)?, parse(stop)?, parse(step)?);
    if !(0.0..=1.0).contains(&start) || !(0.0..=1.0).contains(&stop) || start > stop {
        return Err(bad("bounds must satisfy 0 <= start <= stop <= 1"));
    }
    if start == stop {
        return Ok(vec![start]);
    }
    if step.is_nan() || step <= 0.0 {
        return Err(bad("step must be positive"));
    }
    let mut grid = Vec::new();
    for i in 0.. {
        let b = start + i as f64 * step;
        if b > stop + GRID_SLACK {
            break;
        }
        // 0.005 * 3 prints as 0.015, not 0.015000000000000001
        let b = (b * 1e12).round() / 1e12;
        grid.push(b.min(1.0));
    }
    Ok(grid)
}

/// How per-clip accuracies are combined into one number per bandwidth ratio.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Weighting {
    /// Every clip counts equally.
    #[default]
    Clips,
    /// Clips are weighted by their frame count.
    Frames,
}

/// Where evaluation scores come from.
#[derive(Debug, Clone)]
pub enum ScoreSource {
    /// Scores attached to the evaluation records.
    Local,
    /// A frame server; one session per clip.
    Remote(String),
}

#[derive(Debug, Clone)]
pub struct EvalConfig {
    pub grid: Vec<f64>,
    pub max_clip_len: usize,
    pub baseline: bool,
    pub weighting: Weighting,
    /// Worker threads; `None` uses all cores.
    pub jobs: Option<usize>,
}

impl Default for EvalConfig {
    fn default() -> Self {
        EvalConfig {
            grid: parse_grid(DEFAULT_GRID).expect("default grid parses"),
            max_clip_len: DEFAULT_MAX_CLIP_LEN,
            baseline: false,
            weighting: Weighting::Clips,
            jobs: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepRow {
    pub bandwidth_ratio: f64,
    pub mean_accuracy: f64,
    pub episodes: usize,
    pub uniform_accuracy: Option<f64>,
}

/// Mean accuracy per bandwidth ratio.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepResult {
    pub rows: Vec<SweepRow>,
}

const CSV_HEADER: &str = "bandwidth_ratio,mean_accuracy,episodes";

impl SweepResult {
    pub fn has_baseline(&self) -> bool {
        self.rows.iter().any(|r| r.uniform_accuracy.is_some())
    }

    pub fn to_csv(&self) -> String {
        let baseline = self.has_baseline();
        let mut out = String::from(CSV_HEADER);
        if baseline {
            out.push_str(",uniform_accuracy");
        }
        out.push('\n');
        for r in &self.rows {
            let _ = write!(
                out,
                "{},{},{}",
                r.bandwidth_ratio, r.mean_accuracy, r.episodes
            );
            if let (true, Some(u)) = (baseline, r.uniform_accuracy) {
                let _ = write!(out, ",{u}");
            }
            out.push('\n');
        }
        out
    }

    pub fn from_csv(text: &str) -> Result<Self> {
        let mut lines = text.lines().enumerate();
        let bad = |line: usize, message: String| Error::Parse {
            path: "<csv>".into(),
            line,
            message,
        };
        let (_, header) = lines
            .next()
            .ok_or_else(|| bad(1, "missing header".into()))?;
        let baseline = match header {
            CSV_HEADER => false,
            h if h == format!("{CSV_HEADER},uniform_accuracy") => true,
            other => return Err(bad(1, format!("unexpected header {other:?}"))),
        };
        let mut rows = Vec::new();
        for (i, line) in lines {
            if line.is_empty() {
                continue;
            }
            let fields: Vec<&str> = line.split(',').collect();
            let expected = if baseline { 4 } else { 3 };
            if fields.len() != expected {
                return Err(bad(i + 1, format!("expected {expected} fields")));
            }
            let num = |s: &str| {
                s.parse::<f64>()
                    .map_err(|e| bad(i + 1, format!("{s:?}: {e}")))
            };
            rows.push(SweepRow {
                bandwidth_ratio: num(fields[0])?,
                mean_accuracy: num(fields[1])?,
                episodes: fields[2]
                    .parse()
                    .map_err(|e| bad(i + 1, format!("{:?}: {e}", fields[2])))?,
                uniform_accuracy: if baseline {
                    Some(num(fields[3])?)
                } else {
                    None
                },
            });
        }
        Ok(SweepResult { rows })
    }

    /// Two whitespace-separated columns, ratio and accuracy, for plotting.
    pub fn to_plot_data(&self) -> String {
        let mut out = String::from("# bandwidth_ratio mean_accuracy\n");
        for r in &self.rows {
            let _ = writeln!(out, "{} {}", r.bandwidth_ratio, r.mean_accuracy);
        }
        out
    }
}

struct Clip {
    video_id: String,
    start: usize,
    labels: Vec<Label>,
    scores: Option<Vec<f64>>,
}

/// Accuracies of one clip at each grid point: greedy, then uniform if requested.
type ClipOutcome = (usize, Vec<f64>, Option<Vec<f64>>);

fn run_clip<S: FrameSource>(
    params: &HmmParams,
    clip: &Clip,
    mut source: S,
    config: &EvalConfig,
) -> Result<ClipOutcome> {
    let binner = params.binner();
    let len = clip.labels.len();
    let budgets = config
        .grid
        .iter()
        .map(|&b| frame_budget(b, len))
        .collect::<Result<Vec<_>>>()?;
    let labels = Some(clip.labels.as_slice());
    let greedy = run_episode_at_budgets(params, &binner, &mut source, &budgets, labels, None)?
        .into_iter()
        .map(|r| r.accuracy.expect("labels supplied"))
        .collect();
    let uniform = if config.baseline {
        let mut acc = Vec::with_capacity(config.grid.len());
        for &b in &config.grid {
            let r = uniform_baseline_episode(params, &binner, &mut source, b, labels)?;
            acc.push(r.accuracy.expect("labels supplied"));
        }
        Some(acc)
    } else {
        None
    };
    Ok((len, greedy, uniform))
}

fn evaluate_clip(
    params: &HmmParams,
    clip: &Clip,
    scores_from: &ScoreSource,
    config: &EvalConfig,
) -> Result<ClipOutcome> {
    let len = clip.labels.len();
    match scores_from {
        ScoreSource::Local => {
            let scores = clip.scores.as_deref().ok_or_else(|| {
                Error::MisalignedSequences(format!("video {} has no scores", clip.video_id))
            })?;
            run_clip(params, clip, LocalFrameSource::new(scores), config)
        }
        ScoreSource::Remote(addr) => {
            let remote = RemoteFrameSource::connect(addr.as_str(), &clip.video_id)?;
            if remote.frame_count() < clip.start + len {
                return Err(Error::MisalignedSequences(format!(
                    "server has {} frames of {}, labels cover {}",
                    remote.frame_count(),
                    clip.video_id,
                    clip.start + len
                )));
            }
            let window = WindowSource::new(remote, clip.start, len)?;
            run_clip(params, clip, window, config)
        }
    }
}

fn mean(values: impl Iterator<Item = (f64, f64)>) -> f64 {
    let (num, den) = values.fold((0.0, 0.0), |(n, d), (v, w)| (n + v * w, d + w));
    num / den
}

/// Accuracy-versus-bandwidth sweep over the videos with a frame of interest.
pub fn evaluate(
    params: &HmmParams,
    records: &[VideoRecord],
    scores_from: &ScoreSource,
    config: &EvalConfig,
) -> Result<SweepResult> {
    if config.grid.is_empty() {
        return Err(Error::Argument("empty bandwidth grid".into()));
    }
    if config.grid.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::Argument(
            "bandwidth grid must be strictly increasing".into(),
        ));
    }
    let mut clips = Vec::new();
    for record in records.iter().filter(|r| r.has_frame_of_interest()) {
        for (k, c) in clip_video(record, config.max_clip_len)?
            .into_iter()
            .enumerate()
        {
            clips.push(Clip {
                video_id: record.video_id.clone(),
                start: k * config.max_clip_len,
                labels: c.labels,
                scores: c.scores,
            });
        }
    }
    if clips.is_empty() {
        return Err(Error::EmptyEvaluationSet);
    }

    let mut pool = rayon::ThreadPoolBuilder::new();
    if let Some(jobs) = config.jobs {
        pool = pool.num_threads(jobs.max(1));
    }
    let pool = pool
        .build()
        .map_err(|e| Error::Argument(format!("thread pool: {e}")))?;
    let outcomes: Vec<ClipOutcome> = pool.install(|| {
        clips
            .par_iter()
            .map(|clip| evaluate_clip(params, clip, scores_from, config))
            .collect::<Result<Vec<_>>>()
    })?;

    let weight = |len: usize| match config.weighting {
        Weighting::Clips => 1.0,
        Weighting::Frames => len as f64,
    };
    let rows = config
        .grid
        .iter()
        .enumerate()
        .map(|(i, &b)| SweepRow {
            bandwidth_ratio: b,
            mean_accuracy: mean(outcomes.iter().map(|(len, g, _)| (g[i], weight(*len)))),
            episodes: outcomes.len(),
            uniform_accuracy: config.baseline.then(|| {
                mean(
                    outcomes
                        .iter()
                        .map(|(len, _, u)| (u.as_ref().expect("baseline run")[i], weight(*len))),
                )
            }),
        })
        .collect();
    Ok(SweepResult { rows })
}

/// Reproducible synthetic dataset of `num_videos` videos of `len` frames.
pub fn synthesize(
    params: &HmmParams,
    num_videos: usize,
    len: usize,
    seed: u64,
) -> Result<Vec<VideoRecord>> {
    if num_videos == 0 || len == 0 {
        return Err(Error::Argument(
            "need at least one video of at least one frame".into(),
        ));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..num_videos)
        .map(|i| {
            let video = generate_synthetic(params, len, rng.gen())?;
            VideoRecord::new(format!("synth{i:05}"), video.labels)?.with_scores(video.scores)
        })
        .collect()
}

/// Writes `labels.jsonl`, `scores.jsonl` and `params.json` into `dir`.
pub fn write_dataset(
    dir: impl AsRef<Path>,
    params: &HmmParams,
    records: &[VideoRecord],
) -> Result<()> {
    let dir = dir.as_ref();
    std::fs::create_dir_all(dir).map_err(|e| Error::file(dir, e))?;
    write_labels(dir.join("labels.jsonl"), records)?;
    write_scores(dir.join("scores.jsonl"), records)?;
    let params_path = dir.join("params.json");
    std::fs::write(&params_path, params.to_json() + "\n").map_err(|e| Error::file(params_path, e))
}
