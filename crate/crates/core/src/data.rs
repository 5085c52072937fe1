//! Videos, score binning, JSON-lines datasets and synthetic generation.

use std::collections::{BTreeMap, HashMap};
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::hmm::{HmmParams, Label, Symbol, NUM_LABELS, NUM_SYMBOLS};

/// Ground truth labels for one video, with frame scores when available.
#[derive(Debug, Clone, PartialEq)]
pub struct VideoRecord {
    pub video_id: String,
    pub labels: Vec<Label>,
    pub scores: Option<Vec<f64>>,
}

impl VideoRecord {
    pub fn new(video_id: impl Into<String>, labels: Vec<Label>) -> Result<Self> {
        let video_id = video_id.into();
        if labels.is_empty() {
            return Err(Error::Argument(format!("video {video_id} has no frames")));
        }
        if let Some(bad) = labels.iter().find(|&&y| usize::from(y) >= NUM_LABELS) {
            return Err(Error::Argument(format!(
                "video {video_id} has label {bad}; labels must be 0 or 1"
            )));
        }
        Ok(VideoRecord {
            video_id,
            labels,
            scores: None,
        })
    }

    pub fn with_scores(mut self, scores: Vec<f64>) -> Result<Self> {
        if scores.len() != self.labels.len() {
            return Err(Error::MisalignedSequences(format!(
                "video {} has {} labels but {} scores",
                self.video_id,
                self.labels.len(),
                scores.len()
            )));
        }
        self.scores = Some(scores);
        Ok(self)
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn has_frame_of_interest(&self) -> bool {
        self.labels.contains(&1)
    }
}

/// Maps a raw score to one of three bins; intervals are right-closed.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuantileBinner {
    lower: f64,
    upper: f64,
}

impl QuantileBinner {
    pub fn new(lower: f64, upper: f64) -> Result<Self> {
        if lower.is_nan() || upper.is_nan() || lower > upper {
            return Err(Error::Argument(format!(
                "bin boundaries must be ascending, got ({lower}, {upper})"
            )));
        }
        Ok(QuantileBinner { lower, upper })
    }

    pub fn boundaries(&self) -> [f64; 2] {
        [self.lower, self.upper]
    }

    /// 0 for `score <= b1`, 1 for `b1 < score <= b2`, 2 above.
    pub fn discretize(&self, score: f64) -> Symbol {
        if score <= self.lower {
            0
        } else if score <= self.upper {
            1
        } else {
            2
        }
    }
}

/// Nearest-rank 1/3 and 2/3 quantiles of `scores`.
pub fn compute_quantiles(scores: &[f64]) -> Result<QuantileBinner> {
    if scores.len() < NUM_SYMBOLS {
        return Err(Error::InsufficientData(format!(
            "need at least {NUM_SYMBOLS} scores to place bin boundaries, got {}",
            scores.len()
        )));
    }
    if scores.iter().any(|s| s.is_nan()) {
        return Err(Error::Argument("scores contain NaN".into()));
    }
    let mut sorted = scores.to_vec();
    sorted.sort_by(f64::total_cmp);
    let n = sorted.len();
    let rank = |num: usize| (num * n).div_ceil(NUM_SYMBOLS);
    QuantileBinner::new(sorted[rank(1) - 1], sorted[rank(2) - 1])
}

/// Splits a video into consecutive clips of at most `max_len` frames.
pub fn clip_video(record: &VideoRecord, max_len: usize) -> Result<Vec<VideoRecord>> {
    if max_len == 0 {
        return Err(Error::Argument("clip length must be at least 1".into()));
    }
    let clips = record
        .labels
        .chunks(max_len)
        .enumerate()
        .map(|(k, labels)| {
            let start = k * max_len;
            VideoRecord {
                video_id: format!("{}#{k}", record.video_id),
                labels: labels.to_vec(),
                scores: record
                    .scores
                    .as_ref()
                    .map(|s| s[start..start + labels.len()].to_vec()),
            }
        })
        .collect();
    Ok(clips)
}

/// Output of [`generate_synthetic`].
#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticVideo {
    pub labels: Vec<Label>,
    pub observations: Vec<Symbol>,
    pub scores: Vec<f64>,
}

fn sample_index(rng: &mut ChaCha8Rng, probs: &[f64]) -> usize {
    let u: f64 = rng.gen();
    let mut acc = 0.0;
    for (i, &p) in probs.iter().enumerate() {
        acc += p;
        if u < acc {
            return i;
        }
    }
    // u landed in the rounding gap above the last cumulative sum
    probs.iter().rposition(|&p| p > 0.0).unwrap_or(0)
}

/// Samples labels, observations and scores from the generative model.
///
/// The score for bin `k` is `k/3 + u/3` with `u` uniform on `[0, 1)`, so
/// binning with boundaries `(1/3, 2/3)` recovers the sampled observation.
pub fn generate_synthetic(params: &HmmParams, len: usize, rng_seed: u64) -> Result<SyntheticVideo> {
    if len == 0 {
        return Err(Error::Argument("a video needs at least one frame".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(rng_seed);
    let mut labels = Vec::with_capacity(len);
    let mut observations = Vec::with_capacity(len);
    let mut scores = Vec::with_capacity(len);
    let mut y = sample_index(&mut rng, params.initial());
    for t in 0..len {
        if t > 0 {
            y = sample_index(&mut rng, &params.transition()[y]);
        }
        let x = sample_index(&mut rng, &params.emission()[y]);
        let u: f64 = rng.gen();
        let width = 1.0 / NUM_SYMBOLS as f64;
        let floor = x as f64 / NUM_SYMBOLS as f64;
        let mut score = floor + u * width;
        // bins are right-closed, so a score sitting on its lower edge belongs below
        if x > 0 && score <= floor {
            score = floor.next_up();
        }
        labels.push(y as Label);
        observations.push(x as Symbol);
        scores.push(score);
    }
    Ok(SyntheticVideo {
        labels,
        observations,
        scores,
    })
}

/// Named parameter sets for synthetic data.
pub fn preset(name: &str) -> Result<HmmParams> {
    match name {
        "persistent" => HmmParams::new(
            [[0.98, 0.02], [0.04, 0.96]],
            [[0.7, 0.2, 0.1], [0.1, 0.2, 0.7]],
            [2.0 / 3.0, 1.0 / 3.0],
            [1.0 / 3.0, 2.0 / 3.0],
        ),
        other => Err(Error::Argument(format!(
            "unknown preset {other:?}; available: persistent"
        ))),
    }
}

#[derive(Serialize, Deserialize)]
struct LabelLine {
    video_id: String,
    labels: Vec<Label>,
}

#[derive(Serialize, Deserialize)]
struct ScoreLine {
    video_id: String,
    scores: Vec<f64>,
}

fn open(path: &Path) -> Result<BufReader<File>> {
    File::open(path)
        .map(BufReader::new)
        .map_err(|e| Error::file(path, e))
}

/// Parses non-blank lines of a JSON-lines file, reporting 1-based line numbers.
fn read_json_lines<T, F>(path: &Path, mut each: F) -> Result<()>
where
    T: for<'de> Deserialize<'de>,
    F: FnMut(usize, T) -> Result<()>,
{
    for (i, line) in open(path)?.lines().enumerate() {
        let lineno = i + 1;
        let line = line.map_err(|e| Error::file(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        let parse_err = |message: String| Error::Parse {
            path: path.to_path_buf(),
            line: lineno,
            message,
        };
        let item: T = serde_json::from_str(&line).map_err(|e| parse_err(e.to_string()))?;
        each(lineno, item).map_err(|e| match e {
            Error::Parse { .. } => e,
            other => parse_err(other.to_string()),
        })?;
    }
    Ok(())
}

/// Reads a labels file: one `{"video_id": .., "labels": [..]}` per line.
pub fn load_labels(path: impl AsRef<Path>) -> Result<Vec<VideoRecord>> {
    let path = path.as_ref();
    let mut records = Vec::new();
    let mut seen = HashMap::new();
    read_json_lines(path, |lineno, line: LabelLine| {
        if let Some(prev) = seen.insert(line.video_id.clone(), lineno) {
            return Err(Error::Argument(format!(
                "duplicate video_id {:?} (first on line {prev})",
                line.video_id
            )));
        }
        records.push(VideoRecord::new(line.video_id, line.labels)?);
        Ok(())
    })?;
    Ok(records)
}

/// Reads a scores file into an ordered map from video id to scores.
pub fn load_score_table(path: impl AsRef<Path>) -> Result<BTreeMap<String, Vec<f64>>> {
    let path = path.as_ref();
    let mut table = BTreeMap::new();
    read_json_lines(path, |_, line: ScoreLine| {
        if line.scores.is_empty() {
            return Err(Error::Argument(format!(
                "video {:?} has no scores",
                line.video_id
            )));
        }
        if table.contains_key(&line.video_id) {
            return Err(Error::Argument(format!(
                "duplicate video_id {:?}",
                line.video_id
            )));
        }
        table.insert(line.video_id, line.scores);
        Ok(())
    })?;
    Ok(table)
}

/// Attaches scores from a scores file to already-loaded records.
pub fn load_scores(path: impl AsRef<Path>, records: Vec<VideoRecord>) -> Result<Vec<VideoRecord>> {
    let path = path.as_ref();
    let index: HashMap<String, usize> = records
        .iter()
        .enumerate()
        .map(|(i, r)| (r.video_id.clone(), i))
        .collect();
    let mut records = records;
    read_json_lines(path, |_, line: ScoreLine| {
        let i = *index
            .get(&line.video_id)
            .ok_or_else(|| Error::UnknownVideo(line.video_id.clone()))?;
        let record = std::mem::replace(
            &mut records[i],
            VideoRecord {
                video_id: String::new(),
                labels: Vec::new(),
                scores: None,
            },
        );
        records[i] = record.with_scores(line.scores)?;
        Ok(())
    })?;
    Ok(records)
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    File::create(path)
        .map(BufWriter::new)
        .map_err(|e| Error::file(path, e))
}

pub fn write_labels(path: impl AsRef<Path>, records: &[VideoRecord]) -> Result<()> {
    let path = path.as_ref();
    let mut out = create(path)?;
    for r in records {
        let line = LabelLine {
            video_id: r.video_id.clone(),
            labels: r.labels.clone(),
        };
        writeln!(out, "{}", serde_json::to_string(&line)?).map_err(|e| Error::file(path, e))?;
    }
    out.flush().map_err(|e| Error::file(path, e))
}

/// Writes the scores of every record that has them.
pub fn write_scores(path: impl AsRef<Path>, records: &[VideoRecord]) -> Result<()> {
    let path = path.as_ref();
    let mut out = create(path)?;
    for r in records {
        let Some(scores) = &r.scores else { continue };
        let line = ScoreLine {
            video_id: r.video_id.clone(),
            scores: scores.clone(),
        };
        writeln!(out, "{}", serde_json::to_string(&line)?).map_err(|e| Error::file(path, e))?;
    }
    out.flush().map_err(|e| Error::file(path, e))
}
