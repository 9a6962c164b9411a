//! Dynamic-FPS control and frame-sampling scheduling.
//!
//! The controller turns the similarity window's rolling statistics into a
//! target frame rate: the current rolling mean is min-max normalized against
//! the in-window means, inverted into a change score `s`, and mapped to
//! `fps_min + (fps_max - fps_min) * s`. A window whose means spread less than
//! `epsilon` carries no ranking signal; it resolves through
//! [`DegeneratePolicy`], which defaults to the minimum rate (a flat window
//! means sustained activity).
//!
//! Sampling instants come from a credit (token-bucket) scheduler: credit
//! accrues at `current_fps` per second, capped at 1, and a frame is sampled
//! whenever credit reaches 1. Credit starts at 1 so the first frame of every
//! stream is captured.

use std::collections::BTreeMap;
use std::fmt;
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::embeddings::Embedding;
use crate::similarity::{SimilarityError, SimilarityWindow};

#[derive(Debug, Error)]
pub enum SamplerError {
    #[error("invalid config: {0}")]
    Config(String),
    #[error("timestamp {t} ms precedes previous {prev} ms")]
    Sequencing { t: u64, prev: u64 },
    #[error("unknown variant {0:?} (expected thor-high, thor-mid or thor-low)")]
    UnknownVariant(String),
    #[error(transparent)]
    Similarity(#[from] SimilarityError),
    #[error("trace line {line}: {msg}")]
    Trace { line: usize, msg: String },
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DegeneratePolicy {
    /// Flat window = sustained activity: drop to fps_min (default).
    MinRate,
    /// Literal min-max arithmetic: r -> 0, s -> 1, fps_max.
    MaxRate,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SamplerConfig {
    /// Window length T, frames.
    pub window: usize,
    pub fps_min: f64,
    pub fps_max: f64,
    /// Significance threshold on the spread of in-window rolling means.
    pub epsilon: f64,
    pub degenerate_policy: DegeneratePolicy,
    /// Native capture rate of the stream, frames/second.
    pub base_rate: f64,
}

impl Default for SamplerConfig {
    fn default() -> Self {
        Self {
            window: 32,
            fps_min: 0.125,
            fps_max: 4.0,
            epsilon: 1e-8,
            degenerate_policy: DegeneratePolicy::MinRate,
            base_rate: 4.0,
        }
    }
}

impl SamplerConfig {
    pub fn validate(&self) -> Result<(), SamplerError> {
        if self.window < 2 {
            return Err(SamplerError::Config("window T must be >= 2".into()));
        }
        if !(self.fps_min > 0.0 && self.fps_min <= self.fps_max && self.fps_max <= self.base_rate) {
            return Err(SamplerError::Config(format!(
                "need 0 < fps_min <= fps_max <= base_rate, got {} / {} / {}",
                self.fps_min, self.fps_max, self.base_rate
            )));
        }
        if !(self.epsilon > 0.0) {
            return Err(SamplerError::Config("epsilon must be > 0".into()));
        }
        Ok(())
    }
}

/// The three shipped sampler presets. Their numeric constants are tuned
/// against the reference synthetic corpus and frozen here; every field can
/// be overridden through the config file.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Variant {
    ThorHigh,
    ThorMid,
    ThorLow,
}

impl Variant {
    pub fn parse(name: &str) -> Result<Self, SamplerError> {
        match name.to_ascii_lowercase().as_str() {
            "thor-high" | "thor_high" | "high" => Ok(Self::ThorHigh),
            "thor-mid" | "thor_mid" | "mid" => Ok(Self::ThorMid),
            "thor-low" | "thor_low" | "low" => Ok(Self::ThorLow),
            _ => Err(SamplerError::UnknownVariant(name.to_string())),
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            Self::ThorHigh => "thor-high",
            Self::ThorMid => "thor-mid",
            Self::ThorLow => "thor-low",
        }
    }
}

impl fmt::Display for Variant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Preset configuration for a named variant.
///
/// The epsilon here is the sustained-activity significance threshold: rolling
/// means that spread less than 0.01 across the window are treated as one
/// sustained pose rather than ranked against each other.
pub fn variant_preset(variant: Variant) -> SamplerConfig {
    let (window, fps_max, fps_min) = match variant {
        Variant::ThorHigh => (32, 4.0, 1.0 / 8.0),
        Variant::ThorMid => (64, 1.0, 1.0 / 16.0),
        Variant::ThorLow => (128, 0.5, 1.0 / 32.0),
    };
    SamplerConfig {
        window,
        fps_min,
        fps_max,
        epsilon: 0.01,
        degenerate_policy: DegeneratePolicy::MinRate,
        base_rate: 4.0,
    }
}

/// Dynamic-FPS update from the window statistics: the current rolling mean
/// `w_i` against the in-window (min, max).
///
/// The window minimum maps to exactly `fps_max`, the maximum to exactly
/// `fps_min`; spreads below `epsilon` resolve through the degenerate policy.
pub fn fps_from_stats(w_i: f64, w_min: f64, w_max: f64, config: &SamplerConfig) -> f64 {
    if w_max - w_min < config.epsilon {
        return match config.degenerate_policy {
            DegeneratePolicy::MinRate => config.fps_min,
            DegeneratePolicy::MaxRate => config.fps_max,
        };
    }
    let r = (w_i - w_min) / (w_max - w_min);
    if r <= 0.0 {
        return config.fps_max;
    }
    if r >= 1.0 {
        return config.fps_min;
    }
    config.fps_min + (config.fps_max - config.fps_min) * (1.0 - r)
}

/// Dynamic-FPS update for the newest window index.
pub fn update_fps(window: &SimilarityWindow, config: &SamplerConfig) -> Result<f64, SamplerError> {
    let i = window.current_index().ok_or(SimilarityError::Empty)?;
    let w_i = window.rolling_mean(i)?;
    let (w_min, w_max) = window.means_range().ok_or(SimilarityError::Empty)?;
    Ok(fps_from_stats(w_i, w_min, w_max, config))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Decision {
    Sample,
    Skip,
}

/// Per-stream sampler state: the similarity window plus the credit bucket.
#[derive(Debug)]
pub struct SamplerState {
    window: SimilarityWindow,
    current_fps: f64,
    credit: f64,
    last_ms: Option<u64>,
}

impl SamplerState {
    pub fn new(config: &SamplerConfig) -> Result<Self, SamplerError> {
        config.validate()?;
        Ok(Self {
            window: SimilarityWindow::new(config.window),
            current_fps: config.fps_min,
            credit: 1.0,
            last_ms: None,
        })
    }

    pub fn current_fps(&self) -> f64 {
        self.current_fps
    }

    pub fn credit(&self) -> f64 {
        self.credit
    }

    pub fn window(&self) -> &SimilarityWindow {
        &self.window
    }

    /// Advance one frame: push the embedding, refresh the rate, accrue
    /// credit, and decide whether this frame is sampled.
    pub fn step(
        &mut self,
        embedding: Embedding,
        timestamp_ms: u64,
        config: &SamplerConfig,
    ) -> Result<Decision, SamplerError> {
        if let Some(prev) = self.last_ms {
            if timestamp_ms < prev {
                return Err(SamplerError::Sequencing {
                    t: timestamp_ms,
                    prev,
                });
            }
        }
        self.window.push(embedding)?;
        self.current_fps = update_fps(&self.window, config)?;
        let dt_s = self
            .last_ms
            .map_or(0.0, |prev| (timestamp_ms - prev) as f64 / 1000.0);
        self.last_ms = Some(timestamp_ms);
        self.credit = (self.credit + self.current_fps * dt_s).min(1.0);
        if self.credit >= 1.0 {
            self.credit -= 1.0;
            Ok(Decision::Sample)
        } else {
            Ok(Decision::Skip)
        }
    }
}

/// One sampled frame in a trace. `crop` is `[x, y, w, h]` in RGB pixels;
/// `None` accounts as a full frame.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceRecord {
    pub frame_id: u64,
    pub t_ms: u64,
    pub fps: f64,
    pub crop: Option<[u32; 4]>,
}

/// Metadata echoed at the head of every trace file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceHeader {
    pub trace: String,
    pub corpus: String,
    pub sampler: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub config: Option<SamplerConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub uniform_period_s: Option<f64>,
}

/// The ordered record of sampled frames: the unit of all evaluation.
#[derive(Debug, Clone, PartialEq)]
pub struct SampleTrace {
    pub header: TraceHeader,
    pub records: Vec<TraceRecord>,
}

impl SampleTrace {
    pub fn validate(&self) -> Result<(), SamplerError> {
        for pair in self.records.windows(2) {
            if pair[1].frame_id <= pair[0].frame_id {
                return Err(SamplerError::Config(format!(
                    "trace frame_id {} after {} not strictly increasing",
                    pair[1].frame_id, pair[0].frame_id
                )));
            }
        }
        Ok(())
    }

    /// Serialize as JSONL: a header line followed by one record per line.
    pub fn to_jsonl(&self) -> String {
        let mut out = serde_json::to_string(&self.header).expect("header serializes");
        out.push('\n');
        for rec in &self.records {
            out.push_str(&serde_json::to_string(rec).expect("record serializes"));
            out.push('\n');
        }
        out
    }

    pub fn from_jsonl(text: &str) -> Result<Self, SamplerError> {
        let mut lines = text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty());
        let (_, head) = lines.next().ok_or(SamplerError::Trace {
            line: 1,
            msg: "empty trace file".into(),
        })?;
        let header: TraceHeader = serde_json::from_str(head).map_err(|e| SamplerError::Trace {
            line: 1,
            msg: e.to_string(),
        })?;
        let mut records = Vec::new();
        for (idx, line) in lines {
            let rec: TraceRecord = serde_json::from_str(line).map_err(|e| SamplerError::Trace {
                line: idx + 1,
                msg: e.to_string(),
            })?;
            records.push(rec);
        }
        let trace = Self { header, records };
        trace.validate()?;
        Ok(trace)
    }

    pub fn save(&self, path: &Path) -> Result<(), SamplerError> {
        std::fs::write(path, self.to_jsonl())?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self, SamplerError> {
        Self::from_jsonl(&std::fs::read_to_string(path)?)
    }
}

/// Uniform baseline: the first frame at or after each multiple of `period_s`
/// from each participant's stream start, full-frame crops.
///
/// `frames` is an ordered (frame_id, t_ms) view of one participant's stream.
pub fn uniform_sample_stream(frames: &[(u64, u64)], period_s: f64) -> Vec<(u64, u64)> {
    assert!(period_s > 0.0, "period must be positive");
    let mut sampled = Vec::new();
    let Some(&(_, start_ms)) = frames.first() else {
        return sampled;
    };
    let period_ms = period_s * 1000.0;
    let mut next_tick = 0u64; // tick index
    for &(frame_id, t_ms) in frames {
        let elapsed = (t_ms - start_ms) as f64;
        if elapsed + 1e-9 >= next_tick as f64 * period_ms {
            sampled.push((frame_id, t_ms));
            // Skip every tick this frame already covers.
            next_tick = ((elapsed / period_ms).floor() as u64) + 1;
        }
    }
    sampled
}

/// Group an ordered manifest view into per-participant streams, preserving order.
pub fn split_by_participant(frames: &[(u64, u64, String)]) -> BTreeMap<String, Vec<(u64, u64)>> {
    let mut map: BTreeMap<String, Vec<(u64, u64)>> = BTreeMap::new();
    for (frame_id, t_ms, participant) in frames {
        map.entry(participant.clone())
            .or_default()
            .push((*frame_id, *t_ms));
    }
    map
}
