//! Data model for synchronized thermal/RGB frame streams.
//!
//! A stream is described by a JSONL manifest of [`FrameRecord`]s pointing at
//! per-frame thermal (16-bit PGM) and RGB (PPM) files, plus activity labels.
//! Labeled runs of frames coalesce into [`ActivitySegment`]s, the ground-truth
//! unit for all downstream coverage and recognition metrics.

mod manifest;
mod netpbm;

pub use manifest::{load_stream, parse_manifest, store_stream, write_manifest, LoadOptions};
pub use netpbm::{decode_rgb, decode_thermal, encode_rgb, encode_thermal, ppm_dims};

use thiserror::Error;

/// Storage range of the thermal format: sample/100 - 40 over u16 samples.
pub const THERMAL_MIN_C: f64 = -40.0;
pub const THERMAL_MAX_C: f64 = 615.35;

/// Frame period implied by the default 4 FPS capture rate.
pub const DEFAULT_FRAME_PERIOD_MS: u64 = 250;

#[derive(Debug, Error)]
pub enum FrameError {
    #[error("manifest line {line}: {msg}")]
    Parse { line: usize, msg: String },
    #[error("validation: {0}")]
    Validation(String),
    #[error("format: {0}")]
    Format(String),
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
}

/// One low-resolution temperature grid, degrees Celsius, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct ThermalFrame {
    pub timestamp_ms: u64,
    pub width: usize,
    pub height: usize,
    pub temps: Vec<f64>,
}

impl ThermalFrame {
    pub fn new(
        timestamp_ms: u64,
        width: usize,
        height: usize,
        temps: Vec<f64>,
    ) -> Result<Self, FrameError> {
        if width * height != temps.len() {
            return Err(FrameError::Validation(format!(
                "thermal grid {}x{} does not match {} temps",
                width,
                height,
                temps.len()
            )));
        }
        for (i, &t) in temps.iter().enumerate() {
            if !t.is_finite() {
                return Err(FrameError::Validation(format!(
                    "non-finite temperature at pixel {i}"
                )));
            }
            if !(THERMAL_MIN_C..=THERMAL_MAX_C).contains(&t) {
                return Err(FrameError::Validation(format!(
                    "temperature {t} at pixel {i} outside storage range"
                )));
            }
        }
        Ok(Self {
            timestamp_ms,
            width,
            height,
            temps,
        })
    }

    pub fn temp_at(&self, x: usize, y: usize) -> f64 {
        self.temps[y * self.width + x]
    }
}

/// One color frame, 8-bit RGB triplets, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct RgbFrame {
    pub timestamp_ms: u64,
    pub width: usize,
    pub height: usize,
    pub pixels: Vec<u8>,
}

impl RgbFrame {
    pub fn new(
        timestamp_ms: u64,
        width: usize,
        height: usize,
        pixels: Vec<u8>,
    ) -> Result<Self, FrameError> {
        if 3 * width * height != pixels.len() {
            return Err(FrameError::Validation(format!(
                "rgb raster {}x{} does not match {} bytes",
                width,
                height,
                pixels.len()
            )));
        }
        Ok(Self {
            timestamp_ms,
            width,
            height,
            pixels,
        })
    }
}

/// One manifest line: where the synchronized frame pair lives and how it is labeled.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FrameRecord {
    pub frame_id: u64,
    pub timestamp_ms: u64,
    pub thermal_path: String,
    pub rgb_path: String,
    pub participant_id: String,
    pub activity_label: Option<String>,
    pub segment_id: Option<u64>,
}

/// A labeled `[start_ms, end_ms)` interval of one participant's stream.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ActivitySegment {
    pub segment_id: u64,
    pub participant_id: String,
    pub label: String,
    pub start_ms: u64,
    pub end_ms: u64,
}

impl ActivitySegment {
    pub fn duration_s(&self) -> f64 {
        (self.end_ms - self.start_ms) as f64 / 1000.0
    }

    pub fn contains_ms(&self, t_ms: u64) -> bool {
        t_ms >= self.start_ms && t_ms < self.end_ms
    }
}

/// Check manifest-wide record invariants: strictly increasing frame ids,
/// non-decreasing timestamps.
pub fn validate_records(records: &[FrameRecord]) -> Result<(), FrameError> {
    for pair in records.windows(2) {
        if pair[1].frame_id <= pair[0].frame_id {
            return Err(FrameError::Validation(format!(
                "frame_id {} after {} is not strictly increasing",
                pair[1].frame_id, pair[0].frame_id
            )));
        }
        if pair[1].timestamp_ms < pair[0].timestamp_ms {
            return Err(FrameError::Validation(format!(
                "timestamp {} ms after {} ms decreases",
                pair[1].timestamp_ms, pair[0].timestamp_ms
            )));
        }
    }
    Ok(())
}

/// Coalesce per-frame labels into segments.
///
/// A run breaks when the label changes, the participant changes, the explicit
/// segment id changes, or the stream gaps by more than two frame periods
/// (device-off intervals). Unlabeled frames never join a segment. Segment end
/// is the last frame's timestamp plus one frame period.
pub fn derive_segments(records: &[FrameRecord], period_ms: u64) -> Vec<ActivitySegment> {
    let mut segments: Vec<ActivitySegment> = Vec::new();
    let mut current: Option<(ActivitySegment, u64)> = None; // (segment, last_t)

    let mut next_auto_id = 0u64;
    for rec in records {
        let label = match &rec.activity_label {
            Some(l) => l,
            None => {
                if let Some((seg, _)) = current.take() {
                    segments.push(seg);
                }
                continue;
            }
        };
        let gap_break = |last_t: u64| rec.timestamp_ms.saturating_sub(last_t) > 2 * period_ms;
        let same_run = match &current {
            Some((seg, last_t)) => {
                seg.label == *label
                    && seg.participant_id == rec.participant_id
                    && !gap_break(*last_t)
                    && match (rec.segment_id, seg.segment_id) {
                        // Explicit ids take precedence over label coalescing.
                        (Some(id), sid) => id == sid,
                        (None, _) => true,
                    }
            }
            None => false,
        };
        if same_run {
            let (seg, last_t) = current.as_mut().unwrap();
            seg.end_ms = rec.timestamp_ms + period_ms;
            *last_t = rec.timestamp_ms;
        } else {
            if let Some((seg, _)) = current.take() {
                segments.push(seg);
            }
            let segment_id = rec.segment_id.unwrap_or_else(|| {
                let id = next_auto_id;
                next_auto_id += 1;
                id
            });
            next_auto_id = next_auto_id.max(segment_id + 1);
            current = Some((
                ActivitySegment {
                    segment_id,
                    participant_id: rec.participant_id.clone(),
                    label: label.clone(),
                    start_ms: rec.timestamp_ms,
                    end_ms: rec.timestamp_ms + period_ms,
                },
                rec.timestamp_ms,
            ));
        }
    }
    if let Some((seg, _)) = current {
        segments.push(seg);
    }
    segments
}
