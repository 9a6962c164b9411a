//! JSONL stream manifest: one [`FrameRecord`] per line, UTF-8, keys
//! `frame_id, t_ms, thermal, rgb, participant, label, segment`.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::{derive_segments, validate_records, ActivitySegment, FrameError, FrameRecord};

pub const MANIFEST_FILE: &str = "manifest.jsonl";

#[derive(Debug, Serialize, Deserialize)]
struct RecordLine {
    frame_id: u64,
    t_ms: u64,
    thermal: String,
    rgb: String,
    participant: String,
    #[serde(default)]
    label: Option<String>,
    #[serde(default)]
    segment: Option<u64>,
}

impl From<&FrameRecord> for RecordLine {
    fn from(r: &FrameRecord) -> Self {
        Self {
            frame_id: r.frame_id,
            t_ms: r.timestamp_ms,
            thermal: r.thermal_path.clone(),
            rgb: r.rgb_path.clone(),
            participant: r.participant_id.clone(),
            label: r.activity_label.clone(),
            segment: r.segment_id,
        }
    }
}

impl From<RecordLine> for FrameRecord {
    fn from(l: RecordLine) -> Self {
        Self {
            frame_id: l.frame_id,
            timestamp_ms: l.t_ms,
            thermal_path: l.thermal,
            rgb_path: l.rgb,
            participant_id: l.participant,
            activity_label: l.label,
            segment_id: l.segment,
        }
    }
}

#[derive(Debug, Clone, Copy)]
pub struct LoadOptions {
    /// Frame period used for segment ends and gap detection.
    pub period_ms: u64,
}

impl Default for LoadOptions {
    fn default() -> Self {
        Self {
            period_ms: super::DEFAULT_FRAME_PERIOD_MS,
        }
    }
}

/// Parse manifest text into validated records plus derived segments.
pub fn parse_manifest(
    text: &str,
    opts: LoadOptions,
) -> Result<(Vec<FrameRecord>, Vec<ActivitySegment>), FrameError> {
    let mut records = Vec::new();
    for (idx, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let parsed: RecordLine = serde_json::from_str(line).map_err(|e| FrameError::Parse {
            line: idx + 1,
            msg: e.to_string(),
        })?;
        records.push(FrameRecord::from(parsed));
    }
    validate_records(&records)?;
    let segments = derive_segments(&records, opts.period_ms);
    Ok((records, segments))
}

/// Load a stream manifest from disk.
pub fn load_stream(
    manifest_path: &Path,
    opts: LoadOptions,
) -> Result<(Vec<FrameRecord>, Vec<ActivitySegment>), FrameError> {
    let text = fs::read_to_string(manifest_path)?;
    parse_manifest(&text, opts)
}

/// Serialize records to manifest text. Records are validated first so a bad
/// stream never reaches disk.
pub fn write_manifest(records: &[FrameRecord]) -> Result<String, FrameError> {
    validate_records(records)?;
    let mut out = String::new();
    for rec in records {
        let line = serde_json::to_string(&RecordLine::from(rec))
            .map_err(|e| FrameError::Validation(e.to_string()))?;
        out.push_str(&line);
        out.push('\n');
    }
    Ok(out)
}

/// Store a stream manifest under `out_dir`, returning the manifest path.
pub fn store_stream(records: &[FrameRecord], out_dir: &Path) -> Result<PathBuf, FrameError> {
    let text = write_manifest(records)?;
    fs::create_dir_all(out_dir)?;
    let path = out_dir.join(MANIFEST_FILE);
    let mut file = fs::File::create(&path)?;
    file.write_all(text.as_bytes())?;
    Ok(path)
}
