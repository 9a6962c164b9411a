//! End-to-end runs over an on-disk corpus: embed thermal frames, drive the
//! temporal sampler (or a uniform baseline), crop sampled RGB frames, and
//! evaluate the resulting trace.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::embeddings::{embed_blockmean_for, Embedding, EmbeddingError};
use crate::energy::{
    device_baseline_energy, device_energy, phone_energy, reduction_report, EnergyError,
    EnergyReport, PhoneMode, PowerProfile,
};
use crate::frames::{
    decode_rgb, decode_thermal, encode_rgb, load_stream, ActivitySegment, FrameError, FrameRecord,
    LoadOptions,
};
use crate::recognition::{evaluate, CaptionRecord, KeywordMap, PrfReport, RecognitionError};
use crate::segments::{
    bin_segments, coverage, head_tail_thresholds, pixel_usage, CoverageReport, MetricsError,
    SegmentBins, UsageReport, DEFAULT_MIN_FRAMES, DEFAULT_T1_S, DEFAULT_T2_S,
};
use crate::spatial::{extract_patch, patch_file_name, Calibration, SpatialError};
use crate::temporal::{
    uniform_sample_stream, Decision, SampleTrace, SamplerConfig, SamplerError, SamplerState,
    TraceHeader, TraceRecord, Variant,
};

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error(transparent)]
    Frame(#[from] FrameError),
    #[error(transparent)]
    Embedding(#[from] EmbeddingError),
    #[error(transparent)]
    Sampler(#[from] SamplerError),
    #[error(transparent)]
    Spatial(#[from] SpatialError),
    #[error(transparent)]
    Metrics(#[from] MetricsError),
    #[error(transparent)]
    Energy(#[from] EnergyError),
    #[error(transparent)]
    Recognition(#[from] RecognitionError),
    #[error("no embedding for frame {0} in the supplied embedding file")]
    MissingEmbedding(u64),
    #[error("corpus has no frames")]
    EmptyCorpus,
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
}

/// A loaded corpus: manifest records, ground-truth segments, frame geometry.
pub struct Corpus {
    pub root: PathBuf,
    /// The corpus path exactly as the caller referenced it (trace identity).
    pub reference: String,
    pub records: Vec<FrameRecord>,
    pub segments: Vec<ActivitySegment>,
    pub rgb_dims: (usize, usize),
    pub thermal_dims: (usize, usize),
    pub period_ms: u64,
}

impl Corpus {
    pub fn open(dir: &Path) -> Result<Self, PipelineError> {
        let opts = LoadOptions::default();
        let manifest = dir.join("manifest.jsonl");
        let (records, segments) = load_stream(&manifest, opts)?;
        if records.is_empty() {
            return Err(PipelineError::EmptyCorpus);
        }
        let first_rgb = std::fs::read(dir.join(&records[0].rgb_path))?;
        let rgb_dims = crate::frames::ppm_dims(&first_rgb)?;
        let first_thermal = std::fs::read(dir.join(&records[0].thermal_path))?;
        let thermal = decode_thermal(&first_thermal, 0)?;
        Ok(Self {
            root: dir.to_path_buf(),
            reference: dir.to_string_lossy().into_owned(),
            records,
            segments,
            rgb_dims,
            thermal_dims: (thermal.width, thermal.height),
            period_ms: opts.period_ms,
        })
    }

    pub fn frame_area(&self) -> u64 {
        self.rgb_dims.0 as u64 * self.rgb_dims.1 as u64
    }

    /// Records grouped per participant, manifest order preserved.
    pub fn by_participant(&self) -> BTreeMap<&str, Vec<&FrameRecord>> {
        let mut map: BTreeMap<&str, Vec<&FrameRecord>> = BTreeMap::new();
        for rec in &self.records {
            map.entry(rec.participant_id.as_str()).or_default().push(rec);
        }
        map
    }

    pub fn read_thermal(&self, rec: &FrameRecord) -> Result<crate::frames::ThermalFrame, PipelineError> {
        let bytes = std::fs::read(self.root.join(&rec.thermal_path))?;
        Ok(decode_thermal(&bytes, rec.timestamp_ms)?)
    }

    pub fn read_rgb(&self, rec: &FrameRecord) -> Result<crate::frames::RgbFrame, PipelineError> {
        let bytes = std::fs::read(self.root.join(&rec.rgb_path))?;
        Ok(decode_rgb(&bytes, rec.timestamp_ms)?)
    }

    /// Corpus duration in hours (frames times the capture period).
    pub fn duration_hours(&self) -> f64 {
        self.records.len() as f64 * self.period_ms as f64 / 3_600_000.0
    }
}

/// Spatial-sampling knobs for a run.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SpatialConfig {
    pub margin_px: u32,
    /// Explicit thermal-to-RGB calibration; default is full-frame scaling.
    pub calibration: Option<Calibration>,
}

impl Default for SpatialConfig {
    fn default() -> Self {
        Self {
            margin_px: 20,
            calibration: None,
        }
    }
}

/// What drives frame selection for a run.
pub enum SamplerKind {
    Variant { variant: Variant, config: SamplerConfig },
    Uniform { period_s: f64 },
}

/// Where embeddings come from.
pub enum EmbeddingSource {
    /// Built-in block-mean extractor over the thermal frames.
    Builtin,
    /// Externally produced embeddings, keyed by frame id.
    File(BTreeMap<u64, Embedding>),
}

impl EmbeddingSource {
    fn get(
        &self,
        corpus: &Corpus,
        rec: &FrameRecord,
    ) -> Result<Embedding, PipelineError> {
        match self {
            Self::Builtin => {
                let thermal = corpus.read_thermal(rec)?;
                Ok(embed_blockmean_for(&thermal, rec.frame_id)?)
            }
            Self::File(map) => map
                .get(&rec.frame_id)
                .cloned()
                .ok_or(PipelineError::MissingEmbedding(rec.frame_id)),
        }
    }
}

/// Run a sampler over the corpus, producing the trace and (optionally)
/// writing patch files for sampled frames.
pub fn run_sampler(
    corpus: &Corpus,
    kind: &SamplerKind,
    spatial: &SpatialConfig,
    embeddings: &EmbeddingSource,
    patches_dir: Option<&Path>,
) -> Result<SampleTrace, PipelineError> {
    if let Some(dir) = patches_dir {
        std::fs::create_dir_all(dir)?;
    }
    let mut records: Vec<TraceRecord> = Vec::new();
    match kind {
        SamplerKind::Uniform { period_s } => {
            for (_, frames) in corpus.by_participant() {
                let view: Vec<(u64, u64)> =
                    frames.iter().map(|r| (r.frame_id, r.timestamp_ms)).collect();
                for (frame_id, t_ms) in uniform_sample_stream(&view, *period_s) {
                    records.push(TraceRecord {
                        frame_id,
                        t_ms,
                        fps: 1.0 / period_s,
                        crop: None,
                    });
                }
            }
        }
        SamplerKind::Variant { config, .. } => {
            let calibration = spatial.calibration.unwrap_or_else(|| {
                Calibration::full_frame(
                    corpus.thermal_dims.0,
                    corpus.thermal_dims.1,
                    corpus.rgb_dims.0,
                    corpus.rgb_dims.1,
                )
            });
            for (_, frames) in corpus.by_participant() {
                let mut state = SamplerState::new(config)?;
                for rec in frames {
                    let embedding = embeddings.get(corpus, rec)?;
                    let decision = state.step(embedding, rec.timestamp_ms, config)?;
                    if decision == Decision::Skip {
                        continue;
                    }
                    let thermal = corpus.read_thermal(rec)?;
                    let rgb = corpus.read_rgb(rec)?;
                    let patch =
                        extract_patch(&rgb, &thermal, rec.frame_id, &calibration, spatial.margin_px)?;
                    let crop = patch.as_ref().map(|p| p.bbox.as_array());
                    if let (Some(patch), Some(dir)) = (&patch, patches_dir) {
                        std::fs::write(dir.join(patch_file_name(patch)), encode_rgb(&patch.pixels))?;
                    }
                    records.push(TraceRecord {
                        frame_id: rec.frame_id,
                        t_ms: rec.timestamp_ms,
                        fps: state.current_fps(),
                        crop,
                    });
                }
            }
        }
    }
    records.sort_by_key(|r| r.frame_id);
    let header = match kind {
        SamplerKind::Variant { variant, config } => TraceHeader {
            trace: "thor-trace/v1".into(),
            corpus: corpus.reference.clone(),
            sampler: variant.name().into(),
            config: Some(*config),
            uniform_period_s: None,
        },
        SamplerKind::Uniform { period_s } => TraceHeader {
            trace: "thor-trace/v1".into(),
            corpus: corpus.reference.clone(),
            sampler: format!("uniform-{period_s}s"),
            config: None,
            uniform_period_s: Some(*period_s),
        },
    };
    let trace = SampleTrace { header, records };
    trace.validate()?;
    Ok(trace)
}

/// How segment-length bins are chosen for evaluation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "mode")]
pub enum BinMode {
    /// The shipped defaults: 60 s and 162 s.
    Default,
    /// Data-driven head/tail thresholds over the corpus segment lengths.
    HeadTail,
    Explicit { t1_s: f64, t2_s: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EvalConfig {
    pub bin_mode: BinMode,
    pub min_frames: usize,
    pub profile: PowerProfile,
}

impl Default for EvalConfig {
    fn default() -> Self {
        Self {
            bin_mode: BinMode::Default,
            min_frames: DEFAULT_MIN_FRAMES,
            profile: PowerProfile::default(),
        }
    }
}

/// Everything the evaluation layer derives from one trace.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceEvaluation {
    pub name: String,
    pub sampled_frames: usize,
    pub coverage: CoverageReport,
    pub usage: UsageReport,
    pub device: EnergyReport,
    pub device_baseline: EnergyReport,
    pub device_reduction_pct: f64,
    pub phone: EnergyReport,
    pub phone_full_baseline: EnergyReport,
    pub phone_reduction_pct: f64,
}

pub fn resolve_bins(
    corpus: &Corpus,
    mode: BinMode,
) -> Result<SegmentBins, PipelineError> {
    let (t1_s, t2_s) = match mode {
        BinMode::Default => (DEFAULT_T1_S, DEFAULT_T2_S),
        BinMode::Explicit { t1_s, t2_s } => (t1_s, t2_s),
        BinMode::HeadTail => {
            let lengths: Vec<f64> = corpus.segments.iter().map(|s| s.duration_s()).collect();
            head_tail_thresholds(&lengths)?
        }
    };
    Ok(bin_segments(&corpus.segments, t1_s, t2_s)?)
}

pub fn evaluate_trace(
    corpus: &Corpus,
    trace: &SampleTrace,
    cfg: &EvalConfig,
) -> Result<TraceEvaluation, PipelineError> {
    let bins = resolve_bins(corpus, cfg.bin_mode)?;
    let cov = coverage(trace, &corpus.segments, &bins, cfg.min_frames);
    let usage = pixel_usage(trace, &corpus.records, corpus.frame_area())?;
    let hours = corpus.duration_hours();
    let device = device_energy(&usage, &cfg.profile, hours);
    let device_baseline = device_baseline_energy(&cfg.profile, hours);
    let device_reduction_pct = reduction_report(&device, &device_baseline)?;
    // Patch-input inference for adaptive traces, full-frame for uniform ones.
    let mode = if trace.header.uniform_period_s.is_some() {
        PhoneMode::Full
    } else {
        PhoneMode::Patch
    };
    let n = trace.records.len();
    let phone = phone_energy(n, &cfg.profile, mode, true);
    let phone_full_baseline = phone_energy(n, &cfg.profile, PhoneMode::Full, true);
    let phone_reduction_pct = if phone_full_baseline.total_mwh > 0.0 {
        reduction_report(&phone, &phone_full_baseline)?
    } else {
        0.0 // empty trace: nothing to reduce
    };
    Ok(TraceEvaluation {
        name: trace.header.sampler.clone(),
        sampled_frames: n,
        coverage: cov,
        usage,
        device,
        device_baseline,
        device_reduction_pct,
        phone,
        phone_full_baseline,
        phone_reduction_pct,
    })
}

/// Coverage/usage table: one row per trace, per-bin coverage columns plus
/// the pixel-usage ratio.
pub fn coverage_csv(evals: &[TraceEvaluation]) -> String {
    let mut out = String::from("trace,short,medium,long,overall,usage_ratio\n");
    for e in evals {
        out.push_str(&format!(
            "{},{:.4},{:.4},{:.4},{:.4},{:.6}\n",
            e.name,
            e.coverage.bin_fraction(crate::segments::LengthBin::Short),
            e.coverage.bin_fraction(crate::segments::LengthBin::Medium),
            e.coverage.bin_fraction(crate::segments::LengthBin::Long),
            e.coverage.overall.fraction(),
            e.usage.ratio,
        ));
    }
    out
}

/// Per-participant usage table: one row per trace, percentage of pixels used
/// per participant plus the mean.
pub fn usage_by_participant_csv(evals: &[TraceEvaluation]) -> String {
    let mut participants: Vec<String> = Vec::new();
    for e in evals {
        for p in e.usage.per_participant.keys() {
            if !participants.contains(p) {
                participants.push(p.clone());
            }
        }
    }
    participants.sort();
    let mut out = String::from("trace");
    for p in &participants {
        out.push_str(&format!(",{p}"));
    }
    out.push_str(",mean\n");
    for e in evals {
        out.push_str(&e.name);
        let mut sum = 0.0;
        for p in &participants {
            let ratio = e.usage.participant_ratio(p);
            sum += ratio;
            out.push_str(&format!(",{:.4}", ratio * 100.0));
        }
        out.push_str(&format!(",{:.4}\n", sum / participants.len().max(1) as f64 * 100.0));
    }
    out
}

/// Recognition scoring for a caption file against a keyword map.
pub fn evaluate_captions(
    captions: &[CaptionRecord],
    map: &KeywordMap,
) -> Result<PrfReport, PipelineError> {
    Ok(evaluate(captions, map)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::synth::{generate_corpus, ParticipantPlan, ScenarioSpec, SegmentPlan};
    use crate::temporal::variant_preset;

    fn small_corpus(dir: &Path) -> Corpus {
        let spec = ScenarioSpec {
            seed: 11,
            transition_s: 2.0,
            noise_sigma: 0.2,
            base_rate: 4.0,
            thermal_dims: [32, 24],
            rgb_dims: [64, 48],
            participants: vec![ParticipantPlan {
                id: "p00".into(),
                segments: vec![
                    SegmentPlan { label: "Eating".into(), duration_s: 40.0, template: 0 },
                    SegmentPlan { label: "Writing".into(), duration_s: 30.0, template: 1 },
                    SegmentPlan { label: "Sewing".into(), duration_s: 30.0, template: 4 },
                ],
            }],
        };
        generate_corpus(&spec, dir).unwrap();
        Corpus::open(dir).unwrap()
    }

    #[test]
    fn uniform_run_counts_and_full_frames() {
        let dir = tempfile::tempdir().unwrap();
        let corpus = small_corpus(dir.path());
        let trace = run_sampler(
            &corpus,
            &SamplerKind::Uniform { period_s: 2.0 },
            &SpatialConfig::default(),
            &EmbeddingSource::Builtin,
            None,
        )
        .unwrap();
        // 100 s of stream, one frame every 2 s.
        assert_eq!(trace.records.len(), 50);
        assert!(trace.records.iter().all(|r| r.crop.is_none()));
    }

    #[test]
    fn variant_run_produces_crops_and_patches() {
        let dir = tempfile::tempdir().unwrap();
        let patches = tempfile::tempdir().unwrap();
        let corpus = small_corpus(dir.path());
        let config = variant_preset(Variant::ThorHigh);
        let trace = run_sampler(
            &corpus,
            &SamplerKind::Variant { variant: Variant::ThorHigh, config },
            &SpatialConfig { margin_px: 2, calibration: None },
            &EmbeddingSource::Builtin,
            Some(patches.path()),
        )
        .unwrap();
        assert!(!trace.records.is_empty());
        assert!(trace.records.iter().any(|r| r.crop.is_some()));
        let written = std::fs::read_dir(patches.path()).unwrap().count();
        let with_crop = trace.records.iter().filter(|r| r.crop.is_some()).count();
        assert_eq!(written, with_crop);
        // Crops stay within the frame.
        for rec in &trace.records {
            if let Some([x, y, w, h]) = rec.crop {
                assert!(x + w <= 64 && y + h <= 48);
                assert!(w >= 1 && h >= 1);
            }
        }
    }

    #[test]
    fn evaluation_full_trace_is_total_coverage_and_usage() {
        let dir = tempfile::tempdir().unwrap();
        let corpus = small_corpus(dir.path());
        // Sample every frame with full crops: a uniform run at the frame period.
        let trace = run_sampler(
            &corpus,
            &SamplerKind::Uniform { period_s: 0.25 },
            &SpatialConfig::default(),
            &EmbeddingSource::Builtin,
            None,
        )
        .unwrap();
        assert_eq!(trace.records.len(), corpus.records.len());
        let eval = evaluate_trace(&corpus, &trace, &EvalConfig::default()).unwrap();
        assert_eq!(eval.usage.ratio, 1.0);
        assert_eq!(eval.coverage.overall.fraction(), 1.0);
    }

    #[test]
    fn empty_trace_evaluates_to_zero() {
        let dir = tempfile::tempdir().unwrap();
        let corpus = small_corpus(dir.path());
        let trace = SampleTrace {
            header: TraceHeader {
                trace: "thor-trace/v1".into(),
                corpus: corpus.reference.clone(),
                sampler: "empty".into(),
                config: None,
                uniform_period_s: None,
            },
            records: vec![],
        };
        let eval = evaluate_trace(&corpus, &trace, &EvalConfig::default()).unwrap();
        assert_eq!(eval.usage.ratio, 0.0);
        assert_eq!(eval.coverage.overall.fraction(), 0.0);
        assert_eq!(eval.phone.total_mwh, 0.0);
    }

    #[test]
    fn embeddings_from_file_must_cover_all_frames() {
        let dir = tempfile::tempdir().unwrap();
        let corpus = small_corpus(dir.path());
        let config = variant_preset(Variant::ThorHigh);
        let result = run_sampler(
            &corpus,
            &SamplerKind::Variant { variant: Variant::ThorHigh, config },
            &SpatialConfig::default(),
            &EmbeddingSource::File(BTreeMap::new()),
            None,
        );
        assert!(matches!(result, Err(PipelineError::MissingEmbedding(0))));
    }
}
