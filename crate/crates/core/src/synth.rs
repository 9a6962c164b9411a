//! Seeded synthetic corpus generator.
//!
//! Each activity is a fixed pose template: one or two Gaussian hot blobs
//! (peaks around 33-37 degC over a 20-24 degC background) on the thermal
//! grid, with a distinct color block co-located in the RGB frame through the
//! default full-frame calibration, so spatial cropping is verifiable by
//! construction. Transitions blend adjacent templates linearly over a
//! configurable window, giving the temporal sampler a similarity dip of
//! known width and position. Everything derives from the spec seed, so a
//! spec generates a byte-identical corpus on every run.

use std::path::{Path, PathBuf};

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::frames::{
    encode_rgb, encode_thermal, store_stream, ActivitySegment, FrameError, FrameRecord, RgbFrame,
    ThermalFrame, THERMAL_MAX_C, THERMAL_MIN_C,
};
use crate::recognition::KeywordMap;

#[derive(Debug, Error)]
pub enum SynthError {
    #[error("invalid spec: {0}")]
    Spec(String),
    #[error(transparent)]
    Frame(#[from] FrameError),
    #[error("toml: {0}")]
    Toml(String),
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
}

/// Milliseconds of device-off gap inserted between participant streams.
const PARTICIPANT_GAP_MS: u64 = 10_000;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SegmentPlan {
    pub label: String,
    pub duration_s: f64,
    /// Index into [`template_pool`].
    pub template: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParticipantPlan {
    pub id: String,
    pub segments: Vec<SegmentPlan>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioSpec {
    pub seed: u64,
    #[serde(default = "default_transition_s")]
    pub transition_s: f64,
    #[serde(default = "default_noise_sigma")]
    pub noise_sigma: f64,
    #[serde(default = "default_base_rate")]
    pub base_rate: f64,
    #[serde(default = "default_thermal_dims")]
    pub thermal_dims: [usize; 2],
    #[serde(default = "default_rgb_dims")]
    pub rgb_dims: [usize; 2],
    pub participants: Vec<ParticipantPlan>,
}

fn default_transition_s() -> f64 {
    2.0
}
fn default_noise_sigma() -> f64 {
    0.3
}
fn default_base_rate() -> f64 {
    4.0
}
fn default_thermal_dims() -> [usize; 2] {
    [32, 24]
}
fn default_rgb_dims() -> [usize; 2] {
    [956, 720]
}

impl ScenarioSpec {
    pub fn validate(&self) -> Result<(), SynthError> {
        if self.participants.is_empty() {
            return Err(SynthError::Spec("no participants".into()));
        }
        if !(self.base_rate > 0.0) {
            return Err(SynthError::Spec("base_rate must be positive".into()));
        }
        if self.noise_sigma < 0.0 {
            return Err(SynthError::Spec("noise_sigma must be >= 0".into()));
        }
        if self.transition_s < 0.0 {
            return Err(SynthError::Spec("transition_s must be >= 0".into()));
        }
        let pool = template_pool(self.thermal_dims, self.rgb_dims);
        for p in &self.participants {
            if p.segments.is_empty() {
                return Err(SynthError::Spec(format!("participant {} has no segments", p.id)));
            }
            for seg in &p.segments {
                if !(seg.duration_s > 0.0) {
                    return Err(SynthError::Spec(format!(
                        "segment duration must be positive, got {}",
                        seg.duration_s
                    )));
                }
                if seg.template >= pool.len() {
                    return Err(SynthError::Spec(format!(
                        "template {} out of range (pool size {})",
                        seg.template,
                        pool.len()
                    )));
                }
            }
        }
        Ok(())
    }

    pub fn period_ms(&self) -> u64 {
        (1000.0 / self.base_rate).round() as u64
    }

    pub fn from_toml(text: &str) -> Result<Self, SynthError> {
        let spec: Self = toml::from_str(text).map_err(|e| SynthError::Toml(e.to_string()))?;
        spec.validate()?;
        Ok(spec)
    }

    pub fn to_toml(&self) -> Result<String, SynthError> {
        toml::to_string_pretty(self).map_err(|e| SynthError::Toml(e.to_string()))
    }

    pub fn load(path: &Path) -> Result<Self, SynthError> {
        Self::from_toml(&std::fs::read_to_string(path)?)
    }

    /// The reference benchmark corpus: 3 participants, each with 6 short
    /// (20-50 s), 6 medium (70-150 s) and 4 long (180-400 s) segments, seed
    /// 42. Each participant leads with a long segment so the sampler's warmup
    /// happens where the coverage budget is loose. RGB frames are generated
    /// at 96x72 (a tenth of the full capture scale) to keep the corpus
    /// desk-sized.
    pub fn reference() -> Self {
        let seed = 42u64;
        let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x5EED_5EED_5EED_5EED);
        let activities: Vec<String> = KeywordMap::bundled()
            .activities()
            .map(str::to_string)
            .collect();
        let pool_len = template_pool([32, 24], [96, 72]).len();
        let mut participants = Vec::new();
        for p in 0..3 {
            // Duration bins: (count, lo_s, hi_s).
            let mut durations: Vec<(f64, char)> = Vec::new();
            for _ in 0..6 {
                durations.push((rng.gen_range(20..=50) as f64, 's'));
            }
            for _ in 0..6 {
                durations.push((rng.gen_range(70..=150) as f64, 'm'));
            }
            for _ in 0..3 {
                durations.push((rng.gen_range(180..=400) as f64, 'l'));
            }
            durations.shuffle(&mut rng);
            // The fourth long segment opens the stream.
            durations.insert(0, (rng.gen_range(180..=400) as f64, 'l'));

            let mut labels = activities.clone();
            labels.shuffle(&mut rng);
            labels.truncate(durations.len());

            let mut segments = Vec::new();
            let mut prev_template = usize::MAX;
            for ((duration_s, _), label) in durations.into_iter().zip(labels) {
                let mut template = rng.gen_range(0..pool_len);
                while template == prev_template {
                    template = rng.gen_range(0..pool_len);
                }
                prev_template = template;
                segments.push(SegmentPlan {
                    label,
                    duration_s,
                    template,
                });
            }
            participants.push(ParticipantPlan {
                id: format!("p{p:02}"),
                segments,
            });
        }
        Self {
            seed,
            transition_s: 2.0,
            noise_sigma: 0.3,
            base_rate: 4.0,
            thermal_dims: [32, 24],
            rgb_dims: [96, 72],
            participants,
        }
    }

    pub fn with_noise_sigma(mut self, noise_sigma: f64) -> Self {
        self.noise_sigma = noise_sigma;
        self
    }
}

/// One Gaussian hot blob and its co-located RGB color block.
#[derive(Debug, Clone, Copy)]
pub struct Blob {
    pub cx: f64,
    pub cy: f64,
    pub sigma_x: f64,
    pub sigma_y: f64,
    /// Peak temperature rise over the background, degC.
    pub delta_c: f64,
    pub color: [u8; 3],
}

/// A stationary pose: background temperature plus 1-2 blobs.
#[derive(Debug, Clone)]
pub struct PoseTemplate {
    pub background_c: f64,
    pub background_color: [u8; 3],
    pub blobs: Vec<Blob>,
    rendered_temps: Vec<f64>,
    rendered_rgb: Vec<u8>,
}

impl PoseTemplate {
    fn render(
        background_c: f64,
        background_color: [u8; 3],
        blobs: Vec<Blob>,
        thermal_dims: [usize; 2],
        rgb_dims: [usize; 2],
    ) -> Self {
        let [tw, th] = thermal_dims;
        let mut rendered_temps = vec![0.0; tw * th];
        for y in 0..th {
            for x in 0..tw {
                let mut t = background_c;
                for b in &blobs {
                    let dx = x as f64 - b.cx;
                    let dy = y as f64 - b.cy;
                    t += b.delta_c
                        * (-(dx * dx / (2.0 * b.sigma_x * b.sigma_x)
                            + dy * dy / (2.0 * b.sigma_y * b.sigma_y)))
                            .exp();
                }
                rendered_temps[y * tw + x] = quantize_temp(t);
            }
        }
        let [rw, rh] = rgb_dims;
        let sx = rw as f64 / tw as f64;
        let sy = rh as f64 / th as f64;
        let mut rendered_rgb = Vec::with_capacity(3 * rw * rh);
        for y in 0..rh {
            for x in 0..rw {
                let mut color = background_color;
                for b in &blobs {
                    let x0 = (b.cx - 2.0 * b.sigma_x) * sx;
                    let x1 = (b.cx + 2.0 * b.sigma_x) * sx;
                    let y0 = (b.cy - 2.0 * b.sigma_y) * sy;
                    let y1 = (b.cy + 2.0 * b.sigma_y) * sy;
                    let (xf, yf) = (x as f64, y as f64);
                    if xf >= x0 && xf < x1 && yf >= y0 && yf < y1 {
                        color = b.color;
                    }
                }
                rendered_rgb.extend_from_slice(&color);
            }
        }
        Self {
            background_c,
            background_color,
            blobs,
            rendered_temps,
            rendered_rgb,
        }
    }
}

/// Round to the 0.01 degC storage grid so in-memory frames match
/// encode-then-decode frames exactly.
fn quantize_temp(t: f64) -> f64 {
    let sample = ((t.clamp(THERMAL_MIN_C, THERMAL_MAX_C) + 40.0) * 100.0).round();
    sample / 100.0 - 40.0
}

/// The fixed pose templates. Index 0 is a left-side blob and index 1 a
/// right-side blob (tests rely on that orientation); the rest mix sides,
/// dual-blob spans and blob scales.
pub fn template_pool(thermal_dims: [usize; 2], rgb_dims: [usize; 2]) -> Vec<PoseTemplate> {
    let blob = |cx, cy, sx, sy, d, color| Blob {
        cx,
        cy,
        sigma_x: sx,
        sigma_y: sy,
        delta_c: d,
        color,
    };
    let defs: Vec<(f64, [u8; 3], Vec<Blob>)> = vec![
        (21.0, [90, 90, 95], vec![blob(8.0, 14.0, 2.2, 2.0, 14.0, [200, 60, 50])]),
        (22.0, [90, 90, 95], vec![blob(24.0, 13.0, 2.0, 2.2, 13.0, [60, 90, 200])]),
        (20.5, [85, 95, 90], vec![blob(6.5, 18.0, 1.8, 1.8, 15.5, [70, 180, 80])]),
        (23.0, [95, 90, 85], vec![blob(25.5, 7.5, 2.0, 1.7, 12.0, [210, 200, 70])]),
        (
            21.5,
            [88, 92, 96],
            vec![
                blob(9.0, 15.0, 1.8, 1.8, 13.5, [230, 140, 60]),
                blob(23.0, 15.5, 1.8, 1.8, 14.5, [150, 70, 190]),
            ],
        ),
        (22.5, [92, 88, 92], vec![blob(15.5, 11.5, 2.4, 2.1, 13.0, [70, 190, 200])]),
        (20.0, [86, 90, 94], vec![blob(10.0, 8.0, 2.0, 2.0, 16.0, [220, 120, 160])]),
        (23.5, [94, 92, 88], vec![blob(22.0, 18.5, 2.1, 1.9, 12.5, [60, 160, 150])]),
        (
            21.0,
            [90, 94, 88],
            vec![
                blob(12.0, 9.5, 1.7, 1.7, 14.0, [190, 90, 90]),
                blob(20.5, 16.0, 1.7, 1.7, 13.0, [90, 120, 210]),
            ],
        ),
        (22.0, [87, 91, 95], vec![blob(7.0, 12.0, 3.0, 2.4, 12.5, [140, 200, 90])]),
        (20.5, [93, 89, 91], vec![blob(25.0, 16.5, 1.5, 1.5, 16.5, [230, 90, 120])]),
        (
            23.0,
            [89, 93, 89],
            vec![
                blob(8.0, 8.5, 1.8, 1.9, 13.0, [100, 100, 220]),
                blob(24.0, 17.5, 1.9, 1.8, 14.0, [220, 160, 80]),
            ],
        ),
    ];
    defs.into_iter()
        .map(|(bg, bg_color, blobs)| PoseTemplate::render(bg, bg_color, blobs, thermal_dims, rgb_dims))
        .collect()
}

/// One planned frame of the corpus timeline.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct PlannedFrame {
    pub frame_id: u64,
    /// Global timestamp within the corpus.
    pub t_ms: u64,
    pub participant: usize,
    /// Timestamp relative to the participant's stream start.
    pub rel_ms: u64,
    pub segment_id: u64,
}

/// The deterministic corpus timeline: frames, ground-truth segments, and the
/// per-participant segment boundaries (participant index, boundary rel_ms).
#[derive(Debug, Clone)]
pub struct StreamPlan {
    pub frames: Vec<PlannedFrame>,
    pub segments: Vec<ActivitySegment>,
}

pub fn plan_stream(spec: &ScenarioSpec) -> Result<StreamPlan, SynthError> {
    spec.validate()?;
    let period = spec.period_ms();
    let mut frames = Vec::new();
    let mut segments = Vec::new();
    let mut frame_id = 0u64;
    let mut stream_offset = 0u64;
    let mut segment_id = 0u64;
    for (pi, participant) in spec.participants.iter().enumerate() {
        let mut cum = 0u64;
        let mut bounds = Vec::new(); // (start, end, segment_id) rel_ms
        for seg in &participant.segments {
            let dur = (seg.duration_s * 1000.0).round() as u64;
            segments.push(ActivitySegment {
                segment_id,
                participant_id: participant.id.clone(),
                label: seg.label.clone(),
                start_ms: stream_offset + cum,
                end_ms: stream_offset + cum + dur,
            });
            bounds.push((cum, cum + dur, segment_id));
            segment_id += 1;
            cum += dur;
        }
        let mut rel = 0u64;
        let mut bound_idx = 0usize;
        while rel < cum {
            while rel >= bounds[bound_idx].1 {
                bound_idx += 1;
            }
            frames.push(PlannedFrame {
                frame_id,
                t_ms: stream_offset + rel,
                participant: pi,
                rel_ms: rel,
                segment_id: bounds[bound_idx].2,
            });
            frame_id += 1;
            rel += period;
        }
        stream_offset += cum + PARTICIPANT_GAP_MS;
    }
    Ok(StreamPlan { frames, segments })
}

/// Renderer over a plan: blends templates around boundaries and adds seeded
/// per-frame noise.
pub struct CorpusRenderer<'a> {
    spec: &'a ScenarioSpec,
    pool: Vec<PoseTemplate>,
    /// Per participant: (start_rel_ms, end_rel_ms, template index).
    timelines: Vec<Vec<(u64, u64, usize)>>,
}

impl<'a> CorpusRenderer<'a> {
    pub fn new(spec: &'a ScenarioSpec) -> Result<Self, SynthError> {
        spec.validate()?;
        let pool = template_pool(spec.thermal_dims, spec.rgb_dims);
        let timelines = spec
            .participants
            .iter()
            .map(|p| {
                let mut cum = 0u64;
                p.segments
                    .iter()
                    .map(|s| {
                        let dur = (s.duration_s * 1000.0).round() as u64;
                        let span = (cum, cum + dur, s.template);
                        cum += dur;
                        span
                    })
                    .collect()
            })
            .collect();
        Ok(Self {
            spec,
            pool,
            timelines,
        })
    }

    pub fn pool(&self) -> &[PoseTemplate] {
        &self.pool
    }

    /// Template mix at a relative timestamp: (template, next_template, alpha).
    /// Outside a blend window alpha is 0 and both templates coincide.
    fn mix_at(&self, participant: usize, rel_ms: u64) -> (usize, usize, f64) {
        let timeline = &self.timelines[participant];
        let idx = timeline
            .iter()
            .position(|&(s, e, _)| rel_ms >= s && rel_ms < e)
            .unwrap_or(timeline.len() - 1);
        let half = (self.spec.transition_s * 500.0).round() as u64;
        let (start, end, template) = timeline[idx];
        if half == 0 {
            return (template, template, 0.0);
        }
        // Blend into the next segment around its start boundary.
        if idx + 1 < timeline.len() && rel_ms >= end.saturating_sub(half) {
            let alpha = (rel_ms - (end - half)) as f64 / (2 * half) as f64;
            return (template, timeline[idx + 1].2, alpha);
        }
        // Tail of the previous segment's blend window.
        if idx > 0 && rel_ms < start + half {
            let prev = timeline[idx - 1].2;
            let alpha = (rel_ms + half - start) as f64 / (2 * half) as f64;
            return (prev, template, alpha);
        }
        (template, template, 0.0)
    }

    /// Render the synchronized frame pair for a planned frame.
    pub fn render(&self, frame: &PlannedFrame) -> (ThermalFrame, RgbFrame) {
        let (a, b, alpha) = self.mix_at(frame.participant, frame.rel_ms);
        let [tw, th] = self.spec.thermal_dims;
        let [rw, rh] = self.spec.rgb_dims;
        let ta = &self.pool[a];
        let tb = &self.pool[b];

        let mut temps = Vec::with_capacity(tw * th);
        if self.spec.noise_sigma > 0.0 {
            let mut rng = frame_rng(self.spec.seed, frame.participant, frame.frame_id);
            let normal = Normal::new(0.0, self.spec.noise_sigma).expect("valid sigma");
            for i in 0..tw * th {
                let base = (1.0 - alpha) * ta.rendered_temps[i] + alpha * tb.rendered_temps[i];
                let t = (base + normal.sample(&mut rng)).clamp(THERMAL_MIN_C, THERMAL_MAX_C);
                temps.push(quantize_temp(t));
            }
        } else {
            for i in 0..tw * th {
                let base = (1.0 - alpha) * ta.rendered_temps[i] + alpha * tb.rendered_temps[i];
                temps.push(quantize_temp(base));
            }
        }
        let thermal = ThermalFrame {
            timestamp_ms: frame.t_ms,
            width: tw,
            height: th,
            temps,
        };

        let pixels = if alpha == 0.0 {
            ta.rendered_rgb.clone()
        } else {
            ta.rendered_rgb
                .iter()
                .zip(&tb.rendered_rgb)
                .map(|(&x, &y)| ((1.0 - alpha) * x as f64 + alpha * y as f64).round() as u8)
                .collect()
        };
        let rgb = RgbFrame {
            timestamp_ms: frame.t_ms,
            width: rw,
            height: rh,
            pixels,
        };
        (thermal, rgb)
    }
}

fn frame_rng(seed: u64, participant: usize, frame_id: u64) -> ChaCha8Rng {
    // splitmix-style mixing keeps per-frame streams independent and
    // random-access reproducible.
    let mut z = seed
        ^ (participant as u64).wrapping_mul(0xA24B_AED4_963E_E407)
        ^ frame_id.wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    ChaCha8Rng::seed_from_u64(z ^ (z >> 31))
}

/// Generate the corpus on disk: manifest plus per-frame PGM/PPM files.
/// Returns the manifest path.
pub fn generate_corpus(spec: &ScenarioSpec, out_dir: &Path) -> Result<PathBuf, SynthError> {
    let plan = plan_stream(spec)?;
    let renderer = CorpusRenderer::new(spec)?;
    let mut records = Vec::with_capacity(plan.frames.len());
    for frame in &plan.frames {
        let participant = &spec.participants[frame.participant];
        let thermal_rel = format!("thermal/{}/{:07}.pgm", participant.id, frame.frame_id);
        let rgb_rel = format!("rgb/{}/{:07}.ppm", participant.id, frame.frame_id);
        let (thermal, rgb) = renderer.render(frame);
        let thermal_path = out_dir.join(&thermal_rel);
        let rgb_path = out_dir.join(&rgb_rel);
        std::fs::create_dir_all(thermal_path.parent().unwrap())?;
        std::fs::create_dir_all(rgb_path.parent().unwrap())?;
        std::fs::write(&thermal_path, encode_thermal(&thermal))?;
        std::fs::write(&rgb_path, encode_rgb(&rgb))?;
        let segment = &plan.segments[frame.segment_id as usize];
        records.push(FrameRecord {
            frame_id: frame.frame_id,
            timestamp_ms: frame.t_ms,
            thermal_path: thermal_rel,
            rgb_path: rgb_rel,
            participant_id: participant.id.clone(),
            activity_label: Some(segment.label.clone()),
            segment_id: Some(frame.segment_id),
        });
    }
    Ok(store_stream(&records, out_dir)?)
}
