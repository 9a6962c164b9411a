//! Segment-length binning and the two sampling metrics: coverage (segments
//! with at least `min_frames` sampled frames) and pixel-usage ratio
//! (sampled pixels over the pixels a full-rate, full-frame capture implies).

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::frames::{ActivitySegment, FrameRecord};
use crate::temporal::SampleTrace;

#[derive(Debug, Error)]
pub enum MetricsError {
    #[error("degenerate length distribution: {0}")]
    Degenerate(String),
    #[error("trace references frame {0} absent from the base stream")]
    UnknownFrame(u64),
    #[error("invalid thresholds: t1 {0} must be < t2 {1}")]
    BadThresholds(f64, f64),
}

/// Default bin boundaries in seconds: one minute and 2.7 minutes.
pub const DEFAULT_T1_S: f64 = 60.0;
pub const DEFAULT_T2_S: f64 = 162.0;

/// Coverage counts a segment once it holds at least this many sampled frames.
pub const DEFAULT_MIN_FRAMES: usize = 4;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LengthBin {
    Short,
    Medium,
    Long,
}

impl LengthBin {
    pub fn name(&self) -> &'static str {
        match self {
            Self::Short => "short",
            Self::Medium => "medium",
            Self::Long => "long",
        }
    }
}

/// Two length thresholds plus the bin of every segment.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SegmentBins {
    pub t1_s: f64,
    pub t2_s: f64,
    /// segment_id -> bin
    pub bins: BTreeMap<u64, LengthBin>,
}

/// Head/tail breaks realized as two nested mean splits: t1 is the mean of
/// all lengths, t2 the mean of the head (lengths above t1).
pub fn head_tail_thresholds(lengths_s: &[f64]) -> Result<(f64, f64), MetricsError> {
    let mut distinct: Vec<f64> = lengths_s.to_vec();
    distinct.sort_by(|a, b| a.partial_cmp(b).unwrap());
    distinct.dedup();
    if distinct.len() < 3 {
        return Err(MetricsError::Degenerate(format!(
            "need at least 3 distinct lengths, got {}",
            distinct.len()
        )));
    }
    let t1 = lengths_s.iter().sum::<f64>() / lengths_s.len() as f64;
    let head: Vec<f64> = lengths_s.iter().copied().filter(|&l| l > t1).collect();
    if head.is_empty() {
        return Err(MetricsError::Degenerate("no lengths above the mean".into()));
    }
    let t2 = head.iter().sum::<f64>() / head.len() as f64;
    Ok((t1, t2))
}

pub fn bin_of(length_s: f64, t1_s: f64, t2_s: f64) -> LengthBin {
    if length_s < t1_s {
        LengthBin::Short
    } else if length_s < t2_s {
        LengthBin::Medium
    } else {
        LengthBin::Long
    }
}

/// Assign every segment to exactly one bin. Boundaries go up: a length of
/// exactly t1 is medium, exactly t2 is long.
pub fn bin_segments(
    segments: &[ActivitySegment],
    t1_s: f64,
    t2_s: f64,
) -> Result<SegmentBins, MetricsError> {
    if !(t1_s < t2_s) {
        return Err(MetricsError::BadThresholds(t1_s, t2_s));
    }
    let bins = segments
        .iter()
        .map(|s| (s.segment_id, bin_of(s.duration_s(), t1_s, t2_s)))
        .collect();
    Ok(SegmentBins { t1_s, t2_s, bins })
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct BinCoverage {
    pub segments: usize,
    pub covered: usize,
}

impl BinCoverage {
    pub fn fraction(&self) -> f64 {
        if self.segments == 0 {
            0.0
        } else {
            self.covered as f64 / self.segments as f64
        }
    }
}

/// Coverage of segments by a trace: per bin, overall, and per segment.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoverageReport {
    pub min_frames: usize,
    pub per_bin: BTreeMap<LengthBin, BinCoverage>,
    pub overall: BinCoverage,
    /// segment_id -> sampled-frame count
    pub frames_per_segment: BTreeMap<u64, usize>,
}

impl CoverageReport {
    pub fn bin_fraction(&self, bin: LengthBin) -> f64 {
        self.per_bin.get(&bin).map_or(0.0, BinCoverage::fraction)
    }
}

/// A sampled frame counts toward the segment whose interval contains its
/// timestamp.
pub fn coverage(
    trace: &SampleTrace,
    segments: &[ActivitySegment],
    bins: &SegmentBins,
    min_frames: usize,
) -> CoverageReport {
    let mut frames_per_segment: BTreeMap<u64, usize> =
        segments.iter().map(|s| (s.segment_id, 0)).collect();
    for rec in &trace.records {
        for seg in segments {
            if seg.contains_ms(rec.t_ms) {
                *frames_per_segment.entry(seg.segment_id).or_default() += 1;
                break;
            }
        }
    }
    let mut per_bin: BTreeMap<LengthBin, BinCoverage> = BTreeMap::new();
    let mut overall = BinCoverage::default();
    for seg in segments {
        let bin = bins.bins[&seg.segment_id];
        let entry = per_bin.entry(bin).or_default();
        entry.segments += 1;
        overall.segments += 1;
        if frames_per_segment[&seg.segment_id] >= min_frames {
            entry.covered += 1;
            overall.covered += 1;
        }
    }
    CoverageReport {
        min_frames,
        per_bin,
        overall,
        frames_per_segment,
    }
}

/// Pixel accounting for a trace against its base stream.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UsageReport {
    pub pixels_sampled: u64,
    pub pixels_total: u64,
    pub ratio: f64,
    /// participant -> (sampled, total)
    pub per_participant: BTreeMap<String, (u64, u64)>,
}

impl UsageReport {
    pub fn participant_ratio(&self, participant: &str) -> f64 {
        match self.per_participant.get(participant) {
            Some(&(sampled, total)) if total > 0 => sampled as f64 / total as f64,
            _ => 0.0,
        }
    }
}

/// Sampled pixels are the sum of crop areas (a null crop accounts as the full
/// frame); total pixels are frame area times every frame in the base stream.
pub fn pixel_usage(
    trace: &SampleTrace,
    base_stream: &[FrameRecord],
    frame_area: u64,
) -> Result<UsageReport, MetricsError> {
    let by_id: BTreeMap<u64, &FrameRecord> =
        base_stream.iter().map(|r| (r.frame_id, r)).collect();
    let mut per_participant: BTreeMap<String, (u64, u64)> = BTreeMap::new();
    for rec in base_stream {
        per_participant
            .entry(rec.participant_id.clone())
            .or_default()
            .1 += frame_area;
    }
    let mut pixels_sampled = 0u64;
    for rec in &trace.records {
        let base = by_id
            .get(&rec.frame_id)
            .ok_or(MetricsError::UnknownFrame(rec.frame_id))?;
        let area = rec
            .crop
            .map_or(frame_area, |[_, _, w, h]| w as u64 * h as u64);
        pixels_sampled += area;
        per_participant
            .get_mut(&base.participant_id)
            .expect("participant present")
            .0 += area;
    }
    let pixels_total: u64 = base_stream.len() as u64 * frame_area;
    let ratio = if pixels_total == 0 {
        0.0
    } else {
        pixels_sampled as f64 / pixels_total as f64
    };
    Ok(UsageReport {
        pixels_sampled,
        pixels_total,
        ratio,
        per_participant,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::temporal::{TraceHeader, TraceRecord};

    fn seg(id: u64, start_s: u64, len_s: u64) -> ActivitySegment {
        ActivitySegment {
            segment_id: id,
            participant_id: "p00".into(),
            label: format!("A{id}"),
            start_ms: start_s * 1000,
            end_ms: (start_s + len_s) * 1000,
        }
    }

    fn trace_at(times_ms: &[u64]) -> SampleTrace {
        SampleTrace {
            header: TraceHeader {
                trace: "v1".into(),
                corpus: "c".into(),
                sampler: "test".into(),
                config: None,
                uniform_period_s: None,
            },
            records: times_ms
                .iter()
                .enumerate()
                .map(|(i, &t)| TraceRecord {
                    frame_id: i as u64,
                    t_ms: t,
                    fps: 4.0,
                    crop: None,
                })
                .collect(),
        }
    }

    #[test]
    fn head_tail_worked_example() {
        let (t1, t2) = head_tail_thresholds(&[1.0, 1.0, 1.0, 10.0, 10.0, 100.0]).unwrap();
        assert_eq!(t1, 20.5);
        assert_eq!(t2, 100.0);
    }

    #[test]
    fn head_tail_small_case() {
        let (t1, t2) = head_tail_thresholds(&[1.0, 2.0, 3.0]).unwrap();
        assert_eq!(t1, 2.0);
        assert_eq!(t2, 3.0);
    }

    #[test]
    fn head_tail_constant_is_degenerate() {
        assert!(head_tail_thresholds(&[5.0, 5.0, 5.0]).is_err());
    }

    #[test]
    fn bin_boundaries_go_up() {
        assert_eq!(bin_of(30.0, DEFAULT_T1_S, DEFAULT_T2_S), LengthBin::Short);
        assert_eq!(bin_of(90.0, DEFAULT_T1_S, DEFAULT_T2_S), LengthBin::Medium);
        assert_eq!(bin_of(162.0, DEFAULT_T1_S, DEFAULT_T2_S), LengthBin::Long);
        assert_eq!(bin_of(60.0, DEFAULT_T1_S, DEFAULT_T2_S), LengthBin::Medium);
    }

    #[test]
    fn coverage_threshold_boundary() {
        let segments = vec![seg(0, 0, 10), seg(1, 10, 10)];
        let bins = bin_segments(&segments, DEFAULT_T1_S, DEFAULT_T2_S).unwrap();
        // Segment 0 gets 4 frames, segment 1 gets 3.
        let trace = trace_at(&[0, 1000, 2000, 3000, 10_000, 11_000, 12_000]);
        let report = coverage(&trace, &segments, &bins, DEFAULT_MIN_FRAMES);
        assert_eq!(report.frames_per_segment[&0], 4);
        assert_eq!(report.frames_per_segment[&1], 3);
        assert_eq!(report.overall.covered, 1);
        assert_eq!(report.overall.segments, 2);
    }

    fn base_stream(n: u64) -> Vec<FrameRecord> {
        (0..n)
            .map(|i| FrameRecord {
                frame_id: i,
                timestamp_ms: i * 250,
                thermal_path: String::new(),
                rgb_path: String::new(),
                participant_id: if i < n / 2 { "p00" } else { "p01" }.into(),
                activity_label: None,
                segment_id: None,
            })
            .collect()
    }

    #[test]
    fn usage_full_sampling_is_one() {
        let stream = base_stream(8);
        let mut trace = trace_at(&[0; 8]);
        for (i, rec) in trace.records.iter_mut().enumerate() {
            rec.frame_id = i as u64;
        }
        let report = pixel_usage(&trace, &stream, 1000).unwrap();
        assert_eq!(report.ratio, 1.0);
    }

    #[test]
    fn usage_half_frames_quarter_crops() {
        let stream = base_stream(8);
        let trace = SampleTrace {
            records: (0..4)
                .map(|i| TraceRecord {
                    frame_id: i * 2,
                    t_ms: i * 500,
                    fps: 2.0,
                    crop: Some([0, 0, 25, 10]), // quarter of 1000
                })
                .collect(),
            ..trace_at(&[])
        };
        let report = pixel_usage(&trace, &stream, 1000).unwrap();
        assert_eq!(report.ratio, 0.125);
    }

    #[test]
    fn usage_empty_trace_is_zero() {
        let stream = base_stream(8);
        let report = pixel_usage(&trace_at(&[]), &stream, 1000).unwrap();
        assert_eq!(report.ratio, 0.0);
    }

    #[test]
    fn usage_rejects_unknown_frame() {
        let stream = base_stream(4);
        let mut trace = trace_at(&[0]);
        trace.records[0].frame_id = 99;
        assert!(matches!(
            pixel_usage(&trace, &stream, 1000),
            Err(MetricsError::UnknownFrame(99))
        ));
    }

    #[test]
    fn usage_is_additive_over_participants() {
        let stream = base_stream(8);
        let trace = SampleTrace {
            records: vec![
                TraceRecord { frame_id: 0, t_ms: 0, fps: 4.0, crop: Some([0, 0, 10, 10]) },
                TraceRecord { frame_id: 5, t_ms: 1250, fps: 4.0, crop: Some([0, 0, 20, 10]) },
            ],
            ..trace_at(&[])
        };
        let report = pixel_usage(&trace, &stream, 1000).unwrap();
        let (s0, t0) = report.per_participant["p00"];
        let (s1, t1) = report.per_participant["p01"];
        assert_eq!(s0 + s1, report.pixels_sampled);
        assert_eq!(t0 + t1, report.pixels_total);
        assert_eq!((s0, s1), (100, 200));
    }
}
