//! Thermal-guided region-of-interest extraction.
//!
//! Per frame: Otsu-threshold the temperature grid, mask the hot pixels, take
//! the tight bounding box, classify it against the vertical center line, map
//! the box into RGB coordinates, grow it directionally (up+left when the heat
//! lies right of center, up+right when left, up+both when spanning), then
//! crop the RGB frame to the result.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::frames::{RgbFrame, ThermalFrame};

#[derive(Debug, Error)]
pub enum SpatialError {
    #[error("degenerate frame: fewer than 2 distinct temperature values")]
    DegenerateFrame,
    #[error("invalid calibration: scale factors must be positive")]
    BadCalibration,
    #[error("frames are not time-synchronized: thermal {0} ms vs rgb {1} ms")]
    NotSynchronized(u64, u64),
}

pub const OTSU_BINS: usize = 256;

/// Axis-aligned box in pixel units.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Box2D {
    pub x: u32,
    pub y: u32,
    pub w: u32,
    pub h: u32,
}

impl Box2D {
    pub fn area(&self) -> u64 {
        self.w as u64 * self.h as u64
    }

    pub fn contains(&self, other: &Box2D) -> bool {
        other.x >= self.x
            && other.y >= self.y
            && other.x + other.w <= self.x + self.w
            && other.y + other.h <= self.y + self.h
    }

    pub fn as_array(&self) -> [u32; 4] {
        [self.x, self.y, self.w, self.h]
    }
}

/// Thermal-to-RGB coordinate mapping (axis-aligned affine).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Calibration {
    pub scale_x: f64,
    pub scale_y: f64,
    pub offset_x: f64,
    pub offset_y: f64,
}

impl Calibration {
    /// Stretch the full thermal grid onto the full RGB frame.
    pub fn full_frame(thermal_w: usize, thermal_h: usize, rgb_w: usize, rgb_h: usize) -> Self {
        Self {
            scale_x: rgb_w as f64 / thermal_w as f64,
            scale_y: rgb_h as f64 / thermal_h as f64,
            offset_x: 0.0,
            offset_y: 0.0,
        }
    }

    pub fn validate(&self) -> Result<(), SpatialError> {
        if self.scale_x > 0.0 && self.scale_y > 0.0 {
            Ok(())
        } else {
            Err(SpatialError::BadCalibration)
        }
    }
}

/// Binary heat mask over the thermal grid with its tight bounding box.
#[derive(Debug, Clone, PartialEq)]
pub struct HeatMask {
    pub width: usize,
    pub height: usize,
    pub bits: Vec<bool>,
    pub bbox: Option<Box2D>,
}

/// Where the heat bounding box sits relative to the vertical center line.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MaskSide {
    RightOfCenter,
    LeftOfCenter,
    Spanning,
    Empty,
}

/// A cropped RGB region around the hand/object heat signature.
#[derive(Debug, Clone, PartialEq)]
pub struct Patch {
    pub frame_id: u64,
    pub bbox: Box2D,
    pub pixels: RgbFrame,
}

/// Otsu's threshold over a 256-bin histogram spanning the frame's own
/// [min, max] temperature range. Returns the bin boundary maximizing
/// between-class variance; ties break toward the lower threshold.
pub fn otsu_threshold(frame: &ThermalFrame) -> Result<f64, SpatialError> {
    let min = frame.temps.iter().cloned().fold(f64::INFINITY, f64::min);
    let max = frame.temps.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    if !(max > min) {
        return Err(SpatialError::DegenerateFrame);
    }
    let width = (max - min) / OTSU_BINS as f64;
    let mut hist = [0u32; OTSU_BINS];
    for &t in &frame.temps {
        let bin = (((t - min) / width) as usize).min(OTSU_BINS - 1);
        hist[bin] += 1;
    }

    let total = frame.temps.len() as f64;
    let total_sum: f64 = hist
        .iter()
        .enumerate()
        .map(|(i, &c)| i as f64 * c as f64)
        .sum();

    // Cut k puts bins [0, k] below and [k+1, 255] above; the threshold is
    // the boundary between bins k and k+1.
    let mut best_cut: Option<usize> = None;
    let mut best_var = f64::NEG_INFINITY;
    let mut w0 = 0.0;
    let mut sum0 = 0.0;
    for k in 0..OTSU_BINS - 1 {
        w0 += hist[k] as f64;
        sum0 += k as f64 * hist[k] as f64;
        let w1 = total - w0;
        if w0 == 0.0 || w1 == 0.0 {
            continue;
        }
        let mu0 = sum0 / w0;
        let mu1 = (total_sum - sum0) / w1;
        let var = w0 * w1 * (mu0 - mu1) * (mu0 - mu1);
        if var > best_var {
            best_var = var;
            best_cut = Some(k);
        }
    }
    let cut = best_cut.ok_or(SpatialError::DegenerateFrame)?;
    Ok(min + (cut + 1) as f64 * width)
}

/// Mask of pixels strictly above the threshold, with tight bounding box.
pub fn heat_mask(frame: &ThermalFrame, threshold: f64) -> HeatMask {
    let bits: Vec<bool> = frame.temps.iter().map(|&t| t > threshold).collect();
    let mut bbox: Option<(u32, u32, u32, u32)> = None; // x0, y0, x1, y1 inclusive
    for (i, &hot) in bits.iter().enumerate() {
        if !hot {
            continue;
        }
        let x = (i % frame.width) as u32;
        let y = (i / frame.width) as u32;
        bbox = Some(match bbox {
            None => (x, y, x, y),
            Some((x0, y0, x1, y1)) => (x0.min(x), y0.min(y), x1.max(x), y1.max(y)),
        });
    }
    HeatMask {
        width: frame.width,
        height: frame.height,
        bits,
        bbox: bbox.map(|(x0, y0, x1, y1)| Box2D {
            x: x0,
            y: y0,
            w: x1 - x0 + 1,
            h: y1 - y0 + 1,
        }),
    }
}

/// Classify the mask against the vertical center line x_c = width / 2:
/// right-of-center iff the box starts at or past it, left-of-center iff the
/// box ends at or before it, spanning otherwise.
pub fn classify_mask(mask: &HeatMask) -> MaskSide {
    let Some(bbox) = mask.bbox else {
        return MaskSide::Empty;
    };
    let center = mask.width as f64 / 2.0;
    if bbox.x as f64 >= center {
        MaskSide::RightOfCenter
    } else if (bbox.x + bbox.w) as f64 <= center {
        MaskSide::LeftOfCenter
    } else {
        MaskSide::Spanning
    }
}

/// Grow a box by the directional expansion rule, clamped to frame bounds.
pub fn expand_box(
    bbox: Box2D,
    side: MaskSide,
    margin_px: u32,
    frame_w: u32,
    frame_h: u32,
) -> Option<Box2D> {
    if side == MaskSide::Empty {
        return None;
    }
    let m = margin_px as i64;
    let (mut x0, mut y0) = (bbox.x as i64, bbox.y as i64);
    let (mut x1, mut y1) = ((bbox.x + bbox.w) as i64, (bbox.y + bbox.h) as i64);
    y0 -= m; // every rule grows upward
    match side {
        MaskSide::RightOfCenter => x0 -= m,
        MaskSide::LeftOfCenter => x1 += m,
        MaskSide::Spanning => {
            x0 -= m;
            x1 += m;
        }
        MaskSide::Empty => unreachable!(),
    }
    x0 = x0.clamp(0, frame_w as i64);
    y0 = y0.clamp(0, frame_h as i64);
    x1 = x1.clamp(0, frame_w as i64);
    y1 = y1.clamp(0, frame_h as i64);
    if x1 <= x0 || y1 <= y0 {
        return None;
    }
    Some(Box2D {
        x: x0 as u32,
        y: y0 as u32,
        w: (x1 - x0) as u32,
        h: (y1 - y0) as u32,
    })
}

/// Map a thermal-space box into RGB space, rounding outward and clamping.
pub fn map_to_rgb(
    bbox: Box2D,
    calibration: &Calibration,
    rgb_w: u32,
    rgb_h: u32,
) -> Result<Option<Box2D>, SpatialError> {
    calibration.validate()?;
    let x0 = (bbox.x as f64 * calibration.scale_x + calibration.offset_x).floor();
    let y0 = (bbox.y as f64 * calibration.scale_y + calibration.offset_y).floor();
    let x1 = ((bbox.x + bbox.w) as f64 * calibration.scale_x + calibration.offset_x).ceil();
    let y1 = ((bbox.y + bbox.h) as f64 * calibration.scale_y + calibration.offset_y).ceil();
    let x0 = (x0.max(0.0) as u32).min(rgb_w);
    let y0 = (y0.max(0.0) as u32).min(rgb_h);
    let x1 = (x1.max(0.0) as u32).min(rgb_w);
    let y1 = (y1.max(0.0) as u32).min(rgb_h);
    if x1 <= x0 || y1 <= y0 {
        return Ok(None);
    }
    Ok(Some(Box2D {
        x: x0,
        y: y0,
        w: x1 - x0,
        h: y1 - y0,
    }))
}

/// Crop an RGB frame to a box (assumed in bounds).
pub fn crop_rgb(frame: &RgbFrame, bbox: Box2D) -> RgbFrame {
    let mut pixels = Vec::with_capacity(3 * bbox.area() as usize);
    for y in bbox.y..bbox.y + bbox.h {
        let row_start = 3 * (y as usize * frame.width + bbox.x as usize);
        pixels.extend_from_slice(&frame.pixels[row_start..row_start + 3 * bbox.w as usize]);
    }
    RgbFrame {
        timestamp_ms: frame.timestamp_ms,
        width: bbox.w as usize,
        height: bbox.h as usize,
        pixels,
    }
}

/// End-to-end patch extraction. `Ok(None)` signals no patch: a cold frame
/// (degenerate threshold or empty mask) or a box that vanished in clamping.
pub fn extract_patch(
    rgb: &RgbFrame,
    thermal: &ThermalFrame,
    frame_id: u64,
    calibration: &Calibration,
    margin_px: u32,
) -> Result<Option<Patch>, SpatialError> {
    if rgb.timestamp_ms != thermal.timestamp_ms {
        return Err(SpatialError::NotSynchronized(
            thermal.timestamp_ms,
            rgb.timestamp_ms,
        ));
    }
    let threshold = match otsu_threshold(thermal) {
        Ok(t) => t,
        Err(SpatialError::DegenerateFrame) => return Ok(None),
        Err(e) => return Err(e),
    };
    let mask = heat_mask(thermal, threshold);
    let side = classify_mask(&mask);
    let Some(thermal_bbox) = mask.bbox else {
        return Ok(None);
    };
    let Some(mapped) = map_to_rgb(thermal_bbox, calibration, rgb.width as u32, rgb.height as u32)?
    else {
        return Ok(None);
    };
    let Some(expanded) = expand_box(mapped, side, margin_px, rgb.width as u32, rgb.height as u32)
    else {
        return Ok(None);
    };
    Ok(Some(Patch {
        frame_id,
        bbox: expanded,
        pixels: crop_rgb(rgb, expanded),
    }))
}

/// File name convention for stored patches.
pub fn patch_file_name(patch: &Patch) -> String {
    format!(
        "{}_{}_{}_{}_{}.ppm",
        patch.frame_id, patch.bbox.x, patch.bbox.y, patch.bbox.w, patch.bbox.h
    )
}

#[cfg(test)]
mod tests {
    use super::*;

    fn grid(width: usize, height: usize, f: impl Fn(usize, usize) -> f64) -> ThermalFrame {
        let temps = (0..width * height)
            .map(|i| f(i % width, i / width))
            .collect();
        ThermalFrame::new(0, width, height, temps).unwrap()
    }

    #[test]
    fn otsu_separates_perfect_bimodal() {
        let frame = grid(32, 24, |x, _| if x < 16 { 20.0 } else { 35.0 });
        let t = otsu_threshold(&frame).unwrap();
        assert!(t > 20.0 && t < 35.0, "threshold {t}");
        let mask = heat_mask(&frame, t);
        let hot = mask.bits.iter().filter(|&&b| b).count();
        assert_eq!(hot, 32 * 24 / 2);
    }

    #[test]
    fn otsu_rejects_constant_frame() {
        let frame = grid(8, 8, |_, _| 21.5);
        assert!(matches!(
            otsu_threshold(&frame),
            Err(SpatialError::DegenerateFrame)
        ));
    }

    #[test]
    fn mask_bbox_cases() {
        let cold = grid(32, 24, |_, _| 20.0);
        assert_eq!(heat_mask(&cold, 25.0).bbox, None);

        let single = grid(32, 24, |x, y| if (x, y) == (5, 7) { 40.0 } else { 20.0 });
        let bbox = heat_mask(&single, 30.0).bbox.unwrap();
        assert_eq!(bbox, Box2D { x: 5, y: 7, w: 1, h: 1 });

        // Two disjoint blobs: one enclosing box.
        let dual = grid(32, 24, |x, y| {
            if (x, y) == (2, 3) || (x, y) == (29, 20) {
                40.0
            } else {
                20.0
            }
        });
        let bbox = heat_mask(&dual, 30.0).bbox.unwrap();
        assert_eq!(bbox, Box2D { x: 2, y: 3, w: 28, h: 18 });
    }

    #[test]
    fn classify_against_center_line() {
        let mk = |x, w| HeatMask {
            width: 32,
            height: 24,
            bits: vec![],
            bbox: Some(Box2D { x, y: 0, w, h: 4 }),
        };
        assert_eq!(classify_mask(&mk(16, 10)), MaskSide::RightOfCenter);
        assert_eq!(classify_mask(&mk(2, 14)), MaskSide::LeftOfCenter);
        assert_eq!(classify_mask(&mk(10, 11)), MaskSide::Spanning);
        let empty = HeatMask {
            width: 32,
            height: 24,
            bits: vec![],
            bbox: None,
        };
        assert_eq!(classify_mask(&empty), MaskSide::Empty);
    }

    #[test]
    fn expansion_rules() {
        let b = Box2D { x: 100, y: 100, w: 50, h: 50 };
        assert_eq!(
            expand_box(b, MaskSide::RightOfCenter, 20, 956, 720).unwrap(),
            Box2D { x: 80, y: 80, w: 70, h: 70 }
        );
        let edge = Box2D { x: 0, y: 10, w: 30, h: 30 };
        assert_eq!(
            expand_box(edge, MaskSide::LeftOfCenter, 20, 956, 720).unwrap(),
            Box2D { x: 0, y: 0, w: 50, h: 40 }
        );
        let span = Box2D { x: 400, y: 300, w: 100, h: 100 };
        assert_eq!(
            expand_box(span, MaskSide::Spanning, 20, 956, 720).unwrap(),
            Box2D { x: 380, y: 280, w: 140, h: 120 }
        );
    }

    #[test]
    fn map_to_rgb_full_frame_scaling() {
        let cal = Calibration {
            scale_x: 29.875,
            scale_y: 30.0,
            offset_x: 0.0,
            offset_y: 0.0,
        };
        let mapped = map_to_rgb(Box2D { x: 8, y: 6, w: 8, h: 6 }, &cal, 956, 720)
            .unwrap()
            .unwrap();
        assert_eq!(mapped, Box2D { x: 239, y: 180, w: 239, h: 180 });

        let identity = Calibration {
            scale_x: 1.0,
            scale_y: 1.0,
            offset_x: 0.0,
            offset_y: 0.0,
        };
        let b = Box2D { x: 3, y: 4, w: 5, h: 6 };
        assert_eq!(map_to_rgb(b, &identity, 956, 720).unwrap().unwrap(), b);

        // Box mapping beyond the frame clamps to the edge.
        let clamped = map_to_rgb(Box2D { x: 30, y: 0, w: 8, h: 4 }, &cal, 956, 720)
            .unwrap()
            .unwrap();
        assert_eq!(clamped.x + clamped.w, 956);
    }

    #[test]
    fn extract_patch_contains_heat_and_handles_cold_frames() {
        let thermal = grid(32, 24, |x, y| {
            if (20..24).contains(&x) && (10..13).contains(&y) {
                36.0
            } else {
                21.0
            }
        });
        let rgb = RgbFrame::new(0, 956, 720, vec![128; 3 * 956 * 720]).unwrap();
        let cal = Calibration::full_frame(32, 24, 956, 720);
        let patch = extract_patch(&rgb, &thermal, 7, &cal, 20).unwrap().unwrap();
        let mapped = map_to_rgb(Box2D { x: 20, y: 10, w: 4, h: 3 }, &cal, 956, 720)
            .unwrap()
            .unwrap();
        assert!(patch.bbox.contains(&mapped));
        assert_eq!(patch.frame_id, 7);
        assert_eq!(patch.pixels.width as u32, patch.bbox.w);

        let cold = grid(32, 24, |_, _| 19.0);
        assert!(extract_patch(&rgb, &cold, 8, &cal, 20).unwrap().is_none());
    }

    #[test]
    fn patch_file_name_convention() {
        let patch = Patch {
            frame_id: 12,
            bbox: Box2D { x: 1, y: 2, w: 3, h: 4 },
            pixels: RgbFrame::new(0, 3, 4, vec![0; 36]).unwrap(),
        };
        assert_eq!(patch_file_name(&patch), "12_1_2_3_4.ppm");
    }
}
