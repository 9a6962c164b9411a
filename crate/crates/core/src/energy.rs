//! Duty-cycle energy accounting over measured component powers.
//!
//! This is bookkeeping, not physics: the bundled constants are measured
//! per-reference-hour draws for the wearable device and the phone, and a
//! sampling policy is charged along two axes. Network transmission scales
//! with its pixel-usage ratio; model inference scales with its sampled-frame
//! count.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::segments::UsageReport;

#[derive(Debug, Error)]
pub enum EnergyError {
    #[error("invalid profile: {0}")]
    Profile(String),
    #[error("baseline total must be positive")]
    ZeroBaseline,
}

/// Measured component powers in mWh per reference hour.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PowerProfile {
    // Wearable device rows.
    pub thermal_only: f64,
    pub rgb_only: f64,
    pub rgb_thermal: f64,
    pub rgb_network_stream: f64,
    pub rgb_thermal_model: f64,
    // Phone inference rows.
    pub patch_input: f64,
    pub patch_io: f64,
    pub full_input: f64,
    pub full_io: f64,
    /// Queries per reference hour behind the phone rows (1 Hz by convention).
    pub reference_query_rate: f64,
}

impl Default for PowerProfile {
    fn default() -> Self {
        Self {
            thermal_only: 50.0,
            rgb_only: 60.0,
            rgb_thermal: 65.0,
            rgb_network_stream: 80.0,
            rgb_thermal_model: 69.0,
            patch_input: 31.0,
            patch_io: 36.5,
            full_input: 80.0,
            full_io: 131.0,
            reference_query_rate: 3600.0,
        }
    }
}

impl PowerProfile {
    pub fn validate(&self) -> Result<(), EnergyError> {
        let fields = [
            self.thermal_only,
            self.rgb_only,
            self.rgb_thermal,
            self.rgb_network_stream,
            self.rgb_thermal_model,
            self.patch_input,
            self.patch_io,
            self.full_input,
            self.full_io,
            self.reference_query_rate,
        ];
        if fields.iter().all(|&v| v > 0.0) {
            Ok(())
        } else {
            Err(EnergyError::Profile("all powers must be positive".into()))
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnergyReport {
    pub components: BTreeMap<String, f64>,
    pub total_mwh: f64,
}

impl EnergyReport {
    fn from_components(components: BTreeMap<String, f64>) -> Self {
        let total_mwh = components.values().sum();
        Self {
            components,
            total_mwh,
        }
    }
}

/// VLM input mode on the phone.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PhoneMode {
    Patch,
    Full,
}

/// Device-side energy of the adaptive pipeline: sensors plus the on-device
/// model draw continuously; network transmission scales with the pixel ratio
/// of what actually ships.
pub fn device_energy(usage: &UsageReport, profile: &PowerProfile, hours: f64) -> EnergyReport {
    let mut components = BTreeMap::new();
    components.insert(
        "sensing_and_model".to_string(),
        profile.rgb_thermal_model * hours,
    );
    components.insert(
        "network".to_string(),
        usage.ratio * (profile.rgb_network_stream - profile.rgb_only) * hours,
    );
    EnergyReport::from_components(components)
}

/// Device-side baseline: continuously streaming full frames.
pub fn device_baseline_energy(profile: &PowerProfile, hours: f64) -> EnergyReport {
    let mut components = BTreeMap::new();
    components.insert(
        "rgb_network_stream".to_string(),
        profile.rgb_network_stream * hours,
    );
    EnergyReport::from_components(components)
}

/// Phone-side inference energy for a number of sampled-frame queries.
pub fn phone_energy(
    sampled_frames: usize,
    profile: &PowerProfile,
    mode: PhoneMode,
    with_output: bool,
) -> EnergyReport {
    let per_hour = match (mode, with_output) {
        (PhoneMode::Patch, false) => profile.patch_input,
        (PhoneMode::Patch, true) => profile.patch_io,
        (PhoneMode::Full, false) => profile.full_input,
        (PhoneMode::Full, true) => profile.full_io,
    };
    let name = format!(
        "vlm_{}_{}",
        match mode {
            PhoneMode::Patch => "patch",
            PhoneMode::Full => "full",
        },
        if with_output { "io" } else { "input" }
    );
    let mut components = BTreeMap::new();
    components.insert(
        name,
        per_hour * (sampled_frames as f64 / profile.reference_query_rate),
    );
    EnergyReport::from_components(components)
}

/// Reduction of `ours` against `baseline`, in percent.
pub fn reduction_report(ours: &EnergyReport, baseline: &EnergyReport) -> Result<f64, EnergyError> {
    if baseline.total_mwh <= 0.0 {
        return Err(EnergyError::ZeroBaseline);
    }
    // Scale before dividing: keeps table-derived reductions like
    // (80 - 69) / 80 at exactly 13.75.
    Ok((baseline.total_mwh - ours.total_mwh) * 100.0 / baseline.total_mwh)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn usage(ratio: f64) -> UsageReport {
        UsageReport {
            pixels_sampled: (ratio * 1000.0) as u64,
            pixels_total: 1000,
            ratio,
            per_participant: BTreeMap::new(),
        }
    }

    #[test]
    fn baseline_hour_is_eighty() {
        let report = device_baseline_energy(&PowerProfile::default(), 1.0);
        assert_eq!(report.total_mwh, 80.0);
    }

    #[test]
    fn zero_duty_pipeline_hour_is_sixty_nine() {
        let report = device_energy(&usage(0.0), &PowerProfile::default(), 1.0);
        assert_eq!(report.components["network"], 0.0);
        assert_eq!(report.total_mwh, 69.0);
    }

    #[test]
    fn network_scales_with_pixel_ratio() {
        let profile = PowerProfile::default();
        let report = device_energy(&usage(0.5), &profile, 1.0);
        // Marginal network cost is 80 - 60 = 20 mWh/h at full duty.
        assert_eq!(report.components["network"], 10.0);
        assert_eq!(report.total_mwh, 79.0);
    }

    #[test]
    fn reduction_arithmetic() {
        let ours = device_energy(&usage(0.0), &PowerProfile::default(), 1.0);
        let base = device_baseline_energy(&PowerProfile::default(), 1.0);
        assert_eq!(reduction_report(&ours, &base).unwrap(), 13.75);
        assert_eq!(reduction_report(&base, &base).unwrap(), 0.0);
    }

    #[test]
    fn phone_rows_and_reduction() {
        let profile = PowerProfile::default();
        // One reference hour of queries reproduces the table rows exactly.
        let n = profile.reference_query_rate as usize;
        assert_eq!(
            phone_energy(n, &profile, PhoneMode::Full, true).total_mwh,
            131.0
        );
        assert_eq!(
            phone_energy(n, &profile, PhoneMode::Patch, true).total_mwh,
            36.5
        );
        assert_eq!(
            phone_energy(0, &profile, PhoneMode::Patch, true).total_mwh,
            0.0
        );
        let ours = phone_energy(n, &profile, PhoneMode::Patch, true);
        let base = phone_energy(n, &profile, PhoneMode::Full, true);
        let red = reduction_report(&ours, &base).unwrap();
        assert!((red - 94.5 / 131.0 * 100.0).abs() < 1e-12);
        assert!((red - 72.1).abs() < 0.05);
    }

    #[test]
    fn totals_equal_component_sums() {
        let profile = PowerProfile::default();
        let report = device_energy(&usage(0.37), &profile, 2.5);
        let sum: f64 = report.components.values().sum();
        assert_eq!(report.total_mwh, sum);
    }

    #[test]
    fn zero_baseline_rejected() {
        let empty = EnergyReport::from_components(BTreeMap::new());
        let ours = device_baseline_energy(&PowerProfile::default(), 1.0);
        assert!(matches!(
            reduction_report(&ours, &empty),
            Err(EnergyError::ZeroBaseline)
        ));
    }
}
