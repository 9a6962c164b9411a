//! Run configuration: a TOML file plus `--set key=value` overrides.
//!
//! The file sections mirror the engine knobs:
//!
//! ```toml
//! [sampler]               # applied over the variant preset
//! window = 32
//! fps_min = 0.125
//! fps_max = 4.0
//! epsilon = 0.01
//! degenerate_policy = "min_rate"   # or "max_rate"
//! base_rate = 4.0
//!
//! [spatial]
//! margin_px = 20
//! [spatial.calibration]   # optional; default maps the whole thermal grid
//! scale_x = 29.875        # onto the whole RGB frame
//! scale_y = 30.0
//! offset_x = 0.0
//! offset_y = 0.0
//!
//! [eval]
//! min_frames = 4
//! bins = "default"        # or "head_tail"
//! t1_s = 60.0
//! t2_s = 162.0
//!
//! [energy]                # PowerProfile fields, mWh per reference hour
//! full_io = 131.0
//! ```
//!
//! `--set` keys are dotted paths (`spatial.margin_px=2`); bare keys go to the
//! sampler section (`fps_max=0.25`). In `gen`, bare keys override scenario
//! scalars (`noise_sigma=0`).

use std::path::Path;

use anyhow::{anyhow, bail, Context, Result};
use serde::Deserialize;

use thor_core::energy::PowerProfile;
use thor_core::pipeline::{BinMode, EvalConfig, SpatialConfig};
use thor_core::segments::{DEFAULT_T1_S, DEFAULT_T2_S};
use thor_core::spatial::Calibration;
use thor_core::temporal::{DegeneratePolicy, SamplerConfig};

#[derive(Debug, Default, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConfigFile {
    #[serde(default)]
    pub sampler: SamplerSection,
    #[serde(default)]
    pub spatial: SpatialSection,
    #[serde(default)]
    pub eval: EvalSection,
    #[serde(default)]
    pub energy: Option<PowerProfile>,
}

#[derive(Debug, Default, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SamplerSection {
    pub window: Option<usize>,
    pub fps_min: Option<f64>,
    pub fps_max: Option<f64>,
    pub epsilon: Option<f64>,
    pub degenerate_policy: Option<DegeneratePolicy>,
    pub base_rate: Option<f64>,
}

#[derive(Debug, Default, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SpatialSection {
    pub margin_px: Option<u32>,
    pub calibration: Option<Calibration>,
}

#[derive(Debug, Default, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EvalSection {
    pub min_frames: Option<usize>,
    pub bins: Option<String>,
    pub t1_s: Option<f64>,
    pub t2_s: Option<f64>,
}

impl ConfigFile {
    pub fn load(path: Option<&Path>) -> Result<Self> {
        match path {
            None => Ok(Self::default()),
            Some(p) => {
                let text = std::fs::read_to_string(p)
                    .with_context(|| format!("reading config {}", p.display()))?;
                toml::from_str(&text).with_context(|| format!("parsing config {}", p.display()))
            }
        }
    }

    /// Apply `--set` overrides. Unknown keys are usage errors.
    pub fn apply_overrides(&mut self, sets: &[String]) -> Result<()> {
        for set in sets {
            let (key, value) = set
                .split_once('=')
                .ok_or_else(|| anyhow!("--set needs key=value, got {set:?}"))?;
            let (key, value) = (key.trim(), value.trim());
            let parse_f64 = || -> Result<f64> {
                value.parse().map_err(|_| anyhow!("{key}: bad number {value:?}"))
            };
            let parse_usize = || -> Result<usize> {
                value.parse().map_err(|_| anyhow!("{key}: bad integer {value:?}"))
            };
            match key {
                "window" | "sampler.window" => self.sampler.window = Some(parse_usize()?),
                "fps_min" | "sampler.fps_min" => self.sampler.fps_min = Some(parse_f64()?),
                "fps_max" | "sampler.fps_max" => self.sampler.fps_max = Some(parse_f64()?),
                "epsilon" | "sampler.epsilon" => self.sampler.epsilon = Some(parse_f64()?),
                "base_rate" | "sampler.base_rate" => self.sampler.base_rate = Some(parse_f64()?),
                "degenerate_policy" | "sampler.degenerate_policy" => {
                    self.sampler.degenerate_policy = Some(match value {
                        "min_rate" => DegeneratePolicy::MinRate,
                        "max_rate" => DegeneratePolicy::MaxRate,
                        _ => bail!("{key}: expected min_rate or max_rate, got {value:?}"),
                    });
                }
                "spatial.margin_px" | "margin_px" => {
                    self.spatial.margin_px = Some(
                        value
                            .parse()
                            .map_err(|_| anyhow!("{key}: bad integer {value:?}"))?,
                    )
                }
                "eval.min_frames" => self.eval.min_frames = Some(parse_usize()?),
                "eval.bins" => self.eval.bins = Some(value.to_string()),
                "eval.t1_s" => self.eval.t1_s = Some(parse_f64()?),
                "eval.t2_s" => self.eval.t2_s = Some(parse_f64()?),
                _ if key.starts_with("energy.") => {
                    let profile = self.energy.get_or_insert_with(PowerProfile::default);
                    let v = parse_f64()?;
                    match &key["energy.".len()..] {
                        "thermal_only" => profile.thermal_only = v,
                        "rgb_only" => profile.rgb_only = v,
                        "rgb_thermal" => profile.rgb_thermal = v,
                        "rgb_network_stream" => profile.rgb_network_stream = v,
                        "rgb_thermal_model" => profile.rgb_thermal_model = v,
                        "patch_input" => profile.patch_input = v,
                        "patch_io" => profile.patch_io = v,
                        "full_input" => profile.full_input = v,
                        "full_io" => profile.full_io = v,
                        "reference_query_rate" => profile.reference_query_rate = v,
                        other => bail!("unknown energy field {other:?}"),
                    }
                }
                _ => bail!("unknown --set key {key:?}"),
            }
        }
        Ok(())
    }

    /// Final sampler config: preset (or defaults), then file, then --set.
    pub fn sampler_config(&self, base: SamplerConfig) -> SamplerConfig {
        let mut cfg = base;
        let s = &self.sampler;
        if let Some(v) = s.window {
            cfg.window = v;
        }
        if let Some(v) = s.fps_min {
            cfg.fps_min = v;
        }
        if let Some(v) = s.fps_max {
            cfg.fps_max = v;
        }
        if let Some(v) = s.epsilon {
            cfg.epsilon = v;
        }
        if let Some(v) = s.degenerate_policy {
            cfg.degenerate_policy = v;
        }
        if let Some(v) = s.base_rate {
            cfg.base_rate = v;
        }
        cfg
    }

    pub fn spatial_config(&self) -> SpatialConfig {
        let mut cfg = SpatialConfig::default();
        if let Some(v) = self.spatial.margin_px {
            cfg.margin_px = v;
        }
        cfg.calibration = self.spatial.calibration;
        cfg
    }

    pub fn eval_config(&self) -> Result<EvalConfig> {
        let mut cfg = EvalConfig {
            profile: self.energy.unwrap_or_default(),
            ..EvalConfig::default()
        };
        if let Some(v) = self.eval.min_frames {
            cfg.min_frames = v;
        }
        cfg.bin_mode = match self.eval.bins.as_deref() {
            None | Some("default") => {
                match (self.eval.t1_s, self.eval.t2_s) {
                    (None, None) => BinMode::Default,
                    (t1, t2) => BinMode::Explicit {
                        t1_s: t1.unwrap_or(DEFAULT_T1_S),
                        t2_s: t2.unwrap_or(DEFAULT_T2_S),
                    },
                }
            }
            Some("head_tail") => BinMode::HeadTail,
            Some(other) => bail!("eval.bins must be default or head_tail, got {other:?}"),
        };
        Ok(cfg)
    }
}
