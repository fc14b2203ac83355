//! Run configuration for the batch driver.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Deserializer, Serialize};

use crate::bath::BathSpec;
use crate::error::{Error, Result};
use crate::spectroscopy::Apodization;

/// `k_B/ħ` in ps⁻¹ per kelvin.
pub const KELVIN_TO_INV_PS: f64 = 1.380_649e-23 / 1.054_571_817e-34 * 1e-12;

pub fn kelvin_to_inv_ps(kelvin: f64) -> f64 {
    kelvin * KELVIN_TO_INV_PS
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SystemConfig {
    pub epsilon: f64,
    pub omega_el: f64,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct BathInput {
    alpha: f64,
    omega_c: f64,
    temperature: Option<f64>,
    temperature_kelvin: Option<f64>,
}

fn bath_from_input<'de, D: Deserializer<'de>>(d: D) -> std::result::Result<BathSpec, D::Error> {
    use serde::de::Error as _;
    let raw = BathInput::deserialize(d)?;
    let t = match (raw.temperature, raw.temperature_kelvin) {
        (Some(t), None) => t,
        (None, Some(k)) => kelvin_to_inv_ps(k),
        _ => {
            return Err(D::Error::custom(
                "give exactly one of temperature, temperature_kelvin",
            ))
        }
    };
    BathSpec::new(raw.alpha, raw.omega_c, t).map_err(D::Error::custom)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Numerics {
    pub dt: f64,
    pub n_steps: usize,
    pub dkmax: usize,
    pub eps_rel: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Task {
    Linear,
    Spectrum2d,
    Correlation,
    PeakScan,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EngineKind {
    Pt,
    Wcme,
    Pme,
}

impl EngineKind {
    pub fn name(self) -> &'static str {
        match self {
            EngineKind::Pt => "pt",
            EngineKind::Wcme => "wcme",
            EngineKind::Pme => "pme",
        }
    }
}

impl std::str::FromStr for EngineKind {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "pt" => Ok(EngineKind::Pt),
            "wcme" => Ok(EngineKind::Wcme),
            "pme" => Ok(EngineKind::Pme),
            other => Err(Error::Config(format!("unknown engine {other:?}"))),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    Csv,
    Plt,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputConfig {
    pub directory: PathBuf,
    #[serde(default = "default_formats")]
    pub formats: Vec<Format>,
}

fn default_formats() -> Vec<Format> {
    vec![Format::Csv]
}

/// Sampling of the time axes used for spectra.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SpectrumConfig {
    /// Samples per time axis.
    pub points: usize,
    /// Engine steps between samples.
    #[serde(default = "one")]
    pub stride: usize,
    #[serde(default)]
    pub window: Apodization,
    #[serde(default = "default_prominence")]
    pub prominence: f64,
}

fn one() -> usize {
    1
}

fn default_prominence() -> f64 {
    crate::spectroscopy::DEFAULT_PROMINENCE
}

/// The `R₄` convergence study.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CorrelationConfig {
    /// Step of the coincident second and third pulses.
    pub t1_steps: usize,
    /// Truncation thresholds compared against the tightest one.
    #[serde(default)]
    pub eps_rel_values: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScanConfig {
    pub temperatures: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub system: SystemConfig,
    #[serde(deserialize_with = "bath_from_input")]
    pub bath: BathSpec,
    pub numerics: Numerics,
    pub task: Task,
    pub engines: Vec<EngineKind>,
    pub output: OutputConfig,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub spectrum: Option<SpectrumConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub correlation: Option<CorrelationConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub scan: Option<ScanConfig>,
}

fn positive(name: &str, v: f64) -> Result<()> {
    if v > 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(Error::Config(format!("{name} must be > 0, got {v}")))
    }
}

impl RunConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        let c: RunConfig = serde_json::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        c.validate()?;
        Ok(c)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Self::from_json(&text)
    }

    pub fn validate(&self) -> Result<()> {
        if !self.system.epsilon.is_finite() {
            return Err(Error::Config("epsilon must be finite".into()));
        }
        if !(self.system.omega_el >= 0.0 && self.system.omega_el.is_finite()) {
            return Err(Error::Config("omega_el must be >= 0".into()));
        }
        self.bath
            .validate()
            .map_err(|e| Error::Config(e.to_string()))?;
        positive("dt", self.numerics.dt)?;
        positive("eps_rel", self.numerics.eps_rel)?;
        if self.numerics.eps_rel >= 1.0 {
            return Err(Error::Config("eps_rel must be < 1".into()));
        }
        if self.numerics.n_steps == 0 || self.numerics.dkmax == 0 {
            return Err(Error::Config("n_steps and dkmax must be >= 1".into()));
        }
        if self.engines.is_empty() {
            return Err(Error::Config("select at least one engine".into()));
        }
        match self.task {
            Task::Linear | Task::Spectrum2d => {
                let s = self
                    .spectrum
                    .ok_or_else(|| Error::Config("spectra need a \"spectrum\" section".into()))?;
                if s.points < 2 || s.stride == 0 || s.window.pad_factor == 0 {
                    return Err(Error::Config(
                        "spectrum needs points >= 2, stride >= 1, pad_factor >= 1".into(),
                    ));
                }
                if !(0.0..1.0).contains(&s.prominence) {
                    return Err(Error::Config("prominence must lie in [0, 1)".into()));
                }
                let axes = if self.task == Task::Spectrum2d { 2 } else { 1 };
                let need = axes * (s.points - 1) * s.stride;
                if need > self.numerics.n_steps {
                    return Err(Error::Config(format!(
                        "the spectrum grid needs {need} steps but n_steps is {}",
                        self.numerics.n_steps
                    )));
                }
            }
            Task::Correlation => {
                let c = self.correlation.as_ref().ok_or_else(|| {
                    Error::Config("task correlation needs a \"correlation\" section".into())
                })?;
                if c.t1_steps > self.numerics.n_steps {
                    return Err(Error::Config("t1_steps exceeds n_steps".into()));
                }
                for &e in &c.eps_rel_values {
                    positive("eps_rel_values entry", e)?;
                }
            }
            Task::PeakScan => {
                let s = self.scan.as_ref().ok_or_else(|| {
                    Error::Config("task peak-scan needs a \"scan\" section".into())
                })?;
                if s.temperatures.len() < 2 {
                    return Err(Error::Config(
                        "peak-scan needs at least two temperatures".into(),
                    ));
                }
                for &t in &s.temperatures {
                    positive("scan temperature", t)?;
                }
                if self.spectrum.is_none() {
                    return Err(Error::Config(
                        "peak-scan needs a \"spectrum\" section".into(),
                    ));
                }
                if !(self.system.omega_el > 0.0) {
                    return Err(Error::Config("peak-scan needs omega_el > 0".into()));
                }
            }
        }
        Ok(())
    }
}
