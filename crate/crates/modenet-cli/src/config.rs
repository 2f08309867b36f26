//! TOML run configuration: schema-validated sections for the device, the
//! four drive tones, sweep and noise grids, design inputs, and fit setup.
//! Frequencies are in Hz and phases in degrees at this boundary; conversion
//! to radians happens when the sections are lowered into library types.

use serde::{Deserialize, Serialize};

use modenet::expansion::{DeviceModel, DriveTone};
use modenet::fit::{FreeParam, FreeParamSpec};

use crate::CliError;

#[derive(Debug, Clone, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub device: Option<DeviceSection>,
    pub drives: Option<Vec<DriveSection>>,
    pub sweep: Option<SweepSection>,
    pub design: Option<DesignSection>,
    pub noise: Option<NoiseSection>,
    pub reduce: Option<ReduceSection>,
    pub fit: Option<FitSection>,
    #[serde(default)]
    pub output: OutputSection,
}

#[derive(Debug, Clone, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct DeviceSection {
    pub cavity_freqs_hz: [f64; 2],
    pub cavity_linewidths_hz: [f64; 2],
    pub cavity_efficiencies: [f64; 2],
    pub mech_freqs_hz: [f64; 2],
    pub mech_linewidths_hz: [f64; 2],
    /// `vacuum_couplings_hz[cavity][mech]`.
    pub vacuum_couplings_hz: [[f64; 2]; 2],
    #[serde(default)]
    pub bath_occupations: [f64; 2],
}

#[derive(Debug, Clone, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct DriveSection {
    /// One-based cavity index.
    pub cavity: usize,
    /// One-based mechanical oscillator index.
    pub mech: usize,
    /// Absolute drive frequency; exactly one of this and `detuning_hz`.
    pub frequency_hz: Option<f64>,
    /// Offset from the exact red sideband of the pair.
    pub detuning_hz: Option<f64>,
    pub coupling_hz: f64,
    #[serde(default)]
    pub phase_deg: f64,
}

#[derive(Debug, Clone, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct SweepSection {
    pub offsets_hz: GridSpec,
    pub phases_deg: GridSpec,
    /// Port pairs as `[out, in]` mode labels.
    pub ports: Vec<[String; 2]>,
    #[serde(default = "default_depth")]
    pub depth: usize,
}

#[derive(Debug, Clone, Deserialize, Serialize)]
#[serde(untagged, deny_unknown_fields)]
pub enum GridSpec {
    List(Vec<f64>),
    Linspace {
        start: f64,
        stop: f64,
        points: usize,
    },
}

impl GridSpec {
    pub fn values(&self) -> Result<Vec<f64>, CliError> {
        match self {
            GridSpec::List(v) => {
                if v.is_empty() {
                    return Err(CliError::config("grid list must be nonempty"));
                }
                Ok(v.clone())
            }
            GridSpec::Linspace {
                start,
                stop,
                points,
            } => {
                if *points == 0 {
                    return Err(CliError::config("grid needs at least one point"));
                }
                if *points == 1 {
                    return Ok(vec![*start]);
                }
                let n = *points;
                Ok((0..n)
                    .map(|i| start + (stop - start) * i as f64 / (n - 1) as f64)
                    .collect())
            }
        }
    }
}

#[derive(Debug, Clone, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct DesignSection {
    pub c3: f64,
    pub c4: f64,
    #[serde(default = "one")]
    pub eta1: f64,
    #[serde(default = "one")]
    pub eta2: f64,
    pub gamma3_hz: f64,
    pub gamma4_hz: f64,
}

#[derive(Debug, Clone, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct NoiseSection {
    pub ports: Vec<String>,
    /// Overrides the device section's mechanical bath occupations.
    pub bath_occupations: Option<[f64; 2]>,
    /// Per-port amplifier chain; omit for device-referred quanta only.
    pub chain: Option<Vec<ChainEntry>>,
}

#[derive(Debug, Clone, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct ChainEntry {
    pub port: String,
    pub gain: f64,
    pub added_noise: f64,
}

#[derive(Debug, Clone, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct ReduceSection {
    #[serde(default = "default_depth")]
    pub depth: usize,
}

#[derive(Debug, Clone, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct FitSection {
    /// Scattering data CSV path, resolved relative to the config file.
    pub data: String,
    pub free: Vec<FreeParamSection>,
    /// Optional noise data CSV; fitted after the scattering stage with the
    /// scattering parameters held fixed.
    pub noise_data: Option<String>,
    #[serde(default)]
    pub fit_amplifier_noise: bool,
    #[serde(default = "default_depth")]
    pub depth: usize,
    #[serde(default)]
    pub restarts: usize,
}

#[derive(Debug, Clone, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct FreeParamSection {
    /// One of `drive_coupling`, `drive_detuning`, `drive_phase`,
    /// `cavity_linewidth`, `cavity_efficiency`, `mech_linewidth`.
    pub field: String,
    pub cavity: Option<usize>,
    pub mech: Option<usize>,
    pub initial: Option<f64>,
    pub min: f64,
    pub max: f64,
}

#[derive(Debug, Clone, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct OutputSection {
    #[serde(default = "default_format")]
    pub format: String,
    #[serde(default = "default_precision")]
    pub precision: usize,
}

impl Default for OutputSection {
    fn default() -> Self {
        OutputSection {
            format: default_format(),
            precision: default_precision(),
        }
    }
}

fn default_depth() -> usize {
    1
}
fn one() -> f64 {
    1.0
}
fn default_format() -> String {
    "csv".to_string()
}
fn default_precision() -> usize {
    9
}

impl RunConfig {
    pub fn parse(text: &str) -> Result<Self, CliError> {
        let config: RunConfig =
            toml::from_str(text).map_err(|e| CliError::config(format!("config: {e}")))?;
        if !matches!(config.output.format.as_str(), "csv" | "json") {
            return Err(CliError::config(format!(
                "output.format must be `csv` or `json`, got `{}`",
                config.output.format
            )));
        }
        Ok(config)
    }

    pub fn device(&self) -> Result<DeviceModel, CliError> {
        let d = self
            .device
            .as_ref()
            .ok_or_else(|| CliError::config("missing [device] section"))?;
        let device = DeviceModel {
            cavity_freq: d.cavity_freqs_hz,
            cavity_linewidth: d.cavity_linewidths_hz,
            cavity_efficiency: d.cavity_efficiencies,
            mech_freq: d.mech_freqs_hz,
            mech_linewidth: d.mech_linewidths_hz,
            vacuum_coupling: d.vacuum_couplings_hz,
            bath_occupation: d.bath_occupations,
        };
        device
            .validate()
            .map_err(|e| CliError::config(format!("device: {e}")))?;
        Ok(device)
    }

    pub fn drive_tones(&self, device: &DeviceModel) -> Result<[DriveTone; 4], CliError> {
        let sections = self
            .drives
            .as_ref()
            .ok_or_else(|| CliError::config("missing [[drives]] section"))?;
        if sections.len() != 4 {
            return Err(CliError::config(format!(
                "expected exactly four drive tones, got {}",
                sections.len()
            )));
        }
        let mut tones = Vec::with_capacity(4);
        for s in sections {
            if !(1..=2).contains(&s.cavity) || !(1..=2).contains(&s.mech) {
                return Err(CliError::config("drive cavity/mech indices must be 1 or 2"));
            }
            let (cavity, mech) = (s.cavity - 1, s.mech - 1);
            let frequency = match (s.frequency_hz, s.detuning_hz) {
                (Some(f), None) => f,
                (None, Some(d)) => device.red_sideband(cavity, mech) + d,
                (None, None) => device.red_sideband(cavity, mech),
                (Some(_), Some(_)) => {
                    return Err(CliError::config(
                        "give either frequency_hz or detuning_hz for a drive, not both",
                    ))
                }
            };
            tones.push(DriveTone {
                cavity,
                mech,
                frequency,
                coupling: s.coupling_hz,
                phase: s.phase_deg.to_radians(),
            });
        }
        Ok(tones.try_into().expect("length checked"))
    }

    pub fn free_params(&self, fit: &FitSection) -> Result<Vec<FreeParamSpec>, CliError> {
        let index = |v: Option<usize>, what: &str| -> Result<usize, CliError> {
            match v {
                Some(1) => Ok(0),
                Some(2) => Ok(1),
                _ => Err(CliError::config(format!(
                    "free parameter needs `{what}` equal to 1 or 2"
                ))),
            }
        };
        fit.free
            .iter()
            .map(|f| {
                let param = match f.field.as_str() {
                    "drive_coupling" => FreeParam::DriveCoupling {
                        cavity: index(f.cavity, "cavity")?,
                        mech: index(f.mech, "mech")?,
                    },
                    "drive_detuning" => FreeParam::DriveDetuning {
                        cavity: index(f.cavity, "cavity")?,
                        mech: index(f.mech, "mech")?,
                    },
                    "drive_phase" => FreeParam::DrivePhase {
                        cavity: index(f.cavity, "cavity")?,
                        mech: index(f.mech, "mech")?,
                    },
                    "cavity_linewidth" => FreeParam::CavityLinewidth {
                        cavity: index(f.cavity, "cavity")?,
                    },
                    "cavity_efficiency" => FreeParam::CavityEfficiency {
                        cavity: index(f.cavity, "cavity")?,
                    },
                    "mech_linewidth" => FreeParam::MechLinewidth {
                        mech: index(f.mech, "mech")?,
                    },
                    other => {
                        return Err(CliError::config(format!(
                            "unknown free parameter field `{other}`"
                        )))
                    }
                };
                if !(f.min <= f.max) {
                    return Err(CliError::config(format!(
                        "free parameter `{}` has empty bounds",
                        f.field
                    )));
                }
                Ok(FreeParamSpec {
                    param,
                    initial: f.initial,
                    bounds: (f.min, f.max),
                })
            })
            .collect()
    }
}
