//! Versioned run configuration, the JSON form of every command line.

use std::path::PathBuf;

use dce_core::iteration::CavityConfig;
use dce_core::quadrature::GridSpec;
use dce_core::radiation_cavity::{Denominators, SpectrumOptions};
use dce_core::radiation_single::SingleMirrorConfig;
use dce_core::specfun::SeriesControl;
use serde::{Deserialize, Serialize};

use crate::CliError;

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Command {
    EnergyDensity,
    Spectrum,
    Energy,
    Sweep,
    Verify,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    Csv,
    Json,
}

/// Cavity parameters as stored; `α` rather than `α_eff` so that the document
/// is canonical.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CavitySpec {
    pub k: u32,
    pub omega: f64,
    pub r1: f64,
    pub r2: f64,
    pub alpha: f64,
}

impl CavitySpec {
    pub fn build(&self) -> Result<CavityConfig, CliError> {
        Ok(CavityConfig::new(self.k, self.omega, self.r1, self.r2, self.alpha)?)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum Physics {
    Cavity(CavitySpec),
    Single(SingleMirrorConfig),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridConfig {
    pub points_per_period: usize,
    pub eps_sequence: Vec<f64>,
}

impl Default for GridConfig {
    fn default() -> Self {
        let g = GridSpec::default();
        GridConfig {
            points_per_period: g.points_per_period,
            eps_sequence: g.eps_sequence,
        }
    }
}

impl GridConfig {
    pub fn spec(&self) -> GridSpec {
        GridSpec {
            points_per_period: self.points_per_period,
            eps_sequence: self.eps_sequence.clone(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SeriesConfig {
    pub rel_tol: f64,
    pub max_terms: usize,
}

impl Default for SeriesConfig {
    fn default() -> Self {
        let s = SeriesControl::default();
        SeriesConfig {
            rel_tol: s.rel_tol,
            max_terms: s.max_terms,
        }
    }
}

impl SeriesConfig {
    pub fn control(&self) -> SeriesControl {
        SeriesControl {
            rel_tol: self.rel_tol,
            max_terms: self.max_terms,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DensityConfig {
    /// Samples over one period.
    pub points: usize,
    pub denominators: Denominators,
    /// Single mirror only: evaluate by point splitting instead of the
    /// Schwarzian closed form.
    pub point_split: bool,
}

impl Default for DensityConfig {
    fn default() -> Self {
        DensityConfig {
            points: 4096,
            denominators: Denominators::Static,
            point_split: false,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SpectrumConfig {
    pub nu_max: f64,
    pub points: usize,
    pub envelope: bool,
    pub harmonic_tol: f64,
}

impl Default for SpectrumConfig {
    fn default() -> Self {
        SpectrumConfig {
            nu_max: 3.0,
            points: 1000,
            envelope: false,
            harmonic_tol: SpectrumOptions::default().harmonic_tol,
        }
    }
}

/// Symmetric cavities on the product grid `K × ρ × α`, `K`-major.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepConfig {
    pub omega: f64,
    pub k: Vec<u32>,
    pub rho: Vec<f64>,
    pub alpha: SweepAlpha,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum SweepAlpha {
    /// Absolute rapidities.
    Values(Vec<f64>),
    /// Rapidities as fractions of `ρ`.
    OverRho(Vec<f64>),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct VerifyConfig {
    pub tolerance_scale: f64,
    pub filter: Vec<String>,
}

impl Default for VerifyConfig {
    fn default() -> Self {
        VerifyConfig {
            tolerance_scale: 1.0,
            filter: Vec::new(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub schema_version: u32,
    pub command: Command,
    pub physics: Option<Physics>,
    pub grid: GridConfig,
    pub series: SeriesConfig,
    pub density: DensityConfig,
    pub spectrum: SpectrumConfig,
    pub sweep: Option<SweepConfig>,
    pub verify: VerifyConfig,
    pub output: Option<PathBuf>,
    pub format: Format,
    /// Worker threads; `None` defers to `DCE_THREADS`, then to the core count.
    pub threads: Option<usize>,
}

impl RunConfig {
    pub fn new(command: Command) -> Self {
        RunConfig {
            schema_version: SCHEMA_VERSION,
            command,
            physics: None,
            grid: GridConfig::default(),
            series: SeriesConfig::default(),
            density: DensityConfig::default(),
            spectrum: SpectrumConfig::default(),
            sweep: None,
            verify: VerifyConfig::default(),
            output: None,
            format: if command == Command::Energy { Format::Json } else { Format::Csv },
            threads: None,
        }
    }

    pub fn from_json(text: &str) -> Result<Self, CliError> {
        let cfg: RunConfig = serde_json::from_str(text).map_err(|e| CliError::Usage(format!("invalid run config: {e}")))?;
        if cfg.schema_version != SCHEMA_VERSION {
            return Err(CliError::Usage(format!(
                "unsupported schema_version {} (expected {SCHEMA_VERSION})",
                cfg.schema_version
            )));
        }
        Ok(cfg)
    }

    /// Pretty JSON with a trailing newline.
    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("run config serializes");
        s.push('\n');
        s
    }

    pub fn physics(&self) -> Result<&Physics, CliError> {
        self.physics
            .as_ref()
            .ok_or_else(|| CliError::Usage("this command needs cavity or single-mirror parameters".into()))
    }

    pub fn spectrum_options(&self) -> SpectrumOptions {
        SpectrumOptions {
            series: self.series.control(),
            envelope: false,
            harmonic_tol: self.spectrum.harmonic_tol,
        }
    }
}
