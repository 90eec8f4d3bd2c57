//! Radiation from a single partially transmitting mirror.
//!
//! Energies are in units of `ħΩ`, energy densities in `ħΩ²`, times in `1/Ω`
//! only where stated.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::homography::HomographicMap;
use crate::quadrature::{integrate_period, GridSpec};
use crate::specfun::{hyper_g_sequence, sin_pi, SeriesControl};
use crate::trajectory::{MirrorTrajectory, SinusoidalMotion};

/// `∫ν n_ν dν / E_u` with `E_u` in `ħΩ`. Measured over `α ∈ {0.2, 0.5, 0.8}`,
/// equal to 1 within `5e-9`.
pub const SPECTRUM_ENERGY_RATIO: f64 = 1.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum SingleTrajectory {
    /// `sin(Ωq - φ_a) = -β sin(Ωt - φ_b)`, exactly homographic.
    #[default]
    Homographic,
    /// `Ωq = -β sin(Ωt - φ_b)`; densities only.
    Sinusoidal,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SingleMirrorConfig {
    /// Intensity reflectivity.
    pub reflectivity: f64,
    pub alpha: f64,
    pub omega: f64,
    #[serde(default)]
    pub trajectory: SingleTrajectory,
    #[serde(default)]
    pub phi_a: f64,
    #[serde(default)]
    pub phi_b: f64,
}

impl SingleMirrorConfig {
    pub fn new(reflectivity: f64, alpha: f64, omega: f64) -> Result<Self> {
        let cfg = SingleMirrorConfig {
            reflectivity,
            alpha,
            omega,
            trajectory: SingleTrajectory::Homographic,
            phi_a: 0.0,
            phi_b: 0.0,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.reflectivity > 0.0 && self.reflectivity <= 1.0) {
            return Err(Error::InvalidInput(format!(
                "reflectivity must lie in (0, 1], got {}",
                self.reflectivity
            )));
        }
        if !(self.alpha >= 0.0 && self.alpha.is_finite()) {
            return Err(Error::InvalidInput(format!("alpha must be finite and >= 0, got {}", self.alpha)));
        }
        if !(self.omega > 0.0 && self.omega.is_finite()) {
            return Err(Error::InvalidInput(format!("Omega must be positive and finite, got {}", self.omega)));
        }
        if !(self.phi_a.is_finite() && self.phi_b.is_finite()) {
            return Err(Error::InvalidInput("phases must be finite".into()));
        }
        if self.alpha.tanh() >= 1.0 {
            return Err(Error::Domain(format!("alpha = {} saturates beta = 1 in double precision", self.alpha)));
        }
        Ok(())
    }

    pub fn beta(&self) -> f64 {
        self.alpha.tanh()
    }

    /// The scattering map `v = V(u)`.
    pub fn map(&self) -> Result<HomographicMap> {
        HomographicMap::from_rapidity(self.alpha, self.phi_a, self.phi_b, self.omega)
    }

    pub fn mirror(&self) -> Result<MirrorTrajectory> {
        Ok(match self.trajectory {
            SingleTrajectory::Homographic => MirrorTrajectory::Homographic(self.map()?),
            SingleTrajectory::Sinusoidal => MirrorTrajectory::Sinusoidal(SinusoidalMotion {
                omega: self.omega,
                beta: self.beta(),
                mean_phase: 0.0,
                time_phase: self.phi_b,
            }),
        })
    }
}

/// `e_u(u) = -(R/24π)SV(u)`, in `ħΩ²`.
pub fn energy_density_single(cfg: &SingleMirrorConfig, u: f64) -> Result<f64> {
    cfg.validate()?;
    let w2 = cfg.omega * cfg.omega;
    match cfg.trajectory {
        SingleTrajectory::Homographic => {
            let d = cfg.map()?.derivative(u);
            Ok(cfg.reflectivity / (48.0 * PI) * (d - 1.0) * (d + 1.0))
        }
        SingleTrajectory::Sinusoidal => {
            let s = cfg.mirror()?.scatter_jet(u)?.schwarzian;
            Ok(-cfg.reflectivity / (24.0 * PI) * s / w2)
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SingleEnergy {
    /// `E_u = (R/12) sh²α`, in `ħΩ`.
    pub closed_form: f64,
    /// Period integral of the energy density on the default grid.
    pub quadrature: f64,
}

pub fn energy_per_period_single(cfg: &SingleMirrorConfig) -> Result<SingleEnergy> {
    energy_per_period_single_on(cfg, &GridSpec::default())
}

pub fn energy_per_period_single_on(cfg: &SingleMirrorConfig, grid: &GridSpec) -> Result<SingleEnergy> {
    cfg.validate()?;
    grid.validate()?;
    let closed_form = cfg.reflectivity * cfg.alpha.sinh().powi(2) / 12.0;
    let quadrature = match cfg.trajectory {
        SingleTrajectory::Homographic => {
            let map = cfg.map()?;
            let r = cfg.reflectivity;
            integrate_period(
                |u| {
                    let d = map.derivative(u);
                    r / (48.0 * PI) * (d - 1.0) * (d + 1.0)
                },
                cfg.omega,
                grid,
            )
        }
        SingleTrajectory::Sinusoidal => {
            let n = grid.points_per_period;
            let h = 2.0 * PI / cfg.omega / n as f64;
            let mut acc = 0.0;
            for j in 0..n {
                acc += energy_density_single(cfg, h * j as f64)?;
            }
            acc * h
        }
    } * cfg.omega;
    Ok(SingleEnergy { closed_form, quadrature })
}

/// Terms of the `m`-sum are generated in blocks of this size.
const M_BLOCK: usize = 64;
/// Consecutive negligible terms required before the `m`-sum is stopped.
const QUIET_TERMS: usize = 3;

/// `n_ν = R (sin²πν/π²) Σ_{m>ν} ν(m-ν) G_m(ν,β)²`.
pub fn spectrum_single(cfg: &SingleMirrorConfig, nu: f64, ctl: &SeriesControl) -> Result<f64> {
    cfg.validate()?;
    ctl.validate()?;
    if cfg.trajectory != SingleTrajectory::Homographic {
        return Err(Error::InvalidInput("spectra are available for the homographic trajectory only".into()));
    }
    if !(nu > 0.0 && nu.is_finite()) {
        return Err(Error::InvalidInput(format!("nu must be positive and finite, got {nu}")));
    }
    let s = sin_pi(nu);
    let beta = cfg.beta();
    if s == 0.0 || beta == 0.0 {
        return Ok(0.0);
    }
    let sum = arch_sum(nu, beta, ctl)?;
    Ok(cfg.reflectivity * s * s / (PI * PI) * sum)
}

/// `Σ_{m>ν} ν(m-ν) G_m(ν,β)²`.
fn arch_sum(nu: f64, beta: f64, ctl: &SeriesControl) -> Result<f64> {
    let mut m = nu.floor() as u32 + 1;
    let mut sum = 0.0;
    let mut quiet = 0;
    while (m as usize) < ctl.max_terms {
        let block = hyper_g_sequence(nu, beta, m, M_BLOCK, ctl)?;
        for (j, g) in block.iter().enumerate() {
            let term = nu * ((m as usize + j) as f64 - nu) * g * g;
            sum += term;
            if term <= ctl.rel_tol * sum {
                quiet += 1;
                if quiet >= QUIET_TERMS {
                    return Ok(sum);
                }
            } else {
                quiet = 0;
            }
        }
        m += M_BLOCK as u32;
    }
    Err(Error::Resource(format!(
        "spectrum series at nu = {nu}, beta = {beta} did not converge within {} terms",
        ctl.max_terms
    )))
}
