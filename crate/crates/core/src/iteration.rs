//! Iterated ray maps of an oscillating Fabry-Perot cavity.
//!
//! An output ray `u` collects contributions from input rays `U_n = f_{2n}(u)`
//! and `V_n = f_{2n+1}(u)`, with
//!
//! ```text
//! f_{-1} = g,  f_0 = I,  f_{2n} = g⁻¹ ∘ f_{2n-1},  f_{2n+1} = h ∘ f_{2n}
//! ```
//!
//! where `h` and `g` are the scattering maps of mirror 1 (at `-L/2`) and
//! mirror 2 (at `+L/2`). For the homographic motions every `f_p` is again
//! homographic, `b_p/a_p = iβ_p` with `β_p = (-1)^K th(pα)`.

use std::f64::consts::PI;

use crate::error::{Error, Result};
use crate::homography::{i_pow, mirror_matrices, HomographicMap};
use crate::jet::Jet;
use crate::trajectory::{MirrorTrajectory, SinusoidalMotion};

/// Reporting boundary between the linear and nonlinear regimes, in `α_eff`.
pub const LINEAR_ALPHA_EFF: f64 = 0.1;

/// Relative slack in the threshold comparisons. `ρ` is recomputed from
/// `R₁R₂`, so an input placed exactly on a threshold lands a few ulps off it.
pub const THRESHOLD_REL_TOL: f64 = 1e-12;

fn at_or_above(x: f64, threshold: f64) -> bool {
    x >= threshold * (1.0 - THRESHOLD_REL_TOL)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CavityConfig {
    k: u32,
    omega: f64,
    r1: f64,
    r2: f64,
    alpha: f64,
    exchanged: bool,
}

impl CavityConfig {
    pub fn new(k: u32, omega: f64, r1: f64, r2: f64, alpha: f64) -> Result<Self> {
        if k == 0 {
            return Err(Error::InvalidInput("resonance order K must be >= 1".into()));
        }
        if !(omega > 0.0 && omega.is_finite()) {
            return Err(Error::InvalidInput(format!("Omega must be positive and finite, got {omega}")));
        }
        for (name, r) in [("R1", r1), ("R2", r2)] {
            if !(r > 0.0 && r <= 1.0) {
                return Err(Error::InvalidInput(format!("{name} must lie in (0, 1], got {r}")));
            }
        }
        if r1 * r2 >= 1.0 {
            return Err(Error::InvalidInput(
                "a cavity needs losses: R1 and R2 cannot both be 1".into(),
            ));
        }
        if !(alpha >= 0.0 && alpha.is_finite()) {
            return Err(Error::InvalidInput(format!("alpha must be finite and >= 0, got {alpha}")));
        }
        Ok(CavityConfig {
            k,
            omega,
            r1,
            r2,
            alpha,
            exchanged: false,
        })
    }

    /// Equal mirrors with round-trip amplitude `r = R`.
    pub fn symmetric(k: u32, omega: f64, r: f64, alpha: f64) -> Result<Self> {
        Self::new(k, omega, r, r, alpha)
    }

    /// Parametrized by `α_eff = 2α/ρ` instead of `α`.
    pub fn with_alpha_eff(k: u32, omega: f64, r1: f64, r2: f64, alpha_eff: f64) -> Result<Self> {
        let probe = Self::new(k, omega, r1, r2, 0.0)?;
        if !(alpha_eff >= 0.0 && alpha_eff.is_finite()) {
            return Err(Error::InvalidInput(format!("alpha_eff must be finite and >= 0, got {alpha_eff}")));
        }
        probe.with_alpha(0.5 * alpha_eff * probe.rho())
    }

    pub fn with_alpha(&self, alpha: f64) -> Result<Self> {
        let mut c = Self::new(self.k, self.omega, self.r1, self.r2, alpha)?;
        c.exchanged = self.exchanged;
        Ok(c)
    }

    /// The same cavity seen in the mirror `x ↦ -x`: left-going quantities of
    /// `self` are right-going quantities of the result.
    ///
    /// Reflection swaps the mirrors and turns the motion into the original
    /// one with `α ↦ (-1)^K α`, i.e. a half-period time shift for odd `K`.
    pub fn mirror_exchanged(&self) -> Self {
        CavityConfig {
            r1: self.r2,
            r2: self.r1,
            exchanged: !self.exchanged,
            ..*self
        }
    }

    pub fn k(&self) -> u32 {
        self.k
    }

    pub fn omega(&self) -> f64 {
        self.omega
    }

    pub fn r1(&self) -> f64 {
        self.r1
    }

    pub fn r2(&self) -> f64 {
        self.r2
    }

    pub fn t1(&self) -> f64 {
        1.0 - self.r1
    }

    pub fn t2(&self) -> f64 {
        1.0 - self.r2
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn is_exchanged(&self) -> bool {
        self.exchanged
    }

    /// Rapidity entering the maps: `-α` for an exchanged odd-`K` cavity.
    pub fn signed_alpha(&self) -> f64 {
        if self.exchanged && self.k % 2 == 1 {
            -self.alpha
        } else {
            self.alpha
        }
    }

    pub fn beta(&self) -> f64 {
        self.alpha.tanh()
    }

    /// Time of flight between the mirrors, `L = Kπ/Ω`.
    pub fn length(&self) -> f64 {
        self.k as f64 * PI / self.omega
    }

    pub fn period(&self) -> f64 {
        2.0 * PI / self.omega
    }

    /// Round-trip amplitude `r = √(R₁R₂)`.
    pub fn r(&self) -> f64 {
        (self.r1 * self.r2).sqrt()
    }

    /// Losses `ρ` with `r = e^{-2ρ}`.
    pub fn rho(&self) -> f64 {
        -0.25 * (self.r1 * self.r2).ln()
    }

    pub fn alpha_eff(&self) -> f64 {
        2.0 * self.alpha / self.rho()
    }

    pub fn beta_eff(&self) -> f64 {
        self.alpha_eff().tanh()
    }

    /// `(-1)^K`.
    pub fn parity(&self) -> f64 {
        if self.k.is_multiple_of(2) {
            1.0
        } else {
            -1.0
        }
    }

    /// `β_p = (-1)^K th(pα)`.
    pub fn beta_p(&self, p: i64) -> f64 {
        self.parity() * (p as f64 * self.signed_alpha()).tanh()
    }

    /// Rejects configurations whose energy density diverges (`α_eff ≥ 1`).
    pub fn check_density(&self) -> Result<()> {
        let alpha_eff = self.alpha_eff();
        if at_or_above(alpha_eff, 1.0) {
            return Err(Error::DensityDivergence {
                alpha_eff,
                beta_eff_cap: 1.0f64.tanh(),
            });
        }
        Ok(())
    }

    /// Rejects configurations whose radiated energy diverges (`α ≥ ρ`).
    pub fn check_energy(&self) -> Result<()> {
        let rho = self.rho();
        if at_or_above(self.alpha, rho) {
            return Err(Error::EnergyDivergence {
                alpha: self.alpha,
                rho,
            });
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ThresholdStatus {
    Linear,
    NonlinearBelowThreshold,
    DensityDivergent,
    EnergyDivergent,
}

impl ThresholdStatus {
    pub fn as_str(&self) -> &'static str {
        match self {
            ThresholdStatus::Linear => "linear",
            ThresholdStatus::NonlinearBelowThreshold => "nonlinear_below_threshold",
            ThresholdStatus::DensityDivergent => "density_divergent",
            ThresholdStatus::EnergyDivergent => "energy_divergent",
        }
    }
}

impl std::fmt::Display for ThresholdStatus {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

pub fn threshold_status(config: &CavityConfig) -> ThresholdStatus {
    let alpha_eff = config.alpha_eff();
    if at_or_above(config.alpha(), config.rho()) {
        ThresholdStatus::EnergyDivergent
    } else if at_or_above(alpha_eff, 1.0) {
        ThresholdStatus::DensityDivergent
    } else if alpha_eff < LINEAR_ALPHA_EFF {
        ThresholdStatus::Linear
    } else {
        ThresholdStatus::NonlinearBelowThreshold
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RayMode {
    ClosedForm,
    Composed,
}

#[derive(Debug, Clone)]
enum Source {
    Closed,
    Composed {
        mirror1: MirrorTrajectory,
        mirror2: MirrorTrajectory,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Stability {
    Attractive,
    Repulsive,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PeriodicOrbit {
    /// Orbit time in `[0, 2π/Ω)`.
    pub u: f64,
    pub stability: Stability,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PeriodicOrbits {
    pub orbits: Vec<PeriodicOrbit>,
    /// Set when `α = 0`: every ray is then periodic.
    pub degenerate: bool,
}

/// The family `f_p`, `p ≥ -1`, for one cavity.
#[derive(Debug, Clone)]
pub struct RayFamily {
    config: CavityConfig,
    source: Source,
}

impl RayFamily {
    pub fn closed_form(config: CavityConfig) -> Self {
        RayFamily {
            config,
            source: Source::Closed,
        }
    }

    /// Composition of arbitrary mirror motions (no homographic shortcut).
    pub fn composed(config: CavityConfig, mirror1: MirrorTrajectory, mirror2: MirrorTrajectory) -> Self {
        RayFamily {
            config,
            source: Source::Composed { mirror1, mirror2 },
        }
    }

    /// Composed family for purely sinusoidal mirrors.
    pub fn sinusoidal(config: CavityConfig) -> Result<Self> {
        let (k, a, w) = (config.k, config.signed_alpha(), config.omega);
        let mut m1 = SinusoidalMotion::cavity_mirror(k, a.abs(), 1, w)?;
        let mut m2 = SinusoidalMotion::cavity_mirror(k, a.abs(), 2, w)?;
        if a < 0.0 {
            m1.beta = -m1.beta;
            m2.beta = -m2.beta;
        }
        Ok(Self::composed(
            config,
            MirrorTrajectory::Sinusoidal(m1),
            MirrorTrajectory::Sinusoidal(m2),
        ))
    }

    pub fn config(&self) -> &CavityConfig {
        &self.config
    }

    pub fn mode(&self) -> RayMode {
        match self.source {
            Source::Closed => RayMode::ClosedForm,
            Source::Composed { .. } => RayMode::Composed,
        }
    }

    fn require_closed(&self) -> Result<()> {
        match self.source {
            Source::Closed => Ok(()),
            Source::Composed { .. } => Err(Error::InvalidInput(
                "operation requires a closed-form ray family".into(),
            )),
        }
    }

    /// `A_p`, with lift `-Kpπ/2` so that `f_p(u) = u - pL` at rest.
    pub fn closed_matrix(&self, p: i64) -> Result<HomographicMap> {
        self.require_closed()?;
        check_order(p)?;
        let c = &self.config;
        let k = c.k as i64;
        let pa = p as f64 * c.signed_alpha();
        HomographicMap::with_lift(
            i_pow(-k * p) * pa.cosh(),
            i_pow(2 * k + 1 - k * p) * pa.sinh(),
            c.omega,
            -(k * p) as f64 * PI / 2.0,
        )
    }

    /// `(f_p, f_p', Sf_p)` from the closed-form matrix.
    pub fn closed_f(&self, p: i64, u: f64) -> Result<Jet> {
        let map = self.closed_matrix(p)?;
        let d = self.closed_deriv(p, u);
        let w = self.config.omega;
        Ok(Jet {
            value: map.apply(u),
            deriv: d,
            schwarzian: 0.5 * w * w * (1.0 - d * d),
        })
    }

    /// Orbit phase `θ` with `(-1)^K sin θ = -1`, where `f_p' = e^{2pα}`.
    pub fn attractive_phase(&self) -> f64 {
        -self.config.parity() * PI / 2.0
    }

    /// `ln f_p'(u)`, accurate for any `pα`:
    /// `f_p' = 1/(e^x sin²(φ/2) + e^{-x} cos²(φ/2))`, `x = 2pα`, `φ = Ωu - θ_att`.
    pub fn ln_closed_deriv(&self, p: i64, u: f64) -> f64 {
        let x = 2.0 * p as f64 * self.config.signed_alpha();
        let half = 0.5 * (self.config.omega * u - self.attractive_phase());
        let (s, c) = half.sin_cos();
        -log_sum_exp((s * s).ln() + x, (c * c).ln() - x)
    }

    pub fn closed_deriv(&self, p: i64, u: f64) -> f64 {
        self.ln_closed_deriv(p, u).exp()
    }

    /// `f_p` by explicit composition with chain-rule jets.
    pub fn iterate_f(&self, p: i64, u: f64) -> Result<Jet> {
        check_order(p)?;
        let (m1, m2) = match &self.source {
            Source::Composed { mirror1, mirror2 } => (mirror1, mirror2),
            Source::Closed => {
                return Err(Error::InvalidInput(
                    "iterate_f requires a composed ray family".into(),
                ))
            }
        };
        if p == -1 {
            return m2.scatter_jet(u);
        }
        let mut jet = Jet::identity(u);
        for step in 0..p {
            let outer = if step % 2 == 0 {
                m1.scatter_jet(jet.value)?
            } else {
                m2.inverse_scatter_jet(jet.value)?
            };
            jet = jet.then(outer);
        }
        Ok(jet)
    }

    /// `f_p` in whichever representation the family holds.
    pub fn f(&self, p: i64, u: f64) -> Result<Jet> {
        match self.source {
            Source::Closed => self.closed_f(p, u),
            Source::Composed { .. } => self.iterate_f(p, u),
        }
    }

    pub fn periodic_orbits(&self) -> Result<PeriodicOrbits> {
        self.require_closed()?;
        if self.config.alpha == 0.0 {
            return Ok(PeriodicOrbits {
                orbits: Vec::new(),
                degenerate: true,
            });
        }
        let w = self.config.omega;
        let period = self.config.period();
        let theta = if self.config.signed_alpha() > 0.0 {
            self.attractive_phase()
        } else {
            self.attractive_phase() + PI
        };
        let wrap = |t: f64| (t / w).rem_euclid(period);
        Ok(PeriodicOrbits {
            orbits: vec![
                PeriodicOrbit {
                    u: wrap(theta),
                    stability: Stability::Attractive,
                },
                PeriodicOrbit {
                    u: wrap(theta + PI),
                    stability: Stability::Repulsive,
                },
            ],
            degenerate: false,
        })
    }
}

fn check_order(p: i64) -> Result<()> {
    if p < -1 {
        return Err(Error::InvalidInput(format!("ray order p must be >= -1, got {p}")));
    }
    Ok(())
}

/// `ln(e^a + e^b)` without overflow; `-∞` arguments are allowed.
pub fn log_sum_exp(a: f64, b: f64) -> f64 {
    let m = a.max(b);
    if m == f64::NEG_INFINITY {
        return m;
    }
    m + ((a - m).exp() + (b - m).exp()).ln()
}

/// Both mirror maps for the homographic motions fitted to the sinusoids.
pub fn cavity_mirror_maps(config: &CavityConfig) -> Result<(HomographicMap, HomographicMap)> {
    let a = config.signed_alpha();
    let (h, g) = mirror_matrices(config.k, a.abs(), config.omega)?;
    if a >= 0.0 {
        Ok((h, g))
    } else {
        let flip = |m: HomographicMap| HomographicMap::with_lift(m.a(), -m.b(), m.omega(), m.phase());
        Ok((flip(h)?, flip(g)?))
    }
}
