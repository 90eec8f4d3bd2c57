//! Radiation from an oscillating cavity: emitted energy density, radiated
//! and intracavity energies, and the photon spectrum.
//!
//! Energies are in units of `ħΩ`, energy densities in `ħΩ²`; spectra are
//! photon numbers per unit reduced frequency `ν = ω/Ω`.

use std::f64::consts::PI;
use std::sync::Arc;

use num_complex::Complex64;
use rayon::prelude::*;
use rustfft::{Fft, FftPlanner};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::homography::HomographicMap;
use crate::iteration::{threshold_status, CavityConfig, RayFamily, Stability, ThresholdStatus};
use crate::quadrature::integrate_period_cusp;
use crate::specfun::{hyper_g_sequence, hyper_g_weighted_sums, sin_pi, xi, zeta_u, zeta_v, SeriesControl};

/// Round trips are kept until the weight bound `(r e^{4α})^N` drops below this.
pub const ROUND_TRIP_TOL: f64 = 1e-10;
/// Largest round-trip cutoff accepted by the density evaluator.
pub const MAX_ROUND_TRIPS: usize = 1 << 22;
/// Dynamic denominators cost `O(N²)` per point and are limited to this `N`.
pub const MAX_DYNAMIC_ROUND_TRIPS: usize = 20_000;
/// `ρ` below which the high-finesse approximations are considered valid.
pub const HIGH_FINESSE_RHO: f64 = 0.05;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum Denominators {
    /// `f_p - f_q` replaced by the rest values `(q - p)L`.
    #[default]
    Static,
    /// Full `f_p - f_q`.
    Dynamic,
}

impl std::str::FromStr for Denominators {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "static" => Ok(Denominators::Static),
            "dynamic" => Ok(Denominators::Dynamic),
            _ => Err(Error::InvalidInput(format!("denominators must be static or dynamic, got {s}"))),
        }
    }
}

/// Smallest `N` with `(r e^{4α})^N < ROUND_TRIP_TOL`.
pub fn round_trip_cutoff(config: &CavityConfig) -> Result<usize> {
    config.check_density()?;
    let ln_q = config.r().ln() + 4.0 * config.alpha();
    let n = (ROUND_TRIP_TOL.ln() / ln_q).ceil().max(1.0);
    if n > MAX_ROUND_TRIPS as f64 {
        return Err(Error::Resource(format!(
            "{n} round trips needed to reach the tail bound (limit {MAX_ROUND_TRIPS})"
        )));
    }
    Ok(n as usize)
}

/// Evaluates the right-going energy density `e_u(u)` of one cavity.
#[derive(Clone)]
pub struct CavityDensity {
    family: RayFamily,
    denominators: Denominators,
    round_trips: usize,
    fft: Arc<dyn Fft<f64>>,
    ifft: Arc<dyn Fft<f64>>,
    kernel: Vec<Complex64>,
    maps: Vec<HomographicMap>,
}

impl std::fmt::Debug for CavityDensity {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("CavityDensity")
            .field("config", self.family.config())
            .field("denominators", &self.denominators)
            .field("round_trips", &self.round_trips)
            .finish_non_exhaustive()
    }
}

impl CavityDensity {
    pub fn new(config: CavityConfig, denominators: Denominators) -> Result<Self> {
        let n = round_trip_cutoff(&config)?;
        Self::with_round_trips(config, denominators, n)
    }

    pub fn with_round_trips(config: CavityConfig, denominators: Denominators, round_trips: usize) -> Result<Self> {
        config.check_density()?;
        let ln_q = config.r().ln() + 4.0 * config.alpha();
        if round_trips == 0 || round_trips as f64 * ln_q >= ROUND_TRIP_TOL.ln() {
            return Err(Error::Resource(format!(
                "N = {round_trips} round trips leave a weight tail above {ROUND_TRIP_TOL:e}"
            )));
        }
        if round_trips > MAX_ROUND_TRIPS {
            return Err(Error::Resource(format!("N = {round_trips} exceeds {MAX_ROUND_TRIPS}")));
        }
        if denominators == Denominators::Dynamic && round_trips > MAX_DYNAMIC_ROUND_TRIPS {
            return Err(Error::Resource(format!(
                "dynamic denominators support at most {MAX_DYNAMIC_ROUND_TRIPS} round trips, {round_trips} needed"
            )));
        }
        let family = RayFamily::closed_form(config);
        let size = (2 * round_trips).next_power_of_two();
        let mut planner = FftPlanner::new();
        let fft = planner.plan_fft_forward(size);
        let ifft = planner.plan_fft_inverse(size);
        let mut kernel = vec![Complex64::new(0.0, 0.0); size];
        for d in 1..round_trips {
            let k = 1.0 / (d as f64 * d as f64);
            kernel[d].re = k;
            kernel[size - d].re = k;
        }
        fft.process(&mut kernel);
        let maps = match denominators {
            Denominators::Static => Vec::new(),
            Denominators::Dynamic => (-1..=(2 * round_trips as i64 + 1))
                .map(|p| family.closed_matrix(p))
                .collect::<Result<_>>()?,
        };
        Ok(CavityDensity {
            family,
            denominators,
            round_trips,
            fft,
            ifft,
            kernel,
            maps,
        })
    }

    pub fn config(&self) -> &CavityConfig {
        self.family.config()
    }

    pub fn round_trips(&self) -> usize {
        self.round_trips
    }

    pub fn denominators(&self) -> Denominators {
        self.denominators
    }

    /// `e_u(u)` in `ħΩ²`.
    pub fn eval(&self, u: f64) -> f64 {
        let c = self.family.config();
        let n = self.round_trips;
        let w = c.omega();
        let half_w2 = 0.5 * w * w;
        let l = c.length();
        let (r1, t1, t2, r2) = (c.r1(), c.t1(), c.t2(), c.r2());
        let ln_r = c.r().ln();
        let half = 0.5 * (w * u - self.family.attractive_phase());
        let (sn, cs) = half.sin_cos();
        let (s2, c2) = (sn * sn, cs * cs);
        let two_alpha = 2.0 * c.signed_alpha();
        let weight = |k: usize, p: i64| -> f64 {
            let x = p as f64 * two_alpha;
            let base = k as f64 * ln_r;
            let (near, far, y) = if x >= 0.0 { (s2, c2, x) } else { (c2, s2, -x) };
            let den = near + far * (-2.0 * y).exp();
            if den > 0.0 {
                (base - y).exp() / den
            } else {
                (base + self.family.ln_closed_deriv(p, u)).exp()
            }
        };
        let mut we = Vec::with_capacity(n);
        let mut wo = Vec::with_capacity(n);
        for k in 0..n {
            we.push(weight(k, 2 * k as i64));
            wo.push(weight(k, 2 * k as i64 + 1));
        }
        let fm1 = self.family.closed_deriv(-1, u);
        let mut schw_e = 0.0;
        let mut schw_o = 0.0;
        for k in 0..n {
            let r2k = (2.0 * k as f64 * ln_r).exp();
            schw_e += r2k - we[k] * we[k];
            schw_o += r2k - wo[k] * wo[k];
        }
        let (direct, pairs_e, pairs_o) = match self.denominators {
            Denominators::Static => {
                let direct: f64 = wo
                    .iter()
                    .enumerate()
                    .map(|(k, x)| x / ((2 * k + 2) as f64 * l).powi(2))
                    .sum();
                let (pe, po) = self.static_pairs(&we, &wo);
                let s = 4.0 * l * l;
                (direct, pe / s, po / s)
            }
            Denominators::Dynamic => self.dynamic_sums(u, &we, &wo),
        };
        let total = r2 / 6.0 * half_w2 * (1.0 - fm1 * fm1) - 2.0 * t2 * c.r() * fm1 * direct
            + t2 * t2 * r1 / 6.0 * half_w2 * schw_o
            + t1 * t2 / 6.0 * half_w2 * schw_e
            + t1 * t2 * pairs_e
            + t2 * t2 * r1 * pairs_o;
        -total / (4.0 * PI * w * w)
    }

    /// `Σ_{n≠m} w_n w_m/(n-m)²` for both weight sequences with one complex FFT.
    fn static_pairs(&self, we: &[f64], wo: &[f64]) -> (f64, f64) {
        let size = self.kernel.len();
        let mut buf = vec![Complex64::new(0.0, 0.0); size];
        for (k, (e, o)) in we.iter().zip(wo).enumerate() {
            buf[k] = Complex64::new(*e, *o);
        }
        self.fft.process(&mut buf);
        for (x, k) in buf.iter_mut().zip(&self.kernel) {
            *x *= k;
        }
        self.ifft.process(&mut buf);
        let scale = 1.0 / size as f64;
        let mut pe = 0.0;
        let mut po = 0.0;
        for k in 0..we.len() {
            pe += we[k] * buf[k].re * scale;
            po += wo[k] * buf[k].im * scale;
        }
        (pe, po)
    }

    fn dynamic_sums(&self, u: f64, we: &[f64], wo: &[f64]) -> (f64, f64, f64) {
        let n = we.len();
        // maps[p + 1] = f_p
        let f: Vec<f64> = self.maps.iter().map(|m| m.apply(u)).collect();
        let fe: Vec<f64> = (0..n).map(|k| f[2 * k + 1]).collect();
        let fo: Vec<f64> = (0..n).map(|k| f[2 * k + 2]).collect();
        let fm1 = f[0];
        let direct: f64 = (0..n).map(|k| wo[k] / (fm1 - fo[k]).powi(2)).sum();
        let pairs = |w: &[f64], x: &[f64]| -> f64 {
            let mut s = 0.0;
            for a in 0..n {
                for b in (a + 1)..n {
                    s += w[a] * w[b] / (x[a] - x[b]).powi(2);
                }
            }
            2.0 * s
        };
        (direct, pairs(we, &fe), pairs(wo, &fo))
    }

    /// Phase `u` of the attractive periodic orbit, where the pulses sit.
    pub fn pulse_center(&self) -> f64 {
        self.family
            .periodic_orbits()
            .ok()
            .and_then(|o| o.orbits.into_iter().find(|x| x.stability == Stability::Attractive))
            .map(|o| o.u)
            .unwrap_or(0.0)
    }

    /// `∫ e_u du` over one period, in `ħΩ`.
    pub fn period_energy(&self, rel_tol: f64) -> Result<f64> {
        let w = self.config().omega();
        Ok(w * integrate_period_cusp(|u| Ok(self.eval(u)), w, self.pulse_center(), rel_tol)?)
    }
}

/// `e_u(u)` with the default round-trip cutoff, in `ħΩ²`.
pub fn energy_density_cavity(config: &CavityConfig, u: f64, denominators: Denominators) -> Result<f64> {
    Ok(CavityDensity::new(*config, denominators)?.eval(u))
}

/// Left-going density `e_v(v)`: the right-going density of the mirrored cavity.
pub fn energy_density_cavity_v(config: &CavityConfig, v: f64, denominators: Denominators) -> Result<f64> {
    energy_density_cavity(&config.mirror_exchanged(), v, denominators)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DensitySamples {
    /// `u` in units of the period `2π/Ω`, on `[0, 1)`.
    pub u_over_period: Vec<f64>,
    /// `e_u` in units of `ħΩ²`.
    pub e_u: Vec<f64>,
    pub round_trips: usize,
    pub denominators: Denominators,
    pub units: Units,
}

/// Uniform samples of `e_u` over one period, evaluated in parallel.
pub fn sample_density(config: &CavityConfig, points: usize, denominators: Denominators) -> Result<DensitySamples> {
    if points == 0 {
        return Err(Error::InvalidInput("at least one sample point is required".into()));
    }
    let eval = CavityDensity::new(*config, denominators)?;
    let period = config.period();
    let u_over_period: Vec<f64> = (0..points).map(|j| j as f64 / points as f64).collect();
    let e_u = u_over_period.par_iter().map(|x| eval.eval(x * period)).collect();
    Ok(DensitySamples {
        u_over_period,
        e_u,
        round_trips: eval.round_trips(),
        denominators,
        units: Units::density(),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Pulse {
    /// Peak position in units of the period.
    pub center: f64,
    /// Peak value in `ħΩ²`.
    pub peak: f64,
    /// Full width at half maximum, in units of the period.
    pub fwhm: f64,
}

/// Locates the highest pulse of `e_u` and measures its full width at half maximum.
pub fn pulse_shape(density: &CavityDensity, points: usize) -> Result<Pulse> {
    if points < 8 {
        return Err(Error::InvalidInput("pulse analysis needs at least 8 samples".into()));
    }
    let period = density.config().period();
    let at = |x: f64| density.eval(x * period);
    let xs: Vec<f64> = (0..points).map(|j| j as f64 / points as f64).collect();
    let ys: Vec<f64> = xs.par_iter().map(|&x| at(x)).collect();
    let (imax, _) = ys
        .iter()
        .enumerate()
        .max_by(|a, b| a.1.total_cmp(b.1))
        .ok_or_else(|| Error::InvalidInput("no samples".into()))?;
    let h = 1.0 / points as f64;
    let (mut center, mut peak) = golden_max(&at, xs[imax] - h, xs[imax] + h, 1e-10);
    let orbit = density.pulse_center() / period;
    let shift = (orbit - xs[imax] + 0.5).rem_euclid(1.0) - 0.5;
    if shift.abs() <= h {
        let on_orbit = at(xs[imax] + shift);
        if on_orbit >= peak {
            center = xs[imax] + shift;
            peak = on_orbit;
        }
    }
    let half = 0.5 * peak;
    let edge = |dir: f64| -> Result<f64> {
        let mut step = h.min(1e-3);
        let mut inner = center;
        let mut outer = center + dir * step;
        while at(outer) > half {
            inner = outer;
            step *= 2.0;
            outer = center + dir * step;
            if step > 0.5 {
                return Err(Error::Domain("pulse does not fall to half maximum within a period".into()));
            }
        }
        for _ in 0..52 {
            let mid = 0.5 * (inner + outer);
            if at(mid) > half {
                inner = mid;
            } else {
                outer = mid;
            }
        }
        Ok(0.5 * (inner + outer))
    };
    let right = edge(1.0)?;
    let left = edge(-1.0)?;
    Ok(Pulse {
        center: center.rem_euclid(1.0),
        peak,
        fwhm: right - left,
    })
}

fn golden_max<F: Fn(f64) -> f64>(f: &F, mut a: f64, mut b: f64, tol: f64) -> (f64, f64) {
    let g = 0.5 * (5f64.sqrt() - 1.0);
    let mut c = b - g * (b - a);
    let mut d = a + g * (b - a);
    let (mut fc, mut fd) = (f(c), f(d));
    while b - a > tol {
        if fc > fd {
            b = d;
            d = c;
            fd = fc;
            c = b - g * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + g * (b - a);
            fd = f(d);
        }
        if (b - a).abs() < 1e-15 {
            break;
        }
    }
    let x = 0.5 * (a + b);
    (x, f(x))
}

/// Symbolic unit attached to dimensionless outputs.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Units {
    pub energy: &'static str,
    pub density: &'static str,
    pub time: &'static str,
}

impl Units {
    fn density() -> Self {
        Units {
            energy: "hbar*Omega",
            density: "hbar*Omega^2",
            time: "2*pi/Omega",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct ApproxFlags {
    /// `ρ < HIGH_FINESSE_RHO`.
    pub high_finesse: bool,
    /// `α ≤ ρ/2`.
    pub below_half_threshold: bool,
}

impl ApproxFlags {
    pub fn valid(&self) -> bool {
        self.high_finesse && self.below_half_threshold
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ApproxEnergies {
    pub e: f64,
    pub intracavity: f64,
    /// Part of `e` carried by light that has entered the cavity.
    pub e_cavity_term: f64,
    pub flags: ApproxFlags,
}

/// High-finesse forms `E ≈ α²/6 + (1-1/K²)ρα²/(6(ρ²-α²))` and
/// `ℰ ≈ (K-1/K)α²/(24(ρ²-α²))`.
pub fn approx_energies(config: &CavityConfig) -> ApproxEnergies {
    let (a, rho, k) = (config.alpha(), config.rho(), config.k() as f64);
    let d = rho * rho - a * a;
    let e_cavity_term = (1.0 - 1.0 / (k * k)) * rho * a * a / (6.0 * d);
    ApproxEnergies {
        e: a * a / 6.0 + e_cavity_term,
        intracavity: (k - 1.0 / k) * a * a / (24.0 * d),
        e_cavity_term,
        flags: ApproxFlags {
            high_finesse: rho < HIGH_FINESSE_RHO,
            below_half_threshold: a <= 0.5 * rho,
        },
    }
}

/// Energy radiated to the right per period, in `ħΩ`.
pub fn radiated_energy_u(config: &CavityConfig, ctl: &SeriesControl) -> Result<f64> {
    config.check_energy()?;
    let a = config.alpha();
    if a == 0.0 {
        return Ok(0.0);
    }
    let k = config.k() as f64;
    let (zp, zm) = (zeta_u(a, config)?, zeta_u(-a, config)?);
    let (xp, xm) = (xi(a, config, ctl)?, xi(-a, config, ctl)?);
    let t2 = config.t2();
    Ok(config.r2() / 12.0 * a.sinh().powi(2) + t2 / 48.0 * (zp + zm - 2.0)
        - t2 / (8.0 * PI * PI * k * k) * (xp * (zp - (-2.0 * a).exp()) + xm * (zm - (2.0 * a).exp())))
}

/// Motional intracavity energy, in `ħΩ`.
pub fn intracavity_energy(config: &CavityConfig, ctl: &SeriesControl) -> Result<f64> {
    config.check_energy()?;
    let a = config.alpha();
    if a == 0.0 {
        return Ok(0.0);
    }
    let k = config.k() as f64;
    let zeta = |x: f64| -> Result<f64> { Ok(0.5 * (zeta_u(x, config)? + zeta_v(x, config)?)) };
    let (zp, zm) = (zeta(a)?, zeta(-a)?);
    let (xp, xm, x0) = (xi(a, config, ctl)?, xi(-a, config, ctl)?, xi(0.0, config, ctl)?);
    Ok(k / 48.0 * (zp + zm - 2.0) - (xp * zp + xm * zm - 2.0 * x0) / (8.0 * PI * PI * k))
}

/// `ℰ / (E_cav · (Ω/2π)(2L/4ρ))`, with `E_cav` the radiated energy minus the
/// direct reflections `(R₁ + R₂) sh²α / 12`.
pub fn balance_check(config: &CavityConfig, ctl: &SeriesControl) -> Result<f64> {
    let e = radiated_energy_u(config, ctl)? + radiated_energy_u(&config.mirror_exchanged(), ctl)?;
    let direct = (config.r1() + config.r2()) * config.alpha().sinh().powi(2) / 12.0;
    let factor = config.k() as f64 / (4.0 * config.rho());
    Ok(intracavity_energy(config, ctl)? / ((e - direct) * factor))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EnergyReport {
    pub e_u: f64,
    pub e_v: f64,
    pub e_total: f64,
    pub e_intracavity: f64,
    pub approx_e: f64,
    pub approx_intracavity: f64,
    pub approx_flags: ApproxFlags,
    pub balance_ratio: f64,
    pub threshold_status: &'static str,
    pub units: &'static str,
}

pub fn radiated_energy(config: &CavityConfig, ctl: &SeriesControl) -> Result<EnergyReport> {
    ctl.validate()?;
    let e_u = radiated_energy_u(config, ctl)?;
    let e_v = radiated_energy_u(&config.mirror_exchanged(), ctl)?;
    let e_intracavity = intracavity_energy(config, ctl)?;
    let approx = approx_energies(config);
    let balance_ratio = if config.alpha() == 0.0 {
        f64::NAN
    } else {
        balance_check(config, ctl)?
    };
    Ok(EnergyReport {
        e_u,
        e_v,
        e_total: e_u + e_v,
        e_intracavity,
        approx_e: approx.e,
        approx_intracavity: approx.intracavity,
        approx_flags: approx.flags,
        balance_ratio,
        threshold_status: threshold_status(config).as_str(),
        units: "hbar*Omega",
    })
}

impl EnergyReport {
    pub fn status(&self) -> ThresholdStatus {
        match self.threshold_status {
            "linear" => ThresholdStatus::Linear,
            "nonlinear_below_threshold" => ThresholdStatus::NonlinearBelowThreshold,
            "density_divergent" => ThresholdStatus::DensityDivergent,
            _ => ThresholdStatus::EnergyDivergent,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SpectrumOptions {
    pub series: SeriesControl,
    /// Drop the round-trip phase factors (`K = 0`).
    pub envelope: bool,
    /// Relative size of the neglected tail of the harmonic (`m`) sum.
    pub harmonic_tol: f64,
}

impl Default for SpectrumOptions {
    fn default() -> Self {
        SpectrumOptions {
            series: SeriesControl::default(),
            envelope: false,
            harmonic_tol: 1e-6,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SpectrumPoint {
    pub n_nu: f64,
    /// Last harmonic included.
    pub m_max: u32,
    /// Round trips included.
    pub round_trips: usize,
    /// Estimated contribution of harmonics above `m_max`.
    pub tail_estimate: f64,
}

/// Harmonics are kept while `|β_p|^{m-m₀}` exceeds this.
const HARMONIC_CUTOFF: f64 = 1e-12;
/// First and largest number of harmonics tried by `spectrum_cavity`.
const MIN_HARMONICS: usize = 32;
pub const MAX_HARMONICS: usize = 8192;

/// Photon spectrum radiated to the right by the cavity.
///
/// Near resonances the harmonic terms fall only like `m^{-1-2/α_eff}`, so the
/// number of harmonics is doubled until the estimated tail
/// `T_M·M·α_eff/2` is below `harmonic_tol` of the sum.
pub fn spectrum_cavity(config: &CavityConfig, nu: f64, opts: &SpectrumOptions) -> Result<SpectrumPoint> {
    opts.series.validate()?;
    config.check_density()?;
    if !(nu > 0.0 && nu.is_finite()) {
        return Err(Error::InvalidInput(format!("nu must be positive and finite, got {nu}")));
    }
    if !(opts.harmonic_tol > 0.0 && opts.harmonic_tol < 1.0) {
        return Err(Error::InvalidInput("harmonic tolerance must lie in (0, 1)".into()));
    }
    let r = config.r();
    let round_trips = (ROUND_TRIP_TOL.ln() / r.ln()).ceil() as usize;
    let m_first = nu.floor() as u32 + 1;
    if sin_pi(nu) == 0.0 || config.alpha() == 0.0 {
        return Ok(SpectrumPoint {
            n_nu: 0.0,
            m_max: m_first,
            round_trips,
            tail_estimate: 0.0,
        });
    }
    let k = if opts.envelope { 0.0 } else { config.k() as f64 };
    let phase = |j: f64| Complex64::from_polar(1.0, -2.0 * PI * (k * nu * j).rem_euclid(1.0));
    let mut odd_lanes = Vec::with_capacity(round_trips);
    let mut even_lanes = Vec::with_capacity(round_trips);
    for n in 0..round_trips {
        let rn = r.powi(n as i32);
        odd_lanes.push((config.beta_p(2 * n as i64 + 1), rn * phase(n as f64 + 1.0)));
        even_lanes.push((config.beta_p(2 * n as i64), rn * phase(n as f64)));
    }
    let mut m_count = MIN_HARMONICS;
    loop {
        let point = harmonic_sum(config, nu, m_first, m_count, round_trips, &odd_lanes, &even_lanes, opts)?;
        if point.tail_estimate <= opts.harmonic_tol * point.n_nu {
            return Ok(point);
        }
        if m_count >= MAX_HARMONICS {
            return Err(Error::Resource(format!(
                "harmonic sum at nu = {nu} not converged with {MAX_HARMONICS} terms (tail {:e} of {:e})",
                point.tail_estimate, point.n_nu
            )));
        }
        m_count *= 2;
    }
}

#[allow(clippy::too_many_arguments)]
fn harmonic_sum(
    config: &CavityConfig,
    nu: f64,
    m_first: u32,
    m_count: usize,
    round_trips: usize,
    odd_lanes: &[(f64, Complex64)],
    even_lanes: &[(f64, Complex64)],
    opts: &SpectrumOptions,
) -> Result<SpectrumPoint> {
    let ctl = &opts.series;
    let odd = hyper_g_weighted_sums(nu, m_first, m_count, odd_lanes, HARMONIC_CUTOFF, ctl)?;
    let even = hyper_g_weighted_sums(nu, m_first, m_count, even_lanes, HARMONIC_CUTOFF, ctl)?;
    let direct = hyper_g_sequence(nu, config.beta_p(-1), m_first, m_count, ctl)?;
    let (a_odd, a_dir, a_even) = (config.r1().sqrt() * config.t2(), config.r2().sqrt(), config.t1() * config.t2());
    let mut sum = 0.0;
    let mut last = 0.0;
    for j in 0..m_count {
        let m = (m_first as usize + j) as f64;
        let term = nu * (m - nu) * ((a_odd * odd[j] - a_dir * direct[j]).norm_sqr() + a_even * even[j].norm_sqr());
        sum += term;
        last = term;
    }
    let s = sin_pi(nu);
    let pref = s * s / (PI * PI);
    let m_max = m_first + m_count as u32 - 1;
    Ok(SpectrumPoint {
        n_nu: pref * sum,
        m_max,
        round_trips,
        tail_estimate: pref * last * m_max as f64 * 0.5 * config.alpha_eff(),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SpectrumSamples {
    pub nu: Vec<f64>,
    pub n_nu: Vec<f64>,
    /// `K = 0` envelope, when requested.
    pub n_nu_envelope: Option<Vec<f64>>,
    pub round_trips: usize,
    pub m_max: u32,
    /// Largest per-point tail estimate.
    pub tail_bound: f64,
}

/// `n_ν` on `ν_j = j·nu_max/points`, `j = 1..=points`, evaluated in parallel.
pub fn sample_spectrum(
    config: &CavityConfig,
    nu_max: f64,
    points: usize,
    opts: &SpectrumOptions,
    with_envelope: bool,
) -> Result<SpectrumSamples> {
    if points == 0 || !(nu_max > 0.0 && nu_max.is_finite()) {
        return Err(Error::InvalidInput("spectrum grid needs points > 0 and a finite nu_max > 0".into()));
    }
    let nu: Vec<f64> = (1..=points).map(|j| nu_max * j as f64 / points as f64).collect();
    let env_opts = SpectrumOptions { envelope: true, ..*opts };
    let rows: Vec<(SpectrumPoint, Option<f64>)> = nu
        .par_iter()
        .map(|&x| -> Result<_> {
            let p = spectrum_cavity(config, x, opts)?;
            let e = if with_envelope {
                Some(spectrum_cavity(config, x, &env_opts)?.n_nu)
            } else {
                None
            };
            Ok((p, e))
        })
        .collect::<Result<_>>()?;
    Ok(SpectrumSamples {
        n_nu: rows.iter().map(|r| r.0.n_nu).collect(),
        n_nu_envelope: with_envelope.then(|| rows.iter().map(|r| r.1.unwrap_or(0.0)).collect()),
        round_trips: rows.first().map(|r| r.0.round_trips).unwrap_or(0),
        m_max: rows.iter().map(|r| r.0.m_max).max().unwrap_or(0),
        tail_bound: rows.iter().map(|r| r.0.tail_estimate).fold(0.0, f64::max),
        nu,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SpectralPeak {
    pub nu: f64,
    pub value: f64,
    /// Half width at half maximum, in `ν`.
    pub half_width: f64,
}

/// Interior local maxima of a sampled spectrum, refined on the continuous
/// spectrum, with their half widths at half maximum.
///
/// Only maxima reaching `min_relative` of the largest sample are refined.
pub fn spectral_peaks(
    config: &CavityConfig,
    samples: &SpectrumSamples,
    opts: &SpectrumOptions,
    min_relative: f64,
) -> Result<Vec<SpectralPeak>> {
    let f = |x: f64| spectrum_cavity(config, x, opts).map(|p| p.n_nu).unwrap_or(f64::NAN);
    let (xs, ys) = (&samples.nu, &samples.n_nu);
    let step = if xs.len() > 1 { xs[1] - xs[0] } else { return Ok(Vec::new()) };
    let floor = min_relative * ys.iter().cloned().fold(0.0, f64::max);
    let idx: Vec<usize> = (1..ys.len().saturating_sub(1))
        .filter(|&j| ys[j] > ys[j - 1] && ys[j] >= ys[j + 1] && ys[j] >= floor)
        .collect();
    idx.par_iter()
        .map(|&j| {
            let (center, value) = golden_max(&f, xs[j] - step, xs[j] + step, 1e-8);
            let half = 0.5 * value;
            let edge = |dir: f64| -> f64 {
                let mut inner = center;
                let mut outer = center + dir * step;
                let mut w = step;
                while f(outer) > half && w < 0.5 {
                    inner = outer;
                    w *= 2.0;
                    outer = center + dir * w;
                }
                for _ in 0..26 {
                    let mid = 0.5 * (inner + outer);
                    if f(mid) > half {
                        inner = mid;
                    } else {
                        outer = mid;
                    }
                }
                0.5 * (inner + outer)
            };
            Ok(SpectralPeak {
                nu: center,
                value,
                half_width: 0.5 * (edge(1.0) - edge(-1.0)),
            })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ctl() -> SeriesControl {
        SeriesControl::default()
    }

    #[test]
    fn cutoff_follows_the_weight_bound() {
        let c = CavityConfig::with_alpha_eff(2, 1.0, 0.99, 0.99, 0.5).unwrap();
        let n = round_trip_cutoff(&c).unwrap();
        let q = c.r() * (4.0 * c.alpha()).exp();
        assert!(q.powi(n as i32) < ROUND_TRIP_TOL && q.powi(n as i32 - 1) >= ROUND_TRIP_TOL);
        assert!(matches!(
            CavityDensity::with_round_trips(c, Denominators::Static, n / 2),
            Err(Error::Resource(_))
        ));
    }

    #[test]
    fn at_rest_density_vanishes() {
        for k in 1..=3 {
            for &(r1, r2) in &[(0.99, 0.99), (0.5, 0.9)] {
                let c = CavityConfig::new(k, 1.3, r1, r2, 0.0).unwrap();
                let d = CavityDensity::new(c, Denominators::Static).unwrap();
                for j in 0..64 {
                    let u = c.period() * j as f64 / 64.0;
                    assert!(d.eval(u).abs() < 1e-12, "K={k} u={u} e={}", d.eval(u));
                }
            }
        }
    }

    #[test]
    fn fft_pairs_match_direct_sums() {
        let c = CavityConfig::with_alpha_eff(3, 1.0, 0.9, 0.8, 0.6).unwrap();
        let d = CavityDensity::new(c, Denominators::Static).unwrap();
        let n = d.round_trips();
        let we: Vec<f64> = (0..n).map(|k| 0.97f64.powi(k as i32) * (1.0 + 0.1 * (k as f64).sin())).collect();
        let wo: Vec<f64> = (0..n).map(|k| 0.95f64.powi(k as i32)).collect();
        let direct = |w: &[f64]| {
            let mut s = 0.0;
            for a in 0..n {
                for b in 0..n {
                    if a != b {
                        s += w[a] * w[b] / ((a as f64 - b as f64).powi(2));
                    }
                }
            }
            s
        };
        let (pe, po) = d.static_pairs(&we, &wo);
        assert!((pe / direct(&we) - 1.0).abs() < 1e-12);
        assert!((po / direct(&wo) - 1.0).abs() < 1e-12);
    }

    #[test]
    fn period_integral_matches_closed_form() {
        for k in 1..=3 {
            for &rho in &[0.05f64, 0.005] {
                let r = (-2.0 * rho).exp();
                for &frac in &[0.2, 0.45] {
                    let c = CavityConfig::symmetric(k, 1.0, r, frac * rho).unwrap();
                    let d = CavityDensity::new(c, Denominators::Static).unwrap();
                    let numeric = d.period_energy(1e-9).unwrap();
                    let closed = radiated_energy_u(&c, &ctl()).unwrap();
                    assert!((numeric / closed - 1.0).abs() < 1e-6, "K={k} rho={rho} frac={frac}: {numeric} vs {closed}");
                }
            }
        }
    }

    #[test]
    fn asymmetric_cavity_integral_matches_both_directions() {
        let c = CavityConfig::new(3, 1.0, 0.95, 0.8, 0.0).unwrap();
        let c = c.with_alpha(0.4 * c.rho()).unwrap();
        for cfg in [c, c.mirror_exchanged()] {
            let d = CavityDensity::new(cfg, Denominators::Static).unwrap();
            let numeric = d.period_energy(1e-9).unwrap();
            let closed = radiated_energy_u(&cfg, &ctl()).unwrap();
            assert!((numeric / closed - 1.0).abs() < 1e-6, "{numeric} vs {closed}");
        }
    }

    #[test]
    fn dynamic_denominators_agree_at_small_velocity() {
        let c = CavityConfig::with_alpha_eff(2, 1.0, 0.9, 0.9, 0.5).unwrap();
        let s = CavityDensity::new(c, Denominators::Static).unwrap();
        let d = CavityDensity::new(c, Denominators::Dynamic).unwrap();
        let scale = (0..64).map(|j| s.eval(c.period() * j as f64 / 64.0).abs()).fold(0.0, f64::max);
        for j in 0..64 {
            let u = c.period() * j as f64 / 64.0;
            assert!((s.eval(u) - d.eval(u)).abs() < 1e-2 * scale);
        }
    }

    #[test]
    fn symmetric_cavity_radiates_equally_both_ways() {
        for k in 1..=3 {
            let c = CavityConfig::symmetric(k, 1.0, 0.98, 0.004).unwrap();
            let rep = radiated_energy(&c, &ctl()).unwrap();
            assert!((rep.e_u - rep.e_v).abs() <= 1e-12 * rep.e_u);
            assert_eq!(rep.e_total, rep.e_u + rep.e_v);
        }
    }

    #[test]
    fn left_density_is_the_mirrored_right_density() {
        let c = CavityConfig::new(3, 1.0, 0.97, 0.9, 0.006).unwrap();
        let x = c.mirror_exchanged();
        let u = CavityDensity::new(c, Denominators::Static).unwrap();
        let v = CavityDensity::new(x, Denominators::Static).unwrap();
        for j in 0..16 {
            let t = 0.4 * j as f64;
            assert_eq!(energy_density_cavity_v(&c, t, Denominators::Static).unwrap(), v.eval(t));
        }
        let ev = v.period_energy(1e-10).unwrap();
        assert!((ev / radiated_energy_u(&x, &ctl()).unwrap() - 1.0).abs() < 1e-6);
        assert!((ev / u.period_energy(1e-10).unwrap() - 1.0).abs() > 1e-3);
    }

    #[test]
    fn energies_vanish_at_rest_and_stay_positive() {
        let c = CavityConfig::symmetric(2, 1.0, 0.99, 0.0).unwrap();
        let rep = radiated_energy(&c, &ctl()).unwrap();
        assert_eq!((rep.e_u, rep.e_v, rep.e_intracavity), (0.0, 0.0, 0.0));
        for k in 1..=4 {
            for &(r1, r2) in &[(0.99, 0.99), (0.5, 0.99), (0.9, 0.3)] {
                let base = CavityConfig::new(k, 1.0, r1, r2, 0.0).unwrap();
                for j in 1..20 {
                    let c = base.with_alpha(base.rho() * j as f64 / 20.0).unwrap();
                    let rep = radiated_energy(&c, &ctl()).unwrap();
                    assert!(rep.e_u >= 0.0 && rep.e_v >= 0.0 && rep.e_intracavity >= 0.0, "{rep:?}");
                }
            }
        }
    }

    #[test]
    fn energies_follow_high_finesse_forms() {
        let c = CavityConfig::symmetric(3, 1.0, (-0.01f64).exp(), 0.002).unwrap();
        let rep = radiated_energy(&c, &ctl()).unwrap();
        assert!((rep.e_total / rep.approx_e - 1.0).abs() < 0.01);
        assert!((rep.e_intracavity / rep.approx_intracavity - 1.0).abs() < 0.01);
        assert!((rep.balance_ratio - 1.0).abs() < 0.05);
    }

    #[test]
    fn approximation_identities() {
        let c = CavityConfig::symmetric(1, 1.0, 0.99, 0.001).unwrap();
        let a = approx_energies(&c);
        assert_eq!(a.e, c.alpha().powi(2) / 6.0);
        assert_eq!(a.intracavity, 0.0);
        for k in 2..=5 {
            let c = CavityConfig::symmetric(k, 1.0, 0.99, 0.001).unwrap();
            let a = approx_energies(&c);
            let balanced = k as f64 / (4.0 * c.rho()) * a.e_cavity_term;
            assert!((balanced / a.intracavity - 1.0).abs() < 1e-14);
        }
        let c = CavityConfig::symmetric(2, 1.0, 0.99, 0.004).unwrap();
        assert!(!approx_energies(&c).flags.below_half_threshold);
        // monotone in ρ down to the threshold ρ = 2α
        let alpha = 1e-3;
        let mut prev = 0.0;
        for j in (0..40).rev() {
            let rho = 2.0 * alpha * (1.0 + 0.1 * j as f64);
            let c = CavityConfig::symmetric(3, 1.0, (-2.0 * rho).exp(), alpha).unwrap();
            let e = approx_energies(&c).e;
            assert!(e > prev);
            prev = e;
        }
    }

    #[test]
    fn guards_have_distinct_identities() {
        let c = CavityConfig::with_alpha_eff(2, 1.0, 0.99, 0.99, 1.0).unwrap();
        let e = CavityDensity::new(c, Denominators::Static).unwrap_err();
        assert_eq!(e.identity(), "density_divergent");
        let c = c.with_alpha(c.rho()).unwrap();
        let e = radiated_energy(&c, &ctl()).unwrap_err();
        assert_eq!(e.identity(), "energy_divergent");
    }

    #[test]
    fn spectrum_small_velocity_and_integers() {
        let c = CavityConfig::with_alpha_eff(3, 1.0, 0.99, 0.99, 0.9).unwrap();
        let o = SpectrumOptions::default();
        for n in 1..=3 {
            assert_eq!(spectrum_cavity(&c, n as f64, &o).unwrap().n_nu, 0.0);
        }
        let p = spectrum_cavity(&c, 1.0 / 3.0, &o).unwrap();
        assert!(p.n_nu > 0.0 && p.n_nu < 0.2025);
        assert!(p.tail_estimate < 1e-4 * p.n_nu);
    }
}
