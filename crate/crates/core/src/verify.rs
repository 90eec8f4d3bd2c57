//! Self-check suite: module invariants and the reproduction targets.
//!
//! Every check is deterministic (seeded sampling) and reports the measured
//! quantity next to its bound. `VerifyOptions::tolerance_scale` multiplies
//! every numerical tolerance, which is how a breach is injected in tests.

use std::f64::consts::PI;
use std::sync::OnceLock;
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::homography::{mirror_matrices, HomographicMap};
use crate::iteration::{CavityConfig, RayFamily, Stability};
use crate::quadrature::{integrate_period, integrate_spectrum, point_split_density, GridSpec};
use crate::radiation_cavity::{
    approx_energies, energy_density_cavity, intracavity_energy, pulse_shape, radiated_energy, radiated_energy_u,
    sample_spectrum, spectral_peaks, spectrum_cavity, CavityDensity, Denominators, SpectralPeak, SpectrumOptions,
    SpectrumSamples,
};
use crate::radiation_single::{
    energy_density_single, energy_per_period_single, spectrum_single, SingleMirrorConfig, SPECTRUM_ENERGY_RATIO,
};
use crate::specfun::{fourier_coeff_quadrature, gamma_coeff, hyper_g, SeriesControl};
use crate::trajectory::{MirrorTrajectory, SinusoidalMotion};

pub const DETERMINANT_TOL: f64 = 1e-10;
pub const GROUP_TOL: f64 = 1e-10;
pub const MEAN_TOL: f64 = 1e-10;
pub const LIGHT_CONE_TOL: f64 = 1e-10;
pub const THIRD_ORDER_CONST: f64 = 10.0;
pub const POWER_LAW_TOL: f64 = 1e-10;
pub const BETA_SQUARED_CONST: f64 = 100.0;
pub const GROWTH_TOL: f64 = 0.01;
pub const PARSEVAL_TOL: f64 = 1e-8;
pub const SERIES_TOL: f64 = 1e-9;
pub const ESTIMATE_HIT_RATE: f64 = 0.95;
pub const TRAPEZOID_TOL: f64 = 1e-12;
pub const SINGLE_CLOSED_TOL: f64 = 1e-10;
pub const POINT_SPLIT_TOL: f64 = 1e-5;
pub const SPECTRUM_RATIO_TOL: f64 = 1e-4;
pub const MATRIX_TOL: f64 = 1e-12;
pub const REST_TOL: f64 = 1e-12;
pub const DENSITY_ENERGY_TOL: f64 = 1e-6;
pub const SYMMETRY_TOL: f64 = 1e-12;
pub const LINEAR_TOL: f64 = 1e-3;
pub const BALANCE_TOL: f64 = 0.05;
pub const ZERO_TOL: f64 = 1e-10;
pub const PEAK_OFFSET_TOL: f64 = 0.01;
pub const WIDTH_FACTOR: f64 = 2.0;
pub const ENVELOPE_FACTOR: f64 = 2.0;
pub const K1_INTRACAVITY_RATIO: f64 = 1e-3;
pub const K1_ENERGY_TOL: f64 = 0.01;
pub const PULSE_PEAK_RANGE: (f64, f64) = (1e-4, 1e-2);

pub const SINGLE_RUNTIME_S: f64 = 1.0;
pub const PULSE_RUNTIME_S: f64 = 10.0;
pub const SPECTRUM_RUNTIME_S: f64 = 30.0;

/// Grid used for the pulse-train check.
pub const PULSE_POINTS: usize = 1024;
pub const SPECTRUM_POINTS: usize = 3000;
/// Finesse used by the small-velocity and `K = 1` checks.
pub const LOW_LOSS_RHO: f64 = 1e-4;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Kind {
    Invariant,
    Acceptance,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Check {
    pub name: &'static str,
    pub kind: Kind,
    pub passed: bool,
    pub detail: String,
    pub seconds: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct VerifyOptions {
    pub tolerance_scale: f64,
    /// Only checks whose name contains one of these run; empty runs all.
    pub filter: Vec<String>,
}

impl Default for VerifyOptions {
    fn default() -> Self {
        VerifyOptions {
            tolerance_scale: 1.0,
            filter: Vec::new(),
        }
    }
}

struct Outcome {
    passed: bool,
    detail: String,
}

fn outcome(passed: bool, detail: String) -> Result<Outcome> {
    Ok(Outcome { passed, detail })
}

struct Ctx {
    scale: f64,
    spectrum: OnceLock<Result<ResonantSpectrum>>,
}

impl Ctx {
    fn tol(&self, t: f64) -> f64 {
        t * self.scale
    }

    fn spectrum(&self) -> Result<&ResonantSpectrum> {
        self.spectrum
            .get_or_init(ResonantSpectrum::compute)
            .as_ref()
            .map_err(Clone::clone)
    }
}

type CheckFn = fn(&Ctx) -> Result<Outcome>;

const CHECKS: &[(&str, Kind, CheckFn)] = &[
    ("homography.determinant", Kind::Invariant, homography_determinant),
    ("homography.monotone", Kind::Invariant, homography_monotone),
    ("homography.group", Kind::Invariant, homography_group),
    ("homography.mean_derivative", Kind::Invariant, homography_mean_derivative),
    ("trajectory.light_cone", Kind::Invariant, trajectory_light_cone),
    ("trajectory.small_velocity", Kind::Invariant, trajectory_small_velocity),
    ("iteration.power_law", Kind::Invariant, iteration_power_law),
    ("iteration.mean_derivative", Kind::Invariant, iteration_mean_derivative),
    ("iteration.composed_vs_closed", Kind::Invariant, iteration_composed_vs_closed),
    ("iteration.geometric_growth", Kind::Invariant, iteration_geometric_growth),
    ("specfun.parseval", Kind::Invariant, specfun_parseval),
    ("specfun.series_vs_quadrature", Kind::Invariant, specfun_series_vs_quadrature),
    ("specfun.beta_parity", Kind::Invariant, specfun_beta_parity),
    ("quadrature.error_estimate", Kind::Invariant, quadrature_error_estimate),
    ("quadrature.trapezoid_convergence", Kind::Invariant, quadrature_trapezoid_convergence),
    ("single.arches", Kind::Invariant, single_arches),
    ("single.spectrum_energy", Kind::Invariant, single_spectrum_energy),
    ("single.linear_in_reflectivity", Kind::Invariant, single_linear_in_reflectivity),
    ("single.point_split", Kind::Invariant, single_point_split),
    ("cavity.at_rest", Kind::Invariant, cavity_at_rest),
    ("cavity.density_energy", Kind::Invariant, cavity_density_energy),
    ("cavity.positivity", Kind::Invariant, cavity_positivity),
    ("cavity.pulse_growth", Kind::Invariant, cavity_pulse_growth),
    ("cavity.left_right_symmetry", Kind::Invariant, cavity_left_right_symmetry),
    ("cavity.envelope_bound", Kind::Invariant, cavity_envelope_bound),
    ("cavity.divergence_guard", Kind::Invariant, cavity_divergence_guard),
    ("acceptance.single_mirror_closed_form", Kind::Acceptance, acceptance_single_closed_form),
    ("acceptance.matrix_power_law", Kind::Acceptance, acceptance_matrix_power_law),
    ("acceptance.periodic_orbit_law", Kind::Acceptance, acceptance_periodic_orbit_law),
    ("acceptance.at_rest_nullity", Kind::Acceptance, cavity_at_rest),
    ("acceptance.pulse_train", Kind::Acceptance, acceptance_pulse_train),
    ("acceptance.resonant_spectrum", Kind::Acceptance, acceptance_resonant_spectrum),
    ("acceptance.linear_regime", Kind::Acceptance, acceptance_linear_regime),
    ("acceptance.energy_consistency", Kind::Acceptance, acceptance_energy_consistency),
    ("acceptance.detailed_balance", Kind::Acceptance, acceptance_detailed_balance),
    ("acceptance.threshold_guards", Kind::Acceptance, cavity_divergence_guard),
    ("acceptance.oracle_equivalence", Kind::Acceptance, acceptance_oracle_equivalence),
    ("acceptance.single_round_trip_cavity", Kind::Acceptance, acceptance_single_round_trip),
];

/// Names of all checks in execution order.
pub fn check_names() -> impl Iterator<Item = &'static str> {
    CHECKS.iter().map(|(name, _, _)| *name)
}

/// Runs the selected checks in order; a check that errors counts as failed.
pub fn run(opts: &VerifyOptions) -> Vec<Check> {
    let ctx = Ctx {
        scale: opts.tolerance_scale,
        spectrum: OnceLock::new(),
    };
    CHECKS
        .iter()
        .filter(|(name, _, _)| opts.filter.is_empty() || opts.filter.iter().any(|f| name.contains(f.as_str())))
        .map(|&(name, kind, f)| {
            let start = Instant::now();
            let result = f(&ctx);
            let seconds = start.elapsed().as_secs_f64();
            let (passed, detail) = match result {
                Ok(o) => (o.passed, o.detail),
                Err(e) => (false, format!("error [{}]: {e}", e.identity())),
            };
            Check {
                name,
                kind,
                passed,
                detail,
                seconds,
            }
        })
        .collect()
}

fn sci(values: &[f64]) -> String {
    let parts: Vec<String> = values.iter().map(|v| format!("{v:.3e}")).collect();
    format!("[{}]", parts.join(", "))
}

fn ctl() -> SeriesControl {
    SeriesControl::default()
}

fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

fn homography_determinant(ctx: &Ctx) -> Result<Outcome> {
    let mut rng = rng(1);
    let mut worst = 0.0f64;
    for _ in 0..20 {
        let mut acc = HomographicMap::identity(1.0)?;
        for _ in 0..500 {
            let m = HomographicMap::from_rapidity(rng.gen_range(0.0..0.5), rng.gen_range(-PI..PI), rng.gen_range(-PI..PI), 1.0)?;
            acc = m.compose(&acc)?;
            worst = worst.max((acc.determinant() - 1.0).abs() / acc.a().norm_sqr());
        }
    }
    let tol = ctx.tol(DETERMINANT_TOL);
    outcome(worst < tol, format!("max |det-1|/|a|^2 = {worst:.2e} over 20 chains of 500 (tol {tol:.0e})"))
}

fn homography_monotone(_: &Ctx) -> Result<Outcome> {
    let mut ok = true;
    for &alpha in &[0.5, 2.0, 5.0] {
        let h = HomographicMap::from_rapidity(alpha, 0.3, -1.2, 1.0)?;
        let n = 10_000;
        let mut prev = h.apply(0.0);
        for j in 1..=n {
            let next = h.apply(2.0 * PI * j as f64 / n as f64);
            ok &= next > prev;
            prev = next;
        }
    }
    outcome(ok, "apply strictly increasing on 10^4 points for alpha in {0.5, 2, 5}".into())
}

fn homography_group(ctx: &Ctx) -> Result<Outcome> {
    let mut rng = rng(2);
    let mut worst = 0.0f64;
    for _ in 0..200 {
        let w = rng.gen_range(0.5..3.0);
        let h = HomographicMap::from_rapidity(rng.gen_range(0.0..2.0), rng.gen_range(-PI..PI), rng.gen_range(-PI..PI), w)?;
        let g = HomographicMap::from_rapidity(rng.gen_range(0.0..2.0), rng.gen_range(-PI..PI), rng.gen_range(-PI..PI), w)?;
        let hg = h.compose(&g)?;
        let u = rng.gen_range(-10.0..10.0);
        worst = worst.max(w * (hg.apply(u) - h.apply(g.apply(u))).abs());
    }
    let tol = ctx.tol(GROUP_TOL);
    outcome(worst < tol, format!("max Omega*|h(g(u)) - (h.g)(u)| = {worst:.2e} (tol {tol:.0e})"))
}

fn homography_mean_derivative(ctx: &Ctx) -> Result<Outcome> {
    let grid = GridSpec::default();
    let mut worst = 0.0f64;
    for &alpha in &[0.1, 1.0, 2.0] {
        for &w in &[1.0, 2.5] {
            let h = HomographicMap::from_rapidity(alpha, 0.7, 0.2, w)?;
            let mean = integrate_period(|u| h.derivative(u), w, &grid) * w / (2.0 * PI);
            worst = worst.max((mean - 1.0).abs());
        }
    }
    let tol = ctx.tol(MEAN_TOL);
    outcome(worst < tol, format!("max |<h'> - 1| = {worst:.2e} for alpha <= 2 (tol {tol:.0e})"))
}

fn trajectory_light_cone(ctx: &Ctx) -> Result<Outcome> {
    let traj = MirrorTrajectory::Sinusoidal(SinusoidalMotion {
        omega: 1.3,
        beta: 0.9,
        mean_phase: 0.4,
        time_phase: 1.1,
    });
    let mut worst = 0.0f64;
    for j in 0..500 {
        let u = -7.0 + 0.03 * j as f64;
        let v = traj.v_of_u(u)?;
        let (t, x) = (0.5 * (v + u), 0.5 * (v - u));
        worst = worst.max((x - traj.position(t)).abs());
    }
    let tol = ctx.tol(LIGHT_CONE_TOL);
    outcome(worst < tol, format!("max |x* - q(t*)| = {worst:.2e} at beta = 0.9 (tol {tol:.0e})"))
}

fn trajectory_small_velocity(ctx: &Ctx) -> Result<Outcome> {
    let mut worst = 0.0f64;
    for &beta in &[1e-2f64, 1e-3, 1e-4] {
        let s = SinusoidalMotion {
            omega: 1.0,
            beta,
            mean_phase: 0.4,
            time_phase: 1.1,
        };
        let h = HomographicMap::from_rapidity(beta.atanh(), s.mean_phase, s.time_phase, s.omega)?;
        let traj = MirrorTrajectory::Sinusoidal(s);
        let mut dev = 0.0f64;
        for j in 0..400 {
            let u = 2.0 * PI * j as f64 / 400.0;
            dev = dev.max((traj.v_of_u(u)? - h.apply(u)).abs());
        }
        worst = worst.max(dev / beta.powi(3));
    }
    let tol = ctx.tol(THIRD_ORDER_CONST);
    outcome(worst <= tol, format!("max |v_sin - h| / beta^3 = {worst:.3} (bound {tol})"))
}

fn attractive_orbit(fam: &RayFamily) -> Result<f64> {
    fam.periodic_orbits()?
        .orbits
        .into_iter()
        .find(|o| o.stability == Stability::Attractive)
        .map(|o| o.u)
        .ok_or_else(|| Error::Domain("no attractive orbit".into()))
}

fn iteration_power_law(ctx: &Ctx) -> Result<Outcome> {
    let mut worst = 0.0f64;
    for k in 1..=4 {
        let alpha = 0.02;
        let fam = RayFamily::closed_form(CavityConfig::symmetric(k, 1.0, 0.99, alpha)?);
        let u = attractive_orbit(&fam)?;
        for p in 1..=100i64 {
            let d = fam.closed_f(p, u)?.deriv;
            worst = worst.max((d / (2.0 * p as f64 * alpha).exp() - 1.0).abs());
        }
    }
    let tol = ctx.tol(POWER_LAW_TOL);
    outcome(worst < tol, format!("max |f_p'/e^(2p alpha) - 1| = {worst:.2e}, p <= 100, K <= 4 (tol {tol:.0e})"))
}

fn iteration_mean_derivative(ctx: &Ctx) -> Result<Outcome> {
    let grid = GridSpec::default();
    let mut worst = 0.0f64;
    for k in [2, 3] {
        let c = CavityConfig::symmetric(k, 1.0, 0.99, 0.02)?;
        let fam = RayFamily::closed_form(c);
        for p in -1..=50i64 {
            let mean = integrate_period(|u| fam.closed_deriv(p, u), 1.0, &grid) / (2.0 * PI);
            worst = worst.max((mean - 1.0).abs());
        }
    }
    let tol = ctx.tol(MEAN_TOL);
    outcome(worst < tol, format!("max |<f_p'> - 1| = {worst:.2e}, p <= 50 (tol {tol:.0e})"))
}

/// `sup |f_p^sin - f_p| / β²` over one period, with `Ω = 1`.
fn composition_constant(orders: &[i64]) -> Result<f64> {
    let alpha = 1e-3f64;
    let beta = alpha.tanh();
    let c = CavityConfig::symmetric(2, 1.0, 0.99, alpha)?;
    let closed = RayFamily::closed_form(c);
    let sinus = RayFamily::sinusoidal(c)?;
    let mut worst = 0.0f64;
    for &p in orders {
        for j in 0..12 {
            let u = 2.0 * PI * j as f64 / 12.0;
            let d = (sinus.iterate_f(p, u)?.value - closed.closed_f(p, u)?.value).abs();
            worst = worst.max(d / (beta * beta));
        }
    }
    Ok(worst)
}

fn iteration_composed_vs_closed(ctx: &Ctx) -> Result<Outcome> {
    let c = composition_constant(&[1, 5, 40, 400, 4000])?;
    let tol = ctx.tol(BETA_SQUARED_CONST);
    outcome(c <= tol, format!("C = {c:.3} up to p = 4/beta at beta = 1e-3 (bound {tol})"))
}

fn iteration_geometric_growth(ctx: &Ctx) -> Result<Outcome> {
    let alpha = 0.05;
    let fam = RayFamily::closed_form(CavityConfig::symmetric(3, 1.0, 0.99, alpha)?);
    let u = attractive_orbit(&fam)?;
    let mut worst = 0.0f64;
    for p in 41..80i64 {
        let a = fam.closed_f(p, u)?.schwarzian.abs();
        let b = fam.closed_f(p + 1, u)?.schwarzian.abs();
        worst = worst.max((b / a / (4.0 * alpha).exp() - 1.0).abs());
    }
    let tol = ctx.tol(GROWTH_TOL);
    outcome(worst < tol, format!("max |S_(p+1)/S_p e^(-4 alpha) - 1| = {worst:.2e} for p alpha > 2 (tol {tol})"))
}

fn parseval_deficit() -> Result<f64> {
    let mut worst = 0.0f64;
    for &nubar in &[0.3, 1.7] {
        for &beta in &[0.1, 0.9] {
            let mut total = 0.0;
            let mut m = 0i64;
            loop {
                let plus = gamma_coeff(m, nubar, beta, &ctl())?.norm_sqr();
                let minus = if m > 0 { gamma_coeff(-m, nubar, beta, &ctl())?.norm_sqr() } else { 0.0 };
                total += plus + minus;
                m += 1;
                if m > 20 && plus + minus < 1e-16 {
                    break;
                }
                if m > 100_000 {
                    return Err(Error::Resource("Parseval sum did not settle".into()));
                }
            }
            worst = worst.max((1.0 - total).abs());
        }
    }
    Ok(worst)
}

fn specfun_parseval(ctx: &Ctx) -> Result<Outcome> {
    let d = parseval_deficit()?;
    let tol = ctx.tol(PARSEVAL_TOL);
    outcome(d < tol, format!("max |1 - sum |gamma_m|^2| = {d:.2e} (tol {tol:.0e})"))
}

fn specfun_series_vs_quadrature(ctx: &Ctx) -> Result<Outcome> {
    let mut worst = 0.0f64;
    for &beta in &[0.1, 0.5, 0.9] {
        for &nubar in &[0.25, 1.3, 2.75, 3.9] {
            for m in 0..=12i64 {
                let a = gamma_coeff(m, nubar, beta, &ctl())?;
                let b = fourier_coeff_quadrature(m, nubar, beta, &ctl())?;
                worst = worst.max((a - b).norm());
            }
        }
    }
    let tol = ctx.tol(SERIES_TOL);
    outcome(worst < tol, format!("max |gamma_series - gamma_quadrature| = {worst:.2e} (tol {tol:.0e})"))
}

fn specfun_beta_parity(ctx: &Ctx) -> Result<Outcome> {
    let mut worst = 0.0f64;
    for m in 2..12u32 {
        for &beta in &[0.2, 0.7, 0.95] {
            for &nu in &[0.45, 1.3] {
                let g = hyper_g(m, nu, beta, &ctl())?;
                let h = hyper_g(m, nu, -beta, &ctl())?;
                let s = if m % 2 == 0 { 1.0 } else { -1.0 };
                if g != 0.0 {
                    worst = worst.max((h - s * g).abs() / g.abs());
                }
            }
        }
    }
    let tol = ctx.tol(1e-14);
    outcome(worst <= tol, format!("max |G_m(-beta) - (-1)^m G_m(beta)|/|G_m| = {worst:.1e}"))
}

fn quadrature_error_estimate(ctx: &Ctx) -> Result<Outcome> {
    let grid = GridSpec::default();
    let mut rng = rng(11);
    let mut bounded = 0;
    for _ in 0..200 {
        let alpha = rng.gen_range(0.01..1.0);
        let w = rng.gen_range(0.5..3.0);
        let map = HomographicMap::from_rapidity(alpha, rng.gen_range(-3.0..3.0), rng.gen_range(-3.0..3.0), w)?;
        let u = rng.gen_range(-10.0..10.0);
        let ps = point_split_density(&map, u, w, &grid)?;
        let exact = -map.schwarzian(u) / (24.0 * PI);
        if (ps.value - exact).abs() <= ps.error_estimate * ctx.scale {
            bounded += 1;
        }
    }
    let rate = bounded as f64 / 200.0;
    outcome(rate >= ESTIMATE_HIT_RATE, format!("error estimate bounds the deviation in {bounded}/200 samples"))
}

fn quadrature_trapezoid_convergence(ctx: &Ctx) -> Result<Outcome> {
    let (coarse, fine) = (GridSpec::default(), GridSpec::with_points(2 * GridSpec::default().points_per_period));
    let mut worst = 0.0f64;
    let mut check = |f: &dyn Fn(f64) -> f64, w: f64| {
        let a = integrate_period(f, w, &coarse);
        let b = integrate_period(f, w, &fine);
        worst = worst.max((a - b).abs() / b.abs());
    };
    for &alpha in &[0.3, 1.0, 2.0] {
        let h = HomographicMap::from_rapidity(alpha, 0.1, 0.9, 1.4)?;
        check(&|u| h.derivative(u), 1.4);
        check(&|u| h.schwarzian(u).powi(2), 1.4);
    }
    let fam = RayFamily::closed_form(CavityConfig::symmetric(2, 1.0, 0.99, 0.02)?);
    check(&|u| fam.closed_deriv(20, u), 1.0);
    let tol = ctx.tol(TRAPEZOID_TOL);
    outcome(worst < tol, format!("max relative change on doubling the grid = {worst:.2e} (tol {tol:.0e})"))
}

fn single_cfg(r: f64, alpha: f64) -> Result<SingleMirrorConfig> {
    SingleMirrorConfig::new(r, alpha, 1.0)
}

fn single_arches(_: &Ctx) -> Result<Outcome> {
    let c = single_cfg(1.0, 0.6f64.atanh())?;
    let mut zeros_exact = true;
    let mut nonnegative = true;
    for j in 1..=60 {
        let nu = 0.05 * j as f64;
        let n = spectrum_single(&c, nu, &ctl())?;
        if nu.fract() == 0.0 {
            zeros_exact &= n == 0.0;
        } else {
            nonnegative &= n >= 0.0;
        }
    }
    outcome(zeros_exact && nonnegative, format!("n >= 0: {nonnegative}, exact zeros at integers: {zeros_exact}"))
}

/// `∫ν n_ν dν / E_u` for α ∈ {0.2, 0.5, 0.8}.
fn spectrum_energy_ratios() -> Result<Vec<f64>> {
    [0.2, 0.5, 0.8]
        .iter()
        .map(|&alpha| {
            let c = single_cfg(1.0, alpha)?;
            let s = integrate_spectrum(|nu| spectrum_single(&c, nu, &ctl()), None)?;
            Ok(s.energy_moment / energy_per_period_single(&c)?.closed_form)
        })
        .collect()
}

fn ratio_spread(ratios: &[f64]) -> f64 {
    ratios.iter().map(|r| (r / SPECTRUM_ENERGY_RATIO - 1.0).abs()).fold(0.0, f64::max)
}

fn single_spectrum_energy(ctx: &Ctx) -> Result<Outcome> {
    let ratios = spectrum_energy_ratios()?;
    let spread = ratio_spread(&ratios);
    let tol = ctx.tol(SPECTRUM_RATIO_TOL);
    outcome(spread < tol, format!("ratios {ratios:.10?} against {SPECTRUM_ENERGY_RATIO} (tol {tol:.0e})"))
}

fn single_linear_in_reflectivity(ctx: &Ctx) -> Result<Outcome> {
    let a = single_cfg(1.0, 0.7)?;
    let b = single_cfg(0.25, 0.7)?;
    let mut worst = 0.0f64;
    for j in 0..20 {
        let u = 0.31 * j as f64;
        let (ea, eb) = (energy_density_single(&a, u)?, energy_density_single(&b, u)?);
        worst = worst.max((eb - 0.25 * ea).abs() / ea.abs());
    }
    for &nu in &[0.4, 1.3, 2.7] {
        let (na, nb) = (spectrum_single(&a, nu, &ctl())?, spectrum_single(&b, nu, &ctl())?);
        worst = worst.max((nb - 0.25 * na).abs() / na);
    }
    let tol = ctx.tol(1e-15);
    outcome(worst <= tol, format!("max relative deviation from linearity = {worst:.1e}"))
}

fn point_split_deviation() -> Result<f64> {
    let mut rng = rng(5);
    let grid = GridSpec::default();
    let mut worst = 0.0f64;
    for _ in 0..100 {
        let c = SingleMirrorConfig {
            phi_a: rng.gen_range(-3.0..3.0),
            phi_b: rng.gen_range(-3.0..3.0),
            ..SingleMirrorConfig::new(rng.gen_range(0.1..1.0), rng.gen_range(0.0..1.0), rng.gen_range(0.5..3.0))?
        };
        let u = rng.gen_range(-20.0..20.0);
        let exact = energy_density_single(&c, u)?;
        let split = c.reflectivity * point_split_density(&c.map()?, u, c.omega, &grid)?.value / (c.omega * c.omega);
        // peak |e_u| over the period
        let scale = c.reflectivity / (48.0 * PI) * ((4.0 * c.alpha).exp() - 1.0);
        if scale > 0.0 {
            worst = worst.max((exact - split).abs() / scale);
        }
    }
    Ok(worst)
}

fn single_point_split(ctx: &Ctx) -> Result<Outcome> {
    let d = point_split_deviation()?;
    let tol = ctx.tol(POINT_SPLIT_TOL);
    outcome(d < tol, format!("max |point split - Schwarzian| / max|e_u| = {d:.2e} over 100 cases (tol {tol:.0e})"))
}

fn cavity_at_rest(ctx: &Ctx) -> Result<Outcome> {
    let mut worst = 0.0f64;
    for k in 1..=3 {
        for &(r1, r2) in &[(0.99, 0.99), (0.5, 0.9), (0.999, 0.9)] {
            let c = CavityConfig::new(k, 1.0, r1, r2, 0.0)?;
            let d = CavityDensity::new(c, Denominators::Static)?;
            for j in 0..64 {
                worst = worst.max(d.eval(c.period() * j as f64 / 64.0).abs());
            }
        }
    }
    let tol = ctx.tol(REST_TOL);
    outcome(worst < tol, format!("max |e_u(alpha = 0)| = {worst:.2e} hbar Omega^2 on 64 points (tol {tol:.0e})"))
}

fn cavity_density_energy(ctx: &Ctx) -> Result<Outcome> {
    let mut worst = 0.0f64;
    for k in 1..=3 {
        for &rho in &[0.005f64, 0.05] {
            for &frac in &[0.2, 0.45] {
                let c = CavityConfig::symmetric(k, 1.0, (-2.0 * rho).exp(), frac * rho)?;
                let numeric = CavityDensity::new(c, Denominators::Static)?.period_energy(1e-9)?;
                let closed = radiated_energy_u(&c, &ctl())?;
                worst = worst.max((numeric / closed - 1.0).abs());
            }
        }
    }
    let tol = ctx.tol(DENSITY_ENERGY_TOL);
    outcome(worst < tol, format!("max |period integral / E_u - 1| = {worst:.2e}, K <= 3, alpha <= 0.45 rho (tol {tol:.0e})"))
}

fn cavity_positivity(_: &Ctx) -> Result<Outcome> {
    let mut negative = 0;
    let mut total = 0;
    for k in 1..=4 {
        for &(r1, r2) in &[(0.99, 0.99), (0.5, 0.99), (0.9, 0.3)] {
            let base = CavityConfig::new(k, 1.0, r1, r2, 0.0)?;
            for j in 1..20 {
                let c = base.with_alpha(base.rho() * j as f64 / 20.0)?;
                let rep = radiated_energy(&c, &ctl())?;
                total += 1;
                if !(rep.e_u >= 0.0 && rep.e_v >= 0.0 && rep.e_intracavity >= 0.0) {
                    negative += 1;
                }
            }
        }
    }
    outcome(negative == 0, format!("{negative}/{total} sampled configurations with a negative energy"))
}

fn pulse_peak(alpha_eff: f64) -> Result<f64> {
    let c = CavityConfig::with_alpha_eff(2, 1.0, 0.99, 0.99, alpha_eff)?;
    let d = CavityDensity::new(c, Denominators::Static)?;
    let mut peak = d.eval(d.pulse_center());
    for j in 0..64 {
        peak = peak.max(d.eval(c.period() * j as f64 / 64.0));
    }
    Ok(peak)
}

fn cavity_pulse_growth(_: &Ctx) -> Result<Outcome> {
    let peaks = [0.3, 0.5, 0.7, 0.9].iter().map(|&a| pulse_peak(a)).collect::<Result<Vec<_>>>()?;
    let increasing = peaks.windows(2).all(|w| w[1] > w[0]);
    outcome(increasing, format!("peak e_u at alpha_eff 0.3/0.5/0.7/0.9: {}", sci(&peaks)))
}

fn cavity_left_right_symmetry(ctx: &Ctx) -> Result<Outcome> {
    let mut worst = 0.0f64;
    for k in 1..=3 {
        for &alpha in &[0.001, 0.004] {
            let rep = radiated_energy(&CavityConfig::symmetric(k, 1.0, 0.98, alpha)?, &ctl())?;
            worst = worst.max((rep.e_u - rep.e_v).abs());
        }
    }
    let tol = ctx.tol(SYMMETRY_TOL);
    outcome(worst <= tol, format!("max |E_u - E_v| = {worst:.2e} hbar Omega for R1 = R2 (tol {tol:.0e})"))
}

struct ResonantSpectrum {
    config: CavityConfig,
    samples: SpectrumSamples,
    peaks: Vec<SpectralPeak>,
    seconds: f64,
}

impl ResonantSpectrum {
    fn compute() -> Result<Self> {
        let start = Instant::now();
        let config = CavityConfig::with_alpha_eff(3, 1.0, 0.99, 0.99, 0.9)?;
        let opts = SpectrumOptions::default();
        let samples = sample_spectrum(&config, 3.0, SPECTRUM_POINTS, &opts, false)?;
        let peaks = spectral_peaks(&config, &samples, &opts, 1e-3)?;
        Ok(ResonantSpectrum {
            config,
            samples,
            peaks,
            seconds: start.elapsed().as_secs_f64(),
        })
    }
}

fn cavity_envelope_bound(ctx: &Ctx) -> Result<Outcome> {
    let s = ctx.spectrum()?;
    let opts = SpectrumOptions {
        envelope: true,
        ..SpectrumOptions::default()
    };
    let mut worst = 1.0f64;
    for p in &s.peaks {
        let env = spectrum_cavity(&s.config, p.nu, &opts)?.n_nu;
        let ratio = p.value / env;
        worst = if (ratio.ln()).abs() > worst.ln().abs() { ratio } else { worst };
    }
    let bound = ENVELOPE_FACTOR;
    outcome(
        !s.peaks.is_empty() && worst <= bound && worst >= 1.0 / bound,
        format!("worst peak/envelope ratio {worst:.3} over {} peaks (within factor {bound})", s.peaks.len()),
    )
}

fn cavity_divergence_guard(_: &Ctx) -> Result<Outcome> {
    let at = CavityConfig::with_alpha_eff(2, 1.0, 0.99, 0.99, 1.0)?;
    let density_errors = [
        CavityDensity::new(at, Denominators::Static).err(),
        energy_density_cavity(&at, 0.3, Denominators::Dynamic).err(),
        spectrum_cavity(&at, 0.5, &SpectrumOptions::default()).err(),
    ];
    let density_ok = density_errors.iter().all(|e| {
        matches!(e, Some(Error::DensityDivergence { beta_eff_cap, .. }) if (beta_eff_cap - 0.7616).abs() < 1e-4)
    });
    let at_rho = at.with_alpha(at.rho())?;
    let energy_errors = [
        radiated_energy(&at_rho, &ctl()).err(),
        radiated_energy_u(&at_rho, &ctl()).err(),
        intracavity_energy(&at_rho, &ctl()).err(),
    ];
    let energy_ok = energy_errors.iter().all(|e| matches!(e, Some(Error::EnergyDivergence { .. })));
    let ids = (
        density_errors[0].as_ref().map(Error::identity),
        energy_errors[0].as_ref().map(Error::identity),
    );
    let distinct = ids.0.is_some() && ids.0 != ids.1;
    outcome(
        density_ok && energy_ok && distinct,
        format!("alpha_eff = 1 -> {:?}, alpha = rho -> {:?}", ids.0.unwrap_or("accepted"), ids.1.unwrap_or("accepted")),
    )
}

fn acceptance_single_closed_form(ctx: &Ctx) -> Result<Outcome> {
    let start = Instant::now();
    let mut worst = 0.0f64;
    for &alpha in &[0.05, 0.5, 1.0] {
        for &r in &[0.3, 1.0] {
            let e = energy_per_period_single(&single_cfg(r, alpha)?)?;
            worst = worst.max((e.quadrature / e.closed_form - 1.0).abs());
        }
    }
    let secs = start.elapsed().as_secs_f64();
    let tol = ctx.tol(SINGLE_CLOSED_TOL);
    outcome(
        worst < tol && secs < SINGLE_RUNTIME_S,
        format!("max |quadrature / closed form - 1| = {worst:.2e} (tol {tol:.0e}) in {secs:.3} s (< {SINGLE_RUNTIME_S} s)"),
    )
}

fn acceptance_matrix_power_law(ctx: &Ctx) -> Result<Outcome> {
    let mut worst = 0.0f64;
    for k in [2u32, 3] {
        let c = CavityConfig::symmetric(k, 1.0, 0.99, 1e-3)?;
        let fam = RayFamily::closed_form(c);
        let (h, g) = mirror_matrices(k, c.alpha(), 1.0)?;
        let gi = g.inverse();
        let mut acc = HomographicMap::identity(1.0)?;
        for p in 1..=200i64 {
            acc = if p % 2 == 1 { h.compose(&acc)? } else { gi.compose(&acc)? };
            let want = fam.closed_matrix(p)?;
            worst = worst.max((acc.a() - want.a()).norm()).max((acc.b() - want.b()).norm());
        }
    }
    let tol = ctx.tol(MATRIX_TOL);
    outcome(worst < tol, format!("max entry deviation of composed A_p, p <= 200, K in {{2, 3}}: {worst:.2e} (tol {tol:.0e})"))
}

fn acceptance_periodic_orbit_law(ctx: &Ctx) -> Result<Outcome> {
    let mut worst = 0.0f64;
    for k in 1..=3 {
        let alpha = 0.02;
        let fam = RayFamily::closed_form(CavityConfig::symmetric(k, 1.0, 0.99, alpha)?);
        let u = attractive_orbit(&fam)?;
        let s1 = fam.closed_f(1, u)?.schwarzian;
        for p in 1..=50i64 {
            let f = fam.closed_f(p, u)?;
            worst = worst.max((f.deriv / (2.0 * p as f64 * alpha).exp() - 1.0).abs());
            let ratio = (1.0 - (4.0 * p as f64 * alpha).exp()) / (1.0 - (4.0 * alpha).exp());
            worst = worst.max((f.schwarzian / s1 / ratio - 1.0).abs());
        }
    }
    let tol = ctx.tol(POWER_LAW_TOL);
    outcome(worst < tol, format!("max relative deviation of f_p' and S f_p ratios, p <= 50: {worst:.2e} (tol {tol:.0e})"))
}

fn acceptance_pulse_train(_: &Ctx) -> Result<Outcome> {
    let start = Instant::now();
    let mut pulses = Vec::new();
    for &a in &[0.3, 0.6, 0.9] {
        let c = CavityConfig::with_alpha_eff(2, 1.0, 0.99, 0.99, a)?;
        pulses.push(pulse_shape(&CavityDensity::new(c, Denominators::Static)?, PULSE_POINTS)?);
    }
    let secs = start.elapsed().as_secs_f64();
    let growing = pulses.windows(2).all(|w| w[1].peak > w[0].peak);
    let narrowing = pulses.windows(2).all(|w| w[1].fwhm < w[0].fwhm);
    let top = pulses[2].peak;
    let scale = top >= PULSE_PEAK_RANGE.0 && top <= PULSE_PEAK_RANGE.1;
    let peaks: Vec<f64> = pulses.iter().map(|p| p.peak).collect();
    let widths: Vec<f64> = pulses.iter().map(|p| p.fwhm).collect();
    outcome(
        growing && narrowing && scale && secs < PULSE_RUNTIME_S,
        format!(
            "K = 2, r = 0.99: peaks {} hbar Omega^2, FWHM {widths:.4?} periods, top in [{:e}, {:e}]: {scale}, {secs:.1} s (< {PULSE_RUNTIME_S} s)",
            sci(&peaks),
            PULSE_PEAK_RANGE.0,
            PULSE_PEAK_RANGE.1
        ),
    )
}

fn acceptance_resonant_spectrum(ctx: &Ctx) -> Result<Outcome> {
    let s = ctx.spectrum()?;
    let cap = s.config.alpha_eff().powi(2) / 4.0;
    let max = s
        .samples
        .n_nu
        .iter()
        .chain(s.peaks.iter().map(|p| &p.value))
        .cloned()
        .fold(0.0, f64::max);
    let bounded = max < cap;
    let zero = (1..=3)
        .map(|n| {
            let j = s.samples.nu.iter().position(|&nu| nu == n as f64);
            j.map(|j| s.samples.n_nu[j].abs()).unwrap_or(f64::INFINITY)
        })
        .fold(0.0, f64::max);
    let zeros = zero < ctx.tol(ZERO_TOL);
    let k = s.config.k();
    let target = s.config.rho() / (PI * k as f64);
    let mut located = true;
    let mut width_ratio = (f64::INFINITY, 0.0f64);
    for j in 1..3 * k {
        if j % k == 0 {
            continue;
        }
        let centre = j as f64 / k as f64;
        let near: Vec<&SpectralPeak> = s.peaks.iter().filter(|p| (p.nu - centre).abs() <= PEAK_OFFSET_TOL).collect();
        located &= !near.is_empty();
        for p in near {
            let r = p.half_width / target;
            width_ratio = (width_ratio.0.min(r), width_ratio.1.max(r));
        }
    }
    let widths = width_ratio.0 >= 1.0 / WIDTH_FACTOR && width_ratio.1 <= WIDTH_FACTOR;
    let fast = s.seconds < SPECTRUM_RUNTIME_S;
    outcome(
        bounded && zeros && located && widths && fast,
        format!(
            "K = 3, alpha_eff = 0.9, r = 0.99, {SPECTRUM_POINTS} points: max n {max:.4} < {cap:.4}: {bounded}; \
             |n| at integers {zero:.1e}: {zeros}; maxima at all j/3: {located}; half-width / (rho/pi K) in \
             [{:.2}, {:.2}]: {widths}; {:.1} s (< {SPECTRUM_RUNTIME_S} s)",
            width_ratio.0, width_ratio.1, s.seconds
        ),
    )
}

fn acceptance_linear_regime(ctx: &Ctx) -> Result<Outcome> {
    let rho = LOW_LOSS_RHO;
    let alpha = rho / 100.0;
    let ratio = |k: u32| -> Result<f64> {
        let c = CavityConfig::symmetric(k, 1.0, (-2.0 * rho).exp(), alpha)?;
        let e = radiated_energy(&c, &ctl())?.e_total;
        let kf = k as f64;
        Ok(e / (alpha * alpha / 6.0 + (1.0 - 1.0 / (kf * kf)) * alpha * alpha / (6.0 * rho)))
    };
    // K = 1 has no cavity term; it is judged by the single round trip check
    let mut worst_e = 0.0f64;
    for k in 2..=3 {
        worst_e = worst_e.max((ratio(k)? - 1.0).abs());
    }
    let k1 = ratio(1)?;
    let beta = 1e-3f64;
    let c = single_cfg(1.0, beta.atanh())?;
    let mut worst_n = 0.0f64;
    for j in 1..20 {
        let nu = 0.05 * j as f64;
        let lead = c.reflectivity * beta * beta * nu * (1.0 - nu);
        worst_n = worst_n.max((spectrum_single(&c, nu, &ctl())? / lead - 1.0).abs());
    }
    let tol = ctx.tol(LINEAR_TOL);
    outcome(
        worst_e < tol && worst_n < tol,
        format!(
            "alpha = rho/100 (rho = {rho:e}), K in {{2, 3}}: max |E / linear form - 1| = {worst_e:.2e} \
             (K = 1: ratio {k1:.4}); \
             beta = 1e-3 first arch: max |n / R beta^2 nu(1-nu) - 1| = {worst_n:.2e} (tol {tol:.0e})"
        ),
    )
}

fn acceptance_energy_consistency(ctx: &Ctx) -> Result<Outcome> {
    let density = cavity_density_energy(ctx)?;
    let ratios = spectrum_energy_ratios()?;
    let spread = ratio_spread(&ratios);
    let tol = ctx.tol(SPECTRUM_RATIO_TOL);
    outcome(
        density.passed && spread < tol,
        format!("{}; spectrum moment / E_u = {ratios:.10?}, spread {spread:.1e} (tol {tol:.0e})", density.detail),
    )
}

fn acceptance_detailed_balance(ctx: &Ctx) -> Result<Outcome> {
    let rho = 0.005f64;
    let c = CavityConfig::symmetric(3, 1.0, (-2.0 * rho).exp(), 0.4 * rho)?;
    let good = radiated_energy(&c, &ctl())?.balance_ratio;
    let lossy = CavityConfig::new(3, 1.0, 0.5, 0.99, 0.0)?;
    let lossy = lossy.with_alpha(0.4 * lossy.rho())?;
    let bad = radiated_energy(&lossy, &ctl())?.balance_ratio;
    let tol = ctx.tol(BALANCE_TOL);
    let holds = (good - 1.0).abs() <= tol;
    let fails = (bad - 1.0).abs() > BALANCE_TOL;
    outcome(
        holds && fails,
        format!("rho = 0.005, K = 3: ratio {good:.4} (within {tol}); R1 = 0.5, R2 = 0.99: ratio {bad:.4} (off by > {BALANCE_TOL})"),
    )
}

fn acceptance_oracle_equivalence(ctx: &Ctx) -> Result<Outcome> {
    let split = point_split_deviation()?;
    let parseval = parseval_deficit()?;
    let composed = composition_constant(&[1, 2, 5, 10, 20, 40])?;
    let ok = split < ctx.tol(POINT_SPLIT_TOL) && parseval < ctx.tol(PARSEVAL_TOL) && composed <= ctx.tol(BETA_SQUARED_CONST);
    outcome(
        ok,
        format!(
            "point split {split:.2e} (tol {:.0e}); Parseval deficit {parseval:.2e} (tol {:.0e}); \
             composed maps C = {composed:.3} up to p = 40 (bound {})",
            ctx.tol(POINT_SPLIT_TOL),
            ctx.tol(PARSEVAL_TOL),
            ctx.tol(BETA_SQUARED_CONST)
        ),
    )
}

fn acceptance_single_round_trip(ctx: &Ctx) -> Result<Outcome> {
    let rho = LOW_LOSS_RHO;
    let r = (-2.0 * rho).exp();
    let alpha = 0.4 * rho;
    let one = CavityConfig::symmetric(1, 1.0, r, alpha)?;
    let three = CavityConfig::symmetric(3, 1.0, r, alpha)?;
    let (i1, i3) = (intracavity_energy(&one, &ctl())?, intracavity_energy(&three, &ctl())?);
    let (a1, a3) = (approx_energies(&one).intracavity, approx_energies(&three).intracavity);
    let quiet = i1 < ctx.tol(K1_INTRACAVITY_RATIO) * i3 && a1 < ctx.tol(K1_INTRACAVITY_RATIO) * a3;
    let e1 = radiated_energy(&one, &ctl())?.e_total;
    let single = alpha * alpha / 6.0;
    let dev = (e1 / single - 1.0).abs();
    let close = dev < ctx.tol(K1_ENERGY_TOL);
    outcome(
        quiet && close,
        format!(
            "rho = {rho:e}, alpha = 0.4 rho: intracavity K=1/K=3 = {:.2e} (approx {:.1e}, bound {:.0e}); \
             E(K=1) / (alpha^2/6) = {:.4} (tol {:.0e})",
            i1 / i3,
            a1 / a3,
            ctx.tol(K1_INTRACAVITY_RATIO),
            e1 / single,
            ctx.tol(K1_ENERGY_TOL)
        ),
    )
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn names_are_unique() {
        let mut names: Vec<_> = check_names().collect();
        let n = names.len();
        names.sort();
        names.dedup();
        assert_eq!(names.len(), n);
    }

    #[test]
    fn tightened_tolerance_fails_by_name() {
        let opts = VerifyOptions {
            tolerance_scale: 1e-30,
            filter: vec!["homography.mean_derivative".into()],
        };
        let res = run(&opts);
        assert_eq!(res.len(), 1);
        assert!(!res[0].passed);
        assert!(run(&VerifyOptions {
            filter: opts.filter.clone(),
            ..VerifyOptions::default()
        })[0]
            .passed);
    }
}
