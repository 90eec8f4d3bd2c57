//! Command execution. Every command renders its artifact to bytes; writing
//! is left to the caller.

use std::f64::consts::PI;

use dce_core::iteration::{threshold_status, CavityConfig};
use dce_core::quadrature::point_split_density;
use dce_core::radiation_cavity::{radiated_energy, sample_density, sample_spectrum, EnergyReport};
use dce_core::radiation_single::{energy_density_single, energy_per_period_single_on, spectrum_single};
use dce_core::verify::{self, Check, Kind, VerifyOptions};
use rayon::prelude::*;
use serde::Serialize;

use crate::config::{Command, Format, Physics, RunConfig, SweepAlpha, SweepConfig};
use crate::render::{csv, json, num};
use crate::CliError;

pub const THREADS_ENV: &str = "DCE_THREADS";

pub struct RunOutput {
    pub bytes: Vec<u8>,
    /// Set by `verify` when a check failed.
    pub failed: bool,
}

impl From<Vec<u8>> for RunOutput {
    fn from(bytes: Vec<u8>) -> Self {
        RunOutput { bytes, failed: false }
    }
}

/// Thread count from the config, else `DCE_THREADS`, else rayon's default.
pub fn thread_count(cfg: &RunConfig) -> Result<Option<usize>, CliError> {
    let n = match cfg.threads {
        Some(n) => Some(n),
        None => match std::env::var(THREADS_ENV) {
            Ok(v) => Some(
                v.trim()
                    .parse()
                    .map_err(|_| CliError::Usage(format!("{THREADS_ENV} must be a positive integer, got {v:?}")))?,
            ),
            Err(_) => None,
        },
    };
    if n == Some(0) {
        return Err(CliError::Usage("thread count must be positive".into()));
    }
    Ok(n)
}

/// Runs `cfg` on a dedicated pool.
pub fn execute(cfg: &RunConfig) -> Result<RunOutput, CliError> {
    let mut pool = rayon::ThreadPoolBuilder::new();
    if let Some(n) = thread_count(cfg)? {
        pool = pool.num_threads(n);
    }
    let pool = pool
        .build()
        .map_err(|e| CliError::Io(std::io::Error::other(e)))?;
    pool.install(|| dispatch(cfg))
}

fn dispatch(cfg: &RunConfig) -> Result<RunOutput, CliError> {
    cfg.series.control().validate()?;
    match cfg.command {
        Command::EnergyDensity => energy_density(cfg).map(Into::into),
        Command::Spectrum => spectrum(cfg).map(Into::into),
        Command::Energy => energy(cfg).map(Into::into),
        Command::Sweep => sweep(cfg).map(Into::into),
        Command::Verify => verify(cfg),
    }
}

#[derive(Serialize)]
struct DensityTable<'a> {
    u_over_period: &'a [f64],
    e_u: &'a [f64],
    units: &'static str,
}

fn energy_density(cfg: &RunConfig) -> Result<Vec<u8>, CliError> {
    let points = cfg.density.points;
    if points == 0 {
        return Err(CliError::Usage("--points must be positive".into()));
    }
    let (u, e) = match cfg.physics()? {
        Physics::Cavity(spec) => {
            let s = sample_density(&spec.build()?, points, cfg.density.denominators)?;
            if cfg.format == Format::Json {
                return json(&s);
            }
            (s.u_over_period, s.e_u)
        }
        Physics::Single(single) => {
            single.validate()?;
            let grid = cfg.grid.spec();
            grid.validate()?;
            let period = 2.0 * PI / single.omega;
            let u: Vec<f64> = (0..points).map(|j| j as f64 / points as f64).collect();
            let e = u
                .par_iter()
                .map(|x| -> Result<f64, CliError> {
                    let t = x * period;
                    if cfg.density.point_split {
                        let w = single.omega;
                        let split = point_split_density(&single.mirror()?, t, w, &grid)?;
                        Ok(single.reflectivity * split.value / (w * w))
                    } else {
                        Ok(energy_density_single(single, t)?)
                    }
                })
                .collect::<Result<Vec<_>, _>>()?;
            (u, e)
        }
    };
    match cfg.format {
        Format::Json => json(&DensityTable {
            u_over_period: &u,
            e_u: &e,
            units: "hbar*Omega^2",
        }),
        Format::Csv => csv(
            &["u_over_period", "e_u_in_hbar_Omega2"],
            u.iter().zip(&e).map(|(a, b)| vec![num(*a), num(*b)]),
        ),
    }
}

#[derive(Serialize)]
struct SingleSpectrum<'a> {
    nu: &'a [f64],
    n_nu: &'a [f64],
}

fn spectrum(cfg: &RunConfig) -> Result<Vec<u8>, CliError> {
    let sc = &cfg.spectrum;
    if sc.points == 0 || !(sc.nu_max > 0.0 && sc.nu_max.is_finite()) {
        return Err(CliError::Usage("spectrum needs --points > 0 and a finite --nu-max > 0".into()));
    }
    match cfg.physics()? {
        Physics::Cavity(spec) => {
            let s = sample_spectrum(&spec.build()?, sc.nu_max, sc.points, &cfg.spectrum_options(), sc.envelope)?;
            match cfg.format {
                Format::Json => json(&s),
                Format::Csv => match &s.n_nu_envelope {
                    Some(env) => csv(
                        &["nu", "n_nu", "n_nu_envelope"],
                        (0..s.nu.len()).map(|j| vec![num(s.nu[j]), num(s.n_nu[j]), num(env[j])]),
                    ),
                    None => csv(&["nu", "n_nu"], (0..s.nu.len()).map(|j| vec![num(s.nu[j]), num(s.n_nu[j])])),
                },
            }
        }
        Physics::Single(single) => {
            if sc.envelope {
                return Err(CliError::Usage("--envelope applies to cavities only".into()));
            }
            let ctl = cfg.series.control();
            let nu: Vec<f64> = (1..=sc.points).map(|j| sc.nu_max * j as f64 / sc.points as f64).collect();
            let n = nu
                .par_iter()
                .map(|&x| spectrum_single(single, x, &ctl))
                .collect::<Result<Vec<_>, _>>()?;
            match cfg.format {
                Format::Json => json(&SingleSpectrum { nu: &nu, n_nu: &n }),
                Format::Csv => csv(&["nu", "n_nu"], nu.iter().zip(&n).map(|(a, b)| vec![num(*a), num(*b)])),
            }
        }
    }
}

const ENERGY_COLUMNS: &[&str] = &[
    "e_u",
    "e_v",
    "e_total",
    "e_intracavity",
    "approx_e",
    "approx_intracavity",
    "approx_valid",
    "balance_ratio",
    "threshold_status",
];

fn energy_fields(r: &EnergyReport) -> Vec<String> {
    vec![
        num(r.e_u),
        num(r.e_v),
        num(r.e_total),
        num(r.e_intracavity),
        num(r.approx_e),
        num(r.approx_intracavity),
        r.approx_flags.valid().to_string(),
        num(r.balance_ratio),
        r.threshold_status.to_string(),
    ]
}

fn energy(cfg: &RunConfig) -> Result<Vec<u8>, CliError> {
    match cfg.physics()? {
        Physics::Cavity(spec) => {
            let rep = radiated_energy(&spec.build()?, &cfg.series.control())?;
            match cfg.format {
                Format::Json => json(&rep),
                Format::Csv => csv(ENERGY_COLUMNS, [energy_fields(&rep)]),
            }
        }
        Physics::Single(single) => {
            let e = energy_per_period_single_on(single, &cfg.grid.spec())?;
            match cfg.format {
                Format::Json => json(&e),
                Format::Csv => csv(&["closed_form", "quadrature"], [vec![num(e.closed_form), num(e.quadrature)]]),
            }
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct SweepRow {
    pub index: usize,
    pub k: u32,
    pub rho: f64,
    pub alpha: f64,
    pub alpha_eff: f64,
    pub report: Option<EnergyReport>,
    pub threshold_status: String,
    pub error: Option<String>,
}

/// Grid points in input order: `K` outermost, then `ρ`, then `α`.
pub fn sweep_points(s: &SweepConfig) -> Vec<(u32, f64, f64)> {
    let mut pts = Vec::new();
    for &k in &s.k {
        for &rho in &s.rho {
            match &s.alpha {
                SweepAlpha::Values(a) => pts.extend(a.iter().map(|&a| (k, rho, a))),
                SweepAlpha::OverRho(f) => pts.extend(f.iter().map(|&f| (k, rho, f * rho))),
            }
        }
    }
    pts
}

fn sweep_row(index: usize, (k, rho, alpha): (u32, f64, f64), omega: f64, cfg: &RunConfig) -> SweepRow {
    let mut row = SweepRow {
        index,
        k,
        rho,
        alpha,
        alpha_eff: 2.0 * alpha / rho,
        report: None,
        threshold_status: String::new(),
        error: None,
    };
    let built = CavityConfig::symmetric(k, omega, (-2.0 * rho).exp(), alpha);
    match built {
        Ok(c) => {
            row.threshold_status = threshold_status(&c).as_str().to_string();
            match radiated_energy(&c, &cfg.series.control()) {
                Ok(rep) => row.report = Some(rep),
                Err(e) => row.error = Some(e.identity().to_string()),
            }
        }
        Err(e) => row.error = Some(e.identity().to_string()),
    }
    row
}

fn sweep(cfg: &RunConfig) -> Result<Vec<u8>, CliError> {
    let s = cfg
        .sweep
        .as_ref()
        .ok_or_else(|| CliError::Usage("sweep needs a grid over K, rho and alpha".into()))?;
    let pts = sweep_points(s);
    if pts.is_empty() {
        return Err(CliError::Usage("sweep grid is empty".into()));
    }
    let rows: Vec<SweepRow> = pts
        .par_iter()
        .enumerate()
        .map(|(i, &p)| sweep_row(i, p, s.omega, cfg))
        .collect();
    match cfg.format {
        Format::Json => json(&rows),
        Format::Csv => {
            let mut header = vec!["index", "K", "rho", "alpha", "alpha_eff"];
            header.extend_from_slice(ENERGY_COLUMNS);
            header.push("error");
            csv(
                &header,
                rows.iter().map(|r| {
                    let mut f = vec![r.index.to_string(), r.k.to_string(), num(r.rho), num(r.alpha), num(r.alpha_eff)];
                    match &r.report {
                        Some(rep) => f.extend(energy_fields(rep)),
                        None => {
                            f.extend(std::iter::repeat_n(String::new(), ENERGY_COLUMNS.len() - 1));
                            f.push(r.threshold_status.clone());
                        }
                    }
                    f.push(r.error.clone().unwrap_or_default());
                    f
                }),
            )
        }
    }
}

fn verify(cfg: &RunConfig) -> Result<RunOutput, CliError> {
    let opts = VerifyOptions {
        tolerance_scale: cfg.verify.tolerance_scale,
        filter: cfg.verify.filter.clone(),
    };
    let mut checks = verify::run(&opts);
    for (name, f) in [
        ("cli.config_round_trip", config_round_trip as fn() -> Result<(bool, String), CliError>),
        ("cli.csv_determinism", csv_determinism),
    ] {
        if !opts.filter.is_empty() && !opts.filter.iter().any(|p| name.contains(p.as_str())) {
            continue;
        }
        let start = std::time::Instant::now();
        let (passed, detail) = f().unwrap_or_else(|e| (false, format!("error [{}]: {e}", e.identity())));
        checks.push(Check {
            name,
            kind: Kind::Invariant,
            passed,
            detail,
            seconds: start.elapsed().as_secs_f64(),
        });
    }
    if checks.is_empty() {
        return Err(CliError::Usage("no check matches the filter".into()));
    }
    let failed = checks.iter().any(|c| !c.passed);
    let bytes = match cfg.format {
        Format::Json => json(&checks)?,
        Format::Csv => csv(
            &["status", "kind", "name", "seconds", "detail"],
            checks.iter().map(|c| {
                vec![
                    if c.passed { "PASS" } else { "FAIL" }.to_string(),
                    match c.kind {
                        Kind::Invariant => "invariant",
                        Kind::Acceptance => "acceptance",
                    }
                    .to_string(),
                    c.name.to_string(),
                    format!("{:.3}", c.seconds),
                    c.detail.clone(),
                ]
            }),
        )?,
    };
    Ok(RunOutput { bytes, failed })
}

fn sample_configs() -> Result<Vec<RunConfig>, CliError> {
    use crate::config::CavitySpec;
    use dce_core::radiation_single::SingleMirrorConfig;
    let c = CavityConfig::with_alpha_eff(3, 1.0, 0.9, 0.9, 0.5)?;
    let spec = CavitySpec {
        k: c.k(),
        omega: c.omega(),
        r1: c.r1(),
        r2: c.r2(),
        alpha: c.alpha(),
    };
    let mut density = RunConfig::new(Command::EnergyDensity);
    density.physics = Some(Physics::Cavity(spec));
    density.density.points = 64;
    let mut spectrum = RunConfig::new(Command::Spectrum);
    spectrum.physics = Some(Physics::Cavity(spec));
    spectrum.spectrum.points = 200;
    spectrum.spectrum.nu_max = 2.0;
    let mut single = RunConfig::new(Command::Energy);
    single.physics = Some(Physics::Single(SingleMirrorConfig::new(0.7, 0.3, 1.3)?));
    let mut sweep = RunConfig::new(Command::Sweep);
    sweep.sweep = Some(SweepConfig {
        omega: 1.0,
        k: vec![1, 3],
        rho: vec![0.005, 0.05],
        alpha: SweepAlpha::OverRho(vec![0.1, 0.45, 1.0]),
    });
    Ok(vec![density, spectrum, single, sweep])
}

fn config_round_trip() -> Result<(bool, String), CliError> {
    let configs = sample_configs()?;
    let mut ok = true;
    for c in &configs {
        let text = c.to_json();
        let back = RunConfig::from_json(&text)?;
        ok &= back == *c && back.to_json() == text;
    }
    Ok((ok, format!("{} configs serialize byte-identically after a round trip", configs.len())))
}

fn csv_determinism() -> Result<(bool, String), CliError> {
    let mut ok = true;
    for c in sample_configs()?.iter().filter(|c| c.command != Command::Energy) {
        let mut outputs = Vec::new();
        for threads in [1, 1, 4] {
            let mut c = c.clone();
            c.threads = Some(threads);
            c.format = Format::Csv;
            outputs.push(execute(&c)?.bytes);
        }
        ok &= outputs.windows(2).all(|w| w[0] == w[1]);
    }
    Ok((ok, "density, spectrum and sweep CSV identical across runs and 1/4 threads".into()))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sweep_order_is_k_major() {
        let s = SweepConfig {
            omega: 1.0,
            k: vec![1, 2],
            rho: vec![0.01, 0.02],
            alpha: SweepAlpha::OverRho(vec![0.5]),
        };
        let pts = sweep_points(&s);
        assert_eq!(pts, vec![(1, 0.01, 0.005), (1, 0.02, 0.01), (2, 0.01, 0.005), (2, 0.02, 0.01)]);
    }

    #[test]
    fn divergent_sweep_point_is_recorded_in_row() {
        let cfg = RunConfig::new(Command::Sweep);
        let row = sweep_row(0, (2, 0.01, 0.01), 1.0, &cfg);
        assert_eq!(row.threshold_status, "energy_divergent");
        assert_eq!(row.error.as_deref(), Some("energy_divergent"));
        assert!(row.report.is_none());
    }

    #[test]
    fn cli_invariants_hold() {
        assert!(config_round_trip().unwrap().0);
        assert!(csv_determinism().unwrap().0);
    }
}
