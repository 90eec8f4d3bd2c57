use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use dce_core::iteration::CavityConfig;
use dce_core::quadrature::GridSpec;
use dce_core::radiation_cavity::Denominators;
use dce_core::radiation_single::SingleMirrorConfig;
use dce_cli::config::{CavitySpec, Command, Format, Physics, RunConfig, SweepAlpha, SweepConfig};
use dce_cli::run::execute;
use dce_cli::CliError;

#[derive(Parser)]
#[command(name = "dce", version, about = "Radiation from oscillating mirrors and cavities")]
struct Cli {
    #[command(subcommand)]
    command: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Energy density e_u over one period.
    EnergyDensity {
        #[command(flatten)]
        physics: PhysicsArgs,
        /// Samples per period.
        #[arg(long, default_value_t = 4096)]
        points: usize,
        #[arg(long, value_enum, default_value_t = DenomArg::Static)]
        denominators: DenomArg,
        /// Single mirror: evaluate by point splitting.
        #[arg(long)]
        point_split: bool,
        /// Point-splitting separations, halving from 1e-2/Omega.
        #[arg(long)]
        eps_levels: Option<usize>,
        #[command(flatten)]
        common: Common,
    },
    /// Spectrum n_nu on (0, nu_max].
    Spectrum {
        #[command(flatten)]
        physics: PhysicsArgs,
        #[arg(long, default_value_t = 1000)]
        points: usize,
        #[arg(long, default_value_t = 3.0)]
        nu_max: f64,
        /// Also compute the envelope without round-trip phases.
        #[arg(long)]
        envelope: bool,
        #[arg(long)]
        harmonic_tol: Option<f64>,
        #[command(flatten)]
        common: Common,
    },
    /// Radiated and intracavity energy per period.
    Energy {
        #[command(flatten)]
        physics: PhysicsArgs,
        #[command(flatten)]
        common: Common,
    },
    /// Energy report over a grid of symmetric cavities.
    Sweep {
        #[arg(long = "K", value_delimiter = ',', required = true)]
        k: Vec<u32>,
        #[arg(long, value_delimiter = ',', required = true)]
        rho: Vec<f64>,
        #[arg(long, value_delimiter = ',', required_unless_present = "alpha_over_rho")]
        alpha: Vec<f64>,
        /// Rapidities as fractions of rho.
        #[arg(long, value_delimiter = ',', conflicts_with = "alpha")]
        alpha_over_rho: Vec<f64>,
        #[arg(long = "Omega", default_value_t = 1.0)]
        omega: f64,
        #[command(flatten)]
        common: Common,
    },
    /// Run the invariant and acceptance checks.
    Verify {
        /// Run only checks whose name contains one of these substrings.
        #[arg(long, value_delimiter = ',')]
        filter: Vec<String>,
        /// Multiplies every tolerance.
        #[arg(long, default_value_t = 1.0)]
        tolerance_scale: f64,
        #[command(flatten)]
        common: Common,
    },
    /// Execute a saved JSON run configuration.
    Run { config: PathBuf },
}

#[derive(Args)]
struct PhysicsArgs {
    #[arg(long = "K")]
    k: Option<u32>,
    #[arg(long = "Omega", default_value_t = 1.0)]
    omega: f64,
    #[arg(long, conflicts_with = "alpha_eff")]
    alpha: Option<f64>,
    #[arg(long)]
    alpha_eff: Option<f64>,
    /// Geometric mean amplitude reflectivity sqrt(R1 R2).
    #[arg(long, conflicts_with_all = ["rho", "r1", "r2"])]
    r: Option<f64>,
    /// Loss rate, r = exp(-2 rho).
    #[arg(long, conflicts_with_all = ["r1", "r2"])]
    rho: Option<f64>,
    #[arg(long = "R1", requires = "r2")]
    r1: Option<f64>,
    #[arg(long = "R2", requires = "r1")]
    r2: Option<f64>,
    /// Single moving mirror instead of a cavity.
    #[arg(long)]
    single: bool,
    /// Single mirror intensity reflectivity.
    #[arg(long, default_value_t = 1.0)]
    reflectivity: f64,
}

#[derive(Args)]
struct Common {
    /// Relative tolerance of the hypergeometric series.
    #[arg(long)]
    tol: Option<f64>,
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, value_enum)]
    format: Option<FormatArg>,
    #[arg(long)]
    threads: Option<usize>,
    /// Write the equivalent JSON run configuration here and exit.
    #[arg(long)]
    save_config: Option<PathBuf>,
}

#[derive(Clone, Copy, ValueEnum)]
enum FormatArg {
    Csv,
    Json,
}

#[derive(Clone, Copy, ValueEnum)]
enum DenomArg {
    Static,
    Dynamic,
}

fn usage(msg: impl Into<String>) -> CliError {
    CliError::Usage(msg.into())
}

impl PhysicsArgs {
    fn build(&self) -> Result<Physics, CliError> {
        if self.single {
            let alpha = self.alpha.ok_or_else(|| usage("--single needs --alpha"))?;
            return Ok(Physics::Single(SingleMirrorConfig::new(self.reflectivity, alpha, self.omega)?));
        }
        let k = self.k.ok_or_else(|| usage("a cavity needs --K"))?;
        let (r1, r2) = match (self.r, self.rho, self.r1, self.r2) {
            (Some(r), None, None, None) => (r, r),
            (None, Some(rho), None, None) => {
                let r = (-2.0 * rho).exp();
                (r, r)
            }
            (None, None, Some(a), Some(b)) => (a, b),
            _ => return Err(usage("give exactly one of --r, --rho or --R1 with --R2")),
        };
        let c = match (self.alpha, self.alpha_eff) {
            (Some(a), None) => CavityConfig::new(k, self.omega, r1, r2, a)?,
            (None, Some(a)) => CavityConfig::with_alpha_eff(k, self.omega, r1, r2, a)?,
            _ => return Err(usage("give exactly one of --alpha or --alpha-eff")),
        };
        Ok(Physics::Cavity(CavitySpec {
            k: c.k(),
            omega: c.omega(),
            r1: c.r1(),
            r2: c.r2(),
            alpha: c.alpha(),
        }))
    }
}

impl Common {
    fn apply(&self, cfg: &mut RunConfig) {
        if let Some(t) = self.tol {
            cfg.series.rel_tol = t;
        }
        cfg.output = self.out.clone();
        if let Some(f) = self.format {
            cfg.format = match f {
                FormatArg::Csv => Format::Csv,
                FormatArg::Json => Format::Json,
            };
        }
        cfg.threads = self.threads;
    }
}

/// The run configuration, plus where to save it instead of running.
fn to_config(cmd: Cmd) -> Result<(RunConfig, Option<PathBuf>), CliError> {
    let (cfg, common) = match cmd {
        Cmd::EnergyDensity {
            physics,
            points,
            denominators,
            point_split,
            eps_levels,
            common,
        } => {
            let mut cfg = RunConfig::new(Command::EnergyDensity);
            cfg.physics = Some(physics.build()?);
            cfg.density.points = points;
            cfg.density.denominators = match denominators {
                DenomArg::Static => Denominators::Static,
                DenomArg::Dynamic => Denominators::Dynamic,
            };
            cfg.density.point_split = point_split;
            if let Some(levels) = eps_levels {
                if levels == 0 {
                    return Err(usage("--eps-levels must be positive"));
                }
                cfg.grid.eps_sequence = GridSpec::halving_eps(levels);
            }
            (cfg, common)
        }
        Cmd::Spectrum {
            physics,
            points,
            nu_max,
            envelope,
            harmonic_tol,
            common,
        } => {
            let mut cfg = RunConfig::new(Command::Spectrum);
            cfg.physics = Some(physics.build()?);
            cfg.spectrum.points = points;
            cfg.spectrum.nu_max = nu_max;
            cfg.spectrum.envelope = envelope;
            if let Some(t) = harmonic_tol {
                cfg.spectrum.harmonic_tol = t;
            }
            (cfg, common)
        }
        Cmd::Energy { physics, common } => {
            let mut cfg = RunConfig::new(Command::Energy);
            cfg.physics = Some(physics.build()?);
            (cfg, common)
        }
        Cmd::Sweep {
            k,
            rho,
            alpha,
            alpha_over_rho,
            omega,
            common,
        } => {
            let mut cfg = RunConfig::new(Command::Sweep);
            cfg.sweep = Some(SweepConfig {
                omega,
                k,
                rho,
                alpha: if alpha.is_empty() {
                    SweepAlpha::OverRho(alpha_over_rho)
                } else {
                    SweepAlpha::Values(alpha)
                },
            });
            (cfg, common)
        }
        Cmd::Verify {
            filter,
            tolerance_scale,
            common,
        } => {
            let mut cfg = RunConfig::new(Command::Verify);
            cfg.verify.filter = filter;
            cfg.verify.tolerance_scale = tolerance_scale;
            (cfg, common)
        }
        Cmd::Run { config } => {
            let text = std::fs::read_to_string(&config)
                .map_err(|e| usage(format!("cannot read {}: {e}", config.display())))?;
            return Ok((RunConfig::from_json(&text)?, None));
        }
    };
    let mut cfg = cfg;
    common.apply(&mut cfg);
    Ok((cfg, common.save_config))
}

fn main_inner(cli: Cli) -> Result<bool, CliError> {
    let (cfg, save) = to_config(cli.command)?;
    if let Some(path) = save {
        std::fs::write(path, cfg.to_json())?;
        return Ok(true);
    }
    let out = execute(&cfg)?;
    match &cfg.output {
        Some(path) => std::fs::write(path, &out.bytes)?,
        None => std::io::stdout().lock().write_all(&out.bytes)?,
    }
    if out.failed {
        eprintln!("error [verify]: one or more checks failed");
    }
    Ok(!out.failed)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match main_inner(cli) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(CliError::Io(e)) if e.kind() == std::io::ErrorKind::BrokenPipe => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error [{}]: {e}", e.identity());
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
