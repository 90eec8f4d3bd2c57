use thiserror::Error;

/// Failure modes shared by every computation in the crate.
///
/// The two threshold variants are deliberately distinct: the energy density
/// diverges first (at `α_eff = 1`), the period-integrated energies only at
/// `α = ρ`.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("domain error: {0}")]
    Domain(String),

    #[error("resource limit reached: {0}")]
    Resource(String),

    #[error(
        "energy density diverges above the parametric threshold: alpha_eff = {alpha_eff} >= 1 \
         (beta_eff is capped at th(1) = {beta_eff_cap:.4})"
    )]
    DensityDivergence { alpha_eff: f64, beta_eff_cap: f64 },

    #[error("radiated energy diverges: alpha = {alpha} >= rho = {rho}")]
    EnergyDivergence { alpha: f64, rho: f64 },
}

impl Error {
    /// Short stable identifier, used on the diagnostic stream and in sweep rows.
    pub fn identity(&self) -> &'static str {
        match self {
            Error::InvalidInput(_) => "invalid_input",
            Error::Domain(_) => "domain",
            Error::Resource(_) => "resource",
            Error::DensityDivergence { .. } => "density_divergent",
            Error::EnergyDivergence { .. } => "energy_divergent",
        }
    }

    pub fn is_divergence(&self) -> bool {
        matches!(
            self,
            Error::DensityDivergence { .. } | Error::EnergyDivergence { .. }
        )
    }
}

pub type Result<T> = std::result::Result<T, Error>;
