use thiserror::Error;

/// Errors raised by the numerical layers and the simulation engine.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    /// An input violated a documented domain invariant.
    #[error("{0}")]
    Domain(String),

    /// A finite-μ limit was requested outside the ρ = 1, σ_l = σ_u regime.
    #[error("unreachable limit: finite mu requires rho = 1 and sigma_l = sigma_u (ordered bounds force this degeneracy), got rho = {rho}, sigma_l = {sigma_l}, sigma_u = {sigma_u}")]
    UnreachableLimit { rho: f64, sigma_l: f64, sigma_u: f64 },

    /// A root-finder or optimizer could not meet its contract.
    #[error("solver failure: {what} ({diagnostics})")]
    Solver { what: String, diagnostics: String },

    /// The Monte Carlo engine aborted a run.
    #[error("engine abort: {0}")]
    Engine(String),
}

impl Error {
    pub(crate) fn domain(msg: impl Into<String>) -> Self {
        Error::Domain(msg.into())
    }

    pub(crate) fn solver(what: impl Into<String>, diagnostics: impl Into<String>) -> Self {
        Error::Solver { what: what.into(), diagnostics: diagnostics.into() }
    }

    /// True for errors caused by bad inputs rather than numerical trouble.
    pub fn is_domain(&self) -> bool {
        matches!(self, Error::Domain(_) | Error::UnreachableLimit { .. })
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
