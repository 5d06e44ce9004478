use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("{what} = {value} is outside its domain ({expected})")]
    Domain {
        what: &'static str,
        value: f64,
        expected: &'static str,
    },

    #[error("visibility {visibility_km} km is unsupported: {band}")]
    UnsupportedVisibility { visibility_km: f64, band: &'static str },

    #[error("rank {rank} is out of range 1..={count}")]
    RankOutOfRange { rank: usize, count: usize },

    #[error("quadrature did not converge: achieved error {achieved:e}, requested {requested:e}")]
    Quadrature { achieved: f64, requested: f64 },

    #[error("{got} Monte Carlo trials requested, at least {min} required")]
    TooFewTrials { got: u64, min: u64 },

    #[error("invalid configuration: {0}")]
    Config(String),
}

impl Error {
    pub(crate) fn domain(what: &'static str, value: f64, expected: &'static str) -> Self {
        Error::Domain {
            what,
            value,
            expected,
        }
    }

    /// True for failures of the numerical machinery rather than of the inputs.
    pub fn is_numeric(&self) -> bool {
        matches!(self, Error::Quadrature { .. })
    }
}
