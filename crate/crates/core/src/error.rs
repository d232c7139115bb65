use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("domain error: {0}")]
    Domain(String),

    #[error("time step {dt} exceeds the stability limit {limit}")]
    StepSize { dt: f64, limit: f64 },

    #[error("step-halving check failed: {quantity} changed by {change:.3e} (limit {limit:.1e})")]
    Instability {
        quantity: &'static str,
        change: f64,
        limit: f64,
    },

    #[error("singular system (condition estimate {condition:.3e})")]
    Singular { condition: f64 },

    #[error("atoms {first} and {second} are closer than {min_separation} wavelengths")]
    Overlap {
        first: usize,
        second: usize,
        min_separation: f64,
    },

    #[error("resonance fit failed: {0}")]
    FitFailure(String),

    #[error("lattice sum did not converge: change {change:.3e} exceeds tolerance {tolerance:.1e}")]
    NonConvergence { change: f64, tolerance: f64 },

    #[error("outside the valid range: {0}")]
    Range(String),

    #[error("kernel consistency check failed: {0}")]
    Assertion(String),

    #[error("i/o: {0}")]
    Io(#[from] std::io::Error),

    #[error("csv: {0}")]
    Csv(#[from] csv::Error),

    #[error("json: {0}")]
    Json(#[from] serde_json::Error),

    #[error("parse error: {0}")]
    Parse(String),
}

impl Error {
    /// True for failures of a numerical method rather than of the inputs.
    pub fn is_numerical(&self) -> bool {
        matches!(
            self,
            Error::StepSize { .. }
                | Error::Instability { .. }
                | Error::Singular { .. }
                | Error::FitFailure(_)
                | Error::NonConvergence { .. }
                | Error::Assertion(_)
        )
    }
}
