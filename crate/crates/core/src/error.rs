use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("resolvent (jωI - A) is singular at ω = {omega} rad/s")]
    SingularResolvent { omega: f64 },

    #[error("transfer function is improper (numerator degree {num} > denominator degree {den})")]
    Improper { num: usize, den: usize },

    #[error("fractional order {nu:.4} is outside the admissible interval [{lo}, {hi}]")]
    Infeasible { nu: f64, lo: f64, hi: f64 },

    #[error("gain normalization failed: {0}")]
    Normalization(String),

    #[error("plant inversion refused: {0}")]
    NonInvertiblePlant(String),

    #[error("decomposition failed: {0}")]
    Decomposition(String),

    #[error("describing function undefined at ω = {omega} rad/s: {reason}")]
    DescribingFunction { omega: f64, reason: &'static str },

    #[error("reset phase lead mismatch: analytic {analytic_deg:.3}°, describing function {numeric_deg:.3}°")]
    PhaseLeadMismatch { analytic_deg: f64, numeric_deg: f64 },

    #[error("numeric first-harmonic estimate did not settle (drift {drift:.3e} between the last two cycles)")]
    OracleUnstable { drift: f64 },

    #[error("closed loop is not Hurwitz (max real part {max_real:.3e})")]
    NotHurwitz { max_real: f64 },

    #[error("simulation diverged at t = {time} s")]
    Divergence { time: f64 },

    #[error("reference profile: {0}")]
    Profile(String),

    #[error("serialization: {0}")]
    Serialization(String),
}

impl From<serde_json::Error> for Error {
    fn from(e: serde_json::Error) -> Self {
        Error::Serialization(e.to_string())
    }
}

impl From<csv::Error> for Error {
    fn from(e: csv::Error) -> Self {
        Error::Serialization(e.to_string())
    }
}
