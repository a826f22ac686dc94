use thiserror::Error;

#[derive(Debug, Error)]
pub enum LabError {
    #[error("configuration error: {0}")]
    Config(String),
    #[error("domain error: {0}")]
    Domain(String),
    #[error("zero-frequency singularity: mean {mean:.3e} exceeds tolerance for s = {s}")]
    ZeroFrequencySingularity { s: f64, mean: f64 },
    #[error("parameter error: {0}")]
    Parameter(String),
    #[error("diagonal/off-domain input: {0}")]
    OffDomain(String),
    #[error("resolution error: {0}")]
    Resolution(String),
    #[error("degenerate datum: {0}")]
    Degenerate(String),
    #[error("horizon error: {0}")]
    Horizon(String),
    #[error("instability at t = {t:.6}: {detail}")]
    Instability { t: f64, detail: String },
    #[error("no concentration: {0}")]
    NoConcentration(String),
    #[error("insufficient states: {0}")]
    InsufficientStates(String),
    #[error("admissibility violated: {}", .0.join("; "))]
    Inadmissible(Vec<String>),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub type Result<T> = std::result::Result<T, LabError>;
