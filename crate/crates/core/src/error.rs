use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid chain: {0}")]
    InvalidChain(String),

    #[error("invalid protocol: {0}")]
    InvalidProtocol(String),

    #[error("gapless mode at k = {k}: h_k and Delta_k both vanish")]
    Degenerate { k: f64 },

    #[error("integrator step size underflow at t = {t} (h = {step:e})")]
    StepUnderflow { t: f64, step: f64 },

    #[error("mode density matrix lost positivity at t = {t}: min eigenvalue {min_eig:e}")]
    Positivity { t: f64, min_eig: f64 },

    #[error("evolution of mode k = {k} failed: {source}")]
    Mode {
        k: f64,
        #[source]
        source: Box<Error>,
    },

    #[error("odd-length Majorana string ({0} operators)")]
    OddString(usize),

    #[error("noise-averaged Wick expansion supports at most 4 operators, got {0}")]
    LongString(usize),

    #[error("Majorana separation {r} outside the contraction table (max {max})")]
    OutOfTable { r: i64, max: usize },

    #[error("reduced density matrix not positive: {0}")]
    NotPositive(String),

    #[error("oracle chain too large: N = {0} (max 12)")]
    OracleTooLarge(usize),

    #[error("off-X leakage {leak:e} exceeds tolerance {tol:e}")]
    OffXLeakage { leak: f64, tol: f64 },

    #[error("fit failed: {0}")]
    Fit(String),
}
