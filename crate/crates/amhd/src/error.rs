use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("grid: {0}")]
    Grid(String),

    #[error("shape mismatch: {0}")]
    Shape(String),

    #[error("domain: {0}")]
    Domain(String),

    #[error("config line {line}: {msg}")]
    Config { line: usize, msg: String },

    #[error("checkpoint: {0}")]
    Checkpoint(String),

    #[error("ledger: {0}")]
    Ledger(String),

    #[error("usage: {0}")]
    Usage(String),

    #[error("vacuum at t = {t:.6}: min rho = {min_rho:.6e} below floor {floor:.1e}")]
    Vacuum { t: f64, min_rho: f64, floor: f64 },

    #[error("blow-up at t = {t:.6}: non-finite value in {what}")]
    BlowUp { t: f64, what: String },

    #[error("density excursion at t = {t:.6}: sup|rho - 1| = {sup_a:.4} exceeds 1/2")]
    DensityGuard { t: f64, sup_a: f64 },

    #[error("time step too large at t = {t:.6}: dt = {dt:.4e} exceeds advective limit {limit:.4e}")]
    Cfl { t: f64, dt: f64, limit: f64 },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
