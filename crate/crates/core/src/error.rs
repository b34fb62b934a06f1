use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ScheduleError {
    #[error("time {t} outside schedule domain [{lo}, {hi}]")]
    TimeOutOfDomain { t: f64, lo: f64, hi: f64 },
    #[error("lambda {lam} outside representable interval [{lo}, {hi}]")]
    LambdaOutOfRange { lam: f64, lo: f64, hi: f64 },
    #[error("invalid schedule parameter: {0}")]
    InvalidParameter(String),
    #[error("invalid grid: {0}")]
    InvalidGrid(String),
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum PredictorError {
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimMismatch { expected: usize, got: usize },
    #[error("transform singular at t = {t} (sigma_t = 0)")]
    SingularTime { t: f64 },
    #[error(transparent)]
    Schedule(#[from] ScheduleError),
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SamplerError {
    #[error("invalid sampler spec: {0}")]
    InvalidSpec(String),
    #[error("nonpositive log-SNR step h = {h} from t = {t_prev} to t = {t_next}")]
    NonpositiveStep { h: f64, t_prev: f64, t_next: f64 },
    #[error("degenerate posterior variance {beta} at t = {t}")]
    DegenerateVariance { beta: f64, t: f64 },
    #[error("non-finite state produced at step {step}")]
    NonFinite { step: usize },
    #[error("order-2 step requires two buffered model outputs")]
    BufferUnderflow,
    #[error(transparent)]
    Schedule(#[from] ScheduleError),
    #[error(transparent)]
    Predictor(#[from] PredictorError),
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum DiagnosticsError {
    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),
    #[error("trajectory has too few {what}: need {need}, got {got}")]
    TooFew {
        what: &'static str,
        need: usize,
        got: usize,
    },
    #[error("invalid input: {0}")]
    InvalidInput(String),
}
