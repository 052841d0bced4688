use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("undefined reference current: oscillator amplitude is zero")]
    ZeroAmplitude,

    #[error("domain error: {0}")]
    Domain(String),

    #[error("singular coefficient: {0}")]
    SingularCoefficient(String),

    #[error("degenerate voltage range: v_p_max ({v_p_max} V) must exceed v_p0 ({v_p0} V)")]
    DegenerateVoltageRange { v_p0: f64, v_p_max: f64 },

    #[error("infeasible design: {0}")]
    InfeasibleDesign(String),

    #[error("floating node at t={t} s: grid breaker and load are both open")]
    FloatingNode { t: f64 },

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("divergence at t={t} s")]
    Divergence { t: f64, last_state: Vec<f64> },

    #[error("not settled")]
    NotSettled,

    #[error("no convergence after {iterations} iterations (residual {residual:e})")]
    NoConvergence { iterations: usize, residual: f64 },

    #[error("eigen non-convergence")]
    EigenNonConvergence,

    #[error("no instability in bracket [{lo}, {hi}]")]
    NoInstabilityInBracket { lo: f64, hi: f64 },

    #[error("no synchronized equilibrium")]
    NoSynchronizedEquilibrium,
}
