use thiserror::Error;

/// Errors raised by the workbench.
#[derive(Debug, Error)]
pub enum Error {
    #[error("non-finite value in {0}")]
    Domain(&'static str),
    #[error("invalid parameter `{name}`: {reason}")]
    Parameter { name: &'static str, reason: String },
    #[error("degenerate market: supply and demand elasticities sum to zero")]
    DegenerateMarket,
    #[error("membership index {index} out of range for axis with {count} functions")]
    Index { index: usize, count: usize },
    #[error("{got} training samples for {rules} rules; need at least as many samples as rules")]
    UnderDetermined { got: usize, rules: usize },
    #[error("normal equations are rank deficient; use a positive ridge")]
    RankDeficient,
    #[error("dimension mismatch: {0}")]
    Dimension(String),
    #[error("Q is ill-conditioned (condition number {0:e})")]
    Conditioning(f64),
    #[error("attenuation bracket invalid: {0}")]
    Bracket(String),
    #[error("no certificate: {0}")]
    Infeasible(String),
    #[error("configuration error: {0}")]
    Config(String),
    #[error("integration produced a non-finite state at t = {time}")]
    Integration { time: f64 },
    #[error("state diverged beyond {guard:e} at t = {time}")]
    Divergence { time: f64, guard: f64 },
    #[error("parse error in {file}, line {line}: {message}")]
    Parse { file: String, line: usize, message: String },
    #[error("missing artifact for stage `{stage}`: {path}")]
    Dependency { stage: String, path: String },
    #[error("stage `{stage}` failed: {source}")]
    Stage {
        stage: String,
        #[source]
        source: Box<Error>,
    },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
