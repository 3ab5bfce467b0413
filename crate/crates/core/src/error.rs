use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ModelError {
    #[error("invalid bitrate ladder: {0}")]
    InvalidLadder(String),
    #[error("parameter {name} = {value} out of range")]
    InvalidParameter { name: &'static str, value: f64 },
    #[error("invalid user state: {0}")]
    InvalidState(String),
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum AuctionError {
    #[error("insufficient bidders: need at least {needed}, got {got}")]
    InsufficientBidders { needed: usize, got: usize },
    #[error("insufficient marginal scores: need {needed}, got {got}")]
    InsufficientMarginalScores { needed: usize, got: usize },
    #[error("malformed bid from bidder {bidder}: {reason}")]
    MalformedBid { bidder: u32, reason: String },
    #[error("instance exceeds brute-force size guard: {0}")]
    SizeGuard(String),
}

#[derive(Debug, Error)]
pub enum SimError {
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("trace underrun for user {user} at t={time_s}")]
    TraceUnderrun { user: String, time_s: f64 },
    #[error("unreachable completion: user {user} has zero capacity from t={time_s} onwards")]
    UnreachableCompletion { user: String, time_s: f64 },
    #[error("simulation did not finish by t={time_s}")]
    Horizon { time_s: f64 },
    #[error(transparent)]
    Auction(#[from] AuctionError),
    #[error(transparent)]
    Model(#[from] ModelError),
}

#[derive(Debug, Error)]
pub enum IoError {
    #[error("{path}:{line}: {message}")]
    Parse {
        path: String,
        line: usize,
        message: String,
    },
    #[error("config error: {0}")]
    Config(String),
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error(transparent)]
    Model(#[from] ModelError),
}
