use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("domain error: {0}")]
    Domain(String),

    #[error("infeasible duty cycle: airtime {airtime} s plus active time {active} s exceeds the interval {interval} s")]
    InfeasibleDutyCycle {
        airtime: f64,
        active: f64,
        interval: f64,
    },

    #[error("non-positive rate on link {from} -> {to}")]
    NonPositiveRate { from: String, to: String },

    #[error("mean delay diverges: per-attempt success probability is zero")]
    DelayDivergent,

    #[error("no payload crossover: clustering is {0} for every payload size")]
    NoCrossover(&'static str),

    #[error("invalid configuration field `{field}`: {reason}")]
    Config { field: String, reason: String },
}

impl Error {
    pub(crate) fn domain(msg: impl Into<String>) -> Self {
        Error::Domain(msg.into())
    }

    pub(crate) fn config(field: impl Into<String>, reason: impl Into<String>) -> Self {
        Error::Config {
            field: field.into(),
            reason: reason.into(),
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
