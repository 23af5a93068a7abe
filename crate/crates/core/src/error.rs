use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("taskset is empty")]
    EmptyTaskset,
    #[error("task t{task}: execution time, deadline and value must be positive")]
    ZeroField { task: usize },
    #[error("taskset has {0} tasks; at most {max} are supported", max = crate::model::MAX_TASKS)]
    TooManyTasks(usize),
    #[error("task t{task}: deadline {deadline} exceeds the supported maximum of 64")]
    DeadlineTooLarge { task: usize, deadline: u32 },
    #[error("invalid schedule: {0}")]
    InvalidSchedule(String),
    #[error("state space exceeds the cap of {cap} states")]
    StateExplosion { cap: usize },
    #[error("malformed LTS: {0}")]
    MalformedLts(String),
    #[error("malformed laxity index: {0}")]
    MalformedIndex(String),
    #[error("malformed flow: {0}")]
    MalformedFlow(String),
    #[error("malformed linear system: {0}")]
    MalformedSystem(String),
    #[error("graph has no cycle")]
    NoCycle,
    #[error("instance too large for exhaustive search ({0} nodes)")]
    TooLarge(usize),
    #[error("arithmetic overflow in {0}")]
    Overflow(&'static str),
    #[error("parse error: {0}")]
    Parse(String),
    #[error("unsupported: {0}")]
    Unsupported(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    /// Short machine-readable kind, used in CLI error reports.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::EmptyTaskset
            | Error::ZeroField { .. }
            | Error::TooManyTasks(_)
            | Error::DeadlineTooLarge { .. } => "invalid_taskset",
            Error::InvalidSchedule(_) => "invalid_schedule",
            Error::StateExplosion { .. } => "state_explosion",
            Error::MalformedLts(_) => "malformed_lts",
            Error::MalformedIndex(_) => "malformed_index",
            Error::MalformedFlow(_) => "malformed_flow",
            Error::MalformedSystem(_) => "malformed_system",
            Error::NoCycle => "no_cycle",
            Error::TooLarge(_) => "too_large",
            Error::Overflow(_) => "overflow",
            Error::Parse(_) => "parse",
            Error::Unsupported(_) => "unsupported",
            Error::Io(_) => "io",
        }
    }
}
