use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("unstable queue{}: arrival rate {arrival} >= service rate {service}", at.map(|l| format!(" on link {l}")).unwrap_or_default())]
    StabilityViolation {
        arrival: f64,
        service: f64,
        at: Option<usize>,
    },
    #[error("unknown service class `{0}`")]
    UnknownClass(String),
    #[error("no path from node {src} to node {dst}")]
    NoPath { src: usize, dst: usize },
    #[error("instance exceeds the exact-search budget: {0}")]
    BudgetExceeded(String),
    #[error("unknown or inactive request {0}")]
    UnknownRequest(u64),
    #[error("allocation of request {0} references a path that was not precomputed")]
    DanglingAllocation(u64),
    #[error("vm size {size} bytes is smaller than one page ({page} bytes)")]
    VmSmallerThanPage { size: f64, page: f64 },
    #[error("{n_clouds} clouds requested but only {core_routers} core routers exist")]
    TooManyClouds { n_clouds: usize, core_routers: usize },
    #[error("infeasible: {0}")]
    Infeasible(String),
    #[error("invalid input: {0}")]
    Invalid(String),
    #[error("i/o: {0}")]
    Io(String),
}

impl Error {
    /// Process exit code used by the command-line front end.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::StabilityViolation { .. } | Error::Infeasible(_) => 1,
            _ => 2,
        }
    }
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

impl From<csv::Error> for Error {
    fn from(e: csv::Error) -> Self {
        Error::Io(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
