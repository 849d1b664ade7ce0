use std::path::PathBuf;

/// Errors produced anywhere in the library.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("{path}:{line}: {message}")]
    Parse {
        path: String,
        line: usize,
        message: String,
    },

    #[error("{path}:{line}: self-loop on node `{node}`")]
    SelfLoop {
        path: String,
        line: usize,
        node: String,
    },

    #[error("attribute file is missing {} node(s): {}", .ids.len(), .ids.join(", "))]
    MissingAttributes { ids: Vec<String> },

    #[error("attribute value `{value}` at row {row}, column `{column}` is not 0 or 1")]
    InvalidAttributeValue {
        row: usize,
        column: String,
        value: String,
    },

    #[error("unknown attribute column `{0}`")]
    UnknownColumn(String),

    #[error("invalid input data: {0}")]
    InvalidData(String),

    #[error("invalid design: {0}")]
    InvalidDesign(String),

    #[error("infeasible degree sequence: {0}")]
    InfeasibleDegrees(String),

    #[error("cannot draw {requested} seeds from {available} eligible nodes")]
    TooManySeeds { requested: usize, available: usize },

    #[error("sample starved: all recruitment chains died after {collected} of {target} participants")]
    SampleStarved { collected: usize, target: usize },

    #[error("degenerate forest: {0}")]
    DegenerateForest(String),

    #[error("empty sample")]
    EmptySample,

    #[error("observation with zero degree")]
    ZeroDegree,

    #[error("observation with zero multiplicity")]
    ZeroMultiplicity,

    #[error("invalid population totals: {0}")]
    InvalidTotals(String),

    #[error("the IPW estimator needs population totals (N and total degree)")]
    MissingTotals,

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("confidence level {0} is not inside (0, 1)")]
    InvalidLevel(f64),

    #[error("need at least 2 bootstrap estimates, got {0}")]
    TooFewReplicates(usize),

    #[error("enumeration needs {outcomes:.3e} outcomes, budget is {budget:.0e}; use Monte Carlo instead")]
    BudgetExceeded { outcomes: f64, budget: f64 },

    #[error("forest is not balanced: {0}")]
    Unbalanced(String),

    #[error("usage: {0}")]
    Usage(String),

    #[error("{}: {source}", .path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// Process exit code: 1 usage, 2 input data, 3 runtime or budget.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Usage(_) | Error::InvalidConfig(_) | Error::InvalidLevel(_) => 1,
            Error::InvalidDesign(_) => 1,
            Error::Parse { .. }
            | Error::SelfLoop { .. }
            | Error::MissingAttributes { .. }
            | Error::InvalidAttributeValue { .. }
            | Error::UnknownColumn(_)
            | Error::InvalidData(_)
            | Error::Io { .. }
            | Error::Csv(_)
            | Error::Json(_)
            | Error::DegenerateForest(_)
            | Error::Unbalanced(_)
            | Error::MissingTotals
            | Error::InvalidTotals(_)
            | Error::ZeroDegree
            | Error::ZeroMultiplicity
            | Error::EmptySample => 2,
            Error::InfeasibleDegrees(_)
            | Error::TooManySeeds { .. }
            | Error::SampleStarved { .. }
            | Error::TooFewReplicates(_)
            | Error::BudgetExceeded { .. } => 3,
        }
    }

    /// Short machine-readable tag for error reports.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::Parse { .. } => "parse",
            Error::SelfLoop { .. } => "self_loop",
            Error::MissingAttributes { .. } => "missing_attributes",
            Error::InvalidAttributeValue { .. } => "invalid_attribute_value",
            Error::UnknownColumn(_) => "unknown_column",
            Error::InvalidData(_) => "invalid_data",
            Error::InvalidDesign(_) => "invalid_design",
            Error::InfeasibleDegrees(_) => "infeasible_degrees",
            Error::TooManySeeds { .. } => "too_many_seeds",
            Error::SampleStarved { .. } => "sample_starved",
            Error::DegenerateForest(_) => "degenerate_forest",
            Error::EmptySample => "empty_sample",
            Error::ZeroDegree => "zero_degree",
            Error::ZeroMultiplicity => "zero_multiplicity",
            Error::InvalidTotals(_) => "invalid_totals",
            Error::MissingTotals => "missing_totals",
            Error::InvalidConfig(_) => "invalid_config",
            Error::InvalidLevel(_) => "invalid_level",
            Error::TooFewReplicates(_) => "too_few_replicates",
            Error::BudgetExceeded { .. } => "budget_exceeded",
            Error::Unbalanced(_) => "unbalanced",
            Error::Usage(_) => "usage",
            Error::Io { .. } => "io",
            Error::Csv(_) => "csv",
            Error::Json(_) => "json",
        }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
