//! Error types shared across the engine.

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

/// A single violation found while validating a structure specification.
///
/// Validation reports the complete list, not just the first failure.
#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ValidationIssue {
    #[error("structure has no positions")]
    EmptyStructure,
    #[error("duplicate position name: {0}")]
    DuplicatePosition(String),
    #[error("duplicate tier name: {0}")]
    DuplicateTier(String),
    #[error("duplicate trigger name: {0}")]
    DuplicateTrigger(String),
    #[error("unresolved reference: {kind} `{name}` in {context}")]
    UnresolvedReference {
        kind: &'static str,
        name: String,
        context: String,
    },
    #[error("pro-rata weights of tier `{tier}` do not sum to 1")]
    BadWeights { tier: String },
    #[error("negative amount: {context}")]
    NegativeAmount { context: String },
    #[error("position `{0}` belongs to {1} tiers, expected exactly one")]
    TierMembershipCount(String, usize),
    #[error("tier `{tier}` is sequential but declares weights")]
    UnexpectedWeights { tier: String },
    #[error("tier `{tier}` declares {weights} weights for {members} members")]
    WeightCountMismatch {
        tier: String,
        weights: usize,
        members: usize,
    },
    #[error("rule {rule} tier order must list every tier exactly once")]
    IncompleteTierOrder { rule: usize },
    #[error("horizon must be at least 1")]
    BadHorizon,
    #[error("invalid name `{name}`: {reason}")]
    BadName { name: String, reason: &'static str },
    #[error("due schedule of `{position}` has entry beyond horizon (period {period})")]
    ScheduleBeyondHorizon { position: String, period: usize },
}

#[derive(Debug, Error)]
pub enum Error {
    #[error("structure specification is invalid ({} issue(s)): {}", .0.len(), format_issues(.0))]
    Validation(Vec<ValidationIssue>),

    #[error("negative input: {context}")]
    NegativeInput { context: String },

    #[error("weights must be non-negative and sum to 1")]
    BadWeights,

    #[error("input length {got} does not match horizon {expected}")]
    LengthMismatch { expected: usize, got: usize },

    #[error("state does not carry metric for trigger `{trigger}`: {detail}")]
    UnknownMetric { trigger: String, detail: String },

    #[error("unknown position: {0}")]
    UnknownPosition(String),

    #[error("unknown tier: {0}")]
    UnknownTier(String),

    #[error("unknown trigger: {0}")]
    UnknownTrigger(String),

    #[error("correlation must lie in [0, 1], got {0}")]
    BadCorrelation(f64),

    #[error("event trace is inconsistent: {0}")]
    InconsistentTrace(String),

    #[error("enumeration would produce {scenarios} scenarios, limit is {limit}")]
    TooLarge { scenarios: u128, limit: u128 },

    #[error("enumeration supports independent pools only")]
    UnsupportedDependence,

    #[error("ragged input: row {row} has {got} columns, expected {expected}")]
    RaggedInput {
        row: usize,
        expected: usize,
        got: usize,
    },

    #[error("empty input: {0}")]
    EmptyInput(&'static str),

    #[error("{got} weights supplied for {expected} matrices")]
    WeightMismatch { expected: usize, got: usize },

    #[error("quantile level must lie in (0, 1), got {0}")]
    BadLevel(f64),

    #[error("search space has {points} points, budget is {budget}")]
    BudgetExceeded { points: u128, budget: u128 },

    #[error("no feasible point in the design space; nearest point is #{nearest_index} (violation {violation})")]
    EmptyFeasibleSet {
        nearest_index: usize,
        violation: f64,
    },

    #[error("hazard exceeds 10000 bps: {context}")]
    BadHazard { context: String },

    #[error("not a decimal string: {text}")]
    BadDecimal { text: String },

    #[error("syntax error at line {line}, column {column}: {message}")]
    Syntax {
        line: usize,
        column: usize,
        message: String,
    },

    #[error("schema error at `{path}`: {message}")]
    Schema { path: String, message: String },

    #[error("malformed csv at line {line}: {message}")]
    Csv { line: usize, message: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

fn format_issues(issues: &[ValidationIssue]) -> String {
    issues
        .iter()
        .map(|i| i.to_string())
        .collect::<Vec<_>>()
        .join("; ")
}

impl Error {
    /// Stable machine-readable code for CLI error reporting.
    pub fn code(&self) -> &'static str {
        match self {
            Error::Validation(_) => "ValidationError",
            Error::NegativeInput { .. } => "NegativeInput",
            Error::BadWeights => "BadWeights",
            Error::LengthMismatch { .. } => "LengthMismatch",
            Error::UnknownMetric { .. } => "UnknownMetric",
            Error::UnknownPosition(_) => "UnknownPosition",
            Error::UnknownTier(_) => "UnknownTier",
            Error::UnknownTrigger(_) => "UnknownTrigger",
            Error::BadCorrelation(_) => "BadCorrelation",
            Error::InconsistentTrace(_) => "InconsistentTrace",
            Error::TooLarge { .. } => "TooLarge",
            Error::UnsupportedDependence => "UnsupportedDependence",
            Error::RaggedInput { .. } => "RaggedInput",
            Error::EmptyInput(_) => "EmptyInput",
            Error::WeightMismatch { .. } => "WeightMismatch",
            Error::BadLevel(_) => "BadLevel",
            Error::BudgetExceeded { .. } => "BudgetExceeded",
            Error::EmptyFeasibleSet { .. } => "EmptyFeasibleSet",
            Error::BadHazard { .. } => "BadHazard",
            Error::BadDecimal { .. } => "BadDecimal",
            Error::Syntax { .. } => "SyntaxError",
            Error::Schema { .. } => "SchemaError",
            Error::Csv { .. } => "CsvError",
            Error::Io(_) => "IoError",
        }
    }
}
