use alloc::string::String;
use core::fmt;

pub type Result<T, E = Error> = core::result::Result<T, E>;

#[derive(Debug, Clone, PartialEq)]
pub enum Error {
    /// A required input sequence was empty.
    EmptyInput(&'static str),
    /// A ratio would divide by zero.
    DivisionHazard(&'static str),
    /// A raw value outside the domain of its feature kind.
    Domain { feature: String, value: f64 },
    /// Schema definition or schema/value mismatch.
    Schema(String),
    /// An interaction could not be encoded.
    Encoding(String),
    /// An interaction id could not be decoded.
    Decoding { id: u64, reason: String },
    /// Logit computation hit an id that does not belong to the model.
    InvalidFeature(u64),
    /// Labels contain a single class.
    DegenerateLabels,
    /// Non-finite value during optimization.
    Numeric { iteration: usize, what: &'static str },
    /// Line search failed to make progress.
    Optimization { iteration: usize, objective: f64 },
    /// Invalid configuration field.
    Config(String),
    /// Stratified evaluation found no rows at the requested rank.
    EmptyStratum(u32),
    /// Item not present in the log.
    UnknownItem(u64),
    /// Featurizing a batch failed at a specific row.
    Row { index: usize, source: alloc::boxed::Box<Error> },
}

impl Error {
    /// Short category used for CLI error lines.
    pub fn category(&self) -> &'static str {
        match self {
            Error::EmptyInput(_) => "empty-input",
            Error::DivisionHazard(_) => "division-hazard",
            Error::Domain { .. } => "domain",
            Error::Schema(_) => "schema",
            Error::Encoding(_) => "encoding",
            Error::Decoding { .. } => "decoding",
            Error::InvalidFeature(_) => "invalid-feature",
            Error::DegenerateLabels => "degenerate-labels",
            Error::Numeric { .. } => "numeric",
            Error::Optimization { .. } => "optimization",
            Error::Config(_) => "config",
            Error::EmptyStratum(_) => "stratum",
            Error::UnknownItem(_) => "unknown-item",
            Error::Row { source, .. } => source.category(),
        }
    }
}

impl fmt::Display for Error {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Error::EmptyInput(what) => write!(f, "empty input: {what}"),
            Error::DivisionHazard(what) => write!(f, "division by zero: {what}"),
            Error::Domain { feature, value } => {
                write!(f, "value {value} outside the domain of feature `{feature}`")
            }
            Error::Schema(msg) => write!(f, "schema error: {msg}"),
            Error::Encoding(msg) => write!(f, "cannot encode interaction: {msg}"),
            Error::Decoding { id, reason } => write!(f, "cannot decode id {id}: {reason}"),
            Error::InvalidFeature(id) => write!(f, "feature id {id} does not decode under the model"),
            Error::DegenerateLabels => f.write_str("labels contain a single class"),
            Error::Numeric { iteration, what } => {
                write!(f, "non-finite {what} at iteration {iteration}")
            }
            Error::Optimization { iteration, objective } => write!(
                f,
                "line search exhausted at iteration {iteration} (objective {objective})"
            ),
            Error::Config(msg) => write!(f, "invalid config: {msg}"),
            Error::EmptyStratum(rank) => write!(f, "no rows logged at rank {rank}"),
            Error::UnknownItem(id) => write!(f, "item {id} does not appear in the log"),
            Error::Row { index, source } => write!(f, "row {index}: {source}"),
        }
    }
}

#[cfg(feature = "std")]
impl std::error::Error for Error {}
