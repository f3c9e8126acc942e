//! Error types shared across the toolkit.
//!
//! DSL lexing/parsing errors live in [`crate::dsl`] next to the span types
//! they report; everything else is collected here.

use thiserror::Error;

/// Violation of a structural invariant while building a model value.
#[derive(Debug, Error)]
pub enum ModelError {
    #[error("input sequence must contain at least one action")]
    EmptySequence,
    #[error("follow-up input sequence requires a parent id")]
    MissingParent,
    #[error("page status {0} outside 100..=599 (0 is reserved for transport errors)")]
    StatusRange(u16),
    #[error("an action cannot be both a login and a signup")]
    LoginSignupOverlap,
    #[error("invalid url: {0}")]
    Url(String),
}

/// Problems reading or interpreting a target configuration.
#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("{0}")]
    Io(#[from] std::io::Error),
    #[error("malformed target config: {0}")]
    Toml(#[from] toml::de::Error),
    #[error("invalid regex {pattern:?}: {source}")]
    Regex {
        pattern: String,
        source: regex::Error,
    },
    #[error("invalid base url {url:?}: {reason}")]
    BaseUrl { url: String, reason: String },
    #[error("{0}")]
    Invalid(String),
}

/// Failures while persisting or loading a data-pool directory.
#[derive(Debug, Error)]
pub enum PoolError {
    #[error("{0}")]
    Io(#[from] std::io::Error),
    #[error("{0}")]
    Json(#[from] serde_json::Error),
    #[error("pool directory {0} already contains data")]
    NotEmpty(String),
    #[error("{0}")]
    Model(#[from] ModelError),
}

/// A data provider could not serve a requested view item.
#[derive(Debug, Error)]
pub enum ProviderError {
    #[error("no data pool registered for input type {0}")]
    UnknownType(String),
    #[error("data pool for {ty} is empty")]
    EmptyPool { ty: String },
    #[error("view of {ty} has {len} items, position {index} requested")]
    IndexOutOfRange { ty: String, index: u32, len: usize },
}

/// Runtime failure while evaluating a compiled relation.
#[derive(Debug, Error)]
pub enum EvalError {
    #[error(transparent)]
    Provider(#[from] ProviderError),
    #[error("{context}: expected {expected}, got {got}")]
    Kind {
        context: String,
        expected: String,
        got: String,
    },
    #[error("{0}")]
    Index(String),
    #[error("unknown function {0}")]
    UnknownFunction(String),
    #[error("{0}")]
    Unsupported(String),
    #[error("{0}")]
    Model(#[from] ModelError),
}

/// A relation campaign could not be driven to completion.
#[derive(Debug, Error)]
pub enum EngineError {
    #[error(transparent)]
    Provider(#[from] ProviderError),
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error("relation {relation}: {source}")]
    Eval {
        relation: String,
        source: EvalError,
    },
}

/// Crawling failed in a way that is not a per-page transport error.
#[derive(Debug, Error)]
pub enum CrawlError {
    #[error("root page unreachable: {0}")]
    RootUnreachable(String),
    #[error("no credentials configured for user {0}")]
    UnknownUser(String),
    #[error("{0}")]
    Model(#[from] ModelError),
    #[error("{0}")]
    Config(#[from] ConfigError),
    #[error("http client: {0}")]
    Client(#[from] reqwest::Error),
}

/// A manual script could not be ingested.
#[derive(Debug, Error)]
pub enum ScriptError {
    #[error("line {line}: unknown verb {verb:?}")]
    UnknownVerb { line: usize, verb: String },
    #[error("line {line}: {message}")]
    Malformed { line: usize, message: String },
    #[error("script contains no actions")]
    Empty,
    #[error("{0}")]
    Model(#[from] ModelError),
    #[error("{0}")]
    Config(#[from] ConfigError),
}
