//! Metamorphic security testing for web systems.
//!
//! The crate bundles everything needed to run metamorphic test campaigns
//! against a web application:
//!
//! * a small relation language (`dsl`) with lexer, parser, checker and
//!   printer, plus an interpreter (`exec`) that preserves its
//!   nested-conditional semantics,
//! * a data collector (`collector`) that crawls a target per user, builds
//!   state graphs and derives replayable input sequences,
//! * an HTTP executor (`executor`) that replays sequences with session
//!   isolation and records request fingerprints,
//! * the campaign engine (`engine`) that iterates circular data views,
//!   evaluates relations and deduplicates failures,
//! * a built-in relation catalog (`catalog`) and a deliberately vulnerable
//!   fixture application (`fixture`) used by the test suite.

pub mod catalog;
pub mod collector;
pub mod config;
pub mod dsl;
pub mod engine;
pub mod error;
pub mod exec;
pub mod executor;
pub mod fixture;
pub mod model;
pub mod pool;

#[cfg(test)]
mod testing;

pub use config::TargetConfig;
pub use model::{
    Action, ActionKind, Channel, FailureRecord, InputSequence, OutputSequence, Page, Provenance,
    RequestFingerprint, Session, User,
};
pub use pool::DataPool;
