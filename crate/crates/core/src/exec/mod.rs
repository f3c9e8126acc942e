//! Relation evaluation: runtime values, execution context, web-specific
//! functions and the interpreter itself.

pub mod context;
pub mod interp;
pub mod value;
pub mod webfns;

pub use context::{ExecutionContext, FailureContext};
pub use interp::CompiledRelation;
pub use value::Value;
