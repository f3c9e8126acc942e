//! The relation definition language: lexer, parser, static checker and
//! canonical printer.
//!
//! A compilation unit contains an optional `package` header, `import`
//! lines, and one or more `MR` blocks. Each block holds statements:
//! `for` loops, `var` declarations, and boolean expressions built from the
//! seven metamorphic operators (`IMPLIES`, `AND`, `OR`, `NOT`, `EQUAL`,
//! `TRUE`, `FALSE`), data functions (`Input`, `Output`, `User`, ...), and
//! the web-function library.

pub mod ast;
pub mod check;
pub mod parser;
pub mod printer;
pub mod token;

pub use ast::{
    ArithOp, CmpOp, DataFnName, Expr, ExprKind, MetaOp, RelationAst, Span, Statement,
};
pub use check::{check, check_set, Diagnostic, Kind, Severity, WEB_FNS};
pub use parser::{parse, ParseError};
pub use printer::print;
pub use token::{tokenize, LexError};
