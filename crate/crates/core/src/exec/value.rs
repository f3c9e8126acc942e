//! Runtime values of the relation language.

use crate::dsl::DataFnName;
use crate::model::{InputSequence, OutputSequence, Page, Session, User};

/// One action as seen while iterating `Input(i).actions`: the action
/// itself plus its position and sequence context.
#[derive(Debug, Clone, PartialEq)]
pub struct ActionView {
    pub action: crate::model::Action,
    /// 1-based position within the owning sequence.
    pub position: usize,
    /// True when an earlier action of the sequence is a login.
    pub after_login: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Value {
    Int(i64),
    Str(String),
    Bool(bool),
    Input(InputSequence),
    Output(OutputSequence),
    Page(Page),
    User(User),
    Session(Session),
    Action(ActionView),
    Actions(Vec<ActionView>),
    Params(Vec<(String, String)>),
    /// Inclusive integer range, empty when `1 > 0`-style inverted.
    Range(i64, i64),
    /// An unevaluated reference to a bindable data function, produced by
    /// `var x = Input(2);`. It resolves on first use outside an EQUAL
    /// target position.
    Designator(DataFnName, usize),
}

impl Value {
    /// Human-readable kind name for error messages.
    pub fn kind(&self) -> &'static str {
        match self {
            Value::Int(_) => "int",
            Value::Str(_) => "string",
            Value::Bool(_) => "boolean",
            Value::Input(_) => "Input",
            Value::Output(_) => "Output",
            Value::Page(_) => "Page",
            Value::User(_) => "User",
            Value::Session(_) => "Session",
            Value::Action(_) => "Action",
            Value::Actions(_) => "action list",
            Value::Params(_) => "parameter list",
            Value::Range(_, _) => "range",
            Value::Designator(_, _) => "designator",
        }
    }
}

/// The key a bindable designator occupies in the binding and used sets,
/// e.g. `Input(2)`.
pub fn designator_key(name: &str, index: usize) -> String {
    format!("{name}({index})")
}
