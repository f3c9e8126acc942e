//! Abstract syntax of the relation language.
//!
//! Equality on syntax nodes is structural and ignores source spans, so a
//! parsed tree compares equal to the re-parse of its printed form.

use std::fmt;

/// 1-based source position of a token or node.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct Span {
    pub line: u32,
    pub col: u32,
}

impl Span {
    pub fn new(line: u32, col: u32) -> Self {
        Span { line, col }
    }
}

/// The seven boolean operators of the language.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MetaOp {
    Implies,
    And,
    Or,
    Not,
    Equal,
    True,
    False,
}

impl MetaOp {
    pub fn from_name(name: &str) -> Option<Self> {
        Some(match name {
            "IMPLIES" => MetaOp::Implies,
            "AND" => MetaOp::And,
            "OR" => MetaOp::Or,
            "NOT" => MetaOp::Not,
            "EQUAL" => MetaOp::Equal,
            "TRUE" => MetaOp::True,
            "FALSE" => MetaOp::False,
            _ => return None,
        })
    }

    pub fn name(self) -> &'static str {
        match self {
            MetaOp::Implies => "IMPLIES",
            MetaOp::And => "AND",
            MetaOp::Or => "OR",
            MetaOp::Not => "NOT",
            MetaOp::Equal => "EQUAL",
            MetaOp::True => "TRUE",
            MetaOp::False => "FALSE",
        }
    }
}

/// Built-in data functions that pull values from the provider or the
/// execution context.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum DataFnName {
    Input,
    Action,
    Session,
    User,
    Output,
    HttpMethod,
    RandomFilePath,
    RandomValue,
}

impl DataFnName {
    pub fn from_name(name: &str) -> Option<Self> {
        Some(match name {
            "Input" => DataFnName::Input,
            "Action" => DataFnName::Action,
            "Session" => DataFnName::Session,
            "User" => DataFnName::User,
            "Output" => DataFnName::Output,
            "HttpMethod" => DataFnName::HttpMethod,
            "RandomFilePath" => DataFnName::RandomFilePath,
            "RandomValue" => DataFnName::RandomValue,
        _ => return None,
        })
    }

    pub fn name(self) -> &'static str {
        match self {
            DataFnName::Input => "Input",
            DataFnName::Action => "Action",
            DataFnName::Session => "Session",
            DataFnName::User => "User",
            DataFnName::Output => "Output",
            DataFnName::HttpMethod => "HttpMethod",
            DataFnName::RandomFilePath => "RandomFilePath",
            DataFnName::RandomValue => "RandomValue",
        }
    }

    /// Types whose designators EQUAL may bind as follow-up inputs.
    pub fn bindable(self) -> bool {
        matches!(
            self,
            DataFnName::Input | DataFnName::Action | DataFnName::Session | DataFnName::User
        )
    }
}

impl fmt::Display for DataFnName {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CmpOp {
    Eq,
    Ne,
    Lt,
    Le,
    Gt,
    Ge,
}

impl CmpOp {
    pub fn symbol(self) -> &'static str {
        match self {
            CmpOp::Eq => "==",
            CmpOp::Ne => "!=",
            CmpOp::Lt => "<",
            CmpOp::Le => "<=",
            CmpOp::Gt => ">",
            CmpOp::Ge => ">=",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ArithOp {
    Add,
    Sub,
}

impl ArithOp {
    pub fn symbol(self) -> &'static str {
        match self {
            ArithOp::Add => "+",
            ArithOp::Sub => "-",
        }
    }
}

#[derive(Debug, Clone)]
pub struct Expr {
    pub kind: ExprKind,
    pub span: Span,
}

impl Expr {
    pub fn new(kind: ExprKind, span: Span) -> Self {
        Expr { kind, span }
    }
}

impl PartialEq for Expr {
    fn eq(&self, other: &Self) -> bool {
        self.kind == other.kind
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum ExprKind {
    Int(i64),
    Str(String),
    Bool(bool),
    Var(String),
    MetaOp { op: MetaOp, args: Vec<Expr> },
    DataFn { name: DataFnName, args: Vec<Expr> },
    Call { name: String, args: Vec<Expr> },
    Field { base: Box<Expr>, name: String },
    Compare { op: CmpOp, lhs: Box<Expr>, rhs: Box<Expr> },
    Arith { op: ArithOp, lhs: Box<Expr>, rhs: Box<Expr> },
    Range { lo: Box<Expr>, hi: Box<Expr> },
}

#[derive(Debug, Clone)]
pub enum Statement {
    For {
        var: String,
        iterable: Expr,
        body: Vec<Statement>,
        span: Span,
    },
    VarDecl {
        name: String,
        value: Expr,
        span: Span,
    },
    Expr(Expr),
}

impl PartialEq for Statement {
    fn eq(&self, other: &Self) -> bool {
        match (self, other) {
            (
                Statement::For { var: v1, iterable: i1, body: b1, .. },
                Statement::For { var: v2, iterable: i2, body: b2, .. },
            ) => v1 == v2 && i1 == i2 && b1 == b2,
            (
                Statement::VarDecl { name: n1, value: e1, .. },
                Statement::VarDecl { name: n2, value: e2, .. },
            ) => n1 == n2 && e1 == e2,
            (Statement::Expr(e1), Statement::Expr(e2)) => e1 == e2,
            _ => false,
        }
    }
}

/// One `MR` block, with the file headers it was parsed under.
#[derive(Debug, Clone)]
pub struct RelationAst {
    pub package: Option<String>,
    pub imports: Vec<String>,
    pub name: String,
    pub name_span: Span,
    pub body: Vec<Statement>,
}

impl RelationAst {
    /// Package-qualified name used for uniqueness and reporting.
    pub fn qualified_name(&self) -> String {
        match &self.package {
            Some(p) => format!("{p}.{}", self.name),
            None => self.name.clone(),
        }
    }
}

impl PartialEq for RelationAst {
    fn eq(&self, other: &Self) -> bool {
        self.package == other.package
            && self.imports == other.imports
            && self.name == other.name
            && self.body == other.body
    }
}
