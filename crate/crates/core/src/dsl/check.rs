//! Static checks: name resolution, arity and argument kinds, accessor
//! validity, and the EQUAL target rule.

use std::collections::HashMap;
use std::fmt;

use super::ast::*;

/// Value kinds tracked by the checker. `Unknown` flows through places the
/// checker cannot see into (it never produces a diagnostic).
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Kind {
    Int,
    Str,
    Bool,
    Input,
    Action,
    User,
    Session,
    Output,
    Page,
    Params,
    Actions,
    Range,
    Unknown,
}

impl Kind {
    fn compat(self, other: Kind) -> bool {
        self == Kind::Unknown || other == Kind::Unknown || self == other
    }

    fn name(self) -> &'static str {
        match self {
            Kind::Int => "int",
            Kind::Str => "string",
            Kind::Bool => "boolean",
            Kind::Input => "Input",
            Kind::Action => "Action",
            Kind::User => "User",
            Kind::Session => "Session",
            Kind::Output => "Output",
            Kind::Page => "Page",
            Kind::Params => "parameter list",
            Kind::Actions => "action list",
            Kind::Range => "range",
            Kind::Unknown => "unknown",
        }
    }
}

/// Signature of one web-function overload.
pub struct WebFnSig {
    pub name: &'static str,
    pub params: &'static [Kind],
    pub ret: Kind,
}

/// The registered web-function library. Extending the toolkit with new
/// functions means adding a signature here and an implementation in the
/// evaluator; a test keeps the two in sync.
pub const WEB_FNS: &[WebFnSig] = &[
    WebFnSig { name: "changeCredentials", params: &[Kind::Input, Kind::User], ret: Kind::Input },
    WebFnSig { name: "copyActionTo", params: &[Kind::Input, Kind::Int, Kind::Int], ret: Kind::Input },
    WebFnSig { name: "cannotReachThroughGUI", params: &[Kind::User, Kind::Str], ret: Kind::Bool },
    WebFnSig { name: "isSupervisorOf", params: &[Kind::User, Kind::User], ret: Kind::Bool },
    WebFnSig { name: "isLogin", params: &[Kind::Action], ret: Kind::Bool },
    WebFnSig { name: "afterLogin", params: &[Kind::Action], ret: Kind::Bool },
    WebFnSig { name: "isSignup", params: &[Kind::Action], ret: Kind::Bool },
    WebFnSig { name: "isError", params: &[Kind::Page], ret: Kind::Bool },
    WebFnSig { name: "userCanRetrieveContent", params: &[Kind::User, Kind::Page], ret: Kind::Bool },
    WebFnSig { name: "setChannel", params: &[Kind::Action, Kind::Str], ret: Kind::Action },
    WebFnSig { name: "setChannel", params: &[Kind::Input, Kind::Int, Kind::Str], ret: Kind::Input },
    WebFnSig { name: "setParameterValue", params: &[Kind::Input, Kind::Int, Kind::Int, Kind::Str], ret: Kind::Input },
    WebFnSig { name: "parameterCount", params: &[Kind::Action], ret: Kind::Int },
    WebFnSig { name: "sessionIdOf", params: &[Kind::Page], ret: Kind::Str },
];

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Severity {
    Error,
    Warning,
}

impl fmt::Display for Severity {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Severity::Error => write!(f, "error"),
            Severity::Warning => write!(f, "warning"),
        }
    }
}

/// One reported problem, rendered as `file:line:col: severity: message`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Diagnostic {
    pub file: String,
    pub line: u32,
    pub col: u32,
    pub severity: Severity,
    pub message: String,
}

impl fmt::Display for Diagnostic {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{}:{}:{}: {}: {}",
            self.file, self.line, self.col, self.severity, self.message
        )
    }
}

#[derive(Clone, Copy)]
struct VarInfo {
    kind: Kind,
    /// True when the variable was declared as an alias of a data function,
    /// making it a valid EQUAL target.
    designator: bool,
}

struct Checker<'a> {
    file: &'a str,
    scopes: Vec<HashMap<String, VarInfo>>,
    diags: Vec<Diagnostic>,
}

impl<'a> Checker<'a> {
    fn error(&mut self, span: Span, message: String) {
        self.diags.push(Diagnostic {
            file: self.file.to_string(),
            line: span.line,
            col: span.col,
            severity: Severity::Error,
            message,
        });
    }

    fn lookup(&self, name: &str) -> Option<VarInfo> {
        self.scopes.iter().rev().find_map(|s| s.get(name)).copied()
    }

    fn declare(&mut self, name: &str, info: VarInfo) {
        self.scopes
            .last_mut()
            .expect("scope stack never empty")
            .insert(name.to_string(), info);
    }

    fn relation(&mut self, rel: &RelationAst) {
        self.scopes.push(HashMap::new());
        for stmt in &rel.body {
            self.statement(stmt);
        }
        self.scopes.pop();
    }

    fn statement(&mut self, stmt: &Statement) {
        match stmt {
            Statement::For {
                var,
                iterable,
                body,
                span,
            } => {
                let iter_kind = self.infer(iterable);
                let elem = match iter_kind {
                    Kind::Range => Kind::Int,
                    Kind::Actions => Kind::Action,
                    Kind::Unknown => Kind::Unknown,
                    other => {
                        self.error(
                            *span,
                            format!("cannot iterate over a value of kind {}", other.name()),
                        );
                        Kind::Unknown
                    }
                };
                self.scopes.push(HashMap::new());
                self.declare(
                    var,
                    VarInfo {
                        kind: elem,
                        designator: false,
                    },
                );
                for inner in body {
                    self.statement(inner);
                }
                self.scopes.pop();
            }
            Statement::VarDecl { name, value, .. } => {
                let kind = self.infer(value);
                let designator = matches!(value.kind, ExprKind::DataFn { .. });
                self.declare(name, VarInfo { kind, designator });
            }
            Statement::Expr(expr) => {
                self.infer(expr);
            }
        }
    }

    fn infer(&mut self, expr: &Expr) -> Kind {
        match &expr.kind {
            ExprKind::Int(_) => Kind::Int,
            ExprKind::Str(_) => Kind::Str,
            ExprKind::Bool(_) => Kind::Bool,
            ExprKind::Var(name) => match self.lookup(name) {
                Some(info) => info.kind,
                None => {
                    self.error(expr.span, format!("unresolved variable {name}"));
                    Kind::Unknown
                }
            },
            ExprKind::MetaOp { op, args } => self.meta_op(expr.span, *op, args),
            ExprKind::DataFn { name, args } => self.data_fn(expr.span, *name, args),
            ExprKind::Call { name, args } => self.web_fn(expr.span, name, args),
            ExprKind::Field { base, name } => self.field(expr.span, base, name),
            ExprKind::Compare { op, lhs, rhs } => {
                let lk = self.infer(lhs);
                let rk = self.infer(rhs);
                match op {
                    CmpOp::Eq | CmpOp::Ne => {
                        if !lk.compat(rk) {
                            self.error(
                                expr.span,
                                format!("cannot compare {} with {}", lk.name(), rk.name()),
                            );
                        }
                    }
                    _ => {
                        for (k, side) in [(lk, lhs), (rk, rhs)] {
                            if !k.compat(Kind::Int) {
                                self.error(
                                    side.span,
                                    format!("ordered comparison requires integers, got {}", k.name()),
                                );
                            }
                        }
                    }
                }
                Kind::Bool
            }
            ExprKind::Arith { lhs, rhs, .. } => {
                for side in [lhs, rhs] {
                    let k = self.infer(side);
                    if !k.compat(Kind::Int) {
                        self.error(
                            side.span,
                            format!("arithmetic requires integers, got {}", k.name()),
                        );
                    }
                }
                Kind::Int
            }
            ExprKind::Range { lo, hi } => {
                for side in [lo, hi] {
                    let k = self.infer(side);
                    if !k.compat(Kind::Int) {
                        self.error(
                            side.span,
                            format!("range bounds must be integers, got {}", k.name()),
                        );
                    }
                }
                Kind::Range
            }
        }
    }

    fn boolean_args(&mut self, name: &str, args: &[Expr]) {
        for (i, arg) in args.iter().enumerate() {
            let k = self.infer(arg);
            if !k.compat(Kind::Bool) {
                self.error(
                    arg.span,
                    format!("argument {} of {name} must be boolean, got {}", i + 1, k.name()),
                );
            }
        }
    }

    fn meta_op(&mut self, span: Span, op: MetaOp, args: &[Expr]) -> Kind {
        match op {
            MetaOp::True | MetaOp::False => {
                if !args.is_empty() {
                    self.error(span, format!("{} takes no arguments", op.name()));
                    for arg in args {
                        self.infer(arg);
                    }
                }
            }
            MetaOp::Not => {
                if args.len() != 1 {
                    self.error(span, format!("NOT takes exactly 1 argument, got {}", args.len()));
                }
                self.boolean_args("NOT", args);
            }
            MetaOp::And | MetaOp::Or => {
                if args.len() < 2 {
                    self.error(
                        span,
                        format!("{} takes at least 2 arguments, got {}", op.name(), args.len()),
                    );
                }
                self.boolean_args(op.name(), args);
            }
            MetaOp::Implies => {
                if args.len() != 2 {
                    self.error(span, format!("IMPLIES takes exactly 2 arguments, got {}", args.len()));
                }
                self.boolean_args("IMPLIES", args);
            }
            MetaOp::Equal => {
                if args.len() != 2 {
                    self.error(span, format!("EQUAL takes exactly 2 arguments, got {}", args.len()));
                }
                if let Some(target) = args.first() {
                    let ok = match &target.kind {
                        ExprKind::DataFn { .. } => true,
                        ExprKind::Var(name) => {
                            self.lookup(name).map(|i| i.designator).unwrap_or(true)
                        }
                        _ => false,
                    };
                    if !ok {
                        self.error(
                            target.span,
                            "EQUAL target must be an input designator (a data function or a \
                             variable bound to one)"
                                .to_string(),
                        );
                    }
                }
                for arg in args {
                    self.infer(arg);
                }
            }
        }
        Kind::Bool
    }

    fn int_arg(&mut self, owner: &str, arg: &Expr) {
        let k = self.infer(arg);
        if !k.compat(Kind::Int) {
            self.error(
                arg.span,
                format!("{owner} index must be an integer, got {}", k.name()),
            );
        }
        if let ExprKind::Int(n) = arg.kind {
            if n < 1 {
                self.error(arg.span, format!("{owner} index is 1-based, got {n}"));
            }
        }
    }

    fn data_fn(&mut self, span: Span, name: DataFnName, args: &[Expr]) -> Kind {
        match name {
            DataFnName::Input | DataFnName::Action | DataFnName::Session | DataFnName::User => {
                if args.len() != 1 {
                    self.error(span, format!("{name} takes exactly 1 index argument"));
                    for arg in args {
                        self.infer(arg);
                    }
                } else {
                    self.int_arg(name.name(), &args[0]);
                }
                match name {
                    DataFnName::Input => Kind::Input,
                    DataFnName::Action => Kind::Action,
                    DataFnName::Session => Kind::Session,
                    DataFnName::User => Kind::User,
                    _ => unreachable!(),
                }
            }
            DataFnName::Output => {
                if args.is_empty() || args.len() > 2 {
                    self.error(span, "Output takes an input and an optional position".into());
                    for arg in args {
                        self.infer(arg);
                    }
                    return Kind::Unknown;
                }
                let k = self.infer(&args[0]);
                if !k.compat(Kind::Input) {
                    self.error(
                        args[0].span,
                        format!("Output expects an input sequence, got {}", k.name()),
                    );
                }
                if let Some(pos) = args.get(1) {
                    self.int_arg("Output position", pos);
                    Kind::Page
                } else {
                    Kind::Output
                }
            }
            DataFnName::HttpMethod | DataFnName::RandomFilePath => {
                if !args.is_empty() {
                    self.error(span, format!("{name} takes no arguments"));
                    for arg in args {
                        self.infer(arg);
                    }
                }
                Kind::Str
            }
            DataFnName::RandomValue => {
                let kind = match args.first().map(|a| &a.kind) {
                    Some(ExprKind::Str(t)) if args.len() == 1 => match t.as_str() {
                        "int" => Kind::Int,
                        "string" => Kind::Str,
                        "boolean" => Kind::Bool,
                        other => {
                            self.error(
                                args[0].span,
                                format!(
                                    "RandomValue type must be \"int\", \"string\" or \"boolean\", got {other:?}"
                                ),
                            );
                            Kind::Unknown
                        }
                    },
                    _ => {
                        self.error(
                            span,
                            "RandomValue takes a single literal type name (\"int\", \"string\" or \
                             \"boolean\")"
                                .to_string(),
                        );
                        for arg in args {
                            self.infer(arg);
                        }
                        Kind::Unknown
                    }
                };
                kind
            }
        }
    }

    fn web_fn(&mut self, span: Span, name: &str, args: &[Expr]) -> Kind {
        let kinds: Vec<Kind> = args.iter().map(|a| self.infer(a)).collect();
        let candidates: Vec<&WebFnSig> = WEB_FNS.iter().filter(|s| s.name == name).collect();
        if candidates.is_empty() {
            self.error(span, format!("unknown function {name}"));
            return Kind::Unknown;
        }
        let arity_matches: Vec<&&WebFnSig> = candidates
            .iter()
            .filter(|s| s.params.len() == args.len())
            .collect();
        if arity_matches.is_empty() {
            let arities: Vec<String> = candidates
                .iter()
                .map(|s| s.params.len().to_string())
                .collect();
            self.error(
                span,
                format!(
                    "{name} takes {} argument(s), got {}",
                    arities.join(" or "),
                    args.len()
                ),
            );
            return candidates[0].ret;
        }
        for sig in &arity_matches {
            if sig.params.iter().zip(&kinds).all(|(p, k)| p.compat(*k)) {
                return sig.ret;
            }
        }
        let got: Vec<&str> = kinds.iter().map(|k| k.name()).collect();
        self.error(
            span,
            format!("no overload of {name} accepts ({})", got.join(", ")),
        );
        arity_matches[0].ret
    }

    fn field(&mut self, span: Span, base: &Expr, name: &str) -> Kind {
        let base_kind = self.infer(base);
        let expected: &[(Kind, Kind)] = match name {
            "actions" => &[(Kind::Input, Kind::Actions)],
            "url" => &[(Kind::Action, Kind::Str)],
            "position" => &[(Kind::Action, Kind::Int)],
            "parameters" => &[(Kind::Action, Kind::Params)],
            "length" => &[
                (Kind::Input, Kind::Int),
                (Kind::Actions, Kind::Int),
                (Kind::Params, Kind::Int),
                (Kind::Str, Kind::Int),
            ],
            _ => {
                self.error(span, format!("unknown accessor .{name}"));
                return Kind::Unknown;
            }
        };
        if base_kind == Kind::Unknown {
            return Kind::Unknown;
        }
        match expected.iter().find(|(b, _)| *b == base_kind) {
            Some((_, ret)) => *ret,
            None => {
                self.error(
                    span,
                    format!("accessor .{name} is not defined on {}", base_kind.name()),
                );
                Kind::Unknown
            }
        }
    }
}

/// Checks a set of compilation units together, so relation names must be
/// unique across the whole set.
pub fn check_set(units: &[(&str, &[RelationAst])]) -> Vec<Diagnostic> {
    let mut diags = Vec::new();
    let mut seen: HashMap<String, String> = HashMap::new();
    for (file, relations) in units {
        for rel in *relations {
            let qualified = rel.qualified_name();
            if let Some(previous) = seen.get(&qualified) {
                diags.push(Diagnostic {
                    file: file.to_string(),
                    line: rel.name_span.line,
                    col: rel.name_span.col,
                    severity: Severity::Error,
                    message: format!("duplicate relation {qualified}, first defined in {previous}"),
                });
            } else {
                seen.insert(qualified, file.to_string());
            }
            let mut checker = Checker {
                file,
                scopes: vec![HashMap::new()],
                diags: Vec::new(),
            };
            checker.relation(rel);
            diags.extend(checker.diags);
        }
    }
    diags
}

/// Checks one unit in isolation.
pub fn check(file: &str, relations: &[RelationAst]) -> Vec<Diagnostic> {
    check_set(&[(file, relations)])
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dsl::parser::parse;

    fn diags(src: &str) -> Vec<Diagnostic> {
        let rels = parse(src).unwrap();
        check("test.smrl", &rels)
    }

    #[test]
    fn unresolved_variable() {
        let d = diags("MR X { IMPLIES(isLogin(a), TRUE()); }");
        assert_eq!(d.len(), 1);
        assert!(d[0].message.contains("unresolved variable a"));
        assert_eq!(d[0].severity, Severity::Error);
    }

    #[test]
    fn equal_target_must_be_designator() {
        let d = diags("MR X { EQUAL(5, Input(1)); }");
        assert_eq!(d.len(), 1);
        assert!(d[0].message.contains("EQUAL target must be an input designator"));
    }

    #[test]
    fn implies_arity() {
        let d = diags("MR X { IMPLIES(TRUE()); }");
        assert_eq!(d.len(), 1);
        assert!(d[0].message.contains("IMPLIES takes exactly 2 arguments"));
    }

    #[test]
    fn unknown_function_and_accessor() {
        let d = diags("MR X { for (var a : Input(1).actions) { frobnicate(a.color); } }");
        assert_eq!(d.len(), 2);
        assert!(d[0].message.contains("unknown accessor .color"));
        assert!(d[1].message.contains("unknown function frobnicate"));
    }

    #[test]
    fn overload_selection() {
        assert!(diags("MR X { for (var a : Input(1).actions) { EQUAL(Input(2), setChannel(Input(1), a.position, \"http\")); } }").is_empty());
        assert!(diags("MR X { for (var a : Input(1).actions) { EQUAL(Action(1), setChannel(a, \"http\")); } }").is_empty());
        let d = diags("MR X { sessionIdOf(Output(Input(1), 1), 2); }");
        assert!(d[0].message.contains("sessionIdOf takes 1 argument(s), got 2"));
    }

    #[test]
    fn data_fn_index_rules() {
        let d = diags("MR X { isError(Output(Input(0), 1)); }");
        assert_eq!(d.len(), 1);
        assert!(d[0].message.contains("1-based"));
        let d = diags("MR X { isError(Output(Input(\"x\"), 1)); }");
        assert!(d[0].message.contains("must be an integer"));
    }

    #[test]
    fn random_value_type_names() {
        assert!(diags("MR X { EQUAL(Input(2), setParameterValue(Input(1), 1, 1, RandomValue(\"string\"))); }").is_empty());
        let d = diags("MR X { RandomValue(\"float\") == 1; }");
        assert!(d[0].message.contains("RandomValue type"));
    }

    #[test]
    fn duplicate_names_across_units() {
        let a = parse("package p; MR X { TRUE(); }").unwrap();
        let b = parse("package p; MR X { FALSE(); }").unwrap();
        let d = check_set(&[("a.smrl", &a), ("b.smrl", &b)]);
        assert_eq!(d.len(), 1);
        assert_eq!(d[0].file, "b.smrl");
        assert!(d[0].message.contains("duplicate relation p.X"));
    }

    #[test]
    fn boolean_operands_required() {
        let d = diags("MR X { AND(TRUE(), 5); }");
        assert_eq!(d.len(), 1);
        assert!(d[0].message.contains("must be boolean"));
    }

    #[test]
    fn diagnostic_display_format() {
        let d = diags("MR X { EQUAL(5, Input(1)); }");
        let rendered = d[0].to_string();
        assert!(
            rendered.starts_with("test.smrl:1:14: error: "),
            "unexpected rendering {rendered}"
        );
    }

    #[test]
    fn var_bound_to_data_fn_is_designator() {
        let src = "MR X { var fu = Input(2); EQUAL(fu, changeCredentials(Input(1), User(1))); }";
        assert!(diags(src).is_empty());
        let src = "MR X { var n = 5; EQUAL(n, Input(1)); }";
        let d = diags(src);
        assert_eq!(d.len(), 1);
    }
}
