//! Relation evaluation. A compiled relation knows which input types it
//! draws from the provider; running it evaluates the body statements
//! against one combination of provider views.

use std::collections::BTreeMap;

use rand::distributions::Alphanumeric;
use rand::Rng;

use crate::dsl::ast::{
    CmpOp, DataFnName, Expr, ExprKind, MetaOp, RelationAst, Statement,
};
use crate::error::EvalError;
use crate::exec::context::ExecutionContext;
use crate::exec::value::{designator_key, ActionView, Value};
use crate::exec::webfns;
use crate::model::InputSequence;

/// A relation plus the provider demands extracted from its body.
#[derive(Debug, Clone)]
pub struct CompiledRelation {
    pub name: String,
    pub qualified_name: String,
    /// Input type name → highest 1-based index the body dereferences.
    pub referenced_input_types: BTreeMap<String, usize>,
    ast: RelationAst,
}

impl CompiledRelation {
    pub fn compile(ast: RelationAst) -> Self {
        let mut types = BTreeMap::new();
        for stmt in &ast.body {
            collect_statement(stmt, &mut types);
        }
        CompiledRelation {
            name: ast.name.clone(),
            qualified_name: ast.qualified_name(),
            referenced_input_types: types,
            ast,
        }
    }

    /// The referenced type names in iteration order.
    pub fn source_types(&self) -> Vec<String> {
        self.referenced_input_types.keys().cloned().collect()
    }

    /// Evaluates the body against the provider views in `ctx`. `false`
    /// means some boolean statement evaluated to false: the relation is
    /// violated for this view combination.
    pub fn run(&self, ctx: &mut ExecutionContext<'_>) -> Result<bool, EvalError> {
        let mut interp = Interp {
            ctx,
            scopes: vec![BTreeMap::new()],
        };
        interp.eval_block(&self.ast.body)
    }
}

fn collect_statement(stmt: &Statement, out: &mut BTreeMap<String, usize>) {
    match stmt {
        Statement::Expr(e) => collect_expr(e, out),
        Statement::VarDecl { value, .. } => collect_expr(value, out),
        Statement::For { iterable, body, .. } => {
            collect_expr(iterable, out);
            for s in body {
                collect_statement(s, out);
            }
        }
    }
}

fn collect_expr(expr: &Expr, out: &mut BTreeMap<String, usize>) {
    match &expr.kind {
        ExprKind::DataFn { name, args } => {
            // Output derives from an input already counted through its
            // argument; every other data function names a provider pool.
            if *name != DataFnName::Output {
                let index = if name.bindable() {
                    match args.first().map(|a| &a.kind) {
                        Some(ExprKind::Int(n)) if *n >= 1 => *n as usize,
                        _ => 1,
                    }
                } else {
                    0
                };
                let entry = out.entry(name.name().to_string()).or_insert(0);
                *entry = (*entry).max(index);
            }
            for a in args {
                collect_expr(a, out);
            }
        }
        ExprKind::MetaOp { args, .. } | ExprKind::Call { args, .. } => {
            for a in args {
                collect_expr(a, out);
            }
        }
        ExprKind::Field { base, .. } => collect_expr(base, out),
        ExprKind::Compare { lhs, rhs, .. }
        | ExprKind::Arith { lhs, rhs, .. }
        | ExprKind::Range { lo: lhs, hi: rhs } => {
            collect_expr(lhs, out);
            collect_expr(rhs, out);
        }
        ExprKind::Int(_) | ExprKind::Str(_) | ExprKind::Bool(_) | ExprKind::Var(_) => {}
    }
}

/// Positions of a sequence's actions, each tagged with whether some login
/// submission precedes it.
pub(crate) fn action_views(seq: &InputSequence) -> Vec<ActionView> {
    let mut views = Vec::with_capacity(seq.actions.len());
    let mut seen_login = false;
    for (i, action) in seq.actions.iter().enumerate() {
        views.push(ActionView {
            action: action.clone(),
            position: i + 1,
            after_login: seen_login,
        });
        if action.is_login {
            seen_login = true;
        }
    }
    views
}

struct Interp<'a, 'b> {
    ctx: &'a mut ExecutionContext<'b>,
    scopes: Vec<BTreeMap<String, Value>>,
}

impl Interp<'_, '_> {
    /// Runs statements in order. Returns false (and stops) as soon as a
    /// boolean statement is violated; values of other statements are
    /// discarded. EQUAL bindings live until the end of their statement.
    fn eval_block(&mut self, stmts: &[Statement]) -> Result<bool, EvalError> {
        for stmt in stmts {
            match stmt {
                Statement::Expr(expr) => {
                    let value = self.eval(expr);
                    let violated = matches!(value, Ok(Value::Bool(false)));
                    if violated {
                        self.ctx.capture_failure();
                    }
                    self.ctx.clear_bindings();
                    value?;
                    if violated {
                        return Ok(false);
                    }
                }
                Statement::VarDecl { name, value, .. } => {
                    let v = self.eval_decl(value)?;
                    self.scopes
                        .last_mut()
                        .expect("scope stack never empty")
                        .insert(name.clone(), v);
                }
                Statement::For {
                    var,
                    iterable,
                    body,
                    ..
                } => {
                    let items: Vec<Value> = match self.eval(iterable)? {
                        Value::Range(lo, hi) => (lo..=hi).map(Value::Int).collect(),
                        Value::Actions(views) => views.into_iter().map(Value::Action).collect(),
                        other => {
                            return Err(EvalError::Kind {
                                context: "for".to_string(),
                                expected: "range or action list".to_string(),
                                got: other.kind().to_string(),
                            })
                        }
                    };
                    for item in items {
                        let mut scope = BTreeMap::new();
                        scope.insert(var.clone(), item);
                        self.scopes.push(scope);
                        let ok = self.eval_block(body);
                        self.scopes.pop();
                        if !ok? {
                            return Ok(false);
                        }
                    }
                }
            }
        }
        Ok(true)
    }

    /// `var x = Input(2)` aliases the designator without consuming it, so
    /// a later EQUAL on `x` can still bind. Anything else is evaluated
    /// eagerly.
    fn eval_decl(&mut self, value: &Expr) -> Result<Value, EvalError> {
        if let ExprKind::DataFn { name, args } = &value.kind {
            if name.bindable() {
                let index = self.eval_index(args)?;
                return Ok(Value::Designator(*name, index));
            }
        }
        self.eval(value)
    }

    fn raw_var(&self, name: &str) -> Option<&Value> {
        self.scopes.iter().rev().find_map(|s| s.get(name))
    }

    /// The designator named by `expr`, if it is one: a bindable data
    /// function or a variable aliasing one.
    fn designator_of(&mut self, expr: &Expr) -> Result<Option<(DataFnName, usize)>, EvalError> {
        match &expr.kind {
            ExprKind::DataFn { name, args } if name.bindable() => {
                let index = self.eval_index(args)?;
                Ok(Some((*name, index)))
            }
            ExprKind::Var(name) => match self.raw_var(name) {
                Some(Value::Designator(ty, index)) => Ok(Some((*ty, *index))),
                _ => Ok(None),
            },
            _ => Ok(None),
        }
    }

    fn eval_index(&mut self, args: &[Expr]) -> Result<usize, EvalError> {
        match args.first() {
            None => Ok(1),
            Some(arg) => {
                let n = self.eval_int(arg)?;
                if n < 1 {
                    return Err(EvalError::Index(format!(
                        "designator index {n} must be at least 1"
                    )));
                }
                Ok(n as usize)
            }
        }
    }

    fn resolve_designator(&mut self, ty: DataFnName, index: usize) -> Result<Value, EvalError> {
        let key = designator_key(ty.name(), index);
        if let Some(bound) = self.ctx.binding(&key) {
            return Ok(bound.clone());
        }
        self.ctx.read_source(ty.name(), index)
    }

    fn eval(&mut self, expr: &Expr) -> Result<Value, EvalError> {
        match &expr.kind {
            ExprKind::Int(n) => Ok(Value::Int(*n)),
            ExprKind::Str(s) => Ok(Value::Str(s.clone())),
            ExprKind::Bool(b) => Ok(Value::Bool(*b)),
            ExprKind::Var(name) => match self.raw_var(name).cloned() {
                Some(Value::Designator(ty, index)) => self.resolve_designator(ty, index),
                Some(v) => Ok(v),
                None => Err(EvalError::Unsupported(format!("unresolved variable {name}"))),
            },
            ExprKind::MetaOp { op, args } => self.eval_meta(*op, args),
            ExprKind::DataFn { name, args } => self.eval_data_fn(*name, args),
            ExprKind::Call { name, args } => {
                let mut values = Vec::with_capacity(args.len());
                for a in args {
                    values.push(self.eval(a)?);
                }
                webfns::call(self.ctx, name, values)
            }
            ExprKind::Field { base, name } => {
                let base = self.eval(base)?;
                self.eval_field(base, name)
            }
            ExprKind::Compare { op, lhs, rhs } => self.eval_compare(*op, lhs, rhs),
            ExprKind::Arith { op, lhs, rhs } => {
                let l = self.eval_int(lhs)?;
                let r = self.eval_int(rhs)?;
                Ok(Value::Int(match op {
                    crate::dsl::ast::ArithOp::Add => l + r,
                    crate::dsl::ast::ArithOp::Sub => l - r,
                }))
            }
            ExprKind::Range { lo, hi } => {
                let lo = self.eval_int(lo)?;
                let hi = self.eval_int(hi)?;
                Ok(Value::Range(lo, hi))
            }
        }
    }

    fn eval_int(&mut self, expr: &Expr) -> Result<i64, EvalError> {
        match self.eval(expr)? {
            Value::Int(n) => Ok(n),
            other => Err(EvalError::Kind {
                context: "integer expression".to_string(),
                expected: "integer".to_string(),
                got: other.kind().to_string(),
            }),
        }
    }

    fn eval_bool(&mut self, expr: &Expr) -> Result<bool, EvalError> {
        match self.eval(expr)? {
            Value::Bool(b) => Ok(b),
            other => Err(EvalError::Kind {
                context: "boolean operand".to_string(),
                expected: "boolean".to_string(),
                got: other.kind().to_string(),
            }),
        }
    }

    fn eval_meta(&mut self, op: MetaOp, args: &[Expr]) -> Result<Value, EvalError> {
        let b = match op {
            MetaOp::True => true,
            MetaOp::False => false,
            MetaOp::Not => !self.eval_bool(&args[0])?,
            MetaOp::And => {
                let mut all = true;
                for a in args {
                    if !self.eval_bool(a)? {
                        all = false;
                        break;
                    }
                }
                all
            }
            MetaOp::Or => {
                let mut any = false;
                for a in args {
                    if self.eval_bool(a)? {
                        any = true;
                        break;
                    }
                }
                any
            }
            MetaOp::Implies => {
                if self.eval_bool(&args[0])? {
                    self.eval_bool(&args[1])?
                } else {
                    true
                }
            }
            MetaOp::Equal => self.eval_equal(&args[0], &args[1])?,
        };
        Ok(Value::Bool(b))
    }

    /// EQUAL doubles as assignment: an unbound, unread designator on the
    /// left takes the right side as its binding and the result is true.
    /// A bound designator compares against its binding; one the provider
    /// already served compares against the provider's value.
    fn eval_equal(&mut self, lhs: &Expr, rhs: &Expr) -> Result<bool, EvalError> {
        if let Some((ty, index)) = self.designator_of(lhs)? {
            let key = designator_key(ty.name(), index);
            if let Some(bound) = self.ctx.binding(&key).cloned() {
                let right = self.eval(rhs)?;
                return self.value_equal(&bound, &right);
            }
            if self.ctx.is_used(&key) {
                let left = self.ctx.read_source(ty.name(), index)?;
                let right = self.eval(rhs)?;
                return self.value_equal(&left, &right);
            }
            let right = self.eval(rhs)?;
            self.ctx.bind(&key, right);
            return Ok(true);
        }
        let left = self.eval(lhs)?;
        let right = self.eval(rhs)?;
        self.value_equal(&left, &right)
    }

    fn eval_compare(&mut self, op: CmpOp, lhs: &Expr, rhs: &Expr) -> Result<Value, EvalError> {
        match op {
            CmpOp::Eq | CmpOp::Ne => {
                let l = self.eval(lhs)?;
                let r = self.eval(rhs)?;
                let eq = self.value_equal(&l, &r)?;
                Ok(Value::Bool(if op == CmpOp::Eq { eq } else { !eq }))
            }
            _ => {
                let l = self.eval_int(lhs)?;
                let r = self.eval_int(rhs)?;
                Ok(Value::Bool(match op {
                    CmpOp::Lt => l < r,
                    CmpOp::Le => l <= r,
                    CmpOp::Gt => l > r,
                    CmpOp::Ge => l >= r,
                    CmpOp::Eq | CmpOp::Ne => unreachable!(),
                }))
            }
        }
    }

    /// Domain equality. Inputs compare by their actions, outputs page by
    /// page, pages by status and body similarity.
    fn value_equal(&mut self, a: &Value, b: &Value) -> Result<bool, EvalError> {
        let eq = match (a, b) {
            (Value::Int(x), Value::Int(y)) => x == y,
            (Value::Str(x), Value::Str(y)) => x == y,
            (Value::Bool(x), Value::Bool(y)) => x == y,
            (Value::Input(x), Value::Input(y)) => x.content_eq(y),
            (Value::Output(x), Value::Output(y)) => {
                x.pages.len() == y.pages.len()
                    && x.pages
                        .iter()
                        .zip(&y.pages)
                        .all(|(p, q)| self.ctx.pages_equal(p, q))
            }
            (Value::Page(x), Value::Page(y)) => self.ctx.pages_equal(x, y),
            (Value::User(x), Value::User(y)) => x == y,
            (Value::Session(x), Value::Session(y)) => x.id == y.id,
            (Value::Action(x), Value::Action(y)) => x.action == y.action,
            (Value::Params(x), Value::Params(y)) => x == y,
            (x, y) => {
                return Err(EvalError::Kind {
                    context: "equality".to_string(),
                    expected: x.kind().to_string(),
                    got: y.kind().to_string(),
                })
            }
        };
        Ok(eq)
    }

    fn eval_data_fn(&mut self, name: DataFnName, args: &[Expr]) -> Result<Value, EvalError> {
        match name {
            DataFnName::Input | DataFnName::Action | DataFnName::Session | DataFnName::User => {
                let index = self.eval_index(args)?;
                self.resolve_designator(name, index)
            }
            DataFnName::Output => {
                let seq = match self.eval(&args[0])? {
                    Value::Input(seq) => seq,
                    other => {
                        return Err(EvalError::Kind {
                            context: "Output".to_string(),
                            expected: "input sequence".to_string(),
                            got: other.kind().to_string(),
                        })
                    }
                };
                let output = self.ctx.output_of(&seq);
                match args.get(1) {
                    None => Ok(Value::Output(output)),
                    Some(arg) => {
                        let pos = self.eval_int(arg)?;
                        if pos < 1 || pos as usize > output.pages.len() {
                            return Err(EvalError::Index(format!(
                                "Output: page position {pos} outside 1..={}",
                                output.pages.len()
                            )));
                        }
                        Ok(Value::Page(output.pages[(pos - 1) as usize].clone()))
                    }
                }
            }
            DataFnName::HttpMethod => self.ctx.read_source("HttpMethod", 1),
            DataFnName::RandomFilePath => self.ctx.read_source("RandomFilePath", 1),
            DataFnName::RandomValue => {
                let ty = match self.eval(&args[0])? {
                    Value::Str(s) => s,
                    other => {
                        return Err(EvalError::Kind {
                            context: "RandomValue".to_string(),
                            expected: "type name string".to_string(),
                            got: other.kind().to_string(),
                        })
                    }
                };
                match ty.as_str() {
                    "int" => Ok(Value::Int(self.ctx.rng.gen_range(0..1_000_000))),
                    "string" => {
                        let s: String = (&mut self.ctx.rng)
                            .sample_iter(Alphanumeric)
                            .take(8)
                            .map(char::from)
                            .collect();
                        Ok(Value::Str(s))
                    }
                    "boolean" => Ok(Value::Bool(self.ctx.rng.gen())),
                    other => Err(EvalError::Unsupported(format!(
                        "RandomValue: unknown type {other:?}"
                    ))),
                }
            }
        }
    }

    fn eval_field(&mut self, base: Value, name: &str) -> Result<Value, EvalError> {
        let err = |base: &Value, name: &str| {
            Err(EvalError::Unsupported(format!(
                "no field {name} on {}",
                base.kind()
            )))
        };
        match (base, name) {
            (Value::Input(seq), "actions") => Ok(Value::Actions(action_views(&seq))),
            (Value::Input(seq), "length") => Ok(Value::Int(seq.actions.len() as i64)),
            (Value::Action(view), "url") => Ok(Value::Str(view.action.url.to_string())),
            (Value::Action(view), "position") => Ok(Value::Int(view.position as i64)),
            (Value::Action(view), "parameters") => Ok(Value::Params(view.action.all_params())),
            (Value::Actions(views), "length") => Ok(Value::Int(views.len() as i64)),
            (Value::Params(params), "length") => Ok(Value::Int(params.len() as i64)),
            (Value::Str(s), "length") => Ok(Value::Int(s.chars().count() as i64)),
            (base, name) => err(&base, name),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::testing::{compile_src, seq, Harness, StubExecutor};

    #[test]
    fn false_statement_fails_the_relation() {
        let h = Harness::new(vec![seq("a", &["https://h.test/x"])]);
        let rel = compile_src("MR t { FALSE(); }");
        assert!(!h.run(&rel).unwrap());
        let rel = compile_src("MR t { TRUE(); }");
        assert!(h.run(&rel).unwrap());
    }

    #[test]
    fn implies_truth_table_and_short_circuit() {
        let h = Harness::new(vec![seq("a", &["https://h.test/x"])]);
        assert!(h.run(&compile_src("MR t { IMPLIES(FALSE(), FALSE()); }")).unwrap());
        assert!(h.run(&compile_src("MR t { IMPLIES(FALSE(), TRUE()); }")).unwrap());
        assert!(!h.run(&compile_src("MR t { IMPLIES(TRUE(), FALSE()); }")).unwrap());
        assert!(h.run(&compile_src("MR t { IMPLIES(TRUE(), TRUE()); }")).unwrap());

        // A false antecedent must suppress the consequent entirely: the
        // Output there would otherwise execute against the stub.
        let exec = StubExecutor::default();
        let rel = compile_src("MR t { IMPLIES(FALSE(), isError(Output(Input(1), 1))); }");
        assert!(h.run_with(&rel, &exec).unwrap());
        assert_eq!(exec.calls(), 0);
    }

    #[test]
    fn and_or_short_circuit() {
        let h = Harness::new(vec![seq("a", &["https://h.test/x"])]);
        let exec = StubExecutor::default();
        let rel = compile_src("MR t { NOT(AND(FALSE(), isError(Output(Input(1), 1)))); }");
        assert!(h.run_with(&rel, &exec).unwrap());
        assert_eq!(exec.calls(), 0);
        let rel = compile_src("MR t { OR(TRUE(), isError(Output(Input(1), 1))); }");
        assert!(h.run_with(&rel, &exec).unwrap());
        assert_eq!(exec.calls(), 0);
    }

    #[test]
    fn referenced_types_take_the_highest_index() {
        let rel = compile_src(
            "MR t { for (var a : Input(1).actions) { \
             IMPLIES(AND(cannotReachThroughGUI(User(2), a.url), \
             NOT(isError(Output(Input(1), a.position))), \
             EQUAL(Input(2), changeCredentials(Input(1), User(2)))), \
             NOT(EQUAL(Output(Input(1), a.position), Output(Input(2), a.position)))); } }",
        );
        let mut want = BTreeMap::new();
        want.insert("Input".to_string(), 2);
        want.insert("User".to_string(), 2);
        assert_eq!(rel.referenced_input_types, want);
        assert_eq!(rel.source_types(), vec!["Input".to_string(), "User".to_string()]);
    }

    #[test]
    fn equal_binds_then_compares_against_the_binding() {
        let h = Harness::new(vec![
            seq("a", &["https://h.test/x"]),
            seq("b", &["https://h.test/y"]),
        ]);
        // Second EQUAL sees Input(2) bound to Input(1)'s content.
        let rel = compile_src(
            "MR t { AND(EQUAL(Input(2), Input(1)), EQUAL(Input(2), Input(1))); }",
        );
        assert!(h.run(&rel).unwrap());
    }

    #[test]
    fn equal_on_a_used_designator_compares_provider_values() {
        let h = Harness::new(vec![
            seq("a", &["https://h.test/x"]),
            seq("b", &["https://h.test/y"]),
        ]);
        // Statement 1 reads Input(2) from the provider, so statement 2
        // cannot bind it and must compare: pool items a and b differ.
        let rel = compile_src(
            "MR t { OR(isError(Output(Input(2), 1)), TRUE()); EQUAL(Input(2), Input(1)); }",
        );
        assert!(!h.run(&rel).unwrap());
    }

    #[test]
    fn bindings_clear_between_statements() {
        let h = Harness::new(vec![
            seq("a", &["https://h.test/x"]),
            seq("b", &["https://h.test/y"]),
        ]);
        // Each statement binds afresh; neither reads the provider, so
        // both succeed even though the pool items differ.
        let rel = compile_src(
            "MR t { EQUAL(Input(2), Input(1)); EQUAL(Input(2), Input(1)); }",
        );
        assert!(h.run(&rel).unwrap());
    }

    #[test]
    fn var_aliases_a_designator_without_reading_it() {
        let h = Harness::new(vec![
            seq("a", &["https://h.test/x"]),
            seq("b", &["https://h.test/y"]),
        ]);
        // If the declaration consumed Input(2) the EQUAL would have to
        // compare two distinct pool items and fail.
        let rel = compile_src("MR t { var x = Input(2); EQUAL(x, Input(1)); }");
        assert!(h.run(&rel).unwrap());
    }

    #[test]
    fn outputs_are_memoized_per_run() {
        let h = Harness::new(vec![seq("a", &["https://h.test/x"])]);
        let exec = StubExecutor::default();
        let rel = compile_src(
            "MR t { EQUAL(Output(Input(1), 1), Output(Input(1), 1)); }",
        );
        assert!(h.run_with(&rel, &exec).unwrap());
        assert_eq!(exec.calls(), 1);
    }

    #[test]
    fn ranges_are_inclusive_and_empty_when_reversed() {
        let h = Harness::new(vec![
            seq("a", &["https://h.test/x"]),
            seq("b", &["https://h.test/y"]),
            seq("c", &["https://h.test/z"]),
        ]);
        let exec = StubExecutor::default();
        let rel = compile_src(
            "MR t { for (var i : 1 .. 3) { OR(isError(Output(Input(i), 1)), TRUE()); } }",
        );
        assert!(h.run_with(&rel, &exec).unwrap());
        assert_eq!(exec.calls(), 3);

        let rel = compile_src("MR t { for (var i : 3 .. 2) { FALSE(); } }");
        assert!(h.run(&rel).unwrap());
    }

    #[test]
    fn action_views_tag_positions_after_a_login() {
        let mut login = crate::model::Action::form_submit(
            "POST",
            "https://h.test/login",
            vec![("username".into(), "u".into()), ("password".into(), "p".into())],
        )
        .unwrap();
        login.set_auth_flags(true, false).unwrap();
        let before = crate::model::Action::request("GET", "https://h.test/").unwrap();
        let after = crate::model::Action::request("GET", "https://h.test/home").unwrap();
        let seq = crate::model::InputSequence::new(
            "s",
            vec![before, login, after],
            crate::model::Provenance::Crawled,
            None,
        )
        .unwrap();
        let views = action_views(&seq);
        assert_eq!(
            views.iter().map(|v| (v.position, v.after_login)).collect::<Vec<_>>(),
            vec![(1, false), (2, false), (3, true)]
        );
    }

    #[test]
    fn arithmetic_and_ordered_comparison() {
        let h = Harness::new(vec![seq("a", &["https://h.test/x"])]);
        assert!(h.run(&compile_src("MR t { 1 + 2 == 3; }")).unwrap());
        assert!(h.run(&compile_src("MR t { 5 - 2 >= 3; }")).unwrap());
        assert!(!h.run(&compile_src("MR t { 2 > 3; }")).unwrap());
        assert!(h.run(&compile_src("MR t { \"ab\".length == 2; }")).unwrap());
    }

    #[test]
    fn fresh_designator_read_marks_it_used_for_later_statements() {
        let h = Harness::new(vec![seq("a", &["https://h.test/x"])]);
        // Same designator read twice resolves to the same pool item.
        let rel = compile_src("MR t { EQUAL(Output(Input(1)), Output(Input(1))); }");
        assert!(h.run(&rel).unwrap());
    }
}
