//! Canonical pretty-printer. `parse(print(ast))` yields a structurally
//! equal tree, which the test suite exercises with generated syntax.

use super::ast::*;

/// Prints a compilation unit. Headers are taken from the first relation;
/// all relations of one unit share them by construction.
pub fn print(relations: &[RelationAst]) -> String {
    let mut out = String::new();
    if let Some(first) = relations.first() {
        if let Some(pkg) = &first.package {
            out.push_str(&format!("package {pkg};\n\n"));
        }
        for import in &first.imports {
            out.push_str(&format!("import {import};\n"));
        }
        if !first.imports.is_empty() {
            out.push('\n');
        }
    }
    for (i, rel) in relations.iter().enumerate() {
        if i > 0 {
            out.push('\n');
        }
        out.push_str(&format!("MR {} {{\n", rel.name));
        for stmt in &rel.body {
            print_stmt(stmt, 1, &mut out);
        }
        out.push_str("}\n");
    }
    out
}

fn indent(depth: usize, out: &mut String) {
    for _ in 0..depth {
        out.push_str("    ");
    }
}

fn print_stmt(stmt: &Statement, depth: usize, out: &mut String) {
    match stmt {
        Statement::For {
            var,
            iterable,
            body,
            ..
        } => {
            indent(depth, out);
            out.push_str(&format!("for (var {var} : {}) {{\n", expr_str(iterable)));
            for inner in body {
                print_stmt(inner, depth + 1, out);
            }
            indent(depth, out);
            out.push_str("}\n");
        }
        Statement::VarDecl { name, value, .. } => {
            indent(depth, out);
            out.push_str(&format!("var {name} = {};\n", expr_str(value)));
        }
        Statement::Expr(expr) => {
            indent(depth, out);
            out.push_str(&expr_str(expr));
            out.push_str(";\n");
        }
    }
}

fn is_binary(expr: &Expr) -> bool {
    matches!(
        expr.kind,
        ExprKind::Compare { .. } | ExprKind::Arith { .. } | ExprKind::Range { .. }
    )
}

/// Operand of a binary operator or a field access: parenthesized when it is
/// itself binary, so precedence never has to be reconstructed.
fn operand_str(expr: &Expr) -> String {
    if is_binary(expr) {
        format!("({})", expr_str(expr))
    } else {
        expr_str(expr)
    }
}

fn expr_str(expr: &Expr) -> String {
    match &expr.kind {
        ExprKind::Int(n) => n.to_string(),
        ExprKind::Str(s) => {
            let escaped = s
                .replace('\\', "\\\\")
                .replace('"', "\\\"")
                .replace('\n', "\\n")
                .replace('\t', "\\t")
                .replace('\r', "\\r");
            format!("\"{escaped}\"")
        }
        ExprKind::Bool(true) => "true".to_string(),
        ExprKind::Bool(false) => "false".to_string(),
        ExprKind::Var(name) => name.clone(),
        ExprKind::MetaOp { op, args } => call_str(op.name(), args),
        ExprKind::DataFn { name, args } => call_str(name.name(), args),
        ExprKind::Call { name, args } => call_str(name, args),
        ExprKind::Field { base, name } => format!("{}.{name}", operand_str(base)),
        ExprKind::Compare { op, lhs, rhs } => {
            format!("{} {} {}", operand_str(lhs), op.symbol(), operand_str(rhs))
        }
        ExprKind::Arith { op, lhs, rhs } => {
            format!("{} {} {}", operand_str(lhs), op.symbol(), operand_str(rhs))
        }
        ExprKind::Range { lo, hi } => format!("{} .. {}", operand_str(lo), operand_str(hi)),
    }
}

fn call_str(name: &str, args: &[Expr]) -> String {
    let rendered: Vec<String> = args.iter().map(expr_str).collect();
    format!("{name}({})", rendered.join(", "))
}
