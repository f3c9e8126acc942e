//! Recursive-descent parser producing [`RelationAst`] values.

use thiserror::Error;

use super::ast::*;
use super::token::{tokenize, LexError, Tok, Token};

#[derive(Debug, Clone, Error, PartialEq)]
pub enum ParseError {
    #[error(transparent)]
    Lex(#[from] LexError),
    #[error("{line}:{col}: expected {expected}, found {found}")]
    Unexpected {
        line: u32,
        col: u32,
        expected: String,
        found: String,
    },
}

struct Parser {
    tokens: Vec<Token>,
    pos: usize,
    end: Span,
}

impl Parser {
    fn peek(&self) -> Option<&Tok> {
        self.tokens.get(self.pos).map(|t| &t.tok)
    }

    fn span(&self) -> Span {
        self.tokens
            .get(self.pos)
            .map(|t| t.span)
            .unwrap_or(self.end)
    }

    fn found(&self) -> String {
        match self.peek() {
            Some(tok) => tok.to_string(),
            None => "end of input".to_string(),
        }
    }

    fn err<T>(&self, expected: &str) -> Result<T, ParseError> {
        let span = self.span();
        Err(ParseError::Unexpected {
            line: span.line,
            col: span.col,
            expected: expected.to_string(),
            found: self.found(),
        })
    }

    fn eat(&mut self, want: &Tok, expected: &str) -> Result<Span, ParseError> {
        if self.peek() == Some(want) {
            let span = self.span();
            self.pos += 1;
            Ok(span)
        } else {
            self.err(expected)
        }
    }

    fn eat_ident(&mut self, expected: &str) -> Result<(String, Span), ParseError> {
        match self.peek() {
            Some(Tok::Ident(name)) => {
                let name = name.clone();
                let span = self.span();
                self.pos += 1;
                Ok((name, span))
            }
            _ => self.err(expected),
        }
    }

    fn dotted_name(&mut self) -> Result<String, ParseError> {
        let (mut name, _) = self.eat_ident("a name")?;
        while self.peek() == Some(&Tok::Dot) {
            self.pos += 1;
            let (part, _) = self.eat_ident("a name segment after '.'")?;
            name.push('.');
            name.push_str(&part);
        }
        Ok(name)
    }

    fn file(&mut self) -> Result<Vec<RelationAst>, ParseError> {
        let package = if self.peek() == Some(&Tok::Package) {
            self.pos += 1;
            let name = self.dotted_name()?;
            self.eat(&Tok::Semi, "';' after package declaration")?;
            Some(name)
        } else {
            None
        };
        let mut imports = Vec::new();
        while self.peek() == Some(&Tok::Import) {
            self.pos += 1;
            imports.push(self.dotted_name()?);
            self.eat(&Tok::Semi, "';' after import")?;
        }
        let mut relations = Vec::new();
        while self.peek().is_some() {
            relations.push(self.relation(&package, &imports)?);
        }
        if relations.is_empty() {
            return self.err("an MR declaration");
        }
        Ok(relations)
    }

    fn relation(
        &mut self,
        package: &Option<String>,
        imports: &[String],
    ) -> Result<RelationAst, ParseError> {
        self.eat(&Tok::Mr, "'MR'")?;
        let (name, name_span) = self.eat_ident("a relation name")?;
        self.eat(&Tok::LBrace, "'{' opening the relation body")?;
        let body = self.block()?;
        Ok(RelationAst {
            package: package.clone(),
            imports: imports.to_vec(),
            name,
            name_span,
            body,
        })
    }

    /// Statements up to and including the closing brace.
    fn block(&mut self) -> Result<Vec<Statement>, ParseError> {
        let mut stmts = Vec::new();
        loop {
            match self.peek() {
                Some(Tok::RBrace) => {
                    self.pos += 1;
                    return Ok(stmts);
                }
                Some(_) => stmts.push(self.statement()?),
                None => return self.err("a statement or '}'"),
            }
        }
    }

    fn statement(&mut self) -> Result<Statement, ParseError> {
        match self.peek() {
            Some(Tok::For) => {
                let span = self.span();
                self.pos += 1;
                self.eat(&Tok::LParen, "'(' after 'for'")?;
                self.eat(&Tok::Var, "'var' introducing the loop variable")?;
                let (var, _) = self.eat_ident("a loop variable name")?;
                self.eat(&Tok::Colon, "':' between loop variable and iterable")?;
                let iterable = self.expr()?;
                self.eat(&Tok::RParen, "')' closing the loop header")?;
                self.eat(&Tok::LBrace, "'{' opening the loop body")?;
                let body = self.block()?;
                Ok(Statement::For {
                    var,
                    iterable,
                    body,
                    span,
                })
            }
            Some(Tok::Var) => {
                let span = self.span();
                self.pos += 1;
                let (name, _) = self.eat_ident("a variable name")?;
                self.eat(&Tok::Assign, "'=' after the variable name")?;
                let value = self.expr()?;
                self.eat(&Tok::Semi, "';' after the declaration")?;
                Ok(Statement::VarDecl { name, value, span })
            }
            _ => {
                let expr = self.expr()?;
                self.eat(&Tok::Semi, "';' after the expression")?;
                Ok(Statement::Expr(expr))
            }
        }
    }

    fn expr(&mut self) -> Result<Expr, ParseError> {
        self.comparison()
    }

    fn comparison(&mut self) -> Result<Expr, ParseError> {
        let lhs = self.range()?;
        let op = match self.peek() {
            Some(Tok::EqEq) => CmpOp::Eq,
            Some(Tok::NotEq) => CmpOp::Ne,
            Some(Tok::Lt) => CmpOp::Lt,
            Some(Tok::Le) => CmpOp::Le,
            Some(Tok::Gt) => CmpOp::Gt,
            Some(Tok::Ge) => CmpOp::Ge,
            _ => return Ok(lhs),
        };
        let span = lhs.span;
        self.pos += 1;
        let rhs = self.range()?;
        Ok(Expr::new(
            ExprKind::Compare {
                op,
                lhs: Box::new(lhs),
                rhs: Box::new(rhs),
            },
            span,
        ))
    }

    fn range(&mut self) -> Result<Expr, ParseError> {
        let lo = self.additive()?;
        if self.peek() == Some(&Tok::DotDot) {
            let span = lo.span;
            self.pos += 1;
            let hi = self.additive()?;
            Ok(Expr::new(
                ExprKind::Range {
                    lo: Box::new(lo),
                    hi: Box::new(hi),
                },
                span,
            ))
        } else {
            Ok(lo)
        }
    }

    fn additive(&mut self) -> Result<Expr, ParseError> {
        let mut lhs = self.postfix()?;
        loop {
            let op = match self.peek() {
                Some(Tok::Plus) => ArithOp::Add,
                Some(Tok::Minus) => ArithOp::Sub,
                _ => return Ok(lhs),
            };
            let span = lhs.span;
            self.pos += 1;
            let rhs = self.postfix()?;
            lhs = Expr::new(
                ExprKind::Arith {
                    op,
                    lhs: Box::new(lhs),
                    rhs: Box::new(rhs),
                },
                span,
            );
        }
    }

    fn postfix(&mut self) -> Result<Expr, ParseError> {
        let mut expr = self.primary()?;
        while self.peek() == Some(&Tok::Dot) {
            self.pos += 1;
            let (name, span) = self.eat_ident("an accessor name after '.'")?;
            expr = Expr::new(
                ExprKind::Field {
                    base: Box::new(expr),
                    name,
                },
                span,
            );
        }
        Ok(expr)
    }

    fn primary(&mut self) -> Result<Expr, ParseError> {
        let span = self.span();
        match self.peek().cloned() {
            Some(Tok::Int(n)) => {
                self.pos += 1;
                Ok(Expr::new(ExprKind::Int(n), span))
            }
            Some(Tok::Str(s)) => {
                self.pos += 1;
                Ok(Expr::new(ExprKind::Str(s), span))
            }
            Some(Tok::True) => {
                self.pos += 1;
                Ok(Expr::new(ExprKind::Bool(true), span))
            }
            Some(Tok::False) => {
                self.pos += 1;
                Ok(Expr::new(ExprKind::Bool(false), span))
            }
            Some(Tok::LParen) => {
                self.pos += 1;
                let inner = self.expr()?;
                self.eat(&Tok::RParen, "')'")?;
                Ok(inner)
            }
            Some(Tok::Ident(name)) => {
                self.pos += 1;
                if self.peek() == Some(&Tok::LParen) {
                    self.pos += 1;
                    let args = self.args()?;
                    Ok(Expr::new(classify_call(&name, args), span))
                } else {
                    Ok(Expr::new(ExprKind::Var(name), span))
                }
            }
            _ => self.err("an expression"),
        }
    }

    /// Call arguments up to and including the closing parenthesis.
    fn args(&mut self) -> Result<Vec<Expr>, ParseError> {
        let mut args = Vec::new();
        if self.peek() == Some(&Tok::RParen) {
            self.pos += 1;
            return Ok(args);
        }
        loop {
            args.push(self.expr()?);
            match self.peek() {
                Some(Tok::Comma) => {
                    self.pos += 1;
                }
                Some(Tok::RParen) => {
                    self.pos += 1;
                    return Ok(args);
                }
                _ => return self.err("',' or ')' in the argument list"),
            }
        }
    }
}

/// Calls are classified at parse time: boolean operators and data functions
/// have fixed names, everything else is a web function call.
fn classify_call(name: &str, args: Vec<Expr>) -> ExprKind {
    if let Some(op) = MetaOp::from_name(name) {
        ExprKind::MetaOp { op, args }
    } else if let Some(data) = DataFnName::from_name(name) {
        ExprKind::DataFn { name: data, args }
    } else {
        ExprKind::Call {
            name: name.to_string(),
            args,
        }
    }
}

/// Parses a source text into its relations. Package and import headers are
/// attached to every relation in the file.
pub fn parse(src: &str) -> Result<Vec<RelationAst>, ParseError> {
    let tokens = tokenize(src)?;
    let end = tokens
        .last()
        .map(|t| {
            // Past-the-end position on the last token's line; close enough
            // for "unexpected end of input" diagnostics.
            Span::new(t.span.line, t.span.col + 1)
        })
        .unwrap_or(Span::new(1, 1));
    let mut parser = Parser {
        tokens,
        pos: 0,
        end,
    };
    parser.file()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn minimal_relation() {
        let rels = parse("package owasp;\nMR X { TRUE(); }").unwrap();
        assert_eq!(rels.len(), 1);
        assert_eq!(rels[0].qualified_name(), "owasp.X");
        assert_eq!(
            rels[0].body,
            vec![Statement::Expr(Expr::new(
                ExprKind::MetaOp {
                    op: MetaOp::True,
                    args: vec![]
                },
                Span::default()
            ))]
        );
    }

    #[test]
    fn loop_over_actions_with_implies() {
        let src = r#"
            package owasp;
            MR G {
                for (var a : Input(1).actions) {
                    IMPLIES(isLogin(a), NOT(isError(Output(Input(1), a.position))));
                }
            }
        "#;
        let rels = parse(src).unwrap();
        match &rels[0].body[0] {
            Statement::For { var, iterable, body, .. } => {
                assert_eq!(var, "a");
                match &iterable.kind {
                    ExprKind::Field { base, name } => {
                        assert_eq!(name, "actions");
                        assert!(matches!(
                            base.kind,
                            ExprKind::DataFn { name: DataFnName::Input, .. }
                        ));
                    }
                    other => panic!("unexpected iterable {other:?}"),
                }
                assert_eq!(body.len(), 1);
                match &body[0] {
                    Statement::Expr(e) => {
                        assert!(matches!(e.kind, ExprKind::MetaOp { op: MetaOp::Implies, .. }))
                    }
                    other => panic!("unexpected body {other:?}"),
                }
            }
            other => panic!("unexpected statement {other:?}"),
        }
    }

    #[test]
    fn ranges_parse_inside_loops() {
        let src = "MR R { for (var i : 1 .. parameterCount(a) + 1) { TRUE(); } }";
        let rels = parse(src).unwrap();
        match &rels[0].body[0] {
            Statement::For { iterable, .. } => match &iterable.kind {
                ExprKind::Range { hi, .. } => {
                    assert!(matches!(hi.kind, ExprKind::Arith { op: ArithOp::Add, .. }))
                }
                other => panic!("unexpected iterable {other:?}"),
            },
            other => panic!("unexpected statement {other:?}"),
        }
    }

    #[test]
    fn missing_argument_is_a_parse_error() {
        let err = parse("MR X { IMPLIES(TRUE(), ); }").unwrap_err();
        match err {
            ParseError::Unexpected { expected, found, .. } => {
                assert!(expected.contains("expression"), "{expected}");
                assert_eq!(found, "')'");
            }
            other => panic!("unexpected error {other:?}"),
        }
    }

    #[test]
    fn error_position_is_reported() {
        let err = parse("MR X {\n  var = 3;\n}").unwrap_err();
        match err {
            ParseError::Unexpected { line, col, .. } => {
                assert_eq!(line, 2);
                assert_eq!(col, 7);
            }
            other => panic!("unexpected error {other:?}"),
        }
    }

    #[test]
    fn multiple_relations_share_headers() {
        let rels = parse("package p;\nimport a.b;\nMR X { TRUE(); }\nMR Y { FALSE(); }").unwrap();
        assert_eq!(rels.len(), 2);
        assert_eq!(rels[1].package.as_deref(), Some("p"));
        assert_eq!(rels[1].imports, vec!["a.b".to_string()]);
    }

    #[test]
    fn empty_input_rejected() {
        assert!(parse("").is_err());
        assert!(parse("package p;").is_err());
    }
}
