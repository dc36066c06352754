use std::sync::Arc;

use thiserror::Error;

use super::ast::*;
use super::lexer::{Keyword, Token, TokenKind};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("{span}: syntax error: expected {}, found {found}", expected.join(" or "))]
pub struct SyntaxError {
    pub span: Span,
    pub expected: Vec<String>,
    pub found: String,
}

/// Parses a whole program. The token stream must end with `Eof`.
pub fn parse(tokens: &[Token]) -> Result<Program, SyntaxError> {
    let mut p = Parser { tokens, pos: 0 };
    p.program()
}

struct Parser<'a> {
    tokens: &'a [Token],
    pos: usize,
}

type PResult<T> = Result<T, SyntaxError>;

impl<'a> Parser<'a> {
    fn peek(&self) -> &'a TokenKind {
        &self.tokens[self.pos].kind
    }

    fn peek_at(&self, k: usize) -> &'a TokenKind {
        let i = (self.pos + k).min(self.tokens.len() - 1);
        &self.tokens[i].kind
    }

    fn span(&self) -> Span {
        self.tokens[self.pos].span
    }

    fn advance(&mut self) -> &'a Token {
        let t = &self.tokens[self.pos];
        if self.pos + 1 < self.tokens.len() {
            self.pos += 1;
        }
        t
    }

    fn error<T>(&self, expected: &[&str]) -> PResult<T> {
        Err(SyntaxError {
            span: self.span(),
            expected: expected.iter().map(|s| s.to_string()).collect(),
            found: self.peek().to_string(),
        })
    }

    fn is_punct(&self, c: char) -> bool {
        *self.peek() == TokenKind::Punct(c)
    }

    fn is_keyword(&self, k: Keyword) -> bool {
        *self.peek() == TokenKind::Keyword(k)
    }

    fn is_op(&self, op: &str) -> bool {
        matches!(self.peek(), TokenKind::Op(o) if *o == op)
    }

    fn eat_punct(&mut self, c: char) -> bool {
        if self.is_punct(c) {
            self.advance();
            true
        } else {
            false
        }
    }

    fn expect_punct(&mut self, c: char) -> PResult<()> {
        if self.eat_punct(c) {
            Ok(())
        } else {
            self.error(&[&format!("`{c}`")])
        }
    }

    fn expect_keyword(&mut self, k: Keyword) -> PResult<()> {
        if self.is_keyword(k) {
            self.advance();
            Ok(())
        } else {
            self.error(&[&format!("`{}`", k.as_str())])
        }
    }

    fn expect_op(&mut self, op: &str) -> PResult<()> {
        if self.is_op(op) {
            self.advance();
            Ok(())
        } else {
            self.error(&[&format!("`{op}`")])
        }
    }

    fn ident(&mut self) -> PResult<String> {
        match self.peek() {
            TokenKind::Ident(s) => {
                self.advance();
                Ok(s.clone())
            }
            _ => self.error(&["identifier"]),
        }
    }

    fn class_ident(&mut self) -> PResult<String> {
        match self.peek() {
            TokenKind::ClassIdent(s) => {
                self.advance();
                Ok(s.clone())
            }
            _ => self.error(&["capitalised identifier"]),
        }
    }

    /// Method names: ordinary identifiers plus the reserved `main`.
    fn method_name(&mut self) -> PResult<String> {
        match self.peek() {
            TokenKind::Ident(s) => {
                self.advance();
                Ok(s.clone())
            }
            TokenKind::Keyword(Keyword::Main) => {
                self.advance();
                Ok("main".to_string())
            }
            _ => self.error(&["method name"]),
        }
    }

    fn program(&mut self) -> PResult<Program> {
        let mut definitions = Vec::new();
        loop {
            let span = self.span();
            match self.peek() {
                TokenKind::Keyword(Keyword::Service) => {
                    definitions.push(Definition::Service(self.service_def(span)?))
                }
                TokenKind::Keyword(Keyword::Requires) => {
                    self.advance();
                    let services = self.service_list()?;
                    self.eat_punct(';');
                    definitions.push(Definition::Requires(RequiresDef { services, span }));
                }
                TokenKind::Keyword(Keyword::Agent) | TokenKind::Keyword(Keyword::Class) => {
                    definitions.push(Definition::Class(self.class_def(span)?))
                }
                _ => break,
            }
        }
        let mut body = self.instr_seq(true)?;
        match body.pop() {
            Some(Instr {
                kind: InstrKind::Exit,
                ..
            }) => {}
            _ => return self.error(&["`exit` ending the program"]),
        }
        Ok(Program {
            definitions,
            body: body.into(),
        })
    }

    fn service_def(&mut self, span: Span) -> PResult<ServiceDef> {
        self.expect_keyword(Keyword::Service)?;
        let name = self.class_ident()?;
        self.expect_punct('{')?;
        let mut methods = Vec::new();
        while !self.is_punct('}') {
            methods.push(self.method_name()?);
            self.eat_punct(',');
        }
        self.expect_punct('}')?;
        self.eat_punct(';');
        Ok(ServiceDef {
            name,
            methods,
            span,
        })
    }

    /// One or more service ids separated by spaces or commas.
    fn service_list(&mut self) -> PResult<Vec<String>> {
        let mut out = vec![self.class_ident()?];
        loop {
            if self.is_punct(',') {
                self.advance();
                out.push(self.class_ident()?);
            } else if matches!(self.peek(), TokenKind::ClassIdent(_)) {
                out.push(self.class_ident()?);
            } else {
                return Ok(out);
            }
        }
    }

    fn class_def(&mut self, span: Span) -> PResult<ClassDef> {
        let is_agent = self.is_keyword(Keyword::Agent);
        self.advance();
        let name = self.class_ident()?;
        let params = self.param_list()?;
        let mut provides = Vec::new();
        let mut requires = Vec::new();
        if is_agent {
            if self.is_keyword(Keyword::Provides) {
                self.advance();
                provides = self.service_list()?;
            }
            if self.is_keyword(Keyword::Requires) {
                self.advance();
                requires = self.service_list()?;
            }
        }
        self.expect_punct('{')?;
        let mut methods = Vec::new();
        while !self.is_punct('}') {
            let span = self.span();
            let mname = self.method_name()?;
            // `main { }` appears without a parameter list in the listings.
            let mparams = if self.is_punct('(') {
                self.param_list()?
            } else {
                Vec::new()
            };
            let body = self.block()?;
            methods.push(Method {
                name: mname,
                params: mparams,
                body,
                span,
            });
        }
        self.expect_punct('}')?;
        self.eat_punct(';');
        Ok(ClassDef {
            is_agent,
            name,
            params,
            provides,
            requires,
            methods,
            span,
        })
    }

    fn param_list(&mut self) -> PResult<Vec<String>> {
        self.expect_punct('(')?;
        let mut out = Vec::new();
        while !self.is_punct(')') {
            out.push(self.ident()?);
            self.eat_punct(',');
        }
        self.expect_punct(')')?;
        Ok(out)
    }

    fn block(&mut self) -> PResult<Block> {
        self.expect_punct('{')?;
        let body = self.instr_seq(false)?;
        self.expect_punct('}')?;
        Ok(body.into())
    }

    /// Parses instructions up to a closing brace (or end of input at top level).
    /// Semicolons may be dropped after a `}` and before a closing brace.
    fn instr_seq(&mut self, top: bool) -> PResult<Vec<Instr>> {
        let mut out = Vec::new();
        loop {
            let at_end = if top {
                *self.peek() == TokenKind::Eof
            } else {
                self.is_punct('}')
            };
            if at_end {
                return Ok(out);
            }
            let instr = self.instr()?;
            let ends_with_brace = self.tokens[self.pos - 1].kind == TokenKind::Punct('}');
            out.push(instr);
            if self.eat_punct(';') || ends_with_brace {
                continue;
            }
            let closes = if top {
                *self.peek() == TokenKind::Eof
            } else {
                self.is_punct('}')
            };
            if !closes {
                return self.error(&["`;`"]);
            }
        }
    }

    fn instr(&mut self) -> PResult<Instr> {
        let span = self.span();
        let kind = match self.peek().clone() {
            TokenKind::Keyword(Keyword::Go) => {
                self.advance();
                self.expect_punct('(')?;
                let v = self.atom()?;
                self.expect_punct(')')?;
                InstrKind::Go(v)
            }
            TokenKind::Keyword(Keyword::Return) => {
                self.advance();
                let v = if self.eat_punct('(') {
                    let v = self.atom()?;
                    self.expect_punct(')')?;
                    v
                } else {
                    self.atom()?
                };
                InstrKind::Return(v)
            }
            TokenKind::Keyword(
                k @ (Keyword::Join | Keyword::Wait | Keyword::Notify | Keyword::Lock | Keyword::Unlock),
            ) => {
                self.advance();
                self.expect_punct('(')?;
                let x = self.ident()?;
                self.expect_punct(')')?;
                match k {
                    Keyword::Join => InstrKind::Join(x),
                    Keyword::Wait => InstrKind::Wait(x),
                    Keyword::Notify => InstrKind::Notify(x),
                    Keyword::Lock => InstrKind::Lock(x),
                    _ => InstrKind::Unlock(x),
                }
            }
            TokenKind::Keyword(Keyword::If) => {
                self.advance();
                self.expect_punct('(')?;
                let cond = self.atom()?;
                self.expect_punct(')')?;
                let then_block = self.block()?;
                let else_block = if self.is_keyword(Keyword::Else) {
                    self.advance();
                    self.block()?
                } else {
                    Arc::from(Vec::new())
                };
                InstrKind::If {
                    cond,
                    then_block,
                    else_block,
                }
            }
            TokenKind::Keyword(Keyword::While) => {
                self.advance();
                self.expect_punct('(')?;
                let cond = self.atom()?;
                self.expect_punct(')')?;
                let body = self.block()?;
                InstrKind::While { cond, body }
            }
            TokenKind::Keyword(Keyword::Break) => {
                self.advance();
                InstrKind::Break
            }
            TokenKind::Keyword(Keyword::Exit) => {
                self.advance();
                InstrKind::Exit
            }
            TokenKind::Keyword(Keyword::SelfKw) => {
                self.advance();
                self.attr_assign(Target::SelfRef)?
            }
            TokenKind::Ident(x) | TokenKind::ClassIdent(x) => {
                self.advance();
                if self.is_punct('.') {
                    self.attr_assign(Target::Var(x))?
                } else {
                    self.expect_op("=")?;
                    let value = self.assign_value()?;
                    InstrKind::Assign { target: x, value }
                }
            }
            _ => return self.error(&["instruction"]),
        };
        Ok(Instr::new(kind, span))
    }

    fn attr_assign(&mut self, object: Target) -> PResult<InstrKind> {
        self.expect_punct('.')?;
        let attr = self.ident()?;
        self.expect_op("=")?;
        let value = self.atom()?;
        Ok(InstrKind::AttrAssign {
            object,
            attr,
            value,
        })
    }

    fn assign_value(&mut self) -> PResult<AssignValue> {
        match self.peek().clone() {
            TokenKind::Keyword(Keyword::New) => {
                self.advance();
                let class = self.class_ident()?;
                let args = self.args()?;
                Ok(AssignValue::New { class, args })
            }
            TokenKind::Keyword(Keyword::Fork) => {
                self.advance();
                Ok(AssignValue::Fork(self.block()?))
            }
            TokenKind::Keyword(Keyword::Bind) => {
                self.advance();
                self.expect_punct('(')?;
                let service = self.class_ident()?;
                self.eat_punct(',');
                let host = if self.is_punct(')') {
                    None
                } else {
                    Some(self.atom()?)
                };
                self.expect_punct(')')?;
                Ok(AssignValue::Bind { service, host })
            }
            TokenKind::Keyword(Keyword::Host) => {
                self.advance();
                self.expect_punct('(')?;
                self.expect_punct(')')?;
                Ok(AssignValue::Host)
            }
            TokenKind::Keyword(Keyword::Exec) => {
                self.advance();
                Ok(AssignValue::Exec(self.args()?))
            }
            TokenKind::Keyword(Keyword::SelfKw) | TokenKind::Ident(_) | TokenKind::ClassIdent(_)
                if *self.peek_at(1) == TokenKind::Punct('.') =>
            {
                let object = match self.advance().kind.clone() {
                    TokenKind::Ident(x) | TokenKind::ClassIdent(x) => Target::Var(x),
                    _ => Target::SelfRef,
                };
                self.advance();
                let name = self.method_name()?;
                if self.is_punct('(') {
                    let args = self.args()?;
                    Ok(AssignValue::Invoke {
                        object,
                        method: name,
                        args,
                    })
                } else {
                    Ok(AssignValue::ReadAttr { object, attr: name })
                }
            }
            _ => Ok(AssignValue::Expr(self.expr(0)?)),
        }
    }

    /// Argument lists accept both juxtaposition and commas.
    fn args(&mut self) -> PResult<Vec<Atom>> {
        self.expect_punct('(')?;
        let mut out = Vec::new();
        while !self.is_punct(')') {
            out.push(self.atom()?);
            self.eat_punct(',');
        }
        self.expect_punct(')')?;
        Ok(out)
    }

    fn atom(&mut self) -> PResult<Atom> {
        let atom = match self.peek().clone() {
            TokenKind::Ident(x) | TokenKind::ClassIdent(x) => Atom::Target(Target::Var(x)),
            TokenKind::Keyword(Keyword::SelfKw) => Atom::Target(Target::SelfRef),
            TokenKind::Keyword(Keyword::Null) => Atom::Null,
            TokenKind::Int(n) => Atom::Lit(Literal::Int(n)),
            TokenKind::Str(s) => Atom::Lit(Literal::Str(s)),
            TokenKind::Bool(b) => Atom::Lit(Literal::Bool(b)),
            TokenKind::Op("-") => {
                if let TokenKind::Int(n) = self.peek_at(1) {
                    let n = *n;
                    self.advance();
                    Atom::Lit(Literal::Int(-n))
                } else {
                    return self.error(&["value"]);
                }
            }
            _ => return self.error(&["value"]),
        };
        self.advance();
        Ok(atom)
    }

    fn binop(&self) -> Option<BinOp> {
        match self.peek() {
            TokenKind::Op(op) => BinOp::ALL.iter().copied().find(|b| b.symbol() == *op),
            _ => None,
        }
    }

    /// Precedence climbing; all binary operators are left associative.
    fn expr(&mut self, min_prec: u8) -> PResult<Expr> {
        let mut lhs = self.unary()?;
        while let Some(op) = self.binop() {
            let prec = op.precedence();
            if prec <= min_prec {
                break;
            }
            self.advance();
            let rhs = self.expr(prec)?;
            lhs = Expr::Binary(op, Box::new(lhs), Box::new(rhs));
        }
        Ok(lhs)
    }

    fn unary(&mut self) -> PResult<Expr> {
        if self.is_op("!") {
            self.advance();
            return Ok(Expr::Unary(UnOp::Not, Box::new(self.unary()?)));
        }
        if self.is_op("-") {
            if matches!(self.peek_at(1), TokenKind::Int(_)) {
                return Ok(Expr::Atom(self.atom()?));
            }
            self.advance();
            return Ok(Expr::Unary(UnOp::Neg, Box::new(self.unary()?)));
        }
        if self.eat_punct('(') {
            let e = self.expr(0)?;
            self.expect_punct(')')?;
            return Ok(e);
        }
        Ok(Expr::Atom(self.atom()?))
    }
}

#[cfg(test)]
mod tests {
    use super::super::lexer::tokenize;
    use super::*;

    fn parse_src(src: &str) -> Program {
        parse(&tokenize(src).unwrap()).unwrap()
    }

    fn body_expr(src: &str) -> Expr {
        let p = parse_src(&format!("x = {src}; exit;"));
        match &p.body[0].kind {
            InstrKind::Assign {
                value: AssignValue::Expr(e),
                ..
            } => e.clone(),
            other => panic!("unexpected {other:?}"),
        }
    }

    fn var(x: &str) -> Box<Expr> {
        Box::new(Expr::Atom(Atom::var(x)))
    }

    #[test]
    fn exit_only_program() {
        let p = parse_src("exit;");
        assert!(p.definitions.is_empty());
        assert!(p.body.is_empty());
    }

    #[test]
    fn missing_exit_is_an_error() {
        let err = parse(&tokenize("x = 1;").unwrap()).unwrap_err();
        assert!(err.expected[0].contains("exit"));
    }

    #[test]
    fn new_node() {
        let p = parse_src("x = new TimeClient(hosts); exit;");
        assert_eq!(
            p.body[0].kind,
            InstrKind::Assign {
                target: "x".into(),
                value: AssignValue::New {
                    class: "TimeClient".into(),
                    args: vec![Atom::var("hosts")]
                }
            }
        );
    }

    #[test]
    fn precedence() {
        assert_eq!(
            body_expr("a + b * c"),
            Expr::Binary(
                BinOp::Add,
                var("a"),
                Box::new(Expr::Binary(BinOp::Mul, var("b"), var("c")))
            )
        );
        assert_eq!(
            body_expr("a || b && c == d"),
            Expr::Binary(
                BinOp::Or,
                var("a"),
                Box::new(Expr::Binary(
                    BinOp::And,
                    var("b"),
                    Box::new(Expr::Binary(BinOp::Eq, var("c"), var("d")))
                ))
            )
        );
        assert_eq!(
            body_expr("a - b - c"),
            Expr::Binary(
                BinOp::Sub,
                Box::new(Expr::Binary(BinOp::Sub, var("a"), var("b"))),
                var("c")
            )
        );
        assert_eq!(
            body_expr("!a == b"),
            Expr::Binary(
                BinOp::Eq,
                Box::new(Expr::Unary(UnOp::Not, var("a"))),
                var("b")
            )
        );
    }

    #[test]
    fn space_and_comma_arguments_agree() {
        let a = parse_src("x = exec(\"init\" 4 \"ftp.adomain\"); exit;");
        let b = parse_src("x = exec(\"init\", 4, \"ftp.adomain\"); exit;");
        assert_eq!(a, b);
    }

    #[test]
    fn optional_semicolons_after_blocks() {
        let p = parse_src("while (c) { x = 1; } y = 2; exit");
        assert_eq!(p.body.len(), 2);
    }

    #[test]
    fn missing_semicolon_between_instructions() {
        let err = parse(&tokenize("x = 1 y = 2; exit;").unwrap()).unwrap_err();
        assert_eq!(err.expected, vec!["`;`".to_string()]);
    }

    #[test]
    fn definitions() {
        let p = parse_src(
            "service Time { getTime }
             requires Other;
             agent A(x, y) provides Time requires Other { main { } getTime() { return (x); } }
             class C() { m(a b) { return a; } }
             exit;",
        );
        assert_eq!(p.definitions.len(), 4);
        match &p.definitions[2] {
            Definition::Class(c) => {
                assert!(c.is_agent);
                assert_eq!(c.params, vec!["x", "y"]);
                assert_eq!(c.provides, vec!["Time"]);
                assert_eq!(c.requires, vec!["Other"]);
                assert_eq!(c.methods[0].name, "main");
            }
            _ => panic!(),
        }
    }

    #[test]
    fn invocation_attribute_and_bind_forms() {
        let p = parse_src(
            "a = o.m(1, x); b = self.y; self.y = 3; o.z = null; c = bind(S h); d = bind(S); e = host(); exit;",
        );
        assert!(matches!(
            &p.body[0].kind,
            InstrKind::Assign { value: AssignValue::Invoke { method, args, .. }, .. } if method == "m" && args.len() == 2
        ));
        assert!(matches!(
            &p.body[1].kind,
            InstrKind::Assign { value: AssignValue::ReadAttr { object: Target::SelfRef, .. }, .. }
        ));
        assert!(matches!(&p.body[2].kind, InstrKind::AttrAssign { object: Target::SelfRef, .. }));
        assert!(matches!(
            &p.body[4].kind,
            InstrKind::Assign { value: AssignValue::Bind { host: Some(_), .. }, .. }
        ));
        assert!(matches!(
            &p.body[5].kind,
            InstrKind::Assign { value: AssignValue::Bind { host: None, .. }, .. }
        ));
    }

    #[test]
    fn negative_literals() {
        assert_eq!(body_expr("-5"), Expr::Atom(Atom::Lit(Literal::Int(-5))));
        assert_eq!(
            body_expr("3 - 5"),
            Expr::Binary(
                BinOp::Sub,
                Box::new(Expr::Atom(Atom::Lit(Literal::Int(3)))),
                Box::new(Expr::Atom(Atom::Lit(Literal::Int(5))))
            )
        );
    }

    #[test]
    fn reserved_words_rejected_as_names() {
        assert!(parse(&tokenize("while = 1; exit;").unwrap()).is_err());
        assert!(parse(&tokenize("class new() { } exit;").unwrap()).is_err());
        assert!(parse(&tokenize("service exit { } exit;").unwrap()).is_err());
    }
}
