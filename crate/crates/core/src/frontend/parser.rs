//! Recursive-descent parser for MiniC. No error recovery: the first error
//! aborts with its position and an expected-token description.

use super::ast::*;
use super::lexer::{lex, TokKind, Token};
use super::ParseError;

/// Parse one source file. `allow_assume` enables `assume(e);` statements,
/// which are reserved for harness-flagged files.
pub fn parse(source_text: &str, path: &str, allow_assume: bool) -> Result<SourceUnit, ParseError> {
    let tokens = lex(source_text)?;
    let mut p = Parser {
        toks: tokens,
        pos: 0,
        allow_assume,
    };
    let mut unit = SourceUnit {
        path: path.to_string(),
        record_decls: Vec::new(),
        functions: Vec::new(),
    };
    while p.peek().kind != TokKind::Eof {
        if p.peek().kind == TokKind::KwRecord {
            unit.record_decls.push(p.record_decl()?);
        } else {
            let mut f = p.function()?;
            number_loops(&mut f);
            unit.functions.push(f);
        }
    }
    Ok(unit)
}

/// Assign dense preorder ordinals to the while loops of a function.
fn number_loops(f: &mut FunctionDef) {
    fn walk(stmts: &mut [Stmt], next: &mut u32) {
        for s in stmts {
            match s {
                Stmt::While { ordinal, body, .. } => {
                    *ordinal = *next;
                    *next += 1;
                    walk(body, next);
                }
                Stmt::If {
                    then_body,
                    else_body,
                    ..
                } => {
                    walk(then_body, next);
                    walk(else_body, next);
                }
                _ => {}
            }
        }
    }
    let mut next = 0;
    walk(&mut f.body, &mut next);
}

struct Parser {
    toks: Vec<Token>,
    pos: usize,
    allow_assume: bool,
}

impl Parser {
    fn peek(&self) -> &Token {
        &self.toks[self.pos]
    }

    fn peek2(&self) -> &Token {
        &self.toks[(self.pos + 1).min(self.toks.len() - 1)]
    }

    fn bump(&mut self) -> Token {
        let t = self.toks[self.pos].clone();
        if self.pos + 1 < self.toks.len() {
            self.pos += 1;
        }
        t
    }

    fn err<T>(&self, expected: impl Into<String>) -> Result<T, ParseError> {
        let t = self.peek();
        Err(ParseError {
            line: t.line,
            col: t.col,
            expected: expected.into(),
        })
    }

    fn expect(&mut self, kind: TokKind) -> Result<Token, ParseError> {
        if self.peek().kind == kind {
            Ok(self.bump())
        } else {
            self.err(kind.describe())
        }
    }

    fn span(&self) -> Span {
        let t = self.peek();
        Span::new(t.line, t.col)
    }

    fn record_decl(&mut self) -> Result<RecordDecl, ParseError> {
        let span = self.span();
        self.expect(TokKind::KwRecord)?;
        let name = self.expect(TokKind::Ident)?.text;
        self.expect(TokKind::LBrace)?;
        let mut fields = Vec::new();
        loop {
            self.expect(TokKind::KwInt)?;
            fields.push(self.expect(TokKind::Ident)?.text);
            self.expect(TokKind::Semi)?;
            if self.peek().kind == TokKind::RBrace {
                break;
            }
        }
        self.expect(TokKind::RBrace)?;
        Ok(RecordDecl { name, fields, span })
    }

    fn function(&mut self) -> Result<FunctionDef, ParseError> {
        let span = self.span();
        let return_type = match self.peek().kind {
            TokKind::KwInt => {
                self.bump();
                Some(TypeTag::Int)
            }
            TokKind::KwVoid => {
                self.bump();
                None
            }
            TokKind::Ident => {
                let name = self.bump().text;
                Some(TypeTag::Record(name))
            }
            _ => return self.err("`int`, `void`, or a record name"),
        };
        let name = self.expect(TokKind::Ident)?.text;
        self.expect(TokKind::LParen)?;
        let mut params = Vec::new();
        if self.peek().kind != TokKind::RParen {
            loop {
                params.push(self.param()?);
                if self.peek().kind == TokKind::Comma {
                    self.bump();
                } else {
                    break;
                }
            }
        }
        self.expect(TokKind::RParen)?;
        let body = self.block()?;
        Ok(FunctionDef {
            name,
            params,
            return_type,
            body,
            span,
        })
    }

    fn param(&mut self) -> Result<Param, ParseError> {
        match self.peek().kind {
            TokKind::KwInt => {
                self.bump();
                let name = self.expect(TokKind::Ident)?.text;
                if self.peek().kind == TokKind::LBracket {
                    self.bump();
                    let len = self.array_len()?;
                    self.expect(TokKind::RBracket)?;
                    Ok(Param {
                        name,
                        ty: TypeTag::Array(len),
                    })
                } else {
                    Ok(Param {
                        name,
                        ty: TypeTag::Int,
                    })
                }
            }
            TokKind::Ident => {
                let rec = self.bump().text;
                let name = self.expect(TokKind::Ident)?.text;
                Ok(Param {
                    name,
                    ty: TypeTag::Record(rec),
                })
            }
            _ => self.err("a parameter type (`int` or a record name)"),
        }
    }

    fn array_len(&mut self) -> Result<u32, ParseError> {
        let t = self.expect(TokKind::Int)?;
        t.text
            .parse::<u32>()
            .map_err(|_| ParseError {
                line: t.line,
                col: t.col,
                expected: "an array length that fits in 32 bits".to_string(),
            })
    }

    fn block(&mut self) -> Result<Vec<Stmt>, ParseError> {
        self.expect(TokKind::LBrace)?;
        let mut stmts = Vec::new();
        while self.peek().kind != TokKind::RBrace {
            stmts.push(self.stmt()?);
        }
        self.expect(TokKind::RBrace)?;
        Ok(stmts)
    }

    fn stmt(&mut self) -> Result<Stmt, ParseError> {
        let span = self.span();
        match self.peek().kind {
            TokKind::KwInt => {
                self.bump();
                let name = self.expect(TokKind::Ident)?.text;
                if self.peek().kind == TokKind::LBracket {
                    self.bump();
                    let len = self.array_len()?;
                    self.expect(TokKind::RBracket)?;
                    self.expect(TokKind::Semi)?;
                    Ok(Stmt::DeclArray { name, len, span })
                } else {
                    self.expect(TokKind::Assign)?;
                    let init = self.expr()?;
                    self.expect(TokKind::Semi)?;
                    Ok(Stmt::DeclInt { name, init, span })
                }
            }
            TokKind::KwIf => {
                self.bump();
                self.expect(TokKind::LParen)?;
                let cond = self.expr()?;
                self.expect(TokKind::RParen)?;
                let then_body = self.block()?;
                let else_body = if self.peek().kind == TokKind::KwElse {
                    self.bump();
                    self.block()?
                } else {
                    Vec::new()
                };
                Ok(Stmt::If {
                    cond,
                    then_body,
                    else_body,
                    span,
                })
            }
            TokKind::KwWhile => {
                self.bump();
                self.expect(TokKind::LParen)?;
                let cond = self.expr()?;
                self.expect(TokKind::RParen)?;
                let body = self.block()?;
                Ok(Stmt::While {
                    cond,
                    body,
                    ordinal: 0,
                    span,
                })
            }
            TokKind::KwReturn => {
                self.bump();
                let value = if self.peek().kind == TokKind::Semi {
                    None
                } else {
                    Some(self.expr()?)
                };
                self.expect(TokKind::Semi)?;
                Ok(Stmt::Return { value, span })
            }
            TokKind::KwAssume => {
                if !self.allow_assume {
                    return self.err("a statement (`assume` is only allowed in harness files)");
                }
                self.bump();
                self.expect(TokKind::LParen)?;
                let cond = self.expr()?;
                self.expect(TokKind::RParen)?;
                self.expect(TokKind::Semi)?;
                Ok(Stmt::Assume { cond, span })
            }
            TokKind::Ident => {
                // record local decl / assignment / call statement
                match self.peek2().kind {
                    TokKind::Ident => {
                        let record = self.bump().text;
                        let name = self.bump().text;
                        self.expect(TokKind::Semi)?;
                        Ok(Stmt::DeclRecord { name, record, span })
                    }
                    TokKind::LParen => {
                        let call = self.expr()?;
                        self.expect(TokKind::Semi)?;
                        if !matches!(call.kind, ExprKind::Call(..)) {
                            return Err(ParseError {
                                line: span.line,
                                col: span.col,
                                expected: "a call statement".to_string(),
                            });
                        }
                        Ok(Stmt::ExprStmt { call, span })
                    }
                    _ => {
                        let base = self.bump().text;
                        let target = match self.peek().kind {
                            TokKind::Dot => {
                                self.bump();
                                let field = self.expect(TokKind::Ident)?.text;
                                LValue::Field(base, field)
                            }
                            TokKind::LBracket => {
                                self.bump();
                                let idx = self.expr()?;
                                self.expect(TokKind::RBracket)?;
                                LValue::Index(base, Box::new(idx))
                            }
                            _ => LValue::Var(base),
                        };
                        self.expect(TokKind::Assign)?;
                        let value = self.expr()?;
                        self.expect(TokKind::Semi)?;
                        Ok(Stmt::Assign {
                            target,
                            value,
                            span,
                        })
                    }
                }
            }
            _ => self.err("a statement"),
        }
    }

    fn expr(&mut self) -> Result<Expr, ParseError> {
        self.or_expr()
    }

    fn or_expr(&mut self) -> Result<Expr, ParseError> {
        let mut lhs = self.and_expr()?;
        while self.peek().kind == TokKind::OrOr {
            let span = lhs.span;
            self.bump();
            let rhs = self.and_expr()?;
            lhs = Expr {
                kind: ExprKind::Binary(BinOp::Or, Box::new(lhs), Box::new(rhs)),
                span,
            };
        }
        Ok(lhs)
    }

    fn and_expr(&mut self) -> Result<Expr, ParseError> {
        let mut lhs = self.eq_expr()?;
        while self.peek().kind == TokKind::AndAnd {
            let span = lhs.span;
            self.bump();
            let rhs = self.eq_expr()?;
            lhs = Expr {
                kind: ExprKind::Binary(BinOp::And, Box::new(lhs), Box::new(rhs)),
                span,
            };
        }
        Ok(lhs)
    }

    fn eq_expr(&mut self) -> Result<Expr, ParseError> {
        let mut lhs = self.rel_expr()?;
        loop {
            let op = match self.peek().kind {
                TokKind::EqEq => BinOp::Eq,
                TokKind::Ne => BinOp::Ne,
                _ => break,
            };
            let span = lhs.span;
            self.bump();
            let rhs = self.rel_expr()?;
            lhs = Expr {
                kind: ExprKind::Binary(op, Box::new(lhs), Box::new(rhs)),
                span,
            };
        }
        Ok(lhs)
    }

    fn rel_expr(&mut self) -> Result<Expr, ParseError> {
        let mut lhs = self.add_expr()?;
        loop {
            let op = match self.peek().kind {
                TokKind::Lt => BinOp::Lt,
                TokKind::Le => BinOp::Le,
                TokKind::Gt => BinOp::Gt,
                TokKind::Ge => BinOp::Ge,
                _ => break,
            };
            let span = lhs.span;
            self.bump();
            let rhs = self.add_expr()?;
            lhs = Expr {
                kind: ExprKind::Binary(op, Box::new(lhs), Box::new(rhs)),
                span,
            };
        }
        Ok(lhs)
    }

    fn add_expr(&mut self) -> Result<Expr, ParseError> {
        let mut lhs = self.mul_expr()?;
        loop {
            let op = match self.peek().kind {
                TokKind::Plus => BinOp::Add,
                TokKind::Minus => BinOp::Sub,
                _ => break,
            };
            let span = lhs.span;
            self.bump();
            let rhs = self.mul_expr()?;
            lhs = Expr {
                kind: ExprKind::Binary(op, Box::new(lhs), Box::new(rhs)),
                span,
            };
        }
        Ok(lhs)
    }

    fn mul_expr(&mut self) -> Result<Expr, ParseError> {
        let mut lhs = self.unary_expr()?;
        loop {
            let op = match self.peek().kind {
                TokKind::Star => BinOp::Mul,
                TokKind::Slash => BinOp::Div,
                TokKind::Percent => BinOp::Rem,
                _ => break,
            };
            let span = lhs.span;
            self.bump();
            let rhs = self.unary_expr()?;
            lhs = Expr {
                kind: ExprKind::Binary(op, Box::new(lhs), Box::new(rhs)),
                span,
            };
        }
        Ok(lhs)
    }

    fn unary_expr(&mut self) -> Result<Expr, ParseError> {
        let span = self.span();
        match self.peek().kind {
            TokKind::Minus => {
                self.bump();
                let e = self.unary_expr()?;
                Ok(Expr {
                    kind: ExprKind::Unary(UnOp::Neg, Box::new(e)),
                    span,
                })
            }
            TokKind::Bang => {
                self.bump();
                let e = self.unary_expr()?;
                Ok(Expr {
                    kind: ExprKind::Unary(UnOp::Not, Box::new(e)),
                    span,
                })
            }
            _ => self.primary(),
        }
    }

    fn primary(&mut self) -> Result<Expr, ParseError> {
        let span = self.span();
        match self.peek().kind {
            TokKind::Int => {
                let t = self.bump();
                let v: i64 = t.text.parse().map_err(|_| ParseError {
                    line: t.line,
                    col: t.col,
                    expected: "an integer literal that fits in 63 bits".to_string(),
                })?;
                Ok(Expr {
                    kind: ExprKind::Int(v),
                    span,
                })
            }
            TokKind::LParen => {
                self.bump();
                let e = self.expr()?;
                self.expect(TokKind::RParen)?;
                Ok(e)
            }
            TokKind::Ident => {
                let name = self.bump().text;
                match self.peek().kind {
                    TokKind::LParen => {
                        self.bump();
                        let mut args = Vec::new();
                        if self.peek().kind != TokKind::RParen {
                            loop {
                                args.push(self.expr()?);
                                if self.peek().kind == TokKind::Comma {
                                    self.bump();
                                } else {
                                    break;
                                }
                            }
                        }
                        self.expect(TokKind::RParen)?;
                        Ok(Expr {
                            kind: ExprKind::Call(name, args),
                            span,
                        })
                    }
                    TokKind::Dot => {
                        self.bump();
                        let field = self.expect(TokKind::Ident)?.text;
                        Ok(Expr {
                            kind: ExprKind::Field(name, field),
                            span,
                        })
                    }
                    TokKind::LBracket => {
                        self.bump();
                        let idx = self.expr()?;
                        self.expect(TokKind::RBracket)?;
                        Ok(Expr {
                            kind: ExprKind::Index(name, Box::new(idx)),
                            span,
                        })
                    }
                    _ => Ok(Expr {
                        kind: ExprKind::Var(name),
                        span,
                    }),
                }
            }
            _ => self.err("an expression"),
        }
    }
}
