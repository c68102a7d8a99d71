//! Recursive-descent parser for the recipe language.
//!
//! ```text
//! program  := stmt*
//! stmt     := "int" IDENT ("=" expr)? ";"
//!           | IDENT "=" expr ";"
//!           | "if" "(" expr ")" body ("else" body)?
//!           | "while" "(" expr ")" body
//!           | "{" stmt* "}"
//!           | expr ";"
//!           | ";"
//! body     := stmt
//! expr     := cmp (("==" | "!=") cmp)*
//! cmp      := sum (("<" | "<=" | ">" | ">=") sum)*
//! sum      := term (("+" | "-") term)*
//! term     := unary (("*" | "/" | "%") unary)*
//! unary    := ("-" | "!") unary | primary
//! primary  := INT | IDENT | IDENT "(" (expr ("," expr)*)? ")" | "(" expr ")"
//! ```

use super::ast::{BinOp, Expr, Pos, Program, Stmt, UnOp};
use super::lexer::{tokenize, Tok, Token};
use super::CompileError;

pub fn parse(src: &str) -> Result<Program, CompileError> {
    let tokens = tokenize(src)?;
    let mut p = Parser { tokens, at: 0 };
    let mut program = Vec::new();
    while p.peek() != &Tok::Eof {
        program.push(p.stmt()?);
    }
    Ok(program)
}

struct Parser {
    tokens: Vec<Token>,
    at: usize,
}

impl Parser {
    fn peek(&self) -> &Tok {
        &self.tokens[self.at].tok
    }

    fn pos(&self) -> Pos {
        self.tokens[self.at].pos
    }

    fn bump(&mut self) -> Token {
        let t = self.tokens[self.at].clone();
        if t.tok != Tok::Eof {
            self.at += 1;
        }
        t
    }

    fn eat(&mut self, tok: &Tok) -> bool {
        if self.peek() == tok {
            self.bump();
            true
        } else {
            false
        }
    }

    fn expect(&mut self, tok: Tok, what: &str) -> Result<(), CompileError> {
        if self.eat(&tok) {
            Ok(())
        } else {
            Err(self.unexpected(what))
        }
    }

    fn unexpected(&self, wanted: &str) -> CompileError {
        let found = match self.peek() {
            Tok::Eof => "end of input".to_string(),
            t => format!("{t:?}"),
        };
        CompileError::syntax(self.pos(), format!("expected {wanted}, found {found}"))
    }

    fn ident(&mut self) -> Result<(String, Pos), CompileError> {
        let pos = self.pos();
        match self.bump().tok {
            Tok::Ident(name) => Ok((name, pos)),
            _ => {
                self.at -= 1;
                Err(self.unexpected("identifier"))
            }
        }
    }

    fn stmt(&mut self) -> Result<Stmt, CompileError> {
        let pos = self.pos();
        match self.peek().clone() {
            Tok::KwInt => {
                self.bump();
                let (name, pos) = self.ident()?;
                let init = if self.eat(&Tok::Assign) {
                    Some(self.expr()?)
                } else {
                    None
                };
                self.expect(Tok::Semi, "';'")?;
                Ok(Stmt::Decl(name, init, pos))
            }
            Tok::KwIf => {
                self.bump();
                self.expect(Tok::LParen, "'('")?;
                let cond = self.expr()?;
                self.expect(Tok::RParen, "')'")?;
                let then = self.body()?;
                let otherwise = if self.eat(&Tok::KwElse) {
                    self.body()?
                } else {
                    Vec::new()
                };
                Ok(Stmt::If(cond, then, otherwise))
            }
            Tok::KwWhile => {
                self.bump();
                self.expect(Tok::LParen, "'('")?;
                let cond = self.expr()?;
                self.expect(Tok::RParen, "')'")?;
                Ok(Stmt::While(cond, self.body()?))
            }
            Tok::LBrace => Ok(Stmt::Block(self.body()?)),
            Tok::Semi => {
                self.bump();
                Ok(Stmt::Block(Vec::new()))
            }
            Tok::Ident(name) if self.tokens[self.at + 1].tok == Tok::Assign => {
                self.bump();
                self.bump();
                let value = self.expr()?;
                self.expect(Tok::Semi, "';'")?;
                Ok(Stmt::Assign(name, value, pos))
            }
            _ => {
                let e = self.expr()?;
                self.expect(Tok::Semi, "';'")?;
                Ok(Stmt::Expr(e))
            }
        }
    }

    fn body(&mut self) -> Result<Vec<Stmt>, CompileError> {
        if self.eat(&Tok::LBrace) {
            let mut stmts = Vec::new();
            while !self.eat(&Tok::RBrace) {
                if self.peek() == &Tok::Eof {
                    return Err(self.unexpected("'}'"));
                }
                stmts.push(self.stmt()?);
            }
            Ok(stmts)
        } else {
            Ok(vec![self.stmt()?])
        }
    }

    fn expr(&mut self) -> Result<Expr, CompileError> {
        let mut lhs = self.cmp()?;
        loop {
            let op = match self.peek() {
                Tok::EqEq => BinOp::Eq,
                Tok::NotEq => BinOp::Ne,
                _ => return Ok(lhs),
            };
            self.bump();
            lhs = Expr::Binary(op, Box::new(lhs), Box::new(self.cmp()?));
        }
    }

    fn cmp(&mut self) -> Result<Expr, CompileError> {
        let mut lhs = self.sum()?;
        loop {
            let op = match self.peek() {
                Tok::Lt => BinOp::Lt,
                Tok::Le => BinOp::Le,
                Tok::Gt => BinOp::Gt,
                Tok::Ge => BinOp::Ge,
                _ => return Ok(lhs),
            };
            self.bump();
            lhs = Expr::Binary(op, Box::new(lhs), Box::new(self.sum()?));
        }
    }

    fn sum(&mut self) -> Result<Expr, CompileError> {
        let mut lhs = self.term()?;
        loop {
            let op = match self.peek() {
                Tok::Plus => BinOp::Add,
                Tok::Minus => BinOp::Sub,
                _ => return Ok(lhs),
            };
            self.bump();
            lhs = Expr::Binary(op, Box::new(lhs), Box::new(self.term()?));
        }
    }

    fn term(&mut self) -> Result<Expr, CompileError> {
        let mut lhs = self.unary()?;
        loop {
            let op = match self.peek() {
                Tok::Star => BinOp::Mul,
                Tok::Slash => BinOp::Div,
                Tok::Percent => BinOp::Mod,
                _ => return Ok(lhs),
            };
            self.bump();
            lhs = Expr::Binary(op, Box::new(lhs), Box::new(self.unary()?));
        }
    }

    fn unary(&mut self) -> Result<Expr, CompileError> {
        match self.peek() {
            Tok::Minus => {
                self.bump();
                // -2147483648 is the only place the unsigned literal may overflow
                if let Tok::Int(v) = *self.peek() {
                    if v == i32::MAX as i64 + 1 {
                        self.bump();
                        return Ok(Expr::Int(i32::MIN));
                    }
                }
                Ok(Expr::Unary(UnOp::Neg, Box::new(self.unary()?)))
            }
            Tok::Bang => {
                self.bump();
                Ok(Expr::Unary(UnOp::Not, Box::new(self.unary()?)))
            }
            _ => self.primary(),
        }
    }

    fn primary(&mut self) -> Result<Expr, CompileError> {
        let pos = self.pos();
        match self.peek().clone() {
            Tok::Int(v) => {
                self.bump();
                i32::try_from(v)
                    .map(Expr::Int)
                    .map_err(|_| CompileError::syntax(pos, "integer literal out of range"))
            }
            Tok::Ident(name) => {
                self.bump();
                if !self.eat(&Tok::LParen) {
                    return Ok(Expr::Var(name, pos));
                }
                let mut args = Vec::new();
                if !self.eat(&Tok::RParen) {
                    loop {
                        args.push(self.expr()?);
                        if self.eat(&Tok::RParen) {
                            break;
                        }
                        self.expect(Tok::Comma, "',' or ')'")?;
                    }
                }
                Ok(Expr::Call(name, args, pos))
            }
            Tok::LParen => {
                self.bump();
                let e = self.expr()?;
                self.expect(Tok::RParen, "')'")?;
                Ok(e)
            }
            _ => Err(self.unexpected("expression")),
        }
    }
}
