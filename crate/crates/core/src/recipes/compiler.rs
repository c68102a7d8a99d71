use std::collections::HashMap;

use super::ast::{BinOp, Expr, Pos, Stmt, UnOp};
use super::bytecode::{Builtin, Instr, RecipeEvent, MAX_RECIPE_SIZE};
use super::parser::parse;
use super::CompileError;

/// Compiles recipe source to bytecode, enforcing the 446-byte budget.
///
/// Variables are function-scoped: every `int` declaration gets its own local
/// slot and a name may be declared once. A declaration without initializer
/// stores 0, so re-entering it inside a loop resets the variable.
pub fn compile(src: &str) -> Result<Vec<u8>, CompileError> {
    let program = parse(src)?;
    let mut cg = Codegen::default();
    cg.block(&program)?;
    cg.emit(Instr::Halt);
    if cg.code.len() > MAX_RECIPE_SIZE {
        return Err(CompileError::SizeExceeded {
            size: cg.code.len(),
            max: MAX_RECIPE_SIZE,
        });
    }
    Ok(cg.code)
}

#[derive(Default)]
struct Codegen {
    code: Vec<u8>,
    slots: HashMap<String, u8>,
}

impl Codegen {
    fn emit(&mut self, instr: Instr) {
        instr.encode(&mut self.code);
    }

    /// Emits a jump with a placeholder target and returns the operand offset.
    fn emit_jump(&mut self, jz: bool) -> usize {
        self.emit(if jz { Instr::Jz(0) } else { Instr::Jmp(0) });
        self.code.len() - 2
    }

    fn patch(&mut self, operand_at: usize, target: usize) {
        // oversized programs are rejected after codegen, truncation is harmless
        let t = (target as u16).to_le_bytes();
        self.code[operand_at..operand_at + 2].copy_from_slice(&t);
    }

    fn block(&mut self, stmts: &[Stmt]) -> Result<(), CompileError> {
        stmts.iter().try_for_each(|s| self.stmt(s))
    }

    fn stmt(&mut self, stmt: &Stmt) -> Result<(), CompileError> {
        match stmt {
            Stmt::Decl(name, init, pos) => {
                if self.slots.contains_key(name) {
                    return Err(CompileError::Redeclared {
                        name: name.clone(),
                        line: pos.line,
                        col: pos.col,
                    });
                }
                match init {
                    Some(e) => self.expr(e)?,
                    None => self.emit(Instr::Push(0)),
                }
                let slot = u8::try_from(self.slots.len()).map_err(|_| CompileError::TooManyLocals {
                    line: pos.line,
                    col: pos.col,
                })?;
                self.slots.insert(name.clone(), slot);
                self.emit(Instr::Store(slot));
            }
            Stmt::Assign(name, value, pos) => {
                let slot = self.slot(name, *pos)?;
                self.expr(value)?;
                self.emit(Instr::Store(slot));
            }
            Stmt::If(cond, then, otherwise) => {
                self.expr(cond)?;
                let to_else = self.emit_jump(true);
                self.block(then)?;
                if otherwise.is_empty() {
                    self.patch(to_else, self.code.len());
                } else {
                    let to_end = self.emit_jump(false);
                    self.patch(to_else, self.code.len());
                    self.block(otherwise)?;
                    self.patch(to_end, self.code.len());
                }
            }
            Stmt::While(cond, body) => {
                let top = self.code.len();
                self.expr(cond)?;
                let to_end = self.emit_jump(true);
                self.block(body)?;
                let back = self.emit_jump(false);
                self.patch(back, top);
                self.patch(to_end, self.code.len());
            }
            Stmt::Block(stmts) => self.block(stmts)?,
            Stmt::Expr(Expr::Call(name, args, pos)) => {
                if self.call(name, args, *pos)?.returns_value() {
                    self.emit(Instr::Pop);
                }
            }
            Stmt::Expr(e) => {
                self.expr(e)?;
                self.emit(Instr::Pop);
            }
        }
        Ok(())
    }

    fn slot(&self, name: &str, pos: Pos) -> Result<u8, CompileError> {
        self.slots.get(name).copied().ok_or_else(|| CompileError::Undeclared {
            name: name.to_string(),
            line: pos.line,
            col: pos.col,
        })
    }

    fn call(&mut self, name: &str, args: &[Expr], pos: Pos) -> Result<Builtin, CompileError> {
        let builtin = Builtin::by_name(name).ok_or_else(|| CompileError::UnknownBuiltin {
            name: name.to_string(),
            line: pos.line,
            col: pos.col,
        })?;
        if args.len() != builtin.arity() {
            return Err(CompileError::Arity {
                name: name.to_string(),
                expected: builtin.arity(),
                found: args.len(),
                line: pos.line,
                col: pos.col,
            });
        }
        for a in args {
            self.expr(a)?;
        }
        self.emit(Instr::Call(builtin));
        Ok(builtin)
    }

    fn expr(&mut self, e: &Expr) -> Result<(), CompileError> {
        match e {
            Expr::Int(v) => self.emit(Instr::Push(*v)),
            Expr::Var(name, pos) => match self.slots.get(name) {
                Some(&slot) => self.emit(Instr::Load(slot)),
                None => match RecipeEvent::constant(name) {
                    Some(v) => self.emit(Instr::Push(v)),
                    None => return Err(self.slot(name, *pos).unwrap_err()),
                },
            },
            Expr::Unary(op, inner) => {
                self.expr(inner)?;
                self.emit(match op {
                    UnOp::Neg => Instr::Neg,
                    UnOp::Not => Instr::Not,
                });
            }
            Expr::Binary(op, l, r) => {
                self.expr(l)?;
                self.expr(r)?;
                self.emit(match op {
                    BinOp::Add => Instr::Add,
                    BinOp::Sub => Instr::Sub,
                    BinOp::Mul => Instr::Mul,
                    BinOp::Div => Instr::Div,
                    BinOp::Mod => Instr::Mod,
                    BinOp::Eq => Instr::Eq,
                    BinOp::Ne => Instr::Ne,
                    BinOp::Lt => Instr::Lt,
                    BinOp::Le => Instr::Le,
                    BinOp::Gt => Instr::Gt,
                    BinOp::Ge => Instr::Ge,
                });
            }
            Expr::Call(name, args, pos) => {
                if !self.call(name, args, *pos)?.returns_value() {
                    return Err(CompileError::VoidInExpression {
                        name: name.clone(),
                        line: pos.line,
                        col: pos.col,
                    });
                }
            }
        }
        Ok(())
    }
}
