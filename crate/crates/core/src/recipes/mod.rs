//! Interaction recipes: a tiny C-like language compiled to a stack bytecode
//! that runs sandboxed on a friend's device and schedules reply traffic.

pub mod ast;
pub mod bytecode;
mod compiler;
pub mod lexer;
pub mod parser;
pub mod vm;

use thiserror::Error;

pub use ast::Pos;
pub use bytecode::{
    assemble, disassemble, from_file_bytes, to_file_bytes, validate, Builtin, BytecodeError, Instr,
    RecipeEvent, MAX_RECIPE_SIZE,
};
pub use compiler::compile;
pub use parser::parse;
pub use vm::{HostEnv, KillReason, Status, Suspend, Vm};

/// Sources of the three example recipes.
pub mod listings {
    /// Replies with 1 to 4 messages once the app is active and the keyboard idle.
    pub const APP_ACTIVE: &str = include_str!("../../recipes/app_active.rcp");
    /// Starts a conversation at simulated midnight.
    pub const MIDNIGHT: &str = include_str!("../../recipes/midnight.rcp");
    /// Replies once per delivery, after a 30 s quiet window.
    pub const REPLY_EACH: &str = include_str!("../../recipes/reply_each.rcp");
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum CompileError {
    #[error("{line}:{col}: syntax error: {message}")]
    Syntax {
        line: usize,
        col: usize,
        message: String,
    },
    #[error("compiled recipe is {size} bytes, budget is {max}")]
    SizeExceeded { size: usize, max: usize },
    #[error("{line}:{col}: unknown builtin `{name}`")]
    UnknownBuiltin { name: String, line: usize, col: usize },
    #[error("{line}:{col}: `{name}` takes {expected} argument(s), got {found}")]
    Arity {
        name: String,
        expected: usize,
        found: usize,
        line: usize,
        col: usize,
    },
    #[error("{line}:{col}: `{name}` returns no value")]
    VoidInExpression { name: String, line: usize, col: usize },
    #[error("{line}:{col}: undeclared variable `{name}`")]
    Undeclared { name: String, line: usize, col: usize },
    #[error("{line}:{col}: `{name}` is already declared")]
    Redeclared { name: String, line: usize, col: usize },
    #[error("{line}:{col}: too many variables")]
    TooManyLocals { line: usize, col: usize },
}

impl CompileError {
    pub fn syntax(pos: Pos, message: impl Into<String>) -> Self {
        CompileError::Syntax {
            line: pos.line,
            col: pos.col,
            message: message.into(),
        }
    }
}
