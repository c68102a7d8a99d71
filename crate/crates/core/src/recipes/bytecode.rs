//! Recipe bytecode: 1-byte opcodes, little-endian immediates.
//!
//! | op      | byte | operand            |
//! |---------|------|--------------------|
//! | HALT    | 0x00 |                    |
//! | PUSH    | 0x01 | i32 (4 bytes)      |
//! | PUSHB   | 0x02 | i8                 |
//! | LOAD    | 0x03 | local slot (u8)    |
//! | STORE   | 0x04 | local slot (u8)    |
//! | POP     | 0x05 |                    |
//! | ADD..GE | 0x10..0x1D |              |
//! | JMP     | 0x20 | target (u16)       |
//! | JZ      | 0x21 | target (u16)       |
//! | CALL    | 0x30 | builtin id (u8)    |

use std::fmt::Write as _;

use thiserror::Error;

pub const MAX_RECIPE_SIZE: usize = 446;
pub const FILE_MAGIC: [u8; 4] = *b"DNRC";
pub const FILE_VERSION: u8 = 1;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
#[repr(u8)]
pub enum Builtin {
    Wait = 0,
    Sleep = 1,
    Usleep = 2,
    Send = 3,
    GetTime = 4,
    LastKbTime = 5,
    Rnd = 6,
    Store = 7,
    Load = 8,
    Reset = 9,
}

impl Builtin {
    pub const ALL: [Builtin; 10] = [
        Builtin::Wait,
        Builtin::Sleep,
        Builtin::Usleep,
        Builtin::Send,
        Builtin::GetTime,
        Builtin::LastKbTime,
        Builtin::Rnd,
        Builtin::Store,
        Builtin::Load,
        Builtin::Reset,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Builtin::Wait => "wait",
            Builtin::Sleep => "sleep",
            Builtin::Usleep => "usleep",
            Builtin::Send => "send",
            Builtin::GetTime => "gettime",
            Builtin::LastKbTime => "last_kb_time",
            Builtin::Rnd => "rnd",
            Builtin::Store => "store",
            Builtin::Load => "load",
            Builtin::Reset => "reset",
        }
    }

    pub fn arity(self) -> usize {
        match self {
            Builtin::GetTime | Builtin::LastKbTime | Builtin::Reset => 0,
            Builtin::Wait | Builtin::Sleep | Builtin::Usleep | Builtin::Send | Builtin::Load => 1,
            Builtin::Rnd | Builtin::Store => 2,
        }
    }

    pub fn returns_value(self) -> bool {
        matches!(self, Builtin::GetTime | Builtin::LastKbTime | Builtin::Rnd | Builtin::Load)
    }

    pub fn by_name(name: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|b| b.name() == name)
    }

    pub fn from_id(id: u8) -> Option<Self> {
        Self::ALL.get(id as usize).copied()
    }
}

/// Host events a recipe can `wait` on. Other ids are reserved and never fire.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum RecipeEvent {
    AppActive,
}

impl RecipeEvent {
    pub fn id(self) -> i32 {
        match self {
            RecipeEvent::AppActive => 1,
        }
    }

    pub fn constant(name: &str) -> Option<i32> {
        match name {
            "APP_ACTIVE" => Some(RecipeEvent::AppActive.id()),
            _ => None,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Instr {
    Halt,
    Push(i32),
    Load(u8),
    Store(u8),
    Pop,
    Add,
    Sub,
    Mul,
    Div,
    Mod,
    Neg,
    Not,
    Eq,
    Ne,
    Lt,
    Le,
    Gt,
    Ge,
    Jmp(u16),
    Jz(u16),
    Call(Builtin),
}

const SIMPLE_OPS: [(u8, Instr, &str); 15] = [
    (0x00, Instr::Halt, "HALT"),
    (0x05, Instr::Pop, "POP"),
    (0x10, Instr::Add, "ADD"),
    (0x11, Instr::Sub, "SUB"),
    (0x12, Instr::Mul, "MUL"),
    (0x13, Instr::Div, "DIV"),
    (0x14, Instr::Mod, "MOD"),
    (0x15, Instr::Neg, "NEG"),
    (0x16, Instr::Not, "NOT"),
    (0x18, Instr::Eq, "EQ"),
    (0x19, Instr::Ne, "NE"),
    (0x1A, Instr::Lt, "LT"),
    (0x1B, Instr::Le, "LE"),
    (0x1C, Instr::Gt, "GT"),
    (0x1D, Instr::Ge, "GE"),
];

const OP_PUSH: u8 = 0x01;
const OP_PUSHB: u8 = 0x02;
const OP_LOAD: u8 = 0x03;
const OP_STORE: u8 = 0x04;
const OP_JMP: u8 = 0x20;
const OP_JZ: u8 = 0x21;
const OP_CALL: u8 = 0x30;

impl Instr {
    /// Encoded width in bytes.
    pub fn width(self) -> usize {
        match self {
            Instr::Push(v) if i8::try_from(v).is_ok() => 2,
            Instr::Push(_) => 5,
            Instr::Load(_) | Instr::Store(_) | Instr::Call(_) => 2,
            Instr::Jmp(_) | Instr::Jz(_) => 3,
            _ => 1,
        }
    }

    pub fn encode(self, out: &mut Vec<u8>) {
        match self {
            Instr::Push(v) => match i8::try_from(v) {
                Ok(b) => out.extend_from_slice(&[OP_PUSHB, b as u8]),
                Err(_) => {
                    out.push(OP_PUSH);
                    out.extend_from_slice(&v.to_le_bytes());
                }
            },
            Instr::Load(slot) => out.extend_from_slice(&[OP_LOAD, slot]),
            Instr::Store(slot) => out.extend_from_slice(&[OP_STORE, slot]),
            Instr::Jmp(t) => {
                out.push(OP_JMP);
                out.extend_from_slice(&t.to_le_bytes());
            }
            Instr::Jz(t) => {
                out.push(OP_JZ);
                out.extend_from_slice(&t.to_le_bytes());
            }
            Instr::Call(b) => out.extend_from_slice(&[OP_CALL, b as u8]),
            simple => {
                let op = SIMPLE_OPS.iter().find(|(_, i, _)| *i == simple).expect("simple op").0;
                out.push(op);
            }
        }
    }

    /// Decodes the instruction at `at`, returning it and its width.
    pub fn decode(code: &[u8], at: usize) -> Result<(Instr, usize), BytecodeError> {
        let truncated = BytecodeError::Truncated { at };
        let op = *code.get(at).ok_or(truncated.clone())?;
        let operand = |n: usize| code.get(at + 1..at + 1 + n).ok_or(truncated.clone());
        let instr = match op {
            OP_PUSH => {
                let b = operand(4)?;
                (Instr::Push(i32::from_le_bytes([b[0], b[1], b[2], b[3]])), 5)
            }
            OP_PUSHB => (Instr::Push(operand(1)?[0] as i8 as i32), 2),
            OP_LOAD => (Instr::Load(operand(1)?[0]), 2),
            OP_STORE => (Instr::Store(operand(1)?[0]), 2),
            OP_JMP | OP_JZ => {
                let b = operand(2)?;
                let t = u16::from_le_bytes([b[0], b[1]]);
                (if op == OP_JMP { Instr::Jmp(t) } else { Instr::Jz(t) }, 3)
            }
            OP_CALL => {
                let id = operand(1)?[0];
                let b = Builtin::from_id(id).ok_or(BytecodeError::UnknownBuiltin { at, id })?;
                (Instr::Call(b), 2)
            }
            _ => {
                let (_, i, _) = SIMPLE_OPS
                    .iter()
                    .find(|(o, _, _)| *o == op)
                    .ok_or(BytecodeError::UnknownOpcode { at, op })?;
                (*i, 1)
            }
        };
        Ok(instr)
    }

    fn mnemonic(self) -> String {
        match self {
            Instr::Push(v) => format!("PUSH {v}"),
            Instr::Load(s) => format!("LOAD {s}"),
            Instr::Store(s) => format!("STORE {s}"),
            Instr::Jmp(t) => format!("JMP @{t:04}"),
            Instr::Jz(t) => format!("JZ @{t:04}"),
            Instr::Call(b) => format!("CALL {}", b.name()),
            simple => SIMPLE_OPS
                .iter()
                .find(|(_, i, _)| *i == simple)
                .map(|(_, _, n)| n.to_string())
                .expect("simple op"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum BytecodeError {
    #[error("recipe is {size} bytes, budget is {max}")]
    TooLarge { size: usize, max: usize },
    #[error("truncated instruction at offset {at}")]
    Truncated { at: usize },
    #[error("unknown opcode {op:#04x} at offset {at}")]
    UnknownOpcode { at: usize, op: u8 },
    #[error("unknown builtin id {id} at offset {at}")]
    UnknownBuiltin { at: usize, id: u8 },
    #[error("jump at offset {at} targets {target}, not an instruction boundary")]
    BadJumpTarget { at: usize, target: usize },
    #[error("not a compiled recipe file")]
    BadFileHeader,
    #[error("line {line}: {message}")]
    Assembly { line: usize, message: String },
}

/// Decodes the whole stream, checking size, opcodes, builtin ids and that
/// every jump lands on an instruction boundary (or exactly at the end).
pub fn validate(code: &[u8]) -> Result<Vec<(usize, Instr)>, BytecodeError> {
    if code.len() > MAX_RECIPE_SIZE {
        return Err(BytecodeError::TooLarge {
            size: code.len(),
            max: MAX_RECIPE_SIZE,
        });
    }
    let mut instrs = Vec::new();
    let mut at = 0;
    while at < code.len() {
        let (instr, width) = Instr::decode(code, at)?;
        instrs.push((at, instr));
        at += width;
    }
    for &(at, instr) in &instrs {
        if let Instr::Jmp(t) | Instr::Jz(t) = instr {
            let t = t as usize;
            if t != code.len() && instrs.binary_search_by_key(&t, |(o, _)| *o).is_err() {
                return Err(BytecodeError::BadJumpTarget { at, target: t });
            }
        }
    }
    Ok(instrs)
}

/// One instruction per line: `offset  MNEMONIC operand`.
pub fn disassemble(code: &[u8]) -> Result<String, BytecodeError> {
    let mut out = String::new();
    for (at, instr) in validate(code)? {
        let _ = writeln!(out, "{at:04}  {}", instr.mnemonic());
    }
    Ok(out)
}

/// Inverse of [`disassemble`]; offsets in the listing are ignored and
/// recomputed, jump operands are taken literally.
pub fn assemble(listing: &str) -> Result<Vec<u8>, BytecodeError> {
    let mut out = Vec::new();
    for (i, raw) in listing.lines().enumerate() {
        let line = i + 1;
        let err = |message: String| BytecodeError::Assembly { line, message };
        let mut words = raw.split_whitespace();
        let Some(first) = words.next() else { continue };
        let mnemonic = if first.chars().all(|c| c.is_ascii_digit()) {
            words.next().ok_or_else(|| err("missing mnemonic".into()))?
        } else {
            first
        };
        let operand = words.next();
        let int = |s: Option<&str>| -> Result<i64, BytecodeError> {
            let s = s.ok_or_else(|| err(format!("{mnemonic} needs an operand")))?;
            s.trim_start_matches('@')
                .parse()
                .map_err(|_| err(format!("bad operand {s:?}")))
        };
        let instr = match mnemonic {
            "PUSH" => Instr::Push(i32::try_from(int(operand)?).map_err(|_| err("PUSH operand out of range".into()))?),
            "LOAD" | "STORE" => {
                let slot = u8::try_from(int(operand)?).map_err(|_| err("slot out of range".into()))?;
                if mnemonic == "LOAD" {
                    Instr::Load(slot)
                } else {
                    Instr::Store(slot)
                }
            }
            "JMP" | "JZ" => {
                let t = u16::try_from(int(operand)?).map_err(|_| err("target out of range".into()))?;
                if mnemonic == "JMP" {
                    Instr::Jmp(t)
                } else {
                    Instr::Jz(t)
                }
            }
            "CALL" => {
                let name = operand.ok_or_else(|| err("CALL needs a builtin".into()))?;
                Instr::Call(Builtin::by_name(name).ok_or_else(|| err(format!("unknown builtin {name}")))?)
            }
            m => SIMPLE_OPS
                .iter()
                .find(|(_, _, n)| *n == m)
                .map(|(_, i, _)| *i)
                .ok_or_else(|| err(format!("unknown mnemonic {m}")))?,
        };
        instr.encode(&mut out);
    }
    Ok(out)
}

/// On-disk form: 4-byte magic, version byte, bytecode.
pub fn to_file_bytes(code: &[u8]) -> Vec<u8> {
    let mut out = Vec::with_capacity(code.len() + 5);
    out.extend_from_slice(&FILE_MAGIC);
    out.push(FILE_VERSION);
    out.extend_from_slice(code);
    out
}

pub fn from_file_bytes(bytes: &[u8]) -> Result<Vec<u8>, BytecodeError> {
    if bytes.len() < 5 || bytes[..4] != FILE_MAGIC || bytes[4] != FILE_VERSION {
        return Err(BytecodeError::BadFileHeader);
    }
    let code = bytes[5..].to_vec();
    validate(&code)?;
    Ok(code)
}
