//! Sandboxed recipe interpreter. A [`Vm`] is a coroutine: [`Vm::resume`] runs
//! until the recipe sleeps, waits, halts or is killed.

use thiserror::Error;

use super::bytecode::{validate, Builtin, BytecodeError, Instr};

pub const STACK_LIMIT: usize = 64;
pub const INSTRUCTION_BUDGET: u64 = 100_000;
pub const SEND_LIMIT: u32 = 256;
pub const SECONDS_PER_DAY: u64 = 86_400;

/// Everything a recipe can observe or affect on its host.
pub trait HostEnv {
    fn now_ms(&self) -> u64;
    /// Sim time of the host's last key press, if any.
    fn last_key_press_ms(&self) -> Option<u64>;
    /// Uniform draw from `[lo, hi]`, `lo <= hi`.
    fn rnd(&mut self, lo: i32, hi: i32) -> i32;
    /// Sends `n` regular messages from the host to the recipe's owner.
    fn send(&mut self, n: u32);
    fn store(&mut self, register: i32, value: i32);
    fn load(&self, register: i32) -> i32;
    /// Terminates the owner's other running recipes on this host.
    fn reset(&mut self);
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Suspend {
    Sleep { ms: u64 },
    Wait(i32),
}

#[derive(Clone, Debug, PartialEq, Eq, Error)]
pub enum KillReason {
    #[error("instruction budget exhausted")]
    Budget,
    #[error("operand stack overflow")]
    StackOverflow,
    #[error("operand stack underflow")]
    StackUnderflow,
    #[error("division by zero")]
    DivisionByZero,
    #[error("send limit exceeded")]
    SendLimit,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Status {
    Suspended(Suspend),
    Halted,
    Killed(KillReason),
}

impl Status {
    pub fn is_finished(&self) -> bool {
        !matches!(self, Status::Suspended(_))
    }
}

/// Seconds since simulated midnight; sim time 0 is midnight.
pub fn clock_seconds(ms: u64) -> i32 {
    ((ms / 1000) % SECONDS_PER_DAY) as i32
}

#[derive(Clone, Debug)]
pub struct Vm {
    code: Vec<u8>,
    pc: usize,
    stack: Vec<i32>,
    locals: [i32; 256],
    executed: u64,
    sent: u32,
    finished: Option<Status>,
}

impl Vm {
    pub fn new(code: &[u8]) -> Result<Self, BytecodeError> {
        validate(code)?;
        Ok(Vm {
            code: code.to_vec(),
            pc: 0,
            stack: Vec::with_capacity(STACK_LIMIT),
            locals: [0; 256],
            executed: 0,
            sent: 0,
            finished: None,
        })
    }

    pub fn instructions_executed(&self) -> u64 {
        self.executed
    }

    pub fn sends(&self) -> u32 {
        self.sent
    }

    /// Runs until the next suspension point. Resuming a finished VM returns
    /// its final status again.
    pub fn resume(&mut self, env: &mut dyn HostEnv) -> Status {
        if let Some(done) = &self.finished {
            return done.clone();
        }
        let status = match self.run(env) {
            Ok(Some(s)) => Status::Suspended(s),
            Ok(None) => Status::Halted,
            Err(reason) => Status::Killed(reason),
        };
        if status.is_finished() {
            self.finished = Some(status.clone());
        }
        status
    }

    fn pop(&mut self) -> Result<i32, KillReason> {
        self.stack.pop().ok_or(KillReason::StackUnderflow)
    }

    fn push(&mut self, v: i32) -> Result<(), KillReason> {
        if self.stack.len() == STACK_LIMIT {
            return Err(KillReason::StackOverflow);
        }
        self.stack.push(v);
        Ok(())
    }

    fn run(&mut self, env: &mut dyn HostEnv) -> Result<Option<Suspend>, KillReason> {
        loop {
            if self.pc >= self.code.len() {
                return Ok(None);
            }
            if self.executed == INSTRUCTION_BUDGET {
                return Err(KillReason::Budget);
            }
            self.executed += 1;
            let (instr, width) = Instr::decode(&self.code, self.pc).expect("validated bytecode");
            self.pc += width;
            match instr {
                Instr::Halt => return Ok(None),
                Instr::Push(v) => self.push(v)?,
                Instr::Load(s) => self.push(self.locals[s as usize])?,
                Instr::Store(s) => self.locals[s as usize] = self.pop()?,
                Instr::Pop => {
                    self.pop()?;
                }
                Instr::Neg => {
                    let v = self.pop()?;
                    self.push(v.wrapping_neg())?;
                }
                Instr::Not => {
                    let v = self.pop()?;
                    self.push((v == 0) as i32)?;
                }
                Instr::Jmp(t) => self.pc = t as usize,
                Instr::Jz(t) => {
                    if self.pop()? == 0 {
                        self.pc = t as usize;
                    }
                }
                Instr::Call(b) => {
                    if let Some(s) = self.call(b, env)? {
                        return Ok(Some(s));
                    }
                }
                bin => {
                    let r = self.pop()?;
                    let l = self.pop()?;
                    let v = match bin {
                        Instr::Add => l.wrapping_add(r),
                        Instr::Sub => l.wrapping_sub(r),
                        Instr::Mul => l.wrapping_mul(r),
                        Instr::Div | Instr::Mod if r == 0 => return Err(KillReason::DivisionByZero),
                        Instr::Div => l.wrapping_div(r),
                        Instr::Mod => l.wrapping_rem(r),
                        Instr::Eq => (l == r) as i32,
                        Instr::Ne => (l != r) as i32,
                        Instr::Lt => (l < r) as i32,
                        Instr::Le => (l <= r) as i32,
                        Instr::Gt => (l > r) as i32,
                        Instr::Ge => (l >= r) as i32,
                        _ => unreachable!("non-binary instruction {bin:?}"),
                    };
                    self.push(v)?;
                }
            }
        }
    }

    fn call(&mut self, b: Builtin, env: &mut dyn HostEnv) -> Result<Option<Suspend>, KillReason> {
        match b {
            Builtin::Wait => {
                let ev = self.pop()?;
                return Ok(Some(Suspend::Wait(ev)));
            }
            Builtin::Sleep => {
                let s = self.pop()?.max(0) as u64;
                return Ok(Some(Suspend::Sleep { ms: s * 1000 }));
            }
            Builtin::Usleep => {
                let ms = self.pop()?.max(0) as u64;
                return Ok(Some(Suspend::Sleep { ms }));
            }
            Builtin::Send => {
                let n = self.pop()?.max(0) as u32;
                if self.sent + n > SEND_LIMIT {
                    return Err(KillReason::SendLimit);
                }
                self.sent += n;
                if n > 0 {
                    env.send(n);
                }
            }
            Builtin::GetTime => self.push(clock_seconds(env.now_ms()))?,
            Builtin::LastKbTime => {
                let t = env.last_key_press_ms().map_or(0, clock_seconds);
                self.push(t)?;
            }
            Builtin::Rnd => {
                let b = self.pop()?;
                let a = self.pop()?;
                let v = env.rnd(a.min(b), a.max(b));
                self.push(v)?;
            }
            Builtin::Store => {
                let v = self.pop()?;
                let r = self.pop()?;
                env.store(r, v);
            }
            Builtin::Load => {
                let r = self.pop()?;
                self.push(env.load(r))?;
            }
            Builtin::Reset => env.reset(),
        }
        Ok(None)
    }
}
