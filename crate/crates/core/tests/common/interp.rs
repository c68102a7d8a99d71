//! Direct AST interpreter for recipes, used as an oracle for the compiler and
//! VM. Both run against the same scripted host and must produce the same log.

use std::collections::HashMap;

use denim::recipes::ast::{BinOp, Expr, Stmt, UnOp};
use denim::recipes::{HostEnv, KillReason, Status, Suspend, Vm};

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Ev {
    Sleep(u64),
    Wait(i32),
    Send(u32),
    Store(i32, i32),
    Rnd(i32, i32),
    Reset,
    Halted,
    Killed(KillReason),
}

/// Scripted host: time advances only through sleeps, `rnd` cycles
/// deterministically through its interval.
#[derive(Default)]
pub struct Script {
    pub now: u64,
    pub draws: u64,
    pub regs: HashMap<i32, i32>,
    pub log: Vec<Ev>,
}

impl HostEnv for Script {
    fn now_ms(&self) -> u64 {
        self.now
    }

    fn last_key_press_ms(&self) -> Option<u64> {
        Some(12_345)
    }

    fn rnd(&mut self, lo: i32, hi: i32) -> i32 {
        self.log.push(Ev::Rnd(lo, hi));
        self.draws += 1;
        let span = hi as i64 - lo as i64 + 1;
        (lo as i64 + (self.draws as i64 * 7919) % span) as i32
    }

    fn send(&mut self, n: u32) {
        self.log.push(Ev::Send(n));
    }

    fn store(&mut self, r: i32, v: i32) {
        self.log.push(Ev::Store(r, v));
        self.regs.insert(r, v);
    }

    fn load(&self, r: i32) -> i32 {
        self.regs.get(&r).copied().unwrap_or(0)
    }

    fn reset(&mut self) {
        self.log.push(Ev::Reset);
    }
}

impl Script {
    fn suspend(&mut self, s: Suspend) {
        match s {
            Suspend::Sleep { ms } => {
                self.log.push(Ev::Sleep(ms));
                self.now += ms;
            }
            Suspend::Wait(ev) => self.log.push(Ev::Wait(ev)),
        }
    }
}

/// Runs compiled bytecode to completion, firing every awaited event at once.
pub fn run_vm(code: &[u8]) -> Vec<Ev> {
    let mut vm = Vm::new(code).expect("valid bytecode");
    let mut host = Script::default();
    loop {
        match vm.resume(&mut host) {
            Status::Suspended(s) => host.suspend(s),
            Status::Halted => {
                host.log.push(Ev::Halted);
                break;
            }
            Status::Killed(r) => {
                host.log.push(Ev::Killed(r));
                break;
            }
        }
    }
    host.log
}

const SEND_LIMIT: u32 = 256;

struct Interp<'a> {
    host: &'a mut Script,
    vars: HashMap<String, i32>,
    sent: u32,
}

type Flow<T> = Result<T, KillReason>;

impl Interp<'_> {
    fn block(&mut self, stmts: &[Stmt]) -> Flow<()> {
        stmts.iter().try_for_each(|s| self.stmt(s))
    }

    fn stmt(&mut self, s: &Stmt) -> Flow<()> {
        match s {
            Stmt::Decl(name, init, _) => {
                let v = match init {
                    Some(e) => self.expr(e)?,
                    None => 0,
                };
                self.vars.insert(name.clone(), v);
            }
            Stmt::Assign(name, e, _) => {
                let v = self.expr(e)?;
                self.vars.insert(name.clone(), v);
            }
            Stmt::If(c, t, f) => {
                if self.expr(c)? != 0 {
                    self.block(t)?;
                } else {
                    self.block(f)?;
                }
            }
            Stmt::While(c, body) => {
                while self.expr(c)? != 0 {
                    self.block(body)?;
                }
            }
            Stmt::Block(b) => self.block(b)?,
            Stmt::Expr(e) => {
                self.expr(e)?;
            }
        }
        Ok(())
    }

    fn expr(&mut self, e: &Expr) -> Flow<i32> {
        Ok(match e {
            Expr::Int(v) => *v,
            Expr::Var(name, _) => match self.vars.get(name) {
                Some(v) => *v,
                None if name == "APP_ACTIVE" => 1,
                None => panic!("oracle given undeclared variable {name}"),
            },
            Expr::Unary(UnOp::Neg, x) => self.expr(x)?.wrapping_neg(),
            Expr::Unary(UnOp::Not, x) => (self.expr(x)? == 0) as i32,
            Expr::Binary(op, l, r) => {
                let (l, r) = (self.expr(l)?, self.expr(r)?);
                match op {
                    BinOp::Add => l.wrapping_add(r),
                    BinOp::Sub => l.wrapping_sub(r),
                    BinOp::Mul => l.wrapping_mul(r),
                    BinOp::Div | BinOp::Mod if r == 0 => return Err(KillReason::DivisionByZero),
                    BinOp::Div => l.wrapping_div(r),
                    BinOp::Mod => l.wrapping_rem(r),
                    BinOp::Eq => (l == r) as i32,
                    BinOp::Ne => (l != r) as i32,
                    BinOp::Lt => (l < r) as i32,
                    BinOp::Le => (l <= r) as i32,
                    BinOp::Gt => (l > r) as i32,
                    BinOp::Ge => (l >= r) as i32,
                }
            }
            Expr::Call(name, args, _) => {
                let mut vals = Vec::with_capacity(args.len());
                for a in args {
                    vals.push(self.expr(a)?);
                }
                self.call(name, &vals)?
            }
        })
    }

    fn call(&mut self, name: &str, a: &[i32]) -> Flow<i32> {
        let clock = |ms: u64| ((ms / 1000) % 86_400) as i32;
        match name {
            "wait" => self.host.suspend(Suspend::Wait(a[0])),
            "sleep" => self.host.suspend(Suspend::Sleep {
                ms: a[0].max(0) as u64 * 1000,
            }),
            "usleep" => self.host.suspend(Suspend::Sleep { ms: a[0].max(0) as u64 }),
            "send" => {
                let n = a[0].max(0) as u32;
                if self.sent + n > SEND_LIMIT {
                    return Err(KillReason::SendLimit);
                }
                self.sent += n;
                if n > 0 {
                    self.host.send(n);
                }
            }
            "gettime" => return Ok(clock(self.host.now)),
            "last_kb_time" => return Ok(clock(12_345)),
            "rnd" => return Ok(self.host.rnd(a[0].min(a[1]), a[0].max(a[1]))),
            "store" => self.host.store(a[0], a[1]),
            "load" => return Ok(self.host.load(a[0])),
            "reset" => self.host.reset(),
            other => panic!("oracle given unknown builtin {other}"),
        }
        Ok(0)
    }
}

pub fn run_ast(program: &[Stmt]) -> Vec<Ev> {
    let mut host = Script::default();
    let mut it = Interp {
        host: &mut host,
        vars: HashMap::new(),
        sent: 0,
    };
    let end = match it.block(program) {
        Ok(()) => Ev::Halted,
        Err(r) => Ev::Killed(r),
    };
    host.log.push(end);
    host.log
}
