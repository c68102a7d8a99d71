//! Scenario files: one directive per line, `#` starts a comment.
//!
//! ```text
//! seed 7
//! server lookup_delay=5 forward_delay=2 spacing=1 queue_cap=16
//! client alice p=2 ttl=60000 friends=charlie
//! at 0    send_regular alice bob "hello"
//! at 100  send_deniable alice via charlie to bob bytes=600
//! at 200  block bob via charlie target alice
//! at 300  offline bob
//! at 400  online bob
//! at 500  app_active charlie
//! at 500  key_press charlie
//! at 600  inject SERVER bob 1134
//! at 700  drop alice SERVER 1
//! at 800  send_recipe alice via bob to charlie reply.rcp
//! ```
//!
//! Text is a double-quoted string (`\"`, `\\`, `\n` escapes) or `bytes=<n>`
//! for `n` bytes of filler. Recipe paths ending in `.rcp` are compiled, any
//! other file must be a compiled recipe; `listing:<name>` names a bundled
//! example (`app_active`, `midnight`, `reply_each`).

use std::collections::BTreeSet;
use std::path::Path;

use thiserror::Error;

use crate::recipes::{self, listings, MAX_RECIPE_SIZE};
use crate::server::ServerConfig;
use crate::sim::trace::SERVER_LABEL;
use crate::wire::DatagramKind;
use crate::SimTime;

pub const DEFAULT_P: u32 = 1;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("line {line}: {message}")]
pub struct ScenarioError {
    /// 1-based; 0 when the scenario was built in code.
    pub line: usize,
    pub message: String,
}

impl ScenarioError {
    fn new(line: usize, message: impl Into<String>) -> Self {
        ScenarioError {
            line,
            message: message.into(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ClientSpec {
    pub name: String,
    pub p: u32,
    pub ttl: SimTime,
    pub friends: Vec<String>,
    pub line: usize,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Action {
    SendRegular {
        from: String,
        to: String,
        text: Vec<u8>,
    },
    SendDeniable {
        from: String,
        decoy: String,
        to: String,
        text: Vec<u8>,
    },
    Block {
        who: String,
        decoy: String,
        target: String,
    },
    Offline(String),
    Online(String),
    AppActive(String),
    KeyPress(String),
    /// Adversary puts a garbage datagram of `size` wire bytes on the link.
    Inject {
        src: String,
        dst: String,
        size: usize,
    },
    /// Adversary silently discards the next `count` datagrams from `src` to `dst`.
    Drop {
        src: String,
        dst: String,
        count: u32,
    },
    SendRecipe {
        from: String,
        decoy: String,
        host: String,
        bytecode: Vec<u8>,
    },
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct TimedAction {
    pub at: SimTime,
    pub action: Action,
    pub line: usize,
}

#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct Scenario {
    pub seed: u64,
    pub server: ServerConfig,
    pub clients: Vec<ClientSpec>,
    pub actions: Vec<TimedAction>,
}

impl Scenario {
    pub fn new(seed: u64) -> Self {
        Scenario {
            seed,
            ..Scenario::default()
        }
    }

    pub fn client(mut self, name: &str, p: u32, ttl: SimTime, friends: &[&str]) -> Self {
        self.clients.push(ClientSpec {
            name: name.to_string(),
            p,
            ttl,
            friends: friends.iter().map(|f| f.to_string()).collect(),
            line: 0,
        });
        self
    }

    pub fn at(mut self, at: SimTime, action: Action) -> Self {
        self.actions.push(TimedAction { at, action, line: 0 });
        self
    }

    /// Parses a scenario whose recipes are bundled listings only.
    pub fn parse(text: &str) -> Result<Self, ScenarioError> {
        Self::parse_with(text, &|path| {
            Err(format!("cannot load recipe {path:?} without a scenario file"))
        })
    }

    /// Reads a scenario file; recipe paths are relative to its directory.
    pub fn load(path: &Path) -> Result<Self, ScenarioError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| ScenarioError::new(0, format!("{}: {e}", path.display())))?;
        let base = path.parent().unwrap_or(Path::new("."));
        Self::parse_with(&text, &|rel| load_recipe_file(&base.join(rel)))
    }

    pub fn parse_with(text: &str, load: &dyn Fn(&str) -> Result<Vec<u8>, String>) -> Result<Self, ScenarioError> {
        let mut sc = Scenario::default();
        for (i, raw) in text.lines().enumerate() {
            let line = i + 1;
            let words = split_words(raw).map_err(|m| ScenarioError::new(line, m))?;
            if words.is_empty() {
                continue;
            }
            parse_directive(&mut sc, &words, line, load).map_err(|m| ScenarioError::new(line, m))?;
        }
        sc.validate()?;
        Ok(sc)
    }

    pub fn is_declared(&self, name: &str) -> bool {
        self.clients.iter().any(|c| c.name == name)
    }

    /// Checks names, time order and sizes. Runs before any event executes.
    pub fn validate(&self) -> Result<(), ScenarioError> {
        let mut names = BTreeSet::new();
        for c in &self.clients {
            if c.name == SERVER_LABEL {
                return Err(ScenarioError::new(c.line, format!("{SERVER_LABEL} is reserved")));
            }
            if !names.insert(c.name.as_str()) {
                return Err(ScenarioError::new(c.line, format!("client {} declared twice", c.name)));
            }
        }
        for c in &self.clients {
            for f in &c.friends {
                if !names.contains(f.as_str()) {
                    return Err(ScenarioError::new(c.line, format!("undeclared user {f}")));
                }
            }
        }
        let user = |name: &str, line: usize| {
            if names.contains(name) {
                Ok(())
            } else {
                Err(ScenarioError::new(line, format!("undeclared user {name}")))
            }
        };
        let endpoint = |name: &str, line: usize| {
            if name == SERVER_LABEL {
                Ok(())
            } else {
                user(name, line)
            }
        };
        let mut last = 0;
        for a in &self.actions {
            let line = a.line;
            if a.at < last {
                return Err(ScenarioError::new(line, format!("time {} goes backwards (after {last})", a.at)));
            }
            last = a.at;
            match &a.action {
                Action::SendRegular { from, to, .. } => {
                    user(from, line)?;
                    user(to, line)?;
                }
                Action::SendDeniable { from, decoy, to, .. } => {
                    user(from, line)?;
                    user(decoy, line)?;
                    user(to, line)?;
                }
                Action::Block { who, decoy, target } => {
                    user(who, line)?;
                    user(decoy, line)?;
                    user(target, line)?;
                }
                Action::Offline(u) | Action::Online(u) | Action::AppActive(u) | Action::KeyPress(u) => user(u, line)?,
                Action::Inject { src, dst, size } => {
                    endpoint(src, line)?;
                    endpoint(dst, line)?;
                    if src == dst || (src != SERVER_LABEL && dst != SERVER_LABEL) {
                        return Err(ScenarioError::new(line, "injection must be on a client-server link"));
                    }
                    if DatagramKind::from_wire_size(*size).is_none() {
                        return Err(ScenarioError::new(line, format!("size {size} is not a protocol datagram size")));
                    }
                }
                Action::Drop { src, dst, .. } => {
                    endpoint(src, line)?;
                    endpoint(dst, line)?;
                }
                Action::SendRecipe {
                    from,
                    decoy,
                    host,
                    bytecode,
                } => {
                    user(from, line)?;
                    user(decoy, line)?;
                    user(host, line)?;
                    if bytecode.len() > MAX_RECIPE_SIZE {
                        return Err(ScenarioError::new(line, "recipe exceeds 446 bytes"));
                    }
                }
            }
        }
        Ok(())
    }
}

/// Reads a recipe: `.rcp` sources are compiled, anything else must be a
/// compiled recipe file.
pub fn load_recipe_file(path: &Path) -> Result<Vec<u8>, String> {
    let bytes = std::fs::read(path).map_err(|e| format!("{}: {e}", path.display()))?;
    if path.extension().is_some_and(|e| e == "rcp") {
        let src = String::from_utf8(bytes).map_err(|_| format!("{}: not UTF-8", path.display()))?;
        recipes::compile(&src).map_err(|e| format!("{}: {e}", path.display()))
    } else {
        recipes::from_file_bytes(&bytes).map_err(|e| format!("{}: {e}", path.display()))
    }
}

fn bundled_listing(name: &str) -> Result<Vec<u8>, String> {
    let src = match name {
        "app_active" => listings::APP_ACTIVE,
        "midnight" => listings::MIDNIGHT,
        "reply_each" => listings::REPLY_EACH,
        _ => return Err(format!("unknown listing {name}")),
    };
    recipes::compile(src).map_err(|e| e.to_string())
}

#[derive(Clone, Debug, PartialEq, Eq)]
enum Word {
    Bare(String),
    Quoted(Vec<u8>),
}

fn split_words(line: &str) -> Result<Vec<Word>, String> {
    let mut words = Vec::new();
    let mut chars = line.chars().peekable();
    while let Some(&c) = chars.peek() {
        if c.is_whitespace() {
            chars.next();
        } else if c == '#' {
            break;
        } else if c == '"' {
            chars.next();
            let mut s = String::new();
            loop {
                match chars.next() {
                    None => return Err("unterminated string".into()),
                    Some('"') => break,
                    Some('\\') => match chars.next() {
                        Some('n') => s.push('\n'),
                        Some('"') => s.push('"'),
                        Some('\\') => s.push('\\'),
                        other => return Err(format!("bad escape {other:?}")),
                    },
                    Some(ch) => s.push(ch),
                }
            }
            words.push(Word::Quoted(s.into_bytes()));
        } else {
            let mut s = String::new();
            while let Some(&ch) = chars.peek() {
                if ch.is_whitespace() {
                    break;
                }
                s.push(ch);
                chars.next();
            }
            words.push(Word::Bare(s));
        }
    }
    Ok(words)
}

fn bare<'w>(words: &'w [Word], i: usize, what: &str) -> Result<&'w str, String> {
    match words.get(i) {
        Some(Word::Bare(s)) => Ok(s),
        Some(Word::Quoted(_)) => Err(format!("expected {what}, found a string")),
        None => Err(format!("missing {what}")),
    }
}

fn keyword(words: &[Word], i: usize, kw: &str) -> Result<(), String> {
    match bare(words, i, kw)? {
        s if s == kw => Ok(()),
        s => Err(format!("expected `{kw}`, found `{s}`")),
    }
}

fn number<T: std::str::FromStr>(s: &str, what: &str) -> Result<T, String> {
    s.parse().map_err(|_| format!("bad {what} `{s}`"))
}

fn text(words: &[Word], i: usize) -> Result<Vec<u8>, String> {
    match words.get(i) {
        Some(Word::Quoted(t)) => Ok(t.clone()),
        Some(Word::Bare(s)) => match s.strip_prefix("bytes=") {
            Some(n) => Ok(vec![b'x'; number::<usize>(n, "byte count")?]),
            None => Err(format!("expected quoted text or bytes=<n>, found `{s}`")),
        },
        None => Err("missing text".into()),
    }
}

fn end(words: &[Word], n: usize) -> Result<(), String> {
    if words.len() > n {
        return Err("trailing arguments".into());
    }
    Ok(())
}

fn key_values(words: &[Word], from: usize) -> Result<Vec<(&str, &str)>, String> {
    (from..words.len())
        .map(|i| {
            let w = bare(words, i, "key=value")?;
            w.split_once('=').ok_or_else(|| format!("expected key=value, found `{w}`"))
        })
        .collect()
}

fn parse_directive(
    sc: &mut Scenario,
    words: &[Word],
    line: usize,
    load: &dyn Fn(&str) -> Result<Vec<u8>, String>,
) -> Result<(), String> {
    match bare(words, 0, "directive")? {
        "seed" => {
            sc.seed = number(bare(words, 1, "seed")?, "seed")?;
            end(words, 2)
        }
        "server" => {
            for (k, v) in key_values(words, 1)? {
                match k {
                    "lookup_delay" => sc.server.lookup_delay_ms = number(v, k)?,
                    "forward_delay" => sc.server.forward_delay_ms = number(v, k)?,
                    "spacing" => sc.server.piggyback_spacing_ms = number(v, k)?,
                    "queue_cap" => sc.server.deniable_queue_cap = Some(number(v, k)?),
                    _ => return Err(format!("unknown server setting `{k}`")),
                }
            }
            Ok(())
        }
        "client" => {
            let mut spec = ClientSpec {
                name: bare(words, 1, "client name")?.to_string(),
                p: DEFAULT_P,
                ttl: crate::client::DEFAULT_TTL_MS,
                friends: Vec::new(),
                line,
            };
            for (k, v) in key_values(words, 2)? {
                match k {
                    "p" => spec.p = number(v, k)?,
                    "ttl" => spec.ttl = number(v, k)?,
                    "friends" => {
                        spec.friends = v.split(',').filter(|f| !f.is_empty()).map(str::to_string).collect()
                    }
                    _ => return Err(format!("unknown client setting `{k}`")),
                }
            }
            sc.clients.push(spec);
            Ok(())
        }
        "at" => {
            let at = number(bare(words, 1, "time")?, "time")?;
            let action = parse_action(words, load)?;
            sc.actions.push(TimedAction { at, action, line });
            Ok(())
        }
        other => Err(format!("unknown directive `{other}`")),
    }
}

fn parse_action(w: &[Word], load: &dyn Fn(&str) -> Result<Vec<u8>, String>) -> Result<Action, String> {
    let name = |i: usize| bare(w, i, "user").map(str::to_string);
    let action = match bare(w, 2, "action")? {
        "send_regular" => {
            end(w, 6)?;
            Action::SendRegular {
                from: name(3)?,
                to: name(4)?,
                text: text(w, 5)?,
            }
        }
        "send_deniable" => {
            keyword(w, 4, "via")?;
            keyword(w, 6, "to")?;
            end(w, 9)?;
            Action::SendDeniable {
                from: name(3)?,
                decoy: name(5)?,
                to: name(7)?,
                text: text(w, 8)?,
            }
        }
        "block" => {
            keyword(w, 4, "via")?;
            keyword(w, 6, "target")?;
            end(w, 8)?;
            Action::Block {
                who: name(3)?,
                decoy: name(5)?,
                target: name(7)?,
            }
        }
        "offline" | "online" | "app_active" | "key_press" => {
            end(w, 4)?;
            let u = name(3)?;
            match bare(w, 2, "action")? {
                "offline" => Action::Offline(u),
                "online" => Action::Online(u),
                "app_active" => Action::AppActive(u),
                _ => Action::KeyPress(u),
            }
        }
        "inject" => {
            end(w, 6)?;
            Action::Inject {
                src: name(3)?,
                dst: name(4)?,
                size: number(bare(w, 5, "size")?, "size")?,
            }
        }
        "drop" => {
            end(w, 6)?;
            Action::Drop {
                src: name(3)?,
                dst: name(4)?,
                count: number(bare(w, 5, "count")?, "count")?,
            }
        }
        "send_recipe" => {
            keyword(w, 4, "via")?;
            keyword(w, 6, "to")?;
            end(w, 9)?;
            let path = bare(w, 8, "recipe path")?;
            let bytecode = match path.strip_prefix("listing:") {
                Some(l) => bundled_listing(l)?,
                None => load(path)?,
            };
            Action::SendRecipe {
                from: name(3)?,
                decoy: name(5)?,
                host: name(7)?,
                bytecode,
            }
        }
        other => return Err(format!("unknown action `{other}`")),
    };
    Ok(action)
}
