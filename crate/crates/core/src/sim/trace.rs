//! Recorded traffic and the adversary's projection of it.

use std::collections::BTreeMap;
use std::fmt::{self, Write as _};

use thiserror::Error;

use crate::wire::{MessageType, UserId};
use crate::SimTime;

/// Simulator-internal facts about a datagram. Never part of the adversary view.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Annotation {
    KeyRequest { keys: u8 },
    KeyResponse,
    /// Client to server. `text_len` is the plaintext carried by this one message.
    Message { msg_type: MessageType, text_len: usize },
    /// Server to client, one slot of a forward.
    Forward { forward_id: u64, p: u32, slot: ForwardSlot },
    Injected,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ForwardSlot {
    Piggyback { index: u32, deniable: bool },
    Main(MessageType),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Direction {
    ToServer,
    FromServer,
    /// Injected traffic between two clients.
    Other,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct TraceEvent {
    pub time: SimTime,
    pub src: UserId,
    pub dst: UserId,
    pub size: usize,
    pub note: Annotation,
}

impl TraceEvent {
    pub fn direction(&self) -> Direction {
        if self.dst == UserId::SERVER {
            Direction::ToServer
        } else if self.src == UserId::SERVER {
            Direction::FromServer
        } else {
            Direction::Other
        }
    }
}

/// Everything that crossed the network in one run, in (time, FIFO) order.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct Trace {
    pub names: BTreeMap<UserId, String>,
    pub events: Vec<TraceEvent>,
}

impl Trace {
    pub fn label(&self, id: UserId) -> String {
        if id == UserId::SERVER {
            return SERVER_LABEL.to_string();
        }
        self.names.get(&id).cloned().unwrap_or_else(|| id.to_string())
    }
}

pub const SERVER_LABEL: &str = "SERVER";

/// What a global passive observer sees of one datagram.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct ViewEvent {
    pub time: SimTime,
    pub src: String,
    pub dst: String,
    pub size: usize,
}

#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct AdversaryView {
    pub events: Vec<ViewEvent>,
}

/// Projects a trace onto (time, src, dst, size).
pub fn adversary_view(trace: &Trace) -> AdversaryView {
    AdversaryView {
        events: trace
            .events
            .iter()
            .map(|e| ViewEvent {
                time: e.time,
                src: trace.label(e.src),
                dst: trace.label(e.dst),
                size: e.size,
            })
            .collect(),
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Field {
    Time,
    Src,
    Dst,
    Size,
    /// One view ended before the other.
    Length,
}

impl fmt::Display for Field {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Field::Time => "time",
            Field::Src => "src",
            Field::Dst => "dst",
            Field::Size => "size",
            Field::Length => "length",
        })
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Verdict {
    Equal,
    Diverges {
        index: usize,
        field: Field,
        left: Option<ViewEvent>,
        right: Option<ViewEvent>,
    },
}

impl Verdict {
    pub fn is_equal(&self) -> bool {
        matches!(self, Verdict::Equal)
    }
}

impl fmt::Display for Verdict {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Verdict::Equal => f.write_str("views are identical"),
            Verdict::Diverges {
                index,
                field,
                left,
                right,
            } => {
                let show = |e: &Option<ViewEvent>| match e {
                    Some(e) => format!("{}\t{}\t{}\t{}", e.time, e.src, e.dst, e.size),
                    None => "<end of trace>".to_string(),
                };
                write!(
                    f,
                    "first divergence at event {index} ({field}):\n  left:  {}\n  right: {}",
                    show(left),
                    show(right)
                )
            }
        }
    }
}

/// Compares two views event by event and reports the earliest difference.
pub fn check_indistinguishable(a: &AdversaryView, b: &AdversaryView) -> Verdict {
    for (index, (x, y)) in a.events.iter().zip(&b.events).enumerate() {
        let field = if x.time != y.time {
            Field::Time
        } else if x.src != y.src {
            Field::Src
        } else if x.dst != y.dst {
            Field::Dst
        } else if x.size != y.size {
            Field::Size
        } else {
            continue;
        };
        return Verdict::Diverges {
            index,
            field,
            left: Some(x.clone()),
            right: Some(y.clone()),
        };
    }
    if a.events.len() != b.events.len() {
        let index = a.events.len().min(b.events.len());
        return Verdict::Diverges {
            index,
            field: Field::Length,
            left: a.events.get(index).cloned(),
            right: b.events.get(index).cloned(),
        };
    }
    Verdict::Equal
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("line {line}: {message}")]
pub struct TraceParseError {
    pub line: usize,
    pub message: String,
}

impl AdversaryView {
    /// One event per line: `time_ms<TAB>src<TAB>dst<TAB>size`.
    pub fn to_tsv(&self) -> String {
        let mut out = String::new();
        for e in &self.events {
            let _ = writeln!(out, "{}\t{}\t{}\t{}", e.time, e.src, e.dst, e.size);
        }
        out
    }

    /// Every record must be newline-terminated, so a file cut mid-record is
    /// rejected rather than silently shortened.
    pub fn parse_tsv(text: &str) -> Result<Self, TraceParseError> {
        let mut events = Vec::new();
        let mut rest = text;
        let mut line_no = 0;
        while !rest.is_empty() {
            line_no += 1;
            let Some(end) = rest.find('\n') else {
                return Err(TraceParseError {
                    line: line_no,
                    message: "truncated record (no trailing newline)".into(),
                });
            };
            let line = rest[..end].trim_end_matches('\r');
            rest = &rest[end + 1..];
            if line.is_empty() {
                continue;
            }
            let fields: Vec<&str> = line.split('\t').collect();
            let err = |message: String| TraceParseError {
                line: line_no,
                message,
            };
            if fields.len() != 4 {
                return Err(err(format!("expected 4 tab-separated fields, found {}", fields.len())));
            }
            let time = fields[0]
                .parse()
                .map_err(|_| err(format!("bad time {:?}", fields[0])))?;
            let size = fields[3]
                .parse()
                .map_err(|_| err(format!("bad size {:?}", fields[3])))?;
            if fields[1].is_empty() || fields[2].is_empty() {
                return Err(err("empty endpoint".into()));
            }
            events.push(ViewEvent {
                time,
                src: fields[1].to_string(),
                dst: fields[2].to_string(),
                size,
            });
        }
        Ok(AdversaryView { events })
    }
}
