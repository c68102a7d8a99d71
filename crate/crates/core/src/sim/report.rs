//! Bandwidth and latency overhead of a run, measured against the smallest
//! non-deniable equivalent of each datagram.
//!
//! * A message carrying `m` plaintext bytes would need one 605-byte baseline
//!   message per 446 bytes; a padded message is always 1134 bytes.
//! * Piggyback slots filled with dummies are overhead, slots carrying queued
//!   deniable messages are not: `(p - n) * 1134` per forward.
//! * The dummy forwarded to a decoy is the cover for a deniable message and is
//!   counted separately.
//! * Key requests and responses are padded to two ids and two keys.
//! * Each forward delays its main message by `p` piggyback spacings.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use crate::server::ServerConfig;
use crate::sim::trace::{Annotation, ForwardSlot, Trace};
use crate::wire::{
    MessageType, MAX_CHUNK_PLAINTEXT, MESSAGE_WIRE_SIZE, TLS_OVERHEAD, TRANSPORT_OVERHEAD,
    USER_ID_LEN,
};
use crate::SimTime;

/// Smallest single-chunk message: two 16-byte ids, one 512-byte sealed chunk,
/// TLS header and tag, TCP and IP headers.
pub const BASELINE_MESSAGE: usize = 605;
/// Each further 446-byte chunk adds one sealed block.
pub const BASELINE_EXTRA_CHUNK: usize = 512;
/// Unpadded key request: one id.
pub const BASELINE_KEY_REQUEST: usize = USER_ID_LEN + TLS_OVERHEAD + TRANSPORT_OVERHEAD;
/// Unpadded key response: one key.
pub const BASELINE_KEY_RESPONSE: usize = 512 + TLS_OVERHEAD + TRANSPORT_OVERHEAD;

pub fn baseline_message_size(text_len: usize) -> usize {
    let chunks = text_len.div_ceil(MAX_CHUNK_PLAINTEXT).max(1);
    BASELINE_MESSAGE + (chunks - 1) * BASELINE_EXTRA_CHUNK
}

/// Bandwidth overhead of one padded message carrying `text_len` bytes.
pub fn message_overhead(text_len: usize) -> usize {
    MESSAGE_WIRE_SIZE - baseline_message_size(text_len)
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct MessageLine {
    pub time: SimTime,
    pub sender: String,
    pub kind: MessageType,
    pub text_len: usize,
    pub baseline: usize,
    pub overhead: usize,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ForwardLine {
    pub time: SimTime,
    pub receiver: String,
    pub main: MessageType,
    pub p: u32,
    /// Piggyback slots that carried queued deniable messages.
    pub n: u32,
    pub datagrams: usize,
    pub dummy_overhead: usize,
    pub latency_ms: SimTime,
}

#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct OverheadReport {
    pub messages: Vec<MessageLine>,
    pub forwards: Vec<ForwardLine>,
    pub key_requests: usize,
    pub key_responses: usize,
    pub injected: usize,
}

impl OverheadReport {
    pub fn message_overhead(&self) -> usize {
        self.messages.iter().map(|m| m.overhead).sum()
    }

    pub fn piggyback_overhead(&self) -> usize {
        self.forwards.iter().map(|f| f.dummy_overhead).sum()
    }

    /// Dummies forwarded to decoys as cover for deniable sends and blocks.
    pub fn decoy_overhead(&self) -> usize {
        self.forwards.iter().filter(|f| f.main == MessageType::Dummy).count() * MESSAGE_WIRE_SIZE
    }

    pub fn key_overhead(&self) -> usize {
        self.key_requests * (crate::wire::KEY_REQUEST_WIRE_SIZE - BASELINE_KEY_REQUEST)
            + self.key_responses * (crate::wire::KEY_RESPONSE_WIRE_SIZE - BASELINE_KEY_RESPONSE)
    }

    pub fn total_overhead(&self) -> usize {
        self.message_overhead() + self.piggyback_overhead() + self.decoy_overhead() + self.key_overhead()
    }

    pub fn total_latency(&self) -> SimTime {
        self.forwards.iter().map(|f| f.latency_ms).sum()
    }

    /// Human-readable table followed by a `key=value` block.
    pub fn render(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "messages");
        let _ = writeln!(s, "{:>8}  {:<12} {:<8} {:>6} {:>8} {:>8}", "time", "sender", "type", "text", "baseline", "overhead");
        for m in &self.messages {
            let _ = writeln!(
                s,
                "{:>8}  {:<12} {:<8} {:>6} {:>7}B {:>7}B",
                m.time,
                m.sender,
                type_name(m.kind),
                m.text_len,
                m.baseline,
                m.overhead
            );
        }
        let _ = writeln!(s, "\nforwards");
        let _ = writeln!(s, "{:>8}  {:<12} {:<8} {:>3} {:>3} {:>9} {:>8}", "time", "receiver", "main", "p", "n", "dummies", "latency");
        for f in &self.forwards {
            let _ = writeln!(
                s,
                "{:>8}  {:<12} {:<8} {:>3} {:>3} {:>8}B {:>6}ms",
                f.time,
                f.receiver,
                type_name(f.main),
                f.p,
                f.n,
                f.dummy_overhead,
                f.latency_ms
            );
        }
        let _ = writeln!(s);
        for (k, v) in self.summary() {
            let _ = writeln!(s, "{k}={v}");
        }
        s
    }

    pub fn summary(&self) -> Vec<(&'static str, u64)> {
        vec![
            ("messages", self.messages.len() as u64),
            ("message_overhead_bytes", self.message_overhead() as u64),
            ("forwards", self.forwards.len() as u64),
            ("piggyback_dummy_overhead_bytes", self.piggyback_overhead() as u64),
            ("decoy_dummy_overhead_bytes", self.decoy_overhead() as u64),
            ("key_requests", self.key_requests as u64),
            ("key_responses", self.key_responses as u64),
            ("key_padding_overhead_bytes", self.key_overhead() as u64),
            ("injected", self.injected as u64),
            ("total_overhead_bytes", self.total_overhead() as u64),
            ("total_latency_ms", self.total_latency()),
        ]
    }
}

fn type_name(t: MessageType) -> &'static str {
    match t {
        MessageType::Regular => "regular",
        MessageType::Deniable => "deniable",
        MessageType::Dummy => "dummy",
        MessageType::BlockRequest => "block",
    }
}

/// Builds the report from an annotated trace.
pub fn overhead_report(trace: &Trace, config: &ServerConfig) -> OverheadReport {
    let mut report = OverheadReport::default();
    let mut forwards: BTreeMap<u64, ForwardLine> = BTreeMap::new();
    for e in &trace.events {
        match e.note {
            Annotation::Message { msg_type, text_len } => {
                let baseline = baseline_message_size(text_len);
                report.messages.push(MessageLine {
                    time: e.time,
                    sender: trace.label(e.src),
                    kind: msg_type,
                    text_len,
                    baseline,
                    overhead: MESSAGE_WIRE_SIZE - baseline,
                });
            }
            Annotation::KeyRequest { .. } => report.key_requests += 1,
            Annotation::KeyResponse => report.key_responses += 1,
            Annotation::Injected => report.injected += 1,
            Annotation::Forward { forward_id, p, slot } => {
                let line = forwards.entry(forward_id).or_insert_with(|| ForwardLine {
                    time: e.time,
                    receiver: trace.label(e.dst),
                    main: MessageType::Dummy,
                    p,
                    n: 0,
                    datagrams: 0,
                    dummy_overhead: 0,
                    latency_ms: SimTime::from(p) * config.piggyback_spacing_ms,
                });
                line.datagrams += 1;
                match slot {
                    ForwardSlot::Piggyback { deniable: true, .. } => line.n += 1,
                    ForwardSlot::Piggyback { deniable: false, .. } => line.dummy_overhead += MESSAGE_WIRE_SIZE,
                    ForwardSlot::Main(t) => line.main = t,
                }
            }
        }
    }
    report.forwards = forwards.into_values().collect();
    report
}
