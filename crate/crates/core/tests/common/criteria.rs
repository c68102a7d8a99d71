//! The seven acceptance checks. Each returns a one-line summary on success
//! and a description of the first violation otherwise. The per-topic test
//! files and the acceptance runner share them.

use std::collections::BTreeMap;

use denim::client::{CacheDecision, Client, Intent};
use denim::recipes::{compile, listings, MAX_RECIPE_SIZE};
use denim::sim::{overhead_report, Action, Annotation, RecipeState, Scenario};
use denim::wire::{LinkKey, MessageType, PublicKey, UserId};
use denim::SimTime;

use super::*;

pub type Check = Result<String, String>;

macro_rules! ensure {
    ($cond:expr, $($fmt:tt)+) => {
        if !$cond {
            return Err(format!($($fmt)+));
        }
    };
}

// Sizes rebuilt from the field layout rather than taken from the crate.
const ID: usize = 16;
const SEALED: usize = 512;
const TLS: usize = 5 + 16;
const TCP_IP: usize = 40;
const MSG_RECORD: usize = 3 * ID + 1 + 2 * SEALED + TLS;
const REQ_RECORD: usize = 2 * ID + TLS;
const RESP_RECORD: usize = 2 * SEALED + TLS;
const MSG_WIRE: usize = MSG_RECORD + TCP_IP;
const REQ_WIRE: usize = REQ_RECORD + TCP_IP;
const RESP_WIRE: usize = RESP_RECORD + TCP_IP;
/// Unpadded single-chunk message: sender and receiver ids plus one sealed block.
const BASELINE: usize = 2 * ID + SEALED + TLS + TCP_IP;
const CHUNK_TEXT: usize = 446;

pub fn size_trichotomy() -> Check {
    let sc = random_scenario(1, 1_000);
    ensure!(sc.actions.len() >= 1_000, "scenario has only {} actions", sc.actions.len());
    let out = run(&sc);
    let mut counts: BTreeMap<&str, usize> = BTreeMap::new();
    for (i, e) in out.trace.events.iter().enumerate() {
        let (kind, want) = match e.note {
            Annotation::Message { .. } | Annotation::Forward { .. } => ("message", MSG_WIRE),
            Annotation::KeyRequest { .. } => ("key request", REQ_WIRE),
            Annotation::KeyResponse => ("key response", RESP_WIRE),
            Annotation::Injected => ("injected", e.size),
        };
        ensure!(e.size == want, "event {i}: {kind} of {}B, expected {want}B", e.size);
        ensure!(
            [MSG_WIRE, REQ_WIRE, RESP_WIRE].contains(&e.size),
            "event {i}: size {} outside the three protocol sizes",
            e.size
        );
        *counts.entry(kind).or_default() += 1;
    }
    for kind in ["message", "key request", "key response"] {
        ensure!(counts.get(kind).copied().unwrap_or(0) > 0, "no {kind} datagrams observed");
    }
    ensure!(
        (MSG_RECORD, REQ_RECORD, RESP_RECORD) == (1094, 53, 1045),
        "record layout drifted"
    );
    Ok(format!(
        "{} datagrams ({} messages, {} key requests, {} key responses, {} injected)",
        out.trace.events.len(),
        counts["message"],
        counts["key request"],
        counts["key response"],
        counts.get("injected").copied().unwrap_or(0)
    ))
}

pub fn cover_story_equivalence() -> Check {
    let pairs = cover_story_library();
    ensure!(pairs.len() >= 10, "only {} cover-story pairs", pairs.len());
    for p in &pairs {
        p.check()?;
    }
    Ok(format!("{} paired scenarios have identical adversary views", pairs.len()))
}

/// One forward to `r` (piggyback value `p`) after `n` deniable messages were
/// queued for it.
fn piggyback_case(p: u32, n: u32) -> Check {
    let mut sc = Scenario::new(7)
        .client("s", 0, TTL, &["d", "r"])
        .client("d", 0, TTL, &["s"])
        .client("r", p, TTL, &["s", "x"])
        .client("x", 0, TTL, &["r"]);
    for i in 0..n {
        sc = sc.at(SimTime::from(i) * 100, deniable("s", "d", "r", &format!("q{i}")));
    }
    sc = sc.at(10_000, regular("x", "r", "tick"));
    let out = run(&sc);
    ensure!(out.failures.is_empty(), "p={p} n={n}: failures {:?}", out.failures);
    let report = overhead_report(&out.trace, &sc.server);
    let fwd: Vec<_> = report.forwards.iter().filter(|f| f.receiver == "r").collect();
    ensure!(fwd.len() == 1, "p={p} n={n}: {} forwards to r", fwd.len());
    let f = fwd[0];
    ensure!(f.main == MessageType::Regular, "p={p} n={n}: main slot {:?}", f.main);
    let emitted = out
        .trace
        .events
        .iter()
        .filter(|e| matches!(e.note, Annotation::Forward { .. }) && out.trace.label(e.dst) == "r")
        .count();
    ensure!(
        emitted == p as usize + 1 && f.datagrams == emitted,
        "p={p} n={n}: {emitted} datagrams, expected {}",
        p + 1
    );
    let want = (p as usize).saturating_sub(n as usize) * MSG_WIRE;
    ensure!(
        f.dummy_overhead == want,
        "p={p} n={n}: dummy overhead {}B, expected {want}B",
        f.dummy_overhead
    );
    ensure!(f.n == n.min(p), "p={p} n={n}: {} queued messages piggybacked", f.n);
    ensure!(
        f.latency_ms == SimTime::from(p) * sc.server.piggyback_spacing_ms,
        "p={p} n={n}: latency {}ms",
        f.latency_ms
    );
    let delivered = out.client("r").inbox().iter().filter(|m| m.message_type == MessageType::Deniable).count();
    ensure!(delivered == n.min(p) as usize, "p={p} n={n}: {delivered} deniable messages delivered");
    Ok(String::new())
}

fn expected_message_overhead(len: usize) -> usize {
    let chunks = len.div_ceil(CHUNK_TEXT).max(1);
    MSG_WIRE - (BASELINE + (chunks - 1) * SEALED)
}

pub fn piggyback_arithmetic() -> Check {
    let mut cases = 0;
    for p in [0u32, 1, 3, 8] {
        for n in 0..=2 * p {
            piggyback_case(p, n)?;
            cases += 1;
        }
    }
    ensure!(BASELINE == 605, "baseline {BASELINE}B");
    for (len, want) in [(0, 529), (1, 529), (446, 529), (447, 17), (600, 17), (892, 17)] {
        ensure!(expected_message_overhead(len) == want, "oracle disagrees for {len}B");
        let sc = with(cast(3, &[("a", 0), ("b", 0)]), vec![(0, regular_len("a", "b", len))]);
        let out = run(&sc);
        let report = overhead_report(&out.trace, &sc.server);
        ensure!(report.messages.len() == 1, "{len}B text made {} messages", report.messages.len());
        let m = &report.messages[0];
        ensure!(m.baseline + m.overhead == MSG_WIRE, "{len}B: parts do not add up");
        ensure!(m.overhead == want, "{len}B text: overhead {}B, expected {want}B", m.overhead);
    }
    Ok(format!("{cases} (p, n) forwards and 6 message lengths match"))
}

// Cache states for the brute-force oracle.

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Slot {
    Absent,
    Alive,
    Expired,
}

const SLOTS: [Slot; 3] = [Slot::Absent, Slot::Alive, Slot::Expired];
const NOW: SimTime = 100_000;
const OTHERS: [&str; 3] = ["x", "y", "z"];

/// Deniable entry keyed by decoy: liveness and the receiver it is tied to.
pub type PairSlot = (Slot, usize);

#[derive(Clone, Debug)]
struct CacheState {
    regular: [Slot; 3],
    pairs: [Option<PairSlot>; 3],
}

impl CacheState {
    fn all() -> Vec<CacheState> {
        let mut regs = Vec::new();
        for a in SLOTS {
            for b in SLOTS {
                for c in SLOTS {
                    regs.push([a, b, c]);
                }
            }
        }
        let pair_options = |decoy: usize| {
            let mut v = vec![None];
            for live in [Slot::Alive, Slot::Expired] {
                for r in 0..3 {
                    if r != decoy {
                        v.push(Some((live, r)));
                    }
                }
            }
            v
        };
        let mut out = Vec::new();
        for regular in &regs {
            for p0 in pair_options(0) {
                for p1 in pair_options(1) {
                    for p2 in pair_options(2) {
                        out.push(CacheState {
                            regular: *regular,
                            pairs: [p0, p1, p2],
                        });
                    }
                }
            }
        }
        out
    }

    fn reg_alive(&self, u: usize) -> bool {
        self.regular[u] == Slot::Alive
    }

    /// Receiver `u` is tied to while alive as a decoy.
    fn decoy_tie(&self, u: usize) -> Option<usize> {
        match self.pairs[u] {
            Some((Slot::Alive, r)) => Some(r),
            _ => None,
        }
    }

    fn client(&self) -> Client {
        let key = |tag: u8| PublicKey::from_bytes([tag; 512]);
        let ids: Vec<UserId> = OTHERS.iter().map(|n| UserId::from_name(n)).collect();
        let mut c = Client::new(
            UserId::from_name("me"),
            key(1),
            LinkKey::from_bytes([1; 32]),
            key(2),
            ids.clone(),
            TTL,
        );
        let expiry = |s: Slot| if s == Slot::Alive { NOW + 500 } else { NOW };
        for u in 0..3 {
            if self.regular[u] != Slot::Absent {
                c.caches.store_regular(ids[u], key(10 + u as u8), expiry(self.regular[u]));
            }
            if let Some((live, r)) = self.pairs[u] {
                c.caches.store_pair(ids[u], key(20 + u as u8), ids[r], key(30 + r as u8), expiry(live));
            }
        }
        c
    }
}

/// The ordered rules read straight off the case analysis.
fn oracle(state: &CacheState, receiver: usize, decoy: Option<usize>) -> CacheDecision {
    match decoy {
        None if state.reg_alive(receiver) => CacheDecision::ReuseRegular,
        None if state.decoy_tie(receiver).is_some() => CacheDecision::ReuseDecoyAsRegular,
        None => CacheDecision::FetchOne,
        Some(d) if state.reg_alive(d) => CacheDecision::Abort,
        Some(d) => match state.decoy_tie(d) {
            Some(r) if r != receiver => CacheDecision::Abort,
            Some(_) => CacheDecision::ReusePair,
            None => CacheDecision::FetchPair,
        },
    }
}

/// Expiry of every entry, keyed by (regular?, owner index).
fn expiries(c: &Client) -> BTreeMap<(bool, UserId), SimTime> {
    let mut m = BTreeMap::new();
    for (u, e) in &c.caches.regular {
        m.insert((true, *u), e.expires_at);
    }
    for (u, e) in &c.caches.deniable {
        m.insert((false, *u), e.decoy.expires_at);
    }
    m
}

fn check_state(state: &CacheState, receiver: usize, decoy: Option<usize>) -> Result<(), String> {
    let ids: Vec<UserId> = OTHERS.iter().map(|n| UserId::from_name(n)).collect();
    let mut client = state.client();
    let before = expiries(&client);
    let intent = match decoy {
        None => Intent::Regular { receiver: ids[receiver] },
        Some(d) => Intent::Deniable {
            receiver: ids[receiver],
            decoy: ids[d],
        },
    };
    let got = client.resolve_keys(intent, NOW).map_err(|e| format!("{state:?}: {e}"))?;
    let want = oracle(state, receiver, decoy);
    ensure!(
        got == want,
        "state {state:?}, receiver {receiver}, decoy {decoy:?}: got {got:?}, expected {want:?}"
    );
    let mut after_want = before.clone();
    let bumped = match want {
        CacheDecision::ReuseRegular => Some((true, ids[receiver])),
        CacheDecision::ReuseDecoyAsRegular => Some((false, ids[receiver])),
        CacheDecision::ReusePair => Some((false, ids[decoy.unwrap()])),
        _ => None,
    };
    if let Some(k) = bumped {
        after_want.insert(k, NOW + TTL);
    }
    ensure!(
        expiries(&client) == after_want,
        "state {state:?}, receiver {receiver}, decoy {decoy:?}: TTLs after {want:?} are wrong"
    );
    Ok(())
}

/// Checks `resolve_keys` and TTL bumps on every state; returns the number of
/// (state, intent) combinations examined and the decisions seen.
pub fn cache_brute_force() -> Result<(usize, BTreeMap<String, usize>), String> {
    let mut checked = 0;
    let mut seen = BTreeMap::new();
    for state in CacheState::all() {
        for r in 0..3 {
            for d in [None, Some(0), Some(1), Some(2)] {
                if d == Some(r) {
                    continue;
                }
                check_state(&state, r, d)?;
                *seen.entry(format!("{:?}", oracle(&state, r, d))).or_insert(0) += 1;
                checked += 1;
            }
        }
    }
    Ok((checked, seen))
}

/// One hand-enumerated cache situation and the decision it must produce.
pub struct Case {
    pub name: &'static str,
    pub receiver: usize,
    pub decoy: Option<usize>,
    pub want: CacheDecision,
    pub regular: [Slot; 3],
    pub pairs: [Option<PairSlot>; 3],
}

/// Every named case of the cache analysis, with x as the receiver and y as
/// the decoy.
pub fn enumerated_cases() -> Vec<Case> {
    use CacheDecision::*;
    use Slot::{Absent as A, Alive as L};
    let (x, y, z) = (0, 1, 2);
    let none = [None, None, None];
    vec![
        case("regular: receiver in regular cache", x, None, ReuseRegular, [L, A, A], none),
        case("regular: receiver alive as decoy", x, None, ReuseDecoyAsRegular, [A, A, A], [Some((L, z)), None, None]),
        case("regular: receiver alive only as deniable receiver", x, None, FetchOne, [A, A, A], [None, Some((L, x)), None]),
        case("regular: nothing cached", x, None, FetchOne, [A, A, A], none),
        case("deniable: decoy in regular cache", x, Some(y), Abort, [A, L, A], none),
        case("deniable: decoy tied to another receiver", x, Some(y), Abort, [A, A, A], [None, Some((L, z)), None]),
        case("deniable: decoy alive as deniable receiver", x, Some(y), FetchPair, [A, A, A], [None, None, Some((L, y))]),
        case("deniable: receiver in regular cache", x, Some(y), FetchPair, [L, A, A], none),
        case("deniable: receiver alive as decoy", x, Some(y), FetchPair, [A, A, A], [Some((L, z)), None, None]),
        case("deniable: receiver tied to another decoy", x, Some(y), FetchPair, [A, A, A], [None, None, Some((L, x))]),
        case("deniable: exact pair cached", x, Some(y), ReusePair, [A, A, A], [None, Some((L, x)), None]),
        case("deniable: receiver and decoy flipped", x, Some(y), FetchPair, [A, A, A], [Some((L, y)), None, None]),
        case("deniable: decoy regular, receiver tied elsewhere", x, Some(y), Abort, [A, L, A], [None, None, Some((L, x))]),
        case("deniable: decoy regular, receiver is a decoy", x, Some(y), Abort, [A, L, A], [Some((L, z)), None, None]),
        case("deniable: receiver regular, decoy tied elsewhere", x, Some(y), Abort, [L, A, A], [None, Some((L, z)), None]),
        case("deniable: receiver regular, decoy is a receiver", x, Some(y), FetchPair, [L, A, A], [None, None, Some((L, y))]),
        case("deniable: nothing cached", x, Some(y), FetchPair, [A, A, A], none),
    ]
}

fn case(
    name: &'static str,
    receiver: usize,
    decoy: Option<usize>,
    want: CacheDecision,
    regular: [Slot; 3],
    pairs: [Option<PairSlot>; 3],
) -> Case {
    Case {
        name,
        receiver,
        decoy,
        want,
        regular,
        pairs,
    }
}

pub fn cache_rules() -> Check {
    let cases = enumerated_cases();
    ensure!(cases.len() == 17, "{} enumerated cases", cases.len());
    for c in &cases {
        let state = CacheState {
            regular: c.regular,
            pairs: c.pairs,
        };
        ensure!(oracle(&state, c.receiver, c.decoy) == c.want, "oracle disagrees with case '{}'", c.name);
        check_state(&state, c.receiver, c.decoy).map_err(|e| format!("{}: {e}", c.name))?;
    }
    let (checked, seen) = cache_brute_force()?;
    ensure!(seen.len() == 6, "only decisions {:?} reached", seen.keys());
    Ok(format!("17 enumerated cases and {checked} brute-force (state, intent) pairs agree"))
}

// Recipe conformance.

fn recipe_cast(seed: u64) -> Scenario {
    cast(seed, &[("alice", 1), ("bob", 1), ("charlie", 1)])
}

/// Regular traffic to the host, which carries the queued recipe along.
fn nudge() -> Action {
    regular("charlie", "bob", "nudge")
}

fn owner_inbox(out: &Outcome, owner: &str, from: &str) -> usize {
    let from = UserId::from_name(from);
    out.client(owner)
        .inbox()
        .iter()
        .filter(|m| m.from == from && m.message_type == MessageType::Regular)
        .count()
}

/// Listing 6 delivered so it starts at clock second 50 000.
pub fn midnight_run(seed: u64) -> Outcome {
    let sc = with(
        recipe_cast(seed),
        vec![
            (50_000_000, recipe("alice", "charlie", "bob", listings::MIDNIGHT)),
            (50_000_100, nudge()),
        ],
    );
    run(&sc)
}

fn check_midnight() -> Check {
    let out = midnight_run(5);
    ensure!(out.recipes.len() == 1, "{} recipe instances", out.recipes.len());
    let r = &out.recipes[0];
    ensure!(r.started_at / 1000 == 50_000, "started at {}ms", r.started_at);
    ensure!(r.sends.len() == 1, "{} sends", r.sends.len());
    ensure!(r.sends[0] / 1000 == 86_400, "sent at {}ms, not in the midnight second", r.sends[0]);
    ensure!(r.state == RecipeState::Halted, "ended {:?}", r.state);
    ensure!(owner_inbox(&out, "alice", "bob") == 1, "owner received {}", owner_inbox(&out, "alice", "bob"));
    Ok(format!("midnight send at {}ms", r.sends[0]))
}

/// Listing 5 with a key press at `key_at` and the app activated at `active_at`.
pub fn app_active_run(seed: u64, key_at: SimTime, active_at: &[SimTime]) -> Outcome {
    let mut actions = vec![
        (0, recipe("alice", "charlie", "bob", listings::APP_ACTIVE)),
        (100, nudge()),
        (key_at, Action::KeyPress("bob".into())),
    ];
    actions.extend(active_at.iter().map(|t| (*t, Action::AppActive("bob".into()))));
    actions.sort_by_key(|(t, _)| *t);
    run(&with(recipe_cast(seed), actions))
}

fn check_app_active() -> Check {
    let mut counts = std::collections::BTreeSet::new();
    for seed in 0..40 {
        // Busy keyboard: two seconds idle, nothing sent, still waiting.
        let busy = app_active_run(seed, 10_000, &[12_000]);
        let r = &busy.recipes[0];
        ensure!(r.sends.is_empty(), "seed {seed}: sent {} with a busy keyboard", r.sends.len());
        ensure!(r.state == RecipeState::Waiting(1), "seed {seed}: busy run ended {:?}", r.state);

        // Busy then idle: only the second activation sends.
        let out = app_active_run(seed, 10_000, &[12_000, 20_000, 30_000]);
        let r = &out.recipes[0];
        let k = r.sends.len();
        ensure!((1..=4).contains(&k), "seed {seed}: {k} sends");
        ensure!(r.sends.iter().all(|t| *t == 20_000), "seed {seed}: sends at {:?}", r.sends);
        ensure!(r.state == RecipeState::Halted, "seed {seed}: ended {:?}", r.state);
        ensure!(owner_inbox(&out, "alice", "bob") == k, "seed {seed}: owner inbox mismatch");

        let again = app_active_run(seed, 10_000, &[12_000, 20_000, 30_000]);
        ensure!(again.recipes[0].sends == r.sends, "seed {seed}: not reproducible");
        ensure!(again.view() == out.view(), "seed {seed}: trace not reproducible");
        counts.insert(k);
    }
    ensure!(counts.len() == 4, "send counts over 40 seeds: {counts:?}");
    Ok(format!("send counts {counts:?}, none while typing"))
}

/// Listing 7 delivered twice, `gap` ms apart.
pub fn reply_each_run(seed: u64, gap: SimTime) -> Outcome {
    let sc = with(
        recipe_cast(seed),
        vec![
            (0, recipe("alice", "charlie", "bob", listings::REPLY_EACH)),
            (100, nudge()),
            (gap, recipe("alice", "charlie", "bob", listings::REPLY_EACH)),
            (gap + 100, nudge()),
        ],
    );
    run(&sc)
}

fn check_reply_each() -> Check {
    for seed in 0..10 {
        let out = reply_each_run(seed, 10_000);
        ensure!(out.recipes.len() == 2, "seed {seed}: {} instances", out.recipes.len());
        let (first, second) = (&out.recipes[0], &out.recipes[1]);
        ensure!(first.state == RecipeState::Reset, "seed {seed}: first ended {:?}", first.state);
        ensure!(first.sends.is_empty(), "seed {seed}: first sent {:?}", first.sends);
        ensure!(second.sends.len() == 2, "seed {seed}: {} replies", second.sends.len());
        let start = second.started_at;
        let d0 = second.sends[0] - start;
        ensure!((31_000..=35_000).contains(&d0), "seed {seed}: first reply {d0}ms after start");
        let gap = second.sends[1] - second.sends[0];
        ensure!((1_000..=5_000).contains(&gap), "seed {seed}: gap {gap}ms");
        ensure!(second.state == RecipeState::Halted, "seed {seed}: second ended {:?}", second.state);
        let store = out.client("bob").recipe_store(UserId::from_name("alice")).cloned().unwrap_or_default();
        ensure!(store.get(&0) == Some(&0), "seed {seed}: counter left at {:?}", store.get(&0));
        ensure!(owner_inbox(&out, "alice", "bob") == 2, "seed {seed}: owner inbox mismatch");
        let again = reply_each_run(seed, 10_000);
        ensure!(again.recipes[1].sends == second.sends, "seed {seed}: not reproducible");
    }
    Ok("two deliveries 10s apart give one reset and two spaced replies".into())
}

pub fn recipe_conformance() -> Check {
    let mut sizes = Vec::new();
    for (name, src) in [
        ("app_active", listings::APP_ACTIVE),
        ("midnight", listings::MIDNIGHT),
        ("reply_each", listings::REPLY_EACH),
    ] {
        let code = compile(src).map_err(|e| format!("{name}: {e}"))?;
        ensure!(code.len() <= MAX_RECIPE_SIZE && MAX_RECIPE_SIZE == CHUNK_TEXT, "{name}: {}B", code.len());
        sizes.push(format!("{name} {}B", code.len()));
    }
    let m = check_midnight()?;
    let a = check_app_active()?;
    let r = check_reply_each()?;
    Ok(format!("{}; {m}; {a}; {r}", sizes.join(", ")))
}

pub fn determinism() -> Check {
    let mut scenarios: Vec<Scenario> = (0..4).map(|s| random_scenario(100 + s, 250)).collect();
    scenarios.extend(cover_story_library().into_iter().map(|p| p.deniable));
    for (i, sc) in scenarios.iter().enumerate() {
        let (a, b) = (run(sc), run(sc));
        ensure!(a.view().to_tsv() == b.view().to_tsv(), "scenario {i}: trace files differ");
        ensure!(a.trace == b.trace, "scenario {i}: annotated traces differ");
        let sends = |o: &Outcome| o.recipes.iter().map(|r| r.sends.clone()).collect::<Vec<_>>();
        ensure!(sends(&a) == sends(&b), "scenario {i}: recipe runs differ");
    }
    Ok(format!("{} scenarios reproduce byte for byte", scenarios.len()))
}

/// Sends `queued` deniable messages to `r` and then enough regular traffic
/// to drain the queue at piggyback value `p`.
pub fn liveness_run(p: u32, queued: usize, blocked: bool) -> (Outcome, Vec<String>) {
    let mut sc = Scenario::new(17)
        .client("s", 1, TTL, &["d", "r"])
        .client("d", 1, TTL, &["s"])
        .client("r", p, TTL, &["s", "x", "d"])
        .client("x", 0, TTL, &["r"])
        .client("quiet", 2, TTL, &["s"]);
    if blocked {
        sc = sc.at(0, block("r", "d", "s"));
    }
    let mut texts = Vec::new();
    for i in 0..queued {
        let text = format!("deniable #{i}");
        sc = sc.at(1_000 + i as SimTime * 50, deniable("s", "d", "r", &text));
        texts.push(text);
    }
    let rounds = if p == 0 { 0 } else { queued.div_ceil(p as usize) };
    for i in 0..rounds {
        sc = sc.at(20_000 + i as SimTime * 1_000, regular("x", "r", "nudge"));
    }
    (run(&sc), texts)
}

pub fn silence_liveness() -> Check {
    // Silent users in randomized traffic.
    for seed in 0..5 {
        let out = run(&random_scenario(200 + seed, 300));
        for who in ["silent0", "silent1"] {
            let id = UserId::from_name(who);
            let n = out.trace.events.iter().filter(|e| e.src == id || e.dst == id).count();
            ensure!(n == 0, "seed {seed}: {who} touched {n} datagrams");
        }
    }
    let mut delivered_total = 0;
    for p in [1u32, 2, 3, 5] {
        for queued in 0..=7 {
            for blocked in [false, true] {
                let (out, texts) = liveness_run(p, queued, blocked);
                ensure!(out.failures.is_empty(), "p={p} q={queued}: {:?}", out.failures);
                // Only deniable traffic (as the decoy's cover) involves quiet: none.
                let quiet = UserId::from_name("quiet");
                ensure!(
                    !out.trace.events.iter().any(|e| e.dst == quiet || e.src == quiet),
                    "quiet user saw traffic"
                );
                let inbox = out.client("r").inbox();
                for t in &texts {
                    let hits = inbox
                        .iter()
                        .filter(|m| m.message_type == MessageType::Deniable && m.text == t.as_bytes())
                        .count();
                    let want = usize::from(!blocked);
                    ensure!(
                        hits == want,
                        "p={p} q={queued} blocked={blocked}: '{t}' delivered {hits} times"
                    );
                    delivered_total += hits;
                }
                let r = UserId::from_name("r");
                ensure!(
                    out.server.deniable_queue_len(r) == 0,
                    "p={p} q={queued}: {} left queued",
                    out.server.deniable_queue_len(r)
                );
            }
        }
    }
    // A deniable-only receiver hears nothing until regular traffic arrives.
    let (out, _) = liveness_run(0, 3, false);
    let r = UserId::from_name("r");
    ensure!(
        !out.trace.events.iter().any(|e| e.dst == r),
        "receiver with no regular traffic got datagrams"
    );
    ensure!(out.server.deniable_queue_len(r) == 3, "queue not retained");
    Ok(format!("silent users idle; {delivered_total} queued messages delivered exactly once"))
}

/// Number, name, runtime budget in ms and the check itself.
pub type Criterion = (u32, &'static str, u128, fn() -> Check);

pub fn all() -> Vec<Criterion> {
    vec![
        (1, "size trichotomy", 1_000, size_trichotomy as fn() -> Check),
        (2, "cover-story equivalence", 5_000, cover_story_equivalence),
        (3, "piggyback arithmetic", 1_000, piggyback_arithmetic),
        (4, "cache-rule oracle", 1_000, cache_rules),
        (5, "recipe conformance", 2_000, recipe_conformance),
        (6, "determinism", 1_000, determinism),
        (7, "silence and liveness", 2_000, silence_liveness),
    ]
}
