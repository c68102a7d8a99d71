//! Deterministic discrete-event simulator.
//!
//! Every client talks to the single server over its own link with a fixed
//! one-way latency. Events run in (time, scheduling order); a datagram is
//! recorded in the trace when it leaves its sender.

pub mod report;
pub mod rng;
pub mod scenario;
pub mod trace;

use std::collections::{BTreeMap, HashMap};

use rand::Rng;
use rand_chacha::ChaCha20Rng;

use crate::client::{Client, Outgoing, Received};
use crate::error::ClientError;
use crate::recipes::{HostEnv, KillReason, Status, Suspend, Vm};
use crate::server::Server;
use crate::wire::{LinkKey, PublicKey, UserId, WireDatagram};
use crate::SimTime;

pub use report::{overhead_report, OverheadReport};
pub use scenario::{Action, ClientSpec, Scenario, ScenarioError, TimedAction};
pub use trace::{
    adversary_view, check_indistinguishable, AdversaryView, Annotation, Field, ForwardSlot, Trace,
    TraceEvent, Verdict, ViewEvent,
};

pub const LINK_LATENCY_MS: SimTime = 10;

/// How a recipe instance ended up when the run finished.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum RecipeState {
    Sleeping,
    Waiting(i32),
    Halted,
    Killed(KillReason),
    /// Terminated by a later recipe from the same owner calling `reset()`.
    Reset,
    /// Bytecode failed validation; never started.
    Rejected(String),
}

impl RecipeState {
    pub fn is_suspended(&self) -> bool {
        matches!(self, RecipeState::Sleeping | RecipeState::Waiting(_))
    }
}

#[derive(Clone, Debug)]
pub struct RecipeRun {
    pub host: String,
    pub owner: String,
    pub started_at: SimTime,
    /// One entry per message the recipe made its host send.
    pub sends: Vec<SimTime>,
    pub state: RecipeState,
}

/// A scenario action or deferred client step that did not go through.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ActionFailure {
    pub time: SimTime,
    /// Scenario line of the action, 0 if it was not a scripted action.
    pub line: usize,
    pub user: String,
    pub error: ClientError,
}

#[derive(Debug)]
pub struct Outcome {
    pub trace: Trace,
    pub clients: BTreeMap<String, Client>,
    pub server: Server,
    pub recipes: Vec<RecipeRun>,
    pub failures: Vec<ActionFailure>,
}

impl Outcome {
    pub fn client(&self, name: &str) -> &Client {
        &self.clients[name]
    }

    pub fn view(&self) -> AdversaryView {
        adversary_view(&self.trace)
    }
}

/// Runs `scenario` to quiescence. Validation happens before any event.
pub fn run(scenario: &Scenario) -> Result<Outcome, ScenarioError> {
    scenario.validate()?;
    let mut engine = Engine::new(scenario);
    for (i, a) in scenario.actions.iter().enumerate() {
        engine.schedule(a.at, Event::Action(i));
    }
    while let Some(((now, _), event)) = engine.queue.pop_first() {
        engine.now = now;
        engine.handle(scenario, event);
    }
    Ok(engine.finish())
}

#[derive(Debug)]
enum Event {
    Action(usize),
    Depart {
        src: UserId,
        dst: UserId,
        datagram: WireDatagram,
        note: Annotation,
    },
    Arrive {
        src: UserId,
        dst: UserId,
        datagram: WireDatagram,
    },
    Wake(usize),
}

struct Instance {
    host: UserId,
    owner: UserId,
    vm: Vm,
    run: RecipeRun,
}

struct DropRule {
    src: UserId,
    dst: UserId,
    remaining: u32,
}

struct Engine {
    seed: u64,
    now: SimTime,
    seq: u64,
    queue: BTreeMap<(SimTime, u64), Event>,
    ids: BTreeMap<String, UserId>,
    names: BTreeMap<UserId, String>,
    clients: BTreeMap<UserId, Client>,
    server: Server,
    cipher: ChaCha20Rng,
    adversary: ChaCha20Rng,
    recipe_rngs: HashMap<UserId, ChaCha20Rng>,
    drops: Vec<DropRule>,
    trace: Vec<TraceEvent>,
    instances: Vec<Instance>,
    failures: Vec<ActionFailure>,
}

impl Engine {
    fn new(sc: &Scenario) -> Self {
        let mut keys = rng::stream(sc.seed, "keys");
        let mut server = Server::new(PublicKey::generate(&mut keys), sc.server.clone());
        let ids: BTreeMap<String, UserId> = sc
            .clients
            .iter()
            .map(|c| (c.name.clone(), UserId::from_name(&c.name)))
            .collect();
        let mut clients = BTreeMap::new();
        for spec in &sc.clients {
            let id = ids[&spec.name];
            let key = PublicKey::generate(&mut keys);
            let link = LinkKey::generate(&mut keys);
            server
                .register(id, key.clone(), link.clone(), spec.p)
                .expect("validated scenario has unique clients");
            let friends = spec.friends.iter().map(|f| ids[f]);
            let client = Client::new(id, key, link, server.public_key().clone(), friends, spec.ttl);
            clients.insert(id, client);
        }
        let mut names: BTreeMap<UserId, String> = ids.iter().map(|(n, id)| (*id, n.clone())).collect();
        names.insert(UserId::SERVER, trace::SERVER_LABEL.to_string());
        Engine {
            seed: sc.seed,
            now: 0,
            seq: 0,
            queue: BTreeMap::new(),
            ids,
            names,
            clients,
            server,
            cipher: rng::stream(sc.seed, "cipher"),
            adversary: rng::stream(sc.seed, "adversary"),
            recipe_rngs: HashMap::new(),
            drops: Vec::new(),
            trace: Vec::new(),
            instances: Vec::new(),
            failures: Vec::new(),
        }
    }

    fn schedule(&mut self, at: SimTime, event: Event) {
        self.queue.insert((at, self.seq), event);
        self.seq += 1;
    }

    fn id(&self, name: &str) -> UserId {
        self.ids.get(name).copied().unwrap_or(UserId::SERVER)
    }

    fn depart_all(&mut self, src: UserId, outs: Vec<Outgoing>) {
        for o in outs {
            self.schedule(
                self.now,
                Event::Depart {
                    src,
                    dst: UserId::SERVER,
                    datagram: o.datagram,
                    note: o.note,
                },
            );
        }
    }

    fn fail(&mut self, line: usize, user: UserId, error: ClientError) {
        self.failures.push(ActionFailure {
            time: self.now,
            line,
            user: self.names[&user].clone(),
            error,
        });
    }

    fn handle(&mut self, sc: &Scenario, event: Event) {
        match event {
            Event::Action(i) => self.action(&sc.actions[i]),
            Event::Depart {
                src,
                dst,
                datagram,
                note,
            } => self.depart(src, dst, datagram, note),
            Event::Arrive { src, dst, datagram } => self.arrive(src, dst, datagram),
            Event::Wake(i) => {
                if self.instances[i].run.state == RecipeState::Sleeping {
                    self.resume(i);
                }
            }
        }
    }

    fn action(&mut self, a: &TimedAction) {
        let now = self.now;
        let sent = match &a.action {
            Action::SendRegular { from, to, text } => {
                let (from, to) = (self.id(from), self.id(to));
                let c = self.clients.get_mut(&from).expect("declared");
                Some((from, c.send_regular(to, text, now, &mut self.cipher)))
            }
            Action::SendDeniable { from, decoy, to, text } => {
                let (from, decoy, to) = (self.id(from), self.id(decoy), self.id(to));
                let c = self.clients.get_mut(&from).expect("declared");
                Some((from, c.send_deniable(decoy, to, text, now, &mut self.cipher)))
            }
            Action::Block { who, decoy, target } => {
                let (who, decoy, target) = (self.id(who), self.id(decoy), self.id(target));
                let c = self.clients.get_mut(&who).expect("declared");
                Some((who, c.send_block(decoy, target, now, &mut self.cipher)))
            }
            Action::SendRecipe {
                from,
                decoy,
                host,
                bytecode,
            } => {
                let (from, decoy, host) = (self.id(from), self.id(decoy), self.id(host));
                let c = self.clients.get_mut(&from).expect("declared");
                Some((from, c.send_recipe(decoy, host, bytecode, now, &mut self.cipher)))
            }
            Action::Offline(u) => {
                let u = self.id(u);
                self.server.go_offline(u).expect("registered");
                None
            }
            Action::Online(u) => {
                let u = self.id(u);
                for out in self.server.go_online(u).expect("registered") {
                    self.schedule(
                        now + out.delay,
                        Event::Depart {
                            src: UserId::SERVER,
                            dst: out.to,
                            datagram: out.datagram,
                            note: out.note,
                        },
                    );
                }
                None
            }
            Action::AppActive(u) => {
                let host = self.id(u);
                self.fire(host, crate::recipes::RecipeEvent::AppActive.id());
                None
            }
            Action::KeyPress(u) => {
                let u = self.id(u);
                self.clients.get_mut(&u).expect("declared").record_key_press(now);
                None
            }
            Action::Inject { src, dst, size } => {
                let datagram = WireDatagram::garbage(*size, &mut self.adversary);
                let (src, dst) = (self.id(src), self.id(dst));
                self.schedule(
                    now,
                    Event::Depart {
                        src,
                        dst,
                        datagram,
                        note: Annotation::Injected,
                    },
                );
                None
            }
            Action::Drop { src, dst, count } => {
                let (src, dst) = (self.id(src), self.id(dst));
                self.drops.push(DropRule {
                    src,
                    dst,
                    remaining: *count,
                });
                None
            }
        };
        match sent {
            Some((from, Ok(outs))) => self.depart_all(from, outs),
            Some((from, Err(e))) => self.fail(a.line, from, e),
            None => {}
        }
    }

    fn depart(&mut self, src: UserId, dst: UserId, datagram: WireDatagram, note: Annotation) {
        if let Some(rule) = self
            .drops
            .iter_mut()
            .find(|r| r.src == src && r.dst == dst && r.remaining > 0)
        {
            rule.remaining -= 1;
            return;
        }
        self.trace.push(TraceEvent {
            time: self.now,
            src,
            dst,
            size: datagram.wire_size(),
            note,
        });
        self.schedule(self.now + LINK_LATENCY_MS, Event::Arrive { src, dst, datagram });
    }

    fn arrive(&mut self, src: UserId, dst: UserId, datagram: WireDatagram) {
        let now = self.now;
        if dst == UserId::SERVER {
            for out in self.server.on_datagram(src, &datagram, &mut self.cipher) {
                self.schedule(
                    now + out.delay,
                    Event::Depart {
                        src: UserId::SERVER,
                        dst: out.to,
                        datagram: out.datagram,
                        note: out.note,
                    },
                );
            }
            return;
        }
        let client = self.clients.get_mut(&dst).expect("datagrams only go to clients");
        match client.on_datagram(&datagram, now, &mut self.cipher) {
            Received::Sent(outs) => self.depart_all(dst, outs),
            Received::LookupFailed(e) => self.fail(0, dst, e),
            Received::Recipe { owner, bytecode } => self.spawn(dst, owner, &bytecode),
            Received::Delivered | Received::Dropped(_) => {}
        }
    }

    fn spawn(&mut self, host: UserId, owner: UserId, bytecode: &[u8]) {
        let mut run = RecipeRun {
            host: self.names[&host].clone(),
            owner: self.names[&owner].clone(),
            started_at: self.now,
            sends: Vec::new(),
            state: RecipeState::Sleeping,
        };
        match Vm::new(bytecode) {
            Ok(vm) => {
                self.instances.push(Instance { host, owner, vm, run });
                self.resume(self.instances.len() - 1);
            }
            Err(e) => {
                run.state = RecipeState::Rejected(e.to_string());
                self.instances.push(Instance {
                    host,
                    owner,
                    vm: Vm::new(&[]).expect("empty program is valid"),
                    run,
                });
            }
        }
    }

    /// Resumes every instance on `host` waiting for `event`, oldest first.
    fn fire(&mut self, host: UserId, event: i32) {
        for i in 0..self.instances.len() {
            let inst = &self.instances[i];
            if inst.host == host && inst.run.state == RecipeState::Waiting(event) {
                self.resume(i);
            }
        }
    }

    fn resume(&mut self, i: usize) {
        let now = self.now;
        let seed = self.seed;
        let inst = &mut self.instances[i];
        let host_name = &inst.run.host;
        let rng = self
            .recipe_rngs
            .entry(inst.host)
            .or_insert_with(|| rng::stream(seed, &format!("recipes/{host_name}")));
        let mut env = RecipeEnv {
            now,
            owner: inst.owner,
            client: self.clients.get_mut(&inst.host).expect("host is a client"),
            cipher: &mut self.cipher,
            rng,
            out: Vec::new(),
            sends: &mut inst.run.sends,
            reset: false,
        };
        let status = inst.vm.resume(&mut env);
        let (out, reset) = (env.out, env.reset);
        let (host, owner) = (inst.host, inst.owner);
        let sleep_ms = match status {
            Status::Suspended(Suspend::Sleep { ms }) => Some(ms),
            _ => None,
        };
        inst.run.state = match status {
            Status::Suspended(Suspend::Sleep { .. }) => RecipeState::Sleeping,
            Status::Suspended(Suspend::Wait(ev)) => RecipeState::Waiting(ev),
            Status::Halted => RecipeState::Halted,
            Status::Killed(reason) => RecipeState::Killed(reason),
        };
        if let Some(ms) = sleep_ms {
            self.schedule(now + ms, Event::Wake(i));
        }
        if reset {
            for (j, other) in self.instances.iter_mut().enumerate() {
                if j != i && other.host == host && other.owner == owner && other.run.state.is_suspended() {
                    other.run.state = RecipeState::Reset;
                }
            }
        }
        self.depart_all(host, out);
    }

    fn finish(self) -> Outcome {
        let names = self.names;
        Outcome {
            trace: Trace {
                names: names.clone(),
                events: self.trace,
            },
            clients: self.clients.into_iter().map(|(id, c)| (names[&id].clone(), c)).collect(),
            server: self.server,
            recipes: self.instances.into_iter().map(|i| i.run).collect(),
            failures: self.failures,
        }
    }
}

struct RecipeEnv<'a> {
    now: SimTime,
    owner: UserId,
    client: &'a mut Client,
    cipher: &'a mut ChaCha20Rng,
    rng: &'a mut ChaCha20Rng,
    out: Vec<Outgoing>,
    sends: &'a mut Vec<SimTime>,
    reset: bool,
}

impl HostEnv for RecipeEnv<'_> {
    fn now_ms(&self) -> u64 {
        self.now
    }

    fn last_key_press_ms(&self) -> Option<u64> {
        self.client.last_key_press()
    }

    fn rnd(&mut self, lo: i32, hi: i32) -> i32 {
        self.rng.random_range(lo..=hi)
    }

    fn send(&mut self, n: u32) {
        for _ in 0..n {
            let outs = self
                .client
                .send_regular(self.owner, b"", self.now, &mut *self.cipher)
                .expect("regular sends to a friend cannot fail");
            self.out.extend(outs);
            self.sends.push(self.now);
        }
    }

    fn store(&mut self, register: i32, value: i32) {
        self.client.recipe_store_mut(self.owner).insert(register, value);
    }

    fn load(&self, register: i32) -> i32 {
        self.client
            .recipe_store(self.owner)
            .and_then(|s| s.get(&register).copied())
            .unwrap_or(0)
    }

    fn reset(&mut self) {
        self.reset = true;
    }
}
