//! Trusted store-and-forward server.
//!
//! Every forwarded regular or decoy message to a receiver R is preceded by
//! exactly `p(R)` piggyback slots, filled from R's deniable queue first and
//! with dummies otherwise. Both fills take the same simulated time, so the
//! output schedule depends only on `p(R)`.

use std::collections::{BTreeSet, HashMap, VecDeque};

use rand::RngCore;

use crate::error::ServerError;
use crate::sim::trace::{Annotation, ForwardSlot};
use crate::wire::{
    decode_key_request, decode_message, encode_key_response, encode_message, DatagramKind,
    KeyResponse, KeySlot, LinkKey, MessageHeaders, MessageType, PaddedMsg, PayloadChunk,
    PublicKey, SealedChunk, UserId, WireDatagram, USER_ID_LEN,
};
use crate::SimTime;

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ServerConfig {
    pub lookup_delay_ms: SimTime,
    pub forward_delay_ms: SimTime,
    /// Spacing between consecutive datagrams of one forward.
    pub piggyback_spacing_ms: SimTime,
    /// Per-receiver deniable queue limit; `None` is unbounded. Overflow is
    /// dropped silently.
    pub deniable_queue_cap: Option<usize>,
}

impl Default for ServerConfig {
    fn default() -> Self {
        ServerConfig {
            lookup_delay_ms: 5,
            forward_delay_ms: 2,
            piggyback_spacing_ms: 1,
            deniable_queue_cap: None,
        }
    }
}

#[derive(Clone, Debug)]
pub struct ClientEntry {
    pub pubkey: PublicKey,
    pub link: LinkKey,
    pub p_value: u32,
    pub online: bool,
    /// Senders whose deniable messages to this user are dropped.
    pub blocklist: BTreeSet<UserId>,
}

/// A datagram the server emits `delay` ms after the input that caused it.
#[derive(Clone, Debug)]
pub struct ServerOutput {
    pub to: UserId,
    pub delay: SimTime,
    pub datagram: WireDatagram,
    pub note: Annotation,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct ServerStats {
    pub forwards: u64,
    pub dropped_malformed: u64,
    pub dropped_blocked: u64,
    pub dropped_queue_full: u64,
    pub deniable_delivered: u64,
}

#[derive(Debug)]
pub struct Server {
    key: PublicKey,
    config: ServerConfig,
    clients: HashMap<UserId, ClientEntry>,
    deniable_queue: HashMap<UserId, VecDeque<PaddedMsg>>,
    offline_queue: HashMap<UserId, VecDeque<(WireDatagram, Annotation)>>,
    next_forward_id: u64,
    stats: ServerStats,
}

impl Server {
    pub fn new(key: PublicKey, config: ServerConfig) -> Self {
        Server {
            key,
            config,
            clients: HashMap::new(),
            deniable_queue: HashMap::new(),
            offline_queue: HashMap::new(),
            next_forward_id: 0,
            stats: ServerStats::default(),
        }
    }

    pub fn public_key(&self) -> &PublicKey {
        &self.key
    }

    pub fn config(&self) -> &ServerConfig {
        &self.config
    }

    pub fn stats(&self) -> ServerStats {
        self.stats
    }

    pub fn client(&self, user: UserId) -> Option<&ClientEntry> {
        self.clients.get(&user)
    }

    pub fn deniable_queue_len(&self, user: UserId) -> usize {
        self.deniable_queue.get(&user).map_or(0, VecDeque::len)
    }

    pub fn offline_queue_len(&self, user: UserId) -> usize {
        self.offline_queue.get(&user).map_or(0, VecDeque::len)
    }

    pub fn register(&mut self, user: UserId, pubkey: PublicKey, link: LinkKey, p_value: u32) -> Result<(), ServerError> {
        if self.clients.contains_key(&user) {
            return Err(ServerError::AlreadyRegistered(user));
        }
        if pubkey.is_zero() {
            return Err(ServerError::ReservedKey);
        }
        self.clients.insert(
            user,
            ClientEntry {
                pubkey,
                link,
                p_value,
                online: true,
                blocklist: BTreeSet::new(),
            },
        );
        Ok(())
    }

    /// Handles one datagram arriving on `from`'s link. Anything that fails to
    /// decode is dropped without a reply.
    pub fn on_datagram<R: RngCore + ?Sized>(&mut self, from: UserId, datagram: &WireDatagram, rng: &mut R) -> Vec<ServerOutput> {
        let Some(link) = self.clients.get(&from).map(|c| c.link.clone()) else {
            self.stats.dropped_malformed += 1;
            return Vec::new();
        };
        match datagram.kind() {
            Some(DatagramKind::KeyRequest) => self.key_lookup(from, &link, datagram, rng),
            Some(DatagramKind::Message) => match decode_message(datagram, &link) {
                Ok(msg) if msg.headers.sender == from => self.receive_message(msg, rng),
                _ => {
                    self.stats.dropped_malformed += 1;
                    Vec::new()
                }
            },
            _ => {
                self.stats.dropped_malformed += 1;
                Vec::new()
            }
        }
    }

    fn key_slot(&self, who: UserId) -> KeySlot {
        if who == UserId::SERVER {
            return KeySlot::Key(self.key.clone());
        }
        match self.clients.get(&who) {
            Some(c) => KeySlot::Key(c.pubkey.clone()),
            None => KeySlot::UnknownUser,
        }
    }

    /// Answers a key request after the fixed lookup delay; one- and two-key
    /// requests are served identically.
    pub fn key_lookup<R: RngCore + ?Sized>(&mut self, from: UserId, link: &LinkKey, datagram: &WireDatagram, rng: &mut R) -> Vec<ServerOutput> {
        let Ok(req) = decode_key_request(datagram, link) else {
            self.stats.dropped_malformed += 1;
            return Vec::new();
        };
        let resp = match req.who2 {
            None => KeyResponse::single(self.key_slot(req.who1)),
            Some(who2) => KeyResponse::pair(self.key_slot(req.who1), self.key_slot(who2)),
        };
        vec![ServerOutput {
            to: from,
            delay: self.config.lookup_delay_ms,
            datagram: encode_key_response(&resp, link, rng),
            note: Annotation::KeyResponse,
        }]
    }

    /// Regular messages are forwarded. Deniable messages and block requests
    /// first produce a forwarded dummy for the decoy; only after that is the
    /// deniable message queued (or the block applied).
    pub fn receive_message<R: RngCore + ?Sized>(&mut self, msg: PaddedMsg, rng: &mut R) -> Vec<ServerOutput> {
        let h = msg.headers;
        match h.message_type {
            MessageType::Regular => self.forward(msg, rng),
            MessageType::Deniable => {
                let out = self.forward_decoy(h.decoy_receiver, rng);
                let blocked = self
                    .clients
                    .get(&h.true_receiver)
                    .is_none_or(|r| r.blocklist.contains(&h.sender));
                if blocked {
                    self.stats.dropped_blocked += 1;
                } else {
                    let cap = self.config.deniable_queue_cap;
                    let queue = self.deniable_queue.entry(h.true_receiver).or_default();
                    if cap.is_some_and(|cap| queue.len() >= cap) {
                        self.stats.dropped_queue_full += 1;
                    } else {
                        queue.push_back(msg);
                    }
                }
                out
            }
            MessageType::BlockRequest => {
                let out = self.forward_decoy(h.decoy_receiver, rng);
                match PayloadChunk::open(&self.key, &msg.chunks[0]) {
                    Ok(chunk) if chunk.len() == USER_ID_LEN => {
                        let mut id = [0u8; USER_ID_LEN];
                        id.copy_from_slice(chunk.data());
                        if let Some(entry) = self.clients.get_mut(&h.sender) {
                            entry.blocklist.insert(UserId::from_bytes(id));
                        }
                    }
                    _ => self.stats.dropped_malformed += 1,
                }
                out
            }
            MessageType::Dummy => {
                self.stats.dropped_malformed += 1;
                Vec::new()
            }
        }
    }

    fn dummy_for<R: RngCore + ?Sized>(receiver: UserId, rng: &mut R) -> PaddedMsg {
        PaddedMsg {
            headers: MessageHeaders {
                sender: UserId::SERVER,
                true_receiver: receiver,
                decoy_receiver: UserId::ABSENT,
                message_type: MessageType::Dummy,
            },
            chunks: [SealedChunk::random(rng), SealedChunk::random(rng)],
        }
    }

    fn forward_decoy<R: RngCore + ?Sized>(&mut self, decoy: UserId, rng: &mut R) -> Vec<ServerOutput> {
        if decoy.is_reserved() {
            self.stats.dropped_malformed += 1;
            return Vec::new();
        }
        let dummy = Self::dummy_for(decoy, rng);
        self.forward(dummy, rng)
    }

    /// Emits `p` piggyback slots and then `msg`, spaced evenly. If the
    /// receiver is offline the whole batch waits in its offline queue.
    pub fn forward<R: RngCore + ?Sized>(&mut self, msg: PaddedMsg, rng: &mut R) -> Vec<ServerOutput> {
        let receiver = msg.headers.true_receiver;
        let Some(entry) = self.clients.get(&receiver) else {
            self.stats.dropped_malformed += 1;
            return Vec::new();
        };
        let (p, link, online) = (entry.p_value, entry.link.clone(), entry.online);
        let forward_id = self.next_forward_id;
        self.next_forward_id += 1;
        self.stats.forwards += 1;

        let mut batch = Vec::with_capacity(p as usize + 1);
        for index in 0..p {
            let queued = self.deniable_queue.get_mut(&receiver).and_then(VecDeque::pop_front);
            let deniable = queued.is_some();
            if deniable {
                self.stats.deniable_delivered += 1;
            }
            let slot_msg = queued.unwrap_or_else(|| Self::dummy_for(receiver, rng));
            batch.push((
                encode_message(&slot_msg, &link, rng),
                Annotation::Forward {
                    forward_id,
                    p,
                    slot: ForwardSlot::Piggyback { index, deniable },
                },
            ));
        }
        batch.push((
            encode_message(&msg, &link, rng),
            Annotation::Forward {
                forward_id,
                p,
                slot: ForwardSlot::Main(msg.headers.message_type),
            },
        ));

        if !online {
            self.offline_queue.entry(receiver).or_default().extend(batch);
            return Vec::new();
        }
        let base = self.config.forward_delay_ms;
        let spacing = self.config.piggyback_spacing_ms;
        batch
            .into_iter()
            .enumerate()
            .map(|(i, (datagram, note))| ServerOutput {
                to: receiver,
                delay: base + i as SimTime * spacing,
                datagram,
                note,
            })
            .collect()
    }

    pub fn go_offline(&mut self, user: UserId) -> Result<(), ServerError> {
        let entry = self.clients.get_mut(&user).ok_or(ServerError::NotRegistered(user))?;
        entry.online = false;
        Ok(())
    }

    /// Marks `user` online and releases its offline queue in order.
    pub fn go_online(&mut self, user: UserId) -> Result<Vec<ServerOutput>, ServerError> {
        let entry = self.clients.get_mut(&user).ok_or(ServerError::NotRegistered(user))?;
        entry.online = true;
        let spacing = self.config.piggyback_spacing_ms;
        let drained = self.offline_queue.remove(&user).unwrap_or_default();
        Ok(drained
            .into_iter()
            .enumerate()
            .map(|(i, (datagram, note))| ServerOutput {
                to: user,
                delay: i as SimTime * spacing,
                datagram,
                note,
            })
            .collect())
    }
}
