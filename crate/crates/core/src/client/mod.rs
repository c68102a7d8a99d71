//! Sender and receiver endpoint.
//!
//! The client is sans-IO: every operation returns the datagrams it wants to
//! put on its link to the server, and incoming datagrams are handed in by
//! whoever drives it (normally the simulator).

mod cache;

use std::collections::{BTreeSet, HashMap, VecDeque};

use rand::RngCore;

pub use cache::{CacheDecision, DeniableEntry, Intent, KeyCacheEntry, KeyCaches};

use crate::error::{ClientError, WireError};
use crate::sim::trace::Annotation;
use crate::wire::{
    decode_key_response, decode_message, encode_key_request, encode_message, message_chunks,
    ChunkKind, DatagramKind, KeyRequest, KeySlot, LinkKey, MessageHeaders, MessageType,
    PaddedMsg, PayloadChunk, PublicKey, UserId, WireDatagram, CHUNKS_PER_MESSAGE,
};
use crate::SimTime;

pub const DEFAULT_TTL_MS: SimTime = 60_000;

/// A datagram the client puts on its link to the server.
#[derive(Clone, Debug)]
pub struct Outgoing {
    pub datagram: WireDatagram,
    pub note: Annotation,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct InboxEntry {
    pub from: UserId,
    pub message_type: MessageType,
    pub text: Vec<u8>,
    pub received_at: SimTime,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum DropReason {
    Dummy,
    RecipeFromStranger,
    DecodeFailure,
    UnexpectedKeyResponse,
}

/// Result of handing the client one incoming datagram.
#[derive(Clone, Debug)]
pub enum Received {
    Delivered,
    Dropped(DropReason),
    /// A recipe from a friend, ready to run on this host.
    Recipe { owner: UserId, bytecode: Vec<u8> },
    /// A key lookup completed; these are the messages it unblocked.
    Sent(Vec<Outgoing>),
    LookupFailed(ClientError),
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct ClientStats {
    pub decode_failures: u64,
    pub dummies_dropped: u64,
    pub recipes_rejected: u64,
}

#[derive(Clone, Debug)]
enum Deferred {
    Regular {
        receiver: UserId,
        messages: Vec<[PayloadChunk; CHUNKS_PER_MESSAGE]>,
    },
    Deniable {
        receiver: UserId,
        decoy: UserId,
        messages: Vec<[PayloadChunk; CHUNKS_PER_MESSAGE]>,
    },
    Block {
        decoy: UserId,
        blocked: UserId,
    },
}


#[derive(Debug)]
pub struct Client {
    id: UserId,
    key: PublicKey,
    link: LinkKey,
    server_key: PublicKey,
    ttl: SimTime,
    friends: BTreeSet<UserId>,
    pub caches: KeyCaches,
    inbox: Vec<InboxEntry>,
    /// Work waiting on key responses, answered in request order.
    pending: VecDeque<Deferred>,
    stats: ClientStats,
    /// Persistent recipe registers, one bank per recipe owner.
    recipe_store: HashMap<UserId, HashMap<i32, i32>>,
    last_key_press: Option<SimTime>,
}

impl Client {
    pub fn new(
        id: UserId,
        key: PublicKey,
        link: LinkKey,
        server_key: PublicKey,
        friends: impl IntoIterator<Item = UserId>,
        ttl: SimTime,
    ) -> Self {
        Client {
            id,
            key,
            link,
            server_key,
            ttl,
            friends: friends.into_iter().collect(),
            caches: KeyCaches::default(),
            inbox: Vec::new(),
            pending: VecDeque::new(),
            stats: ClientStats::default(),
            recipe_store: HashMap::new(),
            last_key_press: None,
        }
    }

    pub fn id(&self) -> UserId {
        self.id
    }

    pub fn public_key(&self) -> &PublicKey {
        &self.key
    }

    pub fn link_key(&self) -> &LinkKey {
        &self.link
    }

    pub fn ttl(&self) -> SimTime {
        self.ttl
    }

    pub fn friends(&self) -> &BTreeSet<UserId> {
        &self.friends
    }

    pub fn inbox(&self) -> &[InboxEntry] {
        &self.inbox
    }

    pub fn stats(&self) -> ClientStats {
        self.stats
    }

    pub fn pending_lookups(&self) -> usize {
        self.pending.len()
    }

    pub fn recipe_store(&self, owner: UserId) -> Option<&HashMap<i32, i32>> {
        self.recipe_store.get(&owner)
    }

    pub fn recipe_store_mut(&mut self, owner: UserId) -> &mut HashMap<i32, i32> {
        self.recipe_store.entry(owner).or_default()
    }

    pub fn record_key_press(&mut self, now: SimTime) {
        self.last_key_press = Some(now);
    }

    pub fn last_key_press(&self) -> Option<SimTime> {
        self.last_key_press
    }

    /// Decides how to obtain keys for `intent` and, on reuse, bumps the TTL
    /// of the entry relied on.
    pub fn resolve_keys(&mut self, intent: Intent, now: SimTime) -> Result<CacheDecision, ClientError> {
        if let Intent::Deniable { receiver, decoy } = intent {
            if receiver == decoy {
                return Err(ClientError::DecoyIsReceiver);
            }
        }
        let decision = self.caches.decide(intent, now);
        self.caches.bump(intent, decision, now, self.ttl);
        Ok(decision)
    }

    /// Emits one padded key request; the answer is matched in FIFO order.
    fn fetch_key<R: RngCore + ?Sized>(&mut self, who1: UserId, who2: Option<UserId>, then: Deferred, rng: &mut R) -> Outgoing {
        let request = KeyRequest { who1, who2 };
        self.pending.push_back(then);
        Outgoing {
            datagram: encode_key_request(&request, &self.link, rng),
            note: Annotation::KeyRequest {
                keys: 1 + who2.is_some() as u8,
            },
        }
    }

    pub fn send_regular<R: RngCore + ?Sized>(
        &mut self,
        receiver: UserId,
        text: &[u8],
        now: SimTime,
        rng: &mut R,
    ) -> Result<Vec<Outgoing>, ClientError> {
        let intent = Intent::Regular { receiver };
        let decision = self.resolve_keys(intent, now)?;
        let messages = message_chunks(text);
        match self.caches.reuse_key(intent, decision, now) {
            Some(key) => self.seal_all(receiver, UserId::ABSENT, MessageType::Regular, &messages, &key, rng),
            None => Ok(vec![self.fetch_key(receiver, None, Deferred::Regular { receiver, messages }, rng)]),
        }
    }

    pub fn send_deniable<R: RngCore + ?Sized>(
        &mut self,
        decoy: UserId,
        receiver: UserId,
        text: &[u8],
        now: SimTime,
        rng: &mut R,
    ) -> Result<Vec<Outgoing>, ClientError> {
        let messages = message_chunks(text);
        self.send_deniable_chunks(decoy, receiver, messages, now, rng)
    }

    /// Ships compiled recipe bytecode to `host` as an ordinary deniable message.
    pub fn send_recipe<R: RngCore + ?Sized>(
        &mut self,
        decoy: UserId,
        host: UserId,
        bytecode: &[u8],
        now: SimTime,
        rng: &mut R,
    ) -> Result<Vec<Outgoing>, ClientError> {
        let chunk = PayloadChunk::recipe(bytecode)?;
        self.send_deniable_chunks(decoy, host, vec![[chunk, PayloadChunk::empty()]], now, rng)
    }

    fn check_trusted(&self, decoy: UserId) -> Result<(), ClientError> {
        if self.friends.is_empty() {
            return Err(ClientError::NoFriends);
        }
        if !self.friends.contains(&decoy) {
            return Err(ClientError::NotAFriend(decoy));
        }
        Ok(())
    }

    fn send_deniable_chunks<R: RngCore + ?Sized>(
        &mut self,
        decoy: UserId,
        receiver: UserId,
        messages: Vec<[PayloadChunk; CHUNKS_PER_MESSAGE]>,
        now: SimTime,
        rng: &mut R,
    ) -> Result<Vec<Outgoing>, ClientError> {
        if decoy == receiver {
            return Err(ClientError::DecoyIsReceiver);
        }
        self.check_trusted(decoy)?;
        let intent = Intent::Deniable { receiver, decoy };
        match self.resolve_keys(intent, now)? {
            CacheDecision::Abort => Err(ClientError::AbortedDecoyBusy),
            CacheDecision::ReusePair => {
                let key = self
                    .caches
                    .reuse_key(intent, CacheDecision::ReusePair, now)
                    .expect("pair alive");
                self.seal_all(receiver, decoy, MessageType::Deniable, &messages, &key, rng)
            }
            _ => Ok(vec![self.fetch_key(
                receiver,
                Some(decoy),
                Deferred::Deniable {
                    receiver,
                    decoy,
                    messages,
                },
                rng,
            )]),
        }
    }

    /// Asks the server, deniably via `decoy`, to drop future deniable messages
    /// from `blocked`.
    pub fn send_block<R: RngCore + ?Sized>(
        &mut self,
        decoy: UserId,
        blocked: UserId,
        now: SimTime,
        rng: &mut R,
    ) -> Result<Vec<Outgoing>, ClientError> {
        self.check_trusted(decoy)?;
        let intent = Intent::Deniable {
            receiver: UserId::SERVER,
            decoy,
        };
        match self.resolve_keys(intent, now)? {
            CacheDecision::Abort => Err(ClientError::AbortedDecoyBusy),
            CacheDecision::ReusePair => Ok(vec![self.block_message(decoy, blocked, rng)?]),
            _ => Ok(vec![self.fetch_key(decoy, None, Deferred::Block { decoy, blocked }, rng)]),
        }
    }

    fn block_message<R: RngCore + ?Sized>(&self, decoy: UserId, blocked: UserId, rng: &mut R) -> Result<Outgoing, ClientError> {
        let chunks = [PayloadChunk::text(blocked.as_bytes())?, PayloadChunk::empty()];
        let server_key = self.server_key.clone();
        self.seal_one(UserId::SERVER, decoy, MessageType::BlockRequest, &chunks, &server_key, rng)
    }

    fn seal_one<R: RngCore + ?Sized>(
        &self,
        receiver: UserId,
        decoy: UserId,
        message_type: MessageType,
        chunks: &[PayloadChunk; CHUNKS_PER_MESSAGE],
        key: &PublicKey,
        rng: &mut R,
    ) -> Result<Outgoing, ClientError> {
        let msg = PaddedMsg {
            headers: MessageHeaders {
                sender: self.id,
                true_receiver: receiver,
                decoy_receiver: decoy,
                message_type,
            },
            chunks: [chunks[0].seal(key, rng)?, chunks[1].seal(key, rng)?],
        };
        Ok(Outgoing {
            datagram: encode_message(&msg, &self.link, rng),
            note: Annotation::Message {
                msg_type: message_type,
                text_len: chunks.iter().map(PayloadChunk::len).sum(),
            },
        })
    }

    fn seal_all<R: RngCore + ?Sized>(
        &self,
        receiver: UserId,
        decoy: UserId,
        message_type: MessageType,
        messages: &[[PayloadChunk; CHUNKS_PER_MESSAGE]],
        key: &PublicKey,
        rng: &mut R,
    ) -> Result<Vec<Outgoing>, ClientError> {
        messages
            .iter()
            .map(|chunks| self.seal_one(receiver, decoy, message_type, chunks, key, rng))
            .collect()
    }

    /// Dispatches an incoming datagram by kind.
    pub fn on_datagram<R: RngCore + ?Sized>(&mut self, datagram: &WireDatagram, now: SimTime, rng: &mut R) -> Received {
        match datagram.kind() {
            Some(DatagramKind::KeyResponse) => self.on_key_response(datagram, now, rng),
            Some(DatagramKind::Message) => self.on_receive(datagram, now),
            _ => {
                self.stats.decode_failures += 1;
                Received::Dropped(DropReason::DecodeFailure)
            }
        }
    }

    fn on_key_response<R: RngCore + ?Sized>(&mut self, datagram: &WireDatagram, now: SimTime, rng: &mut R) -> Received {
        let resp = match decode_key_response(datagram, &self.link) {
            Ok(r) => r,
            Err(_) => {
                self.stats.decode_failures += 1;
                return Received::Dropped(DropReason::DecodeFailure);
            }
        };
        let Some(pending) = self.pending.pop_front() else {
            return Received::Dropped(DropReason::UnexpectedKeyResponse);
        };
        let expires_at = now + self.ttl;
        let key_or = |slot: &KeySlot, who: UserId| slot.key().cloned().ok_or(ClientError::UnknownUser(who));
        let result = match pending {
            Deferred::Regular { receiver, messages } => key_or(&resp.slots[0], receiver).and_then(|key| {
                self.caches.store_regular(receiver, key.clone(), expires_at);
                self.seal_all(receiver, UserId::ABSENT, MessageType::Regular, &messages, &key, rng)
            }),
            Deferred::Deniable {
                receiver,
                decoy,
                messages,
            } => key_or(&resp.slots[0], receiver)
                .and_then(|rk| Ok((rk, key_or(&resp.slots[1], decoy)?)))
                .and_then(|(receiver_key, decoy_key)| {
                    self.caches
                        .store_pair(decoy, decoy_key, receiver, receiver_key.clone(), expires_at);
                    self.seal_all(receiver, decoy, MessageType::Deniable, &messages, &receiver_key, rng)
                }),
            Deferred::Block { decoy, blocked } => key_or(&resp.slots[0], decoy).and_then(|decoy_key| {
                self.caches.store_pair(
                    decoy,
                    decoy_key,
                    UserId::SERVER,
                    self.server_key.clone(),
                    expires_at,
                );
                Ok(vec![self.block_message(decoy, blocked, rng)?])
            }),
        };
        match result {
            Ok(out) => Received::Sent(out),
            Err(e) => Received::LookupFailed(e),
        }
    }

    /// Handles a forwarded message: dummies vanish, text lands in the inbox,
    /// recipes from friends are handed back for execution.
    pub fn on_receive(&mut self, datagram: &WireDatagram, now: SimTime) -> Received {
        match self.open_message(datagram) {
            Ok((headers, chunks)) => self.deliver(headers, chunks, now),
            Err(_) => {
                self.stats.decode_failures += 1;
                Received::Dropped(DropReason::DecodeFailure)
            }
        }
    }

    fn open_message(&self, datagram: &WireDatagram) -> Result<(MessageHeaders, Option<[PayloadChunk; 2]>), WireError> {
        let msg = decode_message(datagram, &self.link)?;
        if msg.headers.message_type == MessageType::Dummy {
            return Ok((msg.headers, None));
        }
        let a = PayloadChunk::open(&self.key, &msg.chunks[0])?;
        let b = PayloadChunk::open(&self.key, &msg.chunks[1])?;
        Ok((msg.headers, Some([a, b])))
    }

    fn deliver(&mut self, headers: MessageHeaders, chunks: Option<[PayloadChunk; 2]>, now: SimTime) -> Received {
        let Some(chunks) = chunks else {
            self.stats.dummies_dropped += 1;
            return Received::Dropped(DropReason::Dummy);
        };
        if chunks[0].kind == ChunkKind::Recipe {
            let from_friend = self.friends.contains(&headers.sender);
            if headers.message_type != MessageType::Deniable || !from_friend {
                self.stats.recipes_rejected += 1;
                return Received::Dropped(DropReason::RecipeFromStranger);
            }
            return Received::Recipe {
                owner: headers.sender,
                bytecode: chunks[0].data().to_vec(),
            };
        }
        self.inbox.push(InboxEntry {
            from: headers.sender,
            message_type: headers.message_type,
            text: chunks.iter().flat_map(|c| c.data().iter().copied()).collect(),
            received_at: now,
        });
        Received::Delivered
    }
}
