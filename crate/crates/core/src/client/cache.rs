//! Partitioned key cache.
//!
//! Regular entries are keyed by receiver. Deniable entries are keyed by the
//! decoy and bind it to exactly one true receiver. A decoy entry stands in for
//! "regular traffic with the decoy", so it may serve regular sends to the
//! decoy; a key cached only as a deniable receiver never does.

use std::collections::HashMap;

use crate::wire::{PublicKey, UserId};
use crate::SimTime;

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct KeyCacheEntry {
    pub key: PublicKey,
    pub expires_at: SimTime,
}

impl KeyCacheEntry {
    pub fn is_alive(&self, now: SimTime) -> bool {
        now < self.expires_at
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct DeniableEntry {
    pub receiver: UserId,
    pub decoy: KeyCacheEntry,
    pub receiver_key: PublicKey,
}

/// What the sender wants to do; a deniable intent always names its decoy.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Intent {
    Regular { receiver: UserId },
    Deniable { receiver: UserId, decoy: UserId },
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum CacheDecision {
    /// R1
    ReuseRegular,
    /// R2
    ReuseDecoyAsRegular,
    /// R3
    FetchOne,
    /// D3
    ReusePair,
    /// no rule matched, look up both keys
    FetchPair,
    /// D1 or D2
    Abort,
}

impl CacheDecision {
    pub fn needs_lookup(self) -> bool {
        matches!(self, CacheDecision::FetchOne | CacheDecision::FetchPair)
    }
}

#[derive(Clone, Debug, Default)]
pub struct KeyCaches {
    pub regular: HashMap<UserId, KeyCacheEntry>,
    pub deniable: HashMap<UserId, DeniableEntry>,
}

impl KeyCaches {
    pub fn regular_alive(&self, who: UserId, now: SimTime) -> Option<&KeyCacheEntry> {
        self.regular.get(&who).filter(|e| e.is_alive(now))
    }

    pub fn decoy_alive(&self, decoy: UserId, now: SimTime) -> Option<&DeniableEntry> {
        self.deniable.get(&decoy).filter(|e| e.decoy.is_alive(now))
    }

    /// Applies the cache rules without touching any TTL. The caller has
    /// already rejected a deniable intent whose decoy equals its receiver.
    pub fn decide(&self, intent: Intent, now: SimTime) -> CacheDecision {
        match intent {
            Intent::Regular { receiver } => {
                if self.regular_alive(receiver, now).is_some() {
                    CacheDecision::ReuseRegular
                } else if self.decoy_alive(receiver, now).is_some() {
                    CacheDecision::ReuseDecoyAsRegular
                } else {
                    CacheDecision::FetchOne
                }
            }
            Intent::Deniable { receiver, decoy } => {
                if self.regular_alive(decoy, now).is_some() {
                    return CacheDecision::Abort;
                }
                match self.decoy_alive(decoy, now) {
                    Some(entry) if entry.receiver == receiver => CacheDecision::ReusePair,
                    Some(_) => CacheDecision::Abort,
                    None => CacheDecision::FetchPair,
                }
            }
        }
    }

    /// Key used to seal the payload under a reuse decision.
    pub fn reuse_key(&self, intent: Intent, decision: CacheDecision, now: SimTime) -> Option<PublicKey> {
        match (intent, decision) {
            (Intent::Regular { receiver }, CacheDecision::ReuseRegular) => {
                self.regular_alive(receiver, now).map(|e| e.key.clone())
            }
            (Intent::Regular { receiver }, CacheDecision::ReuseDecoyAsRegular) => {
                self.decoy_alive(receiver, now).map(|e| e.decoy.key.clone())
            }
            (Intent::Deniable { decoy, .. }, CacheDecision::ReusePair) => {
                self.decoy_alive(decoy, now).map(|e| e.receiver_key.clone())
            }
            _ => None,
        }
    }

    /// Resets the TTL of whatever entry a reuse decision relied on.
    pub fn bump(&mut self, intent: Intent, decision: CacheDecision, now: SimTime, ttl: SimTime) {
        let expires_at = now + ttl;
        match (intent, decision) {
            (Intent::Regular { receiver }, CacheDecision::ReuseRegular) => {
                if let Some(e) = self.regular.get_mut(&receiver) {
                    e.expires_at = expires_at;
                }
            }
            (Intent::Regular { receiver: decoy }, CacheDecision::ReuseDecoyAsRegular)
            | (Intent::Deniable { decoy, .. }, CacheDecision::ReusePair) => {
                if let Some(e) = self.deniable.get_mut(&decoy) {
                    e.decoy.expires_at = expires_at;
                }
            }
            _ => {}
        }
    }

    pub fn store_regular(&mut self, receiver: UserId, key: PublicKey, expires_at: SimTime) {
        self.regular.insert(receiver, KeyCacheEntry { key, expires_at });
    }

    pub fn store_pair(
        &mut self,
        decoy: UserId,
        decoy_key: PublicKey,
        receiver: UserId,
        receiver_key: PublicKey,
        expires_at: SimTime,
    ) {
        self.deniable.insert(
            decoy,
            DeniableEntry {
                receiver,
                decoy: KeyCacheEntry {
                    key: decoy_key,
                    expires_at,
                },
                receiver_key,
            },
        );
    }
}
