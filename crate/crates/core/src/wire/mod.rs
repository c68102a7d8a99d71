//! Byte-exact datagram formats.
//!
//! Every object that crosses the network has one of three sizes:
//!
//! | kind         | TLS layer | on the wire |
//! |--------------|-----------|-------------|
//! | message      | 1094      | 1134        |
//! | key request  | 53        | 93          |
//! | key response | 1045      | 1085        |
//!
//! A TLS record is a 5-byte cleartext header, the ciphertext and a 16-byte
//! tag. The TCP/IP headers are not materialized; [`TRANSPORT_OVERHEAD`] is
//! added when sizes are reported.

pub mod cipher;
pub mod chunk;
mod datagram;

use std::fmt;

use sha2::{Digest, Sha256};

use crate::error::WireError;

pub use chunk::{chunk_plaintext, message_chunks, unchunk, ChunkKind, PayloadChunk};
pub use cipher::{LinkKey, PublicKey, SealedChunk};
pub use datagram::{
    decode_key_request, decode_key_response, decode_message, encode_key_request,
    encode_key_response, encode_message, DatagramKind, KeyRequest, KeyResponse, KeySlot,
    PaddedMsg, WireDatagram,
};

pub const USER_ID_LEN: usize = 16;
pub const HEADERS_LEN: usize = 3 * USER_ID_LEN + 1;
pub const PUBLIC_KEY_LEN: usize = 512;
pub const SEALED_CHUNK_LEN: usize = 512;
/// Largest plaintext one asymmetric block carries.
pub const MAX_CHUNK_PLAINTEXT: usize = 446;
pub const CHUNKS_PER_MESSAGE: usize = 2;
pub const MESSAGE_TEXT_CAPACITY: usize = CHUNKS_PER_MESSAGE * MAX_CHUNK_PLAINTEXT;

pub const TLS_RECORD_HEADER_LEN: usize = 5;
pub const TLS_TAG_LEN: usize = 16;
pub const TLS_OVERHEAD: usize = TLS_RECORD_HEADER_LEN + TLS_TAG_LEN;
/// TCP and IP headers, 20 bytes each.
pub const TRANSPORT_OVERHEAD: usize = 40;

pub const MESSAGE_BODY_LEN: usize = HEADERS_LEN + CHUNKS_PER_MESSAGE * SEALED_CHUNK_LEN;
pub const KEY_REQUEST_BODY_LEN: usize = 2 * USER_ID_LEN;
pub const KEY_RESPONSE_BODY_LEN: usize = 2 * PUBLIC_KEY_LEN;

pub const MESSAGE_RECORD_SIZE: usize = MESSAGE_BODY_LEN + TLS_OVERHEAD;
pub const KEY_REQUEST_RECORD_SIZE: usize = KEY_REQUEST_BODY_LEN + TLS_OVERHEAD;
pub const KEY_RESPONSE_RECORD_SIZE: usize = KEY_RESPONSE_BODY_LEN + TLS_OVERHEAD;

pub const MESSAGE_WIRE_SIZE: usize = MESSAGE_RECORD_SIZE + TRANSPORT_OVERHEAD;
pub const KEY_REQUEST_WIRE_SIZE: usize = KEY_REQUEST_RECORD_SIZE + TRANSPORT_OVERHEAD;
pub const KEY_RESPONSE_WIRE_SIZE: usize = KEY_RESPONSE_RECORD_SIZE + TRANSPORT_OVERHEAD;

/// 16-byte opaque user identifier.
///
/// The all-zero id means "absent" (an empty decoy field) and the all-0xFF id
/// names the server; neither is ever assigned to a user.
#[derive(Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct UserId([u8; USER_ID_LEN]);

impl UserId {
    pub const ABSENT: UserId = UserId([0; USER_ID_LEN]);
    pub const SERVER: UserId = UserId([0xFF; USER_ID_LEN]);

    pub const fn from_bytes(bytes: [u8; USER_ID_LEN]) -> Self {
        UserId(bytes)
    }

    /// Derives a stable id from a human-readable name.
    pub fn from_name(name: &str) -> Self {
        let digest = Sha256::digest(name.as_bytes());
        let mut id = [0u8; USER_ID_LEN];
        id.copy_from_slice(&digest[..USER_ID_LEN]);
        let id = UserId(id);
        if id.is_reserved() {
            // Astronomically unlikely; flip one byte to leave the reserved space.
            let mut bytes = id.0;
            bytes[0] ^= 1;
            return UserId(bytes);
        }
        id
    }

    pub fn as_bytes(&self) -> &[u8; USER_ID_LEN] {
        &self.0
    }

    pub fn is_absent(&self) -> bool {
        *self == Self::ABSENT
    }

    pub fn is_reserved(&self) -> bool {
        *self == Self::ABSENT || *self == Self::SERVER
    }

    pub(crate) fn from_slice(bytes: &[u8]) -> Self {
        let mut id = [0u8; USER_ID_LEN];
        id.copy_from_slice(bytes);
        UserId(id)
    }
}

impl fmt::Display for UserId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if *self == Self::SERVER {
            return f.write_str("SERVER");
        }
        for b in &self.0 {
            write!(f, "{b:02x}")?;
        }
        Ok(())
    }
}

impl fmt::Debug for UserId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "UserId({self})")
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
#[repr(u8)]
pub enum MessageType {
    Regular = 0,
    Deniable = 1,
    Dummy = 2,
    BlockRequest = 3,
}

impl MessageType {
    pub const ALL: [MessageType; 4] = [
        MessageType::Regular,
        MessageType::Deniable,
        MessageType::Dummy,
        MessageType::BlockRequest,
    ];

    pub fn tag(self) -> u8 {
        self as u8
    }
}

impl TryFrom<u8> for MessageType {
    type Error = WireError;

    fn try_from(tag: u8) -> Result<Self, Self::Error> {
        MessageType::ALL
            .into_iter()
            .find(|t| t.tag() == tag)
            .ok_or(WireError::BadMessageType(tag))
    }
}

/// The cleartext-to-the-server part of every message.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct MessageHeaders {
    pub sender: UserId,
    pub true_receiver: UserId,
    /// [`UserId::ABSENT`] unless the message is deniable or a block request.
    pub decoy_receiver: UserId,
    pub message_type: MessageType,
}

impl MessageHeaders {
    pub fn encode(&self) -> [u8; HEADERS_LEN] {
        let mut out = [0u8; HEADERS_LEN];
        out[..16].copy_from_slice(self.sender.as_bytes());
        out[16..32].copy_from_slice(self.true_receiver.as_bytes());
        out[32..48].copy_from_slice(self.decoy_receiver.as_bytes());
        out[48] = self.message_type.tag();
        out
    }

    pub fn decode(bytes: &[u8]) -> Result<Self, WireError> {
        if bytes.len() != HEADERS_LEN {
            return Err(WireError::Length {
                expected: HEADERS_LEN,
                actual: bytes.len(),
            });
        }
        Ok(MessageHeaders {
            sender: UserId::from_slice(&bytes[..16]),
            true_receiver: UserId::from_slice(&bytes[16..32]),
            decoy_receiver: UserId::from_slice(&bytes[32..48]),
            message_type: MessageType::try_from(bytes[48])?,
        })
    }
}
