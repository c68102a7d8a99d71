use std::fmt;

use rand::RngCore;

use super::cipher::{sym_open, sym_seal};
use super::*;

/// The three shapes a datagram can take; its size alone tells them apart.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum DatagramKind {
    Message,
    KeyRequest,
    KeyResponse,
}

impl DatagramKind {
    pub const ALL: [DatagramKind; 3] = [
        DatagramKind::Message,
        DatagramKind::KeyRequest,
        DatagramKind::KeyResponse,
    ];

    pub fn record_size(self) -> usize {
        match self {
            DatagramKind::Message => MESSAGE_RECORD_SIZE,
            DatagramKind::KeyRequest => KEY_REQUEST_RECORD_SIZE,
            DatagramKind::KeyResponse => KEY_RESPONSE_RECORD_SIZE,
        }
    }

    pub fn wire_size(self) -> usize {
        self.record_size() + TRANSPORT_OVERHEAD
    }

    pub fn from_record_size(len: usize) -> Option<Self> {
        Self::ALL.into_iter().find(|k| k.record_size() == len)
    }

    pub fn from_wire_size(size: usize) -> Option<Self> {
        Self::ALL.into_iter().find(|k| k.wire_size() == size)
    }
}

/// A TLS record as it travels between a client and the server.
#[derive(Clone, PartialEq, Eq)]
pub struct WireDatagram {
    record: Vec<u8>,
}

impl WireDatagram {
    pub fn from_record(record: Vec<u8>) -> Self {
        WireDatagram { record }
    }

    /// Random bytes of the given on-wire size, as an active adversary would inject.
    pub fn garbage<R: RngCore + ?Sized>(wire_size: usize, rng: &mut R) -> Self {
        let mut record = vec![0u8; wire_size.saturating_sub(TRANSPORT_OVERHEAD)];
        rng.fill_bytes(&mut record);
        WireDatagram { record }
    }

    pub fn record(&self) -> &[u8] {
        &self.record
    }

    pub fn kind(&self) -> Option<DatagramKind> {
        DatagramKind::from_record_size(self.record.len())
    }

    /// Size including the TCP/IP headers.
    pub fn wire_size(&self) -> usize {
        self.record.len() + TRANSPORT_OVERHEAD
    }

    fn open(&self, expected: DatagramKind, link: &LinkKey) -> Result<Vec<u8>, WireError> {
        if self.kind() != Some(expected) {
            return Err(WireError::UnknownRecordSize(self.record.len()));
        }
        sym_open(link, &self.record)
    }
}

impl fmt::Debug for WireDatagram {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "WireDatagram({:?}, {}B)", self.kind(), self.wire_size())
    }
}

/// A decoded message: headers plus two payload chunks sealed for the true
/// receiver (or filler, for dummies).
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct PaddedMsg {
    pub headers: MessageHeaders,
    pub chunks: [SealedChunk; CHUNKS_PER_MESSAGE],
}

pub fn encode_message<R: RngCore + ?Sized>(msg: &PaddedMsg, link: &LinkKey, rng: &mut R) -> WireDatagram {
    let mut body = Vec::with_capacity(MESSAGE_BODY_LEN);
    body.extend_from_slice(&msg.headers.encode());
    for chunk in &msg.chunks {
        body.extend_from_slice(chunk.as_bytes());
    }
    WireDatagram::from_record(sym_seal(link, &body, rng))
}

pub fn decode_message(datagram: &WireDatagram, link: &LinkKey) -> Result<PaddedMsg, WireError> {
    let body = datagram.open(DatagramKind::Message, link)?;
    let headers = MessageHeaders::decode(&body[..HEADERS_LEN])?;
    let mut chunks = [const { SealedChunk([0; SEALED_CHUNK_LEN]) }; CHUNKS_PER_MESSAGE];
    for (i, chunk) in chunks.iter_mut().enumerate() {
        let start = HEADERS_LEN + i * SEALED_CHUNK_LEN;
        chunk.0.copy_from_slice(&body[start..start + SEALED_CHUNK_LEN]);
    }
    Ok(PaddedMsg { headers, chunks })
}

/// Always room for two ids; the second is all-zero when absent.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct KeyRequest {
    pub who1: UserId,
    pub who2: Option<UserId>,
}

pub fn encode_key_request<R: RngCore + ?Sized>(req: &KeyRequest, link: &LinkKey, rng: &mut R) -> WireDatagram {
    let mut body = [0u8; KEY_REQUEST_BODY_LEN];
    body[..USER_ID_LEN].copy_from_slice(req.who1.as_bytes());
    if let Some(who2) = req.who2 {
        body[USER_ID_LEN..].copy_from_slice(who2.as_bytes());
    }
    WireDatagram::from_record(sym_seal(link, &body, rng))
}

pub fn decode_key_request(datagram: &WireDatagram, link: &LinkKey) -> Result<KeyRequest, WireError> {
    let body = datagram.open(DatagramKind::KeyRequest, link)?;
    let who1 = UserId::from_slice(&body[..USER_ID_LEN]);
    let who2 = UserId::from_slice(&body[USER_ID_LEN..]);
    Ok(KeyRequest {
        who1,
        who2: (!who2.is_absent()).then_some(who2),
    })
}

/// One 512-byte key slot of a response. An unknown user is answered with an
/// all-zero slot, which no registered key can equal.
#[derive(Clone, Debug, PartialEq, Eq)]
#[allow(clippy::large_enum_variant)]
pub enum KeySlot {
    Key(PublicKey),
    UnknownUser,
}

impl KeySlot {
    fn to_bytes(&self) -> [u8; PUBLIC_KEY_LEN] {
        match self {
            KeySlot::Key(k) => *k.as_bytes(),
            KeySlot::UnknownUser => [0; PUBLIC_KEY_LEN],
        }
    }

    fn from_bytes(bytes: &[u8]) -> Self {
        let mut k = [0u8; PUBLIC_KEY_LEN];
        k.copy_from_slice(bytes);
        let key = PublicKey::from_bytes(k);
        if key.is_zero() {
            KeySlot::UnknownUser
        } else {
            KeySlot::Key(key)
        }
    }

    pub fn key(&self) -> Option<&PublicKey> {
        match self {
            KeySlot::Key(k) => Some(k),
            KeySlot::UnknownUser => None,
        }
    }
}

/// Two key slots. A single-key answer repeats the key in the second slot, so
/// the body is 1024 bytes either way.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct KeyResponse {
    pub slots: [KeySlot; 2],
}

impl KeyResponse {
    pub fn single(slot: KeySlot) -> Self {
        KeyResponse {
            slots: [slot.clone(), slot],
        }
    }

    pub fn pair(first: KeySlot, second: KeySlot) -> Self {
        KeyResponse {
            slots: [first, second],
        }
    }

    /// Whether slot 2 carries a second key rather than the repeat of slot 1.
    pub fn second_slot_valid(&self) -> bool {
        self.slots[0] != self.slots[1]
    }
}

pub fn encode_key_response<R: RngCore + ?Sized>(resp: &KeyResponse, link: &LinkKey, rng: &mut R) -> WireDatagram {
    let mut body = Vec::with_capacity(KEY_RESPONSE_BODY_LEN);
    for slot in &resp.slots {
        body.extend_from_slice(&slot.to_bytes());
    }
    WireDatagram::from_record(sym_seal(link, &body, rng))
}

pub fn decode_key_response(datagram: &WireDatagram, link: &LinkKey) -> Result<KeyResponse, WireError> {
    let body = datagram.open(DatagramKind::KeyResponse, link)?;
    Ok(KeyResponse {
        slots: [
            KeySlot::from_bytes(&body[..PUBLIC_KEY_LEN]),
            KeySlot::from_bytes(&body[PUBLIC_KEY_LEN..]),
        ],
    })
}
