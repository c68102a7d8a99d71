use thiserror::Error;

use crate::wire::UserId;

/// Failures while building or opening wire objects.
#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum WireError {
    #[error("chunk plaintext is {len} bytes, at most {max} fit in one sealed chunk")]
    ChunkTooLarge { len: usize, max: usize },
    #[error("record of {0} bytes does not match any datagram kind")]
    UnknownRecordSize(usize),
    #[error("malformed TLS record header")]
    BadRecordHeader,
    #[error("authentication tag mismatch")]
    DecodeFailure,
    #[error("unknown message type tag {0:#04x}")]
    BadMessageType(u8),
    #[error("malformed chunk framing")]
    BadChunkFraming,
    #[error("expected {expected} bytes, got {actual}")]
    Length { expected: usize, actual: usize },
}

/// Failures surfaced by client operations.
#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ClientError {
    #[error("decoy and receiver are the same user")]
    DecoyIsReceiver,
    #[error("decoy key is in use; wait for it to expire or pick another trusted contact")]
    AbortedDecoyBusy,
    #[error("{0} is not a trusted contact")]
    NotAFriend(UserId),
    #[error("client has no trusted contacts")]
    NoFriends,
    #[error("server does not know user {0}")]
    UnknownUser(UserId),
    #[error(transparent)]
    Wire(#[from] WireError),
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ServerError {
    #[error("user {0} is already registered")]
    AlreadyRegistered(UserId),
    #[error("user {0} is not registered")]
    NotRegistered(UserId),
    #[error("public key must not be all zero")]
    ReservedKey,
}
