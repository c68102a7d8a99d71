//! Splitting text into fixed-capacity payload chunks.
//!
//! Inside a sealed block a chunk is framed as a 2-byte big-endian prefix,
//! the content, then zero padding. The low 15 bits of the prefix hold the
//! content length; the top bit marks a recipe chunk.

use rand::RngCore;

use super::cipher::{asym_open, asym_seal, ASYM_BLOCK_LEN};
use super::{PublicKey, SealedChunk, CHUNKS_PER_MESSAGE, MAX_CHUNK_PLAINTEXT, MESSAGE_TEXT_CAPACITY};
use crate::error::WireError;

const RECIPE_FLAG: u16 = 0x8000;
const PREFIX_LEN: usize = 2;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ChunkKind {
    Text,
    Recipe,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct PayloadChunk {
    pub kind: ChunkKind,
    data: Vec<u8>,
}

impl PayloadChunk {
    pub fn text(data: &[u8]) -> Result<Self, WireError> {
        Self::new(ChunkKind::Text, data)
    }

    pub fn recipe(bytecode: &[u8]) -> Result<Self, WireError> {
        Self::new(ChunkKind::Recipe, bytecode)
    }

    /// The padding chunk: no content.
    pub fn empty() -> Self {
        PayloadChunk {
            kind: ChunkKind::Text,
            data: Vec::new(),
        }
    }

    fn new(kind: ChunkKind, data: &[u8]) -> Result<Self, WireError> {
        if data.len() > MAX_CHUNK_PLAINTEXT {
            return Err(WireError::ChunkTooLarge {
                len: data.len(),
                max: MAX_CHUNK_PLAINTEXT,
            });
        }
        Ok(PayloadChunk {
            kind,
            data: data.to_vec(),
        })
    }

    pub fn data(&self) -> &[u8] {
        &self.data
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn seal<R: RngCore + ?Sized>(&self, key: &PublicKey, rng: &mut R) -> Result<SealedChunk, WireError> {
        if self.data.len() > MAX_CHUNK_PLAINTEXT {
            return Err(WireError::ChunkTooLarge {
                len: self.data.len(),
                max: MAX_CHUNK_PLAINTEXT,
            });
        }
        let mut prefix = self.data.len() as u16;
        if self.kind == ChunkKind::Recipe {
            prefix |= RECIPE_FLAG;
        }
        let mut block = Vec::with_capacity(PREFIX_LEN + self.data.len());
        block.extend_from_slice(&prefix.to_be_bytes());
        block.extend_from_slice(&self.data);
        asym_seal(key, &block, rng)
    }

    pub fn open(key: &PublicKey, sealed: &SealedChunk) -> Result<Self, WireError> {
        let block = asym_open(key, sealed)?;
        let prefix = u16::from_be_bytes([block[0], block[1]]);
        let kind = if prefix & RECIPE_FLAG != 0 {
            ChunkKind::Recipe
        } else {
            ChunkKind::Text
        };
        let len = (prefix & !RECIPE_FLAG) as usize;
        if len > MAX_CHUNK_PLAINTEXT {
            return Err(WireError::BadChunkFraming);
        }
        let end = PREFIX_LEN + len;
        if block[end..ASYM_BLOCK_LEN].iter().any(|&b| b != 0) {
            return Err(WireError::BadChunkFraming);
        }
        Ok(PayloadChunk {
            kind,
            data: block[PREFIX_LEN..end].to_vec(),
        })
    }
}

/// Splits `text` into chunks, two per message. The second chunk of the last
/// message is an empty padding chunk when the text does not fill it. Empty
/// text still yields one message.
pub fn chunk_plaintext(text: &[u8]) -> Vec<PayloadChunk> {
    message_chunks(text).into_iter().flatten().collect()
}

/// Same as [`chunk_plaintext`], grouped per message.
pub fn message_chunks(text: &[u8]) -> Vec<[PayloadChunk; CHUNKS_PER_MESSAGE]> {
    if text.is_empty() {
        return vec![[PayloadChunk::empty(), PayloadChunk::empty()]];
    }
    text.chunks(MESSAGE_TEXT_CAPACITY)
        .map(|part| {
            let (a, b) = part.split_at(part.len().min(MAX_CHUNK_PLAINTEXT));
            let first = PayloadChunk {
                kind: ChunkKind::Text,
                data: a.to_vec(),
            };
            let second = PayloadChunk {
                kind: ChunkKind::Text,
                data: b.to_vec(),
            };
            [first, second]
        })
        .collect()
}

pub fn unchunk(chunks: &[PayloadChunk]) -> Vec<u8> {
    chunks.iter().flat_map(|c| c.data.iter().copied()).collect()
}
