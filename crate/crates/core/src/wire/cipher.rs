//! Size-faithful mock cipher.
//!
//! Stands in for RSAES-OAEP (payload chunks) and TLS_AES_128_GCM_SHA256
//! (link records). The output sizes match the real schemes exactly and every
//! sealed byte is either PRNG output or SHA-256 keystream, so ciphertexts look
//! uniform to anyone without the key. None of this is secure cryptography.

use std::fmt;

use rand::RngCore;
use sha2::{Digest, Sha256};

use super::{PUBLIC_KEY_LEN, SEALED_CHUNK_LEN, TLS_RECORD_HEADER_LEN, TLS_TAG_LEN};
use crate::error::WireError;

const ASYM_NONCE_LEN: usize = 16;
const ASYM_MAC_LEN: usize = 16;
/// Plaintext block carried by one asymmetric seal.
pub const ASYM_BLOCK_LEN: usize = SEALED_CHUNK_LEN - ASYM_NONCE_LEN - ASYM_MAC_LEN;

const SYM_NONCE_LEN: usize = 8;
const SYM_MAC_LEN: usize = TLS_TAG_LEN - SYM_NONCE_LEN;

pub const TLS_APPLICATION_DATA: u8 = 0x17;
pub const TLS_LEGACY_VERSION: [u8; 2] = [0x03, 0x03];

/// A 512-byte (4096-bit) public key. The mock scheme uses the same bytes to
/// open what they sealed.
#[derive(Clone, PartialEq, Eq, Hash)]
pub struct PublicKey([u8; PUBLIC_KEY_LEN]);

impl PublicKey {
    pub fn generate<R: RngCore + ?Sized>(rng: &mut R) -> Self {
        let mut bytes = [0u8; PUBLIC_KEY_LEN];
        loop {
            rng.fill_bytes(&mut bytes);
            if bytes.iter().any(|&b| b != 0) {
                return PublicKey(bytes);
            }
        }
    }

    pub fn from_bytes(bytes: [u8; PUBLIC_KEY_LEN]) -> Self {
        PublicKey(bytes)
    }

    pub fn as_bytes(&self) -> &[u8; PUBLIC_KEY_LEN] {
        &self.0
    }

    /// The all-zero key never belongs to anyone.
    pub fn is_zero(&self) -> bool {
        self.0.iter().all(|&b| b == 0)
    }

    #[cfg(test)]
    pub(crate) fn zero() -> Self {
        PublicKey([0; PUBLIC_KEY_LEN])
    }
}

impl fmt::Debug for PublicKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "PublicKey({:02x}{:02x}{:02x}{:02x}..)", self.0[0], self.0[1], self.0[2], self.0[3])
    }
}

/// Session key of one client-server TLS link.
#[derive(Clone, PartialEq, Eq)]
pub struct LinkKey([u8; 32]);

impl LinkKey {
    pub fn generate<R: RngCore + ?Sized>(rng: &mut R) -> Self {
        let mut bytes = [0u8; 32];
        rng.fill_bytes(&mut bytes);
        LinkKey(bytes)
    }

    pub fn from_bytes(bytes: [u8; 32]) -> Self {
        LinkKey(bytes)
    }
}

impl fmt::Debug for LinkKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("LinkKey(..)")
    }
}

/// One asymmetrically sealed payload chunk, always 512 bytes.
#[derive(Clone, PartialEq, Eq)]
pub struct SealedChunk(pub(crate) [u8; SEALED_CHUNK_LEN]);

impl SealedChunk {
    pub fn as_bytes(&self) -> &[u8; SEALED_CHUNK_LEN] {
        &self.0
    }

    pub fn from_bytes(bytes: [u8; SEALED_CHUNK_LEN]) -> Self {
        SealedChunk(bytes)
    }

    /// Uniform filler, what the server puts in dummy messages.
    pub fn random<R: RngCore + ?Sized>(rng: &mut R) -> Self {
        let mut bytes = [0u8; SEALED_CHUNK_LEN];
        rng.fill_bytes(&mut bytes);
        SealedChunk(bytes)
    }
}

impl fmt::Debug for SealedChunk {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "SealedChunk({:02x}{:02x}..)", self.0[0], self.0[1])
    }
}

fn xor_keystream(label: &[u8], key: &[u8], nonce: &[u8], data: &mut [u8]) {
    for (counter, block) in data.chunks_mut(32).enumerate() {
        let mut h = Sha256::new();
        h.update(label);
        h.update(key);
        h.update(nonce);
        h.update((counter as u32).to_be_bytes());
        let ks = h.finalize();
        for (b, k) in block.iter_mut().zip(ks.iter()) {
            *b ^= k;
        }
    }
}

fn mac(label: &[u8], key: &[u8], nonce: &[u8], ciphertext: &[u8]) -> [u8; 32] {
    let mut h = Sha256::new();
    h.update(label);
    h.update(key);
    h.update(nonce);
    h.update(ciphertext);
    let mut out = [0u8; 32];
    out.copy_from_slice(&h.finalize());
    out
}

/// Seals up to [`ASYM_BLOCK_LEN`] bytes (zero padded) into 512 bytes:
/// `nonce(16) | ciphertext(480) | mac(16)`.
pub fn asym_seal<R: RngCore + ?Sized>(
    key: &PublicKey,
    block: &[u8],
    rng: &mut R,
) -> Result<SealedChunk, WireError> {
    if block.len() > ASYM_BLOCK_LEN {
        return Err(WireError::Length {
            expected: ASYM_BLOCK_LEN,
            actual: block.len(),
        });
    }
    let mut out = [0u8; SEALED_CHUNK_LEN];
    let (nonce, rest) = out.split_at_mut(ASYM_NONCE_LEN);
    let (body, tag) = rest.split_at_mut(ASYM_BLOCK_LEN);
    rng.fill_bytes(nonce);
    body[..block.len()].copy_from_slice(block);
    xor_keystream(b"asym-ks", key.as_bytes(), nonce, body);
    let m = mac(b"asym-mac", key.as_bytes(), nonce, body);
    tag.copy_from_slice(&m[..ASYM_MAC_LEN]);
    Ok(SealedChunk(out))
}

pub fn asym_open(key: &PublicKey, sealed: &SealedChunk) -> Result<[u8; ASYM_BLOCK_LEN], WireError> {
    let (nonce, rest) = sealed.0.split_at(ASYM_NONCE_LEN);
    let (body, tag) = rest.split_at(ASYM_BLOCK_LEN);
    let m = mac(b"asym-mac", key.as_bytes(), nonce, body);
    if m[..ASYM_MAC_LEN] != *tag {
        return Err(WireError::DecodeFailure);
    }
    let mut out = [0u8; ASYM_BLOCK_LEN];
    out.copy_from_slice(body);
    xor_keystream(b"asym-ks", key.as_bytes(), nonce, &mut out);
    Ok(out)
}

/// Wraps `plaintext` in a TLS 1.3 application-data record:
/// `0x17 0x03 0x03 len(2) | ciphertext | tag(16)`, where the mock tag is an
/// 8-byte nonce followed by an 8-byte MAC.
pub fn sym_seal<R: RngCore + ?Sized>(key: &LinkKey, plaintext: &[u8], rng: &mut R) -> Vec<u8> {
    let fragment_len = plaintext.len() + TLS_TAG_LEN;
    let mut out = Vec::with_capacity(TLS_RECORD_HEADER_LEN + fragment_len);
    out.push(TLS_APPLICATION_DATA);
    out.extend_from_slice(&TLS_LEGACY_VERSION);
    out.extend_from_slice(&(fragment_len as u16).to_be_bytes());
    let ct_start = out.len();
    out.extend_from_slice(plaintext);
    let mut nonce = [0u8; SYM_NONCE_LEN];
    rng.fill_bytes(&mut nonce);
    xor_keystream(b"sym-ks", &key.0, &nonce, &mut out[ct_start..]);
    let m = mac(b"sym-mac", &key.0, &nonce, &out[ct_start..]);
    out.extend_from_slice(&nonce);
    out.extend_from_slice(&m[..SYM_MAC_LEN]);
    out
}

pub fn sym_open(key: &LinkKey, record: &[u8]) -> Result<Vec<u8>, WireError> {
    if record.len() < TLS_RECORD_HEADER_LEN + TLS_TAG_LEN
        || record[0] != TLS_APPLICATION_DATA
        || record[1..3] != TLS_LEGACY_VERSION
    {
        return Err(WireError::BadRecordHeader);
    }
    let fragment_len = u16::from_be_bytes([record[3], record[4]]) as usize;
    if fragment_len != record.len() - TLS_RECORD_HEADER_LEN {
        return Err(WireError::BadRecordHeader);
    }
    let (ct, tag) = record[TLS_RECORD_HEADER_LEN..].split_at(fragment_len - TLS_TAG_LEN);
    let (nonce, tag_mac) = tag.split_at(SYM_NONCE_LEN);
    let m = mac(b"sym-mac", &key.0, nonce, ct);
    if m[..SYM_MAC_LEN] != *tag_mac {
        return Err(WireError::DecodeFailure);
    }
    let mut out = ct.to_vec();
    xor_keystream(b"sym-ks", &key.0, nonce, &mut out);
    Ok(out)
}
