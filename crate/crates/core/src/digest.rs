//! Stable short digests used for adversary ids and certificate provenance.

use serde::Serialize;
use sha2::{Digest, Sha256};

/// First 16 hex characters of the SHA-256 of `bytes`.
pub fn short_hex(bytes: &[u8]) -> String {
    let full = Sha256::digest(bytes);
    hex::encode(&full[..8])
}

/// Digest of the canonical JSON encoding of `value`.
pub fn of_json<T: Serialize + ?Sized>(value: &T) -> String {
    // serde_json output is deterministic for structs and sequences; maps in
    // this crate are BTreeMaps.
    let bytes = serde_json::to_vec(value).expect("serializable value");
    short_hex(&bytes)
}
