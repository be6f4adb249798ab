//! Content digests used for versions, ids and cache keys.

use sha2::{Digest, Sha256};

/// Hex SHA-256 of `bytes`.
pub fn sha256_hex(bytes: impl AsRef<[u8]>) -> String {
    hex::encode(Sha256::digest(bytes.as_ref()))
}

/// Incremental hasher that separates fields so `("ab", "c")` and
/// `("a", "bc")` never collide.
#[derive(Default)]
pub struct FieldHasher {
    inner: Sha256,
}

impl FieldHasher {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn field(&mut self, bytes: impl AsRef<[u8]>) -> &mut Self {
        let bytes = bytes.as_ref();
        self.inner.update((bytes.len() as u64).to_le_bytes());
        self.inner.update(bytes);
        self
    }

    pub fn finish_hex(self) -> String {
        hex::encode(self.inner.finalize())
    }

    /// First `n` bytes of the digest, hex encoded.
    pub fn finish_short(self, n: usize) -> String {
        let full = self.inner.finalize();
        hex::encode(&full[..n.min(full.len())])
    }
}
