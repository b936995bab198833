//! Stable content hashes used for cache keys, fingerprints and digests.

use serde::Serialize;
use sha2::{Digest, Sha256};

/// Hex-encoded SHA-256 of `bytes`.
pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

/// Short key for a URL, used as the file stem of per-article records.
pub fn url_key(url: &str) -> String {
    sha256_hex(url.as_bytes())[..16].to_string()
}

/// Canonical JSON: object keys sorted, no insignificant whitespace.
///
/// `serde_json::Value` keeps objects in a `BTreeMap`, so converting through
/// `Value` sorts keys at every level.
pub fn canonical_json<T: Serialize>(value: &T) -> serde_json::Result<String> {
    let v = serde_json::to_value(value)?;
    serde_json::to_string(&v)
}

/// SHA-256 of the canonical JSON form of `value`.
pub fn digest<T: Serialize>(value: &T) -> serde_json::Result<String> {
    Ok(sha256_hex(canonical_json(value)?.as_bytes()))
}

/// Hash of a sequence of floats by their exact bit patterns.
pub fn hash_f64s<'a>(parts: impl IntoIterator<Item = &'a [f64]>) -> String {
    let mut h = Sha256::new();
    for part in parts {
        h.update((part.len() as u64).to_le_bytes());
        for v in part {
            h.update(v.to_bits().to_le_bytes());
        }
    }
    hex::encode(h.finalize())
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::collections::HashMap;

    #[test]
    fn canonical_json_ignores_key_order() {
        let mut a = HashMap::new();
        a.insert("b", 1);
        a.insert("a", 2);
        let mut b = HashMap::new();
        b.insert("a", 2);
        b.insert("b", 1);
        assert_eq!(canonical_json(&a).unwrap(), canonical_json(&b).unwrap());
        assert_eq!(canonical_json(&a).unwrap(), r#"{"a":2,"b":1}"#);
    }

    #[test]
    fn url_key_is_sixteen_hex_chars() {
        let k = url_key("https://example.com/a");
        assert_eq!(k.len(), 16);
        assert!(k.chars().all(|c| c.is_ascii_hexdigit()));
        assert_ne!(k, url_key("https://example.com/b"));
    }

    #[test]
    fn float_hash_distinguishes_signed_zero() {
        assert_ne!(hash_f64s([&[0.0][..]]), hash_f64s([&[-0.0][..]]));
    }
}
