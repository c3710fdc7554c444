//! Authorized-keys style listings and bit-level diffs between two snapshots.

use std::collections::BTreeMap;

use base64::engine::general_purpose::STANDARD;
use base64::Engine;
use num_bigint::BigUint;
use serde::Serialize;

use super::rsa::RsaPublicKey;
use crate::error::{Error, Result};

/// One `type base64-blob user` line.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct KeyEntry {
    pub user: String,
    pub key_type: String,
    #[serde(serialize_with = "ser_b64")]
    pub blob: Vec<u8>,
}

fn ser_b64<S: serde::Serializer>(v: &[u8], s: S) -> std::result::Result<S::Ok, S::Error> {
    s.serialize_str(&STANDARD.encode(v))
}

impl KeyEntry {
    /// The RSA key in the blob, when it is a well-formed `ssh-rsa` blob.
    pub fn rsa(&self) -> Option<RsaPublicKey> {
        decode_ssh_rsa(&self.blob).ok().map(|(key, _)| key)
    }
}

/// Parses a listing. Blank lines and `#` comments are skipped; the comment
/// field of each key line is the user id and must be unique.
pub fn parse_key_store(text: &str) -> Result<Vec<KeyEntry>> {
    let mut out: Vec<KeyEntry> = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let err = |msg: String| Error::Parse { line: i + 1, msg };
        let mut parts = line.split_whitespace();
        let (Some(key_type), Some(b64), Some(user)) = (parts.next(), parts.next(), parts.next())
        else {
            return Err(err("expected `type base64 user`".into()));
        };
        let blob = STANDARD
            .decode(b64)
            .map_err(|e| err(format!("bad base64: {e}")))?;
        if out.iter().any(|k| k.user == user) {
            return Err(err(format!("duplicate user `{user}`")));
        }
        out.push(KeyEntry {
            user: user.to_string(),
            key_type: key_type.to_string(),
            blob,
        });
    }
    Ok(out)
}

fn put_string(out: &mut Vec<u8>, s: &[u8]) {
    out.extend_from_slice(&(s.len() as u32).to_be_bytes());
    out.extend_from_slice(s);
}

fn put_mpint(out: &mut Vec<u8>, n: &BigUint) {
    let mut bytes = if n.bits() == 0 {
        Vec::new()
    } else {
        n.to_bytes_be()
    };
    if bytes.first().is_some_and(|b| b & 0x80 != 0) {
        bytes.insert(0, 0);
    }
    put_string(out, &bytes);
}

/// The `ssh-rsa` wire blob: string type, mpint e, mpint n.
pub fn encode_ssh_rsa(key: &RsaPublicKey) -> Vec<u8> {
    let mut out = Vec::new();
    put_string(&mut out, b"ssh-rsa");
    put_mpint(&mut out, &key.e);
    put_mpint(&mut out, &key.n);
    out
}

fn take_string<'a>(blob: &'a [u8], pos: &mut usize) -> Result<&'a [u8]> {
    let bad = || Error::InvalidInput("truncated ssh key blob".into());
    let len_bytes: [u8; 4] = blob
        .get(*pos..*pos + 4)
        .ok_or_else(bad)?
        .try_into()
        .expect("4 bytes");
    let len = u32::from_be_bytes(len_bytes) as usize;
    let start = *pos + 4;
    let s = blob.get(start..start + len).ok_or_else(bad)?;
    *pos = start + len;
    Ok(s)
}

/// Decodes an `ssh-rsa` blob. Also returns the byte range of the modulus
/// mpint contents within the blob.
pub fn decode_ssh_rsa(blob: &[u8]) -> Result<(RsaPublicKey, std::ops::Range<usize>)> {
    let mut pos = 0;
    if take_string(blob, &mut pos)? != b"ssh-rsa" {
        return Err(Error::InvalidInput("not an ssh-rsa key".into()));
    }
    let e = BigUint::from_bytes_be(take_string(blob, &mut pos)?);
    let n_start = pos + 4;
    let n = BigUint::from_bytes_be(take_string(blob, &mut pos)?);
    if pos != blob.len() {
        return Err(Error::InvalidInput(
            "trailing bytes after ssh-rsa key".into(),
        ));
    }
    Ok((RsaPublicKey::new(n, e)?, n_start..pos))
}

/// A key whose serialized form differs between two snapshots.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct ChangedKey {
    pub user: String,
    /// Differing (byte offset, bit) pairs within the blob.
    pub bit_diffs: Vec<(usize, u8)>,
    pub length_changed: bool,
    /// Bit index of the modulus, when the blob differs in exactly one bit
    /// and that bit lies inside the modulus of a decodable key.
    pub modulus_bit: Option<u32>,
}

/// Keys present in both snapshots whose blobs differ, ordered by user id.
pub fn diff_key_store(before: &[KeyEntry], after: &[KeyEntry]) -> Vec<ChangedKey> {
    let after: BTreeMap<&str, &KeyEntry> = after.iter().map(|k| (k.user.as_str(), k)).collect();
    let mut before: Vec<&KeyEntry> = before.iter().collect();
    before.sort_by(|a, b| a.user.cmp(&b.user));
    let mut out = Vec::new();
    for old in before {
        let Some(new) = after.get(old.user.as_str()) else {
            continue;
        };
        if old.blob == new.blob && old.key_type == new.key_type {
            continue;
        }
        let bit_diffs: Vec<(usize, u8)> = old
            .blob
            .iter()
            .zip(&new.blob)
            .enumerate()
            .flat_map(|(i, (a, b))| {
                let x = a ^ b;
                (0..8u8)
                    .filter(move |bit| x & (1 << bit) != 0)
                    .map(move |bit| (i, bit))
            })
            .collect();
        let length_changed = old.blob.len() != new.blob.len();
        let modulus_bit = match (bit_diffs.as_slice(), length_changed) {
            ([(offset, bit)], false) => decode_ssh_rsa(&old.blob).ok().and_then(|(_, range)| {
                range
                    .contains(offset)
                    .then(|| ((range.end - 1 - offset) * 8) as u32 + u32::from(*bit))
            }),
            _ => None,
        };
        out.push(ChangedKey {
            user: old.user.clone(),
            bit_diffs,
            length_changed,
            modulus_bit,
        });
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn entry(user: &str, n: u64) -> KeyEntry {
        let key = RsaPublicKey::new(BigUint::from(n), BigUint::from(65_537u32)).unwrap();
        KeyEntry {
            user: user.into(),
            key_type: "ssh-rsa".into(),
            blob: encode_ssh_rsa(&key),
        }
    }

    #[test]
    fn blob_round_trip() {
        let e = entry("alice", 0xc000_0000_0000_0001);
        let (key, range) = decode_ssh_rsa(&e.blob).unwrap();
        assert_eq!(key.n, BigUint::from(0xc000_0000_0000_0001u64));
        // high bit set: the mpint carries a leading zero byte
        assert_eq!(e.blob[range.start], 0);
        assert_eq!(range.len(), 9);
        let line = format!("ssh-rsa {} alice\n", STANDARD.encode(&e.blob));
        assert_eq!(parse_key_store(&line).unwrap(), vec![e]);
    }

    #[test]
    fn identical_stores() {
        let s = vec![entry("a", 0xffff_0001), entry("b", 0xffff_0003)];
        assert!(diff_key_store(&s, &s).is_empty());
    }

    #[test]
    fn one_modulus_bit() {
        let before = vec![entry("a", 0xffff_0001), entry("b", 0xffff_0003)];
        let mut after = before.clone();
        let (_, range) = decode_ssh_rsa(&after[1].blob).unwrap();
        after[1].blob[range.end - 2] ^= 1 << 3;
        let d = diff_key_store(&before, &after);
        assert_eq!(d.len(), 1);
        assert_eq!(d[0].user, "b");
        assert_eq!(d[0].bit_diffs, vec![(range.end - 2, 3)]);
        assert_eq!(d[0].modulus_bit, Some(11));
        let flipped = after[1].rsa().unwrap();
        assert_eq!(flipped.n, BigUint::from(0xffff_0003u64 ^ (1 << 11)));
    }

    #[test]
    fn parse_errors() {
        assert!(matches!(
            parse_key_store("ssh-rsa AAAA\n"),
            Err(Error::Parse { line: 1, .. })
        ));
        assert!(parse_key_store("ssh-rsa !!! u\n").is_err());
    }
}
