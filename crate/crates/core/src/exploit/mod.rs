//! What a single random bit flip is worth against DNS zones, OCSP responder
//! databases and RSA public-key stores.

mod dns;
mod keystore;
mod ocsp;
mod rsa;

use serde::{Deserialize, Serialize};

pub use dns::{
    canonicalize_domain, enumerate_dns_bitsquats, is_valid_domain, parse_zone, public_suffix,
    scan_zone, RecordType, ZoneCandidate, ZoneEntry, ZoneField, MULTI_LABEL_SUFFIXES,
};
pub use keystore::{
    decode_ssh_rsa, diff_key_store, encode_ssh_rsa, parse_key_store, ChangedKey, KeyEntry,
};
pub use ocsp::{
    parse_ocsp_index, scan_ocsp, scan_ocsp_serials, OcspRecord, OcspScan, OcspStatus, StatusFlip,
};
pub use rsa::{
    analyze_key_flip, factorize, is_probable_prime, rsa_modulus_hit_probability, FactorBudget,
    InfeasibleReason, KeyFlipOutcome, KeyLayout, RsaPublicKey,
};

/// What a flip at a given position achieves.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Exploitability {
    /// A different, registrable domain name.
    Bitsquat,
    /// A revoked certificate reads as valid.
    RevokedToValid,
    /// A valid certificate reads as revoked (denial of service).
    ValidToRevoked,
    /// A revoked certificate's serial no longer matches: status "unknown".
    SerialUnknown,
}

/// A single-bit change of a serialized value.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct FlipCandidate {
    /// Byte offset of the flipped byte in the scanned input.
    pub offset: usize,
    /// Bit index within the byte, 0 = least significant.
    pub bit: u8,
    pub original: String,
    pub flipped: String,
    pub class: Exploitability,
}
