//! Flip scanning of an OpenSSL-style certificate index.
//!
//! Grammar, one record per line, fields separated by a single tab:
//!
//! ```text
//! status  expiry  revocation  serial  filename  subject
//! ```
//!
//! `status` is exactly one of `V`, `R`, `E`; `serial` is non-empty hex;
//! the other fields are free text without tabs (and may be empty). Every
//! line, including the last, ends in `\n`.

use std::collections::HashSet;

use serde::{Deserialize, Serialize};

use super::{Exploitability, FlipCandidate};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum OcspStatus {
    #[serde(rename = "V")]
    Valid,
    #[serde(rename = "R")]
    Revoked,
    #[serde(rename = "E")]
    Expired,
}

impl OcspStatus {
    pub fn from_byte(b: u8) -> Option<Self> {
        match b {
            b'V' => Some(OcspStatus::Valid),
            b'R' => Some(OcspStatus::Revoked),
            b'E' => Some(OcspStatus::Expired),
            _ => None,
        }
    }

    pub fn as_byte(self) -> u8 {
        match self {
            OcspStatus::Valid => b'V',
            OcspStatus::Revoked => b'R',
            OcspStatus::Expired => b'E',
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct OcspRecord {
    pub status: OcspStatus,
    pub expiry: String,
    pub revocation: String,
    pub serial: String,
    pub filename: String,
    pub subject: String,
    /// Byte offset of the line (and so of the status byte) in the database.
    pub offset: usize,
    /// Line length including the newline.
    pub len: usize,
}

impl OcspRecord {
    /// Byte offset of the first serial character.
    pub fn serial_offset(&self) -> usize {
        self.offset + 1 + 1 + self.expiry.len() + 1 + self.revocation.len() + 1
    }

    pub fn to_line(&self) -> String {
        format!(
            "{}\t{}\t{}\t{}\t{}\t{}\n",
            self.status.as_byte() as char,
            self.expiry,
            self.revocation,
            self.serial,
            self.filename,
            self.subject
        )
    }
}

/// Parses a whole index.
pub fn parse_ocsp_index(bytes: &[u8]) -> Result<Vec<OcspRecord>> {
    let mut out = Vec::new();
    let mut offset = 0;
    let mut line_no = 0;
    while offset < bytes.len() {
        line_no += 1;
        let err = |msg: &str| Error::Parse {
            line: line_no,
            msg: msg.to_string(),
        };
        let end = bytes[offset..]
            .iter()
            .position(|&b| b == b'\n')
            .map(|p| offset + p)
            .ok_or_else(|| err("missing newline"))?;
        let line = std::str::from_utf8(&bytes[offset..end]).map_err(|_| err("not UTF-8"))?;
        let fields: Vec<&str> = line.split('\t').collect();
        if fields.len() != 6 {
            return Err(err("expected 6 tab-separated fields"));
        }
        let status = match fields[0].as_bytes() {
            [b] => OcspStatus::from_byte(*b),
            _ => None,
        }
        .ok_or_else(|| err("status must be V, R or E"))?;
        let serial = fields[3];
        if serial.is_empty() || !serial.bytes().all(|b| b.is_ascii_hexdigit()) {
            return Err(err("serial must be non-empty hex"));
        }
        out.push(OcspRecord {
            status,
            expiry: fields[1].to_string(),
            revocation: fields[2].to_string(),
            serial: serial.to_string(),
            filename: fields[4].to_string(),
            subject: fields[5].to_string(),
            offset,
            len: end + 1 - offset,
        });
        offset = end + 1;
    }
    Ok(out)
}

/// A status byte whose flip changes the certificate's verdict.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct StatusFlip {
    pub record: usize,
    pub serial: String,
    pub candidate: FlipCandidate,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OcspScan {
    pub records: usize,
    pub total_bytes: usize,
    /// Flips turning a revoked certificate valid.
    pub exploitable: Vec<StatusFlip>,
    /// Flips turning a valid certificate revoked.
    pub denial_of_service: Vec<StatusFlip>,
    /// `exploitable / (8 * total_bytes)`.
    pub probability: f64,
    pub dos_probability: f64,
}

/// `R` and `V` differ only in bit 2.
const STATUS_BIT: u8 = 2;

fn status_flip(i: usize, r: &OcspRecord, to: OcspStatus, class: Exploitability) -> StatusFlip {
    StatusFlip {
        record: i,
        serial: r.serial.clone(),
        candidate: FlipCandidate {
            offset: r.offset,
            bit: STATUS_BIT,
            original: (r.status.as_byte() as char).to_string(),
            flipped: (to.as_byte() as char).to_string(),
            class,
        },
    }
}

/// Positions whose single-bit flip changes a certificate's status.
pub fn scan_ocsp(db: &[u8]) -> Result<OcspScan> {
    let records = parse_ocsp_index(db)?;
    let mut exploitable = Vec::new();
    let mut dos = Vec::new();
    for (i, r) in records.iter().enumerate() {
        match r.status {
            OcspStatus::Revoked => exploitable.push(status_flip(
                i,
                r,
                OcspStatus::Valid,
                Exploitability::RevokedToValid,
            )),
            OcspStatus::Valid => dos.push(status_flip(
                i,
                r,
                OcspStatus::Revoked,
                Exploitability::ValidToRevoked,
            )),
            OcspStatus::Expired => {}
        }
    }
    let bits = 8.0 * db.len() as f64;
    let ratio = |n: usize| if db.is_empty() { 0.0 } else { n as f64 / bits };
    Ok(OcspScan {
        records: records.len(),
        total_bytes: db.len(),
        probability: ratio(exploitable.len()),
        dos_probability: ratio(dos.len()),
        exploitable,
        denial_of_service: dos,
    })
}

/// Flips inside the serial of a revoked record that keep the line well
/// formed but make the serial match no record: the responder then answers
/// "unknown". Serials compare case-insensitively.
pub fn scan_ocsp_serials(db: &[u8]) -> Result<Vec<StatusFlip>> {
    let records = parse_ocsp_index(db)?;
    let known: HashSet<String> = records
        .iter()
        .map(|r| r.serial.to_ascii_uppercase())
        .collect();
    let mut out = Vec::new();
    for (i, r) in records.iter().enumerate() {
        if r.status != OcspStatus::Revoked {
            continue;
        }
        let base = r.serial_offset();
        for (j, b) in r.serial.bytes().enumerate() {
            for bit in 0..8u8 {
                let f = b ^ (1 << bit);
                if !f.is_ascii_hexdigit() {
                    continue;
                }
                let mut s = r.serial.clone().into_bytes();
                s[j] = f;
                let flipped = String::from_utf8(s).expect("hex is ascii");
                if known.contains(&flipped.to_ascii_uppercase()) {
                    continue;
                }
                out.push(StatusFlip {
                    record: i,
                    serial: r.serial.clone(),
                    candidate: FlipCandidate {
                        offset: base + j,
                        bit,
                        original: r.serial.clone(),
                        flipped,
                        class: Exploitability::SerialUnknown,
                    },
                });
            }
        }
    }
    Ok(out)
}
