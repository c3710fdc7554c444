//! Bitsquat enumeration for domain names and simplified zone files.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::{Exploitability, FlipCandidate};
use crate::error::{Error, Result};

/// Public suffixes made of more than one label. Any other name's suffix is
/// its last label.
pub const MULTI_LABEL_SUFFIXES: [&str; 7] = [
    "co.uk", "org.uk", "ac.uk", "com.au", "co.jp", "co.nz", "com.br",
];

const MAX_DOMAIN_LEN: usize = 253;
const MAX_LABEL_LEN: usize = 63;

fn valid_label(label: &str) -> bool {
    let b = label.as_bytes();
    !b.is_empty()
        && b.len() <= MAX_LABEL_LEN
        && b.iter().all(|c| c.is_ascii_alphanumeric() || *c == b'-')
        && b[0] != b'-'
        && b[b.len() - 1] != b'-'
}

/// Letters-digits-hyphen labels, at least two of them, case-insensitive.
pub fn is_valid_domain(name: &str) -> bool {
    name.len() <= MAX_DOMAIN_LEN && name.split('.').count() >= 2 && name.split('.').all(valid_label)
}

/// Lower-cases `name`, drops one trailing dot and checks the label rules.
pub fn canonicalize_domain(name: &str) -> Result<String> {
    let trimmed = name.trim();
    let trimmed = trimmed.strip_suffix('.').unwrap_or(trimmed);
    let canon = trimmed.to_ascii_lowercase();
    if !is_valid_domain(&canon) {
        return Err(Error::InvalidInput(format!(
            "`{name}` is not a valid domain name"
        )));
    }
    Ok(canon)
}

/// The public-suffix part of a canonical name.
pub fn public_suffix(domain: &str) -> &str {
    for s in MULTI_LABEL_SUFFIXES {
        if domain == s {
            return domain;
        }
        if let Some(head) = domain.strip_suffix(s) {
            if head.ends_with('.') {
                return &domain[domain.len() - s.len()..];
            }
        }
    }
    domain.rsplit('.').next().unwrap_or(domain)
}

/// Every single-bit flip of `domain` that yields a different valid domain
/// with the same public suffix.
///
/// Only bytes before the dot that starts the suffix are flipped. Flips that
/// create or remove dots are kept when the result is still valid; flips
/// that only change letter case are not, since they name the same domain.
pub fn enumerate_dns_bitsquats(domain: &str) -> Result<Vec<FlipCandidate>> {
    let canon = canonicalize_domain(domain)?;
    let suffix_len = public_suffix(&canon).len();
    if suffix_len + 1 >= canon.len() {
        return Err(Error::InvalidInput(format!(
            "`{canon}` has no label below its public suffix"
        )));
    }
    let mutable = canon.len() - suffix_len - 1;
    let bytes = canon.as_bytes();
    let mut out = Vec::new();
    for offset in 0..mutable {
        for bit in 0..8u8 {
            let flipped_byte = bytes[offset] ^ (1 << bit);
            if !flipped_byte.is_ascii() {
                continue;
            }
            let mut v = bytes.to_vec();
            v[offset] = flipped_byte;
            let flipped = String::from_utf8(v).expect("ascii");
            if is_valid_domain(&flipped) && flipped.to_ascii_lowercase() != canon {
                out.push(FlipCandidate {
                    offset,
                    bit,
                    original: canon.clone(),
                    flipped,
                    class: Exploitability::Bitsquat,
                });
            }
        }
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum RecordType {
    A,
    #[serde(rename = "MX")]
    Mx,
    #[serde(rename = "CNAME")]
    Cname,
}

impl FromStr for RecordType {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_uppercase().as_str() {
            "A" => Ok(RecordType::A),
            "MX" => Ok(RecordType::Mx),
            "CNAME" => Ok(RecordType::Cname),
            other => Err(Error::InvalidInput(format!(
                "unsupported record type `{other}`"
            ))),
        }
    }
}

impl fmt::Display for RecordType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            RecordType::A => "A",
            RecordType::Mx => "MX",
            RecordType::Cname => "CNAME",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ZoneEntry {
    pub name: String,
    pub record_type: RecordType,
    /// For MX records an optional preference may precede the host name.
    pub value: String,
}

impl ZoneEntry {
    /// Host name an MX record points to.
    pub fn mx_host(&self) -> Option<&str> {
        (self.record_type == RecordType::Mx).then(|| {
            self.value
                .split_whitespace()
                .last()
                .unwrap_or(self.value.as_str())
        })
    }
}

/// Parses `name type value` lines. Blank lines and lines starting with `#`
/// or `;` are skipped.
pub fn parse_zone(text: &str) -> Result<Vec<ZoneEntry>> {
    let mut out = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') || line.starts_with(';') {
            continue;
        }
        let parse_err = |msg: String| Error::Parse { line: i + 1, msg };
        let mut parts = line.splitn(3, char::is_whitespace);
        let (Some(name), Some(ty), Some(value)) = (parts.next(), parts.next(), parts.next()) else {
            return Err(parse_err("expected `name type value`".into()));
        };
        let name = canonicalize_domain(name).map_err(|e| parse_err(e.to_string()))?;
        let record_type: RecordType = ty
            .trim()
            .parse()
            .map_err(|e: Error| parse_err(e.to_string()))?;
        out.push(ZoneEntry {
            name,
            record_type,
            value: value.trim().to_string(),
        });
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ZoneField {
    Name,
    MxHost,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ZoneCandidate {
    pub entry: usize,
    pub field: ZoneField,
    pub candidate: FlipCandidate,
}

/// Bitsquats of every record name and every MX target in a zone.
pub fn scan_zone(entries: &[ZoneEntry]) -> Result<Vec<ZoneCandidate>> {
    let mut out = Vec::new();
    for (i, e) in entries.iter().enumerate() {
        let mut push = |field, domain: &str| -> Result<()> {
            for candidate in enumerate_dns_bitsquats(domain)? {
                out.push(ZoneCandidate {
                    entry: i,
                    field,
                    candidate,
                });
            }
            Ok(())
        };
        push(ZoneField::Name, &e.name)?;
        if let Some(host) = e.mx_host() {
            push(ZoneField::MxHost, host)?;
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn domain_com_yields_dnmain() {
        let c = enumerate_dns_bitsquats("domain.com").unwrap();
        let names: Vec<&str> = c.iter().map(|c| c.flipped.as_str()).collect();
        assert!(names.contains(&"dnmain.com"));
        assert!(!names.contains(&"dOmain.com"));
        assert!(names.iter().all(|n| n.ends_with(".com")));
    }

    #[test]
    fn single_letter_label() {
        let got: Vec<String> = enumerate_dns_bitsquats("a.com")
            .unwrap()
            .into_iter()
            .map(|c| c.flipped)
            .collect();
        // 'a' = 0x61: bit 0 '`', bit 1 'c', bit 2 'e', bit 3 'i', bit 4 'q',
        // bit 5 'A' (same name), bit 6 '!', bit 7 non-ASCII.
        assert_eq!(got, vec!["c.com", "e.com", "i.com", "q.com"]);
    }

    #[test]
    fn suffix_untouched() {
        let c = enumerate_dns_bitsquats("bank.co.uk").unwrap();
        assert!(c
            .iter()
            .all(|c| c.flipped.ends_with(".co.uk") && c.offset < 4));
        assert_eq!(public_suffix("bank.co.uk"), "co.uk");
        assert_eq!(public_suffix("www.bank.com"), "com");
        assert!(enumerate_dns_bitsquats("co.uk").is_err());
    }

    #[test]
    fn rejects_invalid() {
        for d in ["", "com", "-a.com", "a-.com", "a..com", "a_b.com"] {
            assert!(enumerate_dns_bitsquats(d).is_err(), "{d}");
        }
        assert_eq!(canonicalize_domain("Domain.COM.").unwrap(), "domain.com");
    }

    #[test]
    fn zone_parsing() {
        let z = parse_zone("# zone\nexample.com A 192.0.2.1\nexample.com MX 10 mail.example.com\n")
            .unwrap();
        assert_eq!(z.len(), 2);
        assert_eq!(z[1].mx_host(), Some("mail.example.com"));
        let hits = scan_zone(&z).unwrap();
        assert!(hits
            .iter()
            .any(|h| h.field == ZoneField::MxHost && h.candidate.flipped == "mail.dxample.com"));
        assert!(matches!(
            parse_zone("x.com TXT hi"),
            Err(Error::Parse { line: 1, .. })
        ));
    }
}
