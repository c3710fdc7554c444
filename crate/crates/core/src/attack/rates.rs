//! Packet-rate and access-rate arithmetic.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::profile::PacketProfile;
use crate::error::{Error, Result};

/// How unit prefixes in a bandwidth are read.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PrefixConvention {
    /// k = 2^10, M = 2^20, G = 2^30.
    #[default]
    Binary,
    /// k = 10^3, M = 10^6, G = 10^9.
    Decimal,
}

impl FromStr for PrefixConvention {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "binary" => Ok(PrefixConvention::Binary),
            "decimal" => Ok(PrefixConvention::Decimal),
            other => Err(Error::InvalidInput(format!(
                "unknown prefix convention `{other}` (binary|decimal)"
            ))),
        }
    }
}

/// A link rate as written by a user, e.g. `500Mbit`. The numeric value
/// depends on the [`PrefixConvention`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub struct Bandwidth {
    pub value: f64,
    /// Power of the prefix: 0 = none, 1 = k, 2 = M, 3 = G, 4 = T.
    pub prefix_power: u32,
}

impl Bandwidth {
    pub fn mbit(value: f64) -> Self {
        Self {
            value,
            prefix_power: 2,
        }
    }

    pub fn bits_per_second(&self, convention: PrefixConvention) -> f64 {
        let base: f64 = match convention {
            PrefixConvention::Binary => 1024.0,
            PrefixConvention::Decimal => 1000.0,
        };
        self.value * base.powi(self.prefix_power as i32)
    }
}

impl FromStr for Bandwidth {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let bad = || {
            Error::InvalidInput(format!(
                "cannot parse bandwidth `{s}`, expected e.g. 500Mbit"
            ))
        };
        let t = s.trim();
        let t = t
            .strip_suffix("/s")
            .or_else(|| t.strip_suffix("ps"))
            .unwrap_or(t);
        let t = t
            .strip_suffix("bit")
            .or_else(|| t.strip_suffix("b"))
            .unwrap_or(t)
            .trim_end();
        let split = t
            .find(|c: char| !(c.is_ascii_digit() || c == '.' || c == 'e' || c == 'E' || c == '+'))
            .unwrap_or(t.len());
        let (num, prefix) = t.split_at(split);
        let value: f64 = num.trim().parse().map_err(|_| bad())?;
        let prefix_power = match prefix.trim() {
            "" => 0,
            "k" | "K" => 1,
            "M" => 2,
            "G" => 3,
            "T" => 4,
            _ => return Err(bad()),
        };
        if !(value.is_finite() && value >= 0.0) {
            return Err(bad());
        }
        Ok(Self {
            value,
            prefix_power,
        })
    }
}

impl TryFrom<String> for Bandwidth {
    type Error = Error;
    fn try_from(s: String) -> Result<Self> {
        s.parse()
    }
}

impl From<Bandwidth> for String {
    fn from(b: Bandwidth) -> String {
        b.to_string()
    }
}

impl fmt::Display for Bandwidth {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let prefix = ["", "k", "M", "G", "T"][self.prefix_power.min(4) as usize];
        write!(f, "{}{}bit", self.value, prefix)
    }
}

/// Frames per second a link of `bandwidth` carries at `frame_bytes` per frame.
pub fn packet_rate(bandwidth: Bandwidth, frame_bytes: u32, convention: PrefixConvention) -> f64 {
    if frame_bytes == 0 {
        return 0.0;
    }
    bandwidth.bits_per_second(convention) / (f64::from(frame_bytes) * 8.0)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AccessRate {
    pub per_second: f64,
    pub per_interval: f64,
}

/// Accesses caused by `function` per second and per refresh interval.
pub fn access_rate(
    pkt_rate: f64,
    profile: &PacketProfile,
    function: &str,
    window_ns: u64,
) -> Result<AccessRate> {
    let f = profile
        .function(function)
        .ok_or_else(|| Error::UnknownFunction(function.to_string()))?;
    Ok(access_rate_for_calls(
        pkt_rate,
        f.calls_per_packet,
        window_ns,
    ))
}

pub fn access_rate_for_calls(pkt_rate: f64, calls_per_packet: u32, window_ns: u64) -> AccessRate {
    let per_second = pkt_rate * f64::from(calls_per_packet);
    AccessRate {
        per_second,
        // multiply first so integral rates stay exact
        per_interval: per_second * window_ns as f64 / 1e9,
    }
}

/// Previously reported minimum activations per refresh interval.
pub const REPORTED_THRESHOLDS: [u64; 3] = [43_000, 110_000, 139_000];

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ThresholdVerdict {
    pub threshold: u64,
    pub feasible: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeasibilityVerdict {
    pub packets_per_s: f64,
    pub accesses_per_s: f64,
    pub accesses_per_refresh_interval: f64,
    pub window_ns: u64,
    pub verdicts: Vec<ThresholdVerdict>,
}

impl FeasibilityVerdict {
    pub fn feasible_against_all(&self) -> bool {
        self.verdicts.iter().all(|v| v.feasible)
    }
}

/// Compares a per-interval access count against each threshold.
pub fn feasibility(per_interval: f64, thresholds: &[u64]) -> Vec<ThresholdVerdict> {
    thresholds
        .iter()
        .map(|&threshold| ThresholdVerdict {
            threshold,
            feasible: per_interval >= threshold as f64,
        })
        .collect()
}

/// The complete rate chain from link speed to threshold verdicts.
pub fn rate_chain(
    bandwidth: Bandwidth,
    frame_bytes: u32,
    convention: PrefixConvention,
    calls_per_packet: u32,
    window_ns: u64,
    thresholds: &[u64],
) -> FeasibilityVerdict {
    let pps = packet_rate(bandwidth, frame_bytes, convention);
    let rate = access_rate_for_calls(pps, calls_per_packet, window_ns);
    FeasibilityVerdict {
        packets_per_s: pps,
        accesses_per_s: rate.per_second,
        accesses_per_refresh_interval: rate.per_interval,
        window_ns,
        verdicts: feasibility(rate.per_interval, thresholds),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::attack::profile::PacketProfile;

    #[test]
    fn five_hundred_mbit_binary() {
        let pps = packet_rate(Bandwidth::mbit(500.0), 64, PrefixConvention::Binary);
        assert_eq!(pps, 1_024_000.0);
        let pps = packet_rate(Bandwidth::mbit(500.0), 64, PrefixConvention::Decimal);
        assert_eq!(pps, 976_562.5);
        let pps = packet_rate(Bandwidth::mbit(100.0), 64, PrefixConvention::Binary);
        assert_eq!(pps, 204_800.0);
        assert_eq!(
            packet_rate(Bandwidth::mbit(0.0), 64, PrefixConvention::Binary),
            0.0
        );
    }

    #[test]
    fn six_calls_per_packet() {
        let p = PacketProfile::builtin("udp-nf-hook").unwrap();
        let r = access_rate(1_024_000.0, &p, "nf_hook_slow", 64_000_000).unwrap();
        assert_eq!(r.per_second, 6_144_000.0);
        assert_eq!(r.per_interval, 393_216.0);

        let r = access_rate(1_024_000.0, &p, "__udp4_lib_lookup", 64_000_000).unwrap();
        assert_eq!(r.per_second, 2_048_000.0);
        assert_eq!(r.per_interval, 131_072.0);

        let r = access_rate(1_024_000.0, &p, "udp_rcv", 64_000_000).unwrap();
        assert_eq!(r.per_interval, 1_024_000.0 * 0.064);

        assert!(matches!(
            access_rate(1.0, &p, "tcp_v4_rcv", 64_000_000),
            Err(Error::UnknownFunction(_))
        ));
    }

    #[test]
    fn verdicts() {
        let all = feasibility(393_216.0, &REPORTED_THRESHOLDS);
        assert!(all.iter().all(|v| v.feasible));
        assert!(feasibility(0.0, &REPORTED_THRESHOLDS)
            .iter()
            .all(|v| !v.feasible));
        let lookup: Vec<bool> = feasibility(131_072.0, &REPORTED_THRESHOLDS)
            .iter()
            .map(|v| v.feasible)
            .collect();
        assert_eq!(lookup, vec![true, true, false]);
    }

    #[test]
    fn bandwidth_parsing() {
        for s in ["500Mbit", "500 Mbit", "500Mbit/s", "500Mbps", "500M"] {
            let b: Bandwidth = s.parse().unwrap();
            assert_eq!(b, Bandwidth::mbit(500.0), "{s}");
        }
        let g: Bandwidth = "1.5Gbit".parse().unwrap();
        assert_eq!(g.bits_per_second(PrefixConvention::Decimal), 1.5e9);
        assert!("fast".parse::<Bandwidth>().is_err());
        assert!("10Xbit".parse::<Bandwidth>().is_err());
    }
}
