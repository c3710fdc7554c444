//! Per-packet memory-access profiles of the receive path.

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// How an address escapes the cache when the attack bypasses it.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Bypass {
    /// The driver invalidates the line before touching it.
    Flushed,
    /// The address lives in uncached memory.
    Uncached,
    #[default]
    Cacheable,
}

/// One kernel function touched while a packet is handled.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FunctionAccess {
    pub label: String,
    /// Every address is loaded once per call.
    pub addresses: Vec<u64>,
    pub calls_per_packet: u32,
    /// Applies to all of this function's addresses.
    #[serde(default)]
    pub bypass: Bypass,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PacketProfile {
    pub functions: Vec<FunctionAccess>,
}

/// UDP receive-path functions and their calls per packet.
const UDP_FUNCCOUNT: [(&str, u32); 11] = [
    ("__udp4_lib_lookup", 2),
    ("__udp4_lib_rcv", 1),
    ("udp4_gro_receive", 1),
    ("udp4_lib_lookup_skb", 1),
    ("udp_error", 1),
    ("udp_get_timeouts", 1),
    ("udp_gro_receive", 1),
    ("udp_packet", 1),
    ("udp_pkt_to_tuple", 1),
    ("udp_rcv", 1),
    ("udp_v4_early_demux", 1),
];

/// Base of the synthetic kernel layout used by the built-in profiles.
pub const SYNTHETIC_KERNEL_BASE: u64 = 0x2_0000_0000;
/// Distance between consecutive synthetic function addresses (2 MiB).
pub const SYNTHETIC_KERNEL_STRIDE: u64 = 0x20_0000;

pub const BUILTIN_PROFILES: [&str; 2] = ["udp-funccount", "udp-nf-hook"];

impl PacketProfile {
    /// Built-in profiles:
    ///
    /// * `udp-funccount`: the 11 UDP receive functions, `__udp4_lib_lookup`
    ///   twice per packet, 12 accesses in total, all cacheable.
    /// * `udp-nf-hook`: the same plus `nf_hook_slow` called 6 times per packet
    ///   on an address the driver flushes.
    pub fn builtin(name: &str) -> Result<Self> {
        let mut functions: Vec<FunctionAccess> = UDP_FUNCCOUNT
            .iter()
            .enumerate()
            .map(|(i, &(label, calls))| FunctionAccess {
                label: label.to_string(),
                addresses: vec![synthetic_address(i)],
                calls_per_packet: calls,
                bypass: Bypass::Cacheable,
            })
            .collect();
        match name {
            "udp-funccount" => {}
            "udp-nf-hook" => functions.push(FunctionAccess {
                label: "nf_hook_slow".to_string(),
                addresses: vec![synthetic_address(UDP_FUNCCOUNT.len())],
                calls_per_packet: 6,
                bypass: Bypass::Flushed,
            }),
            other => {
                return Err(Error::config(
                    "attack.profile",
                    format!(
                        "unknown profile `{other}` (known: {})",
                        BUILTIN_PROFILES.join(", ")
                    ),
                ))
            }
        }
        Ok(Self { functions })
    }

    pub fn validate(&self) -> Result<()> {
        let mut seen = BTreeSet::new();
        for f in &self.functions {
            let key = format!("attack.functions.{}", f.label);
            if f.calls_per_packet == 0 {
                return Err(Error::config(key, "calls_per_packet must be at least 1"));
            }
            if f.addresses.is_empty() {
                return Err(Error::config(key, "address set must not be empty"));
            }
            if !seen.insert(f.label.as_str()) {
                return Err(Error::config(key, "duplicate function label"));
            }
        }
        Ok(())
    }

    pub fn function(&self, label: &str) -> Option<&FunctionAccess> {
        self.functions.iter().find(|f| f.label == label)
    }

    pub fn function_mut(&mut self, label: &str) -> Option<&mut FunctionAccess> {
        self.functions.iter_mut().find(|f| f.label == label)
    }

    /// Loads issued per packet, ignoring cache effects.
    pub fn accesses_per_packet(&self) -> u64 {
        self.functions
            .iter()
            .map(|f| u64::from(f.calls_per_packet) * f.addresses.len() as u64)
            .sum()
    }
}

fn synthetic_address(i: usize) -> u64 {
    // same set index in every slice, so a restricted LLC has to evict among them
    SYNTHETIC_KERNEL_BASE + i as u64 * SYNTHETIC_KERNEL_STRIDE
}
