use serde::{Deserialize, Serialize};

use super::profile::{Bypass, PacketProfile};

/// Cache-bypass mechanism that gets the hammered loads to DRAM.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BypassMode {
    /// The driver flushes annotated lines before using them.
    #[default]
    FlushDriver,
    /// Annotated addresses are mapped uncached.
    Uncached,
    /// Everything is cacheable; eviction comes from a way-restricted LLC.
    CatEviction,
}

impl BypassMode {
    pub fn as_str(self) -> &'static str {
        match self {
            BypassMode::FlushDriver => "flush_driver",
            BypassMode::Uncached => "uncached",
            BypassMode::CatEviction => "cat_eviction",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(tag = "op", rename_all = "snake_case")]
pub enum TraceOp {
    Invalidate { addr: u64 },
    Access { addr: u64, uncached: bool },
}

/// Memory operations issued while handling one packet.
///
/// Functions are visited in profile order; each call loads every address of
/// the function once. Every packet yields the same sequence, so
/// `packet_index` only labels the packet.
pub fn build_trace(profile: &PacketProfile, mode: BypassMode, packet_index: u64) -> Vec<TraceOp> {
    let _ = packet_index;
    let mut ops = Vec::new();
    for f in &profile.functions {
        for _ in 0..f.calls_per_packet {
            for &addr in &f.addresses {
                match (mode, f.bypass) {
                    (BypassMode::FlushDriver, Bypass::Flushed) => {
                        ops.push(TraceOp::Invalidate { addr });
                        ops.push(TraceOp::Access {
                            addr,
                            uncached: false,
                        });
                    }
                    (BypassMode::Uncached, Bypass::Flushed | Bypass::Uncached) => {
                        ops.push(TraceOp::Access {
                            addr,
                            uncached: true,
                        })
                    }
                    _ => ops.push(TraceOp::Access {
                        addr,
                        uncached: false,
                    }),
                }
            }
        }
    }
    ops
}

/// Traces of `packets` consecutive packets, concatenated.
pub fn build_traces(profile: &PacketProfile, mode: BypassMode, packets: u64) -> Vec<TraceOp> {
    (0..packets)
        .flat_map(|i| build_trace(profile, mode, i))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::attack::profile::FunctionAccess;

    fn one_flushed() -> PacketProfile {
        PacketProfile {
            functions: vec![FunctionAccess {
                label: "f".into(),
                addresses: vec![0x1000],
                calls_per_packet: 1,
                bypass: Bypass::Flushed,
            }],
        }
    }

    #[test]
    fn flush_mode_invalidates_then_loads() {
        assert_eq!(
            build_trace(&one_flushed(), BypassMode::FlushDriver, 0),
            vec![
                TraceOp::Invalidate { addr: 0x1000 },
                TraceOp::Access {
                    addr: 0x1000,
                    uncached: false
                }
            ]
        );
    }

    #[test]
    fn uncached_mode_marks_annotated_addresses() {
        assert_eq!(
            build_trace(&one_flushed(), BypassMode::Uncached, 0),
            vec![TraceOp::Access {
                addr: 0x1000,
                uncached: true
            }]
        );
        assert_eq!(
            build_trace(&one_flushed(), BypassMode::CatEviction, 0),
            vec![TraceOp::Access {
                addr: 0x1000,
                uncached: false
            }]
        );
    }

    #[test]
    fn funccount_profile_trace_length() {
        let p = PacketProfile::builtin("udp-funccount").unwrap();
        assert_eq!(build_trace(&p, BypassMode::CatEviction, 7).len(), 12);
        assert_eq!(
            build_traces(&p, BypassMode::CatEviction, 1000).len(),
            12_000
        );
    }
}
