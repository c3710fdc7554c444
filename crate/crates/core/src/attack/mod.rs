//! Packet profiles, rate arithmetic, trace construction and the end-to-end
//! attack simulation.

mod pattern;
mod profile;
mod rates;
mod sim;
mod trace;

pub use pattern::{pattern_addresses, HammerPattern};
pub use profile::{
    Bypass, FunctionAccess, PacketProfile, BUILTIN_PROFILES, SYNTHETIC_KERNEL_BASE,
    SYNTHETIC_KERNEL_STRIDE,
};
pub use rates::{
    access_rate, access_rate_for_calls, feasibility, packet_rate, rate_chain, AccessRate,
    Bandwidth, FeasibilityVerdict, PrefixConvention, ThresholdVerdict, REPORTED_THRESHOLDS,
};
pub use sim::{
    hammered_location, simulate, simulate_with, sweep, AccessRecord, Arrival, AttackConfig,
    DutyCycle, FlipRecord, SimConfig, SimOptions, SimReport, SweepPoint,
};
pub use trace::{build_trace, build_traces, BypassMode, TraceOp};
