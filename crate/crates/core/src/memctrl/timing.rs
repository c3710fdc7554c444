use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Row-buffer outcome of one DRAM access.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AccessClass {
    RowHit,
    PageEmpty,
    RowConflict,
}

impl AccessClass {
    pub fn as_str(self) -> &'static str {
        match self {
            AccessClass::RowHit => "row_hit",
            AccessClass::PageEmpty => "page_empty",
            AccessClass::RowConflict => "row_conflict",
        }
    }

    /// Whether this access had to open a row.
    pub fn activates(self) -> bool {
        self != AccessClass::RowHit
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct AccessOutcome {
    pub class: AccessClass,
    /// CPU cycles.
    pub latency: u64,
}

/// DRAM timings and the clocks used to express them in CPU cycles.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TimingConfig {
    /// Pre-charge to activate, in DRAM clock cycles.
    pub t_rp: u32,
    /// Activate to column select, in DRAM clock cycles.
    pub t_rcd: u32,
    /// Latency of a row hit in CPU cycles.
    pub base_hit_latency: u64,
    pub transfer_rate_mts: f64,
    pub double_clocked: bool,
    pub cpu_freq_hz: f64,
}

impl Default for TimingConfig {
    /// DDR4-2133 CL15 behind a 2.1 GHz core.
    fn default() -> Self {
        Self {
            t_rp: 15,
            t_rcd: 15,
            base_hit_latency: 180,
            transfer_rate_mts: 2133.0,
            double_clocked: true,
            cpu_freq_hz: 2.1e9,
        }
    }
}

impl TimingConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.transfer_rate_mts > 0.0 && self.transfer_rate_mts.is_finite()) {
            return Err(Error::config(
                "timing.transfer_rate_mts",
                "must be positive",
            ));
        }
        if !(self.cpu_freq_hz > 0.0 && self.cpu_freq_hz.is_finite()) {
            return Err(Error::config("timing.cpu_freq_hz", "must be positive"));
        }
        Ok(())
    }

    /// Command clock in Hz; DDR transfers twice per clock.
    pub fn dram_clock_hz(&self) -> f64 {
        let rate = self.transfer_rate_mts * 1e6;
        if self.double_clocked {
            rate / 2.0
        } else {
            rate
        }
    }

    /// DRAM cycles to nanoseconds.
    pub fn dram_cycles_to_ns(&self, cycles: u32) -> f64 {
        f64::from(cycles) / self.dram_clock_hz() * 1e9
    }

    /// DRAM cycles to CPU cycles, rounded up.
    pub fn dram_cycles_to_cpu(&self, cycles: u32) -> u64 {
        if cycles == 0 {
            return 0;
        }
        let x = f64::from(cycles) * self.cpu_freq_hz / self.dram_clock_hz();
        // a ratio that is integral in exact arithmetic may land one ulp above
        let r = x.round();
        if (x - r).abs() <= 1e-9 * r.max(1.0) {
            r as u64
        } else {
            x.ceil() as u64
        }
    }

    /// Extra DRAM cycles an access class pays over a row hit.
    pub fn extra_dram_cycles(&self, class: AccessClass) -> u32 {
        match class {
            AccessClass::RowHit => 0,
            AccessClass::PageEmpty => self.t_rp,
            AccessClass::RowConflict => self.t_rp + self.t_rcd,
        }
    }
}

/// Observed latency of an access class in CPU cycles.
pub fn latency_cycles(class: AccessClass, timing: &TimingConfig) -> u64 {
    timing.base_hit_latency + timing.dram_cycles_to_cpu(timing.extra_dram_cycles(class))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_timings_collapse_to_base() {
        let t = TimingConfig {
            t_rp: 0,
            t_rcd: 0,
            ..TimingConfig::default()
        };
        for c in [
            AccessClass::RowHit,
            AccessClass::PageEmpty,
            AccessClass::RowConflict,
        ] {
            assert_eq!(latency_cycles(c, &t), t.base_hit_latency);
        }
    }

    #[test]
    fn ddr4_2133_at_4ghz() {
        let t = TimingConfig {
            t_rp: 14,
            t_rcd: 14,
            base_hit_latency: 0,
            transfer_rate_mts: 2133.0,
            double_clocked: true,
            cpu_freq_hz: 4e9,
        };
        assert!((t.dram_clock_hz() - 1066.5e6).abs() < 1e-3);
        assert!((t.dram_cycles_to_ns(14) - 13.127).abs() < 1e-3);
        assert_eq!(latency_cycles(AccessClass::PageEmpty, &t), 53);
    }

    #[test]
    fn ordering_with_default_timing() {
        let t = TimingConfig::default();
        let hit = latency_cycles(AccessClass::RowHit, &t);
        let empty = latency_cycles(AccessClass::PageEmpty, &t);
        let conflict = latency_cycles(AccessClass::RowConflict, &t);
        assert!(hit < empty && empty < conflict);
    }
}
