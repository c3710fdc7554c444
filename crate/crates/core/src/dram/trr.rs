use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::geometry::BankId;
use super::ledger::WindowCounts;
use crate::error::{Error, Result};

/// Target-row-refresh mitigation, evaluated once per closed window.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TrrConfig {
    pub enabled: bool,
    /// Activations a row may receive in one window before its neighbours are refreshed.
    pub max_activation_count: u64,
    pub refresh_radius: u32,
    /// Double-refresh fallback: the refresh window is halved.
    pub double_refresh: bool,
}

impl Default for TrrConfig {
    fn default() -> Self {
        Self {
            enabled: false,
            max_activation_count: 50_000,
            refresh_radius: 1,
            double_refresh: false,
        }
    }
}

impl TrrConfig {
    pub fn validate(&self) -> Result<()> {
        if self.max_activation_count == 0 {
            return Err(Error::config(
                "trr.max_activation_count",
                "must be at least 1",
            ));
        }
        if self.refresh_radius == 0 {
            return Err(Error::config("trr.refresh_radius", "must be at least 1"));
        }
        Ok(())
    }

    pub fn effective_window(&self, base_window_ns: u64) -> u64 {
        if self.double_refresh {
            (base_window_ns / 2).max(1)
        } else {
            base_window_ns
        }
    }
}

/// Rows refreshed by TRR in this window, with the number of triggering aggressors.
///
/// A row triggers when its count is strictly greater than the MAC; every row
/// within `refresh_radius` of it (excluding itself) is refreshed.
pub fn apply_trr(
    window: &WindowCounts,
    trr: &TrrConfig,
    rows_per_bank: u32,
) -> BTreeMap<(BankId, u32), u32> {
    let mut refreshed = BTreeMap::new();
    if !trr.enabled {
        return refreshed;
    }
    let radius = i64::from(trr.refresh_radius);
    for (&(bank, row), &count) in &window.counts {
        if count <= trr.max_activation_count {
            continue;
        }
        for delta in -radius..=radius {
            let victim = i64::from(row) + delta;
            if delta == 0 || victim < 0 || victim >= i64::from(rows_per_bank) {
                continue;
            }
            *refreshed.entry((bank, victim as u32)).or_insert(0) += 1;
        }
    }
    refreshed
}

#[cfg(test)]
mod tests {
    use super::*;

    fn window(rows: &[(u32, u64)]) -> WindowCounts {
        let mut w = WindowCounts::default();
        for &(row, n) in rows {
            w.counts.insert((BankId(0), row), n);
            w.total += n;
        }
        w
    }

    fn trr(mac: u64) -> TrrConfig {
        TrrConfig {
            enabled: true,
            max_activation_count: mac,
            ..TrrConfig::default()
        }
    }

    #[test]
    fn over_mac_refreshes_neighbours() {
        let r = apply_trr(&window(&[(100, 11)]), &trr(10), 1024);
        let rows: Vec<u32> = r.keys().map(|k| k.1).collect();
        assert_eq!(rows, vec![99, 101]);
    }

    #[test]
    fn at_mac_refreshes_nothing() {
        assert!(apply_trr(&window(&[(100, 10)]), &trr(10), 1024).is_empty());
    }

    #[test]
    fn overlapping_neighbourhoods() {
        let r = apply_trr(&window(&[(100, 20), (102, 20)]), &trr(10), 1024);
        assert_eq!(r.get(&(BankId(0), 101)), Some(&2));
        assert_eq!(r.get(&(BankId(0), 99)), Some(&1));
        assert_eq!(r.get(&(BankId(0), 103)), Some(&1));
        assert_eq!(r.get(&(BankId(0), 98)), None);
        assert_eq!(r.len(), 3);
    }

    #[test]
    fn disabled_refreshes_nothing() {
        let cfg = TrrConfig {
            enabled: false,
            ..trr(1)
        };
        assert!(apply_trr(&window(&[(5, 1000)]), &cfg, 1024).is_empty());
    }

    #[test]
    fn edge_rows_stay_in_bounds() {
        let r = apply_trr(&window(&[(0, 20)]), &trr(10), 4);
        assert_eq!(r.keys().map(|k| k.1).collect::<Vec<_>>(), vec![1]);
    }

    #[test]
    fn double_refresh_halves_window() {
        let cfg = TrrConfig {
            double_refresh: true,
            ..TrrConfig::default()
        };
        assert_eq!(cfg.effective_window(64_000_000), 32_000_000);
    }
}
