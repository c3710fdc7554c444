use std::collections::BTreeMap;

use super::geometry::BankId;
use crate::error::{Error, Result};

/// Nominal DDR refresh interval.
pub const DEFAULT_WINDOW_NS: u64 = 64_000_000;

/// Row activations of one refresh window, keyed by (bank, row).
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct WindowCounts {
    pub window_id: u64,
    pub counts: BTreeMap<(BankId, u32), u64>,
    pub total: u64,
}

impl WindowCounts {
    pub fn count(&self, bank: BankId, row: u32) -> u64 {
        self.counts.get(&(bank, row)).copied().unwrap_or(0)
    }

    pub fn max_count(&self) -> u64 {
        self.counts.values().copied().max().unwrap_or(0)
    }

    /// Rows with activity grouped by bank.
    pub fn by_bank(&self) -> BTreeMap<BankId, BTreeMap<u32, u64>> {
        let mut out: BTreeMap<BankId, BTreeMap<u32, u64>> = BTreeMap::new();
        for (&(bank, row), &n) in &self.counts {
            out.entry(bank).or_default().insert(row, n);
        }
        out
    }
}

/// Per-window activation accounting with aligned fixed refresh windows.
#[derive(Debug, Clone)]
pub struct ActivationLedger {
    window_length_ns: u64,
    last_time: u64,
    current: WindowCounts,
}

impl ActivationLedger {
    pub fn new(window_length_ns: u64) -> Result<Self> {
        if window_length_ns == 0 {
            return Err(Error::config("refresh.window_ns", "must be positive"));
        }
        Ok(Self {
            window_length_ns,
            last_time: 0,
            current: WindowCounts::default(),
        })
    }

    pub fn window_length_ns(&self) -> u64 {
        self.window_length_ns
    }

    pub fn window_of(&self, time_ns: u64) -> u64 {
        time_ns / self.window_length_ns
    }

    /// End (exclusive) of the current window.
    pub fn window_end(&self) -> u64 {
        (self.current.window_id + 1).saturating_mul(self.window_length_ns)
    }

    pub fn current(&self) -> &WindowCounts {
        &self.current
    }

    /// Moves the ledger to the window containing `time_ns`. When that crosses a
    /// boundary the finished window is returned and counting restarts at zero.
    /// Skipped windows in between had no activations and are not returned.
    pub fn roll_to(&mut self, time_ns: u64) -> Result<Option<WindowCounts>> {
        if time_ns < self.last_time {
            return Err(Error::Ordering {
                prev: self.last_time,
                now: time_ns,
            });
        }
        self.last_time = time_ns;
        let window = self.window_of(time_ns);
        if window == self.current.window_id {
            return Ok(None);
        }
        let fresh = WindowCounts {
            window_id: window,
            ..WindowCounts::default()
        };
        Ok(Some(std::mem::replace(&mut self.current, fresh)))
    }

    /// Counts one activation of (`bank`, `row`) at `time_ns`.
    pub fn record_activation(
        &mut self,
        bank: BankId,
        row: u32,
        time_ns: u64,
    ) -> Result<Option<WindowCounts>> {
        self.record_many(bank, row, time_ns, 1)
    }

    /// Counts `n` activations that all fall in the window of `time_ns`.
    pub fn record_many(
        &mut self,
        bank: BankId,
        row: u32,
        time_ns: u64,
        n: u64,
    ) -> Result<Option<WindowCounts>> {
        let closed = self.roll_to(time_ns)?;
        if n > 0 {
            *self.current.counts.entry((bank, row)).or_insert(0) += n;
            self.current.total += n;
        }
        Ok(closed)
    }

    /// Ends accounting and returns the window in progress.
    pub fn finish(self) -> WindowCounts {
        self.current
    }
}
