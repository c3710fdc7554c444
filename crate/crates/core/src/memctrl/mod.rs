//! Page-policy state machines and the access-latency model.

mod bank;
mod policy;
mod timing;

use serde::{Deserialize, Serialize};

pub use bank::{AdaptiveEvent, BankState};
pub use policy::{AdaptiveParams, PagePolicy, PolicyKind};
pub use timing::{latency_cycles, AccessClass, AccessOutcome, TimingConfig};

use crate::dram::BankId;
use crate::error::Result;

/// Per-class access counts.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ClassHistogram {
    pub row_hit: u64,
    pub page_empty: u64,
    pub row_conflict: u64,
}

impl ClassHistogram {
    pub fn add(&mut self, class: AccessClass, n: u64) {
        match class {
            AccessClass::RowHit => self.row_hit += n,
            AccessClass::PageEmpty => self.page_empty += n,
            AccessClass::RowConflict => self.row_conflict += n,
        }
    }

    pub fn total(&self) -> u64 {
        self.row_hit + self.page_empty + self.row_conflict
    }

    pub fn activations(&self) -> u64 {
        self.page_empty + self.row_conflict
    }

    pub fn scaled(&self, n: u64) -> Self {
        Self {
            row_hit: self.row_hit * n,
            page_empty: self.page_empty * n,
            row_conflict: self.row_conflict * n,
        }
    }

    pub fn merge(&mut self, other: &Self) {
        self.row_hit += other.row_hit;
        self.page_empty += other.page_empty;
        self.row_conflict += other.row_conflict;
    }
}

/// All banks of one controller under a single policy.
#[derive(Debug, Clone)]
pub struct MemoryController {
    policy: PagePolicy,
    timing: TimingConfig,
    banks: Vec<BankState>,
    latencies: [u64; 3],
    histogram: ClassHistogram,
}

impl MemoryController {
    pub fn new(policy: PagePolicy, timing: TimingConfig, banks: u32) -> Self {
        let latencies = [
            latency_cycles(AccessClass::RowHit, &timing),
            latency_cycles(AccessClass::PageEmpty, &timing),
            latency_cycles(AccessClass::RowConflict, &timing),
        ];
        Self {
            banks: vec![BankState::new(&policy); banks as usize],
            policy,
            timing,
            latencies,
            histogram: ClassHistogram::default(),
        }
    }

    pub fn policy(&self) -> &PagePolicy {
        &self.policy
    }

    pub fn timing(&self) -> &TimingConfig {
        &self.timing
    }

    pub fn bank(&self, bank: BankId) -> &BankState {
        &self.banks[bank.0 as usize]
    }

    pub fn histogram(&self) -> &ClassHistogram {
        &self.histogram
    }

    pub fn latency(&self, class: AccessClass) -> u64 {
        match class {
            AccessClass::RowHit => self.latencies[0],
            AccessClass::PageEmpty => self.latencies[1],
            AccessClass::RowConflict => self.latencies[2],
        }
    }

    pub fn access(&mut self, bank: BankId, row: u32, time: u64) -> Result<AccessOutcome> {
        let class = self.banks[bank.0 as usize].classify(row, time, &self.policy)?;
        self.histogram.add(class, 1);
        Ok(AccessOutcome {
            class,
            latency: self.latency(class),
        })
    }

    /// Adds outcomes that were replayed without stepping the banks.
    pub(crate) fn credit(&mut self, hist: &ClassHistogram) {
        self.histogram.merge(hist);
    }

    /// Shifts the timestamps of `banks` forward by `dt`; used when a steady
    /// state is replayed without stepping those banks.
    pub(crate) fn shift_banks(&mut self, banks: &[BankId], dt: u64) {
        for b in banks {
            let b = &mut self.banks[b.0 as usize];
            if let Some(t) = b.last_access.as_mut() {
                *t += dt;
                b.open_since += dt;
            }
        }
    }
}
