use serde::{Deserialize, Serialize};

use super::policy::{PagePolicy, PolicyKind};
use super::timing::{latency_cycles, AccessClass, AccessOutcome, TimingConfig};
use crate::error::{Error, Result};

/// Feedback fed to the adaptive policy after each access.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AdaptiveEvent {
    /// The open row had to be closed for another one: it stayed open too long.
    Conflict,
    /// The bank was pre-charged but the request targeted the row accessed last.
    EmptyCouldHaveHit,
    Neutral,
}

/// Row-buffer state of one bank.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct BankState {
    pub open_row: Option<u32>,
    pub open_since: u64,
    /// Time of the most recent access; `None` before the first one.
    pub last_access: Option<u64>,
    /// Row of the most recent access, still known after the row was closed.
    pub last_row: Option<u32>,
    pub timeout_register: u64,
    pub mistake_counter: i32,
    pub accesses_since_check: u32,
}

impl BankState {
    pub fn new(policy: &PagePolicy) -> Self {
        Self {
            open_row: None,
            open_since: 0,
            last_access: None,
            last_row: None,
            timeout_register: match policy.kind {
                PolicyKind::Adaptive => policy.adaptive.initial_timeout_ns,
                _ => 0,
            },
            mistake_counter: 0,
            accesses_since_check: 0,
        }
    }

    /// Value of the idle timer at `time`, which never runs past the register.
    pub fn timeout_counter(&self, time: u64) -> u64 {
        match (self.open_row, self.last_access) {
            (Some(_), Some(last)) => time.saturating_sub(last).min(self.timeout_register),
            _ => 0,
        }
    }

    fn idle_timeout(&self, policy: &PagePolicy) -> Option<u64> {
        match policy.kind {
            PolicyKind::Closed => Some(0),
            PolicyKind::Open => policy.timeout_ns,
            PolicyKind::Adaptive => Some(self.timeout_register),
        }
    }

    /// Applies a close that the policy would have issued before `time`.
    fn settle(&mut self, time: u64, policy: &PagePolicy) {
        if let (Some(_), Some(last), Some(timeout)) =
            (self.open_row, self.last_access, self.idle_timeout(policy))
        {
            if time - last >= timeout {
                self.open_row = None;
            }
        }
    }

    /// Serves one access to `row` at `time`.
    pub fn access(
        &mut self,
        row: u32,
        time: u64,
        policy: &PagePolicy,
        timing: &TimingConfig,
    ) -> Result<AccessOutcome> {
        let class = self.classify(row, time, policy)?;
        Ok(AccessOutcome {
            class,
            latency: latency_cycles(class, timing),
        })
    }

    /// Like [`access`](Self::access) without computing the latency.
    pub fn classify(&mut self, row: u32, time: u64, policy: &PagePolicy) -> Result<AccessClass> {
        if let Some(last) = self.last_access {
            if time < last {
                return Err(Error::Ordering {
                    prev: last,
                    now: time,
                });
            }
        }
        self.settle(time, policy);
        let class = match self.open_row {
            None => AccessClass::PageEmpty,
            Some(open) if open == row => AccessClass::RowHit,
            Some(_) => AccessClass::RowConflict,
        };

        if policy.kind == PolicyKind::Adaptive {
            let event = match class {
                AccessClass::RowConflict => AdaptiveEvent::Conflict,
                AccessClass::PageEmpty if self.last_row == Some(row) => {
                    AdaptiveEvent::EmptyCouldHaveHit
                }
                _ => AdaptiveEvent::Neutral,
            };
            self.adaptive_update(event, policy)?;
        }

        if class.activates() {
            self.open_since = time;
        }
        self.open_row = match policy.kind {
            PolicyKind::Closed => None,
            _ => Some(row),
        };
        self.last_access = Some(time);
        self.last_row = Some(row);
        Ok(class)
    }

    /// Feeds one access worth of feedback to the adaptive policy.
    ///
    /// Each call counts toward `check_period`; at the end of a period the
    /// timeout register moves one step in the direction the counter points
    /// and the counter restarts at zero.
    pub fn adaptive_update(&mut self, event: AdaptiveEvent, policy: &PagePolicy) -> Result<()> {
        if policy.kind != PolicyKind::Adaptive {
            return Err(Error::Misuse(format!(
                "adaptive update on a {} policy",
                policy.kind
            )));
        }
        let p = &policy.adaptive;
        match event {
            AdaptiveEvent::Conflict => {
                self.mistake_counter = (self.mistake_counter - 1).max(-p.counter_limit)
            }
            AdaptiveEvent::EmptyCouldHaveHit => {
                self.mistake_counter = (self.mistake_counter + 1).min(p.counter_limit)
            }
            AdaptiveEvent::Neutral => {}
        }
        self.accesses_since_check += 1;
        if self.accesses_since_check >= p.check_period {
            if self.mistake_counter > p.inc_threshold {
                self.timeout_register = (self.timeout_register + p.step_ns).min(p.timeout_max_ns);
            } else if self.mistake_counter < p.dec_threshold {
                self.timeout_register = self
                    .timeout_register
                    .saturating_sub(p.step_ns)
                    .max(p.timeout_min_ns);
            }
            self.mistake_counter = 0;
            self.accesses_since_check = 0;
        }
        Ok(())
    }
}
