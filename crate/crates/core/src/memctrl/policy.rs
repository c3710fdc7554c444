use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PolicyKind {
    /// Row closed right after every access.
    Closed,
    /// Row left open until a fixed timeout expires.
    #[serde(alias = "fixed_open")]
    Open,
    /// Timeout tuned at runtime by a mistake counter.
    Adaptive,
}

impl PolicyKind {
    pub fn as_str(self) -> &'static str {
        match self {
            PolicyKind::Closed => "closed",
            PolicyKind::Open => "open",
            PolicyKind::Adaptive => "adaptive",
        }
    }
}

impl std::fmt::Display for PolicyKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::str::FromStr for PolicyKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "closed" => Ok(PolicyKind::Closed),
            "open" | "fixed_open" => Ok(PolicyKind::Open),
            "adaptive" => Ok(PolicyKind::Adaptive),
            other => Err(Error::InvalidInput(format!(
                "unknown page policy `{other}`"
            ))),
        }
    }
}

/// Knobs of the adaptive policy. All times in nanoseconds.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct AdaptiveParams {
    pub initial_timeout_ns: u64,
    pub timeout_min_ns: u64,
    pub timeout_max_ns: u64,
    pub step_ns: u64,
    /// Accesses per bank between two mistake-counter checks.
    pub check_period: u32,
    pub inc_threshold: i32,
    pub dec_threshold: i32,
    /// Mistake counter saturates at +/- this value.
    pub counter_limit: i32,
}

impl Default for AdaptiveParams {
    fn default() -> Self {
        Self {
            initial_timeout_ns: 0,
            timeout_min_ns: 0,
            timeout_max_ns: 10_000,
            step_ns: 25,
            check_period: 64,
            inc_threshold: 8,
            dec_threshold: -8,
            counter_limit: 64,
        }
    }
}

/// Memory-controller page policy.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PagePolicy {
    pub kind: PolicyKind,
    /// Open-policy timeout; absent means rows stay open until a conflict.
    pub timeout_ns: Option<u64>,
    pub adaptive: AdaptiveParams,
}

impl Default for PagePolicy {
    fn default() -> Self {
        Self::closed()
    }
}

impl PagePolicy {
    pub fn closed() -> Self {
        Self {
            kind: PolicyKind::Closed,
            timeout_ns: None,
            adaptive: AdaptiveParams::default(),
        }
    }

    pub fn fixed_open(timeout_ns: Option<u64>) -> Self {
        Self {
            kind: PolicyKind::Open,
            timeout_ns,
            adaptive: AdaptiveParams::default(),
        }
    }

    pub fn adaptive(params: AdaptiveParams) -> Self {
        Self {
            kind: PolicyKind::Adaptive,
            timeout_ns: None,
            adaptive: params,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.kind != PolicyKind::Adaptive {
            return Ok(());
        }
        let a = &self.adaptive;
        if a.timeout_min_ns > a.timeout_max_ns {
            return Err(Error::config(
                "policy.adaptive.timeout_min_ns",
                "must not exceed timeout_max_ns",
            ));
        }
        if !(a.timeout_min_ns..=a.timeout_max_ns).contains(&a.initial_timeout_ns) {
            return Err(Error::config(
                "policy.adaptive.initial_timeout_ns",
                "must lie within [timeout_min_ns, timeout_max_ns]",
            ));
        }
        if a.check_period == 0 {
            return Err(Error::config(
                "policy.adaptive.check_period",
                "must be at least 1",
            ));
        }
        if a.counter_limit <= 0 {
            return Err(Error::config(
                "policy.adaptive.counter_limit",
                "must be positive",
            ));
        }
        if a.dec_threshold > a.inc_threshold {
            return Err(Error::config(
                "policy.adaptive.dec_threshold",
                "must not exceed inc_threshold",
            ));
        }
        Ok(())
    }
}
