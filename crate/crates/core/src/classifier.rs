//! Page-policy classification from access timings.
//!
//! Two probes are compared. *Single* loads address A `n` times and then times
//! one more load of A. *Conflict* loads A and then times a load of B, which
//! sits in the same bank but a different row. Equal timings mean rows are
//! closed after each access; a single curve that is flat in `n` and differs
//! from the conflict timing means rows stay open; a single curve that jumps
//! at some `n` means the controller adapts its timeout.

use serde::{Deserialize, Serialize};

use crate::dram::{AddressMapping, DramGeometry, DramLocation};
use crate::error::{Error, Result};
use crate::memctrl::{latency_cycles, BankState, PagePolicy, TimingConfig};

/// Source of latency measurements, in CPU cycles.
pub trait TimingSource {
    /// Latency of one load of `a` after it was loaded `n` times before.
    fn measure_single(&mut self, a: u64, n: u32) -> Result<u64>;
    /// Latency of a load of `b` right after a load of `a`.
    fn measure_conflict(&mut self, a: u64, b: u64) -> Result<u64>;
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ClassifierConfig {
    pub n_schedule: Vec<u32>,
    pub repeats_per_point: u32,
    /// Two latencies within this many cycles are considered equal.
    pub equality_tolerance: u64,
    /// Smallest level change accepted as a jump.
    pub jump_min_step: u64,
    /// Spacing of consecutive probe loads in the simulated source.
    pub probe_gap_ns: u64,
}

impl Default for ClassifierConfig {
    fn default() -> Self {
        Self {
            n_schedule: geometric_schedule(1, 10_000, 40),
            repeats_per_point: 9,
            equality_tolerance: 3,
            jump_min_step: 10,
            probe_gap_ns: 200,
        }
    }
}

impl ClassifierConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n_schedule.is_empty() {
            return Err(Error::config("classifier.n_schedule", "must not be empty"));
        }
        if self.n_schedule.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::config(
                "classifier.n_schedule",
                "must be strictly increasing",
            ));
        }
        if self.repeats_per_point == 0 {
            return Err(Error::config(
                "classifier.repeats_per_point",
                "must be at least 1",
            ));
        }
        if self.equality_tolerance >= self.jump_min_step {
            return Err(Error::config(
                "classifier.equality_tolerance",
                "must be smaller than jump_min_step",
            ));
        }
        Ok(())
    }
}

/// Roughly `points` geometrically spaced counts from `from` to `to`, deduplicated.
pub fn geometric_schedule(from: u32, to: u32, points: u32) -> Vec<u32> {
    let from = from.max(1);
    if points < 2 || to <= from {
        return vec![from];
    }
    let ratio = (f64::from(to) / f64::from(from)).powf(1.0 / f64::from(points - 1));
    let mut out: Vec<u32> = (0..points)
        .map(|k| (f64::from(from) * ratio.powi(k as i32)).round() as u32)
        .collect();
    out.push(to);
    out.dedup();
    out.retain(|&n| n <= to);
    out
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct CurvePoint {
    pub n: u32,
    pub latency: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Jump {
    /// Index into the curve of the first point after the change.
    pub index: usize,
    pub n: u32,
    pub before: u64,
    pub after: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum VerdictKind {
    Closed,
    Open,
    Adaptive,
    Unclassifiable,
}

impl VerdictKind {
    pub fn as_str(self) -> &'static str {
        match self {
            VerdictKind::Closed => "closed",
            VerdictKind::Open => "open",
            VerdictKind::Adaptive => "adaptive",
            VerdictKind::Unclassifiable => "unclassifiable",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Evidence {
    pub single_curve: Vec<CurvePoint>,
    pub conflict_latency: u64,
    pub jumps: Vec<Jump>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PolicyVerdict {
    pub kind: VerdictKind,
    pub evidence: Evidence,
}

/// Picks two addresses in bank 0 that land in different rows.
pub fn probe_pair(mapping: &AddressMapping, geom: &DramGeometry) -> Result<(u64, u64)> {
    if geom.rows_per_bank < 2 {
        return Err(Error::config(
            "geometry.rows_per_bank",
            "need two rows for a conflict probe",
        ));
    }
    let loc = |row| DramLocation {
        row,
        ..DramLocation::default()
    };
    let unreachable = || {
        Error::config(
            "mapping",
            "cannot construct two same-bank addresses in different rows",
        )
    };
    let a = mapping.encode(&loc(0)).ok_or_else(unreachable)?;
    let b = mapping.encode(&loc(1)).ok_or_else(unreachable)?;
    let (la, lb) = (mapping.map_address(a, geom)?, mapping.map_address(b, geom)?);
    if geom.bank_id(&la) != geom.bank_id(&lb) || la.row == lb.row {
        return Err(unreachable());
    }
    Ok((a, b))
}

fn median(values: &mut [u64]) -> u64 {
    values.sort_unstable();
    values[values.len() / 2]
}

/// Median single-probe latency for every `n` in the schedule.
pub fn run_single_curve(
    src: &mut dyn TimingSource,
    a: u64,
    cfg: &ClassifierConfig,
) -> Result<Vec<CurvePoint>> {
    let mut curve = Vec::with_capacity(cfg.n_schedule.len());
    let mut samples = vec![0u64; cfg.repeats_per_point as usize];
    for &n in &cfg.n_schedule {
        for s in samples.iter_mut() {
            *s = src.measure_single(a, n)?;
        }
        curve.push(CurvePoint {
            n,
            latency: median(&mut samples),
        });
    }
    Ok(curve)
}

/// Median conflict-probe latency.
pub fn run_conflict(
    src: &mut dyn TimingSource,
    a: u64,
    b: u64,
    cfg: &ClassifierConfig,
) -> Result<u64> {
    let mut samples = (0..cfg.repeats_per_point)
        .map(|_| src.measure_conflict(a, b))
        .collect::<Result<Vec<_>>>()?;
    Ok(median(&mut samples))
}

const PLATEAU: usize = 3;

/// Every sustained level change of at least `min_step`.
///
/// A change at index `i` needs the median of the next three points to differ
/// from the median of the current plateau by `min_step`, and point `i` itself
/// to sit at least half a step away from that plateau. Both plateaus must be
/// at least three points long.
pub fn detect_jumps(series: &[u64], min_step: u64) -> Vec<usize> {
    let mut found = Vec::new();
    let mut start = 0;
    let mut i = PLATEAU;
    while i + PLATEAU <= series.len() {
        let left = median(&mut series[start..i].to_vec());
        let right = median(&mut series[i..i + PLATEAU].to_vec());
        if left.abs_diff(right) >= min_step && 2 * series[i].abs_diff(left) >= min_step {
            found.push(i);
            start = i;
            i += PLATEAU;
        } else {
            i += 1;
        }
    }
    found
}

/// First sustained level change, if any.
pub fn detect_jump(series: &[u64], min_step: u64) -> Option<usize> {
    detect_jumps(series, min_step).first().copied()
}

/// Decides the verdict from already collected evidence.
pub fn verdict_from_evidence(
    single_curve: Vec<CurvePoint>,
    conflict_latency: u64,
    cfg: &ClassifierConfig,
) -> PolicyVerdict {
    let latencies: Vec<u64> = single_curve.iter().map(|p| p.latency).collect();
    let jumps: Vec<Jump> = detect_jumps(&latencies, cfg.jump_min_step)
        .into_iter()
        .map(|i| Jump {
            index: i,
            n: single_curve[i].n,
            before: latencies[i - 1],
            after: latencies[i],
        })
        .collect();

    let tol = cfg.equality_tolerance;
    let last = latencies.last().copied().unwrap_or(0);
    let lo = latencies.iter().copied().min().unwrap_or(0);
    let hi = latencies.iter().copied().max().unwrap_or(0);

    let kind = if last.abs_diff(conflict_latency) <= tol {
        VerdictKind::Closed
    } else if hi - lo <= tol {
        VerdictKind::Open
    } else if !jumps.is_empty() {
        VerdictKind::Adaptive
    } else {
        VerdictKind::Unclassifiable
    };
    PolicyVerdict {
        kind,
        evidence: Evidence {
            single_curve,
            conflict_latency,
            jumps,
        },
    }
}

/// Runs both probes and classifies the page policy behind `src`.
pub fn classify(
    src: &mut dyn TimingSource,
    a: u64,
    b: u64,
    cfg: &ClassifierConfig,
) -> Result<PolicyVerdict> {
    cfg.validate()?;
    let curve = run_single_curve(src, a, cfg)?;
    let conflict = run_conflict(src, a, b, cfg)?;
    Ok(verdict_from_evidence(curve, conflict, cfg))
}

/// Timing source backed by the page-policy simulator. Probes bypass the
/// cache, as if each address were flushed before loading it.
#[derive(Debug, Clone)]
pub struct SimulatedTimingSource {
    mapping: AddressMapping,
    geometry: DramGeometry,
    policy: PagePolicy,
    timing: TimingConfig,
    gap_ns: u64,
    progress: Option<(u64, BankState, u32)>,
}

impl SimulatedTimingSource {
    pub fn new(
        mapping: AddressMapping,
        geometry: DramGeometry,
        policy: PagePolicy,
        timing: TimingConfig,
        gap_ns: u64,
    ) -> Self {
        Self {
            mapping,
            geometry,
            policy,
            timing,
            gap_ns: gap_ns.max(1),
            progress: None,
        }
    }

    fn row_of(&self, addr: u64) -> Result<u32> {
        Ok(self.mapping.map_address(addr, &self.geometry)?.row)
    }
}

impl TimingSource for SimulatedTimingSource {
    fn measure_single(&mut self, a: u64, n: u32) -> Result<u64> {
        let row = self.row_of(a)?;
        // Runs are deterministic, so a longer run extends a shorter one.
        let (mut state, mut done) = match self.progress.take() {
            Some((addr, state, done)) if addr == a && done <= n => (state, done),
            _ => (BankState::new(&self.policy), 0),
        };
        while done < n {
            state.classify(row, u64::from(done) * self.gap_ns, &self.policy)?;
            done += 1;
        }
        let mut probe = state.clone();
        let out = probe.access(row, u64::from(n) * self.gap_ns, &self.policy, &self.timing)?;
        self.progress = Some((a, state, done));
        Ok(out.latency)
    }

    fn measure_conflict(&mut self, a: u64, b: u64) -> Result<u64> {
        let (ra, rb) = (self.row_of(a)?, self.row_of(b)?);
        let mut state = BankState::new(&self.policy);
        state.classify(ra, 0, &self.policy)?;
        Ok(state
            .access(rb, self.gap_ns, &self.policy, &self.timing)?
            .latency)
    }
}

/// Expected latency of a class under `timing`; convenience for reports.
pub fn reference_latencies(timing: &TimingConfig) -> [u64; 3] {
    use crate::memctrl::AccessClass::*;
    [
        latency_cycles(RowHit, timing),
        latency_cycles(PageEmpty, timing),
        latency_cycles(RowConflict, timing),
    ]
}
