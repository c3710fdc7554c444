//! Discrete-event simulation of a packet flood against the memory system.
//!
//! Packets arrive on a fixed schedule, each replays the profile trace through
//! the cache, the memory controller and the activation ledger. Windows close
//! on their boundaries, TRR runs, and the flip model decides which victims
//! flip.
//!
//! A packet whose touched cache sets and banks look the same before and after
//! it (modulo a time shift) leaves the system in a steady state: every later
//! packet repeats its effect until something external happens (a window
//! boundary, a background access, a duty-cycle edge, the end of the run).
//! Such stretches are applied in one step. This only happens when the policy
//! cannot observe the exact arrival offsets, or the arrival period is a whole
//! number of nanoseconds.

use std::collections::BTreeMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::pattern::{pattern_addresses, HammerPattern};
use super::profile::{FunctionAccess, PacketProfile};
use super::rates::{
    packet_rate, rate_chain, Bandwidth, FeasibilityVerdict, PrefixConvention, REPORTED_THRESHOLDS,
};
use super::trace::{build_trace, BypassMode, TraceOp};
use crate::cache::{CacheConfig, CacheState};
use crate::dram::{
    apply_trr, ActivationLedger, AddressMapping, BankId, DramGeometry, DramLocation, FlipEvaluator,
    FlipModel, TrrConfig, WindowCounts, DEFAULT_WINDOW_NS,
};
use crate::error::{Error, Result};
use crate::memctrl::{
    AccessClass, BankState, ClassHistogram, MemoryController, PagePolicy, PolicyKind, TimingConfig,
};

/// Packet arrival process.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Arrival {
    /// Packet `k` arrives at `floor(k / rate)`.
    #[default]
    Uniform,
    /// Exponential inter-arrival gaps with the same mean.
    Poisson,
}

/// Hammer for `on_ms`, pause for `off_ms`, repeat. Packets falling in a pause
/// are not sent.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DutyCycle {
    pub on_ms: f64,
    pub off_ms: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct AttackConfig {
    pub bandwidth: Bandwidth,
    pub prefix: PrefixConvention,
    pub frame_bytes: u32,
    pub duration_s: f64,
    pub bypass_mode: BypassMode,
    /// Background accesses per second, to random rows and bypassing the cache.
    pub background_load: f64,
    /// Confines background accesses to one flat bank index.
    pub background_bank: Option<u32>,
    pub pattern: HammerPattern,
    /// Function whose addresses the pattern replaces.
    pub hammered_function: String,
    /// Name of a built-in profile; ignored when `functions` is given.
    pub profile: String,
    pub functions: Option<Vec<FunctionAccess>>,
    pub arrival: Arrival,
    pub duty_cycle: Option<DutyCycle>,
    /// Time between two loads of the same packet.
    pub access_spacing_ns: u64,
    /// Per-window activation thresholds for the analytic verdict.
    pub thresholds: Vec<u64>,
    /// Number of DRAM accesses recorded in the report's access trace.
    pub trace_limit: usize,
}

impl Default for AttackConfig {
    fn default() -> Self {
        Self {
            bandwidth: Bandwidth::mbit(500.0),
            prefix: PrefixConvention::Binary,
            frame_bytes: 64,
            duration_s: 0.128,
            bypass_mode: BypassMode::FlushDriver,
            background_load: 0.0,
            background_bank: None,
            pattern: HammerPattern::OneLocation,
            hammered_function: "nf_hook_slow".to_string(),
            profile: "udp-nf-hook".to_string(),
            functions: None,
            arrival: Arrival::Uniform,
            duty_cycle: None,
            access_spacing_ns: 10,
            thresholds: REPORTED_THRESHOLDS.to_vec(),
            trace_limit: 0,
        }
    }
}

impl AttackConfig {
    /// The packet profile before the hammer pattern is applied.
    pub fn base_profile(&self) -> Result<PacketProfile> {
        let p = match &self.functions {
            Some(functions) => PacketProfile {
                functions: functions.clone(),
            },
            None => PacketProfile::builtin(&self.profile)?,
        };
        p.validate()?;
        Ok(p)
    }

    pub fn packets_per_s(&self) -> f64 {
        packet_rate(self.bandwidth, self.frame_bytes, self.prefix)
    }

    pub fn validate(&self, geom: &DramGeometry) -> Result<()> {
        if self.frame_bytes < 64 {
            return Err(Error::config("attack.frame_bytes", "must be at least 64"));
        }
        if !(self.bandwidth.value > 0.0 && self.bandwidth.value.is_finite()) {
            return Err(Error::config("attack.bandwidth", "must be positive"));
        }
        if !(self.duration_s >= 0.0 && self.duration_s.is_finite()) {
            return Err(Error::config(
                "attack.duration_s",
                "must be a non-negative number",
            ));
        }
        if !(self.background_load >= 0.0 && self.background_load.is_finite()) {
            return Err(Error::config(
                "attack.background_load",
                "must be a non-negative number",
            ));
        }
        if let Some(b) = self.background_bank {
            if b >= geom.total_banks() {
                return Err(Error::config(
                    "attack.background_bank",
                    format!("bank {b} outside {} banks", geom.total_banks()),
                ));
            }
        }
        if self.access_spacing_ns == 0 {
            return Err(Error::config(
                "attack.access_spacing_ns",
                "must be at least 1",
            ));
        }
        if let Some(d) = self.duty_cycle {
            if !(d.on_ms > 0.0 && d.on_ms.is_finite() && d.off_ms >= 0.0 && d.off_ms.is_finite()) {
                return Err(Error::config(
                    "attack.duty_cycle",
                    "on_ms must be positive and off_ms non-negative",
                ));
            }
        }
        if self.thresholds.contains(&0) {
            return Err(Error::config(
                "attack.thresholds",
                "thresholds must be positive",
            ));
        }
        let profile = self.base_profile()?;
        if profile.function(&self.hammered_function).is_none() {
            return Err(Error::config(
                "attack.hammered_function",
                format!("`{}` is not in the profile", self.hammered_function),
            ));
        }
        Ok(())
    }
}

/// Everything one simulation run depends on, apart from the seed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SimConfig {
    pub geometry: DramGeometry,
    pub mapping: AddressMapping,
    pub timing: TimingConfig,
    pub policy: PagePolicy,
    pub cache: CacheConfig,
    pub flip: FlipModel,
    pub trr: TrrConfig,
    /// Refresh window before any double-refresh halving.
    pub window_ns: u64,
    pub attack: AttackConfig,
}

impl Default for SimConfig {
    fn default() -> Self {
        Self {
            geometry: DramGeometry::default(),
            mapping: AddressMapping::default(),
            timing: TimingConfig::default(),
            policy: PagePolicy::default(),
            cache: CacheConfig::default(),
            flip: FlipModel::default(),
            trr: TrrConfig::default(),
            window_ns: DEFAULT_WINDOW_NS,
            attack: AttackConfig::default(),
        }
    }
}

impl SimConfig {
    pub fn validate(&self) -> Result<()> {
        self.geometry.validate()?;
        self.mapping.validate(&self.geometry)?;
        self.timing.validate()?;
        self.policy.validate()?;
        self.cache.validate()?;
        self.flip.validate()?;
        self.trr.validate()?;
        if self.window_ns == 0 {
            return Err(Error::config("refresh.window_ns", "must be positive"));
        }
        self.attack.validate(&self.geometry)
    }

    pub fn effective_window_ns(&self) -> u64 {
        self.trr.effective_window(self.window_ns)
    }

    /// The profile actually replayed: the hammered function's addresses
    /// replaced by the pattern's.
    pub fn hammer_profile(&self, seed: u64) -> Result<PacketProfile> {
        let mut profile = self.attack.base_profile()?;
        let f = profile
            .function_mut(&self.attack.hammered_function)
            .ok_or_else(|| Error::UnknownFunction(self.attack.hammered_function.clone()))?;
        let mut rng = stream(seed, 1);
        f.addresses = pattern_addresses(
            &self.attack.pattern,
            &f.addresses,
            &self.mapping,
            &self.geometry,
            &mut rng,
        )?;
        Ok(profile)
    }
}

/// One flipped cell with its full DRAM coordinates.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub struct FlipRecord {
    /// Close of the window in which the flip was detected.
    pub time_ns: u64,
    pub window_id: u64,
    pub channel: u32,
    pub dimm: u32,
    pub rank: u32,
    pub bank_group: u32,
    pub bank: u32,
    /// Flat bank index.
    pub bank_id: u32,
    pub row: u32,
    pub cell: u32,
    pub distance: u32,
}

/// One DRAM access in the captured trace.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct AccessRecord {
    pub time_ns: u64,
    pub bank: u32,
    pub row: u32,
    pub class: AccessClass,
    pub latency: u64,
    pub background: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimReport {
    pub packets: u64,
    pub packets_per_s: f64,
    pub duration_s: f64,
    pub window_ns: u64,
    pub windows: u64,
    /// Highest per-row activation count of each window, in window order.
    pub window_max_activations: Vec<u64>,
    pub flips: Vec<FlipRecord>,
    pub flips_per_hour: f64,
    pub access_classes: ClassHistogram,
    /// Loads issued by packets and background traffic.
    pub accesses_issued: u64,
    pub cache_hits: u64,
    /// Loads that reached the memory controller.
    pub dram_accesses: u64,
    pub dram_access_rate: f64,
    pub background_accesses: u64,
    /// Row refreshes issued by TRR, counted with multiplicity.
    pub trr_refreshes: u64,
    /// Packets whose effect was replayed from a steady state.
    pub fast_forwarded_packets: u64,
    /// Rate-chain verdict for the hammered function.
    pub feasibility: FeasibilityVerdict,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub access_trace: Vec<AccessRecord>,
}

impl SimReport {
    /// `time,bank,row,class,latency` lines, with header.
    pub fn access_trace_csv(&self) -> String {
        let mut out = String::from("time_ns,bank,row,class,latency\n");
        for a in &self.access_trace {
            out.push_str(&format!(
                "{},{},{},{},{}\n",
                a.time_ns,
                a.bank,
                a.row,
                a.class.as_str(),
                a.latency
            ));
        }
        out
    }

    /// `window_id,channel,dimm,rank,bank_group,bank,row,cell,distance` lines, with header.
    pub fn flips_csv(&self) -> String {
        let mut out =
            String::from("window_id,channel,dimm,rank,bank_group,bank,row,cell,distance\n");
        for f in &self.flips {
            out.push_str(&format!(
                "{},{},{},{},{},{},{},{},{}\n",
                f.window_id,
                f.channel,
                f.dimm,
                f.rank,
                f.bank_group,
                f.bank,
                f.row,
                f.cell,
                f.distance
            ));
        }
        out
    }
}

fn stream(seed: u64, id: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(id);
    rng
}

/// Rates are kept as multiples of 1/RATE_SCALE packets per second so that
/// arrival times are exact integers.
const RATE_SCALE: u128 = 1024;
const NS_PER_S: u128 = 1_000_000_000;

#[derive(Debug, Clone, Copy)]
struct UniformClock {
    scaled_rate: u128,
}

impl UniformClock {
    fn new(rate: f64) -> Option<Self> {
        let scaled_rate = (rate * RATE_SCALE as f64).round();
        (1.0..1e30).contains(&scaled_rate).then_some(Self {
            scaled_rate: scaled_rate as u128,
        })
    }

    fn arrival(&self, k: u64) -> u64 {
        (u128::from(k) * NS_PER_S * RATE_SCALE / self.scaled_rate) as u64
    }

    /// Index of the first packet arriving at or after `t`.
    fn first_at(&self, t: u64) -> u64 {
        let num = u128::from(t) * self.scaled_rate;
        let den = NS_PER_S * RATE_SCALE;
        num.div_ceil(den) as u64
    }

    fn integral_period(&self) -> bool {
        (NS_PER_S * RATE_SCALE).is_multiple_of(self.scaled_rate)
    }

    fn min_gap(&self) -> u64 {
        (NS_PER_S * RATE_SCALE / self.scaled_rate) as u64
    }
}

#[derive(Debug, Clone)]
struct PreparedOp {
    op: TraceOp,
    target: Option<(BankId, u32)>,
    bypass_cache: bool,
}

#[derive(Debug, Clone, Default)]
struct PacketEffect {
    activations: BTreeMap<(BankId, u32), u64>,
    hist: ClassHistogram,
    cache_hits: u64,
    accesses: u64,
}

#[derive(Debug, Clone, PartialEq, Eq)]
struct Snapshot {
    banks: Vec<BankState>,
    sets: Vec<Vec<u64>>,
}

struct Engine<'a> {
    cfg: &'a SimConfig,
    mc: MemoryController,
    cache: CacheState,
    ledger: ActivationLedger,
    evaluator: FlipEvaluator,
    cursor: u64,
    window_max: Vec<u64>,
    flips: Vec<FlipRecord>,
    trr_refreshes: u64,
    cache_hits: u64,
    dram_accesses: u64,
    accesses_issued: u64,
    background_accesses: u64,
    trace: Vec<AccessRecord>,
}

impl<'a> Engine<'a> {
    fn close_window(&mut self, w: WindowCounts, time_ns: u64) {
        let cfg = self.cfg;
        while (self.window_max.len() as u64) < w.window_id {
            self.window_max.push(0);
        }
        self.window_max.push(w.max_count());
        let refreshed = if cfg.trr.enabled {
            apply_trr(&w, &cfg.trr, cfg.geometry.rows_per_bank)
        } else {
            BTreeMap::new()
        };
        self.trr_refreshes += refreshed.values().map(|&n| u64::from(n)).sum::<u64>();
        for f in self.evaluator.evaluate(&w, &refreshed) {
            let loc = cfg.geometry.bank_location(f.bank);
            self.flips.push(FlipRecord {
                time_ns,
                window_id: f.window_id,
                channel: loc.channel,
                dimm: loc.dimm,
                rank: loc.rank,
                bank_group: loc.bank_group,
                bank: loc.bank,
                bank_id: f.bank.0,
                row: f.row,
                cell: f.cell,
                distance: f.distance,
            });
        }
    }

    /// Closes every window that ends at or before `t`.
    fn advance_windows(&mut self, t: u64) -> Result<()> {
        while t >= self.ledger.window_end() {
            let close = self.ledger.window_end();
            if let Some(w) = self.ledger.roll_to(close)? {
                self.close_window(w, close);
            }
        }
        Ok(())
    }

    fn dram_access(
        &mut self,
        bank: BankId,
        row: u32,
        t: u64,
        background: bool,
    ) -> Result<AccessClass> {
        self.advance_windows(t)?;
        let out = self.mc.access(bank, row, t)?;
        if out.class.activates() {
            self.ledger.record_activation(bank, row, t)?;
        }
        self.dram_accesses += 1;
        if self.trace.len() < self.cfg.attack.trace_limit {
            self.trace.push(AccessRecord {
                time_ns: t,
                bank: bank.0,
                row,
                class: out.class,
                latency: out.latency,
                background,
            });
        }
        Ok(out.class)
    }

    fn run_packet(&mut self, ops: &[PreparedOp], start: u64) -> Result<PacketEffect> {
        let spacing = self.cfg.attack.access_spacing_ns;
        let mut effect = PacketEffect::default();
        let mut t = start;
        for p in ops {
            match p.op {
                TraceOp::Invalidate { addr } => self.cache.flush(addr),
                TraceOp::Access { addr, .. } => {
                    effect.accesses += 1;
                    self.accesses_issued += 1;
                    let reaches_dram = p.bypass_cache || !self.cache.access(addr).is_hit();
                    if reaches_dram {
                        let (bank, row) = p.target.expect("decoded at preparation");
                        let class = self.dram_access(bank, row, t, false)?;
                        effect.hist.add(class, 1);
                        if class.activates() {
                            *effect.activations.entry((bank, row)).or_insert(0) += 1;
                        }
                    } else {
                        effect.cache_hits += 1;
                        self.cache_hits += 1;
                    }
                    t += spacing;
                }
            }
        }
        self.cursor = t;
        Ok(effect)
    }

    fn background_access<R: Rng>(&mut self, t: u64, rng: &mut R) -> Result<()> {
        let g = &self.cfg.geometry;
        let bank = match self.cfg.attack.background_bank {
            Some(b) => BankId(b),
            None => BankId(rng.gen_range(0..g.total_banks())),
        };
        let row = rng.gen_range(0..g.rows_per_bank);
        let t = t.max(self.cursor);
        self.cursor = t;
        self.accesses_issued += 1;
        self.background_accesses += 1;
        self.dram_access(bank, row, t, true)?;
        Ok(())
    }

    fn snapshot(&self, banks: &[BankId], sets: &[usize], start: u64, time_free: bool) -> Snapshot {
        Snapshot {
            banks: banks
                .iter()
                .map(|&b| {
                    let mut s = self.mc.bank(b).clone();
                    if time_free {
                        s.last_access = s.last_access.map(|_| 0);
                        s.open_since = 0;
                    } else {
                        s.last_access = s.last_access.map(|l| start.saturating_sub(l));
                        s.open_since = start.saturating_sub(s.open_since);
                    }
                    s
                })
                .collect(),
            sets: sets
                .iter()
                .map(|&i| self.cache.set_contents(i).to_vec())
                .collect(),
        }
    }
}

/// Engine switches that do not change the simulated outcome.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SimOptions {
    /// Replay steady-state stretches in one step instead of packet by packet.
    pub fast_forward: bool,
}

impl Default for SimOptions {
    fn default() -> Self {
        Self { fast_forward: true }
    }
}

/// Runs one simulation.
pub fn simulate(cfg: &SimConfig, seed: u64) -> Result<SimReport> {
    simulate_with(cfg, seed, SimOptions::default())
}

pub fn simulate_with(cfg: &SimConfig, seed: u64, options: SimOptions) -> Result<SimReport> {
    cfg.validate()?;
    let attack = &cfg.attack;
    let geom = &cfg.geometry;
    let window_ns = cfg.effective_window_ns();
    let profile = cfg.hammer_profile(seed)?;
    let pps = attack.packets_per_s();
    let end_ns = (attack.duration_s * 1e9).round() as u64;

    let cache = CacheState::new(cfg.cache.clone())?;
    let mut ops = Vec::new();
    for op in build_trace(&profile, attack.bypass_mode, 0) {
        let (target, bypass_cache) = match op {
            TraceOp::Invalidate { .. } => (None, false),
            TraceOp::Access { addr, uncached } => {
                let loc = cfg.mapping.map_address(addr, geom).map_err(|e| {
                    Error::config("attack.functions", format!("address {addr:#x}: {e}"))
                })?;
                (
                    Some((geom.bank_id(&loc), loc.row)),
                    uncached || cache.is_uncached(addr),
                )
            }
        };
        ops.push(PreparedOp {
            op,
            target,
            bypass_cache,
        });
    }
    let n_access = ops.iter().filter(|p| p.target.is_some()).count() as u64;
    let span = n_access * attack.access_spacing_ns;

    let mut touched_banks: Vec<BankId> = ops.iter().filter_map(|p| p.target.map(|t| t.0)).collect();
    touched_banks.sort();
    touched_banks.dedup();
    let mut touched_sets: Vec<usize> = ops
        .iter()
        .filter(|p| !p.bypass_cache)
        .map(|p| match p.op {
            TraceOp::Invalidate { addr } | TraceOp::Access { addr, .. } => cache.set_index(addr),
        })
        .collect();
    touched_sets.sort();
    touched_sets.dedup();

    let mut eng = Engine {
        cfg,
        mc: MemoryController::new(cfg.policy.clone(), cfg.timing.clone(), geom.total_banks()),
        cache,
        ledger: ActivationLedger::new(window_ns)?,
        evaluator: FlipEvaluator::new(cfg.flip.clone(), geom),
        cursor: 0,
        window_max: Vec::new(),
        flips: Vec::new(),
        trr_refreshes: 0,
        cache_hits: 0,
        dram_accesses: 0,
        accesses_issued: 0,
        background_accesses: 0,
        trace: Vec::new(),
    };

    let clock = match attack.arrival {
        Arrival::Uniform => UniformClock::new(pps),
        Arrival::Poisson => None,
    };
    let time_free = match cfg.policy.kind {
        PolicyKind::Closed => true,
        PolicyKind::Open => cfg.policy.timeout_ns.is_none(),
        PolicyKind::Adaptive => false,
    };
    let can_fast_forward = match clock {
        Some(c) => {
            options.fast_forward
                && cfg.policy.kind != PolicyKind::Adaptive
                && (time_free || c.integral_period())
                && span <= c.min_gap()
                && !ops.is_empty()
        }
        None => false,
    };

    let duty = attack.duty_cycle.map(|d| {
        let on = (d.on_ms * 1e6).round() as u64;
        let period = on + (d.off_ms * 1e6).round() as u64;
        (on.max(1), period.max(1))
    });

    let mut bg_rng = stream(seed, 2);
    let bg_gap = if attack.background_load > 0.0 {
        1e9 / attack.background_load
    } else {
        f64::INFINITY
    };
    let mut bg_index: u64 = 1;
    let bg_time = |j: u64| -> u64 {
        let t = j as f64 * bg_gap;
        if t.is_finite() && t < u64::MAX as f64 {
            t as u64
        } else {
            u64::MAX
        }
    };

    let mut poisson_rng = stream(seed, 3);
    let exp = if pps > 0.0 {
        Exp::new(pps / 1e9).ok()
    } else {
        None
    };
    let mut poisson_t = 0.0f64;

    let mut packets: u64 = 0;
    let mut fast_forwarded: u64 = 0;
    let mut k: u64 = 0;
    let mut last_start: Option<u64> = None;
    let mut steady: Option<(Snapshot, PacketEffect)> = None;

    loop {
        let arrival = match (attack.arrival, clock) {
            (Arrival::Uniform, Some(c)) => c.arrival(k),
            (Arrival::Poisson, _) => match exp {
                Some(e) => {
                    if k > 0 {
                        poisson_t += e.sample(&mut poisson_rng);
                    }
                    poisson_t.min(u64::MAX as f64) as u64
                }
                None => u64::MAX,
            },
            _ => u64::MAX,
        };
        if arrival >= end_ns {
            break;
        }
        let mut off_edge = u64::MAX;
        if let Some((on, period)) = duty {
            let phase_start = arrival / period * period;
            if arrival - phase_start >= on {
                match clock {
                    Some(c) if attack.arrival == Arrival::Uniform => {
                        k = c.first_at(phase_start + period).max(k + 1);
                    }
                    _ => k += 1,
                }
                continue;
            }
            off_edge = phase_start + on;
        }

        while bg_time(bg_index) < arrival {
            let t = bg_time(bg_index);
            eng.background_access(t, &mut bg_rng)?;
            bg_index += 1;
            steady = None;
        }

        let start = arrival.max(eng.cursor);
        eng.advance_windows(start)?;
        let tracing = eng.trace.len() < attack.trace_limit;

        if can_fast_forward && !tracing && start == arrival {
            let c = clock.expect("uniform clock");
            if let Some((snap, effect)) = &steady {
                if *snap == eng.snapshot(&touched_banks, &touched_sets, start, time_free) {
                    let limit = end_ns
                        .min(eng.ledger.window_end().saturating_sub(span))
                        .min(off_edge)
                        .min(bg_time(bg_index).saturating_sub(span));
                    let m = c.first_at(limit).saturating_sub(k);
                    if m >= 2 {
                        for (&(bank, row), &n) in &effect.activations {
                            eng.ledger.record_many(bank, row, start, n * m)?;
                        }
                        eng.mc.credit(&effect.hist.scaled(m));
                        let dram = effect.hist.total() * m;
                        eng.dram_accesses += dram;
                        eng.cache_hits += effect.cache_hits * m;
                        eng.accesses_issued += effect.accesses * m;
                        let last = c.arrival(k + m - 1);
                        let prev = last_start.unwrap_or(start);
                        eng.mc.shift_banks(&touched_banks, last - prev);
                        eng.cursor = last + span;
                        last_start = Some(last);
                        packets += m;
                        fast_forwarded += m;
                        k += m;
                        continue;
                    }
                }
            }
        }

        let before =
            can_fast_forward.then(|| eng.snapshot(&touched_banks, &touched_sets, start, time_free));
        let effect = eng.run_packet(&ops, start)?;
        packets += 1;
        last_start = Some(start);
        k += 1;
        if let Some(before) = before {
            let after_start = clock.map(|c| c.arrival(k)).unwrap_or(start);
            let after = eng.snapshot(&touched_banks, &touched_sets, after_start, time_free);
            steady = (after == before).then_some((after, effect));
        }
    }

    while bg_time(bg_index) < end_ns {
        let t = bg_time(bg_index);
        eng.background_access(t, &mut bg_rng)?;
        bg_index += 1;
    }

    eng.advance_windows(end_ns)?;
    let partial_from = eng.ledger.current().window_id.saturating_mul(window_ns);
    let last_time = eng.cursor.max(end_ns);
    if partial_from < end_ns || eng.ledger.current().total > 0 {
        let w = eng.ledger.current().clone();
        eng.close_window(w, last_time);
    }

    let duration_s = attack.duration_s;
    let hammered_calls = profile
        .function(&attack.hammered_function)
        .map(|f| f.calls_per_packet)
        .unwrap_or(0);
    let feasibility = rate_chain(
        attack.bandwidth,
        attack.frame_bytes,
        attack.prefix,
        hammered_calls,
        window_ns,
        &attack.thresholds,
    );
    let windows = eng.window_max.len() as u64;
    let flips_per_hour = if duration_s > 0.0 {
        eng.flips.len() as f64 / (duration_s / 3600.0)
    } else {
        0.0
    };
    let dram_access_rate = if duration_s > 0.0 {
        eng.dram_accesses as f64 / duration_s
    } else {
        0.0
    };
    let mut flips = eng.flips;
    flips.sort();
    Ok(SimReport {
        packets,
        packets_per_s: pps,
        duration_s,
        window_ns,
        windows,
        window_max_activations: eng.window_max,
        flips,
        flips_per_hour,
        access_classes: *eng.mc.histogram(),
        accesses_issued: eng.accesses_issued,
        cache_hits: eng.cache_hits,
        dram_accesses: eng.dram_accesses,
        dram_access_rate,
        background_accesses: eng.background_accesses,
        trr_refreshes: eng.trr_refreshes,
        fast_forwarded_packets: fast_forwarded,
        feasibility,
        access_trace: eng.trace,
    })
}

/// One grid point of a sweep.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepPoint {
    pub policy: PolicyKind,
    pub bandwidth: Bandwidth,
    pub report: SimReport,
}

/// Runs `base` for every (policy, bandwidth) pair in parallel. Results come
/// back in grid order, policies outermost.
pub fn sweep(
    base: &SimConfig,
    policies: &[PagePolicy],
    bandwidths: &[Bandwidth],
    seed: u64,
) -> Result<Vec<SweepPoint>> {
    let grid: Vec<(PagePolicy, Bandwidth)> = policies
        .iter()
        .flat_map(|p| bandwidths.iter().map(move |&b| (p.clone(), b)))
        .collect();
    grid.into_par_iter()
        .map(|(policy, bandwidth)| {
            let mut cfg = base.clone();
            cfg.policy = policy.clone();
            cfg.attack.bandwidth = bandwidth;
            simulate(&cfg, seed).map(|report| SweepPoint {
                policy: policy.kind,
                bandwidth,
                report,
            })
        })
        .collect()
}

/// Location of the first address of the hammered function.
pub fn hammered_location(cfg: &SimConfig, seed: u64) -> Result<DramLocation> {
    let profile = cfg.hammer_profile(seed)?;
    let f = profile
        .function(&cfg.attack.hammered_function)
        .ok_or_else(|| Error::UnknownFunction(cfg.attack.hammered_function.clone()))?;
    cfg.mapping.map_address(f.addresses[0], &cfg.geometry)
}
