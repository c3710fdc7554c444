//! Sliced, set-associative last-level cache with way-masking and LRU replacement.
//!
//! Only the LLC is modeled; a miss here is a DRAM access.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Half-open physical address range `[start, end)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AddrRange {
    pub start: u64,
    pub end: u64,
}

impl AddrRange {
    pub fn contains(&self, addr: u64) -> bool {
        (self.start..self.end).contains(&addr)
    }
}

/// Address ranges that bypass the cache.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct UncachedRegions(pub Vec<AddrRange>);

impl UncachedRegions {
    pub fn validate(&self) -> Result<()> {
        let mut ranges = self.0.clone();
        ranges.sort_by_key(|r| r.start);
        for r in &ranges {
            if r.start >= r.end {
                return Err(Error::config("cache.uncached", "empty or inverted range"));
            }
        }
        for pair in ranges.windows(2) {
            if pair[1].start < pair[0].end {
                return Err(Error::config("cache.uncached", "ranges overlap"));
            }
        }
        Ok(())
    }

    pub fn contains(&self, addr: u64) -> bool {
        self.0.iter().any(|r| r.contains(addr))
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct CacheConfig {
    pub slices: u32,
    pub sets_per_slice: u32,
    pub ways: u32,
    /// Ways left to the workload by cache allocation.
    pub cat_ways: u32,
    pub line_size: u32,
    /// One physical-address bit set per slice-index bit; the slice is their parity.
    pub slice_hash: Vec<Vec<u32>>,
    pub uncached: UncachedRegions,
}

impl Default for CacheConfig {
    /// 12 MiB, 12-way, 8 slices, restricted to a single way.
    fn default() -> Self {
        Self {
            slices: 8,
            sets_per_slice: 2048,
            ways: 12,
            cat_ways: 1,
            line_size: 64,
            slice_hash: vec![
                vec![
                    6, 10, 12, 14, 16, 17, 18, 20, 22, 24, 25, 26, 27, 28, 30, 32, 33,
                ],
                vec![
                    7, 11, 13, 15, 17, 19, 20, 21, 22, 23, 24, 26, 28, 29, 31, 33,
                ],
                vec![8, 12, 13, 16, 19, 22, 23, 26, 27, 30, 31],
            ],
            uncached: UncachedRegions::default(),
        }
    }
}

impl CacheConfig {
    pub fn validate(&self) -> Result<()> {
        if self.ways == 0 {
            return Err(Error::config("cache.ways", "must be at least 1"));
        }
        if self.cat_ways == 0 || self.cat_ways > self.ways {
            return Err(Error::config(
                "cache.cat_ways",
                format!("must be within [1, ways = {}]", self.ways),
            ));
        }
        if !self.sets_per_slice.is_power_of_two() {
            return Err(Error::config(
                "cache.sets_per_slice",
                "must be a power of two",
            ));
        }
        if !self.line_size.is_power_of_two() {
            return Err(Error::config("cache.line_size", "must be a power of two"));
        }
        if self.slices == 0 || self.slices != 1u32 << self.slice_hash.len().min(31) {
            return Err(Error::config(
                "cache.slice_hash",
                format!(
                    "{} hash functions cannot address {} slices",
                    self.slice_hash.len(),
                    self.slices
                ),
            ));
        }
        if self.slice_hash.iter().flatten().any(|&b| b >= 64) {
            return Err(Error::config("cache.slice_hash", "bit index above 63"));
        }
        self.uncached.validate()
    }

    fn slice_masks(&self) -> Vec<u64> {
        self.slice_hash
            .iter()
            .map(|set| set.iter().fold(0u64, |m, &b| m ^ (1u64 << b)))
            .collect()
    }
}

/// Slice selected by the XOR hash of `addr`.
pub fn slice_of(addr: u64, config: &CacheConfig) -> u32 {
    slice_from_masks(addr, &config.slice_masks())
}

fn slice_from_masks(addr: u64, masks: &[u64]) -> u32 {
    masks.iter().enumerate().fold(0u32, |acc, (i, &m)| {
        acc | (((addr & m).count_ones() & 1) << i)
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "result")]
pub enum CacheOutcome {
    Hit,
    /// `evicted` is the line address pushed out to make room.
    Miss {
        evicted: Option<u64>,
    },
}

impl CacheOutcome {
    pub fn is_hit(&self) -> bool {
        matches!(self, CacheOutcome::Hit)
    }
}

/// Resident lines of every (slice, set), most recently used first.
#[derive(Debug, Clone)]
pub struct CacheState {
    config: CacheConfig,
    masks: Vec<u64>,
    line_shift: u32,
    sets: Vec<Vec<u64>>,
}

impl CacheState {
    pub fn new(config: CacheConfig) -> Result<Self> {
        config.validate()?;
        let sets = (config.slices as usize) * (config.sets_per_slice as usize);
        Ok(Self {
            masks: config.slice_masks(),
            line_shift: config.line_size.trailing_zeros(),
            sets: vec![Vec::with_capacity(config.cat_ways as usize); sets],
            config,
        })
    }

    pub fn config(&self) -> &CacheConfig {
        &self.config
    }

    pub fn line_of(&self, addr: u64) -> u64 {
        addr >> self.line_shift
    }

    /// Flat (slice, set) index of `addr`.
    pub fn set_index(&self, addr: u64) -> usize {
        let slice = slice_from_masks(addr, &self.masks) as usize;
        let set = (self.line_of(addr) as usize) & (self.config.sets_per_slice as usize - 1);
        slice * self.config.sets_per_slice as usize + set
    }

    /// Resident line addresses of a set, MRU first.
    pub fn set_contents(&self, index: usize) -> &[u64] {
        &self.sets[index]
    }

    pub fn is_uncached(&self, addr: u64) -> bool {
        self.config.uncached.contains(addr)
    }

    pub fn contains(&self, addr: u64) -> bool {
        let line = self.line_of(addr);
        self.sets[self.set_index(addr)].contains(&line)
    }

    pub fn access(&mut self, addr: u64) -> CacheOutcome {
        if self.is_uncached(addr) {
            return CacheOutcome::Miss { evicted: None };
        }
        let line = self.line_of(addr);
        let cap = self.config.cat_ways as usize;
        let idx = self.set_index(addr);
        let set = &mut self.sets[idx];
        if let Some(pos) = set.iter().position(|&l| l == line) {
            set[..=pos].rotate_right(1);
            return CacheOutcome::Hit;
        }
        let evicted = if set.len() >= cap { set.pop() } else { None };
        set.insert(0, line);
        CacheOutcome::Miss { evicted }
    }

    /// Invalidates the line holding `addr`, if resident.
    pub fn flush(&mut self, addr: u64) {
        let line = self.line_of(addr);
        let idx = self.set_index(addr);
        self.sets[idx].retain(|&l| l != line);
    }
}

/// Stand-alone entry point matching the per-operation contract.
pub fn cache_access(state: &mut CacheState, addr: u64) -> CacheOutcome {
    state.access(addr)
}
