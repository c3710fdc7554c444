//! Distance-aware disturbance threshold model.

use std::collections::{BTreeMap, BTreeSet, HashMap};

use serde::{Deserialize, Serialize};

use super::geometry::{BankId, DramGeometry};
use super::ledger::WindowCounts;
use crate::error::{Error, Result};

/// Activations needed within one window at a given row distance.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DistanceThreshold {
    pub distance: u32,
    pub activations: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct FlipModel {
    /// Sorted by distance; activations must not decrease with distance.
    pub thresholds: Vec<DistanceThreshold>,
    /// Fraction of cells that are susceptible to disturbance.
    pub susceptibility: f64,
    /// Every over-threshold victim row flips once, without consulting the cell map.
    /// A susceptibility of zero still disables flips.
    pub deterministic: bool,
    pub seed: u64,
}

impl Default for FlipModel {
    fn default() -> Self {
        Self {
            thresholds: vec![
                DistanceThreshold {
                    distance: 1,
                    activations: 139_000,
                },
                DistanceThreshold {
                    distance: 2,
                    activations: 556_000,
                },
            ],
            susceptibility: 1e-5,
            deterministic: false,
            seed: 0,
        }
    }
}

impl FlipModel {
    pub fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.susceptibility) {
            return Err(Error::config(
                "flip.susceptibility",
                "must be within [0, 1]",
            ));
        }
        let mut prev: Option<DistanceThreshold> = None;
        for t in &self.thresholds {
            if t.distance == 0 {
                return Err(Error::config(
                    "flip.thresholds",
                    "distance must be at least 1",
                ));
            }
            if t.activations == 0 {
                return Err(Error::config(
                    "flip.thresholds",
                    "activations must be positive",
                ));
            }
            if let Some(p) = prev {
                if t.distance <= p.distance {
                    return Err(Error::config(
                        "flip.thresholds",
                        "distances must be strictly increasing",
                    ));
                }
                if t.activations < p.activations {
                    return Err(Error::config(
                        "flip.thresholds",
                        "thresholds must not decrease with distance",
                    ));
                }
            }
            prev = Some(*t);
        }
        Ok(())
    }

    pub fn max_distance(&self) -> u32 {
        self.thresholds
            .iter()
            .map(|t| t.distance)
            .max()
            .unwrap_or(0)
    }

    pub fn min_threshold(&self) -> Option<u64> {
        self.thresholds.iter().map(|t| t.activations).min()
    }

    /// Whether a single cell is susceptible, from a seeded hash of its coordinates.
    pub fn is_susceptible(&self, bank: BankId, row: u32, cell: u32) -> bool {
        let h = cell_hash(self.seed, bank.0, row, cell);
        unit_interval(h) < self.susceptibility
    }

    /// Cell reported for a deterministic-mode flip in this row.
    pub fn representative_cell(&self, bank: BankId, row: u32, cells_per_row: u64) -> u32 {
        (cell_hash(self.seed ^ 0xa5a5_5a5a_dead_beef, bank.0, row, u32::MAX) % cells_per_row) as u32
    }
}

/// One flipped cell.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct Flip {
    pub window_id: u64,
    pub bank: BankId,
    pub row: u32,
    pub cell: u32,
    /// Smallest row distance whose aggregated activations met the threshold.
    pub distance: u32,
}

/// Evaluates windows against a [`FlipModel`], memoizing each row's susceptible cells.
#[derive(Debug, Clone)]
pub struct FlipEvaluator {
    model: FlipModel,
    rows_per_bank: u32,
    cells_per_row: u64,
    cell_maps: HashMap<(BankId, u32), Vec<u32>>,
}

impl FlipEvaluator {
    pub fn new(model: FlipModel, geom: &DramGeometry) -> Self {
        Self {
            model,
            rows_per_bank: geom.rows_per_bank,
            cells_per_row: geom.cells_per_row(),
            cell_maps: HashMap::new(),
        }
    }

    pub fn model(&self) -> &FlipModel {
        &self.model
    }

    /// Susceptible cells of a row, in ascending order.
    pub fn susceptible_cells(&mut self, bank: BankId, row: u32) -> &[u32] {
        let model = &self.model;
        let cells = self.cells_per_row;
        self.cell_maps.entry((bank, row)).or_insert_with(|| {
            if model.susceptibility <= 0.0 {
                return Vec::new();
            }
            (0..cells as u32)
                .filter(|&c| model.is_susceptible(bank, row, c))
                .collect()
        })
    }

    /// Flips for a closed window. Rows in `refreshed` were restored by TRR and
    /// cannot flip in this window.
    pub fn evaluate(
        &mut self,
        window: &WindowCounts,
        refreshed: &BTreeMap<(BankId, u32), u32>,
    ) -> Vec<Flip> {
        let mut flips = Vec::new();
        if self.model.susceptibility <= 0.0 || self.model.thresholds.is_empty() {
            return flips;
        }
        let max_d = i64::from(self.model.max_distance());
        let rows = i64::from(self.rows_per_bank);

        for (bank, active) in window.by_bank() {
            let mut victims = BTreeSet::new();
            for &row in active.keys() {
                let row = i64::from(row);
                for v in (row - max_d).max(0)..=(row + max_d).min(rows - 1) {
                    if v != row {
                        victims.insert(v as u32);
                    }
                }
            }
            for victim in victims {
                if refreshed.contains_key(&(bank, victim)) {
                    continue;
                }
                let Some(distance) = self.flip_distance(&active, victim) else {
                    continue;
                };
                if self.model.deterministic {
                    let cell = self
                        .model
                        .representative_cell(bank, victim, self.cells_per_row);
                    flips.push(Flip {
                        window_id: window.window_id,
                        bank,
                        row: victim,
                        cell,
                        distance,
                    });
                } else {
                    let window_id = window.window_id;
                    flips.extend(
                        self.susceptible_cells(bank, victim)
                            .iter()
                            .map(|&cell| Flip {
                                window_id,
                                bank,
                                row: victim,
                                cell,
                                distance,
                            }),
                    );
                }
            }
        }
        flips
    }

    fn flip_distance(&self, active: &BTreeMap<u32, u64>, victim: u32) -> Option<u32> {
        let at = |row: i64| -> u64 {
            if row < 0 || row > i64::from(u32::MAX) {
                0
            } else {
                active.get(&(row as u32)).copied().unwrap_or(0)
            }
        };
        self.model.thresholds.iter().find_map(|t| {
            let d = i64::from(t.distance);
            let v = i64::from(victim);
            let sum = at(v - d) + at(v + d);
            (sum >= t.activations).then_some(t.distance)
        })
    }
}

/// One-shot evaluation without reusing a cell-map cache.
pub fn evaluate_flips(
    window: &WindowCounts,
    model: &FlipModel,
    geom: &DramGeometry,
    refreshed: &BTreeMap<(BankId, u32), u32>,
) -> Vec<Flip> {
    FlipEvaluator::new(model.clone(), geom).evaluate(window, refreshed)
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

pub(crate) fn cell_hash(seed: u64, bank: u32, row: u32, cell: u32) -> u64 {
    let h = splitmix64(seed ^ u64::from(bank));
    let h = splitmix64(h ^ u64::from(row));
    splitmix64(h ^ u64::from(cell))
}

fn unit_interval(h: u64) -> f64 {
    (h >> 11) as f64 / (1u64 << 53) as f64
}
