use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Flat index of a bank across the whole channel/DIMM/rank/bank-group hierarchy.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct BankId(pub u32);

/// Physical organization of the simulated memory.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DramGeometry {
    pub channels: u32,
    pub dimms_per_channel: u32,
    pub ranks_per_dimm: u32,
    pub bank_groups: u32,
    pub banks_per_group: u32,
    pub rows_per_bank: u32,
    pub row_size_bytes: u32,
}

impl Default for DramGeometry {
    /// Single-DIMM DDR4 layout: 2 ranks x 4 bank groups x 4 banks = 32 banks of 8 KiB rows.
    fn default() -> Self {
        Self {
            channels: 1,
            dimms_per_channel: 1,
            ranks_per_dimm: 2,
            bank_groups: 4,
            banks_per_group: 4,
            rows_per_bank: 65536,
            row_size_bytes: 8192,
        }
    }
}

/// Coordinates of one byte in DRAM.
#[derive(
    Debug, Clone, Copy, Default, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize,
)]
pub struct DramLocation {
    pub channel: u32,
    pub dimm: u32,
    pub rank: u32,
    pub bank_group: u32,
    pub bank: u32,
    pub row: u32,
    pub column: u32,
}

impl DramGeometry {
    pub fn validate(&self) -> Result<()> {
        let counts = [
            ("geometry.channels", self.channels),
            ("geometry.dimms_per_channel", self.dimms_per_channel),
            ("geometry.ranks_per_dimm", self.ranks_per_dimm),
            ("geometry.bank_groups", self.bank_groups),
            ("geometry.banks_per_group", self.banks_per_group),
            ("geometry.rows_per_bank", self.rows_per_bank),
            ("geometry.row_size_bytes", self.row_size_bytes),
        ];
        for (key, value) in counts {
            if value == 0 {
                return Err(Error::config(key, "must be at least 1"));
            }
        }
        if !self.row_size_bytes.is_power_of_two() {
            return Err(Error::config(
                "geometry.row_size_bytes",
                "must be a power of two",
            ));
        }
        if u64::from(self.total_banks()) > u64::from(u32::MAX) {
            return Err(Error::config("geometry", "too many banks"));
        }
        Ok(())
    }

    pub fn total_banks(&self) -> u32 {
        self.channels
            * self.dimms_per_channel
            * self.ranks_per_dimm
            * self.bank_groups
            * self.banks_per_group
    }

    pub fn cells_per_row(&self) -> u64 {
        u64::from(self.row_size_bytes) * 8
    }

    /// Upper bounds of each coordinate in `DramLocation` field order.
    pub fn bounds(&self) -> [u32; 7] {
        [
            self.channels,
            self.dimms_per_channel,
            self.ranks_per_dimm,
            self.bank_groups,
            self.banks_per_group,
            self.rows_per_bank,
            self.row_size_bytes,
        ]
    }

    pub fn contains(&self, loc: &DramLocation) -> bool {
        loc.coords()
            .iter()
            .zip(self.bounds())
            .all(|(&value, bound)| value < bound)
    }

    pub fn bank_id(&self, loc: &DramLocation) -> BankId {
        let mut id = loc.channel;
        id = id * self.dimms_per_channel + loc.dimm;
        id = id * self.ranks_per_dimm + loc.rank;
        id = id * self.bank_groups + loc.bank_group;
        id = id * self.banks_per_group + loc.bank;
        BankId(id)
    }

    /// Inverse of [`bank_id`](Self::bank_id); `row` and `column` are zero.
    pub fn bank_location(&self, bank: BankId) -> DramLocation {
        let mut rest = bank.0;
        let bank_idx = rest % self.banks_per_group;
        rest /= self.banks_per_group;
        let bank_group = rest % self.bank_groups;
        rest /= self.bank_groups;
        let rank = rest % self.ranks_per_dimm;
        rest /= self.ranks_per_dimm;
        let dimm = rest % self.dimms_per_channel;
        rest /= self.dimms_per_channel;
        DramLocation {
            channel: rest,
            dimm,
            rank,
            bank_group,
            bank: bank_idx,
            row: 0,
            column: 0,
        }
    }
}

impl DramLocation {
    pub fn coords(&self) -> [u32; 7] {
        [
            self.channel,
            self.dimm,
            self.rank,
            self.bank_group,
            self.bank,
            self.row,
            self.column,
        ]
    }

    pub fn from_coords(c: [u32; 7]) -> Self {
        Self {
            channel: c[0],
            dimm: c[1],
            rank: c[2],
            bank_group: c[3],
            bank: c[4],
            row: c[5],
            column: c[6],
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_geometry_has_32_banks() {
        let g = DramGeometry::default();
        g.validate().unwrap();
        assert_eq!(g.total_banks(), 32);
        assert_eq!(g.cells_per_row(), 65536);
    }

    #[test]
    fn bank_id_round_trips() {
        let g = DramGeometry {
            channels: 2,
            dimms_per_channel: 2,
            ..DramGeometry::default()
        };
        for id in 0..g.total_banks() {
            let loc = g.bank_location(BankId(id));
            assert!(g.contains(&loc));
            assert_eq!(g.bank_id(&loc), BankId(id));
        }
    }

    #[test]
    fn rejects_zero_counts_and_odd_rows() {
        let g = DramGeometry {
            bank_groups: 0,
            ..DramGeometry::default()
        };
        let err = g.validate().unwrap_err().to_string();
        assert!(err.contains("geometry.bank_groups"), "{err}");

        let g = DramGeometry {
            row_size_bytes: 6000,
            ..DramGeometry::default()
        };
        assert!(g.validate().is_err());
    }
}
