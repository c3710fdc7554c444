//! XOR-reduction address mapping.
//!
//! Every output bit of every coordinate is the parity of a subset of the
//! physical address bits. This is the shape of the reverse-engineered Intel
//! mapping functions, and with one bit per set it also covers plain linear
//! bit slicing.

use serde::{Deserialize, Serialize};

use super::geometry::{DramGeometry, DramLocation};
use crate::error::{Error, Result};

const COORD_NAMES: [&str; 7] = [
    "channel",
    "dimm",
    "rank",
    "bank_group",
    "bank",
    "row",
    "column",
];

/// Serialized form: each coordinate lists one bit-index set per output bit,
/// least-significant output bit first.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct MappingSpec {
    pub phys_bits: u32,
    pub channel: Vec<Vec<u32>>,
    pub dimm: Vec<Vec<u32>>,
    pub rank: Vec<Vec<u32>>,
    pub bank_group: Vec<Vec<u32>>,
    pub bank: Vec<Vec<u32>>,
    pub row: Vec<Vec<u32>>,
    pub column: Vec<Vec<u32>>,
}

impl Default for MappingSpec {
    /// Synthetic DDR4-like mapping for the default 16 GiB geometry: 13 column
    /// bits, 16 row bits on top, and five bank/rank bits each XOR-ing one low
    /// bit with one row bit.
    fn default() -> Self {
        Self {
            phys_bits: 34,
            channel: vec![],
            dimm: vec![],
            rank: vec![vec![13, 18]],
            bank_group: vec![vec![14, 19], vec![15, 20]],
            bank: vec![vec![16, 21], vec![17, 22]],
            row: (18..34).map(|b| vec![b]).collect(),
            column: (0..13).map(|b| vec![b]).collect(),
        }
    }
}

/// Compiled mapping: one mask per output bit.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "MappingSpec", into = "MappingSpec")]
pub struct AddressMapping {
    phys_bits: u32,
    masks: [Vec<u64>; 7],
}

impl Default for AddressMapping {
    fn default() -> Self {
        AddressMapping::try_from(MappingSpec::default()).expect("default mapping is valid")
    }
}

impl TryFrom<MappingSpec> for AddressMapping {
    type Error = Error;

    fn try_from(spec: MappingSpec) -> Result<Self> {
        if spec.phys_bits == 0 || spec.phys_bits > 64 {
            return Err(Error::config("mapping.phys_bits", "must be in 1..=64"));
        }
        let sets = [
            &spec.channel,
            &spec.dimm,
            &spec.rank,
            &spec.bank_group,
            &spec.bank,
            &spec.row,
            &spec.column,
        ];
        let mut masks: [Vec<u64>; 7] = Default::default();
        for (i, coord_sets) in sets.into_iter().enumerate() {
            if coord_sets.len() > 32 {
                return Err(Error::config(
                    format!("mapping.{}", COORD_NAMES[i]),
                    "more than 32 output bits",
                ));
            }
            for set in coord_sets {
                if set.is_empty() {
                    return Err(Error::config(
                        format!("mapping.{}", COORD_NAMES[i]),
                        "empty bit set",
                    ));
                }
                let mut mask = 0u64;
                for &bit in set {
                    if bit >= spec.phys_bits {
                        return Err(Error::config(
                            format!("mapping.{}", COORD_NAMES[i]),
                            format!("bit {bit} outside the {}-bit address", spec.phys_bits),
                        ));
                    }
                    mask ^= 1u64 << bit;
                }
                masks[i].push(mask);
            }
        }
        Ok(Self {
            phys_bits: spec.phys_bits,
            masks,
        })
    }
}

impl From<AddressMapping> for MappingSpec {
    fn from(m: AddressMapping) -> Self {
        let bits = |masks: &Vec<u64>| -> Vec<Vec<u32>> {
            masks
                .iter()
                .map(|&mask| (0..64).filter(|b| mask >> b & 1 == 1).collect())
                .collect()
        };
        MappingSpec {
            phys_bits: m.phys_bits,
            channel: bits(&m.masks[0]),
            dimm: bits(&m.masks[1]),
            rank: bits(&m.masks[2]),
            bank_group: bits(&m.masks[3]),
            bank: bits(&m.masks[4]),
            row: bits(&m.masks[5]),
            column: bits(&m.masks[6]),
        }
    }
}

impl AddressMapping {
    /// Builds a mapping directly from per-coordinate masks (channel ... column).
    pub fn from_masks(phys_bits: u32, masks: [Vec<u64>; 7]) -> Result<Self> {
        let spec: MappingSpec = AddressMapping { phys_bits, masks }.into();
        AddressMapping::try_from(spec)
    }

    pub fn phys_bits(&self) -> u32 {
        self.phys_bits
    }

    pub fn masks(&self) -> &[Vec<u64>; 7] {
        &self.masks
    }

    /// Highest address (exclusive) covered by the mapping.
    pub fn address_limit(&self) -> u128 {
        1u128 << self.phys_bits
    }

    /// Checks that every decodable coordinate fits the geometry.
    pub fn validate(&self, geom: &DramGeometry) -> Result<()> {
        for (i, bound) in geom.bounds().into_iter().enumerate() {
            let width = self.masks[i].len() as u32;
            if width > 0 && (1u64 << width) > u64::from(bound) {
                return Err(Error::config(
                    format!("mapping.{}", COORD_NAMES[i]),
                    format!("{width} output bits exceed the geometry bound {bound}"),
                ));
            }
        }
        Ok(())
    }

    fn decode(&self, addr: u64) -> [u32; 7] {
        let mut out = [0u32; 7];
        for (slot, masks) in out.iter_mut().zip(&self.masks) {
            *slot = masks.iter().enumerate().fold(0u32, |acc, (i, &m)| {
                acc | (((addr & m).count_ones() & 1) << i)
            });
        }
        out
    }

    /// Decodes a physical address into DRAM coordinates.
    pub fn map_address(&self, addr: u64, geom: &DramGeometry) -> Result<DramLocation> {
        if u128::from(addr) >= self.address_limit() {
            return Err(Error::InvalidInput(format!(
                "address {addr:#x} exceeds the {}-bit physical address width",
                self.phys_bits
            )));
        }
        let loc = DramLocation::from_coords(self.decode(addr));
        if !geom.contains(&loc) {
            return Err(Error::InvalidInput(format!(
                "address {addr:#x} decodes to {loc:?}, outside the geometry"
            )));
        }
        Ok(loc)
    }

    /// Finds an address that decodes to `loc`, solving the XOR system over
    /// GF(2). Free address bits are left at zero. Returns `None` when the
    /// coordinates are unreachable under this mapping.
    pub fn encode(&self, loc: &DramLocation) -> Option<u64> {
        let coords = loc.coords();
        // (mask, rhs) equations
        let mut rows: Vec<(u64, u8)> = Vec::new();
        for (masks, &value) in self.masks.iter().zip(coords.iter()) {
            if masks.len() < 32 && value >> masks.len() != 0 {
                return None;
            }
            for (i, &m) in masks.iter().enumerate() {
                rows.push((m, ((value >> i) & 1) as u8));
            }
        }

        let mut pivots: Vec<(u32, u64, u8)> = Vec::new();
        for (mut mask, mut rhs) in rows {
            for &(bit, pmask, prhs) in &pivots {
                if mask >> bit & 1 == 1 {
                    mask ^= pmask;
                    rhs ^= prhs;
                }
            }
            if mask == 0 {
                if rhs != 0 {
                    return None;
                }
                continue;
            }
            let bit = 63 - mask.leading_zeros();
            // keep the basis fully reduced
            for p in pivots.iter_mut() {
                if p.1 >> bit & 1 == 1 {
                    p.1 ^= mask;
                    p.2 ^= rhs;
                }
            }
            pivots.push((bit, mask, rhs));
        }

        // With free variables at zero each pivot bit equals its rhs.
        let addr = pivots
            .iter()
            .filter(|p| p.2 == 1)
            .fold(0u64, |acc, p| acc | 1u64 << p.0);
        Some(addr)
    }
}
