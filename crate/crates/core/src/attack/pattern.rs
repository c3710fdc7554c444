use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::dram::{AddressMapping, DramGeometry, DramLocation};
use crate::error::{Error, Result};

/// Which addresses the hammered function ends up touching.
#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum HammerPattern {
    /// One address, re-opened on every access under a closing policy.
    #[default]
    OneLocation,
    /// `k` random addresses; with enough of them some share a bank.
    SingleSided { k: u32 },
    /// The two rows around `victim_row` in `bank`.
    DoubleSided { bank: u32, victim_row: u32 },
}

/// Addresses for `pattern`. `profile_addresses` are the hammered function's
/// own addresses; one-location hammering keeps the first of them.
pub fn pattern_addresses<R: Rng>(
    pattern: &HammerPattern,
    profile_addresses: &[u64],
    mapping: &AddressMapping,
    geom: &DramGeometry,
    rng: &mut R,
) -> Result<Vec<u64>> {
    match *pattern {
        HammerPattern::OneLocation => profile_addresses
            .first()
            .map(|&a| vec![a])
            .ok_or_else(|| Error::config("attack.pattern", "hammered function has no address")),
        HammerPattern::SingleSided { k } => {
            if k == 0 {
                return Err(Error::config("attack.pattern.k", "must be at least 1"));
            }
            let limit = mapping.address_limit().min(1u128 << 63) as u64;
            Ok((0..k).map(|_| rng.gen_range(0..limit) & !0x3f).collect())
        }
        HammerPattern::DoubleSided { bank, victim_row } => {
            if bank >= geom.total_banks() {
                return Err(Error::config("attack.pattern.bank", "outside the geometry"));
            }
            if victim_row == 0 || victim_row + 1 >= geom.rows_per_bank {
                return Err(Error::config(
                    "attack.pattern.victim_row",
                    "victim needs a row on each side",
                ));
            }
            let base = geom.bank_location(crate::dram::BankId(bank));
            [victim_row - 1, victim_row + 1]
                .into_iter()
                .map(|row| {
                    let loc = DramLocation { row, ..base };
                    mapping.encode(&loc).ok_or_else(|| {
                        Error::config("mapping", format!("row {row} of bank {bank} unreachable"))
                    })
                })
                .collect()
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn double_sided_sandwiches_victim() {
        let m = AddressMapping::default();
        let g = DramGeometry::default();
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let p = HammerPattern::DoubleSided {
            bank: 5,
            victim_row: 100,
        };
        let addrs = pattern_addresses(&p, &[], &m, &g, &mut rng).unwrap();
        let locs: Vec<DramLocation> = addrs
            .iter()
            .map(|&a| m.map_address(a, &g).unwrap())
            .collect();
        assert_eq!(g.bank_id(&locs[0]).0, 5);
        assert_eq!(g.bank_id(&locs[1]).0, 5);
        assert_eq!((locs[0].row, locs[1].row), (99, 101));
    }

    #[test]
    fn single_sided_is_seeded() {
        let m = AddressMapping::default();
        let g = DramGeometry::default();
        let p = HammerPattern::SingleSided { k: 8 };
        let a = pattern_addresses(&p, &[], &m, &g, &mut ChaCha8Rng::seed_from_u64(9)).unwrap();
        let b = pattern_addresses(&p, &[], &m, &g, &mut ChaCha8Rng::seed_from_u64(9)).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.len(), 8);
        assert!(a.iter().all(|&x| m.map_address(x, &g).is_ok()));
    }

    #[test]
    fn edge_victim_rejected() {
        let p = HammerPattern::DoubleSided {
            bank: 0,
            victim_row: 0,
        };
        let r = pattern_addresses(
            &p,
            &[],
            &AddressMapping::default(),
            &DramGeometry::default(),
            &mut ChaCha8Rng::seed_from_u64(0),
        );
        assert!(r.is_err());
    }
}
