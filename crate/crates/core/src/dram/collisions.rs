use std::collections::BTreeMap;

use serde::Serialize;

use super::geometry::{BankId, DramGeometry};
use super::mapping::AddressMapping;
use crate::error::Result;

/// Probability that at least two of `k` uniformly random addresses share a bank.
///
/// `banks` of zero is treated as one.
pub fn bank_collision_probability(k: u64, banks: u64) -> f64 {
    let banks = banks.max(1);
    if k > banks {
        return 1.0;
    }
    let b = banks as f64;
    let all_distinct: f64 = (0..k).map(|i| (b - i as f64) / b).product();
    1.0 - all_distinct
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize)]
pub struct BankHistogram {
    pub counts: BTreeMap<BankId, usize>,
    pub total: usize,
    pub max_bucket: usize,
}

/// Tallies the banks hit by `addresses`.
pub fn collisions_for(
    addresses: &[u64],
    mapping: &AddressMapping,
    geom: &DramGeometry,
) -> Result<BankHistogram> {
    let mut hist = BankHistogram::default();
    for &addr in addresses {
        let loc = mapping.map_address(addr, geom)?;
        *hist.counts.entry(geom.bank_id(&loc)).or_insert(0) += 1;
        hist.total += 1;
    }
    hist.max_bucket = hist.counts.values().copied().max().unwrap_or(0);
    Ok(hist)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn pigeonhole_is_certain() {
        assert_eq!(bank_collision_probability(33, 32), 1.0);
        assert_eq!(bank_collision_probability(65, 64), 1.0);
    }

    #[test]
    fn one_address_never_collides() {
        assert_eq!(bank_collision_probability(1, 32), 0.0);
        assert_eq!(bank_collision_probability(0, 32), 0.0);
    }

    #[test]
    fn eight_of_thirty_two() {
        assert!((bank_collision_probability(8, 32) - 0.6143).abs() < 1e-4);
    }

    #[test]
    fn empty_histogram() {
        let h = collisions_for(&[], &AddressMapping::default(), &DramGeometry::default()).unwrap();
        assert_eq!(h.total, 0);
        assert!(h.counts.is_empty());
        assert_eq!(h.max_bucket, 0);
    }

    #[test]
    fn thirty_three_addresses_share_a_bank() {
        let addrs: Vec<u64> = (0..33u64).map(|i| i * 0x2000 + i * 0x4_0000).collect();
        let h =
            collisions_for(&addrs, &AddressMapping::default(), &DramGeometry::default()).unwrap();
        assert_eq!(h.total, 33);
        assert!(h.max_bucket >= 2);
    }
}
