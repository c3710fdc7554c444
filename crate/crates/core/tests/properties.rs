//! Invariants checked over generated inputs.

mod common;

use std::collections::HashMap;

use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use netflip::cache::{CacheConfig, CacheOutcome, CacheState, UncachedRegions};
use netflip::classifier::detect_jumps;
use netflip::config::RunConfig;
use netflip::dram::{
    apply_trr, bank_collision_probability, ActivationLedger, AddressMapping, BankId, DramGeometry,
    DramLocation, TrrConfig,
};
use netflip::exploit::{enumerate_dns_bitsquats, is_valid_domain, scan_ocsp};
use netflip::memctrl::{latency_cycles, AccessClass, TimingConfig};

fn timing() -> impl Strategy<Value = TimingConfig> {
    (
        1u32..60,
        1u32..60,
        0u64..500,
        800u32..4000,
        any::<bool>(),
        10u32..60,
    )
        .prop_map(
            |(t_rp, t_rcd, base, mts, double_clocked, cpu)| TimingConfig {
                t_rp,
                t_rcd,
                base_hit_latency: base,
                transfer_rate_mts: f64::from(mts),
                double_clocked,
                cpu_freq_hz: f64::from(cpu) * 1e8,
            },
        )
}

proptest! {
    #[test]
    fn decode_is_total_and_ignores_column_bits(addr in 0u64..1 << 34, col in 0u64..1 << 13) {
        let (m, g) = (AddressMapping::default(), DramGeometry::default());
        let a = m.map_address(addr, &g).unwrap();
        let b = m.map_address(addr ^ col, &g).unwrap();
        prop_assert!(g.contains(&a));
        prop_assert_eq!(g.bank_id(&a), g.bank_id(&b));
        prop_assert_eq!(a.row, b.row);
    }

    #[test]
    fn encode_inverts_decode(bank in 0u32..32, row in 0u32..65536, column in 0u32..8192) {
        let (m, g) = (AddressMapping::default(), DramGeometry::default());
        let loc = DramLocation { row, column, ..g.bank_location(BankId(bank)) };
        let addr = m.encode(&loc).expect("every in-geometry location is reachable");
        prop_assert_eq!(m.map_address(addr, &g).unwrap(), loc);
    }

    #[test]
    fn ledger_conserves_activations(
        mut events in prop::collection::vec((0u64..1_000_000, 0u32..4, 0u32..16), 1..300),
        window in 1u64..200_000,
    ) {
        events.sort();
        let mut ledger = ActivationLedger::new(window).unwrap();
        let mut windows = Vec::new();
        for &(t, bank, row) in &events {
            windows.extend(ledger.record_activation(BankId(bank), row, t).unwrap());
        }
        windows.push(ledger.finish());
        let mut total = 0;
        let mut last_id = None;
        for w in &windows {
            prop_assert_eq!(w.total, w.counts.values().sum::<u64>());
            prop_assert!(last_id.is_none_or(|id| w.window_id > id));
            last_id = Some(w.window_id);
            total += w.total;
        }
        prop_assert_eq!(total, events.len() as u64);
        // each event lands in the window its timestamp names
        let mut expected: HashMap<(u64, u32, u32), u64> = HashMap::new();
        for &(t, bank, row) in &events {
            *expected.entry((t / window, bank, row)).or_default() += 1;
        }
        for w in &windows {
            for (&(bank, row), &n) in &w.counts {
                prop_assert_eq!(expected.get(&(w.window_id, bank.0, row)), Some(&n));
            }
        }
    }

    #[test]
    fn latency_is_base_plus_converted_cycles(t in timing()) {
        for (class, extra) in [
            (AccessClass::RowHit, 0),
            (AccessClass::PageEmpty, t.t_rp),
            (AccessClass::RowConflict, t.t_rp + t.t_rcd),
        ] {
            let exact = f64::from(extra) * t.cpu_freq_hz / t.dram_clock_hz();
            let got = latency_cycles(class, &t) - t.base_hit_latency;
            // ceiling, with integral ratios kept exact
            prop_assert!(got as f64 >= exact - 1e-6 && (got as f64) < exact + 1.0);
        }
        let hit = latency_cycles(AccessClass::RowHit, &t);
        let empty = latency_cycles(AccessClass::PageEmpty, &t);
        let conflict = latency_cycles(AccessClass::RowConflict, &t);
        prop_assert!(hit <= empty && empty <= conflict);
        if t.cpu_freq_hz >= t.dram_clock_hz() {
            prop_assert!(hit < empty && empty < conflict);
        }
    }

    #[test]
    fn cache_matches_reference_lru(
        cat_ways in 1u32..=4,
        addrs in prop::collection::vec((0u64..64, any::<bool>()), 1..400),
    ) {
        let cfg = CacheConfig {
            slices: 1,
            sets_per_slice: 4,
            ways: 4,
            cat_ways,
            line_size: 64,
            slice_hash: vec![],
            uncached: UncachedRegions::default(),
        };
        let mut cache = CacheState::new(cfg).unwrap();
        let mut model: HashMap<u64, Vec<u64>> = HashMap::new();
        for &(line, flush) in &addrs {
            let addr = line * 64 + 5;
            let set = model.entry(line % 4).or_default();
            if flush {
                cache.flush(addr);
                set.retain(|&l| l != line);
                prop_assert!(!cache.contains(addr));
                continue;
            }
            let expected = match set.iter().position(|&l| l == line) {
                Some(p) => {
                    set.remove(p);
                    CacheOutcome::Hit
                }
                None => CacheOutcome::Miss {
                    evicted: (set.len() == cat_ways as usize).then(|| set.pop().unwrap()),
                },
            };
            set.insert(0, line);
            prop_assert_eq!(cache.access(addr), expected);
            prop_assert!(cache.contains(addr));
            let idx = cache.set_index(addr);
            prop_assert_eq!(cache.set_contents(idx), set.as_slice());
            prop_assert!(cache.set_contents(idx).len() <= cat_ways as usize);
        }
    }

    #[test]
    fn dns_candidates_are_single_bit_and_valid(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        for (domain, _) in common::random_domains(&mut rng, 4) {
            for c in enumerate_dns_bitsquats(&domain).unwrap() {
                let (a, b) = (c.original.as_bytes(), c.flipped.as_bytes());
                prop_assert_eq!(a.len(), b.len());
                let diff: u32 = a.iter().zip(b).map(|(x, y)| (x ^ y).count_ones()).sum();
                prop_assert_eq!(diff, 1);
                prop_assert_eq!(a[c.offset] ^ b[c.offset], 1 << c.bit);
                prop_assert!(is_valid_domain(&c.flipped));
                prop_assert_ne!(c.flipped.to_ascii_lowercase(), c.original.to_ascii_lowercase());
            }
        }
    }

    #[test]
    fn ocsp_probability_is_count_over_bits(seed in any::<u64>(), n in 1usize..200) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let db = common::synthetic_ocsp(&mut rng, n, b"RVE");
        let scan = scan_ocsp(&db).unwrap();
        prop_assert_eq!(scan.records, n);
        prop_assert_eq!(scan.probability, scan.exploitable.len() as f64 / (8 * db.len()) as f64);
        prop_assert_eq!(scan.dos_probability, scan.denial_of_service.len() as f64 / (8 * db.len()) as f64);
        for f in scan.exploitable.iter().chain(&scan.denial_of_service) {
            let o = f.candidate.offset;
            prop_assert_eq!(f.candidate.original.as_bytes(), &db[o..=o]);
            prop_assert_eq!(f.candidate.flipped.as_bytes(), &[db[o] ^ (1 << f.candidate.bit)]);
        }
    }

    #[test]
    fn step_survives_bounded_jitter(
        left in 3usize..20,
        right in 3usize..20,
        level in 100u64..400,
        min_step in 5u64..40,
        extra in 0u64..200,
        noise in prop::collection::vec(0u64..1000, 40),
    ) {
        // jitter below a fifth of the step threshold never hides or fakes a step
        let amp = min_step / 5;
        let height = 2 * min_step + extra;
        let series: Vec<u64> = (0..left + right)
            .map(|i| {
                let base = if i < left { level } else { level + height };
                base + noise[i] % (amp + 1)
            })
            .collect();
        prop_assert_eq!(detect_jumps(&series, min_step), vec![left]);
        let flat: Vec<u64> = (0..left + right).map(|i| level + noise[i] % (amp + 1)).collect();
        prop_assert!(detect_jumps(&flat, min_step).is_empty());
    }

    #[test]
    fn collision_probability_is_monotone(k in 0u64..80, banks in 1u64..80) {
        let p = bank_collision_probability(k, banks);
        prop_assert!((0.0..=1.0).contains(&p));
        prop_assert!(bank_collision_probability(k + 1, banks) >= p);
        prop_assert!(bank_collision_probability(k, banks + 1) <= p);
        if k > banks {
            prop_assert_eq!(p, 1.0);
        }
    }

    #[test]
    fn trr_refreshes_exactly_the_neighbours_of_busy_rows(
        counts in prop::collection::btree_map((0u32..2, 0u32..64), 0u64..200, 0..30),
        mac in 0u64..200,
        radius in 1u32..4,
    ) {
        let mut window = netflip::dram::WindowCounts::default();
        for (&(bank, row), &n) in &counts {
            window.counts.insert((BankId(bank), row), n);
            window.total += n;
        }
        let trr = TrrConfig { enabled: true, max_activation_count: mac, refresh_radius: radius, double_refresh: false };
        let refreshed = apply_trr(&window, &trr, 64);
        for bank in 0..2 {
            for row in 0..64u32 {
                let expected = counts
                    .iter()
                    .filter(|(&(b, r), &n)| b == bank && n > mac && r != row && r.abs_diff(row) <= radius)
                    .count() as u32;
                prop_assert_eq!(refreshed.get(&(BankId(bank), row)).copied().unwrap_or(0), expected);
            }
        }
    }

    #[test]
    fn config_digest_survives_toml(seed in any::<u64>(), cat_ways in 1u32..=12, window in 1u64..1 << 40) {
        let mut cfg = RunConfig { seed, ..RunConfig::default() };
        cfg.cache.cat_ways = cat_ways;
        cfg.refresh.window_ns = window;
        let back = RunConfig::from_toml(&cfg.to_toml().unwrap()).unwrap();
        prop_assert_eq!(back.digest().unwrap(), cfg.digest().unwrap());
        prop_assert_eq!(back, cfg);
    }
}
