//! Independent reference implementations shared by the integration tests.
//! None of them call into the library code they check.

#![allow(dead_code)]

use rand::Rng;
use regex::Regex;

// ---------------------------------------------------------------- numbers

pub fn gcd(mut a: u128, mut b: u128) -> u128 {
    while b != 0 {
        (a, b) = (b, a % b);
    }
    a
}

pub fn lcm(a: u128, b: u128) -> u128 {
    a / gcd(a, b) * b
}

pub fn mulmod(a: u64, b: u64, m: u64) -> u64 {
    (u128::from(a) * u128::from(b) % u128::from(m)) as u64
}

pub fn powmod(mut b: u64, mut e: u128, m: u64) -> u64 {
    let mut r = 1 % m;
    b %= m;
    while e > 0 {
        if e & 1 == 1 {
            r = mulmod(r, b, m);
        }
        b = mulmod(b, b, m);
        e >>= 1;
    }
    r
}

/// Inverse of `a` modulo `m` by the extended Euclidean algorithm.
pub fn modinv(a: u128, m: u128) -> Option<u128> {
    let (mut r0, mut r1) = (m as i128, (a % m) as i128);
    let (mut t0, mut t1) = (0i128, 1i128);
    while r1 != 0 {
        let q = r0 / r1;
        (r0, r1) = (r1, r0 - q * r1);
        (t0, t1) = (t1, t0 - q * t1);
    }
    (r0 == 1).then(|| t0.rem_euclid(m as i128) as u128)
}

/// Primes up to `limit` by a plain sieve.
pub fn primes_up_to(limit: usize) -> Vec<u64> {
    let mut composite = vec![false; limit + 1];
    let mut out = Vec::new();
    for i in 2..=limit {
        if !composite[i] {
            out.push(i as u64);
            let mut j = i * i;
            while j <= limit {
                composite[j] = true;
                j += i;
            }
        }
    }
    out
}

/// Primality of a number below 2^32 by trial division.
pub fn is_prime_u32(n: u64, small: &[u64]) -> bool {
    n >= 2
        && small
            .iter()
            .take_while(|&&p| p * p <= n)
            .all(|&p| !n.is_multiple_of(p))
}

struct Pending {
    index: usize,
    rem: u64,
    bound: u64,
}

fn isqrt(n: u64) -> u64 {
    let mut r = (n as f64).sqrt() as u64;
    while r * r > n {
        r -= 1;
    }
    while (r + 1) * (r + 1) <= n {
        r += 1;
    }
    r
}

/// Complete factorization of every input by exhaustive trial division.
///
/// All inputs share one pass over the primes below 2^32, produced by a
/// segmented sieve over odd numbers. An input leaves the pass once the
/// current prime exceeds the square root of its unfactored part.
pub fn trial_factor_all(ns: &[u64]) -> Vec<Vec<(u64, u32)>> {
    let mut factors: Vec<Vec<(u64, u32)>> = vec![Vec::new(); ns.len()];
    let mut active: Vec<Pending> = Vec::new();
    for (index, &n) in ns.iter().enumerate() {
        assert!(n >= 2);
        let k = n.trailing_zeros();
        if k > 0 {
            factors[index].push((2, k));
        }
        let rem = n >> k;
        if rem > 1 {
            active.push(Pending {
                index,
                rem,
                bound: isqrt(rem),
            });
        }
    }

    let sieving: Vec<u64> = primes_up_to(1 << 16).into_iter().skip(1).collect();
    const SEG: u64 = 1 << 18; // odd numbers per segment
    let mut composite = vec![false; SEG as usize];
    let mut lo = 3u64;
    while !active.is_empty() {
        assert!(lo < 1 << 32, "trial division ran past 2^32");
        let hi = lo + 2 * SEG;
        composite.iter_mut().for_each(|c| *c = false);
        for &q in &sieving {
            if q * q >= hi {
                break;
            }
            let mut start = lo.div_ceil(q) * q;
            if start % 2 == 0 {
                start += q;
            }
            start = start.max(q * q);
            let mut i = ((start - lo) / 2) as usize;
            while i < SEG as usize {
                composite[i] = true;
                i += q as usize;
            }
        }
        for (i, &c) in composite.iter().enumerate() {
            if c {
                continue;
            }
            let p = lo + 2 * i as u64;
            // p^-1 mod 2^64 by Newton iteration; n is divisible by p iff
            // n * p^-1 (wrapping) <= u64::MAX / p.
            let mut inv = p;
            for _ in 0..5 {
                inv = inv.wrapping_mul(2u64.wrapping_sub(p.wrapping_mul(inv)));
            }
            let lim = u64::MAX / p;
            for a in active.iter_mut() {
                let mut q = a.rem.wrapping_mul(inv);
                if q <= lim {
                    let mut k = 0;
                    while q <= lim {
                        a.rem = q;
                        k += 1;
                        q = a.rem.wrapping_mul(inv);
                    }
                    factors[a.index].push((p, k));
                    a.bound = isqrt(a.rem);
                }
            }
            if active.iter().any(|a| a.bound < p + 2) {
                active.retain(|a| {
                    if a.bound >= p + 2 {
                        return true;
                    }
                    if a.rem > 1 {
                        factors[a.index].push((a.rem, 1));
                    }
                    false
                });
                if active.is_empty() {
                    break;
                }
            }
        }
        lo = hi;
    }
    for f in factors.iter_mut() {
        f.sort();
    }
    factors
}

/// Carmichael function from a factorization.
pub fn carmichael(factors: &[(u64, u32)]) -> u128 {
    factors.iter().fold(1u128, |acc, &(p, k)| {
        let p = u128::from(p);
        let l = if p == 2 {
            match k {
                1 => 1,
                2 => 2,
                _ => 1 << (k - 2),
            }
        } else {
            p.pow(k - 1) * (p - 1)
        };
        lcm(acc, l)
    })
}

// ---------------------------------------------------------------- DNS

fn label_re() -> &'static Regex {
    static RE: std::sync::OnceLock<Regex> = std::sync::OnceLock::new();
    RE.get_or_init(|| Regex::new(r"^[A-Za-z0-9]([A-Za-z0-9-]{0,61}[A-Za-z0-9])?$").unwrap())
}

pub fn ldh_valid(name: &str) -> bool {
    let re = label_re();
    let labels: Vec<&str> = name.split('.').collect();
    name.len() <= 253 && labels.len() >= 2 && labels.iter().all(|l| re.is_match(l))
}

pub const SUFFIXES: [&str; 8] = ["com", "org", "net", "de", "io", "co.uk", "com.au", "co.jp"];

/// Flips every bit of every byte left of the public suffix and keeps the
/// valid, case-insensitively different results as (offset, bit, name).
pub fn dns_oracle(domain: &str, suffix: &str) -> Vec<(usize, u8, String)> {
    let canon = domain.to_ascii_lowercase();
    let head = canon.len() - suffix.len() - 1;
    let mut out = Vec::new();
    for offset in 0..head {
        for bit in 0..8u8 {
            let mut b = canon.clone().into_bytes();
            b[offset] ^= 1 << bit;
            let Ok(s) = String::from_utf8(b) else {
                continue;
            };
            if ldh_valid(&s) && s.to_ascii_lowercase() != canon {
                out.push((offset, bit, s));
            }
        }
    }
    out
}

fn random_label<R: Rng>(rng: &mut R) -> String {
    const ALNUM: &[u8] = b"abcdefghijklmnopqrstuvwxyz0123456789";
    let len = rng.gen_range(1..=14);
    (0..len)
        .map(|i| {
            if i > 0 && i + 1 < len && rng.gen_bool(0.1) {
                '-'
            } else {
                ALNUM[rng.gen_range(0..ALNUM.len())] as char
            }
        })
        .collect()
}

/// Random registrable names with their public suffix.
pub fn random_domains<R: Rng>(rng: &mut R, n: usize) -> Vec<(String, &'static str)> {
    (0..n)
        .map(|_| {
            let suffix = SUFFIXES[rng.gen_range(0..SUFFIXES.len())];
            let mut name = random_label(rng);
            if rng.gen_bool(0.2) {
                name = format!("{}.{name}", random_label(rng));
            }
            (format!("{name}.{suffix}"), suffix)
        })
        .collect()
}

// ---------------------------------------------------------------- OCSP

/// Status byte of a line if it is well formed: six tab-separated fields,
/// a one-byte V/R/E status and a non-empty hex serial.
pub fn ocsp_line_status(line: &[u8]) -> Option<u8> {
    let fields: Vec<&[u8]> = line.split(|&b| b == b'\t').collect();
    if fields.len() != 6 || std::str::from_utf8(line).is_err() {
        return None;
    }
    let status = match fields[0] {
        [s @ (b'V' | b'R' | b'E')] => *s,
        _ => return None,
    };
    let serial = fields[3];
    (!serial.is_empty() && serial.iter().all(u8::is_ascii_hexdigit)).then_some(status)
}

/// Statuses of every line, or `None` if any line is malformed or the text
/// does not end in a newline.
pub fn ocsp_statuses(db: &[u8]) -> Option<Vec<u8>> {
    if db.last().is_some_and(|&b| b != b'\n') {
        return None;
    }
    db.split(|&b| b == b'\n')
        .take(db.iter().filter(|&&b| b == b'\n').count())
        .map(ocsp_line_status)
        .collect()
}

/// Every (offset, bit) whose flip turns some record from `from` into `to`
/// while the database stays well formed with the same number of records.
pub fn ocsp_flip_oracle(db: &[u8], from: u8, to: u8) -> Vec<(usize, u8)> {
    let base = ocsp_statuses(db).expect("oracle input is well formed");
    let mut line_start = 0;
    let mut out = Vec::new();
    for (i, line) in db.split_inclusive(|&b| b == b'\n').enumerate() {
        for j in 0..line.len() {
            for bit in 0..8u8 {
                let mut l = line.to_vec();
                l[j] ^= 1 << bit;
                let changed = if line[j] == b'\n' || l[j] == b'\n' {
                    // the flip moved a line boundary: reparse everything
                    let mut whole = db.to_vec();
                    whole[line_start + j] ^= 1 << bit;
                    match ocsp_statuses(&whole) {
                        Some(s) if s.len() == base.len() => s
                            .iter()
                            .zip(&base)
                            .any(|(&now, &was)| was == from && now == to),
                        _ => false,
                    }
                } else {
                    ocsp_line_status(&l[..l.len() - 1]) == Some(to) && base[i] == from
                };
                if changed {
                    out.push((line_start + j, bit));
                }
            }
        }
        line_start += line.len();
    }
    out
}

/// `n` records whose lengths average exactly 100 bytes, newline included.
pub fn synthetic_ocsp<R: Rng>(rng: &mut R, n: usize, statuses: &[u8]) -> Vec<u8> {
    let mut db = Vec::new();
    for i in 0..n {
        let status = statuses[rng.gen_range(0..statuses.len())] as char;
        let revocation = if status == 'R' { "240101000000Z" } else { "" };
        let head = format!(
            "{status}\t301231235959Z\t{revocation}\t{:08X}\tunknown\t/CN=",
            i + 1
        );
        // lengths alternate 90 and 110 around the 100-byte mean
        let target = if i % 2 == 0 { 90 } else { 110 };
        let pad = target - head.len() - 1;
        let subject: String = (0..pad)
            .map(|_| (b'a' + rng.gen_range(0..26u8)) as char)
            .collect();
        db.extend_from_slice(head.as_bytes());
        db.extend_from_slice(subject.as_bytes());
        db.push(b'\n');
    }
    if n % 2 == 1 {
        // odd count: fix the mean by stretching the last subject
        db.pop();
        db.extend(std::iter::repeat_n(b'a', 10));
        db.push(b'\n');
    }
    db
}
