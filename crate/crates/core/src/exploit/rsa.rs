//! Private-key recovery after a bit flip in an RSA modulus.

use num_bigint::{BigUint, RandBigInt};
use num_integer::Integer;
use num_traits::{One, Zero};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize, Serializer};

use crate::error::{Error, Result};

/// How a key occupies memory: modulus bits plus surrounding framing bits.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct KeyLayout {
    pub modulus_bits: u32,
    pub framing_bits: u32,
}

impl Default for KeyLayout {
    /// 4096-bit modulus with 16 framing bits.
    fn default() -> Self {
        Self {
            modulus_bits: 4096,
            framing_bits: 16,
        }
    }
}

/// Chance that a uniformly random flip lands in some key's modulus when
/// `fill_fraction` of memory holds keys laid out as `layout`.
pub fn rsa_modulus_hit_probability(fill_fraction: f64, layout: &KeyLayout) -> f64 {
    let total = f64::from(layout.modulus_bits) + f64::from(layout.framing_bits);
    if total == 0.0 {
        return 0.0;
    }
    fill_fraction * f64::from(layout.modulus_bits) / total
}

fn ser_dec<S: Serializer>(v: &BigUint, s: S) -> std::result::Result<S::Ok, S::Error> {
    s.serialize_str(&v.to_str_radix(10))
}

fn ser_factors<S: Serializer>(v: &[(BigUint, u32)], s: S) -> std::result::Result<S::Ok, S::Error> {
    use serde::ser::SerializeSeq;
    let mut seq = s.serialize_seq(Some(v.len()))?;
    for (p, k) in v {
        seq.serialize_element(&(p.to_str_radix(10), k))?;
    }
    seq.end()
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct RsaPublicKey {
    #[serde(serialize_with = "ser_dec")]
    pub n: BigUint,
    #[serde(serialize_with = "ser_dec")]
    pub e: BigUint,
}

impl RsaPublicKey {
    /// Requires `n` odd and `n > e >= 3`.
    pub fn new(n: BigUint, e: BigUint) -> Result<Self> {
        if n.is_even() {
            return Err(Error::InvalidInput("RSA modulus must be odd".into()));
        }
        if e < BigUint::from(3u32) || n <= e {
            return Err(Error::InvalidInput("RSA key needs n > e >= 3".into()));
        }
        Ok(Self { n, e })
    }
}

/// Effort spent on factoring a flipped modulus.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct FactorBudget {
    /// Trial division by every prime up to this bound.
    pub trial_limit: u32,
    /// Total Pollard-rho steps across all splits.
    pub rho_iterations: u64,
}

impl Default for FactorBudget {
    fn default() -> Self {
        Self {
            trial_limit: 1 << 16,
            rho_iterations: 1 << 22,
        }
    }
}

fn small_primes(limit: u32) -> Vec<u32> {
    let n = limit as usize + 1;
    let mut composite = vec![false; n];
    let mut out = Vec::new();
    for i in 2..n {
        if !composite[i] {
            out.push(i as u32);
            let mut j = i * i;
            while j < n {
                composite[j] = true;
                j += i;
            }
        }
    }
    out
}

/// Bases that make Miller-Rabin exact below 3.3e24.
const MR_BASES: [u32; 12] = [2, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37];

/// Miller-Rabin with the first twelve primes as bases; exact below 3.3e24.
pub fn is_probable_prime(n: &BigUint) -> bool {
    let two = BigUint::from(2u32);
    if *n < two {
        return false;
    }
    for &p in &MR_BASES {
        let p = BigUint::from(p);
        if *n == p {
            return true;
        }
        if (n % &p).is_zero() {
            return false;
        }
    }
    let n1 = n - 1u32;
    let s = n1.trailing_zeros().unwrap_or(0);
    let d = &n1 >> s;
    'bases: for &a in &MR_BASES {
        let mut x = BigUint::from(a).modpow(&d, n);
        if x.is_one() || x == n1 {
            continue;
        }
        for _ in 1..s {
            x = &x * &x % n;
            if x == n1 {
                continue 'bases;
            }
        }
        return false;
    }
    true
}

/// Brent's variant of Pollard's rho. Returns a non-trivial divisor of the
/// odd composite `n`, drawing steps from `budget`.
fn pollard_brent(n: &BigUint, budget: &mut u64) -> Option<BigUint> {
    let one = BigUint::one();
    for c in 1u32.. {
        if *budget == 0 {
            return None;
        }
        let c = BigUint::from(c);
        let f = |x: &BigUint| (x * x + &c) % n;
        let mut y = BigUint::from(2u32);
        let mut r: u64 = 1;
        let m: u64 = 128;
        let mut g = one.clone();
        let mut q = one.clone();
        let mut x = y.clone();
        let mut ys = y.clone();
        while g.is_one() {
            x = y.clone();
            for _ in 0..r {
                y = f(&y);
            }
            let mut k = 0;
            while k < r && g.is_one() {
                ys = y.clone();
                let steps = m.min(r - k);
                for _ in 0..steps {
                    y = f(&y);
                    let diff = if x > y { &x - &y } else { &y - &x };
                    q = q * diff % n;
                }
                *budget = budget.saturating_sub(steps);
                g = q.gcd(n);
                k += m;
                if *budget == 0 && g.is_one() {
                    return None;
                }
            }
            r *= 2;
        }
        if g == *n {
            // the batched product hit zero: replay one step at a time
            loop {
                ys = f(&ys);
                let diff = if x > ys { &x - &ys } else { &ys - &x };
                g = diff.gcd(n);
                if !g.is_one() {
                    break;
                }
            }
        }
        if g != *n {
            return Some(g);
        }
    }
    None
}

/// Prime factorization of `n` with multiplicities, ascending, or `None`
/// when the budget runs out.
pub fn factorize(n: &BigUint, budget: &FactorBudget) -> Option<Vec<(BigUint, u32)>> {
    let mut factors: Vec<(BigUint, u32)> = Vec::new();
    if n.is_zero() {
        return None;
    }
    let mut m = n.clone();
    for p in small_primes(budget.trial_limit) {
        let pb = BigUint::from(p);
        if &pb * &pb > m {
            break;
        }
        let mut k = 0;
        while (&m % &pb).is_zero() {
            m /= &pb;
            k += 1;
        }
        if k > 0 {
            factors.push((pb, k));
        }
    }
    let mut rho_budget = budget.rho_iterations;
    let mut stack = vec![m];
    let mut large: Vec<BigUint> = Vec::new();
    while let Some(m) = stack.pop() {
        if m.is_one() {
            continue;
        }
        if is_probable_prime(&m) {
            large.push(m);
            continue;
        }
        // squares split directly
        let r = m.sqrt();
        if &r * &r == m {
            stack.push(r.clone());
            stack.push(r);
            continue;
        }
        let d = pollard_brent(&m, &mut rho_budget)?;
        stack.push(&m / &d);
        stack.push(d);
    }
    large.sort();
    for p in large {
        match factors.last_mut() {
            Some((q, k)) if *q == p => *k += 1,
            _ => factors.push((p, 1)),
        }
    }
    factors.sort();
    Some(factors)
}

/// Carmichael's function from a factorization.
fn carmichael(factors: &[(BigUint, u32)]) -> BigUint {
    let two = BigUint::from(2u32);
    factors.iter().fold(BigUint::one(), |acc, (p, k)| {
        let l = if *p == two {
            match k {
                1 => BigUint::one(),
                2 => two.clone(),
                _ => BigUint::one() << (k - 2),
            }
        } else {
            p.pow(k - 1) * (p - 1u32)
        };
        acc.lcm(&l)
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InfeasibleReason {
    /// The flipped modulus is below 3.
    TooSmall,
    FactoringBudget,
    /// `e` shares a factor with the Carmichael function of the new modulus.
    NotInvertible,
    VerificationFailed,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
#[serde(tag = "outcome", rename_all = "snake_case")]
pub enum KeyFlipOutcome {
    Recovered {
        bit: u32,
        #[serde(serialize_with = "ser_dec")]
        n_flipped: BigUint,
        #[serde(serialize_with = "ser_factors")]
        factors: Vec<(BigUint, u32)>,
        #[serde(serialize_with = "ser_dec")]
        lambda: BigUint,
        #[serde(serialize_with = "ser_dec")]
        d: BigUint,
        round_trips: u32,
    },
    Infeasible {
        bit: u32,
        #[serde(serialize_with = "ser_dec")]
        n_flipped: BigUint,
        reason: InfeasibleReason,
    },
}

impl KeyFlipOutcome {
    pub fn is_recovered(&self) -> bool {
        matches!(self, KeyFlipOutcome::Recovered { .. })
    }
}

/// Round trips checked before a recovered exponent is reported.
pub const ROUND_TRIPS: u32 = 10;

/// Flips `bit` of the modulus and tries to derive a working private exponent
/// for the result. Recovery is only reported after [`ROUND_TRIPS`] random
/// messages coprime to the new modulus survive `(m^e)^d`.
pub fn analyze_key_flip(
    key: &RsaPublicKey,
    bit: u32,
    budget: &FactorBudget,
    seed: u64,
) -> Result<KeyFlipOutcome> {
    if u64::from(bit) >= key.n.bits() {
        return Err(Error::InvalidInput(format!(
            "bit {bit} outside a {}-bit modulus",
            key.n.bits()
        )));
    }
    let mut n_flipped = key.n.clone();
    n_flipped.set_bit(u64::from(bit), !key.n.bit(u64::from(bit)));
    let infeasible = |n_flipped: BigUint, reason| KeyFlipOutcome::Infeasible {
        bit,
        n_flipped,
        reason,
    };
    if n_flipped < BigUint::from(3u32) {
        return Ok(infeasible(n_flipped, InfeasibleReason::TooSmall));
    }
    let Some(factors) = factorize(&n_flipped, budget) else {
        return Ok(infeasible(n_flipped, InfeasibleReason::FactoringBudget));
    };
    let lambda = carmichael(&factors);
    let Some(d) = (&key.e % &lambda).modinv(&lambda) else {
        return Ok(infeasible(n_flipped, InfeasibleReason::NotInvertible));
    };

    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ u64::from(bit).rotate_left(32));
    let two = BigUint::from(2u32);
    let mut round_trips = 0;
    while round_trips < ROUND_TRIPS {
        let m = rng.gen_biguint_range(&two, &n_flipped);
        if !m.gcd(&n_flipped).is_one() {
            continue;
        }
        let c = m.modpow(&key.e, &n_flipped);
        if c.modpow(&d, &n_flipped) != m {
            return Ok(infeasible(n_flipped, InfeasibleReason::VerificationFailed));
        }
        round_trips += 1;
    }
    Ok(KeyFlipOutcome::Recovered {
        bit,
        n_flipped,
        factors,
        lambda,
        d,
        round_trips,
    })
}
