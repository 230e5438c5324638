//! Odd hashing, pairwise-independent hashing and polynomial fingerprints.

use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum SketchError {
    #[error("unsupported hash word size {0}, expected 8, 16, 32 or 61")]
    UnsupportedWord(u32),
    #[error("hash input {x} outside [1, 2^{w}]")]
    OutOfDomain { x: u64, w: u32 },
    #[error("edge number {en} is not below the modulus {p}")]
    ModulusTooSmall { en: u64, p: u64 },
    #[error("no prime above {bound} fits in {bits} bits")]
    Capacity { bound: u128, bits: u32 },
}

pub const WORD_SIZES: [u32; 4] = [8, 16, 32, 61];

/// The Mersenne prime 2^61 − 1.
pub const MERSENNE_61: u64 = (1 << 61) - 1;

/// Smallest supported word size `w` with `2^w ≥ max_value`.
pub fn hash_word_for(max_value: u64) -> u32 {
    WORD_SIZES
        .into_iter()
        .find(|&w| max_value as u128 <= 1u128 << w)
        .unwrap_or(61)
}

/// Threshold hash `h(x) = [(a·x mod 2^w) ≤ t]` with odd multiplier `a`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct OddHash {
    pub a: u64,
    pub t: u64,
    pub w: u32,
}

impl OddHash {
    pub fn new<R: Rng + ?Sized>(rng: &mut R, w: u32) -> Result<Self, SketchError> {
        if !WORD_SIZES.contains(&w) {
            return Err(SketchError::UnsupportedWord(w));
        }
        let a = 2 * rng.gen_range(0..1u64 << (w - 1)) + 1;
        let t = rng.gen_range(1..=1u64 << w);
        Ok(Self { a, t, w })
    }

    /// Evaluates without the domain check; inputs above `2^w` wrap.
    #[inline]
    pub fn bit(&self, x: u64) -> bool {
        let mask = (1u128 << self.w) - 1;
        ((self.a as u128 * x as u128) & mask) as u64 <= self.t
    }

    pub fn eval(&self, x: u64) -> Result<bool, SketchError> {
        if x == 0 || x as u128 > 1u128 << self.w {
            return Err(SketchError::OutOfDomain { x, w: self.w });
        }
        Ok(self.bit(x))
    }

    /// Encoded size: `a` and `t` each take `w + 1` bits.
    pub fn bits(&self) -> u32 {
        2 * (self.w + 1)
    }
}

/// Fraction of all `(a, t)` pairs at `w = 8` for which `set` has odd parity.
pub fn oddness_fraction_w8(set: &[u64]) -> f64 {
    let mut odd = 0u64;
    for a in (1..256u64).step_by(2) {
        let residues: Vec<u64> = set.iter().map(|&x| (a * x) & 255).collect();
        for t in 1..=256u64 {
            let ones = residues.iter().filter(|&&r| r <= t).count();
            odd += (ones & 1) as u64;
        }
    }
    odd as f64 / (128.0 * 256.0)
}

/// `h(x) = ((a·x + b) mod p) mod r` with `r` a power of two.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct PairwiseHash {
    pub a: u64,
    pub b: u64,
    pub p: u64,
    pub r: u64,
}

impl PairwiseHash {
    pub fn new<R: Rng + ?Sized>(rng: &mut R, p: u64, r: u64) -> Self {
        debug_assert!(r.is_power_of_two());
        Self { a: rng.gen_range(1..p), b: rng.gen_range(0..p), p, r }
    }

    #[inline]
    pub fn eval(&self, x: u64) -> u64 {
        let v = mul_add_mod(self.a, x % self.p, self.b, self.p);
        v & (self.r - 1)
    }

    pub fn log_r(&self) -> u32 {
        self.r.trailing_zeros()
    }

    /// Encoded size: `a`, `b` at the prime's width plus `lg r` in 7 bits.
    pub fn bits(&self) -> u32 {
        2 * bit_width(self.p) + 7
    }
}

/// Smallest power of two strictly greater than `degree_sum`.
pub fn range_for(degree_sum: u64) -> u64 {
    (degree_sum + 1).next_power_of_two()
}

/// Bit `i` is the parity of `|{e : h(e) < 2^{i+1}}|`, for `i < lg r`.
pub fn prefix_parity_vector<I: IntoIterator<Item = u64>>(h: &PairwiseHash, edge_numbers: I) -> u64 {
    let mut vec = 0u64;
    for e in edge_numbers {
        vec ^= prefix_mask(h.eval(e), h.log_r());
    }
    vec
}

/// Mask of the bits `i < lg r` with `value < 2^{i+1}`.
#[inline]
pub fn prefix_mask(value: u64, log_r: u32) -> u64 {
    // value < 2^{i+1}  <=>  i ≥ bit_len(value) − 1, with i ≥ 0 for value ≤ 1
    let lowest = bit_width(value).saturating_sub(1);
    let all = if log_r >= 64 { u64::MAX } else { (1u64 << log_r) - 1 };
    all & !((1u64 << lowest) - 1)
}

pub fn bit_width(x: u64) -> u32 {
    64 - x.leading_zeros()
}

#[inline]
pub fn mul_mod(a: u64, b: u64, p: u64) -> u64 {
    if p == MERSENNE_61 {
        let prod = a as u128 * b as u128;
        let folded = (prod & MERSENNE_61 as u128) + (prod >> 61);
        let folded = (folded & MERSENNE_61 as u128) + (folded >> 61);
        let v = folded as u64;
        if v >= MERSENNE_61 {
            v - MERSENNE_61
        } else {
            v
        }
    } else {
        ((a as u128 * b as u128) % p as u128) as u64
    }
}

#[inline]
fn mul_add_mod(a: u64, x: u64, b: u64, p: u64) -> u64 {
    ((a as u128 * x as u128 + b as u128) % p as u128) as u64
}

fn pow_mod(mut base: u64, mut exp: u64, p: u64) -> u64 {
    let mut acc = 1 % p;
    base %= p;
    while exp > 0 {
        if exp & 1 == 1 {
            acc = mul_mod(acc, base, p);
        }
        base = mul_mod(base, base, p);
        exp >>= 1;
    }
    acc
}

/// Deterministic Miller-Rabin for all 64-bit inputs.
pub fn is_prime(n: u64) -> bool {
    const BASES: [u64; 12] = [2, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37];
    if n < 2 {
        return false;
    }
    for p in BASES {
        if n % p == 0 {
            return n == p;
        }
    }
    let s = (n - 1).trailing_zeros();
    let d = (n - 1) >> s;
    'witness: for a in BASES {
        let mut x = pow_mod(a, d, n);
        if x == 1 || x == n - 1 {
            continue;
        }
        for _ in 1..s {
            x = mul_mod(x, x, n);
            if x == n - 1 {
                continue 'witness;
            }
        }
        return false;
    }
    true
}

/// Fingerprint term for one element: `(alpha − e) mod p`.
#[inline]
pub fn fingerprint_term(alpha: u64, e: u64, p: u64) -> u64 {
    let e = e % p;
    if alpha >= e {
        alpha - e
    } else {
        alpha + p - e
    }
}

/// `∏ (alpha − e) mod p`; the empty product is 1.
pub fn fingerprint_eval<I: IntoIterator<Item = u64>>(p: u64, alpha: u64, edge_numbers: I) -> Result<u64, SketchError> {
    let mut acc = 1 % p;
    for e in edge_numbers {
        if e >= p {
            return Err(SketchError::ModulusTooSmall { en: e, p });
        }
        acc = mul_mod(acc, fingerprint_term(alpha, e, p), p);
    }
    Ok(acc)
}

/// The pair of fingerprints compared by the high-probability cut test.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Fingerprint {
    pub p: u64,
    pub alpha: u64,
    pub up_value: u64,
    pub down_value: u64,
}

impl Fingerprint {
    pub fn new(p: u64, alpha: u64) -> Self {
        Self { p, alpha, up_value: 1 % p, down_value: 1 % p }
    }

    pub fn push_up(&mut self, e: u64) {
        self.up_value = mul_mod(self.up_value, fingerprint_term(self.alpha, e, self.p), self.p);
    }

    pub fn push_down(&mut self, e: u64) {
        self.down_value = mul_mod(self.down_value, fingerprint_term(self.alpha, e, self.p), self.p);
    }

    pub fn absorb(&mut self, other: &Fingerprint) {
        self.up_value = mul_mod(self.up_value, other.up_value, self.p);
        self.down_value = mul_mod(self.down_value, other.down_value, self.p);
    }

    pub fn differs(&self) -> bool {
        self.up_value != self.down_value
    }
}

/// How the fingerprint modulus is chosen.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum PrimeMode {
    /// A predetermined prime known to every node.
    Fixed(u64),
    /// Smallest prime above `max(maxEdgeNum, B·ε⁻¹)`, computed per test.
    Dynamic,
}

impl Default for PrimeMode {
    fn default() -> Self {
        PrimeMode::Fixed(MERSENNE_61)
    }
}

/// Smallest prime `> max(max_edge_num, b·epsilon_inv)` below `2^w_msg`.
pub fn choose_prime(max_edge_num: u64, b: u64, epsilon_inv: u64, w_msg: u32) -> Result<u64, SketchError> {
    let bound = (max_edge_num as u128).max(b as u128 * epsilon_inv as u128);
    let bits = w_msg.min(64);
    let limit = if bits >= 64 { u64::MAX as u128 } else { (1u128 << bits) - 1 };
    if bound >= limit {
        return Err(SketchError::Capacity { bound, bits: w_msg });
    }
    let mut cand = bound as u64 + 1;
    loop {
        if is_prime(cand) {
            return Ok(cand);
        }
        if cand as u128 >= limit {
            return Err(SketchError::Capacity { bound, bits: w_msg });
        }
        cand += 1;
    }
}

/// Resolves the modulus for a test, honouring the prime mode.
pub fn resolve_prime(
    mode: PrimeMode,
    max_edge_num: u64,
    b: u64,
    epsilon_inv: u64,
    w_msg: u32,
) -> Result<u64, SketchError> {
    match mode {
        PrimeMode::Fixed(p) => {
            if max_edge_num >= p {
                Err(SketchError::ModulusTooSmall { en: max_edge_num, p })
            } else {
                Ok(p)
            }
        }
        PrimeMode::Dynamic => choose_prime(max_edge_num, b, epsilon_inv, w_msg),
    }
}
