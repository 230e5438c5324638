//! Local contributions and echo merges for every tree query.

use super::messages::{Echo, ParityWord, Query};
use super::wave::{Aggregation, Payload};
use crate::params::Knowledge;
use crate::runtime::LocalView;
use crate::sketch::{fingerprint_term, mul_mod, prefix_mask};

/// Subrange width `max(1, ⌈(hi − lo)/ways⌉)` of a parallel TestOut.
pub fn subrange_step(lo: u128, hi: u128, ways: u32) -> u128 {
    hi.saturating_sub(lo).div_ceil(ways as u128).max(1)
}

/// Bounds `[j_i, k_i]` of subrange `i`; the last subrange ends at `hi`.
pub fn subrange(lo: u128, hi: u128, ways: u32, i: u32) -> (u128, u128) {
    let s = subrange_step(lo, hi, ways);
    let j = lo.saturating_add(s.saturating_mul(i as u128));
    let k = if i + 1 == ways {
        hi
    } else {
        lo.saturating_add(s.saturating_mul(i as u128 + 1)).saturating_sub(1).min(hi)
    };
    (j, k)
}

#[derive(Clone, Copy, Debug, Default)]
pub struct TreeQueries;

impl Aggregation for TreeQueries {
    type Down = Query;
    type Up = Echo;

    fn local(&self, _know: &Knowledge, view: &LocalView, q: &Query) -> Echo {
        match q {
            Query::Info { .. } => Echo::Info {
                max_aug: view.max_aug().0,
                max_en: view.max_en().0,
                degree_sum: view.degree() as u64,
            },
            Query::Parity { hash, lo, hi, ways } => {
                let s = subrange_step(*lo, *hi, *ways);
                let mut bits = ParityWord::default();
                let mut i = 0u32;
                let mut bound = lo.saturating_add(s - 1);
                for port in view.range(*lo, *hi) {
                    while port.aug.0 > bound && i + 1 < *ways {
                        i += 1;
                        bound = bound.saturating_add(s);
                    }
                    if hash.bit(port.en.0) {
                        bits.flip(i);
                    }
                }
                Echo::Parity { bits, ways: *ways }
            }
            Query::Fingerprint { alpha, modulus, ranges } => {
                let p = modulus.p;
                let mut up = [1 % p; 2];
                let mut down = [1 % p; 2];
                for i in 0..ranges.pairs() {
                    let (lo, hi) = ranges.interval(i);
                    if lo > hi {
                        continue;
                    }
                    for port in view.range(lo, hi) {
                        let term = fingerprint_term(*alpha, port.en.0, p);
                        if port.up {
                            up[i] = mul_mod(up[i], term, p);
                        } else {
                            down[i] = mul_mod(down[i], term, p);
                        }
                    }
                }
                Echo::Fingerprint { up, down, pairs: ranges.pairs() as u8, p }
            }
            Query::Prefix { pih, .. } => {
                let len = pih.log_r();
                let bits = view.ports().iter().fold(0, |acc, p| acc ^ prefix_mask(pih.eval(p.en.0), len));
                Echo::Prefix { bits, len }
            }
            Query::Isolate { pih, min, .. } => {
                let threshold = 1u64.checked_shl(min + 1).unwrap_or(u64::MAX);
                let x = view
                    .ports()
                    .iter()
                    .filter(|p| pih.eval(p.en.0) < threshold)
                    .fold(0, |acc, p| acc ^ p.en.0);
                Echo::Xor(x)
            }
            Query::Candidate { en } => {
                Echo::Sum(view.ports().iter().filter(|p| p.en.0 == *en).count().min(3) as u8)
            }
            Query::PathTo { target } => Echo::Path { found: view.id() == *target, max: 0 },
        }
    }

    fn combine(&self, _know: &Knowledge, view: &LocalView, acc: &mut Echo, port: usize, child: Echo) {
        match (acc, child) {
            (
                Echo::Info { max_aug, max_en, degree_sum },
                Echo::Info { max_aug: a, max_en: e, degree_sum: d },
            ) => {
                *max_aug = (*max_aug).max(a);
                *max_en = (*max_en).max(e);
                *degree_sum += d;
            }
            (Echo::Parity { bits, .. }, Echo::Parity { bits: b, .. }) => bits.xor(&b),
            (Echo::Fingerprint { up, down, p, .. }, Echo::Fingerprint { up: u, down: d, .. }) => {
                for i in 0..2 {
                    up[i] = mul_mod(up[i], u[i], *p);
                    down[i] = mul_mod(down[i], d[i], *p);
                }
            }
            (Echo::Prefix { bits, .. }, Echo::Prefix { bits: b, .. }) => *bits ^= b,
            (Echo::Xor(x), Echo::Xor(y)) => *x ^= y,
            (Echo::Sum(s), Echo::Sum(t)) => *s = (*s + t).min(3),
            (Echo::Path { found, max }, Echo::Path { found: f, max: m }) => {
                if f {
                    *found = true;
                    *max = m.max(view.port(port).aug.0);
                }
            }
            (a, b) => panic!("mismatched echoes {a:?} and {b:?}"),
        }
    }
}

impl Payload for Query {
    fn bits(&self, know: &Knowledge) -> u32 {
        Query::bits(self, know)
    }

    fn kind(&self) -> &'static str {
        Query::kind(self)
    }
}

impl Payload for Echo {
    fn bits(&self, know: &Knowledge) -> u32 {
        Echo::bits(self, know)
    }

    fn kind(&self) -> &'static str {
        Echo::kind(self)
    }
}
