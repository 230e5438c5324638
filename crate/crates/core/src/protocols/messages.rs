//! Message kinds and their payload layouts.
//!
//! Widths are derived from the global [`Knowledge`]: ids take `id_bits`,
//! edge numbers `en_bits`, augmented weights `aw_bits`, field elements the
//! bit width of the prime. Fields are written in declaration order, least
//! significant bit first.

use crate::graph::{bit_len, NodeId};
use crate::params::Knowledge;
use crate::runtime::wire::BitWriter;
use crate::runtime::Message;
use crate::sketch::{bit_width, OddHash, PairwiseHash, WORD_SIZES};

/// Bits used for a small length/count field (`ways`, `lg r`, `min`).
const SMALL: u32 = 8;
/// Bits used to announce the width of a transmitted prime.
const PRIME_LEN: u32 = 6;

/// The prime of a fingerprint or pairwise hash, and whether it must travel
/// with the query (it does not when every node knows it in advance).
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Modulus {
    pub p: u64,
    pub sent: bool,
}

impl Modulus {
    pub fn width(&self) -> u32 {
        bit_width(self.p)
    }

    fn bits(&self) -> u32 {
        if self.sent {
            PRIME_LEN + self.width()
        } else {
            0
        }
    }

    fn encode(&self, w: &mut BitWriter) {
        if self.sent {
            w.put(self.width() as u128, PRIME_LEN);
            w.put(self.p as u128, self.width());
        }
    }
}

/// Which augmented-weight ranges a fingerprint query covers.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Ranges {
    All,
    Range(u128, u128),
    /// Two fingerprints at once: `[1, jmin − 1]` and `[jmin, kmin]`.
    Split { jmin: u128, kmin: u128 },
}

impl Ranges {
    pub fn pairs(&self) -> usize {
        match self {
            Ranges::Split { .. } => 2,
            _ => 1,
        }
    }

    /// The inclusive interval covered by fingerprint `i`.
    pub fn interval(&self, i: usize) -> (u128, u128) {
        match *self {
            Ranges::All => (0, u128::MAX),
            Ranges::Range(lo, hi) => (lo, hi),
            Ranges::Split { jmin, kmin } => {
                if i == 0 {
                    (1, jmin.saturating_sub(1))
                } else {
                    (jmin, kmin)
                }
            }
        }
    }
}

/// Broadcast payloads.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Query {
    /// Tree maxima and the degree sum; also tells members who the root is.
    Info { leader: NodeId },
    /// Parallel TestOut over `ways` subranges of `[lo, hi]`.
    Parity { hash: OddHash, lo: u128, hi: u128, ways: u32 },
    Fingerprint { alpha: u64, modulus: Modulus, ranges: Ranges },
    Prefix { pih: PairwiseHash, sent: bool },
    Isolate { pih: PairwiseHash, sent: bool, min: u32 },
    Candidate { en: u64 },
    PathTo { target: NodeId },
}

/// Parities of up to `MAX_WAYS` subranges, bit `i` for subrange `i`.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct ParityWord(pub [u64; 4]);

impl ParityWord {
    pub fn flip(&mut self, i: u32) {
        self.0[i as usize / 64] ^= 1 << (i % 64);
    }

    pub fn get(&self, i: u32) -> bool {
        self.0[i as usize / 64] >> (i % 64) & 1 == 1
    }

    pub fn xor(&mut self, other: &ParityWord) {
        for (a, b) in self.0.iter_mut().zip(other.0) {
            *a ^= b;
        }
    }

    pub fn is_zero(&self) -> bool {
        self.0.iter().all(|&w| w == 0)
    }

    /// Index of the lowest set bit, if any.
    pub fn lowest(&self) -> Option<u32> {
        let i = self.0.iter().position(|&w| w != 0)?;
        Some(64 * i as u32 + self.0[i].trailing_zeros())
    }

    pub fn from_low(bits: u64) -> Self {
        ParityWord([bits, 0, 0, 0])
    }
}

/// Echo payloads.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Echo {
    Info { max_aug: u128, max_en: u64, degree_sum: u64 },
    Parity { bits: ParityWord, ways: u32 },
    /// `p` is the query's prime, known to every participant; it is not sent.
    Fingerprint { up: [u64; 2], down: [u64; 2], pairs: u8, p: u64 },
    Prefix { bits: u64, len: u32 },
    Xor(u64),
    /// Saturating 2-bit count.
    Sum(u8),
    Path { found: bool, max: u128 },
}

/// One-way broadcasts with no echo.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Notice {
    Stop { result: Option<u64> },
    Swap { remove: u64, add: u64 },
    Leader(NodeId),
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Msg {
    Down(Query),
    Up(Echo),
    Notice(Notice),
    Elect,
    AddEdge,
    Exclude,
}

fn word_index(w: u32) -> u128 {
    WORD_SIZES.iter().position(|&x| x == w).unwrap_or(0) as u128
}

fn pih_bits(pih: &PairwiseHash, sent: bool) -> u32 {
    let m = Modulus { p: pih.p, sent };
    2 * m.width() + SMALL + m.bits()
}

fn pih_encode(pih: &PairwiseHash, sent: bool, w: &mut BitWriter) {
    let m = Modulus { p: pih.p, sent };
    w.put(pih.a as u128, m.width());
    w.put(pih.b as u128, m.width());
    w.put(pih.log_r() as u128, SMALL);
    m.encode(w);
}

impl Query {
    pub fn kind(&self) -> &'static str {
        match self {
            Query::Info { .. } => "BCAST_INFO",
            Query::Parity { .. } => "BCAST_HASH",
            Query::Fingerprint { .. } => "BCAST_ALPHA",
            Query::Prefix { .. } => "BCAST_PIH",
            Query::Isolate { .. } => "BCAST_ISOLATE",
            Query::Candidate { .. } => "BCAST_CANDIDATE",
            Query::PathTo { .. } => "BCAST_PATH",
        }
    }

    pub fn bits(&self, k: &Knowledge) -> u32 {
        match self {
            Query::Info { .. } | Query::PathTo { .. } => k.id_bits(),
            Query::Parity { hash, .. } => 2 + 2 * (hash.w + 1) + 2 * k.aw_bits() + SMALL,
            Query::Fingerprint { modulus, ranges, .. } => {
                let r = match ranges {
                    Ranges::All => 0,
                    _ => 2 * k.aw_bits(),
                };
                modulus.width() + modulus.bits() + 2 + r
            }
            Query::Prefix { pih, sent } => pih_bits(pih, *sent),
            Query::Isolate { pih, sent, .. } => pih_bits(pih, *sent) + SMALL,
            Query::Candidate { .. } => k.en_bits(),
        }
    }

    pub fn encode(&self, k: &Knowledge, w: &mut BitWriter) {
        match self {
            Query::Info { leader } => w.put(leader.0 as u128, k.id_bits()),
            Query::PathTo { target } => w.put(target.0 as u128, k.id_bits()),
            Query::Parity { hash, lo, hi, ways } => {
                w.put(word_index(hash.w), 2);
                w.put(hash.a as u128, hash.w + 1);
                w.put(hash.t as u128, hash.w + 1);
                w.put(*lo, k.aw_bits());
                w.put(*hi, k.aw_bits());
                w.put(*ways as u128 - 1, SMALL);
            }
            Query::Fingerprint { alpha, modulus, ranges } => {
                w.put(*alpha as u128, modulus.width());
                modulus.encode(w);
                match ranges {
                    Ranges::All => w.put(0, 2),
                    Ranges::Range(lo, hi) => {
                        w.put(1, 2);
                        w.put(*lo, k.aw_bits());
                        w.put(*hi, k.aw_bits());
                    }
                    Ranges::Split { jmin, kmin } => {
                        w.put(2, 2);
                        w.put(*jmin, k.aw_bits());
                        w.put(*kmin, k.aw_bits());
                    }
                }
            }
            Query::Prefix { pih, sent } => pih_encode(pih, *sent, w),
            Query::Isolate { pih, sent, min } => {
                pih_encode(pih, *sent, w);
                w.put(*min as u128, SMALL);
            }
            Query::Candidate { en } => w.put(*en as u128, k.en_bits()),
        }
    }
}

impl Echo {
    pub fn kind(&self) -> &'static str {
        match self {
            Echo::Info { .. } => "ECHO_INFO",
            Echo::Parity { .. } => "ECHO_PARITY",
            Echo::Fingerprint { .. } => "ECHO_FPRINT",
            Echo::Prefix { .. } => "ECHO_PREFIX",
            Echo::Xor(_) => "ECHO_XOR",
            Echo::Sum(_) => "ECHO_SUM",
            Echo::Path { .. } => "ECHO_PATH",
        }
    }

    pub fn bits(&self, k: &Knowledge) -> u32 {
        match self {
            // the degree sum of a tree is below n², which fits in id_bits
            Echo::Info { .. } => k.aw_bits() + k.en_bits() + k.id_bits(),
            Echo::Parity { ways, .. } => *ways,
            Echo::Fingerprint { pairs, p, .. } => 2 * *pairs as u32 * bit_width(*p),
            Echo::Prefix { len, .. } => (*len).max(1),
            Echo::Xor(_) => k.en_bits(),
            Echo::Sum(_) => 2,
            Echo::Path { .. } => 1 + k.aw_bits(),
        }
    }

    pub fn encode(&self, k: &Knowledge, w: &mut BitWriter) {
        match self {
            Echo::Info { max_aug, max_en, degree_sum } => {
                w.put(*max_aug, k.aw_bits());
                w.put(*max_en as u128, k.en_bits());
                w.put(*degree_sum as u128, k.id_bits());
            }
            Echo::Parity { bits, ways } => {
                for i in 0..*ways {
                    w.put_bool(bits.get(i));
                }
            }
            Echo::Fingerprint { up, down, pairs, p } => {
                for i in 0..*pairs as usize {
                    w.put(up[i] as u128, bit_width(*p));
                    w.put(down[i] as u128, bit_width(*p));
                }
            }
            Echo::Prefix { bits, len } => w.put(*bits as u128, (*len).max(1)),
            Echo::Xor(x) => w.put(*x as u128, k.en_bits()),
            Echo::Sum(s) => w.put(*s as u128, 2),
            Echo::Path { found, max } => {
                w.put_bool(*found);
                w.put(*max, k.aw_bits());
            }
        }
    }
}

impl Notice {
    pub fn kind(&self) -> &'static str {
        match self {
            Notice::Stop { .. } => "STOP",
            Notice::Swap { .. } => "SWAP",
            Notice::Leader(_) => "LEADER",
        }
    }

    pub fn bits(&self, k: &Knowledge) -> u32 {
        match self {
            Notice::Stop { result } => 1 + result.map_or(0, |_| k.en_bits()),
            Notice::Swap { .. } => 2 * k.en_bits(),
            Notice::Leader(_) => k.id_bits(),
        }
    }

    pub fn encode(&self, k: &Knowledge, w: &mut BitWriter) {
        match self {
            Notice::Stop { result } => {
                w.put_bool(result.is_some());
                if let Some(en) = result {
                    w.put(*en as u128, k.en_bits());
                }
            }
            Notice::Swap { remove, add } => {
                w.put(*remove as u128, k.en_bits());
                w.put(*add as u128, k.en_bits());
            }
            Notice::Leader(id) => w.put(id.0 as u128, k.id_bits()),
        }
    }
}

impl Msg {
    pub fn encode(&self, k: &Knowledge, w: &mut BitWriter) {
        match self {
            Msg::Down(q) => q.encode(k, w),
            Msg::Up(e) => e.encode(k, w),
            Msg::Notice(n) => n.encode(k, w),
            Msg::Elect | Msg::AddEdge | Msg::Exclude => w.put(1, 1),
        }
    }
}

impl Message for Msg {
    fn kind(&self) -> &'static str {
        match self {
            Msg::Down(q) => q.kind(),
            Msg::Up(e) => e.kind(),
            Msg::Notice(n) => n.kind(),
            Msg::Elect => "ELECT",
            Msg::AddEdge => "ADD_EDGE",
            Msg::Exclude => "EXCLUDE",
        }
    }

    fn bits(&self, k: &Knowledge) -> u32 {
        match self {
            Msg::Down(q) => q.bits(k),
            Msg::Up(e) => e.bits(k),
            Msg::Notice(n) => n.bits(k),
            Msg::Elect | Msg::AddEdge | Msg::Exclude => 1,
        }
    }
}

/// Largest number of physical frames any message can need under `k`.
pub fn max_frames(k: &Knowledge) -> u32 {
    let prime = bit_width(match k.prime {
        crate::sketch::PrimeMode::Fixed(p) => p,
        crate::sketch::PrimeMode::Dynamic => u64::MAX,
    });
    let sent = u32::from(matches!(k.prime, crate::sketch::PrimeMode::Dynamic)) * (PRIME_LEN + prime);
    let widest = [
        2 + 2 * 62 + 2 * k.aw_bits() + SMALL,
        prime + sent + 2 + 2 * k.aw_bits(),
        2 * prime + 2 * SMALL + sent,
        4 * prime,
        k.aw_bits() + k.en_bits() + k.id_bits(),
        1 + k.aw_bits(),
        2 * k.en_bits(),
        64,
    ]
    .into_iter()
    .max()
    .unwrap();
    widest.div_ceil(k.w_max.max(1))
}

/// `⌈log₂ x⌉` for the small integers used in widths.
pub fn ceil_log2(x: u64) -> u32 {
    bit_len(x.saturating_sub(1) as u128)
}
