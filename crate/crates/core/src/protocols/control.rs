//! Root-side controllers: each decides the next wave from the previous echo.

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use super::messages::{Echo, Modulus, Query, Ranges};
use super::queries::{subrange, subrange_step};
use crate::graph::{bit_len, AugmentedWeight, BitLayout, EdgeNumber, NodeId};
use crate::params::Knowledge;
use crate::sketch::{hash_word_for, range_for, resolve_prime, OddHash, PairwiseHash, PrimeMode, SketchError};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum SearchMode {
    Standard,
    Capped,
}

/// Result of a controller run.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Outcome {
    /// `exhausted`: the iteration cap was hit rather than the cut being
    /// found empty.
    Min { aug: Option<AugmentedWeight>, iterations: u32, exhausted: bool },
    Any { en: Option<EdgeNumber>, attempts: u32 },
    Bit(bool),
    Echo(Echo),
    Error(SketchError),
}

impl Outcome {
    /// The edge found by a search, if any.
    pub fn edge(&self, layout: &BitLayout) -> Option<EdgeNumber> {
        match self {
            Outcome::Min { aug: Some(a), .. } => Some(layout.edge_number_of(*a)),
            Outcome::Any { en, .. } => *en,
            _ => None,
        }
    }

    /// Whether the search concluded that no edge leaves the tree, as opposed
    /// to finding one or giving up.
    pub fn settled_empty(&self) -> bool {
        matches!(
            self,
            Outcome::Min { aug: None, exhausted: false, .. } | Outcome::Any { en: None, attempts: 0 }
        )
    }
}

pub enum Step {
    Wave(Query),
    Finish(Outcome),
}

fn modulus(know: &Knowledge, max_en: u64, degree_sum: u64) -> Result<Modulus, SketchError> {
    let p = resolve_prime(know.prime, max_en, degree_sum, know.eps_inv, know.w_max)?;
    Ok(Modulus { p, sent: matches!(know.prime, PrimeMode::Dynamic) })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum MinStage {
    Init,
    Info,
    Parity,
    Hp,
}

/// Interval-narrowing search for the lightest outgoing edge.
#[derive(Clone, Debug)]
pub struct FindMinCtl {
    mode: SearchMode,
    leader: NodeId,
    stage: MinStage,
    j: u128,
    k: u128,
    count: u32,
    cap: u32,
    word: u32,
    ways: u32,
    modulus: Modulus,
    jmin: u128,
    kmin: u128,
}

impl FindMinCtl {
    pub fn new(mode: SearchMode, leader: NodeId) -> Self {
        Self {
            mode,
            leader,
            stage: MinStage::Init,
            j: 0,
            k: 0,
            count: 0,
            cap: 0,
            word: 8,
            ways: 1,
            modulus: Modulus { p: 2, sent: false },
            jmin: 0,
            kmin: 0,
        }
    }

    fn parity_wave(&mut self, rng: &mut ChaCha8Rng) -> Step {
        self.stage = MinStage::Parity;
        let hash = OddHash::new(rng, self.word).expect("supported word size");
        Step::Wave(Query::Parity { hash, lo: self.j, hi: self.k, ways: self.ways })
    }

    fn finish(&self, aug: Option<u128>, exhausted: bool) -> Step {
        Step::Finish(Outcome::Min { aug: aug.map(AugmentedWeight), iterations: self.count + 1, exhausted })
    }

    fn next(&mut self, know: &Knowledge, rng: &mut ChaCha8Rng, echo: Option<Echo>) -> Step {
        match (self.stage, echo) {
            (MinStage::Init, _) => {
                self.stage = MinStage::Info;
                Step::Wave(Query::Info { leader: self.leader })
            }
            (MinStage::Info, Some(Echo::Info { max_aug, max_en, degree_sum })) => {
                if degree_sum == 0 {
                    return Step::Finish(Outcome::Min { aug: None, iterations: 0, exhausted: false });
                }
                self.modulus = match modulus(know, max_en, degree_sum) {
                    Ok(m) => m,
                    Err(e) => return Step::Finish(Outcome::Error(e)),
                };
                self.j = 1;
                self.k = max_aug;
                self.cap = know.find_min_cap(self.mode == SearchMode::Capped, bit_len(max_aug));
                self.word = hash_word_for(max_en);
                self.ways = know.ways();
                self.parity_wave(rng)
            }
            (MinStage::Parity, Some(Echo::Parity { bits, .. })) => {
                (self.jmin, self.kmin) = match bits.lowest() {
                    None => (self.j, self.k),
                    Some(i) => subrange(self.j, self.k, self.ways, i),
                };
                self.stage = MinStage::Hp;
                let alpha = rng.gen_range(0..self.modulus.p);
                Step::Wave(Query::Fingerprint {
                    alpha,
                    modulus: self.modulus,
                    ranges: Ranges::Split { jmin: self.jmin, kmin: self.kmin },
                })
            }
            (MinStage::Hp, Some(Echo::Fingerprint { up, down, .. })) => {
                let low = up[0] != down[0];
                let interval = up[1] != down[1];
                if !low {
                    if !interval {
                        return self.finish(None, false);
                    }
                    if self.jmin == self.kmin {
                        return self.finish(Some(self.jmin), false);
                    }
                    debug_assert!(self.kmin - self.jmin <= self.k - self.j);
                    self.j = self.jmin;
                    self.k = self.kmin;
                }
                if self.count < self.cap {
                    self.count += 1;
                    self.parity_wave(rng)
                } else {
                    self.finish(None, true)
                }
            }
            (stage, echo) => panic!("FindMin in {stage:?} got {echo:?}"),
        }
    }

    pub fn interval(&self) -> (u128, u128) {
        (self.j, self.k)
    }

    pub fn step(&self) -> u128 {
        subrange_step(self.j, self.k, self.ways)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum AnyStage {
    Init,
    Info,
    Gate,
    Prefix,
    Isolate,
    Candidate,
}

/// Hash-isolation search for any outgoing edge.
#[derive(Clone, Debug)]
pub struct FindAnyCtl {
    mode: SearchMode,
    leader: NodeId,
    stage: AnyStage,
    modulus: Modulus,
    r: u64,
    attempts: u32,
    cap: u32,
    pih: PairwiseHash,
    min: u32,
    candidate: u64,
}

impl FindAnyCtl {
    pub fn new(mode: SearchMode, leader: NodeId) -> Self {
        Self {
            mode,
            leader,
            stage: AnyStage::Init,
            modulus: Modulus { p: 2, sent: false },
            r: 1,
            attempts: 0,
            cap: 0,
            pih: PairwiseHash { a: 1, b: 0, p: 2, r: 1 },
            min: 0,
            candidate: 0,
        }
    }

    fn attempt(&mut self, rng: &mut ChaCha8Rng) -> Step {
        self.attempts += 1;
        self.stage = AnyStage::Prefix;
        self.pih = PairwiseHash::new(rng, self.modulus.p, self.r);
        Step::Wave(Query::Prefix { pih: self.pih, sent: self.modulus.sent })
    }

    fn failed(&mut self, rng: &mut ChaCha8Rng) -> Step {
        // Count is the number of failed attempts before this one
        if self.mode == SearchMode::Capped || self.attempts - 1 >= self.cap {
            Step::Finish(Outcome::Any { en: None, attempts: self.attempts })
        } else {
            self.attempt(rng)
        }
    }

    fn next(&mut self, know: &Knowledge, rng: &mut ChaCha8Rng, echo: Option<Echo>) -> Step {
        match (self.stage, echo) {
            (AnyStage::Init, _) => {
                self.stage = AnyStage::Info;
                Step::Wave(Query::Info { leader: self.leader })
            }
            (AnyStage::Info, Some(Echo::Info { max_en, degree_sum, .. })) => {
                if degree_sum == 0 {
                    return Step::Finish(Outcome::Any { en: None, attempts: 0 });
                }
                self.modulus = match modulus(know, max_en, degree_sum) {
                    Ok(m) => m,
                    Err(e) => return Step::Finish(Outcome::Error(e)),
                };
                self.r = range_for(degree_sum);
                self.cap = know.find_any_cap();
                self.stage = AnyStage::Gate;
                let alpha = rng.gen_range(0..self.modulus.p);
                Step::Wave(Query::Fingerprint { alpha, modulus: self.modulus, ranges: Ranges::All })
            }
            (AnyStage::Gate, Some(Echo::Fingerprint { up, down, .. })) => {
                if up[0] == down[0] {
                    Step::Finish(Outcome::Any { en: None, attempts: 0 })
                } else {
                    self.attempt(rng)
                }
            }
            (AnyStage::Prefix, Some(Echo::Prefix { bits, .. })) => {
                if bits == 0 {
                    return self.failed(rng);
                }
                self.min = bits.trailing_zeros();
                self.stage = AnyStage::Isolate;
                Step::Wave(Query::Isolate { pih: self.pih, sent: self.modulus.sent, min: self.min })
            }
            (AnyStage::Isolate, Some(Echo::Xor(x))) => {
                self.candidate = x;
                self.stage = AnyStage::Candidate;
                Step::Wave(Query::Candidate { en: x })
            }
            (AnyStage::Candidate, Some(Echo::Sum(s))) => {
                if s == 1 {
                    Step::Finish(Outcome::Any { en: Some(EdgeNumber(self.candidate)), attempts: self.attempts })
                } else {
                    self.failed(rng)
                }
            }
            (stage, echo) => panic!("FindAny in {stage:?} got {echo:?}"),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum HpStage {
    Init,
    Info,
    Test,
}

/// A single high-probability cut test over `[lo, hi]`.
#[derive(Clone, Debug)]
pub struct HpTestCtl {
    lo: u128,
    hi: u128,
    alpha: Option<u64>,
    leader: NodeId,
    stage: HpStage,
}

impl HpTestCtl {
    pub fn new(leader: NodeId, lo: u128, hi: u128, alpha: Option<u64>) -> Self {
        Self { lo, hi, alpha, leader, stage: HpStage::Init }
    }

    fn test(&mut self, rng: &mut ChaCha8Rng, m: Modulus) -> Step {
        self.stage = HpStage::Test;
        let alpha = self.alpha.map_or_else(|| rng.gen_range(0..m.p), |a| a % m.p);
        Step::Wave(Query::Fingerprint { alpha, modulus: m, ranges: Ranges::Range(self.lo, self.hi) })
    }

    fn next(&mut self, know: &Knowledge, rng: &mut ChaCha8Rng, echo: Option<Echo>) -> Step {
        match (self.stage, echo, know.prime) {
            (HpStage::Init, _, PrimeMode::Fixed(p)) => self.test(rng, Modulus { p, sent: false }),
            (HpStage::Init, _, PrimeMode::Dynamic) => {
                self.stage = HpStage::Info;
                Step::Wave(Query::Info { leader: self.leader })
            }
            (HpStage::Info, Some(Echo::Info { max_en, degree_sum, .. }), _) => {
                match modulus(know, max_en, degree_sum) {
                    Ok(m) => self.test(rng, m),
                    Err(e) => Step::Finish(Outcome::Error(e)),
                }
            }
            (HpStage::Test, Some(Echo::Fingerprint { up, down, .. }), _) => Step::Finish(Outcome::Bit(up[0] != down[0])),
            (stage, echo, _) => panic!("HP-TestOut in {stage:?} got {echo:?}"),
        }
    }
}

/// Controller state held by a session root.
#[derive(Clone, Debug)]
pub enum Controller {
    FindMin(FindMinCtl),
    FindAny(FindAnyCtl),
    HpTest(HpTestCtl),
    /// One wave whose echo is the result.
    Single(Option<Query>),
}

impl Controller {
    pub fn find_min(mode: SearchMode, leader: NodeId) -> Self {
        Controller::FindMin(FindMinCtl::new(mode, leader))
    }

    pub fn find_any(mode: SearchMode, leader: NodeId) -> Self {
        Controller::FindAny(FindAnyCtl::new(mode, leader))
    }

    pub fn single(q: Query) -> Self {
        Controller::Single(Some(q))
    }

    pub fn next(&mut self, know: &Knowledge, rng: &mut ChaCha8Rng, echo: Option<Echo>) -> Step {
        match self {
            Controller::FindMin(c) => c.next(know, rng, echo),
            Controller::FindAny(c) => c.next(know, rng, echo),
            Controller::HpTest(c) => c.next(know, rng, echo),
            Controller::Single(q) => match (q.take(), echo) {
                (Some(q), None) => Step::Wave(q),
                (None, Some(e)) => Step::Finish(Outcome::Echo(e)),
                _ => panic!("single-wave controller misused"),
            },
        }
    }

    pub fn state_bits(&self, know: &Knowledge) -> u32 {
        match self {
            Controller::FindMin(_) => 6 * know.aw_bits() + 64 + 2 * 32,
            Controller::FindAny(_) => 4 * 64 + 2 * 32,
            Controller::HpTest(_) => 2 * know.aw_bits() + 64,
            Controller::Single(_) => 64,
        }
    }
}
