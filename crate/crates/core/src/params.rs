//! Tunable constants and the global knowledge every node starts with.

use serde::{Deserialize, Serialize};

use crate::graph::{bit_len, BitLayout, Graph};
use crate::sketch::PrimeMode;

/// Success probability assumed for a single TestOut.
pub const Q_INV: u32 = 8;

/// Cap on the number of parallel subrange tests per FindMin iteration; the
/// parity echo fills one message word up to this many bits.
pub const MAX_WAYS: u32 = 256;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Params {
    /// Confidence exponent: failure probability targets are `n^-c`.
    pub c: u32,
    /// Message width constant: `W_max = c_msg·⌈log₂(n + u)⌉`.
    pub c_msg: u32,
    pub prime: PrimeMode,
}

impl Default for Params {
    fn default() -> Self {
        Self { c: 2, c_msg: 4, prime: PrimeMode::default() }
    }
}

/// What every node knows before any message is exchanged, besides its
/// local view: the size bound, the weight bound and the derived widths.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Knowledge {
    pub n: usize,
    pub layout: BitLayout,
    pub w_max: u32,
    pub c: u32,
    pub prime: PrimeMode,
    /// `ε(n)⁻¹ = n^(c+1)`.
    pub eps_inv: u64,
}

impl Knowledge {
    pub fn new(n: usize, layout: BitLayout, params: &Params) -> Self {
        let n = n.max(1);
        let w_max = params.c_msg * bit_len(n as u128 + layout.u as u128 - 1).max(1);
        let eps_inv = (n as u64).saturating_pow(params.c + 1).max(2);
        Self { n, layout, w_max, c: params.c, prime: params.prime, eps_inv }
    }

    pub fn for_graph(g: &Graph, params: &Params) -> Self {
        Self::new(g.n_bound(), *g.layout(), params)
    }

    pub fn lg_n(&self) -> f64 {
        (self.n.max(2) as f64).log2()
    }

    /// Number of parallel subrange tests in one FindMin iteration.
    pub fn ways(&self) -> u32 {
        MAX_WAYS.min(self.w_max)
    }

    pub fn id_bits(&self) -> u32 {
        self.layout.id_bits
    }

    pub fn en_bits(&self) -> u32 {
        self.layout.en_bits
    }

    pub fn aw_bits(&self) -> u32 {
        self.layout.aw_bits()
    }

    /// Iteration cap of FindMin (standard) or FindMin-C (capped).
    pub fn find_min_cap(&self, capped: bool, max_aug_bits: u32) -> u32 {
        let c_over_q = (self.c * Q_INV) as f64;
        let lg_w = (self.ways().max(2) as f64).log2();
        let ratio = max_aug_bits.max(1) as f64 / lg_w;
        let cap = if capped {
            2.0 * c_over_q * ratio
        } else {
            c_over_q * self.lg_n() + c_over_q * ratio
        };
        cap.ceil().max(1.0) as u32
    }

    /// Attempt cap of FindAny: `16·ln(ε⁻¹)`.
    pub fn find_any_cap(&self) -> u32 {
        (16.0 * (self.eps_inv as f64).ln()).ceil().max(1.0) as u32
    }
}
