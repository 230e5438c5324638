//! Discrete-event simulator of a CONGEST network.
//!
//! Nodes are [`NodeProgram`]s that react to messages and to ticks injected by
//! the driver. A [`Network`] owns the programs, the local views, per-node RNG
//! streams and the message calendar, and keeps message/bit/round counters.

pub mod audit;
mod network;
mod view;
pub mod wire;

use std::fmt;

use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use thiserror::Error;

use crate::graph::NodeId;
use crate::params::Knowledge;

pub use network::{DelayPolicy, Mode, Network, RunConfig, TraceLine};
pub use view::{LocalView, Port};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum RuntimeError {
    #[error("payload of {bits} bits exceeds W_max = {w_max}")]
    Oversize { bits: u32, w_max: u32 },
    #[error("node {from} is not adjacent to {to}")]
    Topology { from: u64, to: u64 },
    #[error("node {node} has no port {port}")]
    NoSuchPort { node: u64, port: usize },
}

/// A protocol message with a kind tag and an encoded payload length.
pub trait Message: Clone + fmt::Debug {
    fn kind(&self) -> &'static str;
    fn bits(&self, know: &Knowledge) -> u32;
}

/// Per-node protocol logic. Handlers only see the node's own view, RNG and
/// the global knowledge, and communicate only by sending messages.
pub trait NodeProgram {
    type Msg: Message;
    type Tick: Clone;
    type Output: Clone + fmt::Debug;

    fn on_start(&mut self, _cx: &mut Context<'_, Self::Msg, Self::Output>) {}

    fn on_message(&mut self, cx: &mut Context<'_, Self::Msg, Self::Output>, port: usize, msg: Self::Msg);

    fn on_tick(&mut self, _cx: &mut Context<'_, Self::Msg, Self::Output>, _tag: Self::Tick) {}

    /// Runs once after all messages a node receives at one instant.
    fn on_batch_end(&mut self, _cx: &mut Context<'_, Self::Msg, Self::Output>) {}

    /// Bits of protocol state currently held, excluding the local view.
    fn state_bits(&self, know: &Knowledge) -> u32;
}

pub(crate) struct Outgoing<M> {
    port: u32,
    msg: M,
    bits: u32,
}

/// Handler environment for one node.
pub struct Context<'a, M, O> {
    pub view: &'a mut LocalView,
    pub rng: &'a mut ChaCha8Rng,
    pub know: &'a Knowledge,
    now: u64,
    outbox: &'a mut Vec<Outgoing<M>>,
    outputs: &'a mut Vec<O>,
}

impl<M: Message, O> Context<'_, M, O> {
    pub fn now(&self) -> u64 {
        self.now
    }

    pub fn id(&self) -> NodeId {
        self.view.id()
    }

    /// Sends a single message; fails if it does not fit in `W_max` bits.
    pub fn send(&mut self, port: usize, msg: M) -> Result<(), RuntimeError> {
        if port >= self.view.degree() {
            return Err(RuntimeError::NoSuchPort { node: self.id().0, port });
        }
        let bits = msg.bits(self.know);
        if bits > self.know.w_max {
            return Err(RuntimeError::Oversize { bits, w_max: self.know.w_max });
        }
        self.outbox.push(Outgoing { port: port as u32, msg, bits });
        Ok(())
    }

    pub fn send_to(&mut self, to: NodeId, msg: M) -> Result<(), RuntimeError> {
        let port = self
            .view
            .port_of(to)
            .ok_or(RuntimeError::Topology { from: self.id().0, to: to.0 })?;
        self.send(port, msg)
    }

    /// Sends a logical message, split into `⌈bits/W_max⌉` physical frames.
    pub fn post(&mut self, port: usize, msg: M) {
        assert!(port < self.view.degree(), "node {} has no port {port}", self.id());
        let bits = msg.bits(self.know);
        self.outbox.push(Outgoing { port: port as u32, msg, bits });
    }

    pub fn emit(&mut self, out: O) {
        self.outputs.push(out);
    }
}

/// Message, bit and delivery counters of one run.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize)]
pub struct Counters {
    /// Physical messages (frames) sent.
    pub messages: u64,
    pub bits: u64,
    pub deliveries: u64,
    /// Logical messages before framing.
    pub logical: u64,
    pub max_message_bits: u32,
}

impl std::ops::Sub for Counters {
    type Output = Counters;

    fn sub(self, rhs: Counters) -> Counters {
        Counters {
            messages: self.messages - rhs.messages,
            bits: self.bits - rhs.bits,
            deliveries: self.deliveries - rhs.deliveries,
            logical: self.logical - rhs.logical,
            max_message_bits: self.max_message_bits,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct RunReport<O> {
    pub messages: u64,
    pub bits: u64,
    pub rounds: u64,
    pub deliveries: u64,
    pub max_message_bits: u32,
    pub seed: u64,
    pub completed: bool,
    /// Frames sent, when the run was traced.
    #[serde(skip)]
    pub trace: Vec<TraceLine>,
    pub outcome: O,
}

impl<O> RunReport<O> {
    pub fn new(c: Counters, rounds: u64, seed: u64, completed: bool, outcome: O) -> Self {
        Self {
            messages: c.messages,
            bits: c.bits,
            rounds,
            deliveries: c.deliveries,
            max_message_bits: c.max_message_bits,
            seed,
            completed,
            trace: Vec::new(),
            outcome,
        }
    }

    pub fn map<P>(self, f: impl FnOnce(O) -> P) -> RunReport<P> {
        RunReport {
            messages: self.messages,
            bits: self.bits,
            rounds: self.rounds,
            deliveries: self.deliveries,
            max_message_bits: self.max_message_bits,
            seed: self.seed,
            completed: self.completed,
            trace: self.trace,
            outcome: f(self.outcome),
        }
    }
}

/// SplitMix64 finaliser, used to derive independent seeds.
pub fn mix(x: u64) -> u64 {
    let mut z = x.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Seed for an independent stream identified by `(master, key)`.
pub fn derive_seed(master: u64, key: u64) -> u64 {
    mix(mix(master) ^ key.wrapping_mul(0xD6E8_FEB8_6659_FD93))
}
