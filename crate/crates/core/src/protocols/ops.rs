//! One-shot runs of each tree protocol on a fresh network.

use thiserror::Error;

use super::control::{Controller, HpTestCtl, Outcome, SearchMode};
use super::messages::{Echo, Query};
use super::node::{After, Output, Purpose, Tick, TreeNode};
use super::wave::{Aggregation, WaveEngine, WaveMsg};
use crate::graph::{AugmentedWeight, EdgeNumber, Graph, GraphError, NodeId};
use crate::params::{Knowledge, Params};
use crate::runtime::{Context, Network, NodeProgram, RunConfig, RunReport, RuntimeError};
use crate::sketch::{OddHash, SketchError};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum ProtocolError {
    #[error(transparent)]
    Graph(#[from] GraphError),
    #[error(transparent)]
    Runtime(#[from] RuntimeError),
    #[error(transparent)]
    Sketch(#[from] SketchError),
    #[error("run did not quiesce within the round limit")]
    Timeout,
    #[error("protocol ended without a result")]
    NoResult,
    #[error("unsupported configuration: {0}")]
    Unsupported(&'static str),
}

/// Runs one aggregation from a tick at the root and emits its result there.
#[derive(Clone, Debug)]
pub struct WaveNode<A: Aggregation> {
    spec: A,
    wave: WaveEngine<A>,
}

impl<A: Aggregation> WaveNode<A> {
    pub fn new(spec: A) -> Self {
        Self { spec, wave: WaveEngine::default() }
    }
}

impl<A: Aggregation> NodeProgram for WaveNode<A> {
    type Msg = WaveMsg<A::Down, A::Up>;
    type Tick = A::Down;
    type Output = A::Up;

    fn on_message(&mut self, cx: &mut Context<'_, Self::Msg, A::Up>, port: usize, msg: Self::Msg) {
        match msg {
            WaveMsg::Down(d) => self.wave.on_down(&self.spec, cx, port, d, |m| m),
            WaveMsg::Up(u) => {
                if let Some(result) = self.wave.on_up(&self.spec, cx, port, u, |m| m) {
                    cx.emit(result);
                }
            }
        }
    }

    fn on_tick(&mut self, cx: &mut Context<'_, Self::Msg, A::Up>, down: A::Down) {
        if let Some(result) = self.wave.start(&self.spec, cx, down, |m| m) {
            cx.emit(result);
        }
    }

    fn state_bits(&self, know: &Knowledge) -> u32 {
        self.wave.state_bits(know)
    }
}

fn finish_checks<P: NodeProgram>(net: &Network<P>) -> Result<(), ProtocolError> {
    if net.timed_out() {
        return Err(ProtocolError::Timeout);
    }
    net.check_exactly_once();
    net.check_properly_marked();
    Ok(())
}

/// Generic broadcast-and-echo of `spec` over the tree of `root`.
pub fn broadcast_and_echo<A: Aggregation + Clone>(
    g: &Graph,
    root: NodeId,
    spec: A,
    down: A::Down,
    params: &Params,
    cfg: RunConfig,
) -> Result<RunReport<A::Up>, ProtocolError> {
    g.tree_of(root)?;
    let v = g.index_of(root)?;
    let know = Knowledge::for_graph(g, params);
    let mut net = Network::new(g, know, cfg, |_, _| WaveNode::new(spec.clone()));
    net.tick(v, down);
    net.run();
    finish_checks(&net)?;
    let out = net.outputs().iter().find(|(_, id, _)| *id == root).map(|(_, _, o)| o.clone());
    let out = out.ok_or(ProtocolError::NoResult)?;
    Ok(net.report(out))
}

/// Runs `ctl` at `root` and returns its outcome.
pub fn run_controller(
    g: &Graph,
    root: NodeId,
    ctl: Controller,
    params: &Params,
    cfg: RunConfig,
) -> Result<RunReport<Outcome>, ProtocolError> {
    g.tree_of(root)?;
    let v = g.index_of(root)?;
    let know = Knowledge::for_graph(g, params);
    let mut net = Network::new(g, know, cfg, |_, _| TreeNode::new(false));
    net.tick(v, Tick::Run { ctl, then: After::Report });
    net.run();
    finish_checks(&net)?;
    let out = net.outputs().iter().find_map(|(_, id, o)| match o {
        Output::Done(out) if *id == root => Some(out.clone()),
        _ => None,
    });
    match out.ok_or(ProtocolError::NoResult)? {
        Outcome::Error(e) => Err(e.into()),
        out => Ok(net.report(out)),
    }
}

/// Elects the median of the tree of `x`; every member learns the result.
pub fn elect_leader(g: &Graph, x: NodeId, params: &Params, cfg: RunConfig) -> Result<RunReport<NodeId>, ProtocolError> {
    let tree = g.tree_of(x)?;
    let know = Knowledge::for_graph(g, params);
    let mut net = Network::new(g, know, cfg, |_, _| TreeNode::new(false));
    for &id in &tree.members {
        net.tick(g.index_of(id)?, Tick::Elect(Purpose::Announce));
    }
    net.run();
    finish_checks(&net)?;
    let heard: Vec<NodeId> = net
        .outputs()
        .iter()
        .filter_map(|(_, _, o)| match o {
            Output::Leader(l) => Some(*l),
            _ => None,
        })
        .collect();
    let leader = *heard.first().ok_or(ProtocolError::NoResult)?;
    if heard.len() != tree.len() || heard.iter().any(|&l| l != leader) {
        return Err(ProtocolError::NoResult);
    }
    Ok(net.report(leader))
}

/// Vector of parities of `h` over the cut edges in each of `ways` subranges of `[j, k]`.
pub fn test_out_parallel(
    g: &Graph,
    root: NodeId,
    j: u128,
    k: u128,
    hash: OddHash,
    ways: u32,
    params: &Params,
    cfg: RunConfig,
) -> Result<RunReport<Vec<bool>>, ProtocolError> {
    let q = Query::Parity { hash, lo: j, hi: k, ways };
    let rep = run_controller(g, root, Controller::single(q), params, cfg)?;
    Ok(rep.map(|o| match o {
        Outcome::Echo(Echo::Parity { bits, ways }) => (0..ways).map(|i| bits.get(i)).collect(),
        other => panic!("parity query returned {other:?}"),
    }))
}

/// Parity of `h` over the cut edges with augmented weight in `[j, k]`.
pub fn test_out(
    g: &Graph,
    root: NodeId,
    j: u128,
    k: u128,
    hash: OddHash,
    params: &Params,
    cfg: RunConfig,
) -> Result<RunReport<bool>, ProtocolError> {
    Ok(test_out_parallel(g, root, j, k, hash, 1, params, cfg)?.map(|v| v[0]))
}

/// Fingerprint cut test over `[j, k]`. `alpha` fixes the evaluation point.
pub fn hp_test_out(
    g: &Graph,
    root: NodeId,
    j: u128,
    k: u128,
    alpha: Option<u64>,
    params: &Params,
    cfg: RunConfig,
) -> Result<RunReport<bool>, ProtocolError> {
    let ctl = Controller::HpTest(HpTestCtl::new(root, j, k, alpha));
    let rep = run_controller(g, root, ctl, params, cfg)?;
    Ok(rep.map(|o| match o {
        Outcome::Bit(b) => b,
        other => panic!("cut test returned {other:?}"),
    }))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct MinResult {
    pub aug: Option<AugmentedWeight>,
    pub iterations: u32,
    pub exhausted: bool,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct AnyResult {
    pub en: Option<EdgeNumber>,
    pub attempts: u32,
}

pub fn find_min(
    g: &Graph,
    root: NodeId,
    mode: SearchMode,
    params: &Params,
    cfg: RunConfig,
) -> Result<RunReport<MinResult>, ProtocolError> {
    let rep = run_controller(g, root, Controller::find_min(mode, root), params, cfg)?;
    Ok(rep.map(|o| match o {
        Outcome::Min { aug, iterations, exhausted } => MinResult { aug, iterations, exhausted },
        other => panic!("FindMin returned {other:?}"),
    }))
}

pub fn find_any(
    g: &Graph,
    root: NodeId,
    mode: SearchMode,
    params: &Params,
    cfg: RunConfig,
) -> Result<RunReport<AnyResult>, ProtocolError> {
    let rep = run_controller(g, root, Controller::find_any(mode, root), params, cfg)?;
    Ok(rep.map(|o| match o {
        Outcome::Any { en, attempts } => AnyResult { en, attempts },
        other => panic!("FindAny returned {other:?}"),
    }))
}
