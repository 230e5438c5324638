//! Phase-synchronised Borůvka construction of an MST or a spanning tree.

use serde::Serialize;

use crate::graph::{Graph, NodeId};
use crate::params::{Knowledge, Params};
use crate::protocols::messages::max_frames;
use crate::protocols::{ProtocolError, Search, Tick, TreeNode};
use crate::runtime::{Mode, Network, RunConfig, RunReport};

/// Schedule of a build: how many phases, and how long each step may take.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct PhaseConfig {
    pub c: u32,
    /// Assumed success probability of one capped search.
    pub big_c: f64,
    pub phase_count: u32,
    /// Rounds reserved for election, search and edge addition.
    pub max_time: u64,
    /// Rounds reserved for one cycle-detection election (ST only).
    pub detect_time: u64,
    /// Let trees that proved they have no outgoing edge skip later phases.
    pub settle: bool,
}

pub const MST_C: f64 = 0.25;
pub const ST_C: f64 = 1.0 / 16.0;

impl PhaseConfig {
    pub fn new(search: Search, know: &Knowledge, big_c: f64) -> Self {
        let lg = (know.n.max(1) as f64).log2().ceil();
        let phase_count = ((40.0 * know.c as f64 / big_c) * lg).ceil().max(1.0) as u32;
        let n = know.n as u64;
        let frames = max_frames(know) as u64;
        let waves = match search {
            Search::Min => 1 + 2 * (know.find_min_cap(true, know.aw_bits()) as u64 + 1),
            Search::Any => 5,
        };
        let max_time = 2 * n + waves * 2 * n * frames + 2 * n * frames + 2;
        Self { c: know.c, big_c, phase_count, max_time, detect_time: 2 * n + 1, settle: true }
    }

    pub fn mst(know: &Knowledge) -> Self {
        Self::new(Search::Min, know, MST_C)
    }

    pub fn st(know: &Knowledge) -> Self {
        Self::new(Search::Any, know, ST_C)
    }

    /// Rounds from one phase start to the next.
    pub fn phase_len(&self, search: Search) -> u64 {
        match search {
            Search::Min => self.max_time,
            Search::Any => self.max_time + 2 * self.detect_time + 3,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct BuildOutcome {
    /// Marked edges at the end, smaller id first.
    pub forest: Vec<(NodeId, NodeId)>,
    /// Phases in which some node was still active.
    pub phases_run: u32,
    /// Non-maximal trees at the start of each phase, when recorded.
    pub fragments: Vec<usize>,
    /// Barriers reached with messages still in flight.
    pub overruns: u32,
    /// Cycle-breaking steps that had to unmark whole cycles.
    pub full_cycle_breaks: u32,
    /// The marked subgraph spans every component without cycles.
    pub spanning: bool,
}

#[derive(Clone, Copy, Debug, Default)]
pub struct BuildOptions {
    pub record_fragments: bool,
}

fn check_mode(run: &RunConfig) -> Result<(), ProtocolError> {
    match run.mode {
        Mode::Sync => Ok(()),
        Mode::Async(_) => Err(ProtocolError::Unsupported("builds need the synchronous model")),
    }
}

fn non_maximal(g: &Graph, net: &Network<TreeNode>) -> usize {
    let mut snapshot = g.clone();
    net.export_marks(&mut snapshot);
    snapshot.non_maximal_trees()
}

struct Harness<'a> {
    g: &'a Graph,
    net: Network<TreeNode>,
    active: Vec<usize>,
    overruns: u32,
}

impl Harness<'_> {
    fn tick_active(&mut self, tag: Tick) {
        for &v in &self.active {
            self.net.tick(v, tag.clone());
        }
    }

    /// Runs up to just before `t`, then moves the clock to `t`.
    fn wait(&mut self, t: u64) {
        self.net.run_until(t - 1);
        if !self.net.is_quiescent() {
            self.overruns += 1;
        }
        self.net.run_until(t);
    }

    fn refresh(&mut self) {
        let net = &self.net;
        self.active.retain(|&v| !net.program(v).is_done());
    }
}

fn build(
    g: &mut Graph,
    search: Search,
    cfg: &PhaseConfig,
    params: &Params,
    run: RunConfig,
    opts: BuildOptions,
) -> Result<RunReport<BuildOutcome>, ProtocolError> {
    check_mode(&run)?;
    g.clear_marks();
    let know = Knowledge::for_graph(g, params);
    let phase_len = cfg.phase_len(search);
    let total = phase_len * cfg.phase_count as u64;
    let mut net = Network::new(g, know, run, |_, _| TreeNode::new(true));
    net.set_round_limit(total + 1);
    let mut h = Harness { g, net, active: (0..g.n()).collect(), overruns: 0 };
    let mut fragments = Vec::new();
    let mut phases_run = 0;
    let mut full_breaks = 0;
    let mut t = 0;
    for _ in 0..cfg.phase_count {
        if cfg.settle {
            h.refresh();
        }
        if h.active.is_empty() {
            break;
        }
        phases_run += 1;
        h.tick_active(Tick::PhaseStart(search));
        h.net.check_properly_marked();
        if opts.record_fragments {
            fragments.push(non_maximal(h.g, &h.net));
        }
        h.wait(t + cfg.max_time);
        if search == Search::Any {
            h.tick_active(Tick::FindDone);
            h.net.check_properly_marked();
            h.wait(t + cfg.max_time + cfg.detect_time);
            h.tick_active(Tick::Detect);
            h.wait(t + cfg.max_time + cfg.detect_time + 2);
            h.tick_active(Tick::Excluded);
            h.net.check_properly_marked();
            h.wait(t + cfg.max_time + 2 * cfg.detect_time + 2);
            let before = marked_ports(&h.net);
            h.tick_active(Tick::Redetect);
            if marked_ports(&h.net) < before {
                full_breaks += 1;
            }
            h.net.check_properly_marked();
        }
        t += phase_len;
        h.wait(t);
    }
    h.active = (0..h.g.n()).collect();
    h.tick_active(Tick::Barrier);
    h.net.run_until(total.max(t));
    h.net.check_properly_marked();
    h.net.check_exactly_once();
    let overruns = h.overruns;
    let net = h.net;
    net.export_marks(g);
    let outcome = BuildOutcome {
        forest: g.marked_pairs(),
        phases_run,
        fragments,
        overruns,
        full_cycle_breaks: full_breaks,
        spanning: g.marked_is_spanning_forest(),
    };
    Ok(net.report(outcome))
}

/// Number of locally marked ports, counted over all nodes.
fn marked_ports(net: &Network<TreeNode>) -> usize {
    net.views().iter().map(|v| v.tree_ports().len()).sum()
}

/// Builds a minimum spanning forest, overwriting the marks of `g`.
pub fn build_mst(
    g: &mut Graph,
    cfg: &PhaseConfig,
    params: &Params,
    run: RunConfig,
    opts: BuildOptions,
) -> Result<RunReport<BuildOutcome>, ProtocolError> {
    build(g, Search::Min, cfg, params, run, opts)
}

/// Builds a spanning forest, overwriting the marks of `g`.
pub fn build_st(
    g: &mut Graph,
    cfg: &PhaseConfig,
    params: &Params,
    run: RunConfig,
    opts: BuildOptions,
) -> Result<RunReport<BuildOutcome>, ProtocolError> {
    build(g, Search::Any, cfg, params, run, opts)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub struct CycleStep {
    pub length: usize,
    /// The single exclusion round left the marked subgraph acyclic.
    pub broken_by_exclusion: bool,
    /// Cycle edges unmarked by the exclusion round.
    pub excluded: usize,
    /// The marked subgraph is acyclic after the fallback step.
    pub acyclic: bool,
}

/// Runs the cycle-breaking step of Build ST on a cycle of length `k` whose
/// edges were all just added, with a marked pendant edge at each cycle node.
pub fn run_cycle_step(k: usize, seed: u64, params: &Params) -> Result<CycleStep, ProtocolError> {
    let n = 2 * k;
    let mut g = Graph::with_nodes(n, (n as u64).pow(3))?;
    for i in 0..k {
        let a = NodeId(i as u64 + 1);
        let b = NodeId(((i + 1) % k) as u64 + 1);
        g.add_edge(a, b, 1 + i as u64)?;
        let e = g.add_edge(a, NodeId((k + i) as u64 + 1), 100)?;
        g.set_marked(e, true);
    }
    let know = Knowledge::for_graph(&g, params);
    let cfg = PhaseConfig::st(&know);
    let mut net = Network::new(&g, know, RunConfig::sync(seed), |v, view| {
        let mut node = TreeNode::new(true);
        if v < k {
            node.stage_marks((0..view.degree() as u32).filter(|&p| !view.is_marked(p as usize)));
        }
        node
    });
    net.tick_all(Tick::FindDone);
    net.run_until(cfg.detect_time);
    net.tick_all(Tick::Detect);
    net.run_until(cfg.detect_time + 2);
    let marked_before = marked_ports(&net);
    net.tick_all(Tick::Excluded);
    let excluded = (marked_before - marked_ports(&net)) / 2;
    let mut snap = g.clone();
    net.export_marks(&mut snap);
    let broken_by_exclusion = snap.marked_components().1;
    net.run_until(2 * cfg.detect_time + 2);
    net.tick_all(Tick::Redetect);
    net.run();
    net.export_marks(&mut snap);
    Ok(CycleStep { length: k, broken_by_exclusion, excluded, acyclic: snap.marked_components().1 })
}
