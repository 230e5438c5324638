//! Graph generators, reference oracles and experiment drivers.

use std::collections::BTreeSet;
use std::fmt;
use std::io;
use std::str::FromStr;

use petgraph::unionfind::UnionFind;
use rand::seq::{index, SliceRandom};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::algorithms::{build_mst, build_st, repair, BuildOptions, Forest, PhaseConfig, UpdateEvent};
use crate::graph::{Graph, GraphError, NodeId};
use crate::params::{Knowledge, Params};
use crate::protocols::ProtocolError;
use crate::runtime::{derive_seed, DelayPolicy, Mode, RunConfig, TraceLine};

#[derive(Debug, Error)]
pub enum ExperimentError {
    #[error("unrealizable parameters: {0}")]
    Config(String),
    #[error(transparent)]
    Graph(#[from] GraphError),
    #[error(transparent)]
    Protocol(#[from] ProtocolError),
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Io(#[from] io::Error),
}

fn config(msg: impl Into<String>) -> ExperimentError {
    ExperimentError::Config(msg.into())
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum GraphModel {
    ErdosRenyi,
    RandomTreePlus,
    Grid,
    Complete,
}

impl FromStr for GraphModel {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        Ok(match s {
            "erdos-renyi" => GraphModel::ErdosRenyi,
            "random-tree-plus" => GraphModel::RandomTreePlus,
            "grid" => GraphModel::Grid,
            "complete" => GraphModel::Complete,
            _ => return Err(format!("unknown graph model {s:?}")),
        })
    }
}

/// Default weight bound `n³`.
pub fn default_u(n: usize) -> u64 {
    (n.max(2) as u64).saturating_pow(3)
}

/// Random graph with ids injected into `[1, n²]` and weights in `[1, u]`.
/// `m` is ignored by the grid and complete models.
pub fn generate_graph(model: GraphModel, n: usize, m: usize, u: u64, seed: u64) -> Result<Graph, ExperimentError> {
    if n == 0 {
        return Err(config("n must be positive"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let space = (n as u64).pow(2).max(1);
    let ids: Vec<NodeId> = index::sample(&mut rng, space as usize, n).into_iter().map(|i| NodeId(i as u64 + 1)).collect();
    let mut g = Graph::new(ids, u, None)?;
    let max_m = n * (n - 1) / 2;
    let add = |g: &mut Graph, rng: &mut ChaCha8Rng, a: usize, b: usize| -> Result<(), ExperimentError> {
        let w = rng.gen_range(1..=u);
        g.add_edge_idx(a, b, w)?;
        Ok(())
    };
    match model {
        GraphModel::Complete => {
            for a in 0..n {
                for b in a + 1..n {
                    add(&mut g, &mut rng, a, b)?;
                }
            }
        }
        GraphModel::Grid => {
            let rows = (n as f64).sqrt().floor().max(1.0) as usize;
            let cols = n.div_ceil(rows);
            for v in 0..n {
                let (r, c) = (v / cols, v % cols);
                if c + 1 < cols && v + 1 < n {
                    add(&mut g, &mut rng, v, v + 1)?;
                }
                if (r + 1) * cols + c < n {
                    add(&mut g, &mut rng, v, v + cols)?;
                }
            }
        }
        GraphModel::ErdosRenyi | GraphModel::RandomTreePlus => {
            if m > max_m {
                return Err(config(format!("m = {m} exceeds n(n-1)/2 = {max_m}")));
            }
            if model == GraphModel::RandomTreePlus {
                if m + 1 < n {
                    return Err(config(format!("a connected graph on {n} nodes needs m >= {}", n - 1)));
                }
                let mut order: Vec<usize> = (0..n).collect();
                order.shuffle(&mut rng);
                for i in 1..n {
                    let parent = order[rng.gen_range(0..i)];
                    add(&mut g, &mut rng, order[i], parent)?;
                }
            }
            if 2 * m > max_m {
                let mut rest: Vec<(usize, usize)> = (0..n)
                    .flat_map(|a| (a + 1..n).map(move |b| (a, b)))
                    .filter(|&(a, b)| g.edge_between(a, b).is_none())
                    .collect();
                rest.shuffle(&mut rng);
                let need = m - g.m();
                for &(a, b) in &rest[..need] {
                    add(&mut g, &mut rng, a, b)?;
                }
            } else {
                while g.m() < m {
                    let a = rng.gen_range(0..n);
                    let b = rng.gen_range(0..n);
                    if a != b && g.edge_between(a, b).is_none() {
                        add(&mut g, &mut rng, a, b)?;
                    }
                }
            }
        }
    }
    Ok(g)
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct OracleResult {
    /// Sum of the augmented weights of the forest edges.
    pub mst_weight: u128,
    /// Forest edges, smaller id first, sorted.
    pub forest_edges: Vec<(NodeId, NodeId)>,
    pub component_count: usize,
}

/// Minimum spanning forest under augmented weights by sorted union-find.
pub fn kruskal_oracle(g: &Graph) -> OracleResult {
    let mut order: Vec<usize> = (0..g.m()).collect();
    order.sort_by_key(|&e| g.aug(e));
    let mut uf = UnionFind::<usize>::new(g.n());
    let mut weight = 0u128;
    let mut forest = Vec::new();
    for e in order {
        let [a, b] = g.edge(e).ends;
        if uf.union(a, b) {
            weight += g.aug(e).0;
            let r = g.edge_ref(e);
            forest.push((r.a, r.b));
        }
    }
    forest.sort_unstable();
    let component_count = g.n() - forest.len();
    OracleResult { mst_weight: weight, forest_edges: forest, component_count }
}

/// Marks exactly the oracle forest on `g`.
pub fn mark_oracle_forest(g: &mut Graph) {
    let oracle = kruskal_oracle(g);
    g.clear_marks();
    for (a, b) in oracle.forest_edges {
        let e = g.find_edge(a, b).expect("oracle edge exists");
        g.set_marked(e, true);
    }
}

/// Whether the marks of `g` are the correct answer for `forest`.
pub fn oracle_match(g: &Graph, forest: Forest) -> bool {
    match forest {
        Forest::Mst => g.is_properly_marked() && g.marked_pairs() == kruskal_oracle(g).forest_edges,
        Forest::St => g.marked_is_spanning_forest(),
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Algorithm {
    BuildMst,
    BuildSt,
    RepairMst,
    RepairSt,
}

impl Algorithm {
    pub fn name(self) -> &'static str {
        match self {
            Algorithm::BuildMst => "build-mst",
            Algorithm::BuildSt => "build-st",
            Algorithm::RepairMst => "repair-mst",
            Algorithm::RepairSt => "repair-st",
        }
    }

    pub fn forest(self) -> Forest {
        match self {
            Algorithm::BuildMst | Algorithm::RepairMst => Forest::Mst,
            Algorithm::BuildSt | Algorithm::RepairSt => Forest::St,
        }
    }
}

impl fmt::Display for Algorithm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Algorithm {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        [Algorithm::BuildMst, Algorithm::BuildSt, Algorithm::RepairMst, Algorithm::RepairSt]
            .into_iter()
            .find(|a| a.name() == s)
            .ok_or_else(|| format!("unknown algorithm {s:?}"))
    }
}

/// Edge count as a function of `n`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub enum Density {
    Fixed(usize),
    /// `m = round(n^p)`.
    Power(f64),
}

impl Density {
    pub fn edges(self, n: usize) -> usize {
        let max_m = n * n.saturating_sub(1) / 2;
        let m = match self {
            Density::Fixed(m) => m,
            Density::Power(p) => (n as f64).powf(p).round() as usize,
        };
        m.clamp(n.saturating_sub(1), max_m.max(n.saturating_sub(1)))
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExperimentSpec {
    pub algorithm: Algorithm,
    pub n_values: Vec<usize>,
    pub density: Density,
    pub model: GraphModel,
    pub u: Option<u64>,
    pub trials: usize,
    pub seed: u64,
    pub params: Params,
    pub mode: Mode,
}

impl ExperimentSpec {
    pub fn new(algorithm: Algorithm, n_values: Vec<usize>, density: Density, trials: usize, seed: u64) -> Self {
        Self {
            algorithm,
            n_values,
            density,
            model: GraphModel::RandomTreePlus,
            u: None,
            trials,
            seed,
            params: Params::default(),
            mode: Mode::Sync,
        }
    }

    fn validate(&self) -> Result<(), ExperimentError> {
        if self.trials == 0 {
            return Err(config("trials must be at least 1"));
        }
        if self.n_values.windows(2).any(|w| w[0] > w[1]) {
            return Err(config("n values must be sorted ascending"));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Row {
    pub algorithm: String,
    pub n: usize,
    pub m: usize,
    pub seed: u64,
    pub messages: u64,
    pub bits: u64,
    pub rounds: u64,
    pub success: bool,
    pub oracle_match: bool,
    /// `messages / (n·lg²n / lg lg n)`.
    pub norm_mst: f64,
    /// `messages / (n·lg n)`.
    pub norm_st: f64,
    pub msgs_per_m: f64,
}

fn lg(x: f64) -> f64 {
    x.max(2.0).log2()
}

pub fn norm_mst(messages: u64, n: usize) -> f64 {
    let n = n as f64;
    messages as f64 / (n * lg(n).powi(2) / lg(lg(n)).max(1.0))
}

pub fn norm_st(messages: u64, n: usize) -> f64 {
    let n = n as f64;
    messages as f64 / (n * lg(n))
}

/// Seeds of trial `trial` at size `n`: graph first, run second.
pub fn trial_seeds(master: u64, n: usize, trial: usize) -> (u64, u64) {
    let g = derive_seed(master, ((n as u64) << 24) | trial as u64);
    (g, derive_seed(g, 1))
}

fn run_trial(spec: &ExperimentSpec, n: usize, trial: usize) -> Row {
    traced_trial(spec, n, trial, false).0
}

/// One trial of `spec` at size `n`, with the frame trace when `trace` is set.
pub fn traced_trial(spec: &ExperimentSpec, n: usize, trial: usize, trace: bool) -> (Row, Vec<TraceLine>) {
    let (gseed, rseed) = trial_seeds(spec.seed, n, trial);
    let u = spec.u.unwrap_or_else(|| default_u(n));
    let m = spec.density.edges(n);
    let mut row = Row {
        algorithm: spec.algorithm.name().to_string(),
        n,
        m,
        seed: rseed,
        messages: 0,
        bits: 0,
        rounds: 0,
        success: false,
        oracle_match: false,
        norm_mst: 0.0,
        norm_st: 0.0,
        msgs_per_m: 0.0,
    };
    let Ok(mut g) = generate_graph(spec.model, n, m, u, gseed) else { return (row, Vec::new()) };
    row.m = g.m();
    let run = RunConfig { mode: spec.mode, trace, ..RunConfig::sync(rseed) };
    let mut lines = Vec::new();
    let know = Knowledge::for_graph(&g, &spec.params);
    let result = match spec.algorithm {
        Algorithm::BuildMst => build_mst(&mut g, &PhaseConfig::mst(&know), &spec.params, run, BuildOptions::default())
            .map(|r| r.map(|o| o.overruns == 0)),
        Algorithm::BuildSt => build_st(&mut g, &PhaseConfig::st(&know), &spec.params, run, BuildOptions::default())
            .map(|r| r.map(|o| o.overruns == 0)),
        Algorithm::RepairMst | Algorithm::RepairSt => {
            // one deletion of a random tree edge from an oracle-built forest
            mark_oracle_forest(&mut g);
            let mut rng = ChaCha8Rng::seed_from_u64(rseed);
            let marked = g.marked();
            if marked.is_empty() {
                row.success = true;
                row.oracle_match = true;
                return (row, Vec::new());
            }
            let r = g.edge_ref(marked[rng.gen_range(0..marked.len())]);
            repair(&mut g, spec.algorithm.forest(), UpdateEvent::Delete(r.a, r.b), &spec.params, run)
                .map(|r| r.map(|o| o.checks_pass()))
        }
    };
    if let Ok(mut rep) = result {
        lines = std::mem::take(&mut rep.trace);
        row.messages = rep.messages;
        row.bits = rep.bits;
        row.rounds = rep.rounds;
        row.success = rep.completed && rep.outcome;
        row.oracle_match = oracle_match(&g, spec.algorithm.forest());
    }
    row.norm_mst = norm_mst(row.messages, n);
    row.norm_st = norm_st(row.messages, n);
    row.msgs_per_m = if row.m == 0 { 0.0 } else { row.messages as f64 / row.m as f64 };
    (row, lines)
}

/// Runs every `(n, trial)` pair, in parallel, and returns rows in spec order.
pub fn run_experiment(spec: &ExperimentSpec) -> Result<Vec<Row>, ExperimentError> {
    spec.validate()?;
    let jobs: Vec<(usize, usize)> =
        spec.n_values.iter().flat_map(|&n| (0..spec.trials).map(move |t| (n, t))).collect();
    Ok(jobs.par_iter().map(|&(n, t)| run_trial(spec, n, t)).collect())
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct EventMix {
    pub delete: f64,
    pub insert: f64,
    /// The remainder are weight changes.
    pub weight: f64,
}

impl Default for EventMix {
    fn default() -> Self {
        Self { delete: 0.4, insert: 0.4, weight: 0.2 }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ChurnSpec {
    pub forest: Forest,
    pub n: usize,
    pub m: usize,
    pub u: Option<u64>,
    pub events: usize,
    pub seed: u64,
    pub params: Params,
    pub delay: DelayPolicy,
    pub mix: EventMix,
    /// Delete only tree edges, so that every delete triggers a search.
    pub tree_deletes: bool,
}

impl ChurnSpec {
    pub fn new(forest: Forest, n: usize, m: usize, events: usize, seed: u64) -> Self {
        Self {
            forest,
            n,
            m,
            u: None,
            events,
            seed,
            params: Params::default(),
            delay: DelayPolicy::Uniform(4),
            mix: EventMix::default(),
            tree_deletes: false,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ChurnRow {
    pub event: usize,
    pub kind: &'static str,
    pub a: u64,
    pub b: u64,
    pub was_marked: bool,
    pub tree_size: usize,
    pub messages: u64,
    pub bits: u64,
    pub rounds: u64,
    pub oracle_match: bool,
    pub checks: bool,
}

fn next_event(g: &Graph, spec: &ChurnSpec, u: u64, rng: &mut ChaCha8Rng) -> Option<UpdateEvent> {
    let n = g.n();
    let roll: f64 = rng.gen();
    let full = g.m() >= n * (n - 1) / 2;
    if (roll < spec.mix.delete || full) && g.m() > 0 {
        let pool = if spec.tree_deletes { g.marked() } else { (0..g.m()).collect() };
        let e = *pool.choose(rng)?;
        let r = g.edge_ref(e);
        return Some(UpdateEvent::Delete(r.a, r.b));
    }
    if roll < spec.mix.delete + spec.mix.insert || g.m() == 0 {
        loop {
            let a = rng.gen_range(0..n);
            let b = rng.gen_range(0..n);
            if a != b && g.edge_between(a, b).is_none() {
                return Some(UpdateEvent::Insert(g.id(a), g.id(b), rng.gen_range(1..=u)));
            }
        }
    }
    let e = rng.gen_range(0..g.m());
    let r = g.edge_ref(e);
    Some(UpdateEvent::WeightChange(r.a, r.b, rng.gen_range(1..=u)))
}

/// Applies a seeded sequence of well-separated updates to an oracle-built
/// forest, repairing after each and checking against the oracle.
pub fn run_churn(spec: &ChurnSpec) -> Result<Vec<ChurnRow>, ExperimentError> {
    if spec.n < 2 {
        return Err(config("churn needs at least two nodes"));
    }
    let u = spec.u.unwrap_or_else(|| default_u(spec.n));
    let mut g = generate_graph(GraphModel::RandomTreePlus, spec.n, spec.m, u, derive_seed(spec.seed, 0))?;
    mark_oracle_forest(&mut g);
    let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(spec.seed, 1));
    let mut rows = Vec::with_capacity(spec.events);
    for i in 0..spec.events {
        let Some(event) = next_event(&g, spec, u, &mut rng) else { break };
        let run = RunConfig::asynchronous(derive_seed(spec.seed, 2 + i as u64), spec.delay);
        let rep = repair(&mut g, spec.forest, event, &spec.params, run)?;
        let (a, b) = event.ends();
        rows.push(ChurnRow {
            event: i,
            kind: event.name(),
            a: a.0,
            b: b.0,
            was_marked: rep.outcome.was_marked,
            tree_size: rep.outcome.tree_size,
            messages: rep.messages,
            bits: rep.bits,
            rounds: rep.rounds,
            oracle_match: oracle_match(&g, spec.forest),
            checks: rep.outcome.checks_pass(),
        });
    }
    Ok(rows)
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ChurnSummary {
    pub kind: &'static str,
    pub count: usize,
    pub mean_messages: f64,
    pub p95_messages: u64,
}

/// Per-kind mean and 95th percentile of messages.
pub fn summarize_churn(rows: &[ChurnRow]) -> Vec<ChurnSummary> {
    let kinds: BTreeSet<&'static str> = rows.iter().map(|r| r.kind).collect();
    kinds
        .into_iter()
        .map(|kind| {
            let mut msgs: Vec<u64> = rows.iter().filter(|r| r.kind == kind).map(|r| r.messages).collect();
            msgs.sort_unstable();
            let count = msgs.len();
            let mean = msgs.iter().sum::<u64>() as f64 / count as f64;
            let idx = ((count as f64 * 0.95).ceil() as usize).clamp(1, count) - 1;
            ChurnSummary { kind, count, mean_messages: mean, p95_messages: msgs[idx] }
        })
        .collect()
}

pub fn write_csv<T: Serialize, W: io::Write>(rows: &[T], out: W) -> Result<(), ExperimentError> {
    let mut w = csv::Writer::from_writer(out);
    for r in rows {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}
