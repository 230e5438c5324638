//! Impromptu repair of a maintained MST or spanning forest after one update.

use serde::{Deserialize, Serialize};

use crate::graph::{EdgeNumber, Graph, NodeId};
use crate::params::{Knowledge, Params};
use crate::protocols::{Output, ProtocolError, Search, Tick, TreeNode};
use crate::runtime::{Network, RunConfig, RunReport};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Forest {
    Mst,
    St,
}

impl Forest {
    fn search(self) -> Search {
        match self {
            Forest::Mst => Search::Min,
            Forest::St => Search::Any,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum UpdateEvent {
    Delete(NodeId, NodeId),
    Insert(NodeId, NodeId, u64),
    WeightChange(NodeId, NodeId, u64),
}

impl UpdateEvent {
    pub fn ends(&self) -> (NodeId, NodeId) {
        match *self {
            UpdateEvent::Delete(a, b) | UpdateEvent::Insert(a, b, _) | UpdateEvent::WeightChange(a, b, _) => (a, b),
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            UpdateEvent::Delete(..) => "delete",
            UpdateEvent::Insert(..) => "insert",
            UpdateEvent::WeightChange(..) => "weight",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub struct RepairOutcome {
    pub was_marked: bool,
    /// Edge added by a replacement search or an insertion.
    pub added: Option<EdgeNumber>,
    /// Tree edge given up for a lighter inserted one.
    pub removed: Option<EdgeNumber>,
    /// Size of the smaller endpoint's tree after the update, before repair.
    pub tree_size: usize,
    pub properly_marked: bool,
    pub impromptu: bool,
    pub exactly_once: bool,
}

impl RepairOutcome {
    pub fn checks_pass(&self) -> bool {
        self.properly_marked && self.impromptu && self.exactly_once
    }
}

/// Applies `event` to `g` and repairs the marks of `g` with the distributed
/// protocol. `g` must be properly marked before the call.
pub fn repair(
    g: &mut Graph,
    forest: Forest,
    event: UpdateEvent,
    params: &Params,
    run: RunConfig,
) -> Result<RunReport<RepairOutcome>, ProtocolError> {
    g.check_properly_marked()?;
    let (a, b) = event.ends();
    let (small, large) = if a < b { (a, b) } else { (b, a) };
    let search = forest.search();
    let mut was_marked = false;
    let ticks = match event {
        UpdateEvent::Delete(..) => {
            was_marked = g.remove_edge(a, b)?.is_marked();
            [Tick::Deleted { neighbor: large, was_marked, search }, Tick::Deleted { neighbor: small, was_marked, search }]
        }
        UpdateEvent::Insert(_, _, w) => {
            g.add_edge(a, b, w)?;
            [Tick::Inserted { neighbor: large, search }, Tick::Inserted { neighbor: small, search }]
        }
        UpdateEvent::WeightChange(_, _, w) => {
            let e = g.find_edge(a, b)?;
            was_marked = g.edge(e).is_marked();
            let increased = w > g.edge(e).weight;
            g.set_weight(a, b, w)?;
            // weights do not constrain a spanning tree
            let increased = increased || forest == Forest::St;
            let was = was_marked && forest == Forest::Mst;
            [
                Tick::WeightChanged { neighbor: large, increased, was_marked: was },
                Tick::WeightChanged { neighbor: small, increased, was_marked: was },
            ]
        }
    };
    let tree_size = g.tree_of(small)?.len();
    let know = Knowledge::for_graph(g, params);
    let mut net = Network::new(g, know, run, |_, _| TreeNode::new(false));
    let [to_small, to_large] = ticks;
    net.tick(g.index_of(small)?, to_small);
    net.tick(g.index_of(large)?, to_large);
    net.run();
    if net.timed_out() {
        return Err(ProtocolError::Timeout);
    }
    let exactly_once = net.check_exactly_once();
    let properly_marked = net.check_properly_marked();
    let impromptu = net.check_impromptu();
    let mut added = None;
    let mut removed = None;
    for (_, _, out) in net.outputs() {
        match out {
            Output::Done(o) => added = added.or(o.edge(&net.knowledge().layout)),
            Output::Inserted { found, swapped } => {
                let en = g.edge_number(g.find_edge(a, b)?);
                if !found || swapped.is_some() {
                    added = Some(en);
                }
                removed = *swapped;
            }
            Output::Leader(_) => {}
        }
    }
    net.export_marks(g);
    let outcome = RepairOutcome { was_marked, added, removed, tree_size, properly_marked, impromptu, exactly_once };
    Ok(net.report(outcome))
}
