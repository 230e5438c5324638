//! The per-node local view: incident edges, their weights and mark bits.

use crate::graph::{AugmentedWeight, BitLayout, EdgeNumber, NodeId};

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Port {
    pub neighbor: NodeId,
    pub weight: u64,
    pub en: EdgeNumber,
    pub aug: AugmentedWeight,
    pub marked: bool,
    /// True when this node holds the smaller id of the edge.
    pub up: bool,
}

/// Everything a node knows about the graph: its id and its incident edges.
/// Ports are ordered by neighbor id.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct LocalView {
    id: NodeId,
    ports: Vec<Port>,
    by_aug: Vec<u32>,
    tree: Vec<u32>,
    max_aug: AugmentedWeight,
    max_en: EdgeNumber,
}

impl LocalView {
    pub fn new(id: NodeId, mut ports: Vec<Port>) -> Self {
        ports.sort_by_key(|p| p.neighbor);
        let mut by_aug: Vec<u32> = (0..ports.len() as u32).collect();
        by_aug.sort_by_key(|&i| ports[i as usize].aug);
        let tree = (0..ports.len() as u32).filter(|&i| ports[i as usize].marked).collect();
        let max_aug = ports.iter().map(|p| p.aug).max().unwrap_or(AugmentedWeight(0));
        let max_en = ports.iter().map(|p| p.en).max().unwrap_or(EdgeNumber(0));
        Self { id, ports, by_aug, tree, max_aug, max_en }
    }

    pub fn id(&self) -> NodeId {
        self.id
    }

    pub fn degree(&self) -> usize {
        self.ports.len()
    }

    pub fn ports(&self) -> &[Port] {
        &self.ports
    }

    pub fn port(&self, p: usize) -> &Port {
        &self.ports[p]
    }

    /// Marked ports in ascending port order.
    pub fn tree_ports(&self) -> &[u32] {
        &self.tree
    }

    pub fn max_aug(&self) -> AugmentedWeight {
        self.max_aug
    }

    pub fn max_en(&self) -> EdgeNumber {
        self.max_en
    }

    pub fn is_marked(&self, p: usize) -> bool {
        self.ports[p].marked
    }

    pub fn mark(&mut self, p: usize) {
        if !self.ports[p].marked {
            self.ports[p].marked = true;
            let pos = self.tree.binary_search(&(p as u32)).unwrap_err();
            self.tree.insert(pos, p as u32);
        }
    }

    pub fn unmark(&mut self, p: usize) {
        if self.ports[p].marked {
            self.ports[p].marked = false;
            let pos = self.tree.binary_search(&(p as u32)).expect("tree index in sync");
            self.tree.remove(pos);
        }
    }

    pub fn port_of(&self, neighbor: NodeId) -> Option<usize> {
        self.ports.binary_search_by_key(&neighbor, |p| p.neighbor).ok()
    }

    /// The port carrying edge number `en`, if it is incident to this node.
    pub fn port_of_en(&self, en: EdgeNumber, layout: &BitLayout) -> Option<usize> {
        let (a, b) = layout.endpoints(en);
        let other = if a == self.id {
            b
        } else if b == self.id {
            a
        } else {
            return None;
        };
        self.port_of(other).filter(|&p| self.ports[p].en == en)
    }

    /// Ports whose augmented weight lies in `[lo, hi]`, in ascending weight order.
    pub fn range(&self, lo: u128, hi: u128) -> impl Iterator<Item = &Port> + '_ {
        let start = self.by_aug.partition_point(|&i| self.ports[i as usize].aug.0 < lo);
        self.by_aug[start..]
            .iter()
            .map(move |&i| &self.ports[i as usize])
            .take_while(move |p| p.aug.0 <= hi)
    }
}
