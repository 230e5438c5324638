//! Node identifiers, edge numbers, augmented weights and the marked graph.
//!
//! A [`Graph`] stores the topology together with one mark bit per edge
//! endpoint. Marked edges are the maintained forest; a graph is *properly
//! marked* when every edge is marked by both endpoints or by neither.

use std::collections::{BTreeMap, BTreeSet, HashMap, VecDeque};
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum GraphError {
    #[error("invalid edge: self-loop at node {0}")]
    SelfLoop(u64),
    #[error("node id {id} does not fit in {bits} bits")]
    IdOverflow { id: u64, bits: u32 },
    #[error("edge number {en} does not fit in {bits} bits")]
    EdgeNumberOverflow { en: u64, bits: u32 },
    #[error("weight {weight} outside [1, {u}]")]
    WeightOutOfRange { weight: u64, u: u64 },
    #[error("node ids must be positive")]
    ZeroId,
    #[error("duplicate node id {0}")]
    DuplicateId(u64),
    #[error("parallel edge between {0} and {1}")]
    ParallelEdge(u64, u64),
    #[error("unknown node {0}")]
    UnknownNode(u64),
    #[error("no edge between {0} and {1}")]
    NoSuchEdge(u64, u64),
    #[error("edge {{{0}, {1}}} is marked by only one endpoint")]
    ImproperMark(u64, u64),
    #[error("augmented weights need {0} bits, at most 127 are supported")]
    LayoutTooWide(u32),
    #[error("line {line}: {msg}")]
    Parse { line: usize, msg: String },
}

/// Number of bits needed to write `x` in binary, i.e. `⌈log₂(x + 1)⌉`.
pub fn bit_len(x: u128) -> u32 {
    128 - x.leading_zeros()
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct NodeId(pub u64);

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct EdgeNumber(pub u64);

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct AugmentedWeight(pub u128);

impl fmt::Display for NodeId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        self.0.fmt(f)
    }
}

impl fmt::Display for EdgeNumber {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        self.0.fmt(f)
    }
}

impl fmt::Display for AugmentedWeight {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        self.0.fmt(f)
    }
}

/// Concatenates the two endpoint ids, smaller first: `min·2^id_bits + max`.
pub fn edge_number(u: NodeId, v: NodeId, id_bits: u32) -> Result<EdgeNumber, GraphError> {
    if u == v {
        return Err(GraphError::SelfLoop(u.0));
    }
    for id in [u, v] {
        if id_bits < 64 && id.0 >> id_bits != 0 {
            return Err(GraphError::IdOverflow { id: id.0, bits: id_bits });
        }
    }
    if 2 * id_bits > 64 {
        return Err(GraphError::EdgeNumberOverflow { en: u64::MAX, bits: 2 * id_bits });
    }
    let (lo, hi) = if u < v { (u.0, v.0) } else { (v.0, u.0) };
    Ok(EdgeNumber((lo << id_bits) | hi))
}

/// Puts the raw weight in front of the edge number: `weight·2^en_bits + en`.
pub fn augmented_weight(
    weight: u64,
    en: EdgeNumber,
    en_bits: u32,
    u: u64,
) -> Result<AugmentedWeight, GraphError> {
    if weight == 0 || weight > u {
        return Err(GraphError::WeightOutOfRange { weight, u });
    }
    if en_bits < 64 && en.0 >> en_bits != 0 {
        return Err(GraphError::EdgeNumberOverflow { en: en.0, bits: en_bits });
    }
    let width = bit_len(u as u128) + en_bits;
    if width > 127 {
        return Err(GraphError::LayoutTooWide(width));
    }
    Ok(AugmentedWeight(((weight as u128) << en_bits) | en.0 as u128))
}

/// Fixed-width bit layout for ids, edge numbers and augmented weights.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct BitLayout {
    pub id_bits: u32,
    pub en_bits: u32,
    pub wt_bits: u32,
    pub u: u64,
}

impl BitLayout {
    /// Layout for ids drawn from `[1, n²]` where `n` is the known size bound.
    pub fn for_bound(n_bound: usize, u: u64) -> Result<Self, GraphError> {
        let n = n_bound.max(1) as u128;
        Self::with_id_bits(bit_len(n * n).max(1), u)
    }

    pub fn with_id_bits(id_bits: u32, u: u64) -> Result<Self, GraphError> {
        let en_bits = 2 * id_bits;
        if en_bits > 64 {
            return Err(GraphError::EdgeNumberOverflow { en: u64::MAX, bits: en_bits });
        }
        let wt_bits = bit_len(u.max(1) as u128);
        if wt_bits + en_bits > 127 {
            return Err(GraphError::LayoutTooWide(wt_bits + en_bits));
        }
        Ok(Self { id_bits, en_bits, wt_bits, u: u.max(1) })
    }

    pub fn aw_bits(&self) -> u32 {
        self.wt_bits + self.en_bits
    }

    pub fn edge_number(&self, a: NodeId, b: NodeId) -> Result<EdgeNumber, GraphError> {
        edge_number(a, b, self.id_bits)
    }

    pub fn augmented(&self, weight: u64, en: EdgeNumber) -> Result<AugmentedWeight, GraphError> {
        augmented_weight(weight, en, self.en_bits, self.u)
    }

    /// Recovers the endpoint ids from an edge number, smaller first.
    pub fn endpoints(&self, en: EdgeNumber) -> (NodeId, NodeId) {
        let mask = (1u64 << self.id_bits) - 1;
        (NodeId(en.0 >> self.id_bits), NodeId(en.0 & mask))
    }

    pub fn edge_number_of(&self, aw: AugmentedWeight) -> EdgeNumber {
        EdgeNumber((aw.0 & ((1u128 << self.en_bits) - 1)) as u64)
    }

    pub fn weight_of(&self, aw: AugmentedWeight) -> u64 {
        (aw.0 >> self.en_bits) as u64
    }
}

/// An undirected edge between node indices `ends[0]` and `ends[1]`.
/// `marks[i]` is the mark bit held by endpoint `ends[i]`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Edge {
    pub ends: [usize; 2],
    pub weight: u64,
    pub marks: [bool; 2],
}

impl Edge {
    pub fn is_marked(&self) -> bool {
        self.marks[0] && self.marks[1]
    }

    pub fn other(&self, x: usize) -> usize {
        if self.ends[0] == x {
            self.ends[1]
        } else {
            self.ends[0]
        }
    }

    pub fn side_of(&self, x: usize) -> usize {
        usize::from(self.ends[0] != x)
    }
}

/// Edge description used by oracles and reports.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
pub struct EdgeRef {
    pub aug: AugmentedWeight,
    pub number: EdgeNumber,
    pub a: NodeId,
    pub b: NodeId,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Graph {
    ids: Vec<NodeId>,
    index: HashMap<NodeId, usize>,
    edges: Vec<Edge>,
    lookup: HashMap<(usize, usize), usize>,
    n_bound: usize,
    layout: BitLayout,
}

fn key(a: usize, b: usize) -> (usize, usize) {
    if a < b {
        (a, b)
    } else {
        (b, a)
    }
}

impl Graph {
    /// Creates an edgeless graph. `n_bound` is the size bound the nodes know
    /// (defaults to the exact node count).
    pub fn new(ids: Vec<NodeId>, u: u64, n_bound: Option<usize>) -> Result<Self, GraphError> {
        let n_bound = n_bound.unwrap_or(ids.len()).max(ids.len());
        let layout = BitLayout::for_bound(n_bound, u)?;
        Self::with_layout(ids, layout, n_bound)
    }

    pub fn with_layout(ids: Vec<NodeId>, layout: BitLayout, n_bound: usize) -> Result<Self, GraphError> {
        let mut index = HashMap::with_capacity(ids.len());
        for (i, &id) in ids.iter().enumerate() {
            if id.0 == 0 {
                return Err(GraphError::ZeroId);
            }
            if layout.id_bits < 64 && id.0 >> layout.id_bits != 0 {
                return Err(GraphError::IdOverflow { id: id.0, bits: layout.id_bits });
            }
            if index.insert(id, i).is_some() {
                return Err(GraphError::DuplicateId(id.0));
            }
        }
        Ok(Self {
            ids,
            index,
            edges: Vec::new(),
            lookup: HashMap::new(),
            n_bound: n_bound.max(1),
            layout,
        })
    }

    /// Nodes with ids `1..=n`.
    pub fn with_nodes(n: usize, u: u64) -> Result<Self, GraphError> {
        Self::new((1..=n as u64).map(NodeId).collect(), u, None)
    }

    pub fn n(&self) -> usize {
        self.ids.len()
    }

    pub fn m(&self) -> usize {
        self.edges.len()
    }

    pub fn u(&self) -> u64 {
        self.layout.u
    }

    pub fn n_bound(&self) -> usize {
        self.n_bound
    }

    pub fn layout(&self) -> &BitLayout {
        &self.layout
    }

    pub fn ids(&self) -> &[NodeId] {
        &self.ids
    }

    pub fn id(&self, i: usize) -> NodeId {
        self.ids[i]
    }

    pub fn index_of(&self, id: NodeId) -> Result<usize, GraphError> {
        self.index.get(&id).copied().ok_or(GraphError::UnknownNode(id.0))
    }

    pub fn edges(&self) -> &[Edge] {
        &self.edges
    }

    pub fn edge(&self, e: usize) -> &Edge {
        &self.edges[e]
    }

    pub fn edge_between(&self, a: usize, b: usize) -> Option<usize> {
        self.lookup.get(&key(a, b)).copied()
    }

    pub fn find_edge(&self, x: NodeId, y: NodeId) -> Result<usize, GraphError> {
        let (a, b) = (self.index_of(x)?, self.index_of(y)?);
        self.edge_between(a, b).ok_or(GraphError::NoSuchEdge(x.0, y.0))
    }

    pub fn add_edge(&mut self, x: NodeId, y: NodeId, weight: u64) -> Result<usize, GraphError> {
        let (a, b) = (self.index_of(x)?, self.index_of(y)?);
        self.add_edge_idx(a, b, weight)
    }

    pub fn add_edge_idx(&mut self, a: usize, b: usize, weight: u64) -> Result<usize, GraphError> {
        if a == b {
            return Err(GraphError::SelfLoop(self.ids[a].0));
        }
        if weight == 0 || weight > self.layout.u {
            return Err(GraphError::WeightOutOfRange { weight, u: self.layout.u });
        }
        let k = key(a, b);
        if self.lookup.contains_key(&k) {
            return Err(GraphError::ParallelEdge(self.ids[a].0, self.ids[b].0));
        }
        self.lookup.insert(k, self.edges.len());
        self.edges.push(Edge { ends: [a, b], weight, marks: [false; 2] });
        Ok(self.edges.len() - 1)
    }

    /// Removes an edge; edge indices other than the last one are stable,
    /// the last edge takes the removed slot.
    pub fn remove_edge(&mut self, x: NodeId, y: NodeId) -> Result<Edge, GraphError> {
        let e = self.find_edge(x, y)?;
        let removed = self.edges.swap_remove(e);
        self.lookup.remove(&key(removed.ends[0], removed.ends[1]));
        if e < self.edges.len() {
            let moved = &self.edges[e];
            self.lookup.insert(key(moved.ends[0], moved.ends[1]), e);
        }
        Ok(removed)
    }

    pub fn set_weight(&mut self, x: NodeId, y: NodeId, weight: u64) -> Result<(), GraphError> {
        if weight == 0 || weight > self.layout.u {
            return Err(GraphError::WeightOutOfRange { weight, u: self.layout.u });
        }
        let e = self.find_edge(x, y)?;
        self.edges[e].weight = weight;
        Ok(())
    }

    /// Marks or unmarks an edge at both endpoints.
    pub fn set_marked(&mut self, e: usize, marked: bool) {
        self.edges[e].marks = [marked; 2];
    }

    pub fn set_mark_bit(&mut self, e: usize, side: usize, marked: bool) {
        self.edges[e].marks[side] = marked;
    }

    pub fn clear_marks(&mut self) {
        for e in &mut self.edges {
            e.marks = [false; 2];
        }
    }

    pub fn edge_number(&self, e: usize) -> EdgeNumber {
        let edge = &self.edges[e];
        self.layout
            .edge_number(self.ids[edge.ends[0]], self.ids[edge.ends[1]])
            .expect("ids validated on construction")
    }

    pub fn aug(&self, e: usize) -> AugmentedWeight {
        self.layout
            .augmented(self.edges[e].weight, self.edge_number(e))
            .expect("weights validated on insertion")
    }

    pub fn edge_ref(&self, e: usize) -> EdgeRef {
        let edge = &self.edges[e];
        let (a, b) = (self.ids[edge.ends[0]], self.ids[edge.ends[1]]);
        let (a, b) = if a < b { (a, b) } else { (b, a) };
        EdgeRef { aug: self.aug(e), number: self.edge_number(e), a, b }
    }

    pub fn check_properly_marked(&self) -> Result<(), GraphError> {
        match self.edges.iter().find(|e| e.marks[0] != e.marks[1]) {
            Some(e) => Err(GraphError::ImproperMark(self.ids[e.ends[0]].0, self.ids[e.ends[1]].0)),
            None => Ok(()),
        }
    }

    pub fn is_properly_marked(&self) -> bool {
        self.check_properly_marked().is_ok()
    }

    /// Edge indices of fully marked edges.
    pub fn marked(&self) -> Vec<usize> {
        (0..self.edges.len()).filter(|&e| self.edges[e].is_marked()).collect()
    }

    /// Marked edges as id pairs, smaller id first, sorted.
    pub fn marked_pairs(&self) -> Vec<(NodeId, NodeId)> {
        let mut pairs: Vec<_> = self
            .marked()
            .into_iter()
            .map(|e| {
                let r = self.edge_ref(e);
                (r.a, r.b)
            })
            .collect();
        pairs.sort_unstable();
        pairs
    }

    /// Per-node `(neighbor, edge index)` lists over all edges.
    pub fn adjacency(&self) -> Vec<Vec<(usize, usize)>> {
        let mut adj = vec![Vec::new(); self.n()];
        for (e, edge) in self.edges.iter().enumerate() {
            adj[edge.ends[0]].push((edge.ends[1], e));
            adj[edge.ends[1]].push((edge.ends[0], e));
        }
        adj
    }

    fn marked_adjacency(&self) -> Vec<Vec<usize>> {
        let mut adj = vec![Vec::new(); self.n()];
        for edge in self.edges.iter().filter(|e| e.is_marked()) {
            adj[edge.ends[0]].push(edge.ends[1]);
            adj[edge.ends[1]].push(edge.ends[0]);
        }
        adj
    }

    /// The maintained tree containing `x`: its component in the marked subgraph.
    pub fn tree_of(&self, x: NodeId) -> Result<TreeView, GraphError> {
        self.check_properly_marked()?;
        let start = self.index_of(x)?;
        let adj = self.marked_adjacency();
        let mut seen = vec![false; self.n()];
        let mut queue = VecDeque::from([start]);
        seen[start] = true;
        let mut members = BTreeSet::new();
        let mut tree_adjacency = BTreeMap::new();
        while let Some(v) = queue.pop_front() {
            members.insert(self.ids[v]);
            let mut nbrs: Vec<NodeId> = adj[v].iter().map(|&w| self.ids[w]).collect();
            nbrs.sort_unstable();
            tree_adjacency.insert(self.ids[v], nbrs);
            for &w in &adj[v] {
                if !seen[w] {
                    seen[w] = true;
                    queue.push_back(w);
                }
            }
        }
        Ok(TreeView { root: x, members, tree_adjacency })
    }

    /// Edges with exactly one endpoint in `t` and augmented weight in `[j, k]`.
    /// Reference oracle; protocol code never calls this.
    pub fn cut_edges(&self, t: &TreeView, j: u128, k: u128) -> Vec<EdgeRef> {
        let inside: Vec<bool> = self.ids.iter().map(|id| t.members.contains(id)).collect();
        let mut cut: Vec<EdgeRef> = (0..self.m())
            .filter(|&e| {
                let [a, b] = self.edges[e].ends;
                inside[a] != inside[b]
            })
            .map(|e| self.edge_ref(e))
            .filter(|r| r.aug.0 >= j && r.aug.0 <= k)
            .collect();
        cut.sort_unstable();
        cut
    }

    /// Union-find labels of the components of the marked subgraph, plus
    /// whether the marked subgraph is acyclic.
    pub fn marked_components(&self) -> (Vec<usize>, bool) {
        let mut uf = petgraph::unionfind::UnionFind::<usize>::new(self.n());
        let mut acyclic = true;
        for edge in self.edges.iter().filter(|e| e.is_marked()) {
            if !uf.union(edge.ends[0], edge.ends[1]) {
                acyclic = false;
            }
        }
        ((0..self.n()).map(|v| uf.find(v)).collect(), acyclic)
    }

    /// Number of connected components of the whole graph.
    pub fn component_count(&self) -> usize {
        let mut uf = petgraph::unionfind::UnionFind::<usize>::new(self.n());
        let mut count = self.n();
        for edge in &self.edges {
            if uf.union(edge.ends[0], edge.ends[1]) {
                count -= 1;
            }
        }
        count
    }

    /// Marked trees that still have an edge leaving them.
    pub fn non_maximal_trees(&self) -> usize {
        let (labels, _) = self.marked_components();
        let mut open = BTreeSet::new();
        for edge in &self.edges {
            let [a, b] = edge.ends;
            if labels[a] != labels[b] {
                open.insert(labels[a]);
                open.insert(labels[b]);
            }
        }
        open.len()
    }

    /// True when the marked edges form a spanning forest of the graph.
    pub fn marked_is_spanning_forest(&self) -> bool {
        let (_, acyclic) = self.marked_components();
        acyclic && self.is_properly_marked() && self.non_maximal_trees() == 0
    }

    /// Text form: `n m u` followed by `u v w` per edge, nodes labelled by id.
    pub fn to_text(&self) -> String {
        let mut out = format!("{} {} {}\n", self.n(), self.m(), self.layout.u);
        for edge in &self.edges {
            out.push_str(&format!(
                "{} {} {}\n",
                self.ids[edge.ends[0]], self.ids[edge.ends[1]], edge.weight
            ));
        }
        out
    }

    /// Parses the text form. Node ids are `1..=n`.
    pub fn parse(text: &str) -> Result<Self, GraphError> {
        let mut lines = text
            .lines()
            .enumerate()
            .map(|(i, l)| (i + 1, l.trim()))
            .filter(|(_, l)| !l.is_empty() && !l.starts_with('#'));
        let (line, header) = lines.next().ok_or(GraphError::Parse { line: 1, msg: "empty input".into() })?;
        let nums = parse_fields::<3>(line, header)?;
        let (n, m, u) = (nums[0] as usize, nums[1] as usize, nums[2]);
        let mut g = Graph::with_nodes(n, u)?;
        for _ in 0..m {
            let (line, text) = lines.next().ok_or(GraphError::Parse { line: 0, msg: format!("expected {m} edges") })?;
            let f = parse_fields::<3>(line, text)?;
            g.add_edge(NodeId(f[0]), NodeId(f[1]), f[2])
                .map_err(|e| GraphError::Parse { line, msg: e.to_string() })?;
        }
        Ok(g)
    }

    /// One `u v` line per marked edge.
    pub fn marks_to_text(&self) -> String {
        self.marked_pairs().iter().map(|(a, b)| format!("{a} {b}\n")).collect()
    }

    /// Replaces the mark state with the pairs listed in `text`.
    pub fn load_marks(&mut self, text: &str) -> Result<(), GraphError> {
        self.clear_marks();
        for (i, l) in text.lines().enumerate() {
            let l = l.trim();
            if l.is_empty() || l.starts_with('#') {
                continue;
            }
            let f = parse_fields::<2>(i + 1, l)?;
            let e = self.find_edge(NodeId(f[0]), NodeId(f[1]))?;
            self.set_marked(e, true);
        }
        Ok(())
    }
}

fn parse_fields<const N: usize>(line: usize, text: &str) -> Result<[u64; N], GraphError> {
    let mut out = [0u64; N];
    let mut it = text.split_whitespace();
    for slot in &mut out {
        let tok = it.next().ok_or(GraphError::Parse { line, msg: format!("expected {N} fields") })?;
        *slot = tok
            .parse()
            .map_err(|_| GraphError::Parse { line, msg: format!("bad integer {tok:?}") })?;
    }
    if it.next().is_some() {
        return Err(GraphError::Parse { line, msg: format!("expected {N} fields") });
    }
    Ok(out)
}

/// A maintained tree: one component of the marked subgraph.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct TreeView {
    pub root: NodeId,
    pub members: BTreeSet<NodeId>,
    pub tree_adjacency: BTreeMap<NodeId, Vec<NodeId>>,
}

impl TreeView {
    pub fn len(&self) -> usize {
        self.members.len()
    }

    pub fn is_empty(&self) -> bool {
        self.members.is_empty()
    }

    pub fn contains(&self, id: NodeId) -> bool {
        self.members.contains(&id)
    }
}
