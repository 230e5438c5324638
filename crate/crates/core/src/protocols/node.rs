//! The node program shared by every tree protocol and algorithm.

use rand::Rng;

use super::control::{Controller, Outcome, SearchMode, Step};
use super::messages::{Echo, Msg, Notice, Query};
use super::queries::TreeQueries;
use super::wave::{WaveEngine, WaveMsg};
use crate::graph::{EdgeNumber, NodeId};
use crate::params::Knowledge;
use crate::runtime::{Context, NodeProgram};

type Cx<'a> = Context<'a, Msg, Output>;

fn wrap(m: WaveMsg<Query, Echo>) -> Msg {
    match m {
        WaveMsg::Down(q) => Msg::Down(q),
        WaveMsg::Up(e) => Msg::Up(e),
    }
}

/// Which search a leader runs: lightest edge (MST) or any edge (ST).
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Search {
    Min,
    Any,
}

impl Search {
    pub fn controller(self, mode: SearchMode, leader: NodeId) -> Controller {
        match self {
            Search::Min => Controller::find_min(mode, leader),
            Search::Any => Controller::find_any(mode, leader),
        }
    }
}

/// What the session root does with its outcome.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum After {
    /// Emit the outcome and stop.
    Report,
    /// Broadcast the found edge; its endpoint in the tree adds it.
    Announce,
    /// Decide an insertion from a path echo. `port` is the inserted edge.
    Insert { port: u32, weighted: bool },
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Purpose {
    /// The leader runs a capped search.
    Lead(Search),
    /// The leader tells every member its id.
    Announce,
    /// No action; only the saturation pattern matters.
    Detect,
}

#[derive(Clone, Debug)]
pub enum Tick {
    Run { ctl: Controller, then: After },
    Elect(Purpose),
    /// Apply pending marks and elect leaders that search.
    PhaseStart(Search),
    /// Apply pending marks.
    Barrier,
    /// Apply pending marks and start a detection election.
    FindDone,
    /// Cycle nodes pick one cycle edge and send an exclusion over it.
    Detect,
    /// Unmark mutually excluded edges and start a second detection election.
    Excluded,
    /// Remaining cycle nodes unmark both cycle edges.
    Redetect,
    Deleted { neighbor: NodeId, was_marked: bool, search: Search },
    Inserted { neighbor: NodeId, search: Search },
    WeightChanged { neighbor: NodeId, increased: bool, was_marked: bool },
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Output {
    Done(Outcome),
    Leader(NodeId),
    Inserted { found: bool, swapped: Option<EdgeNumber> },
}

#[derive(Clone, Debug)]
struct Election {
    purpose: Purpose,
    heard: Vec<u32>,
    sent: Option<u32>,
    dirty: bool,
}

impl Election {
    /// The first three tree ports not heard from.
    fn unheard(&self, tree: &[u32]) -> [Option<u32>; 3] {
        let mut it = tree.iter().copied().filter(|p| !self.heard.contains(p));
        [it.next(), it.next(), it.next()]
    }
}

#[derive(Clone, Debug, Default)]
pub struct TreeNode {
    wave: WaveEngine<TreeQueries>,
    session: Option<(Controller, After)>,
    election: Option<Election>,
    pending_marks: Vec<u32>,
    /// Ports marked at the last barrier; only these may be unmarked by
    /// cycle breaking.
    fresh: Vec<u32>,
    excl_sent: Option<u32>,
    excl_recv: Vec<u32>,
    deferred: bool,
    done: bool,
}

impl TreeNode {
    /// `deferred` selects phase mode: marks from `AddEdge` wait for the next
    /// barrier tick, and a tree whose search proves it has no outgoing edge
    /// goes to sleep for the remaining phases.
    pub fn new(deferred: bool) -> Self {
        Self { deferred, ..Self::default() }
    }

    /// Whether this node's tree was shown to have no outgoing edge.
    pub fn is_done(&self) -> bool {
        self.done
    }

    fn begin(&mut self, cx: &mut Cx<'_>, ctl: Controller, then: After) {
        assert!(self.session.is_none(), "node {} already runs a session", cx.id());
        self.session = Some((ctl, then));
        self.advance(cx, None);
    }

    fn advance(&mut self, cx: &mut Cx<'_>, mut echo: Option<Echo>) {
        loop {
            let (ctl, _) = self.session.as_mut().expect("active session");
            match ctl.next(cx.know, cx.rng, echo.take()) {
                Step::Wave(q) => match self.wave.start(&TreeQueries, cx, q, wrap) {
                    Some(result) => echo = Some(result),
                    None => return,
                },
                Step::Finish(out) => {
                    let (_, then) = self.session.take().unwrap();
                    self.finish(cx, out, then);
                    return;
                }
            }
        }
    }

    fn finish(&mut self, cx: &mut Cx<'_>, out: Outcome, then: After) {
        match then {
            After::Report => cx.emit(Output::Done(out)),
            After::Announce => {
                let edge = out.edge(&cx.know.layout);
                let settled = out.settled_empty();
                cx.emit(Output::Done(out));
                if let Some(en) = edge {
                    self.notice(cx, None, Notice::Stop { result: Some(en.0) });
                } else if self.deferred && settled {
                    self.notice(cx, None, Notice::Stop { result: None });
                }
            }
            After::Insert { port, weighted } => {
                let port = port as usize;
                let Outcome::Echo(Echo::Path { found, max }) = out else {
                    panic!("insert decision needs a path echo, got {out:?}");
                };
                if !found {
                    cx.view.mark(port);
                    cx.post(port, Msg::AddEdge);
                    cx.emit(Output::Inserted { found, swapped: None });
                } else if weighted && max > cx.view.port(port).aug.0 {
                    let remove = cx.know.layout.edge_number_of(crate::graph::AugmentedWeight(max));
                    let add = cx.view.port(port).en;
                    self.notice(cx, None, Notice::Swap { remove: remove.0, add: add.0 });
                    cx.emit(Output::Inserted { found, swapped: Some(remove) });
                } else {
                    cx.emit(Output::Inserted { found, swapped: None });
                }
            }
        }
    }

    fn add_mark(&mut self, cx: &mut Cx<'_>, port: usize) {
        if self.deferred && !self.done {
            if !self.pending_marks.contains(&(port as u32)) {
                self.pending_marks.push(port as u32);
            }
        } else {
            cx.view.mark(port);
            self.done = false;
        }
    }

    /// Queues marks as if `AddEdge` had arrived over `ports`.
    pub fn stage_marks(&mut self, ports: impl IntoIterator<Item = u32>) {
        self.pending_marks.extend(ports);
    }

    fn apply_pending(&mut self, cx: &mut Cx<'_>) {
        self.fresh.clear();
        for p in self.pending_marks.drain(..) {
            if !cx.view.is_marked(p as usize) {
                cx.view.mark(p as usize);
                self.fresh.push(p);
            }
        }
    }

    fn unmark_fresh(&mut self, cx: &mut Cx<'_>, port: u32) {
        if self.fresh.contains(&port) {
            cx.view.unmark(port as usize);
        }
    }

    /// Forwards a notice over the current tree, then acts on it.
    fn notice(&mut self, cx: &mut Cx<'_>, from: Option<usize>, notice: Notice) {
        for i in 0..cx.view.tree_ports().len() {
            let p = cx.view.tree_ports()[i] as usize;
            if Some(p) != from {
                cx.post(p, Msg::Notice(notice.clone()));
            }
        }
        let layout = cx.know.layout;
        match notice {
            Notice::Stop { result: Some(en) } => {
                if let Some(q) = cx.view.port_of_en(EdgeNumber(en), &layout) {
                    self.add_mark(cx, q);
                    cx.post(q, Msg::AddEdge);
                }
            }
            Notice::Stop { result: None } => self.done = self.deferred,
            Notice::Swap { remove, add } => {
                if let Some(q) = cx.view.port_of_en(EdgeNumber(remove), &layout) {
                    cx.view.unmark(q);
                }
                if let Some(q) = cx.view.port_of_en(EdgeNumber(add), &layout) {
                    cx.view.mark(q);
                }
            }
            Notice::Leader(id) => {
                self.election = None;
                cx.emit(Output::Leader(id));
            }
        }
    }

    fn start_election(&mut self, cx: &mut Cx<'_>, purpose: Purpose) {
        self.election = None;
        match cx.view.tree_ports() {
            [] => self.elected(cx, purpose),
            &[only] => {
                cx.post(only as usize, Msg::Elect);
                self.election = Some(Election { purpose, heard: Vec::new(), sent: Some(only), dirty: false });
            }
            _ => self.election = Some(Election { purpose, heard: Vec::new(), sent: None, dirty: false }),
        }
    }

    fn on_elect(&mut self, port: usize) {
        let el = self.election.as_mut().expect("election message outside an election");
        el.heard.push(port as u32);
        el.dirty = true;
    }

    /// Decides after all election messages of one instant have arrived, so
    /// that simultaneous arrivals at a unique median are seen together.
    fn settle_election(&mut self, cx: &mut Cx<'_>) {
        let Some(el) = self.election.as_mut().filter(|e| e.dirty) else { return };
        el.dirty = false;
        let [first, second, _] = el.unheard(cx.view.tree_ports());
        let purpose = el.purpose;
        match (el.sent, first, second) {
            (None, Some(last), None) => {
                el.sent = Some(last);
                cx.post(last as usize, Msg::Elect);
            }
            (None, None, _) => self.elected(cx, purpose),
            (Some(s), None, _) => {
                if cx.id() > cx.view.port(s as usize).neighbor {
                    self.elected(cx, purpose);
                } else {
                    self.election = None;
                }
            }
            _ => {}
        }
    }

    fn elected(&mut self, cx: &mut Cx<'_>, purpose: Purpose) {
        self.election = None;
        match purpose {
            Purpose::Lead(search) => {
                cx.emit(Output::Leader(cx.id()));
                let ctl = search.controller(SearchMode::Capped, cx.id());
                self.begin(cx, ctl, After::Announce);
            }
            Purpose::Announce => {
                let id = cx.id();
                self.notice(cx, None, Notice::Leader(id));
            }
            Purpose::Detect => {}
        }
    }

    /// Ports of a node that saw exactly two tree neighbours stay silent.
    fn cycle_ports(&self, cx: &Cx<'_>) -> Option<(u32, u32)> {
        let el = self.election.as_ref()?;
        if el.sent.is_some() {
            return None;
        }
        match el.unheard(cx.view.tree_ports()) {
            [Some(a), Some(b), None] => Some((a, b)),
            _ => None,
        }
    }
}

impl NodeProgram for TreeNode {
    type Msg = Msg;
    type Tick = Tick;
    type Output = Output;

    fn on_message(&mut self, cx: &mut Cx<'_>, port: usize, msg: Msg) {
        match msg {
            Msg::Down(q) => self.wave.on_down(&TreeQueries, cx, port, q, wrap),
            Msg::Up(e) => {
                if let Some(result) = self.wave.on_up(&TreeQueries, cx, port, e, wrap) {
                    self.advance(cx, Some(result));
                }
            }
            Msg::Notice(n) => self.notice(cx, Some(port), n),
            Msg::Elect => self.on_elect(port),
            Msg::AddEdge => self.add_mark(cx, port),
            Msg::Exclude => self.excl_recv.push(port as u32),
        }
    }

    fn on_tick(&mut self, cx: &mut Cx<'_>, tag: Tick) {
        match tag {
            Tick::Run { ctl, then } => self.begin(cx, ctl, then),
            Tick::Elect(purpose) => self.start_election(cx, purpose),
            Tick::PhaseStart(search) => {
                self.apply_pending(cx);
                self.fresh.clear();
                self.start_election(cx, Purpose::Lead(search));
            }
            Tick::Barrier => {
                self.apply_pending(cx);
                self.fresh.clear();
                self.election = None;
            }
            Tick::FindDone => {
                self.apply_pending(cx);
                self.start_election(cx, Purpose::Detect);
            }
            Tick::Detect => {
                if let Some((a, b)) = self.cycle_ports(cx) {
                    let pick = if cx.rng.gen::<bool>() { a } else { b };
                    self.excl_sent = Some(pick);
                    cx.post(pick as usize, Msg::Exclude);
                }
                self.election = None;
            }
            Tick::Excluded => {
                if let Some(p) = self.excl_sent.take() {
                    if self.excl_recv.contains(&p) {
                        self.unmark_fresh(cx, p);
                    }
                }
                self.excl_recv.clear();
                self.start_election(cx, Purpose::Detect);
            }
            Tick::Redetect => {
                if let Some((a, b)) = self.cycle_ports(cx) {
                    self.unmark_fresh(cx, a);
                    self.unmark_fresh(cx, b);
                }
                self.fresh.clear();
                self.election = None;
            }
            Tick::Deleted { neighbor, was_marked, search } => {
                if was_marked && cx.id() < neighbor {
                    let ctl = search.controller(SearchMode::Standard, cx.id());
                    self.begin(cx, ctl, After::Announce);
                }
            }
            Tick::Inserted { neighbor, search } => {
                if cx.id() < neighbor {
                    self.path_check(cx, neighbor, search == Search::Min);
                }
            }
            Tick::WeightChanged { neighbor, increased, was_marked } => {
                let port = cx.view.port_of(neighbor).expect("changed edge is incident");
                if was_marked && increased {
                    cx.view.unmark(port);
                    if cx.id() < neighbor {
                        let ctl = Controller::find_min(SearchMode::Standard, cx.id());
                        self.begin(cx, ctl, After::Announce);
                    }
                } else if !was_marked && !increased && cx.id() < neighbor {
                    self.path_check(cx, neighbor, true);
                }
            }
        }
    }

    fn on_batch_end(&mut self, cx: &mut Cx<'_>) {
        self.settle_election(cx);
    }

    fn state_bits(&self, know: &Knowledge) -> u32 {
        let id = know.id_bits();
        self.wave.state_bits(know)
            + self.session.as_ref().map_or(0, |(c, _)| c.state_bits(know))
            + self.election.as_ref().map_or(0, |e| 2 + id * (1 + e.heard.len() as u32))
            + id * (self.pending_marks.len() + self.fresh.len() + self.excl_recv.len() + usize::from(self.excl_sent.is_some()))
                as u32
    }
}

impl TreeNode {
    fn path_check(&mut self, cx: &mut Cx<'_>, neighbor: NodeId, weighted: bool) {
        let port = cx.view.port_of(neighbor).expect("inserted edge is incident") as u32;
        let ctl = Controller::single(Query::PathTo { target: neighbor });
        self.begin(cx, ctl, After::Insert { port, weighted });
    }
}
