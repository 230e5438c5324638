use std::collections::VecDeque;
use std::fmt;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::audit::{self, Invariant};
use super::{derive_seed, Context, Counters, LocalView, Message, NodeProgram, Outgoing, Port, RunReport};
use crate::graph::{Graph, NodeId};
use crate::params::Knowledge;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum DelayPolicy {
    /// Each message takes a uniform delay in `[1, D]`, FIFO per edge.
    Uniform(u64),
    /// Adversarial: the most recently used edge is served first, FIFO per edge.
    Lifo,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Mode {
    /// Messages sent in round `t` arrive in round `t + 1`; one frame per
    /// directed edge per round.
    Sync,
    Async(DelayPolicy),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct RunConfig {
    pub mode: Mode,
    pub seed: u64,
    pub trace: bool,
    /// Defaults to `10⁴·n`.
    pub round_limit: Option<u64>,
}

impl RunConfig {
    pub fn sync(seed: u64) -> Self {
        Self { mode: Mode::Sync, seed, trace: false, round_limit: None }
    }

    pub fn asynchronous(seed: u64, delay: DelayPolicy) -> Self {
        Self { mode: Mode::Async(delay), seed, trace: false, round_limit: None }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct TraceLine {
    pub round: u64,
    pub src: NodeId,
    pub dst: NodeId,
    pub kind: &'static str,
    pub bits: u32,
}

impl fmt::Display for TraceLine {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} {} {} {} {}", self.round, self.src, self.dst, self.kind, self.bits)
    }
}

#[derive(Clone, Copy, Debug)]
struct Route {
    dst: u32,
    dst_port: u32,
    dir: u32,
    edge: u32,
    side: u8,
}

enum Payload<M> {
    /// A continuation frame of a longer logical message of this kind.
    Frame(&'static str),
    Msg(M),
}

struct Envelope<M> {
    src: u32,
    dst: u32,
    port: u32,
    bits: u32,
    payload: Payload<M>,
}

struct Calendar<M> {
    base: u64,
    slots: VecDeque<Vec<Envelope<M>>>,
    pending: u64,
}

impl<M> Calendar<M> {
    fn schedule(&mut self, at: u64, env: Envelope<M>) {
        let idx = (at - self.base) as usize;
        while self.slots.len() <= idx {
            self.slots.push_back(Vec::new());
        }
        self.slots[idx].push(env);
        self.pending += 1;
    }

    fn next_due(&mut self) -> Option<u64> {
        while let Some(front) = self.slots.front() {
            if front.is_empty() {
                self.slots.pop_front();
                self.base += 1;
            } else {
                return Some(self.base);
            }
        }
        None
    }

    fn pop(&mut self) -> Vec<Envelope<M>> {
        let batch = self.slots.pop_front().unwrap_or_default();
        self.base += 1;
        self.pending -= batch.len() as u64;
        batch
    }
}

struct Lifo<M> {
    stack: Vec<u32>,
    queues: Vec<VecDeque<Envelope<M>>>,
}

pub struct Network<P: NodeProgram> {
    know: Knowledge,
    views: Vec<LocalView>,
    programs: Vec<P>,
    rngs: Vec<ChaCha8Rng>,
    routes: Vec<Vec<Route>>,
    mode: Mode,
    seed: u64,
    delay_rng: ChaCha8Rng,
    calendar: Calendar<P::Msg>,
    lifo: Option<Lifo<P::Msg>>,
    edge_time: Vec<u64>,
    now: u64,
    stats: Counters,
    outputs: Vec<(u64, NodeId, P::Output)>,
    trace: Option<Vec<TraceLine>>,
    round_limit: u64,
    timed_out: bool,
    width_checks: u64,
    width_violations: u64,
    outbox: Vec<Outgoing<P::Msg>>,
    emitted: Vec<P::Output>,
    touched: Vec<u32>,
}

impl<P: NodeProgram> Network<P> {
    pub fn new(g: &Graph, know: Knowledge, cfg: RunConfig, mut factory: impl FnMut(usize, &LocalView) -> P) -> Self {
        let n = g.n();
        let adj = g.adjacency();
        let mut views = Vec::with_capacity(n);
        let mut sorted: Vec<Vec<(usize, usize)>> = Vec::with_capacity(n);
        for (v, list) in adj.into_iter().enumerate() {
            let mut list = list;
            list.sort_by_key(|&(w, _)| g.id(w));
            let me = g.id(v);
            let ports = list
                .iter()
                .map(|&(w, e)| {
                    let edge = g.edge(e);
                    Port {
                        neighbor: g.id(w),
                        weight: edge.weight,
                        en: g.edge_number(e),
                        aug: g.aug(e),
                        marked: edge.marks[edge.side_of(v)],
                        up: me < g.id(w),
                    }
                })
                .collect();
            views.push(LocalView::new(me, ports));
            sorted.push(list);
        }
        let mut offsets = Vec::with_capacity(n + 1);
        let mut total = 0u32;
        for list in &sorted {
            offsets.push(total);
            total += list.len() as u32;
        }
        let routes = (0..n)
            .map(|v| {
                sorted[v]
                    .iter()
                    .enumerate()
                    .map(|(p, &(w, e))| {
                        let twin = sorted[w]
                            .binary_search_by_key(&g.id(v), |&(x, _)| g.id(x))
                            .expect("adjacency is symmetric");
                        Route {
                            dst: w as u32,
                            dst_port: twin as u32,
                            dir: offsets[v] + p as u32,
                            edge: e as u32,
                            side: g.edge(e).side_of(v) as u8,
                        }
                    })
                    .collect()
            })
            .collect();
        let programs = views.iter().enumerate().map(|(i, v)| factory(i, v)).collect();
        let rngs = (0..n)
            .map(|v| ChaCha8Rng::seed_from_u64(derive_seed(cfg.seed, g.id(v).0)))
            .collect();
        let lifo = matches!(cfg.mode, Mode::Async(DelayPolicy::Lifo)).then(|| Lifo {
            stack: Vec::new(),
            queues: (0..total).map(|_| VecDeque::new()).collect(),
        });
        let round_limit = cfg.round_limit.unwrap_or(10_000 * n.max(1) as u64);
        Self {
            know,
            views,
            programs,
            rngs,
            routes,
            mode: cfg.mode,
            seed: cfg.seed,
            delay_rng: ChaCha8Rng::seed_from_u64(derive_seed(cfg.seed, u64::MAX)),
            calendar: Calendar { base: 0, slots: VecDeque::new(), pending: 0 },
            lifo,
            edge_time: vec![0; total as usize],
            now: 0,
            stats: Counters::default(),
            outputs: Vec::new(),
            trace: cfg.trace.then(Vec::new),
            round_limit,
            timed_out: false,
            width_checks: 0,
            width_violations: 0,
            outbox: Vec::new(),
            emitted: Vec::new(),
            touched: Vec::new(),
        }
    }

    pub fn knowledge(&self) -> &Knowledge {
        &self.know
    }

    pub fn n(&self) -> usize {
        self.views.len()
    }

    pub fn now(&self) -> u64 {
        self.now
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn stats(&self) -> Counters {
        self.stats
    }

    pub fn timed_out(&self) -> bool {
        self.timed_out
    }

    pub fn set_round_limit(&mut self, limit: u64) {
        self.round_limit = limit;
    }

    pub fn views(&self) -> &[LocalView] {
        &self.views
    }

    pub fn view(&self, v: usize) -> &LocalView {
        &self.views[v]
    }

    pub fn program(&self, v: usize) -> &P {
        &self.programs[v]
    }

    pub fn programs(&self) -> &[P] {
        &self.programs
    }

    pub fn outputs(&self) -> &[(u64, NodeId, P::Output)] {
        &self.outputs
    }

    pub fn take_outputs(&mut self) -> Vec<(u64, NodeId, P::Output)> {
        std::mem::take(&mut self.outputs)
    }

    pub fn trace(&self) -> Option<&[TraceLine]> {
        self.trace.as_deref()
    }

    pub fn index_of(&self, id: NodeId) -> Option<usize> {
        self.views.iter().position(|v| v.id() == id)
    }

    pub fn pending(&self) -> u64 {
        self.calendar.pending + self.lifo.as_ref().map_or(0, |l| l.stack.len() as u64)
    }

    pub fn is_quiescent(&self) -> bool {
        self.pending() == 0
    }

    pub fn start_all(&mut self) {
        for v in 0..self.n() {
            self.invoke(v, |p, cx| p.on_start(cx));
        }
    }

    pub fn tick(&mut self, v: usize, tag: P::Tick) {
        self.invoke(v, |p, cx| p.on_tick(cx, tag));
    }

    pub fn tick_all(&mut self, tag: P::Tick) {
        for v in 0..self.n() {
            let t = tag.clone();
            self.invoke(v, |p, cx| p.on_tick(cx, t));
        }
    }

    /// Delivers everything due at or before `t`, then advances the clock to `t`.
    pub fn run_until(&mut self, t: u64) {
        while !self.timed_out {
            match self.calendar.next_due() {
                Some(due) if due <= t => self.step_calendar(),
                _ => break,
            }
        }
        if self.lifo.is_none() && t > self.now {
            self.now = t;
            if self.calendar.pending == 0 {
                self.calendar.base = t + 1;
                self.calendar.slots.clear();
            }
        }
    }

    /// Runs until no message is in flight or the round limit is hit.
    pub fn run(&mut self) -> bool {
        loop {
            if self.now > self.round_limit {
                self.timed_out = true;
            }
            if self.timed_out {
                return false;
            }
            if let Some(lifo) = self.lifo.as_mut() {
                let Some(dir) = lifo.stack.pop() else { return true };
                let env = lifo.queues[dir as usize].pop_front().expect("stack entry per message");
                self.now += 1;
                let dst = env.dst as usize;
                if self.deliver(env) {
                    self.invoke(dst, |p, cx| p.on_batch_end(cx));
                }
            } else if self.calendar.next_due().is_some() {
                self.step_calendar();
            } else {
                return true;
            }
        }
    }

    fn step_calendar(&mut self) {
        let due = self.calendar.base;
        if due > self.round_limit {
            self.timed_out = true;
            return;
        }
        self.now = due;
        let mut touched = std::mem::take(&mut self.touched);
        for env in self.calendar.pop() {
            let dst = env.dst;
            if self.deliver(env) {
                touched.push(dst);
            }
        }
        touched.sort_unstable();
        touched.dedup();
        for &v in &touched {
            self.invoke(v as usize, |p, cx| p.on_batch_end(cx));
        }
        touched.clear();
        self.touched = touched;
    }

    /// Returns whether a complete logical message reached the program.
    fn deliver(&mut self, env: Envelope<P::Msg>) -> bool {
        self.stats.deliveries += 1;
        if let Some(trace) = self.trace.as_mut() {
            let kind = match &env.payload {
                Payload::Frame(k) => k,
                Payload::Msg(m) => m.kind(),
            };
            trace.push(TraceLine {
                round: self.now,
                src: self.views[env.src as usize].id(),
                dst: self.views[env.dst as usize].id(),
                kind,
                bits: env.bits,
            });
        }
        if let Payload::Msg(msg) = env.payload {
            let port = env.port as usize;
            self.invoke(env.dst as usize, |p, cx| p.on_message(cx, port, msg));
            true
        } else {
            false
        }
    }

    fn invoke(&mut self, v: usize, f: impl FnOnce(&mut P, &mut Context<'_, P::Msg, P::Output>)) {
        let mut outbox = std::mem::take(&mut self.outbox);
        let mut emitted = std::mem::take(&mut self.emitted);
        {
            let mut cx = Context {
                view: &mut self.views[v],
                rng: &mut self.rngs[v],
                know: &self.know,
                now: self.now,
                outbox: &mut outbox,
                outputs: &mut emitted,
            };
            f(&mut self.programs[v], &mut cx);
        }
        let id = self.views[v].id();
        for out in emitted.drain(..) {
            self.outputs.push((self.now, id, out));
        }
        for out in outbox.drain(..) {
            self.transmit(v, out);
        }
        self.outbox = outbox;
        self.emitted = emitted;
    }

    fn transmit(&mut self, v: usize, out: Outgoing<P::Msg>) {
        let route = self.routes[v][out.port as usize];
        let w_max = self.know.w_max.max(1);
        let frames = out.bits.div_ceil(w_max).max(1);
        let kind = out.msg.kind();
        self.stats.logical += 1;
        let mut msg = Some(out.msg);
        for f in 0..frames {
            let last = f + 1 == frames;
            let bits = if last { out.bits - (frames - 1) * w_max } else { w_max };
            self.width_checks += 1;
            if bits > self.know.w_max {
                self.width_violations += 1;
            }
            self.stats.messages += 1;
            self.stats.bits += bits as u64;
            self.stats.max_message_bits = self.stats.max_message_bits.max(bits);
            let payload = if last { Payload::Msg(msg.take().unwrap()) } else { Payload::Frame(kind) };
            let env = Envelope { src: v as u32, dst: route.dst, port: route.dst_port, bits, payload };
            self.schedule(route.dir as usize, env);
        }
    }

    fn schedule(&mut self, dir: usize, env: Envelope<P::Msg>) {
        match self.mode {
            Mode::Sync => {
                let at = (self.now + 1).max(self.edge_time[dir]);
                self.edge_time[dir] = at + 1;
                self.calendar.schedule(at, env);
            }
            Mode::Async(DelayPolicy::Uniform(d)) => {
                let delay = self.delay_rng.gen_range(1..=d.max(1));
                let at = (self.now + delay).max(self.edge_time[dir]);
                self.edge_time[dir] = at;
                self.calendar.schedule(at, env);
            }
            Mode::Async(DelayPolicy::Lifo) => {
                let lifo = self.lifo.as_mut().expect("lifo queues allocated");
                lifo.queues[dir].push_back(env);
                lifo.stack.push(dir as u32);
            }
        }
    }

    /// Writes every node's mark bits back into `g`, which must be the graph
    /// the network was built from.
    pub fn export_marks(&self, g: &mut Graph) {
        for (v, routes) in self.routes.iter().enumerate() {
            for (p, r) in routes.iter().enumerate() {
                g.set_mark_bit(r.edge as usize, r.side as usize, self.views[v].is_marked(p));
            }
        }
    }

    /// Records whether every node holds the same mark bit as its neighbor for
    /// each shared edge.
    pub fn check_properly_marked(&self) -> bool {
        let ok = self.routes.iter().enumerate().all(|(v, routes)| {
            routes.iter().enumerate().all(|(p, r)| {
                self.views[v].is_marked(p) == self.views[r.dst as usize].is_marked(r.dst_port as usize)
            })
        });
        audit::record(Invariant::ProperlyMarked, ok);
        ok
    }

    /// Records whether every protocol state is empty.
    pub fn check_impromptu(&self) -> bool {
        let ok = self.programs.iter().all(|p| p.state_bits(&self.know) == 0);
        audit::record(Invariant::Impromptu, ok);
        ok
    }

    /// Records whether every sent frame has been delivered.
    pub fn check_exactly_once(&self) -> bool {
        let ok = self.is_quiescent() && self.stats.deliveries == self.stats.messages;
        audit::record(Invariant::ExactlyOnce, ok);
        ok
    }

    pub fn report<O>(&self, outcome: O) -> RunReport<O> {
        let mut rep = RunReport::new(self.stats, self.now, self.seed, !self.timed_out, outcome);
        rep.trace = self.trace.clone().unwrap_or_default();
        rep
    }
}

impl<P: NodeProgram> Drop for Network<P> {
    fn drop(&mut self) {
        audit::record_many(Invariant::MessageWidth, self.width_checks, self.width_violations);
    }
}
