//! Broadcast-and-echo over the marked tree.

use std::fmt;

use crate::params::Knowledge;
use crate::runtime::{Context, LocalView, Message};

/// A wave payload with an encoded size.
pub trait Payload: Clone + fmt::Debug {
    fn bits(&self, know: &Knowledge) -> u32;

    fn kind(&self) -> &'static str;
}

/// A broadcast payload, a per-node contribution and a merge of child echoes.
/// `combine` must be associative and commutative over children.
pub trait Aggregation {
    type Down: Payload;
    type Up: Payload;

    fn local(&self, know: &Knowledge, view: &LocalView, down: &Self::Down) -> Self::Up;

    /// Folds the echo received on `port` into `acc`.
    fn combine(&self, know: &Knowledge, view: &LocalView, acc: &mut Self::Up, port: usize, child: Self::Up);
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum WaveMsg<D, U> {
    Down(D),
    Up(U),
}

impl<D: Payload, U: Payload> Message for WaveMsg<D, U> {
    fn kind(&self) -> &'static str {
        match self {
            WaveMsg::Down(d) => d.kind(),
            WaveMsg::Up(u) => u.kind(),
        }
    }

    fn bits(&self, know: &Knowledge) -> u32 {
        match self {
            WaveMsg::Down(d) => d.bits(know),
            WaveMsg::Up(u) => u.bits(know),
        }
    }
}

#[derive(Clone, Debug)]
struct Slot<U> {
    parent: Option<u32>,
    pending: u32,
    acc: U,
}

/// Participant state of one broadcast-and-echo wave, at root or member.
#[derive(Clone, Debug)]
pub struct WaveEngine<A: Aggregation> {
    slot: Option<Slot<A::Up>>,
}

impl<A: Aggregation> Default for WaveEngine<A> {
    fn default() -> Self {
        Self { slot: None }
    }
}

impl<A: Aggregation> WaveEngine<A> {
    pub fn is_active(&self) -> bool {
        self.slot.is_some()
    }

    pub fn state_bits(&self, know: &Knowledge) -> u32 {
        self.slot.as_ref().map_or(0, |s| 2 * know.id_bits() + 1 + s.acc.bits(know))
    }

    /// Starts a wave at the root. Returns the aggregate at once if the tree is
    /// a single node.
    pub fn start<M: Message, O>(
        &mut self,
        spec: &A,
        cx: &mut Context<'_, M, O>,
        down: A::Down,
        wrap: impl Fn(WaveMsg<A::Down, A::Up>) -> M,
    ) -> Option<A::Up> {
        assert!(self.slot.is_none(), "wave already in progress");
        let acc = spec.local(cx.know, cx.view, &down);
        let children = cx.view.tree_ports().len() as u32;
        if children == 0 {
            return Some(acc);
        }
        for i in 0..children as usize {
            let p = cx.view.tree_ports()[i] as usize;
            cx.post(p, wrap(WaveMsg::Down(down.clone())));
        }
        self.slot = Some(Slot { parent: None, pending: children, acc });
        None
    }

    pub fn on_down<M: Message, O>(
        &mut self,
        spec: &A,
        cx: &mut Context<'_, M, O>,
        port: usize,
        down: A::Down,
        wrap: impl Fn(WaveMsg<A::Down, A::Up>) -> M,
    ) {
        assert!(self.slot.is_none(), "node {} joined two waves", cx.id());
        let acc = spec.local(cx.know, cx.view, &down);
        let mut pending = 0;
        for i in 0..cx.view.tree_ports().len() {
            let p = cx.view.tree_ports()[i] as usize;
            if p != port {
                cx.post(p, wrap(WaveMsg::Down(down.clone())));
                pending += 1;
            }
        }
        if pending == 0 {
            cx.post(port, wrap(WaveMsg::Up(acc)));
        } else {
            self.slot = Some(Slot { parent: Some(port as u32), pending, acc });
        }
    }

    /// Folds a child echo. Returns the aggregate when the root completes.
    pub fn on_up<M: Message, O>(
        &mut self,
        spec: &A,
        cx: &mut Context<'_, M, O>,
        port: usize,
        up: A::Up,
        wrap: impl Fn(WaveMsg<A::Down, A::Up>) -> M,
    ) -> Option<A::Up> {
        let slot = self.slot.as_mut().expect("echo without a wave");
        spec.combine(cx.know, cx.view, &mut slot.acc, port, up);
        slot.pending -= 1;
        if slot.pending > 0 {
            return None;
        }
        let slot = self.slot.take().unwrap();
        match slot.parent {
            Some(parent) => {
                cx.post(parent as usize, wrap(WaveMsg::Up(slot.acc)));
                None
            }
            None => Some(slot.acc),
        }
    }
}
