//! Browser bindings: a graph held in memory, built, repaired and traced from
//! JavaScript. Every method returns a JSON string.

use congest_mst::algorithms::{build_mst, build_st, repair, BuildOptions, Forest, PhaseConfig, UpdateEvent};
use congest_mst::experiment::{generate_graph, oracle_match, GraphModel};
use congest_mst::graph::Graph;
use congest_mst::params::{Knowledge, Params};
use congest_mst::protocols::{find_min, SearchMode};
use congest_mst::runtime::{DelayPolicy, RunConfig};
use serde_json::{json, Value};
use wasm_bindgen::prelude::*;

#[wasm_bindgen]
pub struct Demo {
    g: Graph,
    forest: Forest,
    params: Params,
    seed: u64,
}

fn err(e: impl std::fmt::Display) -> JsValue {
    JsValue::from_str(&e.to_string())
}

#[wasm_bindgen]
impl Demo {
    /// Random connected graph with `n` nodes and `m` edges, weights in `[1, 99]`.
    #[wasm_bindgen(constructor)]
    pub fn new(n: usize, m: usize, seed: u64) -> Result<Demo, JsValue> {
        let g = generate_graph(GraphModel::RandomTreePlus, n, m, 99, seed).map_err(err)?;
        Ok(Demo { g, forest: Forest::Mst, params: Params::default(), seed })
    }

    /// Nodes, edges with weights and marks, and whether the marks are correct.
    pub fn graph(&self) -> String {
        let edges: Vec<Value> = self
            .g
            .edges()
            .iter()
            .map(|e| json!({ "a": e.ends[0], "b": e.ends[1], "w": e.weight, "marked": e.is_marked() }))
            .collect();
        let ids: Vec<u64> = self.g.ids().iter().map(|i| i.0).collect();
        json!({ "ids": ids, "edges": edges, "correct": oracle_match(&self.g, self.forest) }).to_string()
    }

    /// Runs Build MST (`"mst"`) or Build ST (`"st"`) from scratch.
    pub fn build(&mut self, kind: &str) -> Result<String, JsValue> {
        let know = Knowledge::for_graph(&self.g, &self.params);
        self.seed += 1;
        let run = RunConfig::sync(self.seed);
        let opts = BuildOptions { record_fragments: true };
        let rep = match kind {
            "mst" => {
                self.forest = Forest::Mst;
                build_mst(&mut self.g, &PhaseConfig::mst(&know), &self.params, run, opts)
            }
            "st" => {
                self.forest = Forest::St;
                build_st(&mut self.g, &PhaseConfig::st(&know), &self.params, run, opts)
            }
            other => return Err(err(format!("unknown build {other:?}"))),
        }
        .map_err(err)?;
        Ok(json!({
            "messages": rep.messages,
            "bits": rep.bits,
            "phases": rep.outcome.phases_run,
            "fragments": rep.outcome.fragments,
            "correct": oracle_match(&self.g, self.forest),
        })
        .to_string())
    }

    /// Deletes edge `e` and repairs the maintained forest asynchronously.
    pub fn delete_edge(&mut self, e: usize) -> Result<String, JsValue> {
        if e >= self.g.m() {
            return Err(err("no such edge"));
        }
        self.g.check_properly_marked().map_err(err)?;
        let r = self.g.edge_ref(e);
        self.seed += 1;
        let run = RunConfig::asynchronous(self.seed, DelayPolicy::Uniform(4));
        let rep = repair(&mut self.g, self.forest, UpdateEvent::Delete(r.a, r.b), &self.params, run).map_err(err)?;
        let added = rep.outcome.added.map(|en| {
            let (a, b) = self.g.layout().endpoints(en);
            json!([a.0, b.0])
        });
        Ok(json!({
            "messages": rep.messages,
            "was_marked": rep.outcome.was_marked,
            "added": added,
            "correct": oracle_match(&self.g, self.forest),
        })
        .to_string())
    }

    /// Traced FindMin from node index `v` over its current tree.
    pub fn trace_find_min(&self, v: usize) -> Result<String, JsValue> {
        if v >= self.g.n() {
            return Err(err("no such node"));
        }
        let run = RunConfig { trace: true, ..RunConfig::sync(self.seed) };
        let rep = find_min(&self.g, self.g.id(v), SearchMode::Standard, &self.params, run).map_err(err)?;
        let frames: Vec<Value> =
            rep.trace.iter().map(|t| json!([t.round, t.src.0, t.dst.0, t.kind, t.bits])).collect();
        let edge = rep.outcome.aug.map(|aw| {
            let (a, b) = self.g.layout().endpoints(self.g.layout().edge_number_of(aw));
            json!([a.0, b.0])
        });
        Ok(json!({
            "edge": edge,
            "iterations": rep.outcome.iterations,
            "messages": rep.messages,
            "frames": frames,
        })
        .to_string())
    }
}
