use congest_mst_demo::Demo;
use serde_json::Value;

fn parse(s: &str) -> Value {
    serde_json::from_str(s).unwrap()
}

#[test]
fn build_then_repair() {
    let mut d = Demo::new(20, 40, 3).unwrap();
    assert_eq!(parse(&d.build("mst").unwrap())["correct"], true);
    let g = parse(&d.graph());
    let e = g["edges"].as_array().unwrap().iter().position(|e| e["marked"] == true).unwrap();
    let out = parse(&d.delete_edge(e).unwrap());
    assert_eq!(out["was_marked"], true);
    assert_eq!(out["correct"], true);
    assert_eq!(parse(&d.build("st").unwrap())["correct"], true);
}

#[test]
fn trace_lists_frames() {
    let mut d = Demo::new(12, 20, 1).unwrap();
    d.build("st").unwrap();
    let t = parse(&d.trace_find_min(0).unwrap());
    assert_eq!(t["frames"].as_array().unwrap().len() as u64, t["messages"].as_u64().unwrap());
    assert!(t["edge"].is_null());
}

#[test]
fn graph_lists_every_edge() {
    let d = Demo::new(10, 15, 2).unwrap();
    let g = parse(&d.graph());
    assert_eq!(g["ids"].as_array().unwrap().len(), 10);
    assert_eq!(g["edges"].as_array().unwrap().len(), 15);
}
