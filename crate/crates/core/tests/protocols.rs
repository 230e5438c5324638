use std::collections::BTreeSet;

use congest_mst::graph::{Graph, NodeId};
use congest_mst::params::{Knowledge, Params};
use congest_mst::protocols::{
    broadcast_and_echo, elect_leader, find_any, find_min, hp_test_out, test_out, test_out_parallel, Aggregation,
    Payload, SearchMode,
};
use congest_mst::runtime::{DelayPolicy, LocalView, RunConfig};
use congest_mst::sketch::{OddHash, PrimeMode, MERSENNE_61};
use proptest::prelude::*;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn id(x: u64) -> NodeId {
    NodeId(x)
}

/// Graph on ids `1..=n` with the listed weighted edges; `marked` edges are
/// marked at both ends.
fn fixture(n: usize, u: u64, edges: &[(u64, u64, u64)], marked: &[(u64, u64)]) -> Graph {
    let mut g = Graph::with_nodes(n, u).unwrap();
    for &(a, b, w) in edges {
        g.add_edge(id(a), id(b), w).unwrap();
    }
    for &(a, b) in marked {
        let e = g.find_edge(id(a), id(b)).unwrap();
        g.set_marked(e, true);
    }
    g
}

fn path(n: u64) -> Graph {
    let edges: Vec<_> = (1..n).map(|i| (i, i + 1, i)).collect();
    let marks: Vec<_> = (1..n).map(|i| (i, i + 1)).collect();
    fixture(n as usize, 1000, &edges, &marks)
}

#[derive(Clone, Copy, Debug)]
struct DegreeSum;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
struct Count(u64);

impl Payload for Count {
    fn bits(&self, know: &Knowledge) -> u32 {
        2 * know.id_bits()
    }

    fn kind(&self) -> &'static str {
        "COUNT"
    }
}

impl Aggregation for DegreeSum {
    type Down = Count;
    type Up = Count;

    fn local(&self, _: &Knowledge, view: &LocalView, _: &Count) -> Count {
        Count(view.degree() as u64)
    }

    fn combine(&self, _: &Knowledge, _: &LocalView, acc: &mut Count, _: usize, child: Count) {
        acc.0 += child.0;
    }
}

#[test]
fn singleton_wave_is_free() {
    let g = fixture(2, 100, &[(1, 2, 5)], &[]);
    let rep = broadcast_and_echo(&g, id(1), DegreeSum, Count(0), &Params::default(), RunConfig::sync(1)).unwrap();
    assert_eq!(rep.outcome, Count(1));
    assert_eq!(rep.messages, 0);
}

#[test]
fn path_wave_costs_two_per_tree_edge() {
    let g = path(5);
    for root in 1..=5 {
        let rep = broadcast_and_echo(&g, id(root), DegreeSum, Count(0), &Params::default(), RunConfig::sync(3)).unwrap();
        assert_eq!(rep.messages, 8);
        assert_eq!(rep.outcome, Count(8));
    }
}

#[test]
fn triangle_degree_sum() {
    let g = fixture(3, 100, &[(1, 2, 1), (2, 3, 2), (1, 3, 3)], &[(1, 2), (2, 3)]);
    let rep = broadcast_and_echo(&g, id(1), DegreeSum, Count(0), &Params::default(), RunConfig::sync(3)).unwrap();
    assert_eq!(rep.messages, 4);
    assert_eq!(rep.outcome, Count(6));
}

#[test]
fn wave_rejects_unknown_root() {
    let g = path(3);
    assert!(broadcast_and_echo(&g, id(9), DegreeSum, Count(0), &Params::default(), RunConfig::sync(0)).is_err());
}

#[test]
fn leader_is_median() {
    let p = Params::default();
    assert_eq!(elect_leader(&path(3), id(1), &p, RunConfig::sync(0)).unwrap().outcome, id(2));
    assert_eq!(elect_leader(&path(4), id(1), &p, RunConfig::sync(0)).unwrap().outcome, id(3));
    let single = fixture(1, 10, &[], &[]);
    assert_eq!(elect_leader(&single, id(1), &p, RunConfig::sync(0)).unwrap().outcome, id(1));
}

#[test]
fn leader_of_longer_paths_is_the_centre() {
    let p = Params::default();
    for n in 1..12 {
        let rep = elect_leader(&path(n), id(1), &p, RunConfig::sync(0)).unwrap();
        assert_eq!(rep.outcome, id(n / 2 + 1), "n = {n}");
    }
}

#[test]
fn leader_of_star_and_async_paths() {
    let p = Params::default();
    let star = fixture(5, 100, &[(1, 2, 1), (1, 3, 1), (1, 4, 1), (1, 5, 1)], &[(1, 2), (1, 3), (1, 4), (1, 5)]);
    assert_eq!(elect_leader(&star, id(4), &p, RunConfig::sync(0)).unwrap().outcome, id(1));
    for seed in 0..20 {
        // without a common start the echoes still meet at one node or one edge,
        // and every member agrees on the result
        for delay in [DelayPolicy::Uniform(7), DelayPolicy::Lifo] {
            let rep = elect_leader(&path(7), id(2), &p, RunConfig::asynchronous(seed, delay)).unwrap();
            assert!((1..=7).contains(&rep.outcome.0));
        }
    }
}

/// Direct parity of `h` over the cut of `tree` within `[j, k]`.
fn cut_parity(g: &Graph, root: NodeId, j: u128, k: u128, h: &OddHash) -> bool {
    let t = g.tree_of(root).unwrap();
    g.cut_edges(&t, j, k).iter().fold(false, |acc, e| acc ^ h.bit(e.number.0))
}

#[test]
fn test_out_empty_cut_is_zero() {
    let g = path(4);
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for _ in 0..200 {
        let h = OddHash::new(&mut rng, 8).unwrap();
        assert!(!test_out(&g, id(2), 1, u128::MAX >> 8, h, &Params::default(), RunConfig::sync(0)).unwrap().outcome);
    }
}

#[test]
fn test_out_triangle_matches_two_edge_cut_for_every_hash() {
    let g = fixture(3, 100, &[(1, 2, 1), (2, 3, 2), (1, 3, 3)], &[(1, 2)]);
    let hi = (1u128 << g.layout().aw_bits()) - 1;
    let p = Params::default();
    let e13 = g.layout().edge_number(id(1), id(3)).unwrap().0;
    let e23 = g.layout().edge_number(id(2), id(3)).unwrap().0;
    for a in (1..=256u64).step_by(2) {
        for t in (1..=256u64).step_by(3) {
            let h = OddHash { a, t, w: 8 };
            let out = test_out(&g, id(1), 1, hi, h, &p, RunConfig::sync(0)).unwrap().outcome;
            assert_eq!(out, h.bit(e13) ^ h.bit(e23), "a={a} t={t}");
        }
    }
}

#[test]
fn test_out_parallel_localizes_the_cut_edge() {
    // tree {1,2}; the single cut edge 2-3 has weight 40; other weights put
    // nothing else in the cut.
    let g = fixture(3, 100, &[(1, 2, 1), (2, 3, 40)], &[(1, 2)]);
    let e = g.find_edge(id(2), id(3)).unwrap();
    let aug = g.aug(e).0;
    let p = Params::default();
    let ways = 8;
    // choose [j,k] so that aug falls in subrange 3
    let s = 1000u128;
    let j = aug - 3 * s - 10;
    let k = j + ways as u128 * s - 1;
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let mut ones = 0;
    let trials = 2000;
    for _ in 0..trials {
        let h = OddHash::new(&mut rng, 16).unwrap();
        let bits = test_out_parallel(&g, id(1), j, k, h, ways, &p, RunConfig::sync(0)).unwrap().outcome;
        for (i, &b) in bits.iter().enumerate() {
            if i != 3 {
                assert!(!b);
            }
        }
        assert_eq!(bits[3], h.bit(g.edge_number(e).0));
        ones += bits[3] as u32;
    }
    assert!(ones as f64 / trials as f64 >= 0.125);
}

#[test]
fn test_out_parallel_short_interval_has_empty_tail() {
    let g = fixture(3, 100, &[(1, 2, 1), (2, 3, 40)], &[(1, 2)]);
    let h = OddHash { a: 1, t: 256, w: 8 };
    let aug = g.aug(g.find_edge(id(2), id(3)).unwrap()).0;
    let bits = test_out_parallel(&g, id(1), aug - 2, aug + 2, h, 16, &Params::default(), RunConfig::sync(0))
        .unwrap()
        .outcome;
    assert!(bits[5..].iter().all(|b| !b));
}

#[test]
fn hp_test_out_exhaustive_small_prime() {
    let p = Params { prime: PrimeMode::Fixed(101), ..Params::default() };
    let g = fixture(4, 10, &[(1, 2, 1), (2, 3, 2), (3, 4, 3), (1, 4, 4)], &[(1, 2), (2, 3), (3, 4)]);
    let hi = (1u128 << g.layout().aw_bits()) - 1;
    for alpha in 0..101 {
        assert!(!hp_test_out(&g, id(1), 1, hi, Some(alpha), &p, RunConfig::sync(0)).unwrap().outcome);
    }
    let g = fixture(4, 10, &[(1, 2, 1), (2, 3, 2), (3, 4, 3), (1, 4, 4)], &[(1, 2), (2, 3)]);
    let misses = (0..101)
        .filter(|&alpha| !hp_test_out(&g, id(1), 1, hi, Some(alpha), &p, RunConfig::sync(0)).unwrap().outcome)
        .count();
    let b: usize = (1..=3).map(|v| g.adjacency()[v - 1].len()).sum();
    assert!(misses <= b, "{misses} misses");
}

#[test]
fn hp_test_out_interval_excluding_the_cut() {
    let p = Params::default();
    let g = fixture(3, 100, &[(1, 2, 1), (2, 3, 50)], &[(1, 2)]);
    let aug = g.aug(g.find_edge(id(2), id(3)).unwrap()).0;
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    for _ in 0..100 {
        let a = Some(rng.gen::<u64>());
        assert!(!hp_test_out(&g, id(1), 1, aug - 1, a, &p, RunConfig::sync(0)).unwrap().outcome);
        // a single-edge fingerprint α − e only collides with the empty product at α = e + 1
        let en = g.edge_number(g.find_edge(id(2), id(3)).unwrap()).0;
        let hit = hp_test_out(&g, id(1), aug, aug, a, &p, RunConfig::sync(0)).unwrap().outcome;
        assert!(hit || a.unwrap() % MERSENNE_61 == en + 1);
    }
}

#[test]
fn hp_test_out_dynamic_prime() {
    let p = Params { prime: PrimeMode::Dynamic, ..Params::default() };
    let g = fixture(3, 100, &[(1, 2, 1), (2, 3, 50)], &[(1, 2)]);
    let rep = hp_test_out(&g, id(2), 1, u128::MAX >> 8, None, &p, RunConfig::sync(4)).unwrap();
    assert!(rep.outcome);
}

fn k4() -> Graph {
    fixture(4, 100, &[(1, 2, 7), (1, 3, 3), (1, 4, 9), (2, 3, 4), (2, 4, 1), (3, 4, 8)], &[])
}

#[test]
fn find_min_spanning_tree_is_empty() {
    let g = fixture(3, 100, &[(1, 2, 1), (2, 3, 2), (1, 3, 3)], &[(1, 2), (2, 3)]);
    for mode in [SearchMode::Standard, SearchMode::Capped] {
        let rep = find_min(&g, id(3), mode, &Params::default(), RunConfig::sync(5)).unwrap();
        assert_eq!(rep.outcome.aug, None);
    }
}

#[test]
fn find_min_singleton_in_k4() {
    let g = k4();
    let t = g.tree_of(id(1)).unwrap();
    let oracle = g.cut_edges(&t, 0, u128::MAX).iter().map(|e| e.aug).min();
    for seed in 0..50 {
        let rep = find_min(&g, id(1), SearchMode::Standard, &Params::default(), RunConfig::sync(seed)).unwrap();
        assert_eq!(rep.outcome.aug, oracle);
    }
}

fn random_fragment(rng: &mut ChaCha8Rng, n: usize) -> (Graph, NodeId) {
    let mut g = Graph::with_nodes(n, (n as u64).pow(3)).unwrap();
    let u = g.u();
    let mut order: Vec<u64> = (1..=n as u64).collect();
    order.shuffle(rng);
    let size = rng.gen_range(1..n);
    for i in 1..n {
        let parent = order[rng.gen_range(0..i)];
        let e = g.add_edge(id(order[i]), id(parent), rng.gen_range(1..=u)).unwrap();
        if i < size {
            // only the first `size` nodes form the fragment
            let inside = order[..size].contains(&parent);
            g.set_marked(e, inside);
        }
    }
    for _ in 0..3 * n {
        let a = rng.gen_range(1..=n as u64);
        let b = rng.gen_range(1..=n as u64);
        if a != b && g.find_edge(id(a), id(b)).is_err() {
            g.add_edge(id(a), id(b), rng.gen_range(1..=u)).unwrap();
        }
    }
    (g, id(order[0]))
}

#[test]
fn find_min_matches_cut_oracle_on_random_fragments() {
    let mut rng = ChaCha8Rng::seed_from_u64(99);
    let p = Params::default();
    for seed in 0..60 {
        let (g, root) = random_fragment(&mut rng, 64);
        let t = g.tree_of(root).unwrap();
        let oracle = g.cut_edges(&t, 0, u128::MAX).first().map(|e| e.aug);
        let rep = find_min(&g, root, SearchMode::Standard, &p, RunConfig::sync(seed)).unwrap();
        assert_eq!(rep.outcome.aug, oracle, "seed {seed}");
        let capped = find_min(&g, root, SearchMode::Capped, &p, RunConfig::sync(seed)).unwrap();
        assert!(capped.outcome.aug.is_none() || capped.outcome.aug == oracle);
    }
}

#[test]
fn find_min_async_agrees() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let (g, root) = random_fragment(&mut rng, 32);
    let t = g.tree_of(root).unwrap();
    let oracle = g.cut_edges(&t, 0, u128::MAX).first().map(|e| e.aug);
    for seed in 0..10 {
        for delay in [DelayPolicy::Uniform(5), DelayPolicy::Lifo] {
            let rep = find_min(&g, root, SearchMode::Standard, &Params::default(), RunConfig::asynchronous(seed, delay))
                .unwrap();
            assert_eq!(rep.outcome.aug, oracle);
        }
    }
}

#[test]
fn find_any_without_cut_is_empty() {
    let g = path(6);
    for mode in [SearchMode::Standard, SearchMode::Capped] {
        let rep = find_any(&g, id(3), mode, &Params::default(), RunConfig::sync(2)).unwrap();
        assert_eq!(rep.outcome.en, None);
    }
}

#[test]
fn find_any_single_cut_edge() {
    let g = fixture(4, 100, &[(1, 2, 1), (2, 3, 1), (3, 4, 1)], &[(1, 2), (2, 3)]);
    let en = g.edge_number(g.find_edge(id(3), id(4)).unwrap());
    for seed in 0..100 {
        let rep = find_any(&g, id(1), SearchMode::Capped, &Params::default(), RunConfig::sync(seed)).unwrap();
        assert!(rep.outcome.en.is_none() || rep.outcome.en == Some(en));
        let rep = find_any(&g, id(1), SearchMode::Standard, &Params::default(), RunConfig::sync(seed)).unwrap();
        assert_eq!(rep.outcome.en, Some(en));
    }
}

#[test]
fn find_any_returns_cut_edges() {
    let mut rng = ChaCha8Rng::seed_from_u64(17);
    let p = Params::default();
    let mut attempts = 0;
    let runs = 60;
    for seed in 0..runs {
        let (g, root) = random_fragment(&mut rng, 48);
        let t = g.tree_of(root).unwrap();
        let cut: BTreeSet<u64> = g.cut_edges(&t, 0, u128::MAX).iter().map(|e| e.number.0).collect();
        let rep = find_any(&g, root, SearchMode::Standard, &p, RunConfig::sync(seed)).unwrap();
        let en = rep.outcome.en.expect("random fragments have a cut");
        assert!(cut.contains(&en.0));
        attempts += rep.outcome.attempts;
    }
    assert!((attempts as f64 / runs as f64) <= 16.0);
}

#[derive(Clone, Debug)]
struct Xor;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
struct Word(u64);

impl Payload for Word {
    fn bits(&self, _: &Knowledge) -> u32 {
        1
    }

    fn kind(&self) -> &'static str {
        "WORD"
    }
}

impl Aggregation for Xor {
    type Down = Word;
    type Up = Word;

    fn local(&self, _: &Knowledge, view: &LocalView, _: &Word) -> Word {
        Word(view.id().0 * 0x9E37_79B9)
    }

    fn combine(&self, _: &Knowledge, _: &LocalView, acc: &mut Word, _: usize, child: Word) {
        acc.0 ^= child.0;
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn wave_result_independent_of_schedule(n in 2u64..24, seed in any::<u64>(), root in 1u64..24) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut g = Graph::with_nodes(n as usize, 1000).unwrap();
        for v in 2..=n {
            let e = g.add_edge(id(v), id(rng.gen_range(1..v)), 1).unwrap();
            g.set_marked(e, true);
        }
        let root = id(1 + root % n);
        let expect = (1..=n).fold(0, |acc, v| acc ^ v * 0x9E37_79B9);
        for cfg in [
            RunConfig::sync(seed),
            RunConfig::asynchronous(seed, DelayPolicy::Uniform(9)),
            RunConfig::asynchronous(seed, DelayPolicy::Lifo),
        ] {
            let rep = broadcast_and_echo(&g, root, Xor, Word(0), &Params::default(), cfg).unwrap();
            prop_assert_eq!(rep.outcome, Word(expect));
            prop_assert_eq!(rep.messages, 2 * (n - 1));
        }
    }

    #[test]
    fn test_out_is_cut_parity(seed in any::<u64>(), w in prop::sample::select(vec![8u32, 16, 32, 61])) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let (g, root) = random_fragment(&mut rng, 16);
        let h = OddHash::new(&mut rng, w).unwrap();
        let j = rng.gen_range(0..1u128 << 20);
        let k = j + rng.gen_range(0..1u128 << 22);
        let out = test_out(&g, root, j, k, h, &Params::default(), RunConfig::sync(seed)).unwrap().outcome;
        prop_assert_eq!(out, cut_parity(&g, root, j, k, &h));
    }

    #[test]
    fn hp_test_out_has_no_false_positives(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let (g, root) = random_fragment(&mut rng, 16);
        let j = rng.gen_range(0..1u128 << 20);
        let k = j + rng.gen_range(0..1u128 << 22);
        let t = g.tree_of(root).unwrap();
        let out = hp_test_out(&g, root, j, k, None, &Params::default(), RunConfig::sync(seed)).unwrap().outcome;
        if g.cut_edges(&t, j, k).is_empty() {
            prop_assert!(!out);
        }
    }

    #[test]
    fn find_min_capped_is_safe(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let (g, root) = random_fragment(&mut rng, 20);
        let t = g.tree_of(root).unwrap();
        let oracle = g.cut_edges(&t, 0, u128::MAX).first().map(|e| e.aug);
        let rep = find_min(&g, root, SearchMode::Capped, &Params::default(), RunConfig::sync(seed)).unwrap();
        prop_assert!(rep.outcome.aug.is_none() || rep.outcome.aug == oracle);
    }
}
