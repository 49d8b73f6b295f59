mod common;

use std::collections::BTreeSet;

use common::{random_graph, random_molecule};
use molgrammar_core::chordal::{candidate_merge_pairs, is_chordal, merge_cliques, Chordality};
use molgrammar_core::decompose::check_running_intersection;
use molgrammar_core::hypergraph::{build_base_hypergraph, clique_extract, graph_of, BondGraph, CliqueGraph};
use molgrammar_core::molecule::minimal_rings;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn is_clique(g: &BondGraph, nodes: &[usize]) -> bool {
    nodes.iter().enumerate().all(|(i, &u)| nodes[i + 1..].iter().all(|&v| g.has_edge(u, v)))
}

fn subset(mask: u32, n: usize) -> Vec<usize> {
    (0..n).filter(|&i| mask & (1 << i) != 0).collect()
}

fn brute_maximal_cliques(g: &BondGraph) -> BTreeSet<Vec<usize>> {
    let n = g.node_count();
    let cliques: Vec<u32> = (1u32..1 << n).filter(|&m| is_clique(g, &subset(m, n))).collect();
    cliques
        .iter()
        .filter(|&&m| !cliques.iter().any(|&o| o != m && o & m == m))
        .map(|&m| subset(m, n))
        .collect()
}

/// A graph is chordal iff no node subset of size ≥ 4 induces a cycle.
fn brute_chordal(g: &BondGraph) -> bool {
    let n = g.node_count();
    (1u32..1 << n).filter(|m| m.count_ones() >= 4).all(|m| {
        let nodes = subset(m, n);
        let deg = |u: usize| nodes.iter().filter(|&&v| g.has_edge(u, v)).count();
        if !nodes.iter().all(|&u| deg(u) == 2) {
            return true;
        }
        // all degrees 2: induced cycle iff connected
        let mut seen = vec![nodes[0]];
        let mut stack = vec![nodes[0]];
        while let Some(u) = stack.pop() {
            for &v in &nodes {
                if g.has_edge(u, v) && !seen.contains(&v) {
                    seen.push(v);
                    stack.push(v);
                }
            }
        }
        seen.len() != nodes.len()
    })
}

/// Repeats fill-pair merges until chordal; checks each intermediate clique
/// graph and the iteration bound.
fn triangulate(mut gh: BondGraph) -> (BondGraph, CliqueGraph) {
    let n = gh.node_count();
    let mut gc = clique_extract(&gh);
    let mut rounds = 0;
    while let Chordality::Fill(fp) = is_chordal(&gh) {
        assert!(!gh.has_edge(fp.u, fp.v));
        let pairs = candidate_merge_pairs(&fp, &gc).unwrap();
        let before = gh.edge_count();
        let (nh, nc) = merge_cliques(&gh, &gc, pairs[0].0, pairs[0].1).unwrap();
        assert!(nh.edge_count() > before);
        assert_eq!(nc.cliques, clique_extract(&nh).cliques);
        assert_eq!(nc.step, gc.step + 1);
        gh = nh;
        gc = nc;
        rounds += 1;
        assert!(rounds <= n * n);
    }
    (gh, gc)
}

#[test]
fn chordality_agrees_with_induced_cycle_search() {
    let mut chordal = 0;
    for seed in 0..500u64 {
        let n = 1 + (seed as usize % 12);
        let p = [0.2, 0.35, 0.5, 0.7][(seed / 12 % 4) as usize];
        let g = random_graph(seed, n, p);
        let fast = is_chordal(&g);
        assert_eq!(fast.is_chordal(), brute_chordal(&g), "seed {seed}");
        if let Chordality::Fill(fp) = &fast {
            // the witness is a real chordless cycle through the missing edge
            let c = &fp.witness_cycle;
            assert!(c.len() >= 4);
            for i in 0..c.len() {
                assert!(g.has_edge(c[i], c[(i + 1) % c.len()]));
            }
        } else {
            chordal += 1;
        }
        let (t, _) = triangulate(g);
        assert!(is_chordal(&t).is_chordal());
    }
    assert!(chordal > 50 && chordal < 450, "{chordal}");
}

#[test]
fn molecular_bond_graphs_triangulate() {
    for seed in 0..200 {
        let m = random_molecule(seed, 14, 4);
        let h = build_base_hypergraph(&m, &minimal_rings(&m)).unwrap();
        let (t, _) = triangulate(graph_of(&h));
        assert!(brute_chordal(&t) || t.node_count() > 20);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(300))]

    #[test]
    fn cliques_match_brute_force(seed in any::<u64>(), n in 0usize..=12, p in 0.1f64..0.9) {
        let g = random_graph(seed, n, p);
        let gc = clique_extract(&g);
        let fast: BTreeSet<Vec<usize>> = gc.cliques.iter().map(|c| c.members.clone()).collect();
        prop_assert_eq!(fast.len(), gc.cliques.len());
        prop_assert_eq!(fast, brute_maximal_cliques(&g));
        for &(i, j) in &gc.edges {
            prop_assert!(i < j);
            prop_assert!(!gc.cliques[i].shared(&gc.cliques[j]).is_empty());
        }
        for i in 0..gc.cliques.len() {
            prop_assert!(!gc.has_edge(i, i));
            for j in 0..gc.cliques.len() {
                prop_assert_eq!(gc.has_edge(i, j), gc.has_edge(j, i));
                if i != j && !gc.cliques[i].shared(&gc.cliques[j]).is_empty() {
                    prop_assert!(gc.has_edge(i, j));
                }
            }
        }
    }

    #[test]
    fn every_bond_is_covered(seed in any::<u64>()) {
        let m = random_molecule(seed, 14, 4);
        let h = build_base_hypergraph(&m, &minimal_rings(&m)).unwrap();
        let gc = clique_extract(&graph_of(&h));
        for b in 0..m.bond_count() {
            prop_assert!(!gc.containing(b).is_empty());
        }
    }

    #[test]
    fn running_intersection_matches_bfs(seed in any::<u64>()) {
        let m = random_molecule(seed, 14, 4);
        let h = build_base_hypergraph(&m, &minimal_rings(&m)).unwrap();
        let (_, gc) = triangulate(graph_of(&h));
        let mut edges: BTreeSet<(usize, usize)> = gc.edges.iter().copied().collect();
        let bonds = m.bond_count();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        // removal order is random; only RI-preserving removals are applied
        for _ in 0..gc.edges.len() {
            let list: Vec<_> = edges.iter().copied().collect();
            if list.is_empty() {
                break;
            }
            let e = list[rng.random_range(0..list.len())];
            let mut rest = edges.clone();
            rest.remove(&e);
            let bfs = (0..bonds).all(|b| holders_connected(&gc, &rest, b));
            prop_assert_eq!(check_running_intersection(&gc.cliques, &edges, e), bfs);
            if bfs {
                edges = rest;
            }
        }
    }
}

fn holders_connected(gc: &CliqueGraph, edges: &BTreeSet<(usize, usize)>, bond: usize) -> bool {
    let holders = gc.containing(bond);
    let Some(&start) = holders.first() else { return true };
    let mut seen = vec![start];
    let mut stack = vec![start];
    while let Some(x) = stack.pop() {
        for &y in &holders {
            if !seen.contains(&y) && edges.contains(&(x.min(y), x.max(y))) {
                seen.push(y);
                stack.push(y);
            }
        }
    }
    seen.len() == holders.len()
}
