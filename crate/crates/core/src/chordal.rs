//! Chordality testing by maximum cardinality search and the clique-merge
//! step used to triangulate G_H.

use alloc::collections::VecDeque;
use alloc::vec;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::hypergraph::{clique_extract, BondGraph, CliqueGraph, CliqueId};
use crate::NodeSet;

/// A non-adjacent pair `u < v` whose edge would chord `witness_cycle`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FillPair {
    pub u: usize,
    pub v: usize,
    /// Chordless cycle of length > 3 through `u` and `v`, as a node sequence.
    pub witness_cycle: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Chordality {
    Chordal,
    Fill(FillPair),
}

impl Chordality {
    pub fn is_chordal(&self) -> bool {
        matches!(self, Chordality::Chordal)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ChordalError {
    #[error("no clique pair covers fill pair ({u}, {v})")]
    EmptyCandidates { u: usize, v: usize },
    #[error("unknown clique {0:?}")]
    UnknownClique(CliqueId),
    #[error("cannot merge a clique with itself")]
    SelfMerge,
}

/// Maximum cardinality search visit order; ties go to the smallest node ID.
pub fn mcs_order(g: &BondGraph) -> Vec<usize> {
    let n = g.node_count();
    let mut weight = vec![0usize; n];
    let mut done = vec![false; n];
    let mut order = Vec::with_capacity(n);
    for _ in 0..n {
        let mut best: Option<usize> = None;
        for v in 0..n {
            if !done[v] && best.is_none_or(|b| weight[v] > weight[b]) {
                best = Some(v);
            }
        }
        let v = best.expect("unvisited node remains");
        done[v] = true;
        order.push(v);
        for w in g.neighbors(v).iter() {
            if !done[w] {
                weight[w] += 1;
            }
        }
    }
    order
}

/// Tests chordality by checking that the reversed MCS order is a perfect
/// elimination ordering. On the first violation at node `x` (earlier
/// neighbors `p` and `w` non-adjacent, `p` the latest-visited), returns the
/// pair together with a chordless cycle through `x`, `p` and `w`.
pub fn is_chordal(g: &BondGraph) -> Chordality {
    let order = mcs_order(g);
    let n = g.node_count();
    let mut pos = vec![0usize; n];
    for (i, &v) in order.iter().enumerate() {
        pos[v] = i;
    }
    for (i, &x) in order.iter().enumerate() {
        let earlier: Vec<usize> = g.neighbors(x).iter().filter(|&w| pos[w] < i).collect();
        let Some(&p) = earlier.iter().max_by_key(|&&w| pos[w]) else {
            continue;
        };
        for &w in &earlier {
            if w != p && !g.has_edge(p, w) {
                if let Some(cycle) = chordless_cycle_through(g, x, p, w) {
                    return Chordality::Fill(fill(p, w, cycle));
                }
            }
        }
    }
    // An MCS violation always comes with such a cycle; this scan is a guard.
    for x in 0..n {
        let nbrs: Vec<usize> = g.neighbors(x).iter().collect();
        for (i, &a) in nbrs.iter().enumerate() {
            for &b in &nbrs[i + 1..] {
                if !g.has_edge(a, b) {
                    if let Some(cycle) = chordless_cycle_through(g, x, a, b) {
                        return Chordality::Fill(fill(a, b, cycle));
                    }
                }
            }
        }
    }
    Chordality::Chordal
}

fn fill(a: usize, b: usize, witness_cycle: Vec<usize>) -> FillPair {
    FillPair { u: a.min(b), v: a.max(b), witness_cycle }
}

/// Shortest `p`-`w` path avoiding `x` and its other neighbors, closed through
/// `x`. Shortest paths are induced, so the cycle is chordless.
fn chordless_cycle_through(g: &BondGraph, x: usize, p: usize, w: usize) -> Option<Vec<usize>> {
    let n = g.node_count();
    let mut blocked = g.neighbors(x).clone();
    blocked.insert(x);
    blocked.remove(p);
    blocked.remove(w);
    let mut prev = vec![usize::MAX; n];
    let mut seen = NodeSet::with_capacity(n);
    seen.insert(p);
    let mut q = VecDeque::from([p]);
    while let Some(a) = q.pop_front() {
        if a == w {
            break;
        }
        for b in g.neighbors(a).iter() {
            if blocked.contains(b) || !seen.insert(b) {
                continue;
            }
            prev[b] = a;
            q.push_back(b);
        }
    }
    if !seen.contains(w) {
        return None;
    }
    let mut cycle = vec![x];
    let mut path = vec![w];
    let mut cur = w;
    while cur != p {
        cur = prev[cur];
        path.push(cur);
    }
    path.reverse();
    cycle.extend(path);
    Some(cycle)
}

/// All `(c1, c2)` with `u` in `c1` and `v` in `c2`, ordered by clique index.
pub fn candidate_merge_pairs(fp: &FillPair, gc: &CliqueGraph) -> Result<Vec<(CliqueId, CliqueId)>, ChordalError> {
    let with_u = gc.containing(fp.u);
    let with_v = gc.containing(fp.v);
    let mut out = Vec::new();
    for &i in &with_u {
        for &j in &with_v {
            if i != j {
                out.push((gc.cliques[i].id, gc.cliques[j].id));
            }
        }
    }
    if out.is_empty() {
        return Err(ChordalError::EmptyCandidates { u: fp.u, v: fp.v });
    }
    Ok(out)
}

/// Joins every member of `c1` to every member of `c2` in G_H and re-extracts
/// the clique graph. Returns the updated G_H and G_C with `step + 1`.
pub fn merge_cliques(
    gh: &BondGraph,
    gc: &CliqueGraph,
    c1: CliqueId,
    c2: CliqueId,
) -> Result<(BondGraph, CliqueGraph), ChordalError> {
    if c1 == c2 {
        return Err(ChordalError::SelfMerge);
    }
    let a = gc.get(c1).ok_or(ChordalError::UnknownClique(c1))?;
    let b = gc.get(c2).ok_or(ChordalError::UnknownClique(c2))?;
    let mut next = gh.clone();
    for &x in &a.members {
        for &y in &b.members {
            next.add_edge(x, y);
        }
    }
    let mut ngc = clique_extract(&next);
    ngc.step = gc.step + 1;
    Ok((next, ngc))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cycle(n: usize) -> BondGraph {
        let edges: Vec<_> = (0..n).map(|i| (i, (i + 1) % n)).collect();
        BondGraph::from_edges(n, &edges)
    }

    #[test]
    fn triangle_is_chordal() {
        assert!(is_chordal(&cycle(3)).is_chordal());
    }

    #[test]
    fn square_needs_a_diagonal() {
        let Chordality::Fill(fp) = is_chordal(&cycle(4)) else { panic!("square is not chordal") };
        assert!((fp.u, fp.v) == (0, 2) || (fp.u, fp.v) == (1, 3));
        assert_eq!(fp.witness_cycle.len(), 4);
    }

    #[test]
    fn pentagon_needs_two_fills() {
        let mut g = cycle(5);
        let mut fills = 0;
        while let Chordality::Fill(fp) = is_chordal(&g) {
            g.add_edge(fp.u, fp.v);
            fills += 1;
        }
        assert_eq!(fills, 2);
    }

    #[test]
    fn square_of_cliques_candidates() {
        // cliques {0,1},{1,2},{2,3},{0,3}; fill (0,2)
        let g = cycle(4);
        let gc = clique_extract(&g);
        let fp = FillPair { u: 0, v: 2, witness_cycle: vec![0, 1, 2, 3] };
        let pairs = candidate_merge_pairs(&fp, &gc).unwrap();
        assert_eq!(pairs.len(), 4);
        for (a, b) in pairs {
            assert!(gc.get(a).unwrap().contains(0));
            assert!(gc.get(b).unwrap().contains(2));
        }
    }

    #[test]
    fn merging_path_cliques() {
        let g = BondGraph::from_edges(3, &[(0, 1), (1, 2)]);
        let gc = clique_extract(&g);
        let (g2, gc2) = merge_cliques(&g, &gc, gc.cliques[0].id, gc.cliques[1].id).unwrap();
        assert_eq!(gc2.cliques.len(), 1);
        assert_eq!(gc2.cliques[0].members, vec![0, 1, 2]);
        assert_eq!(gc2.step, 1);
        // re-merging an already complete pair changes nothing
        let tri = clique_extract(&g2);
        assert_eq!(tri.cliques, gc2.cliques);
    }

    #[test]
    fn square_after_one_merge() {
        let g = cycle(4);
        let gc = clique_extract(&g);
        let (g2, gc2) = merge_cliques(&g, &gc, gc.cliques[0].id, gc.cliques[1].id).unwrap();
        assert!(is_chordal(&g2).is_chordal());
        assert_eq!(gc2.cliques.len(), 2);
    }

    #[test]
    fn unknown_clique_is_rejected() {
        let g = cycle(3);
        let gc = clique_extract(&g);
        let bogus = CliqueId(1);
        assert_eq!(merge_cliques(&g, &gc, gc.cliques[0].id, bogus), Err(ChordalError::UnknownClique(bogus)));
    }
}
