//! The bond-level hypergraph of a molecule, its graph, and the clique graph
//! obtained from maximal cliques.

use alloc::vec;
use alloc::vec::Vec;
use core::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::molecule::{MolecularGraph, RingSet};
use crate::seed::fnv1a_words;
use crate::NodeSet;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum HyperedgeKind {
    /// Two bonds meeting at an atom.
    Pair { atom: usize },
    /// The bonds of one minimal ring.
    Ring,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Hyperedge {
    /// Sorted bond IDs.
    pub bonds: Vec<usize>,
    pub kind: HyperedgeKind,
}

/// Nodes are the bond IDs `0..node_count`; hyperedges join bonds sharing an
/// atom plus one hyperedge per minimal ring.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Hypergraph {
    pub node_count: usize,
    pub hyperedges: Vec<Hyperedge>,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum HypergraphError {
    #[error("molecule has no bonds")]
    EmptyMolecule,
}

pub fn build_base_hypergraph(g: &MolecularGraph, rings: &RingSet) -> Result<Hypergraph, HypergraphError> {
    if g.bond_count() == 0 {
        return Err(HypergraphError::EmptyMolecule);
    }
    let mut pairs = Vec::new();
    for atom in 0..g.atom_count() {
        let bonds: Vec<usize> = g.neighbors(atom).iter().map(|&(_, b)| b).collect();
        for i in 0..bonds.len() {
            for j in i + 1..bonds.len() {
                let (a, b) = (bonds[i].min(bonds[j]), bonds[i].max(bonds[j]));
                pairs.push(Hyperedge { bonds: vec![a, b], kind: HyperedgeKind::Pair { atom } });
            }
        }
    }
    pairs.sort_by(|x, y| x.bonds.cmp(&y.bonds));
    let mut hyperedges = pairs;
    for ring in rings.iter() {
        let mut bonds = ring.to_vec();
        bonds.sort_unstable();
        hyperedges.push(Hyperedge { bonds, kind: HyperedgeKind::Ring });
    }
    Ok(Hypergraph { node_count: g.bond_count(), hyperedges })
}

/// Simple undirected graph over bond IDs (G_H).
#[derive(Clone, PartialEq, Eq)]
pub struct BondGraph {
    adjacency: Vec<NodeSet>,
}

impl fmt::Debug for BondGraph {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_map().entries(self.adjacency.iter().enumerate()).finish()
    }
}

impl BondGraph {
    pub fn new(n: usize) -> Self {
        BondGraph { adjacency: vec![NodeSet::with_capacity(n); n] }
    }

    pub fn from_edges(n: usize, edges: &[(usize, usize)]) -> Self {
        let mut g = BondGraph::new(n);
        for &(u, v) in edges {
            g.add_edge(u, v);
        }
        g
    }

    pub fn node_count(&self) -> usize {
        self.adjacency.len()
    }

    /// Adds `u`-`v`; returns whether the edge is new. Self loops are ignored.
    pub fn add_edge(&mut self, u: usize, v: usize) -> bool {
        if u == v {
            return false;
        }
        let new = self.adjacency[u].insert(v);
        self.adjacency[v].insert(u);
        new
    }

    pub fn has_edge(&self, u: usize, v: usize) -> bool {
        self.adjacency[u].contains(v)
    }

    pub fn neighbors(&self, u: usize) -> &NodeSet {
        &self.adjacency[u]
    }

    pub fn degree(&self, u: usize) -> usize {
        self.adjacency[u].len()
    }

    pub fn edge_count(&self) -> usize {
        self.adjacency.iter().map(NodeSet::len).sum::<usize>() / 2
    }

    pub fn edges(&self) -> Vec<(usize, usize)> {
        let mut out = Vec::new();
        for (u, adj) in self.adjacency.iter().enumerate() {
            for v in adj.iter().filter(|&v| v > u) {
                out.push((u, v));
            }
        }
        out
    }

    pub fn is_connected(&self) -> bool {
        let n = self.node_count();
        if n == 0 {
            return true;
        }
        let mut seen = NodeSet::with_capacity(n);
        seen.insert(0);
        let mut stack = vec![0];
        while let Some(u) = stack.pop() {
            for v in self.adjacency[u].iter() {
                if seen.insert(v) {
                    stack.push(v);
                }
            }
        }
        seen.len() == n
    }
}

/// G_H: bonds sharing any hyperedge are adjacent, so every ring hyperedge
/// becomes a complete subgraph over its bonds.
pub fn graph_of(h: &Hypergraph) -> BondGraph {
    let mut g = BondGraph::new(h.node_count);
    for e in &h.hyperedges {
        for i in 0..e.bonds.len() {
            for j in i + 1..e.bonds.len() {
                g.add_edge(e.bonds[i], e.bonds[j]);
            }
        }
    }
    g
}

/// Stable clique identifier: FNV-1a of the sorted member bond IDs.
#[derive(Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct CliqueId(pub u64);

impl CliqueId {
    pub fn of_members(members: &[usize]) -> Self {
        let words: Vec<u64> = members.iter().map(|&m| m as u64).collect();
        CliqueId(fnv1a_words(&words))
    }
}

impl fmt::Debug for CliqueId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "c{:016x}", self.0)
    }
}

impl fmt::Display for CliqueId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:016x}", self.0)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Clique {
    pub id: CliqueId,
    /// Sorted bond IDs.
    pub members: Vec<usize>,
}

impl Clique {
    pub fn new(mut members: Vec<usize>) -> Self {
        members.sort_unstable();
        members.dedup();
        Clique { id: CliqueId::of_members(&members), members }
    }

    pub fn contains(&self, bond: usize) -> bool {
        self.members.binary_search(&bond).is_ok()
    }

    pub fn shared(&self, other: &Clique) -> Vec<usize> {
        self.members.iter().copied().filter(|&b| other.contains(b)).collect()
    }

    pub fn len(&self) -> usize {
        self.members.len()
    }

    pub fn is_empty(&self) -> bool {
        self.members.is_empty()
    }

    /// The clique's bonds and atoms as a standalone molecule.
    pub fn fragment(&self, g: &MolecularGraph) -> MolecularGraph {
        g.bond_subgraph(&self.members)
    }
}

/// Maximal cliques of G_H (sorted by member list) and the pairs sharing a
/// bond. `edges` hold indices into `cliques`, `i < j`, sorted.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CliqueGraph {
    pub cliques: Vec<Clique>,
    pub edges: Vec<(usize, usize)>,
    pub step: usize,
}

impl CliqueGraph {
    pub fn index_of(&self, id: CliqueId) -> Option<usize> {
        self.cliques.iter().position(|c| c.id == id)
    }

    pub fn get(&self, id: CliqueId) -> Option<&Clique> {
        self.cliques.iter().find(|c| c.id == id)
    }

    /// Indices of cliques containing `bond`.
    pub fn containing(&self, bond: usize) -> Vec<usize> {
        (0..self.cliques.len()).filter(|&i| self.cliques[i].contains(bond)).collect()
    }

    pub fn has_edge(&self, i: usize, j: usize) -> bool {
        let key = (i.min(j), i.max(j));
        self.edges.binary_search(&key).is_ok()
    }
}

/// CLIQUE(G_H): all maximal cliques via Bron-Kerbosch with Tomita pivoting;
/// clique-graph edges join cliques sharing at least one bond.
pub fn clique_extract(gh: &BondGraph) -> CliqueGraph {
    let n = gh.node_count();
    let mut found: Vec<Vec<usize>> = Vec::new();
    let p = NodeSet::from_iter_with_capacity(n, 0..n);
    bron_kerbosch(gh, &mut Vec::new(), p, NodeSet::with_capacity(n), &mut found);
    let mut cliques: Vec<Clique> = found.into_iter().map(Clique::new).collect();
    cliques.sort_by(|a, b| a.members.cmp(&b.members));
    let mut edges = Vec::new();
    for i in 0..cliques.len() {
        for j in i + 1..cliques.len() {
            if cliques[i].members.iter().any(|&b| cliques[j].contains(b)) {
                edges.push((i, j));
            }
        }
    }
    CliqueGraph { cliques, edges, step: 0 }
}

fn bron_kerbosch(g: &BondGraph, r: &mut Vec<usize>, mut p: NodeSet, mut x: NodeSet, out: &mut Vec<Vec<usize>>) {
    if p.is_empty() {
        if x.is_empty() && !r.is_empty() {
            out.push(r.clone());
        }
        return;
    }
    let mut pux = p.clone();
    pux.union_with(&x);
    let pivot = pux
        .iter()
        .max_by_key(|&u| (p.intersection_len(g.neighbors(u)), core::cmp::Reverse(u)))
        .expect("P non-empty");
    let candidates: Vec<usize> = p.difference(g.neighbors(pivot)).iter().collect();
    for v in candidates {
        r.push(v);
        bron_kerbosch(g, r, p.intersection(g.neighbors(v)), x.intersection(g.neighbors(v)), out);
        r.pop();
        p.remove(v);
        x.insert(v);
    }
}
