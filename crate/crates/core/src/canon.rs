//! Canonical forms of vertex- and edge-labeled graphs by individualization
//! and refinement, with orbit pruning from discovered automorphisms.
//!
//! Certificates are exact (the canonically relabeled graph itself), so equal
//! keys always mean isomorphic inputs.

use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;
use core::fmt::Write;

use crate::molecule::MolecularGraph;

#[derive(Debug, Clone)]
pub struct LabeledGraph<L> {
    pub labels: Vec<L>,
    /// Undirected edges `(u, v, label)`.
    pub edges: Vec<(usize, usize, u8)>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CanonicalForm<L> {
    /// Vertex labels in canonical order.
    pub labels: Vec<L>,
    /// Edges as `(i, j, label)` over canonical positions, `i < j`, sorted.
    pub edges: Vec<(usize, usize, u8)>,
    /// `order[i]` is the input vertex placed at canonical position `i`.
    pub order: Vec<usize>,
}

impl<L> CanonicalForm<L> {
    pub fn key_with(&self, mut label: impl FnMut(&L, &mut String)) -> String {
        let mut s = String::new();
        for (i, l) in self.labels.iter().enumerate() {
            if i > 0 {
                s.push(',');
            }
            label(l, &mut s);
        }
        s.push('|');
        for (i, (a, b, e)) in self.edges.iter().enumerate() {
            if i > 0 {
                s.push(',');
            }
            let _ = write!(s, "{a}-{b}:{e}");
        }
        s
    }
}

/// Edge list in the candidate labeling plus the labeling itself.
type Labeling = (Vec<(usize, usize, u8)>, Vec<usize>);

struct Search<'a, L> {
    g: &'a LabeledGraph<L>,
    adj: Vec<Vec<(usize, u8)>>,
    best: Option<Labeling>,
    first: Option<Labeling>,
    automorphisms: Vec<Vec<usize>>,
}

const MAX_STORED_AUTOMORPHISMS: usize = 256;

pub fn canonical_form<L: Ord + Clone>(g: &LabeledGraph<L>) -> CanonicalForm<L> {
    let n = g.labels.len();
    let mut adj = vec![Vec::new(); n];
    for &(u, v, e) in &g.edges {
        adj[u].push((v, e));
        adj[v].push((u, e));
    }
    let mut idx: Vec<usize> = (0..n).collect();
    idx.sort_by(|&a, &b| g.labels[a].cmp(&g.labels[b]).then(a.cmp(&b)));
    let mut cells: Vec<Vec<usize>> = Vec::new();
    for v in idx {
        match cells.last_mut() {
            Some(c) if g.labels[c[0]] == g.labels[v] => c.push(v),
            _ => cells.push(vec![v]),
        }
    }
    let mut s = Search { g, adj, best: None, first: None, automorphisms: Vec::new() };
    let mut prefix = Vec::new();
    s.explore(cells, &mut prefix);
    let (edges, order) = s.best.unwrap_or_default();
    CanonicalForm { labels: order.iter().map(|&v| g.labels[v].clone()).collect(), edges, order }
}

impl<L> Search<'_, L> {
    fn refine(&self, cells: &mut Vec<Vec<usize>>) {
        let n = self.g.labels.len();
        let mut cell_of = vec![0usize; n];
        loop {
            for (i, c) in cells.iter().enumerate() {
                for &v in c {
                    cell_of[v] = i;
                }
            }
            let mut next: Vec<Vec<usize>> = Vec::with_capacity(cells.len());
            let mut split = false;
            for c in cells.iter() {
                if c.len() == 1 {
                    next.push(c.clone());
                    continue;
                }
                let mut sigs: Vec<(Vec<(usize, u8)>, usize)> = c
                    .iter()
                    .map(|&v| {
                        let mut sig: Vec<(usize, u8)> = self.adj[v].iter().map(|&(w, e)| (cell_of[w], e)).collect();
                        sig.sort_unstable();
                        (sig, v)
                    })
                    .collect();
                sigs.sort();
                let start = next.len();
                let mut prev: Option<&Vec<(usize, u8)>> = None;
                for (sig, v) in &sigs {
                    if prev == Some(sig) {
                        next.last_mut().expect("cell started").push(*v);
                    } else {
                        next.push(vec![*v]);
                    }
                    prev = Some(sig);
                }
                if next.len() - start > 1 {
                    split = true;
                }
            }
            *cells = next;
            if !split {
                return;
            }
        }
    }

    fn explore(&mut self, mut cells: Vec<Vec<usize>>, prefix: &mut Vec<usize>) {
        self.refine(&mut cells);
        let Some(target) = cells.iter().position(|c| c.len() > 1) else {
            self.leaf(&cells);
            return;
        };
        let mut tried: Vec<usize> = Vec::new();
        let members = cells[target].clone();
        for &v in &members {
            if !tried.is_empty() && self.same_orbit_as_any(v, &tried, prefix) {
                continue;
            }
            tried.push(v);
            let mut child = Vec::with_capacity(cells.len() + 1);
            child.extend_from_slice(&cells[..target]);
            child.push(vec![v]);
            child.push(members.iter().copied().filter(|&u| u != v).collect());
            child.extend_from_slice(&cells[target + 1..]);
            prefix.push(v);
            self.explore(child, prefix);
            prefix.pop();
        }
    }

    fn same_orbit_as_any(&self, v: usize, tried: &[usize], prefix: &[usize]) -> bool {
        let n = self.g.labels.len();
        let mut parent: Vec<usize> = (0..n).collect();
        fn find(p: &mut [usize], mut x: usize) -> usize {
            while p[x] != x {
                p[x] = p[p[x]];
                x = p[x];
            }
            x
        }
        let mut any = false;
        for gamma in &self.automorphisms {
            if prefix.iter().any(|&p| gamma[p] != p) {
                continue;
            }
            any = true;
            for (x, &y) in gamma.iter().enumerate() {
                let (a, b) = (find(&mut parent, x), find(&mut parent, y));
                if a != b {
                    parent[a] = b;
                }
            }
        }
        if !any {
            return false;
        }
        let rv = find(&mut parent, v);
        tried.iter().any(|&t| find(&mut parent, t) == rv)
    }

    fn leaf(&mut self, cells: &[Vec<usize>]) {
        let order: Vec<usize> = cells.iter().map(|c| c[0]).collect();
        let mut pos = vec![0usize; order.len()];
        for (i, &v) in order.iter().enumerate() {
            pos[v] = i;
        }
        let mut edges: Vec<(usize, usize, u8)> = self
            .g
            .edges
            .iter()
            .map(|&(u, v, e)| {
                let (a, b) = (pos[u], pos[v]);
                (a.min(b), a.max(b), e)
            })
            .collect();
        edges.sort_unstable();
        if let Some((first_edges, first_order)) = &self.first {
            if *first_edges == edges && self.best.as_ref().is_some_and(|(b, _)| b != first_edges) {
                let gamma = automorphism(&order, first_order);
                self.push_automorphism(gamma);
            }
        } else {
            self.first = Some((edges.clone(), order.clone()));
        }
        match &self.best {
            None => self.best = Some((edges, order)),
            Some((best_edges, best_order)) => match edges.cmp(best_edges) {
                core::cmp::Ordering::Less => self.best = Some((edges, order)),
                core::cmp::Ordering::Equal => {
                    let gamma = automorphism(&order, best_order);
                    self.push_automorphism(gamma);
                }
                core::cmp::Ordering::Greater => {}
            },
        }
    }

    fn push_automorphism(&mut self, gamma: Vec<usize>) {
        if self.automorphisms.len() < MAX_STORED_AUTOMORPHISMS {
            self.automorphisms.push(gamma);
        }
    }
}

/// The automorphism mapping the vertex at each position of `from` to the vertex
/// at the same position of `to` (both leaves share one certificate).
fn automorphism(from: &[usize], to: &[usize]) -> Vec<usize> {
    let mut gamma = vec![0usize; from.len()];
    for (i, &v) in from.iter().enumerate() {
        gamma[v] = to[i];
    }
    gamma
}

/// Atom label used for whole-molecule identity: (atomic number, charge, H count).
pub type AtomLabel = (u8, i8, u8);

pub fn molecule_graph(g: &MolecularGraph) -> LabeledGraph<AtomLabel> {
    LabeledGraph {
        labels: (0..g.atom_count())
            .map(|i| {
                let a = g.atom(i);
                (a.element.atomic_number(), a.charge, g.hydrogen_count(i))
            })
            .collect(),
        edges: g.bonds().iter().map(|b| (b.atoms[0], b.atoms[1], b.order.valence())).collect(),
    }
}

/// Canonical key of a whole molecule; equal keys iff isomorphic molecules
/// (elements, charges, hydrogen counts and bond orders preserved).
pub fn molecule_key(g: &MolecularGraph) -> String {
    canonical_form(&molecule_graph(g)).key_with(|&(z, q, h), s| {
        let _ = write!(s, "{z}");
        if q != 0 {
            let _ = write!(s, "q{q}");
        }
        if h != 0 {
            let _ = write!(s, "h{h}");
        }
    })
}

/// Canonical atom ranks: `rank[atom]` is the atom's canonical position.
pub fn canonical_atom_ranks(g: &MolecularGraph) -> Vec<usize> {
    let form = canonical_form(&molecule_graph(g));
    let mut rank = vec![0; g.atom_count()];
    for (i, &v) in form.order.iter().enumerate() {
        rank[v] = i;
    }
    rank
}

pub fn isomorphic(a: &MolecularGraph, b: &MolecularGraph) -> bool {
    a.atom_count() == b.atom_count() && a.bond_count() == b.bond_count() && molecule_key(a) == molecule_key(b)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::molecule::parse_smiles;

    #[test]
    fn relabeled_molecules_share_key() {
        let pairs = [
            ("OCC(=O)C1CC1", "C1CC1C(=O)CO"),
            ("C=CC(=O)OC", "COC(=O)C=C"),
            ("CC(C)(C)C(C)(C)C", "C(C)(C)(C)C(C)(C)C"),
        ];
        for (a, b) in pairs {
            assert_eq!(molecule_key(&parse_smiles(a).unwrap()), molecule_key(&parse_smiles(b).unwrap()), "{a} vs {b}");
        }
    }

    #[test]
    fn different_molecules_differ() {
        let k = |s| molecule_key(&parse_smiles(s).unwrap());
        assert_ne!(k("CCO"), k("COC"));
        assert_ne!(k("C=CC"), k("CCC"));
        assert_ne!(k("C1CCCCC1"), k("C1CCC1CC"));
        // two triangles vs a hexagon: same degree sequence
        assert_ne!(k("C1CC1.C1CC1"), k("C1CCCCC1"));
    }

    #[test]
    fn symmetric_molecules_terminate_quickly() {
        // heavy symmetry: many equivalent methyls and rings
        let g = parse_smiles("CC(C)(C)C(C(C)(C)C)(C(C)(C)C)C(C)(C)C").unwrap();
        let h = parse_smiles("C1CCC2(CC1)CCCCC2").unwrap();
        assert!(!molecule_key(&g).is_empty());
        assert!(!molecule_key(&h).is_empty());
    }
}
