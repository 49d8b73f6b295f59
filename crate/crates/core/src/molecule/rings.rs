use alloc::collections::{BTreeSet, VecDeque};
use alloc::vec;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use super::MolecularGraph;

/// A minimum cycle basis over bonds. Each ring is a sorted list of bond IDs.
#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct RingSet {
    pub rings: Vec<Vec<usize>>,
}

impl RingSet {
    pub fn len(&self) -> usize {
        self.rings.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rings.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = &[usize]> {
        self.rings.iter().map(Vec::as_slice)
    }
}

/// Minimum cycle basis by Horton's candidate set (one shortest-path cycle per
/// vertex and edge) and greedy GF(2) independence, shortest first.
///
/// Candidates of equal length are ordered by their sorted bond lists, so the
/// result is deterministic for a given bond numbering.
pub fn minimal_rings(g: &MolecularGraph) -> RingSet {
    let needed = g.cyclomatic_number();
    if needed == 0 {
        return RingSet::default();
    }
    let n = g.atom_count();
    let mut candidates: BTreeSet<(usize, Vec<usize>)> = BTreeSet::new();
    for root in 0..n {
        let (parent_bond, depth) = bfs_tree(g, root);
        for (b, bond) in g.bonds().iter().enumerate() {
            let [x, y] = bond.atoms;
            if depth[x] == usize::MAX || depth[y] == usize::MAX {
                continue;
            }
            if parent_bond[x] == Some(b) || parent_bond[y] == Some(b) {
                continue;
            }
            let (px, ax) = path_to_root(g, &parent_bond, x);
            let (py, ay) = path_to_root(g, &parent_bond, y);
            // the two paths may only meet at the root
            if ax.iter().filter(|a| ay.contains(a)).count() != 1 {
                continue;
            }
            let mut cycle: Vec<usize> = px.into_iter().chain(py).chain(core::iter::once(b)).collect();
            cycle.sort_unstable();
            candidates.insert((cycle.len(), cycle));
        }
    }

    let words = g.bond_count().div_ceil(64);
    let mut basis: Vec<(usize, Vec<u64>)> = Vec::new();
    let mut rings = Vec::new();
    for (_, cycle) in candidates {
        let mut v = vec![0u64; words];
        for &b in &cycle {
            v[b / 64] ^= 1 << (b % 64);
        }
        for (pivot, row) in &basis {
            if v[pivot / 64] >> (pivot % 64) & 1 == 1 {
                for (a, r) in v.iter_mut().zip(row) {
                    *a ^= r;
                }
            }
        }
        if let Some(pivot) = lowest_bit(&v) {
            // keep rows fully reduced on their pivots
            for (_, row) in basis.iter_mut() {
                if row[pivot / 64] >> (pivot % 64) & 1 == 1 {
                    for (a, r) in row.iter_mut().zip(&v) {
                        *a ^= r;
                    }
                }
            }
            basis.push((pivot, v));
            rings.push(cycle);
            if rings.len() == needed {
                break;
            }
        }
    }
    RingSet { rings }
}

fn lowest_bit(v: &[u64]) -> Option<usize> {
    v.iter().enumerate().find(|(_, w)| **w != 0).map(|(i, w)| i * 64 + w.trailing_zeros() as usize)
}

fn bfs_tree(g: &MolecularGraph, root: usize) -> (Vec<Option<usize>>, Vec<usize>) {
    let n = g.atom_count();
    let mut parent = vec![None; n];
    let mut depth = vec![usize::MAX; n];
    depth[root] = 0;
    let mut q = VecDeque::from([root]);
    while let Some(v) = q.pop_front() {
        for &(w, b) in g.neighbors(v) {
            if depth[w] == usize::MAX {
                depth[w] = depth[v] + 1;
                parent[w] = Some(b);
                q.push_back(w);
            }
        }
    }
    (parent, depth)
}

fn path_to_root(g: &MolecularGraph, parent: &[Option<usize>], mut v: usize) -> (Vec<usize>, Vec<usize>) {
    let mut bonds = Vec::new();
    let mut atoms = vec![v];
    while let Some(b) = parent[v] {
        bonds.push(b);
        v = g.bond(b).other(v).expect("tree bond");
        atoms.push(v);
    }
    (bonds, atoms)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::molecule::parse_smiles;

    #[test]
    fn acyclic_has_no_rings() {
        assert!(minimal_rings(&parse_smiles("CCC(C)CO").unwrap()).is_empty());
    }

    #[test]
    fn benzene_one_six_ring() {
        let r = minimal_rings(&parse_smiles("C1=CC=CC=C1").unwrap());
        assert_eq!(r.len(), 1);
        assert_eq!(r.rings[0].len(), 6);
    }

    #[test]
    fn bicyclo_rings_are_smallest() {
        // 5-ring and 4-ring of the fused bicycle, never the 7-ring envelope
        let r = minimal_rings(&parse_smiles("C=CC(=O)OC1CC2CC1C2").unwrap());
        let mut sizes: Vec<usize> = r.iter().map(<[usize]>::len).collect();
        sizes.sort_unstable();
        assert_eq!(sizes, vec![4, 5]);
    }
}
