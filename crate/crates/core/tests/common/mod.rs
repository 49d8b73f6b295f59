#![allow(dead_code)]

use molgrammar_core::hypergraph::BondGraph;
use molgrammar_core::molecule::{Atom, Bond, BondOrder, Element, MolecularGraph};
use rand::seq::IndexedRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Random connected neutral molecule over C, N, O with up to `max_atoms`
/// atoms (at least two), some ring closures and occasional double bonds.
pub fn random_molecule(seed: u64, max_atoms: usize, max_rings: usize) -> MolecularGraph {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = rng.random_range(2..=max_atoms.max(2));
    let mut elements = vec![Element::C];
    let mut free = vec![4u8];
    let mut bonds: Vec<(usize, usize, BondOrder)> = Vec::new();
    for _ in 1..n {
        let open: Vec<usize> = (0..elements.len()).filter(|&i| free[i] > 0).collect();
        let Some(&j) = open.choose(&mut rng) else { break };
        let e = *[Element::C, Element::C, Element::C, Element::N, Element::O].choose(&mut rng).unwrap();
        let v = e.valences()[0];
        elements.push(e);
        free.push(v - 1);
        free[j] -= 1;
        bonds.push((j, elements.len() - 1, BondOrder::Single));
    }
    let rings = rng.random_range(0..=max_rings);
    for _ in 0..rings * 4 {
        if bonds.len() >= elements.len() - 1 + rings {
            break;
        }
        let a = rng.random_range(0..elements.len());
        let b = rng.random_range(0..elements.len());
        if a == b || free[a] == 0 || free[b] == 0 || bonds.iter().any(|&(x, y, _)| (x, y) == (a, b) || (x, y) == (b, a)) {
            continue;
        }
        free[a] -= 1;
        free[b] -= 1;
        bonds.push((a, b, BondOrder::Single));
    }
    for bond in bonds.iter_mut() {
        if free[bond.0] > 0 && free[bond.1] > 0 && rng.random_bool(0.15) {
            free[bond.0] -= 1;
            free[bond.1] -= 1;
            bond.2 = BondOrder::Double;
        }
    }
    let atoms = elements.into_iter().map(Atom::new).collect();
    let bonds = bonds.into_iter().map(|(a, b, o)| Bond::new(a, b, o)).collect();
    MolecularGraph::new(atoms, bonds).unwrap()
}

/// Erdős–Rényi graph on `n` nodes.
pub fn random_graph(seed: u64, n: usize, p: f64) -> BondGraph {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut g = BondGraph::new(n);
    for u in 0..n {
        for v in u + 1..n {
            if rng.random_bool(p) {
                g.add_edge(u, v);
            }
        }
    }
    g
}

pub fn shuffled(n: usize, seed: u64) -> Vec<usize> {
    use rand::seq::SliceRandom;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut p: Vec<usize> = (0..n).collect();
    p.shuffle(&mut rng);
    p
}

/// Monomer-scale corpus used across integration tests (Kekulé SMILES).
pub const CORPUS: &[&str] = &[
    "CCO",
    "CC(=O)O",
    "C=CC(=O)OC",
    "C=C(C)C(=O)OC",
    "C=CC(=O)OCCO",
    "C1CC1",
    "C1CCCCC1",
    "C1=CC=CC=C1",
    "CC1=CC=CC=C1",
    "C1CCC2CCCCC2C1",
    "C1=CC2=CC=CC=C2C=C1",
    "OC1CCOC1",
    "NC(=O)C=C",
    "CC(C)(C)OC(=O)C=C",
    "C=CC(=O)OC1CCCCC1",
    "C12CC1C2",
    "CCN(CC)CC",
    "OCC(O)CO",
];
