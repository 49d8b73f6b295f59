//! Molecular graphs: atoms, bonds, valence rules, SMILES subset IO, ring
//! perception, fingerprints and substructure search.

mod fingerprint;
mod rings;
mod smiles;
mod substructure;

use alloc::vec;
use alloc::vec::Vec;
use core::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use fingerprint::{fingerprint, tanimoto, Fingerprint, FINGERPRINT_BITS};
pub use rings::{minimal_rings, RingSet};
pub use smiles::{parse_smiles, write_smiles, write_smiles_mapped, SmilesError};
pub use substructure::{contains_substructure, substructure_matches};

/// Supported elements.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Element {
    C,
    N,
    O,
    S,
    F,
    Cl,
    Br,
    I,
    Si,
    P,
}

impl Element {
    pub const ALL: [Element; 10] = [
        Element::C,
        Element::N,
        Element::O,
        Element::S,
        Element::F,
        Element::Cl,
        Element::Br,
        Element::I,
        Element::Si,
        Element::P,
    ];

    pub fn symbol(self) -> &'static str {
        match self {
            Element::C => "C",
            Element::N => "N",
            Element::O => "O",
            Element::S => "S",
            Element::F => "F",
            Element::Cl => "Cl",
            Element::Br => "Br",
            Element::I => "I",
            Element::Si => "Si",
            Element::P => "P",
        }
    }

    pub fn from_symbol(s: &str) -> Option<Element> {
        Element::ALL.into_iter().find(|e| e.symbol() == s)
    }

    pub fn atomic_number(self) -> u8 {
        match self {
            Element::C => 6,
            Element::N => 7,
            Element::O => 8,
            Element::S => 16,
            Element::F => 9,
            Element::Cl => 17,
            Element::Br => 35,
            Element::I => 53,
            Element::Si => 14,
            Element::P => 15,
        }
    }

    /// Elements that may be written without brackets.
    pub fn is_organic_subset(self) -> bool {
        !matches!(self, Element::Si)
    }

    /// Allowed neutral valences, ascending.
    pub fn valences(self) -> &'static [u8] {
        match self {
            Element::C | Element::Si => &[4],
            Element::N => &[3],
            Element::O => &[2],
            Element::S => &[2, 4, 6],
            Element::P => &[3, 5],
            Element::F | Element::Cl | Element::Br | Element::I => &[1],
        }
    }

    /// Allowed valences for a given formal charge.
    ///
    /// Group 14 atoms lose one bonding slot per unit of charge either way;
    /// everything to their right gains one per positive and loses one per
    /// negative charge (N+ behaves like C, O- like F).
    pub fn valences_with_charge(self, charge: i8) -> Vec<u8> {
        let shift: i16 = match self {
            Element::C | Element::Si => -(charge.unsigned_abs() as i16),
            _ => charge as i16,
        };
        self.valences()
            .iter()
            .filter_map(|&v| {
                let s = v as i16 + shift;
                (s >= 0).then_some(s as u8)
            })
            .collect()
    }

    pub fn max_valence(self, charge: i8) -> u8 {
        self.valences_with_charge(charge).last().copied().unwrap_or(0)
    }
}

impl fmt::Display for Element {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.symbol())
    }
}

/// A heavy atom. `explicit_h = None` means hydrogens are implicit and fill the
/// lowest allowed valence (unbracketed SMILES atoms); `Some(n)` pins the count.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct Atom {
    pub element: Element,
    #[serde(default)]
    pub charge: i8,
    #[serde(default)]
    pub explicit_h: Option<u8>,
}

impl Atom {
    pub fn new(element: Element) -> Self {
        Atom { element, charge: 0, explicit_h: None }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum BondOrder {
    Single,
    Double,
    Triple,
}

impl BondOrder {
    pub fn valence(self) -> u8 {
        match self {
            BondOrder::Single => 1,
            BondOrder::Double => 2,
            BondOrder::Triple => 3,
        }
    }

    pub fn from_valence(v: u8) -> Option<BondOrder> {
        match v {
            1 => Some(BondOrder::Single),
            2 => Some(BondOrder::Double),
            3 => Some(BondOrder::Triple),
            _ => None,
        }
    }

    pub fn symbol(self) -> &'static str {
        match self {
            BondOrder::Single => "",
            BondOrder::Double => "=",
            BondOrder::Triple => "#",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct Bond {
    pub atoms: [usize; 2],
    pub order: BondOrder,
}

impl Bond {
    pub fn new(a: usize, b: usize, order: BondOrder) -> Self {
        Bond { atoms: [a, b], order }
    }

    pub fn other(&self, atom: usize) -> Option<usize> {
        match self.atoms {
            [a, b] if a == atom => Some(b),
            [a, b] if b == atom => Some(a),
            _ => None,
        }
    }

    pub fn touches(&self, atom: usize) -> bool {
        self.atoms[0] == atom || self.atoms[1] == atom
    }

    pub fn shares_atom(&self, other: &Bond) -> bool {
        self.touches(other.atoms[0]) || self.touches(other.atoms[1])
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum MoleculeError {
    #[error("bond {bond} references missing atom {atom}")]
    MissingAtom { bond: usize, atom: usize },
    #[error("bond {bond} is a self-loop on atom {atom}")]
    SelfLoop { bond: usize, atom: usize },
    #[error("duplicate bond between atoms {0} and {1}")]
    DuplicateBond(usize, usize),
    #[error("atom {atom} ({element}) exceeds its maximum valence")]
    Valence { atom: usize, element: Element },
}

/// Atoms plus bonds with a cached adjacency list.
///
/// Structural invariants (endpoints exist, no self loops, no duplicate bonds)
/// are enforced on construction; valence is checked separately by
/// [`MolecularGraph::check_valence`] so that partially built fragments can
/// exist.
#[derive(Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "RawMolecule", into = "RawMolecule")]
pub struct MolecularGraph {
    atoms: Vec<Atom>,
    bonds: Vec<Bond>,
    adjacency: Vec<Vec<(usize, usize)>>,
}

#[derive(Serialize, Deserialize)]
struct RawMolecule {
    atoms: Vec<Atom>,
    bonds: Vec<Bond>,
}

impl TryFrom<RawMolecule> for MolecularGraph {
    type Error = MoleculeError;
    fn try_from(raw: RawMolecule) -> Result<Self, Self::Error> {
        MolecularGraph::new(raw.atoms, raw.bonds)
    }
}

impl From<MolecularGraph> for RawMolecule {
    fn from(g: MolecularGraph) -> Self {
        RawMolecule { atoms: g.atoms, bonds: g.bonds }
    }
}

impl fmt::Debug for MolecularGraph {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "MolecularGraph({})", write_smiles(self))
    }
}

impl MolecularGraph {
    pub fn new(atoms: Vec<Atom>, bonds: Vec<Bond>) -> Result<Self, MoleculeError> {
        let mut adjacency = vec![Vec::new(); atoms.len()];
        for (i, b) in bonds.iter().enumerate() {
            let [x, y] = b.atoms;
            for a in [x, y] {
                if a >= atoms.len() {
                    return Err(MoleculeError::MissingAtom { bond: i, atom: a });
                }
            }
            if x == y {
                return Err(MoleculeError::SelfLoop { bond: i, atom: x });
            }
            if adjacency[x].iter().any(|&(n, _)| n == y) {
                return Err(MoleculeError::DuplicateBond(x.min(y), x.max(y)));
            }
            adjacency[x].push((y, i));
            adjacency[y].push((x, i));
        }
        for adj in &mut adjacency {
            adj.sort_unstable();
        }
        Ok(MolecularGraph { atoms, bonds, adjacency })
    }

    pub fn atoms(&self) -> &[Atom] {
        &self.atoms
    }

    pub fn bonds(&self) -> &[Bond] {
        &self.bonds
    }

    pub fn atom(&self, i: usize) -> &Atom {
        &self.atoms[i]
    }

    pub fn bond(&self, i: usize) -> &Bond {
        &self.bonds[i]
    }

    pub fn atom_count(&self) -> usize {
        self.atoms.len()
    }

    pub fn bond_count(&self) -> usize {
        self.bonds.len()
    }

    /// `(neighbor atom, bond id)` pairs sorted by neighbor.
    pub fn neighbors(&self, atom: usize) -> &[(usize, usize)] {
        &self.adjacency[atom]
    }

    pub fn degree(&self, atom: usize) -> usize {
        self.adjacency[atom].len()
    }

    pub fn bond_between(&self, a: usize, b: usize) -> Option<usize> {
        self.adjacency[a].iter().find(|&&(n, _)| n == b).map(|&(_, bond)| bond)
    }

    pub fn bond_order_sum(&self, atom: usize) -> u8 {
        self.adjacency[atom].iter().map(|&(_, b)| self.bonds[b].order.valence()).sum()
    }

    /// Hydrogens implied for an atom: the pinned count for bracket atoms,
    /// otherwise whatever fills the lowest allowed valence.
    pub fn hydrogen_count(&self, atom: usize) -> u8 {
        let a = &self.atoms[atom];
        match a.explicit_h {
            Some(h) => h,
            None => {
                let used = self.bond_order_sum(atom);
                a.element
                    .valences_with_charge(a.charge)
                    .into_iter()
                    .find(|&v| v >= used)
                    .map(|v| v - used)
                    .unwrap_or(0)
            }
        }
    }

    pub fn atom_valence_ok(&self, atom: usize) -> bool {
        let a = &self.atoms[atom];
        let used = self.bond_order_sum(atom) + a.explicit_h.unwrap_or(0);
        used <= a.element.max_valence(a.charge)
    }

    pub fn check_valence(&self) -> Result<(), MoleculeError> {
        match (0..self.atoms.len()).find(|&i| !self.atom_valence_ok(i)) {
            Some(atom) => Err(MoleculeError::Valence { atom, element: self.atoms[atom].element }),
            None => Ok(()),
        }
    }

    /// Connected components as sorted atom lists, ordered by smallest atom.
    pub fn components(&self) -> Vec<Vec<usize>> {
        let n = self.atoms.len();
        let mut comp = vec![usize::MAX; n];
        let mut out = Vec::new();
        for s in 0..n {
            if comp[s] != usize::MAX {
                continue;
            }
            let id = out.len();
            let mut members = vec![s];
            comp[s] = id;
            let mut i = 0;
            while i < members.len() {
                let v = members[i];
                i += 1;
                for &(w, _) in &self.adjacency[v] {
                    if comp[w] == usize::MAX {
                        comp[w] = id;
                        members.push(w);
                    }
                }
            }
            members.sort_unstable();
            out.push(members);
        }
        out
    }

    pub fn is_connected(&self) -> bool {
        self.components().len() <= 1
    }

    /// Cyclomatic number `|bonds| - |atoms| + components`.
    pub fn cyclomatic_number(&self) -> usize {
        (self.bonds.len() + self.components().len()).saturating_sub(self.atoms.len())
    }

    /// Atoms touched by a set of bonds, sorted.
    pub fn atoms_of_bonds(&self, bonds: &[usize]) -> Vec<usize> {
        let mut atoms: Vec<usize> = bonds.iter().flat_map(|&b| self.bonds[b].atoms).collect();
        atoms.sort_unstable();
        atoms.dedup();
        atoms
    }

    /// Subgraph induced by a bond set: the bonds plus their endpoints,
    /// renumbered in ascending original-ID order. Atoms keep their original
    /// hydrogen convention.
    pub fn bond_subgraph(&self, bonds: &[usize]) -> MolecularGraph {
        let atoms = self.atoms_of_bonds(bonds);
        let local = |a: usize| atoms.binary_search(&a).expect("atom of bond");
        let mut sorted = bonds.to_vec();
        sorted.sort_unstable();
        sorted.dedup();
        let new_bonds = sorted
            .iter()
            .map(|&b| {
                let bond = &self.bonds[b];
                Bond::new(local(bond.atoms[0]), local(bond.atoms[1]), bond.order)
            })
            .collect();
        MolecularGraph::new(atoms.iter().map(|&a| self.atoms[a]).collect(), new_bonds)
            .expect("subgraph of a valid graph")
    }

    /// Relabels atoms: new atom `perm[i]` is old atom `i`.
    pub fn permute_atoms(&self, perm: &[usize]) -> MolecularGraph {
        let mut atoms = vec![Atom::new(Element::C); self.atoms.len()];
        for (old, &new) in perm.iter().enumerate() {
            atoms[new] = self.atoms[old];
        }
        let bonds =
            self.bonds.iter().map(|b| Bond::new(perm[b.atoms[0]], perm[b.atoms[1]], b.order)).collect();
        MolecularGraph::new(atoms, bonds).expect("permutation of a valid graph")
    }

    /// Same molecule with every implicit-hydrogen atom pinned to its current
    /// hydrogen count, or the reverse where the pinned count equals the
    /// implicit one. Used to compare molecules regardless of notation.
    pub fn with_normalized_hydrogens(&self) -> MolecularGraph {
        let mut g = self.clone();
        for i in 0..g.atoms.len() {
            let h = self.hydrogen_count(i);
            g.atoms[i].explicit_h = Some(h);
        }
        g
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn charged_valences() {
        assert_eq!(Element::N.valences_with_charge(1), vec![4]);
        assert_eq!(Element::O.valences_with_charge(-1), vec![1]);
        assert_eq!(Element::C.valences_with_charge(-1), vec![3]);
        assert_eq!(Element::S.max_valence(0), 6);
        assert_eq!(Element::P.valences(), &[3, 5]);
    }

    #[test]
    fn construction_rejects_bad_bonds() {
        let atoms = vec![Atom::new(Element::C); 2];
        assert!(matches!(
            MolecularGraph::new(atoms.clone(), vec![Bond::new(0, 2, BondOrder::Single)]),
            Err(MoleculeError::MissingAtom { .. })
        ));
        assert!(matches!(
            MolecularGraph::new(atoms.clone(), vec![Bond::new(1, 1, BondOrder::Single)]),
            Err(MoleculeError::SelfLoop { .. })
        ));
        assert!(matches!(
            MolecularGraph::new(
                atoms,
                vec![Bond::new(0, 1, BondOrder::Single), Bond::new(1, 0, BondOrder::Double)]
            ),
            Err(MoleculeError::DuplicateBond(0, 1))
        ));
    }

    #[test]
    fn implicit_hydrogens() {
        let g = parse_smiles("CC(=O)O").unwrap();
        assert_eq!(g.hydrogen_count(0), 3);
        assert_eq!(g.hydrogen_count(1), 0);
        assert_eq!(g.hydrogen_count(3), 1);
        let s = parse_smiles("CS(=O)(=O)C").unwrap();
        assert_eq!(s.hydrogen_count(1), 0);
        assert!(s.check_valence().is_ok());
    }

    #[test]
    fn bond_subgraph_renumbers() {
        let g = parse_smiles("C=CC(=O)OC").unwrap();
        let sub = g.bond_subgraph(&[2, 3]);
        assert_eq!(sub.atom_count(), 3);
        assert_eq!(sub.bond_count(), 2);
        assert_eq!(sub.atom(0).element, Element::C);
    }

    #[test]
    fn serde_rejects_invalid_graph() {
        let raw = RawMolecule { atoms: vec![Atom::new(Element::C)], bonds: vec![Bond::new(0, 0, BondOrder::Single)] };
        assert!(MolecularGraph::try_from(raw).is_err());
    }
}
