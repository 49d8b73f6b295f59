use alloc::vec::Vec;

use super::{minimal_rings, MolecularGraph};
use crate::seed::fnv1a_words;

pub const FINGERPRINT_BITS: usize = 2048;
const RADIUS: usize = 2;

/// Folded circular (Morgan-style) fingerprint.
#[derive(Clone, PartialEq, Eq, Hash)]
pub struct Fingerprint([u64; FINGERPRINT_BITS / 64]);

impl Fingerprint {
    pub fn count_ones(&self) -> u32 {
        self.0.iter().map(|w| w.count_ones()).sum()
    }

    pub fn contains(&self, bit: usize) -> bool {
        self.0[bit / 64] >> (bit % 64) & 1 == 1
    }

    fn set(&mut self, bit: usize) {
        self.0[bit / 64] |= 1 << (bit % 64);
    }
}

impl core::fmt::Debug for Fingerprint {
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        write!(f, "Fingerprint({} bits set)", self.count_ones())
    }
}

/// Radius-2 circular fingerprint folded to 2048 bits.
///
/// Initial atom identifiers hash (atomic number, heavy degree, hydrogens,
/// formal charge, ring membership); each round rehashes an atom's identifier
/// with its sorted (bond order, neighbor identifier) list. Every identifier
/// from rounds 0..=2 sets one bit.
pub fn fingerprint(g: &MolecularGraph) -> Fingerprint {
    let rings = minimal_rings(g);
    let mut in_ring = alloc::vec![false; g.atom_count()];
    for ring in rings.iter() {
        for &b in ring {
            for a in g.bond(b).atoms {
                in_ring[a] = true;
            }
        }
    }
    let mut ids: Vec<u64> = (0..g.atom_count())
        .map(|i| {
            let a = g.atom(i);
            fnv1a_words(&[
                a.element.atomic_number() as u64,
                g.degree(i) as u64,
                g.hydrogen_count(i) as u64,
                (a.charge as i64) as u64,
                in_ring[i] as u64,
            ])
        })
        .collect();
    let mut fp = Fingerprint([0; FINGERPRINT_BITS / 64]);
    for &id in &ids {
        fp.set((id % FINGERPRINT_BITS as u64) as usize);
    }
    for round in 1..=RADIUS {
        let next: Vec<u64> = (0..g.atom_count())
            .map(|i| {
                let mut env: Vec<(u64, u64)> = g
                    .neighbors(i)
                    .iter()
                    .map(|&(w, b)| (g.bond(b).order.valence() as u64, ids[w]))
                    .collect();
                env.sort_unstable();
                let mut words = Vec::with_capacity(2 + 2 * env.len());
                words.push(round as u64);
                words.push(ids[i]);
                for (o, id) in env {
                    words.push(o);
                    words.push(id);
                }
                fnv1a_words(&words)
            })
            .collect();
        ids = next;
        for &id in &ids {
            fp.set((id % FINGERPRINT_BITS as u64) as usize);
        }
    }
    fp
}

/// Jaccard similarity of set bits; two empty fingerprints are identical (1.0).
pub fn tanimoto(a: &Fingerprint, b: &Fingerprint) -> f64 {
    let mut inter = 0u32;
    let mut union = 0u32;
    for (x, y) in a.0.iter().zip(&b.0) {
        inter += (x & y).count_ones();
        union += (x | y).count_ones();
    }
    if union == 0 {
        1.0
    } else {
        inter as f64 / union as f64
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::molecule::parse_smiles;

    #[test]
    fn self_similarity_is_one() {
        let g = parse_smiles("C=CC(=O)OCC").unwrap();
        assert_eq!(tanimoto(&fingerprint(&g), &fingerprint(&g)), 1.0);
    }

    #[test]
    fn distinct_elements_differ() {
        let c = fingerprint(&parse_smiles("C").unwrap());
        let o = fingerprint(&parse_smiles("O").unwrap());
        assert!(tanimoto(&c, &o) < 1.0);
    }

    #[test]
    fn relabeling_invariant() {
        let a = parse_smiles("OCC(=O)C1CC1").unwrap();
        let b = parse_smiles("C1CC1C(=O)CO").unwrap();
        assert_eq!(fingerprint(&a), fingerprint(&b));
    }
}
