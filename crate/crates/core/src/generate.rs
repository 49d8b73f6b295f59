//! Stochastic derivation from a counted grammar and conversion of the
//! derived hypergraph back to a molecule.

use alloc::collections::VecDeque;
use alloc::vec::Vec;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::hrg::{Grammar, Msg, ProductionRule};
use crate::molecule::{Atom, Bond, BondOrder, MolecularGraph};
use crate::seed::derive_seed;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct Limits {
    pub max_depth: usize,
    pub max_bonds: usize,
}

impl Default for Limits {
    fn default() -> Self {
        Limits { max_depth: 30, max_bonds: 120 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize, Error)]
#[serde(rename_all = "snake_case")]
pub enum RejectReason {
    #[error("derivation deeper than the depth limit")]
    DepthExceeded,
    #[error("derived structure larger than the bond limit")]
    SizeExceeded,
    #[error("derived structure violates valence or has conflicting bonds")]
    ValenceViolation,
    #[error("no rule applies to an open nonterminal")]
    DeadEnd,
}

/// An unexpanded nonterminal: attachment bonds with their oriented atoms, in
/// derivation-state IDs.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct OpenNonterminal {
    pub attachments: Vec<(usize, [usize; 2])>,
    pub depth: usize,
}

/// Partial derivation: atom slots with a unification forest, bonds, and a
/// FIFO queue of open nonterminals.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DerivationState {
    atoms: Vec<Atom>,
    parent: Vec<usize>,
    bonds: Vec<(usize, usize, BondOrder)>,
    pub open: VecDeque<OpenNonterminal>,
}

impl Default for DerivationState {
    fn default() -> Self {
        Self::new()
    }
}

impl DerivationState {
    pub fn new() -> Self {
        DerivationState { atoms: Vec::new(), parent: Vec::new(), bonds: Vec::new(), open: VecDeque::new() }
    }

    pub fn bond_count(&self) -> usize {
        self.bonds.len()
    }

    fn find(&mut self, mut x: usize) -> usize {
        while self.parent[x] != x {
            self.parent[x] = self.parent[self.parent[x]];
            x = self.parent[x];
        }
        x
    }

    /// Unifies two slots; the older slot (the anchor) survives.
    fn unify(&mut self, a: usize, b: usize) {
        let (ra, rb) = (self.find(a), self.find(b));
        if ra != rb {
            let (keep, drop) = (ra.min(rb), ra.max(rb));
            self.parent[drop] = keep;
        }
    }

    /// Applies `rule`. Its external bonds are identified with `binding` (one
    /// entry per external): the anchor bond is kept, the rule's copy is
    /// dropped, and atoms are unified pairwise in stored orientation.
    pub fn apply(&mut self, rule: &ProductionRule, binding: &[(usize, [usize; 2])], depth: usize) {
        let frag = &rule.fragment;
        let mut atom_map: Vec<Option<usize>> = alloc::vec![None; frag.atom_count()];
        let mut bond_map: Vec<Option<usize>> = alloc::vec![None; frag.bond_count()];
        for (ext, &(gbond, gatoms)) in rule.externals.iter().zip(binding) {
            bond_map[ext.bond] = Some(gbond);
            for k in 0..2 {
                match atom_map[ext.atoms[k]] {
                    Some(existing) => self.unify(existing, gatoms[k]),
                    None => atom_map[ext.atoms[k]] = Some(gatoms[k]),
                }
            }
        }
        for (i, slot) in atom_map.iter_mut().enumerate() {
            if slot.is_none() {
                let id = self.atoms.len();
                self.atoms.push(*frag.atom(i));
                self.parent.push(id);
                *slot = Some(id);
            }
        }
        let atom = |i: usize| atom_map[i].expect("mapped");
        for (i, b) in frag.bonds().iter().enumerate() {
            if bond_map[i].is_none() {
                bond_map[i] = Some(self.bonds.len());
                self.bonds.push((atom(b.atoms[0]), atom(b.atoms[1]), b.order));
            }
        }
        for nt in &rule.nonterminals {
            let attachments = nt
                .attachments
                .iter()
                .map(|a| (bond_map[a.bond].expect("mapped"), [atom(a.atoms[0]), atom(a.atoms[1])]))
                .collect();
            self.open.push_back(OpenNonterminal { attachments, depth: depth + 1 });
        }
    }
}

/// Materializes one atom per unification class and checks structure and
/// valence.
pub fn hypergraph_to_molecule(state: &DerivationState) -> Result<MolecularGraph, RejectReason> {
    if !state.open.is_empty() {
        return Err(RejectReason::DeadEnd);
    }
    let mut s = state.clone();
    let n = s.atoms.len();
    let mut index = alloc::vec![usize::MAX; n];
    let mut atoms = Vec::new();
    for i in 0..n {
        let r = s.find(i);
        if index[r] == usize::MAX {
            index[r] = atoms.len();
            atoms.push(s.atoms[r]);
        }
        index[i] = index[r];
    }
    let bonds = s.bonds.iter().map(|&(a, b, o)| Bond::new(index[a], index[b], o)).collect();
    let g = MolecularGraph::new(atoms, bonds).map_err(|_| RejectReason::ValenceViolation)?;
    g.check_valence().map_err(|_| RejectReason::ValenceViolation)?;
    Ok(g)
}

/// A successful derivation with the grammar rule indices used, in order.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Sample {
    pub molecule: MolecularGraph,
    pub trace: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Rejected {
    pub reason: RejectReason,
    pub trace: Vec<usize>,
}

fn pick<R: Rng>(grammar: &Grammar, candidates: &[usize], rng: &mut R) -> Option<usize> {
    let total: u64 = candidates.iter().map(|&i| grammar.rules[i].count).sum();
    if total == 0 {
        return None;
    }
    let mut x = rng.random_range(0..total);
    for &i in candidates {
        let c = grammar.rules[i].count;
        if x < c {
            return Some(i);
        }
        x -= c;
    }
    None
}

/// One derivation from the start label. At every step a rule whose
/// left-hand arity matches is chosen with probability proportional to its
/// count; open nonterminals are expanded first-in first-out.
pub fn sample(grammar: &Grammar, seed: u64, limits: Limits) -> Result<Sample, Rejected> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut trace = Vec::new();
    let reject = |reason, trace| Err(Rejected { reason, trace });
    let Some(start) = pick(grammar, &grammar.with_lhs(0), &mut rng) else {
        return reject(RejectReason::DeadEnd, trace);
    };
    let mut state = DerivationState::new();
    state.apply(&grammar.rules[start].rule, &[], 0);
    trace.push(start);
    while let Some(nt) = state.open.pop_front() {
        if nt.depth > limits.max_depth {
            return reject(RejectReason::DepthExceeded, trace);
        }
        let Some(r) = pick(grammar, &grammar.with_lhs(nt.attachments.len()), &mut rng) else {
            return reject(RejectReason::DeadEnd, trace);
        };
        state.apply(&grammar.rules[r].rule, &nt.attachments, nt.depth);
        trace.push(r);
        if state.bond_count() > limits.max_bonds {
            return reject(RejectReason::SizeExceeded, trace);
        }
    }
    match hypergraph_to_molecule(&state) {
        Ok(molecule) => Ok(Sample { molecule, trace }),
        Err(reason) => reject(reason, trace),
    }
}

/// Outcome of sampling until acceptance for one output slot.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SlotOutcome {
    /// The accepted sample and the seed that produced it.
    pub accepted: Option<(u64, Sample)>,
    /// Rejections before acceptance, with their seeds.
    pub rejections: Vec<(u64, RejectReason)>,
}

/// Samples slot `index` of a batch: attempt `k` uses
/// `derive_seed(derive_seed(root_seed, index), k)`; gives up after
/// `max_attempts` rejections.
pub fn sample_slot(grammar: &Grammar, root_seed: u64, index: u64, limits: Limits, max_attempts: usize) -> SlotOutcome {
    let stream = derive_seed(root_seed, index);
    let mut rejections = Vec::new();
    for k in 0..max_attempts as u64 {
        let seed = derive_seed(stream, k);
        match sample(grammar, seed, limits) {
            Ok(s) => return SlotOutcome { accepted: Some((seed, s)), rejections },
            Err(r) => rejections.push((seed, r.reason)),
        }
    }
    SlotOutcome { accepted: None, rejections }
}

/// Re-derives a molecule from its own minimal grammar, expanding each
/// nonterminal with the rule recorded at extraction.
pub fn derive_msg(msg: &Msg) -> Result<MolecularGraph, RejectReason> {
    let mut state = DerivationState::new();
    let mut pending: VecDeque<usize> = VecDeque::new();
    state.apply(&msg.rules[0], &[], 0);
    pending.extend(msg.derivation[0].iter().copied());
    while let Some(nt) = state.open.pop_front() {
        let r = pending.pop_front().ok_or(RejectReason::DeadEnd)?;
        let rule = &msg.rules[r];
        if rule.lhs != nt.attachments.len() {
            return Err(RejectReason::DeadEnd);
        }
        state.apply(rule, &nt.attachments, nt.depth);
        pending.extend(msg.derivation[r].iter().copied());
    }
    hypergraph_to_molecule(&state)
}
