//! Hyperedge-replacement production rules read off a rooted clique tree,
//! their canonical keys, and counted grammars.

use alloc::collections::BTreeMap;
use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;
use core::fmt::Write;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::canon::{canonical_form, LabeledGraph};
use crate::decompose::Decomposition;
use crate::molecule::{Bond, MolecularGraph};

/// A fragment bond used as an anchor, with its atoms in fusion order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Attachment {
    /// Local bond index in the rule fragment.
    pub bond: usize,
    /// The bond's two local atoms, oriented.
    pub atoms: [usize; 2],
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Nonterminal {
    /// Ordered attachment bonds; the label is the arity `attachments.len()`.
    pub attachments: Vec<Attachment>,
}

impl Nonterminal {
    pub fn arity(&self) -> usize {
        self.attachments.len()
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ProductionRule {
    /// Left-hand side label: the number of external nodes, 0 for the start symbol.
    pub lhs: usize,
    pub fragment: MolecularGraph,
    pub externals: Vec<Attachment>,
    pub nonterminals: Vec<Nonterminal>,
    /// Base hyperedges assigned to this rule's tree node, as local bond lists.
    /// Informational; not part of the key.
    #[serde(default)]
    pub hyperedges: Vec<Vec<usize>>,
    pub key: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum HrgError {
    #[error("tree node {child} shares no bond with its parent {parent}")]
    DisconnectedSharing { parent: usize, child: usize },
}

/// The rules of one molecule plus how they derive it: `derivation[i][j]` is the
/// rule expanding nonterminal `j` of rule `i`. Rule 0 is the start rule.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Msg {
    pub rules: Vec<ProductionRule>,
    pub derivation: Vec<Vec<usize>>,
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord)]
enum Vertex {
    Atom { z: u8, charge: i8, h: i16 },
    Bond { order: u8, external: bool },
    External(u16),
    Nonterminal(u16),
    Slot(u16),
}

const FIRST: u8 = 1;
const SECOND: u8 = 2;

struct RuleGraph {
    graph: LabeledGraph<Vertex>,
    bond_vertex: usize,
}

/// Fragment atoms (vertices `0..n`) and bonds (`n..n+m`), with external bonds
/// flagged. With `tags`, externals and nonterminal attachments are added as
/// positioned vertices linked to their bond and oriented atoms.
fn rule_graph(
    fragment: &MolecularGraph,
    external_bonds: &[usize],
    tags: Option<(&[Attachment], &[Nonterminal])>,
) -> RuleGraph {
    let n = fragment.atom_count();
    let mut labels: Vec<Vertex> = fragment
        .atoms()
        .iter()
        .map(|a| Vertex::Atom {
            z: a.element.atomic_number(),
            charge: a.charge,
            h: a.explicit_h.map_or(-1, i16::from),
        })
        .collect();
    let mut edges = Vec::new();
    for (i, b) in fragment.bonds().iter().enumerate() {
        labels.push(Vertex::Bond { order: b.order.valence(), external: external_bonds.contains(&i) });
        edges.push((b.atoms[0], n + i, 0));
        edges.push((b.atoms[1], n + i, 0));
    }
    if let Some((externals, nonterminals)) = tags {
        let attach = |labels: &mut Vec<Vertex>, edges: &mut Vec<(usize, usize, u8)>, label, a: &Attachment| {
            let v = labels.len();
            labels.push(label);
            edges.push((v, n + a.bond, 0));
            edges.push((v, a.atoms[0], FIRST));
            edges.push((v, a.atoms[1], SECOND));
            v
        };
        for (i, e) in externals.iter().enumerate() {
            attach(&mut labels, &mut edges, Vertex::External(i as u16), e);
        }
        for nt in nonterminals {
            let hub = labels.len();
            labels.push(Vertex::Nonterminal(nt.arity() as u16));
            for (i, a) in nt.attachments.iter().enumerate() {
                let v = attach(&mut labels, &mut edges, Vertex::Slot(i as u16), a);
                edges.push((hub, v, 0));
            }
        }
    }
    RuleGraph { graph: LabeledGraph { labels, edges }, bond_vertex: n }
}

/// Canonical key: invariant under renumbering of the fragment's atoms and
/// bonds and under reordering of nonterminals; external order and every
/// attachment orientation are part of the key.
pub fn canonicalize(rule: &ProductionRule) -> String {
    let ext: Vec<usize> = rule.externals.iter().map(|e| e.bond).collect();
    let rg = rule_graph(&rule.fragment, &ext, Some((&rule.externals, &rule.nonterminals)));
    let form = canonical_form(&rg.graph);
    let mut key = format!("{}#", rule.lhs);
    key.push_str(&form.key_with(|v, s| {
        let _ = match v {
            Vertex::Atom { z, charge, h } => write!(s, "a{z}.{charge}.{h}"),
            Vertex::Bond { order, external } => write!(s, "b{order}{}", if *external { "x" } else { "" }),
            Vertex::External(i) => write!(s, "e{i}"),
            Vertex::Nonterminal(k) => write!(s, "n{k}"),
            Vertex::Slot(i) => write!(s, "s{i}"),
        };
    }));
    key
}

/// Orders a child's external bonds and orients them using the canonical form
/// of the child fragment alone, so equal fragments get equal anchor layouts.
fn external_layout(fragment: &MolecularGraph, external_bonds: &[usize]) -> Vec<Attachment> {
    let rg = rule_graph(fragment, external_bonds, None);
    let form = canonical_form(&rg.graph);
    let mut pos = vec![0usize; form.order.len()];
    for (i, &v) in form.order.iter().enumerate() {
        pos[v] = i;
    }
    let mut out: Vec<Attachment> = external_bonds
        .iter()
        .map(|&b| {
            let [x, y] = fragment.bond(b).atoms;
            let atoms = if pos[x] <= pos[y] { [x, y] } else { [y, x] };
            Attachment { bond: b, atoms }
        })
        .collect();
    out.sort_by_key(|a| pos[rg.bond_vertex + a.bond]);
    out
}

struct NodeView {
    /// Global bond IDs, sorted; local bond `i` is `bonds[i]`.
    bonds: Vec<usize>,
    /// Global atom IDs, sorted; local atom `i` is `atoms[i]`.
    atoms: Vec<usize>,
    fragment: MolecularGraph,
}

impl NodeView {
    fn local_bond(&self, b: usize) -> usize {
        self.bonds.binary_search(&b).expect("bond in node")
    }

    fn local_atom(&self, a: usize) -> usize {
        self.atoms.binary_search(&a).expect("atom in node")
    }
}

/// One rule per tree node, listed in breadth-first order from the root.
pub fn extract_rules(g: &MolecularGraph, d: &Decomposition) -> Result<Msg, HrgError> {
    let tree = &d.tree;
    let order = tree.bfs_order();
    let mut rule_of = vec![0usize; tree.nodes.len()];
    for (i, &node) in order.iter().enumerate() {
        rule_of[node] = i;
    }
    let views: Vec<NodeView> = tree
        .nodes
        .iter()
        .map(|c| NodeView {
            bonds: c.members.clone(),
            atoms: g.atoms_of_bonds(&c.members),
            fragment: c.fragment(g),
        })
        .collect();

    // anchor layout per non-root node, in global IDs
    let mut layout: Vec<Vec<(usize, [usize; 2])>> = vec![Vec::new(); tree.nodes.len()];
    for &(parent, child) in &tree.tree_edges {
        let shared = tree.nodes[child].shared(&tree.nodes[parent]);
        if shared.is_empty() {
            return Err(HrgError::DisconnectedSharing { parent, child });
        }
        let v = &views[child];
        let local: Vec<usize> = shared.iter().map(|&b| v.local_bond(b)).collect();
        layout[child] = external_layout(&v.fragment, &local)
            .into_iter()
            .map(|a| (v.bonds[a.bond], [v.atoms[a.atoms[0]], v.atoms[a.atoms[1]]]))
            .collect();
    }

    let to_local = |v: &NodeView, (b, [x, y]): (usize, [usize; 2])| Attachment {
        bond: v.local_bond(b),
        atoms: [v.local_atom(x), v.local_atom(y)],
    };
    let mut rules = Vec::with_capacity(order.len());
    let mut derivation = Vec::with_capacity(order.len());
    for &node in &order {
        let v = &views[node];
        let externals: Vec<Attachment> = layout[node].iter().map(|&a| to_local(v, a)).collect();
        let children = tree.children(node);
        let nonterminals = children
            .iter()
            .map(|&c| Nonterminal { attachments: layout[c].iter().map(|&a| to_local(v, a)).collect() })
            .collect();
        derivation.push(children.iter().map(|&c| rule_of[c]).collect());
        let hyperedges = d
            .assignment
            .iter()
            .enumerate()
            .filter(|&(_, &n)| n == node)
            .map(|(k, _)| d.hypergraph.hyperedges[k].bonds.iter().map(|&b| v.local_bond(b)).collect())
            .collect();
        let mut rule = ProductionRule {
            lhs: externals.len(),
            fragment: v.fragment.clone(),
            externals,
            nonterminals,
            hyperedges,
            key: String::new(),
        };
        rule.key = canonicalize(&rule);
        rules.push(rule);
    }
    Ok(Msg { rules, derivation })
}

/// The start rule for a bond-free molecule: its single atom.
pub fn atom_only_msg(g: &MolecularGraph) -> Msg {
    let fragment = MolecularGraph::new(g.atoms().to_vec(), Vec::<Bond>::new()).expect("atoms only");
    let mut rule = ProductionRule {
        lhs: 0,
        fragment,
        externals: Vec::new(),
        nonterminals: Vec::new(),
        hyperedges: Vec::new(),
        key: String::new(),
    };
    rule.key = canonicalize(&rule);
    Msg { rules: vec![rule], derivation: vec![Vec::new()] }
}

/// True when no fragment atom exceeds its maximum valence counting only the
/// fragment's own bonds.
pub fn partial_valence_ok(rule: &ProductionRule) -> bool {
    (0..rule.fragment.atom_count()).all(|i| rule.fragment.atom_valence_ok(i))
}

pub const GRAMMAR_FORMAT: &str = "molgrammar-hrg";
pub const GRAMMAR_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CountedRule {
    #[serde(flatten)]
    pub rule: ProductionRule,
    pub count: u64,
}

/// Rules keyed by canonical key with occurrence counts, sorted by key.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Grammar {
    pub format: String,
    pub version: u32,
    pub rules: Vec<CountedRule>,
}

impl Default for Grammar {
    fn default() -> Self {
        Grammar { format: GRAMMAR_FORMAT.into(), version: GRAMMAR_VERSION, rules: Vec::new() }
    }
}

impl Grammar {
    pub fn len(&self) -> usize {
        self.rules.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rules.is_empty()
    }

    pub fn total_count(&self) -> u64 {
        self.rules.iter().map(|r| r.count).sum()
    }

    pub fn count_of(&self, key: &str) -> u64 {
        self.rules.iter().find(|r| r.rule.key == key).map_or(0, |r| r.count)
    }

    pub fn has_start_rule(&self) -> bool {
        self.rules.iter().any(|r| r.rule.lhs == 0)
    }

    /// Indices of rules whose left-hand side has the given arity.
    pub fn with_lhs(&self, arity: usize) -> Vec<usize> {
        (0..self.rules.len()).filter(|&i| self.rules[i].rule.lhs == arity).collect()
    }
}

/// Multiset union of rule lists by canonical key. The first occurrence of a
/// key is kept as its representative.
pub fn pool<'a, I>(msgs: I) -> Grammar
where
    I: IntoIterator<Item = &'a [ProductionRule]>,
{
    // Rules sharing a key may differ in atom order; the one with the smallest
    // debug rendering represents them so the result ignores input order.
    let mut by_key: BTreeMap<String, (String, CountedRule)> = BTreeMap::new();
    for rules in msgs {
        for r in rules {
            let repr = format!("{r:?}");
            let slot = by_key
                .entry(r.key.clone())
                .or_insert_with(|| (repr.clone(), CountedRule { rule: r.clone(), count: 0 }));
            if repr < slot.0 {
                slot.1.rule = r.clone();
                slot.0 = repr;
            }
            slot.1.count += 1;
        }
    }
    Grammar { rules: by_key.into_values().map(|(_, r)| r).collect(), ..Grammar::default() }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::decompose::decompose;
    use crate::molecule::parse_smiles;
    use crate::oracle::{HeuristicOracle, HeuristicPolicy};

    fn msg(s: &str, oracle: &HeuristicOracle) -> Msg {
        let g = parse_smiles(s).unwrap();
        let d = decompose(&g, oracle, 3).unwrap();
        extract_rules(&g, &d).unwrap()
    }

    #[test]
    fn pool_ignores_input_order() {
        let g = parse_smiles("C=CC(=O)OCC1CCCCC1").unwrap();
        let msgs: Vec<Msg> = (0..6)
            .map(|seed| extract_rules(&g, &decompose(&g, &crate::oracle::RandomOracle, seed).unwrap()).unwrap())
            .collect();
        let forward = pool(msgs.iter().map(|m| m.rules.as_slice()));
        let backward = pool(msgs.iter().rev().map(|m| m.rules.as_slice()));
        assert_eq!(forward, backward);
    }

    #[test]
    fn single_node_tree() {
        let m = msg("C1CC1", &HeuristicOracle::default());
        assert_eq!(m.rules.len(), 1);
        assert_eq!(m.rules[0].lhs, 0);
        assert!(m.rules[0].externals.is_empty() && m.rules[0].nonterminals.is_empty());
    }

    #[test]
    fn butane_root_and_child() {
        let m = msg("CCCC", &HeuristicOracle::new(HeuristicPolicy::default().without_merge()));
        assert_eq!(m.rules.len(), 2);
        assert_eq!(m.rules[0].lhs, 0);
        assert_eq!(m.rules[0].nonterminals.len(), 1);
        assert_eq!(m.rules[0].nonterminals[0].arity(), 1);
        assert_eq!(m.rules[1].lhs, 1);
        assert_eq!(m.rules[1].externals.len(), 1);
        assert_eq!(m.derivation, vec![vec![1], vec![]]);
        // the two halves of butane are the same rule shape apart from the nonterminal
        assert_ne!(m.rules[0].key, m.rules[1].key);
    }

    #[test]
    fn relabeled_molecule_same_keys() {
        let oracle = HeuristicOracle::default();
        let mut a: Vec<String> = msg("OCC(=O)C1CC1C", &oracle).rules.into_iter().map(|r| r.key).collect();
        let mut b: Vec<String> = msg("CC1CC1C(=O)CO", &oracle).rules.into_iter().map(|r| r.key).collect();
        a.sort();
        b.sort();
        assert_eq!(a, b);
    }

    #[test]
    fn bond_order_changes_key() {
        let oracle = HeuristicOracle::default();
        let a = msg("CC", &oracle);
        let b = msg("C=C", &oracle);
        assert_ne!(a.rules[0].key, b.rules[0].key);
    }

    #[test]
    fn pooling_counts() {
        let oracle = HeuristicOracle::default();
        let a = msg("CCO", &oracle);
        let b = msg("OCC", &oracle);
        let g = pool([a.rules.as_slice(), b.rules.as_slice()]);
        assert_eq!(g.len(), 1);
        assert_eq!(g.rules[0].count, 2);
        assert!(pool(core::iter::empty::<&[ProductionRule]>()).is_empty());
    }

    #[test]
    fn rules_respect_partial_valence() {
        let m = msg("C=CC(=O)OC1CC2CC1C2", &HeuristicOracle::default());
        assert!(m.rules.iter().all(partial_valence_ok));
    }
}
