mod common;

use common::{random_molecule, CORPUS};
use molgrammar_core::decompose::{decompose, replay, validate_tree, Decomposition};
use molgrammar_core::molecule::{parse_smiles, MolecularGraph};
use molgrammar_core::oracle::{
    EdgeElimPolicy, HeuristicOracle, HeuristicPolicy, Oracle, Phase, RandomOracle, RootPolicy,
};
use proptest::prelude::*;

fn oracles() -> Vec<Box<dyn Oracle>> {
    let acrylate = parse_smiles("C=CC(=O)O").unwrap();
    let random_policy =
        HeuristicPolicy { edge_elim: EdgeElimPolicy::Random, root: RootPolicy::Random, ..HeuristicPolicy::default() };
    vec![
        Box::new(HeuristicOracle::default()),
        Box::new(HeuristicOracle::new(HeuristicPolicy::default().without_merge())),
        Box::new(HeuristicOracle::new(HeuristicPolicy::pattern_guided(acrylate))),
        Box::new(HeuristicOracle::new(random_policy)),
        Box::new(RandomOracle),
    ]
}

fn check(g: &MolecularGraph, d: &Decomposition, seed: u64) {
    validate_tree(&d.tree, &d.hypergraph, &d.assignment).unwrap();
    let m = d.log.phase_marks;
    assert!(m.t1 <= m.t2 && m.t2 <= m.t3 && m.t3 < m.t && m.t == d.log.entries.len());
    assert_eq!(d.tree.phase_marks, m);
    let mut last = Phase::Triangulate;
    for (i, e) in d.log.entries.iter().enumerate() {
        assert_eq!(e.step, i);
        assert_eq!(e.phase, m.phase_of(i));
        assert!(e.phase >= last, "phases out of order");
        last = e.phase;
        e.response.validate(&e.request).unwrap();
    }
    assert_eq!(last, Phase::Root);
    let again = replay(g, &d.log, seed).unwrap();
    assert_eq!(&again, d);
}

#[test]
fn corpus_decomposes_with_every_oracle() {
    for s in CORPUS {
        let g = parse_smiles(s).unwrap();
        for (k, o) in oracles().iter().enumerate() {
            let d = decompose(&g, o, k as u64).unwrap_or_else(|e| panic!("{s} oracle {k}: {e}"));
            check(&g, &d, k as u64);
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(150))]

    #[test]
    fn random_molecules_give_valid_trees(seed in any::<u64>()) {
        let g = random_molecule(seed, 12, 3);
        for o in oracles() {
            let d = decompose(&g, &o, seed).unwrap();
            check(&g, &d, seed);
        }
    }

    #[test]
    fn heuristic_oracle_is_deterministic(seed in any::<u64>()) {
        let g = random_molecule(seed, 12, 3);
        let o = HeuristicOracle::default();
        prop_assert_eq!(decompose(&g, &o, seed).unwrap(), decompose(&g, &o, seed).unwrap());
    }
}
