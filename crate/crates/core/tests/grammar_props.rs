mod common;

use std::collections::BTreeMap;

use common::{random_molecule, shuffled, CORPUS};
use molgrammar_core::canon::{isomorphic, molecule_key};
use molgrammar_core::decompose::decompose;
use molgrammar_core::generate::{derive_msg, sample, Limits};
use molgrammar_core::hrg::{canonicalize, extract_rules, partial_valence_ok, pool, Grammar, Msg};
use molgrammar_core::molecule::{parse_smiles, MolecularGraph};
use molgrammar_core::oracle::{HeuristicOracle, RandomOracle};
use proptest::prelude::*;
use statrs::distribution::{ChiSquared, ContinuousCDF};

fn msg_of(g: &MolecularGraph, seed: u64) -> Msg {
    let d = decompose(g, &RandomOracle, seed).unwrap();
    extract_rules(g, &d).unwrap()
}

fn corpus_grammar() -> Grammar {
    let msgs: Vec<Msg> = CORPUS
        .iter()
        .enumerate()
        .map(|(i, s)| {
            let g = parse_smiles(s).unwrap();
            extract_rules(&g, &decompose(&g, &HeuristicOracle::default(), i as u64).unwrap()).unwrap()
        })
        .collect();
    pool(msgs.iter().map(|m| m.rules.as_slice()))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(150))]

    #[test]
    fn msg_round_trip(seed in any::<u64>()) {
        let g = random_molecule(seed, 12, 3);
        let msg = msg_of(&g, seed);
        for r in &msg.rules {
            prop_assert!(partial_valence_ok(r));
        }
        let back = derive_msg(&msg).unwrap();
        prop_assert!(isomorphic(&g, &back));
    }

    #[test]
    fn relabeling_keeps_keys_and_round_trip(seed in any::<u64>(), shuffle in any::<u64>()) {
        let g = random_molecule(seed, 10, 2);
        let h = g.permute_atoms(&shuffled(g.atom_count(), shuffle));
        prop_assert_eq!(molecule_key(&g), molecule_key(&h));
        let msg = msg_of(&h, seed);
        for r in &msg.rules {
            prop_assert_eq!(&canonicalize(r), &r.key);
        }
        prop_assert!(isomorphic(&g, &derive_msg(&msg).unwrap()));
    }

    #[test]
    fn sampling_is_deterministic_and_valid(seed in any::<u64>()) {
        let grammar = corpus_grammar();
        let a = sample(&grammar, seed, Limits::default());
        prop_assert_eq!(&a, &sample(&grammar, seed, Limits::default()));
        if let Ok(s) = a {
            prop_assert!(s.molecule.check_valence().is_ok());
            prop_assert!(s.molecule.is_connected());
        }
    }
}

#[test]
fn molecule_key_stable_over_500_relabelings() {
    for s in CORPUS {
        let g = parse_smiles(s).unwrap();
        let key = molecule_key(&g);
        for k in 0..500 / CORPUS.len() as u64 + 1 {
            assert_eq!(molecule_key(&g.permute_atoms(&shuffled(g.atom_count(), k))), key, "{s}");
        }
    }
}

#[test]
fn equal_rule_keys_mean_isomorphic_fragments() {
    let grammar = corpus_grammar();
    let mut by_key: BTreeMap<String, Vec<MolecularGraph>> = BTreeMap::new();
    for (i, s) in CORPUS.iter().enumerate() {
        let g = parse_smiles(s).unwrap();
        for seed in 0..4 {
            for r in msg_of(&g, seed + i as u64 * 10).rules {
                by_key.entry(r.key.clone()).or_default().push(r.fragment);
            }
        }
    }
    for (key, frags) in &by_key {
        for f in &frags[1..] {
            assert!(isomorphic(&frags[0], f), "{key}");
        }
    }
    assert!(grammar.has_start_rule());
}

#[test]
fn rule_choice_is_count_proportional() {
    let grammar = corpus_grammar();
    let mut picks: BTreeMap<usize, BTreeMap<usize, u64>> = BTreeMap::new();
    for seed in 0..10_000u64 {
        let trace = match sample(&grammar, seed, Limits::default()) {
            Ok(s) => s.trace,
            Err(r) => r.trace,
        };
        for r in trace {
            *picks.entry(grammar.rules[r].rule.lhs).or_default().entry(r).or_default() += 1;
        }
    }
    let mut tested = 0;
    for (arity, seen) in &picks {
        let candidates = grammar.with_lhs(*arity);
        if candidates.len() < 2 {
            continue;
        }
        let n: u64 = seen.values().sum();
        let total: u64 = candidates.iter().map(|&r| grammar.rules[r].count).sum();
        let stat: f64 = candidates
            .iter()
            .map(|&r| {
                let expected = n as f64 * grammar.rules[r].count as f64 / total as f64;
                let observed = *seen.get(&r).unwrap_or(&0) as f64;
                (observed - expected).powi(2) / expected
            })
            .sum();
        let df = (candidates.len() - 1) as f64;
        let p = 1.0 - ChiSquared::new(df).unwrap().cdf(stat);
        assert!(p > 0.01, "arity {arity}: chi2 {stat} df {df} p {p}");
        tested += 1;
    }
    assert!(tested >= 1);
}
