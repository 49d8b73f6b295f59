mod common;

use common::{random_molecule, shuffled};
use molgrammar_core::eval::evaluate;
use molgrammar_core::molecule::{parse_smiles, write_smiles};
use proptest::prelude::*;

fn sample_set(seeds: &[u64]) -> Vec<String> {
    seeds
        .iter()
        .map(|&s| match s % 7 {
            // a share of junk strings and duplicates
            0 => "C(C".to_owned(),
            1 => "CC".to_owned(),
            _ => write_smiles(&random_molecule(s, 8, 2)),
        })
        .collect()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(80))]

    #[test]
    fn metrics_are_bounded_and_order_free(seeds in prop::collection::vec(any::<u64>(), 1..25), shuffle in any::<u64>()) {
        let samples = sample_set(&seeds);
        let train = ["CC", "CCO", "C=CC(=O)OC"];
        let pattern = parse_smiles("C=C").unwrap();
        let r = evaluate(&samples, &train, &pattern, 0).unwrap();
        for f in [r.valid, r.unique, r.novelty, r.diversity, r.membership.unwrap()] {
            prop_assert!((0.0..=1.0).contains(&f));
        }
        let order = shuffled(samples.len(), shuffle);
        let permuted: Vec<&String> = order.iter().map(|&i| &samples[i]).collect();
        prop_assert_eq!(r, evaluate(&permuted, &train, &pattern, 0).unwrap());
    }
}
