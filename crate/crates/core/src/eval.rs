//! Generation metrics over a sample set.

use alloc::collections::{BTreeMap, BTreeSet};
use alloc::string::String;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::canon::molecule_key;
use crate::molecule::{contains_substructure, fingerprint, parse_smiles, tanimoto, MolecularGraph};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum EvalError {
    #[error("training set is empty")]
    EmptyTrainingSet,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricReport {
    pub sample_count: usize,
    pub rejected_count: usize,
    pub valid: f64,
    /// Distinct canonical molecules over valid samples.
    pub unique: f64,
    /// Distinct molecules absent from the training set, over distinct.
    pub novelty: f64,
    /// Mean pairwise Tanimoto distance over distinct valid molecules.
    pub diversity: f64,
    /// `None` when the pattern is empty.
    pub membership: Option<f64>,
}

fn valid_molecule(smiles: &str) -> Option<MolecularGraph> {
    let g = parse_smiles(smiles).ok()?;
    (g.atom_count() > 0 && g.check_valence().is_ok()).then_some(g)
}

fn ratio(num: usize, den: usize) -> f64 {
    if den == 0 {
        0.0
    } else {
        num as f64 / den as f64
    }
}

/// `rejected_count` is the number of derivation attempts that never produced
/// a sample and is reported unchanged.
pub fn evaluate<S: AsRef<str>, T: AsRef<str>>(
    samples: &[S],
    train: &[T],
    pattern: &MolecularGraph,
    rejected_count: usize,
) -> Result<MetricReport, EvalError> {
    if train.is_empty() {
        return Err(EvalError::EmptyTrainingSet);
    }
    let train_keys: BTreeSet<String> =
        train.iter().filter_map(|t| valid_molecule(t.as_ref())).map(|g| molecule_key(&g)).collect();

    let mut valid = 0;
    let mut distinct: BTreeMap<String, MolecularGraph> = BTreeMap::new();
    for s in samples {
        if let Some(g) = valid_molecule(s.as_ref()) {
            valid += 1;
            distinct.entry(molecule_key(&g)).or_insert(g);
        }
    }
    let novel = distinct.keys().filter(|k| !train_keys.contains(*k)).count();
    let fps: Vec<_> = distinct.values().map(fingerprint).collect();
    let mut total = 0.0;
    let mut pairs = 0usize;
    for i in 0..fps.len() {
        for j in i + 1..fps.len() {
            total += 1.0 - tanimoto(&fps[i], &fps[j]);
            pairs += 1;
        }
    }
    let membership = (pattern.atom_count() > 0).then(|| {
        ratio(distinct.values().filter(|g| contains_substructure(g, pattern)).count(), distinct.len())
    });
    Ok(MetricReport {
        sample_count: samples.len(),
        rejected_count,
        valid: ratio(valid, samples.len()),
        unique: ratio(distinct.len(), valid),
        novelty: ratio(novel, distinct.len()),
        diversity: if pairs == 0 { 0.0 } else { total / pairs as f64 },
        membership,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn empty() -> MolecularGraph {
        MolecularGraph::new(Vec::new(), Vec::new()).unwrap()
    }

    #[test]
    fn samples_equal_train() {
        let train = ["CCO", "CC=O", "OCC"];
        let r = evaluate(&train, &train, &empty(), 0).unwrap();
        assert_eq!(r.valid, 1.0);
        assert!((r.unique - 2.0 / 3.0).abs() < 1e-12);
        assert_eq!(r.novelty, 0.0);
        assert_eq!(r.membership, None);
    }

    #[test]
    fn identical_samples_have_no_diversity() {
        let r = evaluate(&["C1=CC=CC=C1"; 5], &["C"], &empty(), 0).unwrap();
        assert_eq!(r.diversity, 0.0);
        assert_eq!(r.novelty, 1.0);
    }

    #[test]
    fn invalid_samples() {
        let r = evaluate(&["C(", "C(C)(C)(C)(C)C", "CC"], &["C"], &empty(), 2).unwrap();
        assert!((r.valid - 1.0 / 3.0).abs() < 1e-12);
        assert_eq!(r.unique, 1.0);
        assert_eq!(r.rejected_count, 2);
    }

    #[test]
    fn acrylate_membership() {
        let pattern = parse_smiles("C=CC(=O)O").unwrap();
        let r = evaluate(&["C=CC(=O)OC", "CCCC"], &["C"], &pattern, 0).unwrap();
        assert_eq!(r.membership, Some(0.5));
    }

    #[test]
    fn empty_train_is_error() {
        assert!(evaluate::<&str, &str>(&["C"], &[], &empty(), 0).is_err());
    }
}
