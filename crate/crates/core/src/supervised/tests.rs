use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::*;
use crate::corpus::{Document, LabelSet, Vocabulary};
use crate::model::{init_state, Hyperparameters};
use crate::sampler::sweep;

/// 1-based helpers for readability.
fn zero(xs: &[usize]) -> Vec<usize> {
    xs.iter().map(|x| x - 1).collect()
}

fn one(xs: &[usize]) -> Vec<usize> {
    xs.iter().map(|x| x + 1).collect()
}

fn order(xs: &[usize]) -> LabeledDocumentOrder {
    LabeledDocumentOrder { pi_prime: zero(xs) }
}

#[test]
fn collapse_examples() {
    assert_eq!(one(&collapse_labels(&zero(&[2, 1, 1, 5, 3, 3, 3])).pi_prime), vec![2, 1, 5, 3]);
    assert_eq!(one(&collapse_labels(&zero(&[1, 1, 2, 2])).pi_prime), vec![1, 2]);
    assert_eq!(one(&collapse_labels(&zero(&[1, 2, 1, 1])).pi_prime), vec![2, 1]);
    // Equal runs: the first one wins.
    assert_eq!(one(&collapse_labels(&zero(&[1, 2, 1])).pi_prime), vec![1, 2]);
    assert_eq!(collapse_labels(&[]).num_labels(), 0);
}

#[test]
fn precedence_counts_and_edges() {
    let orders = [order(&[3, 1, 2]), order(&[3, 1, 2]), order(&[3, 2])];
    let g = PrecedenceGraph::build(&orders, 3);
    assert_eq!(g.g[2][0], 2);
    assert_eq!(g.g[2][1], 3);
    assert_eq!(g.g[0][1], 2);
    assert!((0..3).all(|i| g.g[i][i] == 0));
    assert!(g.has_edge(2, 0) && !g.has_edge(0, 2));
    let tied = PrecedenceGraph::build(&[order(&[1, 2]), order(&[2, 1])], 2);
    assert!(tied.has_edge(0, 1) && tied.has_edge(1, 0));
}

#[test]
fn canonical_examples() {
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    let same = vec![zero(&[1, 2, 3]); 4];
    assert_eq!(derive_canonical(&same, 3, &mut rng).to_one_based(), vec![1, 2, 3]);
    let docs = vec![zero(&[3, 1, 2]), zero(&[3, 1, 2]), zero(&[3, 2])];
    for _ in 0..20 {
        assert_eq!(derive_canonical(&docs, 3, &mut rng).to_one_based(), vec![3, 1, 2]);
    }
    let conflicting = vec![zero(&[1, 2]), zero(&[2, 1])];
    let mut seen = [false; 2];
    for _ in 0..50 {
        let p = derive_canonical(&conflicting, 2, &mut rng).to_one_based();
        seen[usize::from(p == vec![2, 1])] = true;
    }
    assert_eq!(seen, [true, true]);
}

#[test]
fn unobserved_labels_are_appended() {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let docs = vec![zero(&[4, 2]), zero(&[4, 2, 2])];
    assert_eq!(derive_canonical(&docs, 5, &mut rng).to_one_based(), vec![4, 2, 1, 3, 5]);
    assert_eq!(derive_canonical(&[], 3, &mut rng).to_one_based(), vec![1, 2, 3]);
}

#[test]
fn cycles_of_any_length_are_broken() {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let docs = vec![zero(&[1, 2]), zero(&[2, 3]), zero(&[3, 1]), zero(&[4, 1])];
    for _ in 0..20 {
        let p = derive_canonical(&docs, 4, &mut rng);
        assert_eq!(p.len(), 4);
    }
}

#[test]
fn greedy_insert_examples() {
    let pi0 = Permutation::from_one_based(&[1, 2, 3]).unwrap();
    assert_eq!(greedy_insert(&order(&[2, 1]), &pi0).to_one_based(), vec![2, 1, 3]);
    assert_eq!(greedy_insert(&order(&[3, 1, 2]), &pi0).to_one_based(), vec![3, 1, 2]);
    assert_eq!(greedy_insert(&order(&[]), &pi0), pi0);
    let pi0 = Permutation::from_one_based(&[3, 1, 2]).unwrap();
    assert_eq!(greedy_insert(&order(&[]), &pi0), pi0);
}

#[test]
fn bag_of_labels() {
    assert_eq!(one(&labels_to_u(&zero(&[2, 1, 1, 5, 3, 3, 3]))), vec![1, 1, 2, 3, 3, 3, 5]);
    assert!(labels_to_u(&[]).is_empty());
    assert_eq!(labels_to_u(&[3, 3]), vec![3, 3]);
}

fn labeled_corpus(labels: Vec<Vec<usize>>) -> Corpus {
    Corpus {
        documents: labels
            .into_iter()
            .enumerate()
            .map(|(d, z)| Document {
                id: format!("d{d}"),
                sentences: z.iter().map(|&k| vec![k % 4, (k + d) % 4, 3]).collect(),
                labels: Some(z),
            })
            .collect(),
        vocabulary: Vocabulary::from_words((0..4).map(|i| format!("w{i}")).collect()).unwrap(),
        labels: Some(LabelSet::from_words((1..=3).map(|i| i.to_string()).collect()).unwrap()),
    }
}

#[test]
fn locking_sets_bag_order_and_intents() {
    let corpus = labeled_corpus(vec![zero(&[1, 1, 2]), zero(&[2, 3, 3, 1]), zero(&[3, 1])]);
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let mut state = init_state(&corpus, &Hyperparameters::new(3, 2), &mut rng).unwrap();
    apply_supervision(&mut state, &corpus, &[0, 1], &mut rng).unwrap();
    assert!(state.is_consistent(&corpus));
    let a = &state.assignments.docs[0];
    assert!(a.fixed);
    assert_eq!(one(&a.u), vec![1, 1, 2]);
    assert_eq!(one(&a.pi.as_slice()[..2]), vec![1, 2]);
    assert_eq!(a.z, zero(&[1, 1, 2]));
    for a in &state.assignments.docs[..2] {
        assert_eq!(state.permutation_for(&a.upsilon), a.pi);
    }
    assert!(!state.assignments.docs[2].fixed);

    let before: Vec<_> = state.assignments.docs[..2].to_vec();
    for _ in 0..5 {
        sweep(&corpus, &mut state, &mut rng);
    }
    assert_eq!(&state.assignments.docs[0].z, &before[0].z);
    assert_eq!(&state.assignments.docs[1].u, &before[1].u);
    assert_eq!(&state.assignments.docs[1].upsilon, &before[1].upsilon);
    assert!(state.is_consistent(&corpus));
}

#[test]
fn fully_locked_corpus_is_frozen() {
    let corpus = labeled_corpus(vec![zero(&[1, 2, 1]), zero(&[3, 3, 2])]);
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let mut state = init_state(&corpus, &Hyperparameters::new(3, 2), &mut rng).unwrap();
    apply_supervision(&mut state, &corpus, &[0, 1], &mut rng).unwrap();
    let z = state.intents();
    sweep(&corpus, &mut state, &mut rng);
    assert_eq!(state.intents(), z);
    // Incoherent labels stay as given.
    assert_eq!(z[0], zero(&[1, 2, 1]));
}

#[test]
fn out_of_range_labels_are_rejected() {
    let corpus = labeled_corpus(vec![vec![0, 2]]);
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let mut state = init_state(&corpus, &Hyperparameters::new(2, 2), &mut rng).unwrap();
    assert!(matches!(
        lock_labeled(&mut state, &corpus, &[0]),
        Err(SupervisedError::LabelOutOfRange { label: 2, .. })
    ));
}

#[test]
fn split_file_resolves_ids() {
    let corpus = labeled_corpus(vec![vec![0], vec![1], vec![2]]);
    let split = LabeledSplit {
        labeled_ids: vec!["d2".into(), "d0".into()],
    };
    assert_eq!(split.indices(&corpus).unwrap(), vec![0, 2]);
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("split.json");
    split.save(&path).unwrap();
    assert_eq!(LabeledSplit::load(&path).unwrap(), split);
    let bad = LabeledSplit {
        labeled_ids: vec!["nope".into()],
    };
    assert!(matches!(bad.indices(&corpus), Err(SupervisedError::UnknownDocument(_))));
}
