use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use statrs::function::gamma::ln_gamma;

use super::*;
use crate::corpus::{Document, Vocabulary};
use crate::model::{init_state, DocAssignment, Hyperparameters};
use crate::permutation::{Dispersion, InversionVector};

fn toy_corpus(num_docs: usize, sentences: usize, tokens: usize, vocab: usize, seed: u64) -> Corpus {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    Corpus {
        documents: (0..num_docs)
            .map(|d| Document {
                id: format!("d{d}"),
                sentences: (0..sentences)
                    .map(|_| (0..tokens).map(|_| rng.random_range(0..vocab)).collect())
                    .collect(),
                labels: None,
            })
            .collect(),
        vocabulary: Vocabulary::from_words((0..vocab).map(|i| format!("w{i}")).collect()).unwrap(),
        labels: None,
    }
}

fn dm(counts: &[f64], conc: f64) -> f64 {
    let n: f64 = counts.iter().sum();
    let a = counts.len() as f64 * conc;
    ln_gamma(a) - ln_gamma(n + a) + counts.iter().map(|&c| ln_gamma(c + conc) - ln_gamma(conc)).sum::<f64>()
}

fn gmm_lp(v: usize, rho: f64, n: usize) -> f64 {
    if rho == 0.0 {
        -(n as f64).ln()
    } else {
        let psi = (1.0 - (-(n as f64) * rho).exp()) / (1.0 - (-rho).exp());
        -rho * v as f64 - psi.ln()
    }
}

/// Intent sequence for a bag and inversion vector under the identity
/// canonical order, built from scratch.
fn intents_of(u: &[usize], upsilon: &[usize], k: usize) -> Vec<usize> {
    let mut order: Vec<usize> = Vec::new();
    for j in (0..k).rev() {
        order.insert(upsilon.get(j).copied().unwrap_or(0), j);
    }
    order
        .iter()
        .flat_map(|&x| std::iter::repeat_n(x, u.iter().filter(|&&y| y == x).count()))
        .collect()
}

/// Collapsed log joint of all discrete variables given the dispersions.
fn brute_joint(corpus: &Corpus, docs: &[DocAssignment], h: &Hyperparameters, rho: &[f64]) -> f64 {
    let (k, t, v) = (h.num_intents, h.num_topics, corpus.vocab_size());
    let mut fu = vec![0.0; k];
    let mut fb = [0.0; 2];
    let mut f0 = vec![vec![0.0; v]; k];
    let mut f1 = vec![vec![0.0; v]; t];
    let mut score = 0.0;
    for (doc, a) in corpus.documents.iter().zip(docs) {
        let z = intents_of(&a.u, a.upsilon.as_slice(), k);
        let mut fdt = vec![0.0; t];
        for &x in &a.u {
            fu[x] += 1.0;
        }
        for (j, &inv) in a.upsilon.as_slice().iter().enumerate() {
            score += gmm_lp(inv, rho[j], k - j);
        }
        for (s, sentence) in doc.sentences.iter().enumerate() {
            for (m, &w) in sentence.iter().enumerate() {
                match a.topics[s][m] {
                    None => {
                        fb[0] += 1.0;
                        f0[z[s]][w] += 1.0;
                    }
                    Some(topic) => {
                        fb[1] += 1.0;
                        f1[topic][w] += 1.0;
                        fdt[topic] += 1.0;
                    }
                }
            }
        }
        score += dm(&fdt, h.theta0);
    }
    score += dm(&fu, h.lambda0) + dm(&fb, h.gamma0);
    score += f0.iter().map(|row| dm(row, h.alpha0)).sum::<f64>();
    score += f1.iter().map(|row| dm(row, h.beta0)).sum::<f64>();
    score
}

fn normalized_exp(log_weights: &[f64]) -> Vec<f64> {
    let max = log_weights.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let w: Vec<f64> = log_weights.iter().map(|x| (x - max).exp()).collect();
    let total: f64 = w.iter().sum();
    w.iter().map(|x| x / total).collect()
}

fn assert_close(a: &[f64], b: &[f64], tol: f64) {
    assert_eq!(a.len(), b.len());
    for (x, y) in a.iter().zip(b) {
        assert!((x - y).abs() < tol, "{a:?} vs {b:?}");
    }
}

fn toy_hyper(k: usize, t: usize) -> Hyperparameters {
    let mut h = Hyperparameters::new(k, t);
    h.gamma0 = 0.7;
    h.alpha0 = 0.3;
    h
}

/// Toy states with dispersions away from the prior default.
fn toy_states(k: usize, sentences: usize) -> Vec<(Corpus, ModelState)> {
    (0..6)
        .map(|seed| {
            let corpus = toy_corpus(2, sentences, 2, 4, seed);
            let mut rng = ChaCha8Rng::seed_from_u64(100 + seed);
            let mut state = init_state(&corpus, &toy_hyper(k, 2), &mut rng).unwrap();
            state.rho = Dispersion::new((0..k - 1).map(|j| 0.4 + 0.9 * j as f64 + 0.3 * seed as f64).collect()).unwrap();
            (corpus, state)
        })
        .collect()
}

#[test]
fn u_conditional_matches_enumeration() {
    for k in [2, 3] {
        for (corpus, mut state) in toy_states(k, 3) {
            for d in 0..2 {
                for s in 0..3 {
                    let got = u_conditional(&corpus, &mut state, d, s);
                    let oracle: Vec<f64> = (0..k)
                        .map(|x| {
                            let mut docs = state.assignments.docs.clone();
                            docs[d].u[s] = x;
                            brute_joint(&corpus, &docs, &state.hyper, state.rho.as_slice())
                        })
                        .collect();
                    assert_close(&got, &normalized_exp(&oracle), 1e-10);
                    assert!(state.is_consistent(&corpus));
                }
            }
        }
    }
}

#[test]
fn upsilon_conditional_matches_enumeration() {
    for k in [2, 3, 4] {
        for (corpus, mut state) in toy_states(k, 3) {
            for d in 0..2 {
                for j in 0..k - 1 {
                    let got = upsilon_conditional(&corpus, &mut state, d, j);
                    let oracle: Vec<f64> = (0..k - j)
                        .map(|v| {
                            let mut docs = state.assignments.docs.clone();
                            docs[d].upsilon.set(j, v).unwrap();
                            brute_joint(&corpus, &docs, &state.hyper, state.rho.as_slice())
                        })
                        .collect();
                    assert_close(&got, &normalized_exp(&oracle), 1e-10);
                    assert!(state.is_consistent(&corpus));
                }
            }
        }
    }
}

#[test]
fn bt_weights_match_enumeration() {
    for (corpus, mut state) in toy_states(2, 2) {
        for d in 0..2 {
            for s in 0..2 {
                for m in 0..2 {
                    let mut got = bt_weights(&corpus, &mut state, d, s, m);
                    crate::math::normalize_weights(&mut got);
                    let oracle: Vec<f64> = std::iter::once(None)
                        .chain((0..2).map(Some))
                        .map(|choice| {
                            let mut docs = state.assignments.docs.clone();
                            docs[d].topics[s][m] = choice;
                            brute_joint(&corpus, &docs, &state.hyper, state.rho.as_slice())
                        })
                        .collect();
                    assert_close(&got, &normalized_exp(&oracle), 1e-10);
                    assert!((got.iter().sum::<f64>() - 1.0).abs() < 1e-12);
                }
            }
        }
    }
}

#[test]
fn single_intent_is_certain() {
    let corpus = toy_corpus(3, 3, 4, 6, 1);
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let mut state = init_state(&corpus, &Hyperparameters::new(1, 2), &mut rng).unwrap();
    assert_eq!(u_conditional(&corpus, &mut state, 1, 2), vec![1.0]);
    let run = run_gibbs(&corpus, state, &GibbsConfig { iterations: 5, ..Default::default() }, &mut rng).unwrap();
    assert!(run.predictions.iter().flatten().all(|&z| z == 0));
}

/// All tokens are topic words, so only usage counts matter.
fn topic_only_state(corpus: &Corpus, k: usize) -> ModelState {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let mut state = init_state(corpus, &Hyperparameters::new(k, 2), &mut rng).unwrap();
    for a in &mut state.assignments.docs {
        for sentence in &mut a.topics {
            sentence.iter_mut().for_each(|t| *t = Some(0));
        }
    }
    state.counts = state.rebuild_counts(corpus);
    state
}

#[test]
fn symmetric_state_gives_uniform_u() {
    let mut corpus = toy_corpus(2, 2, 3, 5, 2);
    corpus.documents[0].sentences.truncate(1);
    let mut state = topic_only_state(&corpus, 2);
    state.assignments.docs[1].u = vec![0, 1];
    state.assignments.docs[1].z = crate::permutation::compute_z(&[0, 1], &state.assignments.docs[1].pi).unwrap();
    state.counts = state.rebuild_counts(&corpus);
    assert_eq!(u_conditional(&corpus, &mut state, 0, 0), vec![0.5, 0.5]);
}

#[test]
fn upsilon_without_intent_words_follows_prior() {
    let corpus = toy_corpus(2, 3, 3, 5, 3);
    let mut state = topic_only_state(&corpus, 4);
    state.rho = Dispersion::new(vec![0.3, 1.1, 2.5]).unwrap();
    for j in 0..3 {
        let got = upsilon_conditional(&corpus, &mut state, 0, j);
        let prior: Vec<f64> = (0..4 - j).map(|v| gmm_lp(v, state.rho.get(j), 4 - j).exp()).collect();
        assert_close(&got, &prior, 1e-12);
    }
}

#[test]
fn last_component_on_one_sentence_is_two_point_prior() {
    let corpus = toy_corpus(2, 1, 4, 5, 4);
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let mut state = init_state(&corpus, &Hyperparameters::new(3, 2), &mut rng).unwrap();
    state.rho = Dispersion::new(vec![1.0, 0.8]).unwrap();
    let got = upsilon_conditional(&corpus, &mut state, 0, 1);
    let p0 = 1.0 / (1.0 + (-0.8f64).exp());
    assert_close(&got, &[p0, 1.0 - p0], 1e-12);
}

/// A corpus where word 0 appears 101 times; all but the last token are
/// intent words of intent 0.
fn frequent_intent_word() -> (Corpus, ModelState) {
    let corpus = Corpus {
        documents: vec![Document {
            id: "d".into(),
            sentences: vec![vec![0; 101], vec![1; 3]],
            labels: None,
        }],
        vocabulary: Vocabulary::from_words(vec!["a".into(), "b".into()]).unwrap(),
        labels: None,
    };
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    let mut state = init_state(&corpus, &Hyperparameters::new(1, 2), &mut rng).unwrap();
    let a = &mut state.assignments.docs[0];
    a.topics[0].iter_mut().for_each(|t| *t = None);
    a.topics[0][100] = Some(1);
    a.topics[1].iter_mut().for_each(|t| *t = Some(0));
    state.counts = state.rebuild_counts(&corpus);
    (corpus, state)
}

#[test]
fn frequent_intent_word_prefers_intent_type() {
    let (corpus, mut state) = frequent_intent_word();
    let w = bt_weights(&corpus, &mut state, 0, 0, 100);
    assert!(w[0] > w[1] + w[2]);
}

#[test]
fn entropic_weights_reduce_to_plain_at_zero() {
    for (corpus, mut state) in toy_states(2, 2) {
        for m in 0..2 {
            let plain = bt_weights(&corpus, &mut state, 1, 0, m);
            let entropic = bt_weights_entropic(&corpus, &mut state, 1, 0, m, 0.0);
            assert_eq!(plain, entropic);
        }
    }
}

#[test]
fn entropic_factor_favors_pure_type() {
    let (corpus, mut state) = frequent_intent_word();
    assert_eq!(state.counts.nv[0], [100, 1]);
    // Token 100 is the only topic occurrence: removing it leaves nv = (100, 0).
    let plain = bt_weights(&corpus, &mut state, 0, 0, 100);
    let entropic = bt_weights_entropic(&corpus, &mut state, 0, 0, 100, 1.0);
    assert!(entropic[0] / entropic[1] > plain[0] / plain[1]);
    assert_eq!(entropic[0], plain[0]);
    assert_eq!(entropic[1] / plain[1], entropic[2] / plain[2]);
}

#[test]
fn random_moves_keep_counts_consistent() {
    let corpus = toy_corpus(8, 5, 6, 12, 7);
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let mut hyper = Hyperparameters::new(4, 3);
    hyper.c = 0.5;
    let mut state = init_state(&corpus, &hyper, &mut rng).unwrap();
    for _ in 0..3000 {
        let d = rng.random_range(0..8);
        let s = rng.random_range(0..5);
        match rng.random_range(0..5) {
            0 => resample_u(&corpus, &mut state, d, s, &mut rng),
            1 => resample_upsilon(&corpus, &mut state, d, rng.random_range(0..3), &mut rng),
            2 => resample_bt(&corpus, &mut state, d, s, rng.random_range(0..6), &mut rng),
            3 => resample_bt_entropic(&corpus, &mut state, d, s, rng.random_range(0..6), &mut rng),
            _ => resample_rho(&mut state, &mut rng),
        }
        let a = &state.assignments.docs[d];
        assert_eq!(a.z, crate::permutation::compute_z(&a.u, &a.pi).unwrap());
    }
    assert!(state.is_consistent(&corpus));
}

#[test]
fn intent_only_never_creates_topic_words() {
    let corpus = toy_corpus(5, 4, 5, 10, 9);
    let mut hyper = Hyperparameters::new(3, 2);
    hyper.variant = Variant::IntentOnly;
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let state = init_state(&corpus, &hyper, &mut rng).unwrap();
    let cfg = GibbsConfig { iterations: 30, ..Default::default() };
    run_gibbs_with(&corpus, state, &cfg, &mut rng, |_, s| assert_eq!(s.counts.fb[1], 0)).unwrap();
}

#[test]
fn uniform_order_keeps_rho_zero() {
    let corpus = toy_corpus(5, 4, 5, 10, 10);
    let mut hyper = Hyperparameters::new(3, 2);
    hyper.variant = Variant::UniformOrder;
    let mut rng = ChaCha8Rng::seed_from_u64(10);
    let state = init_state(&corpus, &hyper, &mut rng).unwrap();
    let cfg = GibbsConfig { iterations: 20, ..Default::default() };
    run_gibbs_with(&corpus, state, &cfg, &mut rng, |_, s| {
        assert!(s.rho.as_slice().iter().all(|&r| r == 0.0));
        let prior = upsilon_log_prior(s, 0);
        assert!(prior.iter().all(|&p| p == prior[0]));
    })
    .unwrap();
}

#[test]
fn locked_documents_keep_their_intents() {
    let corpus = toy_corpus(4, 4, 5, 10, 11);
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let mut state = init_state(&corpus, &Hyperparameters::new(3, 2), &mut rng).unwrap();
    state.assignments.docs.iter_mut().for_each(|a| a.fixed = true);
    let before = state.intents();
    let mut after = state.clone();
    sweep(&corpus, &mut after, &mut rng);
    assert_eq!(after.intents(), before);
    assert_eq!(
        after.assignments.docs.iter().map(|a| a.upsilon.clone()).collect::<Vec<InversionVector>>(),
        state.assignments.docs.iter().map(|a| a.upsilon.clone()).collect::<Vec<_>>()
    );
}

#[test]
fn runs_are_deterministic_and_report_on_schedule() {
    let corpus = toy_corpus(6, 4, 5, 10, 12);
    let cfg = GibbsConfig {
        iterations: 25,
        seed: 3,
        report_every: 5,
        prediction: Prediction::ModeOverTail(10),
        check_every: 1,
    };
    let run = || {
        let mut rng = cfg.rng();
        let state = init_state(&corpus, &Hyperparameters::new(3, 2), &mut rng).unwrap();
        run_gibbs(&corpus, state, &cfg, &mut rng).unwrap()
    };
    let (a, b) = (run(), run());
    assert_eq!(a.predictions, b.predictions);
    assert_eq!(a.state, b.state);
    let iters: Vec<usize> = a.diagnostics.records.iter().map(|r| r.iteration).collect();
    assert_eq!(iters, vec![5, 10, 15, 20, 25]);
    let mut csv = Vec::new();
    a.diagnostics.write_csv(&mut csv).unwrap();
    assert_eq!(String::from_utf8(csv).unwrap().lines().count(), 6);
}

#[test]
fn config_validation() {
    let mut cfg = GibbsConfig { iterations: 0, ..Default::default() };
    assert!(cfg.validate().is_err());
    cfg.iterations = 10;
    cfg.prediction = Prediction::ModeOverTail(11);
    assert!(cfg.validate().is_err());
    cfg.prediction = Prediction::ModeOverTail(10);
    assert!(cfg.validate().is_ok());
}

#[test]
fn prediction_parsing() {
    assert_eq!("last".parse::<Prediction>().unwrap(), Prediction::LastSample);
    assert_eq!("mode:50".parse::<Prediction>().unwrap(), Prediction::ModeOverTail(50));
    assert!("mode:x".parse::<Prediction>().is_err());
    assert_eq!(Prediction::ModeOverTail(7).to_string(), "mode:7");
}

#[test]
fn modal_index_prefers_lowest_on_ties() {
    assert_eq!(modal_index(&[2, 5, 5, 1]), 1);
    assert_eq!(modal_index(&[0, 0]), 0);
}
