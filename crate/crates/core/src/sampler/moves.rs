//! Single-variable Gibbs moves and the conditional distributions behind them.
//!
//! The `*_conditional` and `*_weights` functions leave the state exactly as
//! they found it; the `resample_*` functions draw from them and commit.

use rand::Rng;

use super::entropy::word_entropy;
use crate::corpus::{Corpus, Document};
use crate::math::{normalize_log_weights, sample_weights};
use crate::model::{CountTables, ModelState, Variant};
use crate::permutation::{fill_z_from_counts, gmm_log_pmf, slice_sample_rho};

/// Adds (or removes) a document's intent words to `f0` under intents `z`.
/// Type totals are untouched.
fn shift_doc_intent_words(
    doc: &Document,
    topics: &[Vec<Option<usize>>],
    z: &[usize],
    counts: &mut CountTables,
    add: bool,
) {
    let v = counts.vocab_size;
    for ((sentence, types), &k) in doc.sentences.iter().zip(topics).zip(z) {
        for (&w, t) in sentence.iter().zip(types) {
            if t.is_none() {
                if add {
                    counts.f0[k * v + w] += 1;
                    counts.f0_dot[k] += 1;
                } else {
                    counts.f0[k * v + w] -= 1;
                    counts.f0_dot[k] -= 1;
                }
            }
        }
    }
}

/// Log of the document's intent-word likelihood given the other documents,
/// with the document already removed from `counts`.
///
/// Adds the words one at a time, accumulating the Gamma-function ratios as
/// rising-factorial logs, then takes them back out.
fn doc_intent_log_likelihood(
    doc: &Document,
    topics: &[Vec<Option<usize>>],
    z: &[usize],
    counts: &mut CountTables,
    alpha0: f64,
) -> f64 {
    let v = counts.vocab_size;
    let v_alpha = v as f64 * alpha0;
    let mut ll = 0.0;
    for ((sentence, types), &k) in doc.sentences.iter().zip(topics).zip(z) {
        for (&w, t) in sentence.iter().zip(types) {
            if t.is_none() {
                let cell = &mut counts.f0[k * v + w];
                ll += (f64::from(*cell) + alpha0).ln();
                *cell += 1;
                ll -= (f64::from(counts.f0_dot[k]) + v_alpha).ln();
                counts.f0_dot[k] += 1;
            }
        }
    }
    shift_doc_intent_words(doc, topics, z, counts, false);
    ll
}

fn bag_counts(u: &[usize], num_intents: usize) -> Vec<usize> {
    let mut bag = vec![0; num_intents];
    for &x in u {
        bag[x] += 1;
    }
    bag
}

/// Normalized conditional of the bag slot `u[d][s]` over all intents.
pub fn u_conditional(corpus: &Corpus, state: &mut ModelState, d: usize, s: usize) -> Vec<f64> {
    let ModelState {
        hyper,
        assignments,
        counts,
        ..
    } = state;
    let num_intents = hyper.num_intents;
    let doc = &corpus.documents[d];
    let a = &assignments.docs[d];
    let old = a.u[s];

    shift_doc_intent_words(doc, &a.topics, &a.z, counts, false);
    let mut bag = bag_counts(&a.u, num_intents);
    bag[old] -= 1;
    let mut z = Vec::with_capacity(a.z.len());
    let mut log_weights = vec![0.0; num_intents];
    for (x, lw) in log_weights.iter_mut().enumerate() {
        bag[x] += 1;
        fill_z_from_counts(&bag, &a.pi, &mut z);
        let usage = f64::from(counts.fu[x]) - f64::from(u8::from(x == old));
        *lw = (usage + hyper.lambda0).ln()
            + doc_intent_log_likelihood(doc, &a.topics, &z, counts, hyper.alpha0);
        bag[x] -= 1;
    }
    shift_doc_intent_words(doc, &a.topics, &a.z, counts, true);

    normalize_log_weights(&mut log_weights);
    log_weights
}

/// Moves document `d` to a new bag and/or permutation, keeping counts in step.
fn commit_doc_structure(corpus: &Corpus, state: &mut ModelState, d: usize, update: impl FnOnce(&mut ModelState)) {
    let doc = &corpus.documents[d];
    {
        let a = &state.assignments.docs[d];
        shift_doc_intent_words(doc, &a.topics, &a.z, &mut state.counts, false);
    }
    update(state);
    let a = &mut state.assignments.docs[d];
    let bag = bag_counts(&a.u, state.hyper.num_intents);
    fill_z_from_counts(&bag, &a.pi, &mut a.z);
    shift_doc_intent_words(doc, &a.topics, &a.z, &mut state.counts, true);
}

pub fn resample_u<R: Rng + ?Sized>(corpus: &Corpus, state: &mut ModelState, d: usize, s: usize, rng: &mut R) {
    if state.assignments.docs[d].fixed {
        return;
    }
    let probs = u_conditional(corpus, state, d, s);
    let x = sample_weights(&probs, rng);
    let old = state.assignments.docs[d].u[s];
    if x == old {
        return;
    }
    commit_doc_structure(corpus, state, d, |state| {
        state.counts.fu[old] -= 1;
        state.counts.fu[x] += 1;
        state.assignments.docs[d].u[s] = x;
    });
}

/// Log prior over the values of inversion component `k`.
pub fn upsilon_log_prior(state: &ModelState, k: usize) -> Vec<f64> {
    let num_intents = state.num_intents();
    let rho = state.rho.get(k);
    (0..num_intents - k)
        .map(|v| gmm_log_pmf(v, rho, k, num_intents).expect("value inside support"))
        .collect()
}

/// Normalized conditional of inversion component `upsilon[d][k]`.
pub fn upsilon_conditional(corpus: &Corpus, state: &mut ModelState, d: usize, k: usize) -> Vec<f64> {
    let mut log_weights = upsilon_log_prior(state, k);
    let ModelState {
        hyper,
        assignments,
        counts,
        pi0,
        ..
    } = state;
    let doc = &corpus.documents[d];
    let a = &assignments.docs[d];

    shift_doc_intent_words(doc, &a.topics, &a.z, counts, false);
    let bag = bag_counts(&a.u, hyper.num_intents);
    let mut upsilon = a.upsilon.clone();
    let mut z = Vec::with_capacity(a.z.len());
    for (v, lw) in log_weights.iter_mut().enumerate() {
        upsilon.set(k, v).expect("value inside support");
        let pi = pi0.compose(&upsilon.to_permutation());
        fill_z_from_counts(&bag, &pi, &mut z);
        *lw += doc_intent_log_likelihood(doc, &a.topics, &z, counts, hyper.alpha0);
    }
    shift_doc_intent_words(doc, &a.topics, &a.z, counts, true);

    normalize_log_weights(&mut log_weights);
    log_weights
}

pub fn resample_upsilon<R: Rng + ?Sized>(corpus: &Corpus, state: &mut ModelState, d: usize, k: usize, rng: &mut R) {
    if state.assignments.docs[d].fixed {
        return;
    }
    let probs = upsilon_conditional(corpus, state, d, k);
    let v = sample_weights(&probs, rng);
    if v == state.assignments.docs[d].upsilon.get(k) {
        return;
    }
    commit_doc_structure(corpus, state, d, |state| {
        let mut upsilon = state.assignments.docs[d].upsilon.clone();
        upsilon.set(k, v).expect("value inside support");
        state.assignments.docs[d].pi = state.permutation_for(&upsilon);
        state.assignments.docs[d].upsilon = upsilon;
    });
}

/// One slice-sampling move per dispersion. No-op when orders are uniform.
pub fn resample_rho<R: Rng + ?Sized>(state: &mut ModelState, rng: &mut R) {
    if state.hyper.variant == Variant::UniformOrder {
        return;
    }
    let num_intents = state.num_intents();
    let num_docs = state.assignments.docs.len();
    for k in 0..num_intents - 1 {
        let sum: usize = state.assignments.docs.iter().map(|a| a.upsilon.get(k)).sum();
        let (v_mean, nu) = state.prior.posterior(k, sum, num_docs);
        let next = slice_sample_rho(state.rho.get(k), v_mean, nu, k, num_intents, rng);
        state.rho.set(k, next);
    }
}

fn remove_token(corpus: &Corpus, state: &mut ModelState, d: usize, s: usize, m: usize) -> Option<usize> {
    let w = corpus.documents[d].sentences[s][m];
    let a = &state.assignments.docs[d];
    let current = a.topics[s][m];
    match current {
        None => state.counts.remove_intent_word(a.z[s], w),
        Some(t) => state.counts.remove_topic_word(d, t, w),
    }
    current
}

fn insert_token(corpus: &Corpus, state: &mut ModelState, d: usize, s: usize, m: usize, value: Option<usize>) {
    let w = corpus.documents[d].sentences[s][m];
    let a = &mut state.assignments.docs[d];
    a.topics[s][m] = value;
    match value {
        None => state.counts.add_intent_word(a.z[s], w),
        Some(t) => state.counts.add_topic_word(d, t, w),
    }
}

/// Unnormalized weights with the token already removed from the counts.
/// Slot 0 is "intent word", slot `1 + t` is "topic word of topic t".
fn fill_bt_weights(state: &ModelState, d: usize, intent: usize, w: usize, out: &mut Vec<f64>) {
    let c = &state.counts;
    let h = &state.hyper;
    let vf = c.vocab_size as f64;
    let tf = c.num_topics as f64;
    out.clear();
    out.push(
        (c.fb[0] as f64 + h.gamma0) * (f64::from(c.f0(intent, w)) + h.alpha0)
            / (f64::from(c.f0_dot[intent]) + vf * h.alpha0),
    );
    let topic_mass = c.fb[1] as f64 + h.gamma0;
    let doc_denom = f64::from(c.f1_doc_dot[d]) + tf * h.theta0;
    for t in 0..c.num_topics {
        out.push(
            topic_mass * (f64::from(c.f1(t, w)) + h.beta0) / (f64::from(c.f1_dot[t]) + vf * h.beta0)
                * (f64::from(c.f1_doc(d, t)) + h.theta0)
                / doc_denom,
        );
    }
}

/// Scales each slot by `exp(-c * H)`, where `H` is the word's type entropy
/// with this token counted as the slot's type.
fn apply_entropic_factor(state: &ModelState, w: usize, c: f64, weights: &mut [f64]) {
    let [n0, n1] = state.counts.nv[w];
    let as_intent = (-c * word_entropy(n0 + 1, n1).expect("non-empty")).exp();
    let as_topic = (-c * word_entropy(n0, n1 + 1).expect("non-empty")).exp();
    weights[0] *= as_intent;
    for x in &mut weights[1..] {
        *x *= as_topic;
    }
}

fn with_token_removed<T>(
    corpus: &Corpus,
    state: &mut ModelState,
    (d, s, m): (usize, usize, usize),
    f: impl FnOnce(&ModelState, usize, usize) -> T,
) -> T {
    let old = remove_token(corpus, state, d, s, m);
    let out = f(state, state.assignments.docs[d].z[s], corpus.documents[d].sentences[s][m]);
    insert_token(corpus, state, d, s, m, old);
    out
}

/// Unnormalized type/topic weights of token `(d, s, m)`; see [`resample_bt`].
pub fn bt_weights(corpus: &Corpus, state: &mut ModelState, d: usize, s: usize, m: usize) -> Vec<f64> {
    with_token_removed(corpus, state, (d, s, m), |state, intent, w| {
        let mut out = Vec::with_capacity(state.num_topics() + 1);
        fill_bt_weights(state, d, intent, w, &mut out);
        out
    })
}

/// [`bt_weights`] with the entropic reweighting at strength `c`.
pub fn bt_weights_entropic(
    corpus: &Corpus,
    state: &mut ModelState,
    d: usize,
    s: usize,
    m: usize,
    c: f64,
) -> Vec<f64> {
    with_token_removed(corpus, state, (d, s, m), |state, intent, w| {
        let mut out = Vec::with_capacity(state.num_topics() + 1);
        fill_bt_weights(state, d, intent, w, &mut out);
        apply_entropic_factor(state, w, c, &mut out);
        out
    })
}

fn resample_token<R: Rng + ?Sized>(
    corpus: &Corpus,
    state: &mut ModelState,
    (d, s, m): (usize, usize, usize),
    entropic: Option<f64>,
    rng: &mut R,
) {
    remove_token(corpus, state, d, s, m);
    let w = corpus.documents[d].sentences[s][m];
    let intent = state.assignments.docs[d].z[s];
    let mut weights = Vec::with_capacity(state.num_topics() + 1);
    fill_bt_weights(state, d, intent, w, &mut weights);
    if let Some(c) = entropic {
        apply_entropic_factor(state, w, c, &mut weights);
    }
    let choice = sample_weights(&weights, rng);
    insert_token(corpus, state, d, s, m, choice.checked_sub(1));
}

/// Joint draw of the type indicator and topic of token `(d, s, m)`.
pub fn resample_bt<R: Rng + ?Sized>(corpus: &Corpus, state: &mut ModelState, d: usize, s: usize, m: usize, rng: &mut R) {
    resample_token(corpus, state, (d, s, m), None, rng);
}

/// [`resample_bt`] under entropic regularization with the state's `c`.
pub fn resample_bt_entropic<R: Rng + ?Sized>(
    corpus: &Corpus,
    state: &mut ModelState,
    d: usize,
    s: usize,
    m: usize,
    rng: &mut R,
) {
    let c = state.hyper.c;
    resample_token(corpus, state, (d, s, m), Some(c), rng);
}
