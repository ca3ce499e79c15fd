use crate::corpus::Corpus;

use super::Assignments;

/// Sufficient statistics of the collapsed model.
///
/// Matrices are stored row-major in flat vectors: `f0` is intents x vocab,
/// `f1` topics x vocab and `f1_doc` documents x topics.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CountTables {
    pub num_intents: usize,
    pub num_topics: usize,
    pub vocab_size: usize,
    /// Intent-word counts per (intent, word).
    pub f0: Vec<u32>,
    pub f0_dot: Vec<u32>,
    /// Topic-word counts per (topic, word).
    pub f1: Vec<u32>,
    pub f1_dot: Vec<u32>,
    /// Topic-word counts per (document, topic).
    pub f1_doc: Vec<u32>,
    pub f1_doc_dot: Vec<u32>,
    /// Intent usage over all bags.
    pub fu: Vec<u32>,
    /// Totals of intent words (`[0]`) and topic words (`[1]`).
    pub fb: [u64; 2],
    /// Per word: occurrences as intent word and as topic word.
    pub nv: Vec<[u32; 2]>,
}

impl CountTables {
    pub fn zeros(num_intents: usize, num_topics: usize, vocab_size: usize, num_docs: usize) -> Self {
        Self {
            num_intents,
            num_topics,
            vocab_size,
            f0: vec![0; num_intents * vocab_size],
            f0_dot: vec![0; num_intents],
            f1: vec![0; num_topics * vocab_size],
            f1_dot: vec![0; num_topics],
            f1_doc: vec![0; num_docs * num_topics],
            f1_doc_dot: vec![0; num_docs],
            fu: vec![0; num_intents],
            fb: [0, 0],
            nv: vec![[0, 0]; vocab_size],
        }
    }

    /// Recounts everything from the assignments.
    pub fn rebuild(corpus: &Corpus, assignments: &Assignments, num_intents: usize, num_topics: usize) -> Self {
        let mut counts = Self::zeros(num_intents, num_topics, corpus.vocab_size(), corpus.num_docs());
        for (d, (doc, a)) in corpus.documents.iter().zip(&assignments.docs).enumerate() {
            for &x in &a.u {
                counts.fu[x] += 1;
            }
            for (s, sentence) in doc.sentences.iter().enumerate() {
                for (m, &w) in sentence.iter().enumerate() {
                    match a.topics[s][m] {
                        None => counts.add_intent_word(a.z[s], w),
                        Some(t) => counts.add_topic_word(d, t, w),
                    }
                }
            }
        }
        counts
    }

    pub fn f0(&self, k: usize, v: usize) -> u32 {
        self.f0[k * self.vocab_size + v]
    }

    pub fn f1(&self, t: usize, v: usize) -> u32 {
        self.f1[t * self.vocab_size + v]
    }

    pub fn f1_doc(&self, d: usize, t: usize) -> u32 {
        self.f1_doc[d * self.num_topics + t]
    }

    pub fn total_tokens(&self) -> u64 {
        self.fb[0] + self.fb[1]
    }

    pub(crate) fn add_intent_word(&mut self, k: usize, v: usize) {
        self.f0[k * self.vocab_size + v] += 1;
        self.f0_dot[k] += 1;
        self.fb[0] += 1;
        self.nv[v][0] += 1;
    }

    pub(crate) fn remove_intent_word(&mut self, k: usize, v: usize) {
        self.f0[k * self.vocab_size + v] -= 1;
        self.f0_dot[k] -= 1;
        self.fb[0] -= 1;
        self.nv[v][0] -= 1;
    }

    pub(crate) fn add_topic_word(&mut self, d: usize, t: usize, v: usize) {
        self.f1[t * self.vocab_size + v] += 1;
        self.f1_dot[t] += 1;
        self.f1_doc[d * self.num_topics + t] += 1;
        self.f1_doc_dot[d] += 1;
        self.fb[1] += 1;
        self.nv[v][1] += 1;
    }

    pub(crate) fn remove_topic_word(&mut self, d: usize, t: usize, v: usize) {
        self.f1[t * self.vocab_size + v] -= 1;
        self.f1_dot[t] -= 1;
        self.f1_doc[d * self.num_topics + t] -= 1;
        self.f1_doc_dot[d] -= 1;
        self.fb[1] -= 1;
        self.nv[v][1] -= 1;
    }
}
