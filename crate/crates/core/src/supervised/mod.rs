//! Sentence-label supervision: a canonical ordering derived from labeled
//! documents, and label-locked documents that the sampler leaves alone.

use std::collections::HashMap;
use std::path::Path;

use rand::seq::IndexedRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpus::Corpus;
use crate::model::{ModelError, ModelState};
use crate::permutation::{partial_kendall_distance, Permutation};

#[derive(Debug, Error)]
pub enum SupervisedError {
    #[error("document {doc:?}: label {label} outside 0..{num_intents}")]
    LabelOutOfRange { doc: String, label: usize, num_intents: usize },
    #[error("document {0:?} has no sentence labels")]
    MissingLabels(String),
    #[error("unknown document id {0:?} in labeled split")]
    UnknownDocument(String),
    #[error("corpus carries no sentence labels")]
    UnlabeledCorpus,
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

/// Distinct labels of one document in their representative order.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LabeledDocumentOrder {
    pub pi_prime: Vec<usize>,
}

impl LabeledDocumentOrder {
    pub fn num_labels(&self) -> usize {
        self.pi_prime.len()
    }
}

/// Orders a document's distinct labels by the start of each label's longest
/// run (the first such run on ties).
pub fn collapse_labels(z: &[usize]) -> LabeledDocumentOrder {
    // label -> (best run length, start of that run)
    let mut best: HashMap<usize, (usize, usize)> = HashMap::new();
    let mut start = 0;
    while start < z.len() {
        let mut end = start + 1;
        while end < z.len() && z[end] == z[start] {
            end += 1;
        }
        let entry = best.entry(z[start]).or_insert((0, start));
        if end - start > entry.0 {
            *entry = (end - start, start);
        }
        start = end;
    }
    let mut labels: Vec<(usize, usize)> = best.into_iter().map(|(label, (_, pos))| (pos, label)).collect();
    labels.sort_unstable();
    LabeledDocumentOrder {
        pi_prime: labels.into_iter().map(|(_, label)| label).collect(),
    }
}

/// Pairwise precedence counts over labeled document orders.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PrecedenceGraph {
    /// `g[i][j]`: number of orders in which label `i` precedes label `j`.
    pub g: Vec<Vec<u32>>,
    /// Labels seen in at least one order.
    pub observed: Vec<bool>,
}

impl PrecedenceGraph {
    pub fn build(orders: &[LabeledDocumentOrder], num_labels: usize) -> Self {
        let mut g = vec![vec![0; num_labels]; num_labels];
        let mut observed = vec![false; num_labels];
        for order in orders {
            for (a, &i) in order.pi_prime.iter().enumerate() {
                observed[i] = true;
                for &j in &order.pi_prime[a + 1..] {
                    g[i][j] += 1;
                }
            }
        }
        Self { g, observed }
    }

    pub fn num_labels(&self) -> usize {
        self.g.len()
    }

    /// Edge `i -> j` between distinct observed labels when `g[i][j] >= g[j][i]`.
    pub fn has_edge(&self, i: usize, j: usize) -> bool {
        i != j && self.observed[i] && self.observed[j] && self.g[i][j] >= self.g[j][i]
    }

    /// Adjacency lists of the edge set.
    pub fn edges(&self) -> Vec<Vec<usize>> {
        let n = self.num_labels();
        (0..n)
            .map(|i| (0..n).filter(|&j| self.has_edge(i, j)).collect())
            .collect()
    }
}

/// Some cycle of the graph as a list of edges, found by depth-first search.
fn find_cycle(adj: &[Vec<usize>]) -> Option<Vec<(usize, usize)>> {
    #[derive(Clone, Copy, PartialEq)]
    enum Mark {
        New,
        Active,
        Done,
    }
    let n = adj.len();
    let mut mark = vec![Mark::New; n];
    let mut parent = vec![usize::MAX; n];
    for root in 0..n {
        if mark[root] != Mark::New {
            continue;
        }
        // (node, next neighbour index)
        let mut stack = vec![(root, 0)];
        mark[root] = Mark::Active;
        while let Some(top) = stack.last_mut() {
            let node = top.0;
            if let Some(&succ) = adj[node].get(top.1) {
                top.1 += 1;
                match mark[succ] {
                    Mark::New => {
                        mark[succ] = Mark::Active;
                        parent[succ] = node;
                        stack.push((succ, 0));
                    }
                    Mark::Active => {
                        let mut cycle = vec![(node, succ)];
                        let mut cur = node;
                        while cur != succ {
                            cycle.push((parent[cur], cur));
                            cur = parent[cur];
                        }
                        return Some(cycle);
                    }
                    Mark::Done => {}
                }
            } else {
                mark[node] = Mark::Done;
                stack.pop();
            }
        }
    }
    None
}

/// Removes a uniformly chosen edge from each cycle found until none remain.
fn break_cycles<R: Rng + ?Sized>(adj: &mut [Vec<usize>], rng: &mut R) {
    while let Some(cycle) = find_cycle(adj) {
        let &(from, to) = cycle.choose(rng).expect("cycles are non-empty");
        adj[from].retain(|&x| x != to);
    }
}

/// Topological order of an acyclic graph, choosing uniformly among the
/// available sources at each step.
fn random_topological_order<R: Rng + ?Sized>(adj: &[Vec<usize>], include: &[bool], rng: &mut R) -> Vec<usize> {
    let n = adj.len();
    let mut indegree = vec![0usize; n];
    for succs in adj {
        for &j in succs {
            indegree[j] += 1;
        }
    }
    let mut ready: Vec<usize> = (0..n).filter(|&i| include[i] && indegree[i] == 0).collect();
    let mut order = Vec::with_capacity(n);
    while !ready.is_empty() {
        let node = ready.swap_remove(rng.random_range(0..ready.len()));
        order.push(node);
        for &j in &adj[node] {
            indegree[j] -= 1;
            if indegree[j] == 0 {
                ready.push(j);
            }
        }
    }
    order
}

/// Canonical intent ordering from labeled sentence sequences.
///
/// Labels never observed are appended in ascending order.
pub fn derive_canonical<R: Rng + ?Sized>(labeled_docs: &[Vec<usize>], num_intents: usize, rng: &mut R) -> Permutation {
    let orders: Vec<LabeledDocumentOrder> = labeled_docs.iter().map(|z| collapse_labels(z)).collect();
    let graph = PrecedenceGraph::build(&orders, num_intents);
    let mut adj = graph.edges();
    break_cycles(&mut adj, rng);
    let mut order = random_topological_order(&adj, &graph.observed, rng);
    order.extend((0..num_intents).filter(|&i| !graph.observed[i]));
    Permutation::new(order).expect("every intent placed once")
}

/// Completes a partial order into a full permutation, inserting each missing
/// intent (in `pi0` order) where it disagrees least with `pi0`.
pub fn greedy_insert(pi_prime: &LabeledDocumentOrder, pi0: &Permutation) -> Permutation {
    let mut seq = pi_prime.pi_prime.clone();
    let mut present = vec![false; pi0.len()];
    for &x in &seq {
        present[x] = true;
    }
    let reference = pi0.as_slice();
    for &x in reference {
        if present[x] {
            continue;
        }
        let mut best = (usize::MAX, 0);
        for pos in 0..=seq.len() {
            seq.insert(pos, x);
            let dist = partial_kendall_distance(&seq, reference);
            seq.remove(pos);
            if dist < best.0 {
                best = (dist, pos);
            }
        }
        seq.insert(best.1, x);
    }
    Permutation::new(seq).expect("completed ordering")
}

/// The bag of a labeled sequence, sorted.
pub fn labels_to_u(z: &[usize]) -> Vec<usize> {
    let mut u = z.to_vec();
    u.sort_unstable();
    u
}

/// Fixes the bags, orders and intents of documents `docs` to their labels.
/// The canonical ordering must already be in place.
pub fn lock_labeled(state: &mut ModelState, corpus: &Corpus, docs: &[usize]) -> Result<(), SupervisedError> {
    let num_intents = state.num_intents();
    for &d in docs {
        let doc = &corpus.documents[d];
        let labels = doc
            .labels
            .as_ref()
            .ok_or_else(|| SupervisedError::MissingLabels(doc.id.clone()))?;
        if let Some(&label) = labels.iter().find(|&&l| l >= num_intents) {
            return Err(SupervisedError::LabelOutOfRange {
                doc: doc.id.clone(),
                label,
                num_intents,
            });
        }
        let pi = greedy_insert(&collapse_labels(labels), &state.pi0);
        let upsilon = state.pi0.relabel(&pi).to_inversion();
        let a = &mut state.assignments.docs[d];
        a.u = labels_to_u(labels);
        a.z = labels.clone();
        a.pi = pi;
        a.upsilon = upsilon;
        a.fixed = true;
    }
    state.counts = state.rebuild_counts(corpus);
    Ok(())
}

/// Derives the canonical ordering from documents `docs`, installs it and
/// locks those documents.
pub fn apply_supervision<R: Rng + ?Sized>(
    state: &mut ModelState,
    corpus: &Corpus,
    docs: &[usize],
    rng: &mut R,
) -> Result<(), SupervisedError> {
    let mut sequences = Vec::with_capacity(docs.len());
    for &d in docs {
        let doc = &corpus.documents[d];
        let labels = doc
            .labels
            .as_ref()
            .ok_or_else(|| SupervisedError::MissingLabels(doc.id.clone()))?;
        if let Some(&label) = labels.iter().find(|&&l| l >= state.num_intents()) {
            return Err(SupervisedError::LabelOutOfRange {
                doc: doc.id.clone(),
                label,
                num_intents: state.num_intents(),
            });
        }
        sequences.push(labels.clone());
    }
    let pi0 = derive_canonical(&sequences, state.num_intents(), rng);
    state.set_canonical(corpus, pi0)?;
    lock_labeled(state, corpus, docs)
}

/// Train/test split file: ids of the documents whose labels are used.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LabeledSplit {
    pub labeled_ids: Vec<String>,
}

impl LabeledSplit {
    pub fn load(path: &Path) -> Result<Self, SupervisedError> {
        let text = std::fs::read_to_string(path)?;
        Ok(serde_json::from_str(&text)?)
    }

    pub fn save(&self, path: &Path) -> Result<(), SupervisedError> {
        std::fs::write(path, serde_json::to_string_pretty(self)?)?;
        Ok(())
    }

    /// Document indices of the listed ids, in corpus order.
    pub fn indices(&self, corpus: &Corpus) -> Result<Vec<usize>, SupervisedError> {
        let index: HashMap<&str, usize> = corpus
            .documents
            .iter()
            .enumerate()
            .map(|(d, doc)| (doc.id.as_str(), d))
            .collect();
        let mut out = self
            .labeled_ids
            .iter()
            .map(|id| {
                index
                    .get(id.as_str())
                    .copied()
                    .ok_or_else(|| SupervisedError::UnknownDocument(id.clone()))
            })
            .collect::<Result<Vec<_>, _>>()?;
        out.sort_unstable();
        out.dedup();
        Ok(out)
    }
}

#[cfg(test)]
mod tests;
