//! Model state: hyperparameters, latent assignments, count tables and the
//! quantities derived from them.

mod counts;
mod generate;
mod io;

pub use counts::CountTables;
pub use generate::{forward_generate, GenerateConfig, GroundTruth, RhoSource, SizeDistribution};
pub use io::{
    read_assignments, read_model_dump, write_assignments, write_model_dump, AssignmentRecord,
    ModelDump,
};

use rand::Rng;
use serde::{Deserialize, Serialize};
use statrs::function::gamma::ln_gamma;
use thiserror::Error;

use crate::corpus::Corpus;
use crate::permutation::{
    compute_z, gmm0_log_density, gmm_log_pmf, sample_inversion, Dispersion, DispersionPrior,
    InversionVector, Permutation, PermutationError,
};

#[derive(Debug, Error)]
pub enum ModelError {
    #[error("invalid hyperparameters: {0}")]
    InvalidHyperparameters(String),
    #[error("document {doc}: label {label} outside 0..{num_intents}")]
    LabelOutOfRange {
        doc: usize,
        label: usize,
        num_intents: usize,
    },
    #[error(transparent)]
    Permutation(#[from] PermutationError),
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
    #[error("malformed record: {0}")]
    Malformed(String),
}

/// Which parts of the model are active.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Variant {
    /// Topics, intents and learned dispersions.
    #[default]
    Full,
    /// Every token is an intent word; the topic part is switched off.
    IntentOnly,
    /// Dispersions pinned at zero, i.e. all intent orders equally likely.
    UniformOrder,
}

impl std::str::FromStr for Variant {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "full" => Ok(Self::Full),
            "intent_only" => Ok(Self::IntentOnly),
            "uniform_order" => Ok(Self::UniformOrder),
            other => Err(format!("unknown variant {other:?}")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Hyperparameters {
    #[serde(rename = "K")]
    pub num_intents: usize,
    #[serde(rename = "T")]
    pub num_topics: usize,
    pub theta0: f64,
    pub lambda0: f64,
    pub alpha0: f64,
    pub beta0: f64,
    pub gamma0: f64,
    pub rho0: f64,
    /// The dispersion prior strength is `nu0_scale` times the document count.
    pub nu0_scale: f64,
    /// Entropic regularization weight; zero disables it.
    pub c: f64,
    pub variant: Variant,
}

impl Hyperparameters {
    pub fn new(num_intents: usize, num_topics: usize) -> Self {
        Self {
            num_intents,
            num_topics,
            theta0: 0.1,
            lambda0: 0.1,
            alpha0: 0.1,
            beta0: 0.1,
            gamma0: 1.0,
            rho0: 2.0,
            nu0_scale: 0.1,
            c: 0.0,
            variant: Variant::Full,
        }
    }

    pub fn validate(&self) -> Result<(), ModelError> {
        let bad = |msg: String| Err(ModelError::InvalidHyperparameters(msg));
        if self.num_intents < 1 {
            return bad("K must be at least 1".into());
        }
        if self.num_topics < 1 {
            return bad("T must be at least 1".into());
        }
        for (name, value) in [
            ("theta0", self.theta0),
            ("lambda0", self.lambda0),
            ("alpha0", self.alpha0),
            ("beta0", self.beta0),
            ("gamma0", self.gamma0),
            ("rho0", self.rho0),
            ("nu0_scale", self.nu0_scale),
        ] {
            if !(value > 0.0 && value.is_finite()) {
                return bad(format!("{name} must be positive, got {value}"));
            }
        }
        if !(self.c >= 0.0 && self.c.is_finite()) {
            return bad(format!("c must be non-negative, got {}", self.c));
        }
        Ok(())
    }

    pub fn nu0(&self, num_docs: usize) -> f64 {
        self.nu0_scale * num_docs as f64
    }

    pub fn dispersion_prior(&self, num_docs: usize) -> Result<DispersionPrior, ModelError> {
        Ok(DispersionPrior::new(self.rho0, self.nu0(num_docs), self.num_intents)?)
    }
}

/// Latent variables of one document.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DocAssignment {
    /// Bag of intents, one slot per sentence.
    pub u: Vec<usize>,
    /// Inversion vector relative to the canonical ordering.
    pub upsilon: InversionVector,
    pub pi: Permutation,
    /// Intent of each sentence.
    pub z: Vec<usize>,
    /// Per token: `None` for an intent word, `Some(t)` for a topic word of topic `t`.
    pub topics: Vec<Vec<Option<usize>>>,
    /// Label-locked documents keep `u`, `upsilon`, `pi` and `z` fixed.
    pub fixed: bool,
}

impl DocAssignment {
    /// Token types as 0 (intent word) / 1 (topic word).
    pub fn types(&self) -> Vec<Vec<u8>> {
        self.topics
            .iter()
            .map(|s| s.iter().map(|t| u8::from(t.is_some())).collect())
            .collect()
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Assignments {
    pub docs: Vec<DocAssignment>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ModelState {
    pub hyper: Hyperparameters,
    pub assignments: Assignments,
    pub counts: CountTables,
    pub rho: Dispersion,
    pub pi0: Permutation,
    pub prior: DispersionPrior,
}

impl ModelState {
    /// Intent order of a document with inversion vector `upsilon`.
    pub fn permutation_for(&self, upsilon: &InversionVector) -> Permutation {
        self.pi0.compose(&upsilon.to_permutation())
    }

    pub fn num_intents(&self) -> usize {
        self.hyper.num_intents
    }

    pub fn num_topics(&self) -> usize {
        self.hyper.num_topics
    }

    pub fn rebuild_counts(&self, corpus: &Corpus) -> CountTables {
        CountTables::rebuild(corpus, &self.assignments, self.num_intents(), self.num_topics())
    }

    pub fn is_consistent(&self, corpus: &Corpus) -> bool {
        self.rebuild_counts(corpus) == self.counts
    }

    /// Replaces the canonical ordering. Unlocked documents keep their
    /// inversion vectors, so their permutations and intents are recomputed.
    pub fn set_canonical(&mut self, corpus: &Corpus, pi0: Permutation) -> Result<(), ModelError> {
        if pi0.len() != self.num_intents() {
            return Err(PermutationError::SizeMismatch {
                left: pi0.len(),
                right: self.num_intents(),
            }
            .into());
        }
        self.pi0 = pi0;
        for d in 0..self.assignments.docs.len() {
            if self.assignments.docs[d].fixed {
                continue;
            }
            let pi = self.permutation_for(&self.assignments.docs[d].upsilon);
            let doc = &mut self.assignments.docs[d];
            doc.z = compute_z(&doc.u, &pi)?;
            doc.pi = pi;
        }
        self.counts = self.rebuild_counts(corpus);
        Ok(())
    }

    /// Final intent of every sentence.
    pub fn intents(&self) -> Vec<Vec<usize>> {
        self.assignments.docs.iter().map(|a| a.z.clone()).collect()
    }
}

/// Random starting point for a chain.
pub fn init_state<R: Rng + ?Sized>(
    corpus: &Corpus,
    hyper: &Hyperparameters,
    rng: &mut R,
) -> Result<ModelState, ModelError> {
    hyper.validate()?;
    let num_intents = hyper.num_intents;
    let num_topics = hyper.num_topics;
    let prior = hyper.dispersion_prior(corpus.num_docs())?;
    let rho = match hyper.variant {
        Variant::UniformOrder => Dispersion::uniform(num_intents),
        _ => Dispersion::constant(hyper.rho0, num_intents)?,
    };
    let pi0 = Permutation::identity(num_intents);

    let mut docs = Vec::with_capacity(corpus.num_docs());
    for doc in &corpus.documents {
        let u: Vec<usize> = (0..doc.sentences.len())
            .map(|_| rng.random_range(0..num_intents))
            .collect();
        let upsilon = sample_inversion(&rho, rng);
        let pi = pi0.compose(&upsilon.to_permutation());
        let z = compute_z(&u, &pi)?;
        let topics = doc
            .sentences
            .iter()
            .map(|sentence| {
                sentence
                    .iter()
                    .map(|_| match hyper.variant {
                        Variant::IntentOnly => None,
                        _ if rng.random::<bool>() => Some(rng.random_range(0..num_topics)),
                        _ => None,
                    })
                    .collect()
            })
            .collect();
        docs.push(DocAssignment {
            u,
            upsilon,
            pi,
            z,
            topics,
            fixed: false,
        });
    }
    let assignments = Assignments { docs };
    let counts = CountTables::rebuild(corpus, &assignments, num_intents, num_topics);
    Ok(ModelState {
        hyper: hyper.clone(),
        assignments,
        counts,
        rho,
        pi0,
        prior,
    })
}

/// Collapsed posterior means of the word and topic distributions.
#[derive(Debug, Clone, PartialEq)]
pub struct PointEstimates {
    pub intent_word: Vec<Vec<f64>>,
    pub topic_word: Vec<Vec<f64>>,
    pub doc_topic: Vec<Vec<f64>>,
}

pub fn point_estimates(state: &ModelState) -> PointEstimates {
    let c = &state.counts;
    let h = &state.hyper;
    let v = c.vocab_size;
    let vf = v as f64;
    let intent_word = (0..c.num_intents)
        .map(|k| {
            let denom = f64::from(c.f0_dot[k]) + vf * h.alpha0;
            (0..v).map(|w| (f64::from(c.f0(k, w)) + h.alpha0) / denom).collect()
        })
        .collect();
    let topic_word = (0..c.num_topics)
        .map(|t| {
            let denom = f64::from(c.f1_dot[t]) + vf * h.beta0;
            (0..v).map(|w| (f64::from(c.f1(t, w)) + h.beta0) / denom).collect()
        })
        .collect();
    let tf = c.num_topics as f64;
    let doc_topic = (0..c.f1_doc_dot.len())
        .map(|d| {
            let denom = f64::from(c.f1_doc_dot[d]) + tf * h.theta0;
            (0..c.num_topics)
                .map(|t| (f64::from(c.f1_doc(d, t)) + h.theta0) / denom)
                .collect()
        })
        .collect();
    PointEstimates {
        intent_word,
        topic_word,
        doc_topic,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum WordType {
    Intent,
    Topic,
}

/// A word is an intent word when it occurs strictly more often as one.
pub fn classify_word_type(counts: [u32; 2]) -> WordType {
    if counts[0] > counts[1] {
        WordType::Intent
    } else {
        WordType::Topic
    }
}

pub fn classify_word_types(state: &ModelState) -> Vec<WordType> {
    state.counts.nv.iter().map(|&nv| classify_word_type(nv)).collect()
}

/// `ln` of a symmetric Dirichlet-multinomial marginal over the given counts.
fn dirichlet_multinomial(counts: impl Iterator<Item = f64>, concentration: f64, dim: usize) -> f64 {
    let mut total = 0.0;
    let mut acc = 0.0;
    for n in counts {
        total += n;
        acc += ln_gamma(n + concentration) - ln_gamma(concentration);
    }
    let dim_conc = dim as f64 * concentration;
    acc + ln_gamma(dim_conc) - ln_gamma(total + dim_conc)
}

/// Log of the unnormalized collapsed posterior at the current state.
///
/// Used for diagnostics only; the samplers never need it.
pub fn joint_log_score(state: &ModelState) -> f64 {
    let c = &state.counts;
    let h = &state.hyper;
    let num_intents = h.num_intents;
    let v = c.vocab_size;

    let mut score = dirichlet_multinomial(c.fu.iter().map(|&n| f64::from(n)), h.lambda0, num_intents);

    for a in &state.assignments.docs {
        for (k, &inv) in a.upsilon.as_slice().iter().enumerate() {
            score += gmm_log_pmf(inv, state.rho.get(k), k, num_intents)
                .expect("assignments respect inversion bounds");
        }
    }
    if h.variant != Variant::UniformOrder {
        for (k, &rho) in state.rho.as_slice().iter().enumerate() {
            score += gmm0_log_density(rho, state.prior.means()[k], state.prior.nu0, k, num_intents)
                .expect("dispersions stay positive");
        }
    }

    score += dirichlet_multinomial(c.fb.iter().map(|&n| n as f64), h.gamma0, 2);
    for d in 0..c.f1_doc_dot.len() {
        score += dirichlet_multinomial(
            (0..c.num_topics).map(|t| f64::from(c.f1_doc(d, t))),
            h.theta0,
            c.num_topics,
        );
    }
    for k in 0..num_intents {
        score += dirichlet_multinomial(c.f0[k * v..(k + 1) * v].iter().map(|&n| f64::from(n)), h.alpha0, v);
    }
    for t in 0..c.num_topics {
        score += dirichlet_multinomial(c.f1[t * v..(t + 1) * v].iter().map(|&n| f64::from(n)), h.beta0, v);
    }
    score
}
