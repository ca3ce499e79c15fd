//! Forward sampling from the full generative model, for synthetic data and
//! recovery experiments.

use rand::Rng;
use rand_distr::{Beta, Distribution, Poisson};

use super::{Assignments, DocAssignment, Hyperparameters, ModelError, Variant};
use crate::corpus::{Corpus, Document, LabelSet, Vocabulary};
use crate::math::{sample_dirichlet, sample_weights};
use crate::permutation::{
    compute_z, sample_inversion, slice_sample_rho, Dispersion, Permutation,
};

/// How many sentences per document or tokens per sentence to draw.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum SizeDistribution {
    Fixed(usize),
    /// Poisson with the given mean, clamped below at `min`.
    Poisson { mean: f64, min: usize },
    /// Uniform on `min..=max`.
    Uniform { min: usize, max: usize },
}

impl SizeDistribution {
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> usize {
        match *self {
            Self::Fixed(n) => n,
            Self::Poisson { mean, min } => {
                let draw: f64 = Poisson::new(mean).expect("positive mean").sample(rng);
                (draw as usize).max(min)
            }
            Self::Uniform { min, max } => rng.random_range(min..=max),
        }
    }
}

/// Where the true dispersions come from.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum RhoSource {
    /// Draw from the conjugate prior by running this many slice-sampling
    /// moves started at `rho0`.
    Prior { slice_steps: usize },
    /// Use `rho0` for every component.
    Fixed,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GenerateConfig {
    pub num_docs: usize,
    pub sentences: SizeDistribution,
    pub tokens: SizeDistribution,
    pub vocab_size: usize,
    pub rho: RhoSource,
    /// Overrides the Beta draw of the topic-word probability.
    pub topic_prob: Option<f64>,
}

impl GenerateConfig {
    pub fn new(num_docs: usize, sentences: SizeDistribution, tokens: SizeDistribution, vocab_size: usize) -> Self {
        Self {
            num_docs,
            sentences,
            tokens,
            vocab_size,
            rho: RhoSource::Prior { slice_steps: 200 },
            topic_prob: None,
        }
    }
}

/// The latent variables and global parameters a synthetic corpus was drawn from.
#[derive(Debug, Clone, PartialEq)]
pub struct GroundTruth {
    pub assignments: Assignments,
    pub rho: Dispersion,
    pub intent_usage: Vec<f64>,
    pub topic_prob: f64,
    pub intent_word: Vec<Vec<f64>>,
    pub topic_word: Vec<Vec<f64>>,
}

/// Alphabetic, fixed-width synthetic word names ("waa", "wab", ...), so that
/// generated corpora survive the default preprocessing filters.
fn word_name(index: usize, width: usize) -> String {
    let mut letters = vec![b'a'; width];
    let mut rest = index;
    for slot in letters.iter_mut().rev() {
        *slot = b'a' + (rest % 26) as u8;
        rest /= 26;
    }
    let mut name = String::with_capacity(width + 1);
    name.push('w');
    name.push_str(std::str::from_utf8(&letters).expect("ascii"));
    name
}

fn synthetic_vocabulary(vocab_size: usize) -> Vocabulary {
    let mut width = 1;
    while 26usize.pow(width as u32) < vocab_size {
        width += 1;
    }
    Vocabulary::from_words((0..vocab_size).map(|i| word_name(i, width)).collect())
        .expect("names are distinct")
}

/// Samples a corpus and its latent structure from the generative model.
///
/// Sentence labels in the returned corpus are the true intents, named
/// `"1"..="K"`.
pub fn forward_generate<R: Rng + ?Sized>(
    hyper: &Hyperparameters,
    cfg: &GenerateConfig,
    rng: &mut R,
) -> Result<(Corpus, GroundTruth), ModelError> {
    hyper.validate()?;
    if cfg.vocab_size == 0 {
        return Err(ModelError::InvalidHyperparameters("vocab_size must be positive".into()));
    }
    let num_intents = hyper.num_intents;
    let num_topics = hyper.num_topics;

    let intent_usage = sample_dirichlet(hyper.lambda0, num_intents, rng);
    let topic_prob = match cfg.topic_prob {
        Some(p) => p,
        None => Beta::new(hyper.gamma0, hyper.gamma0)
            .expect("positive concentration")
            .sample(rng),
    };
    let rho = match (hyper.variant, cfg.rho) {
        (Variant::UniformOrder, _) => Dispersion::uniform(num_intents),
        (_, RhoSource::Fixed) => Dispersion::constant(hyper.rho0, num_intents)?,
        (_, RhoSource::Prior { slice_steps }) => {
            let prior = hyper.dispersion_prior(cfg.num_docs)?;
            let values = (0..num_intents - 1)
                .map(|k| {
                    let mut r = hyper.rho0;
                    for _ in 0..slice_steps {
                        r = slice_sample_rho(r, prior.means()[k], prior.nu0, k, num_intents, rng);
                    }
                    r
                })
                .collect();
            Dispersion::new(values)?
        }
    };
    let intent_word: Vec<Vec<f64>> = (0..num_intents)
        .map(|_| sample_dirichlet(hyper.alpha0, cfg.vocab_size, rng))
        .collect();
    let topic_word: Vec<Vec<f64>> = (0..num_topics)
        .map(|_| sample_dirichlet(hyper.beta0, cfg.vocab_size, rng))
        .collect();

    let canonical = Permutation::identity(num_intents);
    let mut documents = Vec::with_capacity(cfg.num_docs);
    let mut docs = Vec::with_capacity(cfg.num_docs);
    for d in 0..cfg.num_docs {
        let theta = sample_dirichlet(hyper.theta0, num_topics, rng);
        let num_sentences = cfg.sentences.sample(rng).max(1);
        let u: Vec<usize> = (0..num_sentences)
            .map(|_| sample_weights(&intent_usage, rng))
            .collect();
        let upsilon = sample_inversion(&rho, rng);
        let pi = canonical.compose(&upsilon.to_permutation());
        let z = compute_z(&u, &pi)?;

        let mut sentences = Vec::with_capacity(num_sentences);
        let mut topics = Vec::with_capacity(num_sentences);
        for &intent in &z {
            let n = cfg.tokens.sample(rng);
            let mut words = Vec::with_capacity(n);
            let mut token_topics = Vec::with_capacity(n);
            for _ in 0..n {
                let is_topic = hyper.variant != Variant::IntentOnly && rng.random::<f64>() < topic_prob;
                if is_topic {
                    let t = sample_weights(&theta, rng);
                    words.push(sample_weights(&topic_word[t], rng));
                    token_topics.push(Some(t));
                } else {
                    words.push(sample_weights(&intent_word[intent], rng));
                    token_topics.push(None);
                }
            }
            sentences.push(words);
            topics.push(token_topics);
        }
        documents.push(Document {
            id: format!("doc{d:05}"),
            sentences,
            labels: Some(z.clone()),
        });
        docs.push(DocAssignment {
            u,
            upsilon,
            pi,
            z,
            topics,
            fixed: false,
        });
    }

    let labels = LabelSet::from_words((1..=num_intents).map(|k| k.to_string()).collect())
        .expect("distinct label names");
    let corpus = Corpus {
        documents,
        vocabulary: synthetic_vocabulary(cfg.vocab_size),
        labels: Some(labels),
    };
    Ok((
        corpus,
        GroundTruth {
            assignments: Assignments { docs },
            rho,
            intent_usage,
            topic_prob,
            intent_word,
            topic_word,
        },
    ))
}
