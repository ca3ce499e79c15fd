//! Collapsed Gibbs sampling over bags, dispersions, inversion vectors and
//! token types/topics.

mod entropy;
mod moves;

pub use entropy::word_entropy;
pub use moves::{
    bt_weights, bt_weights_entropic, resample_bt, resample_bt_entropic, resample_rho, resample_u,
    resample_upsilon, u_conditional, upsilon_conditional, upsilon_log_prior,
};

use std::io::Write;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpus::Corpus;
use crate::model::{joint_log_score, ModelState, Variant};

#[derive(Debug, Error)]
pub enum SamplerError {
    #[error("invalid sampler configuration: {0}")]
    InvalidConfig(String),
    #[error("count tables diverged from the assignments after iteration {iteration}")]
    Inconsistent { iteration: usize },
    #[error("word entropy is undefined for a word with no occurrences")]
    EmptyWord,
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// How the reported sentence intents are read off the chain.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Prediction {
    LastSample,
    /// Per-sentence modal intent over the last `n` sweeps.
    ModeOverTail(usize),
}

impl std::str::FromStr for Prediction {
    type Err = SamplerError;

    /// Parses `last` or `mode:N`.
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "last" | "last_sample" => Ok(Self::LastSample),
            _ => s
                .strip_prefix("mode:")
                .and_then(|n| n.parse().ok())
                .map(Self::ModeOverTail)
                .ok_or_else(|| SamplerError::InvalidConfig(format!("unknown prediction mode {s:?}"))),
        }
    }
}

impl std::fmt::Display for Prediction {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Self::LastSample => f.write_str("last"),
            Self::ModeOverTail(n) => write!(f, "mode:{n}"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GibbsConfig {
    /// Total sweeps; there is no separate burn-in.
    pub iterations: usize,
    pub seed: u64,
    /// Diagnostics are recorded every this many sweeps (0 disables them).
    pub report_every: usize,
    pub prediction: Prediction,
    /// Rebuild and compare the count tables every this many sweeps
    /// (0 disables the check in release builds; debug builds check every sweep).
    pub check_every: usize,
}

impl Default for GibbsConfig {
    fn default() -> Self {
        Self {
            iterations: 2000,
            seed: 0,
            report_every: 100,
            prediction: Prediction::LastSample,
            check_every: 0,
        }
    }
}

impl GibbsConfig {
    pub fn validate(&self) -> Result<(), SamplerError> {
        if self.iterations == 0 {
            return Err(SamplerError::InvalidConfig("iterations must be at least 1".into()));
        }
        if let Prediction::ModeOverTail(n) = self.prediction {
            if n == 0 || n > self.iterations {
                return Err(SamplerError::InvalidConfig(format!(
                    "tail length {n} must lie in 1..={}",
                    self.iterations
                )));
            }
        }
        Ok(())
    }

    /// The chain's random number generator.
    pub fn rng(&self) -> ChaCha8Rng {
        ChaCha8Rng::seed_from_u64(self.seed)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DiagnosticRecord {
    pub iteration: usize,
    pub joint_log_score: f64,
    pub intent_fraction: f64,
    pub mean_rho: f64,
}

impl DiagnosticRecord {
    pub fn capture(iteration: usize, state: &ModelState) -> Self {
        let total = state.counts.total_tokens();
        Self {
            iteration,
            joint_log_score: joint_log_score(state),
            intent_fraction: if total == 0 {
                0.0
            } else {
                state.counts.fb[0] as f64 / total as f64
            },
            mean_rho: state.rho.mean(),
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct ChainDiagnostics {
    pub records: Vec<DiagnosticRecord>,
}

impl ChainDiagnostics {
    pub fn write_csv<W: Write>(&self, mut writer: W) -> std::io::Result<()> {
        writeln!(writer, "iteration,joint_log_score,intent_fraction,mean_rho")?;
        for r in &self.records {
            writeln!(
                writer,
                "{},{},{},{}",
                r.iteration, r.joint_log_score, r.intent_fraction, r.mean_rho
            )?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct GibbsRun {
    pub state: ModelState,
    pub diagnostics: ChainDiagnostics,
    /// Predicted intent per sentence, 0-based.
    pub predictions: Vec<Vec<usize>>,
}

/// One full sweep: bags, dispersions, inversion vectors, then token types.
pub fn sweep<R: Rng + ?Sized>(corpus: &Corpus, state: &mut ModelState, rng: &mut R) {
    let num_docs = corpus.num_docs();
    for d in 0..num_docs {
        if state.assignments.docs[d].fixed {
            continue;
        }
        for s in 0..corpus.documents[d].sentences.len() {
            resample_u(corpus, state, d, s, rng);
        }
    }
    resample_rho(state, rng);
    let num_intents = state.num_intents();
    for d in 0..num_docs {
        if state.assignments.docs[d].fixed {
            continue;
        }
        for k in 0..num_intents - 1 {
            resample_upsilon(corpus, state, d, k, rng);
        }
    }
    if state.hyper.variant == Variant::IntentOnly {
        return;
    }
    let entropic = state.hyper.c > 0.0;
    for d in 0..num_docs {
        for s in 0..corpus.documents[d].sentences.len() {
            for m in 0..corpus.documents[d].sentences[s].len() {
                if entropic {
                    resample_bt_entropic(corpus, state, d, s, m, rng);
                } else {
                    resample_bt(corpus, state, d, s, m, rng);
                }
            }
        }
    }
}

pub fn run_gibbs<R: Rng + ?Sized>(
    corpus: &Corpus,
    state: ModelState,
    cfg: &GibbsConfig,
    rng: &mut R,
) -> Result<GibbsRun, SamplerError> {
    run_gibbs_with(corpus, state, cfg, rng, |_, _| {})
}

/// [`run_gibbs`], calling `observer(iteration, state)` after every sweep.
pub fn run_gibbs_with<R, F>(
    corpus: &Corpus,
    mut state: ModelState,
    cfg: &GibbsConfig,
    rng: &mut R,
    mut observer: F,
) -> Result<GibbsRun, SamplerError>
where
    R: Rng + ?Sized,
    F: FnMut(usize, &ModelState),
{
    cfg.validate()?;
    let num_intents = state.num_intents();
    let tail = match cfg.prediction {
        Prediction::LastSample => 0,
        Prediction::ModeOverTail(n) => n,
    };
    let mut tally: Vec<Vec<Vec<u32>>> = if tail > 0 {
        state
            .assignments
            .docs
            .iter()
            .map(|a| vec![vec![0; num_intents]; a.z.len()])
            .collect()
    } else {
        Vec::new()
    };

    let mut diagnostics = ChainDiagnostics::default();
    for iteration in 1..=cfg.iterations {
        sweep(corpus, &mut state, rng);
        let check = cfg!(debug_assertions) || (cfg.check_every > 0 && iteration % cfg.check_every == 0);
        if check && !state.is_consistent(corpus) {
            return Err(SamplerError::Inconsistent { iteration });
        }
        if cfg.report_every > 0 && iteration % cfg.report_every == 0 {
            diagnostics.records.push(DiagnosticRecord::capture(iteration, &state));
        }
        if tail > 0 && iteration > cfg.iterations - tail {
            for (doc_tally, a) in tally.iter_mut().zip(&state.assignments.docs) {
                for (sentence, &k) in doc_tally.iter_mut().zip(&a.z) {
                    sentence[k] += 1;
                }
            }
        }
        observer(iteration, &state);
    }

    let predictions = if tail > 0 {
        tally
            .iter()
            .map(|doc| doc.iter().map(|counts| modal_index(counts)).collect())
            .collect()
    } else {
        state.intents()
    };
    Ok(GibbsRun {
        state,
        diagnostics,
        predictions,
    })
}

/// Index of the largest count, lowest index on ties.
fn modal_index(counts: &[u32]) -> usize {
    let mut best = 0;
    for (i, &c) in counts.iter().enumerate() {
        if c > counts[best] {
            best = i;
        }
    }
    best
}

#[cfg(test)]
mod tests;
