//! On-disk formats for trained models and per-document assignments.
//! Intent and topic ids are 1-based in both.

use std::io::{BufRead, Write};

use serde::{Deserialize, Serialize};

use super::{point_estimates, Assignments, Hyperparameters, ModelError, ModelState};
use crate::corpus::Corpus;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelDump {
    #[serde(rename = "K")]
    pub num_intents: usize,
    #[serde(rename = "T")]
    pub num_topics: usize,
    pub rho: Vec<f64>,
    pub pi0: Vec<usize>,
    pub intent_word_dist: Vec<Vec<f64>>,
    pub topic_word_dist: Vec<Vec<f64>>,
    pub hyper: Hyperparameters,
    pub words: Vec<String>,
    /// Per word: occurrences as intent word and as topic word.
    pub word_type_counts: Vec<[u32; 2]>,
    /// Intent names when trained with labels; index = intent id - 1.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub labels: Option<Vec<String>>,
    #[serde(default)]
    pub supervised: bool,
}

impl ModelDump {
    pub fn from_state(state: &ModelState, corpus: &Corpus, supervised: bool) -> Self {
        let est = point_estimates(state);
        Self {
            num_intents: state.num_intents(),
            num_topics: state.num_topics(),
            rho: state.rho.as_slice().to_vec(),
            pi0: state.pi0.to_one_based(),
            intent_word_dist: est.intent_word,
            topic_word_dist: est.topic_word,
            hyper: state.hyper.clone(),
            words: corpus.vocabulary.words().to_vec(),
            word_type_counts: state.counts.nv.clone(),
            labels: corpus.labels.as_ref().map(|l| l.words().to_vec()),
            supervised,
        }
    }
}

pub fn write_model_dump<W: Write>(dump: &ModelDump, writer: W) -> Result<(), ModelError> {
    serde_json::to_writer_pretty(writer, dump)?;
    Ok(())
}

pub fn read_model_dump<R: std::io::Read>(reader: R) -> Result<ModelDump, ModelError> {
    Ok(serde_json::from_reader(reader)?)
}

/// One line of the assignments JSONL.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AssignmentRecord {
    pub id: String,
    pub z: Vec<usize>,
    pub pi: Vec<usize>,
    pub u: Vec<usize>,
    pub b: Vec<Vec<u8>>,
    pub t: Vec<Vec<Option<usize>>>,
}

impl AssignmentRecord {
    /// Sentence intents as 0-based ids.
    pub fn intents(&self) -> Result<Vec<usize>, ModelError> {
        self.z
            .iter()
            .map(|&x| {
                x.checked_sub(1)
                    .ok_or_else(|| ModelError::Malformed(format!("intent id 0 in {:?}", self.id)))
            })
            .collect()
    }
}

/// Writes assignments with `z` replaced by `intents` when given (e.g. modal
/// predictions over the chain tail).
pub fn write_assignments<W: Write>(
    corpus: &Corpus,
    assignments: &Assignments,
    intents: Option<&[Vec<usize>]>,
    mut writer: W,
) -> Result<(), ModelError> {
    for (d, (doc, a)) in corpus.documents.iter().zip(&assignments.docs).enumerate() {
        let z = intents.map_or(&a.z, |all| &all[d]);
        let record = AssignmentRecord {
            id: doc.id.clone(),
            z: z.iter().map(|x| x + 1).collect(),
            pi: a.pi.to_one_based(),
            u: a.u.iter().map(|x| x + 1).collect(),
            b: a.types(),
            t: a
                .topics
                .iter()
                .map(|s| s.iter().map(|t| t.map(|t| t + 1)).collect())
                .collect(),
        };
        serde_json::to_writer(&mut writer, &record)?;
        writer.write_all(b"\n")?;
    }
    Ok(())
}

pub fn read_assignments<R: BufRead>(reader: R) -> Result<Vec<AssignmentRecord>, ModelError> {
    let mut out = Vec::new();
    for line in reader.lines() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        out.push(serde_json::from_str(&line)?);
    }
    Ok(out)
}
