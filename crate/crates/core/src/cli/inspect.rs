//! Word tables from a model dump.

use std::fmt::Write as _;

use anyhow::{bail, Result};
use serde::Serialize;

use crate::model::{classify_word_type, ModelDump, WordType};

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct IntentRow {
    /// Position in the canonical order for supervised models, else the intent id.
    pub number: usize,
    /// Intent id, 1-based.
    pub intent: usize,
    /// Label name; only supervised intents correspond to labels.
    pub label: Option<String>,
    pub words: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct InspectReport {
    pub supervised: bool,
    pub canonical_order: Vec<usize>,
    pub intents: Vec<IntentRow>,
    pub topics: Vec<Vec<String>>,
    pub intent_words: Vec<String>,
    pub topic_words: Vec<String>,
}

fn top_words(dist: &[f64], words: &[String], n: usize) -> Vec<String> {
    let mut ids: Vec<usize> = (0..dist.len()).collect();
    ids.sort_by(|&a, &b| dist[b].total_cmp(&dist[a]).then(a.cmp(&b)));
    ids.into_iter().take(n).map(|i| words[i].clone()).collect()
}

/// Top-`n` words per intent and topic, and the `n` most frequent words of
/// each type. `n` larger than the vocabulary lists every word.
pub fn inspect_model(dump: &ModelDump, n: usize) -> Result<InspectReport> {
    if n < 1 {
        bail!("n must be at least 1");
    }
    let order: Vec<usize> = if dump.supervised {
        dump.pi0.clone()
    } else {
        (1..=dump.num_intents).collect()
    };
    let intents = order
        .iter()
        .enumerate()
        .map(|(pos, &intent)| IntentRow {
            number: if dump.supervised { pos } else { intent },
            intent,
            label: if dump.supervised {
                dump.labels.as_ref().and_then(|l| l.get(intent - 1).cloned())
            } else {
                None
            },
            words: top_words(&dump.intent_word_dist[intent - 1], &dump.words, n),
        })
        .collect();
    let topics = dump
        .topic_word_dist
        .iter()
        .map(|dist| top_words(dist, &dump.words, n))
        .collect();

    let mut by_freq: Vec<usize> = (0..dump.words.len()).collect();
    let freq = |v: usize| u64::from(dump.word_type_counts[v][0]) + u64::from(dump.word_type_counts[v][1]);
    by_freq.sort_by(|&a, &b| freq(b).cmp(&freq(a)).then(a.cmp(&b)));
    let (mut intent_words, mut topic_words) = (Vec::new(), Vec::new());
    for v in by_freq {
        let list = match classify_word_type(dump.word_type_counts[v]) {
            WordType::Intent => &mut intent_words,
            WordType::Topic => &mut topic_words,
        };
        if list.len() < n {
            list.push(dump.words[v].clone());
        }
    }
    Ok(InspectReport {
        supervised: dump.supervised,
        canonical_order: dump.pi0.clone(),
        intents,
        topics,
        intent_words,
        topic_words,
    })
}

pub fn render_text(report: &InspectReport) -> String {
    let mut out = String::new();
    let w = &mut out;
    if report.supervised {
        let order: Vec<String> = report.canonical_order.iter().map(usize::to_string).collect();
        writeln!(w, "Canonical intent order: {}", order.join(" ")).unwrap();
        writeln!(w).unwrap();
    }
    writeln!(w, "No.\tIntent\tHigh-frequency words").unwrap();
    for row in &report.intents {
        let name = row.label.clone().unwrap_or_else(|| row.intent.to_string());
        writeln!(w, "{}\t{}\t{}", row.number, name, row.words.join(", ")).unwrap();
    }
    writeln!(w).unwrap();
    writeln!(w, "Topic\tHigh-frequency words").unwrap();
    for (t, words) in report.topics.iter().enumerate() {
        writeln!(w, "{}\t{}", t + 1, words.join(", ")).unwrap();
    }
    writeln!(w).unwrap();
    writeln!(w, "Intent words\tTopic words").unwrap();
    let rows = report.intent_words.len().max(report.topic_words.len());
    for i in 0..rows {
        let a = report.intent_words.get(i).map_or("", String::as_str);
        let b = report.topic_words.get(i).map_or("", String::as_str);
        writeln!(w, "{a}\t{b}").unwrap();
    }
    out
}
