//! Command-line interface: preprocessing, training, evaluation, synthetic
//! data and model inspection.

mod config;
mod inspect;

pub use config::{pick, ConfigFile};
pub use inspect::{inspect_model, render_text, InspectReport, IntentRow};

use std::collections::HashMap;
use std::fs::{self, File};
use std::io::{BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use anyhow::{bail, ensure, Context, Result};
use clap::{Args, Parser, Subcommand};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::corpus::{load_corpus, load_stopwords, load_vocabulary, preprocess, Corpus, PreprocessConfig};
use crate::eval::{MetricsReport, RunMetrics};
use crate::model::{
    forward_generate, init_state, read_assignments, read_model_dump, write_assignments, write_model_dump,
    AssignmentRecord, GenerateConfig, Hyperparameters, ModelDump, SizeDistribution, Variant,
};
use crate::sampler::{run_gibbs, GibbsConfig, GibbsRun, Prediction};
use crate::supervised::{apply_supervision, LabeledSplit};

#[derive(Debug, Parser)]
#[command(name = "gmm-lda", version, about = "Topic and sentence-intent modeling with ordered intents")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Filter a tokenized corpus and write it with its vocabulary.
    Preprocess(PreprocessArgs),
    /// Run Gibbs chains, one per seed.
    Train(TrainArgs),
    /// Score assignments against the corpus labels.
    Eval(EvalArgs),
    /// Sample a synthetic corpus with known intents.
    Synth(SynthArgs),
    /// Print word tables of a trained model.
    Inspect(InspectArgs),
}

#[derive(Debug, Args)]
pub struct PreprocessArgs {
    #[arg(long)]
    pub corpus: PathBuf,
    #[arg(long)]
    pub stopwords: Option<PathBuf>,
    #[arg(long, default_value_t = 3)]
    pub min_count: usize,
    #[arg(long, default_value_t = 5)]
    pub min_sentence_tokens: usize,
    /// Keep tokens with digits or punctuation.
    #[arg(long)]
    pub keep_non_alphabetic: bool,
    /// Output directory for corpus.jsonl and vocab.json.
    #[arg(long)]
    pub out: PathBuf,
}

/// Model settings shared by `train` and `synth`.
#[derive(Debug, Default, Args)]
pub struct ModelArgs {
    /// Number of intents.
    #[arg(long)]
    pub k: Option<usize>,
    /// Number of topics.
    #[arg(long)]
    pub t: Option<usize>,
    #[arg(long)]
    pub theta0: Option<f64>,
    #[arg(long)]
    pub lambda0: Option<f64>,
    #[arg(long)]
    pub alpha0: Option<f64>,
    #[arg(long)]
    pub beta0: Option<f64>,
    #[arg(long)]
    pub gamma0: Option<f64>,
    #[arg(long)]
    pub rho0: Option<f64>,
    #[arg(long)]
    pub nu0_scale: Option<f64>,
    /// Entropic regularization weight (0 disables it).
    #[arg(long)]
    pub c: Option<f64>,
    #[arg(long)]
    pub variant: Option<Variant>,
}

impl ModelArgs {
    fn resolve(&self, file: &ConfigFile) -> Result<Hyperparameters> {
        let k = pick(self.k, file, "k")?.context("--k is required")?;
        let t = pick(self.t, file, "t")?.context("--t is required")?;
        let mut h = Hyperparameters::new(k, t);
        let fields: [(&str, Option<f64>, &mut f64); 8] = [
            ("theta0", self.theta0, &mut h.theta0),
            ("lambda0", self.lambda0, &mut h.lambda0),
            ("alpha0", self.alpha0, &mut h.alpha0),
            ("beta0", self.beta0, &mut h.beta0),
            ("gamma0", self.gamma0, &mut h.gamma0),
            ("rho0", self.rho0, &mut h.rho0),
            ("nu0-scale", self.nu0_scale, &mut h.nu0_scale),
            ("c", self.c, &mut h.c),
        ];
        for (key, cli, slot) in fields {
            if let Some(v) = pick(cli, file, key)? {
                *slot = v;
            }
        }
        if let Some(v) = pick(self.variant, file, "variant")? {
            h.variant = v;
        }
        h.validate()?;
        Ok(h)
    }
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    /// Flat key=value file; command-line flags take precedence.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Corpus JSONL.
    #[arg(long)]
    pub corpus: Option<PathBuf>,
    /// Vocabulary sidecar fixing the word ids.
    #[arg(long)]
    pub vocab: Option<PathBuf>,
    #[command(flatten)]
    pub model: ModelArgs,
    /// Sweeps per chain.
    #[arg(long)]
    pub iters: Option<usize>,
    /// Comma-separated seeds, one chain each (default 1,2,3,4,5).
    #[arg(long, value_delimiter = ',')]
    pub seed: Vec<u64>,
    /// JSON file {"labeled_ids": [...]}: documents whose labels are fixed.
    #[arg(long)]
    pub labeled_split: Option<PathBuf>,
    /// `last` or `mode:N`.
    #[arg(long)]
    pub prediction: Option<Prediction>,
    /// Diagnostics interval in sweeps.
    #[arg(long)]
    pub report_every: Option<usize>,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

const TRAIN_KEYS: &[&str] = &[
    "corpus",
    "vocab",
    "k",
    "t",
    "theta0",
    "lambda0",
    "alpha0",
    "beta0",
    "gamma0",
    "rho0",
    "nu0-scale",
    "c",
    "variant",
    "iters",
    "seed",
    "labeled-split",
    "prediction",
    "report-every",
    "out",
];

/// Fully resolved training run.
#[derive(Debug, Clone, Serialize)]
pub struct TrainPlan {
    pub corpus: PathBuf,
    pub vocab: Option<PathBuf>,
    pub hyper: Hyperparameters,
    pub iterations: usize,
    pub seeds: Vec<u64>,
    pub labeled_split: Option<PathBuf>,
    pub prediction: String,
    pub report_every: usize,
    pub out: PathBuf,
}

impl TrainArgs {
    pub fn resolve(&self) -> Result<TrainPlan> {
        let file = match &self.config {
            Some(path) => ConfigFile::load(path, TRAIN_KEYS)?,
            None => ConfigFile::default(),
        };
        let seeds = if self.seed.is_empty() {
            file.get_list("seed")?.unwrap_or_else(|| (1..=5).collect())
        } else {
            self.seed.clone()
        };
        ensure!(!seeds.is_empty(), "at least one seed is required");
        let prediction = pick(self.prediction, &file, "prediction")?.unwrap_or(Prediction::LastSample);
        Ok(TrainPlan {
            corpus: pick(self.corpus.clone(), &file, "corpus")?.context("--corpus is required")?,
            vocab: pick(self.vocab.clone(), &file, "vocab")?,
            hyper: self.model.resolve(&file)?,
            iterations: pick(self.iters, &file, "iters")?.unwrap_or(2000),
            seeds,
            labeled_split: pick(self.labeled_split.clone(), &file, "labeled-split")?,
            prediction: prediction.to_string(),
            report_every: pick(self.report_every, &file, "report-every")?.unwrap_or(10),
            out: pick(self.out.clone(), &file, "out")?.context("--out is required")?,
        })
    }
}

#[derive(Debug, Args)]
pub struct EvalArgs {
    #[arg(long)]
    pub corpus: PathBuf,
    #[arg(long)]
    pub vocab: Option<PathBuf>,
    /// Assignment files to score, one run each.
    #[arg(long, value_delimiter = ',')]
    pub assignments: Vec<PathBuf>,
    /// Training output directory; scores every seed-*/assignments.jsonl in it.
    #[arg(long)]
    pub run: Option<PathBuf>,
    /// Exclude these documents (the label-locked ones) from scoring.
    #[arg(long)]
    pub labeled_split: Option<PathBuf>,
    /// Also report accuracy; on by default with --labeled-split.
    #[arg(long)]
    pub accuracy: bool,
    /// Metrics JSON destination (stdout when absent).
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct SynthArgs {
    #[command(flatten)]
    pub model: ModelArgs,
    #[arg(long, default_value_t = 100)]
    pub docs: usize,
    #[arg(long, default_value_t = 200)]
    pub vocab_size: usize,
    /// Mean sentences per document (Poisson, at least 1).
    #[arg(long, default_value_t = 8.0)]
    pub sentences: f64,
    /// Mean tokens per sentence (Poisson, at least 1).
    #[arg(long, default_value_t = 10.0)]
    pub tokens: f64,
    /// Use rho0 for every dispersion instead of drawing from the prior.
    #[arg(long)]
    pub fixed_rho: bool,
    #[arg(long, default_value_t = 1)]
    pub seed: u64,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct InspectArgs {
    /// model.json written by train.
    #[arg(long)]
    pub model: PathBuf,
    #[arg(long, default_value_t = 18)]
    pub n: usize,
    /// Print JSON instead of tables.
    #[arg(long)]
    pub json: bool,
}

pub fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Preprocess(args) => cmd_preprocess(&args),
        Command::Train(args) => cmd_train(&args.resolve()?),
        Command::Eval(args) => cmd_eval(&args),
        Command::Synth(args) => cmd_synth(&args),
        Command::Inspect(args) => cmd_inspect(&args),
    }
}

/// Writes to stdout, treating a closed pipe as success.
fn emit(text: &str) -> Result<()> {
    let mut out = std::io::stdout().lock();
    match out.write_all(text.as_bytes()).and_then(|()| out.flush()) {
        Err(e) if e.kind() != std::io::ErrorKind::BrokenPipe => Err(e.into()),
        _ => Ok(()),
    }
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    Ok(BufWriter::new(
        File::create(path).with_context(|| format!("creating {}", path.display()))?,
    ))
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut w = create(path)?;
    serde_json::to_writer_pretty(&mut w, value)?;
    w.write_all(b"\n")?;
    w.flush()?;
    Ok(())
}

pub fn load_indexed_corpus(corpus: &Path, vocab: Option<&Path>) -> Result<Corpus> {
    let raw = load_corpus(corpus)?;
    let vocabulary = vocab.map(load_vocabulary).transpose()?;
    Ok(Corpus::index(&raw, vocabulary)?)
}

fn cmd_preprocess(args: &PreprocessArgs) -> Result<()> {
    let raw = load_corpus(&args.corpus)?;
    let cfg = PreprocessConfig {
        stopwords: args.stopwords.as_deref().map(load_stopwords).transpose()?.unwrap_or_default(),
        min_token_count: args.min_count,
        min_sentence_tokens: args.min_sentence_tokens,
        drop_non_alphabetic: !args.keep_non_alphabetic,
        ..PreprocessConfig::default()
    };
    let corpus = preprocess(&raw, &cfg)?;
    fs::create_dir_all(&args.out)?;
    corpus.save(&args.out.join("corpus.jsonl"), &args.out.join("vocab.json"))?;
    emit(&format!("{}\n", serde_json::to_string(&corpus.stats())?))?;
    Ok(())
}

/// Flat intent predictions and labels over the documents in `docs`.
fn flatten(corpus: &Corpus, predictions: &[Vec<usize>], docs: &[usize]) -> (Vec<usize>, Vec<usize>) {
    let mut pred = Vec::new();
    let mut truth = Vec::new();
    for &d in docs {
        if let Some(labels) = &corpus.documents[d].labels {
            pred.extend_from_slice(&predictions[d]);
            truth.extend_from_slice(labels);
        }
    }
    (pred, truth)
}

struct SeedResult {
    seed: u64,
    run: GibbsRun,
}

fn train_seed(corpus: &Corpus, plan: &TrainPlan, locked: &[usize], seed: u64) -> Result<SeedResult> {
    let cfg = GibbsConfig {
        iterations: plan.iterations,
        seed,
        report_every: plan.report_every,
        prediction: plan.prediction.parse()?,
        check_every: 0,
    };
    let mut rng = cfg.rng();
    let mut state = init_state(corpus, &plan.hyper, &mut rng)?;
    if !locked.is_empty() {
        apply_supervision(&mut state, corpus, locked, &mut rng)?;
    }
    let run = run_gibbs(corpus, state, &cfg, &mut rng)?;
    Ok(SeedResult { seed, run })
}

pub fn cmd_train(plan: &TrainPlan) -> Result<()> {
    let corpus = load_indexed_corpus(&plan.corpus, plan.vocab.as_deref())?;
    ensure!(corpus.num_docs() > 0, "corpus {} has no documents", plan.corpus.display());
    GibbsConfig {
        iterations: plan.iterations,
        prediction: plan.prediction.parse()?,
        ..GibbsConfig::default()
    }
    .validate()?;

    let locked = match &plan.labeled_split {
        Some(path) => {
            ensure!(corpus.labels.is_some(), "supervised training needs a corpus with sentence labels");
            ensure!(
                corpus.num_labels() <= plan.hyper.num_intents,
                "corpus has {} labels but K = {}",
                corpus.num_labels(),
                plan.hyper.num_intents
            );
            LabeledSplit::load(path)?.indices(&corpus)?
        }
        None => Vec::new(),
    };

    let results: Vec<Result<SeedResult>> = std::thread::scope(|scope| {
        let handles: Vec<_> = plan
            .seeds
            .iter()
            .map(|&seed| {
                let corpus = &corpus;
                let locked = &locked;
                scope.spawn(move || train_seed(corpus, plan, locked, seed))
            })
            .collect();
        handles
            .into_iter()
            .map(|h| h.join().unwrap_or_else(|_| bail!("training thread panicked")))
            .collect()
    });

    fs::create_dir_all(&plan.out)?;
    write_json(&plan.out.join("run.json"), plan)?;
    let supervised = !locked.is_empty();
    let scored: Vec<usize> = (0..corpus.num_docs()).filter(|d| locked.binary_search(d).is_err()).collect();
    let mut metrics = Vec::new();
    for result in results {
        let SeedResult { seed, run } = result?;
        let dir = plan.out.join(format!("seed-{seed}"));
        fs::create_dir_all(&dir)?;
        let dump = ModelDump::from_state(&run.state, &corpus, supervised);
        let mut w = create(&dir.join("model.json"))?;
        write_model_dump(&dump, &mut w)?;
        w.flush()?;
        let mut w = create(&dir.join("assignments.jsonl"))?;
        write_assignments(&corpus, &run.state.assignments, Some(&run.predictions), &mut w)?;
        w.flush()?;
        let mut w = create(&dir.join("diagnostics.csv"))?;
        run.diagnostics.write_csv(&mut w)?;
        w.flush()?;

        if corpus.labels.is_some() {
            let (pred, truth) = flatten(&corpus, &run.predictions, &scored);
            if pred.len() >= 2 {
                let mut m = RunMetrics::compute(&pred, &truth, supervised)?;
                m.seed = Some(seed);
                metrics.push(m);
            }
        }
        eprintln!("seed {seed}: done");
    }
    if !metrics.is_empty() {
        let report = MetricsReport::from_runs(metrics)?;
        write_json(&plan.out.join("metrics.json"), &report)?;
        eprintln!("mean ARI {:.4}", report.ari);
    }
    Ok(())
}

fn seed_from_dir(path: &Path) -> Option<u64> {
    path.parent()?.file_name()?.to_str()?.strip_prefix("seed-")?.parse().ok()
}

fn assignment_files(args: &EvalArgs) -> Result<Vec<PathBuf>> {
    let mut files = args.assignments.clone();
    if let Some(dir) = &args.run {
        let mut found: Vec<PathBuf> = fs::read_dir(dir)
            .with_context(|| format!("reading {}", dir.display()))?
            .filter_map(|e| e.ok().map(|e| e.path()))
            .filter(|p| p.file_name().and_then(|n| n.to_str()).is_some_and(|n| n.starts_with("seed-")))
            .map(|p| p.join("assignments.jsonl"))
            .filter(|p| p.is_file())
            .collect();
        found.sort_by_key(|p| (seed_from_dir(p), p.clone()));
        files.extend(found);
    }
    ensure!(!files.is_empty(), "no assignment files given (use --assignments or --run)");
    Ok(files)
}

fn predictions_by_doc(corpus: &Corpus, records: &[AssignmentRecord], path: &Path) -> Result<Vec<Vec<usize>>> {
    let by_id: HashMap<&str, &AssignmentRecord> = records.iter().map(|r| (r.id.as_str(), r)).collect();
    corpus
        .documents
        .iter()
        .map(|doc| {
            let record = by_id
                .get(doc.id.as_str())
                .with_context(|| format!("{}: no assignment for document {:?}", path.display(), doc.id))?;
            let z = record.intents()?;
            ensure!(
                z.len() == doc.sentences.len(),
                "{}: document {:?} has {} sentences but {} intents",
                path.display(),
                doc.id,
                doc.sentences.len(),
                z.len()
            );
            Ok(z)
        })
        .collect()
}

fn cmd_eval(args: &EvalArgs) -> Result<()> {
    let corpus = load_indexed_corpus(&args.corpus, args.vocab.as_deref())?;
    ensure!(corpus.labels.is_some(), "corpus {} has no sentence labels", args.corpus.display());
    let locked = match &args.labeled_split {
        Some(path) => LabeledSplit::load(path)?.indices(&corpus)?,
        None => Vec::new(),
    };
    let scored: Vec<usize> = (0..corpus.num_docs()).filter(|d| locked.binary_search(d).is_err()).collect();
    let with_accuracy = args.accuracy || args.labeled_split.is_some();

    let mut runs = Vec::new();
    for path in assignment_files(args)? {
        let file = File::open(&path).with_context(|| format!("opening {}", path.display()))?;
        let records = read_assignments(BufReader::new(file))?;
        let predictions = predictions_by_doc(&corpus, &records, &path)?;
        let (pred, truth) = flatten(&corpus, &predictions, &scored);
        let mut m = RunMetrics::compute(&pred, &truth, with_accuracy)?;
        m.seed = seed_from_dir(&path);
        runs.push(m);
    }
    let report = MetricsReport::from_runs(runs)?;
    match &args.out {
        Some(path) => write_json(path, &report)?,
        None => emit(&format!("{}\n", serde_json::to_string_pretty(&report)?))?,
    }
    Ok(())
}

#[derive(Debug, Serialize)]
struct SynthTruth {
    rho: Vec<f64>,
    topic_prob: f64,
    intent_usage: Vec<f64>,
}

fn cmd_synth(args: &SynthArgs) -> Result<()> {
    let hyper = args.model.resolve(&ConfigFile::default())?;
    ensure!(args.sentences > 0.0 && args.tokens > 0.0, "--sentences and --tokens must be positive");
    let mut cfg = GenerateConfig::new(
        args.docs,
        SizeDistribution::Poisson { mean: args.sentences, min: 1 },
        SizeDistribution::Poisson { mean: args.tokens, min: 1 },
        args.vocab_size,
    );
    if args.fixed_rho {
        cfg.rho = crate::model::RhoSource::Fixed;
    }
    let mut rng = ChaCha8Rng::seed_from_u64(args.seed);
    let (corpus, truth) = forward_generate(&hyper, &cfg, &mut rng)?;
    fs::create_dir_all(&args.out)?;
    corpus.save(&args.out.join("corpus.jsonl"), &args.out.join("vocab.json"))?;
    let mut w = create(&args.out.join("truth.jsonl"))?;
    write_assignments(&corpus, &truth.assignments, None, &mut w)?;
    w.flush()?;
    write_json(
        &args.out.join("truth.json"),
        &SynthTruth {
            rho: truth.rho.as_slice().to_vec(),
            topic_prob: truth.topic_prob,
            intent_usage: truth.intent_usage.clone(),
        },
    )?;
    emit(&format!("{}\n", serde_json::to_string(&corpus.stats())?))?;
    Ok(())
}

fn cmd_inspect(args: &InspectArgs) -> Result<()> {
    let file = File::open(&args.model).with_context(|| format!("opening {}", args.model.display()))?;
    let dump = read_model_dump(BufReader::new(file))?;
    let report = inspect_model(&dump, args.n)?;
    if args.json {
        emit(&format!("{}\n", serde_json::to_string_pretty(&report)?))?;
    } else {
        emit(&render_text(&report))?;
    }
    Ok(())
}
