//! Config-driven pipeline commands.
//!
//! Every command reads one [`RunConfig`], writes its artifacts under
//! `out_dir`, and records a manifest with the resolved config, its SHA-256
//! and the seed. JSON artifacts embed the same header. Wall-clock data goes
//! to `meta/<command>.json` only, so reruns reproduce every other file
//! byte for byte.

use std::collections::BTreeSet;
use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;
use std::time::{Instant, SystemTime, UNIX_EPOCH};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::corpus::{generate_synthetic_corpus, gold_triggers, load_corpus, write_corpus, SentenceRecord, SyntheticSpec};
use crate::decoding::{
    collect_candidates, group_questions, load_predictions, predictions_at, save_predictions, ThresholdConfig,
    ThresholdSelection,
};
use crate::encoder::{
    fine_tune, lexical_match_exclusions, DevSet, EncoderAdapter, EpochMetrics, MockConfig, MockEncoder, TrainConfig,
    PRETRAINED_CHECKPOINTS,
};
use crate::error::{Error, Result};
use crate::evaluation::{score, score_types, EvalReport};
use crate::interpret::{cls_projection, connectivity, projection_svg, write_projection_csv};
use crate::markers::MarkerMode;
use crate::ontology::{EventOntology, QuestionStyle};
use crate::packing::{load_instances, save_instances, training_examples, NoAnswerPolicy, PackConfig, QaSetup};
use crate::tokenizer::{TokenizerAdapter, WordTokenizer};

/// Directory searched for named checkpoints.
pub const CACHE_ENV: &str = "EVENTQA_CACHE_DIR";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Command {
    Synth,
    Prepare,
    Train,
    Calibrate,
    Predict,
    Evaluate,
    Analyze,
}

impl Command {
    pub const ALL: [Command; 7] = [
        Command::Synth,
        Command::Prepare,
        Command::Train,
        Command::Calibrate,
        Command::Predict,
        Command::Evaluate,
        Command::Analyze,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Command::Synth => "synth",
            Command::Prepare => "prepare",
            Command::Train => "train",
            Command::Calibrate => "calibrate",
            Command::Predict => "predict",
            Command::Evaluate => "evaluate",
            Command::Analyze => "analyze",
        }
    }
}

impl fmt::Display for Command {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.pad(self.as_str())
    }
}

impl FromStr for Command {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Command::ALL
            .into_iter()
            .find(|c| c.as_str() == s)
            .ok_or_else(|| Error::arg(format!("unknown command `{s}`")))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EncoderSettings {
    pub hidden_size: usize,
    pub n_layers: usize,
    pub n_heads: usize,
    pub ffn_size: usize,
    pub lexical_match: bool,
}

impl Default for EncoderSettings {
    fn default() -> Self {
        EncoderSettings {
            hidden_size: 32,
            n_layers: 2,
            n_heads: 2,
            ffn_size: 64,
            lexical_match: true,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SynthSettings {
    pub n_train: usize,
    pub n_dev: usize,
    pub n_test: usize,
    pub ambiguity_rate: f64,
    pub multi_event_rate: f64,
    pub empty_rate: f64,
    pub entity_type_cue: f64,
    pub sentences_per_doc: usize,
}

impl Default for SynthSettings {
    fn default() -> Self {
        let d = SyntheticSpec::new(1, &["A"], 0.0, 0);
        SynthSettings {
            n_train: 200,
            n_dev: 100,
            n_test: 200,
            ambiguity_rate: 0.0,
            multi_event_rate: d.multi_event_rate,
            empty_rate: d.empty_rate,
            entity_type_cue: d.entity_type_cue,
            sentences_per_doc: d.sentences_per_doc,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AnalyzeSettings {
    /// Saliency maps exported for the first test questions with an answer.
    pub n_saliency: usize,
}

impl Default for AnalyzeSettings {
    fn default() -> Self {
        AnalyzeSettings { n_saliency: 3 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub out_dir: PathBuf,
    pub seed: u64,
    /// Corpus files; default to `<out_dir>/corpus/{train,dev,test}.jsonl`.
    pub train_path: Option<PathBuf>,
    pub dev_path: Option<PathBuf>,
    pub test_path: Option<PathBuf>,
    /// Ontology file; the bundled ACE 2005 inventory when absent.
    pub ontology_path: Option<PathBuf>,
    /// Restricts the ontology to these subtypes.
    pub event_types: Option<Vec<String>>,
    /// Types whose annotations and questions are withheld from training.
    pub unseen_types: Vec<String>,
    pub marker_mode: MarkerMode,
    pub question_style: QuestionStyle,
    pub checkpoint: String,
    pub encoder: EncoderSettings,
    pub train: TrainConfig,
    pub threshold: ThresholdConfig,
    pub pack: PackConfig,
    pub synth: SynthSettings,
    pub analyze: AnalyzeSettings,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            out_dir: PathBuf::from("runs/default"),
            seed: 13,
            train_path: None,
            dev_path: None,
            test_path: None,
            ontology_path: None,
            event_types: Some(["Attack", "Die", "Marry", "Transport"].map(String::from).to_vec()),
            unseen_types: Vec::new(),
            marker_mode: MarkerMode::ArgumentRole,
            question_style: QuestionStyle::WithArticle,
            checkpoint: "mock".into(),
            encoder: EncoderSettings::default(),
            train: TrainConfig {
                learning_rate: 1e-3,
                max_epochs: 30,
                ..TrainConfig::default()
            },
            threshold: ThresholdConfig::default(),
            pack: PackConfig::default(),
            synth: SynthSettings::default(),
            analyze: AnalyzeSettings::default(),
        }
    }
}

fn config_err(field: &str, message: impl Into<String>) -> Error {
    Error::Config {
        field: field.into(),
        message: message.into(),
    }
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let raw = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        serde_json::from_str(&raw).map_err(|e| config_err(&path.display().to_string(), e.to_string()))
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, serde_json::to_string_pretty(self)? + "\n").map_err(|e| Error::io(path, e))
    }

    /// The config as commands see it: the run seed is copied into the
    /// training section.
    pub fn resolved(&self) -> RunConfig {
        let mut c = self.clone();
        c.train.seed = c.seed;
        c
    }

    pub fn validate(&self) -> Result<()> {
        self.train
            .validate()
            .map_err(|e| prefix_field(e, "train"))?;
        self.threshold
            .validate()
            .map_err(|e| prefix_field(e, "threshold"))?;
        if self.pack.max_seq_len < 8 {
            return Err(config_err("pack.max_seq_len", "must be at least 8"));
        }
        if self.pack.doc_stride == 0 {
            return Err(config_err("pack.doc_stride", "must be positive"));
        }
        self.mock_config().validate().map_err(|e| prefix_field(e, "encoder"))?;
        if self.pack.max_seq_len > self.mock_config().max_positions {
            return Err(config_err("pack.max_seq_len", "exceeds the encoder's position table"));
        }
        for (name, rate) in [
            ("synth.ambiguity_rate", self.synth.ambiguity_rate),
            ("synth.multi_event_rate", self.synth.multi_event_rate),
            ("synth.empty_rate", self.synth.empty_rate),
            ("synth.entity_type_cue", self.synth.entity_type_cue),
        ] {
            if !(0.0..=1.0).contains(&rate) {
                return Err(config_err(name, "must lie in [0, 1]"));
            }
        }
        if self.checkpoint.trim().is_empty() {
            return Err(config_err("checkpoint", "must not be empty"));
        }
        for (field, p) in [("ontology_path", &self.ontology_path)] {
            if let Some(p) = p {
                if !p.is_file() {
                    return Err(config_err(field, format!("{} does not exist", p.display())));
                }
            }
        }
        let ont = self.ontology()?;
        if let Some(t) = self.unseen_types.iter().find(|t| !ont.contains(t)) {
            return Err(config_err("unseen_types", format!("`{t}` is not in the ontology")));
        }
        if !self.unseen_types.is_empty() && self.unseen_types.len() >= ont.len() {
            return Err(config_err("unseen_types", "at least one type must remain seen"));
        }
        Ok(())
    }

    fn mock_config(&self) -> MockConfig {
        MockConfig {
            seed: self.seed,
            hidden_size: self.encoder.hidden_size,
            n_layers: self.encoder.n_layers,
            n_heads: self.encoder.n_heads,
            ffn_size: self.encoder.ffn_size,
            lexical_match: self.encoder.lexical_match,
            ..MockConfig::default()
        }
    }

    pub fn ontology(&self) -> Result<EventOntology> {
        let base = match &self.ontology_path {
            Some(p) => EventOntology::load(p)?,
            None => EventOntology::ace2005(),
        };
        match &self.event_types {
            Some(types) => base.restrict(types).map_err(|e| config_err("event_types", e.to_string())),
            None => Ok(base),
        }
    }

    /// The ontology minus the unseen types.
    pub fn seen_ontology(&self) -> Result<EventOntology> {
        let ont = self.ontology()?;
        let seen: Vec<&String> = ont
            .subtypes()
            .iter()
            .filter(|t| !self.unseen_types.contains(t))
            .collect();
        ont.restrict(&seen)
    }

    pub fn config_hash(&self) -> Result<String> {
        let bytes = serde_json::to_vec(self)?;
        Ok(Sha256::digest(&bytes).iter().map(|b| format!("{b:02x}")).collect())
    }
}

fn prefix_field(e: Error, prefix: &str) -> Error {
    match e {
        Error::Config { field, message } => Error::Config {
            field: format!("{prefix}.{field}"),
            message,
        },
        other => other,
    }
}

/// File locations under `out_dir`.
#[derive(Debug, Clone)]
pub struct Layout {
    pub root: PathBuf,
}

#[derive(Debug, Clone, Copy)]
pub enum Split {
    Train,
    Dev,
    Test,
}

impl Split {
    fn as_str(self) -> &'static str {
        match self {
            Split::Train => "train",
            Split::Dev => "dev",
            Split::Test => "test",
        }
    }
}

impl Layout {
    pub fn new(root: impl Into<PathBuf>) -> Self {
        Layout { root: root.into() }
    }

    pub fn corpus(&self, split: Split) -> PathBuf {
        self.root.join("corpus").join(format!("{}.jsonl", split.as_str()))
    }

    pub fn tokenizer(&self) -> PathBuf {
        self.root.join("prepared").join("tokenizer.json")
    }

    pub fn instances(&self, split: Split) -> PathBuf {
        self.root.join("prepared").join(format!("{}_instances.jsonl", split.as_str()))
    }

    pub fn checkpoint(&self) -> PathBuf {
        self.root.join("checkpoint")
    }

    pub fn train_metrics(&self) -> PathBuf {
        self.root.join("train_metrics.json")
    }

    pub fn calibration(&self) -> PathBuf {
        self.root.join("calibration.json")
    }

    pub fn predictions(&self) -> PathBuf {
        self.root.join("predictions.jsonl")
    }

    pub fn report_json(&self) -> PathBuf {
        self.root.join("report.json")
    }

    pub fn report_txt(&self) -> PathBuf {
        self.root.join("report.txt")
    }

    pub fn analysis(&self) -> PathBuf {
        self.root.join("analysis")
    }

    pub fn manifest(&self, command: Command) -> PathBuf {
        self.root.join("manifests").join(format!("{command}.json"))
    }

    pub fn meta(&self, command: Command) -> PathBuf {
        self.root.join("meta").join(format!("{command}.json"))
    }
}

/// Header embedded in every JSON artifact and manifest.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Stamped<T> {
    pub command: Command,
    pub seed: u64,
    pub config_hash: String,
    pub config: RunConfig,
    pub result: T,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ArtifactEntry {
    /// Relative to `out_dir`.
    pub path: String,
    pub sha256: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainResult {
    pub train_examples: usize,
    pub best_epoch: Option<usize>,
    pub epochs: Vec<EpochMetrics>,
    pub train_config: TrainConfig,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvaluationResult {
    pub overall: EvalReport,
    pub seen: Option<EvalReport>,
    pub unseen: Option<EvalReport>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CommandSummary {
    pub command: Command,
    pub artifacts: Vec<PathBuf>,
    pub message: String,
}

fn sha256_file(path: &Path) -> Result<String> {
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    Ok(Sha256::digest(&bytes).iter().map(|b| format!("{b:02x}")).collect())
}

fn ensure_dir(path: &Path) -> Result<()> {
    std::fs::create_dir_all(path).map_err(|e| Error::io(path, e))
}

fn write_text(path: &Path, body: &str) -> Result<()> {
    if let Some(parent) = path.parent() {
        ensure_dir(parent)?;
    }
    std::fs::write(path, body).map_err(|e| Error::io(path, e))
}

fn require(path: &Path, command: Command) -> Result<()> {
    if path.exists() {
        Ok(())
    } else {
        Err(Error::MissingPrerequisite {
            path: path.to_path_buf(),
            command: command.as_str().into(),
        })
    }
}

struct Ctx {
    config: RunConfig,
    hash: String,
    layout: Layout,
    command: Command,
    artifacts: Vec<PathBuf>,
}

impl Ctx {
    fn stamp<T: Serialize>(&self, result: T) -> Result<String> {
        let s = Stamped {
            command: self.command,
            seed: self.config.seed,
            config_hash: self.hash.clone(),
            config: self.config.clone(),
            result,
        };
        Ok(serde_json::to_string_pretty(&s)? + "\n")
    }

    fn write_json<T: Serialize>(&mut self, path: PathBuf, result: T) -> Result<()> {
        let body = self.stamp(result)?;
        write_text(&path, &body)?;
        self.artifacts.push(path);
        Ok(())
    }

    fn record(&mut self, path: PathBuf) {
        self.artifacts.push(path);
    }

    /// Corpus path for `split`; a missing default file names `synth`.
    fn corpus_path(&self, split: Split) -> Result<PathBuf> {
        let configured = match split {
            Split::Train => &self.config.train_path,
            Split::Dev => &self.config.dev_path,
            Split::Test => &self.config.test_path,
        };
        match configured {
            Some(p) if p.is_file() => Ok(p.clone()),
            Some(p) => Err(config_err(
                &format!("{}_path", split.as_str()),
                format!("{} does not exist", p.display()),
            )),
            None => {
                let p = self.layout.corpus(split);
                require(&p, Command::Synth)?;
                Ok(p)
            }
        }
    }

    fn corpus_out(&self, split: Split) -> PathBuf {
        let configured = match split {
            Split::Train => &self.config.train_path,
            Split::Dev => &self.config.dev_path,
            Split::Test => &self.config.test_path,
        };
        configured.clone().unwrap_or_else(|| self.layout.corpus(split))
    }

    fn load_split(&self, split: Split, ontology: &EventOntology) -> Result<Vec<SentenceRecord>> {
        load_corpus(&self.corpus_path(split)?, ontology)
    }

    fn unseen(&self) -> BTreeSet<String> {
        self.config.unseen_types.iter().cloned().collect()
    }

    fn setup(&self, tokenizer: WordTokenizer, ontology: EventOntology) -> QaSetup {
        QaSetup {
            ontology,
            marker_mode: self.config.marker_mode,
            question_style: self.config.question_style,
            tokenizer,
            pack: self.config.pack,
        }
    }

    fn load_tokenizer(&self) -> Result<WordTokenizer> {
        let p = self.layout.tokenizer();
        require(&p, Command::Prepare)?;
        WordTokenizer::load(&p)
    }

    fn load_instances(&self, split: Split) -> Result<Vec<crate::packing::QAInstance>> {
        let p = self.layout.instances(split);
        require(&p, Command::Prepare)?;
        load_instances(&p)
    }

    fn load_checkpoint(&self) -> Result<MockEncoder> {
        let dir = self.layout.checkpoint();
        require(&dir.join("weights.json"), Command::Train)?;
        MockEncoder::load(&dir)
    }

    /// Initial encoder for `train`: a fresh seeded mock, a saved mock
    /// checkpoint directory, or a named one under the cache directory.
    fn initial_encoder(&self, tokenizer: &WordTokenizer) -> Result<MockEncoder> {
        let id = self.config.checkpoint.as_str();
        let mut enc = if id == "mock" {
            MockEncoder::new(self.config.mock_config(), tokenizer.base_vocab_size())?
        } else {
            let direct = PathBuf::from(id);
            let cached = std::env::var_os(CACHE_ENV).map(|d| PathBuf::from(d).join(id));
            let found = [Some(direct), cached]
                .into_iter()
                .flatten()
                .find(|p| p.join("encoder.json").is_file());
            match found {
                Some(dir) => MockEncoder::load(&dir)?,
                None if PRETRAINED_CHECKPOINTS.contains(&id) => {
                    return Err(Error::Capability(format!(
                        "checkpoint `{id}` needs a pretrained transformer backend, which this build does not \
                         include; place a converted checkpoint under ${CACHE_ENV}/{id} or use `mock`"
                    )))
                }
                None => {
                    return Err(config_err(
                        "checkpoint",
                        format!("`{id}` is neither `mock`, a checkpoint directory, nor found under ${CACHE_ENV}"),
                    ))
                }
            }
        };
        enc.register_reserved_tokens(tokenizer.reserved_tokens());
        if enc.vocab_size() != tokenizer.base_vocab_size() + tokenizer.reserved_tokens().len() {
            return Err(config_err(
                "checkpoint",
                "encoder vocabulary does not match the prepared tokenizer",
            ));
        }
        let ont = self.config.ontology()?;
        let questions: Vec<String> = ont
            .all_questions(self.config.question_style)
            .into_iter()
            .map(|(_, q)| q)
            .collect();
        enc.set_match_exclusions(lexical_match_exclusions(tokenizer, &questions));
        Ok(enc)
    }

    fn dev_set(&self) -> Result<DevSet> {
        let seen = self.config.seen_ontology()?;
        let dev: Vec<SentenceRecord> = self
            .load_split(Split::Dev, &self.config.ontology()?)?
            .iter()
            .map(|r| r.without_event_types(&self.unseen()))
            .collect();
        Ok(DevSet {
            groups: group_questions(self.load_instances(Split::Dev)?),
            gold: gold_triggers(&dev),
            ontology: seen,
        })
    }

    fn write_manifest(&self) -> Result<()> {
        let entries = self
            .artifacts
            .iter()
            .map(|p| {
                Ok(ArtifactEntry {
                    path: p
                        .strip_prefix(&self.layout.root)
                        .unwrap_or(p)
                        .to_string_lossy()
                        .replace('\\', "/"),
                    sha256: sha256_file(p)?,
                })
            })
            .collect::<Result<Vec<_>>>()?;
        let body = self.stamp(entries)?;
        write_text(&self.layout.manifest(self.command), &body)
    }
}

fn synth(ctx: &mut Ctx) -> Result<String> {
    let ont = ctx.config.ontology()?;
    let s = &ctx.config.synth;
    let base = SyntheticSpec {
        n_sentences: s.n_train,
        event_types: ont.subtypes().to_vec(),
        ambiguity_rate: s.ambiguity_rate,
        seed: ctx.config.seed,
        multi_event_rate: s.multi_event_rate,
        empty_rate: s.empty_rate,
        entity_type_cue: s.entity_type_cue,
        sentences_per_doc: s.sentences_per_doc,
    };
    let mut counts = Vec::new();
    for (i, (split, n)) in [(Split::Train, s.n_train), (Split::Dev, s.n_dev), (Split::Test, s.n_test)]
        .into_iter()
        .enumerate()
    {
        let spec = SyntheticSpec {
            n_sentences: n,
            ..base.with_seed(ctx.config.seed.wrapping_add(i as u64))
        };
        let records = generate_synthetic_corpus(&spec)?;
        let path = ctx.corpus_out(split);
        if let Some(parent) = path.parent() {
            ensure_dir(parent)?;
        }
        write_corpus(&path, &records)?;
        counts.push(format!("{} {}", records.len(), split.as_str()));
        ctx.record(path);
    }
    Ok(format!("wrote {} sentences", counts.join(", ")))
}

fn prepare(ctx: &mut Ctx) -> Result<String> {
    let ont = ctx.config.ontology()?;
    let seen = ctx.config.seen_ontology()?;
    let unseen = ctx.unseen();
    let train = ctx.load_split(Split::Train, &ont)?;
    let dev = ctx.load_split(Split::Dev, &ont)?;
    let test = ctx.load_split(Split::Test, &ont)?;
    let all: Vec<SentenceRecord> = train.iter().chain(&dev).chain(&test).cloned().collect();
    let setup = QaSetup::build(
        ont.clone(),
        ctx.config.marker_mode,
        ctx.config.question_style,
        &all,
        &all,
        ctx.config.pack,
    )?;
    let tok_path = ctx.layout.tokenizer();
    ensure_dir(tok_path.parent().expect("nested path"))?;
    setup.tokenizer.save(&tok_path)?;
    ctx.record(tok_path);

    let seen_setup = ctx.setup(setup.tokenizer.clone(), seen);
    let strip = |records: &[SentenceRecord]| -> Vec<SentenceRecord> {
        records.iter().map(|r| r.without_event_types(&unseen)).collect()
    };
    let mut sizes = Vec::new();
    for (split, instances) in [
        (Split::Train, seen_setup.instances(&strip(&train))?),
        (Split::Dev, seen_setup.instances(&strip(&dev))?),
        (Split::Test, setup.instances(&test)?),
    ] {
        let p = ctx.layout.instances(split);
        save_instances(&p, &instances)?;
        sizes.push(format!("{} {}", instances.len(), split.as_str()));
        ctx.record(p);
    }
    Ok(format!(
        "vocabulary {} (+{} markers); instances: {}",
        setup.tokenizer.base_vocab_size(),
        setup.tokenizer.reserved_tokens().len(),
        sizes.join(", ")
    ))
}

fn train(ctx: &mut Ctx) -> Result<String> {
    let tokenizer = ctx.load_tokenizer()?;
    let instances = ctx.load_instances(Split::Train)?;
    let examples = training_examples(&instances, NoAnswerPolicy::ClsTarget);
    let dev = ctx.dev_set()?;
    let encoder = ctx.initial_encoder(&tokenizer)?;
    let cfg = ctx.config.train.clone();
    let outcome = fine_tune(encoder, &examples, &dev, &cfg, &ctx.config.threshold)?;
    let dir = ctx.layout.checkpoint();
    outcome.adapter.save(&dir)?;
    ctx.record(dir.join("encoder.json"));
    ctx.record(dir.join("weights.json"));
    let best = outcome
        .best_epoch
        .map(|e| format!("best epoch {e}, dev F1 {:.4}", outcome.epochs[e - 1].dev_f1))
        .unwrap_or_else(|| "no epochs run".into());
    let result = TrainResult {
        train_examples: examples.len(),
        best_epoch: outcome.best_epoch,
        epochs: outcome.epochs,
        train_config: cfg,
    };
    ctx.write_json(ctx.layout.train_metrics(), result)?;
    Ok(format!("trained on {} examples; {best}", examples.len()))
}

fn calibrate(ctx: &mut Ctx) -> Result<String> {
    let encoder = ctx.load_checkpoint()?;
    let dev = ctx.dev_set()?;
    let sel = dev.evaluate(&encoder, &ctx.config.threshold)?;
    let msg = format!("selected threshold {} (dev F1 {:.4})", sel.selected, sel.best_f1);
    ctx.write_json(ctx.layout.calibration(), sel)?;
    Ok(msg)
}

fn load_calibration(ctx: &Ctx) -> Result<ThresholdSelection> {
    let p = ctx.layout.calibration();
    require(&p, Command::Calibrate)?;
    let raw = std::fs::read_to_string(&p).map_err(|e| Error::io(&p, e))?;
    let stamped: Stamped<ThresholdSelection> = serde_json::from_str(&raw)?;
    Ok(stamped.result)
}

fn predict(ctx: &mut Ctx) -> Result<String> {
    let sel = load_calibration(ctx)?;
    let encoder = ctx.load_checkpoint()?;
    let groups = group_questions(ctx.load_instances(Split::Test)?);
    let cands = collect_candidates(&encoder, &groups, &ctx.config.threshold)?;
    let preds = predictions_at(&cands, sel.selected);
    let p = ctx.layout.predictions();
    save_predictions(&p, &preds)?;
    ctx.record(p);
    Ok(format!(
        "{} predictions over {} questions at threshold {}",
        preds.len(),
        groups.len(),
        sel.selected
    ))
}

fn evaluate(ctx: &mut Ctx) -> Result<String> {
    let p = ctx.layout.predictions();
    require(&p, Command::Predict)?;
    let preds = load_predictions(&p)?;
    let ont = ctx.config.ontology()?;
    let test = ctx.load_split(Split::Test, &ont)?;
    let gold = gold_triggers(&test);
    let overall = score(&preds, &gold, &ont);
    let unseen = ctx.unseen();
    let (seen, unseen_report) = if unseen.is_empty() {
        (None, None)
    } else {
        let seen_types: BTreeSet<String> = ont.subtypes().iter().filter(|t| !unseen.contains(*t)).cloned().collect();
        (
            Some(score_types(&preds, &gold, &ont, &seen_types)),
            Some(score_types(&preds, &gold, &ont, &unseen)),
        )
    };
    let mut table = overall.to_table();
    if let Some(u) = &unseen_report {
        table.push_str("\nunseen types\n");
        table.push_str(&u.to_table());
    }
    let msg = format!(
        "P {:.4} R {:.4} F1 {:.4}{}",
        overall.precision,
        overall.recall,
        overall.f1,
        unseen_report
            .as_ref()
            .map(|u| format!("; unseen F1 {:.4}", u.f1))
            .unwrap_or_default()
    );
    ctx.write_json(
        ctx.layout.report_json(),
        EvaluationResult {
            overall,
            seen,
            unseen: unseen_report,
        },
    )?;
    let txt = ctx.layout.report_txt();
    write_text(&txt, &table)?;
    ctx.record(txt);
    Ok(msg)
}

fn analyze(ctx: &mut Ctx) -> Result<String> {
    let encoder = ctx.load_checkpoint()?;
    let tokenizer = ctx.load_tokenizer()?;
    let ont = ctx.config.ontology()?;
    let test = ctx.load_split(Split::Test, &ont)?;
    let dir = ctx.layout.analysis();
    ensure_dir(&dir)?;

    let instances = ctx.load_instances(Split::Test)?;
    let mut n_maps = 0;
    for inst in instances.iter().filter(|i| !i.gold_answers.is_empty()) {
        if n_maps >= ctx.config.analyze.n_saliency {
            break;
        }
        let (s, e) = inst.gold_answers[0];
        let map = connectivity(&encoder, inst, s, e)?;
        let json = dir.join(format!("saliency_{n_maps:02}.json"));
        let html = dir.join(format!("saliency_{n_maps:02}.html"));
        ctx.write_json(json, &map)?;
        write_text(&html, &map.to_html())?;
        ctx.record(html);
        n_maps += 1;
    }

    let setup = ctx.setup(tokenizer, ont);
    let points = cls_projection(&encoder, &setup, &test, ctx.config.seed)?;
    let csv = dir.join("projection.csv");
    write_projection_csv(&csv, &points)?;
    ctx.record(csv);
    let svg = dir.join("projection.svg");
    write_text(&svg, &projection_svg(&points))?;
    ctx.record(svg);
    Ok(format!("{n_maps} saliency maps, {} projected sentences", points.len()))
}

#[derive(Serialize)]
struct Meta<'a> {
    command: Command,
    config_hash: &'a str,
    started_unix_ms: u128,
    duration_ms: u128,
    version: &'a str,
}

/// Runs one command; see the module docs for what lands on disk.
pub fn run(command: Command, config: &RunConfig) -> Result<CommandSummary> {
    let config = config.resolved();
    config.validate()?;
    let started = SystemTime::now().duration_since(UNIX_EPOCH).map(|d| d.as_millis()).unwrap_or(0);
    let clock = Instant::now();
    let mut ctx = Ctx {
        hash: config.config_hash()?,
        layout: Layout::new(&config.out_dir),
        config,
        command,
        artifacts: Vec::new(),
    };
    ensure_dir(&ctx.layout.root)?;
    let message = match command {
        Command::Synth => synth(&mut ctx)?,
        Command::Prepare => prepare(&mut ctx)?,
        Command::Train => train(&mut ctx)?,
        Command::Calibrate => calibrate(&mut ctx)?,
        Command::Predict => predict(&mut ctx)?,
        Command::Evaluate => evaluate(&mut ctx)?,
        Command::Analyze => analyze(&mut ctx)?,
    };
    ctx.write_manifest()?;
    let meta = Meta {
        command,
        config_hash: &ctx.hash,
        started_unix_ms: started,
        duration_ms: clock.elapsed().as_millis(),
        version: env!("CARGO_PKG_VERSION"),
    };
    write_text(&ctx.layout.meta(command), &(serde_json::to_string_pretty(&meta)? + "\n"))?;
    let mut artifacts = ctx.artifacts;
    artifacts.push(ctx.layout.manifest(command));
    Ok(CommandSummary {
        command,
        artifacts,
        message,
    })
}
