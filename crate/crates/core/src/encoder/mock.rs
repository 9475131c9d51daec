//! A small trainable attention encoder standing in for a pretrained QA model.
//!
//! Input embedding of position t is the sum of token, segment, position and
//! lexical-match embeddings; the match feature flags context subtokens whose
//! id also occurs among the question's content subtokens. The body is a
//! post-LN transformer and the head a linear layer with two outputs.

use std::path::Path;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use super::tape::{Mat, Tape, Var};
use super::{EncoderAdapter, LogitSelector, SpanScores, TrainableEncoder};
use crate::error::{Error, Result};
use crate::packing::{QAInstance, TrainingExample};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MockConfig {
    pub seed: u64,
    pub hidden_size: usize,
    pub n_layers: usize,
    pub n_heads: usize,
    pub ffn_size: usize,
    pub max_positions: usize,
    pub init_std: f64,
    pub lexical_match: bool,
    /// Question subtoken ids ignored by the match feature.
    pub match_exclude: Vec<u32>,
}

impl Default for MockConfig {
    fn default() -> Self {
        MockConfig {
            seed: 0,
            hidden_size: 32,
            n_layers: 2,
            n_heads: 2,
            ffn_size: 64,
            max_positions: 384,
            init_std: 0.2,
            lexical_match: true,
            match_exclude: Vec::new(),
        }
    }
}

impl MockConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |field: &str, message: &str| {
            Err(Error::Config {
                field: field.into(),
                message: message.into(),
            })
        };
        if self.hidden_size == 0 {
            return bad("hidden_size", "must be positive");
        }
        if self.n_heads == 0 || self.hidden_size % self.n_heads != 0 {
            return bad("n_heads", "must be positive and divide hidden_size");
        }
        if self.ffn_size == 0 {
            return bad("ffn_size", "must be positive");
        }
        if self.max_positions == 0 {
            return bad("max_positions", "must be positive");
        }
        if !(self.init_std > 0.0) {
            return bad("init_std", "must be positive");
        }
        Ok(())
    }
}

const TOK: usize = 0;
const SEG: usize = 1;
const POS: usize = 2;
const MATCH: usize = 3;
const EMB_LN_G: usize = 4;
const EMB_LN_B: usize = 5;
const LAYER_BASE: usize = 6;
const PER_LAYER: usize = 16;

const LAYER_NAMES: [&str; PER_LAYER] = [
    "wq", "bq", "wk", "bk", "wv", "bv", "wo", "bo", "ln1_g", "ln1_b", "w1", "b1", "w2", "b2", "ln2_g", "ln2_b",
];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct NamedTensor {
    name: String,
    shape: [usize; 2],
    data: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct CheckpointMeta {
    checkpoint_id: String,
    config: MockConfig,
    base_vocab_size: usize,
    reserved_tokens: Vec<String>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MockEncoder {
    config: MockConfig,
    base_vocab_size: usize,
    reserved: Vec<String>,
    params: Vec<Mat>,
}

struct Graph {
    params: Vec<Var>,
    inputs: Var,
    hidden: Var,
    logits: Var,
}

/// Builds a seeded mock encoder over a base vocabulary of `vocab_size` ids.
pub fn mock_encoder(seed: u64, hidden_size: usize, n_layers: usize, vocab_size: usize) -> Result<MockEncoder> {
    MockEncoder::new(
        MockConfig {
            seed,
            hidden_size,
            n_layers,
            n_heads: if hidden_size % 2 == 0 { 2 } else { 1 },
            ffn_size: 2 * hidden_size,
            ..MockConfig::default()
        },
        vocab_size,
    )
}

impl MockEncoder {
    pub fn new(config: MockConfig, vocab_size: usize) -> Result<Self> {
        config.validate()?;
        if vocab_size == 0 {
            return Err(Error::arg("vocabulary must not be empty"));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
        let normal = Normal::new(0.0, config.init_std).expect("valid std");
        let d = config.hidden_size;
        let mut rand_mat = |r: usize, c: usize| Mat::from_shape_fn((r, c), |_| normal.sample(&mut rng));
        let mut params = vec![
            rand_mat(vocab_size, d),
            rand_mat(2, d),
            rand_mat(config.max_positions, d),
            rand_mat(2, d),
            Mat::ones((1, d)),
            Mat::zeros((1, d)),
        ];
        for _ in 0..config.n_layers {
            params.extend([
                rand_mat(d, d),
                Mat::zeros((1, d)),
                rand_mat(d, d),
                Mat::zeros((1, d)),
                rand_mat(d, d),
                Mat::zeros((1, d)),
                rand_mat(d, d),
                Mat::zeros((1, d)),
                Mat::ones((1, d)),
                Mat::zeros((1, d)),
                rand_mat(d, config.ffn_size),
                Mat::zeros((1, config.ffn_size)),
                rand_mat(config.ffn_size, d),
                Mat::zeros((1, d)),
                Mat::ones((1, d)),
                Mat::zeros((1, d)),
            ]);
        }
        params.push(rand_mat(d, 2));
        params.push(Mat::zeros((1, 2)));
        Ok(MockEncoder {
            config,
            base_vocab_size: vocab_size,
            reserved: Vec::new(),
            params,
        })
    }

    /// A fresh encoder matched to `setup`: base vocabulary, one row per marker
    /// token and match exclusions computed from the setup's questions.
    pub fn for_setup(setup: &crate::packing::QaSetup, config: MockConfig) -> Result<Self> {
        use crate::tokenizer::TokenizerAdapter;
        let mut enc = MockEncoder::new(config, setup.tokenizer.base_vocab_size())?;
        enc.register_reserved_tokens(setup.tokenizer.reserved_tokens());
        let questions: Vec<String> = setup
            .ontology
            .all_questions(setup.question_style)
            .into_iter()
            .map(|(_, q)| q)
            .collect();
        enc.set_match_exclusions(super::lexical_match_exclusions(&setup.tokenizer, &questions));
        Ok(enc)
    }

    pub fn config(&self) -> &MockConfig {
        &self.config
    }

    pub fn reserved_tokens(&self) -> &[String] {
        &self.reserved
    }

    pub fn set_match_exclusions(&mut self, ids: Vec<u32>) {
        self.config.match_exclude = ids;
    }

    fn span_w(&self) -> usize {
        LAYER_BASE + PER_LAYER * self.config.n_layers
    }

    /// Sets the span head to zero so every logit is constant.
    pub fn zero_span_head(&mut self) {
        let w = self.span_w();
        self.params[w].fill(0.0);
        self.params[w + 1].fill(0.0);
    }

    fn param_names(&self) -> Vec<String> {
        let mut names: Vec<String> = ["tok_emb", "seg_emb", "pos_emb", "match_emb", "emb_ln_g", "emb_ln_b"]
            .iter()
            .map(|s| s.to_string())
            .collect();
        for l in 0..self.config.n_layers {
            names.extend(LAYER_NAMES.iter().map(|n| format!("layer{l}.{n}")));
        }
        names.push("span_w".into());
        names.push("span_b".into());
        names
    }

    fn check_instance(&self, inst: &QAInstance) -> Result<()> {
        let n = inst.input_ids.len();
        if n == 0 || n != inst.segment_ids.len() {
            return Err(Error::arg("instance ids and segment ids must be non-empty and aligned"));
        }
        if n > self.config.max_positions {
            return Err(Error::arg(format!(
                "instance has {n} positions, encoder supports {}",
                self.config.max_positions
            )));
        }
        let vocab = self.params[TOK].nrows();
        if let Some(&bad) = inst.input_ids.iter().find(|&&id| id as usize >= vocab) {
            return Err(Error::arg(format!(
                "subtoken id {bad} outside encoder vocabulary of {vocab}; register reserved tokens first"
            )));
        }
        Ok(())
    }

    fn match_flags(&self, inst: &QAInstance) -> Vec<usize> {
        let mut flags = vec![0usize; inst.input_ids.len()];
        if !self.config.lexical_match {
            return flags;
        }
        let question: Vec<u32> = inst
            .question_positions()
            .map(|p| inst.input_ids[p])
            .filter(|id| !self.config.match_exclude.contains(id))
            .collect();
        for p in inst.context_positions() {
            if question.contains(&inst.input_ids[p]) {
                flags[p] = 1;
            }
        }
        flags
    }

    fn build(&self, tape: &mut Tape, inst: &QAInstance, inputs: Option<&Mat>) -> Graph {
        let params: Vec<Var> = self.params.iter().map(|p| tape.leaf(p.clone())).collect();
        let n = inst.input_ids.len();
        let x = match inputs {
            Some(m) => tape.leaf(m.clone()),
            None => {
                let tok = tape.gather(params[TOK], inst.input_ids.iter().map(|&i| i as usize).collect());
                let seg = tape.gather(params[SEG], inst.segment_ids.iter().map(|&s| s as usize).collect());
                let pos = tape.gather(params[POS], (0..n).collect());
                let mat = tape.gather(params[MATCH], self.match_flags(inst));
                let a = tape.add(tok, seg);
                let b = tape.add(pos, mat);
                tape.add(a, b)
            }
        };
        let mut h = tape.layer_norm(x, params[EMB_LN_G], params[EMB_LN_B]);
        let d = self.config.hidden_size;
        let heads = self.config.n_heads;
        let dh = d / heads;
        let scale = 1.0 / (dh as f64).sqrt();
        for l in 0..self.config.n_layers {
            let p = |k: usize| params[LAYER_BASE + PER_LAYER * l + k];
            let q = tape.affine(h, p(0), p(1));
            let k = tape.affine(h, p(2), p(3));
            let v = tape.affine(h, p(4), p(5));
            let mut outs = Vec::with_capacity(heads);
            for hd in 0..heads {
                let qh = tape.slice_cols(q, hd * dh, (hd + 1) * dh);
                let kh = tape.slice_cols(k, hd * dh, (hd + 1) * dh);
                let vh = tape.slice_cols(v, hd * dh, (hd + 1) * dh);
                let s = tape.matmul_bt(qh, kh);
                let s = tape.scale(s, scale);
                let a = tape.softmax_rows(s);
                outs.push(tape.matmul(a, vh));
            }
            let o = if heads == 1 { outs[0] } else { tape.concat_cols(outs) };
            let attn = tape.affine(o, p(6), p(7));
            let r = tape.add(h, attn);
            let h1 = tape.layer_norm(r, p(8), p(9));
            let f = tape.affine(h1, p(10), p(11));
            let f = tape.gelu(f);
            let f = tape.affine(f, p(12), p(13));
            let r = tape.add(h1, f);
            h = tape.layer_norm(r, p(14), p(15));
        }
        let sw = self.span_w();
        let logits = tape.affine(h, params[sw], params[sw + 1]);
        Graph {
            params,
            inputs: x,
            hidden: h,
            logits,
        }
    }

    fn scores(tape: &Tape, g: &Graph) -> SpanScores {
        let l = tape.value(g.logits);
        SpanScores::from_logits(l.column(0).to_vec(), l.column(1).to_vec())
    }

    pub fn save(&self, dir: &Path) -> Result<()> {
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        let meta = CheckpointMeta {
            checkpoint_id: self.checkpoint_id().to_string(),
            config: self.config.clone(),
            base_vocab_size: self.base_vocab_size,
            reserved_tokens: self.reserved.clone(),
        };
        let tensors: Vec<NamedTensor> = self
            .param_names()
            .into_iter()
            .zip(&self.params)
            .map(|(name, m)| NamedTensor {
                name,
                shape: [m.nrows(), m.ncols()],
                data: m.iter().copied().collect(),
            })
            .collect();
        let write = |name: &str, body: String| {
            let p = dir.join(name);
            std::fs::write(&p, body + "\n").map_err(|e| Error::io(&p, e))
        };
        write("encoder.json", serde_json::to_string_pretty(&meta)?)?;
        write("weights.json", serde_json::to_string(&tensors)?)
    }

    pub fn load(dir: &Path) -> Result<Self> {
        let read = |name: &str| {
            let p = dir.join(name);
            std::fs::read_to_string(&p).map_err(|e| Error::io(&p, e))
        };
        let meta: CheckpointMeta = serde_json::from_str(&read("encoder.json")?)?;
        let tensors: Vec<NamedTensor> = serde_json::from_str(&read("weights.json")?)?;
        let mut enc = MockEncoder::new(meta.config, meta.base_vocab_size)?;
        enc.reserved = meta.reserved_tokens;
        let names = enc.param_names();
        if names.len() != tensors.len() {
            return Err(Error::Validation {
                record: dir.display().to_string(),
                field: "weights".into(),
                message: format!("expected {} tensors, found {}", names.len(), tensors.len()),
            });
        }
        enc.params = names
            .iter()
            .zip(tensors)
            .map(|(name, t)| {
                if &t.name != name {
                    return Err(Error::Validation {
                        record: dir.display().to_string(),
                        field: "weights".into(),
                        message: format!("expected tensor `{name}`, found `{}`", t.name),
                    });
                }
                Mat::from_shape_vec((t.shape[0], t.shape[1]), t.data).map_err(|e| Error::Validation {
                    record: dir.display().to_string(),
                    field: name.clone(),
                    message: e.to_string(),
                })
            })
            .collect::<Result<_>>()?;
        if enc.params[TOK].nrows() != enc.base_vocab_size + enc.reserved.len() {
            return Err(Error::Validation {
                record: dir.display().to_string(),
                field: "tok_emb".into(),
                message: "row count disagrees with vocabulary and reserved tokens".into(),
            });
        }
        Ok(enc)
    }
}

impl EncoderAdapter for MockEncoder {
    fn checkpoint_id(&self) -> &str {
        "mock"
    }

    fn forward(&self, instance: &QAInstance) -> Result<SpanScores> {
        self.check_instance(instance)?;
        let mut tape = Tape::new();
        let g = self.build(&mut tape, instance, None);
        Ok(Self::scores(&tape, &g))
    }

    fn embed_inputs(&self, instance: &QAInstance) -> Result<Mat> {
        self.check_instance(instance)?;
        let mut tape = Tape::new();
        let g = self.build(&mut tape, instance, None);
        Ok(tape.value(g.inputs).clone())
    }

    fn forward_from_embeddings(&self, instance: &QAInstance, inputs: &Mat) -> Result<SpanScores> {
        self.check_instance(instance)?;
        if inputs.dim() != (instance.input_ids.len(), self.config.hidden_size) {
            return Err(Error::arg(format!(
                "input embeddings must be {}x{}",
                instance.input_ids.len(),
                self.config.hidden_size
            )));
        }
        let mut tape = Tape::new();
        let g = self.build(&mut tape, instance, Some(inputs));
        Ok(Self::scores(&tape, &g))
    }

    fn gradient_of(&self, instance: &QAInstance, selector: LogitSelector) -> Result<Mat> {
        self.check_instance(instance)?;
        let n = instance.input_ids.len();
        let pos = selector.position();
        if pos >= n {
            return Err(Error::arg(format!("logit position {pos} outside {n} positions")));
        }
        let x = self.embed_inputs(instance)?;
        let mut tape = Tape::new();
        let g = self.build(&mut tape, instance, Some(&x));
        let mut seed = Mat::zeros((n, 2));
        let col = match selector {
            LogitSelector::Start(_) => 0,
            LogitSelector::End(_) => 1,
        };
        seed[[pos, col]] = 1.0;
        let grads = tape.backward(g.logits, seed);
        Ok(grads
            .get(g.inputs)
            .cloned()
            .unwrap_or_else(|| Mat::zeros((n, self.config.hidden_size))))
    }

    fn cls_embedding(&self, instance: &QAInstance) -> Result<Vec<f64>> {
        self.check_instance(instance)?;
        let mut tape = Tape::new();
        let g = self.build(&mut tape, instance, None);
        Ok(tape.value(g.hidden).row(instance.cls_index).to_vec())
    }

    /// New rows start at the mean existing embedding plus small seeded noise.
    fn register_reserved_tokens(&mut self, tokens: &[String]) -> usize {
        let fresh: Vec<&String> = tokens
            .iter()
            .enumerate()
            .filter(|(i, t)| !self.reserved.contains(t) && !tokens[..*i].contains(t))
            .map(|(_, t)| t)
            .collect();
        if fresh.is_empty() {
            return 0;
        }
        let table = &self.params[TOK];
        let d = table.ncols();
        let mean = table.mean_axis(ndarray::Axis(0)).expect("non-empty vocabulary");
        let mut rng = ChaCha8Rng::seed_from_u64(self.config.seed ^ (0x5eed_0000 + self.reserved.len() as u64));
        let normal = Normal::new(0.0, self.config.init_std * 0.1).expect("valid std");
        let mut rows = Mat::zeros((fresh.len(), d));
        for mut row in rows.rows_mut() {
            for (c, v) in row.iter_mut().enumerate() {
                *v = mean[c] + normal.sample(&mut rng);
            }
        }
        self.params[TOK] = ndarray::concatenate(ndarray::Axis(0), &[table.view(), rows.view()]).expect("same width");
        self.reserved.extend(fresh.iter().map(|t| t.to_string()));
        fresh.len()
    }

    fn vocab_size(&self) -> usize {
        self.params[TOK].nrows()
    }
}

impl TrainableEncoder for MockEncoder {
    fn parameters_mut(&mut self) -> &mut [Mat] {
        &mut self.params
    }

    fn loss_and_gradient(&self, batch: &[TrainingExample]) -> Result<(f64, Vec<Mat>)> {
        let mut total = 0.0;
        let mut grads: Vec<Mat> = self.params.iter().map(|p| Mat::zeros(p.raw_dim())).collect();
        let k = 1.0 / batch.len() as f64;
        for ex in batch {
            let inst = &ex.instance;
            self.check_instance(inst)?;
            let mut tape = Tape::new();
            let g = self.build(&mut tape, inst, None);
            let scores = Self::scores(&tape, &g);
            let n = inst.input_ids.len();
            let (s, e) = (ex.start_target, ex.end_target);
            if s >= n || e >= n {
                return Err(Error::Training(format!(
                    "target ({s}, {e}) outside {n} positions for {}/{} {}",
                    inst.doc_id, inst.sent_id, inst.event_type
                )));
            }
            total += -(scores.start_probs[s].ln() + scores.end_probs[e].ln());
            let mut seed = Mat::zeros((n, 2));
            for i in 0..n {
                seed[[i, 0]] = k * scores.start_probs[i];
                seed[[i, 1]] = k * scores.end_probs[i];
            }
            seed[[s, 0]] -= k;
            seed[[e, 1]] -= k;
            let mut bw = tape.backward(g.logits, seed);
            for (acc, &v) in grads.iter_mut().zip(&g.params) {
                if let Some(gr) = bw.take(v) {
                    *acc += &gr;
                }
            }
        }
        Ok((total * k, grads))
    }
}
