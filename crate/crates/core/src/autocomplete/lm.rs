//! Single-layer LSTM language model with a self-normalization penalty, so
//! that `v·h − b` can stand in for the log-probability at serve time.

use std::path::Path;

use rand::seq::SliceRandom;

use crate::error::{Error, Result};
use crate::nn::{
    dot, logsumexp, seeded_rng, softmax, Adam, AdamConfig, Checkpoint, Embedding, Lstm, LstmState, ParamId,
    ParamSet, Tensor,
};
use crate::text::{Vocabulary, BOS_TOKEN, EOS_TOKEN};

pub const CHECKPOINT_KIND: &str = "lm";
/// Every n-th training sequence is held out for calibration and diagnostics.
pub const HOLDOUT_EVERY: usize = 20;

#[derive(Debug, Clone, PartialEq)]
pub struct LmConfig {
    pub embedding_dim: usize,
    pub hidden: usize,
    pub max_vocab: usize,
    /// Weight of the `(logZ − b)²` penalty. Zero trains a plain language
    /// model and sets `b` afterwards from held-out data.
    pub alpha: f64,
    pub epochs: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
    pub seed: u64,
}

impl Default for LmConfig {
    fn default() -> Self {
        LmConfig {
            embedding_dim: 100,
            hidden: 100,
            max_vocab: crate::text::vocab::DEFAULT_MAX_SIZE,
            alpha: 0.1,
            epochs: 4,
            batch_size: 32,
            learning_rate: 0.005,
            seed: 1,
        }
    }
}

#[derive(Debug, Clone)]
pub struct LanguageModel {
    vocab: Vocabulary,
    params: ParamSet,
    emb: Embedding,
    lstm: Lstm,
    /// `V x H`, one row per output word, no bias.
    proj: ParamId,
    /// `1 x 1`
    b: ParamId,
    bos: usize,
    eos: usize,
}

/// Per-position quantities of a teacher-forced pass.
#[derive(Debug, Clone, PartialEq)]
pub struct StepScore {
    pub target: usize,
    /// `v_target · h`
    pub logit: f64,
    pub log_z: f64,
}

impl LanguageModel {
    pub fn new(vocab: Vocabulary, cfg: &LmConfig) -> Result<Self> {
        let (bos, eos) = markers(&vocab)?;
        let mut rng = seeded_rng(cfg.seed);
        let mut params = ParamSet::new();
        let emb = Embedding::new(&mut params, "lm.emb", vocab.len(), cfg.embedding_dim, &mut rng);
        let lstm = Lstm::new(&mut params, "lm.lstm", cfg.embedding_dim, cfg.hidden, &mut rng);
        let proj = params.add("lm.proj", Tensor::xavier(vocab.len(), cfg.hidden, &mut rng));
        let b = params.add("lm.b", Tensor::zeros(1, 1));
        Ok(LanguageModel {
            vocab,
            params,
            emb,
            lstm,
            proj,
            b,
            bos,
            eos,
        })
    }

    /// Vocabulary over the corpus with the sentence markers reserved.
    pub fn build_vocab(corpus: &[Vec<String>], max_vocab: usize) -> Result<Vocabulary> {
        Vocabulary::build_with_reserved(corpus, max_vocab, &[BOS_TOKEN, EOS_TOKEN])
    }

    pub fn vocab(&self) -> &Vocabulary {
        &self.vocab
    }

    pub fn params(&self) -> &ParamSet {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut ParamSet {
        &mut self.params
    }

    pub fn b(&self) -> f64 {
        self.params[self.b].data()[0]
    }

    pub fn set_b(&mut self, b: f64) {
        self.params[self.b].data_mut()[0] = b;
    }

    pub fn projection_id(&self) -> ParamId {
        self.proj
    }

    /// Inputs `<s> w1 .. wn` and targets `w1 .. wn </s>`.
    fn io_ids<S: AsRef<str>>(&self, tokens: &[S]) -> (Vec<usize>, Vec<usize>) {
        let ids = self.vocab.encode(tokens);
        let mut inputs = Vec::with_capacity(ids.len() + 1);
        inputs.push(self.bos);
        inputs.extend_from_slice(&ids);
        let mut targets = ids;
        targets.push(self.eos);
        (inputs, targets)
    }

    /// Hidden states `h_i`, one per predicted token including the end marker.
    pub fn contexts<S: AsRef<str>>(&self, tokens: &[S]) -> Result<Tensor> {
        let (inputs, _) = self.io_ids(tokens);
        let x = self.emb.forward(&self.params, &inputs)?;
        Ok(self.lstm.forward(&self.params, &x, None)?.0)
    }

    fn run_states<F: FnMut(usize, &[f64])>(&self, tokens: &[impl AsRef<str>], mut visit: F) -> Result<()> {
        let (inputs, targets) = self.io_ids(tokens);
        let table = &self.params[self.emb.table];
        let mut state = LstmState::zeros(self.lstm.hidden);
        for (&inp, &tgt) in inputs.iter().zip(&targets) {
            if inp >= table.rows() {
                return Err(Error::invalid(format!("token id {inp} outside vocabulary")));
            }
            state = self.lstm.step(&self.params, table.row(inp), &state);
            visit(tgt, &state.h);
        }
        Ok(())
    }

    /// Target logit and exact log-partition at every position; `O(V)` each.
    pub fn step_scores<S: AsRef<str>>(&self, tokens: &[S]) -> Result<Vec<StepScore>> {
        let proj = &self.params[self.proj];
        let mut out = Vec::with_capacity(tokens.len() + 1);
        let mut logits = vec![0.0; proj.rows()];
        self.run_states(tokens, |target, h| {
            proj.matvec_into(h, &mut logits);
            out.push(StepScore {
                target,
                logit: logits[target],
                log_z: logsumexp(&logits),
            });
        })?;
        Ok(out)
    }

    /// Full next-token distributions along the candidate.
    pub fn step_distributions<S: AsRef<str>>(&self, tokens: &[S]) -> Result<Vec<Vec<f64>>> {
        let proj = &self.params[self.proj];
        let mut out = Vec::new();
        self.run_states(tokens, |_, h| out.push(softmax(&proj.matvec(h))))?;
        Ok(out)
    }

    /// `Σ_i [v_{w_i}·h_i − logZ(h_i)]`, the exact log-probability.
    pub fn score_normalized<S: AsRef<str>>(&self, tokens: &[S]) -> Result<f64> {
        Ok(self.step_scores(tokens)?.iter().map(|s| s.logit - s.log_z).sum())
    }

    /// `Σ_i [v_{w_i}·h_i − b]`; one dot product per token regardless of
    /// vocabulary size.
    pub fn score_unnormalized<S: AsRef<str>>(&self, tokens: &[S]) -> Result<f64> {
        let proj = &self.params[self.proj];
        let b = self.b();
        let mut total = 0.0;
        self.run_states(tokens, |target, h| total += dot(proj.row(target), h) - b)?;
        Ok(total)
    }

    fn forward_loss(&self, params: &ParamSet, tokens: &[String], alpha: f64, grads: Option<&mut ParamSet>) -> Result<(f64, usize)> {
        let (inputs, targets) = self.io_ids(tokens);
        let x = self.emb.forward(params, &inputs)?;
        let (hs, cache) = self.lstm.forward(params, &x, None)?;
        let proj = &params[self.proj];
        let b = params[self.b].data()[0];
        let mut loss = 0.0;
        let mut d_h = Tensor::zeros(hs.rows(), hs.cols());
        let mut d_b = 0.0;
        let mut d_logits_all: Vec<Vec<f64>> = Vec::new();
        let want_grad = grads.is_some();
        for (t, &target) in targets.iter().enumerate() {
            let logits = proj.matvec(hs.row(t));
            let log_z = logsumexp(&logits);
            let gap = log_z - b;
            loss += log_z - logits[target] + alpha * gap * gap;
            if want_grad {
                let mut d: Vec<f64> = logits.iter().map(|l| (l - log_z).exp()).collect();
                let scale = 1.0 + 2.0 * alpha * gap;
                d.iter_mut().for_each(|p| *p *= scale);
                d[target] -= 1.0;
                d_b -= 2.0 * alpha * gap;
                proj.matvec_t_acc(&d, d_h.row_mut(t));
                d_logits_all.push(d);
            }
        }
        if !loss.is_finite() {
            return Err(Error::Diverged(format!("language model loss is {loss}")));
        }
        if let Some(grads) = grads {
            for (t, d) in d_logits_all.iter().enumerate() {
                grads[self.proj].add_outer(d, hs.row(t), 1.0);
            }
            grads[self.b].data_mut()[0] += d_b;
            let (d_x, _) = self.lstm.backward(params, grads, &cache, Some(&d_h), None);
            self.emb.backward(grads, &inputs, &d_x);
        }
        Ok((loss, targets.len()))
    }

    /// Summed (not averaged) loss over the positions of one sequence.
    pub fn loss_with(&self, params: &ParamSet, tokens: &[String], alpha: f64) -> Result<f64> {
        Ok(self.forward_loss(params, tokens, alpha, None)?.0)
    }

    pub fn loss_and_gradient(&self, params: &ParamSet, tokens: &[String], alpha: f64, grads: &mut ParamSet) -> Result<f64> {
        Ok(self.forward_loss(params, tokens, alpha, Some(grads))?.0)
    }

    /// Mean `logZ(h)` over every position of the given sequences.
    pub fn mean_log_partition(&self, corpus: &[Vec<String>]) -> Result<f64> {
        let mut sum = 0.0;
        let mut n = 0usize;
        for seq in corpus {
            for s in self.step_scores(seq)? {
                sum += s.log_z;
                n += 1;
            }
        }
        if n == 0 {
            return Err(Error::invalid("no positions to average over"));
        }
        Ok(sum / n as f64)
    }

    /// Trains on every sequence except each [`HOLDOUT_EVERY`]-th, which is
    /// kept back to set `b` when `alpha` is zero.
    pub fn train(corpus: &[Vec<String>], cfg: &LmConfig) -> Result<Self> {
        let vocab = Self::build_vocab(corpus, cfg.max_vocab)?;
        let mut model = LanguageModel::new(vocab, cfg)?;
        let mut train: Vec<&Vec<String>> = Vec::new();
        let mut held: Vec<Vec<String>> = Vec::new();
        for (i, seq) in corpus.iter().enumerate() {
            if i % HOLDOUT_EVERY == HOLDOUT_EVERY - 1 {
                held.push(seq.clone());
            } else {
                train.push(seq);
            }
        }
        if train.is_empty() {
            train = corpus.iter().collect();
        }
        model.fit(&train, cfg)?;
        if cfg.alpha == 0.0 {
            let b = if held.is_empty() {
                model.mean_log_partition(corpus)?
            } else {
                model.mean_log_partition(&held)?
            };
            model.set_b(b);
        }
        Ok(model)
    }

    fn fit(&mut self, train: &[&Vec<String>], cfg: &LmConfig) -> Result<()> {
        let mut adam = Adam::new(
            &self.params,
            AdamConfig {
                learning_rate: cfg.learning_rate,
                clip_norm: Some(5.0),
                ..AdamConfig::default()
            },
        );
        let mut order: Vec<usize> = (0..train.len()).collect();
        let mut rng = seeded_rng(cfg.seed ^ 0x1a9);
        let mut grads = self.params.zeros_like();
        for epoch in 0..cfg.epochs {
            order.shuffle(&mut rng);
            let (mut total, mut positions) = (0.0, 0usize);
            for batch in order.chunks(cfg.batch_size.max(1)) {
                grads.zero();
                let mut batch_positions = 0;
                for &i in batch {
                    let (l, n) = self.forward_loss(&self.params, train[i], cfg.alpha, Some(&mut grads))?;
                    total += l;
                    batch_positions += n;
                }
                positions += batch_positions;
                grads.scale(1.0 / batch_positions.max(1) as f64);
                adam.step(&mut self.params, &grads)?;
            }
            log::info!(
                "lm epoch {epoch}: loss/position {:.4}, b {:.3}",
                total / positions.max(1) as f64,
                self.b()
            );
        }
        Ok(())
    }

    pub fn to_checkpoint(&self) -> Checkpoint {
        Checkpoint::new(CHECKPOINT_KIND, self.params.clone()).with_list("vocab", self.vocab.tokens())
    }

    pub fn from_checkpoint(ckpt: Checkpoint) -> Result<Self> {
        ckpt.expect_kind(CHECKPOINT_KIND)?;
        let vocab = Vocabulary::from_list(ckpt.meta_list("vocab")?)?;
        let (bos, eos) = markers(&vocab)?;
        let params = ckpt.params;
        let emb = Embedding::bind(&params, "lm.emb")?;
        let lstm = Lstm::bind(&params, "lm.lstm")?;
        let proj = params.id_with_shape("lm.proj", vocab.len(), lstm.hidden)?;
        let b = params.id_with_shape("lm.b", 1, 1)?;
        if emb.vocab != vocab.len() || emb.dim != lstm.input_dim {
            return Err(Error::format("checkpoint", "language model layer sizes disagree"));
        }
        if !params[b].all_finite() {
            return Err(Error::format("checkpoint", "normalization constant is not finite"));
        }
        Ok(LanguageModel {
            vocab,
            params,
            emb,
            lstm,
            proj,
            b,
            bos,
            eos,
        })
    }

    pub fn save(&self, path: &Path) -> Result<String> {
        self.to_checkpoint().save(path)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_checkpoint(Checkpoint::load(path)?)
    }
}

fn markers(vocab: &Vocabulary) -> Result<(usize, usize)> {
    match (vocab.get(BOS_TOKEN), vocab.get(EOS_TOKEN)) {
        (Some(b), Some(e)) => Ok((b, e)),
        _ => Err(Error::invalid("language model vocabulary lacks sentence markers")),
    }
}
