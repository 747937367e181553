//! Encoder-decoder LSTM that rewrites a query into a related one.

use std::collections::HashMap;
use std::path::Path;

use rand::seq::SliceRandom;

use crate::data::is_strict_subsequence;
use crate::error::{Error, Result};
use crate::nn::lstm::LstmCache;
use crate::nn::{
    logsumexp, seeded_rng, Adam, AdamConfig, Checkpoint, Dense, Embedding, Lstm, LstmState, ParamSet, Tensor,
};
use crate::suggest::pairs::Suggestion;
use crate::text::{tokenize, Vocabulary, BOS_TOKEN, EOS_TOKEN, PAD, UNK};

pub const CHECKPOINT_KIND: &str = "seq2seq";

#[derive(Debug, Clone, PartialEq)]
pub struct Seq2SeqConfig {
    pub embedding_dim: usize,
    pub hidden: usize,
    pub layers: usize,
    pub max_vocab: usize,
    pub epochs: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
    pub seed: u64,
    /// Accept pairs whose target is a strict token subsequence of the source.
    pub allow_generalization_pairs: bool,
}

impl Default for Seq2SeqConfig {
    fn default() -> Self {
        Seq2SeqConfig {
            embedding_dim: 100,
            hidden: 100,
            layers: 2,
            max_vocab: crate::text::vocab::DEFAULT_MAX_SIZE,
            epochs: 5,
            batch_size: 32,
            learning_rate: 0.005,
            seed: 1,
            allow_generalization_pairs: false,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DecodeConfig {
    pub beam: usize,
    /// Output tokens before the end marker is forced.
    pub max_len: usize,
    /// Rank finished hypotheses by log-probability per token.
    pub length_norm: bool,
    /// Drop suggestions identical to the input, unless nothing else is left.
    pub exclude_source: bool,
    pub top_k: usize,
}

impl Default for DecodeConfig {
    fn default() -> Self {
        DecodeConfig {
            beam: 8,
            max_len: 8,
            length_norm: false,
            exclude_source: true,
            top_k: 8,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BeamHypothesis {
    /// Output ids without the end marker.
    pub ids: Vec<usize>,
    pub log_prob: f64,
    pub finished: bool,
}

#[derive(Debug, Clone)]
pub struct Seq2SeqModel {
    vocab: Vocabulary,
    params: ParamSet,
    emb: Embedding,
    enc: Vec<Lstm>,
    dec: Vec<Lstm>,
    out: Dense,
    bos: usize,
    eos: usize,
}

struct Trace {
    src: Vec<usize>,
    enc_caches: Vec<LstmCache>,
    dec_in: Vec<usize>,
    dec_caches: Vec<LstmCache>,
    top: Tensor,
    targets: Vec<usize>,
}

/// Decoder state after a given output prefix, shared across beam widths.
type Memo = HashMap<Vec<usize>, (Vec<LstmState>, Vec<f64>)>;

impl Seq2SeqModel {
    pub fn new(vocab: Vocabulary, cfg: &Seq2SeqConfig) -> Result<Self> {
        if cfg.layers == 0 {
            return Err(Error::invalid("seq2seq needs at least one layer"));
        }
        let (bos, eos) = markers(&vocab)?;
        let mut rng = seeded_rng(cfg.seed);
        let mut params = ParamSet::new();
        let emb = Embedding::new(&mut params, "s2s.emb", vocab.len(), cfg.embedding_dim, &mut rng);
        let mut stack = |side: &str, params: &mut ParamSet| -> Vec<Lstm> {
            (0..cfg.layers)
                .map(|l| {
                    let input = if l == 0 { cfg.embedding_dim } else { cfg.hidden };
                    Lstm::new(params, &format!("s2s.{side}{l}"), input, cfg.hidden, &mut rng)
                })
                .collect()
        };
        let enc = stack("enc", &mut params);
        let dec = stack("dec", &mut params);
        let out = Dense::new(&mut params, "s2s.out", cfg.hidden, vocab.len(), &mut rng);
        Ok(Seq2SeqModel {
            vocab,
            params,
            emb,
            enc,
            dec,
            out,
            bos,
            eos,
        })
    }

    /// Shared source/target vocabulary with sentence markers reserved.
    pub fn build_vocab(pairs: &[(String, String)], max_vocab: usize) -> Result<Vocabulary> {
        let corpus: Vec<Vec<String>> = pairs.iter().flat_map(|(s, t)| [tokenize(s), tokenize(t)]).collect();
        Vocabulary::build_with_reserved(&corpus, max_vocab, &[BOS_TOKEN, EOS_TOKEN])
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

    pub fn eos(&self) -> usize {
        self.eos
    }

    fn source_ids(&self, src: &str) -> Vec<usize> {
        let ids = self.vocab.encode(&tokenize(src));
        if ids.is_empty() {
            vec![PAD]
        } else {
            ids
        }
    }

    fn encode(&self, params: &ParamSet, src: &[usize]) -> Result<(Vec<LstmCache>, Vec<LstmState>)> {
        let mut x = self.emb.forward(params, src)?;
        let mut caches = Vec::with_capacity(self.enc.len());
        let mut finals = Vec::with_capacity(self.enc.len());
        for lstm in &self.enc {
            let (h, cache) = lstm.forward(params, &x, None)?;
            finals.push(cache.final_state().clone());
            caches.push(cache);
            x = h;
        }
        Ok((caches, finals))
    }

    fn trace(&self, params: &ParamSet, src: &str, tgt: &str) -> Result<Trace> {
        let src = self.source_ids(src);
        let (enc_caches, finals) = self.encode(params, &src)?;
        let tgt_ids = self.vocab.encode(&tokenize(tgt));
        let mut dec_in = vec![self.bos];
        dec_in.extend_from_slice(&tgt_ids);
        let mut targets = tgt_ids;
        targets.push(self.eos);
        let mut x = self.emb.forward(params, &dec_in)?;
        let mut dec_caches = Vec::with_capacity(self.dec.len());
        for (lstm, init) in self.dec.iter().zip(&finals) {
            let (h, cache) = lstm.forward(params, &x, Some(init))?;
            dec_caches.push(cache);
            x = h;
        }
        Ok(Trace {
            src,
            enc_caches,
            dec_in,
            dec_caches,
            top: x,
            targets,
        })
    }

    /// Summed cross-entropy of the target given the source, teacher-forced.
    pub fn loss_with(&self, params: &ParamSet, src: &str, tgt: &str) -> Result<f64> {
        let tr = self.trace(params, src, tgt)?;
        let mut loss = 0.0;
        for (t, &y) in tr.targets.iter().enumerate() {
            let logits = self.out.forward(params, tr.top.row(t));
            loss += logsumexp(&logits) - logits[y];
        }
        Ok(loss)
    }

    pub fn loss_and_gradient(&self, params: &ParamSet, src: &str, tgt: &str, grads: &mut ParamSet) -> Result<(f64, usize)> {
        let tr = self.trace(params, src, tgt)?;
        let mut loss = 0.0;
        let mut d_cur = Tensor::zeros(tr.top.rows(), tr.top.cols());
        for (t, &y) in tr.targets.iter().enumerate() {
            let logits = self.out.forward(params, tr.top.row(t));
            let lz = logsumexp(&logits);
            loss += lz - logits[y];
            let mut d: Vec<f64> = logits.iter().map(|l| (l - lz).exp()).collect();
            d[y] -= 1.0;
            let dh = self.out.backward(params, grads, tr.top.row(t), &d);
            d_cur.row_mut(t).copy_from_slice(&dh);
        }
        if !loss.is_finite() {
            return Err(Error::Diverged(format!("seq2seq loss is {loss}")));
        }
        let mut d_init = vec![LstmState::zeros(0); self.dec.len()];
        for l in (0..self.dec.len()).rev() {
            let (d_x, d0) = self.dec[l].backward(params, grads, &tr.dec_caches[l], Some(&d_cur), None);
            d_init[l] = d0;
            d_cur = d_x;
        }
        self.emb.backward(grads, &tr.dec_in, &d_cur);
        let mut d_out: Option<Tensor> = None;
        for l in (0..self.enc.len()).rev() {
            let (d_x, _) = self.enc[l].backward(params, grads, &tr.enc_caches[l], d_out.as_ref(), Some(&d_init[l]));
            d_out = Some(d_x);
        }
        if let Some(d_x) = d_out {
            self.emb.backward(grads, &tr.src, &d_x);
        }
        Ok((loss, tr.targets.len()))
    }

    pub fn mean_loss(&self, pairs: &[(String, String)]) -> Result<f64> {
        let (mut total, mut n) = (0.0, 0usize);
        for (s, t) in pairs {
            total += self.loss_with(&self.params, s, t)?;
            n += tokenize(t).len() + 1;
        }
        Ok(total / n.max(1) as f64)
    }

    /// Rejects generalization pairs unless the config allows them, then
    /// trains with teacher forcing.
    pub fn train(pairs: &[(String, String)], cfg: &Seq2SeqConfig) -> Result<Self> {
        if pairs.is_empty() {
            return Err(Error::invalid("no training pairs"));
        }
        if !cfg.allow_generalization_pairs {
            if let Some((s, t)) = pairs
                .iter()
                .find(|(s, t)| is_strict_subsequence(&tokenize(t), &tokenize(s)))
            {
                return Err(Error::invalid(format!(
                    "generalization pair ({s:?}, {t:?}) in training data; filter the pairs or allow them explicitly"
                )));
            }
        }
        let vocab = Self::build_vocab(pairs, cfg.max_vocab)?;
        let mut model = Seq2SeqModel::new(vocab, cfg)?;
        let mut adam = Adam::new(
            &model.params,
            AdamConfig {
                learning_rate: cfg.learning_rate,
                clip_norm: Some(5.0),
                ..AdamConfig::default()
            },
        );
        let mut order: Vec<usize> = (0..pairs.len()).collect();
        let mut rng = seeded_rng(cfg.seed ^ 0x5e9);
        let mut grads = model.params.zeros_like();
        for epoch in 0..cfg.epochs {
            order.shuffle(&mut rng);
            let (mut total, mut positions) = (0.0, 0usize);
            for batch in order.chunks(cfg.batch_size.max(1)) {
                grads.zero();
                let mut n = 0;
                for &i in batch {
                    let (s, t) = &pairs[i];
                    let (l, k) = model.loss_and_gradient(&model.params, s, t, &mut grads)?;
                    total += l;
                    n += k;
                }
                positions += n;
                grads.scale(1.0 / n.max(1) as f64);
                adam.step(&mut model.params, &grads)?;
            }
            log::info!("seq2seq epoch {epoch}: loss/token {:.4}", total / positions.max(1) as f64);
        }
        Ok(model)
    }

    fn step(&self, states: &[LstmState], token: usize) -> (Vec<LstmState>, Vec<f64>) {
        let mut x = self.params[self.emb.table].row(token).to_vec();
        let mut next = Vec::with_capacity(states.len());
        for (lstm, s) in self.dec.iter().zip(states) {
            let n = lstm.step(&self.params, &x, s);
            x = n.h.clone();
            next.push(n);
        }
        let logits = self.out.forward(&self.params, &x);
        let lz = logsumexp(&logits);
        (next, logits.into_iter().map(|l| l - lz).collect())
    }

    fn expand<'m>(&self, memo: &'m mut Memo, prefix: &[usize]) -> &'m (Vec<LstmState>, Vec<f64>) {
        if !memo.contains_key(prefix) {
            let parent_states = self.expand(memo, &prefix[..prefix.len() - 1]).0.clone();
            let entry = self.step(&parent_states, prefix[prefix.len() - 1]);
            memo.insert(prefix.to_vec(), entry);
        }
        &memo[prefix]
    }

    fn start_memo(&self, src: &str) -> Result<Memo> {
        let src = self.source_ids(src);
        let (_, finals) = self.encode(&self.params, &src)?;
        // The empty prefix holds the encoder state; every output prefix
        // starts with the start marker.
        let mut memo = Memo::new();
        memo.insert(Vec::new(), (finals, Vec::new()));
        Ok(memo)
    }

    /// Tokens the decoder may emit at output position `pos`.
    fn allowed(&self, id: usize, pos: usize, max_len: usize) -> bool {
        if id == self.eos {
            pos >= 1
        } else {
            pos < max_len && id != PAD && id != UNK && id != self.bos
        }
    }

    fn search(&self, memo: &mut Memo, width: usize, max_len: usize) -> Vec<BeamHypothesis> {
        let width = width.max(1);
        let mut alive = vec![BeamHypothesis {
            ids: Vec::new(),
            log_prob: 0.0,
            finished: false,
        }];
        let mut finished = Vec::new();
        for pos in 0..=max_len {
            let mut expansions: Vec<(f64, Vec<usize>, bool)> = Vec::new();
            for hyp in &alive {
                let mut key = vec![self.bos];
                key.extend_from_slice(&hyp.ids);
                let lsm = self.expand(memo, &key).1.clone();
                let mut options: Vec<(f64, usize)> = lsm
                    .iter()
                    .enumerate()
                    .filter(|&(id, _)| self.allowed(id, pos, max_len))
                    .map(|(id, &lp)| (hyp.log_prob + lp, id))
                    .collect();
                options.sort_by(|a, b| b.0.total_cmp(&a.0).then(a.1.cmp(&b.1)));
                options.truncate(width);
                for (lp, id) in options {
                    let mut ids = hyp.ids.clone();
                    let done = id == self.eos;
                    if !done {
                        ids.push(id);
                    }
                    expansions.push((lp, ids, done));
                }
            }
            expansions.sort_by(|a, b| b.0.total_cmp(&a.0).then_with(|| a.1.cmp(&b.1)).then(a.2.cmp(&b.2)));
            expansions.truncate(width);
            alive.clear();
            for (log_prob, ids, done) in expansions {
                let h = BeamHypothesis {
                    ids,
                    log_prob,
                    finished: done,
                };
                if done {
                    finished.push(h);
                } else {
                    alive.push(h);
                }
            }
            if alive.is_empty() {
                break;
            }
        }
        finished.sort_by(|a, b| b.log_prob.total_cmp(&a.log_prob).then_with(|| a.ids.cmp(&b.ids)));
        finished
    }

    /// Plain length-capped beam search; finished hypotheses, best first.
    pub fn beam_search(&self, src: &str, width: usize, max_len: usize) -> Result<Vec<BeamHypothesis>> {
        let mut memo = self.start_memo(src)?;
        Ok(self.search(&mut memo, width, max_len))
    }

    /// Pools the finished hypotheses of beam searches at every width up to
    /// `cfg.beam`, so a wider beam can only improve the best score.
    pub fn decode_hypotheses(&self, src: &str, cfg: &DecodeConfig) -> Result<Vec<BeamHypothesis>> {
        let mut memo = self.start_memo(src)?;
        let mut pool: HashMap<Vec<usize>, BeamHypothesis> = HashMap::new();
        for w in 1..=cfg.beam.max(1) {
            for h in self.search(&mut memo, w, cfg.max_len) {
                pool.entry(h.ids.clone()).or_insert(h);
            }
        }
        let key = |h: &BeamHypothesis| {
            if cfg.length_norm {
                h.log_prob / (h.ids.len() + 1) as f64
            } else {
                h.log_prob
            }
        };
        let mut hyps: Vec<BeamHypothesis> = pool.into_values().collect();
        hyps.sort_by(|a, b| key(b).total_cmp(&key(a)).then_with(|| a.ids.cmp(&b.ids)));
        Ok(hyps)
    }

    pub fn decode(&self, src: &str, cfg: &DecodeConfig) -> Result<Vec<Suggestion>> {
        let hyps = self.decode_hypotheses(src, cfg)?;
        let source = crate::text::normalize_query(src);
        let mut out: Vec<Suggestion> = hyps
            .iter()
            .map(|h| Suggestion {
                text: self.render(&h.ids),
                score: h.log_prob,
            })
            .collect();
        if cfg.exclude_source && out.iter().any(|s| s.text != source) {
            out.retain(|s| s.text != source);
        }
        out.truncate(cfg.top_k.max(1));
        Ok(out)
    }

    pub fn render(&self, ids: &[usize]) -> String {
        ids.iter().map(|&i| self.vocab.token(i)).collect::<Vec<_>>().join(" ")
    }

    /// Teacher-forced log-probability of `ids` followed by the end marker.
    pub fn sequence_log_prob(&self, src: &str, ids: &[usize]) -> Result<f64> {
        let mut memo = self.start_memo(src)?;
        let mut key = vec![self.bos];
        let mut total = 0.0;
        for &id in ids.iter().chain(std::iter::once(&self.eos)) {
            total += self.expand(&mut memo, &key).1[id];
            key.push(id);
        }
        Ok(total)
    }

    /// Next-token log-probabilities after an output prefix.
    pub fn next_log_probs(&self, src: &str, prefix: &[usize]) -> Result<Vec<f64>> {
        let mut memo = self.start_memo(src)?;
        let mut key = vec![self.bos];
        key.extend_from_slice(prefix);
        Ok(self.expand(&mut memo, &key).1.clone())
    }

    pub fn to_checkpoint(&self) -> Checkpoint {
        Checkpoint::new(CHECKPOINT_KIND, self.params.clone())
            .with_meta("layers", self.enc.len())
            .with_list("vocab", self.vocab.tokens())
    }

    pub fn from_checkpoint(ckpt: Checkpoint) -> Result<Self> {
        ckpt.expect_kind(CHECKPOINT_KIND)?;
        let vocab = Vocabulary::from_list(ckpt.meta_list("vocab")?)?;
        let (bos, eos) = markers(&vocab)?;
        let layers: usize = ckpt.meta_parse("layers")?;
        let params = ckpt.params;
        let emb = Embedding::bind(&params, "s2s.emb")?;
        let bind = |side: &str| -> Result<Vec<Lstm>> {
            (0..layers).map(|l| Lstm::bind(&params, &format!("s2s.{side}{l}"))).collect()
        };
        let enc = bind("enc")?;
        let dec = bind("dec")?;
        let out = Dense::bind(&params, "s2s.out")?;
        if emb.vocab != vocab.len() || out.output != vocab.len() {
            return Err(Error::format("checkpoint", "seq2seq vocabulary sizes disagree"));
        }
        Ok(Seq2SeqModel {
            vocab,
            params,
            emb,
            enc,
            dec,
            out,
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
        _ => Err(Error::invalid("seq2seq vocabulary lacks sentence markers")),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nn::gradient_check;
    use proptest::prelude::*;

    fn pair(s: &str, t: &str) -> (String, String) {
        (s.to_string(), t.to_string())
    }

    fn tiny(seed: u64, words: &[&str], dim: usize) -> Seq2SeqModel {
        let pairs: Vec<(String, String)> = words.iter().map(|w| pair(w, w)).collect();
        let vocab = Seq2SeqModel::build_vocab(&pairs, 100).unwrap();
        let cfg = Seq2SeqConfig {
            embedding_dim: dim,
            hidden: dim,
            seed,
            ..Seq2SeqConfig::default()
        };
        let mut m = Seq2SeqModel::new(vocab, &cfg).unwrap();
        // Larger output weights give peaked, seed-dependent distributions.
        let w = m.out.weight;
        m.params_mut()[w].scale(4.0);
        m
    }

    fn emittable(m: &Seq2SeqModel) -> Vec<usize> {
        (0..m.vocab().len()).filter(|&i| m.allowed(i, 0, 1)).collect()
    }

    #[test]
    fn gradient_check_two_layers() {
        let m = tiny(3, &["a", "b", "c"], 5);
        let mut params = m.params().clone();
        let mut grads = params.zeros_like();
        m.loss_and_gradient(&params, "a b", "c a", &mut grads).unwrap();
        let report = gradient_check(&mut params, &grads, 150, 2, |p| m.loss_with(p, "a b", "c a").unwrap());
        assert!(report.max_relative_error < 1e-5, "{report:?}");
    }

    #[test]
    fn full_beam_matches_exhaustive_search() {
        let m = tiny(5, &["a", "b", "c"], 6);
        let words = emittable(&m);
        let max_len = 3;
        let mut all: Vec<Vec<usize>> = vec![vec![]];
        let mut best: Option<(f64, Vec<usize>)> = None;
        for _ in 0..max_len {
            all = all
                .iter()
                .flat_map(|p| words.iter().map(move |&w| [p.clone(), vec![w]].concat()))
                .collect();
            for seq in &all {
                let lp = m.sequence_log_prob("a c", seq).unwrap();
                if best.as_ref().is_none_or(|(b, _)| lp > *b) {
                    best = Some((lp, seq.clone()));
                }
            }
        }
        let width = words.len().pow(max_len as u32);
        let top = &m.beam_search("a c", width, max_len).unwrap()[0];
        let (lp, seq) = best.unwrap();
        assert_eq!(top.ids, seq);
        assert!((top.log_prob - lp).abs() < 1e-9);
    }

    #[test]
    fn width_one_is_greedy() {
        let m = tiny(8, &["a", "b", "c", "d"], 6);
        let max_len = 5;
        let mut ids: Vec<usize> = Vec::new();
        let mut total = 0.0;
        loop {
            let lp = m.next_log_probs("b d", &ids).unwrap();
            let pick = (0..lp.len())
                .filter(|&i| m.allowed(i, ids.len(), max_len))
                .max_by(|&a, &b| lp[a].total_cmp(&lp[b]).then(b.cmp(&a)))
                .unwrap();
            total += lp[pick];
            if pick == m.eos() {
                break;
            }
            ids.push(pick);
        }
        let beam = m.beam_search("b d", 1, max_len).unwrap();
        assert_eq!(beam[0].ids, ids);
        assert!((beam[0].log_prob - total).abs() < 1e-12);
    }

    #[test]
    fn hypotheses_rescore_teacher_forced() {
        let m = tiny(2, &["a", "b", "c", "d"], 6);
        let cfg = DecodeConfig { beam: 4, max_len: 4, ..DecodeConfig::default() };
        let hyps = m.decode_hypotheses("c", &cfg).unwrap();
        assert!(!hyps.is_empty());
        for h in &hyps {
            assert!(h.finished && !h.ids.is_empty() && h.ids.len() <= 4);
            assert!((m.sequence_log_prob("c", &h.ids).unwrap() - h.log_prob).abs() < 1e-8);
            let mut prefix = Vec::new();
            for &id in h.ids.iter().chain(std::iter::once(&m.eos())) {
                assert!(m.next_log_probs("c", &prefix).unwrap()[id] <= 0.0);
                prefix.push(id);
            }
        }
    }

    #[test]
    fn unseen_source_still_gets_suggestions() {
        let m = tiny(4, &["a", "b"], 4);
        let out = m.decode("never seen words", &DecodeConfig::default()).unwrap();
        assert!(!out.is_empty());
    }

    #[test]
    fn generalization_pairs_rejected_unless_allowed() {
        let pairs = vec![pair("senior research scientist", "research scientist")];
        let cfg = Seq2SeqConfig {
            embedding_dim: 4,
            hidden: 4,
            epochs: 1,
            ..Seq2SeqConfig::default()
        };
        assert!(matches!(Seq2SeqModel::train(&pairs, &cfg), Err(Error::InvalidInput(_))));
        let allowed = Seq2SeqConfig {
            allow_generalization_pairs: true,
            ..cfg
        };
        assert!(Seq2SeqModel::train(&pairs, &allowed).is_ok());
    }

    #[test]
    fn seeded_training_is_deterministic() {
        let pairs = vec![pair("a b", "a c"), pair("c", "b c"), pair("b", "a")];
        let cfg = Seq2SeqConfig {
            embedding_dim: 6,
            hidden: 6,
            epochs: 3,
            batch_size: 2,
            ..Seq2SeqConfig::default()
        };
        let a = Seq2SeqModel::train(&pairs, &cfg).unwrap().mean_loss(&pairs).unwrap();
        let b = Seq2SeqModel::train(&pairs, &cfg).unwrap().mean_loss(&pairs).unwrap();
        assert!((a - b).abs() < 1e-9);
    }

    #[test]
    fn learns_to_copy() {
        let words = ["w0", "w1", "w2", "w3", "w4", "w5", "w6", "w7"];
        let mut rng = seeded_rng(21);
        let pairs: Vec<(String, String)> = (0..500)
            .map(|_| {
                let n = rand::Rng::random_range(&mut rng, 1..4);
                let q: Vec<&str> = (0..n).map(|_| words[rand::Rng::random_range(&mut rng, 0..8)]).collect();
                (q.join(" "), q.join(" "))
            })
            .collect();
        let cfg = Seq2SeqConfig {
            embedding_dim: 24,
            hidden: 48,
            epochs: 30,
            batch_size: 16,
            learning_rate: 0.01,
            ..Seq2SeqConfig::default()
        };
        let m = Seq2SeqModel::train(&pairs, &cfg).unwrap();
        let dc = DecodeConfig {
            beam: 2,
            max_len: 4,
            exclude_source: false,
            ..DecodeConfig::default()
        };
        let hits = pairs
            .iter()
            .filter(|(s, t)| m.decode(s, &dc).unwrap()[0].text == *t)
            .count();
        assert!(hits as f64 / pairs.len() as f64 >= 0.95, "{hits}/500");
    }

    #[test]
    fn checkpoint_round_trip() {
        let m = tiny(6, &["a", "b"], 4);
        let back = Seq2SeqModel::from_checkpoint(Checkpoint::from_bytes(&m.to_checkpoint().to_bytes()).unwrap()).unwrap();
        assert_eq!(back.sequence_log_prob("a", &[4]).unwrap(), m.sequence_log_prob("a", &[4]).unwrap());
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(24))]

        #[test]
        fn wider_beam_never_worse(seed in 0u64..1000, src in prop::sample::select(vec!["a", "b c", "c a b", "d"])) {
            let m = tiny(seed, &["a", "b", "c", "d"], 5);
            let mut prev = f64::NEG_INFINITY;
            for beam in 1..=5 {
                let cfg = DecodeConfig { beam, max_len: 4, ..DecodeConfig::default() };
                let top = m.decode_hypotheses(src, &cfg).unwrap()[0].log_prob;
                prop_assert!(top >= prev - 1e-12);
                prev = top;
            }
        }
    }
}
