use std::fmt;
use std::path::Path;
use std::str::FromStr;

use rand::seq::SliceRandom;

use crate::data::Vertical;
use crate::error::{Error, Result};
use crate::intent::features::{featurize_intent, INTENT_FEATURES};
use crate::nn::layers::{tanh_backward, tanh_in_place};
use crate::nn::{
    cross_entropy_grad, seeded_rng, softmax, softmax_cross_entropy, Adam, AdamConfig, Checkpoint, Conv1d, Dense,
    Embedding, Lstm, ParamSet, Tensor,
};
use crate::text::{tokenize, LexiconSet, TokenSequence, Vocabulary, PAD};

pub const INTENT_CLASSES: usize = 7;
pub const CHECKPOINT_KIND: &str = "intent";
pub const BASELINE_KIND: &str = "intent-baseline";

/// Anything that maps a query to a distribution over the seven intents.
pub trait IntentClassifier {
    fn predict(&self, raw: &str) -> Result<Vec<f64>>;

    fn predict_vertical(&self, raw: &str) -> Result<Vertical> {
        let p = self.predict(raw)?;
        Ok(Vertical::INTENT[argmax(&p)])
    }
}

/// Index of the largest value; the first one on ties.
pub fn argmax(v: &[f64]) -> usize {
    let mut best = 0;
    for (i, x) in v.iter().enumerate() {
        if *x > v[best] {
            best = i;
        }
    }
    best
}

pub fn label_index(v: Vertical) -> Result<usize> {
    v.intent_index()
        .ok_or_else(|| Error::invalid(format!("{v} is not an intent class")))
}

/// Fraction of examples whose argmax matches the label.
pub fn accuracy<C: IntentClassifier + ?Sized>(model: &C, data: &[(String, Vertical)]) -> Result<f64> {
    if data.is_empty() {
        return Err(Error::invalid("empty evaluation set"));
    }
    let mut hits = 0;
    for (q, v) in data {
        if model.predict_vertical(q)? == *v {
            hits += 1;
        }
    }
    Ok(hits as f64 / data.len() as f64)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum IntentEncoder {
    Cnn,
    /// Final hidden state of a unidirectional LSTM; offline comparison only.
    Lstm,
}

impl fmt::Display for IntentEncoder {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            IntentEncoder::Cnn => "cnn",
            IntentEncoder::Lstm => "lstm",
        })
    }
}

impl FromStr for IntentEncoder {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "cnn" => Ok(IntentEncoder::Cnn),
            "lstm" => Ok(IntentEncoder::Lstm),
            _ => Err(Error::invalid(format!("unknown intent encoder {s}"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct IntentConfig {
    pub encoder: IntentEncoder,
    pub embedding_dim: usize,
    pub filters: usize,
    pub width: usize,
    pub lstm_hidden: usize,
    pub hidden: usize,
    pub max_vocab: usize,
    pub epochs: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
    pub seed: u64,
}

impl Default for IntentConfig {
    fn default() -> Self {
        IntentConfig {
            encoder: IntentEncoder::Cnn,
            embedding_dim: 64,
            filters: 128,
            width: 3,
            lstm_hidden: 128,
            hidden: 200,
            max_vocab: crate::text::vocab::DEFAULT_MAX_SIZE,
            epochs: 5,
            batch_size: 32,
            learning_rate: 0.002,
            seed: 1,
        }
    }
}

#[derive(Debug, Clone, Copy)]
enum Encoder {
    Cnn(Conv1d),
    Lstm(Lstm),
}

/// Text encoder output concatenated with handcrafted features, one tanh
/// hidden layer, softmax over the seven intents.
#[derive(Debug, Clone)]
pub struct IntentModel {
    vocab: Vocabulary,
    lexicons: LexiconSet,
    params: ParamSet,
    emb: Embedding,
    encoder: Encoder,
    hidden: Dense,
    out: Dense,
}

enum EncCache {
    Cnn(crate::nn::layers::ConvCache),
    Lstm(crate::nn::lstm::LstmCache),
}

struct Forward {
    ids: Vec<usize>,
    enc_cache: EncCache,
    joined: Vec<f64>,
    hidden: Vec<f64>,
    logits: Vec<f64>,
}

impl IntentModel {
    pub fn new(vocab: Vocabulary, lexicons: LexiconSet, cfg: &IntentConfig) -> Self {
        let mut rng = seeded_rng(cfg.seed);
        let mut params = ParamSet::new();
        let emb = Embedding::new(&mut params, "intent.emb", vocab.len(), cfg.embedding_dim, &mut rng);
        let (encoder, enc_dim) = match cfg.encoder {
            IntentEncoder::Cnn => (
                Encoder::Cnn(Conv1d::new(&mut params, "intent.conv", cfg.filters, cfg.width, cfg.embedding_dim, &mut rng)),
                cfg.filters,
            ),
            IntentEncoder::Lstm => (
                Encoder::Lstm(Lstm::new(&mut params, "intent.lstm", cfg.embedding_dim, cfg.lstm_hidden, &mut rng)),
                cfg.lstm_hidden,
            ),
        };
        let hidden = Dense::new(&mut params, "intent.hidden", enc_dim + INTENT_FEATURES, cfg.hidden, &mut rng);
        let out = Dense::new(&mut params, "intent.out", cfg.hidden, INTENT_CLASSES, &mut rng);
        IntentModel {
            vocab,
            lexicons,
            params,
            emb,
            encoder,
            hidden,
            out,
        }
    }

    pub fn params(&self) -> &ParamSet {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut ParamSet {
        &mut self.params
    }

    pub fn vocab(&self) -> &Vocabulary {
        &self.vocab
    }

    fn forward(&self, params: &ParamSet, raw: &str) -> Result<Forward> {
        let seq = TokenSequence::new(raw, &self.vocab);
        let feats = featurize_intent(&seq, &self.lexicons);
        let ids = if seq.ids.is_empty() { vec![PAD] } else { seq.ids };
        let x = self.emb.forward(params, &ids)?;
        let (mut joined, enc_cache) = match self.encoder {
            Encoder::Cnn(conv) => {
                let (v, c) = conv.forward(params, &x)?;
                (v, EncCache::Cnn(c))
            }
            Encoder::Lstm(lstm) => {
                let (_, c) = lstm.forward(params, &x, None)?;
                (c.final_state().h.clone(), EncCache::Lstm(c))
            }
        };
        joined.extend_from_slice(&feats);
        let mut hidden = self.hidden.forward(params, &joined);
        tanh_in_place(&mut hidden);
        let logits = self.out.forward(params, &hidden);
        Ok(Forward {
            ids,
            enc_cache,
            joined,
            hidden,
            logits,
        })
    }

    pub fn logits(&self, raw: &str) -> Result<Vec<f64>> {
        Ok(self.forward(&self.params, raw)?.logits)
    }

    pub fn predict_with(&self, params: &ParamSet, raw: &str) -> Result<Vec<f64>> {
        Ok(softmax(&self.forward(params, raw)?.logits))
    }

    pub fn loss_with(&self, params: &ParamSet, raw: &str, label: Vertical) -> Result<f64> {
        let f = self.forward(params, raw)?;
        Ok(softmax_cross_entropy(&f.logits, label_index(label)?)?.0)
    }

    pub fn loss_and_gradient(&self, params: &ParamSet, raw: &str, label: Vertical, grads: &mut ParamSet) -> Result<f64> {
        let f = self.forward(params, raw)?;
        let (loss, probs) = softmax_cross_entropy(&f.logits, label_index(label)?)?;
        let d_logits = cross_entropy_grad(&probs, label_index(label)?);
        let d_hidden = self.out.backward(params, grads, &f.hidden, &d_logits);
        let d_pre = tanh_backward(&f.hidden, &d_hidden);
        let d_joined = self.hidden.backward(params, grads, &f.joined, &d_pre);
        let d_x = match (&self.encoder, &f.enc_cache) {
            (Encoder::Cnn(conv), EncCache::Cnn(c)) => {
                conv.backward(params, grads, c, &d_joined[..conv.filters])
            }
            (Encoder::Lstm(lstm), EncCache::Lstm(c)) => {
                let d_final = crate::nn::LstmState {
                    h: d_joined[..lstm.hidden].to_vec(),
                    c: vec![0.0; lstm.hidden],
                };
                lstm.backward(params, grads, c, None, Some(&d_final)).0
            }
            _ => unreachable!("encoder and cache built together"),
        };
        self.emb.backward(grads, &f.ids, &d_x);
        Ok(loss)
    }

    /// Builds the vocabulary from the training queries and trains with Adam.
    pub fn train(data: &[(String, Vertical)], lexicons: &LexiconSet, cfg: &IntentConfig) -> Result<Self> {
        check_labels(data)?;
        let corpus: Vec<Vec<String>> = data.iter().map(|(q, _)| tokenize(q)).collect();
        let vocab = Vocabulary::build(&corpus, cfg.max_vocab)?;
        let mut model = IntentModel::new(vocab, lexicons.clone(), cfg);
        let mut adam = Adam::new(
            &model.params,
            AdamConfig {
                learning_rate: cfg.learning_rate,
                clip_norm: Some(5.0),
                ..AdamConfig::default()
            },
        );
        let mut order: Vec<usize> = (0..data.len()).collect();
        let mut rng = seeded_rng(cfg.seed ^ 0x1e7);
        let mut grads = model.params.zeros_like();
        for epoch in 0..cfg.epochs {
            order.shuffle(&mut rng);
            let mut total = 0.0;
            for batch in order.chunks(cfg.batch_size.max(1)) {
                grads.zero();
                for &i in batch {
                    let (q, v) = &data[i];
                    total += model.loss_and_gradient(&model.params, q, *v, &mut grads)?;
                }
                grads.scale(1.0 / batch.len() as f64);
                adam.step(&mut model.params, &grads)?;
            }
            log::info!("intent epoch {epoch}: loss {:.4}", total / data.len() as f64);
        }
        Ok(model)
    }

    pub fn to_checkpoint(&self) -> Checkpoint {
        let (encoder, width) = match self.encoder {
            Encoder::Cnn(c) => (IntentEncoder::Cnn, c.width),
            Encoder::Lstm(_) => (IntentEncoder::Lstm, 0),
        };
        let ckpt = Checkpoint::new(CHECKPOINT_KIND, self.params.clone())
            .with_meta("encoder", encoder)
            .with_meta("width", width)
            .with_list("vocab", self.vocab.tokens());
        self.lexicons.to_checkpoint(ckpt)
    }

    pub fn from_checkpoint(ckpt: Checkpoint) -> Result<Self> {
        ckpt.expect_kind(CHECKPOINT_KIND)?;
        let vocab = Vocabulary::from_list(ckpt.meta_list("vocab")?)?;
        let lexicons = LexiconSet::from_checkpoint(&ckpt)?;
        let params = ckpt.params.clone();
        let emb = Embedding::bind(&params, "intent.emb")?;
        if emb.vocab != vocab.len() {
            return Err(Error::format("checkpoint", "intent embedding and vocabulary sizes differ"));
        }
        let encoder = match ckpt.meta_str("encoder")?.parse()? {
            IntentEncoder::Cnn => Encoder::Cnn(Conv1d::bind(&params, "intent.conv", ckpt.meta_parse("width")?)?),
            IntentEncoder::Lstm => Encoder::Lstm(Lstm::bind(&params, "intent.lstm")?),
        };
        let hidden = Dense::bind(&params, "intent.hidden")?;
        let out = Dense::bind(&params, "intent.out")?;
        if out.output != INTENT_CLASSES {
            return Err(Error::format("checkpoint", "intent output layer must have 7 classes"));
        }
        Ok(IntentModel {
            vocab,
            lexicons,
            params,
            emb,
            encoder,
            hidden,
            out,
        })
    }

    pub fn save(&self, path: &Path) -> Result<String> {
        self.to_checkpoint().save(path)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_checkpoint(Checkpoint::load(path)?)
    }
}

impl IntentClassifier for IntentModel {
    fn predict(&self, raw: &str) -> Result<Vec<f64>> {
        self.predict_with(&self.params, raw)
    }
}

fn check_labels(data: &[(String, Vertical)]) -> Result<()> {
    if data.is_empty() {
        return Err(Error::invalid("empty intent training set"));
    }
    for (_, v) in data {
        label_index(*v)?;
    }
    Ok(())
}

/// Multinomial logistic regression over bag-of-words counts plus the
/// handcrafted features.
#[derive(Debug, Clone)]
pub struct IntentBaseline {
    vocab: Vocabulary,
    lexicons: LexiconSet,
    /// `(|V| + 10) x 7`: one row per vocabulary id, then one per feature.
    weights: Tensor,
    bias: Vec<f64>,
}

impl IntentBaseline {
    pub fn zeros(vocab: Vocabulary, lexicons: LexiconSet) -> Self {
        let rows = vocab.len() + INTENT_FEATURES;
        IntentBaseline {
            vocab,
            lexicons,
            weights: Tensor::zeros(rows, INTENT_CLASSES),
            bias: vec![0.0; INTENT_CLASSES],
        }
    }

    /// Sparse input as `(row, value)` pairs.
    fn inputs(&self, raw: &str) -> Vec<(usize, f64)> {
        let seq = TokenSequence::new(raw, &self.vocab);
        let mut x: Vec<(usize, f64)> = seq.ids.iter().map(|&id| (id, 1.0)).collect();
        let feats = featurize_intent(&seq, &self.lexicons);
        let base = self.vocab.len();
        x.extend(feats.iter().enumerate().filter(|(_, v)| **v != 0.0).map(|(i, v)| (base + i, *v)));
        x
    }

    pub fn logits(&self, raw: &str) -> Vec<f64> {
        let mut z = self.bias.clone();
        for (row, v) in self.inputs(raw) {
            for (zk, w) in z.iter_mut().zip(self.weights.row(row)) {
                *zk += v * w;
            }
        }
        z
    }

    pub fn train(data: &[(String, Vertical)], lexicons: &LexiconSet, cfg: &IntentConfig) -> Result<Self> {
        check_labels(data)?;
        let corpus: Vec<Vec<String>> = data.iter().map(|(q, _)| tokenize(q)).collect();
        let vocab = Vocabulary::build(&corpus, cfg.max_vocab)?;
        let mut model = IntentBaseline::zeros(vocab, lexicons.clone());
        let mut params = ParamSet::new();
        let w = params.add("baseline.weights", model.weights.clone());
        let b = params.add("baseline.bias", Tensor::zeros(1, INTENT_CLASSES));
        let mut adam = Adam::new(
            &params,
            AdamConfig {
                learning_rate: 0.02,
                ..AdamConfig::default()
            },
        );
        let inputs: Vec<Vec<(usize, f64)>> = data.iter().map(|(q, _)| model.inputs(q)).collect();
        let mut order: Vec<usize> = (0..data.len()).collect();
        let mut rng = seeded_rng(cfg.seed ^ 0xba5e);
        let mut grads = params.zeros_like();
        for _ in 0..cfg.epochs.max(1) * 2 {
            order.shuffle(&mut rng);
            for batch in order.chunks(cfg.batch_size.max(1)) {
                grads.zero();
                for &i in batch {
                    let mut z = params[b].data().to_vec();
                    for &(row, v) in &inputs[i] {
                        for (zk, wk) in z.iter_mut().zip(params[w].row(row)) {
                            *zk += v * wk;
                        }
                    }
                    let (_, probs) = softmax_cross_entropy(&z, label_index(data[i].1)?)?;
                    let dz = cross_entropy_grad(&probs, label_index(data[i].1)?);
                    for &(row, v) in &inputs[i] {
                        crate::nn::axpy(v, &dz, grads[w].row_mut(row));
                    }
                    crate::nn::axpy(1.0, &dz, grads[b].data_mut());
                }
                grads.scale(1.0 / batch.len() as f64);
                adam.step(&mut params, &grads)?;
            }
        }
        model.weights = params[w].clone();
        model.bias = params[b].data().to_vec();
        Ok(model)
    }

    pub fn to_checkpoint(&self) -> Checkpoint {
        let mut params = ParamSet::new();
        params.add("baseline.weights", self.weights.clone());
        params.add("baseline.bias", Tensor::from_vec(1, INTENT_CLASSES, self.bias.clone()).expect("bias shape"));
        let ckpt = Checkpoint::new(BASELINE_KIND, params).with_list("vocab", self.vocab.tokens());
        self.lexicons.to_checkpoint(ckpt)
    }

    pub fn from_checkpoint(ckpt: Checkpoint) -> Result<Self> {
        ckpt.expect_kind(BASELINE_KIND)?;
        let vocab = Vocabulary::from_list(ckpt.meta_list("vocab")?)?;
        let lexicons = LexiconSet::from_checkpoint(&ckpt)?;
        let w = ckpt
            .params
            .id_with_shape("baseline.weights", vocab.len() + INTENT_FEATURES, INTENT_CLASSES)?;
        let b = ckpt.params.id_with_shape("baseline.bias", 1, INTENT_CLASSES)?;
        Ok(IntentBaseline {
            weights: ckpt.params[w].clone(),
            bias: ckpt.params[b].data().to_vec(),
            vocab,
            lexicons,
        })
    }

    pub fn save(&self, path: &Path) -> Result<String> {
        self.to_checkpoint().save(path)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_checkpoint(Checkpoint::load(path)?)
    }
}

impl IntentClassifier for IntentBaseline {
    fn predict(&self, raw: &str) -> Result<Vec<f64>> {
        Ok(softmax(&self.logits(raw)))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nn::gradient_check;
    use rand::Rng;

    /// Each vertical has a marker token; the majority rule on markers is a
    /// perfect classifier for this set.
    fn separable(n: usize, seed: u64) -> Vec<(String, Vertical)> {
        let markers = ["alpha", "bravo", "charlie", "delta", "echo", "foxtrot", "golf"];
        let fillers = ["the", "a", "best", "new", "top", "my", "find", "near"];
        let mut rng = seeded_rng(seed);
        (0..n)
            .map(|_| {
                let k = rng.random_range(0..7);
                let mut words: Vec<&str> = (0..rng.random_range(0..3))
                    .map(|_| fillers[rng.random_range(0..fillers.len())])
                    .collect();
                words.insert(rng.random_range(0..=words.len()), markers[k]);
                (words.join(" "), Vertical::INTENT[k])
            })
            .collect()
    }

    fn small() -> IntentConfig {
        IntentConfig {
            embedding_dim: 8,
            filters: 12,
            hidden: 16,
            lstm_hidden: 10,
            epochs: 12,
            batch_size: 8,
            learning_rate: 0.01,
            ..IntentConfig::default()
        }
    }

    #[test]
    fn zero_model_is_uniform() {
        let data = separable(20, 1);
        let corpus: Vec<Vec<String>> = data.iter().map(|(q, _)| tokenize(q)).collect();
        let vocab = Vocabulary::build(&corpus, 100).unwrap();
        let mut m = IntentModel::new(vocab.clone(), LexiconSet::new(), &small());
        for t in m.params_mut().tensors_mut() {
            t.fill(0.0);
        }
        for p in m.predict("alpha bravo").unwrap() {
            assert!((p - 1.0 / 7.0).abs() < 1e-12);
        }
        let b = IntentBaseline::zeros(vocab, LexiconSet::new());
        for p in b.predict("alpha").unwrap() {
            assert!((p - 1.0 / 7.0).abs() < 1e-12);
        }
    }

    #[test]
    fn separable_set_is_learned() {
        let data = separable(200, 2);
        let cnn = IntentModel::train(&data, &LexiconSet::new(), &small()).unwrap();
        assert!(accuracy(&cnn, &data).unwrap() >= 0.99);
        let base = IntentBaseline::train(&data, &LexiconSet::new(), &small()).unwrap();
        assert!(accuracy(&base, &data).unwrap() >= 0.99);
    }

    #[test]
    fn predictions_are_distributions() {
        let data = separable(50, 3);
        let m = IntentModel::train(&data, &LexiconSet::new(), &IntentConfig { epochs: 1, ..small() }).unwrap();
        let mut rng = seeded_rng(9);
        for _ in 0..1000 {
            let q: String = (0..rng.random_range(0..6))
                .map(|_| ["alpha", "zzz", "near", "\"", "7"][rng.random_range(0..5)])
                .collect::<Vec<_>>()
                .join(" ");
            let p = m.predict(&q).unwrap();
            assert_eq!(p.len(), 7);
            assert!((p.iter().sum::<f64>() - 1.0).abs() < 1e-6);
        }
    }

    #[test]
    fn help_label_rejected() {
        let data = vec![("hide profile".to_string(), Vertical::Help)];
        assert!(IntentModel::train(&data, &LexiconSet::new(), &small()).is_err());
        assert!(IntentBaseline::train(&data, &LexiconSet::new(), &small()).is_err());
    }

    #[test]
    fn baseline_ignores_token_order() {
        let data = separable(100, 4);
        let b = IntentBaseline::train(&data, &LexiconSet::new(), &small()).unwrap();
        let p = b.predict("near alpha best").unwrap();
        let q = b.predict("best near alpha").unwrap();
        assert_eq!(p, q);
    }

    #[test]
    fn logit_shift_invariance() {
        let data = separable(60, 5);
        let mut m = IntentModel::train(&data, &LexiconSet::new(), &IntentConfig { epochs: 1, ..small() }).unwrap();
        let before = m.predict("alpha near").unwrap();
        let bias = m.out.bias;
        for v in m.params_mut()[bias].data_mut() {
            *v += 3.5;
        }
        let after = m.predict("alpha near").unwrap();
        for (a, b) in before.iter().zip(&after) {
            assert!((a - b).abs() < 1e-9);
        }
        assert_eq!(argmax(&before), argmax(&after));
    }

    #[test]
    fn checkpoint_round_trip() {
        let data = separable(60, 6);
        let m = IntentModel::train(&data, &LexiconSet::new(), &IntentConfig { epochs: 1, ..small() }).unwrap();
        let back = IntentModel::from_checkpoint(Checkpoint::from_bytes(&m.to_checkpoint().to_bytes()).unwrap()).unwrap();
        for (q, _) in &data {
            let (a, b) = (m.predict(q).unwrap(), back.predict(q).unwrap());
            for (x, y) in a.iter().zip(&b) {
                assert!((x - y).abs() < 1e-9);
            }
        }
        let base = IntentBaseline::train(&data, &LexiconSet::new(), &small()).unwrap();
        let back = IntentBaseline::from_checkpoint(Checkpoint::from_bytes(&base.to_checkpoint().to_bytes()).unwrap()).unwrap();
        assert_eq!(base.predict("alpha").unwrap(), back.predict("alpha").unwrap());
    }

    #[test]
    fn gradients_match_finite_differences() {
        let data = separable(8, 7);
        for encoder in [IntentEncoder::Cnn, IntentEncoder::Lstm] {
            let cfg = IntentConfig { encoder, ..small() };
            let corpus: Vec<Vec<String>> = data.iter().map(|(q, _)| tokenize(q)).collect();
            let m = IntentModel::new(Vocabulary::build(&corpus, 100).unwrap(), LexiconSet::new(), &cfg);
            let mut grads = m.params.zeros_like();
            for (q, v) in &data {
                m.loss_and_gradient(&m.params, q, *v, &mut grads).unwrap();
            }
            let mut params = m.params.clone();
            let report = gradient_check(&mut params, &grads, 150, 1, |p| {
                data.iter().map(|(q, v)| m.loss_with(p, q, *v).unwrap()).sum()
            });
            assert!(report.max_relative_error <= 1e-4, "{encoder}: {report:?}");
        }
    }
}
