use std::collections::HashMap;
use std::fmt;
use std::path::Path;
use std::str::FromStr;

use log::warn;
use rand::seq::SliceRandom;

use crate::data::AnnotatedQuery;
use crate::error::{Error, Result};
use crate::nn::{seeded_rng, Adam, AdamConfig, BiLstm, Checkpoint, Dense, Embedding, ParamId, ParamSet, Tensor};
use crate::tagger::features::{segment_features, token_features, Families, LexiconCoverage};
use crate::tagger::inference::{ChainPotentials, SemiPotentials};
use crate::tagger::schema::{BioLabel, Segmentation, BIO_LABELS, DEFAULT_MAX_SEGMENT, SEGMENT_LABELS};
use crate::text::{tokenize_cased, CasedToken, LexiconSet, Vocabulary};

pub const CHECKPOINT_KIND: &str = "tagger";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum TaggerMode {
    /// Linear-chain CRF over BIO labels.
    Crf,
    /// Semi-Markov CRF with char, word, and lexicon features.
    Scrf,
    /// SCRF whose word features are replaced by BiLSTM emissions.
    LstmScrf,
    /// SCRF with every handcrafted family plus BiLSTM emissions.
    LstmScrfAll,
    /// SCRF without lexicon features.
    ScrfNolex,
}

impl TaggerMode {
    pub const ALL: [TaggerMode; 5] = [
        TaggerMode::Crf,
        TaggerMode::Scrf,
        TaggerMode::LstmScrf,
        TaggerMode::LstmScrfAll,
        TaggerMode::ScrfNolex,
    ];

    pub fn name(self) -> &'static str {
        match self {
            TaggerMode::Crf => "crf",
            TaggerMode::Scrf => "scrf",
            TaggerMode::LstmScrf => "lstm-scrf",
            TaggerMode::LstmScrfAll => "lstm-scrf-all",
            TaggerMode::ScrfNolex => "scrf-nolex",
        }
    }

    pub fn families(self) -> Families {
        Families {
            char: true,
            word: !matches!(self, TaggerMode::LstmScrf),
            lexicon: !matches!(self, TaggerMode::ScrfNolex),
        }
    }

    pub fn uses_lstm(self) -> bool {
        matches!(self, TaggerMode::LstmScrf | TaggerMode::LstmScrfAll)
    }

    pub fn is_semi(self) -> bool {
        self != TaggerMode::Crf
    }

    pub fn labels(self) -> usize {
        if self.is_semi() {
            SEGMENT_LABELS
        } else {
            BIO_LABELS
        }
    }
}

impl fmt::Display for TaggerMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for TaggerMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Self::ALL
            .iter()
            .copied()
            .find(|m| m.name() == s)
            .ok_or_else(|| Error::invalid(format!("unknown tagger mode {s}")))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TaggerConfig {
    pub mode: TaggerMode,
    pub max_segment: usize,
    pub epochs: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
    /// L2 penalty on the feature weights, per batch.
    pub l2: f64,
    pub embedding_dim: usize,
    pub hidden: usize,
    /// Forbid ill-formed BIO transitions in the chain model.
    pub constrain_bio: bool,
    pub seed: u64,
}

impl Default for TaggerConfig {
    fn default() -> Self {
        TaggerConfig {
            mode: TaggerMode::Scrf,
            max_segment: DEFAULT_MAX_SEGMENT,
            epochs: 8,
            batch_size: 16,
            learning_rate: 0.02,
            l2: 1e-4,
            embedding_dim: 50,
            hidden: 50,
            constrain_bio: true,
            seed: 1,
        }
    }
}

/// Feature ids of one query. For the chain model only `token` is used;
/// for the semi-Markov model `token` holds features of a token opening a
/// segment, `inner` of a token continuing one, and `segment[s * L + l - 1]`
/// the segment-level features of `[s, s + l)`.
#[derive(Debug, Clone)]
struct Encoded {
    len: usize,
    token: Vec<Vec<usize>>,
    inner: Vec<Vec<usize>>,
    segment: Vec<Vec<usize>>,
    word_ids: Vec<usize>,
}

#[derive(Debug, Clone, Copy)]
struct LstmHead {
    emb: Embedding,
    bilstm: BiLstm,
    out: Dense,
}

#[derive(Debug, Clone, Copy)]
struct Ids {
    weights: ParamId,
    trans: ParamId,
    start: ParamId,
    end: ParamId,
}

#[derive(Debug, Clone)]
pub struct Tagger {
    mode: TaggerMode,
    max_segment: usize,
    constrain_bio: bool,
    features: Vec<String>,
    index: HashMap<String, usize>,
    lexicons: LexiconSet,
    vocab: Option<Vocabulary>,
    params: ParamSet,
    ids: Ids,
    lstm: Option<LstmHead>,
}

/// Feature strings of a query: per-token lists and, for the semi-Markov
/// model, per-candidate-segment lists.
fn feature_strings(
    mode: TaggerMode,
    max_segment: usize,
    lex: &LexiconSet,
    tokens: &[CasedToken],
) -> (Vec<Vec<String>>, Vec<Vec<String>>) {
    let lower: Vec<String> = tokens.iter().map(|t| t.lower.clone()).collect();
    let cov = LexiconCoverage::new(&lower, lex);
    let fam = mode.families();
    let tok: Vec<Vec<String>> = (0..tokens.len())
        .map(|i| token_features(tokens, &cov, i, fam))
        .collect();
    let mut seg = Vec::new();
    if mode.is_semi() {
        for s in 0..tokens.len() {
            for l in 1..=max_segment {
                seg.push(if s + l <= tokens.len() {
                    segment_features(tokens, &lower, lex, s, s + l, fam)
                } else {
                    Vec::new()
                });
            }
        }
    }
    (tok, seg)
}

impl Tagger {
    pub fn mode(&self) -> TaggerMode {
        self.mode
    }

    pub fn max_segment(&self) -> usize {
        self.max_segment
    }

    pub fn params(&self) -> &ParamSet {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut ParamSet {
        &mut self.params
    }

    pub fn feature_count(&self) -> usize {
        self.features.len()
    }

    fn labels(&self) -> usize {
        self.mode.labels()
    }

    /// An untrained model whose feature space covers `data`; all linear
    /// weights start at zero.
    pub fn init(data: &[AnnotatedQuery], lexicons: &LexiconSet, cfg: &TaggerConfig) -> Result<Self> {
        if cfg.max_segment == 0 {
            return Err(Error::invalid("max_segment must be at least 1"));
        }
        let mut features: Vec<String> = Vec::new();
        let mut index: HashMap<String, usize> = HashMap::new();
        let mut intern = |f: String| {
            if !index.contains_key(&f) {
                index.insert(f.clone(), features.len());
                features.push(f);
            }
        };
        let mut corpus: Vec<Vec<String>> = Vec::new();
        for q in data {
            let toks = tokenize_cased(&q.raw);
            let (tok, seg) = feature_strings(cfg.mode, cfg.max_segment, lexicons, &toks);
            for fs in tok {
                for f in fs {
                    if cfg.mode.is_semi() {
                        intern(format!("B:{f}"));
                        intern(format!("I:{f}"));
                    } else {
                        intern(f);
                    }
                }
            }
            seg.into_iter().flatten().for_each(&mut intern);
            corpus.push(toks.into_iter().map(|t| t.lower).collect());
        }
        let y = cfg.mode.labels();
        let mut params = ParamSet::new();
        let ids = Ids {
            weights: params.add("tagger.weights", Tensor::zeros(features.len().max(1), y)),
            trans: params.add("tagger.trans", Tensor::zeros(y, y)),
            start: params.add("tagger.start", Tensor::zeros(1, y)),
            end: params.add("tagger.end", Tensor::zeros(1, y)),
        };
        let (vocab, lstm) = if cfg.mode.uses_lstm() {
            let vocab = Vocabulary::build(&corpus, crate::text::vocab::DEFAULT_MAX_SIZE)?;
            let mut rng = seeded_rng(cfg.seed);
            let emb = Embedding::new(&mut params, "tagger.emb", vocab.len(), cfg.embedding_dim, &mut rng);
            let bilstm = BiLstm::new(&mut params, "tagger.bilstm", cfg.embedding_dim, cfg.hidden, &mut rng);
            let out = Dense::new(&mut params, "tagger.out", 2 * cfg.hidden, y, &mut rng);
            (Some(vocab), Some(LstmHead { emb, bilstm, out }))
        } else {
            (None, None)
        };
        Ok(Tagger {
            mode: cfg.mode,
            max_segment: cfg.max_segment,
            constrain_bio: cfg.constrain_bio,
            features,
            index,
            lexicons: lexicons.clone(),
            vocab,
            params,
            ids,
            lstm,
        })
    }

    fn encode(&self, raw: &str) -> Encoded {
        let toks = tokenize_cased(raw);
        let (tok, seg) = feature_strings(self.mode, self.max_segment, &self.lexicons, &toks);
        let lookup = |prefix: &str, fs: &[String]| -> Vec<usize> {
            fs.iter()
                .filter_map(|f| self.index.get(&format!("{prefix}{f}")).copied())
                .collect()
        };
        let (token, inner) = if self.mode.is_semi() {
            (
                tok.iter().map(|fs| lookup("B:", fs)).collect(),
                tok.iter().map(|fs| lookup("I:", fs)).collect(),
            )
        } else {
            (tok.iter().map(|fs| lookup("", fs)).collect(), Vec::new())
        };
        let word_ids = match &self.vocab {
            Some(v) => toks.iter().map(|t| v.id(&t.lower)).collect(),
            None => Vec::new(),
        };
        Encoded {
            len: toks.len(),
            token,
            inner,
            segment: seg.iter().map(|fs| lookup("", fs)).collect(),
            word_ids,
        }
    }

    fn feature_sum(&self, params: &ParamSet, ids: &[usize]) -> Vec<f64> {
        let w = &params[self.ids.weights];
        let mut out = vec![0.0; self.labels()];
        for &f in ids {
            for (o, v) in out.iter_mut().zip(w.row(f)) {
                *o += v;
            }
        }
        out
    }

    fn chain_potentials(&self, params: &ParamSet, enc: &Encoded) -> ChainPotentials {
        let y = self.labels();
        let t = &params[self.ids.trans];
        let mut c = ChainPotentials {
            emit: enc.token.iter().map(|ids| self.feature_sum(params, ids)).collect(),
            trans: (0..y).map(|p| t.row(p).to_vec()).collect(),
            start: params[self.ids.start].data().to_vec(),
            end: params[self.ids.end].data().to_vec(),
        };
        if self.constrain_bio {
            for p in 0..y {
                for q in 0..y {
                    let (a, b) = (BioLabel::from_id(p).unwrap(), BioLabel::from_id(q).unwrap());
                    if !a.allows(b) {
                        c.trans[p][q] = f64::NEG_INFINITY;
                    }
                }
                if matches!(BioLabel::from_id(p), Some(BioLabel::I(_))) {
                    c.start[p] = f64::NEG_INFINITY;
                }
            }
        }
        c
    }

    /// Per-token BiLSTM label scores with the cache needed for backprop.
    fn lstm_scores(
        &self,
        params: &ParamSet,
        enc: &Encoded,
    ) -> Result<Option<(Vec<Vec<f64>>, Tensor, Tensor, crate::nn::lstm::BiLstmCache)>> {
        let Some(head) = self.lstm else {
            return Ok(None);
        };
        let x = head.emb.forward(params, &enc.word_ids)?;
        let (h, cache) = head.bilstm.forward(params, &x)?;
        let u = (0..enc.len).map(|i| head.out.forward(params, h.row(i))).collect();
        Ok(Some((u, x, h, cache)))
    }

    fn semi_potentials(&self, params: &ParamSet, enc: &Encoded, lstm: Option<&[Vec<f64>]>) -> SemiPotentials {
        let (n, y, l_max) = (enc.len, self.labels(), self.max_segment);
        let mut open: Vec<Vec<f64>> = enc.token.iter().map(|ids| self.feature_sum(params, ids)).collect();
        let mut cont: Vec<Vec<f64>> = enc.inner.iter().map(|ids| self.feature_sum(params, ids)).collect();
        if let Some(u) = lstm {
            for i in 0..n {
                for k in 0..y {
                    open[i][k] += u[i][k];
                    cont[i][k] += u[i][k];
                }
            }
        }
        let mut p = SemiPotentials::new(n, y, l_max);
        for s in 0..n {
            for l in 1..=l_max.min(n - s) {
                let seg = self.feature_sum(params, &enc.segment[s * l_max + l - 1]);
                for k in 0..y {
                    let idx = p.index(s, l, k);
                    p.seg[idx] = if k == 0 && l > 1 {
                        f64::NEG_INFINITY
                    } else {
                        open[s][k] + (s + 1..s + l).map(|i| cont[i][k]).sum::<f64>() + seg[k]
                    };
                }
            }
        }
        let t = &params[self.ids.trans];
        p.trans = (0..y).map(|r| t.row(r).to_vec()).collect();
        p.start = params[self.ids.start].data().to_vec();
        p.end = params[self.ids.end].data().to_vec();
        p
    }

    /// Log-partition of a query under `params`.
    pub fn log_partition_with(&self, params: &ParamSet, raw: &str) -> Result<f64> {
        let enc = self.encode(raw);
        if enc.len == 0 {
            return Err(Error::invalid("cannot score an empty query"));
        }
        if self.mode.is_semi() {
            let u = self.lstm_scores(params, &enc)?.map(|t| t.0);
            self.semi_potentials(params, &enc, u.as_deref()).log_partition()
        } else {
            self.chain_potentials(params, &enc).log_partition()
        }
    }

    pub fn log_partition(&self, raw: &str) -> Result<f64> {
        self.log_partition_with(&self.params, raw)
    }

    /// Most probable segmentation; an empty query yields an empty one.
    pub fn tag(&self, raw: &str) -> Result<Segmentation> {
        let enc = self.encode(raw);
        if enc.len == 0 {
            return Ok(Segmentation { segments: Vec::new() });
        }
        if self.mode.is_semi() {
            let u = self.lstm_scores(&self.params, &enc)?.map(|t| t.0);
            let best = self.semi_potentials(&self.params, &enc, u.as_deref()).decode()?;
            Ok(Segmentation::from_labeled(&best))
        } else {
            let best = self.chain_potentials(&self.params, &enc).decode()?;
            let labels: Vec<BioLabel> = best.iter().map(|&i| BioLabel::from_id(i).unwrap()).collect();
            Ok(Segmentation::from_bio(&labels))
        }
    }

    /// Negative conditional log-likelihood of one annotated query.
    pub fn loss_with(&self, params: &ParamSet, q: &AnnotatedQuery) -> Result<f64> {
        let mut scratch = params.zeros_like();
        self.loss_and_gradient(params, q, &mut scratch)
    }

    fn check_gold(&self, gold: &Segmentation, len: usize) -> Result<()> {
        if gold.len() != len {
            return Err(Error::invalid("annotation does not cover the query"));
        }
        if self.mode.is_semi() && gold.max_segment() > self.max_segment {
            return Err(Error::invalid(format!(
                "entity of {} tokens exceeds maximum segment length {}",
                gold.max_segment(),
                self.max_segment
            )));
        }
        Ok(())
    }

    /// Negative log-likelihood, accumulating its gradient into `grads`.
    pub fn loss_and_gradient(&self, params: &ParamSet, q: &AnnotatedQuery, grads: &mut ParamSet) -> Result<f64> {
        let enc = self.encode(&q.raw);
        if enc.len == 0 {
            return Err(Error::invalid("cannot train on an empty query"));
        }
        let gold = Segmentation::from_annotated(q)?;
        self.check_gold(&gold, enc.len)?;
        if self.mode.is_semi() {
            self.semi_loss(params, &enc, &gold, grads)
        } else {
            self.chain_loss(params, &enc, &gold, grads)
        }
    }

    fn add_feature_grad(&self, grads: &mut ParamSet, ids: &[usize], coef: &[f64]) {
        let g = &mut grads[self.ids.weights];
        for &f in ids {
            for (o, c) in g.row_mut(f).iter_mut().zip(coef) {
                *o += c;
            }
        }
    }

    fn chain_loss(&self, params: &ParamSet, enc: &Encoded, gold: &Segmentation, grads: &mut ParamSet) -> Result<f64> {
        let c = self.chain_potentials(params, enc);
        let labels: Vec<usize> = gold.to_bio().iter().map(|l| l.id()).collect();
        let m = c.marginals()?;
        let loss = m.log_partition - c.score(&labels);
        let y = self.labels();
        for t in 0..enc.len {
            let mut coef = m.unary[t].clone();
            coef[labels[t]] -= 1.0;
            self.add_feature_grad(grads, &enc.token[t], &coef);
        }
        let gt = &mut grads[self.ids.trans];
        for p in 0..y {
            for q in 0..y {
                gt.add_at(p, q, m.trans[p][q]);
            }
        }
        for w in labels.windows(2) {
            gt.add_at(w[0], w[1], -1.0);
        }
        self.add_boundary_grads(grads, &m.start, &m.end, labels[0], labels[enc.len - 1]);
        Ok(loss)
    }

    fn add_boundary_grads(&self, grads: &mut ParamSet, start: &[f64], end: &[f64], first: usize, last: usize) {
        let gs = grads[self.ids.start].data_mut();
        for (g, p) in gs.iter_mut().zip(start) {
            *g += p;
        }
        gs[first] -= 1.0;
        let ge = grads[self.ids.end].data_mut();
        for (g, p) in ge.iter_mut().zip(end) {
            *g += p;
        }
        ge[last] -= 1.0;
    }

    fn semi_loss(&self, params: &ParamSet, enc: &Encoded, gold: &Segmentation, grads: &mut ParamSet) -> Result<f64> {
        let lstm = self.lstm_scores(params, enc)?;
        let p = self.semi_potentials(params, enc, lstm.as_ref().map(|t| t.0.as_slice()));
        let gold_segs = gold.to_labeled();
        let m = p.marginals()?;
        let loss = m.log_partition - p.score(&gold_segs);
        let (n, y, l_max) = (enc.len, self.labels(), self.max_segment);

        // coefficient of every segment score: model expectation minus gold
        let mut coef = m.seg.clone();
        for &(s, e, k) in &gold_segs {
            coef[p.index(s, e - s, k)] -= 1.0;
        }
        let mut d_open = vec![vec![0.0; y]; n];
        let mut d_cont = vec![vec![0.0; y]; n];
        for s in 0..n {
            for l in 1..=l_max.min(n - s) {
                let row: Vec<f64> = (0..y)
                    .map(|k| if k == 0 && l > 1 { 0.0 } else { coef[p.index(s, l, k)] })
                    .collect();
                self.add_feature_grad(grads, &enc.segment[s * l_max + l - 1], &row);
                for k in 0..y {
                    d_open[s][k] += row[k];
                    for dc in d_cont[s + 1..s + l].iter_mut() {
                        dc[k] += row[k];
                    }
                }
            }
        }
        for i in 0..n {
            self.add_feature_grad(grads, &enc.token[i], &d_open[i]);
            self.add_feature_grad(grads, &enc.inner[i], &d_cont[i]);
        }
        let gt = &mut grads[self.ids.trans];
        for a in 0..y {
            for b in 0..y {
                gt.add_at(a, b, m.trans[a][b]);
            }
        }
        for w in gold_segs.windows(2) {
            gt.add_at(w[0].2, w[1].2, -1.0);
        }
        self.add_boundary_grads(grads, &m.start, &m.end, gold_segs[0].2, gold_segs[gold_segs.len() - 1].2);

        if let (Some(head), Some((_, x, h, cache))) = (self.lstm, lstm) {
            let mut dh = Tensor::zeros(n, h.cols());
            for i in 0..n {
                let du: Vec<f64> = (0..y).map(|k| d_open[i][k] + d_cont[i][k]).collect();
                let dx = head.out.backward(params, grads, h.row(i), &du);
                dh.row_mut(i).copy_from_slice(&dx);
            }
            let dx = head.bilstm.backward(params, grads, &cache, &dh);
            debug_assert_eq!(dx.rows(), x.rows());
            head.emb.backward(grads, &enc.word_ids, &dx);
        }
        Ok(loss)
    }

    /// Trains from scratch. Queries whose annotation cannot be represented
    /// (an entity longer than the segment limit) are skipped with a warning.
    pub fn train(data: &[AnnotatedQuery], lexicons: &LexiconSet, cfg: &TaggerConfig) -> Result<Self> {
        if data.is_empty() {
            return Err(Error::invalid("empty tagger training set"));
        }
        let mut model = Tagger::init(data, lexicons, cfg)?;
        let mut usable: Vec<&AnnotatedQuery> = Vec::new();
        for q in data {
            let n = crate::text::tokenize(&q.raw).len();
            match Segmentation::from_annotated(q).and_then(|g| model.check_gold(&g, n).map(|_| n)) {
                Ok(n) if n > 0 => usable.push(q),
                Ok(_) => warn!("skipping empty training query"),
                Err(e) => warn!("skipping {:?}: {e}", q.raw),
            }
        }
        let mut adam = Adam::new(
            &model.params,
            AdamConfig {
                learning_rate: cfg.learning_rate,
                clip_norm: Some(5.0),
                ..AdamConfig::default()
            },
        );
        let mut rng = seeded_rng(cfg.seed ^ 0x7a67);
        let mut grads = model.params.zeros_like();
        for epoch in 0..cfg.epochs {
            usable.shuffle(&mut rng);
            let mut total = 0.0;
            for batch in usable.chunks(cfg.batch_size.max(1)) {
                grads.zero();
                for q in batch {
                    total += model.loss_and_gradient(&model.params, q, &mut grads)?;
                }
                grads.scale(1.0 / batch.len() as f64);
                if cfg.l2 > 0.0 {
                    let w = model.params[model.ids.weights].clone();
                    let g = &mut grads[model.ids.weights];
                    crate::nn::axpy(cfg.l2, w.data(), g.data_mut());
                }
                adam.step(&mut model.params, &grads)?;
            }
            log::info!("tagger {} epoch {epoch}: loss {:.4}", cfg.mode, total / usable.len() as f64);
        }
        Ok(model)
    }

    pub fn to_checkpoint(&self) -> Checkpoint {
        let mut ckpt = Checkpoint::new(CHECKPOINT_KIND, self.params.clone())
            .with_meta("mode", self.mode)
            .with_meta("max_segment", self.max_segment)
            .with_meta("constrain_bio", self.constrain_bio)
            .with_list("features", &self.features);
        if let Some(v) = &self.vocab {
            ckpt = ckpt.with_list("vocab", v.tokens());
        }
        self.lexicons.to_checkpoint(ckpt)
    }

    pub fn from_checkpoint(ckpt: Checkpoint) -> Result<Self> {
        ckpt.expect_kind(CHECKPOINT_KIND)?;
        let mode: TaggerMode = ckpt.meta_str("mode")?.parse()?;
        let features = ckpt.meta_list("features")?;
        let index = features.iter().enumerate().map(|(i, f)| (f.clone(), i)).collect();
        let lexicons = LexiconSet::from_checkpoint(&ckpt)?;
        let y = mode.labels();
        let params = ckpt.params.clone();
        let ids = Ids {
            weights: params.id_with_shape("tagger.weights", features.len().max(1), y)?,
            trans: params.id_with_shape("tagger.trans", y, y)?,
            start: params.id_with_shape("tagger.start", 1, y)?,
            end: params.id_with_shape("tagger.end", 1, y)?,
        };
        let (vocab, lstm) = if mode.uses_lstm() {
            let vocab = Vocabulary::from_list(ckpt.meta_list("vocab")?)?;
            let emb = Embedding::bind(&params, "tagger.emb")?;
            if emb.vocab != vocab.len() {
                return Err(Error::format("checkpoint", "tagger embedding and vocabulary sizes differ"));
            }
            let head = LstmHead {
                emb,
                bilstm: BiLstm::bind(&params, "tagger.bilstm")?,
                out: Dense::bind(&params, "tagger.out")?,
            };
            (Some(vocab), Some(head))
        } else {
            (None, None)
        };
        Ok(Tagger {
            mode,
            max_segment: ckpt.meta_parse("max_segment")?,
            constrain_bio: ckpt.meta_parse("constrain_bio")?,
            features,
            index,
            lexicons,
            vocab,
            params,
            ids,
            lstm,
        })
    }

    pub fn save(&self, path: &Path) -> Result<String> {
        self.to_checkpoint().save(path)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_checkpoint(Checkpoint::load(path)?)
    }

    /// Zeroes the BiLSTM output layer so emissions vanish.
    pub fn zero_lstm_output(&mut self) {
        if let Some(head) = self.lstm {
            self.params[head.out.weight].fill(0.0);
            self.params[head.out.bias].fill(0.0);
        }
    }

    /// Copies every linear weight shared with `other` by feature name.
    pub fn copy_linear_weights_from(&mut self, other: &Tagger) {
        for (f, &i) in &self.index {
            if let Some(&j) = other.index.get(f) {
                let row = other.params[other.ids.weights].row(j).to_vec();
                self.params[self.ids.weights].row_mut(i).copy_from_slice(&row);
            }
        }
        for (a, b) in [
            (self.ids.trans, other.ids.trans),
            (self.ids.start, other.ids.start),
            (self.ids.end, other.ids.end),
        ] {
            let t = other.params[b].clone();
            self.params[a] = t;
        }
    }
}

/// Entity-level F1 over exact `(span, type)` matches. Both sides empty
/// counts as a perfect score.
pub fn entity_f1(gold: &[Segmentation], predicted: &[Segmentation]) -> Result<f64> {
    if gold.len() != predicted.len() {
        return Err(Error::invalid(format!(
            "{} gold segmentations but {} predictions",
            gold.len(),
            predicted.len()
        )));
    }
    let (mut tp, mut n_gold, mut n_pred) = (0usize, 0usize, 0usize);
    for (g, p) in gold.iter().zip(predicted) {
        let ge = g.entities();
        let pe = p.entities();
        n_gold += ge.len();
        n_pred += pe.len();
        tp += pe.iter().filter(|e| ge.contains(e)).count();
    }
    if n_gold == 0 && n_pred == 0 {
        return Ok(1.0);
    }
    if tp == 0 {
        return Ok(0.0);
    }
    let precision = tp as f64 / n_pred as f64;
    let recall = tp as f64 / n_gold as f64;
    Ok(2.0 * precision * recall / (precision + recall))
}
