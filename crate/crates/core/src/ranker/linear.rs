//! Linear first-pass ranker over the keyword features.

use std::path::Path;

use rand::seq::SliceRandom;

use crate::data::DocumentRecord;
use crate::error::{Error, Result};
use crate::nn::{axpy, dot, pairwise_logistic, seeded_rng, Adam, AdamConfig, Checkpoint, ParamId, ParamSet, Tensor};
use crate::ranker::features::FeatureExtractor;
use crate::ranker::mean_ndcg;
use crate::ranker::model::RankerConfig;
use crate::ranker::train::{preference_pairs, PreparedGroup};

pub const CHECKPOINT_KIND: &str = "ranker-linear";

#[derive(Debug, Clone)]
pub struct LinearRanker {
    features: FeatureExtractor,
    params: ParamSet,
    w: ParamId,
}

impl LinearRanker {
    /// All-zero weights. Scores carry no bias term.
    pub fn new(features: FeatureExtractor) -> Self {
        let mut params = ParamSet::new();
        let w = params.add("linear.w", Tensor::zeros(1, features.dim()));
        LinearRanker { features, params, w }
    }

    pub fn features(&self) -> &FeatureExtractor {
        &self.features
    }

    pub fn params(&self) -> &ParamSet {
        &self.params
    }

    pub fn weights(&self) -> &[f64] {
        self.params[self.w].data()
    }

    fn score_with(&self, params: &ParamSet, feats: &[f64]) -> f64 {
        dot(params[self.w].data(), feats)
    }

    pub fn score_features(&self, feats: &[f64]) -> f64 {
        self.score_with(&self.params, feats)
    }

    pub fn score(&self, query: &str, doc: &DocumentRecord) -> f64 {
        self.score_features(&self.features.features(query, doc))
    }

    pub fn group_loss(&self, params: &ParamSet, group: &PreparedGroup<'_>, grads: Option<&mut ParamSet>) -> (f64, usize) {
        let scores: Vec<f64> = group.docs.iter().map(|(_, _, f)| self.score_with(params, f)).collect();
        let pairs = preference_pairs(&group.grades());
        let mut loss = 0.0;
        let mut d_score = vec![0.0; scores.len()];
        for &(p, n) in &pairs {
            let (l, d) = pairwise_logistic(scores[p], scores[n]);
            loss += l;
            d_score[p] += d;
            d_score[n] -= d;
        }
        if let Some(grads) = grads {
            for ((_, _, f), ds) in group.docs.iter().zip(d_score) {
                axpy(ds, f, grads[self.w].data_mut());
            }
        }
        (loss, pairs.len())
    }

    /// Pairwise logistic training; uses `epochs`, `batch_size`,
    /// `learning_rate` and `seed` from the config. Keeps the epoch with the
    /// best NDCG@10 on `valid` when it is non-empty.
    pub fn train(groups: &[PreparedGroup<'_>], valid: &[PreparedGroup<'_>], features: FeatureExtractor, cfg: &RankerConfig) -> Result<Self> {
        if groups.is_empty() {
            return Err(Error::invalid("no ranking groups with a preference pair"));
        }
        let mut model = LinearRanker::new(features);
        let mut adam = Adam::new(
            &model.params,
            AdamConfig {
                learning_rate: (cfg.learning_rate * 10.0).min(0.05),
                ..AdamConfig::default()
            },
        );
        let mut order: Vec<usize> = (0..groups.len()).collect();
        let mut rng = seeded_rng(cfg.seed ^ 0x11e);
        let mut grads = model.params.zeros_like();
        let mut best: Option<(f64, ParamSet)> = None;
        for _ in 0..cfg.epochs * 2 {
            order.shuffle(&mut rng);
            for batch in order.chunks(cfg.batch_size.max(1)) {
                grads.zero();
                let mut n = 0;
                for &i in batch {
                    n += model.group_loss(&model.params, &groups[i], Some(&mut grads)).1;
                }
                grads.scale(1.0 / n.max(1) as f64);
                adam.step(&mut model.params, &grads)?;
            }
            if !valid.is_empty() {
                let ndcg = mean_ndcg(valid, |g, i| Ok(model.score_features(&g.docs[i].2)))?;
                if best.as_ref().is_none_or(|(b, _)| ndcg > *b) {
                    best = Some((ndcg, model.params.clone()));
                }
            }
        }
        if let Some((_, params)) = best {
            model.params = params;
        }
        Ok(model)
    }

    pub fn to_checkpoint(&self) -> Checkpoint {
        self.features.to_checkpoint(Checkpoint::new(CHECKPOINT_KIND, self.params.clone()))
    }

    pub fn from_checkpoint(ckpt: Checkpoint) -> Result<Self> {
        ckpt.expect_kind(CHECKPOINT_KIND)?;
        let features = FeatureExtractor::from_checkpoint(&ckpt)?;
        let params = ckpt.params;
        let w = params.id_with_shape("linear.w", 1, features.dim())?;
        Ok(LinearRanker { features, params, w })
    }

    pub fn save(&self, path: &Path) -> Result<String> {
        self.to_checkpoint().save(path)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_checkpoint(Checkpoint::load(path)?)
    }
}
