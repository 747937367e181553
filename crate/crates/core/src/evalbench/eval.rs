//! Per-task offline evaluation into [`EvalReport`]s. Each function takes the
//! model as a closure, so any predictor (trained model or stub) can be
//! scored.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde::Serialize;

use crate::autocomplete::Impression;
use crate::data::{AnnotatedQuery, RankingGroup, Vertical};
use crate::error::{Error, Result};
use crate::evalbench::bench::short_hash;
use crate::evalbench::metrics::{mrr_at_10, ndcg_at_10, reciprocal_rank};
use crate::ranker::{sort_ranked, RankedDoc};
use crate::suggest::{subsequence_rate, Suggestion};
use crate::tagger::{entity_f1, Segmentation};
use crate::text::{tokenize, Vocabulary};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Task {
    Intent,
    Tagger,
    Autocomplete,
    Suggest,
    Ranker,
}

impl Task {
    pub const ALL: [Task; 5] = [Task::Intent, Task::Tagger, Task::Autocomplete, Task::Suggest, Task::Ranker];

    pub fn name(self) -> &'static str {
        match self {
            Task::Intent => "intent",
            Task::Tagger => "tagger",
            Task::Autocomplete => "autocomplete",
            Task::Suggest => "suggest",
            Task::Ranker => "ranker",
        }
    }
}

impl std::str::FromStr for Task {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Task::ALL
            .into_iter()
            .find(|t| t.name() == s)
            .ok_or_else(|| Error::invalid(format!("unknown task {s}")))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EvalReport {
    pub task: Task,
    pub metrics: BTreeMap<String, f64>,
    pub split_sizes: BTreeMap<String, usize>,
    pub config_hash: String,
}

impl EvalReport {
    pub fn new(task: Task, test_size: usize) -> Self {
        EvalReport {
            task,
            metrics: BTreeMap::new(),
            split_sizes: BTreeMap::from([("test".to_string(), test_size)]),
            config_hash: String::new(),
        }
    }

    pub fn metric(&self, name: &str) -> Option<f64> {
        self.metrics.get(name).copied()
    }

    pub fn with_config_hash(mut self, hash: &str) -> Self {
        self.config_hash = hash.to_string();
        self
    }

    pub fn to_tsv(&self) -> String {
        let mut out = String::from("task\tmetric\tvalue\n");
        for (k, v) in &self.metrics {
            out.push_str(&format!("{}\t{k}\t{v:.6}\n", self.task.name()));
        }
        out
    }

    /// Writes `eval-<task>-<hash>.json` and `.tsv` into `dir`.
    pub fn write(&self, dir: &Path) -> Result<(PathBuf, PathBuf)> {
        std::fs::create_dir_all(dir)?;
        let stem = format!("eval-{}-{}", self.task.name(), short_hash(&self.config_hash));
        let json = dir.join(format!("{stem}.json"));
        let tsv = dir.join(format!("{stem}.tsv"));
        std::fs::write(&json, serde_json::to_string_pretty(self)?)?;
        std::fs::write(&tsv, self.to_tsv())?;
        Ok((json, tsv))
    }
}

fn non_empty<T>(split: &[T]) -> Result<()> {
    if split.is_empty() {
        return Err(Error::invalid("empty test split"));
    }
    Ok(())
}

/// Rejects a split whose tokens are all unknown to the model's vocabulary,
/// the sign of a model trained on a different corpus.
pub fn check_vocabulary<S: AsRef<str>>(vocab: &Vocabulary, texts: &[S]) -> Result<()> {
    let mut seen = 0usize;
    for t in texts {
        for tok in tokenize(t.as_ref()) {
            seen += 1;
            if vocab.get(&tok).is_some() {
                return Ok(());
            }
        }
    }
    if seen == 0 {
        return Ok(());
    }
    Err(Error::invalid("test split shares no vocabulary with the model"))
}

pub fn eval_intent<F>(data: &[(String, Vertical)], mut predict: F) -> Result<EvalReport>
where
    F: FnMut(&str) -> Result<Vertical>,
{
    non_empty(data)?;
    let mut hits = 0usize;
    for (q, v) in data {
        if predict(q)? == *v {
            hits += 1;
        }
    }
    let mut r = EvalReport::new(Task::Intent, data.len());
    r.metrics.insert("accuracy".into(), hits as f64 / data.len() as f64);
    Ok(r)
}

pub fn eval_tagger<F>(data: &[AnnotatedQuery], mut tag: F) -> Result<EvalReport>
where
    F: FnMut(&str) -> Result<Segmentation>,
{
    non_empty(data)?;
    let gold = data.iter().map(Segmentation::from_annotated).collect::<Result<Vec<_>>>()?;
    let pred = data.iter().map(|q| tag(&q.raw)).collect::<Result<Vec<_>>>()?;
    let mut r = EvalReport::new(Task::Tagger, data.len());
    r.metrics.insert("entity_f1".into(), entity_f1(&gold, &pred)?);
    Ok(r)
}

/// `complete` returns ranked completion texts for a prefix.
pub fn eval_autocomplete<F>(imps: &[Impression], mut complete: F) -> Result<EvalReport>
where
    F: FnMut(&str) -> Result<Vec<String>>,
{
    non_empty(imps)?;
    let mut rr = Vec::with_capacity(imps.len());
    let mut found = 0usize;
    for imp in imps {
        let ranked = complete(&imp.prefix)?;
        if ranked.iter().any(|c| *c == imp.submitted) {
            found += 1;
        }
        rr.push(reciprocal_rank(&ranked, &imp.submitted));
    }
    let mut r = EvalReport::new(Task::Autocomplete, imps.len());
    r.metrics.insert("mrr_at_10".into(), mrr_at_10(&rr));
    r.metrics.insert("recall".into(), found as f64 / imps.len() as f64);
    Ok(r)
}

/// Coverage is the fraction of sources with at least one suggestion;
/// `expected` targets, when present, give hit rate at the suggestion cutoff.
pub fn eval_suggest<F>(data: &[(String, Option<String>)], mut suggest: F) -> Result<EvalReport>
where
    F: FnMut(&str) -> Result<Vec<Suggestion>>,
{
    non_empty(data)?;
    let mut outputs = Vec::with_capacity(data.len());
    let (mut covered, mut hits, mut with_target) = (0usize, 0usize, 0usize);
    for (src, tgt) in data {
        let s = suggest(src)?;
        if !s.is_empty() {
            covered += 1;
        }
        if let Some(t) = tgt {
            with_target += 1;
            if s.iter().any(|x| x.text == *t) {
                hits += 1;
            }
        }
        outputs.push((src.clone(), s));
    }
    let mut r = EvalReport::new(Task::Suggest, data.len());
    r.metrics.insert("coverage".into(), covered as f64 / data.len() as f64);
    r.metrics.insert("subsequence_rate".into(), subsequence_rate(&outputs));
    if with_target > 0 {
        r.metrics.insert("target_hit_rate".into(), hits as f64 / with_target as f64);
    }
    Ok(r)
}

/// Mean NDCG@10 over groups with a positive; `score(query, doc)`.
pub fn eval_ranker<F>(groups: &[RankingGroup], mut score: F) -> Result<EvalReport>
where
    F: FnMut(&str, u64) -> Result<f64>,
{
    let usable: Vec<&RankingGroup> = groups.iter().filter(|g| g.docs.len() >= 2 && g.has_positive()).collect();
    non_empty(&usable)?;
    let mut total = 0.0;
    for g in &usable {
        let mut items = g
            .docs
            .iter()
            .map(|&(d, _)| Ok(RankedDoc { doc: d, score: score(&g.query, d)? }))
            .collect::<Result<Vec<_>>>()?;
        sort_ranked(&mut items);
        let grades: Vec<u8> = items.iter().map(|r| g.grade(r.doc)).collect();
        total += ndcg_at_10(&grades);
    }
    let mut r = EvalReport::new(Task::Ranker, usable.len());
    r.metrics.insert("ndcg_at_10".into(), total / usable.len() as f64);
    Ok(r)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::EntitySpan;
    use crate::text::EntityType;

    #[test]
    fn perfect_stubs_score_one() {
        let intent = vec![("ann lee".to_string(), Vertical::People), ("nurse jobs".to_string(), Vertical::Job)];
        let lookup = intent.clone();
        let r = eval_intent(&intent, |q| Ok(lookup.iter().find(|x| x.0 == q).unwrap().1)).unwrap();
        assert_eq!(r.metric("accuracy"), Some(1.0));

        let tagged = vec![AnnotatedQuery {
            raw: "ann lee boston".into(),
            spans: vec![EntitySpan {
                start: 2,
                end: 3,
                entity: EntityType::Geo,
            }],
        }];
        let gold = tagged.clone();
        let r = eval_tagger(&tagged, |q| Segmentation::from_annotated(gold.iter().find(|x| x.raw == q).unwrap())).unwrap();
        assert_eq!(r.metric("entity_f1"), Some(1.0));

        let imps = vec![Impression {
            prefix: "da".into(),
            submitted: "data scientist".into(),
        }];
        let r = eval_autocomplete(&imps, |_| Ok(vec!["data scientist".into()])).unwrap();
        assert_eq!(r.metric("mrr_at_10"), Some(1.0));

        let pairs = vec![("data".to_string(), Some("data scientist".to_string()))];
        let r = eval_suggest(&pairs, |_| {
            Ok(vec![Suggestion {
                text: "data scientist".into(),
                score: 0.0,
            }])
        })
        .unwrap();
        assert_eq!(r.metric("coverage"), Some(1.0));
        assert_eq!(r.metric("target_hit_rate"), Some(1.0));

        let groups = vec![RankingGroup {
            query: "q".into(),
            docs: vec![(1, 0), (2, 2), (3, 1)],
        }];
        let g = groups[0].clone();
        let r = eval_ranker(&groups, |_, d| Ok(f64::from(g.grade(d)))).unwrap();
        assert_eq!(r.metric("ndcg_at_10"), Some(1.0));
    }

    #[test]
    fn empty_split_is_rejected() {
        assert!(eval_intent(&[], |_| Ok(Vertical::People)).is_err());
        assert!(eval_tagger(&[], |_| unreachable!()).is_err());
        assert!(eval_autocomplete(&[], |_| Ok(vec![])).is_err());
        assert!(eval_suggest(&[], |_| Ok(vec![])).is_err());
        assert!(eval_ranker(&[], |_, _| Ok(0.0)).is_err());
    }

    #[test]
    fn mrr_over_ranks_one_four_and_miss() {
        let imps: Vec<Impression> = ["a", "b", "c"]
            .iter()
            .map(|s| Impression {
                prefix: s.to_string(),
                submitted: "hit".into(),
            })
            .collect();
        let r = eval_autocomplete(&imps, |p| {
            Ok(match p {
                "a" => vec!["hit".into()],
                "b" => vec!["x".into(), "y".into(), "z".into(), "hit".into()],
                _ => vec!["x".into()],
            })
        })
        .unwrap();
        let want = (1.0 + 0.25 + 0.0) / 3.0;
        assert!((r.metric("mrr_at_10").unwrap() - want).abs() < 1e-12);
    }

    #[test]
    fn vocabulary_mismatch_is_rejected() {
        let v = Vocabulary::build([vec!["data".to_string()]], 10).unwrap();
        assert!(check_vocabulary(&v, &["data jobs"]).is_ok());
        assert!(check_vocabulary(&v, &["zebra quartz"]).is_err());
    }
}
