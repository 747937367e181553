//! Label sets and conversions between BIO tags and segmentations.

use crate::data::{AnnotatedQuery, EntitySpan};
use crate::error::{Error, Result};
use crate::text::EntityType;

/// BIO label count: `O` plus `B-`/`I-` per entity type.
pub const BIO_LABELS: usize = 2 * EntityType::ALL.len() + 1;
/// Segment label count: `O` plus one per entity type.
pub const SEGMENT_LABELS: usize = EntityType::ALL.len() + 1;
/// Longest segment the semi-Markov model considers.
pub const DEFAULT_MAX_SEGMENT: usize = 4;

/// BIO label ids: 0 is `O`, `1 + 2k` is `B-k`, `2 + 2k` is `I-k`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum BioLabel {
    O,
    B(EntityType),
    I(EntityType),
}

impl BioLabel {
    pub fn id(self) -> usize {
        match self {
            BioLabel::O => 0,
            BioLabel::B(t) => 1 + 2 * t.index(),
            BioLabel::I(t) => 2 + 2 * t.index(),
        }
    }

    pub fn from_id(id: usize) -> Option<Self> {
        match id {
            0 => Some(BioLabel::O),
            _ if id < BIO_LABELS => {
                let t = EntityType::from_index((id - 1) / 2)?;
                Some(if id % 2 == 1 { BioLabel::B(t) } else { BioLabel::I(t) })
            }
            _ => None,
        }
    }

    pub fn name(self) -> String {
        match self {
            BioLabel::O => "O".to_string(),
            BioLabel::B(t) => format!("B-{}", t.name()),
            BioLabel::I(t) => format!("I-{}", t.name()),
        }
    }

    /// Whether `next` may follow `self` in a well-formed BIO sequence.
    pub fn allows(self, next: BioLabel) -> bool {
        match next {
            BioLabel::I(t) => matches!(self, BioLabel::B(u) | BioLabel::I(u) if u == t),
            _ => true,
        }
    }
}

/// Segment label ids: 0 is `O`, `1 + k` is entity type `k`.
pub fn segment_label(entity: Option<EntityType>) -> usize {
    entity.map_or(0, |t| 1 + t.index())
}

pub fn segment_entity(label: usize) -> Option<EntityType> {
    label.checked_sub(1).and_then(EntityType::from_index)
}

/// Contiguous cover of `[0, len)`; entity `None` marks an `O` token.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Segmentation {
    pub segments: Vec<(usize, usize, Option<EntityType>)>,
}

impl Segmentation {
    /// Entity spans plus single-token `O` segments for every other token.
    pub fn from_spans(len: usize, spans: &[EntitySpan]) -> Result<Self> {
        let mut sorted = spans.to_vec();
        sorted.sort_by_key(|s| s.start);
        let mut segments = Vec::new();
        let mut pos = 0;
        for s in sorted {
            if s.start < pos || s.end <= s.start || s.end > len {
                return Err(Error::invalid(format!(
                    "span [{}, {}) overlaps or leaves [0, {len})",
                    s.start, s.end
                )));
            }
            segments.extend((pos..s.start).map(|i| (i, i + 1, None)));
            segments.push((s.start, s.end, Some(s.entity)));
            pos = s.end;
        }
        segments.extend((pos..len).map(|i| (i, i + 1, None)));
        Ok(Segmentation { segments })
    }

    pub fn from_annotated(q: &AnnotatedQuery) -> Result<Self> {
        Self::from_spans(crate::text::tokenize(&q.raw).len(), &q.spans)
    }

    pub fn len(&self) -> usize {
        self.segments.last().map_or(0, |s| s.1)
    }

    pub fn is_empty(&self) -> bool {
        self.segments.is_empty()
    }

    pub fn entities(&self) -> Vec<EntitySpan> {
        self.segments
            .iter()
            .filter_map(|&(start, end, e)| e.map(|entity| EntitySpan { start, end, entity }))
            .collect()
    }

    pub fn to_bio(&self) -> Vec<BioLabel> {
        let mut out = Vec::with_capacity(self.len());
        for &(s, e, ent) in &self.segments {
            for i in s..e {
                out.push(match ent {
                    None => BioLabel::O,
                    Some(t) if i == s => BioLabel::B(t),
                    Some(t) => BioLabel::I(t),
                });
            }
        }
        out
    }

    /// Reads entities off a BIO sequence; an `I-x` that does not continue an
    /// `x` span starts a new one.
    pub fn from_bio(labels: &[BioLabel]) -> Self {
        let mut spans: Vec<EntitySpan> = Vec::new();
        for (i, l) in labels.iter().enumerate() {
            match *l {
                BioLabel::O => {}
                BioLabel::B(t) => spans.push(EntitySpan { start: i, end: i + 1, entity: t }),
                BioLabel::I(t) => match spans.last_mut() {
                    Some(s) if s.end == i && s.entity == t => s.end += 1,
                    _ => spans.push(EntitySpan { start: i, end: i + 1, entity: t }),
                },
            }
        }
        Self::from_spans(labels.len(), &spans).expect("spans built in order")
    }

    /// Converts to labeled segments with segment label ids.
    pub fn to_labeled(&self) -> Vec<(usize, usize, usize)> {
        self.segments
            .iter()
            .map(|&(s, e, t)| (s, e, segment_label(t)))
            .collect()
    }

    pub fn from_labeled(segments: &[(usize, usize, usize)]) -> Self {
        Segmentation {
            segments: segments
                .iter()
                .map(|&(s, e, y)| (s, e, segment_entity(y)))
                .collect(),
        }
    }

    pub fn max_segment(&self) -> usize {
        self.segments.iter().map(|s| s.1 - s.0).max().unwrap_or(0)
    }
}
