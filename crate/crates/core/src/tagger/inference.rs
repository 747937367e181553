//! Exact inference for linear-chain and semi-Markov CRFs over explicit
//! score tables, in log space. Disallowed structures carry `-inf` scores.

use crate::error::{Error, Result};

fn lse2(a: f64, b: f64) -> f64 {
    if a == f64::NEG_INFINITY {
        return b;
    }
    if b == f64::NEG_INFINITY {
        return a;
    }
    let m = a.max(b);
    m + ((a - m).exp() + (b - m).exp()).ln()
}

fn lse_iter(it: impl Iterator<Item = f64>) -> f64 {
    it.fold(f64::NEG_INFINITY, lse2)
}

/// Sequence score: `start[y0] + Σ emit[t][yt] + Σ trans[y(t-1)][yt] + end[y(T-1)]`.
#[derive(Debug, Clone, PartialEq)]
pub struct ChainPotentials {
    pub emit: Vec<Vec<f64>>,
    pub trans: Vec<Vec<f64>>,
    pub start: Vec<f64>,
    pub end: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ChainMarginals {
    pub log_partition: f64,
    /// `unary[t][y] = P(y_t = y)`.
    pub unary: Vec<Vec<f64>>,
    /// Expected transition counts.
    pub trans: Vec<Vec<f64>>,
    pub start: Vec<f64>,
    pub end: Vec<f64>,
}

impl ChainPotentials {
    pub fn labels(&self) -> usize {
        self.start.len()
    }

    pub fn len(&self) -> usize {
        self.emit.len()
    }

    pub fn is_empty(&self) -> bool {
        self.emit.is_empty()
    }

    fn check(&self) -> Result<()> {
        if self.emit.is_empty() {
            return Err(Error::invalid("cannot score an empty query"));
        }
        Ok(())
    }

    pub fn score(&self, labels: &[usize]) -> f64 {
        let mut s = self.start[labels[0]] + self.end[labels[labels.len() - 1]];
        for (t, &y) in labels.iter().enumerate() {
            s += self.emit[t][y];
            if t > 0 {
                s += self.trans[labels[t - 1]][y];
            }
        }
        s
    }

    fn forward(&self) -> Vec<Vec<f64>> {
        let n = self.labels();
        let mut alpha = vec![vec![0.0; n]; self.len()];
        for y in 0..n {
            alpha[0][y] = self.start[y] + self.emit[0][y];
        }
        for t in 1..self.len() {
            for y in 0..n {
                alpha[t][y] = self.emit[t][y]
                    + lse_iter((0..n).map(|p| alpha[t - 1][p] + self.trans[p][y]));
            }
        }
        alpha
    }

    pub fn log_partition(&self) -> Result<f64> {
        self.check()?;
        let alpha = self.forward();
        let last = &alpha[self.len() - 1];
        let z = lse_iter((0..self.labels()).map(|y| last[y] + self.end[y]));
        if z == f64::NEG_INFINITY {
            return Err(Error::invalid("no label sequence has finite score"));
        }
        Ok(z)
    }

    pub fn marginals(&self) -> Result<ChainMarginals> {
        let z = self.log_partition()?;
        let (len, n) = (self.len(), self.labels());
        let alpha = self.forward();
        let mut beta = vec![vec![0.0; n]; len];
        beta[len - 1].copy_from_slice(&self.end);
        for t in (0..len - 1).rev() {
            for y in 0..n {
                beta[t][y] = lse_iter(
                    (0..n).map(|q| self.trans[y][q] + self.emit[t + 1][q] + beta[t + 1][q]),
                );
            }
        }
        let mut m = ChainMarginals {
            log_partition: z,
            unary: vec![vec![0.0; n]; len],
            trans: vec![vec![0.0; n]; n],
            start: vec![0.0; n],
            end: vec![0.0; n],
        };
        for t in 0..len {
            for y in 0..n {
                m.unary[t][y] = (alpha[t][y] + beta[t][y] - z).exp();
            }
        }
        for t in 1..len {
            for p in 0..n {
                for y in 0..n {
                    m.trans[p][y] +=
                        (alpha[t - 1][p] + self.trans[p][y] + self.emit[t][y] + beta[t][y] - z).exp();
                }
            }
        }
        m.start.copy_from_slice(&m.unary[0]);
        m.end.copy_from_slice(&m.unary[len - 1]);
        Ok(m)
    }

    /// Viterbi; among equal scores the lowest label id wins at every
    /// backpointer and at the final position.
    pub fn decode(&self) -> Result<Vec<usize>> {
        self.check()?;
        let (len, n) = (self.len(), self.labels());
        let mut delta = vec![vec![0.0; n]; len];
        let mut back = vec![vec![0usize; n]; len];
        for y in 0..n {
            delta[0][y] = self.start[y] + self.emit[0][y];
        }
        for t in 1..len {
            for y in 0..n {
                let mut best = (f64::NEG_INFINITY, 0);
                for p in 0..n {
                    let s = delta[t - 1][p] + self.trans[p][y];
                    if s > best.0 {
                        best = (s, p);
                    }
                }
                delta[t][y] = best.0 + self.emit[t][y];
                back[t][y] = best.1;
            }
        }
        let mut best = (f64::NEG_INFINITY, 0);
        for y in 0..n {
            let s = delta[len - 1][y] + self.end[y];
            if s > best.0 {
                best = (s, y);
            }
        }
        if best.0 == f64::NEG_INFINITY {
            return Err(Error::invalid("no label sequence has finite score"));
        }
        let mut out = vec![best.1; len];
        for t in (1..len).rev() {
            out[t - 1] = back[t][out[t]];
        }
        Ok(out)
    }
}

/// A labeled segment `[start, end)`.
pub type LabeledSegment = (usize, usize, usize);

/// First-order semi-Markov potentials. `seg[(s * max_len + l - 1) * labels + y]`
/// scores the segment `[s, s + l)` with label `y`.
#[derive(Debug, Clone, PartialEq)]
pub struct SemiPotentials {
    pub len: usize,
    pub labels: usize,
    pub max_len: usize,
    pub seg: Vec<f64>,
    pub trans: Vec<Vec<f64>>,
    pub start: Vec<f64>,
    pub end: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SemiMarginals {
    pub log_partition: f64,
    /// Same indexing as [`SemiPotentials::seg`].
    pub seg: Vec<f64>,
    pub trans: Vec<Vec<f64>>,
    pub start: Vec<f64>,
    pub end: Vec<f64>,
}

impl SemiPotentials {
    /// All segment scores start at `-inf` beyond the sequence end and 0
    /// elsewhere.
    pub fn new(len: usize, labels: usize, max_len: usize) -> Self {
        let mut seg = vec![0.0; len * max_len * labels];
        for s in 0..len {
            for l in 1..=max_len {
                if s + l > len {
                    for y in 0..labels {
                        seg[(s * max_len + l - 1) * labels + y] = f64::NEG_INFINITY;
                    }
                }
            }
        }
        SemiPotentials {
            len,
            labels,
            max_len,
            seg,
            trans: vec![vec![0.0; labels]; labels],
            start: vec![0.0; labels],
            end: vec![0.0; labels],
        }
    }

    pub fn index(&self, start: usize, l: usize, y: usize) -> usize {
        (start * self.max_len + l - 1) * self.labels + y
    }

    pub fn seg_score(&self, start: usize, l: usize, y: usize) -> f64 {
        if start + l > self.len {
            return f64::NEG_INFINITY;
        }
        self.seg[self.index(start, l, y)]
    }

    pub fn score(&self, segments: &[LabeledSegment]) -> f64 {
        let mut s = 0.0;
        for (k, &(a, b, y)) in segments.iter().enumerate() {
            s += self.seg_score(a, b - a, y);
            s += if k == 0 {
                self.start[y]
            } else {
                self.trans[segments[k - 1].2][y]
            };
        }
        s + self.end[segments[segments.len() - 1].2]
    }

    fn check(&self) -> Result<()> {
        if self.len == 0 {
            return Err(Error::invalid("cannot score an empty query"));
        }
        if self.max_len == 0 {
            return Err(Error::invalid("maximum segment length must be at least 1"));
        }
        Ok(())
    }

    /// Log-score mass entering a segment that starts at `s` with label `y`.
    fn incoming(&self, alpha: &[Vec<f64>], s: usize, y: usize) -> f64 {
        if s == 0 {
            self.start[y]
        } else {
            lse_iter((0..self.labels).map(|p| alpha[s][p] + self.trans[p][y]))
        }
    }

    /// `alpha[j][y]`: log-sum over segmentations of `[0, j)` whose last
    /// segment has label `y`.
    fn forward(&self) -> Vec<Vec<f64>> {
        let n = self.labels;
        let mut alpha = vec![vec![f64::NEG_INFINITY; n]; self.len + 1];
        for j in 1..=self.len {
            for y in 0..n {
                alpha[j][y] = lse_iter((1..=self.max_len.min(j)).map(|l| {
                    self.seg_score(j - l, l, y) + self.incoming(&alpha, j - l, y)
                }));
            }
        }
        alpha
    }

    pub fn log_partition(&self) -> Result<f64> {
        self.check()?;
        let alpha = self.forward();
        let z = lse_iter((0..self.labels).map(|y| alpha[self.len][y] + self.end[y]));
        if z == f64::NEG_INFINITY {
            return Err(Error::invalid("no segmentation has finite score"));
        }
        Ok(z)
    }

    pub fn marginals(&self) -> Result<SemiMarginals> {
        let z = self.log_partition()?;
        let n = self.labels;
        let alpha = self.forward();
        // beta[j][y]: log-sum over completions of [j, len) after a segment
        // with label y ending at j.
        let mut beta = vec![vec![f64::NEG_INFINITY; n]; self.len + 1];
        beta[self.len].copy_from_slice(&self.end);
        for j in (1..self.len).rev() {
            for y in 0..n {
                beta[j][y] = lse_iter((1..=self.max_len.min(self.len - j)).flat_map(|l| {
                    let beta = &beta;
                    (0..n).map(move |q| self.trans[y][q] + self.seg_score(j, l, q) + beta[j + l][q])
                }));
            }
        }
        let mut m = SemiMarginals {
            log_partition: z,
            seg: vec![0.0; self.seg.len()],
            trans: vec![vec![0.0; n]; n],
            start: vec![0.0; n],
            end: vec![0.0; n],
        };
        for s in 0..self.len {
            for l in 1..=self.max_len.min(self.len - s) {
                for y in 0..n {
                    let inner = self.seg_score(s, l, y) + beta[s + l][y] - z;
                    if s == 0 {
                        let p = (self.start[y] + inner).exp();
                        m.seg[self.index(s, l, y)] = p;
                        m.start[y] += p;
                    } else {
                        let mut total = 0.0;
                        for p in 0..n {
                            let v = (alpha[s][p] + self.trans[p][y] + inner).exp();
                            m.trans[p][y] += v;
                            total += v;
                        }
                        m.seg[self.index(s, l, y)] = total;
                    }
                }
            }
        }
        for y in 0..n {
            m.end[y] = (alpha[self.len][y] + self.end[y] - z).exp();
        }
        Ok(m)
    }

    /// Best segmentation. Candidates are scanned by segment length, then
    /// previous label, then label, all ascending; only a strictly better
    /// score replaces the incumbent.
    pub fn decode(&self) -> Result<Vec<LabeledSegment>> {
        self.check()?;
        let n = self.labels;
        let mut best = vec![vec![f64::NEG_INFINITY; n]; self.len + 1];
        let mut back = vec![vec![(0usize, 0usize); n]; self.len + 1];
        for j in 1..=self.len {
            for y in 0..n {
                for l in 1..=self.max_len.min(j) {
                    let s = j - l;
                    let seg = self.seg_score(s, l, y);
                    if s == 0 {
                        let v = seg + self.start[y];
                        if v > best[j][y] {
                            best[j][y] = v;
                            back[j][y] = (l, 0);
                        }
                    } else {
                        for p in 0..n {
                            let v = seg + best[s][p] + self.trans[p][y];
                            if v > best[j][y] {
                                best[j][y] = v;
                                back[j][y] = (l, p);
                            }
                        }
                    }
                }
            }
        }
        let mut top = (f64::NEG_INFINITY, 0);
        for y in 0..n {
            let v = best[self.len][y] + self.end[y];
            if v > top.0 {
                top = (v, y);
            }
        }
        if top.0 == f64::NEG_INFINITY {
            return Err(Error::invalid("no segmentation has finite score"));
        }
        let mut out = Vec::new();
        let (mut j, mut y) = (self.len, top.1);
        while j > 0 {
            let (l, p) = back[j][y];
            out.push((j - l, j, y));
            j -= l;
            y = p;
        }
        out.reverse();
        Ok(out)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nn::seeded_rng;
    use rand::Rng;

    fn random_chain<R: Rng>(rng: &mut R, len: usize, n: usize) -> ChainPotentials {
        let mut v = |k: usize| (0..k).map(|_| rng.random_range(-2.0..2.0)).collect::<Vec<f64>>();
        ChainPotentials {
            emit: (0..len).map(|_| v(n)).collect(),
            trans: (0..n).map(|_| v(n)).collect(),
            start: v(n),
            end: v(n),
        }
    }

    fn all_sequences(len: usize, n: usize) -> Vec<Vec<usize>> {
        let mut out = vec![vec![]];
        for _ in 0..len {
            out = out
                .into_iter()
                .flat_map(|s| {
                    (0..n).map(move |y| {
                        let mut s = s.clone();
                        s.push(y);
                        s
                    })
                })
                .collect();
        }
        out
    }

    #[test]
    fn single_token_uniform_partition() {
        let c = ChainPotentials {
            emit: vec![vec![0.0; 15]],
            trans: vec![vec![0.0; 15]; 15],
            start: vec![0.0; 15],
            end: vec![0.0; 15],
        };
        assert!((c.log_partition().unwrap() - 15f64.ln()).abs() < 1e-12);
    }

    #[test]
    fn empty_query_rejected() {
        let c = ChainPotentials {
            emit: vec![],
            trans: vec![vec![0.0; 3]; 3],
            start: vec![0.0; 3],
            end: vec![0.0; 3],
        };
        assert!(c.log_partition().is_err());
        assert!(SemiPotentials::new(0, 3, 2).decode().is_err());
    }

    #[test]
    fn chain_matches_enumeration() {
        let mut rng = seeded_rng(3);
        for len in 1..=4 {
            let c = random_chain(&mut rng, len, 5);
            let seqs = all_sequences(len, 5);
            let scores: Vec<f64> = seqs.iter().map(|s| c.score(s)).collect();
            let z = crate::nn::logsumexp(&scores);
            assert!((c.log_partition().unwrap() - z).abs() < 1e-10);
            let best = (0..seqs.len())
                .max_by(|&a, &b| scores[a].partial_cmp(&scores[b]).unwrap())
                .unwrap();
            assert_eq!(c.decode().unwrap(), seqs[best]);
            let m = c.marginals().unwrap();
            for t in 0..len {
                for y in 0..5 {
                    let p: f64 = seqs
                        .iter()
                        .zip(&scores)
                        .filter(|(s, _)| s[t] == y)
                        .map(|(_, sc)| (sc - z).exp())
                        .sum();
                    assert!((m.unary[t][y] - p).abs() < 1e-10);
                }
            }
        }
    }

    #[test]
    fn constant_emission_shift() {
        let mut rng = seeded_rng(9);
        let c = random_chain(&mut rng, 4, 6);
        let mut d = c.clone();
        for row in &mut d.emit {
            for v in row.iter_mut() {
                *v += 0.75;
            }
        }
        let diff = d.log_partition().unwrap() - c.log_partition().unwrap();
        assert!((diff - 3.0).abs() < 1e-10);
    }

    #[test]
    fn ties_pick_lowest_labels() {
        let c = ChainPotentials {
            emit: vec![vec![0.0; 4]; 3],
            trans: vec![vec![0.0; 4]; 4],
            start: vec![0.0; 4],
            end: vec![0.0; 4],
        };
        assert_eq!(c.decode().unwrap(), vec![0, 0, 0]);
        let s = SemiPotentials::new(3, 4, 2);
        assert_eq!(s.decode().unwrap(), vec![(0, 1, 0), (1, 2, 0), (2, 3, 0)]);
    }

    #[test]
    fn semi_with_unit_segments_equals_chain() {
        let mut rng = seeded_rng(5);
        let c = random_chain(&mut rng, 5, 4);
        let mut s = SemiPotentials::new(5, 4, 1);
        for t in 0..5 {
            for y in 0..4 {
                let i = s.index(t, 1, y);
                s.seg[i] = c.emit[t][y];
            }
        }
        s.trans = c.trans.clone();
        s.start = c.start.clone();
        s.end = c.end.clone();
        assert!((s.log_partition().unwrap() - c.log_partition().unwrap()).abs() < 1e-10);
        let labels: Vec<usize> = s.decode().unwrap().iter().map(|x| x.2).collect();
        assert_eq!(labels, c.decode().unwrap());
    }
}
