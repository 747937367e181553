//! Latency benchmark harness: replays a request list in a fixed order against
//! an in-process target and reports nearest-rank percentiles.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::time::{Duration, Instant};

use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::evalbench::metrics::percentile;

pub const DEFAULT_WARMUP: usize = 100;
pub const MIN_SAMPLES: usize = 1000;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct BenchConfig {
    /// Requests issued before measuring; excluded from the statistics.
    pub warmup: usize,
    /// Measured requests; the request list is cycled to reach it.
    pub samples: usize,
}

impl Default for BenchConfig {
    fn default() -> Self {
        BenchConfig {
            warmup: DEFAULT_WARMUP,
            samples: MIN_SAMPLES,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LatencyStats {
    pub samples: usize,
    pub p50_us: f64,
    pub p95_us: f64,
    pub p99_us: f64,
    pub mean_us: f64,
}

impl LatencyStats {
    pub fn from_samples(samples: &[Duration]) -> Result<Self> {
        let us = |d: Duration| d.as_nanos() as f64 / 1000.0;
        Ok(LatencyStats {
            samples: samples.len(),
            p50_us: us(percentile(samples, 0.50)?),
            p95_us: us(percentile(samples, 0.95)?),
            p99_us: us(percentile(samples, 0.99)?),
            mean_us: samples.iter().map(|&d| us(d)).sum::<f64>() / samples.len() as f64,
        })
    }
}

/// Times `target` on every request. A failing request aborts the run, so no
/// partial statistics are ever produced.
pub fn bench_latency<R, F>(requests: &[R], cfg: &BenchConfig, mut target: F) -> Result<LatencyStats>
where
    F: FnMut(&R) -> Result<()>,
{
    if requests.is_empty() {
        return Err(Error::invalid("empty benchmark workload"));
    }
    if cfg.samples == 0 {
        return Err(Error::invalid("benchmark needs at least one sample"));
    }
    let mut cycle = requests.iter().cycle();
    let fail = |e: Error| Error::Target(e.to_string());
    for r in cycle.by_ref().take(cfg.warmup) {
        target(r).map_err(fail)?;
    }
    let mut samples = Vec::with_capacity(cfg.samples);
    for r in cycle.take(cfg.samples) {
        let t = Instant::now();
        target(r).map_err(fail)?;
        samples.push(t.elapsed());
    }
    LatencyStats::from_samples(&samples)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LatencyRow {
    pub strategy: String,
    #[serde(flatten)]
    pub stats: LatencyStats,
}

/// `baseline` divided by `candidate`; above 1 means the candidate is faster.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Comparison {
    pub baseline: String,
    pub candidate: String,
    pub p50_speedup: f64,
    pub p99_speedup: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LatencyReport {
    pub workload: String,
    pub config_hash: String,
    pub rows: Vec<LatencyRow>,
    pub comparisons: Vec<Comparison>,
}

impl LatencyReport {
    pub fn new(workload: &str, config_hash: &str) -> Self {
        LatencyReport {
            workload: workload.to_string(),
            config_hash: config_hash.to_string(),
            rows: Vec::new(),
            comparisons: Vec::new(),
        }
    }

    pub fn push(&mut self, strategy: &str, stats: LatencyStats) {
        self.rows.push(LatencyRow {
            strategy: strategy.to_string(),
            stats,
        });
    }

    pub fn row(&self, strategy: &str) -> Option<&LatencyStats> {
        self.rows.iter().find(|r| r.strategy == strategy).map(|r| &r.stats)
    }

    pub fn compare(&mut self, baseline: &str, candidate: &str) -> Result<&Comparison> {
        let unknown = |s: &str| Error::invalid(format!("no benchmark row for {s}"));
        let b = self.row(baseline).ok_or_else(|| unknown(baseline))?;
        let c = self.row(candidate).ok_or_else(|| unknown(candidate))?;
        let cmp = Comparison {
            baseline: baseline.to_string(),
            candidate: candidate.to_string(),
            p50_speedup: b.p50_us / c.p50_us.max(1e-9),
            p99_speedup: b.p99_us / c.p99_us.max(1e-9),
        };
        self.comparisons.push(cmp);
        Ok(self.comparisons.last().expect("just pushed"))
    }

    pub fn to_tsv(&self) -> String {
        let mut out = String::from("workload\tstrategy\tsamples\tp50_us\tp95_us\tp99_us\tmean_us\n");
        for r in &self.rows {
            let s = &r.stats;
            let _ = writeln!(
                out,
                "{}\t{}\t{}\t{:.1}\t{:.1}\t{:.1}\t{:.1}",
                self.workload, r.strategy, s.samples, s.p50_us, s.p95_us, s.p99_us, s.mean_us
            );
        }
        out
    }

    /// Writes `latency-<hash>.tsv` and `.json` into `dir`.
    pub fn write(&self, dir: &Path) -> Result<(PathBuf, PathBuf)> {
        std::fs::create_dir_all(dir)?;
        let stem = format!("latency-{}", short_hash(&self.config_hash));
        let tsv = dir.join(format!("{stem}.tsv"));
        let json = dir.join(format!("{stem}.json"));
        std::fs::write(&tsv, self.to_tsv())?;
        std::fs::write(&json, serde_json::to_string_pretty(self)?)?;
        Ok((tsv, json))
    }
}

/// Hex SHA-256 of a configuration's text form.
pub fn config_hash(text: &str) -> String {
    hex::encode(Sha256::digest(text.as_bytes()))
}

pub fn short_hash(hash: &str) -> &str {
    &hash[..hash.len().min(12)]
}
