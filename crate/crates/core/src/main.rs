use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::sync::Arc;

use clap::{Args, Parser, Subcommand};

use vsearch::autocomplete::RankerKind;
use vsearch::evalbench::{bench_latency, config_hash, BenchConfig, LatencyReport, Task, DEFAULT_WARMUP, MIN_SAMPLES};
use vsearch::pipeline::{self, file_hashes, manifest_text, Settings, WorkloadKind};
use vsearch::ranker::Strategy;
use vsearch::serving::{self, read_workload, write_workload, Engine, Request, ServingConfig};
use vsearch::{Error, Result};

/// Vertical search toolkit: data generation, training, evaluation, serving
/// and benchmarking.
#[derive(Debug, Parser)]
#[command(name = "vsearch", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Args)]
struct Common {
    /// Seed for every random choice the command makes.
    #[arg(long, default_value_t = 1)]
    seed: u64,
    /// Settings file of `key = value` lines.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Override one setting; repeatable. Wins over the settings file.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    set: Vec<String>,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Generate a synthetic world: documents, query log, lexicons, tagged queries.
    Gen {
        #[arg(long)]
        out: PathBuf,
        #[command(flatten)]
        common: Common,
    },
    /// Split the query log and mine intent labels and suggestion pairs.
    Mine {
        #[arg(long)]
        data: PathBuf,
        #[command(flatten)]
        common: Common,
    },
    /// Train the models of one task: intent, tagger, autocomplete, suggest or ranker.
    Train {
        task: Task,
        #[arg(long)]
        data: PathBuf,
        /// Model directory.
        #[arg(long)]
        out: PathBuf,
        #[command(flatten)]
        common: Common,
    },
    /// Evaluate a task's models on a held-out split and write a report.
    Eval {
        #[arg(long)]
        task: Task,
        /// Split file; defaults to the task's test split inside --data.
        #[arg(long)]
        split: Option<PathBuf>,
        #[arg(long)]
        data: PathBuf,
        #[arg(long)]
        models: PathBuf,
        /// Run directory for the report.
        #[arg(long)]
        out: PathBuf,
        #[command(flatten)]
        common: Common,
    },
    /// Serve the HTTP API.
    Serve {
        /// Service configuration file.
        #[arg(long)]
        config: PathBuf,
        #[arg(long = "set", value_name = "KEY=VALUE")]
        set: Vec<String>,
        /// Directory for the run manifest.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Benchmarks and workloads.
    #[command(subcommand)]
    Bench(BenchCommand),
}

#[derive(Debug, Subcommand)]
enum BenchCommand {
    /// Replay a workload in-process and report latency percentiles.
    Latency {
        /// JSON-lines request file.
        #[arg(long)]
        workload: PathBuf,
        /// Comma-separated ranking strategies (full, precomputed, two-pass) or
        /// autocomplete rankers (frequency, normalized, unnormalized). The
        /// first is the baseline the others are compared against.
        #[arg(long)]
        strategy: String,
        /// Service configuration file.
        #[arg(long)]
        config: PathBuf,
        #[arg(long = "set", value_name = "KEY=VALUE")]
        set: Vec<String>,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = DEFAULT_WARMUP)]
        warmup: usize,
        #[arg(long, default_value_t = MIN_SAMPLES)]
        samples: usize,
    },
    /// Build a request workload from the test split of the query log.
    Workload {
        #[arg(long)]
        data: PathBuf,
        /// keystrokes or search.
        #[arg(long, default_value = "keystrokes")]
        kind: WorkloadKind,
        /// Number of distinct queries.
        #[arg(long, default_value_t = 200)]
        queries: usize,
        #[arg(long)]
        out: PathBuf,
    },
}

fn settings(common: &Common) -> Result<Settings> {
    let mut s = match &common.config {
        Some(p) => Settings::parse(&std::fs::read_to_string(p)?)?,
        None => Settings::new(),
    };
    for kv in &common.set {
        s.set(kv)?;
    }
    Ok(s)
}

fn serving_config(path: &Path, overrides: &[String]) -> Result<ServingConfig> {
    let mut cfg = ServingConfig::load(path)?;
    for kv in overrides {
        let (k, v) = kv
            .split_once('=')
            .ok_or_else(|| Error::invalid(format!("expected key=value, got {kv:?}")))?;
        cfg.set(k.trim(), v.trim())?;
    }
    Ok(cfg)
}

/// Manifest entries shared by every run.
struct Manifest {
    entries: BTreeMap<String, String>,
}

impl Manifest {
    fn new(command: &str) -> Self {
        let mut entries = BTreeMap::new();
        entries.insert("command".to_string(), command.to_string());
        entries.insert("version".to_string(), env!("CARGO_PKG_VERSION").to_string());
        Manifest { entries }
    }

    fn put(&mut self, key: impl Into<String>, value: impl ToString) {
        self.entries.insert(key.into(), value.to_string());
    }

    fn settings(&mut self, s: &Settings) {
        for key in s.unused() {
            log::debug!("setting {key} is not used by this command");
        }
        for (k, v) in s.resolved() {
            self.put(format!("config.{k}"), v);
        }
    }

    fn hashes(&mut self, prefix: &str, root: &Path, paths: &[PathBuf]) -> Result<()> {
        for p in paths {
            for (rel, h) in file_hashes(root, p)? {
                self.put(format!("{prefix}.{rel}"), h);
            }
        }
        Ok(())
    }

    /// Hash of the settings part, used to name reports.
    fn config_hash(&self) -> String {
        let cfg: BTreeMap<String, String> = self
            .entries
            .iter()
            .filter(|(k, _)| !k.starts_with("output."))
            .map(|(k, v)| (k.clone(), v.clone()))
            .collect();
        config_hash(&manifest_text(&cfg))
    }

    fn write(&self, dir: &Path, name: &str) -> Result<()> {
        std::fs::create_dir_all(dir)?;
        let path = dir.join(format!("manifest-{name}.txt"));
        std::fs::write(&path, manifest_text(&self.entries))?;
        log::info!("wrote {}", path.display());
        Ok(())
    }
}

fn model_files(dir: &Path) -> Result<Vec<PathBuf>> {
    if !dir.is_dir() {
        return Ok(Vec::new());
    }
    let mut out: Vec<PathBuf> = std::fs::read_dir(dir)?
        .map(|e| e.map(|e| e.path()))
        .collect::<std::io::Result<_>>()?;
    out.retain(|p| !p.file_name().is_some_and(|n| n.to_string_lossy().starts_with("manifest-")));
    out.sort();
    Ok(out)
}

/// Applies a strategy or autocomplete ranker name to a request that does
/// not already choose one.
fn with_strategy(req: &Request, name: &str) -> Result<Request> {
    let mut req = req.clone();
    match &mut req {
        Request::Search { strategy, .. } => {
            name.parse::<Strategy>()?;
            strategy.get_or_insert_with(|| name.to_string());
        }
        Request::Autocomplete { ranker, .. } => {
            name.parse::<RankerKind>()?;
            ranker.get_or_insert_with(|| name.to_string());
        }
        _ => {}
    }
    Ok(req)
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Gen { out, common } => {
            let s = settings(&common)?;
            let written = pipeline::generate(&out, &s, common.seed)?;
            let mut m = Manifest::new("gen");
            m.put("seed", common.seed);
            m.settings(&s);
            m.hashes("output", &out, &written)?;
            m.write(&out, "gen")
        }
        Command::Mine { data, common } => {
            let s = settings(&common)?;
            let written = pipeline::mine(&data, &s, common.seed)?;
            let mut m = Manifest::new("mine");
            m.put("seed", common.seed);
            m.settings(&s);
            m.hashes("input", &data, &[data.join(serving::config::files::QUERY_LOG)])?;
            m.hashes("output", &data, &written)?;
            m.write(&data, "mine")
        }
        Command::Train { task, data, out, common } => {
            let s = settings(&common)?;
            let written = pipeline::train(task, &data, &out, &s, common.seed)?;
            let mut m = Manifest::new(&format!("train {}", task.name()));
            m.put("seed", common.seed);
            m.put("data", data.display());
            m.settings(&s);
            m.hashes("output", &out, &written)?;
            m.write(&out, &format!("train-{}", task.name()))
        }
        Command::Eval { task, split, data, models, out, common } => {
            let s = settings(&common)?;
            let split = split.unwrap_or_else(|| pipeline::default_split(task, &data));
            let report = pipeline::evaluate(task, &split, &data, &models, &s, common.seed)?;
            let mut m = Manifest::new(&format!("eval {}", task.name()));
            m.put("seed", common.seed);
            m.put("split", split.display());
            m.settings(&s);
            m.hashes("input", split.parent().unwrap_or(Path::new(".")), &[split.clone()])?;
            m.hashes("model", &models, &model_files(&models)?)?;
            let report = report.with_config_hash(&m.config_hash());
            let (json, tsv) = report.write(&out)?;
            for (k, v) in &report.metrics {
                println!("{}\t{k}\t{v:.6}", task.name());
            }
            m.hashes("output", &out, &[json, tsv])?;
            m.write(&out, &format!("eval-{}", task.name()))
        }
        Command::Serve { config, set, out } => {
            let cfg = serving_config(&config, &set)?;
            let mut m = Manifest::new("serve");
            for (k, v) in cfg.to_pairs() {
                m.put(format!("config.{k}"), v);
            }
            m.hashes("model", &cfg.model_dir, &model_files(&cfg.model_dir)?)?;
            match &out {
                Some(dir) => m.write(dir, "serve")?,
                None => log::info!("manifest:\n{}", manifest_text(&m.entries)),
            }
            let engine = Arc::new(Engine::load(cfg)?);
            let rt = tokio::runtime::Runtime::new()?;
            rt.block_on(serving::http::serve(engine))
        }
        Command::Bench(BenchCommand::Latency {
            workload,
            strategy,
            config,
            set,
            out,
            warmup,
            samples,
        }) => {
            let cfg = serving_config(&config, &set)?;
            let requests = read_workload(&std::fs::read_to_string(&workload)?)?;
            let names: Vec<&str> = strategy.split(',').map(str::trim).filter(|s| !s.is_empty()).collect();
            if names.is_empty() {
                return Err(Error::invalid("--strategy needs at least one name"));
            }
            let mut m = Manifest::new("bench latency");
            for (k, v) in cfg.to_pairs() {
                m.put(format!("config.{k}"), v);
            }
            m.put("strategy", &strategy);
            m.put("warmup", warmup);
            m.put("samples", samples);
            m.hashes("input", workload.parent().unwrap_or(Path::new(".")), &[workload.clone()])?;
            m.hashes("model", &cfg.model_dir, &model_files(&cfg.model_dir)?)?;
            let engine = Engine::load(cfg)?;
            let bench = BenchConfig { warmup, samples };
            let id = workload.file_stem().map_or("workload".into(), |s| s.to_string_lossy().into_owned());
            let mut report = LatencyReport::new(&id, &m.config_hash());
            for name in &names {
                let reqs = requests.iter().map(|r| with_strategy(r, name)).collect::<Result<Vec<_>>>()?;
                let stats = bench_latency(&reqs, &bench, |r| engine.handle(r).map(drop))?;
                report.push(name, stats);
            }
            for name in names.iter().skip(1) {
                report.compare(names[0], name)?;
            }
            print!("{}", report.to_tsv());
            for c in &report.comparisons {
                println!("# {} vs {}: p50 x{:.2}, p99 x{:.2}", c.baseline, c.candidate, c.p50_speedup, c.p99_speedup);
            }
            let (tsv, json) = report.write(&out)?;
            m.hashes("output", &out, &[tsv, json])?;
            m.write(&out, "bench")
        }
        Command::Bench(BenchCommand::Workload { data, kind, queries, out }) => {
            let reqs = pipeline::build_workload(&data, kind, queries)?;
            std::fs::write(&out, write_workload(&reqs)?)?;
            let dir = out.parent().filter(|p| !p.as_os_str().is_empty()).unwrap_or(Path::new("."));
            let mut m = Manifest::new("bench workload");
            m.put("kind", format!("{kind:?}").to_lowercase());
            m.put("queries", queries);
            m.hashes("input", &data, &[data.join(pipeline::split_file(serving::config::files::QUERY_LOG, "test"))])?;
            m.hashes("output", dir, &[out.clone()])?;
            m.write(dir, "workload")
        }
    }
}

fn error_kind(e: &Error) -> &'static str {
    match e {
        Error::InvalidInput(_) => "invalid_input",
        Error::Shape(_) => "shape",
        Error::Diverged(_) => "diverged",
        Error::Format { .. } => "format",
        Error::StaleStore { .. } => "stale_store",
        Error::MissingDocument(_) => "missing_document",
        Error::Unavailable(_) => "unavailable",
        Error::Target(_) => "target",
        Error::Io(_) => "io",
        Error::Json(_) => "json",
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            let line = serde_json::json!({ "error": error_kind(&e), "message": e.to_string() });
            eprintln!("{line}");
            ExitCode::FAILURE
        }
    }
}
